# relevation_lab/dist_core.py

# Lifetime laws. Every public evaluator takes a scalar or an array and returns
# the same shape; samplers are pure functions of (distribution, u, s) so the
# process simulators can share uniforms between policies.

import logging
import math
from typing import ClassVar, Dict, Literal, Tuple, Type

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError
from scipy import stats

from relevation_lab.errors import BracketError, ConfigError, DomainError, OutOfSupportError

logger = logging.getLogger(__name__)

SURVIVAL_FLOOR = 1e-300
BISECTION_RTOL = 1e-12
_MAX_BISECTIONS = 1100  # enough to walk the whole double exponent range


def _scalar_or_array(values: np.ndarray, like):
    return float(values) if np.ndim(like) == 0 else values


def _format_number(value: float) -> str:
    short = f"{value:g}"
    return short if float(short) == value else repr(float(value))


class LifetimeDistribution(BaseModel):
    """Survival / density / hazard / quantile bundle for one unit's life law.

    Subclasses implement the private array kernels (`_cumulative_hazard`,
    `_hazard` and, where a better closed form exists, `_survival`/`_density`);
    the public methods add domain checks and the support clamp.
    """

    model_config = ConfigDict(frozen=True)

    PARAMETERS: ClassVar[Tuple[str, ...]] = ()

    # numeric workspace
    quad_tol: float = Field(1e-8, gt=0, description="absolute quadrature tolerance for integrals of this law")
    bracket_bound: float = Field(1e12, gt=1, description="largest time tried when bracketing an inverse")

    # -- kernels -----------------------------------------------------------
    def _cumulative_hazard(self, t: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _hazard(self, t: np.ndarray) -> np.ndarray:
        return self._density(t) / self._survival(t)

    def _survival(self, t: np.ndarray) -> np.ndarray:
        return np.exp(-self._cumulative_hazard(t))

    def _density(self, t: np.ndarray) -> np.ndarray:
        return self._hazard(t) * self._survival(t)

    def _inverse_cumulative_hazard(self, h: np.ndarray) -> np.ndarray:
        return self._bisect_cumulative_hazard(h)

    def breakpoints(self) -> Tuple[float, ...]:
        """Times where the density is not smooth."""
        return ()

    @property
    def token(self) -> str:
        if not self.PARAMETERS:
            return self.family
        params = ",".join(f"{key}={_format_number(getattr(self, key))}" for key in self.PARAMETERS)
        return f"{self.family}:{params}"

    # -- checks ------------------------------------------------------------
    def _times(self, t) -> np.ndarray:
        arr = np.asarray(t, dtype=float)
        if np.any(np.isnan(arr)) or np.any(arr < 0):
            raise DomainError(f"[{self.token}] time must be >= 0, got {np.min(arr)!r}")
        return arr

    def _uniforms(self, u) -> np.ndarray:
        arr = np.asarray(u, dtype=float)
        if np.any(~((arr > 0) & (arr < 1))):
            raise DomainError(f"[{self.token}] uniform input must lie in (0,1)")
        return arr

    def _clamped_survival(self, t: np.ndarray) -> np.ndarray:
        with np.errstate(over="ignore", under="ignore"):
            s = np.clip(self._survival(t), 0.0, 1.0)
        return np.where(s < SURVIVAL_FLOOR, 0.0, s)

    def _require_support(self, t: np.ndarray) -> None:
        s = self._clamped_survival(t)
        if np.any(s <= 0):
            bad = float(np.min(np.where(s <= 0, t, np.inf)))
            raise OutOfSupportError(f"[{self.token}] survival vanishes at t={bad:.17g}")

    # -- public operations -------------------------------------------------
    def survival(self, t):
        arr = self._times(t)
        return _scalar_or_array(self._clamped_survival(arr), t)

    def density(self, t):
        arr = self._times(t)
        with np.errstate(divide="ignore", over="ignore", under="ignore", invalid="ignore"):
            f = self._density(arr)
        return _scalar_or_array(np.maximum(np.where(np.isnan(f), 0.0, f), 0.0), t)

    def hazard(self, t):
        arr = self._times(t)
        self._require_support(arr)
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            r = self._hazard(arr)
        return _scalar_or_array(np.maximum(r, 0.0), t)

    def cumulative_hazard(self, t):
        arr = self._times(t)
        self._require_support(arr)
        with np.errstate(over="ignore"):
            h = self._cumulative_hazard(arr)
        return _scalar_or_array(np.maximum(h, 0.0), t)

    def inverse_cumulative_hazard(self, h):
        """Smallest t with cumulative_hazard(t) = h, for h >= 0."""
        arr = np.asarray(h, dtype=float)
        if np.any(np.isnan(arr)) or np.any(arr < 0):
            raise DomainError(f"[{self.token}] cumulative hazard level must be >= 0")
        if np.any(np.isinf(arr)):
            raise BracketError(f"[{self.token}] cannot invert an infinite cumulative hazard")
        with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
            t = self._inverse_cumulative_hazard(np.atleast_1d(arr))
        return _scalar_or_array(np.maximum(t.reshape(arr.shape), 0.0), h)

    def quantile(self, p):
        arr = np.asarray(p, dtype=float)
        if np.any(~((arr > 0) & (arr < 1))):
            raise DomainError(f"[{self.token}] quantile level must lie in (0,1)")
        return self.inverse_cumulative_hazard(_scalar_or_array(-np.log1p(-arr), p))

    def sample(self, u):
        """Inverse-transform draw: the t solving survival(t) = u."""
        arr = self._uniforms(u)
        return self.inverse_cumulative_hazard(_scalar_or_array(-np.log(arr), u))

    def sample_conditional_exceed(self, u, s):
        """Draw from [X | X > s]: the t solving survival(t) / survival(s) = u; always t > s."""
        u_arr = self._uniforms(u)
        s_arr = self._times(s)
        self._require_support(s_arr)
        with np.errstate(over="ignore"):
            level = self._cumulative_hazard(s_arr) - np.log(u_arr)
        t = np.asarray(self.inverse_cumulative_hazard(level), dtype=float)
        t = np.maximum(t, np.nextafter(s_arr, np.inf))
        return float(t) if np.ndim(u) == 0 and np.ndim(s) == 0 else t

    def density_over_survival(self, other: "LifetimeDistribution", t):
        """f(t)/Ḡ(t) for Ḡ the survival of `other`, as r(t)·exp(R_other(t) − R(t)) so neither tail underflows."""
        arr = self._times(t)
        with np.errstate(divide="ignore", over="ignore", under="ignore", invalid="ignore"):
            value = self._hazard(arr) * np.exp(other._cumulative_hazard(arr) - self._cumulative_hazard(arr))
        return _scalar_or_array(np.maximum(np.where(np.isnan(value), 0.0, value), 0.0), t)

    def log_survival_ratio(self, other: "LifetimeDistribution", t):
        """ln(F̄(t)/Ḡ(t)) for Ḡ the survival of `other`; +inf where Ḡ has no mass left."""
        arr = self._times(t)
        with np.errstate(over="ignore", invalid="ignore"):
            value = other._cumulative_hazard(arr) - self._cumulative_hazard(arr)
        return _scalar_or_array(np.where(np.isnan(value), np.inf, value), t)

    # -- numeric fallback --------------------------------------------------
    def _bisect_cumulative_hazard(self, h: np.ndarray) -> np.ndarray:
        """Exponential bracketing from t=1, then bisection to BISECTION_RTOL relative width."""
        zero = h == 0
        h = np.where(zero, 1.0, h)
        lo = np.zeros_like(h)
        hi = np.ones_like(h)
        need = self._cumulative_hazard(hi) < h
        while np.any(need):
            lo = np.where(need, hi, lo)
            hi = np.where(need, 2.0 * hi, hi)
            if np.any(hi > self.bracket_bound):
                raise BracketError(
                    f"[{self.token}] no bracket below {self.bracket_bound:g} for cumulative hazard {float(np.max(h)):.6g}"
                )
            need = self._cumulative_hazard(hi) < h
        for _ in range(_MAX_BISECTIONS):
            mid = 0.5 * (lo + hi)
            below = self._cumulative_hazard(mid) < h
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
            if np.all(hi - lo <= BISECTION_RTOL * hi):
                break
        return np.where(zero, 0.0, 0.5 * (lo + hi))


class Exponential(LifetimeDistribution):
    family: Literal["exp"] = "exp"
    rate: float = Field(1.0, gt=0)

    PARAMETERS: ClassVar[Tuple[str, ...]] = ("rate",)

    def _cumulative_hazard(self, t):
        return self.rate * t

    def _hazard(self, t):
        return np.full_like(t, self.rate)

    def _density(self, t):
        return self.rate * np.exp(-self.rate * t)

    def _inverse_cumulative_hazard(self, h):
        return h / self.rate


class Gamma(LifetimeDistribution):
    """Gamma law with density x^(a-1) e^(-x/b) / (b^a Γ(a))."""

    family: Literal["gamma"] = "gamma"
    shape: float = Field(1.0, gt=0)
    scale: float = Field(1.0, gt=0)

    PARAMETERS: ClassVar[Tuple[str, ...]] = ("shape", "scale")

    def _survival(self, t):
        return stats.gamma.sf(t, self.shape, scale=self.scale)

    def _density(self, t):
        return stats.gamma.pdf(t, self.shape, scale=self.scale)

    def _hazard(self, t):
        return np.exp(stats.gamma.logpdf(t, self.shape, scale=self.scale) - stats.gamma.logsf(t, self.shape, scale=self.scale))

    def _cumulative_hazard(self, t):
        return -stats.gamma.logsf(t, self.shape, scale=self.scale)

    def _inverse_cumulative_hazard(self, h):
        p = np.exp(-h)
        direct = p > SURVIVAL_FLOOR
        out = np.empty_like(h)
        # lower-tail form near t = 0, where p rounds to 1
        head = direct & (p > 0.5)
        tail = direct & ~head
        out[head] = stats.gamma.ppf(-np.expm1(-h[head]), self.shape, scale=self.scale)
        out[tail] = stats.gamma.isf(p[tail], self.shape, scale=self.scale)
        if np.any(~direct):
            out[~direct] = self._bisect_cumulative_hazard(h[~direct])
        # one Newton step on the cumulative hazard tightens isf in the far tail
        rate = self._hazard(out)
        step = (self._cumulative_hazard(out) - h) / rate
        ok = direct & np.isfinite(step) & (rate > 0) & (np.abs(step) < 1e-6 * np.maximum(out, 1e-300))
        out[ok] -= step[ok]
        return np.where(h == 0, 0.0, out)


class Weibull(LifetimeDistribution):
    family: Literal["weibull"] = "weibull"
    shape: float = Field(1.0, gt=0)
    scale: float = Field(1.0, gt=0)

    PARAMETERS: ClassVar[Tuple[str, ...]] = ("shape", "scale")

    def _cumulative_hazard(self, t):
        return (t / self.scale) ** self.shape

    def _hazard(self, t):
        return (self.shape / self.scale) * (t / self.scale) ** (self.shape - 1.0)

    def _inverse_cumulative_hazard(self, h):
        return self.scale * h ** (1.0 / self.shape)


class StoyanovNBU(LifetimeDistribution):
    """Survival exp(-h(t)), h = sin²t on [0, π/2] and (π/2)(t - π/2) + 1 beyond.

    NBU but not IFR. The density jumps at π/2 (left limit 0, right limit
    (π/2)e^{-1}); each branch is evaluated on its own interval.
    """

    family: Literal["stoyanov"] = "stoyanov"

    KINK: ClassVar[float] = math.pi / 2

    def _cumulative_hazard(self, t):
        return np.where(t <= self.KINK, np.sin(np.minimum(t, self.KINK)) ** 2, self.KINK * (t - self.KINK) + 1.0)

    def _hazard(self, t):
        return np.where(t <= self.KINK, np.sin(2.0 * np.minimum(t, self.KINK)), self.KINK)

    def _inverse_cumulative_hazard(self, h):
        left = np.arcsin(np.sqrt(np.minimum(h, 1.0)))
        right = self.KINK + (h - 1.0) / self.KINK
        return np.where(h <= 1.0, left, right)

    def breakpoints(self):
        return (self.KINK,)


class LaiXieNonMonotone(LifetimeDistribution):
    """F(t) = 1 - exp(-t^0.2 e^{1.1t}); bathtub hazard, neither NBU nor NWU."""

    family: Literal["laixie"] = "laixie"

    POWER: ClassVar[float] = 0.2
    GROWTH: ClassVar[float] = 1.1

    def _cumulative_hazard(self, t):
        return t ** self.POWER * np.exp(self.GROWTH * t)

    def _hazard(self, t):
        growth = np.exp(self.GROWTH * t)
        return self.POWER * t ** (self.POWER - 1.0) * growth + self.GROWTH * t ** self.POWER * growth


class Residual(LifetimeDistribution):
    """Remaining life [X - age | X > age] of a unit that has survived to `age`."""

    family: Literal["residual"] = "residual"
    base: LifetimeDistribution
    age: float = Field(ge=0)

    @property
    def token(self) -> str:
        return f"residual({self.base.token},age={_format_number(self.age)})"

    def model_post_init(self, __context) -> None:
        if self.base.survival(self.age) <= 0:
            raise OutOfSupportError(f"[{self.base.token}] no residual life beyond age {self.age:.6g}")

    def _cumulative_hazard(self, t):
        return self.base._cumulative_hazard(t + self.age) - self.base._cumulative_hazard(np.asarray(self.age))

    def _hazard(self, t):
        return self.base._hazard(t + self.age)

    def _inverse_cumulative_hazard(self, h):
        start = self.base._cumulative_hazard(np.asarray(self.age))
        return np.maximum(self.base._inverse_cumulative_hazard(h + start) - self.age, 0.0)

    def breakpoints(self):
        return tuple(p - self.age for p in self.base.breakpoints() if p > self.age)


class HazardMultiple(LifetimeDistribution):
    """Law whose hazard is `multiplier` times the base hazard: survival exp(-m·R(t))."""

    family: Literal["hazard_multiple"] = "hazard_multiple"
    base: LifetimeDistribution
    multiplier: float = Field(gt=0)

    @property
    def token(self) -> str:
        return f"{_format_number(self.multiplier)}*{self.base.token}"

    def _cumulative_hazard(self, t):
        return self.multiplier * self.base._cumulative_hazard(t)

    def _hazard(self, t):
        return self.multiplier * self.base._hazard(t)

    def _inverse_cumulative_hazard(self, h):
        return self.base._inverse_cumulative_hazard(h / self.multiplier)

    def breakpoints(self):
        return self.base.breakpoints()


FAMILIES: Dict[str, Type[LifetimeDistribution]] = {
    "exp": Exponential,
    "exponential": Exponential,
    "gamma": Gamma,
    "weibull": Weibull,
    "stoyanov": StoyanovNBU,
    "laixie": LaiXieNonMonotone,
}


def parse_distribution(token: str) -> LifetimeDistribution:
    """Parse the mini-grammar: `exp:rate=1`, `gamma:shape=2,scale=1`, `weibull:shape=2,scale=1`, `stoyanov`, `laixie`."""
    text = (token or "").strip()
    name, _, params = text.partition(":")
    name = name.strip().lower()
    family = FAMILIES.get(name)
    if family is None:
        raise ConfigError(
            f"unknown distribution '{name}' in '{token}'; expected one of exp, gamma, weibull, stoyanov, laixie"
        )
    expected = ", ".join(family.PARAMETERS) or "(none)"

    kwargs = {}
    for item in filter(None, (part.strip() for part in params.split(","))):
        key, sep, value = item.partition("=")
        key = key.strip()
        if not sep or not key:
            raise ConfigError(f"malformed parameter '{item}' in '{token}'; expected key=value with keys {expected}")
        if key not in family.PARAMETERS:
            raise ConfigError(f"unknown key '{key}' in '{token}'; expected keys {expected}")
        try:
            kwargs[key] = float(value)
        except ValueError:
            raise ConfigError(f"non-numeric value '{value.strip()}' for key '{key}' in '{token}'") from None

    try:
        return family(**kwargs)
    except ValidationError as e:
        first = e.errors()[0]
        raise ConfigError(f"invalid parameter '{first['loc'][0]}' in '{token}': {first['msg']}") from None
