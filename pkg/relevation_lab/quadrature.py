# relevation_lab/quadrature.py

# Adaptive quadrature helpers shared by the relevation transform, the EPB level
# cache and the order criteria.

import logging
import warnings
from typing import Callable, Iterable, Optional, Sequence

import numpy as np
from numpy.polynomial import Chebyshev
from numpy.polynomial.chebyshev import chebval
from scipy.integrate import IntegrationWarning, quad

from relevation_lab.errors import GridError, QuadratureError

logger = logging.getLogger(__name__)

# Gauss-Kronrod subdivision cap
SUBDIVISION_LIMIT = 2 ** 14


def integrate(
    func: Callable[[float], float],
    a: float,
    b: float,
    *,
    epsabs: float = 1e-8,
    epsrel: float = 1e-10,
    points: Optional[Iterable[float]] = None,
) -> float:
    """Adaptive Gauss-Kronrod integral of `func` over [a, b] (QUADPACK through scipy).

    Interior `points` (density kinks) are handed to the QAGP variant. Raises
    QuadratureError when QUADPACK reports a failure whose error estimate is not
    within a hundred times the requested tolerance.
    """
    if b <= a:
        return 0.0
    interior = sorted({float(p) for p in (points or ()) if a < p < b})

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IntegrationWarning)
        result = quad(
            func,
            a,
            b,
            epsabs=epsabs,
            epsrel=epsrel,
            limit=SUBDIVISION_LIMIT,
            points=interior or None,
            full_output=1,
        )
    value, abserr = float(result[0]), float(result[1])
    if len(result) > 3:
        # QUADPACK attached a failure message
        allowed = 100.0 * max(epsabs, epsrel * abs(value))
        if not np.isfinite(value) or abserr > allowed:
            raise QuadratureError(
                f"quadrature on [{a:.6g}, {b:.6g}] did not converge: {result[3]} (abserr={abserr:.3g})"
            )
        logger.debug("[quadrature] accepted flagged result on [%g, %g]: abserr=%.3g", a, b, abserr)
    return value


class ChebyshevAntiderivative:
    """Piecewise Chebyshev antiderivative I(x) = ∫₀ˣ φ(y) dy on [0, upper].

    The integrand is sampled at first-kind Chebyshev nodes on each panel, so the
    panel endpoints (including a possibly singular x=0) are never evaluated.
    Panels are graded geometrically toward 0 and bisected until the trailing
    coefficients fall below tolerance. The innermost panel [0, head_width] is
    not sampled; its integral is supplied by the caller as `head_integral` and
    I is taken linear on it.
    """

    def __init__(
        self,
        integrand: Callable[[np.ndarray], np.ndarray],
        upper: float,
        *,
        head_integral: Callable[[float], float],
        breakpoints: Sequence[float] = (),
        degree: int = 24,
        grading: int = 100,
        atol: float = 1e-13,
        rtol: float = 1e-12,
        max_panels: int = SUBDIVISION_LIMIT,
    ):
        if not upper > 0:
            raise GridError(f"antiderivative needs a positive upper bound, got {upper}")
        self.upper = float(upper)
        self.degree = degree

        head_width = self.upper * 2.0 ** (-grading)
        edges = {head_width, self.upper}
        edges.update(self.upper * 2.0 ** (-j) for j in range(1, grading))
        edges.update(float(p) for p in breakpoints if head_width < p < self.upper)
        edges = sorted(edges)

        pending = list(zip(edges[:-1], edges[1:]))
        accepted = []
        while pending:
            a, b = pending.pop()
            series = Chebyshev.interpolate(integrand, degree, domain=[a, b])
            coef = series.coef
            half = 0.5 * (b - a)
            tail = half * (abs(coef[-1]) + abs(coef[-2]))
            size = half * float(np.max(np.abs(coef)))
            if tail <= max(atol, rtol * size) or half <= 1e-15 * b:
                accepted.append((a, b, series.integ(lbnd=a)))
                continue
            if len(accepted) + len(pending) + 2 > max_panels:
                raise QuadratureError(
                    f"Chebyshev cache exceeded {max_panels} panels near x={a:.6g}"
                )
            mid = 0.5 * (a + b)
            pending.append((a, mid))
            pending.append((mid, b))

        accepted.sort(key=lambda item: item[0])
        self._lefts = np.array([a for a, _, _ in accepted])
        self._widths = np.array([b - a for a, b, _ in accepted])
        self._coefs = np.array([anti.coef for _, _, anti in accepted])

        self.head_width = head_width
        self.head_value = float(head_integral(head_width))
        increments = np.array([anti(b) for _, b, anti in accepted])
        self._offsets = self.head_value + np.concatenate(([0.0], np.cumsum(increments)[:-1]))
        self.total = float(self.head_value + increments.sum())
        logger.debug("[quadrature] Chebyshev cache with %d panels on [0, %g]", len(accepted), upper)

    @property
    def panel_count(self) -> int:
        return len(self._lefts)

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if np.any(x < 0) or np.any(x > self.upper * (1 + 1e-12)):
            raise GridError(f"evaluation outside cached range [0, {self.upper:.6g}]")
        flat = np.minimum(x.ravel(), self.upper)
        out = np.empty_like(flat)

        head = flat < self.head_width
        out[head] = self.head_value * flat[head] / self.head_width

        rest = ~head
        if np.any(rest):
            idx = np.clip(np.searchsorted(self._lefts, flat[rest], side="right") - 1, 0, len(self._lefts) - 1)
            s = 2.0 * (flat[rest] - self._lefts[idx]) / self._widths[idx] - 1.0
            out[rest] = chebval(s, self._coefs[idx].T, tensor=False) + self._offsets[idx]
        return out.reshape(x.shape)
