# relevation_lab/commands/ageing.py

import json
import logging

from relevation_lab.ageing import classify, predict_relevation_order
from relevation_lab.commands import RunConfig, add_common_arguments, build_sequence, config_from_args, output_path
from relevation_lab.export import write_json

logger = logging.getLogger(__name__)

COMMAND = "ageing"


def register(subparsers) -> None:
    parser = subparsers.add_parser(COMMAND, help="classify a law as IFR/DFR/NBU/NWU")
    add_common_arguments(parser, seeded=False)
    parser.set_defaults(handler=run_ageing)


def run_ageing(args) -> int:
    return cmd_ageing(config_from_args(COMMAND, args))


def cmd_ageing(config: RunConfig) -> int:
    """AgeingReport JSON for every law given; a single law prints a single report."""
    seq = build_sequence(config.dists, config.sequence, config.extend)
    reports = []
    for law in seq.entries:
        report = classify(law)
        payload = report.model_dump()
        payload["predicted_relevation_vs_renewal"] = predict_relevation_order(law, report)
        reports.append(payload)
    result = reports[0] if len(reports) == 1 else reports

    path = output_path(config, "ageing.json")
    if path:
        write_json({"reports": reports}, path)
    print(json.dumps(result, indent=2, sort_keys=True))
    return 0
