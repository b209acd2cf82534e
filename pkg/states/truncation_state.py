import logging
from typing import List

from core.truncation import ReportRow, build_term_sets, scenarios_from, truncation_report
from states.base_state import RunState
from systems.scenario import build_setup
from utils.save_load import build_id, sidecar_path, write_json, write_rows
from utils.settings_manager import config_hash, load_scenario
from utils.types import TruncationPolicy

logger = logging.getLogger(__name__)


class TruncationState(RunState):
    """Keep/drop table of the A/B series for the scenario's beams and chain."""
    def __init__(self, app):
        super().__init__(app)
        self.config = None

    def handle_events(self, args):
        self.config = load_scenario(args.config)
        if args.tolerance is not None:
            self.config["truncation"]["threshold"] = args.tolerance

    def update(self):
        self.result = run_truncation_report(self.config)

    def render(self, out):
        header, rows = report_table(self.result)
        write_rows(header, rows, out)
        write_json({
            "build_id": build_id(),
            "config_hash": config_hash(self.config),
            "scenario": self.config["name"],
            "tolerances": {"threshold": self.config["truncation"]["threshold"]},
        }, sidecar_path(out))
        kept = sum(1 for r in self.result if r.kept)
        logger.info("wrote %d rows (%d kept) to %s", len(self.result), kept, out)


def truncation_policy(config: dict) -> TruncationPolicy:
    section = config["truncation"]
    return TruncationPolicy(
        threshold=float(section["threshold"]),
        scenarios=scenarios_from(section["scenarios"], with_dominant=bool(section["dominant"])),
        n_ions_max=int(section["n_ions_max"]),
    )


def run_truncation_report(config: dict) -> List[ReportRow]:
    setup = build_setup(config)
    term_sets = build_term_sets(setup.coupling, setup.chain, config["truncation"]["caps"])
    return truncation_report(term_sets, truncation_policy(config), n_ions=setup.chain.n_ions)


def report_table(rows: List[ReportRow]):
    """Header and rows of the report; one contribution column per scenario, in policy order."""
    names = list(rows[0].contributions) if rows else []
    header = ["function", "beam", "axis", "power_p", "power_q", "coefficient_abs"]
    header += [f"contribution_{name}" for name in names] + ["kept"]
    table = [
        [r.function, r.beam, r.axis, r.power_p, r.power_q, float(r.coefficient_abs)]
        + [float(r.contributions[name]) for name in names]
        + [int(r.kept)]
        for r in rows
    ]
    return header, table
