import logging

import numpy as np

from states.base_state import RunState
from systems.calibration import fit_power_law
from utils.errors import DataError
from utils.save_load import build_id, load_json, read_rate_table, write_json

logger = logging.getLogger(__name__)


class PowerLawState(RunState):
    """ṅ ∝ ω^(−α) across fit outputs or a rate table."""
    def __init__(self, app):
        super().__init__(app)
        self.omegas = None
        self.rates = None

    def handle_events(self, args):
        if args.table is not None:
            table = read_rate_table(args.table)
            self.omegas, self.rates = table["omega_hz"], table["heating_rate_per_s"]
        elif args.inputs:
            self.omegas, self.rates = collect_fit_outputs(args.inputs)
        else:
            raise DataError("power-law needs --table or fit JSON inputs")

    def update(self):
        fit = fit_power_law(self.omegas, self.rates)
        self.result = fit.to_dict()
        self.result["points"] = len(self.omegas)
        self.result["build_id"] = build_id()

    def render(self, out):
        write_json(self.result, out)
        logger.info("α = %.4g from %d points", self.result["exponent"], self.result["points"])


def collect_fit_outputs(paths):
    """Axial frequencies and heating rates from fit JSON files, ordered by frequency."""
    points = []
    for path in paths:
        data = load_json(path)
        for key in ("axial_hz", "heating_rate_per_s"):
            if key not in data:
                raise DataError(f"missing {key!r}", path)
        points.append((float(data["axial_hz"]), float(data["heating_rate_per_s"])))
    points.sort()
    omegas, rates = zip(*points)
    return np.asarray(omegas), np.asarray(rates)
