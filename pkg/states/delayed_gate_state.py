import logging
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from states.base_state import RunState
from systems.calibration import RabiOptimizer
from systems.scenario import build_setup, nbar_grid, phase_error_model
from systems.sequences import make_sequence, sequence_p_up
from utils.save_load import build_id, write_curve
from utils.settings_manager import config_hash, load_scenario
from utils.types import CurveOutput, ThermalState

logger = logging.getLogger(__name__)


class DelayedGateState(RunState):
    """
    Thermal init, heating, gate and readout over an n̄ (or delay) grid.

    Emits static and optimized bright populations, the optimized/static rate
    ratio, and one column per composite sequence.
    """
    def __init__(self, app):
        super().__init__(app)
        self.config = None

    def handle_events(self, args):
        self.config = load_scenario(args.config)
        if args.tolerance is not None:
            self.config["run"]["tolerances"]["thermal_tail"] = args.tolerance

    def update(self):
        self.result = run_delayed_gate(self.config, threads=self.app.threads)

    def render(self, out):
        write_curve(self.result, out)
        logger.info("wrote %d grid points to %s", len(self.result.values), out)


def _sequence_names(config: dict) -> list:
    names = [name.lower() for name in config["run"]["sequences"]]
    for name in names:
        make_sequence(name)  # rejects unknown names before any work
    return [name for name in names if name != "single"]


def run_delayed_gate(config: dict, threads: int = 1) -> CurveOutput:
    """
    Static and optimized P↑ over the run grid.

    Args:
        config: Merged scenario
        threads: Worker threads for grid points; output is identical for any count

    Returns:
        CurveOutput with columns p_up_static, p_up_optimized, rabi_ratio and p_up_<sequence>
    """
    setup = build_setup(config)
    run = config["run"]
    tail = run["tolerances"]["thermal_tail"]
    grid = nbar_grid(config, setup.heating)
    model = phase_error_model(config)
    sequences = {name: make_sequence(name, model) for name in _sequence_names(config)}

    optimizer = RabiOptimizer(setup.eta, setup.xi, tail)
    # grow the shared profile up front so every point sees the same one
    optimizer.profile(ThermalState.with_tail(float(np.max(grid)), tail).cutoff)
    static_area = optimizer.optimize(setup.nbar0)

    def point(nbar: float) -> list:
        state = ThermalState.with_tail(float(nbar), tail)
        area = optimizer.optimize(nbar)
        values = [
            optimizer.p_up(nbar, static_area),
            optimizer.p_up(nbar, area),
            area / static_area,
        ]
        half_angles = area * optimizer.profile(state.cutoff)
        for sequence in sequences.values():
            values.append(sequence_p_up(
                sequence, state, setup.eta, setup.xi, area,
                phase_error=float(run["phase_error_rad"]),
                amplitude_error=float(run["amplitude_error"]),
                half_angles=half_angles,
            ))
        return values

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        rows = list(pool.map(point, grid))

    names = ["p_up_static", "p_up_optimized", "rabi_ratio"] + [f"p_up_{name}" for name in sequences]
    series = {name: [float(row[i]) for row in rows] for i, name in enumerate(names)}
    metadata = {
        "build_id": build_id(),
        "config_hash": config_hash(config),
        "eta": setup.eta,
        "nbar0": setup.nbar0,
        "scenario": config["name"],
        "static_pulse_area": static_area,
        "tolerances": {"rabi_xtol": optimizer.xtol, "thermal_tail": tail},
        "xi": setup.xi,
    }
    return CurveOutput("nbar", [float(v) for v in grid], series, metadata)
