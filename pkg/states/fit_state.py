import logging
import math

from states.base_state import RunState
from systems.calibration import Curve, HeatingFitModel, fit_heating
from systems.scenario import build_setup
from utils.errors import DataError
from utils.save_load import build_id, read_measurements, write_json
from utils.settings_manager import config_hash, load_scenario

logger = logging.getLogger(__name__)


class FitState(RunState):
    """Heating-rate extraction from delayed-gate measurement tables."""
    def __init__(self, app):
        super().__init__(app)
        self.config = None
        self.static = None
        self.optimized = None

    def enter_state(self):
        super().enter_state()
        self.static = None
        self.optimized = None

    def handle_events(self, args):
        self.config = load_scenario(args.config)
        if args.tolerance is not None:
            self.config["fit"]["xatol"] = args.tolerance
        self.static = read_measurements(args.data)
        if args.optimized_data is not None:
            self.optimized = read_measurements(args.optimized_data)

    def update(self):
        self.result = run_fit(self.config, self.static, self.optimized)

    def render(self, out):
        write_json(self.result, out)
        logger.info("ṅ = %.6g /s written to %s", self.result["heating_rate_per_s"], out)


def _curve(table: dict, column: str) -> Curve:
    sigma = table.get("p_up_sigma") if column == "p_up" else None
    return Curve(table["delta_t_s"], table[column], sigma)


def run_fit(config: dict, static: dict, optimized: dict = None) -> dict:
    """
    Fit ṅ and δP↑ to measured tables with n̄₀, η and ξ taken from the scenario.

    Args:
        config: Merged scenario
        static: Columns of the static-rate measurement
        optimized: Columns of the optimized-rate measurement; its omega_t_opt column, if any,
            enters as the optimal-rate curve

    Returns:
        dict: FitResult fields plus the axial frequency and run metadata
    """
    setup = build_setup(config)
    rabi = None
    optimized_curve = None
    if optimized is not None:
        optimized_curve = _curve(optimized, "p_up")
        if "omega_t_opt" in optimized:
            rabi = _curve(optimized, "omega_t_opt")
    elif "omega_t_opt" in static:
        raise DataError("omega_t_opt belongs to the optimized-rate table")

    model = HeatingFitModel.cached(setup.nbar0, setup.eta, setup.xi, float(config["fit"]["max_nbar"]))
    result = fit_heating(
        _curve(static, "p_up"),
        setup.nbar0,
        setup.eta,
        setup.xi,
        optimized=optimized_curve,
        rabi=rabi,
        nbar_max=float(config["fit"]["max_nbar"]),
        xatol=float(config["fit"]["xatol"]),
        model=model,
    )
    output = result.to_dict()
    output.update({
        "axial_hz": float(setup.chain.frequencies[setup.mode]) / (2.0 * math.pi),
        "build_id": build_id(),
        "config_hash": config_hash(config),
        "eta": setup.eta,
        "nbar0": setup.nbar0,
        "scenario": config["name"],
        "xi": setup.xi,
    })
    return output
