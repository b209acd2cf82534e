import argparse
import logging
import sys

from states.delayed_gate_state import DelayedGateState
from states.fit_state import FitState
from states.power_law_state import PowerLawState
from states.truncation_state import TruncationState
from utils.errors import ConfigError, ConvergenceError, DataError

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_CONVERGENCE = 3


class App:
    """
    Command-line controller: parses a subcommand, switches to its run state and
    drives it through handle → update → render.
    """
    def __init__(self, threads=1):
        """
        Create all run states.

        Args:
            threads (int): Worker threads available to grid evaluations
        """
        self.threads = threads
        self.states = {
            'delayed-gate': DelayedGateState(self),
            'truncation-report': TruncationState(self),
            'fit': FitState(self),
            'power-law': PowerLawState(self),
        }
        self.current_state = None

    def change_state(self, state_name):
        """
        Switch to the run state of a subcommand.

        Args:
            state_name (str): Key of the state to switch to
        """
        if self.current_state is not None:
            self.current_state.exit_state()
        self.current_state = self.states[state_name]
        self.current_state.enter_state()

    def run(self, args):
        """
        Execute one subcommand and map failures to exit codes.

        Returns:
            int: 0 on success, 2 for config or data errors, 3 for non-convergence
        """
        self.threads = args.threads
        try:
            self.change_state(args.command)
            self.current_state.handle_events(args)
            self.current_state.update()
            self.current_state.render(args.out)
        except (ConfigError, DataError) as e:
            logger.error("%s", e)
            return EXIT_CONFIG
        except ConvergenceError as e:
            logger.error("%s (after %d iterations)", e, e.iterations)
            return EXIT_CONVERGENCE
        finally:
            if self.current_state is not None:
                self.current_state.exit_state()
                self.current_state = None
        return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="ionlight",
        description="Ion-light Hamiltonian toolkit: delayed-gate curves, truncation reports and heating fits.",
    )
    parser.add_argument("--verbose", "-v", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_required=True):
        if config_required:
            p.add_argument("--config", required=True, help="scenario JSON file or name under scenarios/")
        p.add_argument("--out", required=True, help="output path")
        p.add_argument("--threads", type=int, default=1, help="worker threads (output is identical for any count)")
        p.add_argument("--tolerance", type=float, default=None,
                       help="override the subcommand's main tolerance (thermal tail, truncation threshold, fit xatol)")

    common(sub.add_parser("delayed-gate", help="P↑ vs n̄ for static, optimized and composite-pulse gates"))
    common(sub.add_parser("truncation-report", help="keep/drop table of the A/B series"))

    fit = sub.add_parser("fit", help="extract the heating rate from measurement tables")
    common(fit)
    fit.add_argument("--data", required=True, help="static-rate CSV (delta_t_s, p_up[, p_up_sigma])")
    fit.add_argument("--optimized-data", default=None, help="optimized-rate CSV (adds omega_t_opt if present)")

    power = sub.add_parser("power-law", help="fit ṅ ∝ ω^(−α) across fit outputs")
    common(power, config_required=False)
    power.add_argument("inputs", nargs="*", help="fit JSON outputs")
    power.add_argument("--table", default=None, help="CSV with omega_hz, heating_rate_per_s")
    return parser


def main(argv=None):
    """
    Entry point of the application.
    Parses arguments, configures logging and runs the requested subcommand.
    """
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    if args.threads < 1:
        logger.error("--threads must be at least 1")
        return EXIT_CONFIG
    return App(args.threads).run(args)


if __name__ == "__main__":
    sys.exit(main())
