from abc import ABC, abstractmethod


class RunState(ABC):
    """
    Abstract base class for CLI runs (delayed gate, truncation report, fits).
    The app drives every state through the same enter → handle → update → render → exit cycle.
    """
    def __init__(self, app):
        """
        Initialize the state with a reference to the app instance.

        Args:
            app: Main app instance that manages states
        """
        self.app = app
        self.result = None

    @abstractmethod
    def handle_events(self, args):
        """
        Read parsed command-line arguments and load the inputs of the run.

        Args:
            args (argparse.Namespace): Parsed arguments of the subcommand
        """
        pass

    @abstractmethod
    def update(self):
        """Run the computation and store it in self.result."""
        pass

    @abstractmethod
    def render(self, out):
        """
        Write self.result.

        Args:
            out (str): Output path
        """
        pass

    def enter_state(self):
        """
        Called when entering this state.
        Override to reset per-run data.
        """
        self.result = None

    def exit_state(self):
        """
        Called when exiting this state.
        Override to handle cleanup.
        """
        pass
