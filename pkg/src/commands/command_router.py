import argparse
from typing import Any, Callable, Dict, List, Optional, Tuple

from models.experiment_config import ExperimentConfig
from database.report_store import CsvTable

# A handler returns the JSON result and the CSV tables of one run
CommandResult = Tuple[Dict[str, Any], Dict[str, CsvTable]]
Handler = Callable[[ExperimentConfig], CommandResult]


class CommandMode:
    def __init__(self, name: str, handler: Handler, field: Optional[str], kind, help_text: str):
        self.name = name
        self.handler = handler
        self.field = field
        self.kind = kind
        self.help_text = help_text

    @property
    def dest(self) -> str:
        return "mode_" + self.name.replace("-", "_")


class CommandRouter:
    """
    One subcommand and its modes. A mode flag either switches the mode on or, when it
    names a config field, also carries that field's value (``lp --enumerate 3``).
    """

    def __init__(self, name: str, help_text: str):
        self.name = name
        self.help_text = help_text
        self.modes: List[CommandMode] = []

    def mode(self, name: str, field: Optional[str] = None, kind=str, help_text: str = ""):
        def register(handler: Handler) -> Handler:
            self.modes.append(CommandMode(name, handler, field, kind, help_text or handler.__doc__ or ""))
            return handler
        return register

    def attach(self, subparsers, add_arguments: Callable[[argparse.ArgumentParser], None]) -> argparse.ArgumentParser:
        parser = subparsers.add_parser(self.name, help=self.help_text, description=self.help_text)
        if len(self.modes) > 1 or self.modes[0].field is not None:
            group = parser.add_mutually_exclusive_group()
            for mode in self.modes:
                if mode.field is None:
                    group.add_argument(f"--{mode.name}", dest=mode.dest, action="store_true", help=mode.help_text.strip())
                else:
                    group.add_argument(f"--{mode.name}", dest=mode.dest, type=mode.kind, default=None, metavar=mode.field.upper(), help=mode.help_text.strip())
        add_arguments(parser)
        parser.set_defaults(router=self)
        return parser

    def select(self, namespace: argparse.Namespace) -> Tuple[CommandMode, Dict[str, Any]]:
        """
        The chosen mode (the first one when no mode flag is given) and the config values
        its flag carried.
        """
        for mode in self.modes:
            value = getattr(namespace, mode.dest, None)
            if mode.field is None and value:
                return mode, {}
            if mode.field is not None and value is not None:
                return mode, {mode.field: value}
        return self.modes[0], {}

    def run(self, mode: CommandMode, config: ExperimentConfig) -> CommandResult:
        return mode.handler(config)
