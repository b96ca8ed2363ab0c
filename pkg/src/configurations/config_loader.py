import argparse
import json
from typing import Any, Dict, List, Optional

from pydantic import ValidationError

# Utils
from utils.log_utils import LogUtil
from utils.environment_utils import EnvironmentUtils

# Exceptions
from exceptions.sle_exception import SLEValidationException

# Models
from models.experiment_config import ExperimentConfig


def float_list(text: str) -> List[float]:
    try:
        return [float(item) for item in text.split(",") if item.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma separated numbers, got {text!r}")


def int_list(text: str) -> List[int]:
    try:
        return [int(item) for item in text.split(",") if item.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma separated integers, got {text!r}")


# (flag, config field, parser, help)
EXPERIMENT_FLAGS = (
    ("--kappa", "kappa", float, "SLE parameter kappa"),
    ("--gamma", "gamma", float, "LQG parameter gamma (kappa = gamma^2)"),
    ("--pattern", "pattern", str, "Link pattern, e.g. 1-4,2-3"),
    ("--order", "order", str, "Curve link pattern, e.g. 1,2,3,4,0"),
    ("--link", "link", str, "Link to split along, e.g. 1-4"),
    ("--rotation", "rotation", int, "Rotation index m"),
    ("--points", "points", float_list, "Marked points"),
    ("--x", "x", float, "Target point"),
    ("--rho", "rho", float_list, "Force weights"),
    ("--rho-tilde", "rho_tilde", float_list, "Target force weights"),
    ("--lambdas", "lambdas", float_list, "Boundary values of the field between start points"),
    ("--thetas", "thetas", float_list, "Flow line angles"),
    ("--weights", "weights", float_list, "Quantum disk weights"),
    ("--n", "n", int, "Number of samples"),
    ("--n-levels", "n_levels", int_list, "Samples per recursion level"),
    ("--dt", "dt", float, "Capacity step"),
    ("--horizon", "horizon", float, "Capacity horizon"),
    ("--t-max", "t_max", float, "Capacity truncation for runs to infinity"),
    ("--delta-hit", "delta_hit", float, "Hitting tolerance"),
    ("--radii", "radii", float_list, "Strictly decreasing radii"),
    ("--radius", "radius", float, "Radius of the ordered Green function"),
    ("--checkpoints", "checkpoints", float_list, "Capacity checkpoints"),
    ("--sweeps", "sweeps", int, "Gibbs sweeps"),
    ("--h", "h", float, "Finite difference step"),
    ("--scale", "scale", float, "Dilation factor"),
    ("--grid", "grid", float_list, "Boundary grid a,b,points"),
    ("--epsilon", "epsilon", float, "Regularisation scale"),
    ("--beta", "beta", float, "Insertion weight"),
    ("--insertion-point", "insertion_point", float, "Insertion location"),
    ("--betas", "betas", float_list, "Insertion weights"),
    ("--locations", "locations", float_list, "Insertion locations (inf allowed first)"),
    ("--interval", "interval", float_list, "GMC interval a,b"),
    ("--length", "length", float, "Target boundary length"),
    ("--window", "window", float, "Radial window T"),
    ("--shift", "shift", float, "Field constant c"),
    ("--seed", "seed", int, "Master seed"),
    ("--threads", "threads", int, "Worker threads (0 = logical cores)"),
    ("--block-size", "block_size", int, "Paths per random block"),
    ("--output-dir", "output_dir", str, "Report directory"),
    ("--distance", "distance", str, "Distance mode for green: proxy or exact"),
    ("--slit", "slit", str, "Slit discretisation"),
    ("--kappa-grid", "kappa_grid", float_list, "kappa values for the exponent table"),
)


def add_experiment_arguments(parser: argparse.ArgumentParser):
    for flag, field, kind, help_text in EXPERIMENT_FLAGS:
        parser.add_argument(flag, dest=field, type=kind, default=None, help=help_text)
    parser.add_argument("--csv", dest="csv", action="store_const", const=True, default=None, help="Also write CSV tables")
    parser.add_argument("--config", dest="config_path", default=None, help="JSON experiment config")


class ConfigLoader:
    def __init__(self, log_util: LogUtil, environment_utils: EnvironmentUtils):
        self.log_util = log_util
        self.environment_utils = environment_utils

    def read_file(self, path: str) -> Dict[str, Any]:
        try:
            with open(path, "r", encoding="utf-8") as handle:
                document = json.load(handle)
        except (OSError, json.JSONDecodeError) as e:
            self.log_util.error(service_name="ConfigLoader", message=f"Cannot read config {path}: {e}")
            raise SLEValidationException(f"cannot read config {path}: {e}")
        if not isinstance(document, dict):
            raise SLEValidationException(f"config {path} must be a JSON object")
        return document

    def load(
        self,
        subcommand: str,
        namespace: argparse.Namespace,
        mode: Optional[str] = None,
        overrides: Optional[Dict[str, Any]] = None,
    ) -> ExperimentConfig:
        """
        File values, then every flag given on the command line, then environment defaults
        for run control fields nobody set.
        """
        data: Dict[str, Any] = {}
        config_path = getattr(namespace, "config_path", None)
        if config_path:
            data.update(self.read_file(config_path))
        for _, field, _, _ in EXPERIMENT_FLAGS:
            value = getattr(namespace, field, None)
            if value is not None:
                data[field] = value
        if getattr(namespace, "csv", None):
            data["csv"] = True
        data.update(overrides or {})
        if data.get("subcommand", subcommand) != subcommand:
            raise SLEValidationException(f"config is for {data['subcommand']}, not {subcommand}")
        data["subcommand"] = subcommand
        if mode is not None:
            data["mode"] = mode

        data.setdefault("output_dir", self.environment_utils.get_env_variable("SLE_OUTPUT_DIR"))
        data.setdefault("block_size", self.environment_utils.get_env_variable("SLE_BLOCK_SIZE"))
        if not data.get("threads"):
            data["threads"] = self.environment_utils.get_thread_count()

        try:
            config = ExperimentConfig(**data)
        except ValidationError as e:
            messages = "; ".join(f"{'.'.join(str(p) for p in error['loc']) or 'config'}: {error['msg']}" for error in e.errors())
            self.log_util.error(service_name="ConfigLoader", message=f"Invalid {subcommand} config: {messages}")
            raise SLEValidationException(messages)
        self.log_util.debug(service_name="ConfigLoader", message=f"Resolved {subcommand} config with seed {config.seed}")
        return config
