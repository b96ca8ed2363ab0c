import numpy as np
from pydantic import ValidationError

# Utils
from utils.log_utils import LogUtil
from utils.stats_utils import mean_stderr

# Exceptions
from exceptions.sle_exception import SLEValidationException

# Services
from services.lqg_service import LqgService

# Database
from database.report_store import ReportStore

# Models
from models.experiment_config import ExperimentConfig
from models.field_data import BoundaryGrid, InsertionSpec

# Commands
from commands.command_router import CommandResult, CommandRouter


def grid_from_config(config: ExperimentConfig) -> BoundaryGrid:
    a, b, k = config.grid
    try:
        return BoundaryGrid.uniform(a, b, int(k), config.epsilon)
    except ValidationError as e:
        raise SLEValidationException(f"invalid boundary grid {config.grid} with epsilon={config.epsilon}: {e.errors()[0]['msg']}")


def insertions_from_config(config: ExperimentConfig) -> InsertionSpec:
    if len(config.betas) != len(config.locations):
        raise SLEValidationException(f"{len(config.betas)} insertion weights but {len(config.locations)} locations")
    try:
        return InsertionSpec.build(zip(config.betas, config.locations))
    except ValidationError as e:
        raise SLEValidationException(f"invalid insertions: {e.errors()[0]['msg']}")


def create_lqg_command(log_util: LogUtil, lqg_service: LqgService) -> CommandRouter:
    router = CommandRouter(name="lqg", help_text="Boundary GFF, Liouville fields and GMC boundary length")

    @router.mode("gff")
    def gff(config: ExperimentConfig) -> CommandResult:
        """
        Sample the boundary field and compare its covariance with G_H
        """
        grid = grid_from_config(config)
        report = lqg_service.field_covariance_check(grid, config.n, config.seed)
        sample = lqg_service.sample_boundary_gff(grid, 1, config.seed)
        rows = list(zip(grid.points, sample.values[0]))
        return {"covariance": report}, {"field": ReportStore.table(["x", "value"], rows)}

    @router.mode("gmc")
    def gmc(config: ExperimentConfig) -> CommandResult:
        """
        GMC length of --interval for a Liouville field with the given insertions
        """
        grid = grid_from_config(config)
        spec = insertions_from_config(config)
        field = lqg_service.sample_boundary_gff(grid, config.n, config.seed)
        field = lqg_service.liouville_shift(field, spec, config.shift, config.gamma)
        a, b = config.interval or [float(grid.edges[0]), float(grid.edges[-1])]
        lengths = lqg_service.gmc_length(field, config.gamma, a, b)
        mean, stderr = mean_stderr(lengths)
        result = {
            "gamma": config.gamma,
            "interval": [a, b],
            "C_H": lqg_service.compute_CH(spec, config.gamma),
            "mean_length": mean,
            "stderr": stderr,
        }
        tables = {"mean_profile": ReportStore.table(["x", "mean"], zip(grid.points, field.mean_profile))}
        if config.length is not None:
            shifted, factors = lqg_service.length_disintegration_shift(field, config.length, config.gamma)
            result["length"] = config.length
            result["mean_factor"], result["factor_stderr"] = mean_stderr(factors)
            tables["lengths"] = ReportStore.table(["replica", "length", "factor"], zip(range(config.n), lengths, factors))
        return result, tables

    @router.mode("girsanov")
    def girsanov(config: ExperimentConfig) -> CommandResult:
        """
        Mean shift of the reweighted field against beta/2 G_H(s, .)
        """
        if config.beta is None or config.insertion_point is None:
            raise SLEValidationException("girsanov needs --beta and --insertion-point")
        report = lqg_service.girsanov_check(grid_from_config(config), config.beta, config.insertion_point, config.n, config.seed)
        rows = [(s.x, s.shift, s.expected, s.stderr) for s in report.shifts]
        summary = report.model_dump(exclude={"shifts"})
        return {"girsanov": summary}, {"shifts": ReportStore.table(["x", "shift", "expected", "stderr"], rows)}

    @router.mode("radial")
    def radial(config: ExperimentConfig) -> CommandResult:
        """
        Radial process of a thick quantum disk and its boundary lengths
        """
        if not config.weights:
            raise SLEValidationException("radial needs --weights W")
        process = lqg_service.quantum_disk_radial(config.weights[0], config.gamma, config.window, config.seed, c=config.shift)
        grid = grid_from_config(config)
        field = lqg_service.sample_boundary_gff(grid, config.n, config.seed)
        lengths = lqg_service.quantum_disk_lengths(process, field)
        positive_times, positive_path = process.positive_part()
        drift = float(np.polyfit(positive_times, positive_path, 1)[0])
        result = {
            "W": process.W,
            "beta": process.beta,
            "Q": process.Q,
            "attempts": process.attempts,
            "acceptance_rate": process.acceptance_rate,
            "fitted_drift": drift,
            "left_length": mean_stderr(lengths.left),
            "right_length": mean_stderr(lengths.right),
        }
        return result, {"path": ReportStore.table(["t", "Y"], zip(process.times, process.path))}

    return router
