import math

import numpy as np

# Utils
from utils.log_utils import LogUtil

# Exceptions
from exceptions.sle_exception import SLEValidationException

# Services
from services.loewner_service import LoewnerService
from services.sampler_service import SamplerService

# Database
from database.report_store import ReportStore

# Models
from models.experiment_config import ExperimentConfig
from models.force_config import ForceConfig

# Commands
from commands.command_router import CommandResult, CommandRouter


def forces_from_config(config: ExperimentConfig) -> ForceConfig:
    """
    Force points from --points and --rho; a point written as -0 is 0^-. The points must
    already be listed in force order (left side outward, then right side outward) so
    --rho-tilde lines up with them.
    """
    if len(config.points) != len(config.rho):
        raise SLEValidationException(f"{len(config.points)} force points but {len(config.rho)} weights")
    triples = [(float(x), "L" if math.copysign(1.0, x) < 0.0 else "R", float(w)) for x, w in zip(config.points, config.rho)]
    forces = ForceConfig.build(triples)
    if [(p.position, p.side) for p in forces.points] != [(x, s) for x, s, _ in triples]:
        raise SLEValidationException("list force points left side outward from 0, then right side outward from 0")
    return forces


def create_sle_trace_command(log_util: LogUtil, sampler_service: SamplerService, loewner_service: LoewnerService) -> CommandRouter:
    router = CommandRouter(name="sle-trace", help_text="Sample SLE_kappa(rho) paths")

    @router.mode("trace")
    def trace(config: ExperimentConfig) -> CommandResult:
        """
        One path with its driving function and trace
        """
        forces = forces_from_config(config)
        sample = sampler_service.sample_sle_rho(config.kappa, forces, config.horizon, config.dt, config.seed)
        curve = loewner_service.chain_trace(sample.chain)
        result = {
            "kappa": config.kappa,
            "capacity": sample.capacity,
            "steps": int(sample.driving.times.size - 1),
            "final_W": float(sample.driving.values[-1]),
            "threshold_time": sample.threshold_time,
            "flagged": sample.flagged,
            "flag_reason": sample.flag_reason,
            "trace_status": curve.status,
            "max_height": curve.max_height(),
            "force_points": forces,
        }
        tables = {
            "driving": ReportStore.table(["t", "W"], loewner_service.driving_rows(sample.driving)),
            "trace": ReportStore.table(["t", "x", "y"], loewner_service.trace_rows(curve)),
        }
        return result, tables

    @router.mode("batch")
    def batch(config: ExperimentConfig) -> CommandResult:
        """
        Driving values of n paths at the checkpoints
        """
        forces = forces_from_config(config)
        checkpoints = config.checkpoints or [config.horizon]
        runs = sampler_service.sample_sle_rho_batch(config.kappa, forces, config.n, config.horizon, config.dt, config.seed, checkpoints=checkpoints)
        good = ~runs.flagged
        summary = []
        for slot, time in enumerate(runs.checkpoint_times):
            values = runs.checkpoint_W[good, slot]
            summary.append({"time": float(time), "mean_W": float(values.mean()), "var_W": float(values.var(ddof=1)) if values.size > 1 else 0.0})
        result = {"kappa": config.kappa, "n": config.n, "failure_rate": runs.failure_rate, "flags": runs.flag_counts(), "checkpoints": summary}
        rows = [[i] + runs.checkpoint_W[i].tolist() for i in np.flatnonzero(good)]
        header = ["path"] + [f"W_{time:g}" for time in runs.checkpoint_times]
        return result, {"checkpoints": ReportStore.table(header, rows)}

    return router
