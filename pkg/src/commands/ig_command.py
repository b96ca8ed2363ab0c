# Utils
from utils.log_utils import LogUtil

# Exceptions
from exceptions.sle_exception import SLEValidationException

# Services
from services.imaginary_geometry_service import ImaginaryGeometryService
from services.partition_service import PartitionService
from services.sampler_service import DEFAULT_T_MAX

# Database
from database.report_store import ReportStore

# Models
from models.experiment_config import ExperimentConfig

# Commands
from commands.command_router import CommandResult, CommandRouter


def create_ig_command(
    log_util: LogUtil,
    imaginary_geometry_service: ImaginaryGeometryService,
    partition_service: PartitionService,
) -> CommandRouter:
    router = CommandRouter(name="ig", help_text="Imaginary geometry flow lines")

    @router.mode("sample")
    def sample(config: ExperimentConfig) -> CommandResult:
        """
        One ensemble of flow lines from --points with boundary values --lambdas
        """
        angles = config.thetas or None
        ensemble = imaginary_geometry_service.sample_ig(config.kappa, config.points, config.lambdas, angles, config.seed, config.dt, config.t_max or DEFAULT_T_MAX)
        lines = []
        rows = []
        for line in ensemble.lines:
            lines.append({
                "index": line.index,
                "start": line.start,
                "angle": line.angle,
                "forces": line.forces,
                "capacity": line.sample.capacity,
                "status": line.trace.status,
                "max_height": line.trace.max_height(),
            })
            rows.extend((line.index, t, z.real, z.imag) for t, z in zip(line.trace.times, line.trace.points))
        result = {
            "rho": ensemble.rho,
            "partition": partition_service.ig_partition(ensemble.points, ensemble.rho, config.kappa),
            "lines": lines,
            "flagged": ensemble.flagged,
            "flag_reason": ensemble.flag_reason,
        }
        return result, {"traces": ReportStore.table(["line", "t", "x", "y"], rows)}

    @router.mode("partition")
    def partition(config: ExperimentConfig) -> CommandResult:
        """
        prod (x_j - x_i)^{rho_i rho_j / (2 kappa)} from --rho or --lambdas
        """
        if config.rho:
            value = partition_service.ig_partition(config.points, config.rho, config.kappa)
        elif config.lambdas:
            value = partition_service.ig_partition_from_lambda(config.points, config.lambdas, config.kappa)
        else:
            raise SLEValidationException("partition needs --rho or --lambdas")
        return {"points": config.points, "value": value}, {}

    return router
