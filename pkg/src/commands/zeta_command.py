# Utils
from utils.log_utils import LogUtil

# Exceptions
from exceptions.sle_exception import SLEValidationException

# Services
from services.gibbs_service import DEFAULT_GIBBS_T_MAX, GibbsService
from services.partition_service import DEFAULT_Z_T_MAX, PartitionService
from services.pattern_service import PatternService

# Database
from database.report_store import ReportStore

# Models
from models.experiment_config import ExperimentConfig
from models.loewner_data import MobiusMap

# Commands
from commands.command_router import CommandResult, CommandRouter


def create_zeta_command(
    log_util: LogUtil,
    pattern_service: PatternService,
    partition_service: PartitionService,
    gibbs_service: GibbsService,
) -> CommandRouter:
    router = CommandRouter(name="zeta", help_text="Multiple SLE partition functions")

    def pattern_of(config: ExperimentConfig):
        if not config.pattern:
            raise SLEValidationException("zeta needs --pattern")
        return pattern_service.parse_lp(config.pattern)

    def evaluator_of(config: ExperimentConfig):
        alpha = pattern_of(config)
        if alpha.n_links == 1:
            return partition_service.exact_single_link(config.kappa)
        return partition_service.z_evaluator(config.kappa, alpha, config.n, config.seed, config.dt, config.t_max or DEFAULT_Z_T_MAX)

    @router.mode("estimate")
    def estimate(config: ExperimentConfig) -> CommandResult:
        """
        Z_alpha at the marked points
        """
        estimate = partition_service.estimate_Z(config.kappa, pattern_of(config), config.points, config.n, config.seed, config.dt, config.t_max or DEFAULT_Z_T_MAX)
        return {"estimate": estimate, "relative_error": estimate.relative_error}, {}

    @router.mode("pde")
    def pde(config: ExperimentConfig) -> CommandResult:
        """
        Finite-difference residuals of the second order PDE system
        """
        report = partition_service.check_pde(config.kappa, evaluator_of(config), config.points, config.h)
        rows = [(r.coordinate, r.residual, r.stderr, r.deviation) for r in report.residuals]
        return {"pde": report}, {"residuals": ReportStore.table(["coordinate", "residual", "stderr", "deviation"], rows)}

    @router.mode("covariance")
    def covariance(config: ExperimentConfig) -> CommandResult:
        """
        Conformal covariance under z -> scale z
        """
        mobius = MobiusMap.affine(config.scale, 0.0)
        report = partition_service.check_covariance(config.kappa, evaluator_of(config), config.points, mobius)
        return {"covariance": report, "deviation": report.deviation}, {}

    @router.mode("gibbs")
    def gibbs(config: ExperimentConfig) -> CommandResult:
        """
        Glauber dynamics for the curves of a multiple SLE
        """
        state = gibbs_service.gibbs_msle(config.kappa, pattern_of(config), config.points, config.sweeps, config.seed, config.dt, config.t_max or DEFAULT_GIBBS_T_MAX)
        heights = state.sweep_heights
        capacities = state.sweep_capacities
        result = {
            "pattern": str(state.pattern),
            "sweeps": int(heights.shape[0]),
            "height": state.height,
            "mean_capacities": capacities.mean(axis=0),
            "mean_heights": heights.mean(axis=0),
            "updates": state.updates,
            "flagged_updates": state.flagged_updates,
            "retries": state.retries,
            "failure_rate": state.failure_rate,
        }
        header = ["sweep"] + [f"capacity_{a}_{b}" for a, b in state.pattern.links] + [f"height_{a}_{b}" for a, b in state.pattern.links]
        rows = [[k + 1] + capacities[k].tolist() + heights[k].tolist() for k in range(heights.shape[0])]
        return result, {"sweeps": ReportStore.table(header, rows)}

    return router
