# Utils
from utils.log_utils import LogUtil

# Exceptions
from exceptions.sle_exception import SLEValidationException

# Services
from services.green_service import DEFAULT_GREEN_T_MAX, GreenService
from services.pattern_service import PatternService
from services.sampler_service import DEFAULT_T_MAX, DEFAULT_TARGET_T_MAX, SamplerService

# Database
from database.report_store import ReportStore

# Models
from models.experiment_config import ExperimentConfig

# Commands
from commands.command_router import CommandResult, CommandRouter


def create_green_command(
    log_util: LogUtil,
    pattern_service: PatternService,
    sampler_service: SamplerService,
    green_service: GreenService,
) -> CommandRouter:
    router = CommandRouter(name="green", help_text="Boundary Green's functions of SLE")

    def require(value, flag: str):
        if value is None or value == []:
            raise SLEValidationException(f"this mode needs {flag}")
        return value

    @router.mode("onepoint")
    def onepoint(config: ExperimentConfig) -> CommandResult:
        """
        P(dist(eta, x) < r) and its log-log slope
        """
        report = green_service.green_onepoint(
            config.kappa,
            require(config.x, "--x"),
            require(config.radii, "--radii"),
            config.n,
            config.seed,
            dt=config.dt,
            t_max=config.t_max or DEFAULT_GREEN_T_MAX,
            delta_hit=config.delta_hit,
            distance=config.distance,
        )
        rows = list(zip(report.radii, report.probabilities, report.stderrs))
        return {"green": report}, {"probabilities": ReportStore.table(["r", "probability", "stderr"], rows)}

    @router.mode("ordered")
    def ordered(config: ExperimentConfig) -> CommandResult:
        """
        Ordered multi-point Green's function from points[0]
        """
        report = green_service.green_ordered(
            config.kappa,
            require(config.points, "--points"),
            require(config.radius, "--radius"),
            config.n,
            config.seed,
            dt=config.dt,
            t_max=config.t_max or DEFAULT_GREEN_T_MAX,
            delta_hit=config.delta_hit,
        )
        return {"green": report}, {}

    @router.mode("m-alpha")
    def m_alpha(config: ExperimentConfig) -> CommandResult:
        """
        Total mass of the recursive measure M_alpha for --order
        """
        alpha = pattern_service.parse_clp(require(config.order, "--order"))
        ensemble, estimate = sampler_service.sample_m_alpha(config.kappa, alpha, config.points, config.n, config.seed, config.dt, config.t_max or DEFAULT_TARGET_T_MAX, config.delta_hit)
        return {"order": str(alpha), "estimate": estimate, "ess": ensemble.ess()}, {}

    @router.mode("dilation")
    def dilation(config: ExperimentConfig) -> CommandResult:
        """
        Dilation covariance of M_alpha under x -> scale x
        """
        alpha = pattern_service.parse_clp(require(config.order, "--order"))
        report = sampler_service.green_dilation(config.kappa, alpha, config.points, config.scale, config.n, config.seed, config.dt, config.t_max or DEFAULT_TARGET_T_MAX, config.delta_hit)
        return {"order": str(alpha), "dilation": report, "deviation": report.deviation}, {}

    @router.mode("m-rho")
    def m_rho(config: ExperimentConfig) -> CommandResult:
        """
        Total mass of M(rho; x)
        """
        rho = require(config.rho, "--rho")[0]
        ensemble = sampler_service.sample_m_rho(config.kappa, rho, require(config.x, "--x"), config.n, config.seed, config.dt, config.t_max or DEFAULT_TARGET_T_MAX, config.delta_hit)
        value, stderr = ensemble.total_mass()
        result = {"rho": rho, "x": config.x, "value": value, "stderr": stderr, "failure_rate": ensemble.failure_rate, "params": ensemble.params}
        rows = [(i, w, t1, t2) for i, (w, t1, t2) in enumerate(zip(ensemble.weights, ensemble.features["first_hit_time"], ensemble.features["second_hit_time"]))]
        return result, {"weights": ReportStore.table(["sample", "weight", "first_hit_time", "second_hit_time"], rows)}

    @router.mode("m-x")
    def m_x(config: ExperimentConfig) -> CommandResult:
        """
        Two-curve measure m_x(W1, W2) and its time-reversal check against m_x(W2, W1)
        """
        weights = require(config.weights, "--weights")
        if len(weights) != 2:
            raise SLEValidationException("m-x needs two weights W1,W2")
        report = sampler_service.m_x_reversal_check(config.kappa, weights[0], weights[1], require(config.x, "--x"), config.n, config.seed, config.dt, config.t_max or DEFAULT_T_MAX)
        value, stderr = report.masses["forward"]
        result = {
            "W": weights,
            "x": config.x,
            "value": value,
            "stderr": stderr,
            "reversal": report,
            "failure_rate": report.failure_rate,
        }
        return result, {}

    return router
