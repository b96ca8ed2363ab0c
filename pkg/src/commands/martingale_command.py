# Utils
from utils.log_utils import LogUtil

# Services
from services.martingale_service import DEFAULT_CHECKPOINTS, MartingaleService
from services.sampler_service import DEFAULT_T_MAX, SamplerService

# Database
from database.report_store import ReportStore

# Models
from models.experiment_config import ExperimentConfig

# Commands
from commands.command_router import CommandResult, CommandRouter
from commands.sle_trace_command import forces_from_config


def create_martingale_command(log_util: LogUtil, sampler_service: SamplerService, martingale_service: MartingaleService) -> CommandRouter:
    router = CommandRouter(name="martingale", help_text="Change-of-weights martingale between SLE_kappa(rho) laws")

    @router.mode("check")
    def check(config: ExperimentConfig) -> CommandResult:
        """
        Stopped means of M at the checkpoints
        """
        forces = forces_from_config(config)
        series = martingale_service.martingale_check(
            config.kappa,
            forces,
            config.rho_tilde,
            config.n,
            config.seed,
            checkpoints=config.checkpoints or DEFAULT_CHECKPOINTS,
            dt=config.dt,
        )
        rows = [(c.time, c.mean, c.stderr, c.deviation) for c in series.checkpoints]
        result = {"series": series, "max_deviation": max(c.deviation for c in series.checkpoints)}
        return result, {"checkpoints": ReportStore.table(["t", "mean", "stderr", "deviation"], rows)}

    @router.mode("ks")
    def ks(config: ExperimentConfig) -> CommandResult:
        """
        Reweighted driving marginal against direct sampling at --horizon
        """
        comparison = martingale_service.reweighted_marginal(config.kappa, forces_from_config(config), config.rho_tilde, config.n, config.seed, config.horizon, config.dt)
        return {"comparison": comparison}, {}

    @router.mode("terminal")
    def terminal(config: ExperimentConfig) -> CommandResult:
        """
        Limit weight of one curve run to --t-max
        """
        forces = forces_from_config(config)
        sample = sampler_service.sample_sle_rho(config.kappa, forces, config.t_max or DEFAULT_T_MAX, config.dt, config.seed)
        weight = martingale_service.terminal_weight(sample, config.rho, config.rho_tilde)
        flagged = weight.flagged or sample.flagged
        return {"terminal": weight, "failure_rate": 1.0 if flagged else 0.0}, {}

    return router
