import numpy as np

# Utils
from utils.log_utils import LogUtil

# Services
from services.exponent_service import EXPONENT_COLUMNS, ExponentService

# Database
from database.report_store import ReportStore

# Models
from models.experiment_config import ExperimentConfig

# Commands
from commands.command_router import CommandResult, CommandRouter

DEFAULT_KAPPA_GRID = tuple(np.round(np.arange(0.5, 3.91, 0.1), 10))


def create_exponents_command(log_util: LogUtil, exponent_service: ExponentService) -> CommandRouter:
    router = CommandRouter(name="exponents", help_text="Exponent table over a kappa grid")

    @router.mode("table")
    def table(config: ExperimentConfig) -> CommandResult:
        """
        b, b2, Q and the exponent identities for every kappa
        """
        if config.kappa_grid:
            kappas = config.kappa_grid
        elif config.kappa is not None:
            kappas = [config.kappa]
        else:
            kappas = list(DEFAULT_KAPPA_GRID)
        rows = exponent_service.exponent_rows(kappas)
        log_util.info(service_name="ExponentsCommand", message=f"Exponent table over {len(rows)} kappa values")
        return {"rows": rows}, {"exponents": ReportStore.table(EXPONENT_COLUMNS, [[row[c] for c in EXPONENT_COLUMNS] for row in rows])}

    return router
