import argparse
import sys
from typing import Dict, List, Optional

# Utils
from utils.log_utils import LogUtil
from utils.environment_utils import EnvironmentUtils

# Exceptions
from exceptions.sle_exception import SLEException

# Configurations
from configurations.config_loader import ConfigLoader, add_experiment_arguments

# Database
from database.report_store import ReportStore

# Services
from services.exponent_service import ExponentService
from services.gibbs_service import GibbsService
from services.green_service import GreenService
from services.imaginary_geometry_service import ImaginaryGeometryService
from services.loewner_service import LoewnerService
from services.lqg_service import LqgService
from services.martingale_service import MartingaleService
from services.partition_service import PartitionService
from services.pattern_service import PatternService
from services.sampler_service import SamplerService
from services.sle_flow_engine import FlowEngine

# Commands
from commands.command_router import CommandRouter
from commands.exponents_command import create_exponents_command
from commands.green_command import create_green_command
from commands.ig_command import create_ig_command
from commands.lp_command import create_lp_command
from commands.lqg_command import create_lqg_command
from commands.martingale_command import create_martingale_command
from commands.sle_trace_command import create_sle_trace_command
from commands.zeta_command import create_zeta_command

# Utils
log_util = LogUtil()
environment_utils = EnvironmentUtils(log_util=log_util)

# Configurations
config_loader = ConfigLoader(log_util=log_util, environment_utils=environment_utils)

# Database
report_store = ReportStore(log_util=log_util, environment_utils=environment_utils)


def create_commands(threads: int = 1, block_size: int = 512) -> List[CommandRouter]:
    # Services
    flow_engine = FlowEngine(log_util=log_util, threads=threads)
    pattern_service = PatternService(log_util=log_util)
    exponent_service = ExponentService(log_util=log_util)
    loewner_service = LoewnerService(log_util=log_util)
    sampler_service = SamplerService(
        log_util=log_util,
        flow_engine=flow_engine,
        loewner_service=loewner_service,
        exponent_service=exponent_service,
        pattern_service=pattern_service,
        block_size=block_size
    )
    partition_service = PartitionService(
        log_util=log_util,
        flow_engine=flow_engine,
        exponent_service=exponent_service,
        pattern_service=pattern_service,
        loewner_service=loewner_service,
        block_size=block_size
    )
    green_service = GreenService(
        log_util=log_util,
        flow_engine=flow_engine,
        loewner_service=loewner_service,
        exponent_service=exponent_service,
        block_size=block_size
    )
    martingale_service = MartingaleService(
        log_util=log_util,
        flow_engine=flow_engine,
        loewner_service=loewner_service,
        block_size=block_size
    )
    gibbs_service = GibbsService(
        log_util=log_util,
        flow_engine=flow_engine,
        loewner_service=loewner_service,
        block_size=block_size
    )
    imaginary_geometry_service = ImaginaryGeometryService(
        log_util=log_util,
        flow_engine=flow_engine,
        loewner_service=loewner_service,
        sampler_service=sampler_service,
        exponent_service=exponent_service
    )
    lqg_service = LqgService(
        log_util=log_util,
        exponent_service=exponent_service,
        block_size=block_size,
        threads=threads
    )

    # Commands
    return [
        create_lp_command(log_util=log_util, pattern_service=pattern_service),
        create_sle_trace_command(log_util=log_util, sampler_service=sampler_service, loewner_service=loewner_service),
        create_zeta_command(
            log_util=log_util,
            pattern_service=pattern_service,
            partition_service=partition_service,
            gibbs_service=gibbs_service
        ),
        create_green_command(
            log_util=log_util,
            pattern_service=pattern_service,
            sampler_service=sampler_service,
            green_service=green_service
        ),
        create_martingale_command(log_util=log_util, sampler_service=sampler_service, martingale_service=martingale_service),
        create_ig_command(
            log_util=log_util,
            imaginary_geometry_service=imaginary_geometry_service,
            partition_service=partition_service
        ),
        create_lqg_command(log_util=log_util, lqg_service=lqg_service),
        create_exponents_command(log_util=log_util, exponent_service=exponent_service),
    ]


def create_parser(routers: List[CommandRouter]) -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sle-montecarlo", description="Monte Carlo experiments for SLE, multiple SLE and boundary LQG")
    subparsers = parser.add_subparsers(dest="subcommand", required=True)
    for router in routers:
        router.attach(subparsers, add_experiment_arguments)
    return parser


def run(argv: Optional[List[str]] = None) -> int:
    """
    Parses, validates, runs one experiment and writes its report. Returns the exit code.
    """
    parser = create_parser(create_commands())
    args = parser.parse_args(argv)
    try:
        mode, carried = args.router.select(args)
        config = config_loader.load(args.router.name, args, mode=mode.name, overrides=carried)

        # Services sized for this run
        routers: Dict[str, CommandRouter] = {router.name: router for router in create_commands(config.threads, config.block_size)}
        router = routers[config.subcommand]
        selected = next(candidate for candidate in router.modes if candidate.name == config.mode)
        log_util.info(service_name="Main", message=f"Running {config.subcommand} --{config.mode} (seed {config.seed}, {config.threads} threads)")
        result, tables = router.run(selected, config)
        paths = report_store.save(config, result, tables)
    except SLEException as e:
        log_util.error(service_name="Main", message=f"{type(e).__name__}: {e.message}")
        return e.exit_code
    except Exception as e:
        log_util.error(service_name="Main", message=f"Unexpected error: {e}")
        return 1

    for path in paths:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(run())
