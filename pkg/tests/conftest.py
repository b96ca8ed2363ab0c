import pytest

# Utils
from utils.log_utils import LogUtil

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


@pytest.fixture(scope="session")
def log_util():
    return LogUtil(console=False)


@pytest.fixture(scope="session")
def flow_engine(log_util):
    return FlowEngine(log_util=log_util, threads=1)


@pytest.fixture(scope="session")
def pattern_service(log_util):
    return PatternService(log_util=log_util)


@pytest.fixture(scope="session")
def exponent_service(log_util):
    return ExponentService(log_util=log_util)


@pytest.fixture(scope="session")
def loewner_service(log_util):
    return LoewnerService(log_util=log_util)


@pytest.fixture(scope="session")
def sampler_service(log_util, flow_engine, loewner_service, exponent_service, pattern_service):
    return SamplerService(
        log_util=log_util,
        flow_engine=flow_engine,
        loewner_service=loewner_service,
        exponent_service=exponent_service,
        pattern_service=pattern_service,
        block_size=256,
    )


@pytest.fixture(scope="session")
def partition_service(log_util, flow_engine, exponent_service, pattern_service, loewner_service):
    return PartitionService(
        log_util=log_util,
        flow_engine=flow_engine,
        exponent_service=exponent_service,
        pattern_service=pattern_service,
        loewner_service=loewner_service,
        block_size=256,
    )


@pytest.fixture(scope="session")
def green_service(log_util, flow_engine, loewner_service, exponent_service):
    return GreenService(
        log_util=log_util,
        flow_engine=flow_engine,
        loewner_service=loewner_service,
        exponent_service=exponent_service,
        block_size=256,
    )


@pytest.fixture(scope="session")
def martingale_service(log_util, flow_engine, loewner_service):
    return MartingaleService(log_util=log_util, flow_engine=flow_engine, loewner_service=loewner_service, block_size=256)


@pytest.fixture(scope="session")
def gibbs_service(log_util, flow_engine, loewner_service):
    return GibbsService(log_util=log_util, flow_engine=flow_engine, loewner_service=loewner_service, block_size=256)


@pytest.fixture(scope="session")
def imaginary_geometry_service(log_util, flow_engine, loewner_service, sampler_service, exponent_service):
    return ImaginaryGeometryService(
        log_util=log_util,
        flow_engine=flow_engine,
        loewner_service=loewner_service,
        sampler_service=sampler_service,
        exponent_service=exponent_service,
    )


@pytest.fixture(scope="session")
def lqg_service(log_util, exponent_service):
    return LqgService(log_util=log_util, exponent_service=exponent_service, block_size=256)
