import argparse
import json
import math

import pytest
from pydantic import ValidationError

# Utils
from utils.environment_utils import EnvironmentUtils

# Exceptions
from exceptions.sle_exception import SLEValidationException

# Configurations
from configurations.config_loader import ConfigLoader, add_experiment_arguments, float_list

# Commands
from commands.command_router import CommandRouter

# Models
from models.experiment_config import ExperimentConfig


@pytest.fixture
def config_loader(log_util, monkeypatch):
    monkeypatch.setenv("SLE_THREADS", "3")
    monkeypatch.setenv("SLE_BLOCK_SIZE", "64")
    monkeypatch.setenv("SLE_OUTPUT_DIR", "/tmp/sle-env-reports")
    return ConfigLoader(log_util=log_util, environment_utils=EnvironmentUtils(log_util=log_util))


def parse(argv):
    parser = argparse.ArgumentParser()
    add_experiment_arguments(parser)
    return parser.parse_args(argv)


def test_float_list_parsing():
    assert float_list("0,1.5,inf") == [0.0, 1.5, math.inf]
    assert math.copysign(1.0, float_list("-0,1")[0]) == -1.0
    with pytest.raises(argparse.ArgumentTypeError):
        float_list("1,a")


def test_environment_fills_run_control(config_loader):
    config = config_loader.load("lp", parse([]))
    assert config.threads == 3
    assert config.block_size == 64
    assert config.output_dir == "/tmp/sle-env-reports"
    assert config.kappa is None


def test_flags_override_the_config_file(config_loader, tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"subcommand": "zeta", "kappa": 2.0, "points": [0, 1, 2, 3], "n": 50, "threads": 2}))
    config = config_loader.load("zeta", parse(["--config", str(path), "--n", "70"]), mode="estimate")
    assert config.n == 70
    assert config.points == [0.0, 1.0, 2.0, 3.0]
    assert config.threads == 2
    assert config.mode == "estimate"


def test_config_file_for_another_subcommand(config_loader, tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"subcommand": "green", "kappa": 2.0}))
    with pytest.raises(SLEValidationException):
        config_loader.load("lp", parse(["--config", str(path)]))


def test_unreadable_config(config_loader, tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{not json")
    with pytest.raises(SLEValidationException):
        config_loader.load("lp", parse(["--config", str(path)]))
    path.write_text("[1, 2]")
    with pytest.raises(SLEValidationException):
        config_loader.load("lp", parse(["--config", str(path)]))


def test_invalid_values_become_validation_errors(config_loader):
    with pytest.raises(SLEValidationException):
        config_loader.load("green", parse(["--kappa", "5"]))
    with pytest.raises(SLEValidationException):
        config_loader.load("sle-trace", parse([]))


def test_kappa_and_gamma_resolve_each_other():
    assert ExperimentConfig(subcommand="lqg", gamma=1.5).kappa == pytest.approx(2.25)
    assert ExperimentConfig(subcommand="sle-trace", kappa=4.0).gamma == pytest.approx(2.0)
    assert ExperimentConfig(subcommand="lqg", kappa=2.25, gamma=1.5).kappa == pytest.approx(2.25)
    with pytest.raises(ValidationError):
        ExperimentConfig(subcommand="lqg", kappa=2.0, gamma=1.0)
    with pytest.raises(ValidationError):
        ExperimentConfig(subcommand="zeta", kappa=2.0, points=[0.0, 2.0, 1.0, 3.0])
    with pytest.raises(ValidationError):
        ExperimentConfig(subcommand="lp", unknown=1)


def test_router_selects_modes():
    router = CommandRouter("lp", "link patterns")

    @router.mode("enumerate", field="n_links", kind=int)
    def enumerate_patterns(config):
        return {}, {}

    @router.mode("validate")
    def validate(config):
        return {}, {}

    parser = argparse.ArgumentParser()
    router.attach(parser.add_subparsers(dest="subcommand"), lambda p: None)

    mode, carried = router.select(parser.parse_args(["lp", "--enumerate", "4"]))
    assert (mode.name, carried) == ("enumerate", {"n_links": 4})
    mode, carried = router.select(parser.parse_args(["lp", "--validate"]))
    assert (mode.name, carried) == ("validate", {})
    mode, carried = router.select(parser.parse_args(["lp"]))
    assert (mode.name, carried) == ("enumerate", {})
    with pytest.raises(SystemExit):
        parser.parse_args(["lp", "--enumerate", "4", "--validate"])
