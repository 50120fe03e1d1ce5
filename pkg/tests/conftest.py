"""Shared fixtures: the two worked pricing configurations and the observed
solar-device dataset."""

from __future__ import annotations

from pathlib import Path

import pytest

from bsplan import CostModel, LossPoly, PriorSpec

ROOT = Path(__file__).resolve().parent.parent
DATA_DIR = Path(__file__).resolve().parent / "data"
CONFIG_DIR = ROOT / "examples" / "configs"


@pytest.fixture(scope="session")
def ex1_priors() -> PriorSpec:
    return PriorSpec(alpha=(2.5, 2.2), beta=(1.5, 2.0), l=(10.0, 10.0))


@pytest.fixture(scope="session")
def ex1_loss() -> LossPoly:
    return LossPoly(a0=2.0, a=(3.0, 3.0), quad=((4.0, 4.0), (0.0, 4.0)))


def ex1_costs_at(c_a: float) -> CostModel:
    return CostModel(c_s=0.5, v_s=0.25, c_t=5.0, c_a=c_a, c_r=40.0)


@pytest.fixture(scope="session")
def ex1_costs() -> CostModel:
    return ex1_costs_at(0.1)


@pytest.fixture(scope="session")
def ex2_priors() -> PriorSpec:
    return PriorSpec(alpha=(3.05, 13.0), beta=(137.35, 135.44), l=(109.072, 11.718))


@pytest.fixture(scope="session")
def ex2_loss() -> LossPoly:
    return LossPoly(a0=6.0, a=(200.0, 200.0), quad=((4000.0, 4000.0), (0.0, 4000.0)))


@pytest.fixture(scope="session")
def ex2_costs() -> CostModel:
    return CostModel(c_s=0.5, v_s=0.3, c_t=0.3, c_a=0.05, c_r=80.0)


@pytest.fixture(scope="session")
def solar_csv() -> Path:
    return DATA_DIR / "solar.csv"


@pytest.fixture(scope="session")
def ex1_config() -> Path:
    return CONFIG_DIR / "example1.ini"


@pytest.fixture(scope="session")
def ex2_config() -> Path:
    return CONFIG_DIR / "example2.ini"
