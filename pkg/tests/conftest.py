"""Fixtures compartidas: calibración, preferencias suaves y poblaciones pequeñas"""

import pytest

from src.core.model import Attributes, Calibration, ContractState, PreferenceParams
from src.core.synth import PopulationConfig, generate_population


@pytest.fixture
def cal():
    return Calibration()


@pytest.fixture
def prefs():
    # η = 0.5, ζ = 1: población suave con soluciones interiores
    return PreferenceParams(
        income_weight=1100.0,
        income_curvature=1.5,
        output_curvature=0.5,
        effort_weight=7e-4,
        duty_exponent=1.2,
        effort_curvature=1.0,
    )


@pytest.fixture
def contract():
    return ContractState(salary=110_000.0, guaranteed_funding=80_000.0, duties=15.0)


@pytest.fixture
def fundraiser():
    return Attributes(tfp=0.0025, funding_intensity=0.35, fundraising_ability=20_000.0)


@pytest.fixture
def non_fundraiser():
    return Attributes(tfp=0.0025, funding_intensity=0.35, fundraising_ability=500.0)


@pytest.fixture(scope="session")
def population():
    """120 investigadores, mezcla de recaudadores y no-recaudadores"""
    return generate_population(PopulationConfig(n=120, seed=3))


@pytest.fixture(scope="session")
def fundraiser_population():
    """Un solo campo con γ alto: casi todos recaudan fondos"""
    cfg = PopulationConfig(
        n=40,
        seed=11,
        field_shares={"Engineering & Math": 1.0},
        low_phi_share=0.0,
    )
    return generate_population(cfg)
