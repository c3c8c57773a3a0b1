import numpy as np
import pytest

from src.core.calculator import DiagnosticsCalculator
from src.core.errors import ValidacionError
from src.core.synth import (
    TARGET_MEAN_RESEARCH,
    PopulationConfig,
    calibrated_defaults,
    generate_population,
)
from src.core.wtp import FUNDING_STEP_1


def test_generation_is_deterministic():
    a = generate_population(PopulationConfig(n=25, seed=5))
    b = generate_population(PopulationConfig(n=25, seed=5))
    assert a.records == b.records
    assert a.attributes == b.attributes


def test_draws_do_not_depend_on_population_size():
    small = generate_population(PopulationConfig(n=10, seed=5))
    large = generate_population(PopulationConfig(n=25, seed=5))
    for i in range(10):
        assert small.records[i].id == large.records[i].id
        assert small.records[i].contract == large.records[i].contract
        assert small.attributes[i] == large.attributes[i]


def test_population_satisfies_model(cal, population):
    for record, a, sol in zip(population.records, population.attributes, population.solutions):
        record.validate(cal)
        assert record.expected_extra_funding == pytest.approx(a.fundraising_ability * record.allocation.fundraising)
        if not sol.hours_corner:
            assert abs(sol.residual) <= 1e-8
        assert len(record.features) == population.config.n_features
        assert record.type_index is not None


def test_population_has_non_fundraisers(population):
    zero = sum(1 for r in population.records if r.allocation.fundraising == 0)
    assert zero / len(population.records) > 0.05
    assert zero < len(population.records)


def test_answers_follow_offers(population):
    for record in population.records:
        for j, answer in enumerate(record.wtp_answers, start=1):
            if j == 3 and record.contract.duties == 0:
                assert answer is None
            elif answer is not None:
                assert answer > 0
        # más fondos garantizados: salario de indiferencia menor
        assert record.wtp_answers[0] < record.contract.salary


def test_noise_only_moves_answers():
    clean = generate_population(PopulationConfig(n=15, seed=2))
    noisy = generate_population(PopulationConfig(n=15, seed=2, answer_noise_sd=500.0))
    for a, b in zip(clean.records, noisy.records):
        assert a.allocation == b.allocation
    assert any(a.wtp_answers != b.wtp_answers for a, b in zip(clean.records, noisy.records))


def test_truth_dict(population):
    truth = population.truth_dict()
    assert set(truth) == {"deep", "type_model", "researchers"}
    first = truth["researchers"][0]
    assert set(first) == {"id", "T", "alpha", "gamma", "phi"}
    assert len(population.planner_researchers()) == len(population.records)


def test_single_researcher_population():
    pop = generate_population(PopulationConfig(n=1, seed=0))
    assert pop.type_model is None
    assert pop.records[0].type_index == 0.0


def test_config_validation():
    with pytest.raises(ValidacionError):
        PopulationConfig(n=0)
    with pytest.raises(ValidacionError):
        PopulationConfig(field_shares={"Astrology": 1.0})
    with pytest.raises(ValidacionError):
        PopulationConfig(low_phi_share=1.5)
    with pytest.raises(ValidacionError):
        PopulationConfig(answer_noise_sd=-1.0)


@pytest.mark.slow
def test_calibrated_population_moments():
    cfg = calibrated_defaults(n=200, seed=0, calibration_n=100, rounds=2)
    pop = generate_population(cfg)
    mean_R = np.mean([r.allocation.research for r in pop.records])
    assert mean_R == pytest.approx(TARGET_MEAN_RESEARCH, rel=0.15)

    per_dollar = [
        (r.contract.salary - r.wtp_answers[0]) / FUNDING_STEP_1
        for r in pop.records
        if r.wtp_answers[0] is not None
    ]
    assert 0.05 < float(np.median(per_dollar)) < 0.2

    ratio = DiagnosticsCalculator.tfp_ratio_90_10([a.tfp for a in pop.attributes])
    assert 15 < ratio < 60
