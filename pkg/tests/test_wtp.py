import pytest

from src.core.errors import UnboundedCompensationError, ValidacionError
from src.core.model import ContractState, PreferenceParams
from src.core.wtp import (
    DUTY_STEP_WEEKLY,
    FUNDING_STEP_1,
    Offer,
    indifference_salary,
    run_thought_experiments,
    standard_offers,
    wtp_report,
)
from tests.factories import make_record


def test_standard_offers_labels(contract):
    offers = standard_offers(contract)
    assert [o.label for o in offers] == ["1", "2", "3", "4"]
    assert offers[0].G_tilde == contract.guaranteed_funding + FUNDING_STEP_1
    assert offers[2].D_tilde == 0.0
    assert offers[3].D_tilde == pytest.approx(contract.duties + DUTY_STEP_WEEKLY)


def test_duty_removal_skipped_without_duties():
    offers = standard_offers(ContractState(100_000, 50_000, 0.0))
    assert [o.label for o in offers] == ["1", "2", "4"]


def test_duty_step_is_twenty_hours_a_month():
    assert DUTY_STEP_WEEKLY == pytest.approx(20.0 * 12 / 52)


@pytest.mark.parametrize("attrs", ["fundraiser", "non_fundraiser"])
def test_closed_form_matches_bisection(request, cal, contract, prefs, attrs):
    a = request.getfixturevalue(attrs)
    record = make_record("r1", contract, a, prefs, cal)
    for offer in standard_offers(contract):
        closed = indifference_salary(record, a, prefs, cal, offer)
        bisected = indifference_salary(record, a, prefs, cal, offer, method="bisection")
        assert closed == pytest.approx(bisected, abs=0.05)


def test_signs_of_willingness_to_pay(cal, contract, fundraiser, prefs):
    record = make_record("r1", contract, fundraiser, prefs, cal)
    reports = {r.label: r for r in run_thought_experiments(record, fundraiser, prefs, cal)}
    assert reports["1"].wtp > 0
    assert reports["2"].wtp > reports["1"].wtp
    assert reports["3"].wtp > 0
    assert reports["4"].wtp < 0
    assert reports["1"].per_dollar == pytest.approx(reports["1"].wtp / FUNDING_STEP_1)
    assert reports["3"].per_hour == pytest.approx(reports["3"].wtp / contract.duties)
    assert reports["4"].per_hour == pytest.approx(reports["4"].wtp / -DUTY_STEP_WEEKLY)


def test_status_quo_offer_keeps_salary(cal, contract, fundraiser, prefs):
    record = make_record("r1", contract, fundraiser, prefs, cal)
    same = Offer(contract.guaranteed_funding, contract.duties, "0")
    assert indifference_salary(record, fundraiser, prefs, cal, same) == contract.salary


def test_unbounded_compensation(cal, contract, fundraiser):
    # σ < 1 con ω minúsculo: la oferta vale más que cualquier salario
    p = PreferenceParams(1e-6, 0.5, 0.5, 7e-4, 1.2, 1.0)
    record = make_record("r1", contract, fundraiser, p, cal)
    offer = standard_offers(contract)[0]
    with pytest.raises(UnboundedCompensationError):
        indifference_salary(record, fundraiser, p, cal, offer)
    with pytest.raises(UnboundedCompensationError):
        indifference_salary(record, fundraiser, p, cal, offer, method="bisection")


def test_invalid_offer(cal, contract, fundraiser, prefs):
    record = make_record("r1", contract, fundraiser, prefs, cal)
    with pytest.raises(ValidacionError):
        indifference_salary(record, fundraiser, prefs, cal, Offer(-1.0, 10.0, "x"))
    with pytest.raises(ValidacionError):
        indifference_salary(record, fundraiser, prefs, cal, Offer(0.0, cal.max_hours, "x"))
    with pytest.raises(ValidacionError):
        indifference_salary(
            record, fundraiser, prefs, cal, standard_offers(contract)[0], method="newton"
        )


def test_report_without_unit():
    c = ContractState(100_000, 10_000, 10.0)
    report = wtp_report(c, Offer(20_000, 5.0, "mix"), 95_000.0)
    assert report.wtp == 5_000.0
    assert report.per_dollar is None and report.per_hour is None
