"""Constructores de registros a partir de la política óptima del modelo"""

from src.core.model import ResearcherRecord, TimeAllocation
from src.core.planner import PlannerResearcher
from src.core.policy import solve_policy


def make_record(rid, c, a, p, cal, answers=(None, None, None, None), field_label="Natural Sciences", T=0.0):
    sol = solve_policy(c, a, p, cal)
    return ResearcherRecord(
        id=rid,
        field_label=field_label,
        contract=c,
        allocation=TimeAllocation(sol.R, sol.F, sol.H),
        expected_extra_funding=a.fundraising_ability * sol.F,
        wtp_answers=answers,
        type_index=T,
    )


def make_planner_researcher(rid, c, a, p, cal, field_label="Natural Sciences"):
    sol = solve_policy(c, a, p, cal)
    return PlannerResearcher(
        id=rid,
        field_label=field_label,
        contract=c,
        attributes=a,
        prefs=p,
        expected_extra_funding=a.fundraising_ability * sol.F,
    )
