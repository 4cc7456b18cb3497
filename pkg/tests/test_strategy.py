import json
import math
from pathlib import Path

import numpy as np
import pytest

from meritmatch.core import Applicant, DomainError, Regime, RegimeKind, SeededRng
from meritmatch.mechanisms import PreferenceList, SingleApplication, _admit_top_per_school
from meritmatch.popgen import default_scenario, generate_applicants
from meritmatch.strategy import (
    BehaviorParams,
    CutoffBeliefs,
    admit_probability,
    choose_single_application,
    equilibrium_cutoffs,
    grouped_ranking,
    single_applications,
    submit_applications,
    truthful_ranking,
)

from conftest import mk_schools

GOLDEN = Path(__file__).parent / "golden"


def _app(aid, score, utility, outside=0.0, birth=0):
    return Applicant(id=aid, birth_prefecture=birth, score=score, utility=tuple(utility), outside_option=outside)


# -- truthful ranking -----------------------------------------------------------


def test_truthful_ranking_abstains_when_nothing_beats_outside():
    a = _app(1, 50, (1.0, 2.0), outside=3.0)
    assert truthful_ranking(a).ranked == ()


def test_truthful_ranking_orders_by_utility():
    a = _app(1, 50, (5.0, 3.0, 4.0), outside=0.0)
    assert truthful_ranking(a).ranked == (1, 3, 2)


def test_truthful_ranking_ties_break_to_lower_school_id():
    a = _app(1, 50, (4.0, 5.0, 5.0), outside=0.0)
    assert truthful_ranking(a).ranked == (2, 3, 1)


# -- admit probability ------------------------------------------------------------


def test_admit_probability_half_at_cutoff():
    assert admit_probability(60.0, 60.0, 5.0) == pytest.approx(0.5)


def test_admit_probability_step_at_sigma_zero():
    assert admit_probability(61.0, 60.0, 0.0) == 1.0
    assert admit_probability(59.0, 60.0, 0.0) == 0.0
    assert admit_probability(60.0, 60.0, 0.0) == 0.5


def test_admit_probability_one_sigma():
    assert admit_probability(65.0, 60.0, 5.0) == pytest.approx(0.8413, abs=2e-4)


def test_admit_probability_no_cutoff():
    assert admit_probability(1.0, -math.inf, 3.0) == 1.0
    assert admit_probability(1.0, -math.inf, 0.0) == 1.0


# -- single application choice -----------------------------------------------------


def test_choose_single_only_one_acceptable_school():
    beliefs = CutoffBeliefs(school_ids=(1, 2), cutoffs=(0.0, 0.0))
    a = _app(1, 50, (5.0, -1.0), outside=0.0)
    app = choose_single_application(a, beliefs, BehaviorParams(score_noise_sd=5.0))
    assert app == SingleApplication(applicant_id=1, school_id=1)


def test_choose_single_abstains():
    beliefs = CutoffBeliefs(school_ids=(1, 2), cutoffs=(0.0, 0.0))
    a = _app(1, 50, (-1.0, -2.0), outside=0.0)
    assert choose_single_application(a, beliefs, BehaviorParams()) is None


def test_choose_single_expected_value_arithmetic():
    # P = (0.1, 0.9), surpluses (10, 6) -> EV (1.0, 5.4) -> school 2
    sigma = 10.0
    z = 1.2815515655446004  # Phi(z) = 0.9
    beliefs = CutoffBeliefs(school_ids=(1, 2), cutoffs=(50 + z * sigma, 50 - z * sigma))
    a = _app(1, 50.0, (10.0, 6.0), outside=0.0)
    app = choose_single_application(a, beliefs, BehaviorParams(score_noise_sd=sigma))
    assert app.school_id == 2


def test_choose_single_high_sigma_limit_takes_best_school():
    # probabilities flatten to ~1/2 -> argmax utility (risk taking)
    beliefs = CutoffBeliefs(school_ids=(1, 2), cutoffs=(80.0, 10.0))
    a = _app(1, 50.0, (10.0, 6.0), outside=0.0)
    app = choose_single_application(a, beliefs, BehaviorParams(score_noise_sd=1e6))
    assert app.school_id == 1


def test_choose_single_affine_invariance():
    gen = np.random.default_rng(8)
    params = BehaviorParams(score_noise_sd=7.0)
    beliefs = CutoffBeliefs(school_ids=(1, 2, 3), cutoffs=(60.0, 50.0, 40.0))
    for _ in range(200):
        u = gen.normal(5, 3, size=3)
        out = gen.normal(0, 2)
        score = gen.normal(50, 10)
        a = _app(1, score, u, outside=out)
        base = choose_single_application(a, beliefs, params)
        k = gen.uniform(0.1, 10)
        # scale surpluses by k: utility' - outside' = k (utility - outside)
        a2 = _app(1, score, out + k * (u - out), outside=out)
        scaled = choose_single_application(a2, beliefs, params)
        assert (base is None) == (scaled is None)
        if base is not None:
            assert base.school_id == scaled.school_id


# -- equilibrium -------------------------------------------------------------------


def test_equilibrium_trivial_when_capacity_exceeds_demand():
    schools = mk_schools(5, 5)
    apps = [_app(i, 50 + i, (6.0, 5.0), outside=0.0) for i in range(3)]
    beliefs, iters, resid = equilibrium_cutoffs(schools, apps, BehaviorParams(score_noise_sd=5.0))
    assert beliefs.cutoffs == (-math.inf, -math.inf)
    assert iters == 1
    assert resid == 0.0


def test_equilibrium_one_school_cutoff_is_marginal_score():
    schools = mk_schools(1)
    apps = [_app(1, 90.0, (10.0,)), _app(2, 80.0, (10.0,))]
    params = BehaviorParams(score_noise_sd=1.0, tol=1e-6, max_iter=100)
    beliefs, iters, resid = equilibrium_cutoffs(schools, apps, params)
    assert resid < params.tol
    assert beliefs.cutoff(1) == pytest.approx(90.0, abs=1e-4)


def test_equilibrium_default_scenario_golden():
    sc = default_scenario()
    params = BehaviorParams()
    apps = generate_applicants(sc.population, sc.prefectures, sc.schools, 1900, SeededRng(0))
    beliefs, iters, resid = equilibrium_cutoffs(
        sc.schools, apps, params, SeededRng(0).substream("strategy", 1900)
    )
    golden = json.loads((GOLDEN / "equilibrium_seed0.json").read_text())
    assert resid < params.tol
    assert iters == golden["iterations"]
    assert list(beliefs.school_ids) == golden["school_ids"]
    assert np.allclose(beliefs.cutoffs, golden["cutoffs"], atol=1e-9)
    # the most selective school carries the highest cutoff
    assert beliefs.cutoff(1) == max(beliefs.cutoffs)


@pytest.mark.filterwarnings("ignore:cutoff iteration")
def test_equilibrium_deterministic_given_seed():
    sc = default_scenario(scale=0.05)
    apps = generate_applicants(sc.population, sc.prefectures, sc.schools, 1900, SeededRng(3))
    params = BehaviorParams()
    r1 = equilibrium_cutoffs(sc.schools, apps, params, SeededRng(11))
    r2 = equilibrium_cutoffs(sc.schools, apps, params, SeededRng(11))
    assert r1[0] == r2[0] and r1[1] == r2[1] and r1[2] == r2[2]


@pytest.mark.filterwarnings("ignore:cutoff iteration")
def test_equilibrium_damping_one_is_undamped():
    schools = mk_schools(1, 1)
    apps = [_app(i, 40.0 + 5 * i, (8.0, 6.0), outside=0.0) for i in range(5)]
    params = BehaviorParams(score_noise_sd=4.0, damping=1.0, tol=1e-300, max_iter=7)
    beliefs, _, _ = equilibrium_cutoffs(schools, apps, params)

    # manual undamped iteration with the same floor convention
    from meritmatch.strategy import _applicant_arrays, _belief_floor, _best_single_choices

    ids, scores, utils, outside = _applicant_arrays(apps)
    floor = _belief_floor(scores, 4.0)
    ties = np.zeros(len(ids))
    caps = np.array([1, 1])
    cut = np.full(2, floor)
    under = np.ones(2, dtype=bool)
    for _ in range(7):
        choice = _best_single_choices(scores, utils, outside, cut, 4.0)
        _, realized = _admit_top_per_school(choice, scores, ties, caps)
        under = np.isneginf(realized)
        cut = np.where(under, floor, realized)
    expected = np.where(under, -np.inf, cut)
    assert np.allclose(np.array(beliefs.cutoffs), expected)


@pytest.mark.filterwarnings("ignore:cutoff iteration")
def test_equilibrium_shift_invariance():
    sc = default_scenario(scale=0.05)
    params = BehaviorParams()
    apps = generate_applicants(sc.population, sc.prefectures, sc.schools, 1905, SeededRng(4))
    shift = 25.0
    shifted = [
        Applicant(a.id, a.birth_prefecture, a.score + shift, a.utility, a.outside_option)
        for a in apps
    ]
    rng = SeededRng(9).substream("strategy", 1905)
    base, _, _ = equilibrium_cutoffs(sc.schools, apps, params, rng)
    moved, _, _ = equilibrium_cutoffs(sc.schools, shifted, params, rng)
    for c0, c1 in zip(base.cutoffs, moved.cutoffs):
        if math.isinf(c0):
            assert math.isinf(c1)
        else:
            assert c1 - c0 == pytest.approx(shift, abs=1e-8)
    # admission probabilities for any fixed applicant are unchanged
    a0 = apps[0]
    for sid in base.school_ids:
        p0 = admit_probability(a0.score, base.cutoff(sid), params.score_noise_sd)
        p1 = admit_probability(a0.score + shift, moved.cutoff(sid), params.score_noise_sd)
        assert p1 == pytest.approx(p0, abs=1e-9)
    # and the chosen applications coincide
    apps0 = single_applications(sc.schools, apps, base, params)
    apps1 = single_applications(sc.schools, shifted, moved, params)
    assert [a.school_id for a in apps0] == [a.school_id for a in apps1]


# -- submit_applications ------------------------------------------------------------


def test_submit_centralized_full_truthful_list():
    sc = default_scenario(scale=0.01)
    a = _app(1, 55.0, tuple(10.0 - i for i in range(8)), outside=0.0)
    out = submit_applications(sc.schools, [a], Regime(RegimeKind.CENTRALIZED, 1902), BehaviorParams())
    assert out == [PreferenceList(applicant_id=1, ranked=(1, 2, 3, 4, 5, 6, 7, 8))]


@pytest.mark.filterwarnings("ignore:cutoff iteration")
def test_submit_unified_exam_identical_to_decentralized():
    sc = default_scenario(scale=0.05)
    apps = generate_applicants(sc.population, sc.prefectures, sc.schools, 1910, SeededRng(5))
    params = BehaviorParams()
    rng = SeededRng(5).substream("strategy", 1910)
    dec = submit_applications(sc.schools, apps, Regime(RegimeKind.DECENTRALIZED, 1900), params, rng)
    due = submit_applications(
        sc.schools, apps, Regime(RegimeKind.DECENTRALIZED_UNIFIED_EXAM, 1910), params, rng
    )
    assert dec == due


def test_submit_grouped_constraint_forces_one_per_group():
    groups = (frozenset({1, 2, 3, 4}), frozenset({5, 6, 7, 8}))
    utility = (10.0, 1, 1, 1, 9.0, 1, 1, 1)
    a = _app(1, 55.0, utility, outside=0.5)
    pl = grouped_ranking(a, groups)
    assert pl.ranked == (1, 5)


def test_submit_grouped_via_dispatch():
    sc = default_scenario(scale=0.01)
    groups = (frozenset({1, 3, 5, 7}), frozenset({2, 4, 6, 8}))
    a = _app(1, 55.0, (9.0, 8.0, 1, 1, 1, 1, 1, 1), outside=0.5)
    out = submit_applications(
        sc.schools, [a], Regime(RegimeKind.GROUPED_CENTRALIZED, 1926, groups), BehaviorParams()
    )
    assert out == [PreferenceList(applicant_id=1, ranked=(1, 2))]


def test_submit_unknown_regime_rejected():
    sc = default_scenario(scale=0.01)
    with pytest.raises(DomainError):
        submit_applications(sc.schools, [], Regime("bogus", 1900), BehaviorParams())


def test_grouped_regime_requires_groups():
    sc = default_scenario(scale=0.01)
    with pytest.raises(DomainError):
        submit_applications(sc.schools, [], Regime(RegimeKind.GROUPED_CENTRALIZED, 1926), BehaviorParams())


def test_beliefs_accessor_unknown_school():
    beliefs = CutoffBeliefs(school_ids=(1,), cutoffs=(1.0,))
    with pytest.raises(DomainError):
        beliefs.cutoff(9)


# -- risk-taking comparative static ---------------------------------------------------


@pytest.mark.filterwarnings("ignore:cutoff iteration")
def test_centralized_first_choices_more_aggressive_than_decentralized():
    # scaled-down scenario for speed; the full-scale version is part of the
    # acceptance suite
    sc = default_scenario(scale=0.05)
    params = BehaviorParams()
    wins = 0
    for seed in range(20):
        apps = generate_applicants(sc.population, sc.prefectures, sc.schools, 1900, SeededRng(seed))
        truthful = [t for t in (truthful_ranking(a) for a in apps) if t.ranked]
        cen_share = sum(1 for t in truthful if t.ranked[0] == 1) / len(truthful)
        beliefs, _, _ = equilibrium_cutoffs(
            sc.schools, apps, params, SeededRng(seed).substream("strategy", 1900)
        )
        singles = single_applications(sc.schools, apps, beliefs, params)
        dec_share = sum(1 for s in singles if s.school_id == 1) / len(singles)
        wins += cen_share > dec_share
    assert wins == 20
