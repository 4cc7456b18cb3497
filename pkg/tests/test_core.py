import itertools
import math

import numpy as np
import pytest

from meritmatch.core import (
    Applicant,
    DomainError,
    Prefecture,
    School,
    SeededRng,
    build_prefectures,
    default_prefectures,
    default_schools,
    distance,
    distance_by_id,
    distance_matrix,
    load_geography,
    load_schools,
    save_geography,
    save_schools,
    validate_market,
)
from meritmatch.popgen import default_scenario


def _pref(pid, x, y, urban=False, w=0.5, edu=0.3, name=None):
    return Prefecture(id=pid, name=name or f"P{pid}", coord=(x, y), urban=urban, pop_weight=w, edu_index=edu)


def test_distance_identity():
    p = _pref(0, 12.0, -7.0)
    assert distance(p, p) == 0.0


def test_distance_3_4_5():
    a = _pref(0, 0.0, 0.0)
    b = _pref(1, 3.0, 4.0)
    assert distance(a, b) == pytest.approx(5.0)
    assert distance(b, a) == pytest.approx(5.0)


def test_tokyo_kanagawa_within_urban_band():
    prefs = default_prefectures()
    by_name = {p.name: p for p in prefs}
    # hand calculation from the shipped table: (152.4, -34.6) vs (147.9, -61.4)
    expected = math.hypot(152.4 - 147.9, -34.6 - (-61.4))
    assert distance(by_name["Tokyo"], by_name["Kanagawa"]) == pytest.approx(expected)
    assert expected <= 100.0


def test_unknown_prefecture_id_is_domain_error():
    prefs = default_prefectures()
    with pytest.raises(DomainError):
        distance_by_id(prefs, 0, 99)


def test_distance_is_a_metric_on_default_geography():
    prefs = default_prefectures()
    d = distance_matrix(prefs)
    n = len(prefs)
    assert np.allclose(d, d.T)
    assert np.all(np.diag(d) == 0.0)
    off = d[~np.eye(n, dtype=bool)]
    assert np.all(off > 0)
    # triangle inequality over all ordered triples: d[i,k] <= d[i,j] + d[j,k]
    assert np.all(d[:, None, :] <= d[:, :, None] + d[None, :, :] + 1e-9)


def test_exactly_seven_urban_prefectures():
    prefs = default_prefectures()
    urban = sorted(p.name for p in prefs if p.urban)
    assert urban == ["Chiba", "Gunma", "Ibaraki", "Kanagawa", "Saitama", "Tochigi", "Tokyo"]
    tokyo = next(p for p in prefs if p.name == "Tokyo")
    for p in prefs:
        assert p.urban == (distance(p, tokyo) <= 100.0)


def test_pop_weights_sum_to_one():
    prefs = default_prefectures()
    assert sum(p.pop_weight for p in prefs) == pytest.approx(1.0, abs=1e-9)


def test_validate_market_default_is_clean():
    sc = default_scenario(scale=0.01)
    assert validate_market(sc.prefectures, sc.schools) == []


def test_validate_market_flags_nonpositive_capacity():
    sc = default_scenario(scale=0.01)
    bad = list(sc.schools)
    bad[0] = School(id=1, prefecture_id=bad[0].prefecture_id, capacity=0, prestige=bad[0].prestige)
    violations = validate_market(sc.prefectures, bad)
    assert any(v.code == "nonpositive_capacity" for v in violations)


def test_validate_market_flags_unnormalized_weights():
    prefs = default_prefectures()
    shrunk = [
        Prefecture(p.id, p.name, p.coord, p.urban, p.pop_weight * 0.9, p.edu_index) for p in prefs
    ]
    violations = validate_market(shrunk, [])
    assert any(v.code == "weights_not_normalized" for v in violations)


def test_validate_market_collects_multiple_violations():
    prefs = default_prefectures()
    shrunk = [
        Prefecture(p.id, p.name, p.coord, p.urban, p.pop_weight * 0.5, p.edu_index) for p in prefs
    ]
    schools = [School(id=1, prefecture_id=999, capacity=-3, prestige=1.0)]
    bad_applicant = Applicant(id=0, birth_prefecture=0, score=float("nan"), utility=(1.0,), outside_option=0.0)
    violations = validate_market(shrunk, schools, [bad_applicant])
    codes = {v.code for v in violations}
    assert {"weights_not_normalized", "nonpositive_capacity", "unknown_prefecture", "score_not_finite"} <= codes


def test_seeded_rng_reproducible_and_stream_separated():
    a = SeededRng(seed=42, stream_id=7).generator().random(5)
    b = SeededRng(seed=42, stream_id=7).generator().random(5)
    c = SeededRng(seed=42, stream_id=8).generator().random(5)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_seeded_rng_substreams_are_stable():
    root = SeededRng(seed=3)
    s1 = root.substream("popgen", 1900)
    s2 = root.substream("popgen", 1900)
    s3 = root.substream("popgen", 1901)
    s4 = root.substream("lottery", 1900)
    assert s1 == s2
    assert s1 != s3 and s1 != s4
    assert np.array_equal(s1.generator().random(3), s2.generator().random(3))


def test_geography_roundtrip(tmp_path):
    prefs = default_prefectures()
    path = tmp_path / "geo.csv"
    save_geography(prefs, path)
    loaded = load_geography(path)
    assert loaded == prefs


def test_geography_bad_header_rejected(tmp_path):
    path = tmp_path / "geo.csv"
    path.write_text("id,name,x,y\n0,Tokyo,0,0\n")
    with pytest.raises(DomainError):
        load_geography(path)


def test_geography_requires_tokyo():
    with pytest.raises(DomainError):
        build_prefectures([("Somewhere", 0.0, 0.0, 1.0, 0.3)])


def test_schools_roundtrip(tmp_path):
    sc = default_scenario(scale=0.01)
    path = tmp_path / "schools.csv"
    save_schools(sc.schools, path)
    assert load_schools(path) == list(sc.schools)


def test_default_schools_prestige_order_matches_selectivity():
    sc = default_scenario()
    by_id = {s.id: s.prestige for s in sc.schools}
    order = sorted(by_id, key=lambda sid: -by_id[sid])
    assert order == [1, 3, 4, 2, 8, 6, 5, 7]
    assert by_id[1] == max(by_id.values())


def test_default_schools_capacity_total():
    sc = default_scenario()
    assert sum(s.capacity for s in sc.schools) == 2008
    assert len({s.capacity for s in sc.schools}) == 1  # uniform split
