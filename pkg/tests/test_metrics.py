import csv
import math

import numpy as np
import pytest

from meritmatch.core import Assignment, DomainError, Placement, RegimeKind, SeededRng
from meritmatch.mechanisms import PreferenceList, SingleApplication
from meritmatch.metrics import (
    PANEL_COLUMNS,
    YEAR_OUTCOME_COLUMNS,
    PanelRow,
    YearRecord,
    build_panel,
    panel_to_columns,
    read_panel_csv,
    read_year_outcomes_csv,
    write_panel_csv,
    write_year_outcomes_csv,
    year_outcome,
)
from meritmatch.popgen import default_scenario, generate_applicants
from meritmatch.pipeline import simulate_seed
from meritmatch.strategy import BehaviorParams


@pytest.fixture(scope="module")
def small_run():
    sc = default_scenario(scale=0.05, year_start=1900, year_end=1903)
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        res = simulate_seed(sc, BehaviorParams(), seed=0)
    return sc, res


def test_year_outcome_everyone_unassigned():
    sc = default_scenario(scale=0.01)
    apps = [SingleApplication(1, 1), SingleApplication(2, 2)]
    assignment = Assignment(placed={}, unassigned=frozenset({1, 2}))
    birth = {1: 12, 2: 0}
    out = year_outcome(apps, assignment, sc.prefectures, sc.schools, birth, 1900, RegimeKind.DECENTRALIZED)
    assert out.share_first_choice_school1 == 0.5
    assert out.mean_enrollment_distance_km is None
    assert out.tokyo_area_entrant_share is None
    assert out.entrants_total == 0
    assert out.unassigned_total == 2


def test_year_outcome_single_tokyo_admit():
    sc = default_scenario(scale=0.01)
    tokyo = next(p for p in sc.prefectures if p.name == "Tokyo")
    apps = [PreferenceList(1, (1, 2))]
    assignment = Assignment(
        placed={1: Placement(school_id=1, admission_round=1, preference_rank_obtained=1)},
        unassigned=frozenset(),
    )
    out = year_outcome(apps, assignment, sc.prefectures, sc.schools, {1: tokyo.id}, 1902, RegimeKind.CENTRALIZED)
    assert out.share_first_choice_school1 == 1.0
    assert out.mean_enrollment_distance_km == 0.0  # school 1 sits in Tokyo
    assert out.tokyo_area_entrant_share == 1.0
    assert out.entrants_total == 1


def test_year_outcome_no_applications():
    sc = default_scenario(scale=0.01)
    out = year_outcome([], Assignment({}, frozenset()), sc.prefectures, sc.schools, {}, 1900, RegimeKind.DECENTRALIZED)
    assert out.share_first_choice_school1 is None


@pytest.mark.filterwarnings("ignore:cutoff iteration")
def test_default_decentralized_distance_in_calibration_band():
    sc = default_scenario(year_start=1900, year_end=1900)
    res = simulate_seed(sc, BehaviorParams(), seed=0)
    out = res.outcomes[0]
    assert out.regime == RegimeKind.DECENTRALIZED
    assert 150.0 <= out.mean_enrollment_distance_km <= 250.0


def test_accounting_identity(small_run):
    sc, res = small_run
    rows = build_panel(res.records, sc.prefectures, sc.schools)
    for rec, out in zip(res.records, res.outcomes):
        total = sum(r.entrants for r in rows if r.school_id is None and r.year == rec.year)
        assert total == out.entrants_total
        # school panels add up to the all-school panel per prefecture
        for pid in range(0, 47, 7):
            all_count = next(
                r.entrants for r in rows if r.school_id is None and r.year == rec.year and r.prefecture_id == pid
            )
            school_sum = sum(
                r.entrants for r in rows if r.school_id is not None and r.year == rec.year and r.prefecture_id == pid
            )
            assert school_sum == all_count


def test_flag_geometry(small_run):
    sc, res = small_run
    rows = build_panel(res.records, sc.prefectures, sc.schools)
    tokyo = next(p for p in sc.prefectures if p.name == "Tokyo")
    host_of_1 = next(s for s in sc.schools if s.id == 1).prefecture_id
    assert host_of_1 == tokyo.id
    for r in rows:
        assert not (r.located_in and r.within_100km)  # bands are exclusive
        if r.school_id == 1:
            assert r.located_in == (r.prefecture_id == tokyo.id)
        if r.prefecture_id == tokyo.id:
            assert r.tokyo and not r.near_tokyo
        if r.tokyo or r.near_tokyo:
            assert sc.prefectures[r.prefecture_id].urban


def test_centralized_flag_follows_schedule(small_run):
    sc, res = small_run
    rows = build_panel(res.records, sc.prefectures, sc.schools)
    for r in rows:
        assert r.centralized == (r.year >= 1902)


def test_panel_row_count_is_47_by_31():
    sc = default_scenario(scale=0.01)
    records = []
    for regime in sc.schedule:
        records.append(
            YearRecord(
                year=regime.year,
                regime=regime.kind,
                assignment=Assignment({}, frozenset()),
                birth_prefecture={},
                applicants_by_prefecture={},
            )
        )
    rows = build_panel(records, sc.prefectures, sc.schools)
    all_rows = [r for r in rows if r.school_id is None]
    assert len(all_rows) == 1457  # 47 prefectures x 31 years
    assert len(rows) == 1457 * 9  # plus one panel per school


def test_build_panel_needs_both_regimes():
    sc = default_scenario(scale=0.01)
    rec = YearRecord(1900, RegimeKind.DECENTRALIZED, Assignment({}, frozenset()), {}, {})
    with pytest.raises(DomainError):
        build_panel([rec], sc.prefectures, sc.schools)
    with pytest.raises(DomainError):
        build_panel([rec, rec], sc.prefectures, sc.schools)  # duplicate years


def test_csv_roundtrip(tmp_path, small_run):
    sc, res = small_run
    rows = build_panel(res.records, sc.prefectures, sc.schools)
    panel_path = tmp_path / "panel_all.csv"
    seeded = [(0, r) for r in rows if r.school_id is None]
    write_panel_csv(panel_path, seeded)
    seeds, loaded = read_panel_csv(panel_path)
    assert seeds == [0] * len(loaded)
    assert loaded == [r for _, r in seeded]

    out_path = tmp_path / "year_outcomes.csv"
    write_year_outcomes_csv(out_path, [(0, o) for o in res.outcomes])
    loaded_out = read_year_outcomes_csv(out_path)
    assert [d["year"] for d in loaded_out] == [o.year for o in res.outcomes]
    assert loaded_out[0]["regime"] == res.outcomes[0].regime


def test_csv_headers_are_stable(tmp_path):
    write_year_outcomes_csv(tmp_path / "a.csv", [])
    write_panel_csv(tmp_path / "b.csv", [])
    assert (tmp_path / "a.csv").read_text().strip() == ",".join(YEAR_OUTCOME_COLUMNS)
    assert (tmp_path / "b.csv").read_text().strip() == ",".join(PANEL_COLUMNS)


def test_csv_uses_crlf_line_endings(tmp_path):
    path = tmp_path / "a.csv"
    write_year_outcomes_csv(path, [])
    assert path.read_bytes().endswith(b"\r\n")


def test_missing_distance_serialized_as_empty_field(tmp_path):
    sc = default_scenario(scale=0.01)
    out = year_outcome(
        [SingleApplication(1, 2)],
        Assignment({}, frozenset({1})),
        sc.prefectures,
        sc.schools,
        {1: 0},
        1900,
        RegimeKind.DECENTRALIZED,
    )
    path = tmp_path / "y.csv"
    write_year_outcomes_csv(path, [(0, out)])
    with open(path, newline="") as fh:
        rec = next(csv.DictReader(fh))
    assert rec["mean_enrollment_distance_km"] == ""
    assert read_year_outcomes_csv(path)[0]["mean_enrollment_distance_km"] is None


def test_reader_rejects_wrong_schema(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("a,b\n1,2\n")
    with pytest.raises(DomainError):
        read_panel_csv(path)
    with pytest.raises(DomainError):
        read_year_outcomes_csv(path)


def test_panel_to_columns_tokyo_area(small_run):
    sc, res = small_run
    rows = [r for r in build_panel(res.records, sc.prefectures, sc.schools) if r.school_id is None]
    cols = panel_to_columns(rows)
    assert np.array_equal(
        cols["tokyo_area"], np.maximum(cols["tokyo"], cols["near_tokyo"])
    )
    assert cols["entrants"].dtype == float
    urban_count = int(cols["tokyo_area"][: 47].sum())
    assert urban_count == 7
