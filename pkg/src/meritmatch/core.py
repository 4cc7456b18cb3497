"""Domain types, geography, deterministic randomness, and market validation.

Everything downstream (mechanisms, strategy, population generation, metrics)
works with the immutable types defined here. Geography is planar, in km:
only relative distances and the 100 km urban band matter, so a flat map is
both simpler and exactly testable.
"""

from __future__ import annotations

import csv
import hashlib
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

URBAN_RADIUS_KM = 100.0
_MASK64 = (1 << 64) - 1


class DomainError(ValueError):
    """Raised when an operation receives inputs outside its domain."""


@dataclass(frozen=True)
class Prefecture:
    id: int
    name: str
    coord: tuple[float, float]  # planar position, km
    urban: bool  # inside the 100 km Tokyo band
    pop_weight: float  # share of applicant mass
    edu_index: float  # middle-school-graduate density driver


@dataclass(frozen=True)
class School:
    id: int
    prefecture_id: int
    capacity: int
    prestige: float


@dataclass(frozen=True)
class Applicant:
    id: int
    birth_prefecture: int
    score: float
    utility: tuple[float, ...]  # cardinal value of each school, indexed by school id - 1
    outside_option: float


class RegimeKind(str, Enum):
    DECENTRALIZED = "decentralized"
    DECENTRALIZED_UNIFIED_EXAM = "decentralized_unified_exam"
    CENTRALIZED = "centralized"
    GROUPED_CENTRALIZED = "grouped_centralized"

    @property
    def is_centralized(self) -> bool:
        """True for the regimes that run the merit-capped centralized algorithm."""
        return self in (RegimeKind.CENTRALIZED, RegimeKind.GROUPED_CENTRALIZED)


@dataclass(frozen=True)
class Regime:
    kind: RegimeKind
    year: int
    # Only for GROUPED_CENTRALIZED: two groups of school ids; applicants may
    # rank at most one school per group.
    groups: tuple[frozenset[int], frozenset[int]] | None = None


@dataclass(frozen=True)
class Placement:
    school_id: int
    admission_round: int  # round in which the applicant was admitted, >= 1
    preference_rank_obtained: int  # position of the school on the submitted list, >= 1


@dataclass(frozen=True)
class Assignment:
    """Outcome of one mechanism run: placements plus the unassigned set."""

    placed: dict[int, Placement]
    unassigned: frozenset[int]

    def applicant_ids(self) -> frozenset[int]:
        return frozenset(self.placed) | self.unassigned


@dataclass(frozen=True)
class SeededRng:
    """Reproducible random source: identical (seed, stream_id) gives identical
    draw sequences across runs and platforms."""

    seed: int
    stream_id: int = 0

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence((self.seed & _MASK64, self.stream_id & _MASK64))
        return np.random.default_rng(ss)

    def substream(self, label: str, index: int = 0) -> "SeededRng":
        """Derive a named stream (stable across runs and platforms)."""
        key = f"{self.stream_id}/{label}/{index}".encode()
        sid = int.from_bytes(hashlib.sha256(key).digest()[:8], "big")
        return SeededRng(seed=self.seed, stream_id=sid)


def distance(a: Prefecture, b: Prefecture) -> float:
    """Euclidean distance in km between two prefectures' planar coordinates."""
    return math.hypot(a.coord[0] - b.coord[0], a.coord[1] - b.coord[1])


def prefecture_by_id(prefectures: Sequence[Prefecture], pref_id: int) -> Prefecture:
    for p in prefectures:
        if p.id == pref_id:
            return p
    raise DomainError(f"unknown prefecture id: {pref_id}")


def distance_by_id(prefectures: Sequence[Prefecture], a: int, b: int) -> float:
    return distance(prefecture_by_id(prefectures, a), prefecture_by_id(prefectures, b))


def distance_matrix(prefectures: Sequence[Prefecture]) -> np.ndarray:
    """Pairwise distance matrix indexed by prefecture id (ids must be 0..P-1)."""
    n = len(prefectures)
    coords = np.zeros((n, 2))
    for p in prefectures:
        if not 0 <= p.id < n:
            raise DomainError(f"prefecture ids must be 0..{n - 1}, got {p.id}")
        coords[p.id] = p.coord
    diff = coords[:, None, :] - coords[None, :, :]
    return np.sqrt((diff**2).sum(axis=2))


@dataclass(frozen=True)
class Violation:
    code: str
    message: str

    def __str__(self) -> str:
        return f"{self.code}: {self.message}"


def validate_market(
    prefectures: Sequence[Prefecture],
    schools: Sequence[School],
    applicants: Sequence[Applicant] = (),
) -> list[Violation]:
    """Check all type invariants; returns every violation found (empty = ok)."""
    out: list[Violation] = []

    ids = [p.id for p in prefectures]
    if sorted(ids) != list(range(len(prefectures))):
        out.append(Violation("prefecture_ids", "prefecture ids are not 0..P-1 without gaps"))
    total = sum(p.pop_weight for p in prefectures)
    if abs(total - 1.0) > 1e-9:
        out.append(Violation("weights_not_normalized", f"pop_weights sum to {total!r}, expected 1"))
    for p in prefectures:
        if p.pop_weight < 0:
            out.append(Violation("negative_weight", f"prefecture {p.id} has pop_weight {p.pop_weight}"))
        if p.edu_index < 0:
            out.append(Violation("negative_edu_index", f"prefecture {p.id} has edu_index {p.edu_index}"))
    seen_coords: dict[tuple[float, float], int] = {}
    for p in prefectures:
        if p.coord in seen_coords:
            out.append(Violation("duplicate_coord", f"prefectures {seen_coords[p.coord]} and {p.id} share a coordinate"))
        seen_coords[p.coord] = p.id

    tokyo = next((p for p in prefectures if p.name == "Tokyo"), None)
    if tokyo is None:
        out.append(Violation("no_tokyo", "no prefecture named Tokyo to anchor the urban band"))
    else:
        for p in prefectures:
            should = distance(p, tokyo) <= URBAN_RADIUS_KM
            if p.urban != should:
                out.append(Violation("urban_flag", f"prefecture {p.id} urban={p.urban} but distance rule says {should}"))

    school_ids = [s.id for s in schools]
    if len(set(school_ids)) != len(school_ids):
        out.append(Violation("duplicate_school_id", "school ids are not unique"))
    pref_id_set = {p.id for p in prefectures}
    for s in schools:
        if s.capacity <= 0:
            out.append(Violation("nonpositive_capacity", f"school {s.id} has capacity {s.capacity}"))
        if s.prefecture_id not in pref_id_set:
            out.append(Violation("unknown_prefecture", f"school {s.id} hosted by unknown prefecture {s.prefecture_id}"))
    prestiges = [s.prestige for s in schools]
    if len(set(prestiges)) != len(prestiges):
        out.append(Violation("prestige_ties", "school prestiges are not strictly ordered (ties present)"))

    n_schools = len(schools)
    seen_app_ids: set[int] = set()
    for a in applicants:
        if a.id in seen_app_ids:
            out.append(Violation("duplicate_applicant_id", f"applicant id {a.id} appears twice"))
        seen_app_ids.add(a.id)
        if a.birth_prefecture not in pref_id_set:
            out.append(Violation("unknown_prefecture", f"applicant {a.id} born in unknown prefecture {a.birth_prefecture}"))
        if len(a.utility) != n_schools:
            out.append(Violation("utility_length", f"applicant {a.id} has {len(a.utility)} utilities for {n_schools} schools"))
        if not all(math.isfinite(u) for u in a.utility):
            out.append(Violation("utility_not_finite", f"applicant {a.id} has non-finite utility"))
        if not math.isfinite(a.score):
            out.append(Violation("score_not_finite", f"applicant {a.id} has non-finite score"))
        if not math.isfinite(a.outside_option):
            out.append(Violation("outside_not_finite", f"applicant {a.id} has non-finite outside option"))
    return out


# ---------------------------------------------------------------------------
# Default geography: 47 prefectures on a planar km grid (equirectangular
# projection of capital-city positions, reference 36N/138E). Three borderline
# positions are nudged so that exactly 7 prefectures fall inside the 100 km
# Tokyo band with a comfortable margin. Population weights are rough
# turn-of-the-century relative sizes; edu_index peaks in Tokyo and the large
# urban centers.
# ---------------------------------------------------------------------------

# name, x_km, y_km, raw population weight, edu_index
_PREFECTURE_TABLE: list[tuple[str, float, float, float, float]] = [
    ("Hokkaido", 301.4, 786.4, 10.5, 0.30),
    ("Aomori", 246.8, 537.0, 6.1, 0.25),
    ("Iwate", 284.0, 412.3, 7.2, 0.25),
    ("Miyagi", 258.7, 252.6, 8.6, 0.45),
    ("Akita", 189.3, 414.0, 7.8, 0.25),
    ("Yamagata", 212.9, 249.4, 8.3, 0.28),
    ("Fukushima", 222.3, 194.8, 10.9, 0.30),
    ("Ibaraki", 216.6, 34.1, 11.2, 0.45),
    ("Tochigi", 168.8, 58.0, 8.4, 0.40),
    ("Gunma", 95.5, 43.5, 8.1, 0.40),
    ("Saitama", 148.5, -15.9, 12.0, 0.45),
    ("Chiba", 191.2, -44.0, 12.8, 0.45),
    ("Tokyo", 152.4, -34.6, 19.6, 1.00),
    ("Kanagawa", 147.9, -61.4, 9.3, 0.55),
    ("Niigata", 92.1, 211.7, 17.8, 0.35),
    ("Toyama", -71.1, 77.4, 7.7, 0.30),
    ("Ishikawa", -123.7, 66.1, 7.5, 0.40),
    ("Fukui", -160.1, 7.2, 6.2, 0.30),
    ("Yamanashi", 44.4, -37.6, 5.0, 0.28),
    ("Nagano", 16.3, 72.5, 13.0, 0.35),
    ("Gifu", -115.1, -67.8, 9.9, 0.32),
    ("Shizuoka", 34.5, -113.9, 12.2, 0.38),
    ("Aichi", -98.4, -91.3, 15.9, 0.50),
    ("Mie", -134.3, -141.4, 9.8, 0.32),
    ("Shiga", -191.9, -110.9, 6.8, 0.30),
    ("Kyoto", -202.1, -109.0, 9.5, 0.60),
    ("Osaka", -223.3, -146.3, 18.3, 0.55),
    ("Hyogo", -253.7, -145.7, 17.3, 0.45),
    ("Nara", -195.2, -146.4, 5.4, 0.28),
    ("Wakayama", -255.1, -197.5, 6.8, 0.28),
    ("Tottori", -338.8, -55.2, 4.1, 0.25),
    ("Shimane", -445.7, -58.8, 7.0, 0.25),
    ("Okayama", -366.1, -148.9, 11.2, 0.42),
    ("Hiroshima", -498.9, -178.6, 14.1, 0.40),
    ("Yamaguchi", -588.0, -201.9, 9.8, 0.35),
    ("Tokushima", -309.9, -215.3, 6.8, 0.28),
    ("Kagawa", -356.4, -184.8, 7.0, 0.30),
    ("Ehime", -471.4, -240.2, 9.9, 0.30),
    ("Kochi", -402.5, -271.6, 6.2, 0.28),
    ("Fukuoka", -682.8, -266.4, 13.7, 0.40),
    ("Saga", -693.5, -306.2, 6.2, 0.28),
    ("Nagasaki", -731.8, -362.3, 8.5, 0.32),
    ("Kumamoto", -653.7, -357.3, 11.8, 0.42),
    ("Oita", -575.2, -307.5, 8.3, 0.28),
    ("Miyazaki", -592.2, -455.2, 4.6, 0.25),
    ("Kagoshima", -670.2, -494.3, 11.0, 0.38),
    ("Okinawa", -929.3, -1089.6, 4.7, 0.20),
]

# The eight-school hierarchy: id, host prefecture name. School 1 (Tokyo) is
# the most selective, School 3 (Kyoto) second; 5 and 7 sit at the bottom.
_SCHOOL_HOSTS: list[tuple[int, str]] = [
    (1, "Tokyo"),
    (2, "Miyagi"),
    (3, "Kyoto"),
    (4, "Ishikawa"),
    (5, "Kumamoto"),
    (6, "Okayama"),
    (7, "Kagoshima"),
    (8, "Aichi"),
]

# Selectivity order used for the default prestige values (most selective first).
SELECTIVITY_ORDER: tuple[int, ...] = (1, 3, 4, 2, 8, 6, 5, 7)


def build_prefectures(rows: Iterable[tuple[str, float, float, float, float]]) -> list[Prefecture]:
    """Construct prefectures from (name, x_km, y_km, weight, edu_index) rows.

    Weights are normalized to sum to 1; the urban flag is derived from the
    100 km band around the row named Tokyo.
    """
    raw = list(rows)
    if not raw:
        raise DomainError("empty prefecture table")
    total = sum(r[3] for r in raw)
    if total <= 0:
        raise DomainError("prefecture weights must have a positive sum")
    tokyo_coord = next(((x, y) for name, x, y, _, _ in raw if name == "Tokyo"), None)
    if tokyo_coord is None:
        raise DomainError("prefecture table must contain a row named Tokyo")
    out = []
    for i, (name, x, y, w, edu) in enumerate(raw):
        d = math.hypot(x - tokyo_coord[0], y - tokyo_coord[1])
        out.append(
            Prefecture(
                id=i,
                name=name,
                coord=(x, y),
                urban=d <= URBAN_RADIUS_KM,
                pop_weight=w / total,
                edu_index=edu,
            )
        )
    return out


def default_prefectures() -> list[Prefecture]:
    return build_prefectures(_PREFECTURE_TABLE)


def default_schools(prefectures: Sequence[Prefecture], capacities: Sequence[int], prestige: Sequence[float]) -> list[School]:
    """The 8-school hierarchy placed on its host prefectures.

    `capacities` and `prestige` are indexed by school id - 1.
    """
    if len(capacities) != len(_SCHOOL_HOSTS) or len(prestige) != len(_SCHOOL_HOSTS):
        raise DomainError(f"expected {len(_SCHOOL_HOSTS)} capacities and prestige values")
    by_name = {p.name: p.id for p in prefectures}
    out = []
    for sid, host in _SCHOOL_HOSTS:
        if host not in by_name:
            raise DomainError(f"school host prefecture {host!r} not in geography")
        out.append(
            School(
                id=sid,
                prefecture_id=by_name[host],
                capacity=int(capacities[sid - 1]),
                prestige=float(prestige[sid - 1]),
            )
        )
    return out


GEOGRAPHY_COLUMNS = ["id", "name", "x_km", "y_km", "weight", "edu_index"]
SCHOOL_COLUMNS = ["id", "prefecture_id", "capacity", "prestige"]


def load_geography(path: str | Path) -> list[Prefecture]:
    """Load prefectures from a CSV with columns id,name,x_km,y_km,weight,edu_index.

    Rows must be sorted by id, 0..P-1. Weights are normalized on load; the
    urban flag is derived from the 100 km Tokyo band.
    """
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != GEOGRAPHY_COLUMNS:
            raise DomainError(f"geography file must have columns {GEOGRAPHY_COLUMNS}, got {reader.fieldnames}")
        for rec in reader:
            rows.append((rec["name"], float(rec["x_km"]), float(rec["y_km"]), float(rec["weight"]), float(rec["edu_index"])))
    return build_prefectures(rows)


def save_geography(prefectures: Sequence[Prefecture], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(GEOGRAPHY_COLUMNS)
        for p in prefectures:
            writer.writerow([p.id, p.name, p.coord[0], p.coord[1], p.pop_weight, p.edu_index])


def load_schools(path: str | Path) -> list[School]:
    """Load schools from a CSV with columns id,prefecture_id,capacity,prestige."""
    out = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != SCHOOL_COLUMNS:
            raise DomainError(f"school file must have columns {SCHOOL_COLUMNS}, got {reader.fieldnames}")
        for rec in reader:
            out.append(
                School(
                    id=int(rec["id"]),
                    prefecture_id=int(rec["prefecture_id"]),
                    capacity=int(rec["capacity"]),
                    prestige=float(rec["prestige"]),
                )
            )
    return out


def save_schools(schools: Sequence[School], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SCHOOL_COLUMNS)
        for s in schools:
            writer.writerow([s.id, s.prefecture_id, s.capacity, s.prestige])
