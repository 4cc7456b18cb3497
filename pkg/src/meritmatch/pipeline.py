"""End-to-end scenario runner: simulate years under the regime schedule,
compute metrics, run the regression battery, and emit CSV artifacts.

All randomness flows from one root seed through named streams (popgen/year,
strategy/year, lottery/year), so re-running any stage from the same manifest
reproduces artifacts byte for byte. The resolved configuration, including the
full geography and school tables, is written to manifest.lock; a lockfile is
itself a valid --config input and replays the run exactly.
"""

from __future__ import annotations

import concurrent.futures
import csv
import hashlib
import json
import os
from dataclasses import asdict, dataclass, replace
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from . import __version__
from .core import (
    DomainError,
    Prefecture,
    Regime,
    RegimeKind,
    School,
    SeededRng,
    build_prefectures,
    default_prefectures,
    load_geography,
    load_schools,
    validate_market,
)
from .econometrics import (
    RegressionResult,
    RegressionSpec,
    did_centralization,
    fe_ols,
    newey_west_ols,
    with_interaction,
)
from .mechanisms import (
    run_decentralized,
    run_grouped_centralized,
    run_meritocratic_boston,
)
from .metrics import (
    PanelRow,
    YearOutcome,
    YearRecord,
    build_panel,
    panel_to_columns,
    read_panel_csv,
    read_year_outcomes_csv,
    write_panel_csv,
    write_year_outcomes_csv,
    year_outcome,
)
from .popgen import (
    DEFAULT_GROUPS,
    PopulationConfig,
    Scenario,
    default_schools,
    generate_applicants,
    regime_schedule,
)
from .strategy import BehaviorParams, equilibrium_cutoffs, single_applications, submit_applications


class ConfigError(ValueError):
    """Bad or inconsistent run configuration."""


STAGES = ("simulate", "metrics", "estimate")
SCHOOL_IDS = tuple(range(1, 9))

REGRESSION_COLUMNS = [
    "spec_id",
    "seed",
    "coefficient",
    "estimate",
    "std_error",
    "t_stat",
    "p_value",
    "n_obs",
    "n_clusters",
]


@dataclass(frozen=True)
class RunManifest:
    config_path: str | None = None
    seed: int = 0
    seeds: int = 1
    out_dir: str = "out"
    stages: tuple[str, ...] = STAGES
    jobs: int = 1
    format: str = "csv"

    def __post_init__(self) -> None:
        if self.seeds < 1:
            raise ConfigError("seeds count must be >= 1")
        if not self.stages:
            raise ConfigError("stages must be nonempty")
        for s in self.stages:
            if s not in STAGES:
                raise ConfigError(f"unknown stage {s!r}; valid stages are {', '.join(STAGES)}")
        if self.format != "csv":
            raise ConfigError(f"unsupported format {self.format!r}")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")


@dataclass(frozen=True)
class ResolvedConfig:
    scenario: Scenario
    behavior: BehaviorParams
    groups: tuple[frozenset[int], frozenset[int]]

    def as_dict(self) -> dict:
        prefs = [
            [p.name, p.coord[0], p.coord[1], p.pop_weight, p.edu_index]
            for p in self.scenario.prefectures
        ]
        schools = [
            [s.id, s.prefecture_id, s.capacity, s.prestige] for s in self.scenario.schools
        ]
        return {
            "population": asdict(self.scenario.population),
            "behavior": asdict(self.behavior),
            "groups": [sorted(self.groups[0]), sorted(self.groups[1])],
            "geography": prefs,
            "schools": schools,
        }


_CONFIG_KEYS = {"scale", "population", "behavior", "capacities", "groups", "geography", "schools"}


def _check_keys(mapping: Mapping, allowed, where: str) -> None:
    unknown = sorted(set(mapping) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(map(str, unknown))}")


def _population_from(mapping: Mapping, where: str) -> PopulationConfig:
    fields = {f.name for f in PopulationConfig.__dataclass_fields__.values()}
    _check_keys(mapping, fields, where)
    try:
        cfg = dict(mapping)
        if "prestige" in cfg:
            cfg["prestige"] = tuple(float(v) for v in cfg["prestige"])
        return PopulationConfig(**cfg)
    except (TypeError, DomainError) as exc:
        raise ConfigError(f"bad {where}: {exc}") from exc


def _behavior_from(mapping: Mapping, where: str) -> BehaviorParams:
    fields = {f.name for f in BehaviorParams.__dataclass_fields__.values()}
    _check_keys(mapping, fields, where)
    try:
        return BehaviorParams(**mapping)
    except (TypeError, DomainError) as exc:
        raise ConfigError(f"bad {where}: {exc}") from exc


def resolve_config(config_path: str | Path | None) -> ResolvedConfig:
    """Build the fully-resolved scenario from a config file (or defaults).

    The file is JSON; a manifest.lock file (marked "locked": true) is also
    accepted and replayed verbatim. Unknown keys are hard errors.
    """
    if config_path is None:
        return _resolve_dict({})
    path = Path(config_path)
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"config {path} must contain a JSON object")
    if raw.get("locked"):
        return _resolve_locked(raw, path)
    return _resolve_dict(raw, base_dir=path.parent)


def _resolve_dict(raw: Mapping, base_dir: Path | None = None) -> ResolvedConfig:
    _check_keys(raw, _CONFIG_KEYS, "config")
    scale = float(raw.get("scale", 1.0))
    if scale <= 0:
        raise ConfigError("scale must be positive")

    pop_overrides = dict(raw.get("population", {}))
    if "applicants_per_year" not in pop_overrides:
        pop_overrides["applicants_per_year"] = max(1, int(round(10777 * scale)))
    population = _population_from(pop_overrides, "population")
    behavior = _behavior_from(raw.get("behavior", {}), "behavior")

    if "geography" in raw:
        geo_path = Path(raw["geography"])
        if base_dir is not None and not geo_path.is_absolute():
            geo_path = base_dir / geo_path
        prefectures = load_geography(geo_path)
    else:
        prefectures = default_prefectures()

    groups_raw = raw.get("groups", [sorted(DEFAULT_GROUPS[0]), sorted(DEFAULT_GROUPS[1])])
    if len(groups_raw) != 2:
        raise ConfigError("groups must be a pair of school-id lists")
    groups = (frozenset(int(s) for s in groups_raw[0]), frozenset(int(s) for s in groups_raw[1]))

    if "schools" in raw:
        school_path = Path(raw["schools"])
        if base_dir is not None and not school_path.is_absolute():
            school_path = base_dir / school_path
        schools = load_schools(school_path)
        population = replace(population, prestige=tuple(s.prestige for s in sorted(schools, key=lambda s: s.id)))
    else:
        if "capacities" in raw:
            capacities = [int(c) for c in raw["capacities"]]
        else:
            capacities = [max(1, int(round(251 * scale)))] * 8
        schools = default_schools(prefectures, capacities, population.prestige)

    scenario = Scenario(
        prefectures=tuple(prefectures),
        schools=tuple(schools),
        population=population,
        schedule=tuple(_schedule_with_groups(population, groups)),
    )
    _validate_resolved(scenario)
    return ResolvedConfig(scenario=scenario, behavior=behavior, groups=groups)


def _schedule_with_groups(population: PopulationConfig, groups) -> list[Regime]:
    out = []
    for r in regime_schedule(population.year_start, population.year_end):
        if r.kind == RegimeKind.GROUPED_CENTRALIZED:
            out.append(Regime(kind=r.kind, year=r.year, groups=groups))
        else:
            out.append(r)
    return out


def _resolve_locked(raw: Mapping, path: Path) -> ResolvedConfig:
    _check_keys(raw, {"locked", "version", "version_hash", "seed", "seeds", "stages", "format", "config"}, "lockfile")
    cfg = raw.get("config", {})
    _check_keys(cfg, {"population", "behavior", "groups", "geography", "schools"}, "lockfile config")
    try:
        prefectures = build_prefectures([tuple(row) for row in cfg["geography"]])
        population = _population_from(cfg["population"], "lockfile population")
        behavior = _behavior_from(cfg["behavior"], "lockfile behavior")
        groups = (frozenset(int(s) for s in cfg["groups"][0]), frozenset(int(s) for s in cfg["groups"][1]))
        schools = [
            School(id=int(r[0]), prefecture_id=int(r[1]), capacity=int(r[2]), prestige=float(r[3]))
            for r in cfg["schools"]
        ]
    except (KeyError, IndexError, TypeError, ValueError) as exc:
        raise ConfigError(f"malformed lockfile {path}: {exc}") from exc
    scenario = Scenario(
        prefectures=tuple(prefectures),
        schools=tuple(schools),
        population=population,
        schedule=tuple(_schedule_with_groups(population, groups)),
    )
    _validate_resolved(scenario)
    return ResolvedConfig(scenario=scenario, behavior=behavior, groups=groups)


class InvariantError(RuntimeError):
    """A market invariant failed validation."""


def _validate_resolved(scenario: Scenario) -> None:
    violations = validate_market(scenario.prefectures, scenario.schools)
    if violations:
        raise InvariantError("; ".join(str(v) for v in violations))


# -- simulation ----------------------------------------------------------------


@dataclass(frozen=True)
class SeedResult:
    seed: int
    outcomes: tuple[YearOutcome, ...]
    records: tuple[YearRecord, ...]
    equilibrium_log: tuple[tuple[int, int, float], ...]  # (year, iterations, residual)


def simulate_seed(scenario: Scenario, behavior: BehaviorParams, seed: int) -> SeedResult:
    """Simulate every year of the schedule for one seed.

    Decentralized years warm-start their cutoff iteration from the previous
    decentralized equilibrium, which is deterministic and much faster than a
    cold start (cohorts are statistically identical across years).
    """
    root = SeededRng(seed)
    prefectures = scenario.prefectures
    schools = scenario.schools
    outcomes: list[YearOutcome] = []
    records: list[YearRecord] = []
    eq_log: list[tuple[int, int, float]] = []
    beliefs = None

    for regime in scenario.schedule:
        year = regime.year
        applicants = generate_applicants(scenario.population, prefectures, schools, year, root)
        lottery_rng = root.substream("lottery", year)
        if regime.kind.is_centralized:
            apps = submit_applications(schools, applicants, regime, behavior)
            if regime.kind == RegimeKind.GROUPED_CENTRALIZED:
                assignment = run_grouped_centralized(schools, applicants, apps, regime.groups, lottery_rng)
            else:
                assignment = run_meritocratic_boston(schools, applicants, apps, lottery_rng)
        else:
            beliefs, iters, resid = equilibrium_cutoffs(
                schools, applicants, behavior, root.substream("strategy", year), initial=beliefs
            )
            eq_log.append((year, iters, resid))
            apps = single_applications(schools, applicants, beliefs, behavior)
            assignment = run_decentralized(schools, applicants, apps, lottery_rng)

        birth = {a.id: a.birth_prefecture for a in applicants}
        outcomes.append(
            year_outcome(apps, assignment, prefectures, schools, birth, year, regime.kind)
        )
        by_pref: dict[int, int] = {p.id: 0 for p in prefectures}
        for a in applicants:
            by_pref[a.birth_prefecture] += 1
        records.append(
            YearRecord(
                year=year,
                regime=regime.kind,
                assignment=assignment,
                birth_prefecture=birth,
                applicants_by_prefecture=by_pref,
            )
        )
    return SeedResult(
        seed=seed,
        outcomes=tuple(outcomes),
        records=tuple(records),
        equilibrium_log=tuple(eq_log),
    )


# -- regressions ---------------------------------------------------------------


@dataclass(frozen=True)
class RegressionRow:
    spec_id: str
    seed: int | str
    coefficient: str
    estimate: float
    std_error: float | None
    t_stat: float | None
    p_value: float | None
    n_obs: int
    n_clusters: int | None


def _row_from_result(spec_id: str, seed: int, res: RegressionResult, coefficient: str) -> RegressionRow:
    return RegressionRow(
        spec_id=spec_id,
        seed=seed,
        coefficient=coefficient,
        estimate=res.coef(coefficient),
        std_error=res.se_of(coefficient),
        t_stat=float(res.t_stats[res.names.index(coefficient)]),
        p_value=res.p_of(coefficient),
        n_obs=res.n_obs,
        n_clusters=res.n_clusters,
    )


def local_monopoly_regression(school_rows: Sequence[PanelRow]) -> RegressionResult:
    """Per-school spec: entrants on centralized x located-in and
    centralized x within-100km with the graduate-pool control, two-way fixed
    effects, clustered by prefecture."""
    cols = panel_to_columns(school_rows)
    cols = with_interaction(cols, "centralized", "located_in")
    cols = with_interaction(cols, "centralized", "within_100km")
    spec = RegressionSpec(
        outcome="entrants",
        regressors=("centralized_x_located_in", "centralized_x_within_100km", "middle_school_grads"),
        unit="prefecture_id",
        time="year",
        cluster="prefecture_id",
        covariance="cluster",
    )
    return fe_ols(cols, spec)


def tokyo_gradient_regression(all_rows: Sequence[PanelRow]) -> RegressionResult:
    """All-schools spec: entrants on centralized x Tokyo and
    centralized x near-Tokyo, controlling for the school-location bands and
    the graduate pool."""
    cols = panel_to_columns(all_rows)
    for b in ("tokyo", "near_tokyo", "located_in", "within_100km"):
        cols = with_interaction(cols, "centralized", b)
    spec = RegressionSpec(
        outcome="entrants",
        regressors=(
            "centralized_x_tokyo",
            "centralized_x_near_tokyo",
            "centralized_x_located_in",
            "centralized_x_within_100km",
            "middle_school_grads",
        ),
        unit="prefecture_id",
        time="year",
        cluster="prefecture_id",
        covariance="cluster",
    )
    return fe_ols(cols, spec)


TREND_METRICS = (
    "share_first_choice_school1",
    "mean_enrollment_distance_km",
    "tokyo_area_entrant_share",
)


def _outcome_series(outcome_dicts: Sequence[Mapping]) -> dict[str, np.ndarray]:
    """Average outcome rows by year across seeds into one time series."""
    years = sorted({d["year"] for d in outcome_dicts})
    series: dict[str, list] = {m: [] for m in TREND_METRICS}
    centralized = []
    for y in years:
        rows = [d for d in outcome_dicts if d["year"] == y]
        centralized.append(float(rows[0]["regime"].is_centralized))
        for m in TREND_METRICS:
            vals = [r[m] for r in rows if r[m] is not None]
            series[m].append(float(np.mean(vals)) if vals else np.nan)
    y0 = years[0]
    table = {
        "year": np.array(years, dtype=float),
        "centralized": np.array(centralized),
        "trend": np.array([y - (y0 - 1) for y in years], dtype=float),
    }
    table["trend_sq"] = table["trend"] ** 2
    for m in TREND_METRICS:
        table[m] = np.array(series[m])
    return table


def trend_regression(table: Mapping[str, np.ndarray], metric: str, nw_lags: int = 3) -> RegressionResult:
    """Regime coefficient for one outcome series with quadratic trend controls
    and Newey-West inference. Years with a missing metric are dropped."""
    keep = np.isfinite(np.asarray(table[metric], dtype=float))
    filtered = {k: np.asarray(v)[keep] for k, v in table.items()}
    spec = RegressionSpec(
        outcome=metric,
        regressors=("centralized", "trend", "trend_sq"),
        time="year",
        covariance="newey-west",
        nw_lags=nw_lags,
    )
    # spec.time is used only to sort rows for the HAC weights
    return newey_west_ols(filtered, spec)


@dataclass(frozen=True)
class DiffRegimeRow:
    metric: str
    mean_centralized: float
    mean_decentralized: float
    difference: float
    trend_coefficient: float
    trend_p_value: float


def diff_regimes(outcome_dicts: Sequence[Mapping]) -> list[DiffRegimeRow]:
    """Per-metric regime means, difference, and the quadratic-trend-controlled
    regime coefficient (Newey-West, lag 3). Multi-seed series are averaged
    within year first."""
    kinds = {d["regime"] for d in outcome_dicts}
    if not any(k.is_centralized for k in kinds):
        raise DomainError("no centralized years in the outcome series")
    if not any(not k.is_centralized for k in kinds):
        raise DomainError("no decentralized years in the outcome series")
    table = _outcome_series(outcome_dicts)
    cen = table["centralized"] == 1.0
    out = []
    for m in TREND_METRICS:
        vals = table[m]
        res = trend_regression(table, m)
        out.append(
            DiffRegimeRow(
                metric=m,
                mean_centralized=float(np.nanmean(vals[cen])),
                mean_decentralized=float(np.nanmean(vals[~cen])),
                difference=float(np.nanmean(vals[cen]) - np.nanmean(vals[~cen])),
                trend_coefficient=res.coef("centralized"),
                trend_p_value=res.p_of("centralized"),
            )
        )
    return out


def seed_regressions(
    panel_rows: Sequence[PanelRow],
    outcome_dicts: Sequence[Mapping],
    seed: int,
) -> list[RegressionRow]:
    """The regression battery for one seed's panels and outcome series."""
    rows: list[RegressionRow] = []
    all_rows = [r for r in panel_rows if r.school_id is None]
    res = did_centralization(panel_to_columns(all_rows))
    rows.append(_row_from_result("did_tokyo_area", seed, res, "centralized_x_tokyo_area"))
    res = tokyo_gradient_regression(all_rows)
    rows.append(_row_from_result("tokyo_gradient", seed, res, "centralized_x_tokyo"))
    for s in sorted({r.school_id for r in panel_rows if r.school_id is not None}):
        school_rows = [r for r in panel_rows if r.school_id == s]
        res = local_monopoly_regression(school_rows)
        rows.append(_row_from_result(f"local_monopoly_s{s}", seed, res, "centralized_x_located_in"))
    table = _outcome_series(outcome_dicts)
    for m in TREND_METRICS:
        res = trend_regression(table, m)
        rows.append(
            RegressionRow(
                spec_id=f"trend_{m}",
                seed=seed,
                coefficient="centralized",
                estimate=res.coef("centralized"),
                std_error=res.se_of("centralized"),
                t_stat=float(res.t_stats[res.names.index("centralized")]),
                p_value=res.p_of("centralized"),
                n_obs=res.n_obs,
                n_clusters=None,
            )
        )
    return rows


def pooled_rows(per_seed: Sequence[RegressionRow]) -> list[RegressionRow]:
    """Cross-seed mean per spec; the pooled std error is the standard error
    of the mean estimate across seeds (empty with a single seed)."""
    by_spec: dict[tuple[str, str], list[RegressionRow]] = {}
    for row in per_seed:
        by_spec.setdefault((row.spec_id, row.coefficient), []).append(row)
    out = []
    for (spec_id, coefficient), rows in sorted(by_spec.items()):
        est = np.array([r.estimate for r in rows])
        se = float(est.std(ddof=1) / np.sqrt(len(est))) if len(est) > 1 else None
        out.append(
            RegressionRow(
                spec_id=spec_id,
                seed="pooled",
                coefficient=coefficient,
                estimate=float(est.mean()),
                std_error=se,
                t_stat=None,
                p_value=None,
                n_obs=int(sum(r.n_obs for r in rows)),
                n_clusters=None,
            )
        )
    return out


# -- artifact writing ----------------------------------------------------------


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(float(value))
    return str(value)


def write_regressions_csv(path: str | Path, rows: Sequence[RegressionRow]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(REGRESSION_COLUMNS)
        for r in rows:
            writer.writerow(
                [
                    r.spec_id,
                    r.seed,
                    r.coefficient,
                    _fmt(r.estimate),
                    _fmt(r.std_error),
                    _fmt(r.t_stat),
                    _fmt(r.p_value),
                    r.n_obs,
                    _fmt(r.n_clusters),
                ]
            )


def _lock_payload(manifest: RunManifest, resolved: ResolvedConfig) -> dict:
    config = resolved.as_dict()
    digest = hashlib.sha256(
        (json.dumps(config, sort_keys=True) + __version__).encode()
    ).hexdigest()[:16]
    return {
        "locked": True,
        "version": __version__,
        "version_hash": digest,
        "seed": manifest.seed,
        "seeds": manifest.seeds,
        "stages": list(manifest.stages),
        "format": manifest.format,
        "config": config,
    }


ARTIFACTS_BY_STAGE = {
    "simulate": ["year_outcomes.csv", "manifest.lock"],
    "metrics": ["panel_all.csv"] + [f"panel_school_{s}.csv" for s in SCHOOL_IDS],
    "estimate": ["regressions.csv"],
}


def run(manifest: RunManifest) -> dict[str, Path]:
    """Execute the manifest; returns artifact name -> path.

    Stage dependencies: metrics needs simulate in the same invocation;
    estimate can run alone only when the metrics CSVs are already on disk.
    Partially written files are removed on failure.
    """
    stages = set(manifest.stages)
    if "metrics" in stages and "simulate" not in stages:
        raise ConfigError("the metrics stage needs simulate in the same run (assignments are not persisted)")
    resolved = resolve_config(manifest.config_path)
    out_dir = Path(manifest.out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out_dir}: {exc}") from exc

    if "estimate" in stages and "metrics" not in stages:
        if "simulate" in stages:
            raise ConfigError("estimate needs the metrics stage when simulate runs in the same invocation")
        needed = [out_dir / f for f in ARTIFACTS_BY_STAGE["metrics"]] + [out_dir / "year_outcomes.csv"]
        missing = [str(f) for f in needed if not f.exists()]
        if missing:
            raise ConfigError(f"estimate without metrics requires existing inputs; missing: {', '.join(missing)}")

    seeds = list(range(manifest.seed, manifest.seed + manifest.seeds))
    written: list[Path] = []
    artifacts: dict[str, Path] = {}

    def _emit(name: str, writer_fn) -> None:
        path = out_dir / name
        tmp = out_dir / (name + ".tmp")
        writer_fn(tmp)
        os.replace(tmp, path)
        written.append(path)
        artifacts[name] = path

    try:
        need_sim = "simulate" in stages
        results: list[SeedResult] = []
        if need_sim:
            if manifest.jobs > 1 and len(seeds) > 1:
                with concurrent.futures.ProcessPoolExecutor(max_workers=manifest.jobs) as pool:
                    futures = {
                        s: pool.submit(simulate_seed, resolved.scenario, resolved.behavior, s)
                        for s in seeds
                    }
                    results = [futures[s].result() for s in seeds]
            else:
                results = [simulate_seed(resolved.scenario, resolved.behavior, s) for s in seeds]

            outcome_rows = [(r.seed, out) for r in results for out in r.outcomes]
            _emit("year_outcomes.csv", lambda p: write_year_outcomes_csv(p, outcome_rows))
            lock = _lock_payload(manifest, resolved)
            _emit("manifest.lock", lambda p: Path(p).write_text(json.dumps(lock, indent=2, sort_keys=True) + "\n"))

        panel_by_seed: dict[int, list[PanelRow]] = {}
        if "metrics" in stages:
            for r in results:
                panel_by_seed[r.seed] = build_panel(r.records, resolved.scenario.prefectures, resolved.scenario.schools)
            all_rows = [(s, row) for s in seeds for row in panel_by_seed[s] if row.school_id is None]
            _emit("panel_all.csv", lambda p: write_panel_csv(p, all_rows))
            for sid in SCHOOL_IDS:
                school_rows = [(s, row) for s in seeds for row in panel_by_seed[s] if row.school_id == sid]
                _emit(f"panel_school_{sid}.csv", lambda p, rows=school_rows: write_panel_csv(p, rows))

        if "estimate" in stages:
            if "metrics" in stages:
                outcome_dicts_by_seed = {
                    r.seed: [_outcome_as_dict(r.seed, o) for o in r.outcomes] for r in results
                }
            else:
                panel_by_seed = _read_panels_from_disk(out_dir)
                outcome_dicts = read_year_outcomes_csv(out_dir / "year_outcomes.csv")
                outcome_dicts_by_seed = {}
                for d in outcome_dicts:
                    outcome_dicts_by_seed.setdefault(d["seed"], []).append(d)
                seeds = sorted(panel_by_seed)
            reg_rows: list[RegressionRow] = []
            for s in seeds:
                reg_rows.extend(
                    seed_regressions(panel_by_seed[s], outcome_dicts_by_seed[s], s)
                )
            reg_rows.extend(pooled_rows([r for r in reg_rows if r.seed != "pooled"]))
            _emit("regressions.csv", lambda p: write_regressions_csv(p, reg_rows))
    except Exception:
        for path in written:
            try:
                path.unlink()
            except OSError:
                pass
        for tmp in out_dir.glob("*.tmp"):
            try:
                tmp.unlink()
            except OSError:
                pass
        raise
    return artifacts


def _outcome_as_dict(seed: int, out: YearOutcome) -> dict:
    return {
        "seed": seed,
        "year": out.year,
        "regime": out.regime,
        "share_first_choice_school1": out.share_first_choice_school1,
        "mean_enrollment_distance_km": out.mean_enrollment_distance_km,
        "tokyo_area_entrant_share": out.tokyo_area_entrant_share,
        "entrants_total": out.entrants_total,
        "unassigned_total": out.unassigned_total,
    }


def _read_panels_from_disk(out_dir: Path) -> dict[int, list[PanelRow]]:
    panel_by_seed: dict[int, list[PanelRow]] = {}
    seeds, rows = read_panel_csv(out_dir / "panel_all.csv")
    for s, row in zip(seeds, rows):
        panel_by_seed.setdefault(s, []).append(row)
    for sid in SCHOOL_IDS:
        path = out_dir / f"panel_school_{sid}.csv"
        seeds, rows = read_panel_csv(path)
        for s, row in zip(seeds, rows):
            panel_by_seed.setdefault(s, []).append(row)
    return panel_by_seed
