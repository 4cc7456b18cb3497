"""Application behavior: truthful rankings for the centralized regimes and a
self-selection equilibrium for the decentralized single-application regime.

The decentralized model is a rational-expectations fixed point: applicants
hold beliefs about each school's admission cutoff, smooth the acceptance
event with a normal CDF over their own score uncertainty, and apply to the
school maximizing admission probability times surplus. Realized cutoffs feed
back into beliefs with damping until they settle. This model is a
construction of this package, calibrated only to reproduce qualitative
regime differences; treat its parameters as simulation knobs, not estimates.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import ndtr

from .core import Applicant, DomainError, Regime, RegimeKind, School, SeededRng
from .mechanisms import PreferenceList, SingleApplication, _admit_top_per_school


@dataclass(frozen=True)
class BehaviorParams:
    """Knobs of the self-selection model.

    The default tolerance is coarse on purpose: realized marginal admitted
    scores move in discrete jumps when single applicants switch schools, so
    the damped iteration settles into a small limit cycle whose amplitude is
    roughly damping times the score spacing at the margin, around 1e-1 at
    desk scale. Cutoff wiggle of that size shifts admission probabilities by
    well under one percent; tighter tolerances are reachable on small or
    lucky instances but not generically.
    """

    score_noise_sd: float = 14.0  # applicant's uncertainty about own standing
    max_iter: int = 100
    tol: float = 0.25
    damping: float = 0.5  # fraction of the realized cutoff mixed in per iteration

    def __post_init__(self) -> None:
        if self.score_noise_sd < 0:
            raise DomainError("score_noise_sd must be >= 0")
        if self.tol <= 0:
            raise DomainError("tol must be > 0")
        if self.max_iter < 1:
            raise DomainError("max_iter must be >= 1")
        if not 0 < self.damping <= 1:
            raise DomainError("damping must be in (0, 1]")


@dataclass(frozen=True)
class CutoffBeliefs:
    """Anticipated admission cutoff per school (-inf for undersubscribed)."""

    school_ids: tuple[int, ...]
    cutoffs: tuple[float, ...]

    def cutoff(self, school_id: int) -> float:
        try:
            return self.cutoffs[self.school_ids.index(school_id)]
        except ValueError:
            raise DomainError(f"no belief for school {school_id}") from None


def truthful_ranking(applicant: Applicant) -> PreferenceList:
    """Schools strictly better than the outside option, best first; equal
    utilities break toward the lower school id."""
    entries = [
        (u, sid)
        for sid, u in enumerate(applicant.utility, start=1)
        if u > applicant.outside_option
    ]
    entries.sort(key=lambda e: (-e[0], e[1]))
    return PreferenceList(applicant_id=applicant.id, ranked=tuple(sid for _, sid in entries))


def admit_probability(score: float, cutoff: float, sigma: float) -> float:
    """Probability of clearing `cutoff` given score uncertainty `sigma`.

    sigma=0 degenerates to the step function, with 1/2 exactly at the cutoff.
    """
    if sigma < 0:
        raise DomainError("sigma must be >= 0")
    if cutoff == float("-inf"):
        return 1.0
    if sigma == 0:
        if score > cutoff:
            return 1.0
        return 0.5 if score == cutoff else 0.0
    return float(ndtr((score - cutoff) / sigma))


def _best_single_choices(
    scores: np.ndarray,
    utilities: np.ndarray,
    outside: np.ndarray,
    cutoffs: np.ndarray,
    sigma: float,
) -> np.ndarray:
    """Vectorized best single application: 0-based school index, -1 = abstain."""
    if sigma == 0:
        diff = scores[:, None] - cutoffs[None, :]
        prob = np.where(diff > 0, 1.0, np.where(diff == 0, 0.5, 0.0))
        prob = np.where(np.isinf(cutoffs)[None, :] & (cutoffs < 0)[None, :], 1.0, prob)
    else:
        prob = ndtr((scores[:, None] - cutoffs[None, :]) / sigma)
    surplus = utilities - outside[:, None]
    ev = np.where(surplus > 0, prob * surplus, -np.inf)
    best = np.argmax(ev, axis=1)  # first max -> lowest school index
    best[~np.isfinite(ev[np.arange(len(best)), best])] = -1
    return best


def choose_single_application(
    applicant: Applicant,
    beliefs: CutoffBeliefs,
    params: BehaviorParams,
) -> SingleApplication | None:
    """Apply to the school maximizing admission probability times surplus,
    among schools better than the outside option; None means abstain."""
    utilities = np.array([applicant.utility])
    cutoffs = np.array(beliefs.cutoffs)
    choice = _best_single_choices(
        np.array([applicant.score]),
        utilities,
        np.array([applicant.outside_option]),
        cutoffs,
        params.score_noise_sd,
    )[0]
    if choice < 0:
        return None
    return SingleApplication(applicant_id=applicant.id, school_id=beliefs.school_ids[choice])


def _applicant_arrays(applicants: Sequence[Applicant]) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    ids = np.array(sorted(a.id for a in applicants), dtype=np.int64)
    by_id = {a.id: a for a in applicants}
    scores = np.array([by_id[i].score for i in ids])
    utilities = np.array([by_id[i].utility for i in ids])
    outside = np.array([by_id[i].outside_option for i in ids])
    return ids, scores, utilities, outside


def _belief_floor(scores: np.ndarray, sigma: float) -> float:
    """A cutoff level behaviorally equivalent to "no cutoff": every applicant
    clears it with probability ~1 even under score uncertainty."""
    return float(scores.min()) - 6.0 * max(sigma, 1.0) - 1.0


def equilibrium_cutoffs(
    schools: Sequence[School],
    applicants: Sequence[Applicant],
    params: BehaviorParams,
    rng: SeededRng | None = None,
    initial: CutoffBeliefs | None = None,
) -> tuple[CutoffBeliefs, int, float]:
    """Rational-expectations cutoffs for the single-application regime.

    Iterates best responses against beliefs, admits top-capacity applicants
    per school, and moves beliefs toward realized marginal admitted scores
    with damping. Undersubscribed schools are held at a finite floor during
    the iteration (so damping stays well defined) and reported as -inf in
    the returned beliefs. Returns (beliefs, iterations used, final
    residual); non-convergence is flagged by residual >= tol, not raised.
    """
    schools_sorted = sorted(schools, key=lambda s: s.id)
    school_ids = tuple(s.id for s in schools_sorted)
    caps = np.array([s.capacity for s in schools_sorted], dtype=np.int64)
    if not applicants:
        beliefs = CutoffBeliefs(school_ids=school_ids, cutoffs=tuple([-math.inf] * len(school_ids)))
        return beliefs, 1, 0.0
    ids, scores, utilities, outside = _applicant_arrays(applicants)
    if utilities.shape[1] != len(school_ids):
        raise DomainError("applicant utility vectors do not match the school count")
    ties = rng.generator().random(len(ids)) if rng is not None else np.zeros(len(ids))

    floor = _belief_floor(scores, params.score_noise_sd)
    if initial is not None:
        cutoffs = np.array([max(c, floor) if math.isfinite(c) else floor for c in initial.cutoffs])
    else:
        cutoffs = np.full(len(school_ids), floor)
    undersubscribed = np.ones(len(school_ids), dtype=bool)
    iterations = 0
    residual = math.inf
    for iterations in range(1, params.max_iter + 1):
        choice = _best_single_choices(scores, utilities, outside, cutoffs, params.score_noise_sd)
        _, realized = _admit_top_per_school(choice, scores, ties, caps)
        undersubscribed = np.isneginf(realized)
        target = np.where(undersubscribed, floor, realized)
        new = (1 - params.damping) * cutoffs + params.damping * target
        residual = float(np.max(np.abs(new - cutoffs)))
        cutoffs = new
        if residual < params.tol:
            break
    if residual >= params.tol:
        warnings.warn(
            f"cutoff iteration did not converge in {params.max_iter} iterations (residual {residual:.3g})",
            RuntimeWarning,
            stacklevel=2,
        )
    reported = np.where(undersubscribed, -np.inf, cutoffs)
    beliefs = CutoffBeliefs(school_ids=school_ids, cutoffs=tuple(float(c) for c in reported))
    return beliefs, iterations, residual


def single_applications(
    schools: Sequence[School],
    applicants: Sequence[Applicant],
    beliefs: CutoffBeliefs,
    params: BehaviorParams,
) -> list[SingleApplication]:
    """Best-response single applications against given cutoff beliefs."""
    if not applicants:
        return []
    ids, scores, utilities, outside = _applicant_arrays(applicants)
    cutoffs = np.array(beliefs.cutoffs)
    choice = _best_single_choices(scores, utilities, outside, cutoffs, params.score_noise_sd)
    return [
        SingleApplication(applicant_id=int(aid), school_id=beliefs.school_ids[c])
        for aid, c in zip(ids, choice)
        if c >= 0
    ]


def grouped_ranking(
    applicant: Applicant,
    groups: tuple[frozenset[int], frozenset[int]],
) -> PreferenceList:
    """Truthful list under the one-school-per-group constraint: the best
    acceptable school of each group, groups ordered by that school's utility."""
    entries = []
    for g in groups:
        best = None
        for sid in sorted(g):
            u = applicant.utility[sid - 1]
            if u > applicant.outside_option and (best is None or u > best[0]):
                best = (u, sid)
        if best is not None:
            entries.append(best)
    entries.sort(key=lambda e: (-e[0], e[1]))
    return PreferenceList(applicant_id=applicant.id, ranked=tuple(sid for _, sid in entries))


def submit_applications(
    schools: Sequence[School],
    applicants: Sequence[Applicant],
    regime: Regime,
    params: BehaviorParams,
    rng: SeededRng | None = None,
    beliefs: CutoffBeliefs | None = None,
) -> list[PreferenceList] | list[SingleApplication]:
    """Applications submitted under a regime.

    Centralized: full truthful rankings. Decentralized (with or without the
    unified exam): equilibrium single applications (beliefs computed here
    unless supplied). Grouped centralized: truthful one-per-group lists.
    Empty rankings / abstentions are dropped.
    """
    if regime.kind in (RegimeKind.DECENTRALIZED, RegimeKind.DECENTRALIZED_UNIFIED_EXAM):
        if beliefs is None:
            beliefs, _, _ = equilibrium_cutoffs(schools, applicants, params, rng)
        return single_applications(schools, applicants, beliefs, params)
    if regime.kind == RegimeKind.CENTRALIZED:
        out = [truthful_ranking(a) for a in applicants]
        return [p for p in out if p.ranked]
    if regime.kind == RegimeKind.GROUPED_CENTRALIZED:
        if regime.groups is None:
            raise DomainError("grouped regime requires groups")
        out = [grouped_ranking(a, regime.groups) for a in applicants]
        return [p for p in out if p.ranked]
    raise DomainError(f"unknown regime kind: {regime.kind!r}")
