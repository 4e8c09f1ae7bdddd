"""Meta-analyses: rank correlation, bootstrap, budget and quality sweeps.

Randomized procedures draw from numpy's PCG64 generator.  Every round or
resample r uses an independent stream seeded as
``np.random.default_rng([seed, r])``, so results are identical whether
rounds run sequentially or in parallel, and reproduce across platforms.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .corpus import JudgmentPair, JudgmentSet, RelevanceScale, RunRanking
from .disagreement import (
    DisagreementTable,
    UserModel,
    estimate_one_sided,
    estimate_symmetric,
)
from .errors import DataWarning, EstimationError, MetricError, ValidationError
from .metrics import DiscountFunction, GainScheme, MetricReport, ndcg_at_k

__all__ = [
    "SystemRanking",
    "BootstrapResult",
    "SensitivityCurve",
    "LevelSeries",
    "kendall_tau",
    "rank_systems",
    "bootstrap_topics",
    "simulate_annotation_rounds",
    "quality_sensitivity",
    "robustness_study",
    "scheme_agreement",
    "bootstrap_to_csv",
]


@dataclass(frozen=True)
class SystemRanking:
    """Systems ordered by non-increasing mean score."""

    measure: str
    systems: tuple[tuple[str, float], ...]

    def __post_init__(self) -> None:
        ids = [s for s, _ in self.systems]
        if len(set(ids)) != len(ids):
            raise ValidationError("duplicate system_id in ranking")
        scores = [v for _, v in self.systems]
        if any(b > a for a, b in zip(scores, scores[1:])):
            raise ValidationError("ranking scores must be non-increasing")

    @classmethod
    def from_scores(cls, measure: str, scores: Mapping[str, float]) -> "SystemRanking":
        ordered = tuple(sorted(scores.items(), key=lambda kv: (-kv[1], kv[0])))
        return cls(measure, ordered)

    def score_map(self) -> dict[str, float]:
        return dict(self.systems)

    def system_ids(self) -> set[str]:
        return {s for s, _ in self.systems}


def rank_systems(measure: str, reports: Mapping[str, MetricReport]) -> SystemRanking:
    """Order systems by the mean of their per-system reports."""
    return SystemRanking.from_scores(
        measure, {system: report.mean for system, report in reports.items()}
    )


def _merge_count(values: list[float]) -> tuple[list[float], int]:
    # Count strict inversions (i < j with v_i > v_j) by merge sort.
    n = len(values)
    if n < 2:
        return values, 0
    mid = n // 2
    left, inv_l = _merge_count(values[:mid])
    right, inv_r = _merge_count(values[mid:])
    merged: list[float] = []
    inv = inv_l + inv_r
    i = j = 0
    while i < len(left) and j < len(right):
        if left[i] <= right[j]:
            merged.append(left[i])
            i += 1
        else:
            inv += len(left) - i
            merged.append(right[j])
            j += 1
    merged.extend(left[i:])
    merged.extend(right[j:])
    return merged, inv


def _tie_pairs(values: Iterable[float]) -> int:
    counts: dict[float, int] = {}
    for v in values:
        counts[v] = counts.get(v, 0) + 1
    return sum(t * (t - 1) // 2 for t in counts.values())


def kendall_tau(a: SystemRanking, b: SystemRanking, *, variant: str = "b") -> float:
    """Kendall rank correlation between two system rankings.

    The default tie-aware variant ("b") divides the concordant-minus-
    discordant pair count by sqrt((n0 - ties_a)(n0 - ties_b)); variant
    "a" divides by the total pair count n0 and treats ties as neither
    concordant nor discordant.
    """
    if variant not in ("a", "b"):
        raise ValidationError(f"variant must be 'a' or 'b', got {variant!r}")
    if a.system_ids() != b.system_ids():
        raise ValidationError(
            f"rankings cover different systems: {sorted(a.system_ids() ^ b.system_ids())}"
        )
    n = len(a.systems)
    if n < 2:
        raise ValidationError("need at least 2 systems for a rank correlation")
    score_a = a.score_map()
    score_b = b.score_map()
    pairs = sorted((score_a[s], score_b[s]) for s in score_a)
    xs = [x for x, _ in pairs]
    ys = [y for _, y in pairs]

    n0 = n * (n - 1) // 2
    n1 = _tie_pairs(xs)
    n2 = _tie_pairs(ys)
    n3 = _tie_pairs(pairs)  # ties in both coordinates
    _, dis = _merge_count(ys)  # x-sorted, so strict y-inversions are discordant
    c_minus_d = n0 - n1 - n2 + n3 - 2 * dis

    if variant == "a":
        return c_minus_d / n0
    if n1 == n0 or n2 == n0:
        raise MetricError("tau-b undefined: one ranking is entirely tied")
    return c_minus_d / math.sqrt((n0 - n1) * (n0 - n2))


def _estimate(
    pairs: Sequence[JudgmentPair],
    user_model: UserModel,
    scale: RelevanceScale,
    estimator: str,
    condition: str,
) -> DisagreementTable:
    if estimator == "symmetric":
        return estimate_symmetric(pairs, user_model, scale)
    if estimator == "one_sided":
        return estimate_one_sided(pairs, user_model, scale, condition=condition)
    raise ValidationError(f"unknown estimator {estimator!r}")


def _check_seed(seed: int) -> int:
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        raise ValidationError(f"seed must be a non-negative integer, got {seed!r}")
    return seed


def _round_rng(seed: int, round_index: int) -> np.random.Generator:
    return np.random.default_rng([seed, round_index])


@dataclass(frozen=True)
class BootstrapResult:
    """Resampled estimates of one p_{R|i} parameter.

    ``samples`` holds the estimate from each resample where the level was
    defined; resamples where it was undefined (no paired judgments at the
    level) are counted in ``n_missing`` rather than imputed.  ``std`` uses
    the n - 1 denominator and is None for fewer than 2 samples; quartiles
    are (min, q1, median, q3, max) with linear interpolation.
    """

    level: int
    samples: tuple[float, ...]
    n_missing: int
    mean: float | None
    std: float | None
    quartiles: tuple[float, float, float, float, float] | None

    def __post_init__(self) -> None:
        mean, std, quart = _summaries(self.samples)
        stored = (self.mean, self.std, self.quartiles)
        for got, want in zip(stored, (mean, std, quart)):
            if (got is None) != (want is None):
                raise ValidationError("bootstrap summary does not match samples")
        if self.mean is not None and not math.isclose(self.mean, mean, rel_tol=1e-9):
            raise ValidationError("bootstrap mean does not match samples")
        if self.std is not None and not math.isclose(self.std, std, rel_tol=1e-9):
            raise ValidationError("bootstrap std does not match samples")
        if self.quartiles is not None and not np.allclose(self.quartiles, quart):
            raise ValidationError("bootstrap quartiles do not match samples")

    @classmethod
    def from_samples(
        cls, level: int, samples: Sequence[float], n_missing: int
    ) -> "BootstrapResult":
        mean, std, quart = _summaries(tuple(samples))
        return cls(level, tuple(samples), n_missing, mean, std, quart)

    def to_json_dict(self) -> dict:
        return {
            "level": self.level,
            "n_samples": len(self.samples),
            "n_missing": self.n_missing,
            "mean": self.mean,
            "std": self.std,
            "quartiles": None if self.quartiles is None else list(self.quartiles),
            "samples": list(self.samples),
        }


def _summaries(
    samples: tuple[float, ...]
) -> tuple[float | None, float | None, tuple[float, ...] | None]:
    if not samples:
        return None, None, None
    arr = np.asarray(samples, dtype=np.float64)
    mean = float(arr.mean())
    std = float(arr.std(ddof=1)) if len(samples) > 1 else None
    quart = tuple(float(q) for q in np.percentile(arr, [0, 25, 50, 75, 100]))
    return mean, std, quart


def bootstrap_topics(
    pairs: Sequence[JudgmentPair],
    user_model: UserModel,
    scale: RelevanceScale,
    *,
    estimator: str = "symmetric",
    condition: str = "u1",
    n_resamples: int = 300,
    seed: int,
) -> dict[int, BootstrapResult]:
    """Topic bootstrap of the disagreement estimates.

    Each resample draws topics with replacement (as many as there are
    topics); a drawn topic contributes all its pairs once per draw.  The
    tables are re-estimated per resample.
    """
    _check_seed(seed)
    if n_resamples < 1:
        raise ValidationError(f"n_resamples must be >= 1, got {n_resamples}")
    if not pairs:
        raise EstimationError("no judgment pairs to bootstrap")
    by_topic: dict[str, list[JudgmentPair]] = {}
    for p in pairs:
        by_topic.setdefault(p.topic_id, []).append(p)
    topics = sorted(by_topic)
    if len(topics) < 2:
        raise EstimationError("bootstrap needs at least 2 topics")

    samples: dict[int, list[float]] = {lvl: [] for lvl in range(scale.top_index + 1)}
    missing: dict[int, int] = {lvl: 0 for lvl in range(scale.top_index + 1)}
    for r in range(n_resamples):
        rng = _round_rng(seed, r)
        drawn = rng.integers(0, len(topics), size=len(topics))
        resampled: list[JudgmentPair] = []
        for t in drawn:
            resampled.extend(by_topic[topics[t]])
        table = _estimate(resampled, user_model, scale, estimator, condition)
        for cell in table.cells:
            if cell.defined:
                samples[cell.level].append(cell.p)
            else:
                missing[cell.level] += 1
    return {
        lvl: BootstrapResult.from_samples(lvl, samples[lvl], missing[lvl])
        for lvl in range(scale.top_index + 1)
    }


def bootstrap_to_csv(results: Mapping[int, BootstrapResult]) -> str:
    """Boxplot-ready summary: one row per level."""
    lines = ["level,n_samples,n_missing,mean,std,min,q1,median,q3,max"]
    for lvl in sorted(results):
        r = results[lvl]
        cells: list[str] = [str(r.level), str(len(r.samples)), str(r.n_missing)]
        cells.append("" if r.mean is None else repr(r.mean))
        cells.append("" if r.std is None else repr(r.std))
        if r.quartiles is None:
            cells.extend([""] * 5)
        else:
            cells.extend(repr(q) for q in r.quartiles)
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class LevelSeries:
    """One level's trajectory along a sweep: mean estimate and std band."""

    level: int
    means: tuple[float | None, ...]
    stds: tuple[float | None, ...]
    n_defined: tuple[int, ...]


@dataclass(frozen=True)
class SensitivityCurve:
    """Per-level estimate trajectories along a sweep coordinate."""

    x_name: str
    x: tuple[int, ...]
    series: tuple[LevelSeries, ...]

    def __post_init__(self) -> None:
        if any(b <= a for a, b in zip(self.x, self.x[1:])):
            raise ValidationError("sweep coordinate must be strictly increasing")
        for s in self.series:
            if not len(s.means) == len(s.stds) == len(s.n_defined) == len(self.x):
                raise ValidationError(
                    f"series for level {s.level} does not match sweep length"
                )

    def to_csv(self) -> str:
        lines = [f"{self.x_name},level,mean,std,n_defined"]
        for i, x in enumerate(self.x):
            for s in self.series:
                mean = "" if s.means[i] is None else repr(s.means[i])
                std = "" if s.stds[i] is None else repr(s.stds[i])
                lines.append(f"{x},{s.level},{mean},{std},{s.n_defined[i]}")
        return "\n".join(lines) + "\n"

    def to_json_dict(self) -> dict:
        return {
            "x_name": self.x_name,
            "x": list(self.x),
            "series": [
                {
                    "level": s.level,
                    "means": list(s.means),
                    "stds": list(s.stds),
                    "n_defined": list(s.n_defined),
                }
                for s in self.series
            ],
        }


def simulate_annotation_rounds(
    pairs: Sequence[JudgmentPair],
    user_model: UserModel,
    scale: RelevanceScale,
    budgets: Sequence[int],
    *,
    n_rounds: int = 50,
    seed: int,
    estimator: str = "symmetric",
    condition: str = "u1",
) -> SensitivityCurve:
    """How estimate quality grows with the number of double judgments.

    Each round draws the largest budget of pairs with replacement; smaller
    budgets reuse the prefix of the same draw, so budgets within a round
    are cumulative.  Reported per budget and level: mean and std (n - 1)
    of the estimate across rounds, plus how many rounds defined it.
    """
    _check_seed(seed)
    if not pairs:
        raise EstimationError("no judgment pairs to sample")
    if n_rounds < 1:
        raise ValidationError(f"n_rounds must be >= 1, got {n_rounds}")
    kept: list[int] = []
    for b in budgets:
        if b == 0:
            warnings.warn("budget 0 skipped", DataWarning, stacklevel=2)
            continue
        if b < 0:
            raise ValidationError(f"budgets must be >= 0, got {b}")
        kept.append(int(b))
    if not kept:
        raise ValidationError("no positive budgets")
    if any(b2 <= b1 for b1, b2 in zip(kept, kept[1:])):
        raise ValidationError(f"budgets must be strictly increasing, got {kept}")

    levels = range(scale.top_index + 1)
    per_round: dict[tuple[int, int], list[float]] = {
        (b, lvl): [] for b in kept for lvl in levels
    }
    pool = list(pairs)
    for r in range(n_rounds):
        rng = _round_rng(seed, r)
        draw = rng.integers(0, len(pool), size=kept[-1])
        for b in kept:
            sampled = [pool[i] for i in draw[:b]]
            table = _estimate(sampled, user_model, scale, estimator, condition)
            for cell in table.cells:
                if cell.defined:
                    per_round[(b, cell.level)].append(cell.p)

    series = []
    for lvl in levels:
        means: list[float | None] = []
        stds: list[float | None] = []
        counts: list[int] = []
        for b in kept:
            vals = per_round[(b, lvl)]
            counts.append(len(vals))
            if not vals:
                means.append(None)
                stds.append(None)
                continue
            arr = np.asarray(vals, dtype=np.float64)
            means.append(float(arr.mean()))
            stds.append(float(arr.std(ddof=1)) if len(vals) > 1 else None)
        series.append(LevelSeries(lvl, tuple(means), tuple(stds), tuple(counts)))
    return SensitivityCurve("budget", tuple(kept), tuple(series))


def quality_sensitivity(
    judgments: JudgmentSet,
    pairs: Sequence[JudgmentPair],
    user_model: UserModel,
    *,
    estimator: str = "symmetric",
    condition: str = "u1",
) -> SensitivityCurve:
    """Disagreement estimates restricted to results from top resources.

    Per query, resources are ranked by how many of their judged results
    the reference group placed in the top two levels (ties break to the
    lexicographically smaller resource id).  For each k, the table is
    re-estimated from the pairs whose documents the top-k resources
    returned for that query.  The std band is each cell's binomial sigma.

    ``judgments`` is the reference group's set and must carry resource
    ids; every pair's document must be covered by it so that the largest
    k reproduces the unrestricted estimate.
    """
    if not pairs:
        raise EstimationError("no judgment pairs to estimate from")
    if not judgments.judgments:
        raise ValidationError("no reference judgments")
    if len(judgments.groups()) != 1:
        raise ValidationError(
            "reference judgments must come from a single assessor group; "
            "filter with for_group()"
        )
    if any(j.resource_id is None for j in judgments.judgments):
        raise ValidationError(
            "no resource metadata on reference judgments; attach_resources first"
        )
    scale = judgments.scale
    user_model.check_against(scale)

    # docs per (topic, resource) and per-resource top-two-level counts
    docs_by_topic_resource: dict[str, dict[str, set[str]]] = {}
    strong_counts: dict[str, dict[str, int]] = {}
    for j in judgments.judgments:
        assert j.resource_id is not None
        docs_by_topic_resource.setdefault(j.topic_id, {}).setdefault(
            j.resource_id, set()
        ).add(j.doc_id)
        counts = strong_counts.setdefault(j.topic_id, {})
        counts.setdefault(j.resource_id, 0)
        if j.level >= scale.top_index - 1:
            counts[j.resource_id] += 1

    covered = {
        (j.topic_id, j.doc_id) for j in judgments.judgments
    }
    uncovered = [(p.topic_id, p.doc_id) for p in pairs if (p.topic_id, p.doc_id) not in covered]
    if uncovered:
        raise ValidationError(
            f"{len(uncovered)} pairs reference documents absent from the reference "
            f"judgments (first: {uncovered[0]}); the sweep cannot cover them"
        )

    order_by_topic = {
        topic: sorted(counts, key=lambda res: (-counts[res], res))
        for topic, counts in strong_counts.items()
    }
    k_max = max(len(order) for order in order_by_topic.values())

    ks = list(range(1, k_max + 1))
    means: dict[int, list[float | None]] = {
        lvl: [] for lvl in range(scale.top_index + 1)
    }
    stds: dict[int, list[float | None]] = {
        lvl: [] for lvl in range(scale.top_index + 1)
    }
    counts_defined: dict[int, list[int]] = {
        lvl: [] for lvl in range(scale.top_index + 1)
    }
    for k in ks:
        selected: set[tuple[str, str]] = set()
        for topic, order in order_by_topic.items():
            for res in order[:k]:
                for doc in docs_by_topic_resource[topic][res]:
                    selected.add((topic, doc))
        subset = [p for p in pairs if (p.topic_id, p.doc_id) in selected]
        if not subset:
            for lvl in range(scale.top_index + 1):
                means[lvl].append(None)
                stds[lvl].append(None)
                counts_defined[lvl].append(0)
            continue
        table = _estimate(subset, user_model, scale, estimator, condition)
        for cell in table.cells:
            means[cell.level].append(cell.p)
            stds[cell.level].append(cell.sigma)
            counts_defined[cell.level].append(cell.n_total)
    series = tuple(
        LevelSeries(
            lvl,
            tuple(means[lvl]),
            tuple(stds[lvl]),
            tuple(counts_defined[lvl]),
        )
        for lvl in range(scale.top_index + 1)
    )
    return SensitivityCurve("top_k_resources", tuple(ks), series)


def _rank_by_ndcg(
    runs: Sequence[RunRanking],
    judgments: JudgmentSet | Mapping[str, Mapping[str, int]],
    scheme: GainScheme,
    discount: DiscountFunction,
    k: int,
) -> SystemRanking:
    scores = {
        run.system_id: ndcg_at_k(run, judgments, scheme, discount, k).mean
        for run in runs
    }
    return SystemRanking.from_scores(f"ndcg_{scheme.name}@{k}", scores)


def robustness_study(
    runs: Sequence[RunRanking],
    set_u1: JudgmentSet | Mapping[str, Mapping[str, int]],
    set_u2: JudgmentSet | Mapping[str, Mapping[str, int]],
    schemes: Mapping[str, GainScheme],
    k: int,
    discount: DiscountFunction | None = None,
    *,
    variant: str = "b",
) -> dict[str, float]:
    """How stable each gain scheme's system ranking is across assessors.

    Scores every run twice, once against each assessor group's judgments
    (the gain vectors stay fixed), ranks systems by mean nDCG@k, and
    reports the rank correlation between the two rankings per scheme.
    """
    if len(runs) < 2:
        raise ValidationError("need at least 2 runs to correlate rankings")
    ids = [r.system_id for r in runs]
    if len(set(ids)) != len(ids):
        raise ValidationError("duplicate system_id among runs")
    discount = discount or DiscountFunction.log(2.0)
    out: dict[str, float] = {}
    for name in schemes:
        scheme = schemes[name]
        rank_u1 = _rank_by_ndcg(runs, set_u1, scheme, discount, k)
        rank_u2 = _rank_by_ndcg(runs, set_u2, scheme, discount, k)
        out[name] = kendall_tau(rank_u1, rank_u2, variant=variant)
    return out


def scheme_agreement(
    runs: Sequence[RunRanking],
    judgments: JudgmentSet | Mapping[str, Mapping[str, int]],
    schemes: Mapping[str, GainScheme],
    k: int,
    discount: DiscountFunction | None = None,
    *,
    variant: str = "b",
) -> dict[tuple[str, str], float]:
    """Pairwise rank correlation between gain schemes on one judgment set."""
    if len(runs) < 2:
        raise ValidationError("need at least 2 runs to correlate rankings")
    if len(schemes) < 2:
        raise ValidationError("need at least 2 schemes to compare")
    discount = discount or DiscountFunction.log(2.0)
    rankings = {
        name: _rank_by_ndcg(runs, judgments, schemes[name], discount, k)
        for name in schemes
    }
    names = sorted(schemes)
    out: dict[tuple[str, str], float] = {}
    for i, a in enumerate(names):
        for b in names[i + 1:]:
            out[(a, b)] = kendall_tau(rankings[a], rankings[b], variant=variant)
    return out
