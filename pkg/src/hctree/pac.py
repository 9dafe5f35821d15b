"""Sampling experiment pipelines: realizable and agnostic error curves, the
contradiction-threshold measurement, and the non-binary analog.

Every pipeline is deterministic under its seed: per-trial generators are
derived from (seed, mode, n, ratio, trial), trials are independent, and
reductions sort before aggregating, so results do not depend on scheduling.
Wall-clock columns are emitted as 0 unless timings are explicitly requested,
keeping repeated CSV output byte-identical.
"""

from __future__ import annotations

import itertools
import math
import random
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .core import Constraint, OrientedSet, SplitPair, default_points
from .builder import build_agnostic, build_binary, build_nonbinary
from .tree_ops import (
    HierarchicalTree,
    orientation_of,
    random_binary_tree,
    random_multiway_tree,
)

MODES = ("realizable", "agnostic-vectors", "agnostic-file", "nonbinary")


@dataclass(frozen=True)
class ExperimentConfig:
    mode: str
    n: int
    k_ratios: tuple[float, ...]
    trials: int = 10
    seed: int = 0
    dim: int = 100
    test_size: int = 2000
    child_counts: tuple[int, ...] = (2, 3, 4)
    timings: bool = False

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if any(r <= 0 for r in self.k_ratios):
            raise ValueError("sample ratios must be positive")


@dataclass(frozen=True)
class TrialRecord:
    mode: str
    n: int
    k_ratio: float
    trial: int
    error: float
    seconds: float


@dataclass(frozen=True)
class ErrorPoint:
    n: int
    k_ratio: float
    mean: float
    q10: float
    q90: float
    product: float  # k_ratio * mean


@dataclass(frozen=True)
class ErrorReport:
    mode: str
    rows: tuple[TrialRecord, ...]
    points: tuple[ErrorPoint, ...]


def _trial_rng(config: ExperimentConfig, k_ratio: float, trial: int) -> random.Random:
    return random.Random(f"{config.seed}:{config.mode}:{config.n}:{k_ratio}:{trial}")


def _np_rng(rng: random.Random) -> np.random.Generator:
    return np.random.default_rng(rng.getrandbits(64))


def sample_labeled_triplet(t: HierarchicalTree, rng: random.Random) -> Constraint:
    """Uniform 3-subset of the leaves, labeled with the orientation t gives it."""
    leaves = t.leaf_points()
    if len(leaves) < 3:
        raise ValueError("sampling needs at least 3 leaves")
    a, b, c = sorted(rng.sample(leaves, 3))
    return orientation_of(t, a, b, c)


def distance_labeler(vectors: np.ndarray) -> Callable[[tuple[int, int, int]], Constraint]:
    """Label (a,b,c) with the pair of (weakly) minimum Euclidean distance.

    Ties go to the lexicographically smallest canonical pair, which makes the
    labeling total and deterministic.
    """
    vecs = np.asarray(vectors, dtype=float)

    def label(triplet: Sequence[int]) -> Constraint:
        a, b, c = sorted(triplet)
        candidates = [
            ((a, b), c, float(np.dot(vecs[a] - vecs[b], vecs[a] - vecs[b]))),
            ((a, c), b, float(np.dot(vecs[a] - vecs[c], vecs[a] - vecs[c]))),
            ((b, c), a, float(np.dot(vecs[b] - vecs[c], vecs[b] - vecs[c]))),
        ]
        pair, cut, _ = min(candidates, key=lambda item: (item[2], item[0]))
        return SplitPair(pair[0], pair[1], cut)

    return label


def uniform_vectors(n: int, dim: int, rng: random.Random) -> np.ndarray:
    return _np_rng(rng).uniform(0.0, 1.0, size=(n, dim))


def hierarchical_vectors(n: int, dim: int, rng: random.Random,
                         base: float = 1.0, decay: float = 0.55) -> np.ndarray:
    """Leaves of a balanced hierarchy embedded as sums of per-level Gaussian
    offsets; nearby leaves share most of their offsets."""
    npr = _np_rng(rng)
    out = np.zeros((n, dim))

    def rec(indices: list[int], acc: np.ndarray, level: int):
        scale = base * (decay ** level)
        if len(indices) == 1:
            out[indices[0]] = acc + npr.normal(0.0, scale, size=dim)
            return
        mid = len(indices) // 2
        for half in (indices[:mid], indices[mid:]):
            rec(half, acc + npr.normal(0.0, scale, size=dim), level + 1)

    rec(list(range(n)), np.zeros(dim), 0)
    return out


def load_vectors_csv(text: str) -> tuple[Optional[list[str]], np.ndarray]:
    """Vector rows; the first column may carry point names."""
    names: Optional[list[str]] = None
    rows: list[list[float]] = []
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = [f.strip() for f in line.split(",")]
        try:
            float(fields[0])
            has_name = False
        except ValueError:
            has_name = True
        if has_name:
            if names is None:
                names = []
            if rows and names is not None and len(names) != len(rows):
                raise ValueError(f"line {line_no}: mixed named and unnamed rows")
            names.append(fields[0])
            fields = fields[1:]
        try:
            rows.append([float(f) for f in fields])
        except ValueError as exc:
            raise ValueError(f"line {line_no}: non-numeric vector entry") from exc
    if not rows:
        raise ValueError("no vectors in input")
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise ValueError("vector rows have mixed dimensions")
    return names, np.array(rows)


def _test_triplets(n: int, size: int, rng: random.Random) -> list[tuple[int, int, int]]:
    """The fixed-size test pool: all 3-subsets when there are few, else
    uniform draws with replacement."""
    total = math.comb(n, 3)
    if total <= size:
        return list(itertools.combinations(range(n), 3))
    return [tuple(sorted(rng.sample(range(n), 3))) for _ in range(size)]


def _aggregate(mode: str, rows: list[TrialRecord]) -> ErrorReport:
    rows = sorted(rows, key=lambda r: (r.n, r.k_ratio, r.trial))
    points = []
    for (n, k_ratio), group in itertools.groupby(rows, key=lambda r: (r.n, r.k_ratio)):
        errs = np.array([g.error for g in group])
        mean = float(errs.mean())
        points.append(ErrorPoint(
            n=n, k_ratio=k_ratio, mean=mean,
            q10=float(np.quantile(errs, 0.10)),
            q90=float(np.quantile(errs, 0.90)),
            product=k_ratio * mean,
        ))
    return ErrorReport(mode=mode, rows=tuple(rows), points=tuple(points))


def _run_trials(config: ExperimentConfig, worker, jobs: int = 1) -> ErrorReport:
    keys = [(k, t) for k in config.k_ratios for t in range(config.trials)]
    if jobs > 1:
        try:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                rows = list(pool.map(worker, keys))
        except (OSError, PermissionError):
            rows = [worker(key) for key in keys]
    else:
        rows = [worker(key) for key in keys]
    return _aggregate(config.mode, rows)


# The per-trial workers are module-level callables built from a picklable
# (config, extra) pair so process pools can ship them.


@dataclass(frozen=True)
class _RealizableWorker:
    config: ExperimentConfig

    def __call__(self, key: tuple[float, int]) -> TrialRecord:
        k_ratio, trial = key
        cfg = self.config
        rng = _trial_rng(cfg, k_ratio, trial)
        started = time.perf_counter()
        ground = random_binary_tree(cfg.n, rng)
        points = default_points(cfg.n)
        m = math.ceil(k_ratio * cfg.n)
        train = tuple(sample_labeled_triplet(ground, rng) for _ in range(m))
        outcome = build_binary(OrientedSet(points, train), rng)
        if not outcome.ok:
            raise AssertionError("realizable sample produced a contradiction")
        built = outcome.tree
        tests = _test_triplets(cfg.n, cfg.test_size, rng)
        wrong = sum(
            1 for t in tests if orientation_of(built, *t) != orientation_of(ground, *t)
        )
        seconds = time.perf_counter() - started if cfg.timings else 0.0
        return TrialRecord(cfg.mode, cfg.n, k_ratio, trial, wrong / len(tests), seconds)


def run_realizable(config: ExperimentConfig, jobs: int = 1) -> ErrorReport:
    """Error curve for samples labeled by a hidden uniform random binary tree,
    rebuilt by the exact top-down builder with random binarization."""
    if config.mode != "realizable":
        raise ValueError("config mode must be 'realizable'")
    return _run_trials(config, _RealizableWorker(config), jobs)


@dataclass(frozen=True)
class _AgnosticWorker:
    config: ExperimentConfig
    vectors: Optional[tuple[tuple[float, ...], ...]]  # None: fresh per trial

    def __call__(self, key: tuple[float, int]) -> TrialRecord:
        k_ratio, trial = key
        cfg = self.config
        rng = _trial_rng(cfg, k_ratio, trial)
        started = time.perf_counter()
        if self.vectors is None:
            vecs = uniform_vectors(cfg.n, cfg.dim, rng)
        else:
            vecs = np.array(self.vectors)
        if len(vecs) < cfg.n:
            raise ValueError(f"need {cfg.n} vectors, got {len(vecs)}")
        label = distance_labeler(vecs[:cfg.n])
        points = default_points(cfg.n)
        m = math.ceil(k_ratio * cfg.n)
        train = tuple(
            label(tuple(sorted(rng.sample(range(cfg.n), 3)))) for _ in range(m)
        )
        built, _ = build_agnostic(OrientedSet(points, train), rng)
        tests = _test_triplets(cfg.n, cfg.test_size, rng)
        wrong = sum(1 for t in tests if orientation_of(built, *t) != label(t))
        seconds = time.perf_counter() - started if cfg.timings else 0.0
        return TrialRecord(cfg.mode, cfg.n, k_ratio, trial, wrong / len(tests), seconds)


def run_agnostic(config: ExperimentConfig, vectors: Optional[np.ndarray] = None,
                 jobs: int = 1) -> ErrorReport:
    """Error curve for distance-labeled vectors through the min-cut builder.

    ``agnostic-vectors`` draws fresh uniform vectors per trial; a provided
    vector array (``agnostic-file``, or synthetic hierarchies) is shared.
    """
    if config.mode not in ("agnostic-vectors", "agnostic-file"):
        raise ValueError("config mode must be agnostic-vectors or agnostic-file")
    if config.mode == "agnostic-file" and vectors is None:
        raise ValueError("agnostic-file mode needs a vector array")
    packed = None if vectors is None else tuple(map(tuple, np.asarray(vectors)))
    return _run_trials(config, _AgnosticWorker(config, packed), jobs)


@dataclass(frozen=True)
class ThresholdReport:
    counts: tuple[Optional[int], ...]  # None: pool exhausted, no contradiction
    mean: Optional[float]


@dataclass(frozen=True)
class _ThresholdWorker:
    config: ExperimentConfig

    def __call__(self, key: tuple[float, int]) -> Optional[int]:
        _, trial = key
        cfg = self.config
        rng = _trial_rng(cfg, 1.0, trial)
        vecs = uniform_vectors(cfg.n, cfg.dim, rng)
        label = distance_labeler(vecs)
        return count_until_contradiction(
            cfg.n, label, rng, cap=math.comb(cfg.n, 3)
        )


def count_until_contradiction(n: int, label, rng: random.Random,
                              cap: int) -> Optional[int]:
    """Draw uniform labeled triplets until the accumulated set stops being
    satisfiable; None if the draw cap is exhausted first."""
    points = default_points(n)
    seen: list[Constraint] = []
    seen_set: set[Constraint] = set()
    for count in range(1, cap + 1):
        t = tuple(sorted(rng.sample(range(n), 3)))
        c = label(t)
        if c in seen_set:
            continue  # a repeat cannot create a contradiction
        seen.append(c)
        seen_set.add(c)
        if not build_binary(OrientedSet(points, tuple(seen))).ok:
            return count
    return None


def contradiction_threshold(config: ExperimentConfig, jobs: int = 1) -> ThresholdReport:
    """Mean number of distance-labeled uniform triplets until the first
    contradiction, across trials."""
    if config.mode != "agnostic-vectors":
        raise ValueError("config mode must be 'agnostic-vectors'")
    worker = _ThresholdWorker(config)
    keys = [(1.0, t) for t in range(config.trials)]
    if jobs > 1:
        try:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                counts = list(pool.map(worker, keys))
        except (OSError, PermissionError):
            counts = [worker(k) for k in keys]
    else:
        counts = [worker(k) for k in keys]
    found = [c for c in counts if c is not None]
    mean = sum(found) / len(found) if found else None
    return ThresholdReport(counts=tuple(counts), mean=mean)


def run_nonbinary_trial(ground: HierarchicalTree, k_ratio: float,
                        rng: random.Random, test_size: int) -> float:
    """One non-binary trial against a given ground-truth tree: build the
    multiway tree from samples (no binarization) and score test triplets.
    Points the sample never pins stay split at the root, so unseen structure
    defaults to the three-way label."""
    n = len(ground.leaf_points())
    points = default_points(n)
    m = math.ceil(k_ratio * n)
    train = tuple(sample_labeled_triplet(ground, rng) for _ in range(m))
    outcome = build_nonbinary(OrientedSet(points, train))
    if not outcome.ok:
        raise AssertionError("realizable sample produced a contradiction")
    built = outcome.tree
    tests = _test_triplets(n, test_size, rng)
    wrong = sum(
        1 for t in tests if orientation_of(built, *t) != orientation_of(ground, *t)
    )
    return wrong / len(tests)


@dataclass(frozen=True)
class _NonbinaryWorker:
    config: ExperimentConfig

    def __call__(self, key: tuple[float, int]) -> TrialRecord:
        k_ratio, trial = key
        cfg = self.config
        rng = _trial_rng(cfg, k_ratio, trial)
        started = time.perf_counter()
        ground = random_multiway_tree(cfg.n, rng, cfg.child_counts)
        error = run_nonbinary_trial(ground, k_ratio, rng, cfg.test_size)
        seconds = time.perf_counter() - started if cfg.timings else 0.0
        return TrialRecord(cfg.mode, cfg.n, k_ratio, trial, error, seconds)


def run_nonbinary(config: ExperimentConfig, jobs: int = 1) -> ErrorReport:
    """Non-binary analog of the realizable curve on synthetic multiway trees."""
    if config.mode != "nonbinary":
        raise ValueError("config mode must be 'nonbinary'")
    return _run_trials(config, _NonbinaryWorker(config), jobs)


# ---------------------------------------------------------------------------
# Emission
# ---------------------------------------------------------------------------


def trials_csv(report: ErrorReport) -> str:
    lines = ["mode,n,k_ratio,trial,error,seconds"]
    for r in report.rows:
        lines.append(f"{r.mode},{r.n},{r.k_ratio:g},{r.trial},{r.error:.6f},{r.seconds:.6f}")
    return "\n".join(lines) + "\n"


def aggregate_csv(report: ErrorReport) -> str:
    lines = ["mode,n,k_ratio,mean_error,q10,q90,product"]
    for p in report.points:
        lines.append(
            f"{report.mode},{p.n},{p.k_ratio:g},{p.mean:.6f},{p.q10:.6f},{p.q90:.6f},{p.product:.6f}"
        )
    return "\n".join(lines) + "\n"


def render_report_svg(report: ErrorReport, title: str = "") -> str:
    """Static single-file line chart of mean error (with q10/q90 whiskers)
    against the sample ratio."""
    width, height, pad = 640, 400, 50
    pts = sorted(report.points, key=lambda p: (p.n, p.k_ratio))
    if not pts:
        return "<svg xmlns='http://www.w3.org/2000/svg'/>"
    xs = sorted({p.k_ratio for p in pts})
    x_lo, x_hi = min(xs), max(xs)
    y_hi = max(max(p.q90 for p in pts), 1e-9)
    span_x = (x_hi - x_lo) or 1.0

    def X(x):
        return pad + (x - x_lo) / span_x * (width - 2 * pad)

    def Y(y):
        return height - pad - y / y_hi * (height - 2 * pad)

    parts = [
        f"<svg xmlns='http://www.w3.org/2000/svg' width='{width}' height='{height}'>",
        f"<text x='{width/2:.0f}' y='20' text-anchor='middle' font-size='14'>{title or report.mode}</text>",
        f"<line x1='{pad}' y1='{height-pad}' x2='{width-pad}' y2='{height-pad}' stroke='black'/>",
        f"<line x1='{pad}' y1='{pad}' x2='{pad}' y2='{height-pad}' stroke='black'/>",
        f"<text x='{width/2:.0f}' y='{height-10}' text-anchor='middle' font-size='11'>samples / n</text>",
        f"<text x='14' y='{height/2:.0f}' font-size='11' transform='rotate(-90 14 {height/2:.0f})'>error</text>",
    ]
    palette = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#8c564b"]
    for ci, n in enumerate(sorted({p.n for p in pts})):
        series = [p for p in pts if p.n == n]
        color = palette[ci % len(palette)]
        path = " ".join(f"{X(p.k_ratio):.1f},{Y(p.mean):.1f}" for p in series)
        parts.append(f"<polyline points='{path}' fill='none' stroke='{color}' stroke-width='2'/>")
        for p in series:
            parts.append(
                f"<line x1='{X(p.k_ratio):.1f}' y1='{Y(p.q10):.1f}' "
                f"x2='{X(p.k_ratio):.1f}' y2='{Y(p.q90):.1f}' stroke='{color}'/>"
            )
            parts.append(
                f"<circle cx='{X(p.k_ratio):.1f}' cy='{Y(p.mean):.1f}' r='3' fill='{color}'/>"
            )
        parts.append(
            f"<text x='{width-pad+6}' y='{pad+14*ci}' font-size='11' fill='{color}'>n={n}</text>"
        )
    parts.append("</svg>")
    return "\n".join(parts)
