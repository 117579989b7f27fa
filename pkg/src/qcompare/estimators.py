"""Monte Carlo estimates of comparable fractions, distance moments and
probability densities over random pairs of states.

Work is split into ``workers`` shards; shard ``k`` draws from
``SeededStream(seed, k)`` in fixed-size chunks, so a run is bit-identical for
a fixed ``(seed, workers)`` pair.  Shard results are merged in shard order
with the pairwise mean/variance combination formula.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import comparison
from .comparators import Comparator, _bilinear
from .effects import Effect
from .errors import QCompareError
from .sampling import MeasureKind, SeededStream, sample_qubit_bloch, sample_qudit_matrices
from .states import bloch_coords

CHUNK = 1 << 16
MIN_SAMPLES = 1000


def default_workers() -> int:
    try:
        return max(1, len(os.sched_getaffinity(0)))
    except AttributeError:  # pragma: no cover
        return max(1, os.cpu_count() or 1)


def sample_bloch(m, d: int, rng: np.random.Generator, n: int) -> np.ndarray:
    """``n`` Bloch vectors from the measure ``m`` in dimension ``d``."""
    if d == 2:
        return sample_qubit_bloch(m, rng, n)
    return bloch_coords(sample_qudit_matrices(m, d, rng, n))


def _shard_sizes(n: int, workers: int):
    base, extra = divmod(n, workers)
    return [base + (1 if i < extra else 0) for i in range(workers)]


# --- accumulators -----------------------------------------------------------


@dataclass
class Moments:
    """Running count, mean and sum of squared deviations."""

    n: int = 0
    mean: float = 0.0
    m2: float = 0.0
    positive: int = 0

    def add_batch(self, x: np.ndarray):
        if x.size == 0:
            return
        b = Moments(int(x.size), float(np.mean(x)), 0.0, int(np.count_nonzero(x > comparison.TAU)))
        b.m2 = float(np.sum((x - b.mean) ** 2))
        self.merge(b)

    def merge(self, o: "Moments"):
        if o.n == 0:
            return
        if self.n == 0:
            self.n, self.mean, self.m2, self.positive = o.n, o.mean, o.m2, o.positive
            return
        n = self.n + o.n
        delta = o.mean - self.mean
        self.mean += delta * o.n / n
        self.m2 += o.m2 + delta * delta * self.n * o.n / n
        self.n = n
        self.positive += o.positive


@dataclass(frozen=True)
class _Task:
    kind: str  # "distance" | "diff" | "same"
    comparator: Comparator | None
    forms: tuple
    measure: str
    d: int
    n: int
    seed: int
    index: int
    edges: tuple = ()


def _run_shard(t: _Task):
    rng = SeededStream(t.seed, t.index).generator()
    if t.kind == "distance":
        acc = Moments()
        for s in range(0, t.n, CHUNK):
            m = min(CHUNK, t.n - s)
            r = sample_bloch(t.measure, t.d, rng, m)
            k = sample_bloch(t.measure, t.d, rng, m)
            acc.add_batch(t.comparator.batch_distance(r, k))
        return acc
    edges = [np.asarray(e) for e in t.edges]
    counts = [np.zeros(len(e) - 1, dtype=np.int64) for e in edges]
    lo_dev = [-math.inf] * len(edges)
    hi_dev = [-math.inf] * len(edges)
    for s in range(0, t.n, CHUNK):
        m = min(CHUNK, t.n - s)
        r = sample_bloch(t.measure, t.d, rng, m)
        k = r if t.kind == "same" else sample_bloch(t.measure, t.d, rng, m)
        for i, (form, e) in enumerate(zip(t.forms, edges)):
            p = _bilinear(form, r, k)
            lo_dev[i] = max(lo_dev[i], float(e[0] - p.min()))
            hi_dev[i] = max(hi_dev[i], float(p.max() - e[-1]))
            c, _ = np.histogram(np.clip(p, e[0], e[-1]), bins=e)
            counts[i] += c
    return counts, lo_dev, hi_dev


def _run(tasks, workers: int):
    if workers <= 1 or len(tasks) <= 1:
        return [_run_shard(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=min(workers, len(tasks))) as ex:
        return list(ex.map(_run_shard, tasks))


def _check_n(n):
    if n < MIN_SAMPLES:
        raise QCompareError(f"n must be at least {MIN_SAMPLES}, got {n}")


def _check_seed(seed):
    if seed is None or not 0 <= int(seed) < 2**64:
        raise QCompareError(f"seed must be a 64-bit unsigned integer, got {seed!r}")
    return int(seed)


def _distance_moments(c: Comparator, m, n, seed, workers) -> Moments:
    _check_n(n)
    seed = _check_seed(seed)
    m = MeasureKind.parse(m)
    workers = max(1, int(workers))
    tasks = [_Task("distance", c, (), m.value, c.dim, sz, seed, i) for i, sz in enumerate(_shard_sizes(n, workers))]
    total = Moments()
    for part in _run(tasks, workers):
        total.merge(part)
    return total


# --- results ----------------------------------------------------------------


@dataclass(frozen=True)
class FractionResult:
    estimate: float
    std_error: float
    n: int
    seed: int
    povm: str
    measure: str
    d: int = 2
    workers: int = 1

    def to_json(self):
        return {
            "povm": self.povm, "measure": self.measure, "d": self.d, "n": self.n, "seed": self.seed,
            "workers": self.workers, "estimate": self.estimate, "std_error": self.std_error,
        }


@dataclass(frozen=True)
class MomentsResult:
    mean: float
    dispersion: float
    rel_std: float
    n: int
    seed: int
    povm: str = ""
    measure: str = ""
    d: int = 2
    workers: int = 1

    @property
    def std_error(self) -> float:
        """Standard error of the mean."""
        return math.sqrt(self.dispersion / self.n)

    def to_json(self):
        return {
            "povm": self.povm, "measure": self.measure, "d": self.d, "n": self.n, "seed": self.seed,
            "workers": self.workers, "mean": self.mean, "dispersion": self.dispersion,
            "rel_std": self.rel_std, "std_error": self.std_error,
        }


def comparable_fraction(c: Comparator, m, n: int, seed: int, workers: int = 1) -> FractionResult:
    """Fraction of random pairs with distance above ``TAU``."""
    mo = _distance_moments(c, m, n, seed, workers)
    p = mo.positive / mo.n
    return FractionResult(p, math.sqrt(p * (1 - p) / mo.n), mo.n, int(seed), c.id,
                          MeasureKind.parse(m).value, c.dim, int(workers))


def average_distance(c: Comparator, m, n: int, seed: int, workers: int = 1) -> MomentsResult:
    """Mean and dispersion (population variance) of the distance."""
    mo = _distance_moments(c, m, n, seed, workers)
    disp = mo.m2 / mo.n
    rel = math.sqrt(disp) / mo.mean if mo.mean > 0 else math.nan
    return MomentsResult(mo.mean, disp, rel, mo.n, int(seed), c.id, MeasureKind.parse(m).value, c.dim, int(workers))


# --- densities ----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class DensityCurve:
    """Normalized histogram of a single-effect probability.

    ``point_mass`` is set (and ``values`` empty) when every sample takes the
    same value, as for the twin probabilities of almost universal effects.
    """

    edges: np.ndarray
    values: np.ndarray
    kind: str
    effect: str
    measure: str
    n: int
    seed: int
    twin_range: tuple
    point_mass: float | None = None
    overflow: float = 0.0
    meta: dict = field(default_factory=dict)

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[1:] + self.edges[:-1])

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.edges)

    @property
    def integral(self) -> float:
        if self.point_mass is not None:
            return 1.0
        return float(np.sum(self.values * self.widths))

    @property
    def frontier(self) -> tuple:
        """Twin-range endpoints lying strictly inside the histogram support."""
        if self.point_mass is not None:
            return (self.point_mass,)
        a, b = float(self.edges[0]), float(self.edges[-1])
        return tuple(x for x in dict.fromkeys(self.twin_range) if a < x < b)


def _support(e: Effect, kind: str) -> tuple:
    if kind == "same":
        return comparison.twin_range(e)
    lo, hi = comparison.product_range(e)
    return (round(lo, 9), round(hi, 9))


def density_estimate(
    e: Effect,
    kind: str,
    m,
    bins: int,
    n: int,
    seed: int,
    workers: int = 1,
    support: tuple | None = None,
    label: str | None = None,
) -> DensityCurve:
    """Histogram of ``tr[E rho (x) xi]`` (``diff``) or ``tr[E eta (x) eta]`` (``same``)."""
    return density_estimates([e], kind, m, bins, n, seed, workers, [support], [label])[0]


def density_estimates(effects, kind: str, m, bins: int, n: int, seed: int, workers: int = 1,
                      supports=None, labels=None) -> list:
    """Histograms for several effects of the same dimension from one sample stream."""
    if kind not in ("diff", "same"):
        raise QCompareError(f"kind must be 'diff' or 'same', got {kind!r}")
    if bins < 10:
        raise QCompareError(f"bins must be at least 10, got {bins}")
    _check_n(n)
    seed = _check_seed(seed)
    m = MeasureKind.parse(m)
    workers = max(1, int(workers))
    effects = list(effects)
    if len({e.dim for e in effects}) != 1:
        raise QCompareError("all effects must share the dimension")
    supports = supports or [None] * len(effects)
    labels = labels or [None] * len(effects)
    edges, degenerate = [], []
    for e, sup in zip(effects, supports):
        lo, hi = sup if sup is not None else _support(e, kind)
        degenerate.append(hi - lo < 1e-12)
        # degenerate curves get one wide bin; the sample spread is checked below
        edges.append(tuple(np.linspace(lo - 0.5, hi + 0.5, 2) if degenerate[-1] else np.linspace(lo, hi, bins + 1)))
    forms = tuple(e.bloch_form for e in effects)
    tasks = [_Task(kind, None, forms, m.value, effects[0].dim, sz, seed, i, tuple(edges))
             for i, sz in enumerate(_shard_sizes(n, workers))]
    counts = [np.zeros(len(ed) - 1, dtype=np.int64) for ed in edges]
    lo_dev = [-math.inf] * len(effects)
    hi_dev = [-math.inf] * len(effects)
    for c, lo_d, hi_d in _run(tasks, workers):
        for i in range(len(effects)):
            counts[i] += c[i]
            lo_dev[i] = max(lo_dev[i], lo_d[i])
            hi_dev[i] = max(hi_dev[i], hi_d[i])
    out = []
    for i, e in enumerate(effects):
        twin = tuple(float(x) for x in comparison.twin_range(e))
        name = labels[i] or e.label
        ed = np.asarray(edges[i])
        if degenerate[i]:
            p0 = float(ed[0] + 0.5)
            dev = max(abs(lo_dev[i] + 0.5), abs(hi_dev[i] + 0.5))
            out.append(DensityCurve(np.array([p0, p0]), np.array([]), kind, name, m.value, n, seed, twin,
                                    point_mass=p0, meta={"max_deviation": dev, "workers": workers}))
            continue
        values = counts[i] / (n * np.diff(ed))
        out.append(DensityCurve(ed, values, kind, name, m.value, n, seed, twin,
                                overflow=max(lo_dev[i], hi_dev[i], 0.0), meta={"workers": workers}))
    return out


def _gap_antiderivative(x, lo, hi):
    x = np.asarray(x, dtype=float)
    return np.where(x < lo, -0.5 * (lo - x) ** 2, np.where(x > hi, 0.5 * (x - hi) ** 2, 0.0))


def mean_via_density(curve: DensityCurve, twin: tuple | None = None) -> float:
    """``2 * integral of dist(p, twin) N(p) dp`` over a ``diff`` histogram.

    The gap to the twin interval is integrated exactly inside each bin, so
    both one-sided (``p0`` at one end) and two-sided (``p0`` inside the
    support) layouts are handled by the same sum.
    """
    if curve.kind != "diff":
        raise QCompareError("mean_via_density needs a 'diff' curve")
    lo, hi = curve.twin_range if twin is None else twin
    g = _gap_antiderivative(curve.edges, lo, hi)
    return float(2.0 * np.sum(curve.values * np.diff(g)))
