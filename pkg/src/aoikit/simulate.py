"""Discrete-event Monte Carlo simulation with exact sawtooth integration.

One replication draws exponential holding times with the state's departure
rate, picks each transition with probability rate/departure-rate, applies
the symbolic reset map, and grows all ages at unit rate in between.  Time
averages never sample the sawtooth: every inter-event segment contributes a
closed-form integral (``segment_power_integral`` / ``segment_exp_integral``),
so the only estimation error is path randomness.

Randomness comes from the splitmix64 streams in :mod:`aoikit.rng`;
replication r of base seed b runs on ``stream_seed(b, r)``, so results are
bit-reproducible and independent of how replications are scheduled.
Replications run in parallel threads (the kernels release the GIL), capped
by the ``AOI_SHS_THREADS`` environment variable.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .errors import ConfigError, ModelValidationError
from .model import Copy, Fresh, ShsModel, departure_rates, validate
from .rng import GOLDEN, stream_seed

_U64 = np.uint64
_GOLD = _U64(GOLDEN)
_MIX1 = _U64(0xBF58476D1CE4E5B9)
_MIX2 = _U64(0x94D049BB133111EB)
_U53 = 2.0**-53


@dataclass(frozen=True)
class SimConfig:
    """Run lengths, estimator targets, and the reproducibility seed.

    ``warmup`` (discarded before accumulation) defaults to 1% of ``t_end``;
    initialization bias decays exponentially, so this is negligible at the
    run lengths the estimators need anyway.
    """

    seed: int
    t_end: float
    warmup: float | None = None
    orders: tuple[int, ...] = (1, 2)
    s_values: tuple[float, ...] = ()
    replications: int = 16

    def __post_init__(self):
        if self.t_end <= 0.0:
            raise ConfigError(f"t_end must be positive, got {self.t_end:g}")
        if self.warmup is not None and self.warmup < 0.0:
            raise ConfigError("warmup must be non-negative")
        if self.resolved_warmup >= self.t_end:
            raise ConfigError(
                f"warmup {self.resolved_warmup:g} must be shorter than t_end {self.t_end:g}"
            )
        if self.replications < 1:
            raise ConfigError("at least one replication is required")
        if any((not isinstance(m, int)) or m < 1 for m in self.orders):
            raise ConfigError("moment orders must be integers >= 1")

    @property
    def resolved_warmup(self) -> float:
        return 0.01 * self.t_end if self.warmup is None else self.warmup


@dataclass(frozen=True)
class SimEstimates:
    """Replication-averaged time averages with between-replication stderr.

    ``occupancy[q]`` is the fraction of accumulated time spent in state q;
    ``moment_avg[k, j]`` the time average of ``x_j ** orders[k]`` and
    ``mgf_avg[k, j]`` of ``exp(s_values[k] * x_j)``.  Standard errors are
    ``std(ddof=1)/sqrt(R)`` over replications (NaN for a single
    replication).  Per-replication values are kept for cross-checks.
    """

    orders: tuple[int, ...]
    s_values: tuple[float, ...]
    occupancy: np.ndarray
    occupancy_se: np.ndarray
    moment_avg: np.ndarray
    moment_se: np.ndarray
    mgf_avg: np.ndarray
    mgf_se: np.ndarray
    rep_occupancy: np.ndarray = field(repr=False)
    rep_moments: np.ndarray = field(repr=False)
    rep_mgf: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class EmpiricalHistogram:
    """Time-weighted age histogram; ``masses`` sum to at most 1, with the
    time fractions spent outside the grid reported separately."""

    edges: np.ndarray
    masses: np.ndarray
    below: float
    above: float
    rep_masses: np.ndarray = field(repr=False)


@njit(cache=True, nogil=True)
def segment_power_integral(a: float, dur: float, m: int) -> float:
    """Integral of (a + u)^m for u in [0, dur], in closed form."""
    b = a + dur
    pa = a
    pb = b
    for _ in range(m):
        pa *= a
        pb *= b
    return (pb - pa) / (m + 1.0)


@njit(cache=True, nogil=True)
def segment_exp_integral(a: float, dur: float, s: float) -> float:
    """Integral of exp(s * (a + u)) for u in [0, dur]; dur at s = 0.

    Evaluated as exp(s*a) * expm1(s*dur) / s, which stays accurate when
    s*dur underflows the difference of exponentials.
    """
    if s == 0.0:
        return dur
    return np.exp(s * a) * np.expm1(s * dur) / s


@njit(cache=True, nogil=True)
def _simulate_rep(
    seed, t_end, warmup, d, state_ptr, cum_prob, target, reset_src,
    orders, svals, occ, mom, mgf,
):
    state = _U64(seed)
    n = reset_src.shape[1]
    x = np.zeros(n)
    x_new = np.zeros(n)
    t = 0.0
    q = 0
    while True:
        state = state + _GOLD
        z = state
        z = (z ^ (z >> _U64(30))) * _MIX1
        z = (z ^ (z >> _U64(27))) * _MIX2
        z = z ^ (z >> _U64(31))
        u = float(z >> _U64(11)) * _U53
        tau = -np.log1p(-u) / d[q]
        t_next = t + tau
        seg_end = t_next if t_next < t_end else t_end
        seg_start = t if t > warmup else warmup
        if seg_end > seg_start:
            dur = seg_end - seg_start
            off = seg_start - t
            occ[q] += dur
            for j in range(n):
                aj = x[j] + off
                for k in range(orders.shape[0]):
                    mom[k, j] += segment_power_integral(aj, dur, orders[k])
                for k in range(svals.shape[0]):
                    mgf[k, j] += segment_exp_integral(aj, dur, svals[k])
        if t_next >= t_end:
            break
        state = state + _GOLD
        z = state
        z = (z ^ (z >> _U64(30))) * _MIX1
        z = (z ^ (z >> _U64(27))) * _MIX2
        z = z ^ (z >> _U64(31))
        u = float(z >> _U64(11)) * _U53
        l = state_ptr[q]
        hi = state_ptr[q + 1]
        while l < hi - 1 and u >= cum_prob[l]:
            l += 1
        for j in range(n):
            x[j] += tau
        for j in range(n):
            src = reset_src[l, j]
            x_new[j] = 0.0 if src < 0 else x[src]
        for j in range(n):
            x[j] = x_new[j]
        q = target[l]
        t = t_next


@njit(cache=True, nogil=True)
def _histogram_rep(
    seed, t_end, warmup, d, state_ptr, cum_prob, target, reset_src,
    comp, edges, masses, tails,
):
    state = _U64(seed)
    n = reset_src.shape[1]
    nbins = edges.shape[0] - 1
    x = np.zeros(n)
    x_new = np.zeros(n)
    t = 0.0
    q = 0
    while True:
        state = state + _GOLD
        z = state
        z = (z ^ (z >> _U64(30))) * _MIX1
        z = (z ^ (z >> _U64(27))) * _MIX2
        z = z ^ (z >> _U64(31))
        u = float(z >> _U64(11)) * _U53
        tau = -np.log1p(-u) / d[q]
        t_next = t + tau
        seg_end = t_next if t_next < t_end else t_end
        seg_start = t if t > warmup else warmup
        if seg_end > seg_start:
            off = seg_start - t
            a = x[comp] + off
            b = a + (seg_end - seg_start)
            if a < edges[0]:
                c = b if b < edges[0] else edges[0]
                tails[0] += c - a
                a = c
            if b > a:
                if a >= edges[nbins]:
                    tails[1] += b - a
                else:
                    i = np.searchsorted(edges, a, side="right") - 1
                    if i < 0:
                        i = 0
                    while b > a and i < nbins:
                        hi_edge = edges[i + 1]
                        c = b if b < hi_edge else hi_edge
                        masses[i] += c - a
                        a = c
                        i += 1
                    if b > a:
                        tails[1] += b - a
        if t_next >= t_end:
            break
        state = state + _GOLD
        z = state
        z = (z ^ (z >> _U64(30))) * _MIX1
        z = (z ^ (z >> _U64(27))) * _MIX2
        z = z ^ (z >> _U64(31))
        u = float(z >> _U64(11)) * _U53
        l = state_ptr[q]
        hi = state_ptr[q + 1]
        while l < hi - 1 and u >= cum_prob[l]:
            l += 1
        for j in range(n):
            x[j] += tau
        for j in range(n):
            src = reset_src[l, j]
            x_new[j] = 0.0 if src < 0 else x[src]
        for j in range(n):
            x[j] = x_new[j]
        q = target[l]
        t = t_next


def _encode(model: ShsModel):
    """Flatten a model into the arrays the kernels consume."""
    violations = validate(model)
    if violations:
        raise ModelValidationError(violations)
    nq, n = model.num_states, model.age_dim
    d = departure_rates(model)
    order = sorted(range(len(model.transitions)), key=lambda l: model.transitions[l].source)
    state_ptr = np.zeros(nq + 1, dtype=np.int64)
    target = np.empty(len(order), dtype=np.int64)
    cum_prob = np.empty(len(order))
    reset_src = np.empty((len(order), n), dtype=np.int64)
    pos = 0
    for q in range(nq):
        state_ptr[q] = pos
        acc = 0.0
        for l in order:
            tr = model.transitions[l]
            if tr.source != q:
                continue
            acc += tr.rate / d[q]
            cum_prob[pos] = acc
            target[pos] = tr.target
            for j, entry in enumerate(tr.reset.assignments):
                if isinstance(entry, Fresh):
                    reset_src[pos, j] = -1
                elif isinstance(entry, Copy):
                    reset_src[pos, j] = entry.source - 1
                else:
                    reset_src[pos, j] = j
            pos += 1
        if pos > state_ptr[q]:
            cum_prob[pos - 1] = 1.0  # guard against rounding in the running sum
    state_ptr[nq] = pos
    return d, state_ptr, cum_prob, target, reset_src


def worker_count(tasks: int) -> int:
    """Replication parallelism: AOI_SHS_THREADS caps the machine default."""
    env = os.environ.get("AOI_SHS_THREADS", "").strip()
    cap = int(env) if env else (os.cpu_count() or 1)
    return max(1, min(cap, tasks))


def run_replicated(fn, replications: int) -> None:
    """Run fn(0..replications-1), possibly in threads; results land in
    replication-indexed slots, so the merge order is deterministic."""
    workers = worker_count(replications)
    if workers == 1:
        for r in range(replications):
            fn(r)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(fn, range(replications)))


def _mean_and_se(values: np.ndarray):
    mean = values.mean(axis=0)
    if values.shape[0] > 1:
        se = values.std(axis=0, ddof=1) / np.sqrt(values.shape[0])
    else:
        se = np.full_like(mean, np.nan)
    return mean, se


def simulate(model: ShsModel, config: SimConfig) -> SimEstimates:
    """Monte Carlo estimates of occupancy, age moments, and the age MGF.

    Deterministic: identical (model, config) gives bit-identical output.
    """
    d, state_ptr, cum_prob, target, reset_src = _encode(model)
    nq, n = model.num_states, model.age_dim
    orders = np.asarray(config.orders, dtype=np.int64)
    svals = np.asarray(config.s_values, dtype=np.float64)
    reps = config.replications
    warmup = config.resolved_warmup
    span = config.t_end - warmup

    occ = np.zeros((reps, nq))
    mom = np.zeros((reps, len(orders), n))
    mgf = np.zeros((reps, len(svals), n))

    def run(r: int) -> None:
        _simulate_rep(
            _U64(stream_seed(config.seed, r)), config.t_end, warmup,
            d, state_ptr, cum_prob, target, reset_src,
            orders, svals, occ[r], mom[r], mgf[r],
        )

    run_replicated(run, reps)
    occ /= span
    mom /= span
    mgf /= span
    occ_mean, occ_se = _mean_and_se(occ)
    mom_mean, mom_se = _mean_and_se(mom)
    mgf_mean, mgf_se = _mean_and_se(mgf)
    return SimEstimates(
        orders=config.orders, s_values=config.s_values,
        occupancy=occ_mean, occupancy_se=occ_se,
        moment_avg=mom_mean, moment_se=mom_se,
        mgf_avg=mgf_mean, mgf_se=mgf_se,
        rep_occupancy=occ, rep_moments=mom, rep_mgf=mgf,
    )


def empirical_distribution(
    model: ShsModel, component: int, config: SimConfig, grid: np.ndarray
) -> EmpiricalHistogram:
    """Time-weighted histogram of one age component over the given bin edges.

    Bin mass is the exact time fraction the sawtooth spends inside the bin;
    replication r reuses the stream of :func:`simulate`'s replication r, so
    the histogram describes the same sample paths.
    """
    d, state_ptr, cum_prob, target, reset_src = _encode(model)
    if not (1 <= component <= model.age_dim):
        raise ValueError(f"component must be in 1..{model.age_dim}, got {component}")
    edges = np.asarray(grid, dtype=np.float64)
    if edges.ndim != 1 or edges.shape[0] < 2 or np.any(np.diff(edges) <= 0.0):
        raise ValueError("grid must hold at least two strictly increasing bin edges")
    reps = config.replications
    warmup = config.resolved_warmup
    span = config.t_end - warmup

    masses = np.zeros((reps, edges.shape[0] - 1))
    tails = np.zeros((reps, 2))

    def run(r: int) -> None:
        _histogram_rep(
            _U64(stream_seed(config.seed, r)), config.t_end, warmup,
            d, state_ptr, cum_prob, target, reset_src,
            component - 1, edges, masses[r], tails[r],
        )

    run_replicated(run, reps)
    masses /= span
    tails /= span
    return EmpiricalHistogram(
        edges=edges,
        masses=masses.mean(axis=0),
        below=float(tails[:, 0].mean()),
        above=float(tails[:, 1].mean()),
        rep_masses=masses,
    )
