"""Status-sampling line networks over renewal delivery processes.

Node 0 is a fresh source (its age is identically zero); hop i forwards the
current age of node i to node i+1 at the points of an equilibrium renewal
process with continuous inter-update times.  At a delivery the downstream
age is reset to the upstream age just before the delivery instant; between
deliveries it grows at unit rate.  The stationary age at node k is then the
independent sum of the k per-hop equilibrium ages Z_i, whose density is the
scaled survival function P(Y_i > z) / E[Y_i].

The analytic side evaluates those densities and convolves them on a uniform
grid; the simulator constructs the sample paths hop by hop and reduces them
with the same exact segment integrals the event simulator uses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, special

from .errors import ConfigError, TruncationError
from .rng import stream_seed, uniforms
from .simulate import run_replicated

# Per-hop grids extend to the (1 - TAIL_MASS) quantile of the hop's
# equilibrium age; a k-hop convolution grid sums the per-hop extents.
TAIL_MASS = 1e-6
GRID_POINTS = 4096


@dataclass(frozen=True)
class Exponential:
    """Exponential inter-update times with the given rate."""

    rate: float

    def __post_init__(self):
        if not (self.rate > 0.0 and math.isfinite(self.rate)):
            raise ValueError("rate must be positive and finite")

    def mean(self) -> float:
        return 1.0 / self.rate

    def raw_moment(self, m: int) -> float:
        return math.factorial(m) / self.rate**m

    def survival(self, x: np.ndarray) -> np.ndarray:
        return np.where(x < 0.0, 1.0, np.exp(-self.rate * np.maximum(x, 0.0)))

    def sample(self, u: np.ndarray) -> np.ndarray:
        return -np.log1p(-u) / self.rate

    def equilibrium_variance(self) -> float:
        return 1.0 / self.rate**2

    def equilibrium_extent(self) -> float:
        return -math.log(TAIL_MASS) / self.rate


@dataclass(frozen=True)
class Uniform:
    """Inter-update times uniform on (0, high)."""

    high: float

    def __post_init__(self):
        if not (self.high > 0.0 and math.isfinite(self.high)):
            raise ValueError("upper endpoint must be positive and finite")

    def mean(self) -> float:
        return self.high / 2.0

    def raw_moment(self, m: int) -> float:
        return self.high**m / (m + 1.0)

    def survival(self, x: np.ndarray) -> np.ndarray:
        return np.clip(1.0 - np.asarray(x, dtype=float) / self.high, 0.0, 1.0)

    def sample(self, u: np.ndarray) -> np.ndarray:
        return self.high * u

    def equilibrium_variance(self) -> float:
        return self.high**2 / 18.0

    def equilibrium_extent(self) -> float:
        return self.high


@dataclass(frozen=True)
class Gamma:
    """Gamma(shape, scale) inter-update times."""

    shape: float
    scale: float

    def __post_init__(self):
        if not (self.shape > 0.0 and self.scale > 0.0):
            raise ValueError("shape and scale must be positive")

    def mean(self) -> float:
        return self.shape * self.scale

    def raw_moment(self, m: int) -> float:
        value = 1.0
        for i in range(m):
            value *= (self.shape + i) * self.scale
        return value

    def survival(self, x: np.ndarray) -> np.ndarray:
        return special.gammaincc(self.shape, np.maximum(x, 0.0) / self.scale)

    def sample(self, u: np.ndarray) -> np.ndarray:
        return special.gammaincinv(self.shape, u) * self.scale

    def equilibrium_variance(self) -> float:
        return self.scale**2 * (self.shape + 1.0) * (self.shape + 5.0) / 12.0

    def equilibrium_extent(self) -> float:
        # Age CDF: F_Z(z) = E[min(Y, z)] / E[Y] for Gamma(shape k, scale s):
        # E[min(Y, z)] = k s P(k+1, z/s) + z Q(k, z/s).
        k, s = self.shape, self.scale

        def age_cdf(z: float) -> float:
            return (
                k * s * special.gammainc(k + 1.0, z / s)
                + z * special.gammaincc(k, z / s)
            ) / (k * s)

        hi = s * float(special.gammainccinv(k, TAIL_MASS * 1e-3))
        while age_cdf(hi) < 1.0 - TAIL_MASS:
            hi *= 2.0
        return float(optimize.brentq(lambda z: age_cdf(z) - (1.0 - TAIL_MASS), 0.0, hi))


RenewalSpec = Exponential | Uniform | Gamma


@dataclass(frozen=True)
class SamplingNetwork:
    """Ordered hops of a sampling line; hop i feeds node i+1."""

    hops: tuple[RenewalSpec, ...]

    def __post_init__(self):
        if not self.hops:
            raise ValueError("a sampling network needs at least one hop")

    def __len__(self) -> int:
        return len(self.hops)


@dataclass(frozen=True)
class GridDensity:
    """Density samples on a uniform grid (values in 1/time units)."""

    grid: np.ndarray
    values: np.ndarray

    def mass(self) -> float:
        return float(np.trapezoid(self.values, self.grid))

    def mean(self) -> float:
        return float(np.trapezoid(self.grid * self.values, self.grid))

    def variance(self) -> float:
        m = self.mean()
        return float(np.trapezoid((self.grid - m) ** 2 * self.values, self.grid))


@dataclass(frozen=True)
class GaussianComparison:
    """Convolution density next to the moment-matched Gaussian."""

    convolution: GridDensity
    gaussian: GridDensity
    l1_distance: float


def renewal_age_moments(spec: RenewalSpec) -> tuple[float, float]:
    """(E[Z], E[Z^2]) of the equilibrium age: E[Y^2]/2E[Y] and E[Y^3]/3E[Y]."""
    ey = spec.raw_moment(1)
    return spec.raw_moment(2) / (2.0 * ey), spec.raw_moment(3) / (3.0 * ey)


def equilibrium_age_pdf(spec: RenewalSpec, grid: np.ndarray | None = None) -> GridDensity:
    """Density of the equilibrium renewal age Z: P(Y > z) / E[Y] pointwise."""
    if grid is None:
        grid = np.linspace(0.0, spec.equilibrium_extent(), GRID_POINTS)
    grid = np.asarray(grid, dtype=float)
    return GridDensity(grid=grid, values=spec.survival(grid) / spec.mean())


def _check_uniform_grid(grid: np.ndarray) -> float:
    steps = np.diff(grid)
    if grid.ndim != 1 or grid.shape[0] < 2 or np.any(steps <= 0.0):
        raise ValueError("grid must hold at least two strictly increasing points")
    h = float(steps[0])
    if np.any(np.abs(steps - h) > 1e-9 * h):
        raise ValueError("convolution requires a uniform grid")
    return h


def _trapezoid_convolve(f: np.ndarray, g: np.ndarray, h: float) -> np.ndarray:
    full = np.convolve(f, g)[: f.shape[0]]
    return h * (full - 0.5 * (f[0] * g + g[0] * f))


def node_age_pdf(network: SamplingNetwork, k: int, grid: np.ndarray | None = None) -> GridDensity:
    """Stationary age density at node k: convolution of its k hop ages."""
    if not (1 <= k <= len(network)):
        raise ValueError(f"node index must be in 1..{len(network)}, got {k}")
    suggested = float(sum(h.equilibrium_extent() for h in network.hops[:k]))
    if grid is None:
        grid = np.linspace(0.0, suggested, GRID_POINTS)
    grid = np.asarray(grid, dtype=float)
    h = _check_uniform_grid(grid)
    if grid[-1] < suggested * (1.0 - 1e-9):
        raise TruncationError(float(grid[-1]), suggested)
    values = network.hops[0].survival(grid) / network.hops[0].mean()
    for hop in network.hops[1:k]:
        values = _trapezoid_convolve(values, hop.survival(grid) / hop.mean(), h)
    return GridDensity(grid=grid, values=values)


def node_age_stats(network: SamplingNetwork, k: int) -> tuple[float, float]:
    """Exact (mean, variance) of the node-k age: independent sums over hops."""
    if not (1 <= k <= len(network)):
        raise ValueError(f"node index must be in 1..{len(network)}, got {k}")
    mean = float(sum(renewal_age_moments(h)[0] for h in network.hops[:k]))
    var = float(sum(h.equilibrium_variance() for h in network.hops[:k]))
    return mean, var


def gaussian_comparison(
    network: SamplingNetwork, k: int, grid: np.ndarray | None = None
) -> GaussianComparison:
    """Convolution density, the Gaussian of matched mean/variance, and their
    L1 distance over the grid (no limit statement is implied)."""
    conv = node_age_pdf(network, k, grid)
    mean, var = node_age_stats(network, k)
    g = conv.grid
    gauss = np.exp(-((g - mean) ** 2) / (2.0 * var)) / np.sqrt(2.0 * np.pi * var)
    l1 = float(np.trapezoid(np.abs(conv.values - gauss), g))
    return GaussianComparison(
        convolution=conv,
        gaussian=GridDensity(grid=g, values=gauss),
        l1_distance=l1,
    )


def density_bin_masses(density: GridDensity, edges: np.ndarray) -> np.ndarray:
    """Probability mass of each [edges[i], edges[i+1]) bin under the density
    (piecewise-linear interpolation of its cumulative)."""
    g, v = density.grid, density.values
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * (v[1:] + v[:-1]) * np.diff(g))])
    return np.diff(np.interp(edges, g, cdf))


@dataclass(frozen=True)
class NodeHistogram:
    """Time-weighted age histogram of one node (replication average)."""

    edges: np.ndarray
    masses: np.ndarray
    below: float
    above: float


@dataclass(frozen=True)
class SamplingSimResult:
    """Per-node estimates from the sample-path simulator."""

    node_means: np.ndarray
    node_mean_se: np.ndarray
    node_vars: np.ndarray
    node_var_se: np.ndarray
    histograms: tuple[NodeHistogram, ...]
    rep_means: np.ndarray = field(repr=False)
    rep_vars: np.ndarray = field(repr=False)


def _renewal_times(spec: RenewalSpec, t_end: float, seed: int) -> np.ndarray:
    """Delivery instants of one hop in (0, t_end), from counter stream ``seed``."""
    expected = t_end / spec.mean()
    chunk = max(64, int(1.2 * expected) + 16)
    start = 0
    last = 0.0
    parts = []
    while True:
        y = spec.sample(uniforms(seed, start, chunk))
        times = last + np.cumsum(y)
        parts.append(times)
        start += chunk
        last = float(times[-1])
        if last > t_end:
            break
        chunk = max(64, int(0.3 * expected) + 16)
    all_times = np.concatenate(parts)
    return all_times[all_times < t_end]


def _segment_stats(times: np.ndarray, vals: np.ndarray, t_end: float, warmup: float):
    """Clip a reset path to [warmup, t_end]; return segment start ages and
    durations."""
    seg_end = np.append(times[1:], t_end)
    start = np.maximum(times, warmup)
    keep = seg_end > start
    dur = seg_end[keep] - start[keep]
    ages = vals[keep] + (start[keep] - times[keep])
    return ages, dur


def _occupation_masses(ages, dur, edges, span):
    """Exact time fraction each age bin captures from linear segments."""
    ends = ages + dur
    sa = np.sort(ages)
    sb = np.sort(ends)
    ca = np.concatenate([[0.0], np.cumsum(sa)])
    cb = np.concatenate([[0.0], np.cumsum(sb)])

    def summed_min(sorted_vals, cum, e):
        i = np.searchsorted(sorted_vals, e, side="right")
        return cum[i] + e * (sorted_vals.shape[0] - i)

    cdf = np.array([summed_min(sb, cb, e) - summed_min(sa, ca, e) for e in edges])
    total = float(dur.sum())
    masses = np.diff(cdf) / span
    return masses, float(cdf[0] / span), float((total - cdf[-1]) / span)


def simulate_sampling_line(
    network: SamplingNetwork,
    t_end: float,
    seed: int,
    warmup: float | None = None,
    replications: int = 16,
    bin_edges: np.ndarray | None = None,
) -> SamplingSimResult:
    """Construct the hop-by-hop sample paths and reduce them exactly.

    Per hop, inter-update times are drawn i.i.d.; each delivery copies the
    upstream age (left limit) downstream, resolving the measure-zero tie of
    simultaneous events upstream-first.  Node 1 receives fresh updates.
    Paths start from all-zero ages; ``warmup`` (default 1% of ``t_end``)
    absorbs the initialization bias.  Deterministic under a fixed seed.
    """
    if t_end <= 0.0:
        raise ConfigError(f"t_end must be positive, got {t_end:g}")
    warmup = 0.01 * t_end if warmup is None else warmup
    if not (0.0 <= warmup < t_end):
        raise ConfigError(f"warmup {warmup:g} must lie in [0, t_end)")
    if replications < 1:
        raise ConfigError("at least one replication is required")
    n = len(network)
    span = t_end - warmup

    edges_per_node = []
    for k in range(1, n + 1):
        if bin_edges is not None:
            edges_per_node.append(np.asarray(bin_edges, dtype=float))
        else:
            extent = float(sum(h.equilibrium_extent() for h in network.hops[:k]))
            edges_per_node.append(np.linspace(0.0, extent, 129))

    rep_means = np.zeros((replications, n))
    rep_vars = np.zeros((replications, n))
    rep_hists = [np.zeros((replications, e.shape[0] - 1)) for e in edges_per_node]
    rep_tails = np.zeros((replications, n, 2))

    def run(r: int) -> None:
        prev_times = np.array([0.0])
        prev_vals = np.array([0.0])
        for i, hop in enumerate(network.hops):
            deliveries = _renewal_times(hop, t_end, stream_seed(seed, r, i))
            if i == 0:
                vals = np.zeros_like(deliveries)
            else:
                idx = np.searchsorted(prev_times, deliveries, side="left") - 1
                vals = prev_vals[idx] + (deliveries - prev_times[idx])
            times = np.concatenate([[0.0], deliveries])
            vals = np.concatenate([[0.0], vals])
            ages, dur = _segment_stats(times, vals, t_end, warmup)
            first = float((((ages + dur) ** 2 - ages**2) / 2.0).sum()) / span
            second = float((((ages + dur) ** 3 - ages**3) / 3.0).sum()) / span
            rep_means[r, i] = first
            rep_vars[r, i] = second - first * first
            masses, below, above = _occupation_masses(ages, dur, edges_per_node[i], span)
            rep_hists[i][r] = masses
            rep_tails[r, i] = (below, above)
            prev_times, prev_vals = times, vals

    run_replicated(run, replications)

    if replications > 1:
        mean_se = rep_means.std(axis=0, ddof=1) / np.sqrt(replications)
        var_se = rep_vars.std(axis=0, ddof=1) / np.sqrt(replications)
    else:
        mean_se = np.full(n, np.nan)
        var_se = np.full(n, np.nan)
    histograms = tuple(
        NodeHistogram(
            edges=edges_per_node[i],
            masses=rep_hists[i].mean(axis=0),
            below=float(rep_tails[:, i, 0].mean()),
            above=float(rep_tails[:, i, 1].mean()),
        )
        for i in range(n)
    )
    return SamplingSimResult(
        node_means=rep_means.mean(axis=0),
        node_mean_se=mean_se,
        node_vars=rep_vars.mean(axis=0),
        node_var_se=var_se,
        histograms=histograms,
        rep_means=rep_means,
        rep_vars=rep_vars,
    )
