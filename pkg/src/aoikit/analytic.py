"""Stationary moments, MGF, and transient trajectories of the age vector.

Everything here is a fixed point or an integral of one linear ODE system.
Writing v0 for the replicated stationary probabilities, vm for the order-m
weighted conditional moment row vector, and vs for its MGF counterpart, the
stationary equations are

    vm (D - R) = m * v(m-1)          seeded with v0,
    vs (D - R - s*I) = v0 @ Rhat,

and the transient system integrates the same right-hand sides with the
state probabilities evolving under the chain generator.  Moments are
obtained by iterated linear solves, never explicit inverse powers; the m!
factor emerges from the recursion.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import linalg
from .errors import (
    ConfigError,
    MgfRadiusError,
    ModelValidationError,
    SingularMatrixError,
    UnstableModelError,
)
from .model import BlockSystem, ShsModel, assemble_blocks, build_block_system, validate

# Entries of a moment solution below -NEGATIVITY_TOL are genuine negativity
# (instability); entries in [-NEGATIVITY_TOL, 0) are round-off and clamped.
NEGATIVITY_TOL = 1e-9
# Refuse MGF arguments within this relative distance of the radius.
RADIUS_GUARD = 1e-9


@dataclass(frozen=True)
class StationaryMoments:
    """Order-m stationary age moments, per state and aggregated.

    ``per_state[q]`` is the weighted conditional moment row for state q;
    ``aggregate`` sums the rows and equals E[x^m] componentwise.
    """

    order: int
    per_state: np.ndarray  # (num_states, age_dim)
    aggregate: np.ndarray  # (age_dim,)


@dataclass(frozen=True)
class MgfEvaluation:
    """Stationary MGF vector at one real argument ``s`` (< ``radius``)."""

    s: float
    per_state: np.ndarray  # (num_states, age_dim)
    aggregate: np.ndarray  # (age_dim,)
    radius: float


@dataclass(frozen=True)
class TransientTrajectory:
    """Fixed-step trajectories of state probabilities, moments, and MGF.

    ``moments_t[m]`` and ``mgf_t[s]`` have shape
    (len(times), num_states, age_dim).
    """

    times: np.ndarray
    pi_t: np.ndarray  # (len(times), num_states)
    moments_t: dict[int, np.ndarray]
    mgf_t: dict[float, np.ndarray]


def _prepare(model: ShsModel) -> tuple[np.ndarray, BlockSystem]:
    pi = linalg.stationary_distribution(model)
    return pi, build_block_system(model, pi)


def _moment_ladder(block: BlockSystem, m: int) -> list[np.ndarray]:
    """Solve the moment recursion up to order m; raises on instability."""
    dr = block.D - block.R
    ladder = []
    prev = block.pi_rep
    for k in range(1, m + 1):
        try:
            vk = linalg.solve_linear(dr, k * prev)
        except SingularMatrixError as exc:
            raise UnstableModelError(
                "no non-negative first-moment fixed point: the age balance "
                "system is singular"
            ) from exc
        low = vk.min()
        if low < -NEGATIVITY_TOL:
            if k == 1:
                raise UnstableModelError(
                    f"no non-negative first-moment fixed point: solution has "
                    f"entry {low:.3e}"
                )
            raise UnstableModelError(
                f"order-{k} moment solution has negative entry {low:.3e}"
            )
        vk = np.maximum(vk, 0.0)
        ladder.append(vk)
        prev = vk
    return ladder


def stationary_moments(model: ShsModel, m: int) -> list[StationaryMoments]:
    """Stationary age moments of orders 1..m.

    Requires an ergodic chain and a non-negative first-moment fixed point;
    otherwise raises ``NonErgodicError`` / ``UnstableModelError``.
    """
    if m < 1:
        raise ValueError("moment order must be at least 1")
    _, block = _prepare(model)
    n = model.age_dim
    results = []
    for k, vk in enumerate(_moment_ladder(block, m), start=1):
        per_state = vk.reshape(model.num_states, n)
        results.append(
            StationaryMoments(order=k, per_state=per_state, aggregate=per_state.sum(axis=0))
        )
    return results


def mgf_radius(model: ShsModel) -> float:
    """Radius s0 of the MGF region of convergence.

    Equals the negated spectral abscissa of R - D, where the resolvent
    ``D - R - s*I`` first becomes singular; positive for every stable model.
    """
    _, block = _prepare(model)
    _moment_ladder(block, 1)
    s0 = -linalg.spectral_abscissa(model)
    if s0 <= 0.0:
        raise UnstableModelError(
            f"no non-negative first-moment fixed point: spectral abscissa "
            f"{-s0:.3e} is not negative"
        )
    return s0


def stationary_mgf(model: ShsModel, s: float) -> MgfEvaluation:
    """Stationary MGF vector E[e^(s*x)] for s below the convergence radius.

    Non-positive s is always permitted (for stable models); s within
    ``RADIUS_GUARD`` (relative) of the radius is refused with
    ``MgfRadiusError`` rather than returning a near-pole value.
    """
    _, block = _prepare(model)
    s0 = mgf_radius(model)
    if s > 0.0 and s >= s0 * (1.0 - RADIUS_GUARD):
        raise MgfRadiusError(s, s0)
    size = block.D.shape[0]
    try:
        vs = linalg.solve_linear(
            block.D - block.R - s * np.eye(size), block.pi_rep @ block.Rhat
        )
    except SingularMatrixError as exc:
        raise MgfRadiusError(s, s0) from exc
    per_state = vs.reshape(model.num_states, model.age_dim)
    return MgfEvaluation(s=s, per_state=per_state, aggregate=per_state.sum(axis=0), radius=s0)


_DIFF_STENCILS: dict[int, tuple[tuple[int, ...], tuple[float, ...]]] = {
    1: ((-1, 1), (-0.5, 0.5)),
    2: ((-1, 0, 1), (1.0, -2.0, 1.0)),
    3: ((-2, -1, 1, 2), (-0.5, 1.0, -1.0, 0.5)),
    4: ((-2, -1, 0, 1, 2), (1.0, -4.0, 6.0, -4.0, 1.0)),
}


def moments_via_mgf(model: ShsModel, m: int) -> np.ndarray:
    """Order-m moments by central differences of the MGF at s = 0.

    Consistency oracle for :func:`stationary_moments`, not the primary
    moment path.  The step is 1e-4 of the convergence radius, so round-off
    makes orders above ~3 progressively noisier.
    """
    if m not in _DIFF_STENCILS:
        raise ValueError(f"unsupported derivative order {m}; expected 1..4")
    h = 1e-4 * mgf_radius(model)
    offsets, weights = _DIFF_STENCILS[m]
    acc = np.zeros(model.age_dim)
    for k, w in zip(offsets, weights):
        if k == 0:
            acc += w * np.ones(model.age_dim)
        else:
            acc += w * stationary_mgf(model, k * h).aggregate
    return acc / h**m


def transient(
    model: ShsModel,
    t_end: float,
    x0: np.ndarray | None = None,
    state_probs: np.ndarray | None = None,
    orders: tuple[int, ...] = (),
    s_values: tuple[float, ...] = (),
    init_moments: dict[int, np.ndarray] | None = None,
    init_mgf: dict[float, np.ndarray] | None = None,
) -> TransientTrajectory:
    """Integrate the coupled linear ODE system with classical fixed-step RK4.

    Initial ages ``x0`` are deterministic (default zero) and the initial
    state distribution defaults to a point mass on state 0.  A random
    initial age law is supplied by the caller as its expectation
    functionals: ``init_moments[m]`` / ``init_mgf[s]`` (shape
    ``(num_states, age_dim)``) override the values derived from ``x0``.

    The step is ``min(0.01 / d_max, t_end / 1000)``, which keeps the
    stiffest state resolved and runs bit-reproducibly.
    """
    violations = validate(model)
    if violations:
        raise ModelValidationError(violations)
    if t_end <= 0.0:
        raise ConfigError(f"t_end must be positive, got {t_end:g}")
    nq, n = model.num_states, model.age_dim
    x0 = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float)
    if x0.shape != (n,):
        raise ValueError(f"x0 has shape {x0.shape}, expected ({n},)")
    if state_probs is None:
        state_probs = np.zeros(nq)
        state_probs[0] = 1.0
    else:
        state_probs = np.asarray(state_probs, dtype=float)
        if state_probs.shape != (nq,):
            raise ValueError(f"state distribution has shape {state_probs.shape}")
        if abs(state_probs.sum() - 1.0) > 1e-12:
            raise ValueError("initial state distribution must sum to 1")

    gen = linalg.generator_matrix(model)
    d, D, R, Rhat = assemble_blocks(model)
    rd = R - D
    size = nq * n
    max_order = max(orders, default=0)
    s_list = list(s_values)

    h = min(0.01 / d.max(), t_end / 1000.0)
    if h < 1e-12:
        raise ConfigError(f"integration step {h:.3e} underflows; shorten t_end")
    n_full = int(np.floor(t_end / h + 1e-9))
    remainder = t_end - n_full * h
    has_tail = remainder > 1e-12 * t_end
    n_steps = n_full + (1 if has_tail else 0)

    # One flat linear system z' = z @ big over
    # z = [pi | v1 .. v_maxorder | vs_1 .. vs_K].
    dim = nq + (max_order + len(s_list)) * size
    big = np.zeros((dim, dim))
    big[:nq, :nq] = gen
    rep = np.zeros((nq, size))  # replicates state probabilities blockwise
    for q in range(nq):
        rep[q, q * n:(q + 1) * n] = 1.0
    off = nq
    for k in range(1, max_order + 1):
        cols = slice(off, off + size)
        big[cols, cols] += rd
        if k == 1:
            big[:nq, cols] += rep
        else:
            big[off - size:off, cols] += k * np.eye(size)
        off += size
    for s in s_list:
        cols = slice(off, off + size)
        big[cols, cols] += rd + s * np.eye(size)
        big[:nq, cols] += rep @ Rhat
        off += size

    z = np.empty(dim)
    z[:nq] = state_probs
    off = nq
    for k in range(1, max_order + 1):
        block = np.repeat(state_probs, n) * np.tile(x0**k, nq)
        if init_moments is not None and k in init_moments:
            block = np.asarray(init_moments[k], dtype=float).reshape(size)
        z[off:off + size] = block
        off += size
    for s in s_list:
        block = np.repeat(state_probs, n) * np.tile(np.exp(s * x0), nq)
        if init_mgf is not None and s in init_mgf:
            block = np.asarray(init_mgf[s], dtype=float).reshape(size)
        z[off:off + size] = block
        off += size

    times = np.empty(n_steps + 1)
    times[: n_full + 1] = h * np.arange(n_full + 1)
    times[-1] = t_end
    history = np.empty((n_steps + 1, dim))
    history[0] = z
    for idx in range(n_steps):
        dt = h if idx < n_full else remainder
        k1 = z @ big
        k2 = (z + 0.5 * dt * k1) @ big
        k3 = (z + 0.5 * dt * k2) @ big
        k4 = (z + dt * k3) @ big
        z = z + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        history[idx + 1] = z

    pi_t = history[:, :nq]
    moments_out = {}
    for i, m in enumerate(range(1, max_order + 1)):
        block = history[:, nq + i * size: nq + (i + 1) * size]
        if m in orders:
            moments_out[m] = block.reshape(n_steps + 1, nq, n)
    mgf_out = {}
    base = nq + max_order * size
    for i, s in enumerate(s_list):
        block = history[:, base + i * size: base + (i + 1) * size]
        mgf_out[s] = block.reshape(n_steps + 1, nq, n)
    return TransientTrajectory(times=times, pi_t=pi_t, moments_t=moments_out, mgf_t=mgf_out)
