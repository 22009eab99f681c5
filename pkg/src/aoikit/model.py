"""Age-of-information models on finite-state Markov networks.

A model couples a finite continuous-time Markov chain (the network state)
with a vector of age clocks that grow at unit rate and are reset linearly
whenever the chain jumps.  Each transition carries an age reset map that
assigns every post-jump age component either the value of some pre-jump
component, zero (a fresh update), or its own previous value.

Reset maps are stored symbolically as ``Identity`` / ``Fresh`` / ``Copy(i)``
entries rather than as raw matrices, which makes the defining constraint of
an age assignment matrix (at most one 1 per column) unrepresentable instead
of merely checked.  States are dense integer indices ``0 .. num_states-1``
and transitions are labeled by their position in the transition list.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import ModelValidationError


@dataclass(frozen=True)
class Identity:
    """Post-jump component keeps its pre-jump value."""


@dataclass(frozen=True)
class Fresh:
    """Post-jump component is reset to age zero."""


@dataclass(frozen=True)
class Copy:
    """Post-jump component takes the pre-jump value of component ``source``
    (1-based)."""

    source: int


ResetEntry = Union[Identity, Fresh, Copy]

IDENTITY = Identity()
FRESH = Fresh()


@dataclass(frozen=True)
class AgeResetMap:
    """Symbolic reset rule for every age component, applied at a transition."""

    assignments: tuple[ResetEntry, ...]

    def __len__(self) -> int:
        return len(self.assignments)

    @classmethod
    def identity(cls, n: int) -> "AgeResetMap":
        return cls(tuple(IDENTITY for _ in range(n)))

    @classmethod
    def of(cls, *entries: ResetEntry) -> "AgeResetMap":
        return cls(tuple(entries))


@dataclass(frozen=True)
class Transition:
    """Directed jump of the discrete chain with its age reset map.

    ``source``/``target`` are state indices; self-transitions and parallel
    transitions between the same state pair are allowed.  The transition
    label is its position in ``ShsModel.transitions``.
    """

    source: int
    target: int
    rate: float
    reset: AgeResetMap


@dataclass(frozen=True)
class ShsModel:
    """Finite-state chain plus age reset maps; immutable once built."""

    num_states: int
    age_dim: int
    transitions: tuple[Transition, ...]


@dataclass(frozen=True)
class BlockSystem:
    """Assembled block matrices of size ``age_dim * num_states``.

    ``D`` is block diagonal with block q equal to ``d[q] * I``; block (i, j)
    of ``R`` sums ``rate * A`` over transitions i -> j and block (i, j) of
    ``Rhat`` sums ``rate * Ahat``; ``pi_rep`` replicates each stationary
    probability across the ``age_dim`` slots of its state block.
    """

    d: np.ndarray
    D: np.ndarray
    R: np.ndarray
    Rhat: np.ndarray
    pi_rep: np.ndarray


def validate(model: ShsModel) -> list[str]:
    """Return every violated invariant, with its location; empty means valid."""
    violations: list[str] = []
    if model.num_states < 1:
        violations.append("model must have at least one state")
    if model.age_dim < 1:
        violations.append("age dimension must be at least 1")
    seen_outgoing = np.zeros(max(model.num_states, 0), dtype=bool)
    for l, tr in enumerate(model.transitions):
        if not (0 <= tr.source < model.num_states):
            violations.append(f"transition {l}: source state {tr.source} out of range")
        else:
            seen_outgoing[tr.source] = True
        if not (0 <= tr.target < model.num_states):
            violations.append(f"transition {l}: target state {tr.target} out of range")
        if not (np.isfinite(tr.rate) and tr.rate > 0.0):
            violations.append(f"transition {l}: rate must be finite and strictly positive")
        if len(tr.reset) != model.age_dim:
            violations.append(
                f"transition {l}: reset map has length {len(tr.reset)}, "
                f"expected {model.age_dim}"
            )
        for j, entry in enumerate(tr.reset.assignments):
            if isinstance(entry, Copy) and not (1 <= entry.source <= model.age_dim):
                violations.append(
                    f"transition {l}: reset component {j + 1} copies from "
                    f"out-of-range component {entry.source}"
                )
    for q in range(model.num_states):
        if not seen_outgoing[q]:
            violations.append(f"state {q} has no outgoing transition")
    return violations


def assignment_matrices(reset: AgeResetMap, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Binary age assignment matrix A and its diagonal companion Ahat.

    Column j of A holds the single 1 selecting the pre-jump component that
    post-jump component j inherits; an all-zero column marks a fresh reset
    and is flagged by a 1 at (j, j) of Ahat.
    """
    if len(reset) != n:
        raise ValueError(f"reset map has length {len(reset)}, expected {n}")
    a = np.zeros((n, n))
    ahat = np.zeros((n, n))
    for j, entry in enumerate(reset.assignments):
        if isinstance(entry, Identity):
            a[j, j] = 1.0
        elif isinstance(entry, Copy):
            a[entry.source - 1, j] = 1.0
        else:
            ahat[j, j] = 1.0
    return a, ahat


def departure_rates(model: ShsModel) -> np.ndarray:
    """Total outgoing rate per state (self-transitions included)."""
    d = np.zeros(model.num_states)
    for tr in model.transitions:
        d[tr.source] += tr.rate
    return d


def assemble_blocks(
    model: ShsModel,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Assemble (d, D, R, Rhat) for a model assumed valid."""
    n = model.age_dim
    size = n * model.num_states
    d = departure_rates(model)
    D = np.zeros((size, size))
    for q in range(model.num_states):
        block = slice(q * n, (q + 1) * n)
        D[block, block] = d[q] * np.eye(n)
    R = np.zeros((size, size))
    Rhat = np.zeros((size, size))
    for tr in model.transitions:
        a, ahat = assignment_matrices(tr.reset, n)
        rows = slice(tr.source * n, (tr.source + 1) * n)
        cols = slice(tr.target * n, (tr.target + 1) * n)
        R[rows, cols] += tr.rate * a
        Rhat[rows, cols] += tr.rate * ahat
    return d, D, R, Rhat


def build_block_system(model: ShsModel, pi: np.ndarray) -> BlockSystem:
    """Assemble D, R, Rhat and the replicated stationary vector.

    Pure function of the model and ``pi``; raises ``ModelValidationError``
    when the model breaks a type invariant, ``ValueError`` when ``pi`` is
    not a distribution over the states.
    """
    violations = validate(model)
    if violations:
        raise ModelValidationError(violations)
    pi = np.asarray(pi, dtype=float)
    if pi.shape != (model.num_states,):
        raise ValueError(f"pi has shape {pi.shape}, expected ({model.num_states},)")
    if abs(pi.sum() - 1.0) > 1e-9:
        raise ValueError(f"pi sums to {pi.sum():.12g}, expected 1")
    d, D, R, Rhat = assemble_blocks(model)
    pi_rep = np.repeat(pi, model.age_dim)
    return BlockSystem(d=d, D=D, R=R, Rhat=Rhat, pi_rep=pi_rep)


def mm11_abandonment(lam: float, mu: float, alpha: float = 0.0) -> ShsModel:
    """Single-server blocking queue whose update in service can be abandoned.

    Updates arrive at rate ``lam`` and are blocked while one is in service;
    service completes at rate ``mu`` and an update in service is discarded
    at rate ``alpha``.  Age component 1 tracks updates entering service,
    component 2 the destination monitor.  ``alpha = 0`` drops the
    abandonment transition entirely (rates must be strictly positive).
    """
    if not (lam > 0.0 and mu > 0.0):
        raise ValueError("arrival and service rates must be strictly positive")
    if alpha < 0.0:
        raise ValueError("abandonment rate must be non-negative")
    transitions = [
        Transition(0, 1, lam, AgeResetMap.of(FRESH, IDENTITY)),
        Transition(1, 0, mu, AgeResetMap.of(IDENTITY, Copy(1))),
    ]
    if alpha > 0.0:
        transitions.append(Transition(1, 0, alpha, AgeResetMap.identity(2)))
    return ShsModel(num_states=2, age_dim=2, transitions=tuple(transitions))


def preemptive_line(mus: list[float] | tuple[float, ...]) -> ShsModel:
    """Tandem of preemptive memoryless servers, collapsed to one state.

    With every node perpetually serving (departed updates are replayed as
    phantom copies), the idle/busy bookkeeping disappears: hop ``l`` fires
    at rate ``mus[l]`` and copies the age at node ``l`` onto node ``l+1``,
    while hop 0 delivers fresh updates to node 1.
    """
    mus = tuple(float(m) for m in mus)
    if not mus:
        raise ValueError("at least one service rate is required")
    if any(m <= 0.0 for m in mus):
        raise ValueError("service rates must be strictly positive")
    n = len(mus)
    transitions = []
    for l, mu in enumerate(mus):
        entries: list[ResetEntry] = [IDENTITY] * n
        entries[l] = FRESH if l == 0 else Copy(l)
        transitions.append(Transition(0, 0, mu, AgeResetMap(tuple(entries))))
    return ShsModel(num_states=1, age_dim=n, transitions=tuple(transitions))


# --- JSON wire format ----------------------------------------------------
#
# {"num_states": 2, "age_dim": 2,
#  "transitions": [{"from": 0, "to": 1, "rate": 1.0,
#                   "reset": ["fresh", "id"]}, ...]}
#
# Reset entries are "id", "fresh", or {"copy": i} with 1-based i.  Parsers
# reject unknown keys at every level.


def _reject_unknown(doc: dict, allowed: set[str], where: str) -> None:
    unknown = set(doc) - allowed
    if unknown:
        raise ValueError(f"{where}: unknown key(s) {sorted(unknown)}")


def _entry_from_json(raw, where: str) -> ResetEntry:
    if raw == "id":
        return IDENTITY
    if raw == "fresh":
        return FRESH
    if isinstance(raw, dict):
        _reject_unknown(raw, {"copy"}, where)
        src = raw.get("copy")
        if not isinstance(src, int) or isinstance(src, bool):
            raise ValueError(f"{where}: 'copy' must be a 1-based integer index")
        return Copy(src)
    raise ValueError(f"{where}: reset entry must be 'id', 'fresh', or {{'copy': i}}")


def _entry_to_json(entry: ResetEntry):
    if isinstance(entry, Identity):
        return "id"
    if isinstance(entry, Fresh):
        return "fresh"
    return {"copy": entry.source}


def model_from_dict(doc: dict) -> ShsModel:
    """Parse the model wire format; strict about keys and types."""
    if not isinstance(doc, dict):
        raise ValueError("model document must be a JSON object")
    _reject_unknown(doc, {"num_states", "age_dim", "transitions"}, "model")
    for key in ("num_states", "age_dim", "transitions"):
        if key not in doc:
            raise ValueError(f"model: missing key '{key}'")
    num_states, age_dim = doc["num_states"], doc["age_dim"]
    if not isinstance(num_states, int) or isinstance(num_states, bool):
        raise ValueError("model: 'num_states' must be an integer")
    if not isinstance(age_dim, int) or isinstance(age_dim, bool):
        raise ValueError("model: 'age_dim' must be an integer")
    if not isinstance(doc["transitions"], list):
        raise ValueError("model: 'transitions' must be an array")
    transitions = []
    for l, item in enumerate(doc["transitions"]):
        where = f"transition {l}"
        if not isinstance(item, dict):
            raise ValueError(f"{where}: must be an object")
        _reject_unknown(item, {"from", "to", "rate", "reset"}, where)
        for key in ("from", "to", "rate", "reset"):
            if key not in item:
                raise ValueError(f"{where}: missing key '{key}'")
        if not isinstance(item["rate"], (int, float)) or isinstance(item["rate"], bool):
            raise ValueError(f"{where}: 'rate' must be a number")
        if not isinstance(item["reset"], list):
            raise ValueError(f"{where}: 'reset' must be an array")
        entries = tuple(
            _entry_from_json(raw, f"{where}, reset component {j + 1}")
            for j, raw in enumerate(item["reset"])
        )
        transitions.append(
            Transition(item["from"], item["to"], float(item["rate"]), AgeResetMap(entries))
        )
    return ShsModel(num_states=num_states, age_dim=age_dim, transitions=tuple(transitions))


def model_to_dict(model: ShsModel) -> dict:
    """Inverse of :func:`model_from_dict`."""
    return {
        "num_states": model.num_states,
        "age_dim": model.age_dim,
        "transitions": [
            {
                "from": tr.source,
                "to": tr.target,
                "rate": tr.rate,
                "reset": [_entry_to_json(e) for e in tr.reset.assignments],
            }
            for tr in model.transitions
        ],
    }
