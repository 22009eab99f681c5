import numpy as np
import pytest
from hypothesis import given, strategies as st

from aoikit import (
    FRESH,
    IDENTITY,
    AgeResetMap,
    Copy,
    ModelValidationError,
    ShsModel,
    Transition,
    assignment_matrices,
    build_block_system,
    mm11_abandonment,
    model_from_dict,
    model_to_dict,
    preemptive_line,
    validate,
)
from aoikit.model import departure_rates


@st.composite
def reset_maps(draw, n):
    entries = []
    for _ in range(n):
        kind = draw(st.integers(0, 2))
        if kind == 0:
            entries.append(IDENTITY)
        elif kind == 1:
            entries.append(FRESH)
        else:
            entries.append(Copy(draw(st.integers(1, n))))
    return AgeResetMap(tuple(entries))


@st.composite
def shs_models(draw):
    nq = draw(st.integers(1, 4))
    n = draw(st.integers(1, 3))
    rates = st.floats(0.1, 5.0)
    transitions = []
    # ring keeps every chain irreducible
    for q in range(nq):
        transitions.append(Transition(q, (q + 1) % nq, draw(rates), draw(reset_maps(n))))
    for _ in range(draw(st.integers(0, 4))):
        transitions.append(
            Transition(
                draw(st.integers(0, nq - 1)),
                draw(st.integers(0, nq - 1)),
                draw(rates),
                draw(reset_maps(n)),
            )
        )
    return ShsModel(num_states=nq, age_dim=n, transitions=tuple(transitions))


class TestAssignmentMatrices:
    def test_all_identity(self):
        a, ahat = assignment_matrices(AgeResetMap.identity(2), 2)
        assert np.array_equal(a, np.eye(2))
        assert np.array_equal(ahat, np.zeros((2, 2)))

    def test_blocking_queue_arrival(self):
        # fresh update enters service: component 1 resets, monitor keeps its age
        a, ahat = assignment_matrices(AgeResetMap.of(FRESH, IDENTITY), 2)
        assert np.array_equal(a, [[0, 0], [0, 1]])
        assert np.array_equal(ahat, [[1, 0], [0, 0]])

    def test_blocking_queue_service(self):
        # service completion: monitor copies the served update's age
        a, ahat = assignment_matrices(AgeResetMap.of(IDENTITY, Copy(1)), 2)
        assert np.array_equal(a, [[1, 1], [0, 0]])
        assert np.array_equal(ahat, np.zeros((2, 2)))

    @given(st.integers(1, 4).flatmap(lambda n: st.tuples(st.just(n), reset_maps(n))))
    def test_column_rule(self, n_and_reset):
        n, reset = n_and_reset
        a, ahat = assignment_matrices(reset, n)
        assert np.all(a.sum(axis=0) <= 1.0)
        for j in range(n):
            assert (a[:, j].sum() == 0.0) == (ahat[j, j] == 1.0)
        assert np.array_equal(ahat, np.diag(np.diag(ahat)))


class TestValidate:
    def test_canonical_builder_is_valid(self):
        assert validate(mm11_abandonment(1, 1, 1)) == []

    def test_state_without_departure(self):
        model = ShsModel(num_states=1, age_dim=1, transitions=())
        assert validate(model) == ["state 0 has no outgoing transition"]

    def test_negative_rate(self):
        model = ShsModel(1, 1, (Transition(0, 0, -1.0, AgeResetMap.identity(1)),))
        assert validate(model) == ["transition 0: rate must be finite and strictly positive"]

    def test_wrong_reset_length_and_bad_target(self):
        model = ShsModel(1, 2, (Transition(0, 3, 1.0, AgeResetMap.identity(1)),))
        found = validate(model)
        assert any("target state 3" in v for v in found)
        assert any("reset map has length 1" in v for v in found)

    @given(shs_models())
    def test_generated_models_valid(self, model):
        assert validate(model) == []


class TestBuilders:
    def test_mm11_structure(self):
        model = mm11_abandonment(1.0, 1.0, 1.0)
        assert model.num_states == 2 and model.age_dim == 2
        assert [(t.source, t.target, t.rate) for t in model.transitions] == [
            (0, 1, 1.0), (1, 0, 1.0), (1, 0, 1.0),
        ]
        assert model.transitions[1].reset == AgeResetMap.of(IDENTITY, Copy(1))
        assert model.transitions[2].reset == AgeResetMap.identity(2)

    def test_mm11_alpha_zero_drops_abandonment(self):
        assert len(mm11_abandonment(1, 1, 0).transitions) == 2

    def test_mm11_rejects_bad_rates(self):
        with pytest.raises(ValueError):
            mm11_abandonment(0.0, 1.0)
        with pytest.raises(ValueError):
            mm11_abandonment(1.0, 1.0, -0.5)

    def test_line_single_hop(self):
        model = preemptive_line([2.0])
        assert model.num_states == 1 and model.age_dim == 1
        assert model.transitions[0].reset == AgeResetMap.of(FRESH)

    def test_line_reset_pattern(self):
        model = preemptive_line([1.0, 2.0])
        assert model.transitions[0].rate == 1.0
        assert model.transitions[0].reset == AgeResetMap.of(FRESH, IDENTITY)
        assert model.transitions[1].rate == 2.0
        assert model.transitions[1].reset == AgeResetMap.of(IDENTITY, Copy(1))

    def test_line_three_hops_rows(self):
        model = preemptive_line([1.0, 1.0, 1.0])
        resets = [t.reset.assignments for t in model.transitions]
        assert resets[0] == (FRESH, IDENTITY, IDENTITY)
        assert resets[1] == (IDENTITY, Copy(1), IDENTITY)
        assert resets[2] == (IDENTITY, IDENTITY, Copy(2))

    def test_line_rejects_bad_input(self):
        with pytest.raises(ValueError):
            preemptive_line([])
        with pytest.raises(ValueError):
            preemptive_line([1.0, 0.0])

    @given(shs_models())
    def test_roundtrip_builders_keep_validity(self, model):
        assert validate(model_from_dict(model_to_dict(model))) == []


class TestBlockSystem:
    def test_line_two_hops(self):
        mu0, mu1 = 1.5, 2.5
        model = preemptive_line([mu0, mu1])
        block = build_block_system(model, np.ones(1))
        d0 = mu0 + mu1
        assert np.allclose(block.D, d0 * np.eye(2))
        assert np.array_equal(block.R, [[d0 - mu0, mu1], [0.0, d0 - mu1]])
        assert np.array_equal(block.Rhat, np.diag([mu0, 0.0]))
        assert np.array_equal(block.pi_rep, [1.0, 1.0])

    def test_single_state_all_fresh(self):
        mu = 3.0
        model = ShsModel(1, 2, (Transition(0, 0, mu, AgeResetMap.of(FRESH, FRESH)),))
        block = build_block_system(model, np.ones(1))
        assert np.array_equal(block.D, mu * np.eye(2))
        assert np.array_equal(block.R, np.zeros((2, 2)))
        assert np.array_equal(block.Rhat, mu * np.eye(2))

    def test_mm11_blocks(self):
        lam, mu, alpha = 2.0, 3.0, 0.5
        model = mm11_abandonment(lam, mu, alpha)
        pi = np.array([(mu + alpha), lam]) / (lam + mu + alpha)
        block = build_block_system(model, pi)
        a1 = np.array([[0.0, 0.0], [0.0, 1.0]])
        a2 = np.array([[1.0, 1.0], [0.0, 0.0]])
        assert np.array_equal(block.R[0:2, 2:4], lam * a1)
        assert np.array_equal(block.R[2:4, 0:2], mu * a2 + alpha * np.eye(2))
        assert np.array_equal(block.R[0:2, 0:2], np.zeros((2, 2)))
        assert np.array_equal(block.d, [lam, mu + alpha])
        assert np.array_equal(np.diag(block.D), [lam, lam, mu + alpha, mu + alpha])

    def test_rejects_invalid_model(self):
        bad = ShsModel(1, 1, ())
        with pytest.raises(ModelValidationError):
            build_block_system(bad, np.ones(1))

    def test_rejects_non_distribution(self):
        with pytest.raises(ValueError):
            build_block_system(preemptive_line([1.0]), np.array([0.7]))

    @given(shs_models())
    def test_block_residuals_exact(self, model):
        nq, n = model.num_states, model.age_dim
        pi = np.full(nq, 1.0 / nq)
        pi[-1] = 1.0 - pi[:-1].sum()
        block = build_block_system(model, pi)
        r_ref = np.zeros_like(block.R)
        rhat_ref = np.zeros_like(block.Rhat)
        for tr in model.transitions:
            a, ahat = assignment_matrices(tr.reset, n)
            rows = slice(tr.source * n, (tr.source + 1) * n)
            cols = slice(tr.target * n, (tr.target + 1) * n)
            r_ref[rows, cols] += tr.rate * a
            rhat_ref[rows, cols] += tr.rate * ahat
        assert np.abs(block.R - r_ref).max() == 0.0
        assert np.abs(block.Rhat - rhat_ref).max() == 0.0
        assert np.all(block.R >= 0.0) and np.all(block.Rhat >= 0.0)

    @given(st.lists(st.floats(0.2, 5.0), min_size=1, max_size=5))
    def test_line_upper_triangular(self, mus):
        model = preemptive_line(mus)
        block = build_block_system(model, np.ones(1))
        dr = block.D - block.R
        assert np.allclose(np.tril(dr, -1), 0.0)
        assert np.allclose(np.diag(dr), mus)


class TestWireFormat:
    def test_roundtrip_equality(self):
        model = mm11_abandonment(1.0, 2.0, 0.25)
        assert model_from_dict(model_to_dict(model)) == model

    def test_unknown_top_level_key(self):
        doc = model_to_dict(preemptive_line([1.0]))
        doc["extra"] = 1
        with pytest.raises(ValueError, match="unknown key"):
            model_from_dict(doc)

    def test_unknown_transition_key(self):
        doc = model_to_dict(preemptive_line([1.0]))
        doc["transitions"][0]["speed"] = 2
        with pytest.raises(ValueError, match="transition 0"):
            model_from_dict(doc)

    def test_copy_entry_must_be_integer(self):
        doc = model_to_dict(mm11_abandonment(1, 1, 0))
        doc["transitions"][1]["reset"][1] = {"copy": "1"}
        with pytest.raises(ValueError, match="copy"):
            model_from_dict(doc)

    def test_bad_reset_entry(self):
        doc = model_to_dict(preemptive_line([1.0]))
        doc["transitions"][0]["reset"] = ["zero"]
        with pytest.raises(ValueError, match="reset entry"):
            model_from_dict(doc)


def test_departure_rates_sum_parallel_edges():
    model = mm11_abandonment(1.0, 2.0, 0.5)
    assert np.array_equal(departure_rates(model), [1.0, 2.5])
