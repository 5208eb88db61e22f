import itertools
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tracegibbs.errors import InvalidStateError, ModelFormatError
from tracegibbs.models import (IsingModel, SiteSpace, TableModel, VotingModel,
                               conditional_weights, dumps_model, eval_hamiltonian,
                               fig3_voting_model, load_model, model_from_dict, save_model,
                               shifted_hamiltonian)
from tracegibbs.oracle import gibbs_distribution


def test_ising_all_up():
    assert eval_hamiltonian(IsingModel(2), (1, 1, 1, 1)) == -4


def test_ising_alternating_cycle():
    # row-major 2x2 sites 0 1 / 2 3; the 4-cycle is 0-1-3-2
    state = [0] * 4
    for pos, s in zip((0, 1, 3, 2), (1, -1, 1, -1)):
        state[pos] = s
    assert eval_hamiltonian(IsingModel(2), state) == 0


def test_voting_all_zero():
    assert eval_hamiltonian(fig3_voting_model(), (1,) + (0,) * 6) == 0


def test_invalid_state_dimension():
    with pytest.raises(InvalidStateError):
        eval_hamiltonian(IsingModel(2), (1, 1, 1))
    with pytest.raises(InvalidStateError):
        eval_hamiltonian(IsingModel(2), (1, 1, 1, 0))


@pytest.mark.parametrize("side", [1, 2, 3, 4, 5])
def test_ising_edge_count(side):
    m = IsingModel(side)
    assert len(m.edges) == 2 * side * (side - 1)
    adj = m.adjacency()
    for i, nb in enumerate(adj):
        assert i not in nb
        for j in nb:
            assert i in adj[j]


@pytest.mark.parametrize("side", [2, 3, 4])
def test_ising_bounds_by_enumeration(side):
    m = IsingModel(side)
    e = m.energies()
    assert (e.min(), e.max()) == m.energy_bounds() == (-len(m.edges), 0.0)


def test_ising_energies_match_brute(ising3_energies):
    np.testing.assert_array_equal(IsingModel(3).energies(), ising3_energies)


def test_shift_ising2():
    sh = shifted_hamiltonian(IsingModel(2))
    assert sh.offset == 4
    assert sorted(set(sh.energies().tolist())) == [0, 2, 4]
    assert (sh.h_min, sh.h_max) == (0.0, 4.0)


def test_shift_constant():
    sh = shifted_hamiltonian(TableModel([2, 2], [5.0] * 4))
    assert sh.offset == -5
    assert np.all(sh.energies() == 0)


def test_shift_voting_matches_brute():
    m = fig3_voting_model()
    # independent brute force over the 2 * 2^6 states
    vals = []
    for q in (-1, 1):
        for t in itertools.product((0, 1), repeat=3):
            for f in itertools.product((0, 1), repeat=3):
                h = (0.9 * q * max(t) - 0.9 * q * max(f)
                     + sum(w * v for w, v in zip((0.2, 0.5, 0.1), t))
                     + sum(w * v for w, v in zip((-0.8, -0.2, -0.9), f)))
                vals.append(h)
    assert len(vals) == 128
    sh = shifted_hamiltonian(m)
    assert sh.offset == pytest.approx(-min(vals), abs=1e-12)
    assert sh.h_max == pytest.approx(max(vals) - min(vals), abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 3), st.floats(-1, 1), st.lists(st.floats(-1, 1), min_size=6, max_size=6))
def test_voting_analytic_bounds(n, w, ws):
    m = VotingModel(n, w, ws[:n], ws[3:3 + n])
    e = m.energies()
    lo, hi = m.energy_bounds()
    assert lo == pytest.approx(e.min(), abs=1e-12)
    assert hi == pytest.approx(e.max(), abs=1e-12)


def test_voting_weight_range():
    with pytest.raises(ValueError):
        VotingModel(1, 1.5, [0.0], [0.0])


@pytest.mark.parametrize("beta", [0.0, 0.05, 1.3])
def test_shift_preserves_gibbs_law(beta):
    m = IsingModel(3)
    sh = shifted_hamiltonian(m)
    p_raw = gibbs_distribution(m, beta)
    w = np.exp(-beta * sh.energies())
    np.testing.assert_allclose(w / w.sum(), p_raw, rtol=0, atol=1e-12)


def test_conditional_both_neighbours_up():
    # corner site 0 of 2x2 has neighbours 1 and 2
    p = conditional_weights(IsingModel(2), (1, 1, 1, -1), 0, 0.05)
    assert p[1] == pytest.approx(math.exp(0.1) / (math.exp(0.1) + 1), abs=1e-12)
    assert p.sum() == pytest.approx(1.0, abs=1e-12)


def test_conditional_beta_zero_uniform():
    p = conditional_weights(fig3_voting_model(), (1, 0, 1, 0, 0, 1, 1), 3, 0.0)
    np.testing.assert_allclose(p, [0.5, 0.5])


def test_conditional_single_site_is_marginal():
    m = TableModel([3], [0.0, 1.0, 2.5])
    np.testing.assert_allclose(conditional_weights(m, (1,), 0, 0.7),
                               gibbs_distribution(m, 0.7), atol=1e-12)


def test_conditional_matches_enumeration():
    m = fig3_voting_model()
    rng = np.random.default_rng(3)
    for _ in range(20):
        x = rng.integers(0, 2, size=7)
        labels = m.space.to_labels(x)
        site = int(rng.integers(0, 7))
        e = []
        for v in range(2):
            y = x.copy()
            y[site] = v
            e.append(m.energy(m.space.to_labels(y)))
        w = np.exp(-0.8 * np.array(e))
        np.testing.assert_allclose(conditional_weights(m, labels, site, 0.8), w / w.sum(),
                                   atol=1e-12)


def test_conditional_site_out_of_range():
    with pytest.raises(IndexError):
        conditional_weights(IsingModel(2), (1, 1, 1, 1), 4, 0.1)


def test_encoding_little_endian():
    sp = SiteSpace(((0, 1), (0, 1, 2)))
    assert sp.encode([1, 0]) == 1
    assert sp.encode([0, 1]) == 2
    for i in range(sp.n_states):
        assert sp.encode(sp.decode(i)) == i


@pytest.mark.parametrize("model", [IsingModel(3), fig3_voting_model(),
                                   TableModel([2, 3], [0.5, 1, 2, 3, 4, 5.25])])
def test_model_file_round_trip(model, tmp_path):
    p = tmp_path / "m.json"
    save_model(model, p)
    text = p.read_text()
    again = load_model(p)
    assert dumps_model(again) == text
    np.testing.assert_array_equal(again.energies(), model.energies())


def test_model_file_errors(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    with pytest.raises(ModelFormatError):
        load_model(p)
    with pytest.raises(ModelFormatError):
        model_from_dict({"kind": "potts"})
    with pytest.raises(ModelFormatError):
        model_from_dict(json.loads('{"kind": "voting", "n": 2}'))
