import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from holopath import (
    MeraNetwork,
    NegativeActionError,
    NetworkSizeError,
    UnnormalizedStateError,
    apply_network,
    bulk_action,
    classicalize,
    combined_action,
    combined_action_in_bits,
    exhaustive_cut_entropy,
    interval_entropy_bits,
    isometry_residuals,
    measurement_entropy_bits,
    minimal_cut_entropy,
    random_disentangler,
    random_isometry,
    unitary_residual,
)
from holopath.mera import (
    BELL_ENTANGLER,
    BELL_GATE,
    IDENTITY_DISENTANGLER,
    network_from_dict,
    network_to_dict,
)

from oracles import all_intervals, brute_force_entropy, entropy_by_svd

LN2 = math.log(2.0)
BELL = np.array([1, 0, 0, 1], dtype=complex) / math.sqrt(2)


@settings(max_examples=100)
@given(st.integers(0, 2**32 - 1))
def test_random_tensors_satisfy_constraints(seed):
    assert max(isometry_residuals(random_isometry(seed))) <= 1e-12
    assert unitary_residual(random_disentangler(seed)) <= 1e-12


def test_identity_disentangler_accepted():
    assert unitary_residual(IDENTITY_DISENTANGLER) == 0.0


def test_bell_entangler_maps_00_to_bell_state():
    assert np.allclose(BELL_GATE[:, 0], BELL, atol=1e-16)
    assert np.array_equal(BELL_ENTANGLER.conj().T, BELL_GATE)
    assert unitary_residual(BELL_ENTANGLER) <= 1e-15


@pytest.mark.parametrize("n", [2, 4, 8, 16])
def test_identity_network_embeds_top_state(n):
    top = np.array([0.6, 0.8j])
    psi = apply_network(MeraNetwork.identity(n, top_state=top))
    expected = np.zeros(2**n, dtype=complex)
    expected[0] = 0.6
    expected[2 ** (n - 1)] = 0.8j
    assert np.allclose(psi, expected, atol=1e-15)


@pytest.mark.parametrize("n", [2, 4, 6, 8, 12, 16])
def test_random_network_output_is_normalized(n):
    psi = apply_network(MeraNetwork.random(n, seed=n))
    assert abs(np.linalg.norm(psi) - 1.0) <= 1e-12


@pytest.mark.parametrize("n", [2, 4, 8, 16])
def test_site_count_is_disentangler_total(n):
    net = MeraNetwork.random(n, seed=0)
    assert net.site_count == n - 1
    assert len(net.layers) == int(math.log2(n))


def test_twelve_qubits_use_three_qubit_top():
    net = MeraNetwork.random(12, seed=0)
    assert net.n_top == 3 and len(net.layers) == 2
    assert net.n_bottom_qubits == 12


@pytest.mark.parametrize("n", [0, 3, 18, 32])
def test_invalid_sizes_rejected(n):
    with pytest.raises(NetworkSizeError):
        MeraNetwork.random(n)


def test_two_qubit_bell_network_is_bell_pair():
    psi = apply_network(MeraNetwork.bell(2))
    assert np.allclose(psi, BELL, atol=1e-16)


@pytest.mark.parametrize("n", [2, 4, 8, 16])
def test_bell_pairs_network_is_product_of_pairs(n):
    psi = apply_network(MeraNetwork.bell_pairs(n))
    pairs = [(2 * i + 1, (2 * i + 2) % n) for i in range(n // 2)]
    for a, b in pairs:
        lo, hi = sorted((a, b))
        if hi - lo == 1:
            assert interval_entropy_bits(psi, lo, hi + 1) == pytest.approx(0.0, abs=1e-12)
        assert interval_entropy_bits(psi, a, a + 1) == pytest.approx(1.0, abs=1e-12)
    assert measurement_entropy_bits(classicalize(psi)) == pytest.approx(n // 2, abs=1e-12)


@pytest.mark.parametrize("n", [2, 4, 8])
def test_all_bell_network_carries_one_bit_per_site(n):
    net = MeraNetwork.bell(n)
    h = measurement_entropy_bits(classicalize(apply_network(net)))
    assert h == pytest.approx(net.site_count, abs=1e-12)


def test_classicalize_bell_pair():
    cms = classicalize(BELL)
    assert np.allclose(cms.probabilities, [0.5, 0, 0, 0.5], atol=1e-16)
    assert measurement_entropy_bits(cms) == 1.0


def test_basis_state_has_zero_entropy():
    e = np.zeros(16)
    e[0] = 1
    cms = classicalize(e)
    assert cms.probabilities[0] == 1.0
    assert measurement_entropy_bits(cms) == 0.0


@pytest.mark.parametrize("n", [1, 3, 6])
def test_uniform_state_has_n_bits(n):
    psi = np.full(2**n, 2 ** (-n / 2))
    assert measurement_entropy_bits(classicalize(psi)) == pytest.approx(n, abs=1e-12)


def test_unnormalized_state_rejected():
    with pytest.raises(UnnormalizedStateError):
        classicalize(np.array([1.0, 1.0]))


states = st.integers(1, 6).flatmap(
    lambda n: st.lists(st.floats(-1, 1), min_size=2 ** (n + 1), max_size=2 ** (n + 1))
)


@settings(max_examples=100)
@given(states)
def test_classicalize_properties(raw):
    raw = np.asarray(raw)
    half = len(raw) // 2
    psi = raw[:half] + 1j * raw[half:]
    norm = np.linalg.norm(psi)
    if norm < 1e-3:
        return
    psi = psi / norm
    cms = classicalize(psi)
    p = cms.probabilities
    assert abs(p.sum() - 1.0) <= 1e-12 and np.all(p >= 0)
    again = classicalize(np.diag(p))
    assert np.allclose(again.probabilities, p, atol=1e-15)
    h = measurement_entropy_bits(cms)
    assert h == pytest.approx(brute_force_entropy(p), abs=1e-12)
    single = np.count_nonzero(np.abs(psi) > 1e-12) == 1
    assert (h <= 1e-12) == single or h >= 0


def test_bulk_action_examples():
    assert bulk_action(1.0, 1.0).action == -LN2
    assert bulk_action(0.0).action == 0.0
    assert bulk_action(3.0, 2.0).action < 0
    with pytest.raises(NegativeActionError):
        bulk_action(-1.0)


def test_combined_action_example():
    b = LN2
    assert combined_action(10, 2 * b) == pytest.approx(-8 * b, rel=1e-15)
    assert combined_action_in_bits(10, 2 * b) == pytest.approx(-8 * b, rel=1e-15)


def ulp_gap(x, y, scale):
    return abs(x - y) / np.spacing(scale)


@settings(max_examples=500)
@given(st.integers(0, 10**6), st.floats(0, 1e6), st.floats(0.01, 100))
def test_combined_action_forms_agree_within_2_ulp(sites, S, hbar):
    a = combined_action(sites, S, hbar)
    b = combined_action_in_bits(sites, S, hbar)
    scale = max(abs(hbar * LN2 * sites), abs(S), abs(a))
    assert ulp_gap(a, b, scale) <= 2.0


# interval entropy and cuts ----------------------------------------------


@pytest.mark.parametrize("n", [4, 6, 8])
def test_interval_entropy_matches_svd_oracle(n):
    psi = apply_network(MeraNetwork.random(n, seed=3))
    for a, b in all_intervals(n):
        assert interval_entropy_bits(psi, a, b) == pytest.approx(entropy_by_svd(psi, a, b), abs=1e-10)


def test_empty_and_full_intervals_cut_nothing():
    net = MeraNetwork.random(8, seed=1)
    assert minimal_cut_entropy(net, 3, 3) == 0
    assert minimal_cut_entropy(net, 0, 8) == 0


@pytest.mark.parametrize("n", [2, 4, 8, 16])
def test_single_site_cut_at_least_one_bit(n):
    net = MeraNetwork.random(n, seed=0)
    for q in range(n):
        assert minimal_cut_entropy(net, q, q + 1) >= 1


@pytest.mark.parametrize("n", [2, 4, 6, 8])
def test_max_flow_cut_equals_exhaustive_search(n):
    net = MeraNetwork.random(n, seed=0)
    # the exhaustive search is exponential; sample intervals at n = 8
    intervals = all_intervals(n) if n < 8 else [(0, 1), (0, 3), (1, 5), (2, 8), (3, 4), (5, 7)]
    for a, b in intervals:
        assert minimal_cut_entropy(net, a, b) == exhaustive_cut_entropy(net, a, b)


def test_sixteen_qubit_cuts_grow_logarithmically():
    net = MeraNetwork.random(16, seed=0)
    cut = {ell: minimal_cut_entropy(net, 0, ell) for ell in (1, 2, 4, 8)}
    c = max(cut[ell] - 2 * math.log2(ell) for ell in (1, 2))
    assert cut[4] <= cut[8]
    assert cut[4] <= 2 * math.log2(4) + c
    assert cut[8] <= 2 * math.log2(8) + c


@pytest.mark.parametrize("seed", range(4))
@pytest.mark.parametrize("n", [4, 6, 8, 12])
def test_min_cut_bounds_entanglement(n, seed):
    net = MeraNetwork.random(n, seed=seed)
    psi = apply_network(net)
    for a, b in all_intervals(n):
        assert minimal_cut_entropy(net, a, b) >= interval_entropy_bits(psi, a, b) - 1e-12


def test_network_json_round_trip():
    for net in (MeraNetwork.random(8, seed=4), MeraNetwork.bell(4), MeraNetwork.random(6, seed=2)):
        back = network_from_dict(json.loads(json.dumps(network_to_dict(net))))
        assert np.allclose(apply_network(back), apply_network(net), atol=1e-15)
        assert back.site_count == net.site_count
