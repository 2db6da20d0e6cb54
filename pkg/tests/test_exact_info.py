import itertools
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from conftest import structured
from dibias.errors import SelectorError, ValidationError
from dibias.exact_info import (
    InfoRates,
    entropy_of,
    exact_cmi,
    exact_conditional_entropy,
    exact_joint_entropy,
    exact_pdi_rate,
    exact_tdi_rate,
    pdi_selectors,
    rates_csv,
    sandwich,
    tdi_selectors,
)
from dibias.process_model import (
    STRUCTURES,
    AlphabetSpec,
    VariableSelector,
    copy_model,
    independent_uniform_model,
    sample_structured_model,
    sel,
    stationary_distribution,
    window_distribution,
)

# brute-force enumeration over a length-6 window of the sticky noisy copy
# channel (Y stays with prob 0.9, X_t = Y_{t-1} xor Bernoulli(0.1))
HIDDEN_TDI_4 = 0.29789209408167405
HIDDEN_PDI_4 = 0.2970238671456502


def X(*lags):
    return [("X", lag) for lag in lags]


def Y(*lags):
    return [("Y", lag) for lag in lags]


def test_entropy_of_uniform():
    assert entropy_of(np.full(8, 1 / 8)) == pytest.approx(3.0)
    assert entropy_of([1.0, 0.0]) == 0.0


def test_uniform_marginal_entropy():
    w = window_distribution(independent_uniform_model(), 2)
    assert exact_conditional_entropy(w, VariableSelector("X", 0)) == pytest.approx(1.0, abs=1e-12)


def test_copy_model_conditional_entropy_zero():
    w = window_distribution(copy_model(), 2)
    assert exact_conditional_entropy(w, sel("X", 0), sel("Y", 1)) == pytest.approx(0.0, abs=1e-12)


def test_sticky_entropy():
    w = window_distribution(copy_model(y_stay=0.9), 2)
    h = exact_conditional_entropy(w, sel("Y", 0), sel("Y", 1))
    assert abs(h - oracles.binary_entropy(0.9)) <= 1e-4
    assert h == pytest.approx(0.4689955935892811, abs=1e-12)


def test_independent_cmi_is_zero():
    w = window_distribution(independent_uniform_model(), 3)
    for a, b, c in [(sel("X", 0), sel("Y", 1), []), (sel("X", 0), sel("X", 2), sel("Y", 1))]:
        assert abs(exact_cmi(w, a, b, c)) <= 1e-12


def test_copy_model_cmi_is_one_bit():
    w = window_distribution(copy_model(), 2)
    assert exact_cmi(w, sel("X", 0), sel("Y", 1)) == pytest.approx(1.0, abs=1e-12)


def test_s3_edge_cmi_positive_and_matches_brute_force():
    m = structured("S3", 5)
    w = window_distribution(m, 2)
    value = exact_cmi(w, sel("Y", 1), sel("X", 0), sel("X", 1))
    ref = oracles.cmi(oracles.brute_window(m, 2), Y(1), X(0), X(1))
    assert value > 1e-6
    assert value == pytest.approx(ref, abs=1e-12)


def test_overlapping_sets_rejected():
    w = window_distribution(copy_model(), 2)
    with pytest.raises(SelectorError):
        exact_cmi(w, sel("X", 0), sel("X", 0))
    with pytest.raises(SelectorError):
        exact_conditional_entropy(w, sel("X", 0), sel("X", 0, 1))
    with pytest.raises(SelectorError):
        exact_cmi(w, sel("X", 0), sel("Y", 3))


@pytest.mark.parametrize("name,seed", [("S2", 1), ("S4", 2)])
def test_entropies_match_brute_force(name, seed):
    m = structured(name, seed)
    L = m.order + 2
    w = window_distribution(m, L)
    ref = oracles.brute_window(m, L)
    rng = np.random.default_rng(seed)
    variables = [(p, lag) for lag in range(L) for p in "XY"]
    for _ in range(15):
        picks = rng.permutation(len(variables))[:5]
        a, b, c = [variables[i] for i in picks[:1]], [variables[i] for i in picks[1:3]], [variables[i] for i in picks[3:]]
        to_sel = lambda vs: [VariableSelector(p, lag) for p, lag in vs]  # noqa: E731
        assert exact_cmi(w, to_sel(a), to_sel(b), to_sel(c)) == pytest.approx(oracles.cmi(ref, a, b, c), abs=1e-11)
        assert exact_joint_entropy(w, to_sel(a + b)) == pytest.approx(oracles.H(ref, a + b), abs=1e-11)


@given(seed=st.integers(0, 10_000), data=st.data())
@settings(max_examples=30, deadline=None)
def test_chain_rule_and_bounds(seed, data):
    m = structured("S3", seed)
    w = window_distribution(m, 3)
    variables = [VariableSelector(p, lag) for lag in range(3) for p in "XY"]
    chosen = data.draw(st.permutations(variables))
    n_a, n_b = data.draw(st.integers(1, 2)), data.draw(st.integers(1, 2))
    a, b, c = chosen[:n_a], chosen[n_a : n_a + n_b], chosen[n_a + n_b :][:2]
    h_ab = exact_conditional_entropy(w, a + b, c)
    assert h_ab == pytest.approx(exact_conditional_entropy(w, a, c) + exact_conditional_entropy(w, b, a + c), abs=1e-10)
    assert exact_cmi(w, a, b, c) >= 0.0
    assert -1e-12 <= h_ab <= len(a + b) * np.log2(4) + 1e-12


def test_selectors_shapes():
    target, restricted, full = tdi_selectors(2)
    assert target == VariableSelector("X", 0)
    assert restricted == sel("X", 1, 2)
    assert full == [VariableSelector("Y", 0), VariableSelector("X", 1), VariableSelector("Y", 1),
                    VariableSelector("X", 2), VariableSelector("Y", 2)]  # fmt: skip
    _, r, f = pdi_selectors(1, 2, has_z=True)
    assert {s.lag for s in r if s.process == "Y"} == {2, 3}
    assert {s.lag for s in r if s.process == "Z"} == {0, 1, 2, 3}
    assert {s.lag for s in f if s.process == "Y"} == {0, 1, 2}


def test_tdi_zero_without_y_influence():
    assert exact_tdi_rate(independent_uniform_model(), 1) == pytest.approx(0.0, abs=1e-12)
    assert exact_pdi_rate(independent_uniform_model(), 1) == pytest.approx(0.0, abs=1e-12)


def test_copy_model_rates():
    m = copy_model()
    assert exact_tdi_rate(m, 1) == pytest.approx(1.0, abs=1e-12)
    assert exact_pdi_rate(m, 1) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("name,seed", [("S1", 3), ("S2", 9), ("S3", 5), ("S4", 2)])
def test_tdi_reduction_matches_definition(name, seed):
    m = structured(name, seed)
    st_ = stationary_distribution(m)
    for k in range(m.order, m.order + 3):
        fast = exact_tdi_rate(m, k, st_)
        assert fast == pytest.approx(exact_tdi_rate(m, k, st_, definitional=True), abs=1e-10)


def small(name, seed):
    # brute-force enumeration is cheap on a (3, 2) alphabet
    return sample_structured_model(STRUCTURES[name], AlphabetSpec(3, 2), 1, seed)


@pytest.mark.parametrize("name,seed", [("S2", 9), ("S3", 5)])
def test_rates_match_brute_force(name, seed):
    m = small(name, seed)
    ref = oracles.brute_window(m, 5)
    for k in (1, 2, 3):
        past_x = X(*range(1, k + 1))
        tdi = oracles.cmi(ref, X(0), Y(*range(0, k + 1)), past_x)
        assert exact_tdi_rate(m, k) == pytest.approx(tdi, abs=1e-10)
        pdi = oracles.cond_entropy(ref, X(0), X(*range(1, k + 2)) + Y(k + 1)) - oracles.cond_entropy(ref, X(0), X(1) + Y(0, 1))
        assert exact_pdi_rate(m, k) == pytest.approx(pdi, abs=1e-10)


def test_pdi_identity_ignores_deeper_past():
    # the restricted entropy must not change when one more lag of X and Y is added
    m = small("S3", 8)
    ref = oracles.brute_window(m, 5)
    k, d = 2, 1
    short = oracles.cond_entropy(ref, X(0), X(*range(1, k + d + 1)) + Y(*range(k + 1, k + d + 1)))
    deep = oracles.cond_entropy(ref, X(0), X(*range(1, k + d + 2)) + Y(*range(k + 1, k + d + 2)))
    assert short == pytest.approx(deep, abs=1e-10)


def test_s2_tdi_nonincreasing():
    m = structured("S2", 9)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        values = [exact_tdi_rate(m, k) for k in (1, 2, 3)]
    assert values[0] >= values[1] - 1e-9 >= values[2] - 2e-9


def test_s3_pdi_nondecreasing():
    m = structured("S3", 5)
    values = [exact_pdi_rate(m, k) for k in range(1, 5)]
    assert all(b >= a - 1e-9 for a, b in itertools.pairwise(values))


def test_tdi_below_order_warns():
    with pytest.warns(UserWarning):
        exact_tdi_rate(structured("S4", 0), 1)


def test_invalid_orders():
    with pytest.raises(ValidationError):
        exact_tdi_rate(copy_model(), 0)
    with pytest.raises(ValidationError):
        exact_pdi_rate(copy_model(), 0)
    with pytest.raises(ValidationError):
        sandwich(structured("S4", 0), 1, 1)


def test_sandwich_independent():
    r = sandwich(independent_uniform_model(), 1, 1)
    assert r.tdi_rate == pytest.approx(0.0, abs=1e-12)
    assert r.pdi_rate == pytest.approx(0.0, abs=1e-12)
    assert r.di_proxy == pytest.approx(0.0, abs=1e-12)


def test_sandwich_copy_model():
    r = sandwich(copy_model(), 1, 1)
    assert (r.pdi_rate, r.tdi_rate, r.di_proxy) == pytest.approx((1.0, 1.0, 1.0), abs=1e-12)
    assert r.converged


def test_hidden_influence_sandwich():
    m = copy_model(flip=0.1, y_stay=0.9)
    r = sandwich(m, 4, 4)
    assert r.pdi_rate < r.tdi_rate
    assert r.tdi_rate == pytest.approx(HIDDEN_TDI_4, abs=1e-10)
    assert r.pdi_rate == pytest.approx(HIDDEN_PDI_4, abs=1e-10)
    assert r.gap == pytest.approx(HIDDEN_TDI_4 - HIDDEN_PDI_4, abs=1e-10)


def test_hidden_influence_is_not_markov_in_x():
    # X alone is a hidden-Markov observation: the bracket never closes exactly
    m = copy_model(flip=0.1, y_stay=0.9)
    gaps = [sandwich(m, k, k).gap for k in (1, 2, 3, 4)]
    assert all(g > 0 for g in gaps)
    assert all(b <= a + 1e-12 for a, b in itertools.pairwise(gaps))


def test_unconverged_sandwich_has_no_proxy():
    r = sandwich(copy_model(flip=0.1, y_stay=0.9), 1, 1)
    assert r.gap > 2e-3 and r.di_proxy is None and not r.converged


def test_z_process_is_conditioned():
    # X copies Z_{t-1}; Y is pure noise, so nothing flows from Y once Z is given
    a = AlphabetSpec(2, 2, 2)
    from dibias.process_model import model_from_functions

    m = model_from_functions(
        a, 1,
        lambda c: np.array([0.8, 0.2]) if c[0, 2] == 0 else np.array([0.3, 0.7]),
        lambda c: np.array([0.5, 0.5]),
        lambda c: np.array([0.6, 0.4]) if c[0, 1] == 0 else np.array([0.1, 0.9]),
    )  # fmt: skip
    assert exact_tdi_rate(m, 1) == pytest.approx(0.0, abs=1e-10)
    assert exact_pdi_rate(m, 2) == pytest.approx(0.0, abs=1e-10)


def test_rates_csv_header():
    text = rates_csv([{"model_id": "m", "structure": "S1", "seed": 1, "k": 1, "tdi_bits": 0.5, "pdi_bits": 0.4}])
    lines = text.splitlines()
    assert lines[0] == "model_id,structure,seed,k,tdi_bits,pdi_bits,di_proxy_bits"
    assert lines[1] == "m,S1,1,1,0.5,0.4,"


def test_info_rates_properties():
    r = InfoRates(k=2, tdi_rate=0.5, pdi_rate=0.3)
    assert r.gap == pytest.approx(0.2) and r.midpoint == pytest.approx(0.4) and not r.converged
