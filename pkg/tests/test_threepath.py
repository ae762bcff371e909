import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vibqst.exciton import analytic_eigensystem, solve_exciton
from vibqst.exact import bare_propagator
from vibqst.fockspace import m_operator
from vibqst.params import ModelParams, derive
from vibqst.pt import solve_pt
from vibqst.threepath import (
    OutOfValidityError,
    build_model,
    decoherence_modulus,
    epsilon_star,
    gm_star,
    interference_term,
    modulus_decomposition,
    optimal_coupling,
    resonance_condition,
    series_converged,
    taylor_coefficients,
    three_path_propagator,
)


def test_taylor_coefficients_hand_values(derived):
    E = taylor_coefficients(derived)
    eta2 = 0.7043**2
    hi, lo = 15.152 + 4.821, 15.152 - 4.821
    Ebar = 2 * 7.8 / math.sqrt(10)
    for r in range(3):
        hand = eta2 / 2 * (Ebar**r / hi ** (r + 1) + Ebar**r / lo ** (r + 1))
        assert E[r] == pytest.approx(hand, rel=1e-3)
    assert E[0] == pytest.approx(0.03643, abs=5e-5)
    assert E[1] == pytest.approx(0.01453, abs=5e-5)
    assert E[2] == pytest.approx(0.00623, abs=5e-5)
    assert E[0] / derived.E_B == pytest.approx(0.1085, abs=5e-4)
    assert np.all(E > 0)


def test_coefficients_vanish_without_coupling():
    assert np.all(taylor_coefficients(derive(ModelParams(chi=0.0))) == 0)


def test_resonant_phonon_rejected(params):
    d = derive(params)
    # choose the cutoff so that Omega equals the band-centre spacing
    target = d.Delta_omega / math.sin(math.pi / 20)
    with pytest.raises(OutOfValidityError):
        taylor_coefficients(derive(params.with_(omega_c_override=target)))


def test_zero_epsilon_hybridization(derived):
    m = build_model(derived, 0.0)
    E0 = m.E_r[0]
    assert m.v_pm == pytest.approx(E0)
    assert m.Delta == pytest.approx(4 * E0**2)
    assert m.theta == pytest.approx(math.pi / 4)
    assert m.dOmega_plus == 0.0


def test_small_epsilon_asymptotics(derived):
    eps = 1e-3
    m = build_model(derived, eps)
    E0, E1 = m.E_r[0], m.E_r[1]
    Eb = derived.E_bar
    assert m.w_hat_plus == pytest.approx((Eb - E1) ** 2 * eps**2 / (2 * E0), rel=0.05)
    assert m.w_hat_minus == pytest.approx(-2 * E0, rel=0.01)
    assert m.dOmega_plus == pytest.approx(-2 * E1 * (Eb - E1) * eps**2 / E0, rel=0.05)


def test_large_epsilon_weak_hybridization(derived):
    m = build_model(derived, 0.05)
    w_plus = 2 * 0.05 * 7.8 / math.sqrt(10)
    assert m.w_hat_plus == pytest.approx(w_plus + m.dw_plus, rel=0.05)
    assert m.w_hat_minus == pytest.approx(-w_plus + m.dw_minus, rel=0.05)


def test_shift_monotonicity(derived):
    a, b = build_model(derived, 0.01), build_model(derived, 0.02)
    assert b.dw_plus < a.dw_plus
    assert b.dw_minus > a.dw_minus


def test_phonon_shifts_antisymmetric(derived):
    for eps in (0.005, 0.013, 0.04):
        m = build_model(derived, eps)
        assert m.dOmega_minus == -m.dOmega_plus
        assert m.dOmega_plus < 0


def test_frequencies_and_alpha(derived):
    alphas = []
    for eps in np.linspace(0.005, 0.05, 40):
        m = build_model(derived, eps)
        assert m.W_plus > 0 and m.W_minus > 0
        assert m.W_s < m.W_f
        assert series_converged(m)
        alphas.append(m.alpha)
    assert np.all((np.array(alphas) > 0) & (np.array(alphas) < 1))
    assert np.all(np.diff(alphas) < 0)


def test_dressed_energies_agree_with_pt():
    for eps in (0.01, 0.02, 0.05):
        p = ModelParams(epsilon=eps)
        d = derive(p)
        exc = solve_exciton(p, d)
        dr = solve_pt(exc, m_operator(exc, d), d.Omega).dressed
        m = build_model(d)
        assert m.w_hat_plus == pytest.approx(dr.energies[exc.plus], rel=0.05)
        assert m.w_hat_minus == pytest.approx(dr.energies[exc.minus], rel=0.05)


def test_propagator_starts_at_zero(derived):
    m = replace(build_model(derived), theta=0.0)
    g = three_path_propagator(m, derived, [0.0])
    assert abs(g.values[0]) < 1e-15


def test_modulus_identity(derived):
    m = replace(build_model(derived), theta=0.0)  # sin 2 theta = 0
    times = np.linspace(0, 2000, 4001)
    g = three_path_propagator(m, derived, times)
    terms = modulus_decomposition(m, times)
    assert np.allclose(g.modulus**2, terms.total, atol=1e-14)
    t = times / m.Phi
    F = decoherence_modulus(m.n_bar, m.dOmega_plus, t)
    assert np.allclose(interference_term(m, times), F * np.cos(m.W_s * t) * np.cos(m.W_f * t))


def test_phase_treatments_share_modulus_at_low_temperature():
    d = derive(ModelParams(T=1.0))
    m = build_model(d)
    times = np.linspace(0, 1000, 501)
    lin = three_path_propagator(m, d, times, phase="linear").modulus
    ex = three_path_propagator(m, d, times, phase="exact").modulus
    assert np.allclose(lin, ex, atol=1e-9)
    with pytest.raises(ValueError):
        three_path_propagator(m, d, times, phase="other")


def test_zero_coupling_is_three_level_law(params):
    p = params.with_(chi=0.0)
    d = derive(p)
    times = np.linspace(0, 1000, 1001)
    g = three_path_propagator(build_model(d), d, times)
    law = bare_propagator(analytic_eigensystem(p, d), times, p.Phi)
    assert np.allclose(g.modulus, np.abs(law), atol=1e-12)


@settings(max_examples=50)
@given(st.floats(0.0, 200.0), st.floats(1e-5, 0.1), st.floats(0.0, 1e4))
def test_decoherence_modulus_bounds(n, dO, t):
    F = decoherence_modulus(n, dO, t)
    assert 1 / math.sqrt(1 + 4 * n * (n + 1)) - 1e-12 <= F <= 1.0


def test_epsilon_star_values(params):
    assert epsilon_star(derive(params)) == pytest.approx(0.0114, abs=1e-4)
    assert epsilon_star(derive(params.with_(T=100.0))) == pytest.approx(0.0107, abs=1e-4)


def test_epsilon_star_formula_collapse():
    assert optimal_coupling(0.03, 0.0, 0.0, 4.9, 0.0) == pytest.approx(math.sqrt(2) * 0.03 / 4.9)


def test_epsilon_star_too_hot(params):
    with pytest.raises(OutOfValidityError):
        epsilon_star(derive(params.with_(T=1e5)))


def test_gm_star(params):
    est = gm_star(derive(params))
    assert est.T0 == pytest.approx(1600, rel=0.1)
    cold = gm_star(derive(params.with_(T=0.0)))
    assert cold.G_M == 1.0
    with pytest.raises(OutOfValidityError):
        gm_star(derive(params.with_(T=5000.0)), eps_star=0.0114)


@pytest.mark.parametrize(
    "alpha, kind, p, q",
    [(1 / 3, "destructive", None, 1), (0.5, "constructive", 0, 1), (0.6, "destructive", None, 2)],
)
def test_resonance_classes(alpha, kind, p, q):
    res = resonance_condition(alpha)
    assert (res.kind, res.p, res.q) == (kind, p, q)


def test_resonance_none_and_range():
    assert resonance_condition(0.9) is None
    with pytest.raises(ValueError):
        resonance_condition(1.2)
