import math

import numpy as np
import pytest

from vibqst.exact import PropagatorSeries
from vibqst.harness import (
    crossing_scan,
    find_max,
    fit_t0,
    knee_temperature,
    qubit_coherence,
    shift_scan,
    spectrum_compare,
    sweep_epsilon,
    sweep_temperature,
    time_grid,
    validate,
)
from vibqst.params import ModelParams, derive


def series(t, values):
    return PropagatorSeries(np.asarray(t), np.asarray(values, dtype=complex), "exact")


def test_find_max_constant_zero():
    r = find_max(series(np.linspace(0, 10, 11), np.zeros(11)))
    assert r.G_M == 0 and r.maxima == [] and not r.double


def test_find_max_needs_points():
    with pytest.raises(ValueError):
        find_max(series([0.0, 1.0], [0.0, 1.0]))


def test_find_max_synthetic_product():
    t = np.linspace(0, 3.0, 601)
    g = np.abs(np.cos(t) * np.cos(10 * t))
    r = find_max(series(t, g), threshold=0.2)
    assert r.T_M == 0.0 and r.G_M == pytest.approx(1.0)
    # brute force on a very fine grid for the first interior maximum
    fine = np.linspace(0.05, 0.45, 400001)
    gf = np.abs(np.cos(fine) * np.cos(10 * fine))
    inner = (gf[1:-1] > gf[:-2]) & (gf[1:-1] >= gf[2:])
    t_ref = fine[1:-1][inner][0]
    first = [m for m in r.maxima if m[0] > 0.05][0]
    assert first[0] == pytest.approx(t_ref, abs=1e-3)
    assert first[1] == pytest.approx(gf[1:-1][inner][0], abs=1e-5)
    assert t_ref == pytest.approx(0.3109, abs=1e-3)


def test_parabolic_refinement_beats_grid():
    t = np.linspace(0, 10, 41)
    g = np.exp(-((t - 4.13) ** 2))
    r = find_max(series(t, g))
    assert r.T_M == pytest.approx(4.13, abs=1e-2)
    assert g.max() < r.G_M <= 1.0 + 1e-9
    assert r.G_M == pytest.approx(1.0, abs=3e-3)


def test_double_maximum_flag():
    t = np.linspace(0, 700, 2801)
    g = 0.83 * np.exp(-(((t - 248.5) / 40) ** 2)) + 0.88 * np.exp(-(((t - 495.5) / 40) ** 2))
    r = find_max(series(t, g))
    assert r.double
    assert [round(h, 2) for _, h in r.maxima] == [0.83, 0.88]
    assert r.T_M == pytest.approx(495.5, abs=0.5)
    g2 = 0.70 * np.exp(-(((t - 248.5) / 40) ** 2)) + 0.88 * np.exp(-(((t - 495.5) / 40) ** 2))
    assert not find_max(series(t, g2)).double


def test_window_restriction():
    t = np.linspace(0, 10, 101)
    r = find_max(series(t, np.abs(np.sin(t))), window=(0, 3))
    assert r.window == (0.0, 3.0)
    assert r.T_M == pytest.approx(math.pi / 2, abs=1e-2)


def test_qubit_coherence():
    assert qubit_coherence(0.0, 0.5) == 0
    assert abs(qubit_coherence(1.0, 0.5)) == 0.5
    assert abs(qubit_coherence(0.97, 0.5)) == pytest.approx(0.485)
    with pytest.raises(ValueError):
        qubit_coherence(1.0, 0.6)


def test_fit_t0_recovers_synthetic():
    T = np.geomspace(10, 300, 20)
    assert fit_t0(T, 1 - (T / 1510.0) ** 2) == pytest.approx(1510.0)


def test_knee_on_synthetic_plateau():
    T = np.geomspace(5, 300, 30)
    G = np.where(T < 40, 0.99 - 0.002 * np.log(T / 5), 0.99 - 0.002 * np.log(8))
    knee = knee_temperature(T, G)
    assert knee == pytest.approx(40, rel=0.15)


def test_sweep_deterministic_under_parallelism():
    p = ModelParams()
    kw = dict(engine="pt_diagonal", t_max=800, n_points=801)
    a = sweep_epsilon(p, [0.01, 0.013, 0.02], [100.0, 300.0], n_jobs=1, **kw)
    b = sweep_epsilon(p, [0.02, 0.01, 0.013], [300.0, 100.0], n_jobs=2, **kw)
    assert [(r.T, r.epsilon) for r in a.rows] == [(r.T, r.epsilon) for r in b.rows]
    assert np.array_equal(a.column("G_M"), b.column("G_M"))
    assert np.array_equal(a.column("T_M"), b.column("T_M"))


def test_sweep_grid_validation():
    with pytest.raises(ValueError):
        sweep_epsilon(ModelParams(), [0.0, 0.01])
    with pytest.raises(ValueError):
        sweep_temperature(ModelParams(), [0.013], [300.0, 100.0])


def test_sweep_errors_are_rows():
    tab = sweep_epsilon(ModelParams(omega_c_override=2000.0, L=4), [0.01], engine="threepath", t_max=50)
    row = tab.rows[0]
    assert row.report is not None or row.error


def test_temperature_sweep_is_monotone_near_optimum():
    T = [0.0, 50.0, 100.0, 200.0, 300.0]
    tab = sweep_temperature(ModelParams(), [0.0114], T, engine="pt_diagonal", t_max=1200, n_points=2401)
    G = tab.column("G_M")
    assert np.all(np.diff(G) <= 1e-9)
    assert math.isfinite(tab.fits[0.0114]["T0"])


def test_degradation_with_size_and_coupling():
    kw = dict(engine="pt_full", t_max=2000, n_points=4001)
    base = sweep_epsilon(ModelParams(), [0.01], **kw).column("G_M")[0]
    longer = sweep_epsilon(ModelParams(L=20), [0.01], **kw).column("G_M")[0]
    stronger = sweep_epsilon(ModelParams(chi=20.0), [0.01], **kw).column("G_M")[0]
    assert longer < base and stronger < base


def test_spectrum_compare_without_coupling():
    sc = spectrum_compare(ModelParams(chi=0.0), n_max=6)
    assert np.allclose(sc.delta, 0.0, atol=1e-10)
    assert not sc.flagged.any()


def test_spectrum_compare_structure():
    sc = spectrum_compare(ModelParams(epsilon=0.01), n_max=30)
    assert len(sc.exact) == len(sc.pt) == 11 * 31
    low = sc.window(-3 * 7.8, 20 * 7.8)
    assert np.max(np.abs(sc.delta[low])) < 0.01 * 7.8
    assert np.all((sc.folded >= 0) & (sc.folded < sc.Omega))


def test_crossing_scan():
    rows = crossing_scan(ModelParams(), [0.0, 20.0], n_max=8)
    assert rows[1]["eta"] == pytest.approx(1.41, abs=0.01)
    zero = rows[0]
    assert np.allclose(np.sort(zero["exact"]), np.sort(zero["pt"]), atol=1e-10)


def test_shift_scan():
    rows = shift_scan(ModelParams(), [0.01, 0.05])
    by = {(r.epsilon, r.label): r for r in rows}
    for k in ("k2", "k3", "k7"):
        a, b = by[(0.01, k)].exciton_shift, by[(0.05, k)].exciton_shift
        assert abs(a - b) < 0.01 * abs(a)
    assert by[(0.01, "o")].phonon_shift == pytest.approx(0.0, abs=1e-5)
    assert by[(0.01, "+")].phonon_shift < 0 < by[(0.01, "-")].phonon_shift


def test_validate_flags_resonance():
    p = ModelParams()
    d = derive(p)
    from vibqst.exciton import solve_exciton

    exc = solve_exciton(p, d)
    gap = exc.energies[exc.index("k1")] - exc.energies[exc.index("k2")]
    target = gap / math.sin(math.pi / 20)
    checks = {c.name: c for c in validate(p.with_(omega_c_override=target), t_max=200)}
    assert not checks["pt_denominators"].passed


def test_validate_defaults():
    checks = {c.name: c for c in validate(ModelParams(), t_max=400)}
    for name in ("identity_A", "identity_B", "commutator_L4", "unitarity", "chi0_collapse",
                 "chi0_threepath", "psi_o_at_band_centre", "o_phonon_shift", "generator_small"):
        assert checks[name].passed, checks[name]


def test_time_grid():
    t = time_grid(2000)
    assert t[1] - t[0] == pytest.approx(0.25)
    with pytest.raises(ValueError):
        time_grid(-1)


from hypothesis import given, settings, strategies as st  # noqa: E402


@settings(max_examples=40, deadline=None)
@given(
    a=st.floats(0.2, 3.0),
    b=st.floats(3.0, 20.0),
    phase=st.floats(0.0, 3.0),
)
def test_find_max_bounds_samples(a, b, phase):
    t = np.linspace(0, 20, 801)
    g = np.abs(np.cos(a * t + phase) * np.cos(b * t)) * 0.99
    r = find_max(series(t, g))
    assert r.G_M >= g.max() - 1e-12
    assert r.G_M <= 0.99 + 1e-9
    assert all(h >= 0.5 for _, h in r.maxima)
    assert 0 <= r.T_M <= 20


@settings(max_examples=10, deadline=None)
@given(eps=st.floats(0.002, 0.05), T=st.floats(0.0, 400.0), chi=st.floats(0.0, 15.0))
def test_exact_propagator_bounded(eps, T, chi):
    from vibqst.harness import run_engine

    p = ModelParams(L=4, epsilon=eps, T=T, chi=chi)
    import warnings as _w

    with _w.catch_warnings():
        _w.simplefilter("ignore")
        g = run_engine(p, "exact", np.linspace(0, 300, 61), n_max=12).modulus
    assert np.all(g <= 1 + 1e-9)
    assert g[0] < 1e-12
