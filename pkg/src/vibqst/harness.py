"""Experiment layer: maxima of |G|, parameter sweeps, spectra and checks."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from joblib import Parallel, delayed
from scipy.signal import find_peaks

from ._validation import check_params
from .estimators import ExactPropagator, PerturbativePropagator, ThreePathPropagator, make_engine
from .exact import ENGINES, PropagatorSeries, TruncationWarning, bare_propagator
from .exciton import analytic_eigensystem, analytic_triplet, solve_exciton
from .fockspace import FockTruncation, annihilation, build_full_h, m_operator
from .params import Check, ModelParams, derive, validity_report
from .pt import ResonanceError, build_pt_operators, decoherence_factor, delta_matrices, pt_spectrum, solve_pt
from .threepath import build_model, decoherence_modulus

DEFAULT_T_MAX = 2000.0
DEFAULT_DT = 0.25
MAX_THRESHOLD = 0.5
DOUBLE_TOL = 0.05
PEAK_PROMINENCE = 0.01


def time_grid(t_max: float = DEFAULT_T_MAX, n_points: Optional[int] = None) -> np.ndarray:
    """Uniform grid on [0, t_max] (units of 1/Phi), spacing 0.25 by default."""
    if not t_max > 0:
        raise ValueError("t_max must be positive")
    if n_points is None:
        n_points = int(round(t_max / DEFAULT_DT)) + 1
    if n_points < 3:
        raise ValueError("need at least 3 time points")
    return np.linspace(0.0, t_max, n_points)


# ---------------------------------------------------------------------------
# maxima


@dataclass
class MaxReport:
    """Maximum of |G| on a time window.

    ``maxima`` lists the local maxima above the threshold as (t, |G|) pairs,
    ignoring ripples with a prominence below 0.01; ``n_local`` counts every
    discrete local maximum above the threshold.
    """

    G_M: float
    T_M: float
    maxima: list
    double: bool
    residual: float
    window: tuple
    n_local: int = 0

    @property
    def loss_percent(self) -> float:
        return 100.0 * (1.0 - self.G_M)


def _parabolic(t, y, i):
    """Vertex of the parabola through (t[i-1..i+1], y[i-1..i+1])."""
    if i <= 0 or i >= len(y) - 1:
        return t[i], y[i]
    tt, yy = t[i - 1 : i + 2], y[i - 1 : i + 2]
    a, b, c = np.polyfit(tt - tt[1], yy, 2)
    if a >= 0:
        return t[i], y[i]
    dx = float(np.clip(-b / (2.0 * a), tt[0] - tt[1], tt[2] - tt[1]))
    return tt[1] + dx, max(a * dx * dx + b * dx + c, y[i])


def find_max(
    series: PropagatorSeries,
    window: Optional[tuple] = None,
    threshold: float = MAX_THRESHOLD,
    double_tol: float = DOUBLE_TOL,
) -> MaxReport:
    """Locate the absolute maximum of |G| and the local maxima.

    The grid argmax is refined by a parabola through |G|^2.  Two local
    maxima whose heights differ by at most ``double_tol`` set ``double``.
    """
    t = np.asarray(series.times, dtype=float)
    g = np.abs(np.asarray(series.values))
    if window is not None:
        keep = (t >= window[0]) & (t <= window[1])
        t, g = t[keep], g[keep]
    if t.size < 3:
        raise ValueError("need at least 3 time points to locate a maximum")
    if not np.all(np.isfinite(g)):
        raise ValueError("propagator contains non-finite values")
    win = (float(t[0]), float(t[-1]))
    y = g**2

    i = int(np.argmax(g))
    T_M, y_M = _parabolic(t, y, i)
    G_M = math.sqrt(y_M)
    residual = G_M - g[i]

    raw = np.flatnonzero((g[1:-1] > g[:-2]) & (g[1:-1] >= g[2:])) + 1
    n_local = int(np.sum(g[raw] > threshold))
    peaks, _ = find_peaks(g, prominence=PEAK_PROMINENCE)
    maxima = []
    for j in peaks:
        tj, yj = _parabolic(t, y, j)
        if math.sqrt(yj) > threshold:
            maxima.append((float(tj), math.sqrt(yj)))
    ranked = sorted((h for _, h in maxima), reverse=True)
    double = len(ranked) >= 2 and ranked[0] - ranked[1] <= double_tol + 1e-12
    if maxima and G_M < max(ranked):
        G_M = max(ranked)
    return MaxReport(G_M, float(T_M), maxima, bool(double), float(residual), win, n_local)


# ---------------------------------------------------------------------------
# sweeps


@dataclass
class SweepRow:
    epsilon: float
    T: float
    report: Optional[MaxReport]
    alpha: float = math.nan
    tm_over_tf: float = math.nan
    n_max: Optional[int] = None
    error: str = ""


@dataclass
class SweepTable:
    axis: str
    rows: list
    engine: str
    params: dict
    window: tuple
    fits: dict = field(default_factory=dict)

    def column(self, name: str) -> np.ndarray:
        if name in ("G_M", "T_M"):
            return np.array([getattr(r.report, name) if r.report else math.nan for r in self.rows])
        return np.array([getattr(r, name) for r in self.rows], dtype=float)


def run_engine(params: ModelParams, engine: str, times, n_max: Optional[int] = None) -> PropagatorSeries:
    return make_engine(engine, params, n_max=n_max).fit().propagate(times)


def _sweep_point(params: ModelParams, engine: str, times, n_max) -> SweepRow:
    try:
        est = make_engine(engine, params, n_max=n_max).fit()
        report = find_max(est.propagate(times))
        used = est.truncation_.n_max if engine == "exact" else None
    except (ArithmeticError, RuntimeError, ValueError) as exc:
        return SweepRow(params.epsilon, params.T, None, error=f"{type(exc).__name__}: {exc}")
    alpha = tm_tf = math.nan
    try:
        model = build_model(derive(params))
        alpha = model.alpha
        tm_tf = report.T_M / model.T_f
    except (ArithmeticError, ValueError):
        pass
    return SweepRow(params.epsilon, params.T, report, alpha, tm_tf, used)


def _run_points(points, engine, times, n_max, n_jobs):
    if n_jobs == 1:
        return [_sweep_point(p, engine, times, n_max) for p in points]
    return Parallel(n_jobs=n_jobs)(delayed(_sweep_point)(p, engine, times, n_max) for p in points)


def sweep_epsilon(
    params: ModelParams,
    grid: Sequence[float],
    T_list: Sequence[float] = (300.0,),
    engine: str = "pt_full",
    t_max: float = DEFAULT_T_MAX,
    n_points: Optional[int] = None,
    n_max: Optional[int] = None,
    n_jobs: int = 1,
) -> SweepTable:
    """G_M versus epsilon for each temperature; rows ordered by (T, epsilon)."""
    params = check_params(params)
    if engine not in ENGINES:
        raise ValueError(f"unknown engine {engine!r}")
    grid = sorted(float(e) for e in grid)
    if not grid or grid[0] <= 0 or grid[-1] > 0.05:
        raise ValueError("epsilon grid must lie in (0, 0.05]")
    times = time_grid(t_max, n_points)
    points = [params.with_(epsilon=e, T=float(T)) for T in sorted(T_list) for e in grid]
    rows = _run_points(points, engine, times, n_max, n_jobs)
    return SweepTable("epsilon", rows, engine, params.as_dict(), (0.0, float(t_max)))


def log_temperature_grid(lo: float = 10.0, hi: float = 300.0, n: int = 25) -> np.ndarray:
    return np.geomspace(lo, hi, n)


def fit_t0(T, G_M, window=(10.0, 300.0)) -> float:
    """Least-squares T0 in G_M = 1 - (T/T0)^2 over ``window``."""
    T = np.asarray(T, float)
    G = np.asarray(G_M, float)
    keep = (T >= window[0]) & (T <= window[1]) & np.isfinite(G)
    T, G = T[keep], G[keep]
    if T.size < 2:
        raise ValueError("need at least two temperatures inside the fit window")
    inv_sq = np.sum(T**2 * (1.0 - G)) / np.sum(T**4)
    return math.inf if inv_sq <= 0 else 1.0 / math.sqrt(inv_sq)


def knee_temperature(T, G_M) -> float:
    """Point of largest |d^2 G_M / d(log T)^2| (interior points, T > 0)."""
    T = np.asarray(T, float)
    G = np.asarray(G_M, float)
    keep = (T > 0) & np.isfinite(G)
    T, G = T[keep], G[keep]
    if T.size < 3:
        raise ValueError("need at least three positive temperatures")
    x = np.log(T)
    slope = np.diff(G) / np.diff(x)
    d2 = 2.0 * np.diff(slope) / (x[2:] - x[:-2])
    return float(T[1 + int(np.argmax(np.abs(d2)))])


def sweep_temperature(
    params: ModelParams,
    eps_list: Sequence[float],
    T_grid: Sequence[float],
    engine: str = "pt_full",
    t_max: float = DEFAULT_T_MAX,
    n_points: Optional[int] = None,
    n_max: Optional[int] = None,
    fit_window: tuple = (10.0, 300.0),
    n_jobs: int = 1,
) -> SweepTable:
    """G_M versus temperature; ``fits[eps]`` holds the fitted T0 and knee T*."""
    params = check_params(params)
    if engine not in ENGINES:
        raise ValueError(f"unknown engine {engine!r}")
    T_grid = [float(T) for T in T_grid]
    if any(T < 0 for T in T_grid) or any(b <= a for a, b in zip(T_grid, T_grid[1:])):
        raise ValueError("temperature grid must be ascending and non-negative")
    times = time_grid(t_max, n_points)
    eps_list = sorted(float(e) for e in eps_list)
    points = [params.with_(epsilon=e, T=T) for e in eps_list for T in T_grid]
    rows = _run_points(points, engine, times, n_max, n_jobs)
    table = SweepTable("T", rows, engine, params.as_dict(), (0.0, float(t_max)))
    for e in eps_list:
        sub = [r for r in rows if r.epsilon == e]
        Ts = [r.T for r in sub]
        Gs = [r.report.G_M if r.report else math.nan for r in sub]
        fit = {}
        try:
            fit["T0"] = fit_t0(Ts, Gs, fit_window)
        except ValueError:
            fit["T0"] = math.nan
        try:
            fit["T_knee"] = knee_temperature(Ts, Gs)
        except ValueError:
            fit["T_knee"] = math.nan
        table.fits[e] = fit
    return table


# ---------------------------------------------------------------------------
# spectra and shifts


@dataclass
class SpectrumComparison:
    """Exact levels E_i paired with perturbative E_{nu,n} (cm^-1, relative to omega0)."""

    exact: np.ndarray
    pt: np.ndarray
    nu: np.ndarray
    n: np.ndarray
    spacing: np.ndarray
    Omega: float
    n_max: int

    @property
    def delta(self) -> np.ndarray:
        return self.exact - self.pt

    @property
    def folded(self) -> np.ndarray:
        return np.mod(self.exact, self.Omega)

    @property
    def flagged(self) -> np.ndarray:
        """Rows where |dE| exceeds half the local exact level spacing."""
        return np.abs(self.delta) > 0.5 * self.spacing

    def window(self, lo: float, hi: float) -> np.ndarray:
        return (self.exact >= lo) & (self.exact <= hi)

    def quantiles(self, qs=(0.5, 0.9, 1.0)) -> np.ndarray:
        return np.quantile(np.abs(self.delta), qs)


def _local_spacing(E: np.ndarray) -> np.ndarray:
    gaps = np.diff(E)
    left = np.concatenate(([np.inf], gaps))
    right = np.concatenate((gaps, [np.inf]))
    return np.minimum(left, right)


def spectrum_compare(params: ModelParams, n_max: int = 180) -> SpectrumComparison:
    """Exact and second-order spectra on the same truncation.

    Both sorted spectra have (L+1)(n_max+1) levels and are paired by rank,
    which reduces to nearest-in-energy pairing whenever |dE| is below the
    local spacing.  The labels (nu, n) come from the perturbative side.
    """
    params = check_params(params)
    d = derive(params)
    exc = solve_exciton(params, d)
    M = m_operator(exc, d)
    trunc = FockTruncation.fixed(n_max, d.beta_Omega)
    H = build_full_h(exc, M, d, trunc)
    E = np.linalg.eigvalsh(H.matrix)
    res = solve_pt(exc, M, d.Omega)
    Ept, nu, n = pt_spectrum(res.dressed, n_max, d.Omega)
    return SpectrumComparison(E, Ept, nu, n, _local_spacing(E), d.Omega, n_max)


def crossing_scan(params: ModelParams, chi_grid: Sequence[float], window: Optional[float] = None, n_max: int = 12):
    """Exact and perturbative levels near the band centre for each chi.

    Returns a list of dicts with keys chi, eta, exact, pt (arrays restricted
    to |E| <= window, default 3 Omega).
    """
    params = check_params(params)
    out = []
    for chi in chi_grid:
        if not 0 <= chi <= 20:
            raise ValueError("chi grid must lie in [0, 20] pN")
        p = params.with_(chi=float(chi))
        d = derive(p)
        w = 3.0 * d.Omega if window is None else window
        exc = solve_exciton(p, d)
        M = m_operator(exc, d)
        H = build_full_h(exc, M, d, FockTruncation.fixed(n_max, d.beta_Omega))
        E = np.linalg.eigvalsh(H.matrix)
        Ept, _, _ = pt_spectrum(solve_pt(exc, M, d.Omega).dressed, n_max, d.Omega)
        out.append(
            {"chi": float(chi), "eta": d.eta, "exact": E[np.abs(E) <= w], "pt": Ept[np.abs(Ept) <= w]}
        )
    return out


@dataclass
class ShiftRow:
    epsilon: float
    label: str
    omega: float
    exciton_shift: float
    hybridization: float
    dressed: float
    phonon_shift: float


def shift_scan(params: ModelParams, eps_grid: Sequence[float]) -> list:
    """Second-order energy and phonon-frequency shifts of every exciton state."""
    params = check_params(params)
    rows = []
    for eps in eps_grid:
        if not 0 < eps <= 0.05:
            raise ValueError("epsilon grid must lie in (0, 0.05]")
        p = params.with_(epsilon=float(eps))
        d = derive(p)
        exc = solve_exciton(p, d)
        dr = solve_pt(exc, m_operator(exc, d), d.Omega).dressed
        for mu, label in enumerate(exc.labels):
            dw = dr.exciton_shifts[mu]
            rows.append(
                ShiftRow(
                    float(eps),
                    label,
                    float(exc.energies[mu]),
                    float(dw),
                    float(dr.energies[mu] - exc.energies[mu] - dw),
                    float(dr.energies[mu]),
                    float(dr.phonon_shifts[mu]),
                )
            )
    return rows


def qubit_coherence(G: complex, sigma0: complex) -> complex:
    """Coherence transferred to the receiving QC: sigma_L(t) = G(t) sigma_0(0)."""
    if abs(sigma0) > 0.5 + 1e-12:
        raise ValueError(f"|sigma0| = {abs(sigma0):.3g} exceeds the qubit bound 1/2")
    return complex(G) * complex(sigma0)


# ---------------------------------------------------------------------------
# invariant suite

IDENTITY_TOL = 1e-12
COMMUTATOR_TOL = 1e-10
RESIDUAL_TOL = 1e-12
COLLAPSE_TOL = 1e-8
UNITARITY_TOL = 1e-9
GENERATOR_LIMIT = 0.3


def _check(name, value, bound, note=""):
    value = float(value)
    return Check(name, bool(value <= bound), value, float(bound), float(bound - value), note)


def commutator_residual(params: ModelParams, n_max: int = 3) -> float:
    """max |[H0, S1] - V| in the truncated space, S1 = Z a^dag - Z^T a."""
    d = derive(params)
    exc = solve_exciton(params, d)
    M = m_operator(exc, d)
    H = build_full_h(exc, M, d, FockTruncation.fixed(n_max, d.beta_Omega))
    Z = build_pt_operators(exc, M, d.Omega).Z
    a = annihilation(n_max)
    S1 = np.kron(Z, a.T) - np.kron(Z.T, a)
    comm = H.h0 @ S1 - S1 @ H.h0
    return float(np.max(np.abs(comm - H.v)))


def chi_zero_spread(params: ModelParams, times) -> tuple[float, float]:
    """|G| disagreement at chi = 0.

    Returns the spread among the exact and both perturbative engines, and
    the deviation of the three-path model from its own phonon-free
    three-level law.
    """
    p = params.with_(chi=0.0)
    d = derive(p)
    with warnings.catch_warnings():
        # the thermal tail is irrelevant when the phonons are decoupled
        warnings.simplefilter("ignore", TruncationWarning)
        exact = ExactPropagator(p, n_max=2).fit().propagate(times).modulus
    mods = [
        exact,
        PerturbativePropagator(p, mode="full").fit().propagate(times).modulus,
        PerturbativePropagator(p, mode="diagonal").fit().propagate(times).modulus,
    ]
    ref = np.abs(bare_propagator(solve_exciton(p, d), times, p.Phi))
    spread = max(float(np.max(np.abs(m - ref))) for m in mods)
    tp = ThreePathPropagator(p).fit()
    law = np.abs(bare_propagator(analytic_eigensystem(p, d), times, p.Phi))
    return spread, float(np.max(np.abs(tp.propagate(times).modulus - law)))


def validate(params: Optional[ModelParams] = None, t_max: float = 1000.0, n_max: Optional[int] = None) -> list:
    """Run the invariant suite; every entry is a :class:`Check`."""
    params = check_params(params)
    d = derive(params)
    checks = list(validity_report(d, params))
    times = time_grid(t_max, int(round(t_max)) + 1)

    exc = solve_exciton(params, d)
    H_a = np.diag(exc.energies)
    shifted = exc.vectors @ H_a @ exc.vectors.T  # H_A - omega0 in the site basis
    o = exc.o
    psi_o = analytic_triplet(params, d).psi_o
    checks.append(_check("psi_o_residual", np.linalg.norm(shifted @ psi_o), RESIDUAL_TOL, "(|0> - Delta_N |L>)/sqrt 2"))
    checks.append(_check("psi_o_at_band_centre", abs(exc.energies[o]), RESIDUAL_TOL))
    M = m_operator(exc, d)

    try:
        ops = build_pt_operators(exc, M, d.Omega)
    except ResonanceError as err:
        checks.append(Check("pt_denominators", False, math.nan, 0.0, math.nan, str(err)))
        return checks
    checks.append(Check("pt_denominators", True, 0.0, 0.0, 0.0))
    dH, dO = delta_matrices(exc, M, d.Omega)
    checks.append(_check("identity_A", np.max(np.abs(ops.A - dH)), IDENTITY_TOL))
    checks.append(_check("identity_B", np.max(np.abs(ops.B + ops.B.T - dO)), IDENTITY_TOL))
    checks.append(_check("generator_small", np.max(np.abs(ops.Z)), GENERATOR_LIMIT, "max |Z|"))
    checks.append(_check("o_exciton_shift", abs(dH[o, o]), IDENTITY_TOL, "(dH_A)_oo"))
    checks.append(_check("o_phonon_shift", abs(dO[o, o]), IDENTITY_TOL, "(dOmega)_oo"))

    res = solve_pt(exc, M, d.Omega)
    F_o = decoherence_factor(d.boltzmann_ratio, res.dressed.phonon_shifts[o], times / params.Phi)
    checks.append(_check("F_o_unity", np.max(np.abs(F_o - 1.0)), COLLAPSE_TOL, "dressed o state"))

    small = params.with_(L=4)
    try:
        checks.append(_check("commutator_L4", commutator_residual(small, 3), COMMUTATOR_TOL, "[H0,S1] = V"))
    except ResonanceError as err:
        checks.append(Check("commutator_L4", False, math.nan, COMMUTATOR_TOL, math.nan, str(err)))

    ex = ExactPropagator(params, n_max=n_max).fit()
    G = ex.propagate(times).modulus
    checks.append(_check("unitarity", np.max(G) - 1.0, UNITARITY_TOL, "max |G_exact| - 1"))

    spread, tp_dev = chi_zero_spread(params, times)
    checks.append(_check("chi0_collapse", spread, COLLAPSE_TOL, "exact, pt_full, pt_diagonal vs bare"))
    checks.append(_check("chi0_threepath", tp_dev, COLLAPSE_TOL, "three-path vs three-level law"))

    model = build_model(d)
    Fm = decoherence_modulus(d.n_bar, model.dOmega_plus, times / params.Phi)
    floor = 1.0 / math.sqrt(1.0 + 4.0 * d.Delta_n_sq)
    checks.append(_check("F_modulus_floor", floor - np.min(Fm), 1e-12, "|F| >= 1/sqrt(1+4 dn^2)"))
    checks.append(Check("alpha_range", 0 < model.alpha < 1, model.alpha, 1.0, 1.0 - model.alpha))
    return checks


def all_passed(checks) -> bool:
    return all(c.passed for c in checks)
