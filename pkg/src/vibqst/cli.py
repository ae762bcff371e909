"""Command-line front end: ``key = value`` configs in, commented CSV out.

Exit codes: 0 success, 1 configuration error, 2 numerical failure,
3 validation failure.
"""

from __future__ import annotations

import argparse
import math
import sys
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .params import ModelParams, derive

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_VALIDATION = 0, 1, 2, 3
COMMANDS = ("spectrum", "crossing", "shifts", "propagate", "sweep-eps", "sweep-temp", "analytic", "validate")
FLOAT_FMT = "%.12g"


class ConfigError(ValueError):
    pass


def _version() -> str:
    from importlib.metadata import PackageNotFoundError, version

    try:
        return version("artifact")
    except PackageNotFoundError:
        return "0+unknown"


# ---------------------------------------------------------------------------
# configuration


def _float_list(text):
    return tuple(float(x) for x in text.replace(";", ",").split(",") if x.strip())


def _engines(text):
    names = tuple(x.strip() for x in text.split(",") if x.strip())
    allowed = ("exact", "pt_full", "pt_diagonal", "threepath")
    for n in names:
        if n not in allowed:
            raise ValueError(f"unknown engine {n!r}")
    if not names:
        raise ValueError("empty engine list")
    return names


def _nmax(text):
    t = text.strip().lower()
    if t == "auto":
        return None
    n = int(t)
    if n < 1:
        raise ValueError("n_max must be >= 1")
    return n


def _optional_float(text):
    return None if text.strip().lower() in ("none", "derived") else float(text)


@dataclass(frozen=True)
class RunConfig:
    omega0: float = 1660.0
    w_force: float = 15.0
    mass: float = 1.8e-25
    omega_c: Optional[float] = 96.86
    phi: float = 7.8
    chi_pn: float = 10.0
    epsilon: float = 0.013
    l: int = 10
    temperature_k: float = 300.0
    engine: tuple = ("pt_full",)
    t_max_phi: float = 2000.0
    n_points: int = 8001
    n_max: Optional[int] = None
    eps_grid: tuple = tuple(round(0.005 + 0.001 * i, 6) for i in range(46))
    temperatures: tuple = (300.0,)
    t_grid: tuple = tuple(float("%.6g" % x) for x in np.geomspace(10.0, 300.0, 25))
    eps_list: tuple = (0.01, 0.013, 0.02, 0.021)
    chi_grid: tuple = (0.0, 2.5, 5.0, 7.5, 10.0, 12.5, 15.0, 17.5, 20.0)
    fit_t_min: float = 10.0
    fit_t_max: float = 300.0
    n_jobs: int = 1
    out_dir: str = "."

    def model_params(self) -> ModelParams:
        return ModelParams(
            omega0=self.omega0,
            W_force=self.w_force,
            mass=self.mass,
            Phi=self.phi,
            chi=self.chi_pn,
            epsilon=self.epsilon,
            L=self.l,
            T=self.temperature_k,
            omega_c_override=self.omega_c,
        )


_PARSERS = {
    "omega0": float,
    "w_force": float,
    "mass": float,
    "omega_c": _optional_float,
    "phi": float,
    "chi_pn": float,
    "epsilon": float,
    "l": int,
    "temperature_k": float,
    "engine": _engines,
    "t_max_phi": float,
    "n_points": int,
    "n_max": _nmax,
    "eps_grid": _float_list,
    "temperatures": _float_list,
    "t_grid": _float_list,
    "eps_list": _float_list,
    "chi_grid": _float_list,
    "fit_t_min": float,
    "fit_t_max": float,
    "n_jobs": int,
    "out_dir": str,
}
assert set(_PARSERS) == {f.name for f in fields(RunConfig)}


def _check(cfg: RunConfig, where: str = "") -> RunConfig:
    try:
        cfg.model_params()
    except ValueError as exc:
        raise ConfigError(f"{where}{exc}") from None
    if cfg.t_max_phi <= 0 or cfg.n_points < 3:
        raise ConfigError(f"{where}time grid needs t_max_phi > 0 and n_points >= 3")
    if cfg.n_jobs == 0:
        raise ConfigError(f"{where}n_jobs must be non-zero")
    return cfg


def apply_overrides(cfg: RunConfig, items, where=lambda key: "") -> RunConfig:
    changes = {}
    for key, raw in items:
        norm = key.strip().lower().replace("-", "_")
        if norm not in _PARSERS:
            raise ConfigError(f"{where(key)}unknown key {key!r}")
        try:
            changes[norm] = _PARSERS[norm](raw.strip())
        except ValueError as exc:
            raise ConfigError(f"{where(key)}cannot parse {key} = {raw.strip()!r}: {exc}") from None
    return replace(cfg, **changes)


def parse_config(text: str, base: Optional[RunConfig] = None) -> RunConfig:
    """Parse ``key = value`` lines (``#`` starts a comment, keys are case-insensitive)."""
    cfg = base or RunConfig()
    for lineno, line in enumerate(text.splitlines(), 1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {body!r}")
        key, value = body.split("=", 1)
        where = f"line {lineno}: "
        cfg = apply_overrides(cfg, [(key, value)], where=lambda _: where)
        _check(cfg, f"{where}key {key.strip()}: ")
    return _check(cfg)


def _fmt_value(v) -> str:
    if v is None:
        return "none"
    if isinstance(v, tuple):
        return ", ".join(_fmt_value(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def render_config(cfg: RunConfig) -> str:
    out = []
    for f in fields(RunConfig):
        v = getattr(cfg, f.name)
        if f.name == "n_max" and v is None:
            out.append("n_max = auto")
        else:
            out.append(f"{f.name} = {_fmt_value(v)}")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# output


def _fmt(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return FLOAT_FMT % x


def write_csv(path: Path, cfg: RunConfig, command: str, columns, rows, notes=()) -> Path:
    """CSV with a '#' header: version, resolved config, column meanings, notes."""
    header = [f"# vibqst {_version()}", f"# command: {command}", "# config:"]
    header += [f"#   {line}" for line in render_config(cfg).splitlines()]
    d = derive(cfg.model_params())
    header.append(
        "# derived: E_B = %s, Omega = %s, eta = %s, n_bar = %s"
        % tuple(_fmt(v) for v in (d.E_B, d.Omega, d.eta, d.n_bar))
    )
    header += [f"# {note}" for note in notes]
    header.append("# columns:")
    header += [f"#   {name}: {desc}" for name, desc in columns]
    lines = header + [",".join(name for name, _ in columns)]
    lines += [",".join(_fmt(v) for v in row) for row in rows]
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    return path


def config_from_csv(path) -> RunConfig:
    """Recover the resolved configuration echoed in a CSV header."""
    body, inside = [], False
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.startswith("#"):
            break
        if line == "# config:":
            inside = True
            continue
        if inside and line.startswith("#   "):
            body.append(line[4:])
        elif inside:
            break
    return parse_config("\n".join(body))


# ---------------------------------------------------------------------------
# commands


def _cmd_spectrum(cfg: RunConfig, out: Path):
    from .harness import spectrum_compare

    n_max = cfg.n_max or 180
    sc = spectrum_compare(cfg.model_params(), n_max=n_max)
    phi = cfg.phi
    rows = [
        (e, p, e - p, nu, n, f, s, fl)
        for e, p, nu, n, f, s, fl in zip(
            sc.exact / phi, sc.pt / phi, sc.nu, sc.n, sc.folded / phi, sc.spacing / phi, sc.flagged
        )
    ]
    cols = [
        ("E_exact", "exact level minus omega0 (units of Phi)"),
        ("E_pt", "paired second-order level E_{nu,n} minus omega0 (units of Phi)"),
        ("dE", "E_exact - E_pt (units of Phi)"),
        ("nu", "dressed exciton index of the paired level"),
        ("n", "phonon number of the paired level"),
        ("folded", "E_exact modulo Omega (units of Phi)"),
        ("spacing", "distance to the nearest exact level (units of Phi)"),
        ("flag", "1 if |dE| exceeds half the local spacing"),
    ]
    q = sc.quantiles()
    notes = [f"n_max = {n_max}", "pairing: by rank of the sorted spectra",
             "|dE| quantiles (50%, 90%, max) in Phi: " + ", ".join(_fmt(v / phi) for v in q)]
    return [write_csv(out / "spectrum.csv", cfg, "spectrum", cols, rows, notes)]


def _cmd_crossing(cfg: RunConfig, out: Path):
    from .harness import crossing_scan

    n_max = cfg.n_max or 12
    rows = []
    for block in crossing_scan(cfg.model_params(), cfg.chi_grid, n_max=n_max):
        for kind in ("exact", "pt"):
            for E in block[kind]:
                rows.append((block["chi"], block["eta"], kind, E / cfg.phi))
    cols = [
        ("chi_pn", "coupling strength (pN)"),
        ("eta", "exciton-phonon coupling (cm^-1)"),
        ("kind", "exact or pt level"),
        ("E", "level minus omega0 (units of Phi), |E| <= 3 Omega"),
    ]
    return [write_csv(out / "crossing.csv", cfg, "crossing", cols, rows, [f"n_max = {n_max}"])]


def _cmd_shifts(cfg: RunConfig, out: Path):
    from .harness import shift_scan

    rows = [
        (r.epsilon, r.label, r.omega, r.exciton_shift, r.hybridization, r.dressed, r.phonon_shift)
        for r in shift_scan(cfg.model_params(), cfg.eps_grid)
    ]
    cols = [
        ("epsilon", "QC-channel coupling"),
        ("label", "exciton state"),
        ("omega", "bare energy minus omega0 (cm^-1)"),
        ("d_omega", "diagonal second-order shift (cm^-1)"),
        ("hybridization", "dressed - bare - d_omega (cm^-1)"),
        ("omega_hat", "dressed energy minus omega0 (cm^-1)"),
        ("d_Omega", "phonon frequency shift of the dressed state (cm^-1)"),
    ]
    return [write_csv(out / "shifts.csv", cfg, "shifts", cols, rows)]


def _cmd_propagate(cfg: RunConfig, out: Path):
    from .harness import find_max, run_engine

    p = cfg.model_params()
    times = np.linspace(0.0, cfg.t_max_phi, cfg.n_points)
    series = {e: run_engine(p, e, times, n_max=cfg.n_max) for e in cfg.engine}
    single = len(cfg.engine) == 1
    cols = [("t_phi", "time (units of 1/Phi)")]
    for e in cfg.engine:
        suffix = "" if single else f"_{e}"
        cols += [
            (f"re_G{suffix}", f"Re G_L0 ({e})"),
            (f"im_G{suffix}", f"Im G_L0 ({e})"),
            (f"abs_G{suffix}", f"|G_L0| ({e})"),
        ]
    rows = []
    for k, t in enumerate(times):
        row = [t]
        for e in cfg.engine:
            v = series[e].values[k]
            row += [v.real, v.imag, abs(v)]
        rows.append(row)
    notes = [f"window: [0, {_fmt(cfg.t_max_phi)}] with {cfg.n_points} points"]
    for e, s in series.items():
        r = find_max(s)
        notes.append(f"{e}: G_M = {_fmt(r.G_M)} at T_M = {_fmt(r.T_M)}; double = {int(r.double)}")
        notes += [f"{e}: {w}" for w in s.warnings]
    return [write_csv(out / "propagate.csv", cfg, "propagate", cols, rows, notes)]


_SWEEP_COLS = [
    ("engine", "propagator engine"),
    ("epsilon", "QC-channel coupling"),
    ("T", "temperature (K)"),
    ("G_M", "max |G_L0| on the window"),
    ("T_M", "time of the maximum (units of 1/Phi)"),
    ("double", "1 if two local maxima differ by <= 0.05"),
    ("maxima", "local maxima above 0.5 as t:|G| pairs"),
    ("alpha", "W_s / W_f of the three-path model"),
    ("TM_over_Tf", "T_M / T_f"),
    ("n_max", "phonon cutoff (exact engine)"),
    ("error", "failure message, empty on success"),
]


def _sweep_rows(table):
    rows = []
    for r in table.rows:
        rep = r.report
        maxima = " ".join(f"{_fmt(t)}:{_fmt(g)}" for t, g in rep.maxima) if rep else ""
        rows.append(
            (
                table.engine,
                r.epsilon,
                r.T,
                rep.G_M if rep else math.nan,
                rep.T_M if rep else math.nan,
                rep.double if rep else False,
                maxima,
                r.alpha,
                r.tm_over_tf,
                "" if r.n_max is None else r.n_max,
                r.error.replace(",", ";"),
            )
        )
    return rows


def _cmd_sweep_eps(cfg: RunConfig, out: Path):
    from .harness import sweep_epsilon

    paths = []
    for e in cfg.engine:
        tab = sweep_epsilon(
            cfg.model_params(), cfg.eps_grid, cfg.temperatures, engine=e, t_max=cfg.t_max_phi,
            n_points=cfg.n_points, n_max=cfg.n_max, n_jobs=cfg.n_jobs,
        )
        name = "sweep_eps.csv" if len(cfg.engine) == 1 else f"sweep_eps_{e}.csv"
        notes = [f"window: [0, {_fmt(cfg.t_max_phi)}] with {cfg.n_points} points"]
        paths.append(write_csv(out / name, cfg, "sweep-eps", _SWEEP_COLS, _sweep_rows(tab), notes))
    return paths


def _cmd_sweep_temp(cfg: RunConfig, out: Path):
    from .harness import sweep_temperature

    paths = []
    for e in cfg.engine:
        tab = sweep_temperature(
            cfg.model_params(), cfg.eps_list, cfg.t_grid, engine=e, t_max=cfg.t_max_phi,
            n_points=cfg.n_points, n_max=cfg.n_max, fit_window=(cfg.fit_t_min, cfg.fit_t_max),
            n_jobs=cfg.n_jobs,
        )
        notes = [f"window: [0, {_fmt(cfg.t_max_phi)}] with {cfg.n_points} points"]
        for eps, fit in tab.fits.items():
            notes.append(f"epsilon = {_fmt(eps)}: fitted T0 = {_fmt(fit['T0'])} K, knee T* = {_fmt(fit['T_knee'])} K")
        name = "sweep_temp.csv" if len(cfg.engine) == 1 else f"sweep_temp_{e}.csv"
        paths.append(write_csv(out / name, cfg, "sweep-temp", _SWEEP_COLS, _sweep_rows(tab), notes))
    return paths


def _cmd_analytic(cfg: RunConfig, out: Path):
    from .threepath import OutOfValidityError, build_model, epsilon_star, gm_star, resonance_condition, resonance_label

    p = cfg.model_params()
    rows = []
    for T in cfg.temperatures:
        d = derive(p.with_(T=T))
        try:
            est = gm_star(d, epsilon_star(d))
            rows.append((T, d.n_bar, est.epsilon, est.G_M, est.n0, est.delta_n, est.T0, ""))
        except OutOfValidityError as exc:
            rows.append((T, d.n_bar, math.nan, math.nan, math.nan, math.nan, math.nan, str(exc).replace(",", ";")))
    cols = [
        ("T", "temperature (K)"),
        ("n_bar", "thermal phonon number"),
        ("eps_star", "optimal QC-channel coupling"),
        ("G_M_star", "predicted maximum fidelity at eps_star"),
        ("n0", "|omega_hat_+| / |dOmega_+| at eps_star"),
        ("delta_n", "n0 - n_bar"),
        ("T0", "2 n0 Omega / (pi k_B) in K"),
        ("error", "validity failure, empty on success"),
    ]
    paths = [write_csv(out / "analytic.csv", cfg, "analytic", cols, rows)]

    d = derive(p)
    arows = []
    for eps in cfg.eps_grid:
        m = build_model(d, eps)
        try:
            label = resonance_label(resonance_condition(m.alpha))
        except ValueError:
            label = "out of range"
        arows.append((eps, m.alpha, m.W_s, m.W_f, m.T_f, m.T_plus, m.T_minus, label))
    acols = [
        ("epsilon", "QC-channel coupling"),
        ("alpha", "W_s / W_f"),
        ("W_s", "slow frequency (cm^-1)"),
        ("W_f", "fast frequency (cm^-1)"),
        ("T_f", "pi / W_f (units of 1/Phi)"),
        ("T_plus", "pi / W_+ (units of 1/Phi)"),
        ("T_minus", "pi / W_- (units of 1/Phi)"),
        ("resonance", "matching interference condition"),
    ]
    paths.append(write_csv(out / "alpha.csv", cfg, "analytic", acols, arows))
    return paths


def _cmd_validate(cfg: RunConfig, out: Path):
    from .harness import validate

    checks = validate(cfg.model_params(), t_max=min(cfg.t_max_phi, 1000.0), n_max=cfg.n_max)
    rows = [(c.name, c.passed, c.value, c.bound, c.margin, c.note) for c in checks]
    cols = [
        ("check", "invariant name"),
        ("passed", "1 on success"),
        ("value", "measured quantity"),
        ("bound", "threshold"),
        ("margin", "bound - value"),
        ("note", "description"),
    ]
    path = write_csv(out / "validate.csv", cfg, "validate", cols, rows)
    failed = [c.name for c in checks if not c.passed]
    return [path], failed


_HANDLERS = {
    "spectrum": _cmd_spectrum,
    "crossing": _cmd_crossing,
    "shifts": _cmd_shifts,
    "propagate": _cmd_propagate,
    "sweep-eps": _cmd_sweep_eps,
    "sweep-temp": _cmd_sweep_temp,
    "analytic": _cmd_analytic,
    "validate": _cmd_validate,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="vibqst", description="Vibrational exciton state transfer calculations.")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", help="key = value configuration file")
    ap.add_argument("--chi-pn")
    ap.add_argument("--epsilon")
    ap.add_argument("--temperature-k")
    ap.add_argument("--engine", help="engine name or comma-separated list")
    ap.add_argument("--t-max-phi")
    ap.add_argument("--n-max", help="integer or 'auto'")
    ap.add_argument("--out-dir")
    ap.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="any other config key")
    return ap


def resolve_config(args) -> RunConfig:
    text = ""
    if args.config:
        try:
            text = Path(args.config).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read {args.config}: {exc}") from None
    cfg = parse_config(text)
    items = []
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        items.append(tuple(item.split("=", 1)))
    for flag in ("chi_pn", "epsilon", "temperature_k", "engine", "t_max_phi", "n_max", "out_dir"):
        value = getattr(args, flag)
        if value is not None:
            items.append((flag, value))
    cfg = apply_overrides(cfg, items, where=lambda key: f"option {key}: ")
    return _check(cfg)


def dispatch(command: str, cfg: RunConfig) -> int:
    out = Path(cfg.out_dir)
    handler = _HANDLERS[command]
    try:
        result = handler(cfg, out)
    except (ArithmeticError, RuntimeError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"invalid request: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if command == "validate":
        paths, failed = result
        for p in paths:
            print(p)
        if failed:
            print("failed checks: " + ", ".join(failed), file=sys.stderr)
            return EXIT_VALIDATION
        return EXIT_OK
    for p in result:
        print(p)
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return dispatch(args.command, cfg)
