"""qslab command line: simulations, certificates, manifold residuals, perturbation runs, presets.

Exit codes: 0 success, 2 invalid input, 3 blow-up guard, 4 certificate failure with --strict.
"""
from __future__ import annotations

import argparse
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import bounds, manifold, perturbation, spectral
from .csvio import write_mode_csv, write_rows
from .integrator import BlowUpError, TimeGrid, integrate
from .model import AdmissibilityError, ModelParams, ModeState, reduced_field
from .observables import (OBSERVABLE_NAMES, DegenerateChartError, diagnostic_series,
                          fit_decay_rate, observable_field, to_observables)

EXIT_OK, EXIT_INVALID, EXIT_BLOWUP, EXIT_CERT = 0, 2, 3, 4
PRESETS = ("figAB", "figR", "figlogA", "figlogB")

# Flag name -> (type, default). Defaults apply after the config file and the flags.
OPTIONS = {
    "nu": (float, 0.01),
    "delta": (float, 1.0),
    "eps": (str, "0.04,0.02,0.01"),
    "eps0": (int, 1),
    "alpha": (float, 1.0),
    "t_end": (float, None),
    "dt": (float, None),
    "seed": (int, 1),
    "init": (str, None),
    "out": (str, None),
    "amplitude": (float, None),
    "r": (float, 2.0),
    "K": (int, 6),
}


class InvalidScenario(ValueError):
    pass


def _parse_config(path: str) -> dict:
    """Line-based key=value file; '#' starts a comment."""
    out = {}
    for n, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidScenario(f"{path}:{n}: expected key=value")
        key, val = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in OPTIONS and key != "strict":
            raise InvalidScenario(f"{path}:{n}: unknown key {key!r}")
        out[key] = val
    return out


def _resolve(args: argparse.Namespace) -> argparse.Namespace:
    conf = _parse_config(args.config) if args.config else {}
    for key, (typ, default) in OPTIONS.items():
        if getattr(args, key, None) is None:
            raw = conf.get(key)
            try:
                setattr(args, key, typ(raw) if raw is not None else default)
            except ValueError as exc:
                raise InvalidScenario(f"bad value for {key}: {raw!r}") from exc
    if not args.strict and conf.get("strict", "").lower() in ("1", "true", "yes"):
        args.strict = True
    return args


def _out_path(args, default_name: str) -> Path:
    name = Path(args.out).name if args.out else f"{default_name}.csv"
    env = os.environ.get("QSLAB_OUT_DIR")
    if env:
        return Path(env) / name
    return Path(args.out) if args.out else Path("qslab_out") / name


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise InvalidScenario(f"cannot parse number list {text!r}") from exc


def _initial_modes(args, params: ModelParams, real: bool = False) -> np.ndarray:
    """Explicit --init (4 reals or 8 re/im values) or a seeded random state."""
    if args.init:
        v = _floats(args.init)
        if len(v) == 4:
            return np.array(v, dtype=complex)
        if len(v) == 8:
            return np.array(v[0::2]) + 1j * np.array(v[1::2])
        raise InvalidScenario("--init needs 4 real or 8 (re, im) values")
    amp = 0.5 * params.nu if args.amplitude is None else args.amplitude
    return seeded_state(args.seed, amp, real)


def seeded_state(seed: int, amplitude: float, real: bool = False) -> np.ndarray:
    rng = np.random.default_rng(seed)
    if real:
        return amplitude * rng.standard_normal(4).astype(complex)
    return amplitude * (rng.standard_normal(4) + 1j * rng.standard_normal(4)) / math.sqrt(2.0)


def _dt(args, nu: float) -> float:
    return args.dt if args.dt is not None else min(nu / 10.0, 1e-2)


def _run_reduced(params: ModelParams, w0: np.ndarray, t_end: float, dt: float):
    # about a thousand samples per viscous time 1/nu
    stride = max(1, int(1e-3 / (params.nu * dt)))
    return integrate(lambda t, w: reduced_field(w, params), w0,
                     TimeGrid(0.0, t_end, dt=dt, sample_stride=stride),
                     {"model": "reduced", "nu": params.nu, "delta": params.delta})


def _emit(lines: list[str], csv_path: Path | None) -> None:
    for line in lines:
        print(line)
    if csv_path is not None:
        csv_path.with_suffix(".report").write_text("".join(line + "\n" for line in lines))


def _status(certs, strict: bool) -> int:
    return EXIT_CERT if strict and not all(c.passed for c in certs) else EXIT_OK


def cmd_simulate(args) -> int:
    params = ModelParams(args.nu, args.delta)
    t_end = args.t_end if args.t_end is not None else 5.0 / args.nu
    if args.model == "reduced":
        traj = _run_reduced(params, _initial_modes(args, params), t_end, _dt(args, args.nu))
        path = write_mode_csv(_out_path(args, "simulate_reduced"), traj.times, traj.states)
    elif args.model == "observable":
        if args.delta != 1.0:
            raise InvalidScenario("the observable model is defined only for delta = 1")
        w0 = _initial_modes(args, params)
        x0 = to_observables(ModeState.from_array(w0)).as_real()
        traj = integrate(lambda t, x: observable_field(x, args.nu), x0,
                         TimeGrid(0.0, t_end, dt=_dt(args, args.nu)))
        path = write_rows(_out_path(args, "simulate_observable"), ["t", *OBSERVABLE_NAMES],
                          ([t, *x] for t, x in zip(traj.times, traj.states)))
    else:
        amp = args.nu if args.amplitude is None else args.amplitude
        field = spectral.random_field(args.K, args.delta, args.seed, amp**2)
        dt = args.dt if args.dt is not None else 0.05
        traj = spectral.integrate_field(field, args.nu, t_end, dt, sample_stride=max(1, int(round(1.0 / dt))))
        path = write_mode_csv(_out_path(args, "simulate_spectral"), traj.times,
                              spectral.projected_states(traj, args.K))
    print(f"wrote {path}")
    return EXIT_OK


def cmd_certify(args) -> int:
    params = ModelParams(args.nu, args.delta)
    kind = args.kind
    if kind == "symmetric":
        if args.delta != 1.0:
            raise InvalidScenario("symmetric certificates need delta = 1")
        t_end = args.t_end if args.t_end is not None else 3.0 / args.nu
        traj = _run_reduced(params, _initial_modes(args, params, real=True), t_end, _dt(args, args.nu))
        certs = bounds.symmetric_certificates(traj, params)
    else:
        if args.delta == 1.0:
            raise InvalidScenario(f"{kind} certificates need delta != 1")
        w0 = _initial_modes(args, params)
        d0 = diagnostic_series(w0)
        consts = bounds.asymmetric_constants(params, float(d0["A"]), float(d0["B"]),
                                             allow_absent_fast_phase=True)
        if kind == "asymmetric":
            t_end = args.t_end if args.t_end is not None else 3.0 / args.nu
        else:
            t_end = args.t_end if args.t_end is not None else 6.0 / abs(consts.gamma)
        traj = _run_reduced(params, w0, t_end, _dt(args, args.nu))
        if kind == "asymmetric":
            certs = bounds.asymmetric_certificates(traj, consts)
        elif args.delta < 1.0:
            certs = [bounds.ratio_certificate(traj, consts)]
        else:
            certs = [bounds.u_ratio_certificate(traj, consts)]
    path = write_mode_csv(_out_path(args, f"certify_{kind}"), traj.times, traj.states)
    _emit([c.report_line() for c in certs], path)
    return _status(certs, args.strict)


def cmd_manifold(args) -> int:
    dirs = manifold.residual_directions(32, args.seed)
    scales = np.geomspace(1e-4, 1e-2, 9)
    rows, slopes = [], []
    for i, d in enumerate(dirs):
        for s in scales:
            rows.append([i, s, manifold.manifold_residual(args.r, args.nu, d, s)])
        slopes.append(manifold.residual_slope(args.r, args.nu, d, scales))
    path = write_rows(_out_path(args, "manifold_residual"), ["direction", "scale", "residual"], rows)
    ok = min(slopes) >= 2.5
    _emit([f"CERT manifold_residual_slope pass={str(ok).lower()} worst_margin={min(slopes) - 2.5:.6e} "
           f"at_t=0 min_slope={min(slopes):.6f} r={args.r} nu={args.nu}"], path)
    return EXIT_CERT if args.strict and not ok else EXIT_OK


def cmd_perturb(args) -> int:
    O10, O30 = (_floats(args.init) if args.init else [1.0, 0.8])[:2]
    eps_list = _floats(args.eps)
    if args.kind == "critical-times":
        rows = []
        for e in eps_list:
            sol = perturbation.asymptotic_solution(perturbation.PerturbationConfig(e, args.eps0, 1.0, args.alpha), O10, O30)
            tp, tm = perturbation.critical_times(sol)
            print(f"eps={e:g} tau_plus={tp:.17g} tau_minus={tm:.17g}")
            rows.append([e, tp, tm])
        path = write_rows(_out_path(args, "critical_times"), ["eps", "tau_plus", "tau_minus"], rows)
    elif args.kind == "sweep":
        table = perturbation.convergence_study(eps_list, O10, O30, epsilon0=args.eps0, alpha=args.alpha)
        path = write_rows(_out_path(args, "perturb_sweep"), ["eps", "x_error", "y_error"],
                          ([r.epsilon, r.x_error, r.y_error] for r in table))
        for a, b in zip(table, table[1:]):
            print(f"eps {a.epsilon:g}->{b.epsilon:g}: x ratio {a.x_error / b.x_error:.4f} "
                  f"y ratio {a.y_error / b.y_error:.4f}")
    else:
        cfg = perturbation.PerturbationConfig(eps_list[0], args.eps0, 1.0, args.alpha)
        sol = perturbation.asymptotic_solution(cfg, O10, O30)
        t_end = args.t_end if args.t_end is not None else 1.0
        traj = integrate(lambda t, W: perturbation.scaled_field(W, cfg, 1),
                         perturbation.consistent_initial_data(sol),
                         TimeGrid(0.0, t_end, dt=args.dt if args.dt is not None else perturbation._tau_dt(cfg, sol)))
        X = np.abs(traj.states[:, 0]) ** 2
        Y = np.abs(traj.states[:, 1]) ** 2
        path = write_rows(_out_path(args, "perturb_compare"), ["tau", "X_num", "Y_num", "X_bar", "Y_bar"],
                          zip(traj.times, X, Y, sol.X_bar(traj.times), sol.Y_bar(traj.times)))
    print(f"wrote {path}")
    return EXIT_OK


def cmd_preset(args) -> int:
    nu = 0.01
    params = ModelParams(nu, 1.0)
    dt = args.dt if args.dt is not None else 0.01
    if args.name == "figR":
        lines, certs = [], []
        for i, R0 in enumerate((0.25, 0.5, 1.0, 2.0, 4.0)):
            w = seeded_state(args.seed + i, 0.5 * nu)
            # rescale the low modes so that |w1|^2/|w3|^2 = R0 with A unchanged
            A = abs(w[0]) ** 2 + abs(w[1]) ** 2
            w[0] *= math.sqrt(A * R0 / (1 + R0)) / abs(w[0])
            w[1] *= math.sqrt(A / (1 + R0)) / abs(w[1])
            traj = _run_reduced(params, w, 5.0 / nu, dt)
            path = write_mode_csv(_out_path(args, f"figR_{R0:g}"), traj.times, traj.states)
            R = diagnostic_series(traj.states)["R"]
            q = traj.times >= 0.75 * traj.times[-1]
            change = float(abs(R[q][-1] - R[q][0]) / R[q][0])
            ok = change < 0.01 and 0 < R[-1] < math.inf
            certs.append(ok)
            lines.append(f"CERT figR_R0={R0:g}_flat pass={str(ok).lower()} worst_margin={0.01 - change:.6e} "
                         f"at_t={traj.times[-1]:.6g} R_final={R[-1]:.6e}")
        _emit(lines, path.with_name("figR.csv"))
        return EXIT_CERT if args.strict and not all(certs) else EXIT_OK

    amp = 0.07 if args.amplitude is None else args.amplitude
    w0 = seeded_state(args.seed, amp, real=True)
    t_end = 5.0 / nu
    traj = _run_reduced(params, w0, t_end, dt)
    path = write_mode_csv(_out_path(args, args.name), traj.times, traj.states)
    d = diagnostic_series(traj.states)
    A, B, t = d["A"], d["B"], traj.times
    if args.name == "figAB":
        certs = bounds.symmetric_certificates(traj, params)
        hit = np.nonzero(B <= 0.01 * B[0])[0]
        t_drop = float(t[hit[0]]) if len(hit) else math.inf
        ok = t_drop < 1.0 / nu and bool(np.all(A[t <= 1.0 / nu] >= A[0] * math.exp(-2.0)))
        lines = [c.report_line() for c in certs]
        lines.append(f"CERT figAB_B_drop pass={str(ok).lower()} worst_margin={1.0 / nu - t_drop:.6e} at_t={t_drop:.6g}")
        _emit(lines, path)
        return EXIT_CERT if args.strict and not (ok and all(c.passed for c in certs)) else EXIT_OK
    if args.name == "figlogA":
        rate = fit_decay_rate(traj, "A")
        ok = abs(rate - 2 * nu) <= 0.05 * 2 * nu
        line = (f"CERT figlogA_rate pass={str(ok).lower()} worst_margin={0.05 * 2 * nu - abs(rate - 2 * nu):.6e} "
                f"at_t={t[-1]:.6g} fitted_rate={rate:.6e} target_rate={2 * nu:.6e}")
    else:
        early = fit_decay_rate(traj, "B", window=(0.0, 1.0 / nu))
        bound = bounds.b_rate_bound(params, float(A[0]))
        ok = early >= bound
        line = (f"CERT figlogB_fast_rate pass={str(ok).lower()} worst_margin={early - bound:.6e} "
                f"at_t={1.0 / nu:.6g} fitted_rate={early:.6e} bound_rate={bound:.6e}")
    _emit([line], path)
    return EXIT_CERT if args.strict and not ok else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    for key in OPTIONS:
        common.add_argument("--" + key.replace("_", "-"), dest=key, type=OPTIONS[key][0], default=None)
    common.add_argument("--strict", action="store_true", help="exit 4 when a certificate fails")
    common.add_argument("--config", help="key=value file; flags override it")

    p = argparse.ArgumentParser(prog="qslab", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    s = sub.add_parser("simulate", parents=[common])
    s.add_argument("--model", choices=("reduced", "observable", "spectral"), default="reduced")
    s.set_defaults(func=cmd_simulate)
    c = sub.add_parser("certify", parents=[common])
    c.add_argument("kind", choices=("symmetric", "asymmetric", "ratio"))
    c.set_defaults(func=cmd_certify)
    m = sub.add_parser("manifold-residual", parents=[common])
    m.set_defaults(func=cmd_manifold)
    pt = sub.add_parser("perturb", parents=[common])
    pt.add_argument("kind", choices=("compare", "sweep", "critical-times"))
    pt.set_defaults(func=cmd_perturb)
    pr = sub.add_parser("preset", parents=[common])
    pr.add_argument("name", choices=PRESETS)
    pr.set_defaults(func=cmd_preset)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    try:
        return args.func(_resolve(args))
    except BlowUpError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BLOWUP
    except (InvalidScenario, AdmissibilityError, DegenerateChartError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
