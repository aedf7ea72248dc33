"""Command-line front end: ``verify``, ``spectrum``, ``evolve``, ``scaling`` and ``rerun``.

Every command that writes files also writes ``manifest.json`` next to them,
with the parameters, the exact argument vector and sha256 digests of the
outputs; ``rerun`` replays a manifest and checks the digests.
"""

from __future__ import annotations

import argparse
import re
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .errors import KitaevError, ParameterError, ParseError
from .io_utils import (
    environment_info,
    read_manifest,
    utc_now,
    verify_digests,
    write_csv,
    write_manifest,
)
from .model_core import ChainParams, CheckResult, identity_suite

EXIT_OK, EXIT_FAIL, EXIT_ERROR = 0, 1, 2


def parse_complex(text: str) -> complex:
    """Parse ``"a+bi"``-style literals (``i`` or ``j`` as imaginary unit)."""
    s = str(text).strip().replace(" ", "").lower()
    if not s:
        raise argparse.ArgumentTypeError("empty complex literal")
    if s[-1] in "ij":
        head = s[:-1]
        if head in ("", "+", "-") or head[-1] in "+-":
            head += "1"
        s = head + "j"
    try:
        return complex(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a complex literal: {text!r}") from None


def parse_int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in str(text).split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def parse_str_list(text: str) -> list[str]:
    return [x.strip() for x in re.split(r";|,(?![^\[]*\])", str(text)) if x.strip()]


def load_config(path) -> dict[str, str]:
    """``key = value`` lines; ``#`` starts a comment; keys use flag names (``-`` or ``_``)."""
    out = {}
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise ParseError(f"cannot read config {path}: {exc}") from exc
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        out[key.lstrip("-").replace("-", "_")] = value
    return out


def _add_model_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("model")
    g.add_argument("--n", type=int, default=4, help="number of sites N")
    g.add_argument("--w", type=parse_complex, default=1 + 0j, help="hopping w (complex, e.g. 1 or 0.5+0.2i)")
    g.add_argument("--delta", type=parse_complex, default=1j, help="pairing Delta (default i)")
    g.add_argument("--mu", type=float, default=0.0, help="chemical potential")
    g.add_argument("--gamma", type=float, default=1.0, help="dissipation rate Gamma (default 1)")
    g.add_argument("--jump-delta", type=parse_complex, default=1 + 0j,
                   help="jump asymmetry d in L_j = sqrt(Gamma)(c_j + d c_j^+)")
    g.add_argument("--interaction", action="append", default=[], metavar="V:s1,s2,...",
                   help="interaction V prod gamma_{2s-1} (repeatable; exact methods only)")
    p.add_argument("--tol", type=float, default=1e-10, help="pass/fail threshold for verify")
    p.add_argument("--classify-tol", type=float, default=1e-9, help="zero/imaginary eigenvalue threshold")
    p.add_argument("--out", type=Path, default=None, help="output directory (CSV + manifest)")
    p.add_argument("--config", type=Path, default=None, help="key = value file; flags override it")


def _parse_interaction(text: str):
    try:
        coeff, sites = text.split(":", 1)
        return parse_complex(coeff), tuple(int(s) for s in sites.split(","))
    except (ValueError, argparse.ArgumentTypeError):
        raise ParameterError(f"interaction must look like 'V:1,2,3,4', got {text!r}") from None


def params_from_args(args: argparse.Namespace, N: int | None = None) -> ChainParams:
    interactions = args.interaction
    if isinstance(interactions, str):
        interactions = [interactions]
    return ChainParams(
        N=args.n if N is None else N,
        w=args.w,
        delta=args.delta,
        mu=args.mu,
        gamma=args.gamma,
        jump_asymmetry=args.jump_delta,
        interactions=tuple(_parse_interaction(t) for t in interactions),
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dissipative-kitaev",
        description="Driven-dissipative Kitaev chain: symmetry checks, Liouvillian spectra, correlation dynamics.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", help="evaluate the operator identities at small N")
    _add_model_args(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("spectrum", help="Liouvillian spectrum (exact or third quantization)")
    _add_model_args(p)
    p.add_argument("--method", choices=("exact", "thirdq"), default="thirdq")
    p.add_argument("--max-excitations", type=int, default=None, help="thirdq: at most m excited rapidities")
    p.add_argument("--realpart-cap", type=float, default=None, help="thirdq: keep |Re lambda| <= r")
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("evolve", help="integrate two-point correlations")
    _add_model_args(p)
    p.add_argument("--initial", default="random", help="uniform-pair | random | file:PATH")
    p.add_argument("--seed", type=parse_int_list, default=[0], help="seed or comma-separated seeds")
    p.add_argument("--tmax", type=float, default=100.0)
    p.add_argument("--dt-out", type=float, default=0.1)
    p.add_argument("--observables", type=parse_str_list, default=["F[1,2]", "G[1,2]"],
                   help="e.g. 'F[1,2];G[1,2]' (F = <c_m c_n>, G = <c_m^+ c_n>)")
    p.add_argument("--integrator", choices=("DOP853", "RK45", "spectral"), default="DOP853")
    p.set_defaults(func=cmd_evolve)

    p = sub.add_parser("scaling", help="long-time |<c_1 c_2>| versus N")
    _add_model_args(p)
    p.add_argument("--n-list", type=parse_int_list, default=[4, 8, 12, 16])
    p.add_argument("--initial", default="uniform-pair")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tmax", type=float, default=100.0)
    p.add_argument("--dt-out", type=float, default=0.05)
    p.add_argument("--window", type=float, default=0.25, help="trailing window fraction")
    p.add_argument("--split", type=int, default=32, help="N below this go to the small-N fit")
    p.add_argument("--integrator", choices=("DOP853", "RK45", "spectral"), default="spectral")
    p.set_defaults(func=cmd_scaling)

    p = sub.add_parser("rerun", help="replay a run manifest and compare output digests")
    p.add_argument("manifest", type=Path, help="manifest.json or its directory")
    p.add_argument("--out", type=Path, default=None, help="directory for the replay (default: original)")
    p.set_defaults(func=cmd_rerun)
    return parser


def _apply_config(parser: argparse.ArgumentParser, argv: Sequence[str]) -> None:
    """Install config-file values as subcommand defaults so explicit flags win."""
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("command", nargs="?")
    pre.add_argument("--config", type=Path, default=None)
    known, _ = pre.parse_known_args(argv)
    if known.config is None or known.command is None:
        return
    config = load_config(known.config)
    subparsers = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    sub = subparsers.choices.get(known.command)
    if sub is None:
        return
    dests = {a.dest: a for a in sub._actions}
    unknown = sorted(set(config) - set(dests))
    if unknown:
        raise ParseError(f"unknown config keys for '{known.command}': {', '.join(unknown)}")
    for key, value in config.items():
        action = dests[key]
        # string defaults are converted with the action's type by argparse
        sub.set_defaults(**{key: [value] if isinstance(action, argparse._AppendAction) else value})


def _manifest(args, command: str, params: ChainParams | None, settings: dict, started: str) -> dict:
    return {
        "schema_version": 1,
        "command": command,
        "argv": list(args._argv),
        "params": params.to_dict() if params is not None else None,
        "settings": settings,
        "environment": environment_info(),
        "started_utc": started,
        "finished_utc": utc_now(),
        "outputs": {},
    }


# --------------------------------------------------------------------------- commands


def cmd_verify(args) -> int:
    from .momentum_space import emergent_mode, solve_kappa

    params = params_from_args(args)
    started = utc_now()
    results = identity_suite(params, tol=args.tol)
    # emergent even-Majorana mode, when its momentum lies on the grid
    if params.delta.real == 0:
        sol = solve_kappa(params)
        for kappa, grid in zip(sol.kappas, sol.on_grid):
            if grid:
                mode = emergent_mode(params, kappa, fock=True)
                for name, res in mode.checks.items():
                    results.append(CheckResult(f"kappa={kappa:.6f}: {name}", res, res < args.tol))
    width = max(len(r.name) for r in results)
    failed = 0
    for r in results:
        res = "-" if r.residual is None else f"{r.residual:.3e}"
        note = f"  ({r.note})" if r.note else ""
        print(f"{r.name:<{width}}  {res:>10}  {r.status}{note}")
        failed += r.passed is False
    print(f"{len(results)} checks, {failed} failed, {sum(r.passed is None for r in results)} skipped")
    if args.out is not None:
        man = _manifest(args, "verify", params, {"tol": args.tol}, started)
        rows = [(r.name, r.residual, r.status, r.note) for r in results]
        man["outputs"]["verify.csv"] = write_csv(args.out / "verify.csv", ["check", "residual", "status", "note"], rows)
        write_manifest(args.out, man)
    return EXIT_FAIL if failed else EXIT_OK


def cmd_spectrum(args) -> int:
    from .liouville_exact import build_superoperator, classify_eigenvalues, full_spectrum
    from .third_quantization import enumerate_spectrum, quadratic_rapidities

    params = params_from_args(args)
    started = utc_now()
    settings = {"method": args.method, "classify_tol": args.classify_tol}
    if args.method == "exact":
        spec = full_spectrum(build_superoperator(params))
        values = spec.eigenvalues
        counts = [None] * len(values)
        settings["condition"] = spec.condition
    else:
        if args.max_excitations is not None and args.realpart_cap is not None:
            raise ParameterError("choose one of --max-excitations and --realpart-cap")
        rap = quadratic_rapidities(params)
        if args.max_excitations is not None:
            strategy = dict(strategy="max_excitations", max_excitations=args.max_excitations)
        elif args.realpart_cap is not None:
            strategy = dict(strategy="realpart_cap", realpart_cap=args.realpart_cap)
        else:
            strategy = dict(strategy="full")
        settings.update(strategy)
        en = enumerate_spectrum(rap, **strategy)
        values, counts = en.values, en.n_excitations
        settings["rapidities"] = [[b.real, b.imag] for b in rap.betas]
    tags = classify_eigenvalues(values, args.classify_tol)
    summary = {t: int(np.sum(tags == t)) for t in ("zero", "imaginary", "decaying")}
    imag = sorted({round(float(v.imag), 12) for v, t in zip(values, tags) if t == "imaginary"})
    print(f"{len(values)} eigenvalues: {summary['zero']} zero, {summary['imaginary']} imaginary, "
          f"{summary['decaying']} decaying")
    if imag:
        print("purely imaginary: " + ", ".join(f"{x:+.12g}i" for x in imag))
    if args.out is not None:
        man = _manifest(args, "spectrum", params, settings, started)
        man["summary"] = summary
        rows = [(v.real, v.imag, c, t) for v, c, t in zip(values, counts, tags)]
        man["outputs"]["spectrum.csv"] = write_csv(args.out / "spectrum.csv", ["re", "im", "n_excitations", "tag"], rows)
        write_manifest(args.out, man)
    return EXIT_OK


def _safe_label(label: str) -> str:
    return re.sub(r"[^A-Za-z0-9]+", "", label)


def cmd_evolve(args) -> int:
    from .covariance_dynamics import integrate, long_time_value, make_initial_state
    from .errors import AnalysisError

    params = params_from_args(args)
    started = utc_now()
    seeds = args.seed if args.initial.replace("-", "_") == "random" else [None]
    settings = {"initial": args.initial, "seeds": seeds, "tmax": args.tmax, "dt_out": args.dt_out,
                "observables": args.observables, "integrator": args.integrator}
    outputs, summary = {}, {}
    for seed in seeds:
        state = make_initial_state(args.initial, params.N, seed)
        rec = integrate(state, params, args.tmax, args.dt_out, args.observables, method=args.integrator)
        for label in args.observables:
            name = f"traj_{_safe_label(label)}" + ("" if seed is None else f"_seed{seed}") + ".csv"
            vals = rec[label]
            try:
                lt = long_time_value(rec, label)
                stats = {"mean_abs": lt.mean_abs, "osc_amplitude": lt.osc_amplitude, "dominant_freq": lt.dominant_freq}
            except AnalysisError as exc:
                stats = {"note": str(exc)}
            summary[name] = stats
            print(f"{name}: " + ", ".join(f"{k}={v:.6g}" if isinstance(v, float) else f"{k}: {v}" for k, v in stats.items()))
            if args.out is not None:
                rows = zip(rec.times, vals.real, vals.imag)
                outputs[name] = write_csv(args.out / name, ["t", "re", "im"], rows)
    if args.out is not None:
        man = _manifest(args, "evolve", params, settings, started)
        man["summary"] = summary
        man["outputs"] = outputs
        write_manifest(args.out, man)
    return EXIT_OK


def cmd_scaling(args) -> int:
    from .covariance_dynamics import fit_slope, scaling_sweep

    template = params_from_args(args)
    started = utc_now()
    rows = scaling_sweep(template, args.n_list, initial=args.initial, t_max=args.tmax, dt_out=args.dt_out,
                         window=args.window, method=args.integrator, seed=args.seed)
    small = [r for r in rows if r.N < args.split]
    large = [r for r in rows if r.N >= args.split]
    fits = {}
    if len(rows) >= 3:
        fits = {"all": fit_slope(rows), "small_N": fit_slope(small), "large_N": fit_slope(large)}
    for r in rows:
        print(f"N={r.N:4d}  mean|<c1c2>|={r.mean_abs:.6e}  amplitude={r.osc_amplitude:.3e}  freq={r.dominant_freq:.4f}")
    if fits:
        print("slopes: " + ", ".join(f"{k}={'n/a' if v is None else f'{v:.4f}'}" for k, v in fits.items()))
    else:
        print("fewer than 3 sizes: fit skipped")
    if args.out is not None:
        settings = {"n_list": args.n_list, "initial": args.initial, "seed": args.seed, "tmax": args.tmax,
                    "dt_out": args.dt_out, "window": args.window, "split": args.split, "integrator": args.integrator}
        man = _manifest(args, "scaling", template, settings, started)
        man["fits"] = fits
        table = [(r.N, r.mean_abs, r.osc_amplitude, r.dominant_freq) for r in rows]
        man["outputs"]["scaling.csv"] = write_csv(args.out / "scaling.csv",
                                                  ["N", "mean_abs", "osc_amplitude", "dominant_freq"], table)
        write_manifest(args.out, man)
    return EXIT_OK


def _replace_out(argv: list[str], out: Path) -> list[str]:
    new, skip = [], False
    for i, a in enumerate(argv):
        if skip:
            skip = False
            continue
        if a == "--out":
            skip = True
            continue
        if a.startswith("--out="):
            continue
        new.append(a)
    return new + ["--out", str(out)]


def cmd_rerun(args) -> int:
    man = read_manifest(args.manifest)
    src_dir = args.manifest if args.manifest.is_dir() else args.manifest.parent
    out = args.out if args.out is not None else src_dir
    argv = _replace_out(list(man["argv"]), out)
    code = main(argv)
    if code != EXIT_OK:
        return code
    checks = verify_digests(out, man)
    for name, ok in sorted(checks.items()):
        print(f"{name}: {'identical' if ok else 'DIFFERS'}")
    return EXIT_OK if all(checks.values()) else EXIT_FAIL


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        _apply_config(parser, argv)
        args = parser.parse_args(argv)
        args._argv = argv
        return args.func(args)
    except KitaevError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (ValueError, MemoryError, ArithmeticError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
