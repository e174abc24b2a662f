"""Command-line entry point: ``hamem <subcommand> [--config FILE] ...``.

Exit codes: 0 on success, 1 if any sweep run failed, 2 on configuration errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import complexity as cx
from .experiment import (
    ConfigError,
    InsufficientPairsError,
    default_min_gap,
    eligible_pairs,
    load_config,
    resolve_pairs,
    run_sweep,
    with_overrides,
    write_outputs,
    write_series,
)
from .lindblad import PairObservable, evolve_series
from .mitigation import ReshapeSet, run_reshaping, run_rescaling, run_richardson
from .operators import build_hamiltonian, build_noise, diagonalize
from .spectral import estimate_energy

COMMANDS = ("spectrum", "series", "estimate", "reshape", "rescale", "richardson", "sweep", "complexity")


def _global_flags(parser: argparse.ArgumentParser, suppress: bool) -> None:
    d = {"default": argparse.SUPPRESS} if suppress else {}
    parser.add_argument("--config", help="YAML experiment config", **d)
    parser.add_argument("--seed", type=int, help="master seed (overrides config)", **d)
    parser.add_argument("--out", help="output directory (overrides config)", **d)
    parser.add_argument("--threads", type=int, help="worker processes for sweeps", **d)
    parser.add_argument("--backend", choices=("stepper", "spectral"), help="Lindblad backend", **d)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hamem", description="Noisy analog spectroscopy and error mitigation lab.")
    _global_flags(parser, suppress=False)
    common = argparse.ArgumentParser(add_help=False)
    _global_flags(common, suppress=True)
    sub = parser.add_subparsers(dest="command", required=True)

    run = argparse.ArgumentParser(add_help=False, parents=[common])
    run.add_argument("--pair", type=int, nargs=2, metavar=("A", "B"), help="eigenstate indices (default: first pair)")
    g = run.add_mutually_exclusive_group()
    g.add_argument("--gamma", type=float, help="relative noise strength, kappa = gamma*|E_ba|")
    g.add_argument("--kappa", type=float, help="absolute noise strength")

    sub.add_parser("spectrum", parents=[common], help="energies and eligible pairs")
    sub.add_parser("series", parents=[run], help="noisy time series as CSV")
    sub.add_parser("estimate", parents=[run], help="unmitigated energy estimate")
    sub.add_parser("reshape", parents=[run], help="Hamiltonian reshaping")
    p = sub.add_parser("rescale", parents=[run], help="Hamiltonian rescaling")
    p.add_argument("--order", choices=("first", "second"), default="second")
    sub.add_parser("richardson", parents=[run], help="Richardson baseline")
    sub.add_parser("sweep", parents=[common], help="full pair x gamma x strategy sweep")

    p = sub.add_parser("complexity", parents=[common], help="sample-complexity calculator")
    p.add_argument("--strategy", choices=cx.STRATEGIES + ("all",), default="all")
    p.add_argument("--n-modes", type=int, default=1)
    p.add_argument("--dt", type=float, required=True)
    p.add_argument("--L", type=int, required=True)
    p.add_argument("--noise", type=float, required=True, help="noise strength |D|")
    p.add_argument("--d-ab", type=float, default=1.0)
    p.add_argument("--sigma", type=float, required=True, help="target standard deviation")
    p.add_argument("--n-k", type=float, default=1.0)
    p.add_argument("--n-p", type=int, default=1)
    p.add_argument("--c1", type=float, default=2.0)
    p.add_argument("--c2", type=float, default=1.5)
    p.add_argument(
        "--c-stat",
        type=float,
        default=0.0,
        help="variance constant C; measure as N_P*var(Im bias)/|D|^2 over the realized reshape set",
    )
    return parser


def _config(args):
    if not getattr(args, "config", None):
        raise ConfigError(f"--config is required for '{args.command}'")
    cfg = load_config(args.config)
    return with_overrides(
        cfg,
        seed=getattr(args, "seed", None),
        output_dir=getattr(args, "out", None),
        workers=getattr(args, "threads", None),
        backend=getattr(args, "backend", None),
    )


def _emit(obj) -> None:
    print(json.dumps(obj, indent=2))


def _setup(cfg, args):
    h = build_hamiltonian(cfg.model)
    spectrum = diagonalize(h)
    min_gap = cfg.min_gap if cfg.min_gap is not None else default_min_gap(h)
    if args.pair is not None:
        a, b = args.pair
        if not (0 <= a < spectrum.dim and 0 <= b < spectrum.dim) or a == b:
            raise ConfigError(f"--pair: indices must be distinct and below {spectrum.dim}")
    else:
        a, b = resolve_pairs(cfg, spectrum, min_gap)[0]
    e_ba = spectrum.gap(a, b)
    kappa = args.kappa if args.kappa is not None else (args.gamma if args.gamma is not None else cfg.gamma_list[0]) * abs(e_ba)
    noise = build_noise(cfg.noise_kind, kappa, cfg.beta, cfg.model.n)
    return h, spectrum, (a, b), e_ba, kappa, noise


def _report(label, value, e_ba, pair, kappa, extra=None):
    out = {
        "strategy": label,
        "pair": list(pair),
        "E_exact": e_ba,
        "kappa": kappa,
        "estimate": value,
        "rel_error": abs(value - e_ba) / abs(e_ba),
    }
    out.update(extra or {})
    return out


def _cmd_spectrum(cfg, args):
    h = build_hamiltonian(cfg.model)
    sp = diagonalize(h)
    min_gap = cfg.min_gap if cfg.min_gap is not None else default_min_gap(h)
    _emit(
        {
            "energies": sp.energies.tolist(),
            "min_gap": min_gap,
            "eligible_pairs": len(eligible_pairs(sp.energies, min_gap)),
            "alias_warning": cfg.spectroscopy().check_alias(sp.energies),
        }
    )
    return 0


def _cmd_run(cfg, args):
    h, sp, pair, e_ba, kappa, noise = _setup(cfg, args)
    sc = cfg.spectroscopy()
    sc.check_alias(sp.energies)
    cmd = args.command
    if cmd in ("series", "estimate"):
        obs = PairObservable.from_spectrum(sp, *pair)
        y = evolve_series(h, noise, obs.initial_state(), obs, sc, cfg.backend)
        if cmd == "series":
            out = Path(getattr(args, "out", None) or cfg.output_dir)
            out.mkdir(parents=True, exist_ok=True)
            path = out / f"series_{pair[0]}_{pair[1]}.csv"
            write_series(y, path)
            _emit({"pair": list(pair), "kappa": kappa, "file": str(path)})
            return 0
        est = estimate_energy(y, cfg.estimator_config("none"))
        _emit(_report("none", est.value, e_ba, pair, kappa, {"decay": est.mode.r, "n_modes": est.n_modes, "warnings": list(est.warnings)}))
        return 0
    if cmd == "reshape":
        rng = np.random.default_rng(cfg.seed)
        res = run_reshaping(h, noise, pair, sc, cfg.reshape, spectrum=sp, backend=cfg.backend,
                            estimator=cfg.estimator_config("reshape"), rng=rng)  # fmt: skip
    elif cmd == "rescale":
        res = run_rescaling(h, noise, pair, sc, cfg.rescale, args.order, spectrum=sp, backend=cfg.backend,
                            estimator=cfg.estimator_config("rescale1"))  # fmt: skip
    else:
        res = run_richardson(h, noise, pair, sc, cfg.rescale, spectrum=sp, backend=cfg.backend,
                             estimator=cfg.estimator_config("richardson"))  # fmt: skip
    raw = {label: e.value for label, e in res.raw}
    _emit(_report(res.strategy, res.value, e_ba, pair, kappa, {"raw": raw, "warnings": res.diagnostics["warnings"]}))
    return 0


def _cmd_sweep(cfg, args):
    result = run_sweep(cfg)
    files = write_outputs(result.records, result.summary, cfg.output_dir, result.series)
    _emit({"written": [str(f) for f in files], "strategies": result.summary["strategies"], "failures": result.failures})
    return 1 if result.failures else 0


def _cmd_complexity(args):
    try:
        inp = cx.ComplexityInputs(
            n_modes=args.n_modes, dt=args.dt, L=args.L, noise_strength=args.noise, d_ab=args.d_ab,
            sigma_target=args.sigma, n_k=args.n_k, n_p=args.n_p, c1=args.c1, c2=args.c2, c_stat=args.c_stat,
        )  # fmt: skip
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    strategies = cx.STRATEGIES if args.strategy == "all" else (args.strategy,)
    out = {"x": inp.x, "f": cx.f_factor(inp.x) if inp.x > 0 else float(np.sqrt(3)), "N_T": {}}
    for s in strategies:
        try:
            out["N_T"][s] = cx.total_samples(s, inp)
        except ValueError as exc:
            out["N_T"][s] = f"infeasible: {exc}"
    out["exponential_regime_advisory"] = cx.exponential_regime_samples(args.n_modes, args.L, args.d_ab, args.noise, args.dt)
    _emit(out)
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "complexity":
            return _cmd_complexity(args)
        cfg = _config(args)
        if args.command == "spectrum":
            return _cmd_spectrum(cfg, args)
        if args.command == "sweep":
            return _cmd_sweep(cfg, args)
        return _cmd_run(cfg, args)
    except (ConfigError, InsufficientPairsError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
