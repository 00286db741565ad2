"""Command line entry point: ``oldroyd-lab <subcommand> [options]``.

Exit status is 0 on success/pass, 2 when a decay verdict fails and 1 on
errors (including bad usage).
"""
from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path

import numpy as np

from .harness import (
    ExperimentConfig,
    FitError,
    apply_overrides,
    fit_decay,
    lemma_census,
    load_config,
    read_series_csv,
    run_experiment,
)
from .linear_oracle import DecayPrediction, predicted_rate
from .littlewood_paley import BesovSpec, besov_norm, make_partition
from .solver import DiagnosticSpec, diagnostics, read_checkpoint, smallness

EXIT_OK, EXIT_ERROR, EXIT_VERDICT = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", type=Path, help="TOML experiment configuration")
    p.add_argument("--out", type=Path, help="output directory")
    p.add_argument("--seed", type=int)
    p.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config entry (table.key=value); repeatable")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = _Parser(prog="oldroyd-lab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.add_parser("linear-decay", parents=[common], help="whole-space linear decay curves")
    sub.add_parser("simulate", parents=[common], help="nonlinear box run with decay fits")
    b = sub.add_parser("besov", parents=[common], help="Besov norms of a checkpoint")
    b.add_argument("checkpoint", type=Path)
    b.add_argument("--s", type=float, help="regularity index for the one-shot norm")
    b.add_argument("--p", type=float, default=2.0)
    f = sub.add_parser("fit", parents=[common], help="re-fit a decay series CSV")
    f.add_argument("csv", type=Path)
    f.add_argument("--column", help="norm column (default: first norm_* column)")
    f.add_argument("--window", type=float, nargs=2, metavar=("T_LO", "T_HI"))
    f.add_argument("--rate", type=float, help="theory rate to compare against")
    f.add_argument("--tolerance", type=float, default=0.05)
    c = sub.add_parser("lemma-census", parents=[common], help="product/commutator ratio census")
    c.add_argument("--samples", type=int, default=200)
    c.add_argument("--grids", type=int, nargs="+", default=[64, 128])
    return parser


def _config(args, **defaults) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig(**defaults)
    over = list(args.override)
    if args.seed is not None:
        over.append(f"seed={args.seed}")
    if args.out is not None:
        over.append(f'out="{args.out.as_posix()}"')
    return apply_overrides(cfg, over)


def _report(res) -> int:
    cfg = res.config
    for fit in res.fits:
        nominal = predicted_rate(cfg.n, cfg.s, _alpha_of(fit.column), cfg.q, cfg.p,
                                 check_window=cfg.check_window).rate
        print(f"{fit.column}: slope {fit.slope:.6f} +/- {fit.stderr:.2g} on "
              f"[{fit.window[0]:g}, {fit.window[1]:g}]; theory rate {nominal:.6g} "
              f"(s={cfg.s:g}), data-effective rate {fit.theory.rate:.6g}; {fit.verdict}")
    for name, path in res.paths.items():
        print(f"wrote {name}: {path}")
    return EXIT_OK if res.passed else EXIT_VERDICT


def _alpha_of(column: str) -> float:
    return float(column.split("_")[2])


def cmd_linear(args) -> int:
    cfg = _config(args)
    if cfg.kind != "linear-oracle":
        cfg = apply_overrides(cfg, ['kind="linear-oracle"'])
    return _report(run_experiment(cfg))


def cmd_simulate(args) -> int:
    cfg = _config(args, kind="nonlinear-box", t_start=0.5, t_end=64.0, fit_window=(4.0, 64.0),
                  A=0.1)
    if cfg.kind != "nonlinear-box":
        cfg = apply_overrides(cfg, ['kind="nonlinear-box"'])
    return _report(run_experiment(cfg))


def cmd_besov(args) -> int:
    cfg = _config(args)
    state = read_checkpoint(args.checkpoint)
    g = state.grid
    spec = DiagnosticSpec(norms=((0.0, 2.0),), p=cfg.p, s=cfg.s, j0=cfg.j0)
    part = make_partition(g, cfg.j0)
    rec = diagnostics(state, spec, part)
    s = -cfg.s if args.s is None else args.s
    val_u, info = besov_norm(state.u, BesovSpec(s, args.p), part, full_output=True)
    val_t = besov_norm(state.tau, BesovSpec(s, args.p), part)
    print(f"checkpoint t={state.t:g} n={g.n} N={g.N} L={g.L:g} b={state.b:g}")
    print(f"j range [{info['j_min']}, {info['j_max']}]")
    print(f"besov_u(s={s:g},p={args.p:g}) = {val_u:.12g}")
    print(f"besov_tau(s={s:g},p={args.p:g}) = {val_t:.12g}")
    print(f"besov_low = {rec.besov_low:.12g}")
    print(f"besov_high_u = {rec.besov_high_u:.12g}")
    print(f"besov_high_gamma = {rec.besov_high_gamma:.12g}")
    print(f"besov_negs = {rec.besov_negs:.12g}")
    print(f"smallness = {smallness(state, spec, part):.12g}")
    return EXIT_OK


def cmd_fit(args) -> int:
    data = read_series_csv(args.csv)
    column = args.column or next((k for k in data if k.startswith("norm_")), None)
    if column is None or column not in data:
        raise ValueError(f"column {column!r} not found in {args.csv}")
    t = data["t"]
    window = tuple(args.window) if args.window else (float(t.min()), float(t.max()))
    theory = None
    if args.rate is not None:
        theory = DecayPrediction(n=0, s=math.nan, alpha=math.nan, q=math.nan, rate=args.rate)
    fit = fit_decay(t, data[column], window, theory, args.tolerance, column)
    print(f"{column}: slope {fit.slope:.12g} +/- {fit.stderr:.3g} on "
          f"[{window[0]:g}, {window[1]:g}] ({fit.samples} samples); {fit.verdict}")
    return EXIT_VERDICT if fit.verdict == "fail" else EXIT_OK


def cmd_census(args) -> int:
    seed = 0 if args.seed is None else args.seed
    res = lemma_census(N_values=tuple(args.grids), samples=args.samples, seed=seed)
    ok = True
    for N, r in res.items():
        print(f"N={N}: max product ratio {r['product']:.6g}, max commutator ratio {r['commutator']:.6g}")
        ok &= bool(np.isfinite(r["product"]) and np.isfinite(r["commutator"]))
    Ns = sorted(res)
    for a, b in zip(Ns, Ns[1:]):
        for key in ("product", "commutator"):
            change = abs(res[b][key] - res[a][key]) / res[a][key]
            print(f"{key} change N={a}->{b}: {100 * change:.3g}%")
            ok &= change < 0.2
    return EXIT_OK if ok else EXIT_VERDICT


_COMMANDS = {
    "linear-decay": cmd_linear,
    "simulate": cmd_simulate,
    "besov": cmd_besov,
    "fit": cmd_fit,
    "lemma-census": cmd_census,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_ERROR
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_ERROR
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return _COMMANDS[args.command](args)
    except (ValueError, OSError, FitError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
