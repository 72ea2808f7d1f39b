"""Command-line interface: ``fiergm simulate|fit|ppc|report|score|bench``."""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

from . import __version__
from .basis import build_bspline
from .diagnostics import (
    diagnose_shrinkage,
    max_mcse,
    mcse_array,
    ppc_summary,
    score_scenario,
)
from .dmh import ChainConfig, ProposalConfig, acceptance_report, run_chain
from .errors import FiergmError
from .fhs import FhsConfig
from .io import (
    load_bundle,
    load_chain,
    load_tensor,
    save_bundle,
    save_chain,
    save_estimates,
    write_manifest,
)
from .model import ParamIndex
from .scenario import ScenarioSpec, generate_scenario

THREADS_ENV = "FIERGM_THREADS"


def _default_threads() -> int:
    raw = os.environ.get(THREADS_ENV)
    if raw is None:
        return 1
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _int_list(s):
    try:
        return [int(v) for v in s.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {s!r}") from None


def _add_chain_flags(sp):
    g = sp.add_argument_group("sampler")
    g.add_argument("--iterations", type=int, default=10_000)
    g.add_argument("--burnin", type=int, default=5_000)
    g.add_argument("--thin", type=int, default=1)
    g.add_argument("--inner-multiplier", type=int, default=2,
                   help="auxiliary-slice updates per proposal, in multiples of n")
    g.add_argument("--kn", type=int, default=None, help="number of B-spline basis functions")
    g.add_argument("--degree", type=int, default=None, help="B-spline degree")
    g.add_argument("--proposal-sd", type=float, default=0.1)
    g.add_argument("--adapt", action="store_true", help="tune proposal scales during burn-in")
    g.add_argument("--beta-update", choices=("model", "verbatim"), default="model")
    g.add_argument("--sigma2-update", choices=("model", "verbatim"), default="model")


def _add_common(sp):
    sp.add_argument("--threads", type=int, default=None,
                    help=f"worker threads (default ${THREADS_ENV} or 1)")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--format", choices=("text", "json"), default="text")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fiergm", description=__doc__)
    parser.add_argument("--version", action="version", version=f"fiergm {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("simulate", help="generate a synthetic scenario bundle")
    sp.add_argument("-o", "--output", required=True, help="bundle directory")
    sp.add_argument("--n", type=int, default=600)
    sp.add_argument("--p", type=int, default=10)
    sp.add_argument("--T", type=int, default=8)
    sp.add_argument("--sigma2", type=float, default=0.05)
    sp.add_argument("--time-grid", choices=("integer", "unit"), default="integer")
    sp.add_argument("--zero-interactions", action="store_true",
                    help="put every interaction in the zero group")
    _add_common(sp)

    sp = sub.add_parser("fit", help="fit a tensor and write a chain file")
    sp.add_argument("tensor", help="long or dense CSV")
    sp.add_argument("-o", "--output", required=True, help="output directory")
    sp.add_argument("--input-format", choices=("auto", "long", "dense"), default="auto")
    _add_chain_flags(sp)
    _add_common(sp)

    sp = sub.add_parser("ppc", help="posterior predictive check")
    sp.add_argument("chain")
    sp.add_argument("tensor")
    sp.add_argument("--replicates", type=int, default=1000)
    sp.add_argument("--burn-multiplier", type=int, default=100)
    sp.add_argument("-o", "--output", default=None, help="directory for the PPC tables")
    _add_common(sp)

    sp = sub.add_parser("report", help="shrinkage verdicts, estimates and MCSE of a chain")
    sp.add_argument("chain")
    sp.add_argument("-o", "--output", default=None, help="directory for estimate tables")
    _add_common(sp)

    sp = sub.add_parser("score", help="MSE/TP/TN of a chain against a scenario bundle")
    sp.add_argument("chain")
    sp.add_argument("bundle")
    _add_common(sp)

    sp = sub.add_parser("bench", help="fit one bundle at several inner multipliers")
    sp.add_argument("bundle")
    sp.add_argument("--multipliers", type=_int_list, default=[1, 2, 4, 8])
    sp.add_argument("-o", "--output", default=None)
    _add_chain_flags(sp)
    _add_common(sp)
    return parser


def _emit(fmt, record, text=None):
    if fmt == "json":
        print(json.dumps(record), flush=True)
    elif text is not None:
        print(text, flush=True)


def _progress(fmt, label):
    started = time.time()

    def cb(done, total):
        rec = {"event": "progress", "stage": label, "iteration": done, "total": total,
               "elapsed_seconds": round(time.time() - started, 3)}
        print(json.dumps(rec), file=sys.stderr, flush=True)

    return cb


def _chain_config(args, workers, multiplier=None) -> ChainConfig:
    return ChainConfig(
        iterations=args.iterations,
        burnin=args.burnin,
        thin=args.thin,
        inner_multiplier=args.inner_multiplier if multiplier is None else multiplier,
        workers=workers,
        seed=args.seed,
        proposal=ProposalConfig(sd=args.proposal_sd, adapt=args.adapt),
        fhs=FhsConfig(beta_update_mode=args.beta_update, sigma2_update_mode=args.sigma2_update),
    )


def _threads(args) -> int:
    return _default_threads() if args.threads is None else max(1, args.threads)


def cmd_simulate(args):
    spec_kwargs = dict(n=args.n, p=args.p, T=args.T, sigma2=args.sigma2, time_grid=args.time_grid,
                       seed=args.seed)
    if args.zero_interactions:
        m = args.p * (args.p - 1) // 2
        spec_kwargs.update(n_zero=m, n_negative=0, n_positive=0)
    spec = ScenarioSpec(**spec_kwargs)
    x, truth = generate_scenario(spec)
    save_bundle(args.output, x, truth, spec)
    _emit(args.format, {"event": "done", "command": "simulate", "bundle": args.output,
                        "shape": list(x.shape)},
          f"wrote bundle {args.output} with tensor of shape {x.shape}")
    return 0


def _fit(x, args, workers, multiplier=None, label="fit"):
    phi = build_bspline(x.T, times=x.times, k_n=args.kn, degree=args.degree)
    cfg = _chain_config(args, workers, multiplier)
    out = run_chain(x, phi, cfg, progress=_progress(args.format, label),
                    progress_every=max(1, args.iterations // 100))
    return out, cfg, phi


def cmd_fit(args):
    x = load_tensor(args.tensor, args.input_format)
    workers = _threads(args)
    # validates basis settings against T before any sampling
    build_bspline(x.T, times=x.times, k_n=args.kn, degree=args.degree)
    out, cfg, phi = _fit(x, args, workers)
    d = Path(args.output)
    d.mkdir(parents=True, exist_ok=True)
    save_chain(d / "chain.fiergm", out)
    save_estimates(d / "estimates.csv", out.posterior_mean(), x.times)
    write_manifest(d / "manifest.json", "fit", {"chain": cfg.to_dict(), "kn": phi.k_n,
                                                "degree": phi.degree, "tensor": str(args.tensor)},
                   seed=args.seed, extra={"wall_clock_seconds": out.metadata["wall_clock_seconds"]})
    _emit(args.format, {"event": "done", "command": "fit", "chain": str(d / "chain.fiergm"),
                        "draws": out.n_draws, "seconds": out.metadata["wall_clock_seconds"]},
          f"wrote {d / 'chain.fiergm'} ({out.n_draws} draws, "
          f"{out.metadata['wall_clock_seconds']:.1f} s)")
    return 0


def cmd_ppc(args):
    out = load_chain(args.chain)
    x = load_tensor(args.tensor)
    rep = ppc_summary(x, out.theta, replicates=args.replicates, burn_multiplier=args.burn_multiplier,
                      seed=args.seed, workers=_threads(args))
    summary = {"event": "done", "command": "ppc", "replicates": rep.replicates,
               "stats_correlation": rep.stats_correlation(),
               "degree_correlation": rep.degree_correlation(),
               "degree_slope": rep.degree_slope()}
    if args.output:
        d = Path(args.output)
        d.mkdir(parents=True, exist_ok=True)
        with open(d / "ppc_stats.csv", "w") as fh:
            fh.write("time,statistic,observed,simulated\n")
            for t, name, o, s in rep.stats_table():
                fh.write(f"{t},{name},{o!r},{s!r}\n")
        with open(d / "ppc_degree.csv", "w") as fh:
            fh.write("time,degree,observed,simulated\n")
            for t, m, o, s in rep.degree_table():
                fh.write(f"{t},{m},{o!r},{s!r}\n")
        write_manifest(d / "manifest.json", "ppc", vars_dict(args), seed=args.seed)
    _side_manifest(args, args.chain)
    _emit(args.format, summary,
          f"statistics correlation {summary['stats_correlation']:.4f}\n"
          f"degree correlation {summary['degree_correlation']:.4f}\n"
          f"degree slope {summary['degree_slope']:.4f}")
    return 0


def vars_dict(args) -> dict:
    return {k: v for k, v in vars(args).items() if k != "func"}


def _side_manifest(args, anchor):
    """Manifest for commands that may run without an output directory."""
    if getattr(args, "output", None):
        return
    path = Path(anchor)
    path = path if path.is_dir() else path.parent
    write_manifest(path / f"{args.command}_manifest.json", args.command, vars_dict(args), seed=args.seed)


def cmd_report(args):
    out = load_chain(args.chain)
    index = ParamIndex(out.p)
    rep = diagnose_shrinkage(out.omega, names=index.names)
    est = out.posterior_mean()
    se = mcse_array(out.theta) if out.n_draws >= 100 else None
    acc = acceptance_report(out, names=index.names)
    rows = [{"index": i + 1, "name": name, "mean_omega": w, "verdict": v}
            for i, name, w, v in rep.rows()]
    record = {"event": "done", "command": "report", "shrinkage": rows,
              "n_zero": rep.n_zero,
              "max_mcse": float(se.max()) if se is not None else None,
              "acceptance_healthy_fraction": acc.fraction_healthy,
              "acceptance_warnings": acc.warnings}
    if args.output:
        d = Path(args.output)
        d.mkdir(parents=True, exist_ok=True)
        save_estimates(d / "estimates.csv", est)
        if se is not None:
            save_estimates(d / "mcse.csv", se)
        with open(d / "shrinkage.csv", "w") as fh:
            fh.write("index,name,mean_omega,verdict\n")
            for r in rows:
                fh.write(f"{r['index']},{r['name']},{r['mean_omega']!r},{r['verdict']}\n")
        write_manifest(d / "manifest.json", "report", vars_dict(args), seed=args.seed)
    _side_manifest(args, args.chain)
    lines = [f"{r['name']:>12}  omega={r['mean_omega']:.3f}  {r['verdict']}" for r in rows]
    if se is not None:
        lines.append(f"max MCSE {se.max():.4f}")
    lines.append(f"acceptance: {acc.fraction_healthy:.1%} of coordinates within bounds")
    _emit(args.format, record, "\n".join(lines))
    return 0


def cmd_score(args):
    out = load_chain(args.chain)
    _, theta, zero, nonzero = load_bundle(args.bundle)
    rep = diagnose_shrinkage(out.omega)
    s = score_scenario(out.posterior_mean(), theta, zero, rep, true_nonzero_set=nonzero)
    _side_manifest(args, args.chain)
    record = {"event": "done", "command": "score", "mse": s.mse, "tp": s.tp, "tn": s.tn}
    if out.n_draws >= 100:
        record["max_mcse"] = max_mcse(out)
    _emit(args.format, record, f"MSE {s.mse:.4f} | TP {s.tp:.2f} | TN {s.tn:.2f}")
    return 0


def cmd_bench(args):
    x, theta, zero, nonzero = load_bundle(args.bundle)
    build_bspline(x.T, times=x.times, k_n=args.kn, degree=args.degree)
    workers = _threads(args)
    rows = []
    for mult in args.multipliers:
        out, cfg, _ = _fit(x, args, workers, multiplier=mult, label=f"bench-{mult}n")
        s = score_scenario(out.posterior_mean(), theta, zero, diagnose_shrinkage(out.omega),
                           true_nonzero_set=nonzero)
        row = {"multiplier": mult, "mse": s.mse, "tp": s.tp, "tn": s.tn,
               "minutes": out.metadata["wall_clock_seconds"] / 60.0}
        rows.append(row)
        _emit(args.format, {"event": "row", **row})
    if args.output:
        d = Path(args.output)
        d.mkdir(parents=True, exist_ok=True)
        with open(d / "bench.csv", "w") as fh:
            fh.write("multiplier,mse,tp,tn,minutes\n")
            for r in rows:
                fh.write(f"{r['multiplier']},{r['mse']!r},{r['tp']!r},{r['tn']!r},{r['minutes']!r}\n")
        write_manifest(d / "manifest.json", "bench", vars_dict(args), seed=args.seed)
    _side_manifest(args, args.bundle)
    if args.format == "text":
        print("inner   MSE     TP    TN    minutes")
        for r in rows:
            print(f"{r['multiplier']:>4}n  {r['mse']:.4f}  {r['tp']:.2f}  {r['tn']:.2f}  {r['minutes']:.2f}")
    return 0


COMMANDS = {
    "simulate": cmd_simulate,
    "fit": cmd_fit,
    "ppc": cmd_ppc,
    "report": cmd_report,
    "score": cmd_score,
    "bench": cmd_bench,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    try:
        return COMMANDS[args.command](args)
    except (FiergmError, OSError, ValueError) as exc:
        print(json.dumps({"event": "error", "command": args.command, "message": str(exc)}),
              file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
