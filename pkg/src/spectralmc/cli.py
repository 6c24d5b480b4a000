"""Command-line entry point: ``spectralmc {simulate,inpaint,bench,bound,sample}``."""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
from dataclasses import asdict
from pathlib import Path

from . import io
from .core import Shape, evaluate
from .experiments import (
    INITS,
    LAMBDA_CONVENTIONS,
    SAMPLERS,
    FitSettings,
    fit,
    format_table,
    replicate_seeds,
    rows_to_csv,
    run_bench,
    run_inpaint,
    run_simulation,
    settings_from_dict,
)
from .pacbayes import (
    NoiseBounds,
    OutOfRegimeError,
    alpha_beta,
    compute_constants,
    lambda_star,
    oracle_bound_terms,
    recommended_tau,
)
from .synth import smooth_image

OUTPUT_ENV = "SPECTRALMC_OUTPUT_DIR"

logger = logging.getLogger("spectralmc")


def _output_dir(arg) -> Path:
    path = Path(arg or os.environ.get(OUTPUT_ENV, "runs"))
    path.mkdir(parents=True, exist_ok=True)
    return path


def _add_fit_args(ap: argparse.ArgumentParser, default_init: str = "gibbs") -> None:
    g = ap.add_argument_group("sampler")
    g.add_argument("--sampler", choices=SAMPLERS, default="lmc")
    g.add_argument("--tau", type=float, default=1.0)
    g.add_argument("--sigma", type=float, default=1.0, help="noise level used to set lambda")
    g.add_argument("--lambda-convention", choices=sorted(LAMBDA_CONVENTIONS), default="n/4sigma2")
    g.add_argument("--lam", type=float, default=None, help="absolute lambda; overrides the convention")
    g.add_argument("--h", type=float, default=None, help="step size (default 1/(400 m p))")
    g.add_argument("--T", type=int, default=200)
    g.add_argument("--burnin", type=int, default=100)
    g.add_argument("--init", choices=INITS, default=default_init)
    g.add_argument("--init-gibbs-iters", type=int, default=50)
    g.add_argument("--softimpute-shrink", type=float, default=None)
    g.add_argument("--softimpute-iters", type=int, default=100)
    g.add_argument("--K", type=int, default=10)
    g.add_argument("--a", type=float, default=1.0)
    g.add_argument("--b", type=float, default=0.01)
    g.add_argument("--rank-tol", type=float, default=1e-2)
    g.add_argument("--iterative-resolvent", action="store_true",
                   help="compute the prior gradient by conjugate gradients instead of a direct solve")


def _settings(args) -> FitSettings:
    return FitSettings(
        sampler=args.sampler, tau=args.tau, sigma=args.sigma,
        lambda_convention=args.lambda_convention, lam=args.lam, h=args.h,
        T=args.T, burnin=args.burnin, init=args.init,
        init_gibbs_T=args.init_gibbs_iters, init_gibbs_burnin=args.init_gibbs_iters // 2,
        softimpute_shrink=args.softimpute_shrink, softimpute_iters=args.softimpute_iters,
        K=args.K, a=args.a, b=args.b, rank_tol=args.rank_tol,
        iterative_resolvent=args.iterative_resolvent,
    )


def cmd_simulate(args) -> int:
    if args.manifest:
        cfg = io.read_json(args.manifest)["config"]
        settings = settings_from_dict(cfg.pop("settings"))
    else:
        if args.T <= args.burnin:
            raise SystemExit("error: --T must exceed --burnin")
        settings = _settings(args)
        cfg = dict(setting=args.setting, m=args.m, p=args.p, rank=args.rank,
                   upsilon=args.upsilon, replicates=args.replicates, seed=args.seed,
                   noise_sd=args.noise_sd)
    manifest = run_simulation(settings=settings, jobs=args.jobs, **cfg)
    out = _output_dir(args.out)
    stem = args.name or f"simulate_s{cfg['setting']}_m{cfg['m']}_p{cfg['p']}_r{cfg['rank']}_u{cfg['upsilon']}_{settings.sampler}"
    (out / f"{stem}.csv").write_text(rows_to_csv(manifest["replicates"]))
    io.write_json(out / f"{stem}.json", manifest)
    agg = manifest["aggregate"]
    print(f"setting {cfg['setting']}  m={cfg['m']} p={cfg['p']} r={cfg['rank']} "
          f"upsilon={cfg['upsilon']}  sampler={settings.sampler}  replicates={cfg['replicates']}")
    print(format_table(agg))
    if settings.sampler == "mala":
        print(f"acceptance rate  {agg['accept_rate']['mean']:.3f}")
    if agg["diverged_count"]:
        print(f"warning: {agg['diverged_count']} replicate(s) diverged; try a smaller --h")
    print(f"wrote {out / stem}.csv and {out / stem}.json")
    return 0


def cmd_inpaint(args) -> int:
    if args.image:
        try:
            img = io.read_image_pgm(args.image)
        except (OSError, io.FormatError) as exc:
            print(f"error: cannot read image: {exc}", file=sys.stderr)
            return 2
    else:
        img = smooth_image(args.synthetic)
    settings = _settings(args)
    manifest, restored, rows = run_inpaint(img, args.upsilon, args.repeats, args.seed, settings)
    manifest["config"]["image"] = str(args.image) if args.image else f"synthetic:{args.synthetic}"
    out = _output_dir(args.out)
    stem = args.name or f"inpaint_u{args.upsilon}_{settings.sampler}"
    (out / f"{stem}.csv").write_text(rows_to_csv(rows))
    io.write_json(out / f"{stem}.json", manifest)
    io.write_image_pgm(out / f"{stem}_restored.pgm", restored)
    agg = manifest["aggregate"]
    for key in ("mse", "nmse", "pred", "est_rank"):
        stats = agg[key]
        if stats["mean"] is not None:
            print(f"{key.upper():<6} {stats['mean']:.6g} ({stats['std']:.3g})")
    print(f"wrote {out / stem}_restored.pgm")
    return 0


def cmd_bench(args) -> int:
    rows = run_bench(args.m, args.p_list, args.rank, args.upsilon, args.iters, args.runs,
                     args.seed, _settings(args))
    out = _output_dir(args.out)
    path = out / (args.name or "bench")
    path = path.with_suffix(".csv")
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
    for r in rows:
        print(f"{r['sampler']:<12} p={r['p']:<5} {r['seconds']:.4f}s")
    print(f"wrote {path}")
    return 0


def cmd_bound(args) -> int:
    nb = NoiseBounds(args.sigma, args.xi, args.L)
    tc = compute_constants(nb, args.margin)
    tau = args.tau if args.tau is not None else recommended_tau(args.rank, args.m, args.p, args.n)
    lam = lambda_star(args.n, tc)
    print(f"C1        {tc.c1:.17g}")
    print(f"C2        {tc.c2:.17g}")
    print(f"threshold {tc.threshold:.17g}")
    print(f"C         {tc.c:.17g}")
    print(f"6C+margin {tc.final_constant:.17g}")
    print(f"lambda*   {lam:.17g}")
    try:
        a, b = alpha_beta(lam, args.n, tc)
        terms = oracle_bound_terms(args.approx_err, args.rank, args.m, args.p, args.n, args.eps,
                                   nb, tc, tau)
    except OutOfRegimeError as exc:
        print(f"out of regime: {exc}")
        return 1
    print(f"alpha     {a:.17g}")
    print(f"beta      {b:.17g}")
    print(f"delta     {b / a - 1:.17g}")
    print(f"tau       {tau:.17g}")
    print(f"rhs       {terms.total:.17g}")
    print(f"  leading    {terms.leading:.17g}")
    print(f"  complexity {terms.complexity:.17g}")
    print(f"  confidence {terms.confidence:.17g}")
    return 0


def cmd_sample(args) -> int:
    shape = Shape(args.m, args.p)
    truth = io.read_matrix_csv(args.truth) if args.truth else None
    try:
        data = io.read_observations(args.obs, shape, truth=truth)
    except (OSError, io.FormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    settings = _settings(args)
    seeds = replicate_seeds(args.seed, 0)
    result, runtime = fit(data, settings, seeds)
    out = _output_dir(args.out)
    stem = args.name or "estimate"
    io.write_matrix_csv(out / f"{stem}.csv", result.mean)
    manifest = {"command": "sample", "config": {"obs": str(args.obs), "m": args.m, "p": args.p,
                                                "seed": args.seed, "settings": asdict(settings)},
                "seeds": seeds, "n": data.n, "lambda": settings.lambda_for(data.n),
                "h": settings.step_for(shape), "accept_rate": result.accept_rate,
                "diverged": result.diverged, "runtime_seconds": runtime}
    if truth is not None and not result.diverged:
        manifest["report"] = evaluate(result.mean, data, runtime, settings.rank_tol).as_dict()
        print(format_table({k: {"mean": v, "std": 0.0} for k, v in manifest["report"].items()
                            if k in ("mse", "nmse", "pred") and v is not None}))
    io.write_json(out / f"{stem}.json", manifest)
    if result.diverged:
        print("warning: chain diverged; try a smaller --h")
    print(f"wrote {out / stem}.csv")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="spectralmc", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", default=None, help=f"output directory (default ${OUTPUT_ENV} or ./runs)")
        p.add_argument("--name", default=None, help="output file stem")

    p = sub.add_parser("simulate", help="replicated synthetic experiment")
    p.add_argument("--setting", type=int, choices=(1, 2), default=1)
    p.add_argument("--m", type=int, default=100)
    p.add_argument("--p", type=int, default=100)
    p.add_argument("--rank", type=int, default=2)
    p.add_argument("--upsilon", type=float, default=0.2)
    p.add_argument("--noise-sd", type=float, default=1.0)
    p.add_argument("--replicates", type=int, default=50)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--manifest", default=None, help="replay the configuration stored in a manifest")
    common(p)
    _add_fit_args(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("inpaint", help="restore randomly removed pixels of a PGM image")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--image", default=None, help="PGM (P2 or P5) input")
    src.add_argument("--synthetic", type=int, default=128, help="size of generated test image")
    p.add_argument("--upsilon", type=float, default=0.5)
    p.add_argument("--repeats", type=int, default=1)
    common(p)
    _add_fit_args(p, default_init="softimpute")
    p.set_defaults(func=cmd_inpaint)

    p = sub.add_parser("bench", help="wall-clock comparison of the samplers")
    p.add_argument("--m", type=int, default=100)
    p.add_argument("--p-list", type=int, nargs="+", default=[50, 100, 200, 500])
    p.add_argument("--rank", type=int, default=2)
    p.add_argument("--upsilon", type=float, default=0.2)
    p.add_argument("--iters", type=int, default=20)
    p.add_argument("--runs", type=int, default=3)
    common(p)
    _add_fit_args(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("bound", help="evaluate the PAC-Bayes oracle bound")
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--p", type=int, required=True)
    p.add_argument("--rank", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--xi", type=float, default=1.0)
    p.add_argument("--L", type=float, default=1.0)
    p.add_argument("--eps", type=float, default=0.05)
    p.add_argument("--margin", type=float, default=1.0)
    p.add_argument("--approx-err", type=float, default=0.0)
    p.add_argument("--tau", type=float, default=None, help="default: recommended tau")
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("sample", help="single chain on an observation file")
    p.add_argument("--obs", required=True, help="CSV with header i,j,value (1-based)")
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--p", type=int, required=True)
    p.add_argument("--truth", default=None, help="dense CSV ground truth for metrics")
    common(p)
    _add_fit_args(p, default_init="softimpute")
    p.set_defaults(func=cmd_sample)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
