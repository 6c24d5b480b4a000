"""Experiment drivers behind the CLI: replicated simulations, inpainting, runtime benchmark."""

from __future__ import annotations

import csv
import io as _io
import logging
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from . import __version__
from .core import Dataset, Shape, evaluate
from .posterior import PosteriorSpec
from .prior import PriorConfig
from .samplers import ChainResult, GibbsConfig, LmcConfig, run_gibbs, run_lmc, run_mala
from .synth import (
    SynthConfig,
    add_noise,
    column_mean_fill,
    gen_mask_uniform,
    make_dataset,
    soft_impute_init,
)

logger = logging.getLogger(__name__)

SAMPLERS = ("lmc", "mala", "gibbs")
INITS = ("gibbs", "softimpute", "zero", "colmean")
LAMBDA_CONVENTIONS = {
    "n/4sigma2": lambda n, s2: n / (4.0 * s2),
    "n/2sigma2": lambda n, s2: n / (2.0 * s2),
}


@dataclass
class FitSettings:
    """Everything that determines a single fit apart from data and seed."""

    sampler: str = "lmc"
    tau: float = 1.0
    sigma: float = 1.0
    lambda_convention: str = "n/4sigma2"
    lam: Optional[float] = None
    h: Optional[float] = None
    T: int = 200
    burnin: int = 100
    init: str = "gibbs"
    init_gibbs_T: int = 50
    init_gibbs_burnin: int = 25
    softimpute_shrink: Optional[float] = None
    softimpute_iters: int = 100
    K: int = 10
    a: float = 1.0
    b: float = 0.01
    rank_tol: float = 1e-2
    iterative_resolvent: bool = False

    def __post_init__(self):
        if self.sampler not in SAMPLERS:
            raise ValueError(f"unknown sampler {self.sampler!r}")
        if self.init not in INITS:
            raise ValueError(f"unknown initializer {self.init!r}")
        if self.lambda_convention not in LAMBDA_CONVENTIONS:
            raise ValueError(f"unknown lambda convention {self.lambda_convention!r}")

    def lambda_for(self, n: int) -> float:
        if self.lam is not None:
            return self.lam
        return LAMBDA_CONVENTIONS[self.lambda_convention](n, self.sigma**2)

    def step_for(self, shape: Shape) -> float:
        return self.h if self.h is not None else default_step(shape)


def default_step(shape: Shape) -> float:
    return 1.0 / (400.0 * shape.m * shape.p)


def gibbs_sigma2(n: int, lam: float) -> float:
    """Gaussian variance whose likelihood equals ``exp(-lam * r(M))``."""
    return n / (2.0 * lam)


def replicate_seeds(master_seed: int, index: int) -> dict:
    """Independent 32-bit seeds for the data, initializer and chain of one replicate."""
    ss = np.random.SeedSequence(master_seed, spawn_key=(index,))
    data, init, chain = (int(c.generate_state(1)[0]) for c in ss.spawn(3))
    return {"data": data, "init": init, "chain": chain}


def initial_state(data: Dataset, settings: FitSettings, seed: int) -> np.ndarray:
    shape = data.shape
    if settings.init == "zero":
        return np.zeros(shape.as_tuple())
    if settings.init == "colmean":
        return column_mean_fill(data)
    if settings.init == "softimpute":
        return soft_impute_init(data, settings.softimpute_shrink, settings.softimpute_iters,
                                sigma=settings.sigma)
    lam = settings.lambda_for(data.n)
    cfg = GibbsConfig(K=min(settings.K, shape.m, shape.p), a=settings.a, b=settings.b,
                      T=settings.init_gibbs_T, burnin=settings.init_gibbs_burnin, seed=seed)
    return run_gibbs(data, cfg, gibbs_sigma2(data.n, lam)).mean


def fit(data: Dataset, settings: FitSettings, seeds: dict) -> tuple[ChainResult, float]:
    """Run the configured sampler; returns the chain result and wall-clock seconds."""
    start = time.perf_counter()
    lam = settings.lambda_for(data.n)
    shape = data.shape
    if settings.sampler == "gibbs":
        cfg = GibbsConfig(K=min(settings.K, shape.m, shape.p), a=settings.a, b=settings.b,
                          T=settings.T, burnin=settings.burnin, seed=seeds["chain"])
        result = run_gibbs(data, cfg, gibbs_sigma2(data.n, lam))
    else:
        init = initial_state(data, settings, seeds["init"])
        spec = PosteriorSpec(data, PriorConfig(settings.tau), lam, settings.iterative_resolvent)
        cfg = LmcConfig(h=settings.step_for(shape), T=settings.T, burnin=settings.burnin,
                        seed=seeds["chain"])
        runner = run_lmc if settings.sampler == "lmc" else run_mala
        result = runner(spec, cfg, init)
    return result, time.perf_counter() - start


def _summary(values):
    values = [v for v in values if v is not None]
    if not values:
        return {"mean": None, "std": None}
    std = statistics.stdev(values) if len(values) > 1 else 0.0
    return {"mean": statistics.fmean(values), "std": std}


def table_scale(mean: float) -> int:
    """Power of ten that puts the leading digit of ``mean`` in the units place."""
    if mean is None or mean <= 0 or not np.isfinite(mean):
        return 0
    return max(0, -int(np.floor(np.log10(mean))))


def format_table(aggregate: dict, metrics=("mse", "nmse", "pred")) -> str:
    lines = []
    for name in metrics:
        stats = aggregate.get(name)
        if not stats or stats["mean"] is None:
            continue
        k = table_scale(stats["mean"])
        s = 10.0**k
        mean = f"{stats['mean'] * s:.3f}"
        std = f"{stats['std'] * s:.3f}".lstrip("0") if stats["std"] * s < 1 else f"{stats['std'] * s:.3f}"
        label = f"10^{k} x {name.upper()}" if k else name.upper()
        lines.append(f"{label:<16}{mean} ({std})")
    return "\n".join(lines)


CSV_FIELDS = ("replicate", "data_seed", "chain_seed", "mse", "nmse", "pred", "est_rank",
              "accept_rate", "diverged")


def rows_to_csv(rows) -> str:
    buf = _io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_FIELDS, lineterminator="\n", extrasaction="ignore")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: (format(v, ".17g") if isinstance(v, float) else v) for k, v in row.items()})
    return buf.getvalue()


def _simulate_one(args):
    synth_kw, settings, master_seed, index = args
    seeds = replicate_seeds(master_seed, index)
    data = make_dataset(SynthConfig(seed=seeds["data"], **synth_kw))
    result, runtime = fit(data, settings, seeds)
    if result.diverged:
        report = None
    else:
        report = evaluate(result.mean, data, runtime, settings.rank_tol)
    return {
        "replicate": index,
        "data_seed": seeds["data"],
        "chain_seed": seeds["chain"],
        "mse": report.mse if report else None,
        "nmse": report.nmse if report else None,
        "pred": report.pred if report else None,
        "est_rank": report.est_rank if report else None,
        "accept_rate": result.accept_rate,
        "diverged": result.diverged,
        "runtime_seconds": runtime,
        "n": data.n,
    }


def _map(fn, items, jobs):
    if jobs <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def run_simulation(setting: int, m: int, p: int, rank: int, upsilon: float, replicates: int,
                   seed: int, settings: FitSettings, noise_sd: float = 1.0, jobs: int = 1) -> dict:
    """Replicated synthetic experiment; returns a manifest with per-replicate rows."""
    synth_kw = dict(m=m, p=p, r=rank, upsilon=upsilon, noise_sd=noise_sd, setting=setting)
    SynthConfig(seed=0, **synth_kw)
    rows = _map(_simulate_one, [(synth_kw, settings, seed, i) for i in range(replicates)], jobs)
    rows.sort(key=lambda r: r["replicate"])
    ok = [r for r in rows if not r["diverged"]]
    n = rows[0]["n"] if rows else None
    shape = Shape(m, p)
    aggregate = {k: _summary([r[k] for r in ok]) for k in ("mse", "nmse", "pred", "est_rank", "accept_rate")}
    aggregate["diverged_count"] = len(rows) - len(ok)
    return {
        "command": "simulate",
        "software_version": __version__,
        "config": {
            "setting": setting, "m": m, "p": p, "rank": rank, "upsilon": upsilon,
            "replicates": replicates, "seed": seed, "noise_sd": noise_sd,
            "settings": asdict(settings),
        },
        "resolved": {
            "n": n,
            "lambda": settings.lambda_for(n) if n else None,
            "lambda_convention": "absolute" if settings.lam is not None else settings.lambda_convention,
            "h": settings.step_for(shape),
            "gibbs_sigma2": gibbs_sigma2(n, settings.lambda_for(n)) if n else None,
            "seed_derivation": "SeedSequence(seed, spawn_key=(replicate,)).spawn(3) -> data, init, chain",
        },
        "replicates": rows,
        "aggregate": aggregate,
    }


def settings_from_dict(d: dict) -> FitSettings:
    return FitSettings(**d)


def run_inpaint(image: np.ndarray, upsilon: float, repeats: int, seed: int,
                settings: FitSettings) -> tuple[dict, np.ndarray, list]:
    """Mask pixels uniformly at random and restore them; returns manifest, first restoration, rows."""
    img = np.asarray(image, dtype=np.float64)
    shape = Shape(*img.shape)
    rows = []
    first = None
    for rep in range(repeats):
        seeds = replicate_seeds(seed, rep)
        mask = gen_mask_uniform(shape, upsilon, seeds["data"])
        data = add_noise(img, mask, 0.0, seeds["data"])
        result, runtime = fit(data, settings, seeds)
        est = result.mean
        report = None if result.diverged else evaluate(est, data, runtime, settings.rank_tol)
        if first is None:
            first = est
        rows.append({
            "replicate": rep,
            "data_seed": seeds["data"],
            "chain_seed": seeds["chain"],
            "mse": report.mse if report else None,
            "nmse": report.nmse if report else None,
            "pred": report.pred if report else None,
            "est_rank": report.est_rank if report else None,
            "accept_rate": result.accept_rate,
            "diverged": result.diverged,
            "runtime_seconds": runtime,
            "n": data.n,
        })
    ok = [r for r in rows if not r["diverged"]]
    n = rows[0]["n"]
    manifest = {
        "command": "inpaint",
        "software_version": __version__,
        "config": {"upsilon": upsilon, "repeats": repeats, "seed": seed,
                   "height": shape.m, "width": shape.p, "settings": asdict(settings)},
        "resolved": {
            "n": n,
            "lambda": settings.lambda_for(n),
            "h": settings.step_for(shape),
            "pixel_scale": "raw 0-255, no centering",
        },
        "replicates": rows,
        "aggregate": {k: _summary([r[k] for r in ok]) for k in ("mse", "nmse", "pred", "est_rank")},
    }
    return manifest, first, rows


def _time_chain(data: Dataset, sampler: str, iters: int, K: int, settings: FitSettings) -> float:
    lam = settings.lambda_for(data.n)
    if sampler == "gibbs":
        cfg = GibbsConfig(K=K, a=settings.a, b=settings.b, T=iters, burnin=0, seed=0)
        init = (np.zeros((data.shape.m, K)) + 0.1, np.zeros((data.shape.p, K)) + 0.1)
        start = time.perf_counter()
        run_gibbs(data, cfg, gibbs_sigma2(data.n, lam), init=init)
    else:
        spec = PosteriorSpec(data, PriorConfig(settings.tau), lam, settings.iterative_resolvent)
        cfg = LmcConfig(h=settings.step_for(data.shape), T=iters, burnin=0, seed=0)
        init = np.zeros(data.shape.as_tuple())
        runner = run_lmc if sampler == "lmc" else run_mala
        start = time.perf_counter()
        runner(spec, cfg, init)
    return time.perf_counter() - start


def run_bench(m: int, p_list, rank: int, upsilon: float, iters: int, runs: int, seed: int,
              settings: FitSettings) -> list[dict]:
    """Median wall-clock of ``iters`` iterations per sampler and column count. Sequential."""
    out = []
    for p in p_list:
        data = make_dataset(SynthConfig(m=m, p=p, r=rank, upsilon=upsilon, seed=seed))
        kmax = min(m, p)
        cases = [("lmc", None), ("mala", None), ("gibbs", kmax), ("gibbs", max(1, kmax // 2))]
        for sampler, K in cases:
            times = [_time_chain(data, sampler, iters, K, settings) for _ in range(runs)]
            label = sampler if K is None else f"gibbs_k{K}"
            out.append({"sampler": label, "K": K if K is not None else "", "m": m, "p": p,
                        "iters": iters, "seconds": statistics.median(times), "runs": runs})
    return out
