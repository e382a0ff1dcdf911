"""Command-line front end.

Each subcommand reads a JSON config (optionally layered over a named preset),
writes CSV/JSON/PGM artifacts to ``--out`` and records the full resolved
configuration alongside them.  Exit codes: 0 success, 1 numerical failure,
2 invalid input.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .allocate import BandModel, dr_thresholds, greedy_allocate, predicted_distortion, two_gender_allocate, uniform_allocate
from .codec import DivergenceError
from .io import read_json, read_pgm, write_csv, write_json, write_pgm
from .priors import QuadratureError, prior_from_dict, prior_to_dict
from .presets import preset
from .sd import StateEvolutionError, bound_curves, convexify, linear_sd, sd_curve, se_distortion
from .sim import estimate_priors, image_pipeline, monte_carlo_sd
from .turbo import HmtParams
from .wavelet import band_sizes, band_vectorize, dwt2

NUMERICAL_ERRORS = (DivergenceError, StateEvolutionError, QuadratureError, FloatingPointError, np.linalg.LinAlgError)


class InputError(ValueError):
    pass


def _need(cfg: dict, key: str):
    if key not in cfg:
        raise InputError(f"config is missing {key!r}")
    return cfg[key]


def _band_priors(cfg: dict):
    """Band priors and sizes from inline stats or a PGM image."""
    levels = int(cfg.setdefault("levels", 5))
    if "image" in cfg:
        img = read_pgm(cfg["image"])
        bands = band_vectorize(dwt2(img, levels))
        priors = estimate_priors(bands, cfg.setdefault("prior_kind", "gmd"))
        return priors, [b.size for b in bands]
    priors = [prior_from_dict(d) for d in _need(cfg, "priors")]
    sizes = cfg.get("band_sizes") or band_sizes(cfg.setdefault("shape", [256, 256]), levels)
    if len(sizes) != len(priors):
        raise InputError("number of priors does not match the band geometry")
    return priors, sizes


def cmd_sd_curve(cfg: dict, out: Path) -> int:
    prior = prior_from_dict(_need(cfg, "prior"))
    curve = sd_curve(prior, float(cfg.setdefault("grid_step", 0.005)))
    env, delta_c = convexify(curve)
    e, m = bound_curves(prior, curve.deltas)
    var = prior.variance()
    write_csv(out / "sd_curve.csv", {
        "delta": curve.deltas,
        "sd_bamp": curve.distortions,
        "ebb": e,
        "mbb": m,
        "sd_convexified": env.distortions,
        "linear": var * linear_sd(curve.deltas),
    }, "sd-curve")
    write_json(out / "sd_curve.json", {"config": cfg, "delta_c": delta_c, "variance": var, "version": __version__})
    print(f"delta_c = {delta_c:.3f}" if delta_c is not None else "delta_c = none (curve already convex)")
    return 0


def cmd_allocate(cfg: dict, out: Path) -> int:
    priors, sizes = _band_priors(cfg)
    model = BandModel.from_priors(sizes, priors)
    if "budget" in cfg:
        budget = int(cfg["budget"])
    else:
        budget = int(round(float(_need(cfg, "delta")) * model.total))
    curves = model.curves(float(cfg.setdefault("grid_step", 0.005)))
    kind = cfg.setdefault("allocator", "greedy")
    if kind == "greedy":
        alloc = greedy_allocate(model, budget, curves)
    elif kind == "uniform":
        alloc = uniform_allocate(model, budget)
    elif kind == "two_gender":
        alloc = two_gender_allocate(model, budget)
    else:
        raise InputError(f"unknown allocator {kind!r}")
    mse, psnr = predicted_distortion(model, alloc, curves)
    thresholds = dr_thresholds(model, alloc, curves)
    write_json(out / "allocation.json", {
        "config": cfg,
        "priors": [prior_to_dict(p) for p in priors],
        "allocation": alloc.to_dict(),
        "predicted_mse": mse,
        "predicted_psnr": psnr,
        "dr_thresholds": thresholds,
        "delta_c": [c.delta_c for c in curves],
        "version": __version__,
    })
    write_csv(out / "allocation.csv", {
        "band": list(range(len(sizes))),
        "n": sizes,
        "m": alloc.m,
        "ratio": alloc.ratios(),
        "variance": model.variances,
        "dr_threshold": thresholds,
    }, "allocation")
    print(f"allocation {alloc.m} (budget {budget}); predicted PSNR {psnr:.2f} dB")
    return 0


def cmd_simulate(cfg: dict, out: Path, threads: int) -> int:
    prior = prior_from_dict(_need(cfg, "prior"))
    decoder = cfg.setdefault("decoder", "bamp")
    n, trials = int(cfg.setdefault("n", 10000)), int(cfg.setdefault("trials", 20))
    deltas = [float(d) for d in _need(cfg, "deltas")]
    seed = int(cfg["seed"])
    cfg["threads"] = threads
    rows = {"delta": [], "empirical": [], "theoretical": [], "stderr": []}
    for i, d in enumerate(deltas):
        mean, se = monte_carlo_sd(prior, d, n, trials, decoder, seed=seed + i, threads=threads)
        theory = prior.variance() * linear_sd(d) if decoder == "l2" else se_distortion(prior, d)
        for k, v in zip(rows, (d, mean, theory, se)):
            rows[k].append(v)
        print(f"delta={d:.3f} empirical={mean:.6g} theoretical={theory:.6g} stderr={se:.3g}")
    write_csv(out / "simulate.csv", rows, "simulate")
    write_json(out / "simulate.json", {"config": cfg, "version": __version__})
    return 0


def cmd_image(cfg: dict, out: Path) -> int:
    img = read_pgm(_need(cfg, "image"))
    levels = int(cfg.setdefault("levels", 5))
    if img.shape[0] % (1 << levels) or img.shape[1] % (1 << levels):
        raise InputError(f"image of shape {img.shape} is not divisible by 2^{levels}")
    source = cfg.setdefault("model_source", "oracle")
    priors = [prior_from_dict(d) for d in cfg["priors"]] if source == "fixed" else None
    hmt = HmtParams.from_dict(cfg["hmt"]) if "hmt" in cfg else None
    recon, value, report = image_pipeline(
        img,
        float(_need(cfg, "delta")),
        model_source=source,
        allocator=cfg.setdefault("allocator", "greedy"),
        decoder=cfg.setdefault("decoder", "bamp"),
        seed=int(cfg["seed"]),
        levels=levels,
        priors=priors,
        prior_kind=cfg.setdefault("prior_kind", "gmd"),
        hmt_params=hmt,
        turbo_iters=int(cfg.setdefault("turbo_iters", 20)),
        grid_step=float(cfg.setdefault("grid_step", 0.005)),
    )
    report["config"] = cfg
    write_pgm(out / "reconstruction.pgm", recon)
    write_json(out / "report.json", report)
    if "turbo_trace" in report:
        rows = report["turbo_trace"]
        write_csv(out / "turbo_trace.csv", {k: [r[k] for r in rows] for k in ("iteration", "mse", "psnr")}, "turbo-trace")
    print(f"PSNR {value:.2f} dB (predicted {report['predicted_psnr']:.2f} dB)")
    return 0


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sdcs", description="Sample-distortion curves, allocation and simulation.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("sd-curve", "allocate", "simulate", "image"):
        s = sub.add_parser(name)
        s.add_argument("--config", type=Path, help="JSON config, applied over the preset")
        s.add_argument("--preset", help="named parameter set")
        s.add_argument("--seed", type=int, help="overrides the config seed")
        s.add_argument("--out", type=Path, default=Path("."), help="output directory")
        s.add_argument("--threads", type=int, default=1, help="worker threads for Monte Carlo trials")
    return p


def _resolve(args) -> dict:
    cfg = preset(args.preset) if args.preset else {}
    if args.config:
        loaded = read_json(args.config)
        if not isinstance(loaded, dict):
            raise InputError("config must be a JSON object")
        cfg.update(loaded)
    if args.seed is not None:
        cfg["seed"] = args.seed
    cfg.setdefault("seed", 0)
    if args.threads < 1:
        raise InputError("--threads must be at least 1")
    return cfg


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = _resolve(args)
        if args.command == "sd-curve":
            return cmd_sd_curve(cfg, args.out)
        if args.command == "allocate":
            return cmd_allocate(cfg, args.out)
        if args.command == "simulate":
            return cmd_simulate(cfg, args.out, args.threads)
        return cmd_image(cfg, args.out)
    except NUMERICAL_ERRORS as exc:
        print(f"error: numerical failure: {exc}", file=sys.stderr)
        return 1
    except (ValueError, KeyError, TypeError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
