"""Command-line entry point.

Subcommands:

* ``simulate``            feeder spec JSON -> synthetic dataset CSVs
* ``cluster``             voltages (+ locations) -> mapping.json
* ``validate-assumption`` voltages + ground truth -> guarantee.json, eigs.csv
* ``evaluate``            mapping.json + ground truth -> evaluation.json
* ``sweep-noise``         repeat simulate+cluster over a noise grid -> sweep.csv

Options resolve as: command-line flag, then config file (flat JSON keyed by
option name), then the GRIDMAP_SEED environment variable for the seed, then
built-in defaults. Exit codes: 0 success, 2 bad input, 3 numerical failure.
Outputs embed the seed, method, and package version, and rerunning a
command with identical inputs reproduces its output files byte for byte.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import os
import sys

import numpy as np

from . import __version__
from .cluster import assign_transformers, attach_transformers, evaluate, kmeans_pp
from .errors import InputError, NumericalError
from .feeder_sim import FeederSpec, generate_profiles, simulate_voltages
from .graph import laplacian, location_similarity, voltage_similarity
from .guarantee import certify
from .ingest import (
    load_dataset,
    load_ground_truth,
    load_transformers,
    save_dataset,
    save_ground_truth,
    save_transformers,
)
from .multiview import MultiViewConfig, solve_multiview
from .spectral import embed

DEFAULTS = {
    "method": "spectral",
    "sigma": "auto",
    "sigma_l": "auto",
    "geo_metric": "haversine",
    "lambda_reg": 0.5,
    "max_iters": 30,
    "tol": 1e-8,
    "final_view": "voltage",
    "restarts": 10,
    "out": ".",
}


def _sigma_arg(text: str):
    if text == "auto":
        return text
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'auto' or a number, got {text!r}")


def _noise_grid(text: str) -> list[float]:
    try:
        grid = [float(x) for x in text.split(",") if x.strip() != ""]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad noise grid {text!r}")
    if not grid or any(x < 0 for x in grid):
        raise argparse.ArgumentTypeError("noise grid must be nonnegative numbers")
    return grid


def _resolve(args: argparse.Namespace) -> argparse.Namespace:
    """Apply option precedence: flags > config file > env seed > defaults."""
    config = {}
    if getattr(args, "config", None):
        try:
            with open(args.config) as fh:
                config = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise InputError(f"cannot parse config {args.config}: {exc}") from exc
        if not isinstance(config, dict):
            raise InputError(f"config {args.config} must be a JSON object")
    for key, value in vars(args).items():
        if value is None and key in config:
            setattr(args, key, config[key])
    for key, value in DEFAULTS.items():
        if getattr(args, key, "sentinel") is None:
            setattr(args, key, value)
    if getattr(args, "seed", "sentinel") is None:
        env = os.environ.get("GRIDMAP_SEED")
        try:
            args.seed = int(env) if env is not None else 0
        except ValueError:
            raise InputError(f"GRIDMAP_SEED must be an integer, got {env!r}")
    return args


def _write_json(path, doc) -> None:
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _jsonable(value):
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, tuple):
        return list(value)
    return value


def _write_matrix_csv(path, ids, header_prefix, matrix) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([header_prefix, *(f"c{j}" for j in range(matrix.shape[1]))])
        for name, row in zip(ids, matrix):
            writer.writerow([name, *(repr(float(v)) for v in row)])


def cmd_simulate(args) -> int:
    spec = FeederSpec.from_json_file(args.spec)
    data, xfmrs, truth = simulate_voltages(spec, generate_profiles(spec))
    os.makedirs(args.out, exist_ok=True)
    save_dataset(
        data,
        os.path.join(args.out, "voltages.csv"),
        os.path.join(args.out, "locations.csv"),
    )
    save_transformers(xfmrs, os.path.join(args.out, "transformers.csv"))
    save_ground_truth(truth, os.path.join(args.out, "ground_truth.csv"))
    _write_json(os.path.join(args.out, "spec_echo.json"), spec.to_json_dict())
    print(
        f"simulated {data.n_meters} meters on {xfmrs.n_transformers} transformers "
        f"({data.n_samples} samples) -> {args.out}"
    )
    return 0


def cmd_cluster(args) -> int:
    data = load_dataset(args.voltages, args.locations)
    xfmrs = load_transformers(args.transformers) if args.transformers else None
    if args.k is None:
        raise InputError("--k is required (flag or config file)")
    if args.k < 1:
        raise InputError("k must be positive")

    g_v = None
    if args.method in ("spectral", "multiview") or args.dump_similarity:
        g_v = voltage_similarity(data, sigma=args.sigma)

    emb = None
    if args.method == "spectral":
        emb = embed(laplacian(g_v), args.k)
        km = kmeans_pp(emb.X, args.k, seed=args.seed, restarts=args.restarts)
        mapping = assign_transformers(km, data, xfmrs, method="spectral")
    elif args.method == "kmeans-baseline":
        km = kmeans_pp(data.voltages, args.k, seed=args.seed, restarts=args.restarts)
        mapping = assign_transformers(km, data, xfmrs, method="kmeans-baseline")
    elif args.method == "multiview":
        if data.locations is None:
            raise InputError("multiview clustering needs --locations")
        g_l = location_similarity(data, sigma=args.sigma_l, metric=args.geo_metric)
        cfg = MultiViewConfig(
            lambda_reg=args.lambda_reg,
            max_outer_iters=args.max_iters,
            tol=args.tol,
            final_view=args.final_view,
        )
        emb, mapping, _ = solve_multiview(
            g_v, g_l, args.k, cfg, seed=args.seed, restarts=args.restarts
        )
        mapping = attach_transformers(mapping, data, xfmrs)
    else:
        raise InputError(f"unknown method {args.method!r}")

    os.makedirs(args.out, exist_ok=True)
    if args.dump_similarity:
        _write_matrix_csv(args.dump_similarity, data.meter_ids, "meter_id", g_v.matrix)
    if args.dump_embedding:
        if emb is None:
            raise InputError("the raw-voltage baseline has no embedding to dump")
        _write_matrix_csv(args.dump_embedding, data.meter_ids, "meter_id", emb.X)

    doc = {
        "meters": {
            m: {
                "cluster": int(mapping.labels[i]),
                "transformer": None if mapping.mapping is None else mapping.mapping[m],
            }
            for i, m in enumerate(data.meter_ids)
        },
        "seed": args.seed,
        "k": args.k,
        "method": args.method,
        "version": __version__,
    }
    _write_json(os.path.join(args.out, "mapping.json"), doc)
    print(f"clustered {data.n_meters} meters into {args.k} groups -> "
          f"{os.path.join(args.out, 'mapping.json')}")
    return 0


def cmd_validate(args) -> int:
    data = load_dataset(args.voltages)
    xfmrs = load_transformers(args.transformers)
    truth = load_ground_truth(args.ground_truth, data, xfmrs)
    k = args.k if args.k is not None else truth.k
    g_v = voltage_similarity(data, sigma=args.sigma)
    report = certify(g_v, truth, k)

    os.makedirs(args.out, exist_ok=True)
    doc = {f.name: _jsonable(getattr(report, f.name)) for f in dataclasses.fields(report)}
    doc["seed"] = args.seed
    doc["version"] = __version__
    _write_json(os.path.join(args.out, "guarantee.json"), doc)

    with open(os.path.join(args.out, "eigs.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["index", "ideal", "real"])
        for i, (wi, wr) in enumerate(zip(report.ideal_eigenvalues, report.real_eigenvalues)):
            writer.writerow([i, repr(float(wi)), repr(float(wr))])

    verdict = "holds" if report.assumption_holds else "FAILS"
    print(f"assumption {verdict}: delta = {report.delta:.6g} (k = {k})")
    return 0


def cmd_evaluate(args) -> int:
    mapping, meta = _load_mapping(args.mapping)
    xfmrs = load_transformers(args.transformers)
    truth = load_ground_truth(args.ground_truth, mapping.meter_ids, xfmrs)
    report = evaluate(mapping, truth)

    os.makedirs(args.out, exist_ok=True)
    doc = {
        "accuracy": report.accuracy,
        "exact_recovery": report.exact_recovery,
        "confusion": report.confusion.tolist(),
        "n_meters": report.n_meters,
        "seed": meta.get("seed"),
        "method": meta.get("method"),
        "k": meta.get("k"),
        "version": __version__,
    }
    _write_json(os.path.join(args.out, "evaluation.json"), doc)
    print(f"accuracy {report.accuracy:.4f} "
          f"({'exact' if report.exact_recovery else 'not exact'}) over {report.n_meters} meters")
    return 0


def _load_mapping(path):
    from .cluster import MappingResult

    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot parse mapping {path}: {exc}") from exc
    try:
        meters = doc["meters"]
        ids = sorted(meters)
        labels = np.array([int(meters[m]["cluster"]) for m in ids])
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"{path} is not a mapping file: {exc}") from exc
    k = int(doc.get("k", labels.max() + 1))
    result = MappingResult(
        labels=labels,
        meter_ids=ids,
        k=k,
        method=doc.get("method", "unknown"),
        seed=int(doc.get("seed", 0)),
        inertia=float("nan"),
        restarts_used=0,
        centroids_embedding=np.empty((k, 0)),
        mapping={m: meters[m].get("transformer") for m in ids},
    )
    return result, doc


def cmd_sweep(args) -> int:
    base = FeederSpec.from_json_file(args.spec)
    grid = sorted(args.noise_grid)
    if args.trials < 1:
        raise InputError("trials must be positive")

    rows = []
    for noise in grid:
        accs = []
        exact = 0
        for trial in range(args.trials):
            spec = dataclasses.replace(
                base, noise_std_pu=noise, seed=base.seed + trial
            )
            data, xfmrs, truth = simulate_voltages(spec, generate_profiles(spec))
            emb = embed(laplacian(voltage_similarity(data, sigma=args.sigma)), spec.k)
            km = kmeans_pp(emb.X, spec.k, seed=spec.seed, restarts=args.restarts)
            mapping = assign_transformers(km, data, xfmrs, method="spectral")
            report = evaluate(mapping, truth)
            accs.append(report.accuracy)
            exact += report.exact_recovery
        rows.append((noise, exact / args.trials, float(np.mean(accs))))

    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "sweep.csv")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["noise_std_pu", "success_rate", "mean_accuracy", "trials"])
        for noise, rate, acc in rows:
            writer.writerow([repr(float(noise)), repr(rate), repr(acc), args.trials])
    print(f"swept {len(grid)} noise levels x {args.trials} trials -> {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gridmap",
        description="Recover meter-to-transformer mapping from voltage time series.",
    )
    parser.add_argument("--version", action="version", version=f"gridmap {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="flat JSON file with option defaults")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", default=None, help="output directory (default: .)")

    p = sub.add_parser("simulate", help="generate a synthetic feeder dataset")
    p.add_argument("--spec", required=True, help="feeder spec JSON")
    common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("cluster", help="recover the mapping from voltages")
    p.add_argument("--voltages", required=True)
    p.add_argument("--locations", default=None)
    p.add_argument("--transformers", default=None)
    p.add_argument("--k", type=int, default=None, help="number of transformers")
    p.add_argument(
        "--method",
        choices=("spectral", "multiview", "kmeans-baseline"),
        default=None,
    )
    p.add_argument("--sigma", type=_sigma_arg, default=None,
                   help="voltage kernel width ('auto' = median distance)")
    p.add_argument("--sigma-l", type=_sigma_arg, default=None,
                   help="location kernel width ('auto' = median distance)")
    p.add_argument("--geo-metric", choices=("haversine", "euclidean-angle"), default=None)
    p.add_argument("--lambda", dest="lambda_reg", type=float, default=None,
                   help="multiview co-regularization weight")
    p.add_argument("--max-iters", type=int, default=None)
    p.add_argument("--tol", type=float, default=None)
    p.add_argument("--final-view", choices=("voltage", "location", "average"), default=None)
    p.add_argument("--restarts", type=int, default=None)
    p.add_argument("--dump-similarity", metavar="CSV", default=None)
    p.add_argument("--dump-embedding", metavar="CSV", default=None)
    common(p)
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("validate-assumption", help="eigengap assumption + subspace bound")
    p.add_argument("--voltages", required=True)
    p.add_argument("--transformers", required=True)
    p.add_argument("--ground-truth", required=True)
    p.add_argument("--k", type=int, default=None,
                   help="default: number of transformers in the ground truth")
    p.add_argument("--sigma", type=_sigma_arg, default=None)
    common(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("evaluate", help="score a mapping against ground truth")
    p.add_argument("--mapping", required=True, help="mapping.json from 'cluster'")
    p.add_argument("--transformers", required=True)
    p.add_argument("--ground-truth", required=True)
    common(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep-noise", help="success rate vs measurement noise")
    p.add_argument("--spec", required=True, help="feeder spec JSON")
    p.add_argument("--noise-grid", type=_noise_grid, required=True,
                   help="comma-separated noise levels (pu)")
    p.add_argument("--trials", type=int, required=True)
    p.add_argument("--sigma", type=_sigma_arg, default=None)
    p.add_argument("--restarts", type=int, default=None)
    common(p)
    p.set_defaults(func=cmd_sweep)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args = _resolve(args)
        return args.func(args)
    except InputError as exc:
        print(f"gridmap: error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"gridmap: numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
