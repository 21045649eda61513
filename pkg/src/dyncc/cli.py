"""Command-line entry point wiring the pipeline into reproducible runs.

Every subcommand writes its machine-readable artifacts plus a run manifest
(the exact argv, the package and library versions) next to the output, so
any run can be repeated bit-for-bit by replaying the manifest's argv. No
timestamps or host state ever enter an artifact.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from .cc import CcSeries, GraphSeries, co_incidence, skeleton
from .checks import GRAD_TOL, run_grad_checks
from .decoder import (
    DecoderHyperparams,
    predict_next_cc,
)
from .encoder import neighborhood_matrices
from .generators import (
    RandomBaselineParams,
    gen_dataset,
    ingest_covid,
    random_prediction,
)
from .lifting import LiftConfig, lift_series
from .matching import RWPL_VARIANTS, rwpl
from .metrics import evaluate
from .series_io import (
    CC_SERIES_FORMAT,
    GRAPH_SERIES_FORMAT,
    dump_json,
    load_cc_series,
    load_graph_series,
    save_cc_series,
    save_graph_series,
)
from .training import (
    TrainConfig,
    load_model,
    run_ablation,
    save_model,
    signal_width,
    train,
)


def _write_manifest(out_path: Path, argv: list[str]) -> None:
    target = out_path / "run-manifest.json" if out_path.is_dir() else Path(
        str(out_path) + ".run.json"
    )
    dump_json(
        {
            "argv": list(argv),
            "versions": {
                "dyncc": __version__,
                "numpy": np.__version__,
                "python": ".".join(str(v) for v in sys.version_info[:3]),
            },
        },
        target,
    )


def _load_any_series(path):
    doc = json.loads(Path(path).read_text())
    fmt = doc.get("format")
    if fmt == GRAPH_SERIES_FORMAT:
        return load_graph_series(path)
    if fmt == CC_SERIES_FORMAT:
        return load_cc_series(path)
    raise ValueError(f"{path}: unknown series format {fmt!r}")


def _as_graph_series(series) -> GraphSeries:
    if isinstance(series, GraphSeries):
        return series
    return GraphSeries(series.num_nodes, [skeleton(cc) for cc in series.ccs])


def _cmd_gen(args, argv) -> int:
    split = tuple(int(x) for x in args.split.split(","))
    if len(split) != 3:
        raise ValueError("--split needs three comma-separated integers")
    kw = {}
    if args.model == "ba":
        kw = {"n": args.n, "m": args.m}
    elif args.model == "tiny-ba":
        kw = {"n": args.n if args.n != 50 else 6, "m": args.m if args.m != 4 else 1}
    elif args.model == "community-decay":
        kw = {
            "timesteps": args.t,
            "num_communities": args.communities,
            "nodes_per_community": args.community_size,
            "p_internal": args.p_int,
            "p_external": args.p_ext,
            "decay_fraction": args.f_dec,
        }
    dataset = gen_dataset(args.model, sum(split), split, args.seed, **kw)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for name, series_list in dataset.items():
        for i, series in enumerate(series_list):
            save_graph_series(series, out / f"{name}_{i}.json")
    _write_manifest(out, argv)
    return 0


def _cmd_ingest_covid(args, argv) -> int:
    series = ingest_covid(args.edges, args.cases, args.window)
    save_graph_series(series, args.out)
    _write_manifest(Path(args.out), argv)
    return 0


def _cmd_lift(args, argv) -> int:
    cfg = LiftConfig(args.min_clique, args.max_clique)
    in_path = Path(getattr(args, "in"))
    if in_path.is_dir():
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        for f in sorted(in_path.glob("*.json")):
            if f.name.endswith("run-manifest.json") or f.name.endswith(".run.json"):
                continue
            save_cc_series(lift_series(load_graph_series(f), cfg), out / f.name)
        _write_manifest(out, argv)
    else:
        save_cc_series(lift_series(load_graph_series(in_path), cfg), args.out)
        _write_manifest(Path(args.out), argv)
    return 0


def _load_split(data_dir: Path, prefix: str) -> list[CcSeries]:
    return [load_cc_series(f) for f in sorted(data_dir.glob(f"{prefix}_*.json"))]


def _cmd_train(args, argv) -> int:
    overrides = {}
    if args.config:
        overrides = json.loads(Path(args.config).read_text())
    config = TrainConfig(**overrides)
    data_dir = Path(args.data)
    dataset = {
        "train": _load_split(data_dir, "train"),
        "val": _load_split(data_dir, "val"),
    }
    result = train(config, dataset, log_fn=lambda row: print(
        f"epoch {row['epoch']}: train {row['train_loss']:.6f} "
        f"val {row['val_loss']:.6f} lr {row['lr']:.2e}"
    ))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    d0 = signal_width(dataset["train"] + dataset["val"])
    save_model(out, result.model, d0, config.seed, {"train_config": asdict(config)})
    _write_curve(out / "curves.csv", result.curve)
    dump_json(
        {"best_val": result.best_val, "best_epoch": result.best_epoch},
        out / "summary.json",
    )
    _write_manifest(out, argv)
    return 0


def _write_curve(path: Path, curve: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "train_loss", "val_loss", "lr"])
        for row in curve:
            writer.writerow(
                [row["epoch"], repr(row["train_loss"]), repr(row["val_loss"]), repr(row["lr"])]
            )


def _cmd_sample(args, argv) -> int:
    model, manifest = load_model(args.model)
    series = load_cc_series(getattr(args, "in"))
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([args.seed])))
    hp1 = DecoderHyperparams(
        n_max=2,
        n_new_cell=args.n_new_cell,
        p_min=args.p_min,
        traversal_mode=args.mode,
        temperature=args.temperature,
    )
    hp2 = DecoderHyperparams(
        n_max=15,
        n_new_cell=args.n_new_cell,
        p_min=args.p_min,
        traversal_mode=args.mode,
        temperature=args.temperature,
    )
    predicted = [series.ccs[0]]
    for cc in series.ccs[:-1]:
        predicted.append(
            predict_next_cc(
                cc,
                model.encoder,
                model.dec_rank1,
                model.dec_rank2,
                rng,
                hp1,
                hp2,
                neighborhood_matrices(cc),
            )
        )
    save_cc_series(CcSeries(series.num_nodes, predicted), args.out)
    _write_manifest(Path(args.out), argv)
    return 0


def _cmd_baseline(args, argv) -> int:
    target = load_cc_series(args.target)
    params = RandomBaselineParams(
        rank1_min=args.r1_min,
        rank1_max=args.r1_max,
        rank2_min=args.r2_min,
        rank2_max=args.r2_max,
        seed=args.seed,
    )
    save_cc_series(random_prediction(target, params), args.out)
    _write_manifest(Path(args.out), argv)
    return 0


def _cmd_eval_graph(args, argv) -> int:
    pred = _as_graph_series(_load_any_series(args.pred))
    target = _as_graph_series(_load_any_series(args.target))
    report = evaluate(pred, target)
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["metric", "value"])
        for name, value in report.rows():
            writer.writerow([name, repr(value)])
    _write_manifest(Path(args.out), argv)
    return 0


def _cmd_eval_cc(args, argv) -> int:
    pred = load_cc_series(args.pred)
    target = load_cc_series(args.target)
    if len(pred) != len(target):
        raise ValueError("pred and target series must have the same length")
    losses = [name.strip() for name in args.losses.split(",") if name.strip()]
    for name in losses:
        if name not in RWPL_VARIANTS:
            raise ValueError(f"unknown loss {name!r}; choose from {sorted(RWPL_VARIANTS)}")
    start = 1 if args.skip_first and len(pred) > 1 else 0
    report = {"per_timestep": {}, "mean": {}, "flagged": []}
    for rank in (1, 2):
        rank_key = f"rank{rank}"
        report["per_timestep"][rank_key] = {name: [] for name in losses}
        for t in range(start, len(pred)):
            pd = co_incidence(pred.ccs[t], rank).to_dense()
            td = co_incidence(target.ccs[t], rank).to_dense()
            for name in losses:
                row_loss, matcher = RWPL_VARIANTS[name]
                value = rwpl(pd, td, row_loss, matcher, eps=args.eps, iters=args.iters)
                if not math.isfinite(value):
                    report["flagged"].append({"rank": rank, "timestep": t, "loss": name})
                    value = None
                report["per_timestep"][rank_key][name].append(value)
        report["mean"][rank_key] = {}
        for name in losses:
            values = [v for v in report["per_timestep"][rank_key][name] if v is not None]
            report["mean"][rank_key][name] = (
                sum(values) / len(values) if values else None
            )
    dump_json(report, args.out)
    _write_manifest(Path(args.out), argv)
    return 0


def _cmd_ablation(args, argv) -> int:
    data_dir = Path(args.data)
    dataset = {
        "train": _load_split(data_dir, "train"),
        "val": _load_split(data_dir, "val"),
    }
    seeds = [int(s) for s in args.seeds.split(",")]
    report = run_ablation(
        dataset,
        seeds,
        model1_max_epochs=args.model1_epochs,
        others_max_epochs=args.others_epochs,
        others_seed_count=args.others_seeds,
        hidden=args.hidden,
        lr=args.lr,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for model_id, entry in report["models"].items():
        for run in entry["runs"]:
            _write_curve(out / f"{model_id}_seed{run['seed']}.csv", run["curve"])
    slim = {
        "models": {
            mid: {
                "loss": entry["loss"],
                "traversal": entry["traversal"],
                "halved_runs": entry["halved_runs"],
                "runs": [
                    {k: run[k] for k in ("seed", "epoch1_val", "best_val", "epochs_run", "halved")}
                    for run in entry["runs"]
                ],
            }
            for mid, entry in report["models"].items()
        },
        "improved_models": report["improved_models"],
    }
    dump_json(slim, out / "report.json")
    _write_manifest(out, argv)
    for mid, entry in slim["models"].items():
        print(f"{mid} ({entry['loss']}, {entry['traversal']}): "
              f"halved {entry['halved_runs']}/{len(entry['runs'])}")
    return 0


def _cmd_gradcheck(args, argv) -> int:
    results = run_grad_checks()
    failures = 0
    for name, err in results:
        status = "PASS" if err < GRAD_TOL else "FAIL"
        failures += status == "FAIL"
        print(f"{status} {name}: max relative error {err:.3e}")
    print(f"{len(results) - failures}/{len(results)} gradient checks passed")
    return 1 if failures else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dyncc",
        description="Dynamic combinatorial-complex generation pipeline",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate synthetic temporal graph datasets")
    p.add_argument("--model", required=True, choices=["ba", "tiny-ba", "community-decay"])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--count", type=int, default=10)
    p.add_argument("--split", default="5,2,3")
    p.add_argument("--out", required=True)
    p.add_argument("--n", type=int, default=50)
    p.add_argument("--m", type=int, default=4)
    p.add_argument("--t", type=int, default=40)
    p.add_argument("--communities", type=int, default=3)
    p.add_argument("--community-size", type=int, default=15)
    p.add_argument("--p-int", type=float, default=0.9)
    p.add_argument("--p-ext", type=float, default=0.01)
    p.add_argument("--f-dec", type=float, default=0.3)
    p.set_defaults(handler=_cmd_gen)

    p = sub.add_parser("ingest-covid", help="build a featured series from case data")
    p.add_argument("--edges", required=True)
    p.add_argument("--cases", required=True)
    p.add_argument("--window", type=int, default=8)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=_cmd_ingest_covid)

    p = sub.add_parser("lift", help="clique-lift graph series into CC series")
    p.add_argument("--in", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--min-clique", type=int, default=3)
    p.add_argument("--max-clique", type=int, default=15)
    p.set_defaults(handler=_cmd_lift)

    p = sub.add_parser("train", help="train the encoder-decoder model")
    p.add_argument("--config", default=None)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=_cmd_train)

    p = sub.add_parser("sample", help="sample next-step predictions for a series")
    p.add_argument("--model", required=True)
    p.add_argument("--in", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mode", choices=["deterministic", "stochastic"], default="stochastic")
    p.add_argument("--p-min", type=float, default=0.5)
    p.add_argument("--temperature", type=float, default=0.5)
    p.add_argument("--n-new-cell", type=int, default=1)
    p.set_defaults(handler=_cmd_sample)

    p = sub.add_parser("baseline", help="random co-incidence baseline prediction")
    p.add_argument("--target", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--r1-min", type=int, default=2)
    p.add_argument("--r1-max", type=int, default=2)
    p.add_argument("--r2-min", type=int, default=3)
    p.add_argument("--r2-max", type=int, default=15)
    p.set_defaults(handler=_cmd_baseline)

    p = sub.add_parser("eval-graph", help="DTW statistics report for two series")
    p.add_argument("--pred", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=_cmd_eval_graph)

    p = sub.add_parser("eval-cc", help="matching-loss report for two CC series")
    p.add_argument("--pred", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--losses", default="hbce,hc,sbce,sc")
    p.add_argument("--out", required=True)
    p.add_argument("--eps", type=float, default=0.1)
    p.add_argument("--iters", type=int, default=50)
    p.add_argument("--skip-first", action=argparse.BooleanOptionalAction, default=True)
    p.set_defaults(handler=_cmd_eval_cc)

    p = sub.add_parser("ablation", help="train the four-model ablation grid")
    p.add_argument("--data", required=True)
    p.add_argument("--seeds", default="0,1,2,3,4")
    p.add_argument("--out", required=True)
    p.add_argument("--model1-epochs", type=int, default=200)
    p.add_argument("--others-epochs", type=int, default=20)
    p.add_argument("--others-seeds", type=int, default=1)
    p.add_argument("--hidden", type=int, default=256)
    p.add_argument("--lr", type=float, default=1e-3)
    p.set_defaults(handler=_cmd_ablation)

    p = sub.add_parser("gradcheck", help="finite-difference verification suite")
    p.set_defaults(handler=_cmd_gradcheck)

    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args, argv)
    except (ValueError, FileNotFoundError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
