"""Command-line entry point: ``vgod <subcommand> ...``.

Exit codes: 0 on success, 2 on a configuration error, 3 on a runtime error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import harness
from .arm import ArmConfig, ArmModel, arm_train, recon_score
from .graph import GraphFormatError, OutlierGroundTruth, generate_sbm, load_bundle, save_bundle
from .graph import DatasetBundle
from .injection import InjectionError, InjectionParams, inject_contextual
from .leakage import leakage_sweep, candidate_norm_estimate
from .metrics import combine
from .vbm import VbmConfig, VbmModel, vbm_score, vbm_train

log = logging.getLogger("vgod")

EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def _bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {s!r}")


def _ints(s: str) -> list[int]:
    return [int(x) for x in s.split(",") if x]


def _write(text: str, out) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text)


# ------------------------------------------------------------------ commands

def cmd_inject(args) -> int:
    source = load_bundle(args.data)
    spec = {"kind": args.kind}
    if args.kind in ("standard", "structural"):
        spec.update(p=args.p, q=args.q)
    if args.kind in ("standard", "contextual"):
        spec.update(k=args.k, distance=args.distance)
    if args.kind == "contextual":
        spec["count"] = args.count if args.count is not None else args.p * args.q
    if args.kind == "mixed-q":
        spec.update(qs=_ints(args.qs), fraction=args.fraction)
    if args.kind == "swap":
        spec["fraction"] = args.fraction
    bundle = harness.make_bundle(source, spec, args.seed)
    save_bundle(bundle, args.out)
    log.info("wrote %s (%d structural, %d contextual)", args.out,
             len(bundle.truth.structural), len(bundle.truth.contextual))
    return 0


def cmd_audit(args) -> int:
    if args.estimate:
        est = candidate_norm_estimate(args.n, args.d, args.trials, args.seed, args.distribution)
        _write(json.dumps({"probability": est.probability, "successes": est.successes,
                           "conditioned": est.conditioned, "stderr": est.stderr}, indent=2) + "\n", args.out)
        return 0
    if args.data is None:
        raise harness.ConfigError("audit needs --data (or --estimate)")
    g = load_bundle(args.data).graph
    count = args.count
    distances = [d for d in args.distances.split(",") if d]

    def factory(k, dist):
        return inject_contextual(g, count, k, dist, args.seed)

    res = leakage_sweep(factory, _ints(args.ks), distances, str(args.data), args.seed)
    _write(res.to_csv(), args.out)
    return 0


def cmd_synth(args) -> int:
    g = generate_sbm(args.n, args.communities, args.p_in, args.p_out, args.attr_dim, args.attr_sep, args.seed)
    prov = {"source": "sbm", "n": args.n, "communities": args.communities, "p_in": args.p_in,
            "p_out": args.p_out, "attr_dim": args.attr_dim, "attr_sep": args.attr_sep, "seed": args.seed}
    save_bundle(DatasetBundle(g, OutlierGroundTruth(), prov), args.out)
    log.info("wrote SBM with n=%d m=%d to %s", g.n, g.m, args.out)
    return 0


def cmd_train_vbm(args) -> int:
    g = load_bundle(args.data).graph
    cfg = VbmConfig(hidden=args.hidden, lr=args.lr, epochs=args.epochs, self_loop=args.self_loop, seed=args.seed)
    model = vbm_train(g, cfg)
    model.save(args.out)
    log.info("VBM trained: final loss %.6f", model.history[-1] if model.history else float("nan"))
    return 0


def cmd_train_arm(args) -> int:
    g = load_bundle(args.data).graph
    cfg = ArmConfig(hidden=args.hidden, lr=args.lr, epochs=args.epochs, layers=args.layers, gnn=args.gnn,
                    row_normalize_X=args.row_norm, seed=args.seed)
    model = arm_train(g, cfg)
    model.save(args.out)
    log.info("ARM trained: final loss %.6f", model.history[-1] if model.history else float("nan"))
    return 0


def cmd_score(args) -> int:
    g = load_bundle(args.data).graph
    if args.vbm is None and args.arm is None:
        raise harness.ConfigError("score needs --vbm and/or --arm")
    cols = {}
    if args.vbm:
        cols["str"] = vbm_score(VbmModel.load(args.vbm), g)
    if args.arm:
        cols["attr"] = recon_score(ArmModel.load(args.arm), g)
    if len(cols) == 2:
        cols["score"] = combine(args.combination, cols["str"], cols["attr"], args.alpha)
    else:
        cols["score"] = next(iter(cols.values()))
    names = list(cols)
    lines = ["node," + ",".join(names)]
    for i in range(g.n):
        lines.append(f"{i}," + ",".join(repr(float(cols[c][i])) for c in names))
    _write("\n".join(lines) + "\n", args.out)
    return 0


def read_scores(path, column: str = "score") -> np.ndarray:
    text = Path(path).read_text().splitlines()
    header = text[0].split(",")
    if column not in header:
        raise harness.ConfigError(f"{path} has no column {column!r}")
    j = header.index(column)
    rows = [line.split(",") for line in text[1:] if line.strip()]
    s = np.empty(len(rows))
    for r in rows:
        s[int(r[0])] = float(r[j])
    return s


def cmd_eval(args) -> int:
    bundle = load_bundle(args.data)
    if not bundle.truth.all:
        raise harness.ConfigError(f"{args.data} has no outliers.txt")
    scores = {"combined": read_scores(args.scores, args.column)}
    if len(scores["combined"]) != bundle.graph.n:
        raise harness.ConfigError("score file length does not match the graph")
    row = harness.evaluate(bundle.truth, scores)
    _write(json.dumps({k: (None if v != v else v) for k, v in row.items()}, indent=2) + "\n", args.out)
    return 0


def cmd_bench(args) -> int:
    rows = harness.run_scaling_bench(_ints(args.sizes), avg_degree=args.avg_degree, attr_dim=args.attr_dim,
                                     hidden=args.hidden, repeats=args.repeats, seed=args.seed)
    _write(harness.bench_csv(rows), args.out)
    return 0


def cmd_run(args) -> int:
    cfg = harness.ExperimentConfig.from_file(args.config)
    out = Path(args.out)
    if args.trend_epochs:
        rows = harness.run_epoch_trend(cfg, args.trend_epochs)
        _write(harness.trend_csv(rows), out / "trend.csv")
        return 0
    report = harness.run_experiment(cfg)
    report.write(out)
    mean = report.mean
    log.info("mean AUC %.4f over %d seeds; report in %s", mean["auc"], len(report.rows), out)
    return 0


# ------------------------------------------------------------------ parser

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="vgod", description="Unsupervised graph outlier detection toolkit")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("inject", help="inject outliers into a dataset directory")
    s.add_argument("--data", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--kind", default="standard", choices=["standard", "structural", "contextual", "mixed-q", "swap"])
    s.add_argument("--p", type=int, default=5)
    s.add_argument("--q", type=int, default=15)
    s.add_argument("--k", type=int, default=50)
    s.add_argument("--count", type=int, default=None, help="contextual outliers (default p*q)")
    s.add_argument("--distance", default="euclidean", choices=["euclidean", "cosine"])
    s.add_argument("--qs", default="3,5,10,15")
    s.add_argument("--fraction", type=float, default=None)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_inject)

    s = sub.add_parser("audit", help="attribute-norm leakage sweep, or the candidate-argmax estimate")
    s.add_argument("--data")
    s.add_argument("--ks", default="1,2,5,10,20,50,100")
    s.add_argument("--distances", default="euclidean,cosine")
    s.add_argument("--count", type=int, default=75)
    s.add_argument("--estimate", action="store_true", help="Monte-Carlo estimate on random X instead")
    s.add_argument("--n", type=int, default=1000)
    s.add_argument("--d", type=int, default=32)
    s.add_argument("--trials", type=int, default=100_000)
    s.add_argument("--distribution", default="gaussian", choices=["gaussian", "uniform"])
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out")
    s.set_defaults(func=cmd_audit)

    s = sub.add_parser("synth", help="write a stochastic block model dataset")
    s.add_argument("--out", required=True)
    s.add_argument("--n", type=int, default=2000)
    s.add_argument("--communities", type=int, default=5)
    s.add_argument("--p-in", type=float, default=0.012)
    s.add_argument("--p-out", type=float, default=0.0003)
    s.add_argument("--attr-dim", type=int, default=32)
    s.add_argument("--attr-sep", type=float, default=4.0)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("train-vbm", help="train the variance-based model")
    s.add_argument("--data", required=True)
    s.add_argument("--epochs", type=int, default=10)
    s.add_argument("--lr", type=float, default=0.005)
    s.add_argument("--hidden", type=int, default=128)
    s.add_argument("--self-loop", type=_bool, default=False)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_train_vbm)

    s = sub.add_parser("train-arm", help="train the attribute reconstruction model")
    s.add_argument("--data", required=True)
    s.add_argument("--epochs", type=int, default=100)
    s.add_argument("--lr", type=float, default=0.005)
    s.add_argument("--hidden", type=int, default=128)
    s.add_argument("--gnn", default="gat", choices=["gcn", "gat", "gin"])
    s.add_argument("--layers", type=int, default=2)
    s.add_argument("--row-norm", type=_bool, default=False)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_train_arm)

    s = sub.add_parser("score", help="score nodes with trained checkpoints (CSV)")
    s.add_argument("--data", required=True)
    s.add_argument("--vbm")
    s.add_argument("--arm")
    s.add_argument("--combination", default="mean-std", choices=["mean-std", "weighted", "sum-to-unit"])
    s.add_argument("--alpha", type=float, default=0.5)
    s.add_argument("--out")
    s.set_defaults(func=cmd_score)

    s = sub.add_parser("eval", help="AUC / subset AUC / AucGap of a score file")
    s.add_argument("--data", required=True)
    s.add_argument("--scores", required=True)
    s.add_argument("--column", default="score")
    s.add_argument("--out")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("bench", help="inference time against SBM size")
    s.add_argument("--sizes", default="5000,10000,20000,40000")
    s.add_argument("--avg-degree", type=float, default=6.0)
    s.add_argument("--attr-dim", type=int, default=32)
    s.add_argument("--hidden", type=int, default=128)
    s.add_argument("--repeats", type=int, default=3)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out")
    s.set_defaults(func=cmd_bench)

    s = sub.add_parser("run", help="run an experiment from a JSON config")
    s.add_argument("--config", required=True)
    s.add_argument("--out", default="results")
    s.add_argument("--trend-epochs", type=int, default=0, help="emit the VBM epoch trend instead")
    s.set_defaults(func=cmd_run)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_CONFIG if e.code else 0
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(message)s")
    if getattr(args, "fraction", 0) is None:
        args.fraction = 0.02 if args.kind == "mixed-q" else 0.1
    try:
        return args.func(args)
    except (harness.ConfigError, GraphFormatError, InjectionError, FileNotFoundError) as e:
        log.error("config error: %s", e)
        return EXIT_CONFIG
    except Exception as e:  # noqa: BLE001 - mapped to the runtime exit code
        log.error("runtime error: %s: %s", type(e).__name__, e)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
