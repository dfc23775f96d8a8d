"""Per-epoch VBM AUC for each clique-size group (CSV: epoch,group,auc)."""
import argparse
import sys

from vgod.harness import ExperimentConfig, run_epoch_trend, trend_csv


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--dataset", required=True, help="dataset directory, e.g. data/cora")
    ap.add_argument("--epochs", type=int, default=100)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--self-loop", action="store_true")
    ap.add_argument("--out")
    args = ap.parse_args()
    cfg = ExperimentConfig.from_dict({"preset": "cora-mixed-q", "dataset": args.dataset, "seeds": [args.seed],
                                      "model": {"vbm": {"self_loop": args.self_loop}}})
    text = trend_csv(run_epoch_trend(cfg, args.epochs))
    if args.out:
        open(args.out, "w").write(text)
    else:
        sys.stdout.write(text)


if __name__ == "__main__":
    main()
