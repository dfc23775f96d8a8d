"""AUC of the attribute L2-norm detector as the contextual candidate-set size k varies."""
import argparse
import sys

import numpy as np

from vgod.harness import load_source
from vgod.injection import inject_contextual
from vgod.leakage import leakage_sweep


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--dataset", required=True)
    ap.add_argument("--ks", default="1,2,5,10,20,50,100")
    ap.add_argument("--distances", default="euclidean,cosine")
    ap.add_argument("--count", type=int, default=75)
    ap.add_argument("--seeds", default="0,1,2,3,4")
    args = ap.parse_args()
    g = load_source(args.dataset).graph
    ks = [int(k) for k in args.ks.split(",")]
    dists = args.distances.split(",")
    table = {}
    for seed in (int(s) for s in args.seeds.split(",")):
        res = leakage_sweep(lambda k, d: inject_contextual(g, args.count, k, d, seed), ks, dists, seed=seed)
        for k, d, a in res.rows:
            table.setdefault((k, d), []).append(a)
    out = sys.stdout
    out.write("k,distance,auc_mean,auc_std\n")
    for (k, d), v in sorted(table.items(), key=lambda kv: (kv[0][1], kv[0][0])):
        out.write(f"{k},{d},{np.mean(v):.6f},{np.std(v):.6f}\n")


if __name__ == "__main__":
    main()
