"""Convert raw LINQS citation files (cora.content / cora.cites) to the package dataset layout."""
import argparse
from pathlib import Path

from vgod.graph import DatasetBundle, OutlierGroundTruth, load_linqs_citation, save_bundle


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("raw", help="directory holding <name>.content and <name>.cites")
    ap.add_argument("out")
    args = ap.parse_args()
    raw = Path(args.raw)
    content, cites = next(raw.glob("*.content")), next(raw.glob("*.cites"))
    g = load_linqs_citation(content, cites)
    save_bundle(DatasetBundle(g, OutlierGroundTruth(), {"source": str(raw)}), args.out)
    print(f"n={g.n} m={g.m} d={g.d} dropped_edges={g.dropped_edges} -> {args.out}")


if __name__ == "__main__":
    main()
