"""PI-GNN best value and stopping epoch under strict and fuzzy early stopping.

    python scripts/fuzzy_vs_strict.py --nodes 50 --edges 499 --seeds 10 --out runs/stopping.csv
"""
import argparse
import csv
import sys

from qubolab.graph import build_maxcut_qubo, generate_random_graph
from qubolab.pignn import PignnConfig, train_pignn


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--nodes", type=int, default=50)
    ap.add_argument("--edges", type=int, default=499)
    ap.add_argument("--instance-seed", type=int, default=0)
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--patience", type=int, default=100)
    ap.add_argument("--tol", type=float, default=1e-4)
    ap.add_argument("--out", help="CSV path (default: stdout)")
    args = ap.parse_args()

    g = generate_random_graph(args.nodes, args.edges, args.instance_seed)
    q = build_maxcut_qubo(g)
    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["seed", "mode", "best", "epochs", "stop_reason", "seconds"])
    wins = 0
    for seed in range(args.seeds):
        best = {}
        for mode in ("strict", "fuzzy"):
            cfg = PignnConfig(seed=seed, stop_mode=mode, patience=args.patience, tol=args.tol)
            r = train_pignn(g, cfg, q)
            best[mode] = r.best_value
            w.writerow([seed, mode, r.best_value, r.epochs, r.stop_reason, f"{r.seconds:.2f}"])
            fh.flush()
        wins += best["fuzzy"] >= best["strict"]
    print(f"fuzzy >= strict on {wins}/{args.seeds} seeds", file=sys.stderr)
    if args.out:
        fh.close()


if __name__ == "__main__":
    main()
