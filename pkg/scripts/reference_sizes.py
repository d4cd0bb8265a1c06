"""Run the published instance sizes through PI-GNN, GRL and MCTS-GNN and print a comparison.

Instances are seeded random graphs of the published (nodes, edges) sizes, not the
original graphs, so only the direction of the gaps is comparable with the reference.

    python scripts/reference_sizes.py --max-nodes 100 --seeds 0 1 2 --out runs/reference
"""
import argparse
from pathlib import Path

from qubolab.cli import ExperimentConfig, format_table, improvement, run_bench

# (nodes, edges) -> reference best values (PI-GNN, GRL, MCTS-GNN)
REFERENCE = {
    (50, 89): (72, 75, 76), (50, 139): (95, 105, 107), (50, 499): (276, 301, 314),
    (100, 199): (147, 155, 167), (100, 799): (373, 534, 537),
    (300, 399): (342, 360, 365), (300, 899): (613, 690, 699), (300, 1299): (747, 932, 947),
    (500, 799): (622, 672, 694), (500, 1499): (1007, 1143, 1158), (500, 5499): (2689, 3414, 3535),
    (700, 1199): (938, 979, 1023), (700, 1699): (1288, 1308, 1360), (700, 4699): (2422, 2992, 3202),
    (1000, 1299): (1104, 1112, 1141), (1000, 3299): (2204, 2449, 2525),
    (1000, 5299): (3098, 3716, 3750),
    (3000, 3499): (2956, 3218, 2996), (3000, 4499): (3627, 3907, 3885),
    (3000, 6999): (4841, 5550, 5622),
}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--max-nodes", type=int, default=100)
    ap.add_argument("--seeds", type=int, nargs="+", default=[0])
    ap.add_argument("--solvers", nargs="+", default=["pignn", "grl", "mcts"])
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--out", default="runs/reference")
    args = ap.parse_args()

    sizes = [nm for nm in REFERENCE if nm[0] <= args.max_nodes]
    for seed in args.seeds:
        cfg = ExperimentConfig(instances=[(n, m, seed) for n, m in sizes], solvers=args.solvers,
                               overrides={}, out=Path(args.out) / f"seed{seed}", seed=seed)
        cfg.validate()
        rows = run_bench(cfg, args.jobs)
        print(f"# seed {seed}")
        print(format_table(rows, args.solvers))
        print("# reference values for the same sizes")
        for n, m in sizes:
            ref = REFERENCE[(n, m)]
            gains = [improvement(v, ref[0]) for v in ref[1:]]
            print(f"{n:>5} {m:>5}  pignn {ref[0]:>5}  grl {ref[1]:>5}  mcts {ref[2]:>5}  "
                  f"grl {gains[0]:+.2f}%  mcts {gains[1]:+.2f}%")


if __name__ == "__main__":
    main()
