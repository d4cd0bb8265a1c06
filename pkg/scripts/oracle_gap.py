"""Ratio of each solver's best cut to the exhaustive optimum on small seeded graphs.

    python scripts/oracle_gap.py --nodes 14 --edges 30 --seeds 10
"""
import argparse

from qubolab.baselines import brute_force_maxcut, local_search_1flip
from qubolab.graph import build_maxcut_qubo, cut_size, generate_random_graph
from qubolab.grl import GrlConfig, train_grl
from qubolab.mcts import MctsConfig, train_mcts_gnn
from qubolab.pignn import PignnConfig, train_pignn


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--nodes", type=int, default=14)
    ap.add_argument("--edges", type=int, default=30)
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--threshold", type=float, default=0.9)
    args = ap.parse_args()

    names = ("pignn", "grl", "mcts", "local_search")
    hits = dict.fromkeys(names, 0)
    print(f"{'seed':>4} {'opt':>4} " + " ".join(f"{k:>12}" for k in names))
    for s in range(args.seeds):
        g = generate_random_graph(args.nodes, args.edges, s)
        q = build_maxcut_qubo(g)
        opt = brute_force_maxcut(g).value
        vals = {
            "pignn": train_pignn(g, PignnConfig(seed=s), q).best_value,
            "grl": train_grl(g, GrlConfig(seed=s), q).best_value,
            "mcts": train_mcts_gnn(g, MctsConfig(seed=s), q).best_value,
            "local_search": cut_size(g, local_search_1flip(g, s)),
        }
        for k, v in vals.items():
            hits[k] += v >= args.threshold * opt
        print(f"{s:>4} {opt:>4} " + " ".join(f"{vals[k]:>12}" for k in names))
    print(f"reached {args.threshold:.0%} of optimum: "
          + ", ".join(f"{k} {hits[k]}/{args.seeds}" for k in names))


if __name__ == "__main__":
    main()
