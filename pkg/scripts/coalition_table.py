"""What each coalition of receivers can recover.

For classical sharing: per-bit decoding success of every receiver subset,
simulated and exact. For quantum sharing: mean reconstruction fidelity of
every subset that contains the qubit holder.

    python scripts/coalition_table.py --receivers 3 --bits 10000 --ssqi-trials 2000
"""

import argparse
import itertools
import sys

import numpy as np

from mqss import oracle, ssqi
from mqss.qsscm import GuessRule, ProtocolConfig, decode_partial, run_protocol
from mqss.rng import derive_rng


def subsets(n: int):
    for size in range(1, n + 1):
        yield from itertools.combinations(range(n), size)


def classical_rows(n: int, bits: int, seed: int):
    cfg = ProtocolConfig(n, int(np.ceil(bits / 0.8)) + 1, master_seed=seed)
    out = run_protocol(cfg, [])
    pos, truth = out.stored_positions[:bits], out.payload[:bits]
    for coalition in subsets(n):
        for rule in GuessRule:
            guess = decode_partial(out.batch, pos, out.batch.knowledge(coalition), derive_rng(seed, 0, f"guess{coalition}"), rule)
            yield coalition, rule.value, float(np.mean(guess == truth)), oracle.partial_decode_success(n, coalition, rule.value)


def quantum_rows(n: int, trials: int, seed: int):
    cfg = ProtocolConfig(n, 40, master_seed=seed)
    for coalition in subsets(n):
        if 0 not in coalition:
            continue
        f = [
            ssqi.run_ssqi(cfg, ssqi.UnknownQubit.random(derive_rng(seed, t, "input")), coalition=coalition, trial=t).fidelity
            for t in range(trials)
        ]
        yield coalition, float(np.mean(f)), float(np.std(f, ddof=1)) / np.sqrt(trials), ssqi.predicted_fidelity(n, coalition)


def names(coalition) -> str:
    return "+".join(f"r{k}" for k in coalition)


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--receivers", type=int, default=3)
    p.add_argument("--bits", type=int, default=10000)
    p.add_argument("--ssqi-trials", type=int, default=2000)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args(argv)

    print(f"classical sharing, {args.receivers} receivers, {args.bits} bits")
    print(f"{'coalition':<18}{'rule':<12}{'simulated':>10}{'exact':>10}")
    for coalition, rule, rate, exact in classical_rows(args.receivers, args.bits, args.seed):
        print(f"{names(coalition):<18}{rule:<12}{rate:>10.4f}{exact:>10.4f}")

    if args.receivers >= 3:
        print(f"\nquantum sharing, {args.receivers} receivers, {args.ssqi_trials} random inputs")
        print(f"{'coalition':<18}{'mean F':>10}{'stderr':>10}{'exact':>10}")
        for coalition, mean, err, exact in quantum_rows(args.receivers, args.ssqi_trials, args.seed):
            print(f"{names(coalition):<18}{mean:>10.4f}{err:>10.4f}{exact:>10.4f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
