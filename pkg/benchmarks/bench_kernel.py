"""Time the stage loop on each available backend.

    python3 benchmarks/bench_kernel.py [--stages N] [--agents 2|3]

Both backends play the same trajectory; the script checks that the final
learner states agree bit for bit before reporting speeds.
"""

import argparse
import time

import numpy as np

from adcdyn.dynamics import StepSchedule
from adcdyn.engine import BACKENDS, Engine
from adcdyn.game import GameClass, GameSpec, generate_random_game


def timed(game, backend, stages, seed):
    e = Engine(game, 0.002, StepSchedule(), seed, backend=backend)
    t0 = time.perf_counter()
    e.advance(stages)
    return time.perf_counter() - t0, e


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--stages", type=int, default=20_000)
    ap.add_argument("--agents", type=int, default=2, choices=[2, 3])
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    cls = GameClass.ZERO_SUM if args.agents == 2 else GameClass.IDENTICAL_INTEREST
    game = generate_random_game(GameSpec(args.agents, 3, (3,) * args.agents, 0.8, cls), 0)

    results = {}
    for name in sorted(BACKENDS):
        dt, eng = timed(game, name, args.stages, args.seed)
        results[name] = (dt, eng)
        print(f"{name:>7}: {args.stages} stages in {dt:.3f}s "
              f"({1e6 * dt / args.stages:.3f} us/stage)")

    if len(results) == 2:
        (tc, ec), (tp, ep) = results["cython"], results["python"]
        same = all(np.array_equal(getattr(ec, f), getattr(ep, f)) for f in ("q", "mu", "pi", "v"))
        print(f"speedup: {tp / tc:.0f}x, identical states: {same}")
        # one full-length trial on the compiled path
        dt, _ = timed(game, "cython", 10**7, args.seed)
        print(f" cython: 10^7 stages in {dt:.1f}s")


if __name__ == "__main__":
    main()
