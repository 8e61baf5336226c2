"""Compare the numba and numpy kernel backends on training-sized workloads.

Backend selection happens at import time, so the script re-runs itself in a
subprocess per backend (setting AFFTALK_NO_NUMBA for the numpy case) and
reports wall time for the raw kernels and for full gesture-bank training.

    python3 benchmarks/bench_kernels.py
"""

import argparse
import os
import subprocess
import sys
import time

import numpy as np


def _measure(repeats: int, trajectories: int) -> None:
    from afftalk import kernels
    from afftalk.hmm import train_bank
    from afftalk.schema import ACTIONS
    from afftalk.world import default_config, sample_trajectory

    config = default_config()
    trajs = {
        a: [sample_trajectory(a, config, seed=1000 * i + j) for j in range(trajectories)]
        for i, a in enumerate(ACTIONS)
    }
    flat = [t for ts in trajs.values() for t in ts]

    rng = np.random.default_rng(0)
    n_states, n_mix, dim = 4, 2, 3
    trans = np.zeros((n_states, n_states))
    for i in range(n_states - 1):
        trans[i, i] = 0.8
        trans[i, i + 1] = 0.2
    trans[-1, -1] = 1.0
    with np.errstate(divide="ignore"):
        log_trans = np.log(trans)
    log_w = np.log(rng.dirichlet(np.ones(n_mix), size=n_states))
    means = rng.normal(0, 0.5, (n_states, n_mix, dim))
    variances = rng.uniform(0.01, 0.1, (n_states, n_mix, dim))

    # warm-up triggers jit compilation so it is not billed to the loop
    frames = flat[0].frames
    _, log_b = kernels.gmm_obs_logprob(frames, log_w, means, variances)
    la = kernels.log_forward(log_trans, log_b)
    lb = kernels.log_backward(log_trans, log_b)
    kernels.transition_xi_sum(
        log_trans, log_b, la, lb, float(np.logaddexp.reduce(la[-1]))
    )

    started = time.perf_counter()
    for _ in range(repeats):
        for traj in flat:
            _, log_b = kernels.gmm_obs_logprob(traj.frames, log_w, means, variances)
            la = kernels.log_forward(log_trans, log_b)
            lb = kernels.log_backward(log_trans, log_b)
            ll = float(np.logaddexp.reduce(la[-1]))
            kernels.transition_xi_sum(log_trans, log_b, la, lb, ll)
    kernel_seconds = time.perf_counter() - started

    started = time.perf_counter()
    train_bank(trajs, seed=0)
    train_seconds = time.perf_counter() - started

    passes = repeats * len(flat)
    print(
        f"{kernels.backend():>6}: {passes} forward/backward passes in "
        f"{kernel_seconds:.3f}s ({1e6 * kernel_seconds / passes:.1f} us/pass), "
        f"full bank training {train_seconds:.3f}s"
    )


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=50)
    parser.add_argument("--trajectories", type=int, default=20, help="per action")
    parser.add_argument("--backend", choices=("numba", "numpy"), help=argparse.SUPPRESS)
    args = parser.parse_args()
    if args.backend:
        _measure(args.repeats, args.trajectories)
        return 0
    print(
        f"timing {3 * args.trajectories} trajectories, {args.repeats} kernel repeats",
        flush=True,
    )
    for backend in ("numba", "numpy"):
        env = dict(os.environ)
        if backend == "numpy":
            env["AFFTALK_NO_NUMBA"] = "1"
        else:
            env.pop("AFFTALK_NO_NUMBA", None)
        subprocess.run(
            [
                sys.executable,
                os.path.abspath(__file__),
                "--backend",
                backend,
                "--repeats",
                str(args.repeats),
                "--trajectories",
                str(args.trajectories),
            ],
            env=env,
            check=True,
        )
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
