import itertools
import math

import numpy as np
import pytest

from afftalk.bn import (
    BayesNet,
    WorldSchema,
    build_network,
    fit_parameters,
    greedy_structure_fit,
)
from afftalk.hmm import HmmModel, train_bank
from afftalk.schema import ACTIONS, layered_candidates
from afftalk.world import (
    default_config,
    generate_trials,
    sample_trajectory,
    trials_to_dataset,
)


@pytest.fixture(scope="session")
def world_config():
    return default_config()


@pytest.fixture(scope="session")
def world_trials(world_config):
    """10k trials from the default generator, shared across modules."""
    return generate_trials(world_config, 10000, seed=1234)


@pytest.fixture(scope="session")
def trained_net(world_config, world_trials):
    """Structure-learned, Laplace-fitted network on the 10k-trial dataset."""
    data = trials_to_dataset(world_trials, world_config.schema)
    parents = greedy_structure_fit(
        data, world_config.schema, 3, layered_candidates(world_config.schema)
    )
    return fit_parameters(
        build_network(world_config.schema, parents), data, alpha=1.0
    )


@pytest.fixture(scope="session")
def trained_bank(world_config):
    """Gesture bank trained on 50 trajectories per action."""
    trajs = {
        a: [
            sample_trajectory(a, world_config, seed=20_000 + 1000 * i + j)
            for j in range(50)
        ]
        for i, a in enumerate(ACTIONS)
    }
    return train_bank(trajs, seed=0)


def random_binary_net(rng: np.random.Generator, n_vars: int) -> BayesNet:
    """Random DAG over binary variables with Dirichlet CPT rows."""
    order = rng.permutation(n_vars)
    pos = {v: i for i, v in enumerate(order)}
    parents = []
    for v in range(n_vars):
        earlier = [u for u in range(n_vars) if pos[u] < pos[v]]
        k = min(len(earlier), int(rng.integers(0, 4)))
        ps = sorted(rng.choice(earlier, size=k, replace=False).tolist()) if k else []
        parents.append(tuple(ps))
    schema = WorldSchema.of([(f"X{i}", ("a", "b")) for i in range(n_vars)])
    skeleton = build_network(schema, parents)
    cpts = []
    for ps in skeleton.parents:
        shape = tuple(2 for _ in ps) + (2,)
        n_rows = int(np.prod(shape[:-1], dtype=int))
        cpts.append(rng.dirichlet(np.ones(2), size=n_rows).reshape(shape))
    return BayesNet(schema, skeleton.parents, tuple(cpts))


def random_split(rng: np.random.Generator, net: BayesNet, n_obs=3, n_inf=3):
    """Random disjoint (infer names, observed evidence dict) for a net."""
    n = len(net.schema)
    names = net.schema.names
    k_obs = int(rng.integers(0, min(n_obs, n - 1) + 1))
    obs_vars = rng.choice(n, size=k_obs, replace=False).tolist()
    rest = [v for v in range(n) if v not in obs_vars]
    k_inf = int(rng.integers(1, min(n_inf, len(rest)) + 1))
    inf_vars = rng.choice(rest, size=k_inf, replace=False).tolist()
    obs = {names[v]: int(rng.integers(net.schema.arities[v])) for v in obs_vars}
    return [names[v] for v in inf_vars], obs


def permute_net(net: BayesNet, perm) -> BayesNet:
    """Same model with variables stored in a different schema order."""
    n = len(net.schema)
    new_vars = [None] * n
    for i, var in enumerate(net.schema.variables):
        new_vars[perm[i]] = var
    schema = WorldSchema(tuple(new_vars))
    parents = [None] * n
    cpts = [None] * n
    for i, ps in enumerate(net.parents):
        new_ps = [perm[p] for p in ps]
        axis_order = tuple(np.argsort(new_ps, kind="stable").tolist()) + (len(ps),)
        parents[perm[i]] = tuple(sorted(new_ps))
        cpts[perm[i]] = np.ascontiguousarray(np.transpose(net.cpts[i], axis_order))
    return BayesNet(schema, tuple(parents), tuple(cpts))


def random_left_right_model(
    rng: np.random.Generator, n_states: int, n_mix: int, dim: int, label="x"
) -> HmmModel:
    trans = np.zeros((n_states, n_states))
    for i in range(n_states - 1):
        p = rng.uniform(0.2, 0.8)
        trans[i, i] = p
        trans[i, i + 1] = 1.0 - p
    trans[n_states - 1, n_states - 1] = 1.0
    with np.errstate(divide="ignore"):
        log_trans = np.log(trans)
    return HmmModel(
        action_label=label,
        log_trans=log_trans,
        weights=rng.dirichlet(np.ones(n_mix), size=n_states),
        means=rng.normal(0.0, 1.0, (n_states, n_mix, dim)),
        variances=rng.uniform(0.5, 2.0, (n_states, n_mix, dim)),
    )


def brute_force_loglik(model: HmmModel, frames: np.ndarray) -> float:
    """Sum over every state path in the linear domain (tests only)."""
    n_states, n_mix, _ = model.means.shape
    trans = np.exp(model.log_trans)

    def emit(q, x):
        dens = 0.0
        for m in range(n_mix):
            var = model.variances[q, m]
            diff = x - model.means[q, m]
            dens += (
                model.weights[q, m]
                * math.exp(-0.5 * float(np.sum(diff * diff / var)))
                / math.sqrt(float(np.prod(2.0 * np.pi * var)))
            )
        return dens

    total = 0.0
    for path in itertools.product(range(n_states), repeat=len(frames)):
        if path[0] != 0:
            continue
        p = emit(0, frames[0])
        for t in range(1, len(frames)):
            p *= trans[path[t - 1], path[t]]
            if p == 0.0:
                break
            p *= emit(path[t], frames[t])
        total += p
    return math.log(total)
