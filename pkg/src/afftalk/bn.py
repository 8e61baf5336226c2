"""Discrete Bayesian networks: schema, CPTs, exact inference and learning.

The network is a plain DAG over finite variables.  Inference runs in the
linear probability domain with per-step factor renormalization, which is
enough headroom for desk-scale models (a few dozen variables, arities below
ten).  ``joint_enumerate`` is a deliberately naive full-joint summation used
as an independent cross-check for ``query``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

ROW_SUM_TOL = 1e-12
ENUM_CAP = 1 << 24

__all__ = [
    "BnError",
    "CycleError",
    "EvidenceError",
    "ImpossibleEvidenceError",
    "StateSpaceError",
    "Variable",
    "WorldSchema",
    "Evidence",
    "Dataset",
    "BayesNet",
    "JointTable",
    "build_network",
    "fit_parameters",
    "query",
    "joint_enumerate",
    "prune_barren",
    "greedy_structure_fit",
    "family_bic",
]


class BnError(ValueError):
    """Base class for network construction and inference errors."""


class CycleError(BnError):
    """The requested parent structure contains a directed cycle."""


class EvidenceError(BnError):
    """Evidence references an unknown variable/value or clashes with the query."""


class ImpossibleEvidenceError(BnError):
    """The observed assignment has zero probability under the model."""


class StateSpaceError(BnError):
    """The full joint is too large for exhaustive enumeration."""


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Variable:
    """A named finite variable with one label per value."""

    name: str
    labels: tuple[str, ...]

    def __post_init__(self):
        if len(self.labels) < 2:
            raise BnError(f"variable {self.name!r} needs arity >= 2")
        if len(set(self.labels)) != len(self.labels):
            raise BnError(f"variable {self.name!r} has duplicate value labels")

    @property
    def arity(self) -> int:
        return len(self.labels)


BOOL_LABELS = ("false", "true")


@dataclass(frozen=True)
class WorldSchema:
    """Ordered variable declarations shared by datasets and networks."""

    variables: tuple[Variable, ...]

    def __post_init__(self):
        names = [v.name for v in self.variables]
        if len(set(names)) != len(names):
            raise BnError("variable names must be unique")
        object.__setattr__(self, "_index", {n: i for i, n in enumerate(names)})

    @classmethod
    def of(cls, pairs: Iterable[tuple[str, Sequence[str]]]) -> "WorldSchema":
        return cls(tuple(Variable(name, tuple(labels)) for name, labels in pairs))

    def __len__(self):
        return len(self.variables)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(v.name for v in self.variables)

    @property
    def arities(self) -> tuple[int, ...]:
        return tuple(v.arity for v in self.variables)

    def index(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise EvidenceError(f"unknown variable {name!r}") from None

    def variable(self, name: str) -> Variable:
        return self.variables[self.index(name)]

    def value_index(self, name: str, label: str) -> int:
        var = self.variable(name)
        try:
            return var.labels.index(label)
        except ValueError:
            raise EvidenceError(
                f"variable {name!r} has no value {label!r} (choices: {', '.join(var.labels)})"
            ) from None

    def word_variables(self) -> tuple[str, ...]:
        """Boolean presence variables, recognized by their false/true labels."""
        return tuple(v.name for v in self.variables if v.labels == BOOL_LABELS)


@dataclass(frozen=True)
class Evidence:
    """Hard evidence: a map from variable name to a single value index."""

    assignments: Mapping[str, int]

    @classmethod
    def empty(cls) -> "Evidence":
        return cls({})

    @classmethod
    def from_labels(cls, schema: WorldSchema, labeled: Mapping[str, str]) -> "Evidence":
        return cls({name: schema.value_index(name, lab) for name, lab in labeled.items()})

    def validate(self, schema: WorldSchema) -> None:
        for name, value in self.assignments.items():
            var = schema.variable(name)
            if not 0 <= int(value) < var.arity:
                raise EvidenceError(
                    f"value index {value} out of range for variable {name!r}"
                )

    def __contains__(self, name: str) -> bool:
        return name in self.assignments

    def items(self):
        return self.assignments.items()

    def __len__(self):
        return len(self.assignments)


@dataclass(frozen=True)
class Dataset:
    """Complete assignments over all schema variables, one row per trial."""

    rows: np.ndarray
    provenance: str = ""

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=np.int64)
        rows.setflags(write=False)
        object.__setattr__(self, "rows", rows)

    def validate(self, schema: WorldSchema) -> None:
        if self.rows.ndim != 2 or self.rows.shape[1] != len(schema):
            raise BnError("dataset rows must cover every schema variable")
        arities = np.asarray(schema.arities)
        if (self.rows < 0).any() or (self.rows >= arities[None, :]).any():
            raise BnError("dataset contains out-of-range value indices")

    def __len__(self):
        return len(self.rows)


@dataclass(frozen=True)
class BayesNet:
    """Immutable network: schema, per-variable parent indices, CPT arrays.

    ``cpts[i]`` has one axis per parent (ascending schema order) plus a last
    axis over the variable's own values; every row along that last axis is a
    distribution.
    """

    schema: WorldSchema
    parents: tuple[tuple[int, ...], ...]
    cpts: tuple[np.ndarray, ...]

    def __post_init__(self):
        object.__setattr__(self, "cpts", tuple(_readonly(c) for c in self.cpts))
        self._validate()

    def _validate(self) -> None:
        n = len(self.schema)
        if len(self.parents) != n or len(self.cpts) != n:
            raise BnError("parents and cpts must match the schema length")
        arities = self.schema.arities
        for i, (ps, cpt) in enumerate(zip(self.parents, self.cpts)):
            if list(ps) != sorted(set(ps)):
                raise BnError(f"parents of {self.schema.names[i]!r} must be sorted and unique")
            if any(p < 0 or p >= n for p in ps):
                raise BnError(f"parent index out of range for {self.schema.names[i]!r}")
            if i in ps:
                raise CycleError(f"{self.schema.names[i]!r} cannot be its own parent")
            expected = tuple(arities[p] for p in ps) + (arities[i],)
            if cpt.shape != expected:
                raise BnError(
                    f"cpt shape {cpt.shape} for {self.schema.names[i]!r}, expected {expected}"
                )
            if (cpt < 0).any():
                raise BnError(f"negative probability in cpt of {self.schema.names[i]!r}")
            if not np.allclose(cpt.sum(axis=-1), 1.0, rtol=0.0, atol=ROW_SUM_TOL):
                raise BnError(f"cpt rows of {self.schema.names[i]!r} must sum to 1")
        _toposort(self.parents)

    def parent_names(self, name: str) -> tuple[str, ...]:
        return tuple(self.schema.names[p] for p in self.parents[self.schema.index(name)])


def _toposort(parents: Sequence[Sequence[int]]) -> list[int]:
    n = len(parents)
    children: list[list[int]] = [[] for _ in range(n)]
    indeg = [0] * n
    for i, ps in enumerate(parents):
        indeg[i] = len(ps)
        for p in ps:
            children[p].append(i)
    ready = [i for i in range(n) if indeg[i] == 0]
    order: list[int] = []
    while ready:
        v = ready.pop()
        order.append(v)
        for c in children[v]:
            indeg[c] -= 1
            if indeg[c] == 0:
                ready.append(c)
    if len(order) != n:
        raise CycleError("parent structure contains a cycle")
    return order


def build_network(schema: WorldSchema, parents: Sequence[Sequence[int]]) -> BayesNet:
    """Network with the given structure and uniform CPTs.

    Parent lists are canonicalized to ascending schema order; duplicates are
    rejected and cycles raise ``CycleError``.
    """
    n = len(schema)
    if len(parents) != n:
        raise BnError("need one parent list per schema variable")
    canon = []
    for i, ps in enumerate(parents):
        ps = [int(p) for p in ps]
        if any(p < 0 or p >= n for p in ps):
            raise BnError(f"parent index out of range for {schema.names[i]!r}")
        if len(set(ps)) != len(ps):
            raise BnError(f"duplicate parent for {schema.names[i]!r}")
        canon.append(tuple(sorted(ps)))
    _toposort(canon)
    arities = schema.arities
    cpts = []
    for i, ps in enumerate(canon):
        shape = tuple(arities[p] for p in ps) + (arities[i],)
        cpts.append(np.full(shape, 1.0 / arities[i]))
    return BayesNet(schema=schema, parents=tuple(canon), cpts=tuple(cpts))


def fit_parameters(net: BayesNet, data: Dataset, alpha: float = 1.0) -> BayesNet:
    """Re-estimate every CPT from complete rows with additive smoothing.

    Each cell becomes (count + alpha) / (rows matching the parent config +
    alpha * arity).  With alpha = 0 an unobserved parent configuration has no
    defined row and raises.
    """
    if alpha < 0:
        raise BnError("alpha must be >= 0")
    data.validate(net.schema)
    rows = data.rows
    arities = net.schema.arities
    cpts = []
    for i, ps in enumerate(net.parents):
        shape = tuple(arities[p] for p in ps) + (arities[i],)
        counts = np.zeros(shape)
        index = tuple(rows[:, p] for p in ps) + (rows[:, i],)
        np.add.at(counts, index, 1.0)
        totals = counts.sum(axis=-1, keepdims=True)
        if alpha == 0.0 and (totals == 0).any():
            raise BnError(
                f"unobserved parent configuration for {net.schema.names[i]!r}; "
                "use alpha > 0"
            )
        cpts.append((counts + alpha) / (totals + alpha * arities[i]))
    return BayesNet(schema=net.schema, parents=net.parents, cpts=tuple(cpts))


@dataclass(frozen=True)
class JointTable:
    """A normalized joint distribution over a few named variables."""

    variables: tuple[str, ...]
    labels: tuple[tuple[str, ...], ...]
    probs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "probs", _readonly(self.probs))

    def axis(self, name: str) -> int:
        return self.variables.index(name)

    def vector(self) -> np.ndarray:
        if len(self.variables) != 1:
            raise BnError("vector() needs a single-variable table")
        return self.probs

    def marginal(self, names: Sequence[str]) -> "JointTable":
        keep = [self.axis(n) for n in names]
        drop = tuple(a for a in range(self.probs.ndim) if a not in keep)
        summed = self.probs.sum(axis=drop) if drop else self.probs
        # sum() keeps the remaining axes in original order; reorder to request
        remaining = [a for a in range(self.probs.ndim) if a not in drop]
        perm = [remaining.index(a) for a in keep]
        return JointTable(
            variables=tuple(names),
            labels=tuple(self.labels[a] for a in keep),
            probs=np.ascontiguousarray(np.transpose(summed, perm)),
        )

    def prob(self, assignment: Mapping[str, str]) -> float:
        """Probability of a full labeled assignment of this table's variables."""
        idx = []
        for name, labs in zip(self.variables, self.labels):
            idx.append(labs.index(assignment[name]))
        return float(self.probs[tuple(idx)])

    def iter_cells(self):
        """Yield (label tuple, probability) in row-major order."""
        for idx in np.ndindex(*self.probs.shape):
            yield tuple(self.labels[a][i] for a, i in enumerate(idx)), float(self.probs[idx])


@dataclass
class _Factor:
    vars: tuple[int, ...]  # ascending schema indices
    table: np.ndarray

    @classmethod
    def from_axes(cls, axis_vars: Sequence[int], table: np.ndarray) -> "_Factor":
        order = np.argsort(axis_vars, kind="stable")
        return cls(
            vars=tuple(axis_vars[k] for k in order),
            table=np.ascontiguousarray(np.transpose(table, order)),
        )


def _product(factors: list[_Factor], arities: Sequence[int]) -> _Factor:
    union: list[int] = sorted({v for f in factors for v in f.vars})
    out = np.ones(tuple(arities[v] for v in union))
    for f in factors:
        shape = tuple(arities[v] if v in set(f.vars) else 1 for v in union)
        out = out * f.table.reshape(shape)
    return _Factor(vars=tuple(union), table=out)


def _validated_query(net: BayesNet, infer_vars: Sequence[str], obs: Evidence):
    if not infer_vars:
        raise BnError("infer_vars must be nonempty")
    infer_idx = [net.schema.index(v) for v in infer_vars]
    if len(set(infer_idx)) != len(infer_idx):
        raise BnError("infer_vars contains duplicates")
    obs.validate(net.schema)
    obs_idx = {net.schema.index(n): int(v) for n, v in obs.items()}
    overlap = set(infer_idx) & set(obs_idx)
    if overlap:
        names = ", ".join(net.schema.names[i] for i in sorted(overlap))
        raise EvidenceError(f"inference variables also observed: {names}")
    return infer_idx, obs_idx


def _reduced_factors(net: BayesNet, obs_idx: Mapping[int, int]) -> list[_Factor]:
    factors = []
    for i, ps in enumerate(net.parents):
        axis_vars = list(ps) + [i]
        slicer = tuple(obs_idx.get(v, slice(None)) for v in axis_vars)
        table = net.cpts[i][slicer]
        remaining = [v for v in axis_vars if v not in obs_idx]
        factors.append(_Factor.from_axes(remaining, np.asarray(table)))
    return factors


def _finish(table: np.ndarray, order_idx, caller_idx, schema) -> JointTable:
    z = float(table.sum())
    if z <= 0.0:
        raise ImpossibleEvidenceError("observed evidence has zero probability")
    probs = table / z
    perm = [order_idx.index(v) for v in caller_idx]
    probs = np.ascontiguousarray(np.transpose(probs, perm))
    return JointTable(
        variables=tuple(schema.names[v] for v in caller_idx),
        labels=tuple(schema.variables[v].labels for v in caller_idx),
        probs=probs,
    )


def query(net: BayesNet, infer_vars: Sequence[str], obs: Evidence) -> JointTable:
    """Exact conditional P(infer_vars | obs) by variable elimination.

    Latent variables are eliminated in min-degree order with ties broken by
    schema position, so results are deterministic.  Evidence with zero
    probability raises ``ImpossibleEvidenceError`` rather than returning a
    silent uniform.
    """
    infer_idx, obs_idx = _validated_query(net, infer_vars, obs)
    arities = net.schema.arities
    factors = _reduced_factors(net, obs_idx)
    latents = {
        v for v in range(len(net.schema)) if v not in infer_idx and v not in obs_idx
    }
    while latents:
        degree = {}
        for v in latents:
            scope: set[int] = set()
            for f in factors:
                if v in f.vars:
                    scope.update(f.vars)
            degree[v] = len(scope) - 1
        target = min(latents, key=lambda v: (degree[v], v))
        involved = [f for f in factors if target in f.vars]
        rest = [f for f in factors if target not in f.vars]
        prod = _product(involved, arities)
        summed = prod.table.sum(axis=prod.vars.index(target))
        peak = summed.max() if summed.size else 0.0
        if peak <= 0.0:
            raise ImpossibleEvidenceError("observed evidence has zero probability")
        # per-step renormalization: only the final conditional is reported,
        # so dividing by the peak costs nothing and avoids underflow
        rest.append(_Factor(tuple(v for v in prod.vars if v != target), summed / peak))
        factors = rest
        latents.remove(target)
    result = _product(factors, arities)
    return _finish(result.table, list(result.vars), infer_idx, net.schema)


def joint_enumerate(
    net: BayesNet,
    infer_vars: Sequence[str],
    obs: Evidence,
    cap: int = ENUM_CAP,
) -> JointTable:
    """Same contract as ``query`` via exhaustive summation of the full joint.

    Materializes the complete joint array, so the total state space must stay
    under ``cap`` states.  Useful only as an oracle and for small models.
    """
    infer_idx, obs_idx = _validated_query(net, infer_vars, obs)
    arities = net.schema.arities
    total = 1
    for a in arities:
        total *= a
        if total > cap:
            raise StateSpaceError(
                f"joint state space exceeds cap of {cap} states"
            )
    joint = np.ones(arities)
    n = len(net.schema)
    for i, ps in enumerate(net.parents):
        axis_vars = list(ps) + [i]
        f = _Factor.from_axes(axis_vars, net.cpts[i])
        shape = tuple(arities[v] if v in set(f.vars) else 1 for v in range(n))
        joint *= f.table.reshape(shape)
    slicer = tuple(obs_idx.get(v, slice(None)) for v in range(n))
    reduced = joint[slicer]
    remaining = [v for v in range(n) if v not in obs_idx]
    drop = tuple(k for k, v in enumerate(remaining) if v not in infer_idx)
    summed = reduced.sum(axis=drop) if drop else reduced
    kept = [v for v in remaining if v in infer_idx]
    return _finish(summed, kept, infer_idx, net.schema)


def prune_barren(net: BayesNet, keep_vars: Sequence[str]) -> BayesNet:
    """Drop variables that are neither kept nor ancestors of kept variables.

    An unobserved leaf sums to one over its own CPT row, so removing it leaves
    the joint over the remaining variables unchanged; applying that rule
    repeatedly keeps exactly the ancestral closure.  Handy for shrinking a
    model below the enumeration cap before cross-checking inference.
    """
    keep_idx = {net.schema.index(v) for v in keep_vars}
    needed: set[int] = set()
    stack = list(keep_idx)
    while stack:
        v = stack.pop()
        if v in needed:
            continue
        needed.add(v)
        stack.extend(net.parents[v])
    order = sorted(needed)
    remap = {v: k for k, v in enumerate(order)}
    schema = WorldSchema(tuple(net.schema.variables[v] for v in order))
    parents = tuple(tuple(remap[p] for p in net.parents[v]) for v in order)
    cpts = tuple(net.cpts[v] for v in order)
    return BayesNet(schema=schema, parents=parents, cpts=cpts)


def _family_loglik(rows: np.ndarray, arities, node: int, parents: Sequence[int]) -> float:
    shape = tuple(arities[p] for p in parents) + (arities[node],)
    counts = np.zeros(shape)
    index = tuple(rows[:, p] for p in parents) + (rows[:, node],)
    np.add.at(counts, index, 1.0)
    totals = counts.sum(axis=-1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(counts > 0, counts * np.log(counts / totals), 0.0)
    return float(terms.sum())


def family_bic(
    data: Dataset, schema: WorldSchema, node: int, parents: Sequence[int]
) -> float:
    """BIC score of one node given a parent set (maximum-likelihood fit)."""
    rows = data.rows
    arities = schema.arities
    n = len(rows)
    q = 1
    for p in parents:
        q *= arities[p]
    penalty = 0.5 * math.log(max(n, 1)) * q * (arities[node] - 1)
    return _family_loglik(rows, arities, node, parents) - penalty


def greedy_structure_fit(
    data: Dataset,
    schema: WorldSchema,
    max_parents: int,
    candidate_parents: Sequence[Iterable[int]],
) -> tuple[tuple[int, ...], ...]:
    """Per-node greedy forward selection of parents under BIC.

    Candidates are scanned in schema order, so ties resolve to the earliest
    variable.  The caller's candidate sets must be layered (no variable may be
    a candidate of its own ancestors); the assembled structure is verified to
    be acyclic before it is returned.
    """
    if max_parents < 0:
        raise BnError("max_parents must be >= 0")
    data.validate(schema)
    if len(candidate_parents) != len(schema):
        raise BnError("need one candidate set per schema variable")
    result: list[tuple[int, ...]] = []
    for node in range(len(schema)):
        candidates = sorted(set(int(c) for c in candidate_parents[node]))
        if node in candidates:
            raise BnError(f"{schema.names[node]!r} cannot be its own candidate parent")
        chosen: list[int] = []
        best = family_bic(data, schema, node, ())
        while len(chosen) < max_parents:
            best_gain_parent = None
            best_score = best
            for c in candidates:
                if c in chosen:
                    continue
                score = family_bic(data, schema, node, sorted(chosen + [c]))
                if score > best_score:
                    best_score = score
                    best_gain_parent = c
            if best_gain_parent is None:
                break
            chosen.append(best_gain_parent)
            best = best_score
        result.append(tuple(sorted(chosen)))
    _toposort(result)
    return tuple(result)
