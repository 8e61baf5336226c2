"""Versioned text formats for models, datasets and trajectories.

Models are stored as line-oriented documents with a magic header and 17
significant digits per float, which round-trips IEEE doubles exactly.
Datasets use one record per line with ``name=label`` fields so they stay
greppable; trajectories are small CSV files with a ``t,x,y,z`` header.
"""

from __future__ import annotations

import os
from pathlib import Path
from typing import Sequence

import numpy as np

from .bn import BayesNet, Dataset, Variable, WorldSchema
from .hmm import GestureBank, HmmModel, Trajectory
from .world import Trial

MODEL_MAGIC = "afftalk-model"
DATASET_MAGIC = "afftalk-dataset"
FORMAT_VERSION = 1

__all__ = [
    "SerializeError",
    "save_bayesnet",
    "load_bayesnet",
    "save_gesture_bank",
    "load_gesture_bank",
    "save_trajectory",
    "load_trajectory",
    "write_dataset",
    "read_dataset",
]


class SerializeError(ValueError):
    """Malformed or mismatching model/dataset file."""


def _fmt(x: float) -> str:
    return format(x, ".17g")


def _check_header(line: str, kind: str, path) -> None:
    parts = line.split()
    if len(parts) != 3 or parts[0] != MODEL_MAGIC or parts[2] != kind:
        raise SerializeError(f"{path}: expected '{MODEL_MAGIC} <version> {kind}' header")
    if int(parts[1]) != FORMAT_VERSION:
        raise SerializeError(f"{path}: unsupported format version {parts[1]}")


def save_bayesnet(path, net: BayesNet) -> None:
    lines = [f"{MODEL_MAGIC} {FORMAT_VERSION} bayesnet"]
    lines.append(f"variables {len(net.schema)}")
    for var in net.schema.variables:
        lines.append("var " + " ".join((var.name,) + var.labels))
    names = net.schema.names
    for i, ps in enumerate(net.parents):
        lines.append("parents " + " ".join((names[i],) + tuple(names[p] for p in ps)))
    for i, cpt in enumerate(net.cpts):
        rows = cpt.reshape(-1, cpt.shape[-1])
        lines.append(f"cpt {names[i]} {rows.shape[0]} {rows.shape[1]}")
        for row in rows:
            lines.append(" ".join(_fmt(v) for v in row))
    lines.append("end")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_bayesnet(path) -> BayesNet:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines:
        raise SerializeError(f"{path}: empty file")
    _check_header(lines[0], "bayesnet", path)
    pos = 1

    def next_line() -> str:
        nonlocal pos
        if pos >= len(lines):
            raise SerializeError(f"{path}: truncated file")
        line = lines[pos]
        pos += 1
        return line

    head = next_line().split()
    if head[0] != "variables":
        raise SerializeError(f"{path}: expected 'variables' line")
    n = int(head[1])
    variables = []
    for _ in range(n):
        parts = next_line().split()
        if parts[0] != "var" or len(parts) < 4:
            raise SerializeError(f"{path}: bad variable line")
        variables.append(Variable(parts[1], tuple(parts[2:])))
    schema = WorldSchema(tuple(variables))
    parents = []
    for i in range(n):
        parts = next_line().split()
        if parts[0] != "parents" or parts[1] != schema.names[i]:
            raise SerializeError(f"{path}: bad parents line for {schema.names[i]!r}")
        parents.append(tuple(schema.index(p) for p in parts[2:]))
    cpts = []
    arities = schema.arities
    for i in range(n):
        parts = next_line().split()
        if parts[0] != "cpt" or parts[1] != schema.names[i]:
            raise SerializeError(f"{path}: bad cpt line for {schema.names[i]!r}")
        n_rows, arity = int(parts[2]), int(parts[3])
        rows = [
            np.array([float(v) for v in next_line().split()]) for _ in range(n_rows)
        ]
        table = np.stack(rows, axis=0)
        if table.shape != (n_rows, arity):
            raise SerializeError(f"{path}: cpt rows for {schema.names[i]!r} malformed")
        shape = tuple(arities[p] for p in parents[i]) + (arities[i],)
        cpts.append(table.reshape(shape))
    if next_line().strip() != "end":
        raise SerializeError(f"{path}: missing 'end' marker")
    return BayesNet(schema=schema, parents=tuple(parents), cpts=tuple(cpts))


def save_gesture_bank(path, bank: GestureBank) -> None:
    lines = [f"{MODEL_MAGIC} {FORMAT_VERSION} gesturebank"]
    lines.append(f"models {len(bank.models)}")
    for m in bank.models:
        lines.append(f"model {m.action_label} {m.n_states} {m.n_mixtures} {m.dim}")
        trans = np.exp(m.log_trans)
        for q in range(m.n_states):
            lines.append(f"trans {q} " + " ".join(_fmt(v) for v in trans[q]))
        for q in range(m.n_states):
            lines.append(f"mix {q} " + " ".join(_fmt(v) for v in m.weights[q]))
            for c in range(m.n_mixtures):
                lines.append(f"mean {q} {c} " + " ".join(_fmt(v) for v in m.means[q, c]))
                lines.append(f"var {q} {c} " + " ".join(_fmt(v) for v in m.variances[q, c]))
    lines.append("end")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_gesture_bank(path) -> GestureBank:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines:
        raise SerializeError(f"{path}: empty file")
    _check_header(lines[0], "gesturebank", path)
    pos = 1

    def next_line() -> str:
        nonlocal pos
        if pos >= len(lines):
            raise SerializeError(f"{path}: truncated file")
        line = lines[pos]
        pos += 1
        return line

    head = next_line().split()
    if head[0] != "models":
        raise SerializeError(f"{path}: expected 'models' line")
    models = []
    for _ in range(int(head[1])):
        parts = next_line().split()
        if parts[0] != "model" or len(parts) != 5:
            raise SerializeError(f"{path}: bad model line")
        label = parts[1]
        n_states, n_mix, dim = int(parts[2]), int(parts[3]), int(parts[4])
        trans = np.zeros((n_states, n_states))
        for q in range(n_states):
            parts = next_line().split()
            if parts[0] != "trans" or int(parts[1]) != q:
                raise SerializeError(f"{path}: bad trans line in model {label!r}")
            trans[q] = [float(v) for v in parts[2:]]
        weights = np.zeros((n_states, n_mix))
        means = np.zeros((n_states, n_mix, dim))
        variances = np.zeros((n_states, n_mix, dim))
        for q in range(n_states):
            parts = next_line().split()
            if parts[0] != "mix" or int(parts[1]) != q:
                raise SerializeError(f"{path}: bad mix line in model {label!r}")
            weights[q] = [float(v) for v in parts[2:]]
            for c in range(n_mix):
                parts = next_line().split()
                if parts[0] != "mean":
                    raise SerializeError(f"{path}: bad mean line in model {label!r}")
                means[q, c] = [float(v) for v in parts[3:]]
                parts = next_line().split()
                if parts[0] != "var":
                    raise SerializeError(f"{path}: bad var line in model {label!r}")
                variances[q, c] = [float(v) for v in parts[3:]]
        with np.errstate(divide="ignore"):
            log_trans = np.log(trans)
        models.append(
            HmmModel(
                action_label=label,
                log_trans=log_trans,
                weights=weights,
                means=means,
                variances=variances,
            )
        )
    if next_line().strip() != "end":
        raise SerializeError(f"{path}: missing 'end' marker")
    return GestureBank(models=tuple(models))


def save_trajectory(path, traj: Trajectory) -> None:
    header = "t," + ",".join("xyz"[d] if traj.dim <= 3 else f"d{d}" for d in range(traj.dim))
    lines = [header]
    for i, frame in enumerate(traj.frames):
        t = i * traj.frame_period
        lines.append(",".join([_fmt(t)] + [_fmt(v) for v in frame]))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_trajectory(path) -> Trajectory:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if len(lines) < 2:
        raise SerializeError(f"{path}: trajectory needs a header and one frame")
    rows = []
    times = []
    for line in lines[1:]:
        values = [float(v) for v in line.split(",")]
        times.append(values[0])
        rows.append(values[1:])
    frames = np.asarray(rows)
    period = times[1] - times[0] if len(times) > 1 else 1.0 / 30.0
    if period <= 0:
        raise SerializeError(f"{path}: non-increasing time column")
    return Trajectory(frames=frames, frame_period=period)


def write_dataset(directory, trials: Sequence[Trial], schema: WorldSchema, provenance: str = "") -> None:
    """Write ``trials.txt`` plus one trajectory CSV per trial that has one."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    traj_dir = directory / "traj"
    records = [f"# {DATASET_MAGIC} {FORMAT_VERSION}"]
    if provenance:
        records.append(f"# provenance: {provenance}")
    for i, trial in enumerate(trials):
        row = trial.to_row(schema)
        fields = [f"trial={i:05d}"]
        for j, var in enumerate(schema.variables):
            fields.append(f"{var.name}={var.labels[row[j]]}")
        if trial.trajectory is not None:
            rel = f"traj/{i:05d}.csv"
            traj_dir.mkdir(parents=True, exist_ok=True)
            save_trajectory(directory / rel, trial.trajectory)
            fields.append(f"traj={rel}")
        records.append(" ".join(fields))
    (directory / "trials.txt").write_text("\n".join(records) + "\n", encoding="utf-8")


def read_dataset(directory, schema: WorldSchema) -> tuple[Dataset, dict[int, str]]:
    """Rows as value indices plus the trajectory paths keyed by row number."""
    directory = Path(directory)
    path = directory / "trials.txt"
    if not path.exists():
        raise FileNotFoundError(f"no trials.txt under {directory}")
    rows = []
    traj_paths: dict[int, str] = {}
    provenance = ""
    for line in path.read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            if "provenance:" in line:
                provenance = line.split("provenance:", 1)[1].strip()
            continue
        values = {}
        traj = None
        for token in line.split():
            if "=" not in token:
                raise SerializeError(f"{path}: malformed field {token!r}")
            key, value = token.split("=", 1)
            if key == "trial":
                continue
            if key == "traj":
                traj = value
                continue
            values[key] = value
        row = []
        for var in schema.variables:
            if var.name not in values:
                raise SerializeError(f"{path}: record is missing variable {var.name!r}")
            row.append(schema.value_index(var.name, values[var.name]))
        if traj is not None:
            traj_paths[len(rows)] = os.path.join(str(directory), traj)
        rows.append(row)
    dataset = Dataset(rows=np.asarray(rows, dtype=np.int64), provenance=provenance)
    dataset.validate(schema)
    return dataset, traj_paths
