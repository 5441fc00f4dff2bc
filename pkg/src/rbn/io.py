"""File formats.

Nodes are 1-based in every file and 0-based in memory. Floats are written
with 17 significant digits so that files round-trip exactly.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .bayesnet import BayesNet, Dag, Dataset
from .contamination import (
    CptShift,
    NoiseModel,
    PointMass,
    ProductNoise,
    SubtractiveTail,
)
from .engine import EngineConfig, FilterStack, LinearFilter
from .errors import FormatError

MODEL_FORMAT = "bayesnet-v1"


def fmt_float(x: float) -> str:
    x = float(x)
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    s = f"{x:.17g}"
    if "e" not in s and "." not in s and "n" not in s:
        s += ".0"
    return s


def dumps(obj, indent: int = 2, _level: int = 0) -> str:
    """JSON encoder that writes every float with 17 significant digits."""
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return fmt_float(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {dumps(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(isinstance(v, (int, float, bool, np.number)) for v in obj):
            return "[" + ", ".join(dumps(v) for v in obj) + "]"
        items = [pad + dumps(v, indent, _level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _load_json(path):
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON: {exc.msg}", exc.lineno) from exc


# Models ------------------------------------------------------------------

def model_to_dict(net: BayesNet) -> dict:
    table = net.table
    return {
        "format": MODEL_FORMAT,
        "d": net.d,
        "parents": [[p + 1 for p in ps] for ps in net.dag.parents],
        "cpt": [
            {"node": i + 1, "config": table.assignment_bits(k), "p": float(net.cpt[k])}
            for k, (i, _) in enumerate(table.entries)
        ],
    }


def model_from_dict(obj: dict) -> BayesNet:
    if obj.get("format") != MODEL_FORMAT:
        raise FormatError(f"expected format {MODEL_FORMAT!r}, got {obj.get('format')!r}")
    try:
        d = int(obj["d"])
        dag = Dag(d, tuple(tuple(p - 1 for p in ps) for ps in obj["parents"]))
        table = dag.table
        rows = obj["cpt"]
        if len(rows) != table.m:
            raise FormatError(f"expected {table.m} cpt rows, got {len(rows)}")
        cpt = np.empty(table.m)
        for k, row in enumerate(rows):
            i = int(row["node"]) - 1
            a = table.parse_assignment(i, str(row["config"]))
            if table.index(i, a) != k:
                raise FormatError(f"cpt row {k} out of flat-index order")
            cpt[k] = float(row["p"])
        return BayesNet(dag, cpt)
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        if isinstance(exc, FormatError):
            raise
        raise FormatError(f"bad model: {exc}") from exc


def save_model(net: BayesNet, path):
    Path(path).write_text(dumps(model_to_dict(net)) + "\n")


def load_model(path) -> BayesNet:
    return model_from_dict(_load_json(path))


# Datasets ----------------------------------------------------------------

def dataset_to_text(data: Dataset) -> str:
    lines = [f"{data.d} {len(data)}"]
    rows = ["".join(r) for r in data.x.astype(str)] if len(data) else []
    if data.labels is None:
        lines.extend(rows)
    else:
        lines.extend(f"{r} {'B' if bad else 'G'}" for r, bad in zip(rows, data.labels))
    return "\n".join(lines) + "\n"


def save_dataset(data: Dataset, path):
    Path(path).write_text(dataset_to_text(data))


def dataset_from_text(text: str) -> Dataset:
    lines = text.splitlines()
    if not lines:
        raise FormatError("empty dataset file", 1)
    head = lines[0].split()
    if len(head) != 2 or not all(h.isdigit() for h in head):
        raise FormatError("header must be 'd N'", 1)
    d, n = int(head[0]), int(head[1])
    body = [ln for ln in lines[1:]]
    while body and not body[-1].strip():
        body.pop()
    if len(body) != n:
        raise FormatError(f"header promises {n} rows, found {len(body)}", len(lines))
    x = np.zeros((n, d), dtype=np.uint8)
    labels = []
    for r, ln in enumerate(body):
        lineno = r + 2
        toks = ln.split()
        if len(toks) not in (1, 2) or len(toks[0]) != d or set(toks[0]) - {"0", "1"}:
            raise FormatError(f"expected {d} binary characters", lineno)
        x[r] = np.frombuffer(toks[0].encode(), dtype=np.uint8) - ord("0")
        if len(toks) == 2:
            if toks[1] not in ("G", "B"):
                raise FormatError(f"label must be G or B, got {toks[1]!r}", lineno)
            labels.append(toks[1] == "B")
    if labels and len(labels) != n:
        raise FormatError("labels must be given for every row or none")
    return Dataset(x, np.array(labels) if labels else None)


def load_dataset(path) -> Dataset:
    return dataset_from_text(Path(path).read_text())


# Noise specs -------------------------------------------------------------

def adversary_to_dict(adv) -> dict:
    if isinstance(adv, ProductNoise):
        return {"type": "product_noise", "means": [float(v) for v in adv.means]}
    if isinstance(adv, PointMass):
        return {"type": "point_mass", "x": "".join(str(int(b)) for b in adv.point)}
    if isinstance(adv, CptShift):
        return {"type": "cpt_shift", "targets": list(adv.targets), "delta": adv.delta}
    if isinstance(adv, SubtractiveTail):
        return {"type": "subtractive_tail", "v": adv.v.tolist(), "q_ref": adv.q_ref.tolist()}
    raise TypeError(type(adv).__name__)


def adversary_from_dict(obj: dict):
    kind = obj.get("type")
    try:
        if kind == "product_noise":
            return ProductNoise(np.asarray(obj["means"], float))
        if kind == "point_mass":
            x = obj["x"]
            bits = [int(c) for c in x] if isinstance(x, str) else [int(b) for b in x]
            return PointMass(np.asarray(bits, np.uint8))
        if kind == "cpt_shift":
            targets = obj.get("targets", obj.get("target"))
            targets = (int(targets),) if isinstance(targets, int) else tuple(int(t) for t in targets)
            return CptShift(targets, float(obj["delta"]))
        if kind == "subtractive_tail":
            return SubtractiveTail(np.asarray(obj["v"], float), np.asarray(obj["q_ref"], float))
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"bad adversary spec: {exc}") from exc
    raise FormatError(f"unknown adversary type {kind!r}")


def noise_to_dict(model: NoiseModel) -> dict:
    return {"kind": model.kind, "eps": model.eps, "adversary": adversary_to_dict(model.adversary)}


def noise_from_dict(obj: dict) -> NoiseModel:
    try:
        return NoiseModel(obj["kind"], float(obj["eps"]), adversary_from_dict(obj["adversary"]))
    except KeyError as exc:
        raise FormatError(f"noise spec missing {exc}") from exc
    except ValueError as exc:
        raise FormatError(str(exc)) from exc


def load_noise(path) -> NoiseModel:
    return noise_from_dict(_load_json(path))


# Engine config and filters ----------------------------------------------

def config_from_dict(obj: dict) -> EngineConfig:
    try:
        return EngineConfig(**obj)
    except TypeError as exc:
        raise FormatError(f"bad engine config: {exc}") from exc


def load_config(path) -> EngineConfig:
    return config_from_dict(_load_json(path))


def stack_to_list(stack: FilterStack) -> list:
    return [{"v": f.v.tolist(), "q": f.q.tolist(), "T": f.T, "delta": f.delta}
            for f in stack.filters]


def stack_from_list(items) -> FilterStack:
    return FilterStack(tuple(LinearFilter(np.asarray(f["v"]), np.asarray(f["q"]), f["T"], f["delta"])
                             for f in items))
