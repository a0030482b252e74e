"""File formats: instance JSON/CSV, tree JSON and report CSV.

JSON floats are written with Python's shortest round-trip repr, so thresholds
survive a write/read cycle bit for bit.
"""

from __future__ import annotations

import csv
import json
import sys
from contextlib import contextmanager
from pathlib import Path
from typing import Any, Iterable, Optional

import numpy as np

from .core import InputError, Node, ThresholdTree
from .instances import Instance

TREE_FORMAT = "xcluster-tree"

REPORT_COLUMNS = [
    "instance", "algorithm", "p", "seed", "stream", "k", "cost_reference", "cost_optimal",
    "cost_unconstrained", "ratio_to_reference", "ratio_optimal_to_reference", "ratio_to_oracle",
    "accepted_cuts", "discarded_cuts", "internal_nodes", "wall_time", "status", "error",
]
AGGREGATE_COLUMNS = ["ratio_mean", "ratio_median", "ratio_p95", "runs", "failures"]
LONG_COLUMNS = ["instance", "k", "algorithm", "p", "statistic", "value"]


def _json_default(obj):
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialise {type(obj).__name__}")


# -- instances -------------------------------------------------------------------


def instance_to_dict(inst: Instance) -> dict[str, Any]:
    out: dict[str, Any] = {"dim": inst.d, "points": inst.points.tolist()}
    out["centers"] = None if inst.centers is None else inst.centers.tolist()
    if inst.labels is not None:
        out["labels"] = inst.labels.tolist()
    meta = {"generator": None, "params": {}, "seed": None}
    meta.update(inst.meta)
    out["meta"] = meta
    return out


def instance_from_dict(obj: dict[str, Any]) -> Instance:
    try:
        dim = int(obj["dim"])
        X = np.asarray(obj["points"], dtype=float).reshape(-1, dim)
        C = obj.get("centers")
        C = None if C is None else np.asarray(C, dtype=float).reshape(-1, dim)
        labels = obj.get("labels")
        labels = None if labels is None else np.asarray(labels, dtype=np.int64)
        meta = dict(obj.get("meta") or {})
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"malformed instance: {exc}") from exc
    if not np.all(np.isfinite(X)) or (C is not None and not np.all(np.isfinite(C))):
        raise InputError("instance contains non-finite coordinates")
    return Instance(X, C, labels, meta)


def write_instance(inst: Instance, path) -> None:
    Path(path).write_text(json.dumps(instance_to_dict(inst), default=_json_default) + "\n")


def read_instance(path, centers_path=None) -> Instance:
    """Load an instance from JSON, or from CSV points plus an optional CSV of centers."""
    path = Path(path)
    if path.suffix.lower() == ".csv":
        X = np.atleast_2d(np.loadtxt(path, delimiter=",", ndmin=2))
        C = None
        if centers_path is not None:
            C = np.atleast_2d(np.loadtxt(centers_path, delimiter=",", ndmin=2))
        return Instance(X, C, None, {"generator": "csv", "params": {"path": str(path)}, "seed": None})
    try:
        obj = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: not valid JSON ({exc})") from exc
    inst = instance_from_dict(obj)
    if centers_path is not None:
        inst.centers = np.atleast_2d(np.loadtxt(centers_path, delimiter=",", ndmin=2))
    return inst


def write_instance_csv(inst: Instance, points_path, centers_path=None) -> None:
    np.savetxt(points_path, inst.points, delimiter=",", fmt="%.17g")
    if centers_path is not None and inst.centers is not None:
        np.savetxt(centers_path, inst.centers, delimiter=",", fmt="%.17g")


# -- trees -------------------------------------------------------------------------


def _node_to_dict(root: Node) -> dict[str, Any]:
    # iterative post-order so deep trees do not hit the recursion limit
    done: dict[int, dict] = {}
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if node.is_leaf:
            done[id(node)] = {"cluster": int(node.cluster), "center_index": int(node.center)}
        elif expanded:
            done[id(node)] = {"dim": int(node.dim), "theta": float(node.theta),
                              "left": done.pop(id(node.left)), "right": done.pop(id(node.right))}
        else:
            stack.append((node, True))
            stack.append((node.right, False))
            stack.append((node.left, False))
    return done[id(root)]


def _node_from_dict(obj: dict[str, Any]) -> Node:
    root = Node()
    stack = [(obj, root)]
    while stack:
        obj_node, node = stack.pop()
        if "cluster" in obj_node:
            node.cluster = int(obj_node["cluster"])
            node.center = int(obj_node.get("center_index", obj_node["cluster"]))
            continue
        try:
            node.dim, node.theta = int(obj_node["dim"]), float(obj_node["theta"])
            node.left, node.right = Node(), Node()
            stack.append((obj_node["left"], node.left))
            stack.append((obj_node["right"], node.right))
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"malformed tree node: {exc}") from exc
    return root


def tree_to_dict(tree: ThresholdTree) -> dict[str, Any]:
    return {"format": TREE_FORMAT, "k": tree.k, "d": tree.d, "root": _node_to_dict(tree.root)}


def tree_from_dict(obj: dict[str, Any]) -> ThresholdTree:
    if obj.get("format") != TREE_FORMAT:
        # accept a bare node object too
        if "cluster" in obj or "dim" in obj:
            return ThresholdTree(_node_from_dict(obj))
        raise InputError("not a tree file")
    return ThresholdTree(_node_from_dict(obj["root"]), obj.get("d"))


@contextmanager
def _nesting_allowance(depth: int):
    # the stdlib JSON codec recurses once or twice per nesting level
    old = sys.getrecursionlimit()
    sys.setrecursionlimit(max(old, 4 * depth + 1000))
    try:
        yield
    finally:
        sys.setrecursionlimit(old)


def write_tree(tree: ThresholdTree, path) -> None:
    obj = tree_to_dict(tree)
    with _nesting_allowance(tree.depth()):
        text = json.dumps(obj)
    Path(path).write_text(text + "\n")


def read_tree(path) -> ThresholdTree:
    text = Path(path).read_text()
    try:
        # nesting depth is bounded by the number of opening braces
        with _nesting_allowance(text.count("{")):
            return tree_from_dict(json.loads(text))
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: not valid JSON ({exc})") from exc


# -- reports -----------------------------------------------------------------------


def write_report(rows: Iterable[dict], path, columns: Optional[list[str]] = None) -> None:
    columns = columns or REPORT_COLUMNS + AGGREGATE_COLUMNS
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=columns, extrasaction="ignore")
        w.writeheader()
        for row in rows:
            w.writerow({c: _fmt(row.get(c)) for c in columns})


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return v


def read_report(path) -> list[dict[str, str]]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
