"""Hierarchical exploration trees over a candidate set.

Each level shows at most ``n`` representatives chosen by a subset-selection
strategy; every other candidate is handed to its nearest representative and
the procedure recurses on those hand-offs. The root is synthetic and holds
no sample.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, UsageError
from .features import as_feature_matrix
from .subsample import Sampler, make_sampler


@dataclass
class Node:
    index: int | None
    children: list["Node"] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"index": self.index, "children": [c.to_dict() for c in self.children]}

    @classmethod
    def from_dict(cls, d: dict) -> "Node":
        index = d["index"]
        return cls(
            None if index is None else int(index),
            [cls.from_dict(c) for c in d.get("children", [])],
        )

    def iter_nodes(self):
        stack = [self]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(reversed(node.children))

    def sample_indices(self) -> list[int]:
        return [n.index for n in self.iter_nodes() if n.index is not None]

    def depth(self) -> int:
        if not self.children:
            return 0
        return 1 + max(c.depth() for c in self.children)

    def max_children(self) -> int:
        return max(len(n.children) for n in self.iter_nodes())


def nearest_partition(reps, pool, x) -> list[list[int]]:
    """Assign each pool index to its euclidean-nearest representative.

    Returns one list per representative, in ``reps`` order; ties go to the
    representative listed first.
    """
    reps = [int(r) for r in reps]
    pool = [int(p) for p in pool]
    if not reps:
        raise UsageError("need at least one representative")
    overlap = set(reps) & set(pool)
    if overlap:
        raise UsageError(f"indices {sorted(overlap)} are both representatives and pool members")
    parts: list[list[int]] = [[] for _ in reps]
    if not pool:
        return parts
    x = as_feature_matrix(x)
    d2 = np.sum((x[pool][:, None, :] - x[reps][None, :, :]) ** 2, axis=2)
    for p, owner in zip(pool, np.argmin(d2, axis=1)):
        parts[int(owner)].append(p)
    return parts


def _path_seed(seed: int, path: tuple[int, ...]) -> int:
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=path)
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def build_tree(x, n: int, sampler: Sampler | None = None, seed: int = 0) -> Node:
    """Recursive exploration tree with at most ``n`` children per node.

    ``sampler(features, n, seed)`` picks representatives among the rows it
    is given (default: farthest point selection over the whole subset). The
    seed used at each node is derived from ``seed`` and the node's path, so
    sibling subtrees are independent of build order.
    """
    x = as_feature_matrix(x)
    if n < 2:
        raise UsageError(f"n must be at least 2, got {n}")
    sampler = make_sampler("fps") if sampler is None else sampler
    root = Node(None)
    # explicit stack keeps deep trees clear of the recursion limit
    stack = [(root, np.arange(x.shape[0]), ())]
    while stack:
        node, members, path = stack.pop()
        if len(members) <= n:
            node.children = [Node(int(i)) for i in members]
            continue
        picked = sampler(x[members], n, _path_seed(seed, path)).indices
        if not 1 <= len(picked) <= n:
            raise DataError(f"sampler returned {len(picked)} representatives, expected 1..{n}")
        reps = [int(members[i]) for i in picked]
        chosen = set(reps)
        pool = [int(i) for i in members if int(i) not in chosen]
        parts = nearest_partition(reps, pool, x)
        node.children = [Node(r) for r in reps]
        for k, (child, part) in enumerate(zip(node.children, parts)):
            if part:
                stack.append((child, np.asarray(part), path + (k,)))
    return root


def tree_export(tree: Node, fmt: str = "json", include_root: bool = False) -> str:
    """Serialise a tree as JSON or as a Graphviz digraph.

    In DOT output sample nodes are named ``n<index>``; the synthetic root
    and its edges appear only with ``include_root``.
    """
    if fmt == "json":
        return json.dumps(tree.to_dict(), indent=2) + "\n"
    if fmt != "dot":
        raise UsageError(f"unknown tree format {fmt!r}; expected 'json' or 'dot'")
    lines = ["digraph exploration_tree {"]
    if include_root and tree.index is None:
        lines.append('  root [label="root"];')
    for node in tree.iter_nodes():
        if node.index is not None:
            lines.append(f'  n{node.index} [label="{node.index}"];')
    for node in tree.iter_nodes():
        src = "root" if node.index is None else f"n{node.index}"
        if node.index is None and not include_root:
            continue
        for child in node.children:
            lines.append(f"  {src} -> n{child.index};")
    lines.append("}")
    return "\n".join(lines) + "\n"


def tree_from_json(text: str) -> Node:
    try:
        return Node.from_dict(json.loads(text))
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise DataError(f"malformed tree JSON: {exc}") from None
