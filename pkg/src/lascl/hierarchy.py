"""Label taxonomy: tree construction, label sentences and bottom-up truncation.

Class indices are assigned in declaration order, so ``leaf_ids[c]`` is the
leaf node of class ``c``. Nodes are merged by exact (case-sensitive) name at
each level.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Sequence

from .errors import (
    DepthOutOfRange,
    DuplicateClass,
    EmptyPath,
    LeafCollision,
    PrefixConflict,
    UnknownClass,
    UnresolvedPlaceholder,
)

ROOT_NAME = "<root>"
PATH_SEPARATOR = ", "

_PLACEHOLDER = re.compile(r"\{([^{}]*)\}")
_LAYER_FIELD = re.compile(r"label\[L(\d+)\]")


@dataclass(frozen=True)
class LabelNode:
    id: int
    parent: Optional[int]
    name: str
    depth: int


@dataclass(frozen=True)
class LabelTree:
    nodes: tuple[LabelNode, ...]
    root_id: int
    leaf_ids: tuple[int, ...]

    @property
    def num_classes(self) -> int:
        return len(self.leaf_ids)

    @property
    def max_depth(self) -> int:
        return max(self.nodes[i].depth for i in self.leaf_ids)

    def leaf(self, class_index: int) -> LabelNode:
        if not 0 <= class_index < len(self.leaf_ids):
            raise UnknownClass(class_index)
        return self.nodes[self.leaf_ids[class_index]]

    def paths(self) -> list[list[str]]:
        return [ancestor_path(self, c) for c in range(self.num_classes)]


@dataclass(frozen=True)
class TemplateSpec:
    """Sentence pattern with ``{label}`` and ``{label[Lk]}`` placeholders."""

    pattern: str


def build_tree(label_paths: Iterable[tuple[int, Sequence[str]]]) -> LabelTree:
    """Build a tree from ``(class_index, [name, ...])`` pairs.

    Raises:
        EmptyPath: no paths at all, or a path without names.
        DuplicateClass: a class index repeats or indices are not ``0..C-1``.
        PrefixConflict: a declared leaf is an ancestor of another leaf.
        LeafCollision: two classes share an identical full path.
    """
    label_paths = [(c, list(p)) for c, p in label_paths]
    if not label_paths:
        raise EmptyPath("no label paths given")

    seen: set[int] = set()
    for c, path in label_paths:
        if not path:
            raise EmptyPath(f"class {c} has an empty path")
        if c in seen:
            raise DuplicateClass(f"class {c} declared twice")
        seen.add(c)
    if seen != set(range(len(label_paths))):
        raise DuplicateClass(f"class indices must be exactly 0..{len(label_paths) - 1}")

    nodes: list[LabelNode] = [LabelNode(0, None, ROOT_NAME, 0)]
    children: dict[tuple[int, str], int] = {}
    leaf_of: dict[int, int] = {}
    for c, path in label_paths:
        cur = 0
        for depth, name in enumerate(path, start=1):
            key = (cur, name)
            if key not in children:
                children[key] = len(nodes)
                nodes.append(LabelNode(len(nodes), cur, name, depth))
            cur = children[key]
        leaf_of[c] = cur

    internal = {n.parent for n in nodes if n.parent is not None}
    owner: dict[int, int] = {}
    for c in range(len(label_paths)):
        node_id = leaf_of[c]
        if node_id in owner:
            raise LeafCollision(
                f"classes {owner[node_id]} and {c} share the path {_joined(nodes, node_id)!r}"
            )
        owner[node_id] = c
        if node_id in internal:
            raise PrefixConflict(
                f"class {c} path {_joined(nodes, node_id)!r} is a prefix of another path"
            )

    return LabelTree(tuple(nodes), 0, tuple(leaf_of[c] for c in range(len(label_paths))))


def _joined(nodes: Sequence[LabelNode], node_id: int) -> str:
    names = []
    while nodes[node_id].parent is not None:
        names.append(nodes[node_id].name)
        node_id = nodes[node_id].parent
    return "/".join(reversed(names))


def ancestor_path(tree: LabelTree, class_index: int) -> list[str]:
    """Names from the depth-1 ancestor down to the leaf, inclusive."""
    node = tree.leaf(class_index)
    names = []
    while node.parent is not None:
        names.append(node.name)
        node = tree.nodes[node.parent]
    return names[::-1]


def ancestor_at_depth(tree: LabelTree, class_index: int, depth: int) -> int:
    leaf = tree.leaf(class_index)
    if not 1 <= depth <= leaf.depth:
        raise DepthOutOfRange(f"depth {depth} outside 1..{leaf.depth} for class {class_index}")
    node = leaf
    while node.depth > depth:
        node = tree.nodes[node.parent]
    return node.id


def label_sentence(
    tree: LabelTree,
    class_index: int,
    template: TemplateSpec,
    overrides: Optional[Mapping[int, str]] = None,
) -> str:
    """Render the label sentence of one class.

    ``{label}`` expands to the ancestor path joined by ", "; ``{label[Lk]}``
    to the k-th path component (1-based below the root). An override for the
    class is returned verbatim.
    """
    if overrides and class_index in overrides:
        return overrides[class_index]
    path = ancestor_path(tree, class_index)

    def resolve(match: re.Match) -> str:
        field = match.group(1)
        if field == "label":
            return PATH_SEPARATOR.join(path)
        layer = _LAYER_FIELD.fullmatch(field)
        if layer is None:
            raise UnresolvedPlaceholder(f"unknown placeholder {{{field}}}")
        k = int(layer.group(1))
        if not 1 <= k <= len(path):
            raise UnresolvedPlaceholder(
                f"{{{field}}} does not exist for class {class_index} (depth {len(path)})"
            )
        return path[k - 1]

    return _PLACEHOLDER.sub(resolve, template.pattern)


def truncate_bottom_up(tree: LabelTree, levels: int) -> LabelTree:
    """Rebuild the tree from the last ``levels`` names of every leaf path."""
    if levels < 1:
        raise ValueError("levels must be >= 1")
    return build_tree((c, ancestor_path(tree, c)[-levels:]) for c in range(tree.num_classes))
