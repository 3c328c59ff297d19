"""Random rooted binary trees: samplers, enumeration, spine segments.

Trees are positioned: every node has a distinct left and right child slot,
each independently occupied with probability 1/2 under the critical
Bin(2, 1/2) branching law.  Under this representation every n-node tree has
unconditioned probability 4**-n, so conditioning on the size n gives the
uniform distribution over the Catalan-many n-node shapes.  The parking
process never looks at sides, so downstream results do not depend on this
choice.

Storage is flat: parent/left/right index lists with -1 for "absent", nodes
indexed in depth-first preorder (root = 0).  This keeps traversals
iterative and matches the order in which the simulation kernels consume
randomness, so object-level sampling and the fused kernels can be replayed
against each other draw for draw.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from fractions import Fraction

from . import _kernels_py
from .rng import LANE_STRUCTURE, Stream, derive_key

_POPC2 = (0, 1, 1, 2)

ENUMERATION_MAX_NODES = 12


class TreeError(Exception):
    """Base class for tree construction and sampling errors."""


class SizeTooLarge(TreeError):
    """Requested an exhaustive enumeration beyond the supported size."""


class RejectionLimitExceeded(TreeError):
    """The conditioned sampler exhausted its rejection budget."""


class InvalidTree(TreeError):
    """Structural invariant violated."""


@dataclass
class SamplerConfig:
    """Knobs shared by the tree samplers.

    ``seed`` is only used when an operation is called without an explicit
    stream.  ``max_nodes`` caps unconditioned growth (the critical
    branching law has infinite expected size, so a cap is unavoidable);
    ``rejection_limit`` caps attempts of the fixed-size sampler.
    """

    seed: int = 0
    max_nodes: int = 10_000_000
    rejection_limit: int = 10_000

    def __post_init__(self) -> None:
        if self.max_nodes < 1:
            raise ValueError("max_nodes must be >= 1")
        if self.rejection_limit < 1:
            raise ValueError("rejection_limit must be >= 1")


class BinaryTree:
    """Rooted positioned binary tree over nodes 0..n-1 (root = 0).

    parent[v], left[v], right[v] are node indices or -1.
    """

    __slots__ = ("parent", "left", "right")

    def __init__(self, parent: list[int], left: list[int], right: list[int]):
        self.parent = parent
        self.left = left
        self.right = right

    @property
    def n(self) -> int:
        return len(self.parent)

    @property
    def root(self) -> int:
        return 0

    def children(self, v: int) -> list[int]:
        out = []
        if self.left[v] >= 0:
            out.append(self.left[v])
        if self.right[v] >= 0:
            out.append(self.right[v])
        return out

    def child_count(self, v: int) -> int:
        return (self.left[v] >= 0) + (self.right[v] >= 0)

    def is_leaf(self, v: int) -> bool:
        return self.left[v] < 0 and self.right[v] < 0

    def preorder(self) -> list[int]:
        """Depth-first preorder from the root, left child before right."""
        order = []
        stack = [0]
        while stack:
            v = stack.pop()
            order.append(v)
            if self.right[v] >= 0:
                stack.append(self.right[v])
            if self.left[v] >= 0:
                stack.append(self.left[v])
        return order

    def shape_key(self) -> tuple[int, ...]:
        """Canonical hashable key: preorder child fields (1=left, 2=right)."""
        key = []
        for v in self.preorder():
            key.append((self.left[v] >= 0) + 2 * (self.right[v] >= 0))
        return tuple(key)

    def validate(self) -> None:
        """Check the structural invariants; raise InvalidTree on failure."""
        n = self.n
        if n == 0:
            raise InvalidTree("empty tree")
        rootless = [v for v in range(n) if self.parent[v] < 0]
        if rootless != [0]:
            raise InvalidTree(f"expected exactly node 0 without parent, got {rootless}")
        for v in range(n):
            for c in (self.left[v], self.right[v]):
                if c >= 0:
                    if not (0 <= c < n):
                        raise InvalidTree(f"child index {c} of {v} out of range")
                    if self.parent[c] != v:
                        raise InvalidTree(f"parent link of {c} inconsistent with {v}")
        for v in range(1, n):
            p = self.parent[v]
            if not (0 <= p < n):
                raise InvalidTree(f"parent index {p} of {v} out of range")
            if self.left[p] != v and self.right[p] != v:
                raise InvalidTree(f"node {v} not registered as child of {p}")
            # acyclicity: must reach the root in < n parent steps
            steps = 0
            u = v
            while u != 0:
                u = self.parent[u]
                steps += 1
                if steps >= n:
                    raise InvalidTree(f"parent chain from {v} does not reach root")
        if len(self.preorder()) != n:
            raise InvalidTree("tree is not connected")

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, BinaryTree):
            return NotImplemented
        return (
            self.parent == other.parent
            and self.left == other.left
            and self.right == other.right
        )

    def __hash__(self) -> int:
        return hash(self.shape_key())

    def __repr__(self) -> str:
        return f"BinaryTree(n={self.n})"

    def to_csv(self) -> str:
        """Dump as 'index,parent,left,right' lines (root parent = -1)."""
        buf = io.StringIO()
        buf.write("index,parent,left,right\n")
        for v in range(self.n):
            buf.write(f"{v},{self.parent[v]},{self.left[v]},{self.right[v]}\n")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "BinaryTree":
        lines = [ln for ln in text.strip().splitlines() if ln]
        if lines and lines[0].lower().startswith("index"):
            lines = lines[1:]
        rows = sorted(tuple(int(x) for x in ln.split(",")) for ln in lines)
        parent = [r[1] for r in rows]
        left = [r[2] for r in rows]
        right = [r[3] for r in rows]
        t = cls(parent, left, right)
        t.validate()
        return t


@dataclass
class Truncated:
    """Marker returned when unconditioned growth hit the node cap.

    Carries the clipped tree (generated prefix with ungrown subtrees
    absent) so callers can still inspect or park on it; retry policy is
    theirs.
    """

    partial: BinaryTree
    nodes_generated: int


@dataclass
class SpineSegment:
    """Finite segment of the one-ended limit tree: spine plus hangers.

    ``attached[h]`` is the tree hanging off spine vertex h, or None.  Each
    spine vertex gets 0 or 1 hanger with probability 1/2 each (the
    size-biased shift of Bin(2, 1/2), pushed down by one).
    """

    depth: int
    attached: list[BinaryTree | None]
    spine: list[int] = field(default_factory=list)

    def __post_init__(self) -> None:
        if not self.spine:
            self.spine = list(range(self.depth + 1))
        if len(self.attached) != self.depth + 1:
            raise InvalidTree("attached list must have depth + 1 entries")
        if len(self.spine) != self.depth + 1:
            raise InvalidTree("spine must have depth + 1 vertices")


def _stream_for(cfg: SamplerConfig, stream: Stream | None) -> Stream:
    if stream is not None:
        return stream
    return Stream(derive_key(cfg.seed, 0, LANE_STRUCTURE))


def tree_from_fields(fields: list[int], clipped: bool = False) -> BinaryTree:
    """Build a tree from preorder child fields (bit 0 left, bit 1 right).

    With ``clipped=True`` leftover child slots are tolerated and simply
    stay empty, which is how a truncated generation prefix becomes a tree.
    """
    n = len(fields)
    parent = [-1] * n
    left = [-1] * n
    right = [-1] * n
    # Stack of (parent index, is_left_slot) for promised children; pushing
    # the right slot first makes the left subtree come next in preorder.
    slots: list[tuple[int, bool]] = [(-1, False)]
    for v in range(n):
        p, is_left = slots.pop()
        parent[v] = p
        if p >= 0:
            if is_left:
                left[p] = v
            else:
                right[p] = v
        f = fields[v]
        if f & 2:
            slots.append((v, False))
        if f & 1:
            slots.append((v, True))
    if slots and not clipped:
        raise InvalidTree("field sequence is not a complete preorder")
    return BinaryTree(parent, left, right)


def sample_bgw_tree(cfg: SamplerConfig, stream: Stream | None = None) -> BinaryTree | Truncated:
    """Sample one critical Bin(2, 1/2) branching tree.

    Nodes are generated in preorder; each node's two child slots are
    independent fair coins.  If generation would exceed ``cfg.max_nodes``
    a Truncated marker holding the clipped tree is returned instead; the
    process is critical, so truncations become arbitrarily rare as the cap
    grows.
    """
    st = _stream_for(cfg, stream)
    fields, truncated = _kernels_py.bgw_preorder_fields(st, cfg.max_nodes)
    if truncated:
        return Truncated(tree_from_fields(fields, clipped=True), len(fields))
    return tree_from_fields(fields)


def sample_uniform_tree(n: int, cfg: SamplerConfig, stream: Stream | None = None) -> BinaryTree:
    """Sample a uniform positioned binary tree with exactly n nodes.

    Draws the n child fields i.i.d. conditioned on total child count n - 1
    (rejection on the packed popcount), then applies the cycle-lemma
    rotation; the rotated sequence is the unique cyclic shift that forms a
    valid preorder.  Acceptance decays like n**-0.5, far better than the
    n**-1.5 of whole-tree rejection.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    st = _stream_for(cfg, stream)
    fields, attempts = _kernels_py.uniform_offspring_fields(st, n, cfg.rejection_limit)
    if fields is None:
        raise RejectionLimitExceeded(
            f"no field sequence with child-count sum {n - 1} in {attempts} attempts"
        )
    # The rotation is valid by the cycle lemma; verify before building.
    s = 0
    for j in range(n - 1):
        s += _POPC2[fields[j]] - 1
        if s < 0:
            raise InvalidTree("cycle-lemma rotation produced an invalid preorder")
    return tree_from_fields(fields)


def build_spine_segment(
    depth: int, cfg: SamplerConfig, stream: Stream | None = None
) -> SpineSegment | Truncated:
    """Sample the first ``depth + 1`` spine vertices with their hangers.

    Per spine vertex: one fair coin for the number of hangers (0 or 1),
    then, if present, a full Bin(2, 1/2) tree.  Truncation of any hanger
    propagates: the whole draw returns that hanger's Truncated marker.
    """
    if depth < 1:
        raise ValueError("depth must be >= 1")
    st = _stream_for(cfg, stream)
    attached: list[BinaryTree | None] = []
    for _h in range(depth + 1):
        if st.next_bit():
            t = sample_bgw_tree(cfg, st)
            if isinstance(t, Truncated):
                return t
            attached.append(t)
        else:
            attached.append(None)
    return SpineSegment(depth=depth, attached=attached)


def enumerate_trees(n: int) -> list[tuple[BinaryTree, Fraction]]:
    """All positioned binary trees with n nodes and their branching weights.

    Each tree carries its unconditioned probability 4**-n under the
    critical Bin(2, 1/2) law; the list length is the n-th Catalan number.
    Supports n <= 12 (208012 trees).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if n > ENUMERATION_MAX_NODES:
        raise SizeTooLarge(f"enumeration supports n <= {ENUMERATION_MAX_NODES}, got {n}")
    shapes = _shapes(n)
    weight = Fraction(1, 4**n)
    out = []
    for code in shapes:
        fields: list[int] = []
        _fields_from_code(code, fields)
        out.append((tree_from_fields(fields), weight))
    return out


_SHAPE_CACHE: dict[int, list] = {}


def _shapes(n: int) -> list:
    """Shape codes for n-node trees: (left_code, right_code), None = absent."""
    if n in _SHAPE_CACHE:
        return _SHAPE_CACHE[n]
    if n == 1:
        out = [(None, None)]
    else:
        out = []
        for left_size in range(n):
            right_size = n - 1 - left_size
            lefts = _shapes(left_size) if left_size else [None]
            rights = _shapes(right_size) if right_size else [None]
            for lc in lefts:
                for rc in rights:
                    out.append((lc, rc))
    _SHAPE_CACHE[n] = out
    return out


def _fields_from_code(code, fields: list[int]) -> None:
    lc, rc = code
    fields.append((1 if lc is not None else 0) | (2 if rc is not None else 0))
    if lc is not None:
        _fields_from_code(lc, fields)
    if rc is not None:
        _fields_from_code(rc, fields)
