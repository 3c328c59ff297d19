"""The parking process on trees and on the directed path.

Cars arrive at vertices, drive toward the root, and park at the first free
vertex; cars that pass the root exit.  The primary engine is the bottom-up
visit recursion

    visits(v) = arrivals(v) + sum over children c of (visits(c) - 1)^+

which runs in one O(n) pass.  A literal car-by-car simulator is kept as an
oracle: the process is abelian, so every arrival order must reproduce the
recursion's result, and the tests check exactly that.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from . import _kernels_py
from .rng import Stream, poisson_mean_to_threshold
from .tree import BinaryTree

LINE_ENUMERATION_MAX = 7


class ParkingError(Exception):
    """Base class for parking-process errors."""


class SizeMismatch(ParkingError):
    """Arrivals vector does not match the tree's node count."""


class InvalidNode(ParkingError):
    """A car's start node is out of range."""


class PrefOutOfRange(ParkingError):
    """A path preference is outside 1..n."""


class SizeTooLarge(ParkingError):
    """Exhaustive enumeration requested beyond the supported size."""


@dataclass
class Arrivals:
    """Per-node car arrival counts, indexed like the tree's node list."""

    counts: list[int]

    @property
    def total(self) -> int:
        return sum(self.counts)

    def to_csv(self) -> str:
        lines = ["node_index,count"]
        lines.extend(f"{v},{c}" for v, c in enumerate(self.counts))
        return "\n".join(lines) + "\n"


@dataclass
class FluxResult:
    """Outcome of a parking run.

    root_visits counts cars reaching the root (at most one parks there);
    flux = exited = (root_visits - 1)^+ is the number leaving the tree.
    """

    root_visits: int
    flux: int
    parked: int
    exited: int
    occupancy: list[int]

    @property
    def all_parked(self) -> bool:
        return self.exited == 0

    def summary_json(self) -> str:
        return json.dumps(
            {
                "root_visits": self.root_visits,
                "flux": self.flux,
                "parked": self.parked,
                "exited": self.exited,
            }
        )


@dataclass
class CarRecord:
    """Where one car ended up; parked_at is None when the car exited."""

    car: int
    start: int
    parked_at: int | None


def poisson_arrivals(tree: BinaryTree, alpha: float, stream: Stream) -> Arrivals:
    """Independent Poisson(alpha) arrivals at every node (in index order)."""
    threshold = poisson_mean_to_threshold(alpha)
    return Arrivals([stream.poisson(threshold) for _ in range(tree.n)])


def multinomial_arrivals(tree: BinaryTree, m: int, stream: Stream) -> Arrivals:
    """m cars placed independently and uniformly over the nodes."""
    if m < 0:
        raise ValueError("m must be >= 0")
    n = tree.n
    counts = [0] * n
    for _ in range(m):
        counts[stream.randbelow(n)] += 1
    return Arrivals(counts)


def compute_flux(tree: BinaryTree, arrivals: Arrivals) -> FluxResult:
    """Run the visit recursion bottom-up; O(n) time, no recursion depth.

    A node is occupied iff its visit count is at least 1.
    """
    n = tree.n
    if len(arrivals.counts) != n:
        raise SizeMismatch(f"arrivals length {len(arrivals.counts)} != node count {n}")
    order = tree.preorder()
    counts = [tree.child_count(v) for v in order]
    arr = [arrivals.counts[v] for v in order]
    # Reverse preorder pass; also recover per-node visits for occupancy.
    visits = [0] * n
    stack: list[int] = []
    for i in range(n - 1, -1, -1):
        x = arr[i]
        for _ in range(counts[i]):
            child = stack.pop()
            if child > 1:
                x += child - 1
        visits[order[i]] = x
        stack.append(x)
    root_visits = stack.pop()
    occupancy = [1 if v >= 1 else 0 for v in visits]
    flux = root_visits - 1 if root_visits >= 1 else 0
    return FluxResult(
        root_visits=root_visits,
        flux=flux,
        parked=sum(occupancy),
        exited=flux,
        occupancy=occupancy,
    )


def simulate_sequential(
    tree: BinaryTree, cars: list[tuple[int, int]]
) -> tuple[FluxResult, list[CarRecord]]:
    """Park cars one at a time in list order; the order-sensitive oracle.

    ``cars`` is a list of (car id, start node).  Each car walks from its
    start toward the root and takes the first free node; a car finding no
    space exits at the root.  Root visits count the cars whose walk reaches
    the root, i.e. those that park there or exit.
    """
    n = tree.n
    occupied = [0] * n
    records = []
    root_visits = 0
    exited = 0
    for car_id, start in cars:
        if not (0 <= start < n):
            raise InvalidNode(f"car {car_id} starts at {start}, tree has {n} nodes")
        v = start
        parked_at: int | None = None
        while True:
            if not occupied[v]:
                occupied[v] = 1
                parked_at = v
                if v == tree.root:
                    root_visits += 1
                break
            if v == tree.root:
                exited += 1
                root_visits += 1
                break
            v = tree.parent[v]
        records.append(CarRecord(car=car_id, start=start, parked_at=parked_at))
    parked = sum(occupied)
    return (
        FluxResult(
            root_visits=root_visits,
            flux=exited,
            parked=parked,
            exited=exited,
            occupancy=occupied,
        ),
        records,
    )


def is_line_parking_function(prefs: list[int], n: int) -> bool:
    """Can all cars park on the path 1..n with edges directed toward 1?

    Car i wants space prefs[i] and walks prefs[i], prefs[i]-1, ..., 1;
    space 1 acts as the root, so a car failing there exits and the answer
    is False.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    occupied = [False] * (n + 1)
    for p in prefs:
        if not (1 <= p <= n):
            raise PrefOutOfRange(f"preference {p} outside 1..{n}")
        v = p
        while v >= 1 and occupied[v]:
            v -= 1
        if v == 0:
            return False
        occupied[v] = True
    return True


def count_line_parking_functions(n: int, m: int) -> tuple[int, int]:
    """Count parking functions on the path two ways.

    Returns (brute_count, formula_count): exhaustive enumeration of all
    n**m preference sequences versus the closed form
    (n + 1 - m) * (n + 1)**(m - 1).
    """
    if not (1 <= m <= n):
        raise ValueError("need 1 <= m <= n")
    if n > LINE_ENUMERATION_MAX:
        raise SizeTooLarge(f"enumeration supports n <= {LINE_ENUMERATION_MAX}, got {n}")
    brute = 0
    prefs = [1] * m
    while True:
        if is_line_parking_function(prefs, n):
            brute += 1
        # odometer increment over {1..n}^m
        i = m - 1
        while i >= 0 and prefs[i] == n:
            prefs[i] = 1
            i -= 1
        if i < 0:
            break
        prefs[i] += 1
    formula = (n + 1 - m) * (n + 1) ** (m - 1)
    return brute, formula


def path_tree(n: int) -> BinaryTree:
    """The path on n nodes as a tree: node i's parent is i - 1 (root = 0).

    Node i corresponds to path space i + 1, so space 1 is the root.
    """
    parent = [-1] + list(range(n - 1))
    left = list(range(1, n)) + [-1]
    right = [-1] * n
    return BinaryTree(parent, left, right)


def flux_kernel_counts(tree: BinaryTree, arrivals: Arrivals) -> tuple[int, int]:
    """Root visits and parked count via the shared kernel reverse pass.

    Thin wrapper used by tests to pin the object layer to the kernels.
    """
    order = tree.preorder()
    return _kernels_py.flux_from_preorder(
        [tree.child_count(v) for v in order],
        [arrivals.counts[v] for v in order],
    )
