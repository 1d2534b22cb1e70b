"""Binary regression trees stored as heap-indexed node arrays.

Node ``k`` has children ``2k + 1`` (left) and ``2k + 2`` (right); the root
is node 0.  ``split_var[k]`` is the column index for an internal node,
``LEAF`` for a leaf and ``ABSENT`` for an unused slot.  A row goes left at
node ``k`` iff ``x[split_var[k]] <= split_value[k]``.

Fixed-capacity arrays make a tree a cheap value type: the samplers copy the
split arrays, apply a proposal, and keep or discard the copy.  The
functions prefixed with an underscore are numba kernels shared with the
samplers; the public functions wrap them for single trees.

The proposal kernel follows the usual BART literature defaults: GROW,
PRUNE and CHANGE with probabilities 0.3 / 0.3 / 0.4, a split-rule prior
uniform over columns and then uniform over the column's observed values
(0/1 columns split at 0.5 only), and a depth prior
``alpha * (1 + depth) ** -beta`` that is zero at ``max_depth``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numba
import numpy as np

LEAF = -1
ABSENT = -2

GROW, PRUNE, CHANGE = 1, 2, 3
MOVE_NAMES = {GROW: "grow", PRUNE: "prune", CHANGE: "change"}

DEFAULT_MAX_DEPTH = 8
DEFAULT_MOVE_PROBS = (0.3, 0.3, 0.4)


def capacity(max_depth: int) -> int:
    return 2 ** (max_depth + 1) - 1


def _max_depth_of(n_nodes: int) -> int:
    depth = int(round(math.log2(n_nodes + 1))) - 1
    if capacity(depth) != n_nodes:
        raise ValueError(f"{n_nodes} is not a complete binary tree capacity")
    return depth


# ---------------------------------------------------------------------------
# numba kernels


@numba.njit(cache=True)
def _depth(node):
    d = 0
    while node > 0:
        node = (node - 1) // 2
        d += 1
    return d


@numba.njit(cache=True)
def _descends(k, node):
    while k > node:
        k = (k - 1) // 2
    return k == node


@numba.njit(cache=True)
def _route(split_var, split_value, x, start):
    k = start
    while split_var[k] >= 0:
        if x[split_var[k]] <= split_value[k]:
            k = 2 * k + 1
        else:
            k = 2 * k + 2
    return k


@numba.njit(cache=True)
def _route_rows(split_var, split_value, X, out):
    for i in range(X.shape[0]):
        out[i] = _route(split_var, split_value, X[i], 0)


@numba.njit(cache=True)
def _predict_forest(split_var, split_value, leaf_value, X, out):
    m = split_var.shape[0]
    for i in range(X.shape[0]):
        acc = 0.0
        for t in range(m):
            acc += leaf_value[t, _route(split_var[t], split_value[t], X[i], 0)]
        out[i] = acc


@numba.njit(cache=True)
def _p_split(depth, alpha, beta, max_depth):
    if depth >= max_depth:
        return 0.0
    return alpha * (1.0 + depth) ** (-beta)


@numba.njit(cache=True)
def _tree_counts(split_var):
    n_leaves = 0
    n_internal = 0
    n_nog = 0
    for k in range(split_var.shape[0]):
        v = split_var[k]
        if v == LEAF:
            n_leaves += 1
        elif v >= 0:
            n_internal += 1
            if split_var[2 * k + 1] == LEAF and split_var[2 * k + 2] == LEAF:
                n_nog += 1
    return n_leaves, n_internal, n_nog


@numba.njit(cache=True)
def _kth_node(split_var, which, kth):
    """Index of the kth leaf (which=0), internal node (1) or nog node (2)."""
    seen = 0
    for k in range(split_var.shape[0]):
        v = split_var[k]
        if which == 0:
            hit = v == LEAF
        elif which == 1:
            hit = v >= 0
        else:
            hit = v >= 0 and split_var[2 * k + 1] == LEAF and split_var[2 * k + 2] == LEAF
        if hit:
            if seen == kth:
                return k
            seen += 1
    return -1


@numba.njit(cache=True)
def _valid_cuts(leaf_of, X, node, j, cuts, cut_start, cut_count):
    """First index and number of column-j cut values that split node's rows.

    Cut ``c`` splits the rows in two non-empty parts iff
    ``min(x_j) <= c < max(x_j)`` over the rows reaching ``node``.
    """
    lo = np.inf
    hi = -np.inf
    for i in range(X.shape[0]):
        if _descends(leaf_of[i], node):
            v = X[i, j]
            if v < lo:
                lo = v
            if v > hi:
                hi = v
    s = cut_start[j]
    col = cuts[s:s + cut_count[j]]
    if lo > hi:
        return s, 0
    a = np.searchsorted(col, lo, side="left")
    b = np.searchsorted(col, hi, side="left")
    return s + a, b - a


@numba.njit(cache=True)
def _propose(split_var, split_value, leaf_of, X, cuts, cut_start, cut_count,
             alpha, beta, max_depth, p_grow, p_prune, rng):
    """Draw a structural move.

    Returns ``(kind, node, var, value, log_q_forward, log_q_reverse,
    log_prior_ratio)``.  A move that cannot be made (no valid cut, depth
    limit) comes back with ``log_prior_ratio = -inf``.
    """
    p = X.shape[1]
    p_change = 1.0 - p_grow - p_prune
    n_leaves, n_internal, n_nog = _tree_counts(split_var)
    if n_internal == 0:
        kind = GROW
        pg = 1.0
    else:
        u = rng.random()
        if u < p_grow:
            kind = GROW
        elif u < p_grow + p_prune:
            kind = PRUNE
        else:
            kind = CHANGE
        pg = p_grow
    ninf = -np.inf

    if kind == GROW:
        node = _kth_node(split_var, 0, rng.integers(0, n_leaves))
        j = rng.integers(0, p)
        d = _depth(node)
        ps = _p_split(d, alpha, beta, max_depth)
        if ps == 0.0:
            return kind, node, j, np.nan, 0.0, 0.0, ninf
        first, k = _valid_cuts(leaf_of, X, node, j, cuts, cut_start, cut_count)
        if k == 0:
            return kind, node, j, np.nan, 0.0, 0.0, ninf
        value = cuts[first + rng.integers(0, k)]
        n_nog_new = n_nog + 1
        if node > 0:
            sibling = node + 1 if node % 2 == 1 else node - 1
            if split_var[sibling] == LEAF:
                n_nog_new -= 1
        log_qf = math.log(pg) - math.log(n_leaves) - math.log(p) - math.log(k)
        log_qr = math.log(p_prune) - math.log(n_nog_new)
        log_prior = (math.log(ps) + 2.0 * math.log(1.0 - _p_split(d + 1, alpha, beta, max_depth))
                     - math.log(1.0 - ps) - math.log(p) - math.log(cut_count[j]))
        return kind, node, j, value, log_qf, log_qr, log_prior

    if kind == PRUNE:
        node = _kth_node(split_var, 2, rng.integers(0, n_nog))
        j = split_var[node]
        value = split_value[node]
        d = _depth(node)
        ps = _p_split(d, alpha, beta, max_depth)
        first, k = _valid_cuts(leaf_of, X, node, j, cuts, cut_start, cut_count)
        if k == 0:
            return kind, node, j, value, 0.0, 0.0, ninf
        pg_new = 1.0 if n_leaves - 1 == 1 else p_grow
        log_qf = math.log(p_prune) - math.log(n_nog)
        log_qr = math.log(pg_new) - math.log(n_leaves - 1) - math.log(p) - math.log(k)
        log_prior = -(math.log(ps) + 2.0 * math.log(1.0 - _p_split(d + 1, alpha, beta, max_depth))
                      - math.log(1.0 - ps) - math.log(p) - math.log(cut_count[j]))
        return kind, node, j, value, log_qf, log_qr, log_prior

    node = _kth_node(split_var, 1, rng.integers(0, n_internal))
    j_old = split_var[node]
    j = rng.integers(0, p)
    first, k_new = _valid_cuts(leaf_of, X, node, j, cuts, cut_start, cut_count)
    if k_new == 0:
        return kind, node, j, np.nan, 0.0, 0.0, ninf
    _, k_old = _valid_cuts(leaf_of, X, node, j_old, cuts, cut_start, cut_count)
    if k_old == 0:
        return kind, node, j, np.nan, 0.0, 0.0, ninf
    value = cuts[first + rng.integers(0, k_new)]
    base = math.log(p_change) - math.log(n_internal) - math.log(p)
    log_qf = base - math.log(k_new)
    log_qr = base - math.log(k_old)
    log_prior = math.log(cut_count[j_old]) - math.log(cut_count[j])
    return kind, node, j, value, log_qf, log_qr, log_prior


@numba.njit(cache=True)
def _apply_move(split_var, split_value, leaf_value, kind, node, var, value):
    if kind == GROW:
        split_var[node] = var
        split_value[node] = value
        for child in (2 * node + 1, 2 * node + 2):
            split_var[child] = LEAF
            split_value[child] = 0.0
            leaf_value[child] = leaf_value[node]
    elif kind == PRUNE:
        split_var[node] = LEAF
        split_value[node] = 0.0
        leaf_value[node] = 0.5 * (leaf_value[2 * node + 1] + leaf_value[2 * node + 2])
        for child in (2 * node + 1, 2 * node + 2):
            split_var[child] = ABSENT
            leaf_value[child] = 0.0
    else:
        split_var[node] = var
        split_value[node] = value


# ---------------------------------------------------------------------------
# split candidates


@dataclass(frozen=True)
class SplitCandidates:
    """Per-column sorted cut values, stored flat for the kernels."""

    cuts: np.ndarray
    start: np.ndarray
    count: np.ndarray

    @classmethod
    def from_matrix(cls, X: np.ndarray) -> "SplitCandidates":
        X = np.asarray(X, dtype=float)
        columns = []
        for j in range(X.shape[1]):
            uniq = np.unique(X[:, j])
            if uniq.size == 2 and uniq[0] == 0.0 and uniq[1] == 1.0:
                columns.append(np.array([0.5]))
            else:
                # the largest value would leave the right child empty
                columns.append(uniq[:-1])
        count = np.array([c.size for c in columns], dtype=np.int64)
        start = np.concatenate([[0], np.cumsum(count)[:-1]]).astype(np.int64)
        flat = np.concatenate(columns) if columns else np.empty(0)
        return cls(flat.astype(float), start, count)

    def column(self, j: int) -> np.ndarray:
        return self.cuts[self.start[j]:self.start[j] + self.count[j]]


# ---------------------------------------------------------------------------
# public tree API


@dataclass
class RegressionTree:
    split_var: np.ndarray
    split_value: np.ndarray
    leaf_value: np.ndarray

    @classmethod
    def leaf(cls, value: float = 0.0, max_depth: int = DEFAULT_MAX_DEPTH) -> "RegressionTree":
        size = capacity(max_depth)
        split_var = np.full(size, ABSENT, dtype=np.int64)
        split_var[0] = LEAF
        leaf_value = np.zeros(size)
        leaf_value[0] = value
        return cls(split_var, np.zeros(size), leaf_value)

    @classmethod
    def from_nested(cls, spec, max_depth: int = DEFAULT_MAX_DEPTH) -> "RegressionTree":
        """Build from nested tuples ``(var, value, left, right)``; leaves are floats.

        >>> t = RegressionTree.from_nested((0, 0.3, 0.2, 0.7))
        >>> traverse(t, [0.1]), traverse(t, [0.5])
        (0.2, 0.7)
        """
        tree = cls.leaf(0.0, max_depth)
        tree.split_var[0] = ABSENT

        def place(node, sub):
            if node >= tree.split_var.size:
                raise ValueError("tree deeper than max_depth")
            if isinstance(sub, tuple):
                var, value, left, right = sub
                tree.split_var[node] = var
                tree.split_value[node] = value
                place(2 * node + 1, left)
                place(2 * node + 2, right)
            else:
                tree.split_var[node] = LEAF
                tree.leaf_value[node] = float(sub)

        place(0, spec)
        tree.validate()
        return tree

    @property
    def max_depth(self) -> int:
        return _max_depth_of(self.split_var.size)

    def copy(self) -> "RegressionTree":
        return RegressionTree(self.split_var.copy(), self.split_value.copy(), self.leaf_value.copy())

    def is_leaf(self, node: int) -> bool:
        return self.split_var[node] == LEAF

    def leaves(self) -> list[int]:
        return [int(k) for k in np.flatnonzero(self.split_var == LEAF)]

    def internal_nodes(self) -> list[int]:
        return [int(k) for k in np.flatnonzero(self.split_var >= 0)]

    def nog_nodes(self) -> list[int]:
        """Internal nodes whose two children are leaves (candidates for PRUNE)."""
        return [k for k in self.internal_nodes()
                if self.is_leaf(2 * k + 1) and self.is_leaf(2 * k + 2)]

    def depth(self) -> int:
        return max(_depth(k) for k in self.leaves())

    def topology(self) -> tuple:
        """Hashable (node, var, value) description of the split structure."""
        return tuple((k, int(self.split_var[k]), float(self.split_value[k]))
                     for k in self.internal_nodes())

    def validate(self) -> None:
        sv = self.split_var
        if sv[0] == ABSENT:
            raise ValueError("tree has no root")
        for k in range(sv.size):
            present = sv[k] != ABSENT
            if k > 0 and present and sv[(k - 1) // 2] < 0:
                raise ValueError(f"node {k} has a non-internal parent")
            if sv[k] >= 0:
                if 2 * k + 2 >= sv.size:
                    raise ValueError(f"internal node {k} at maximum depth")
                if sv[2 * k + 1] == ABSENT or sv[2 * k + 2] == ABSENT:
                    raise ValueError(f"internal node {k} lacks a child")
                if not np.isfinite(self.split_value[k]):
                    raise ValueError(f"node {k} has a non-finite split value")


@dataclass
class TreeEnsemble:
    trees: list[RegressionTree] = field(default_factory=list)

    def __post_init__(self):
        if not self.trees:
            raise ValueError("an ensemble needs at least one tree")
        sizes = {t.split_var.size for t in self.trees}
        if len(sizes) != 1:
            raise ValueError("ensemble trees must share max_depth")

    @property
    def m(self) -> int:
        return len(self.trees)

    def stacked(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return (np.stack([t.split_var for t in self.trees]),
                np.stack([t.split_value for t in self.trees]),
                np.stack([t.leaf_value for t in self.trees]))

    def __add__(self, other: "TreeEnsemble") -> "TreeEnsemble":
        return TreeEnsemble(self.trees + other.trees)


def traverse(tree: RegressionTree, x: Sequence[float]) -> float:
    """Leaf value reached by row ``x``."""
    x = np.asarray(x, dtype=float)
    return float(tree.leaf_value[_route(tree.split_var, tree.split_value, x, 0)])


def leaf_index(tree: RegressionTree, X: np.ndarray) -> np.ndarray:
    X = np.ascontiguousarray(X, dtype=float)
    out = np.empty(X.shape[0], dtype=np.int64)
    _route_rows(tree.split_var, tree.split_value, X, out)
    return out


def predict_ensemble(ensemble: TreeEnsemble, X: np.ndarray) -> np.ndarray:
    """Sum of member predictions, accumulated in tree order."""
    X = np.ascontiguousarray(np.atleast_2d(X), dtype=float)
    out = np.empty(X.shape[0])
    if X.shape[0] == 0:
        return out
    _predict_forest(*ensemble.stacked(), X, out)
    return out


@dataclass(frozen=True)
class Proposal:
    kind: str
    node: int
    variable: int
    value: float
    log_forward: float
    log_reverse: float
    log_prior_ratio: float
    proposed: RegressionTree

    @property
    def feasible(self) -> bool:
        return np.isfinite(self.log_prior_ratio)

    @property
    def log_proposal_ratio(self) -> float:
        """log q(reverse) - log q(forward), the proposal part of the MH ratio."""
        return self.log_reverse - self.log_forward


def propose_move(
    tree: RegressionTree,
    X: np.ndarray,
    rng: np.random.Generator,
    *,
    candidates: SplitCandidates | None = None,
    alpha: float = 0.95,
    beta: float = 2.0,
    move_probs: tuple[float, float, float] = DEFAULT_MOVE_PROBS,
) -> Proposal:
    """Draw a GROW, PRUNE or CHANGE proposal for ``tree`` on data ``X``.

    The returned proposal carries the forward and reverse transition log
    probabilities and the log prior ratio needed for the Metropolis-Hastings
    acceptance step.  An infeasible draw (no cut value that leaves both
    children non-empty, or the depth limit) has ``feasible == False``.
    """
    X = np.ascontiguousarray(X, dtype=float)
    if candidates is None:
        candidates = SplitCandidates.from_matrix(X)
    leaf_of = leaf_index(tree, X)
    kind, node, var, value, lqf, lqr, lpr = _propose(
        tree.split_var, tree.split_value, leaf_of, X,
        candidates.cuts, candidates.start, candidates.count,
        alpha, beta, tree.max_depth, move_probs[0], move_probs[1], rng,
    )
    proposed = tree.copy()
    if np.isfinite(lpr):
        _apply_move(proposed.split_var, proposed.split_value, proposed.leaf_value,
                    kind, node, var, value)
    return Proposal(MOVE_NAMES[kind], int(node), int(var), float(value),
                    float(lqf), float(lqr), float(lpr), proposed)


def grow(tree: RegressionTree, node: int, var: int, value: float) -> RegressionTree:
    if not tree.is_leaf(node):
        raise ValueError(f"node {node} is not a leaf")
    if 2 * node + 2 >= tree.split_var.size:
        raise ValueError("cannot grow beyond max_depth")
    out = tree.copy()
    _apply_move(out.split_var, out.split_value, out.leaf_value, GROW, node, var, value)
    return out


def prune(tree: RegressionTree, node: int) -> RegressionTree:
    if node not in tree.nog_nodes():
        raise ValueError(f"node {node} does not have two leaf children")
    out = tree.copy()
    _apply_move(out.split_var, out.split_value, out.leaf_value, PRUNE, node, 0, 0.0)
    return out


def change(tree: RegressionTree, node: int, var: int, value: float) -> RegressionTree:
    if tree.split_var[node] < 0:
        raise ValueError(f"node {node} is not internal")
    out = tree.copy()
    _apply_move(out.split_var, out.split_value, out.leaf_value, CHANGE, node, var, value)
    return out
