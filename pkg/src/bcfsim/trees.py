"""Binary regression trees and Metropolis-Hastings move proposals.

The tree machinery shared by every forest in the package: node/tree/forest
structures, routing (a feature value less than or equal to the cutpoint goes
left), per-feature cutpoint grids, and the Grow / Prune / Change proposal
kernel in the style of Chipman, George & McCulloch (2010), with Grow 0.4,
Prune 0.4, Change 0.2 and no Swap move.

Proposals carry their own log transition-probability ratio and log
tree-prior ratio; the sampler only adds the marginal-likelihood ratio. The
move kind is drawn from the configured probabilities renormalized over the
kinds the current tree structure allows (Grow needs a leaf with a valid
cutpoint, Prune and Change need an internal node), so a root-only tree with
a splittable column always proposes Grow; the renormalizing mass is part of
the transition ratios. The tree prior puts split probability
``base * (1 + depth) ** -power`` on each node and draws the split rule
uniformly over features with at least one valid cutpoint, then uniformly
over that feature's valid cutpoints. Grids are fixed per feature at fit
start: equally spaced points strictly inside the observed min/max, so a
constant column has an empty grid and can never be split on.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np


def depth_split_prob(depth: int, base: float, power: float) -> float:
    """Prior probability that a node at ``depth`` is split: base*(1+d)^-power."""
    if depth < 0:
        raise ValueError(f"depth must be nonnegative, got {depth}")
    if not 0 < base <= 1:
        raise ValueError(f"base must be in (0, 1], got {base}")
    if power < 0:
        raise ValueError(f"power must be nonnegative, got {power}")
    return base * (1.0 + depth) ** -power


@dataclass(frozen=True)
class SplitRule:
    feature: int
    cutpoint: float


class Node:
    """One tree node; a leaf when ``feature`` is None, internal otherwise.

    ``rows`` caches the training-row indices reaching the node and ``wrows``
    the subset with nonzero design weight (identical to ``rows`` for an
    unweighted forest); both are sampler bookkeeping, not part of the tree
    function itself.
    """

    __slots__ = ("depth", "parent", "feature", "cutpoint", "value",
                 "left", "right", "rows", "wrows", "cutinfo")

    def __init__(self, depth=0, parent=None, value=0.0, rows=None):
        self.depth = depth
        self.parent = parent
        self.feature = None
        self.cutpoint = 0.0
        self.value = value
        self.left = None
        self.right = None
        self.rows = rows
        self.wrows = rows
        self.cutinfo = None

    @property
    def is_leaf(self) -> bool:
        return self.feature is None


class DecisionTree:
    def __init__(self, root: Node | None = None, n_features: int | None = None):
        self.root = root if root is not None else Node()
        self.n_features = n_features

    def leaves(self) -> list[Node]:
        out, stack = [], [self.root]
        while stack:
            node = stack.pop()
            if node.is_leaf:
                out.append(node)
            else:
                stack.append(node.right)
                stack.append(node.left)
        return out

    def singly_internal(self) -> list[Node]:
        """Internal nodes whose children are both leaves (Prune/Change targets)."""
        out, stack = [], [self.root]
        while stack:
            node = stack.pop()
            if not node.is_leaf:
                if node.left.is_leaf and node.right.is_leaf:
                    out.append(node)
                stack.append(node.right)
                stack.append(node.left)
        return out

    def leaf_for(self, x) -> Node:
        node = self.root
        while not node.is_leaf:
            node = node.left if x[node.feature] <= node.cutpoint else node.right
        return node


def evaluate_tree(tree: DecisionTree, x) -> float:
    """Value of the unique leaf reached by routing ``x`` down the tree."""
    x = np.asarray(x, dtype=float)
    if tree.n_features is not None and x.shape != (tree.n_features,):
        raise ValueError(
            f"expected {tree.n_features} covariates, got shape {x.shape}"
        )
    return float(tree.leaf_for(x).value)


@dataclass
class Forest:
    """An ordered sum of trees plus the leaf-value prior scale.

    ``leaf_scale`` is the standard deviation of the zero-centered normal
    prior on individual leaf values.
    """

    trees: list
    leaf_scale: float


def evaluate_forest(forest: Forest, x) -> float:
    """Sum of per-tree evaluations; an empty forest evaluates to 0."""
    return float(sum(evaluate_tree(t, x) for t in forest.trees))


def make_cutpoint_grids(X: np.ndarray, count: int) -> list[np.ndarray]:
    """Per-feature grids of ``count`` equally spaced interior cutpoints.

    Points are strictly inside the observed [min, max] of each column, so a
    constant column gets an empty grid.
    """
    grids = []
    for j in range(X.shape[1]):
        lo = float(X[:, j].min())
        hi = float(X[:, j].max())
        if lo == hi:
            grids.append(np.empty(0))
        else:
            grids.append(np.linspace(lo, hi, count + 2)[1:-1])
    return grids


def valid_cutpoints(column, membership, grid) -> np.ndarray:
    """Grid values splitting the member rows into two nonempty children.

    With ties routed left, a cutpoint c is valid iff min <= c < max over the
    member rows. An empty result is legitimate (constant column within the
    node, or a grid that all rows route past).
    """
    column = np.asarray(column, dtype=float)
    membership = np.asarray(membership)
    if membership.size == 0:
        raise ValueError("membership must be nonempty")
    grid = np.asarray(grid, dtype=float)
    vals = column[membership]
    lo, hi = vals.min(), vals.max()
    return grid[(grid >= lo) & (grid < hi)]


class MoveKind(enum.Enum):
    GROW = "grow"
    PRUNE = "prune"
    CHANGE = "change"


@dataclass
class MoveProposal:
    """A proposed tree mutation with its MH correction terms.

    ``log_transition_ratio`` is log q(reverse)/q(forward) and
    ``log_tree_prior_ratio`` is log p(T')/p(T) including the rule prior;
    adding the marginal-likelihood log ratio gives the full acceptance
    exponent. ``rows_left``/``rows_right`` carry the child memberships the
    move would create (Grow and Change only).
    """

    kind: MoveKind
    node: Node
    rule: SplitRule | None
    rows_left: np.ndarray | None
    rows_right: np.ndarray | None
    log_transition_ratio: float
    log_tree_prior_ratio: float


def _node_cutinfo(node, X, grids):
    """Per-feature count of valid cutpoints at a node, plus grid offsets.

    Depends only on the node's fixed row set and the fit-wide grids, so the
    result is cached on the node; ``apply_move`` clears the cache of any
    node whose rows it replaces.
    """
    info = node.cutinfo
    if info is None:
        sub = X[node.rows]
        mins = sub.min(axis=0)
        maxs = sub.max(axis=0)
        counts = np.empty(len(grids), dtype=np.int64)
        starts = np.empty(len(grids), dtype=np.int64)
        for j, grid in enumerate(grids):
            lo = int(np.searchsorted(grid, mins[j], side="left"))
            hi = int(np.searchsorted(grid, maxs[j], side="left"))
            starts[j] = lo
            counts[j] = hi - lo
        info = (counts, starts)
        node.cutinfo = info
    return info


def _log1m(p: float) -> float:
    return math.log1p(-p) if p < 1.0 else -math.inf


def _rows_have_cutpoint(rows, X, grids) -> bool:
    """Whether any feature has a valid cutpoint for this row set."""
    sub = X[rows]
    mins = sub.min(axis=0)
    maxs = sub.max(axis=0)
    for j, grid in enumerate(grids):
        lo = np.searchsorted(grid, mins[j], side="left")
        hi = np.searchsorted(grid, maxs[j], side="left")
        if lo < hi:
            return True
    return False


def _kind_mass(move_probs, grow_ok: bool, prunable: bool) -> float:
    """Total probability mass of the structurally possible move kinds.

    Every call site shares this one arithmetic path so the forward and
    reverse masses of the same tree state come out bit-identical, keeping
    paired Grow/Prune correction terms exact negatives of each other.
    """
    p_grow, p_prune, p_change = move_probs
    mass = 0.0
    if grow_ok:
        mass += p_grow
    if prunable:
        mass += p_prune + p_change
    return mass


def propose_move(tree: DecisionTree, X: np.ndarray, grids, rng,
                 move_probs=(0.4, 0.4, 0.2), base: float = 0.95,
                 power: float = 2.0, leaves=None, singly=None) -> MoveProposal | None:
    """Draw one Grow/Prune/Change proposal for a tree with cached row sets.

    The kind is drawn from ``move_probs`` restricted to the kinds the
    current structure allows: Grow needs a leaf with at least one valid
    cutpoint, Prune and Change need an internal node. A root-only tree on
    splittable columns therefore always proposes Grow. Returns None when no
    kind is possible (root-only tree, no valid cutpoints anywhere) or when
    the Grow leaf draw lands on a leaf none of whose features admit a valid
    cutpoint; the sampler treats either as a rejected step.

    ``leaves``/``singly`` let a caller that already walked the tree pass the
    leaf and singly-internal node lists in; both are recomputed when absent.
    """
    if leaves is None:
        leaves = tree.leaves()
    if singly is None:
        singly = tree.singly_internal()
    flags = [bool(_node_cutinfo(leaf, X, grids)[0].any()) for leaf in leaves]
    grow_ok = any(flags)
    prunable = bool(singly)
    mass = _kind_mass(move_probs, grow_ok, prunable)
    if mass == 0.0:
        return None
    p_grow, p_prune, _ = move_probs
    u = rng.random() * mass
    if not prunable:
        kind = MoveKind.GROW
    elif not grow_ok:
        kind = MoveKind.PRUNE if u < p_prune else MoveKind.CHANGE
    elif u < p_grow:
        kind = MoveKind.GROW
    elif u < p_grow + p_prune:
        kind = MoveKind.PRUNE
    else:
        kind = MoveKind.CHANGE
    if kind is MoveKind.GROW:
        return _propose_grow(X, grids, rng, move_probs, base, power,
                             leaves, singly, flags, mass)
    if kind is MoveKind.PRUNE:
        return _propose_prune(X, grids, rng, move_probs, base, power,
                              leaves, singly, mass)
    return _propose_change(X, grids, rng, singly)


def _propose_grow(X, grids, rng, move_probs, base, power, leaves, singly,
                  flags, mass):
    idx = int(rng.integers(len(leaves)))
    leaf = leaves[idx]
    if not flags[idx]:
        # the drawn leaf has no valid cutpoint on any feature: automatic
        # rejection (some other leaf is splittable, or Grow was never drawn)
        return None
    counts, starts = _node_cutinfo(leaf, X, grids)
    splittable = np.flatnonzero(counts)
    feature = int(splittable[int(rng.integers(splittable.size))])
    n_cut = int(counts[feature])
    cut = float(grids[feature][int(starts[feature]) + int(rng.integers(n_cut))])
    mask = X[leaf.rows, feature] <= cut
    rows_left = leaf.rows[mask]
    rows_right = leaf.rows[~mask]

    d = leaf.depth
    p_d = depth_split_prob(d, base, power)
    p_d1 = depth_split_prob(d + 1, base, power)
    n_splittable = int(splittable.size)
    log_prior = (
        math.log(p_d) + 2.0 * _log1m(p_d1) - _log1m(p_d)
        - math.log(n_splittable) - math.log(n_cut)
    )

    # Singly-internal count of the tree the grow would create: the leaf
    # becomes one, and its parent stops being one if the sibling is a leaf.
    si_after = len(singly) + 1
    if leaf.parent is not None:
        sibling = (leaf.parent.right if leaf.parent.left is leaf
                   else leaf.parent.left)
        if sibling.is_leaf:
            si_after -= 1
    # Kind mass of the grown tree: it can always prune, and can grow again
    # if an untouched leaf is splittable or either new child is.
    grow_ok_after = (any(flags[:idx]) or any(flags[idx + 1:])
                     or _rows_have_cutpoint(rows_left, X, grids)
                     or _rows_have_cutpoint(rows_right, X, grids))
    mass_after = _kind_mass(move_probs, grow_ok_after, True)
    p_grow, p_prune, _ = move_probs
    log_forward = (math.log(p_grow) - math.log(mass) - math.log(len(leaves))
                   - math.log(n_splittable) - math.log(n_cut))
    log_reverse = (math.log(p_prune) - math.log(mass_after)
                   - math.log(si_after))

    return MoveProposal(
        kind=MoveKind.GROW,
        node=leaf,
        rule=SplitRule(feature, cut),
        rows_left=rows_left,
        rows_right=rows_right,
        log_transition_ratio=log_reverse - log_forward,
        log_tree_prior_ratio=log_prior,
    )


def _propose_prune(X, grids, rng, move_probs, base, power, leaves, singly,
                   mass):
    node = singly[int(rng.integers(len(singly)))]
    counts, _ = _node_cutinfo(node, X, grids)
    n_splittable = int(np.count_nonzero(counts))
    n_cut = int(counts[node.feature])

    d = node.depth
    p_d = depth_split_prob(d, base, power)
    p_d1 = depth_split_prob(d + 1, base, power)
    log_prior = -(
        math.log(p_d) + 2.0 * _log1m(p_d1) - _log1m(p_d)
        - math.log(n_splittable) - math.log(n_cut)
    )

    n_leaves_after = len(leaves) - 1
    # Kind mass of the pruned tree: the merged leaf straddles the removed
    # cutpoint, so that cutpoint stays valid and Grow remains possible;
    # Prune and Change survive unless the node was the root.
    mass_after = _kind_mass(move_probs, True, node.parent is not None)
    p_grow, p_prune, _ = move_probs
    log_forward = math.log(p_prune) - math.log(mass) - math.log(len(singly))
    log_reverse = (math.log(p_grow) - math.log(mass_after)
                   - math.log(n_leaves_after)
                   - math.log(n_splittable) - math.log(n_cut))

    return MoveProposal(
        kind=MoveKind.PRUNE,
        node=node,
        rule=None,
        rows_left=None,
        rows_right=None,
        log_transition_ratio=log_reverse - log_forward,
        log_tree_prior_ratio=log_prior,
    )


def _propose_change(X, grids, rng, singly):
    node = singly[int(rng.integers(len(singly)))]
    counts, starts = _node_cutinfo(node, X, grids)
    splittable = np.flatnonzero(counts)
    feature = int(splittable[int(rng.integers(splittable.size))])
    n_cut = int(counts[feature])
    cut = float(grids[feature][int(starts[feature]) + int(rng.integers(n_cut))])
    mask = X[node.rows, feature] <= cut
    rows_left = node.rows[mask]
    rows_right = node.rows[~mask]

    # Rule proposal matches the rule prior, so the two ratios are equal and
    # opposite: only the cutpoint-count asymmetry between old and new feature
    # enters, and it cancels in the acceptance exponent. The kind mass drops
    # out as well: a Change cannot alter whether the tree admits a Grow.
    # When neither child is splittable, no grid point falls strictly inside
    # either child's value range on any feature, so every valid rule at the
    # node reproduces the same partition; and when a new rule does move rows,
    # the child receiving rows from both sides of the old cutpoint is
    # splittable at that old cutpoint.
    n_cut_old = int(counts[node.feature])
    log_transition = math.log(n_cut) - math.log(n_cut_old)

    return MoveProposal(
        kind=MoveKind.CHANGE,
        node=node,
        rule=SplitRule(feature, cut),
        rows_left=rows_left,
        rows_right=rows_right,
        log_transition_ratio=log_transition,
        log_tree_prior_ratio=-log_transition,
    )


def apply_move(tree: DecisionTree, proposal: MoveProposal) -> tuple:
    """Mutate the tree per an accepted proposal; returns nodes needing new
    leaf values (their ``wrows`` caches are the caller's responsibility)."""
    node = proposal.node
    if proposal.kind is MoveKind.GROW:
        node.feature = proposal.rule.feature
        node.cutpoint = proposal.rule.cutpoint
        node.left = Node(node.depth + 1, parent=node, rows=proposal.rows_left)
        node.right = Node(node.depth + 1, parent=node, rows=proposal.rows_right)
        return (node.left, node.right)
    if proposal.kind is MoveKind.PRUNE:
        node.feature = None
        node.left = None
        node.right = None
        return (node,)
    node.feature = proposal.rule.feature
    node.cutpoint = proposal.rule.cutpoint
    node.left.rows = proposal.rows_left
    node.right.rows = proposal.rows_right
    node.left.cutinfo = None
    node.right.cutinfo = None
    return (node.left, node.right)


def structural_equal(a: DecisionTree, b: DecisionTree) -> bool:
    """Node-by-node topology and split-rule equality (leaf values ignored)."""

    def rec(x: Node, y: Node) -> bool:
        if x.is_leaf != y.is_leaf:
            return False
        if x.is_leaf:
            return True
        if x.feature != y.feature or x.cutpoint != y.cutpoint:
            return False
        return rec(x.left, y.left) and rec(x.right, y.right)

    return rec(a.root, b.root)
