"""Cosine similarities from a random hierarchy of cluster centres.

A root vector drawn from U(-1, 1)^n is split ``depth`` times; each split
replaces a vector ``x`` by ``degree`` children ``eta * x + u`` with fresh
``u ~ U(-1, 1)^n``.  The leaves are normalized and compared with a query
vector (the first leaf by default, or the root).

Random streams: the top of the tree (down to a frontier generation) is
drawn level by level from stream ``(seed, 0)``; the subtree below frontier
node ``b`` is drawn level by level from stream ``(seed, 1, b)``.  The
frontier sits just high enough that each subtree has at most
``BLOCK_LEAVES`` leaves, so memory stays bounded and the output depends
only on the configuration.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, SizeError
from .rng import child_generator

BLOCK_LEAVES = 4096
QUERY_MODES = ("first-leaf", "root")


@dataclass(frozen=True)
class HierarchyConfig:
    depth: int
    eta: float
    degree: int = 2
    dim: int = 384
    seed: int = 1
    query: str = "first-leaf"
    sample_cap: int = 2**21

    def __post_init__(self):
        if self.depth < 1 or self.degree < 1:
            raise DomainError("depth and degree must be >= 1")
        if self.dim < 2:
            raise DomainError("dimension must be >= 2")
        if not math.isfinite(self.eta):
            raise DomainError("eta must be finite")
        if self.query not in QUERY_MODES:
            raise DomainError(f"query must be one of {QUERY_MODES}")

    @property
    def n_leaves(self):
        return self.degree ** self.depth


@dataclass
class LabeledSimilarities:
    """Similarities to the query, each tagged with a tree level.

    ``levels[j]`` is the number of splits between leaf ``j`` and its last
    common ancestor with the first leaf: 0 for the first leaf itself, 1
    for its siblings, up to ``depth`` for leaves that share only the root.
    """

    sims: np.ndarray
    levels: np.ndarray

    def __post_init__(self):
        if len(self.sims) != len(self.levels):
            raise ValueError("sims and levels must have equal length")

    def __len__(self):
        return len(self.sims)

    def drop_first(self):
        return LabeledSimilarities(self.sims[1:], self.levels[1:])


def leaf_levels(n_leaves, degree):
    """Level of the last common ancestor of each leaf with leaf 0."""
    j = np.arange(n_leaves, dtype=np.int64)
    levels = np.zeros(n_leaves, dtype=np.int64)
    if degree == 1:
        return levels
    rest = j.copy()
    while np.any(rest > 0):
        nz = rest > 0
        levels[nz] += 1
        rest[nz] //= degree
    return levels


def expected_level_counts(depth, degree):
    """Leaves per level: one at level 0, ``(k - 1) k**(l - 1)`` at level ``l``."""
    counts = [1] + [(degree - 1) * degree ** (l - 1) for l in range(1, depth + 1)]
    return np.array(counts, dtype=np.int64)


def _grow(x, levels, eta, degree, rng):
    for _ in range(levels):
        x = eta * np.repeat(x, degree, axis=0)
        x += rng.uniform(-1.0, 1.0, size=x.shape)
    return x


def _unit_rows(x):
    return x / np.linalg.norm(x, axis=1, keepdims=True)


def simulate(cfg):
    """Run the hierarchy and return leaf-to-query cosine similarities."""
    if cfg.n_leaves > cfg.sample_cap:
        raise SizeError(f"{cfg.degree}^{cfg.depth} = {cfg.n_leaves} leaves exceeds "
                        f"the cap of {cfg.sample_cap}")
    k = cfg.degree
    if k == 1:
        sub_depth = cfg.depth
    else:
        sub_depth = min(cfg.depth, int(math.floor(math.log(BLOCK_LEAVES, k) + 1e-9)))
    top_depth = cfg.depth - sub_depth
    top_rng = child_generator(cfg.seed, 0)
    root = top_rng.uniform(-1.0, 1.0, size=(1, cfg.dim))
    frontier = _grow(root, top_depth, cfg.eta, k, top_rng)

    per_block = k ** sub_depth
    sims = np.empty(cfg.n_leaves)
    q = None
    if cfg.query == "root":
        q = _unit_rows(root)[0]
    for b in range(frontier.shape[0]):
        leaves = _unit_rows(_grow(frontier[b:b + 1], sub_depth, cfg.eta, k,
                                  child_generator(cfg.seed, 1, b)))
        if q is None:
            q = leaves[0].copy()
        sims[b * per_block:(b + 1) * per_block] = leaves @ q
    np.clip(sims, -1.0, 1.0, out=sims)
    return LabeledSimilarities(sims, leaf_levels(cfg.n_leaves, k))


def level_histogram(ls, n_bins, lo=-1.0, hi=1.0):
    """Counts per (level, bin) over ``[lo, hi]``.

    Returns ``(levels, counts, edges)`` with ``counts[r]`` the histogram of
    level ``levels[r]``; only levels that occur are listed.
    """
    if n_bins < 1:
        raise DomainError("n_bins must be >= 1")
    edges = np.linspace(lo, hi, n_bins + 1)
    sims = np.asarray(ls.sims)
    lv = np.asarray(ls.levels)
    present = np.unique(lv)
    bins = np.clip(np.searchsorted(edges, sims, side="right") - 1, 0, n_bins - 1)
    counts = np.zeros((present.size, n_bins), dtype=np.int64)
    rows = np.searchsorted(present, lv)
    np.add.at(counts, (rows, bins), 1)
    return present, counts, edges
