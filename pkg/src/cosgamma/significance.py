"""P-values for similarity scores and significance-ranked matching.

A match with similarity ``x`` is scored by the right-tail probability of
``x`` under a null mixture fitted to that query's similarity
distribution: ``p = P(X >= x)``.  High similarity means small ``p``.
"""

import math
import sys
import warnings
from dataclasses import dataclass

import numpy as np

from .distributions import mix_sf
from .errors import AssignmentError, DomainError, InputError
from .special import reg_upper_incomplete_gamma

_P_FLOOR = sys.float_info.min


def p_value(m, x):
    """Right-tail p-value of similarity ``x`` under null mixture ``m``."""
    return mix_sf(m, x)


def combine_p_values(ps):
    """Fisher's method: ``stat = -2 sum ln p``, ``p ~ chi2(2k)`` tail.

    Zero p-values are clamped to the smallest positive normal float, with
    a ``RuntimeWarning``.
    """
    p = np.asarray(ps, dtype=float).ravel()
    if p.size == 0:
        raise DomainError("need at least one p-value")
    if np.any(np.isnan(p)) or np.any(p < 0) or np.any(p > 1):
        raise DomainError("p-values must lie in [0, 1]")
    if np.any(p == 0):
        warnings.warn("zero p-value clamped before combining", RuntimeWarning, stacklevel=2)
        p = np.maximum(p, _P_FLOOR)
    stat = float(-2.0 * np.sum(np.log(p)))
    # chi-square with 2k dof: sf(s) = Q(k, s / 2)
    combined = reg_upper_incomplete_gamma(float(p.size), stat / 2.0)
    return stat, float(combined)


@dataclass
class MatchResult:
    best_index: np.ndarray
    similarity: np.ndarray
    p_value: np.ndarray
    combined_stat: float
    combined_p: float
    clamped: bool = False

    def rows(self):
        for q, (j, s, p) in enumerate(zip(self.best_index, self.similarity, self.p_value)):
            yield q, int(j), float(s), float(p)


def p_value_matrix(sims, nulls):
    S = _check_matrix(sims)
    if len(nulls) != S.shape[0]:
        raise InputError(f"{S.shape[0]} queries but {len(nulls)} null models")
    return np.vstack([np.atleast_1d(p_value(m, row)) for m, row in zip(nulls, S)])


def _check_matrix(sims):
    S = np.atleast_2d(np.asarray(sims, dtype=float))
    if S.ndim != 2 or S.shape[0] < 1 or S.shape[1] < 1:
        raise InputError("similarity matrix must be 2-D and non-empty")
    if not np.all(np.isfinite(S)):
        raise InputError("similarity matrix has non-finite entries")
    return S


def best_matches(sims, nulls, one_to_one=False):
    """Pick the most significant candidate for every query.

    Without ``one_to_one`` each query takes its own smallest-p candidate.
    With it, pairs are taken greedily in ascending p order, skipping used
    queries and candidates.  Ties go to the lower candidate index, then
    the lower query index.
    """
    S = _check_matrix(sims)
    P = p_value_matrix(S, nulls)
    nq, nd = S.shape
    if one_to_one:
        if nq > nd:
            raise AssignmentError(f"{nq} queries cannot be matched one-to-one to {nd} candidates")
        qi, cj = np.meshgrid(np.arange(nq), np.arange(nd), indexing="ij")
        order = np.lexsort((qi.ravel(), cj.ravel(), P.ravel()))
        best = np.full(nq, -1)
        used = np.zeros(nd, dtype=bool)
        left = nq
        for flat in order:
            q, j = divmod(int(flat), nd)
            if best[q] >= 0 or used[j]:
                continue
            best[q] = j
            used[j] = True
            left -= 1
            if left == 0:
                break
    else:
        best = np.argmin(P, axis=1)
    rows = np.arange(nq)
    chosen_p = P[rows, best]
    clamped = bool(np.any(chosen_p == 0))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        stat, combined = combine_p_values(chosen_p)
    return MatchResult(best, S[rows, best], chosen_p, stat, combined, clamped)


def assignment_log_p(P, assignment):
    """Sum of ``ln p`` over a query-to-candidate assignment."""
    return float(sum(math.log(max(P[q, j], _P_FLOOR)) for q, j in enumerate(assignment)))
