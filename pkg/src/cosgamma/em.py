"""Expectation / conditional-maximization fitting of shifted gamma mixtures.

One ECM iteration is

1. E-step: responsibilities ``gamma[t, i] = tau_i G_i(x_t) / P(x_t)``.
2. ``tau_i = sum_t gamma[t, i] / n``.
3. For every state, in this order:

   * ``c_i``: root of ``sum_t gamma[t, i] ((1 - alpha_i) / (x_t - c_i) + lam_i)``
     with ``alpha_i`` and ``lam_i`` held fixed (skipped when ``alpha_i <= 1``);
   * ``kappa_i``: inverse of the gamma-weighted mean of ``x_t - c_i``;
   * ``alpha_i``: root of the profile score with ``lam = alpha * kappa``
     substituted, which is strictly decreasing because
     ``trigamma(a) > 1 / a``;
   * ``lam_i = alpha_i * kappa_i``.

Each conditional update maximizes the expected complete-data
log-likelihood over its block, so the observed log-likelihood never
decreases.  ``fit`` drives the iteration with an optional warm start
(most iterations on a strided subsample) and optional SQUAREM
extrapolation, which keeps the monotonicity guarantee by only accepting
extrapolated points that beat the plain two-step result.
"""

import logging
import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .distributions import GammaMixture, ShiftedGammaParams, mass_outside
from .errors import FitError, InputError, TooFewSamplesError
from .roots import bisect_decreasing, expand_bracket
from .special import digamma, log_gamma, trigamma

log = logging.getLogger(__name__)

ALPHA_BOUNDS = (1e-6, 1e6)
_C_SKIP_ALPHA = 1.0 + 1e-6
_EMPTY_MASS = 1e-8
# block proportions tried when starting a mixture: weights ~ r**j
INIT_RATIOS = (1.0, 0.5, 0.25, 0.125)


@dataclass
class ScoreSample:
    """One-dimensional similarity scores with an optional validity interval."""

    values: np.ndarray
    bounds: tuple = (-1.0, 1.0)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).ravel()
        if not np.all(np.isfinite(v)):
            bad = int(np.flatnonzero(~np.isfinite(v))[0])
            raise InputError(f"non-finite score at index {bad}")
        if self.bounds is not None:
            lo, hi = self.bounds
            outside = (v < lo) | (v > hi)
            if np.any(outside):
                bad = int(np.flatnonzero(outside)[0])
                raise InputError(f"score {v[bad]!r} at index {bad} outside {self.bounds}")
        self.values = v

    def __len__(self):
        return self.values.size


@dataclass(frozen=True)
class FitConfig:
    n_states: int = 1
    max_iters: int = 200
    rel_ll_tol: float = 1e-8
    warm_start: bool = True
    warm_fraction_iters: float = 0.95
    warm_data_stride: int = 20
    bisection_tol: float = 1e-10
    c_margin: float = 1e-6
    seed: int = 0
    accelerate: bool = True
    init_screen_iters: int = 10

    def __post_init__(self):
        if self.n_states < 1:
            raise ValueError("n_states must be >= 1")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if not 0.0 < self.warm_fraction_iters < 1.0:
            raise ValueError("warm_fraction_iters must lie in (0, 1)")
        if self.warm_data_stride < 1:
            raise ValueError("warm_data_stride must be >= 1")
        if self.rel_ll_tol < 0 or self.bisection_tol <= 0 or self.c_margin <= 0:
            raise ValueError("tolerances must be positive")


@dataclass
class FitReport:
    """Result of :func:`fit`.

    ``per_iter_ll`` holds the mean per-sample log-likelihood after every
    iteration, on whichever data the iteration used.  Entries before
    ``warm_switch_iter`` belong to the warm (subsampled) phase.
    ``regime_starts`` lists every index at which the likelihood is allowed
    to drop: the start, the warm-to-full switch, and any component
    re-initialization.  ``rejected_steps`` counts updates discarded because
    rounding made the computed likelihood fall below the current value.
    """

    model: GammaMixture
    log_likelihood: float
    iterations_run: int
    converged: bool
    mass_outside: float
    per_iter_ll: list
    warm_switch_iter: int
    n_samples: int
    regime_starts: list = field(default_factory=list)
    c_clamps: int = 0
    reinitialized: list = field(default_factory=list)
    rejected_steps: int = 0
    elapsed_s: float = 0.0
    config: FitConfig = field(default_factory=FitConfig)

    @property
    def mean_log_likelihood(self):
        return self.log_likelihood / self.n_samples

    @property
    def bic(self):
        return bic(self.log_likelihood, self.model.n_states, self.n_samples)

    def max_regime_decrease(self):
        """Largest drop in ``per_iter_ll`` between iterations of one regime."""
        worst = 0.0
        starts = set(self.regime_starts)
        for k in range(1, len(self.per_iter_ll)):
            if k in starts:
                continue
            worst = max(worst, self.per_iter_ll[k - 1] - self.per_iter_ll[k])
        return worst


def bic(log_likelihood, n_states, n_samples):
    """``k ln n - 2 LL`` with ``k = 3 s + (s - 1)`` free parameters."""
    k = 3 * n_states + (n_states - 1)
    return k * math.log(n_samples) - 2.0 * log_likelihood


def _values(data):
    if isinstance(data, ScoreSample):
        return data.values
    return np.asarray(data, dtype=float).ravel()


# --- E-step -----------------------------------------------------------------

def _log_joint(x, tau, alpha, c, lam):
    out = np.empty((x.size, tau.size))
    for i in range(tau.size):
        y = x - c[i]
        const = (math.log(tau[i]) if tau[i] > 0 else -np.inf) \
            + alpha[i] * math.log(lam[i]) - log_gamma(alpha[i])
        col = out[:, i]
        if y.min() > 0:
            col[:] = (alpha[i] - 1.0) * np.log(y) - lam[i] * y + const
        else:
            col[:] = -np.inf
            ok = y > 0
            yk = y[ok]
            col[ok] = (alpha[i] - 1.0) * np.log(yk) - lam[i] * yk + const
    return out


def _e_step(x, theta):
    """Responsibilities, total log-likelihood and per-row log densities."""
    lj = _log_joint(x, *theta)
    if lj.shape[1] == 1:
        row = lj[:, 0]
        gamma = np.ones_like(lj)
    else:
        top = lj.max(axis=1)
        with np.errstate(invalid="ignore"):
            gamma = np.exp(lj - top[:, None])
        tot = gamma.sum(axis=1)
        gamma /= tot[:, None]
        row = top + np.log(tot)
    if not np.all(np.isfinite(row)):
        bad = int(np.flatnonzero(~np.isfinite(row))[0])
        raise FitError(f"sample {bad} (x={x[bad]!r}) lies below every component shift")
    return gamma, float(row.sum()), row


def e_step(m, data):
    """Responsibility matrix, shape ``(n_samples, n_states)``, rows summing to 1."""
    return _e_step(_values(data), m.arrays())[0]


def log_likelihood(m, data):
    return _e_step(_values(data), m.arrays())[1]


# --- M-step pieces ----------------------------------------------------------

def update_tau(r):
    w = np.asarray(r, dtype=float).sum(axis=0)
    return w / w.sum()


def _state_slice(x, r, i):
    g = np.asarray(r)[:, i]
    sel = g > 0
    if sel.all():
        return x, g
    return x[sel], g[sel]


def weighted_kappa(r, data, i, c_i):
    """Inverse of the responsibility-weighted mean of ``x - c_i``."""
    xi, gi = _state_slice(_values(data), r, i)
    w = gi.sum()
    if not w > 0:
        raise FitError(f"state {i} has no responsibility mass")
    y = xi - c_i
    if y.min() <= 0:
        raise FitError(f"state {i}: shift {c_i!r} is not below its data")
    return float(w / np.dot(gi, y))


def alpha_score(r, data, i, c_i, kappa_i, alpha):
    """The profile score in ``alpha`` (``lam`` eliminated), summed over samples."""
    xi, gi = _state_slice(_values(data), r, i)
    y = xi - c_i
    per = np.log(y) - kappa_i * y + math.log(alpha) + 1.0 + math.log(kappa_i) - digamma(alpha)
    return float(np.dot(gi, per))


def _solve_alpha(mean_log_scaled, tol):
    # mean_log_scaled = E_gamma[ln(kappa (x - c))] <= 0; root of
    # ln(a) - digamma(a) + mean_log_scaled
    def f(a):
        return math.log(a) - digamma(a) + mean_log_scaled, 1.0 / a - trigamma(a)

    bracket = expand_bracket(lambda a: f(a)[0], 1.0, *ALPHA_BOUNDS)
    if bracket is None:
        raise FitError(f"alpha score has no root in {ALPHA_BOUNDS} "
                       f"(mean log-ratio {mean_log_scaled!r})")
    lo, hi = bracket
    if lo == hi:
        return lo
    return bisect_decreasing(f, lo, hi, tol, with_derivative=True)


def update_alpha(r, data, i, c_i, kappa_i, tol=1e-10):
    """Root of the profile score in ``alpha`` by bracket doubling then bisection."""
    if not kappa_i > 0:
        raise FitError("kappa must be positive")
    xi, gi = _state_slice(_values(data), r, i)
    w = gi.sum()
    mean_log = np.dot(gi, np.log(xi - c_i)) / w + math.log(kappa_i)
    return _solve_alpha(mean_log, tol)


def update_lambda(alpha_hat, kappa_i):
    return alpha_hat * kappa_i


def c_score(r, data, i, alpha_i, lam_i, c):
    """``sum_t gamma[t, i] ((1 - alpha_i) / (x_t - c) + lam_i)``."""
    xi, gi = _state_slice(_values(data), r, i)
    return float(np.dot(gi, (1.0 - alpha_i) / (xi - c) + lam_i))


def _solve_c(xi, gi, w, alpha_i, lam_i, c_current, margin, tol):
    if alpha_i <= _C_SKIP_ALPHA:
        return c_current, False
    x_min = xi.min()
    span = max(xi.max() - x_min, 1e-12)
    lo = x_min - 10.0 * span
    hi = x_min - margin * span
    if c_current is not None and c_current > hi:
        hi = c_current
    k = (1.0 - alpha_i) / w

    def h(c):
        inv = 1.0 / (xi - c)
        gi_inv = gi * inv
        return k * gi_inv.sum() + lam_i, k * np.dot(gi_inv, inv)

    if h(lo)[0] <= 0:
        return lo, True
    if h(hi)[0] >= 0:
        return hi, True
    return bisect_decreasing(h, lo, hi, tol, with_derivative=True, x0=c_current), False


def update_c(r, data, i, alpha_i, lam_i, c_current=None, margin=1e-6, tol=1e-10):
    """Shift update for state ``i`` with ``alpha_i``, ``lam_i`` held fixed.

    Returns ``(c, clamped)``.  For ``alpha_i <= 1`` the score is not
    decreasing and the current shift is returned unchanged.  ``clamped``
    is true when the root lies outside the search bracket and the nearest
    endpoint was returned instead.
    """
    xi, gi = _state_slice(_values(data), r, i)
    w = gi.sum()
    if not w > 0:
        raise FitError(f"state {i} has no responsibility mass")
    return _solve_c(xi, gi, w, alpha_i, lam_i, c_current, margin, tol)


# --- full iterations --------------------------------------------------------

@dataclass
class _StepInfo:
    clamps: int = 0
    reinit: list = field(default_factory=list)
    rejected: int = 0


def _reinit_state(x, row, theta, i):
    tau, alpha, c, lam = (a.copy() for a in theta)
    x_star = x[int(np.argmin(row))]
    sd = x.std()
    alpha[i] = 4.0
    lam[i] = 4.0 / sd
    c[i] = x_star - sd
    tau[i] = 1.0 / tau.size
    tau /= tau.sum()
    return tau, alpha, c, lam


def _m_step(x, gamma, row, theta, cfg, info):
    tau_old, alpha, c, lam = theta
    n, s = gamma.shape
    w_all = gamma.sum(axis=0)
    tau = w_all / w_all.sum()
    alpha = alpha.copy()
    c = c.copy()
    lam = lam.copy()
    empty = []
    for i in range(s):
        if w_all[i] < _EMPTY_MASS * n:
            empty.append(i)
            continue
        xi, gi = _state_slice(x, gamma, i)
        w = w_all[i]
        c[i], clamped = _solve_c(xi, gi, w, alpha[i], lam[i], c[i],
                                 cfg.c_margin, cfg.bisection_tol)
        info.clamps += clamped
        y = xi - c[i]
        kappa = w / np.dot(gi, y)
        mean_log = np.dot(gi, np.log(y)) / w + math.log(kappa)
        alpha[i] = _solve_alpha(mean_log, cfg.bisection_tol)
        lam[i] = alpha[i] * kappa
    theta = (tau, alpha, c, lam)
    for i in empty:
        theta = _reinit_state(x, row, theta, i)
        info.reinit.append(i)
    return theta


def em_step(m, data, cfg=None):
    """One ECM iteration; returns the updated (canonically ordered) mixture."""
    cfg = cfg or FitConfig(n_states=m.n_states)
    x = _values(data)
    theta = m.arrays()
    gamma, _, row = _e_step(x, theta)
    new = _m_step(x, gamma, row, theta, cfg, _StepInfo())
    return GammaMixture.from_arrays(*new)


# --- initialization ---------------------------------------------------------

def init_mixture(data, n_states, seed=0, proportions=None):
    """Moment-matched starting mixture from contiguous quantile blocks.

    The sorted data are cut into ``n_states`` blocks (equal counts unless
    ``proportions`` is given).  Each block gets ``c = min - std`` (floored
    at ``global_min - span / 2``) and shape/rate matched to the mean and
    variance of ``x - c``.  Weights start uniform.  ``seed`` is accepted
    for interface symmetry; the result depends only on the data.
    """
    x = np.sort(_values(data))
    n = x.size
    if n < 2 or x[-1] == x[0]:
        raise FitError("cannot initialize on zero-variance data")
    if proportions is None:
        proportions = np.full(n_states, 1.0 / n_states)
    cuts = np.round(np.cumsum(proportions)[:-1] * n).astype(int)
    blocks = np.split(x, cuts)
    if any(b.size == 0 for b in blocks):
        raise TooFewSamplesError("not enough samples for the requested states")
    span = x[-1] - x[0]
    floor = x[0] - 0.5 * span
    tau, alpha, c, lam = [], [], [], []
    for j, b in enumerate(blocks):
        pool = b
        step = 1
        # (near) zero-variance block: borrow spread from neighbours
        while pool.std() <= 1e-12 * span:
            lo_j, hi_j = max(0, j - step), min(len(blocks), j + step + 1)
            pool = np.concatenate(blocks[lo_j:hi_j])
            step += 1
        sd = pool.std()
        c0 = max(b.min() - sd, floor)
        mean_y = b.mean() - c0
        a0 = mean_y**2 / sd**2
        tau.append(1.0 / n_states)
        alpha.append(a0)
        c.append(c0)
        lam.append(a0 / mean_y)
    return GammaMixture.from_arrays(tau, alpha, c, lam)


# --- driver -----------------------------------------------------------------

def geometric_proportions(n_states, ratio):
    w = ratio ** np.arange(n_states, dtype=float)
    return w / w.sum()


def screen_inits(x, cfg):
    """Pick a starting mixture by short runs from several block layouts.

    Candidates come from :func:`init_mixture` with geometric block
    proportions (``INIT_RATIOS``; ratio 1 is the equal-count split).  Each
    runs ``init_screen_iters`` iterations on every ``warm_data_stride``-th
    *sorted* sample, so the choice does not depend on the data order.
    Returns ``(start, screened)`` where ``screened`` lists
    ``(ratio, mean_ll)`` per candidate.
    """
    s = cfg.n_states
    base = np.sort(x)[::max(1, cfg.warm_data_stride)]
    if base.size < 10 * s:
        base = np.sort(x)
    if s == 1 or cfg.init_screen_iters <= 0:
        return init_mixture(x, s, cfg.seed), []
    best, best_ll, screened = None, -np.inf, []
    for ratio in INIT_RATIOS:
        try:
            m0 = init_mixture(base, s, cfg.seed, proportions=geometric_proportions(s, ratio))
            theta = _cover(base, m0.arrays(), cfg.c_margin)
            theta, _, _, ll = _Phase(base, cfg, [], _StepInfo(), []).run(
                theta, cfg.init_screen_iters)
        except FitError as exc:
            log.debug("init ratio %s rejected: %s", ratio, exc)
            continue
        screened.append((ratio, ll / base.size))
        if ll > best_ll:
            best, best_ll = theta, ll
    if best is None:
        raise FitError("no initialization candidate could be fitted")
    return GammaMixture.from_arrays(*best), screened


def _pack(theta):
    tau, alpha, c, lam = theta
    return np.concatenate([np.log(np.maximum(tau, 1e-300)), np.log(alpha), c, np.log(lam)])


def _unpack(v, s):
    lt = v[:s]
    tau = np.exp(lt - lt.max())
    tau /= tau.sum()
    return tau, np.exp(v[s:2 * s]), v[2 * s:3 * s].copy(), np.exp(v[3 * s:])


class _Phase:
    """Iterates on one dataset, appending mean log-likelihoods to ``history``."""

    def __init__(self, x, cfg, history, info, regime_starts):
        self.x = x
        self.n = x.size
        self.cfg = cfg
        self.history = history
        self.info = info
        self.regime_starts = regime_starts

    def _step(self, theta, gamma, row):
        before = len(self.info.reinit)
        new = _m_step(self.x, gamma, row, theta, self.cfg, self.info)
        g, ll, r = _e_step(self.x, new)
        return new, g, ll, r, len(self.info.reinit) > before

    def _converged(self, old, new):
        # strict, so rel_ll_tol=0 runs the whole budget
        return abs(new - old) < self.cfg.rel_ll_tol * max(1.0, abs(old))

    def run(self, theta, budget):
        gamma, ll, row = _e_step(self.x, theta)
        self.regime_starts.append(len(self.history))
        prev = ll / self.n
        step_max = 1.0
        for it in range(budget):
            if self.cfg.accelerate:
                step = self._squarem(theta, gamma, row, step_max)
            else:
                step = self._step(theta, gamma, row)
            new_theta, new_gamma, new_ll, new_row, reset = step[:5]
            if self.cfg.accelerate:
                step_max = step[5]
            if reset or new_ll >= ll:
                theta, gamma, ll, row = new_theta, new_gamma, new_ll, new_row
            else:
                # rounding near a fixed point can lower the computed
                # likelihood; keep the current point instead
                self.info.rejected += 1
                log.debug("rejected step %d: total log-likelihood drop %.3g", it, ll - new_ll)
            cur = ll / self.n
            if reset:
                self.regime_starts.append(len(self.history))
            self.history.append(cur)
            if not reset and self._converged(prev, cur):
                return theta, it + 1, True, ll
            prev = cur
        return theta, budget, False, ll

    def _squarem(self, theta0, gamma0, row0, step_max):
        th1, g1, ll1, r1, reset1 = self._step(theta0, gamma0, row0)
        if reset1:
            return th1, g1, ll1, r1, True, 1.0
        th2, g2, ll2, r2, reset2 = self._step(th1, g1, r1)
        if reset2:
            return th2, g2, ll2, r2, True, 1.0
        s = theta0[0].size
        p0, p1, p2 = _pack(theta0), _pack(th1), _pack(th2)
        r = p1 - p0
        v = p2 - 2.0 * p1 + p0
        nv = math.sqrt(np.dot(v, v))
        if not nv > 0 or not np.all(np.isfinite(v)):
            return th2, g2, ll2, r2, False, step_max
        step = max(1.0, min(step_max, math.sqrt(np.dot(r, r)) / nv))
        if step == step_max:
            step_max *= 4.0
        if step > 1.0:
            cand = _unpack(p0 + 2.0 * step * r + step * step * v, s)
            if np.all(np.isfinite(np.concatenate(cand))):
                try:
                    gc, llc, rc = _e_step(self.x, cand)
                except FitError:
                    llc = -np.inf
                if llc >= ll2:
                    return cand, gc, llc, rc, False, step_max
            if step == step_max / 4.0:
                step_max = max(1.0, step_max / 4.0)
        return th2, g2, ll2, r2, False, step_max


def _cover(x, theta, margin):
    """Lower the smallest shift if any sample falls below every component."""
    tau, alpha, c, lam = theta
    x_min = x.min()
    if c.min() < x_min:
        return theta
    c = c.copy()
    i = int(np.argmin(c))
    span = max(x.max() - x_min, 1e-12)
    c[i] = x_min - margin * span
    return tau, alpha, c, lam


def fit(data, cfg=None, init=None):
    """Fit a shifted gamma mixture.

    With ``cfg.warm_start`` the first ``warm_fraction_iters`` of the
    iteration budget run on every ``warm_data_stride``-th sample (in the
    given order); the remaining budget runs on all samples.  Each phase
    stops early once the mean log-likelihood changes by less than
    ``rel_ll_tol`` relative.
    """
    cfg = cfg or FitConfig()
    x = _values(data)
    if not np.all(np.isfinite(x)):
        raise InputError("scores must be finite")
    s = cfg.n_states
    if x.size < 10 * s:
        raise TooFewSamplesError(f"need at least {10 * s} samples for {s} states, got {x.size}")
    t0 = time.perf_counter()
    history, regime_starts = [], []
    info = _StepInfo()

    warm = cfg.warm_start and cfg.warm_data_stride > 1
    x_warm = x[::cfg.warm_data_stride] if warm else None
    if warm and x_warm.size < 10 * s:
        warm = False
    if init is None:
        init, _ = screen_inits(x, cfg)
    theta = _cover(x_warm if warm else x, init.arrays(), cfg.c_margin)

    used = 0
    if warm:
        warm_budget = max(1, int(math.floor(cfg.warm_fraction_iters * cfg.max_iters)))
        theta, used, _, _ = _Phase(x_warm, cfg, history, info, regime_starts).run(theta, warm_budget)
        theta = _cover(x, theta, cfg.c_margin)
        log.debug("warm phase: %d iterations on %d samples", used, x_warm.size)
    switch = len(history)
    budget = max(1, cfg.max_iters - used)
    theta, ran, converged, ll = _Phase(x, cfg, history, info, regime_starts).run(theta, budget)

    model = GammaMixture.from_arrays(*theta)
    return FitReport(
        model=model,
        log_likelihood=ll,
        iterations_run=used + ran,
        converged=converged,
        mass_outside=mass_outside(model),
        per_iter_ll=history,
        warm_switch_iter=switch,
        n_samples=x.size,
        regime_starts=sorted(set(regime_starts)),
        c_clamps=info.clamps,
        reinitialized=info.reinit,
        rejected_steps=info.rejected,
        elapsed_s=time.perf_counter() - t0,
        config=cfg,
    )


def config_dict(cfg):
    return asdict(cfg)
