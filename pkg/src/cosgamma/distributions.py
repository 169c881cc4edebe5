"""Shifted gamma, gamma mixtures, and the vMF-induced cosine density.

A shifted gamma with shape ``alpha``, shift ``c`` and rate ``lam`` has
density

    (x - c)**(alpha - 1) * exp(-lam * (x - c)) * lam**alpha / Gamma(alpha)

on ``x > c``.  Densities here are *not* renormalized to [-1, 1]; use
:func:`mass_outside` to see how much probability falls outside the
cosine range.
"""

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate

from .errors import DomainError
from .rng import as_generator
from .special import incomplete_gamma_pq, log_gamma


@dataclass(frozen=True)
class ShiftedGammaParams:
    alpha: float
    c: float
    lam: float

    def __post_init__(self):
        for name in ("alpha", "c", "lam"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if not (self.alpha > 0 and self.lam > 0 and math.isfinite(self.c)
                and math.isfinite(self.alpha) and math.isfinite(self.lam)):
            raise DomainError(f"invalid shifted gamma parameters {self}")

    @property
    def mean(self):
        return self.c + self.alpha / self.lam

    @property
    def var(self):
        return self.alpha / self.lam**2


@dataclass(frozen=True)
class GammaMixture:
    """Weighted shifted-gamma components, stored in ascending-mean order."""

    weights: tuple
    components: tuple

    def __post_init__(self):
        comps = tuple(self.components)
        w = np.asarray(self.weights, dtype=float)
        if len(comps) == 0 or len(comps) != len(w):
            raise DomainError("mixture needs matching, non-empty weights and components")
        if np.any(~np.isfinite(w)) or np.any(w < 0):
            raise DomainError("mixture weights must be finite and nonnegative")
        total = w.sum()
        if abs(total - 1.0) > 1e-9:
            raise DomainError(f"mixture weights sum to {total!r}, not 1")
        # leave weights that already sum to 1 up to rounding untouched so
        # construction is idempotent
        if abs(total - 1.0) > 8 * np.finfo(float).eps:
            w = w / total
        order = sorted(range(len(comps)), key=lambda i: (comps[i].mean, comps[i].c))
        object.__setattr__(self, "weights", tuple(float(w[i]) for i in order))
        object.__setattr__(self, "components", tuple(comps[i] for i in order))

    @classmethod
    def from_arrays(cls, tau, alpha, c, lam):
        comps = tuple(ShiftedGammaParams(a, ci, l) for a, ci, l in zip(alpha, c, lam))
        return cls(tuple(tau), comps)

    @classmethod
    def single(cls, alpha, c, lam):
        return cls((1.0,), (ShiftedGammaParams(alpha, c, lam),))

    @property
    def n_states(self):
        return len(self.components)

    def arrays(self):
        """Return ``(tau, alpha, c, lam)`` as float arrays."""
        tau = np.array(self.weights)
        alpha = np.array([p.alpha for p in self.components])
        c = np.array([p.c for p in self.components])
        lam = np.array([p.lam for p in self.components])
        return tau, alpha, c, lam


@dataclass(frozen=True)
class VmfCosineParams:
    d: int
    kappa: float

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 2:
            raise DomainError("vMF dimension must be an integer >= 2")
        if not (self.kappa >= 0 and math.isfinite(self.kappa)):
            raise DomainError("vMF concentration must be finite and >= 0")


def _scalar_out(x, out):
    return float(out) if np.ndim(x) == 0 else out


def sg_log_pdf(p, x):
    """Log density of a shifted gamma; ``-inf`` where ``x <= c``."""
    xa = np.asarray(x, dtype=float)
    y = xa - p.c
    out = np.full(y.shape, -np.inf)
    ok = y > 0
    yk = y[ok]
    out[ok] = ((p.alpha - 1.0) * np.log(yk) - p.lam * yk
               + p.alpha * math.log(p.lam) - log_gamma(p.alpha))
    return _scalar_out(x, out)


def sg_pdf(p, x):
    return np.exp(sg_log_pdf(p, x))


def _sg_pq(p, x):
    xa = np.asarray(x, dtype=float)
    y = np.maximum(p.lam * (xa - p.c), 0.0)
    return incomplete_gamma_pq(p.alpha, y)


def sg_cdf(p, x):
    return _scalar_out(x, _sg_pq(p, x)[0])


def sg_sf(p, x):
    return _scalar_out(x, _sg_pq(p, x)[1])


def sg_mean(p):
    return p.mean


def sg_var(p):
    return p.var


def sg_sample(p, n, seed):
    """``n`` draws from the shifted gamma (Marsaglia-Tsang via numpy)."""
    if n < 0:
        raise DomainError("sample size must be nonnegative")
    rng = as_generator(seed)
    return p.c + rng.standard_gamma(p.alpha, size=int(n)) / p.lam


def mix_log_pdf(m, x):
    """log sum_i tau_i G_i(x), evaluated with max-subtraction."""
    xa = np.asarray(x, dtype=float)
    terms = np.stack([math.log(w) + np.asarray(sg_log_pdf(p, xa)) if w > 0
                      else np.full(xa.shape, -np.inf)
                      for w, p in zip(m.weights, m.components)])
    top = terms.max(axis=0)
    finite = np.isfinite(top)
    out = np.full(xa.shape, -np.inf)
    if np.any(finite):
        t = top[finite]
        out[finite] = t + np.log(np.exp(terms[:, finite] - t).sum(axis=0))
    return _scalar_out(x, out)


def mix_pdf(m, x):
    return np.exp(mix_log_pdf(m, x))


def component_pdfs(m, x):
    """Weighted per-state densities ``tau_i G_i(x)``, shape ``(n_states, len(x))``."""
    xa = np.asarray(x, dtype=float)
    return np.stack([w * np.exp(np.asarray(sg_log_pdf(p, xa)))
                     for w, p in zip(m.weights, m.components)])


def mix_cdf(m, x):
    xa = np.asarray(x, dtype=float)
    out = sum(w * np.asarray(_sg_pq(p, xa)[0]) for w, p in zip(m.weights, m.components))
    return _scalar_out(x, np.clip(out, 0.0, 1.0))


def mix_sf(m, x):
    """Right-tail probability, summed from per-component upper incomplete gammas."""
    xa = np.asarray(x, dtype=float)
    out = sum(w * np.asarray(_sg_pq(p, xa)[1]) for w, p in zip(m.weights, m.components))
    return _scalar_out(x, np.clip(out, 0.0, 1.0))


def mix_mean(m):
    return sum(w * p.mean for w, p in zip(m.weights, m.components))


def mix_sample(m, n, seed, return_labels=False):
    """Draw a state from ``tau`` for each sample, then draw from that state."""
    if n < 0:
        raise DomainError("sample size must be nonnegative")
    rng = as_generator(seed)
    n = int(n)
    labels = rng.choice(m.n_states, size=n, p=np.array(m.weights))
    out = np.empty(n)
    for i, p in enumerate(m.components):
        idx = np.flatnonzero(labels == i)
        out[idx] = sg_sample(p, idx.size, rng)
    if return_labels:
        return out, labels
    return out


def mass_outside(m, lo=-1.0, hi=1.0):
    """Probability the untruncated mixture assigns outside ``[lo, hi]``."""
    return float(mix_cdf(m, lo) + mix_sf(m, hi))


@lru_cache(maxsize=256)
def _vmf_log_norm(d, kappa):
    # t = cos(phi) turns (1 - t^2)^((d-3)/2) dt into sin(phi)^(d-2) dphi,
    # which is smooth on [0, pi] for every d >= 2
    f = lambda phi: np.sin(phi) ** (d - 2) * np.exp(kappa * (np.cos(phi) - 1.0))
    val, _ = integrate.quad(f, 0.0, math.pi, epsabs=1e-13, epsrel=1e-12, limit=500)
    return kappa + math.log(val)


def vmf_cos_log_pdf(v, t):
    """Normalized log density of ``t = mu . x`` for ``x`` vMF on the sphere in R^d."""
    ta = np.asarray(t, dtype=float)
    if np.any(np.abs(ta) > 1) or np.any(np.isnan(ta)):
        raise DomainError("cosine similarity must lie in [-1, 1]")
    expo = 0.5 * (v.d - 3)
    with np.errstate(divide="ignore"):
        base = np.log1p(-ta * ta)
    if expo == 0:
        body = np.zeros_like(ta)
    else:
        body = expo * base
    out = body + v.kappa * ta - _vmf_log_norm(int(v.d), float(v.kappa))
    return _scalar_out(t, out)


def vmf_cos_sample(v, n, seed):
    """Rejection sampler for the cosine marginal (Wood's beta envelope)."""
    rng = as_generator(seed)
    n = int(n)
    d1 = v.d - 1.0
    k = float(v.kappa)
    b = d1 / (math.sqrt(4.0 * k * k + d1 * d1) + 2.0 * k)
    x0 = (1.0 - b) / (1.0 + b)
    cst = k * x0 + d1 * math.log(1.0 - x0 * x0)
    out = np.empty(n)
    filled = 0
    while filled < n:
        batch = max(1024, int(1.5 * (n - filled)))
        z = rng.beta(d1 / 2.0, d1 / 2.0, size=batch)
        w = (1.0 - (1.0 + b) * z) / (1.0 - (1.0 - b) * z)
        u = rng.random(batch)
        keep = w[k * w + d1 * np.log(1.0 - x0 * w) - cst >= np.log(u)]
        take = min(keep.size, n - filled)
        out[filled:filled + take] = keep[:take]
        filled += take
    return out


def skewness(samples):
    """Standardized third central moment (population form)."""
    x = np.asarray(samples, dtype=float)
    if x.size < 3:
        raise DomainError("skewness needs at least 3 samples")
    dev = x - x.mean()
    m2 = np.mean(dev**2)
    if not m2 > 0:
        raise DomainError("skewness undefined for zero-variance data")
    return float(np.mean(dev**3) / m2**1.5)
