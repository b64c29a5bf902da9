"""One-dimensional distribution distances and convergence-rate bookkeeping.

Distances here compare any mix of empirical spectra (atoms with equal
weight) and tabulated densities: Kolmogorov as a sup over the merged
breakpoint set with one-sided limits, r-Wasserstein through the monotone
quantile coupling, and a certified Zolotarev lower bound obtained by
maximizing over explicit members of the smoothness class the bound is
defined against.  The module also owns the piecewise rate table mapping
(r, gamma) to a predicted exponent pair and the log-log regression that
recovers exponents from measured distances.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import SolverError
from .limitlaw import DensityTable
from .regkit import TestFunction

__all__ = [
    "SpectralSample",
    "KWBoundReport",
    "RatePrediction",
    "kolmogorov",
    "wasserstein_r",
    "kw_bound_check",
    "zolotarev_lower_bound",
    "rate_lookup",
    "rate_fit",
]


@dataclass(frozen=True)
class SpectralSample:
    """Finite spectrum with provenance.

    ``values`` are stored sorted ascending (the constructor sorts), each
    carrying weight 1/len.  ``n_source`` and ``N_source`` record which
    product length and matrix size produced the spectrum; zero means
    "not sampled from a matrix model".
    """

    values: tuple[float, ...]
    n_source: int = 0
    N_source: int = 0

    def __post_init__(self) -> None:
        vals = tuple(sorted(float(v) for v in self.values))
        if not vals:
            raise ValueError("a spectral sample needs at least one value")
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("spectral values must be finite")
        object.__setattr__(self, "values", vals)
        for name in ("n_source", "N_source"):
            k = getattr(self, name)
            if k != int(k) or k < 0:
                raise ValueError(f"{name} must be a nonnegative integer")

    @property
    def size(self) -> int:
        return len(self.values)

    def cdf_at(self, t):
        """Right-continuous empirical CDF: share of atoms <= t."""
        arr = np.asarray(self.values)
        out = np.searchsorted(arr, np.asarray(t, dtype=float), side="right") / arr.size
        return out if out.ndim else float(out)

    def cdf_left_at(self, t):
        """Left limit of the empirical CDF: share of atoms strictly < t."""
        arr = np.asarray(self.values)
        out = np.searchsorted(arr, np.asarray(t, dtype=float), side="left") / arr.size
        return out if out.ndim else float(out)

    def quantile(self, u):
        """Left-continuous generalized inverse of the empirical CDF."""
        u = np.asarray(u, dtype=float)
        if np.any(u <= 0.0) or np.any(u >= 1.0):
            raise ValueError("quantile probabilities must lie strictly inside (0, 1)")
        idx = np.clip(np.ceil(u * self.size).astype(int) - 1, 0, self.size - 1)
        out = np.asarray(self.values)[idx]
        return out if out.ndim else float(out)

    def expectation(self, fn) -> float:
        return float(np.mean(fn(np.asarray(self.values))))

    def scaled(self, c: float) -> "SpectralSample":
        """The pushforward under x -> c x, keeping the provenance tags."""
        return SpectralSample(tuple(c * v for v in self.values),
                              self.n_source, self.N_source)


def _coerce(obj):
    """Accept samples, density tables, or raw value sequences."""
    if isinstance(obj, (SpectralSample, DensityTable)):
        return obj
    return SpectralSample(tuple(obj))


def _cdf_functions(obj):
    """(right-limit CDF, left-limit CDF, breakpoints) for either kind."""
    if isinstance(obj, SpectralSample):
        return obj.cdf_at, obj.cdf_left_at, np.asarray(obj.values)
    # a tabulated density has a continuous CDF; normalize away the
    # tabulation mass defect so suprema stay inside [0, 1]
    end = float(obj.cdf[-1])

    def cont(t, _end=end, _obj=obj):
        return np.asarray(_obj.cdf_at(t)) / _end

    return cont, cont, obj.grid


def kolmogorov(a, b) -> float:
    """Sup-distance between the CDFs of ``a`` and ``b``.

    Both one-sided limits are evaluated at every breakpoint of either
    argument; between breakpoints the difference of CDFs is monotone
    (steps are flat, tables are piecewise linear), so the sup over the
    real line is attained on that finite set.
    """
    a, b = _coerce(a), _coerce(b)
    right_a, left_a, pts_a = _cdf_functions(a)
    right_b, left_b, pts_b = _cdf_functions(b)
    pts = np.unique(np.concatenate([pts_a, pts_b]))
    gap_right = np.max(np.abs(np.asarray(right_a(pts)) - np.asarray(right_b(pts))))
    gap_left = np.max(np.abs(np.asarray(left_a(pts)) - np.asarray(left_b(pts))))
    return float(max(gap_right, gap_left))


_QUANTILE_PANELS = 4096


def _mean_quantile_gap(a, b, r: float, panels: int) -> float:
    """Midpoint-rule value of the integral of |Q_a - Q_b|^r over (0, 1)."""
    u = (np.arange(panels) + 0.5) / panels
    return float(np.mean(np.abs(a.quantile(u) - b.quantile(u)) ** r))


def wasserstein_r(a, b, r: float = 1.0) -> float:
    """r-Wasserstein distance through the monotone quantile coupling.

    Two equal-size samples reduce to the sorted pairing, which is exact.
    Any other combination integrates |Q_a - Q_b|^r by the midpoint rule
    on 4096 panels, doubles once, and keeps the Richardson combination
    of the two passes.
    """
    if not (isinstance(r, (int, float)) and math.isfinite(r)) or r < 1:
        raise ValueError("the Wasserstein order r must be a real number >= 1")
    r = float(r)
    a, b = _coerce(a), _coerce(b)
    if (isinstance(a, SpectralSample) and isinstance(b, SpectralSample)
            and a.size == b.size):
        va = np.asarray(a.values)
        vb = np.asarray(b.values)
        return float(np.mean(np.abs(va - vb) ** r) ** (1.0 / r))
    coarse = _mean_quantile_gap(a, b, r, _QUANTILE_PANELS)
    fine = _mean_quantile_gap(a, b, r, 2 * _QUANTILE_PANELS)
    richardson = fine + (fine - coarse) / 3.0
    return float(max(richardson, 0.0) ** (1.0 / r))


class KWBoundReport(NamedTuple):
    """Outcome of the Kolmogorov-vs-Wasserstein comparison."""

    kolmogorov: float
    wasserstein1: float
    bound: float
    holds: bool


def kw_bound_check(sample, ref: DensityTable) -> KWBoundReport:
    """Check K(mu, nu) <= sqrt(2 C W1(mu, nu)) against a bounded density.

    C is the sup of the reference pdf over its grid.  The inequality is
    a theorem for any mu whenever nu has a density bounded by C, so
    ``holds`` failing (beyond a 1e-9 relative guard) flags a distance
    implementation bug, not an interesting distribution pair.
    """
    if not isinstance(ref, DensityTable):
        raise TypeError("the reference measure must be a tabulated density")
    sample = _coerce(sample)
    density_cap = float(np.max(ref.pdf))
    k = kolmogorov(sample, ref)
    w1 = wasserstein_r(sample, ref, 1.0)
    bound = math.sqrt(2.0 * density_cap * w1)
    return KWBoundReport(k, w1, bound, k <= bound * (1.0 + 1e-9))


def _expect(obj, fn) -> float:
    return obj.expectation(fn)


def zolotarev_lower_bound(a, b, r: float, trials: int = 16, seed: int = 0) -> float:
    """Certified lower bound on the order-r Zolotarev distance.

    Every witness is an explicit member of the defining class (vanishing
    derivatives at 0, top-derivative seminorm at most 1): the canonical
    single-kink member, the identity when the class is Lipschitz, and
    ``trials`` random members drawn from per-trial derived seeds.  The
    maximum of |E_a f - E_b f| over admissible f can only undershoot the
    true distance, hence "lower bound".  For r = 1 the bound must also
    sit below the 1-Wasserstein distance (duality); a violation raises.

    The duality guard allows 1e-6 (1 + W1) of slack on top of the 1e-9
    floor: witness expectations integrate against the tabulated density
    (trapezoid) while W1 integrates the quantile gap (midpoint), and on
    stochastically ordered pairs — where the identity witness attains
    W1 exactly — those two discretizations of the same measure disagree
    at the 1e-7 scale.  Genuine implementation bugs overshoot by O(W1).
    """
    if not (isinstance(r, (int, float)) and math.isfinite(r)) or r < 1:
        raise ValueError("the Zolotarev order r must be a real number >= 1")
    if trials < 0 or trials != int(trials):
        raise ValueError("trials must be a nonnegative integer")
    a, b = _coerce(a), _coerce(b)
    ell = math.ceil(r) - 1
    beta = float(r) - ell

    witnesses = [TestFunction.canonical(ell, beta)]
    if ell == 0 and beta == 1.0:
        witnesses.append(TestFunction.identity())
    for t in range(int(trials)):
        rng = np.random.default_rng((int(seed), t))
        witnesses.append(TestFunction.random_member(ell, beta, rng))

    best = max(abs(_expect(a, f.value) - _expect(b, f.value)) for f in witnesses)
    if r == 1:
        w1 = wasserstein_r(a, b, 1.0)
        if best > w1 + 1e-9 + 1e-6 * (1.0 + abs(w1)):
            raise SolverError(
                f"duality violated: Lipschitz witness gap {best} exceeds W1 {w1}")
    return best


@dataclass(frozen=True)
class RatePrediction:
    """A (beta1, beta2) exponent pair with the branch that produced it."""

    beta1: float
    beta2: float
    branch: str
    gamma_crit: float


def rate_lookup(r: float, gamma: float) -> RatePrediction:
    """Predicted convergence exponents n^{-beta1} ln(n)^{beta2}.

    The table is piecewise in r with a gamma threshold per piece: below
    the threshold the smoothness of the profile limits the rate (minus
    branch, beta1 proportional to gamma), above it the concentration
    term does (plus branch, beta1 constant).  Equality takes the minus
    branch — the two branches agree there except for log factors, and
    minus is the conservative reading.
    """
    if not (isinstance(r, (int, float)) and math.isfinite(r)) or r < 1:
        raise ValueError("the Wasserstein order r must be a real number >= 1")
    if not (0.0 < gamma <= 1.0):
        raise ValueError("gamma must lie in (0, 1]")
    r = float(r)
    if r == 1.0:
        crit = 4.0 / 5.0
        minus, plus = (gamma / 8.0, 0.0), (1.0 / 10.0, 0.0)
    elif r < 2.0:
        crit = (r * r + r + 2.0) / (r * r + r + 4.0)
        minus = (gamma / (2.0 * r * r + 2.0 * r + 4.0), 0.0)
        plus = (1.0 / (2.0 * r * r + 2.0 * r + 8.0), 0.0)
    elif r == 2.0:
        crit = 2.0 / 3.0
        minus, plus = (gamma / 8.0, 0.5), (1.0 / 12.0, 0.0)
    elif r < 4.0:
        crit = (r * r + 2.0 * r) / (r * r + r + 4.0)
        minus = (gamma / (2.0 * r * r + 4.0 * r), 0.0)
        plus = (1.0 / (2.0 * r * r + 2.0 * r + 8.0), 0.0)
    elif r == 4.0:
        crit = 1.0
        minus, plus = (gamma / 48.0, 0.0), (1.0 / 48.0, 0.25)
    else:
        crit = 1.0
        minus, plus = (gamma / (12.0 * r), 0.0), (1.0 / (12.0 * r), 0.0)
    branch = "minus" if gamma <= crit else "plus"
    beta1, beta2 = minus if branch == "minus" else plus
    return RatePrediction(beta1, beta2, branch, crit)


def rate_fit(ns, ds, with_log: bool = True):
    """Least-squares exponents from measured distances.

    Fits log d = c - beta1 log n (+ beta2 log log n when ``with_log``)
    and returns (beta1_hat, beta2_hat, r_squared).  The log-log column
    needs every n above 1; beta2_hat is reported as 0 when the column
    is excluded.
    """
    ns = np.asarray(list(ns), dtype=float)
    ds = np.asarray(list(ds), dtype=float)
    if ns.shape != ds.shape or ns.ndim != 1:
        raise ValueError("sizes and distances must be equal-length 1-d sequences")
    if ns.size < 4:
        raise ValueError("rate fitting needs at least 4 points")
    if np.any(np.diff(ns) <= 0):
        raise ValueError("sizes must be strictly increasing")
    if np.any(ds <= 0) or not np.all(np.isfinite(ds)):
        raise ValueError("distances must be positive and finite")
    columns = [np.ones_like(ns), -np.log(ns)]
    if with_log:
        if np.any(ns <= 1):
            raise ValueError("the log-log regressor needs every size above 1")
        columns.append(np.log(np.log(ns)))
    design = np.column_stack(columns)
    y = np.log(ds)
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    residual = y - design @ coef
    total = y - np.mean(y)
    ss_tot = float(total @ total)
    r_squared = 1.0 if ss_tot == 0.0 else 1.0 - float(residual @ residual) / ss_tot
    beta2 = float(coef[2]) if with_log else 0.0
    return float(coef[1]), beta2, r_squared
