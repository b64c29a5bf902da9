"""The limit law of free multiplicative products of close-to-one factors.

Free cumulants of the limit have a closed form driven by two constants
(c1, c2) read off the input model; the exp-normalized case c2 = c1^2 is
the positive free multiplicative analogue of the lognormal, whose
logarithm is an explicit free additive convolution: a semicircle plus an
independent-free scaled uniform.  That last fact gives a density route —
solve the semicircular subordination fixed point, invert the Stieltjes
transform — entirely separate from the series route, and the two are
cross-checked against each other in the tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .errors import SolverError, UnsupportedModelError
from .freecalc import CumulantSeq, MomentSeq, cumulants_to_moments, s_series
from .model import ModelSpec

__all__ = [
    "LimitParams",
    "DensityTable",
    "limit_cumulant",
    "limit_moment_sequence",
    "s_transform_consistency",
    "log_law_density",
    "psc_singular_density",
    "psc_singular_quantiles",
]


@dataclass(frozen=True)
class LimitParams:
    """Constants (c1, c2) steering the limit cumulants.

    c1 scales like (first derivative of |g|^2 at 0) x sigma and c2 like
    (second derivative) x sigma^2.  ``sigma_ho`` is set when the
    parameters sit on the exp normalization c2 = c1^2 with c1 >= 0 —
    only then does the log-law density route below apply.  c1 = 0 is
    admitted solely as the degenerate point mass at 1 (it forces every
    cumulant beyond the first to vanish) and requires c2 = 0.
    """

    c1: float
    c2: float
    sigma_ho: float | None = None

    def __post_init__(self):
        if self.c1 == 0 and self.c2 != 0:
            raise ValueError("c1 = 0 is only allowed in the degenerate case c2 = 0")
        if self.sigma_ho is None and self.exp_normalized:
            object.__setattr__(self, "sigma_ho", self.c1 / 2)

    @property
    def exp_normalized(self) -> bool:
        return self.c1 >= 0 and abs(self.c2 - self.c1 * self.c1) <= 1e-12 * max(1.0, self.c1 * self.c1)

    @classmethod
    def from_model(cls, spec: ModelSpec) -> "LimitParams":
        sigma = math.sqrt(spec.xlaw.variance)
        return cls(c1=spec.g.d1 * sigma, c2=spec.g.d2 * sigma * sigma)

    @classmethod
    def from_sigma(cls, sigma: float) -> "LimitParams":
        """Exp-normalized parameters: c1 = 2 sigma, c2 = 4 sigma^2."""
        if sigma < 0:
            raise ValueError("sigma must be nonnegative")
        return cls(c1=2 * sigma, c2=4 * sigma * sigma, sigma_ho=sigma)


def limit_cumulant(p: LimitParams, k: int) -> float:
    """k-th free cumulant of the limit: (k^{k-1}/k!) c1^{2(k-1)} e^{k c2 / 2}."""
    if k < 1:
        raise ValueError("cumulant index must be >= 1")
    return k ** (k - 1) / math.factorial(k) * p.c1 ** (2 * (k - 1)) * math.exp(k / 2 * p.c2)


def limit_moment_sequence(p: LimitParams, order: int) -> MomentSeq:
    """Moments m_1..m_order of the limit law, through the cumulant closed form."""
    kappa = CumulantSeq([limit_cumulant(p, k) for k in range(1, order + 1)])
    return cumulants_to_moments(kappa)


def s_transform_consistency(p: LimitParams, order: int = 8) -> float:
    """Max relative gap between the S-transform of the limit moments and
    its closed form exp(-4 sigma^2 (z + 1/2)), coefficientwise to z^{order-1}.

    The left side walks cumulants -> moments -> series inversion; the
    right side is a bare Taylor expansion.  Nothing is shared between the
    two routes past the parameters themselves.

    Both sides are evaluated in exact rational arithmetic: dilating the
    law by e^{-c2/2} multiplies kappa_k by e^{-k c2/2} and the S-transform
    by e^{c2/2}, which cancels every transcendental factor and leaves
    rational coefficients on both sides (c2 taken at its exact binary
    value).  Doubles could not certify the high-order coefficients — at
    small sigma they are ~1e-8 and round-off in the series inversion is
    itself ~1e-14 — whereas the rational route returns the deviation with
    no round-off at all.
    """
    if not p.exp_normalized:
        raise UnsupportedModelError("closed-form S-transform needs the exp normalization")
    c2 = Fraction(p.c2)
    kappa = CumulantSeq(
        [Fraction(k ** (k - 1), math.factorial(k)) * c2 ** (k - 1) for k in range(1, order + 1)]
    )
    S = s_series(cumulants_to_moments(kappa))
    worst = Fraction(0)
    term = Fraction(1)  # (-c2)^j / j!
    for j in range(order):
        dev = abs(S.coeffs[j] - term)
        if dev:
            worst = max(worst, dev / max(abs(term), Fraction(1, 10**15)))
        term = term * -c2 / (j + 1)
    return float(worst)


class DensityTable:
    """Tabulated absolutely continuous law: grid, pdf, cdf, quantiles.

    Construction validates the table invariants — strictly increasing
    grid, nonnegative pdf, nondecreasing cdf, and total mass within 1e-3
    of 1 (tabulation error budget).  Quantiles invert the normalized cdf
    by monotone interpolation.
    """

    __slots__ = ("grid", "pdf", "cdf")

    def __init__(self, grid, pdf, cdf):
        grid = np.asarray(grid, dtype=float)
        pdf = np.asarray(pdf, dtype=float)
        cdf = np.asarray(cdf, dtype=float)
        if grid.ndim != 1 or grid.size < 2 or not (grid.shape == pdf.shape == cdf.shape):
            raise ValueError("grid, pdf, cdf must be equal-length 1-d arrays")
        if not np.all(np.diff(grid) > 0):
            raise ValueError("grid must be strictly increasing")
        if np.any(pdf < 0):
            raise ValueError("pdf must be nonnegative")
        if np.any(np.diff(cdf) < -1e-12):
            raise ValueError("cdf must be nondecreasing")
        mass = float(np.trapezoid(pdf, grid))
        if abs(mass - 1) > 1e-3 or abs(float(cdf[-1]) - 1) > 1e-3:
            raise ValueError(f"mass {mass} / cdf end {cdf[-1]} not within 1e-3 of 1")
        self.grid, self.pdf, self.cdf = grid, pdf, cdf

    @property
    def mass(self) -> float:
        return float(np.trapezoid(self.pdf, self.grid))

    def expectation(self, fn) -> float:
        """Trapezoid integral of fn against the tabulated density."""
        return float(np.trapezoid(fn(self.grid) * self.pdf, self.grid))

    def moment(self, j: int) -> float:
        return self.expectation(lambda t: t**j)

    @property
    def mean(self) -> float:
        return self.moment(1)

    @property
    def variance(self) -> float:
        mu = self.mean
        return self.expectation(lambda t: (t - mu) ** 2)

    def cdf_at(self, t):
        return np.interp(t, self.grid, self.cdf, left=0.0, right=float(self.cdf[-1]))

    def quantile(self, u):
        u = np.asarray(u, dtype=float)
        if np.any(u <= 0) or np.any(u >= 1):
            raise ValueError("quantile probabilities must lie strictly inside (0, 1)")
        ramp = self.cdf / float(self.cdf[-1])
        # break exactly-flat stretches so the interpolation stays single-valued
        ramp = ramp + np.arange(ramp.size) * 1e-15
        out = np.interp(u, ramp, self.grid)
        return out if out.ndim else float(out)

    def rows(self):
        """(t, pdf, cdf) triples — the CSV serialization order."""
        for t, d, c in zip(self.grid, self.pdf, self.cdf):
            yield float(t), float(d), float(c)


def _uniform_cauchy_transform(w: np.ndarray, half_width: float) -> np.ndarray:
    """Cauchy transform of uniform(-L, L): log((w+L)/(w-L)) / (2L)."""
    return np.log((w + half_width) / (w - half_width)) / (2 * half_width)


_ETA_LADDER = (1e-2, 5e-3, 2.5e-3)


@lru_cache(maxsize=16)
def log_law_density(
    sigma: float,
    n_points: int = 2049,
    pad: float = 0.5,
    plain_iters: int = 800,
    damped_iters: int = 8000,
) -> DensityTable:
    """Density of the log of the exp-normalized limit law.

    That log is the free additive convolution of a semicircle of variance
    4 sigma^2 with a uniform on (-2 sigma^2, 2 sigma^2).  For each grid
    abscissa t the subordination fixed point w = z - 4 sigma^2 G_U(w) is
    solved at z = t + i eta (plain iteration first, 0.5-damped rescue for
    stragglers), the density read off by Stieltjes inversion, and the eta
    ladder extrapolated linearly to eta = 0 — which also cancels the
    first-order mass leak outside the window.
    """
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    if n_points < 33:
        raise ValueError("grid too coarse")
    L = 2 * sigma * sigma
    var_sc = 4 * sigma * sigma
    radius = 4 * sigma + L
    grid = np.linspace(-radius - pad, radius + pad, n_points)
    densities = np.empty((len(_ETA_LADDER), n_points))
    for row, eta in enumerate(_ETA_LADDER):
        z = grid + 1j * eta
        w = z.copy()
        for phase, (iters, damping) in enumerate(((plain_iters, 1.0), (damped_iters, 0.5))):
            for _ in range(iters):
                w_next = w + damping * (z - var_sc * _uniform_cauchy_transform(w, L) - w)
                delta = float(np.max(np.abs(w_next - w)))
                w = w_next
                if delta <= 1e-12:
                    break
            if delta <= 1e-12:
                break
        if delta > 1e-12:
            worst = int(np.argmax(np.abs(z - var_sc * _uniform_cauchy_transform(w, L) - w)))
            raise SolverError(
                f"subordination fixed point stalled at t={grid[worst]:.6g}, eta={eta:g}"
            )
        densities[row] = -_uniform_cauchy_transform(w, L).imag / math.pi
    # least-squares linear fit in eta, evaluated at eta = 0
    etas = np.asarray(_ETA_LADDER)
    design = np.stack([np.ones_like(etas), etas], axis=1)
    coef, *_ = np.linalg.lstsq(design, densities, rcond=None)
    pdf = np.maximum(coef[0], 0.0)
    steps = np.diff(grid) * (pdf[1:] + pdf[:-1]) / 2
    cdf = np.concatenate([[0.0], np.cumsum(steps)])
    return DensityTable(grid, pdf, cdf)


def _require_density_params(p: LimitParams) -> float:
    if not p.exp_normalized or not p.sigma_ho or p.sigma_ho <= 0:
        raise UnsupportedModelError(
            "density route needs exp-normalized parameters with sigma > 0; "
            "off-normalization laws only exist here as moment sequences"
        )
    return p.sigma_ho


def psc_singular_density(p: LimitParams) -> DensityTable:
    """Density table of the singular-value limit: pushforward of the
    log-law through t -> e^{t/2} (exp to reach the limit law itself,
    square root to land on singular values)."""
    sigma = _require_density_params(p)
    log_table = log_law_density(sigma)
    s = np.exp(log_table.grid / 2)
    pdf = log_table.pdf * 2 / s
    return DensityTable(s, pdf, log_table.cdf)


def psc_singular_quantiles(p: LimitParams, probs) -> list:
    """Quantiles of the singular-value limit law at the given probabilities."""
    sigma = _require_density_params(p)
    table = log_law_density(sigma)
    qs = np.atleast_1d(table.quantile(np.asarray(probs, dtype=float)))
    return [float(math.exp(q / 2)) for q in qs]
