"""Finite random-matrix realizations of the factor model, plus exact checks.

Two kinds of object live here and they deserve different treatment.  The
operator identities — the block-Hermitization cosine formula, the simplex
expansion of a matrix-exponential difference, and the doubled-matrix
product identity — hold at every finite size, so their check functions
compute both sides independently and return a residual that callers may
assert at machine-level thresholds.  Statements that lean on freeness, by
contrast, are only asymptotically true for sampled matrices; the partial
product inequality is therefore evaluated twice, once in an exactly-free
surrogate through the closed-form factor moments and once as a seeded
Monte-Carlo experiment whose violation rate is reported, never asserted
here.

Sampling is deterministic and thread-agnostic: every factor owns a
generator keyed by ``(seed, *index)``, so a parallel map over trials or
grid points reproduces the serial stream exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateModelError, SizeLimitError
from .metrics import SpectralSample
from .model import GFunc, ModelSpec, g_expectation, gsq_moments

__all__ = [
    "MatrixEnsembleSpec",
    "TraceState",
    "PartialProductReport",
    "factor_stream",
    "sample_factor",
    "product_singular_values",
    "hermitization_check",
    "duhamel_check",
    "partial_product_check",
    "ampliation_check",
]

_MODES = ("gue", "haar_conjugated_diagonal")
_GL_ORDER = 24
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(_GL_ORDER)
_GL_NODES = 0.5 * (_GL_NODES + 1.0)  # shifted to [0, 1]
_GL_WEIGHTS = 0.5 * _GL_WEIGHTS
_EXPANSION_BATCH = 32768
_MAX_TRACE_RETRIES = 8


@dataclass(frozen=True)
class MatrixEnsembleSpec:
    """How to draw one N x N matrix factor.

    ``gue`` draws a Gaussian Hermitian matrix scaled so the spectrum
    follows the semicircle of the given variance as N grows, and is
    therefore tied to the semicircle base law.  ``haar_conjugated_diagonal``
    conjugates i.i.d. atoms by a Haar unitary, realizing any atomic base
    law exactly (the sampled spectrum *is* a draw from the atom law).
    """

    N: int
    xlaw: object
    mode: str
    seed: int

    def __post_init__(self):
        if not isinstance(self.N, int) or self.N < 2:
            raise ValueError("matrix size must be an integer >= 2")
        if self.mode not in _MODES:
            raise ValueError(f"unknown ensemble mode {self.mode!r}")
        if self.mode == "gue" and self.xlaw.kind != "semicircle":
            raise ValueError("gue mode realizes only the semicircle law")
        if self.mode == "haar_conjugated_diagonal" and not self.xlaw.is_atomic:
            raise ValueError("haar-conjugated diagonal mode needs an atomic law")
        if not isinstance(self.seed, int) or not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit nonnegative integer")


class TraceState:
    """The normalized trace, our finite-size stand-in for the model state.

    Tr/dim is the same formula whether it acts on an N x N matrix or on
    the 2N x 2N doubled blocks, so a single object covers the base state
    and its block extension.  ``lp_norm`` is the Schatten p-norm taken
    against this trace, (tr (a*a)^{p/2})^{1/p}, evaluated through
    singular values.
    """

    def __call__(self, a) -> complex:
        a = np.asarray(a)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError("trace needs a square matrix")
        return complex(np.trace(a) / a.shape[0])

    def lp_norm(self, a, p: float) -> float:
        if not p >= 1:
            raise ValueError("schatten exponent must be >= 1")
        s = np.linalg.svd(np.asarray(a), compute_uv=False)
        return float(np.mean(s**p) ** (1.0 / p))


def factor_stream(seed: int, *index: int) -> np.random.Generator:
    """Independent generator for one task, keyed by (seed, *index).

    Seed sequences hash the whole key, so streams for different indices
    never overlap and the draw order inside one stream is unaffected by
    how many other streams exist — this is what makes sampling identical
    under any thread count.
    """
    return np.random.default_rng((int(seed),) + tuple(int(i) for i in index))


def sample_factor(spec: MatrixEnsembleSpec, rng: np.random.Generator) -> np.ndarray:
    """One Hermitian factor drawn from the ensemble through ``rng``."""
    N = spec.N
    if spec.mode == "gue":
        sigma = math.sqrt(spec.xlaw.variance)
        G = rng.standard_normal((N, N)) + 1j * rng.standard_normal((N, N))
        # entry variance sigma^2/N => spectral law -> semicircle(sigma^2)
        return sigma * (G + G.conj().T) / (2.0 * math.sqrt(N))
    atoms = np.asarray(spec.xlaw.atoms, dtype=float)
    weights = np.asarray(spec.xlaw.weights, dtype=float)
    d = atoms[rng.choice(len(atoms), size=N, p=weights / weights.sum())]
    G = rng.standard_normal((N, N)) + 1j * rng.standard_normal((N, N))
    Q, R = np.linalg.qr(G)
    U = Q * (np.diagonal(R) / np.abs(np.diagonal(R)))
    conjugated = (U * d) @ U.conj().T
    # resymmetrize: the matmul leaves ~1e-16 skew that would otherwise
    # make the advertised "Hermitian factor" contract only approximate
    return (conjugated + conjugated.conj().T) / 2.0


def _profile_factor(g: GFunc, x: np.ndarray, root_n: float) -> np.ndarray:
    """g(x / sqrt(n)) by spectral calculus on a Hermitian x.

    A constant profile short-circuits to the exact identity matrix: that
    keeps the trivial-model invariant (all singular values exactly one)
    free of eigendecomposition rounding.
    """
    if g.kind == "polynomial" and len(g.coeffs) == 1:
        return np.eye(x.shape[0], dtype=complex)
    w, V = np.linalg.eigh(x)
    vals = np.asarray([g.value(float(t) / root_n) for t in w])
    return (V * vals) @ V.conj().T


def product_singular_values(spec: MatrixEnsembleSpec, g: GFunc, n: int) -> SpectralSample:
    """Singular values of the n-fold product of profiled factors.

    Factor j is drawn from stream ``(seed, j)``, pushed through g at
    scale sqrt(n) in its own eigenbasis, and multiplied in order; the
    sorted singular values come back tagged with their provenance.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    root_n = math.sqrt(n)
    prod = np.eye(spec.N, dtype=complex)
    for j in range(n):
        x = sample_factor(spec, factor_stream(spec.seed, j))
        prod = prod @ _profile_factor(g, x, root_n)
    s = np.linalg.svd(prod, compute_uv=False)
    return SpectralSample(tuple(float(v) for v in s), n_source=n, N_source=spec.N)


def hermitization_check(X, u: float) -> float:
    """Gap between the two routes to the cosine of a doubled matrix.

    The left route builds H = [[0, X], [X*, 0]], exponentiates i*u*H
    through its Hermitian eigendecomposition, and takes the normalized
    trace over the full 2N block; the right route averages
    cos(u * singular value) over the spectrum of X.  The two agree as an
    operator identity, so the returned |difference| is pure linear
    algebra noise — callers hold it to 1e-10 * N.
    """
    X = np.asarray(X, dtype=complex)
    if X.ndim != 2 or X.shape[0] != X.shape[1]:
        raise ValueError("hermitization needs a square matrix")
    if not np.isfinite(X).all():
        raise ValueError("matrix entries must be finite")
    N = X.shape[0]
    zero = np.zeros((N, N), dtype=complex)
    H = np.block([[zero, X], [X.conj().T, zero]])
    lam = np.linalg.eigvalsh(H)
    lhs = np.sum(np.exp(1j * u * lam)) / (2 * N)
    rhs = np.mean(np.cos(u * np.linalg.svd(X, compute_uv=False)))
    return float(abs(lhs - rhs))


def _simplex_rule(k: int):
    """Nodes/weights integrating over {a_0..a_k >= 0, sum = 1} in da_0..da_{k-1}.

    The unit cube maps onto the simplex by repeatedly splitting off a
    fraction of what remains: a_j = u_j * r_j with r_{j+1} = r_j (1 - u_j),
    whose Jacobian is the running product of the remainders.  Tensorized
    Gauss-Legendre on the cube then integrates polynomials-times-
    exponentials essentially exactly (the rule reproduces the simplex
    volume 1/k! to machine precision).
    """
    grids = np.meshgrid(*([_GL_NODES] * k), indexing="ij")
    us = np.stack([grid.ravel() for grid in grids], axis=1)
    wgrids = np.meshgrid(*([_GL_WEIGHTS] * k), indexing="ij")
    wts = np.prod(np.stack([grid.ravel() for grid in wgrids], axis=1), axis=1)
    alphas = np.empty((us.shape[0], k + 1))
    remaining = np.ones(us.shape[0])
    for j in range(k):
        alphas[:, j] = us[:, j] * remaining
        wts = wts * remaining
        remaining = remaining * (1.0 - us[:, j])
    alphas[:, k] = remaining
    return alphas, wts


def _batch_expm(w: np.ndarray, V: np.ndarray, alphas: np.ndarray) -> np.ndarray:
    """exp(alpha * A) for a vector of alphas, A Hermitian = V diag(w) V*."""
    phases = np.exp(alphas[:, None] * w[None, :])
    return np.einsum("ij,bj,kj->bik", V, phases, V.conj())


def duhamel_check(X, Y, m: int) -> float:
    """Residual of the m-term simplex expansion of e^{X+Y} - e^X.

    Each order-k term integrates e^{a_0 X} Y e^{a_1 X} Y ... Y e^{a_k X}
    over the standard simplex, and the order-(m+1) remainder replaces the
    last exponential by e^{a_{m+1}(X+Y)}; their sum reproduces the
    exponential difference exactly, so the spectral-norm gap returned
    here measures only quadrature and rounding.  Cost is the sting:
    the remainder alone needs 24^(m+1) nodes, hence the small-size gate.
    """
    X = np.asarray(X, dtype=complex)
    Y = np.asarray(Y, dtype=complex)
    if X.shape != Y.shape or X.ndim != 2 or X.shape[0] != X.shape[1]:
        raise ValueError("operands must be square matrices of equal size")
    N = X.shape[0]
    if N > 8:
        raise SizeLimitError("expansion quadrature is gated at N <= 8")
    if not isinstance(m, int) or m < 0:
        raise ValueError("expansion depth must be a nonnegative integer")
    if m > 3:
        raise ValueError("expansion depth is capped at 3")
    for A in (X, Y):
        scale = max(1.0, float(np.max(np.abs(A))))
        if np.max(np.abs(A - A.conj().T)) > 1e-12 * scale:
            raise ValueError("operands must be Hermitian")

    wX, VX = np.linalg.eigh(X)
    wS, VS = np.linalg.eigh(X + Y)
    lhs = (VS * np.exp(wS)) @ VS.conj().T - (VX * np.exp(wX)) @ VX.conj().T

    expansion = np.zeros((N, N), dtype=complex)
    for k in range(1, m + 2):
        alphas, wts = _simplex_rule(k)
        tail_is_sum = k == m + 1
        for lo in range(0, alphas.shape[0], _EXPANSION_BATCH):
            a = alphas[lo : lo + _EXPANSION_BATCH]
            wt = wts[lo : lo + _EXPANSION_BATCH]
            M = _batch_expm(wX, VX, a[:, 0])
            for t in range(1, k + 1):
                M = np.matmul(M, Y)
                if t == k and tail_is_sum:
                    M = np.matmul(M, _batch_expm(wS, VS, a[:, t]))
                else:
                    M = np.matmul(M, _batch_expm(wX, VX, a[:, t]))
            expansion += np.einsum("b,bik->ik", wt, M)
    return float(np.linalg.norm(lhs - expansion, ord=2))


@dataclass(frozen=True)
class PartialProductReport:
    """Outcome of the two-route partial-product norm comparison.

    ``surrogate_ok`` is the exactly-free route and should simply be true;
    the Monte-Carlo fields describe sampled matrices, where freeness only
    holds asymptotically, so a small ``violation_rate`` at a slack just
    above one is the expected picture rather than a bug.  ``worst_ratio``
    is the largest observed left side over right side before slack.
    """

    n: int
    p: int
    trials: int
    slack: float
    surrogate_ok: bool
    checks: int
    violations: int
    violation_rate: float
    worst_ratio: float


def partial_product_check(
    spec: MatrixEnsembleSpec,
    g: GFunc,
    n: int,
    p: int,
    trials: int,
    slack: float = 1.01,
) -> PartialProductReport:
    """Compare partial-product norms against the mean-deflated full norm.

    The claim under test: for the Schatten p-norm against the normalized
    trace, ||pi_i|| <= ||pi_n|| / |tr(F_{i+1}) ... tr(F_n)| where pi_i is
    the product of the first i profiled factors.  Route one evaluates the
    p = 2 case in the exactly-free limit, where both sides have closed
    forms (||pi_i||_2^2 is the i-th power of the factor's mean square);
    route two samples matrices at finite N and counts how often the
    inequality fails with an extra ``slack`` factor on the right.  Factors
    whose trace lands at numerical zero are redrawn from retry-indexed
    streams a bounded number of times; a model that keeps producing them
    is reported degenerate.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    if not isinstance(p, int) or p < 2 or p % 2:
        raise ValueError("p must be a positive even integer")
    if trials < 0:
        raise ValueError("trials must be nonnegative")
    if not slack >= 1:
        raise ValueError("slack must be >= 1")

    model = ModelSpec(spec.xlaw, g)
    m1 = abs(g_expectation(model, n))
    m2 = float(gsq_moments(model, n, 1).moment(1))
    surrogate_ok = True
    for i in range(1, n + 1):
        lhs = m2 ** (i / 2.0)
        rhs = math.inf if (m1 == 0 and i < n) else m2 ** (n / 2.0) / m1 ** (n - i)
        if lhs > rhs * (1 + 1e-9):
            surrogate_ok = False

    state = TraceState()
    root_n = math.sqrt(n)
    checks = violations = 0
    worst = 0.0
    for t in range(trials):
        factors = []
        traces = []
        for j in range(n):
            for retry in range(_MAX_TRACE_RETRIES):
                x = sample_factor(spec, factor_stream(spec.seed, t, j, retry))
                F = _profile_factor(g, x, root_n)
                tau = state(F)
                if abs(tau) > 1e-12 * max(1.0, float(np.max(np.abs(F)))):
                    break
            else:
                raise DegenerateModelError(
                    f"factor trace stayed at numerical zero through "
                    f"{_MAX_TRACE_RETRIES} redraws (trial {t}, factor {j})"
                )
            factors.append(F)
            traces.append(tau)
        norms = []
        prod = np.eye(spec.N, dtype=complex)
        for F in factors:
            prod = prod @ F
            norms.append(state.lp_norm(prod, p))
        suffix = 1.0 + 0.0j
        bounds = [None] * n  # bounds[i-1] = ||pi_n|| / |tr_{i+1} ... tr_n|
        for i in range(n, 0, -1):
            bounds[i - 1] = norms[-1] / abs(suffix)
            suffix *= traces[i - 1]
        for i in range(n - 1):  # i = n is an identity, not evidence
            checks += 1
            ratio = norms[i] / bounds[i]
            worst = max(worst, ratio)
            if ratio > slack:
                violations += 1
    rate = violations / checks if checks else 0.0
    return PartialProductReport(
        n=n,
        p=p,
        trials=trials,
        slack=slack,
        surrogate_ok=surrogate_ok,
        checks=checks,
        violations=violations,
        violation_rate=rate,
        worst_ratio=worst,
    )


def ampliation_check(xs, eps) -> float:
    """Residual of the doubled-matrix product identity.

    Doubling sends x to diag(x, x*); J swaps the two blocks.  Multiplying
    doubled matrices with J inserted after the i-th factor whenever
    eps_i = 1 stays block-structured: each factor enters starred or plain
    according to the parity of the J's before it, and a final J survives
    iff the total count is odd.  Both sides are multiplied out and the
    largest entrywise deviation returned.
    """
    xs = [np.asarray(x, dtype=complex) for x in xs]
    eps = list(eps)
    m = len(xs)
    if m == 0 or len(eps) != m:
        raise ValueError("need one exponent bit per matrix")
    if m > 5:
        raise SizeLimitError("doubled-product check is gated at 5 factors")
    if any(e not in (0, 1) for e in eps):
        raise ValueError("exponent bits must be 0 or 1")
    N = xs[0].shape[0]
    if any(x.ndim != 2 or x.shape != (N, N) for x in xs):
        raise ValueError("matrices must be square and of equal size")

    zero = np.zeros((N, N), dtype=complex)
    eye = np.eye(N, dtype=complex)
    J = np.block([[zero, eye], [eye, zero]])

    lhs = np.eye(2 * N, dtype=complex)
    for x, e in zip(xs, eps):
        lhs = lhs @ np.block([[x, zero], [zero, x.conj().T]])
        if e:
            lhs = lhs @ J

    top = eye.copy()
    bottom = eye.copy()
    parity = 0
    for x, e in zip(xs, eps):
        top = top @ (x if parity % 2 == 0 else x.conj().T)
        bottom = bottom @ (x.conj().T if parity % 2 == 0 else x)
        parity += e
    rhs = np.block([[top, zero], [zero, bottom]])
    if parity % 2:
        rhs = rhs @ J
    return float(np.max(np.abs(lhs - rhs)))
