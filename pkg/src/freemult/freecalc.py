"""Free-probability calculus on truncated sequences.

Moment and cumulant sequences, the moment<->cumulant triangular recursion,
additive and multiplicative free convolution, S-transform series, and the
partition-sum route to cumulants of n-fold free products.

All series arithmetic is pure Python over whatever scalar type the caller
supplies, so `fractions.Fraction` inputs stay exact end to end — that is the
exactness switch the tests use. Floats and complex numbers work the same way.
"""

from __future__ import annotations

import functools
from collections import Counter
from dataclasses import dataclass
from math import prod
from typing import Sequence

from .errors import OrderViolationError, SingularTransformError, SizeLimitError
from .ncpart import MAX_POINTS, iter_k_equal, iter_nc, kreweras

MAX_ORDER = 16
DEFAULT_ORDER = 8


def _check_order(order: int) -> None:
    if not 1 <= order <= MAX_ORDER:
        raise SizeLimitError(f"sequence order {order} outside 1..{MAX_ORDER}")


@dataclass(frozen=True)
class MomentSeq:
    """Moments m_1..m_K of a (possibly signed) distribution.

    With ``law=True`` the sequence is declared to come from a genuine
    probability law and the variance inequality m_2 >= m_1^2 is enforced
    (up to a relative 1e-12 slack so float round-off cannot reject an
    honest law).
    """

    values: tuple
    law: bool = False

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(self.values))
        _check_order(len(self.values))
        if self.law and len(self.values) >= 2:
            m1, m2 = self.values[0], self.values[1]
            if m2 - m1 * m1 < -1e-12 * max(1.0, abs(m2)):
                raise ValueError(f"not a law: m2={m2} < m1^2={m1 * m1}")

    @property
    def order(self) -> int:
        return len(self.values)

    def moment(self, k: int):
        if not 1 <= k <= self.order:
            raise OrderViolationError(f"moment index {k} outside 1..{self.order}")
        return self.values[k - 1]

    def truncated(self, order: int) -> "MomentSeq":
        if order > self.order:
            raise OrderViolationError(f"cannot extend order {self.order} to {order}")
        return MomentSeq(self.values[:order])


@dataclass(frozen=True)
class CumulantSeq:
    """Free cumulants kappa_1..kappa_K."""

    values: tuple

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(self.values))
        _check_order(len(self.values))

    @property
    def order(self) -> int:
        return len(self.values)

    def cumulant(self, k: int):
        if not 1 <= k <= self.order:
            raise OrderViolationError(f"cumulant index {k} outside 1..{self.order}")
        return self.values[k - 1]


class PowerSeries:
    """Truncated power series c_0 + c_1 z + ... + c_K z^K, generic scalars.

    Binary operations truncate to the smaller order. Nothing here assumes
    floats: Fraction and complex coefficients flow through unchanged.
    """

    __slots__ = ("coeffs",)

    def __init__(self, coeffs: Sequence):
        self.coeffs = tuple(coeffs)
        if not self.coeffs:
            raise ValueError("empty coefficient list")

    @property
    def order(self) -> int:
        return len(self.coeffs) - 1

    def __eq__(self, other) -> bool:
        return isinstance(other, PowerSeries) and self.coeffs == other.coeffs

    def __repr__(self) -> str:
        return f"PowerSeries({list(self.coeffs)})"

    def __add__(self, other: "PowerSeries") -> "PowerSeries":
        n = min(self.order, other.order)
        return PowerSeries([self.coeffs[j] + other.coeffs[j] for j in range(n + 1)])

    def __sub__(self, other: "PowerSeries") -> "PowerSeries":
        n = min(self.order, other.order)
        return PowerSeries([self.coeffs[j] - other.coeffs[j] for j in range(n + 1)])

    def __mul__(self, other: "PowerSeries") -> "PowerSeries":
        n = min(self.order, other.order)
        out = [0] * (n + 1)
        for i, a in enumerate(self.coeffs[: n + 1]):
            for j in range(min(n - i, other.order) + 1):
                out[i + j] = out[i + j] + a * other.coeffs[j]
        return PowerSeries(out)

    def scale(self, c) -> "PowerSeries":
        return PowerSeries([c * a for a in self.coeffs])

    def truncated(self, order: int) -> "PowerSeries":
        if order >= self.order:
            return self
        return PowerSeries(self.coeffs[: order + 1])

    def shift_up(self) -> "PowerSeries":
        """Multiply by z (order grows by one)."""
        return PowerSeries((0, *self.coeffs))

    def shift_down(self) -> "PowerSeries":
        """Divide by z; requires a vanishing constant term."""
        if self.coeffs[0] != 0:
            raise ValueError("constant term must vanish to divide by z")
        return PowerSeries(self.coeffs[1:])

    def derivative(self) -> "PowerSeries":
        if self.order == 0:
            return PowerSeries([0 * self.coeffs[0]])
        return PowerSeries([j * c for j, c in enumerate(self.coeffs)][1:])

    def reciprocal(self) -> "PowerSeries":
        c0 = self.coeffs[0]
        if c0 == 0:
            raise SingularTransformError("reciprocal of a series with zero constant term")
        inv0 = 1 / c0
        out = [inv0]
        for n in range(1, self.order + 1):
            acc = 0
            for j in range(1, min(n, self.order) + 1):
                acc = acc + self.coeffs[j] * out[n - j]
            out.append(-inv0 * acc)
        return PowerSeries(out)

    def padded(self, order: int) -> "PowerSeries":
        """Extend with zero coefficients up to the requested order."""
        if order <= self.order:
            return self
        zero = 0 * self.coeffs[0]
        return PowerSeries(self.coeffs + (zero,) * (order - self.order))

    def compose(self, inner: "PowerSeries") -> "PowerSeries":
        """self(inner(z)); inner must have no constant term."""
        if inner.coeffs[0] != 0:
            raise ValueError("composition needs inner(0) = 0")
        n = min(self.order, inner.order)
        acc = PowerSeries([self.coeffs[0]] + [0] * n)
        power = PowerSeries([1] + [0] * n)  # inner^j, truncated
        for j in range(1, len(self.coeffs)):
            power = power * inner.truncated(n).padded(n)
            acc = acc + power.scale(self.coeffs[j])
            if all(c == 0 for c in power.coeffs):
                break
        return acc.truncated(n)

    def compositional_inverse(self) -> "PowerSeries":
        """Series g with self(g(z)) = z up to the truncation order.

        Newton iteration g <- g - (f(g) - z) / f'(g); needs f(0)=0 and
        f'(0) invertible. Quadratic convergence, so a handful of rounds
        suffices at these orders; kept generic for exact scalars.
        """
        f = self
        if f.coeffs[0] != 0:
            raise ValueError("inverse needs f(0) = 0")
        if f.order < 1 or f.coeffs[1] == 0:
            raise SingularTransformError("inverse needs a nonzero linear term")
        n = f.order
        ident = PowerSeries([0, 1] + [0] * (n - 1))
        g = PowerSeries([0, 1 / f.coeffs[1]] + [0] * (n - 1))
        fprime = f.derivative().padded(n)
        correct = 1
        while correct < n:
            err = f.compose(g) - ident
            g = g - (err * fprime.compose(g).reciprocal().padded(n)).truncated(n)
            correct *= 2
        return g

    def evaluate(self, z):
        acc = self.coeffs[-1]
        for c in reversed(self.coeffs[:-1]):
            acc = acc * z + c
        return acc


def lagrange_inverse(f: PowerSeries, order: int | None = None) -> PowerSeries:
    """Compositional inverse by Lagrange inversion.

    [z^n] f^{-1} = (1/n) [w^{n-1}] (w / f(w))^n. Independent of the Newton
    route on purpose; the two are compared in tests. Division by n keeps
    Fraction inputs exact; integer inputs promote through true division.
    """
    if f.coeffs[0] != 0:
        raise ValueError("inverse needs f(0) = 0")
    if f.order < 1 or f.coeffs[1] == 0:
        raise SingularTransformError("inverse needs a nonzero linear term")
    n = f.order if order is None else order
    base = PowerSeries(f.coeffs[1 : n + 1]).reciprocal()  # w/f(w) as a series in w
    out = [0 * f.coeffs[1], 1 / f.coeffs[1]]
    power = base
    for j in range(2, n + 1):
        power = power * base
        out.append(power.coeffs[j - 1] / j)
    return PowerSeries(out[: n + 1])


# ------------------------------------------------- moments <-> cumulants


def _conv_prefix(a: list, b: list, upto: int) -> list:
    out = [0] * (upto + 1)
    for i, x in enumerate(a[: upto + 1]):
        if x == 0:
            continue
        for j, y in enumerate(b[: upto + 1 - i]):
            out[i + j] = out[i + j] + x * y
    return out


def cumulants_to_moments(kappa: CumulantSeq) -> MomentSeq:
    """Sum kappa over non-crossing partitions, as a triangular recursion.

    m_n = sum_{s=1}^n kappa_s * [z^{n-s}] M(z)^s with M = 1 + m_1 z + ...
    (decompose by the block containing 1: its gaps carry independent full
    moment series). Exact for exact scalar types.
    """
    K = kappa.order
    m: list = [1]
    for n in range(1, K + 1):
        power = [1] + [0] * n  # M^s, truncated at z^n
        total = 0
        for s in range(1, n + 1):
            power = _conv_prefix(power, m, n)
            total = total + kappa.values[s - 1] * power[n - s]
        m.append(total)
    return MomentSeq(m[1:])


def moments_to_cumulants(m: MomentSeq) -> CumulantSeq:
    """Invert the non-crossing moment recursion; exact round-trip partner."""
    K = m.order
    full = [1, *m.values]
    kappa: list = []
    for n in range(1, K + 1):
        power = [1] + [0] * n
        acc = m.values[n - 1]
        for s in range(1, n):
            power = _conv_prefix(power, full, n)
            acc = acc - kappa[s - 1] * power[n - s]
        kappa.append(acc)
    return CumulantSeq(kappa)


# ---------------------------------------------------- free convolutions


def free_add_convolve(a: MomentSeq, b: MomentSeq) -> MomentSeq:
    """Moments of the additive free convolution: cumulants add."""
    if a.order != b.order:
        raise OrderViolationError(f"orders differ: {a.order} vs {b.order}")
    ka = moments_to_cumulants(a)
    kb = moments_to_cumulants(b)
    return cumulants_to_moments(
        CumulantSeq([x + y for x, y in zip(ka.values, kb.values)])
    )


def s_series(m: MomentSeq) -> PowerSeries:
    """S-transform Taylor coefficients S_0..S_{K-1} from moments m_1..m_K.

    psi(z) = sum m_k z^k, chi = psi^{<-1>}, S(z) = chi(z) (1+z)/z.
    Needs m_1 != 0 — the compositional inverse does not exist otherwise.
    """
    if m.moment(1) == 0:
        raise SingularTransformError("S-transform needs a nonzero first moment")
    psi = PowerSeries((0, *m.values))
    chi = psi.compositional_inverse()
    chi_over_z = chi.shift_down()  # order K-1
    one_plus_z = PowerSeries([1, 1] + [0] * (m.order - 2)) if m.order >= 2 else PowerSeries([1])
    return chi_over_z * one_plus_z


def s_series_inverse(S: PowerSeries, order: int | None = None) -> MomentSeq:
    """Moments m_1..m_order back from S-transform coefficients S_0..S_{order-1}."""
    K = S.order + 1 if order is None else order
    _check_order(K)
    if S.coeffs[0] == 0:
        raise SingularTransformError("S(0) = 0 cannot come from a law with m1 != 0")
    Spad = PowerSeries(tuple(S.coeffs[:K]) + (0,) * max(0, K - 1 - S.order))
    inv_one_plus_z = PowerSeries([(-1) ** j for j in range(K)])
    chi = (Spad * inv_one_plus_z).shift_up()  # z S/(1+z), order K
    psi = chi.compositional_inverse()
    return MomentSeq(psi.coeffs[1:])


def free_mult_convolve(a: MomentSeq, b: MomentSeq) -> MomentSeq:
    """Moments of the multiplicative free convolution via S-transforms.

    S-transforms multiply; both inputs need a nonzero first moment. The
    combinatorial route (mult_moments_nc_sum) is kept separate as the
    cross-check and is never called from here.
    """
    if a.order != b.order:
        raise OrderViolationError(f"orders differ: {a.order} vs {b.order}")
    if a.moment(1) == 0 or b.moment(1) == 0:
        raise SingularTransformError("multiplicative convolution needs m1 != 0 on both sides")
    return s_series_inverse(s_series(a) * s_series(b), a.order)


def mult_moments_nc_sum(a: MomentSeq, b: MomentSeq, upto: int) -> list:
    """m_n(a x b) by the partition sum over NC(n), n = 1..upto.

    m_n = sum_{pi in NC(n)} kappa_pi(a) * m_{Kr(pi)}(b): free cumulants of
    one factor against moments of the other across Kreweras-complementary
    pairs. Independent of the S-transform machinery.
    """
    if upto > min(a.order, b.order):
        raise OrderViolationError(f"order {upto} exceeds available {min(a.order, b.order)}")
    if upto > MAX_POINTS:
        raise SizeLimitError(f"partition sum capped at {MAX_POINTS} points")
    ka = moments_to_cumulants(a).values
    mb = b.values
    out = []
    for n in range(1, upto + 1):
        total = 0
        for pi in iter_nc(n):
            term = 1
            for blk in pi.blocks:
                term = term * ka[len(blk) - 1]
            for blk in kreweras(pi).blocks:
                term = term * mb[len(blk) - 1]
            total = total + term
        out.append(total)
    return out


# ------------------------------------------------------ product cumulants


@functools.lru_cache(maxsize=None)
def _complement_size_profiles(k: int, n: int) -> tuple[tuple[tuple[int, ...], int], ...]:
    """Kreweras block-size profiles over partitions of [kn] into k blocks of size n.

    Returns ((sorted_sizes, multiplicity), ...); cached because the profile
    table depends only on (k, n) and is reused across every base law.
    """
    ctr: Counter = Counter()
    for p in iter_k_equal(k, n):  # k blocks, each of size n
        ctr[tuple(sorted(len(b) for b in kreweras(p).blocks))] += 1
    return tuple(sorted(ctr.items()))


def product_cumulant(k: int, kappa_single: CumulantSeq, n: int):
    """k-th free cumulant of an n-fold product of free copies, by partition sum.

    Sums, over the non-crossing partitions of kn points into k blocks of
    size n, the product of single-factor cumulants along Kreweras-complement
    blocks (those complements are letter-pure, so their block sizes never
    exceed k — which is why order k of the input sequence suffices).

    k = 1 degenerates to m_1^n (the only contributing partition is the full
    block, whose complement is all singletons). Sizes kn > 14 are refused;
    use the S-transform power route for large products.
    """
    if k < 1 or n < 1:
        raise ValueError("k and n must be positive")
    if kappa_single.order < k:
        raise OrderViolationError(f"need cumulants up to order {k}, have {kappa_single.order}")
    kap = kappa_single.values
    if k == 1:
        return kap[0] ** n
    if n == 1:
        return kap[k - 1]
    if k * n > MAX_POINTS:
        raise SizeLimitError(
            f"partition sum needs kn <= {MAX_POINTS} (got {k * n}); "
            "use the S-transform power route for large n"
        )
    total = 0
    for sizes, mult in _complement_size_profiles(k, n):
        total = total + mult * prod(kap[s - 1] for s in sizes)
    return total
