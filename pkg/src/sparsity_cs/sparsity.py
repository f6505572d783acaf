r"""Weak-:math:`\ell^p` quasi-norm and the sparsity measures built on it.

Everything here works on the *ordering* of a vector, i.e. its absolute
values sorted non-decreasingly.  For an ordering ``y`` of length ``n`` and
an exponent ``p > 0``

.. math::

    s_p(x) = \|x\|_{w\ell^p}^p = \max_i (n - i + 1)\, y_i^p

and the sparsity of ``x`` is :math:`s(x) = \inf_{p \in (0, 1]} s_p(x)`.
Since :math:`p \mapsto s_p(x)` is convex the infimum is found by a coarse
log-spaced scan followed by golden-section refinement, and is compared
against the :math:`p \to 0^+` limit, which equals :math:`\|x\|_0`.
"""

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, InvalidInputError

__all__ = [
    "OrderedVector",
    "WeakLpValue",
    "SparsityProfile",
    "Sparser",
    "ordering",
    "weak_lp_pow",
    "sparsity_sp",
    "sparsity_curve",
    "zero_norm",
    "is_sparser",
    "sparsity_s",
    "P_MIN",
    "GRID_POINTS",
]

#: Smallest exponent sampled; stands in for the open end of (0, 1].
P_MIN = 1e-6
#: Number of log-spaced samples of ``p`` before golden-section refinement.
GRID_POINTS = 32

_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


def _as_vector(x):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        x = x.ravel()
    if x.size == 0:
        raise InvalidInputError("vector must have at least one entry")
    if not np.all(np.isfinite(x)):
        raise InvalidInputError("vector has non-finite entries")
    return x


@dataclass(frozen=True)
class OrderedVector:
    """A vector together with its ordering.

    ``ordered[k] == abs(original[permutation[k]])`` and ``ordered`` is
    non-decreasing.  Positions are 0-based here; the 1-based index ``i``
    used in the formulas is ``k + 1``.
    """

    original: np.ndarray
    ordered: np.ndarray
    permutation: np.ndarray

    @property
    def n(self):
        return self.ordered.size


@dataclass(frozen=True)
class WeakLpValue:
    """``value_pow`` is ``s_p(x)``; ``i_star`` is 1-based."""

    p: float
    value_pow: float
    i_star: int

    @property
    def norm(self):
        """The quasi-norm itself, ``value_pow ** (1/p)``."""
        return self.value_pow ** (1.0 / self.p)


@dataclass(frozen=True)
class SparsityProfile:
    """Result of minimizing ``s_p(x)`` over ``p``.

    ``p_star == 0`` means the infimum is the ``p -> 0+`` limit, in which
    case ``s == zero_norm``.  ``curve`` holds every ``(p, s_p)`` pair that
    was evaluated, sorted by ``p``.
    """

    s: float
    p_star: float
    i_star: int
    zero_norm: int
    curve: list = field(default_factory=list, repr=False)


class Sparser(enum.Enum):
    SPARSER = "sparser"
    NOT_SPARSER = "not-sparser"
    INCOMPARABLE = "incomparable"


def ordering(x):
    """Return the ordering of ``x`` (sorted absolute values).

    Ties keep their original relative order.

    >>> ordering([3, -1, 2]).ordered
    array([1., 2., 3.])
    """
    x = _as_vector(x)
    a = np.abs(x)
    perm = np.argsort(a, kind="stable")
    return OrderedVector(original=x, ordered=a[perm], permutation=perm)


class _Rectangles:
    """Precomputed logs of the ordering, for repeated evaluation of s_p.

    Only the nonzero part of the ordering matters for ``p > 0``; zero
    entries contribute rectangles of area 0.
    """

    __slots__ = ("n", "first", "counts", "logy")

    def __init__(self, y):
        n = y.size
        nz = np.flatnonzero(y > 0)
        self.n = n
        self.first = int(nz[0]) if nz.size else n
        # n - i + 1 with 1-based i, for i = first+1 .. n
        self.counts = (n - nz).astype(np.float64)
        # y_i^p is evaluated as exp(p * ln y_i)
        self.logy = np.log(y[nz])

    def areas(self, p):
        return self.counts * np.exp(p * self.logy)

    def value(self, p):
        if self.counts.size == 0:
            return 0.0
        return float(np.max(self.areas(p)))

    def value_and_index(self, p):
        if self.counts.size == 0:
            return 0.0, 1
        areas = self.areas(p)
        k = int(np.argmax(areas))
        return float(areas[k]), self.first + k + 1


def weak_lp_pow(x, p):
    """``s_p(x)``, the ``p``-th power of the weak-lp quasi-norm.

    Parameters
    ----------
    x : array_like
        Finite real vector.
    p : float
        Exponent, ``p > 0``.

    Returns
    -------
    WeakLpValue
        ``value_pow = max_i (n - i + 1) * y_i**p`` over the ordering ``y``,
        with ``i_star`` the smallest (1-based) maximizing index.
    """
    p = float(p)
    if not p > 0:
        raise DomainError(f"p must be positive, got {p}")
    y = ordering(x).ordered
    # Within a run of tied y values, n - i + 1 is largest at the first
    # index, which is also where #{j : y_j >= y_i} is attained, so the
    # max and the smallest argmax agree with the counting form.
    value, i_star = _Rectangles(y).value_and_index(p)
    return WeakLpValue(p=p, value_pow=value, i_star=i_star)


def sparsity_sp(x, p):
    """Sparsity of order ``p``: ``weak_lp_pow(x, p).value_pow``."""
    return weak_lp_pow(x, p).value_pow


def sparsity_curve(x, ps):
    """Evaluate ``s_p(x)`` for every ``p`` in ``ps`` at once."""
    ps = np.asarray(ps, dtype=np.float64)
    if np.any(~(ps > 0)):
        raise DomainError("all p must be positive")
    rect = _Rectangles(ordering(x).ordered)
    if rect.counts.size == 0:
        return np.zeros(ps.shape)
    return np.max(rect.counts[:, None] * np.exp(np.outer(rect.logy, ps.ravel())), axis=0).reshape(ps.shape)


def zero_norm(x, threshold=0.0):
    """Number of entries with ``|x_j| > threshold``.

    The default threshold of 0 counts every nonzero, however tiny.
    """
    x = _as_vector(x)
    return int(np.count_nonzero(np.abs(x) > threshold))


def is_sparser(x1, x2, p, energy_rel_tol=1e-9):
    """Evaluate the sparsity relation ``x1 <_{s_p} x2``.

    The relation only compares vectors of equal energy.  Energies are
    treated as equal when they differ by at most
    ``energy_rel_tol * max(||x1||_2, ||x2||_2)``; otherwise the pair is
    :attr:`Sparser.INCOMPARABLE`.
    """
    x1 = _as_vector(x1)
    x2 = _as_vector(x2)
    if x1.shape != x2.shape:
        raise InvalidInputError(f"length mismatch: {x1.size} vs {x2.size}")
    p = float(p)
    if not 0 < p <= 1:
        raise DomainError(f"p must lie in (0, 1], got {p}")
    e1 = float(np.linalg.norm(x1))
    e2 = float(np.linalg.norm(x2))
    if abs(e1 - e2) > energy_rel_tol * max(e1, e2):
        return Sparser.INCOMPARABLE
    if sparsity_sp(x1, p) < sparsity_sp(x2, p):
        return Sparser.SPARSER
    return Sparser.NOT_SPARSER


def sparsity_s(x, tol_p=1e-8):
    """Sparsity ``s(x) = inf_{p in (0,1]} s_p(x)``.

    ``s_p`` is sampled on ``GRID_POINTS`` log-spaced exponents in
    ``[P_MIN, 1]``; golden-section search then refines the bracket around
    the best sample down to width ``tol_p``.  The result is compared with
    the ``p -> 0+`` limit ``||x||_0``, which wins ties (``p_star = 0``).

    >>> round(sparsity_s([2, 1e-16, 1e-16, 1e-16, 0]).s, 6)
    1.025931
    """
    if not tol_p > 0:
        raise DomainError("tol_p must be positive")
    y = ordering(x).ordered
    rect = _Rectangles(y)
    n0 = rect.counts.size
    if n0 == 0:
        return SparsityProfile(s=0.0, p_star=0.0, i_star=1, zero_norm=0, curve=[])

    grid = np.geomspace(P_MIN, 1.0, GRID_POINTS)
    vals = np.max(rect.counts[:, None] * np.exp(np.outer(rect.logy, grid)), axis=0)
    curve = {float(p): float(v) for p, v in zip(grid, vals)}
    m = int(np.argmin(vals))
    a = float(grid[max(m - 1, 0)])
    b = float(grid[min(m + 1, GRID_POINTS - 1)])

    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc = rect.value(c)
    fd = rect.value(d)
    curve[c] = fc
    curve[d] = fd
    while b - a > tol_p:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = rect.value(c)
            curve[c] = fc
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = rect.value(d)
            curve[d] = fd

    # Best of everything evaluated; convexity makes this the bracket
    # minimum up to tol_p, and keeps endpoint minima (p = 1) exact.
    p_best = min(curve, key=lambda p: (curve[p], p))
    s_best = curve[p_best]
    points = sorted(curve.items())

    if n0 <= s_best:
        # p -> 0+ limit: the largest rectangle is the first nonzero entry.
        return SparsityProfile(
            s=float(n0), p_star=0.0, i_star=rect.first + 1, zero_norm=n0, curve=points
        )
    _, i_star = rect.value_and_index(p_best)
    return SparsityProfile(s=s_best, p_star=p_best, i_star=i_star, zero_norm=n0, curve=points)
