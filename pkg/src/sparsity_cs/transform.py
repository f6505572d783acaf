"""Orthonormal DCT-II on square blocks and the synthesis basis built from it."""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import InvalidInputError

__all__ = [
    "DctPlan",
    "SynthesisBasis",
    "dct_matrix",
    "make_plan",
    "dct2",
    "idct2",
    "dct1",
    "idct1",
    "build_synthesis_basis",
    "vec",
    "unvec",
]


def dct_matrix(l):
    """Orthonormal DCT-II matrix ``C`` of size ``l x l``.

    ``C[k, m] = c_k cos(pi (2m + 1) k / (2l))`` with ``c_0 = sqrt(1/l)`` and
    ``c_k = sqrt(2/l)`` otherwise, so that ``C @ v`` is the DCT of ``v``.
    """
    if l < 1:
        raise InvalidInputError("block side must be >= 1")
    k = np.arange(l)[:, None]
    m = np.arange(l)[None, :]
    C = np.cos(np.pi * (2 * m + 1) * k / (2 * l))
    C *= np.sqrt(2.0 / l)
    C[0, :] = np.sqrt(1.0 / l)
    return C


@dataclass(frozen=True)
class DctPlan:
    l: int
    cosine_matrix: np.ndarray


@lru_cache(maxsize=16)
def make_plan(l):
    C = dct_matrix(int(l))
    C.setflags(write=False)
    return DctPlan(l=int(l), cosine_matrix=C)


def _check_block(V, plan):
    V = np.asarray(V, dtype=np.float64)
    if V.shape != (plan.l, plan.l):
        raise InvalidInputError(f"expected a {plan.l}x{plan.l} block, got shape {V.shape}")
    return V


def dct2(V, plan=None):
    """2D DCT-II, ``C @ V @ C.T``."""
    if plan is None:
        plan = make_plan(np.shape(V)[0])
    V = _check_block(V, plan)
    C = plan.cosine_matrix
    return C @ V @ C.T


def idct2(X, plan=None):
    """Inverse of :func:`dct2`, ``C.T @ X @ C``."""
    if plan is None:
        plan = make_plan(np.shape(X)[0])
    X = _check_block(X, plan)
    C = plan.cosine_matrix
    return C.T @ X @ C


def dct1(v):
    """Orthonormal 1D DCT-II of a vector."""
    v = np.asarray(v, dtype=np.float64)
    return make_plan(v.size).cosine_matrix @ v


def idct1(x):
    x = np.asarray(x, dtype=np.float64)
    return make_plan(x.size).cosine_matrix.T @ x


def vec(M):
    """Stack the columns of ``M`` (column-major order)."""
    M = np.asarray(M)
    if M.ndim != 2:
        raise InvalidInputError("vec expects a 2D array")
    return M.reshape(-1, order="F")


def unvec(x, l=None):
    """Inverse of :func:`vec` for square blocks."""
    x = np.asarray(x)
    if l is None:
        l = int(round(np.sqrt(x.size)))
    if x.ndim != 1 or l * l != x.size:
        raise InvalidInputError(f"length {x.size} is not a perfect square")
    return x.reshape((l, l), order="F")


@dataclass(frozen=True)
class SynthesisBasis:
    """``A`` has one column per basis image ``idct2(e_ij)``, vectorized.

    Columns follow the column-major traversal of ``(i, j)``, the same
    order as :func:`vec`, so ``A @ vec(X) == vec(idct2(X))``.
    """

    l: int
    A: np.ndarray

    @property
    def N(self):
        return self.l * self.l


@lru_cache(maxsize=8)
def build_synthesis_basis(l):
    l = int(l)
    if l < 1:
        raise InvalidInputError("block side must be >= 1")
    plan = make_plan(l)
    N = l * l
    A = np.empty((N, N))
    E = np.zeros((l, l))
    for k in range(N):
        i, j = k % l, k // l
        E[i, j] = 1.0
        A[:, k] = vec(idct2(E, plan))
        E[i, j] = 0.0
    A.setflags(write=False)
    return SynthesisBasis(l=l, A=A)
