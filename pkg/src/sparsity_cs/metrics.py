"""Image quality measures, the sparsity index and the truncation PSNR bound.

The PSNR bound concerns a unitary transform ``x = T v`` whose ``i0``
smallest coefficients (in absolute value) are zeroed.  If ``s``, ``p_star``
and ``i_star`` describe the sparsity of ``x`` and ``i0 < i_star``, then

    PSNR(v, v~) > 10 log10( n (n - i_star + 1)^(2/p_star) MAX^2
                            / (i0 s^(2/p_star)) )

which splits into five additive terms reported by
:class:`PsnrBoundBreakdown`.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import DomainError, InvalidInputError
from .sparsity import GRID_POINTS, P_MIN, Sparser, is_sparser, ordering, sparsity_s
from .transform import dct1, dct2, idct1, idct2, vec

__all__ = [
    "DEFAULT_MAX",
    "SSIM_WINDOW",
    "SSIM_SIGMA",
    "SSIM_K1",
    "SSIM_K2",
    "PsnrBoundBreakdown",
    "QualityScores",
    "TruncationResult",
    "EnergyShift",
    "mse",
    "psnr",
    "quality_scores",
    "sparsity_index",
    "coefficient_sparsity_index",
    "truncate_smallest",
    "psnr_lower_bound",
    "psnr_bound_closed_form",
    "truncation_experiment",
    "ssim_map",
    "mssim",
    "energy_shift_check",
]

DEFAULT_MAX = 255.0
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


def _pair(u, v):
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise InvalidInputError(f"shape mismatch: {u.shape} vs {v.shape}")
    if u.size == 0:
        raise InvalidInputError("empty input")
    return u, v


def mse(u, v):
    """Mean of the squared entrywise differences."""
    u, v = _pair(u, v)
    d = u - v
    return float(np.mean(d * d))


def psnr(u, v, max_value=DEFAULT_MAX):
    """Peak signal-to-noise ratio in dB; ``inf`` when ``u == v``."""
    if not max_value > 0:
        raise InvalidInputError(f"MAX must be positive, got {max_value}")
    m = mse(u, v)
    if m == 0:
        return math.inf
    return 10.0 * math.log10(max_value * max_value / m)


@dataclass
class QualityScores:
    mse: float
    psnr_db: float
    mssim: float
    ssim_map: np.ndarray


def quality_scores(u, v, max_value=DEFAULT_MAX):
    """MSE, PSNR and SSIM of ``v`` against the reference ``u``."""
    m = mse(u, v)
    smap = ssim_map(u, v, max_value)
    return QualityScores(
        mse=m,
        psnr_db=psnr(u, v, max_value),
        mssim=float(smap.mean()),
        ssim_map=smap,
    )


def sparsity_index(V):
    """``E = s(vec(dct2(V))) / N`` for a square block ``V``.

    Coefficients at the rounding level of the transform (below
    ``N * machine_eps * max|X|``) are treated as exact zeros, so that a
    constant block has a single nonzero coefficient.
    """
    V = np.asarray(V, dtype=np.float64)
    if V.ndim != 2 or V.shape[0] != V.shape[1]:
        raise InvalidInputError(f"expected a square block, got shape {V.shape}")
    if not np.all(np.isfinite(V)):
        raise InvalidInputError("block has non-finite entries")
    x = vec(dct2(V))
    floor = x.size * np.finfo(float).eps * np.max(np.abs(x), initial=0.0)
    x[np.abs(x) <= floor] = 0.0
    return coefficient_sparsity_index(x)


def coefficient_sparsity_index(x):
    """``s(x) / n`` for a vector of transform coefficients."""
    x = np.asarray(x, dtype=np.float64)
    return sparsity_s(x).s / x.size


def truncate_smallest(x, i0):
    """Zero the ``i0`` entries of smallest magnitude.

    Ties are broken by the ordering permutation, i.e. the earliest
    position in the stable sort is zeroed first.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise InvalidInputError("truncate_smallest expects a vector")
    i0 = int(i0)
    if not 0 <= i0 <= x.size:
        raise InvalidInputError(f"i0 must lie in [0, {x.size}], got {i0}")
    out = x.copy()
    out[ordering(x).permutation[:i0]] = 0.0
    return out


@dataclass(frozen=True)
class PsnrBoundBreakdown:
    """The five dB terms of the truncation bound and their sum.

    ``sigma1`` rewards sparsity (zero when ``s == n``), ``sigma2`` is a
    dimension penalty, ``sigma3`` depends on ``i_star``, ``sigma4`` on the
    peak value and ``sigma5`` on the number of zeroed coefficients (zero
    when ``i0 == 1``).
    """

    sigma1: float
    sigma2: float
    sigma3: float
    sigma4: float
    sigma5: float
    total: float
    n: int
    i_star: int
    p_star: float
    i0: int
    max_value: float
    s: float

    def terms(self):
        return (self.sigma1, self.sigma2, self.sigma3, self.sigma4, self.sigma5)


def _check_bound_inputs(s, p_star, i_star, i0, n, max_value):
    if not p_star > 0:
        raise DomainError("the bound needs p_star > 0 (p_star = 0 makes 2/p_star diverge)")
    if p_star > 1:
        raise DomainError(f"p_star must lie in (0, 1], got {p_star}")
    if i0 < 1:
        raise DomainError(f"i0 must be >= 1, got {i0}")
    if i0 >= i_star:
        raise DomainError(f"the bound needs i0 < i_star, got i0={i0}, i_star={i_star}")
    if not 1 <= i_star <= n:
        raise DomainError(f"i_star must lie in [1, n={n}], got {i_star}")
    if not 0 < s <= n:
        raise DomainError(f"s must lie in (0, n], got {s}")
    if not max_value > 0:
        raise DomainError("MAX must be positive")


def psnr_lower_bound(s, p_star, i_star, i0, n, max_value=DEFAULT_MAX):
    """Term-by-term PSNR lower bound for truncating ``i0`` coefficients.

    Raises
    ------
    DomainError
        If ``p_star == 0``, ``i0 < 1`` or ``i0 >= i_star``.
    """
    s = float(s)
    p = float(p_star)
    i_star = int(i_star)
    i0 = int(i0)
    n = int(n)
    max_value = float(max_value)
    _check_bound_inputs(s, p, i_star, i0, n, max_value)
    sigma1 = -20.0 / p * math.log10(s / n)
    sigma2 = 10.0 * (p - 2.0) / p * math.log10(n)
    sigma3 = 20.0 / p * math.log10(n - i_star + 1)
    sigma4 = 20.0 * math.log10(max_value)
    sigma5 = -10.0 * math.log10(i0)
    # s <= n always; clamp the rounding noise of s == n, and drop -0.0
    sigma1 = max(sigma1, 0.0) + 0.0
    sigma5 = sigma5 + 0.0
    total = math.fsum((sigma1, sigma2, sigma3, sigma4, sigma5))
    return PsnrBoundBreakdown(
        sigma1=sigma1,
        sigma2=sigma2,
        sigma3=sigma3,
        sigma4=sigma4,
        sigma5=sigma5,
        total=total,
        n=n,
        i_star=i_star,
        p_star=p,
        i0=i0,
        max_value=max_value,
        s=s,
    )


def psnr_bound_closed_form(s, p_star, i_star, i0, n, max_value=DEFAULT_MAX):
    """The same bound from the unsplit expression, without the five terms."""
    _check_bound_inputs(float(s), float(p_star), int(i_star), int(i0), int(n), float(max_value))
    # the powers overflow for small p_star, so take the logarithm of each factor
    e = 2.0 / p_star
    ratio = (n - i_star + 1) / s
    return 10.0 * (math.log10(n * max_value**2 / i0) + e * math.log10(ratio))


@dataclass
class TruncationResult:
    psnr_actual: float
    bound: PsnrBoundBreakdown
    coefficients: np.ndarray
    truncated: np.ndarray
    reconstruction: np.ndarray


def truncation_experiment(v, i0, max_value=None):
    """Truncate the DCT of ``v`` and compare the actual PSNR with the bound.

    ``v`` is a vector (1D DCT) or a square block (2D DCT, coefficients
    vectorized column by column).  ``max_value`` defaults to ``max|v|``.
    """
    v = np.asarray(v, dtype=np.float64)
    if v.ndim == 1:
        x = dct1(v)
    elif v.ndim == 2 and v.shape[0] == v.shape[1]:
        x = vec(dct2(v))
    else:
        raise InvalidInputError("v must be a vector or a square block")
    if max_value is None:
        max_value = float(np.max(np.abs(v)))
    prof = sparsity_s(x)
    if prof.p_star == 0 or not 1 <= i0 < prof.i_star:
        raise DomainError(
            f"need p_star > 0 and 1 <= i0 < i_star; got p_star={prof.p_star}, "
            f"i_star={prof.i_star}, i0={i0}"
        )
    bound = psnr_lower_bound(prof.s, prof.p_star, prof.i_star, i0, x.size, max_value)
    xt = truncate_smallest(x, i0)
    if v.ndim == 1:
        vt = idct1(xt)
    else:
        vt = idct2(xt.reshape(v.shape, order="F"))
    return TruncationResult(
        psnr_actual=psnr(v, vt, max_value),
        bound=bound,
        coefficients=x,
        truncated=xt,
        reconstruction=vt,
    )


def _gaussian(img):
    # radius 5 at sigma 1.5 gives the 11 x 11 window
    return ndimage.gaussian_filter(img, SSIM_SIGMA, truncate=(SSIM_WINDOW // 2) / SSIM_SIGMA)


def ssim_map(u, v, max_value=DEFAULT_MAX):
    """Local SSIM over 11 x 11 Gaussian windows (sigma 1.5).

    Only windows lying fully inside the image are kept, so the map is
    ``(h - 10) x (w - 10)``.  Stability constants are ``(0.01 MAX)^2`` and
    ``(0.03 MAX)^2``.
    """
    u, v = _pair(u, v)
    if u.ndim != 2:
        raise InvalidInputError("SSIM expects 2D images")
    if min(u.shape) < SSIM_WINDOW:
        raise InvalidInputError(f"images must be at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {u.shape}")
    c1 = (SSIM_K1 * max_value) ** 2
    c2 = (SSIM_K2 * max_value) ** 2
    mu_u = _gaussian(u)
    mu_v = _gaussian(v)
    var_u = _gaussian(u * u) - mu_u * mu_u
    var_v = _gaussian(v * v) - mu_v * mu_v
    cov = _gaussian(u * v) - mu_u * mu_v
    num = (2 * mu_u * mu_v + c1) * (2 * cov + c2)
    den = (mu_u**2 + mu_v**2 + c1) * (var_u + var_v + c2)
    r = SSIM_WINDOW // 2
    return (num / den)[r:-r, r:-r]


def mssim(u, v, max_value=DEFAULT_MAX):
    """Mean of :func:`ssim_map`."""
    return float(ssim_map(u, v, max_value).mean())


@dataclass
class EnergyShift:
    """Where the ordered transform ``y`` falls below the ordered signal ``w``.

    ``sparsifying`` says whether ``x`` was sparser than ``v`` at every
    tested exponent; ``i_natural`` (1-based) is only set in that case.
    ``holds`` is true when both partial-energy inequalities are met.
    """

    sparsifying: bool
    i_natural: int = None
    head_energy_x: float = None
    head_energy_v: float = None
    holds: bool = False


def energy_shift_check(v, x, ps=None, energy_rel_tol=1e-9):
    """Check the energy redistribution of a sparsifying transform pair.

    ``x`` must have the same energy as ``v``.  When ``s_p(x) < s_p(v)``
    for every ``p`` in ``ps`` (default: the log grid used for ``s``),
    ``i_natural`` is the largest index with ``y_i < w_i``, and the check
    verifies ``sum_{i <= i_natural} y_i^2 <= sum_{i <= i_natural} w_i^2``
    together with the reverse inequality on the tail.
    """
    v = np.asarray(v, dtype=np.float64).ravel()
    x = np.asarray(x, dtype=np.float64).ravel()
    if v.shape != x.shape:
        raise InvalidInputError(f"length mismatch: {v.size} vs {x.size}")
    ev = float(np.linalg.norm(v))
    ex = float(np.linalg.norm(x))
    if abs(ev - ex) > energy_rel_tol * max(ev, ex):
        raise InvalidInputError(f"energies differ: ||v|| = {ev}, ||x|| = {ex}")
    if ps is None:
        ps = np.geomspace(P_MIN, 1.0, GRID_POINTS)
    sparsifying = all(is_sparser(x, v, p, energy_rel_tol) is Sparser.SPARSER for p in ps)
    if not sparsifying:
        return EnergyShift(sparsifying=False)
    y = ordering(x).ordered
    w = ordering(v).ordered
    below = np.flatnonzero(y < w)
    if below.size == 0:
        return EnergyShift(sparsifying=True)
    k = int(below[-1])
    head_x = float(np.sum(y[: k + 1] ** 2))
    head_v = float(np.sum(w[: k + 1] ** 2))
    tail_x = float(np.sum(y[k + 1 :] ** 2))
    tail_v = float(np.sum(w[k + 1 :] ** 2))
    slack = 1e-12 * max(ev * ev, 1.0)
    holds = head_x <= head_v + slack and tail_v <= tail_x + slack
    return EnergyShift(
        sparsifying=True,
        i_natural=k + 1,
        head_energy_x=head_x,
        head_energy_v=head_v,
        holds=holds,
    )
