"""Single-pixel camera model: random binary masks, measurements, blocking.

The mask matrix ``P`` (``N x K``, entries in {0, 1}) is drawn from the raw
64-bit output of NumPy's PCG64 bit generator seeded with ``seed``.  Word
``t`` of the stream supplies bits ``64 t .. 64 t + 63`` (least significant
bit first) and the bit sequence fills ``P`` in row-major order.  This
scheme is recorded in reports as :data:`MASK_GENERATOR`; it depends only
on the PCG64 stream, which NumPy keeps stable across releases.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import GenerationError, InvalidInputError
from .transform import SynthesisBasis, build_synthesis_basis

__all__ = [
    "MASK_GENERATOR",
    "MAX_RANK_RETRIES",
    "MeasurementEnsemble",
    "BlockGrid",
    "mask_bits",
    "gen_measurement_ensemble",
    "measure",
    "partition_blocks",
    "assemble_blocks",
    "luminance",
]

MASK_GENERATOR = "pcg64-raw-bits/v1"
MAX_RANK_RETRIES = 8
RANK_RTOL = 1e-10


def mask_bits(seed, shape):
    """Deterministic {0, 1} array of ``shape`` from the PCG64 raw stream."""
    count = int(np.prod(shape))
    words = np.random.PCG64(int(seed)).random_raw((count + 63) // 64)
    words = np.asarray(words, dtype="<u8")
    bits = np.unpackbits(words.view(np.uint8), bitorder="little")[:count]
    return bits.reshape(shape).astype(np.float64)


@dataclass(frozen=True, eq=False)
class MeasurementEnsemble:
    """Everything needed to sense and reconstruct ``l x l`` blocks.

    ``Phi = P.T @ A`` and ``W[i]`` is the 2-norm of column ``i`` of ``Phi``.
    ``Q`` and ``R`` are the complete QR factors of ``Phi.T`` (``Q`` is
    ``N x N``, ``R`` is the leading ``K x K`` triangle); the solvers reuse
    them for feasible starts and null-space projections.  ``seed`` is the
    seed that produced ``P``, which differs from the requested seed when
    a rank-deficient draw was rejected.
    """

    l: int
    K: int
    P: np.ndarray
    basis: SynthesisBasis
    Phi: np.ndarray
    W: np.ndarray
    seed: int
    requested_seed: int
    Q: np.ndarray
    R: np.ndarray

    @property
    def N(self):
        return self.l * self.l

    @property
    def A(self):
        return self.basis.A


def _full_rank_qr(Phi):
    Q, R = sla.qr(Phi.T, mode="full")
    K = Phi.shape[0]
    R = R[:K, :K]
    d = np.abs(np.diag(R))
    ok = d.size == 0 or d.min() > RANK_RTOL * max(np.linalg.norm(Phi, 2), 1.0)
    return Q, R, ok


def gen_measurement_ensemble(l, rate, seed):
    """Draw ``P`` and build the sensing operator for ``l x l`` blocks.

    ``K = round(rate * l**2)``.  If ``Phi`` is rank deficient the mask is
    redrawn with ``seed + 1``, ``seed + 2``, ... up to
    :data:`MAX_RANK_RETRIES` times.
    """
    l = int(l)
    if l < 1:
        raise InvalidInputError("block side must be >= 1")
    rate = float(rate)
    if not 0 < rate <= 1:
        raise InvalidInputError(f"rate must lie in (0, 1], got {rate}")
    N = l * l
    K = int(round(rate * N))
    if K < 1:
        raise InvalidInputError(f"rate {rate} gives no measurements for l={l}")
    basis = build_synthesis_basis(l)
    for attempt in range(MAX_RANK_RETRIES + 1):
        s = int(seed) + attempt
        P = mask_bits(s, (N, K))
        Phi = P.T @ basis.A
        Q, R, ok = _full_rank_qr(Phi)
        if ok:
            break
    else:
        raise GenerationError(
            f"Phi stayed rank deficient for seeds {seed}..{int(seed) + MAX_RANK_RETRIES}"
        )
    W = np.linalg.norm(Phi, axis=0)
    for arr in (P, Phi, W, Q, R):
        arr.setflags(write=False)
    return MeasurementEnsemble(
        l=l, K=K, P=P, basis=basis, Phi=Phi, W=W, seed=s, requested_seed=int(seed), Q=Q, R=R
    )


def measure(v, ensemble):
    """``y = P.T @ v``: one summed light reading per mask."""
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (ensemble.N,):
        raise InvalidInputError(f"expected a vector of length {ensemble.N}, got shape {v.shape}")
    return ensemble.P.T @ v


@dataclass(frozen=True)
class BlockGrid:
    l: int
    rows: int
    cols: int
    height: int
    width: int
    pad_bottom: int
    pad_right: int

    @property
    def count(self):
        return self.rows * self.cols

    def origin(self, k):
        """Top-left pixel (row, col) of block ``k`` (row-major over the grid)."""
        r, c = divmod(k, self.cols)
        return r * self.l, c * self.l

    @property
    def origins(self):
        return [self.origin(k) for k in range(self.count)]


def partition_blocks(image, l):
    """Split ``image`` into ``l x l`` blocks, row-major over the grid.

    Images whose sides are not multiples of ``l`` are extended to the
    right and bottom by edge replication.
    """
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 2 or image.size == 0:
        raise InvalidInputError("expected a non-empty 2D image")
    l = int(l)
    h, w = image.shape
    rows = -(-h // l)
    cols = -(-w // l)
    pb = rows * l - h
    pr = cols * l - w
    padded = np.pad(image, ((0, pb), (0, pr)), mode="edge") if (pb or pr) else image
    grid = BlockGrid(l=l, rows=rows, cols=cols, height=h, width=w, pad_bottom=pb, pad_right=pr)
    blocks = [padded[r : r + l, c : c + l].copy() for r, c in grid.origins]
    return grid, blocks


def assemble_blocks(grid, blocks):
    """Place blocks back on the grid and trim any padding."""
    if len(blocks) != grid.count:
        raise InvalidInputError(f"expected {grid.count} blocks, got {len(blocks)}")
    l = grid.l
    out = np.empty((grid.rows * l, grid.cols * l))
    for (r, c), B in zip(grid.origins, blocks):
        out[r : r + l, c : c + l] = B
    return out[: grid.height, : grid.width]


def luminance(R, G, B):
    """``Y = 0.299 R + 0.587 G + 0.114 B``, no rounding."""
    R = np.asarray(R, dtype=np.float64)
    G = np.asarray(G, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    if not R.shape == G.shape == B.shape:
        raise InvalidInputError("channel shapes differ")
    return 0.299 * R + 0.587 * G + 0.114 * B
