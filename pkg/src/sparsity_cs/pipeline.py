"""Block-wise sensing and reconstruction of whole images.

Each ``l x l`` block ``V_k`` is measured as ``y_k = P.T vec(V_k)``, its DCT
coefficients ``x_k`` are recovered by OMP or basis pursuit, and the block
is rebuilt as ``unvec(A x_k)``.  The sparsity index of the reconstruction,
``E_k = s(x_k) / N``, is a reference-free predictor of its quality: the
hypothesis under test is ``E_k > t0  <=>  PSNR_k < r0``.
"""

import csv
import dataclasses
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .config import RunConfig
from .errors import DomainError, InvalidInputError, SolverError
from .metrics import SSIM_WINDOW, mssim, psnr, psnr_lower_bound
from .pnm import write_pgm
from .sensing import (
    MASK_GENERATOR,
    assemble_blocks,
    gen_measurement_ensemble,
    measure,
    partition_blocks,
)
from .solvers import NullSpaceBasis, bp, feasible_start, omp
from .sparsity import sparsity_s
from .transform import unvec, vec

__all__ = [
    "REPORT_SCHEMA",
    "VALIDATED",
    "TYPE_I",
    "TYPE_II",
    "BlockRecord",
    "Confusion",
    "ReconstructionReport",
    "ScatterRow",
    "reconstruct_image",
    "classify",
    "classify_hypothesis",
    "run_experiment",
    "aggregate_scatter",
    "correlation_check",
    "report_to_json",
    "report_from_json",
    "write_scatter_csv",
    "read_scatter_csv",
    "block_maps",
    "write_block_maps",
]

REPORT_SCHEMA = "sparsity-cs-report/1"
NOT_AVAILABLE = "not available"

VALIDATED = "validated"
TYPE_I = "type_I"
TYPE_II = "type_II"
H_CLASSES = (VALIDATED, TYPE_I, TYPE_II)


@dataclass
class BlockRecord:
    """Outcome for one block.

    ``bound_db`` is the advisory PSNR bound obtained by treating the OMP
    solution as a truncation of the true coefficients; it is ``None``
    for basis pursuit and whenever the bound does not apply.  ``fallback``
    marks blocks whose solver failed and which hold the minimum-norm
    feasible solution instead.
    """

    index: int
    row: int
    col: int
    E: float
    psnr_db: float
    mssim_block: float = None
    bound_db: float = None
    s: float = 0.0
    p_star: float = 0.0
    i_star: int = 1
    iterations: int = 0
    residual: float = 0.0
    support_size: int = 0
    converged: bool = True
    solver_reason: str = ""
    fallback: bool = False
    h_class: str = None


@dataclass
class Confusion:
    type_I: int = 0
    type_II: int = 0
    validated: int = 0

    @property
    def total(self):
        return self.type_I + self.type_II + self.validated

    def percent(self, name):
        return 100.0 * getattr(self, name) / self.total if self.total else 0.0

    def as_dict(self):
        d = {"type_I": self.type_I, "type_II": self.type_II, "validated": self.validated}
        d["total"] = self.total
        for k in ("type_I", "type_II", "validated"):
            d[k + "_pct"] = self.percent(k)
        d["errors"] = self.type_I + self.type_II
        d["errors_pct"] = self.percent("type_I") + self.percent("type_II")
        return d


@dataclass
class ReconstructionReport:
    """Everything recorded about one image; the pixels are kept separately."""

    name: str
    height: int
    width: int
    config: dict
    psnr_db: float
    mssim: float
    records: list
    confusion: Confusion
    schema: str = REPORT_SCHEMA

    @property
    def scatter(self):
        return [(r.E, r.psnr_db) for r in self.records]


@dataclass(frozen=True)
class ScatterRow:
    image: str
    block: int
    E: float
    psnr_db: float
    h_class: str


def _solve_block(V, ensemble, solver, bp_params, omp_eps, basis, max_value):
    N = ensemble.N
    y = measure(vec(V), ensemble)
    fallback = False
    try:
        if solver == "omp":
            res = omp(ensemble.Phi, y, eps=omp_eps)
        else:
            res = bp(ensemble.Phi, y, ensemble.W, bp_params, basis)
        if not np.all(np.isfinite(res.x)):
            raise SolverError("non-finite solution")
        x = res.x
        stats_ = dict(
            iterations=int(res.iterations),
            residual=float(res.residual_norm),
            support_size=int(res.support_size),
            converged=bool(res.converged),
            solver_reason=res.reason,
        )
    except SolverError as err:
        x = feasible_start(ensemble.Phi, y, basis)
        fallback = True
        stats_ = dict(
            iterations=0,
            residual=float(np.linalg.norm(y - ensemble.Phi @ x)),
            support_size=int(np.count_nonzero(x)),
            converged=False,
            solver_reason=f"fallback to minimum-norm solution: {err}",
        )
    Vh = unvec(ensemble.A @ x, ensemble.l)
    prof = sparsity_s(x)
    bound = None
    if solver == "omp" and not fallback:
        i0 = N - stats_["support_size"]
        if prof.p_star > 0 and 1 <= i0 < prof.i_star:
            try:
                bound = psnr_lower_bound(prof.s, prof.p_star, prof.i_star, i0, N, max_value).total
            except DomainError:
                bound = None
    rec = dict(
        E=float(prof.s) / N,
        psnr_db=psnr(V, Vh, max_value),
        mssim_block=mssim(V, Vh, max_value) if ensemble.l >= SSIM_WINDOW else None,
        bound_db=bound,
        s=float(prof.s),
        p_star=float(prof.p_star),
        i_star=int(prof.i_star),
        fallback=fallback,
        **stats_,
    )
    return Vh, rec


def reconstruct_image(
    image,
    ensemble,
    solver="bp",
    bp_params=None,
    omp_eps=1e-6,
    max_value=255.0,
    workers=1,
):
    """Sense and reconstruct ``image`` block by block.

    Returns the reconstructed image (same shape as ``image``) and one
    unclassified :class:`BlockRecord` per block, in row-major grid order.
    Blocks are independent, so ``workers > 1`` solves them on a thread
    pool without changing any result.
    """
    if solver not in ("omp", "bp"):
        raise InvalidInputError(f"unknown solver {solver!r}")
    grid, blocks = partition_blocks(image, ensemble.l)
    basis = NullSpaceBasis.from_qr(ensemble.Q, ensemble.R)

    def task(V):
        return _solve_block(V, ensemble, solver, bp_params, omp_eps, basis, max_value)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(task, blocks))
    else:
        results = [task(V) for V in blocks]
    records = []
    for k, (_, rec) in enumerate(results):
        r, c = grid.origin(k)
        records.append(BlockRecord(index=k, row=r, col=c, **rec))
    recon = assemble_blocks(grid, [Vh for Vh, _ in results])
    return recon, records


def classify(E, psnr_db, t0, r0):
    """Hypothesis class of one block."""
    if E > t0 and psnr_db >= r0:
        return TYPE_I
    if E <= t0 and psnr_db < r0:
        return TYPE_II
    return VALIDATED


def classify_hypothesis(records, t0, r0):
    """Label every record and count the classes.

    Returns new records (the inputs are not modified) and a
    :class:`Confusion`.
    """
    out = []
    conf = Confusion()
    for r in records:
        h = classify(r.E, r.psnr_db, t0, r0)
        setattr(conf, h, getattr(conf, h) + 1)
        out.append(dataclasses.replace(r, h_class=h))
    return out, conf


def run_experiment(image, config=None, name="image", ensemble=None):
    """Full run on one grayscale image.

    Returns ``(report, reconstruction)``.  A prebuilt ``ensemble`` may be
    shared between images; it must match ``config``.
    """
    config = config or RunConfig()
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 2:
        raise InvalidInputError("expected a 2D grayscale image")
    if ensemble is None:
        ensemble = gen_measurement_ensemble(config.block_size, config.rate, config.seed)
    elif ensemble.l != config.block_size:
        raise InvalidInputError(
            f"ensemble block side {ensemble.l} does not match block size {config.block_size}"
        )
    recon, records = reconstruct_image(
        image,
        ensemble,
        solver=config.solver,
        bp_params=config.bp_params(),
        omp_eps=config.eps,
        max_value=config.max_value,
        workers=config.workers,
    )
    records, conf = classify_hypothesis(records, config.t0, config.r0)
    echo = config.echo()
    echo.update(
        mask_generator=MASK_GENERATOR,
        effective_seed=ensemble.seed,
        K=ensemble.K,
        N=ensemble.N,
    )
    whole_mssim = mssim(image, recon, config.max_value) if min(image.shape) >= SSIM_WINDOW else None
    report = ReconstructionReport(
        name=name,
        height=image.shape[0],
        width=image.shape[1],
        config=echo,
        psnr_db=psnr(image, recon, config.max_value),
        mssim=whole_mssim,
        records=records,
        confusion=conf,
    )
    return report, recon


def aggregate_scatter(reports):
    """``(image, block, E, psnr_db, h_class)`` rows over all reports, in order."""
    return [
        ScatterRow(rep.name, r.index, r.E, r.psnr_db, r.h_class)
        for rep in reports
        for r in rep.records
    ]


def correlation_check(rows):
    """Spearman rank correlation between ``E`` and PSNR.

    ``rows`` holds :class:`ScatterRow` objects or ``(E, psnr)`` pairs.
    """
    pairs = [(r.E, r.psnr_db) if isinstance(r, ScatterRow) else tuple(r) for r in rows]
    if len(pairs) < 3:
        raise InvalidInputError(f"need at least 3 rows, got {len(pairs)}")
    E = np.array([p[0] for p in pairs], dtype=float)
    q = np.array([p[1] for p in pairs], dtype=float)
    if np.ptp(E) == 0 or np.ptp(q) == 0:
        raise InvalidInputError("rank correlation is undefined for a constant column")
    return float(stats.spearmanr(E, q).statistic)


def _num(v):
    if v is None:
        return None
    if isinstance(v, float) and math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return v


def _unnum(v):
    if v == "inf":
        return math.inf
    if v == "-inf":
        return -math.inf
    return v


def _record_dict(r):
    d = dataclasses.asdict(r)
    for k, v in d.items():
        d[k] = _num(v)
    if d["bound_db"] is None:
        d["bound_db"] = NOT_AVAILABLE
    return d


def report_to_json(report):
    """Deterministic JSON text for a report (sorted keys, ``inf`` as a string)."""
    doc = {
        "schema": report.schema,
        "image": {"name": report.name, "height": report.height, "width": report.width},
        "config": report.config,
        "whole_image": {"psnr_db": _num(report.psnr_db), "mssim": report.mssim},
        "confusion": report.confusion.as_dict(),
        "blocks": [_record_dict(r) for r in report.records],
    }
    return json.dumps(doc, sort_keys=True, indent=2, allow_nan=False) + "\n"


def report_from_json(text):
    doc = json.loads(text)
    if doc.get("schema") != REPORT_SCHEMA:
        raise InvalidInputError(f"unsupported report schema {doc.get('schema')!r}")
    records = []
    for d in doc["blocks"]:
        d = {k: _unnum(v) for k, v in d.items()}
        if d["bound_db"] == NOT_AVAILABLE:
            d["bound_db"] = None
        records.append(BlockRecord(**d))
    c = doc["confusion"]
    return ReconstructionReport(
        name=doc["image"]["name"],
        height=doc["image"]["height"],
        width=doc["image"]["width"],
        config=doc["config"],
        psnr_db=_unnum(doc["whole_image"]["psnr_db"]),
        mssim=doc["whole_image"]["mssim"],
        records=records,
        confusion=Confusion(c["type_I"], c["type_II"], c["validated"]),
        schema=doc["schema"],
    )


SCATTER_HEADER = ("image", "block", "E", "psnr_db", "h_class")


def write_scatter_csv(rows, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SCATTER_HEADER)
        for r in rows:
            w.writerow([r.image, r.block, repr(r.E), _num(r.psnr_db), r.h_class])


def read_scatter_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        rd = csv.reader(fh)
        header = next(rd, None)
        if tuple(header or ()) != SCATTER_HEADER:
            raise InvalidInputError(f"{path}: unexpected scatter header {header}")
        return [
            ScatterRow(img, int(b), float(E), float(_unnum(q)), h or None)
            for img, b, E, q, h in rd
        ]


PSNR_MAP_CEILING = 100.0


def block_maps(report):
    """``E``, PSNR and hypothesis-class arrays with one entry per block."""
    l = report.config["block_size"]
    rows = -(-report.height // l)
    cols = -(-report.width // l)
    E = np.zeros((rows, cols))
    Q = np.zeros((rows, cols))
    H = np.zeros((rows, cols), dtype=int)
    for r in report.records:
        i, j = r.row // l, r.col // l
        E[i, j] = r.E
        Q[i, j] = r.psnr_db
        H[i, j] = H_CLASSES.index(r.h_class) if r.h_class else 0
    return E, Q, H


def write_block_maps(report, prefix):
    """Write ``<prefix>_E.pgm``, ``<prefix>_psnr.pgm`` and ``<prefix>_H.pgm``.

    ``E`` in [0, 1] and PSNR in [0, 100] dB (clipped, ``inf`` at the top)
    are scaled to 0..255.  The class map stores 0 = validated,
    1 = type I, 2 = type II with maxval 2.
    """
    E, Q, H = block_maps(report)
    Qc = np.clip(np.where(np.isinf(Q), PSNR_MAP_CEILING, Q), 0.0, PSNR_MAP_CEILING)
    paths = [f"{prefix}_E.pgm", f"{prefix}_psnr.pgm", f"{prefix}_H.pgm"]
    write_pgm(paths[0], 255.0 * E)
    write_pgm(paths[1], 255.0 * Qc / PSNR_MAP_CEILING)
    write_pgm(paths[2], H, maxval=2)
    return paths
