"""Wide-field vector field maps from per-NV ODMR splittings.

Each NV only reports ``|B . n|`` along its own <111> axis.  Cells holding
NVs with at least three independent axes are inverted by least squares over
the sign patterns of the projections.  The result is still defined only up
to a global sign per cell (``B`` and ``-B`` give identical spectra), and
fields with a vanishing cube component admit further candidates.  Cells are
resolved by continuity with already-resolved neighbors; the seed of each
connected region follows the optional ``reference`` prior or else the
positive-octant convention and is flagged.
"""

from __future__ import annotations

import io
import itertools
import warnings
from dataclasses import dataclass

import numpy as np

from .constants import GYRO_E
from .errors import InvalidArgument, UnderdeterminedCell
from .gmi import DomainChain, stray_field

AXES_111 = np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]], dtype=float) / np.sqrt(3.0)

# linear-projection model validity bound, T
VALIDITY_LIMIT = 3e-3
# sign patterns fitting within this fraction of the projection scale are
# treated as indistinguishable by the data
CANDIDATE_RTOL = 0.005


@dataclass(frozen=True)
class NvSite:
    position: tuple
    axis: tuple
    odmr_splitting: float = np.nan

    def __post_init__(self):
        axis = np.asarray(self.axis, dtype=float)
        if axis.shape != (3,) or not np.isclose(np.linalg.norm(axis), 1.0, atol=1e-12):
            raise InvalidArgument("axis must be a unit 3-vector")
        if not np.any(np.all(np.isclose(np.abs(AXES_111 @ axis), 1.0, atol=1e-9)[..., None], axis=-1)):
            raise InvalidArgument("axis must be one of the four <111> orientations")
        object.__setattr__(self, "position", tuple(float(p) for p in self.position))
        object.__setattr__(self, "axis", tuple(float(a) for a in axis))


def forward_map(chain: DomainChain, sites, gyro_e=GYRO_E):
    """Zeeman splittings ``2 gamma |B . n|`` (Hz) at every site."""
    pos = np.array([s.position for s in sites])
    axes = np.array([s.axis for s in sites])
    b = stray_field(chain, pos)
    big = np.linalg.norm(b, axis=1).max()
    if big > VALIDITY_LIMIT:
        warnings.warn(f"|B| = {big:.3g} T exceeds the {VALIDITY_LIMIT:g} T linear-projection bound", RuntimeWarning, stacklevel=2)
    return 2.0 * gyro_e * np.abs(np.sum(b * axes, axis=1))


def with_splittings(sites, splittings):
    return [NvSite(s.position, s.axis, float(v)) for s, v in zip(sites, splittings)]


def cell_candidates(sites, gyro_e=GYRO_E, rtol=CANDIDATE_RTOL):
    """Least-squares solutions over sign patterns, one per +/- gauge pair.

    Fields along different cube axes have identical projection magnitudes on
    the four <111> axes, so every pattern whose residual lies within
    ``rtol`` (relative to the projection scale) of the best one is kept and
    left to the continuity step in ``reconstruct``.  Returns the candidates (k, 3) and the best
    residual norm.
    """
    axes = np.array([s.axis for s in sites])
    if len(sites) < 3 or np.linalg.matrix_rank(axes, tol=1e-9) < 3:
        raise UnderdeterminedCell(f"cell has rank-deficient axis set ({len(sites)} sites)")
    m = np.array([s.odmr_splitting for s in sites]) / (2.0 * gyro_e)
    if not np.all(np.isfinite(m)) or np.any(m < 0):
        raise InvalidArgument("splittings must be finite and non-negative")
    pinv = np.linalg.pinv(axes)
    sols, res = [], []
    for tail in itertools.product((1.0, -1.0), repeat=len(sites) - 1):
        target = np.concatenate([[1.0], tail]) * m
        b = pinv @ target
        sols.append(b)
        res.append(np.linalg.norm(np.abs(axes @ b) - m))
    res = np.array(res)
    scale = max(float(np.linalg.norm(m)), 1e-30)
    keep = res <= res.min() + rtol * scale
    return np.array(sols)[keep], float(res.min())


@dataclass(frozen=True)
class FieldMap:
    x: np.ndarray
    y: np.ndarray
    bx: np.ndarray
    by: np.ndarray
    bz: np.ndarray
    b_abs: np.ndarray
    valid: np.ndarray
    flagged: np.ndarray
    residual: np.ndarray
    method: str = "lsq-continuity"

    @property
    def vectors(self):
        return np.column_stack([self.bx, self.by, self.bz])

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("x,y,Bx,By,Bz,|B|\n")
        for row in zip(self.x, self.y, self.bx, self.by, self.bz, self.b_abs):
            buf.write(",".join(repr(float(v)) for v in row) + "\n")
        return buf.getvalue()

    def to_document(self) -> dict:
        return {
            "method": self.method,
            "n_cells": int(len(self.x)),
            "invalid_cells": [int(i) for i in np.nonzero(~self.valid)[0]],
            "flagged_cells": [int(i) for i in np.nonzero(self.flagged)[0]],
            "max_residual_T": float(np.nanmax(self.residual)) if np.any(self.valid) else None,
        }


def _neighbors(idx, shape, n, reach=1):
    if shape is None:
        return [j for j in range(idx - reach, idx + reach + 1) if j != idx and 0 <= j < n]
    ny, nx = shape
    r, c = divmod(idx, nx)
    out = []
    for dr in range(-reach, reach + 1):
        for dc in range(-reach, reach + 1):
            rr, cc = r + dr, c + dc
            if (dr or dc) and 0 <= rr < ny and 0 <= cc < nx:
                out.append(rr * nx + cc)
    return out


def _predict(i, nbrs, centers, out):
    """Local linear extrapolation of the resolved field to cell ``i``."""
    d = centers[nbrs] - centers[i]
    A = np.column_stack([np.ones(len(nbrs)), d])
    keep = np.ptp(d, axis=0) > 0
    A = A[:, np.concatenate([[True], keep])]
    if len(nbrs) > A.shape[1] and np.linalg.matrix_rank(A) == A.shape[1]:
        coef, *_ = np.linalg.lstsq(A, out[nbrs], rcond=None)
        return coef[0]
    return out[nbrs].mean(axis=0)


def reconstruct(cells, shape=None, reference=None, strict=False, rtol=CANDIDATE_RTOL, gyro_e=GYRO_E) -> FieldMap:
    """Invert per-cell splittings into a vector field map.

    Sign and cube-axis ambiguities are settled by a deterministic flood
    fill: the least ambiguous cell (fewest candidates, then raster order)
    seeds a region, and the frontier cell with the fewest candidates is
    resolved next by picking the candidate closest to a local linear
    extrapolation of the resolved cells around it.  A seed follows
    ``reference`` if given, otherwise it takes its best-fitting candidate
    with the sign in the positive octant, and is flagged.  ``residual``
    holds the projection misfit of the chosen vector.

    Parameters
    ----------
    cells : sequence of sequences of NvSite
        Sites grouped by cell, in raster order.
    shape : (ny, nx), optional
        Grid shape for the neighbor structure; None treats the cells as a chain.
    reference : callable or array (n_cells, 3), optional
        Sign prior for seed cells.
    strict : bool
        Raise UnderdeterminedCell instead of marking the cell invalid.
    rtol : float
        Candidate tolerance passed to ``cell_candidates``; it should exceed
        the relative error of the splittings.
    """
    n = len(cells)
    if shape is not None and shape[0] * shape[1] != n:
        raise InvalidArgument("shape does not match the number of cells")
    centers = np.array([np.mean([s.position for s in c], axis=0) if len(c) else [np.nan] * 3 for c in cells])
    out = np.full((n, 3), np.nan)
    valid = np.zeros(n, dtype=bool)
    flagged = np.zeros(n, dtype=bool)
    residual = np.full(n, np.nan)
    cands = [None] * n
    cand_res = [None] * n
    for i, cell in enumerate(cells):
        try:
            c, _ = cell_candidates(cell, gyro_e, rtol)
        except UnderdeterminedCell:
            if strict:
                raise
            continue
        cands[i] = np.concatenate([c, -c])
        axes = np.array([s.axis for s in cell])
        m = np.array([s.odmr_splitting for s in cell]) / (2.0 * gyro_e)
        cand_res[i] = np.linalg.norm(np.abs(cands[i] @ axes.T) - m, axis=1)
    pending = {i for i in range(n) if cands[i] is not None}
    while pending:
        frontier = [i for i in pending if any(valid[j] for j in _neighbors(i, shape, n))]
        if frontier:
            i = min(frontier, key=lambda k: (len(cands[k]), k))
            nbrs = [j for j in _neighbors(i, shape, n, reach=2) if valid[j]]
            guess = _predict(i, nbrs, centers, out)
            score = [np.sum((c - guess) ** 2) for c in cands[i]]
        else:
            i = min(pending, key=lambda k: (len(cands[k]), k))
            flagged[i] = True
            if reference is not None:
                ref = reference(centers[i]) if callable(reference) else np.asarray(reference)[i]
                score = [np.sum((c - ref) ** 2) for c in cands[i]]
            else:
                # best fit, with the +/- gauge fixed by the positive octant
                order = np.lexsort((-cands[i].sum(axis=1), cand_res[i]))
                score = np.argsort(order)
        k = int(np.argmin(score))
        out[i] = cands[i][k]
        residual[i] = cand_res[i][k]
        valid[i] = True
        pending.discard(i)
    b_abs = np.sqrt(np.sum(out**2, axis=1))
    return FieldMap(centers[:, 0], centers[:, 1], out[:, 0], out[:, 1], out[:, 2], b_abs, valid, flagged, residual)


def default_sites(x=np.arange(0.0, 50.01e-6, 2.5e-6), y=np.arange(-20e-6, 20.01e-6, 2.5e-6), z=-12.5e-6, offset=0.05e-6):
    """Raster of cells, each holding four NVs (one per <111> axis) placed
    symmetrically ``offset`` from the cell center.  Returns (cells, shape)."""
    shifts = offset * np.array([[1, 0, 0], [0, 1, 0], [-1, 0, 0], [0, -1, 0]], dtype=float)
    cells = []
    for yy in y:
        for xx in x:
            c = np.array([xx, yy, z])
            cells.append([NvSite(tuple(c + shifts[k]), tuple(AXES_111[k])) for k in range(4)])
    return cells, (len(y), len(x))


def simulate_map(chain: DomainChain, cells, gyro_e=GYRO_E):
    """Fill every site's splitting from the chain's stray field."""
    flat = [s for c in cells for s in c]
    split = forward_map(chain, flat, gyro_e)
    filled, k = [], 0
    for c in cells:
        filled.append(with_splittings(c, split[k : k + len(c)]))
        k += len(c)
    return filled


def group_sites(sites, centers, radius=2e-6):
    """Assign each site to the nearest center within ``radius`` (m)."""
    centers = np.asarray(centers, dtype=float)
    cells = [[] for _ in range(len(centers))]
    for s in sites:
        d = np.linalg.norm(centers - np.asarray(s.position), axis=1)
        j = int(np.argmin(d))
        if d[j] <= radius:
            cells[j].append(s)
    return cells
