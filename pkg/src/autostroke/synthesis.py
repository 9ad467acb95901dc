"""Stroke synthesis: fill the target region with copies of the exemplar.

Output stroke summaries are seeded by Poisson-disk sampling and refined by
EM-style iterations of the energy (1-w)*phi_neigh + w*phi_corr with
w(i) = (i/m)^2: each iteration matches every output neighborhood to its
cheapest exemplar neighborhood (bipartite matching plus mu times the patch
feature distance), computes density-weighted Voronoi centroids as correction
targets, and solves one global sparse least-squares system over all centroids
and directions.  Full strokes are reconstructed from the matched exemplar
strokes at the end.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dataclass_field
from typing import Callable

import numpy as np
from numba import njit, prange
from PIL import Image, ImageDraw
from scipy import ndimage, sparse
from scipy.sparse.linalg import cg
from scipy.spatial import cKDTree

from .assignment import assignment
from .constraints import OrientationMap, RadiusMap
from .errors import EmptyOutputError, PipelineCancelled
from .grouping import Exemplar
from .imagery import ReferenceImage, patch_features, patch_size_for_radius
from .model import Stroke, StrokeSource, StrokeSummary, reconstruct, summarize
from .sampling import poisson_disk_sample

DEFAULT_ITERATIONS = 15
DEFAULT_MU = 0.1
N_IN = 4
N_OUT = 1
UNMATCHED_PENALTY = 4.0
ANCHOR_WEIGHT = 0.1
CG_RTOL = 1e-6
CG_MAXITER = 200
OBJECTIVE_TOLERANCE = 1e-8


@dataclass
class SynthesisContext:
    """Everything synthesize needs; immutable for the duration of a run."""

    exemplar: Exemplar
    image: ReferenceImage
    mask: np.ndarray  # (H, W) bool target region
    orientation: OrientationMap
    radius: RadiusMap
    existing: list[Stroke] = dataclass_field(default_factory=list)
    seed: int = 0
    iterations: int = DEFAULT_ITERATIONS
    mu: float = DEFAULT_MU
    n_in: int = N_IN
    n_out: int = N_OUT
    id_start: int = 0
    should_cancel: Callable[[], bool] | None = None

    def __post_init__(self) -> None:
        if self.exemplar.k < 2:
            raise ValueError(f"exemplar must have k >= 2 strokes, got {self.exemplar.k}")
        if not np.asarray(self.mask).any():
            raise ValueError("target mask is empty")
        if self.iterations < 1:
            raise ValueError(f"iterations must be >= 1, got {self.iterations}")
        if self.mu < 0:
            raise ValueError(f"mu must be >= 0, got {self.mu}")


@dataclass
class SynthesisState:
    """Mutable per-iteration state: one summary row per output stroke."""

    positions: np.ndarray  # (N, 2)
    directions: np.ndarray  # (N, 2) unit or zero
    template: np.ndarray  # (N,) exemplar stroke index


@dataclass
class SynthesisDiagnostics:
    """Per-iteration solver records, mainly for tests and logging."""

    w_schedule: list[float] = dataclass_field(default_factory=list)
    objective_before: list[float] = dataclass_field(default_factory=list)
    objective_after: list[float] = dataclass_field(default_factory=list)


@dataclass
class SynthesisResult:
    strokes: list[Stroke]
    summaries: list[StrokeSummary]
    template: np.ndarray
    state: SynthesisState
    diagnostics: SynthesisDiagnostics


@njit(cache=True)
def _pair_cost(ou, oc, iu, ic, penalty):
    """Matching cost between one output and one input descriptor."""
    if oc == 0:
        return 0.0
    if ic == 0:
        return penalty * oc
    cost = np.empty((oc, ic))
    for e in range(oc):
        for f in range(ic):
            acc = 0.0
            for d in range(4):
                diff = ou[e, d] - iu[f, d]
                acc += diff * diff
            cost[e, f] = acc
    total, _ = assignment(cost)
    if oc > ic:
        total += penalty * (oc - ic)
    return total


@njit(cache=True, parallel=True)
def _match_all(out_u, out_cnt, in_u, in_cnt, d_img, mu, penalty):
    """Argmin exemplar stroke per output, plus the winner's entry pairing."""
    n = out_u.shape[0]
    k = in_u.shape[0]
    emax = out_u.shape[1]
    best = np.zeros(n, dtype=np.int64)
    best_cost = np.zeros(n)
    pairs = np.full((n, emax), -1, dtype=np.int64)
    for o in prange(n):
        bi = 0
        bc = np.inf
        for i in range(k):
            c = _pair_cost(out_u[o], out_cnt[o], in_u[i], in_cnt[i], penalty)
            c += mu * d_img[o, i]
            if c < bc:
                bc = c
                bi = i
        best[o] = bi
        best_cost[o] = bc
        oc = out_cnt[o]
        ic = in_cnt[bi]
        if oc > 0 and ic > 0:
            cost = np.empty((oc, ic))
            for e in range(oc):
                for f in range(ic):
                    acc = 0.0
                    for d in range(4):
                        diff = out_u[o, e, d] - in_u[bi, f, d]
                        acc += diff * diff
                    cost[e, f] = acc
            _, r2c = assignment(cost)
            for e in range(oc):
                pairs[o, e] = r2c[e]
    return best, best_cost, pairs


@njit(cache=True, parallel=True)
def _neighborhood_kernel(
    cpos, cdir, crad, cframes, spos, sdir, per_quadrant, u, cnt, nbr
):
    n = cpos.shape[0]
    msites = spos.shape[0]
    for o in prange(n):
        lim = 2.0 * crad[o]
        lim2 = lim * lim
        f00 = cframes[o, 0, 0]
        f01 = cframes[o, 0, 1]
        f10 = cframes[o, 1, 0]
        f11 = cframes[o, 1, 1]
        # per-quadrant nearest lists kept sorted by squared distance; ties
        # resolve to the lower site index because j is scanned ascending
        qd = np.full((4, per_quadrant), np.inf)
        qj = np.full((4, per_quadrant), -1, dtype=np.int64)
        for j in range(msites):
            if j == o:
                continue
            dx = spos[j, 0] - cpos[o, 0]
            dy = spos[j, 1] - cpos[o, 1]
            d2 = dx * dx + dy * dy
            if d2 >= lim2:
                continue
            lx = dx * f00 + dy * f10
            ly = dx * f01 + dy * f11
            if lx >= 0.0:
                q = 0 if ly >= 0.0 else 3
            else:
                q = 1 if ly >= 0.0 else 2
            k = per_quadrant
            while k > 0 and d2 < qd[q, k - 1]:
                k -= 1
            if k < per_quadrant:
                for t in range(per_quadrant - 1, k, -1):
                    qd[q, t] = qd[q, t - 1]
                    qj[q, t] = qj[q, t - 1]
                qd[q, k] = d2
                qj[q, k] = j
        c = 0
        r_o = crad[o]
        for q in range(4):
            for k in range(per_quadrant):
                j = qj[q, k]
                if j < 0:
                    break
                dx = spos[j, 0] - cpos[o, 0]
                dy = spos[j, 1] - cpos[o, 1]
                dvx = sdir[j, 0] - cdir[o, 0]
                dvy = sdir[j, 1] - cdir[o, 1]
                u[o, c, 0] = (dx * f00 + dy * f10) / r_o
                u[o, c, 1] = (dx * f01 + dy * f11) / r_o
                u[o, c, 2] = dvx * f00 + dvy * f10
                u[o, c, 3] = dvx * f01 + dvy * f11
                nbr[o, c] = j
                c += 1
        cnt[o] = c


def build_neighborhood(
    centers_pos: np.ndarray,
    centers_dir: np.ndarray,
    centers_rad: np.ndarray,
    centers_frames: np.ndarray,
    site_pos: np.ndarray,
    site_dir: np.ndarray,
    per_quadrant: int,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Quadrant-limited neighborhood descriptors for each center.

    Center c's candidates are sites strictly within 2 R(c) of it, excluding
    the site with c's own index.  Each candidate lands in a quadrant of the
    local frame; the ``per_quadrant`` nearest per quadrant are kept (ties by
    lower site index).  Entries are (position offset in local frame / R,
    direction offset in local frame), packed quadrant 0..3, nearest first.
    Returns (entries (N, 4q, 4), counts (N,), site index per entry).
    """
    n = len(centers_pos)
    emax = 4 * per_quadrant
    u = np.zeros((n, emax, 4))
    nbr = np.full((n, emax), -1, dtype=np.int64)
    cnt = np.zeros(n, dtype=np.int64)
    if n == 0 or len(site_pos) == 0:
        return u, cnt, nbr
    _neighborhood_kernel(
        np.ascontiguousarray(centers_pos, dtype=np.float64),
        np.ascontiguousarray(centers_dir, dtype=np.float64),
        np.ascontiguousarray(centers_rad, dtype=np.float64),
        np.ascontiguousarray(centers_frames, dtype=np.float64),
        np.ascontiguousarray(site_pos, dtype=np.float64),
        np.ascontiguousarray(site_dir, dtype=np.float64),
        per_quadrant,
        u,
        cnt,
        nbr,
    )
    return u, cnt, nbr


def neighborhood_distance(
    out_u: np.ndarray,
    in_u: np.ndarray,
    d_img: float = 0.0,
    mu: float = DEFAULT_MU,
    penalty: float = UNMATCHED_PENALTY,
) -> tuple[float, np.ndarray]:
    """Cost and entry pairing between one output and one input descriptor.

    Pair cost is the squared difference of entries; output entries left
    unmatched when the input has fewer pay ``penalty`` each; the image term
    adds mu * d_img.
    """
    ou = np.ascontiguousarray(out_u, dtype=np.float64).reshape(-1, 4)
    iu = np.ascontiguousarray(in_u, dtype=np.float64).reshape(-1, 4)
    oc, ic = len(ou), len(iu)
    if oc == 0 or ic == 0:
        return penalty * oc + mu * d_img, np.full(oc, -1, dtype=np.int64)
    diff = ou[:, None, :] - iu[None, :, :]
    cost = np.einsum("efd,efd->ef", diff, diff)
    total, r2c = assignment(cost)
    if oc > ic:
        total += penalty * (oc - ic)
    return total + mu * d_img, r2c


class _ExemplarData:
    """Precomputed exemplar arrays shared by every iteration."""

    def __init__(self, ctx: SynthesisContext):
        strokes = ctx.exemplar.strokes
        summaries = [summarize(s) for s in strokes]
        self.positions = np.array([s.centroid for s in summaries])
        self.directions = np.array([s.direction for s in summaries])
        self.radii = ctx.radius.at_many(self.positions)
        self.frames = ctx.orientation.frames_at(self.positions)
        patches = np.array([patch_size_for_radius(r) for r in self.radii])
        self.features = patch_features(ctx.image, self.positions, patches)
        self.u, self.cnt, _ = build_neighborhood(
            self.positions,
            self.directions,
            self.radii,
            self.frames,
            self.positions,
            self.directions,
            ctx.n_in,
        )


def _existing_summaries(ctx: SynthesisContext) -> tuple[np.ndarray, np.ndarray]:
    if not ctx.existing:
        return np.zeros((0, 2)), np.zeros((0, 2))
    summaries = [summarize(s) for s in ctx.existing]
    pos = np.array([s.centroid for s in summaries])
    direction = np.array([s.direction for s in summaries])
    return pos, direction


def working_mask(ctx: SynthesisContext) -> np.ndarray:
    """Target mask minus existing strokes dilated by their width."""
    wm = np.asarray(ctx.mask, dtype=bool).copy()
    if not ctx.existing:
        return wm
    h, w = wm.shape
    by_width: dict[float, list[Stroke]] = {}
    for s in ctx.existing:
        by_width.setdefault(float(s.width), []).append(s)
    for width, strokes in sorted(by_width.items()):
        im = Image.new("L", (w, h), 0)
        draw = ImageDraw.Draw(im)
        for s in strokes:
            pts = s.positions()
            if len(pts) == 1:
                x, y = pts[0]
                draw.point((x, y), fill=1)
            else:
                draw.line(pts, fill=1, width=1)
        raster = np.asarray(im, dtype=bool)
        if raster.any():
            wm &= ~(ndimage.distance_transform_edt(~raster) <= width)
    return wm


def _image_distances(
    ctx: SynthesisContext, positions: np.ndarray, radii: np.ndarray, ex: _ExemplarData
) -> np.ndarray:
    patches = np.array([patch_size_for_radius(r) for r in radii])
    feats = patch_features(ctx.image, positions, patches)
    diff = feats[:, None, :] - ex.features[None, :, :]
    return np.einsum("okd,okd->ok", diff, diff)


def initialize_output(
    ctx: SynthesisContext, ex: _ExemplarData | None = None
) -> tuple[SynthesisState, np.ndarray]:
    """Seed output summaries inside the working mask.

    Poisson-disk positions, templates by smallest patch feature distance,
    directions transported from the template's frame into the sample's.
    Returns the state and the working mask.
    """
    wm = working_mask(ctx)
    if not wm.any():
        raise EmptyOutputError("working mask is empty")
    samples = poisson_disk_sample(wm, ctx.radius.array, seed=ctx.seed)
    if len(samples) == 0:
        raise EmptyOutputError("no samples fit the working mask")
    if ex is None:
        ex = _ExemplarData(ctx)
    radii = ctx.radius.at_many(samples)
    d_img = _image_distances(ctx, samples, radii, ex)
    template = np.argmin(d_img, axis=1)
    frames_out = ctx.orientation.frames_at(samples)
    # v_out = O(sample) @ O(template)^T @ v_template
    local = np.einsum("nji,nj->ni", ex.frames[template], ex.directions[template])
    directions = np.einsum("nij,nj->ni", frames_out, local)
    state = SynthesisState(positions=samples, directions=directions, template=template)
    return state, wm


@njit(cache=True, parallel=True)
def _nearest_site_kernel(sx, sy, order, starts, nx, ny, x0, y0, cell, qx, qy, out):
    """Exact nearest site per query via a binned expanding-ring search.

    Ties go to the lower site index.  The ring lower bound subtracts the
    query's distance to its clipped home cell so queries outside the site
    bounding box stay correct.
    """
    for p in prange(qx.shape[0]):
        q_x = qx[p]
        q_y = qy[p]
        cx = int((q_x - x0) / cell)
        cy = int((q_y - y0) / cell)
        if cx < 0:
            cx = 0
        elif cx >= nx:
            cx = nx - 1
        if cy < 0:
            cy = 0
        elif cy >= ny:
            cy = ny - 1
        rx0 = x0 + cx * cell
        ry0 = y0 + cy * cell
        ddx = 0.0
        if q_x < rx0:
            ddx = rx0 - q_x
        elif q_x > rx0 + cell:
            ddx = q_x - (rx0 + cell)
        ddy = 0.0
        if q_y < ry0:
            ddy = ry0 - q_y
        elif q_y > ry0 + cell:
            ddy = q_y - (ry0 + cell)
        d_qc = np.sqrt(ddx * ddx + ddy * ddy)

        best = np.inf
        bi = -1
        rmax = cx
        if nx - 1 - cx > rmax:
            rmax = nx - 1 - cx
        if cy > rmax:
            rmax = cy
        if ny - 1 - cy > rmax:
            rmax = ny - 1 - cy
        for r in range(rmax + 1):
            if bi >= 0:
                lb = (r - 1) * cell - d_qc
                if lb > 0.0 and lb * lb > best:
                    break
            for gy in range(cy - r, cy + r + 1):
                if gy < 0 or gy >= ny:
                    continue
                ady = gy - cy if gy >= cy else cy - gy
                for gx in range(cx - r, cx + r + 1):
                    if gx < 0 or gx >= nx:
                        continue
                    adx = gx - cx if gx >= cx else cx - gx
                    cheb = adx if adx > ady else ady
                    if cheb != r:
                        continue
                    c = gy * nx + gx
                    for k in range(starts[c], starts[c + 1]):
                        j = order[k]
                        dx = sx[j] - q_x
                        dy = sy[j] - q_y
                        d2 = dx * dx + dy * dy
                        if d2 < best or (d2 == best and j < bi):
                            best = d2
                            bi = j
        out[p] = bi


def _bin_sites(sites: np.ndarray):
    """Bucket sites on a uniform grid of roughly one site per cell."""
    m = len(sites)
    x0 = float(sites[:, 0].min())
    y0 = float(sites[:, 1].min())
    xext = float(sites[:, 0].max()) - x0
    yext = float(sites[:, 1].max()) - y0
    cell = max(max(xext, yext) / max(np.sqrt(m), 1.0), 1e-9)
    nx = int(xext / cell) + 1
    ny = int(yext / cell) + 1
    cxi = np.minimum(((sites[:, 0] - x0) / cell).astype(np.int64), nx - 1)
    cyi = np.minimum(((sites[:, 1] - y0) / cell).astype(np.int64), ny - 1)
    cid = cyi * nx + cxi
    order = np.argsort(cid, kind="stable").astype(np.int64)
    counts = np.bincount(cid, minlength=nx * ny)
    starts = np.zeros(nx * ny + 1, dtype=np.int64)
    np.cumsum(counts, out=starts[1:])
    return order, starts, nx, ny, x0, y0, cell


def nearest_site(sites: np.ndarray, qx: np.ndarray, qy: np.ndarray) -> np.ndarray:
    """Index of the nearest site for each query point (ties: lower index)."""
    owner = np.empty(len(qx), dtype=np.int64)
    if len(qx) == 0:
        return owner
    order, starts, nx, ny, x0, y0, cell = _bin_sites(sites)
    _nearest_site_kernel(
        np.ascontiguousarray(sites[:, 0], dtype=np.float64),
        np.ascontiguousarray(sites[:, 1], dtype=np.float64),
        order,
        starts,
        nx,
        ny,
        x0,
        y0,
        cell,
        np.ascontiguousarray(qx, dtype=np.float64),
        np.ascontiguousarray(qy, dtype=np.float64),
        owner,
    )
    return owner


def _mask_grid(
    mask: np.ndarray, radius_array: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Pixel-center coordinates and density weights of the mask's pixels."""
    pys, pxs = np.nonzero(mask)
    qx = pxs + 0.5
    qy = pys + 0.5
    rho = 1.0 / radius_array[pys, pxs]
    return qx, qy, rho


def correction_centroids(
    positions: np.ndarray,
    mask: np.ndarray,
    radius_array: np.ndarray,
    extra_sites: np.ndarray | None = None,
    grid: tuple[np.ndarray, np.ndarray, np.ndarray] | None = None,
) -> np.ndarray:
    """Density-weighted Voronoi centroid for each output position.

    Mask pixels (density 1/R) are partitioned among all sites (outputs plus
    any extra same-layer centroids); each output's target is its cell's
    weighted centroid, or its current position when the cell is empty.
    ``grid`` short-circuits the mask pixel extraction when the caller loops.
    """
    n = len(positions)
    if extra_sites is not None and len(extra_sites):
        sites = np.vstack([positions, extra_sites])
    else:
        sites = positions
    if grid is None:
        grid = _mask_grid(mask, radius_array)
    qx, qy, rho = grid
    if len(qx) == 0 or n == 0:
        return positions.copy()
    owner = nearest_site(sites, qx, qy)
    wsum = np.bincount(owner, weights=rho, minlength=len(sites))[:n]
    wx = np.bincount(owner, weights=rho * qx, minlength=len(sites))[:n]
    wy = np.bincount(owner, weights=rho * qy, minlength=len(sites))[:n]
    out = positions.copy()
    has = wsum > 0
    out[has, 0] = wx[has] / wsum[has]
    out[has, 1] = wy[has] / wsum[has]
    return out


def _solve_cg(ata: sparse.csr_matrix, rhs: np.ndarray, x0: np.ndarray) -> np.ndarray:
    try:
        x, _ = cg(ata, rhs, x0=x0, rtol=CG_RTOL, maxiter=CG_MAXITER)
    except TypeError:  # older scipy spells the tolerance "tol"
        x, _ = cg(ata, rhs, x0=x0, tol=CG_RTOL, maxiter=CG_MAXITER)
    return x


class _IterationSystem:
    """One iteration's sparse least-squares systems for positions and directions."""

    def __init__(
        self,
        state: SynthesisState,
        frames: np.ndarray,
        radii: np.ndarray,
        out_nbr: np.ndarray,
        pairs: np.ndarray,
        best: np.ndarray,
        ex: _ExemplarData,
        site_pos: np.ndarray,
        site_dir: np.ndarray,
        centroids: np.ndarray,
        w: float,
    ):
        n = len(state.positions)
        s_n = float(np.sqrt(max(1.0 - w, 0.0)))
        s_c = float(np.sqrt(w))
        oo, ee = np.nonzero(pairs >= 0)
        ff = pairs[oo, ee]
        nbr = out_nbr[oo, ee]
        uin = ex.u[best[oo], ff]
        frames_o = frames[oo]
        tpos = radii[oo, None] * np.einsum("rij,rj->ri", frames_o, uin[:, :2])
        tdir = np.einsum("rij,rj->ri", frames_o, uin[:, 2:])
        is_var = nbr < n
        m = len(oo)

        rows = np.arange(m)
        row_idx = np.concatenate([rows, rows[is_var]])
        col_idx = np.concatenate([oo, nbr[is_var]])
        coeff = np.concatenate([np.full(m, -s_n), np.full(int(is_var.sum()), s_n)])

        # position system: neighborhood rows then correction rows
        prow = np.concatenate([row_idx, m + np.arange(n)])
        pcol = np.concatenate([col_idx, np.arange(n)])
        pdat = np.concatenate([coeff, np.full(n, s_c)])
        self.a_pos = sparse.coo_matrix((pdat, (prow, pcol)), shape=(m + n, n)).tocsr()
        bp = s_n * np.where(is_var[:, None], tpos, tpos - site_pos[nbr])
        self.b_pos = np.vstack([bp, s_c * centroids])

        # direction system: neighborhood rows then anchor rows
        a_s = ANCHOR_WEIGHT * s_n
        drow = np.concatenate([row_idx, m + np.arange(n)])
        dcol = np.concatenate([col_idx, np.arange(n)])
        ddat = np.concatenate([coeff, np.full(n, a_s)])
        self.a_dir = sparse.coo_matrix((ddat, (drow, dcol)), shape=(m + n, n)).tocsr()
        bd = s_n * np.where(is_var[:, None], tdir, tdir - site_dir[nbr])
        anchor = a_s * np.einsum("nij,nj->ni", frames, ex.directions[best])
        self.b_dir = np.vstack([bd, anchor])

    def objective(self, positions: np.ndarray, directions: np.ndarray) -> float:
        rp = self.a_pos @ positions - self.b_pos
        rd = self.a_dir @ directions - self.b_dir
        return float(np.sum(rp * rp) + np.sum(rd * rd))

    def solve(
        self, positions: np.ndarray, directions: np.ndarray
    ) -> tuple[np.ndarray, np.ndarray]:
        ata = (self.a_pos.T @ self.a_pos).tocsr()
        new_pos = np.empty_like(positions)
        for axis in range(2):
            rhs = self.a_pos.T @ self.b_pos[:, axis]
            new_pos[:, axis] = _solve_cg(ata, rhs, positions[:, axis])
        ata = (self.a_dir.T @ self.a_dir).tocsr()
        new_dir = np.empty_like(directions)
        for axis in range(2):
            rhs = self.a_dir.T @ self.b_dir[:, axis]
            new_dir[:, axis] = _solve_cg(ata, rhs, directions[:, axis])
        return new_pos, new_dir


def _renormalize(directions: np.ndarray) -> np.ndarray:
    norms = np.hypot(directions[:, 0], directions[:, 1])
    out = directions.copy()
    ok = norms > 1e-9
    out[ok] /= norms[ok, None]
    out[~ok] = 0.0
    return out


def _project_into(
    positions: np.ndarray, mask: np.ndarray, nearest_idx: tuple[np.ndarray, np.ndarray]
) -> np.ndarray:
    h, w = mask.shape
    out = positions.copy()
    ix = np.clip(out[:, 0].astype(np.int64), 0, w - 1)
    iy = np.clip(out[:, 1].astype(np.int64), 0, h - 1)
    outside = ~mask[iy, ix]
    oob = (positions[:, 0] < 0) | (positions[:, 0] >= w) | (positions[:, 1] < 0) | (
        positions[:, 1] >= h
    )
    fix = outside | oob
    if fix.any():
        ny, nx = nearest_idx
        out[fix, 0] = nx[iy[fix], ix[fix]] + 0.5
        out[fix, 1] = ny[iy[fix], ix[fix]] + 0.5
    return out


def total_energy(state: SynthesisState, ctx: SynthesisContext, w: float) -> float:
    """(1-w) * phi_neigh + w * phi_corr for the given state."""
    ex = _ExemplarData(ctx)
    ext_pos, ext_dir = _existing_summaries(ctx)
    site_pos = np.vstack([state.positions, ext_pos]) if len(ext_pos) else state.positions
    site_dir = (
        np.vstack([state.directions, ext_dir]) if len(ext_dir) else state.directions
    )
    frames = ctx.orientation.frames_at(state.positions)
    radii = ctx.radius.at_many(state.positions)
    out_u, out_cnt, _ = build_neighborhood(
        state.positions, state.directions, radii, frames, site_pos, site_dir, ctx.n_out
    )
    d_img = _image_distances(ctx, state.positions, radii, ex)
    _, costs, _ = _match_all(
        out_u, out_cnt, ex.u, ex.cnt, d_img, ctx.mu, UNMATCHED_PENALTY
    )
    phi_neigh = float(costs.sum())

    extra = _voronoi_extra_sites(ctx, ext_pos)
    cent = correction_centroids(state.positions, ctx.mask, ctx.radius.array, extra)
    diff = state.positions - cent
    phi_corr = float(np.sum(diff * diff))
    return (1.0 - w) * phi_neigh + w * phi_corr


def quantization_energy(
    positions: np.ndarray, mask: np.ndarray, radius_array: np.ndarray
) -> float:
    """Sum over mask pixels of density/R times squared distance to the nearest output."""
    pix = np.argwhere(mask)
    if len(pix) == 0 or len(positions) == 0:
        return 0.0
    centers = np.stack([pix[:, 1] + 0.5, pix[:, 0] + 0.5], axis=1)
    tree = cKDTree(positions)
    dist, _ = tree.query(centers, workers=-1)
    rho = 1.0 / radius_array[pix[:, 0], pix[:, 1]]
    return float(np.sum(rho * dist * dist))


def _voronoi_extra_sites(ctx: SynthesisContext, ext_pos: np.ndarray) -> np.ndarray:
    """Existing-stroke centroids near enough to the region to own mask pixels."""
    if len(ext_pos) == 0:
        return ext_pos
    h, w = ctx.mask.shape
    reach = 2.0 * ctx.radius.max_radius
    dist_out = ndimage.distance_transform_edt(~ctx.mask)
    ix = np.clip(ext_pos[:, 0].astype(np.int64), 0, w - 1)
    iy = np.clip(ext_pos[:, 1].astype(np.int64), 0, h - 1)
    keep = dist_out[iy, ix] <= reach
    return ext_pos[keep]


def synthesize(ctx: SynthesisContext) -> SynthesisResult:
    """Run the full EM loop and reconstruct the suggested strokes."""
    ex = _ExemplarData(ctx)
    state, wm = initialize_output(ctx, ex)
    ext_pos, ext_dir = _existing_summaries(ctx)
    extra_voronoi = _voronoi_extra_sites(ctx, ext_pos)
    grid = _mask_grid(ctx.mask, ctx.radius.array)
    _, nearest_idx = ndimage.distance_transform_edt(~wm, return_indices=True)
    nearest_idx = (nearest_idx[0], nearest_idx[1])

    diag = SynthesisDiagnostics()
    m = ctx.iterations
    n = len(state.positions)
    for it in range(1, m + 1):
        if ctx.should_cancel is not None and ctx.should_cancel():
            raise PipelineCancelled(f"synthesis cancelled before iteration {it}")
        w = (it / m) ** 2
        diag.w_schedule.append(w)

        frames = ctx.orientation.frames_at(state.positions)
        radii = ctx.radius.at_many(state.positions)
        site_pos = np.vstack([state.positions, ext_pos]) if len(ext_pos) else state.positions
        site_dir = (
            np.vstack([state.directions, ext_dir]) if len(ext_dir) else state.directions
        )
        out_u, out_cnt, out_nbr = build_neighborhood(
            state.positions, state.directions, radii, frames, site_pos, site_dir, ctx.n_out
        )
        d_img = _image_distances(ctx, state.positions, radii, ex)
        best, _, pairs = _match_all(
            out_u, out_cnt, ex.u, ex.cnt, d_img, ctx.mu, UNMATCHED_PENALTY
        )
        state.template = best

        cent = correction_centroids(
            state.positions, ctx.mask, ctx.radius.array, extra_voronoi, grid=grid
        )
        system = _IterationSystem(
            state, frames, radii, out_nbr, pairs, best, ex,
            site_pos, site_dir, cent, w,
        )
        before = system.objective(state.positions, state.directions)
        if w >= 1.0:
            new_pos, new_dir = cent.copy(), state.directions.copy()
        else:
            new_pos, new_dir = system.solve(state.positions, state.directions)
        after = system.objective(new_pos, new_dir)
        if after > before * (1.0 + OBJECTIVE_TOLERANCE) + 1e-12:
            raise RuntimeError(
                f"iteration {it}: least-squares objective rose from {before} to {after}"
            )
        diag.objective_before.append(before)
        diag.objective_after.append(after)

        state.positions = _project_into(new_pos, wm, nearest_idx)
        state.directions = _renormalize(new_dir)

    strokes: list[Stroke] = []
    summaries: list[StrokeSummary] = []
    h, w_img = wm.shape
    mask = np.asarray(ctx.mask, dtype=bool)
    for o in range(n):
        x, y = state.positions[o]
        ix = min(max(int(x), 0), w_img - 1)
        iy = min(max(int(y), 0), h - 1)
        if not mask[iy, ix]:
            continue
        summary = StrokeSummary(
            centroid=(float(x), float(y)),
            direction=(float(state.directions[o, 0]), float(state.directions[o, 1])),
        )
        template_stroke = ctx.exemplar.strokes[int(state.template[o])]
        stroke = reconstruct(template_stroke, summary)
        stroke.id = ctx.id_start + len(strokes)
        stroke.source = StrokeSource.AUTOCOMPLETED
        strokes.append(stroke)
        summaries.append(summary)
    return SynthesisResult(
        strokes=strokes,
        summaries=summaries,
        template=state.template,
        state=state,
        diagnostics=diag,
    )
