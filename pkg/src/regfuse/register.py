"""Dual-branch self-supervised registration by direct field optimization.

Two coarse control grids parameterize the directional deformation fields
(infrared toward visible and back). A second branch optimizes the same
objective on a patch-scrambled copy of the pair; unscrambling its outputs
makes the branches comparable, and a consistency term ties them together.
Descent is coarse-to-fine over an image pyramid using central-difference
gradients on the control parameters with a backtracking line search, so
the recorded objective trace is non-increasing within each level.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from . import kernels, scramble
from .image import DisplacementField, Image, gaussian_kernel
from .losses import LossConfig

NDA_FULL = "full"
NDA_SOBEL_L2 = "sobel_l2"
NDA_OFF = "off"


@dataclass(frozen=True)
class ControlGrid:
    """Coarse parametric displacement field: a gh x gw grid of 2-vectors
    bilinearly upsampled to the target raster."""

    params: np.ndarray  # (gh, gw, 2), pixel units
    width: int
    height: int

    def __post_init__(self):
        p = np.ascontiguousarray(np.asarray(self.params, dtype=np.float64))
        if p.ndim != 3 or p.shape[2] != 2 or p.shape[0] < 2 or p.shape[1] < 2:
            raise ValueError("params must be (gh, gw, 2) with gh, gw >= 2")
        if not np.all(np.isfinite(p)):
            raise ValueError("control parameters must be finite")
        if self.width < 2 or self.height < 2:
            raise ValueError("target raster must be at least 2x2")
        object.__setattr__(self, "params", p)

    @classmethod
    def zero(cls, gw: int, gh: int, width: int, height: int) -> "ControlGrid":
        return cls(np.zeros((gh, gw, 2)), width, height)


def densify(grid: ControlGrid) -> DisplacementField:
    """Bilinear upsampling of the control vectors to a dense field; exact
    at control-point locations."""
    dx, dy = kernels.densify_bilinear(grid.params, grid.height, grid.width)
    return DisplacementField(dx, dy)


@dataclass(frozen=True)
class RegisterConfig:
    """Optimizer settings.

    ``max_iterations`` is the total descent budget, split evenly across
    pyramid levels. The coarsest level is seeded from the best constant
    shift / center-scaling candidate before descent (skipped when the
    budget is zero, which returns the identity configuration).
    """

    grid_w: int = 8
    grid_h: int = 8
    step_px: float = 0.1
    max_iterations: int = 300
    fd_epsilon: float = 0.25
    pyramid_levels: int = 3
    rel_tol: float = 1e-5
    scramble_n: int = 2
    lam_epr: float = 0.1
    lam_smooth: float = 1.0
    lam_ic: float = 0.05
    lam_ss: float = 0.1
    recon_sigma: float = 1.0
    init_shift_range: int = 6
    init_margin_range: int = 16
    max_halvings: int = 12
    loss: LossConfig = field(default_factory=LossConfig)
    # ablation switches (all off in the default configuration)
    nda_mode: str = NDA_FULL
    include_recon_pairs: bool = True
    freeze_reverse: bool = False
    include_reverse_terms: bool = True

    def __post_init__(self):
        if min(self.grid_w, self.grid_h) < 2:
            raise ValueError("grid must be at least 2x2")
        if self.step_px <= 0 or self.fd_epsilon <= 0:
            raise ValueError("step_px and fd_epsilon must be positive")
        if self.max_iterations < 0:
            raise ValueError("max_iterations must be non-negative")
        if self.pyramid_levels < 1:
            raise ValueError("pyramid_levels must be at least 1")
        if self.nda_mode not in (NDA_FULL, NDA_SOBEL_L2, NDA_OFF):
            raise ValueError(f"unknown nda_mode {self.nda_mode!r}")
        for name in ("lam_epr", "lam_smooth", "lam_ic", "lam_ss"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")

    @property
    def divisor(self) -> int:
        """Dimension divisor the input pair must satisfy."""
        return 2 * max(self.scramble_n, 1) * 2 ** (self.pyramid_levels - 1)


def ablation_switches(cfg: RegisterConfig, experiment: Optional[str]) -> RegisterConfig:
    """Derive an ablation configuration from the full one.

    exp1  replace the edge-match term with a plain Sobel-magnitude L2
    exp2  drop the edge-match term
    exp3  drop the reconstruction pairs from the branch-consistency term
    exp4  single-direction: freeze the reverse field, drop the residual
          and inverse-consistency couplings
    exp5  drop the scrambled branch and its consistency term entirely
    """
    if experiment is None or experiment == "":
        return cfg
    key = experiment.lower()
    if key == "exp1":
        return replace(cfg, nda_mode=NDA_SOBEL_L2)
    if key == "exp2":
        return replace(cfg, nda_mode=NDA_OFF)
    if key == "exp3":
        return replace(cfg, include_recon_pairs=False)
    if key == "exp4":
        return replace(
            cfg,
            freeze_reverse=True,
            include_reverse_terms=False,
            lam_epr=0.0,
            lam_ic=0.0,
        )
    if key == "exp5":
        return replace(cfg, lam_ss=0.0)
    raise ValueError(f"unknown ablation experiment {experiment!r}")


@dataclass(frozen=True)
class RegistrationResult:
    """Registration output: directional fields, warped images, and
    reconstruction surrogates, plus the per-iteration loss trace."""

    flow_ir: DisplacementField
    flow_vis: DisplacementField
    ir_warped: Image
    vis_warped: Image
    ir_recon: Image
    vis_recon: Image
    trace: tuple
    converged: bool


def fd_gradient(objective: Callable, params: list, eps: float) -> list:
    """Central-difference gradient of ``objective`` over a list of
    parameter arrays: (f(x+e) - f(x-e)) / 2e per scalar entry."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    work = [np.array(p, dtype=np.float64) for p in params]
    grads = [np.zeros_like(p) for p in work]
    for gi, p in enumerate(work):
        flat = p.reshape(-1)
        gflat = grads[gi].reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            fp = objective(work)
            flat[i] = orig - eps
            fm = objective(work)
            flat[i] = orig
            if not (math.isfinite(fp) and math.isfinite(fm)):
                raise ValueError("objective returned a non-finite value")
            gflat[i] = (fp - fm) / (2.0 * eps)
    return grads


# ---------------------------------------------------------------------------
# objective machinery (array level)
# ---------------------------------------------------------------------------


def _edge_data(plane, threshold):
    gx, gy = kernels.sobel_xy(plane)
    return kernels.edge_mask(gx, gy, threshold), gx, gy


class _NdaDirection:
    """Static half of the edge-match term for one direction: anchors on
    the moving image and their match against the fixed image. Anchors
    with no fixed-image match never contribute and are dropped upfront."""

    def __init__(self, moving, fixed, cfg: RegisterConfig):
        lc = cfg.loss
        self.offsets = kernels.sorted_offsets(lc.match_radius)
        mask, gx, gy = _edge_data(moving, lc.edge_threshold)
        ys, xs = np.nonzero(mask)
        ays = ys.astype(np.int64)
        axs = xs.astype(np.int64)
        angs = np.arctan2(gy[ays, axs], gx[ays, axs])
        fmask, fgx, fgy = _edge_data(fixed, lc.edge_threshold)
        if len(ays):
            f1, p1, q1 = kernels.match_edges(
                ays, axs, angs, fmask, fgx, fgy, self.offsets
            )
            keep = f1 != 0
            self.ays = ays[keep]
            self.axs = axs[keep]
            self.angs = angs[keep]
            self.p1 = p1[keep]
            self.q1 = q1[keep]
        else:
            self.ays = ays
            self.axs = axs
            self.angs = angs
            self.p1 = np.zeros(0)
            self.q1 = np.zeros(0)
        self.threshold = lc.edge_threshold
        self.fixed_sobel_mag = np.hypot(fgx, fgy)

    def value(self, aligned_plane, mode: str) -> float:
        if mode == NDA_OFF:
            return 0.0
        if mode == NDA_SOBEL_L2:
            gx, gy = kernels.sobel_xy(aligned_plane)
            d = np.hypot(gx, gy) - self.fixed_sobel_mag
            return float(np.mean(d * d))
        if len(self.ays) == 0:
            return 0.0
        amask, agx, agy = _edge_data(aligned_plane, self.threshold)
        f2, p2, q2 = kernels.match_edges(
            self.ays, self.axs, self.angs, amask, agx, agy, self.offsets
        )
        sel = f2 != 0
        if not np.any(sel):
            return 0.0
        dp = self.p1[sel] - p2[sel]
        return float(np.mean(dp * dp)) + float(np.mean(np.abs(self.q1[sel] - q2[sel])))


class _BranchData:
    """Static per-level data for one branch (plain or scrambled pair)."""

    def __init__(self, ir, vis, cfg: RegisterConfig):
        self.ir = ir
        self.vis = vis
        self.nda_ir = _NdaDirection(ir, vis, cfg)
        self.nda_vis = _NdaDirection(vis, ir, cfg)


class _LevelProblem:
    """One pyramid level of the dual-branch objective.

    Parameters are four (gh, gw, 2) grids: plain forward/reverse ("p",
    "n") and scrambled forward/reverse ("ps", "ns"). Term evaluation is
    split by parameter group so finite differences only recompute what a
    perturbation can change; cached cross-group tensors stay valid
    because the remaining terms are constant under the perturbation and
    cancel in the central difference. With the consistency weight at
    zero the scrambled branch is dropped entirely.
    """

    GROUPS = ("p", "n", "ps", "ns")

    def __init__(self, ir, vis, transcript, cfg: RegisterConfig):
        self.cfg = cfg
        self.h, self.w = ir.shape
        self.dual = cfg.lam_ss > 0
        self.plain = _BranchData(ir, vis, cfg)
        gx, gy = kernels.sobel_xy(ir)
        self._ir_mag = np.hypot(gx, gy)
        self._ir_mask = kernels.edge_mask(gx, gy, cfg.loss.edge_threshold)
        gx, gy = kernels.sobel_xy(vis)
        self._vis_mag = np.hypot(gx, gy)
        self._vis_mask = kernels.edge_mask(gx, gy, cfg.loss.edge_threshold)
        self.transcript = transcript
        if self.dual:
            ir_s = scramble.scramble_array(ir, transcript)
            vis_s = scramble.scramble_array(vis, transcript)
            self.scrambled = _BranchData(ir_s, vis_s, cfg)
            gy, gx, a, b, c, d = scramble.unscramble_maps(transcript)
            self.ugy, self.ugx = gy, gx
            self.uact = (a, b, c, d)
        self.recon_kernel = gaussian_kernel(cfg.recon_sigma)
        self.grids = {g: np.zeros((cfg.grid_h, cfg.grid_w, 2)) for g in self.GROUPS}
        self.cache = {}

    # -- plumbing ----------------------------------------------------------

    def active_groups(self):
        groups = ["p"]
        if not self.cfg.freeze_reverse:
            groups.append("n")
        if self.dual:
            groups.append("ps")
            if not self.cfg.freeze_reverse:
                groups.append("ns")
        return tuple(groups)

    def _dense(self, grid_params):
        return kernels.densify_bilinear(grid_params, self.h, self.w)

    def _unscramble_plane(self, plane):
        return kernels.gather_plane(plane, self.ugy, self.ugx)

    def _unscramble_field(self, dx, dy):
        a, b, c, d = self.uact
        return kernels.gather_field(dx, dy, self.ugy, self.ugx, a, b, c, d)

    def _recon(self, plane):
        return kernels.gaussian_blur_sep(plane, self.recon_kernel)

    def refresh_cache(self):
        """Recompute every parameter-dependent tensor for the current grids."""
        c = {}
        for g in self.GROUPS if self.dual else ("p", "n"):
            dx, dy = self._dense(self.grids[g])
            c[g + "_dx"], c[g + "_dy"] = dx, dy
        c["ir_w"] = kernels.warp_bilinear(self.plain.ir, c["p_dx"], c["p_dy"])
        c["vis_w"] = kernels.warp_bilinear(self.plain.vis, c["n_dx"], c["n_dy"])
        if self.dual:
            c["ir_r"] = self._recon(c["ir_w"])
            c["vis_r"] = self._recon(c["vis_w"])
            irs_w = kernels.warp_bilinear(self.scrambled.ir, c["ps_dx"], c["ps_dy"])
            viss_w = kernels.warp_bilinear(self.scrambled.vis, c["ns_dx"], c["ns_dy"])
            c["irs_w"] = irs_w
            c["viss_w"] = viss_w
            c["irs_u"] = self._unscramble_plane(irs_w)
            c["viss_u"] = self._unscramble_plane(viss_w)
            c["irs_ru"] = self._recon(c["irs_u"])
            c["viss_ru"] = self._recon(c["viss_u"])
            c["ps_udx"], c["ps_udy"] = self._unscramble_field(c["ps_dx"], c["ps_dy"])
            c["ns_udx"], c["ns_udy"] = self._unscramble_field(c["ns_dx"], c["ns_dy"])
        self.cache = c

    # -- term evaluation ---------------------------------------------------

    def _pair_value(self, a, b):
        lc = self.cfg.loss
        l1, l2 = kernels.mae_mse(a, b)
        return lc.l1_weight * l1 + lc.l2_weight * l2

    def _field_pair_value(self, adx, ady, bdx, bdy):
        lc = self.cfg.loss
        l1x, l2x = kernels.mae_mse(adx, bdx)
        l1y, l2y = kernels.mae_mse(ady, bdy)
        return lc.l1_weight * 0.5 * (l1x + l1y) + lc.l2_weight * 0.5 * (l2x + l2y)

    def _intra_terms(self, branch, which, warped_plane, dx, dy):
        """Directional edge-match / residual terms plus field smoothness."""
        cfg = self.cfg
        total = 0.0
        forward = which == "fwd"
        if forward or cfg.include_reverse_terms:
            nda = branch.nda_ir if forward else branch.nda_vis
            total += nda.value(warped_plane, cfg.nda_mode)
            if cfg.lam_epr > 0:
                moving = branch.ir if forward else branch.vis
                fixed = branch.vis if forward else branch.ir
                total += cfg.lam_epr * kernels.residual_gap_mean(moving, fixed, warped_plane)
        if cfg.lam_smooth > 0:
            total += cfg.lam_smooth * kernels.smooth_value(dx, dy)
        return total

    def group_terms(self, group: str, params) -> float:
        """Every objective term that depends on the given grid group."""
        cfg = self.cfg
        c = self.cache
        dx, dy = self._dense(params)
        plain = group in ("p", "n")
        forward = group in ("p", "ps")
        branch = self.plain if plain else self.scrambled
        moving = branch.ir if forward else branch.vis
        warped = kernels.warp_bilinear(moving, dx, dy)
        total = self._intra_terms(branch, "fwd" if forward else "rev", warped, dx, dy)

        if cfg.lam_ic > 0:
            other = {"p": "n", "n": "p", "ps": "ns", "ns": "ps"}[group]
            odx, ody = c[other + "_dx"], c[other + "_dy"]
            if forward:
                total += cfg.lam_ic * kernels.invcons_value(dx, dy, odx, ody)
            else:
                total += cfg.lam_ic * kernels.invcons_value(odx, ody, dx, dy)

        if self.dual:
            total += cfg.lam_ss * self._ss_group(group, dx, dy, warped)
        return total

    def _ss_group(self, group, dx, dy, warped):
        """Branch-consistency contributions involving this grid group."""
        cfg = self.cfg
        c = self.cache
        if group in ("p", "n"):
            uns_key = "irs_u" if group == "p" else "viss_u"
            run_key = "irs_ru" if group == "p" else "viss_ru"
            total = self._pair_value(warped, c[uns_key])
            if cfg.include_recon_pairs:
                total += self._pair_value(self._recon(warped), c[run_key])
            okey = "ps" if group == "p" else "ns"
            total += self._field_pair_value(dx, dy, c[okey + "_udx"], c[okey + "_udy"])
        else:
            w_key = "ir_w" if group == "ps" else "vis_w"
            r_key = "ir_r" if group == "ps" else "vis_r"
            uns = self._unscramble_plane(warped)
            total = self._pair_value(c[w_key], uns)
            if cfg.include_recon_pairs:
                total += self._pair_value(c[r_key], self._recon(uns))
            udx, udy = self._unscramble_field(dx, dy)
            okey = "p" if group == "ps" else "n"
            total += self._field_pair_value(c[okey + "_dx"], c[okey + "_dy"], udx, udy)
        return total

    # -- full objective ----------------------------------------------------

    def total_objective(self):
        """Full objective and per-term breakdown at the current grids.

        Shared couplings (inverse consistency, branch consistency) are
        counted once; the value equals what the per-group probes see up
        to constant terms.
        """
        cfg = self.cfg
        self.refresh_cache()
        c = self.cache
        terms = {}

        nda = 0.0
        epr = 0.0
        branches = [(self.plain, "ir_w", "vis_w")]
        if self.dual:
            branches.append((self.scrambled, "irs_w", "viss_w"))
        for branch, fkey, rkey in branches:
            nda += branch.nda_ir.value(c[fkey], cfg.nda_mode)
            epr += kernels.residual_gap_mean(branch.ir, branch.vis, c[fkey])
            if cfg.include_reverse_terms:
                nda += branch.nda_vis.value(c[rkey], cfg.nda_mode)
                epr += kernels.residual_gap_mean(branch.vis, branch.ir, c[rkey])
        terms["edge_match"] = nda
        terms["residual"] = cfg.lam_epr * epr

        sm = 0.0
        for g in self.GROUPS if self.dual else ("p", "n"):
            sm += kernels.smooth_value(c[g + "_dx"], c[g + "_dy"])
        terms["smooth"] = cfg.lam_smooth * sm

        ic = 0.0
        if cfg.lam_ic > 0:
            ic += kernels.invcons_value(c["p_dx"], c["p_dy"], c["n_dx"], c["n_dy"])
            if self.dual:
                ic += kernels.invcons_value(c["ps_dx"], c["ps_dy"], c["ns_dx"], c["ns_dy"])
        terms["inv_consistency"] = cfg.lam_ic * ic

        ss = 0.0
        if self.dual:
            pairs = [(c["ir_w"], c["irs_u"]), (c["vis_w"], c["viss_u"])]
            if cfg.include_recon_pairs:
                pairs += [(c["ir_r"], c["irs_ru"]), (c["vis_r"], c["viss_ru"])]
            for a, b in pairs:
                ss += self._pair_value(a, b)
            ss += self._field_pair_value(c["p_dx"], c["p_dy"], c["ps_udx"], c["ps_udy"])
            ss += self._field_pair_value(c["n_dx"], c["n_dy"], c["ns_udx"], c["ns_udy"])
        terms["branch_consistency"] = cfg.lam_ss * ss

        total = sum(terms.values())
        return total, terms

    def plain_intra_value(self, gp, gn):
        """Plain-branch intra terms only."""
        cfg = self.cfg
        pdx, pdy = self._dense(gp)
        ndx, ndy = self._dense(gn)
        ir_w = kernels.warp_bilinear(self.plain.ir, pdx, pdy)
        total = self._intra_terms(self.plain, "fwd", ir_w, pdx, pdy)
        vis_w = kernels.warp_bilinear(self.plain.vis, ndx, ndy)
        total += self._intra_terms(self.plain, "rev", vis_w, ndx, ndy)
        if cfg.lam_ic > 0:
            total += cfg.lam_ic * kernels.invcons_value(pdx, pdy, ndx, ndy)
        return total

    def scan_score(self, gp, gn):
        """Candidate ranking for the capture scan: cosine dissimilarity of
        warped vs fixed Sobel magnitude maps plus one minus the Dice
        overlap of their effective-edge masks, both directions. Purely
        geometric, so it stays meaningful for displacements far beyond
        the match radius; the descent itself still optimizes the real
        objective."""
        thr = self.cfg.loss.edge_threshold
        score = 0.0
        for moving, fixed_mag, fixed_mask, params in (
            (self.plain.ir, self._vis_mag, self._vis_mask, gp),
            (self.plain.vis, self._ir_mag, self._ir_mask, gn),
        ):
            dx, dy = self._dense(params)
            warped = kernels.warp_bilinear(moving, dx, dy)
            gx, gy = kernels.sobel_xy(warped)
            wmag = np.hypot(gx, gy)
            den = float(np.sqrt(np.sum(wmag * wmag) * np.sum(fixed_mag * fixed_mag)))
            score += 1.0 - (float(np.sum(wmag * fixed_mag)) / den if den > 0 else 0.0)
            wmask = kernels.edge_mask(gx, gy, thr)
            inter = float(np.sum((wmask != 0) & (fixed_mask != 0)))
            total = float(np.sum(wmask != 0) + np.sum(fixed_mask != 0))
            score += 1.0 - (2.0 * inter / total if total > 0 else 0.0)
        return score

    # -- gradient ----------------------------------------------------------

    def gradient(self):
        """Central-difference gradient over all active control parameters.

        Terms untouched by a parameter are constant and cancel in the
        central difference, so each probe evaluates only its group.
        """
        eps = self.cfg.fd_epsilon
        self.refresh_cache()
        grads = {g: np.zeros_like(self.grids[g]) for g in self.GROUPS}
        for g in self.active_groups():
            work = self.grids[g].copy()
            flat = work.reshape(-1)
            gflat = grads[g].reshape(-1)
            for i in range(flat.size):
                orig = flat[i]
                flat[i] = orig + eps
                fp = self.group_terms(g, work)
                flat[i] = orig - eps
                fm = self.group_terms(g, work)
                flat[i] = orig
                if not (math.isfinite(fp) and math.isfinite(fm)):
                    raise ValueError("objective returned a non-finite value")
                gflat[i] = (fp - fm) / (2.0 * eps)
        return grads


def evaluate_full_objective(
    ir: Image,
    vis: Image,
    result: RegistrationResult,
    cfg: RegisterConfig,
    seed: int = 0,
) -> float:
    """Total dual-branch objective of a registration result under ``cfg``.

    Builds a full-resolution problem with a transcript drawn from the
    seed, fits the result's dense fields onto the control grid, and
    re-seeds the scrambled branch consistently, so results produced by
    different configurations are compared in one fixed context.
    """
    transcript = scramble.sample_transcript(ir.width, ir.height, cfg.scramble_n, seed)
    problem = _LevelProblem(ir.data, vis.data, transcript, cfg)
    h, w = ir.height, ir.width
    problem.grids["p"] = _field_to_grid(
        np.stack([result.flow_ir.dx, result.flow_ir.dy], axis=2), cfg, h, w
    )
    problem.grids["n"] = _field_to_grid(
        np.stack([result.flow_vis.dx, result.flow_vis.dy], axis=2), cfg, h, w
    )
    if problem.dual:
        for src, dst in (("p", "ps"), ("n", "ns")):
            ddx, ddy = problem._dense(problem.grids[src])
            sdx, sdy = scramble.scramble_field_arrays(ddx, ddy, transcript)
            problem.grids[dst] = _field_to_grid(np.stack([sdx, sdy], axis=2), cfg, h, w)
    total, _ = problem.total_objective()
    return total


def intra_objective(
    ir: Image, vis: Image, grid_fwd: ControlGrid, grid_rev: ControlGrid, cfg: RegisterConfig
) -> float:
    """Single-branch objective: directional edge-match and residual terms
    plus smoothness of both fields and their inverse-consistency coupling."""
    if (ir.height, ir.width) != (vis.height, vis.width):
        raise ValueError("image dimensions differ")
    for g in (grid_fwd, grid_rev):
        if (g.height, g.width) != (ir.height, ir.width):
            raise ValueError("grid target dimensions do not match images")
    problem = _LevelProblem.__new__(_LevelProblem)
    problem.cfg = cfg
    problem.h, problem.w = ir.height, ir.width
    problem.dual = False
    problem.plain = _BranchData(ir.data, vis.data, cfg)
    problem.recon_kernel = gaussian_kernel(cfg.recon_sigma)
    return problem.plain_intra_value(grid_fwd.params, grid_rev.params)


# ---------------------------------------------------------------------------
# optimizer
# ---------------------------------------------------------------------------


def _downsample_levels(plane, levels):
    out = [plane]
    for _ in range(levels - 1):
        out.append(kernels.box_down2(out[-1]))
    return out[::-1]  # coarse to fine


def _init_candidates(cfg: RegisterConfig, h, w):
    """Constant-shift and center-scaling seeds for the coarsest level."""
    cands = [np.zeros((h, w, 2))]
    r = cfg.init_shift_range
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    for dy in range(-r, r + 1):
        for dx in range(-r, r + 1):
            if dx == 0 and dy == 0:
                continue
            c = np.empty((h, w, 2))
            c[:, :, 0] = dx
            c[:, :, 1] = dy
            cands.append(c)
    cx = (w - 1) / 2.0
    cy = (h - 1) / 2.0
    for m in range(-cfg.init_margin_range, cfg.init_margin_range + 1):
        if m == 0:
            continue
        c = np.empty((h, w, 2))
        c[:, :, 0] = (xx - cx) * (2.0 * m / w)
        c[:, :, 1] = (yy - cy) * (2.0 * m / h)
        cands.append(c)
    return cands


def _field_to_grid(dense, cfg: RegisterConfig, h, w):
    """Sample a dense candidate field at the control-point locations."""
    ys = np.rint(np.linspace(0, h - 1, cfg.grid_h)).astype(int)
    xs = np.rint(np.linspace(0, w - 1, cfg.grid_w)).astype(int)
    return np.ascontiguousarray(dense[np.ix_(ys, xs)])


def register_pair(
    ir: Image, vis: Image, cfg: RegisterConfig = RegisterConfig(), seed: int = 0
) -> RegistrationResult:
    """Register an infrared/visible pair by coarse-to-fine descent.

    Each pyramid level scrambles the downsampled pair with a fresh seeded
    transcript and descends the dual-branch objective with a backtracking
    line search on the central-difference gradient, until the level's
    share of the iteration budget is spent or the relative decrease falls
    below ``rel_tol``. Identical inputs, config, and seed produce an
    identical result. Returns the plain branch's fields, warped images,
    and reconstruction surrogates with the full loss trace.
    """
    if (ir.height, ir.width) != (vis.height, vis.width):
        raise ValueError("image dimensions differ")
    h, w = ir.height, ir.width
    div = cfg.divisor
    if h % div or w % div:
        raise ValueError(
            f"image dimensions must be divisible by {div} "
            f"(scramble grid and pyramid), got {w}x{h}"
        )

    levels = cfg.pyramid_levels
    irs = _downsample_levels(ir.data, levels)
    viss = _downsample_levels(vis.data, levels)
    if cfg.max_iterations == 0:
        iters_per_level = [0] * levels
    else:
        iters_per_level = [max(1, cfg.max_iterations // levels)] * levels

    trace = []
    it_counter = 0
    converged_all = True
    prev_grids = None

    for li in range(levels):
        lvl_ir = irs[li]
        lvl_vis = viss[li]
        lh, lw = lvl_ir.shape
        transcript = scramble.sample_transcript(
            lw, lh, cfg.scramble_n, seed * 1000003 + li
        )
        problem = _LevelProblem(lvl_ir, lvl_vis, transcript, cfg)

        if iters_per_level[li] > 0:
            # seed from the best of the carried-over grids (displacements
            # double when the resolution doubles) and a family of constant
            # shift / center-scaling candidates evaluated at this level
            best = None
            if prev_grids is not None:
                gp = prev_grids["p"] * 2.0
                gn = prev_grids["n"] * 2.0
                best = (problem.scan_score(gp, gn), gp, gn)
            for cand in _init_candidates(cfg, lh, lw):
                gp = _field_to_grid(cand, cfg, lh, lw)
                gn = np.zeros_like(gp) if cfg.freeze_reverse else -gp
                val = problem.scan_score(gp, gn)
                if best is None or val < best[0]:
                    best = (val, gp, gn)
            _, gp, gn = best
            problem.grids["p"] = gp
            problem.grids["n"] = gn
        elif prev_grids is not None:
            problem.grids["p"] = prev_grids["p"] * 2.0
            problem.grids["n"] = prev_grids["n"] * 2.0
        if problem.dual:
            # Each level scrambles with a fresh transcript, so the
            # scrambled-branch grids are re-seeded from the plain ones:
            # densify, transform through the new transcript, resample.
            for src, dst in (("p", "ps"), ("n", "ns")):
                ddx, ddy = problem._dense(problem.grids[src])
                sdx, sdy = scramble.scramble_field_arrays(ddx, ddy, transcript)
                problem.grids[dst] = _field_to_grid(
                    np.stack([sdx, sdy], axis=2), cfg, lh, lw
                )
        trace.append(
            {"iter": it_counter, "level": li, "term_name": "level", "value": float(li)}
        )

        f_cur, terms = problem.total_objective()
        _append_terms(trace, it_counter, li, terms, f_cur)
        converged = iters_per_level[li] == 0
        for _ in range(iters_per_level[li]):
            grads = problem.gradient()
            gmax = max(float(np.max(np.abs(grads[g]))) for g in problem.GROUPS)
            if gmax == 0.0:
                converged = True
                break
            alpha = cfg.step_px / gmax
            accepted = False
            saved = problem.grids
            for _ in range(cfg.max_halvings):
                problem.grids = {g: saved[g] - alpha * grads[g] for g in problem.GROUPS}
                f_new, terms_new = problem.total_objective()
                if f_new < f_cur:
                    accepted = True
                    break
                alpha *= 0.5
            if not accepted:
                problem.grids = saved
                converged = True
                break
            it_counter += 1
            _append_terms(trace, it_counter, li, terms_new, f_new)
            rel = (f_cur - f_new) / max(abs(f_cur), 1e-12)
            f_cur = f_new
            if rel < cfg.rel_tol:
                converged = True
                break
        trace.append(
            {
                "iter": it_counter,
                "level": li,
                "term_name": "level_converged",
                "value": 1.0 if converged else 0.0,
            }
        )
        converged_all = converged_all and converged
        prev_grids = problem.grids

    final = prev_grids
    flow_ir = densify(ControlGrid(final["p"], w, h))
    flow_vis = densify(ControlGrid(final["n"], w, h))
    ir_warped = Image(np.clip(kernels.warp_bilinear(ir.data, flow_ir.dx, flow_ir.dy), 0.0, 1.0))
    vis_warped = Image(np.clip(kernels.warp_bilinear(vis.data, flow_vis.dx, flow_vis.dy), 0.0, 1.0))
    rk = gaussian_kernel(cfg.recon_sigma)
    ir_recon = Image(kernels.gaussian_blur_sep(ir_warped.data, rk))
    vis_recon = Image(kernels.gaussian_blur_sep(vis_warped.data, rk))
    return RegistrationResult(
        flow_ir=flow_ir,
        flow_vis=flow_vis,
        ir_warped=ir_warped,
        vis_warped=vis_warped,
        ir_recon=ir_recon,
        vis_recon=vis_recon,
        trace=tuple(trace),
        converged=converged_all,
    )


def _append_terms(trace, it, level, terms, total):
    for name, value in terms.items():
        trace.append(
            {"iter": it, "level": level, "term_name": name, "value": float(value)}
        )
    trace.append(
        {"iter": it, "level": level, "term_name": "total", "value": float(total)}
    )
