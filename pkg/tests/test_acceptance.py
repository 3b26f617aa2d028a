"""Acceptance suite: one test per criterion, each printing a PASS line.

Run with `pytest tests/test_acceptance.py -v -s`. The registration-heavy
criteria use reduced iteration budgets through the public configuration;
everything else runs at library defaults.
"""

import time

import numpy as np
import pytest

from regfuse import kernels, scramble
from regfuse.harness import MisalignmentSpec, parse_config, sweep, synth_misalign
from regfuse.image import DisplacementField, Image, warp
from regfuse.losses import (
    LossConfig,
    correlation,
    edge_match_loss,
    feature_correlation_loss,
    residual_preservation_loss,
    smoothness_loss,
    ssim,
)
from regfuse.metrics import ag, ei, mg, qabf, sf, viff
from regfuse.register import (
    RegisterConfig,
    ablation_switches,
    evaluate_full_objective,
    fd_gradient,
    register_pair,
)
from regfuse.synthetic import generate_corpus

import oracles
from conftest import textured


def _ok(n, msg):
    print(f"\nACCEPTANCE {n} PASS - {msg}")


# ---------------------------------------------------------------------------
# 1. scramble round trips are bitwise exact
# ---------------------------------------------------------------------------


def test_criterion_1_scramble_round_trip_exact():
    rng = np.random.default_rng(1001)
    t0 = time.time()
    for _ in range(1000):
        n = int(rng.choice([0, 1, 2, 4]))
        if n >= 1:
            h = n * int(rng.integers(1, 64 // max(n, 1) + 1))
            w = n * int(rng.integers(1, 64 // max(n, 1) + 1))
            h = max(h, n)
            w = max(w, n)
        else:
            h = int(rng.integers(1, 65))
            w = int(rng.integers(1, 65))
        t = scramble.sample_transcript(w, h, n, int(rng.integers(1 << 30)))
        img = rng.random((h, w))
        back = scramble.unscramble_array(scramble.scramble_array(img, t), t)
        assert np.array_equal(back, img)
        fdx = rng.normal(0, 3, (h, w))
        fdy = rng.normal(0, 3, (h, w))
        sdx, sdy = scramble.scramble_field_arrays(fdx, fdy, t)
        bdx, bdy = scramble.unscramble_field_arrays(sdx, sdy, t)
        assert np.array_equal(bdx, fdx) and np.array_equal(bdy, fdy)
    elapsed = time.time() - t0
    assert elapsed < 5.0, f"round-trip suite took {elapsed:.2f}s"
    _ok(1, f"1000 image+field round trips bitwise exact in {elapsed:.2f}s")


# ---------------------------------------------------------------------------
# 2. warp equivariance under global recorded flips
# ---------------------------------------------------------------------------


def test_criterion_2_warp_equivariance_global_ops():
    rng = np.random.default_rng(1002)
    for _ in range(100):
        h = int(rng.integers(4, 33))
        w = int(rng.integers(4, 33))
        t = scramble.sample_transcript(w, h, 0, int(rng.integers(1 << 30)))
        img = Image(rng.random((h, w)))
        fld = DisplacementField(
            rng.integers(-4, 5, (h, w)).astype(float),
            rng.integers(-4, 5, (h, w)).astype(float),
        )
        lhs = warp(scramble.scramble_image(img, t), scramble.scramble_field(fld, t))
        rhs = scramble.scramble_image(warp(img, fld), t)
        assert np.array_equal(lhs.data, rhs.data)
    _ok(2, "warp commutes with global flips exactly on 100 random cases")


# ---------------------------------------------------------------------------
# 3. analytic loss suite
# ---------------------------------------------------------------------------


def test_criterion_3_loss_analytic_suite():
    rng = np.random.default_rng(1003)

    # warp examples
    img = Image(rng.random((9, 9)))
    assert np.array_equal(warp(img, DisplacementField.zero(9, 9)).data, img.data)
    row = Image(np.array([[0.0, 1.0]]))
    assert np.array_equal(
        warp(row, DisplacementField(np.ones((1, 2)), np.zeros((1, 2)))).data,
        np.array([[1.0, 1.0]]),
    )

    # edge-match examples
    def ramp_step(shift=0):
        arr = np.zeros((12, 20))
        arr[:, 9 + shift] = 0.5
        arr[:, 10 + shift :] = 1.0
        return Image(arr)

    lc = LossConfig(edge_threshold=3.0)
    aligned = edge_match_loss(ramp_step(), ramp_step(), ramp_step(), lc)
    assert aligned.total == pytest.approx(0.0, abs=1e-9)
    shifted = edge_match_loss(ramp_step(), ramp_step(2), ramp_step(), lc)
    assert shifted.distance == pytest.approx(4.0, abs=1e-9)
    assert shifted.angle == pytest.approx(0.0, abs=1e-9)
    const = Image(np.full((8, 8), 0.5))
    assert edge_match_loss(const, const, const, LossConfig()).total == 0.0

    # residual preservation examples
    z = Image(np.zeros((6, 6)))
    assert residual_preservation_loss(z, z, Image(np.full((6, 6), 0.5))) == pytest.approx(
        0.25, abs=1e-9
    )
    t, v, ta = textured(1, 10), textured(2, 10), textured(3, 10)
    assert residual_preservation_loss(t, v, t) == 0.0

    # smoothness examples and gradient check
    fld = DisplacementField(np.tile(np.arange(6.0), (4, 1)), np.zeros((4, 6)))
    assert smoothness_loss(fld) == pytest.approx(1.0, abs=1e-9)
    const_f = DisplacementField(np.full((5, 5), 2.0), np.full((5, 5), -1.0))
    assert smoothness_loss(const_f) == 0.0

    params = rng.normal(0, 1, (2, 2, 2))

    def smooth_obj(ps):
        p = ps[0]
        return kernels.smooth_value(
            np.ascontiguousarray(p[:, :, 0]), np.ascontiguousarray(p[:, :, 1])
        )

    (g_fd,) = fd_gradient(smooth_obj, [params], 1e-4)
    ana = np.zeros_like(params)
    for c in range(2):
        comp = params[:, :, c]
        gx = comp[:, 1:] - comp[:, :-1]
        gy = comp[1:, :] - comp[:-1, :]
        d = np.zeros((2, 2))
        d[:, 1:] += 2 * gx / gx.size
        d[:, :-1] -= 2 * gx / gx.size
        d[1:, :] += 2 * gy / gy.size
        d[:-1, :] -= 2 * gy / gy.size
        ana[:, :, c] = d
    denom = np.maximum(np.abs(ana), 1e-9)
    assert np.max(np.abs(g_fd - ana) / denom) < 1e-6

    # quadratic gradient is exact
    theta = rng.normal(0, 1, (4,))
    (gq,) = fd_gradient(lambda ps: float(np.sum(ps[0] ** 2)), [theta], 0.25)
    assert np.allclose(gq, 2 * theta, atol=1e-8)

    # ssim / reconstruction examples
    a = textured(4, 16)
    assert ssim(a, a) == pytest.approx(1.0, abs=1e-9)
    cb = Image((np.indices((11, 11)).sum(0) % 2).astype(float))
    inv = Image(1.0 - cb.data)
    assert ssim(cb, inv) == pytest.approx(oracles.ssim_ref(cb.data, inv.data), abs=1e-9)
    assert ssim(cb, inv) < 0.0

    # correlation examples
    assert correlation(a, a) == pytest.approx(1.0, abs=1e-9)
    assert correlation(a, Image(1.0 - a.data)) == pytest.approx(-1.0, abs=1e-9)
    assert feature_correlation_loss(a, a, a, a, 1.01) == pytest.approx(1.0 / 2.01, abs=1e-9)
    _ok(3, "loss examples and gradient checks within stated tolerances")


# ---------------------------------------------------------------------------
# 4. shift recovery on the bundled corpus
# ---------------------------------------------------------------------------

SHIFT_CFG = RegisterConfig(max_iterations=90)


@pytest.fixture(scope="module")
def shift_recovery_runs():
    corpus = generate_corpus(10, 64, seed=42)
    runs = []
    t0 = time.time()
    for i, (pid, ir, vis) in enumerate(corpus):
        ir_mis = synth_misalign(ir, MisalignmentSpec("shift", 5))
        res = register_pair(ir_mis, vis, SHIFT_CFG, seed=i + 1)
        gx, gy = kernels.sobel_xy(ir_mis.data)
        sel = kernels.edge_mask(gx, gy, SHIFT_CFG.loss.edge_threshold) != 0
        mean_dx = float(res.flow_ir.dx[sel].mean())
        runs.append((pid, ir_mis, vis, res, mean_dx))
    return runs, time.time() - t0


def test_criterion_4_shift_recovery(shift_recovery_runs):
    runs, elapsed = shift_recovery_runs
    values = [m for (_, _, _, _, m) in runs]
    hits = sum(1 for m in values if 4.0 <= m <= 6.0)
    assert hits >= 8, values
    assert elapsed < 300.0, f"registration of 10 pairs took {elapsed:.0f}s"
    _ok(4, f"{hits}/10 pairs recovered mean dx in [4,6] ({elapsed:.0f}s): "
           + ", ".join(f"{m:.2f}" for m in values))


# ---------------------------------------------------------------------------
# 5. robustness sweep ordering
# ---------------------------------------------------------------------------


def test_criterion_5_sweep_ordering(tmp_path):
    cfg = parse_config(
        "corpus_pairs = 2\n"
        "corpus_size = 128\n"
        "sweep_levels = 5,10,20,30,50\n"
        "max_iterations = 60\n"
        "pyramid_levels = 4\n"
        "workers = 2\n"
        "seed = 3\n"
    )
    csv_path = sweep(cfg, tmp_path)
    lines = csv_path.read_text().splitlines()
    assert lines[0] == "kind,level,path,Qabf,VIFF,SF,AG,MG,EI"
    table = {}
    for line in lines[1:]:
        kind, level, path, qv, *_ = line.split(",")
        table[(kind, int(level), path)] = float(qv)
    margins = {}
    for level in (5, 10, 20, 30, 50):
        reg = table[("dilate", level, "registered")]
        raw = table[("dilate", level, "unregistered")]
        margins[level] = reg - raw
        assert reg >= raw, f"level {level}: registered {reg} < unregistered {raw}"
    _ok(5, "registered >= unregistered Qabf at all dilation levels; margins "
           + ", ".join(f"{k}:{v:+.3f}" for k, v in margins.items()))


# ---------------------------------------------------------------------------
# 6. ablation ordering
# ---------------------------------------------------------------------------


def test_criterion_6_ablation_ordering(shift_recovery_runs):
    full_cfg = RegisterConfig(max_iterations=60, pyramid_levels=2)
    corpus = generate_corpus(2, 64, seed=77)
    totals = {}
    for name in (None, "exp1", "exp2", "exp3", "exp4", "exp5"):
        cfg = ablation_switches(full_cfg, name)
        vals = []
        for i, (pid, ir, vis) in enumerate(corpus):
            ir_mis = synth_misalign(ir, MisalignmentSpec("shift", 5))
            res = register_pair(ir_mis, vis, cfg, seed=i + 1)
            vals.append(
                evaluate_full_objective(ir_mis, vis, res, full_cfg, seed=i + 1)
            )
        totals[name or "full"] = float(np.mean(vals))
    for name, val in totals.items():
        assert totals["full"] <= val + 1e-9, (name, val, totals["full"])

    # dropping the edge-match term must lose the shift signal
    runs, _ = shift_recovery_runs
    full_hits = sum(1 for (_, _, _, _, m) in runs if 4.0 <= m <= 6.0)
    exp2_cfg = ablation_switches(SHIFT_CFG, "exp2")
    exp2_hits = 0
    for i, (pid, ir_mis, vis, _, _) in enumerate(runs):
        res = register_pair(ir_mis, vis, exp2_cfg, seed=i + 1)
        gx, gy = kernels.sobel_xy(ir_mis.data)
        sel = kernels.edge_mask(gx, gy, exp2_cfg.loss.edge_threshold) != 0
        m = float(res.flow_ir.dx[sel].mean())
        exp2_hits += 4.0 <= m <= 6.0
    assert exp2_hits < full_hits, (exp2_hits, full_hits)
    _ok(6, "full config dominates ablations under the full loss "
           f"({', '.join(f'{k}:{v:.3f}' for k, v in totals.items())}); "
           f"edge-match ablation recovery {exp2_hits}/10 vs full {full_hits}/10")


# ---------------------------------------------------------------------------
# 7. metric oracle equivalence
# ---------------------------------------------------------------------------


def test_criterion_7_metric_oracles():
    rng = np.random.default_rng(1007)
    for _ in range(50):
        a = Image(rng.random((16, 16)))
        b = Image(rng.random((16, 16)))
        f = Image(rng.random((16, 16)))
        assert sf(f) == pytest.approx(oracles.sf_ref(f.data), abs=1e-9)
        assert ag(f) == pytest.approx(oracles.ag_ref(f.data), abs=1e-9)
        assert mg(f) == pytest.approx(oracles.mg_ref(f.data), abs=1e-9)
        assert ei(f) == pytest.approx(oracles.ei_ref(f.data), abs=1e-9)
        assert qabf(a, b, f) == pytest.approx(oracles.qabf_ref(a.data, b.data, f.data), abs=1e-9)
        assert viff(a, b, f) == pytest.approx(oracles.viff_ref(a.data, b.data, f.data), abs=1e-9)
    tex = textured(99, 40)
    assert qabf(tex, tex, tex) >= 0.98
    assert viff(tex, tex, tex) == pytest.approx(1.0, abs=1e-6)
    _ok(7, "all six metrics match literal-formula references on 50 triples within 1e-9")


# ---------------------------------------------------------------------------
# 8. byte-identical sweep determinism
# ---------------------------------------------------------------------------


def test_criterion_8_sweep_determinism(tmp_path):
    cfg_text = (
        "corpus_pairs = 1\n"
        "corpus_size = 64\n"
        "sweep_levels = 5\n"
        "max_iterations = 12\n"
        "pyramid_levels = 2\n"
        "workers = 2\n"
        "seed = 5\n"
    )
    trees = []
    for run in ("a", "b"):
        out = tmp_path / run
        sweep(parse_config(cfg_text), out)
        tree = {}
        for p in sorted(out.rglob("*")):
            if p.is_file():
                tree[str(p.relative_to(out))] = p.read_bytes()
        trees.append(tree)
    assert trees[0].keys() == trees[1].keys()
    for name in trees[0]:
        assert trees[0][name] == trees[1][name], name
    _ok(8, f"two sweep runs produced byte-identical trees ({len(trees[0])} files)")
