"""Acceptance criteria, one test each, at the stated tolerances.

Every test prints a single ``criterion NN: PASS|FAIL`` line (collected in
the terminal summary) before asserting.
"""

import time

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from conftest import random_config
from plateflow.channel_model import config_from_dict, make_config, uniform_config
from plateflow.cli import load_doc
from plateflow.linalg_kernels import eigvec_condition, eigenvectors_normalized, matrix_exponential
from plateflow.ndim import build_ndim, nd_config, ndim_generator
from plateflow.propagator import SimGrid, simulate
from plateflow.pseudospectrum import FIGURE_KS, width_table
from plateflow.spectral_matrices import (
    build_abc,
    build_generator,
    build_generator_batch,
    char_poly_constant,
    char_poly_eval,
)
from plateflow.stability import Quadrature, classify, decay_exponent, greens_series, growth_slope, pd_intervals
from plateflow.verifier import (
    assembly_residual,
    boundary_flux_residual,
    corrupted_generator,
    curved_surfaces,
    gaussian_potential,
)

KGRID = np.linspace(-50.0, 50.0, 401)
KGRID = KGRID[KGRID != 0.0]
FIG3_FLOWS = (0.4, 0.4, 0.4, 0.0, -0.4, -0.4, -0.4)


def recipe(name):
    return config_from_dict(load_doc(name))


@pytest.fixture(scope="module")
def battery():
    """200 random configs: n <= 16, gaps in [0.5, 10], flows in [-1, 1]."""
    rng = np.random.default_rng(1)
    return [random_config(rng, n_max=16) for _ in range(200)]


def test_criterion_01_cholesky(battery, verdict):
    t0 = time.perf_counter()
    failures = 0
    for cfg in battery:
        for k in KGRID:
            A = build_abc(cfg, k).A.dense()
            try:
                np.linalg.cholesky(A)
            except np.linalg.LinAlgError:
                failures += 1
    dt = time.perf_counter() - t0
    ok = verdict(1, failures == 0 and dt < 30, f"{failures} Cholesky failures over {len(battery)} configs, {dt:.1f} s")
    assert ok


def test_criterion_02_char_poly(verdict):
    rng = np.random.default_rng(2)
    worst = 0.0
    for _ in range(1000):
        cfg = random_config(rng, n_max=8, gap=(0.5, 5.0))
        k = float(rng.uniform(-5, 5))
        mu = float(rng.uniform(-5, 5))
        n = cfg.n
        chi = abs(np.linalg.det(1j * mu * np.eye(2 * n) - build_generator(cfg, k).M))
        sm = build_abc(cfg, k)
        pen = abs(char_poly_constant(sm) * char_poly_eval(sm, mu))
        worst = max(worst, abs(chi - pen) / max(chi, pen))
    ok = verdict(2, worst <= 1e-8, f"max relative deviation {worst:.2e} over 1000 triples")
    assert ok


def _resolvable(cfg, k):
    """Off-diagonals of A large enough that its eigenvalues separate in floating point."""
    off = build_abc(cfg, k).A.off
    return off.size == 0 or np.abs(off).min() >= 1e-6


def test_criterion_03_zero_flow_spectrum(verdict):
    rng = np.random.default_rng(3)
    worst, worst_re, clustered = 0.0, 0.0, 0
    for _ in range(20):
        cfg = random_config(rng, n_max=8, zero_flow=True)
        for k in KGRID:
            lam = np.linalg.eigvals(build_generator(cfg, k).M)
            a = np.linalg.eigvalsh(build_abc(cfg, k).A.dense())
            ref = np.concatenate([1j * k * k / np.sqrt(a), -1j * k * k / np.sqrt(a)])
            lam_s, ref_s = np.sort_complex(1j * lam), np.sort_complex(1j * ref)
            worst = max(worst, float(np.max(np.abs(lam_s - ref_s) / np.abs(ref_s))))
            worst_re = max(worst_re, float(np.abs(lam.real).max() / np.abs(lam).max()))
            if _resolvable(cfg, k):
                d = np.abs(lam[:, None] - lam[None, :]) + np.diag(np.full(lam.size, np.inf))
                clustered += int(d.min() <= 1e-12 * np.abs(lam).max())
    ok = worst <= 1e-8 and worst_re <= 1e-8 and clustered == 0
    verdict(3, ok, f"max rel error {worst:.2e}, max |Re|/|lam| {worst_re:.2e}, coincident pairs {clustered}")
    assert ok


def test_criterion_04_trace(battery, verdict):
    worst = 0.0
    for cfg in battery:
        stack = build_generator_batch(cfg, KGRID)
        lam = np.linalg.eigvals(stack)
        norms = np.linalg.norm(stack, 2, axis=(1, 2))
        worst = max(worst, float(np.max(np.abs(lam.real.sum(axis=1)) / norms)))
    ok = verdict(4, worst <= 1e-10, f"max |sum Re lam| / ||M|| = {worst:.2e}")
    assert ok


def test_criterion_05_exponential_oracle(verdict):
    worst = 0.0
    for flows in ((0.1,) * 7, FIG3_FLOWS):
        cfg = uniform_config(6, flows)
        for k in (0.0, 0.1, 1.0, 5.0, 20.0):
            M = build_generator(cfg, k).M
            m = M.shape[0]
            sol = solve_ivp(
                lambda _t, y: (M @ y.reshape(m, m)).ravel(),
                (0.0, 3.0),
                np.eye(m, dtype=complex).ravel(),
                method="DOP853",
                t_eval=[0.5, 1.0, 3.0],
                rtol=1e-12,
                atol=1e-14,
            )
            for j, t in enumerate(sol.t):
                E = matrix_exponential(M, t)
                X = sol.y[:, j].reshape(m, m)
                worst = max(worst, float(np.linalg.norm(E - X) / np.linalg.norm(X)))
    ok = verdict(5, worst <= 1e-6, f"max relative error vs DOP853 {worst:.2e}")
    assert ok


def _amplitudes(name):
    cfg, data = recipe(name)
    t0 = time.perf_counter()
    fields = simulate(cfg, data, [0.0, 3.0], SimGrid(40.0, 1024))
    return fields[0].max_amplitude, fields[1].max_amplitude, time.perf_counter() - t0


def test_criterion_06_figure2_decay(verdict):
    a0, a3, dt = _amplitudes("figure2")
    ok = verdict(6, a3 < a0 and dt < 10, f"max amplitude {a0:.6f} -> {a3:.6f}, {dt:.2f} s")
    assert ok


def test_criterion_07_figure3_growth(verdict):
    a0, a3, _ = _amplitudes("figure3")
    ok = verdict(7, a3 > a0, f"max amplitude {a0:.6f} -> {a3:.6f}")
    assert ok


def test_criterion_08_stability_theorem(verdict):
    rng = np.random.default_rng(8)
    disagreements = []
    for j in range(40):
        zero = j % 2 == 0
        cfg = random_config(rng, n_max=6, zero_flow=zero)
        rep = classify(cfg)
        if rep.stable != (not cfg.has_flow):
            disagreements.append((j, "verdict"))
        elif rep.stable and rep.alpha_max > 1e-9:
            disagreements.append((j, f"stable alpha {rep.alpha_max:.2e}"))
        elif not rep.stable and rep.alpha_in_K < 1e-6:
            disagreements.append((j, f"alpha in K {rep.alpha_in_K:.2e}"))
    ok = verdict(8, not disagreements, f"{len(disagreements)} disagreements over 40 configs {disagreements[:3]}")
    assert ok


def test_criterion_09_discriminant_dichotomy(verdict):
    rng = np.random.default_rng(9)
    ks = np.concatenate([np.geomspace(1e-6, 1.0, 121), np.linspace(1.0, 50.0, 246)[1:]])
    bad = []
    for j in range(40):
        cfg = random_config(rng, n_max=6, zero_flow=j % 2 == 0)
        K = pd_intervals(cfg, ks)
        if cfg.has_flow and not K.contains(1e-5):
            bad.append((j, "flow but no interval near 0"))
        if not cfg.has_flow and not K.empty:
            bad.append((j, f"zero flow but K = {K.union}"))
    ok = verdict(9, not bad, f"{len(bad)} violations over 40 configs {bad[:3]}")
    assert ok


def test_criterion_10_greens_decay(verdict):
    cfg, _ = recipe("greens_zero_flow")
    t0 = time.perf_counter()
    samples = greens_series(cfg, 0.0, np.geomspace(10.0, 100.0, 10), Quadrature())
    dt = time.perf_counter() - t0
    p = decay_exponent(samples)
    ok = verdict(10, abs(p + 0.5) <= 0.1 and dt < 120, f"decay exponent {p:.4f} (target -0.5 +- 0.1), {dt:.1f} s")
    assert ok


def test_criterion_11_condition_scaling(verdict):
    ks = np.linspace(10.0, 100.0, 19)
    spreads = []
    for gaps in ((1.0, 1.0), (0.05, 0.05, 0.05)):
        cfg = make_config(gaps, np.zeros(len(gaps)))
        r = np.array([eigvec_condition(build_generator(cfg, k).M, k) / k**2 for k in ks])
        spreads.append(float(r.max() / r.min()))
    # thick layers: plate modes decouple and cluster, so use the raw eigenvector matrix
    cfg = make_config((1.0, 1.0, 1.0), np.zeros(3))
    r = np.array([np.linalg.cond(eigenvectors_normalized(build_generator(cfg, k).M)[1]) / k**2 for k in ks])
    spreads.append(float(r.max() / r.min()))
    ok = verdict(11, max(spreads) < 3, "kappa/k^2 max/min ratios " + ", ".join(f"{s:.3f}" for s in spreads))
    assert ok


def test_criterion_12_pseudospectrum_trend(verdict):
    cfg, _ = recipe("figure4")
    t0 = time.perf_counter()
    table = width_table(cfg, FIGURE_KS)
    dt = time.perf_counter() - t0
    monotone = bool(np.all(np.diff(table, axis=0) >= 0))
    w = table[-1, 2]
    ok = monotone and 4.0 <= w <= 16.0 and dt < 120
    rows = "; ".join(f"k={k:g}: " + " ".join(f"{x:.2f}" for x in row) for k, row in zip(FIGURE_KS, table))
    verdict(12, ok, f"nondecreasing={monotone}, width/eps at k=0.01, eps=1e-2 is {w:.2f}; {rows}; {dt:.1f} s")
    assert ok


def test_criterion_13_assembly_oracle(verdict):
    rng = np.random.default_rng(13)
    worst, weakest = 0.0, np.inf
    for _ in range(50):
        cfg = random_config(rng, n_max=6)
        for _ in range(5):
            k = float(rng.uniform(0.05, 5.0) * rng.choice([-1, 1]))
            base = assembly_residual(cfg, k)
            bad = assembly_residual(cfg, k, corrupted_generator(cfg, k))
            worst = max(worst, base)
            weakest = min(weakest, bad / max(base, 1e-300))
    ok = worst <= 1e-8 and weakest >= 1e4
    verdict(13, ok, f"max residual {worst:.2e}, min corruption ratio {weakest:.2e}")
    assert ok


def test_criterion_14_flux_identity(verdict):
    g = gaussian_potential()
    res = [boundary_flux_residual(g, curved_surfaces(), k, s) for k in (0.5, 1.0, 3.0) for s in (1, -1)]
    worst = max(res)
    ok = verdict(14, worst <= 1e-7, f"max relative flux residual {worst:.2e}")
    assert ok


def test_criterion_15_dimensional_reduction(verdict):
    rng = np.random.default_rng(15)
    worst = 0.0
    for _ in range(100):
        cfg = random_config(rng, n_max=8)
        nd = nd_config(cfg.heights, cfg.flows[:, None])
        k = float(rng.uniform(-20, 20))
        sm, ns = build_abc(cfg, k), build_ndim(nd, [k])
        for T2, Tn, scale in ((sm.A, ns.P, 1.0), (sm.B, ns.Q, k), (sm.C, ns.R, 1.0)):
            ref = scale * T2.dense()
            worst = max(worst, float(np.abs(Tn.dense() - ref).max() / max(np.abs(ref).max(), 1e-300)))
        M2, Mn = build_generator(cfg, k).M, ndim_generator(nd, [k]).M
        worst = max(worst, float(np.abs(Mn - M2).max() / np.abs(M2).max()))
    nd2 = nd_config([0.0, 1.0, 2.5, 3.0], [[0.3, 0.0], [-0.7, 0.0], [0.2, 0.0]])
    ortho = build_ndim(nd2, [0.0, 1.7])
    exact_zero = not np.any(ortho.Q.dense()) and not np.any(ortho.R.dense())
    ok = worst <= 1e-12 and exact_zero
    verdict(15, ok, f"max relative mismatch {worst:.2e}; Q = R = 0 for k perpendicular to U: {exact_zero}")
    assert ok


GROWTH_CONFIGS = {
    "n1": ((1.0, 1.0), (0.3, -0.1)),
    "n2": ((1.0, 2.0, 1.0), (0.2, 0.0, -0.2)),
    "fig3": ((1.0,) * 7, FIG3_FLOWS),
}


def test_criterion_16_growth_law(verdict):
    lines, ok = [], True
    for name, (gaps, flows) in GROWTH_CONFIGS.items():
        cfg = make_config(gaps, flows)
        fit = growth_slope(cfg)
        fit2 = growth_slope(cfg.scaled(2.0))
        ratio = fit2.c / fit.c
        lin = fit.quadratic_relative <= 1e-3
        halves = abs(ratio - 0.5) <= 0.2 * 0.5
        ok &= lin and halves
        lines.append(f"{name}: quad/lin {fit.quadratic_relative:.1e}, slope ratio {ratio:.4f}")
    verdict(16, ok, "; ".join(lines) + " (target ratio 0.5 +- 20%)")
    assert ok
