import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_config
from plateflow.errors import InconsistentEvidence, WrongFlowCount, ZeroWavevector
from plateflow.ndim import build_ndim, nd_config, ndim_abscissa, ndim_classify, ndim_generator, sphere_directions
from plateflow.spectral_matrices import build_abc, build_generator

SHEAR = nd_config([0, 1, 2], [[0.1, 0.0], [0.0, 0.0]])
RADII = np.concatenate([np.geomspace(1e-4, 1, 40), np.linspace(1, 5, 40)[1:]])


def rotation(theta):
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


def test_reduction_to_planar():
    rng = np.random.default_rng(0)
    for _ in range(30):
        cfg = random_config(rng)
        nd = nd_config(cfg.heights, cfg.flows[:, None])
        k = float(rng.uniform(0.01, 20))
        sm, ns = build_abc(cfg, k), build_ndim(nd, [k])
        np.testing.assert_allclose(ns.P.dense(), sm.A.dense(), rtol=1e-12)
        np.testing.assert_allclose(ns.Q.dense(), k * sm.B.dense(), rtol=1e-12, atol=1e-300)
        np.testing.assert_allclose(ns.R.dense(), sm.C.dense(), rtol=1e-12, atol=1e-300)
        M = build_generator(cfg, k).M
        assert np.abs(ndim_generator(nd, [k]).M - M).max() <= 1e-12 * np.abs(M).max()


def test_orthogonal_wavevector_sees_no_flow():
    nd = nd_config([0, 1, 3, 4], [[0.3, 0], [-0.2, 0], [0.9, 0]])
    ns = build_ndim(nd, [0.0, 2.0])
    assert not np.any(ns.Q.dense()) and not np.any(ns.R.dense())


def test_large_wavevector_limit():
    ns = build_ndim(SHEAR, [30.0, 40.0])
    np.testing.assert_allclose(ns.P.dense(), np.eye(1) * (1 + 2 / 50.0), rtol=1e-12)


def test_zero_wavevector():
    with pytest.raises(ZeroWavevector):
        build_ndim(SHEAR, [0.0, 0.0])
    M = ndim_generator(SHEAR, [0.0, 0.0]).M
    np.testing.assert_array_equal(M, [[0, 1], [0, 0]])


def test_config_validation():
    with pytest.raises(WrongFlowCount):
        nd_config([0, 1, 2], [[0.1, 0.0]])
    with pytest.raises(ValueError):
        build_ndim(SHEAR, [1.0, 2.0, 3.0])
    assert SHEAR.m == 2 and SHEAR.n == 1 and SHEAR.has_flow
    np.testing.assert_allclose(SHEAR.along([0, 1]).flows, [0.0, 0.0])
    np.testing.assert_allclose(SHEAR.along([2, 0]).flows, [0.1, 0.0])


vec3 = st.lists(st.floats(-1, 1), min_size=3, max_size=3)


@settings(max_examples=30, deadline=None)
@given(st.lists(vec3, min_size=3, max_size=3), vec3.filter(lambda v: np.linalg.norm(v) > 1e-3), st.floats(0.1, 10))
def test_generator_properties(flows, direction, r):
    nd = nd_config([0, 0.7, 1.5, 3.0], flows)
    d = np.asarray(direction) / np.linalg.norm(direction)
    N = ndim_generator(nd, r * d).M
    assert abs(np.trace(N).real) <= 1e-12 * np.linalg.norm(N)
    assert build_ndim(nd, r * d).P.is_positive_definite()


def test_zero_flow_spectrum():
    nd = nd_config([0, 1, 1.5, 3], np.zeros((3, 2)))
    k = np.array([0.6, -1.1])
    r = np.linalg.norm(k)
    a = np.linalg.eigvalsh(build_ndim(nd, k).P.dense())
    lam = np.linalg.eigvals(ndim_generator(nd, k).M)
    ref = np.concatenate([r * r / np.sqrt(a), -r * r / np.sqrt(a)])
    np.testing.assert_allclose(np.sort(lam.imag), np.sort(ref), rtol=1e-12)
    assert np.abs(lam.real).max() <= 1e-12 * np.abs(lam).max()


@settings(max_examples=25, deadline=None)
@given(st.floats(0, 2 * np.pi), st.floats(0, 2 * np.pi), st.floats(0.05, 10))
def test_rotational_covariance(theta, phi, r):
    flows = np.array([[0.2, -0.1], [0.4, 0.3], [-0.5, 0.1]])
    nd = nd_config([0, 1, 2, 4], flows)
    k = r * np.array([np.cos(phi), np.sin(phi)])
    R = rotation(theta)
    rot = nd_config([0, 1, 2, 4], flows @ R.T)
    a, b = build_ndim(nd, k), build_ndim(rot, R @ k)
    for T1, T2 in ((a.P, b.P), (a.Q, b.Q), (a.R, b.R)):
        np.testing.assert_allclose(T2.dense(), T1.dense(), rtol=1e-10, atol=1e-13)


def test_sphere_directions():
    d = sphere_directions(3, 16)
    assert d.shape == (19, 3)
    np.testing.assert_allclose(np.linalg.norm(d, axis=1), 1.0)
    np.testing.assert_array_equal(d, sphere_directions(3, 16))
    np.testing.assert_array_equal(sphere_directions(1), [[1.0]])


def test_ndim_classify():
    rest = nd_config([0, 1, 2], np.zeros((2, 2)))
    assert ndim_classify(rest, radii=RADII).stable
    rep = ndim_classify(SHEAR, radii=RADII)
    assert rep.verdict == "unstable" and rep.alpha_max > 0
    assert abs(rep.diagnostics["best_direction"][0]) > 0.5
    assert ndim_abscissa(SHEAR, [1, 0], RADII).max() > 1e-6
    # transverse to the flow the spectrum stays on the imaginary axis
    assert ndim_abscissa(SHEAR, [0, 1], RADII).max() <= 1e-9


def test_ndim_classify_flags_inconsistency(monkeypatch):
    import plateflow.ndim as ndim

    rest = nd_config([0, 1, 2], np.zeros((2, 2)))
    monkeypatch.setattr(ndim, "ndim_abscissa", lambda *a: np.full(len(a[2]), 1e-3))
    with pytest.raises(InconsistentEvidence):
        ndim_classify(rest, radii=RADII)
