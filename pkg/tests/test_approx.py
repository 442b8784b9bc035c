import numpy as np
import pytest

from spraylab.approx import (
    ApproxConfig,
    DegreeExhaustedError,
    Homotopy,
    HomotopyTooWildError,
    TrackConfig,
    approximate,
    approximation_error,
    assemble_regular_map,
    fit_polynomial,
    monomial_exponents,
    track_eta,
)
from spraylab.degree import sphere_degree
from spraylab.demos import DEMOS
from spraylab.geometry import VarietySpec, membership_residual_many
from spraylab.sampling import rng, sphere_quasi_uniform
from spraylab.serialize import dumps_canonical
from spraylab.sprays import stereographic_spray

CIRCLE = VarietySpec.sphere(1)
SPHERE2 = VarietySpec.sphere(2)


def _identity(x):
    return np.asarray(x, dtype=float).copy()


def _rotation_homotopy(total_angle):
    def at_time(x, t):
        a = total_angle * t
        c, s = np.cos(a), np.sin(a)
        return np.column_stack([c * x[:, 0] - s * x[:, 1], s * x[:, 0] + c * x[:, 1]])

    return Homotopy(CIRCLE, CIRCLE, at_time, _identity, {"name": "identity"})


# ---------------------------------------------------------------------------
# homotopy validation
# ---------------------------------------------------------------------------


def test_homotopy_check_passes_for_rotation():
    grid = sphere_quasi_uniform(128, 1)
    _rotation_homotopy(0.3).check(grid)


def test_homotopy_check_rejects_base_mismatch():
    h = Homotopy(
        CIRCLE,
        CIRCLE,
        lambda x, t: _identity(x),
        lambda x: 0.999 * _identity(x),
        {"name": "broken"},
    )
    with pytest.raises(ValueError):
        h.check(sphere_quasi_uniform(64, 1))


# ---------------------------------------------------------------------------
# tracking
# ---------------------------------------------------------------------------


def test_track_constant_homotopy():
    h = Homotopy(CIRCLE, CIRCLE, lambda x, t: _identity(x), _identity, {"name": "identity"})
    result = track_eta(h, stereographic_spray(1, fiber="ambient"), sphere_quasi_uniform(64, 1))
    assert len(result.partition) == 2
    assert np.max(np.abs(result.eta)) <= 1e-15
    assert result.final_residual <= 1e-12


def test_track_small_rotation_single_interval_exact_inverse():
    grid = sphere_quasi_uniform(128, 1)
    result = track_eta(_rotation_homotopy(0.3), stereographic_spray(1, fiber="ambient"), grid)
    assert len(result.partition) == 2
    assert result.final_residual <= 1e-10
    # Closed-form check: the tangential stereographic preimage of the
    # rotated point q = R(0.3) p from p is 2 (q - (q.p) p) / (1 + q.p).
    q = _rotation_homotopy(0.3).eval_many(grid, 1.0)
    qp = np.einsum("ni,ni->n", q, grid)
    expected = 2.0 * (q - qp[:, None] * grid) / (1.0 + qp)[:, None]
    np.testing.assert_allclose(result.eta, expected, atol=1e-12)


def test_track_half_sweep_forces_bisection():
    grid = sphere_quasi_uniform(128, 1)
    result = track_eta(_rotation_homotopy(np.pi), stereographic_spray(1, fiber="ambient"), grid)
    assert len(result.partition) - 1 >= 2
    assert result.final_residual <= 1e-10
    assert max(result.node_residuals) <= 1e-10


def test_track_interval_budget_error():
    grid = sphere_quasi_uniform(32, 1)
    cfg = TrackConfig(max_intervals=1)
    with pytest.raises(HomotopyTooWildError):
        track_eta(_rotation_homotopy(np.pi), stereographic_spray(1, fiber="ambient"), grid, cfg)


# ---------------------------------------------------------------------------
# polynomial fitting
# ---------------------------------------------------------------------------


def test_monomial_basis_is_canonical():
    exps = monomial_exponents(2, 2)
    assert exps == [(0, 0), (0, 1), (1, 0), (0, 2), (1, 1), (2, 0)]


def test_fit_zero_samples():
    pts = sphere_quasi_uniform(200, 1)
    spec = fit_polynomial(pts, np.zeros((200, 2)), target_resid=1e-12, d_max=4)
    assert spec.degree == 1
    assert np.max(np.abs(spec.coefficients)) == 0.0
    assert spec.val_max == 0.0


def test_fit_recovers_linear_map_exactly():
    gen = rng(3)
    pts = sphere_quasi_uniform(300, 2)
    mat = gen.normal(size=(3, 2))
    vals = pts @ mat + np.array([0.3, -0.1])
    spec = fit_polynomial(pts, vals, target_resid=1e-12, d_max=4)
    assert spec.degree == 1
    assert spec.val_max <= 1e-12


def _wiggle_eta(grid_size=512):
    # The pure-rotation eta is linear in ambient coordinates, so the wiggle
    # demo provides the non-polynomial fitting workload here.
    demo = DEMOS["s1-power-2-wiggle"]()
    grid = sphere_quasi_uniform(grid_size, 1)
    result = track_eta(demo.homotopy, demo.spray, grid)
    return grid, result


def test_fit_curve_monotone_and_meets_target():
    grid, result = _wiggle_eta()
    spec = fit_polynomial(grid, result.eta, target_resid=1e-4, d_max=10)
    assert 1 < spec.degree <= 10
    curve = np.array(spec.fit_rms_curve)
    assert np.all(np.diff(curve) <= 1e-12)


def test_fit_degree_exhausted_carries_best():
    grid, result = _wiggle_eta(256)
    with pytest.raises(DegreeExhaustedError) as err:
        fit_polynomial(grid, result.eta, target_resid=1e-15, d_max=3)
    best = err.value.best
    assert best.degree <= 3
    assert best.val_max > 1e-15


# ---------------------------------------------------------------------------
# assembly
# ---------------------------------------------------------------------------


def _tracked_rotation(angle=0.3, grid_size=256):
    grid = sphere_quasi_uniform(grid_size, 1)
    h = _rotation_homotopy(angle)
    result = track_eta(h, stereographic_spray(1, fiber="ambient"), grid)
    return grid, h, result


def test_assemble_with_zero_beta_reproduces_base_map():
    grid, h, result = _tracked_rotation()
    zero = fit_polynomial(grid, np.zeros_like(result.eta), target_resid=1e-12, d_max=2)
    approx = assemble_regular_map(h, result, zero)
    np.testing.assert_array_equal(approx.eval_many(grid), h.f0_many(grid))


def test_assembled_map_lands_on_target_everywhere():
    grid, h, result = _tracked_rotation()
    beta = fit_polynomial(grid, result.eta, target_resid=1e-6, d_max=10)
    approx = assemble_regular_map(h, result, beta)
    probe = sphere_quasi_uniform(10_000, 1)
    resid = membership_residual_many(approx.eval_many(probe), CIRCLE)
    assert np.max(resid) <= 1e-12


def test_assemble_dimension_checks():
    grid, h, result = _tracked_rotation()
    beta = fit_polynomial(grid[:, :1] * 0 + 1.0, result.eta, target_resid=1.0, d_max=1)
    with pytest.raises(ValueError):
        assemble_regular_map(h, result, beta)


# ---------------------------------------------------------------------------
# error measurement
# ---------------------------------------------------------------------------


def test_error_zero_for_identical_maps():
    grid = sphere_quasi_uniform(256, 1)
    errors = approximation_error(_identity, _identity, grid)
    assert errors == {"c0": 0.0, "c1": 0.0}


def test_error_sees_planted_tangent_perturbation():
    grid = sphere_quasi_uniform(512, 2)
    axis = np.array([0.2, -0.5, 0.8])

    def perturbed(x):
        t = axis[None, :] - (x @ axis)[:, None] * x
        t /= np.linalg.norm(t, axis=1, keepdims=True)
        out = x + 1e-3 * t
        return out / np.linalg.norm(out, axis=1, keepdims=True)

    errors = approximation_error(perturbed, _identity, grid)
    assert 0.5e-3 <= errors["c0"] <= 1.5e-3


def test_error_c1_against_analytic_derivative():
    # For a fixed rotation R, the tangent-map discrepancy from the identity
    # along unit tangent directions is |R t - t| = 2 sin(a / 2).
    a = 0.2
    rot = _rotation_homotopy(a)
    grid = sphere_quasi_uniform(256, 1)
    errors = approximation_error(lambda x: rot.eval_many(x, 1.0), _identity, grid)
    assert abs(errors["c1"] - 2.0 * np.sin(a / 2.0)) <= 1e-5


# ---------------------------------------------------------------------------
# full pipeline
# ---------------------------------------------------------------------------


def test_pipeline_regular_input_comes_back_exactly():
    demo = DEMOS["identity"]()
    approx = approximate(demo.f_many, demo.homotopy, demo.spray, demo.cfg)
    assert approx.status == "ok"
    assert approx.c0 <= 1e-14
    assert approx.membership_max <= 1e-12


def test_pipeline_s1_demo_full():
    demo = DEMOS["s1-power-2-wiggle"]()
    approx = approximate(demo.f_many, demo.homotopy, demo.spray, demo.cfg)
    assert approx.status == "ok"
    assert approx.c0 <= 1e-3
    assert approx.beta.degree <= 20
    assert approx.membership_max <= 1e-12
    assert approx.chain_ok
    assert sphere_degree(approx.eval_many, 1).value == 2


def test_pipeline_s2_demo_smoke():
    demo = DEMOS["s2-bump-identity"]()
    demo.cfg.grid_size = 1 << 10  # smaller grid than the acceptance run
    approx = approximate(demo.f_many, demo.homotopy, demo.spray, demo.cfg)
    assert approx.status == "ok"
    assert approx.c0 <= 1e-2
    assert approx.membership_max <= 1e-12
    assert sphere_degree(approx.eval_many, 2).value == 1


def test_pipeline_unattainable_target_reports_exhaustion():
    demo = DEMOS["s1-power-2-wiggle"]()
    demo.cfg.target_c0 = 1e-15
    demo.cfg.d_max = 6
    approx = approximate(demo.f_many, demo.homotopy, demo.spray, demo.cfg)
    assert approx.status == "degree_exhausted"
    assert approx.beta is not None  # best effort retained
    assert approx.membership_max <= 1e-12  # exactness holds regardless


def test_pipeline_rejects_endpoint_mismatch():
    demo = DEMOS["s1-power-2-wiggle"]()
    with pytest.raises(ValueError):
        approximate(_identity, demo.homotopy, demo.spray, demo.cfg)


def test_pipeline_report_serializes():
    demo = DEMOS["identity"]()
    approx = approximate(demo.f_many, demo.homotopy, demo.spray, demo.cfg)
    text = dumps_canonical(approx.to_jsonable())
    assert '"coefficients"' in text
    assert '"status"' in text


@pytest.mark.parametrize("name", sorted(DEMOS))
def test_demo_base_map_matches_descriptor_coefficients(name):
    # The descriptor's coefficient table must reproduce the exact base map.
    from spraylab.approx import _vandermonde

    demo = DEMOS[name]()
    desc = demo.homotopy.f0_descriptor
    exps = monomial_exponents(desc["input_dim"], desc["degree"])
    coeffs = np.array([[float(c) for c in row] for row in desc["coefficients"]])
    grid = sphere_quasi_uniform(200, demo.homotopy.domain.n)
    np.testing.assert_allclose(
        _vandermonde(grid, exps) @ coeffs, demo.homotopy.f0_many(grid), atol=1e-15
    )
