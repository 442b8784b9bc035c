import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from spraylab.geometry import (
    ShapeError,
    SingularMatrixError,
    VarietySpec,
    cayley,
    deinterleave,
    fermat_power_map,
    fermat_root_map,
    interleave,
    is_member,
    membership_residual,
    oriented_sphere_frame_many,
    radial_to_fermat,
    shrink_map,
    sphere_tangent_basis,
    unshrink_map,
)
from spraylab.serialize import (
    matrix_from_json,
    matrix_to_json,
    point_from_json,
    point_to_json,
)


# ---------------------------------------------------------------------------
# membership
# ---------------------------------------------------------------------------


def test_is_member_unit_basis_vector():
    assert is_member(np.array([1.0, 0.0, 0.0]), VarietySpec.sphere(2), 1e-12)


def test_is_member_identity_in_so3():
    p = np.eye(3).reshape(-1)
    assert is_member(p, VarietySpec.group("SO", 3), 1e-12)


def test_is_member_rejects_scaled_point():
    p = 1.01 * np.array([1.0, 1.0]) / np.sqrt(2.0)
    assert not is_member(p, VarietySpec.sphere(1), 1e-12)


def test_is_member_shape_error():
    with pytest.raises(ShapeError):
        is_member(np.array([1.0, 0.0]), VarietySpec.sphere(2), 1e-12)


def test_membership_product():
    spec = VarietySpec.product(VarietySpec.sphere(1), VarietySpec.sphere(2))
    p = np.array([1.0, 0.0, 0.0, 0.0, 1.0])
    assert membership_residual(p, spec) < 1e-15


def test_sampled_points_pass_membership_everywhere():
    from spraylab.geometry import membership_residual_many
    from spraylab.sampling import sample_variety

    specs = [
        VarietySpec.sphere(3),
        VarietySpec.fermat_sphere(2, 6),
        VarietySpec.group("O", 3),
        VarietySpec.group("SO", 4),
        VarietySpec.group("U", 2),
        VarietySpec.group("SU", 3),
        VarietySpec.product(VarietySpec.sphere(1), VarietySpec.group("SO", 2)),
    ]
    for spec in specs:
        pts = sample_variety(spec, 200, 0)
        assert np.max(membership_residual_many(pts, spec)) <= 1e-12, spec.label()


def test_su_membership_checks_determinant():
    # diag(i, i) is unitary with det -1: in U(2) but not in SU(2).
    q = np.diag([1j, 1j])
    pt = interleave(q.reshape(-1))
    assert is_member(pt, VarietySpec.group("U", 2), 1e-12)
    assert not is_member(pt, VarietySpec.group("SU", 2), 1e-12)


# ---------------------------------------------------------------------------
# Cayley transform
# ---------------------------------------------------------------------------


def test_cayley_at_zero_is_identity():
    np.testing.assert_allclose(cayley(np.zeros((2, 2))), np.eye(2), atol=0)


def test_cayley_2x2_hand_value():
    # (I - A)(I + A)^(-1) for A = [[0, 1], [-1, 0]]:
    # I+A = [[1,1],[-1,1]], inverse = 0.5*[[1,-1],[1,1]],
    # product = 0.5*[[0,-2],[2,0]] = [[0,-1],[1,0]].
    a = np.array([[0.0, 1.0], [-1.0, 0.0]])
    np.testing.assert_allclose(cayley(a), np.array([[0.0, -1.0], [1.0, 0.0]]), atol=1e-15)


def test_cayley_skew_4x4_orthogonal_and_involutive():
    gen = np.random.default_rng(3)
    raw = gen.uniform(-1.0, 1.0, (4, 4))
    a = raw - raw.T
    q = cayley(a)
    np.testing.assert_allclose(q @ q.T, np.eye(4), atol=1e-12)
    np.testing.assert_allclose(cayley(q), a, atol=1e-10)


def test_cayley_involution_many_trials():
    gen = np.random.default_rng(11)
    worst = 0.0
    for _ in range(1000):
        raw = gen.uniform(-1.0, 1.0, (4, 4))
        a = raw - raw.T
        worst = max(worst, float(np.max(np.abs(cayley(cayley(a)) - a))))
    assert worst <= 1e-10


def test_cayley_skew_input_lands_in_so():
    gen = np.random.default_rng(5)
    for m in (2, 3, 5):
        raw = gen.uniform(-1.0, 1.0, (m, m))
        q = cayley(raw - raw.T)
        assert abs(np.linalg.det(q) - 1.0) <= 1e-10


def test_cayley_skew_hermitian_unitary():
    gen = np.random.default_rng(7)
    raw = gen.normal(size=(3, 3)) + 1j * gen.normal(size=(3, 3))
    a = raw - raw.conj().T
    q = cayley(a)
    np.testing.assert_allclose(q @ q.conj().T, np.eye(3), atol=1e-12)


def test_cayley_singular_error():
    with pytest.raises(SingularMatrixError):
        cayley(np.diag([-1.0, 0.0]))


def test_cayley_shape_error():
    with pytest.raises(ShapeError):
        cayley(np.ones((2, 3)))


@given(st.integers(0, 10_000))
def test_cayley_involution_hypothesis(seed):
    gen = np.random.default_rng(seed)
    raw = gen.uniform(-1.0, 1.0, (3, 3))
    a = raw - raw.T
    assert np.max(np.abs(cayley(cayley(a)) - a)) <= 1e-10


# ---------------------------------------------------------------------------
# shrink map
# ---------------------------------------------------------------------------


def test_shrink_fixed_point_and_arithmetic():
    np.testing.assert_array_equal(shrink_map(np.zeros(3), 1.0), np.zeros(3))
    np.testing.assert_allclose(shrink_map(np.array([1.0, 0.0]), 1.0), [0.5, 0.0], atol=0)


def test_shrink_jacobian_at_zero():
    # Central differences of v -> c v / (1 + |v|^2) at v = 0 against c * I.
    c, h = 0.25, 1e-6
    jac = np.empty((3, 3))
    for j in range(3):
        e = np.zeros(3)
        e[j] = h
        jac[:, j] = (shrink_map(e, c) - shrink_map(-e, c)) / (2.0 * h)
    np.testing.assert_allclose(jac, c * np.eye(3), atol=1e-6)


@given(st.lists(st.floats(-50, 50), min_size=1, max_size=6), st.floats(0.01, 10))
def test_shrink_norm_bound(coords, c):
    out = shrink_map(np.array(coords), c)
    assert np.linalg.norm(out) <= c / 2.0 + 1e-15


def test_unshrink_roundtrip():
    v = np.array([0.3, -0.4, 0.1])
    w = shrink_map(v, 0.8)
    np.testing.assert_allclose(unshrink_map(w, 0.8), v, atol=1e-12)


def test_shrink_rejects_bad_input():
    with pytest.raises(ValueError):
        shrink_map(np.array([np.nan]), 1.0)
    with pytest.raises(ValueError):
        shrink_map(np.zeros(2), -1.0)


# ---------------------------------------------------------------------------
# Fermat power maps
# ---------------------------------------------------------------------------


def test_fermat_identity_for_k_one():
    x = np.array([0.3, -0.9, 0.1])
    np.testing.assert_array_equal(fermat_power_map(x, 1), x)


def test_fermat_fixes_basis_vector():
    e1 = np.zeros(4)
    e1[0] = 1.0
    np.testing.assert_array_equal(fermat_power_map(e1, 3), e1)


def test_fermat_cubes_land_on_circle():
    # Points (a, b) with a^6 + b^6 = 1 map to (a^3, b^3) of unit norm.
    for a in np.linspace(-0.99, 0.99, 17):
        b = (1.0 - a**6) ** (1.0 / 6.0)
        out = fermat_power_map(np.array([a, b]), 3)
        assert abs(out @ out - 1.0) <= 1e-12


def test_fermat_rejects_even_exponent():
    with pytest.raises(ValueError):
        fermat_power_map(np.array([1.0, 0.0]), 2)


def test_fermat_root_roundtrip():
    gen = np.random.default_rng(2)
    x = gen.normal(size=(50, 3))
    x = radial_to_fermat(x / np.linalg.norm(x, axis=1, keepdims=True), 6)
    back = fermat_root_map(fermat_power_map(x, 3), 3)
    assert np.max(np.abs(back - x)) <= 1e-10


def test_radial_to_fermat_membership():
    gen = np.random.default_rng(4)
    x = gen.normal(size=(100, 4))
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    spec = VarietySpec.fermat_sphere(3, 6)
    pts = radial_to_fermat(x, 6)
    for p in pts:
        assert membership_residual(p, spec) <= 1e-12


# ---------------------------------------------------------------------------
# tangent frames
# ---------------------------------------------------------------------------


def test_tangent_basis_circle_axis():
    np.testing.assert_allclose(
        sphere_tangent_basis(np.array([1.0, 0.0])), [[0.0, 1.0]], atol=0
    )


def test_tangent_basis_sphere_axis():
    t = sphere_tangent_basis(np.array([1.0, 0.0, 0.0]))
    np.testing.assert_allclose(t, [[0.0, 1.0, 0.0], [0.0, 0.0, 1.0]], atol=0)


def test_tangent_basis_orthonormal_s4():
    gen = np.random.default_rng(9)
    for _ in range(20):
        p = gen.normal(size=5)
        p /= np.linalg.norm(p)
        t = sphere_tangent_basis(p)
        assert t.shape == (4, 5)
        np.testing.assert_allclose(t @ t.T, np.eye(4), atol=1e-12)
        assert np.max(np.abs(t @ p)) <= 1e-12


def test_oriented_frames_positive():
    gen = np.random.default_rng(10)
    for n in (1, 2, 3, 5):
        p = gen.normal(size=(40, n + 1))
        p /= np.linalg.norm(p, axis=1, keepdims=True)
        frames = oriented_sphere_frame_many(p)
        stacked = np.concatenate([p[:, None, :], frames], axis=1)
        assert np.all(np.linalg.det(stacked) > 0)


def test_tangent_basis_deterministic():
    p = np.array([0.1, -0.7, 0.7, 0.1])
    p /= np.linalg.norm(p)
    np.testing.assert_array_equal(sphere_tangent_basis(p), sphere_tangent_basis(p))


# ---------------------------------------------------------------------------
# realification and JSON literals
# ---------------------------------------------------------------------------


def test_interleave_roundtrip():
    z = np.array([1.0 + 2.0j, -0.5 + 0.25j])
    np.testing.assert_array_equal(deinterleave(interleave(z)), z)
    np.testing.assert_array_equal(interleave(z), [1.0, 2.0, -0.5, 0.25])


def test_point_json_roundtrip():
    p = np.array([0.25, -1.5, 3.0])
    np.testing.assert_array_equal(point_from_json(point_to_json(p)), p)


def test_matrix_json_roundtrip_real_and_complex():
    a = np.array([[1.0, 2.0], [3.0, 4.0]])
    np.testing.assert_array_equal(matrix_from_json(matrix_to_json(a)), a)
    b = np.array([[1j, 2.0 + 0.5j], [0.0, -1j]])
    np.testing.assert_array_equal(matrix_from_json(matrix_to_json(b)), b)


def test_matrix_json_entry_count_checked():
    with pytest.raises(ShapeError):
        matrix_from_json({"rows": 2, "cols": 2, "entries": [1.0, 2.0, 3.0]})
