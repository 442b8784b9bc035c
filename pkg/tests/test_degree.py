import numpy as np
import pytest

from spraylab.degree import (
    DegeneracyError,
    DegreeOptions,
    InconsistencyError,
    MatrixSphereMap,
    _preimage_count_once,
    a_k,
    ak_matrix_many,
    antipodal_map,
    calibration_sign,
    circle_power_map,
    compress_to_k_block,
    fermat_power_self_map,
    first_column_sphere_map,
    homogeneous_extension,
    identity_map,
    power_map_matrix,
    sharp_product,
    sphere_degree,
    unitary_degree,
    verify_ak_identities,
    winding_number,
)
from spraylab.sampling import rng, sphere_quasi_uniform, sphere_quasi_uniform_complex


# ---------------------------------------------------------------------------
# homogeneous extension
# ---------------------------------------------------------------------------


def test_extension_zero_at_origin():
    ext = homogeneous_extension(a_k(2))
    out = ext(np.zeros((1, 2), dtype=complex))
    assert np.max(np.abs(out)) == 0.0


def test_extension_positive_homogeneity():
    ext = homogeneous_extension(a_k(2))
    z = sphere_quasi_uniform_complex(20, 2)
    np.testing.assert_allclose(ext(2.0 * z), 2.0 * ext(z), atol=1e-14)


def test_extension_restricts_to_map():
    f = a_k(3)
    ext = homogeneous_extension(f)
    z = sphere_quasi_uniform_complex(20, 3)
    np.testing.assert_allclose(ext(z), f.eval_many(z), atol=1e-15)


# ---------------------------------------------------------------------------
# sharp product and the a_k family
# ---------------------------------------------------------------------------


def test_a1_is_coordinate():
    z = sphere_quasi_uniform_complex(10, 1)
    np.testing.assert_array_equal(ak_matrix_many(z, 1)[:, 0, 0], z[:, 0])


def test_a2_block_formula():
    z = sphere_quasi_uniform_complex(25, 2)
    mats = ak_matrix_many(z, 2)
    z1, z2 = z[:, 0], z[:, 1]
    np.testing.assert_array_equal(mats[:, 0, 0], z1)
    np.testing.assert_array_equal(mats[:, 0, 1], -np.conj(z2))
    np.testing.assert_array_equal(mats[:, 1, 0], z2)
    np.testing.assert_array_equal(mats[:, 1, 1], np.conj(z1))


def test_sharp_of_two_circle_maps_matches_recursion():
    sp = sharp_product(a_k(1), a_k(1))
    z = sphere_quasi_uniform_complex(50, 2)
    np.testing.assert_allclose(sp.eval_many(z), ak_matrix_many(z, 2), atol=1e-15)
    assert sp.p == 2 and sp.k == 2


def test_sharp_determinant_is_one_on_sphere():
    sp = sharp_product(a_k(1), a_k(1))
    z = sphere_quasi_uniform_complex(200, 2)
    np.testing.assert_allclose(np.linalg.det(sp.eval_many(z)), 1.0, atol=1e-13)


def test_sharp_recursion_extends_to_higher_k():
    sp = sharp_product(a_k(2), a_k(1))
    z = sphere_quasi_uniform_complex(50, 3)
    np.testing.assert_allclose(sp.eval_many(z), ak_matrix_many(z, 3), atol=1e-14)


@pytest.mark.parametrize("k", [1, 2, 3, 4])
def test_ak_identwhile_suite(k):
    report = verify_ak_identities(k, n_samples=500, seed=0)
    assert report.passed, report


def test_ak_gram_identity_at_random_points():
    gen = rng(21)
    z = gen.normal(size=(1000, 3)) + 1j * gen.normal(size=(1000, 3))
    z /= np.linalg.norm(z, axis=1)[:, None]
    mats = ak_matrix_many(z, 3)
    gram = mats @ np.conj(np.swapaxes(mats, 1, 2))
    np.testing.assert_allclose(gram, np.broadcast_to(np.eye(4), gram.shape), atol=1e-12)


def test_ak_values_unitary_and_invertible():
    for k in (2, 3, 4):
        f = a_k(k)
        assert f.max_unitarity_defect() <= 1e-12
        assert f.min_abs_det() >= 1.0 - 1e-10


def test_ak_size_cap():
    with pytest.raises(ValueError):
        a_k(7)
    assert a_k(5).p == 16


# ---------------------------------------------------------------------------
# winding and preimage oracles
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("d", range(-3, 4))
def test_circle_degrees_both_methods(d):
    report = sphere_degree(circle_power_map(d), 1)
    assert report.value == d
    assert report.cross_check_value == d  # preimage oracle agreed


def test_winding_number_residual_small():
    value, residual = winding_number(circle_power_map(3))
    assert value == 3 and residual <= 1e-9


def test_identity_degree():
    for n in (2, 3):
        assert sphere_degree(identity_map, n).value == 1


def test_antipodal_degree_s2():
    assert sphere_degree(antipodal_map, 2).value == -1


def test_fermat_pullback_degree():
    assert sphere_degree(fermat_power_self_map(1, 3), 1).value == 1
    assert sphere_degree(fermat_power_self_map(2, 3), 2).value == 1


def test_degree_invariant_under_small_perturbation():
    # Composing with a small tangent-field displacement plus projection is a
    # homotopy, so the computed integer must not move.
    axis = np.array([0.3, 0.5, -0.4])

    def perturbed(x):
        t = axis[None, :] - (x @ axis)[:, None] * x
        moved = x + 1e-3 * t
        moved /= np.linalg.norm(moved, axis=1, keepdims=True)
        return fermat_power_self_map(2, 3)(moved)

    assert sphere_degree(perturbed, 2).value == sphere_degree(fermat_power_self_map(2, 3), 2).value


def test_dimension_cap_enforced():
    with pytest.raises(ValueError):
        sphere_degree(identity_map, 7)


def test_degeneracy_error_on_pinned_critical_value():
    # theta -> theta + sin(theta) has derivative zero exactly at theta = pi,
    # so a value generator pinned at (-1, 0) only ever proposes a critical
    # value and the redraw loop must give up.
    def folded(x):
        theta = np.arctan2(x[:, 1], x[:, 0])
        a = theta + np.sin(theta)
        return np.column_stack([np.cos(a), np.sin(a)])

    class PinnedGen:
        def standard_normal(self, size):
            return np.array([-1.0, 0.0])

    opts = DegreeOptions(n_starts=100, max_redraws=3, min_jacobian=1e-4)
    starts = sphere_quasi_uniform(100, 1)
    with pytest.raises(DegeneracyError):
        _preimage_count_once(folded, 1, PinnedGen(), starts, opts)


# ---------------------------------------------------------------------------
# the column formula
# ---------------------------------------------------------------------------


def test_calibration_sign_is_cached_and_unit():
    assert calibration_sign() in (-1, 1)
    assert calibration_sign() == calibration_sign()


def test_unitary_degree_a1():
    report = unitary_degree(a_k(1))
    assert report.value == 1 and report.method == "unitary_formula"
    assert report.divisor == 1


@pytest.mark.parametrize("k", [2, 3])
def test_unitary_degree_ak_is_one(k):
    report = unitary_degree(a_k(k))
    assert report.value == 1
    assert report.psi_degree % report.divisor == 0


def test_unitary_degree_power_maps():
    for d in (-2, 3):
        assert unitary_degree(power_map_matrix(d)).value == d


def test_unitary_degree_rejects_small_matrix():
    with pytest.raises(ValueError):
        unitary_degree(MatrixSphereMap(k=2, p=1, eval_many=lambda z: z[:, :1, None]))


def test_divisibility_guard_raises():
    # A synthetic 3-block map whose first column is the identity embedding;
    # its column degree 1 is not divisible by 2! = 2, which the theory
    # forbids for anything actually continuous into invertible 3-blocks, so
    # the guard must fire.
    def eval_many(z):
        n = z.shape[0]
        out = np.broadcast_to(np.eye(3, dtype=complex), (n, 3, 3)).copy()
        out[:, :, 0] = z
        return out

    fake = MatrixSphereMap(k=3, p=3, eval_many=eval_many)
    with pytest.raises(InconsistencyError):
        unitary_degree(fake)


# ---------------------------------------------------------------------------
# compression to the k-block
# ---------------------------------------------------------------------------


def test_compress_requires_unitary_values():
    scaled = MatrixSphereMap(k=3, p=4, eval_many=lambda z: 2.0 * ak_matrix_many(z, 3))
    with pytest.raises(ValueError):
        compress_to_k_block(scaled)


def test_compress_a3_closed_form_column():
    # With the missed point pinned at e1, the two explicit rotations send
    # the last column (0, -conj z3, conj z2, z1) to e4 and carry the first
    # column (z1, z2, z3, 0) to (z1^2, z2 - z1 conj z3, z3 + z1 conj z2, 0);
    # the derivation is a direct expansion of the two rank-two rotation
    # formulas.  Frozen here as an independent check on the generic code.
    reduced = compress_to_k_block(a_k(3), missed_points=[np.array([1.0, 0, 0, 0], complex)])
    z = sphere_quasi_uniform_complex(100, 3)
    col = reduced.eval_many(z)[:, :, 0]
    expected = np.stack(
        [
            z[:, 0] ** 2,
            z[:, 1] - z[:, 0] * np.conj(z[:, 2]),
            z[:, 2] + z[:, 0] * np.conj(z[:, 1]),
        ],
        axis=1,
    )
    np.testing.assert_allclose(col, expected, atol=1e-13)
    # unit norm comes for free from unitarity of the compressed map
    np.testing.assert_allclose(np.linalg.norm(col, axis=1), 1.0, atol=1e-13)


def test_compress_output_is_unitary():
    reduced = compress_to_k_block(a_k(3), seed=0)
    assert reduced.p == 3
    assert reduced.max_unitarity_defect() <= 1e-10


def test_compressed_column_degree_is_two():
    reduced = compress_to_k_block(a_k(3), seed=0)
    psi = first_column_sphere_map(reduced)
    assert sphere_degree(psi, 5).value == 2


@pytest.mark.slow
def test_divisibility_k4():
    report = unitary_degree(a_k(4), DegreeOptions(max_dim=7, n_starts=1600))
    assert report.psi_degree % 6 == 0
    assert report.value == 1


# ---------------------------------------------------------------------------
# multiplicativity
# ---------------------------------------------------------------------------


def test_degree_multiplicativity_family():
    g = a_k(1)
    dg = unitary_degree(g).value
    for f in (a_k(1), power_map_matrix(2), power_map_matrix(-1)):
        df = unitary_degree(f).value
        assert unitary_degree(sharp_product(f, g)).value == df * dg


def test_sharp_a2_a1_degree_one():
    # a_2 # a_1 realizes the k = 3 member of the family; its degree through
    # the compression pipeline must also be 1.
    report = unitary_degree(sharp_product(a_k(2), a_k(1)))
    assert report.value == 1


def test_report_is_jsonable():
    import json

    from spraylab.serialize import jsonable

    report = unitary_degree(a_k(2))
    payload = json.dumps(jsonable(report))
    assert '"unitary_formula"' in payload
    assert '"calibration_sign"' in payload
