"""Seeded random samplers on the supported varieties and quasi-uniform sphere sets."""

from __future__ import annotations

import numpy as np
from scipy.special import ndtri

from .geometry import (
    VarietySpec,
    cayley_many,
    interleave,
    lie_algebra_basis,
    matrix_to_point,
    radial_to_fermat,
)

_GOLDEN = (1.0 + np.sqrt(5.0)) / 2.0


def rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(int(seed))


def _normalize_rows(x: np.ndarray) -> np.ndarray:
    return x / np.linalg.norm(x, axis=-1, keepdims=True)


def sample_sphere(n: int, count: int, gen: np.random.Generator) -> np.ndarray:
    return _normalize_rows(gen.standard_normal((count, n + 1)))


def sample_group(spec: VarietySpec, count: int, gen: np.random.Generator) -> np.ndarray:
    """Haar-ish group samples: Cayley images of random skew matrices.

    For O(m) half of the samples are reflected into the second component;
    for SU(m) the unit-determinant phase is divided out.
    """
    basis = lie_algebra_basis(spec.kind if spec.kind != "O" else "SO", spec.m)
    coeffs = gen.uniform(-1.0, 1.0, (count, basis.shape[0]))
    skew = np.tensordot(coeffs, basis, axes=(1, 0))
    q = cayley_many(skew)
    if spec.kind == "O":
        refl = np.eye(spec.m)
        refl[0, 0] = -1.0
        flip = gen.integers(0, 2, count).astype(bool)
        q[flip] = q[flip] @ refl
    elif spec.kind == "SU":
        det = np.linalg.det(q)
        q = q * np.exp(-1j * np.angle(det) / spec.m)[:, None, None]
    elif spec.kind == "U":
        # Cayley images have no det = -1 phase obstruction; add a random
        # diagonal phase so the whole group is covered.
        phase = np.exp(1j * gen.uniform(0.0, 2.0 * np.pi, count))
        q = q * phase[:, None, None] ** (1.0 / spec.m)
    return matrix_to_point(q, spec)


def sample_variety(spec: VarietySpec, count: int, seed: int) -> np.ndarray:
    """Deterministic batch of points on ``spec``, shape (count, ambient_dim)."""
    gen = rng(seed)
    return _sample_variety(spec, count, gen)


def _sample_variety(spec: VarietySpec, count: int, gen: np.random.Generator) -> np.ndarray:
    if spec.kind == "sphere":
        return sample_sphere(spec.n, count, gen)
    if spec.kind == "fermat_sphere":
        return radial_to_fermat(sample_sphere(spec.n, count, gen), spec.exponent)
    if spec.is_group:
        return sample_group(spec, count, gen)
    if spec.kind == "product":
        return np.hstack([_sample_variety(f, count, gen) for f in spec.factors])
    raise ValueError(f"cannot sample variety kind {spec.kind!r}")


def sample_fiber(dim: int, count: int, gen: np.random.Generator, radius: float) -> np.ndarray:
    """Fiber vectors with directions uniform and norms uniform in (0, radius]."""
    d = _normalize_rows(gen.standard_normal((count, dim)))
    return d * (radius * gen.uniform(0.0, 1.0, count))[:, None]


def _frac(x):
    return x - np.floor(x)


def _kronecker_alphas(d: int) -> np.ndarray:
    """Irrational lattice directions from the generalized golden ratio.

    phi_d is the unique real root of x^(d+1) = x + 1 above 1, giving a
    low-discrepancy Kronecker sequence with alphas phi_d^-(i+1).
    """
    phi = 1.5
    for _ in range(64):
        phi = (1.0 + phi) ** (1.0 / (d + 1))
    return phi ** -(np.arange(1, d + 1, dtype=float))


def sphere_quasi_uniform(count: int, n: int) -> np.ndarray:
    """Fibonacci-type quasi-uniform point set on the n-sphere, shape (count, n+1).

    S1 uses the golden-angle sequence, S2 the classic Fibonacci spiral, and
    higher dimensions a Kronecker lattice pushed through the inverse normal
    CDF and normalized.
    """
    if n == 1:
        theta = 2.0 * np.pi * _frac(np.arange(count) * (_GOLDEN - 1.0))
        return np.column_stack([np.cos(theta), np.sin(theta)])
    if n == 2:
        i = np.arange(count, dtype=float)
        z = 1.0 - 2.0 * (i + 0.5) / count
        r = np.sqrt(np.maximum(0.0, 1.0 - z * z))
        theta = 2.0 * np.pi * _frac(i / _GOLDEN)
        return np.column_stack([r * np.cos(theta), r * np.sin(theta), z])
    alphas = _kronecker_alphas(n + 1)
    u = _frac(0.5 + np.outer(np.arange(1, count + 1, dtype=float), alphas))
    u = np.clip(u, 1e-12, 1.0 - 1e-12)
    return _normalize_rows(ndtri(u))


def sphere_quasi_uniform_complex(count: int, k: int) -> np.ndarray:
    """Quasi-uniform points on the unit sphere of C^k, returned as complex rows."""
    real = sphere_quasi_uniform(count, 2 * k - 1)
    return real[:, 0::2] + 1j * real[:, 1::2]


def complex_sphere_to_real(z: np.ndarray) -> np.ndarray:
    return interleave(z)
