"""Points, matrices, variety membership, and explicit rational building blocks.

Everything downstream works on plain numpy arrays: a point of an ambient
space is a 1-d float array, a matrix is a 2-d float or complex array.
Complex coordinates are realified by interleaving, so a point of a unitary
group or of a sphere inside C^k is stored as [re z0, im z0, re z1, ...].
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

DEFAULT_MEMBERSHIP_TOL = 1e-10
CAYLEY_CONDITION_LIMIT = 1e12

_GROUP_KINDS = ("O", "SO", "U", "SU")


class ShapeError(ValueError):
    """A point or matrix does not have the dimensions the operation expects."""


class SingularMatrixError(ValueError):
    """A matrix inversion exceeded the conditioning limit."""


# ---------------------------------------------------------------------------
# Variety specifications
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class VarietySpec:
    """A supported variety: sphere, Fermat sphere, classical group, or product.

    ``kind`` is one of ``"sphere"``, ``"fermat_sphere"``, ``"O"``, ``"SO"``,
    ``"U"``, ``"SU"``, ``"product"``.  Sphere kinds use ``n`` (the manifold
    dimension), group kinds use ``m`` (the matrix size), ``fermat_sphere``
    additionally carries the even defining exponent.
    """

    kind: str
    n: int = 0
    m: int = 0
    exponent: int = 2
    factors: tuple = field(default_factory=tuple)

    # -- constructors -------------------------------------------------------

    @staticmethod
    def sphere(n: int) -> "VarietySpec":
        if n < 1:
            raise ValueError(f"sphere dimension must be >= 1, got {n}")
        return VarietySpec(kind="sphere", n=int(n))

    @staticmethod
    def fermat_sphere(n: int, exponent: int) -> "VarietySpec":
        if n < 1:
            raise ValueError(f"sphere dimension must be >= 1, got {n}")
        if exponent < 2 or exponent % 2:
            raise ValueError(f"defining exponent must be even and >= 2, got {exponent}")
        return VarietySpec(kind="fermat_sphere", n=int(n), exponent=int(exponent))

    @staticmethod
    def group(name: str, m: int) -> "VarietySpec":
        if name not in _GROUP_KINDS:
            raise ValueError(f"unknown group kind {name!r}")
        if m < 1:
            raise ValueError(f"matrix size must be >= 1, got {m}")
        return VarietySpec(kind=name, m=int(m))

    @staticmethod
    def product(*factors: "VarietySpec") -> "VarietySpec":
        if not factors:
            raise ValueError("product needs at least one factor")
        return VarietySpec(kind="product", factors=tuple(factors))

    # -- derived data --------------------------------------------------------

    @property
    def is_group(self) -> bool:
        return self.kind in _GROUP_KINDS

    @property
    def is_complex(self) -> bool:
        return self.kind in ("U", "SU")

    @property
    def ambient_dim(self) -> int:
        if self.kind in ("sphere", "fermat_sphere"):
            return self.n + 1
        if self.kind in ("O", "SO"):
            return self.m * self.m
        if self.kind in ("U", "SU"):
            return 2 * self.m * self.m
        if self.kind == "product":
            return sum(f.ambient_dim for f in self.factors)
        raise ValueError(f"unknown variety kind {self.kind!r}")

    @property
    def dim(self) -> int:
        """Manifold dimension (the rank a dominating spray must reach)."""
        if self.kind in ("sphere", "fermat_sphere"):
            return self.n
        if self.kind in ("O", "SO"):
            return self.m * (self.m - 1) // 2
        if self.kind == "U":
            return self.m * self.m
        if self.kind == "SU":
            return self.m * self.m - 1
        if self.kind == "product":
            return sum(f.dim for f in self.factors)
        raise ValueError(f"unknown variety kind {self.kind!r}")

    def label(self) -> str:
        if self.kind == "sphere":
            return f"S{self.n}"
        if self.kind == "fermat_sphere":
            return f"S{self.n}_{self.exponent}"
        if self.kind == "product":
            return " x ".join(f.label() for f in self.factors)
        return f"{self.kind}({self.m})"

    def slices(self) -> list:
        """Coordinate slices of the factors (identity slice for non-products)."""
        if self.kind != "product":
            return [slice(0, self.ambient_dim)]
        out, start = [], 0
        for f in self.factors:
            out.append(slice(start, start + f.ambient_dim))
            start += f.ambient_dim
        return out


# ---------------------------------------------------------------------------
# Realification helpers
# ---------------------------------------------------------------------------


def interleave(z: np.ndarray) -> np.ndarray:
    """Complex array (..., k) -> real array (..., 2k) as [re, im, re, im, ...]."""
    z = np.asarray(z, dtype=complex)
    out = np.empty(z.shape[:-1] + (2 * z.shape[-1],), dtype=float)
    out[..., 0::2] = z.real
    out[..., 1::2] = z.imag
    return out


def deinterleave(x: np.ndarray) -> np.ndarray:
    """Inverse of :func:`interleave`."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] % 2:
        raise ShapeError("realified array must have even length")
    return x[..., 0::2] + 1j * x[..., 1::2]


def point_to_matrix(p: np.ndarray, spec: VarietySpec) -> np.ndarray:
    """Unflatten a group point into its m-by-m matrix."""
    p = np.asarray(p, dtype=float)
    if not spec.is_group:
        raise ShapeError(f"{spec.label()} is not a group variety")
    if p.shape[-1] != spec.ambient_dim:
        raise ShapeError(f"expected {spec.ambient_dim} coordinates, got {p.shape[-1]}")
    m = spec.m
    if spec.is_complex:
        return deinterleave(p).reshape(p.shape[:-1] + (m, m))
    return p.reshape(p.shape[:-1] + (m, m))


def matrix_to_point(q: np.ndarray, spec: VarietySpec) -> np.ndarray:
    """Flatten an m-by-m matrix into ambient coordinates of the group."""
    q = np.asarray(q)
    m = spec.m
    flat = q.reshape(q.shape[:-2] + (m * m,))
    if spec.is_complex:
        return interleave(flat)
    return np.asarray(flat, dtype=float).copy()


# ---------------------------------------------------------------------------
# Membership
# ---------------------------------------------------------------------------


def membership_residual(p: np.ndarray, spec: VarietySpec) -> float:
    """Largest violation of the defining equations of ``spec`` at ``p``."""
    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or p.shape[0] != spec.ambient_dim:
        raise ShapeError(
            f"point has {p.shape} coordinates, {spec.label()} needs {spec.ambient_dim}"
        )
    if not np.all(np.isfinite(p)):
        raise ValueError("point has non-finite coordinates")
    if spec.kind == "sphere":
        return abs(float(p @ p) - 1.0)
    if spec.kind == "fermat_sphere":
        return abs(float(np.sum(p**spec.exponent)) - 1.0)
    if spec.is_group:
        q = point_to_matrix(p, spec)
        gram = q @ q.conj().T - np.eye(spec.m)
        resid = float(np.max(np.abs(gram)))
        if spec.kind in ("SO", "SU"):
            resid = max(resid, abs(np.linalg.det(q) - 1.0))
        return resid
    if spec.kind == "product":
        return max(
            membership_residual(p[s], f) for s, f in zip(spec.slices(), spec.factors)
        )
    raise ValueError(f"unknown variety kind {spec.kind!r}")


def is_member(p: np.ndarray, spec: VarietySpec, tol: float = DEFAULT_MEMBERSHIP_TOL) -> bool:
    """True iff the defining equations of ``spec`` hold at ``p`` within ``tol``."""
    return membership_residual(p, spec) <= tol


def membership_residual_many(points: np.ndarray, spec: VarietySpec) -> np.ndarray:
    """Per-row membership residuals for a batch of points, shape (N,)."""
    p = np.asarray(points, dtype=float)
    if p.ndim != 2 or p.shape[1] != spec.ambient_dim:
        raise ShapeError(
            f"batch has shape {p.shape}, {spec.label()} needs (N, {spec.ambient_dim})"
        )
    if spec.kind == "sphere":
        return np.abs(np.einsum("ni,ni->n", p, p) - 1.0)
    if spec.kind == "fermat_sphere":
        return np.abs(np.sum(p**spec.exponent, axis=1) - 1.0)
    if spec.is_group:
        q = point_to_matrix(p, spec)
        gram = q @ np.conj(np.swapaxes(q, -1, -2)) - np.eye(spec.m)
        resid = np.max(np.abs(gram), axis=(1, 2))
        if spec.kind in ("SO", "SU"):
            resid = np.maximum(resid, np.abs(np.linalg.det(q) - 1.0))
        return resid
    if spec.kind == "product":
        return np.max(
            [membership_residual_many(p[:, s], f) for s, f in zip(spec.slices(), spec.factors)],
            axis=0,
        )
    raise ValueError(f"unknown variety kind {spec.kind!r}")


# ---------------------------------------------------------------------------
# Cayley transform
# ---------------------------------------------------------------------------


def cayley(a: np.ndarray) -> np.ndarray:
    """Cayley transform (I - A)(I + A)^(-1).

    Maps skew-symmetric matrices to special-orthogonal ones and
    skew-Hermitian matrices to unitary ones, fixing I at A = 0, and is an
    involution: applying it twice returns the input.
    """
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ShapeError(f"square matrix required, got shape {a.shape}")
    if not np.issubdtype(a.dtype, np.complexfloating):
        a = a.astype(float)
    eye = np.eye(a.shape[0], dtype=a.dtype)
    ipa = eye + a
    if np.linalg.cond(ipa) > CAYLEY_CONDITION_LIMIT:
        raise SingularMatrixError("I + A is numerically singular")
    # X(I+A) = I-A solved via the plain-transposed system; LU with partial
    # pivoting underneath.
    return np.linalg.solve(ipa.T, (eye - a).T).T


def cayley_many(a: np.ndarray) -> np.ndarray:
    """Batched Cayley transform for stacked (..., m, m) skew inputs.

    Skips the conditioning check: skew inputs keep I + A invertible.
    """
    a = np.asarray(a)
    eye = np.eye(a.shape[-1], dtype=a.dtype)
    ipa = eye + a
    return np.swapaxes(
        np.linalg.solve(np.swapaxes(ipa, -1, -2), np.swapaxes(eye - a, -1, -2)), -1, -2
    )


# ---------------------------------------------------------------------------
# Shrink map and Fermat power maps
# ---------------------------------------------------------------------------


def shrink_map(v: np.ndarray, c: float) -> np.ndarray:
    """Rational squeeze c*v / (1 + |v|^2); image norm stays below c/2."""
    v = np.asarray(v, dtype=float)
    if not np.all(np.isfinite(v)):
        raise ValueError("input has non-finite coordinates")
    if c <= 0:
        raise ValueError(f"scale must be positive, got {c}")
    return c * v / (1.0 + float(v @ v))


def unshrink_map(w: np.ndarray, c: float) -> np.ndarray:
    """Inverse of :func:`shrink_map` on its image ball |w| < c/2 (small branch)."""
    w = np.asarray(w, dtype=float)
    r = float(np.linalg.norm(w))
    if r == 0.0:
        return w.copy()
    disc = c * c - 4.0 * r * r
    if disc < 0:
        raise ValueError("vector lies outside the image of the shrink map")
    t = (c - np.sqrt(disc)) / (2.0 * r)
    return w * (t / r)


def fermat_power_map(x: np.ndarray, k: int) -> np.ndarray:
    """Coordinatewise odd power, carrying the degree-2k Fermat sphere to the round one."""
    if k < 1 or k % 2 == 0:
        raise ValueError(f"odd positive exponent required, got {k}")
    x = np.asarray(x, dtype=float)
    return x**k


def fermat_root_map(y: np.ndarray, k: int) -> np.ndarray:
    """Coordinatewise real k-th root, inverse of :func:`fermat_power_map` for odd k."""
    if k < 1 or k % 2 == 0:
        raise ValueError(f"odd positive exponent required, got {k}")
    y = np.asarray(y, dtype=float)
    return np.sign(y) * np.abs(y) ** (1.0 / k)


def radial_to_fermat(x: np.ndarray, exponent: int) -> np.ndarray:
    """Scale points of the round sphere onto the Fermat sphere of the given exponent."""
    x = np.asarray(x, dtype=float)
    scale = np.sum(x**exponent, axis=-1) ** (1.0 / exponent)
    return x / scale[..., None]


# ---------------------------------------------------------------------------
# Tangent frames on spheres
# ---------------------------------------------------------------------------


def sphere_tangent_basis_many(points: np.ndarray) -> np.ndarray:
    """Deterministic orthonormal tangent frames at rows of ``points``.

    Drops the axis of largest absolute component and Gram-Schmidts the
    remaining standard basis vectors against the point, in index order.
    Returns an array of shape (N, n, n+1).
    """
    p = np.asarray(points, dtype=float)
    squeeze = p.ndim == 1
    if squeeze:
        p = p[None, :]
    count, amb = p.shape
    n = amb - 1
    drop = np.argmax(np.abs(p), axis=1)
    base = np.tile(np.arange(amb), (count, 1))
    kept = base[base != drop[:, None]].reshape(count, n)
    seeds = np.eye(amb)[kept]  # (N, n, amb)
    frame = np.empty((count, n, amb))
    for j in range(n):
        u = seeds[:, j, :].copy()
        u -= np.einsum("ni,ni->n", u, p)[:, None] * p
        for l in range(j):
            u -= np.einsum("ni,ni->n", u, frame[:, l, :])[:, None] * frame[:, l, :]
        u /= np.linalg.norm(u, axis=1)[:, None]
        frame[:, j, :] = u
    return frame[0] if squeeze else frame


def sphere_tangent_basis(p: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """Orthonormal basis of the tangent space at a sphere point, shape (n, n+1)."""
    p = np.asarray(p, dtype=float)
    if abs(float(p @ p) - 1.0) > max(tol, 1e-10) * 10:
        raise ValueError("point is not on the unit sphere")
    return sphere_tangent_basis_many(p)


def oriented_sphere_frame_many(points: np.ndarray) -> np.ndarray:
    """Tangent frames with the outward-normal-first orientation.

    The frame rows t_1..t_n are flipped (last row only) so that the
    (n+1)-frame [p, t_1, ..., t_n] is positively oriented in the ambient
    space.  Degree computations rely on this convention.
    """
    p = np.asarray(points, dtype=float)
    squeeze = p.ndim == 1
    if squeeze:
        p = p[None, :]
    frames = sphere_tangent_basis_many(p)
    stacked = np.concatenate([p[:, None, :], frames], axis=1)
    flip = np.linalg.det(stacked) < 0
    frames[flip, -1, :] *= -1.0
    return frames[0] if squeeze else frames


# ---------------------------------------------------------------------------
# Lie algebra bases and group tangent frames
# ---------------------------------------------------------------------------


@lru_cache(maxsize=None)
def lie_algebra_basis(kind: str, m: int) -> np.ndarray:
    """Fixed deterministic basis of the Lie algebra of the given group kind.

    O/SO: skew-symmetric E_ij - E_ji for i < j (lexicographic).
    U: the m diagonal generators i*E_jj, then per pair i < j the two
    generators E_ij - E_ji and i*(E_ij + E_ji).
    SU: traceless diagonal generators i*(E_jj - E_(j+1)(j+1)), then the same
    off-diagonal pairs as U.
    """
    mats = []
    if kind in ("O", "SO"):
        for i in range(m):
            for j in range(i + 1, m):
                b = np.zeros((m, m))
                b[i, j] = 1.0
                b[j, i] = -1.0
                mats.append(b)
        out = np.array(mats)
    elif kind in ("U", "SU"):
        if kind == "U":
            for j in range(m):
                b = np.zeros((m, m), dtype=complex)
                b[j, j] = 1j
                mats.append(b)
        else:
            for j in range(m - 1):
                b = np.zeros((m, m), dtype=complex)
                b[j, j] = 1j
                b[j + 1, j + 1] = -1j
                mats.append(b)
        for i in range(m):
            for j in range(i + 1, m):
                b = np.zeros((m, m), dtype=complex)
                b[i, j] = 1.0
                b[j, i] = -1.0
                mats.append(b)
                b = np.zeros((m, m), dtype=complex)
                b[i, j] = 1j
                b[j, i] = 1j
                mats.append(b)
        out = np.array(mats)
    else:
        raise ValueError(f"no Lie algebra basis for kind {kind!r}")
    out.setflags(write=False)
    return out


def embed_fiber_in_algebra(v: np.ndarray, kind: str, m: int) -> np.ndarray:
    """Linear embedding of fiber coordinates into the Lie algebra, batched."""
    basis = lie_algebra_basis(kind, m)
    return np.tensordot(np.asarray(v, dtype=float), basis, axes=(-1, 0))


@lru_cache(maxsize=None)
def _algebra_flat_pinv(kind: str, m: int) -> np.ndarray:
    basis = lie_algebra_basis(kind, m)
    if np.iscomplexobj(basis):
        flat = interleave(basis.reshape(basis.shape[0], -1))
    else:
        flat = basis.reshape(basis.shape[0], -1)
    return np.linalg.pinv(flat)


def algebra_coordinates(a: np.ndarray, kind: str, m: int) -> tuple:
    """Coordinates of a Lie algebra element in the fixed basis, with residual."""
    coords, resid = algebra_coordinates_many(np.asarray(a)[None], kind, m)
    return coords[0], float(resid[0])


def algebra_coordinates_many(a: np.ndarray, kind: str, m: int) -> tuple:
    """Batched basis coordinates of (N, m, m) algebra elements, with residuals."""
    basis = lie_algebra_basis(kind, m)
    if np.iscomplexobj(basis):
        vec = interleave(np.asarray(a, dtype=complex).reshape(a.shape[0], -1))
        flat = interleave(basis.reshape(basis.shape[0], -1))
    else:
        vec = np.asarray(a, dtype=float).reshape(a.shape[0], -1)
        flat = basis.reshape(basis.shape[0], -1)
    coords = vec @ _algebra_flat_pinv(kind, m)
    resid = np.max(np.abs(coords @ flat - vec), axis=1)
    return coords, resid


def group_tangent_frame(p: np.ndarray, spec: VarietySpec) -> np.ndarray:
    """Orthonormal frame of the group's tangent space at ``p`` in flat coordinates."""
    q = point_to_matrix(p, spec)
    basis = lie_algebra_basis(spec.kind, spec.m)
    tangents = basis @ q  # (d, m, m)
    rows = matrix_to_point(tangents, spec)
    # QR with a sign fix keeps the frame deterministic.
    qmat, rmat = np.linalg.qr(rows.T)
    signs = np.sign(np.diag(rmat))
    signs[signs == 0] = 1.0
    return (qmat * signs).T


def variety_tangent_frame(p: np.ndarray, spec: VarietySpec) -> np.ndarray:
    """Orthonormal tangent frame at a point of any supported variety."""
    if spec.kind == "sphere":
        return sphere_tangent_basis_many(p)
    if spec.kind == "fermat_sphere":
        # Gradient of the defining polynomial replaces the radial direction.
        grad = spec.exponent * np.asarray(p, dtype=float) ** (spec.exponent - 1)
        grad /= np.linalg.norm(grad)
        seeds = np.eye(spec.ambient_dim)
        drop = int(np.argmax(np.abs(grad)))
        rows = []
        for j in range(spec.ambient_dim):
            if j == drop:
                continue
            u = seeds[j] - (seeds[j] @ grad) * grad
            for r in rows:
                u -= (u @ r) * r
            rows.append(u / np.linalg.norm(u))
        return np.array(rows)
    if spec.is_group:
        return group_tangent_frame(p, spec)
    if spec.kind == "product":
        blocks = []
        for s, f in zip(spec.slices(), spec.factors):
            sub = variety_tangent_frame(np.asarray(p)[s], f)
            block = np.zeros((sub.shape[0], spec.ambient_dim))
            block[:, s] = sub
            blocks.append(block)
        return np.vstack(blocks)
    raise ValueError(f"unknown variety kind {spec.kind!r}")
