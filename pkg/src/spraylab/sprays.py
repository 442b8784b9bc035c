"""Explicit dominating sprays, numerical verification of the spray axioms,
and local inversion near the zero section.

Every spray here is trivialized: the total space is base x R^fiber_dim, the
zero section is (y, 0), and ``eval(y, v)`` is a regular map landing back in
the base (for product-submersion sprays, in the fiber of the projection
through (x, y), i.e. the x-block is preserved exactly).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import serialize
from .geometry import (
    VarietySpec,
    cayley_many,
    deinterleave,
    embed_fiber_in_algebra,
    interleave,
    lie_algebra_basis,
    matrix_to_point,
    membership_residual_many,
    point_to_matrix,
    algebra_coordinates_many,
    shrink_map,
    sphere_tangent_basis_many,
    unshrink_map,
    variety_tangent_frame,
)
from .sampling import rng, sample_fiber, sample_variety


class SprayInversionError(RuntimeError):
    """Local inversion failed (no convergence, or the target is out of reach)."""


class AntipodeError(SprayInversionError):
    """The stereographic inverse is undefined at the antipode."""


@dataclass
class NewtonConfig:
    tol: float = 1e-11
    max_iter: int = 50
    fd_step: float = 1e-7
    max_fiber_norm: float = 100.0


@dataclass(frozen=True)
class SubmersionSpec:
    """The canonical projection X x Y -> X whose sections get approximated."""

    domain: VarietySpec  # X
    target: VarietySpec  # Y

    @property
    def total_space(self) -> VarietySpec:
        return VarietySpec.product(self.domain, self.target)

    def project(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(points, dtype=float)[..., : self.domain.ambient_dim]


@dataclass
class Spray:
    """A trivialized spray: ``eval_many`` maps (base points, fiber vectors) to base points.

    ``required_rank`` is the tangent-space dimension the fiber derivative at
    the zero section must reach for the spray to dominate (the vertical
    dimension for product-submersion sprays).  ``x_dim > 0`` marks the
    leading coordinate block a product-submersion spray must preserve.
    """

    kind: str
    base: VarietySpec
    fiber_dim: int
    required_rank: int
    eval_many: Callable
    params: dict = field(default_factory=dict)
    inverse_many: Optional[Callable] = None
    vertical_frame: Optional[Callable] = None
    x_dim: int = 0

    def eval(self, y: np.ndarray, v: np.ndarray) -> np.ndarray:
        out = self.eval_many(np.asarray(y, float)[None], np.asarray(v, float)[None])
        return out[0]

    def inverse(self, y: np.ndarray, q: np.ndarray) -> np.ndarray:
        if self.inverse_many is None:
            raise SprayInversionError(f"{self.kind} spray has no exact inverse")
        return self.inverse_many(np.asarray(y, float)[None], np.asarray(q, float)[None])[0]

    def descriptor(self) -> dict:
        return {
            "kind": self.kind,
            "base": serialize.variety_to_json(self.base),
            "fiber_dim": self.fiber_dim,
            "params": self.params,
        }


# ---------------------------------------------------------------------------
# Stereographic spray on the n-sphere
# ---------------------------------------------------------------------------


def _stereo_forward(points: np.ndarray, w: np.ndarray) -> np.ndarray:
    # Second intersection of the line from -p through p + w with the sphere.
    wn2 = np.einsum("ni,ni->n", w, w)
    return ((4.0 - wn2)[:, None] * points + 4.0 * w) / (4.0 + wn2)[:, None]


def _stereo_backward(points: np.ndarray, targets: np.ndarray) -> np.ndarray:
    # Projection of q from -p onto the tangent hyperplane through p.
    qp = np.einsum("ni,ni->n", targets, points)
    denom = 1.0 + qp
    if np.any(denom <= 1e-12):
        raise AntipodeError("target is (numerically) antipodal to the base point")
    return 2.0 * (targets - qp[:, None] * points) / denom[:, None]


def stereographic_spray(n: int, fiber: str = "frame") -> Spray:
    """Spray on the n-sphere via inverse stereographic projection from -p.

    ``fiber="frame"`` (the default) parametrizes the tangent hyperplane by
    coordinates in the deterministic per-point tangent frame, so fiber_dim
    equals n.  ``fiber="ambient"`` uses the trivialization of the tangent
    bundle inside base x R^(n+1): the fiber vector is an ambient vector that
    gets projected onto the tangent hyperplane first.  The ambient variant
    has no frame seams, which the approximation pipeline needs; both satisfy
    the spray axioms and dominate with rank n.
    """
    if n < 1:
        raise ValueError(f"sphere dimension must be >= 1, got {n}")
    if fiber not in ("frame", "ambient"):
        raise ValueError(f"unknown fiber mode {fiber!r}")
    base = VarietySpec.sphere(n)

    if fiber == "frame":

        def eval_many(points, vs):
            frames = sphere_tangent_basis_many(points)
            w = np.einsum("nf,nfa->na", vs, frames)
            return _stereo_forward(points, w)

        def inverse_many(points, targets):
            w = _stereo_backward(points, targets)
            frames = sphere_tangent_basis_many(points)
            return np.einsum("nfa,na->nf", frames, w)

        fiber_dim = n
    else:

        def eval_many(points, vs):
            w = vs - np.einsum("ni,ni->n", vs, points)[:, None] * points
            return _stereo_forward(points, w)

        def inverse_many(points, targets):
            # The tangential representative: the minimal-norm fiber preimage.
            return _stereo_backward(points, targets)

        fiber_dim = n + 1

    return Spray(
        kind="stereographic",
        base=base,
        fiber_dim=fiber_dim,
        required_rank=n,
        eval_many=eval_many,
        inverse_many=inverse_many,
        vertical_frame=lambda pts: sphere_tangent_basis_many(pts),
        params={"n": n, "fiber": fiber},
    )


# ---------------------------------------------------------------------------
# Group-action sprays
# ---------------------------------------------------------------------------


def _default_space(group: VarietySpec) -> VarietySpec:
    if group.kind in ("O", "SO"):
        return VarietySpec.sphere(group.m - 1)
    return VarietySpec.sphere(2 * group.m - 1)


def group_action_spray(
    group: VarietySpec,
    space: Optional[VarietySpec] = None,
    shrink_c: Optional[float] = None,
) -> Spray:
    """Spray s(y, v) = cayley(skew(v)) . y for a classical group acting on ``space``.

    ``space`` defaults to the sphere the group acts on transitively
    (S^(m-1) for O/SO(m), the realified S^(2m-1) for U/SU(m)); passing the
    group itself selects the left-translation action.  ``skew`` embeds fiber
    coordinates into the Lie algebra by the fixed deterministic basis, and
    an optional shrink precomposition v -> c v / (1 + |v|^2) is available
    for the partially-defined-parametrization setting.
    """
    if not group.is_group:
        raise ValueError(f"{group.label()} is not a group")
    if space is None:
        space = _default_space(group)
    algebra_kind = "SO" if group.kind == "O" else group.kind
    m = group.m
    fiber_dim = lie_algebra_basis(algebra_kind, m).shape[0]

    self_action = space == group
    if not self_action:
        if space.kind != "sphere":
            raise ValueError("group sprays act on spheres or on the group itself")
        expected = m - 1 if group.kind in ("O", "SO") else 2 * m - 1
        if space.n != expected:
            raise ValueError(
                f"{group.label()} acts on S{expected}, not on {space.label()}"
            )
    complex_vec = group.is_complex and not self_action

    def _group_elements(vs):
        if shrink_c is not None:
            vs = np.array([shrink_map(v, shrink_c) for v in vs])
        return cayley_many(embed_fiber_in_algebra(vs, algebra_kind, m))

    if self_action:

        def eval_many(points, vs):
            q = _group_elements(vs)
            ymat = point_to_matrix(points, group)
            return matrix_to_point(q @ ymat, group)

        def inverse_many(points, targets):
            ymat = point_to_matrix(points, group)
            qmat = point_to_matrix(targets, group)
            # g y = q  =>  y^T g^T = q^T
            g = np.swapaxes(
                np.linalg.solve(np.swapaxes(ymat, -1, -2), np.swapaxes(qmat, -1, -2)),
                -1,
                -2,
            )
            a = cayley_many(g)
            coords, resid = algebra_coordinates_many(a, algebra_kind, m)
            if np.max(resid) > 1e-8:
                raise SprayInversionError(
                    "target group element is not in the Cayley-reachable neighborhood"
                )
            if shrink_c is not None:
                coords = np.array([unshrink_map(c, shrink_c) for c in coords])
            return coords

    else:

        def eval_many(points, vs):
            q = _group_elements(vs)
            if complex_vec:
                z = deinterleave(points)
                return interleave(np.einsum("nij,nj->ni", q, z))
            return np.einsum("nij,nj->ni", q, points)

        inverse_many = None

    return Spray(
        kind="group_action",
        base=space,
        fiber_dim=fiber_dim,
        required_rank=space.dim,
        eval_many=eval_many,
        inverse_many=inverse_many,
        vertical_frame=lambda pts: np.array(
            [variety_tangent_frame(p, space) for p in np.asarray(pts, float)]
        ),
        params={
            "group": serialize.variety_to_json(group),
            "space": serialize.variety_to_json(space),
            "shrink_c": shrink_c,
        },
    )


# ---------------------------------------------------------------------------
# Product-submersion and iterated sprays
# ---------------------------------------------------------------------------


def product_submersion_spray(x_spec: VarietySpec, spray_y: Spray) -> Spray:
    """Spray for the projection X x Y -> X: ((x, y), v) -> (x, s_Y(y, v)).

    The x-block of the output is the x-block of the input, bit for bit.
    """
    base = VarietySpec.product(x_spec, spray_y.base)
    xd = x_spec.ambient_dim

    def eval_many(points, vs):
        out = np.empty((points.shape[0], base.ambient_dim))
        out[:, :xd] = points[:, :xd]
        out[:, xd:] = spray_y.eval_many(points[:, xd:], vs)
        return out

    inverse_many = None
    if spray_y.inverse_many is not None:

        def inverse_many(points, targets):
            if np.max(np.abs(points[:, :xd] - targets[:, :xd])) > 1e-8:
                raise SprayInversionError("target lies in a different fiber of the projection")
            return spray_y.inverse_many(points[:, xd:], targets[:, xd:])

    def vertical_frame(points):
        inner = spray_y.vertical_frame(np.asarray(points, float)[:, xd:])
        out = np.zeros((inner.shape[0], inner.shape[1], base.ambient_dim))
        out[:, :, xd:] = inner
        return out

    return Spray(
        kind="product_submersion",
        base=base,
        fiber_dim=spray_y.fiber_dim,
        required_rank=spray_y.required_rank,
        eval_many=eval_many,
        inverse_many=inverse_many,
        vertical_frame=vertical_frame,
        x_dim=xd,
        params={"x": serialize.variety_to_json(x_spec), "inner": spray_y.descriptor()},
    )


def iterated_spray(spray: Spray, k: int) -> Spray:
    """k-fold iterate: blocks are fed left to right through the base spray.

    eval(z, (v_1, ..., v_k)) = s(s(...s(z, v_1)..., v_(k-1)), v_k); with all
    blocks zero this returns z, and with only the first block nonzero it
    reproduces the base spray.
    """
    if k < 1:
        raise ValueError(f"iteration count must be >= 1, got {k}")
    m = spray.fiber_dim

    def eval_many(points, vs):
        cur = points
        for i in range(k):
            cur = spray.eval_many(cur, vs[:, i * m : (i + 1) * m])
        return cur

    return Spray(
        kind="iterated",
        base=spray.base,
        fiber_dim=k * m,
        required_rank=spray.required_rank,
        eval_many=eval_many,
        vertical_frame=spray.vertical_frame,
        x_dim=spray.x_dim,
        params={"k": k, "inner": spray.descriptor()},
    )


def constant_spray(spec: VarietySpec, fiber_dim: Optional[int] = None) -> Spray:
    """Degenerate test fixture: s(y, v) = y.  Satisfies the axioms, never dominates."""
    fd = spec.dim if fiber_dim is None else fiber_dim

    return Spray(
        kind="constant",
        base=spec,
        fiber_dim=fd,
        required_rank=spec.dim,
        eval_many=lambda points, vs: points.copy(),
        vertical_frame=lambda pts: np.array(
            [variety_tangent_frame(p, spec) for p in np.asarray(pts, float)]
        ),
        params={"fiber_dim": fd},
    )


# ---------------------------------------------------------------------------
# Axiom and dominance verification
# ---------------------------------------------------------------------------


@dataclass
class SprayAxiomReport:
    kind: str
    base: str
    n_samples: int
    seed: int
    tol: float
    fiber_radius: float
    zero_section_max: float
    membership_max: float
    fiber_block_max: float
    max_violation: float
    passed: bool
    per_sample: list


def verify_spray_axioms(
    spray: Spray,
    n_samples: int = 1000,
    seed: int = 0,
    tol: float = 1e-10,
    fiber_radius: float = 10.0,
) -> SprayAxiomReport:
    """Check s(y, 0) = y and target closure on seeded samples; report, never raise."""
    points = sample_variety(spray.base, n_samples, seed)
    at_zero = spray.eval_many(points, np.zeros((n_samples, spray.fiber_dim)))
    zero_dev = np.max(np.abs(at_zero - points), axis=1)
    vs = sample_fiber(spray.fiber_dim, n_samples, rng(seed + 1), fiber_radius)
    out = spray.eval_many(points, vs)
    member = membership_residual_many(out, spray.base)
    if spray.x_dim > 0:
        fiber_dev = np.max(np.abs(out[:, : spray.x_dim] - points[:, : spray.x_dim]), axis=1)
    else:
        fiber_dev = np.zeros(n_samples)
    per_sample = np.maximum(np.maximum(zero_dev, member), fiber_dev)
    max_violation = float(np.max(per_sample))
    return SprayAxiomReport(
        kind=spray.kind,
        base=spray.base.label(),
        n_samples=n_samples,
        seed=seed,
        tol=tol,
        fiber_radius=fiber_radius,
        zero_section_max=float(np.max(zero_dev)),
        membership_max=float(np.max(member)),
        fiber_block_max=float(np.max(fiber_dev)),
        max_violation=max_violation,
        passed=bool(max_violation <= tol),
        per_sample=[float(x) for x in per_sample],
    )


@dataclass
class DominanceReport:
    kind: str
    base: str
    n_samples: int
    seed: int
    fd_step: float
    rank_tol: float
    required_rank: int
    min_rank: int
    max_rank: int
    passed: bool
    ranks: list


def verify_dominating(
    spray: Spray,
    n_samples: int = 500,
    seed: int = 0,
    fd_step: float = 1e-5,
    rank_tol: float = 1e-6,
) -> DominanceReport:
    """Numerical rank of the fiber derivative at the zero section, per sample.

    Central finite differences in the fiber argument, rows projected onto
    the tangent space of the base (the vertical space for submersion
    sprays), rank from singular values above rank_tol times the largest.
    """
    points = sample_variety(spray.base, n_samples, seed)
    steps = fd_step * (1.0 + np.linalg.norm(points, axis=1))
    cols = []
    for i in range(spray.fiber_dim):
        v = np.zeros((n_samples, spray.fiber_dim))
        v[:, i] = steps
        plus = spray.eval_many(points, v)
        v[:, i] = -steps
        minus = spray.eval_many(points, v)
        cols.append((plus - minus) / (2.0 * steps[:, None]))
    jac = np.stack(cols, axis=2)  # (N, ambient, fiber)
    frames = spray.vertical_frame(points)  # (N, r, ambient)
    proj = np.einsum("nra,naf->nrf", frames, jac)
    sing = np.linalg.svd(proj, compute_uv=False)
    top = sing[:, 0]
    ranks = np.where(
        top > 0, np.sum(sing >= rank_tol * np.maximum(top, 1e-300)[:, None], axis=1), 0
    )
    passed = bool(np.all(ranks == spray.required_rank))
    return DominanceReport(
        kind=spray.kind,
        base=spray.base.label(),
        n_samples=n_samples,
        seed=seed,
        fd_step=fd_step,
        rank_tol=rank_tol,
        required_rank=spray.required_rank,
        min_rank=int(np.min(ranks)),
        max_rank=int(np.max(ranks)),
        passed=passed,
        ranks=[int(r) for r in ranks],
    )


# ---------------------------------------------------------------------------
# Local inversion near the zero section
# ---------------------------------------------------------------------------


def _newton_inverse(spray: Spray, y: np.ndarray, q: np.ndarray, cfg: NewtonConfig) -> np.ndarray:
    v = np.zeros(spray.fiber_dim)
    resid = spray.eval(y, v) - q
    rn = float(np.linalg.norm(resid))
    for _ in range(cfg.max_iter):
        if rn <= cfg.tol:
            return v
        h = cfg.fd_step * (1.0 + float(np.linalg.norm(v)))
        jac = np.empty((y.shape[0], spray.fiber_dim))
        for i in range(spray.fiber_dim):
            e = np.zeros(spray.fiber_dim)
            e[i] = h
            jac[:, i] = (spray.eval(y, v + e) - spray.eval(y, v - e)) / (2.0 * h)
        # rcond cuts the finite-difference noise directions of a
        # rank-deficient fiber Jacobian (fiber_dim can exceed dim Y).
        delta = np.linalg.lstsq(jac, -resid, rcond=1e-6)[0]
        step = 1.0
        while True:
            v_new = v + step * delta
            r_new = spray.eval(y, v_new) - q
            rn_new = float(np.linalg.norm(r_new))
            if rn_new < rn:
                break
            step *= 0.5
            if step < 1.0 / 1024.0:
                raise SprayInversionError("damped Gauss-Newton stalled")
        if float(np.linalg.norm(v_new)) > cfg.max_fiber_norm:
            raise SprayInversionError("iterate left the local inversion neighborhood")
        v, resid, rn = v_new, r_new, rn_new
    if rn <= cfg.tol:
        return v
    raise SprayInversionError(f"no convergence after {cfg.max_iter} iterations (residual {rn:.3e})")


def spray_local_inverse(
    spray: Spray, y: np.ndarray, q: np.ndarray, cfg: Optional[NewtonConfig] = None
) -> np.ndarray:
    """Fiber vector xi with s(y, xi) = q, for q near the image of the zero section.

    Uses the attached exact inverse when the spray has one, otherwise a
    damped Gauss-Newton iteration from xi = 0.  Raises SprayInversionError
    when q is out of reach (the caller is expected to refine its homotopy
    partition on that signal).
    """
    cfg = cfg or NewtonConfig()
    y = np.asarray(y, dtype=float)
    q = np.asarray(q, dtype=float)
    if spray.inverse_many is not None:
        v = spray.inverse(y, q)
        if float(np.linalg.norm(v)) > cfg.max_fiber_norm:
            raise SprayInversionError(
                "exact inverse lies outside the local neighborhood "
                f"(|v| = {float(np.linalg.norm(v)):.3e})"
            )
        resid = float(np.linalg.norm(spray.eval(y, v) - q))
        if resid > 1e-8:
            raise SprayInversionError(f"exact inverse failed to verify (residual {resid:.3e})")
        return v
    return _newton_inverse(spray, y, q, cfg)


def solve_fiber_many(
    spray: Spray, points: np.ndarray, targets: np.ndarray, cfg: Optional[NewtonConfig] = None
) -> np.ndarray:
    """Batched :func:`spray_local_inverse` (vectorized when an exact inverse exists)."""
    cfg = cfg or NewtonConfig()
    points = np.asarray(points, dtype=float)
    targets = np.asarray(targets, dtype=float)
    if spray.inverse_many is not None:
        vs = spray.inverse_many(points, targets)
        norms = np.linalg.norm(vs, axis=1)
        if np.max(norms) > cfg.max_fiber_norm:
            raise SprayInversionError(
                f"exact inverse outside the local neighborhood (max |v| = {np.max(norms):.3e})"
            )
        resid = np.max(np.abs(spray.eval_many(points, vs) - targets))
        if resid > 1e-8:
            raise SprayInversionError(f"exact inverse failed to verify (residual {resid:.3e})")
        return vs
    out = np.empty((points.shape[0], spray.fiber_dim))
    for i in range(points.shape[0]):
        out[i] = _newton_inverse(spray, points[i], targets[i], cfg)
    return out


def probe_injectivity_radius(
    spray: Spray,
    seed: int = 0,
    radii: tuple = (0.5, 1.0, 2.0, 3.0, 4.0, 6.0),
    n_samples: int = 64,
    tol: float = 1e-9,
) -> float:
    """Largest probed fiber radius at which inverse(eval(y, v)) recovers v.

    Returns 0.0 when no probed radius round-trips (or the spray has no
    inverse).  This is an empirical stand-in for an injectivity bound the
    construction itself does not provide.
    """
    if spray.inverse_many is None:
        return 0.0
    points = sample_variety(spray.base, n_samples, seed)
    best = 0.0
    for radius in radii:
        vs = sample_fiber(spray.fiber_dim, n_samples, rng(seed + 17), radius)
        if spray.kind == "stereographic" and spray.params.get("fiber") == "ambient":
            # Only the tangential representative is recoverable.
            vs = vs - np.einsum("ni,ni->n", vs, points)[:, None] * points
        try:
            back = spray.inverse_many(points, spray.eval_many(points, vs))
        except SprayInversionError:
            break
        if np.max(np.abs(back - vs)) > tol:
            break
        best = radius
    return best
