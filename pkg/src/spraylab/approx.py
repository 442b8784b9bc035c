"""Regular-approximation pipeline: track a homotopy through a spray, fit the
terminal fiber vectors by a polynomial, and assemble an exact map into the
target.

The assembled map g(x) = s(F0(x), beta(x)) lands in the target variety
exactly (up to floating point) whatever the fitting error, because the spray
closes over its base; beta only controls how close g is to the input map.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .geometry import VarietySpec, membership_residual_many, sphere_tangent_basis_many
from .sampling import sphere_quasi_uniform
from .serialize import decimal_string, variety_to_json
from .sprays import (
    NewtonConfig,
    Spray,
    SprayInversionError,
    iterated_spray,
    product_submersion_spray,
    solve_fiber_many,
)


class HomotopyTooWildError(RuntimeError):
    """The adaptive partition exceeded its interval budget."""


class DegreeExhaustedError(RuntimeError):
    """Polynomial degree escalation hit its cap before meeting the residual target."""

    def __init__(self, message: str, best: "PolynomialMapSpec"):
        super().__init__(message)
        self.best = best


# ---------------------------------------------------------------------------
# Homotopies
# ---------------------------------------------------------------------------


@dataclass
class Homotopy:
    """A homotopy F(x, t) on domain x [0, 1] into the target variety.

    ``f0_many`` is the exact rational map at t = 0 and must agree with
    F(., 0) pointwise; ``eval_many(points, t)`` evaluates at a single
    parameter value for a batch of domain points.
    """

    domain: VarietySpec
    target: VarietySpec
    eval_many: Callable
    f0_many: Callable
    f0_descriptor: dict = field(default_factory=dict)

    def check(self, points: np.ndarray, tol_member: float = 1e-10, tol_f0: float = 1e-12):
        """Validate the homotopy invariants on sample points; raise on failure."""
        dev = float(np.max(np.abs(self.eval_many(points, 0.0) - self.f0_many(points))))
        if dev > tol_f0:
            raise ValueError(f"F(., 0) deviates from the exact base map by {dev:.3e}")
        for t in (0.0, 0.25, 0.5, 0.75, 1.0):
            resid = float(np.max(membership_residual_many(self.eval_many(points, t), self.target)))
            if resid > tol_member:
                raise ValueError(f"homotopy leaves the target at t = {t} (residual {resid:.3e})")


# ---------------------------------------------------------------------------
# Tracking the fiber transport along a homotopy
# ---------------------------------------------------------------------------


@dataclass
class TrackConfig:
    tol: float = 1e-10
    max_intervals: int = 64
    newton: NewtonConfig = field(default_factory=NewtonConfig)


@dataclass
class TrackResult:
    eta: np.ndarray
    partition: list
    node_residuals: list
    final_residual: float
    spray: Spray  # the iterated spray with one block per interval
    product_spray: Spray


def track_eta(
    homotopy: Homotopy, spray_y: Spray, grid: np.ndarray, cfg: Optional[TrackConfig] = None
) -> TrackResult:
    """Chain per-interval fiber vectors so the iterated spray reproduces F(., 1).

    Starts from the single interval [0, 1] and bisects any interval on which
    the spray inversion fails, so each step stays inside the local inversion
    neighborhood of the zero section.  The returned eta stacks the interval
    solutions in order; feeding it to the iterated spray from (x, F0(x))
    lands on (x, F(x, 1)) within cfg.tol.
    """
    cfg = cfg or TrackConfig()
    grid = np.asarray(grid, dtype=float)
    prod = product_submersion_spray(homotopy.domain, spray_y)
    base = np.hstack([grid, homotopy.f0_many(grid)])

    def section(t: float) -> np.ndarray:
        return np.hstack([grid, homotopy.eval_many(grid, t)])

    partition = [0.0, 1.0]
    while True:
        if len(partition) - 1 > cfg.max_intervals:
            raise HomotopyTooWildError(
                f"partition needs more than {cfg.max_intervals} intervals"
            )
        cur = base.copy()
        blocks, node_residuals = [], []
        failed_at = None
        for i in range(len(partition) - 1):
            target = section(partition[i + 1])
            try:
                vs = solve_fiber_many(prod, cur, target, cfg.newton)
            except SprayInversionError:
                failed_at = i
                break
            cur = prod.eval_many(cur, vs)
            node_res = float(np.max(np.abs(cur - target)))
            if node_res > cfg.tol:
                failed_at = i
                break
            blocks.append(vs)
            node_residuals.append(node_res)
        if failed_at is None:
            break
        mid = 0.5 * (partition[failed_at] + partition[failed_at + 1])
        partition.insert(failed_at + 1, mid)

    eta = np.hstack(blocks)
    spray = iterated_spray(prod, len(partition) - 1)
    final = float(np.max(np.abs(spray.eval_many(base, eta) - section(1.0))))
    return TrackResult(
        eta=eta,
        partition=partition,
        node_residuals=node_residuals,
        final_residual=final,
        spray=spray,
        product_spray=prod,
    )


# ---------------------------------------------------------------------------
# Polynomial fitting
# ---------------------------------------------------------------------------


def monomial_exponents(n_vars: int, degree: int) -> list:
    """All exponent tuples of total degree <= degree, sorted by (degree, lex)."""
    out = []
    for total in range(degree + 1):
        out.extend(
            sorted(
                e
                for e in itertools.product(range(total + 1), repeat=n_vars)
                if sum(e) == total
            )
        )
    return out


def _vandermonde(points: np.ndarray, exponents: list) -> np.ndarray:
    cols = [np.prod(points**np.asarray(e, dtype=float), axis=1) for e in exponents]
    return np.column_stack(cols)


@dataclass
class PolynomialMapSpec:
    """Dense polynomial map in ambient coordinates, restricted to the variety.

    Coefficients are stored per output dimension over the canonical monomial
    basis of total degree <= degree (see :func:`monomial_exponents`).
    """

    input_dim: int
    output_dim: int
    degree: int
    coefficients: np.ndarray  # (n_basis, output_dim)
    fit_rms: float
    val_max: float
    fit_rms_curve: list
    val_max_curve: list
    achieved_target: bool

    def eval_many(self, points: np.ndarray) -> np.ndarray:
        exps = monomial_exponents(self.input_dim, self.degree)
        return _vandermonde(np.asarray(points, dtype=float), exps) @ self.coefficients

    def to_jsonable(self) -> dict:
        return {
            "input_dim": self.input_dim,
            "output_dim": self.output_dim,
            "degree": self.degree,
            "coefficients": [[decimal_string(c) for c in row] for row in self.coefficients],
            "fit_rms": self.fit_rms,
            "val_max": self.val_max,
            "fit_rms_curve": self.fit_rms_curve,
            "val_max_curve": self.val_max_curve,
            "achieved_target": self.achieved_target,
        }


def fit_polynomial(
    points: np.ndarray,
    values: np.ndarray,
    target_resid: float,
    d_max: int = 20,
    ridge: float = 1e-12,
) -> PolynomialMapSpec:
    """Least-squares polynomial fit with degree escalation and held-out validation.

    Even-indexed samples are fitted, odd-indexed ones validate; the degree
    escalates until the held-out max residual meets ``target_resid``.  The
    recorded fit residual (rms over the fitted half) is nonincreasing in the
    degree because the monomial bases are nested.  Raises
    DegreeExhaustedError carrying the best fit when the cap is reached.
    """
    points = np.asarray(points, dtype=float)
    values = np.asarray(values, dtype=float)
    fit_pts, fit_vals = points[0::2], values[0::2]
    val_pts, val_vals = points[1::2], values[1::2]
    best = None
    fit_curve, val_curve = [], []
    for degree in range(1, d_max + 1):
        exps = monomial_exponents(points.shape[1], degree)
        if len(exps) > fit_pts.shape[0]:
            break  # not enough samples to determine this degree
        vmat = _vandermonde(fit_pts, exps)
        coef, _, rank, _ = np.linalg.lstsq(vmat, fit_vals, rcond=None)
        if rank < len(exps):
            gram = vmat.T @ vmat
            gram += ridge * np.trace(gram) / len(exps) * np.eye(len(exps))
            coef = np.linalg.solve(gram, vmat.T @ fit_vals)
        fit_resid = vmat @ coef - fit_vals
        fit_rms = float(np.sqrt(np.mean(np.sum(fit_resid**2, axis=1))))
        val_resid = _vandermonde(val_pts, exps) @ coef - val_vals
        val_max = float(np.max(np.linalg.norm(val_resid, axis=1))) if val_pts.size else 0.0
        fit_curve.append(fit_rms)
        val_curve.append(val_max)
        spec = PolynomialMapSpec(
            input_dim=points.shape[1],
            output_dim=values.shape[1],
            degree=degree,
            coefficients=coef,
            fit_rms=fit_rms,
            val_max=val_max,
            fit_rms_curve=list(fit_curve),
            val_max_curve=list(val_curve),
            achieved_target=val_max <= target_resid,
        )
        if best is None or spec.val_max < best.val_max:
            best = spec
        if spec.achieved_target:
            return spec
    if best is None:
        raise ValueError("not enough samples to fit even degree 1")
    best.fit_rms_curve = fit_curve
    best.val_max_curve = val_curve
    raise DegreeExhaustedError(
        f"degree cap {d_max} reached with held-out residual {best.val_max:.3e} "
        f"(target {target_resid:.3e})",
        best,
    )


# ---------------------------------------------------------------------------
# Assembly and error measurement
# ---------------------------------------------------------------------------


@dataclass
class RegularApproximation:
    """The assembled approximation g(x) = s(F0(x), beta(x)) plus diagnostics."""

    spray: Spray
    homotopy: Homotopy
    beta: PolynomialMapSpec
    partition: list
    status: str  # "ok" or "degree_exhausted"
    tracking_residual: float
    c0: Optional[float] = None
    c1: Optional[float] = None
    membership_max: Optional[float] = None
    lipschitz: Optional[float] = None
    beta_vs_eta_max: Optional[float] = None
    chain_bound: Optional[float] = None
    chain_ok: Optional[bool] = None
    config: dict = field(default_factory=dict)

    def eval_many(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        base = np.hstack([points, self.homotopy.f0_many(points)])
        out = self.spray.eval_many(base, self.beta.eval_many(points))
        return out[:, self.homotopy.domain.ambient_dim :]

    def to_jsonable(self) -> dict:
        return {
            "spray": self.spray.descriptor(),
            "f0": self.homotopy.f0_descriptor,
            "domain": variety_to_json(self.homotopy.domain),
            "target": variety_to_json(self.homotopy.target),
            "beta": self.beta.to_jsonable(),
            "partition": self.partition,
            "status": self.status,
            "errors": {
                "c0": self.c0,
                "c1": self.c1,
                "membership_max": self.membership_max,
                "tracking_residual": self.tracking_residual,
            },
            "residual_chain": {
                "lipschitz": self.lipschitz,
                "beta_vs_eta_max": self.beta_vs_eta_max,
                "chain_bound": self.chain_bound,
                "chain_ok": self.chain_ok,
            },
            "config": self.config,
        }


def assemble_regular_map(
    homotopy: Homotopy, track: TrackResult, beta: PolynomialMapSpec, status: str = "ok"
) -> RegularApproximation:
    """Wrap the spray, the exact base map, and the fitted polynomial into an evaluator."""
    if beta.input_dim != homotopy.domain.ambient_dim:
        raise ValueError("polynomial input dimension does not match the domain")
    if beta.output_dim != track.spray.fiber_dim:
        raise ValueError("polynomial output dimension does not match the spray fiber")
    return RegularApproximation(
        spray=track.spray,
        homotopy=homotopy,
        beta=beta,
        partition=track.partition,
        status=status,
        tracking_residual=track.final_residual,
    )


def approximation_error(
    g_many: Callable,
    f_many: Callable,
    grid: np.ndarray,
    fd_step: float = 1e-5,
) -> dict:
    """Sup discrepancy of values (c0) and of finite-difference tangent maps (c1).

    The c1 comparison differentiates both maps along the same deterministic
    tangent frame directions of the (sphere) domain, so it measures the
    discrepancy of the tangent maps truncated at first order.
    """
    grid = np.asarray(grid, dtype=float)
    gv, fv = g_many(grid), f_many(grid)
    c0 = float(np.max(np.linalg.norm(gv - fv, axis=1)))
    frames = sphere_tangent_basis_many(grid)
    c1 = 0.0
    for j in range(frames.shape[1]):
        t = frames[:, j, :]
        plus = grid + fd_step * t
        plus /= np.linalg.norm(plus, axis=1, keepdims=True)
        minus = grid - fd_step * t
        minus /= np.linalg.norm(minus, axis=1, keepdims=True)
        dg = (g_many(plus) - g_many(minus)) / (2.0 * fd_step)
        df = (f_many(plus) - f_many(minus)) / (2.0 * fd_step)
        c1 = max(c1, float(np.max(np.linalg.norm(dg - df, axis=1))))
    return {"c0": c0, "c1": c1}


# ---------------------------------------------------------------------------
# End-to-end pipeline
# ---------------------------------------------------------------------------


@dataclass
class ApproxConfig:
    target_c0: float = 1e-3
    d_max: int = 20
    grid_size: Optional[int] = None
    seed: int = 0
    fit_margin: float = 2.0
    track: TrackConfig = field(default_factory=TrackConfig)
    fd_step: float = 1e-5


def _spray_fiber_lipschitz(track: TrackResult, base: np.ndarray, step: float = 1e-5) -> float:
    """Largest finite-difference gain of the iterated spray in its fiber argument."""
    spray = track.spray
    idx = np.arange(0, base.shape[0], max(1, base.shape[0] // 128))
    pts, eta = base[idx], track.eta[idx]
    lip = 0.0
    for j in range(spray.fiber_dim):
        e = np.zeros(spray.fiber_dim)
        e[j] = step
        diff = spray.eval_many(pts, eta + e) - spray.eval_many(pts, eta - e)
        lip = max(lip, float(np.max(np.linalg.norm(diff, axis=1))) / (2.0 * step))
    return lip


def approximate(
    f_many: Callable,
    homotopy: Homotopy,
    spray_y: Spray,
    cfg: Optional[ApproxConfig] = None,
) -> RegularApproximation:
    """Run tracking, fitting, and assembly; measure errors against ``f_many``.

    Returns a RegularApproximation whose status is "ok" when the fit met its
    residual target and "degree_exhausted" otherwise (carrying the best
    effort).  The logged residual chain records the empirical inequality
    c0 <= lipschitz * max|beta - eta| + tracking residual on the grid.
    """
    cfg = cfg or ApproxConfig()
    domain = homotopy.domain
    if domain.kind != "sphere":
        raise ValueError("pipeline grids are implemented for sphere domains")
    grid_size = cfg.grid_size or (1 << 10 if domain.n == 1 else 1 << 12)
    grid = sphere_quasi_uniform(grid_size, domain.n)

    dev = float(np.max(np.abs(homotopy.eval_many(grid, 1.0) - f_many(grid))))
    if dev > 1e-10:
        raise ValueError(f"homotopy endpoint deviates from the input map by {dev:.3e}")

    track = track_eta(homotopy, spray_y, grid, cfg.track)
    base = np.hstack([grid, homotopy.f0_many(grid)])
    lip = _spray_fiber_lipschitz(track, base)
    target_resid = max(
        (cfg.target_c0 - track.final_residual) / (cfg.fit_margin * max(lip, 1e-12)), 1e-15
    )

    status = "ok"
    try:
        beta = fit_polynomial(grid, track.eta, target_resid, d_max=cfg.d_max)
    except DegreeExhaustedError as exc:
        beta = exc.best
        status = "degree_exhausted"

    approx = assemble_regular_map(homotopy, track, beta, status=status)
    errors = approximation_error(approx.eval_many, f_many, grid, cfg.fd_step)
    approx.c0 = errors["c0"]
    approx.c1 = errors["c1"]
    approx.membership_max = float(
        np.max(membership_residual_many(approx.eval_many(grid), homotopy.target))
    )
    beta_dev = float(np.max(np.linalg.norm(beta.eval_many(grid) - track.eta, axis=1)))
    approx.lipschitz = lip
    approx.beta_vs_eta_max = beta_dev
    approx.chain_bound = lip * beta_dev + track.final_residual
    # The chain bound is first order; allow quadratic slack before flagging.
    approx.chain_ok = bool(approx.c0 <= approx.chain_bound * 1.5 + 1e-12)
    approx.config = {
        "target_c0": cfg.target_c0,
        "d_max": cfg.d_max,
        "grid_size": grid_size,
        "seed": cfg.seed,
        "fit_margin": cfg.fit_margin,
        "fit_target_resid": target_resid,
    }
    if status == "ok" and approx.c0 > cfg.target_c0:
        # Fit met its proxy target but the measured error did not; report
        # honestly rather than silently accepting.
        approx.status = "target_missed"
    return approx
