"""Riemannian trust-region solver on St(r, n) x (H^r)^m.

The outer loop follows the usual trust-region template (model decrease,
acceptance ratio, radius update); the subproblem is solved approximately by
the truncated conjugate gradient method of Steihaug and Toint, carried out in
the product metric.
"""

import time
from dataclasses import dataclass, field

import numpy as np

from . import losses
from . import stiefel as st
from .errors import ConstraintViolationError, NumericError
from .product import (
    FactoredEmbedding,
    ProductTangent,
    initialize,
    manifold_dim,
    product_metric,
    product_norm,
    product_project,
    product_retract,
    random_tangent,
)

_EPS = np.finfo(np.float64).eps
_MAX_BAD_STEPS = 10


@dataclass(frozen=True)
class TrConfig:
    """Trust-region settings.

    ``tcg_max_iters=None`` means "dimension of the manifold".
    """

    max_outer_iters: int = 500
    grad_tol: float = 1e-6
    initial_radius: float = 1.0
    max_radius: float = 100.0
    accept_threshold: float = 0.1
    tcg_max_iters: int = None
    tcg_kappa: float = 0.1
    tcg_theta: float = 1.0
    seed: int = 0
    min_radius: float = 1e-14
    rho_regularization: float = 1e3

    def __post_init__(self):
        positive = {
            "max_outer_iters": self.max_outer_iters,
            "grad_tol": self.grad_tol,
            "initial_radius": self.initial_radius,
            "max_radius": self.max_radius,
            "accept_threshold": self.accept_threshold,
            "tcg_kappa": self.tcg_kappa,
            "tcg_theta": self.tcg_theta,
        }
        for name, value in positive.items():
            if not value > 0:
                raise ValueError(f"{name} must be positive, got {value!r}")
        if self.tcg_max_iters is not None and self.tcg_max_iters < 1:
            raise ValueError("tcg_max_iters must be positive")
        if not self.accept_threshold < 0.25:
            raise ValueError("accept_threshold must be below 1/4")
        if self.tcg_theta > 1:
            raise ValueError("tcg_theta must lie in (0, 1]")
        if self.initial_radius > self.max_radius:
            raise ValueError("initial_radius exceeds max_radius")
        if self.seed < 0:
            raise ValueError("seed must be nonnegative")


@dataclass(frozen=True)
class SolveReport:
    iterations: int
    final_loss: float
    final_grad_norm: float
    loss_trace: tuple
    grad_norm_trace: tuple
    accepted_flags: tuple
    stop_reason: str
    wall_time: float = field(compare=False)

    def accepted_losses(self):
        """Loss at the initial point followed by the loss after every accepted step."""
        out = [self.loss_trace[0]]
        out += [f for f, ok in zip(self.loss_trace[1:], self.accepted_flags) if ok]
        return out

    def to_dict(self, include_timing=True):
        return {
            "iterations": self.iterations,
            "final_loss": self.final_loss,
            "final_grad_norm": self.final_grad_norm,
            "stop_reason": self.stop_reason,
            "loss_trace": list(self.loss_trace),
            "grad_norm_trace": list(self.grad_norm_trace),
            "accepted_flags": list(self.accepted_flags),
            "wall_time": self.wall_time if include_timing else None,
        }


class _PointState:
    # Everything the gradient and Hessian need that depends only on the point.
    def __init__(self, kind, y, xbar):
        self.y = y
        self.cache = losses.PointCache(kind, y, xbar)
        self.egrad = losses.euclidean_gradient(kind, y, xbar, cache=self.cache)
        self.grad = product_project(y, ProductTangent(self.egrad.U, _lorentz_flip(self.egrad.Zbar)))
        ug = y.U.T @ self.egrad.U
        self.sym_ug = 0.5 * (ug + ug.T)
        self.weingarten = np.einsum("ij,ij->j", y.Zbar, self.egrad.Zbar)


class Problem:
    """Binds a loss kind and data matrix to the manifold operations the solver needs.

    Point-dependent quantities are computed once per point and reused by every
    Hessian-vector product at that point.
    """

    def __init__(self, kind, xbar):
        self.kind = losses.LossKind.parse(kind)
        self.xbar = np.asarray(xbar, dtype=np.float64)
        self._state = None

    def state(self, y):
        if self._state is None or self._state.y is not y:
            self._state = _PointState(self.kind, y, self.xbar)
        return self._state

    def cost(self, y):
        return losses.loss_value(self.kind, y, self.xbar)

    def egrad(self, y):
        return self.state(y).egrad

    def grad(self, y):
        return self.state(y).grad

    def hess(self, y, xi):
        s = self.state(y)
        ehess = losses.euclidean_hessian_vec(self.kind, y, self.xbar, xi, cache=s.cache)
        return _hessian_from_parts(y, xi, ehess, s.sym_ug, s.weingarten)


def _lorentz_flip(a):
    # Multiply by L = diag(-1, 1, ..., 1) column-wise.
    out = a.copy()
    out[0] = -out[0]
    return out


def riemannian_gradient(kind, y, xbar, egrad=None):
    """Riemannian gradient: project the ambient gradient after converting hyperbolic blocks.

    The Lorentz metric represents the differential ``D f[xi] = g^T xi`` by
    ``L g``, so each hyperbolic block is flipped in its first coordinate before
    the tangent projection.
    """
    if egrad is None:
        egrad = losses.euclidean_gradient(kind, y, xbar)
    return product_project(y, ProductTangent(egrad.U, _lorentz_flip(egrad.Zbar)))


def _hessian_from_parts(y, xi, ehess, sym_ug, weingarten):
    amb_z = ehess.Zbar
    amb_z[0] = -amb_z[0]
    buf = xi.Zbar * weingarten
    amb_z += buf
    # hyperbolic projection in place: amb_z += z <z, amb_z>_L
    inner = np.einsum("ij,ij->j", y.Zbar[1:], amb_z[1:])
    inner -= y.Zbar[0] * amb_z[0]
    np.multiply(y.Zbar, inner, out=buf)
    amb_z += buf
    amb_u = ehess.U - xi.U @ sym_ug
    return ProductTangent(st.project_to_stiefel_tangent(y.U, amb_u), amb_z)


def riemannian_hessian_vec(kind, y, xbar, xi, egrad=None):
    """``Pi_y(D grad f(y)[xi])``, the projected derivative of the gradient field.

    Differentiating ``grad f`` along ``xi`` and dropping the terms that the
    outer projection annihilates gives, per factor,

    * Stiefel: ``Pi(D egrad_U[xi] - xi_U symm(U^T egrad_U))``
    * hyperbolic: ``Pi(L D egrad_z[xi] + xi_z (zbar^T egrad_z))``
    """
    if egrad is None:
        egrad = losses.euclidean_gradient(kind, y, xbar)
    ehess = losses.euclidean_hessian_vec(kind, y, xbar, xi)
    ug = y.U.T @ egrad.U
    weingarten = np.einsum("ij,ij->j", y.Zbar, egrad.Zbar)
    return _hessian_from_parts(y, xi, ehess, 0.5 * (ug + ug.T), weingarten)


def _truncated_cg(problem, y, grad, radius, cfg, max_inner):
    """Steihaug-Toint truncated CG for ``min g(grad, eta) + 0.5 g(H eta, eta)`` within ``radius``.

    Returns ``(eta, H eta, inner_iterations, hit_boundary)``.
    """
    inner = lambda a, b: product_metric(y, a, b)
    eta = ProductTangent.zeros_like(y)
    heta = ProductTangent.zeros_like(y)
    r = grad
    r_r = inner(r, r)
    norm_r0 = np.sqrt(r_r)
    delta = -r
    e_pe = 0.0
    e_pd = 0.0
    d_pd = r_r
    model = 0.0
    radius2 = radius * radius
    j = 0
    for j in range(1, max_inner + 1):
        hdelta = problem.hess(y, delta)
        d_hd = inner(delta, hdelta)
        if not np.isfinite(d_hd):
            break
        alpha = r_r / d_hd if d_hd != 0 else np.inf
        e_pe_new = e_pe + 2.0 * alpha * e_pd + alpha * alpha * d_pd
        if d_hd <= 0 or e_pe_new >= radius2:
            tau = (-e_pd + np.sqrt(max(e_pd * e_pd + d_pd * (radius2 - e_pe), 0.0))) / d_pd
            eta = eta + tau * delta
            heta = heta + tau * hdelta
            return eta, heta, j, True
        new_eta = eta + alpha * delta
        new_heta = heta + alpha * hdelta
        new_model = inner(new_eta, grad) + 0.5 * inner(new_eta, new_heta)
        if new_model >= model:
            return eta, heta, j, False
        eta, heta, model, e_pe = new_eta, new_heta, new_model, e_pe_new
        r = r + alpha * hdelta
        r_old_r_old = r_r
        r_r = inner(r, r)
        norm_r = np.sqrt(max(r_r, 0.0))
        if norm_r <= norm_r0 * min(norm_r0**cfg.tcg_theta, cfg.tcg_kappa):
            return eta, heta, j, False
        beta = r_r / r_old_r_old
        # Re-project so rounding cannot accumulate a normal component over inner iterations.
        delta = product_project(y, beta * delta - r)
        e_pd = beta * (e_pd + alpha * d_pd)
        d_pd = r_r + beta * beta * d_pd
    return eta, heta, j, False


def _check_init(y):
    try:
        y.validate(tol=1e-8)
    except ConstraintViolationError as exc:
        raise ConstraintViolationError(f"invalid initial point: {exc}") from exc


def tr_solve(kind, xbar, r, init=None, cfg=None, labels=None, trace=None):
    """Minimize a factorization loss with the Riemannian trust-region method.

    Parameters
    ----------
    kind : LossKind or str
        Which loss to minimize.
    xbar : ndarray, shape (n + 1, m)
        Hyperboloid embeddings to factor.
    r : int
        Target rank.
    init : ProductPoint, optional
        Starting point; defaults to the SVD warm start.
    cfg : TrConfig, optional
    labels : sequence of str, optional
        Attached to the returned factorization.
    trace : file-like, optional
        Receives one tab-separated line per outer iteration:
        iteration, loss, gradient norm, radius, rho, accepted.

    Returns
    -------
    (FactoredEmbedding, SolveReport)
    """
    cfg = cfg or TrConfig()
    xbar = np.asarray(xbar, dtype=np.float64)
    if init is None:
        init = initialize(xbar, r, "svd-warm", cfg.seed)
    if init.r != r or init.n + 1 != xbar.shape[0] or init.m != xbar.shape[1]:
        raise ConstraintViolationError("initial point does not match the data shape and rank")
    _check_init(init)
    problem = Problem(kind, xbar)
    max_inner = cfg.tcg_max_iters or manifold_dim(init.n, init.m, r)

    start = time.perf_counter()
    y = init
    fy = problem.cost(y)
    grad = problem.grad(y)
    gnorm = product_norm(y, grad)
    if not (np.isfinite(fy) and np.isfinite(gnorm)):
        raise NumericError("non-finite loss or gradient at the initial point", dump=y)

    radius = cfg.initial_radius
    loss_trace = [fy]
    grad_trace = [gnorm]
    accepted = []
    bad_steps = 0
    stop = "max_outer_iters"
    k = 0
    if trace is not None:
        trace.write(f"{0}\t{fy!r}\t{gnorm!r}\t{radius!r}\tnan\t1\n")
    while True:
        if gnorm < cfg.grad_tol:
            stop = "grad_tol"
            break
        if k >= cfg.max_outer_iters:
            break
        if radius < cfg.min_radius:
            stop = "min_radius"
            break
        k += 1
        eta, heta, _, boundary = _truncated_cg(problem, y, grad, radius, cfg, max_inner)
        y_new = product_retract(y, eta)
        f_new = problem.cost(y_new)
        model_decrease = -product_metric(y, grad, eta) - 0.5 * product_metric(y, eta, heta)
        if np.isfinite(f_new):
            bad_steps = 0
            reg = max(1.0, abs(fy)) * _EPS * cfg.rho_regularization
            rho = (fy - f_new + reg) / (model_decrease + reg)
        else:
            bad_steps += 1
            rho = -np.inf
            if bad_steps >= _MAX_BAD_STEPS:
                raise NumericError(
                    f"loss became non-finite in {_MAX_BAD_STEPS} consecutive trial steps",
                    dump={"point": y, "step": eta, "radius": radius},
                )
        ok = bool(model_decrease >= 0 and rho > cfg.accept_threshold and f_new <= fy)
        # A rejected step always shrinks the radius: the regularized rho can sit
        # near 1 while rounding makes f_new exceed fy, and retrying the same
        # radius would repeat the same step forever.
        if rho < 0.25 or not ok:
            radius *= 0.25
        elif rho > 0.75 and boundary:
            radius = min(2.0 * radius, cfg.max_radius)
        if ok:
            y = y_new
            fy = f_new
            grad = problem.grad(y)
            gnorm = product_norm(y, grad)
            if not (np.isfinite(fy) and np.isfinite(gnorm)):
                raise NumericError("non-finite gradient after an accepted step", dump=y)
        loss_trace.append(fy)
        grad_trace.append(gnorm)
        accepted.append(ok)
        if trace is not None:
            trace.write(f"{k}\t{fy!r}\t{gnorm!r}\t{radius!r}\t{rho!r}\t{int(ok)}\n")
    elapsed = time.perf_counter() - start
    report = SolveReport(
        iterations=k,
        final_loss=fy,
        final_grad_norm=gnorm,
        loss_trace=tuple(loss_trace),
        grad_norm_trace=tuple(grad_trace),
        accepted_flags=tuple(accepted),
        stop_reason=stop,
        wall_time=elapsed,
    )
    return FactoredEmbedding.from_point(y, labels), report


def per_iteration_cost_probe(n, m, r, kind, tcg_iters=10, repeats=5, seed=0):
    """Best-of-``repeats`` wall time of one outer iteration at a fixed inner-iteration count.

    One iteration is a loss and gradient evaluation, ``tcg_iters`` Hessian-vector
    products with their metric evaluations, a retraction and a trial loss
    evaluation, which is the work the solver does per step at the inner cap.
    """
    from . import hyperbolic as hb

    rng = np.random.default_rng(seed)
    xbar = hb.lift_to_hyperboloid(rng.standard_normal((n, m)) / np.sqrt(n))
    y = initialize(xbar, r, "random", seed)
    problem = Problem(kind, xbar)
    xi = random_tangent(y, rng)

    def one_iteration():
        problem.cost(y)
        problem._state = None
        g = problem.grad(y)
        d = xi
        for _ in range(tcg_iters):
            hd = problem.hess(y, d)
            product_metric(y, d, hd)
            d = product_project(y, d + 1e-3 * (hd - g))
        problem.cost(product_retract(y, 1e-3 * d))

    one_iteration()
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        one_iteration()
        times.append(time.perf_counter() - t0)
    return float(np.min(times))
