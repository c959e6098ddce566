"""Least-squares fits of safe rational units to a target activation.

The fit minimises ``sum_x (G(x) - target(x))**2`` over the numerator and
denominator coefficients of the safe form.  Starting points come from a
reweighted linearised problem (numerator minus target times denominator,
with the denominator magnitudes constrained non-negative), from a plain
numerator-only fit, and from seeded perturbations of those; each start is
refined with Levenberg-Marquardt on the true residual and the best result
is kept.

Zero-centering constraints are handled by eliminating numerator
coefficients, so constrained results satisfy them by construction.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .activations import OpauParams, PauParams, activation_map, baseline_forward, BASELINES
from .bases import PolyBasis, values_at_zero
from .kernels import MONO, backend

__all__ = [
    "ZeroCenter",
    "FitTask",
    "FitResult",
    "sample_target",
    "target_function",
    "fit_opau",
    "fit_pau",
    "zero_center_residual",
    "published_params",
    "fit_errors",
    "levenberg_marquardt",
    "LMResult",
]

TARGETS = BASELINES + ("constant",)


def target_function(kind: str, alpha: float | None = None):
    """Vectorised target; ``alpha`` is the slope/scale, or the value for ``constant``."""
    if kind == "constant":
        value = 1.0 if alpha is None else float(alpha)
        return lambda x: np.full(np.shape(x), value)
    if kind not in BASELINES:
        raise ValueError(f"unknown target {kind!r}; choose from {', '.join(TARGETS)}")
    return lambda x: np.asarray(baseline_forward(kind, x, alpha), dtype=np.float64)


def sample_target(kind: str, lo: float, hi: float, count: int, alpha: float | None = None):
    """Uniform samples of the target on ``[lo, hi]`` including both endpoints."""
    if not (math.isfinite(lo) and math.isfinite(hi)) or not lo < hi:
        raise ValueError(f"invalid sampling interval [{lo}, {hi}]")
    if count < 2:
        raise ValueError(f"need at least 2 samples, got {count}")
    x = np.linspace(lo, hi, int(count))
    return x, target_function(kind, alpha)(x)


@dataclass(frozen=True)
class ZeroCenter:
    """Zero-centering constraint on the numerator, ``sum_i c_i f_i(0) = 0``.

    ``case1`` zeroes every coefficient whose basis polynomial is nonzero at
    the origin.  ``case2`` zeroes coefficient ``index`` and eliminates the
    next such coefficient from the constraint.  ``case3`` eliminates
    coefficient ``index`` from the constraint.  ``index=None`` picks the
    lowest eligible coefficient.
    """

    case: str = "none"
    index: int | None = None

    def __post_init__(self):
        if self.case not in ("none", "case1", "case2", "case3"):
            raise ValueError(f"unknown zero-centering case {self.case!r}")

    @classmethod
    def parse(cls, text: str | None) -> "ZeroCenter":
        """``"case3"``, ``"case3:c2"`` or ``"case2:4"``."""
        if text is None or text.lower() in ("", "none"):
            return cls()
        case, _, idx = text.lower().partition(":")
        return cls(case, int(idx.lstrip("c")) if idx else None)

    def parameterization(self, zero_vals: np.ndarray):
        """Return ``(M, elim)``: ``c = M @ free`` then ``c[e] = -(z . c) / z[e]``.

        ``elim`` is the index solved from the constraint, or None.
        """
        k1 = zero_vals.size
        support = [i for i in range(k1) if zero_vals[i] != 0.0]
        zeroed: list[int] = []
        elim = None
        if self.case == "case1":
            zeroed = support
        elif self.case in ("case2", "case3"):
            idx = support[0] if self.index is None else self.index
            if idx not in support:
                raise ValueError(
                    f"coefficient c_{idx} does not enter the zero-centering constraint; "
                    f"eligible: {['c_%d' % i for i in support]}"
                )
            if self.case == "case2":
                zeroed = [idx]
                rest = [i for i in support if i != idx]
                elim = rest[0] if rest else None
            else:
                elim = idx
        fixed = set(zeroed) | ({elim} if elim is not None else set())
        free = [i for i in range(k1) if i not in fixed]
        m = np.zeros((k1, len(free)))
        for col, i in enumerate(free):
            m[i, col] = 1.0
        return m, elim, free

    def apply(self, zero_vals: np.ndarray, c: np.ndarray, elim: int | None) -> np.ndarray:
        if elim is None:
            return c
        c = c.copy()
        c[elim] = 0.0
        c[elim] = -float(np.dot(zero_vals, c)) / zero_vals[elim]
        return c


@dataclass(frozen=True)
class FitTask:
    basis: PolyBasis | str = PolyBasis.HP1
    k: int = 5
    l: int = 4
    target: str = "leaky_relu"
    alpha: float | None = 0.01
    lo: float = -3.0
    hi: float = 3.0
    samples: int = 1000
    constraint: ZeroCenter = field(default_factory=ZeroCenter)
    max_iter: int = 500
    tol: float = 1e-12
    seed: int = 0
    restarts: int = 4
    d_bound: float = 10.0

    def validate(self):
        if self.k < 0 or self.l < 0:
            raise ValueError("degrees must be non-negative")
        if not self.lo < self.hi:
            raise ValueError(f"degenerate grid [{self.lo}, {self.hi}]")
        if not self.d_bound > 0:
            raise ValueError("d_bound must be positive")
        if self.samples < self.k + self.l + 1:
            raise ValueError(f"need at least k + l + 1 = {self.k + self.l + 1} samples")


@dataclass
class FitResult:
    params: OpauParams | PauParams
    rmse: float
    max_abs_err: float
    iterations: int
    converged: bool
    loss_history: list[float] = field(default_factory=list, repr=False)

    def diagnostics(self) -> dict:
        return {
            "rmse": self.rmse,
            "max_abs_err": self.max_abs_err,
            "iterations": self.iterations,
            "converged": self.converged,
        }

    def to_dict(self) -> dict:
        doc = self.params.to_dict()
        doc["diagnostics"] = self.diagnostics()
        return doc


# --- Levenberg-Marquardt ----------------------------------------------------


@dataclass
class LMResult:
    x: np.ndarray
    cost: float
    iterations: int
    converged: bool
    history: list[float]


def levenberg_marquardt(fun, x0, max_iter=500, tol=1e-12, lam0=1e-3, project=None) -> LMResult:
    """Minimise ``0.5 * ||r(x)||^2`` where ``fun(x) -> (r, J)``.

    Marquardt scaling of the damping term.  Steps that do not lower the
    cost are rejected, so ``history`` (cost after each accepted step) is
    non-increasing.  When the damped normal equations cannot be solved a
    backtracking gradient step is tried instead.  ``project`` maps a trial
    point back into a feasible box before it is evaluated.
    """
    x = np.array(x0, dtype=np.float64)
    if project is not None:
        x = project(x)
    r, jac = fun(x)
    cost = 0.5 * float(r @ r)
    history = [cost]
    lam = lam0
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        jtj = jac.T @ jac
        grad = jac.T @ r
        if np.max(np.abs(grad), initial=0.0) <= tol * max(1.0, cost) or cost == 0.0:
            converged = True
            break
        diag = np.maximum(np.diag(jtj), 1e-12)
        accepted = False
        while lam < 1e16:
            try:
                step = np.linalg.solve(jtj + lam * np.diag(diag), -grad)
            except np.linalg.LinAlgError:
                step = None
            if step is None or not np.all(np.isfinite(step)):
                step = _gradient_fallback(fun, x, grad, cost)
                if step is None:
                    break
            x_new = x + step
            if project is not None:
                x_new = project(x_new)
                step = x_new - x
            r_new, jac_new = fun(x_new)
            cost_new = 0.5 * float(r_new @ r_new)
            if np.isfinite(cost_new) and cost_new < cost:
                rel = (cost - cost_new) / max(cost, 1e-300)
                x, r, jac, cost = x_new, r_new, jac_new, cost_new
                history.append(cost)
                lam = max(lam / 3.0, 1e-15)
                accepted = True
                if rel < tol or np.linalg.norm(step) <= tol * (np.linalg.norm(x) + tol):
                    converged = True
                break
            lam *= 4.0
        if converged:
            break
        if not accepted:
            # no descent direction left at machine precision
            converged = True
            break
    return LMResult(x, cost, it, converged, history)


def _gradient_fallback(fun, x, grad, cost):
    gnorm2 = float(grad @ grad)
    if gnorm2 == 0.0:
        return None
    t = cost / gnorm2
    for _ in range(60):
        r_try, _ = fun(x - t * grad)
        if 0.5 * float(r_try @ r_try) < cost - 1e-4 * t * gnorm2:
            return -t * grad
        t *= 0.5
    return None


# --- rational fit core ------------------------------------------------------


def _safe_rational_residual(vals, y, k, l, m, zero_vals, elim):
    """Residual/Jacobian closure over ``theta = (free numerator coefs, d)``."""
    num = vals[:, : k + 1]
    hj = np.abs(vals[:, 1 : l + 1])
    nfree = m.shape[1]
    if elim is not None:
        # c = E @ free with c[elim] = -(z . c)/z[elim]; fold into one linear map
        e = m.copy()
        e[elim, :] = -(zero_vals @ m) / zero_vals[elim]
    else:
        e = m

    def fun(theta):
        c = e @ theta[:nfree]
        d = theta[nfree:]
        p = num @ c
        q = 1.0 + hj @ np.abs(d)
        g = p / q
        jc = (num / q[:, None]) @ e
        jd = -np.sign(d)[None, :] * hj * (p / (q * q))[:, None]
        return g - y, np.hstack([jc, jd])

    return fun, e


def _linearized_start(vals, y, k, l, e, d_bound, iters=30):
    """Sanathanan-Koerner iteration on ``P - y Q`` with ``|d| >= 0``."""
    from scipy.optimize import lsq_linear

    num = vals[:, : k + 1] @ e
    hj = np.abs(vals[:, 1 : l + 1])
    nfree = e.shape[1]
    lb = np.r_[np.full(nfree, -np.inf), np.zeros(l)]
    ub = np.r_[np.full(nfree, np.inf), np.full(l, d_bound)]
    w = np.ones_like(y)
    theta = np.zeros(nfree + l)
    for _ in range(iters):
        a = np.hstack([num, -y[:, None] * hj]) * w[:, None]
        sol = lsq_linear(a, y * w, bounds=(lb, ub), method="bvls")
        theta = sol.x
        q = 1.0 + hj @ theta[nfree:]
        w_new = 1.0 / q
        if np.max(np.abs(w_new - w)) < 1e-13:
            break
        w = w_new
    return theta


def _fit_safe_rational(vals, y, k, l, zero_vals, constraint, max_iter, tol, seed, restarts, d_bound):
    m, elim, _ = constraint.parameterization(zero_vals)
    fun, e = _safe_rational_residual(vals, y, k, l, m, zero_vals, elim)
    nfree = m.shape[1]
    rng = np.random.default_rng(seed)

    starts = []
    if nfree + l > 0:
        sk = _linearized_start(vals, y, k, l, e, d_bound)
        starts.append(sk)
        scale = max(np.max(np.abs(sk[nfree:]), initial=0.0), 1e-2)
        nudged = sk.copy()
        zero_d = nudged[nfree:] == 0.0
        nudged[nfree:][zero_d] = 1e-3 * scale * rng.uniform(0.5, 1.0, zero_d.sum())
        starts.append(nudged)
        c_ls = np.linalg.lstsq(vals[:, : k + 1] @ e, y, rcond=None)[0]
        starts.append(np.r_[c_ls, 1e-2 * rng.uniform(0.5, 1.0, l)])
        for _ in range(restarts):
            jitter = nudged.copy()
            jitter[nfree:] *= np.exp(rng.normal(0.0, 0.5, l))
            starts.append(jitter)
    else:
        starts.append(np.zeros(0))

    def project(theta):
        theta = theta.copy()
        np.clip(theta[nfree:], -d_bound, d_bound, out=theta[nfree:])
        return theta

    best = None
    total_iters = 0
    for theta0 in starts:
        res = levenberg_marquardt(fun, theta0, max_iter=max_iter, tol=tol, project=project)
        total_iters += res.iterations
        if best is None or res.cost < best.cost:
            best = res
    c = constraint.apply(zero_vals, e @ best.x[:nfree], elim) if nfree else np.zeros(k + 1)
    d = best.x[nfree:]
    return c, d, best, total_iters


def _errors(pred, y):
    err = pred - y
    return float(np.sqrt(np.mean(err * err))), float(np.max(np.abs(err)))


def fit_opau(task: FitTask) -> FitResult:
    """Fit a safe orthogonal-Padé unit to the task's target on its grid."""
    task.validate()
    basis = PolyBasis.parse(task.basis)
    x, y = sample_target(task.target, task.lo, task.hi, task.samples, task.alpha)
    n = max(task.k, task.l)
    vals, _ = backend.basis_eval(x, basis.code, n)
    zero_vals = values_at_zero(basis, task.k)
    c, d, best, iters = _fit_safe_rational(
        vals, y, task.k, task.l, zero_vals, task.constraint,
        task.max_iter, task.tol, task.seed, task.restarts, task.d_bound,
    )
    params = OpauParams(basis, c, d, safe=True)
    rmse, max_err = _errors(activation_map(params, x), y)
    return FitResult(params, rmse, max_err, iters, best.converged, best.history)


def fit_pau(task: FitTask) -> FitResult:
    """Fit an F3 (term-wise safe) Padé unit in the power basis.

    ``task.basis`` is ignored.  Used to initialise ``pau`` layers.
    """
    task.validate()
    x, y = sample_target(task.target, task.lo, task.hi, task.samples, task.alpha)
    n = max(task.k, task.l)
    vals, _ = backend.basis_eval(x, MONO, n)
    zero_vals = np.zeros(task.k + 1)
    zero_vals[0] = 1.0
    c, d, best, iters = _fit_safe_rational(
        vals, y, task.k, task.l, zero_vals, task.constraint,
        task.max_iter, task.tol, task.seed, task.restarts, task.d_bound,
    )
    params = PauParams(c, d, "F3")
    from .activations import pau_map

    rmse, max_err = _errors(pau_map(params, x), y)
    return FitResult(params, rmse, max_err, iters, best.converged, best.history)


def zero_center_residual(params: OpauParams) -> float:
    """Constant term of the numerator, ``sum_i c_i f_i(0)``; zero iff G(0) = 0."""
    return float(np.dot(values_at_zero(params.basis, params.k), params.c))


def published_params(basis) -> OpauParams:
    """Published Leaky ReLU (alpha=0.01) initialisation for ``basis``; k=5, l=4."""
    basis = PolyBasis.parse(basis)
    text = (
        resources.files("opau").joinpath("data", "published", f"{basis.value.lower()}.json")
        .read_text(encoding="utf-8")
    )
    return OpauParams.from_dict(json.loads(text))


def fit_errors(params: OpauParams, target="leaky_relu", alpha=0.01, lo=-3.0, hi=3.0, samples=1000):
    """``(rmse, max_abs_err)`` of ``params`` against a target on a uniform grid."""
    x, y = sample_target(target, lo, hi, samples, alpha)
    return _errors(activation_map(params, x), y)
