"""Bivariate copula families: evaluation, estimation and AIC/BIC selection.

Conventions used throughout:

* ``hfunc(spec, u, v, "second")`` is dC(u, v)/dv, the conditional CDF of the
  first argument given the second; ``"first"`` is dC(u, v)/du, the
  conditional CDF of the second argument given the first.
* Clayton and Gumbel take rotations 0 and 180 for positive dependence and
  90 and 270 for negative dependence.
* Density-type evaluations clamp their inputs into [CLAMP, 1 - CLAMP].
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, special

from ._bvn import bvn_cdf, bvt_cdf
from .dependence import kendall_tau
from .errors import DataError, NumericError

log = logging.getLogger(__name__)

CLAMP = 1e-10
FAMILIES = ("Independence", "Gaussian", "StudentT", "Clayton", "Frank", "Gumbel")
DEFAULT_CANDIDATES = ("Gaussian", "StudentT", "Clayton", "Frank")
NU_GRID = (2.0, 2.5, 3.0, 4.0, 5.0, 7.0, 10.0, 15.0, 20.0, 30.0, 50.0)
INDEPENDENCE_TAU = 0.02
MIN_FIT_N = 30

_DEBYE_X, _DEBYE_W = np.polynomial.legendre.leggauss(64)


def _clip(x):
    return np.clip(np.asarray(x, dtype=float), CLAMP, 1.0 - CLAMP)


# --------------------------------------------------------------------------
# Base (unrotated) families. Every family here is exchangeable, so the single
# conditional h(u | v) = dC/dv covers both conditioning directions.
# --------------------------------------------------------------------------

class _Independence:
    n_params = 0
    bounds: tuple = ()

    def cdf(self, p, u, v):
        return u * v

    def logpdf(self, p, u, v):
        return np.zeros(np.broadcast(u, v).shape)

    def h(self, p, u, v):
        return np.broadcast_to(u, np.broadcast(u, v).shape).astype(float)

    def hinv(self, p, w, v):
        return np.broadcast_to(w, np.broadcast(w, v).shape).astype(float)

    def tau(self, p):
        return 0.0

    def from_tau(self, tau):
        return ()


class _Gaussian:
    n_params = 1
    bounds = ((-0.9999, 0.9999),)

    def cdf(self, p, u, v):
        return bvn_cdf(special.ndtri(u), special.ndtri(v), p[0])

    def logpdf(self, p, u, v):
        r = p[0]
        x, y = special.ndtri(u), special.ndtri(v)
        s = 1.0 - r * r
        return -0.5 * math.log(s) - (r * r * (x * x + y * y) - 2.0 * r * x * y) / (2.0 * s)

    def h(self, p, u, v):
        r = p[0]
        return special.ndtr((special.ndtri(u) - r * special.ndtri(v)) / math.sqrt(1.0 - r * r))

    def hinv(self, p, w, v):
        r = p[0]
        return special.ndtr(special.ndtri(w) * math.sqrt(1.0 - r * r) + r * special.ndtri(v))

    def tau(self, p):
        return 2.0 / math.pi * math.asin(p[0])

    def from_tau(self, tau):
        return (math.sin(math.pi * tau / 2.0),)


def _t_ppf(nu, u):
    """Student-t quantile through the incomplete beta inverse.

    Several times faster than ``special.stdtrit``; the branch keeps the
    beta argument away from 1 so small quantiles keep their precision.
    """
    u = np.asarray(u, dtype=float)
    p = np.minimum(u, 1.0 - u)
    tail = p < 0.25
    x = np.empty_like(p)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = special.betaincinv(nu / 2.0, 0.5, 2.0 * p[tail])
        x[tail] = np.sqrt(nu * (1.0 / z - 1.0))
        w = special.betaincinv(0.5, nu / 2.0, 1.0 - 2.0 * p[~tail])
        x[~tail] = np.sqrt(nu * w / (1.0 - w))
    return np.where(u < 0.5, -x, x)


class _StudentT:
    n_params = 2
    bounds = ((-0.9999, 0.9999), (2.0, 50.0))

    def cdf(self, p, u, v):
        r, nu = p
        return bvt_cdf(_t_ppf(nu, u), _t_ppf(nu, v), r, nu)

    def logpdf(self, p, u, v):
        r, nu = p
        return self.logpdf_q(r, nu, _t_ppf(nu, u), _t_ppf(nu, v))

    @staticmethod
    def logpdf_q(r, nu, x, y):
        """Log density given the t_nu quantiles x, y of the arguments."""
        s = 1.0 - r * r
        const = (special.gammaln((nu + 2) / 2) + special.gammaln(nu / 2)
                 - 2.0 * special.gammaln((nu + 1) / 2) - 0.5 * math.log(s))
        quad = (x * x + y * y - 2.0 * r * x * y) / (nu * s)
        return (const - (nu + 2) / 2 * np.log1p(quad)
                + (nu + 1) / 2 * (np.log1p(x * x / nu) + np.log1p(y * y / nu)))

    def h(self, p, u, v):
        r, nu = p
        x, y = _t_ppf(nu, u), _t_ppf(nu, v)
        sig = np.sqrt((nu + y * y) * (1.0 - r * r) / (nu + 1))
        return special.stdtr(nu + 1, (x - r * y) / sig)

    def hinv(self, p, w, v):
        r, nu = p
        y = _t_ppf(nu, v)
        sig = np.sqrt((nu + y * y) * (1.0 - r * r) / (nu + 1))
        return special.stdtr(nu, _t_ppf(nu + 1, w) * sig + r * y)

    def tau(self, p):
        return 2.0 / math.pi * math.asin(p[0])

    def from_tau(self, tau, nu=10.0):
        return (math.sin(math.pi * tau / 2.0), nu)


class _Clayton:
    n_params = 1
    bounds = ((1e-4, 28.0),)

    @staticmethod
    def _log_a(th, u, v):
        # log(u^-th + v^-th - 1) without overflow or cancellation
        a = -th * np.log(u)
        b = -th * np.log(v)
        m = np.maximum(a, b)
        s = np.minimum(a, b)
        return m + np.log1p(np.exp(-m) * np.expm1(s))

    def cdf(self, p, u, v):
        th = p[0]
        return np.exp(-self._log_a(th, u, v) / th)

    def logpdf(self, p, u, v):
        th = p[0]
        return (math.log1p(th) - (th + 1.0) * (np.log(u) + np.log(v))
                - (1.0 / th + 2.0) * self._log_a(th, u, v))

    def h(self, p, u, v):
        th = p[0]
        return np.exp(-(th + 1.0) * np.log(v) - (1.0 / th + 1.0) * self._log_a(th, u, v))

    def hinv(self, p, w, v):
        th = p[0]
        b = 1.0 + np.exp(-th * np.log(v)) * np.expm1(-th / (th + 1.0) * np.log(w))
        return np.exp(-np.log(b) / th)

    def tau(self, p):
        return p[0] / (p[0] + 2.0)

    def from_tau(self, tau):
        return (2.0 * tau / (1.0 - tau),)


def _debye1(theta: float) -> float:
    """First Debye function (1/theta) * integral_0^theta t / (e^t - 1) dt."""
    if abs(theta) < 1e-8:
        return 1.0 - theta / 4.0
    t = 0.5 * theta * (_DEBYE_X + 1.0)
    return float(0.5 * (_DEBYE_W @ (t / np.expm1(t))))


class _Frank:
    n_params = 1
    bounds = ((-35.0, 35.0),)
    _tiny = 1e-10

    @staticmethod
    def _den(th, u, v):
        # (e^-th - 1) + (e^-th*u - 1)(e^-th*v - 1), rearranged into two
        # same-signed terms so strong dependence does not cancel
        return np.exp(-th * u) * np.expm1(-th * v) + np.exp(-th * v) * np.expm1(-th * (1.0 - v))

    def cdf(self, p, u, v):
        th = p[0]
        if abs(th) < self._tiny:
            return u * v
        return -(np.log(np.abs(self._den(th, u, v))) - math.log(abs(math.expm1(-th)))) / th

    def logpdf(self, p, u, v):
        th = p[0]
        if abs(th) < self._tiny:
            return np.zeros(np.broadcast(u, v).shape)
        e1 = math.expm1(-th)
        return (math.log(abs(th * e1)) - th * (u + v)
                - 2.0 * np.log(np.abs(self._den(th, u, v))))

    def h(self, p, u, v):
        th = p[0]
        if abs(th) < self._tiny:
            return np.broadcast_to(u, np.broadcast(u, v).shape).astype(float)
        return np.exp(-th * v) * np.expm1(-th * u) / self._den(th, u, v)

    def hinv(self, p, w, v):
        th = p[0]
        if abs(th) < self._tiny:
            return np.broadcast_to(w, np.broadcast(w, v).shape).astype(float)
        a = -th * v + np.log1p(-w)
        lw = np.log(w)
        return -(np.logaddexp(a, lw - th) - np.logaddexp(a, lw)) / th

    def tau(self, p):
        th = p[0]
        if abs(th) < 1e-2:
            # series; the Debye form cancels badly near zero
            t2 = th * th
            return th * (1.0 / 9.0 - t2 / 900.0 + t2 * t2 / 52920.0)
        return 1.0 - 4.0 / th * (1.0 - _debye1(th))

    def from_tau(self, tau):
        if abs(tau) < 1e-7:
            # inverse of the small-theta branch of tau()
            return (9.0 * tau,)
        lim = self.tau((35.0,))
        if abs(tau) > lim:
            raise ValueError(f"Frank cannot attain tau={tau} (|tau| <= {lim:.6f})")
        if abs(tau) == lim:
            return (math.copysign(35.0, tau),)
        root = optimize.brentq(lambda th: self.tau((th,)) - tau, *(
            (1e-12, 35.0) if tau > 0 else (-35.0, -1e-12)), xtol=1e-14, rtol=1e-14)
        return (root,)


class _Gumbel:
    n_params = 1
    bounds = ((1.0, 17.0),)

    @staticmethod
    def _log_a(th, x, y):
        lx, ly = np.log(x), np.log(y)
        m = np.maximum(lx, ly)
        return th * m + np.log1p(np.exp(-th * np.abs(lx - ly)))

    def cdf(self, p, u, v):
        th = p[0]
        x, y = -np.log(u), -np.log(v)
        return np.exp(-np.exp(self._log_a(th, x, y) / th))

    def logpdf(self, p, u, v):
        th = p[0]
        x, y = -np.log(u), -np.log(v)
        la = self._log_a(th, x, y)
        z = np.exp(la / th)
        return (-z + x + y + (th - 1.0) * (np.log(x) + np.log(y))
                + (2.0 / th - 2.0) * la + np.log1p((th - 1.0) / z))

    def h(self, p, u, v):
        th = p[0]
        x, y = -np.log(u), -np.log(v)
        z = np.exp(self._log_a(th, x, y) / th)
        return np.exp(-z + (1.0 - th) * np.log(z) + (th - 1.0) * np.log(y) + y)

    def hinv(self, p, w, v):
        th = p[0]
        w, v = np.broadcast_arrays(np.asarray(w, float), np.asarray(v, float))
        y = -np.log(v)
        if th == 1.0:
            return w.copy()
        # solve e^t + (th - 1) t = rhs for t = log z; the left side is convex
        # and increasing, so Newton converges monotonically after one step
        rhs = y + (th - 1.0) * np.log(y) - np.log(w)
        t = np.log(y)
        for _ in range(100):
            step = (np.exp(t) + (th - 1.0) * t - rhs) / (np.exp(t) + th - 1.0)
            t = t - step
            if np.all(np.abs(step) <= 1e-15 * np.maximum(1.0, np.abs(t))):
                break
        else:
            raise NumericError(f"Gumbel inverse h-function did not converge (theta={th})")
        ly = np.log(y)
        frac = -np.expm1(th * np.minimum(ly - t, 0.0))
        x = np.exp(t + np.log(np.maximum(frac, 0.0)) / th)
        return np.exp(-x)

    def tau(self, p):
        return 1.0 - 1.0 / p[0]

    def from_tau(self, tau):
        return (1.0 / (1.0 - tau),)


_BASE = {
    "Independence": _Independence(),
    "Gaussian": _Gaussian(),
    "StudentT": _StudentT(),
    "Clayton": _Clayton(),
    "Frank": _Frank(),
    "Gumbel": _Gumbel(),
}
ROTATABLE = ("Clayton", "Gumbel")


def n_params(family: str) -> int:
    return _base(family).n_params


def _base(family):
    try:
        return _BASE[family]
    except KeyError:
        raise ValueError(f"unknown copula family {family!r}") from None


@dataclass
class BicopSpec:
    family: str
    params: tuple = ()
    rotation: int = 0
    loglik: float = 0.0
    aic: float = 0.0
    bic: float = 0.0
    tau_hat: float = 0.0
    n: int = 0
    flags: list = field(default_factory=list)

    def __post_init__(self):
        self.params = tuple(float(p) for p in self.params)
        check_params(self.family, self.params, self.rotation)

    @property
    def n_params(self) -> int:
        return _base(self.family).n_params

    @property
    def tau(self) -> float:
        return param_to_tau(self.family, self.params, self.rotation)

    def to_dict(self) -> dict:
        return {"family": self.family, "rotation": self.rotation, "params": list(self.params),
                "loglik": self.loglik, "aic": self.aic, "bic": self.bic, "tau": self.tau_hat,
                "n": self.n}

    @classmethod
    def from_dict(cls, obj: dict) -> "BicopSpec":
        return cls(obj["family"], tuple(obj.get("params", ())), int(obj.get("rotation", 0)),
                   float(obj.get("loglik", 0.0)), float(obj.get("aic", 0.0)),
                   float(obj.get("bic", 0.0)), float(obj.get("tau", 0.0)), int(obj.get("n", 0)))


def check_params(family: str, params, rotation: int = 0) -> None:
    base = _base(family)
    if len(params) != base.n_params:
        raise ValueError(f"{family} takes {base.n_params} parameter(s), got {len(params)}")
    if rotation not in (0, 90, 180, 270) or (rotation and family not in ROTATABLE):
        raise ValueError(f"rotation {rotation} is not available for {family}")
    if family in ("Gaussian", "StudentT") and not -1.0 < params[0] < 1.0:
        raise ValueError(f"{family} correlation must lie in (-1, 1), got {params[0]}")
    if family == "StudentT" and not 2.0 <= params[1] <= 50.0:
        raise ValueError(f"StudentT degrees of freedom must lie in [2, 50], got {params[1]}")
    if family == "Clayton" and not 0.0 < params[0] <= 28.0:
        raise ValueError(f"Clayton theta must lie in (0, 28], got {params[0]}")
    if family == "Frank" and not -35.0 <= params[0] <= 35.0:
        raise ValueError(f"Frank theta must lie in [-35, 35], got {params[0]}")
    if family == "Gumbel" and not 1.0 <= params[0] <= 17.0:
        raise ValueError(f"Gumbel theta must lie in [1, 17], got {params[0]}")


def _flips(rotation):
    return rotation in (90, 180), rotation in (180, 270)


# --------------------------------------------------------------------------
# Evaluation
# --------------------------------------------------------------------------

def _cdf_raw(family, params, rotation, u, v):
    base = _base(family)
    fu, fv = _flips(rotation)
    uu = 1.0 - u if fu else u
    vv = 1.0 - v if fv else v
    c0 = base.cdf(params, uu, vv)
    if rotation == 0:
        return c0
    if rotation == 90:
        return v - c0
    if rotation == 270:
        return u - c0
    return u + v - 1.0 + c0


def cdf(spec: BicopSpec, u, v):
    """C(u, v); exact on the boundary of the unit square."""
    u, v = np.broadcast_arrays(np.asarray(u, float), np.asarray(v, float))
    if np.any((u < 0) | (u > 1) | (v < 0) | (v > 1)):
        raise ValueError("cdf arguments must lie in [0, 1]")
    out = np.empty(u.shape)
    zero = (u == 0) | (v == 0)
    u_one = (u == 1) & ~zero
    v_one = (v == 1) & ~zero & ~u_one
    inner = ~(zero | u_one | v_one)
    out[zero] = 0.0
    out[u_one] = v[u_one]
    out[v_one] = u[v_one]
    if inner.any():
        c = _cdf_raw(spec.family, spec.params, spec.rotation, u[inner], v[inner])
        lo = np.maximum(u[inner] + v[inner] - 1.0, 0.0)
        out[inner] = np.clip(c, lo, np.minimum(u[inner], v[inner]))
    return out if out.ndim else float(out)


def logpdf(spec: BicopSpec, u, v):
    u, v = _clip(u), _clip(v)
    fu, fv = _flips(spec.rotation)
    out = _base(spec.family).logpdf(spec.params, 1.0 - u if fu else u, 1.0 - v if fv else v)
    return out if np.ndim(out) else float(out)


def pdf(spec: BicopSpec, u, v):
    return np.exp(logpdf(spec, u, v))


def hfunc(spec: BicopSpec, u, v, condition_on: str = "second"):
    """Conditional distribution function of one argument given the other."""
    u, v = _clip(u), _clip(v)
    base = _base(spec.family)
    fu, fv = _flips(spec.rotation)
    uu = 1.0 - u if fu else u
    vv = 1.0 - v if fv else v
    if condition_on == "second":
        h = base.h(spec.params, uu, vv)
        h = 1.0 - h if fu else h
    elif condition_on == "first":
        h = base.h(spec.params, vv, uu)
        h = 1.0 - h if fv else h
    else:
        raise ValueError(f"condition_on must be 'first' or 'second', got {condition_on!r}")
    h = np.clip(h, CLAMP, 1.0 - CLAMP)
    return h if h.ndim else float(h)


def hinv(spec: BicopSpec, w, given, condition_on: str = "second"):
    """Invert :func:`hfunc` in its free argument.

    With ``condition_on="second"`` this returns u such that
    ``hfunc(spec, u, given, "second") == w``; with ``"first"`` it returns v
    such that ``hfunc(spec, given, v, "first") == w``.
    """
    w, g = _clip(w), _clip(given)
    base = _base(spec.family)
    fu, fv = _flips(spec.rotation)
    if condition_on == "second":
        flip_free, flip_given = fu, fv
    elif condition_on == "first":
        flip_free, flip_given = fv, fu
    else:
        raise ValueError(f"condition_on must be 'first' or 'second', got {condition_on!r}")
    gg = 1.0 - g if flip_given else g
    ww = 1.0 - w if flip_free else w
    x = base.hinv(spec.params, ww, gg)
    if not np.all(np.isfinite(x)):
        raise NumericError(f"inverse h-function failed for {spec.family} {spec.params}")
    x = 1.0 - x if flip_free else x
    x = np.clip(x, CLAMP, 1.0 - CLAMP)
    return x if x.ndim else float(x)


def discrete_prob(spec: BicopSpec, u1, u1_left, u2, u2_left):
    """Probability of the rectangle (u1_left, u1] x (u2_left, u2]."""
    u1, u1l, u2, u2l = (np.asarray(a, float) for a in (u1, u1_left, u2, u2_left))
    if np.any(u1l > u1) or np.any(u2l > u2):
        raise ValueError("left limits must not exceed the corresponding upper values")
    p = cdf(spec, u1, u2) - cdf(spec, u1l, u2) - cdf(spec, u1, u2l) + cdf(spec, u1l, u2l)
    return np.maximum(p, 0.0)


# --------------------------------------------------------------------------
# Kendall's tau <-> parameters
# --------------------------------------------------------------------------

def _rot_sign(rotation):
    return -1.0 if rotation in (90, 270) else 1.0


def param_to_tau(family: str, params, rotation: int = 0) -> float:
    return _rot_sign(rotation) * _base(family).tau(tuple(params))


def tau_range(family: str, rotation: int = 0) -> tuple[float, float]:
    """Closed range of Kendall's tau reachable by ``family`` at ``rotation``."""
    base = _base(family)
    if family == "Independence":
        return 0.0, 0.0
    if family in ("Gaussian", "StudentT"):
        return base.tau((-0.9999, 2.0)), base.tau((0.9999, 2.0))
    if family == "Frank":
        hi = base.tau((35.0,))
        return -hi, hi
    lo, hi = base.tau((base.bounds[0][0],)), base.tau((base.bounds[0][1],))
    if family == "Clayton":
        lo = 0.0
    return (lo, hi) if _rot_sign(rotation) > 0 else (-hi, -lo)


def tau_to_param(family: str, tau: float, rotation: int = 0) -> tuple:
    tau = float(tau)
    base = _base(family)
    if family == "Independence":
        return ()
    if not -1.0 < tau < 1.0:
        raise ValueError(f"tau must lie in (-1, 1), got {tau}")
    if family in ROTATABLE:
        t = _rot_sign(rotation) * tau
        lo, hi = tau_range(family, 0)
        strict_lo = family == "Clayton"
        if t > hi or t < lo or (strict_lo and t <= 0.0):
            raise ValueError(f"{family} rotated {rotation} cannot attain tau={tau}")
        return base.from_tau(t)
    return base.from_tau(tau)


# --------------------------------------------------------------------------
# Estimation
# --------------------------------------------------------------------------

def loglik(spec: BicopSpec, u, v) -> float:
    return float(np.sum(logpdf(spec, u, v)))


def _criteria(ll, k, n):
    return 2.0 * k - 2.0 * ll, k * math.log(n) - 2.0 * ll


def _start(family, rotation, tau_hat):
    base = _base(family)
    if family == "Independence":
        return ()
    lo, hi = tau_range(family, rotation)
    t = min(max(tau_hat, lo + 1e-6), hi - 1e-6)
    if family == "Clayton" and _rot_sign(rotation) * t <= 1e-4:
        t = _rot_sign(rotation) * 1e-4
    p = tau_to_param(family, t, rotation)
    # keep the start strictly inside the optimisation box
    return tuple(min(max(x, b[0]), b[1]) for x, b in zip(p, base.bounds))


def fit(family: str, u, v, rotation: int = 0, tau_hat: float | None = None) -> BicopSpec:
    """Maximum likelihood fit of one family, started from tau inversion."""
    u, v = _clip(u), _clip(v)
    n = u.shape[0]
    if n < MIN_FIT_N:
        raise DataError(f"need at least {MIN_FIT_N} observations to fit a copula, got {n}")
    if tau_hat is None:
        tau_hat = kendall_tau(u, v)
    base = _base(family)
    flags = []

    def nll(params):
        try:
            val = -loglik(BicopSpec(family, params, rotation), u, v)
        except ValueError:
            return np.inf
        return val if np.isfinite(val) else np.inf

    start = _start(family, rotation, tau_hat)
    best_p, best_nll = start, nll(start)
    try:
        if base.n_params == 1:
            (lo, hi), = base.bounds
            res = optimize.minimize_scalar(lambda x: nll((x,)), bounds=(lo, hi),
                                           method="bounded", options={"xatol": 1e-7})
            cands = [((float(res.x),), float(res.fun))]
        elif base.n_params == 2:
            cands = _fit_student(u, v)
        else:
            cands = []
        for p, f in cands:
            if np.isfinite(f) and f < best_nll:
                best_p, best_nll = p, f
    except (ValueError, ArithmeticError, NumericError) as exc:
        log.warning("%s fit failed (%s); using tau inversion", family, exc)
        flags.append("fallback_tau_inversion")
    if not np.isfinite(best_nll):
        raise NumericError(f"{family} log-likelihood is not finite at any candidate parameter")
    ll = -best_nll
    aic, bic = _criteria(ll, base.n_params, n)
    return BicopSpec(family, best_p, rotation, ll, aic, bic, float(tau_hat), n, flags)


def _fit_student(u, v):
    """Profile nu over NU_GRID, then refine nu between the grid neighbours.

    The t quantiles depend on nu only, so they are computed once per nu and
    the inner correlation search reuses them.
    """
    (rlo, rhi), (nlo, nhi) = _StudentT.bounds

    def best_rho(nu):
        x, y = _t_ppf(nu, u), _t_ppf(nu, v)

        def f(r):
            val = -float(np.sum(_StudentT.logpdf_q(r, nu, x, y)))
            return val if np.isfinite(val) else np.inf

        res = optimize.minimize_scalar(f, bounds=(rlo, rhi), method="bounded",
                                       options={"xatol": 1e-7})
        return float(res.x), float(res.fun)

    profile = [(nu, *best_rho(nu)) for nu in NU_GRID]
    i = min(range(len(profile)), key=lambda k: profile[k][2])
    cands = [((r, nu), f) for nu, r, f in profile]
    lo = NU_GRID[max(i - 1, 0)]
    hi = NU_GRID[min(i + 1, len(NU_GRID) - 1)]
    r_fix = profile[i][1]

    def f_nu(nu):
        val = -float(np.sum(_StudentT().logpdf((r_fix, nu), u, v)))
        return val if np.isfinite(val) else np.inf

    res = optimize.minimize_scalar(f_nu, bounds=(lo, hi), method="bounded",
                                   options={"xatol": 1e-2})
    nu = float(res.x)
    r, f = best_rho(nu)
    cands.append(((r, nu), f))
    return cands


def independence_spec(n: int = 0, tau_hat: float = 0.0) -> BicopSpec:
    return BicopSpec("Independence", (), 0, 0.0, 0.0, 0.0, tau_hat, n)


def select_family(u, v, candidates=DEFAULT_CANDIDATES, criterion: str = "aic",
                  threads: int = 1) -> BicopSpec:
    """Fit every candidate and return the one minimising AIC or BIC.

    Independence joins the candidates when |tau| < 0.02. Clayton and Gumbel are
    tried in both rotations matching the sign of the sample tau.
    """
    criterion = criterion.lower()
    if criterion not in ("aic", "bic"):
        raise ValueError(f"criterion must be 'aic' or 'bic', got {criterion!r}")
    candidates = list(candidates)
    if not candidates:
        raise ValueError("no candidate families given")
    u, v = _clip(u), _clip(v)
    tau_hat = kendall_tau(u, v)
    jobs = []
    if abs(tau_hat) < INDEPENDENCE_TAU and "Independence" not in candidates:
        candidates = ["Independence"] + candidates
    for fam in candidates:
        _base(fam)
        if fam in ROTATABLE:
            rots = (0, 180) if tau_hat >= 0 else (90, 270)
            jobs.extend((fam, r) for r in rots)
        else:
            jobs.append((fam, 0))

    def one(job):
        fam, rot = job
        if fam == "Independence":
            return independence_spec(u.shape[0], tau_hat)
        try:
            return fit(fam, u, v, rot, tau_hat)
        except NumericError as exc:
            log.warning("candidate %s/%d failed: %s", fam, rot, exc)
            return None

    if threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(threads) as pool:
            fits = list(pool.map(one, jobs))
    else:
        fits = [one(j) for j in jobs]
    fits = [f for f in fits if f is not None]
    if not fits:
        raise NumericError("every candidate copula fit failed")
    # min() keeps the first of equal scores, so candidate order breaks ties
    return min(fits, key=lambda f: getattr(f, criterion))
