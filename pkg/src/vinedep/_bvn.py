"""Bivariate normal and Student-t distribution functions."""
from __future__ import annotations

import math

import numpy as np
from scipy import integrate, special

_GL_X, _GL_W = np.polynomial.legendre.leggauss(20)
_TWO_PI = 2.0 * math.pi


def _upper(h, k, r):
    """P(X > h, Y > k) for a standard bivariate normal with correlation r.

    Genz's method: Gauss-Legendre over the Plackett integral in arcsin(r) for
    |r| < 0.925, and an asymptotic expansion around the singular point for
    |r| near 1. Absolute error is around 1e-15.
    """
    if r == 0.0:
        return special.ndtr(-h) * special.ndtr(-k)
    hk = h * k
    t = 1.0 + _GL_X  # nodes on (0, 2)
    if abs(r) < 0.925:
        hs = 0.5 * (h * h + k * k)
        asr = 0.5 * math.asin(r)
        sn = np.sin(asr * t)
        terms = np.exp((sn * hk - hs) / (1.0 - sn * sn))
        return terms @ _GL_W * asr / _TWO_PI + special.ndtr(-h) * special.ndtr(-k)

    if r < 0:
        k = -k
        hk = -hk
    bvn = 0.0
    if abs(r) < 1.0:
        a_s = 1.0 - r * r
        a = math.sqrt(a_s)
        bs = (h - k) ** 2
        asr = -0.5 * (bs / a_s + hk)
        c = (4.0 - hk) / 8.0
        d = (12.0 - hk) / 80.0
        if asr > -100:
            bvn = a * math.exp(asr) * (1 - c * (bs - a_s) * (1 - d * bs) / 3 + c * d * a_s * a_s)
        if hk > -100:
            b = math.sqrt(bs)
            sp = math.sqrt(_TWO_PI) * special.ndtr(-b / a)
            bvn -= math.exp(-hk / 2) * sp * b * (1 - c * bs * (1 - d * bs) / 3)
        a /= 2.0
        xs = (a * t) ** 2
        asr = -0.5 * (bs / xs + hk)
        ok = asr > -100
        xs, asr_ok, w = xs[ok], asr[ok], _GL_W[ok]
        sp = 1 + c * xs * (1 + 5 * d * xs)
        rs = np.sqrt(1 - xs)
        ep = np.exp(-(hk / 2) * xs / (1 + rs) ** 2) / rs
        bvn = (a * ((np.exp(asr_ok) * (sp - ep)) @ w) - bvn) / _TWO_PI
    if r > 0:
        return bvn + special.ndtr(-max(h, k))
    if h >= k:
        return -bvn
    if h < 0:
        span = special.ndtr(k) - special.ndtr(h)
    else:
        span = special.ndtr(-h) - special.ndtr(-k)
    return span - bvn


def bvn_cdf(x, y, rho):
    """P(X <= x, Y <= y), elementwise over broadcast arrays."""
    x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
    out = np.empty(x.shape)
    for idx in np.ndindex(x.shape):
        xi, yi = x[idx], y[idx]
        if xi == -np.inf or yi == -np.inf:
            val = 0.0
        elif xi == np.inf:
            val = special.ndtr(yi)
        elif yi == np.inf:
            val = special.ndtr(xi)
        else:
            val = _upper(-xi, -yi, float(rho))
        out[idx] = min(1.0, max(0.0, val))
    return out


def bvt_cdf(x, y, rho, nu):
    """Bivariate Student-t CDF by adaptive quadrature over the conditional law.

    P(X <= x, Y <= y) = integral_{-inf}^{y} f_nu(s) T_{nu+1}((x - rho s) / sigma(s)) ds
    with sigma(s)^2 = (nu + s^2)(1 - rho^2) / (nu + 1).
    """
    x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
    out = np.empty(x.shape)
    scale = (1.0 - rho * rho) / (nu + 1.0)

    def integrand(s, xv):
        sig = math.sqrt((nu + s * s) * scale)
        dens = math.exp(special.gammaln((nu + 1) / 2) - special.gammaln(nu / 2)
                        - 0.5 * math.log(nu * math.pi)
                        - (nu + 1) / 2 * math.log1p(s * s / nu))
        return dens * special.stdtr(nu + 1, (xv - rho * s) / sig)

    for idx in np.ndindex(x.shape):
        xi, yi = float(x[idx]), float(y[idx])
        if xi == -np.inf or yi == -np.inf:
            out[idx] = 0.0
            continue
        if xi == np.inf:
            out[idx] = special.stdtr(nu, yi)
            continue
        # split at the conditional median to help the adaptive rule
        mid = min(yi, xi / rho if rho != 0 else yi)
        val = integrate.quad(integrand, -np.inf, mid, args=(xi,), epsabs=1e-14,
                             epsrel=1e-12, limit=200)[0]
        if mid < yi:
            val += integrate.quad(integrand, mid, yi, args=(xi,), epsabs=1e-14,
                                  epsrel=1e-12, limit=200)[0]
        out[idx] = min(1.0, max(0.0, val))
    return out
