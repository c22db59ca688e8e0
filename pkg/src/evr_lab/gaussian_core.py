"""Standard normal primitives: CDF, quantile and the bivariate normal CDF.

All functions accept scalars or array-likes and broadcast like numpy ufuncs.
Scalar inputs return Python floats.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

__all__ = [
    "BvnQuery",
    "std_normal_cdf",
    "std_normal_pdf",
    "std_normal_quantile",
    "bvn_cdf",
    "bvn_upper",
]

_TWO_PI = 2.0 * math.pi
_SQRT_TWO_PI = math.sqrt(_TWO_PI)


def _scalar_or_array(out: np.ndarray):
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class BvnQuery:
    """Upper integration limits ``(x, y)`` and correlation ``rho``."""

    x: float
    y: float
    rho: float

    def __post_init__(self):
        if not -1.0 <= self.rho <= 1.0:
            raise ValueError(f"rho must lie in [-1, 1], got {self.rho}")


def std_normal_cdf(z):
    """Phi(z). NaN propagates as NaN."""
    return _scalar_or_array(ndtr(np.asarray(z, dtype=float)))


def std_normal_pdf(z):
    z = np.asarray(z, dtype=float)
    return _scalar_or_array(np.exp(-0.5 * z * z) / _SQRT_TWO_PI)


# Wichura (1988), algorithm AS241 PPND16.
_A = (3.387132872796366608, 133.14166789178437745, 1971.5909503065514427,
      13731.693765509461125, 45921.953931549871457, 67265.770927008700853,
      33430.575583588128105, 2509.0809287301226727)
_B = (1.0, 42.313330701600911252, 687.1870074920579083, 5394.1960214247511077,
      21213.794301586595867, 39307.89580009271061, 28729.085735721942674,
      5226.495278852545925)
_C = (1.42343711074968357734, 4.6303378461565452959, 5.7694972214606914055,
      3.64784832476320460504, 1.27045825245236838258, 0.24178072517745061177,
      0.0227238449892691845833, 7.7454501427834140764e-4)
_D = (1.0, 2.05319162663775882187, 1.6763848301838038494,
      0.68976733498510000455, 0.14810397642748007459, 0.0151986665636164571966,
      5.475938084995344946e-4, 1.05075007164441684324e-9)
_E = (6.6579046435011037772, 5.4637849111641143699, 1.7848265399172913358,
      0.29656057182850489123, 0.026532189526576123093, 0.0012426609473880784386,
      2.71155556874348757815e-5, 2.01033439929228813265e-7)
_F = (1.0, 0.59983220655588793769, 0.13692988092273580531,
      0.0148753612908506148525, 7.868691311456132591e-4, 1.8463183175100546818e-5,
      1.4215117583164458887e-7, 2.04426310338993978564e-15)


def _poly(coefs, x):
    # Horner with coefficients in increasing degree.
    out = np.zeros_like(x)
    for c in reversed(coefs):
        out = out * x + c
    return out


def _as241(p: np.ndarray) -> np.ndarray:
    q = p - 0.5
    z = np.empty_like(p)
    central = np.abs(q) <= 0.425
    if central.any():
        qc = q[central]
        r = 0.180625 - qc * qc
        z[central] = qc * _poly(_A, r) / _poly(_B, r)
    tail = ~central
    if tail.any():
        qt = q[tail]
        r = np.where(qt < 0.0, p[tail], 1.0 - p[tail])
        r = np.sqrt(-np.log(r))
        near = r <= 5.0
        zt = np.empty_like(r)
        rn = r[near] - 1.6
        zt[near] = _poly(_C, rn) / _poly(_D, rn)
        rf = r[~near] - 5.0
        zt[~near] = _poly(_E, rf) / _poly(_F, rf)
        z[tail] = np.where(qt < 0.0, -zt, zt)
    return z


def std_normal_quantile(p):
    """Inverse of :func:`std_normal_cdf` on the open interval (0, 1).

    AS241 rational approximation followed by one Halley correction step.

    Raises
    ------
    ValueError
        If any ``p`` lies outside (0, 1) or is NaN.
    """
    p = np.asarray(p, dtype=float)
    if np.any(~((p > 0.0) & (p < 1.0))):
        raise ValueError("std_normal_quantile requires 0 < p < 1")
    flat = np.atleast_1d(p).ravel()
    z = _as241(flat)
    # Halley step; use the smaller tail to keep the residual accurate.
    upper = z > 0
    resid = np.where(upper, (1.0 - flat) - ndtr(-z), ndtr(z) - flat)
    resid = np.where(upper, -resid, resid)
    u = resid * _SQRT_TWO_PI * np.exp(0.5 * z * z)
    z = z - u / (1.0 + 0.5 * z * u)
    return _scalar_or_array(z.reshape(p.shape))


# Gauss-Legendre half-rules used by the Drezner-Genz scheme (6, 12, 20 points).
_GL_W = (
    np.array([0.1713244923791705, 0.3607615730481384, 0.4679139345726904]),
    np.array([0.04717533638651177, 0.1069393259953183, 0.1600783285433464,
              0.2031674267230659, 0.2334925365383547, 0.2491470458134029]),
    np.array([0.01761400713915212, 0.04060142980038694, 0.06267204833410906,
              0.08327674157670475, 0.1019301198172404, 0.1181945319615184,
              0.1316886384491766, 0.1420961093183821, 0.1491729864726037,
              0.1527533871307259]),
)
_GL_X = (
    np.array([0.9324695142031522, 0.6612093864662647, 0.2386191860831970]),
    np.array([0.9815606342467191, 0.9041172563704750, 0.7699026741943050,
              0.5873179542866171, 0.3678314989981802, 0.1252334085114692]),
    np.array([0.9931285991850949, 0.9639719272779138, 0.9122344282513259,
              0.8391169718222188, 0.7463319064601508, 0.6360536807265150,
              0.5108670019508271, 0.3737060887154196, 0.2277858511416451,
              0.07652652113349733]),
)
# Full rules on [0, 2] as (1 - x, 1 + x).
_RULES = tuple(
    (np.concatenate([w, w]), np.concatenate([1.0 - x, 1.0 + x]))
    for w, x in zip(_GL_W, _GL_X)
)


def _bvnu_moderate(h, k, r, w, x):
    # |r| < 0.925: integrate the density derivative over asin(r).
    hk = h * k
    hs = 0.5 * (h * h + k * k)
    asr = 0.5 * np.arcsin(r)
    sn = np.sin(asr[:, None] * x[None, :])
    terms = np.exp((sn * hk[:, None] - hs[:, None]) / (1.0 - sn * sn))
    return terms @ w * asr / _TWO_PI + ndtr(-h) * ndtr(-k)


def _bvnu_high(h, k, r, w, x):
    # |r| >= 0.925: expansion around the degenerate |r| = 1 case.
    neg = r < 0
    k = np.where(neg, -k, k)
    hk = h * k
    a_s = (1.0 - r) * (1.0 + r)
    a = np.sqrt(a_s)
    bs = (h - k) ** 2
    c = (4.0 - hk) / 8.0
    d = (12.0 - hk) / 80.0
    asr = -(bs / a_s + hk) / 2.0
    bvn = np.where(
        asr > -100.0,
        a * np.exp(asr) * (1.0 - c * (bs - a_s) * (1.0 - d * bs) / 3.0 + c * d * a_s * a_s),
        0.0,
    )
    b = np.sqrt(bs)
    with np.errstate(over="ignore", invalid="ignore"):
        tail = np.exp(-hk / 2.0) * _SQRT_TWO_PI * ndtr(-b / a) * b * (1.0 - c * bs * (1.0 - d * bs) / 3.0)
    bvn = np.where(hk > -100.0, bvn - tail, bvn)
    half = a / 2.0
    xs = (half[:, None] * x[None, :]) ** 2
    asr_x = -(bs[:, None] / xs + hk[:, None]) / 2.0
    sp = 1.0 + c[:, None] * xs * (1.0 + 5.0 * d[:, None] * xs)
    rs = np.sqrt(1.0 - xs)
    ep = np.exp(-(hk[:, None] / 2.0) * xs / (1.0 + rs) ** 2) / rs
    integrand = np.where(asr_x > -100.0, np.exp(np.maximum(asr_x, -100.0)) * (sp - ep), 0.0)
    bvn = (half * (integrand @ w) - bvn) / _TWO_PI

    pos_part = bvn + ndtr(-np.maximum(h, k))
    neg_l = np.where(h < 0.0, ndtr(k) - ndtr(h), ndtr(-h) - ndtr(-k))
    neg_part = np.where(h >= k, -bvn, neg_l - bvn)
    return np.where(neg, neg_part, pos_part)


def _bvnu_finite(h, k, r):
    """P(X > h, Y > k) for finite h, k and |r| < 1 (1-D arrays)."""
    out = np.empty_like(h)
    absr = np.abs(r)
    band = np.where(absr < 0.3, 0, np.where(absr < 0.75, 1, 2))
    for idx, (w, x) in enumerate(_RULES):
        sel = band == idx
        if not sel.any():
            continue
        hs, ks, rs = h[sel], k[sel], r[sel]
        res = np.empty_like(hs)
        mod = np.abs(rs) < 0.925
        if mod.any():
            res[mod] = _bvnu_moderate(hs[mod], ks[mod], rs[mod], w, x)
        if (~mod).any():
            res[~mod] = _bvnu_high(hs[~mod], ks[~mod], rs[~mod], w, x)
        out[sel] = res
    return np.clip(out, 0.0, 1.0)


def bvn_upper(h, k, rho):
    """P(Z1 > h, Z2 > k) for a standard bivariate normal with correlation rho."""
    h, k, rho = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (h, k, rho)))
    if np.any(np.abs(rho) > 1.0):
        raise ValueError("correlation must lie in [-1, 1]")
    shape = h.shape
    h, k, rho = h.ravel().copy(), k.ravel().copy(), rho.ravel().copy()
    out = np.full(h.shape, np.nan)

    nan = np.isnan(h) | np.isnan(k) | np.isnan(rho)
    upper_inf = (h == np.inf) | (k == np.inf)
    out[upper_inf & ~nan] = 0.0
    done = nan | upper_inf
    # A -inf limit leaves a univariate tail.
    h_ninf = (h == -np.inf) & ~done
    out[h_ninf] = ndtr(-k[h_ninf])
    done |= h_ninf
    k_ninf = (k == -np.inf) & ~done
    out[k_ninf] = ndtr(-h[k_ninf])
    done |= k_ninf

    one = (rho == 1.0) & ~done
    out[one] = ndtr(-np.maximum(h[one], k[one]))
    done |= one
    minus_one = (rho == -1.0) & ~done
    out[minus_one] = np.maximum(0.0, ndtr(-h[minus_one]) - ndtr(k[minus_one]))
    done |= minus_one
    zero = (rho == 0.0) & ~done
    out[zero] = ndtr(-h[zero]) * ndtr(-k[zero])
    done |= zero

    rest = ~done
    if rest.any():
        out[rest] = _bvnu_finite(h[rest], k[rest], rho[rest])
    return _scalar_or_array(out.reshape(shape))


def bvn_cdf(x, y=None, rho=None):
    """Standard bivariate normal CDF ``P(Z1 <= x, Z2 <= y)`` with correlation rho.

    Accepts either a :class:`BvnQuery` or the three arguments directly.
    Uses the Drezner-Genz Gauss-Legendre scheme; |rho| = 1 is handled in
    closed form.
    """
    if isinstance(x, BvnQuery):
        x, y, rho = x.x, x.y, x.rho
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return bvn_upper(-x, -y, rho)
