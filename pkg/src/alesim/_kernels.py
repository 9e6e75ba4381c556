"""Compiled inner loops for backward composition of rotated particle maps.

Points are carried as separate real/imaginary arrays and the loop over
particles is the outer one, so the inner loop over points vectorizes.
Particle ``j`` is described by (cos theta_j, sin theta_j, c_j, gamma_j);
``kind`` is 0 for slits and 1 for spread-out maps.
"""
import math

import numpy as np
from numba import njit

SLIT = 0
SPREADOUT = 1

# Derivative products are folded into the log-sum every RENORM particles.
RENORM = 32


@njit(inline="always", fastmath=True, error_model="numpy")
def _slit(ec, ur, ui):
    d = 1.0 / (ur * ur + ui * ui)
    izr = ur * d
    izi = -ui * d
    # w = e^c (u+1)^2 / u
    pr_ = (ur + 1.0) * (ur + 1.0) - ui * ui
    pi_ = 2.0 * (ur + 1.0) * ui
    hr = ec * (pr_ * izr - pi_ * izi)
    hi = ec * (pr_ * izi + pi_ * izr)
    d2 = 4.0 / (hr * hr + hi * hi)
    qr = 1.0 - hr * d2
    qi = hi * d2
    # principal sqrt(1 - 4/w); w*sqrt(1-4/w) = sqrt(w)sqrt(w-4) off [0, 4]
    r = math.sqrt(qr * qr + qi * qi)
    t = math.sqrt(0.5 * (r + abs(qr)))
    v = 0.5 * qi / t
    pos = qr >= 0.0
    s0r = t if pos else abs(v)
    s0i = v if pos else math.copysign(t, qi)
    sr = hr * s0r - hi * s0i
    si = hr * s0i + hi * s0r
    fr = 0.5 * (hr - 2.0 + sr)
    fi = 0.5 * (hi + si)
    # F' = e^c (1 - 1/u^2) F / s
    ar = ec * (1.0 - (izr * izr - izi * izi))
    ai = ec * (-2.0 * izr * izi)
    br = ar * fr - ai * fi
    bi = ar * fi + ai * fr
    ds = 1.0 / (sr * sr + si * si)
    return fr, fi, (br * sr + bi * si) * ds, (bi * sr - br * si) * ds


@njit(inline="always", fastmath=True, error_model="numpy")
def _slit_abs2(ec, ur, ui):
    """Slit map value and |F'|^2, without forming F' itself."""
    d = 1.0 / (ur * ur + ui * ui)
    izr = ur * d
    izi = -ui * d
    # w = e^c (u+1)^2 / u
    pr_ = (ur + 1.0) * (ur + 1.0) - ui * ui
    pi_ = 2.0 * (ur + 1.0) * ui
    hr = ec * (pr_ * izr - pi_ * izi)
    hi = ec * (pr_ * izi + pi_ * izr)
    d2 = 4.0 / (hr * hr + hi * hi)
    qr = 1.0 - hr * d2
    qi = hi * d2
    r = math.sqrt(qr * qr + qi * qi)
    t = math.sqrt(0.5 * (r + abs(qr)))
    v = 0.5 * qi / t
    pos = qr >= 0.0
    s0r = t if pos else abs(v)
    s0i = v if pos else math.copysign(t, qi)
    sr = hr * s0r - hi * s0i
    si = hr * s0i + hi * s0r
    fr = 0.5 * (hr - 2.0 + sr)
    fi = 0.5 * (hi + si)
    ar = 1.0 - (izr * izr - izi * izi)
    ai = -2.0 * izr * izi
    return fr, fi, ec * ec * (ar * ar + ai * ai) * (fr * fr + fi * fi) / (sr * sr + si * si)


@njit(inline="always", fastmath=True, error_model="numpy")
def _spreadout(c, ec, gam_r, gam_i, ur, ui):
    d = 1.0 / (ur * ur + ui * ui)
    gr = gam_r * ur - gam_i * ui - 1.0
    gi = gam_r * ui + gam_i * ur
    dg = 1.0 / (gr * gr + gi * gi)
    qr = 2.0 * c * gr * dg
    qi = -2.0 * c * gi * dg
    e = ec * math.exp(qr)
    er = e * math.cos(qi)
    ei = e * math.sin(qi)
    fr = ur * er - ui * ei
    fi = ur * ei + ui * er
    # F'/F = 1/u - q gamma / g
    pr = qr * gam_r - qi * gam_i
    pi_ = qr * gam_i + qi * gam_r
    lr = ur * d - (pr * gr + pi_ * gi) * dg
    li = -ui * d - (pi_ * gr - pr * gi) * dg
    return fr, fi, fr * lr - fi * li, fr * li + fi * lr


@njit(cache=True, fastmath=True, error_model="numpy")
def compose(zr, zi, cs, sn, caps, gam_r, gam_i, kind):
    """Evaluate Phi_n and log Phi_n' at every point.

    Returns (wr, wi, log|Phi'|, arg Phi') with the argument only defined
    modulo 2 pi.
    """
    n = cs.size
    m_pts = zr.size
    wr = zr.copy()
    wi = zi.copy()
    ld_re = np.zeros(m_pts)
    ld_im = np.zeros(m_pts)
    pr = np.ones(m_pts)
    pim = np.zeros(m_pts)
    for j in range(n - 1, -1, -1):
        a = cs[j]
        b = sn[j]
        c = caps[j]
        ec = math.exp(c)
        g_r = gam_r[j]
        g_i = gam_i[j]
        if kind == SLIT:
            for m in range(m_pts):
                ur = wr[m] * a + wi[m] * b
                ui = wi[m] * a - wr[m] * b
                fr, fi, dr, di = _slit(ec, ur, ui)
                xr = pr[m] * dr - pim[m] * di
                pim[m] = pr[m] * di + pim[m] * dr
                pr[m] = xr
                wr[m] = a * fr - b * fi
                wi[m] = a * fi + b * fr
        else:
            for m in range(m_pts):
                ur = wr[m] * a + wi[m] * b
                ui = wi[m] * a - wr[m] * b
                fr, fi, dr, di = _spreadout(c, ec, g_r, g_i, ur, ui)
                xr = pr[m] * dr - pim[m] * di
                pim[m] = pr[m] * di + pim[m] * dr
                pr[m] = xr
                wr[m] = a * fr - b * fi
                wi[m] = a * fi + b * fr
        if j % RENORM == 0:
            for m in range(m_pts):
                ld_re[m] += 0.5 * math.log(pr[m] * pr[m] + pim[m] * pim[m])
                ld_im[m] += math.atan2(pim[m], pr[m])
                pr[m] = 1.0
                pim[m] = 0.0
    return wr, wi, ld_re, ld_im


@njit(cache=True, fastmath=True, error_model="numpy")
def log_abs_deriv(zr, zi, cs, sn, caps, gam_r, gam_i, kind):
    """log|Phi_n'| at every point; the hot path of the attachment density."""
    n = cs.size
    m_pts = zr.size
    wr = zr.copy()
    wi = zi.copy()
    ld = np.zeros(m_pts)
    prod = np.ones(m_pts)
    for j in range(n - 1, -1, -1):
        a = cs[j]
        b = sn[j]
        c = caps[j]
        ec = math.exp(c)
        g_r = gam_r[j]
        g_i = gam_i[j]
        if kind == SLIT:
            for m in range(m_pts):
                ur = wr[m] * a + wi[m] * b
                ui = wi[m] * a - wr[m] * b
                fr, fi, a2 = _slit_abs2(ec, ur, ui)
                prod[m] *= a2
                wr[m] = a * fr - b * fi
                wi[m] = a * fi + b * fr
        else:
            for m in range(m_pts):
                ur = wr[m] * a + wi[m] * b
                ui = wi[m] * a - wr[m] * b
                fr, fi, dr, di = _spreadout(c, ec, g_r, g_i, ur, ui)
                prod[m] *= dr * dr + di * di
                wr[m] = a * fr - b * fi
                wi[m] = a * fi + b * fr
        if j % RENORM == 0:
            for m in range(m_pts):
                ld[m] += 0.5 * math.log(prod[m])
                prod[m] = 1.0
    return ld
