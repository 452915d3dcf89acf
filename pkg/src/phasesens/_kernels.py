"""Compiled right-hand sides, Jacobians, and map steps.

Every system the library ships is registered here under an integer kernel id
so that the adaptive integrator and the batch drivers can be compiled once
and cached on disk.  Python-facing closures over these kernels are attached
to :class:`~phasesens.dynamics.SystemDef` instances by the model catalog.

Continuous kernel ids
---------------------
0  linear_1d          dx/dt = a*x                        p = (a,)
1  harmonic           dx/dt = y, dy/dt = -x              p = ()
2  circle             dtheta/dt = omega                  p = (omega,)
3  diag_2d            dx/dt = a*x, dy/dt = b*y           p = (a, b)
4  van_der_pol        p = ()
5  lorenz             p = (sigma, r, b)
6  morris_lecar_3     (V, n, h)                          p = ML_P3
7  morris_lecar_4     (V, n, h, s)                       p = ML_P3 + ML_P4
8  hindmarsh_rose     (V, n, h)
9  fitzhugh_rinzel    (V, w, y)
10 plant              (V, n, h, x, c)

Map kernel ids
--------------
0  scale_1d           x -> c*x                           p = (c,)
1  rotation           y -> y + nu (mod 1)                p = (nu,)
2  torus_contract     (x, y), Fig-style contracting map  p = (nu0, gamma)
3  torus_pattern      (x, y), pattern-forming map        p = (gamma, a)
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

# Parameter vector layouts (index constants, kept in one place).
# morris_lecar (shared slice):
#  0:C 1:I 2:gKCa 3:phi 4:eps1 5:mu 6:Ca0 7:V1 8:V2 9:V3 10:V4
#  11:gCa 12:gK 13:gL 14:VK 15:VL 16:VCa
# morris_lecar_4 appends: 17:eps2 18:taus 19:gCaS 20:V5 21:V6
# hindmarsh_rose: 0:a 1:b 2:c 3:d 4:r 5:sigma 6:V0 7:I
# fitzhugh_rinzel: 0:I 1:a 2:b 3:c 4:d 5:delta 6:mu
# plant: 0:gNa 1:gCa 2:gK 3:gKCa 4:gL 5:VNa 6:VCa 7:VK 8:VL 9:f 10:k1 11:taux 12:C

OBS_COMPONENT = 0   # scale * x[idx] + offset
OBS_COSINE = 1      # scale * cos(x[idx]) + offset
OBS_UNIT_CIRCLE = 2  # exp(2*pi*i * x[idx])


# ---------------------------------------------------------------------------
# Plant gating rates.  alpha_m and alpha_n have removable singularities where
# the exponential denominator vanishes; below |w| = 1e-6 the Taylor expansion
# of w/expm1(w) = 1 - w/2 + w^2/12 + O(w^4) takes over.

@njit(cache=True)
def _w_over_expm1(w):
    if abs(w) < 1e-6:
        return 1.0 - 0.5 * w + w * w / 12.0
    return w / math.expm1(w)


@njit(cache=True)
def _d_w_over_expm1(w):
    # d/dw of w/expm1(w)
    if abs(w) < 1e-6:
        return -0.5 + w / 6.0
    e = math.expm1(w)
    return (e - w * (e + 1.0)) / (e * e)


@njit(cache=True)
def plant_alpha_m(vs):
    return _w_over_expm1((50.0 - vs) / 10.0)


@njit(cache=True)
def plant_beta_m(vs):
    return 4.0 * math.exp((25.0 - vs) / 18.0)


@njit(cache=True)
def plant_alpha_h(vs):
    return 0.07 * math.exp((25.0 - vs) / 20.0)


@njit(cache=True)
def plant_beta_h(vs):
    return 1.0 / (math.exp((55.0 - vs) / 10.0) + 1.0)


@njit(cache=True)
def plant_alpha_n(vs):
    return 0.1 * _w_over_expm1((55.0 - vs) / 10.0)


@njit(cache=True)
def plant_beta_n(vs):
    return 0.125 * math.exp((45.0 - vs) / 80.0)


@njit(cache=True)
def _plant_rates_d(vs):
    # derivatives of the six rates with respect to vs
    dam = -0.1 * _d_w_over_expm1((50.0 - vs) / 10.0)
    dbm = -(4.0 / 18.0) * math.exp((25.0 - vs) / 18.0)
    dah = -(0.07 / 20.0) * math.exp((25.0 - vs) / 20.0)
    e = math.exp((55.0 - vs) / 10.0)
    dbh = e / (10.0 * (e + 1.0) ** 2)
    dan = -0.01 * _d_w_over_expm1((55.0 - vs) / 10.0)
    dbn = -(0.125 / 80.0) * math.exp((45.0 - vs) / 80.0)
    return dam, dbm, dah, dbh, dan, dbn


@njit(cache=True)
def plant_x_inf(v):
    return 1.0 / (math.exp(-0.15 * (v + 50.0)) + 1.0)


@njit(cache=True)
def plant_v_shift(v):
    return (127.0 * v + 8265.0) / 105.0


# ---------------------------------------------------------------------------
# Continuous right-hand sides.

@njit(cache=True)
def _ml_rhs(x, p, out, with_s):
    v = x[0]
    n = x[1]
    h = x[2]
    cm = p[0]
    cur = p[1]  # applied current I
    minf = 0.5 * (1.0 + math.tanh((v - p[7]) / p[8]))
    winf = 0.5 * (1.0 + math.tanh((v - p[9]) / p[10]))
    csh = math.cosh((v - p[9]) / (2.0 * p[10]))
    z = h / (p[6] + h)
    ionic = (-p[11] * minf * (v - p[16]) - p[12] * n * (v - p[14])
             - p[13] * (v - p[15]) - p[2] * z * (v - p[14]) + cur)
    if with_s:
        s = x[3]
        ionic -= p[19] * s * (v - p[16])
        sinf = 0.5 * (1.0 + math.tanh((v - p[20]) / p[21]))
        out[3] = p[17] * (sinf - s) / p[18]
    out[0] = ionic / cm
    out[1] = p[3] * (winf - n) * csh
    out[2] = p[4] * (-p[5] * p[11] * minf * (v - p[16]) - h)


@njit(cache=True)
def _ml_jac(x, p, jac, with_s):
    v = x[0]
    n = x[1]
    h = x[2]
    cm = p[0]
    th1 = math.tanh((v - p[7]) / p[8])
    minf = 0.5 * (1.0 + th1)
    dminf = 0.5 * (1.0 - th1 * th1) / p[8]
    th3 = math.tanh((v - p[9]) / p[10])
    winf = 0.5 * (1.0 + th3)
    dwinf = 0.5 * (1.0 - th3 * th3) / p[10]
    arg = (v - p[9]) / (2.0 * p[10])
    csh = math.cosh(arg)
    snh = math.sinh(arg)
    z = h / (p[6] + h)
    dz = p[6] / (p[6] + h) ** 2
    jac[0, 0] = (-p[11] * (dminf * (v - p[16]) + minf) - p[12] * n
                 - p[13] - p[2] * z) / cm
    jac[0, 1] = -p[12] * (v - p[14]) / cm
    jac[0, 2] = -p[2] * dz * (v - p[14]) / cm
    jac[1, 0] = p[3] * (dwinf * csh + (winf - n) * snh / (2.0 * p[10]))
    jac[1, 1] = -p[3] * csh
    jac[1, 2] = 0.0
    jac[2, 0] = -p[4] * p[5] * p[11] * (dminf * (v - p[16]) + minf)
    jac[2, 1] = 0.0
    jac[2, 2] = -p[4]
    if with_s:
        s = x[3]
        jac[0, 0] += -p[19] * s / cm
        jac[0, 3] = -p[19] * (v - p[16]) / cm
        th5 = math.tanh((v - p[20]) / p[21])
        dsinf = 0.5 * (1.0 - th5 * th5) / p[21]
        jac[3, 0] = p[17] * dsinf / p[18]
        jac[3, 1] = 0.0
        jac[3, 2] = 0.0
        jac[3, 3] = -p[17] / p[18]
        jac[1, 3] = 0.0
        jac[2, 3] = 0.0


@njit(cache=True)
def _plant_rhs(x, p, out):
    v = x[0]
    n = x[1]
    h = x[2]
    xx = x[3]
    c = x[4]
    vs = plant_v_shift(v)
    am = plant_alpha_m(vs)
    bm = plant_beta_m(vs)
    minf = am / (am + bm)
    ina = p[0] * minf ** 3 * h * (v - p[5])
    ica = p[1] * xx * (v - p[6])
    ik = (p[2] * n ** 4 + p[3] * c / (0.5 + c)) * (v - p[7])
    il = p[4] * (v - p[8])
    out[0] = (-ina - ica - ik - il) / p[12]
    an = plant_alpha_n(vs)
    bn = plant_beta_n(vs)
    out[1] = (an * (1.0 - n) - bn * n) / 12.5
    ah = plant_alpha_h(vs)
    bh = plant_beta_h(vs)
    out[2] = (ah * (1.0 - h) - bh * h) / 12.5
    out[3] = (plant_x_inf(v) - xx) / p[11]
    out[4] = p[9] * (p[10] * xx * (p[6] - v) - c)


@njit(cache=True)
def _plant_jac(x, p, jac):
    v = x[0]
    n = x[1]
    h = x[2]
    xx = x[3]
    c = x[4]
    sv = 127.0 / 105.0
    vs = plant_v_shift(v)
    am = plant_alpha_m(vs)
    bm = plant_beta_m(vs)
    ah = plant_alpha_h(vs)
    bh = plant_beta_h(vs)
    an = plant_alpha_n(vs)
    bn = plant_beta_n(vs)
    dam, dbm, dah, dbh, dan, dbn = _plant_rates_d(vs)
    minf = am / (am + bm)
    dminf = (dam * bm - am * dbm) / (am + bm) ** 2 * sv
    ckca = c / (0.5 + c)
    dckca = 0.5 / (0.5 + c) ** 2
    cm = p[12]
    jac[0, 0] = (-p[0] * h * (3.0 * minf ** 2 * dminf * (v - p[5]) + minf ** 3)
                 - p[1] * xx - (p[2] * n ** 4 + p[3] * ckca) - p[4]) / cm
    jac[0, 1] = -4.0 * p[2] * n ** 3 * (v - p[7]) / cm
    jac[0, 2] = -p[0] * minf ** 3 * (v - p[5]) / cm
    jac[0, 3] = -p[1] * (v - p[6]) / cm
    jac[0, 4] = -p[3] * dckca * (v - p[7]) / cm
    jac[1, 0] = (dan * (1.0 - n) - dbn * n) * sv / 12.5
    jac[1, 1] = -(an + bn) / 12.5
    jac[1, 2] = 0.0
    jac[1, 3] = 0.0
    jac[1, 4] = 0.0
    jac[2, 0] = (dah * (1.0 - h) - dbh * h) * sv / 12.5
    jac[2, 1] = 0.0
    jac[2, 2] = -(ah + bh) / 12.5
    jac[2, 3] = 0.0
    jac[2, 4] = 0.0
    xinf = plant_x_inf(v)
    jac[3, 0] = 0.15 * xinf * (1.0 - xinf) / p[11]
    jac[3, 1] = 0.0
    jac[3, 2] = 0.0
    jac[3, 3] = -1.0 / p[11]
    jac[3, 4] = 0.0
    jac[4, 0] = -p[9] * p[10] * xx
    jac[4, 1] = 0.0
    jac[4, 2] = 0.0
    jac[4, 3] = p[9] * p[10] * (p[6] - v)
    jac[4, 4] = -p[9]


@njit(cache=True)
def rhs(mid, x, p, out):
    """Evaluate dx/dt for continuous kernel `mid` into `out`."""
    if mid == 0:
        out[0] = p[0] * x[0]
    elif mid == 1:
        out[0] = x[1]
        out[1] = -x[0]
    elif mid == 2:
        out[0] = p[0]
    elif mid == 3:
        out[0] = p[0] * x[0]
        out[1] = p[1] * x[1]
    elif mid == 4:
        out[0] = x[1]
        out[1] = (1.0 - x[0] * x[0]) * x[1] - x[0]
    elif mid == 5:
        out[0] = p[0] * (x[1] - x[0])
        out[1] = x[0] * (p[1] - x[2]) - x[1]
        out[2] = x[0] * x[1] - p[2] * x[2]
    elif mid == 6:
        _ml_rhs(x, p, out, False)
    elif mid == 7:
        _ml_rhs(x, p, out, True)
    elif mid == 8:
        v = x[0]
        out[0] = x[1] - p[0] * v ** 3 + p[1] * v * v - x[2] + p[7]
        out[1] = p[2] - p[3] * v * v - x[1]
        out[2] = p[4] * (p[5] * (v - p[6]) - x[2])
    elif mid == 9:
        v = x[0]
        out[0] = v - v ** 3 / 3.0 - x[1] + x[2] + p[0]
        out[1] = p[5] * (p[1] + v - p[2] * x[1])
        out[2] = p[6] * (p[3] - v - p[4] * x[2])
    else:
        _plant_rhs(x, p, out)


@njit(cache=True)
def jac(mid, x, p, out):
    """Evaluate the Jacobian of the vector field for kernel `mid` into `out`."""
    if mid == 0:
        out[0, 0] = p[0]
    elif mid == 1:
        out[0, 0] = 0.0
        out[0, 1] = 1.0
        out[1, 0] = -1.0
        out[1, 1] = 0.0
    elif mid == 2:
        out[0, 0] = 0.0
    elif mid == 3:
        out[0, 0] = p[0]
        out[0, 1] = 0.0
        out[1, 0] = 0.0
        out[1, 1] = p[1]
    elif mid == 4:
        out[0, 0] = 0.0
        out[0, 1] = 1.0
        out[1, 0] = -2.0 * x[0] * x[1] - 1.0
        out[1, 1] = 1.0 - x[0] * x[0]
    elif mid == 5:
        out[0, 0] = -p[0]
        out[0, 1] = p[0]
        out[0, 2] = 0.0
        out[1, 0] = p[1] - x[2]
        out[1, 1] = -1.0
        out[1, 2] = -x[0]
        out[2, 0] = x[1]
        out[2, 1] = x[0]
        out[2, 2] = -p[2]
    elif mid == 6:
        _ml_jac(x, p, out, False)
    elif mid == 7:
        _ml_jac(x, p, out, True)
    elif mid == 8:
        v = x[0]
        out[0, 0] = -3.0 * p[0] * v * v + 2.0 * p[1] * v
        out[0, 1] = 1.0
        out[0, 2] = -1.0
        out[1, 0] = -2.0 * p[3] * v
        out[1, 1] = -1.0
        out[1, 2] = 0.0
        out[2, 0] = p[4] * p[5]
        out[2, 1] = 0.0
        out[2, 2] = -p[4]
    elif mid == 9:
        v = x[0]
        out[0, 0] = 1.0 - v * v
        out[0, 1] = -1.0
        out[0, 2] = 1.0
        out[1, 0] = p[5]
        out[1, 1] = -p[5] * p[2]
        out[1, 2] = 0.0
        out[2, 0] = -p[6]
        out[2, 1] = 0.0
        out[2, 2] = -p[6] * p[4]
    else:
        _plant_jac(x, p, out)


# ---------------------------------------------------------------------------
# Discrete maps.  `map_lift` produces the unreduced image (no modular
# reduction) so callers can accumulate angular displacement for rotation
# numbers; `map_step` applies the reductions each map definition requires.

@njit(cache=True)
def map_lift(mid, x, p, out):
    if mid == 0:
        out[0] = p[0] * x[0]
    elif mid == 1:
        out[0] = x[0] + p[0]
    elif mid == 2:
        out[0] = p[1] * (x[0] - p[0]) + p[0]
        out[1] = x[1] + x[0]
    else:
        s = math.sin(2.0 * math.pi * x[1])
        out[0] = (1.0 - p[0]) * x[0] + p[1] * s * s
        out[1] = x[0] + x[1] + p[1] * s


@njit(cache=True)
def map_step(mid, x, p, out):
    map_lift(mid, x, p, out)
    if mid == 1:
        out[0] -= math.floor(out[0])
    elif mid == 2:
        out[0] -= math.floor(out[0])
        out[1] -= math.floor(out[1])
    elif mid == 3:
        out[1] -= math.floor(out[1])


@njit(cache=True)
def map_jac(mid, x, p, out):
    if mid == 0:
        out[0, 0] = p[0]
    elif mid == 1:
        out[0, 0] = 1.0
    elif mid == 2:
        out[0, 0] = p[1]
        out[0, 1] = 0.0
        out[1, 0] = 1.0
        out[1, 1] = 1.0
    else:
        y = x[1]
        out[0, 0] = 1.0 - p[0]
        out[0, 1] = 2.0 * math.pi * p[1] * math.sin(4.0 * math.pi * y)
        out[1, 0] = 1.0
        out[1, 1] = 1.0 + 2.0 * math.pi * p[1] * math.cos(2.0 * math.pi * y)


# Index of the angle-like coordinate whose lifted displacement defines the
# rotation number, per map kernel id.
MAP_ANGLE_INDEX = (0, 0, 1, 1)


# ---------------------------------------------------------------------------
# Observables.

@njit(cache=True)
def observe(kind, idx, scale, offset, x):
    """Return the observable value as (re, im)."""
    if kind == 0:
        return scale * x[idx] + offset, 0.0
    elif kind == 1:
        return scale * math.cos(x[idx]) + offset, 0.0
    else:
        a = 2.0 * math.pi * x[idx]
        return math.cos(a), math.sin(a)
