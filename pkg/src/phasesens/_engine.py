"""Compiled integration engine.

One adaptive Dormand-Prince 5(4) driver serves every continuous-time need in
the library: plain endpoint runs, dense sampling, trapezoidal accumulation of
harmonic averages on a uniform quadrature grid (evaluated through the
stepper's quartic interpolant), and joint state+tangent propagation.  Step
size is governed by a PI controller on the embedded 4th/5th-order error
estimate.  Absolute tolerance is pinned to the smallest positive normal
double so that tolerances behave as purely relative.

Discrete-time analogues (orbit, harmonic sum, rotation number, renormalized
Jacobian products) live at the bottom of the module.

Status codes shared by all drivers:
  0  completed
  1  trajectory escaped the divergence bound (truncated, not an error)
  2  step size underflow
  3  step budget exhausted or persistent non-finite state
"""

from __future__ import annotations

import math

import numpy as np
from numba import config as _nb_config
from numba import njit, prange

from ._kernels import jac, map_jac, map_lift, map_step, observe, rhs

_nb_config.THREADING_LAYER = "workqueue"

ATOL_FLOOR = 2.2250738585072014e-308  # smallest positive normal double

# Dormand-Prince 5(4) tableau.
_C2, _C3, _C4, _C5 = 0.2, 0.3, 0.8, 8.0 / 9.0
_A21 = 0.2
_A31, _A32 = 3.0 / 40.0, 9.0 / 40.0
_A41, _A42, _A43 = 44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0
_A51, _A52, _A53, _A54 = (19372.0 / 6561.0, -25360.0 / 2187.0,
                          64448.0 / 6561.0, -212.0 / 729.0)
_A61, _A62, _A63, _A64, _A65 = (9017.0 / 3168.0, -355.0 / 33.0,
                                46732.0 / 5247.0, 49.0 / 176.0,
                                -5103.0 / 18656.0)
_B1, _B3, _B4, _B5, _B6 = (35.0 / 384.0, 500.0 / 1113.0, 125.0 / 192.0,
                           -2187.0 / 6784.0, 11.0 / 84.0)
_E1, _E3, _E4, _E5, _E6, _E7 = (71.0 / 57600.0, -71.0 / 16695.0,
                                71.0 / 1920.0, -17253.0 / 339200.0,
                                22.0 / 525.0, -1.0 / 40.0)

# Quartic dense-output coefficients (per stage, powers theta..theta^4).
_P1 = (1.0, -8048581381.0 / 2820520608.0, 8663915743.0 / 2820520608.0,
       -12715105075.0 / 11282082432.0)
_P3 = (0.0, 131558114200.0 / 32700410799.0, -68118460800.0 / 10900136933.0,
       87487479700.0 / 32700410799.0)
_P4 = (0.0, -1754552775.0 / 470086768.0, 14199869525.0 / 1410260304.0,
       -10690763975.0 / 1880347072.0)
_P5 = (0.0, 127303824393.0 / 49829197408.0, -318862633887.0 / 49829197408.0,
       701980252875.0 / 199316789632.0)
_P6 = (0.0, -282668133.0 / 205662961.0, 2019193451.0 / 616988883.0,
       -1453857185.0 / 822651844.0)
_P7 = (0.0, 40617522.0 / 29380423.0, -110615467.0 / 29380423.0,
       69997945.0 / 29380423.0)

_SAFETY = 0.9
_MIN_FACTOR = 0.2
_MAX_FACTOR = 10.0


@njit(cache=True)
def _f(mode, n_state, mid, pvec, y, out, js):
    """Plain (mode 0) or state+tangent (mode 1) right-hand side."""
    if mode == 0:
        rhs(mid, y, pvec, out)
    else:
        rhs(mid, y[:n_state], pvec, out[:n_state])
        jac(mid, y[:n_state], pvec, js)
        for i in range(n_state):
            base = n_state + i * n_state
            for j in range(n_state):
                s = 0.0
                for k in range(n_state):
                    s += js[i, k] * y[n_state + k * n_state + j]
                out[base + j] = s


@njit(cache=True)
def _try_step(mode, n_state, mid, pvec, y, h, K, ytmp, ynew, rtol, js):
    """One DP54 attempt from y with step h.  K[0] holds f(y) on entry;
    fills K[1..6] and ynew, returns the scaled RMS error."""
    n = y.shape[0]
    for i in range(n):
        ytmp[i] = y[i] + h * _A21 * K[0, i]
    _f(mode, n_state, mid, pvec, ytmp, K[1], js)
    for i in range(n):
        ytmp[i] = y[i] + h * (_A31 * K[0, i] + _A32 * K[1, i])
    _f(mode, n_state, mid, pvec, ytmp, K[2], js)
    for i in range(n):
        ytmp[i] = y[i] + h * (_A41 * K[0, i] + _A42 * K[1, i] + _A43 * K[2, i])
    _f(mode, n_state, mid, pvec, ytmp, K[3], js)
    for i in range(n):
        ytmp[i] = y[i] + h * (_A51 * K[0, i] + _A52 * K[1, i]
                              + _A53 * K[2, i] + _A54 * K[3, i])
    _f(mode, n_state, mid, pvec, ytmp, K[4], js)
    for i in range(n):
        ytmp[i] = y[i] + h * (_A61 * K[0, i] + _A62 * K[1, i] + _A63 * K[2, i]
                              + _A64 * K[3, i] + _A65 * K[4, i])
    _f(mode, n_state, mid, pvec, ytmp, K[5], js)
    for i in range(n):
        ynew[i] = y[i] + h * (_B1 * K[0, i] + _B3 * K[2, i] + _B4 * K[3, i]
                              + _B5 * K[4, i] + _B6 * K[5, i])
    _f(mode, n_state, mid, pvec, ynew, K[6], js)
    err = 0.0
    for i in range(n):
        e = h * (_E1 * K[0, i] + _E3 * K[2, i] + _E4 * K[3, i]
                 + _E5 * K[4, i] + _E6 * K[5, i] + _E7 * K[6, i])
        ay = abs(y[i])
        an = abs(ynew[i])
        sc = ATOL_FLOOR + rtol * (ay if ay > an else an)
        e /= sc
        err += e * e
    err = math.sqrt(err / n)
    if not math.isfinite(err):
        err = 1e12
    return err


@njit(cache=True)
def _interp(y, K, h, theta, out):
    """Dense output at fraction theta of the accepted step that started at y."""
    t2 = theta * theta
    t3 = t2 * theta
    t4 = t3 * theta
    c1 = _P1[0] * theta + _P1[1] * t2 + _P1[2] * t3 + _P1[3] * t4
    c3 = _P3[0] * theta + _P3[1] * t2 + _P3[2] * t3 + _P3[3] * t4
    c4 = _P4[0] * theta + _P4[1] * t2 + _P4[2] * t3 + _P4[3] * t4
    c5 = _P5[0] * theta + _P5[1] * t2 + _P5[2] * t3 + _P5[3] * t4
    c6 = _P6[0] * theta + _P6[1] * t2 + _P6[2] * t3 + _P6[3] * t4
    c7 = _P7[0] * theta + _P7[1] * t2 + _P7[2] * t3 + _P7[3] * t4
    for i in range(y.shape[0]):
        out[i] = y[i] + h * (c1 * K[0, i] + c3 * K[2, i] + c4 * K[3, i]
                             + c5 * K[4, i] + c6 * K[5, i] + c7 * K[6, i])


@njit(cache=True)
def _initial_step(mode, n_state, mid, pvec, y, f0, t_span, rtol, js):
    n = y.shape[0]
    d0 = 0.0
    d1 = 0.0
    for i in range(n):
        sc = ATOL_FLOOR + rtol * abs(y[i])
        d0 += (y[i] / sc) ** 2
        d1 += (f0[i] / sc) ** 2
    d0 = math.sqrt(d0 / n)
    d1 = math.sqrt(d1 / n)
    # components at exactly 0 under pure-relative scaling overflow the
    # ratios; fall back to a conservative trial step instead
    if d0 < 1e-5 or d1 < 1e-5 or not math.isfinite(d0 + d1):
        h0 = 1e-6
    else:
        h0 = 0.01 * d0 / d1
    h0 = min(h0, t_span)
    if h0 <= 0.0 or not math.isfinite(h0):
        h0 = min(1e-6, t_span)
    y1 = np.empty(n)
    f1 = np.empty(n)
    for i in range(n):
        y1[i] = y[i] + h0 * f0[i]
    _f(mode, n_state, mid, pvec, y1, f1, js)
    d2 = 0.0
    for i in range(n):
        sc = ATOL_FLOOR + rtol * abs(y[i])
        d2 += ((f1[i] - f0[i]) / sc) ** 2
    d2 = math.sqrt(d2 / n) / h0
    dm = max(d1, d2)
    if dm <= 1e-15 or not math.isfinite(dm):
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / dm) ** 0.2
    h = min(100.0 * h0, h1)
    if not math.isfinite(h) or h <= 0.0:
        h = 1e-6
    return min(h, t_span)


@njit(cache=True)
def drive(mode, n_state, mid, pvec, y, t0, t1, rtol, bound, h0,
          sample_ts, samples_out,
          nq, qt0, qdt, okind, oidx, oscale, ooffset, omega0,
          max_steps):
    """Master adaptive loop.  Mutates `y` to the final state.

    Optional work done along the way:
      * dense samples at `sample_ts` (sorted ascending) written to
        `samples_out`, the count of filled rows is returned;
      * trapezoidal accumulation of g(x(t))*exp(-i*omega0*t) over the uniform
        grid qt0 + j*qdt, j = 0..nq (skipped when nq == 0); the returned
        accumulator is already multiplied by qdt.

    Returns (status, t_reached, n_samples_done, acc_re, acc_im, h_last,
    n_steps).
    """
    n = y.shape[0]
    K = np.empty((7, n))
    ytmp = np.empty(n)
    ynew = np.empty(n)
    xin = np.empty(n)
    js = np.empty((n_state, n_state))
    t = t0
    eps_t = 1e-10 * max(1.0, abs(t1))
    h_min = 1e-14 * abs(t1)

    sp = 0
    ns = sample_ts.shape[0]
    while sp < ns and sample_ts[sp] <= t0 + eps_t:
        for i in range(n):
            samples_out[sp, i] = y[i]
        sp += 1

    acc_re = 0.0
    acc_im = 0.0
    jq = 0
    if nq > 0 and qt0 <= t0 + eps_t:
        gre, gim = observe(okind, oidx, oscale, ooffset, y)
        co = math.cos(omega0 * qt0)
        si = math.sin(omega0 * qt0)
        acc_re += 0.5 * (gre * co + gim * si)
        acc_im += 0.5 * (gim * co - gre * si)
        jq = 1

    _f(mode, n_state, mid, pvec, y, K[0], js)
    if h0 > 0.0:
        h = min(h0, t1 - t0)
    else:
        h = _initial_step(mode, n_state, mid, pvec, y, K[0], t1 - t0, rtol, js)
    err_old = 1e-4
    just_rejected = False
    status = 0
    n_steps = 0

    while t < t1 - eps_t:
        if n_steps >= max_steps:
            status = 3
            break
        if h < h_min:
            status = 2
            break
        final = False
        if t + h >= t1:
            h = t1 - t
            final = True
        err = _try_step(mode, n_state, mid, pvec, y, h, K, ytmp, ynew, rtol, js)
        n_steps += 1
        if err > 1.0:
            fac = _SAFETY * err ** -0.2
            if fac < _MIN_FACTOR:
                fac = _MIN_FACTOR
            h *= fac
            just_rejected = True
            continue
        t_new = t1 if final else t + h

        while sp < ns and sample_ts[sp] <= t_new + eps_t:
            theta = (sample_ts[sp] - t) / h
            if theta > 1.0:
                theta = 1.0
            elif theta < 0.0:
                theta = 0.0
            _interp(y, K, h, theta, xin)
            for i in range(n):
                samples_out[sp, i] = xin[i]
            sp += 1
        while jq <= nq:
            tj = qt0 + jq * qdt
            if tj > t_new + eps_t:
                break
            theta = (tj - t) / h
            if theta > 1.0:
                theta = 1.0
            elif theta < 0.0:
                theta = 0.0
            _interp(y, K, h, theta, xin)
            gre, gim = observe(okind, oidx, oscale, ooffset, xin)
            w = 0.5 if (jq == 0 or jq == nq) else 1.0
            co = math.cos(omega0 * tj)
            si = math.sin(omega0 * tj)
            acc_re += w * (gre * co + gim * si)
            acc_im += w * (gim * co - gre * si)
            jq += 1

        for i in range(n):
            y[i] = ynew[i]
            K[0, i] = K[6, i]
        t = t_new

        amax = 0.0
        for i in range(n_state):
            a = abs(y[i])
            if a > amax:
                amax = a
        if amax > bound:
            status = 1
            break

        if err == 0.0:
            fac = _MAX_FACTOR
        else:
            fac = _SAFETY * err ** -0.14 * err_old ** 0.08
        if just_rejected and fac > 1.0:
            fac = 1.0
        if fac > _MAX_FACTOR:
            fac = _MAX_FACTOR
        elif fac < _MIN_FACTOR:
            fac = _MIN_FACTOR
        h *= fac
        err_old = max(err, 1e-4)
        just_rejected = False

    return status, t, sp, acc_re * qdt, acc_im * qdt, h, n_steps


@njit(cache=True)
def ftle_continuous(mid, pvec, x0, t_final, renorm_dt, rtol, bound, max_steps):
    """Log-diagonals of the QR-renormalized tangent propagation over
    [0, t_final].  Returns (log_r, x_end, status)."""
    n_state = x0.shape[0]
    n = n_state + n_state * n_state
    y = np.zeros(n)
    for i in range(n_state):
        y[i] = x0[i]
        y[n_state + i * n_state + i] = 1.0
    log_r = np.zeros(n_state)
    no_samples = np.empty(0)
    no_out = np.empty((0, n))
    t = 0.0
    h = 0.0
    status = 0
    w = np.empty((n_state, n_state))
    while t < t_final * (1.0 - 1e-14):
        t_seg = t + renorm_dt
        if t_seg > t_final:
            t_seg = t_final
        status, t, _, _, _, h, _ = drive(
            1, n_state, mid, pvec, y, t, t_seg, rtol, bound, h,
            no_samples, no_out, 0, 0.0, 1.0, 0, 0, 1.0, 0.0, 0.0, max_steps)
        if status != 0:
            break
        for i in range(n_state):
            for j in range(n_state):
                w[i, j] = y[n_state + i * n_state + j]
        q, r = np.linalg.qr(w)
        for i in range(n_state):
            log_r[i] += math.log(abs(r[i, i]))
        for i in range(n_state):
            for j in range(n_state):
                y[n_state + i * n_state + j] = q[i, j]
    return log_r, y[:n_state].copy(), status


# ---------------------------------------------------------------------------
# Discrete-map drivers.

@njit(cache=True)
def map_orbit(mid, pvec, x0, n_steps, out):
    """Iterate a map, storing the full orbit into out[(n_steps+1, N)].
    Returns (status, steps_done)."""
    nd = x0.shape[0]
    x = x0.copy()
    tmp = np.empty(nd)
    for i in range(nd):
        out[0, i] = x0[i]
    for t in range(n_steps):
        map_step(mid, x, pvec, tmp)
        ok = True
        for i in range(nd):
            if not math.isfinite(tmp[i]):
                ok = False
        if not ok:
            return 3, t + 1
        for i in range(nd):
            x[i] = tmp[i]
            out[t + 1, i] = tmp[i]
    return 0, n_steps


@njit(cache=True)
def map_fourier_sum(mid, pvec, okind, oidx, oscale, ooffset, x0, horizon,
                    omega0, bound):
    """(1/T)-unnormalized harmonic sum over t = 0..horizon inclusive.
    Returns (acc_re, acc_im, status, x_end)."""
    nd = x0.shape[0]
    x = x0.copy()
    tmp = np.empty(nd)
    acc_re = 0.0
    acc_im = 0.0
    status = 0
    for t in range(horizon + 1):
        gre, gim = observe(okind, oidx, oscale, ooffset, x)
        ph = omega0 * t
        co = math.cos(ph)
        si = math.sin(ph)
        acc_re += gre * co + gim * si
        acc_im += gim * co - gre * si
        if t < horizon:
            map_step(mid, x, pvec, tmp)
            amax = 0.0
            ok = True
            for i in range(nd):
                if not math.isfinite(tmp[i]):
                    ok = False
                a = abs(tmp[i])
                if a > amax:
                    amax = a
            if not ok:
                status = 3
                break
            if amax > bound:
                status = 1
                break
            for i in range(nd):
                x[i] = tmp[i]
    return acc_re, acc_im, status, x


@njit(cache=True)
def map_rotation(mid, pvec, angle_idx, x0, n_transient, n_iters):
    """Mean lifted angular displacement per iterate after a transient.
    Returns (nu, status)."""
    nd = x0.shape[0]
    x = x0.copy()
    tmp = np.empty(nd)
    for _ in range(n_transient):
        map_step(mid, x, pvec, tmp)
        for i in range(nd):
            x[i] = tmp[i]
    disp = 0.0
    for t in range(n_iters):
        map_lift(mid, x, pvec, tmp)
        d = tmp[angle_idx] - x[angle_idx]
        if not math.isfinite(d):
            return 0.0, 3
        disp += d
        for i in range(nd):
            x[i] = tmp[i]
        # apply the same reductions map_step would
        if mid == 1:
            x[0] -= math.floor(x[0])
        elif mid == 2:
            x[0] -= math.floor(x[0])
            x[1] -= math.floor(x[1])
        elif mid == 3:
            x[1] -= math.floor(x[1])
    return disp / n_iters, 0


@njit(cache=True)
def map_tangent_product(mid, pvec, x0, n_steps, qr_every):
    """QR-renormalized product of map Jacobians along the orbit of x0.
    Returns (log_r, x_end, status)."""
    nd = x0.shape[0]
    x = x0.copy()
    tmp = np.empty(nd)
    w = np.eye(nd)
    w2 = np.empty((nd, nd))
    jm = np.empty((nd, nd))
    log_r = np.zeros(nd)
    since_qr = 0
    for t in range(n_steps):
        map_jac(mid, x, pvec, jm)
        for i in range(nd):
            for j in range(nd):
                s = 0.0
                for k in range(nd):
                    s += jm[i, k] * w[k, j]
                w2[i, j] = s
        for i in range(nd):
            for j in range(nd):
                w[i, j] = w2[i, j]
        since_qr += 1
        if since_qr == qr_every or t == n_steps - 1:
            q, r = np.linalg.qr(w)
            for i in range(nd):
                log_r[i] += math.log(abs(r[i, i]))
            for i in range(nd):
                for j in range(nd):
                    w[i, j] = q[i, j]
            since_qr = 0
        map_step(mid, x, pvec, tmp)
        ok = True
        for i in range(nd):
            if not math.isfinite(tmp[i]):
                ok = False
        if not ok:
            return log_r, x, 3
        for i in range(nd):
            x[i] = tmp[i]
    return log_r, x, 0


@njit(cache=True)
def map_plain_product(mid, pvec, x0, n_steps):
    """Unrenormalized product of map Jacobians (fundamental matrix).
    Returns (M, x_end, status)."""
    nd = x0.shape[0]
    x = x0.copy()
    tmp = np.empty(nd)
    m = np.eye(nd)
    m2 = np.empty((nd, nd))
    jm = np.empty((nd, nd))
    for t in range(n_steps):
        map_jac(mid, x, pvec, jm)
        for i in range(nd):
            for j in range(nd):
                s = 0.0
                for k in range(nd):
                    s += jm[i, k] * m[k, j]
                m2[i, j] = s
        for i in range(nd):
            for j in range(nd):
                m[i, j] = m2[i, j]
        map_step(mid, x, pvec, tmp)
        ok = True
        for i in range(nd):
            if not math.isfinite(tmp[i]):
                ok = False
        if not ok:
            return m, x, 3
        for i in range(nd):
            x[i] = tmp[i]
    return m, x, 0


# ---------------------------------------------------------------------------
# Batch drivers (grid fields, sensitivity sweeps).  Each element is computed
# independently into its own output slot, so results are bit-identical for
# any thread count.

@njit(cache=True, parallel=True)
def phase_batch_continuous(mid, pvec, points, rtol, bound, okind, oidx,
                           oscale, ooffset, omega0, t_total, qt0, nq,
                           max_steps):
    """Harmonic averages for a batch of initial states.
    Returns (acc_re, acc_im, status) arrays; accumulators are the trapezoid
    integral over [qt0, t_total] (divide by the window to get the average)."""
    npts = points.shape[0]
    out_re = np.empty(npts)
    out_im = np.empty(npts)
    out_status = np.empty(npts, dtype=np.int64)
    qdt = (t_total - qt0) / nq
    for i in prange(npts):
        y = points[i].copy()
        no_samples = np.empty(0)
        no_out = np.empty((0, y.shape[0]))
        status, _, _, are, aim, _, _ = drive(
            0, y.shape[0], mid, pvec, y, 0.0, t_total, rtol, bound, 0.0,
            no_samples, no_out, nq, qt0, qdt, okind, oidx, oscale, ooffset,
            omega0, max_steps)
        out_re[i] = are
        out_im[i] = aim
        out_status[i] = status
    return out_re, out_im, out_status


@njit(cache=True, parallel=True)
def phase_batch_discrete(mid, pvec, points, bound, okind, oidx, oscale,
                         ooffset, omega0, horizon):
    """Harmonic sums for a batch of map initial states."""
    npts = points.shape[0]
    out_re = np.empty(npts)
    out_im = np.empty(npts)
    out_status = np.empty(npts, dtype=np.int64)
    for i in prange(npts):
        are, aim, status, _ = map_fourier_sum(
            mid, pvec, okind, oidx, oscale, ooffset, points[i].copy(),
            horizon, omega0, bound)
        out_re[i] = are
        out_im[i] = aim
        out_status[i] = status
    return out_re, out_im, out_status


@njit(cache=True, parallel=True)
def ftle_batch_continuous(mid, pvec, points, t_final, renorm_dt, rtol, bound,
                          max_steps):
    """Largest finite-time exponent for a batch of initial states."""
    npts = points.shape[0]
    out = np.empty(npts)
    out_status = np.empty(npts, dtype=np.int64)
    for i in prange(npts):
        log_r, _, status = ftle_continuous(
            mid, pvec, points[i].copy(), t_final, renorm_dt, rtol, bound,
            max_steps)
        big = log_r[0]
        for j in range(1, log_r.shape[0]):
            if log_r[j] > big:
                big = log_r[j]
        out[i] = big / t_final
        out_status[i] = status
    return out, out_status


@njit(cache=True, parallel=True)
def ftle_batch_discrete(mid, pvec, points, n_steps, qr_every):
    npts = points.shape[0]
    out = np.empty(npts)
    out_status = np.empty(npts, dtype=np.int64)
    for i in prange(npts):
        log_r, _, status = map_tangent_product(
            mid, pvec, points[i].copy(), n_steps, qr_every)
        big = log_r[0]
        for j in range(1, log_r.shape[0]):
            if log_r[j] > big:
                big = log_r[j]
        out[i] = big / n_steps
        out_status[i] = status
    return out, out_status
