"""Jitted kernels for exact simulation of the jump-ODE process.

Between jumps the nutrient y follows dy/dt = G_n(y) at fixed count n while
the cumulative jump hazard Lambda(t) = int_0^t n (b + D + d)(y(s)) ds is
integrated alongside; the next jump fires when Lambda crosses an Exp(1)
draw.  This stays exact (up to the ODE tolerance) even when d(y) is
unbounded near y = 0, where no finite majorant rate exists for thinning.

All randomness comes from the counter-based draws in ``_rng``; a trajectory
is a pure function of (params, initial state, seed, tolerance).
"""
from __future__ import annotations

import numpy as np
from numba import njit, prange

from ._rng import exp1, stream_key, u01

# event kind codes (mirrored by simulator.EventKind)
BIRTH = 0
DEATH = 1
WASHOUT = 2
EXTINCTION = 3
HIT_ZERO = 4
LEAVE_ZERO = 5

# _advance status codes
ADV_REACHED = 0
ADV_JUMP = 1
ADV_ZERO = 2
ADV_FAIL = 3

# next-jump codes
NJ_CAPPED = 0
NJ_BIRTH = 1
NJ_WASHOUT = 2
NJ_DEATH = 3
NJ_HARD_EXTINCT = 4
NJ_FAIL = 5

_INF_TIME = 1.0e300

# Dormand-Prince 5(4) tableau
_A21 = 1.0 / 5.0
_A31, _A32 = 3.0 / 40.0, 9.0 / 40.0
_A41, _A42, _A43 = 44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0
_A51, _A52, _A53, _A54 = 19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0
_A61, _A62, _A63, _A64, _A65 = (9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0,
                                49.0 / 176.0, -5103.0 / 18656.0)
_B1, _B3, _B4, _B5, _B6 = 35.0 / 384.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0
_E1, _E3, _E4, _E5, _E6, _E7 = (71.0 / 57600.0, -71.0 / 16695.0, 71.0 / 1920.0,
                                -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0)


@njit(cache=True, inline="always")
def _b_of(pf, birth_kind, tab_y, tab_b, y):
    if y <= 0.0:
        return 0.0
    if birth_kind == 0:
        return pf[4] * y / (pf[5] + y)
    if y >= tab_y[-1]:
        return tab_b[-1]
    return np.interp(y, tab_y, tab_b)


@njit(cache=True, inline="always")
def _rhs(pf, birth_kind, tab_y, tab_b, nf, y, hazard_on):
    """Drift of y and, if requested, the total jump hazard at count nf."""
    D = pf[0]
    ystar = pf[1]
    if y > 0.0:
        b = _b_of(pf, birth_kind, tab_y, tab_b, y)
        g = D * (ystar - y) - nf * (b / pf[2] + pf[3])
    else:
        b = 0.0
        g = D * ystar
    hz = 0.0
    if hazard_on:
        # clamp the death-rate evaluation away from the singularity at 0;
        # the exact boundary behaviour is handled by the event logic
        yy = y
        floor = 1e-14 * ystar
        if yy < floor:
            yy = floor
        d = pf[6]
        if pf[7] > 0.0:
            d += pf[7] * yy ** (-pf[8])
        hz = nf * (b + D + d)
    return g, hz


@njit(cache=True)
def _dp_step(pf, birth_kind, tab_y, tab_b, nf, y, l, h, hazard_on):
    """One Dormand-Prince step for (y, Lambda); returns value and error."""
    g1, z1 = _rhs(pf, birth_kind, tab_y, tab_b, nf, y, hazard_on)
    g2, z2 = _rhs(pf, birth_kind, tab_y, tab_b, nf, y + h * (_A21 * g1), hazard_on)
    g3, z3 = _rhs(pf, birth_kind, tab_y, tab_b, nf, y + h * (_A31 * g1 + _A32 * g2), hazard_on)
    g4, z4 = _rhs(pf, birth_kind, tab_y, tab_b, nf,
                  y + h * (_A41 * g1 + _A42 * g2 + _A43 * g3), hazard_on)
    g5, z5 = _rhs(pf, birth_kind, tab_y, tab_b, nf,
                  y + h * (_A51 * g1 + _A52 * g2 + _A53 * g3 + _A54 * g4), hazard_on)
    g6, z6 = _rhs(pf, birth_kind, tab_y, tab_b, nf,
                  y + h * (_A61 * g1 + _A62 * g2 + _A63 * g3 + _A64 * g4 + _A65 * g5),
                  hazard_on)
    y1 = y + h * (_B1 * g1 + _B3 * g3 + _B4 * g4 + _B5 * g5 + _B6 * g6)
    l1 = l + h * (_B1 * z1 + _B3 * z3 + _B4 * z4 + _B5 * z5 + _B6 * z6)
    g7, z7 = _rhs(pf, birth_kind, tab_y, tab_b, nf, y1, hazard_on)
    ey = h * (_E1 * g1 + _E3 * g3 + _E4 * g4 + _E5 * g5 + _E6 * g6 + _E7 * g7)
    el = h * (_E1 * z1 + _E3 * z3 + _E4 * z4 + _E5 * z5 + _E6 * z6 + _E7 * z7)
    return y1, l1, ey, el


@njit(cache=True)
def _advance(pf, birth_kind, tab_y, tab_b, nf, y, t, t1, E_rem, rtol, atol, hazard_on):
    """Integrate (y, Lambda) from t toward t1 at fixed count nf.

    Returns (status, t_out, y_out, lam_out):
      ADV_REACHED  reached t1; lam_out = accumulated hazard
      ADV_JUMP     hazard crossed E_rem at t_out; y_out = y at the jump
      ADV_ZERO     y reached 0 at t_out before the hazard crossed
      ADV_FAIL     tolerance not met at minimum step size
    """
    ystar = pf[1]
    ytiny = 1e-13 * ystar
    lam = 0.0
    if t1 <= t:
        return ADV_REACHED, t1, y, lam
    h = t1 - t
    while True:
        if t >= t1 - 1e-15 * (1.0 + abs(t1)):
            return ADV_REACHED, t1, y, lam
        hmin = 1e-14 * (abs(t) + 1.0)
        g0, hz0 = _rhs(pf, birth_kind, tab_y, tab_b, nf, y, hazard_on)
        if g0 < 0.0 and y <= ytiny:
            return ADV_ZERO, t, 0.0, lam
        if h > t1 - t:
            h = t1 - t
        if g0 < 0.0 and y > 0.0:
            # do not overshoot the y = 0 boundary by more than ~10%
            tcap = -0.9 * y / g0
            if h > tcap:
                h = tcap
        if hazard_on and hz0 > 0.0:
            hcap = 2.0 * (E_rem - lam) / hz0
            if h > hcap:
                h = hcap
        if h < hmin:
            h = hmin
        y1, l1, ey, el = _dp_step(pf, birth_kind, tab_y, tab_b, nf, y, lam, h, hazard_on)
        sc = atol + rtol * max(abs(y), abs(y1))
        err = abs(ey) / sc
        if hazard_on:
            scl = atol + rtol * (max(lam, l1) + 1.0)
            e2 = abs(el) / scl
            if e2 > err:
                err = e2
        if not (err <= 1.0):  # rejects NaN as well
            if h <= hmin * 1.0001:
                return ADV_FAIL, t, y, lam
            if err == err and err < 1e8:
                fac = 0.9 * err ** -0.2
                if fac < 0.2:
                    fac = 0.2
            else:
                fac = 0.2
            h *= fac
            continue
        crossed_zero = (g0 < 0.0) and (y1 < ytiny)
        crossed_haz = hazard_on and (l1 >= E_rem)
        if crossed_zero or crossed_haz:
            # locate the earliest event by bisection on the step length;
            # y is monotone at fixed n and Lambda is non-decreasing
            lo = 0.0
            hi = h
            for _ in range(48):
                mid = 0.5 * (lo + hi)
                ym, lm, _, _ = _dp_step(pf, birth_kind, tab_y, tab_b, nf, y, lam, mid, hazard_on)
                if ((g0 < 0.0 and ym < ytiny)
                        or (hazard_on and lm >= E_rem)):
                    hi = mid
                else:
                    lo = mid
            ym, lm, _, _ = _dp_step(pf, birth_kind, tab_y, tab_b, nf, y, lam, hi, hazard_on)
            if hazard_on and lm >= E_rem:
                if ym < 0.0:
                    ym = 0.0
                return ADV_JUMP, t + hi, ym, E_rem
            if g0 < 0.0 and ym < ytiny:
                return ADV_ZERO, t + hi, 0.0, lm
            return ADV_JUMP, t + hi, ym, E_rem
        t += h
        y = y1
        lam = l1
        fac = 5.0
        if err > 1e-10:
            fac = 0.9 * err ** -0.2
            if fac > 5.0:
                fac = 5.0
            if fac < 0.2:
                fac = 0.2
        h *= fac


@njit(cache=True)
def _flow_core(pf, birth_kind, tab_y, tab_b, n, y0, dt, rtol, atol):
    """Deterministic nutrient flow over a duration dt at fixed count n."""
    D = pf[0]
    ystar = pf[1]
    eta = pf[3]
    if dt <= 0.0:
        return 0, y0
    if n == 0:
        return 0, ystar - (ystar - y0) * np.exp(-D * dt)
    t = 0.0
    y = y0
    while t < dt * (1.0 - 1e-15):
        if y <= 0.0:
            if D * ystar - n * eta <= 0.0:
                return 0, 0.0  # pinned at the boundary at this fixed count
            y = 0.0
        st, t, y, _ = _advance(pf, birth_kind, tab_y, tab_b, float(n), y, t, dt,
                               _INF_TIME, rtol, atol, False)
        if st == ADV_FAIL:
            return 3, y
        if st == ADV_ZERO:
            y = 0.0
    return 0, y


@njit(cache=True, inline="always")
def _d_at_zero(pf, hard):
    """d(0) as a float; np.inf when death is instantaneous without nutrient."""
    if hard == 1:
        return np.inf
    if pf[7] > 0.0 and pf[8] > 0.0:
        return np.inf
    return pf[6] + pf[7]


@njit(cache=True)
def _next_jump_core(pf, birth_kind, hard, tab_y, tab_b, n, y, t0, t_cap, key, ctr,
                    rtol, atol):
    """Next population event from state (n, y) at time t0, capped at t_cap.

    Returns (code, t_event, y_at_event, ctr).  NJ_CAPPED means no event
    before t_cap, with y_at_event the nutrient level at the cap.
    """
    D = pf[0]
    ystar = pf[1]
    eta = pf[3]
    t = t0
    yy = y
    if hard == 1 and yy <= 0.0 and n >= 1:
        return NJ_HARD_EXTINCT, t, 0.0, ctr
    while True:
        if yy <= 0.0 and D * ystar - n * eta <= 0.0:
            # nutrient pinned at zero until the count drops low enough
            d0 = _d_at_zero(pf, hard)
            if np.isinf(d0):
                return NJ_DEATH, t, 0.0, ctr  # instantaneous death
            rate = n * (D + d0)
            E = exp1(key, ctr)
            ctr += 1
            dtn = E / rate
            if t + dtn >= t_cap:
                return NJ_CAPPED, t_cap, 0.0, ctr
            t += dtn
            u = u01(key, ctr) * (D + d0)
            ctr += 1
            if u < D:
                return NJ_WASHOUT, t, 0.0, ctr
            return NJ_DEATH, t, 0.0, ctr
        E = exp1(key, ctr)
        ctr += 1
        st, t1, y1, _ = _advance(pf, birth_kind, tab_y, tab_b, float(n), yy, t, t_cap,
                                 E, rtol, atol, True)
        if st == ADV_FAIL:
            return NJ_FAIL, t1, y1, ctr
        if st == ADV_REACHED:
            return NJ_CAPPED, t_cap, y1, ctr
        if st == ADV_ZERO:
            t = t1
            yy = 0.0
            if hard == 1:
                return NJ_HARD_EXTINCT, t, 0.0, ctr
            continue
        # jump fired at (t1, y1): pick its kind proportionally to the rates
        b = _b_of(pf, birth_kind, tab_y, tab_b, y1)
        d = pf[6]
        if pf[7] > 0.0:
            yc = y1
            floor = 1e-14 * ystar
            if yc < floor:
                yc = floor
            d += pf[7] * yc ** (-pf[8])
        u = u01(key, ctr) * (b + D + d)
        ctr += 1
        if u < b:
            return NJ_BIRTH, t1, y1, ctr
        if u < b + D:
            return NJ_WASHOUT, t1, y1, ctr
        return NJ_DEATH, t1, y1, ctr


@njit(cache=True)
def _push(ev_t, ev_k, ev_n, ev_y, ne, t, k, n, y):
    if ne >= ev_t.shape[0]:
        cap = 2 * ev_t.shape[0]
        a = np.empty(cap)
        a[:ne] = ev_t
        ev_t = a
        b = np.empty(cap, np.int64)
        b[:ne] = ev_k
        ev_k = b
        c = np.empty(cap, np.int64)
        c[:ne] = ev_n
        ev_n = c
        d = np.empty(cap)
        d[:ne] = ev_y
        ev_y = d
    ev_t[ne] = t
    ev_k[ne] = k
    ev_n[ne] = n
    ev_y[ne] = y
    return ev_t, ev_k, ev_n, ev_y, ne + 1


@njit(cache=True)
def _simulate_core(pf, birth_kind, hard, tab_y, tab_b, n0, y0, horizon, key,
                   rtol, atol, sample_ts):
    """One full trajectory up to the horizon.

    Returns (status, ev_t, ev_k, ev_n, ev_y, samp_n, samp_y, absorbed,
    t_abs, y_min, y_max, y_max_pre_abs, ndraws); event arrays are trimmed.
    """
    D = pf[0]
    ystar = pf[1]
    eta = pf[3]
    ev_t = np.empty(64)
    ev_k = np.empty(64, np.int64)
    ev_n = np.empty(64, np.int64)
    ev_y = np.empty(64)
    ne = 0
    ns = sample_ts.shape[0]
    samp_n = np.zeros(ns, np.int64)
    samp_y = np.zeros(ns)
    si = 0
    t = 0.0
    n = n0
    y = y0 if y0 > 0.0 else 0.0
    ymin = y
    ymax = y
    ymax_pre = y
    absorbed = False
    t_abs = np.inf
    status = 0
    ctr = np.int64(0)
    E = exp1(key, ctr)
    ctr += 1
    lam = 0.0
    if hard == 1 and y <= 0.0 and n >= 1:
        ev_t, ev_k, ev_n, ev_y, ne = _push(ev_t, ev_k, ev_n, ev_y, ne, t, EXTINCTION, 0, 0.0)
        n = 0
        absorbed = True
        t_abs = t
    while True:
        if t >= horizon * (1.0 - 1e-15) and si >= ns:
            break
        t_next = horizon
        if si < ns and sample_ts[si] < t_next:
            t_next = sample_ts[si]
        if t_next <= t:
            # sample time at or before the current instant
            if si < ns:
                samp_n[si] = n
                samp_y[si] = y
                si += 1
                continue
            break
        if n == 0:
            # absorbed: the nutrient relaxes toward ystar
            y = ystar - (ystar - y) * np.exp(-D * (t_next - t))
            t = t_next
            if y < ymin:
                ymin = y
            if y > ymax:
                ymax = y
            if si < ns and t >= sample_ts[si] * (1.0 - 1e-15):
                samp_n[si] = 0
                samp_y[si] = y
                si += 1
            continue
        if y <= 0.0 and D * ystar - n * eta <= 0.0:
            # nutrient pinned at zero (consumption beats the inflow)
            if hard == 1:
                ev_t, ev_k, ev_n, ev_y, ne = _push(ev_t, ev_k, ev_n, ev_y, ne,
                                                   t, EXTINCTION, 0, 0.0)
                n = 0
                absorbed = True
                t_abs = t
                continue
            d0 = _d_at_zero(pf, hard)
            if np.isinf(d0):
                # instantaneous deaths until the inflow wins again
                while n >= 1 and D * ystar - n * eta <= 0.0:
                    n -= 1
                    ev_t, ev_k, ev_n, ev_y, ne = _push(ev_t, ev_k, ev_n, ev_y, ne,
                                                       t, DEATH, n, 0.0)
                if n == 0:
                    ev_t, ev_k, ev_n, ev_y, ne = _push(ev_t, ev_k, ev_n, ev_y, ne,
                                                       t, EXTINCTION, 0, 0.0)
                    absorbed = True
                    t_abs = t
                else:
                    ev_t, ev_k, ev_n, ev_y, ne = _push(ev_t, ev_k, ev_n, ev_y, ne,
                                                       t, LEAVE_ZERO, n, 0.0)
                E = exp1(key, ctr)
                ctr += 1
                lam = 0.0
                continue
            rate = n * (D + d0)
            dt_need = (E - lam) / rate
            if t + dt_need >= t_next:
                lam += rate * (t_next - t)
                t = t_next
                if si < ns and t >= sample_ts[si] * (1.0 - 1e-15):
                    samp_n[si] = n
                    samp_y[si] = 0.0
                    si += 1
                continue
            t = t + dt_need
            u = u01(key, ctr) * (D + d0)
            ctr += 1
            n -= 1
            if u < D:
                ev_t, ev_k, ev_n, ev_y, ne = _push(ev_t, ev_k, ev_n, ev_y, ne,
                                                   t, WASHOUT, n, 0.0)
            else:
                ev_t, ev_k, ev_n, ev_y, ne = _push(ev_t, ev_k, ev_n, ev_y, ne,
                                                   t, DEATH, n, 0.0)
            if n == 0:
                ev_t, ev_k, ev_n, ev_y, ne = _push(ev_t, ev_k, ev_n, ev_y, ne,
                                                   t, EXTINCTION, 0, 0.0)
                absorbed = True
                t_abs = t
            elif D * ystar - n * eta > 0.0:
                ev_t, ev_k, ev_n, ev_y, ne = _push(ev_t, ev_k, ev_n, ev_y, ne,
                                                   t, LEAVE_ZERO, n, 0.0)
            E = exp1(key, ctr)
            ctr += 1
            lam = 0.0
            continue
        st, t2, y2, lam_used = _advance(pf, birth_kind, tab_y, tab_b, float(n),
                                        y, t, t_next, E - lam, rtol, atol, True)
        if st == ADV_FAIL:
            status = 3
            break
        t = t2
        y = y2
        if y < ymin:
            ymin = y
        if y > ymax:
            ymax = y
        if y > ymax_pre:
            ymax_pre = y
        if st == ADV_REACHED:
            lam += lam_used
            if si < ns and t >= sample_ts[si] * (1.0 - 1e-15):
                samp_n[si] = n
                samp_y[si] = y
                si += 1
            continue
        if st == ADV_ZERO:
            lam += lam_used
            y = 0.0
            ev_t, ev_k, ev_n, ev_y, ne = _push(ev_t, ev_k, ev_n, ev_y, ne,
                                               t, HIT_ZERO, n, 0.0)
            if hard == 1:
                ev_t, ev_k, ev_n, ev_y, ne = _push(ev_t, ev_k, ev_n, ev_y, ne,
                                                   t, EXTINCTION, 0, 0.0)
                n = 0
                absorbed = True
                t_abs = t
            continue
        # jump fired at (t, y)
        b = _b_of(pf, birth_kind, tab_y, tab_b, y)
        dd = pf[6]
        if pf[7] > 0.0:
            yc = y
            floor = 1e-14 * ystar
            if yc < floor:
                yc = floor
            dd += pf[7] * yc ** (-pf[8])
        u = u01(key, ctr) * (b + D + dd)
        ctr += 1
        if u < b:
            n += 1
            ev_t, ev_k, ev_n, ev_y, ne = _push(ev_t, ev_k, ev_n, ev_y, ne,
                                               t, BIRTH, n, y)
        elif u < b + D:
            n -= 1
            ev_t, ev_k, ev_n, ev_y, ne = _push(ev_t, ev_k, ev_n, ev_y, ne,
                                               t, WASHOUT, n, y)
        else:
            n -= 1
            ev_t, ev_k, ev_n, ev_y, ne = _push(ev_t, ev_k, ev_n, ev_y, ne,
                                               t, DEATH, n, y)
        if n == 0:
            ev_t, ev_k, ev_n, ev_y, ne = _push(ev_t, ev_k, ev_n, ev_y, ne,
                                               t, EXTINCTION, 0, y)
            absorbed = True
            t_abs = t
        E = exp1(key, ctr)
        ctr += 1
        lam = 0.0
    return (status, ev_t[:ne].copy(), ev_k[:ne].copy(), ev_n[:ne].copy(),
            ev_y[:ne].copy(), samp_n, samp_y, absorbed, t_abs,
            ymin, ymax, ymax_pre, ctr)


@njit(cache=True, parallel=True)
def _ensemble_core(pf, birth_kind, hard, tab_y, tab_b, n_init, y_init, horizon,
                   base_seed, rtol, atol, sample_ts):
    """Independent trajectories with per-path counter streams.

    Aggregation is order-independent: every path writes only its own slot.
    """
    P = n_init.shape[0]
    ns = sample_ts.shape[0]
    stat = np.zeros(P, np.int64)
    t_abs = np.full(P, np.inf)
    y_lo = np.zeros(P)
    y_hi = np.zeros(P)
    y_hi_pre = np.zeros(P)
    S_n = np.zeros((P, ns), np.int64)
    S_y = np.zeros((P, ns))
    n_events = np.zeros(P, np.int64)
    for p in prange(P):
        key = stream_key(base_seed, p)
        out = _simulate_core(pf, birth_kind, hard, tab_y, tab_b,
                             n_init[p], y_init[p], horizon, key, rtol, atol,
                             sample_ts)
        stat[p] = out[0]
        if out[7]:
            t_abs[p] = out[8]
        y_lo[p] = out[9]
        y_hi[p] = out[10]
        y_hi_pre[p] = out[11]
        for j in range(ns):
            S_n[p, j] = out[5][j]
            S_y[p, j] = out[6][j]
        n_events[p] = out[1].shape[0]
    return stat, t_abs, y_lo, y_hi, y_hi_pre, S_n, S_y, n_events


@njit(cache=True, inline="always")
def _heap_sift_down(ht, hp, k, size):
    while True:
        l = 2 * k + 1
        if l >= size:
            return
        r = l + 1
        c = l
        if r < size and ht[r] < ht[l]:
            c = r
        if ht[c] >= ht[k]:
            return
        tt = ht[k]
        ht[k] = ht[c]
        ht[c] = tt
        ii = hp[k]
        hp[k] = hp[c]
        hp[c] = ii
        k = c


@njit(cache=True)
def _fv_core(pf, birth_kind, hard, tab_y, tab_b, n_init, y_init, t_end, burn_in,
             base_seed, rtol, atol, sample_dt, nodes, n_cap, nblocks):
    """Fleming-Viot particle system over the exact chemostat dynamics.

    Particles advance asynchronously between their own jumps (an event heap
    keyed by precomputed next-jump times); an absorbed particle adopts the
    state of a uniformly chosen other particle, interpolated to the
    absorption time by the deterministic flow.  The empirical law is
    accumulated on the (n, cell) grid at sampling times after burn-in.

    Returns (status, hist, overflow, nsamples, resample_total,
    resample_blocks, n_final, y_final).
    """
    m = n_init.shape[0]
    ncells = nodes.shape[0] - 1
    n = n_init.astype(np.int64)
    y = y_init.copy()
    tl = np.zeros(m)
    ctr = np.zeros(m, np.int64)
    keys = np.empty(m, np.uint64)
    for i in range(m):
        keys[i] = stream_key(base_seed, i)
    rs_key = stream_key(base_seed, m)  # dedicated donor-selection stream
    rs_ctr = np.int64(0)
    jc = np.empty(m, np.int64)
    jy = np.empty(m)
    ht = np.empty(m)
    hp = np.empty(m, np.int64)
    status = 0
    for i in range(m):
        code, t1, y1, c2 = _next_jump_core(pf, birth_kind, hard, tab_y, tab_b,
                                           n[i], y[i], 0.0, t_end, keys[i], ctr[i],
                                           rtol, atol)
        ctr[i] = c2
        if code == NJ_FAIL:
            status = 3
        jc[i] = code
        jy[i] = y1
        ht[i] = t1 if code != NJ_CAPPED else _INF_TIME
        hp[i] = i
    if status != 0:
        return (status, np.zeros((n_cap, ncells)), 0.0, 0, 0,
                np.zeros(nblocks), n, y)
    # heapify
    for k in range(m // 2 - 1, -1, -1):
        _heap_sift_down(ht, hp, k, m)
    hist = np.zeros((n_cap, ncells))
    overflow = 0.0
    nsamp = 0
    res_blocks = np.zeros(nblocks)
    res_total = 0
    block_len = (t_end - burn_in) / nblocks if t_end > burn_in else 1.0
    t_sync = 0.0
    while t_sync < t_end * (1.0 - 1e-15):
        t_next = t_sync + sample_dt
        if t_next > t_end:
            t_next = t_end
        while ht[0] < t_next:
            i = hp[0]
            tj = ht[0]
            code = jc[i]
            if code == NJ_BIRTH:
                n[i] += 1
                y[i] = jy[i]
                tl[i] = tj
            elif code == NJ_WASHOUT or code == NJ_DEATH:
                n[i] -= 1
                y[i] = jy[i]
                tl[i] = tj
            elif code == NJ_HARD_EXTINCT:
                n[i] = 0
                y[i] = 0.0
                tl[i] = tj
            if n[i] == 0:
                # resample: adopt a uniformly chosen other particle's state
                u = u01(rs_key, rs_ctr)
                rs_ctr += 1
                d = np.int64(u * (m - 1))
                if d >= m - 1:
                    d = m - 2
                if d >= i:
                    d += 1
                if n[d] == 0:  # defensive: donors are always alive
                    status = 4
                    break
                stf, yd = _flow_core(pf, birth_kind, tab_y, tab_b, n[d], y[d],
                                     tj - tl[d], rtol, atol)
                if stf != 0:
                    status = 3
                    break
                n[i] = n[d]
                y[i] = yd
                tl[i] = tj
                if tj > burn_in:
                    res_total += 1
                    bi = np.int64((tj - burn_in) / block_len)
                    if bi >= nblocks:
                        bi = nblocks - 1
                    res_blocks[bi] += 1
            code2, t2, y2, c2 = _next_jump_core(pf, birth_kind, hard, tab_y, tab_b,
                                                n[i], y[i], tj, t_end, keys[i],
                                                ctr[i], rtol, atol)
            ctr[i] = c2
            if code2 == NJ_FAIL:
                status = 3
                break
            jc[i] = code2
            jy[i] = y2
            ht[0] = t2 if code2 != NJ_CAPPED else _INF_TIME
            _heap_sift_down(ht, hp, 0, m)
        if status != 0:
            break
        for i in range(m):
            if tl[i] < t_next:
                stf, y2 = _flow_core(pf, birth_kind, tab_y, tab_b, n[i], y[i],
                                     t_next - tl[i], rtol, atol)
                if stf != 0:
                    status = 3
                    break
                y[i] = y2
                tl[i] = t_next
        if status != 0:
            break
        t_sync = t_next
        if t_sync > burn_in:
            for i in range(m):
                row = n[i] if n[i] <= n_cap else n_cap
                cell = np.searchsorted(nodes, y[i], side="right") - 1
                if cell < 0:
                    cell = 0
                if cell >= ncells:
                    if y[i] <= nodes[-1] * (1.0 + 1e-12):
                        cell = ncells - 1
                    else:
                        overflow += 1.0
                        continue
                hist[row - 1, cell] += 1.0
            nsamp += 1
    return status, hist, overflow, nsamp, res_total, res_blocks, n, y
