"""Compiled stepping loops.

Both loops mutate the value arrays in place and keep an explicit support
window ``[lo, hi]`` (``lo > hi`` means identically zero).  One step visits
``[lo-1, hi+1]`` only, widened to the domain edge on a held side and to the
support of the immigration field.

Split scheme (default): the Laplacian, immigration, annihilation and
overcrowding terms are advanced by one explicit Euler step and clipped at 0;
then each cell's mass ``m = u*dx`` is replaced by an exact draw of the
Feller diffusion ``dm = theta*m dt + sqrt(m) dB`` over ``dt``, i.e. a Gamma
variate with a Poisson number of shape units.  Zero stays zero under the
second stage, and a cell of small mass dies with probability
``exp(-2*theta*m / (1 - exp(-theta*dt)))``.

Euler scheme: the textbook Euler-Maruyama step with the noise increment
``sqrt(u) * xi * sqrt(dt/dx)`` and clipping.  Kept for comparison only: the
heat stencil always feeds mass into empty neighbours, so it never reaches
the zero state.
"""
from __future__ import annotations

import math

import numpy as np
from numba import njit

SCHEME_SPLIT = 1
SCHEME_EULER = 0


@njit(cache=True, nogil=True, inline="always")
def _feller_consts(theta, dt):
    if theta > 0.0:
        scale = math.expm1(theta * dt) / (2.0 * theta)
        growth = math.exp(theta * dt)
    else:
        scale = 0.5 * dt
        growth = 1.0
    return scale, growth


@njit(cache=True, nogil=True, inline="always")
def _feller_draw(v, dx, scale, growth, gen):
    k = gen.poisson(v * dx * growth / scale)
    if k > 0:
        return gen.gamma(k, scale) / dx
    return 0.0


@njit(cache=True, nogil=True, inline="always")
def _active_range(lo, hi, n, ghost_l, ghost_r, alo, ahi):
    if lo > hi:
        a, b = n, -1
    else:
        a, b = max(lo - 1, 0), min(hi + 1, n - 1)
    if ghost_l > 0.0:
        a = 0
        b = max(b, 0)
    if ghost_r > 0.0:
        b = n - 1
        a = min(a, n - 1)
    if alo <= ahi:
        a = min(a, max(alo, 0))
        b = max(b, min(ahi, n - 1))
    return a, b


@njit(cache=True, nogil=True)
def advance(
    u, lo, hi, nsteps, dt, dx, theta, alpha, beta, gamma,
    noise_on, scheme, ghost_l, ghost_r, alo, ahi, gen, work,
):
    """Advance ``u`` by ``nsteps``; return ``(lo, hi, first_zero_step)``.

    ``first_zero_step`` counts steps taken when the field first became
    identically zero (-1 if it never did).  The loop stops there when zero
    is absorbing (no immigration and no held boundary mass).
    """
    n = u.shape[0]
    r = dt / (dx * dx)
    sq = math.sqrt(dt / dx)
    scale, growth = _feller_consts(theta, dt)
    split = scheme == SCHEME_SPLIT and noise_on
    first_zero = -1
    for s in range(nsteps):
        a, b = _active_range(lo, hi, n, ghost_l, ghost_r, alo, ahi)
        if a > b:
            if first_zero < 0:
                first_zero = s
            return lo, hi, first_zero
        for j in range(a, b + 1):
            left = u[j - 1] if j > 0 else ghost_l
            right = u[j + 1] if j < n - 1 else ghost_r
            uj = u[j]
            v = uj + r * (left - 2.0 * uj + right) + dt * (alpha[j] - beta[j] * uj - gamma[j] * uj * uj)
            if not split:
                v += dt * theta * uj
                if noise_on:
                    v += math.sqrt(uj) * gen.standard_normal() * sq
            work[j] = v if v > 0.0 else 0.0
        nlo = n
        nhi = -1
        for j in range(a, b + 1):
            v = work[j]
            if split and v > 0.0:
                v = _feller_draw(v, dx, scale, growth, gen)
            u[j] = v
            if v > 0.0:
                if nlo == n:
                    nlo = j
                nhi = j
        lo = nlo
        hi = nhi
        if lo > hi and first_zero < 0:
            first_zero = s + 1
    return lo, hi, first_zero


MODE_MONOTONE = 0
MODE_SUPERPROCESS = 1


@njit(cache=True, nogil=True)
def advance_pair(
    u, w, lims, nsteps, dt, dx, theta, alpha, beta, gamma, noise_on, scheme,
    ghosts, alo, ahi, mode, gen_u, gen_w, work_u, work_w, stats,
):
    """Advance a coupled pair ``(u, w)`` in lock-step.

    The increment ``w`` sees the pre-step ``u``: in monotone mode its
    annihilation rate is ``beta + 2*gamma*u`` with overcrowding ``gamma``; in
    superprocess mode it receives immigration ``gamma*u^2`` and has no
    overcrowding.  ``lims`` holds ``[lo_u, hi_u, lo_w, hi_w]`` and is updated.
    ``ghosts`` holds ``[u_left, u_right, w_left, w_right]``.

    ``stats`` accumulates ``[min(upper - lower), violations, first_zero_u,
    first_zero_upper]`` where ``upper = u + w`` is checked after every step.
    """
    n = u.shape[0]
    r = dt / (dx * dx)
    sq = math.sqrt(dt / dx)
    scale, growth = _feller_consts(theta, dt)
    split = scheme == SCHEME_SPLIT and noise_on
    for s in range(nsteps):
        lo_u, hi_u, lo_w, hi_w = lims[0], lims[1], lims[2], lims[3]
        au, bu = _active_range(lo_u, hi_u, n, ghosts[0], ghosts[1], alo, ahi)
        if mode == MODE_SUPERPROCESS:
            # immigration into w lives on the support of u
            aw, bw = _active_range(lo_w, hi_w, n, ghosts[2], ghosts[3], lo_u, hi_u)
        else:
            aw, bw = _active_range(lo_w, hi_w, n, ghosts[2], ghosts[3], 1, 0)
        if au > bu and aw > bw:
            return s
        # increment first: it reads the pre-step u
        for j in range(aw, bw + 1):
            left = w[j - 1] if j > 0 else ghosts[2]
            right = w[j + 1] if j < n - 1 else ghosts[3]
            wj = w[j]
            uj = u[j]
            if mode == MODE_SUPERPROCESS:
                a_j = gamma[j] * uj * uj
                b_j = beta[j]
                g_j = 0.0
            else:
                a_j = 0.0
                b_j = beta[j] + 2.0 * gamma[j] * uj
                g_j = gamma[j]
            v = wj + r * (left - 2.0 * wj + right) + dt * (a_j - b_j * wj - g_j * wj * wj)
            if not split:
                v += dt * theta * wj
                if noise_on:
                    v += math.sqrt(wj) * gen_w.standard_normal() * sq
            work_w[j] = v if v > 0.0 else 0.0
        for j in range(au, bu + 1):
            left = u[j - 1] if j > 0 else ghosts[0]
            right = u[j + 1] if j < n - 1 else ghosts[1]
            uj = u[j]
            v = uj + r * (left - 2.0 * uj + right) + dt * (alpha[j] - beta[j] * uj - gamma[j] * uj * uj)
            if not split:
                v += dt * theta * uj
                if noise_on:
                    v += math.sqrt(uj) * gen_u.standard_normal() * sq
            work_u[j] = v if v > 0.0 else 0.0
        nlo = n
        nhi = -1
        for j in range(au, bu + 1):
            v = work_u[j]
            if split and v > 0.0:
                v = _feller_draw(v, dx, scale, growth, gen_u)
            u[j] = v
            if v > 0.0:
                if nlo == n:
                    nlo = j
                nhi = j
        lims[0] = nlo
        lims[1] = nhi
        nlo = n
        nhi = -1
        for j in range(aw, bw + 1):
            v = work_w[j]
            if split and v > 0.0:
                v = _feller_draw(v, dx, scale, growth, gen_w)
            w[j] = v
            if v > 0.0:
                if nlo == n:
                    nlo = j
                nhi = j
        lims[2] = nlo
        lims[3] = nhi
        # pathwise order of the stored pair
        a = min(au, aw)
        b = max(bu, bw)
        for j in range(a, b + 1):
            d = (u[j] + w[j]) - u[j]
            if d < stats[0]:
                stats[0] = d
            if d < 0.0:
                stats[1] += 1.0
        if lims[0] > lims[1] and stats[2] < 0.0:
            stats[2] = s + 1
        if lims[0] > lims[1] and lims[2] > lims[3] and stats[3] < 0.0:
            stats[3] = s + 1
    return nsteps
