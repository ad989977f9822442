"""Hot numeric kernels: per-round bound terms, the gap recurrence and its
gradient, and the simulated training loop.

Each kernel exists twice: a loop form compiled with numba (``*_jit``) and a
vectorized numpy form (``*_numpy``). The public names dispatch on the
``AIRFEEL_DISABLE_NUMBA`` flag evaluated at import time; both forms stay
importable so tests and benchmarks can compare them directly.

Conventions: ``h`` and ``p`` are (K, N) float64 matrices of channel
magnitudes and transmit powers; rounds are axis 1. The per-round pair is

    contraction[n] = 1 - (2*mu*eta/K) * sum_k (h*sqrt(p) - (eta*L/(2K)) * h^2 * p)
    noise[n]       = (eta^2*L/(2K^2)) * (sigma_sq * sum_k h^2 * p + n0 * q)

and the N-round gap bound follows the recurrence
``value <- contraction[n] * value + noise[n]`` from the initial gap.
"""

from __future__ import annotations

import numpy as np

from ._accel import USE_NUMBA, njit


# ---------------------------------------------------------------------------
# loop forms (numba-compiled when enabled)
# ---------------------------------------------------------------------------

def _gap_terms_loop(h, p, eta, big_l, mu, sigma_sq, n0, q):
    K, N = h.shape
    contraction = np.empty(N)
    noise = np.empty(N)
    ca = 2.0 * mu * eta / K
    half = eta * big_l / (2.0 * K)
    cb = eta * eta * big_l / (2.0 * K * K)
    for n in range(N):
        s1 = 0.0
        s2 = 0.0
        for k in range(K):
            hk = h[k, n]
            pk = p[k, n]
            s1 += hk * np.sqrt(pk)
            s2 += hk * hk * pk
        contraction[n] = 1.0 - ca * (s1 - half * s2)
        noise[n] = cb * (sigma_sq * s2 + n0 * q)
    return contraction, noise


def _gap_forward_loop(contraction, noise, init_gap):
    # fwd[m] = bound value after the first m rounds; fwd[N] is the objective
    N = contraction.shape[0]
    fwd = np.empty(N + 1)
    fwd[0] = init_gap
    for n in range(N):
        fwd[n + 1] = contraction[n] * fwd[n] + noise[n]
    return fwd


def _suffix_products_loop(contraction):
    # suf[i] = prod(contraction[i:]); suf[N] = 1
    N = contraction.shape[0]
    suf = np.empty(N + 1)
    suf[N] = 1.0
    for i in range(N - 1, -1, -1):
        suf[i] = contraction[i] * suf[i + 1]
    return suf


def _gap_gradient_loop(h, p, fwd, suf, eta, big_l, mu, sigma_sq):
    K, N = h.shape
    grad = np.empty((K, N))
    cg = mu * eta / K
    ch = eta * big_l / K
    cb = eta * eta * big_l * sigma_sq / (2.0 * K * K)
    for n in range(N):
        w_a = fwd[n] * suf[n + 1]
        w_b = suf[n + 1]
        for k in range(K):
            hk = h[k, n]
            d_contraction = -cg * hk * (1.0 / np.sqrt(p[k, n]) - ch * hk)
            d_noise = cb * hk * hk
            grad[k, n] = w_a * d_contraction + w_b * d_noise
    return grad


def _train_loop_loop(xs, xst, ys, x_train, y_train, x_test, y_test,
                     coef, noise, eta, rho, w0):
    K, d_local, q = xs.shape
    N = coef.shape[1]
    d_train = x_train.shape[0]
    d_test = x_test.shape[0]
    loss = np.full(N + 1, np.nan)
    pred = np.full(N + 1, np.nan)
    w = w0.copy()
    two_rho = 2.0 * rho

    r = np.dot(x_train, w) - y_train
    loss[0] = 0.5 * np.dot(r, r) / d_train + rho * np.dot(w, w)
    rt = np.dot(x_test, w) - y_test
    pred[0] = np.dot(rt, rt) / d_test

    diverged_at = -1
    if not np.isfinite(loss[0]):
        diverged_at = 0
        return loss, pred, w, diverged_at

    for n in range(N):
        agg = noise[n].copy()
        for k in range(K):
            rk = np.dot(xs[k], w) - ys[k]
            gk = np.dot(xst[k], rk) / d_local + two_rho * w
            agg = agg + coef[k, n] * gk
        w = w - (eta / K) * agg
        r = np.dot(x_train, w) - y_train
        loss[n + 1] = 0.5 * np.dot(r, r) / d_train + rho * np.dot(w, w)
        rt = np.dot(x_test, w) - y_test
        pred[n + 1] = np.dot(rt, rt) / d_test
        if not np.isfinite(loss[n + 1]):
            diverged_at = n + 1
            break
    return loss, pred, w, diverged_at


# ---------------------------------------------------------------------------
# numpy fallback forms
# ---------------------------------------------------------------------------

def gap_terms_numpy(h, p, eta, big_l, mu, sigma_sq, n0, q):
    K = h.shape[0]
    s1 = (h * np.sqrt(p)).sum(axis=0)
    s2 = (h * h * p).sum(axis=0)
    ca = 2.0 * mu * eta / K
    half = eta * big_l / (2.0 * K)
    cb = eta * eta * big_l / (2.0 * K * K)
    contraction = 1.0 - ca * (s1 - half * s2)
    noise = cb * (sigma_sq * s2 + n0 * q)
    return contraction, noise


def gap_forward_numpy(contraction, noise, init_gap):
    # the recurrence is inherently sequential; N is small so a python loop is fine
    N = contraction.shape[0]
    fwd = np.empty(N + 1)
    fwd[0] = init_gap
    v = init_gap
    for n in range(N):
        v = contraction[n] * v + noise[n]
        fwd[n + 1] = v
    return fwd


def suffix_products_numpy(contraction):
    N = contraction.shape[0]
    suf = np.empty(N + 1)
    suf[N] = 1.0
    if N:
        suf[:N] = np.cumprod(contraction[::-1])[::-1]
    return suf


def gap_gradient_numpy(h, p, fwd, suf, eta, big_l, mu, sigma_sq):
    K = h.shape[0]
    cg = mu * eta / K
    ch = eta * big_l / K
    cb = eta * eta * big_l * sigma_sq / (2.0 * K * K)
    d_contraction = -cg * h * (1.0 / np.sqrt(p) - ch * h)
    d_noise = cb * h * h
    w_a = fwd[:-1] * suf[1:]
    return w_a[None, :] * d_contraction + suf[1:][None, :] * d_noise


def train_loop_numpy(xs, xst, ys, x_train, y_train, x_test, y_test,
                     coef, noise, eta, rho, w0):
    K, d_local, q = xs.shape
    N = coef.shape[1]
    d_train = x_train.shape[0]
    d_test = x_test.shape[0]
    loss = np.full(N + 1, np.nan)
    pred = np.full(N + 1, np.nan)
    w = w0.copy()

    def _metrics(w):
        r = x_train @ w - y_train
        rt = x_test @ w - y_test
        return (0.5 * (r @ r) / d_train + rho * (w @ w), (rt @ rt) / d_test)

    loss[0], pred[0] = _metrics(w)
    diverged_at = -1
    if not np.isfinite(loss[0]):
        return loss, pred, w, 0

    for n in range(N):
        resid = xs @ w - ys                   # (K, d_local)
        gks = np.einsum("kqd,kd->kq", xst, resid) / d_local + 2.0 * rho * w
        agg = coef[:, n] @ gks + noise[n]
        w = w - (eta / K) * agg
        loss[n + 1], pred[n + 1] = _metrics(w)
        if not np.isfinite(loss[n + 1]):
            diverged_at = n + 1
            break
    return loss, pred, w, diverged_at


# ---------------------------------------------------------------------------
# dispatch
# ---------------------------------------------------------------------------

if USE_NUMBA:
    gap_terms_jit = njit(cache=True)(_gap_terms_loop)
    gap_forward_jit = njit(cache=True)(_gap_forward_loop)
    suffix_products_jit = njit(cache=True)(_suffix_products_loop)
    gap_gradient_jit = njit(cache=True)(_gap_gradient_loop)
    train_loop_jit = njit(cache=True)(_train_loop_loop)

    gap_terms = gap_terms_jit
    gap_forward = gap_forward_jit
    suffix_products = suffix_products_jit
    gap_gradient_kernel = gap_gradient_jit
    train_loop = train_loop_jit
else:
    gap_terms_jit = None
    gap_forward_jit = None
    suffix_products_jit = None
    gap_gradient_jit = None
    train_loop_jit = None

    gap_terms = gap_terms_numpy
    gap_forward = gap_forward_numpy
    suffix_products = suffix_products_numpy
    gap_gradient_kernel = gap_gradient_numpy
    train_loop = train_loop_numpy
