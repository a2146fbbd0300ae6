"""Compiled per-embedding update step.

All arithmetic here is mirrored by the numpy operations in ``memory.py``;
the test suite checks the two routes agree bit for bit.
"""

import math

import numpy as np
from numba import njit

ASSIMILATE = 0
APPEND = 1
REPLACE = 2

INV_COUNT_SQUARED = 0
INV_COUNT = 1
MIN_COUNT = 2


@njit(cache=True)
def sq_dists(pos, n, e):
    out = np.empty(n)
    dim = e.shape[0]
    for l in range(n):
        s = 0.0
        for i in range(dim):
            diff = e[i] - pos[l, i]
            s += diff * diff
        out[l] = s
    return out


@njit(cache=True)
def kernel_from_sq(d2, d_ema_sq, eps):
    if d_ema_sq > 0.0 and d2 < d_ema_sq:
        return 1.0 / (1.0 + d2 / (eps * d_ema_sq))
    return 0.0


@njit(cache=True)
def soft_count_from_sq(d2, counts, n, d_ema_sq, eps):
    total = 0.0
    if d_ema_sq <= 0.0:
        return total
    for l in range(n):
        kv = kernel_from_sq(d2[l], d_ema_sq, eps)
        if kv > 0.0:
            total += (1.0 + counts[l]) * kv
    return total


@njit(cache=True)
def smallest_sum(d2, n, k):
    # sum of the k smallest values, accumulated in ascending order
    kk = min(k, n)
    part = np.sort(d2[:n])[:kk] if n <= 4 * k else np.sort(np.partition(d2[:n], kk - 1)[:kk])
    total = 0.0
    for i in range(kk):
        total += part[i]
    return total, kk


@njit(cache=True)
def argmin_first(vals, n):
    best = 0
    for l in range(1, n):
        if vals[l] < vals[best]:
            best = l
    return best


@njit(cache=True)
def sample_removal_index(counts, n, strategy, c_floor, u):
    if strategy == MIN_COUNT:
        return argmin_first(counts, n)
    power = 2.0 if strategy == INV_COUNT_SQUARED else 1.0
    w = np.empty(n)
    total = 0.0
    for l in range(n):
        c = counts[l] if counts[l] > c_floor else c_floor
        w[l] = 1.0 / c**power
        total += w[l]
    target = u * total
    cum = 0.0
    for l in range(n):
        cum += w[l]
        if cum > target:
            return l
    return n - 1


@njit(cache=True)
def nearest_other(pos, n, j):
    best = -1
    best_d = np.inf
    dim = pos.shape[1]
    for l in range(n):
        if l == j:
            continue
        s = 0.0
        for i in range(dim):
            diff = pos[j, i] - pos[l, i]
            s += diff * diff
        if s < best_d:
            best_d = s
            best = l
    return best


@njit(cache=True)
def assimilate_into(pos, counts, idx, e):
    # m + (e - m)/(c + 1): same convex combination, exact when e == m
    c = counts[idx]
    w = 1.0 / (c + 1.0)
    for i in range(e.shape[0]):
        pos[idx, i] = pos[idx, i] + w * (e[i] - pos[idx, i])
    counts[idx] = c + 1.0


@njit(cache=True)
def step(pos, counts, born, n, d_ema_sq, e, k, kappa, tau, tau_weights_new,
         gamma, eta, n0, eps, strategy, c_floor, u_coin, u_remove, step_idx):
    """One full update. Returns (reward, n, d_ema_sq, branch, index)."""
    capacity = pos.shape[0]
    d2 = sq_dists(pos, n, e)

    soft = soft_count_from_sq(d2, counts, n, d_ema_sq, eps)
    reward = 1.0 / (math.sqrt(soft) + n0)

    if n > 0:
        total, kk = smallest_sum(d2, n, k)
        if tau_weights_new:
            d_ema_sq = (1.0 - tau) * d_ema_sq + (tau / kk) * total
        else:
            d_ema_sq = tau * d_ema_sq + ((1.0 - tau) / kk) * total

    for l in range(n):
        counts[l] = gamma * counts[l]

    if n == 0:
        pos[0, :] = e
        counts[0] = 1.0
        born[0] = step_idx
        return reward, 1, d_ema_sq, APPEND, 0

    star = argmin_first(d2, n)
    far = d2[star] > kappa * d_ema_sq
    if far and n < capacity:
        pos[n, :] = e
        counts[n] = 1.0
        born[n] = step_idx
        return reward, n + 1, d_ema_sq, APPEND, n
    if far and u_coin < eta:
        j = sample_removal_index(counts, n, strategy, c_floor, u_remove)
        dagger = nearest_other(pos, n, j)
        if dagger >= 0:
            counts[dagger] = counts[j] + counts[dagger]
        pos[j, :] = e
        counts[j] = 1.0
        born[j] = step_idx
        return reward, n, d_ema_sq, REPLACE, j

    assimilate_into(pos, counts, star, e)
    return reward, n, d_ema_sq, ASSIMILATE, star


@njit(cache=True)
def step_batch(pos, counts, born, n, d_ema_sq, es, k, kappa, tau, tau_weights_new,
               gamma, eta, n0, eps, strategy, c_floor, us, step0):
    m = es.shape[0]
    rewards = np.empty(m)
    branches = np.empty(m, dtype=np.int64)
    for t in range(m):
        r, n, d_ema_sq, br, _ = step(pos, counts, born, n, d_ema_sq, es[t], k, kappa, tau,
                                     tau_weights_new, gamma, eta, n0, eps, strategy, c_floor,
                                     us[t, 0], us[t, 1], step0 + t)
        rewards[t] = r
        branches[t] = br
    return rewards, branches, n, d_ema_sq
