"""Compiled event loop for finite-region runs.

Mirrors the generic loop in dynamics.py operation for operation: the same
three draws per event in the same block layout, the same float expressions
in the same order, the same swap-with-last set maintenance. Outputs agree
bitwise with the pure-Python path; tests pin that. Only finite domains
without event recording come through here.
"""

from __future__ import annotations

import numpy as np

try:
    from numba import njit

    HAVE_KERNEL = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAVE_KERNEL = False

    def njit(*a, **k):
        def wrap(fn):
            return fn

        return wrap


STATUS_NEED_DRAWS = 0
STATUS_TMAX = 1
STATUS_TARGET = 2
STATUS_EVENTS = 3
STATUS_FROZEN = 4

_BLOCK = 8192


@njit(cache=True)
def _advance(
    exp_blk,
    u1_blk,
    u2_blk,
    start,
    t,
    nev,
    values,
    static_,
    lo_flat,
    lo_ptr,
    up_flat,
    up_ptr,
    p_items,
    p_pos,
    v_items,
    v_pos,
    sizes,
    tau,
    first_up,
    q,
    p,
    t_max,
    target,
    max_events,
):
    """Run events until a stop fires or the draw block is exhausted.

    t_max < 0, target < 0, max_events < 0 each mean "absent". Returns
    (status, t, nev, next_draw_index).
    """
    nblk = exp_blk.shape[0]
    i = start
    while i < nblk:
        lenP = sizes[0]
        lenV = sizes[1]
        rp = q * lenP
        rv = p * lenV
        rt = rp + rv
        if rt == 0.0:
            if t_max >= 0.0:
                return STATUS_TMAX, t_max, nev, i
            return STATUS_FROZEN, t, nev, i
        e = exp_blk[i]
        uc = u1_blk[i]
        um = u2_blk[i]
        t_next = t + e / rt
        if t_max >= 0.0 and t_next > t_max:
            return STATUS_TMAX, t_max, nev, i + 1
        t = t_next
        if uc * rt < rp:
            k = int(um * lenP)
            if k >= lenP:
                k = lenP - 1
            x = p_items[k]
            newv = 0
            ip = p_pos[x]
            last = p_items[lenP - 1]
            sizes[0] = lenP - 1
            if ip < lenP - 1:
                p_items[ip] = last
                p_pos[last] = ip
            p_pos[x] = -1
            v_items[sizes[1]] = x
            v_pos[x] = sizes[1]
            sizes[1] += 1
        else:
            k = int(um * lenV)
            if k >= lenV:
                k = lenV - 1
            x = v_items[k]
            newv = 1
            iv = v_pos[x]
            last = v_items[lenV - 1]
            sizes[1] = lenV - 1
            if iv < lenV - 1:
                v_items[iv] = last
                v_pos[last] = iv
            v_pos[x] = -1
            p_items[sizes[0]] = x
            p_pos[x] = sizes[0]
            sizes[0] += 1
        values[x] = newv
        nev += 1
        if first_up[x] == np.inf:
            first_up[x] = t
        if newv == 0:
            if tau[x] == np.inf:
                tau[x] = t
            for j in range(up_ptr[x], up_ptr[x + 1]):
                y = up_flat[j]
                if p_pos[y] < 0 and v_pos[y] < 0:
                    if values[y] == 0:
                        v_items[sizes[1]] = y
                        v_pos[y] = sizes[1]
                        sizes[1] += 1
                    else:
                        p_items[sizes[0]] = y
                        p_pos[y] = sizes[0]
                        sizes[0] += 1
        else:
            for j in range(up_ptr[x], up_ptr[x + 1]):
                y = up_flat[j]
                legal = static_[y]
                if not legal:
                    for m in range(lo_ptr[y], lo_ptr[y + 1]):
                        if values[lo_flat[m]] == 0:
                            legal = True
                            break
                if not legal:
                    if values[y] == 1:
                        iy = p_pos[y]
                        if iy >= 0:
                            lp = sizes[0]
                            lastp = p_items[lp - 1]
                            sizes[0] = lp - 1
                            if iy < lp - 1:
                                p_items[iy] = lastp
                                p_pos[lastp] = iy
                            p_pos[y] = -1
                    else:
                        iy = v_pos[y]
                        if iy >= 0:
                            lv = sizes[1]
                            lastv = v_items[lv - 1]
                            sizes[1] = lv - 1
                            if iy < lv - 1:
                                v_items[iy] = lastv
                                v_pos[lastv] = iy
                            v_pos[y] = -1
        i += 1
        if newv == 0 and x == target:
            return STATUS_TARGET, t, nev, i
        if max_events >= 0 and nev >= max_events:
            return STATUS_EVENTS, t, nev, i
    return STATUS_NEED_DRAWS, t, nev, i


class ReplicaEngine:
    """Reusable compiled runner: tables built once, replicas reset cheaply."""

    def __init__(
        self,
        region,
        q: float,
        static,
        lower,
        upper,
        init_values,
        t_max: float | None,
        target: int | None,
        max_events: int | None,
    ):
        n = region.size
        self.region = region
        self.q = q
        self.p = 1.0 - q
        self.static = np.asarray(static, dtype=np.bool_)
        self.lo_ptr = np.zeros(n + 1, dtype=np.int32)
        self.up_ptr = np.zeros(n + 1, dtype=np.int32)
        for i in range(n):
            self.lo_ptr[i + 1] = self.lo_ptr[i] + len(lower[i])
            self.up_ptr[i + 1] = self.up_ptr[i] + len(upper[i])
        self.lo_flat = np.array(
            [j for row in lower for j in row], dtype=np.int32
        )
        self.up_flat = np.array(
            [j for row in upper for j in row], dtype=np.int32
        )
        self.init_values = np.asarray(init_values, dtype=np.uint8)
        self.t_max = -1.0 if t_max is None else float(t_max)
        self.target = -1 if target is None else int(target)
        self.max_events = -1 if max_events is None else int(max_events)
        self.values = np.empty(n, dtype=np.uint8)
        self.p_items = np.empty(n, dtype=np.int32)
        self.v_items = np.empty(n, dtype=np.int32)
        self.p_pos = np.empty(n, dtype=np.int32)
        self.v_pos = np.empty(n, dtype=np.int32)
        self.sizes = np.empty(2, dtype=np.int64)
        self.tau = np.empty(n)
        self.first_up = np.empty(n)

    def run(self, rng) -> tuple[int, float, int]:
        """One replica; returns (status, t_end, n_events).

        After the call self.tau / self.first_up / self.values hold the
        replica's outcome until the next run.
        """
        n = len(self.values)
        self.values[:] = self.init_values
        self.p_pos[:] = -1
        self.v_pos[:] = -1
        self.sizes[:] = 0
        # initial legal scan in rank (lexicographic) order
        for i in range(n):
            legal = self.static[i]
            if not legal:
                for m in range(self.lo_ptr[i], self.lo_ptr[i + 1]):
                    if self.values[self.lo_flat[m]] == 0:
                        legal = True
                        break
            if legal:
                if self.values[i] == 0:
                    self.v_items[self.sizes[1]] = i
                    self.v_pos[i] = self.sizes[1]
                    self.sizes[1] += 1
                else:
                    self.p_items[self.sizes[0]] = i
                    self.p_pos[i] = self.sizes[0]
                    self.sizes[0] += 1
        self.tau[:] = np.inf
        self.first_up[:] = np.inf
        self.tau[self.init_values == 0] = 0.0
        t = 0.0
        nev = 0
        while True:
            exp_blk = rng.standard_exponential(_BLOCK)
            u1_blk = rng.random(_BLOCK)
            u2_blk = rng.random(_BLOCK)
            idx = 0
            status, t, nev, idx = _advance(
                exp_blk,
                u1_blk,
                u2_blk,
                idx,
                t,
                nev,
                self.values,
                self.static,
                self.lo_flat,
                self.lo_ptr,
                self.up_flat,
                self.up_ptr,
                self.p_items,
                self.p_pos,
                self.v_items,
                self.v_pos,
                self.sizes,
                self.tau,
                self.first_up,
                self.q,
                self.p,
                self.t_max,
                self.target,
                self.max_events,
            )
            if status != STATUS_NEED_DRAWS:
                return status, t, nev
