# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled simulation kernels.

Twin of the pure-Python module: same event loops, same SplitMix64
streams consumed in the same order, so outputs are bit-for-bit equal.
Keep the two files in sync; the cross-backend tests compare full runs.
"""

from libc.math cimport log

import numpy as np

from ..errors import InvariantBreachError

BACKEND_NAME = "compiled"

cdef double TWO_NEG53 = 1.0 / 9007199254740992.0
cdef unsigned long long GOLDEN = 0x9E3779B97F4A7C15ULL
cdef unsigned long long MIX1 = 0xBF58476D1CE4E5B9ULL
cdef unsigned long long MIX2 = 0x94D049BB133111EBULL

DEF EV_ARRIVAL = 0
DEF EV_SERVER = 1
DEF EV_BACKUP = 2

DEF QUIET = 0
DEF PROACTIVE = 1
DEF IMPULSE = 2
DEF JUMP = 3

DEF T_ARR_MATCH = 0
DEF T_ARR_BACKUP = 1
DEF T_VIRT_DELIVER = 2
DEF T_DEPART = 3
DEF T_MOVE = 4
DEF T_VDEPART = 5
DEF T_VMOVE = 6
DEF T_TOKEN = 7
DEF T_TICK = 8
DEF T_BACKUP_DEP = 9
DEF T_BACKUP_MOVE = 10


cdef inline unsigned long long mix64(unsigned long long z) noexcept nogil:
    z = (z ^ (z >> 30)) * MIX1
    z = (z ^ (z >> 27)) * MIX2
    return z ^ (z >> 31)


cdef unsigned long long derive(unsigned long long master, long a, long b, long c) noexcept nogil:
    cdef unsigned long long s = mix64(master)
    s = mix64(s + GOLDEN * (<unsigned long long> a + 1))
    s = mix64(s + GOLDEN * (<unsigned long long> b + 1))
    s = mix64(s + GOLDEN * (<unsigned long long> c + 1))
    return s


cdef inline unsigned long long next_u64(unsigned long long[::1] states, Py_ssize_t k) noexcept nogil:
    states[k] += GOLDEN
    return mix64(states[k])


cdef inline double u01(unsigned long long[::1] states, Py_ssize_t k) noexcept nogil:
    return (<double> (next_u64(states, k) >> 11) + 0.5) * TWO_NEG53


cdef inline double expo(unsigned long long[::1] states, Py_ssize_t k, double rate) noexcept nogil:
    return -log(u01(states, k)) / rate


cdef inline Py_ssize_t pick(unsigned long long[::1] states, Py_ssize_t k, Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t i = <Py_ssize_t> (u01(states, k) * n)
    if i >= n:
        i = n - 1
    return i


cdef class EventHeap:
    """Binary heap keyed by (time, seq); seq is unique, order is strict."""

    cdef double[::1] time
    cdef long long[::1] seq
    cdef int[::1] kind
    cdef int[::1] pool
    cdef int[::1] idx
    cdef long long[::1] gen
    cdef Py_ssize_t size
    cdef Py_ssize_t cap

    def __cinit__(self, Py_ssize_t cap=1024):
        self.cap = cap
        self.size = 0
        self.time = np.empty(cap, dtype=np.float64)
        self.seq = np.empty(cap, dtype=np.int64)
        self.kind = np.empty(cap, dtype=np.int32)
        self.pool = np.empty(cap, dtype=np.int32)
        self.idx = np.empty(cap, dtype=np.int32)
        self.gen = np.empty(cap, dtype=np.int64)

    cdef void _grow(self):
        cdef Py_ssize_t newcap = self.cap * 2
        cdef double[::1] t2 = np.empty(newcap, dtype=np.float64)
        cdef long long[::1] s2 = np.empty(newcap, dtype=np.int64)
        cdef int[::1] k2 = np.empty(newcap, dtype=np.int32)
        cdef int[::1] p2 = np.empty(newcap, dtype=np.int32)
        cdef int[::1] i2 = np.empty(newcap, dtype=np.int32)
        cdef long long[::1] g2 = np.empty(newcap, dtype=np.int64)
        cdef Py_ssize_t j
        for j in range(self.size):
            t2[j] = self.time[j]
            s2[j] = self.seq[j]
            k2[j] = self.kind[j]
            p2[j] = self.pool[j]
            i2[j] = self.idx[j]
            g2[j] = self.gen[j]
        self.time = t2
        self.seq = s2
        self.kind = k2
        self.pool = p2
        self.idx = i2
        self.gen = g2
        self.cap = newcap

    cdef inline bint _less(self, Py_ssize_t a, Py_ssize_t b) noexcept:
        if self.time[a] != self.time[b]:
            return self.time[a] < self.time[b]
        return self.seq[a] < self.seq[b]

    cdef inline void _swap(self, Py_ssize_t a, Py_ssize_t b) noexcept:
        cdef double td
        cdef long long tl
        cdef int ti
        td = self.time[a]; self.time[a] = self.time[b]; self.time[b] = td
        tl = self.seq[a]; self.seq[a] = self.seq[b]; self.seq[b] = tl
        ti = self.kind[a]; self.kind[a] = self.kind[b]; self.kind[b] = ti
        ti = self.pool[a]; self.pool[a] = self.pool[b]; self.pool[b] = ti
        ti = self.idx[a]; self.idx[a] = self.idx[b]; self.idx[b] = ti
        tl = self.gen[a]; self.gen[a] = self.gen[b]; self.gen[b] = tl

    cdef void push(self, double t, long long seq, int kind, int pool, int idx, long long gen):
        if self.size == self.cap:
            self._grow()
        cdef Py_ssize_t i = self.size
        self.time[i] = t
        self.seq[i] = seq
        self.kind[i] = kind
        self.pool[i] = pool
        self.idx[i] = idx
        self.gen[i] = gen
        self.size += 1
        cdef Py_ssize_t parent
        while i > 0:
            parent = (i - 1) >> 1
            if self._less(i, parent):
                self._swap(i, parent)
                i = parent
            else:
                break

    cdef void pop(self) noexcept:
        # Caller reads slot 0 first.
        self.size -= 1
        cdef Py_ssize_t n = self.size
        if n == 0:
            return
        self._swap(0, n)
        cdef Py_ssize_t i = 0, child
        while True:
            child = 2 * i + 1
            if child >= n:
                break
            if child + 1 < n and self._less(child + 1, child):
                child += 1
            if self._less(child, i):
                self._swap(i, child)
                i = child
            else:
                break


cdef class IntHeap:
    """Min-heap of integers (idle/room indices for backup reuse)."""

    cdef int[::1] data
    cdef Py_ssize_t size
    cdef Py_ssize_t cap

    def __cinit__(self, Py_ssize_t cap=64):
        self.cap = cap
        self.size = 0
        self.data = np.empty(cap, dtype=np.int32)

    cdef void push(self, int v):
        cdef Py_ssize_t i, parent
        cdef int tmp
        if self.size == self.cap:
            d2 = np.empty(self.cap * 2, dtype=np.int32)
            d2[: self.cap] = np.asarray(self.data)
            self.data = d2
            self.cap *= 2
        self.data[self.size] = v
        i = self.size
        self.size += 1
        while i > 0:
            parent = (i - 1) >> 1
            if self.data[i] < self.data[parent]:
                tmp = self.data[i]; self.data[i] = self.data[parent]; self.data[parent] = tmp
                i = parent
            else:
                break

    cdef int peek(self) noexcept:
        return self.data[0]

    cdef int pop(self):
        cdef int out = self.data[0]
        cdef Py_ssize_t i = 0, child, n
        cdef int tmp
        self.size -= 1
        n = self.size
        self.data[0] = self.data[n]
        while True:
            child = 2 * i + 1
            if child >= n:
                break
            if child + 1 < n and self.data[child + 1] < self.data[child]:
                child += 1
            if self.data[child] < self.data[i]:
                tmp = self.data[i]; self.data[i] = self.data[child]; self.data[child] = tmp
                i = child
            else:
                break
        return out


def run_single(plan):
    """Single-server event loop; see the pure twin for commentary."""
    cdef Py_ssize_t n_ph = plan["num_phases"]
    cdef Py_ssize_t n_cfg = plan["n_configs"]
    cdef int[:, ::1] idx_plus = np.ascontiguousarray(plan["idx_plus"], dtype=np.int32)
    cdef int[:, ::1] idx_minus = np.ascontiguousarray(plan["idx_minus"], dtype=np.int32)
    cdef int[:, :, ::1] idx_move = np.ascontiguousarray(plan["idx_move"], dtype=np.int32)
    cdef double[::1] mu_dep = np.ascontiguousarray(plan["mu_dep"], dtype=np.float64)
    cdef double[:, ::1] mu_move = np.ascontiguousarray(plan["mu_move"], dtype=np.float64)
    cdef double[::1] ter = np.ascontiguousarray(plan["ter"], dtype=np.float64)
    cdef signed char[::1] kind = np.ascontiguousarray(plan["kind"], dtype=np.int8)
    cdef double[:, ::1] pro_rate = np.ascontiguousarray(plan["pro_rate"], dtype=np.float64)
    cdef double[::1] pro_total = np.ascontiguousarray(plan["pro_total"], dtype=np.float64)
    cdef double[:, ::1] imp_prob = np.ascontiguousarray(plan["imp_prob"], dtype=np.float64)
    cdef int[::1] jump_seq = np.ascontiguousarray(
        np.asarray(plan["jump_seq"], dtype=np.int32).reshape(-1)
    ) if len(plan["jump_seq"]) else np.empty(0, dtype=np.int32)
    cdef Py_ssize_t n_jump = jump_seq.shape[0]
    counts = np.asarray(plan["counts"])
    cdef double horizon = float(plan["horizon"])
    cdef double warmup = float(plan["warmup"])
    cdef Py_ssize_t nb = int(plan["nbatches"])
    cdef long long max_events = int(plan.get("max_events", 0))
    cdef int zero = plan["zero_idx"]

    cdef signed char[::1] has_internal = np.zeros(n_ph, dtype=np.int8)
    cdef Py_ssize_t i, j
    for i in range(n_ph):
        for j in range(n_ph):
            if j != i and mu_move[i, j] > 0:
                has_internal[i] = 1
                break

    cdef unsigned long long[::1] states = np.empty(1, dtype=np.uint64)
    states[0] = derive(<unsigned long long> (int(plan["seed"]) & 0xFFFFFFFFFFFFFFFF), 2, 0, 0)

    cdef double window = horizon - warmup
    cdef double batch_len = window / nb if window > 0 else 0.0

    cdef double[:, ::1] occ = np.zeros((nb, n_cfg), dtype=np.float64)
    cdef double[:, :, ::1] req = np.zeros((nb, n_cfg, n_ph), dtype=np.float64)
    cdef long long[::1] requests_total = np.zeros(n_ph, dtype=np.int64)

    cdef int c = zero
    cdef long long[::1] state = np.zeros(n_ph, dtype=np.int64)

    cdef long long events = 0
    cdef double t_last = 0.0
    cdef double t, r, jobrate, u, v, acc, a, b, seg
    cdef Py_ssize_t ph, dst, bi
    cdef int nxt
    cdef bint stopped_early

    # Initial action: impulses fire at time zero.
    c = _single_chain(0.0, c, NULL, 0, jump_seq, 0, states, kind, imp_prob,
                      idx_plus, state, requests_total, req, nb, batch_len,
                      warmup, horizon, n_ph)

    while True:
        r = 0.0
        for i in range(n_ph):
            if state[i]:
                r += state[i] * ter[i]
        if kind[c] == PROACTIVE:
            r += pro_total[c]
        elif kind[c] == JUMP:
            r += 1.0
        if r <= 0.0:
            break
        t = t_last + expo(states, 0, r)
        if t >= horizon:
            break
        if max_events and events >= max_events:
            break
        if batch_len > 0.0:
            a = t_last if t_last > warmup else warmup
            b = t if t < horizon else horizon
            while a < b:
                bi = <Py_ssize_t> ((a - warmup) / batch_len)
                if bi >= nb:
                    bi = nb - 1
                seg = warmup + (bi + 1) * batch_len
                if seg > b:
                    seg = b
                if seg <= a:
                    break
                occ[bi, c] += seg - a
                a = seg
        t_last = t
        events += 1

        jobrate = 0.0
        for i in range(n_ph):
            if state[i]:
                jobrate += state[i] * ter[i]
        u = u01(states, 0) * r
        if u < jobrate:
            acc = 0.0
            ph = -1
            for i in range(n_ph):
                if state[i]:
                    ph = i
                    acc += state[i] * ter[i]
                    if u < acc:
                        break
            v = u01(states, 0) * ter[ph]
            state[ph] -= 1
            if v < mu_dep[ph] or not has_internal[ph]:
                c = idx_minus[c, ph]
            else:
                acc = mu_dep[ph]
                dst = -1
                for j in range(n_ph):
                    if j != ph and mu_move[ph, j] > 0:
                        dst = j
                        acc += mu_move[ph, j]
                        if v < acc:
                            break
                state[dst] += 1
                c = idx_move[c, ph, dst]
            if kind[c] == IMPULSE:
                c = _single_chain(t, c, NULL, 0, jump_seq, 0, states, kind,
                                  imp_prob, idx_plus, state, requests_total,
                                  req, nb, batch_len, warmup, horizon, n_ph)
        else:
            if kind[c] == PROACTIVE:
                v = u01(states, 0) * pro_total[c]
                acc = 0.0
                ph = -1
                for j in range(n_ph):
                    if pro_rate[c, j] > 0:
                        ph = j
                        acc += pro_rate[c, j]
                        if v < acc:
                            break
                c = _single_chain(t, c, &ph, 1, jump_seq, 0, states, kind,
                                  imp_prob, idx_plus, state, requests_total,
                                  req, nb, batch_len, warmup, horizon, n_ph)
            else:
                c = _single_chain(t, c, NULL, 0, jump_seq, n_jump, states,
                                  kind, imp_prob, idx_plus, state,
                                  requests_total, req, nb, batch_len, warmup,
                                  horizon, n_ph)

    stopped_early = max_events and events >= max_events
    cdef double end = t_last if stopped_early else horizon
    if batch_len > 0.0 and not stopped_early and t_last < horizon:
        a = t_last if t_last > warmup else warmup
        b = horizon
        while a < b:
            bi = <Py_ssize_t> ((a - warmup) / batch_len)
            if bi >= nb:
                bi = nb - 1
            seg = warmup + (bi + 1) * batch_len
            if seg > b:
                seg = b
            if seg <= a:
                break
            occ[bi, c] += seg - a
            a = seg
    return {
        "end_time": end,
        "events": events,
        "window": window,
        "batch_len": batch_len,
        "occupancy_batches": np.asarray(occ).tolist(),
        "request_batches": np.asarray(req).tolist(),
        "requests": np.asarray(requests_total).tolist(),
        "final_config": tuple(counts[c].tolist()),
    }


cdef int _single_chain(
    double t, int x, Py_ssize_t* forced, Py_ssize_t n_forced,
    int[::1] jump_seq, Py_ssize_t n_jump,
    unsigned long long[::1] states,
    signed char[::1] kind, double[:, ::1] imp_prob, int[:, ::1] idx_plus,
    long long[::1] state, long long[::1] requests_total,
    double[:, :, ::1] req, Py_ssize_t nb, double batch_len,
    double warmup, double horizon, Py_ssize_t n_ph,
) except -2:
    cdef Py_ssize_t m, i, j, bi
    cdef int nxt
    cdef double u, acc
    for m in range(n_forced + n_jump):
        i = forced[m] if m < n_forced else jump_seq[m - n_forced]
        requests_total[i] += 1
        if batch_len > 0.0 and warmup <= t < horizon:
            bi = <Py_ssize_t> ((t - warmup) / batch_len)
            if bi >= nb:
                bi = nb - 1
            req[bi, x, i] += 1.0
        nxt = idx_plus[x, i]
        if nxt < 0:
            raise InvariantBreachError("request past the service limit")
        state[i] += 1
        x = nxt
    while kind[x] == IMPULSE:
        u = u01(states, 0)
        acc = 0.0
        i = -1
        for j in range(n_ph):
            if imp_prob[x, j] > 0:
                i = j
                acc += imp_prob[x, j]
                if u < acc:
                    break
        requests_total[i] += 1
        if batch_len > 0.0 and warmup <= t < horizon:
            bi = <Py_ssize_t> ((t - warmup) / batch_len)
            if bi >= nb:
                bi = nb - 1
            req[bi, x, i] += 1.0
        nxt = idx_plus[x, i]
        if nxt < 0:
            raise InvariantBreachError("impulse past the service limit")
        state[i] += 1
        x = nxt
    return x


cdef class _BackupPool:
    cdef long long[:, ::1] state
    cdef int[::1] rc
    cdef long long[::1] gen
    cdef IntHeap idle
    cdef Py_ssize_t used
    cdef Py_ssize_t cap
    cdef Py_ssize_t n_ph

    def __cinit__(self, Py_ssize_t n_ph):
        self.n_ph = n_ph
        self.cap = 64
        self.used = 0
        self.state = np.zeros((self.cap, n_ph), dtype=np.int64)
        self.rc = np.empty(self.cap, dtype=np.int32)
        self.gen = np.zeros(self.cap, dtype=np.int64)
        self.idle = IntHeap()

    cdef Py_ssize_t create(self, int zero):
        cdef Py_ssize_t j, i
        if self.used == self.cap:
            s2 = np.zeros((self.cap * 2, self.n_ph), dtype=np.int64)
            r2 = np.empty(self.cap * 2, dtype=np.int32)
            g2 = np.zeros(self.cap * 2, dtype=np.int64)
            s2[: self.cap] = np.asarray(self.state)
            r2[: self.cap] = np.asarray(self.rc)
            g2[: self.cap] = np.asarray(self.gen)
            self.state = s2
            self.rc = r2
            self.gen = g2
            self.cap *= 2
        cdef Py_ssize_t b = self.used
        self.rc[b] = zero
        self.used += 1
        return b


cdef class _Fleet:
    cdef Py_ssize_t n_ph, n_cfg, n_pools, n_total, nb
    cdef int zero, kmax
    cdef double horizon, warmup, batch_len, window
    cdef long long max_events
    cdef bint check, do_trace

    cdef int[:, ::1] idx_plus
    cdef int[:, ::1] idx_minus
    cdef int[:, :, ::1] idx_move
    cdef double[::1] h_table
    cdef double[::1] mu_dep
    cdef double[::1] ter
    cdef double[:, ::1] mu_move
    cdef signed char[::1] has_internal

    cdef long long[::1] L
    cdef long long[::1] off
    cdef long long[::1] token_cap
    cdef double[:, ::1] arr_rate
    cdef signed char[:, ::1] kind
    cdef double[:, :, ::1] pro_rate
    cdef double[:, ::1] pro_total
    cdef double[:, :, ::1] imp_prob
    cdef int[:, ::1] jump_tab
    cdef long long[::1] jump_len

    cdef unsigned long long[::1] rng
    cdef Py_ssize_t rs0, rt0, rb0  # stream bases: srv, tok, bak

    cdef long long[:, ::1] real
    cdef long long[:, ::1] virt
    cdef long long[:, ::1] tok
    cdef long long[::1] tokcnt
    cdef int[::1] rc
    cdef int[::1] oc
    cdef long long[::1] gen

    cdef int[:, :, ::1] tokens
    cdef long long[:, ::1] zlen

    cdef list backups
    cdef EventHeap heap
    cdef long long seq

    cdef double[::1] batch_active
    cdef double[::1] batch_cost
    cdef double[::1] batch_virt
    cdef double[::1] batch_backup
    cdef double[:, ::1] batch_tok
    cdef double[::1] occ_int
    cdef double[::1] occ_last
    cdef long long[::1] occ_cnt
    cdef long long n_active
    cdef double cost_sum
    cdef long long virt_total, backup_jobs
    cdef long long[::1] ztot
    cdef long long[::1] arrivals
    cdef long long[::1] virtual_arrivals
    cdef long long[::1] backup_placements
    cdef list trace
    cdef double t_now

    cdef long long[::1] touched
    cdef Py_ssize_t n_touched

    cdef long long events, events_post, pops
    cdef double t_last

    def __init__(self, plan):
        cdef Py_ssize_t p, i, j, s
        self.n_ph = plan["num_phases"]
        self.n_cfg = plan["n_configs"]
        self.zero = plan["zero_idx"]
        self.kmax = int(plan["kmax"])
        self.idx_plus = np.ascontiguousarray(plan["idx_plus"], dtype=np.int32)
        self.idx_minus = np.ascontiguousarray(plan["idx_minus"], dtype=np.int32)
        self.idx_move = np.ascontiguousarray(plan["idx_move"], dtype=np.int32)
        self.h_table = np.ascontiguousarray(plan["h"], dtype=np.float64)
        self.mu_dep = np.ascontiguousarray(plan["mu_dep"], dtype=np.float64)
        self.mu_move = np.ascontiguousarray(plan["mu_move"], dtype=np.float64)
        self.ter = np.ascontiguousarray(plan["ter"], dtype=np.float64)
        self.has_internal = np.zeros(self.n_ph, dtype=np.int8)
        for i in range(self.n_ph):
            for j in range(self.n_ph):
                if j != i and self.mu_move[i, j] > 0:
                    self.has_internal[i] = 1
                    break
        self.horizon = float(plan["horizon"])
        self.warmup = float(plan["warmup"])
        self.nb = int(plan["nbatches"])
        self.max_events = int(plan.get("max_events", 0))
        self.check = bool(plan.get("check", False))
        self.do_trace = bool(plan.get("trace", False))

        pools = plan["pools"]
        self.n_pools = len(pools)
        cdef Py_ssize_t P = self.n_pools
        self.L = np.array([int(q["L"]) for q in pools], dtype=np.int64)
        self.off = np.zeros(P, dtype=np.int64)
        for p in range(1, P):
            self.off[p] = self.off[p - 1] + self.L[p - 1]
        self.n_total = 0
        for p in range(P):
            self.n_total += self.L[p]
        self.token_cap = np.array(
            [int(q["token_cap"]) for q in pools], dtype=np.int64
        )
        self.arr_rate = np.ascontiguousarray(
            np.vstack([np.asarray(q["arrival_rates"], dtype=np.float64) for q in pools])
        )
        self.kind = np.ascontiguousarray(
            np.vstack([np.asarray(q["kind"], dtype=np.int8) for q in pools])
        )
        self.pro_rate = np.ascontiguousarray(
            np.stack([np.asarray(q["pro_rate"], dtype=np.float64) for q in pools])
        )
        self.pro_total = np.ascontiguousarray(
            np.vstack([np.asarray(q["pro_total"], dtype=np.float64) for q in pools])
        )
        self.imp_prob = np.ascontiguousarray(
            np.stack([np.asarray(q["imp_prob"], dtype=np.float64) for q in pools])
        )
        cdef Py_ssize_t maxjump = 1
        for q in pools:
            if len(q["jump_seq"]) > maxjump:
                maxjump = len(q["jump_seq"])
        jt = np.zeros((P, maxjump), dtype=np.int32)
        jl = np.zeros(P, dtype=np.int64)
        for p in range(P):
            sq = pools[p]["jump_seq"]
            jl[p] = len(sq)
            for j in range(len(sq)):
                jt[p, j] = sq[j]
        self.jump_tab = jt
        self.jump_len = jl

        cdef unsigned long long master = (
            <unsigned long long> (int(plan["seed"]) & 0xFFFFFFFFFFFFFFFF)
        )
        self.rng = np.empty(P * self.n_ph + 3 * P, dtype=np.uint64)
        self.rs0 = P * self.n_ph
        self.rt0 = self.rs0 + P
        self.rb0 = self.rt0 + P
        for p in range(P):
            for i in range(self.n_ph):
                self.rng[p * self.n_ph + i] = derive(master, 1, p, i)
            self.rng[self.rs0 + p] = derive(master, 2, p, 0)
            self.rng[self.rt0 + p] = derive(master, 3, p, 0)
            self.rng[self.rb0 + p] = derive(master, 4, p, 0)

        self.real = np.zeros((self.n_total, self.n_ph), dtype=np.int64)
        self.virt = np.zeros((self.n_total, self.n_ph), dtype=np.int64)
        self.tok = np.zeros((self.n_total, self.n_ph), dtype=np.int64)
        self.tokcnt = np.zeros(self.n_total, dtype=np.int64)
        self.rc = np.full(self.n_total, self.zero, dtype=np.int32)
        self.oc = np.full(self.n_total, self.zero, dtype=np.int32)
        self.gen = np.zeros(self.n_total, dtype=np.int64)

        cdef Py_ssize_t maxcap = 1
        for p in range(P):
            if self.token_cap[p] > maxcap:
                maxcap = self.token_cap[p]
        self.tokens = np.zeros((P, self.n_ph, maxcap + 2), dtype=np.int32)
        self.zlen = np.zeros((P, self.n_ph), dtype=np.int64)

        self.backups = [_BackupPool(self.n_ph) for _ in range(P)]
        self.heap = EventHeap()
        self.seq = 0

        self.window = self.horizon - self.warmup
        self.batch_len = self.window / self.nb if self.window > 0 else 0.0
        self.batch_active = np.zeros(self.nb, dtype=np.float64)
        self.batch_cost = np.zeros(self.nb, dtype=np.float64)
        self.batch_virt = np.zeros(self.nb, dtype=np.float64)
        self.batch_backup = np.zeros(self.nb, dtype=np.float64)
        self.batch_tok = np.zeros((self.nb, self.n_ph), dtype=np.float64)
        self.occ_int = np.zeros(self.n_cfg, dtype=np.float64)
        self.occ_cnt = np.zeros(self.n_cfg, dtype=np.int64)
        self.occ_last = np.full(self.n_cfg, self.warmup, dtype=np.float64)
        self.n_active = 0
        self.cost_sum = 0.0
        self.virt_total = 0
        self.backup_jobs = 0
        self.ztot = np.zeros(self.n_ph, dtype=np.int64)
        self.arrivals = np.zeros(self.n_ph, dtype=np.int64)
        self.virtual_arrivals = np.zeros(self.n_ph, dtype=np.int64)
        self.backup_placements = np.zeros(self.n_ph, dtype=np.int64)
        self.trace = [] if self.do_trace else None
        self.t_now = 0.0
        self.touched = np.empty(2 * self.kmax + 16, dtype=np.int64)
        self.n_touched = 0
        self.events = 0
        self.events_post = 0
        self.pops = 0
        self.t_last = 0.0

        self.occ_cnt[self.zero] = self.n_total

    # --- small helpers ------------------------------------------------------

    cdef int breach(self, str msg) except -1:
        raise InvariantBreachError(f"t={self.t_now:.6f}: {msg}")

    cdef void occ_change(self, int old, int new, double t) noexcept:
        cdef double eff = t
        if eff < self.warmup:
            eff = self.warmup
        if eff > self.horizon:
            eff = self.horizon
        if eff > self.occ_last[old]:
            self.occ_int[old] += self.occ_cnt[old] * (eff - self.occ_last[old])
        self.occ_last[old] = eff
        if eff > self.occ_last[new]:
            self.occ_int[new] += self.occ_cnt[new] * (eff - self.occ_last[new])
        self.occ_last[new] = eff
        self.occ_cnt[old] -= 1
        self.occ_cnt[new] += 1

    cdef void occ_flush_zero(self, double t) noexcept:
        cdef double eff = t
        if eff < self.warmup:
            eff = self.warmup
        if eff > self.horizon:
            eff = self.horizon
        if eff > self.occ_last[self.zero]:
            self.occ_int[self.zero] += self.occ_cnt[self.zero] * (
                eff - self.occ_last[self.zero]
            )
        self.occ_last[self.zero] = eff

    cdef int check_server(self, Py_ssize_t p, Py_ssize_t s) except -1:
        cdef Py_ssize_t g = self.off[p] + s
        cdef long long tot = 0
        cdef Py_ssize_t i
        cdef long long tk = 0
        for i in range(self.n_ph):
            if self.real[g, i] < 0 or self.virt[g, i] < 0 or self.tok[g, i] < 0:
                self.breach(f"negative count on pool {p} server {s}")
            tot += self.real[g, i] + self.virt[g, i] + self.tok[g, i]
            tk += self.tok[g, i]
        if tot > self.kmax:
            self.breach(f"pool {p} server {s} holds {tot} > service limit")
        if self.tokcnt[g] != tk:
            self.breach("token counter drift")
        return 0

    cdef int touch(self, long long s) except -1:
        cdef Py_ssize_t m
        for m in range(self.n_touched):
            if self.touched[m] == s:
                return 0
        self.touched[self.n_touched] = s
        self.n_touched += 1
        return 0

    # --- request machinery ----------------------------------------------------

    cdef int gen_token(self, Py_ssize_t p, Py_ssize_t s, Py_ssize_t i, double t) except -1:
        cdef Py_ssize_t g = self.off[p] + s
        cdef long long n = self.zlen[p, i]
        cdef Py_ssize_t j
        cdef int victim
        cdef Py_ssize_t gv
        cdef int noc
        self.tokens[p, i, n] = <int> s
        self.zlen[p, i] = n + 1
        self.tok[g, i] += 1
        self.tokcnt[g] += 1
        self.ztot[i] += 1
        if self.trace is not None:
            self.trace.append((t, T_TOKEN, p, s, i))
        if self.zlen[p, i] > self.token_cap[p]:
            n = self.zlen[p, i]
            j = pick(self.rng, self.rt0 + p, n)
            victim = self.tokens[p, i, j]
            self.tokens[p, i, j] = self.tokens[p, i, n - 1]
            self.zlen[p, i] = n - 1
            gv = self.off[p] + victim
            self.tok[gv, i] -= 1
            self.tokcnt[gv] -= 1
            self.ztot[i] -= 1
            self.virt[gv, i] += 1
            self.virt_total += 1
            self.virtual_arrivals[i] += 1
            noc = self.idx_plus[self.oc[gv], i]
            if noc < 0:
                self.breach("virtual delivery past the service limit")
            self.oc[gv] = noc
            if self.trace is not None:
                self.trace.append((t, T_VIRT_DELIVER, p, victim, i))
            self.touch(victim)
        if self.check:
            if self.zlen[p, i] > self.token_cap[p]:
                self.breach(f"token count {self.zlen[p, i]} above cap")
            self.check_server(p, s)
        return 0

    cdef int chain(self, Py_ssize_t p, Py_ssize_t s, int x, bint use_jump,
                   Py_ssize_t forced, double t) except -1:
        # forced < 0: none; use_jump: the pool's jump sequence first.
        cdef Py_ssize_t m, i, j
        cdef int nxt
        cdef double u, acc
        cdef Py_ssize_t nf = 0
        if use_jump:
            nf = self.jump_len[p]
        elif forced >= 0:
            nf = 1
        for m in range(nf):
            i = self.jump_tab[p, m] if use_jump else forced
            nxt = self.idx_plus[x, i]
            if nxt < 0:
                self.breach("request past the service limit")
            self.gen_token(p, s, i, t)
            x = nxt
        while self.kind[p, x] == IMPULSE:
            u = u01(self.rng, self.rs0 + p)
            acc = 0.0
            i = -1
            for j in range(self.n_ph):
                if self.imp_prob[p, x, j] > 0:
                    i = j
                    acc += self.imp_prob[p, x, j]
                    if u < acc:
                        break
            nxt = self.idx_plus[x, i]
            if nxt < 0:
                self.breach("impulse past the service limit")
            self.gen_token(p, s, i, t)
            x = nxt
        return 0

    cdef double server_rate(self, Py_ssize_t p, Py_ssize_t s) noexcept:
        cdef Py_ssize_t g = self.off[p] + s
        cdef double r = 0.0
        cdef Py_ssize_t i
        cdef long long cnt
        cdef int k
        for i in range(self.n_ph):
            cnt = self.real[g, i] + self.virt[g, i]
            if cnt:
                r += cnt * self.ter[i]
        if self.tokcnt[g] == 0:
            k = self.kind[p, self.oc[g]]
            if k == PROACTIVE:
                r += self.pro_total[p, self.oc[g]]
            elif k == JUMP:
                r += 1.0
        return r

    cdef void schedule_server(self, Py_ssize_t p, Py_ssize_t s, double t) noexcept:
        cdef Py_ssize_t g = self.off[p] + s
        cdef double r, dt
        self.gen[g] += 1
        r = self.server_rate(p, s)
        if r > 0.0:
            dt = expo(self.rng, self.rs0 + p, r)
            self.seq += 1
            self.heap.push(t + dt, self.seq, EV_SERVER, <int> p, <int> s, self.gen[g])

    cdef void schedule_backup(self, Py_ssize_t p, Py_ssize_t b, double t) noexcept:
        cdef _BackupPool bp = <_BackupPool> self.backups[p]
        cdef double r = 0.0, dt
        cdef Py_ssize_t i
        bp.gen[b] += 1
        for i in range(self.n_ph):
            if bp.state[b, i]:
                r += bp.state[b, i] * self.ter[i]
        if r > 0.0:
            dt = expo(self.rng, self.rb0 + p, r)
            self.seq += 1
            self.heap.push(t + dt, self.seq, EV_BACKUP, <int> p, <int> b, bp.gen[b])

    cdef void real_config_shift(self, Py_ssize_t p, Py_ssize_t s, int new_rc) noexcept:
        cdef Py_ssize_t g = self.off[p] + s
        cdef int old = self.rc[g]
        if old == new_rc:
            return
        if old == self.zero:
            self.n_active += 1
        if new_rc == self.zero:
            self.n_active -= 1
        self.cost_sum += self.h_table[new_rc] - self.h_table[old]
        self.occ_change(old, new_rc, self.t_now)
        self.rc[g] = new_rc

    cdef void accumulate(self, double t0, double t1) noexcept:
        cdef double a = t0 if t0 > self.warmup else self.warmup
        cdef double b = t1 if t1 < self.horizon else self.horizon
        cdef double seg, dt
        cdef Py_ssize_t bi, i
        while a < b:
            bi = <Py_ssize_t> ((a - self.warmup) / self.batch_len)
            if bi >= self.nb:
                bi = self.nb - 1
            seg = self.warmup + (bi + 1) * self.batch_len
            if seg > b:
                seg = b
            if seg <= a:
                break
            dt = seg - a
            self.batch_active[bi] += dt * self.n_active
            self.batch_cost[bi] += dt * self.cost_sum
            self.batch_virt[bi] += dt * self.virt_total
            self.batch_backup[bi] += dt * self.backup_jobs
            for i in range(self.n_ph):
                self.batch_tok[bi, i] += dt * self.ztot[i]
            a = seg

    # --- main loop --------------------------------------------------------------

    def run(self):
        cdef Py_ssize_t p, s, i, j, b, m, g, ph, dst
        cdef double t, r, jobrate, u, v, w, acc
        cdef long long cnt, obs
        cdef int ev, idx, nxt, noc, new_rc, cand, k
        cdef long long evgen
        cdef bint depart, is_real
        cdef _BackupPool bp

        # Initial evaluation at time zero (see the pure twin).
        for p in range(self.n_pools):
            for s in range(self.L[p]):
                g = self.off[p] + s
                if (
                    self.tokcnt[g] == 0
                    and self.oc[g] == self.zero
                    and self.kind[p, self.zero] == IMPULSE
                ):
                    self.n_touched = 0
                    self.touch(s)
                    self.chain(p, s, self.zero, False, -1, 0.0)
            for s in range(self.L[p]):
                self.schedule_server(p, s, 0.0)
            for i in range(self.n_ph):
                if self.arr_rate[p, i] > 0.0:
                    self.seq += 1
                    self.heap.push(
                        expo(self.rng, p * self.n_ph + i, self.arr_rate[p, i]),
                        self.seq, EV_ARRIVAL, <int> p, <int> i, 0,
                    )

        while self.heap.size > 0:
            t = self.heap.time[0]
            ev = self.heap.kind[0]
            p = self.heap.pool[0]
            idx = self.heap.idx[0]
            evgen = self.heap.gen[0]
            self.heap.pop()
            if t >= self.horizon:
                break
            if self.max_events and self.events >= self.max_events:
                break
            if ev == EV_SERVER and evgen != self.gen[self.off[p] + idx]:
                continue
            if ev == EV_BACKUP:
                bp = <_BackupPool> self.backups[p]
                if evgen != bp.gen[idx]:
                    continue
            self.pops += 1
            if self.batch_len > 0.0:
                self.accumulate(self.t_last, t)
            self.t_last = t
            self.t_now = t
            self.events += 1
            if t >= self.warmup:
                self.events_post += 1

            if ev == EV_ARRIVAL:
                i = idx
                self.seq += 1
                self.heap.push(
                    t + expo(self.rng, p * self.n_ph + i, self.arr_rate[p, i]),
                    self.seq, EV_ARRIVAL, <int> p, <int> i, 0,
                )
                self.arrivals[i] += 1
                if self.zlen[p, i] > 0:
                    j = pick(self.rng, self.rt0 + p, self.zlen[p, i])
                    s = self.tokens[p, i, j]
                    self.tokens[p, i, j] = self.tokens[p, i, self.zlen[p, i] - 1]
                    self.zlen[p, i] -= 1
                    g = self.off[p] + s
                    self.tok[g, i] -= 1
                    self.tokcnt[g] -= 1
                    self.ztot[i] -= 1
                    self.real[g, i] += 1
                    noc = self.idx_plus[self.oc[g], i]
                    if noc < 0:
                        self.breach("delivery past the service limit")
                    self.oc[g] = noc
                    self.real_config_shift(p, s, self.idx_plus[self.rc[g], i])
                    if self.trace is not None:
                        self.trace.append((t, T_ARR_MATCH, p, s, i))
                    self.schedule_server(p, s, t)
                    if self.check:
                        self.check_server(p, s)
                else:
                    bp = <_BackupPool> self.backups[p]
                    if bp.idle.size > 0:
                        b = bp.idle.pop()
                    else:
                        self.occ_flush_zero(t)
                        b = bp.create(self.zero)
                        self.occ_cnt[self.zero] += 1
                    bp.state[b, i] += 1
                    self.backup_jobs += 1
                    self.backup_placements[i] += 1
                    new_rc = self.idx_plus[bp.rc[b], i]
                    if new_rc < 0:
                        self.breach("backup server above the service limit")
                    if bp.rc[b] == self.zero:
                        self.n_active += 1
                    self.cost_sum += self.h_table[new_rc] - self.h_table[bp.rc[b]]
                    self.occ_change(bp.rc[b], new_rc, t)
                    bp.rc[b] = new_rc
                    if self.trace is not None:
                        self.trace.append((t, T_ARR_BACKUP, p, b, i))
                    self.schedule_backup(p, b, t)

            elif ev == EV_SERVER:
                s = idx
                g = self.off[p] + s
                r = self.server_rate(p, s)
                jobrate = 0.0
                for i in range(self.n_ph):
                    cnt = self.real[g, i] + self.virt[g, i]
                    if cnt:
                        jobrate += cnt * self.ter[i]
                u = u01(self.rng, self.rs0 + p) * r
                self.n_touched = 0
                self.touch(s)
                if u < jobrate:
                    acc = 0.0
                    ph = -1
                    for i in range(self.n_ph):
                        cnt = self.real[g, i] + self.virt[g, i]
                        if cnt:
                            ph = i
                            acc += cnt * self.ter[i]
                            if u < acc:
                                break
                    v = u01(self.rng, self.rs0 + p) * self.ter[ph]
                    depart = v < self.mu_dep[ph] or not self.has_internal[ph]
                    dst = -1
                    if not depart:
                        acc = self.mu_dep[ph]
                        for j in range(self.n_ph):
                            if j != ph and self.mu_move[ph, j] > 0:
                                dst = j
                                acc += self.mu_move[ph, j]
                                if v < acc:
                                    break
                    obs = self.real[g, ph] + self.virt[g, ph]
                    w = u01(self.rng, self.rs0 + p) * obs
                    is_real = w < self.real[g, ph]
                    if is_real:
                        self.real[g, ph] -= 1
                        if depart:
                            self.real_config_shift(
                                p, s, self.idx_minus[self.rc[g], ph]
                            )
                            self.oc[g] = self.idx_minus[self.oc[g], ph]
                        else:
                            self.real[g, dst] += 1
                            self.real_config_shift(
                                p, s, self.idx_move[self.rc[g], ph, dst]
                            )
                            self.oc[g] = self.idx_move[self.oc[g], ph, dst]
                        if self.trace is not None:
                            self.trace.append(
                                (t, T_DEPART if depart else T_MOVE, p, s, ph)
                            )
                    else:
                        self.virt[g, ph] -= 1
                        self.virt_total -= 1
                        if depart:
                            self.oc[g] = self.idx_minus[self.oc[g], ph]
                        else:
                            self.virt[g, dst] += 1
                            self.virt_total += 1
                            self.oc[g] = self.idx_move[self.oc[g], ph, dst]
                        if self.trace is not None:
                            self.trace.append(
                                (t, T_VDEPART if depart else T_VMOVE, p, s, ph)
                            )
                    if self.tokcnt[g] == 0 and self.kind[p, self.oc[g]] == IMPULSE:
                        self.chain(p, s, self.oc[g], False, -1, t)
                else:
                    nxt = self.oc[g]
                    k = self.kind[p, nxt]
                    if self.trace is not None:
                        self.trace.append((t, T_TICK, p, s, -1))
                    if k == PROACTIVE:
                        v = u01(self.rng, self.rs0 + p) * self.pro_total[p, nxt]
                        acc = 0.0
                        ph = -1
                        for j in range(self.n_ph):
                            if self.pro_rate[p, nxt, j] > 0:
                                ph = j
                                acc += self.pro_rate[p, nxt, j]
                                if v < acc:
                                    break
                        self.chain(p, s, nxt, False, ph, t)
                    elif k == JUMP:
                        self.chain(p, s, nxt, True, -1, t)
                    else:
                        self.breach("timer fired at a quiet configuration")
                for m in range(self.n_touched):
                    self.schedule_server(p, self.touched[m], t)
                    if self.check:
                        self.check_server(p, self.touched[m])

            else:  # EV_BACKUP
                b = idx
                bp = <_BackupPool> self.backups[p]
                r = 0.0
                for i in range(self.n_ph):
                    if bp.state[b, i]:
                        r += bp.state[b, i] * self.ter[i]
                u = u01(self.rng, self.rb0 + p) * r
                acc = 0.0
                ph = -1
                for i in range(self.n_ph):
                    if bp.state[b, i]:
                        ph = i
                        acc += bp.state[b, i] * self.ter[i]
                        if u < acc:
                            break
                v = u01(self.rng, self.rb0 + p) * self.ter[ph]
                bp.state[b, ph] -= 1
                self.backup_jobs -= 1
                if v < self.mu_dep[ph] or not self.has_internal[ph]:
                    new_rc = self.idx_minus[bp.rc[b], ph]
                    if self.trace is not None:
                        self.trace.append((t, T_BACKUP_DEP, p, b, ph))
                else:
                    acc = self.mu_dep[ph]
                    dst = -1
                    for j in range(self.n_ph):
                        if j != ph and self.mu_move[ph, j] > 0:
                            dst = j
                            acc += self.mu_move[ph, j]
                            if v < acc:
                                break
                    bp.state[b, dst] += 1
                    self.backup_jobs += 1
                    new_rc = self.idx_move[bp.rc[b], ph, dst]
                    if self.trace is not None:
                        self.trace.append((t, T_BACKUP_MOVE, p, b, ph))
                if new_rc == self.zero:
                    self.n_active -= 1
                self.cost_sum += self.h_table[new_rc] - self.h_table[bp.rc[b]]
                self.occ_change(bp.rc[b], new_rc, t)
                bp.rc[b] = new_rc
                if new_rc == self.zero:
                    bp.idle.push(<int> b)
                else:
                    self.schedule_backup(p, b, t)
                if self.check and self.backup_jobs < 0:
                    self.breach("negative backup job count")

        # Finalize.
        cdef bint stopped_early = self.max_events and self.events >= self.max_events
        cdef double end = self.t_last if stopped_early else self.horizon
        if self.batch_len > 0.0 and not stopped_early and self.t_last < self.horizon:
            self.accumulate(self.t_last, self.horizon)
        cdef double flush_to = end if end < self.horizon else self.horizon
        cdef Py_ssize_t cfg
        for cfg in range(self.n_cfg):
            if flush_to > self.occ_last[cfg]:
                self.occ_int[cfg] += self.occ_cnt[cfg] * (
                    flush_to - self.occ_last[cfg]
                )
                self.occ_last[cfg] = flush_to

        if self.check:
            self.audit()

        return {
            "end_time": end,
            "events": self.events,
            "events_post": self.events_post,
            "pops": self.pops,
            "window": self.window,
            "batch_len": self.batch_len,
            "batch_active": np.asarray(self.batch_active).tolist(),
            "batch_cost": np.asarray(self.batch_cost).tolist(),
            "batch_virt": np.asarray(self.batch_virt).tolist(),
            "batch_backup": np.asarray(self.batch_backup).tolist(),
            "batch_tokens": np.asarray(self.batch_tok).tolist(),
            "occupancy": np.asarray(self.occ_int).tolist(),
            "arrivals": np.asarray(self.arrivals).tolist(),
            "virtual_arrivals": np.asarray(self.virtual_arrivals).tolist(),
            "backup_placements": np.asarray(self.backup_placements).tolist(),
            "trace": self.trace,
        }

    cdef int audit(self) except -1:
        cdef long long act = 0, vt = 0, bj = 0, tot
        cdef double cost = 0.0
        cdef Py_ssize_t p, s, i, b, g
        cdef long long[::1] z = np.zeros(self.n_ph, dtype=np.int64)
        cdef _BackupPool bp
        cdef long long persrv
        for p in range(self.n_pools):
            for s in range(self.L[p]):
                g = self.off[p] + s
                tot = 0
                for i in range(self.n_ph):
                    tot += self.real[g, i]
                    vt += self.virt[g, i]
                    z[i] += self.tok[g, i]
                if tot > 0:
                    act += 1
                cost += self.h_table[self.rc[g]]
                persrv = 0
                for i in range(self.n_ph):
                    persrv += self.tok[g, i]
                if self.tokcnt[g] != persrv:
                    self.breach("token counter drift in audit")
            bp = <_BackupPool> self.backups[p]
            for b in range(bp.used):
                tot = 0
                for i in range(self.n_ph):
                    tot += bp.state[b, i]
                if tot > 0:
                    act += 1
                bj += tot
                cost += self.h_table[bp.rc[b]]
            for i in range(self.n_ph):
                persrv = 0
                for s in range(self.L[p]):
                    persrv += self.tok[self.off[p] + s, i]
                if self.zlen[p, i] != persrv:
                    self.breach("token pool inconsistent with per-server counts")
        if act != self.n_active:
            self.breach(f"active-count drift: {act} != {self.n_active}")
        if cost - self.cost_sum > 1e-6 or self.cost_sum - cost > 1e-6:
            self.breach(f"cost-sum drift: {cost} != {self.cost_sum}")
        if vt != self.virt_total:
            self.breach("virtual-job total drift")
        if bj != self.backup_jobs:
            self.breach("backup-job total drift")
        for i in range(self.n_ph):
            if z[i] != self.ztot[i]:
                self.breach("token total drift")
        return 0


def run_fleet(plan):
    """Token-dispatch fleet loop; see the pure twin for commentary."""
    return _Fleet(plan).run()


cdef class _Baseline:
    cdef Py_ssize_t n_ph, n_cfg, nb
    cdef int zero, kmax
    cdef double horizon, warmup, batch_len, window
    cdef long long max_events
    cdef bint first_fit

    cdef int[:, ::1] idx_plus
    cdef int[:, ::1] idx_minus
    cdef int[:, :, ::1] idx_move
    cdef double[::1] h_table
    cdef double[::1] mu_dep
    cdef double[::1] ter
    cdef double[:, ::1] mu_move
    cdef signed char[::1] has_internal
    cdef double[::1] arr_rate

    cdef unsigned long long[::1] rng  # arr streams then bak at n_ph

    cdef long long[:, ::1] state
    cdef int[::1] s_rc
    cdef long long[::1] s_gen
    cdef Py_ssize_t used, cap
    cdef IntHeap idle
    cdef IntHeap room

    cdef EventHeap heap
    cdef long long seq

    cdef double[::1] batch_active
    cdef double[::1] batch_cost
    cdef double[::1] occ_int
    cdef double[::1] occ_last
    cdef long long[::1] occ_cnt
    cdef long long n_active
    cdef double cost_sum
    cdef long long[::1] arrivals

    cdef long long events, events_post
    cdef double t_last

    def __init__(self, plan):
        cdef Py_ssize_t i, j
        self.n_ph = plan["num_phases"]
        self.n_cfg = plan["n_configs"]
        self.zero = plan["zero_idx"]
        self.kmax = int(plan["kmax"])
        self.idx_plus = np.ascontiguousarray(plan["idx_plus"], dtype=np.int32)
        self.idx_minus = np.ascontiguousarray(plan["idx_minus"], dtype=np.int32)
        self.idx_move = np.ascontiguousarray(plan["idx_move"], dtype=np.int32)
        self.h_table = np.ascontiguousarray(plan["h"], dtype=np.float64)
        self.mu_dep = np.ascontiguousarray(plan["mu_dep"], dtype=np.float64)
        self.mu_move = np.ascontiguousarray(plan["mu_move"], dtype=np.float64)
        self.ter = np.ascontiguousarray(plan["ter"], dtype=np.float64)
        self.has_internal = np.zeros(self.n_ph, dtype=np.int8)
        for i in range(self.n_ph):
            for j in range(self.n_ph):
                if j != i and self.mu_move[i, j] > 0:
                    self.has_internal[i] = 1
                    break
        self.arr_rate = np.ascontiguousarray(plan["arrival_rates"], dtype=np.float64)
        self.horizon = float(plan["horizon"])
        self.warmup = float(plan["warmup"])
        self.nb = int(plan["nbatches"])
        self.max_events = int(plan.get("max_events", 0))
        self.first_fit = plan["strategy"] == "first-fit"

        cdef unsigned long long master = (
            <unsigned long long> (int(plan["seed"]) & 0xFFFFFFFFFFFFFFFF)
        )
        self.rng = np.empty(self.n_ph + 1, dtype=np.uint64)
        for i in range(self.n_ph):
            self.rng[i] = derive(master, 1, 0, i)
        self.rng[self.n_ph] = derive(master, 4, 0, 0)

        self.cap = 64
        self.used = 0
        self.state = np.zeros((self.cap, self.n_ph), dtype=np.int64)
        self.s_rc = np.empty(self.cap, dtype=np.int32)
        self.s_gen = np.zeros(self.cap, dtype=np.int64)
        self.idle = IntHeap()
        self.room = IntHeap()
        self.heap = EventHeap()
        self.seq = 0

        self.window = self.horizon - self.warmup
        self.batch_len = self.window / self.nb if self.window > 0 else 0.0
        self.batch_active = np.zeros(self.nb, dtype=np.float64)
        self.batch_cost = np.zeros(self.nb, dtype=np.float64)
        self.occ_int = np.zeros(self.n_cfg, dtype=np.float64)
        self.occ_cnt = np.zeros(self.n_cfg, dtype=np.int64)
        self.occ_last = np.full(self.n_cfg, self.warmup, dtype=np.float64)
        self.n_active = 0
        self.cost_sum = 0.0
        self.arrivals = np.zeros(self.n_ph, dtype=np.int64)
        self.events = 0
        self.events_post = 0
        self.t_last = 0.0

    cdef void occ_change(self, int old, int new, double t) noexcept:
        cdef double eff = t
        if eff < self.warmup:
            eff = self.warmup
        if eff > self.horizon:
            eff = self.horizon
        if eff > self.occ_last[old]:
            self.occ_int[old] += self.occ_cnt[old] * (eff - self.occ_last[old])
        self.occ_last[old] = eff
        if eff > self.occ_last[new]:
            self.occ_int[new] += self.occ_cnt[new] * (eff - self.occ_last[new])
        self.occ_last[new] = eff
        self.occ_cnt[old] -= 1
        self.occ_cnt[new] += 1

    cdef Py_ssize_t create(self, double t):
        cdef double eff
        if self.used == self.cap:
            s2 = np.zeros((self.cap * 2, self.n_ph), dtype=np.int64)
            r2 = np.empty(self.cap * 2, dtype=np.int32)
            g2 = np.zeros(self.cap * 2, dtype=np.int64)
            s2[: self.cap] = np.asarray(self.state)
            r2[: self.cap] = np.asarray(self.s_rc)
            g2[: self.cap] = np.asarray(self.s_gen)
            self.state = s2
            self.s_rc = r2
            self.s_gen = g2
            self.cap *= 2
        eff = t
        if eff < self.warmup:
            eff = self.warmup
        if eff > self.horizon:
            eff = self.horizon
        if eff > self.occ_last[self.zero]:
            self.occ_int[self.zero] += self.occ_cnt[self.zero] * (
                eff - self.occ_last[self.zero]
            )
        self.occ_last[self.zero] = eff
        cdef Py_ssize_t out = self.used
        self.s_rc[out] = self.zero
        self.occ_cnt[self.zero] += 1
        self.used += 1
        return out

    cdef void schedule(self, Py_ssize_t srv, double t) noexcept:
        cdef double r = 0.0, dt
        cdef Py_ssize_t i
        self.s_gen[srv] += 1
        for i in range(self.n_ph):
            if self.state[srv, i]:
                r += self.state[srv, i] * self.ter[i]
        if r > 0.0:
            dt = expo(self.rng, self.n_ph, r)
            self.seq += 1
            self.heap.push(t + dt, self.seq, EV_BACKUP, 0, <int> srv, self.s_gen[srv])

    cdef void accumulate(self, double t0, double t1) noexcept:
        cdef double a = t0 if t0 > self.warmup else self.warmup
        cdef double b = t1 if t1 < self.horizon else self.horizon
        cdef double seg, dt
        cdef Py_ssize_t bi
        while a < b:
            bi = <Py_ssize_t> ((a - self.warmup) / self.batch_len)
            if bi >= self.nb:
                bi = self.nb - 1
            seg = self.warmup + (bi + 1) * self.batch_len
            if seg > b:
                seg = b
            if seg <= a:
                break
            dt = seg - a
            self.batch_active[bi] += dt * self.n_active
            self.batch_cost[bi] += dt * self.cost_sum
            a = seg

    def run(self):
        cdef Py_ssize_t i, j, srv, target, ph, dst
        cdef double t, r, u, v, acc
        cdef int ev, idx, new_rc, cand
        cdef long long evgen, tot
        cdef bint had_room

        for i in range(self.n_ph):
            if self.arr_rate[i] > 0.0:
                self.seq += 1
                self.heap.push(
                    expo(self.rng, i, self.arr_rate[i]),
                    self.seq, EV_ARRIVAL, 0, <int> i, 0,
                )

        while self.heap.size > 0:
            t = self.heap.time[0]
            ev = self.heap.kind[0]
            idx = self.heap.idx[0]
            evgen = self.heap.gen[0]
            self.heap.pop()
            if t >= self.horizon:
                break
            if self.max_events and self.events >= self.max_events:
                break
            if ev == EV_BACKUP and evgen != self.s_gen[idx]:
                continue
            if self.batch_len > 0.0:
                self.accumulate(self.t_last, t)
            self.t_last = t
            self.events += 1
            if t >= self.warmup:
                self.events_post += 1

            if ev == EV_ARRIVAL:
                i = idx
                self.seq += 1
                self.heap.push(
                    t + expo(self.rng, i, self.arr_rate[i]),
                    self.seq, EV_ARRIVAL, 0, <int> i, 0,
                )
                self.arrivals[i] += 1
                target = -1
                if self.first_fit:
                    while self.room.size > 0:
                        cand = self.room.peek()
                        tot = 0
                        for j in range(self.n_ph):
                            tot += self.state[cand, j]
                        if tot < self.kmax:
                            target = cand
                            break
                        self.room.pop()
                if target < 0:
                    while self.idle.size > 0:
                        cand = self.idle.pop()
                        tot = 0
                        for j in range(self.n_ph):
                            tot += self.state[cand, j]
                        if tot == 0:
                            target = cand
                            break
                    if target < 0:
                        target = self.create(t)
                    if self.first_fit and self.kmax > 1:
                        self.room.push(<int> target)
                self.state[target, i] += 1
                new_rc = self.idx_plus[self.s_rc[target], i]
                if new_rc < 0:
                    raise InvariantBreachError("baseline exceeded service limit")
                if self.s_rc[target] == self.zero:
                    self.n_active += 1
                self.cost_sum += self.h_table[new_rc] - self.h_table[self.s_rc[target]]
                self.occ_change(self.s_rc[target], new_rc, t)
                self.s_rc[target] = new_rc
                tot = 0
                for j in range(self.n_ph):
                    tot += self.state[target, j]
                if (
                    self.first_fit
                    and tot >= self.kmax
                    and self.room.size > 0
                    and self.room.peek() == target
                ):
                    self.room.pop()
                self.schedule(target, t)
            else:
                srv = idx
                r = 0.0
                for i in range(self.n_ph):
                    if self.state[srv, i]:
                        r += self.state[srv, i] * self.ter[i]
                u = u01(self.rng, self.n_ph) * r
                acc = 0.0
                ph = -1
                for i in range(self.n_ph):
                    if self.state[srv, i]:
                        ph = i
                        acc += self.state[srv, i] * self.ter[i]
                        if u < acc:
                            break
                v = u01(self.rng, self.n_ph) * self.ter[ph]
                tot = 0
                for j in range(self.n_ph):
                    tot += self.state[srv, j]
                had_room = tot < self.kmax
                self.state[srv, ph] -= 1
                if v < self.mu_dep[ph] or not self.has_internal[ph]:
                    new_rc = self.idx_minus[self.s_rc[srv], ph]
                else:
                    acc = self.mu_dep[ph]
                    dst = -1
                    for j in range(self.n_ph):
                        if j != ph and self.mu_move[ph, j] > 0:
                            dst = j
                            acc += self.mu_move[ph, j]
                            if v < acc:
                                break
                    self.state[srv, dst] += 1
                    new_rc = self.idx_move[self.s_rc[srv], ph, dst]
                if new_rc == self.zero:
                    self.n_active -= 1
                    self.idle.push(<int> srv)
                self.cost_sum += self.h_table[new_rc] - self.h_table[self.s_rc[srv]]
                self.occ_change(self.s_rc[srv], new_rc, t)
                self.s_rc[srv] = new_rc
                tot = 0
                for j in range(self.n_ph):
                    tot += self.state[srv, j]
                if self.first_fit and not had_room and tot < self.kmax:
                    self.room.push(<int> srv)
                if tot > 0:
                    self.schedule(srv, t)

        cdef bint stopped_early = self.max_events and self.events >= self.max_events
        cdef double end = self.t_last if stopped_early else self.horizon
        if self.batch_len > 0.0 and not stopped_early and self.t_last < self.horizon:
            self.accumulate(self.t_last, self.horizon)
        cdef double flush_to = end if end < self.horizon else self.horizon
        cdef Py_ssize_t cfg
        for cfg in range(self.n_cfg):
            if flush_to > self.occ_last[cfg]:
                self.occ_int[cfg] += self.occ_cnt[cfg] * (
                    flush_to - self.occ_last[cfg]
                )
                self.occ_last[cfg] = flush_to

        return {
            "end_time": end,
            "events": self.events,
            "events_post": self.events_post,
            "window": self.window,
            "batch_len": self.batch_len,
            "batch_active": np.asarray(self.batch_active).tolist(),
            "batch_cost": np.asarray(self.batch_cost).tolist(),
            "batch_virt": [0.0] * self.nb,
            "batch_backup": [0.0] * self.nb,
            "batch_tokens": [[0.0] * self.n_ph for _ in range(self.nb)],
            "occupancy": np.asarray(self.occ_int).tolist(),
            "arrivals": np.asarray(self.arrivals).tolist(),
            "virtual_arrivals": [0] * self.n_ph,
            "backup_placements": [0] * self.n_ph,
            "trace": None,
        }


def run_baseline(plan):
    """Greedy dispatcher loop; see the pure twin for commentary."""
    return _Baseline(plan).run()
