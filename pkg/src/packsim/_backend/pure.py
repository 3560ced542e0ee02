"""Pure-Python simulation kernels.

Reference implementation of the event loops; the compiled module in
``_core.pyx`` mirrors this code statement for statement.  Both consume
identical SplitMix64 streams in identical order, so a run is bit-for-bit
reproducible across backends.

Events live in a binary heap keyed by (time, sequence number); sequence
numbers are unique, so pop order is a strict total order and independent
of heap internals.  Server events are rescheduled from scratch whenever
the owning server changes (memorylessness makes that exact), with a
generation counter invalidating stale entries lazily.
"""

from heapq import heappop, heappush

from ..errors import InvariantBreachError
from ..rng import SplitMix64, derive_seed

BACKEND_NAME = "pure"

# Event kinds in the heap.
EV_ARRIVAL, EV_SERVER, EV_BACKUP = 0, 1, 2

# Action kinds (must match packsim.policy).
QUIET, PROACTIVE, IMPULSE, JUMP = 0, 1, 2, 3

# Trace record codes.
T_ARR_MATCH = 0
T_ARR_BACKUP = 1
T_VIRT_DELIVER = 2
T_DEPART = 3
T_MOVE = 4
T_VDEPART = 5
T_VMOVE = 6
T_TOKEN = 7
T_TICK = 8
T_BACKUP_DEP = 9
T_BACKUP_MOVE = 10

TRACE_NAMES = {
    T_ARR_MATCH: "arrival",
    T_ARR_BACKUP: "arrival_backup",
    T_VIRT_DELIVER: "virtual_delivery",
    T_DEPART: "departure",
    T_MOVE: "transition",
    T_VDEPART: "virtual_departure",
    T_VMOVE: "virtual_transition",
    T_TOKEN: "token",
    T_TICK: "timer",
    T_BACKUP_DEP: "backup_departure",
    T_BACKUP_MOVE: "backup_transition",
}


def _as_lists(arr):
    return arr.tolist() if hasattr(arr, "tolist") else arr


def run_single(plan):
    """Single-server event loop: requests are fulfilled immediately.

    Returns per-batch occupancy integrals and per-(config, type) nominal
    request counts for empirical comparison against the LP solution.
    """
    n_ph = plan["num_phases"]
    n_cfg = plan["n_configs"]
    idx_plus = _as_lists(plan["idx_plus"])
    idx_minus = _as_lists(plan["idx_minus"])
    idx_move = _as_lists(plan["idx_move"])
    mu_dep = _as_lists(plan["mu_dep"])
    mu_move = _as_lists(plan["mu_move"])
    ter = _as_lists(plan["ter"])
    has_internal = [
        any(mu_move[i][j] > 0 for j in range(n_ph) if j != i)
        for i in range(n_ph)
    ]
    kind = _as_lists(plan["kind"])
    pro_rate = _as_lists(plan["pro_rate"])
    pro_total = _as_lists(plan["pro_total"])
    imp_prob = _as_lists(plan["imp_prob"])
    jump_seq = list(plan["jump_seq"])
    counts = _as_lists(plan["counts"])
    horizon = float(plan["horizon"])
    warmup = float(plan["warmup"])
    nb = int(plan["nbatches"])
    max_events = int(plan.get("max_events", 0))

    srv = SplitMix64(derive_seed(plan["seed"], 2, 0, 0))
    window = horizon - warmup
    batch_len = window / nb if window > 0 else 0.0

    occ = [[0.0] * n_cfg for _ in range(nb)]
    req = [[[0.0] * n_ph for _ in range(n_cfg)] for _ in range(nb)]
    requests_total = [0] * n_ph
    zero = plan["zero_idx"]

    c = zero  # current configuration index
    state = [0] * n_ph

    def batch_of(t):
        b = int((t - warmup) / batch_len)
        return nb - 1 if b >= nb else b

    def count_request(t, cfg, i):
        requests_total[i] += 1
        if batch_len > 0.0 and warmup <= t < horizon:
            req[batch_of(t)][cfg][i] += 1.0

    def chain(t, x, pending):
        """Execute requests: forced types first, then the impulse chain."""
        for i in pending:
            count_request(t, x, i)
            nxt = idx_plus[x][i]
            if nxt < 0:
                raise InvariantBreachError("request past the service limit")
            state[i] += 1
            x = nxt
        while kind[x] == IMPULSE:
            u = srv.u01()
            acc = 0.0
            probs = imp_prob[x]
            i = -1
            for j in range(n_ph):
                if probs[j] > 0:
                    i = j  # last positive branch is the rounding fallback
                    acc += probs[j]
                    if u < acc:
                        break
            count_request(t, x, i)
            nxt = idx_plus[x][i]
            if nxt < 0:
                raise InvariantBreachError("impulse past the service limit")
            state[i] += 1
            x = nxt
        return x

    c = chain(0.0, c, [])  # initial action: impulses fire at time zero

    events = 0
    t_last = 0.0

    def total_rate(cfg):
        r = 0.0
        for i in range(n_ph):
            if state[i]:
                r += state[i] * ter[i]
        if kind[cfg] == PROACTIVE:
            r += pro_total[cfg]
        elif kind[cfg] == JUMP:
            r += 1.0
        return r

    def credit(t0, t1, cfg):
        a = max(t0, warmup)
        b = min(t1, horizon)
        while a < b:
            bi = batch_of(a)
            seg = min(b, warmup + (bi + 1) * batch_len)
            if seg <= a:
                break
            occ[bi][cfg] += seg - a
            a = seg

    while True:
        r = total_rate(c)
        if r <= 0.0:
            break
        t = t_last + srv.exponential(r)
        if t >= horizon:
            break
        if max_events and events >= max_events:
            break
        if batch_len > 0.0:
            credit(t_last, t, c)
        t_last = t
        events += 1

        jobrate = 0.0
        for i in range(n_ph):
            if state[i]:
                jobrate += state[i] * ter[i]
        u = srv.u01() * r
        if u < jobrate:
            # Job transition or departure: pick phase, then branch.
            acc = 0.0
            ph = -1
            for i in range(n_ph):
                if state[i]:
                    ph = i
                    acc += state[i] * ter[i]
                    if u < acc:
                        break
            v = srv.u01() * ter[ph]
            state[ph] -= 1
            if v < mu_dep[ph] or not has_internal[ph]:
                c = idx_minus[c][ph]
            else:
                acc = mu_dep[ph]
                dst = -1
                for j in range(n_ph):
                    if j != ph and mu_move[ph][j] > 0:
                        dst = j
                        acc += mu_move[ph][j]
                        if v < acc:
                            break
                state[dst] += 1
                c = idx_move[c][ph][dst]
            if kind[c] == IMPULSE:
                c = chain(t, c, [])
        else:
            # Request timer tick.
            if kind[c] == PROACTIVE:
                v = srv.u01() * pro_total[c]
                acc = 0.0
                i = -1
                for j in range(n_ph):
                    if pro_rate[c][j] > 0:
                        i = j
                        acc += pro_rate[c][j]
                        if v < acc:
                            break
                c = chain(t, c, [i])
            else:  # JUMP at the empty configuration
                c = chain(t, c, jump_seq)

    stopped_early = bool(max_events and events >= max_events)
    end = t_last if stopped_early else horizon
    if batch_len > 0.0 and not stopped_early and t_last < horizon:
        credit(t_last, horizon, c)
    return {
        "end_time": end,
        "events": events,
        "window": window,
        "batch_len": batch_len,
        "occupancy_batches": occ,
        "request_batches": req,
        "requests": requests_total,
        "final_config": tuple(counts[c]),
    }


def run_fleet(plan):
    """Token-dispatch fleet event loop over one or more server pools."""
    n_ph = plan["num_phases"]
    n_cfg = plan["n_configs"]
    idx_plus = _as_lists(plan["idx_plus"])
    idx_minus = _as_lists(plan["idx_minus"])
    idx_move = _as_lists(plan["idx_move"])
    h_table = _as_lists(plan["h"])
    mu_dep = _as_lists(plan["mu_dep"])
    mu_move = _as_lists(plan["mu_move"])
    ter = _as_lists(plan["ter"])
    has_internal = [
        any(mu_move[i][j] > 0 for j in range(n_ph) if j != i)
        for i in range(n_ph)
    ]
    horizon = float(plan["horizon"])
    warmup = float(plan["warmup"])
    nb = int(plan["nbatches"])
    max_events = int(plan.get("max_events", 0))
    check = bool(plan.get("check", False))
    do_trace = bool(plan.get("trace", False))
    kmax = int(plan["kmax"])
    zero = plan["zero_idx"]
    seed = plan["seed"]

    pools = plan["pools"]
    n_pools = len(pools)
    L = [int(p["L"]) for p in pools]
    token_cap = [int(p["token_cap"]) for p in pools]
    arr_rate = [_as_lists(p["arrival_rates"]) for p in pools]
    kind = [_as_lists(p["kind"]) for p in pools]
    pro_rate = [_as_lists(p["pro_rate"]) for p in pools]
    pro_total = [_as_lists(p["pro_total"]) for p in pools]
    imp_prob = [_as_lists(p["imp_prob"]) for p in pools]
    jump_seq = [list(p["jump_seq"]) for p in pools]

    arr_rng = [
        [SplitMix64(derive_seed(seed, 1, p, i)) for i in range(n_ph)]
        for p in range(n_pools)
    ]
    srv_rng = [SplitMix64(derive_seed(seed, 2, p, 0)) for p in range(n_pools)]
    tok_rng = [SplitMix64(derive_seed(seed, 3, p, 0)) for p in range(n_pools)]
    bak_rng = [SplitMix64(derive_seed(seed, 4, p, 0)) for p in range(n_pools)]

    # Normal-server state, all per pool.
    real = [[[0] * n_ph for _ in range(L[p])] for p in range(n_pools)]
    virt = [[[0] * n_ph for _ in range(L[p])] for p in range(n_pools)]
    tok = [[[0] * n_ph for _ in range(L[p])] for p in range(n_pools)]
    tokcnt = [[0] * L[p] for p in range(n_pools)]
    rc = [[zero] * L[p] for p in range(n_pools)]   # real-config index
    oc = [[zero] * L[p] for p in range(n_pools)]   # observed-config index
    gen = [[0] * L[p] for p in range(n_pools)]
    tokens = [[[] for _ in range(n_ph)] for _ in range(n_pools)]

    # Backup-server state: grown on demand, reused lowest-index-idle.
    bk_state = [[] for _ in range(n_pools)]   # per server per phase counts
    bk_rc = [[] for _ in range(n_pools)]
    bk_gen = [[] for _ in range(n_pools)]
    bk_idle = [[] for _ in range(n_pools)]    # min-heap of idle indices

    # Metrics.
    window = horizon - warmup
    batch_len = window / nb if window > 0 else 0.0
    batch_active = [0.0] * nb
    batch_cost = [0.0] * nb
    batch_virt = [0.0] * nb
    batch_backup = [0.0] * nb
    batch_tok = [[0.0] * n_ph for _ in range(nb)]
    occ_int = [0.0] * n_cfg
    occ_cnt = [0] * n_cfg
    occ_last = [warmup] * n_cfg
    n_active = 0
    cost_sum = 0.0
    virt_total = 0
    backup_jobs = 0
    ztot = [0] * n_ph
    arrivals = [0] * n_ph
    virtual_arrivals = [0] * n_ph
    backup_placements = [0] * n_ph
    trace = [] if do_trace else None

    for p in range(n_pools):
        occ_cnt[zero] += L[p]

    heap = []
    seq = 0
    t_now = 0.0

    def occ_change(old, new, t):
        eff = min(max(t, warmup), horizon)
        if eff > occ_last[old]:
            occ_int[old] += occ_cnt[old] * (eff - occ_last[old])
        occ_last[old] = eff
        if eff > occ_last[new]:
            occ_int[new] += occ_cnt[new] * (eff - occ_last[new])
        occ_last[new] = eff
        occ_cnt[old] -= 1
        occ_cnt[new] += 1

    def breach(msg):
        raise InvariantBreachError(f"t={t_now:.6f}: {msg}")

    def check_server(p, s):
        tot = 0
        for i in range(n_ph):
            if real[p][s][i] < 0 or virt[p][s][i] < 0 or tok[p][s][i] < 0:
                breach(f"negative count on pool {p} server {s}")
            tot += real[p][s][i] + virt[p][s][i] + tok[p][s][i]
        if tot > kmax:
            breach(f"pool {p} server {s} holds {tot} > service limit")
        if tokcnt[p][s] != sum(tok[p][s]):
            breach("token counter drift")

    # --- request machinery -------------------------------------------------

    def gen_token(p, s, i, t, touched):
        nonlocal virt_total
        tokens[p][i].append(s)
        tok[p][s][i] += 1
        tokcnt[p][s] += 1
        ztot[i] += 1
        if trace is not None:
            trace.append((t, T_TOKEN, p, s, i))
        if len(tokens[p][i]) > token_cap[p]:
            # Over the cap: convert one uniformly random token of this
            # type into a virtual job on its owner.
            lst = tokens[p][i]
            j = tok_rng[p].pick(len(lst))
            victim = lst[j]
            lst[j] = lst[-1]
            lst.pop()
            tok[p][victim][i] -= 1
            tokcnt[p][victim] -= 1
            ztot[i] -= 1
            virt[p][victim][i] += 1
            virt_total += 1
            virtual_arrivals[i] += 1
            noc = idx_plus[oc[p][victim]][i]
            if noc < 0:
                breach("virtual delivery past the service limit")
            oc[p][victim] = noc
            if trace is not None:
                trace.append((t, T_VIRT_DELIVER, p, victim, i))
            if victim not in touched:
                touched.append(victim)
        if check:
            if len(tokens[p][i]) > token_cap[p]:
                breach(f"token count {len(tokens[p][i])} above cap")
            check_server(p, s)

    def chain(p, s, x, pending, t, touched):
        """Issue requests from hypothetical configuration x.

        x tracks observed-plus-outstanding-tokens, which deliveries keep
        invariant, so it stays valid even if enforcement hits server s
        mid-chain.
        """
        for i in pending:
            nxt = idx_plus[x][i]
            if nxt < 0:
                breach("request past the service limit")
            gen_token(p, s, i, t, touched)
            x = nxt
        while kind[p][x] == IMPULSE:
            u = srv_rng[p].u01()
            acc = 0.0
            probs = imp_prob[p][x]
            i = -1
            for j in range(n_ph):
                if probs[j] > 0:
                    i = j
                    acc += probs[j]
                    if u < acc:
                        break
            nxt = idx_plus[x][i]
            if nxt < 0:
                breach("impulse past the service limit")
            gen_token(p, s, i, t, touched)
            x = nxt

    def server_rate(p, s):
        r = 0.0
        for i in range(n_ph):
            cnt = real[p][s][i] + virt[p][s][i]
            if cnt:
                r += cnt * ter[i]
        if tokcnt[p][s] == 0:
            k = kind[p][oc[p][s]]
            if k == PROACTIVE:
                r += pro_total[p][oc[p][s]]
            elif k == JUMP:
                r += 1.0
        return r

    def schedule_server(p, s, t):
        nonlocal seq
        gen[p][s] += 1
        r = server_rate(p, s)
        if r > 0.0:
            dt = srv_rng[p].exponential(r)
            seq += 1
            heappush(heap, (t + dt, seq, EV_SERVER, p, s, gen[p][s]))

    def schedule_backup(p, b, t):
        nonlocal seq
        bk_gen[p][b] += 1
        r = 0.0
        st = bk_state[p][b]
        for i in range(n_ph):
            if st[i]:
                r += st[i] * ter[i]
        if r > 0.0:
            dt = bak_rng[p].exponential(r)
            seq += 1
            heappush(heap, (t + dt, seq, EV_BACKUP, p, b, bk_gen[p][b]))

    def real_config_shift(p, s, new_rc):
        """Track active count and cost for a normal server."""
        nonlocal n_active, cost_sum
        old = rc[p][s]
        if old == new_rc:
            return
        if old == zero:
            n_active += 1
        if new_rc == zero:
            n_active -= 1
        cost_sum += h_table[new_rc] - h_table[old]
        occ_change(old, new_rc, t_now)
        rc[p][s] = new_rc

    # --- initial state ------------------------------------------------------

    # Every server starts empty and evaluates its action at time zero.
    # A server already disturbed by a virtual delivery (token-cap overflow
    # from an earlier server's chain) entered its configuration through a
    # delivery, which never fires impulses, so it only gets a timer.
    for p in range(n_pools):
        for s in range(L[p]):
            if (
                tokcnt[p][s] == 0
                and oc[p][s] == zero
                and kind[p][zero] == IMPULSE
            ):
                chain(p, s, zero, [], 0.0, [s])
        for s in range(L[p]):
            schedule_server(p, s, 0.0)
        for i in range(n_ph):
            if arr_rate[p][i] > 0.0:
                seq += 1
                heappush(
                    heap,
                    (arr_rng[p][i].exponential(arr_rate[p][i]), seq,
                     EV_ARRIVAL, p, i, 0),
                )

    events = 0
    events_post = 0
    pops = 0
    t_last = 0.0

    def accumulate(t0, t1):
        a = t0 if t0 > warmup else warmup
        b = t1 if t1 < horizon else horizon
        while a < b:
            bi = int((a - warmup) / batch_len)
            if bi >= nb:
                bi = nb - 1
            seg = warmup + (bi + 1) * batch_len
            if seg > b:
                seg = b
            if seg <= a:
                break
            dt = seg - a
            batch_active[bi] += dt * n_active
            batch_cost[bi] += dt * cost_sum
            batch_virt[bi] += dt * virt_total
            batch_backup[bi] += dt * backup_jobs
            row = batch_tok[bi]
            for i in range(n_ph):
                row[i] += dt * ztot[i]
            a = seg

    # --- main loop -----------------------------------------------------------

    while heap:
        item = heappop(heap)
        t = item[0]
        if t >= horizon:
            break
        if max_events and events >= max_events:
            break
        ev = item[2]
        p = item[3]
        idx = item[4]
        if ev == EV_SERVER and item[5] != gen[p][idx]:
            continue
        if ev == EV_BACKUP and item[5] != bk_gen[p][idx]:
            continue
        pops += 1
        if batch_len > 0.0:
            accumulate(t_last, t)
        t_last = t
        t_now = t
        events += 1
        if t >= warmup:
            events_post += 1

        if ev == EV_ARRIVAL:
            i = idx
            seq += 1
            heappush(
                heap,
                (t + arr_rng[p][i].exponential(arr_rate[p][i]), seq,
                 EV_ARRIVAL, p, i, 0),
            )
            arrivals[i] += 1
            lst = tokens[p][i]
            if lst:
                j = tok_rng[p].pick(len(lst))
                s = lst[j]
                lst[j] = lst[-1]
                lst.pop()
                tok[p][s][i] -= 1
                tokcnt[p][s] -= 1
                ztot[i] -= 1
                real[p][s][i] += 1
                noc = idx_plus[oc[p][s]][i]
                if noc < 0:
                    breach("delivery past the service limit")
                oc[p][s] = noc
                real_config_shift(p, s, idx_plus[rc[p][s]][i])
                if trace is not None:
                    trace.append((t, T_ARR_MATCH, p, s, i))
                # A delivery never triggers reactive requests; it only
                # restarts timers (when the server has no tokens left).
                schedule_server(p, s, t)
                if check:
                    check_server(p, s)
            else:
                if bk_idle[p]:
                    b = heappop(bk_idle[p])
                else:
                    b = len(bk_state[p])
                    bk_state[p].append([0] * n_ph)
                    bk_rc[p].append(zero)
                    bk_gen[p].append(0)
                    # Flush config-zero time before the new server starts
                    # being tracked, so it earns no retroactive idle time.
                    eff = min(max(t, warmup), horizon)
                    if eff > occ_last[zero]:
                        occ_int[zero] += occ_cnt[zero] * (eff - occ_last[zero])
                    occ_last[zero] = eff
                    occ_cnt[zero] += 1
                bk_state[p][b][i] += 1
                backup_jobs += 1
                backup_placements[i] += 1
                new_rc = idx_plus[bk_rc[p][b]][i]
                if new_rc < 0:
                    breach("backup server above the service limit")
                n_active += 1 if bk_rc[p][b] == zero else 0
                cost_sum += h_table[new_rc] - h_table[bk_rc[p][b]]
                occ_change(bk_rc[p][b], new_rc, t)
                bk_rc[p][b] = new_rc
                if trace is not None:
                    trace.append((t, T_ARR_BACKUP, p, b, i))
                schedule_backup(p, b, t)

        elif ev == EV_SERVER:
            s = idx
            r = server_rate(p, s)
            jobrate = 0.0
            for i in range(n_ph):
                cnt = real[p][s][i] + virt[p][s][i]
                if cnt:
                    jobrate += cnt * ter[i]
            u = srv_rng[p].u01() * r
            touched = [s]
            if u < jobrate:
                # Phase pick, then transition pick, then real-vs-virtual.
                acc = 0.0
                ph = -1
                for i in range(n_ph):
                    cnt = real[p][s][i] + virt[p][s][i]
                    if cnt:
                        ph = i
                        acc += cnt * ter[i]
                        if u < acc:
                            break
                v = srv_rng[p].u01() * ter[ph]
                depart = v < mu_dep[ph] or not has_internal[ph]
                if depart:
                    dst = -1
                else:
                    acc = mu_dep[ph]
                    dst = -1
                    for j in range(n_ph):
                        if j != ph and mu_move[ph][j] > 0:
                            dst = j
                            acc += mu_move[ph][j]
                            if v < acc:
                                break
                obs = real[p][s][ph] + virt[p][s][ph]
                w = srv_rng[p].u01() * obs
                is_real = w < real[p][s][ph]
                if is_real:
                    real[p][s][ph] -= 1
                    if depart:
                        real_config_shift(p, s, idx_minus[rc[p][s]][ph])
                        oc[p][s] = idx_minus[oc[p][s]][ph]
                    else:
                        real[p][s][dst] += 1
                        real_config_shift(p, s, idx_move[rc[p][s]][ph][dst])
                        oc[p][s] = idx_move[oc[p][s]][ph][dst]
                    if trace is not None:
                        trace.append(
                            (t, T_DEPART if depart else T_MOVE, p, s, ph)
                        )
                else:
                    virt[p][s][ph] -= 1
                    virt_total -= 1
                    if depart:
                        oc[p][s] = idx_minus[oc[p][s]][ph]
                    else:
                        virt[p][s][dst] += 1
                        virt_total += 1
                        oc[p][s] = idx_move[oc[p][s]][ph][dst]
                    if trace is not None:
                        trace.append(
                            (t, T_VDEPART if depart else T_VMOVE, p, s, ph)
                        )
                # Reactive evaluation at the new observed configuration.
                if tokcnt[p][s] == 0 and kind[p][oc[p][s]] == IMPULSE:
                    chain(p, s, oc[p][s], [], t, touched)
            else:
                # Request timer tick (only scheduled when unpaused).
                cfg = oc[p][s]
                k = kind[p][cfg]
                if trace is not None:
                    trace.append((t, T_TICK, p, s, -1))
                if k == PROACTIVE:
                    v = srv_rng[p].u01() * pro_total[p][cfg]
                    acc = 0.0
                    i = -1
                    for j in range(n_ph):
                        if pro_rate[p][cfg][j] > 0:
                            i = j
                            acc += pro_rate[p][cfg][j]
                            if v < acc:
                                break
                    chain(p, s, cfg, [i], t, touched)
                elif k == JUMP:
                    chain(p, s, cfg, jump_seq[p], t, touched)
                else:
                    breach("timer fired at a quiet configuration")
            for s2 in touched:
                schedule_server(p, s2, t)
                if check:
                    check_server(p, s2)

        else:  # EV_BACKUP
            b = idx
            st = bk_state[p][b]
            r = 0.0
            for i in range(n_ph):
                if st[i]:
                    r += st[i] * ter[i]
            u = bak_rng[p].u01() * r
            acc = 0.0
            ph = -1
            for i in range(n_ph):
                if st[i]:
                    ph = i
                    acc += st[i] * ter[i]
                    if u < acc:
                        break
            v = bak_rng[p].u01() * ter[ph]
            st[ph] -= 1
            backup_jobs -= 1
            if v < mu_dep[ph] or not has_internal[ph]:
                new_rc = idx_minus[bk_rc[p][b]][ph]
                if trace is not None:
                    trace.append((t, T_BACKUP_DEP, p, b, ph))
            else:
                acc = mu_dep[ph]
                dst = -1
                for j in range(n_ph):
                    if j != ph and mu_move[ph][j] > 0:
                        dst = j
                        acc += mu_move[ph][j]
                        if v < acc:
                            break
                st[dst] += 1
                backup_jobs += 1
                new_rc = idx_move[bk_rc[p][b]][ph][dst]
                if trace is not None:
                    trace.append((t, T_BACKUP_MOVE, p, b, ph))
            n_active -= 1 if new_rc == zero else 0
            cost_sum += h_table[new_rc] - h_table[bk_rc[p][b]]
            occ_change(bk_rc[p][b], new_rc, t)
            bk_rc[p][b] = new_rc
            if new_rc == zero:
                heappush(bk_idle[p], b)
            else:
                schedule_backup(p, b, t)
            if check and backup_jobs < 0:
                breach("negative backup job count")

    # --- finalize -------------------------------------------------------------

    stopped_early = bool(max_events and events >= max_events)
    end = t_last if stopped_early else horizon
    if batch_len > 0.0 and not stopped_early and t_last < horizon:
        accumulate(t_last, horizon)
    flush_to = min(end, horizon)
    for cfg in range(n_cfg):
        if flush_to > occ_last[cfg]:
            occ_int[cfg] += occ_cnt[cfg] * (flush_to - occ_last[cfg])
            occ_last[cfg] = flush_to

    if check:
        _audit_fleet(
            n_pools, n_ph, L, real, virt, tok, tokens, tokcnt,
            bk_state, n_active, cost_sum, virt_total, backup_jobs,
            ztot, h_table, rc, bk_rc, zero, breach,
        )

    return {
        "end_time": end,
        "events": events,
        "events_post": events_post,
        "pops": pops,
        "window": window,
        "batch_len": batch_len,
        "batch_active": batch_active,
        "batch_cost": batch_cost,
        "batch_virt": batch_virt,
        "batch_backup": batch_backup,
        "batch_tokens": batch_tok,
        "occupancy": occ_int,
        "arrivals": arrivals,
        "virtual_arrivals": virtual_arrivals,
        "backup_placements": backup_placements,
        "trace": trace,
    }


def _audit_fleet(
    n_pools, n_ph, L, real, virt, tok, tokens, tokcnt, bk_state,
    n_active, cost_sum, virt_total, backup_jobs, ztot, h_table,
    rc, bk_rc, zero, breach,
):
    """Recompute aggregates from raw state; catches incremental drift."""
    act = 0
    cost = 0.0
    vt = 0
    bj = 0
    z = [0] * n_ph
    for p in range(n_pools):
        for s in range(L[p]):
            if sum(real[p][s]) > 0:
                act += 1
            cost += h_table[rc[p][s]]
            vt += sum(virt[p][s])
            for i in range(n_ph):
                z[i] += tok[p][s][i]
            if tokcnt[p][s] != sum(tok[p][s]):
                breach("token counter drift in audit")
        for b in range(len(bk_state[p])):
            tot = sum(bk_state[p][b])
            if tot > 0:
                act += 1
            bj += tot
            cost += h_table[bk_rc[p][b]]
        for i in range(n_ph):
            if len(tokens[p][i]) != sum(tok[p][s][i] for s in range(L[p])):
                breach("token pool inconsistent with per-server counts")
    if act != n_active:
        breach(f"active-count drift: {act} != {n_active}")
    if abs(cost - cost_sum) > 1e-6:
        breach(f"cost-sum drift: {cost} != {cost_sum}")
    if vt != virt_total:
        breach("virtual-job total drift")
    if bj != backup_jobs:
        breach("backup-job total drift")
    if z != ztot:
        breach("token total drift")


def run_baseline(plan):
    """Greedy dispatcher: place each arrival on a server immediately.

    Strategies: "new-server-always" places every job on the lowest idle
    server; "first-fit" places on the lowest-index server with room.
    """
    n_ph = plan["num_phases"]
    n_cfg = plan["n_configs"]
    idx_plus = _as_lists(plan["idx_plus"])
    idx_minus = _as_lists(plan["idx_minus"])
    idx_move = _as_lists(plan["idx_move"])
    h_table = _as_lists(plan["h"])
    mu_dep = _as_lists(plan["mu_dep"])
    mu_move = _as_lists(plan["mu_move"])
    ter = _as_lists(plan["ter"])
    has_internal = [
        any(mu_move[i][j] > 0 for j in range(n_ph) if j != i)
        for i in range(n_ph)
    ]
    horizon = float(plan["horizon"])
    warmup = float(plan["warmup"])
    nb = int(plan["nbatches"])
    max_events = int(plan.get("max_events", 0))
    kmax = int(plan["kmax"])
    zero = plan["zero_idx"]
    seed = plan["seed"]
    first_fit = plan["strategy"] == "first-fit"
    arr_rate = _as_lists(plan["arrival_rates"])

    arr_rng = [SplitMix64(derive_seed(seed, 1, 0, i)) for i in range(n_ph)]
    bak_rng = SplitMix64(derive_seed(seed, 4, 0, 0))

    state = []   # per server per phase counts
    s_rc = []
    s_gen = []
    idle = []    # min-heap of idle indices
    room = []    # min-heap of candidate indices with room (first-fit)

    window = horizon - warmup
    batch_len = window / nb if window > 0 else 0.0
    batch_active = [0.0] * nb
    batch_cost = [0.0] * nb
    occ_int = [0.0] * n_cfg
    occ_cnt = [0] * n_cfg
    occ_last = [warmup] * n_cfg
    n_active = 0
    cost_sum = 0.0
    total_jobs = 0
    arrivals = [0] * n_ph

    heap = []
    seq = 0

    def occ_change(old, new, t):
        eff = min(max(t, warmup), horizon)
        if eff > occ_last[old]:
            occ_int[old] += occ_cnt[old] * (eff - occ_last[old])
        occ_last[old] = eff
        if eff > occ_last[new]:
            occ_int[new] += occ_cnt[new] * (eff - occ_last[new])
        occ_last[new] = eff
        occ_cnt[old] -= 1
        occ_cnt[new] += 1

    def schedule(srv, t):
        nonlocal seq
        s_gen[srv] += 1
        r = 0.0
        for i in range(n_ph):
            if state[srv][i]:
                r += state[srv][i] * ter[i]
        if r > 0.0:
            dt = bak_rng.exponential(r)
            seq += 1
            heappush(heap, (t + dt, seq, EV_BACKUP, 0, srv, s_gen[srv]))

    for i in range(n_ph):
        if arr_rate[i] > 0.0:
            seq += 1
            heappush(
                heap,
                (arr_rng[i].exponential(arr_rate[i]), seq, EV_ARRIVAL, 0, i, 0),
            )

    events = 0
    events_post = 0
    t_last = 0.0

    def accumulate(t0, t1):
        a = t0 if t0 > warmup else warmup
        b = t1 if t1 < horizon else horizon
        while a < b:
            bi = int((a - warmup) / batch_len)
            if bi >= nb:
                bi = nb - 1
            seg = warmup + (bi + 1) * batch_len
            if seg > b:
                seg = b
            if seg <= a:
                break
            dt = seg - a
            batch_active[bi] += dt * n_active
            batch_cost[bi] += dt * cost_sum
            a = seg

    while heap:
        item = heappop(heap)
        t = item[0]
        if t >= horizon:
            break
        if max_events and events >= max_events:
            break
        ev = item[2]
        srv = item[4]
        if ev == EV_BACKUP and item[5] != s_gen[srv]:
            continue
        if batch_len > 0.0:
            accumulate(t_last, t)
        t_last = t
        events += 1
        if t >= warmup:
            events_post += 1

        if ev == EV_ARRIVAL:
            i = srv
            seq += 1
            heappush(
                heap,
                (t + arr_rng[i].exponential(arr_rate[i]), seq,
                 EV_ARRIVAL, 0, i, 0),
            )
            arrivals[i] += 1
            target = -1
            if first_fit:
                while room:
                    cand = room[0]
                    if sum(state[cand]) < kmax:
                        target = cand
                        break
                    heappop(room)
            if target < 0:
                while idle:
                    cand = heappop(idle)
                    if sum(state[cand]) == 0:
                        target = cand
                        break
                if target < 0:
                    target = len(state)
                    state.append([0] * n_ph)
                    s_rc.append(zero)
                    s_gen.append(0)
                    eff = min(max(t, warmup), horizon)
                    if eff > occ_last[zero]:
                        occ_int[zero] += occ_cnt[zero] * (eff - occ_last[zero])
                    occ_last[zero] = eff
                    occ_cnt[zero] += 1
                if first_fit and kmax > 1:
                    heappush(room, target)
            state[target][i] += 1
            total_jobs += 1
            new_rc = idx_plus[s_rc[target]][i]
            if new_rc < 0:
                raise InvariantBreachError("baseline exceeded service limit")
            if s_rc[target] == zero:
                n_active += 1
            cost_sum += h_table[new_rc] - h_table[s_rc[target]]
            occ_change(s_rc[target], new_rc, t)
            s_rc[target] = new_rc
            if first_fit and sum(state[target]) >= kmax and room and room[0] == target:
                heappop(room)
            schedule(target, t)
        else:
            st = state[srv]
            r = 0.0
            for i in range(n_ph):
                if st[i]:
                    r += st[i] * ter[i]
            u = bak_rng.u01() * r
            acc = 0.0
            ph = -1
            for i in range(n_ph):
                if st[i]:
                    ph = i
                    acc += st[i] * ter[i]
                    if u < acc:
                        break
            v = bak_rng.u01() * ter[ph]
            had_room = sum(st) < kmax
            st[ph] -= 1
            if v < mu_dep[ph] or not has_internal[ph]:
                total_jobs -= 1
                new_rc = idx_minus[s_rc[srv]][ph]
            else:
                acc = mu_dep[ph]
                dst = -1
                for j in range(n_ph):
                    if j != ph and mu_move[ph][j] > 0:
                        dst = j
                        acc += mu_move[ph][j]
                        if v < acc:
                            break
                st[dst] += 1
                new_rc = idx_move[s_rc[srv]][ph][dst]
            if new_rc == zero:
                n_active -= 1
                heappush(idle, srv)
            cost_sum += h_table[new_rc] - h_table[s_rc[srv]]
            occ_change(s_rc[srv], new_rc, t)
            s_rc[srv] = new_rc
            if first_fit and not had_room and sum(st) < kmax:
                heappush(room, srv)
            if sum(st) > 0:
                schedule(srv, t)

    stopped_early = bool(max_events and events >= max_events)
    end = t_last if stopped_early else horizon
    if batch_len > 0.0 and not stopped_early and t_last < horizon:
        accumulate(t_last, horizon)
    flush_to = min(end, horizon)
    for cfg in range(n_cfg):
        if flush_to > occ_last[cfg]:
            occ_int[cfg] += occ_cnt[cfg] * (flush_to - occ_last[cfg])
            occ_last[cfg] = flush_to

    return {
        "end_time": end,
        "events": events,
        "events_post": events_post,
        "window": window,
        "batch_len": batch_len,
        "batch_active": batch_active,
        "batch_cost": batch_cost,
        "batch_virt": [0.0] * nb,
        "batch_backup": [0.0] * nb,
        "batch_tokens": [[0.0] * n_ph for _ in range(nb)],
        "occupancy": occ_int,
        "arrivals": arrivals,
        "virtual_arrivals": [0] * n_ph,
        "backup_placements": [0] * n_ph,
        "trace": None,
    }
