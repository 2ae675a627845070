"""Cycle loop of the flit-level simulator.

All state lives in flat numpy arrays so the loop can be compiled by
numba; with numba disabled the very same function runs as Python.

Timing within one cycle ``t``:

1. flits whose wire delay ends at ``t`` enter their queue (FIFO);
2. every idle server grants the head flit of its highest-level eligible
   queue (round robin among equal levels); the transfer occupies the
   server for the queue's service time ``T`` and the flit reaches the next
   queue at ``t + T + delay``;
3. new flits are injected and become eligible at ``t + 1``.

A flit's waiting time at a hop is ``grant cycle - eligible cycle``.
"""

from .._jit import optional_njit

EV_INJECT = 0
EV_ENQUEUE = 1
EV_GRANT = 2
EV_DELIVER = 3

# counters[] slots
C_INJECTED = 0
C_DELIVERED = 1
C_UID = 2
C_FREE_TOP = 3
C_TRACE_N = 4
C_INJ_MEASURED = 5
C_DEL_MEASURED = 6

STATUS_DONE = 0
STATUS_POOL_EXHAUSTED = 1


@optional_njit()
def run_chunk(t_start, t_end, warmup,
              ev_time, ev_cls, ev_pos,
              cls_ptr, hop_q, hop_s, hop_d,
              q_level, q_service, q_hold,
              srv_ptr, srv_queues,
              f_cls, f_hop, f_ready, f_inject, f_next, f_uid, free_list,
              q_head, q_tail, q_len, q_port_free, q_maxlen,
              s_busy, s_rr,
              w_head, w_tail,
              counters,
              c_lat_sum, c_lat_sq, c_lat_cnt,
              hop_wait_sum, hop_wait_cnt,
              c_inj_last, c_gap_n, c_gap_sum, c_gap_sq,
              s_last_dep, s_gap_n, s_gap_sum, s_gap_sq,
              q_arrivals, q_occ, q_grants, q_wait_sum,
              trace, trace_on):
    """Advance the simulation over cycles ``[t_start, t_end)``.

    Returns ``(status, cycle_reached, ev_pos)``. On pool exhaustion the
    cycle ``cycle_reached`` has not been started and the call can be
    repeated from there after the flit arrays are enlarged.
    """
    n_servers = s_busy.shape[0]
    n_queues = q_len.shape[0]
    wheel = w_head.shape[0]
    n_events = ev_time.shape[0]
    trace_cap = trace.shape[0]

    for t in range(t_start, t_end):
        # flit pool must hold every injection of this cycle
        k = ev_pos
        while k < n_events and ev_time[k] == t:
            k += 1
        if k - ev_pos > counters[C_FREE_TOP]:
            return STATUS_POOL_EXHAUSTED, t, ev_pos

        # 1. wire arrivals
        slot = t % wheel
        f = w_head[slot]
        while f != -1:
            nxt = f_next[f]
            q = hop_q[cls_ptr[f_cls[f]] + f_hop[f]]
            f_next[f] = -1
            if q_len[q] == 0:
                q_head[q] = f
            else:
                f_next[q_tail[q]] = f
            q_tail[q] = f
            q_len[q] += 1
            if q_len[q] > q_maxlen[q]:
                q_maxlen[q] = q_len[q]
            if t >= warmup:
                q_arrivals[q] += 1
            if trace_on and counters[C_TRACE_N] < trace_cap:
                n = counters[C_TRACE_N]
                trace[n, 0] = t
                trace[n, 1] = EV_ENQUEUE
                trace[n, 2] = q
                trace[n, 3] = f_cls[f]
                trace[n, 4] = f_uid[f]
                trace[n, 5] = -1
                counters[C_TRACE_N] = n + 1
            f = nxt
        w_head[slot] = -1
        w_tail[slot] = -1

        # 2. arbitration
        for o in range(n_servers):
            if s_busy[o] > t:
                continue
            lo = srv_ptr[o]
            width = srv_ptr[o + 1] - lo
            best_k = -1
            best_level = 1 << 30
            best_rank = 1 << 30
            for j in range(width):
                q = srv_queues[lo + j]
                if q_len[q] == 0 or q_port_free[q] > t:
                    continue
                h = q_head[q]
                if hop_s[cls_ptr[f_cls[h]] + f_hop[h]] != o:
                    continue
                lvl = q_level[q]
                rank = (j - s_rr[o]) % width
                if lvl < best_level or (lvl == best_level and rank < best_rank):
                    best_level = lvl
                    best_rank = rank
                    best_k = j
            if best_k < 0:
                continue
            q = srv_queues[lo + best_k]
            s_rr[o] = (best_k + 1) % width
            f = q_head[q]
            q_head[q] = f_next[f]
            q_len[q] -= 1
            if q_len[q] == 0:
                q_tail[q] = -1
            f_next[f] = -1
            c = f_cls[f]
            hid = cls_ptr[c] + f_hop[f]
            service = q_service[q]
            s_busy[o] = t + service
            if q_hold[q]:
                q_port_free[q] = t + service
            else:
                q_port_free[q] = t + 1
            wait = t - f_ready[f]
            if f_inject[f] >= warmup:
                hop_wait_sum[hid] += wait
                hop_wait_cnt[hid] += 1
            if t >= warmup:
                q_grants[q] += 1
                q_wait_sum[q] += wait
                dep = t + service
                if s_last_dep[o] >= 0:
                    gap = dep - s_last_dep[o]
                    s_gap_n[o] += 1
                    s_gap_sum[o] += gap
                    s_gap_sq[o] += gap * gap
                s_last_dep[o] = dep
            if trace_on and counters[C_TRACE_N] < trace_cap:
                n = counters[C_TRACE_N]
                trace[n, 0] = t
                trace[n, 1] = EV_GRANT
                trace[n, 2] = q
                trace[n, 3] = c
                trace[n, 4] = f_uid[f]
                trace[n, 5] = o
                counters[C_TRACE_N] = n + 1
            arrive = t + service + hop_d[hid]
            if f_hop[f] + 1 < cls_ptr[c + 1] - cls_ptr[c]:
                f_hop[f] += 1
                f_ready[f] = arrive
                slot = arrive % wheel
                if w_head[slot] == -1:
                    w_head[slot] = f
                else:
                    f_next[w_tail[slot]] = f
                w_tail[slot] = f
            else:
                counters[C_DELIVERED] += 1
                if f_inject[f] >= warmup:
                    lat = arrive - f_inject[f]
                    c_lat_sum[c] += lat
                    c_lat_sq[c] += lat * lat
                    c_lat_cnt[c] += 1
                    counters[C_DEL_MEASURED] += 1
                if trace_on and counters[C_TRACE_N] < trace_cap:
                    n = counters[C_TRACE_N]
                    trace[n, 0] = arrive
                    trace[n, 1] = EV_DELIVER
                    trace[n, 2] = q
                    trace[n, 3] = c
                    trace[n, 4] = f_uid[f]
                    trace[n, 5] = o
                    counters[C_TRACE_N] = n + 1
                free_list[counters[C_FREE_TOP]] = f
                counters[C_FREE_TOP] += 1

        # 3. injections, eligible next cycle
        while ev_pos < n_events and ev_time[ev_pos] == t:
            c = ev_cls[ev_pos]
            ev_pos += 1
            counters[C_FREE_TOP] -= 1
            f = free_list[counters[C_FREE_TOP]]
            f_cls[f] = c
            f_hop[f] = 0
            f_ready[f] = t + 1
            f_inject[f] = t + 1
            f_uid[f] = counters[C_UID]
            counters[C_UID] += 1
            counters[C_INJECTED] += 1
            if t + 1 >= warmup:
                counters[C_INJ_MEASURED] += 1
                if c_inj_last[c] >= 0:
                    gap = t - c_inj_last[c]
                    c_gap_n[c] += 1
                    c_gap_sum[c] += gap
                    c_gap_sq[c] += gap * gap
            c_inj_last[c] = t
            f_next[f] = -1
            slot = (t + 1) % wheel
            if w_head[slot] == -1:
                w_head[slot] = f
            else:
                f_next[w_tail[slot]] = f
            w_tail[slot] = f
            if trace_on and counters[C_TRACE_N] < trace_cap:
                n = counters[C_TRACE_N]
                trace[n, 0] = t
                trace[n, 1] = EV_INJECT
                trace[n, 2] = hop_q[cls_ptr[c]]
                trace[n, 3] = c
                trace[n, 4] = f_uid[f]
                trace[n, 5] = -1
                counters[C_TRACE_N] = n + 1

        if t >= warmup:
            for q in range(n_queues):
                q_occ[q] += q_len[q]

    return STATUS_DONE, t_end, ev_pos
