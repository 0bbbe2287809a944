# cython: language_level=3
# cython: boundscheck=False, wraparound=False, initializedcheck=False
"""Compiled kernel for the minimum-cost channel-assignment dynamic program.

Mirrors ``_dpcore_py.dp_assign`` exactly (same states, same merge rule, same
utterance-id-order tie-break); see that module for the reference
formulation. States per step are kept in flat arrays and deduplicated with
linear scans, which is fast because the live state count stays small for
interval overlap structures.
"""

import numpy as np


cdef void _fill_path(list parents_hist, list chans_hist, Py_ssize_t step,
                     Py_ssize_t parent, long long chan, long long[::1] buf):
    cdef Py_ssize_t jj
    cdef Py_ssize_t idx = parent
    cdef long long[::1] pa
    cdef long long[::1] ch
    buf[step] = chan
    for jj in range(step - 1, -1, -1):
        pa = parents_hist[jj]
        ch = chans_hist[jj]
        buf[jj] = ch[idx]
        idx = <Py_ssize_t>pa[idx]


cdef int _id_less(long long[::1] a, long long[::1] b,
                  long long[::1] order_by_id, Py_ssize_t upto):
    cdef Py_ssize_t i, k
    for i in range(order_by_id.shape[0]):
        k = <Py_ssize_t>order_by_id[i]
        if k > upto:
            continue
        if a[k] != b[k]:
            return 1 if a[k] < b[k] else 0
    return 0


def dp_assign(starts_in, ends_in, delta_in, order_in):
    """Same contract as ``_dpcore_py.dp_assign``."""
    starts_arr = np.ascontiguousarray(starts_in, dtype=np.int64)
    ends_arr = np.ascontiguousarray(ends_in, dtype=np.int64)
    delta_arr = np.ascontiguousarray(delta_in, dtype=np.float64)
    order_arr = np.ascontiguousarray(order_in, dtype=np.int64)

    cdef long long[::1] starts = starts_arr
    cdef long long[::1] ends = ends_arr
    cdef double[:, ::1] delta = delta_arr
    cdef long long[::1] order_by_id = order_arr

    cdef Py_ssize_t num_utts = delta.shape[0]
    cdef Py_ssize_t num_channels = delta.shape[1]
    if num_utts == 0:
        return 0.0, np.zeros(0, dtype=np.int64), 1

    cdef list parents_hist = []
    cdef list chans_hist = []

    # Previous step's records; the seed stands for the empty assignment.
    prev_sigs_arr = np.zeros((1, num_channels), dtype=np.int64)
    prev_costs_arr = np.zeros(1, dtype=np.float64)
    cdef long long[:, ::1] prev_sigs = prev_sigs_arr
    cdef double[::1] prev_costs = prev_costs_arr
    cdef Py_ssize_t n_prev = 1

    path_a_arr = np.zeros(num_utts, dtype=np.int64)
    path_b_arr = np.zeros(num_utts, dtype=np.int64)
    cdef long long[::1] path_a = path_a_arr
    cdef long long[::1] path_b = path_b_arr

    cdef long long explored = 0
    cdef Py_ssize_t j, i, r, c, p, found, n_norm, n_out, best
    cdef long long s, e, tail
    cdef double cost
    cdef bint same

    cdef long long[:, ::1] norm_sigs
    cdef double[::1] norm_costs
    cdef long long[::1] norm_orig
    cdef long long[:, ::1] out_sigs
    cdef double[::1] out_costs
    cdef long long[::1] out_parent
    cdef long long[::1] out_chan
    cdef long long[::1] last_parents
    cdef long long[::1] last_chans

    for j in range(num_utts):
        s = starts[j]
        e = ends[j]

        # Stage 1: normalize predecessor tails, merge identical signatures.
        norm_sigs_arr = np.empty((n_prev, num_channels), dtype=np.int64)
        norm_costs_arr = np.empty(n_prev, dtype=np.float64)
        norm_orig_arr = np.empty(n_prev, dtype=np.int64)
        norm_sigs = norm_sigs_arr
        norm_costs = norm_costs_arr
        norm_orig = norm_orig_arr
        n_norm = 0
        for i in range(n_prev):
            found = -1
            for r in range(n_norm):
                same = True
                for c in range(num_channels):
                    tail = prev_sigs[i, c]
                    if tail <= s:
                        tail = 0
                    if norm_sigs[r, c] != tail:
                        same = False
                        break
                if same:
                    found = r
                    break
            cost = prev_costs[i]
            if found < 0:
                for c in range(num_channels):
                    tail = prev_sigs[i, c]
                    norm_sigs[n_norm, c] = tail if tail > s else 0
                norm_costs[n_norm] = cost
                norm_orig[n_norm] = i
                n_norm += 1
            elif cost < norm_costs[found]:
                norm_costs[found] = cost
                norm_orig[found] = i
            elif cost == norm_costs[found]:
                last_parents = parents_hist[j - 1]
                last_chans = chans_hist[j - 1]
                _fill_path(parents_hist, chans_hist, j - 1,
                           <Py_ssize_t>last_parents[i], last_chans[i], path_a)
                _fill_path(parents_hist, chans_hist, j - 1,
                           <Py_ssize_t>last_parents[norm_orig[found]],
                           last_chans[norm_orig[found]], path_b)
                if _id_less(path_a, path_b, order_by_id, j - 1):
                    norm_orig[found] = i

        # Stage 2: assign the current utterance to every free channel.
        out_sigs_arr = np.empty((n_norm * num_channels, num_channels), dtype=np.int64)
        out_costs_arr = np.empty(n_norm * num_channels, dtype=np.float64)
        out_parent_arr = np.empty(n_norm * num_channels, dtype=np.int64)
        out_chan_arr = np.empty(n_norm * num_channels, dtype=np.int64)
        out_sigs = out_sigs_arr
        out_costs = out_costs_arr
        out_parent = out_parent_arr
        out_chan = out_chan_arr
        n_out = 0
        for p in range(n_norm):
            for c in range(num_channels):
                if norm_sigs[p, c] != 0:
                    continue
                cost = norm_costs[p] + delta[j, c]
                found = -1
                for r in range(n_out):
                    same = out_sigs[r, c] == e
                    if same:
                        for i in range(num_channels):
                            if i == c:
                                continue
                            if out_sigs[r, i] != norm_sigs[p, i]:
                                same = False
                                break
                    if same:
                        found = r
                        break
                if found < 0:
                    for i in range(num_channels):
                        out_sigs[n_out, i] = norm_sigs[p, i]
                    out_sigs[n_out, c] = e
                    out_costs[n_out] = cost
                    out_parent[n_out] = norm_orig[p]
                    out_chan[n_out] = c
                    n_out += 1
                elif cost < out_costs[found]:
                    out_costs[found] = cost
                    out_parent[found] = norm_orig[p]
                    out_chan[found] = c
                elif cost == out_costs[found]:
                    _fill_path(parents_hist, chans_hist, j,
                               <Py_ssize_t>norm_orig[p], c, path_a)
                    _fill_path(parents_hist, chans_hist, j,
                               <Py_ssize_t>out_parent[found], out_chan[found], path_b)
                    if _id_less(path_a, path_b, order_by_id, j):
                        out_parent[found] = norm_orig[p]
                        out_chan[found] = c

        if n_out == 0:
            return None

        prev_sigs_arr = out_sigs_arr[:n_out]
        prev_costs_arr = out_costs_arr[:n_out]
        prev_sigs = prev_sigs_arr
        prev_costs = prev_costs_arr
        n_prev = n_out
        parents_hist.append(out_parent_arr[:n_out])
        chans_hist.append(out_chan_arr[:n_out])
        explored += n_out

    best = 0
    last_parents = parents_hist[num_utts - 1]
    last_chans = chans_hist[num_utts - 1]
    for i in range(1, n_prev):
        if prev_costs[i] < prev_costs[best]:
            best = i
        elif prev_costs[i] == prev_costs[best]:
            _fill_path(parents_hist, chans_hist, num_utts - 1,
                       <Py_ssize_t>last_parents[i], last_chans[i], path_a)
            _fill_path(parents_hist, chans_hist, num_utts - 1,
                       <Py_ssize_t>last_parents[best], last_chans[best], path_b)
            if _id_less(path_a, path_b, order_by_id, num_utts - 1):
                best = i

    channels = np.empty(num_utts, dtype=np.int64)
    cdef long long[::1] channels_v = channels
    _fill_path(parents_hist, chans_hist, num_utts - 1,
               <Py_ssize_t>last_parents[best], last_chans[best], channels_v)
    return prev_costs[best], channels, explored
