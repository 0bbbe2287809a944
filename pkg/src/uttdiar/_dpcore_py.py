"""Pure-Python dynamic program for minimum-cost channel assignment.

Reference implementation of the kernel contract shared with the compiled
module ``_dpcore``; the two must agree bit-for-bit on costs and channels.

Utterances are processed in start order. A state maps each channel to the
end frame of its most recently assigned utterance; tails that end at or
before the current utterance's start are normalized to FREE (0), and states
with identical normalized signatures are merged keeping the minimal
accumulated cost. The current utterance may go to any FREE channel. Among
exact cost ties the surviving state is the one whose partial assignment is
lexicographically smallest when read in original utterance-id order, which
makes the final argmin the lexicographically smallest minimizer.
"""

from __future__ import annotations

import numpy as np

FREE = 0


def dp_assign(starts, ends, delta, order_by_id):
    """Solve one assignment instance.

    All arrays are in processing (start) order. ``order_by_id`` lists the
    processing indices sorted by original utterance id.

    Returns ``(delta_cost, channels, states_explored)`` with 0-based
    ``channels`` in processing order, or ``None`` when no proper coloring
    with ``delta.shape[1]`` channels exists.
    """
    starts = np.asarray(starts, dtype=np.int64)
    ends = np.asarray(ends, dtype=np.int64)
    delta = np.asarray(delta, dtype=np.float64)
    order_by_id = [int(k) for k in order_by_id]
    num_utts, num_channels = delta.shape
    if num_utts == 0:
        return 0.0, np.zeros(0, dtype=np.int64), 1

    parents_hist: list[list[int]] = []
    chans_hist: list[list[int]] = []

    def path_of(step: int, parent: int, chan: int) -> list[int]:
        ch = [0] * (step + 1)
        ch[step] = chan
        idx = parent
        for jj in range(step - 1, -1, -1):
            ch[jj] = chans_hist[jj][idx]
            idx = parents_hist[jj][idx]
        return ch

    def id_less(pa: list[int], pb: list[int], upto: int) -> bool:
        for k in order_by_id:
            if k > upto:
                continue
            if pa[k] != pb[k]:
                return pa[k] < pb[k]
        return False

    # Records of the previous step; the single seed record stands for the
    # empty assignment (its parent pointer is never dereferenced).
    prev_sigs: list[tuple[int, ...]] = [(FREE,) * num_channels]
    prev_costs: list[float] = [0.0]
    explored = 0

    for j in range(num_utts):
        s = int(starts[j])
        e = int(ends[j])

        # Normalize predecessor tails and merge identical signatures.
        merged: dict[tuple[int, ...], tuple[float, int]] = {}
        for idx, sig in enumerate(prev_sigs):
            nsig = tuple(t if t > s else FREE for t in sig)
            cost = prev_costs[idx]
            incumbent = merged.get(nsig)
            if incumbent is None or cost < incumbent[0]:
                merged[nsig] = (cost, idx)
            elif cost == incumbent[0]:
                pa = path_of(j - 1, parents_hist[j - 1][idx], chans_hist[j - 1][idx])
                pb = path_of(j - 1, parents_hist[j - 1][incumbent[1]],
                             chans_hist[j - 1][incumbent[1]])
                if id_less(pa, pb, j - 1):
                    merged[nsig] = (cost, idx)

        # Assign the current utterance to every free channel.
        out: dict[tuple[int, ...], tuple[float, int, int]] = {}
        for nsig, (cost, parent) in merged.items():
            for c in range(num_channels):
                if nsig[c] != FREE:
                    continue
                new_sig = nsig[:c] + (e,) + nsig[c + 1:]
                new_cost = cost + float(delta[j, c])
                incumbent = out.get(new_sig)
                if incumbent is None or new_cost < incumbent[0]:
                    out[new_sig] = (new_cost, parent, c)
                elif new_cost == incumbent[0]:
                    pa = path_of(j, parent, c)
                    pb = path_of(j, incumbent[1], incumbent[2])
                    if id_less(pa, pb, j):
                        out[new_sig] = (new_cost, parent, c)

        if not out:
            return None

        prev_sigs = list(out.keys())
        prev_costs = [out[sig][0] for sig in prev_sigs]
        parents_hist.append([out[sig][1] for sig in prev_sigs])
        chans_hist.append([out[sig][2] for sig in prev_sigs])
        explored += len(prev_sigs)

    best = 0
    last = num_utts - 1
    for idx in range(1, len(prev_costs)):
        if prev_costs[idx] < prev_costs[best]:
            best = idx
        elif prev_costs[idx] == prev_costs[best]:
            pa = path_of(last, parents_hist[last][idx], chans_hist[last][idx])
            pb = path_of(last, parents_hist[last][best], chans_hist[last][best])
            if id_less(pa, pb, last):
                best = idx

    channels = np.asarray(
        path_of(last, parents_hist[last][best], chans_hist[last][best]),
        dtype=np.int64,
    )
    return prev_costs[best], channels, explored
