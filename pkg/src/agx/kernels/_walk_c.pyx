# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled random-walk kernel.

Mirrors agx.kernels._walk_py draw for draw (same splitmix64 stream), so the
two backends produce identical batches for a given seed. See the pure-Python
module for the stepping rules.
"""

import numpy as np


cdef unsigned long long GAMMA = 0x9E3779B97F4A7C15
cdef unsigned long long MIX1 = 0xBF58476D1CE4E5B9
cdef unsigned long long MIX2 = 0x94D049BB133111EB
cdef double INV_2_53 = 2.0 ** -53


cdef inline unsigned long long _mix(unsigned long long state) nogil:
    cdef unsigned long long z = state
    z = (z ^ (z >> 30)) * MIX1
    z = (z ^ (z >> 27)) * MIX2
    z ^= z >> 31
    return z


def rng_next(state):
    """Advance a splitmix64 state; returns (new_state, 64-bit output)."""
    cdef unsigned long long s = <unsigned long long> state
    s += GAMMA
    return s, _mix(s)


def walk_batch(indptr, succ, vptr, match, entries, stop_p, eps, max_len, batch, state):
    """Run `batch` walk attempts; see the pure-Python kernel for the contract."""
    cdef int[:] indptr_v = np.ascontiguousarray(indptr, dtype=np.int32)
    cdef int[:] succ_v = np.ascontiguousarray(succ, dtype=np.int32)
    cdef int[:] vptr_v = np.ascontiguousarray(vptr, dtype=np.int32)
    cdef int[:] entries_v = np.ascontiguousarray(entries, dtype=np.int32)

    cdef bint steered = match is not None
    cdef unsigned char[:] match_v
    if steered:
        match_v = np.ascontiguousarray(match, dtype=np.uint8)
    else:
        match_v = np.zeros(1, dtype=np.uint8)

    cdef int n_nodes = indptr_v.shape[0] - 1
    cdef int n_entries = entries_v.shape[0]
    cdef int c_max_len = max_len
    cdef int c_batch = batch
    cdef double c_stop = stop_p
    cdef double c_eps = eps
    cdef unsigned long long rng = <unsigned long long> state
    cdef unsigned long long z

    if c_max_len > n_nodes:
        c_max_len = n_nodes

    nodes_arr = np.empty(c_batch * c_max_len, dtype=np.int32)
    vulns_arr = np.empty(c_batch * c_max_len, dtype=np.int32)
    noff_arr = np.empty(c_batch + 1, dtype=np.int64)
    voff_arr = np.empty(c_batch + 1, dtype=np.int64)
    cdef int[:] nodes_out = nodes_arr
    cdef int[:] vulns_out = vulns_arr
    cdef long long[:] noff = noff_arr
    cdef long long[:] voff = voff_arr

    walk_arr = np.empty(c_max_len, dtype=np.int32)
    cands_arr = np.empty(n_nodes, dtype=np.int32)
    visited_arr = np.zeros(n_nodes, dtype=np.int64)
    cdef int[:] walk = walk_arr
    cdef int[:] cands = cands_arr
    cdef long long[:] visited = visited_arr

    cdef long long stamp = 0
    cdef long long ntop = 0, vtop = 0
    cdef int emitted = 0
    cdef int attempt, wlen, cur, nxt, row
    cdef int k, s, r, vlo, vhi, count, n_cands, pick
    cdef bint explore, use_all, dead

    noff[0] = 0
    voff[0] = 0

    for attempt in range(c_batch):
        stamp += 1
        rng += GAMMA
        z = _mix(rng)
        cur = entries_v[z % n_entries]
        walk[0] = cur
        wlen = 1
        visited[cur] = stamp
        dead = False

        while wlen < c_max_len:
            if wlen >= 2:
                rng += GAMMA
                z = _mix(rng)
                if (z >> 11) * INV_2_53 < c_stop:
                    break

            explore = False
            if steered:
                rng += GAMMA
                z = _mix(rng)
                explore = (z >> 11) * INV_2_53 < c_eps

            if not steered:
                n_cands = 0
                for k in range(indptr_v[cur], indptr_v[cur + 1]):
                    s = succ_v[k]
                    if visited[s] != stamp:
                        cands[n_cands] = s
                        n_cands += 1
                if n_cands == 0:
                    break
                rng += GAMMA
                z = _mix(rng)
                nxt = cands[z % <unsigned long long> n_cands]
                vlo = vptr_v[nxt]
                vhi = vptr_v[nxt + 1]
                if vhi == vlo:
                    break  # no multi-edge to label; walk truncates here
                rng += GAMMA
                z = _mix(rng)
                row = vlo + <int> (z % <unsigned long long> (vhi - vlo))
            else:
                use_all = explore
                n_cands = _scan(indptr_v, succ_v, vptr_v, match_v, visited,
                                stamp, cur, use_all, cands)
                if n_cands == 0 and not explore:
                    use_all = True
                    n_cands = _scan(indptr_v, succ_v, vptr_v, match_v, visited,
                                    stamp, cur, True, cands)
                if n_cands == 0:
                    break
                rng += GAMMA
                z = _mix(rng)
                nxt = cands[z % <unsigned long long> n_cands]
                vlo = vptr_v[nxt]
                vhi = vptr_v[nxt + 1]
                if use_all:
                    count = vhi - vlo
                else:
                    count = 0
                    for r in range(vlo, vhi):
                        if match_v[r]:
                            count += 1
                rng += GAMMA
                z = _mix(rng)
                pick = <int> (z % <unsigned long long> count)
                if use_all:
                    row = vlo + pick
                else:
                    row = vlo
                    for r in range(vlo, vhi):
                        if match_v[r]:
                            if pick == 0:
                                row = r
                                break
                            pick -= 1

            walk[wlen] = nxt
            wlen += 1
            vulns_out[vtop + wlen - 2] = row
            visited[nxt] = stamp
            cur = nxt

        if wlen >= 2:
            for k in range(wlen):
                nodes_out[ntop + k] = walk[k]
            ntop += wlen
            vtop += wlen - 1
            emitted += 1
            noff[emitted] = ntop
            voff[emitted] = vtop

    return (
        nodes_arr[:ntop],
        vulns_arr[:vtop],
        noff_arr[: emitted + 1],
        voff_arr[: emitted + 1],
        int(rng),
    )


cdef int _scan(int[:] indptr, int[:] succ, int[:] vptr, unsigned char[:] match,
               long long[:] visited, long long stamp, int cur, bint use_all,
               int[:] cands) nogil:
    cdef int n_cands = 0
    cdef int k, s, r, vlo, vhi
    for k in range(indptr[cur], indptr[cur + 1]):
        s = succ[k]
        if visited[s] == stamp:
            continue
        vlo = vptr[s]
        vhi = vptr[s + 1]
        if vhi == vlo:
            continue
        if use_all:
            cands[n_cands] = s
            n_cands += 1
            continue
        for r in range(vlo, vhi):
            if match[r]:
                cands[n_cands] = s
                n_cands += 1
                break
    return n_cands
