"""Pure-Python random-walk kernel (reference implementation).

The compiled kernel mirrors this module draw for draw: both consume the same
splitmix64 stream, so a given seed produces identical walk batches on either
backend.

Graph encoding: hosts are indexed 0..n-1; `indptr`/`succ` is a CSR adjacency
(successors sorted by index); `vptr` slices a flat vulnerability table by
host, so rows vptr[h]:vptr[h+1] are host h's vulnerabilities.

Stepping rules (one walk attempt):
  * the start node is uniform over `entries`;
  * after at least one step, a stop event fires with probability `stop_p`;
  * unfiltered mode (match is None): the next node is uniform over unvisited
    successors; the step's vulnerability is uniform over the target's rows,
    and a target with zero rows ends the walk (nothing to exploit);
  * filtered mode: with probability `eps` per step every row is admissible;
    otherwise only rows with match[row] set are. Successors with at least one
    admissible row are candidates; if none qualify, all rows become
    admissible (fallback); if still none, the walk ends.

Walks shorter than two nodes are dropped.
"""

from __future__ import annotations

MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_INV_2_53 = 2.0 ** -53


def rng_next(state: int) -> tuple[int, int]:
    """Advance a splitmix64 state; returns (new_state, 64-bit output)."""
    state = (state + _GAMMA) & MASK64
    z = state
    z = ((z ^ (z >> 30)) * _MIX1) & MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & MASK64
    z ^= z >> 31
    return state, z


def walk_batch(indptr, succ, vptr, match, entries, stop_p, eps, max_len, batch, state):
    """Run `batch` walk attempts.

    Returns (nodes, vulns, node_offsets, vuln_offsets, state): flat index
    lists where emitted path i spans nodes[node_offsets[i]:node_offsets[i+1]]
    and vulns[vuln_offsets[i]:vuln_offsets[i+1]].
    """
    # Plain-int copies: numpy scalars must not leak into the big-int RNG math.
    indptr = [int(x) for x in indptr]
    succ = [int(x) for x in succ]
    vptr = [int(x) for x in vptr]
    entries = [int(x) for x in entries]
    if match is not None:
        match = [int(x) for x in match]

    n_nodes = len(indptr) - 1
    n_entries = len(entries)
    steered = match is not None
    # Simple walks cannot exceed the node count; clamping keeps the draw
    # sequence identical to the compiled kernel for any larger max_len.
    if max_len > n_nodes:
        max_len = n_nodes

    nodes_out: list[int] = []
    vulns_out: list[int] = []
    node_offsets: list[int] = [0]
    vuln_offsets: list[int] = [0]

    visited = [0] * n_nodes
    stamp = 0

    for _ in range(batch):
        stamp += 1
        state, z = rng_next(state)
        cur = entries[z % n_entries]
        walk = [cur]
        vulns: list[int] = []
        visited[cur] = stamp

        while len(walk) < max_len:
            if len(walk) >= 2:
                state, z = rng_next(state)
                if (z >> 11) * _INV_2_53 < stop_p:
                    break

            explore = False
            if steered:
                state, z = rng_next(state)
                explore = (z >> 11) * _INV_2_53 < eps

            lo, hi = indptr[cur], indptr[cur + 1]
            if not steered:
                cands = [succ[k] for k in range(lo, hi) if visited[succ[k]] != stamp]
                if not cands:
                    break
                state, z = rng_next(state)
                nxt = cands[z % len(cands)]
                vlo, vhi = vptr[nxt], vptr[nxt + 1]
                if vhi == vlo:
                    break  # no multi-edge to label; walk truncates here
                state, z = rng_next(state)
                row = vlo + z % (vhi - vlo)
            else:
                use_all = explore
                cands = _admissible_successors(indptr, succ, vptr, match, visited,
                                               stamp, cur, use_all)
                if not cands and not explore:
                    use_all = True
                    cands = _admissible_successors(indptr, succ, vptr, match, visited,
                                                   stamp, cur, True)
                if not cands:
                    break
                state, z = rng_next(state)
                nxt = cands[z % len(cands)]
                vlo, vhi = vptr[nxt], vptr[nxt + 1]
                if use_all:
                    count = vhi - vlo
                else:
                    count = 0
                    for r in range(vlo, vhi):
                        if match[r]:
                            count += 1
                state, z = rng_next(state)
                pick = z % count
                if use_all:
                    row = vlo + pick
                else:
                    row = vlo
                    for r in range(vlo, vhi):
                        if match[r]:
                            if pick == 0:
                                row = r
                                break
                            pick -= 1

            walk.append(nxt)
            vulns.append(row)
            visited[nxt] = stamp
            cur = nxt

        if len(walk) >= 2:
            nodes_out.extend(walk)
            vulns_out.extend(vulns)
            node_offsets.append(len(nodes_out))
            vuln_offsets.append(len(vulns_out))

    return nodes_out, vulns_out, node_offsets, vuln_offsets, state


def _admissible_successors(indptr, succ, vptr, match, visited, stamp, cur, use_all):
    cands = []
    for k in range(indptr[cur], indptr[cur + 1]):
        s = succ[k]
        if visited[s] == stamp:
            continue
        vlo, vhi = vptr[s], vptr[s + 1]
        if vhi == vlo:
            continue
        if use_all:
            cands.append(s)
            continue
        for r in range(vlo, vhi):
            if match[r]:
                cands.append(s)
                break
    return cands
