"""numba kernels behind :mod:`divann.hnsw`: construction, layer search, Alg. 1 beam search."""

import numba
import numpy as np

from . import _heap
from .vectors import _sim


@numba.njit(cache=True)
def search_layer(kind, data, q, ep_ids, ef, links, cnt, vis, tag, cand_s, cand_i, res_s, res_i, counter):
    """Best-first layer search with a result set of width ``ef``.

    ``cand_*`` and ``res_*`` are caller-owned scratch buffers.  Returns the
    result as (scores, ids) sorted best first.
    """
    csize = 0
    rsize = 0
    for j in range(ep_ids.shape[0]):
        e = ep_ids[j]
        if vis[e] == tag:
            continue
        vis[e] = tag
        s = _sim(kind, data[e], q)
        counter[0] += 1
        csize = _heap.push(cand_s, cand_i, csize, s, e, True)
        rsize = _heap.push(res_s, res_i, rsize, s, e, False)
        if rsize > ef:
            rsize = _heap.pop(res_s, res_i, rsize, False)
    while csize > 0:
        cs = cand_s[0]
        ci = cand_i[0]
        if rsize >= ef and _heap.better(res_s[0], res_i[0], cs, ci):
            break
        csize = _heap.pop(cand_s, cand_i, csize, True)
        for t in range(cnt[ci]):
            nb = links[ci, t]
            if vis[nb] == tag:
                continue
            vis[nb] = tag
            s = _sim(kind, data[nb], q)
            counter[0] += 1
            if rsize < ef or _heap.better(s, nb, res_s[0], res_i[0]):
                csize = _heap.push(cand_s, cand_i, csize, s, nb, True)
                rsize = _heap.push(res_s, res_i, rsize, s, nb, False)
                if rsize > ef:
                    rsize = _heap.pop(res_s, res_i, rsize, False)
    out_s = np.empty(rsize, dtype=np.float64)
    out_i = np.empty(rsize, dtype=np.int64)
    n = rsize
    while rsize > 0:
        out_s[rsize - 1] = res_s[0]
        out_i[rsize - 1] = res_i[0]
        rsize = _heap.pop(res_s, res_i, rsize, False)
    return out_s[:n], out_i[:n]


@numba.njit(cache=True)
def select_neighbors(kind, data, cand_s, cand_i, m):
    """Distance-domination pruning: keep a candidate only if no kept neighbour
    is closer to it than the base node is.  Candidates arrive best first."""
    kept = np.empty(m, dtype=np.int64)
    nk = 0
    for j in range(cand_i.shape[0]):
        if nk >= m:
            break
        c = cand_i[j]
        good = True
        for t in range(nk):
            if _sim(kind, data[c], data[kept[t]]) > cand_s[j]:
                good = False
                break
        if good:
            kept[nk] = c
            nk += 1
    return kept[:nk]


@numba.njit(cache=True)
def _connect(kind, data, node, new, links, cnt, cap):
    if cnt[node] < cap:
        links[node, cnt[node]] = new
        cnt[node] += 1
        return
    n = cnt[node] + 1
    ids = np.empty(n, dtype=np.int64)
    for t in range(cnt[node]):
        ids[t] = links[node, t]
    ids[n - 1] = new
    sims = np.empty(n, dtype=np.float64)
    for t in range(n):
        sims[t] = _sim(kind, data[ids[t]], data[node])
    # insertion sort into (score desc, id asc); n <= M0 + 1
    for a in range(1, n):
        s = sims[a]
        v = ids[a]
        b = a - 1
        while b >= 0 and _heap.better(s, v, sims[b], ids[b]):
            sims[b + 1] = sims[b]
            ids[b + 1] = ids[b]
            b -= 1
        sims[b + 1] = s
        ids[b + 1] = v
    kept = select_neighbors(kind, data, sims, ids, cap)
    for t in range(kept.shape[0]):
        links[node, t] = kept[t]
    cnt[node] = kept.shape[0]


@numba.njit(cache=True)
def build(kind, data, levels, M, M0, efc):
    n = data.shape[0]
    max_level = 0
    for i in range(n):
        if levels[i] > max_level:
            max_level = levels[i]
    links0 = np.full((n, M0), -1, dtype=np.int32)
    cnt0 = np.zeros(n, dtype=np.int32)
    upper = np.full((max(max_level, 1), n, M), -1, dtype=np.int32)
    cnt_up = np.zeros((max(max_level, 1), n), dtype=np.int32)
    vis = np.zeros(n, dtype=np.int32)
    cand_s = np.empty(n + 1, dtype=np.float64)
    cand_i = np.empty(n + 1, dtype=np.int64)
    res_s = np.empty(efc + 2, dtype=np.float64)
    res_i = np.empty(efc + 2, dtype=np.int64)
    counter = np.zeros(1, dtype=np.int64)
    entry = 0
    top = levels[0]
    tag = 0
    for i in range(1, n):
        q = data[i]
        li = levels[i]
        eps = np.array([entry], dtype=np.int64)
        lc = top
        while lc > li:
            tag += 1
            _, ids = search_layer(kind, data, q, eps, 1, upper[lc - 1], cnt_up[lc - 1], vis, tag,
                                  cand_s, cand_i, res_s, res_i, counter)
            eps = ids[:1]
            lc -= 1
        lc = min(li, top)
        while lc >= 0:
            tag += 1
            if lc == 0:
                sc, ids = search_layer(kind, data, q, eps, efc, links0, cnt0, vis, tag,
                                       cand_s, cand_i, res_s, res_i, counter)
            else:
                sc, ids = search_layer(kind, data, q, eps, efc, upper[lc - 1], cnt_up[lc - 1], vis, tag,
                                       cand_s, cand_i, res_s, res_i, counter)
            chosen = select_neighbors(kind, data, sc, ids, M)
            for t in range(chosen.shape[0]):
                nb = chosen[t]
                if lc == 0:
                    links0[i, t] = nb
                    _connect(kind, data, nb, i, links0, cnt0, M0)
                else:
                    upper[lc - 1, i, t] = nb
                    _connect(kind, data, nb, i, upper[lc - 1], cnt_up[lc - 1], M)
            if lc == 0:
                cnt0[i] = chosen.shape[0]
            else:
                cnt_up[lc - 1, i] = chosen.shape[0]
            eps = ids
            lc -= 1
        if li > top:
            top = li
            entry = i
    return links0, cnt0, upper, cnt_up, entry, top


@numba.njit(cache=True)
def descend(kind, data, q, entry, top, upper, cnt_up, counter):
    """Greedy (ef=1) walk from the top layer down to layer 1; returns the layer-0 entry."""
    cur = entry
    cur_s = _sim(kind, data[cur], q)
    counter[0] += 1
    lc = top
    while lc >= 1:
        changed = True
        while changed:
            changed = False
            base = cur
            for t in range(cnt_up[lc - 1, base]):
                nb = upper[lc - 1, base, t]
                s = _sim(kind, data[nb], q)
                counter[0] += 1
                if _heap.better(s, nb, cur_s, cur):
                    cur = nb
                    cur_s = s
                    changed = True
        lc -= 1
    return cur


@numba.njit(cache=True)
def beam_search(kind, data, q, start, L, links0, cnt0, counter):
    """Fixed-width beam search: sorted queue capped at ``L``; stop once the
    first ``L`` entries (or all of them) are stable."""
    n = data.shape[0]
    M0 = links0.shape[1]
    cap = L + M0 + 1
    qs = np.empty(cap, dtype=np.float64)
    qi = np.empty(cap, dtype=np.int64)
    st = np.zeros(cap, dtype=np.bool_)
    visited = np.zeros(n, dtype=np.bool_)
    qs[0] = _sim(kind, data[start], q)
    qi[0] = start
    counter[0] += 1
    visited[start] = True
    size = 1
    p = 0
    while p < L and p < size:
        st[p] = True
        u = qi[p]
        lowest = size
        for t in range(cnt0[u]):
            v = links0[u, t]
            if visited[v]:
                continue
            visited[v] = True
            s = _sim(kind, data[v], q)
            counter[0] += 1
            # insertion position after every entry that is better than (s, v)
            lo = 0
            hi = size
            while lo < hi:
                mid = (lo + hi) >> 1
                if _heap.better(qs[mid], qi[mid], s, v):
                    lo = mid + 1
                else:
                    hi = mid
            if lo >= L:
                continue
            for j in range(size, lo, -1):
                qs[j] = qs[j - 1]
                qi[j] = qi[j - 1]
                st[j] = st[j - 1]
            qs[lo] = s
            qi[lo] = v
            st[lo] = False
            size += 1
            if size > L:
                size = L
            if lo < lowest:
                lowest = lo
        counter[1] += 1
        p = min(lowest, p + 1)
        while p < size and st[p]:
            p += 1
    return qs[:size].copy(), qi[:size].copy()
