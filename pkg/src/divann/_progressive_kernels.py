"""numba kernel for the resumable, uncapped beam search.

Queue representation: the stable entries live in a sorted array
(``st_s``/``st_i``, best first), the unstable ones in a best-on-top heap.
In full queue order the first unstable entry is the heap top, so the length
of the all-stable queue prefix is the number of stable entries ranked above
the heap top.
"""

import numba

from . import _heap
from .vectors import _sim

# meta slots
HSIZE, SSIZE, EVALS, HOPS, SHIFTS = 0, 1, 2, 3, 4


@numba.njit(cache=True)
def stable_prefix(st_s, st_i, ssize, hs, hi, hsize):
    if hsize == 0:
        return ssize
    s = hs[0]
    i = hi[0]
    lo = 0
    hi_ = ssize
    while lo < hi_:
        mid = (lo + hi_) >> 1
        if _heap.better(st_s[mid], st_i[mid], s, i):
            lo = mid + 1
        else:
            hi_ = mid
    return lo


@numba.njit(cache=True)
def advance(kind, data, q, links0, cnt0, hs, hi, st_s, st_i, visited, meta, target):
    """Stabilize first-unstable entries until the first ``target`` queue
    entries are all stable or nothing unstable remains.  Returns the final
    stable-prefix length."""
    hsize = meta[HSIZE]
    ssize = meta[SSIZE]
    p = stable_prefix(st_s, st_i, ssize, hs, hi, hsize)
    while p < target and hsize > 0:
        s = hs[0]
        u = hi[0]
        hsize = _heap.pop(hs, hi, hsize, True)
        # sorted insert into the stable array
        lo = 0
        up = ssize
        while lo < up:
            mid = (lo + up) >> 1
            if _heap.better(st_s[mid], st_i[mid], s, u):
                lo = mid + 1
            else:
                up = mid
        for j in range(ssize, lo, -1):
            st_s[j] = st_s[j - 1]
            st_i[j] = st_i[j - 1]
        meta[SHIFTS] += ssize - lo
        st_s[lo] = s
        st_i[lo] = u
        ssize += 1
        for t in range(cnt0[u]):
            v = links0[u, t]
            if visited[v]:
                continue
            visited[v] = True
            sv = _sim(kind, data[v], q)
            meta[EVALS] += 1
            hsize = _heap.push(hs, hi, hsize, sv, v, True)
        meta[HOPS] += 1
        p = stable_prefix(st_s, st_i, ssize, hs, hi, hsize)
    meta[HSIZE] = hsize
    meta[SSIZE] = ssize
    return p
