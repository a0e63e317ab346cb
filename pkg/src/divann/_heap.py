"""Array-backed binary heaps for numba kernels.

Entries are (score, id) pairs.  "Better" means higher score, ties to the lower
id.  ``best_on_top=True`` gives a max-heap under that order, ``False`` a
min-heap (worst entry on top).
"""

import numba


@numba.njit(cache=True, inline="always")
def better(s1, i1, s2, i2):
    return s1 > s2 or (s1 == s2 and i1 < i2)


@numba.njit(cache=True, inline="always")
def _above(s1, i1, s2, i2, best_on_top):
    if best_on_top:
        return better(s1, i1, s2, i2)
    return better(s2, i2, s1, i1)


@numba.njit(cache=True)
def push(hs, hi, size, s, i, best_on_top):
    pos = size
    while pos > 0:
        parent = (pos - 1) >> 1
        if _above(s, i, hs[parent], hi[parent], best_on_top):
            hs[pos] = hs[parent]
            hi[pos] = hi[parent]
            pos = parent
        else:
            break
    hs[pos] = s
    hi[pos] = i
    return size + 1


@numba.njit(cache=True)
def pop(hs, hi, size, best_on_top):
    """Drop the top entry (read ``hs[0], hi[0]`` first); returns the new size."""
    size -= 1
    if size == 0:
        return 0
    s = hs[size]
    i = hi[size]
    pos = 0
    while True:
        child = 2 * pos + 1
        if child >= size:
            break
        if child + 1 < size and _above(hs[child + 1], hi[child + 1], hs[child], hi[child], best_on_top):
            child += 1
        if _above(hs[child], hi[child], s, i, best_on_top):
            hs[pos] = hs[child]
            hi[pos] = hi[child]
            pos = child
        else:
            break
    hs[pos] = s
    hi[pos] = i
    return size
