"""Compiled event loop for ASEP on a window ``[lo, hi]``.

Particles never overtake, so ``pos`` stays sorted and ``pos[i]`` is the
(i+1)-th particle from the left.  The loop keeps two index sets, particles
whose right (left) neighbour site is free, and draws the next event from
them directly: total rate ``p |R| + q |L|``.  Blocked attempts are never
drawn, which leaves the law of the path unchanged.
"""

import numpy as np
from numba import njit


@njit(nogil=True, cache=True)
def _can_right(pos, i, n, hi):
    if i + 1 < n:
        return pos[i] + 1 < pos[i + 1]
    return pos[i] + 1 <= hi


@njit(nogil=True, cache=True)
def _can_left(pos, i, lo):
    if i > 0:
        return pos[i] - 1 > pos[i - 1]
    return pos[i] - 1 >= lo


@njit(nogil=True, cache=True)
def evolve(pos, lo, hi, p, t0, t_end, gen, check):
    """Advance ``pos`` in place from time ``t0`` to ``t_end``; return the event count.

    With ``check`` set, the local ordering around every moved particle is
    asserted after the move.
    """
    n = pos.shape[0]
    q = 1.0 - p
    rset = np.empty(n, np.int64)
    rloc = np.full(n, -1, np.int64)
    lset = np.empty(n, np.int64)
    lloc = np.full(n, -1, np.int64)
    nr = 0
    nl = 0
    for i in range(n):
        if _can_right(pos, i, n, hi):
            rloc[i] = nr
            rset[nr] = i
            nr += 1
        if _can_left(pos, i, lo):
            lloc[i] = nl
            lset[nl] = i
            nl += 1
    t = t0
    events = 0
    while True:
        total = p * nr + q * nl
        if total <= 0.0:
            break
        t += gen.exponential(1.0 / total)
        if t > t_end:
            break
        u = gen.random() * total
        if u < p * nr:
            i = rset[min(int(u / p), nr - 1)]
            pos[i] += 1
        else:
            i = lset[min(int((u - p * nr) / q), nl - 1)]
            pos[i] -= 1
        events += 1
        if check:
            if pos[i] < lo or pos[i] > hi:
                raise AssertionError("particle left the window")
            if (i > 0 and pos[i - 1] >= pos[i]) or (i + 1 < n and pos[i + 1] <= pos[i]):
                raise AssertionError("exclusion violated")
        # only the mover and its two neighbours can change status
        for j in range(max(i - 1, 0), min(i + 2, n)):
            ok = _can_right(pos, j, n, hi)
            if ok and rloc[j] < 0:
                rloc[j] = nr
                rset[nr] = j
                nr += 1
            elif not ok and rloc[j] >= 0:
                k = rloc[j]
                last = rset[nr - 1]
                rset[k] = last
                rloc[last] = k
                rloc[j] = -1
                nr -= 1
            ok = _can_left(pos, j, lo)
            if ok and lloc[j] < 0:
                lloc[j] = nl
                lset[nl] = j
                nl += 1
            elif not ok and lloc[j] >= 0:
                k = lloc[j]
                last = lset[nl - 1]
                lset[k] = last
                lloc[last] = k
                lloc[j] = -1
                nl -= 1
    return events
