"""Pure-Python relation kernels over integer bitmasks.

Relations on events ``0..n-1`` are lists of masks: ``m[i]`` has bit ``j`` set
when ``(j, i)`` (predecessor form) or ``(i, j)`` (successor form) is an edge.
"""

from __future__ import annotations

BACKEND = "python"


def iter_bits(mask: int):
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


def union_over(masks, sel: int) -> int:
    """OR of ``masks[i]`` for every bit ``i`` of ``sel``."""
    out = 0
    while sel:
        low = sel & -sel
        out |= masks[low.bit_length() - 1]
        sel ^= low
    return out


def eco_extend(pred: list, succ: list, e: int, dpred: int, dsucc: int) -> None:
    """Add new event ``e`` with direct eco edges, keeping both lists closed.

    ``dpred``/``dsucc`` are the direct predecessors and successors of ``e``;
    every new path runs through ``e``, so the closure only needs
    ``Pred(e) x ({e} | Succ(e))`` and ``{e} x Succ(e)``.
    """
    p = dpred | union_over(pred, dpred)
    s = dsucc | union_over(succ, dsucc)
    ebit = 1 << e
    while len(pred) <= e:
        pred.append(0)
        succ.append(0)
    pred[e] = p
    succ[e] = s
    down = s | ebit
    up = p | ebit
    m = p
    while m:
        low = m & -m
        succ[low.bit_length() - 1] |= down
        m ^= low
    m = s
    while m:
        low = m & -m
        pred[low.bit_length() - 1] |= up
        m ^= low


def closure(succ: list) -> list:
    """Transitive closure of a successor-mask relation (Warshall on rows)."""
    rows = list(succ)
    n = len(rows)
    for k in range(n):
        kb = 1 << k
        rk = rows[k]
        for i in range(n):
            if rows[i] & kb:
                rows[i] |= rk
    return rows


def encountered(hbp, ecop, events: int, writes: int) -> int:
    """Writes reachable by ``eco? ; hb?`` into ``events``."""
    q = events | union_over(hbp, events)
    return (q | union_over(ecop, q)) & writes
