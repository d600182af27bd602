# cython: language_level=3, boundscheck=False, wraparound=False
"""Compiled relation kernels; same contract as ``_pykernels``.

Graphs up to 64 events run on machine words; larger ones fall back to the
arbitrary-precision implementation.
"""

from . import _pykernels as _py

from libc.stdint cimport uint64_t

BACKEND = "cython"

iter_bits = _py.iter_bits

cdef int MAXW = 64


cdef extern from *:
    int __builtin_ctzll(unsigned long long) nogil


cdef inline int _ctz(uint64_t x) nogil:
    return __builtin_ctzll(x)


cdef inline bint _small(object mask):
    return mask.bit_length() <= MAXW


def union_over(masks, sel):
    if not _small(sel):
        return _py.union_over(masks, sel)
    cdef uint64_t s = sel
    out = 0
    cdef uint64_t acc = 0
    cdef int i
    cdef bint wide = False
    while s:
        i = _ctz(s)
        m = masks[i]
        if m.bit_length() > MAXW:
            wide = True
            out |= m
        else:
            acc |= <uint64_t>m
        s &= s - 1
    if wide:
        return out | acc
    return acc


def eco_extend(list pred, list succ, int e, dpred, dsucc):
    if e >= MAXW or len(pred) > MAXW:
        return _py.eco_extend(pred, succ, e, dpred, dsucc)
    while len(pred) <= e:
        pred.append(0)
        succ.append(0)
    cdef int n = len(pred)
    cdef uint64_t cp[64]
    cdef uint64_t cs[64]
    cdef int i
    for i in range(n):
        cp[i] = pred[i]
        cs[i] = succ[i]
    cdef uint64_t dp = dpred, ds = dsucc
    cdef uint64_t p = dp, s = ds, m
    m = dp
    while m:
        p |= cp[_ctz(m)]
        m &= m - 1
    m = ds
    while m:
        s |= cs[_ctz(m)]
        m &= m - 1
    cdef uint64_t ebit = (<uint64_t>1) << e
    cp[e] = p
    cs[e] = s
    m = p
    while m:
        i = _ctz(m)
        cs[i] |= s | ebit
        m &= m - 1
    m = s
    while m:
        i = _ctz(m)
        cp[i] |= p | ebit
        m &= m - 1
    for i in range(n):
        pred[i] = cp[i]
        succ[i] = cs[i]


def closure(succ):
    cdef int n = len(succ)
    if n > MAXW:
        return _py.closure(succ)
    cdef uint64_t rows[64]
    cdef int i, k
    cdef uint64_t kb
    for i in range(n):
        rows[i] = succ[i]
    for k in range(n):
        kb = (<uint64_t>1) << k
        for i in range(n):
            if rows[i] & kb:
                rows[i] |= rows[k]
    return [rows[i] for i in range(n)]


def encountered(hbp, ecop, events, writes):
    if len(hbp) > MAXW:
        return _py.encountered(hbp, ecop, events, writes)
    cdef uint64_t ev = events, q, m, acc
    q = ev
    m = ev
    while m:
        q |= <uint64_t>hbp[_ctz(m)]
        m &= m - 1
    acc = q
    m = q
    while m:
        acc |= <uint64_t>ecop[_ctz(m)]
        m &= m - 1
    return acc & <uint64_t>writes
