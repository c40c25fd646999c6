# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels for the per-token hot path (see _kernels.pyref for the
contract and feature layout; this module mirrors it function for function)."""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, log

cnp.import_array()

NAME = "c"


def feature_dim(int v_size, int n_predicates):
    return 7 + v_size + 4 * n_predicates


def entropy(double[::1] post):
    cdef double h = 0.0
    cdef Py_ssize_t i
    for i in range(post.shape[0]):
        if post[i] > 0.0:
            h -= post[i] * log(post[i])
    return h


cdef void _info_gains(double[::1] post, signed char[:, ::1] codes, double[::1] out) noexcept:
    cdef Py_ssize_t n_pred = codes.shape[0]
    cdef Py_ssize_t n_obj = codes.shape[1]
    cdef Py_ssize_t p, n
    cdef int a
    cdef double s0, s1, s2, t0, t1, t2, h, eh, pn, plp
    h = 0.0
    for n in range(n_obj):
        if post[n] > 0.0:
            h -= post[n] * log(post[n])
    for p in range(n_pred):
        s0 = s1 = s2 = 0.0
        t0 = t1 = t2 = 0.0
        for n in range(n_obj):
            pn = post[n]
            plp = pn * log(pn) if pn > 0.0 else 0.0
            a = codes[p, n]
            if a == 0:
                s0 += pn
                t0 += plp
            elif a == 1:
                s1 += pn
                t1 += plp
            else:
                s2 += pn
                t2 += plp
        eh = 0.0
        if s0 > 0.0:
            eh += -t0 + s0 * log(s0)
        if s1 > 0.0:
            eh += -t1 + s1 * log(s1)
        if s2 > 0.0:
            eh += -t2 + s2 * log(s2)
        out[p] = h - eh


def info_gains(double[::1] post, signed char[:, ::1] codes):
    out = np.empty(codes.shape[0], dtype=np.float64)
    _info_gains(post, codes, out)
    return out


def featurize(
    double[::1] post,
    signed char[:, ::1] codes,
    unsigned char[::1] asked,
    int last_token,
    int j,
    int m,
    int j_max,
    int m_max,
    int v_size,
    out=None,
):
    cdef Py_ssize_t n_pred = codes.shape[0]
    cdef Py_ssize_t n_obj = codes.shape[1]
    if out is None:
        out = np.zeros(7 + v_size + 4 * n_pred, dtype=np.float64)
    else:
        out[:] = 0.0
    cdef double[::1] o = out
    cdef Py_ssize_t n, p
    cdef double h = 0.0, m1 = 0.0, m2 = 0.0, m3 = 0.0, pn, split
    cdef Py_ssize_t base = 7 + v_size
    for n in range(n_obj):
        pn = post[n]
        if pn > 0.0:
            h -= pn * log(pn)
        if pn > m1:
            m3 = m2; m2 = m1; m1 = pn
        elif pn > m2:
            m3 = m2; m2 = pn
        elif pn > m3:
            m3 = pn
    o[0] = h
    o[1] = m1
    o[2] = m1
    o[3] = m2
    o[4] = m3
    o[5] = <double>j / <double>j_max
    o[6] = <double>m / <double>m_max
    if last_token >= 0:
        o[7 + last_token] = 1.0
    for p in range(n_pred):
        split = 0.0
        for n in range(n_obj):
            if codes[p, n] == 0:
                split += post[n]
        o[base + p] = split
        o[base + n_pred + p] = asked[p]
    _info_gains(post, codes, o[base + 2 * n_pred : base + 3 * n_pred])
    for p in range(n_pred):
        o[base + 3 * n_pred + p] = o[base + 2 * n_pred + p] * (1.0 - asked[p])
    return out


def masked_softmax(double[::1] logits, unsigned char[::1] mask, out=None):
    cdef Py_ssize_t v = logits.shape[0]
    if out is None:
        out = np.empty(v, dtype=np.float64)
    cdef double[::1] o = out
    cdef Py_ssize_t i
    cdef double mx = 0.0
    cdef bint any_legal = False
    cdef double z = 0.0
    for i in range(v):
        if mask[i] and (not any_legal or logits[i] > mx):
            mx = logits[i]
            any_legal = True
    if not any_legal:
        raise ValueError("all-false legality mask")
    for i in range(v):
        if mask[i]:
            o[i] = exp(logits[i] - mx)
            z += o[i]
        else:
            o[i] = 0.0
    for i in range(v):
        o[i] /= z
    return out


def policy_probs(
    double[:, ::1] w,
    double[::1] b,
    double[::1] feats,
    unsigned char[::1] mask,
    out=None,
):
    cdef Py_ssize_t v = w.shape[0]
    cdef Py_ssize_t f = w.shape[1]
    if out is None:
        out = np.empty(v, dtype=np.float64)
    cdef double[::1] o = out
    cdef Py_ssize_t i, k
    cdef double acc, mx = 0.0, z = 0.0
    cdef bint any_legal = False
    # logits only for legal tokens; illegal entries never contribute
    for i in range(v):
        if mask[i]:
            acc = b[i]
            for k in range(f):
                acc += w[i, k] * feats[k]
            o[i] = acc
            if not any_legal or acc > mx:
                mx = acc
                any_legal = True
        else:
            o[i] = 0.0
    if not any_legal:
        raise ValueError("all-false legality mask")
    for i in range(v):
        if mask[i]:
            o[i] = exp(o[i] - mx)
            z += o[i]
    for i in range(v):
        if mask[i]:
            o[i] /= z
    return out


def sample_index(double[::1] probs, double u):
    cdef double acc = 0.0
    cdef Py_ssize_t i, last = -1
    for i in range(probs.shape[0]):
        if probs[i] > 0.0:
            last = i
        acc += probs[i]
        if acc > u:
            return i
    return last


def featurize_batch(
    double[:, ::1] post,
    signed char[:, :, ::1] codes,
    unsigned char[:, ::1] asked,
    long[::1] last,
    long[::1] j,
    long[::1] m,
    int j_max,
    int m_max,
    int v_size,
    out=None,
):
    """Row-wise featurize for a batch of states (padded object columns carry
    answer code 3 and zero posterior mass)."""
    cdef Py_ssize_t rows = post.shape[0]
    cdef Py_ssize_t n_pred = codes.shape[1]
    cdef Py_ssize_t n_obj = post.shape[1]
    if out is None:
        out = np.zeros((rows, 7 + v_size + 4 * n_pred), dtype=np.float64)
    else:
        out[:] = 0.0
    cdef double[:, ::1] o = out
    cdef Py_ssize_t r, n, p
    cdef Py_ssize_t base = 7 + v_size
    cdef int a
    cdef double h, m1, m2, m3, pn, split
    cdef double s0, s1, s2, t0, t1, t2, eh, plp
    for r in range(rows):
        h = 0.0; m1 = 0.0; m2 = 0.0; m3 = 0.0
        for n in range(n_obj):
            pn = post[r, n]
            if pn > 0.0:
                h -= pn * log(pn)
            if pn > m1:
                m3 = m2; m2 = m1; m1 = pn
            elif pn > m2:
                m3 = m2; m2 = pn
            elif pn > m3:
                m3 = pn
        o[r, 0] = h
        o[r, 1] = m1
        o[r, 2] = m1
        o[r, 3] = m2
        o[r, 4] = m3
        o[r, 5] = <double>j[r] / <double>j_max
        o[r, 6] = <double>m[r] / <double>m_max
        if last[r] >= 0:
            o[r, 7 + last[r]] = 1.0
        for p in range(n_pred):
            s0 = s1 = s2 = 0.0
            t0 = t1 = t2 = 0.0
            for n in range(n_obj):
                pn = post[r, n]
                plp = pn * log(pn) if pn > 0.0 else 0.0
                a = codes[r, p, n]
                if a == 0:
                    s0 += pn; t0 += plp
                elif a == 1:
                    s1 += pn; t1 += plp
                elif a == 2:
                    s2 += pn; t2 += plp
            eh = 0.0
            if s0 > 0.0:
                eh += -t0 + s0 * log(s0)
            if s1 > 0.0:
                eh += -t1 + s1 * log(s1)
            if s2 > 0.0:
                eh += -t2 + s2 * log(s2)
            o[r, base + p] = s0
            o[r, base + n_pred + p] = asked[r, p]
            o[r, base + 2 * n_pred + p] = h - eh
            o[r, base + 3 * n_pred + p] = (h - eh) * (1.0 - asked[r, p])
    return out


def masked_softmax_batch(double[:, ::1] logits, unsigned char[:, ::1] masks, out=None):
    cdef Py_ssize_t rows = logits.shape[0]
    cdef Py_ssize_t v = logits.shape[1]
    if out is None:
        out = np.empty((rows, v), dtype=np.float64)
    cdef double[:, ::1] o = out
    cdef Py_ssize_t r, i
    cdef double mx, z
    cdef bint any_legal
    for r in range(rows):
        mx = 0.0
        any_legal = False
        z = 0.0
        for i in range(v):
            if masks[r, i] and (not any_legal or logits[r, i] > mx):
                mx = logits[r, i]
                any_legal = True
        if not any_legal:
            raise ValueError("all-false legality mask")
        for i in range(v):
            if masks[r, i]:
                o[r, i] = exp(logits[r, i] - mx)
                z += o[r, i]
            else:
                o[r, i] = 0.0
        for i in range(v):
            o[r, i] /= z
    return out


def sample_index_batch(double[:, ::1] probs, double[::1] u):
    cdef Py_ssize_t rows = probs.shape[0]
    cdef Py_ssize_t v = probs.shape[1]
    acts = np.empty(rows, dtype=np.int64)
    cdef long[::1] a = acts
    cdef Py_ssize_t r, i, last
    cdef double acc
    for r in range(rows):
        acc = 0.0
        last = -1
        a[r] = -1
        for i in range(v):
            if probs[r, i] > 0.0:
                last = i
            acc += probs[r, i]
            if acc > u[r]:
                a[r] = i
                break
        if a[r] == -1:
            a[r] = last
    return acts


def bayes_update(
    double[::1] post,
    signed char[::1] truth_codes,
    int observed,
    double epsilon,
    out=None,
):
    cdef Py_ssize_t n = post.shape[0]
    if out is None:
        out = np.empty(n, dtype=np.float64)
    cdef double[::1] o = out
    cdef Py_ssize_t i
    cdef double z = 0.0, like
    for i in range(n):
        like = 1.0 - epsilon if truth_codes[i] == observed else epsilon / 2.0
        o[i] = post[i] * like
        z += o[i]
    if z <= 0.0:
        for i in range(n):
            o[i] = 1.0 / n
        return out, True
    for i in range(n):
        o[i] /= z
    return out, False
