"""numba-compiled kernels; results match :mod:`._numpy` exactly."""
from __future__ import annotations

import numpy as np
from numba import njit

ABANDONED = np.iinfo(np.int64).max


@njit(cache=True, nogil=True)
def _edit_distance(a, b):
    if a.size < b.size:
        a, b = b, a
    m = b.size
    if m == 0:
        return a.size
    return _distance_into(a, b, np.empty(m + 1, dtype=np.int64), np.empty(m + 1, dtype=np.int64))


@njit(cache=True, nogil=True)
def _distance_into(a, b, prev, cur):
    # prev/cur are caller-owned scratch rows of length >= b.size + 1
    m = b.size
    for j in range(m + 1):
        prev[j] = j
    for i in range(1, a.size + 1):
        cur[0] = i
        ai = a[i - 1]
        for j in range(1, m + 1):
            best = prev[j - 1] + (0 if b[j - 1] == ai else 1)
            if prev[j] + 1 < best:
                best = prev[j] + 1
            if cur[j - 1] + 1 < best:
                best = cur[j - 1] + 1
            cur[j] = best
        prev, cur = cur, prev
    return prev[m]


def edit_distance(a: np.ndarray, b: np.ndarray) -> int:
    return int(_edit_distance(a, b))


@njit(cache=True, nogil=True)
def _cross_distances(A, B):
    # T[j] is the DP row of A[i] against B[r, :j]; rows above the first position
    # where B[r] differs from B[r - 1] are reused, so sorted batches are cheap
    n, m = A.shape[0], B.shape[0]
    la, lb = A.shape[1], B.shape[1]
    out = np.empty((n, m), dtype=np.int64)
    T = np.empty((lb + 1, la + 1), dtype=np.int64)
    for k in range(la + 1):
        T[0, k] = k
    for i in range(n):
        a = A[i]
        for r in range(m):
            start = 0
            if r > 0:
                while start < lb and B[r, start] == B[r - 1, start]:
                    start += 1
            for j in range(start + 1, lb + 1):
                prev = T[j - 1]
                cur = T[j]
                cur[0] = j
                bj = B[r, j - 1]
                for k in range(1, la + 1):
                    best = prev[k - 1] + (0 if a[k - 1] == bj else 1)
                    if prev[k] + 1 < best:
                        best = prev[k] + 1
                    if cur[k - 1] + 1 < best:
                        best = cur[k - 1] + 1
                    cur[k] = best
            out[i, r] = T[lb, la]
    return out


def cross_distances(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    return _cross_distances(np.ascontiguousarray(A, dtype=np.int64), np.ascontiguousarray(B, dtype=np.int64))


@njit(cache=True, nogil=True)
def _prefix_distances(ref, hyp, checkpoints, limit):
    out = np.full(checkpoints.size, ABANDONED, dtype=np.int64)
    m = hyp.size
    row = np.arange(m + 1)
    new = np.empty(m + 1, dtype=np.int64)
    nxt = 0
    while nxt < checkpoints.size and checkpoints[nxt] == 0:
        out[nxt] = m
        nxt += 1
    last = checkpoints[checkpoints.size - 1] if checkpoints.size else 0
    for i in range(1, last + 1):
        new[0] = i
        lo = i
        ri = ref[i - 1]
        for j in range(1, m + 1):
            best = row[j - 1] + (0 if hyp[j - 1] == ri else 1)
            if row[j] + 1 < best:
                best = row[j] + 1
            if new[j - 1] + 1 < best:
                best = new[j - 1] + 1
            new[j] = best
            if best < lo:
                lo = best
        row, new = new, row
        while nxt < checkpoints.size and checkpoints[nxt] == i:
            out[nxt] = row[m]
            nxt += 1
        if lo > limit:
            break
    return out


def prefix_distances(
    ref: np.ndarray, hyp: np.ndarray, checkpoints: np.ndarray, limit: int
) -> np.ndarray:
    return _prefix_distances(ref, hyp, checkpoints.astype(np.int64), np.int64(limit))


@njit(cache=True, nogil=True)
def _frame_stats(x, frame, hop):
    n = x.size
    if frame > n:
        frame = n
    n_frames = 1 + (n - frame + hop - 1) // hop
    ms = np.empty(n_frames)
    zcr = np.empty(n_frames)
    for f in range(n_frames):
        s = f * hop
        e = min(s + frame, n)
        acc = 0.0
        cnt = 0
        prev_neg = np.signbit(x[s])
        for k in range(s, e):
            v = np.float64(x[k])
            acc += v * v
            neg = np.signbit(x[k])
            if k > s and neg != prev_neg:
                cnt += 1
            prev_neg = neg
        ms[f] = acc / (e - s)
        zcr[f] = cnt / (e - s - 1) if e - s > 1 else 0.0
    return ms, zcr


def frame_stats(x: np.ndarray, frame: int, hop: int) -> tuple[np.ndarray, np.ndarray]:
    return _frame_stats(x, int(frame), int(hop))
