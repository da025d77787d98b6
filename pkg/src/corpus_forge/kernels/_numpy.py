"""Pure-numpy kernels. Loops run over one axis only; the other is vectorized."""
from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

ABANDONED = np.iinfo(np.int64).max


def _close_insertions(row: np.ndarray, ramp: np.ndarray) -> np.ndarray:
    # row[j] = min(row[j], row[j-1] + 1) applied left to right
    return np.minimum.accumulate(row - ramp) + ramp


def edit_distance(a: np.ndarray, b: np.ndarray) -> int:
    """Levenshtein distance between two integer-coded sequences."""
    if a.size < b.size:
        a, b = b, a
    m = b.size
    if m == 0:
        return int(a.size)
    ramp = np.arange(m + 1, dtype=np.int64)
    prev = ramp.copy()
    cur = np.empty_like(prev)
    for i in range(1, a.size + 1):
        cur[0] = i
        np.minimum(prev[1:] + 1, prev[:-1] + (b != a[i - 1]), out=cur[1:])
        cur = _close_insertions(cur, ramp)
        prev, cur = cur, prev
    return int(prev[m])


def cross_distances(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Distances between every row of ``A`` (n, la) and every row of ``B`` (m, lb).

    The DP runs once with every cell holding an (n, m) matrix, one entry per pair.
    """
    n, la = A.shape
    m, lb = B.shape
    dtype = np.int16 if la + lb < 2**15 else np.int64
    prev = [np.full((n, m), j, dtype=dtype) for j in range(lb + 1)]
    for i in range(1, la + 1):
        cur = [np.full((n, m), i, dtype=dtype)]
        col = A[:, i - 1][:, None]
        for j in range(1, lb + 1):
            best = prev[j - 1] + (col != B[:, j - 1][None, :])
            np.minimum(best, prev[j] + 1, out=best)
            np.minimum(best, cur[j - 1] + 1, out=best)
            cur.append(best)
        prev = cur
    return prev[lb].astype(np.int64)


def prefix_distances(
    ref: np.ndarray, hyp: np.ndarray, checkpoints: np.ndarray, limit: int
) -> np.ndarray:
    """Distance from ``ref[:k]`` to ``hyp`` for every ``k`` in ``checkpoints``.

    ``checkpoints`` must be ascending. Once every cell of a DP row exceeds
    ``limit`` no longer prefix can come back under it, so the remaining
    checkpoints are filled with :data:`ABANDONED`.
    """
    out = np.full(checkpoints.size, ABANDONED, dtype=np.int64)
    m = hyp.size
    ramp = np.arange(m + 1, dtype=np.int64)
    row = ramp.copy()
    nxt = 0
    while nxt < checkpoints.size and checkpoints[nxt] == 0:
        out[nxt] = m
        nxt += 1
    for i in range(1, int(checkpoints[-1]) + 1 if checkpoints.size else 0):
        new = np.empty_like(row)
        new[0] = i
        np.minimum(row[1:] + 1, row[:-1] + (hyp != ref[i - 1]), out=new[1:])
        row = _close_insertions(new, ramp)
        while nxt < checkpoints.size and checkpoints[nxt] == i:
            out[nxt] = row[m]
            nxt += 1
        if row.min() > limit:
            break
    return out


def frame_stats(x: np.ndarray, frame: int, hop: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-frame mean square and zero-crossing rate.

    Frame ``i`` covers samples ``[i*hop, min(i*hop + frame, len(x)))``; enough
    frames are produced to reach the final sample.
    """
    n = x.size
    frame = min(frame, n)
    n_frames = 1 + -(-(n - frame) // hop)
    padded_len = (n_frames - 1) * hop + frame
    x64 = np.zeros(padded_len, dtype=np.float64)
    x64[:n] = x
    sq = sliding_window_view(x64 * x64, frame)[::hop].sum(axis=1)

    neg = np.signbit(x64[:n])
    changes = np.zeros(padded_len, dtype=np.int64)
    changes[1:n] = neg[1:] != neg[:-1]
    # pair (k-1, k) belongs to the frame when both samples do: skip window's first slot
    cnt = sliding_window_view(changes, frame)[::hop][:, 1:].sum(axis=1)

    starts = np.arange(n_frames, dtype=np.int64) * hop
    lengths = np.minimum(starts + frame, n) - starts
    ms = sq / lengths
    pairs = np.maximum(lengths - 1, 1)
    zcr = np.where(lengths > 1, cnt / pairs, 0.0)
    return ms, zcr
