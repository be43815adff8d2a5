"""Pure-numpy implementations of the hot kernels.

Every function here has a numba twin in ``_numba.py`` with the same
signature and bit-identical results on integer/boolean outputs.
"""

import numpy as np


def haversine_km(lat1, lon1, lat2, lon2, radius_km):
    lat1 = np.radians(lat1)
    lat2 = np.radians(lat2)
    dlat = lat2 - lat1
    dlon = np.radians(lon2) - np.radians(lon1)
    a = np.sin(dlat / 2.0) ** 2 + np.cos(lat1) * np.cos(lat2) * np.sin(dlon / 2.0) ** 2
    a = np.clip(a, 0.0, 1.0)
    return 2.0 * radius_km * np.arctan2(np.sqrt(a), np.sqrt(1.0 - a))


def channel_max(raw):
    return raw.max(axis=2)


def top_k_mask(values, k):
    flat = values.ravel()
    # stable sort on the negated values keeps row-major order among ties
    order = np.argsort(-flat, kind="stable")
    mask = np.zeros(flat.shape[0], dtype=np.bool_)
    mask[order[:k]] = True
    return mask.reshape(values.shape)


def dilate_chebyshev(mask, beta):
    out = mask.copy()
    if beta <= 0:
        return out
    h, w = mask.shape
    # separable square max filter of half-width beta == beta passes of a 3x3 element
    rows = out.copy()
    for d in range(1, beta + 1):
        if d >= w:
            break
        rows[:, d:] |= out[:, :-d]
        rows[:, :-d] |= out[:, d:]
    cols = rows.copy()
    for d in range(1, beta + 1):
        if d >= h:
            break
        cols[d:, :] |= rows[:-d, :]
        cols[:-d, :] |= rows[d:, :]
    return cols


def and_count(a, b):
    return int(np.count_nonzero(a & b))


def label_overlap_counts(labels, topk, n_labels):
    flat = labels.ravel()
    sizes = np.bincount(flat, minlength=n_labels).astype(np.int64)
    hits = np.bincount(flat[topk.ravel()], minlength=n_labels).astype(np.int64)
    return sizes, hits
