"""numba-compiled kernels. Signatures mirror ``_numpy.py``."""

import math

import numpy as np
from numba import njit


@njit(cache=True)
def _haversine_scalar(lat1, lon1, lat2, lon2, radius_km):
    rlat1 = math.radians(lat1)
    rlat2 = math.radians(lat2)
    sdlat = math.sin((rlat2 - rlat1) / 2.0)
    sdlon = math.sin((math.radians(lon2) - math.radians(lon1)) / 2.0)
    a = sdlat * sdlat + math.cos(rlat1) * math.cos(rlat2) * sdlon * sdlon
    if a < 0.0:
        a = 0.0
    elif a > 1.0:
        a = 1.0
    return 2.0 * radius_km * math.atan2(math.sqrt(a), math.sqrt(1.0 - a))


@njit(cache=True)
def _haversine_flat(lat1, lon1, lat2, lon2, radius_km):
    n = lat1.shape[0]
    out = np.empty(n, dtype=np.float64)
    for i in range(n):
        out[i] = _haversine_scalar(lat1[i], lon1[i], lat2[i], lon2[i], radius_km)
    return out


def haversine_km(lat1, lon1, lat2, lon2, radius_km):
    arrays = np.broadcast_arrays(
        *(np.asarray(x, dtype=np.float64) for x in (lat1, lon1, lat2, lon2))
    )
    shape = arrays[0].shape
    flat = [np.ascontiguousarray(x).ravel() for x in arrays]
    return _haversine_flat(flat[0], flat[1], flat[2], flat[3], float(radius_km)).reshape(shape)


@njit(cache=True)
def _channel_max(raw):
    h, w, d = raw.shape
    out = np.empty((h, w), dtype=raw.dtype)
    for i in range(h):
        for j in range(w):
            m = raw[i, j, 0]
            for c in range(1, d):
                if raw[i, j, c] > m:
                    m = raw[i, j, c]
            out[i, j] = m
    return out


def channel_max(raw):
    return _channel_max(np.ascontiguousarray(raw))


@njit(cache=True)
def _top_k_flat(flat, k):
    n = flat.shape[0]
    # k-th largest value; everything above it is in, ties at it fill up in index order
    thr = np.partition(flat, n - k)[n - k]
    need = k
    for i in range(n):
        if flat[i] > thr:
            need -= 1
    mask = np.zeros(n, dtype=np.bool_)
    for i in range(n):
        if flat[i] > thr:
            mask[i] = True
        elif flat[i] == thr and need > 0:
            mask[i] = True
            need -= 1
    return mask


def top_k_mask(values, k):
    flat = np.ascontiguousarray(values).ravel()
    return _top_k_flat(flat, k).reshape(values.shape)


@njit(cache=True)
def _dilate(mask, beta):
    h, w = mask.shape
    rows = np.zeros((h, w), dtype=np.bool_)
    for i in range(h):
        # distance to the most recent set pixel on the left, then on the right
        last = -beta - 1
        for j in range(w):
            if mask[i, j]:
                last = j
            if j - last <= beta:
                rows[i, j] = True
        last = w + beta + 1
        for j in range(w - 1, -1, -1):
            if mask[i, j]:
                last = j
            if last - j <= beta:
                rows[i, j] = True
    out = np.zeros((h, w), dtype=np.bool_)
    last = np.full(w, -beta - 1, dtype=np.int64)
    for i in range(h):
        for j in range(w):
            if rows[i, j]:
                last[j] = i
            if i - last[j] <= beta:
                out[i, j] = True
    last[:] = h + beta + 1
    for i in range(h - 1, -1, -1):
        for j in range(w):
            if rows[i, j]:
                last[j] = i
            if last[j] - i <= beta:
                out[i, j] = True
    return out


def dilate_chebyshev(mask, beta):
    if beta <= 0:
        return mask.copy()
    return _dilate(np.ascontiguousarray(mask), beta)


@njit(cache=True)
def _and_count(a, b):
    n = 0
    for i in range(a.shape[0]):
        if a[i] and b[i]:
            n += 1
    return n


def and_count(a, b):
    return int(_and_count(np.ascontiguousarray(a).ravel(), np.ascontiguousarray(b).ravel()))


@njit(cache=True)
def _label_overlap(flat, topk, n_labels):
    sizes = np.zeros(n_labels, dtype=np.int64)
    hits = np.zeros(n_labels, dtype=np.int64)
    for i in range(flat.shape[0]):
        lab = flat[i]
        sizes[lab] += 1
        if topk[i]:
            hits[lab] += 1
    return sizes, hits


def label_overlap_counts(labels, topk, n_labels):
    return _label_overlap(
        np.ascontiguousarray(labels).ravel(), np.ascontiguousarray(topk).ravel(), n_labels
    )
