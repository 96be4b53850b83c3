"""Compiled time-stepping loop.

Every phase is a per-cell map writing a disjoint array, so the result does
not depend on how ``prange`` splits the rows.
"""

import numba as nb
import numpy as np

# the system TBB is too old for numba; try OpenMP first
nb.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]


@nb.njit(parallel=True, cache=True)
def advance(
    p, vx, vy, cv, cp, dvx, dvy, dp,
    src_i, src_j, src_w, src_samples, n0, n_steps,
    mic_i, mic_j, traces,
):
    nx, ny = p.shape
    n_src = src_i.size
    n_mic = mic_i.size
    for k in range(n_steps):
        n = n0 + k
        # velocity update, damping and rigid-face masking (folded into dvx/dvy)
        for i in nb.prange(nx - 1):
            for j in range(ny):
                vx[i, j] = (vx[i, j] - cv * (p[i + 1, j] - p[i, j])) * dvx[i, j]
        for i in nb.prange(nx):
            for j in range(ny - 1):
                vy[i, j] = (vy[i, j] - cv * (p[i, j + 1] - p[i, j])) * dvy[i, j]
        s = src_samples[n] if n < src_samples.size else 0.0
        # pressure damping + source + divergence; outer faces are held at zero
        for i in nb.prange(nx):
            for j in range(ny):
                right = vx[i, j] if i < nx - 1 else 0.0
                left = vx[i - 1, j] if i > 0 else 0.0
                top = vy[i, j] if j < ny - 1 else 0.0
                bottom = vy[i, j - 1] if j > 0 else 0.0
                p[i, j] = p[i, j] * dp[i, j] - cp * ((right - left) + (top - bottom))
        if s != 0.0:
            for q in range(n_src):
                p[src_i[q], src_j[q]] += s * src_w[q]
        for m in range(n_mic):
            traces[m, n] = p[mic_i[m], mic_j[m]]
    return np.isfinite(p).all()
