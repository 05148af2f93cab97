# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled versions of the LSTM recurrence and flat-kernel mean shift."""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, tanh

cnp.import_array()


cdef inline double _sigmoid(double z) nogil:
    return 1.0 / (1.0 + exp(-z))


cdef inline double _tanh(double z) nogil:
    # exp is several times cheaper than libm tanh; saturates cleanly at +-1
    return 1.0 - 2.0 / (exp(2.0 * z) + 1.0)


def lstm_recurrence(double[:, :, ::1] xw, double[:, ::1] wh,
                    double[:, ::1] h0, double[:, ::1] c0):
    cdef Py_ssize_t steps = xw.shape[0], rows = xw.shape[1], four_h = xw.shape[2]
    cdef Py_ssize_t hidden = four_h // 4
    hs_arr = np.empty((steps, rows, hidden))
    cs_arr = np.empty((steps, rows, hidden))
    gates_arr = np.empty((steps, rows, four_h))
    z_arr = np.empty(four_h)
    h_arr = np.empty(hidden)
    c_arr = np.empty(hidden)
    cdef double[:, :, ::1] hs = hs_arr
    cdef double[:, :, ::1] cs = cs_arr
    cdef double[:, :, ::1] gates = gates_arr
    cdef double[::1] z = z_arr
    cdef double[::1] h = h_arr
    cdef double[::1] c = c_arr
    cdef Py_ssize_t t, n, j, k
    cdef double ig, fg, gg, og, hk
    with nogil:
        # rows are independent sequences; run each through time with its state in cache
        for n in range(rows):
            for k in range(hidden):
                h[k] = h0[n, k]
                c[k] = c0[n, k]
            for t in range(steps):
                for j in range(four_h):
                    z[j] = xw[t, n, j]
                for k in range(hidden):
                    hk = h[k]
                    if hk != 0.0:
                        for j in range(four_h):
                            z[j] += hk * wh[k, j]
                for k in range(hidden):
                    ig = _sigmoid(z[k])
                    fg = _sigmoid(z[hidden + k])
                    gg = _tanh(z[2 * hidden + k])
                    og = _sigmoid(z[3 * hidden + k])
                    c[k] = fg * c[k] + ig * gg
                    h[k] = og * _tanh(c[k])
                    cs[t, n, k] = c[k]
                    hs[t, n, k] = h[k]
                    gates[t, n, k] = ig
                    gates[t, n, hidden + k] = fg
                    gates[t, n, 2 * hidden + k] = gg
                    gates[t, n, 3 * hidden + k] = og
    return hs_arr, cs_arr, gates_arr


def lstm_recurrence_backward(double[:, :, ::1] dhs, double[:, :, ::1] dcs,
                             double[:, ::1] wh, double[:, ::1] h0, double[:, ::1] c0,
                             double[:, :, ::1] hs, double[:, :, ::1] cs,
                             double[:, :, ::1] gates):
    cdef Py_ssize_t steps = hs.shape[0], rows = hs.shape[1], hidden = hs.shape[2]
    cdef Py_ssize_t four_h = 4 * hidden
    dz_arr = np.empty((steps, rows, four_h))
    dwh_arr = np.zeros((hidden, four_h))
    dh_next_arr = np.zeros((rows, hidden))
    dc_next_arr = np.zeros((rows, hidden))
    cdef double[:, :, ::1] dz = dz_arr
    cdef double[:, ::1] dwh = dwh_arr
    cdef double[:, ::1] dh_next = dh_next_arr
    cdef double[:, ::1] dc_next = dc_next_arr
    cdef Py_ssize_t t, n, j, k
    cdef double ig, fg, gg, og, tc, dh, dc, c_prev, h_prev, acc
    with nogil:
        for t in range(steps - 1, -1, -1):
            for n in range(rows):
                for k in range(hidden):
                    ig = gates[t, n, k]
                    fg = gates[t, n, hidden + k]
                    gg = gates[t, n, 2 * hidden + k]
                    og = gates[t, n, 3 * hidden + k]
                    if t > 0:
                        c_prev = cs[t - 1, n, k]
                    else:
                        c_prev = c0[n, k]
                    tc = _tanh(cs[t, n, k])
                    dh = dhs[t, n, k] + dh_next[n, k]
                    dc = dcs[t, n, k] + dc_next[n, k] + dh * og * (1.0 - tc * tc)
                    dz[t, n, k] = dc * gg * ig * (1.0 - ig)
                    dz[t, n, hidden + k] = dc * c_prev * fg * (1.0 - fg)
                    dz[t, n, 2 * hidden + k] = dc * ig * (1.0 - gg * gg)
                    dz[t, n, 3 * hidden + k] = dh * tc * og * (1.0 - og)
                    dc_next[n, k] = dc * fg
                for k in range(hidden):
                    acc = 0.0
                    for j in range(four_h):
                        acc = acc + dz[t, n, j] * wh[k, j]
                    dh_next[n, k] = acc
                    if t > 0:
                        h_prev = hs[t - 1, n, k]
                    else:
                        h_prev = h0[n, k]
                    if h_prev != 0.0:
                        for j in range(four_h):
                            dwh[k, j] += h_prev * dz[t, n, j]
    return dz_arr, dwh_arr, dh_next_arr, dc_next_arr


def flat_mean_shift(points, double bandwidth, double tol=1e-6, int max_iter=300):
    data_arr = np.ascontiguousarray(points, dtype=np.float64)
    cdef double[:, ::1] data = data_arr
    out_arr = data_arr.copy()
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t m = data.shape[0], p, q, it
    cdef double bw2 = bandwidth * bandwidth, tol2 = tol * tol
    cdef double x, y, sx, sy, dx, dy, nx, ny
    cdef Py_ssize_t count
    with nogil:
        for p in range(m):
            x = out[p, 0]
            y = out[p, 1]
            for it in range(max_iter):
                sx = 0.0
                sy = 0.0
                count = 0
                for q in range(m):
                    dx = data[q, 0] - x
                    dy = data[q, 1] - y
                    if dx * dx + dy * dy <= bw2:
                        sx += data[q, 0]
                        sy += data[q, 1]
                        count += 1
                if count == 0:
                    break
                nx = sx / count
                ny = sy / count
                dx = nx - x
                dy = ny - y
                x = nx
                y = ny
                if dx * dx + dy * dy < tol2:
                    break
            out[p, 0] = x
            out[p, 1] = y
    return out_arr
