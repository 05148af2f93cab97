"""Pure numpy versions of the hot loops. Semantics match ``_ckernels`` exactly."""
import numpy as np


def _sigmoid(z):
    return 0.5 * (np.tanh(0.5 * z) + 1.0)


def lstm_recurrence(xw, wh, h0, c0):
    """Run the LSTM recurrence given precomputed input projections.

    ``xw`` is (T, N, 4H) and already includes the bias. Gate order is
    input, forget, candidate, output. Returns hidden states, cell states and
    post-activation gates, each stacked over time.
    """
    steps, rows, four_h = xw.shape
    hidden = four_h // 4
    hs = np.empty((steps, rows, hidden))
    cs = np.empty((steps, rows, hidden))
    gates = np.empty((steps, rows, four_h))
    h, c = h0, c0
    for t in range(steps):
        z = xw[t] + h @ wh
        i = _sigmoid(z[:, :hidden])
        f = _sigmoid(z[:, hidden:2 * hidden])
        g = np.tanh(z[:, 2 * hidden:3 * hidden])
        o = _sigmoid(z[:, 3 * hidden:])
        c = f * c + i * g
        h = o * np.tanh(c)
        hs[t] = h
        cs[t] = c
        gates[t, :, :hidden] = i
        gates[t, :, hidden:2 * hidden] = f
        gates[t, :, 2 * hidden:3 * hidden] = g
        gates[t, :, 3 * hidden:] = o
    return hs, cs, gates


def lstm_recurrence_backward(dhs, dcs, wh, h0, c0, hs, cs, gates):
    """Backpropagate through ``lstm_recurrence``.

    Returns (dz, dwh, dh0, dc0) where ``dz`` is the gradient with respect to
    the pre-activation gates at every step.
    """
    steps, rows, hidden = hs.shape
    dz = np.empty((steps, rows, 4 * hidden))
    dwh = np.zeros_like(wh)
    dh_next = np.zeros((rows, hidden))
    dc_next = np.zeros((rows, hidden))
    wh_t = wh.T
    for t in range(steps - 1, -1, -1):
        i = gates[t, :, :hidden]
        f = gates[t, :, hidden:2 * hidden]
        g = gates[t, :, 2 * hidden:3 * hidden]
        o = gates[t, :, 3 * hidden:]
        c_prev = cs[t - 1] if t > 0 else c0
        h_prev = hs[t - 1] if t > 0 else h0
        tc = np.tanh(cs[t])
        dh = dhs[t] + dh_next
        dc = dcs[t] + dc_next + dh * o * (1.0 - tc * tc)
        dz[t, :, :hidden] = dc * g * i * (1.0 - i)
        dz[t, :, hidden:2 * hidden] = dc * c_prev * f * (1.0 - f)
        dz[t, :, 2 * hidden:3 * hidden] = dc * i * (1.0 - g * g)
        dz[t, :, 3 * hidden:] = dh * tc * o * (1.0 - o)
        dc_next = dc * f
        dh_next = dz[t] @ wh_t
        dwh += h_prev.T @ dz[t]
    return dz, dwh, dh_next, dc_next


def flat_mean_shift(points, bandwidth, tol=1e-6, max_iter=300):
    """Shift every point to its flat-kernel mode.

    Each start point moves to the mean of all data points within
    ``bandwidth`` (Euclidean, inclusive) until its own shift drops below
    ``tol``.
    """
    data = np.ascontiguousarray(points, dtype=np.float64)
    current = data.copy()
    active = np.ones(len(data), dtype=bool)
    bw2 = bandwidth * bandwidth
    for _ in range(max_iter):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        cur = current[idx]
        d2 = ((cur[:, None, :] - data[None, :, :]) ** 2).sum(axis=2)
        mask = d2 <= bw2
        counts = mask.sum(axis=1)
        stranded = counts == 0
        new = (mask.astype(np.float64) @ data) / np.maximum(counts, 1)[:, None]
        new[stranded] = cur[stranded]
        shift2 = ((new - cur) ** 2).sum(axis=1)
        current[idx] = new
        active[idx[(shift2 < tol * tol) | stranded]] = False
    return current
