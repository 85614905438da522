"""Loop-only reference implementations used as test oracles.

Everything here works on plain Python floats and nested loops, so it shares no
vectorised code path with the package.
"""

import math


def sig(x):
    return 1.0 / (1.0 + math.exp(-x))


def matvec(W, x):
    return [sum(W[r][c] * x[c] for c in range(len(x))) for r in range(len(W))]


def vadd(*vs):
    return [sum(col) for col in zip(*vs)]


def gru(p, m, h):
    """Scalar-by-scalar GRU with h' = (1 - z) h + z h~."""
    F = len(h)
    wz, uz, bz = p["wz"], p["uz"], p["bz"]
    wr, ur, br = p["wr"], p["ur"], p["br"]
    wh, uh, bh = p["wh"], p["uh"], p["bh"]
    out = []
    r = [sig(sum(wr[a][c] * m[c] for c in range(F)) + sum(ur[a][c] * h[c] for c in range(F)) + br[a]) for a in range(F)]
    rh = [r[c] * h[c] for c in range(F)]
    for a in range(F):
        z = sig(sum(wz[a][c] * m[c] for c in range(F)) + sum(uz[a][c] * h[c] for c in range(F)) + bz[a])
        cand = math.tanh(sum(wh[a][c] * m[c] for c in range(F)) + sum(uh[a][c] * rh[c] for c in range(F)) + bh[a])
        out.append((1.0 - z) * h[a] + z * cand)
    return out


def gru_dict(store, prefix="gru"):
    keys = ("wz", "uz", "bz", "wr", "ur", "br", "wh", "uh", "bh")
    return {k: store[f"{prefix}.{k}"].data.tolist() for k in keys}


def edge_prob(W, a, hi, hj, k):
    F = len(hi)
    wi = matvec(W[k], hi)
    wj = matvec(W[k], hj)
    s = sum(a[k][c] * wi[c] for c in range(F)) + sum(a[k][F + c] * wj[c] for c in range(F))
    return sig(s)


def gr2n_forward(store, feats, T, self_loops=False):
    """Returns x[i][j][k] for all ordered pairs (diagonal included, as computed)."""
    W = store["W"].data.tolist()
    a = store["a"].data.tolist()
    g = gru_dict(store)
    K = len(W)
    h = [list(map(float, row)) for row in feats]
    n = len(h)
    for _ in range(T):
        new = []
        for i in range(n):
            m = [0.0] * len(h[i])
            for j in range(n):
                if j == i and not self_loops:
                    continue
                for k in range(K):
                    alpha = edge_prob(W, a, h[i], h[j], k)
                    wj = matvec(W[k], h[j])
                    m = [m[c] + alpha * wj[c] for c in range(len(m))]
            new.append(gru(g, m, h[i]))
        h = new
    return [[[edge_prob(W, a, h[i], h[j], k) for k in range(K)] for j in range(n)] for i in range(n)]


def softmax(z):
    mx = max(z)
    e = [math.exp(v - mx) for v in z]
    s = sum(e)
    return [v / s for v in e]


def mlp_pair(store, hi, hj):
    w1 = store["mlp.w1"].data.tolist()
    b1 = store["mlp.b1"].data.tolist()
    w2 = store["mlp.w2"].data.tolist()
    b2 = store["mlp.b2"].data.tolist()
    x = list(hi) + list(hj)
    z = [max(0.0, v) for v in vadd(matvec(w1, x), b1)]
    return softmax(vadd(matvec(w2, z), b2))


def pair_forward(store, feats):
    n = len(feats)
    return [[mlp_pair(store, feats[i], feats[j]) for j in range(n)] for i in range(n)]


def gcn_forward(store, feats, layers):
    """Dense GCN with A + I over all nodes (fully connected) and residuals."""
    n = len(feats)
    F = len(feats[0])
    deg = [float(n)] * n  # every node connects to all n (self included)
    a_hat = [[1.0 / math.sqrt(deg[i] * deg[j]) for j in range(n)] for i in range(n)]
    h = [list(map(float, row)) for row in feats]
    for layer in range(layers):
        W = store[f"gcn.w{layer}"].data.tolist()
        agg = [[sum(a_hat[i][j] * h[j][c] for j in range(n)) for c in range(F)] for i in range(n)]
        # h W (row vector times matrix)
        hw = [[sum(agg[i][c] * W[c][d] for c in range(F)) for d in range(F)] for i in range(n)]
        h = [[max(0.0, hw[i][d]) + h[i][d] for d in range(F)] for i in range(n)]
    return [[mlp_pair(store, h[i], h[j]) for j in range(n)] for i in range(n)]


def ggnn_forward(store, feats, steps):
    n = len(feats)
    W = store["ggnn.w"].data.tolist()
    g = gru_dict(store)
    h = [list(map(float, row)) for row in feats]
    for _ in range(steps):
        msgs = []
        for i in range(n):
            m = [0.0] * len(h[i])
            for j in range(n):
                if j != i:
                    m = vadd(m, matvec(W, h[j]))
            msgs.append(m)
        h = [gru(g, msgs[i], h[i]) for i in range(n)]
    return [[mlp_pair(store, h[i], h[j]) for j in range(n)] for i in range(n)]


def bce_sum_loss(x, labels, K, weights=None, delta=1e-7):
    """Sum-form weighted one-hot BCE over labeled pairs, and the number of pairs."""
    total = 0.0
    for (i, j), y in labels.items():
        w = 1.0 if weights is None else weights[y]
        for k in range(K):
            p = min(max(x[i][j][k], delta), 1.0 - delta)
            t = 1.0 if k == y else 0.0
            total += w * -(t * math.log(p) + (1.0 - t) * math.log(1.0 - p))
    return total, len(labels)
