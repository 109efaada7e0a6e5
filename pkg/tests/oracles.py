"""Brute-force reference implementations written directly from the formulas.

Deliberately naive: plain Python loops over lists of floats, no shared code
with the package beyond reading ``arch.layer_dims`` and the raw theta.
"""
import itertools
import math


def sq_dist(a, b):
    return sum((x - y) ** 2 for x, y in zip(a, b))


def mean_vec(vecs):
    n = len(vecs)
    return [sum(v[k] for v in vecs) / n for k in range(len(vecs[0]))]


def krum_scores(vecs, beta):
    """For every subset of size M-beta-2 of the other models, take the minimum sum."""
    m = len(vecs)
    k = m - beta - 2
    out = []
    for i in range(m):
        others = [j for j in range(m) if j != i]
        out.append(min(sum(sq_dist(vecs[i], vecs[j]) for j in sub)
                       for sub in itertools.combinations(others, k)))
    return out


def krum(vecs, beta):
    s = krum_scores(vecs, beta)
    best = min(range(len(vecs)), key=lambda i: (s[i], i))
    return list(vecs[best])


def trim_scores(vecs):
    return [sum(sq_dist(vecs[i], vecs[j]) for j in range(len(vecs))) for i in range(len(vecs))]


def trimmed(vecs, beta):
    s = trim_scores(vecs)
    ranked = sorted(range(len(vecs)), key=lambda i: (s[i], i))
    kept = ranked[beta:len(vecs) - beta]
    return mean_vec([vecs[i] for i in kept])


def _layers(arch, theta):
    out, pos = [], 0
    for i, o in arch.layer_dims:
        w = [[theta[pos + r * o + c] for c in range(o)] for r in range(i)]
        pos += i * o
        b = list(theta[pos:pos + o])
        pos += o
        out.append((w, b))
    return out


def mlp_rows(arch, theta, rows, upto_last_hidden=False):
    layers = _layers(arch, list(theta))
    if upto_last_hidden:
        layers = layers[:-1]
    outs = []
    for x in rows:
        a = list(x)
        for k, (w, b) in enumerate(layers):
            z = [b[c] + sum(a[r] * w[r][c] for r in range(len(a))) for c in range(len(b))]
            hidden = upto_last_hidden or k < len(layers) - 1
            a = [math.tanh(v) for v in z] if hidden else z
        outs.append(a)
    return outs


def ce_loss(arch, theta, inputs, labels):
    total = 0.0
    for logits, y in zip(mlp_rows(arch, theta, inputs), labels):
        mx = max(logits)
        lse = mx + math.log(sum(math.exp(v - mx) for v in logits))
        total += lse - logits[y]
    return total / len(labels)


def fang(arch, vecs, beta, inputs, labels, discard="lowest"):
    m = len(vecs)
    loss_a = ce_loss(arch, trimmed(vecs, beta), inputs, labels)
    scores = []
    for i in range(m):
        rest = [vecs[j] for j in range(m) if j != i]
        scores.append(loss_a - ce_loss(arch, trimmed(rest, beta), inputs, labels))
    sign = 1 if discard == "lowest" else -1
    ranked = sorted(range(m), key=lambda i: (sign * scores[i], i))
    return scores, mean_vec([vecs[i] for i in sorted(ranked[beta:])])


def log_sigmoid(x):
    return -math.log1p(math.exp(-x)) if x >= 0 else x - math.log1p(math.exp(x))


def bce(x, y):
    """(1/O) sum_o -(y_o log s(x_o) + (1 - y_o) log(1 - s(x_o)))."""
    return sum(-(yo * log_sigmoid(xo) + (1 - yo) * log_sigmoid(-xo)) for xo, yo in zip(x, y)) / len(x)


def bce_matrix(px, py):
    return sum(bce(rx, ry) for rx, ry in zip(px, py)) / len(px)


def dummy_contrastive(arch, vecs, prev, dummy, beta):
    p_g = mlp_rows(arch, prev, dummy, upto_last_hidden=True)
    ps = [mlp_rows(arch, v, dummy, upto_last_hidden=True) for v in vecs]
    m = len(vecs)
    scores = [sum(bce_matrix(p_g, ps[j]) + bce_matrix(p_g, ps[i]) for j in range(m)) for i in range(m)]
    ranked = sorted(range(m), key=lambda i: (scores[i], i))
    return scores, mean_vec([vecs[i] for i in sorted(ranked[:m - beta])])
