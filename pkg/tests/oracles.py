"""Brute-force reference implementations, deliberately loop-based and independent of the package."""

import math


def matmul_loops(a, b):
    m, k, n = len(a), len(b), len(b[0])
    out = [[0.0] * n for _ in range(m)]
    for i in range(m):
        for j in range(n):
            s = 0.0
            for t in range(k):
                s += a[i][t] * b[t][j]
            out[i][j] = s
    return out


def ranks_bruteforce(xs):
    # rank = 1 + #smaller + (#equal - 1) / 2
    out = []
    for x in xs:
        smaller = sum(1 for y in xs if y < x)
        equal = sum(1 for y in xs if y == x)
        out.append(1 + smaller + (equal - 1) / 2)
    return out


def pearson_loops(xs, ys):
    n = len(xs)
    mx, my = sum(xs) / n, sum(ys) / n
    sxy = sum((x - mx) * (y - my) for x, y in zip(xs, ys))
    sxx = sum((x - mx) ** 2 for x in xs)
    syy = sum((y - my) ** 2 for y in ys)
    return sxy / math.sqrt(sxx * syy)


def spearman_bruteforce(xs, ys):
    return pearson_loops(ranks_bruteforce(list(xs)), ranks_bruteforce(list(ys)))


def minkowski_direct(a, b, p):
    return sum(abs(x - y) ** p for x, y in zip(a, b)) ** (1.0 / p)


def knn_bruteforce(train, labels, query, k, p):
    dists = [(minkowski_direct(row, query, p), i) for i, row in enumerate(train)]
    # sort by (distance, index): ties go to the lower training index
    nearest = [i for _, i in sorted(dists)][:k]
    votes = {}
    for i in nearest:
        votes[labels[i]] = votes.get(labels[i], 0) + 1
    top = max(votes.values())
    for i in nearest:
        if votes[labels[i]] == top:
            return labels[i]


def select_k_bruteforce(train, labels, val, val_labels, grid, p):
    best_k, best_acc = None, -1.0
    for k in sorted(grid):
        if k > len(train):
            continue
        acc = sum(knn_bruteforce(train, labels, q, k, p) == y for q, y in zip(val, val_labels)) / len(val)
        if acc > best_acc:
            best_k, best_acc = k, acc
    return best_k, best_acc


def cos_loops(a, b):
    dot = sum(x * y for x, y in zip(a, b))
    return dot / (math.sqrt(sum(x * x for x in a)) * math.sqrt(sum(y * y for y in b)))


def mnrl_bruteforce(anchors, positives, negatives, scale):
    """Materialize the full [B, 2B] logit table and average the cross-entropies."""
    b = len(anchors)
    candidates = list(positives) + list(negatives)
    total = 0.0
    for i in range(b):
        logits = [scale * cos_loops(anchors[i], c) for c in candidates]
        m = max(logits)
        lse = m + math.log(sum(math.exp(z - m) for z in logits))
        total += lse - logits[i]
    return total / b


def fnv1a_64_reference(data: bytes) -> int:
    h = 14695981039346656037
    for byte in data:
        h = ((h ^ byte) * 1099511628211) % (1 << 64)
    return h
