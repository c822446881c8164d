"""Brute-force reference implementations used only by the tests.

Deliberately slow and written without numpy vector tricks so they share no
code path with the package.
"""
import itertools
import math

import numpy as np


def sqdist(x, y):
    return sum((a - b) ** 2 for a, b in zip(x, y))


def kkz_bruteforce(points, k):
    points = [list(map(float, p)) for p in points]
    norms = [math.sqrt(sum(v * v for v in p)) for p in points]
    best = max(norms)
    chosen = [norms.index(best)]
    while len(chosen) < k:
        best_j, best_d = None, -1.0
        for j, p in enumerate(points):
            if j in chosen:
                continue
            d = min(math.sqrt(sqdist(p, points[c])) for c in chosen)
            if d > best_d:
                best_j, best_d = j, d
        chosen.append(best_j)
    return chosen


def medoid_cost(points, medoids):
    return sum(min(sqdist(p, points[m]) for m in medoids) for p in points)


def optimal_medoids(points, k):
    """Exhaustive search over all k-subsets of points."""
    best = None
    for subset in itertools.combinations(range(len(points)), k):
        c = medoid_cost(points, subset)
        if best is None or c < best[0]:
            best = (c, subset)
    return best


def optimal_two_partition(points):
    """Minimum within-cluster sum of squares over every split into two non-empty groups."""
    n = len(points)
    best = None
    for mask in range(1, 2 ** (n - 1)):
        groups = [[p for i, p in enumerate(points) if (mask >> i) & 1 == g] for g in (0, 1)]
        if not groups[0] or not groups[1]:
            continue
        cost = 0.0
        for g in groups:
            mean = [sum(col) / len(g) for col in zip(*g)]
            cost += sum(sqdist(p, mean) for p in g)
        labels = tuple((mask >> i) & 1 for i in range(n))
        if best is None or cost < best[0]:
            best = (cost, labels)
    return best


def connected_components(adjacency):
    n = len(adjacency)
    seen, count = [False] * n, 0
    for s in range(n):
        if seen[s]:
            continue
        count += 1
        stack = [s]
        seen[s] = True
        while stack:
            u = stack.pop()
            for v in range(n):
                if adjacency[u][v] and not seen[v]:
                    seen[v] = True
                    stack.append(v)
    return count


def knn_union_bruteforce(points, knn):
    n = len(points)
    nbrs = []
    for i in range(n):
        others = sorted((sqdist(points[i], points[j]), j) for j in range(n) if j != i)
        nbrs.append({j for _, j in others[:knn]})
    return [[i != j and (j in nbrs[i] or i in nbrs[j]) for j in range(n)] for i in range(n)]


def same_partition(a, b):
    """True when two label vectors describe the same partition up to renaming."""
    fwd, back = {}, {}
    for x, y in zip(a, b):
        if fwd.setdefault(x, y) != y or back.setdefault(y, x) != x:
            return False
    return True


def contrastive_loss_reference(sim, tau):
    n = len(sim)
    v2t = t2v = 0.0
    for i in range(n):
        row = [math.exp(sim[i][j] / tau) for j in range(n)]
        col = [math.exp(sim[j][i] / tau) for j in range(n)]
        v2t -= math.log(row[i] / sum(row))
        t2v -= math.log(col[i] / sum(col))
    return (v2t / n + t2v / n) / 2


def central_difference(f, x, eps):
    """Numerical gradient of scalar f at list-of-floats x."""
    grad = []
    for i in range(len(x)):
        xp, xm = list(x), list(x)
        xp[i] += eps
        xm[i] -= eps
        grad.append((f(xp) - f(xm)) / (2 * eps))
    return grad


def two_blobs(n_each=5, dim=2, gap=20.0, seed=0):
    r = np.random.default_rng(seed)
    a = r.normal(0.0, 0.3, size=(n_each, dim))
    b = r.normal(0.0, 0.3, size=(n_each, dim))
    b[:, 0] += gap
    return np.vstack([a, b]), np.array([0] * n_each + [1] * n_each)


def kmedoids_reference(points, k, max_iterations=50):
    """Plain-Python KKZ + assign/snap loop, mirroring the documented procedure."""
    pts = [list(map(float, p)) for p in points]
    medoids = kkz_bruteforce(pts, k)

    def assign(meds):
        labels = []
        for i, p in enumerate(pts):
            if i in meds:
                labels.append(meds.index(i))
                continue
            ds = [sqdist(p, pts[c]) for c in meds]
            labels.append(ds.index(min(ds)))
        return labels

    labels = assign(medoids)
    for _ in range(max_iterations):
        new = list(medoids)
        for j in range(k):
            members = [i for i, l in enumerate(labels) if l == j]
            if not members:
                continue
            mean = [sum(pts[i][c] for i in members) / len(members) for c in range(len(pts[0]))]
            ds = [sqdist(pts[i], mean) for i in members]
            new[j] = members[ds.index(min(ds))]
        medoids = new
        new_labels = assign(medoids)
        if new_labels == labels:
            break
        labels = new_labels
    return medoids, labels
