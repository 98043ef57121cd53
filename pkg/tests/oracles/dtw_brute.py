"""Brute-force DTW: minimum cost over every monotone warping path.

Paths are enumerated depth-first from (0, 0); the running cost is summed in
path order, so the result is the exact minimum of the per-path sums.
"""

import math


def local_cost(x, y):
    if len(x) == 1:
        return abs(x[0] - y[0])
    s = 0.0
    for u, v in zip(x, y):
        s += (u - v) * (u - v)
    return math.sqrt(s)


def all_path_costs(a, b):
    """Yield the summed cost of every monotone path; ``a``, ``b`` are lists of point tuples."""
    la, lb = len(a), len(b)
    cost = [[local_cost(a[i], b[j]) for j in range(lb)] for i in range(la)]
    stack = [(0, 0, cost[0][0])]
    while stack:
        i, j, acc = stack.pop()
        if i == la - 1 and j == lb - 1:
            yield acc
            continue
        for di, dj in ((1, 0), (0, 1), (1, 1)):
            ni, nj = i + di, j + dj
            if ni < la and nj < lb:
                stack.append((ni, nj, acc + cost[ni][nj]))


def brute_dtw(a, b):
    return min(all_path_costs(a, b))


def brute_dtw_independent(a, b):
    """Sum over columns of the 1-D brute-force distances."""
    total = 0.0
    for k in range(len(a[0])):
        total += brute_dtw([(p[k],) for p in a], [(p[k],) for p in b])
    return total
