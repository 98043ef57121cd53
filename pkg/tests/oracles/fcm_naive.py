"""Textbook fuzzy c-means updates written with explicit loops."""


def memberships(points, centers, m):
    out = []
    for p in points:
        d = [((p[0] - c[0]) ** 2 + (p[1] - c[1]) ** 2) ** 0.5 for c in centers]
        zero = [k for k, v in enumerate(d) if v == 0.0]
        if zero:
            out.append([1.0 / len(zero) if k in zero else 0.0 for k in range(len(centers))])
            continue
        row = []
        for j in range(len(centers)):
            row.append(1.0 / sum((d[j] / d[k]) ** (2.0 / (m - 1.0)) for k in range(len(centers))))
        out.append(row)
    return out


def centers(points, u, m):
    out = []
    for j in range(len(u[0])):
        w = [row[j] ** m for row in u]
        tot = sum(w)
        out.append((sum(wi * p[0] for wi, p in zip(w, points)) / tot, sum(wi * p[1] for wi, p in zip(w, points)) / tot))
    return out


def run(points, init, m=2.0, iterations=50):
    c = [tuple(x) for x in init]
    for _ in range(iterations):
        u = memberships(points, c, m)
        c = centers(points, u, m)
    return c
