"""Dynamic time warping by exhaustive enumeration of every monotone alignment.

Each case lists both point sequences and the minimum summed Euclidean cost
over all paths from (0, 0) to (n-1, m-1) with steps (1,0), (0,1), (1,1).
No dynamic programming is used. Values are written with repr() so they
round-trip exactly.
"""
import json
import math
import random
import sys

CASES = 200
MAX_LEN = 6


def paths(n, m):
    stack = [((0, 0),)]
    while stack:
        p = stack.pop()
        i, j = p[-1]
        if (i, j) == (n - 1, m - 1):
            yield p
            continue
        for di, dj in ((1, 0), (0, 1), (1, 1)):
            a, b = i + di, j + dj
            if a < n and b < m:
                stack.append(p + ((a, b),))


def brute(x, y):
    best = math.inf
    for p in paths(len(x), len(y)):
        cost = sum(math.dist(x[i], y[j]) for i, j in p)
        best = min(best, cost)
    return best


def main(out):
    rng = random.Random(20240611)
    cases = []
    for _ in range(CASES):
        n = rng.randint(1, MAX_LEN)
        m = rng.randint(1, MAX_LEN)
        x = [[rng.uniform(-1, 1), rng.uniform(-1, 1)] for _ in range(n)]
        y = [[rng.uniform(-1, 1), rng.uniform(-1, 1)] for _ in range(m)]
        cases.append({"x": x, "y": y, "distance": brute(x, y)})
    json.dump(cases, out, indent=None)
    out.write("\n")


if __name__ == "__main__":
    main(sys.stdout)
