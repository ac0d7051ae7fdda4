"""Independent brute-force reference implementations used by the tests."""

import itertools
import math

import numpy as np


def average_ranks(values):
    """Average 1-based ranks, computed by direct counting."""
    v = list(values)
    out = []
    for a in v:
        below = sum(1 for b in v if b < a)
        equal = sum(1 for b in v if b == a)
        out.append(below + (equal + 1) / 2.0)
    return out


def wilcoxon_bruteforce(baseline, candidate):
    """``(W, p_greater, p_less, p_two_sided)`` by enumerating all sign patterns."""
    d = [c - b for b, c in zip(baseline, candidate) if c - b != 0]
    ranks = np.array(average_ranks([abs(x) for x in d]))
    w = float(sum(r for r, x in zip(ranks, d) if x > 0))
    patterns = np.array(list(itertools.product((0, 1), repeat=len(d))), dtype=float).reshape(-1, len(d))
    sums = patterns @ ranks
    pg = float(np.mean(sums >= w - 1e-9))
    pl = float(np.mean(sums <= w + 1e-9))
    return w, pg, pl, min(1.0, 2 * min(pg, pl))


def pearson_loop(a, b):
    n = len(a)
    ma, mb = sum(a) / n, sum(b) / n
    num = sum((x - ma) * (y - mb) for x, y in zip(a, b))
    den = math.sqrt(sum((x - ma) ** 2 for x in a) * sum((y - mb) ** 2 for y in b))
    return num / den


def spearman_bruteforce(x, y):
    """``(rho, p)`` with p from every permutation of ``y``'s ranks."""
    rx, ry = average_ranks(x), average_ranks(y)
    rho = pearson_loop(rx, ry)
    perms = list(itertools.permutations(ry))
    hits = sum(abs(pearson_loop(rx, p)) >= abs(rho) - 1e-12 for p in perms)
    return rho, hits / len(perms)


def ssim_single_window(x, y, data_range, sigma=1.5, k1=0.01, k2=0.03):
    """Gaussian-weighted SSIM of an image exactly one window in size."""
    n = x.shape[0]
    c = (n - 1) / 2.0
    w = np.ones(x.shape)
    for ax in range(x.ndim):
        g = np.array([math.exp(-((i - c) ** 2) / (2 * sigma**2)) for i in range(n)])
        shape = [1] * x.ndim
        shape[ax] = n
        w = w * g.reshape(shape)
    w = w / w.sum()
    mx, my = float((w * x).sum()), float((w * y).sum())
    vx = float((w * (x - mx) ** 2).sum())
    vy = float((w * (y - my) ** 2).sum())
    cxy = float((w * (x - mx) * (y - my)).sum())
    c1, c2 = (k1 * data_range) ** 2, (k2 * data_range) ** 2
    return ((2 * mx * my + c1) * (2 * cxy + c2)) / ((mx**2 + my**2 + c1) * (vx + vy + c2))


def psnr_formula(x, y, data_range):
    mse = sum((a - b) ** 2 for a, b in zip(np.ravel(x), np.ravel(y))) / np.size(x)
    return 10 * math.log10(data_range**2 / mse)
