"""Orbit-level statistics of the original map: occupancies, coding checks,
and finite-horizon limit-set estimates.

Iteration is honest (no asymptotic fast-forwarding); all occupancy counts are
exact integers, and the coding checks compare integer cross-products only.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import DomainError
from .inducing import InducedScheme

__all__ = [
    "OccupancyTrace",
    "simulate_occupancy",
    "batch_regions",
    "coding_check",
    "limit_set_estimate",
    "ensemble_run",
]


@dataclass
class OccupancyTrace:
    x0: float
    n: int
    regions: np.ndarray        # int8 region code per step 0..n-1 (orbit point i)
    counts: dict               # region code -> exact count
    return_marks: list         # tau_k (step indices with f^tau_k(x) in Y), k >= 1
    ratio_series: list         # (tau_k, tau_vec_k) exact cumulative integers
    start_in_y: bool

    def region_count(self, code: int) -> int:
        return self.counts.get(code, 0)


def _region_codes(scheme: InducedScheme):
    """Cell edges and per-cell codes: j in 0..d-1 for X_j, d+c for Y comps."""
    edges = scheme._edges
    codes = []
    for tag in scheme._edge_tags:
        if tag[0] == "X":
            codes.append(tag[1])
        else:
            codes.append(scheme.d + tag[1])
    return edges, np.asarray(codes, dtype=np.int8)


def batch_regions(scheme: InducedScheme, x0s, n: int) -> np.ndarray:
    """Region codes of the first n orbit points for each start (vectorized)."""
    spec = scheme.map
    if any(br.kappa != 3.0 for br in spec.branches):
        raise DomainError("vectorized stepping assumes cubic branches")
    edges, codes = _region_codes(scheme)
    bps = np.asarray(spec.breakpoints)
    cs = np.asarray([br.c for br in spec.branches])
    xis = np.asarray([br.xi for br in spec.branches])
    x = np.asarray(x0s, dtype=np.float64).copy()
    out = np.empty((len(x), n), dtype=np.int8)
    inner = np.empty_like(x)
    for i in range(n):
        cell = np.searchsorted(edges, x, side="right") - 1
        np.clip(cell, 0, len(codes) - 1, out=cell)
        out[:, i] = codes[cell]
        b = np.searchsorted(bps, x, side="right")
        u = x - xis[b]
        np.multiply(u, u, out=inner)
        x = x + cs[b] * inner * u
        np.clip(x, 0.0, 1.0, out=x)
    return out


def simulate_many(scheme: InducedScheme, x0s, n: int) -> list["OccupancyTrace"]:
    """Exact occupancy traces for many starts, stepped in one vectorized run."""
    mat = batch_regions(scheme, x0s, n)
    return [_trace_from_regions(scheme, float(x0), n, mat[i])
            for i, x0 in enumerate(x0s)]


def simulate_occupancy(scheme: InducedScheme, x0: float, n: int) -> OccupancyTrace:
    """Exact occupancy counts, return marks, and cumulative return-time
    vectors along the first n orbit points of x0."""
    if not (0.0 <= x0 <= 1.0):
        raise DomainError("x0 outside [0,1]")
    return _trace_from_regions(scheme, x0, n, batch_regions(scheme, [x0], n)[0])


def _trace_from_regions(scheme, x0, n, regions) -> OccupancyTrace:
    d = scheme.d
    counts = {}
    vals, cnts = np.unique(regions, return_counts=True)
    for v, c in zip(vals.tolist(), cnts.tolist()):
        counts[int(v)] = int(c)
    in_y = regions >= d
    start_in_y = bool(in_y[0])
    marks = np.nonzero(in_y[1:])[0] + 1
    ratio_series = []
    counts_x = [np.cumsum(regions == j) for j in range(d)]
    for t in marks.tolist():
        # tau_vec counts iterates 1..tau_k in X_j; orbit point 0 is excluded
        vec = tuple(int(counts_x[j][t]) - (1 if regions[0] == j else 0) for j in range(d))
        ratio_series.append((int(t), vec))
    return OccupancyTrace(
        x0=x0, n=n, regions=regions, counts=counts,
        return_marks=[int(t) for t in marks.tolist()],
        ratio_series=ratio_series, start_in_y=start_in_y,
    )


@dataclass
class CodingReport:
    returns: int
    sandwich_ok: bool
    monotone_ok: bool
    y_ratio_ok: bool
    witness: dict | None = None

    @property
    def ok(self) -> bool:
        return self.sandwich_ok and self.monotone_ok and self.y_ratio_ok


def coding_check(scheme: InducedScheme, trace: OccupancyTrace) -> CodingReport:
    """Between consecutive returns, the occupation fraction of each sticky
    region is monotone and sandwiched between the return-time ratios at the
    window's ends; at each return, the Y-fraction equals k/tau_k exactly.

    All comparisons are integer cross-products.
    """
    if len(trace.return_marks) < 2:
        raise DomainError("need at least two returns")
    if not trace.start_in_y:
        raise DomainError("coding check requires a start in Y")
    d = scheme.d
    regions = trace.regions
    n = trace.n
    cum = np.zeros((d, n + 1), dtype=np.int64)
    for j in range(d):
        cum[j, 1:] = np.cumsum(regions == j)
    in_y = regions >= d
    cum_y = np.concatenate([[0], np.cumsum(in_y)])
    marks = trace.return_marks
    witness = None
    sandwich_ok = monotone_ok = y_ratio_ok = True

    for k, t in enumerate(marks, start=1):
        # e_{tau_k}(Y) = k / tau_k: visits at steps 0..tau_k-1 plus none at t itself
        if int(cum_y[t]) != k:
            y_ratio_ok = False
            witness = witness or {"kind": "y_ratio", "k": k, "tau_k": t, "count": int(cum_y[t])}
            break

    steps = np.arange(n, dtype=np.int64)
    for j in range(d):
        tauj = cum[j]
        for k in range(len(marks) - 1):
            a, b = marks[k], marks[k + 1]
            # tau^{(j)}_k counts iterates 1..tau_k in X_j = cum at a (orbit point 0 in Y).
            # The window-start anchor needs denominators a and a+1: the Y visit
            # at step a enters e_n one step before the first excursion iterate.
            ua, ub = int(tauj[a]), int(tauj[b])
            anchors = [(ua, a), (ua, a + 1), (ub, b)]
            lo_n, lo_d = min(anchors, key=lambda t: Fraction(t[0], t[1]))
            hi_n, hi_d = max(anchors, key=lambda t: Fraction(t[0], t[1]))
            ns = steps[a:b + 1]
            us = tauj[a:b + 1]
            # sandwich: lo <= u/n <= hi for every n in the window
            if (us * lo_d < lo_n * ns).any() or (us * hi_d > hi_n * ns).any():
                bad = int(ns[(us * lo_d < lo_n * ns) | (us * hi_d > hi_n * ns)][0])
                sandwich_ok = False
                witness = witness or {"kind": "sandwich", "j": j, "n": bad, "window": (a, b)}
                break
            # monotone on [a+1, b]: strict rises and strict falls never mix
            rising = (us[2:] * ns[1:-1] > us[1:-1] * ns[2:])
            falling = (us[2:] * ns[1:-1] < us[1:-1] * ns[2:])
            if rising.any() and falling.any():
                monotone_ok = False
                witness = witness or {"kind": "monotone", "j": j, "window": (a, b)}
                break
        if not (sandwich_ok and monotone_ok):
            break
    return CodingReport(
        returns=len(marks),
        sandwich_ok=sandwich_ok,
        monotone_ok=monotone_ok,
        y_ratio_ok=y_ratio_ok,
        witness=witness,
    )


@dataclass
class LimitSetReport:
    points: list                 # (k, ratio tuple floats) post burn-in
    hausdorff_to_target: float | None
    max_consecutive_diff: float


def _seg_dist(x, a, b, grid: int = 256) -> float:
    """max-norm distance from x to the segment [a, b]."""
    best = math.inf
    for t in range(grid + 1):
        lam = t / grid
        best = min(best, max(abs(xi - (ai + lam * (bi - ai)))
                             for xi, ai, bi in zip(x, a, b)))
    return best


def limit_set_estimate(trace: OccupancyTrace, burn_in: int | None = None,
                       target=None) -> LimitSetReport:
    """Post-burn-in return-ratio cloud, max-norm Hausdorff distance to a
    target point or polyline, and the largest consecutive difference."""
    series = trace.ratio_series
    if burn_in is None:
        burn_in = len(series) // 10
    if burn_in >= len(series):
        raise DomainError("burn_in exceeds the number of returns")
    pts = []
    for k in range(burn_in, len(series)):
        tau_k, vec = series[k]
        kk = k + 1
        pts.append((kk, tuple(v / tau_k for v in vec)))
    dmax = 0.0
    for (_, r1), (_, r2) in zip(pts, pts[1:]):
        dmax = max(dmax, max(abs(a - b) for a, b in zip(r1, r2)))
    hd = None
    if target is not None:
        verts = [tuple(float(v) for v in p) for p in target.points]
        hd = 0.0
        for _, r in pts:
            if len(verts) == 1:
                dist = max(abs(a - b) for a, b in zip(r, verts[0]))
            else:
                dist = min(_seg_dist(r, a, b) for a, b in zip(verts, verts[1:]))
            hd = max(hd, dist)
    return LimitSetReport(points=pts, hausdorff_to_target=hd,
                          max_consecutive_diff=dmax)


def ensemble_run(scheme: InducedScheme, seeds, n: int, path, threads: int = 1):
    """Per-seed return-ratio trajectories as CSV (seed, k, tau_k, tau_vec...).

    Deterministic given the seed list; the thread cap only parallelizes
    independent traces and never reorders output.
    """
    seeds = sorted(seeds)
    if len(seeds) > 10_000:
        raise DomainError("seed count capped at 10^4")
    x0s = [float(np.random.default_rng(s).uniform(0.0, 1.0)) for s in seeds]
    rows = []

    def run_chunk(args):
        chunk_seeds, chunk_x0s = args
        traces = simulate_many(scheme, chunk_x0s, n)
        out = []
        for seed, tr in zip(chunk_seeds, traces):
            for k, (tau_k, vec) in enumerate(tr.ratio_series, start=1):
                out.append([seed, k, tau_k] + list(vec))
        return out

    size = max(1, (len(seeds) + max(1, threads) - 1) // max(1, threads))
    chunks = [(seeds[i:i + size], x0s[i:i + size]) for i in range(0, len(seeds), size)]
    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=threads) as ex:
            for chunk in ex.map(run_chunk, chunks):
                rows.extend(chunk)
    else:
        for c in chunks:
            rows.extend(run_chunk(c))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["seed", "k", "tau_k"] + [f"tau{j + 1}_k" for j in range(scheme.d)])
        w.writerows(rows)
    return len(rows)
