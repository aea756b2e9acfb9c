"""Induced first-return structure over a reference set Y.

Construction: Y is the union of the branch domains minus the branch-wise
preimages of those domains (two neutral points: the unique period-2 orbit
instead).  The complement splits into one sticky region X_j around each
neutral fixed point.  A point of Y either returns to Y in one step (level 0)
or enters some X_j, crawls for m steps, and exits into a specific component
of Y; the pair (target j, exit component) indexes a chain of level intervals
D_1, D_2, ... accumulating at the fixed point.

The return-map alphabet is materialized as a flat table: one row per
(base component, target, level, exit component), with the exact cylinder
enclosure and return-time data.  Everything downstream (cylinder calculus,
pool enumeration, tail statistics) reads this table.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BoundaryError,
    DomainError,
    InfeasibleError,
    LevelTruncationError,
    MapConstructionError,
    TruncationError,
)
from .maps import MapSpec

__all__ = [
    "YComponent",
    "ReturnSymbol",
    "SymbolTable",
    "InducedScheme",
    "TailTable",
    "ExpansionStats",
    "build_scheme",
    "region_of",
    "hit_time",
    "symbol_of",
    "tail_table",
    "expansion_stats",
]

_EDGE_TOL = 1e-12
_COVER_TOL = 1e-9


@dataclass(frozen=True)
class YComponent:
    index: int
    lo: float
    hi: float
    branch: int
    big_image: int

    @property
    def length(self) -> float:
        return self.hi - self.lo


@dataclass(frozen=True)
class ReturnSymbol:
    """One letter of the return-map alphabet (a maximal constant-return cylinder)."""

    sym_id: int
    base: int          # Y component the cylinder lies in
    target: int        # region index entered (branch of the landing component if level 0)
    level: int         # steps spent in X_target before exiting (0 = direct return)
    comp: int          # Y component the cylinder maps onto (exit component)
    lo: float
    hi: float

    @property
    def tau(self) -> int:
        return self.level + 1

    def tau_vec(self, d: int) -> tuple[int, ...]:
        v = [0] * d
        if self.level > 0:
            v[self.target] = self.level
        return tuple(v)


class SymbolTable:
    """Flat array view of the truncated alphabet, sorted by (base, target, level, comp)."""

    def __init__(self, base, target, level, comp, lo, hi):
        self.base = np.asarray(base, dtype=np.int32)
        self.target = np.asarray(target, dtype=np.int32)
        self.level = np.asarray(level, dtype=np.int64)
        self.comp = np.asarray(comp, dtype=np.int32)
        self.lo = np.asarray(lo, dtype=np.float64)
        self.hi = np.asarray(hi, dtype=np.float64)
        order = np.lexsort((self.comp, self.level, self.target, self.base))
        for name in ("base", "target", "level", "comp", "lo", "hi"):
            setattr(self, name, getattr(self, name)[order])
        self.tau = self.level + 1
        self.log_len = np.log(self.hi - self.lo)
        self.n = len(self.base)
        n_base = int(self.base.max()) + 1 if self.n else 0
        self._base_slice = []
        starts = np.searchsorted(self.base, np.arange(n_base + 1))
        for b in range(n_base):
            self._base_slice.append((int(starts[b]), int(starts[b + 1])))
        self._bt_slice = {}
        for b in range(n_base):
            s, e = self._base_slice[b]
            tgts = self.target[s:e]
            for j in np.unique(tgts):
                js = s + int(np.searchsorted(tgts, j, side="left"))
                je = s + int(np.searchsorted(tgts, j, side="right"))
                self._bt_slice[(b, int(j))] = (js, je)
        # composite key for (level, comp) lookup inside a (base, target) slice
        self._lc_key = self.level * (int(self.comp.max()) + 1 if self.n else 1) + self.comp
        self._n_comp_key = int(self.comp.max()) + 1 if self.n else 1

    def base_slice(self, b: int) -> tuple[int, int]:
        if b >= len(self._base_slice):
            return (0, 0)
        return self._base_slice[b]

    def bt_slice(self, b: int, j: int) -> tuple[int, int]:
        return self._bt_slice.get((b, j), (0, 0))

    def find(self, base: int, target: int, level: int, comp: int) -> int:
        """Row index of a symbol, or -1."""
        s, e = self.bt_slice(base, target)
        if s == e:
            return -1
        key = level * self._n_comp_key + comp
        i = s + int(np.searchsorted(self._lc_key[s:e], key))
        if i < e and self._lc_key[i] == key:
            return i
        return -1

    def symbol(self, i: int) -> ReturnSymbol:
        return ReturnSymbol(
            sym_id=i,
            base=int(self.base[i]),
            target=int(self.target[i]),
            level=int(self.level[i]),
            comp=int(self.comp[i]),
            lo=float(self.lo[i]),
            hi=float(self.hi[i]),
        )


@dataclass(frozen=True)
class InducedScheme:
    map: MapSpec
    m_max: int
    comps: tuple[YComponent, ...]
    big_images: tuple[tuple[int, ...], ...]
    canonical: tuple[int, ...]          # least component index per big image
    x_regions: tuple[tuple[float, float], ...]
    chains: dict
    residual: dict
    table: SymbolTable
    period_two: float | None = None
    _edges: np.ndarray = field(default=None, repr=False, compare=False)
    _edge_tags: tuple = field(default=None, repr=False, compare=False)

    @property
    def d(self) -> int:
        return len(self.x_regions)

    @property
    def L(self) -> int:
        return len(self.big_images)

    def big_of_comp(self, c: int) -> int:
        return self.comps[c].big_image

    def comp_interval(self, c: int) -> tuple[float, float]:
        comp = self.comps[c]
        return comp.lo, comp.hi

    def min_comp_length(self) -> float:
        return min(c.length for c in self.comps)

    def y_mass(self) -> float:
        return sum(c.length for c in self.comps)


# ---------------------------------------------------------------------------
# construction
# ---------------------------------------------------------------------------

def _solve_period_two(spec: MapSpec) -> float:
    """The point g in the first branch with f(f(g)) = g, f(g) in the last branch."""
    b0, b1 = spec.branches[0], spec.branches[1]
    x0 = b0.inverse(b0.hi)
    lo, hi = x0 + 1e-13, b0.hi - 1e-13

    def h(x):
        return b1(b0(x)) - x

    if not (h(lo) < 0.0 < h(hi)):
        raise MapConstructionError("no sign change bracketing the period-2 orbit")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if h(mid) < 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-15:
            break
    g = 0.5 * (lo + hi)
    if abs(b1(b0(g)) - g) > 1e-10:
        raise MapConstructionError("period-2 root refinement failed")
    return g


def build_scheme(spec: MapSpec, m_max: int) -> InducedScheme:
    if m_max < 1:
        raise DomainError("m_max must be >= 1")
    d = spec.d
    if spec.d_prime:
        raise MapConstructionError("schemes with extra expanding branches are not built here")
    comps_raw = []   # (lo, hi, branch)
    x_regions = []
    period_two = None
    if d == 2:
        g = _solve_period_two(spec)
        fg = spec.branches[0](g)
        bp = spec.branches[0].hi
        comps_raw = [(g, bp, 0), (bp, fg, 1)]
        x_regions = [(0.0, g), (fg, 1.0)]
        period_two = g
    else:
        for i, br in enumerate(spec.branches):
            a = br.inverse(br.lo)
            b = br.inverse(br.hi)
            x_regions.append((a, b))
            if a - br.lo > _EDGE_TOL:
                comps_raw.append((br.lo, a, i))
            if br.hi - b > _EDGE_TOL:
                comps_raw.append((b, br.hi, i))
    comps_raw.sort()
    branches_present = sorted({br for _, _, br in comps_raw})
    big_of_branch = {br: k for k, br in enumerate(branches_present)}
    comps = tuple(
        YComponent(index=k, lo=lo, hi=hi, branch=br, big_image=big_of_branch[br])
        for k, (lo, hi, br) in enumerate(comps_raw)
    )
    big_images = tuple(
        tuple(c.index for c in comps if c.big_image == b) for b in range(len(branches_present))
    )
    canonical = tuple(min(g) for g in big_images)

    # level chains per (target region, exit component)
    chains = {}
    residual = {}
    for j in range(d):
        xlo, xhi = x_regions[j]
        brj = spec.branches[j]
        xi = brj.xi
        for c in comps:
            p = brj.inverse(c.lo)
            q = brj.inverse(c.hi)
            lo1, hi1 = max(p, xlo), min(q, xhi)
            if hi1 - lo1 <= _EDGE_TOL:
                continue
            los = np.empty(m_max, dtype=np.float64)
            his = np.empty(m_max, dtype=np.float64)
            los[0], his[0] = lo1, hi1
            for m in range(1, m_max):
                los[m] = brj.inverse(los[m - 1], x0=los[m - 1])
                his[m] = brj.inverse(his[m - 1], x0=his[m - 1])
            chains[(j, c.index)] = (los, his)
            deepest = los[-1] if abs(los[-1] - xi) < abs(his[-1] - xi) else his[-1]
            residual[(j, c.index)] = abs(deepest - xi)

    # symbol rows
    base_r, target_r, level_r, comp_r, lo_r, hi_r = [], [], [], [], [], []
    for c0 in comps:
        br = spec.branches[c0.branch]
        glo, ghi = br(c0.lo), br(c0.hi)
        for c in comps:
            if c.lo >= glo - _COVER_TOL and c.hi <= ghi + _COVER_TOL:
                base_r.append(c0.index)
                target_r.append(c.branch)
                level_r.append(0)
                comp_r.append(c.index)
                a = br.inverse(max(c.lo, glo))
                b = br.inverse(min(c.hi, ghi))
                lo_r.append(a)
                hi_r.append(b)
        for (j, ci), (los, his) in chains.items():
            inside = (los >= glo - _COVER_TOL) & (his <= ghi + _COVER_TOL)
            idx = np.nonzero(inside)[0]
            if idx.size == 0:
                continue
            if idx[-1] - idx[0] + 1 != idx.size:
                raise MapConstructionError("non-contiguous level coverage; alignment broken")
            prev_lo = prev_hi = None
            for m0 in idx:
                a = br.inverse(los[m0], x0=prev_lo)
                b = br.inverse(his[m0], x0=prev_hi)
                prev_lo, prev_hi = a, b
                base_r.append(c0.index)
                target_r.append(j)
                level_r.append(int(m0) + 1)
                comp_r.append(ci)
                lo_r.append(min(a, b))
                hi_r.append(max(a, b))
    table = SymbolTable(base_r, target_r, level_r, comp_r, lo_r, hi_r)

    edges, tags = _region_edges(comps, x_regions)
    return InducedScheme(
        map=spec,
        m_max=m_max,
        comps=comps,
        big_images=big_images,
        canonical=canonical,
        x_regions=tuple(x_regions),
        chains=chains,
        residual=residual,
        table=table,
        period_two=period_two,
        _edges=edges,
        _edge_tags=tags,
    )


def _region_edges(comps, x_regions):
    cells = []
    for c in comps:
        cells.append((c.lo, c.hi, ("Y", c.index)))
    for j, (lo, hi) in enumerate(x_regions):
        cells.append((lo, hi, ("X", j)))
    cells.sort()
    edges = np.array([c[0] for c in cells] + [cells[-1][1]])
    tags = tuple(c[2] for c in cells)
    return edges, tags


# ---------------------------------------------------------------------------
# classification and orbit bookkeeping
# ---------------------------------------------------------------------------

def region_of(scheme: InducedScheme, x: float) -> tuple:
    """("Y", comp index), ("X", j), or ("boundary", nearest edge value)."""
    if x < -_EDGE_TOL or x > 1.0 + _EDGE_TOL:
        raise DomainError(f"x={x!r} outside [0,1]")
    edges = scheme._edges
    i = int(np.searchsorted(edges, x, side="right")) - 1
    for k in (i, i + 1):
        if 0 <= k < len(edges) and abs(x - edges[k]) <= _EDGE_TOL:
            return ("boundary", float(edges[k]))
    if i < 0 or i >= len(scheme._edge_tags):
        return ("boundary", float(edges[min(max(i, 0), len(edges) - 1)]))
    return scheme._edge_tags[i]


def in_y(scheme: InducedScheme, x: float) -> bool:
    tag = region_of(scheme, x)
    return tag[0] == "Y"


def hit_time(scheme: InducedScheme, x: float, n_max: int = 1_000_000):
    """First-return data for x in Y: (tau, tau_vec, F(x)).

    Iterates the map honestly; tau_vec[j] counts iterates spent in X_j, so
    1 + sum(tau_vec) == tau on every return.
    """
    tag = region_of(scheme, x)
    if tag[0] != "Y":
        raise DomainError(f"hit_time requires x in Y, got region {tag}")
    spec = scheme.map
    counts = [0] * scheme.d
    y = x
    for n in range(1, n_max + 1):
        y = spec(y)
        tag = region_of(scheme, y)
        if tag[0] == "Y":
            return n, tuple(counts), y
        if tag[0] == "X":
            counts[tag[1]] += 1
        else:
            raise BoundaryError(f"orbit hit a partition boundary at step {n}: {tag[1]!r}")
    raise TruncationError(f"no return within n_max={n_max} steps")


def symbol_of(scheme: InducedScheme, y: float) -> ReturnSymbol:
    """The alphabet letter containing y (consistent with hit_time)."""
    tag = region_of(scheme, y)
    if tag[0] != "Y":
        raise DomainError(f"symbol_of requires y in Y, got region {tag}")
    base = tag[1]
    z = scheme.map(y)
    ztag = region_of(scheme, z)
    if ztag[0] == "Y":
        level, comp = 0, ztag[1]
        j = scheme.comps[comp].branch
    elif ztag[0] == "X":
        j = ztag[1]
        level, comp = _chain_locate(scheme, j, z)
    else:
        raise BoundaryError(f"f(y) lies on a partition boundary: {ztag[1]!r}")
    i = scheme.table.find(base, j, level, comp)
    if i < 0:
        raise LevelTruncationError(
            f"symbol (base={base}, target={j}, level={level}, comp={comp}) not stored"
        )
    return scheme.table.symbol(i)


def _chain_locate(scheme: InducedScheme, j: int, z: float) -> tuple[int, int]:
    """Level and exit component of a point z in X_j."""
    for (jj, ci), (los, his) in scheme.chains.items():
        if jj != j:
            continue
        ascending = los[-1] >= los[0]
        if ascending:
            if z < los[0] - _EDGE_TOL or z > his[-1] + _EDGE_TOL:
                continue
            m = int(np.searchsorted(los, z, side="right")) - 1
        else:
            if z > his[0] + _EDGE_TOL or z < los[-1] - _EDGE_TOL:
                continue
            m = int(np.searchsorted(-np.asarray(his), -z, side="right")) - 1
        for mm in (m, m - 1, m + 1):
            if 0 <= mm < len(los) and los[mm] - _EDGE_TOL <= z <= his[mm] + _EDGE_TOL:
                return mm + 1, ci
    raise LevelTruncationError(f"point {z!r} in X_{j} beyond the stored level table")


def pull_point_through_symbol(scheme: InducedScheme, sym_id: int, y: float):
    """Preimage of y under the symbol's return branch, with the log-derivative sum.

    y must lie in the symbol's exit component.  Returns (x, sum log f' along
    the pullback orbit); exp(-sum) is the local contraction of the cylinder.
    """
    t = scheme.table
    j = int(t.target[sym_id])
    level = int(t.level[sym_id])
    base = int(t.base[sym_id])
    spec = scheme.map
    logd = 0.0
    x = y
    if level > 0:
        brj = spec.branches[j]
        los, his = scheme.chains[(j, int(t.comp[sym_id]))]
        for m in range(level):
            guess = 0.5 * (los[m] + his[m])
            x = brj.inverse(x, x0=guess)
            logd += math.log(brj.deriv(x))
    bri = spec.branches[scheme.comps[base].branch]
    x = bri.inverse(x, x0=0.5 * (t.lo[sym_id] + t.hi[sym_id]))
    logd += math.log(bri.deriv(x))
    return x, logd


# ---------------------------------------------------------------------------
# tail statistics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TailTable:
    m_max: int
    mass: dict           # j -> ndarray, mass[n] = Leb{y in Y : tau^(j)(y) > n}
    untracked: dict      # j -> mass of excursions deeper than m_max (included above)
    alpha_hat: dict
    gamma_hat: dict

    def rows(self):
        for j in sorted(self.mass):
            for n, v in enumerate(self.mass[j]):
                yield j, n, float(v)

    def fit_rows(self):
        for j in sorted(self.alpha_hat):
            yield j, self.alpha_hat[j], self.gamma_hat[j]


def tail_table(scheme: InducedScheme, fit_lo: int | None = None) -> TailTable:
    """Exact per-level excursion masses and the fitted tail exponent per target.

    mass[j][n] sums the cylinder lengths of all symbols with target j and
    level > n, plus the exactly-computed mass of excursions deeper than the
    stored table.  The exponent alpha_hat[j] comes from a log-log least
    squares fit over n in [m_max/100, m_max].
    """
    if scheme.m_max < 100:
        raise InfeasibleError("m_max too small for a tail fit (need >= 100)")
    t = scheme.table
    m_max = scheme.m_max
    spec = scheme.map
    mass, untracked, alpha_hat, gamma_hat = {}, {}, {}, {}
    for j in range(scheme.d):
        per_level = np.zeros(m_max + 1)
        sel = (t.target == j) & (t.level > 0)
        np.add.at(per_level, t.level[sel], (t.hi - t.lo)[sel])
        extra = 0.0
        xi = spec.branches[j].xi
        # chains approaching xi from the same side tile the region jointly, so
        # the untracked gap per side runs from the deepest tracked endpoint
        sides = {}
        for (jj, ci), (los, his) in scheme.chains.items():
            if jj != j:
                continue
            left = 0.5 * (los[-1] + his[-1]) < xi
            deepest = his[-1] if left else los[-1]
            key = "L" if left else "R"
            if key not in sides:
                sides[key] = deepest
            elif left:
                sides[key] = max(sides[key], deepest)
            else:
                sides[key] = min(sides[key], deepest)
        for key, endpoint in sides.items():
            dl, dh = (endpoint, xi) if key == "L" else (xi, endpoint)
            for c0 in scheme.comps:
                br = spec.branches[c0.branch]
                glo, ghi = br(c0.lo), br(c0.hi)
                a, b = max(dl, glo), min(dh, ghi)
                if b - a > _EDGE_TOL:
                    extra += abs(br.inverse(b) - br.inverse(a))
        untracked[j] = extra
        tail = np.cumsum(per_level[::-1])[::-1]
        arr = np.empty(m_max + 1)
        arr[:m_max] = tail[1:] + extra
        arr[m_max] = extra
        mass[j] = arr
        lo = fit_lo if fit_lo is not None else max(1, m_max // 100)
        ns = np.arange(lo, m_max)
        ok = mass[j][ns] > 0
        slope, intercept = np.polyfit(np.log(ns[ok]), np.log(mass[j][ns][ok]), 1)
        alpha_hat[j] = -float(slope)
        gamma_hat[j] = float(math.exp(intercept))
    return TailTable(m_max=m_max, mass=mass, untracked=untracked,
                     alpha_hat=alpha_hat, gamma_hat=gamma_hat)


# ---------------------------------------------------------------------------
# expansion and distortion estimates
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExpansionStats:
    lambda_hat: float    # min sampled |F'| over one induced step
    D_hat: float         # max sampled same-cylinder log-derivative ratio at `depth`
    depth: int
    samples: int
    product_const: float  # multiplicative constant for |ab| vs |a||b| bounds

    @property
    def log_lambda(self) -> float:
        return math.log(self.lambda_hat)


def expansion_stats(scheme: InducedScheme, depth: int = 2, samples: int = 400,
                    seed: int = 0, level_cap: int = 256) -> ExpansionStats:
    if depth < 1:
        raise DomainError("depth must be >= 1")
    t = scheme.table
    rng = np.random.default_rng(seed)

    # one-step expansion: scan low levels fully, stride the deep tail
    lam = math.inf
    rows = np.nonzero(t.level <= level_cap)[0]
    deep = np.nonzero(t.level > level_cap)[0]
    if deep.size:
        rows = np.concatenate([rows, deep[:: max(1, deep.size // 64)]])
    spec = scheme.map
    for i in rows:
        x = 0.5 * (t.lo[i] + t.hi[i])
        dprod = 1.0
        for _ in range(int(t.tau[i])):
            fx, dfx, _b = spec.eval_with_deriv(x)
            dprod *= dfx
            x = fx
        lam = min(lam, dprod)

    # distortion at the requested depth, via stable backward pullbacks
    dhat = 0.0
    n_done = 0
    guard = 0
    while n_done < samples and guard < 20 * samples:
        guard += 1
        word = _random_word(scheme, depth, rng, level_cap)
        if word is None:
            continue
        c = scheme.comps[int(t.comp[word[-1]])]
        q1 = c.lo + (c.hi - c.lo) * rng.uniform(0.05, 0.45)
        q2 = c.lo + (c.hi - c.lo) * rng.uniform(0.55, 0.95)
        s1 = s2 = 0.0
        for sym in reversed(word):
            q1, d1 = pull_point_through_symbol(scheme, sym, q1)
            q2, d2 = pull_point_through_symbol(scheme, sym, q2)
            s1 += d1
            s2 += d2
        dhat = max(dhat, abs(s1 - s2))
        n_done += 1
    if n_done == 0:
        raise InfeasibleError("could not sample admissible words for distortion")
    return ExpansionStats(
        lambda_hat=lam,
        D_hat=dhat,
        depth=depth,
        samples=n_done,
        product_const=math.exp(dhat) / scheme.min_comp_length(),
    )


def _random_word(scheme: InducedScheme, depth: int, rng, level_cap: int):
    t = scheme.table
    base = int(rng.integers(0, len(scheme.comps)))
    word = []
    for _ in range(depth):
        s, e = t.base_slice(base)
        if s == e:
            return None
        cand = np.nonzero(t.level[s:e] <= level_cap)[0]
        if cand.size == 0:
            return None
        i = s + int(cand[rng.integers(0, cand.size)])
        word.append(i)
        base = int(t.comp[i])
    return word
