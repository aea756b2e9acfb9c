"""Exact symbolic calculus on cylinders of the induced return map.

A word is a composable sequence of alphabet letters (image component of each
letter equals the base component of the next).  Return-time data is exact
integer arithmetic; interval enclosures are computed by composed inverse
branches applied to image-interval endpoints, outward-rounded one ulp per
step.  Once an enclosure collapses below float resolution the pullback
switches to a midpoint orbit and tracks the log-length through derivative
sums, which stays accurate because inverse iteration is contracting.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterator, Sequence

import numpy as np

from .errors import AdmissibilityError, DomainError, InfeasibleError
from .inducing import InducedScheme, symbol_of

__all__ = [
    "Cylinder",
    "alphabet",
    "make_word",
    "concat",
    "enumerate_words",
    "locate",
    "ratio",
    "cylinder_csv_rows",
]

_COLLAPSE_WIDTH = 1e-13


@dataclass(frozen=True)
class Cylinder:
    syms: tuple[int, ...]
    n: int
    tau: int
    tau_vec: tuple[int, ...]
    base_comp: int
    image_comp: int
    base_big: int
    image_big: int
    lo: float
    hi: float
    log_len: float

    @property
    def length(self) -> float:
        return math.exp(self.log_len)


def ratio(c: Cylinder) -> tuple[Fraction, ...]:
    """Exact per-coordinate occupation ratio tau_vec / tau."""
    return tuple(Fraction(v, c.tau) for v in c.tau_vec)


# ---------------------------------------------------------------------------
# pullback engine
# ---------------------------------------------------------------------------

class _PullState:
    """Interval being pulled back; degrades to a midpoint + log-width."""

    __slots__ = ("p", "q", "point_mode", "logw")

    def __init__(self, p: float, q: float, logw: float | None = None):
        if logw is not None:
            self.p = self.q = p
            self.point_mode = True
            self.logw = logw
        else:
            self.p, self.q = p, q
            self.point_mode = False
            self.logw = math.log(q - p)

    def collapse_if_needed(self):
        if not self.point_mode and self.q - self.p < _COLLAPSE_WIDTH:
            self.logw = math.log(max(self.q - self.p, 5e-324))
            self.p = self.q = 0.5 * (self.p + self.q)
            self.point_mode = True


def _pull_through_symbol(scheme: InducedScheme, sym_id: int, st: _PullState) -> None:
    t = scheme.table
    j = int(t.target[sym_id])
    level = int(t.level[sym_id])
    spec = scheme.map
    steps = []
    if level > 0:
        brj = spec.branches[j]
        los, his = scheme.chains[(j, int(t.comp[sym_id]))]
        for m in range(level):
            steps.append((brj, 0.5 * (los[m] + his[m])))
    base = int(t.base[sym_id])
    bri = spec.branches[scheme.comps[base].branch]
    steps.append((bri, 0.5 * (t.lo[sym_id] + t.hi[sym_id])))
    for br, guess in steps:
        if st.point_mode:
            x = br.inverse(st.p, x0=guess)
            st.logw -= math.log(br.deriv(x))
            st.p = st.q = x
        else:
            p = br.inverse(st.p, x0=guess)
            q = br.inverse(st.q, x0=guess)
            if q < p:
                p, q = q, p
            st.p = math.nextafter(p, -math.inf)
            st.q = math.nextafter(q, math.inf)
            st.collapse_if_needed()


def _pull_word(scheme: InducedScheme, syms: Sequence[int],
               init: _PullState | None = None) -> _PullState:
    if init is None:
        c = scheme.comps[int(scheme.table.comp[syms[-1]])]
        init = _PullState(c.lo, c.hi)
    for s in reversed(syms):
        _pull_through_symbol(scheme, s, init)
    if not init.point_mode:
        init.logw = math.log(init.q - init.p)
    return init


def _check_admissible(scheme: InducedScheme, syms: Sequence[int]) -> None:
    t = scheme.table
    for a, b in zip(syms, syms[1:]):
        if int(t.comp[a]) != int(t.base[b]):
            raise AdmissibilityError(
                f"symbols {a}->{b}: image component {int(t.comp[a])} != base {int(t.base[b])}"
            )


def make_word(scheme: InducedScheme, syms: Sequence[int]) -> Cylinder:
    """Cylinder of an admissible symbol sequence, with exact return-time data."""
    if not syms:
        raise DomainError("empty word")
    _check_admissible(scheme, syms)
    t = scheme.table
    d = scheme.d
    tau = 0
    vec = [0] * d
    for s in syms:
        tau += int(t.tau[s])
        lv = int(t.level[s])
        if lv > 0:
            vec[int(t.target[s])] += lv
    st = _pull_word(scheme, syms)
    return Cylinder(
        syms=tuple(int(s) for s in syms),
        n=len(syms),
        tau=tau,
        tau_vec=tuple(vec),
        base_comp=int(t.base[syms[0]]),
        image_comp=int(t.comp[syms[-1]]),
        base_big=scheme.big_of_comp(int(t.base[syms[0]])),
        image_big=scheme.big_of_comp(int(t.comp[syms[-1]])),
        lo=st.p,
        hi=st.q,
        log_len=st.logw,
    )


def alphabet(scheme: InducedScheme) -> list[Cylinder]:
    """All length-1 cylinders with level <= m_max, in lexicographic symbol order."""
    t = scheme.table
    out = []
    d = scheme.d
    for i in range(t.n):
        lv = int(t.level[i])
        vec = [0] * d
        if lv > 0:
            vec[int(t.target[i])] = lv
        out.append(Cylinder(
            syms=(i,),
            n=1,
            tau=lv + 1,
            tau_vec=tuple(vec),
            base_comp=int(t.base[i]),
            image_comp=int(t.comp[i]),
            base_big=scheme.big_of_comp(int(t.base[i])),
            image_big=scheme.big_of_comp(int(t.comp[i])),
            lo=float(t.lo[i]),
            hi=float(t.hi[i]),
            log_len=float(t.log_len[i]),
        ))
    return out


def concat(scheme: InducedScheme, a: Cylinder, b: Cylinder) -> Cylinder:
    """Cylinder of the concatenated word; tau data adds exactly, the enclosure
    is b's enclosure pulled back through a's inverse branches."""
    if a.image_comp != b.base_comp:
        raise AdmissibilityError(
            f"image component {a.image_comp} of left factor != base {b.base_comp} of right"
        )
    if b.hi > b.lo:
        st = _PullState(b.lo, b.hi)
    else:
        st = _PullState(b.lo, b.lo, logw=b.log_len)
    st = _pull_word(scheme, a.syms, init=st)
    return Cylinder(
        syms=a.syms + b.syms,
        n=a.n + b.n,
        tau=a.tau + b.tau,
        tau_vec=tuple(x + y for x, y in zip(a.tau_vec, b.tau_vec)),
        base_comp=a.base_comp,
        image_comp=b.image_comp,
        base_big=a.base_big,
        image_big=b.image_big,
        lo=st.p,
        hi=st.q,
        log_len=st.logw,
    )


def enumerate_words(
    scheme: InducedScheme,
    n: int,
    filt: Callable[[tuple[int, ...], int], bool] | None = None,
    cap: int = 10_000_000,
) -> Iterator[Cylinder]:
    """All admissible length-n words in lexicographic order.

    The optional filter sees only (tau_vec, tau) and runs before the enclosure
    is computed.  Unfiltered enumeration refuses to stream more than `cap`
    words.
    """
    if n < 1:
        raise DomainError("word length must be >= 1")
    t = scheme.table
    d = scheme.d
    word = [0] * n
    produced = 0

    def rec(depth: int, base: int | None, tau: int, vec: tuple[int, ...]) -> Iterator[Cylinder]:
        nonlocal produced
        if base is None:
            lo_i, hi_i = 0, t.n
        else:
            lo_i, hi_i = t.base_slice(base)
        for i in range(lo_i, hi_i):
            word[depth] = i
            lv = int(t.level[i])
            tau2 = tau + lv + 1
            if lv > 0:
                j = int(t.target[i])
                vec2 = vec[:j] + (vec[j] + lv,) + vec[j + 1:]
            else:
                vec2 = vec
            if depth == n - 1:
                if filt is not None and not filt(vec2, tau2):
                    continue
                produced += 1
                if filt is None and produced > cap:
                    raise InfeasibleError(
                        f"unfiltered enumeration exceeded cap={cap}; pass a filter"
                    )
                yield make_word(scheme, tuple(word))
            else:
                yield from rec(depth + 1, int(t.comp[i]), tau2, vec2)

    yield from rec(0, None, 0, (0,) * d)


def locate(scheme: InducedScheme, x: float, ell: int) -> Cylinder:
    """The ell-cylinder containing x (first ell returns within the level table)."""
    syms = []
    y = x
    for _ in range(ell):
        s = symbol_of(scheme, y)
        syms.append(s.sym_id)
        for _ in range(s.tau):
            y = scheme.map(y)
    return make_word(scheme, syms)


def batch_words(scheme: InducedScheme, words: Sequence[Sequence[int]]) -> list[Cylinder]:
    """Vectorized make_word for many equal-length words (cubic branches only).

    Runs the same backward pullback as the scalar engine, lane-parallel in
    numpy: interval endpoints until collapse, then midpoint plus log-width.
    Falls back to the scalar path for non-cubic maps.
    """
    if not words:
        return []
    if any(br.kappa != 3.0 for br in scheme.map.branches):
        return [make_word(scheme, w) for w in words]
    t = scheme.table
    ids = np.asarray(words, dtype=np.int64)
    W, n = ids.shape
    d = scheme.d

    chain_rows = {}
    mids_list = []
    for key in sorted(scheme.chains):
        los, his = scheme.chains[key]
        chain_rows[key] = len(mids_list)
        mids_list.append(0.5 * (los + his))
    mids = np.vstack(mids_list) if mids_list else np.zeros((1, scheme.m_max))
    sym_chain = np.full(t.n, 0, dtype=np.int64)
    for key, row in chain_rows.items():
        j, c = key
        sel = (t.target == j) & (t.comp == c) & (t.level > 0)
        sym_chain[sel] = row

    br_c = np.array([br.c for br in scheme.map.branches])
    br_xi = np.array([br.xi for br in scheme.map.branches])
    base_branch = np.array([scheme.comps[int(b)].branch for b in t.base])
    comp_lo = np.array([c.lo for c in scheme.comps])
    comp_hi = np.array([c.hi for c in scheme.comps])
    sym_mid = 0.5 * (t.lo + t.hi)

    def newton(y, c, xi, x):
        for _ in range(8):
            u = x - xi
            x = x - (x + c * u * u * u - y) / (1.0 + 3.0 * c * u * u)
        # polish lanes that have not converged yet
        u = x - xi
        res = np.abs(x + c * u * u * u - y)
        bad = res > 1e-12
        it = 0
        while bad.any() and it < 12:
            u = x[bad] - xi[bad]
            x[bad] = x[bad] - (x[bad] + c[bad] * u * u * u - y[bad]) / (1.0 + 3.0 * c[bad] * u * u)
            u = x[bad] - xi[bad]
            res_b = np.abs(x[bad] + c[bad] * u * u * u - y[bad])
            nb = bad.copy()
            nb[bad] = res_b > 1e-12
            bad = nb
            it += 1
        return x

    last_comp = t.comp[ids[:, -1]]
    p = comp_lo[last_comp].copy()
    q = comp_hi[last_comp].copy()
    collapsed = np.zeros(W, dtype=bool)
    logw = np.zeros(W)

    def elementary(c_arr, xi_arr, guess):
        nonlocal p, q, logw
        p[:] = newton(p, c_arr, xi_arr, guess.copy())
        q[:] = newton(q, c_arr, xi_arr, guess.copy())
        u = p - xi_arr
        dlog = np.log1p(3.0 * c_arr * u * u)
        logw[collapsed] -= dlog[collapsed]
        free = ~collapsed
        if free.any():
            pf, qf = p[free], q[free]
            lo2 = np.minimum(pf, qf)
            hi2 = np.maximum(pf, qf)
            p[free] = np.nextafter(lo2, -np.inf)
            q[free] = np.nextafter(hi2, np.inf)
            width = q[free] - p[free]
            col = width < _COLLAPSE_WIDTH
            if col.any():
                idx = np.nonzero(free)[0][col]
                logw[idx] = np.log(np.maximum(width[col], 5e-324))
                mid = 0.5 * (p[idx] + q[idx])
                p[idx] = mid
                q[idx] = mid
                collapsed[idx] = True

    for tpos in range(n - 1, -1, -1):
        s = ids[:, tpos]
        m = t.level[s]
        max_m = int(m.max()) if len(m) else 0
        tgt_c = br_c[t.target[s]]
        tgt_xi = br_xi[t.target[s]]
        rows = sym_chain[s]
        for k in range(1, max_m + 1):
            act = m >= k
            if not act.any():
                break
            guess = np.where(act, mids[rows, k - 1], p)
            if act.all():
                elementary(tgt_c, tgt_xi, guess)
            else:
                _elementary_masked(p, q, logw, collapsed, act, tgt_c, tgt_xi, guess, newton)
        bc = br_c[base_branch[s]]
        bxi = br_xi[base_branch[s]]
        elementary(bc, bxi, sym_mid[s].copy())

    log_len = np.where(collapsed, logw, np.log(np.maximum(q - p, 5e-324)))
    taus = t.tau[ids].sum(axis=1)
    vecs = np.zeros((W, d), dtype=np.int64)
    lev = t.level[ids]
    tg = t.target[ids]
    for j in range(d):
        vecs[:, j] = np.where((tg == j) & (lev > 0), lev, 0).sum(axis=1)
    out = []
    first = ids[:, 0]
    for w in range(W):
        out.append(Cylinder(
            syms=tuple(int(x) for x in ids[w]),
            n=n,
            tau=int(taus[w]),
            tau_vec=tuple(int(v) for v in vecs[w]),
            base_comp=int(t.base[first[w]]),
            image_comp=int(last_comp[w]),
            base_big=scheme.big_of_comp(int(t.base[first[w]])),
            image_big=scheme.big_of_comp(int(last_comp[w])),
            lo=float(p[w]),
            hi=float(q[w]),
            log_len=float(log_len[w]),
        ))
    return out


def _elementary_masked(p, q, logw, collapsed, act, c_arr, xi_arr, guess, newton):
    """Apply one inverse step only on active lanes."""
    idx = np.nonzero(act)[0]
    pa = newton(p[idx], c_arr[idx], xi_arr[idx], guess[idx].copy())
    qa = newton(q[idx], c_arr[idx], xi_arr[idx], guess[idx].copy())
    u = pa - xi_arr[idx]
    dlog = np.log1p(3.0 * c_arr[idx] * u * u)
    cola = collapsed[idx]
    logw[idx[cola]] -= dlog[cola]
    lo2 = np.minimum(pa, qa)
    hi2 = np.maximum(pa, qa)
    freea = ~cola
    fi = idx[freea]
    p[fi] = np.nextafter(lo2[freea], -np.inf)
    q[fi] = np.nextafter(hi2[freea], np.inf)
    width = q[fi] - p[fi]
    col = width < _COLLAPSE_WIDTH
    if col.any():
        ci = fi[col]
        logw[ci] = np.log(np.maximum(width[col], 5e-324))
        mid = 0.5 * (p[ci] + q[ci])
        p[ci] = mid
        q[ci] = mid
        collapsed[ci] = True
    p[idx[cola]] = pa[cola]
    q[idx[cola]] = pa[cola]


def cylinder_csv_rows(cyls: Sequence[Cylinder]) -> Iterator[dict]:
    for c in cyls:
        yield {
            "word": " ".join(str(s) for s in c.syms),
            "lo": c.lo,
            "hi": c.hi,
            "tau_n": c.tau,
            "tau_vec": " ".join(str(v) for v in c.tau_vec),
            "base": c.base_big,
            "image": c.image_big,
        }
