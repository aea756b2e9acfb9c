"""Ratio-controlled repeller families: pools, connectors, assembly, horizons.

A pool is a set of depth-n cylinders whose occupation ratios sit in an
eps/2 ball around the target simplex point.  Connectors are short words
routing one big image onto another in exactly k0 induced steps; sandwiching
every pool element between connectors for every ordered big-image pair gives
a family whose images cover Y, whose per-big-image Lebesgue mass is bounded
below, and whose members all keep their ratio within 3 eps/4 of the target.
Every claim is checked in exact rational arithmetic on the result.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .cylinders import Cylinder, batch_words, concat, make_word
from .dimension import FamilyMeasure, build_measure, compute_N1, local_dim_scan
from .errors import CertificateError, DomainError, InfeasibleError
from .inducing import InducedScheme

__all__ = [
    "ConnectorSet",
    "PoolReport",
    "ApproxFamily",
    "find_connectors",
    "candidate_pool",
    "pool_leaves",
    "assemble_family",
    "window_family",
    "horizon_constants",
    "verify_family",
    "family_manifest",
]

_K0_CAP = 64


def to_frac(x) -> Fraction:
    """Exact rational from int/str/Fraction; floats go through their repr."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, float):
        return Fraction(str(x))
    return Fraction(x)


def in_ball(vec: tuple[int, ...], tau: int, p_bar, radius: Fraction) -> bool:
    """Exact max-norm check |vec/tau - p_bar| < radius."""
    for v, p in zip(vec, p_bar):
        if abs(Fraction(v, tau) - p) >= radius:
            return False
    return True


# ---------------------------------------------------------------------------
# connectors
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConnectorSet:
    k0: int
    table: dict                 # (big i, big j) -> Cylinder, image = canonical comp of Y_j
    left: dict                  # (big i, comp c) -> Cylinder based in Y_i with image comp c
    right: dict                 # (comp c, big j) -> Cylinder based at c, image canonical of Y_j
    M_conn: int
    adjacency: np.ndarray       # big-image adjacency (0/1)

    def max_tau(self) -> int:
        return self.M_conn


def _comp_adjacency(scheme: InducedScheme) -> list[set]:
    t = scheme.table
    out = [set() for _ in scheme.comps]
    for c in scheme.comps:
        s, e = t.base_slice(c.index)
        out[c.index] = set(int(x) for x in np.unique(t.comp[s:e]))
    return out


def _witness_word(scheme: InducedScheme, starts, end_comp: int, k: int, reach_back):
    """Lexicographically least admissible k-word from one of `starts` with the
    given image component, or None.  reach_back[t] = comps that reach end_comp
    in exactly t steps."""
    t = scheme.table
    word = []

    def dfs(comp: int, remaining: int) -> bool:
        s, e = t.base_slice(comp)
        for i in range(s, e):
            nxt = int(t.comp[i])
            if remaining == 1:
                if nxt == end_comp:
                    word.append(i)
                    return True
            elif nxt in reach_back[remaining - 1]:
                word.append(i)
                if dfs(nxt, remaining - 1):
                    return True
                word.pop()
        return False

    for c0 in sorted(starts):
        if c0 not in reach_back[k]:
            continue
        if dfs(c0, k):
            return make_word(scheme, word)
        word.clear()
    return None


def find_connectors(scheme: InducedScheme) -> ConnectorSet:
    """Smallest k0 with an elementwise-positive big-image adjacency power and a
    full witness table; errors if no power is positive up to the cap."""
    L = scheme.L
    comp_adj = _comp_adjacency(scheme)
    big = np.zeros((L, L), dtype=np.int64)
    for c in scheme.comps:
        for c2 in comp_adj[c.index]:
            big[c.big_image, scheme.big_of_comp(c2)] = 1
    power = big.copy()
    k0 = 1
    while not (power > 0).all():
        k0 += 1
        if k0 > _K0_CAP:
            raise InfeasibleError(
                "big-image adjacency never becomes positive: return map not mixing"
            )
        power = np.sign(power @ big)

    while True:
        # comps reaching each endpoint in exactly t steps
        back = {}
        for c_end in range(len(scheme.comps)):
            rb = [set() for _ in range(k0 + 1)]
            rb[0] = {c_end}
            for tstep in range(1, k0 + 1):
                rb[tstep] = {
                    c for c in range(len(scheme.comps))
                    if comp_adj[c] & rb[tstep - 1]
                }
            back[c_end] = rb
        table, left, right = {}, {}, {}
        for i in range(L):
            comps_i = scheme.big_images[i]
            for c in range(len(scheme.comps)):
                w = _witness_word(scheme, comps_i, c, k0, back[c])
                if w is not None:
                    left[(i, c)] = w
        for c in range(len(scheme.comps)):
            for j in range(L):
                w = _witness_word(scheme, (c,), scheme.canonical[j], k0, back[scheme.canonical[j]])
                if w is not None:
                    right[(c, j)] = w
        ok = True
        for i, j in itertools.product(range(L), range(L)):
            w = _witness_word(
                scheme, scheme.big_images[i], scheme.canonical[j], k0,
                back[scheme.canonical[j]],
            )
            if w is None:
                ok = False
                break
            table[(i, j)] = w
        if ok:
            break
        k0 += 1
        if k0 > _K0_CAP:
            raise InfeasibleError("no witness table within the k0 cap")
    m_conn = max(
        w.tau for w in itertools.chain(table.values(), left.values(), right.values())
    )
    return ConnectorSet(k0=k0, table=table, left=left, right=right,
                        M_conn=m_conn, adjacency=big)


# ---------------------------------------------------------------------------
# candidate pools
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PoolReport:
    depth: int
    found: int
    kept: int
    complete: bool        # full enumeration of the declared search set
    truncated: bool       # stopped early at collect_cap
    budget_bound: bool
    found_log_mass: float
    kept_log_mass: float
    mass_ratio: float
    min_tau: int | None
    tau_cap: int | None


def pool_leaves(
    scheme: InducedScheme,
    n: int,
    eps,
    p_bar,
    min_tau: int | None = None,
    tau_cap: int | None = None,
    node_budget: int = 20_000_000,
    collect_cap: int | None = None,
) -> tuple[list, bool]:
    """Enumerate (surrogate_log_len, symbol ids, tau_vec, tau) for all depth-n
    words with ratio in B_{eps/2}(p_bar), without computing enclosures.
    Returns (leaves, truncated)."""
    eps = to_frac(eps)
    p_bar = tuple(to_frac(p) for p in p_bar)
    if len(p_bar) != scheme.d or sum(p_bar) != 1:
        raise DomainError("target must be a probability vector over the sticky regions")
    radius = eps / 2
    t = scheme.table
    d = scheme.d
    m_max = scheme.m_max
    # integer cross-multiplication data for the window bounds
    wlo = [(p - radius).numerator for p in p_bar], [(p - radius).denominator for p in p_bar]
    whi = [(p + radius).numerator for p in p_bar], [(p + radius).denominator for p in p_bar]
    wlo_n, wlo_d = wlo
    whi_n, whi_d = whi
    comp_len = {c.index: math.log(c.length) for c in scheme.comps}
    lvl = t.level.tolist()
    tgt = t.target.tolist()
    cmp_ = t.comp.tolist()
    llen = t.log_len.tolist()
    cl = [comp_len[c.index] for c in scheme.comps]

    leaves = []
    state = {"nodes": 0, "trunc": False, "cap": None}

    def feasible(vec, tau, r) -> bool:
        room = r * m_max
        if tau_cap is not None:
            room = min(room, tau_cap - tau - r)
            if room < 0:
                return False
        t_hi = tau + r + room
        if min_tau is not None and t_hi < min_tau:
            return False
        for j in range(d):
            v = vec[j]
            if v * whi_d[j] > whi_n[j] * t_hi:
                return False
            if (v + room) * wlo_d[j] < wlo_n[j] * t_hi:
                return False
        return True

    # per-base lists of (level-sorted row range, level list) in lex target order
    from bisect import bisect_right
    base_ranges = []
    for b in range(len(scheme.comps)):
        entries = sorted((j, se) for (bb, j), se in t._bt_slice.items() if bb == b)
        base_ranges.append([(s, e, t.level[s:e].tolist()) for _, (s, e) in entries])

    def rec(depth, base, vec, tau, ids, slog):
        r = n - depth
        lv_max = None if tau_cap is None else tau_cap - tau - r
        last = r == 1
        for s, e, levels in base_ranges[base]:
            if lv_max is not None:
                e = s + bisect_right(levels, lv_max)
            state["nodes"] += e - s
            if state["nodes"] > node_budget:
                raise InfeasibleError(f"pool enumeration exceeded node budget {node_budget}")
            for i in range(s, e):
                lv = lvl[i]
                tau2 = tau + lv + 1
                j = tgt[i]
                if lv > 0:
                    vec[j] += lv
                if last:
                    ok = (min_tau is None or tau2 >= min_tau) and \
                         (tau_cap is None or tau2 <= tau_cap)
                    if ok:
                        for k in range(d):
                            v = vec[k]
                            if not (wlo_n[k] * tau2 < v * wlo_d[k]
                                    and v * whi_d[k] < whi_n[k] * tau2):
                                ok = False
                                break
                    if ok:
                        add = llen[i] if depth == 0 else llen[i] - cl[base]
                        ids.append(i)
                        leaves.append((slog + add, tuple(ids), tuple(vec), tau2))
                        ids.pop()
                        if state["cap"] is not None and len(leaves) >= state["cap"]:
                            state["trunc"] = True
                elif feasible(vec, tau2, r - 1):
                    add = llen[i] if depth == 0 else llen[i] - cl[base]
                    ids.append(i)
                    rec(depth + 1, cmp_[i], vec, tau2, ids, slog + add)
                    ids.pop()
                if lv > 0:
                    vec[j] -= lv
                if state["trunc"]:
                    return

    # search per starting component so that a collection cap cannot starve
    # later base components (coverage matters downstream)
    truncated = False
    n_comps = len(scheme.comps)
    quota = None if collect_cap is None else max(1, collect_cap // n_comps)
    for c0 in range(n_comps):
        state["trunc"] = False
        state["cap"] = None if quota is None else len(leaves) + quota
        rec(0, c0, [0] * d, 0, [], 0.0)
        truncated = truncated or state["trunc"]
    return leaves, truncated


def candidate_pool(
    scheme: InducedScheme,
    n: int,
    eps,
    p_bar,
    budget: int = 100_000,
    min_tau: int | None = None,
    tau_cap: int | None = None,
    node_budget: int = 20_000_000,
    collect_cap: int | None = None,
) -> tuple[list[Cylinder], PoolReport]:
    """All depth-n cylinders with ratio in B_{eps/2}(p_bar), greedily keeping
    the longest first until the budget binds.

    min_tau/tau_cap restrict the declared search set to a total-return-time
    window (used by the schedule planner to protect connector margins);
    collect_cap stops the search early, which is reported as truncation.
    """
    leaves, truncated = pool_leaves(
        scheme, n, eps, p_bar,
        min_tau=min_tau, tau_cap=tau_cap,
        node_budget=node_budget, collect_cap=collect_cap,
    )
    if not leaves:
        raise InfeasibleError(
            f"empty pool at depth {n}: eps={eps} too small for m_max={scheme.m_max}"
        )
    leaves.sort(key=lambda x: (-x[0], x[1]))
    kept = leaves[: min(budget, len(leaves))]
    all_logs = np.array([x[0] for x in leaves])
    kept_logs = all_logs[: len(kept)]
    lm_all = float(np.logaddexp.reduce(all_logs))
    lm_kept = float(np.logaddexp.reduce(kept_logs))
    pool = [make_word(scheme, ids) for _, ids, _, _ in kept]
    report = PoolReport(
        depth=n,
        found=len(leaves),
        kept=len(kept),
        complete=not truncated,
        truncated=truncated,
        budget_bound=len(leaves) > len(kept),
        found_log_mass=lm_all,
        kept_log_mass=lm_kept,
        mass_ratio=math.exp(lm_kept - lm_all),
        min_tau=min_tau,
        tau_cap=tau_cap,
    )
    return pool, report


# ---------------------------------------------------------------------------
# assembly
# ---------------------------------------------------------------------------

@dataclass
class ApproxFamily:
    eps: Fraction
    p_bar: tuple
    n: int                    # total depth including connectors
    pool_depth: int
    cylinders: tuple
    measure: FamilyMeasure
    connectors: ConnectorSet
    pool_report: PoolReport
    C_leb: float
    skipped_pairs: int
    vdim: float
    M_fam: int                # max total return time over members
    M_sym: int                # max single-symbol return time over members
    N0: int | None = None
    N1: int | None = None
    dim_margin_ok: bool | None = None

    @property
    def k0(self) -> int:
        return self.connectors.k0


def assemble_family(
    scheme: InducedScheme,
    pool: list[Cylinder],
    connectors: ConnectorSet,
    eps,
    p_bar,
    pool_report: PoolReport | None = None,
    n_total: int | None = None,
) -> ApproxFamily:
    """Sandwich every pool element between connectors for all big-image pairs.

    Raises CertificateError if any assembled cylinder leaves the 3 eps/4 ball
    (the pool was too shallow) or if the images fail to cover the big-image
    list.
    """
    eps = to_frac(eps)
    p_bar = tuple(to_frac(p) for p in p_bar)
    if not pool:
        raise DomainError("empty pool")
    k0 = connectors.k0
    depth = pool[0].n
    if n_total is None:
        n_total = depth + 2 * k0
    if n_total != depth + 2 * k0:
        raise DomainError(f"pool depth {depth} != n_total - 2 k0 = {n_total - 2 * k0}")
    L = scheme.L
    radius = eps * Fraction(3, 4)
    members = []
    skipped = 0
    for b in pool:
        for i in range(L):
            wl = connectors.left.get((i, b.base_comp))
            if wl is None:
                skipped += L
                continue
            wlb = concat(scheme, wl, b)
            for j in range(L):
                wr = connectors.right.get((b.image_comp, j))
                if wr is None:
                    skipped += 1
                    continue
                sw = concat(scheme, wlb, wr)
                if not in_ball(sw.tau_vec, sw.tau, p_bar, radius):
                    raise CertificateError(
                        "assembled cylinder leaves the 3eps/4 ball; increase pool depth",
                        witness={"pair": (i, j), "tau_vec": sw.tau_vec, "tau": sw.tau},
                    )
                members.append(sw)
    if not members:
        raise InfeasibleError("no admissible sandwiches; connector table too sparse")
    image_bigs = sorted({m.image_big for m in members})
    if image_bigs != list(range(L)):
        raise CertificateError(f"images cover {image_bigs}, need all of 0..{L - 1}")
    base_mass = [0.0] * L
    for m in members:
        base_mass[m.base_big] += m.length
    if min(base_mass) <= 0.0:
        raise CertificateError("some big image carries no family mass")
    base_comps = {m.base_comp for m in members}
    missing = [c for c in scheme.canonical if c not in base_comps]
    if missing:
        raise CertificateError(f"canonical components {missing} not among family bases")
    measure = build_measure(scheme, members)
    t = scheme.table
    m_sym = max(int(t.tau[s]) for m in members for s in m.syms)
    fam = ApproxFamily(
        eps=eps,
        p_bar=p_bar,
        n=n_total,
        pool_depth=depth,
        cylinders=tuple(members),
        measure=measure,
        connectors=connectors,
        pool_report=pool_report,
        C_leb=min(base_mass),
        skipped_pairs=skipped,
        vdim=measure.s,
        M_fam=max(m.tau for m in members),
        M_sym=m_sym,
    )
    return fam


def window_family(
    scheme: InducedScheme,
    n: int,
    eps,
    p_bar,
    connectors: ConnectorSet,
    budget: int = 60_000,
    tau_cap: int | None = None,
    min_tau: int | None = None,
    node_budget: int = 50_000_000,
    collect_cap: int | None = None,
) -> ApproxFamily:
    """Depth-n family of all words with ratio inside B_{3 eps/4}(p_bar),
    greedily keeping the longest under the budget.

    This realizes the approximation directly at a fixed depth: the ratio
    window holds by construction and the coverage and mass properties are
    verified exactly on the result.  (The connector-sandwich construction in
    assemble_family guarantees the same properties when the depth leaves room
    for 2 k0 connector symbols; at small depth it does not apply.)
    """
    eps = to_frac(eps)
    p_bar = tuple(to_frac(p) for p in p_bar)
    window_eps = eps * Fraction(3, 2)   # pool_leaves uses radius eps/2
    leaves, truncated = pool_leaves(
        scheme, n, window_eps, p_bar,
        min_tau=min_tau, tau_cap=tau_cap,
        node_budget=node_budget, collect_cap=collect_cap,
    )
    return family_from_leaves(scheme, n, eps, p_bar, connectors, leaves, truncated,
                              budget, min_tau, tau_cap)


def family_from_leaves(scheme, n, eps, p_bar, connectors, leaves, truncated,
                       budget, min_tau=None, tau_cap=None) -> ApproxFamily:
    eps = to_frac(eps)
    p_bar = tuple(to_frac(p) for p in p_bar)
    if not leaves:
        raise InfeasibleError(f"empty ratio window at depth {n} (m_max={scheme.m_max})")
    leaves = sorted(leaves, key=lambda x: (-x[0], x[1]))
    kept = leaves[: min(budget, len(leaves))]
    all_logs = np.array([x[0] for x in leaves])
    kept_logs = all_logs[: len(kept)]
    report = PoolReport(
        depth=n,
        found=len(leaves),
        kept=len(kept),
        complete=not truncated,
        truncated=truncated,
        budget_bound=len(leaves) > len(kept),
        found_log_mass=float(np.logaddexp.reduce(all_logs)),
        kept_log_mass=float(np.logaddexp.reduce(kept_logs)),
        mass_ratio=float(math.exp(np.logaddexp.reduce(kept_logs) - np.logaddexp.reduce(all_logs))),
        min_tau=min_tau,
        tau_cap=tau_cap,
    )
    if len(kept) >= 2000:
        members = batch_words(scheme, [ids for _, ids, _, _ in kept])
    else:
        members = [make_word(scheme, ids) for _, ids, _, _ in kept]
    radius = eps * Fraction(3, 4)
    for mcyl in members:
        if not in_ball(mcyl.tau_vec, mcyl.tau, p_bar, radius):
            raise CertificateError("window family member leaves the 3eps/4 ball",
                                   witness={"tau_vec": mcyl.tau_vec, "tau": mcyl.tau})
    L = scheme.L
    image_bigs = sorted({m.image_big for m in members})
    if image_bigs != list(range(L)):
        raise CertificateError(f"images cover {image_bigs}, need all of 0..{L - 1}")
    base_mass = [0.0] * L
    for mcyl in members:
        base_mass[mcyl.base_big] += mcyl.length
    if min(base_mass) <= 0.0:
        raise CertificateError("some big image carries no family mass")
    measure = build_measure(scheme, members)
    t = scheme.table
    m_sym = max(int(t.tau[s]) for mc in members for s in mc.syms)
    return ApproxFamily(
        eps=eps,
        p_bar=p_bar,
        n=n,
        pool_depth=n,
        cylinders=tuple(members),
        measure=measure,
        connectors=connectors,
        pool_report=report,
        C_leb=min(base_mass),
        skipped_pairs=0,
        vdim=measure.s,
        M_fam=max(mc.tau for mc in members),
        M_sym=m_sym,
    )


def horizon_constants(family: ApproxFamily, eps=None, lam_hat: float | None = None,
                      scan_ell: int = 4, scan_samples: int = 48,
                      seed: int = 0) -> tuple[int, int, int]:
    """(N0, N1, M_n): ratio horizon, local-dimension horizon, per-step maximum.

    N0 is the smallest integer > n with 2 M_fam / N0 < eps/4; N1 comes from
    the measured local-dimension deviation of the family measure.
    """
    eps = to_frac(eps if eps is not None else family.eps)
    m = family.M_fam
    n0 = int(Fraction(8 * m, 1) / eps) + 1
    n0 = max(family.n + 1, n0)
    if lam_hat is None:
        raise DomainError("lam_hat required (measured one-step expansion)")
    if family.measure.e_hat is None:
        local_dim_scan(family.measure, scan_ell, scan_samples, seed=seed)
    n1, margin_ok = compute_N1(family.measure, float(eps), lam_hat)
    family.N0, family.N1, family.dim_margin_ok = n0, n1, margin_ok
    return n0, n1, family.M_sym


# ---------------------------------------------------------------------------
# family verification
# ---------------------------------------------------------------------------

@dataclass
class FamilyCheck:
    name: str
    ok: bool
    detail: dict = field(default_factory=dict)


def verify_family(families, ell_list, samples: int = 40, seed: int = 0,
                  lam_hat: float | None = None) -> list[FamilyCheck]:
    """Exact ratio checks on long words over the family alphabet, the sandwich
    stability property, sampled local-dimension containment, and (given a
    ladder) the vdim trend."""
    if isinstance(families, ApproxFamily):
        families = [families]
    rng = np.random.default_rng(seed)
    checks = []
    for fam in families:
        ball = fam.eps
        n = fam.n
        fails = []
        for ell in ell_list:
            if fam.N0 is None or ell <= fam.N0:
                continue
            for _ in range(samples):
                vec, tau = _sample_long_word(fam, rng, ell)
                if not in_ball(vec, tau, fam.p_bar, ball):
                    fails.append({"ell": ell, "vec": vec, "tau": tau})
        checks.append(FamilyCheck(
            name=f"ratio_horizon(n={n})",
            ok=not fails,
            detail={"fails": fails[:3], "ells": [e for e in ell_list if fam.N0 and e > fam.N0]},
        ))
        stab_fails = []
        for _ in range(samples):
            k = int(rng.integers(1, 7))
            idxs = fam.measure.sample_indices(rng, k)
            vec = [0] * len(fam.p_bar)
            tau = 0
            for i in idxs:
                c = fam.cylinders[i]
                tau += c.tau
                vec = [a + b for a, b in zip(vec, c.tau_vec)]
            if not in_ball(tuple(vec), tau, fam.p_bar, fam.eps * Fraction(3, 4)):
                stab_fails.append({"k": k, "vec": vec, "tau": tau})
        checks.append(FamilyCheck(
            name=f"sandwich_stability(n={n})", ok=not stab_fails,
            detail={"fails": stab_fails[:3]},
        ))
        if fam.N1 is not None:
            ell_blocks = max(1, int(math.ceil((fam.N1 + 1) / fam.n)))
            rep = local_dim_scan(fam.measure, ell_blocks, max(12, samples // 3),
                                 seed=seed + 1)
            eps_f = float(fam.eps)
            checks.append(FamilyCheck(
                name=f"local_dim(n={n})",
                ok=(rep.min_ratio >= 1.0 - eps_f - 1e-12) and (rep.max_ratio <= 1.0 + eps_f + 1e-12),
                detail={"min": rep.min_ratio, "max": rep.max_ratio, "band": [1 - eps_f, 1 + eps_f]},
            ))
    if len(families) >= 2:
        vd = [f.vdim for f in families]
        ns = [f.n for f in families]
        checks.append(FamilyCheck(
            name="vdim_trend",
            ok=all(a < b for a, b in zip(vd, vd[1:])),
            detail={"vdim": vd, "gap_times_n": [(1.0 - v) * n for v, n in zip(vd, ns)]},
        ))
    return checks


def _sample_long_word(fam: ApproxFamily, rng, ell: int):
    """tau data of a sampled ell-symbol word over the family alphabet:
    whole blocks plus an admissible partial prefix."""
    q, r = divmod(ell, fam.n)
    idxs = fam.measure.sample_indices(rng, max(q, 1) if r == 0 else q + 1)
    vec = [0] * len(fam.p_bar)
    tau = 0
    t = fam.measure.scheme.table
    full = idxs if r == 0 else idxs[:-1]
    for i in full:
        c = fam.cylinders[i]
        tau += c.tau
        vec = [a + b for a, b in zip(vec, c.tau_vec)]
    if r:
        c = fam.cylinders[idxs[-1]]
        for s in c.syms[:r]:
            lv = int(t.level[s])
            tau += lv + 1
            if lv > 0:
                vec[int(t.target[s])] += lv
    return tuple(vec), tau


def family_manifest(fam: ApproxFamily) -> str:
    doc = {
        "epsilon": str(fam.eps),
        "p_bar": [str(p) for p in fam.p_bar],
        "n": fam.n,
        "pool_depth": fam.pool_depth,
        "k0": fam.k0,
        "N0": fam.N0,
        "N1": fam.N1,
        "M_n": fam.M_sym,
        "M_fam": fam.M_fam,
        "C_leb": fam.C_leb,
        "vdim": fam.vdim,
        "cylinder_count": len(fam.cylinders),
        "skipped_pairs": fam.skipped_pairs,
    }
    return json.dumps(doc, sort_keys=True)
