"""Bridging schedules and explicit generic points.

A schedule is a ladder of levels (eps_i, p_i, family_i, k_i): the point dwells
k_i blocks in the depth-n_i family of level i, then moves on.  The dwell
counts are chosen so that seven inequality certificates hold; they grow fast
(10^9 and beyond), so itineraries are stored run-length compressed: the block
choice policy is eventually periodic, and every exact check over the 10^12+
intermediate times reduces to the head, the first and last cycle repetition,
and the tail, because each coordinate of the occupation ratio is monotone in
the repetition count (it has the form (a + r b)/(c + r d)).

All ratio certificates are exact integer/rational arithmetic.  Log-measures
come from the level measures in closed form over cycles; log-lengths come
from backward pullbacks whose per-cycle decrement converges geometrically and
is extrapolated once stable, with the residual monitored.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .approximation import (
    ApproxFamily,
    ConnectorSet,
    family_from_leaves,
    find_connectors,
    horizon_constants,
    pool_leaves,
    to_frac,
)
from .cylinders import make_word
from .dimension import local_dim_scan
from .errors import (
    AdmissibilityError,
    CertificateError,
    DomainError,
    InfeasibleError,
)
from .inducing import InducedScheme, expansion_stats

__all__ = [
    "TargetSpec",
    "Certificate",
    "LevelPlan",
    "BridgeSchedule",
    "GenericPoint",
    "plan_schedule",
    "generate_point",
    "bridge_measure",
    "verify_generic",
    "local_dim_profile",
    "replay_check",
]

_K_CAP = 10 ** 60


# ---------------------------------------------------------------------------
# targets and ladders
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TargetSpec:
    kind: str                      # "point" or "polyline"
    points: tuple                  # tuples of Fractions on the simplex

    def __post_init__(self):
        if self.kind not in ("point", "polyline"):
            raise DomainError(f"unknown target kind {self.kind!r}")
        if not self.points:
            raise DomainError("target needs at least one vertex")
        for p in self.points:
            if sum(p) != 1 or any(x < 0 for x in p):
                raise DomainError(f"vertex {p} not on the simplex")

    @staticmethod
    def point(p) -> "TargetSpec":
        return TargetSpec("point", (tuple(to_frac(x) for x in p),))

    @staticmethod
    def polyline(vertices) -> "TargetSpec":
        return TargetSpec("polyline", tuple(tuple(to_frac(x) for x in v) for v in vertices))


def _interp(a, b, t: Fraction):
    return tuple(x + (y - x) * t for x, y in zip(a, b))


def _polyline_ladder(target: TargetSpec, depth: int, eps0: Fraction):
    """(eps_i, p_i) ladder: back-and-forth sweeps including every vertex, step
    halving per sweep, eps halving per sweep with a strictly decreasing
    rational taper inside each sweep."""
    verts = list(target.points)
    if len(verts) == 1:
        return [(eps0 / 2 ** i, verts[0]) for i in range(depth)]
    edges = list(zip(verts, verts[1:]))
    ladder = []
    s = 0
    forward = True
    while len(ladder) < depth:
        step = Fraction(1, 2 ** s)
        pts = []
        for (a, b) in edges:
            k = 0
            while Fraction(k) * step < 1:
                pts.append(_interp(a, b, Fraction(k) * step))
                k += 1
        pts.append(verts[-1])
        if not forward:
            pts = pts[::-1]
        L = len(pts)
        for pos, p in enumerate(pts):
            eps_i = eps0 * Fraction(1, 2 ** s) * Fraction(2 * L - pos, 2 * L)
            ladder.append((eps_i, p))
            if len(ladder) >= depth:
                break
        s += 1
        forward = not forward
    return ladder


@dataclass
class Certificate:
    name: str
    lhs: str
    rhs: str
    passed: bool | None
    note: str = ""

    def as_dict(self):
        return {"name": self.name, "lhs": self.lhs, "rhs": self.rhs,
                "passed": self.passed, "note": self.note}


@dataclass
class LevelPlan:
    index: int
    eps: Fraction
    p_bar: tuple
    family: ApproxFamily
    n: int
    N: int
    k: int = 0
    t: int = 0
    M_sym: int = 0
    C_tilde: float = 0.0
    w_max: float = 0.0
    w_min: float = 0.0
    s_bar: float = 0.0
    len_max: float = 0.0
    len_min: float = 0.0
    g_stat: float = 0.0
    certs: list = field(default_factory=list)


@dataclass
class BridgeSchedule:
    target: TargetSpec
    levels: list
    lam_hat: float
    d_hat: float
    prod_const: float
    scheme: InducedScheme
    connectors: ConnectorSet
    eps0: Fraction
    seed: int

    @property
    def depth(self) -> int:
        return len(self.levels)

    def t_final(self) -> int:
        last = self.levels[-1]
        return last.t + last.n * last.k

    def to_json(self) -> str:
        doc = {
            "target": {"kind": self.target.kind,
                       "points": [[str(x) for x in p] for p in self.target.points]},
            "eps0": str(self.eps0),
            "seed": self.seed,
            "lam_hat": _f(self.lam_hat),
            "d_hat": _f(self.d_hat),
            "prod_const": _f(self.prod_const),
            "m_max": self.scheme.m_max,
            "map": self.scheme.map.to_dict(),
            "levels": [
                {
                    "index": lv.index,
                    "eps": str(lv.eps),
                    "p_bar": [str(x) for x in lv.p_bar],
                    "n": lv.n,
                    "k": lv.k,
                    "t": lv.t,
                    "N": lv.N,
                    "N0": lv.family.N0,
                    "N1": lv.family.N1,
                    "M_sym": lv.M_sym,
                    "M_fam": lv.family.M_fam,
                    "C_tilde": _f(lv.C_tilde),
                    "vdim": _f(lv.family.vdim),
                    "C_leb": _f(lv.family.C_leb),
                    "g_stat": _f(lv.g_stat),
                    "family_size": len(lv.family.cylinders),
                    "certs": [c.as_dict() for c in lv.certs],
                }
                for lv in self.levels
            ],
        }
        return json.dumps(doc, sort_keys=True)


def _f(x) -> float:
    return float(f"{float(x):.17g}")


# ---------------------------------------------------------------------------
# planning
# ---------------------------------------------------------------------------

def plan_schedule(
    scheme: InducedScheme,
    target: TargetSpec,
    depth: int,
    eps0,
    seed: int = 0,
    family_budget: int = 40_000,
    collect_cap: int = 200_000,
    gamma_ladder: bool | None = None,
    gamma_margin: float = 0.05,
    scan_samples: int = 36,
    eps_ratio=Fraction(3, 5),
) -> BridgeSchedule:
    """Build families for the (eps_i, p_i) ladder, then choose minimal dwell
    counts k_i so that all stored inequality certificates hold.

    The point-target ladder is eps_i = eps0 * eps_ratio^i (strictly
    decreasing to zero; the default ratio 3/5 keeps the attainable level
    dimensions inside the local-dimension bands at truncated resolution).
    For single-point targets the level families are additionally tuned so
    that the local-dimension readings along the generated point increase
    from level to level (the gamma ladder)."""
    eps0 = to_frac(eps0)
    eps_ratio = to_frac(eps_ratio)
    if not (0 < eps0 < 1):
        raise DomainError("eps0 must lie in (0,1)")
    if not (0 < eps_ratio < 1):
        raise DomainError("eps_ratio must lie in (0,1)")
    if depth < 2:
        raise DomainError("need at least two levels")
    if target.kind == "point":
        ladder = [(eps0 * eps_ratio ** i, target.points[0]) for i in range(depth)]
    else:
        ladder = _polyline_ladder(target, depth, eps0)
    if gamma_ladder is None:
        gamma_ladder = target.kind == "point"
    connectors = find_connectors(scheme)
    stats = expansion_stats(scheme, depth=2, samples=240, seed=seed)
    lam, log_lam = stats.lambda_hat, stats.log_lambda
    log_cprod = math.log(stats.product_const)

    # gamma planning: the last gamma-relevant level (I-2) caps what the
    # increasing ladder can reach, so select configurations top-down: each
    # earlier level takes the largest gamma strictly below the next one
    selections = [None] * len(ladder)
    if gamma_ladder and len(ladder) >= 2:
        bound = math.inf
        for i in reversed(range(len(ladder) - 1)):
            eps_i, p_i = ladder[i]
            grid = _eval_grid(scheme, eps_i, p_i, 2, family_budget, collect_cap)
            if not grid:
                raise InfeasibleError(f"no feasible family for eps={eps_i}")
            floor_i = 1.0 - 4.0 * float(eps_i) + 0.04
            cands = [c for c in grid if floor_i <= c["gamma"] < bound - gamma_margin]
            if cands:
                cfg = max(cands, key=lambda c: c["gamma"])
            else:
                below = [c for c in grid if c["gamma"] < bound - gamma_margin]
                if i > 0 and below:
                    cfg = max(below, key=lambda c: c["gamma"])
                else:
                    cfg = min(grid, key=lambda c: c["gamma"])
                if cfg["gamma"] < floor_i:
                    raise InfeasibleError(
                        f"level {i}: best gamma {cfg['gamma']:.3f} below band floor {floor_i:.3f}"
                    )
            selections[i] = cfg
            bound = cfg["gamma"]

    levels: list[LevelPlan] = []
    for i, (eps_i, p_i) in enumerate(ladder):
        cfg = selections[i]
        if cfg is None:
            grid = _eval_grid(scheme, eps_i, p_i, 2, family_budget, collect_cap,
                              stop_first=True)
            if not grid:
                raise InfeasibleError(f"no feasible family for eps={eps_i}")
            cfg = grid[0]
        leaves, truncated = pool_leaves(
            scheme, cfg["n"], eps_i * Fraction(3, 2), p_i,
            tau_cap=cfg["tau_cap"], min_tau=cfg.get("min_tau"),
            collect_cap=collect_cap,
        )
        fam = family_from_leaves(
            scheme, cfg["n"], eps_i, p_i, connectors, leaves, truncated,
            budget=cfg.get("budget", family_budget), tau_cap=cfg["tau_cap"],
            min_tau=cfg.get("min_tau"),
        )
        horizon_constants(fam, lam_hat=lam, scan_samples=scan_samples, seed=seed + i)
        lv = LevelPlan(
            index=i, eps=eps_i, p_bar=p_i, family=fam, n=fam.n,
            N=max(fam.N0, fam.N1), M_sym=fam.M_sym, g_stat=cfg["gamma"],
        )
        _level_constants(lv)
        levels.append(lv)

    # cross-level block admissibility
    for a, b in zip(levels, levels[1:]):
        imgs = {c.image_comp for c in a.family.cylinders}
        bases = {c.base_comp for c in b.family.cylinders}
        if not imgs <= bases:
            raise InfeasibleError(
                f"level {a.index} images {sorted(imgs)} not contained in "
                f"level {b.index} bases {sorted(bases)}"
            )

    t = 0
    for i, lv in enumerate(levels):
        lv.t = t
        nxt = levels[i + 1] if i + 1 < len(levels) else None
        lv.k = _choose_k(levels, i, nxt, t, log_lam, log_cprod)
        t += lv.n * lv.k
    for i, lv in enumerate(levels):
        nxt = levels[i + 1] if i + 1 < len(levels) else None
        lv.certs = _level_certs(levels, i, nxt, log_lam, log_cprod)
        bad = [c for c in lv.certs if c.passed is False]
        if bad:
            raise CertificateError(f"schedule certificate failed at level {i}: {bad[0].name}",
                                   witness=bad[0].as_dict())
    return BridgeSchedule(
        target=target, levels=levels, lam_hat=lam, d_hat=stats.D_hat,
        prod_const=stats.product_const, scheme=scheme, connectors=connectors,
        eps0=eps0, seed=seed,
    )


def _surrogate_gamma(scheme, leaves, budget, strict_cycle=True):
    """Dry-run family metrics from enumeration leaves: surrogate virtual
    dimension and the lex-policy cycle's asymptotic log m / log length.

    The cycle's log-length is measured on an actual concatenated word (a few
    repetitions), which captures the junction gain that block-length products
    miss.  With strict_cycle, families whose lex walk admits more than one
    cycle are rejected (the gamma ladder needs entry-independent readings)."""
    kept = sorted(leaves, key=lambda x: (-x[0], x[1]))[:budget]
    slog = np.array([x[0] for x in kept])
    t = scheme.table
    bases = np.array([int(t.base[x[1][0]]) for x in kept])
    images = np.array([int(t.comp[x[1][-1]]) for x in kept])
    base_set = sorted(set(bases.tolist()))
    image_set = set(images.tolist())
    cover_ok = (
        sorted({scheme.big_of_comp(b) for b in base_set}) == list(range(scheme.L))
        and sorted({scheme.big_of_comp(c) for c in image_set}) == list(range(scheme.L))
        and image_set <= set(base_set)
    )
    if not cover_ok:
        return None
    lo, hi = 0.02, 1.5
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if np.exp(mid * slog).sum() > 1.0:
            lo = mid
        else:
            hi = mid
    s = 0.5 * (lo + hi)
    logZ = {}
    for c in base_set:
        sel = bases == c
        logZ[c] = math.log(np.exp(s * slog[sel]).sum())
    lex = {}
    for idx, x in enumerate(kept):
        b = bases[idx]
        if b not in lex or x[1] < kept[lex[b]][1]:
            lex[b] = idx
    # the generated point follows the lex-walk cycle; require that every
    # entry component converges to the same cycle so that the level's
    # measured local dimension does not depend on the entry phase
    cycles = {}
    for entry in base_set:
        seen = {}
        seq = []
        comp = entry
        while comp not in seen and comp in lex:
            seen[comp] = len(seq)
            k = lex[comp]
            seq.append(k)
            comp = int(images[k])
        if comp not in seen:
            return None
        cyc = seq[seen[comp]:]
        cycles[tuple(sorted(cyc))] = cyc
    if strict_cycle and len(cycles) != 1:
        return None
    gammas = []
    for cycle in cycles.values():
        # -log P = s * chi + log Z per block (log Z < 0); the denominator is
        # the exact log-length of the concatenated cycle word
        num = sum(s * (-slog[k]) + logZ[int(bases[k])] for k in cycle)
        reps = max(2, min(8, 48 // max(1, len(cycle))))
        syms = [sid for _ in range(reps) for k in cycle for sid in kept[k][1]]
        den = -make_word(scheme, syms).log_len / reps
        gammas.append(num / den)
    m_fam = max(x[3] for x in kept)
    return {"vdim_s": s, "gamma": min(gammas), "M_fam": m_fam, "count": len(kept)}


def _eval_grid(scheme, eps, p_bar, n_lo, budget, collect_cap,
               stop_first=False, node_budget=5_000_000):
    """Dry-run a small (depth, tau_cap, budget) grid for one level.

    The budget axis matters: trimming a family lowers both its virtual
    dimension and its cycle gamma, which is how earlier levels are placed
    below later ones.  Leaves are not retained (the chosen config
    re-enumerates)."""
    epsw = 0.75 * float(eps)
    p_max = max(float(p) for p in p_bar)
    budgets = sorted({budget, max(48, budget // 16), max(48, budget // 128)}, reverse=True)
    out = []
    for n in range(max(2, n_lo), max(2, n_lo) + 4):
        tau_floor = int(n * p_max / epsw) + n + 2
        busted = False
        # heavy variants (min_tau floors) reach the low-gamma regime
        plain = [(m, None) for m in (1.05, 1.3, 1.8, 2.6)]
        heavy = [(2.8, 0.60), (4.2, 0.65)]
        for mult, frac in plain + heavy:
            tau_cap = int(math.ceil(tau_floor * mult))
            min_tau = int(frac * tau_cap) if frac else None
            try:
                leaves, _trunc = pool_leaves(
                    scheme, n, to_frac(eps) * Fraction(3, 2), p_bar,
                    tau_cap=tau_cap, min_tau=min_tau,
                    collect_cap=collect_cap, node_budget=node_budget,
                )
            except InfeasibleError:
                if frac is None:
                    busted = True
                continue
            if not leaves:
                continue
            for b in budgets:
                met = _surrogate_gamma(scheme, leaves, b, strict_cycle=not stop_first)
                if met is None:
                    continue
                out.append({"n": n, "tau_cap": tau_cap, "min_tau": min_tau, "budget": b,
                            "gamma": met["gamma"], "vdim_s": met["vdim_s"],
                            "M_fam": met["M_fam"]})
                if stop_first:
                    del leaves
                    return out
            del leaves
        if busted and n > max(2, n_lo):
            break   # deeper trees will only be larger
    return out


def _level_constants(lv: LevelPlan) -> None:
    meas = lv.family.measure
    steps = np.array([-meas.step_log_prob(k) for k in range(len(meas.family))])
    lv.w_max = float(steps.max())
    lv.w_min = float(steps.min())
    lv.s_bar = float(max(-v for v in meas.log_start.values()))
    lv.len_max = float(-meas.log_lengths.min())
    lv.len_min = float(-meas.log_lengths.max())
    mass = []
    for comps in meas.scheme.big_images:
        m = sum(math.exp(meas.log_start[c]) for c in comps if c in meas.log_start)
        mass.append(m)
    lv.C_tilde = float(max(abs(math.log(m)) for m in mass if m > 0.0))


def _bounds_upto(levels, i):
    """Surrogate bounds accumulated over levels j < i (given chosen k_j)."""
    bm_hi = bm_lo = bl_hi = bl_lo = 0.0
    for j in range(i):
        lv = levels[j]
        bm_hi += lv.s_bar + lv.k * lv.w_max + (lv.C_tilde if j >= 1 else 0.0)
        bm_lo += lv.k * lv.w_min - (lv.C_tilde if j >= 1 else 0.0)
        bl_hi += lv.k
        bl_lo += lv.k
    return bm_hi, bm_lo


def _choose_k(levels, i, nxt, t_i, log_lam, log_cprod) -> int:
    lv = levels[i]
    eps_f = float(lv.eps)
    lo = max(1, lv.N // lv.n + 1)
    # (6.5)
    s_prev = sum(levels[j].M_sym * levels[j].n * levels[j].k for j in range(i))
    if s_prev:
        lo = max(lo, int(Fraction(s_prev) / (lv.eps * lv.n)) + 1)
    # (6.6): measure bound
    bm_hi = sum(levels[j].s_bar + levels[j].k * levels[j].w_max
                + (levels[j].C_tilde if j >= 1 else 0.0) for j in range(i))
    denom = eps_f * (1.0 - eps_f) * lv.n * log_lam
    lo = max(lo, int(math.ceil((bm_hi + lv.C_tilde) / denom)) + 1)
    # (6.7): length bound
    bl_hi = sum(levels[j].k * (levels[j].len_max + log_cprod) for j in range(i))
    lo = max(lo, int(math.ceil((bl_hi + log_cprod) / (eps_f * lv.n * log_lam))) + 1)
    if nxt is not None:
        # (6.4): next-level early window must be short relative to t_{i+1}
        need_t = Fraction(nxt.N * nxt.M_sym) / lv.eps
        lo = max(lo, int((need_t - t_i) / lv.n) + 1)
        # (6.8)/(6.9) for level i+1: prefix depth must dominate
        blocks_next = math.ceil(nxt.N / nxt.n)
        num_m = blocks_next * nxt.w_max + nxt.s_bar + nxt.C_tilde
        bm_lo_prev = sum(levels[j].k * levels[j].w_min
                         - (levels[j].C_tilde if j >= 1 else 0.0) for j in range(i))
        if lv.w_min > 0.0:
            need = num_m / eps_f - bm_lo_prev + (lv.C_tilde if i >= 1 else 0.0)
            lo = max(lo, int(math.ceil(need / lv.w_min)) + 1)
        num_l = blocks_next * (nxt.len_max + log_cprod) + log_cprod
        bl_lo_prev = sum(levels[j].k * (levels[j].len_min - log_cprod) for j in range(i))
        per = lv.len_min - log_cprod
        if per > 0.0:
            need = num_l / eps_f - bl_lo_prev
            lo = max(lo, int(math.ceil(need / per)) + 1)
    if lo > _K_CAP:
        raise InfeasibleError(f"k_{i} = {lo} exceeds the cap {_K_CAP}")
    return lo


def _level_certs(levels, i, nxt, log_lam, log_cprod) -> list[Certificate]:
    lv = levels[i]
    eps_f = float(lv.eps)
    certs = []
    certs.append(Certificate(
        "6.3: k > N/n", lhs=f"{lv.N}/{lv.n}", rhs=str(lv.k),
        passed=lv.k * lv.n > lv.N,
    ))
    s_prev = sum(levels[j].M_sym * levels[j].n * levels[j].k for j in range(i))
    rhs = lv.eps * lv.n * lv.k
    certs.append(Certificate(
        "6.5: sum M n k < eps n k", lhs=str(s_prev), rhs=str(rhs),
        passed=(Fraction(s_prev) < rhs) if i > 0 else None,
        note="" if i > 0 else "no previous levels",
    ))
    bm_hi = sum(levels[j].s_bar + levels[j].k * levels[j].w_max
                + (levels[j].C_tilde if j >= 1 else 0.0) for j in range(i))
    lhs = bm_hi + lv.C_tilde
    rhs_f = eps_f * (1.0 - eps_f) * lv.n * lv.k * log_lam
    certs.append(Certificate(
        "6.6: prefix log-measure small vs block", lhs=_s(lhs), rhs=_s(rhs_f),
        passed=(lhs <= rhs_f) if i > 0 else None,
        note="surrogate: |log m(b)| <= sum(s_bar + k w_max + C~); "
             "|log m_i(a_i)| >= (1-eps) n k log lambda",
    ))
    bl_hi = sum(levels[j].k * (levels[j].len_max + log_cprod) for j in range(i))
    lhs = bl_hi + log_cprod
    rhs_f = eps_f * lv.n * lv.k * log_lam
    certs.append(Certificate(
        "6.7: prefix log-length small vs block", lhs=_s(lhs), rhs=_s(rhs_f),
        passed=(lhs <= rhs_f) if i > 0 else None,
        note="surrogate: |log|b|| <= sum k (len_max + log C); |log|a_i|| >= n k log lambda",
    ))
    if nxt is not None:
        t_next = lv.t + lv.n * lv.k
        lhs_fr = Fraction(nxt.N * nxt.M_sym, t_next)
        certs.append(Certificate(
            "6.4: N' M' / t' < eps", lhs=str(lhs_fr), rhs=str(lv.eps),
            passed=lhs_fr < lv.eps,
        ))
        blocks_next = math.ceil(nxt.N / nxt.n)
        bm_lo = sum(levels[j].k * levels[j].w_min
                    - (levels[j].C_tilde if j >= 1 else 0.0) for j in range(i + 1))
        num_m = blocks_next * nxt.w_max + nxt.s_bar + nxt.C_tilde
        certs.append(Certificate(
            "6.8: early next-level measure window", lhs=_s(num_m), rhs=_s(eps_f * bm_lo),
            passed=num_m < eps_f * bm_lo,
            note="surrogate bounds on |log m_i(a_{i,s})| (s <= N) vs |log m(b)|",
        ))
        bl_lo = sum(levels[j].k * (levels[j].len_min - log_cprod) for j in range(i + 1))
        num_l = blocks_next * (nxt.len_max + log_cprod) + log_cprod
        certs.append(Certificate(
            "6.9: early next-level length window", lhs=_s(num_l), rhs=_s(eps_f * bl_lo),
            passed=num_l < eps_f * bl_lo,
            note="surrogate bounds on |log|a_{i,s}|| (s <= N) vs |log|b||",
        ))
    else:
        for name in ("6.4", "6.8", "6.9"):
            certs.append(Certificate(name + ": next level", lhs="", rhs="",
                                     passed=None, note="last planned level"))
    return certs


def _s(x: float) -> str:
    return f"{x:.17g}"


# ---------------------------------------------------------------------------
# generic points
# ---------------------------------------------------------------------------

@dataclass
class LevelBlocks:
    level: int
    entry_comp: int
    head: tuple          # family member indices
    cycle: tuple
    reps: int
    tail: tuple

    def total_blocks(self) -> int:
        return len(self.head) + self.reps * len(self.cycle) + len(self.tail)


@dataclass
class GenericPoint:
    policy: str
    blocks: list                    # LevelBlocks per level
    checkpoints: list               # (t_i, tau, tau_vec) ints at level starts + end
    enclosures: list                # (symbol_depth, lo, hi)
    enclosure_depth: int
    intermediate_log: list = field(default_factory=list)

    def checkpoint_ratios(self):
        out = []
        for t_sym, tau, vec in self.checkpoints:
            if tau:
                out.append((t_sym, tuple(Fraction(v, tau) for v in vec)))
        return out

    def symbol_prefix(self, schedule: BridgeSchedule, count: int) -> list[int]:
        syms = []
        for lb in self.blocks:
            fam = schedule.levels[lb.level].family
            seq = list(lb.head) + list(lb.cycle) * min(lb.reps, count) + list(lb.tail)
            for k in seq:
                for s in fam.cylinders[k].syms:
                    syms.append(int(s))
                    if len(syms) >= count:
                        return syms
        return syms

    def to_json(self, schedule: BridgeSchedule) -> str:
        doc = {
            "policy": self.policy,
            "enclosure_depth": self.enclosure_depth,
            "levels": [
                {
                    "level": lb.level,
                    "entry_comp": lb.entry_comp,
                    "head": [list(map(int, schedule.levels[lb.level].family.cylinders[k].syms))
                             for k in lb.head],
                    "cycle": [list(map(int, schedule.levels[lb.level].family.cylinders[k].syms))
                              for k in lb.cycle],
                    "reps": lb.reps,
                    "tail": [list(map(int, schedule.levels[lb.level].family.cylinders[k].syms))
                             for k in lb.tail],
                }
                for lb in self.blocks
            ],
            "checkpoints": [
                {"t": t, "tau": str(tau), "tau_vec": [str(v) for v in vec]}
                for t, tau, vec in self.checkpoints
            ],
            "enclosures": [
                {"depth": dpt, "lo": _f(lo), "hi": _f(hi)} for dpt, lo, hi in self.enclosures
            ],
        }
        return json.dumps(doc, sort_keys=True)


def generate_point(schedule: BridgeSchedule, policy: str = "lex",
                   enclosure_depth: int = 60) -> GenericPoint:
    """A concrete admissible block itinerary through the schedule.

    The default policy picks the lexicographically least admissible family
    cylinder per block; seeded:<n> picks a seeded random periodic pattern.
    Both are eventually periodic, so the itinerary is stored as head + cycle
    repetitions + tail.
    """
    rng = None
    if policy.startswith("seeded:"):
        rng = np.random.default_rng(int(policy.split(":", 1)[1]))
    elif policy != "lex":
        raise DomainError(f"unknown policy {policy!r}")

    blocks = []
    entry = None
    for lv in schedule.levels:
        fam = lv.family
        members = fam.cylinders
        by_base = {}
        for idx, c in enumerate(members):
            by_base.setdefault(c.base_comp, []).append(idx)
        if entry is None:
            entry = min(by_base)
        if entry not in by_base:
            raise AdmissibilityError(
                f"no level-{lv.index} block based at component {entry}"
            )

        def pick(comp):
            cand = by_base[comp]
            if rng is None:
                return min(cand, key=lambda k: members[k].syms)
            return int(cand[int(rng.integers(0, len(cand)))])

        seq = []
        seen = {}
        comp = entry
        while comp not in seen:
            seen[comp] = len(seq)
            k = pick(comp)
            seq.append(k)
            comp = members[k].image_comp
        start = seen[comp]
        head = tuple(seq[:start])
        cycle = tuple(seq[start:])
        k_total = lv.k
        if k_total <= len(head):
            lb = LevelBlocks(lv.index, entry, tuple(seq[:k_total]), (), 0, ())
        else:
            rem = k_total - len(head)
            reps, extra = divmod(rem, len(cycle))
            lb = LevelBlocks(lv.index, entry, head, cycle, reps, tuple(cycle[:extra]))
        blocks.append(lb)
        last = (list(lb.tail) or list(lb.cycle) or list(lb.head))[-1]
        entry = members[last].image_comp

    checkpoints = _checkpoints(schedule, blocks)
    sym_ids = GenericPoint("", blocks, [], [], 0).symbol_prefix(schedule, enclosure_depth)
    enclosures = []
    n0 = schedule.levels[0].n
    depths = sorted({min(len(sym_ids), d) for d in
                     [n0, 2 * n0, 4 * n0, enclosure_depth] if d >= 1})
    for dpt in depths:
        w = make_word(schedule.scheme, sym_ids[:dpt])
        enclosures.append((dpt, w.lo, w.hi))
    return GenericPoint(
        policy=policy, blocks=blocks, checkpoints=checkpoints,
        enclosures=enclosures, enclosure_depth=enclosure_depth,
    )


def _checkpoints(schedule, blocks):
    d = schedule.scheme.d
    tau = 0
    vec = [0] * d
    out = [(0, 0, tuple(vec))]
    t_sym = 0
    for lb in blocks:
        lv = schedule.levels[lb.level]
        fam = lv.family
        for part, mult in ((lb.head, 1), (lb.cycle, lb.reps), (lb.tail, 1)):
            if not part or mult == 0:
                continue
            pt = sum(fam.cylinders[k].tau for k in part)
            pv = [sum(fam.cylinders[k].tau_vec[j] for k in part) for j in range(d)]
            tau += mult * pt
            for j in range(d):
                vec[j] += mult * pv[j]
        t_sym += lv.n * lv.k
        out.append((t_sym, tau, tuple(vec)))
    return out


# ---------------------------------------------------------------------------
# exact within-level walk machinery
# ---------------------------------------------------------------------------

class _LevelWalk:
    """Symbol-resolution view of one level's block sequence.

    Provides exact (tau, tau_vec) at every within-level symbol position, and
    anchor positions (head, first repetition, last repetition, tail) that
    exactly bracket the extremes over all cycle repetitions.
    """

    def __init__(self, schedule: BridgeSchedule, lb: LevelBlocks):
        lv = schedule.levels[lb.level]
        self.n = lv.n
        self.d = schedule.scheme.d
        fam = lv.family
        t = schedule.scheme.table
        self._pref = {}
        for k in set(lb.head) | set(lb.cycle) | set(lb.tail):
            syms = fam.cylinders[k].syms
            taus = [0]
            vecs = [tuple([0] * self.d)]
            for s in syms:
                lvv = int(t.level[s])
                taus.append(taus[-1] + lvv + 1)
                v = list(vecs[-1])
                if lvv > 0:
                    v[int(t.target[s])] += lvv
                vecs.append(tuple(v))
            self._pref[k] = (taus, vecs)
        self.lb = lb
        self.head_sums = self._sums(lb.head)
        self.cycle_sums = self._sums(lb.cycle)
        self.tail_sums = self._sums(lb.tail)

    def _sums(self, part):
        tau = 0
        vec = [0] * self.d
        pref = [(0, tuple(vec))]
        for k in part:
            taus, vecs = self._pref[k]
            tau += taus[-1]
            vec = [a + b for a, b in zip(vec, vecs[-1])]
            pref.append((tau, tuple(vec)))
        return pref

    def block_total(self, k):
        taus, vecs = self._pref[k]
        return taus[-1], vecs[-1]

    def iter_symbols(self, limit: int):
        """(s, tau_s, vec_s) for within-level symbol positions s = 1..limit,
        walking blocks in order (head, cycles, tail)."""
        lb = self.lb
        s = 0
        tau = 0
        vec = [0] * self.d

        def emit(part):
            nonlocal s, tau, vec
            for k in part:
                taus, vecs = self._pref[k]
                base_t, base_v = tau, list(vec)
                for q in range(1, len(taus)):
                    s += 1
                    tau = base_t + taus[q]
                    vec = [a + b for a, b in zip(base_v, vecs[q])]
                    yield s, tau, vec
                    if s >= limit:
                        return
            return

        yield from emit(lb.head)
        if s >= limit:
            return
        for _ in range(lb.reps):
            yield from emit(lb.cycle)
            if s >= limit:
                return
        yield from emit(lb.tail)

    def anchors(self):
        """Exact extreme-bracketing positions: every symbol position in the
        head, in the first and last cycle repetition, and in the tail.

        Middle repetitions are covered because each ratio coordinate at a
        fixed in-cycle offset is monotone in the repetition index.
        """
        lb = self.lb
        out = []
        s = 0
        tau = 0
        vec = [0] * self.d

        def emit_part(part, s0, tau0, vec0):
            s, tau, vec = s0, tau0, list(vec0)
            res = []
            for k in part:
                taus, vecs = self._pref[k]
                base_t, base_v = tau, list(vec)
                for q in range(1, len(taus)):
                    s += 1
                    tau = base_t + taus[q]
                    vec = [a + b for a, b in zip(base_v, vecs[q])]
                    res.append((s, tau, tuple(vec)))
            return res, s, tau, vec

        res, s, tau, vec = emit_part(lb.head, s, tau, vec)
        out.extend(res)
        if lb.reps > 0:
            first, s1, tau1, vec1 = emit_part(lb.cycle, s, tau, vec)
            out.extend(first)
            ct, cv = self.cycle_sums[-1]
            csyms = s1 - s
            if lb.reps > 1:
                r = lb.reps - 1
                s_last = s + r * csyms
                tau_last = tau + r * ct
                vec_last = [a + r * b for a, b in zip(vec, cv)]
                last, s2, tau2, vec2 = emit_part(lb.cycle, s_last, tau_last, vec_last)
                out.extend(last)
                s, tau, vec = s2, tau2, vec2
            else:
                s, tau, vec = s1, tau1, vec1
        res, s, tau, vec = emit_part(lb.tail, s, tau, vec)
        out.extend(res)
        return out, (s, tau, tuple(vec))


# ---------------------------------------------------------------------------
# verification
# ---------------------------------------------------------------------------

@dataclass
class RegimeRecord:
    level: int
    name: str
    ok: bool
    worst: str = ""
    witness: dict | None = None


def verify_generic(point: GenericPoint, schedule: BridgeSchedule) -> list[RegimeRecord]:
    """Exact rational verification of the three proof regimes at every
    intermediate time, plus the checkpoint bounds.

    Middle cycle repetitions are checked through their exact extremes; no
    floating point enters any comparison.
    """
    recs = []
    d = schedule.scheme.d
    polyline = schedule.target.kind == "polyline"
    bad = _check_block_adjacency(point, schedule)
    if bad is not None:
        return [bad]
    cum_tau = 0
    cum_vec = [0] * d
    for i, lb in enumerate(point.blocks):
        lv = schedule.levels[lb.level]
        walk = _LevelWalk(schedule, lb)
        anchors, (s_end, tau_end, vec_end) = walk.anchors()
        if s_end != lv.n * lv.k:
            recs.append(RegimeRecord(i, "structure", False,
                                     witness={"symbols": s_end, "expected": lv.n * lv.k}))
            return recs
        T0, V0 = cum_tau, list(cum_vec)

        # (a) checkpoint at t_{i+1}
        tau_cp = T0 + tau_end
        vec_cp = [a + b for a, b in zip(V0, vec_end)]
        ok_a = _in_ball_int(vec_cp, tau_cp, lv.p_bar, 3 * lv.eps)
        worst = _max_dev(vec_cp, tau_cp, lv.p_bar)
        recs.append(RegimeRecord(i, "checkpoint |ratio - p| <= 3 eps", ok_a,
                                 worst=str(worst),
                                 witness=None if ok_a else {"tau": tau_cp}))

        # (b) early window s < N_i (i >= 1)
        if i >= 1:
            prev_eps = schedule.levels[i - 1].eps
            limit = min(lv.N, s_end)
            ok_b = True
            worst_b = Fraction(0)
            wit = None
            for s, tau_s, vec_s in walk.iter_symbols(limit):
                dev = _max_pair_dev(V0, T0, [a + b for a, b in zip(V0, vec_s)], T0 + tau_s)
                bound = Fraction(2 * tau_s, T0 + tau_s)
                if dev > bound:
                    ok_b, wit = False, {"s": s, "dev": str(dev), "lemma_bound": str(bound)}
                    break
                if dev >= 2 * prev_eps:
                    ok_b, wit = False, {"s": s, "dev": str(dev), "limit": str(2 * prev_eps)}
                    break
                if dev > worst_b:
                    worst_b = dev
            recs.append(RegimeRecord(i, "early window drift < 2 eps_{i-1}", ok_b,
                                     worst=str(worst_b), witness=wit))

        # (c) sandwich and containment for s >= N_i, via exact anchors
        delta = max(3 * schedule.levels[i - 1].eps, 3 * lv.eps) if (i >= 1 and polyline) \
            else (max(3 * schedule.levels[i - 1].eps, lv.eps) if i >= 1 else lv.eps)
        ok_c = True
        wit = None
        worst_c = Fraction(0)
        rb = [Fraction(v, T0) for v in V0] if T0 else None
        for s, tau_s, vec_s in anchors:
            if s < lv.N:
                continue
            tot_tau = T0 + tau_s
            tot_vec = [a + b for a, b in zip(V0, vec_s)]
            ra = [Fraction(v, tau_s) for v in vec_s]
            rt = [Fraction(v, tot_tau) for v in tot_vec]
            if rb is not None:
                for j in range(d):
                    losj, hisj = min(rb[j], ra[j]), max(rb[j], ra[j])
                    if not (losj <= rt[j] <= hisj):
                        ok_c, wit = False, {"s": s, "coord": j, "kind": "sandwich"}
                        break
                if not ok_c:
                    break
            # family ratio control of the within-level word
            if s >= lv.N and not _in_ball_frac(ra, lv.p_bar, lv.eps):
                ok_c, wit = False, {"s": s, "kind": "block ratio outside B_eps"}
                break
            if polyline and i >= 1:
                prev_p = schedule.levels[i - 1].p_bar
                for j in range(d):
                    losj = min(prev_p[j], lv.p_bar[j]) - delta
                    hisj = max(prev_p[j], lv.p_bar[j]) + delta
                    if not (losj < rt[j] < hisj):
                        ok_c, wit = False, {"s": s, "coord": j, "kind": "rectangle"}
                        break
                if not ok_c:
                    break
            else:
                devt = _max_dev(tot_vec, tot_tau, lv.p_bar)
                worst_c = max(worst_c, devt)
                if devt >= delta:
                    ok_c, wit = False, {"s": s, "dev": str(devt), "delta": str(delta)}
                    break
        recs.append(RegimeRecord(
            i, "sandwich + containment (s >= N)", ok_c, worst=str(worst_c), witness=wit))

        # consecutive-difference bound (safe exact chain)
        if T0:
            bound = Fraction(2 * lv.M_sym, T0)
            lim = 2 * (_rect_diam(schedule, i) if polyline else 2 * delta)
            recs.append(RegimeRecord(
                i, "consecutive difference bound", bound <= lim,
                worst=str(bound),
                witness=None if bound <= lim else {"bound": str(bound), "limit": str(lim)}))
        cum_tau = tau_cp
        cum_vec = vec_cp
    point.intermediate_log = [
        {"level": r.level, "name": r.name, "ok": r.ok, "worst": r.worst} for r in recs
    ]
    return recs


def _check_block_adjacency(point: GenericPoint, schedule: BridgeSchedule):
    """Composability of consecutive blocks, within levels (including the
    cycle wrap) and across level boundaries; None if everything chains."""
    prev_img = None
    for i, lb in enumerate(point.blocks):
        members = schedule.levels[lb.level].family.cylinders
        pairs = []
        flat_head = list(lb.head)
        cyc = list(lb.cycle)
        tail = list(lb.tail)
        seq_repr = flat_head + (cyc if lb.reps else []) + tail
        pairs.extend(zip(seq_repr, seq_repr[1:]))
        if cyc and lb.reps >= 2:
            pairs.append((cyc[-1], cyc[0]))
        if cyc and lb.reps and tail:
            pairs.append((cyc[-1], tail[0]))
        first = seq_repr[0] if seq_repr else None
        if first is None:
            return RegimeRecord(i, "block admissibility", False, witness={"empty": i})
        if prev_img is not None and members[first].base_comp != prev_img:
            return RegimeRecord(i, "block admissibility", False,
                                witness={"level_entry": i})
        for k1, k2 in pairs:
            if members[k1].image_comp != members[k2].base_comp:
                return RegimeRecord(i, "block admissibility", False,
                                    witness={"pair": (int(k1), int(k2))})
        last = (tail or cyc or flat_head)[-1]
        prev_img = members[last].image_comp
    return None


def _rect_diam(schedule, i):
    lv = schedule.levels[i]
    prev = schedule.levels[i - 1] if i >= 1 else lv
    delta = max(3 * prev.eps, 3 * lv.eps)
    spans = [abs(prev.p_bar[j] - lv.p_bar[j]) + 2 * delta
             for j in range(len(lv.p_bar))]
    return max(spans)


def _in_ball_int(vec, tau, p_bar, radius) -> bool:
    return all(abs(Fraction(v, tau) - p) <= radius for v, p in zip(vec, p_bar))


def _in_ball_frac(r, p_bar, radius) -> bool:
    return all(abs(x - p) < radius for x, p in zip(r, p_bar))


def _max_dev(vec, tau, p_bar) -> Fraction:
    return max(abs(Fraction(v, tau) - p) for v, p in zip(vec, p_bar))


def _max_pair_dev(v1, t1, v2, t2) -> Fraction:
    return max(abs(Fraction(a, t1) - Fraction(b, t2)) for a, b in zip(v1, v2))


# ---------------------------------------------------------------------------
# bridge measure and local dimension along the point
# ---------------------------------------------------------------------------

def _level_partial_runs(lb: LevelBlocks, kb: int):
    """(head, cycle, reps, tail) covering exactly the first kb blocks."""
    h = len(lb.head)
    if kb <= h or not lb.cycle:
        seq = (list(lb.head) + list(lb.cycle) * lb.reps + list(lb.tail))[:kb]
        return tuple(seq), (), 0, ()
    c = len(lb.cycle)
    reps, rem = divmod(kb - h, c)
    if reps > lb.reps or (reps == lb.reps and rem > len(lb.tail)):
        raise DomainError("prefix exceeds the level's block count")
    return lb.head, lb.cycle, reps, tuple(lb.cycle[:rem])


def bridge_measure(schedule: BridgeSchedule, point: GenericPoint,
                   through_level: int | None = None,
                   blocks_in_level: int | None = None) -> float:
    """log m of the cylinder given by the point's first blocks: all blocks of
    levels below through_level, plus blocks_in_level blocks of that level.

    The level normalizers cancel against the conditional starts exactly, so
    the accumulated value is the level-0 start plus the per-step logs.
    """
    if through_level is None:
        through_level = len(point.blocks)
    total = 0.0
    for i, lb in enumerate(point.blocks[: through_level + (1 if blocks_in_level else 0)]):
        meas = schedule.levels[lb.level].family.measure
        if i == through_level:
            head, cycle, reps, tail = _level_partial_runs(lb, blocks_in_level)
        else:
            head, cycle, reps, tail = lb.head, lb.cycle, lb.reps, lb.tail
        if i == 0:
            first = (list(head) + list(cycle) + list(tail))[0]
            total += meas.log_start[meas.family[first].base_comp]
        # for i >= 1 the conditional start cancels against the level normalizer
        for part, mult in ((head, 1), (cycle, reps), (tail, 1)):
            if part and mult:
                total += mult * sum(meas.step_log_prob(k) for k in part)
    return total


def _cycle_log_length(schedule, lb, upto_blocks=None, tol=1e-11):
    """Backward-pullback log-length of the level's block word, extrapolating
    the per-cycle decrement once it stabilizes.  Returns (log_len, residual)."""
    from .cylinders import _PullState, _pull_through_symbol

    fam = schedule.levels[lb.level].family
    members = fam.cylinders
    seq_head = list(lb.head)
    cyc = list(lb.cycle)
    reps = lb.reps
    tail = list(lb.tail)
    if upto_blocks is not None:
        seq = (seq_head + cyc * reps + tail)[:upto_blocks]
        return _plain_log_length(schedule, lb.level, seq), 0.0

    scheme = schedule.scheme
    last = (tail or cyc or seq_head)[-1]
    c = scheme.comps[members[last].image_comp]
    st = _PullState(c.lo, c.hi)
    for k in reversed(tail):
        for s in reversed(members[k].syms):
            _pull_through_symbol(scheme, s, st)
    logw_prev = st.logw if st.point_mode else math.log(st.q - st.p)
    delta_prev = None
    done = 0
    residual = math.inf
    while done < reps:
        for k in reversed(cyc):
            for s in reversed(members[k].syms):
                _pull_through_symbol(scheme, s, st)
        done += 1
        logw = st.logw if st.point_mode else math.log(st.q - st.p)
        delta = logw_prev - logw
        logw_prev = logw
        if delta_prev is not None:
            residual = abs(delta - delta_prev)
            if residual < tol and done >= 3:
                break
        delta_prev = delta
    remaining = reps - done
    extrapolated = remaining * (delta_prev if delta_prev is not None else 0.0)
    for k in reversed(seq_head):
        for s in reversed(members[k].syms):
            _pull_through_symbol(scheme, s, st)
    logw = st.logw if st.point_mode else math.log(st.q - st.p)
    return logw - extrapolated, residual if remaining else 0.0


def _plain_log_length(schedule, level, seq):
    from .cylinders import _PullState, _pull_through_symbol

    scheme = schedule.scheme
    members = schedule.levels[level].family.cylinders
    c = scheme.comps[members[seq[-1]].image_comp]
    st = _PullState(c.lo, c.hi)
    for k in reversed(seq):
        for s in reversed(members[k].syms):
            _pull_through_symbol(scheme, s, st)
    return st.logw if st.point_mode else math.log(st.q - st.p)


@dataclass
class ProfileLevel:
    level: int
    gamma: float                   # log m(b_i) / log |b_i|
    band: tuple                    # Lemma-style band from gamma and the eps ladder
    band_inflated: tuple           # widened by the measured E_hat slack
    samples: list                  # (s_blocks, value)
    ok_band: bool
    length_residual: float


def local_dim_profile(point: GenericPoint, schedule: BridgeSchedule,
                      samples_per_level: int = 5) -> list[ProfileLevel]:
    """log m / log length along the point at level starts and sampled
    within-level positions, with the per-level bands."""
    out = []
    log_m = 0.0
    log_len = 0.0
    residual_acc = 0.0
    for i, lb in enumerate(point.blocks):
        lv = schedule.levels[lb.level]
        meas = lv.family.measure
        if i >= 1:
            gamma = log_m / log_len
            eps_prev = float(schedule.levels[i - 1].eps)
            eps_i = float(lv.eps)
            band = (min(gamma * (1 - eps_prev) / (1 + eps_prev), 1 - eps_i),
                    max(gamma * (1 + eps_prev) / (1 - eps_prev), 1 + eps_i))
            e_hat = meas.e_hat or 0.0
            slack = e_hat / abs(log_len)
            band_inf = (band[0] - slack, band[1] + slack)
        else:
            gamma = float("nan")
            band = band_inf = (float("nan"), float("nan"))
        # sampled within-level positions (block counts)
        k_tot = lb.total_blocks()
        picks = sorted({max(1, k_tot // 4), max(1, k_tot // 2), k_tot})
        picks = list(picks)[: samples_per_level]
        samp = []
        ok = True
        for kb in picks:
            lm = bridge_measure(schedule, point, through_level=i, blocks_in_level=kb)
            ll, res = _partial_log_length(schedule, point, i, kb)
            val = lm / ll
            samp.append((kb, val))
            if i >= 1 and not (band_inf[0] - 1e-9 <= val <= band_inf[1] + 1e-9):
                ok = False
        lm_full = bridge_measure(schedule, point, through_level=i + 1)
        ll_full, res = _cycle_log_length(schedule, lb)
        residual_acc += res
        log_m_next = lm_full
        log_len_next = log_len + ll_full
        out.append(ProfileLevel(
            level=i, gamma=gamma, band=band, band_inflated=band_inf,
            samples=samp, ok_band=ok, length_residual=residual_acc,
        ))
        log_m = log_m_next
        log_len = log_len_next
    return out


def _partial_log_length(schedule, point, level, kb):
    """log-length of b_level plus kb blocks of the level, with residual."""
    total = 0.0
    res_total = 0.0
    for lb in point.blocks[:level]:
        ll, res = _cycle_log_length(schedule, lb)
        total += ll
        res_total += res
    lb = point.blocks[level]
    head, cycle, reps, tail = _level_partial_runs(lb, kb)
    if reps <= 4:
        seq = list(head) + list(cycle) * reps + list(tail)
        total += _plain_log_length(schedule, lb.level, seq)
    else:
        sub = LevelBlocks(lb.level, lb.entry_comp, head, cycle, reps, tail)
        ll, res = _cycle_log_length(schedule, sub)
        total += ll
        res_total += res
    return total, res_total


# ---------------------------------------------------------------------------
# high-precision replay
# ---------------------------------------------------------------------------

def replay_check(point: GenericPoint, schedule: BridgeSchedule,
                 n_symbols: int | None = None, margin_bits: int = 96) -> dict:
    """Forward replay of the enclosure midpoint against the itinerary.

    Binary64 loses the orbit after a few dozen induced steps, so the replay
    runs in extended precision sized from the measured expansion along the
    word; the plain float horizon is also reported.  Checks the first
    n_symbols (default: the stored enclosure depth) symbols.
    """
    import mpmath as mp

    scheme = schedule.scheme
    W = n_symbols if n_symbols is not None else point.enclosure_depth
    syms = point.symbol_prefix(schedule, W)
    W = len(syms)
    t = scheme.table
    # precision estimate: total log2 expansion along the word plus margin
    bits = margin_bits
    for s in syms:
        x = 0.5 * (t.lo[s] + t.hi[s])
        for _ in range(int(t.tau[s])):
            fx, dfx, _b = scheme.map.eval_with_deriv(x)
            bits += max(0.0, math.log2(dfx))
            x = fx
    prec = int(bits) + 64

    with mp.workprec(prec):
        # pull the word's image interval back through all symbols in high precision
        last_comp = scheme.comps[int(t.comp[syms[-1]])]
        p, q = mp.mpf(last_comp.lo), mp.mpf(last_comp.hi)
        for s in reversed(syms):
            p = _mp_pull(scheme, s, p, prec)
            q = _mp_pull(scheme, s, q, prec)
        mid = (p + q) / 2
        x = mid
        matched = 0
        for s in syms:
            exp_sym = scheme.table.symbol(s)
            if not (exp_sym.lo - 1e-12 <= float(x) <= exp_sym.hi + 1e-12):
                break
            matched += 1
            for _ in range(exp_sym.tau):
                x = _mp_f(scheme.map, x)
        # plain binary64 replay from the same midpoint, for the report
        xf = float(mid)
        float_horizon = 0
        for s in syms:
            exp_sym = scheme.table.symbol(s)
            if not (exp_sym.lo - 1e-12 <= xf <= exp_sym.hi + 1e-12):
                break
            float_horizon += 1
            for _ in range(exp_sym.tau):
                xf = scheme.map(min(max(xf, 0.0), 1.0))
    return {
        "requested": W,
        "matched": matched,
        "ok": matched == W,
        "precision_bits": prec,
        "float64_horizon_symbols": float_horizon,
    }


def _mp_f(spec, x):
    xf = float(x)
    i = spec.branch_index(min(max(xf, 0.0), 1.0))
    br = spec.branches[i]
    import mpmath as mp
    u = x - mp.mpf(br.xi)
    if br.kappa == 3.0:
        y = x + mp.mpf(br.c) * u * u * u
    else:
        y = x + mp.mpf(br.c) * mp.sign(u) * mp.fabs(u) ** mp.mpf(br.kappa)
    if y < 0:
        y = mp.mpf(0)
    if y > 1:
        y = mp.mpf(1)
    return y


def _mp_pull(scheme, sym_id, y, prec):
    """High-precision preimage of y under one symbol's return branch."""
    import mpmath as mp
    t = scheme.table
    j = int(t.target[sym_id])
    level = int(t.level[sym_id])
    spec = scheme.map
    x = y
    steps = []
    if level > 0:
        brj = spec.branches[j]
        los, his = scheme.chains[(j, int(t.comp[sym_id]))]
        for m in range(level):
            steps.append((brj, 0.5 * (los[m] + his[m])))
    base = int(t.base[sym_id])
    bri = spec.branches[scheme.comps[base].branch]
    steps.append((bri, 0.5 * (t.lo[sym_id] + t.hi[sym_id])))
    tol = mp.mpf(2) ** (-prec + 24)
    for br, guess in steps:
        c, xi, kap = mp.mpf(br.c), mp.mpf(br.xi), br.kappa
        z = mp.mpf(br.inverse(float(x) if abs(float(x)) < 2 else guess, x0=guess))
        for _ in range(prec.bit_length() + 40):
            u = z - xi
            if kap == 3.0:
                fz = z + c * u * u * u
                dz = 1 + 3 * c * u * u
            else:
                import mpmath as _m
                fz = z + c * _m.sign(u) * _m.fabs(u) ** kap
                dz = 1 + kap * c * _m.fabs(u) ** (kap - 1)
            err = fz - x
            if mp.fabs(err) <= tol:
                break
            z = z - err / dz
        x = z
    return x
