"""Virtual dimension, dimension error bounds, and Markov family measures.

The virtual dimension of a finite cylinder family is the unique root s of
sum |a|^s = 1.  The family measure approximates the geometric measure of the
family's repeller: weights |a|^s, normalized per admissible continuation
(one normalizer per base component), start distribution proportional to the
normalizers.  Its local-dimension deviation is measured, not assumed; all
downstream horizon constants consume the measured value.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .cylinders import Cylinder, make_word
from .errors import DomainError, InfeasibleError
from .inducing import InducedScheme

__all__ = [
    "vdim",
    "dim_bounds",
    "FamilyMeasure",
    "build_measure",
    "local_dim_scan",
    "ScanReport",
    "compute_N1",
    "dimension_report",
]

_BRACKET = (1e-6, 2.0)
_TOL = 1e-10
_MAX_ITER = 200


def _log_lengths(family) -> np.ndarray:
    out = []
    for a in family:
        if isinstance(a, Cylinder):
            out.append(a.log_len)
        else:
            x = float(a)
            if not (0.0 < x < 1.0):
                raise DomainError(f"length {x!r} not in (0,1)")
            out.append(math.log(x))
    if not out:
        raise DomainError("empty family")
    return np.asarray(out)


def _lse(v: np.ndarray) -> float:
    m = float(np.max(v))
    return m + math.log(float(np.sum(np.exp(v - m))))


def vdim(family) -> float:
    """Unique s > 0 with sum |a|^s = 1, by bisection on [1e-6, 2]."""
    logs = _log_lengths(family)

    def g(s):
        return _lse(s * logs)

    lo, hi = _BRACKET
    if g(lo) < 0.0:
        raise InfeasibleError("vdim below bracket: family too sparse")
    if g(hi) > 0.0:
        raise InfeasibleError("vdim above bracket: lengths do not contract")
    for _ in range(_MAX_ITER):
        mid = 0.5 * (lo + hi)
        if g(mid) > 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo < _TOL:
            break
    return 0.5 * (lo + hi)


def dim_bounds(family, lam_hat: float, d_hat: float, n: int) -> tuple[float, float]:
    """[vdim - w, vdim + w] with w = D/(n log lambda - D), clipped to [0,1]."""
    s = vdim(family) if not isinstance(family, float) else family
    denom = n * math.log(lam_hat) - d_hat
    if denom <= 0.0:
        raise DomainError(f"n log lambda = {n * math.log(lam_hat):.4g} <= D = {d_hat:.4g}; bound vacuous")
    w = d_hat / denom
    return (max(0.0, s - w), min(1.0, s + w))


class FamilyMeasure:
    """Markov word measure over a finite cylinder family of common depth."""

    def __init__(self, scheme: InducedScheme, family: tuple[Cylinder, ...]):
        if not family:
            raise DomainError("empty family")
        n = family[0].n
        if any(a.n != n for a in family):
            raise DomainError("family members must share a common depth")
        self.scheme = scheme
        self.family = tuple(family)
        self.depth = n
        self.s = vdim(family)
        logs = np.array([a.log_len for a in family])
        self.log_w = self.s * logs
        self.log_lengths = logs
        base = np.array([a.base_comp for a in family])
        image = np.array([a.image_comp for a in family])
        self.base_comps = sorted(set(int(b) for b in base))
        image_set = sorted(set(int(i) for i in image))
        missing = [c for c in image_set if c not in self.base_comps]
        if missing:
            raise InfeasibleError(
                f"family is not closed: image components {missing} have no continuation"
            )
        bigs = sorted({a.image_big for a in family})
        if bigs != list(range(scheme.L)):
            raise InfeasibleError(
                f"family images cover big images {bigs}, need all of 0..{scheme.L - 1}"
            )
        self.by_base = {c: np.nonzero(base == c)[0] for c in self.base_comps}
        self.logZ = {c: _lse(self.log_w[idx]) for c, idx in self.by_base.items()}
        ztot = _lse(np.array([self.logZ[c] for c in self.base_comps]))
        self.log_start = {c: self.logZ[c] - ztot for c in self.base_comps}
        self.e_hat: float | None = None

    # -- one-step transition data ------------------------------------------
    def step_log_prob(self, k: int) -> float:
        """log( w_k / Z_{base(k)} ) for family member k."""
        return float(self.log_w[k] - self.logZ[self.family[k].base_comp])

    def word_log_measure(self, idxs) -> float:
        """Exact log-measure of a block word given by family member indices."""
        if len(idxs) == 0:
            return 0.0
        first = self.family[idxs[0]]
        total = self.log_start[first.base_comp]
        prev = None
        for k in idxs:
            a = self.family[k]
            if prev is not None and prev.image_comp != a.base_comp:
                raise DomainError("inadmissible block word")
            total += self.step_log_prob(k)
            prev = a
        return total

    def continuation_indices(self, comp: int) -> np.ndarray:
        return self.by_base[comp]

    def sample_indices(self, rng, ell: int) -> list[int]:
        """ell family indices drawn from the Markov chain (seeded rng)."""
        comps = self.base_comps
        p0 = np.exp(np.array([self.log_start[c] for c in comps]))
        p0 /= p0.sum()
        comp = comps[int(rng.choice(len(comps), p=p0))]
        out = []
        for _ in range(ell):
            idx = self.by_base[comp]
            p = np.exp(self.log_w[idx] - self.logZ[comp])
            p /= p.sum()
            k = int(idx[int(rng.choice(len(idx), p=p))])
            out.append(k)
            comp = self.family[k].image_comp
        return out

    def stationary_local_dim(self) -> float:
        """Asymptotic log m / log|.| of the chain (entropy over Lyapunov ratio)."""
        comps = self.base_comps
        k = len(comps)
        pos = {c: i for i, c in enumerate(comps)}
        P = np.zeros((k, k))
        h = np.zeros(k)
        chi = np.zeros(k)
        for c in comps:
            idx = self.by_base[c]
            p = np.exp(self.log_w[idx] - self.logZ[c])
            for w, kk in zip(p, idx):
                a = self.family[int(kk)]
                P[pos[c], pos[a.image_comp]] += w
                h[pos[c]] += -w * (self.log_w[int(kk)] - self.logZ[c])
                chi[pos[c]] += -w * a.log_len
        pi = np.full(k, 1.0 / k)
        for _ in range(500):
            nxt = pi @ P
            if np.abs(nxt - pi).max() < 1e-14:
                pi = nxt
                break
            pi = nxt
        pi = pi / pi.sum()
        return float((pi @ h) / (pi @ chi))

    def block_cylinder(self, idxs) -> Cylinder:
        syms = []
        for k in idxs:
            syms.extend(self.family[k].syms)
        return make_word(self.scheme, syms)


def build_measure(scheme: InducedScheme, family) -> FamilyMeasure:
    return FamilyMeasure(scheme, tuple(family))


@dataclass(frozen=True)
class ScanReport:
    ell: int
    samples: int
    min_ratio: float
    max_ratio: float
    e_hat: float
    dim_used: float


def local_dim_scan(measure: FamilyMeasure, ell: int, samples: int,
                   seed: int = 0, dim: float | None = None) -> ScanReport:
    """Sampled log m(a)/log|a| over ell-block words, and the implied deviation
    E_hat = max |log m(a) - dim log|a||."""
    if ell < 1:
        raise DomainError("ell must be >= 1")
    rng = np.random.default_rng(seed)
    dim_used = measure.s if dim is None else dim
    lo, hi, e_hat = math.inf, -math.inf, 0.0
    for _ in range(samples):
        idxs = measure.sample_indices(rng, ell)
        lm = measure.word_log_measure(idxs)
        ll = measure.block_cylinder(idxs).log_len
        r = lm / ll
        lo, hi = min(lo, r), max(hi, r)
        e_hat = max(e_hat, abs(lm - dim_used * ll))
    measure.e_hat = max(measure.e_hat or 0.0, e_hat)
    return ScanReport(ell=ell, samples=samples, min_ratio=lo, max_ratio=hi,
                      e_hat=e_hat, dim_used=dim_used)


def compute_N1(measure: FamilyMeasure, eps: float, lam_hat: float,
               dim: float | None = None) -> tuple[int, bool]:
    """Smallest N1 with E_hat/(N1 log lambda) < eps/2, plus whether the
    dimension margin dim >= 1 - eps/2 holds for the supplied dim estimate."""
    if measure.e_hat is None:
        raise DomainError("run local_dim_scan first so E_hat is measured")
    log_lam = math.log(lam_hat)
    n1 = int(math.floor(2.0 * measure.e_hat / (float(eps) * log_lam))) + 1
    dim_used = measure.s if dim is None else dim
    return max(1, n1), bool(dim_used >= 1.0 - float(eps) / 2.0)


def dimension_report(measure: FamilyMeasure, lam_hat: float, d_hat: float,
                     n1: int | None = None) -> str:
    lo, hi = dim_bounds(measure.s, lam_hat, d_hat, measure.depth) \
        if measure.depth * math.log(lam_hat) > d_hat else (0.0, 1.0)
    doc = {
        "s": measure.s,
        "bounds": [lo, hi],
        "E_hat": measure.e_hat,
        "N1": n1,
        "family_size": len(measure.family),
        "n": measure.depth,
    }
    return json.dumps(doc, sort_keys=True)
