"""Piecewise-monotone full-branch interval maps with neutral fixed points.

Each branch has the closed form x -> x + c * (x - xi)^kappa (sign-preserving
power for non-integer kappa), is strictly increasing, and maps its domain onto
(0, 1).  The neutral fixed points are the xi with f'(xi) = 1; the common tail
exponent is alpha = 1/(kappa - 1).
"""

from __future__ import annotations

import json
import math
from bisect import bisect_right
from dataclasses import dataclass

from .errors import DomainError, MapConstructionError

__all__ = [
    "Branch",
    "MapSpec",
    "AssumptionReport",
    "build_example_map",
    "build_thaler_family",
    "branch_inverse",
    "validate_assumptions",
]

_ENDPOINT_TOL = 1e-12
_FIXED_POINT_TOL = 1e-9


def _spow(u: float, kappa: float) -> float:
    """Sign-preserving power: u^kappa for odd integer kappa, sgn(u)|u|^kappa otherwise."""
    if u >= 0.0:
        return u ** kappa
    return -((-u) ** kappa)


@dataclass(frozen=True)
class Branch:
    """One monotone branch x -> x + c (x - xi)^kappa on [lo, hi]."""

    lo: float
    hi: float
    c: float
    xi: float
    kappa: float

    def __call__(self, x: float) -> float:
        u = x - self.xi
        if self.kappa == 3.0:
            return x + self.c * u * u * u
        return x + self.c * _spow(u, self.kappa)

    def deriv(self, x: float) -> float:
        u = abs(x - self.xi)
        if self.kappa == 3.0:
            return 1.0 + 3.0 * self.c * u * u
        return 1.0 + self.kappa * self.c * u ** (self.kappa - 1.0)

    def second_deriv(self, x: float) -> float:
        u = x - self.xi
        k = self.kappa
        if u >= 0.0:
            return k * (k - 1.0) * self.c * u ** (k - 2.0)
        return -(k * (k - 1.0) * self.c * (-u) ** (k - 2.0))

    def image(self) -> tuple[float, float]:
        return (self(self.lo), self(self.hi))

    def inverse(self, y: float, tol: float = 1e-13, x0: float | None = None) -> float:
        """Solve f(x) = y on [lo, hi] by safeguarded Newton; |f(x)-y| <= tol.

        The result is clamped to the branch domain.  y slightly outside the
        image (within tol) is accepted; anything further raises DomainError.
        A good warm start x0 converges in two or three plain Newton steps.
        """
        lo, hi = self.lo, self.hi
        c, xi = self.c, self.xi
        if self.kappa == 3.0 and x0 is not None and lo < x0 < hi:
            # fast path: unguarded Newton from the warm start
            x = x0
            for _ in range(12):
                u = x - xi
                err = x + c * u * u * u - y
                if -tol <= err <= tol:
                    if x < lo:
                        return lo
                    if x > hi:
                        return hi
                    return x
                x -= err / (1.0 + 3.0 * c * u * u)
                if not (lo - 1e-9 <= x <= hi + 1e-9):
                    break
        flo, fhi = self(lo), self(hi)
        if y < flo - 1e-9 or y > fhi + 1e-9:
            raise DomainError(f"y={y!r} outside branch image [{flo!r}, {fhi!r}]")
        if y <= flo:
            return lo
        if y >= fhi:
            return hi
        a, b = lo, hi
        x = x0 if (x0 is not None and lo < x0 < hi) else 0.5 * (lo + hi)
        for _ in range(80):
            fx = self(x)
            err = fx - y
            if abs(err) <= tol:
                return min(max(x, lo), hi)
            if err > 0.0:
                b = x
            else:
                a = x
            d = self.deriv(x)
            step = err / d
            xn = x - step
            if not (a < xn < b):
                xn = 0.5 * (a + b)
            x = xn
        return min(max(x, lo), hi)


@dataclass(frozen=True)
class MapSpec:
    """An ordered list of full branches partitioning [0,1] modulo endpoints."""

    branches: tuple[Branch, ...]
    alpha: float
    d_prime: int = 0

    def __post_init__(self):
        for br in self.branches:
            kappa_alpha = 1.0 + 1.0 / self.alpha
            if abs(br.kappa - kappa_alpha) > 1e-9:
                raise MapConstructionError(
                    f"branch kappa={br.kappa} inconsistent with alpha={self.alpha}"
                )

    @property
    def d(self) -> int:
        return len(self.branches) - self.d_prime

    @property
    def fixed_points(self) -> list[tuple[float, float, float]]:
        """(xi_j, b_j, alpha) for each neutral fixed point, in branch order."""
        return [(br.xi, br.c, self.alpha) for br in self.branches[: self.d]]

    @property
    def breakpoints(self) -> list[float]:
        return [br.hi for br in self.branches[:-1]]

    def branch_index(self, x: float) -> int:
        """Containing branch; domains are half-open [lo, hi) except the last."""
        if x < 0.0 or x > 1.0:
            raise DomainError(f"x={x!r} outside [0,1]")
        return bisect_right(self.breakpoints, x)

    def __call__(self, x: float) -> float:
        # clamp float noise at full-branch endpoints so orbits stay in [0,1]
        y = self.branches[self.branch_index(x)](x)
        if y < 0.0:
            if y < -1e-10:
                raise DomainError(f"branch evaluation left [0,1]: {y!r}")
            return 0.0
        if y > 1.0:
            if y > 1.0 + 1e-10:
                raise DomainError(f"branch evaluation left [0,1]: {y!r}")
            return 1.0
        return y

    def eval_with_deriv(self, x: float) -> tuple[float, float, int]:
        i = self.branch_index(x)
        br = self.branches[i]
        return br(x), br.deriv(x), i

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "d_prime": self.d_prime,
            "branches": [
                {"lo": br.lo, "hi": br.hi, "c": br.c, "xi": br.xi, "kappa": br.kappa}
                for br in self.branches
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, doc: dict) -> "MapSpec":
        branches = tuple(
            Branch(b["lo"], b["hi"], b["c"], b["xi"], b["kappa"]) for b in doc["branches"]
        )
        spec = cls(branches=branches, alpha=doc["alpha"], d_prime=doc.get("d_prime", 0))
        _check_branch_geometry(spec)
        return spec

    @classmethod
    def from_json(cls, text: str) -> "MapSpec":
        return cls.from_dict(json.loads(text))


def _check_branch_geometry(spec: MapSpec) -> None:
    prev_hi = 0.0
    for br in spec.branches:
        if abs(br.lo - prev_hi) > _ENDPOINT_TOL:
            raise MapConstructionError("branch domains do not partition [0,1]")
        prev_hi = br.hi
        flo, fhi = br.image()
        for v in (flo, fhi):
            if min(abs(v), abs(v - 1.0)) > 1e-10:
                raise MapConstructionError(f"branch image endpoint {v!r} not in {{0,1}}")
    if abs(prev_hi - 1.0) > _ENDPOINT_TOL:
        raise MapConstructionError("branch domains do not cover [0,1]")
    for xi, b, _alpha in spec.fixed_points:
        br = spec.branches[spec.branch_index(min(xi, 1.0))]
        if abs(br(xi) - xi) > _FIXED_POINT_TOL or abs(br.deriv(xi) - 1.0) > _FIXED_POINT_TOL:
            raise MapConstructionError(f"xi={xi!r} is not a neutral fixed point")


def build_example_map() -> MapSpec:
    """The 3-branch cubic map with c = (18, 72, 18) and neutral points 0, 1/2, 1."""
    third = 1.0 / 3.0
    branches = (
        Branch(0.0, third, 18.0, 0.0, 3.0),
        Branch(third, 2.0 * third, 72.0, 0.5, 3.0),
        Branch(2.0 * third, 1.0, 18.0, 1.0, 3.0),
    )
    return MapSpec(branches=branches, alpha=0.5)


def build_thaler_family(d: int, kappa: float) -> MapSpec:
    """Full-branch map with d equal-width increasing branches, one neutral point each.

    Coefficients (and interior fixed-point locations) are forced by the
    full-branch conditions f(l_i) = 0, f(r_i) = 1.  Requires kappa > 2 so that
    alpha = 1/(kappa - 1) lies in (0, 1).
    """
    if d < 2:
        raise MapConstructionError(f"need d >= 2 branches, got {d}")
    alpha = 1.0 / (kappa - 1.0)
    if not (0.0 < alpha < 1.0):
        raise MapConstructionError(f"kappa={kappa} gives alpha={alpha}, not in (0,1)")
    w = 1.0 / d
    branches = []
    for i in range(d):
        l, r = i * w, (i + 1) * w
        if i == 0:
            # f(0) = 0 forces xi = 0; f(w) = 1 fixes c.
            xi = 0.0
            c = (1.0 - r) / (r ** kappa)
        elif i == d - 1:
            xi = 1.0
            c = l / ((xi - l) ** kappa)
        else:
            # Interior branch: f(l) = 0 and f(r) = 1 give two equations for (c, xi).
            t = (l / (1.0 - r)) ** (1.0 / kappa)
            xi = (l + r * t) / (1.0 + t)
            c = l / ((xi - l) ** kappa)
        branches.append(Branch(l, r, c, xi, kappa))
    spec = MapSpec(branches=tuple(branches), alpha=alpha)
    _check_branch_geometry(spec)
    return spec


def branch_inverse(spec: MapSpec, branch: int, y: float, tol: float = 1e-13) -> float:
    """Preimage of y under the given branch (safeguarded bisection/Newton)."""
    return spec.branches[branch].inverse(y, tol=tol)


@dataclass(frozen=True)
class AssumptionReport:
    min_deriv_outside: float
    adler_sup: tuple[float, ...]
    adler_sup_refined: tuple[float, ...]
    endpoint_residuals: tuple[float, ...]
    expansion_ok: bool
    adler_ok: bool
    full_branch_ok: bool

    @property
    def ok(self) -> bool:
        return self.expansion_ok and self.adler_ok and self.full_branch_ok


def validate_assumptions(
    spec: MapSpec, grid: int = 4096, xi_exclusion: float = 1e-3
) -> AssumptionReport:
    """Sampled checks of uniform expansion off the fixed points, Adler's
    distortion condition, and the full-branch endpoint conditions."""
    xis = [fp[0] for fp in spec.fixed_points]

    def scan(n: int):
        min_d = math.inf
        sups = []
        for br in spec.branches:
            sup = 0.0
            for k in range(1, n):
                x = br.lo + (br.hi - br.lo) * k / n
                d1 = br.deriv(x)
                sup = max(sup, abs(br.second_deriv(x)) / (d1 * d1))
                if all(abs(x - xi) > xi_exclusion for xi in xis):
                    min_d = min(min_d, d1)
            sups.append(sup)
        return min_d, tuple(sups)

    min_deriv, sups = scan(grid)
    _, sups2 = scan(2 * grid)
    residuals = []
    for br in spec.branches:
        flo, fhi = br.image()
        residuals.append(min(abs(flo), abs(flo - 1.0)))
        residuals.append(min(abs(fhi), abs(fhi - 1.0)))
    stable = all(
        s2 <= 1.10 * s1 + 1e-9 for s1, s2 in zip(sups, sups2)
    )
    return AssumptionReport(
        min_deriv_outside=min_deriv,
        adler_sup=sups,
        adler_sup_refined=sups2,
        endpoint_residuals=tuple(residuals),
        expansion_ok=min_deriv > 1.0,
        adler_ok=all(map(math.isfinite, sups2)) and stable,
        full_branch_ok=max(residuals) <= _ENDPOINT_TOL,
    )
