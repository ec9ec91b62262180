"""Bump families, Young functions with Luxemburg norms, and the bump
constants built from them.

A bump spec carries a V-shaped function psi (decreasing on (0,1),
increasing on (1,inf)) and an increasing function phi on [1,inf).
Admissibility certifies monotonicity on a geometric grid, finiteness of
the dyadic tail sums S_psi and S_phi, and the growth guard
psi(t) <= C * exp(sqrt(t)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .dyadic import CubeId, DomainError, NumericError, SparseFamily, WeightPair

_E = math.e
_EE = math.exp(math.e)

# dyadic tail sums: direct summation range and the shorter range quoted
# in reports; the hard lemma bounds only need the direct part to cover
# every realizable sigma_Q block
TAIL_DIRECT_K = 512
TAIL_CORE_K = 64


class AdmissibilityError(ValueError):
    """A bump or Young spec failed a certification check."""


# -- psi / phi families -----------------------------------------------------


def _loglog(x):
    return np.log(np.log(x))


def _psi_lower(t, eps):
    # shared small-t branch: log(e + 1/t) * loglog^{1+eps}(e^e + 1/t)
    inv = 1.0 / t
    return np.log(_E + inv) * _loglog(_EE + inv) ** (1.0 + eps)


def _psi_upper(t, eps, family):
    if family == "log_power":
        return np.log(_E + t) ** (1.0 + eps)
    return np.log(_E + t) * _loglog(_EE + t) ** (1.0 + eps)


@dataclass(frozen=True)
class BumpSpec:
    """psi/phi families with eagerly certified admissibility.

    psi_family, phi_family: "log_power" or "log_loglog"; "custom" uses
    the corresponding callable field (vectorized, t > 0 resp. t >= 1).
    """

    psi_family: str = "log_power"
    psi_eps: float = 1.0
    phi_family: str = "log_loglog"
    phi_eps: float = 1.0
    psi_fn: object = None
    phi_fn: object = None

    def psi(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t <= 0.0):
            raise DomainError("psi requires t > 0")
        if self.psi_family == "custom":
            out = np.asarray(self.psi_fn(t), dtype=float)
        else:
            out = np.where(t < 1.0,
                           _psi_lower(np.maximum(t, 1e-300), self.psi_eps),
                           _psi_upper(np.maximum(t, 1.0), self.psi_eps, self.psi_family))
        return float(out) if out.ndim == 0 else out

    def phi(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t < 1.0):
            raise DomainError("phi requires t >= 1")
        if self.phi_family == "custom":
            out = np.asarray(self.phi_fn(t), dtype=float)
        elif self.phi_family == "log_power":
            out = np.log(_E + t) ** (1.0 + self.phi_eps)
        else:
            out = np.log(_E + t) * _loglog(_EE + t) ** (1.0 + self.phi_eps)
        return float(out) if out.ndim == 0 else out

    def nu_p(self, p, t):
        """psi(t)*phi^{p-1}(psi(t)) below 1, psi(t) at and above 1."""
        if not 1.0 < p < math.inf:
            raise DomainError(f"p must lie in (1, inf), got {p}")
        t = np.asarray(t, dtype=float)
        ps = np.asarray(self.psi(t), dtype=float)
        lower = t < 1.0
        if np.any(lower):
            out = np.where(lower, ps * np.asarray(self.phi(np.where(lower, ps, 1.0)),
                                                  dtype=float) ** (p - 1.0), ps)
        else:
            out = ps
        return float(out) if np.ndim(out) == 0 else out

    def to_json_dict(self) -> dict:
        return {"psi": {"family": self.psi_family, "eps": self.psi_eps},
                "phi": {"family": self.phi_family, "eps": self.phi_eps}}

    @staticmethod
    def from_json_dict(data: dict) -> "BumpSpec":
        return BumpSpec(psi_family=data["psi"]["family"], psi_eps=float(data["psi"]["eps"]),
                        phi_family=data["phi"]["family"], phi_eps=float(data["phi"]["eps"]))


@dataclass
class AdmissibilityReport:
    ok: bool
    reasons: list
    s_psi: float
    s_phi: float
    growth_c: float
    psi_star: dict  # k -> inf of psi over (2^k, 2^{k+1}], for |k| <= TAIL_DIRECT_K


def _tail_converges(u):
    """Decide summability of a positive decreasing tail sequence u[k],
    k = 1..K, sampled at dyadic arguments.  Two tiers: k*u_k must decay
    (separates the harmonic boundary), and dyadic block sums must shrink."""
    K = len(u)
    if K < 16:
        return True  # nothing to certify on a short tail
    kk = np.arange(1, K + 1, dtype=float)
    v = kk * np.asarray(u)
    i_hi, i_lo = K - 1, K // 4 - 1
    if v[i_lo] <= 0:
        return True
    if v[i_hi] / v[i_lo] > 0.7:
        return False
    return True


def _tail_extrapolate(u):
    """Geometric/power extrapolation beyond the directly summed range."""
    K = len(u)
    if K < 8 or u[-1] <= 0:
        return 0.0
    ratio = u[K - 1] / u[K // 2 - 1]
    if ratio <= 0 or ratio >= 1:
        return 0.0
    alpha = -math.log(ratio) / math.log(2.0)
    if alpha <= 1.0:
        return 0.0
    return u[-1] * K / (alpha - 1.0)


def check_bump(spec: BumpSpec) -> AdmissibilityReport:
    reasons = []
    grid_k = np.arange(1, 41, dtype=float)
    # monotonicity: decreasing on (0,1), increasing on (1,inf)
    t_small = 2.0 ** (-grid_k)  # decreasing t: 1/2, 1/4, ...
    psi_small = np.asarray(spec.psi(t_small))
    if np.any(np.diff(psi_small) < -1e-12 * np.abs(psi_small[:-1])):
        reasons.append("psi not decreasing on (0,1)")
    t_big = 2.0 ** grid_k
    psi_big = np.asarray(spec.psi(t_big))
    if np.any(np.diff(psi_big) < -1e-12 * np.abs(psi_big[:-1])):
        reasons.append("psi not increasing on (1,inf)")
    phi_big = np.asarray(spec.phi(t_big))
    if np.any(np.diff(phi_big) < -1e-12 * np.abs(phi_big[:-1])):
        reasons.append("phi not increasing on (1,inf)")

    # psi_star(2^k) = inf of psi over the block (2^k, 2^{k+1}]; for the
    # straddling block k = -1 the one-sided limit at t -> 1- is included
    ks = np.arange(-TAIL_DIRECT_K, TAIL_DIRECT_K + 1)
    pw = np.asarray(spec.psi(2.0 ** ks.astype(float)))
    star = np.minimum(pw[:-1], pw[1:])
    straddle = np.where(ks[:-1] == -1)[0]
    if straddle.size:
        star[straddle[0]] = min(star[straddle[0]], float(spec.psi(1.0 - 1e-12)))
    psi_star = {int(k): float(s) for k, s in zip(ks[:-1], star)}

    inv = 1.0 / star
    # split into the two monotone tails (u increasing toward k = +-inf in psi
    # means 1/psi decreasing)
    mid = np.where(ks[:-1] == 0)[0][0]
    tail_pos = inv[mid:][::1]
    tail_neg = inv[:mid][::-1]
    if not _tail_converges(tail_neg):
        reasons.append("S_psi diverges on (0,1) (dyadic tail fails decay check)")
    if not _tail_converges(tail_pos):
        reasons.append("S_psi diverges on (1,inf) (dyadic tail fails decay check)")
    s_psi = float(np.sum(inv) + _tail_extrapolate(tail_neg) + _tail_extrapolate(tail_pos))

    kphi = np.arange(0, TAIL_DIRECT_K + 1, dtype=float)
    uphi = 1.0 / np.asarray(spec.phi(2.0 ** kphi))
    if not _tail_converges(uphi):
        reasons.append("S_phi diverges (dyadic tail fails decay check)")
    s_phi = float(np.sum(uphi) + _tail_extrapolate(uphi))

    # growth guard psi(t) <= C exp(sqrt(t)) on [1, 2^40], computed in logs
    log_excess = np.log(psi_big) - np.sqrt(t_big)
    growth_c = float(np.exp(max(np.max(log_excess), math.log(spec.psi(1.0)) - 1.0)))

    return AdmissibilityReport(ok=not reasons, reasons=reasons, s_psi=s_psi,
                               s_phi=s_phi, growth_c=growth_c, psi_star=psi_star)


_admissibility_cache: dict = {}


def ensure_admissible(spec: BumpSpec) -> AdmissibilityReport:
    key = (spec.psi_family, spec.psi_eps, spec.phi_family, spec.phi_eps,
           id(spec.psi_fn), id(spec.phi_fn))
    report = _admissibility_cache.get(key)
    if report is None:
        report = check_bump(spec)
        _admissibility_cache[key] = report
    if not report.ok:
        raise AdmissibilityError("; ".join(report.reasons))
    return report


# -- Young functions --------------------------------------------------------


@dataclass(frozen=True)
class YoungSpec:
    """Young function A, normalized so A(1) = 1 where the family allows.

    family: "power" (A(t) = t^q), "power_over_log"
    (A(t) = t^q * (log(e+1)/log(e+t))^{1+eps}), or "custom" with a
    vectorized callable.
    """

    family: str = "power"
    q: float = 2.0
    eps: float = 1.0
    fn: object = None

    def A(self, t):
        t = np.asarray(t, dtype=float)
        if self.family == "power":
            out = t ** self.q
        elif self.family == "power_over_log":
            out = t ** self.q * (math.log(_E + 1.0) / np.log(_E + t)) ** (1.0 + self.eps)
        elif self.family == "custom":
            out = np.asarray(self.fn(t), dtype=float)
        else:
            raise DomainError(f"unknown Young family {self.family!r}")
        return float(out) if out.ndim == 0 else out

    def to_json_dict(self) -> dict:
        return {"family": self.family, "q": self.q, "eps": self.eps}

    @staticmethod
    def from_json_dict(data: dict) -> "YoungSpec":
        return YoungSpec(family=data["family"], q=float(data.get("q", 2.0)),
                         eps=float(data.get("eps", 1.0)))


@dataclass
class YoungReport:
    ok: bool
    reasons: list


def check_young(young: YoungSpec) -> YoungReport:
    reasons = []
    ts = np.concatenate(([0.0], np.geomspace(2.0 ** -40, 2.0 ** 40, 2001)))
    vals = np.asarray(young.A(ts))
    if abs(vals[0]) > 1e-12:
        reasons.append("A(0) != 0")
    if np.any(np.diff(vals) < -1e-12 * np.abs(vals[:-1])):
        reasons.append("A not increasing")
    slopes = np.diff(vals) / np.diff(ts)
    rel = np.diff(slopes) / np.maximum(slopes[1:], 1e-300)
    if np.min(rel) < -1e-9:
        reasons.append("A not convex on the geometric grid")
    return YoungReport(ok=not reasons, reasons=reasons)


def ensure_young(young: YoungSpec) -> None:
    report = check_young(young)
    if not report.ok:
        raise AdmissibilityError("; ".join(report.reasons))


def young_conjugate(young: YoungSpec, s: float) -> float:
    """Legendre conjugate Abar(s) = sup_t (s*t - A(t))."""
    if s < 0:
        raise DomainError("conjugate argument must be nonnegative")
    if s == 0.0:
        return 0.0
    if young.family == "power":
        q = young.q
        qd = q / (q - 1.0)
        return float((q - 1.0) * (s / q) ** qd)
    # ternary search on log t; s*t - A(t) is concave in t for convex A
    lo, hi = -60.0 * math.log(2.0), 60.0 * math.log(2.0)

    def obj(u):
        t = math.exp(u)
        return s * t - float(young.A(t))

    for _ in range(200):
        m1 = lo + (hi - lo) / 3.0
        m2 = hi - (hi - lo) / 3.0
        if obj(m1) < obj(m2):
            lo = m1
        else:
            hi = m2
        if hi - lo < 1e-13:
            break
    val = max(obj(0.5 * (lo + hi)), 0.0)
    if not math.isfinite(val):
        raise NumericError("conjugate supremum overflowed")
    return val


class ConjugateTable:
    """Abar tabulated on a 512-point log grid with monotone log-log
    interpolation; evaluating the ternary search per leaf per cube is too
    slow inside search loops."""

    def __init__(self, young: YoungSpec, points: int = 512):
        self.young = young
        self.log_s = np.linspace(-60.0 * math.log(2.0), 60.0 * math.log(2.0), points)
        vals = np.array([young_conjugate(young, math.exp(u)) for u in self.log_s])
        vals = np.maximum.accumulate(vals)
        self.log_v = np.log(np.maximum(vals, 1e-300))

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        out = np.zeros_like(s)
        pos = s > 0
        u = np.log(np.maximum(s, 1e-300))
        lv = np.interp(u, self.log_s, self.log_v)
        # linear extrapolation in log-log space beyond the grid
        hi = u > self.log_s[-1]
        if np.any(hi):
            slope = (self.log_v[-1] - self.log_v[-2]) / (self.log_s[-1] - self.log_s[-2])
            lv = np.where(hi, self.log_v[-1] + slope * (u - self.log_s[-1]), lv)
        out[pos] = np.exp(lv[pos])
        return float(out) if out.ndim == 0 else out


@lru_cache(maxsize=32)
def _conjugate_table(young: YoungSpec) -> ConjugateTable:
    return ConjugateTable(young)


def bp_integral(young: YoungSpec, p: float) -> float:
    """int_1^inf A(t)/t^p dt/t over dyadic blocks up to 2^40 plus a tail
    estimate; returns +inf when the block sums fail the decay check."""
    if not p > 1.0:
        raise DomainError(f"p must exceed 1, got {p}")
    nodes, weights = np.polynomial.legendre.leggauss(64)
    blocks = []
    for j in range(40):
        a, b = j * math.log(2.0), (j + 1) * math.log(2.0)
        u = 0.5 * (b - a) * nodes + 0.5 * (a + b)  # u = log t
        t = np.exp(u)
        integrand = np.asarray(young.A(t)) / t ** p  # dt/t absorbed by u-substitution
        blocks.append(float(0.5 * (b - a) * np.sum(weights * integrand)))
    blocks = np.array(blocks)
    jj = np.arange(1, 41, dtype=float)
    v = jj * blocks
    if v[9] > 0 and v[39] / v[9] > 0.7:
        return math.inf
    total = float(np.sum(blocks))
    total += bp_tail_estimate(blocks)
    return total


def bp_tail_estimate(blocks) -> float:
    """Tail beyond the last dyadic block: geometric extrapolation when the
    block ratio is stable, else a power-law fit in the block index."""
    blocks = np.asarray(blocks, dtype=float)
    if blocks[-1] <= 0:
        return 0.0
    r1 = blocks[-1] / blocks[-2] if blocks[-2] > 0 else 0.0
    r2 = blocks[-2] / blocks[-3] if blocks[-3] > 0 else 0.0
    if 0 < r1 < 0.97 and abs(r1 - r2) < 0.02:
        return float(blocks[-1] * r1 / (1.0 - r1))
    if blocks[19] > blocks[-1]:
        alpha = math.log(blocks[19] / blocks[-1]) / math.log(2.0)
        if alpha > 1.0:
            return float(blocks[-1] * len(blocks) / (alpha - 1.0))
    return 0.0


# -- Luxemburg norms --------------------------------------------------------


def _mean_A(young: YoungSpec, f: np.ndarray, lam):
    return np.mean(np.asarray(young.A(f / lam)))


def luxemburg_norm(f, cube: CubeId, young: YoungSpec, depth: int,
                   rel_tol: float = 1e-12) -> float:
    """Normalized Luxemburg gauge on one cube: the lambda with
    (1/|Q|) int_Q A(f/lambda) = 1, by bracketing plus bisection."""
    f = np.asarray(f, dtype=float)
    if not np.isfinite(f).all():
        raise DomainError("non-finite leaf values")
    sub = f[cube.leaf_slice(depth)]
    if np.all(sub == 0.0):
        return 0.0
    hi = float(np.max(np.abs(sub)))
    lo = hi
    # grow/shrink the bracket so that mean A(f/hi) <= 1 <= mean A(f/lo)
    for _ in range(200):
        if _mean_A(young, sub, hi) <= 1.0:
            break
        hi *= 2.0
    for _ in range(200):
        if _mean_A(young, sub, lo) >= 1.0:
            break
        lo *= 0.5
    for _ in range(200):
        mid = math.sqrt(lo * hi)
        if _mean_A(young, sub, mid) > 1.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= rel_tol * lo:
            break
    return 0.5 * (lo + hi)


def luxemburg_norms_level(f, level: int, young: YoungSpec, depth: int,
                          A_fn=None, rel_tol: float = 1e-12) -> np.ndarray:
    """Luxemburg norms of f on every cube of one level, vectorized
    bisection across cubes.  A_fn overrides young.A (used for the
    tabulated conjugate)."""
    f = np.asarray(f, dtype=float)
    if not np.isfinite(f).all():
        raise DomainError("non-finite leaf values")
    A = A_fn if A_fn is not None else young.A
    mat = f.reshape(1 << level, -1)
    hi = np.max(np.abs(mat), axis=1)
    zero = hi == 0.0
    hi = np.where(zero, 1.0, hi)
    lo = hi.copy()

    def means(lam):
        return np.mean(np.asarray(A(mat / lam[:, None])), axis=1)

    for _ in range(200):
        m = means(hi)
        grow = m > 1.0
        if not np.any(grow):
            break
        hi = np.where(grow, hi * 2.0, hi)
    for _ in range(200):
        m = means(lo)
        shrink = m < 1.0
        if not np.any(shrink):
            break
        lo = np.where(shrink, lo * 0.5, lo)
    for _ in range(200):
        mid = np.sqrt(lo * hi)
        m = means(mid)
        lo = np.where(m > 1.0, mid, lo)
        hi = np.where(m > 1.0, hi, mid)
        if np.all(hi - lo <= rel_tol * lo):
            break
    out = 0.5 * (lo + hi)
    out[zero] = 0.0
    return out


# -- cube iteration helper --------------------------------------------------


def _cube_averages(pair: WeightPair, cubes):
    """(cube list, w averages, sigma averages) for "all" or a SparseFamily."""
    if cubes == "all" or cubes is None:
        cube_list = list(pair.geometry.cubes())
        w = np.concatenate([pair.w_avg_level(l) for l in range(pair.geometry.depth + 1)])
        s = np.concatenate([pair.sigma_avg_level(l) for l in range(pair.geometry.depth + 1)])
        return cube_list, w, s
    if isinstance(cubes, SparseFamily):
        cube_list = cubes.sorted_cubes()
    else:
        cube_list = sorted(cubes)
    w = np.array([pair.w_avg(c) for c in cube_list])
    s = np.array([pair.sigma_avg(c) for c in cube_list])
    return cube_list, w, s


# -- bump constants ---------------------------------------------------------


def ap_constant(pair: WeightPair, cubes="all") -> float:
    """sup_Q w_Q * sigma_Q^{p-1} over the requested cube set."""
    _, w, s = _cube_averages(pair, cubes)
    return float(np.max(w * s ** (pair.p - 1.0)))


def nu_constant(pair: WeightPair, spec: BumpSpec, cubes="all") -> float:
    """sup_Q w_Q * sigma_Q^{p-1} * nu_p(sigma_Q)."""
    ensure_admissible(spec)
    _, w, s = _cube_averages(pair, cubes)
    return float(np.max(w * s ** (pair.p - 1.0) * np.asarray(spec.nu_p(pair.p, s))))


def nu_lambda_table(pair: WeightPair, spec: BumpSpec, cubes="all") -> dict:
    """lambda_Q = psi(sigma_Q); the Theorem-route lambda table."""
    cube_list, _, s = _cube_averages(pair, cubes)
    vals = np.asarray(spec.psi(s))
    return dict(zip(cube_list, vals.tolist()))


def _phi_clamped(spec: BumpSpec, x):
    # bump-constant formulas evaluate phi at lambda values that can dip
    # below 1 numerically; phi is extended by its value at 1
    return spec.phi(np.maximum(np.asarray(x, dtype=float), 1.0))


def orlicz_li_constant(pair: WeightPair, young: YoungSpec, spec: BumpSpec,
                       cubes="all"):
    """sup_Q w_Q^{1/p} * (sigma_Q / ||sigma^{1/p}||_{A,Q})
    * phi^{1/p'}(sigma_Q / ||sigma^{1/p}||_{A,Q}^p).

    Returns (value, lambda table) with lambda_Q = sigma_Q / ||.||^p."""
    ensure_admissible(spec)
    if not math.isfinite(bp_integral(young, pair.p)):
        raise AdmissibilityError("Young function is not in B_p")
    p, depth = pair.p, pair.geometry.depth
    froot = pair.sigma_leaves ** (1.0 / p)
    if cubes == "all" or cubes is None:
        norms = {}
        for level in range(depth + 1):
            ns = luxemburg_norms_level(froot, level, young, depth)
            for j, v in enumerate(ns):
                norms[CubeId(level, int(j))] = float(v)
        cube_list, w, s = _cube_averages(pair, "all")
    else:
        cube_list, w, s = _cube_averages(pair, cubes)
        norms = {c: luxemburg_norm(froot, c, young, depth) for c in cube_list}
    nvec = np.array([norms[c] for c in cube_list])
    lam = s / nvec ** p
    terms = w ** (1.0 / p) * (s / nvec) * _phi_clamped(spec, lam) ** (1.0 / pair.p_dual)
    return float(np.max(terms)), dict(zip(cube_list, lam.tolist()))


def orlicz_lacey_constant(pair: WeightPair, young: YoungSpec, spec: BumpSpec,
                          cubes="all"):
    """sup_Q w_Q^{1/p} * ||sigma^{1/p'}||_{Abar,Q}
    * phi^{1/p'}(||sigma^{1/p'}||_{Abar,Q}^p / sigma_Q^{p-1})."""
    ensure_admissible(spec)
    if not math.isfinite(bp_integral(young, pair.p)):
        raise AdmissibilityError("Young function is not in B_p")
    p, depth = pair.p, pair.geometry.depth
    abar = _conjugate_table(young)
    fdual = pair.sigma_leaves ** (1.0 / pair.p_dual)
    if cubes == "all" or cubes is None:
        norms = {}
        for level in range(depth + 1):
            ns = luxemburg_norms_level(fdual, level, young, depth, A_fn=abar)
            for j, v in enumerate(ns):
                norms[CubeId(level, int(j))] = float(v)
        cube_list, w, s = _cube_averages(pair, "all")
    else:
        cube_list, w, s = _cube_averages(pair, cubes)
        norms = {c: _luxemburg_with_fn(fdual, c, abar, depth) for c in cube_list}
    nvec = np.array([norms[c] for c in cube_list])
    lam = nvec ** p / s ** (p - 1.0)
    terms = w ** (1.0 / p) * nvec * _phi_clamped(spec, lam) ** (1.0 / pair.p_dual)
    return float(np.max(terms)), dict(zip(cube_list, lam.tolist()))


def _luxemburg_with_fn(f, cube: CubeId, A_fn, depth: int,
                       rel_tol: float = 1e-12) -> float:
    sub = np.asarray(f, dtype=float)[cube.leaf_slice(depth)]
    if np.all(sub == 0.0):
        return 0.0
    hi = float(np.max(np.abs(sub)))
    lo = hi
    mean = lambda lam: float(np.mean(np.asarray(A_fn(sub / lam))))
    for _ in range(200):
        if mean(hi) <= 1.0:
            break
        hi *= 2.0
    for _ in range(200):
        if mean(lo) >= 1.0:
            break
        lo *= 0.5
    for _ in range(200):
        mid = math.sqrt(lo * hi)
        if mean(mid) > 1.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= rel_tol * lo:
            break
    return 0.5 * (lo + hi)


def sepcon_constant(pair: WeightPair, young: YoungSpec, cubes="all") -> float:
    """Right side of the separated-bump conjecture:
    sup_Q w_Q^{1/p} * ||sigma^{1/p'}||_{Abar,Q}."""
    p, depth = pair.p, pair.geometry.depth
    abar = _conjugate_table(young)
    fdual = pair.sigma_leaves ** (1.0 / pair.p_dual)
    if cubes == "all" or cubes is None:
        best = 0.0
        cube_list, w, _ = _cube_averages(pair, "all")
        norms = []
        for level in range(depth + 1):
            norms.append(luxemburg_norms_level(fdual, level, young, depth, A_fn=abar))
        nvec = np.concatenate(norms)
    else:
        cube_list, w, _ = _cube_averages(pair, cubes)
        nvec = np.array([_luxemburg_with_fn(fdual, c, abar, depth) for c in cube_list])
    return float(np.max(w ** (1.0 / p) * nvec))


# -- dyadic maximal function and entropy bumps ------------------------------


def dyadic_maximal(sigma_leaves, cube: CubeId, geometry) -> np.ndarray:
    """Leaf values of max over dyadic Q' with leaf in Q' subset of Q of
    sigma_{Q'}, restricted to Q; one top-down pass."""
    from .dyadic import _mass_pyramid
    s = np.asarray(sigma_leaves, dtype=float)
    depth = geometry.depth
    masses = _mass_pyramid(s, depth)
    width = 1 << (depth - cube.level)
    running = np.full(width, masses[cube.level][cube.index] * 2.0 ** cube.level)
    for level in range(cube.level + 1, depth + 1):
        avgs = masses[level] * 2.0 ** level
        seg = avgs[cube.index << (level - cube.level):(cube.index + 1) << (level - cube.level)]
        running = np.maximum(running, np.repeat(seg, 1 << (depth - level)))
    return running


def entropy_lambda(sigma_leaves, cube: CubeId, geometry) -> float:
    """int_Q M(sigma chi_Q) / sigma(Q); always >= 1."""
    m = dyadic_maximal(sigma_leaves, cube, geometry)
    depth = geometry.depth
    integral = float(np.sum(m)) * 2.0 ** (-depth)
    s = np.asarray(sigma_leaves, dtype=float)
    mass = float(np.sum(s[cube.leaf_slice(depth)])) * 2.0 ** (-depth)
    return integral / mass


def entropy_lambda_table(pair: WeightPair, cubes="all") -> dict:
    cube_list, _, _ = _cube_averages(pair, cubes)
    geometry = pair.geometry
    return {c: entropy_lambda(pair.sigma_leaves, c, geometry) for c in cube_list}


def entropy_constant(pair: WeightPair, spec: BumpSpec, cubes="all") -> float:
    """sup_Q w_Q^{1/p} * sigma_Q^{1/p'} * lambda_Q^{1/p} * phi(lambda_Q)
    with the entropy lambda."""
    ensure_admissible(spec)
    cube_list, w, s = _cube_averages(pair, cubes)
    lam = np.array([entropy_lambda(pair.sigma_leaves, c, pair.geometry)
                    for c in cube_list])
    p = pair.p
    terms = w ** (1.0 / p) * s ** (1.0 / pair.p_dual) * lam ** (1.0 / p) \
        * np.asarray(_phi_clamped(spec, lam))
    return float(np.max(terms))


def maximal_bound_constant(pair: WeightPair, spec: BumpSpec, cubes="all") -> float:
    """sup_Q w_Q^{1/p} * sigma_Q^{1/p'} * psi(sigma_Q)^{1/p}."""
    ensure_admissible(spec)
    _, w, s = _cube_averages(pair, cubes)
    p = pair.p
    terms = w ** (1.0 / p) * s ** (1.0 / pair.p_dual) * np.asarray(spec.psi(s)) ** (1.0 / p)
    return float(np.max(terms))
