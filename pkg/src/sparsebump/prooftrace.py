"""Executable inequality chains with explicit tracked constants.

Both traces bound the testing sum

    lhs_total = sum_{Q in S, Q ⊆ R} |Q|^{q alpha/d} <sigma>_Q^q w(Q)

in three stages: (i) regroup the sum exactly by dyadic strata of a key
quantity (rho(Q; sigma) for the entropy chain, <sigma>_Q for the direct
chain) and by the maximal cubes of each stratum; (ii) bound each inner sum
by C^q * (2/(1-lambda)) * sigma(Q*)^{q/p} / eps_floor(a), where C is the
matching bump constant and eps_floor(a) is the infimum of eps over the
bucket [2^a, 2^{a+1}); (iii) sum the strata with disjointness of the
maximal cubes and superadditivity of x -> x^{q/p} to reach

    lhs_total <= (2 Sigma_eps / (1-lambda)) * C^q * sigma(R)^{q/p},

which certifies the testing constant restricted to R:

    T_R <= (2 Sigma_eps / (1-lambda))^{1/q} * C,

because the exceptional-set masses w(E_Q) are dominated by w(Q).  Dual
certificates follow by swapping (sigma, p) <-> (w, q') and rerunning the
same chain.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from .bumps import BumpReport, EntropyFunction, ExponentConfig, direct_bumps, entropy_bumps, eps_eval
from .grid import DyadicCube, contains
from .maximal import rho
from .sparse import SparseFamily, carleson_check
from .weights import Weight, average, mass

TRACE_SCHEMA = "trace/v1"


def _bucket_of(value: float) -> int:
    """floor(log2(value)) computed exactly via the binary exponent."""
    if value <= 0 or not math.isfinite(value):
        raise ValueError(f"bucket key must be positive and finite, got {value}")
    mantissa, exponent = math.frexp(value)  # value = mantissa * 2^exponent, mantissa in [0.5, 1)
    return exponent - 1


def _eps_floor(eps: EntropyFunction, a: int) -> float:
    """Infimum of eps over the bucket [2^a, 2^{a+1}).

    For the entropy kind (a >= 0 always) this is eps(2^a).  For the direct
    kind, eps decreases on (0,1), so buckets left of 1 are bounded below by
    the right endpoint value eps(2^{a+1}).
    """
    if a >= 0:
        return eps_eval(eps, 2.0**a)
    return eps_eval(eps, 2.0 ** (a + 1))


@dataclass(frozen=True)
class Strata:
    """Dyadic stratification of a family by a positive key quantity."""

    key: str
    buckets: dict[int, list[DyadicCube]]
    maximal_cubes: dict[int, list[DyadicCube]]
    key_values: dict[DyadicCube, float]


def _stratify_cubes(cubes: list[DyadicCube], key_values: dict[DyadicCube, float],
                    key: str) -> Strata:
    buckets: dict[int, list[DyadicCube]] = {}
    for q in sorted(cubes, key=lambda c: (c.level, c.index)):
        buckets.setdefault(_bucket_of(key_values[q]), []).append(q)
    maximal = {}
    for a, qs in buckets.items():
        maximal[a] = [q for q in qs
                      if not any(contains(other, q) and other != q for other in qs)]
    return Strata(key, buckets, maximal, dict(key_values))


def stratify(family: SparseFamily, sigma: Weight, key: str) -> Strata:
    """Bucket the family by a = floor(log2 key(Q)), key in {rho, average},
    and record the maximal cubes of each bucket.  Every cube with zero
    sigma-mass is rejected by name, since neither key is defined there."""
    if key not in ("rho", "average"):
        raise ValueError(f"key must be rho or average, got {key!r}")
    values = {}
    for q in family.sorted_cubes():
        if mass(sigma, q) <= 0:
            raise ValueError(f"zero-mass cube in family: {q.text}")
        values[q] = rho(sigma, q) if key == "rho" else average(sigma, q)
    return _stratify_cubes(list(family.cubes), values, key)


@dataclass(frozen=True)
class StratumRecord:
    a: int
    q_star: DyadicCube
    inner_lhs: float
    inner_bound: float
    realized_constant: float
    support_ratio: float
    ok: bool

    def to_dict(self) -> dict:
        return {
            "a": self.a,
            "q_star": self.q_star.text,
            "inner_lhs": self.inner_lhs,
            "inner_bound": self.inner_bound,
            "realized_constant": self.realized_constant,
            "support_ratio": self.support_ratio,
            "ok": self.ok,
        }


@dataclass(frozen=True)
class TraceReport:
    """Outcome of one executed proof chain."""

    kind: str
    R: DyadicCube
    lhs_total: float
    strata: list[StratumRecord] = field(repr=False)
    identity_ok: bool
    identity_error: float
    inner_ok: bool
    final_bound: float
    final_ok: bool
    certified_constant: float
    bump_constant: float
    testing_value: float
    certified_ok: bool
    exponents: ExponentConfig = field(repr=False)
    eps: EntropyFunction = field(repr=False)
    lam: float = 0.0

    @property
    def passed(self) -> bool:
        return self.identity_ok and self.inner_ok and self.final_ok and self.certified_ok

    def to_dict(self) -> dict:
        return {
            "schema": TRACE_SCHEMA,
            "kind": self.kind,
            "R": self.R.text,
            "lambda": self.lam,
            "p": self.exponents.p,
            "q": self.exponents.q,
            "alpha": self.exponents.alpha,
            "eps": {"kind": self.eps.kind, "delta": self.eps.delta,
                    "tail_sum": self.eps.tail_sum},
            "lhs_total": self.lhs_total,
            "stage_identity": {"ok": self.identity_ok, "relative_error": self.identity_error},
            "stage_inner": {"ok": self.inner_ok,
                            "strata": [s.to_dict() for s in self.strata]},
            "stage_final": {"ok": self.final_ok, "bound": self.final_bound},
            "certificate": {
                "ok": self.certified_ok,
                "constant": self.certified_constant,
                "bump_constant": self.bump_constant,
                "testing_value": self.testing_value,
            },
            "passed": self.passed,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _testing_term(q_cube: DyadicCube, sigma: Weight, w_mass: float,
                  cfg: ExponentConfig) -> float:
    """(|Q|^{alpha/d} <sigma>_Q)^q * (a w-mass), one summand of the testing sum."""
    d = cfg.d
    return (q_cube.volume ** (cfg.alpha / d) * average(sigma, q_cube)) ** cfg.q * w_mass


def _run_trace(kind: str, family: SparseFamily, sigma: Weight, w: Weight,
               cfg: ExponentConfig, eps: EntropyFunction, r_cube: DyadicCube,
               bump: BumpReport | None) -> TraceReport:
    if r_cube not in family:
        raise ValueError(f"cube {r_cube.text} is not in the family")
    if sigma.grid != family.grid or w.grid != family.grid:
        raise ValueError("family and weights must share one grid")
    lam = family.lam
    sub = family.members_inside(r_cube)
    key = "rho" if kind == "entropy" else "average"
    key_values = {}
    for q in sub:
        if mass(sigma, q) <= 0:
            raise ValueError(f"zero-mass cube in family: {q.text}")
        key_values[q] = rho(sigma, q) if key == "rho" else average(sigma, q)
    strata = _stratify_cubes(sub, key_values, key)

    if bump is None:
        if kind == "entropy":
            bump = entropy_bumps(sigma, w, cfg, eps)
        else:
            bump = direct_bumps(sigma, w, cfg, eps)
    c_bump = bump.constants["E"] if kind == "entropy" else bump.constants["D"]

    # stage (i): exact regrouping of the testing sum with w(Q) masses
    term = {q: _testing_term(q, sigma, mass(w, q), cfg) for q in sub}
    lhs_total = sum(term.values())
    regrouped = 0.0
    records: list[StratumRecord] = []
    qp = cfg.q / cfg.p
    inner_ok = True
    for a in sorted(strata.buckets):
        floor_val = _eps_floor(eps, a)
        for q_star in strata.maximal_cubes[a]:
            members = [q for q in strata.buckets[a] if contains(q_star, q)]
            inner_lhs = sum(term[q] for q in members)
            regrouped += inner_lhs
            sigma_star = mass(sigma, q_star)
            inner_bound = (c_bump**cfg.q) * (2.0 / (1.0 - lam)) * sigma_star**qp / floor_val
            if c_bump > 0 and sigma_star > 0:
                realized = inner_lhs * floor_val / (c_bump**cfg.q * sigma_star**qp)
            else:
                realized = 0.0 if inner_lhs == 0 else math.inf
            # supporting estimate: Carleson for the entropy chain, the
            # sparseness volume bound for the direct chain
            if kind == "entropy":
                support_ratio = carleson_check(family, sigma, q_star)["ratio"]
            else:
                vol = sum(q.volume for q in family.members_inside(q_star))
                support_ratio = vol * (1.0 - lam) / q_star.volume
            ok = (inner_lhs <= inner_bound * (1.0 + 1e-12)
                  and support_ratio <= 1.0 + 1e-12)
            inner_ok = inner_ok and ok
            records.append(
                StratumRecord(a, q_star, inner_lhs, inner_bound, realized,
                              support_ratio, ok))

    if lhs_total > 0:
        identity_error = abs(lhs_total - regrouped) / lhs_total
    else:
        identity_error = abs(regrouped)
    identity_ok = identity_error <= 1e-12

    # stage (iii): the assembled explicit-constant bound
    final_bound = (2.0 * eps.tail_sum / (1.0 - lam)) * c_bump**cfg.q * mass(sigma, r_cube)**qp
    final_ok = lhs_total <= final_bound * (1.0 + 1e-12)

    # certificate: testing value at R with w(E_Q) masses (<= the w(Q) form)
    w_exc = family.exceptional_mass(w)
    testing_sum = sum(_testing_term(q, sigma, w_exc[q], cfg) for q in sub)
    testing_value = mass(sigma, r_cube) ** (-1.0 / cfg.p) * testing_sum ** (1.0 / cfg.q)
    certified_constant = (2.0 * eps.tail_sum / (1.0 - lam)) ** (1.0 / cfg.q)
    certified_ok = testing_value <= certified_constant * c_bump * (1.0 + 1e-12)

    return TraceReport(
        kind=kind, R=r_cube, lhs_total=lhs_total, strata=records,
        identity_ok=identity_ok, identity_error=identity_error,
        inner_ok=inner_ok, final_bound=final_bound, final_ok=final_ok,
        certified_constant=certified_constant, bump_constant=c_bump,
        testing_value=testing_value, certified_ok=certified_ok,
        exponents=cfg, eps=eps, lam=lam,
    )


def entropy_trace(family: SparseFamily, sigma: Weight, w: Weight,
                  cfg: ExponentConfig, eps: EntropyFunction, r_cube: DyadicCube,
                  bump: BumpReport | None = None) -> TraceReport:
    """Execute the entropy chain at R: stratify by rho(Q; sigma), verify the
    regrouping identity, the per-stratum inner bounds (through the Carleson
    estimate), and the final bound certifying T_R <= (2 Sigma_eps/(1-lam))^{1/q} E."""
    if eps.kind != "entropy":
        raise ValueError("direct eps passed to entropy trace")
    return _run_trace("entropy", family, sigma, w, cfg, eps, r_cube, bump)


def direct_trace(family: SparseFamily, sigma: Weight, w: Weight,
                 cfg: ExponentConfig, eps: EntropyFunction, r_cube: DyadicCube,
                 bump: BumpReport | None = None) -> TraceReport:
    """Execute the direct-comparison chain at R: stratify by <sigma>_Q; the
    inner bound uses the sparseness volume bound in place of the Carleson
    estimate, certifying T_R <= (2 Sigma_eps/(1-lam))^{1/q} D."""
    if eps.kind != "direct":
        raise ValueError("entropy eps passed to direct trace")
    return _run_trace("direct", family, sigma, w, cfg, eps, r_cube, bump)


def dual_entropy_trace(family: SparseFamily, sigma: Weight, w: Weight,
                       cfg: ExponentConfig, eps: EntropyFunction,
                       r_cube: DyadicCube) -> TraceReport:
    """The dual chain, certifying T* <= (2 Sigma_eps/(1-lam))^{1/p'} E*_symmetric:
    run the primal chain with (sigma, p) <-> (w, q') swapped."""
    return entropy_trace(family, w, sigma, cfg.swapped(), eps, r_cube)


def dual_direct_trace(family: SparseFamily, sigma: Weight, w: Weight,
                      cfg: ExponentConfig, eps: EntropyFunction,
                      r_cube: DyadicCube) -> TraceReport:
    """The dual direct chain, certifying T* <= (2 Sigma_eps/(1-lam))^{1/p'} D*."""
    return direct_trace(family, w, sigma, cfg.swapped(), eps, r_cube)
