"""Brute-force ground truth for verification.

Samples strictly positive full laws from the DAG factorization of a
missing-data model, derives observed laws, checks conditional independence
numerically, verifies emitted functionals against enumerated truths, and
constructs witness pairs certifying full-law non-identifiability.

Joint tables are kept factored (one CPT per vertex) and marginals are
computed by variable elimination, so large models never materialize the full
joint.  Dense DiscreteLaw objects are used once a joint is small enough to
hold, e.g. the observed law handed to expression evaluation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .graph import Cadmg
from .kernel import NamedTable, evaluate_numeric
from .model import MdDag, Triple

MISSING_TOKEN = "?"
CPT_FLOOR = 0.01


class OracleError(ValueError):
    pass


# ---------------------------------------------------------------------------
# laws
# ---------------------------------------------------------------------------


def _elimination_marginal(factors: Sequence[NamedTable], keep: frozenset[str]) -> NamedTable:
    """Multiply the factor list and sum out everything outside keep, greedily
    eliminating the variable whose combined factor is smallest."""
    work = list(factors)
    if not work:
        return NamedTable.scalar(1.0)
    all_vars: set[str] = set()
    for f in work:
        all_vars |= set(f.dims)
    elim = all_vars - keep
    while elim:
        best = None
        for v in sorted(elim):
            involved = [f for f in work if v in f.dims]
            dims = set()
            for f in involved:
                dims |= set(f.dims)
            cost = len(dims)
            if best is None or cost < best[0]:
                best = (cost, v, involved)
        _, v, involved = best
        rest = [f for f in work if v not in f.dims]
        prod = involved[0]
        for f in involved[1:]:
            prod = NamedTable.join(prod, f, np.multiply)
        work = rest + [prod.sum_out([v])]
        elim.discard(v)
    out = work[0]
    for f in work[1:]:
        out = NamedTable.join(out, f, np.multiply)
    return out.sum_out(set(out.dims) - keep)


@dataclass(eq=False)
class DiscreteLaw:
    """Dense probability table over named finite variables."""

    name: str
    variables: dict[str, tuple]
    table: NamedTable
    _marginals: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        total = float(self.table.data.sum())
        if abs(total - 1.0) > 1e-12:
            raise OracleError(f"law mass {total} is not 1 within 1e-12")
        if (self.table.data < 0).any():
            raise OracleError("law has negative mass")

    def marginal(self, names: Iterable[str]) -> NamedTable:
        key = frozenset(names)
        if key not in self._marginals:
            self._marginals[key] = self.table.sum_out(set(self.table.dims) - key)
        return self._marginals[key]

    def max_abs_diff(self, other: "DiscreteLaw") -> float:
        return self.table.max_abs_diff(other.table)


@dataclass(eq=False)
class FactoredLaw:
    """Joint law represented by CPT factors; marginals via elimination."""

    name: str
    variables: dict[str, tuple]
    factors: tuple[NamedTable, ...]
    _marginals: dict = field(default_factory=dict, repr=False)

    def marginal(self, names: Iterable[str]) -> NamedTable:
        key = frozenset(names)
        if key not in self._marginals:
            self._marginals[key] = _elimination_marginal(self.factors, key)
        return self._marginals[key]

    def dense(self, names: Iterable[str] | None = None, name: str | None = None) -> DiscreteLaw:
        names = frozenset(names if names is not None else self.variables)
        tab = self.marginal(names)
        return DiscreteLaw(name or self.name,
                           {v: self.variables[v] for v in sorted(names)}, tab)


# ---------------------------------------------------------------------------
# CPT construction
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CptSpec:
    """Per-vertex conditional tables following the graph's parent sets."""

    tables: tuple[NamedTable, ...]
    variables: dict[str, tuple]

    def law(self, name: str = "p") -> FactoredLaw:
        return FactoredLaw(name, dict(self.variables), tuple(self.tables))


def _random_cpt(rng: np.random.Generator, child: str, child_dom: tuple,
                parent_doms: dict[str, tuple]) -> NamedTable:
    dims = tuple(sorted([child] + list(parent_doms)))
    domains = {child: child_dom, **parent_doms}
    shape = tuple(len(domains[d]) for d in dims)
    raw = rng.uniform(size=shape)
    ax = dims.index(child)
    k = shape[ax]
    raw = raw / raw.sum(axis=ax, keepdims=True)
    raw = (1 - k * CPT_FLOOR) * raw + CPT_FLOOR
    return NamedTable(dims, domains, raw)


def _proxy_cpt(t: Triple, truth_dom: tuple) -> NamedTable:
    proxy_dom = tuple(truth_dom) + (MISSING_TOKEN,)
    dims = tuple(sorted([t.proxy, t.indicator, t.truth]))
    domains = {t.proxy: proxy_dom, t.indicator: (0, 1), t.truth: truth_dom}
    shape = tuple(len(domains[d]) for d in dims)
    data = np.zeros(shape)
    it = np.ndindex(shape)
    for idx in it:
        vals = {d: domains[d][i] for d, i in zip(dims, idx)}
        want = vals[t.truth] if vals[t.indicator] == 1 else MISSING_TOKEN
        if vals[t.proxy] == want:
            data[idx] = 1.0
    return NamedTable(dims, domains, data)


def make_cpts(md: MdDag, cardinality: int = 2,
              tables: Mapping[str, NamedTable] | None = None,
              rng: np.random.Generator | None = None) -> CptSpec:
    """Build a CPT set for the model: random strictly positive tables for
    substantive vertices (unless supplied), deterministic proxy tables."""
    if cardinality < 2:
        raise OracleError("cardinality must be at least 2")
    rng = rng or np.random.default_rng(0)
    tables = dict(tables or {})
    g = md.graph
    domains: dict[str, tuple] = {}
    for t in md.triples:
        domains[t.truth] = tuple(range(cardinality))
        domains[t.indicator] = (0, 1)
        domains[t.proxy] = tuple(range(cardinality)) + (MISSING_TOKEN,)
    for o in md.observed:
        domains[o] = tuple(range(cardinality))

    out: list[NamedTable] = []
    for v in g.topological_order():
        if v in md.proxies:
            out.append(_proxy_cpt(md.triple_of(v), domains[md.triple_of(v).truth]))
            continue
        if v in tables:
            out.append(tables[v])
            continue
        parent_doms = {p: domains[p] for p in g.parents([v])}
        out.append(_random_cpt(rng, v, domains[v], parent_doms))
    return CptSpec(tuple(out), domains)


def sample_full_law(md: MdDag, cardinality: int = 2, seed: int = 0,
                    tables: Mapping[str, NamedTable] | None = None) -> FactoredLaw:
    """Seeded full data law over censored variables, indicators, proxies and
    observed variables, factored per the model DAG."""
    rng = np.random.default_rng(seed)
    return make_cpts(md, cardinality, tables, rng).law("full")


def derive_observed_law(md: MdDag, full: FactoredLaw) -> DiscreteLaw:
    """Marginalize the censored variables out: the law of (R, O, X)."""
    return full.dense(md.observed_columns, name="p")


def target_law(md: MdDag, full: FactoredLaw) -> NamedTable:
    return full.marginal(md.truths | md.observed)


def propensity_truth(md: MdDag, full: FactoredLaw, indicator: str) -> NamedTable:
    """Ground truth p(R_i | pa(R_i)) as a table over {R_i} and its parents."""
    pa = md.graph.parents([indicator])
    joint = full.marginal(pa | {indicator})
    return NamedTable.join(joint, joint.sum_out([indicator]), np.divide)


# ---------------------------------------------------------------------------
# conditional independence
# ---------------------------------------------------------------------------


def ci_check(law: DiscreteLaw | FactoredLaw, a: Iterable[str], b: Iterable[str],
             c: Iterable[str] = ()) -> float:
    """Max over cells of |p(a,b|c) - p(a|c) p(b|c)|; cells with zero context
    mass are skipped."""
    A, B, C = frozenset(a), frozenset(b), frozenset(c)
    if A & B or A & C or B & C:
        raise OracleError("ci_check requires disjoint variable sets")
    joint = law.marginal(A | B | C)
    pc = joint.sum_out(A | B)
    pabc = NamedTable.join(joint, pc, np.divide)
    pac = NamedTable.join(joint.sum_out(B), pc, np.divide)
    pbc = NamedTable.join(joint.sum_out(A), pc, np.divide)
    prod = NamedTable.join(pac, pbc, np.multiply)
    return pabc.max_abs_diff(prod)


# ---------------------------------------------------------------------------
# functional verification
# ---------------------------------------------------------------------------


@dataclass
class VerifyReport:
    trials: int
    max_error: float
    undefined_cells: int
    per_trial: list[float]

    def ok(self, tol: float) -> bool:
        return self.trials > 0 and self.max_error <= tol


def _compare(expected: NamedTable, got: NamedTable) -> float:
    return expected.max_abs_diff(got)


def verify_target_functional(md: MdDag, functional, trials: int = 100,
                             seed: int = 0, cardinality: int = 2) -> VerifyReport:
    """Evaluate an emitted target-law functional against the enumerated
    target law on sampled laws.  ``functional`` must provide
    evaluate(observed_law) -> NamedTable over the censored/observed names."""
    errs: list[float] = []
    undef = 0
    for t in range(trials):
        full = sample_full_law(md, cardinality, seed + t)
        obs = derive_observed_law(md, full)
        got = functional.evaluate(obs)
        undef += got.undefined_count()
        errs.append(_compare(target_law(md, full), got))
    return VerifyReport(trials, max(errs) if errs else float("nan"), undef, errs)


def verify_full_functional(md: MdDag, functional, trials: int = 100,
                           seed: int = 0, cardinality: int = 2) -> VerifyReport:
    errs: list[float] = []
    undef = 0
    want = None
    for t in range(trials):
        full = sample_full_law(md, cardinality, seed + t)
        obs = derive_observed_law(md, full)
        got = functional.evaluate(obs)
        undef += got.undefined_count()
        truthset = md.truths | md.observed | md.indicators
        errs.append(_compare(full.marginal(truthset), got))
    return VerifyReport(trials, max(errs) if errs else float("nan"), undef, errs)


def drop_censored_rows(md: MdDag, tab: NamedTable) -> NamedTable:
    """Remove the "?" rows of any proxy axis."""
    for t in md.triples:
        if t.proxy in tab.dims:
            ax = tab.axis(t.proxy)
            dom = tab.domains[t.proxy]
            keep = [v for v in dom if v != MISSING_TOKEN]
            idx = [dom.index(v) for v in keep]
            domains = dict(tab.domains)
            domains[t.proxy] = tuple(keep)
            tab = NamedTable(tab.dims, domains,
                             np.take(tab.data, idx, axis=ax))
    return tab


def verify_indicator_functional(md: MdDag, indicator: str, expr,
                                trials: int = 100, seed: int = 0,
                                cardinality: int = 2) -> VerifyReport:
    """Compare an emitted propensity against p(R_i=1 | pa(R_i)) with every
    indicator parent at 1 (the slice the identification theory pins)."""
    errs: list[float] = []
    undef = 0
    g = md.graph
    pa = g.parents([indicator])
    r_parents = pa & md.indicators
    for t in range(trials):
        full = sample_full_law(md, cardinality, seed + t)
        obs = derive_observed_law(md, full)
        got = drop_censored_rows(md, evaluate_numeric(expr, obs))
        got = got.take({r: 1 for r in r_parents if r in got.dims})
        if indicator in got.dims:
            got = got.take({indicator: 1})
        undef += got.undefined_count()
        truth = propensity_truth(md, full, indicator)
        truth = truth.take({r: 1 for r in r_parents}).take({indicator: 1})
        # express over proxy columns so axes line up with the functional
        truth = rename_axes(truth, {t_.truth: t_.proxy for t_ in md.triples})
        errs.append(_compare(truth, got))
    return VerifyReport(trials, max(errs) if errs else float("nan"), undef, errs)


def rename_axes(tab: NamedTable, mapping: Mapping[str, str]) -> NamedTable:
    dims = tuple(mapping.get(d, d) for d in tab.dims)
    if len(set(dims)) != len(dims):
        raise OracleError("axis rename collision")
    domains = {mapping.get(d, d): dom for d, dom in tab.domains.items()}
    order = tuple(np.argsort(dims))
    data = np.transpose(tab.data, order) if tab.dims else tab.data
    return NamedTable(tuple(sorted(dims)), domains, data)


def verify_functional(md: MdDag, functional, target: str, trials: int = 100,
                      seed: int = 0, cardinality: int = 2) -> VerifyReport:
    """Dispatch on the verification target: "target-law", "full-law" or
    "indicator:R_i"."""
    if target == "target-law":
        return verify_target_functional(md, functional, trials, seed, cardinality)
    if target == "full-law":
        return verify_full_functional(md, functional, trials, seed, cardinality)
    if target.startswith("indicator:"):
        return verify_indicator_functional(md, target.split(":", 1)[1],
                                           functional, trials, seed, cardinality)
    raise OracleError(f"unknown verification target {target!r}")


# ---------------------------------------------------------------------------
# witness pairs certifying full-law non-identifiability
# ---------------------------------------------------------------------------


def colluder_witness(md: MdDag, pair: tuple[str, str], seed: int = 0,
                     retries: int = 20):
    """Two full laws agreeing on the observed law but differing in the full
    law, built around the collider structure: the censored parent's law is
    made context-free and the collider row is perturbed along the surface
    that keeps the censored mixture constant."""
    ri, rj = pair
    g = md.graph
    tj = md.triple_of(rj)
    pa_i = g.parents([ri])
    if rj not in pa_i or tj.truth not in pa_i:
        raise OracleError(f"({ri}, {rj}) is not a collider-certificate pair")

    for attempt in range(retries):
        rng = np.random.default_rng(seed + attempt)
        domains_truth = (0, 1)
        # context-free law for the censored parent
        b = float(rng.uniform(0.3, 0.7))
        pa_xj = sorted(g.parents([tj.truth]))
        dims = tuple(sorted([tj.truth] + pa_xj))
        doms = {v: domains_truth for v in dims}
        shape = tuple(2 for _ in dims)
        data = np.empty(shape)
        ax = dims.index(tj.truth)
        data[(slice(None),) * ax + (0,)] = b
        data[(slice(None),) * ax + (1,)] = 1 - b
        overrides = {tj.truth: NamedTable(dims, doms, data)}
        # children of the censored parent other than the collider and the
        # proxy must ignore it
        for c in sorted(g.children([tj.truth]) - {ri, tj.proxy}):
            pa_c = sorted(g.parents([c]))
            cpt = _random_cpt(rng, c, domains_truth, {p: domains_truth for p in pa_c})
            axj = cpt.dims.index(tj.truth)
            flat = cpt.data.mean(axis=axj, keepdims=True)
            cpt = NamedTable(cpt.dims, cpt.domains,
                             np.broadcast_to(flat, cpt.data.shape).copy())
            overrides[c] = cpt

        cpts = make_cpts(md, 2, overrides, rng)
        tables = {t.dims: t for t in cpts.tables}
        cpt_i = next(t for t in cpts.tables
                     if ri in t.dims and set(t.dims) == {ri} | set(g.parents([ri])))
        # perturb p(R_i | R_j=0, X_j, rest) keeping b-weighted mixtures fixed
        data2 = cpt_i.data.copy()
        ax_i = cpt_i.dims.index(ri)
        ax_j = cpt_i.dims.index(rj)
        ax_x = cpt_i.dims.index(tj.truth)

        def cell(ridx, jv, xv):
            sl = [slice(None)] * data2.ndim
            sl[ax_i], sl[ax_j], sl[ax_x] = ridx, jv, xv
            return tuple(sl)

        d = data2[cell(0, 0, 0)]
        f = data2[cell(0, 0, 1)]
        hi = 1 - CPT_FLOOR
        eps_up = np.minimum((hi - d) / (1 - b), (f - CPT_FLOOR) / b)
        eps_dn = np.minimum((d - CPT_FLOOR) / (1 - b), (hi - f) / b)
        eps = np.where(eps_up >= eps_dn, eps_up, -eps_dn) * 0.9
        if np.min(np.abs(eps)) * min(b, 1 - b) < 1e-3:
            continue
        d2 = d + eps * (1 - b)
        f2 = f - eps * b
        data2[cell(0, 0, 0)] = d2
        data2[cell(0, 0, 1)] = f2
        data2[cell(1, 0, 0)] = 1 - d2
        data2[cell(1, 0, 1)] = 1 - f2
        cpt_i2 = NamedTable(cpt_i.dims, cpt_i.domains, data2)
        tables2 = tuple(cpt_i2 if t is cpt_i else t for t in cpts.tables)
        law1 = FactoredLaw("full", dict(cpts.variables), tuple(cpts.tables))
        law2 = FactoredLaw("full", dict(cpts.variables), tables2)

        obs_gap = derive_observed_law(md, law1).max_abs_diff(
            derive_observed_law(md, law2))
        allvars = frozenset(law1.variables)
        full_gap = law1.marginal(allvars).max_abs_diff(law2.marginal(allvars))
        if obs_gap <= 1e-12 and full_gap >= 1e-3:
            return law1, law2
    raise OracleError(f"no witness pair found for {pair} after {retries} tries")


# ---------------------------------------------------------------------------
# interventional ground truth (for the causal module)
# ---------------------------------------------------------------------------


def sample_dag_law(g: Cadmg, cardinality: int = 2, seed: int = 0) -> FactoredLaw:
    """Random strictly positive law factoring along a DAG (bidirected edges
    rejected)."""
    if g.bidirected_edges:
        raise OracleError("sample_dag_law needs a DAG")
    rng = np.random.default_rng(seed)
    domains = {v: tuple(range(cardinality)) for v in g.vertex_names}
    factors = []
    for v in g.topological_order():
        parent_doms = {p: domains[p] for p in g.parents([v])}
        factors.append(_random_cpt(rng, v, domains[v], parent_doms))
    return FactoredLaw("p", domains, tuple(factors))


def interventional_truth(g: Cadmg, law: FactoredLaw, outcomes: Iterable[str],
                         treatments: Mapping[str, object]) -> NamedTable:
    """p(Y(a)) by direct enumeration of the truncated factorization."""
    ys = frozenset(outcomes)
    child_of: dict[str, NamedTable] = {}
    for v in g.topological_order():
        for f in law.factors:
            if v in f.dims and set(f.dims) == {v} | set(g.parents([v])):
                child_of[v] = f
                break
        else:
            raise OracleError(f"law has no CPT factor for {v!r}")
    factors = []
    for v in g.topological_order():
        if v in treatments:
            continue
        f = child_of[v]
        factors.append(f.take({k: val for k, val in treatments.items()
                               if k in f.dims}))
    return _elimination_marginal(factors, ys)
