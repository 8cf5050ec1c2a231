"""Missing-data model operations: law assembly from identified propensities,
non-identifiability certificates, and the ancestral fast path.

The target law divides the all-observed slice of the observed law by the
product of the indicator propensities; proxies then stand for the censored
variables by consistency.  The full law multiplies the propensities back in
at free indicator values, which is sound only when no propensity needed an
indicator parent pinned to 1.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from . import kernel as K
from .fixing import FixingSchedule
from .kernel import Expr, NamedTable
from .model import MdDag

from .oracle import rename_axes


class AssemblyError(ValueError):
    pass


def _project(tab: NamedTable, name: str, keep) -> NamedTable:
    if name not in tab.dims:
        return tab
    ax = tab.axis(name)
    dom = tab.domains[name]
    idx = [dom.index(v) for v in keep]
    domains = dict(tab.domains)
    domains[name] = tuple(keep)
    return NamedTable(tab.dims, domains, np.take(tab.data, idx, axis=ax))


def proxy_to_truth_axes(md: MdDag, tab: NamedTable) -> NamedTable:
    """Drop censored rows of proxy axes and rename them to truth names."""
    for t in md.triples:
        if t.proxy in tab.dims:
            dom = tuple(v for v in tab.domains[t.proxy] if v != "?")
            tab = _project(tab, t.proxy, dom)
    return rename_axes(tab, {t.proxy: t.truth for t in md.triples})


@dataclass
class TargetLawFunctional:
    """Identifying functional for the law of the censored and fully observed
    variables, expressed over the observed data law."""

    md: MdDag
    expr: Expr
    propensities: dict[str, Expr]

    def evaluate(self, law) -> NamedTable:
        tab = K.evaluate_numeric(self.expr, law)
        return proxy_to_truth_axes(self.md, tab)

    def render(self, fmt: str = "latex") -> str:
        return K.render(self.expr, fmt)


@dataclass
class FullLawFunctional:
    """Identifying functional for the joint law including the indicators."""

    md: MdDag
    numerator: Expr               # observed law at all indicators = 1
    propensities: dict[str, Expr]

    def evaluate(self, law) -> NamedTable:
        md = self.md
        num = proxy_to_truth_axes(md, K.evaluate_numeric(self.numerator, law))
        out = num
        for r, q in sorted(self.propensities.items()):
            tab = proxy_to_truth_axes(md, K.evaluate_numeric(q, law))
            at_one = tab.take({rr: 1 for rr in md.indicators if rr in tab.dims})
            out = NamedTable.join(out, tab, np.multiply)
            out = NamedTable.join(out, at_one, np.divide)
        return out

    def render(self, fmt: str = "latex") -> str:
        parts = [K.render(q, fmt) for _, q in sorted(self.propensities.items())]
        if fmt == "latex":
            return (r"\left[" + r"\,".join(parts) + r"\right]\cdot\frac{"
                    + K.render(self.numerator, fmt) + r"}{\left[\cdots\right]_{R=1}}")
        return "(fulllaw " + " ".join(parts) + " " + K.render(self.numerator, fmt) + ")"


def _pin_free_indicators(md: MdDag, q: Expr) -> Expr:
    at = {r: 1 for r in md.indicators
          if r in q.free() or r in q.contexts()}
    return K.restrict_values(q, at) if at else q


def assemble_target_law(md: MdDag, propensities: Mapping[str, Expr]) -> TargetLawFunctional:
    """All-observed slice of p divided by the propensity product."""
    missing = set(md.indicators) - set(propensities)
    if missing:
        raise AssemblyError(f"missing propensities for {sorted(missing)}")
    num = K.restrict_values(
        K.Atom("p", tuple(sorted(md.observed_columns))),
        {r: 1 for r in sorted(md.indicators)})
    den = K.product([_pin_free_indicators(md, propensities[r])
                     for r in sorted(propensities)])
    expr = K.quotient(num, den)
    return TargetLawFunctional(md, expr, dict(propensities))


def full_law_obstructions(md: MdDag, indicator: str, q: Expr) -> list[str]:
    """Why a propensity cannot enter the full-law product: indicator parents
    pinned to 1, or conditioning on proxies of unresolved censored variables."""
    pa = md.graph.parents([indicator])
    pins = q.pinned()
    out = []
    for r in sorted(pa & md.indicators):
        if r in pins:
            out.append(f"{indicator}: parent {r} only available at value 1")
    for t in md.triples:
        if t.proxy in (q.free() | q.contexts()) and pins.get(t.indicator) != 1:
            out.append(f"{indicator}: conditions on proxy {t.proxy} without "
                       f"{t.indicator}=1")
    return out


def assemble_full_law(md: MdDag, propensities: Mapping[str, Expr]) -> FullLawFunctional:
    missing = set(md.indicators) - set(propensities)
    if missing:
        raise AssemblyError(f"missing propensities for {sorted(missing)}")
    problems: list[str] = []
    for r, q in sorted(propensities.items()):
        problems += full_law_obstructions(md, r, q)
    if problems:
        raise AssemblyError("; ".join(problems))
    num = K.restrict_values(
        K.Atom("p", tuple(sorted(md.observed_columns))),
        {r: 1 for r in sorted(md.indicators)})
    return FullLawFunctional(md, num, dict(propensities))


# ---------------------------------------------------------------------------
# certificates and fast paths
# ---------------------------------------------------------------------------


def colluder_scan(md: MdDag) -> list[tuple[str, str]]:
    """All pairs (R_i, R_j) where R_j and its censored variable are both
    parents of R_i; any such pair certifies full-law non-identifiability."""
    out = []
    g = md.graph
    for ti in md.triples:
        pa = g.parents([ti.indicator])
        for tj in md.triples:
            if tj.indicator == ti.indicator:
                continue
            if tj.indicator in pa and tj.truth in pa:
                out.append((ti.indicator, tj.indicator))
    return sorted(out)


def ancestral_precondition(md: MdDag) -> bool:
    """No indicator has an ancestor among the indicators of its censored
    parents (self-censoring is the reflexive special case)."""
    g = md.graph
    for t in md.triples:
        pa = g.parents([t.indicator])
        culprits = {md.triple_of(u).indicator for u in pa & md.truths}
        if culprits & g.ancestors([t.indicator]):
            return False
    return True


def ancestral_schedule(md: MdDag, indicator: str) -> FixingSchedule:
    """Schedule over the indicator's own indicator-descendants, deepest
    first, with every censored variable kept visible."""
    g = md.graph
    members = sorted(g.descendants([indicator]) & md.indicators)
    classes = tuple(frozenset({m}) for m in members)
    idx = {m: i for i, m in enumerate(members)}
    order = []
    for a in members:
        for b in members:
            if a != b and a in g.descendants([b]):
                order.append((idx[a], idx[b]))
    proms = tuple(md.truths for _ in classes)
    return FixingSchedule(classes, tuple(order), proms)


def ancestral_fast_path(md: MdDag) -> dict[str, FixingSchedule] | None:
    if not ancestral_precondition(md):
        return None
    return {r: ancestral_schedule(md, r) for r in md.sorted_indicators()}
