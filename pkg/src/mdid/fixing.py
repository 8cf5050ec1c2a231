"""The fixing operator: single vertices, within-district sets, and partial
order schedules acting jointly on graphs and kernel expressions.

Schedule semantics.  A schedule is a partial order over disjoint classes of a
fix set.  Each class is processed in a subproblem built from *its own*
predecessor cone, never from a global sequential state: starting from the
full model graph, the cone's classes are fixed (arrowheads in, statuses),
leftover selection indicators are pinned to 1, censored variables promoted
for this class are kept visible (merged with their proxies once their
indicator is pinned), and the rest are latent projected out.  The class
denominator divides the cone kernel by one conditional per member, ordered
topologically: each member is conditioned on the class Markov blanket plus
the earlier members, with not-yet-available censored variables dropped after
an explicit m-separation check, and selection indicators pinned to 1.

Selected-to-1 markers propagate to later subproblems and are auto-conditioned
in every separation query; they are never fixable.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from . import kernel as K
from .graph import Cadmg, RANDOM, SELECTED
from .kernel import Expr
from .model import MdDag
from .projection import latent_project_out
from .separation import m_separated


class FixError(ValueError):
    pass


# ---------------------------------------------------------------------------
# single-vertex fixing (the classical operator)
# ---------------------------------------------------------------------------


@dataclass
class FixStepResult:
    graph: Cadmg
    kernel: Expr
    denominator: Expr


def is_fixable_vertex(g: Cadmg, v: str) -> bool:
    """Fixable iff the vertex's descendants meet its district only at itself."""
    if g.vertex(v).status != RANDOM:
        return False
    return g.descendants([v]) & g.district(v) == {v}


def fix_vertex(g: Cadmg, q: Expr, v: str) -> FixStepResult:
    """Divide by the vertex's blanket conditional and fix it in the graph.

    Marginalization is scoped by the graph's random vertices, never by the
    expression's syntactic variables: context axes of intermediate kernels
    must pass through untouched.
    """
    if not is_fixable_vertex(g, v):
        raise FixError(f"{v!r} is not fixable")
    given = g.markov_blanket([v]) & g.random_vertices
    rest = (g.random_vertices - {v} - given) & q.free()
    marg = K.marginalize(q, rest)
    den = K.quotient(marg, K.marginalize(marg, {v} & marg.free()))
    pins = {s: 1 for s in g.markov_blanket([v]) & g.selected_vertices}
    if pins:
        den = K.restrict_values(den, pins)
    return FixStepResult(g.with_statuses(fixed=[v]), K.quotient(q, den), den)


def fix_sequence(g: Cadmg, q: Expr, order: Sequence[str]) -> FixStepResult:
    """Compose single-vertex fixing along the given sequence."""
    den: Expr = K.One()
    for v in order:
        step = fix_vertex(g, q, v)
        g, q = step.graph, step.kernel
        den = K.product([den, step.denominator])
    return FixStepResult(g, q, den)


def fixable_sequence_to(g: Cadmg, target: frozenset[str]) -> list[str] | None:
    """Greedy search for a valid fixing sequence removing all random vertices
    outside target; None when stuck (the set is not reachable)."""
    out: list[str] = []
    rev = {v: i for i, v in enumerate(g.topological_order())}
    while True:
        todo = sorted(g.random_vertices - target, key=lambda v: (-rev[v], v))
        if not todo:
            return out
        for v in todo:
            if is_fixable_vertex(g, v):
                g = g.with_statuses(fixed=[v])
                out.append(v)
                break
        else:
            return None


# ---------------------------------------------------------------------------
# schedules
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FixingSchedule:
    """Partial order over disjoint classes, each with a promotion set: the
    censored variables kept visible while the class is processed."""

    classes: tuple[frozenset[str], ...]
    order: tuple[tuple[int, int], ...] = ()
    promotions: tuple[frozenset[str], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "classes", tuple(frozenset(c) for c in self.classes))
        object.__setattr__(self, "order", tuple(sorted(set(self.order))))
        proms = self.promotions or tuple(frozenset() for _ in self.classes)
        object.__setattr__(self, "promotions", tuple(frozenset(p) for p in proms))
        n = len(self.classes)
        if len(self.promotions) != n:
            raise FixError("one promotion set per class required")
        seen: set[str] = set()
        for c in self.classes:
            if not c:
                raise FixError("empty class")
            if seen & c:
                raise FixError("classes must be pairwise disjoint")
            seen |= c
        for i, j in self.order:
            if not (0 <= i < n and 0 <= j < n) or i == j:
                raise FixError(f"bad order pair {(i, j)}")
        if any(i in self._reachable_preds(i) for i in range(n)):
            raise FixError("schedule order contains a cycle")

    @property
    def n(self) -> int:
        return len(self.classes)

    def _reachable_preds(self, k: int) -> frozenset[int]:
        preds: dict[int, set[int]] = {i: set() for i in range(self.n)}
        for i, j in self.order:
            preds[j].add(i)
        seen: set[int] = set()
        work = list(preds[k])
        while work:
            i = work.pop()
            if i not in seen:
                seen.add(i)
                work += list(preds[i])
        return frozenset(seen)

    def cone(self, k: int | None = None) -> frozenset[int]:
        """Strict predecessor cone of class k (all classes when k is None)."""
        if k is None:
            return frozenset(range(self.n))
        return self._reachable_preds(k) - {k}

    def linear_extension(self) -> tuple[int, ...]:
        remaining = set(range(self.n))
        out = []
        while remaining:
            ready = sorted(i for i in remaining if self.cone(i) <= set(out))
            if not ready:
                raise FixError("schedule order contains a cycle")
            out.append(ready[0])
            remaining.discard(ready[0])
        return tuple(out)

    def class_of(self, member: str) -> int | None:
        for i, c in enumerate(self.classes):
            if member in c:
                return i
        return None

    def describe(self, final: str | None = None) -> str:
        bits = []
        for i in self.linear_extension():
            pred = sorted("{%s}" % ",".join(sorted(self.classes[j]))
                          for j in self.cone(i))
            name = "{%s}" % ",".join(sorted(self.classes[i]))
            bits.append(f"{name}<-[{';'.join(pred)}]" if pred else name)
        return " ".join(bits)


@dataclass
class Violation:
    condition: str          # "i" | "ii" | "iii" | "district" | "member" | "observability" | "structure"
    class_index: int | None
    detail: str
    vertices: tuple[str, ...] = ()
    selectors: tuple[int, ...] = ()


class ScheduleInvalid(FixError):
    def __init__(self, violation: Violation):
        self.violation = violation
        super().__init__(f"condition ({violation.condition}) fails"
                         f" at class {violation.class_index}: {violation.detail}")


# ---------------------------------------------------------------------------
# subproblems
# ---------------------------------------------------------------------------


@dataclass
class Subproblem:
    """The graph/kernel state in which one class is checked and fixed."""

    md: MdDag
    graph: Cadmg
    kernel: Expr
    free_cols: frozenset[str]
    pins: dict[str, int]
    fixed: frozenset[str]
    selected: frozenset[str]
    merged: frozenset[str]          # censored variables identified with proxies

    def column(self, v: str) -> str:
        if v in self.md.truths:
            if v in self.merged:
                return self.md.triple_of(v).proxy
            raise FixError(f"censored variable {v!r} has no observable column")
        return v

    def conditional(self, targets: Iterable[str], given: Iterable[str]) -> Expr:
        """q(targets | given) within this subproblem: only free columns are
        marginalized; fixed contexts pass through untouched."""
        ts = frozenset(targets)
        gs = frozenset(given)
        rest = (self.free_cols - ts - gs) & self.kernel.free()
        marg = K.marginalize(self.kernel, rest)
        denom = K.marginalize(marg, ts & marg.free())
        return K.quotient(marg, denom)


def _plain_kernel(md: MdDag) -> Expr:
    return K.Atom("p", tuple(sorted(md.observed_columns)))


class SchedulePlan:
    """Lazily executes a schedule over a model, memoizing per-class results.

    Raises ScheduleInvalid on the first violated condition unless ``probe``
    callers catch it; ``validate`` wraps this into a report.
    """

    def __init__(self, md: MdDag, sched: FixingSchedule):
        self.md = md
        self.sched = sched
        self._sub: dict[object, Subproblem] = {}
        self._rz: dict[int, frozenset[str]] = {}
        self._den: dict[int, Expr] = {}
        self._factors: dict[int, list[Expr]] = {}
        self.notes: list[str] = []

    # -- cone state ---------------------------------------------------------

    def _cone_state(self, cone: frozenset[int]):
        fixed: set[str] = set()
        for j in cone:
            fixed |= self.sched.classes[j]
        selected: set[str] = set()
        sel_by: dict[str, list[int]] = {}
        for j in sorted(cone):
            for r in self.r_z(j):
                if r not in fixed:
                    selected.add(r)
                    sel_by.setdefault(r, []).append(j)
        return frozenset(fixed), frozenset(selected), sel_by

    def rendered(self, cone: frozenset[int]) -> frozenset[str]:
        """Censored variables identifiable with their proxies in this cone."""
        fixed, selected, _ = self._cone_state(cone)
        out = set()
        for t in self.md.triples:
            if t.indicator in fixed or t.indicator in selected:
                out.add(t.truth)
        return frozenset(out)

    # -- subproblem construction ---------------------------------------------

    def subproblem(self, k: int | None) -> Subproblem:
        """State in which class k is checked; k=None gives the state after
        every class (the full schedule applied)."""
        key = k
        if key in self._sub:
            return self._sub[key]
        sched = self.sched
        cone = sched.cone(k)
        fixed, selected, sel_by = self._cone_state(cone)
        if k is not None:
            clash = selected & sched.classes[k]
            if clash:
                raise ScheduleInvalid(Violation(
                    "ii", k,
                    f"members {sorted(clash)} were selected by earlier classes",
                    tuple(sorted(clash)),
                    tuple(i for r in sorted(clash) for i in sel_by.get(r, []))))
        md = self.md
        if k is not None:
            visible = frozenset(sched.promotions[k])
        else:
            visible = frozenset()
            for j in range(sched.n):
                visible |= sched.promotions[j]
            visible |= self.rendered(cone)
        # promotion sanity: monotone along the order
        if k is not None:
            for j in cone:
                extra = sched.promotions[j] - visible
                if extra:
                    raise ScheduleInvalid(Violation(
                        "structure", k,
                        f"promotions not monotone: {sorted(extra)} visible at "
                        f"class {j} but not later", tuple(sorted(extra))))
        for u in (fixed & md.truths):
            t = md.triple_of(u)
            if t.indicator not in fixed | selected:
                raise ScheduleInvalid(Violation(
                    "observability", k,
                    f"{u!r} fixed while its indicator {t.indicator!r} is not "
                    f"pinned to 1", (u,)))

        pins_r = (fixed | selected) & md.indicators
        g = md.graph.with_statuses(fixed=fixed, selected={s: 1 for s in selected})
        merged: set[str] = set()
        drop_proxies: list[str] = []
        for t in md.triples:
            pinned = t.indicator in pins_r
            if pinned and (t.truth in visible or t.truth in fixed):
                merged.add(t.truth)
                drop_proxies.append(t.proxy)
        if drop_proxies:
            g = g.drop_vertices(drop_proxies)
        hidden = (md.truths - visible - fixed) & g.random_vertices
        g = latent_project_out(g, hidden)

        pins = {r: 1 for r in pins_r}
        num = K.restrict_values(_plain_kernel(md), pins) if pins else _plain_kernel(md)
        dens = []
        for j in sorted(cone):
            den = self.class_denominator(j)
            at = {r: 1 for r in pins_r
                  if r in den.free() or r in den.contexts()}
            dens.append(K.restrict_values(den, at) if at else den)
        kern = K.quotient(num, K.product(dens)) if dens else num
        free_cols = frozenset(
            self._col(md, merged, v) for v in g.random_vertices
            if v not in md.truths or v in merged)
        sub = Subproblem(md, g, kern, free_cols, pins, fixed, selected,
                         frozenset(merged))
        self._sub[key] = sub
        return sub

    @staticmethod
    def _col(md: MdDag, merged: set[str] | frozenset[str], v: str) -> str:
        if v in md.truths and v in merged:
            return md.triple_of(v).proxy
        return v

    # -- per-class conditions and denominator --------------------------------

    def r_z(self, k: int) -> frozenset[str]:
        if k not in self._rz:
            self._check_class(k)
        return self._rz[k]

    def class_denominator(self, k: int) -> Expr:
        if k not in self._den:
            self._check_class(k)
        return self._den[k]

    def class_factors(self, k: int) -> list[Expr]:
        if k not in self._factors:
            self._check_class(k)
        return self._factors[k]

    def _check_class(self, k: int) -> None:
        sched = self.sched
        md = self.md
        sub = self.subproblem(k)
        g = sub.graph
        z = sched.classes[k]

        for m in sorted(z):
            if m not in g:
                raise ScheduleInvalid(Violation(
                    "member", k, f"member {m!r} is not visible in the class "
                    f"subproblem (hidden or already removed)", (m,)))
            st = g.vertex(m).status
            if st == SELECTED:
                raise ScheduleInvalid(Violation(
                    "ii", k, f"member {m!r} is selected", (m,)))
            if st != RANDOM:
                raise ScheduleInvalid(Violation(
                    "member", k, f"member {m!r} is not random", (m,)))
            if m in md.proxies:
                raise ScheduleInvalid(Violation(
                    "member", k, f"proxy {m!r} cannot be fixed", (m,)))

        districts = {frozenset(g.district(m)) for m in z}
        if len(districts) > 1:
            raise ScheduleInvalid(Violation(
                "district", k, f"class {sorted(z)} spans multiple districts",
                tuple(sorted(z))))
        d_z = next(iter(districts))

        stray = (g.descendants(z) & d_z) - z
        if stray:
            raise ScheduleInvalid(Violation(
                "i", k, f"descendants {sorted(stray)} of the class stay in its "
                f"district", tuple(sorted(stray))))

        mb = g.markov_blanket(z)
        rz = frozenset(
            md.triple_of(u).indicator
            for u in (z | mb) & md.truths
            if md.triple_of(u).indicator not in z)
        self._rz[k] = rz

        rz_new = frozenset(r for r in rz if r in g and g.vertex(r).status == RANDOM)
        test = ((g.selected_vertices | rz_new) - mb) - z
        if test:
            cset = mb - test
            if not m_separated(g, z, test, cset & (g.random_vertices | g.fixed_vertices)):
                raise ScheduleInvalid(Violation(
                    "iii", k,
                    f"{sorted(z)} not separated from {sorted(test)} given "
                    f"{sorted(mb)}", tuple(sorted(test))))

        # build the denominator factors
        topo = {v: i for i, v in enumerate(g.topological_order())}
        members = sorted(z, key=lambda v: (topo[v], v))
        factors: list[Expr] = []
        for idx, m in enumerate(members):
            earlier = members[:idx]
            later = set(members[idx:])
            cond = set(mb) | set(earlier) | set(rz_new)
            drops = {u for u in cond
                     if u in md.truths and u not in sub.merged
                     and md.triple_of(u).indicator in later}
            if drops:
                ccheck = (cond - drops) - {m}
                if not m_separated(g, [m], sorted(drops),
                                   sorted(ccheck & (g.random_vertices | g.fixed_vertices))):
                    raise ScheduleInvalid(Violation(
                        "observability", k,
                        f"cannot drop {sorted(drops)} from the conditional for "
                        f"{m!r}", tuple(sorted(drops))))
                cond -= drops
                self.notes.append(
                    f"class {k}: dropped {sorted(drops)} from the {m!r} factor "
                    f"(m-separated given {sorted(cond)})")
            pins: dict[str, int] = {}
            cols: list[str] = []
            for u in sorted(cond):
                if u in md.truths and u not in sub.merged:
                    ind = md.triple_of(u).indicator
                    if ind in rz_new or ind in earlier:
                        pins[ind] = 1
                        cols.append(md.triple_of(u).proxy)
                        continue
                    raise ScheduleInvalid(Violation(
                        "observability", k,
                        f"conditioning set of {m!r} contains the censored "
                        f"variable {u!r} with no pinned indicator", (u,)))
                cols.append(sub.column(u))
            for r in sorted(rz_new | (set(earlier) & md.indicators)):
                pins[r] = 1
            if m in md.truths and m not in sub.merged:
                ind = md.triple_of(m).indicator
                if ind not in rz_new:
                    raise ScheduleInvalid(Violation(
                        "observability", k,
                        f"class member {m!r} has no observable column and its "
                        f"indicator is not selectable", (m,)))
                pins[ind] = 1
                m_col = md.triple_of(m).proxy
            else:
                m_col = sub.column(m)
            given = sorted((set(cols) | set(pins)) & sub.free_cols)
            fac = sub.conditional([m_col], given)
            pins = {r: 1 for r in pins if r in fac.free() or r in fac.contexts()
                    or r in fac.pinned()}
            if pins:
                fac = K.restrict_values(fac, pins)
            factors.append(fac)
        self._factors[k] = factors
        self._den[k] = K.product(factors) if len(factors) > 1 else factors[0]

    # -- results --------------------------------------------------------------

    def step_result(self, k: int) -> FixStepResult:
        sub = self.subproblem(k)
        den = self.class_denominator(k)
        z = self.sched.classes[k]
        rz_new = frozenset(r for r in self.r_z(k)
                           if r in sub.graph and sub.graph.vertex(r).status == RANDOM)
        pins = {r: 1 for r in (z & self.md.indicators) | rz_new}
        g2 = sub.graph.with_statuses(fixed=z, selected={r: 1 for r in rz_new})
        kern = K.quotient(sub.kernel, den)
        if pins:
            kern = K.restrict_values(kern, {p: v for p, v in pins.items()
                                            if p in kern.free()})
        return FixStepResult(g2, kern, den)

    def final(self) -> Subproblem:
        return self.subproblem(None)


def validate_schedule(md: MdDag, sched: FixingSchedule):
    """Walk every class; return (ok, violation-or-None, plan)."""
    plan = SchedulePlan(md, sched)
    try:
        for k in sched.linear_extension():
            plan.class_denominator(k)
        plan.final()
    except ScheduleInvalid as exc:
        return False, exc.violation, plan
    return True, None, plan


def apply_schedule(md: MdDag, sched: FixingSchedule):
    """Validated execution: per-class step results plus the final kernel."""
    ok, violation, plan = validate_schedule(md, sched)
    if not ok:
        raise ScheduleInvalid(violation)
    steps = {k: plan.step_result(k) for k in sched.linear_extension()}
    final = plan.final()
    return steps, final, plan


# ---------------------------------------------------------------------------
# set fixing on a raw graph (single subproblem, possibly several classes)
# ---------------------------------------------------------------------------


def _adhoc_schedule(md: MdDag, classes: Sequence[Iterable[str]],
                    visible: Iterable[str] | None) -> FixingSchedule:
    vis = frozenset(md.truths if visible is None else visible)
    cl = tuple(frozenset(c) for c in classes)
    return FixingSchedule(cl, (), tuple(vis for _ in cl))


def is_fixable_set(md: MdDag, z: Iterable[str],
                   visible: Iterable[str] | None = None):
    """Conditions for fixing the set in the (possibly projected) model graph;
    returns (ok, violation-or-None, r_z)."""
    sched = _adhoc_schedule(md, [z], visible)
    plan = SchedulePlan(md, sched)
    try:
        plan.class_denominator(0)
    except ScheduleInvalid as exc:
        return False, exc.violation, plan._rz.get(0, frozenset())
    return True, None, plan.r_z(0)


def fix_set(md: MdDag, classes: Sequence[Iterable[str]],
            visible: Iterable[str] | None = None) -> FixStepResult:
    """Fix several within-district classes in parallel in one subproblem."""
    sched = _adhoc_schedule(md, classes, visible)
    plan = SchedulePlan(md, sched)
    dens = [plan.class_denominator(k) for k in range(sched.n)]
    sub = plan.subproblem(None)
    den = K.product(dens) if len(dens) > 1 else dens[0]
    return FixStepResult(sub.graph, sub.kernel, den)
