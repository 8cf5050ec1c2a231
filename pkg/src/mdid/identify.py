"""Identification of indicator propensities, the target law, and the full law
by searching for valid fixing schedules.

The search is obstruction-driven.  It starts from the empty schedule for the
queried indicator, validates, and turns each violated condition into repair
moves: fix the offending indicator in an earlier class, hide the triggering
censored variable (latent projection), close a class under its in-district
descendants (set classes), or, as a last resort, fix non-indicator vertices.
States are explored best-first by (class count, hidden count, member count,
canonical text), so the first valid schedule found is minimal in that order
and the emitted functional is reproducible.  Budget exhaustion yields the
verdict "unknown" -- never "not identified": only the collider certificate
licenses that claim, and only for the full law.
"""

from __future__ import annotations

import heapq
import time
from dataclasses import dataclass
from typing import Iterable

from . import kernel as K
from .fixing import (FixingSchedule, SchedulePlan, Violation,
                     validate_schedule)
from .kernel import Expr
from .missing import (ancestral_precondition, ancestral_schedule,
                      assemble_full_law, assemble_target_law, colluder_scan,
                      full_law_obstructions, AssemblyError)
from .model import MdDag


@dataclass
class SearchBudget:
    max_set_size: int = 4
    max_latent_subsets: int = 128
    max_schedules: int = 3000
    time_limit: float = 120.0

    def __post_init__(self):
        if min(self.max_set_size, self.max_latent_subsets,
               self.max_schedules) <= 0 or self.time_limit <= 0:
            raise ValueError("budget fields must be positive")


@dataclass
class IndicatorResult:
    indicator: str
    status: str                      # "identified" | "unknown"
    propensity: Expr | None
    schedule: FixingSchedule | None
    transcript: list[str]
    attempts: int


@dataclass
class IdReport:
    query: str
    status: str                      # "identified" | "not-identified" | "unknown"
    functional: object | None
    propensities: dict[str, Expr]
    schedules: dict[str, FixingSchedule]
    transcript: list[str]
    certificate: tuple[str, str] | None = None


# ---------------------------------------------------------------------------
# state representation
# ---------------------------------------------------------------------------

ClassKey = frozenset
State = tuple  # (classes: frozenset[ClassKey], edges: frozenset[(ClassKey, ClassKey)], hidden: frozenset[str])


def _state_key(state: State) -> str:
    classes, edges, hidden = state
    cbit = ";".join(",".join(sorted(c)) for c in sorted(classes, key=sorted))
    ebit = ";".join(",".join(sorted(a)) + ">" + ",".join(sorted(b))
                    for a, b in sorted(edges, key=lambda e: (sorted(e[0]), sorted(e[1]))))
    hbit = ",".join(sorted(hidden))
    return f"[{cbit}][{ebit}][{hbit}]"


def _priority(md: MdDag, state: State) -> tuple:
    classes, edges, hidden = state
    non_indicator = sum(1 for c in classes for m in c if m not in md.indicators)
    return (len(classes) + 3 * non_indicator, len(hidden),
            sum(len(c) for c in classes), _state_key(state))


def _schedule_from_state(md: MdDag, state: State, target: str,
                         forbid: frozenset[str]) -> FixingSchedule | None:
    classes, edges, hidden = state
    final = None
    for c in classes:
        if target in c:
            final = c
    if final is None or len(final) != 1:
        return None
    ordered = sorted(classes, key=sorted)
    idx = {c: i for i, c in enumerate(ordered)}
    order = {(idx[a], idx[b]) for a, b in edges if a in idx and b in idx}
    fi = idx[final]
    for c, i in idx.items():
        if i != fi:
            order.add((i, fi))
    try:
        probe = FixingSchedule(tuple(ordered), tuple(order))
    except Exception:
        return None
    visible_base = md.truths - hidden - forbid
    proms = []
    for k in range(probe.n):
        rendered = set()
        for j in probe.cone(k):
            for m in probe.classes[j]:
                if m in md.indicators:
                    rendered.add(md.triple_of(m).truth)
                elif m in md.truths:
                    rendered.add(m)
        proms.append((visible_base | rendered) - forbid)
    return FixingSchedule(tuple(ordered), tuple(order), tuple(proms))


def _acyclic(classes, edges) -> bool:
    try:
        ordered = sorted(classes, key=sorted)
        idx = {c: i for i, c in enumerate(ordered)}
        FixingSchedule(tuple(ordered),
                       tuple((idx[a], idx[b]) for a, b in edges))
        return True
    except Exception:
        return False


def _successors(md: MdDag, state: State, sched: FixingSchedule,
                viol: Violation, target: str,
                forbid: frozenset[str]) -> list[State]:
    classes, edges, hidden = state
    out: list[State] = []
    k = viol.class_index
    zk = sched.classes[k] if k is not None and k < sched.n else frozenset({target})

    def class_of(member: str):
        for c in classes:
            if member in c:
                return c
        return None

    def add_before(member: str):
        holder = class_of(member)
        if holder == zk:
            return
        if holder is None:
            if member in md.proxies:
                return
            nc = frozenset({member})
            ncl = classes | {nc}
            ned = edges | {(nc, zk)}
            if _acyclic(ncl, ned):
                out.append((ncl, ned, hidden))
        else:
            ned = edges | {(holder, zk)}
            if (holder, zk) not in edges and _acyclic(classes, ned):
                out.append((classes, ned, hidden))

    def hide(truth: str):
        if truth not in md.truths or truth in hidden:
            return
        if any(truth in c for c in classes):
            return
        out.append((classes, edges, hidden | {truth}))

    def nonindicator_candidates():
        """Last-resort repairs: fix fully observed or censored ancestors."""
        g = md.graph
        anc = g.ancestors(zk)
        for c in sorted((md.observed | md.truths) & anc - zk):
            add_before(c)

    if viol.condition == "ii":
        for m in viol.vertices:
            if m in md.indicators:
                hide(md.triple_of(m).truth)
    elif viol.condition == "iii":
        for m in viol.vertices:
            if m in md.indicators:
                add_before(m)
        for m in viol.vertices:
            if m in md.indicators:
                hide(md.triple_of(m).truth)
        nonindicator_candidates()
    elif viol.condition == "i":
        g = md.graph
        for s in viol.vertices:
            if s not in g:
                continue
            for c in sorted(g.children(zk & frozenset(g.vertex_names))):
                if c not in md.proxies and (c == s or s in g.descendants([c])):
                    add_before(c)
        grow = set(zk) | set(viol.vertices)
        if all(v not in md.proxies for v in grow):
            merged = set(grow)
            changed = True
            while changed:
                changed = False
                for c in classes:
                    if c & merged and not c <= merged:
                        merged |= c
                        changed = True
            if target not in merged:
                newc = frozenset(merged)
                ncl = {c for c in classes if not c & merged} | {newc}
                ned = set()
                for a, b in edges:
                    a2 = newc if a & merged else a
                    b2 = newc if b & merged else b
                    if a2 != b2:
                        ned.add((a2, b2))
                if _acyclic(frozenset(ncl), frozenset(ned)):
                    out.append((frozenset(ncl), frozenset(ned), hidden))
    elif viol.condition in ("observability", "full"):
        for u in viol.vertices:
            if u in md.truths:
                add_before(md.triple_of(u).indicator)
        for u in viol.vertices:
            if u in md.truths:
                hide(u)
        for u in viol.vertices:
            if u in md.truths and u not in forbid:
                add_before(u)
        nonindicator_candidates()
    return out


def _full_law_check(md: MdDag, indicator: str, q: Expr) -> Violation | None:
    problems = full_law_obstructions(md, indicator, q)
    if not problems:
        return None
    culprits = []
    for t in md.triples:
        if t.proxy in (q.free() | q.contexts()) and q.pinned().get(t.indicator) != 1:
            culprits.append(t.truth)
    return Violation("full", None, "; ".join(problems), tuple(culprits))


def identify_indicator(md: MdDag, indicator: str,
                       budget: SearchBudget | None = None,
                       forbid_promotion: Iterable[str] = (),
                       full_mode: bool = False,
                       use_fast_path: bool = True) -> IndicatorResult:
    """Search for a valid fixing schedule whose final class is the indicator;
    emit the final class denominator as the identified propensity."""
    budget = budget or SearchBudget()
    forbid = frozenset(forbid_promotion)
    if indicator not in md.indicators:
        raise ValueError(f"{indicator!r} is not a missingness indicator")
    t0 = time.monotonic()
    transcript: list[str] = []
    attempts = 0

    def finish(sched: FixingSchedule, plan: SchedulePlan) -> IndicatorResult:
        fi = next(i for i, c in enumerate(sched.classes) if indicator in c)
        q = plan.class_denominator(fi)
        transcript.append(f"{indicator}: schedule {sched.describe()}")
        hidden_truths = md.truths - sched.promotions[fi]
        if hidden_truths:
            transcript.append(
                f"{indicator}: censored variables treated as latent: "
                f"{sorted(hidden_truths)}")
        for note in plan.notes:
            transcript.append(f"{indicator}: {note}")
        for t in md.triples:
            if q.pinned().get(t.indicator) == 1 and t.proxy in (q.free() | q.contexts()):
                transcript.append(
                    f"{indicator}: {t.truth} read off proxy {t.proxy} under "
                    f"{t.indicator}=1")
        transcript.append(f"{indicator}: propensity {K.render(q, 'sexpr')}")
        return IndicatorResult(indicator, "identified", q, sched, transcript,
                               attempts)

    def try_schedule(sched: FixingSchedule):
        nonlocal attempts
        attempts += 1
        ok, viol, plan = validate_schedule(md, sched)
        if ok and full_mode:
            fi = next(i for i, c in enumerate(sched.classes) if indicator in c)
            viol2 = _full_law_check(md, indicator, plan.class_denominator(fi))
            if viol2 is not None:
                return False, viol2, plan
        return ok, viol, plan

    # fast path: the ancestrality-induced schedule
    if use_fast_path and not forbid and not full_mode and ancestral_precondition(md):
        sched = ancestral_schedule(md, indicator)
        ok, viol, plan = try_schedule(sched)
        if ok:
            transcript.append(f"{indicator}: ancestral fast path")
            return finish(sched, plan)
        transcript.append(f"{indicator}: ancestral fast path failed: {viol}")

    start: State = (frozenset({frozenset({indicator})}), frozenset(), forbid)
    heap: list[tuple[tuple, State]] = [(_priority(md, start), start)]
    seen = {_state_key(start)}
    hidden_seen = {forbid}

    while heap:
        if attempts >= budget.max_schedules or time.monotonic() - t0 > budget.time_limit:
            transcript.append(f"{indicator}: budget exhausted after {attempts} "
                              f"schedules")
            break
        _, state = heapq.heappop(heap)
        sched = _schedule_from_state(md, state, indicator, forbid)
        if sched is None:
            continue
        if any(len(c) > budget.max_set_size for c in sched.classes):
            continue
        ok, viol, plan = try_schedule(sched)
        if ok:
            return finish(sched, plan)
        transcript.append(
            f"{indicator}: {sched.describe()} hidden={sorted(state[2])} -> "
            f"({viol.condition}) {viol.detail}")
        for nxt in _successors(md, state, sched, viol, indicator, forbid):
            key = _state_key(nxt)
            if key in seen:
                continue
            if nxt[2] not in hidden_seen and len(hidden_seen) >= budget.max_latent_subsets:
                continue
            hidden_seen.add(nxt[2])
            seen.add(key)
            heapq.heappush(heap, (_priority(md, nxt), nxt))

    return IndicatorResult(indicator, "unknown", None, None, transcript, attempts)


# ---------------------------------------------------------------------------
# whole-law queries
# ---------------------------------------------------------------------------


def identify_target(md: MdDag, budget: SearchBudget | None = None) -> IdReport:
    """Identify every indicator propensity, then assemble the target law; the
    verdict is never "not-identified" (no completeness claim is available)."""
    budget = budget or SearchBudget()
    transcript: list[str] = []
    props: dict[str, Expr] = {}
    scheds: dict[str, FixingSchedule] = {}
    if ancestral_precondition(md):
        transcript.append("ancestral precondition holds: fast-path schedules")
    for r in md.sorted_indicators():
        res = identify_indicator(md, r, budget)
        transcript += res.transcript
        if res.status != "identified":
            transcript.append(f"{r}: unknown; target verdict unknown")
            return IdReport("target", "unknown", None, props, scheds, transcript)
        props[r] = res.propensity
        scheds[r] = res.schedule
    functional = assemble_target_law(md, props)
    transcript.append("target law: all-observed slice divided by the "
                      "propensity product; proxies renamed to censored "
                      "variables under R=1")
    return IdReport("target", "identified", functional, props, scheds, transcript)


def identify_full(md: MdDag, budget: SearchBudget | None = None) -> IdReport:
    budget = budget or SearchBudget()
    transcript: list[str] = []
    pairs = colluder_scan(md)
    if pairs:
        ri, rj = pairs[0]
        transcript.append(
            f"collider certificate: {rj} and its censored variable are both "
            f"parents of {ri}; the full law is not identified")
        return IdReport("full", "not-identified", None, {}, {}, transcript,
                        certificate=(ri, rj))
    props: dict[str, Expr] = {}
    scheds: dict[str, FixingSchedule] = {}
    g = md.graph
    for r in md.sorted_indicators():
        forbid = frozenset(md.triple_of(u).truth
                           for u in (g.parents([r]) & md.indicators))
        res = identify_indicator(md, r, budget, forbid_promotion=forbid,
                                 full_mode=True)
        transcript += res.transcript
        if res.status != "identified":
            transcript.append(f"{r}: unknown; full-law verdict unknown")
            return IdReport("full", "unknown", None, props, scheds, transcript)
        props[r] = res.propensity
        scheds[r] = res.schedule
    try:
        functional = assemble_full_law(md, props)
    except AssemblyError as exc:
        transcript.append(f"assembly refused: {exc}")
        return IdReport("full", "unknown", None, props, scheds, transcript)
    return IdReport("full", "identified", functional, props, scheds, transcript)
