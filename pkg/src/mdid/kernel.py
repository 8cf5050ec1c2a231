"""Symbolic kernel expressions over a discrete law, with numeric evaluation.

Expression nodes: Atom (a conditional of a named law), Marginal, Conditional,
Product, Quotient, Restrict (evaluation at fixed values) and One (the
normalized unit).  Expressions are immutable.  ``canonicalize`` rewrites a
tree into a deterministic normal form: restrictions pushed onto atoms,
marginals absorbed into atoms and distributed over products variable by
variable, conditionals expanded into quotients, quotients flattened with
common factors cancelled, and chain-rule merges applied to pairs of atoms of
the same law.  Golden tests compare canonical forms, so the normal form is
deliberately order-insensitive: products are sorted by rendered text.

Numeric evaluation is dense, over named axes; 0/0 cells become NaN markers
(an explicit "undefined" signal, counted by callers) rather than raising.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np


class ExprError(ValueError):
    """Raised for ill-formed expressions or invalid operations."""


Value = object  # domain values: ints or strings ("?" for censored proxies)
Pins = tuple[tuple[str, Value], ...]


def _names(xs: Iterable[str]) -> tuple[str, ...]:
    return tuple(sorted(set(xs)))


def _pins(assignments) -> Pins:
    if isinstance(assignments, Mapping):
        items = assignments.items()
    else:
        items = assignments
    out: dict[str, Value] = {}
    for var, val in items:
        if var in out and out[var] != val:
            raise ExprError(f"conflicting restriction for {var!r}")
        out[var] = val
    return tuple(sorted(out.items()))


@dataclass(frozen=True)
class Expr:
    """Base class; concrete nodes below."""

    def free(self) -> frozenset[str]:
        raise NotImplementedError

    def contexts(self) -> frozenset[str]:
        raise NotImplementedError

    def pinned(self) -> dict[str, Value]:
        raise NotImplementedError

    def mentioned(self) -> frozenset[str]:
        return self.free() | self.contexts() | frozenset(self.pinned())


@dataclass(frozen=True)
class One(Expr):
    """Multiplicative unit: a fully summed-out normalized kernel."""

    def free(self):
        return frozenset()

    def contexts(self):
        return frozenset()

    def pinned(self):
        return {}


@dataclass(frozen=True)
class Atom(Expr):
    """p_law(vars | ctx), a conditional table of the named law."""

    law: str
    vars: tuple[str, ...]
    ctx: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "vars", _names(self.vars))
        object.__setattr__(self, "ctx", _names(self.ctx))
        if set(self.vars) & set(self.ctx):
            raise ExprError(f"atom vars and ctx overlap: {self}")

    def free(self):
        return frozenset(self.vars)

    def contexts(self):
        return frozenset(self.ctx)

    def pinned(self):
        return {}


@dataclass(frozen=True)
class Restrict(Expr):
    """Child evaluated at fixed values; restricted variables leave the axes."""

    child: Expr
    pins: Pins

    def __post_init__(self):
        object.__setattr__(self, "pins", _pins(self.pins))

    def free(self):
        return self.child.free() - frozenset(k for k, _ in self.pins)

    def contexts(self):
        return self.child.contexts() - frozenset(k for k, _ in self.pins)

    def pinned(self):
        out = dict(self.child.pinned())
        out.update(dict(self.pins))
        return out


@dataclass(frozen=True)
class Marginal(Expr):
    """Child summed over the given variables."""

    child: Expr
    over: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "over", _names(self.over))

    def free(self):
        return self.child.free() - frozenset(self.over)

    def contexts(self):
        return self.child.contexts()

    def pinned(self):
        return self.child.pinned()


@dataclass(frozen=True)
class Conditional(Expr):
    """Child, a kernel, conditioned on a subset of its free variables."""

    child: Expr
    on: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "on", _names(self.on))

    def free(self):
        return self.child.free() - frozenset(self.on)

    def contexts(self):
        return self.child.contexts() | frozenset(self.on)

    def pinned(self):
        return self.child.pinned()


@dataclass(frozen=True)
class Product(Expr):
    children: tuple[Expr, ...]

    def free(self):
        out: frozenset[str] = frozenset()
        for c in self.children:
            out |= c.free()
        return out

    def contexts(self):
        out: frozenset[str] = frozenset()
        for c in self.children:
            out |= c.contexts()
        return out - self.free()

    def pinned(self):
        out: dict[str, Value] = {}
        for c in self.children:
            out.update(c.pinned())
        return out


@dataclass(frozen=True)
class Quotient(Expr):
    num: Expr
    den: Expr

    def free(self):
        return self.num.free() | self.den.free()

    def contexts(self):
        return (self.num.contexts() | self.den.contexts()) - self.free()

    def pinned(self):
        out = dict(self.den.pinned())
        out.update(self.num.pinned())
        return out


# ---------------------------------------------------------------------------
# construction helpers (validated operations)
# ---------------------------------------------------------------------------


def marginalize(e: Expr, out: Iterable[str]) -> Expr:
    """Sum the expression over ``out`` (a subset of its free variables)."""
    outs = _names(out)
    bad = set(outs) - e.free()
    if bad:
        raise ExprError(f"cannot marginalize non-free variables {sorted(bad)}")
    if not outs:
        return e
    return canonicalize(Marginal(e, outs))


def condition(e: Expr, on: Iterable[str]) -> Expr:
    """Condition a kernel on a subset of its free variables."""
    ons = _names(on)
    bad = set(ons) - e.free()
    if bad:
        raise ExprError(f"cannot condition on non-free variables {sorted(bad)}")
    if not ons:
        return e
    return canonicalize(Conditional(e, ons))


def restrict_values(e: Expr, assignments) -> Expr:
    """Evaluate the expression at fixed values of free or context variables.

    A pin is kept as long as the variable is still free or a context
    somewhere in the tree: a variable may be pinned in one factor yet vary in
    another, and each occurrence must be sliced.
    """
    pins = _pins(assignments)
    known = e.free() | e.contexts() | set(e.pinned())
    cur = e.pinned()
    for var, val in pins:
        if var not in known:
            raise ExprError(f"cannot restrict unknown variable {var!r}")
        if var in cur and cur[var] != val:
            raise ExprError(f"conflicting restriction for {var!r}")
    new = tuple((v, x) for v, x in pins
                if v in e.free() or v in e.contexts())
    if not new:
        return e
    return canonicalize(Restrict(e, new))


def conditional_of(e: Expr, targets: Iterable[str], given: Iterable[str]) -> Expr:
    """q(targets | given) derived from the kernel e by marginalizing the rest
    and conditioning."""
    ts = _names(targets)
    gs = _names(given)
    if set(ts) & set(gs):
        raise ExprError("targets and given overlap")
    rest = e.free() - set(ts) - set(gs)
    return condition(marginalize(e, rest), gs)


def product(children: Iterable[Expr]) -> Expr:
    return canonicalize(Product(tuple(children)))


def quotient(num: Expr, den: Expr) -> Expr:
    return canonicalize(Quotient(num, den))


# ---------------------------------------------------------------------------
# canonicalization
# ---------------------------------------------------------------------------


def _leaf_parts(e: Expr):
    """Return (law, joint vars, ctx vars, pins dict) when e is an atom leaf,
    possibly Restrict-wrapped, else None."""
    if isinstance(e, Atom):
        return e.law, set(e.vars), set(e.ctx), {}
    if isinstance(e, Restrict) and isinstance(e.child, Atom):
        a = e.child
        return a.law, set(a.vars), set(a.ctx), dict(e.pins)
    return None


def _make_leaf(law: str, joint: set[str], ctx: set[str], pins: dict[str, Value]) -> Expr:
    pins = {k: v for k, v in pins.items() if k in joint or k in ctx}
    if not (joint - set(pins)) and not any(k in joint for k in pins):
        # no joint part at all: p(|ctx) == 1
        return One()
    atom = Atom(law, tuple(joint), tuple(ctx))
    if pins:
        return Restrict(atom, tuple(sorted(pins.items())))
    return atom


def sort_key(e: Expr) -> str:
    return render(e, "sexpr")


def _pins_aligned(j1, g1, pin1, j2, g2, pin2) -> bool:
    """Shared variables must agree on whether (and where) they are pinned,
    else the chain-rule identities do not hold cellwise."""
    for v in (j1 | g1) & (j2 | g2):
        if (v in pin1) != (v in pin2):
            return False
        if v in pin1 and pin1[v] != pin2[v]:
            return False
    return True


def _merge_leaf_quotient(n: Expr, d: Expr):
    """Chain-rule merge p(J1|G1) / p(J2|G2) -> p(J1-J2-D | J2+D+G1) p(D|G1)
    where D = G2-G1, valid when J2 and D sit inside J1.  Returns a list of
    replacement factors or None."""
    pn = _leaf_parts(n)
    pd = _leaf_parts(d)
    if pn is None or pd is None:
        return None
    law1, j1, g1, pin1 = pn
    law2, j2, g2, pin2 = pd
    if law1 != law2:
        return None
    if not _pins_aligned(j1, g1, pin1, j2, g2, pin2):
        return None
    if not (j2 <= j1 and g1 <= g2):
        return None
    dset = g2 - g1
    if not dset <= j1 or dset & j2:
        return None
    pins = dict(pin1)
    pins.update(pin2)
    rest = j1 - j2 - dset
    out = [_make_leaf(law1, rest, j2 | dset | g1, pins)]
    if dset:
        out.append(_make_leaf(law1, dset, set(g1), pins))
    return out


def _merge_leaf_product(a: Expr, b: Expr):
    """Chain-rule recomposition p(J1 | J2+G2) p(J2 | G2) -> p(J1+J2 | G2)."""
    pa_ = _leaf_parts(a)
    pb_ = _leaf_parts(b)
    if pa_ is None or pb_ is None:
        return None
    law1, j1, g1, pin1 = pa_
    law2, j2, g2, pin2 = pb_
    if law1 != law2 or not _pins_aligned(j1, g1, pin1, j2, g2, pin2):
        return None
    if g1 == (j2 | g2):
        pins = dict(pin1)
        pins.update(pin2)
        return _make_leaf(law1, j1 | j2, set(g2), pins)
    return None


def _num_den(e: Expr) -> tuple[list[Expr], list[Expr]]:
    """Flatten an expression into numerator and denominator factor lists."""
    if isinstance(e, Product):
        nums: list[Expr] = []
        dens: list[Expr] = []
        for c in e.children:
            n, d = _num_den(c)
            nums += n
            dens += d
        return nums, dens
    if isinstance(e, Quotient):
        n1, d1 = _num_den(e.num)
        n2, d2 = _num_den(e.den)
        return n1 + d2, d1 + n2
    if isinstance(e, One):
        return [], []
    return [e], []


def _rebuild(nums: list[Expr], dens: list[Expr]) -> Expr:
    # cancel structurally equal factors
    dens = list(dens)
    remaining: list[Expr] = []
    for n in nums:
        try:
            dens.remove(n)
        except ValueError:
            remaining.append(n)
    nums = remaining
    # chain-rule merges between atom leaves
    changed = True
    while changed:
        changed = False
        for d in list(dens):
            for i, n in enumerate(nums):
                merged = _merge_leaf_quotient(n, d)
                if merged is not None:
                    nums = nums[:i] + [m for m in merged if not isinstance(m, One)] + nums[i + 1:]
                    dens.remove(d)
                    changed = True
                    break
            if changed:
                break

    def recompose(factors: list[Expr]) -> list[Expr]:
        done = False
        while not done:
            done = True
            for i in range(len(factors)):
                for j in range(len(factors)):
                    if i == j:
                        continue
                    merged = _merge_leaf_product(factors[i], factors[j])
                    if merged is not None:
                        keep = [f for k, f in enumerate(factors) if k not in (i, j)]
                        if not isinstance(merged, One):
                            keep.append(merged)
                        factors = keep
                        done = False
                        break
                if not done:
                    break
        return factors

    nums = recompose(nums)
    dens = recompose(dens)
    nums = sorted(nums, key=sort_key)
    dens = sorted(dens, key=sort_key)
    num: Expr
    if not nums:
        num = One()
    elif len(nums) == 1:
        num = nums[0]
    else:
        num = Product(tuple(nums))
    if not dens:
        return num
    den = dens[0] if len(dens) == 1 else Product(tuple(dens))
    return Quotient(num, den)


def _push_restrict(e: Expr, pins: dict[str, Value]) -> Expr:
    """Push a restriction into e; pins not mentioned by e are dropped."""
    mine = {k: v for k, v in pins.items() if k in e.mentioned()}
    if not mine:
        return e
    if isinstance(e, One):
        return e
    if isinstance(e, Atom):
        return _make_leaf(e.law, set(e.vars), set(e.ctx), mine)
    if isinstance(e, Restrict):
        merged = dict(e.pins)
        for k, v in mine.items():
            if merged.get(k, v) != v:
                raise ExprError(f"conflicting restriction for {k!r}")
            merged[k] = v
        return _push_restrict(e.child, merged)
    if isinstance(e, Marginal):
        if set(mine) & set(e.over):
            raise ExprError("cannot restrict a marginalized variable")
        return Marginal(_push_restrict(e.child, mine), e.over)
    if isinstance(e, Product):
        return Product(tuple(_push_restrict(c, mine) for c in e.children))
    if isinstance(e, Quotient):
        return Quotient(_push_restrict(e.num, mine), _push_restrict(e.den, mine))
    if isinstance(e, Conditional):
        # canonical trees never contain Conditional; expand first
        return _push_restrict(canonicalize(e), mine)
    raise ExprError(f"unknown node {type(e).__name__}")


def _varying(e: Expr) -> frozenset[str]:
    """Variables the expression actually varies over (free or context)."""
    return e.free() | e.contexts()


def _marginalize_canon(e: Expr, over: set[str]) -> Expr:
    """Canonical marginalization of an already-canonical e."""
    over = set(over) & e.free()
    if not over:
        return e
    parts = _leaf_parts(e)
    if parts is not None:
        law, j, g, pins = parts
        return _make_leaf(law, j - over, g, pins)
    if isinstance(e, Marginal):
        return _marginalize_canon(e.child, over | set(e.over))
    if isinstance(e, Product):
        residual = set(over)
        children = list(e.children)
        progress = True
        while progress and residual:
            progress = False
            for t in sorted(residual):
                hits = [i for i, c in enumerate(children) if t in c.free()]
                blockers = [i for i, c in enumerate(children)
                            if t in _varying(c) and i not in hits]
                if len(hits) == 1 and not blockers:
                    children[hits[0]] = _marginalize_canon(children[hits[0]], {t})
                    residual.discard(t)
                    progress = True
        inner = canonicalize(Product(tuple(children)))
        residual &= inner.free()
        if residual:
            return Marginal(inner, tuple(sorted(residual)))
        return inner
    if isinstance(e, Quotient):
        pushable = over - _varying(e.den)
        if pushable:
            out = canonicalize(Quotient(_marginalize_canon(e.num, pushable), e.den))
            rest = over - pushable
            return _marginalize_canon(out, rest) if rest else out
        return Marginal(e, tuple(sorted(over)))
    return Marginal(e, tuple(sorted(over)))


def canonicalize(e: Expr) -> Expr:
    if isinstance(e, (One, Atom)):
        return e
    if isinstance(e, Restrict):
        child = canonicalize(e.child)
        return canonicalize(_push_restrict(child, dict(e.pins))) \
            if _needs_push(child) else _push_restrict(child, dict(e.pins))
    if isinstance(e, Marginal):
        child = canonicalize(e.child)
        return _marginalize_canon(child, set(e.over))
    if isinstance(e, Conditional):
        child = canonicalize(e.child)
        if not e.on:
            return child
        parts = _leaf_parts(child)
        if parts is not None:
            law, j, g, pins = parts
            return _make_leaf(law, j - set(e.on), g | set(e.on), pins)
        if isinstance(child, Conditional):
            return canonicalize(Conditional(child.child, tuple(set(e.on) | set(child.on))))
        denom = _marginalize_canon(child, child.free() - set(e.on))
        return canonicalize(Quotient(child, denom))
    if isinstance(e, (Product, Quotient)):
        if isinstance(e, Product):
            children = [canonicalize(c) for c in e.children]
            nums: list[Expr] = []
            dens: list[Expr] = []
            for c in children:
                n, d = _num_den(c)
                nums += n
                dens += d
        else:
            num = canonicalize(e.num)
            den = canonicalize(e.den)
            n1, d1 = _num_den(num)
            n2, d2 = _num_den(den)
            nums, dens = n1 + d2, d1 + n2
        return _rebuild(nums, dens)
    raise ExprError(f"unknown node {type(e).__name__}")


def _needs_push(e: Expr) -> bool:
    return not (isinstance(e, Atom) or isinstance(e, One)
                or (isinstance(e, Restrict) and isinstance(e.child, Atom)))


# ---------------------------------------------------------------------------
# rendering and parsing
# ---------------------------------------------------------------------------


def _latex_name(v: str) -> str:
    return v.replace("(1)", "^{(1)}")


def _render_latex(e: Expr) -> str:
    if isinstance(e, One):
        return "1"
    if isinstance(e, Atom):
        body = ",".join(_latex_name(v) for v in e.vars)
        if e.ctx:
            body += r" \mid " + ",".join(_latex_name(v) for v in e.ctx)
        return f"{e.law}({body})"
    if isinstance(e, Restrict):
        pins = dict(e.pins)
        if isinstance(e.child, Atom):
            a = e.child
            vs = [f"{_latex_name(v)}={pins[v]}" if v in pins else _latex_name(v)
                  for v in a.vars]
            cs = [f"{_latex_name(v)}={pins[v]}" if v in pins else _latex_name(v)
                  for v in a.ctx]
            body = ",".join(vs)
            if cs:
                body += r" \mid " + ",".join(cs)
            return f"{a.law}({body})"
        inner = _render_latex(e.child)
        at = ",".join(f"{_latex_name(k)}={v}" for k, v in e.pins)
        return rf"\left.{inner}\right|_{{{at}}}"
    if isinstance(e, Marginal):
        return rf"\sum_{{{','.join(_latex_name(v) for v in e.over)}}} {_render_latex(e.child)}"
    if isinstance(e, Conditional):
        return rf"\left[{_render_latex(e.child)}\right]\big(\cdot \mid {','.join(e.on)}\big)"
    if isinstance(e, Product):
        bits = []
        for c in e.children:
            s = _render_latex(c)
            if isinstance(c, (Marginal, Quotient)):
                s = rf"\left({s}\right)"
            bits.append(s)
        return r"\, ".join(bits)
    if isinstance(e, Quotient):
        return rf"\frac{{{_render_latex(e.num)}}}{{{_render_latex(e.den)}}}"
    raise ExprError(f"unknown node {type(e).__name__}")


def _render_sexpr(e: Expr) -> str:
    if isinstance(e, One):
        return "(one)"
    if isinstance(e, Atom):
        return f"(atom {e.law} ({' '.join(e.vars)}) ({' '.join(e.ctx)}))"
    if isinstance(e, Restrict):
        pins = " ".join(f"({k} {v})" for k, v in e.pins)
        return f"(at {_render_sexpr(e.child)} ({pins}))"
    if isinstance(e, Marginal):
        return f"(marg {_render_sexpr(e.child)} ({' '.join(e.over)}))"
    if isinstance(e, Conditional):
        return f"(cond {_render_sexpr(e.child)} ({' '.join(e.on)}))"
    if isinstance(e, Product):
        return f"(prod {' '.join(_render_sexpr(c) for c in e.children)})"
    if isinstance(e, Quotient):
        return f"(quot {_render_sexpr(e.num)} {_render_sexpr(e.den)})"
    raise ExprError(f"unknown node {type(e).__name__}")


def render(e: Expr, fmt: str = "sexpr") -> str:
    if fmt == "sexpr":
        return _render_sexpr(e)
    if fmt == "latex":
        return _render_latex(e)
    raise ExprError(f"unknown format {fmt!r}")


def _tokenize(text: str) -> list[str]:
    return text.replace("(", " ( ").replace(")", " ) ").split()


def _read(tokens: list[str], pos: int):
    if tokens[pos] != "(":
        return tokens[pos], pos + 1
    out = []
    pos += 1
    while tokens[pos] != ")":
        item, pos = _read(tokens, pos)
        out.append(item)
    return out, pos + 1


def _coerce(v: str) -> Value:
    try:
        return int(v)
    except ValueError:
        return v


def _build(form) -> Expr:
    if not isinstance(form, list) or not form:
        raise ExprError(f"bad s-expression fragment: {form!r}")
    head = form[0]
    if head == "one":
        return One()
    if head == "atom":
        if len(form) != 4:
            raise ExprError("atom expects name, vars, ctx")
        return Atom(form[1], tuple(form[2]), tuple(form[3]))
    if head == "at":
        pins = tuple((p[0], _coerce(p[1])) for p in form[2])
        return Restrict(_build(form[1]), pins)
    if head == "marg":
        return Marginal(_build(form[1]), tuple(form[2]))
    if head == "cond":
        return Conditional(_build(form[1]), tuple(form[2]))
    if head == "prod":
        return Product(tuple(_build(f) for f in form[1:]))
    if head == "quot":
        return Quotient(_build(form[1]), _build(form[2]))
    raise ExprError(f"unknown s-expression head {head!r}")


def parse(text: str) -> Expr:
    tokens = _tokenize(text)
    if not tokens:
        raise ExprError("empty expression")
    form, pos = _read(tokens, 0)
    if pos != len(tokens):
        raise ExprError("trailing tokens in expression")
    return _build(form)


# ---------------------------------------------------------------------------
# numeric evaluation over named axes
# ---------------------------------------------------------------------------


@dataclass
class NamedTable:
    """Dense array with named, value-labelled axes."""

    dims: tuple[str, ...]
    domains: dict[str, tuple[Value, ...]]
    data: np.ndarray

    @classmethod
    def scalar(cls, value: float) -> "NamedTable":
        return cls((), {}, np.asarray(value, dtype=float))

    def axis(self, name: str) -> int:
        return self.dims.index(name)

    def sum_out(self, names: Iterable[str]) -> "NamedTable":
        names = [n for n in names if n in self.dims]
        if not names:
            return self
        axes = tuple(self.axis(n) for n in names)
        keep = tuple(d for d in self.dims if d not in names)
        return NamedTable(keep, {d: self.domains[d] for d in keep},
                          self.data.sum(axis=axes))

    def take(self, pins: Mapping[str, Value]) -> "NamedTable":
        out = self
        for name, val in pins.items():
            if name not in out.dims:
                continue
            ax = out.axis(name)
            try:
                idx = out.domains[name].index(val)
            except ValueError:
                raise ExprError(
                    f"value {val!r} outside the domain of {name!r}") from None
            keep = tuple(d for d in out.dims if d != name)
            out = NamedTable(keep, {d: out.domains[d] for d in keep},
                             np.take(out.data, idx, axis=ax))
        return out

    def aligned(self, dims: tuple[str, ...], domains: dict[str, tuple[Value, ...]]) -> np.ndarray:
        shape = []
        src = self.data
        order = [d for d in dims if d in self.dims]
        perm = [self.axis(d) for d in order]
        src = np.transpose(src, perm) if perm else src.reshape(())
        it = iter(order)
        shape = [len(domains[d]) if d in self.dims else 1 for d in dims]
        return src.reshape(shape)

    @staticmethod
    def join(a: "NamedTable", b: "NamedTable", op) -> "NamedTable":
        """Broadcasting binary op over the union of the axes.

        Division: a zero-mass cell divided by zero is a structural zero (it
        carries no probability, e.g. impossible proxy/indicator combinations),
        while positive mass divided by zero is genuinely undefined and becomes
        a NaN marker.  Multiplication lets exact zeros absorb NaN markers, so
        undefined values on zero-mass cells never leak into sums.
        """
        dims = tuple(sorted(set(a.dims) | set(b.dims)))
        domains: dict[str, tuple[Value, ...]] = {}
        for d in dims:
            da = a.domains.get(d)
            db = b.domains.get(d)
            if da is not None and db is not None and da != db:
                raise ExprError(f"domain mismatch on axis {d!r}")
            domains[d] = da if da is not None else db
        xa = a.aligned(dims, domains)
        xb = b.aligned(dims, domains)
        with np.errstate(divide="ignore", invalid="ignore"):
            data = op(xa, xb)
        if op is np.divide:
            xa_b, xb_b = np.broadcast_arrays(xa, xb)
            data = np.where(xb_b == 0, np.where(xa_b == 0, 0.0, np.nan), data)
        elif op is np.multiply:
            xa_b, xb_b = np.broadcast_arrays(xa, xb)
            data = np.where((xa_b == 0) | (xb_b == 0), 0.0, data)
        data = np.where(np.isinf(data), np.nan, data)
        return NamedTable(dims, domains, data)

    def undefined_count(self) -> int:
        return int(np.isnan(self.data).sum())

    def undefined_coords(self, limit: int = 10) -> list[dict[str, Value]]:
        """Coordinates of undefined cells (genuine mass over zero mass),
        for error reports."""
        out = []
        for idx in zip(*np.nonzero(np.isnan(self.data))):
            out.append({d: self.domains[d][i] for d, i in zip(self.dims, idx)})
            if len(out) >= limit:
                break
        return out

    def max_abs_diff(self, other: "NamedTable") -> float:
        dims = tuple(sorted(set(self.dims) | set(other.dims)))
        domains = dict(self.domains)
        domains.update(other.domains)
        a = self.aligned(dims, domains)
        b = other.aligned(dims, domains)
        a, b = np.broadcast_arrays(a, b)
        mask = ~(np.isnan(a) | np.isnan(b))
        if not mask.any():
            return float("nan")
        return float(np.max(np.abs(a[mask] - b[mask])))


def evaluate_numeric(e: Expr, law) -> NamedTable:
    """Evaluate against a DiscreteLaw (duck-typed: needs .name, .variables,
    .marginal(names) -> NamedTable over those axes).  Shared subexpressions
    are evaluated once."""
    return _evaluate(e, law, {})


def _evaluate(e: Expr, law, memo: dict) -> NamedTable:
    key = e
    hit = memo.get(key)
    if hit is not None:
        return hit
    out = _evaluate_raw(e, law, memo)
    memo[key] = out
    return out


def _evaluate_raw(e: Expr, law, memo: dict) -> NamedTable:
    if isinstance(e, One):
        return NamedTable.scalar(1.0)
    if isinstance(e, Atom):
        if e.law != law.name:
            raise ExprError(f"atom law {e.law!r} not resolvable from {law.name!r}")
        want = set(e.vars) | set(e.ctx)
        missing = want - set(law.variables)
        if missing:
            raise ExprError(f"law has no variables {sorted(missing)}")
        joint = law.marginal(want)
        if not e.ctx:
            return joint
        ctx_marg = joint.sum_out(e.vars)
        return NamedTable.join(joint, ctx_marg, np.divide)
    if isinstance(e, Restrict):
        return _evaluate(e.child, law, memo).take(dict(e.pins))
    if isinstance(e, Marginal):
        return _evaluate(e.child, law, memo).sum_out(e.over)
    if isinstance(e, Conditional):
        tab = _evaluate(e.child, law, memo)
        denom = tab.sum_out(e.child.free() - set(e.on))
        return NamedTable.join(tab, denom, np.divide)
    if isinstance(e, Product):
        out = NamedTable.scalar(1.0)
        for c in e.children:
            out = NamedTable.join(out, _evaluate(c, law, memo), np.multiply)
        return out
    if isinstance(e, Quotient):
        return NamedTable.join(_evaluate(e.num, law, memo),
                               _evaluate(e.den, law, memo), np.divide)
    raise ExprError(f"unknown node {type(e).__name__}")
