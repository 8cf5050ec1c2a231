import numpy as np
import pytest

from mdid.fixtures import load
from mdid.graph import Cadmg
from mdid.kernel import NamedTable
from mdid.missing import colluder_scan
from mdid.model import md_dag
from mdid import oracle as O


def table(dims, doms, data):
    return NamedTable(tuple(dims), dict(doms), np.asarray(data, dtype=float))


def collider_pair_cpts(a, b, c, d, e, f, g):
    """Explicit parameter tables for the two-triple collider model."""
    md = load("colluder_pair")
    t = {}
    t["R1"] = table(("R1",), {"R1": (0, 1)}, [a, 1 - a])
    t["X1(1)"] = table(("X1(1)",), {"X1(1)": (0, 1)}, [b, 1 - b])
    t["X2(1)"] = table(("X2(1)",), {"X2(1)": (0, 1)}, [c, 1 - c])
    r2 = np.empty((2, 2, 2))   # axes sorted: R1, R2, X1(1)
    r2[0, 0, 0] = d; r2[0, 1, 0] = 1 - d
    r2[1, 0, 0] = e; r2[1, 1, 0] = 1 - e
    r2[0, 0, 1] = f; r2[0, 1, 1] = 1 - f
    r2[1, 0, 1] = g; r2[1, 1, 1] = 1 - g
    t["R2"] = table(("R1", "R2", "X1(1)"),
                    {"R1": (0, 1), "R2": (0, 1), "X1(1)": (0, 1)}, r2)
    return md, t


def test_sampling_is_deterministic_and_positive():
    md = load("staggered_trio")
    l1 = O.sample_full_law(md, 2, seed=4)
    l2 = O.sample_full_law(md, 2, seed=4)
    allv = frozenset(l1.variables)
    assert l1.marginal(allv).max_abs_diff(l2.marginal(allv)) == 0.0
    for t in l1.factors:
        if any(v in md.proxies for v in t.dims):
            continue
        assert (t.data >= O.CPT_FLOOR - 1e-12).all()


def test_mcar_two_triples_is_product_law():
    md = md_dag([], ["X1", "X2"])
    law = O.sample_full_law(md, 2, seed=1)
    gap = O.ci_check(law, ["X1(1)"], ["R1"])
    assert gap <= 1e-12
    gap = O.ci_check(law, ["R1"], ["R2"])
    assert gap <= 1e-12


def test_observed_law_mass_and_consistency():
    md = load("latent_trio")
    full = O.sample_full_law(md, 2, seed=7)
    obs = O.derive_observed_law(md, full)
    assert abs(float(obs.table.data.sum()) - 1.0) <= 1e-12
    # refactoring the joint by the graph recovers the sampled CPTs
    g = md.graph
    allv = frozenset(full.variables)
    joint = full.marginal(allv)
    for t in full.factors:
        child = next(v for v in t.dims
                     if set(t.dims) == {v} | set(g.parents([v])))
        pa = frozenset(g.parents([child]))
        num = full.marginal(pa | {child})
        den = full.marginal(pa)
        got = NamedTable.join(num, den, np.divide)
        mask = ~np.isnan(got.aligned(t.dims, t.domains))
        diff = np.abs(got.aligned(t.dims, t.domains) - t.data)
        assert np.nanmax(np.where(mask, diff, 0.0)) <= 1e-12


def test_collider_pair_parameter_table():
    # explicit parameters reproduce the closed-form observed masses
    a, b, c, d, e, f, g = 0.4, 0.5, 0.3, 0.3, 0.25, 0.5, 0.65
    md, tables = collider_pair_cpts(a, b, c, d, e, f, g)
    full = O.sample_full_law(md, 2, seed=0, tables=tables)
    obs = O.derive_observed_law(md, full)
    cell = obs.marginal(frozenset({"R1", "R2"})).take({"R1": 0, "R2": 0})
    assert abs(float(cell.data) - a * (d * b + f * (1 - b))) <= 1e-12
    cell = obs.marginal(frozenset({"R1", "R2", "X1"})).take(
        {"R1": 1, "R2": 0, "X1": 0})
    assert abs(float(cell.data) - (1 - a) * e * b) <= 1e-12


def test_constraint_surface_pair_agree_on_observed_law():
    # holding the censored mixture constant hides the change entirely
    a, b, c = 0.4, 0.5, 0.3
    d1, f1 = 0.3, 0.5
    d2, f2 = 0.5, 0.3           # d*b + f*(1-b) = 0.4 in both
    md, t1 = collider_pair_cpts(a, b, c, d1, 0.25, f1, 0.65)
    _, t2 = collider_pair_cpts(a, b, c, d2, 0.25, f2, 0.65)
    l1 = O.sample_full_law(md, 2, seed=0, tables=t1)
    l2 = O.sample_full_law(md, 2, seed=0, tables=t2)
    o1, o2 = O.derive_observed_law(md, l1), O.derive_observed_law(md, l2)
    assert o1.max_abs_diff(o2) <= 1e-12
    allv = frozenset(l1.variables)
    assert l1.marginal(allv).max_abs_diff(l2.marginal(allv)) >= 1e-3


def test_ci_check_examples():
    md = md_dag([], ["X1", "X2"])
    law = O.sample_full_law(md, 2, seed=3)
    assert O.ci_check(law, ["X1(1)"], ["X2(1)"]) <= 1e-12
    g = Cadmg("AB", [("A", "B")])
    law2 = O.sample_dag_law(g, 2, seed=1)
    assert O.ci_check(law2, ["A"], ["B"]) > 1e-3


def test_verify_functional_negative_control():
    # a deliberately wrong propensity must be loudly wrong: pretend R1 is
    # missing-completely-at-random although it depends on censored parents
    md = load("crisscross")
    from mdid.identify import identify_target
    from mdid import kernel as K
    rep = identify_target(md)
    assert rep.status == "identified"
    good = O.verify_target_functional(md, rep.functional, trials=20, seed=5)
    assert good.max_error <= 1e-9
    from mdid.missing import assemble_target_law
    wrong = dict(rep.propensities)
    wrong["R1"] = K.Atom("p", ("R1",))
    bad = assemble_target_law(md, wrong)
    failures = 0
    for t in range(100):
        full = O.sample_full_law(md, 2, seed=1000 + t)
        obs = O.derive_observed_law(md, full)
        err = O.target_law(md, full).max_abs_diff(bad.evaluate(obs))
        failures += err >= 1e-3
    assert failures >= 95


def test_colluder_witness_quantitative():
    md = load("colluder_pair")
    pair = colluder_scan(md)[0]
    l1, l2 = O.colluder_witness(md, pair, seed=1)
    o1, o2 = O.derive_observed_law(md, l1), O.derive_observed_law(md, l2)
    assert o1.max_abs_diff(o2) <= 1e-12
    allv = frozenset(l1.variables)
    assert l1.marginal(allv).max_abs_diff(l2.marginal(allv)) >= 1e-3
    for law in (l1, l2):
        joint = law.marginal(allv)
        assert abs(float(joint.data.sum()) - 1.0) <= 1e-12
        assert (joint.data >= -1e-15).all()
    with pytest.raises(O.OracleError):
        O.colluder_witness(md, ("R1", "R2"))


def test_witness_on_embedded_colluder():
    # collider pair embedded in a larger random ambient model
    md = load("latent_trio")
    pair = colluder_scan(md)[0]
    l1, l2 = O.colluder_witness(md, pair, seed=2)
    o1, o2 = O.derive_observed_law(md, l1), O.derive_observed_law(md, l2)
    assert o1.max_abs_diff(o2) <= 1e-12
    allv = frozenset(l1.variables)
    assert l1.marginal(allv).max_abs_diff(l2.marginal(allv)) >= 1e-3
