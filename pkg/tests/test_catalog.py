import itertools
import shutil

import pytest
import sympy as sp

from hyperkernel import catalog
from hyperkernel import expr as ex
from hyperkernel.hypsolve import HypSystem, check_compatibility

MAPS = catalog.load_mconditions()


def test_expected_maps():
    assert sorted(m.label for m in MAPS) == sorted(["F1", "H1", "S1", "f1b", "f21a", "f27b", "K1", "K21"])


@pytest.mark.parametrize("mm", MAPS, ids=lambda m: m.label)
def test_matching_map(mm):
    rep = catalog.check_matching(mm)
    assert rep.ratios_equal and rep.numeric_equal, rep
    assert not rep.unmapped
    assert rep.ok


def test_catalog_entries_are_hypergeometric():
    entries = catalog.load_catalog()
    assert {a for _, a in entries} == {2, 3, 4}
    for (label, arity), e in entries.items():
        if e.summand is None:
            continue
        sys = HypSystem.from_summand(e.summand, e.indices)
        assert check_compatibility(sys)[0], label


def test_classify_round_trips_catalog():
    # renaming the parameters must not defeat the classifier
    for (label, arity), e in catalog.load_catalog().items():
        if e.summand is None or arity > 3:
            continue
        fresh = {p: sp.Symbol(f"q{j}") for j, p in enumerate(e.params)}
        res = catalog.classify(e.summand.xreplace(fresh), e.indices)
        env = {sp.Symbol(f"q{j}"): sp.Rational(j + 3, 11) for j in range(len(e.params))}
        hit = catalog.get(res.label, arity)
        back = hit.summand.xreplace(res.binding)
        perm = {hit.indices[k]: e.indices[res.permutation[k]] for k in range(arity)}
        back = back.xreplace(perm)
        for pt in itertools.product(range(3), repeat=arity):
            at = dict(zip(e.indices, pt))
            want = ex.evaluate(e.summand.xreplace(fresh), {**env, **at})
            got = ex.evaluate(back, {**env, **at})
            # a leftover (-1)^(s.n) sign is reported separately
            assert got == want or (any(res.sign) and got == -want), (label, res.label, pt)


def test_pfq_classification():
    n, a, b, c = sp.symbols("n a b c")
    res = catalog.classify(ex.Poch(a, n) * ex.Poch(b, n) / (ex.Poch(c, n) * ex.Fact(n)), (n,))
    assert res.label == "2F1"
    assert catalog.convergence_region("2F1") == [sp.Abs(catalog.SERIES[1][0]) < 1]
    with pytest.raises(catalog.NoData):
        catalog.convergence_region("3F1")


def test_data_dir_override(tmp_path, monkeypatch):
    src = catalog.data_dir()
    for f in src.iterdir():
        shutil.copy(f, tmp_path / f.name)
    (tmp_path / "catalog_2.txt").write_text("Z9 | 2 | 1/(fact(m)*fact(n)) | - | Abs(x) < 2\n")
    monkeypatch.setenv("HYPERKERNEL_DATA", str(tmp_path))
    assert catalog.data_dir() == tmp_path
    assert catalog.get("Z9", 2, path=tmp_path).convergence == [sp.Abs(sp.Symbol("x")) < 2]


def test_malformed_catalog(tmp_path):
    (tmp_path / "catalog_2.txt").write_text("F1 | 2 | poch(a,m) | \n")
    with pytest.raises(ValueError):
        catalog.load_catalog(tmp_path)
    (tmp_path / "catalog_2.txt").write_text("F1 | 2 | poch(zz,m)/fact(m) | a | -\n")
    with pytest.raises(ValueError, match="undeclared"):
        catalog.load_catalog(tmp_path / ".")


def test_families_load():
    for name in catalog.family_names():
        fam = catalog.load_family(name)
        assert len(fam.operators) == len(fam.vars) == len(fam.indices)
    with pytest.raises(KeyError):
        catalog.load_family("nope")
