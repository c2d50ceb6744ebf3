"""Ingestion, sufficient statistics, MLE fitting and forward sampling."""

import math

import numpy as np
import pytest

import bnsl
from bnsl import (DataError, Dataset, FittedNetwork, contingency_counts,
                  correlation_matrix, fit_mle, forward_sample, load_table,
                  parse_modelstring, partial_correlation, write_table)
from bnsl.data import CategoricalColumn, DiscreteCPT, LinearGaussian, \
    NumericColumn


def _write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


class TestLoadTable:
    def test_categorical_file(self, tmp_path):
        path = _write(tmp_path, "d.csv",
                      "A,B\n" + "\n".join(f"{x},{y}" for x, y in
                                          [("a", "b"), ("b", "a"), ("c", "b")]))
        d = load_table(path)
        assert d.discrete and d.n == 3
        assert d.levels("A") == ("a", "b", "c")
        assert list(d.codes("A")) == [0, 1, 2]

    def test_numeric_file(self, tmp_path):
        path = _write(tmp_path, "d.csv", "X,Y\n1.5,2\n-3,4.25\n0,1\n")
        d = load_table(path)
        assert not d.discrete
        assert d.values("X")[1] == -3.0

    def test_mixed_rejected(self, tmp_path):
        path = _write(tmp_path, "d.csv", "A,X\na,1\nb,2\na,3\n")
        with pytest.raises(DataError, match="mixed data unsupported"):
            load_table(path)

    def test_ragged_rejected(self, tmp_path):
        path = _write(tmp_path, "d.csv", "A,B\na,b\na\n")
        with pytest.raises(DataError, match="ragged"):
            load_table(path)

    def test_single_level_rejected(self, tmp_path):
        path = _write(tmp_path, "d.csv", "A,B\na,x\na,y\n")
        with pytest.raises(DataError, match="single level"):
            load_table(path)

    def test_empty_rejected(self, tmp_path):
        path = _write(tmp_path, "d.csv", "")
        with pytest.raises(DataError, match="empty"):
            load_table(path)

    def test_delimiter_autodetect_and_override(self, tmp_path):
        semi = _write(tmp_path, "semi.csv", "A;B\na;b\nb;a\n")
        d = load_table(semi)
        assert d.names == ("A", "B")
        tab = _write(tmp_path, "tab.tsv", "A\tB\na\tb\nb\ta\n")
        assert load_table(tab).names == ("A", "B")
        forced = load_table(semi, delimiter=";")
        assert forced.names == ("A", "B")

    def test_type_hint_discrete(self, tmp_path):
        path = _write(tmp_path, "d.csv", "X,Y\n1,2\n2,1\n1,1\n")
        d = load_table(path, type_hint="discrete")
        assert d.discrete
        assert d.levels("X") == ("1", "2")

    def test_type_hint_continuous_rejects_text(self, tmp_path):
        path = _write(tmp_path, "d.csv", "A,B\na,1\nb,2\n")
        with pytest.raises(DataError):
            load_table(path, type_hint="continuous")

    def test_roundtrip_write(self, tmp_path):
        path = _write(tmp_path, "d.csv", "A,B\na,b\nb,a\nc,b\n")
        d = load_table(path)
        out = str(tmp_path / "out.csv")
        write_table(d, out)
        d2 = load_table(out)
        assert d2.levels("A") == d.levels("A")
        assert list(d2.codes("B")) == list(d.codes("B"))

    def test_roundtrip_write_continuous_exact(self, tmp_path):
        rng = np.random.default_rng(99)
        d = Dataset(("X", "Y"), {"X": NumericColumn(rng.standard_normal(20)),
                                 "Y": NumericColumn(rng.standard_normal(20))})
        out = str(tmp_path / "out.csv")
        write_table(d, out)
        d2 = load_table(out)
        assert not d2.discrete
        assert np.array_equal(d2.values("X"), d.values("X"))


class TestDatasetInvariants:
    def test_homogeneity(self):
        with pytest.raises(DataError, match="mixed"):
            Dataset(("A", "X"), {
                "A": CategoricalColumn(("a", "b"), np.zeros(3, dtype=np.int64)),
                "X": NumericColumn(np.zeros(3)),
            })

    def test_length_mismatch(self):
        with pytest.raises(DataError):
            Dataset(("A", "B"), {
                "A": CategoricalColumn(("a", "b"), np.zeros(3, dtype=np.int64)),
                "B": CategoricalColumn(("a", "b"), np.zeros(4, dtype=np.int64)),
            })

    def test_reorder(self):
        d = Dataset(("A", "B"), {
            "A": CategoricalColumn(("a", "b"), np.zeros(3, dtype=np.int64)),
            "B": CategoricalColumn(("a", "b"), np.ones(3, dtype=np.int64)),
        })
        assert d.reorder(("B", "A")).names == ("B", "A")


class TestContingency:
    def test_marginal_2x2(self):
        rng = np.random.default_rng(5)
        d = Dataset(("X", "Y"), {
            "X": CategoricalColumn(("a", "b"), rng.integers(0, 2, 100)),
            "Y": CategoricalColumn(("a", "b"), rng.integers(0, 2, 100)),
        })
        t = contingency_counts(d, "X", "Y")
        assert t.counts.shape == (2, 2, 1)
        assert t.counts.sum() == 100
        assert t.L == 1

    def test_all_configs_observed(self):
        codes = {
            "X": np.array([0, 1, 0, 1, 0, 1, 0, 1]),
            "Y": np.array([0, 0, 1, 1, 0, 0, 1, 1]),
            "Z1": np.array([0, 0, 0, 0, 1, 1, 1, 1]),
            "Z2": np.array([0, 1, 0, 1, 0, 1, 0, 1]),
        }
        d = Dataset(tuple(codes), {k: CategoricalColumn(("a", "b"), v)
                                   for k, v in codes.items()})
        t = contingency_counts(d, "X", "Y", ["Z1", "Z2"])
        assert t.L == 4

    def test_unobserved_config_absent(self):
        # hand-built 10-row table: z2 config (b, b) never occurs
        z1 = np.array([0, 0, 0, 0, 0, 1, 1, 1, 1, 1])
        z2 = np.array([0, 1, 0, 1, 0, 0, 0, 0, 0, 0])
        x = np.array([0, 1, 1, 0, 0, 1, 0, 1, 0, 1])
        y = np.array([1, 0, 1, 0, 1, 0, 1, 0, 1, 0])
        d = Dataset(("X", "Y", "Z1", "Z2"), {
            "X": CategoricalColumn(("a", "b"), x),
            "Y": CategoricalColumn(("a", "b"), y),
            "Z1": CategoricalColumn(("a", "b"), z1),
            "Z2": CategoricalColumn(("a", "b"), z2),
        })
        t = contingency_counts(d, "X", "Y", ["Z1", "Z2"])
        assert t.L == 3  # (a,a), (a,b), (b,a) observed; (b,b) absent
        assert t.counts.sum() == 10
        # margins reconcile
        assert np.array_equal(t.margin_z(), t.counts.sum(axis=(0, 1)))
        assert t.margin_x().sum() == 10

    def test_errors(self):
        d = Dataset(("X", "Y"), {"X": NumericColumn(np.zeros(5)),
                                 "Y": NumericColumn(np.zeros(5))})
        with pytest.raises(DataError):
            contingency_counts(d, "X", "Y")


class TestCorrelation:
    def test_self_correlation(self):
        rng = np.random.default_rng(6)
        d = Dataset(("X", "Y"), {"X": NumericColumn(rng.standard_normal(50)),
                                 "Y": NumericColumn(rng.standard_normal(50))})
        m = correlation_matrix(d, ["X", "Y"])
        assert m[0, 0] == pytest.approx(1.0)

    def test_anticorrelation(self):
        x = np.arange(10.0)
        d = Dataset(("X", "Y"), {"X": NumericColumn(x), "Y": NumericColumn(-x)})
        assert correlation_matrix(d, ["X", "Y"])[0, 1] == pytest.approx(-1.0)

    def test_four_point_hand_value(self):
        # {(0,0),(1,1),(2,2),(3,0)}: direct Pearson formula
        x = np.array([0.0, 1.0, 2.0, 3.0])
        y = np.array([0.0, 1.0, 2.0, 0.0])
        n = 4
        sxy = (x * y).sum() / n - x.mean() * y.mean()
        r = sxy / (x.std() * y.std())
        d = Dataset(("X", "Y"), {"X": NumericColumn(x), "Y": NumericColumn(y)})
        assert correlation_matrix(d, ["X", "Y"])[0, 1] == pytest.approx(r, abs=1e-12)

    def test_zero_variance_rejected(self):
        d = Dataset(("X", "Y"), {"X": NumericColumn(np.ones(5)),
                                 "Y": NumericColumn(np.arange(5.0))})
        with pytest.raises(DataError, match="zero-variance"):
            correlation_matrix(d, ["X", "Y"])

    def test_psd_and_symmetric(self):
        rng = np.random.default_rng(8)
        names = ["V1", "V2", "V3", "V4"]
        d = Dataset(tuple(names),
                    {n: NumericColumn(rng.standard_normal(60)) for n in names})
        m = correlation_matrix(d, names)
        assert np.allclose(m, m.T)
        assert np.linalg.eigvalsh(m).min() > -1e-10


class TestPartialCorrelation:
    def test_empty_z_reduces_to_correlation(self):
        rng = np.random.default_rng(9)
        d = Dataset(("X", "Y"), {"X": NumericColumn(rng.standard_normal(40)),
                                 "Y": NumericColumn(rng.standard_normal(40))})
        assert partial_correlation(d, "X", "Y") == pytest.approx(
            correlation_matrix(d, ["X", "Y"])[0, 1])

    def test_symmetry(self):
        rng = np.random.default_rng(10)
        cols = {n: NumericColumn(rng.standard_normal(60))
                for n in ("X", "Y", "Z")}
        d = Dataset(("X", "Y", "Z"), cols)
        assert partial_correlation(d, "X", "Y", ["Z"]) == \
            partial_correlation(d, "Y", "X", ["Z"])

    def test_regression_residual_oracle(self):
        rng = np.random.default_rng(12)
        n = 200
        z = rng.standard_normal(n)
        x = 1.5 * z + rng.standard_normal(n)
        y = -2.0 * z + rng.standard_normal(n)
        d = Dataset(("X", "Y", "Z"), {"X": NumericColumn(x),
                                      "Y": NumericColumn(y),
                                      "Z": NumericColumn(z)})
        # oracle: correlation of the two regression residual vectors
        def resid(v):
            design = np.column_stack([np.ones(n), z])
            beta, *_ = np.linalg.lstsq(design, v, rcond=None)
            return v - design @ beta
        rx, ry = resid(x), resid(y)
        oracle = float(rx @ ry / np.sqrt((rx @ rx) * (ry @ ry)))
        assert partial_correlation(d, "X", "Y", ["Z"]) == pytest.approx(
            oracle, abs=1e-10)

    def test_deterministic_function_of_z(self):
        rng = np.random.default_rng(13)
        n = 100
        z = rng.standard_normal(n)
        x = rng.standard_normal(n)
        y = 3.0 * z + 1.0  # exactly determined by z: residuals vanish
        d = Dataset(("X", "Y", "Z"), {"X": NumericColumn(x),
                                      "Y": NumericColumn(y),
                                      "Z": NumericColumn(z)})
        assert abs(partial_correlation(d, "X", "Y", ["Z"])) < 1e-10

    def test_singular_conditioning_reported(self):
        rng = np.random.default_rng(18)
        n = 50
        z1 = rng.standard_normal(n)
        d = Dataset(("X", "Y", "Z1", "Z2"), {
            "X": NumericColumn(rng.standard_normal(n)),
            "Y": NumericColumn(rng.standard_normal(n)),
            "Z1": NumericColumn(z1),
            "Z2": NumericColumn(z1.copy()),  # duplicated conditioning column
        })
        with pytest.raises(DataError, match="singular"):
            partial_correlation(d, "X", "Y", ["Z1", "Z2"])

    def test_near_deterministic_residual_vanishes(self):
        rng = np.random.default_rng(14)
        n = 100
        z = rng.standard_normal(n)
        x = rng.standard_normal(n)
        y = 3.0 * z + 1e-8 * rng.standard_normal(n)
        d = Dataset(("X", "Y", "Z"), {"X": NumericColumn(x),
                                      "Y": NumericColumn(y),
                                      "Z": NumericColumn(z)})
        assert abs(partial_correlation(d, "X", "Y", ["Z"])) < 0.2

    def test_not_enough_rows(self):
        d = Dataset(("X", "Y", "Z"), {n: NumericColumn(np.arange(3.0) + i)
                                      for i, n in enumerate(("X", "Y", "Z"))})
        with pytest.raises(DataError):
            partial_correlation(d, "X", "Y", ["Z"])


class TestFitMLE:
    def test_parentless_counts(self):
        codes = np.array([0] * 30 + [1] * 70)
        d = Dataset(("A",), {"A": CategoricalColumn(("a", "b"), codes)})
        f = fit_mle(parse_modelstring("[A]"), d)
        assert np.allclose(f.locals["A"].table[:, 0], [0.3, 0.7])

    def test_unseen_parent_config_uniform(self):
        a = np.zeros(50, dtype=np.int64)  # parent stuck at level a
        b = np.array([0, 1] * 25)
        d = Dataset(("A", "B"), {"A": CategoricalColumn(("a", "b"), a),
                                 "B": CategoricalColumn(("a", "b"), b)})
        f = fit_mle(parse_modelstring("[A][B|A]"), d)
        assert np.allclose(f.locals["B"].table[:, 1], [0.5, 0.5])

    def test_gaussian_coefficients(self):
        rng = np.random.default_rng(15)
        n = 1000
        x = rng.standard_normal(n)
        y = 2.0 * x + 1.0 + 0.1 * rng.standard_normal(n)
        d = Dataset(("X", "Y"), {"X": NumericColumn(x), "Y": NumericColumn(y)})
        f = fit_mle(parse_modelstring("[X][Y|X]"), d)
        loc = f.locals["Y"]
        assert loc.coefficients[0] == pytest.approx(2.0, abs=0.05)
        assert loc.intercept == pytest.approx(1.0, abs=0.05)
        assert loc.sd == pytest.approx(0.1, abs=0.02)

    def test_rejects_pdag(self):
        from bnsl.graph import set_undirected
        d = Dataset(("A", "B"), {
            "A": CategoricalColumn(("a", "b"), np.array([0, 1])),
            "B": CategoricalColumn(("a", "b"), np.array([0, 1])),
        })
        g = set_undirected(parse_modelstring("[A][B]"), "A", "B")
        with pytest.raises(bnsl.GraphError):
            fit_mle(g, d)


class TestForwardSample:
    def test_deterministic_cpts_give_constant_columns(self):
        g = parse_modelstring("[A][B|A]")
        locals_ = {
            "A": DiscreteCPT(("a", "b"), (), (), np.array([[1.0], [0.0]])),
            "B": DiscreteCPT(("a", "b"), ("A",), (("a", "b"),),
                             np.array([[0.0, 1.0], [1.0, 0.0]])),
        }
        f = FittedNetwork(g, locals_)
        d = forward_sample(f, 50, seed=0)
        assert set(d.codes("A")) == {0}
        assert set(d.codes("B")) == {1}  # A stuck at a, so B flips to b

    def test_same_seed_identical(self):
        from bnsl import networks
        f = networks.sixnode()
        d1 = forward_sample(f, 500, seed=123)
        d2 = forward_sample(f, 500, seed=123)
        for n in d1.names:
            assert np.array_equal(d1.codes(n), d2.codes(n))
        d3 = forward_sample(f, 500, seed=124)
        assert any(not np.array_equal(d1.codes(n), d3.codes(n)) for n in d1.names)

    def test_law_of_large_numbers(self):
        g = parse_modelstring("[A]")
        probs = np.array([[0.2], [0.5], [0.3]])
        f = FittedNetwork(g, {"A": DiscreteCPT(("a", "b", "c"), (), (), probs)})
        d = forward_sample(f, 50000, seed=77)
        freq = np.bincount(d.codes("A"), minlength=3) / d.n
        for got, want in zip(freq, probs[:, 0]):
            tol = 3 * math.sqrt(want * (1 - want) / d.n)
            assert abs(got - want) <= tol

    def test_fit_then_sample_then_fit_recovers(self):
        from bnsl import networks
        base = networks.sixnode()
        d0 = forward_sample(base, 4000, seed=5)
        fitted = fit_mle(base.graph, d0)
        d1 = forward_sample(fitted, 60000, seed=6)
        refit = fit_mle(base.graph, d1)
        for node in base.graph.nodes:
            loc = fitted.locals[node]
            t1, t2 = loc.table, refit.locals[node].table
            if loc.parents:
                cfg = bnsl.data._parent_config_index(
                    [len(ls) for ls in loc.parent_levels],
                    [d1.codes(p) for p in loc.parents])
            else:
                cfg = np.zeros(d1.n, dtype=np.int64)
            counts = np.bincount(cfg, minlength=t1.shape[1])
            for j in range(t1.shape[1]):
                if counts[j] == 0:
                    continue
                for i in range(t1.shape[0]):
                    p = t1[i, j]
                    tol = 3 * math.sqrt(max(p * (1 - p), 1e-12) / counts[j]) + 1e-9
                    assert abs(t2[i, j] - p) <= tol

    def test_gaussian_sampling(self):
        g = parse_modelstring("[X][Y|X]")
        locals_ = {
            "X": LinearGaussian((), 0.0, np.array([]), 1.0),
            "Y": LinearGaussian(("X",), 1.0, np.array([2.0]), 0.1),
        }
        f = FittedNetwork(g, locals_)
        d = forward_sample(f, 20000, seed=3)
        x, y = d.values("X"), d.values("Y")
        beta = np.polyfit(x, y, 1)
        assert beta[0] == pytest.approx(2.0, abs=0.02)
        assert beta[1] == pytest.approx(1.0, abs=0.02)


class TestFittedNetworkJson:
    def test_discrete_roundtrip(self):
        from bnsl import networks
        f = networks.sixnode()
        back = FittedNetwork.from_json(f.to_json())
        assert back.graph == f.graph
        for n in f.graph.nodes:
            assert np.allclose(back.locals[n].table, f.locals[n].table)

    def test_continuous_roundtrip(self):
        g = parse_modelstring("[X][Y|X]")
        f = FittedNetwork(g, {
            "X": LinearGaussian((), 0.5, np.array([]), 2.0),
            "Y": LinearGaussian(("X",), 1.0, np.array([-0.5]), 0.25),
        })
        back = FittedNetwork.from_json(f.to_json())
        assert back.locals["Y"].coefficients[0] == -0.5
        assert back.locals["Y"].sd == 0.25

    def test_invariants_enforced(self):
        g = parse_modelstring("[A]")
        bad = DiscreteCPT(("a", "b"), (), (), np.array([[0.6], [0.5]]))
        with pytest.raises(DataError):
            FittedNetwork(g, {"A": bad})
