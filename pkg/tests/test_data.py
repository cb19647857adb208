import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from ordino.analysis import unimodal_fraction_exact
from ordino.data import (
    Dataset,
    SplitSpec,
    Standardizer,
    equal_frequency_bins,
    load_csv,
    load_dataset,
    make_low_ud_dataset,
    make_separable_dataset,
    remap_labels,
    sample_uniform_simplex,
    split,
    write_csv,
)
from ordino.errors import ConfigurationError
from ordino.simplex import unimodal_mask


class TestCsv:
    def test_fixture(self, tmp_path):
        f = tmp_path / "a.csv"
        f.write_text("1.5,2,1\n0,-1,2\n3,4,3\n")
        ds = load_csv(f)
        np.testing.assert_array_equal(ds.features, [[1.5, 2], [0, -1], [3, 4]])
        np.testing.assert_array_equal(ds.labels, [1, 2, 3])
        assert ds.K == 3 and ds.name == "a"

    def test_header_flag(self, tmp_path):
        (tmp_path / "a.csv").write_text("1.5,2,1\n0,-1,2\n3,4,3\n")
        (tmp_path / "b.csv").write_text("x1,x2,y\n1.5,2,1\n0,-1,2\n3,4,3\n")
        a, b = load_csv(tmp_path / "a.csv"), load_csv(tmp_path / "b.csv", header=True)
        np.testing.assert_array_equal(a.features, b.features)
        np.testing.assert_array_equal(a.labels, b.labels)

    def test_label_column_and_remap(self, tmp_path):
        f = tmp_path / "c.csv"
        f.write_text("5,0.1\n2,0.2\n9,0.3\n5,0.4\n")
        ds = load_csv(f, label_column=0)
        np.testing.assert_array_equal(ds.labels, [2, 1, 3, 2])
        assert ds.label_map == {2: 1, 5: 2, 9: 3}

    def test_parse_error_names_row_and_column(self, tmp_path):
        f = tmp_path / "bad.csv"
        f.write_text("1,2,1\n1,abc,2\n")
        with pytest.raises(ValueError, match=r"row 2, column 2"):
            load_csv(f)

    def test_ragged_rows(self, tmp_path):
        f = tmp_path / "bad.csv"
        f.write_text("1,2,1\n1,2\n")
        with pytest.raises(ValueError, match="row 2"):
            load_csv(f)

    def test_non_integer_label(self, tmp_path):
        f = tmp_path / "bad.csv"
        f.write_text("1,1\n2,1.5\n")
        with pytest.raises(ValueError, match="non-integer"):
            load_csv(f)

    def test_binned_target_and_manifest(self, tmp_path):
        rows = np.c_[np.arange(10.0), np.arange(10.0) * 1.7]
        np.savetxt(tmp_path / "r.csv", rows, delimiter=",")
        (tmp_path / "r.json").write_text(json.dumps({"path": "r.csv", "name": "reg", "bins": 5}))
        ds = load_dataset(tmp_path / "r.json")
        assert ds.name == "reg" and ds.K == 5
        np.testing.assert_array_equal(ds.labels, [1, 1, 2, 2, 3, 3, 4, 4, 5, 5])

    def test_write_roundtrip(self, tmp_path):
        ds, _ = make_low_ud_dataset(20, 3, 4, seed=2)
        write_csv(ds, tmp_path / "w.csv")
        back = load_csv(tmp_path / "w.csv")
        np.testing.assert_array_equal(back.features, ds.features)
        np.testing.assert_array_equal(back.labels, remap_labels(ds.labels)[0])

    def test_dataset_validation(self):
        with pytest.raises(ValueError):
            Dataset(np.zeros((2, 2)), [1, 4], K=3)
        with pytest.raises(ValueError):
            Dataset(np.array([[np.nan, 0.0]]), [1], K=3)


class TestBins:
    def test_exact_quantiles(self):
        np.testing.assert_array_equal(equal_frequency_bins(np.arange(1, 11), 5),
                                      [1, 1, 2, 2, 3, 3, 4, 4, 5, 5])

    def test_permutation_equivariant(self, rng):
        v = np.arange(1, 11)
        perm = rng.permutation(10)
        labels = equal_frequency_bins(v[perm], 5)
        np.testing.assert_array_equal(labels, equal_frequency_bins(v, 5)[perm])

    def test_tie_fixture(self):
        np.testing.assert_array_equal(equal_frequency_bins([1, 2, 2, 2, 3, 4, 5], 3),
                                      [1, 1, 1, 1, 2, 3, 3])

    def test_constant(self):
        with pytest.raises(ValueError):
            equal_frequency_bins(np.ones(5), 2)

    @given(st.lists(st.integers(0, 30), min_size=6, max_size=60), st.integers(2, 6))
    def test_properties(self, values, bins):
        v = np.asarray(values, dtype=float)
        if len(v) < bins or np.all(v == v[0]):
            return
        lab = equal_frequency_bins(v, bins)
        # monotone in the value, equal values share a label
        order = np.argsort(v, kind="stable")
        assert np.all(np.diff(lab[order]) >= 0)
        for x in np.unique(v):
            assert len(set(lab[v == x])) == 1
        if len(np.unique(v)) >= bins:
            assert set(lab) == set(range(1, bins + 1))
        if len(np.unique(v)) == len(v):
            counts = np.bincount(lab, minlength=bins + 1)[1:]
            assert counts.max() - counts.min() <= 1


class TestSplit:
    def test_deterministic_and_partition(self):
        a = split(500, SplitSpec(50, 100, seed=3))
        b = split(500, SplitSpec(50, 100, seed=3))
        for x, y in zip(a, b):
            np.testing.assert_array_equal(x, y)
        allidx = np.concatenate(a)
        assert len(allidx) == 500 and len(np.unique(allidx)) == 500
        assert [len(s) for s in a] == [50, 100, 350]

    def test_too_large(self):
        with pytest.raises(ConfigurationError):
            split(100, SplitSpec(50, 50))

    def test_label_histogram(self):
        ds, _ = make_low_ud_dataset(2000, 3, 4, seed=5)
        full = np.bincount(ds.labels, minlength=5)[1:]
        counts = np.zeros(4)
        for s in range(100):
            tr, _, _ = split(ds.n, SplitSpec(50, 100, s))
            counts += np.bincount(ds.labels[tr], minlength=5)[1:]
        expected = full / full.sum() * counts.sum()
        assert stats.chisquare(counts, expected).pvalue > 1e-3


class TestStandardizer:
    def test_idempotent_with_stored_stats(self, rng):
        X = rng.normal(3, 2, size=(40, 3))
        std = Standardizer.fit(X)
        Z = std.transform(X)
        np.testing.assert_allclose(Z.mean(0), 0, atol=1e-12)
        np.testing.assert_array_equal(Standardizer.from_dict(std.to_dict()).transform(X), Z)

    def test_zero_variance_column(self):
        X = np.c_[np.ones(5), np.arange(5.0)]
        Z = Standardizer.fit(X).transform(X)
        np.testing.assert_array_equal(Z[:, 0], 0.0)


class TestUniformSimplex:
    def test_moments(self):
        P = sample_uniform_simplex(5, 100_000, seed=1)
        se = np.sqrt((1 / 5) * (4 / 5) / 6 / 100_000)  # Dirichlet(1,...,1) marginal variance
        assert np.all(np.abs(P.mean(0) - 0.2) < 3 * se)
        np.testing.assert_allclose(P.sum(1), 1.0, atol=1e-12)

    def test_exchangeable_marginals(self):
        P = sample_uniform_simplex(4, 5000, seed=2)
        for j in range(1, 4):
            assert stats.ks_2samp(P[:, 0], P[:, j]).pvalue > 1e-3

    def test_unimodal_fraction_k4(self):
        n = 20_000
        ur = unimodal_mask(sample_uniform_simplex(4, n, seed=3)).mean()
        target = float(unimodal_fraction_exact(4))
        assert abs(ur - target) < 3 * np.sqrt(target * (1 - target) / n)

    def test_rejects_k1(self):
        with pytest.raises(ValueError):
            sample_uniform_simplex(1, 5)


class TestSynthetic:
    def test_low_ud_cpd_is_mostly_unimodal(self):
        ds, P = make_low_ud_dataset(500, 6, 5, seed=0)
        ur = unimodal_mask(P).mean()
        assert 0.5 < ur < 1.0
        assert ds.K == 5 and ds.labels.min() >= 1

    def test_separable_dataset_deterministic(self):
        a, _ = make_separable_dataset(100, seed=4)
        b, _ = make_separable_dataset(100, seed=4)
        np.testing.assert_array_equal(a.labels, b.labels)
