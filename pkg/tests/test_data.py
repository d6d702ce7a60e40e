import numpy as np
import pytest

from few.data import (DataError, gen_epistasis_xor, gen_parity, load_csv, load_features,
                      split_indices, stratified_folds, stratified_kfold, train_test_split,
                      write_csv)


def write(tmp_path, text, name="d.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


# ---------------------------------------------------------------- loading

def test_labels_encoded_by_first_appearance(tmp_path):
    ds = load_csv(write(tmp_path, "a,b,animal\n1,2,cat\n3,4,dog\n5,6,cat\n"), "animal")
    assert ds.y.tolist() == [0, 1, 0]
    assert ds.class_names == ("cat", "dog")
    assert ds.feature_names == ("a", "b")
    assert ds.name == "d"


def test_missing_cell_gets_column_median(tmp_path):
    ds = load_csv(write(tmp_path, "a,label\n1,x\nNA,y\n4,x\n10,y\n"), "label")
    assert ds.X[:, 0].tolist() == [1.0, 4.0, 4.0, 10.0]


def test_target_by_index(tmp_path):
    ds = load_csv(write(tmp_path, "t,a\nx,1\ny,2\n"), 0)
    assert ds.feature_names == ("a",) and ds.y.tolist() == [0, 1]


def test_missing_target_names_column(tmp_path):
    with pytest.raises(DataError, match="'klass'"):
        load_csv(write(tmp_path, "a,label\n1,x\n"), "klass")


def test_missing_file(tmp_path):
    with pytest.raises(DataError, match="nope.csv"):
        load_csv(tmp_path / "nope.csv")


def test_bad_cell_reports_row_and_column(tmp_path):
    with pytest.raises(DataError, match=r"row 3, column 'b'"):
        load_csv(write(tmp_path, "a,b,label\n1,2,x\n1,oops,y\n"))


def test_ragged_row(tmp_path):
    with pytest.raises(DataError, match="row 2"):
        load_csv(write(tmp_path, "a,label\n1\n"))


def test_load_features_drops_target(tmp_path):
    X, names = load_features(write(tmp_path, "a,label,b\n1,x,2\n3,y,4\n"), drop="label")
    assert names == ("a", "b") and X.tolist() == [[1, 2], [3, 4]]


def test_write_load_round_trip(tmp_path):
    ds = gen_epistasis_xor(50, 4, 0.1, seed=1)
    write_csv(ds, tmp_path / "e.csv")
    back = load_csv(tmp_path / "e.csv", "label")
    assert np.array_equal(back.X, ds.X)
    assert [back.class_names[i] for i in back.y] == [ds.class_names[i] for i in ds.y]


# -------------------------------------------------------------- splitting

def test_stratified_split_proportions():
    y = np.array([0] * 60 + [1] * 40)
    tr, te = split_indices(y, 0.5, True, 0)
    assert abs(np.sum(y[te] == 0) - 30) <= 1 and abs(np.sum(y[te] == 1) - 20) <= 1
    assert np.intersect1d(tr, te).size == 0
    assert np.array_equal(np.sort(np.concatenate([tr, te])), np.arange(100))


def test_split_deterministic_and_singleton_in_train():
    y = np.array([0, 0, 0, 0, 1])
    a = split_indices(y, 0.5, True, 3)
    b = split_indices(y, 0.5, True, 3)
    assert all(np.array_equal(u, v) for u, v in zip(a, b))
    assert 4 in a[0]


def test_split_recombines_rows_exactly():
    ds = gen_parity(100, seed=2)
    train, test = train_test_split(ds, 0.5, True, 4)
    rows = {tuple(r) + (l,) for r, l in zip(ds.X, ds.y)}
    both = [tuple(r) + (l,) for part in (train, test) for r, l in zip(part.X, part.y)]
    assert len(both) == 100 and set(both) == rows


def test_kfold_balanced_binary():
    ds = gen_parity(10, seed=0)
    ds.y[:] = [0, 1] * 5
    folds = stratified_kfold(ds, 5, 0)
    for f in folds:
        assert sorted(ds.y[f].tolist()) == [0, 1]


def test_kfold_partition_and_class_balance():
    rng = np.random.default_rng(5)
    y = rng.integers(0, 3, 103)
    folds = stratified_folds(y, 5, 1)
    assert np.array_equal(np.sort(np.concatenate(folds)), np.arange(103))
    for c in range(3):
        counts = [np.sum(y[f] == c) for f in folds]
        assert max(counts) - min(counts) <= 1
    again = stratified_folds(y, 5, 1)
    assert all(np.array_equal(a, b) for a, b in zip(folds, again))


# ------------------------------------------------------------- generators

def test_parity_shape_and_rule():
    ds = gen_parity(seed=0)
    assert ds.X.shape == (1124, 10)
    assert set(np.unique(ds.X)) <= {0.0, 1.0}
    brute = [int(sum(int(v) for v in row[:5]) % 2) for row in ds.X]
    assert ds.y.tolist() == brute


def test_parity_examples():
    def label(row):
        return int(sum(row[:5]) % 2)

    assert label([1, 1, 0, 0, 0]) == 0 and label([1, 0, 0, 0, 0]) == 1
    ds = gen_parity(200, seed=1)
    flipped = ds.X.copy()
    flipped[:, 5:] = 1 - flipped[:, 5:]
    assert np.array_equal(flipped[:, :5].sum(axis=1) % 2, ds.y)


def test_generators_seed_deterministic():
    a, b = gen_epistasis_xor(seed=3), gen_epistasis_xor(seed=3)
    assert np.array_equal(a.X, b.X) and np.array_equal(a.y, b.y)
    assert np.array_equal(gen_parity(seed=3).X, gen_parity(seed=3).X)


def test_epistasis_noiseless_rule():
    ds = gen_epistasis_xor(2000, 20, 0.0, seed=4)
    assert set(np.unique(ds.X)) <= {0.0, 1.0, 2.0}
    rule = (ds.X[:, -2] >= 1) ^ (ds.X[:, -1] >= 1)
    assert np.array_equal(rule.astype(int), ds.y)


def test_epistasis_noise_level():
    ds = gen_epistasis_xor(10_000, 20, 0.2, seed=5)
    rule = ((ds.X[:, -2] >= 1) ^ (ds.X[:, -1] >= 1)).astype(int)
    assert np.mean(rule == ds.y) == pytest.approx(0.8, abs=0.02)


def mutual_information_bits(x, y):
    mi = 0.0
    for a in np.unique(x):
        for b in np.unique(y):
            pab = np.mean((x == a) & (y == b))
            if pab > 0:
                mi += pab * np.log2(pab / (np.mean(x == a) * np.mean(y == b)))
    return mi


def test_epistasis_single_features_uninformative():
    ds = gen_epistasis_xor(10_000, 20, 0.0, seed=6)
    mi = [mutual_information_bits(ds.X[:, j], ds.y) for j in range(20)]
    assert max(mi) < 0.01


def test_epistasis_genotype_frequencies():
    # each locus is zero with probability 1/2 so neither locus alone predicts the label
    ds = gen_epistasis_xor(20_000, 4, 0.0, seed=7)
    assert np.mean(ds.X == 0) == pytest.approx(0.5, abs=0.01)


def test_generator_argument_checks():
    with pytest.raises(ValueError):
        gen_parity(10, 3, 4)
    with pytest.raises(ValueError):
        gen_epistasis_xor(10, 1)
    with pytest.raises(ValueError):
        gen_epistasis_xor(10, 5, 0.5)
