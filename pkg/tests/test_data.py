import numpy as np
import pytest

from kanforge.data import (
    CsvFormatError,
    FUNCTION_GENERATORS,
    HarDataset,
    apply_normalization,
    fit_normalization,
    gen_sincos,
    gen_step,
    gen_synth_har,
    invert_normalization,
    load_windowed_csv,
    loso_splits,
    make_holdout_split,
    save_windowed_csv,
    split_function_dataset,
)
from kanforge.model import WindowShape
from kanforge.training import macro_f1

SHAPE = WindowShape(L=64, C=3, T=4, tau=16)


# ---------------------------------------------------------------------------
# function targets


def test_step_sign_convention():
    ds = gen_step(500, seed=1)
    assert np.all(ds.y[ds.x < 0] == -1.0)
    assert np.all(ds.y[ds.x >= 0] == 1.0)


def test_step_boundary_value_is_positive():
    # convention fixed here: y(0) = +1
    assert np.where(np.array([[0.0]]) < 0.0, -1.0, 1.0)[0, 0] == 1.0
    ds = gen_step(100, seed=2)
    zeros = ds.x == 0.0
    assert np.all(ds.y[zeros] == 1.0)


def test_step_mean_on_symmetric_grid():
    x = np.linspace(-1, 1, 201).reshape(-1, 1)
    x = x[x[:, 0] != 0.0].reshape(-1, 1)
    y = np.where(x < 0, -1.0, 1.0)
    assert abs(y.mean()) < 1e-12


def test_sincos_values():
    ds = gen_sincos(100, seed=3)
    assert np.allclose(ds.y, 0.5 * np.sin(4 * np.pi * ds.x), atol=1e-12)
    f = lambda x: np.sin(2 * np.pi * x) * np.cos(2 * np.pi * x)
    assert f(0.0) == 0.0
    assert f(0.125) == pytest.approx(0.5, abs=1e-12)
    assert f(0.25) == pytest.approx(0.0, abs=1e-12)


def test_sincos_amplitude_bound():
    grid = np.linspace(0, 1, 20001)
    vals = np.sin(2 * np.pi * grid) * np.cos(2 * np.pi * grid)
    assert np.max(np.abs(vals)) == pytest.approx(0.5, abs=1e-6)


def test_generators_are_pure():
    for name, gen in FUNCTION_GENERATORS.items():
        a, b = gen(64, seed=9), gen(64, seed=9)
        assert np.array_equal(a.x, b.x) and np.array_equal(a.y, b.y), name
    assert not np.array_equal(gen_step(64, 1).x, gen_step(64, 2).x)


def test_split_function_dataset_partitions():
    ds = gen_sincos(100, seed=4)
    (xtr, ytr), (xte, yte) = split_function_dataset(ds, 0.8, seed=0)
    assert xtr.shape[0] == 80 and xte.shape[0] == 20
    together = np.sort(np.concatenate([xtr, xte]), axis=0)
    assert np.array_equal(together, np.sort(ds.x, axis=0))


def test_function_generator_minimum_size():
    with pytest.raises(ValueError):
        gen_step(1, seed=0)


# ---------------------------------------------------------------------------
# synthetic windows


def centroid_oracle_f1(ds, train_frac=0.5, seed=0):
    """1-nearest-centroid on per-window DFT magnitudes (channel-averaged)."""
    feats = np.abs(np.fft.rfft(ds.windows, axis=1)).mean(axis=2)
    perm = np.random.default_rng(seed).permutation(len(feats))
    cut = int(train_frac * len(feats))
    tr, te = perm[:cut], perm[cut:]
    classes = ds.n_classes
    centroids = np.stack([feats[tr][ds.labels[tr] == c].mean(axis=0) for c in range(classes)])
    pred = ((feats[te][:, None, :] - centroids[None]) ** 2).sum(axis=2).argmin(axis=1)
    return macro_f1(pred, ds.labels[te], classes)


def test_noiseless_windows_are_centroid_separable():
    ds = gen_synth_har(2, 4, 24, SHAPE, noise_sigma=0.0, seed=5)
    assert centroid_oracle_f1(ds) == 1.0
    ds4 = gen_synth_har(4, 8, 24, SHAPE, noise_sigma=0.0, seed=5)
    assert centroid_oracle_f1(ds4) == 1.0


def test_extreme_noise_drives_oracle_to_chance():
    ds = gen_synth_har(4, 8, 60, SHAPE, noise_sigma=50.0, seed=5)
    assert centroid_oracle_f1(ds) == pytest.approx(0.25, abs=0.1)


def test_gen_synth_har_deterministic():
    a = gen_synth_har(3, 5, 10, SHAPE, noise_sigma=0.5, seed=6)
    b = gen_synth_har(3, 5, 10, SHAPE, noise_sigma=0.5, seed=6)
    assert np.array_equal(a.windows, b.windows)
    assert np.array_equal(a.labels, b.labels)
    assert np.array_equal(a.subjects, b.subjects)


def test_gen_synth_har_label_balance_and_subjects():
    ds = gen_synth_har(4, 8, 24, SHAPE, noise_sigma=0.1, seed=7)
    assert ds.windows.shape == (192, 64, 3)
    assert np.bincount(ds.labels).tolist() == [48, 48, 48, 48]
    assert np.bincount(ds.subjects).tolist() == [24] * 8


def test_gen_synth_har_validation():
    with pytest.raises(ValueError):
        gen_synth_har(1, 4, 8, SHAPE, 0.1, 0)


# ---------------------------------------------------------------------------
# normalization


def test_normalization_roundtrip():
    rng = np.random.default_rng(8)
    w = rng.normal(3.0, 2.5, size=(20, 16, 3))
    stats = fit_normalization(w)
    normed = apply_normalization(w, stats)
    assert np.max(np.abs(normed.mean(axis=(0, 1)))) < 1e-9
    assert np.max(np.abs(normed.std(axis=(0, 1)) - 1.0)) < 1e-6
    back = invert_normalization(normed, stats)
    assert np.max(np.abs(back - w)) < 1e-12


def test_constant_channel_does_not_blow_up():
    w = np.zeros((4, 8, 2))
    w[..., 1] = 5.0
    stats = fit_normalization(w)
    normed = apply_normalization(w, stats)
    assert np.all(np.isfinite(normed))


# ---------------------------------------------------------------------------
# splits


def test_holdout_split_normalizes_with_train_stats():
    ds = gen_synth_har(3, 8, 12, SHAPE, noise_sigma=0.4, seed=9)
    split = make_holdout_split(ds, seed=0)
    train_mean = split.train[0].mean(axis=(0, 1))
    assert np.max(np.abs(train_mean)) < 1e-9
    assert np.max(np.abs(split.train[0].std(axis=(0, 1)) - 1.0)) < 1e-6
    # test windows were normalized with *train* stats, so they are off-center
    assert np.max(np.abs(split.test[0].mean(axis=(0, 1)))) > 1e-9


def test_loso_split_count_and_coverage():
    ds = gen_synth_har(3, 5, 8, SHAPE, noise_sigma=0.3, seed=10)
    folds = loso_splits(ds, seed=0)
    assert len(folds) == 5
    assert sorted(f.test_subjects[0] for f in folds) == [0, 1, 2, 3, 4]
    total_test = sum(f.test[0].shape[0] for f in folds)
    assert total_test == ds.windows.shape[0]


def test_loso_parts_disjoint_and_complete():
    ds = gen_synth_har(2, 4, 6, SHAPE, noise_sigma=0.2, seed=11)
    for fold in loso_splits(ds, seed=3):
        sizes = fold.train[0].shape[0] + fold.val[0].shape[0] + fold.test[0].shape[0]
        assert sizes == ds.windows.shape[0]


def test_loso_requires_three_subjects():
    ds = gen_synth_har(2, 2, 6, SHAPE, noise_sigma=0.2, seed=12)
    with pytest.raises(ValueError, match="3 subjects"):
        loso_splits(ds)


def test_loso_deterministic_per_seed():
    ds = gen_synth_har(2, 5, 6, SHAPE, noise_sigma=0.2, seed=13)
    a = loso_splits(ds, seed=1)
    b = loso_splits(ds, seed=1)
    for fa, fb in zip(a, b):
        assert np.array_equal(fa.val[1], fb.val[1])


# ---------------------------------------------------------------------------
# CSV


def test_csv_roundtrip_exact(tmp_path):
    ds = gen_synth_har(3, 4, 6, SHAPE, noise_sigma=0.7, seed=14)
    path = tmp_path / "windows.csv"
    save_windowed_csv(path, ds)
    back = load_windowed_csv(path, SHAPE)
    assert np.max(np.abs(back.windows - ds.windows)) < 1e-12
    assert np.array_equal(back.labels, ds.labels)
    assert np.array_equal(back.subjects, ds.subjects)


def test_csv_two_row_minimal(tmp_path):
    path = tmp_path / "tiny.csv"
    path.write_text("subject,label,ch0\n1,0,0.5\n1,0,-0.25\n")
    ds = load_windowed_csv(path, WindowShape(2, 1, 1, 2))
    assert ds.windows.shape == (1, 2, 1)
    assert ds.windows[0, :, 0].tolist() == [0.5, -0.25]


def test_csv_mixed_labels_strict_names_window(tmp_path):
    path = tmp_path / "mixed.csv"
    path.write_text("subject,label,ch0\n1,0,0.1\n1,1,0.2\n")
    with pytest.raises(CsvFormatError, match="window 0"):
        load_windowed_csv(path, WindowShape(2, 1, 1, 2))


def test_csv_mixed_labels_majority_mode(tmp_path):
    path = tmp_path / "mixed.csv"
    path.write_text("subject,label,ch0\n1,0,0.1\n1,1,0.2\n1,1,0.3\n1,2,0.4\n")
    ds = load_windowed_csv(path, WindowShape(4, 1, 1, 4), mixed_labels="majority")
    assert ds.labels.tolist() == [1]


def test_csv_malformed_row_reports_line(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("subject,label,ch0\n1,0,0.1\n1,0\n")
    with pytest.raises(CsvFormatError, match="line 3"):
        load_windowed_csv(path, WindowShape(2, 1, 1, 2))


def test_csv_non_numeric_channel_reports_line(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("subject,label,ch0\n1,0,abc\n1,0,0.2\n")
    with pytest.raises(CsvFormatError, match="line 2.*non-numeric"):
        load_windowed_csv(path, WindowShape(2, 1, 1, 2))


def test_csv_unknown_label_reports_line(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("subject,label,ch0\n1,walk,0.1\n1,walk,0.2\n")
    with pytest.raises(CsvFormatError, match="line 2.*unknown label"):
        load_windowed_csv(path, WindowShape(2, 1, 1, 2))


def test_csv_leftover_rows_rejected(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("subject,label,ch0\n1,0,0.1\n1,0,0.2\n1,0,0.3\n")
    with pytest.raises(CsvFormatError, match="divisible"):
        load_windowed_csv(path, WindowShape(2, 1, 1, 2))


def test_csv_missing_column(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("subject,ch0\n1,0.1\n")
    with pytest.raises(CsvFormatError, match="line 1"):
        load_windowed_csv(path, WindowShape(1, 1, 1, 1))


def test_csv_wrong_channel_count(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("subject,label,ch0,ch1\n1,0,0.1,0.2\n")
    with pytest.raises(CsvFormatError, match="channel columns"):
        load_windowed_csv(path, WindowShape(1, 1, 1, 1))


def test_hardataset_length_validation():
    with pytest.raises(ValueError, match="agree"):
        HarDataset(np.zeros((3, 4, 1)), np.zeros(2, dtype=int), np.zeros(3, dtype=int))
