import numpy as np
import pytest

from bcigrasp.mdm import (
    CLASS_NAMES,
    MdmClassifier,
    SignalWindow,
    certainty,
    class_covariance,
    covariance,
    load_dataset,
    load_model,
    rest_window,
    save_dataset,
    save_model,
    synth_window,
)
from bcigrasp.spd import riemann_distance


def make_dataset(separability, n_per_class, rng, channels=32, samples=250):
    covs, labels = [], []
    for cls in range(4):
        for _ in range(n_per_class):
            w = synth_window(cls, separability, rng, channels=channels, samples=samples)
            covs.append(covariance(w))
            labels.append(cls)
    return covs, np.array(labels)


def fit_on(separability, n_per_class, rng, **kw):
    covs, labels = make_dataset(separability, n_per_class, rng, **kw)
    return MdmClassifier().fit(covs, labels)


class TestCertainty:
    def test_direct_arithmetic(self):
        score = certainty([1.0, 2.0, 3.0, 2.0])
        assert score.value == pytest.approx(1.0)
        assert score.class_count == 4

    def test_zero_when_all_equal(self):
        assert certainty([2.5] * 4).value == 0.0

    def test_nonnegative_on_random_vectors(self):
        rng = np.random.default_rng(0)
        d = rng.uniform(0.0, 10.0, size=(20000, 4))
        values = d.mean(axis=1) - d.min(axis=1)
        assert (values >= 0.0).all()
        for row in d[:200]:
            assert certainty(row).value >= 0.0


class TestCovariance:
    def test_white_noise_near_identity(self):
        rng = np.random.default_rng(1)
        x = rng.standard_normal((32, 100_000))
        c = covariance(SignalWindow(x), shrinkage=0.0)
        assert np.linalg.norm(c - np.eye(32), "fro") < 0.05 * np.linalg.norm(np.eye(32), "fro")

    def test_shrinkage_floors_eigenvalues(self):
        rng = np.random.default_rng(2)
        # rank-1 window: 32 channels, all copies of one sample vector
        base = rng.standard_normal((32, 1))
        x = np.repeat(base, 40, axis=1)
        c = covariance(SignalWindow(x), shrinkage=0.1)
        raw = x @ x.T / x.shape[1]
        floor = 0.1 * np.trace(raw) / 32
        assert np.linalg.eigvalsh(c)[0] >= floor * (1 - 1e-9)

    def test_full_shrinkage_is_scaled_identity(self):
        rng = np.random.default_rng(3)
        x = rng.standard_normal((8, 50))
        c = covariance(SignalWindow(x), shrinkage=1.0)
        raw = x @ x.T / 50
        np.testing.assert_allclose(c, np.eye(8) * np.trace(raw) / 8, atol=1e-12)

    def test_rejects_non_finite(self):
        x = np.zeros((4, 10))
        x[1, 3] = np.inf
        with pytest.raises(ValueError):
            covariance(SignalWindow(x))


class TestFit:
    def test_single_sample_per_class_returns_samples(self):
        rng = np.random.default_rng(4)
        covs, labels = make_dataset(1.0, 1, rng, channels=8, samples=100)
        model = MdmClassifier().fit(covs, labels)
        for c in range(4):
            np.testing.assert_allclose(model.class_means_[c], covs[c], atol=1e-10)

    def test_duplicated_dataset_same_model(self):
        rng = np.random.default_rng(5)
        covs, labels = make_dataset(1.0, 3, rng, channels=8, samples=100)
        m1 = MdmClassifier().fit(covs, labels)
        m2 = MdmClassifier().fit(covs + covs, np.concatenate([labels, labels]))
        for a, b in zip(m1.class_means_, m2.class_means_):
            np.testing.assert_allclose(a, b, atol=1e-7)

    def test_missing_class_rejected_with_id(self):
        rng = np.random.default_rng(6)
        covs, labels = make_dataset(1.0, 2, rng, channels=8, samples=100)
        keep = labels != 3
        with pytest.raises(ValueError, match="class 3"):
            MdmClassifier().fit([c for c, k in zip(covs, keep) if k], labels[keep])

    def test_means_closer_to_own_class(self):
        rng = np.random.default_rng(7)
        model = fit_on(1.0, 10, rng, channels=16, samples=200)
        held, labels = make_dataset(1.0, 10, rng, channels=16, samples=200)
        for c in range(4):
            own = np.mean([
                riemann_distance(x, model.class_means_[c])
                for x, l in zip(held, labels) if l == c
            ])
            other = np.mean([
                riemann_distance(x, model.class_means_[c])
                for x, l in zip(held, labels) if l != c
            ])
            assert own < other


class TestPredict:
    def test_mean_input_recovers_class_and_certainty(self):
        rng = np.random.default_rng(8)
        model = fit_on(1.0, 5, rng, channels=8, samples=120)
        cls, score = model.predict_one(model.class_means_[2])
        assert cls == 2
        assert score.distances[2] < 1e-9
        assert score.value == pytest.approx(score.distances.sum() / 4.0)

    def test_tie_breaks_to_lowest_index(self):
        # two identical means: distances tie exactly
        model = MdmClassifier(n_classes=2)
        model.class_means_ = [np.eye(3), np.eye(3)]
        model.dim_ = 3
        model._inv_sqrt_means = [np.eye(3), np.eye(3)]
        cls, _ = model.predict_one(2.0 * np.eye(3))
        assert cls == 0

    def test_relabel_permutation_consistency(self):
        rng = np.random.default_rng(9)
        covs, labels = make_dataset(1.0, 6, rng, channels=8, samples=120)
        perm = np.array([2, 3, 1, 0])
        m1 = MdmClassifier().fit(covs, labels)
        m2 = MdmClassifier().fit(covs, perm[labels])
        held, held_labels = make_dataset(1.0, 4, rng, channels=8, samples=120)
        p1 = m1.predict(held)
        p2 = m2.predict(held)
        np.testing.assert_array_equal(perm[p1], p2)

    def test_dim_mismatch_rejected(self):
        rng = np.random.default_rng(10)
        model = fit_on(1.0, 2, rng, channels=8, samples=100)
        with pytest.raises(Exception):
            model.predict_one(np.eye(16))


class TestSynthWindows:
    def test_deterministic_for_seed(self):
        w1 = synth_window(1, 0.7, np.random.default_rng(42))
        w2 = synth_window(1, 0.7, np.random.default_rng(42))
        np.testing.assert_array_equal(w1.data, w2.data)

    def test_zero_separability_shares_identity_covariance(self):
        rng = np.random.default_rng(11)
        w = synth_window(3, 0.0, rng, channels=8, samples=200_000)
        c = covariance(w, shrinkage=0.0)
        assert np.abs(c - np.eye(8)).max() < 0.03

    def test_class_covariance_shape(self):
        c = class_covariance(2, 1.0, channels=8, gain=2.0)
        w = np.linalg.eigvalsh(c)
        assert w[-1] == pytest.approx(3.0)
        assert w[0] == pytest.approx(1.0)

    def test_chance_accuracy_at_zero_separability(self):
        rng = np.random.default_rng(12)
        model = fit_on(0.0, 25, rng)
        held, labels = make_dataset(0.0, 100, rng)
        acc = float((model.predict(held) == labels).mean())
        assert 0.20 <= acc <= 0.30

    def test_high_accuracy_at_full_separability(self):
        rng = np.random.default_rng(13)
        model = fit_on(1.0, 25, rng)
        held, labels = make_dataset(1.0, 100, rng)
        acc = float((model.predict(held) == labels).mean())
        assert acc >= 0.90

    def test_accuracy_nondecreasing_in_separability(self):
        rng = np.random.default_rng(14)
        accs = []
        for s in (0.0, 0.25, 0.5, 0.75, 1.0):
            model = fit_on(s, 20, rng)
            held, labels = make_dataset(s, 50, rng)
            accs.append(float((model.predict(held) == labels).mean()))
        # allow sampling slack at the flat ends, require the trend
        for lo, hi in zip(accs, accs[1:]):
            assert hi >= lo - 0.07
        assert accs[-1] > accs[0] + 0.5

    def test_rest_window_unlabeled(self):
        assert rest_window(np.random.default_rng(0)).label is None


class TestSerialization:
    def test_dataset_roundtrip(self, tmp_path):
        rng = np.random.default_rng(15)
        covs, labels = make_dataset(0.8, 2, rng, channels=6, samples=80)
        path = tmp_path / "data.jsonl"
        save_dataset(path, covs, labels)
        covs2, labels2 = load_dataset(path)
        np.testing.assert_array_equal(labels, labels2)
        for a, b in zip(covs, covs2):
            np.testing.assert_allclose(a, b, atol=1e-12)

    def test_model_roundtrip(self, tmp_path):
        rng = np.random.default_rng(16)
        model = fit_on(1.0, 3, rng, channels=6, samples=80)
        path = tmp_path / "model.jsonl"
        save_model(path, model)
        again = load_model(path)
        held, labels = make_dataset(1.0, 5, rng, channels=6, samples=80)
        np.testing.assert_array_equal(model.predict(held), again.predict(held))

    def test_class_names(self):
        assert CLASS_NAMES == ("left", "right", "both_hands", "both_feet")
