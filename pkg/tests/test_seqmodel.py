import json

import numpy as np
import pytest

from gesturespot.ape import fit_ape
from gesturespot.gmm import fit_gmm
from gesturespot.seqmodel import (Dataset, GestureModel, LabeledInterval,
                                  Sequence, load_dataset, load_model,
                                  load_sequence, save_dataset, save_model,
                                  save_sequence)


def small_dataset():
    rng = np.random.default_rng(0)
    seqs = (
        Sequence("a", rng.normal(size=(10, 3)), frame_rate=30.0),
        Sequence("b", rng.normal(size=(6, 3))),
    )
    labels = {"a": (LabeledInterval("A", 2, 7),),
              "b": (LabeledInterval("A", 0, 3), LabeledInterval("B", 4, 5))}
    return Dataset(seqs, labels)


class TestTypes:
    def test_sequence_rejects_empty_and_nonfinite(self):
        with pytest.raises(ValueError):
            Sequence("x", np.zeros((0, 3)))
        with pytest.raises(ValueError):
            Sequence("x", np.array([[1.0, np.nan]]))

    def test_interval_order(self):
        with pytest.raises(ValueError):
            LabeledInterval("A", 5, 2)

    def test_dataset_unknown_sequence(self):
        seq = Sequence("a", np.zeros((4, 1)))
        with pytest.raises(ValueError, match="unknown sequence id"):
            Dataset((seq,), {"missing": (LabeledInterval("A", 0, 1),)})

    def test_dataset_label_out_of_range(self):
        seq = Sequence("a", np.zeros((4, 1)))
        with pytest.raises(ValueError, match="out of range"):
            Dataset((seq,), {"a": (LabeledInterval("A", 0, 9),)})

    def test_dataset_overlapping_same_class(self):
        seq = Sequence("a", np.zeros((10, 1)))
        with pytest.raises(ValueError, match="overlapping"):
            Dataset((seq,), {"a": (LabeledInterval("A", 0, 5),
                                   LabeledInterval("A", 3, 8))})

    def test_class_samples_extract_subsequences(self):
        ds = small_dataset()
        samples = ds.class_samples("A")
        assert [len(s) for s in samples] == [6, 4]
        assert np.array_equal(samples[0].frames, ds.sequence("a").frames[2:8])


class TestDatasetIO:
    def test_minimal_roundtrip(self, tmp_path):
        rng = np.random.default_rng(1)
        ds = Dataset((Sequence("s0", rng.normal(size=(10, 3))),),
                     {"s0": (LabeledInterval("A", 2, 7),)})
        save_dataset(ds, tmp_path)
        loaded = load_dataset(tmp_path)
        assert loaded == ds
        assert len(loaded.sequences) == 1
        assert loaded.labels["s0"][0] == LabeledInterval("A", 2, 7)

    def test_roundtrip_random_datasets(self, tmp_path):
        rng = np.random.default_rng(2)
        for trial in range(10):
            seqs = []
            labels = {}
            for i in range(int(rng.integers(1, 4))):
                n = int(rng.integers(3, 12))
                d = int(rng.integers(1, 5))
                sid = f"seq{trial}_{i}"
                seqs.append(Sequence(sid, rng.normal(size=(n, d)),
                                     frame_rate=25.0 if rng.random() < 0.5 else None))
                if rng.random() < 0.8:
                    b = int(rng.integers(0, n))
                    e = int(rng.integers(b, n))
                    labels[sid] = (LabeledInterval("C", b, e),)
            ds = Dataset(tuple(seqs), labels)
            out = tmp_path / f"trial{trial}"
            save_dataset(ds, out)
            assert load_dataset(out) == ds

    def test_unknown_sequence_id_in_labels(self, tmp_path):
        ds = small_dataset()
        save_dataset(ds, tmp_path)
        labels = tmp_path / "labels.csv"
        labels.write_text(labels.read_text() + "ghost,A,0,1\n")
        with pytest.raises(ValueError, match="unknown sequence id"):
            load_dataset(tmp_path)

    def test_dimension_mismatch_names_line(self, tmp_path):
        path = tmp_path / "bad.seq.csv"
        rows = ["dim=3"] + ["0.0,0.0,0.0"] * 4 + ["0.0,0.0"] + ["0.0,0.0,0.0"]
        path.write_text("\n".join(rows) + "\n")
        with pytest.raises(ValueError, match=r"frame 5"):
            load_sequence(path)

    def test_loaded_sequences_satisfy_invariants(self, tmp_path):
        rng = np.random.default_rng(3)
        for i in range(20):
            n, d = int(rng.integers(1, 9)), int(rng.integers(1, 6))
            seq = Sequence(f"s{i}", rng.normal(size=(n, d)))
            save_sequence(seq, tmp_path)
            loaded = load_sequence(tmp_path / f"s{i}.seq.csv")
            assert loaded.dim == d and len(loaded) == n
            assert np.all(np.isfinite(loaded.frames))
            assert loaded == seq  # exact: repr round-trip


def gmm_gesture_model():
    rng = np.random.default_rng(4)
    frames = [fit_gmm(rng.normal(size=(8, 2)), 2, seed=i) for i in range(5)]
    return GestureModel("A", tuple(frames), "ref0", threshold=2.5, seed=42)


def ape_gesture_model(phi=0.0):
    rng = np.random.default_rng(5)
    frames = [fit_ape(rng.normal(size=(9, 3)), 4, 2, phi, seed=i) for i in range(3)]
    return GestureModel("B", tuple(frames), "ref1", threshold=1.5, seed=43)


class TestModelIO:
    @pytest.mark.parametrize("maker", [gmm_gesture_model, ape_gesture_model])
    def test_roundtrip_field_equality(self, maker, tmp_path):
        model = maker()
        path = tmp_path / "m.model.json"
        save_model(model, path)
        loaded = load_model(path)
        assert loaded.class_name == model.class_name
        assert loaded.variant == model.variant
        assert loaded.model_length == model.model_length
        assert loaded.dim == model.dim
        assert loaded.reference_id == model.reference_id
        assert loaded.threshold == model.threshold
        assert loaded.seed == model.seed
        if model.variant == "gmm":
            for a, b in zip(loaded.per_frame_models, model.per_frame_models):
                assert np.array_equal(a.weights, b.weights)
                assert np.array_equal(a.means, b.means)
                assert np.array_equal(a.covariances, b.covariances)
        else:
            for a, b in zip(loaded.per_frame_models, model.per_frame_models):
                assert a.phi == b.phi and a.p == b.p
                for ha, hb in zip(a.hulls, b.hulls):
                    assert np.array_equal(ha.projection, hb.projection)
                    assert np.array_equal(ha.vertices, hb.vertices)
                    assert np.array_equal(ha.expanded_vertices, hb.expanded_vertices)
                    assert np.array_equal(ha.center, hb.center)
                    assert ha.kind == hb.kind

    def test_resave_is_byte_identical(self, tmp_path):
        for maker in (gmm_gesture_model, ape_gesture_model):
            model = maker()
            p1 = tmp_path / f"{model.class_name}1.model.json"
            p2 = tmp_path / f"{model.class_name}2.model.json"
            save_model(model, p1)
            save_model(load_model(p1), p2)
            assert p1.read_bytes() == p2.read_bytes()

    def test_unknown_version_rejected(self, tmp_path):
        model = gmm_gesture_model()
        path = tmp_path / "m.model.json"
        save_model(model, path)
        payload = json.loads(path.read_text())
        payload["format_version"] = 99
        path.write_text(json.dumps(payload))
        with pytest.raises(ValueError, match="unsupported model version"):
            load_model(path)

    def test_mixed_variants_rejected(self):
        g = gmm_gesture_model().per_frame_models[0]
        rng = np.random.default_rng(6)
        a = fit_ape(rng.normal(size=(8, 2)), 3, 2, 0.0, seed=0)
        with pytest.raises(ValueError, match="all-GMM or all-APE"):
            GestureModel("X", (g, a), "ref")

    def test_threshold_must_be_positive(self):
        frames = gmm_gesture_model().per_frame_models
        with pytest.raises(ValueError, match="threshold"):
            GestureModel("X", frames, "ref", threshold=-1.0)
