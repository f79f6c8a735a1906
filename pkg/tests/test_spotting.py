import math

import numpy as np
import pytest

from gesturespot.align import build_warped_set
from gesturespot.pipeline import TemplateModel
from gesturespot.seqmodel import Sequence
from gesturespot.spotting import calibrate_threshold, spot
from gesturespot.train import train_gmm_gesture_model
from oracles import full_open_start


def make_template(rng, length=18, dim=2):
    steps = rng.standard_normal((length, dim))
    return np.cumsum(steps, axis=0) * 0.4


def warped_copy(rng, template, noise=0.05):
    n = template.shape[0]
    speeds = rng.uniform(0.7, 1.3, size=n)
    ts = np.cumsum(speeds)
    ts = (ts - ts[0]) / (ts[-1] - ts[0]) * (n - 1)
    out = np.stack([np.interp(ts, np.arange(n), template[:, k])
                    for k in range(template.shape[1])], axis=1)
    return out + rng.normal(0, noise, size=out.shape)


def class_samples(rng, template, n=8):
    return [Sequence(f"s{i}", warped_copy(rng, template)) for i in range(n)]


def gmm_trainer(samples):
    return train_gmm_gesture_model(build_warped_set(samples, "A"), 1, seed=0)


def calibrated_gmm_model(rng, template, samples=None):
    samples = samples or class_samples(rng, template)
    report = calibrate_threshold(samples, gmm_trainer)
    return gmm_trainer(samples).with_threshold(report.threshold), samples


def noise_frames(rng, n, dim=2, amplitude=5.0):
    return rng.uniform(-amplitude, amplitude, size=(n, dim))


class TestSpot:
    def test_embedded_instance_detected(self):
        rng = np.random.default_rng(0)
        template = make_template(rng)
        model, _ = calibrated_gmm_model(rng, template)
        inst = warped_copy(rng, template)
        begin = 30
        stream = Sequence("q", np.vstack([
            noise_frames(rng, begin), inst, noise_frames(rng, 25)]))
        dets = spot(model, stream)
        assert len(dets) == 1
        d = dets[0]
        true = set(range(begin, begin + inst.shape[0]))
        got = set(range(d.begin, d.end + 1))
        jacc = len(true & got) / len(true | got)
        assert jacc >= 0.6
        assert d.terminal_cost < model.threshold

    def test_unreachable_threshold_yields_nothing(self):
        rng = np.random.default_rng(1)
        template = make_template(rng)
        model, _ = calibrated_gmm_model(rng, template)
        m = model.model_length
        quiet = model.with_threshold(m * (math.exp(-1.0) + 0.01))
        stream = Sequence("q", noise_frames(rng, 120, amplitude=50.0))
        assert spot(quiet, stream) == []

    def test_missing_threshold_rejected(self):
        rng = np.random.default_rng(2)
        template = make_template(rng)
        model = gmm_trainer(class_samples(rng, template))
        with pytest.raises(ValueError, match="threshold"):
            spot(model, Sequence("q", noise_frames(rng, 10)))

    def test_first_detection_matches_full_matrix_decision(self):
        # replay the threshold + local-minimum rule on an oracle-built matrix
        rng = np.random.default_rng(3)
        template = make_template(rng, length=10)
        model, _ = calibrated_gmm_model(rng, template)
        inst = warped_copy(rng, template)
        stream = Sequence("q", np.vstack([
            noise_frames(rng, 15), inst, noise_frames(rng, 15)]))
        beta = model.threshold
        costs = [model.row_costs(q) for q in stream.frames]
        bottoms, _ = full_open_start([c.tolist() for c in costs])
        end_col = None
        best = None
        for j, v in enumerate(bottoms, start=1):
            if best is None:
                if v < beta:
                    best, end_col = v, j
            elif v < beta:
                if v < best:
                    best, end_col = v, j
            else:
                break
        dets = spot(model, stream)
        assert dets, "expected at least one detection"
        assert dets[0].end == end_col - 1
        assert dets[0].terminal_cost == pytest.approx(best, abs=0.0)

    def test_two_instances_two_detections(self):
        rng = np.random.default_rng(4)
        template = make_template(rng)
        model, _ = calibrated_gmm_model(rng, template)
        i1, i2 = warped_copy(rng, template), warped_copy(rng, template)
        stream = Sequence("q", np.vstack([
            noise_frames(rng, 25), i1, noise_frames(rng, 40), i2,
            noise_frames(rng, 25)]))
        dets = spot(model, stream)
        assert len(dets) == 2
        assert dets[0].end < dets[1].begin
        assert len({(d.begin, d.end) for d in dets}) == 2

    def test_detection_path_replay_cost(self):
        rng = np.random.default_rng(5)
        template = make_template(rng)
        model, _ = calibrated_gmm_model(rng, template)
        stream = Sequence("q", np.vstack([
            noise_frames(rng, 20), warped_copy(rng, template),
            noise_frames(rng, 35), warped_copy(rng, template),
            noise_frames(rng, 20)]))
        dets = spot(model, stream)
        assert dets
        for d in dets:
            offset = d.end - (d.path.end_col - 1)  # session start frame
            replay = 0.0
            for i, j in d.path.steps:
                frame = stream.frames[offset + j - 1]
                replay += model.row_costs(frame)[i - 1]
            assert replay == pytest.approx(d.terminal_cost, abs=1e-9)
            assert d.begin == offset + d.path.begin_col - 1

    def test_strict_first_hit_fires_no_later(self):
        rng = np.random.default_rng(6)
        template = make_template(rng)
        model, _ = calibrated_gmm_model(rng, template)
        inst = warped_copy(rng, template)
        stream = Sequence("q", np.vstack([
            noise_frames(rng, 20), inst, noise_frames(rng, 20)]))
        relaxed = spot(model, stream)
        strict = spot(model, stream, strict_first_hit=True)
        assert strict and relaxed
        assert strict[0].end <= relaxed[0].end

    def test_determinism(self):
        rng = np.random.default_rng(7)
        template = make_template(rng)
        model, _ = calibrated_gmm_model(rng, template)
        stream = Sequence("q", np.vstack([
            noise_frames(rng, 15), warped_copy(rng, template),
            noise_frames(rng, 15)]))
        a = spot(model, stream)
        b = spot(model, stream)
        assert [(d.begin, d.end, d.terminal_cost) for d in a] == \
               [(d.begin, d.end, d.terminal_cost) for d in b]

    def test_dim_mismatch(self):
        rng = np.random.default_rng(8)
        template = make_template(rng)
        model, _ = calibrated_gmm_model(rng, template)
        with pytest.raises(ValueError, match="dim"):
            spot(model, Sequence("q", np.zeros((5, 7))))


class TestCalibration:
    def test_near_identical_samples(self):
        rng = np.random.default_rng(9)
        template = make_template(rng)
        base = template + rng.normal(0, 1e-4, size=template.shape)
        samples = [Sequence(f"s{i}", base + rng.normal(0, 1e-4, size=base.shape))
                   for i in range(5)]
        trainer = lambda rest: TemplateModel("A", rest[0].frames)
        report = calibrate_threshold(samples, trainer)
        assert max(report.held_out_costs) < 0.1  # tiny costs
        assert report.threshold == pytest.approx(1.05 * max(report.held_out_costs))
        assert max(report.hit_counts) == 5

    def test_single_sample_rejected(self):
        with pytest.raises(ValueError):
            calibrate_threshold([Sequence("s", np.zeros((3, 1)))],
                                lambda rest: None)

    def test_smallest_candidate_never_chosen(self):
        rng = np.random.default_rng(10)
        template = make_template(rng)
        samples = class_samples(rng, template, n=5)
        report = calibrate_threshold(samples, gmm_trainer)
        assert report.hit_counts[0] == 0  # grid minimum = smallest cost
        assert report.threshold > report.candidate_grid[0]

    def test_gmm_calibration_hits_all(self):
        rng = np.random.default_rng(11)
        template = make_template(rng)
        samples = class_samples(rng, template, n=6)
        report = calibrate_threshold(samples, gmm_trainer)
        assert max(report.hit_counts) == 6
        assert report.threshold == pytest.approx(1.05 * max(report.held_out_costs))

    def test_saturation_ceiling_filters_candidates(self):
        # held-out costs pinned to the ceiling (membership underflows to 0,
        # every row cost exactly 1) cannot produce a usable threshold
        rng = np.random.default_rng(12)
        template = make_template(rng, length=6)
        far = [Sequence(f"s{i}", template + 100.0 + i) for i in range(4)]

        def trainer(rest):
            return gmm_trainer([Sequence("t1", template), Sequence("t2", template)])

        with pytest.raises(ValueError, match="saturation"):
            calibrate_threshold(far, trainer)

    def test_threshold_stays_below_ceiling(self):
        rng = np.random.default_rng(13)
        template = make_template(rng)
        samples = class_samples(rng, template, n=6)
        report = calibrate_threshold(samples, gmm_trainer)
        fold_len = len(build_warped_set(samples[1:], "A").warped[0])
        assert report.threshold < fold_len  # bottoms cannot exceed model_length
