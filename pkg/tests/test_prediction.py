"""Resampling, AR fitting/recovery, prediction and rollout behavior."""

from __future__ import annotations

import numpy as np
import pytest

from gridtrack.errors import ConfigError, InsufficientDataError
from gridtrack.prediction import (
    ARModel,
    fit_ar,
    fit_ar_pooled,
    one_step_predictions,
    predict_next,
    resample_uniform,
    rollout,
)
from gridtrack.tracking import Track, TrackPoint


def track_at(ts_s, xy, camera_id="cam0"):
    return Track(tuple(
        TrackPoint(ts_us=int(round(t * 1e6)), pos=(float(x), float(y)),
                   camera_id=camera_id)
        for t, (x, y) in zip(ts_s, xy)
    ))


def stable_ar2_generator(rng, n, robot=True):
    """Simulate a known stable AR(2) with optional exogenous robot terms."""
    a1 = 0.4 * (rng.random((2, 2)) - 0.5)
    a2 = 0.3 * (rng.random((2, 2)) - 0.5)
    b1 = 0.2 * (rng.random((2, 2)) - 0.5) if robot else np.zeros((2, 2))
    b2 = 0.1 * (rng.random((2, 2)) - 0.5) if robot else np.zeros((2, 2))
    c = rng.random(2)
    r = np.cumsum(rng.normal(scale=0.1, size=(n, 2)), axis=0)
    z = np.zeros((n, 2))
    z[0] = rng.random(2)
    z[1] = rng.random(2)
    for t in range(1, n - 1):
        z[t + 1] = c + a1 @ z[t] + a2 @ z[t - 1] + b1 @ r[t] + b2 @ r[t - 1]
    return z, r, (c, a1, a2, b1, b2)


class TestResample:
    def test_already_uniform_identity(self):
        ts = [0.0, 0.25, 0.5, 0.75, 1.0]
        xy = [(i, -i) for i in range(5)]
        out = resample_uniform(track_at(ts, xy), 0.25)
        assert out.shape == (5, 2)
        assert np.allclose(out, xy, atol=1e-9)

    def test_two_point_interpolation(self):
        out = resample_uniform(track_at([0.0, 1.0], [(0, 0), (4, 0)]), 0.25)
        assert np.allclose(out, [(0, 0), (1, 0), (2, 0), (3, 0), (4, 0)])

    def test_jittered_sinusoid_matches_interp_oracle(self, rng):
        base = np.sort(rng.uniform(0, 10, size=120))
        base[0], base[-1] = 0.0, 10.0
        xy = np.column_stack((np.sin(base), np.cos(0.7 * base)))
        track = track_at(base, xy)
        out = resample_uniform(track, 0.25)
        # oracle: manual per-axis linear interpolation
        ts = np.asarray([p.ts_us for p in track]) / 1e6
        grid = ts[0] + 0.25 * np.arange(out.shape[0])

        def interp1(t):
            j = np.searchsorted(ts, t, side="right") - 1
            j = min(max(j, 0), len(ts) - 2)
            w = (t - ts[j]) / (ts[j + 1] - ts[j])
            return (1 - w) * xy[j] + w * xy[j + 1]

        oracle = np.array([interp1(t) for t in grid])
        assert np.allclose(out, oracle, atol=1e-9)

    def test_short_span_rejected(self):
        with pytest.raises(InsufficientDataError):
            resample_uniform(track_at([0.0, 0.4], [(0, 0), (1, 1)]), 0.25)


class TestFit:
    def test_constant_trajectory_is_fixed_point(self):
        z = np.tile([2.0, -3.0], (40, 1))
        model = fit_ar(z, p=2)
        assert model.fit_rmse_m == pytest.approx(0.0, abs=1e-9)
        pred = predict_next(model, z[-2:])
        assert pred[0] == pytest.approx(2.0, abs=1e-9)
        assert pred[1] == pytest.approx(-3.0, abs=1e-9)

    def test_constant_velocity_exact_with_two_lags(self):
        t = np.arange(60)
        z = np.column_stack((0.1 * t + 1.0, -0.05 * t + 2.0))
        model = fit_ar(z, p=2, dt_s=0.25)
        assert model.fit_rmse_m < 1e-9
        pred = predict_next(model, z[-2:])
        # next position = current + one step of the constant velocity
        assert pred[0] == pytest.approx(z[-1, 0] + 0.1, abs=1e-9)
        assert pred[1] == pytest.approx(z[-1, 1] - 0.05, abs=1e-9)

    def test_recovers_known_ar2_with_robot_terms(self, rng):
        z, r, (c, a1, a2, b1, b2) = stable_ar2_generator(rng, 400)
        model = fit_ar(z, r, p=2)
        assert np.allclose(model.intercept, c, atol=1e-6)
        assert np.allclose(model.evacuee_matrices()[0], a1, atol=1e-6)
        assert np.allclose(model.evacuee_matrices()[1], a2, atol=1e-6)
        assert np.allclose(model.robot_matrices()[0], b1, atol=1e-6)
        assert np.allclose(model.robot_matrices()[1], b2, atol=1e-6)
        assert model.fit_rmse_m < 1e-9

    def test_sample_floor_enforced(self):
        z = np.zeros((4 * 3 + 9, 2))
        with pytest.raises(InsufficientDataError):
            fit_ar(z, p=3)

    def test_residual_no_worse_than_zero_model(self, rng):
        z = np.cumsum(rng.normal(size=(80, 2)), axis=0)
        model = fit_ar(z, p=2)
        targets = z[2:]
        zero_rmse = float(np.sqrt(np.mean(np.sum(targets**2, axis=1))))
        assert model.fit_rmse_m <= zero_rmse + 1e-12

    def test_translation_equivariance(self, rng):
        z, r, _ = stable_ar2_generator(rng, 200)
        shift = np.array([13.7, -4.2])
        model = fit_ar(z, r, p=2)
        model_shifted = fit_ar(z + shift, r, p=2)
        pred = np.asarray(predict_next(model, z[-2:], r[-2:]))
        pred_shifted = np.asarray(
            predict_next(model_shifted, z[-2:] + shift, r[-2:]))
        assert np.allclose(pred_shifted, pred + shift, atol=1e-6)

    def test_rank_deficient_input_still_fits(self):
        # all samples identical in x, varying in y: regressor is rank deficient
        t = np.arange(60)
        z = np.column_stack((np.full_like(t, 5.0, dtype=float), 0.1 * t))
        model = fit_ar(z, p=4)
        assert model.fit_rmse_m < 1e-8

    def test_pooled_fit_recovers_shared_dynamics(self, rng):
        # two trials generated by the same AR(2); pooled rows stay per-trial
        z1, _, (c, a1, a2, _, _) = stable_ar2_generator(rng, 150, robot=False)
        z2 = np.zeros((150, 2))
        z2[0] = rng.random(2)
        z2[1] = rng.random(2)
        for t in range(1, 149):
            z2[t + 1] = c + a1 @ z2[t] + a2 @ z2[t - 1]
        model = fit_ar_pooled([(z1, None), (z2, None)], p=2)
        assert np.allclose(model.intercept, c, atol=1e-6)
        assert np.allclose(model.evacuee_matrices(), [a1, a2], atol=1e-6)
        assert not model.has_robot_terms

    def test_pooled_fit_validates_inputs(self, rng):
        z, r, _ = stable_ar2_generator(rng, 100)
        with pytest.raises(ValueError):
            fit_ar_pooled([(z, r), (z, None)], p=2)
        with pytest.raises(InsufficientDataError):
            fit_ar_pooled([], p=2)
        with pytest.raises(InsufficientDataError):
            fit_ar_pooled([(z[:5], None)], p=2)


class TestPredict:
    def test_linear_in_window_contents(self, rng):
        z, r, _ = stable_ar2_generator(rng, 200)
        model = fit_ar(z, p=2)
        w1 = rng.random((2, 2))
        w2 = rng.random((2, 2))
        alpha = 0.37
        blend = alpha * w1 + (1 - alpha) * w2
        # affine map: subtract the intercept contribution before comparing
        base = np.asarray(model.intercept)
        p1 = np.asarray(predict_next(model, w1)) - base
        p2 = np.asarray(predict_next(model, w2)) - base
        pb = np.asarray(predict_next(model, blend)) - base
        assert np.allclose(pb, alpha * p1 + (1 - alpha) * p2, atol=1e-9)

    def test_short_window_rejected(self):
        z = np.cumsum(np.ones((30, 2)), axis=0)
        model = fit_ar(z, p=3)
        with pytest.raises(InsufficientDataError):
            predict_next(model, z[-2:])

    def test_robot_model_requires_robot_window(self, rng):
        z, r, _ = stable_ar2_generator(rng, 200)
        model = fit_ar(z, r, p=2)
        with pytest.raises(InsufficientDataError):
            predict_next(model, z[-2:])

    def test_rollout_first_step_equals_predict_next(self, rng):
        z, r, _ = stable_ar2_generator(rng, 200)
        model = fit_ar(z, r, p=2)
        single = predict_next(model, z[-5:], r[-5:])
        steps = rollout(model, z[-5:], r[-5:], k=1)
        assert steps.shape == (1, 2)
        assert tuple(steps[0]) == single

    def test_rollout_tracks_constant_velocity_exactly(self):
        t = np.arange(60, dtype=float)
        z = np.column_stack((0.25 * t, 3.0 - 0.1 * t))
        model = fit_ar(z, p=2)
        k = 12
        steps = rollout(model, z[-4:], k=k)
        future_t = t[-1] + 1 + np.arange(k)
        truth = np.column_stack((0.25 * future_t, 3.0 - 0.1 * future_t))
        rmse = float(np.sqrt(np.mean(np.sum((steps - truth) ** 2, axis=1))))
        assert rmse < 1e-9

    def test_one_step_predictions_causal(self):
        t = np.arange(30, dtype=float)
        z = np.column_stack((t, 2 * t))
        model = fit_ar(z, p=2)
        rows = one_step_predictions(model, z)
        assert len(rows) == 30 - model.p
        for ts, pred, actual in rows:
            assert pred[0] == pytest.approx(actual[0], abs=1e-8)
            assert pred[1] == pytest.approx(actual[1], abs=1e-8)


class TestModelFile:
    def test_json_round_trip(self, tmp_path, rng):
        z, r, _ = stable_ar2_generator(rng, 200)
        model = fit_ar(z, r, p=2)
        path = tmp_path / "model.json"
        model.save(path)
        loaded = ARModel.load(path)
        assert loaded == model

    def test_schema_matches_interface(self, tmp_path, rng):
        import json

        z, r, _ = stable_ar2_generator(rng, 200)
        model = fit_ar(z, r, p=3)
        path = tmp_path / "model.json"
        model.save(path)
        doc = json.loads(path.read_text())
        assert set(doc) == {"p", "dt_s", "c", "A", "B", "fit_rmse_m"}
        assert doc["p"] == 3
        assert doc["dt_s"] == 0.25
        assert len(doc["c"]) == 2
        assert np.asarray(doc["A"]).shape == (3, 2, 2)
        assert np.asarray(doc["B"]).shape == (3, 2, 2)

    def test_invalid_file_rejected(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{\"p\": 0}")
        with pytest.raises(ConfigError):
            ARModel.load(path)
