import math

import numpy as np
import pytest

from viewsal.features import (
    FlowParams,
    optical_flow,
    spatial_saliency,
    temporal_saliency,
    to_grayscale,
    zero_flow,
)
from viewsal.sphere import BlockImage, SphereCoord, ViewportSpec


SPEC_64 = ViewportSpec(center=SphereCoord(math.pi / 2, 0.0), resolution=64)


def wavy_texture(height, width, seed=0):
    """Strongly textured pattern with gradients the flow solver can lock
    onto; values on the 0-255 scale like decoded frames."""
    x = np.arange(width)
    y = np.arange(height)
    xx, yy = np.meshgrid(x, y)
    rng = np.random.default_rng(seed)
    phase = rng.uniform(0, 2 * math.pi, 3)
    return (
        128.0
        + 50.0 * np.sin(2 * math.pi * xx / 24 + phase[0])
        + 40.0 * np.sin(2 * math.pi * yy / 30 + phase[1])
        + 30.0 * np.sin(2 * math.pi * (xx + yy) / 36 + phase[2])
    )


class TestGrayscale:
    def test_luma_weights(self):
        pixels = np.zeros((2, 2, 3))
        pixels[..., 0] = 100.0
        np.testing.assert_allclose(to_grayscale(pixels), 29.9)

    def test_2d_passthrough(self):
        values = np.arange(6.0).reshape(2, 3)
        np.testing.assert_array_equal(to_grayscale(values), values)


class TestSpatialSaliency:
    def test_constant_block_gives_zero_map(self):
        block = BlockImage(SPEC_64, np.full((64, 64, 3), 90.0))
        out = spatial_saliency(block)
        np.testing.assert_array_equal(out.values, np.zeros((64, 64)))

    def test_bright_disk_peaks_inside_disk(self):
        yy, xx = np.mgrid[0:64, 0:64]
        disk = (xx - 40) ** 2 + (yy - 24) ** 2 <= 8**2
        pixels = np.where(disk, 220.0, 40.0)
        out = spatial_saliency(BlockImage(SPEC_64, pixels))
        peak = np.unravel_index(np.argmax(out.values), out.values.shape)
        assert disk[peak]

    def test_deterministic_and_bounded(self):
        rng = np.random.default_rng(4)
        pixels = rng.random((64, 64, 3)) * 255
        a = spatial_saliency(BlockImage(SPEC_64, pixels))
        b = spatial_saliency(BlockImage(SPEC_64, pixels))
        np.testing.assert_array_equal(a.values, b.values)
        assert a.values.min() >= 0.0 and a.values.max() <= 1.0


class TestOpticalFlow:
    def test_identical_frames_give_zero_flow(self):
        pixels = wavy_texture(64, 64)
        flow = optical_flow(BlockImage(SPEC_64, pixels), BlockImage(SPEC_64, pixels))
        assert np.abs(flow.u).max() < 1e-6
        assert np.abs(flow.v).max() < 1e-6

    def test_one_pixel_translation_recovered(self):
        base = wavy_texture(64, 65)
        prev = BlockImage(SPEC_64, base[:, 1:])
        nxt = BlockImage(SPEC_64, base[:, :-1])  # content moves right
        flow = optical_flow(prev, nxt)
        assert 0.8 <= flow.u.mean() <= 1.2
        assert -0.1 <= flow.v.mean() <= 0.1

    def test_time_reversal_negates_flow(self):
        base = wavy_texture(64, 65, seed=2)
        a = BlockImage(SPEC_64, base[:, 1:])
        b = BlockImage(SPEC_64, base[:, :-1])
        forward = optical_flow(a, b)
        backward = optical_flow(b, a)
        diff = np.mean(np.abs(forward.u + backward.u) + np.abs(forward.v + backward.v))
        assert diff < 0.2

    def test_energy_monotone_nonincreasing(self):
        base = wavy_texture(64, 65, seed=3)
        flow = optical_flow(BlockImage(SPEC_64, base[:, 1:]), BlockImage(SPEC_64, base[:, :-1]))
        energies = flow.energy_trace
        assert np.all(np.diff(energies) <= energies[:-1] * 1e-12 + 1e-9)

    def test_spec_mismatch_rejected(self):
        other = ViewportSpec(center=SphereCoord(1.0, 1.0), resolution=64)
        with pytest.raises(ValueError):
            optical_flow(
                BlockImage(SPEC_64, np.zeros((64, 64))),
                BlockImage(other, np.zeros((64, 64))),
            )


class TestTemporalSaliency:
    def test_zero_flow_gives_zero_map(self):
        out = temporal_saliency(zero_flow(SPEC_64))
        np.testing.assert_array_equal(out.values, np.zeros((64, 64)))

    def test_moving_blob_peaks_near_blob(self):
        u = np.zeros((64, 64))
        v = np.zeros((64, 64))
        yy, xx = np.mgrid[0:64, 0:64]
        blob = (xx - 20) ** 2 + (yy - 44) ** 2 <= 6**2
        u[blob] = 3.0
        flow = zero_flow(SPEC_64)
        flow.u = u
        out = temporal_saliency(flow, sigma_px=4.0)
        peak = np.unravel_index(np.argmax(out.values), out.values.shape)
        assert math.hypot(peak[1] - 20, peak[0] - 44) <= 2 * 4.0

    def test_positive_scaling_invariance(self):
        rng = np.random.default_rng(8)
        flow = zero_flow(SPEC_64)
        flow.u = rng.standard_normal((64, 64))
        flow.v = rng.standard_normal((64, 64))
        a = temporal_saliency(flow, sigma_px=2.0)
        flow.u *= 7.5
        flow.v *= 7.5
        b = temporal_saliency(flow, sigma_px=2.0)
        np.testing.assert_allclose(a.values, b.values, atol=1e-12)

    def test_sign_flip_invariance(self):
        rng = np.random.default_rng(9)
        flow = zero_flow(SPEC_64)
        flow.u = rng.standard_normal((64, 64))
        flow.v = rng.standard_normal((64, 64))
        a = temporal_saliency(flow, sigma_px=2.0)
        flow.u = -flow.u
        flow.v = -flow.v
        b = temporal_saliency(flow, sigma_px=2.0)
        np.testing.assert_array_equal(a.values, b.values)

    def test_invalid_sigma(self):
        with pytest.raises(ValueError):
            temporal_saliency(zero_flow(SPEC_64), sigma_px=0.0)

    def test_nonnegative_finite(self):
        rng = np.random.default_rng(10)
        flow = zero_flow(SPEC_64)
        flow.u = rng.standard_normal((64, 64)) * 4
        flow.v = rng.standard_normal((64, 64)) * 4
        out = temporal_saliency(flow)
        assert np.isfinite(out.values).all()
        assert (out.values >= 0).all()
