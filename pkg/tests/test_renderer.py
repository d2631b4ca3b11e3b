"""Splat renderer checks: background exactness, peak placement and
symmetry, one-pixel shift equivariance, output range, off-screen culling
with zero gradients, and finite-difference gradients per pixel."""

import numpy as np
import pytest

import skelmotion.autodiff as ad
from skelmotion.config import CameraConfig
from skelmotion.renderer import CameraBasis, frames_to_uint8, render

from helpers import central_fd, assert_grad_close


def odd_camera(size=33, extent=1.0) -> CameraConfig:
    # odd image size puts the world center on an exact pixel center
    return CameraConfig(width=size, height=size, extent=extent,
                        center=(0.0, 0.0, 0.0))


def test_zero_vertices_render_pure_background():
    out = render(np.zeros((3, 0, 3)), odd_camera())
    assert out.shape == (3, 1, 33, 33)
    assert np.all(out.data == -1.0)


def test_center_vertex_peaks_at_center_with_radial_falloff():
    cam = odd_camera()
    out = render(np.zeros((1, 1, 3)), cam).data[0, 0]
    mid = cam.height // 2
    assert np.unravel_index(np.argmax(out), out.shape) == (mid, mid)
    for k in (1, 2, 5):
        ring = [out[mid + k, mid], out[mid - k, mid],
                out[mid, mid + k], out[mid, mid - k]]
        assert np.allclose(ring, ring[0], atol=1e-12)
        assert ring[0] < out[mid, mid]


def test_one_pixel_world_shift_moves_argmax_one_pixel():
    cam = odd_camera()
    pixel = cam.extent / cam.height     # world size of one pixel
    verts = np.zeros((3, 1, 3))
    verts[1, 0, 0] = pixel              # +right: column + 1
    verts[2, 0, 1] = pixel              # +up: row - 1
    out = render(verts, cam).data[:, 0]
    mid = cam.height // 2
    base = np.unravel_index(np.argmax(out[0]), out[0].shape)
    assert base == (mid, mid)
    assert np.unravel_index(np.argmax(out[1]), out[1].shape) == (mid, mid + 1)
    assert np.unravel_index(np.argmax(out[2]), out[2].shape) == (mid - 1, mid)


def test_output_stays_inside_unit_range():
    rng = np.random.default_rng(0)
    verts = rng.normal(scale=0.05, size=(2, 300, 3))    # heavy overlap
    out = render(verts, odd_camera()).data
    assert out.min() >= -1.0
    assert out.max() <= 1.0


def test_offscreen_vertices_give_background_and_zero_gradient():
    cam = odd_camera()
    verts0 = np.full((2, 4, 3), 50.0)   # far outside the frustum
    tape = ad.Tape()
    verts = tape.leaf(verts0)
    out = render(verts, cam)
    assert np.all(out.data == -1.0)
    grads = tape.gradients(ad.tsum(out))
    assert np.all(grads[verts.node].data == 0.0)


def test_every_pixel_gradient_matches_fd():
    cam = CameraConfig(width=12, height=12, extent=1.0,
                       center=(0.0, 0.0, 0.0))
    rng = np.random.default_rng(1)
    verts0 = rng.uniform(-0.25, 0.25, size=(2, 3, 3))
    probe = rng.normal(size=(2, 1, 12, 12))   # random pixel combination

    def run(v):
        return ad.tsum(ad.mul(render(v, cam), probe))

    tape = ad.Tape()
    verts = tape.leaf(verts0)
    grads = tape.gradients(run(verts))
    fd = central_fd(lambda v: float(run(v).data), verts0, h=1e-6)
    assert_grad_close(grads[verts.node].data, fd, rel_tol=1e-4)


def test_single_pixel_gradient_matches_fd():
    cam = CameraConfig(width=12, height=12, extent=1.0,
                       center=(0.0, 0.0, 0.0))
    verts0 = np.array([[[0.05, -0.04, 0.0], [-0.1, 0.08, 0.2]]])

    def pixel(v):
        return render(v, cam)[0, 0, 6, 7]

    tape = ad.Tape()
    verts = tape.leaf(verts0)
    grads = tape.gradients(pixel(verts))
    fd = central_fd(lambda v: float(pixel(v).data), verts0, h=1e-6)
    assert_grad_close(grads[verts.node].data, fd, rel_tol=1e-4)


def test_colors_select_channels():
    cam = odd_camera()
    colors = np.array([[1.0, 0.0]])     # bright in channel 0, dark in 1
    out = render(np.zeros((1, 1, 3)), cam, colors=colors).data
    assert out.shape == (1, 2, 33, 33)
    assert out[0, 0].max() > -1.0
    assert np.all(out[0, 1] == -1.0)


def test_render_is_deterministic():
    rng = np.random.default_rng(2)
    verts = rng.normal(scale=0.2, size=(3, 40, 3))
    cam = odd_camera()
    a = render(verts, cam).data
    b = render(verts, cam).data
    assert a.tobytes() == b.tobytes()


def test_camera_rejects_degenerate_setups():
    with pytest.raises(ValueError):
        CameraBasis(CameraConfig(width=4, height=4))
    with pytest.raises(ValueError):
        CameraBasis(CameraConfig(view=(0.0, 1.0, 0.0), up=(0.0, 1.0, 0.0)))
    with pytest.raises(ValueError):
        CameraBasis(CameraConfig(view=(0.0, 0.0, 0.0)))


def test_projection_maps_center_to_image_center():
    cam = odd_camera()
    basis = CameraBasis(cam)
    row, col = basis.project(np.zeros((1, 3)))
    assert row[0] == pytest.approx((cam.height - 1) / 2.0)
    assert col[0] == pytest.approx((cam.width - 1) / 2.0)


def test_frames_to_uint8_endpoints():
    frames = np.array([[-1.0, 0.0, 1.0]])
    out = frames_to_uint8(frames)
    assert out.dtype == np.uint8
    assert list(out[0]) == [0, 127, 255]
