import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flexarray.errors import DomainError
from flexarray.geometry import (FOLD_LIMIT, ArraySpec, FoldSpec, change_of_basis, fold_layout, layout_arrays,
                                patch_dimensions, rotation_angles, rotation_matrix_inv, stack_frames, unit_vector)

angles = st.floats(-2 * math.pi, 2 * math.pi, allow_nan=False)
folds = st.floats(-float(FOLD_LIMIT), float(FOLD_LIMIT), allow_nan=False)


def _spec(rows=4, cols=4):
    return ArraySpec.default(rows=rows, cols=cols)


# ---------------------------------------------------------------- array spec

def test_default_spec_is_half_wave_grid():
    spec = _spec()
    lam = 299_792_458.0 / 100e9
    assert spec.pitch_x == pytest.approx(lam / 2, rel=1e-12)
    assert spec.beta == pytest.approx(2 * math.pi / lam, rel=1e-12)
    assert spec.excitations.shape == (4, 4)
    assert np.all(spec.excitations == 1)


def test_patch_sizing_is_sub_wavelength():
    w, l = patch_dimensions(100e9, 3.1, 100e-6)
    # standard transmission-line sizing on eps_r = 3.1: W ~ 1.05 mm, L ~ 0.81 mm
    assert w == pytest.approx(1.048e-3, rel=5e-3)
    assert l == pytest.approx(0.806e-3, rel=5e-3)
    assert l < w < 3e-3


@pytest.mark.parametrize("kwargs", [dict(rows=0), dict(cols=-1), dict(patch_width=0.0), dict(pitch_y=-1e-3),
                                    dict(freq=0.0)])
def test_spec_rejects_invalid_dimensions(kwargs):
    with pytest.raises(DomainError):
        ArraySpec.default(**kwargs)


def test_spec_rejects_mismatched_excitations():
    with pytest.raises(DomainError):
        _spec().with_excitations(np.ones((3, 4)))


def test_excitations_are_read_only():
    spec = _spec()
    with pytest.raises(ValueError):
        spec.excitations[0, 0] = 2.0


def test_with_freq_rederives_beta():
    spec = _spec().with_freq(50e9)
    assert spec.beta == pytest.approx(2 * math.pi * 50e9 / 299_792_458.0, rel=1e-12)


# ---------------------------------------------------------------- fold spec

def test_fold_limit_is_enforced():
    FoldSpec.from_degrees(330, -330)
    with pytest.raises(DomainError):
        FoldSpec.from_degrees(330.5, 0)
    with pytest.raises(DomainError):
        FoldSpec(0.0, float("nan"))


def test_fold_label_and_degrees():
    f = FoldSpec.from_degrees(9, 45)
    assert f.label == "x9,y45"
    assert f.degrees == pytest.approx((9.0, 45.0))


# ---------------------------------------------------------------- rotation matrix

def test_rotation_identity():
    assert np.array_equal(rotation_matrix_inv(0.0, 0.0, 0.0), np.eye(3))


def test_rotation_quarter_turn_alpha_x():
    expected = np.array([[0, -1, 0], [1, 0, 0], [0, 0, 1]], dtype=float)
    assert np.allclose(rotation_matrix_inv(math.pi / 2, 0, 0), expected, atol=1e-15)


def test_rotation_factorization_order():
    # alpha_x turns about z, alpha_y about x, alpha_z about y
    def rz(a):
        return np.array([[math.cos(a), -math.sin(a), 0], [math.sin(a), math.cos(a), 0], [0, 0, 1]])

    def rx(a):
        return np.array([[1, 0, 0], [0, math.cos(a), -math.sin(a)], [0, math.sin(a), math.cos(a)]])

    def ry(a):
        return np.array([[math.cos(a), 0, math.sin(a)], [0, 1, 0], [-math.sin(a), 0, math.cos(a)]])

    a, b, c = 0.3, -1.1, 2.2
    assert np.allclose(rotation_matrix_inv(a, b, c), rz(a) @ rx(b) @ ry(c), atol=1e-15)


def test_rotation_orthonormal_for_1000_random_triples():
    rng = np.random.default_rng(12345)
    triples = rng.uniform(-math.pi, math.pi, size=(1000, 3))
    r = rotation_matrix_inv(triples[:, 0], triples[:, 1], triples[:, 2])
    eye = r @ np.swapaxes(r, -1, -2)
    assert np.max(np.abs(eye - np.eye(3))) <= 1e-12
    assert np.max(np.abs(np.linalg.det(r) - 1)) <= 1e-12


def test_rotation_broadcasts():
    r = rotation_matrix_inv(np.zeros((2, 5)), 0.1, np.zeros(5))
    assert r.shape == (2, 5, 3, 3)


@given(angles, st.floats(-1.5, 1.5), angles)
def test_rotation_angles_roundtrip(ax, ay, az):
    r = rotation_matrix_inv(ax, ay, az)
    back = rotation_matrix_inv(*rotation_angles(r))
    assert np.allclose(back, r, atol=1e-12)


def test_rotation_angles_gimbal_lock():
    r = rotation_matrix_inv(0.4, math.pi / 2, 0.3)
    back = rotation_matrix_inv(*rotation_angles(r))
    assert np.allclose(back, r, atol=1e-9)


# ---------------------------------------------------------------- change of basis

def test_change_of_basis_pole():
    t = change_of_basis(0.0, 0.0)
    assert np.allclose(t[:, 0], [0, 0, 1])
    assert np.allclose(t[:, 1], [1, 0, 0])
    assert np.allclose(t[:, 2], [0, 1, 0])


def test_change_of_basis_equator():
    t = change_of_basis(math.pi / 2, 0.0)
    assert np.allclose(t[:, 0], [1, 0, 0], atol=1e-15)
    assert np.allclose(t[:, 1], [0, 0, -1], atol=1e-15)
    assert np.allclose(t[:, 2], [0, 1, 0], atol=1e-15)


@given(st.floats(0, math.pi), st.floats(0, 2 * math.pi))
def test_change_of_basis_is_rotation(theta, phi):
    t = change_of_basis(theta, phi)
    assert np.allclose(t @ t.T, np.eye(3), atol=1e-12)
    assert abs(np.linalg.det(t) - 1) <= 1e-12
    assert np.allclose(t[:, 0], unit_vector(theta, phi), atol=1e-15)


# ---------------------------------------------------------------- fold layout

@pytest.mark.parametrize("anchor", ["edge", "center"])
def test_unfolded_layout_is_flat_grid(anchor):
    spec = _spec()
    frames = fold_layout(spec, FoldSpec(), anchor)
    assert len(frames) == 16
    p = spec.pitch_x
    for f in frames:
        expected = [(f.col - 1.5) * p, (f.row - 1.5) * spec.pitch_y, 0.0]
        assert np.allclose(f.position, expected, atol=1e-12)
        assert f.alphas == (0.0, 0.0, 0.0)


def test_frames_are_row_major():
    frames = fold_layout(_spec(2, 3), FoldSpec.from_degrees(20, 10))
    assert [(f.row, f.col) for f in frames] == [(i, j) for i in range(2) for j in range(3)]


def _two_element_oracle(pitch, xi):
    """Independent trigonometry for two elements on an arc subtending ``xi``."""
    radius = pitch / xi
    return radius, 2 * radius * math.sin(xi / 2)


@pytest.mark.parametrize("rows,cols,fold,angle_index", [(1, 2, (90, 0), 2), (2, 1, (0, 90), 1)])
def test_two_element_quarter_fold(rows, cols, fold, angle_index):
    spec = _spec(rows, cols)
    frames = fold_layout(spec, FoldSpec.from_degrees(*fold), anchor="center")
    a, b = frames
    orient = sorted(abs(math.degrees(f.alphas[angle_index])) for f in frames)
    assert orient == pytest.approx([45.0, 45.0], abs=1e-12)
    assert math.degrees(a.alphas[angle_index]) == pytest.approx(-math.degrees(b.alphas[angle_index]), abs=1e-12)
    rel = a.rotation.T @ b.rotation
    assert math.degrees(math.acos((np.trace(rel) - 1) / 2)) == pytest.approx(90.0, abs=1e-9)
    radius, chord = _two_element_oracle(spec.pitch_x, math.pi / 2)
    assert radius == pytest.approx(spec.pitch_x / (math.pi / 2))
    assert np.linalg.norm(a.position - b.position) == pytest.approx(chord, rel=1e-12)
    assert chord == pytest.approx(2 * radius * math.sin(math.pi / 4), rel=1e-15)


def test_edge_anchor_keeps_first_element_flat():
    frames = fold_layout(_spec(), FoldSpec.from_degrees(45, 45), anchor="edge")
    assert np.allclose(frames[0].rotation, np.eye(3), atol=1e-12)


def test_center_anchor_angles_are_uniform_increments():
    frames = fold_layout(_spec(), FoldSpec.from_degrees(45, 45), anchor="center")
    az = np.array([f.alpha_z for f in frames]).reshape(4, 4)
    ay = np.array([f.alpha_y for f in frames]).reshape(4, 4)
    assert np.allclose(np.degrees(np.diff(az, axis=1)), 15.0, atol=1e-9)
    assert np.allclose(np.degrees(np.diff(ay, axis=0)), -15.0, atol=1e-9)
    assert np.allclose(np.degrees(az[0]), [-22.5, -7.5, 7.5, 22.5], atol=1e-9)


@pytest.mark.parametrize("anchor", ["edge", "center"])
def test_neighbour_frames_turn_by_fold_over_gaps(anchor):
    spec = _spec()
    _, rot = layout_arrays(spec, FoldSpec.from_degrees(45, 45), anchor)
    for i in range(4):
        for j in range(3):
            rel = rot[i, j].T @ rot[i, j + 1]
            assert math.degrees(math.acos(min(1.0, (np.trace(rel) - 1) / 2))) == pytest.approx(15.0, abs=1e-9)


def _arc_spacing(pos, axis, dtheta):
    d = np.diff(pos, axis=axis)
    chord = np.linalg.norm(d, axis=-1)
    if dtheta == 0:
        return chord
    return chord * (dtheta / 2) / math.sin(dtheta / 2)


@settings(max_examples=60, deadline=None)
@given(folds, folds, st.sampled_from(["edge", "center"]))
def test_geodesic_spacing_equals_pitch(xi1, xi2, anchor):
    spec = _spec()
    pos, _ = layout_arrays(spec, FoldSpec(xi1, xi2), anchor)
    sx = _arc_spacing(pos, 1, abs(xi1) / 3)
    sy = _arc_spacing(pos, 0, abs(xi2) / 3)
    assert np.max(np.abs(sx - spec.pitch_x)) <= 1e-9
    assert np.max(np.abs(sy - spec.pitch_y)) <= 1e-9


@settings(max_examples=40, deadline=None)
@given(folds, folds, st.sampled_from(["edge", "center"]))
def test_fold_is_odd_in_xi(xi1, xi2, anchor):
    spec = _spec()
    plus = fold_layout(spec, FoldSpec(xi1, xi2), anchor)
    minus = fold_layout(spec, FoldSpec(-xi1, -xi2), anchor)
    pp, rp, _ = stack_frames(plus)
    pm, rm, _ = stack_frames(minus)
    mirror = np.diag([1.0, 1.0, -1.0])
    assert np.allclose(pm, pp @ mirror, atol=1e-12)
    # reflecting through z = 0 keeps turns about z and negates turns about x and y
    assert np.allclose(rm, mirror @ rp @ mirror, atol=1e-12)
    for a, b in zip(plus, minus):
        assert np.allclose(rotation_matrix_inv(a.alpha_x, -a.alpha_y, -a.alpha_z), b.rotation, atol=1e-12)


def test_array_center_stays_at_origin():
    spec = _spec()
    fold = FoldSpec.from_degrees(90, -60)
    pos_c, rot_c = layout_arrays(spec, fold, "center")
    mid = 0.25 * (pos_c[1, 1] + pos_c[1, 2] + pos_c[2, 1] + pos_c[2, 2])
    assert abs(mid[0]) < 1e-15 and abs(mid[1]) < 1e-15
    # the edge anchor is a rigid turn about the origin
    pos_e, rot_e = layout_arrays(spec, fold, "edge")
    g = rot_e[0, 0] @ rot_c[0, 0].T
    assert np.allclose(pos_e, pos_c @ g.T, atol=1e-15)
    assert np.allclose(np.linalg.norm(pos_e, axis=-1), np.linalg.norm(pos_c, axis=-1), atol=1e-15)


def test_tiny_fold_is_finite_and_near_flat():
    pos, rot = layout_arrays(_spec(), FoldSpec(1e-300, -5e-324))
    flat, _ = layout_arrays(_spec(), FoldSpec())
    assert np.all(np.isfinite(pos)) and np.all(np.isfinite(rot))
    assert np.allclose(pos, flat, atol=1e-15)


def test_positive_fold_is_convex_toward_plus_z():
    pos, _ = layout_arrays(_spec(1, 4), FoldSpec.from_degrees(60, 0), "center")
    z = pos[0, :, 2]
    assert z[0] < z[1] and z[3] < z[2]


def test_unknown_anchor():
    with pytest.raises(DomainError):
        fold_layout(_spec(), FoldSpec(), anchor="corner")
