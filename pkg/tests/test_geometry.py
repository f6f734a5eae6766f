import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from phonotdoa.errors import (
    InvalidPoseError,
    NoEchoError,
    NoSolutionError,
    UnderdeterminedError,
)
from phonotdoa.geometry import (
    PIVOT_BOTTOM,
    PIVOT_TOP,
    REFERENCE_POSE,
    DevicePose,
    estimate_face_distance,
    make_beep,
    mic_positions,
    pose_to_tdoa,
    solve_source_distance,
    transform_tdoa,
    transform_tdoa_for_angle,
    transform_tdoa_for_distance,
)
from phonotdoa.simulator import synthesize_beep_scene

FS = 192000


def test_pose_validation():
    with pytest.raises(InvalidPoseError):
        DevicePose(x=0.0, l1=0.1, l2=0.01, l=0.15)
    with pytest.raises(InvalidPoseError):
        DevicePose(x=0.03, l1=0.1, l2=0.01, l=0.15, alpha=math.pi / 2)
    with pytest.raises(InvalidPoseError):
        DevicePose(x=0.03, l1=-0.1, l2=0.01, l=0.15)


def test_symmetric_pose_zero_delay():
    pose = DevicePose(x=0.05, l1=0.075, l2=0.075, l=0.15)
    assert pose_to_tdoa(pose, (0.0, 0.0), FS) == pytest.approx(0.0, abs=1e-12)


def test_reference_pose_hand_value():
    # sqrt(0.14^2 + 0.03^2) - sqrt(0.01^2 + 0.03^2) = sqrt(0.0205) - sqrt(0.0010)
    expected = (math.sqrt(0.0205) - math.sqrt(0.0010)) / 340.0 * FS
    got = pose_to_tdoa(REFERENCE_POSE, (0.0, 0.0), FS)
    assert got == pytest.approx(expected, abs=1e-9)
    assert got == pytest.approx(63.0, abs=0.05)
    assert 46.0 <= got <= 65.0


def test_delay_linear_in_sample_rate():
    d1 = pose_to_tdoa(REFERENCE_POSE, (0.01, -0.005), FS)
    d2 = pose_to_tdoa(REFERENCE_POSE, (0.01, -0.005), 2 * FS)
    assert d2 == pytest.approx(2.0 * d1, rel=1e-12)


def test_mic_positions_vertical():
    (ty, tz), (by, bz) = mic_positions(REFERENCE_POSE)
    assert (ty, tz) == (0.03, 0.14)
    assert by == pytest.approx(0.03)
    assert bz == pytest.approx(-0.01)


def test_solve_recovers_forward_value():
    tdoa = pose_to_tdoa(REFERENCE_POSE, (0.0, 0.0), FS)
    x = solve_source_distance(tdoa, 0.14, 0.01, FS)
    assert x == pytest.approx(0.03, abs=1e-5)


def test_solve_underdetermined_and_no_solution():
    with pytest.raises(UnderdeterminedError):
        solve_source_distance(0.0, 0.075, 0.075, FS)
    with pytest.raises(NoSolutionError):
        solve_source_distance(10.0, 0.075, 0.075, FS)
    # delta_d = 0.2 m exceeds l1 - l2 = 0.13 m
    tdoa_for_point2 = 0.2 / 340.0 * FS
    with pytest.raises(NoSolutionError):
        solve_source_distance(tdoa_for_point2, 0.14, 0.01, FS)
    # zero delay with asymmetric mics: x -> infinity
    with pytest.raises(NoSolutionError):
        solve_source_distance(0.0, 0.14, 0.01, FS)
    # sign inconsistent with geometry (nasal-like negative delay)
    with pytest.raises(NoSolutionError):
        solve_source_distance(-30.0, 0.14, 0.01, FS)


def test_angle_identity_at_zero_top_pivot():
    # identity up to the source-distance solver tolerance (1e-6 m)
    tdoa = pose_to_tdoa(REFERENCE_POSE, (0.0, 0.0), FS)
    out = transform_tdoa_for_angle(tdoa, REFERENCE_POSE, 0.0, FS, pivot=PIVOT_TOP)
    assert out == pytest.approx(tdoa, abs=0.01)


def test_angle_bottom_pivot_not_identity():
    # the bottom-referenced form does not reduce to identity at alpha=0
    tdoa = pose_to_tdoa(REFERENCE_POSE, (0.0, 0.0), FS)
    out = transform_tdoa_for_angle(tdoa, REFERENCE_POSE, 0.0, FS, pivot=PIVOT_BOTTOM)
    assert abs(out - tdoa) > 1.0


def _hand_transform(tdoa1, l1, l2, l, alpha, pivot_height_from):
    """Independent evaluation of the tilt transform used as an oracle."""
    delta = tdoa1 * 340.0 / FS
    lo, hi = 1e-6, 10.0
    for _ in range(200):
        mid = (lo + hi) / 2
        val = math.sqrt(l1**2 + mid**2) - math.sqrt(l2**2 + mid**2)
        if val > delta:
            lo = mid
        else:
            hi = mid
    x = (lo + hi) / 2
    d1 = math.sqrt(l1**2 + x**2)
    bz = pivot_height_from - l * math.cos(alpha)
    d2 = math.sqrt((l * math.sin(alpha) + x) ** 2 + bz**2)
    return (d1 - d2) / 340.0 * FS


@pytest.mark.parametrize("alpha_deg", [15.0, 30.0, 45.0])
def test_angle_transform_matches_hand_evaluation(alpha_deg):
    alpha = math.radians(alpha_deg)
    tdoa1 = pose_to_tdoa(REFERENCE_POSE, (0.0, 0.0), FS)
    got_top = transform_tdoa_for_angle(tdoa1, REFERENCE_POSE, alpha, FS, pivot=PIVOT_TOP)
    want_top = _hand_transform(tdoa1, 0.14, 0.01, 0.15, alpha, pivot_height_from=0.14)
    assert got_top == pytest.approx(want_top, abs=1e-3)
    got_bottom = transform_tdoa_for_angle(tdoa1, REFERENCE_POSE, alpha, FS, pivot=PIVOT_BOTTOM)
    want_bottom = _hand_transform(tdoa1, 0.14, 0.01, 0.15, alpha, pivot_height_from=0.01)
    assert got_bottom == pytest.approx(want_bottom, abs=1e-3)


def test_distance_identity_at_zero():
    tdoa = pose_to_tdoa(REFERENCE_POSE, (0.0, 0.0), FS)
    out = transform_tdoa_for_distance(tdoa, REFERENCE_POSE, 0.0, FS)
    assert out == tdoa  # exact: no pose change


def test_distance_transform_hand_value():
    # x = 0.03, delta = 0.27: (sqrt(0.0196+0.09) - sqrt(0.0001+0.09)) scaled
    tdoa = pose_to_tdoa(REFERENCE_POSE, (0.0, 0.0), FS)
    out = transform_tdoa_for_distance(tdoa, REFERENCE_POSE, 0.27, FS)
    want = (math.sqrt(0.0196 + 0.09) - math.sqrt(0.0001 + 0.09)) / 340.0 * FS
    assert out == pytest.approx(want, abs=2e-3)
    assert out == pytest.approx(17.4, abs=0.1)


def test_distance_transform_monotone_shrink():
    tdoa = pose_to_tdoa(REFERENCE_POSE, (0.0, 0.0), FS)
    prev = abs(tdoa)
    for dx in np.linspace(0.05, 4.0, 25):
        cur = abs(transform_tdoa_for_distance(tdoa, REFERENCE_POSE, float(dx), FS))
        assert cur < prev
        prev = cur


def test_distance_transform_invalid_pose():
    tdoa = pose_to_tdoa(REFERENCE_POSE, (0.0, 0.0), FS)
    with pytest.raises(InvalidPoseError):
        transform_tdoa_for_distance(tdoa, REFERENCE_POSE, -5.0, FS)


@settings(max_examples=60, deadline=None)
@given(
    x=st.floats(min_value=0.01, max_value=0.5),
    l1=st.floats(min_value=0.05, max_value=0.2),
    l2=st.floats(min_value=0.0, max_value=0.04),
)
def test_forward_inverse_consistency(x, l1, l2):
    if abs(l1 - l2) < 1e-3:
        return
    pose = DevicePose(x=x, l1=l1, l2=l2, l=l1 + l2)
    tdoa = pose_to_tdoa(pose, (0.0, 0.0), FS)
    if tdoa <= 0:
        return
    got = solve_source_distance(tdoa, l1, l2, FS)
    assert got == pytest.approx(x, abs=1e-5)


def test_pose_to_tdoa_continuity():
    # finite-difference smoothness sweep over each pose field
    base = dict(x=0.05, l1=0.12, l2=0.02, l=0.14, alpha=0.1)
    for field in ("x", "l1", "l2", "alpha"):
        eps = 1e-7
        lo = dict(base)
        hi = dict(base)
        lo[field] -= eps
        hi[field] += eps
        d_lo = pose_to_tdoa(DevicePose(**lo), (0.004, -0.003), FS)
        d_hi = pose_to_tdoa(DevicePose(**hi), (0.004, -0.003), FS)
        assert abs(d_hi - d_lo) < 1.0  # no jumps at 1e-7 perturbation


def test_transform_respects_triangle_inequality():
    tdoa = pose_to_tdoa(REFERENCE_POSE, (0.0, 0.0), FS)
    for alpha_deg in (0, 20, 40, 60):
        for dx in (0.0, 0.1, 0.5):
            out = transform_tdoa(
                tdoa, REFERENCE_POSE, alpha=math.radians(alpha_deg),
                delta_x=dx, sample_rate=FS, pivot=PIVOT_TOP,
            )
            assert abs(out) * 340.0 / FS <= REFERENCE_POSE.l + 1e-9


def test_make_beep_shape():
    beep = make_beep(192000)
    assert len(beep) == 9600  # 50 ms at 192 kHz
    spec = np.abs(np.fft.rfft(beep))
    freqs = np.fft.rfftfreq(len(beep), 1 / 192000)
    band_energy = spec[(freqs >= 17500) & (freqs <= 23500)].sum()
    assert band_energy / spec.sum() > 0.95
    with pytest.raises(InvalidPoseError):
        make_beep(44100)


def test_face_distance_on_simulated_scene():
    beep = make_beep(192000)
    for d in (0.10, 0.15, 0.5):
        rec = synthesize_beep_scene(d, seed=3)
        est = estimate_face_distance(rec, beep)
        assert est == pytest.approx(d, abs=0.02)


def test_face_distance_sweep_offsets():
    # handset pushed 5/10/15 cm out from the 3 cm base pose
    beep = make_beep(192000)
    for offset in (0.05, 0.10, 0.15):
        d = 0.03 + offset
        errs = []
        for seed in range(5):
            rec = synthesize_beep_scene(d, seed=seed)
            errs.append(estimate_face_distance(rec, beep) - d)
        assert abs(np.mean(errs)) < 0.02
        assert np.std(errs) < 0.03


def test_face_distance_echo_free():
    rng = np.random.default_rng(0)
    rec_top = np.clip(rng.normal(0, 0.02, 50000), -1, 1)
    rec_bot = np.clip(rng.normal(0, 0.02, 50000), -1, 1)
    from phonotdoa.audio_io import StereoRecording

    rec = StereoRecording(192000, rec_top, rec_bot)
    with pytest.raises(NoEchoError):
        estimate_face_distance(rec, make_beep(192000))
