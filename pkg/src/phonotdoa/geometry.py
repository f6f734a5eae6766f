"""Source-to-device geometry: forward delay model, pose transforms, and
ultrasonic face ranging.

Coordinates: origin at the mouth reference point, y pointing
horizontally toward the handset, z pointing up. At tilt angle 0 the
handset is vertical with the top mic at (x, l1) and the bottom mic at
(x, l1 - l); for the canonical pose l = l1 + l2 so the bottom mic sits
at (x, -l2). Tilting by alpha rotates the handset about its top mic, so
the bottom mic moves to (x + l*sin(alpha), l1 - l*cos(alpha)).

A positive delay means the top-mic path is longer (bottom leads), the
same convention the delay estimator uses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.signal import chirp, fftconvolve, find_peaks, hilbert
from scipy.signal.windows import tukey

from .audio_io import StereoRecording
from .errors import InvalidPoseError, NoEchoError, NoSolutionError, UnderdeterminedError

SPEED_OF_SOUND = 340.0  # m/s

# pivot forms for the tilt transform (config key geometry.pivot)
PIVOT_TOP = "top"        # rotated bottom-mic height measured from the top mic
PIVOT_BOTTOM = "bottom"  # ... measured from the bottom mic's own offset
DEFAULT_PIVOT = PIVOT_BOTTOM

SOLVE_BRACKET = (1e-4, 10.0)  # meters
SOLVE_TOL = 1e-6

BEEP_F0 = 18000.0
BEEP_F1 = 23000.0
BEEP_DURATION = 0.050  # 9600 samples at 192 kHz

# echo peak acceptance: height over the correlation noise floor and
# minimum separation between peaks
ECHO_FLOOR_FACTOR = 3.0
ECHO_MIN_SEPARATION_S = 1e-4


@dataclass(frozen=True)
class DevicePose:
    """Mouth-to-handset geometry.

    x: horizontal mouth-to-handset distance (m)
    l1: vertical distance, mouth to top mic (m)
    l2: vertical distance, mouth to bottom mic (m)
    l: handset length, top mic to bottom mic (m)
    alpha: tilt angle in radians, 0 = vertical
    """

    x: float
    l1: float
    l2: float
    l: float
    alpha: float = 0.0

    def __post_init__(self):
        if self.x <= 0:
            raise InvalidPoseError(f"x must be positive, got {self.x}")
        if self.l <= 0:
            raise InvalidPoseError(f"l must be positive, got {self.l}")
        if self.l1 < 0 or self.l2 < 0:
            raise InvalidPoseError("l1 and l2 must be non-negative")
        if not abs(self.alpha) < math.pi / 2:
            raise InvalidPoseError("|alpha| must be below pi/2")

    def with_(self, **kwargs) -> "DevicePose":
        return replace(self, **kwargs)


# pose the simulator's source table is calibrated at: handset held
# vertically 3 cm in front of the mouth, bottom mic 1 cm below it
REFERENCE_POSE = DevicePose(x=0.03, l1=0.14, l2=0.01, l=0.15, alpha=0.0)


def mic_positions(pose: DevicePose) -> tuple:
    """(top, bottom) microphone coordinates in the mouth frame."""
    top = (pose.x, pose.l1)
    bottom = (
        pose.x + pose.l * math.sin(pose.alpha),
        pose.l1 - pose.l * math.cos(pose.alpha),
    )
    return top, bottom


def path_difference(pose: DevicePose, source_offset=(0.0, 0.0)) -> float:
    """d1 - d2 in meters for a source at (dy, dz) off the mouth."""
    dy, dz = source_offset
    (ty, tz), (by, bz) = mic_positions(pose)
    d1 = math.hypot(ty - dy, tz - dz)
    d2 = math.hypot(by - dy, bz - dz)
    return d1 - d2


def pose_to_tdoa(
    pose: DevicePose,
    source_offset=(0.0, 0.0),
    sample_rate: int = 192000,
    c: float = SPEED_OF_SOUND,
) -> float:
    """Forward model: delay in samples for a source near the mouth.

    This is the single forward model shared by the simulator and the
    inverse solvers; positive means the top-mic path is longer.
    """
    return path_difference(pose, source_offset) / c * sample_rate


def solve_source_distance(
    tdoa_samples: float,
    l1: float,
    l2: float,
    sample_rate: int,
    c: float = SPEED_OF_SOUND,
    tol: float = SOLVE_TOL,
) -> float:
    """Invert sqrt(l1^2 + x^2) - sqrt(l2^2 + x^2) = delta_d for x.

    The residual is strictly monotone in x, so bisection on the bracket
    [0.1 mm, 10 m] is unconditionally robust. delta_d comes from the
    delay via delta_d = tdoa * c / sample_rate.
    """
    delta_d = tdoa_samples * c / sample_rate
    if l1 == l2:
        if delta_d == 0.0:
            raise UnderdeterminedError(
                "l1 == l2 with zero delay: every source distance fits"
            )
        raise NoSolutionError(
            "symmetric mics (l1 == l2) admit no nonzero path difference"
        )
    if delta_d == 0.0:
        raise NoSolutionError("zero path difference implies x -> infinity")
    if abs(delta_d) >= abs(l1 - l2):
        raise NoSolutionError(
            f"|delta_d| = {abs(delta_d):.4f} m not below |l1 - l2| = "
            f"{abs(l1 - l2):.4f} m"
        )
    if math.copysign(1.0, delta_d) != math.copysign(1.0, l1 - l2):
        raise NoSolutionError(
            "path-difference sign inconsistent with mic geometry "
            "(source off the solvable axis)"
        )

    def residual(x: float) -> float:
        return math.hypot(l1, x) - math.hypot(l2, x) - delta_d

    lo, hi = SOLVE_BRACKET
    f_lo, f_hi = residual(lo), residual(hi)
    if f_lo == 0.0:
        return lo
    if f_hi == 0.0:
        return hi
    if f_lo * f_hi > 0:
        raise NoSolutionError(
            f"no solution inside [{lo}, {hi}] m for delta_d = {delta_d:.5f}"
        )
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        f_mid = residual(mid)
        if f_mid == 0.0:
            return mid
        if f_lo * f_mid < 0:
            hi = mid
        else:
            lo, f_lo = mid, f_mid
    return 0.5 * (lo + hi)


def _rotated_bottom_height(pose: DevicePose, alpha: float, pivot: str) -> float:
    if pivot == PIVOT_TOP:
        return pose.l1 - pose.l * math.cos(alpha)
    if pivot == PIVOT_BOTTOM:
        return pose.l2 - pose.l * math.cos(alpha)
    raise InvalidPoseError(f"unknown pivot form {pivot!r}")


def transform_tdoa(
    tdoa_samples: float,
    pose: DevicePose,
    alpha: float = None,
    delta_x: float = 0.0,
    sample_rate: int = 192000,
    pivot: str = DEFAULT_PIVOT,
    c: float = SPEED_OF_SOUND,
) -> float:
    """Predict the delay after moving the handset back by delta_x and
    tilting it by alpha, keeping the source fixed.

    Solves the enrolled delay for the source distance x, then evaluates
    the forward model at x + delta_x. alpha=None means no rotation was
    requested: the bottom mic stays at its own vertical offset and the
    pivot convention never enters. When a rotation is requested (alpha
    given, including 0.0), the rotated bottom-mic height follows the
    pivot form: "top" is self-consistent with pose_to_tdoa and reduces
    to identity at alpha = 0; "bottom" measures the rotated height from
    the bottom mic's own offset instead, which is kept because some
    derivations state it that way, but it does not reduce to identity
    (the simulator cross-check shows the mismatch).
    """
    x = solve_source_distance(tdoa_samples, pose.l1, pose.l2, sample_rate, c=c)
    if alpha is None and delta_x == 0.0:
        return tdoa_samples  # no pose change (solve above validated the input)
    x2 = x + delta_x
    if x2 <= 0:
        raise InvalidPoseError(f"x + delta_x = {x2:.4f} m must stay positive")
    if alpha is None:
        bz = -pose.l2
        sin_alpha = 0.0
    else:
        bz = _rotated_bottom_height(pose, alpha, pivot)
        sin_alpha = math.sin(alpha)
    by = x2 + pose.l * sin_alpha
    d1 = math.hypot(pose.l1, x2)
    d2 = math.hypot(by, bz)
    diff = d1 - d2
    # triangle inequality against the implied mic separation
    mic_sep = math.hypot(by - x2, pose.l1 - bz)
    assert abs(diff) <= mic_sep + 1e-9
    return diff / c * sample_rate


def transform_tdoa_for_angle(
    tdoa_samples: float,
    pose: DevicePose,
    alpha: float,
    sample_rate: int = 192000,
    pivot: str = DEFAULT_PIVOT,
    c: float = SPEED_OF_SOUND,
) -> float:
    """Delay after tilting the handset by alpha at unchanged distance."""
    return transform_tdoa(
        tdoa_samples, pose, alpha=alpha, delta_x=0.0,
        sample_rate=sample_rate, pivot=pivot, c=c,
    )


def transform_tdoa_for_distance(
    tdoa_samples: float,
    pose: DevicePose,
    delta_x: float,
    sample_rate: int = 192000,
    c: float = SPEED_OF_SOUND,
) -> float:
    """Delay after moving the handset delta_x farther (vertical pose)."""
    return transform_tdoa(
        tdoa_samples, pose, alpha=None, delta_x=delta_x,
        sample_rate=sample_rate, c=c,
    )


def make_beep(
    sample_rate: int,
    f0: float = BEEP_F0,
    f1: float = BEEP_F1,
    duration: float = BEEP_DURATION,
) -> np.ndarray:
    """Inaudible linear ranging chirp (18-23 kHz, 50 ms by default)."""
    if sample_rate < 2 * f1:
        raise InvalidPoseError(
            f"sample rate {sample_rate} cannot represent a {f1:.0f} Hz chirp"
        )
    n = int(round(duration * sample_rate))
    t = np.arange(n) / sample_rate
    sweep = chirp(t, f0=f0, f1=f1, t1=duration, method="linear")
    return sweep * tukey(n, 0.1)


def estimate_face_distance(
    echo_recording: StereoRecording,
    beep: np.ndarray,
    c: float = SPEED_OF_SOUND,
) -> float:
    """Round-trip range to the face from a beep-echo recording.

    Matched-filters the bottom channel against the beep; the first
    correlation peak is the body-conduction copy of the emission (time
    zero), the second is the face reflection. Peaks must exceed three
    times the correlation noise floor and be separated by at least
    0.1 ms. Distance is (t2 - t1) * c / 2.

    The chirp bandwidth bounds the resolution: reflectors closer than
    roughly c / (2 * bandwidth) (~7 cm for the default 5 kHz sweep with
    the tapered filter) merge into the emission peak, and the next
    reflector in the scene gets ranged instead.
    """
    fs = echo_recording.sample_rate
    x = echo_recording.bottom
    if len(x) <= len(beep):
        raise NoEchoError("recording shorter than the beep template")
    # Hann-weighted template: a plain chirp matched filter has -13 dB
    # range sidelobes that masquerade as echoes; the taper buys clean
    # peaks at the cost of a slightly wider main lobe.
    template = np.asarray(beep, dtype=np.float64) * np.hanning(len(beep))
    corr = fftconvolve(x, template[::-1], mode="valid")
    # analytic envelope: |corr| ripples at the chirp center frequency,
    # and every ripple inside an arrival's main lobe would count as a
    # separate peak otherwise
    env = np.abs(hilbert(corr))
    # noise floor = 95th percentile of the envelope: echo peaks occupy
    # far less than 5 percent of the trace, so this tracks the noise
    # level while staying above nearly all of its excursions
    floor = float(np.percentile(env, 95))
    min_sep = max(1, int(round(ECHO_MIN_SEPARATION_S * fs)))
    peaks, _ = find_peaks(
        env,
        height=ECHO_FLOOR_FACTOR * floor,
        distance=min_sep,
        prominence=0.05 * float(env.max()),
    )
    if len(peaks) < 2:
        raise NoEchoError(
            f"found {len(peaks)} qualifying correlation peaks, need 2"
        )
    t1, t2 = peaks[0], peaks[1]
    return (t2 - t1) / fs * c / 2.0
