"""Geometric acoustic simulator: ground-truthed stereo renders of live
speech, playback/replace attacks, and beep-echo ranging scenes.

Every rendered phoneme is a point source placed by the vocal source
model; each microphone channel receives the excitation through an exact
spectral fractional delay of its own travel time, so the ground-truth
delay of a phoneme equals pose_to_tdoa of its effective source position
by construction. Excitations are deliberately simple (harmonic stacks
for voiced sounds, band-limited noise for voiceless ones): the delay
dynamic depends on geometry and bandwidth, not on phonetic realism.

All randomness flows from the integer seed through numpy's PCG64
generator (the default_rng algorithm), so identical parameters give
bit-identical recordings across runs and platforms.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .audio_io import StereoRecording
from .errors import ScenarioError, UnknownPhonemeError
from .geometry import (
    SPEED_OF_SOUND,
    DevicePose,
    make_beep,
    mic_positions,
)
from .phonemes import AFFRICATE, FRICATIVE, GLIDE, STOP
from .segmentation import PhonemeSegment
from .sourcemodel import VocalSourceModel

DEFAULT_SNR_DB = 30.0
LEAD_SILENCE_S = 0.05
PHONEME_GAP_S = 0.03
DURATION_RANGE_S = (0.10, 0.16)
VOICED_F0_RANGE = (105.0, 225.0)
VOICED_MAX_HARMONIC_HZ = 8000.0

# voiceless excitation bands by articulation class
_NOISE_BANDS = {
    FRICATIVE: (1500.0, 9000.0),
    STOP: (500.0, 6500.0),
    AFFRICATE: (1000.0, 8500.0),
    GLIDE: (500.0, 5000.0),
}

MIN_REPLACE_DISTANCE_M = 0.25


class AttackKind(enum.Enum):
    STATIC_PLAYBACK = "static_playback"
    MOBILE_PLAYBACK = "mobile_playback"
    REPLACE = "replace"


@dataclass(frozen=True)
class AttackScenario:
    kind: AttackKind
    source_offset: tuple = (0.0, 0.0)  # loudspeaker position (static)
    trajectory: tuple = ()  # waypoints (mobile)
    recorder_distance_m: float = 0.0  # replace

    def __post_init__(self):
        if self.kind == AttackKind.MOBILE_PLAYBACK:
            if len(self.trajectory) < 2:
                raise ScenarioError("mobile playback needs >= 2 waypoints")
            object.__setattr__(
                self, "trajectory", tuple((float(y), float(z)) for y, z in self.trajectory)
            )
        if self.kind == AttackKind.REPLACE:
            if self.recorder_distance_m < MIN_REPLACE_DISTANCE_M:
                raise ScenarioError(
                    f"replace recorder distance {self.recorder_distance_m} m "
                    f"below {MIN_REPLACE_DISTANCE_M} m"
                )


@dataclass(frozen=True)
class GroundTruthPhoneme:
    label: str
    delay_samples: float
    source_dy: float
    source_dz: float
    start: int
    end: int


@dataclass(frozen=True)
class SimulatedUtterance:
    recording: StereoRecording
    segments: tuple
    ground_truth: tuple

    @property
    def labels(self) -> tuple:
        return tuple(s.label for s in self.segments)

    @property
    def true_delays(self) -> np.ndarray:
        return np.array([g.delay_samples for g in self.ground_truth])


def circle_trajectory(
    radius: float = 0.05,
    turns: float = 1.5,
    n_points: int = 64,
    center=(0.0, 0.0),
    phase: float = 0.0,
) -> tuple:
    """Loudspeaker waypoints circling the mouth region."""
    angles = phase + 2.0 * math.pi * turns * np.arange(n_points) / (n_points - 1)
    return tuple(
        (center[0] + radius * math.cos(a), center[1] + radius * math.sin(a))
        for a in angles
    )


def _next_pow2(n: int) -> int:
    return 1 << int(math.ceil(math.log2(max(n, 2))))


def _harmonic_excitation(rng, n: int, sample_rate: int, f0: float) -> np.ndarray:
    """Voiced source: harmonic stack with seeded phases, built in the
    frequency domain (one inverse transform)."""
    spectrum = np.zeros(n // 2 + 1, dtype=complex)
    fmax = min(VOICED_MAX_HARMONIC_HZ, 0.45 * sample_rate)
    n_harm = max(1, int(fmax / f0))
    for h in range(1, n_harm + 1):
        k = int(round(h * f0 * n / sample_rate))
        if 1 <= k < len(spectrum) - 1:
            phase = rng.uniform(0.0, 2.0 * math.pi)
            spectrum[k] += (1.0 / h) * np.exp(1j * phase)
    return np.fft.irfft(spectrum, n)


def _noise_excitation(rng, n: int, sample_rate: int, band: tuple) -> np.ndarray:
    """Voiceless source: white noise restricted to the class band."""
    white = rng.standard_normal(n)
    spectrum = np.fft.rfft(white)
    freqs = np.fft.rfftfreq(n, 1.0 / sample_rate)
    lo, hi = band[0], min(band[1], 0.45 * sample_rate)
    spectrum[(freqs < lo) | (freqs > hi)] = 0.0
    return np.fft.irfft(spectrum, n)


def _tukey(n: int, alpha: float = 0.15) -> np.ndarray:
    if n < 3:
        return np.ones(n)
    edge = max(1, int(alpha * n / 2))
    win = np.ones(n)
    ramp = 0.5 * (1.0 - np.cos(np.pi * np.arange(edge) / edge))
    win[:edge] = ramp
    win[-edge:] = ramp[::-1]
    return win


def _excitation(rng, src, n: int, sample_rate: int, f0: float) -> np.ndarray:
    if src.voiced:
        sig = _harmonic_excitation(rng, n, sample_rate, f0)
    else:
        band = _NOISE_BANDS.get(src.articulation, (500.0, 8000.0))
        sig = _noise_excitation(rng, n, sample_rate, band)
    sig = sig * _tukey(n)
    rms = math.sqrt(float(np.mean(sig * sig)))
    if rms > 0:
        sig = sig * (0.2 / rms)
    return sig


def _delayed_pair(exc: np.ndarray, tau_top: float, tau_bottom: float) -> tuple:
    """Apply the two per-mic travel times as exact spectral phase shifts.

    Returns (top, bottom, length); both outputs are long enough to hold
    the shifted excitation entirely (no circular wraparound).
    """
    tau_max = max(tau_top, tau_bottom)
    out_len = len(exc) + int(math.ceil(tau_max)) + 64
    pad = _next_pow2(out_len + 16)
    spectrum = np.fft.rfft(exc, pad)
    k = np.arange(len(spectrum))
    top = np.fft.irfft(spectrum * np.exp(-2j * np.pi * k * tau_top / pad), pad)
    bottom = np.fft.irfft(spectrum * np.exp(-2j * np.pi * k * tau_bottom / pad), pad)
    return top[:out_len], bottom[:out_len], out_len


def _render(
    labels,
    positions,
    model: VocalSourceModel,
    pose: DevicePose,
    sample_rate: int,
    rng,
    noise_snr_db: float,
    echo,
    duration_range,
    c: float,
) -> SimulatedUtterance:
    """Shared renderer: one effective source position per phoneme."""
    fs = sample_rate
    gap = int(round(PHONEME_GAP_S * fs))
    lead = int(round(LEAD_SILENCE_S * fs))
    f0 = rng.uniform(*VOICED_F0_RANGE)
    (ty, tz), (by, bz) = mic_positions(pose)

    pieces = []
    segments = []
    truths = []
    cursor = lead
    for label, (dy, dz) in zip(labels, positions):
        src = model.source(label)
        # multiple-of-256 lengths keep the excitation FFTs fast
        n = max(256, 256 * int(round(rng.uniform(*duration_range) * fs / 256)))
        exc = _excitation(rng, src, n, fs, f0)
        d1 = math.hypot(ty - dy, tz - dz)
        d2 = math.hypot(by - dy, bz - dz)
        tau1 = d1 / c * fs
        tau2 = d2 / c * fs
        amp1 = 1.0 / max(d1, 0.01)
        amp2 = 1.0 / max(d2, 0.01)
        top_piece, bottom_piece, piece_len = _delayed_pair(exc, tau1, tau2)
        pieces.append((cursor, top_piece * amp1, bottom_piece * amp2, piece_len))
        segments.append(PhonemeSegment(start=cursor, end=cursor + n, label=label))
        truths.append(
            GroundTruthPhoneme(
                label=label,
                delay_samples=(d1 - d2) / c * fs,
                source_dy=dy,
                source_dz=dz,
                start=cursor,
                end=cursor + n,
            )
        )
        cursor += n + gap

    total = cursor + gap + 256
    for start, _, _, piece_len in pieces:
        total = max(total, start + piece_len)
    top = np.zeros(total)
    bottom = np.zeros(total)
    for start, top_piece, bottom_piece, piece_len in pieces:
        top[start : start + piece_len] += top_piece
        bottom[start : start + piece_len] += bottom_piece

    if echo is not None:
        lag, amp = int(echo[0]), float(echo[1])
        if lag > 0:
            top[lag:] += amp * top[:-lag].copy()
            bottom[lag:] += amp * bottom[:-lag].copy()

    active = np.zeros(total, dtype=bool)
    for seg in segments:
        active[seg.start : seg.end] = True
    for ch in (top, bottom):
        rms = math.sqrt(float(np.mean(ch[active] ** 2))) if active.any() else 0.0
        sigma = rms * 10.0 ** (-noise_snr_db / 20.0)
        ch += rng.normal(0.0, sigma, total) if sigma > 0 else 0.0

    peak = max(float(np.max(np.abs(top))), float(np.max(np.abs(bottom))), 1e-12)
    scale = 0.9 / peak
    return SimulatedUtterance(
        recording=StereoRecording(
            sample_rate=fs, top=top * scale, bottom=bottom * scale
        ),
        segments=tuple(segments),
        ground_truth=tuple(truths),
    )


def synthesize_live(
    labels,
    model: VocalSourceModel,
    pose: DevicePose,
    sample_rate: int = 192000,
    seed: int = 0,
    noise_snr_db: float = DEFAULT_SNR_DB,
    echo=None,
    jitter_scale: float = 1.0,
    duration_range=DURATION_RANGE_S,
    c: float = SPEED_OF_SOUND,
) -> SimulatedUtterance:
    """Render live speech: per-phoneme sources from the vocal model with
    seeded articulation jitter, picked up by both mics at the pose."""
    labels = list(labels)
    for label in labels:
        if label not in model:
            raise UnknownPhonemeError(f"no source model for {label!r}")
    rng = np.random.default_rng(seed)
    positions = []
    for label in labels:
        src = model.source(label)
        jitter = rng.normal(0.0, src.jitter_std * jitter_scale) if jitter_scale > 0 else 0.0
        positions.append(model.effective_source(label, jitter))
    return _render(
        labels, positions, model, pose, sample_rate, rng,
        noise_snr_db, echo, duration_range, c,
    )


def _trajectory_point(trajectory, u: float) -> tuple:
    """Piecewise-linear interpolation along the waypoint list, u in [0, 1]."""
    m = len(trajectory) - 1
    t = u * m
    i = min(int(t), m - 1)
    frac = t - i
    y0, z0 = trajectory[i]
    y1, z1 = trajectory[i + 1]
    return (y0 + frac * (y1 - y0), z0 + frac * (z1 - z0))


def synthesize_attack(
    labels,
    model: VocalSourceModel,
    pose: DevicePose,
    scenario: AttackScenario,
    sample_rate: int = 192000,
    seed: int = 0,
    noise_snr_db: float = DEFAULT_SNR_DB,
    duration_range=DURATION_RANGE_S,
    c: float = SPEED_OF_SOUND,
) -> SimulatedUtterance:
    """Render a replay attack.

    STATIC_PLAYBACK: every phoneme radiates from one fixed loudspeaker
    point, so the delay is near-constant across the utterance.
    MOBILE_PLAYBACK: the loudspeaker follows the waypoint trajectory,
    one position per phoneme.
    REPLACE: the live vocal model rendered with the handset moved back
    to the recorder distance; the delay range collapses with distance.
    """
    labels = list(labels)
    for label in labels:
        if label not in model:
            raise UnknownPhonemeError(f"no source model for {label!r}")
    if scenario.kind == AttackKind.REPLACE:
        far_pose = pose.with_(x=scenario.recorder_distance_m)
        return synthesize_live(
            labels, model, far_pose, sample_rate, seed, noise_snr_db,
            duration_range=duration_range, c=c,
        )
    rng = np.random.default_rng(seed)
    if scenario.kind == AttackKind.STATIC_PLAYBACK:
        positions = [scenario.source_offset] * len(labels)
    elif scenario.kind == AttackKind.MOBILE_PLAYBACK:
        denom = max(len(labels) - 1, 1)
        positions = [
            _trajectory_point(scenario.trajectory, i / denom)
            for i in range(len(labels))
        ]
    else:
        raise ScenarioError(f"unknown attack kind {scenario.kind!r}")
    return _render(
        labels, positions, model, pose, sample_rate, rng,
        noise_snr_db, None, duration_range, c,
    )


def synthesize_beep_scene(
    face_distance_m: float,
    sample_rate: int = 192000,
    seed: int = 0,
    face_amp: float = 0.3,
    clutter_amp: float = 0.12,
    noise_std: float = 0.003,
    c: float = SPEED_OF_SOUND,
) -> StereoRecording:
    """Ranging scene: chirp emission with a strong body-conduction copy
    at time zero, the face echo at 2*distance/c, and one weaker clutter
    echo beyond the face."""
    if not 0.03 <= face_distance_m <= 1.0:
        raise ScenarioError(
            f"face distance {face_distance_m} m outside [0.03, 1.0]"
        )
    fs = sample_rate
    rng = np.random.default_rng(seed)
    beep = make_beep(fs)
    lead = int(round(0.02 * fs))
    tau_face = 2.0 * face_distance_m / c * fs
    tau_clutter = 2.0 * (face_distance_m + 0.30) / c * fs
    total = lead + len(beep) + int(math.ceil(tau_clutter)) + int(round(0.03 * fs))

    pad = _next_pow2(len(beep) + int(math.ceil(tau_clutter)) + 64)
    spectrum = np.fft.rfft(beep, pad)
    k = np.arange(len(spectrum))

    def place(channel, tau, amp):
        shifted = np.fft.irfft(
            spectrum * np.exp(-2j * np.pi * k * tau / pad), pad
        )
        end = min(total, lead + pad)
        channel[lead:end] += amp * shifted[: end - lead]

    bottom = np.zeros(total)
    top = np.zeros(total)
    place(bottom, 0.0, 1.0)
    place(bottom, tau_face, face_amp)
    place(bottom, tau_clutter, clutter_amp)
    place(top, 0.0, 0.7)
    place(top, tau_face, 0.7 * face_amp)
    bottom += rng.normal(0.0, noise_std, total)
    top += rng.normal(0.0, noise_std, total)
    peak = max(float(np.max(np.abs(bottom))), float(np.max(np.abs(top))), 1e-12)
    scale = 0.9 / peak
    return StereoRecording(sample_rate=fs, top=top * scale, bottom=bottom * scale)


def synthesize_pure_shift(
    n: int,
    delay_samples: float,
    snr_db: float,
    seed: int = 0,
    sample_rate: int = 192000,
    band=(100.0, 8000.0),
    echo=None,
) -> tuple:
    """Synthetic estimator benchmark: (bottom, top) windows where the
    top channel is the bottom one delayed by exactly delay_samples, plus
    independent white noise on both at the given SNR.

    echo=(lag, amp) adds a delayed copy of the source to the top channel
    on top of the direct path (multipath stress case).
    """
    rng = np.random.default_rng(seed)
    margin = int(math.ceil(abs(delay_samples))) + (int(echo[0]) if echo else 0) + 64
    clean = _noise_excitation(rng, n + 2 * margin, sample_rate, band)
    rms = math.sqrt(float(np.mean(clean**2)))
    if rms > 0:
        clean = clean / rms

    pad = _next_pow2(len(clean) + margin)
    spectrum = np.fft.rfft(clean, pad)
    k = np.arange(len(spectrum))

    def shifted_by(tau):
        return np.fft.irfft(
            spectrum * np.exp(-2j * np.pi * k * tau / pad), pad
        )[: len(clean)]

    bottom_full = clean.copy()
    top_full = shifted_by(delay_samples)
    if echo is not None:
        top_full = top_full + float(echo[1]) * shifted_by(delay_samples + float(echo[0]))

    sigma = 10.0 ** (-snr_db / 20.0)
    a = bottom_full[margin : margin + n] + rng.normal(0.0, sigma, n)
    b = top_full[margin : margin + n] + rng.normal(0.0, sigma, n)
    return a, b
