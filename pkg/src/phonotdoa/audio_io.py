"""Two-channel PCM WAV reading and writing.

Channel convention is fixed across the whole toolkit: channel 0 is the
top microphone, channel 1 is the bottom microphone. Nothing downstream
ever swaps them implicitly; delay signs depend on it.
"""

from __future__ import annotations

import wave
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import (
    ChannelCountError,
    CorruptFileError,
    FormatError,
    InvalidRecordingError,
    IoError,
)

# Rates with a documented per-sample ranging resolution (7.08 / 3.54 /
# 1.77 mm at 340 m/s). Other rates >= 44.1 kHz work but warn.
PREFERRED_RATES = (48000, 96000, 192000)

_SUPPORTED_WIDTHS = {2: 16, 3: 24, 4: 32}


@dataclass(frozen=True, eq=False)
class StereoRecording:
    """Synchronized top/bottom microphone sample streams.

    Samples are float64 in [-1, 1]; both channels have equal length.
    """

    sample_rate: int
    top: np.ndarray
    bottom: np.ndarray

    def __post_init__(self):
        top = np.asarray(self.top, dtype=np.float64)
        bottom = np.asarray(self.bottom, dtype=np.float64)
        object.__setattr__(self, "top", top)
        object.__setattr__(self, "bottom", bottom)
        if top.ndim != 1 or bottom.ndim != 1:
            raise InvalidRecordingError("channels must be 1-D sample arrays")
        if len(top) != len(bottom):
            raise InvalidRecordingError(
                f"channel lengths differ: top={len(top)} bottom={len(bottom)}"
            )
        if self.sample_rate < 44100:
            raise InvalidRecordingError(
                f"sample rate {self.sample_rate} below 44100 Hz minimum"
            )
        if len(top) and (
            max(np.max(np.abs(top)), np.max(np.abs(bottom))) > 1.0 + 1e-9
        ):
            raise InvalidRecordingError("samples exceed [-1, 1]")
        if self.sample_rate not in PREFERRED_RATES:
            warnings.warn(
                f"sample rate {self.sample_rate} Hz is accepted but ranging "
                f"resolution is only specified for {PREFERRED_RATES}",
                stacklevel=3,
            )

    @property
    def n_samples(self) -> int:
        return len(self.top)

    @property
    def duration(self) -> float:
        return self.n_samples / self.sample_rate


def _decode_pcm(raw: bytes, sampwidth: int) -> np.ndarray:
    if sampwidth == 2:
        return np.frombuffer(raw, dtype="<i2").astype(np.int64)
    if sampwidth == 4:
        return np.frombuffer(raw, dtype="<i4").astype(np.int64)
    # 24-bit: assemble little-endian triplets with sign extension
    b = np.frombuffer(raw, dtype=np.uint8).reshape(-1, 3).astype(np.int64)
    val = b[:, 0] | (b[:, 1] << 8) | (b[:, 2] << 16)
    return np.where(val & 0x800000, val - 0x1000000, val)


def _encode_pcm(q: np.ndarray, sampwidth: int) -> bytes:
    if sampwidth == 2:
        return q.astype("<i2").tobytes()
    if sampwidth == 4:
        return q.astype("<i4").tobytes()
    u = np.where(q < 0, q + 0x1000000, q).astype(np.int64)
    out = np.empty((len(u), 3), dtype=np.uint8)
    out[:, 0] = u & 0xFF
    out[:, 1] = (u >> 8) & 0xFF
    out[:, 2] = (u >> 16) & 0xFF
    return out.tobytes()


def load_wav(path) -> StereoRecording:
    """Load a 2-channel 16/24/32-bit PCM WAV file.

    Channel 0 maps to the top mic, channel 1 to the bottom mic; samples
    are normalized by 2^(bits-1), so int16 32767 becomes 32767/32768.
    """
    try:
        with wave.open(str(path), "rb") as w:
            n_channels = w.getnchannels()
            sampwidth = w.getsampwidth()
            rate = w.getframerate()
            n_frames = w.getnframes()
            raw = w.readframes(n_frames)
    except FileNotFoundError:
        raise
    except wave.Error as exc:
        msg = str(exc).lower()
        if "format" in msg or "compress" in msg or "unknown" in msg:
            raise FormatError(f"{path}: {exc}") from exc
        raise CorruptFileError(f"{path}: {exc}") from exc
    except EOFError as exc:
        raise CorruptFileError(f"{path}: truncated header") from exc

    if n_channels != 2:
        raise ChannelCountError(
            f"{path}: expected 2 channels, found {n_channels}"
        )
    if sampwidth not in _SUPPORTED_WIDTHS:
        raise FormatError(
            f"{path}: unsupported sample width {8 * sampwidth} bits"
        )
    if len(raw) < n_frames * n_channels * sampwidth:
        raise CorruptFileError(
            f"{path}: data chunk shorter than header declares"
        )

    samples = _decode_pcm(raw, sampwidth)
    bits = _SUPPORTED_WIDTHS[sampwidth]
    scale = float(2 ** (bits - 1))
    interleaved = samples.reshape(-1, 2).astype(np.float64) / scale
    return StereoRecording(
        sample_rate=rate, top=interleaved[:, 0], bottom=interleaved[:, 1]
    )


def write_wav(recording: StereoRecording, path, bit_depth: int = 16) -> None:
    """Write a StereoRecording as interleaved PCM WAV.

    Round trip through load_wav reproduces every sample within one
    quantization step (2^(1-bit_depth)).
    """
    if bit_depth not in (16, 24, 32):
        raise FormatError(f"unsupported bit depth {bit_depth}")
    scale = 2 ** (bit_depth - 1)
    lo, hi = -scale, scale - 1
    interleaved = np.empty(recording.n_samples * 2, dtype=np.float64)
    interleaved[0::2] = recording.top
    interleaved[1::2] = recording.bottom
    q = np.clip(np.round(interleaved * scale), lo, hi).astype(np.int64)
    try:
        with wave.open(str(path), "wb") as w:
            w.setnchannels(2)
            w.setsampwidth(bit_depth // 8)
            w.setframerate(recording.sample_rate)
            w.writeframes(_encode_pcm(q, bit_depth // 8))
    except OSError as exc:
        raise IoError(f"{path}: {exc}") from exc
