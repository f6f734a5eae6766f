import numpy as np
import pytest

from phonotdoa.audio_io import StereoRecording
from phonotdoa.sourcemodel import load_source_model


@pytest.fixture(scope="session")
def source_model():
    return load_source_model()


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)


def make_recording(top, bottom, sample_rate=192000):
    return StereoRecording(sample_rate=sample_rate, top=top, bottom=bottom)


@pytest.fixture()
def tone_recording():
    """250 ms recording with identical 1 kHz tone on both channels."""
    fs = 192000
    t = np.arange(int(0.25 * fs)) / fs
    tone = 0.5 * np.sin(2 * np.pi * 1000.0 * t)
    return make_recording(tone, tone.copy(), fs)
