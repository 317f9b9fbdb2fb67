import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.io import wavfile
from sklearn.base import clone

from subaoa import (
    MultichannelRecording,
    SnapshotTensor,
    StftConfig,
    StftTransformer,
    load_wav,
    sample_covariance,
    save_wav,
    select_band,
    stft,
)


def _rec(M=2, L=4096, rate=16000.0, rng=None):
    rng = rng or np.random.default_rng(0)
    return MultichannelRecording(rng.standard_normal((M, L)), rate)


def test_load_wav_int16(tmp_path):
    data = np.zeros((1600, 6), dtype=np.int16)
    p = tmp_path / "six.wav"
    wavfile.write(p, 16000, data)
    rec = load_wav(p)
    assert rec.n_channels == 6 and rec.rate == 16000
    assert not rec.samples.any()


def test_load_wav_full_scale_square(tmp_path):
    sq = np.where(np.arange(800) % 40 < 20, 32767, -32768).astype(np.int16)
    p = tmp_path / "sq.wav"
    wavfile.write(p, 8000, np.column_stack([sq, sq]))
    x = load_wav(p).samples
    assert x.max() == pytest.approx(32767 / 32768)
    assert x.max() == pytest.approx(0.999969, abs=1e-6)
    assert x.min() == -1.0


def test_load_wav_errors(tmp_path):
    mono = tmp_path / "mono.wav"
    wavfile.write(mono, 16000, np.zeros(100, dtype=np.int16))
    with pytest.raises(ValueError, match="2 channels"):
        load_wav(mono)
    bad = tmp_path / "bad.wav"
    bad.write_bytes(b"RIFF\x00\x00junkjunkjunk")
    with pytest.raises(ValueError):
        load_wav(bad)
    with pytest.raises(FileNotFoundError):
        load_wav(tmp_path / "missing.wav")


@pytest.mark.parametrize("subtype,tol", [("float32", 1e-7), ("pcm16", 1 / 32768)])
def test_wav_roundtrip(tmp_path, subtype, tol):
    rec = MultichannelRecording(0.5 * np.sin(np.arange(6000) / 7.0)[None, :].repeat(3, 0), 16000)
    p = tmp_path / "x.wav"
    save_wav(rec, p, subtype)
    back = load_wav(p)
    np.testing.assert_allclose(back.samples, rec.samples, atol=tol)


def test_stft_shapes_and_zero_input():
    rec = MultichannelRecording(np.zeros((3, 4096)), 16000)
    t = stft(rec)
    assert t.data.shape == (513, 3, (4096 - 1024) // 512 + 1)
    assert t.n_bins == 513 and t.ambient_dim == 3
    assert not np.any(t.data)


def test_stft_bin_centre_tone():
    n, rate, k = 256, 8000.0, 17
    x = np.cos(2 * np.pi * k * rate / n * np.arange(4 * n) / rate)
    t = stft(MultichannelRecording(np.vstack([x, x]), rate), StftConfig(n, n, "boxcar"))
    energy = np.sum(np.abs(t.data) ** 2, axis=(1, 2))
    others = np.delete(energy, k)
    assert others.max() <= 1e-10 * energy[k]


def test_stft_short_recording():
    with pytest.raises(ValueError):
        stft(MultichannelRecording(np.zeros((2, 1000)), 16000))


def test_stft_parseval_per_frame():
    # one-sided spectrum: DC and Nyquist once, every other bin twice
    rng = np.random.default_rng(3)
    n = 512
    rec = MultichannelRecording(rng.standard_normal((2, 4 * n)), 16000)
    t = stft(rec, StftConfig(n, n, "boxcar"))
    w = np.full(t.n_bins, 2.0)
    w[[0, -1]] = 1.0
    spec_energy = np.einsum("f,fmt->mt", w, np.abs(t.data) ** 2) / n
    frames = rec.samples.reshape(2, 4, n)
    np.testing.assert_allclose(spec_energy, np.sum(frames ** 2, axis=-1), rtol=1e-10)


def test_stft_config_validation():
    with pytest.raises(ValueError):
        StftConfig(1000, 500)
    with pytest.raises(ValueError):
        StftConfig(1024, 2048)
    with pytest.raises(ValueError):
        StftConfig(1024, 0)


def test_select_band_bins():
    t = stft(_rec())
    sel = select_band(t, (300, 4000))
    idx = np.flatnonzero(np.isin(t.freqs, sel.freqs))
    assert idx[0] == 20 and idx[-1] == 256 and idx.size == 237
    assert select_band(t, (0, 8000)).n_bins == t.n_bins
    assert select_band(t, (7990, 8000)).n_bins == 1
    with pytest.raises(ValueError):
        select_band(t, (301, 305))


def test_covariance_examples(rng):
    x = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    R = sample_covariance(x[:, None])
    np.testing.assert_allclose(R, np.outer(x, x.conj()))
    assert np.linalg.matrix_rank(R) == 1
    assert not sample_covariance(np.zeros((3, 5))).any()
    with pytest.raises(ValueError):
        sample_covariance(np.zeros((3, 0)))


def test_covariance_white_noise(rng):
    T = 10000
    X = (rng.standard_normal((4, T)) + 1j * rng.standard_normal((4, T))) / np.sqrt(2)
    R = sample_covariance(X)
    np.testing.assert_allclose(np.diag(R).real, 1.0, atol=0.05)
    off = R[~np.eye(4, dtype=bool)]
    assert np.max(np.abs(off)) < 0.05
    np.testing.assert_allclose(R, R.conj().T)


def test_covariance_batched_matches_loop(rng):
    X = rng.standard_normal((5, 3, 20)) + 1j * rng.standard_normal((5, 3, 20))
    R = sample_covariance(X)
    for f in range(5):
        np.testing.assert_allclose(R[f], X[f] @ X[f].conj().T / 20)


def test_snapshot_tensor_validation():
    with pytest.raises(ValueError):
        SnapshotTensor(np.arange(3.0), np.zeros((2, 2, 2)), 16000)
    with pytest.raises(ValueError):
        SnapshotTensor(np.arange(2.0), np.zeros((2, 2)), 16000)


def test_transformer_params_and_output():
    tr = StftTransformer(window_len=512, hop=256, rate=16000)
    assert clone(tr).get_params()["window_len"] == 512
    out = tr.fit_transform(_rec(3).samples)
    assert isinstance(out, SnapshotTensor)
    assert out.freqs.min() >= 300 and out.freqs.max() <= 4000
    with pytest.raises(ValueError):
        StftTransformer().fit_transform(_rec().samples)  # no rate


@given(seed=st.integers(0, 10 ** 6), D=st.integers(1, 8), T=st.integers(1, 30))
def test_covariance_is_psd(seed, D, T):
    rng = np.random.default_rng(seed)
    X = (rng.standard_normal((D, T)) + 1j * rng.standard_normal((D, T))) * 10 ** rng.uniform(-3, 3)
    R = sample_covariance(X)
    np.testing.assert_array_equal(R, R.conj().T)
    assert np.linalg.eigvalsh(R).min() >= -1e-10 * max(1.0, np.abs(R).max())


@given(seed=st.integers(0, 10 ** 6), a=st.floats(-10, 10), b=st.floats(-10, 10))
def test_stft_is_linear(seed, a, b):
    rng = np.random.default_rng(seed)
    x, y = rng.standard_normal((2, 2, 2048))
    cfg = StftConfig(256, 128)
    lhs = stft(MultichannelRecording(a * x + b * y, 8000), cfg).data
    rhs = a * stft(MultichannelRecording(x, 8000), cfg).data + b * stft(MultichannelRecording(y, 8000), cfg).data
    np.testing.assert_allclose(lhs, rhs, atol=1e-10 * (1 + abs(a) + abs(b)) * 256)


@given(lo=st.floats(0, 3000), width=st.floats(200, 5000), shrink=st.floats(0, 0.45))
def test_nested_band_selection(lo, width, shrink):
    t = stft(_rec())
    hi = min(lo + width, 8000.0)
    inner = (lo + shrink * (hi - lo), hi - shrink * (hi - lo))
    once = select_band(t, inner)
    twice = select_band(select_band(t, (lo, hi)), inner)
    np.testing.assert_array_equal(once.freqs, twice.freqs)
    np.testing.assert_array_equal(once.data, twice.data)
