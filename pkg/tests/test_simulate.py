import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from subaoa import (
    PathSpec,
    Room,
    Scenario,
    chirp_ground_truth,
    circular_array,
    image_source_paths,
    linear_chirp,
    speech_like_source,
    synthesize,
    uniform_linear_array,
)
from subaoa.frontend import MultichannelRecording, save_wav
from subaoa.metrics import match_and_score
from subaoa.simulate import source_signal, white_source, write_truth

C = 343.0


def lag1(x):
    x = x - x.mean()
    return float(np.dot(x[:-1], x[1:]) / np.dot(x, x))


def test_two_mic_delay():
    d, rate = 0.1, 16000
    arr = uniform_linear_array(2, d)
    rec = synthesize(Scenario([PathSpec(0.0, 0.0, 1.0)], "white", 1.0, rate, None, 1), arr)
    tdoa = d / C
    assert tdoa == pytest.approx(2.915e-4, abs=1e-7)
    x0, x1 = rec.samples
    xc = np.correlate(x1, x0, "full")
    lag = int(np.argmax(xc)) - (x0.size - 1)
    assert lag == round(rate * tdoa)
    # channel 2 is channel 1 shifted by exactly tdoa (compare in the frequency domain)
    n = x0.size
    f = np.fft.rfftfreq(n, 1 / rate)
    X0, X1 = np.fft.rfft(x0), np.fft.rfft(x1)
    mid = slice(n // 20, n // 2 - n // 20)
    ratio = X1[mid] / X0[mid]
    phase = np.angle(ratio * np.exp(2j * np.pi * f[mid] * tdoa))
    assert np.median(np.abs(phase)) < 0.05


def test_zero_gain_is_pure_noise():
    arr = circular_array(4, 0.05)
    sc = Scenario([PathSpec(10.0, 0.001, 0.0)], "white", 2.0, 16000, 10.0, 3)
    y = synthesize(sc, arr).samples
    # source power is the reference when the signal is silent
    s = source_signal(sc, np.random.default_rng(np.random.SeedSequence(3).spawn(2)[0]))
    expected = np.mean(s ** 2) / 10.0
    assert np.var(y) == pytest.approx(expected, rel=0.02)
    assert abs(np.mean(y)) < 0.01
    assert abs(lag1(y[0])) < 0.02


@pytest.mark.parametrize("snr", [0.0, 10.0, 25.0])
def test_measured_snr(snr):
    arr = circular_array(6, 0.05)
    paths = [PathSpec(30.0, 0.002, 1.0), PathSpec(200.0, 0.006, 0.5)]
    clean = synthesize(Scenario(paths, "speech_like", 2.0, 16000, None, 7), arr).samples
    noisy = synthesize(Scenario(paths, "speech_like", 2.0, 16000, snr, 7), arr).samples
    p_sig = np.mean(clean ** 2)
    p_noise = np.mean((noisy - clean) ** 2)
    assert 10 * np.log10(p_sig / p_noise) == pytest.approx(snr, abs=0.5)


def test_energy_accounting_white():
    arr = circular_array(6, 0.05)
    gains = [1.0, 0.6, 0.3]
    paths = [PathSpec(0.0, 0.002, gains[0]), PathSpec(120.0, 0.007, gains[1]),
             PathSpec(250.0, 0.013, gains[2])]
    sc = Scenario(paths, "white", 2.0, 16000, None, 11)
    y = synthesize(sc, arr).samples
    src = white_source(2.0, 16000, np.random.default_rng(np.random.SeedSequence(11).spawn(2)[0]))
    assert np.mean(y ** 2) == pytest.approx(np.sum(np.square(gains)) * np.mean(src ** 2), rel=0.05)


def test_delay_beyond_duration():
    arr = circular_array(4, 0.05)
    with pytest.raises(ValueError):
        synthesize(Scenario([PathSpec(0.0, 0.1), PathSpec(10.0, 1.5)], "white", 1.0, 16000), arr)


def test_scenario_validation():
    with pytest.raises(ValueError):
        Scenario([])
    with pytest.raises(ValueError):
        Scenario([PathSpec(0.0, 0.01), PathSpec(5.0, 0.001)])
    with pytest.raises(ValueError):
        Scenario([PathSpec(0.0, 0.0)], source="pink")
    with pytest.raises(ValueError):
        Scenario([PathSpec(0.0, 0.0)], duration=0.01)
    with pytest.raises(ValueError):
        PathSpec(0.0, -1.0)


def test_scenario_dict_roundtrip():
    sc = Scenario([PathSpec(10.0, 0.001, 1.0), PathSpec(99.0, 0.004, 0.3)], "speech_like", 1.5, 8000, 5.0, 42)
    assert Scenario.from_dict(json.loads(json.dumps(sc.to_dict()))) == sc


def test_synthesis_is_seeded():
    arr = circular_array(3, 0.05)
    sc = Scenario([PathSpec(10.0, 0.001)], "speech_like", 1.0, 16000, 5.0, 9)
    np.testing.assert_array_equal(synthesize(sc, arr).samples, synthesize(sc, arr).samples)


def test_image_source_direct_only():
    room = Room(6, 6, (2.0, 3.0), (3.0, 3.0), 0.7, max_order=0)
    (p,) = image_source_paths(room)
    assert p.delay == pytest.approx(1 / C)
    assert p.gain == pytest.approx(1.0)
    assert p.aoa == pytest.approx(180.0)


def test_image_source_supplemental_room():
    room = Room(5, 5, (2.0, 2.0), (1.0, 2.0), 0.7, max_order=1)
    paths = image_source_paths(room)
    assert paths[0].aoa == pytest.approx(0.0)
    assert paths[0].delay == pytest.approx(1 / C)
    # mirror in the x = 0 wall sits at (-2, 2), 3 m behind the array
    assert paths[1].aoa == pytest.approx(180.0)
    assert paths[1].delay == pytest.approx(3 / C)
    assert paths[1].gain == pytest.approx(0.7 / 3)
    assert len(paths) == 5
    assert all(a.delay <= b.delay for a, b in zip(paths, paths[1:]))


def test_image_order_increases_delay_per_wall():
    beta = 0.6
    room = Room(4, 3, (1.0, 1.2), (2.5, 2.0), beta, max_order=2)
    paths = image_source_paths(room)
    assert len(paths) == 13
    assert paths[0].gain == pytest.approx(1 / np.hypot(1.5, 0.8))
    rows = []
    for p in paths:
        dist = p.delay * C
        x = room.array_pos[0] + dist * np.cos(np.deg2rad(p.aoa))
        y = room.array_pos[1] + dist * np.sin(np.deg2rad(p.aoa))
        order = int(round(np.log(p.gain * dist) / np.log(beta)))
        rows.append((x, y, order, p.delay))
    # images mirrored only along x, on either side of the array
    for side in (-1, 1):
        line = sorted((o, d) for x, y, o, d in rows
                      if np.isclose(y, room.source_pos[1]) and o > 0
                      and np.sign(x - room.array_pos[0]) == side)
        assert [o for o, _ in line] == [1, 2]
        assert line[0][1] < line[1][1]


def test_room_validation():
    with pytest.raises(ValueError):
        Room(5, 5, (6.0, 1.0), (1.0, 1.0))
    with pytest.raises(ValueError):
        Room(5, 5, (1.0, 1.0), (1.0, 1.0), max_order=3)
    with pytest.raises(ValueError):
        image_source_paths(Room(5, 5, (1.0, 1.0), (1.0, 1.0)))


@given(seed=st.integers(0, 10 ** 6))
def test_speech_like_autocorrelation(seed):
    x = speech_like_source(1.0, 16000, seed)
    assert lag1(x) >= 0.9
    assert np.sqrt(np.mean(x ** 2)) == pytest.approx(1.0)
    np.testing.assert_array_equal(x, speech_like_source(1.0, 16000, seed))


@given(seed=st.integers(0, 10 ** 6))
def test_white_is_uncorrelated(seed):
    assert abs(lag1(white_source(1.0, 16000, seed))) <= 0.05


def test_linear_chirp_shape():
    c = linear_chirp(0.5, 16000, 0.0, 8000.0)
    assert c.size == 8000
    assert c[0] == 0.0 and abs(c[-1]) < 1e-3
    assert np.max(np.abs(c)) <= 1.0


def _chirp_rec(paths, snr=None, seed=0, array=None):
    array = array or circular_array(6, 0.05)
    sc = Scenario(paths, "chirp", 1.0, 16000, snr, seed)
    rec = synthesize(sc, array)
    chirp = source_signal(sc)[: 8000]
    return rec, chirp, array


def test_chirp_truth_two_paths():
    rec, chirp, arr = _chirp_rec([PathSpec(20.0, 0.003, 1.0), PathSpec(140.0, 0.011, 0.6)])
    gt = chirp_ground_truth(rec, chirp, arr)
    errs = [e for _, _, e in match_and_score([20.0, 140.0], [a for a, _ in gt])]
    assert max(errs) <= 2.0


def test_chirp_truth_single_path_delay():
    rec, chirp, arr = _chirp_rec([PathSpec(250.0, 0.0042, 1.0)])
    gt = chirp_ground_truth(rec, chirp, arr)
    assert len(gt) == 1
    assert abs(gt[0][0] - 250.0) <= 1.0
    assert abs(gt[0][1] - 0.0042) <= 1 / 16000


def test_chirp_truth_noisy():
    for seed in range(3):
        rec, chirp, arr = _chirp_rec([PathSpec(20.0, 0.003, 1.0), PathSpec(140.0, 0.011, 0.6)], 10.0, seed)
        gt = chirp_ground_truth(rec, chirp, arr)
        errs = [e for _, _, e in match_and_score([20.0, 140.0], [a for a, _ in gt])]
        assert max(errs) <= 5.0


def test_chirp_truth_errors():
    arr = circular_array(4, 0.05)
    silent = MultichannelRecording(np.zeros((4, 4000)), 16000)
    with pytest.raises(ValueError):
        chirp_ground_truth(silent, linear_chirp(0.1, 16000), arr)
    with pytest.raises(ValueError):
        chirp_ground_truth(silent, linear_chirp(0.5, 16000), arr)


def test_wav_source_and_truth_file(tmp_path):
    arr = circular_array(4, 0.05)
    tone = np.sin(2 * np.pi * 440 * np.arange(16000) / 16000)
    save_wav(MultichannelRecording(np.vstack([tone, tone]), 16000), tmp_path / "src.wav")
    sc = Scenario([PathSpec(45.0, 0.002)], f"wav:{tmp_path / 'src.wav'}", 1.0, 16000)
    rec = synthesize(sc, arr)
    assert rec.samples.shape == (4, 16000)
    write_truth(sc, arr, tmp_path / "t.json")
    doc = json.loads((tmp_path / "t.json").read_text())
    assert doc["aoa_deg"] == [45.0]
    assert doc["scenario"]["source"].startswith("wav:")
