import hashlib
import io
import sys

import numpy as np
import pytest

from pvm.audio import AudioError, read_wav, sine, write_wav
from pvm.labels import Emotion, FeatureCode, Gender
from pvm.tts import (
    ExternalFailure,
    ExternalOutputError,
    ExternalTimeout,
    ExternalTts,
    MockTts,
    decode_mock,
    mock_tone,
    render_command,
    synthesize_external,
    synthesize_mock,
    text_hash,
    tone_frequency,
)

from conftest import make_entry

CODE = FeatureCode(Gender.FEMALE, Emotion.SAD)


@pytest.fixture
def preset():
    return make_entry("fr_f_sad_0", "fr", CODE)


def test_mock_round_trip(preset):
    payload = decode_mock(synthesize_mock(preset, "Bonjour tout le monde", "fr"))
    assert payload.preset_id == "fr_f_sad_0"
    assert payload.text_hash == hashlib.sha256("Bonjour tout le monde".encode()).hexdigest()[:16]
    assert payload.language == "fr"


def test_mock_is_bit_identical(preset):
    a = synthesize_mock(preset, "salut", "fr")
    b = synthesize_mock(preset, "salut", "fr")
    assert a.samples.tobytes() == b.samples.tobytes() and a.sample_rate == b.sample_rate


def test_mock_tone_frequency_from_hash():
    p, q = make_entry("cafe_f1_ang", "fr", CODE), make_entry("emodb_m3_dis", "de", CODE)
    fp = 200 + int(hashlib.sha256(b"cafe_f1_ang").hexdigest()[:8], 16) % 601
    fq = 200 + int(hashlib.sha256(b"emodb_m3_dis").hexdigest()[:8], 16) % 601
    assert fp != fq
    assert (tone_frequency(p.id), tone_frequency(q.id)) == (fp, fq)
    for entry, freq in ((p, fp), (q, fq)):
        tone = mock_tone(synthesize_mock(entry, "some text here", "fr"))
        spectrum = np.abs(np.fft.rfft(tone))
        peak = np.argmax(spectrum) * 22050 / tone.size
        assert peak == pytest.approx(freq, abs=2.0)


def test_mock_header_survives_16bit_wav(preset):
    clip = synthesize_mock(preset, "hello", "fr")
    buf = io.BytesIO()
    write_wav(buf, clip)
    buf.seek(0)
    assert decode_mock(read_wav(buf)).preset_id == preset.id


def test_mock_rejects_plain_audio_and_empty_text(preset):
    with pytest.raises(AudioError):
        decode_mock(sine(440.0, 0.1))
    with pytest.raises(ValueError):
        synthesize_mock(preset, "", "fr")


def test_text_hash_distinguishes_texts():
    assert text_hash("a") != text_hash("b") and len(text_hash("a")) == 16


def test_render_command_keeps_arguments_whole():
    argv = render_command("tts --text {text} -o {out}", {"text": "it's a 'quoted' text", "out": "/tmp/o.wav"})
    assert argv == ["tts", "--text", "it's a 'quoted' text", "-o", "/tmp/o.wav"]


# ---------------------------------------------------------------- external


def test_external_identity_stub(tmp_path, preset):
    src = tmp_path / "preset.wav"
    original = sine(330.0, 0.2)
    write_wav(src, original)
    clip = synthesize_external("cp {preset_audio} {out}", preset, "bonjour", "fr", timeout=10, preset_audio=src)
    assert np.array_equal(clip.samples, read_wav(src).samples)


def test_external_backend_resolves_audio(tmp_path, preset):
    write_wav(tmp_path / preset.audio_path, sine(330.0, 0.2))
    backend = ExternalTts("cp {preset_audio} {out}", timeout=10, resolve_audio=lambda e: tmp_path / e.audio_path)
    assert len(backend.synthesize(preset, "x", "fr")) == 4410


def test_external_failure_captures_output(preset):
    cmd = f"{sys.executable} -c \"import sys; print('boom', file=sys.stderr); sys.exit(3)\""
    with pytest.raises(ExternalFailure) as err:
        synthesize_external(cmd, preset, "x", "fr", timeout=10)
    assert err.value.returncode == 3 and "boom" in err.value.stderr


def test_external_missing_program(preset):
    with pytest.raises(ExternalFailure):
        synthesize_external("/nonexistent/tts-binary {out}", preset, "x", "fr", timeout=10)


def test_external_timeout(preset):
    with pytest.raises(ExternalTimeout) as err:
        synthesize_external("sleep 5", preset, "x", "fr", timeout=0.3)
    assert err.value.timeout == 0.3


def test_external_no_output(preset):
    with pytest.raises(ExternalOutputError):
        synthesize_external("true {out}", preset, "x", "fr", timeout=10)


def test_external_garbage_output(preset):
    cmd = f"{sys.executable} -c \"import sys; open(sys.argv[1], 'w').write('nope')\" {{out}}"
    with pytest.raises(ExternalOutputError):
        synthesize_external(cmd, preset, "x", "fr", timeout=10)


def test_error_kinds_are_distinct():
    assert len({ExternalFailure, ExternalTimeout, ExternalOutputError}) == 3
    assert not issubclass(ExternalTimeout, ExternalFailure)
    assert MockTts.parallel_safe and not ExternalTts("true").parallel_safe
