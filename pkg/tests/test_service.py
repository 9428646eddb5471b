import base64
import io

import pytest
from fastapi.testclient import TestClient

from pvm.audio import read_wav, sine, write_wav
from pvm.labels import Emotion, FeatureCode, Gender
from pvm.service import ServiceState, create_app
from pvm.tts import decode_mock

from conftest import full_library, rigged_set

FEMALE_SAD = FeatureCode(Gender.FEMALE, Emotion.SAD)
SAMPLES = sine(220.0, 0.3).samples.tolist()


@pytest.fixture
def lib(tmp_path):
    return full_library(("fr",), root=tmp_path)


@pytest.fixture
def client(lib):
    return TestClient(create_app(ServiceState(lib, rigged_set(FEMALE_SAD))))


def test_health(client):
    body = client.get("/health").json()
    assert body == {"status": "ok", "models_loaded": True, "languages": ["fr"], "entries": 10, "tts": "mock"}


def test_lookup(client, lib):
    resp = client.get("/library/lookup", params={"language": "fr", "code": "Female-Sad"})
    assert resp.status_code == 200
    assert resp.json()["id"] == lib.lookup("fr", FEMALE_SAD).id
    assert client.get("/library/lookup", params={"language": "de", "code": "Female-Sad"}).status_code == 404
    assert client.get("/library/lookup", params={"language": "fr", "code": "Female-Bored"}).status_code == 422


def test_validate(client):
    body = client.post("/library/validate", json={"languages": ["fr", "de"]}).json()
    assert not body["ok"] and len(body["missing"]["de"]) == 10 and "fr" not in body["missing"]
    assert client.post("/library/validate", json={"languages": ["fr"]}).json()["ok"]


def test_match_inline_and_path(client, lib, tmp_path):
    body = client.post("/match", json={"language": "fr", "samples": SAMPLES, "sample_rate": 22050}).json()
    assert body["code"] == "Female-Sad" and body["emotion_model"] == "female-emotion"
    assert body["preset"]["id"] == lib.lookup("fr", FEMALE_SAD).id
    write_wav(tmp_path / "in.wav", sine(220.0, 0.3))
    by_path = client.post("/match", json={"language": "fr", "audio_path": str(tmp_path / "in.wav")}).json()
    assert by_path["preset"] == body["preset"]


def test_match_errors(client, lib):
    assert client.post("/match", json={"language": "fr"}).status_code == 422
    assert client.post("/match", json={"language": "fr", "samples": SAMPLES}).status_code == 422
    assert client.post("/match", json={"language": "de", "samples": SAMPLES, "sample_rate": 22050}).status_code == 404
    no_models = TestClient(create_app(ServiceState(lib)))
    assert no_models.post("/match", json={"language": "fr", "samples": SAMPLES,
                                          "sample_rate": 22050}).status_code == 503


def test_run(client, lib):
    segments = [{"speaker_tag": t, "samples": SAMPLES, "sample_rate": 22050, "text": f"phrase {i}"}
                for i, t in enumerate("AABBA")]
    body = client.post("/run", json={"language": "fr", "segments": segments, "include_audio": True}).json()
    assert (body["stats"]["aux_runs"], body["stats"]["tts_runs"]) == (3, 5)
    expected = lib.lookup("fr", FEMALE_SAD).id
    for out in body["outputs"]:
        clip = read_wav(io.BytesIO(base64.b64decode(out["wav_base64"])))
        assert decode_mock(clip).preset_id == expected == out["preset_id"]
    baseline = client.post("/run", json={"language": "fr", "mode": "baseline", "segments": segments}).json()
    assert baseline["stats"]["aux_runs"] == 5 and baseline["outputs"][0]["wav_base64"] is None


def test_run_errors(client):
    seg = {"speaker_tag": "A", "samples": SAMPLES, "sample_rate": 22050, "text": "x"}
    assert client.post("/run", json={"language": "fr", "segments": []}).status_code == 422
    assert client.post("/run", json={"language": "de", "segments": [seg]}).status_code == 404
    assert client.post("/run", json={"language": "fr", "mode": "fast", "segments": [seg]}).status_code == 422
