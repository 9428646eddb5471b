import itertools
import json
import warnings

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pvm.labels import ALL_CODES, Emotion, FeatureCode, Gender
from pvm.library import (
    DanglingAudioWarning,
    DuplicateEntry,
    InvalidEntry,
    ManifestError,
    MissingPreset,
    PresetLibrary,
    RevokedEntryWarning,
    UnknownLanguage,
)

from conftest import full_library, make_entry

FEMALE_ANGRY = FeatureCode(Gender.FEMALE, Emotion.ANGRY)
MALE_DISGUST = FeatureCode(Gender.MALE, Emotion.DISGUST)


def test_add_to_empty():
    lib = PresetLibrary().add_entry(make_entry("cafe_f1_ang", "fr", FEMALE_ANGRY))
    assert len(lib) == 1
    assert lib.index == {("fr", FEMALE_ANGRY): ("cafe_f1_ang",)}


def test_add_leaves_original_unchanged():
    empty = PresetLibrary()
    empty.add_entry(make_entry("a", "fr", FEMALE_ANGRY))
    assert len(empty) == 0


def test_duplicate_id_rejected():
    lib = PresetLibrary([make_entry("a", "fr", FEMALE_ANGRY)])
    with pytest.raises(DuplicateEntry):
        lib.add_entry(make_entry("a", "de", MALE_DISGUST))
    assert len(lib) == 1 and lib.index == {("fr", FEMALE_ANGRY): ("a",)}


def test_revoked_entry_stored_but_never_returned():
    lib = PresetLibrary([make_entry("good", "fr", FEMALE_ANGRY, score=1.0)])
    with pytest.warns(RevokedEntryWarning):
        lib = lib.add_entry(make_entry("best", "fr", FEMALE_ANGRY, score=5.0, revoked=True))
    assert "best" in lib
    assert lib.lookup("fr", FEMALE_ANGRY).id == "good"


@pytest.mark.parametrize("kwargs", [
    {"entry_id": ""},
    {"language": "FR"},
    {"language": "fra"},
    {"score": 5.5},
    {"score": -0.1},
])
def test_malformed_entries(kwargs):
    args = {"entry_id": "x", "language": "fr", "code": FEMALE_ANGRY, **kwargs}
    with pytest.raises(InvalidEntry):
        PresetLibrary().add_entry(make_entry(args.pop("entry_id"), args.pop("language"), args.pop("code"), **args))


def test_bad_consent_date():
    from dataclasses import replace

    entry = make_entry("x", "fr", FEMALE_ANGRY)
    with pytest.raises(InvalidEntry):
        PresetLibrary([replace(entry, consent=replace(entry.consent, consent_date="yesterday"))])
    with pytest.raises(InvalidEntry):
        PresetLibrary([replace(entry, consent=replace(entry.consent, speaker_id=""))])


# ---------------------------------------------------------------- lookup


def test_lookup_single_candidate():
    lib = PresetLibrary([make_entry("cafe_f1_ang", "fr", FEMALE_ANGRY)])
    assert lib.lookup("fr", FEMALE_ANGRY).id == "cafe_f1_ang"


def test_lookup_tie_breaks_on_id():
    lib = PresetLibrary([make_entry("b", "fr", FEMALE_ANGRY, 4.0), make_entry("a", "fr", FEMALE_ANGRY, 4.0)])
    assert lib.lookup("fr", FEMALE_ANGRY).id == "a"


def test_lookup_prefers_quality_then_scored():
    lib = PresetLibrary([
        make_entry("a", "fr", FEMALE_ANGRY, None),
        make_entry("b", "fr", FEMALE_ANGRY, 2.0),
        make_entry("c", "fr", FEMALE_ANGRY, 4.5),
    ])
    assert lib.lookup("fr", FEMALE_ANGRY).id == "c"
    assert PresetLibrary([make_entry("a", "fr", FEMALE_ANGRY, None),
                          make_entry("z", "fr", FEMALE_ANGRY, 0.0)]).lookup("fr", FEMALE_ANGRY).id == "z"


def test_lookup_errors():
    lib = full_library(("fr",)).add_entry(make_entry("de_one", "de", FEMALE_ANGRY))
    with pytest.raises(MissingPreset) as err:
        lib.lookup("de", MALE_DISGUST)
    assert err.value.language == "de" and err.value.code == MALE_DISGUST
    with pytest.raises(UnknownLanguage):
        lib.lookup("es", MALE_DISGUST)


def test_lookup_all_revoked_cell():
    lib = full_library(("fr",))
    (victim,) = lib.cell("fr", FEMALE_ANGRY)
    with pytest.raises(MissingPreset):
        lib.revoke(victim.id).lookup("fr", FEMALE_ANGRY)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.sampled_from(["fr", "de"]), st.integers(0, 9), st.booleans(),
                          st.one_of(st.none(), st.floats(0, 5))), max_size=40))
def test_lookup_laws(rows):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RevokedEntryWarning)
        lib = PresetLibrary(make_entry(f"e{i:02d}", lang, ALL_CODES[c], score, revoked)
                            for i, (lang, c, revoked, score) in enumerate(rows))
    for lang, code in itertools.product(sorted(lib.languages), ALL_CODES):
        live = [e for e in lib.cell(lang, code) if not e.consent.revoked]
        if not live:
            with pytest.raises(MissingPreset):
                lib.lookup(lang, code)
            continue
        got = lib.lookup(lang, code)
        assert not got.consent.revoked
        assert got.id == lib.lookup(lang, code).id
        # brute force: nobody outranks the winner
        for e in live:
            s_got = -1 if got.quality_score is None else got.quality_score
            s_e = -1 if e.quality_score is None else e.quality_score
            assert s_got > s_e or (s_got == s_e and got.id <= e.id)
    for key, ids in lib.index.items():
        assert all(lib.get(i).language == key[0] and lib.get(i).code == key[1] for i in ids)
    assert sum(len(v) for v in lib.index.values()) == len(lib)


# ---------------------------------------------------------------- validate


def test_validate_full_french(tmp_path):
    lib = full_library(("fr",), root=tmp_path)
    report = lib.validate(["fr"])
    assert report.ok and report.missing == {}


def test_validate_missing_german(tmp_path):
    report = full_library(("fr",), root=tmp_path).validate(["fr", "de"])
    assert not report.ok
    assert list(report.missing) == ["de"]
    assert report.missing["de"] == list(ALL_CODES)


def test_validate_revoked_only_cell(tmp_path):
    lib = full_library(("fr",), root=tmp_path)
    (victim,) = lib.cell("fr", FEMALE_ANGRY)
    report = lib.revoke(victim.id).validate(["fr"])
    assert report.missing == {"fr": [FEMALE_ANGRY]}


def test_validate_missing_audio(tmp_path):
    lib = full_library(("fr",), root=tmp_path)
    victim = lib.entries[0]
    lib.audio_file(victim).unlink()
    report = lib.validate(["fr"])
    assert not report.ok and report.missing_audio == [victim.id]
    assert lib.validate(["fr"], check_audio=False).ok


# ---------------------------------------------------------------- persistence


def test_round_trip_three_entries(tmp_path):
    lib = PresetLibrary([
        make_entry("a", "fr", FEMALE_ANGRY, 4.0),
        make_entry("b", "de", MALE_DISGUST, None),
        make_entry("c", "fr", FEMALE_ANGRY, 1.5),
    ])
    lib.save(tmp_path / "library.json")
    with pytest.warns(DanglingAudioWarning):
        back = PresetLibrary.load(tmp_path / "library.json")
    assert back == lib


def test_round_trip_preserves_revocation(tmp_path):
    lib = full_library(("fr", "de"), root=tmp_path, per_cell=2).revoke("fr_f_sad_1")
    lib.save(tmp_path / "library.json")
    back = PresetLibrary.load(tmp_path / "library.json")
    assert back == lib and back.get("fr_f_sad_1").consent.revoked


def test_manifest_format(tmp_path):
    lib = PresetLibrary([make_entry("a", "fr", FEMALE_ANGRY, 4.0)])
    lib.save(tmp_path / "library.json")
    doc = json.loads((tmp_path / "library.json").read_text())
    assert doc["version"] == "pvm-lib/1"
    assert doc["entries"][0]["code"] == "Female-Angry"
    assert set(doc["entries"][0]) == {"id", "language", "code", "audio_path", "consent", "quality_score"}


def test_unknown_emotion_names_field(tmp_path):
    doc = PresetLibrary([make_entry("a", "fr", FEMALE_ANGRY)]).to_manifest()
    doc["entries"][0]["code"] = "Female-Bored"
    path = tmp_path / "library.json"
    path.write_text(json.dumps(doc, indent=2))
    with pytest.raises(ManifestError) as err:
        PresetLibrary.load(path)
    assert err.value.field == "entries[0].code"
    assert "entries[0].code" in str(err.value)
    assert err.value.line is not None


@pytest.mark.parametrize("text,field", [
    ('{"version": "pvm-lib/9", "entries": []}', "version"),
    ('{"version": "pvm-lib/1"}', "entries"),
    ('{"version": "pvm-lib/1", "entries": [{"id": "a"}]}', "entries[0].language"),
])
def test_malformed_manifests(text, field):
    with pytest.raises(ManifestError) as err:
        PresetLibrary.from_json(text)
    assert err.value.field == field


def test_invalid_json_reports_line():
    with pytest.raises(ManifestError) as err:
        PresetLibrary.from_json('{\n  "version": "pvm-lib/1",\n  oops\n}')
    assert err.value.line == 3


def test_hand_written_minimal_manifest(tmp_path):
    (tmp_path / "voices").mkdir()
    (tmp_path / "voices" / "f_ang.wav").write_bytes(b"")
    (tmp_path / "library.json").write_text("""{
  "version": "pvm-lib/1",
  "entries": [
    {
      "id": "cafe_f1_ang",
      "language": "fr",
      "code": "Female-Angry",
      "audio_path": "voices/f_ang.wav",
      "consent": {"speaker_id": "cafe-f1", "consent_date": "2023-11-05", "scope": "CC BY-NC-SA 4.0"}
    }
  ]
}
""")
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        lib = PresetLibrary.load(tmp_path / "library.json")
    assert len(lib) == 1
    entry = lib.get("cafe_f1_ang")
    assert (entry.language, entry.code) == ("fr", FEMALE_ANGRY)
    assert entry.quality_score is None and not entry.consent.revoked
    assert entry.consent.scope == "CC BY-NC-SA 4.0"
    assert lib.audio_file(entry) == tmp_path / "voices" / "f_ang.wav"
