from __future__ import annotations

import json

import numpy as np
import pytest

from conftest import RATE, blues_like, toy_samples, write_track
from songcue.audio import load_wav
from songcue.cli import main
from songcue.server import parse_log_line


@pytest.fixture()
def wav(tmp_path):
    p = tmp_path / "track.wav"
    write_track(blues_like(12.0), p)
    return p


def test_preprocess_builds_then_caches(wav, capsys):
    assert main(["preprocess", str(wav), "--genre", "blues"]) == 0
    out1 = capsys.readouterr().out
    assert "built" in out1 and "category=blues" in out1
    assert wav.with_name(wav.name + ".profile.json").exists()
    assert main(["preprocess", str(wav), "--genre", "blues"]) == 0
    assert "cached" in capsys.readouterr().out


def test_preprocess_auto(wav, capsys):
    assert main(["preprocess", str(wav), "--auto"]) == 0
    assert "category=blues" in capsys.readouterr().out


def test_genre_and_auto_are_exclusive(wav):
    with pytest.raises(SystemExit):
        main(["preprocess", str(wav), "--genre", "blues", "--auto"])
    with pytest.raises(SystemExit):
        main(["preprocess", str(wav)])


def test_unknown_genre_is_an_error(wav, capsys):
    assert main(["preprocess", str(wav), "--genre", "polka"]) == 1
    assert "error:" in capsys.readouterr().err


def test_params_override_and_validation(wav, capsys):
    assert main(["preprocess", str(wav), "--genre", "blues",
                 "--params", '{"n_mfcc": 10}']) == 0
    assert main(["preprocess", str(wav), "--genre", "blues",
                 "--params", '{"n_mfc": 10}']) == 1
    assert "unknown parameter" in capsys.readouterr().err


def test_params_from_file(wav, tmp_path, capsys):
    f = tmp_path / "params.json"
    f.write_text('{"n_mels": 30}')
    assert main(["preprocess", str(wav), "--genre", "blues",
                 "--params", f"@{f}"]) == 0


def test_play_writes_the_stream_and_log(wav, tmp_path, capsys):
    out = tmp_path / "rendered.wav"
    log = tmp_path / "session.log"
    rc = main(["play", str(wav), "--genre", "blues",
               "--out", str(out), "--log", str(log)])
    assert rc == 0
    assert "done: stream_s=12.0 notified=0" in capsys.readouterr().out
    assert load_wav(out).n_samples == 12 * RATE
    events = [parse_log_line(l)[1] for l in log.read_text().splitlines()]
    assert events[0] == "SESSION_START" and events[-1] == "SESSION_STOP"
    assert "TRACK" in events


def test_play_default_device_sink_fails_gracefully(wav, capsys):
    assert main(["play", str(wav), "--genre", "blues"]) == 1
    assert "--out FILE" in capsys.readouterr().err


def test_inject_then_score_roundtrip(tmp_path, capsys):
    track = tmp_path / "long.wav"
    write_track(toy_samples(120.0), track)
    bundle = tmp_path / "bundle"
    rc = main(["inject", str(track), "--genre", "classical",
               "--out", str(bundle), "--seed", "5", "--control"])
    assert rc == 0
    assert "served=6" in capsys.readouterr().out

    json_out = tmp_path / "score.json"
    rc = main(["score", str(bundle), "--json-out", str(json_out)])
    assert rc == 0
    out = capsys.readouterr().out
    assert "overall accuracy=1.000" in out
    assert "false_positives=0" in out
    d = json.loads(json_out.read_text())
    assert d["overall_accuracy"] == 1.0
    assert len(d["regions_s"]) == 6


def test_inject_rejects_short_playlists(wav, tmp_path, capsys):
    rc = main(["inject", str(wav), "--genre", "blues",
               "--out", str(tmp_path / "b")])
    assert rc == 1
    assert "playlist too short" in capsys.readouterr().err


def test_notify_without_a_listener_fails(capsys):
    rc = main(["notify", "--level", "2", "--endpoint", "127.0.0.1:1"])
    assert rc == 1
    assert "error:" in capsys.readouterr().err
