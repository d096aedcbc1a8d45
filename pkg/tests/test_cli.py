import csv
import io
import json

import numpy as np
import pytest
from click.testing import CliRunner

from earbench.cli import main
from earbench.signal import Waveform, save_wav
from tests.conftest import STORE_LEXICON, speechlike_waveform
from tests.test_acoustics import synthetic_decay_rir
from tests.test_stats_anova import table_from_matrix


@pytest.fixture
def runner():
    return CliRunner()


def write_rir(dirpath, room, channel, t60, seed):
    rir = synthetic_decay_rir(t60, seed=seed)
    coeffs = 0.9 * rir.coefficients / np.abs(rir.coefficients).max()
    wav = dirpath / f"{room}_{channel}.wav"
    save_wav(Waveform(coeffs, 16000), wav)
    wav.with_suffix(".meta").write_text(
        f"room = {room.title()}\nchannel = {channel}\ndistance_m = 3.0\n"
    )
    return wav


class TestAnalyzeRir:
    def test_synthetic_rir_table(self, tmp_path, runner):
        wav = write_rir(tmp_path, "office", "left", 0.6, seed=4)
        result = runner.invoke(main, ["analyze-rir", str(wav), "--format", "delimited"])
        assert result.exit_code == 0, result.output
        row = next(csv.DictReader(io.StringIO(result.stdout)))
        assert row["room"] == "Office"
        assert abs(float(row["rt60_s"]) - 0.6) <= 0.05 * 0.6 + 0.01

    def test_delta_rir_reports_errors_and_fails(self, tmp_path, runner):
        h = np.zeros(1000)
        h[0] = 0.9
        wav = tmp_path / "delta.wav"
        save_wav(Waveform(h, 16000), wav)
        result = runner.invoke(main, ["analyze-rir", str(wav), "--format", "delimited"])
        assert result.exit_code == 1
        row = next(csv.DictReader(io.StringIO(result.stdout)))
        assert row["rt60_s"] == "error"
        assert row["drr_db"] == "error"

    def test_batch_continues_after_bad_file(self, tmp_path, runner):
        good = write_rir(tmp_path, "office", "left", 0.5, seed=1)
        h = np.zeros(100)
        h[0] = 0.9
        bad = tmp_path / "delta.wav"
        save_wav(Waveform(h, 16000), bad)
        result = runner.invoke(
            main, ["analyze-rir", str(bad), str(good), "--format", "delimited"]
        )
        assert result.exit_code == 1
        rows = list(csv.DictReader(io.StringIO(result.stdout)))
        assert rows[0]["rt60_s"] == "error"
        assert rows[1]["rt60_s"] != "error"


@pytest.fixture
def gen_setup(tmp_path):
    corpus = tmp_path / "corpora"
    (corpus / "hint" / "l1").mkdir(parents=True)
    for sid, seed in [("s1", 3), ("s2", 4)]:
        save_wav(speechlike_waveform(1.0, seed=seed), corpus / "hint" / "l1" / f"{sid}.wav")
    rir_dir = tmp_path / "rirs"
    rir_dir.mkdir()
    write_rir(rir_dir, "office", "left", 0.5, seed=9)
    return corpus, rir_dir


def write_manifest(path, rows):
    cols = ["stimulus_id", "purpose", "corpus", "list_id", "sentence_id", "room",
            "rir_channel", "channels", "target_text", "output", "rms"]
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=cols)
        writer.writeheader()
        writer.writerows(rows)


class TestGenStimuli:
    def manifest_rows(self):
        return [
            dict(stimulus_id="a6", purpose="testing", corpus="hint", list_id="l1",
                 sentence_id="s1", room="anechoic", rir_channel="", channels=6,
                 target_text="cat dog", output="a6.wav", rms="0.08"),
            dict(stimulus_id="a12", purpose="testing", corpus="hint", list_id="l1",
                 sentence_id="s1", room="anechoic", rir_channel="", channels=12,
                 target_text="cat dog", output="a12.wav", rms="0.08"),
            dict(stimulus_id="o8", purpose="testing", corpus="hint", list_id="l1",
                 sentence_id="s2", room="office", rir_channel="left", channels=8,
                 target_text="sun red", output="o8.wav", rms="0.08"),
        ]

    def run(self, runner, tmp_path, corpus, rir_dir, out_name):
        manifest = tmp_path / "manifest.csv"
        write_manifest(manifest, self.manifest_rows())
        out = tmp_path / out_name
        result = runner.invoke(main, [
            "gen-stimuli", "--manifest", str(manifest), "--corpus-dir", str(corpus),
            "--rir-dir", str(rir_dir), "--out", str(out),
        ])
        assert result.exit_code == 0, result.output
        with open(out / "manifest.csv", newline="") as fh:
            return out, {r["stimulus_id"]: r for r in csv.DictReader(fh)}

    def test_deterministic_checksums(self, tmp_path, runner, gen_setup):
        corpus, rir_dir = gen_setup
        _, first = self.run(runner, tmp_path, corpus, rir_dir, "out1")
        _, second = self.run(runner, tmp_path, corpus, rir_dir, "out2")
        for sid in first:
            assert first[sid]["sha256"] == second[sid]["sha256"]

    def test_channel_count_changes_output(self, tmp_path, runner, gen_setup):
        corpus, rir_dir = gen_setup
        _, rows = self.run(runner, tmp_path, corpus, rir_dir, "out")
        assert rows["a6"]["sha256"] != rows["a12"]["sha256"]

    def test_outputs_share_rms(self, tmp_path, runner, gen_setup):
        corpus, rir_dir = gen_setup
        _, rows = self.run(runner, tmp_path, corpus, rir_dir, "out")
        values = [float(r["rendered_rms"]) for r in rows.values()]
        assert max(values) - min(values) < 1e-6 * 0.08

    def test_missing_corpus_entry_fails_row(self, tmp_path, runner, gen_setup):
        corpus, rir_dir = gen_setup
        rows = self.manifest_rows()
        rows[0]["sentence_id"] = "does-not-exist"
        manifest = tmp_path / "manifest.csv"
        write_manifest(manifest, rows)
        result = runner.invoke(main, [
            "gen-stimuli", "--manifest", str(manifest), "--corpus-dir", str(corpus),
            "--rir-dir", str(rir_dir), "--out", str(tmp_path / "out"),
        ])
        assert result.exit_code == 1
        assert "does-not-exist" in result.output or "a6" in result.output

    def test_duplicate_outputs_rejected(self, tmp_path, runner, gen_setup):
        corpus, rir_dir = gen_setup
        rows = self.manifest_rows()
        rows[1]["output"] = rows[0]["output"]
        manifest = tmp_path / "manifest.csv"
        write_manifest(manifest, rows)
        result = runner.invoke(main, [
            "gen-stimuli", "--manifest", str(manifest), "--corpus-dir", str(corpus),
            "--rir-dir", str(rir_dir), "--out", str(tmp_path / "out"),
        ])
        assert result.exit_code != 0
        assert "unique" in result.output


class TestScoreCmd:
    def test_scores_lines(self, tmp_path, runner):
        (tmp_path / "lex.txt").write_text(STORE_LEXICON)
        (tmp_path / "targets.txt").write_text("cat dog\nsun red\n")
        (tmp_path / "responses.txt").write_text("cat dog\nI don't know\n")
        result = runner.invoke(main, [
            "score", "--targets", str(tmp_path / "targets.txt"),
            "--responses", str(tmp_path / "responses.txt"),
            "--lexicon", str(tmp_path / "lex.txt"),
        ])
        assert result.exit_code == 0, result.output
        rows = list(csv.DictReader(io.StringIO(result.stdout)))
        assert float(rows[0]["percent_correct"]) == 100.0
        assert float(rows[1]["percent_correct"]) == 0.0

    def test_row_mismatch(self, tmp_path, runner):
        (tmp_path / "lex.txt").write_text(STORE_LEXICON)
        (tmp_path / "targets.txt").write_text("cat dog\n")
        (tmp_path / "responses.txt").write_text("cat\nsun\n")
        result = runner.invoke(main, [
            "score", "--targets", str(tmp_path / "targets.txt"),
            "--responses", str(tmp_path / "responses.txt"),
            "--lexicon", str(tmp_path / "lex.txt"),
        ])
        assert result.exit_code != 0
        assert "mismatch" in result.output


class TestStatsCmd:
    def write_table(self, tmp_path, mixed=False):
        from earbench.stats import ScoreTable

        rng = np.random.default_rng(0)
        rows = table_from_matrix(rng.normal(60, 8, size=(8, 3, 2)))
        if mixed:
            rows += table_from_matrix(
                rng.normal(55, 8, size=(4, 3, 2)), location="inperson", start_subject=50
            )
        path = tmp_path / "scores.csv"
        path.write_text(ScoreTable(rows).to_csv())
        return path

    def test_rm_report(self, tmp_path, runner):
        path = self.write_table(tmp_path)
        result = runner.invoke(main, ["stats", str(path)])
        assert result.exit_code == 0, result.output
        assert "room" in result.output
        assert "GG eps" in result.output
        assert "Condition descriptives" in result.output

    def test_mixed_report_includes_location(self, tmp_path, runner):
        path = self.write_table(tmp_path, mixed=True)
        result = runner.invoke(main, ["stats", str(path)])
        assert result.exit_code == 0, result.output
        assert "location:room" in result.output

    def test_delimited_format(self, tmp_path, runner):
        path = self.write_table(tmp_path)
        result = runner.invoke(main, ["stats", str(path), "--format", "delimited"])
        assert result.exit_code == 0
        assert result.stdout.startswith("effect,F,df_num")

    def test_constant_table_errors(self, tmp_path, runner):
        from earbench.stats import ScoreTable

        rows = table_from_matrix(np.full((4, 2, 2), 50.0))
        path = tmp_path / "flat.csv"
        path.write_text(ScoreTable(rows).to_csv())
        result = runner.invoke(main, ["stats", str(path)])
        assert result.exit_code != 0
        assert "constant" in result.output.lower()

    def test_trial_level_export_accepted(self, tmp_path, runner):
        from earbench.service import create_app
        from fastapi.testclient import TestClient
        from tests.conftest import make_store

        app = create_app(make_store(tmp_path / "store"))
        with TestClient(app) as client:
            token = client.post("/sessions", json={"subject": "s1", "seed": 5}).json()["token"]
            while True:
                trial = client.get(f"/sessions/{token}/next").json()
                if trial["completed"]:
                    break
                client.post(
                    f"/sessions/{token}/responses",
                    json={"stimulus_id": trial["stimulus_id"], "response": "cat dog"},
                )
            export = client.get(f"/sessions/{token}/export").text
        path = tmp_path / "trials.csv"
        path.write_text(export)
        # a single-subject export aggregates cleanly but cannot be analyzed
        result = runner.invoke(main, ["stats", str(path)])
        assert result.exit_code != 0
        assert "2 subjects" in result.output
