"""Batch command-line entry points.

Machine-readable results go to stdout (or --out); diagnostics and per-item
errors go to stderr. Every command is deterministic given its inputs and
seed flags, and exits 0 only when no per-item errors occurred.
"""

from __future__ import annotations

import csv
import hashlib
import io
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import click

from earbench import acoustics, signal
from earbench.scoring import PhonemeLexicon, score_trial
from earbench.stats import (
    ScoreTable,
    TableError,
    emm_tukey,
    mixed_anova,
    rm_anova_2way,
    summarize_conditions,
)
from earbench.vocoder import VocoderConfig, vocode

MANIFEST_COLUMNS = (
    "stimulus_id",
    "purpose",
    "corpus",
    "list_id",
    "sentence_id",
    "room",
    "rir_channel",
    "channels",
    "target_text",
    "output",
    "rms",
)


def _emit(text: str, out_path):
    if out_path:
        Path(out_path).write_text(text, encoding="utf-8")
    else:
        click.echo(text, nl=False)


@click.group()
def main():
    """Remote speech-intelligibility testing toolbox."""


# ---------------------------------------------------------------------------


@main.command("analyze-rir")
@click.argument("rir_paths", nargs=-1, required=True, type=click.Path(exists=True))
@click.option("--fit-range", nargs=2, type=float, default=(-5.0, -35.0), show_default=True,
              help="Decay-curve fit bounds in dB (high low).")
@click.option("--anchor", type=click.Choice(["zero", "peak"]), default="zero",
              show_default=True, help="Direct-path window start.")
@click.option("--format", "fmt", type=click.Choice(["text", "delimited"]), default="text")
@click.option("--out", type=click.Path(), default=None)
def analyze_rir(rir_paths, fit_range, anchor, fmt, out):
    """Report RT60 and DRR for each RIR WAV (sidecar .meta picked up if present)."""
    rows = []
    failures = 0
    for path in rir_paths:
        path = Path(path)
        sidecar = path.with_suffix(".meta")
        row = {"file": path.name, "room": "", "channel": "", "distance_m": "",
               "rt60_s": "", "drr_db": ""}
        try:
            rir = acoustics.load_rir(path, sidecar if sidecar.exists() else None)
            row["room"] = rir.room
            row["channel"] = rir.channel
            row["distance_m"] = "" if rir.distance_m is None else f"{rir.distance_m:g}"
            try:
                row["rt60_s"] = f"{acoustics.estimate_rt60(rir, tuple(fit_range)):.2f}"
            except acoustics.RirError as exc:
                row["rt60_s"] = "error"
                failures += 1
                click.echo(f"{path.name}: RT60: {exc}", err=True)
            try:
                row["drr_db"] = f"{acoustics.compute_drr(rir, anchor):.1f}"
            except acoustics.RirError as exc:
                row["drr_db"] = "error"
                failures += 1
                click.echo(f"{path.name}: DRR: {exc}", err=True)
        except (OSError, ValueError) as exc:
            failures += 1
            click.echo(f"{path.name}: {exc}", err=True)
            row["rt60_s"] = row["drr_db"] = "error"
        rows.append(row)

    header = ["file", "room", "channel", "distance_m", "rt60_s", "drr_db"]
    if fmt == "delimited":
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=header)
        writer.writeheader()
        writer.writerows(rows)
        _emit(buf.getvalue(), out)
    else:
        widths = {h: max(len(h), *(len(r[h]) for r in rows)) for h in header}
        lines = ["  ".join(h.ljust(widths[h]) for h in header)]
        for r in rows:
            lines.append("  ".join(str(r[h]).ljust(widths[h]) for h in header))
        _emit("\n".join(lines) + "\n", out)
    sys.exit(1 if failures else 0)


# ---------------------------------------------------------------------------


def _render_row(row, config_json, corpus_dir, rir_dir, out_dir):
    """Render one manifest row to a WAV; returns (stimulus_id, sha256, rms)."""
    config = VocoderConfig.from_json(config_json)
    speech_path = Path(corpus_dir) / row["corpus"] / row["list_id"] / (
        row["sentence_id"] + ".wav"
    )
    speech = signal.load_wav(speech_path)
    speech = signal.resample(speech, config.sample_rate_hz)
    if row["room"] and row["room"] != "anechoic":
        channel = row.get("rir_channel") or "left"
        rir_path = Path(rir_dir) / f"{row['room']}_{channel}.wav"
        sidecar = rir_path.with_suffix(".meta")
        rir = acoustics.load_rir(rir_path, sidecar if sidecar.exists() else None)
        rir = rir.resampled(config.sample_rate_hz)
        speech = signal.convolve(speech, rir)
    target_rms = float(row["rms"]) if row.get("rms") else signal.DEFAULT_TARGET_RMS
    rendered = vocode(speech, config.with_num_selected(int(row["channels"])), target_rms)
    out_path = Path(out_dir) / row["output"]
    out_path.parent.mkdir(parents=True, exist_ok=True)
    signal.save_wav(rendered, out_path)
    digest = hashlib.sha256(out_path.read_bytes()).hexdigest()
    return row["stimulus_id"], digest, signal.rms(rendered)


@main.command("gen-stimuli")
@click.option("--manifest", required=True, type=click.Path(exists=True),
              help="CSV of stimulus descriptors.")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None,
              help="Vocoder config JSON (defaults built in).")
@click.option("--corpus-dir", required=True, type=click.Path(exists=True))
@click.option("--rir-dir", type=click.Path(), default=".",
              help="Directory of <room>_<channel>.wav RIRs.")
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--jobs", type=int, default=1, show_default=True)
def gen_stimuli(manifest, config_path, corpus_dir, rir_dir, out_dir, jobs):
    """Render the vocoded stimuli listed in a manifest; echoes the manifest
    with checksums to <out>/manifest.csv."""
    config = VocoderConfig.load(config_path) if config_path else VocoderConfig()
    config_json = config.to_json()
    with open(manifest, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise click.ClickException("empty manifest")
    outputs = [r["output"] for r in rows]
    if len(set(outputs)) != len(outputs):
        raise click.ClickException("manifest output paths are not unique")
    Path(out_dir).mkdir(parents=True, exist_ok=True)

    results = {}
    failures = 0
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = {
                pool.submit(_render_row, row, config_json, corpus_dir, rir_dir, out_dir):
                row for row in rows
            }
            for future, row in futures.items():
                try:
                    sid, digest, out_rms = future.result()
                    results[sid] = (digest, out_rms)
                except Exception as exc:
                    failures += 1
                    click.echo(f"{row['stimulus_id']}: {exc}", err=True)
    else:
        for row in rows:
            try:
                sid, digest, out_rms = _render_row(row, config_json, corpus_dir, rir_dir, out_dir)
                results[sid] = (digest, out_rms)
            except Exception as exc:
                failures += 1
                click.echo(f"{row['stimulus_id']}: {exc}", err=True)

    manifest_out = Path(out_dir) / "manifest.csv"
    with open(manifest_out, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(MANIFEST_COLUMNS) + ["filename", "sha256", "rendered_rms"])
        for row in rows:
            sid = row["stimulus_id"]
            digest, out_rms = results.get(sid, ("", ""))
            writer.writerow(
                [row.get(c, "") for c in MANIFEST_COLUMNS]
                + [row["output"], digest, f"{out_rms:.9f}" if out_rms != "" else ""]
            )
    click.echo(f"rendered {len(results)}/{len(rows)} stimuli -> {out_dir}", err=True)
    sys.exit(1 if failures else 0)


# ---------------------------------------------------------------------------


@main.command("score")
@click.option("--targets", required=True, type=click.Path(exists=True),
              help="Target transcripts, one per line.")
@click.option("--responses", required=True, type=click.Path(exists=True),
              help="Typed responses, one per line, aligned with targets.")
@click.option("--lexicon", "lexicon_path", required=True, type=click.Path(exists=True))
@click.option("--out", type=click.Path(), default=None)
def score_cmd(targets, responses, lexicon_path, out):
    """Score response lines against target lines at the phoneme level."""
    target_lines = Path(targets).read_text(encoding="utf-8").splitlines()
    response_lines = Path(responses).read_text(encoding="utf-8").splitlines()
    if len(target_lines) != len(response_lines):
        raise click.ClickException(
            f"row mismatch: {len(target_lines)} targets vs {len(response_lines)} responses"
        )
    lexicon = PhonemeLexicon.load(lexicon_path)
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["trial", "target", "response", "total_phonemes",
                     "correct_phonemes", "percent_correct", "rau", "oov"])
    for i, (t, r) in enumerate(zip(target_lines, response_lines)):
        s = score_trial(t, r, lexicon)
        writer.writerow([i, t, r, s.total_phonemes, s.correct_phonemes,
                         f"{s.percent_correct:.4f}", f"{s.rau:.4f}", " ".join(s.oov)])
    _emit(buf.getvalue(), out)


# ---------------------------------------------------------------------------


def _load_score_table(path: Path) -> ScoreTable:
    text = path.read_text(encoding="utf-8")
    header = text.splitlines()[0] if text else ""
    if "percent_correct" in header and "rau" in header and "stimulus_id" not in header:
        return ScoreTable.from_csv(text)
    # trial-level export: aggregate per condition first
    return ScoreTable.from_trial_rows(csv.DictReader(io.StringIO(text)))


@main.command("stats")
@click.argument("table_path", type=click.Path(exists=True))
@click.option("--alpha", type=float, default=0.05, show_default=True)
@click.option("--format", "fmt", type=click.Choice(["text", "delimited"]), default="text")
@click.option("--out", type=click.Path(), default=None)
def stats_cmd(table_path, alpha, fmt, out):
    """Effect tables, post-hoc contrasts, and condition descriptives for a
    score table (condition-level rows or a raw session export)."""
    try:
        table = _load_score_table(Path(table_path))
        locations = table.levels("location")
        results = mixed_anova(table) if len(locations) > 1 else rm_anova_2way(table)
        contrasts = {f: emm_tukey(table, f) for f in ("room", "channels")}
        if len(locations) > 1:
            contrasts["location"] = emm_tukey(table, "location")
        cells = summarize_conditions(table)
    except (TableError, ValueError) as exc:
        raise click.ClickException(str(exc))

    if fmt == "delimited":
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["effect", "F", "df_num", "df_den", "p", "ges",
                         "epsilon_gg", "df_num_gg", "df_den_gg", "p_gg"])
        for r in results:
            writer.writerow([
                r.effect, f"{r.f:.6f}", f"{r.df_num:g}", f"{r.df_den:g}",
                f"{r.p:.6g}", f"{r.ges:.6f}",
                "" if r.epsilon_gg is None else f"{r.epsilon_gg:.6f}",
                "" if r.df_num_gg is None else f"{r.df_num_gg:.4f}",
                "" if r.df_den_gg is None else f"{r.df_den_gg:.4f}",
                "" if r.p_gg is None else f"{r.p_gg:.6g}",
            ])
        writer.writerow([])
        writer.writerow(["factor", "level_a", "level_b", "estimate", "p_adjusted"])
        for factor, cons in contrasts.items():
            for c in cons:
                writer.writerow([factor, c.level_a, c.level_b,
                                 f"{c.estimate:.4f}", f"{c.p_adjusted:.6g}"])
        writer.writerow([])
        writer.writerow(["location", "room", "channels", "n", "mean_percent", "sd_percent"])
        for cell in cells:
            writer.writerow([cell.location, cell.room, cell.channels, cell.n,
                             f"{cell.mean_percent:.2f}", f"{cell.sd_percent:.2f}"])
        _emit(buf.getvalue(), out)
        return

    lines = ["== ANOVA (RAU scores) =="]
    for r in results:
        stars = "*" if r.p < alpha else ""
        line = (f"{r.effect:<24s} F({r.df_num:g}, {r.df_den:g}) = {r.f:.2f}, "
                f"p = {r.p:.4g}{stars}, ges = {r.ges:.3f}")
        if r.epsilon_gg is not None and r.df_num >= 2:
            line += (f" | GG eps = {r.epsilon_gg:.3f}: "
                     f"F({r.df_num_gg:.1f}, {r.df_den_gg:.1f}), p = {r.p_gg:.4g}")
        lines.append(line)
    lines.append("")
    lines.append("== Tukey-adjusted marginal contrasts ==")
    for factor, cons in contrasts.items():
        for c in cons:
            stars = "*" if c.p_adjusted < alpha else ""
            lines.append(f"{factor}: {c.level_a} - {c.level_b} = {c.estimate:+.2f} RAU, "
                         f"p_adj = {c.p_adjusted:.4g}{stars}")
    lines.append("")
    lines.append("== Condition descriptives (percent correct, mean +/- sd) ==")
    for cell in cells:
        flag = " (n=1)" if cell.single_observation else ""
        lines.append(f"{cell.location} / {cell.room} / {cell.channels}ch: "
                     f"{cell.mean_percent:.1f} +/- {cell.sd_percent:.1f} (n={cell.n}){flag}")
    _emit("\n".join(lines) + "\n", out)


# ---------------------------------------------------------------------------


@main.command("serve")
@click.option("--store", "store_dir", required=True, type=click.Path(exists=True),
              help="Stimulus store directory (manifest.csv + lexicon.txt + WAVs).")
@click.option("--db", "db_path", type=click.Path(), default="sessions.db",
              show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8377, show_default=True)
@click.option("--ui", "ui_dir", type=click.Path(exists=True), default=None,
              help="Serve the built browser UI from this directory at /app.")
def serve(store_dir, db_path, host, port, ui_dir):
    """Run the listening-session service."""
    import uvicorn

    from earbench.service import create_app

    app = create_app(store_dir, db_path, ui_dir=ui_dir)
    uvicorn.run(app, host=host, port=port, log_level="info")


if __name__ == "__main__":
    main()
