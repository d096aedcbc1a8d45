import csv
import itertools

import numpy as np
import pytest

from earbench.signal import Waveform, save_wav

STORE_LEXICON = """\
;;; store lexicon
cat K AE T
dog D AO G
sun S AH N
red R EH D
big B IH G
hat H AE T
run R AH N
top T AA P
wet W EH T
map M AE P
i AY
dont D OW N T
know N OW
"""

STORE_WORDS = ["cat", "dog", "sun", "red", "big", "hat", "run", "top", "wet", "map"]


def make_store(
    root,
    n_training=30,
    conditions=(("anechoic", 8), ("office", 8)),
    lists=("l1", "l2", "l3"),
    sentences_per_list=5,
    fs=16000,
):
    """Write a miniature stimulus store: tiny WAVs + manifest.csv + lexicon.txt.

    Every sentence list is rendered under every condition so any plan's
    list assignment can be served.
    """
    root.mkdir(parents=True, exist_ok=True)
    pairs = list(itertools.combinations(STORE_WORDS, 2))
    tone = Waveform(0.1 * np.sin(2 * np.pi * 440 * np.arange(400) / fs), fs)
    rows = []

    def add(sid, purpose, corpus, list_id, sent_id, room, channels, text):
        filename = f"{sid}.wav"
        save_wav(tone, root / filename)
        rows.append(
            dict(stimulus_id=sid, purpose=purpose, corpus=corpus, list_id=list_id,
                 sentence_id=sent_id, room=room, channels=channels,
                 target_text=text, filename=filename)
        )

    for i in range(n_training):
        w1, w2 = pairs[i % len(pairs)]
        add(f"train-{i:03d}", "training", "cuny", "train", f"t{i:03d}",
            "anechoic", 8, f"{w1} {w2}")
    for room, channels in conditions:
        for list_id in lists:
            for j in range(sentences_per_list):
                w1, w2 = pairs[(j + 7) % len(pairs)]
                add(f"test-{room}-{channels}-{list_id}-{j}", "testing", "hint",
                    list_id, f"s{j:03d}", room, channels, f"{w1} {w2}")

    with open(root / "manifest.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
        writer.writeheader()
        writer.writerows(rows)
    (root / "lexicon.txt").write_text(STORE_LEXICON, encoding="utf-8")
    return root


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def speechlike_waveform(duration_s=3.0, fs=16000, seed=0):
    """Synthetic voiced-speech stand-in: drifting-pitch harmonics under two
    formants with syllable-rate amplitude modulation."""
    rng = np.random.default_rng(seed)
    n = int(duration_s * fs)
    t = np.arange(n) / fs
    f0 = 120.0 + 8.0 * np.sin(2.0 * np.pi * 0.7 * t + rng.uniform(0, 6.28))
    phase = 2.0 * np.pi * np.cumsum(f0) / fs
    x = np.zeros(n)
    for h in range(1, 40):
        fh = h * 120.0
        if fh > fs / 2 - 200:
            break
        formant = np.exp(-(((fh - 500.0) / 300.0) ** 2)) + 0.7 * np.exp(
            -(((fh - 1500.0) / 400.0) ** 2)
        ) + 0.15 * np.exp(-(((fh - 2600.0) / 500.0) ** 2))
        x += formant * np.sin(h * phase + rng.uniform(0, 6.28))
    am = 0.55 + 0.45 * np.sin(2.0 * np.pi * 2.5 * t + rng.uniform(0, 6.28))
    x = x * am
    return Waveform(0.3 * x / np.max(np.abs(x)), fs)


@pytest.fixture
def speechlike():
    return speechlike_waveform()


def pytest_runtest_logreport(report):
    """One verdict line per acceptance criterion (visible with -s)."""
    if "test_acceptance" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    if report.when == "call" or (report.when == "setup" and report.skipped):
        print(f"\nACCEPTANCE {name}: {report.outcome.upper()}")
