"""Listening-session protocol: plans, the training stopping rule, trial
sequencing, response capture with feedback, and persistence.

A session runs a training phase (anechoic vocoded sentences with volume
adjustment on the listener's side) followed by testing conditions in
randomized order, each paired with a randomly assigned, unrepeated sentence
list. Trials are persisted append-only; the served-stimulus sequence is a
deterministic function of the plan and the recorded responses, so a session
can be replayed exactly.
"""

from __future__ import annotations

import csv
import io
import json
import random
import secrets
import sqlite3
import threading
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from earbench.scoring import GIVE_UP_PHRASE, PhonemeLexicon, score_trial

TRIAL_COLUMNS = (
    "subject",
    "location",
    "phase",
    "room",
    "channels",
    "stimulus_id",
    "target",
    "response",
    "presented_at",
    "total_phonemes",
    "correct_phonemes",
    "percent_correct",
    "rau",
)


class SessionError(ValueError):
    """Invalid session operation."""


class SessionNotFound(SessionError):
    pass


class SessionConflict(SessionError):
    """Out-of-order, duplicate, or replayed interaction."""


class SessionComplete(SessionError):
    pass


@dataclass(frozen=True)
class TrainingConfig:
    block_size: int = 5
    plateau_blocks: int = 3
    plateau_delta: float = 10.0
    min_sentences: int = 20
    strategy: str = "per-step"  # "per-step" or "endpoints"


@dataclass(frozen=True)
class Condition:
    room: str
    channels: int

    @property
    def key(self) -> str:
        return f"{self.room}/{self.channels}"


@dataclass(frozen=True)
class SessionPlan:
    session_id: str
    subject: str
    conditions: tuple[Condition, ...]
    list_assignment: dict[str, str]  # condition key -> sentence list id
    training: TrainingConfig = field(default_factory=TrainingConfig)
    seed: int = 0
    location: str = "remote"
    allow_replay: bool = False
    headphones_wired: bool = True

    def to_json(self) -> str:
        payload = asdict(self)
        payload["conditions"] = [[c.room, c.channels] for c in self.conditions]
        return json.dumps(payload)

    @classmethod
    def from_json(cls, text: str) -> "SessionPlan":
        raw = json.loads(text)
        raw["conditions"] = tuple(Condition(r, int(c)) for r, c in raw["conditions"])
        raw["training"] = TrainingConfig(**raw["training"])
        return cls(**raw)


def build_plan(
    conditions,
    corpus_lists,
    seed: int,
    subject: str = "anon",
    training: TrainingConfig | None = None,
    location: str = "remote",
    headphones_wired: bool = True,
) -> SessionPlan:
    """Randomize condition order and assign each condition a distinct list.

    Deterministic for a given seed: the order is a uniform permutation and
    the list assignment an injective uniform draw.
    """
    conditions = [c if isinstance(c, Condition) else Condition(*c) for c in conditions]
    lists = sorted(corpus_lists)
    if len(lists) < len(conditions):
        raise SessionError(
            f"{len(conditions)} conditions need at least as many sentence lists, "
            f"got {len(lists)}"
        )
    rng = random.Random(seed)
    order = list(conditions)
    rng.shuffle(order)
    assigned = rng.sample(lists, k=len(order))
    return SessionPlan(
        session_id=f"plan-{seed}",
        subject=subject,
        conditions=tuple(order),
        list_assignment={c.key: l for c, l in zip(order, assigned)},
        training=training or TrainingConfig(),
        seed=seed,
        location=location,
        headphones_wired=headphones_wired,
    )


def training_should_stop(history, config: TrainingConfig | None = None) -> bool:
    """The training stopping rule.

    Stops only at a block boundary once the minimum sentence count is
    reached AND the most recent plateau_blocks block means show no step
    improvement above plateau_delta percentage points. Both clauses must
    hold ("whichever came last"): a plateau before the minimum does not
    latch.
    """
    cfg = config or TrainingConfig()
    n = len(history)
    if n < cfg.min_sentences:
        return False
    if n % cfg.block_size != 0:
        return False
    need = cfg.plateau_blocks * cfg.block_size
    if n < need:
        return False
    tail = list(history[n - need :])
    means = [
        sum(tail[i * cfg.block_size : (i + 1) * cfg.block_size]) / cfg.block_size
        for i in range(cfg.plateau_blocks)
    ]
    if cfg.strategy == "endpoints":
        return means[-1] - means[0] <= cfg.plateau_delta
    steps = [b - a for a, b in zip(means, means[1:])]
    return max(steps) <= cfg.plateau_delta


# --------------------------------------------------------------------------
# stimulus store: a directory of WAVs plus manifest.csv and lexicon.txt

STORE_COLUMNS = (
    "stimulus_id",
    "purpose",
    "corpus",
    "list_id",
    "sentence_id",
    "room",
    "channels",
    "target_text",
    "filename",
)


@dataclass(frozen=True)
class StimulusInfo:
    stimulus_id: str
    purpose: str  # training | testing
    corpus: str
    list_id: str
    sentence_id: str
    room: str
    channels: int
    target_text: str
    filename: str


class StimulusStore:
    """Read-only view of a rendered stimulus directory."""

    def __init__(self, root):
        self.root = Path(root)
        manifest = self.root / "manifest.csv"
        if not manifest.exists():
            raise SessionError(f"no manifest.csv in stimulus store {self.root}")
        self.stimuli: dict[str, StimulusInfo] = {}
        self._training: list[StimulusInfo] = []
        self._testing: dict[tuple[str, int, str], list[StimulusInfo]] = {}
        with open(manifest, newline="", encoding="utf-8") as fh:
            for rec in csv.DictReader(fh):
                info = StimulusInfo(
                    stimulus_id=rec["stimulus_id"],
                    purpose=rec["purpose"],
                    corpus=rec["corpus"],
                    list_id=rec["list_id"],
                    sentence_id=rec["sentence_id"],
                    room=rec["room"],
                    channels=int(rec["channels"]),
                    target_text=rec["target_text"],
                    filename=rec["filename"],
                )
                if info.stimulus_id in self.stimuli:
                    raise SessionError(f"duplicate stimulus id {info.stimulus_id}")
                self.stimuli[info.stimulus_id] = info
                if info.purpose == "training":
                    self._training.append(info)
                else:
                    key = (info.room, info.channels, info.list_id)
                    self._testing.setdefault(key, []).append(info)
        lexicon_path = self.root / "lexicon.txt"
        if not lexicon_path.exists():
            raise SessionError(f"no lexicon.txt in stimulus store {self.root}")
        self.lexicon = PhonemeLexicon.load(lexicon_path)

    def training_sequence(self) -> list[StimulusInfo]:
        return list(self._training)

    def conditions(self) -> list[Condition]:
        return sorted(
            {Condition(room, ch) for room, ch, _ in self._testing},
            key=lambda c: (c.room, c.channels),
        )

    def testing_lists(self) -> list[str]:
        return sorted({list_id for _, _, list_id in self._testing})

    def testing_sequence(self, condition: Condition, list_id: str) -> list[StimulusInfo]:
        key = (condition.room, condition.channels, list_id)
        if key not in self._testing:
            raise SessionError(
                f"store has no stimuli for condition {condition.key} with list {list_id}"
            )
        return sorted(self._testing[key], key=lambda s: s.sentence_id)

    def wav_path(self, stimulus_id: str) -> Path:
        info = self.stimuli.get(stimulus_id)
        if info is None:
            raise SessionError(f"unknown stimulus {stimulus_id}")
        return self.root / info.filename


# --------------------------------------------------------------------------
# persistent session runtime

_SCHEMA = """
CREATE TABLE IF NOT EXISTS sessions (
    token TEXT PRIMARY KEY,
    plan_json TEXT NOT NULL,
    phase TEXT NOT NULL,
    position INTEGER NOT NULL,
    served_id TEXT,
    served_at TEXT,
    audio_fetches INTEGER NOT NULL DEFAULT 0,
    completed INTEGER NOT NULL DEFAULT 0,
    created_at TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS trials (
    seq INTEGER PRIMARY KEY AUTOINCREMENT,
    token TEXT NOT NULL,
    phase TEXT NOT NULL,
    room TEXT NOT NULL,
    channels INTEGER NOT NULL,
    stimulus_id TEXT NOT NULL,
    target TEXT NOT NULL,
    response TEXT NOT NULL,
    presented_at TEXT NOT NULL,
    total INTEGER NOT NULL,
    correct INTEGER NOT NULL,
    percent REAL NOT NULL,
    rau REAL NOT NULL
);
"""


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


class SessionManager:
    """State machine over the stimulus store with an embedded sqlite log.

    All mutating operations serialize on one lock; the trial log is
    append-only and exports are pure reads.
    """

    def __init__(self, store: StimulusStore, db_path=":memory:"):
        self.store = store
        self._db = sqlite3.connect(db_path, check_same_thread=False)
        self._db.executescript(_SCHEMA)
        self._lock = threading.RLock()

    # -- lifecycle ----------------------------------------------------------

    def create_session(
        self,
        subject: str,
        seed: int | None = None,
        location: str = "remote",
        training: TrainingConfig | None = None,
        headphones_wired: bool = True,
    ) -> str:
        conditions = self.store.conditions()
        if not conditions:
            raise SessionError("stimulus store has no testing conditions")
        if seed is None:
            seed = secrets.randbits(32)
        plan = build_plan(
            conditions,
            self.store.testing_lists(),
            seed=seed,
            subject=subject,
            training=training,
            location=location,
            headphones_wired=headphones_wired,
        )
        token = secrets.token_urlsafe(16)
        with self._lock:
            self._db.execute(
                "INSERT INTO sessions (token, plan_json, phase, position, created_at)"
                " VALUES (?, ?, 'training', 0, ?)",
                (token, plan.to_json(), _now()),
            )
            self._db.commit()
        return token

    def _row(self, token: str):
        row = self._db.execute(
            "SELECT token, plan_json, phase, position, served_id, served_at,"
            " audio_fetches, completed, created_at FROM sessions WHERE token = ?",
            (token,),
        ).fetchone()
        if row is None:
            raise SessionNotFound(f"unknown session {token}")
        keys = (
            "token",
            "plan_json",
            "phase",
            "position",
            "served_id",
            "served_at",
            "audio_fetches",
            "completed",
            "created_at",
        )
        return dict(zip(keys, row))

    def plan(self, token: str) -> SessionPlan:
        return SessionPlan.from_json(self._row(token)["plan_json"])

    # -- sequencing ---------------------------------------------------------

    def _sequence_for(self, plan: SessionPlan, phase: str, position: int):
        if phase == "training":
            seq = self.store.training_sequence()
        else:
            seq = []
            for cond in plan.conditions:
                seq.extend(
                    self.store.testing_sequence(cond, plan.list_assignment[cond.key])
                )
        return seq[position] if position < len(seq) else None

    def _training_history(self, token: str) -> list[float]:
        rows = self._db.execute(
            "SELECT percent FROM trials WHERE token = ? AND phase = 'training'"
            " ORDER BY seq",
            (token,),
        ).fetchall()
        return [r[0] for r in rows]

    def next_trial(self, token: str) -> dict:
        """Serve (or re-serve) the pending stimulus for this session."""
        with self._lock:
            row = self._row(token)
            if row["completed"]:
                return {"completed": True, "phase": "done"}
            plan = SessionPlan.from_json(row["plan_json"])
            if row["served_id"] is not None:
                info = self.store.stimuli[row["served_id"]]
                return self._trial_payload(row, info)
            info = self._sequence_for(plan, row["phase"], row["position"])
            if info is None and row["phase"] == "training":
                # training corpus exhausted before the stop rule fired
                self._db.execute(
                    "UPDATE sessions SET phase='testing', position=0 WHERE token=?",
                    (token,),
                )
                self._db.commit()
                row = self._row(token)
                info = self._sequence_for(plan, "testing", 0)
            if info is None:
                self._db.execute(
                    "UPDATE sessions SET completed=1 WHERE token=?", (token,)
                )
                self._db.commit()
                return {"completed": True, "phase": "done"}
            self._db.execute(
                "UPDATE sessions SET served_id=?, served_at=?, audio_fetches=0"
                " WHERE token=?",
                (info.stimulus_id, _now(), token),
            )
            self._db.commit()
            row = self._row(token)
            return self._trial_payload(row, info)

    def _trial_payload(self, row, info: StimulusInfo) -> dict:
        return {
            "completed": False,
            "phase": row["phase"],
            "trial_index": self._trial_count(row["token"]),
            "stimulus_id": info.stimulus_id,
            "room": info.room,
            "channels": info.channels,
            "audio_url": f"/sessions/{row['token']}/audio/{info.stimulus_id}",
        }

    def _trial_count(self, token: str) -> int:
        return self._db.execute(
            "SELECT COUNT(*) FROM trials WHERE token = ?", (token,)
        ).fetchone()[0]

    def fetch_audio(self, token: str, stimulus_id: str) -> Path:
        """Resolve the WAV path, enforcing the single-presentation policy."""
        with self._lock:
            row = self._row(token)
            plan = SessionPlan.from_json(row["plan_json"])
            if row["served_id"] != stimulus_id:
                raise SessionConflict(
                    f"stimulus {stimulus_id} is not the pending trial for this session"
                )
            if row["audio_fetches"] >= 1 and not plan.allow_replay:
                raise SessionConflict("stimulus already played (single-presentation policy)")
            self._db.execute(
                "UPDATE sessions SET audio_fetches = audio_fetches + 1 WHERE token=?",
                (token,),
            )
            self._db.commit()
        return self.store.wav_path(stimulus_id)

    def submit_response(self, token: str, stimulus_id: str, response_text: str) -> dict:
        """Score and persist the response to the pending stimulus.

        The response is stored exactly as typed. Returns the feedback
        payload: target transcript plus per-trial percent correct.
        """
        with self._lock:
            row = self._row(token)
            if row["completed"]:
                raise SessionComplete("session already complete")
            if row["served_id"] is None:
                raise SessionConflict("no pending trial (duplicate submission?)")
            if row["served_id"] != stimulus_id:
                raise SessionConflict(
                    f"response for {stimulus_id} but pending trial is {row['served_id']}"
                )
            plan = SessionPlan.from_json(row["plan_json"])
            info = self.store.stimuli[stimulus_id]
            score = score_trial(info.target_text, response_text, self.store.lexicon)
            self._db.execute(
                "INSERT INTO trials (token, phase, room, channels, stimulus_id, target,"
                " response, presented_at, total, correct, percent, rau)"
                " VALUES (?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?)",
                (
                    token,
                    row["phase"],
                    info.room,
                    info.channels,
                    stimulus_id,
                    info.target_text,
                    response_text,
                    row["served_at"],
                    score.total_phonemes,
                    score.correct_phonemes,
                    score.percent_correct,
                    score.rau,
                ),
            )
            phase = row["phase"]
            position = row["position"] + 1
            if phase == "training":
                history = self._training_history(token)  # includes this trial
                if training_should_stop(history, plan.training):
                    phase, position = "testing", 0
            completed = 0
            if phase == "testing" and self._sequence_for(plan, "testing", position) is None:
                completed = 1
            self._db.execute(
                "UPDATE sessions SET phase=?, position=?, served_id=NULL, served_at=NULL,"
                " audio_fetches=0, completed=? WHERE token=?",
                (phase, position, completed, token),
            )
            self._db.commit()
            return {
                "target": info.target_text,
                "percent_correct": score.percent_correct,
                "correct_phonemes": score.correct_phonemes,
                "total_phonemes": score.total_phonemes,
                "phase": phase,
                "completed": bool(completed),
            }

    # -- reads ----------------------------------------------------------------

    def status(self, token: str) -> dict:
        with self._lock:
            row = self._row(token)
            plan = SessionPlan.from_json(row["plan_json"])
            served = None
            if row["served_id"]:
                info = self.store.stimuli[row["served_id"]]
                served = {
                    "stimulus_id": info.stimulus_id,
                    "audio_url": f"/sessions/{token}/audio/{info.stimulus_id}",
                    "audio_fetched": row["audio_fetches"] > 0,
                }
            training_done = self._db.execute(
                "SELECT COUNT(*) FROM trials WHERE token=? AND phase='training'", (token,)
            ).fetchone()[0]
            return {
                "token": token,
                "subject": plan.subject,
                "location": plan.location,
                "phase": "done" if row["completed"] else row["phase"],
                "completed": bool(row["completed"]),
                "trials_completed": self._trial_count(token),
                "training_trials": training_done,
                "conditions": [[c.room, c.channels] for c in plan.conditions],
                "served": served,
                "give_up_phrase": GIVE_UP_PHRASE,
            }

    def export_csv(self, token: str) -> str:
        """All trial records, oldest first, as the stats-engine table."""
        with self._lock:
            row = self._row(token)
            plan = SessionPlan.from_json(row["plan_json"])
            out = io.StringIO()
            writer = csv.writer(out)
            writer.writerow(TRIAL_COLUMNS)
            for rec in self._db.execute(
                "SELECT phase, room, channels, stimulus_id, target, response,"
                " presented_at, total, correct, percent, rau FROM trials"
                " WHERE token=? ORDER BY seq",
                (token,),
            ):
                phase, room, channels, sid, target, response, at, total, correct, pct, rau_v = rec
                writer.writerow(
                    [
                        plan.subject,
                        plan.location,
                        phase,
                        room,
                        channels,
                        sid,
                        target,
                        response,
                        at,
                        total,
                        correct,
                        f"{pct:.6f}",
                        f"{rau_v:.6f}",
                    ]
                )
            return out.getvalue()
