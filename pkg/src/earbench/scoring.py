"""Phoneme-level intelligibility scoring of typed free-form responses.

Responses are normalized, mapped to phonemes through a pronunciation
lexicon, globally aligned against the target phoneme sequence by minimum
edit distance (match-maximizing among minimal alignments), and summarized
as percent correct plus the rationalized arcsine transform used for the
inferential statistics.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

GIVE_UP_PHRASE = "i dont know"

_PUNCT = re.compile(r"[^a-z0-9\s]")
_STRESS = re.compile(r"\d+$")


class LexiconError(ValueError):
    """Malformed lexicon file or untranscribable target sentence."""


class ScoringError(ValueError):
    """Invalid scoring inputs (e.g. empty target)."""


@dataclass(frozen=True)
class PhonemeLexicon:
    """Word-to-phoneme map plus normalization aliases (e.g. numerals)."""

    entries: dict[str, tuple[str, ...]]
    aliases: dict[str, tuple[str, ...]] = field(default_factory=dict)

    def __post_init__(self):
        for word, phones in self.entries.items():
            if not phones:
                raise LexiconError(f"word {word!r} has an empty phoneme sequence")
            if word != word.lower() or _PUNCT.search(word):
                raise LexiconError(f"lexicon key {word!r} must be lowercase and punctuation-free")

    def __contains__(self, word: str) -> bool:
        return word in self.entries

    def __len__(self) -> int:
        return len(self.entries)

    @classmethod
    def parse(cls, text: str, strip_stress: bool = True) -> "PhonemeLexicon":
        """Parse the lexicon line format.

        One entry per line: the word followed by its phoneme symbols,
        whitespace-separated. Lines starting with '#' or ';' are comments.
        CMU-style alternate pronunciations like word(2) are skipped (the
        first listed pronunciation wins). `%alias token replacement...`
        lines declare normalization aliases, used mainly to expand numerals.
        """
        entries: dict[str, tuple[str, ...]] = {}
        aliases: dict[str, tuple[str, ...]] = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.strip()
            if not line or line.startswith("#") or line.startswith(";"):
                continue
            parts = line.split()
            if parts[0] == "%alias":
                if len(parts) < 3:
                    raise LexiconError(f"line {lineno}: %alias needs a token and a replacement")
                aliases[parts[1].lower()] = tuple(p.lower() for p in parts[2:])
                continue
            if len(parts) < 2:
                raise LexiconError(f"line {lineno}: expected 'word phonemes...', got {raw!r}")
            word = parts[0].lower()
            if "(" in word:  # alternate pronunciation, keep the first
                continue
            word = _PUNCT.sub("", word)
            if word in entries:
                continue
            phones = tuple(_STRESS.sub("", p) if strip_stress else p for p in parts[1:])
            entries[word] = phones
        return cls(entries, aliases)

    @classmethod
    def load(cls, path, strip_stress: bool = True) -> "PhonemeLexicon":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.parse(fh.read(), strip_stress=strip_stress)


@dataclass(frozen=True)
class TrialScore:
    total_phonemes: int
    correct_phonemes: int
    percent_correct: float
    rau: float
    oov: tuple[str, ...] = ()

    def __post_init__(self):
        if not 0 <= self.correct_phonemes <= self.total_phonemes:
            raise ScoringError(
                f"correct count {self.correct_phonemes} outside [0, {self.total_phonemes}]"
            )


def normalize_text(raw: str, aliases: dict[str, tuple[str, ...]] | None = None) -> list[str]:
    """Lowercase, strip punctuation, tokenize, expand numeral aliases."""
    words = _PUNCT.sub("", raw.lower()).split()
    if not aliases:
        return words
    out: list[str] = []
    for w in words:
        out.extend(aliases.get(w, (w,)))
    return out


def to_phonemes(words: list[str], lexicon: PhonemeLexicon) -> tuple[list[str], list[str]]:
    """Concatenated phoneme sequence plus the out-of-vocabulary words.

    OOV words contribute no phonemes; they are data (reported), not errors.
    """
    phones: list[str] = []
    oov: list[str] = []
    for w in words:
        entry = lexicon.entries.get(w)
        if entry is None:
            oov.append(w)
        else:
            phones.extend(entry)
    return phones, oov


def align_phonemes(target: list[str], response: list[str]) -> int:
    """Matched-phoneme count under a minimum-edit-distance global alignment.

    Unit insert/delete/substitute costs; among all minimum-cost alignments
    the one with the most exact matches wins, so the result is deterministic.
    """
    if not target:
        raise ScoringError("alignment target must be non-empty")
    n, m = len(target), len(response)
    # dp holds (cost, -matches); lexicographic min realizes the tie-break
    prev = [(j, 0) for j in range(m + 1)]
    for i in range(1, n + 1):
        cur = [(i, 0)]
        ti = target[i - 1]
        for j in range(1, m + 1):
            hit = ti == response[j - 1]
            dc, dm = prev[j - 1]
            diag = (dc + (not hit), dm - hit)
            uc, um = prev[j]
            lc, lm = cur[j - 1]
            cur.append(min(diag, (uc + 1, um), (lc + 1, lm)))
        prev = cur
    return -prev[m][1]


def align_matched_indices(target: list[str], response: list[str]) -> list[int]:
    """Target indices matched exactly under the same alignment rule as
    align_phonemes (min cost, then max matches), recovered by backtracking."""
    if not target:
        raise ScoringError("alignment target must be non-empty")
    n, m = len(target), len(response)
    dp = [[(j, 0) for j in range(m + 1)]]
    for i in range(1, n + 1):
        row = [(i, 0)]
        for j in range(1, m + 1):
            hit = target[i - 1] == response[j - 1]
            dc, dm = dp[i - 1][j - 1]
            uc, um = dp[i - 1][j]
            lc, lm = row[j - 1]
            row.append(min((dc + (not hit), dm - hit), (uc + 1, um), (lc + 1, lm)))
        dp.append(row)
    matched = []
    i, j = n, m
    while i > 0 and j > 0:
        hit = target[i - 1] == response[j - 1]
        diag = (dp[i - 1][j - 1][0] + (not hit), dp[i - 1][j - 1][1] - hit)
        if dp[i][j] == diag:
            if hit:
                matched.append(i - 1)
            i, j = i - 1, j - 1
        elif dp[i][j] == (dp[i - 1][j][0] + 1, dp[i - 1][j][1]):
            i -= 1
        else:
            j -= 1
    matched.reverse()
    return matched


def rau(correct: int, total: int) -> float:
    """Rationalized arcsine transform of a correct/total proportion.

    theta = asin(sqrt(X/(N+1))) + asin(sqrt((X+1)/(N+1))); the linear
    rescale (146/pi)*theta - 23 puts mid-range values near percent scores
    while extending below 0 and above 100 at the extremes.
    """
    if total < 1:
        raise ScoringError(f"total must be at least 1, got {total}")
    if not 0 <= correct <= total:
        raise ScoringError(f"correct count {correct} outside [0, {total}]")
    theta = math.asin(math.sqrt(correct / (total + 1))) + math.asin(
        math.sqrt((correct + 1) / (total + 1))
    )
    return (146.0 / math.pi) * theta - 23.0


def score_trial(
    target_text: str,
    response_text: str,
    lexicon: PhonemeLexicon,
    give_up_phrase: str = GIVE_UP_PHRASE,
    unit: str = "phoneme",
) -> TrialScore:
    """Score one typed response against the target transcript.

    The give-up phrase (matched after normalization) scores 0 of N. OOV
    words in the response contribute nothing; an OOV target word is a
    corpus error and raises. unit="word" switches to per-word-slot credit:
    exactly matched words under the word-level alignment earn their full
    phoneme counts, everything else earns nothing.
    """
    if unit not in ("phoneme", "word"):
        raise ScoringError(f"unknown scoring unit {unit!r}")
    target_words = normalize_text(target_text, lexicon.aliases)
    if not target_words:
        raise ScoringError("empty target sentence")
    target_phones, target_oov = to_phonemes(target_words, lexicon)
    if target_oov:
        raise LexiconError(f"target contains out-of-vocabulary words: {target_oov}")
    total = len(target_phones)

    response_words = normalize_text(response_text, lexicon.aliases)
    if " ".join(response_words) == give_up_phrase:
        return TrialScore(total, 0, 0.0, rau(0, total))

    if unit == "word":
        matched = align_matched_indices(target_words, response_words)
        correct = sum(len(lexicon.entries[target_words[i]]) for i in matched)
        oov = [w for w in response_words if w not in lexicon]
    else:
        response_phones, oov = to_phonemes(response_words, lexicon)
        correct = align_phonemes(target_phones, response_phones) if response_phones else 0
    return TrialScore(
        total_phonemes=total,
        correct_phonemes=correct,
        percent_correct=100.0 * correct / total,
        rau=rau(correct, total),
        oov=tuple(oov),
    )
