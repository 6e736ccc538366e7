"""Alignment tiers, label files, phone classes and syllabification."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Literal

CONTIGUITY_TOL = 1e-9
HTK_TICKS_PER_SECOND = 10_000_000

TimeUnit = Literal["htk_100ns", "seconds"]

PHONE_CLASSES = (
    "vowel",
    "stop",
    "fricative",
    "affricate",
    "nasal",
    "semivowel",
    "trill",
    "lateral",
    "silence",
    "short_pause",
)
PAUSE_CLASSES = ("silence", "short_pause")


class LabelFormatError(ValueError):
    pass


class UnknownPhoneError(KeyError):
    def __init__(self, symbol: str):
        super().__init__(symbol)
        self.symbol = symbol

    def __str__(self):
        return f"unknown phone {self.symbol!r}"


@dataclass(frozen=True)
class LabeledInterval:
    start_s: float
    end_s: float
    symbol: str

    def __post_init__(self):
        if not self.start_s < self.end_s:
            raise ValueError(f"interval {self.symbol!r} has start {self.start_s} >= end {self.end_s}")
        if not self.symbol or any(c.isspace() for c in self.symbol):
            raise ValueError(f"invalid symbol {self.symbol!r}")

    @property
    def duration_s(self) -> float:
        return self.end_s - self.start_s


@dataclass(frozen=True)
class AlignmentTier:
    intervals: tuple[LabeledInterval, ...]
    level: Literal["phone", "syllable"] = "phone"

    def __post_init__(self):
        ivs = tuple(self.intervals)
        object.__setattr__(self, "intervals", ivs)
        for i in range(1, len(ivs)):
            gap = ivs[i].start_s - ivs[i - 1].end_s
            if abs(gap) > CONTIGUITY_TOL:
                kind = "overlap" if gap < 0 else "gap"
                raise ValueError(f"{kind} between intervals {i - 1} and {i}")

    @classmethod
    def from_boundaries(cls, times: Iterable[float], symbols: Iterable[str], level="phone") -> AlignmentTier:
        """Build a contiguous tier from ``n + 1`` boundary times and ``n`` symbols."""
        times = list(times)
        symbols = list(symbols)
        if len(times) != len(symbols) + 1:
            raise ValueError("need exactly one more boundary time than symbols")
        return cls(
            tuple(LabeledInterval(times[i], times[i + 1], s) for i, s in enumerate(symbols)),
            level,
        )

    def __len__(self):
        return len(self.intervals)

    def __iter__(self):
        return iter(self.intervals)

    def __getitem__(self, i):
        return self.intervals[i]

    @property
    def symbols(self) -> list[str]:
        return [iv.symbol for iv in self.intervals]

    @property
    def start_s(self) -> float:
        return self.intervals[0].start_s

    @property
    def end_s(self) -> float:
        return self.intervals[-1].end_s

    def boundaries(self) -> list[float]:
        """All ``n + 1`` edges: the tier start, the internal boundaries, the tier end."""
        if not self.intervals:
            return []
        return [iv.start_s for iv in self.intervals] + [self.intervals[-1].end_s]

    def internal_boundaries(self) -> list[float]:
        return [iv.start_s for iv in self.intervals[1:]]


def _parse_time(field: str, time_unit: TimeUnit, lineno: int) -> float:
    try:
        if time_unit == "htk_100ns":
            if not (field.isascii() and field.isdigit()):
                raise ValueError(field)
            return int(field) / HTK_TICKS_PER_SECOND
        return float(field)
    except ValueError:
        raise LabelFormatError(f"bad time {field!r} at line {lineno}") from None


def parse_label_file(text: str, time_unit: TimeUnit = "htk_100ns", level="phone") -> AlignmentTier:
    """Parse ``start end symbol`` lines; blank lines are skipped."""
    if time_unit not in ("htk_100ns", "seconds"):
        raise ValueError(f"unknown time unit {time_unit!r}")
    intervals = []
    for lineno, line in enumerate(text.split("\n"), start=1):
        if not line.strip():
            continue
        fields = line.split()
        if len(fields) != 3:
            raise LabelFormatError(f"expected 'start end symbol' at line {lineno}, got {line!r}")
        start = _parse_time(fields[0], time_unit, lineno)
        end = _parse_time(fields[1], time_unit, lineno)
        if not start < end:
            raise LabelFormatError(f"non-monotone interval at line {lineno}")
        if intervals:
            gap = start - intervals[-1].end_s
            if gap < -CONTIGUITY_TOL:
                raise LabelFormatError(f"overlap at line {lineno}")
            if gap > CONTIGUITY_TOL:
                raise LabelFormatError(f"gap at line {lineno}")
        intervals.append(LabeledInterval(start, end, fields[2]))
    return AlignmentTier(tuple(intervals), level)


def _format_time(t: float, time_unit: TimeUnit) -> str:
    if time_unit == "htk_100ns":
        return str(int(round(t * HTK_TICKS_PER_SECOND)))
    return f"{t:.7f}"


def write_label_file(tier: AlignmentTier, time_unit: TimeUnit = "htk_100ns") -> str:
    return "".join(
        f"{_format_time(iv.start_s, time_unit)} {_format_time(iv.end_s, time_unit)} {iv.symbol}\n"
        for iv in tier.intervals
    )


@dataclass(frozen=True)
class PhoneClassTable:
    classes: dict

    def __post_init__(self):
        for sym, cls in self.classes.items():
            if cls not in PHONE_CLASSES:
                raise ValueError(f"phone {sym!r} has unknown class {cls!r}")
        if self.classes.get("SIL") != "silence" or self.classes.get("sp") != "short_pause":
            raise ValueError("phone class table must map SIL -> silence and sp -> short_pause")

    def __contains__(self, symbol):
        return symbol in self.classes

    @classmethod
    def parse(cls, text: str) -> PhoneClassTable:
        """Parse ``symbol class`` lines; ``#`` starts a comment."""
        classes = {"SIL": "silence", "sp": "short_pause"}
        seen = set()
        for lineno, line in enumerate(text.splitlines(), start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            fields = line.split()
            if len(fields) != 2:
                raise ValueError(f"expected 'symbol class' at line {lineno}")
            sym, phone_class = fields
            if sym in seen:
                raise ValueError(f"phone {sym!r} listed twice (line {lineno})")
            seen.add(sym)
            classes[sym] = phone_class
        return cls(classes)

    @classmethod
    def load(cls, path) -> PhoneClassTable:
        return cls.parse(Path(path).read_text(encoding="utf-8"))

    @classmethod
    def default(cls) -> PhoneClassTable:
        """The bundled sample table of single-character CLS-style symbols."""
        text = resources.files("hybridseg").joinpath("data/phone_classes.txt").read_text(encoding="utf-8")
        return cls.parse(text)


def classify(symbol: str, table: PhoneClassTable) -> str:
    try:
        return table.classes[symbol]
    except KeyError:
        raise UnknownPhoneError(symbol) from None


class SyllabificationRule(enum.Enum):
    # intervocalic consonant runs go wholly to the following syllable
    ONSET = "onset"


@dataclass(frozen=True)
class Syllable:
    lo: int
    hi: int
    nucleus_index: int
    vowelless: bool = False

    def __post_init__(self):
        if not self.lo <= self.nucleus_index < self.hi:
            raise ValueError(f"nucleus {self.nucleus_index} outside [{self.lo}, {self.hi})")

    @property
    def phone_index_range(self) -> tuple[int, int]:
        return (self.lo, self.hi)


def speech_chunks(phone_tier: AlignmentTier, table: PhoneClassTable) -> list[tuple[int, int]]:
    """Maximal ``[lo, hi)`` runs of non-pause phones."""
    chunks = []
    lo = None
    for i, iv in enumerate(phone_tier.intervals):
        if classify(iv.symbol, table) in PAUSE_CLASSES:
            if lo is not None:
                chunks.append((lo, i))
                lo = None
        elif lo is None:
            lo = i
    if lo is not None:
        chunks.append((lo, len(phone_tier)))
    return chunks


def syllabify(
    phone_tier: AlignmentTier,
    table: PhoneClassTable,
    rule: SyllabificationRule = SyllabificationRule.ONSET,
) -> list[Syllable]:
    if rule is not SyllabificationRule.ONSET:
        raise NotImplementedError(rule)
    syllables = []
    for lo, hi in speech_chunks(phone_tier, table):
        vowels = [i for i in range(lo, hi) if classify(phone_tier[i].symbol, table) == "vowel"]
        if not vowels:
            syllables.append(Syllable(lo, hi, lo, vowelless=True))
            continue
        starts = [lo] + [v + 1 for v in vowels[:-1]]
        ends = starts[1:] + [hi]
        syllables.extend(Syllable(s, e, v) for s, e, v in zip(starts, ends, vowels))
    return syllables
