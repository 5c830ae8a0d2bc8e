"""Publication periods, layer kinds and IPC classes."""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass
from functools import total_ordering

FIRST_YEAR = 2016

IPC_CLASSES = (1, 2, 3, 4, 5)


class Cycle(enum.IntEnum):
    """Report month. Values are calendar months so ``int(cycle)`` is the MM in file names."""

    FEB = 2
    JUN = 6
    OCT = 10


_CYCLES = (Cycle.FEB, Cycle.JUN, Cycle.OCT)


class LayerKind(str, enum.Enum):
    CS = "CS"  # current situation at publication
    ML1 = "ML1"  # near-term projection (3 months)
    ML2 = "ML2"  # medium-term projection (6 months)

    def __str__(self) -> str:
        return self.value


_PERIOD_RE = re.compile(r"^\s*(\d{4})-?(\d{2})\s*$")


@total_ordering
@dataclass(frozen=True)
class PeriodId:
    """A report cycle, e.g. ``PeriodId(2021, Cycle.FEB)``.

    Periods are totally ordered by ``(year, cycle)`` and support cycle
    arithmetic through :meth:`shift`.
    """

    year: int
    cycle: Cycle

    def __post_init__(self):
        if not isinstance(self.year, int) or self.year < FIRST_YEAR:
            raise ValueError(f"period year must be an integer >= {FIRST_YEAR}, got {self.year!r}")
        try:
            cycle = Cycle(int(self.cycle))
        except ValueError:
            raise ValueError(f"cycle must be one of 2, 6, 10, got {self.cycle!r}") from None
        object.__setattr__(self, "cycle", cycle)

    @classmethod
    def parse(cls, text: str) -> "PeriodId":
        """Parse ``YYYY-MM`` or ``YYYYMM``."""
        m = _PERIOD_RE.match(str(text))
        if not m:
            raise ValueError(f"not a period: {text!r}")
        return cls(int(m.group(1)), Cycle(int(m.group(2))))

    @classmethod
    def from_index(cls, index: int) -> "PeriodId":
        year, pos = divmod(index, 3)
        return cls(year, _CYCLES[pos])

    @property
    def index(self) -> int:
        """Position on the cycle axis; consecutive periods differ by one."""
        return self.year * 3 + _CYCLES.index(self.cycle)

    def shift(self, n: int) -> "PeriodId":
        """Move ``n`` cycles forward (negative: backward). Raises ValueError before 2016-02."""
        return PeriodId.from_index(self.index + n)

    def next(self) -> "PeriodId":
        return self.shift(1)

    def prev(self) -> "PeriodId":
        return self.shift(-1)

    def __lt__(self, other):
        if not isinstance(other, PeriodId):
            return NotImplemented
        return self.index < other.index

    def __str__(self) -> str:
        return f"{self.year:04d}-{int(self.cycle):02d}"

    @property
    def compact(self) -> str:
        """``YYYYMM`` form used in directory names."""
        return f"{self.year:04d}{int(self.cycle):02d}"


def period_range(start: PeriodId, stop: PeriodId) -> list[PeriodId]:
    """Inclusive range of periods."""
    if stop < start:
        raise ValueError(f"empty period range {start}..{stop}")
    return [PeriodId.from_index(i) for i in range(start.index, stop.index + 1)]


def parse_period_range(text: str) -> tuple[PeriodId, PeriodId]:
    """Parse ``FROM..TO`` (either side may be omitted only by the caller)."""
    if ".." not in text:
        raise ValueError(f"period range must look like 2016-02..2022-10, got {text!r}")
    lo, hi = text.split("..", 1)
    start, stop = PeriodId.parse(lo), PeriodId.parse(hi)
    if stop < start:
        raise ValueError(f"period range is not well ordered: {text!r}")
    return start, stop


def check_ipc(value: int) -> int:
    if value not in IPC_CLASSES:
        raise ValueError(f"IPC class must be in 1..5, got {value!r}")
    return value
