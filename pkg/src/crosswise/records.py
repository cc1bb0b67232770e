"""Respondent-level survey data.

A :class:`RecordSet` stores one survey as read-only column arrays: the
crosswise reply and arm assignment are always present, while the control
item (a second crosswise question whose correct reply is known from the
design) and the completion time are optional per survey.  The class
behaves like an immutable sequence of :class:`Respondent` rows but keeps
columnar access cheap, which matters when a resampling loop touches the
same survey tens of thousands of times.

Missing values use sentinels internally (``-1`` for absent control
fields, ``nan`` for absent times); the row view translates them back to
``None``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import DataError
from .models import DIFFERENT, SAME

__all__ = ["Respondent", "RecordSet"]

#: Latent response classes attached by the simulator.
CLASS_HONEST = 0
CLASS_ONE_SAYER = 1
CLASS_RANDOM = 2

_CLASS_NAMES = {CLASS_HONEST: "honest", CLASS_ONE_SAYER: "one_sayer", CLASS_RANDOM: "random"}


@dataclass(frozen=True)
class Respondent:
    """A single survey row.

    ``answer`` and ``control_answer`` use the reply codes
    :data:`~crosswise.models.DIFFERENT` (1) and
    :data:`~crosswise.models.SAME` (2).  ``control_a_true`` is the true
    yes/no status behind the control statement and ``control_b_prob``
    the degenerate design rate (0 or 1) of its paired statement, which
    together determine the correct control reply.
    """

    answer: int
    subsample: int
    control_answer: int | None = None
    control_a_true: int | None = None
    control_b_prob: int | None = None
    time_minutes: float | None = None
    respondent_id: str | None = None
    latent_class: str | None = None


def _as_column(values, dtype, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=dtype)
    if arr.ndim != 1:
        raise DataError(f"column {name!r} must be one-dimensional")
    return arr


class RecordSet(Sequence):
    """An immutable columnar collection of survey rows."""

    def __init__(
        self,
        answer,
        subsample,
        control_answer=None,
        control_a_true=None,
        control_b_prob=None,
        time_minutes=None,
        respondent_id=None,
        latent_class=None,
    ):
        self.answer = _as_column(answer, np.int8, "answer")
        n = self.answer.shape[0]
        self.subsample = _as_column(subsample, np.int8, "subsample")

        def optional(values, dtype, fill, name):
            if values is None:
                return np.full(n, fill, dtype=dtype)
            return _as_column(values, dtype, name)

        self.control_answer = optional(control_answer, np.int8, -1, "control_answer")
        self.control_a_true = optional(control_a_true, np.int8, -1, "control_a_true")
        self.control_b_prob = optional(control_b_prob, np.int8, -1, "control_b_prob")
        self.time_minutes = optional(time_minutes, np.float64, np.nan, "time_minutes")
        self.latent_class = optional(latent_class, np.int8, -1, "latent_class")
        if respondent_id is None:
            self.respondent_id = None
        else:
            self.respondent_id = np.asarray(respondent_id, dtype=object)
            if self.respondent_id.shape != (n,):
                raise DataError("respondent_id length does not match the other columns")

        self._validate()
        for col in self._columns():
            col.setflags(write=False)

    # -- construction ------------------------------------------------

    @classmethod
    def from_respondents(cls, rows: Iterable[Respondent]) -> "RecordSet":
        rows = list(rows)
        name_to_code = {v: k for k, v in _CLASS_NAMES.items()}

        def col(getter, missing):
            return [missing if getter(r) is None else getter(r) for r in rows]

        ids = [r.respondent_id for r in rows]
        return cls(
            answer=[r.answer for r in rows],
            subsample=[r.subsample for r in rows],
            control_answer=col(lambda r: r.control_answer, -1),
            control_a_true=col(lambda r: r.control_a_true, -1),
            control_b_prob=col(lambda r: r.control_b_prob, -1),
            time_minutes=col(lambda r: r.time_minutes, np.nan),
            respondent_id=None if all(i is None for i in ids) else ids,
            latent_class=[name_to_code.get(r.latent_class, -1) for r in rows],
        )

    def _columns(self) -> list[np.ndarray]:
        cols = [
            self.answer,
            self.subsample,
            self.control_answer,
            self.control_a_true,
            self.control_b_prob,
            self.time_minutes,
            self.latent_class,
        ]
        if self.respondent_id is not None:
            cols.append(self.respondent_id)
        return cols

    def _validate(self) -> None:
        n = len(self.answer)
        for col in self._columns():
            if col.shape != (n,):
                raise DataError("all columns must have the same length")
        if n == 0:
            raise DataError("a survey must contain at least one respondent")
        if not (((self.answer == DIFFERENT) | (self.answer == SAME)).all()):
            raise DataError("answer codes must be 1 (DIFFERENT) or 2 (SAME)")
        if not (((self.subsample == 1) | (self.subsample == 2)).all()):
            raise DataError("subsample codes must be 1 or 2")
        ca = self.control_answer
        if not (((ca == -1) | (ca == DIFFERENT) | (ca == SAME)).all()):
            raise DataError("control_answer codes must be 1 (DIFFERENT) or 2 (SAME)")
        if ((self.control_a_true < -1) | (self.control_a_true > 1)).any():
            raise DataError("control_a_true must be 0 or 1")
        if ((self.control_b_prob < -1) | (self.control_b_prob > 1)).any():
            raise DataError("control_b_prob must be 0 or 1 (a degenerate design rate)")
        has_ans = self.control_answer != -1
        complete = (self.control_a_true != -1) & (self.control_b_prob != -1)
        if (has_ans & ~complete).any():
            raise DataError(
                "rows with a control_answer must also carry control_a_true "
                "and control_b_prob"
            )
        with np.errstate(invalid="ignore"):
            bad_time = ~np.isnan(self.time_minutes) & (self.time_minutes <= 0.0)
        if bad_time.any():
            raise DataError("time_minutes must be positive")

    # -- sequence protocol -------------------------------------------

    def __len__(self) -> int:
        return len(self.answer)

    def __getitem__(self, index):
        if isinstance(index, slice):
            return self.take(np.arange(len(self))[index])
        i = int(index)

        def opt(col, missing=-1):
            v = col[i]
            return None if v == missing else int(v)

        t = float(self.time_minutes[i])
        return Respondent(
            answer=int(self.answer[i]),
            subsample=int(self.subsample[i]),
            control_answer=opt(self.control_answer),
            control_a_true=opt(self.control_a_true),
            control_b_prob=opt(self.control_b_prob),
            time_minutes=None if np.isnan(t) else t,
            respondent_id=None if self.respondent_id is None else self.respondent_id[i],
            latent_class=_CLASS_NAMES.get(int(self.latent_class[i])),
        )

    def __iter__(self) -> Iterator[Respondent]:
        for i in range(len(self)):
            yield self[i]

    # -- selection ---------------------------------------------------

    def take(self, indices) -> "RecordSet":
        """Rows at ``indices`` (with repetition allowed), keeping all
        columns of a row together."""
        idx = np.asarray(indices, dtype=np.intp)
        return RecordSet(
            answer=self.answer[idx],
            subsample=self.subsample[idx],
            control_answer=self.control_answer[idx],
            control_a_true=self.control_a_true[idx],
            control_b_prob=self.control_b_prob[idx],
            time_minutes=self.time_minutes[idx],
            respondent_id=None if self.respondent_id is None else self.respondent_id[idx],
            latent_class=self.latent_class[idx],
        )

    def where(self, mask) -> "RecordSet":
        """Rows selected by a boolean mask."""
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != (len(self),):
            raise DataError("selection mask length does not match the survey")
        return self.take(np.flatnonzero(mask))

    # -- derived columns ---------------------------------------------

    @property
    def has_control(self) -> np.ndarray:
        """Boolean mask of rows carrying a complete control item."""
        return (
            (self.control_answer != -1)
            & (self.control_a_true != -1)
            & (self.control_b_prob != -1)
        )

    @property
    def has_time(self) -> np.ndarray:
        return ~np.isnan(self.time_minutes)
