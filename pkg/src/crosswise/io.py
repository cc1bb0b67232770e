"""Survey CSV and config file handling.

The survey format is a UTF-8 CSV with a header row and these columns:

    respondent_id, answer, subsample, control_answer,
    control_a_true, control_b_prob, time_minutes

``respondent_id``, ``answer`` (literal ``DIFFERENT`` or ``SAME``) and
``subsample`` (``1`` or ``2``) are mandatory.  The three control
columns and ``time_minutes`` are optional per survey: a survey either
carries a column or omits it entirely.  Within a carried control
column, individual rows may be blank (respondent skipped the control
item) — but a row must answer all three control fields or none of
them.  Value problems are reported with the file's line number, where
the header is line 1.

Config files are flat ``key = value`` documents in TOML syntax; nested
tables are rejected so that a config echo in the report can reproduce
the file faithfully.
"""

from __future__ import annotations

import csv

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

import numpy as np

from .errors import ConfigError, DataError
from .records import DIFFERENT, SAME, RecordSet

__all__ = [
    "SURVEY_COLUMNS",
    "read_survey",
    "write_survey",
    "read_config",
]

SURVEY_COLUMNS = (
    "respondent_id",
    "answer",
    "subsample",
    "control_answer",
    "control_a_true",
    "control_b_prob",
    "time_minutes",
)
_MANDATORY = ("respondent_id", "answer", "subsample")
_CONTROL = ("control_answer", "control_a_true", "control_b_prob")

_ANSWER_CODES = {"DIFFERENT": DIFFERENT, "SAME": SAME}
_ANSWER_NAMES = {DIFFERENT: "DIFFERENT", SAME: "SAME"}


def _parse_answer(cell: str, line: int, column: str) -> int:
    try:
        return _ANSWER_CODES[cell]
    except KeyError:
        raise DataError(
            f"line {line}: {column} must be DIFFERENT or SAME, got {cell!r}"
        ) from None


def _parse_binary(cell: str, line: int, column: str) -> int:
    if cell not in ("0", "1"):
        raise DataError(f"line {line}: {column} must be 0 or 1, got {cell!r}")
    return int(cell)


def read_survey(path) -> RecordSet:
    """Parse a survey CSV into a row set, with line-numbered errors."""
    with open(path, encoding="utf-8-sig", newline="") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: file is empty") from None
        header = [name.strip() for name in header]
        unknown = [name for name in header if name not in SURVEY_COLUMNS]
        if unknown:
            raise ConfigError(
                f"{path}: unknown column {unknown[0]!r}; expected columns "
                f"from {', '.join(SURVEY_COLUMNS)}"
            )
        if len(set(header)) != len(header):
            raise ConfigError(f"{path}: duplicated column in header")
        missing = [name for name in _MANDATORY if name not in header]
        if missing:
            raise ConfigError(f"{path}: missing required column {missing[0]!r}")
        has_control_cols = any(name in header for name in _CONTROL)
        if has_control_cols and not all(name in header for name in _CONTROL):
            absent = next(name for name in _CONTROL if name not in header)
            raise ConfigError(
                f"{path}: control columns travel together; missing {absent!r}"
            )
        has_time_col = "time_minutes" in header
        position = {name: header.index(name) for name in header}

        ids: list[str] = []
        answers: list[int] = []
        arms: list[int] = []
        control_answers: list[int] = []
        control_a: list[int] = []
        control_b: list[int] = []
        times: list[float] = []

        for line, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise DataError(
                    f"line {line}: expected {len(header)} fields, got {len(row)}"
                )
            cells = {name: row[position[name]].strip() for name in header}
            if cells["respondent_id"] == "":
                raise DataError(f"line {line}: respondent_id is blank")
            ids.append(cells["respondent_id"])
            answers.append(_parse_answer(cells["answer"], line, "answer"))
            if cells["subsample"] not in ("1", "2"):
                raise DataError(
                    f"line {line}: subsample must be 1 or 2, "
                    f"got {cells['subsample']!r}"
                )
            arms.append(int(cells["subsample"]))

            if has_control_cols:
                blank = [name for name in _CONTROL if cells[name] == ""]
                if len(blank) not in (0, len(_CONTROL)):
                    raise DataError(
                        f"line {line}: control fields must be answered "
                        f"together or left blank together"
                    )
                if blank:
                    control_answers.append(-1)
                    control_a.append(-1)
                    control_b.append(-1)
                else:
                    control_answers.append(
                        _parse_answer(
                            cells["control_answer"], line, "control_answer"
                        )
                    )
                    control_a.append(
                        _parse_binary(
                            cells["control_a_true"], line, "control_a_true"
                        )
                    )
                    control_b.append(
                        _parse_binary(
                            cells["control_b_prob"], line, "control_b_prob"
                        )
                    )

            if has_time_col:
                cell = cells["time_minutes"]
                if cell == "":
                    times.append(np.nan)
                else:
                    try:
                        value = float(cell)
                    except ValueError:
                        raise DataError(
                            f"line {line}: time_minutes must be a decimal "
                            f"number of minutes, got {cell!r}"
                        ) from None
                    if not np.isfinite(value) or value <= 0.0:
                        raise DataError(
                            f"line {line}: time_minutes must be positive, "
                            f"got {cell!r}"
                        )
                    times.append(value)

    if not answers:
        raise DataError(f"{path}: no data rows")
    return RecordSet(
        answer=np.array(answers),
        subsample=np.array(arms),
        control_answer=np.array(control_answers) if has_control_cols else None,
        control_a_true=np.array(control_a) if has_control_cols else None,
        control_b_prob=np.array(control_b) if has_control_cols else None,
        time_minutes=np.array(times) if has_time_col else None,
        respondent_id=np.array(ids),
    )


def write_survey(records: RecordSet, path) -> None:
    """Write a row set as a survey CSV, omitting absent columns."""
    with_control = records.control_answer is not None and bool(
        (records.control_answer != -1).any()
    )
    with_time = records.time_minutes is not None and records.has_time.any()
    header = ["respondent_id", "answer", "subsample"]
    if with_control:
        header += list(_CONTROL)
    if with_time:
        header.append("time_minutes")

    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        for i in range(len(records)):
            if records.respondent_id is None:
                rid = f"r{i + 1:06d}"
            else:
                rid = str(records.respondent_id[i])
            row = [
                rid,
                _ANSWER_NAMES[int(records.answer[i])],
                str(int(records.subsample[i])),
            ]
            if with_control:
                if records.control_answer[i] == -1:
                    row += ["", "", ""]
                else:
                    row += [
                        _ANSWER_NAMES[int(records.control_answer[i])],
                        str(int(records.control_a_true[i])),
                        str(int(records.control_b_prob[i])),
                    ]
            if with_time:
                value = records.time_minutes[i]
                row.append("" if np.isnan(value) else repr(float(value)))
            writer.writerow(row)


def read_config(path) -> dict:
    """Parse a flat ``key = value`` TOML document into a dict."""
    try:
        with open(path, "rb") as handle:
            parsed = tomllib.load(handle)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    for key, value in parsed.items():
        if isinstance(value, dict):
            raise ConfigError(
                f"{path}: config must be flat key = value lines; "
                f"[{key}] is a table"
            )
    return parsed
