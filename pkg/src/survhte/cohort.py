"""Cohort representation, validation, counting-process expansion, CSV I/O.

A cohort is a sample of subjects, each carrying a covariate vector, a
binary treatment flag, a positive integer observed time (the minimum of
event and censoring time on the discrete grid), and an event flag.
Observed times may exceed the follow-up horizon; everything after the
horizon is ignored at expansion time.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .exceptions import CohortValidationError

CSV_FIXED_COLUMNS = ("id", "time", "event", "treatment")


@dataclass(frozen=True)
class Subject:
    """One observation: covariates, treatment, observed time, event flag."""

    id: str
    x: np.ndarray
    a: int
    t_obs: int
    y: int


@dataclass(frozen=True)
class Cohort:
    """Immutable array-backed sample of subjects.

    ``x`` is (n, dim); ``a`` and ``y`` are 0/1 integer vectors; ``t_obs``
    holds positive integer observed times, possibly beyond ``horizon``.
    """

    ids: tuple
    x: np.ndarray
    a: np.ndarray
    t_obs: np.ndarray
    y: np.ndarray
    horizon: int
    feature_names: tuple

    @property
    def n(self) -> int:
        return len(self.ids)

    @property
    def dim(self) -> int:
        return self.x.shape[1]

    @property
    def subjects(self) -> list[Subject]:
        return [
            Subject(self.ids[i], self.x[i], int(self.a[i]),
                    int(self.t_obs[i]), int(self.y[i]))
            for i in range(self.n)
        ]

    def subset(self, indices, id_suffix: str = "") -> "Cohort":
        """New cohort keeping ``indices`` (repeats allowed for bootstrap).

        When indices repeat, ids are made unique again with a positional
        suffix so the result still satisfies the cohort invariants.
        """
        idx = np.asarray(indices)
        if id_suffix or len(set(idx.tolist())) < len(idx):
            ids = tuple(f"{self.ids[j]}{id_suffix}#{k}" for k, j in enumerate(idx))
        else:
            ids = tuple(self.ids[j] for j in idx)
        return Cohort(ids, self.x[idx], self.a[idx], self.t_obs[idx],
                      self.y[idx], self.horizon, self.feature_names)


@dataclass(frozen=True)
class PersonPeriodTable:
    """Counting-process expansion: one binary-outcome row per at-risk period.

    Row ordering is by subject (cohort order), then period 1..min(t_obs,
    horizon). ``subject_index`` points back into the cohort arrays.
    """

    subject_index: np.ndarray
    t: np.ndarray
    event: np.ndarray
    horizon: int
    n_subjects: int

    @property
    def n_rows(self) -> int:
        return len(self.t)


def validate_cohort(rows: Iterable[Subject | tuple], horizon: int,
                    feature_names: Sequence[str] | None = None) -> Cohort:
    """Check raw subject rows and assemble a Cohort.

    Accepts Subject instances or (id, x, a, t_obs, y) tuples. All
    violations are collected and reported together via
    CohortValidationError; the row index in each violation is the
    position in the input iterable.
    """
    rows = list(rows)
    violations = []
    if horizon < 1:
        violations.append((-1, "horizon >= 1"))
    if not rows:
        violations.append((-1, "cohort non-empty"))
        raise CohortValidationError(violations)

    parsed = []
    for i, row in enumerate(rows):
        if isinstance(row, Subject):
            rid, x, a, t_obs, y = row.id, row.x, row.a, row.t_obs, row.y
        else:
            rid, x, a, t_obs, y = row
        parsed.append((str(rid), np.asarray(x, dtype=np.float64), a, t_obs, y))

    dim = parsed[0][1].shape[0] if parsed[0][1].ndim == 1 else -1
    seen = {}
    for i, (rid, x, a, t_obs, y) in enumerate(parsed):
        if rid in seen:
            violations.append((i, "ids unique"))
        seen[rid] = i
        if x.ndim != 1 or (dim >= 0 and x.shape[0] != dim):
            violations.append((i, "covariate length equals cohort dimension"))
        elif not np.all(np.isfinite(x)):
            violations.append((i, "covariates finite"))
        if a not in (0, 1):
            violations.append((i, "a in {0,1}"))
        if y not in (0, 1):
            violations.append((i, "y in {0,1}"))
        if not (isinstance(t_obs, (int, np.integer)) and t_obs >= 1):
            violations.append((i, "t_obs >= 1"))
    if violations:
        raise CohortValidationError(violations)

    names = tuple(feature_names) if feature_names is not None else \
        tuple(f"x{j + 1}" for j in range(dim))
    if len(names) != dim:
        raise CohortValidationError([(-1, "feature_names length equals dimension")])
    return Cohort(
        ids=tuple(p[0] for p in parsed),
        x=np.vstack([p[1] for p in parsed]) if dim > 0 else np.empty((len(parsed), 0)),
        a=np.array([p[2] for p in parsed], dtype=np.int8),
        t_obs=np.array([p[3] for p in parsed], dtype=np.int64),
        y=np.array([p[4] for p in parsed], dtype=np.int8),
        horizon=int(horizon),
        feature_names=names,
    )


def expand_counting_process(cohort: Cohort, horizon: int | None = None) -> PersonPeriodTable:
    """Expand a cohort into person-period rows.

    Subject i contributes min(t_obs_i, horizon) rows for periods 1, 2, ...;
    the event flag is 1 only on the last row and only when the event was
    observed at or before the horizon. Deterministic and order-preserving.
    """
    theta = int(horizon) if horizon is not None else cohort.horizon
    if theta < 1:
        raise ValueError("horizon must be >= 1")
    m = np.minimum(cohort.t_obs, theta)
    total = int(m.sum())
    subject_index = np.repeat(np.arange(cohort.n), m)
    t = np.concatenate([np.arange(1, mi + 1) for mi in m]) if total else \
        np.empty(0, dtype=np.int64)
    event = np.zeros(total, dtype=np.int8)
    last = np.cumsum(m) - 1
    observed = (cohort.y == 1) & (cohort.t_obs <= theta)
    event[last[observed]] = 1
    return PersonPeriodTable(subject_index=subject_index, t=t.astype(np.int64),
                             event=event, horizon=theta, n_subjects=cohort.n)


def collapse_person_periods(table: PersonPeriodTable) -> tuple[np.ndarray, np.ndarray]:
    """Inverse of expansion: per-subject (last period, event flag)."""
    t_last = np.zeros(table.n_subjects, dtype=np.int64)
    y = np.zeros(table.n_subjects, dtype=np.int8)
    np.maximum.at(t_last, table.subject_index, table.t)
    np.maximum.at(y, table.subject_index, table.event)
    return t_last, y


def read_cohort_csv(path, horizon: int) -> Cohort:
    """Parse the cohort CSV schema ``id,time,event,treatment,x1,...,xJ``.

    Parsing is strict: a malformed cell aborts with the offending row
    number (1-based, header excluded) in the error.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CohortValidationError([(-1, "missing header")]) from None
        header = [h.strip() for h in header]
        for col in CSV_FIXED_COLUMNS:
            if col not in header:
                raise CohortValidationError([(-1, f"missing column '{col}'")])
        if tuple(header[:4]) != CSV_FIXED_COLUMNS:
            raise CohortValidationError(
                [(-1, f"columns must start with {','.join(CSV_FIXED_COLUMNS)}")])
        feature_names = header[4:]
        rows = []
        for rownum, rec in enumerate(reader, start=1):
            if len(rec) != len(header):
                raise CohortValidationError(
                    [(rownum, f"expected {len(header)} cells, got {len(rec)}")])
            try:
                t_obs = int(rec[1])
                event = int(rec[2])
                treatment = int(rec[3])
                x = np.array([float(v) for v in rec[4:]], dtype=np.float64)
            except ValueError as exc:
                raise CohortValidationError([(rownum, f"malformed cell: {exc}")]) from None
            rows.append((rec[0], x, treatment, t_obs, event))
    return validate_cohort(rows, horizon, feature_names)


def write_cohort_csv(path, cohort: Cohort) -> None:
    """Emit a cohort in the CSV schema accepted by ``read_cohort_csv``."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(CSV_FIXED_COLUMNS) + list(cohort.feature_names))
        for i in range(cohort.n):
            writer.writerow(
                [cohort.ids[i], int(cohort.t_obs[i]), int(cohort.y[i]),
                 int(cohort.a[i])] + [repr(float(v)) for v in cohort.x[i]])
