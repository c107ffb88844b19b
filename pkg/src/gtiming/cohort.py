"""Subject records, cohort datasets, validation and CSV serialization.

All times are in months. A subject starts course 1 at time zero and is followed
until the first of death, start of course 2, or censoring (waiting time ``w1``
with event code ``delta1``); subjects who start course 2 are followed until
death or censoring (waiting time ``w2`` with indicator ``delta2``).
"""
import enum
from functools import cached_property
import logging
from typing import Iterable, List, Mapping, Optional, Sequence

import attr
import numpy as np
import pandas as pd

from .errors import CohortParseError, CohortValidationError
from .util import atomic_write, binary_validator


LOG = logging.getLogger(__name__)

#: CSV header, in order
COLUMNS = ('id', 'l1', 'a1', 'w1', 'delta1', 'l2', 'a2', 'w2', 'delta2')
COURSE2_COLUMNS = COLUMNS[5:]


class FirstEvent(enum.IntEnum):
    """Event ending the first waiting time (``delta1``)."""
    CENSORED = -1
    DEATH = 0
    NEXT_COURSE = 1


@attr.s(frozen=True, slots=True)
class SecondCourse:
    l2: int = attr.ib(converter=int, validator=binary_validator)
    a2: int = attr.ib(converter=int, validator=binary_validator)
    w2: float = attr.ib(converter=float)
    #: 1 = death, 0 = censored
    delta2: int = attr.ib(converter=int, validator=binary_validator)


@attr.s(frozen=True, slots=True)
class SubjectRecord:
    id: int = attr.ib(converter=int)
    l1: int = attr.ib(converter=int, validator=binary_validator)
    a1: int = attr.ib(converter=int, validator=binary_validator)
    w1: float = attr.ib(converter=float)
    delta1: int = attr.ib(converter=int, validator=attr.validators.in_([-1, 0, 1]))
    course2: Optional[SecondCourse] = attr.ib(
        default=None, validator=attr.validators.optional(attr.validators.instance_of(SecondCourse)))

    @property
    def total_time(self) -> float:
        """Observed follow-up time, ``w1 + w2`` after a second course and ``w1`` otherwise."""
        if self.course2 is None:
            return self.w1
        return self.w1 + self.course2.w2

    @property
    def observed_event(self) -> bool:
        """Death or second course (not censoring) ended the first waiting time."""
        return self.delta1 != FirstEvent.CENSORED

    @property
    def died(self) -> bool:
        if self.course2 is None:
            return self.delta1 == FirstEvent.DEATH
        return self.course2.delta2 == 1


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@attr.s(frozen=True, eq=False)
class CohortColumns:
    """Column-wise storage of a cohort.

    Second-course columns hold 0 (``w2``: NaN) for subjects without a second course.
    """
    id: np.ndarray = attr.ib(converter=lambda a: _frozen(np.asarray(a, dtype=np.int64)))
    l1: np.ndarray = attr.ib(converter=lambda a: _frozen(np.asarray(a, dtype=np.int8)))
    a1: np.ndarray = attr.ib(converter=lambda a: _frozen(np.asarray(a, dtype=np.int8)))
    w1: np.ndarray = attr.ib(converter=lambda a: _frozen(np.asarray(a, dtype=float)))
    delta1: np.ndarray = attr.ib(converter=lambda a: _frozen(np.asarray(a, dtype=np.int8)))
    course2: np.ndarray = attr.ib(converter=lambda a: _frozen(np.asarray(a, dtype=bool)))
    l2: np.ndarray = attr.ib(converter=lambda a: _frozen(np.asarray(a, dtype=np.int8)))
    a2: np.ndarray = attr.ib(converter=lambda a: _frozen(np.asarray(a, dtype=np.int8)))
    w2: np.ndarray = attr.ib(converter=lambda a: _frozen(np.asarray(a, dtype=float)))
    delta2: np.ndarray = attr.ib(converter=lambda a: _frozen(np.asarray(a, dtype=np.int8)))

    @id.validator
    def _check_lengths(self, attrib, value):
        lengths = {len(value)} | {len(getattr(self, a.name)) for a in attr.fields(type(self))[1:]}
        if len(lengths) != 1:
            raise ValueError(f"cohort columns differ in length: {sorted(lengths)}")

    def take(self, indices) -> "CohortColumns":
        return CohortColumns(**{a.name: getattr(self, a.name)[indices] for a in attr.fields(type(self))})


@attr.s(frozen=True)
class CohortMeta:
    scenario: Optional[str] = attr.ib(default=None)
    seed: Optional[int] = attr.ib(default=None)


@attr.s(frozen=True, eq=False)
class CohortDataset:
    columns: CohortColumns = attr.ib(validator=attr.validators.instance_of(CohortColumns))
    meta: CohortMeta = attr.ib(factory=CohortMeta)

    @classmethod
    def from_records(cls, records: Iterable[SubjectRecord], meta: CohortMeta = None) -> "CohortDataset":
        records = list(records)
        has2 = [r.course2 is not None for r in records]
        columns = CohortColumns(
            id=[r.id for r in records],
            l1=[r.l1 for r in records],
            a1=[r.a1 for r in records],
            w1=[r.w1 for r in records],
            delta1=[r.delta1 for r in records],
            course2=has2,
            l2=[r.course2.l2 if h else 0 for r, h in zip(records, has2)],
            a2=[r.course2.a2 if h else 0 for r, h in zip(records, has2)],
            w2=[r.course2.w2 if h else np.nan for r, h in zip(records, has2)],
            delta2=[r.course2.delta2 if h else 0 for r, h in zip(records, has2)],
        )
        dataset = cls(columns, meta or CohortMeta())
        # Keep the caller's objects rather than rebuilding them
        dataset.__dict__['records'] = records
        return dataset

    @property
    def n(self) -> int:
        return len(self.columns.id)

    def __len__(self):
        return self.n

    @cached_property
    def records(self) -> List[SubjectRecord]:
        c = self.columns
        out = []
        for i in range(self.n):
            course2 = None
            if c.course2[i]:
                course2 = SecondCourse(l2=c.l2[i], a2=c.a2[i], w2=c.w2[i], delta2=c.delta2[i])
            out.append(SubjectRecord(id=c.id[i], l1=c.l1[i], a1=c.a1[i], w1=c.w1[i], delta1=c.delta1[i],
                                     course2=course2))
        return out

    @cached_property
    def total_time(self) -> np.ndarray:
        c = self.columns
        return _frozen(np.where(c.course2, c.w1 + np.nan_to_num(c.w2), c.w1))

    @cached_property
    def observed_event(self) -> np.ndarray:
        return _frozen(self.columns.delta1 != FirstEvent.CENSORED)

    def fields(self) -> Mapping[str, np.ndarray]:
        """Covariate fields for model design matrices.

        Second-course fields are NaN for subjects without a second course.
        """
        c = self.columns
        missing = ~c.course2
        return {
            'l1': c.l1.astype(float),
            'a1': c.a1.astype(float),
            'w1': c.w1,
            'l2': np.where(missing, np.nan, c.l2),
            'a2': np.where(missing, np.nan, c.a2),
            'w2': c.w2,
        }

    def take(self, indices: Sequence[int]) -> "CohortDataset":
        """Cohort of the subjects at *indices* (repeats allowed), with ids renumbered from 0."""
        columns = self.columns.take(np.asarray(indices, dtype=np.int64))
        columns = attr.evolve(columns, id=np.arange(len(columns.id)))
        return CohortDataset(columns, self.meta)

    def subset(self, mask) -> "CohortDataset":
        """Cohort of the subjects selected by boolean *mask*, keeping their ids."""
        return CohortDataset(self.columns.take(np.flatnonzero(mask)), self.meta)


@attr.s(frozen=True)
class EstimandSpec:
    """Target P(T^{a1,a2} > tau)."""
    a1_target: int = attr.ib(default=1, converter=int, validator=binary_validator)
    a2_target: int = attr.ib(default=1, converter=int, validator=binary_validator)
    tau: float = attr.ib(default=15.0, converter=float)

    @tau.validator
    def _check_tau(self, attrib, value):
        if not value >= 0 or not np.isfinite(value):
            raise ValueError(f"tau must be a finite non-negative number of months (got {value!r})")

    def at(self, tau: float) -> "EstimandSpec":
        return attr.evolve(self, tau=tau)


@attr.s(frozen=True)
class Violation:
    subject: int = attr.ib()
    message: str = attr.ib()

    def __str__(self):
        return f"subject {self.subject}: {self.message}"


def validate(dataset: CohortDataset) -> List[Violation]:
    """Check every subject record invariant; returns an empty list for a valid cohort."""
    c = dataset.columns
    checks = [
        ((c.delta1 != FirstEvent.NEXT_COURSE) & c.course2, "course2 forbidden"),
        ((c.delta1 == FirstEvent.NEXT_COURSE) & ~c.course2, "course2 required"),
        (~np.isin(c.delta1, [-1, 0, 1]), "delta1 must be -1, 0 or 1"),
        (~(np.isfinite(c.w1) & (c.w1 > 0)), "w1 must be positive"),
        (c.course2 & ~(np.isfinite(c.w2) & (c.w2 > 0)), "w2 must be positive"),
        (~np.isin(c.l1, [0, 1]) | ~np.isin(c.a1, [0, 1]), "l1 and a1 must be binary"),
        (c.course2 & (~np.isin(c.l2, [0, 1]) | ~np.isin(c.a2, [0, 1]) | ~np.isin(c.delta2, [0, 1])),
         "l2, a2 and delta2 must be binary"),
    ]
    violations = []
    for mask, message in checks:
        violations.extend(Violation(int(i), message) for i in c.id[mask])
    ids, counts = np.unique(c.id, return_counts=True)
    violations.extend(Violation(int(i), "duplicate id") for i in ids[counts > 1])
    return violations


def _cell(value: str, row: int, column: str, parse):
    try:
        return parse(value)
    except (TypeError, ValueError) as e:
        raise CohortParseError(f"cannot parse {value!r}: {e}", row=row, column=column) from e


def _binary(value: str) -> int:
    v = int(value)
    if v not in (0, 1):
        raise ValueError("expected 0 or 1")
    return v


def _first_event(value: str) -> int:
    return int(FirstEvent(int(value)))


def read_csv(path) -> CohortDataset:
    """Read a cohort CSV file.

    Rows are numbered from 1 for the first data row. Raises :exc:`CohortParseError` for a malformed cell
    and :exc:`CohortValidationError` if the parsed records break an invariant.
    """
    # One spare column catches rows with too many fields instead of pandas taking them as an index
    width = len(COLUMNS)
    raw = pd.read_csv(path, dtype=str, keep_default_na=False, header=None, index_col=False,
                      names=list(range(width + 1))).fillna('')
    header = tuple(c.strip() for c in raw.iloc[0]) if len(raw) else ()
    if header[:width] != COLUMNS or header[width:] != ('',):
        missing = [c for c in COLUMNS if c not in header]
        raise CohortParseError(f"header must be {','.join(COLUMNS)}", row=0,
                               column=missing[0] if missing else header[width] or header[0])

    records = []
    for row, values in enumerate(raw.iloc[1:].itertuples(index=False, name=None), start=1):
        if values[width].strip():
            raise CohortParseError(f"expected {width} fields", row=row, column=None)
        cells = dict(zip(COLUMNS, (v.strip() for v in values[:width])))
        course2 = None
        filled = [c for c in COURSE2_COLUMNS if cells[c] != '']
        if filled:
            if len(filled) != len(COURSE2_COLUMNS):
                empty = next(c for c in COURSE2_COLUMNS if cells[c] == '')
                raise CohortParseError("second-course columns must be all empty or all set", row=row, column=empty)
            course2 = SecondCourse(
                l2=_cell(cells['l2'], row, 'l2', _binary),
                a2=_cell(cells['a2'], row, 'a2', _binary),
                w2=_cell(cells['w2'], row, 'w2', float),
                delta2=_cell(cells['delta2'], row, 'delta2', _binary),
            )
        records.append(SubjectRecord(
            id=_cell(cells['id'], row, 'id', int),
            l1=_cell(cells['l1'], row, 'l1', _binary),
            a1=_cell(cells['a1'], row, 'a1', _binary),
            w1=_cell(cells['w1'], row, 'w1', float),
            delta1=_cell(cells['delta1'], row, 'delta1', _first_event),
            course2=course2,
        ))

    dataset = CohortDataset.from_records(records)
    violations = validate(dataset)
    if violations:
        raise CohortValidationError(violations)
    LOG.debug("read %d subjects from %s", dataset.n, path)
    return dataset


def _fmt_float(x: float) -> str:
    return repr(float(x))


def write_csv(dataset: CohortDataset, path):
    """Write *dataset* as CSV; floats are written in their shortest round-trip form."""
    c = dataset.columns
    has2 = c.course2
    frame = pd.DataFrame({
        'id': c.id.astype(str),
        'l1': c.l1.astype(str),
        'a1': c.a1.astype(str),
        'w1': [_fmt_float(x) for x in c.w1],
        'delta1': c.delta1.astype(str),
        'l2': np.where(has2, c.l2.astype(str), ''),
        'a2': np.where(has2, c.a2.astype(str), ''),
        'w2': [_fmt_float(x) if h else '' for x, h in zip(c.w2, has2)],
        'delta2': np.where(has2, c.delta2.astype(str), ''),
    }, columns=list(COLUMNS))
    with atomic_write(path, newline='') as f:
        frame.to_csv(f, index=False)
