import io
import json
import logging
import math
import os
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from models.belief import BeliefError, BinGrid, SocialHistogram
from models.data_processor import DEFAULT_PADDING, RoundProcessor

logger = logging.getLogger(__name__)

FIELDS = [
    'round_id', 'user_id', 'asset_id', 'pre_social', 'post_social',
    'si_edges', 'si_counts', 'confidence',
]
FORMATS = ('delimited', 'line_structured')


class IngestError(ValueError):
    """Raised when an input file cannot be parsed"""


class RecordError(ValueError):
    """Raised when a record violates its invariants"""


@dataclass(frozen=True)
class PredictionRecord:
    round_id: str
    user_id: str
    asset_id: str
    pre_social: float
    post_social: float
    si: SocialHistogram
    confidence: int | None = None

    def __post_init__(self):
        for name in ('pre_social', 'post_social'):
            value = getattr(self, name)
            if not math.isfinite(value) or value <= 0:
                raise RecordError(f"{name} must be a positive price, got {value}")
        if self.confidence is not None and not 1 <= self.confidence <= 5:
            raise RecordError(f"confidence must lie in 1..5, got {self.confidence}")


@dataclass
class IngestResult:
    rounds: dict = field(default_factory=dict)
    rejected: int = 0

    @property
    def records(self):
        return [record for records in self.rounds.values() for record in records]


def _format_float(value):
    return repr(float(value))


def _format_list(values, integer=False):
    items = [str(int(v)) if integer else _format_float(v) for v in values]
    return '[' + ','.join(items) + ']'


def _parse_list(value):
    if isinstance(value, str):
        value = json.loads(value)
    if not isinstance(value, list) or not value:
        raise ValueError(f"expected a non-empty list, got {value!r}")
    return [float(v) for v in value]


def _parse_confidence(value):
    if value is None or value == '':
        return None
    number = float(value)
    if number != int(number):
        raise ValueError(f"confidence must be an integer, got {value!r}")
    return int(number)


def _grid_from_edges(edges, bin_count):
    if len(edges) != bin_count + 1:
        raise ValueError(f"si_edges needs {bin_count + 1} values for {bin_count} counts, got {len(edges)}")
    grid = BinGrid(edges[0], edges[-1], bin_count)
    if not np.allclose(np.diff(edges), grid.width, rtol=1e-6, atol=0.0):
        raise ValueError("si_edges must be uniformly spaced")
    return grid


class PredictionDataManager:
    """Reads, validates and writes pre/post-social prediction records"""

    def __init__(self, bins=None, padding_fraction=DEFAULT_PADDING):
        self.processor = RoundProcessor(bins=bins, padding_fraction=padding_fraction)
        self.rounds = {}
        self.rejected_rows = 0

    def _record_from_fields(self, fields, line_number):
        """Build one record; malformed rows raise, invalid values are rejected"""
        try:
            counts = _parse_list(fields['si_counts'])
            edges = _parse_list(fields['si_edges'])
            pre_social = float(fields['pre_social'])
            post_social = float(fields['post_social'])
            confidence = _parse_confidence(fields.get('confidence'))
            round_id, user_id, asset_id = (str(fields[key]) for key in ('round_id', 'user_id', 'asset_id'))
        except (KeyError, TypeError, ValueError) as e:
            raise IngestError(f"line {line_number}: malformed row: {e}") from e

        try:
            grid = _grid_from_edges(edges, len(counts))
            histogram = SocialHistogram(grid, counts)
            return PredictionRecord(round_id, user_id, asset_id, pre_social, post_social, histogram, confidence)
        except (BeliefError, RecordError, ValueError) as e:
            logger.warning("Rejected line %d: %s", line_number, e)
            return None

    def _read_delimited(self, source):
        try:
            frame = pd.read_csv(source, dtype=str, keep_default_na=False, skip_blank_lines=False).fillna('')
        except pd.errors.EmptyDataError:
            return []
        except pd.errors.ParserError as e:
            raise IngestError(f"malformed delimited input: {e}") from e

        missing = [name for name in FIELDS if name not in frame.columns and name != 'confidence']
        if missing:
            raise IngestError(f"line 1: header is missing columns {', '.join(missing)}")
        # Line 1 is the header; blank lines are read as empty rows so numbering follows the file
        return [
            (index + 2, row) for index, row in enumerate(frame.to_dict('records'))
            if any(str(value).strip() for value in row.values())
        ]

    def _read_lines(self, source):
        if isinstance(source, (str, os.PathLike)):
            with open(source, 'r', encoding='utf-8') as f:
                lines = f.read().splitlines()
        else:
            lines = source.read().splitlines()

        rows = []
        for line_number, line in enumerate(lines, start=1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as e:
                raise IngestError(f"line {line_number}: malformed row: {e}") from e
            if not isinstance(row, dict):
                raise IngestError(f"line {line_number}: malformed row: expected an object")
            rows.append((line_number, row))
        return rows

    def ingest(self, source, format='delimited'):
        """Load records from a path or stream, grouped by round in first-appearance order"""
        if format not in FORMATS:
            raise IngestError(f"unknown format {format!r}, expected one of {FORMATS}")
        rows = self._read_delimited(source) if format == 'delimited' else self._read_lines(source)

        grouped = {}
        rejected = 0
        for line_number, fields in rows:
            record = self._record_from_fields(fields, line_number)
            if record is None:
                rejected += 1
                continue
            grouped.setdefault(record.round_id, []).append(record)

        if not rows:
            logger.warning("No prediction records found in input")
        if rejected:
            logger.warning("Rejected %d of %d rows", rejected, len(rows))

        self.rounds = {round_id: self.processor.normalize_round(records) for round_id, records in grouped.items()}
        self.rejected_rows = rejected
        logger.info("Loaded %d records in %d rounds", sum(map(len, self.rounds.values())), len(self.rounds))
        return IngestResult(self.rounds, rejected)

    def _rows(self, rounds):
        for records in rounds.values():
            for record in records:
                yield record

    def serialize(self, rounds, destination, format='delimited'):
        """Write records in the same layout ingest reads"""
        if format not in FORMATS:
            raise IngestError(f"unknown format {format!r}, expected one of {FORMATS}")
        if format == 'delimited':
            rows = [{
                'round_id': record.round_id,
                'user_id': record.user_id,
                'asset_id': record.asset_id,
                'pre_social': _format_float(record.pre_social),
                'post_social': _format_float(record.post_social),
                'si_edges': _format_list(record.si.grid.edges),
                'si_counts': _format_list(record.si.counts, integer=True),
                'confidence': '' if record.confidence is None else str(record.confidence),
            } for record in self._rows(rounds)]
            text = pd.DataFrame(rows, columns=FIELDS).to_csv(index=False, lineterminator='\n')
        else:
            lines = [json.dumps({
                'round_id': record.round_id,
                'user_id': record.user_id,
                'asset_id': record.asset_id,
                'pre_social': float(record.pre_social),
                'post_social': float(record.post_social),
                'si_edges': [float(edge) for edge in record.si.grid.edges],
                'si_counts': [int(count) for count in record.si.counts],
                'confidence': record.confidence,
            }) for record in self._rows(rounds)]
            text = ''.join(line + '\n' for line in lines)

        if isinstance(destination, (str, os.PathLike)):
            with open(destination, 'w', encoding='utf-8', newline='') as f:
                f.write(text)
        else:
            destination.write(text)
        logger.info("Wrote %d records (%s)", sum(map(len, rounds.values())), format)
        return text

    def export_data(self, format='delimited'):
        """Serialize the loaded rounds to a string"""
        return self.serialize(self.rounds, io.StringIO(), format)
