"""Per-round model comparison: MAE, best baseline and improvement."""

import json
import logging
import os
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from sklearn.metrics import mean_absolute_error, mean_absolute_percentage_error

from models.data_processor import RoundProcessor
from models.update_models import run_model

logger = logging.getLogger(__name__)

MAE_MODES = ('relative_percent', 'absolute')
PRIMARY_MODEL = 'social_bayesian'


class EvaluationError(ValueError):
    """Raised when predictions cannot be scored or reports assembled"""


def mae(predicted, actual, mode='relative_percent'):
    """Mean absolute error, optionally relative to the actual value in percent"""
    if mode not in MAE_MODES:
        raise EvaluationError(f"unknown MAE mode {mode!r}, expected one of {MAE_MODES}")
    predicted = np.asarray(predicted, dtype=float)
    actual = np.asarray(actual, dtype=float)
    if predicted.shape != actual.shape:
        raise EvaluationError(f"length mismatch: {predicted.size} predictions, {actual.size} actual values")
    if actual.size == 0:
        raise EvaluationError("no predictions to score")

    if mode == 'absolute':
        return float(mean_absolute_error(actual, predicted))
    if np.any(actual == 0):
        raise EvaluationError("relative MAE is undefined for a zero actual value")
    return 100.0 * float(mean_absolute_percentage_error(actual, predicted))


def improvement(error_new, error_baseline):
    """Improvement over the baseline, in percent; errors are given in percent"""
    if error_baseline >= 100:
        raise EvaluationError("undefined denominator: baseline error must be below 100%")
    if error_baseline < 0:
        raise EvaluationError("baseline error must be non-negative")
    return 100.0 * (error_baseline - error_new) / (1.0 - error_baseline / 100.0)


@dataclass
class RoundSlice:
    round_id: str
    mae: dict
    best_baseline: str | None = None
    improvement: float | None = None
    record_count: int = 0

    @classmethod
    def from_mae(cls, round_id, mae_by_model, primary=PRIMARY_MODEL, excluded=(), record_count=0):
        """Pick the best baseline and score the primary model against it"""
        skip = set(excluded) | {primary}
        baselines = [name for name in mae_by_model if name not in skip]
        best = min(baselines, key=lambda name: (mae_by_model[name], name)) if baselines else None

        gain = None
        if best is not None and primary in mae_by_model:
            try:
                gain = improvement(mae_by_model[primary], mae_by_model[best])
            except EvaluationError as e:
                logger.warning("Round %s: no improvement for %s: %s", round_id, primary, e)
        return cls(str(round_id), dict(mae_by_model), best, gain, record_count)


class ModelEvaluator:
    """Runs every model spec over a round and scores the point predictions"""

    def __init__(self, specs, processor=None, mae_mode='relative_percent', n_jobs=1):
        if not specs:
            raise EvaluationError("at least one model spec is required")
        self.specs = list(specs)
        self.processor = processor or RoundProcessor()
        self.mae_mode = mae_mode
        self.n_jobs = n_jobs

    @property
    def social_models(self):
        return [spec.label for spec in self.specs if spec.kind == 'social_bayesian']

    @property
    def primary(self):
        """The model scored against the best baseline"""
        social = self.social_models
        if PRIMARY_MODEL in social or not social:
            return PRIMARY_MODEL
        return social[0]

    @staticmethod
    def _predict(records, spec, context):
        return [run_model(record, spec, context).point_prediction for record in records]

    def predict_round(self, records, context=None):
        """Point predictions per model name, in record order"""
        context = context or self.processor.build_context(records)
        predictions = Parallel(n_jobs=self.n_jobs)(
            delayed(self._predict)(records, spec, context) for spec in self.specs
        )
        return {spec.label: values for spec, values in zip(self.specs, predictions)}

    def evaluate_round(self, records):
        if not records:
            raise EvaluationError("no records in round")
        round_id = records[0].round_id
        if any(record.round_id != round_id for record in records):
            raise EvaluationError("records span more than one round")

        records = self.processor.normalize_round(records)
        context = self.processor.build_context(records)
        actual = [record.post_social for record in records]
        predictions = self.predict_round(records, context)
        errors = {name: mae(values, actual, self.mae_mode) for name, values in predictions.items()}

        round_slice = RoundSlice.from_mae(round_id, errors, self.primary, excluded=self.social_models,
                                          record_count=len(records))
        logger.info("Round %s: %d records, best baseline %s, improvement %s",
                    round_id, len(records), round_slice.best_baseline, round_slice.improvement)
        return round_slice


def evaluate_round(records, specs, processor=None, mae_mode='relative_percent', n_jobs=1):
    return ModelEvaluator(specs, processor, mae_mode, n_jobs).evaluate_round(records)


@dataclass
class EvaluationReport:
    rounds: list
    mae: pd.DataFrame
    best_baseline: dict = field(default_factory=dict)
    improvement: dict = field(default_factory=dict)
    primary: str = PRIMARY_MODEL

    def to_table(self, decimals=2):
        """Models x rounds, followed by the best-baseline and improvement rows

        Cells are rounded to decimals for display. Improvement is rounded from the
        unrounded errors, so recomputing it from the rounded MAE cells can give a
        different value; to_lines keeps full precision.
        """
        table = self.mae.map(lambda value: '' if pd.isna(value) else f"{value:.{decimals}f}")
        table.loc['best_baseline'] = [self.best_baseline.get(r) or '' for r in self.rounds]
        table.loc['improvement'] = [
            '' if self.improvement.get(r) is None else f"{self.improvement[r]:.{decimals}f}" for r in self.rounds
        ]
        table.index.name = 'model'
        return table

    def to_delimited(self, destination, decimals=2):
        """Rounded table as delimited text; see to_table"""
        return self.to_table(decimals).to_csv(destination, lineterminator='\n')

    def to_lines(self, destination):
        """One JSON object per round, full precision"""
        lines = []
        for round_id in self.rounds:
            errors = self.mae[round_id].dropna()
            lines.append(json.dumps({
                'round_id': round_id,
                'mae': {name: float(value) for name, value in errors.items()},
                'best_baseline': self.best_baseline.get(round_id),
                'improvement': self.improvement.get(round_id),
                'primary': self.primary,
            }))
        text = ''.join(line + '\n' for line in lines)
        if isinstance(destination, (str, os.PathLike)):
            with open(destination, 'w', encoding='utf-8', newline='') as f:
                f.write(text)
        else:
            destination.write(text)
        return text

    @classmethod
    def from_lines(cls, source):
        if isinstance(source, (str, os.PathLike)):
            with open(source, 'r', encoding='utf-8') as f:
                lines = f.read().splitlines()
        else:
            lines = source.read().splitlines()

        slices = []
        primary = PRIMARY_MODEL
        for line_number, line in enumerate(lines, start=1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
                primary = row.get('primary', PRIMARY_MODEL)
                slices.append(RoundSlice(str(row['round_id']), row['mae'], row.get('best_baseline'),
                                         row.get('improvement')))
            except (json.JSONDecodeError, KeyError, TypeError) as e:
                raise EvaluationError(f"line {line_number}: malformed report row: {e}") from e
        return build_report(slices, primary)

    def figure_series(self):
        """Per-round primary-model MAE against the best baseline's MAE"""
        rows = []
        for round_id in self.rounds:
            best = self.best_baseline.get(round_id)
            rows.append({
                'round_id': round_id,
                self.primary: self.mae.at[self.primary, round_id] if self.primary in self.mae.index else np.nan,
                'best_baseline': best or '',
                'best_baseline_mae': self.mae.at[best, round_id] if best else np.nan,
            })
        return pd.DataFrame(rows, columns=['round_id', self.primary, 'best_baseline', 'best_baseline_mae'])


def build_report(slices, primary=PRIMARY_MODEL):
    """Assemble round slices into a models x rounds report, keeping round order"""
    slices = list(slices)
    if not slices:
        raise EvaluationError("no rounds to report")
    rounds = [s.round_id for s in slices]
    duplicates = sorted({r for r in rounds if rounds.count(r) > 1})
    if duplicates:
        raise EvaluationError(f"duplicate round identifiers: {', '.join(duplicates)}")

    models = []
    for s in slices:
        models.extend(name for name in s.mae if name not in models)
    table = pd.DataFrame({s.round_id: pd.Series(s.mae, dtype=float) for s in slices}, index=models, columns=rounds)

    return EvaluationReport(
        rounds=rounds,
        mae=table,
        best_baseline={s.round_id: s.best_baseline for s in slices if s.best_baseline is not None},
        improvement={s.round_id: s.improvement for s in slices if s.improvement is not None},
        primary=primary,
    )
