"""Belief update models: Social Bayesian, DeGroot, probabilistic learning and naive Bayes."""

import logging
from dataclasses import dataclass, replace

import numpy as np
from sklearn.linear_model import LinearRegression

from models.belief import (
    BeliefDistribution,
    BeliefError,
    BinGrid,
    SocialHistogram,
    dist_mean,
    dist_mode,
    histogram_to_distribution,
    point_to_distribution,
)

logger = logging.getLogger(__name__)

KINDS = ('social_bayesian', 'degroot', 'prob_learning', 'naive_bayes')
LIKELIHOOD_FAMILIES = ('empirical', 'normal')
PRIOR_FAMILIES = ('normal', 'uniform')
EXTRACTIONS = ('mean', 'mode')
SI_CONDITIONING = ('full_histogram', 'mean_kernel')
MARGINAL_SOURCES = ('round_empirical', 'uniform')


class UpdateError(ValueError):
    """Raised when an update model cannot produce a posterior"""


@dataclass(frozen=True)
class ModelSpec:
    kind: str
    likelihood_family: str = 'empirical'
    prior_family: str = 'normal'
    extraction: str = 'mean'
    degroot_weight: float | None = None  # None: fit per round
    si_conditioning: str = 'full_histogram'
    smoothing: float = 1.0
    marginal_source: str = 'round_empirical'
    name: str | None = None

    def __post_init__(self):
        choices = {
            'kind': KINDS,
            'likelihood_family': LIKELIHOOD_FAMILIES,
            'prior_family': PRIOR_FAMILIES,
            'extraction': EXTRACTIONS,
            'si_conditioning': SI_CONDITIONING,
            'marginal_source': MARGINAL_SOURCES,
        }
        for field_name, allowed in choices.items():
            value = getattr(self, field_name)
            if value not in allowed:
                raise UpdateError(f"{field_name} must be one of {allowed}, got {value!r}")
        if self.degroot_weight is not None and not 0.0 <= self.degroot_weight <= 1.0:
            raise UpdateError(f"degroot weight must lie in [0, 1], got {self.degroot_weight}")
        if self.smoothing < 0:
            raise UpdateError("smoothing must be non-negative")

    @property
    def label(self):
        return self.name or self.kind


@dataclass(frozen=True)
class UpdateResult:
    posterior: BeliefDistribution
    point_prediction: float


@dataclass(frozen=True)
class RoundContext:
    """Round-level inputs shared by every record: grid, post-social histogram, fitted weight"""
    grid: BinGrid
    post_histogram: SocialHistogram | None = None
    degroot_weight: float | None = None
    kernel: str = 'gaussian'
    bandwidth: float | str = 'auto'


# Comparison table rows, decoded into the model configuration space
MODEL_PRESETS = {
    'normal_approx': ModelSpec('naive_bayes', likelihood_family='normal', prior_family='normal',
                               extraction='mean', name='normal_approx'),
    'em_mean_norm': ModelSpec('naive_bayes', prior_family='normal', extraction='mean', name='em_mean_norm'),
    'em_mean_uni': ModelSpec('naive_bayes', prior_family='uniform', extraction='mean', name='em_mean_uni'),
    'em_mode_norm': ModelSpec('naive_bayes', prior_family='normal', extraction='mode', name='em_mode_norm'),
    'em_mode_uni': ModelSpec('naive_bayes', prior_family='uniform', extraction='mode', name='em_mode_uni'),
    'degroot': ModelSpec('degroot', name='degroot'),
    'prob_learning': ModelSpec('prob_learning', name='prob_learning'),
    'social_bayesian': ModelSpec('social_bayesian', name='social_bayesian'),
    'social_bayesian_mean': ModelSpec('social_bayesian', si_conditioning='mean_kernel', name='social_bayesian_mean'),
}

DISPLAY_LABELS = {
    'normal_approx': 'Normal Approx.',
    'em_mean_norm': 'Em_Mean_Norm',
    'em_mean_uni': 'Em_Mean_Uni',
    'em_mode_norm': 'Em_Mode_Norm',
    'em_mode_uni': 'Em_Mode_Uni',
    'degroot': 'DeGroot',
    'prob_learning': 'Prob. Learning',
    'social_bayesian': 'Social Bayesian',
    'social_bayesian_mean': 'Social Bayesian (SI mean)',
}

_SPEC_KEYS = {
    'w': 'degroot_weight',
    'weight': 'degroot_weight',
    'extraction': 'extraction',
    'prior': 'prior_family',
    'likelihood': 'likelihood_family',
    'si': 'si_conditioning',
    'marginal': 'marginal_source',
    'smoothing': 'smoothing',
}


def parse_model_spec(text):
    """Parse 'name[:key=value,...]', e.g. 'degroot:w=0.3'"""
    name, _, options = text.strip().partition(':')
    if name not in MODEL_PRESETS:
        raise UpdateError(f"unknown model {name!r}; valid names: {', '.join(MODEL_PRESETS)}")
    overrides = {}
    for option in filter(None, (part.strip() for part in options.split(','))):
        key, sep, value = option.partition('=')
        if not sep or key.strip() not in _SPEC_KEYS:
            raise UpdateError(f"bad model option {option!r}; keys: {', '.join(_SPEC_KEYS)}")
        field_name = _SPEC_KEYS[key.strip()]
        value = value.strip()
        if field_name == 'degroot_weight':
            overrides[field_name] = None if value == 'fit' else float(value)
        elif field_name == 'smoothing':
            overrides[field_name] = float(value)
        else:
            overrides[field_name] = value
    return replace(MODEL_PRESETS[name], **overrides)


def _normalized_product(grid, weights):
    total = weights.sum()
    if not total > 0:
        raise UpdateError("empty posterior support: prior and social information do not overlap")
    return BeliefDistribution(grid, weights / total)


def _extract(posterior, extraction):
    if extraction == 'mode':
        return dist_mode(posterior)
    return dist_mean(posterior)


def _check_grids(*dists):
    grid = dists[0].grid
    if any(d.grid != grid for d in dists[1:]):
        raise UpdateError("distributions must share one grid")
    return grid


def social_bayesian_update(prior_dist, si_dist, marginal_post, extraction='mean'):
    """Posterior over the post-social belief: P(post|SI) * P(post|prior) / P(post), renormalized"""
    grid = _check_grids(prior_dist, si_dist, marginal_post)
    if np.any(marginal_post.mass == 0):
        raise UpdateError("unsmoothed marginal: P(post) has empty bins")
    # The constant kappa is absorbed by renormalizing
    posterior = _normalized_product(grid, si_dist.mass * prior_dist.mass / marginal_post.mass)
    return UpdateResult(posterior, _extract(posterior, extraction))


def probabilistic_learning_update(prior_dist, si_dist, extraction='mean'):
    grid = _check_grids(prior_dist, si_dist)
    posterior = _normalized_product(grid, si_dist.mass * prior_dist.mass)
    return UpdateResult(posterior, _extract(posterior, extraction))


def degroot_update(prior_point, si_mean, w):
    """Convex combination with weight w on the individual's own estimate"""
    if not 0.0 <= w <= 1.0:
        raise UpdateError(f"degroot weight must lie in [0, 1], got {w}")
    return w * prior_point + (1.0 - w) * si_mean


def fit_degroot_weight(triples):
    """Least-squares self-weight from (prior_point, si_mean, actual_post) triples, clamped to [0, 1]"""
    data = np.asarray(list(triples), dtype=float).reshape(-1, 3)
    own_shift = data[:, 0] - data[:, 1]
    observed_shift = data[:, 2] - data[:, 1]
    if not np.any(own_shift != 0):
        raise UpdateError("weight unidentifiable: every prior equals its social mean")

    # post - si = w * (prior - si), no intercept
    regression = LinearRegression(fit_intercept=False)
    regression.fit(own_shift.reshape(-1, 1), observed_shift)
    weight = float(np.clip(regression.coef_[0], 0.0, 1.0))
    logger.debug("Fitted DeGroot weight %.6f on %d triples", weight, len(data))
    return weight


def _normal_likelihood(hist):
    spread = hist.std()
    if spread == 0:
        # Unanimous crowd: fall back to one bin width
        spread = hist.grid.width
    return point_to_distribution(hist.mean(), hist.grid, 'gaussian', spread)


def naive_bayes_update(prior_point, si_hist, spec, bandwidth='auto'):
    """Loosely naive-Bayesian update where the social histogram plays the likelihood"""
    grid = si_hist.grid
    if spec.likelihood_family == 'normal':
        likelihood = _normal_likelihood(si_hist)
    else:
        likelihood = histogram_to_distribution(si_hist, spec.smoothing)

    if spec.prior_family == 'uniform':
        prior = BeliefDistribution.uniform(grid)
    else:
        prior = point_to_distribution(prior_point, grid, 'gaussian', bandwidth)

    posterior = _normalized_product(grid, likelihood.mass * prior.mass)
    return UpdateResult(posterior, _extract(posterior, spec.extraction))


def social_distribution(hist, spec, context):
    """P(post|SI) as configured: kernel at the histogram mean, normal fit, or smoothed histogram"""
    if spec.si_conditioning == 'mean_kernel':
        return point_to_distribution(hist.mean(), context.grid, 'gaussian', context.bandwidth)
    if spec.likelihood_family == 'normal':
        return _normal_likelihood(hist)
    return histogram_to_distribution(hist, spec.smoothing)


def marginal_distribution(spec, context):
    if spec.marginal_source == 'uniform':
        return BeliefDistribution.uniform(context.grid)
    if context.post_histogram is None:
        raise UpdateError("round_empirical marginal needs the round's post-social histogram")
    return histogram_to_distribution(context.post_histogram, spec.smoothing)


def run_model(record, spec, context):
    """Dispatch one record through the model selected by spec.kind"""
    if record.si.grid != context.grid:
        raise UpdateError(f"record {record.user_id} histogram grid does not match the round grid")
    grid = context.grid

    try:
        if spec.kind == 'degroot':
            weight = spec.degroot_weight if spec.degroot_weight is not None else context.degroot_weight
            if weight is None:
                raise UpdateError("degroot model needs a fixed weight or a fitted round weight")
            point = degroot_update(record.pre_social, record.si.mean(), weight)
            posterior = point_to_distribution(point, grid, context.kernel, context.bandwidth)
            return UpdateResult(posterior, float(point))

        if spec.kind == 'naive_bayes':
            return naive_bayes_update(record.pre_social, record.si, spec, context.bandwidth)

        prior_dist = point_to_distribution(record.pre_social, grid, context.kernel, context.bandwidth)
        si_dist = social_distribution(record.si, spec, context)
        if spec.kind == 'prob_learning':
            return probabilistic_learning_update(prior_dist, si_dist, spec.extraction)
        return social_bayesian_update(prior_dist, si_dist, marginal_distribution(spec, context), spec.extraction)
    except BeliefError as e:
        raise UpdateError(f"{spec.label} failed on user {record.user_id}: {e}") from e


class UpdateModelSuite:
    """Resolves model names into specs and applies run-wide overrides"""

    def __init__(self, names=None, smoothing=None, si_conditioning=None, marginal_source=None):
        self.models = {}
        self.initialize_models(list(MODEL_PRESETS) if names is None else names, smoothing, si_conditioning,
                               marginal_source)

    def initialize_models(self, names, smoothing, si_conditioning, marginal_source):
        """Build a spec per requested name"""
        if not names:
            raise UpdateError(f"no models requested; valid names: {', '.join(MODEL_PRESETS)}")
        unknown = [name for name in names if name not in MODEL_PRESETS]
        if unknown:
            raise UpdateError(f"unknown model(s) {', '.join(unknown)}; valid names: {', '.join(MODEL_PRESETS)}")

        for name in names:
            spec = MODEL_PRESETS[name]
            overrides = {}
            if smoothing is not None:
                overrides['smoothing'] = smoothing
            # The SI mean variant keeps its own conditioning
            if si_conditioning is not None and name != 'social_bayesian_mean':
                overrides['si_conditioning'] = si_conditioning
            if marginal_source is not None:
                overrides['marginal_source'] = marginal_source
            self.models[name] = replace(spec, **overrides)

    @property
    def specs(self):
        return list(self.models.values())
