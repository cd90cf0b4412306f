"""Seeded synthetic rounds standing in for the unpublished experiment data."""

import logging
from dataclasses import dataclass, field

import numpy as np

from data.prediction_data import PredictionRecord
from models.belief import SocialHistogram, histogram_to_distribution, make_grid, point_to_distribution
from models.data_processor import DEFAULT_BINS, DEFAULT_PADDING, RoundProcessor
from models.update_models import (
    ModelSpec,
    RoundContext,
    degroot_update,
    run_model,
    social_bayesian_update,
    social_distribution,
)

logger = logging.getLogger(__name__)

DEFAULT_PEERS = 100
MAX_SWEEPS = 50


@dataclass(frozen=True)
class SyntheticConfig:
    agent_count: int = 2000
    round_count: int = 7
    true_value: float | tuple = 100.0
    prior_noise_sd: float = 5.0
    generator: ModelSpec = field(default_factory=lambda: ModelSpec('degroot', degroot_weight=0.3, name='degroot'))
    observation_noise_sd: float = 0.0
    seed: int = 0
    bin_count: int = DEFAULT_BINS
    padding_fraction: float = DEFAULT_PADDING
    kernel: str = 'gaussian'
    bandwidth: float | str = 'auto'
    peer_count: int | None = DEFAULT_PEERS  # None: every other agent

    def __post_init__(self):
        if self.agent_count < 2:
            raise ValueError("agent_count must be at least 2: a histogram needs peers")
        if self.round_count < 1:
            raise ValueError("round_count must be positive")
        if not self.prior_noise_sd > 0:
            raise ValueError("prior_noise_sd must be positive")
        if self.observation_noise_sd < 0:
            raise ValueError("observation_noise_sd must be non-negative")
        if self.peer_count is not None and self.peer_count < 1:
            raise ValueError("peer_count must be positive, or None for every other agent")
        if len(self.true_values) != self.round_count:
            raise ValueError(f"need {self.round_count} true values, got {len(self.true_values)}")
        if self.generator.kind == 'degroot' and self.generator.degroot_weight is None:
            raise ValueError("a degroot generator needs a fixed weight, e.g. degroot:w=0.3")

    @property
    def true_values(self):
        if np.ndim(self.true_value) == 0:
            return [float(self.true_value)] * self.round_count
        return [float(v) for v in self.true_value]

    @property
    def shown_peers(self):
        """Peers behind each histogram"""
        others = self.agent_count - 1
        return others if self.peer_count is None else min(self.peer_count, others)


def leave_one_out_histograms(values, grid):
    """Histogram of every other agent's value, one per agent"""
    indices = grid.bin_index(values)
    counts = np.bincount(indices, minlength=grid.bin_count)
    histograms = []
    for index in indices:
        peers = counts.copy()
        peers[index] -= 1
        histograms.append(SocialHistogram(grid, peers))
    return histograms


def sampled_peer_histograms(values, grid, peer_count, rng):
    """Histogram of peer_count other agents' values, drawn without replacement for each agent"""
    others = len(values) - 1
    if peer_count >= others:
        return leave_one_out_histograms(values, grid)

    indices = grid.bin_index(values)
    histograms = []
    for agent in range(len(values)):
        peers = rng.choice(others, size=peer_count, replace=False)
        # Skip the agent itself
        peers[peers >= agent] += 1
        histograms.append(SocialHistogram(grid, np.bincount(indices[peers], minlength=grid.bin_count)))
    return histograms


def _hold_in_bin(grid, value, index):
    """The value inside bin index closest to value"""
    edges = grid.edges
    value = edges[index + 1] if grid.bin_index(value) > index else edges[index]
    while grid.bin_index(value) > index:
        value = np.nextafter(value, -np.inf)
    while grid.bin_index(value) < index:
        value = np.nextafter(value, np.inf)
    return float(value)


class SyntheticRoundGenerator:
    """Simulates pre-social draws, peer histograms and post-social responses"""

    def __init__(self, config):
        self.config = config

    def _context(self, grid, post_histogram=None):
        return RoundContext(grid=grid, post_histogram=post_histogram, kernel=self.config.kernel,
                            bandwidth=self.config.bandwidth)

    def _apply_generator(self, pre, histograms, noise, grid, floor):
        spec = self.config.generator
        if spec.kind == 'degroot':
            points = np.array([degroot_update(p, h.mean(), spec.degroot_weight) for p, h in zip(pre, histograms)])
            return np.maximum(points + noise, floor)

        # Posts are unknown yet: the pre-social price stands in
        records = [PredictionRecord('0', str(i), '0', p, p, h) for i, (p, h) in enumerate(zip(pre, histograms))]
        if spec.kind == 'social_bayesian' and spec.marginal_source == 'round_empirical':
            return self._settle_marginal(records, noise, grid, floor)

        context = self._context(grid)
        points = np.array([run_model(record, spec, context).point_prediction for record in records])
        return np.maximum(points + noise, floor)

    def _settle_marginal(self, records, noise, grid, floor):
        """Noisy answers whose own histogram is the P(post) they were computed from

        Agents are revisited one at a time against the running counts until a sweep
        moves nobody, or only the agents the previous sweep moved. Every answer is then
        recomputed from the final counts exactly as the evaluator will see them. An
        agent whose own count pushes it across a bin edge and back has no consistent
        answer; it is held just inside the bin it is counted in.
        """
        spec = self.config.generator
        context = self._context(grid)
        priors = [point_to_distribution(r.pre_social, grid, context.kernel, context.bandwidth) for r in records]
        social = [social_distribution(r.si, spec, context) for r in records]

        def answer(point, agent):
            # Answers stay on the histogram grid so the round keeps that grid
            return float(np.clip(max(point + noise[agent], floor), grid.lower, grid.upper))

        pre = np.array([r.pre_social for r in records])
        posts = np.clip(np.maximum(pre + noise, floor), grid.lower, grid.upper)
        bins = grid.bin_index(posts)
        counts = np.bincount(bins, minlength=grid.bin_count)

        previous = None
        for sweep in range(1, MAX_SWEEPS + 1):
            moved = []
            marginal = None
            for agent in range(len(records)):
                if marginal is None:
                    marginal = histogram_to_distribution(SocialHistogram(grid, counts), spec.smoothing)
                result = social_bayesian_update(priors[agent], social[agent], marginal, spec.extraction)
                posts[agent] = answer(result.point_prediction, agent)
                target = grid.bin_index(posts[agent])
                if target != bins[agent]:
                    counts[bins[agent]] -= 1
                    counts[target] += 1
                    bins[agent] = target
                    moved.append(agent)
                    marginal = None
            if not moved or moved == previous:
                logger.debug("Round marginal settled after %d sweeps, %d agents still flipping", sweep, len(moved))
                break
            previous = moved
        else:
            logger.warning("Round marginal still moving after %d sweeps", MAX_SWEEPS)

        context = self._context(grid, SocialHistogram(grid, counts))
        final = np.array([answer(run_model(r, spec, context).point_prediction, i) for i, r in enumerate(records)])
        held = np.flatnonzero(grid.bin_index(final) != bins)
        for agent in held:
            final[agent] = _hold_in_bin(grid, final[agent], bins[agent])
        if held.size:
            logger.debug("Held %d answers at the edge of the bin the marginal counts them in", held.size)
        return final

    def generate_round(self, round_index):
        config = self.config
        rng = np.random.default_rng(config.seed + round_index)
        true_value = config.true_values[round_index]

        raw = rng.normal(true_value, config.prior_noise_sd, config.agent_count)
        floor = make_grid(raw, config.bin_count, config.padding_fraction).width / 10.0
        pre = np.maximum(raw, floor)
        grid = make_grid(pre, config.bin_count, config.padding_fraction)
        histograms = sampled_peer_histograms(pre, grid, config.shown_peers, rng)
        noise = rng.normal(0.0, config.observation_noise_sd, config.agent_count)

        posts = self._apply_generator(pre, histograms, noise, grid, floor)

        round_id = str(round_index + 1)
        records = [
            PredictionRecord(round_id, f"u{i:05d}", f"asset-{round_id}", float(p), float(post), h)
            for i, (p, post, h) in enumerate(zip(pre, posts, histograms))
        ]
        # Noisy answers may land outside the histogram grid
        return RoundProcessor(bins=config.bin_count, padding_fraction=config.padding_fraction).normalize_round(records)


def synthesize(config):
    """Seeded rounds of records; identical configs give identical records"""
    generator = SyntheticRoundGenerator(config)
    rounds = {}
    for round_index in range(config.round_count):
        records = generator.generate_round(round_index)
        rounds[records[0].round_id] = records
    logger.info("Synthesized %d rounds of %d agents with %s, %d peers per histogram", config.round_count,
                config.agent_count, config.generator.label, config.shown_peers)
    return rounds
