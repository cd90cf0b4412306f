import logging
from dataclasses import replace

import numpy as np

from models.belief import BeliefError, SocialHistogram, make_grid
from models.update_models import RoundContext, UpdateError, fit_degroot_weight

logger = logging.getLogger(__name__)

DEFAULT_BINS = 50
DEFAULT_PADDING = 0.05


class RoundProcessor:
    """Puts the records of one round on a shared grid and derives round-level context"""

    def __init__(self, bins=None, padding_fraction=DEFAULT_PADDING, kernel='gaussian', bandwidth='auto'):
        self.bins = bins
        self.padding_fraction = padding_fraction
        self.kernel = kernel
        self.bandwidth = bandwidth

    def round_grid(self, records):
        """Shared histogram grid when it already fits the round, otherwise a padded grid over all values"""
        if not records:
            raise BeliefError("no observations")
        grids = {record.si.grid for record in records}
        if len(grids) == 1:
            grid = next(iter(grids))
            fits_bins = self.bins is None or self.bins == grid.bin_count
            covers = all(grid.contains(r.pre_social) and grid.contains(r.post_social) for r in records)
            if fits_bins and covers:
                return grid

        points = [r.pre_social for r in records] + [r.post_social for r in records]
        for grid in grids:
            points.extend([grid.lower, grid.upper])
        grid = make_grid(points, self.bins or DEFAULT_BINS, self.padding_fraction)
        logger.warning("Round %s: rebuilt grid %s and re-binned %d histograms",
                       records[0].round_id, grid, len(records))
        return grid

    def normalize_round(self, records):
        """Re-bin every histogram onto the round grid"""
        grid = self.round_grid(records)
        return [r if r.si.grid == grid else replace(r, si=r.si.rebin(grid)) for r in records]

    def build_context(self, records):
        """Round context: post-social histogram for the marginal and the fitted DeGroot weight"""
        grid = records[0].si.grid
        posts = np.array([r.post_social for r in records])

        try:
            weight = fit_degroot_weight((r.pre_social, r.si.mean(), r.post_social) for r in records)
        except UpdateError as e:
            logger.warning("Round %s: %s", records[0].round_id, e)
            weight = None

        return RoundContext(
            grid=grid,
            post_histogram=SocialHistogram.from_values(posts, grid),
            degroot_weight=weight,
            kernel=self.kernel,
            bandwidth=self.bandwidth,
        )
