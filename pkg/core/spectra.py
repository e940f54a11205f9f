"""Orthonormal 2-D Haar analysis/synthesis and 1/f^beta image ensembles."""
import logging
from typing import Sequence

import numpy as np
from scipy import stats

import config
from core.errors import DomainError, InsufficientDataError, require
from core.parallel import ordered_map, substream
from models.sampling import Seed
from models.spectra import ImageGrid, RadiusFit, SubbandPowers, WaveletPyramid

logger = logging.getLogger("Spectra")


def haar_step(x: np.ndarray):
    a, b = x[0::2, 0::2], x[0::2, 1::2]
    c, d = x[1::2, 0::2], x[1::2, 1::2]
    ll = (a + b + c + d) / 2.0
    lh = (a - b + c - d) / 2.0
    hl = (a + b - c - d) / 2.0
    hh = (a - b - c + d) / 2.0
    return ll, (lh, hl, hh)


def inverse_haar_step(ll: np.ndarray, bands) -> np.ndarray:
    lh, hl, hh = bands
    side = 2 * ll.shape[0]
    x = np.empty((side, side))
    x[0::2, 0::2] = (ll + lh + hl + hh) / 2.0
    x[0::2, 1::2] = (ll - lh + hl - hh) / 2.0
    x[1::2, 0::2] = (ll + lh - hl - hh) / 2.0
    x[1::2, 1::2] = (ll - lh - hl + hh) / 2.0
    return x


def forward_haar(image: ImageGrid, levels: int = None) -> WaveletPyramid:
    levels = image.levels if levels is None else levels
    require(0 <= levels <= image.levels, f"levels must lie in [0, {image.levels}], got {levels}")
    low = image.values.astype(float, copy=True)
    details = []
    for _ in range(levels):
        low, bands = haar_step(low)
        details.append(bands)
    return WaveletPyramid(side=image.side, details=details, low=low)


def inverse_haar(pyramid: WaveletPyramid) -> ImageGrid:
    x = pyramid.low
    for bands in reversed(pyramid.details):
        x = inverse_haar_step(x, bands)
    return ImageGrid(side=pyramid.side, values=x)


def _draw(rng: np.random.Generator, shape, distribution: str) -> np.ndarray:
    if distribution == "gaussian":
        return rng.standard_normal(shape)
    if distribution == "laplace":
        return rng.laplace(0.0, 1.0 / np.sqrt(2.0), shape)  # unit variance
    raise DomainError(f"unknown coefficient distribution {distribution!r}")


def synthesize_with(m: int, base: SubbandPowers, rng: np.random.Generator,
                    distribution: str = None) -> ImageGrid:
    """Draw a 2^m x 2^m image, coefficients generated coarse to fine.

    A coefficient at octave k (block side 2^k) gets variance power_k * 4^(m-k),
    so every band adds its power to the expected energy per pixel. Drawing
    coarse to fine means a larger m only appends finer octaves to the stream.
    """
    require(m >= 1, f"m must be >= 1, got {m}")
    distribution = distribution or config.SYNTHESIS_DISTRIBUTION
    low = np.sqrt(base.l_LL) * 2.0**m * _draw(rng, (1, 1), distribution)
    coarse_first = []
    for k in range(m):
        scale = 2.0 ** (m - k)
        blocks = tuple(np.sqrt(p) * scale * _draw(rng, (2**k, 2**k), distribution)
                       for p in base.at_octave(k))
        coarse_first.append(blocks)
    pyramid = WaveletPyramid(side=2**m, details=coarse_first[::-1], low=low)
    return inverse_haar(pyramid)


def synthesize(m: int, base: SubbandPowers, seed: Seed, distribution: str = None) -> ImageGrid:
    return synthesize_with(m, base, substream(seed), distribution)


def expected_energy_per_pixel(m: int, base: SubbandPowers) -> float:
    """Truncated analytic sum l + Σ_{k<m} (h_LH/2^k + h_HL/2^k + h_HH/4^k)."""
    return base.l_LL + sum(sum(base.at_octave(k)) for k in range(m))


def limit_energy_per_pixel(base: SubbandPowers) -> float:
    return base.l_LL + 2.0 * base.h_LH + 2.0 * base.h_HL + (4.0 / 3.0) * base.h_HH


def ensemble_energy_per_pixel(m: int, base: SubbandPowers, draws: int, seed: Seed,
                              distribution: str = None) -> float:
    def energy(s):
        img = synthesize_with(m, base, substream(seed, s), distribution)
        return img.energy() / img.side**2

    return float(np.mean(ordered_map(energy, range(draws))))


def radius_scaling_fit(m_values: Sequence[int], samples_per_level: int, base: SubbandPowers,
                       seed: Seed, distribution: str = None) -> RadiusFit:
    """Fit ln(mean |x|) against ln(n) over synthesized ensembles.

    Draw s uses the same substream at every level, so the levels share
    their coarse coefficients.
    """
    levels = sorted(set(int(m) for m in m_values))
    if len(levels) < 3:
        raise InsufficientDataError(f"need >= 3 distinct levels, got {levels}")
    require(samples_per_level >= 30, f"samples_per_level must be >= 30, got {samples_per_level}",
            InsufficientDataError)
    distribution = distribution or config.SYNTHESIS_DISTRIBUTION

    def norms(s):
        return [np.linalg.norm(synthesize_with(m, base, substream(seed, s), distribution).values)
                for m in levels]

    table = np.asarray(ordered_map(norms, range(samples_per_level)))
    mean_norms = table.mean(axis=0)
    log_n = np.log(4.0 ** np.asarray(levels))
    fit = stats.linregress(log_n, np.log(mean_norms))
    logger.info("radius slope %.4f +/- %.4f over m=%s", fit.slope, fit.stderr, levels)
    return RadiusFit(
        slope=float(fit.slope),
        intercept=float(fit.intercept),
        slope_stderr=float(fit.stderr),
        levels=levels,
        mean_norms=[float(v) for v in mean_norms],
        distribution=distribution,
    )
