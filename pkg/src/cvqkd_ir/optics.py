"""Phase-space conventions and elementary Gaussian measurement statistics.

All quadratures are in shot-noise units: the vacuum variance N0 is 1.
Every sampling function takes an explicit :class:`RngStream` and accepts
either scalars or numpy arrays, so a whole block of pulses can be processed
in one call.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import NamedTuple, Union

import numpy as np

ArrayLike = Union[float, np.ndarray]


class QuadraturePair(NamedTuple):
    """A point (x, p) in phase space, in sqrt(N0) units."""

    x: ArrayLike
    p: ArrayLike

    def select(self, choice) -> ArrayLike:
        """Return the quadrature picked by ``choice``.

        ``choice`` is a :class:`Quadrature` or a boolean/int array where
        ``True``/1 means P.
        """
        if isinstance(choice, Quadrature):
            return self.p if choice is Quadrature.P else self.x
        return np.where(np.asarray(choice, dtype=bool), self.p, self.x)

    def scaled(self, gain: ArrayLike) -> "QuadraturePair":
        return QuadraturePair(gain * np.asarray(self.x), gain * np.asarray(self.p))


class Quadrature(enum.IntEnum):
    X = 0
    P = 1


@dataclass(frozen=True)
class ModulationParams:
    """Alice's Gaussian modulation variance ``V_A`` (N0 units)."""

    V_A: float = 36.6

    def __post_init__(self):
        if not np.isfinite(self.V_A) or self.V_A < 0:
            raise ValueError(f"V_A must be finite and >= 0, got {self.V_A}")


@dataclass(frozen=True)
class DetectorModel:
    """Bob's homodyne detector, characterised by its efficiency."""

    eta: float = 0.6

    def __post_init__(self):
        if not (0 < self.eta <= 1):
            raise ValueError(f"eta must lie in (0, 1], got {self.eta}")


@dataclass(frozen=True)
class RngStream:
    """Seeded, splittable random stream.

    ``(seed, stream_id)`` fully determines the draws. Distinct stream ids
    are spawned from the same :class:`numpy.random.SeedSequence` root, so
    they are statistically independent. The bit generator is Philox
    (counter based); normal variates use numpy's ziggurat sampler.
    """

    seed: int
    stream_id: int = 0

    def __post_init__(self):
        if not (0 <= self.seed < 2**64):
            raise ValueError(f"seed must be an unsigned 64-bit integer, got {self.seed}")
        if self.stream_id < 0:
            raise ValueError(f"stream_id must be >= 0, got {self.stream_id}")

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream_id,))
        return np.random.Generator(np.random.Philox(ss))

    def child(self, stream_id: int) -> "RngStream":
        return RngStream(self.seed, stream_id)


def _gen(rng) -> np.random.Generator:
    # Functions accept a live Generator so a block can share one sequential stream.
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    raise TypeError(f"expected RngStream or numpy Generator, got {type(rng).__name__}")


def draw_alice_state(mod: ModulationParams, rng, size=None) -> QuadraturePair:
    """Draw coherent-state centres from a symmetric bivariate Gaussian of variance V_A."""
    g = _gen(rng)
    sd = np.sqrt(mod.V_A)
    x = g.normal(0.0, 1.0, size) * sd
    p = g.normal(0.0, 1.0, size) * sd
    if size is None:
        return QuadraturePair(float(x), float(p))
    return QuadraturePair(x, p)


def homodyne(mean_amplitude: QuadraturePair, q, extra_noise_var: float, rng) -> ArrayLike:
    """Shot-noise limited homodyne of a coherent state.

    Returns the selected mean quadrature plus Gaussian noise of variance
    ``1 + extra_noise_var``.
    """
    if extra_noise_var < 0:
        raise ValueError(f"extra_noise_var must be >= 0, got {extra_noise_var}")
    g = _gen(rng)
    mean = np.asarray(mean_amplitude.select(q), dtype=float)
    out = mean + g.normal(0.0, 1.0, mean.shape) * np.sqrt(1.0 + extra_noise_var)
    return float(out) if out.ndim == 0 else out


def heterodyne(mean_amplitude: QuadraturePair, rng) -> QuadraturePair:
    """Simultaneous measurement of both quadratures.

    Unbiased-rescaled convention: each outcome has the input mean and
    variance 2 (shot noise plus one vacuum unit from the splitting).
    """
    g = _gen(rng)
    x = np.asarray(mean_amplitude.x, dtype=float)
    p = np.asarray(mean_amplitude.p, dtype=float)
    sd = np.sqrt(2.0)
    xe = x + g.normal(0.0, 1.0, x.shape) * sd
    pe = p + g.normal(0.0, 1.0, p.shape) * sd
    if xe.ndim == 0:
        return QuadraturePair(float(xe), float(pe))
    return QuadraturePair(xe, pe)


def detect_realistic(channel_draw: ArrayLike, det: DetectorModel, rng) -> ArrayLike:
    """Apply detector inefficiency to quadrature samples of the channel output.

    Models loss ``eta`` before an ideal homodyne:
    ``sqrt(eta) * draw + sqrt(1 - eta) * vacuum``. A coherent input of mean
    ``a`` therefore yields mean ``sqrt(eta) * a`` and unit variance.
    """
    draw = np.asarray(channel_draw, dtype=float)
    if det.eta == 1.0:
        return float(draw) if draw.ndim == 0 else draw.copy()
    g = _gen(rng)
    out = np.sqrt(det.eta) * draw + np.sqrt(1.0 - det.eta) * g.normal(0.0, 1.0, draw.shape)
    return float(out) if out.ndim == 0 else out
