"""Channel parameter estimation from a revealed subset of correlated data."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted, check_X_y, check_array

from .attacks import Block
from .optics import DetectorModel, ModulationParams, _gen


class EstimationError(RuntimeError):
    """Raised when the channel cannot be characterised from the data."""


@dataclass
class RevealedSubset:
    """Pairs disclosed for parameter estimation.

    ``alice`` holds Alice's quadrature matching Bob's basis, ``bob`` his
    outcome. ``key_mask`` flags the pulses of the parent block still
    available for key extraction after the reveal.
    """

    alice: np.ndarray
    bob: np.ndarray
    key_mask: np.ndarray

    @property
    def m(self) -> int:
        return len(self.alice)

    @property
    def pairs(self) -> np.ndarray:
        return np.column_stack([self.alice, self.bob])


@dataclass(frozen=True)
class EstimationResult:
    T_hat: float
    chi_hat: float
    chi0_hat: float
    eps_hat: float
    se_eps: float
    m: int


def reveal_subset(block: Block, m: int, rng, candidates=None) -> RevealedSubset:
    """Disclose ``m`` pulses drawn uniformly without replacement.

    ``candidates`` restricts the draw to a boolean mask over the block (for
    instance to exclude test pulses); by default every pulse is eligible.
    """
    n = len(block)
    cand = np.ones(n, dtype=bool) if candidates is None else np.asarray(candidates, dtype=bool)
    pool = np.flatnonzero(cand)
    if m > len(pool):
        raise ValueError(f"cannot reveal {m} pulses out of {len(pool)} candidates")
    if m < 2:
        raise ValueError(f"need at least 2 revealed pulses, got {m}")
    idx = np.sort(_gen(rng).choice(pool, size=m, replace=False))
    key_mask = cand.copy()
    key_mask[idx] = False
    return RevealedSubset(
        alice=block.alice_sifted[idx],
        bob=block.bob_outcome[idx],
        key_mask=key_mask,
    )


class ChannelEstimator(RegressorMixin, BaseEstimator):
    """Estimate transmission and excess noise from (Alice, Bob) pairs.

    Bob's outcome is regressed on Alice's quadrature through the origin.
    The slope squared over ``eta`` gives the transmission; the unbiased
    residual variance, referred to the channel input, gives the total added
    noise, from which the loss-induced vacuum part is subtracted.

    Parameters
    ----------
    eta : float
        Calibrated homodyne efficiency of Bob's detector.
    modulation_variance : float
        Calibrated modulation variance V_A. Not used by the point
        estimates; kept so the fitted model carries its calibration.

    Attributes
    ----------
    slope_ : float
    transmission_ : float
    residual_variance_ : float
    chi_, chi0_, excess_noise_ : float
        Total, vacuum and excess input-referred noise; ``chi_ == chi0_ + excess_noise_``.
    excess_noise_se_ : float
        Gaussian standard error of ``excess_noise_``.
    n_samples_ : int
    """

    def __init__(self, eta: float = 0.6, modulation_variance: float = 36.6):
        self.eta = eta
        self.modulation_variance = modulation_variance

    def fit(self, X, y):
        X, y = check_X_y(X, y, ensure_min_samples=2, y_numeric=True)
        if X.shape[1] != 1:
            raise ValueError(f"expected a single feature column, got {X.shape[1]}")
        if not (0 < self.eta <= 1):
            raise ValueError(f"eta must lie in (0, 1], got {self.eta}")
        a = X[:, 0]
        m = len(a)
        saa = float(a @ a)
        if saa == 0.0:
            raise EstimationError("Alice's revealed data has zero energy")
        s = float(a @ y) / saa
        if s == 0.0:
            raise EstimationError("estimated transmission is zero")

        eta_t = s * s
        resid = y - s * a
        var = float(resid @ resid) / (m - 1)

        self.slope_ = s
        self.transmission_ = eta_t / self.eta
        self.residual_variance_ = var
        self.chi_ = var / eta_t - 1.0
        self.chi0_ = 1.0 / eta_t - 1.0
        # Difference taken directly so chi_ == chi0_ + excess_noise_ up to one rounding.
        self.excess_noise_ = self.chi_ - self.chi0_
        self.excess_noise_se_ = var * np.sqrt(2.0 / (m - 1)) / eta_t
        self.n_samples_ = m
        return self

    def predict(self, X):
        check_is_fitted(self, "slope_")
        X = check_array(X)
        return self.slope_ * X[:, 0]

    @property
    def result_(self) -> EstimationResult:
        check_is_fitted(self, "slope_")
        return EstimationResult(
            T_hat=self.transmission_,
            chi_hat=self.chi_,
            chi0_hat=self.chi0_,
            eps_hat=self.excess_noise_,
            se_eps=float(self.excess_noise_se_),
            m=self.n_samples_,
        )


def estimate_channel(
    subset: RevealedSubset, det: DetectorModel, mod: ModulationParams
) -> EstimationResult:
    if subset.m < 2:
        raise EstimationError(f"need at least 2 revealed pairs, got {subset.m}")
    est = ChannelEstimator(eta=det.eta, modulation_variance=mod.V_A)
    est.fit(subset.alice.reshape(-1, 1), subset.bob)
    return est.result_


def eps_confidence(result: EstimationResult, n_sigma: float = 1.0) -> float:
    """Pessimistic excess noise ``eps_hat + n_sigma * se_eps``."""
    if n_sigma < 0:
        raise ValueError(f"n_sigma must be >= 0, got {n_sigma}")
    return result.eps_hat + n_sigma * result.se_eps
