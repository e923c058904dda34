"""Block pipeline and figure-reproduction sweeps.

Each simulated block draws from its own :class:`RngStream` keyed by a
global block index, so results do not depend on execution order or on
whether blocks run in parallel.
"""
from __future__ import annotations

import enum
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .attacks import AttackSpec, Block, simulate_block
from .estimation import EstimationResult, estimate_channel, eps_confidence, reveal_subset
from .optics import DetectorModel, ModulationParams, RngStream, draw_alice_state
from .rates import (
    NoCrossingError,
    RateInputs,
    RateReport,
    i_be_bs,
    i_be_gaussian,
    i_be_partial,
    i_ab_gaussian,
    i_ab_nongaussian,
    key_rate,
    mi_gaussian_se,
    mi_monte_carlo,
    rate_report,
    select_mi_method,
    tolerable_excess_noise,
)



@dataclass(frozen=True)
class BlockConfig:
    pulses_per_block: int = 50_000
    test_pulses: int = 10_000
    reveal_m: int = 5_000
    blocks: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.blocks < 1:
            raise ValueError(f"blocks must be >= 1, got {self.blocks}")
        if self.reveal_m < 2:
            raise ValueError(f"reveal_m must be >= 2, got {self.reveal_m}")
        if self.test_pulses < 0:
            raise ValueError(f"test_pulses must be >= 0, got {self.test_pulses}")
        if self.test_pulses + self.reveal_m >= self.pulses_per_block:
            raise ValueError(
                f"test_pulses + reveal_m ({self.test_pulses + self.reveal_m}) "
                f"must be < pulses_per_block ({self.pulses_per_block})"
            )
        if not (0 <= self.seed < 2**64):
            raise ValueError(f"seed must be an unsigned 64-bit integer, got {self.seed}")

    @property
    def key_pulses(self) -> int:
        """Pulses left for key extraction in each block."""
        return self.pulses_per_block - self.test_pulses - self.reveal_m

    @property
    def key_fraction(self) -> float:
        return self.key_pulses / self.pulses_per_block


@dataclass(frozen=True)
class Calibration:
    """Trusted constants plus post-processing knobs shared by every block."""

    mod: ModulationParams = field(default_factory=ModulationParams)
    det: DetectorModel = field(default_factory=DetectorModel)
    beta: float = 1.0
    n_sigma: float = 1.0

    def __post_init__(self):
        if not (0 <= self.beta <= 1):
            raise ValueError(f"beta must lie in [0, 1], got {self.beta}")
        if self.n_sigma < 0:
            raise ValueError(f"n_sigma must be >= 0, got {self.n_sigma}")


class SweepVariable(str, enum.Enum):
    T = "T"
    MU = "mu"
    EPSILON = "epsilon"


@dataclass(frozen=True)
class SweepSpec:
    """A one-dimensional sweep of the attack around a fixed configuration.

    Sweeping ``epsilon`` sets the interception fraction to
    ``(epsilon - eps_T) / 2`` so that the equivalent Gaussian channel has
    the requested excess noise.
    """

    variable: SweepVariable
    grid: tuple
    fixed: AttackSpec = field(default_factory=AttackSpec)
    calib: Calibration = field(default_factory=Calibration)

    def __post_init__(self):
        object.__setattr__(self, "variable", SweepVariable(self.variable))
        object.__setattr__(self, "grid", tuple(float(v) for v in self.grid))
        if not self.grid:
            raise ValueError("sweep grid is empty")
        self.attacks()  # validates every grid value

    def attacks(self) -> list[AttackSpec]:
        out = []
        for v in self.grid:
            if self.variable is SweepVariable.T:
                out.append(replace(self.fixed, T=v))
            elif self.variable is SweepVariable.MU:
                out.append(replace(self.fixed, mu=v))
            else:
                out.append(replace(self.fixed, mu=(v - self.fixed.eps_T) / 2.0))
        return out


def simulate_raw_block(cfg: BlockConfig, spec: AttackSpec, calib: Calibration, block_index: int):
    """Simulate one block; returns ``(block, test_mask, generator)``.

    The generator is returned positioned after the simulation so later
    steps (reveal) continue the same per-block stream.
    """
    g = RngStream(cfg.seed, block_index).generator()
    n = cfg.pulses_per_block
    alice = draw_alice_state(calib.mod, g, size=n)
    choice = g.integers(0, 2, size=n, dtype=np.int8)
    blk = simulate_block(alice, spec, calib.det, choice, g)
    test = np.zeros(n, dtype=bool)
    test[g.choice(n, size=cfg.test_pulses, replace=False)] = True
    return blk, test, g


def rate_inputs_from_estimate(est: EstimationResult, spec: AttackSpec, calib: Calibration) -> RateInputs:
    """Rates at the pessimistic estimate; T-hat and eps are clipped to their physical ranges."""
    eps = max(0.0, eps_confidence(est, calib.n_sigma))
    t_hat = min(1.0, est.T_hat)
    return RateInputs(
        V_A=calib.mod.V_A,
        T=t_hat,
        epsilon=eps,
        eta=calib.det.eta,
        beta=calib.beta,
        mu=spec.mu,
        eps_t=spec.eps_T,
    )


def run_block(
    cfg: BlockConfig,
    spec: AttackSpec,
    det: DetectorModel,
    mod: ModulationParams,
    block_index: int = 0,
    beta: float = 1.0,
    n_sigma: float = 1.0,
) -> tuple[EstimationResult, RateReport]:
    """Simulate, reveal, estimate and evaluate rates for one block.

    Test pulses are dropped before the reveal. The key rate uses the
    Gaussian bound at the estimated transmission and pessimistic excess
    noise; mixture quantities use the true attack parameters.
    """
    calib = Calibration(mod=mod, det=det, beta=beta, n_sigma=n_sigma)
    est = _estimate_block(cfg, spec, calib, block_index)
    return est, rate_report(rate_inputs_from_estimate(est, spec, calib))


def _estimate_block(cfg, spec, calib, block_index) -> EstimationResult:
    blk, test, g = simulate_raw_block(cfg, spec, calib, block_index)
    subset = reveal_subset(blk, cfg.reveal_m, g, candidates=~test)
    return estimate_channel(subset, calib.det, calib.mod)


def key_accepted(report: RateReport, margin: float = 0.0) -> bool:
    return report.K > margin


def _estimate_job(args):
    return _estimate_block(*args)


def estimate_blocks(cfg, spec, calib, first_index: int, workers: int = 1) -> list[EstimationResult]:
    """Estimates for ``cfg.blocks`` blocks with stream ids ``first_index + b``."""
    jobs = [(cfg, spec, calib, first_index + b) for b in range(cfg.blocks)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(_estimate_job, jobs))
    return [_estimate_job(j) for j in jobs]


# --- figure sweeps -------------------------------------------------------


@dataclass(frozen=True)
class Fig3Row:
    T: float
    T_hat: float
    chi_hat: float
    chi0_hat: float
    eps_hat: float
    se_eps: float
    eps_hat_std: float
    blocks: int


FIG3_COLUMNS = ("T", "chi_hat", "chi0_hat", "eps_hat", "se_eps")


def fig3_table(t_grid: Sequence[float], cfg: BlockConfig, calib: Calibration, eps_T: float = 0.1, workers: int = 1) -> list[Fig3Row]:
    """Full intercept-resend noise decomposition versus transmission.

    Per T, ``eps_hat`` and ``se_eps`` average the per-block values (so the
    error bar is that of a single 5000-point subset). ``chi0_hat`` is
    recomputed from the mean transmission estimate and
    ``chi_hat = chi0_hat + eps_hat``.
    """
    sweep = SweepSpec(SweepVariable.T, tuple(t_grid), AttackSpec(mu=1.0, T=1.0, eps_T=eps_T), calib)
    rows = []
    for i, spec in enumerate(sweep.attacks()):
        ests = estimate_blocks(cfg, spec, calib, i * cfg.blocks, workers)
        t_hat = float(np.mean([e.T_hat for e in ests]))
        eps = np.array([e.eps_hat for e in ests])
        chi0 = 1.0 / (calib.det.eta * t_hat) - 1.0
        eps_mean = float(eps.mean())
        rows.append(
            Fig3Row(
                T=spec.T,
                T_hat=t_hat,
                chi_hat=chi0 + eps_mean,
                chi0_hat=chi0,
                eps_hat=eps_mean,
                se_eps=float(np.mean([e.se_eps for e in ests])),
                eps_hat_std=float(eps.std(ddof=1)) if len(eps) > 1 else math.nan,
                blocks=len(ests),
            )
        )
    return rows


@dataclass(frozen=True)
class Fig4Row:
    mu: float
    eps_hat: float
    spread: float
    se_mean: float
    eps_expected: float


FIG4_COLUMNS = ("mu", "eps_hat", "spread", "se_mean", "eps_expected")


def fig4_table(
    mu_grid: Sequence[float],
    t_grid: Sequence[float],
    cfg: BlockConfig,
    calib: Calibration,
    eps_T: float = 0.1,
    workers: int = 1,
) -> list[Fig4Row]:
    """Excess noise averaged over a transmission grid, versus interception fraction.

    ``spread`` is the standard deviation of the per-T means; ``se_mean`` is
    the standard error of the grand mean from the per-block error bars.
    """
    sweep = SweepSpec(SweepVariable.MU, tuple(mu_grid), AttackSpec(mu=0.0, T=1.0, eps_T=eps_T), calib)
    n_t = len(t_grid)
    rows = []
    for i, base in enumerate(sweep.attacks()):
        per_t, ses = [], []
        for j, t in enumerate(t_grid):
            spec = replace(base, T=float(t))
            ests = estimate_blocks(cfg, spec, calib, (i * n_t + j) * cfg.blocks, workers)
            per_t.append(np.mean([e.eps_hat for e in ests]))
            ses.extend(e.se_eps for e in ests)
        ses = np.asarray(ses)
        rows.append(
            Fig4Row(
                mu=base.mu,
                eps_hat=float(np.mean(per_t)),
                spread=float(np.std(per_t, ddof=1)) if n_t > 1 else 0.0,
                se_mean=float(np.sqrt(np.sum(ses**2)) / len(ses)),
                eps_expected=2.0 * base.mu + eps_T,
            )
        )
    return rows


@dataclass(frozen=True)
class Fig5Row:
    T: float
    mu: float
    epsilon: float
    I_AB: float
    I_AB_ng: float
    I_BE_bs: float
    I_BE_partial: float
    I_BE_partial_mc: float
    I_BE_partial_mc_se: float
    I_BE_g: float
    K_gaussian: float
    eps_tolerable: float
    ordering_ok: int
    mi_method: str


FIG5_COLUMNS = tuple(Fig5Row.__dataclass_fields__)


def eve_ir_information_mc(blocks: Sequence[Block], min_samples: int = 1000):
    """Monte Carlo I(Eve; Bob) over intercepted pulses pooled across blocks.

    Returns ``(bits, standard_error, method, n_pulses)``; ``bits`` is NaN
    when no pulse was intercepted.
    """
    e = np.concatenate([b.eve_sifted[b.intercepted] for b in blocks])
    y = np.concatenate([b.bob_outcome[b.intercepted] for b in blocks])
    n = len(e)
    if n < min_samples:
        return math.nan, math.nan, "", n
    method = select_mi_method(e, y)
    bits = mi_monte_carlo((e, y), method=method, min_samples=min_samples)
    return bits, mi_gaussian_se(bits, n), method.value, n


def fig5_table(
    t_list: Sequence[float],
    mu_grid: Sequence[float],
    cfg: BlockConfig,
    calib: Calibration,
    eps_T: float = 0.1,
) -> list[Fig5Row]:
    """Information rates versus equivalent excess noise ``2 mu + eps_T``.

    The Monte Carlo partial-IR point combines the measured IR information
    with the BS formula, weighted by the observed interception fraction.
    """
    rows = []
    idx = 0
    for t in t_list:
        try:
            eps_star = tolerable_excess_noise(calib.mod.V_A, float(t), calib.det.eta, calib.beta)
        except NoCrossingError:
            eps_star = math.nan
        for mu in mu_grid:
            spec = AttackSpec(mu=float(mu), T=float(t), eps_T=eps_T)
            inp = RateInputs(
                V_A=calib.mod.V_A,
                T=spec.T,
                epsilon=2.0 * spec.mu + eps_T,
                eta=calib.det.eta,
                beta=calib.beta,
                mu=spec.mu,
                eps_t=eps_T,
            )
            blocks = []
            for _ in range(cfg.blocks):
                blk, _test, _g = simulate_raw_block(cfg, spec, calib, idx)
                blocks.append(blk)
                idx += 1
            bits, se, method, n_ir = eve_ir_information_mc(blocks)
            n_all = sum(len(b) for b in blocks)
            frac = n_ir / n_all
            bs = i_be_bs(inp)
            if n_ir == 0:
                mc, mc_se = bs, 0.0
            elif math.isnan(bits):
                mc, mc_se = math.nan, math.nan
            else:
                mc = frac * bits + (1.0 - frac) * bs
                # Binomial noise of the observed interception fraction also moves the point.
                mc_se = math.hypot(frac * se, (bits - bs) * math.sqrt(frac * (1.0 - frac) / n_all))
            part, g_bound = i_be_partial(inp), i_be_gaussian(inp)
            rows.append(
                Fig5Row(
                    T=spec.T,
                    mu=spec.mu,
                    epsilon=inp.epsilon,
                    I_AB=i_ab_gaussian(inp),
                    I_AB_ng=i_ab_nongaussian(inp),
                    I_BE_bs=bs,
                    I_BE_partial=part,
                    I_BE_partial_mc=mc,
                    I_BE_partial_mc_se=mc_se,
                    I_BE_g=g_bound,
                    K_gaussian=key_rate(inp),
                    eps_tolerable=eps_star,
                    ordering_ok=int(bs <= part + 1e-12 and part <= g_bound + 1e-12),
                    mi_method=method,
                )
            )
    return rows
