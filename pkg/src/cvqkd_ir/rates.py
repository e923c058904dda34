"""Information rates, key rate and tolerable excess noise (all in bits per pulse)."""
from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, replace

import numpy as np
from scipy import integrate, optimize, stats
from scipy.special import logsumexp

LN2 = math.log(2.0)


class QuadratureError(RuntimeError):
    pass


class NoCrossingError(ValueError):
    """Key rate does not change sign over the searched excess-noise range."""


class AttackModel(str, enum.Enum):
    GAUSSIAN_BOUND = "gaussian-bound"
    PARTIAL_IR = "partial-ir"
    BS = "bs"


@dataclass(frozen=True)
class RateInputs:
    """Parameters for the information rates.

    ``epsilon`` feeds the Gaussian formulas; ``mu`` and ``eps_t`` describe
    the partial intercept-resend attack for the mixture-based quantities.
    """

    V_A: float = 36.6
    T: float = 1.0
    epsilon: float = 0.0
    eta: float = 0.6
    beta: float = 1.0
    mu: float = 0.0
    eps_t: float = 0.0

    def __post_init__(self):
        checks = [
            (self.V_A >= 0, "V_A >= 0"),
            (0 < self.T <= 1, "0 < T <= 1"),
            (self.epsilon >= 0, "epsilon >= 0"),
            (0 < self.eta <= 1, "0 < eta <= 1"),
            (0 <= self.beta <= 1, "0 <= beta <= 1"),
            (0 <= self.mu <= 1, "0 <= mu <= 1"),
            (self.eps_t >= 0, "eps_t >= 0"),
        ]
        for ok, what in checks:
            if not ok:
                raise ValueError(f"invalid RateInputs: need {what} ({self})")

    @property
    def eta_t(self) -> float:
        return self.eta * self.T


@dataclass(frozen=True)
class RateReport:
    I_AB_g: float
    I_AB_ng: float
    I_BE_bs: float
    I_BE_ir: float
    I_BE_partial: float
    I_BE_g: float
    K: float


def i_ab_gaussian(inp: RateInputs) -> float:
    a = inp.eta_t
    noise = 1.0 + a * inp.epsilon
    return 0.5 * math.log2((a * inp.V_A + noise) / noise)


def i_be_gaussian(inp: RateInputs) -> float:
    """Realistic-mode bound on Eve's information for reverse reconciliation."""
    T, eta, V = inp.T, inp.eta, inp.V_A
    var_b = eta * T * V + 1.0 + eta * T * inp.epsilon
    cond = eta / (1.0 - T + T * inp.epsilon + T / (V + 1.0)) + 1.0 - eta
    return 0.5 * math.log2(var_b / cond)


def i_be_bs(inp: RateInputs) -> float:
    return i_be_gaussian(replace(inp, epsilon=0.0))


def i_be_ir(inp: RateInputs) -> float:
    """Eve's information on Bob's data for an intercepted pulse.

    Eve knows the amplitude she resent; what she misses is Bob's unit
    detection noise plus the technical noise ``eps_t`` she does not control.
    """
    a = inp.eta_t
    noise = 1.0 + a * inp.eps_t
    return 0.5 * math.log2((a * (inp.V_A + 2.0) + noise) / noise)


def i_be_partial(inp: RateInputs) -> float:
    return inp.mu * i_be_ir(inp) + (1.0 - inp.mu) * i_be_bs(inp)


@dataclass(frozen=True)
class QuadratureConfig:
    """Numerical settings for the mixture entropies.

    The integration window is ``+-span`` standard deviations of the widest
    component; ``tol`` is the absolute error target in bits.
    """

    span: float = 10.0
    tol: float = 1e-6
    limit: int = 400


def mixture_entropy(weights, variances, cfg: QuadratureConfig = QuadratureConfig()) -> float:
    """Differential entropy (bits) of a zero-mean Gaussian scale mixture."""
    w = np.asarray(weights, dtype=float)
    v = np.asarray(variances, dtype=float)
    keep = w > 0
    w, v = w[keep], v[keep]
    logw = np.log(w) - 0.5 * np.log(2 * np.pi * v)
    half_inv = 0.5 / v

    def integrand(x):
        logf = logsumexp(logw - x * x * half_inv)
        return -math.exp(logf) * logf

    smax = math.sqrt(v.max())
    lim = cfg.span * smax
    brk = sorted({float(s) for s in np.sqrt(v)} | {float(3 * s) for s in np.sqrt(v)})
    # Symmetric integrand: integrate the positive half and double.
    total, err = 0.0, 0.0
    edges = [0.0] + [b for b in brk if b < lim] + [lim]
    with warnings.catch_warnings():
        # Convergence is judged from the returned error estimate below.
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        for lo, hi in zip(edges[:-1], edges[1:]):
            val, e = integrate.quad(integrand, lo, hi, epsabs=cfg.tol * LN2 / 20, epsrel=0, limit=cfg.limit)
            total += val
            err += e
    h_nats = 2.0 * total
    err_bits = 2.0 * err / LN2
    if not np.isfinite(h_nats) or err_bits > cfg.tol:
        raise QuadratureError(f"entropy quadrature did not converge (error estimate {err_bits:.2e} bits)")
    return h_nats / LN2


def i_ab_nongaussian(inp: RateInputs, quadrature_cfg: QuadratureConfig = QuadratureConfig()) -> float:
    """Alice-Bob mutual information of the actual two-component mixture channel."""
    a = inp.eta_t
    s1 = 1.0 + a * inp.eps_t
    s2 = 1.0 + 2.0 * a + a * inp.eps_t
    w = [1.0 - inp.mu, inp.mu]
    h_b = mixture_entropy(w, [a * inp.V_A + s1, a * inp.V_A + s2], quadrature_cfg)
    h_b_given_a = mixture_entropy(w, [s1, s2], quadrature_cfg)
    return h_b - h_b_given_a


def key_rate(inp: RateInputs, attack_model: AttackModel | str = AttackModel.GAUSSIAN_BOUND) -> float:
    """Reverse-reconciliation key rate ``beta * I_AB - I_BE``; negative means no key."""
    model = AttackModel(attack_model)
    i_be = {
        AttackModel.GAUSSIAN_BOUND: i_be_gaussian,
        AttackModel.PARTIAL_IR: i_be_partial,
        AttackModel.BS: i_be_bs,
    }[model](inp)
    return inp.beta * i_ab_gaussian(inp) - i_be


def rate_report(inp: RateInputs, attack_model=AttackModel.GAUSSIAN_BOUND, quadrature_cfg=QuadratureConfig()) -> RateReport:
    return RateReport(
        I_AB_g=i_ab_gaussian(inp),
        I_AB_ng=i_ab_nongaussian(inp, quadrature_cfg),
        I_BE_bs=i_be_bs(inp),
        I_BE_ir=i_be_ir(inp),
        I_BE_partial=i_be_partial(inp),
        I_BE_g=i_be_gaussian(inp),
        K=key_rate(inp, attack_model),
    )


def tolerable_excess_noise(V_A: float, T: float, eta: float, beta: float = 1.0, eps_max: float = 2.0, xtol: float = 1e-7) -> float:
    """Excess noise at which ``beta * I_AB`` meets the Gaussian bound on ``I_BE``.

    Raises :class:`NoCrossingError` if the key rate does not go from
    positive to non-positive on ``[0, eps_max]``.
    """
    base = RateInputs(V_A=V_A, T=T, eta=eta, beta=beta)

    def k(eps):
        return key_rate(replace(base, epsilon=eps))

    k0, k1 = k(0.0), k(eps_max)
    if not (k0 > 0.0 and k1 <= 0.0):
        raise NoCrossingError(f"no key-rate sign change on [0, {eps_max}] (K(0)={k0:.4g}, K({eps_max})={k1:.4g})")
    return optimize.bisect(k, 0.0, eps_max, xtol=xtol)


# --- Monte Carlo mutual information --------------------------------------

MIN_MI_SAMPLES = 100_000


class MIMethod(str, enum.Enum):
    AUTO = "auto"
    GAUSSIAN = "gaussian"
    BINNED = "binned"


def _looks_gaussian(z: np.ndarray, n_se: float = 5.0) -> bool:
    n = len(z)
    return abs(stats.kurtosis(z)) < n_se * math.sqrt(24.0 / n) and abs(stats.skew(z)) < n_se * math.sqrt(6.0 / n)


def select_mi_method(x, y) -> MIMethod:
    """Pick the correlation estimator when both marginals look Gaussian, else binning."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return MIMethod.GAUSSIAN if _looks_gaussian(x) and _looks_gaussian(y) else MIMethod.BINNED


def mi_gaussian(x, y) -> float:
    rho = np.corrcoef(x, y)[0, 1]
    return -0.5 * math.log2(1.0 - rho * rho)


def mi_binned(x, y, bins: int | None = None) -> float:
    """Plug-in MI on equal-frequency bins with the Miller-Madow bias correction.

    Ranks make each marginal uniform (MI is invariant under monotone maps),
    so the marginal entropies are exactly ``log2(bins)`` up to ties.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = len(x)
    if bins is None:
        # sqrt(n)/5 balances discretisation loss against residual cell bias.
        bins = max(8, int(round(math.sqrt(n) / 5.0)))
    ix = (stats.rankdata(x, method="ordinal") - 1) * bins // n
    iy = (stats.rankdata(y, method="ordinal") - 1) * bins // n

    def entropy(counts):
        c = counts[counts > 0]
        p = c / n
        return -float(p @ np.log2(p)) + (len(c) - 1) / (2.0 * n * LN2)

    hx = entropy(np.bincount(ix, minlength=bins))
    hy = entropy(np.bincount(iy, minlength=bins))
    hxy = entropy(np.bincount(ix * bins + iy, minlength=bins * bins))
    return hx + hy - hxy


def mi_monte_carlo(samples, method: MIMethod | str = MIMethod.AUTO, min_samples: int = MIN_MI_SAMPLES) -> float:
    """Mutual information (bits) between the two columns of ``samples``.

    ``samples`` is an ``(n, 2)`` array or a pair ``(x, y)`` of equal-length
    arrays. With ``method="auto"`` the Gaussian correlation formula is used
    when both marginals pass a skewness/kurtosis check, otherwise the binned
    plug-in estimator; :func:`select_mi_method` reports the choice.
    """
    x, y = _split_samples(samples)
    if len(x) < min_samples:
        raise ValueError(f"need at least {min_samples} paired samples, got {len(x)}")
    m = MIMethod(method)
    if m is MIMethod.AUTO:
        m = select_mi_method(x, y)
    return mi_gaussian(x, y) if m is MIMethod.GAUSSIAN else mi_binned(x, y)


def mi_gaussian_se(mi_bits: float, n: int) -> float:
    """Delta-method standard error of the correlation-based MI estimate."""
    rho = math.sqrt(max(0.0, 1.0 - 2.0 ** (-2.0 * mi_bits)))
    return rho / (LN2 * math.sqrt(n))


def _split_samples(samples):
    if isinstance(samples, tuple) and len(samples) == 2:
        x, y = (np.asarray(s, dtype=float).ravel() for s in samples)
    else:
        arr = np.asarray(samples, dtype=float)
        if arr.ndim != 2 or arr.shape[1] != 2:
            raise ValueError(f"expected (n, 2) samples, got shape {arr.shape}")
        x, y = arr[:, 0], arr[:, 1]
    if len(x) != len(y):
        raise ValueError("x and y lengths differ")
    return x, y
