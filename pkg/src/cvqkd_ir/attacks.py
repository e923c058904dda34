"""Eve-controlled quantum channel: beam splitting, intercept-resend and their mixture."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .optics import (
    DetectorModel,
    Quadrature,
    QuadraturePair,
    _gen,
    detect_realistic,
    heterodyne,
    homodyne,
)


@dataclass(frozen=True)
class AttackSpec:
    """Partial intercept-resend attack on a lossy line.

    mu
        Fraction of pulses Eve intercepts and resends (the rest are tapped
        with a beam splitter).
    T
        Channel transmission.
    eps_T
        Technical excess noise, input referred, in N0 units.
    """

    mu: float = 0.0
    T: float = 1.0
    eps_T: float = 0.0

    def __post_init__(self):
        if not (0.0 <= self.mu <= 1.0):
            raise ValueError(f"mu must lie in [0, 1], got {self.mu}")
        if not (0.0 < self.T <= 1.0):
            raise ValueError(f"T must lie in (0, 1], got {self.T}")
        if not (self.eps_T >= 0.0):
            raise ValueError(f"eps_T must be >= 0, got {self.eps_T}")


@dataclass(frozen=True)
class ChannelParams:
    """Gaussian channel with transmission ``T`` and input-referred excess noise."""

    T: float
    epsilon: float

    def __post_init__(self):
        if not (0.0 < self.T <= 1.0):
            raise ValueError(f"T must lie in (0, 1], got {self.T}")
        if not (self.epsilon >= 0.0):
            raise ValueError(f"epsilon must be >= 0, got {self.epsilon}")


@dataclass(frozen=True)
class PulseRecord:
    alice: QuadraturePair
    intercepted: bool
    eve_heterodyne: Optional[QuadraturePair]
    eve_bs_tap: Optional[QuadraturePair]
    bob_choice: Quadrature
    bob_outcome: float


@dataclass
class Block:
    """Struct-of-arrays block of simulated pulses.

    Eve's columns hold her heterodyne record on intercepted pulses and the
    mean of her stored beam-splitter tap elsewhere; ``intercepted`` says
    which. ``bob_choice`` is 0 for X and 1 for P.
    """

    alice_x: np.ndarray
    alice_p: np.ndarray
    intercepted: np.ndarray
    eve_x: np.ndarray
    eve_p: np.ndarray
    bob_choice: np.ndarray
    bob_outcome: np.ndarray

    def __len__(self) -> int:
        return len(self.bob_outcome)

    def __getitem__(self, i: int) -> PulseRecord:
        eve = QuadraturePair(float(self.eve_x[i]), float(self.eve_p[i]))
        hit = bool(self.intercepted[i])
        return PulseRecord(
            alice=QuadraturePair(float(self.alice_x[i]), float(self.alice_p[i])),
            intercepted=hit,
            eve_heterodyne=eve if hit else None,
            eve_bs_tap=None if hit else eve,
            bob_choice=Quadrature(int(self.bob_choice[i])),
            bob_outcome=float(self.bob_outcome[i]),
        )

    @property
    def alice(self) -> QuadraturePair:
        return QuadraturePair(self.alice_x, self.alice_p)

    @property
    def eve(self) -> QuadraturePair:
        return QuadraturePair(self.eve_x, self.eve_p)

    @property
    def alice_sifted(self) -> np.ndarray:
        """Alice's quadrature matching Bob's announced basis."""
        return self.alice.select(self.bob_choice)

    @property
    def eve_sifted(self) -> np.ndarray:
        return self.eve.select(self.bob_choice)

    def take(self, idx) -> "Block":
        return Block(*(getattr(self, f)[idx] for f in _BLOCK_FIELDS))

    @classmethod
    def from_records(cls, records) -> "Block":
        records = list(records)
        eves = [r.eve_heterodyne if r.intercepted else r.eve_bs_tap for r in records]
        return cls(
            alice_x=np.array([r.alice.x for r in records], dtype=float),
            alice_p=np.array([r.alice.p for r in records], dtype=float),
            intercepted=np.array([r.intercepted for r in records], dtype=bool),
            eve_x=np.array([e.x for e in eves], dtype=float),
            eve_p=np.array([e.p for e in eves], dtype=float),
            bob_choice=np.array([int(r.bob_choice) for r in records], dtype=np.int8),
            bob_outcome=np.array([r.bob_outcome for r in records], dtype=float),
        )


_BLOCK_FIELDS = ("alice_x", "alice_p", "intercepted", "eve_x", "eve_p", "bob_choice", "bob_outcome")


def channel_bs(alice: QuadraturePair, spec: AttackSpec, rng=None):
    """Beam-splitter tap of transmission ``T``.

    Returns ``(forwarded_mean, eve_tap_mean)``. Both are deterministic
    coherent amplitudes; shot noise only enters when a mode is measured.
    ``rng`` is unused and kept for a uniform channel signature.
    """
    fwd = alice.scaled(np.sqrt(spec.T))
    tap = alice.scaled(np.sqrt(1.0 - spec.T))
    return fwd, tap


def channel_ir(alice: QuadraturePair, spec: AttackSpec, rng):
    """Intercept-resend: heterodyne, then resend ``sqrt(T)`` times the record.

    Returns ``(resent_mean, eve_record)``.
    """
    rec = heterodyne(alice, rng)
    return rec.scaled(np.sqrt(spec.T)), rec


def eve_bs_homodyne(tap_mean: QuadraturePair, choice, rng) -> np.ndarray:
    """Eve's delayed homodyne of her stored tap in Bob's announced basis."""
    return homodyne(tap_mean, choice, 0.0, rng)


def simulate_block(
    alice: QuadraturePair,
    spec: AttackSpec,
    det: DetectorModel,
    choice: np.ndarray,
    rng,
) -> Block:
    """Send a batch of Alice's states through the partial IR channel to Bob."""
    g = _gen(rng)
    ax = np.atleast_1d(np.asarray(alice.x, dtype=float))
    ap = np.atleast_1d(np.asarray(alice.p, dtype=float))
    choice = np.broadcast_to(np.asarray(choice, dtype=np.int8), ax.shape).copy()
    n = ax.shape[0]
    a = QuadraturePair(ax, ap)

    hit = g.random(n) < spec.mu
    bs_fwd, tap = channel_bs(a, spec)
    ir_fwd, rec = channel_ir(a, spec, g)
    fwd = QuadraturePair(np.where(hit, ir_fwd.x, bs_fwd.x), np.where(hit, ir_fwd.p, bs_fwd.p))
    eve = QuadraturePair(np.where(hit, rec.x, tap.x), np.where(hit, rec.p, tap.p))

    draw = homodyne(fwd, choice, 0.0, g)
    bob = detect_realistic(draw, det, g)
    tech_var = det.eta * spec.T * spec.eps_T
    if tech_var > 0:
        bob = bob + g.normal(0.0, 1.0, n) * np.sqrt(tech_var)
    return Block(ax, ap, hit, np.asarray(eve.x), np.asarray(eve.p), choice, np.asarray(bob))


def simulate_pulse(
    alice: QuadraturePair,
    spec: AttackSpec,
    det: DetectorModel,
    choice: Quadrature,
    rng,
) -> PulseRecord:
    """Single-pulse form of :func:`simulate_block`."""
    blk = simulate_block(
        QuadraturePair(np.array([alice.x], dtype=float), np.array([alice.p], dtype=float)),
        spec,
        det,
        np.array([int(choice)], dtype=np.int8),
        rng,
    )
    return blk[0]


def equivalent_gaussian(spec: AttackSpec) -> ChannelParams:
    """Gaussian channel with the same first and second moments as the mixture.

    Excess noise is the weighted sum over branches (2 for IR, 0 for BS)
    plus the technical contribution.
    """
    return ChannelParams(T=spec.T, epsilon=2.0 * spec.mu + spec.eps_T)
