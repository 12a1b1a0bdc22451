"""Exact angular-momentum algebra.

Wigner 6j symbols evaluated by the Racah single-sum formula in exact
rational arithmetic (half-integers carried as doubled integers, factorials
as Python bignums), converted to floating point only at the very end. At
desk scale (arguments up to 99/2) results are correct to about one ulp.

The module also provides the rank-K selection rule for electronic states,
the electric-quadrupole hyperfine ladder with its exact centroid
cancellation, and the perturbative rank-2 admixture picked up by dressed
j = 1/2 states through off-diagonal hyperfine mixing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .errors import ValidationError

__all__ = [
    "wigner_6j",
    "triangle_ok",
    "ElectronicChannel",
    "rank2_allowed",
    "HyperfineLevel",
    "hfs_e2_levels",
    "centroid",
    "induced_rank2_admixture",
    "default_channels",
]


def _twice(j, name: str = "argument") -> int:
    """Validate a half-integer and return it doubled as an exact int."""
    if isinstance(j, Fraction):
        tj = 2 * j
        if tj.denominator != 1:
            raise ValidationError(f"{name} {j} is not a half-integer")
        tj = int(tj)
    elif isinstance(j, int):
        tj = 2 * j
    else:
        tj = round(2 * float(j))
        if tj != 2 * float(j):
            raise ValidationError(f"{name} {j!r} is not a half-integer")
    if tj < 0:
        raise ValidationError(f"{name} {j!r} must be non-negative")
    return tj


def triangle_ok(j1, j2, j3) -> bool:
    """Triangle condition |j1-j2| <= j3 <= j1+j2 with integer perimeter."""
    t1, t2, t3 = _twice(j1), _twice(j2), _twice(j3)
    return abs(t1 - t2) <= t3 <= t1 + t2 and (t1 + t2 + t3) % 2 == 0


def _delta_sq(ta: int, tb: int, tc: int) -> Fraction:
    # square of the triangle coefficient, exact
    return Fraction(
        math.factorial((ta + tb - tc) // 2)
        * math.factorial((ta - tb + tc) // 2)
        * math.factorial((-ta + tb + tc) // 2),
        math.factorial((ta + tb + tc) // 2 + 1),
    )


def wigner_6j(j1, j2, j3, j4, j5, j6) -> float:
    """Wigner 6j symbol {j1 j2 j3; j4 j5 j6} by the Racah sum.

    Returns exactly 0.0 whenever any of the four triads violates the
    triangle condition; this encodes the rank-2 selection rule, e.g.
    {1/2 1/2 2; I I F} = 0 because (1/2, 1/2, 2) cannot close.
    """
    t = [_twice(j, f"j{k+1}") for k, j in enumerate((j1, j2, j3, j4, j5, j6))]
    triads = [(t[0], t[1], t[2]), (t[0], t[4], t[5]), (t[3], t[1], t[5]), (t[3], t[4], t[2])]
    for ta, tb, tc in triads:
        if not (abs(ta - tb) <= tc <= ta + tb and (ta + tb + tc) % 2 == 0):
            return 0.0
    dsq = Fraction(1)
    for triad in triads:
        dsq *= _delta_sq(*triad)
    floors = [(ta + tb + tc) // 2 for ta, tb, tc in triads]
    caps = [
        (t[0] + t[1] + t[3] + t[4]) // 2,
        (t[1] + t[2] + t[4] + t[5]) // 2,
        (t[2] + t[0] + t[5] + t[3]) // 2,
    ]
    total = Fraction(0)
    for z in range(max(floors), min(caps) + 1):
        den = 1
        for f in floors:
            den *= math.factorial(z - f)
        for c in caps:
            den *= math.factorial(c - z)
        total += Fraction((-1) ** z * math.factorial(z + 1), den)
    if total == 0:
        return 0.0
    # |result| = sqrt(total^2 * prod(delta^2)), sign from the alternating sum
    magnitude_sq = total * total * dsq
    sign = 1.0 if total > 0 else -1.0
    return sign * math.sqrt(float(magnitude_sq))


@dataclass(frozen=True)
class ElectronicChannel:
    """One atomic state/transition channel of a hydrogen-like ion.

    fs_gap_eV is the interval to the fine-structure partner level; it is
    None for s states, which have no partner.
    """

    n: int
    l: int
    j: Fraction
    label: str
    fs_gap_eV: float | None = None

    def __post_init__(self):
        j = parse_half_integer(self.j)
        object.__setattr__(self, "j", j)
        if self.l < 0 or self.n <= self.l:
            raise ValidationError(f"channel {self.label!r}: requires n > l >= 0")
        if abs(Fraction(self.l) - Fraction(1, 2)) > j or j > self.l + Fraction(1, 2):
            raise ValidationError(f"channel {self.label!r}: j={j} incompatible with l={self.l}")
        if self.fs_gap_eV is not None and self.fs_gap_eV <= 0:
            raise ValidationError(f"channel {self.label!r}: fine-structure gap must be positive")

    def rank2_sensitive(self) -> bool:
        """A diagonal rank-2 matrix element needs j >= 3/2."""
        return self.j >= Fraction(3, 2)


def parse_half_integer(j) -> Fraction:
    if isinstance(j, str):
        j = Fraction(j)
    return Fraction(_twice(j, "j"), 2)


def rank2_allowed(channel: ElectronicChannel, K: int) -> bool:
    """Selection rule for a rank-K tensor diagonal in j: K <= 2j.

    j = 1/2 states therefore carry no quadrupole (K = 2) observable at
    zeroth order; the entire rank-2 signal lives in j >= 3/2 states.
    """
    if K < 0:
        raise ValidationError(f"rank K must be non-negative, got {K}")
    return Fraction(K) <= 2 * channel.j


@dataclass(frozen=True)
class HyperfineLevel:
    """One hyperfine component F of an (I, j) manifold.

    K_casimir = F(F+1) - I(I+1) - j(j+1). The quadrupole coefficient is
    the exact rational multiplier of the electric-quadrupole constant; its
    (2F+1)-weighted sum over a full ladder vanishes identically, which is
    what makes centroid spectroscopy blind to the first-order interaction.
    """

    F: Fraction
    K_casimir: Fraction
    quadrupole_coefficient: Fraction
    shift_eV: float = 0.0

    @property
    def weight(self) -> int:
        return int(2 * self.F + 1)


def hfs_e2_levels(I, j, B_const_eV: float) -> tuple[HyperfineLevel, ...]:
    """Electric-quadrupole hyperfine ladder of an (I, j) manifold.

    Shift per level: B * [ (3/2) K (K+1) - 2 I(I+1) j(j+1) ]
    / [ 2I(2I-1) * 2j(2j-1) ], with K the Casimir combination. Quadrupole
    structure requires both I >= 1 and j >= 3/2; otherwise the F ladder is
    returned with all quadrupole coefficients exactly zero.
    """
    I = Fraction(_twice(I, "I"), 2)
    j = Fraction(_twice(j, "j"), 2)
    has_quadrupole = I >= 1 and j >= Fraction(3, 2)
    levels = []
    F = abs(I - j)
    while F <= I + j:
        K = F * (F + 1) - I * (I + 1) - j * (j + 1)
        if has_quadrupole:
            numerator = Fraction(3, 2) * K * (K + 1) - 2 * I * (I + 1) * j * (j + 1)
            denominator = (2 * I * (2 * I - 1)) * (2 * j * (2 * j - 1))
            coefficient = numerator / denominator
        else:
            coefficient = Fraction(0)
        levels.append(
            HyperfineLevel(
                F=F,
                K_casimir=K,
                quadrupole_coefficient=coefficient,
                shift_eV=B_const_eV * float(coefficient),
            )
        )
        F += 1
    return tuple(levels)


def centroid(levels: Sequence[HyperfineLevel]) -> float:
    """(2F+1)-weighted mean shift of a hyperfine ladder, in eV.

    For a pure first-order electric-quadrupole ladder this is zero: the
    rank-2 trace identity. A uniform scalar offset passes through
    unchanged, so centroid extraction cancels the first-order quadrupole
    background while preserving scalar physics.
    """
    if not levels:
        raise ValidationError("cannot take the centroid of an empty ladder")
    weights = [lvl.weight for lvl in levels]
    return sum(w * lvl.shift_eV for w, lvl in zip(weights, levels)) / sum(weights)


def induced_rank2_admixture(V_mix_eV: float, fs_gap_eV: float, signal_p32_eV: float) -> float:
    """Effective rank-2 matrix element of a dressed j = 1/2 state.

    Off-diagonal quadrupole mixing with the j = 3/2 partner admixes a
    rank-2 component of 2 * (V_mix / fs_gap) * signal; for realistic
    mixing this lands many orders below the metrological floor, which is
    why j = 1/2 channels count as rank-2 blind.
    """
    if fs_gap_eV <= 0:
        raise ValidationError(f"fine-structure gap must be positive, got {fs_gap_eV!r}")
    return 2.0 * (V_mix_eV / fs_gap_eV) * signal_p32_eV


def default_channels(fs_gap_2p_eV: float = 150.0) -> tuple[ElectronicChannel, ...]:
    """The hydrogen-like channel set used by the bundled Mo analyses.

    The 3d gap is a Dirac-scaling estimate from the 2p interval; only the
    2p gap enters any bundled computation.
    """
    return (
        ElectronicChannel(n=1, l=0, j=Fraction(1, 2), label="1s1/2"),
        ElectronicChannel(n=2, l=0, j=Fraction(1, 2), label="2s1/2"),
        ElectronicChannel(n=2, l=1, j=Fraction(1, 2), label="2p1/2", fs_gap_eV=fs_gap_2p_eV),
        ElectronicChannel(n=2, l=1, j=Fraction(3, 2), label="2p3/2", fs_gap_eV=fs_gap_2p_eV),
        ElectronicChannel(n=3, l=2, j=Fraction(5, 2), label="3d5/2", fs_gap_eV=14.8),
    )
