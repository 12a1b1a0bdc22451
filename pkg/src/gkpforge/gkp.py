"""Generalized King Plot rank-2 extraction.

After the even-even hyperplane has been subtracted, the per-(isotope,
transition) rank-2 anomaly decomposes into three terms: a static
quadrupole background proportional to Qs, a dynamic polarizability
background proportional to alpha_T (itself taken proportional to B(E2)),
and the gravitomagnetic term proportional to the spin-mass lever I^2/M.
The design matrix therefore has one row per (odd isotope, rank-2
transition) and one column per unknown amplitude, ordered
[qs_background, alpha_t_background, gravitomagnetic].

Raw columns span many decades, so all solving happens on the
column-normalized (preconditioned) matrix; estimates and covariances are
scaled back through the stored column norms. Underdetermined or
numerically rank-deficient systems are refused rather than regularized:
silently pseudo-inverting a degenerate extraction is exactly the failure
mode this analysis exists to prevent.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import (
    ConfigurationError,
    RankDeficiencyError,
    UnderdeterminedError,
    ValidationError,
)
from .nucdata import IsotopeRecord, spin_mass_lever
from .resources import resource_path

__all__ = [
    "COLUMN_NAMES",
    "TransitionCoefficients",
    "ElectronicCoefficients",
    "load_coefficients",
    "alpha_t_from_be2",
    "alpha_t_uncertainty",
    "Topology",
    "solvable",
    "solvability_verdict",
    "DesignMatrix",
    "build_design",
    "precondition",
    "condition_number",
    "ExtractionResult",
    "extract",
    "RANK_DEFICIENCY_RTOL",
]

COLUMN_NAMES = ("qs_background", "alpha_t_background", "gravitomagnetic")

# sigma_min below this multiple of machine epsilon x sigma_max counts as
# numerically rank deficient
RANK_DEFICIENCY_RTOL = 1e3 * np.finfo(float).eps


@dataclass(frozen=True)
class TransitionCoefficients:
    """Electronic coefficients of one transition (common to all isotopes)."""

    label: str
    H_eV_per_b: float
    P_eV_per_wu: float
    G_eV_per_lever: float
    upper_j: Fraction = Fraction(3, 2)

    def rank2_sensitive(self) -> bool:
        return self.upper_j >= Fraction(3, 2)

    def __post_init__(self):
        for name in ("H_eV_per_b", "P_eV_per_wu", "G_eV_per_lever"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ValidationError(f"transition {self.label!r}: {name} must be finite")
        if not self.rank2_sensitive() and any(
            getattr(self, n) != 0.0 for n in ("H_eV_per_b", "P_eV_per_wu", "G_eV_per_lever")
        ):
            raise ValidationError(
                f"transition {self.label!r} has a j < 3/2 upper state and must have zero rank-2 coefficients"
            )


@dataclass(frozen=True)
class ElectronicCoefficients:
    name: str
    transitions: tuple[TransitionCoefficients, ...]
    provenance: str = ""
    alpha_t_convention: str = ""

    def __post_init__(self):
        if not any(t.rank2_sensitive() for t in self.transitions):
            raise ValidationError("at least one rank-2-sensitive transition is required")

    def rank2_transitions(self) -> tuple[TransitionCoefficients, ...]:
        return tuple(t for t in self.transitions if t.rank2_sensitive())

    def subset(self, labels: Sequence[str]) -> "ElectronicCoefficients":
        known = {t.label: t for t in self.transitions}
        missing = [lab for lab in labels if lab not in known]
        if missing:
            raise ConfigurationError(f"unknown transition labels {missing} (known: {sorted(known)})")
        return ElectronicCoefficients(
            name=self.name,
            transitions=tuple(known[lab] for lab in labels),
            provenance=self.provenance,
            alpha_t_convention=self.alpha_t_convention,
        )


def load_coefficients(source: str | Path = "mo41-coeffs-v1") -> ElectronicCoefficients:
    path = resource_path(str(source))
    obj = json.loads(Path(path).read_text(encoding="utf-8"))
    try:
        transitions = tuple(
            TransitionCoefficients(
                label=t["label"],
                H_eV_per_b=float(t["H_eV_per_b"]),
                P_eV_per_wu=float(t["P_eV_per_wu"]),
                G_eV_per_lever=float(t["G_eV_per_lever"]),
                upper_j=Fraction(t["upper"]["j"]),
            )
            for t in obj["transitions"]
        )
        return ElectronicCoefficients(
            name=obj["name"],
            transitions=transitions,
            provenance=obj.get("provenance", ""),
            alpha_t_convention=obj.get("alpha_t_convention", ""),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigurationError(f"coefficients file {path} is malformed: {exc}") from exc


def alpha_t_from_be2(records: Sequence[IsotopeRecord]) -> dict[int, float]:
    """Per-isotope polarizability values under the proportional-to-B(E2)
    convention (unit conversion absorbed into the P coefficient)."""
    values = {}
    for rec in records:
        if rec.BE2_up is None:
            raise ValidationError(f"isotope A={rec.A} has no B(E2) entry for the polarizability proxy")
        values[rec.A] = rec.BE2_up.value
    return values


# fragmented odd-isotope strengths are summed multiplet values, known to
# roughly this relative accuracy when no explicit sigma is given
EFFECTIVE_BE2_DEFAULT_REL = 0.15

# non-separable nuclear/electronic coupling corrections leave the
# polarizability factorization accurate to about this relative level
FACTORIZATION_REL = 1e-6


def alpha_t_uncertainty(rec: IsotopeRecord, factorization_rel: float = FACTORIZATION_REL) -> float:
    """Relative uncertainty of the polarizability proxy of one isotope.

    Quadrature of the B(E2) knowledge and the factorization error. Records
    flagged effective (fragmented multiplet strengths) without an explicit
    sigma fall back to the nominal fragmented-strength accuracy.
    """
    if rec.BE2_up is None or rec.BE2_up.value == 0:
        raise ValidationError(f"isotope A={rec.A} has no usable B(E2) entry")
    if rec.BE2_up.sigma is not None:
        knowledge = rec.BE2_up.sigma / abs(rec.BE2_up.value)
    elif rec.BE2_up.effective:
        knowledge = EFFECTIVE_BE2_DEFAULT_REL
    else:
        knowledge = 0.0
    return math.hypot(knowledge, factorization_rel)


# ---------------------------------------------------------------------------
# topology counting

@dataclass(frozen=True)
class Topology:
    """Counting summary of one experimental configuration."""

    N_ee: int
    N_odd: int
    N_trans_rank2: int
    notes: str = ""

    def __post_init__(self):
        if min(self.N_ee, self.N_odd, self.N_trans_rank2) < 0:
            raise ValidationError("topology counts must be non-negative")


def solvable(top: Topology, N_bkg: int = 2) -> tuple[bool, int, int]:
    """Counting solvability of the rank-2 extraction.

    n_equations = N_odd x N_trans, n_unknowns = N_bkg + 1. This is a
    necessary counting condition only; actual rank is verified on the
    design matrix.
    """
    if N_bkg < 0:
        raise ValidationError(f"N_bkg must be non-negative, got {N_bkg}")
    n_equations = top.N_odd * top.N_trans_rank2
    n_unknowns = N_bkg + 1
    ok = n_equations >= n_unknowns and top.N_odd >= 1 and top.N_trans_rank2 >= 1
    return ok, n_equations, n_unknowns


def solvability_verdict(top: Topology, N_bkg: int = 2) -> str:
    """Human-readable verdict, e.g. "Yes (3 = 3)" or "No (2 < 3)"."""
    ok, n_eq, n_unk = solvable(top, N_bkg)
    if not ok:
        return f"No ({n_eq} < {n_unk})"
    if n_eq == n_unk:
        return f"Yes ({n_eq} = {n_unk})"
    if n_eq >= 2 * n_unk:
        return f"Yes ({n_eq} ≫ {n_unk})"
    return f"Yes ({n_eq} > {n_unk})"


# ---------------------------------------------------------------------------
# design matrix

@dataclass(frozen=True)
class DesignMatrix:
    """Rank-2 design matrix with optional right-hand side.

    rows: (mass number, transition label) per equation. entries are in eV
    per unknown-unit. When preconditioned is True every stored column has
    unit Euclidean norm and column_norms holds the original norms.
    """

    rows: tuple[tuple[int, str], ...]
    columns: tuple[str, ...]
    entries: np.ndarray
    rhs: np.ndarray | None = None
    rhs_sigma: np.ndarray | None = None
    preconditioned: bool = False
    column_norms: tuple[float, ...] = field(default_factory=tuple)

    def __post_init__(self):
        entries = np.array(self.entries, dtype=float)
        if entries.shape != (len(self.rows), len(self.columns)):
            raise ValidationError(
                f"entry block shape {entries.shape} does not match "
                f"{len(self.rows)} rows x {len(self.columns)} columns"
            )
        entries.setflags(write=False)
        object.__setattr__(self, "entries", entries)
        for name, vec in (("rhs", self.rhs), ("rhs_sigma", self.rhs_sigma)):
            if vec is not None:
                arr = np.array(vec, dtype=float)
                if arr.shape != (len(self.rows),):
                    raise ValidationError(f"{name} length {arr.shape} does not match row count {len(self.rows)}")
                arr.setflags(write=False)
                object.__setattr__(self, name, arr)

    @property
    def shape(self) -> tuple[int, int]:
        return self.entries.shape

    def with_rhs(self, rhs, rhs_sigma=None) -> "DesignMatrix":
        return replace(self, rhs=np.asarray(rhs, dtype=float),
                       rhs_sigma=None if rhs_sigma is None else np.asarray(rhs_sigma, dtype=float))

    def to_json_dict(self) -> dict:
        return {
            "rows": [[A, label] for A, label in self.rows],
            "columns": list(self.columns),
            "entries": self.entries.tolist(),
            "rhs": None if self.rhs is None else self.rhs.tolist(),
            "rhs_sigma": None if self.rhs_sigma is None else self.rhs_sigma.tolist(),
            "preconditioned": self.preconditioned,
            "column_norms": list(self.column_norms),
        }


def build_design(odd_isotopes: Sequence[IsotopeRecord], coeffs: ElectronicCoefficients,
                 alpha_T: Mapping[int, float] | None = None) -> DesignMatrix:
    """Assemble the design matrix over (odd isotope) x (rank-2 transition).

    alpha_T defaults to the proportional-to-B(E2) convention. Each row
    holds the three per-unknown sensitivities of that (isotope,
    transition) pair; the right-hand side is attached separately.
    """
    if not odd_isotopes:
        raise ValidationError("no odd isotopes supplied")
    transitions = coeffs.rank2_transitions()
    if alpha_T is None:
        alpha_T = alpha_t_from_be2(odd_isotopes)
    rows = []
    data = []
    for rec in odd_isotopes:
        if rec.spin == 0:
            raise ValidationError(f"isotope A={rec.A} is even-even and carries no rank-2 observable")
        if rec.Qs is None:
            raise ValidationError(f"isotope A={rec.A} is missing its quadrupole moment")
        if rec.A not in alpha_T:
            raise ValidationError(f"isotope A={rec.A} is missing its polarizability value")
        lever = spin_mass_lever(rec)
        for t in transitions:
            rows.append((rec.A, t.label))
            data.append(
                [
                    t.H_eV_per_b * rec.Qs.value,
                    t.P_eV_per_wu * alpha_T[rec.A],
                    t.G_eV_per_lever * lever,
                ]
            )
    return DesignMatrix(rows=tuple(rows), columns=COLUMN_NAMES, entries=np.array(data))


def precondition(m: DesignMatrix) -> DesignMatrix:
    """Scale every column to unit Euclidean norm, keeping the originals.

    Normalization separates the geometric independence of the isotope
    parameter vectors from raw unit amplification; the right-hand side is
    untouched. Already-preconditioned input passes through unchanged.
    """
    if m.preconditioned:
        return m
    norms = np.linalg.norm(m.entries, axis=0)
    for k, norm in enumerate(norms):
        if norm == 0.0:
            raise RankDeficiencyError(f"column {m.columns[k]!r} is identically zero")
    return replace(m, entries=m.entries / norms, preconditioned=True,
                   column_norms=tuple(float(n) for n in norms))


def condition_number(m: DesignMatrix) -> float:
    """sigma_max / sigma_min of the (preconditioned) design matrix.

    Returns +inf when sigma_min falls below the rank-deficiency threshold.
    Underdetermined matrices are rejected; check solvability first.
    """
    n_rows, n_cols = m.shape
    if n_rows < n_cols:
        raise UnderdeterminedError(
            f"{n_rows} equations for {n_cols} unknowns; the topology is underdetermined"
        )
    work = m if m.preconditioned else precondition(m)
    sv = np.linalg.svd(work.entries, compute_uv=False)
    if sv[-1] < RANK_DEFICIENCY_RTOL * sv[0]:
        return math.inf
    return float(sv[0] / sv[-1])


@dataclass(frozen=True)
class ExtractionResult:
    """Weighted least-squares extraction of the rank-2 amplitudes."""

    alpha_manko_hat: float
    alpha_manko_se: float
    background_estimates: tuple[tuple[str, float, float], ...]
    condition_number: float
    residual_norm_eV: float
    chi_bound: float | None = None

    def with_chi_bound(self, bound: float) -> "ExtractionResult":
        return replace(self, chi_bound=bound)

    def to_json_dict(self) -> dict:
        return {
            "alpha_manko_hat": self.alpha_manko_hat,
            "alpha_manko_se": self.alpha_manko_se,
            "background_estimates": [
                {"name": name, "value": value, "se": se}
                for name, value, se in self.background_estimates
            ],
            "condition_number": self.condition_number,
            "residual_norm_eV": self.residual_norm_eV,
            "chi_bound": self.chi_bound,
        }


def extract(m: DesignMatrix, rhs_sigma=None) -> ExtractionResult:
    """Weighted linear least squares on the preconditioned system.

    Rows are whitened by their one-sigma uncertainties, the normalized
    system is solved by SVD, and estimates with their covariance are
    scaled back through the stored column norms. Refuses underdetermined
    and numerically rank-deficient systems.
    """
    if m.rhs is None:
        raise ValidationError("design matrix has no right-hand side attached")
    sigma = m.rhs_sigma if rhs_sigma is None else np.asarray(rhs_sigma, dtype=float)
    if sigma is None:
        sigma = np.ones(len(m.rows))
    if sigma.shape != (len(m.rows),) or np.any(sigma <= 0):
        raise ValidationError("rhs_sigma must provide one positive uncertainty per row")

    n_rows, n_cols = m.shape
    if n_rows < n_cols:
        raise UnderdeterminedError(
            f"{n_rows} equations for {n_cols} unknowns; at least as many "
            "(odd isotope) x (rank-2 transition) rows as unknowns are required"
        )
    pre = precondition(m)
    kappa = condition_number(pre)
    if math.isinf(kappa):
        raise RankDeficiencyError(
            "design matrix is numerically rank deficient; the isotope parameter "
            "vectors are not linearly independent"
        )

    weighted = pre.entries / sigma[:, None]
    rhs_w = m.rhs / sigma
    u, s, vt = np.linalg.svd(weighted, full_matrices=False)
    y = vt.T @ ((u.T @ rhs_w) / s)
    cov_y = (vt.T / (s * s)) @ vt

    norms = np.asarray(pre.column_norms)
    estimates = y / norms
    covariance = cov_y / np.outer(norms, norms)
    errors = np.sqrt(np.diag(covariance))

    fitted = pre.entries @ y
    residual_norm = float(np.linalg.norm(m.rhs - fitted))

    backgrounds = tuple(
        (name, float(estimates[k]), float(errors[k]))
        for k, name in enumerate(m.columns[:-1])
    )
    return ExtractionResult(
        alpha_manko_hat=float(estimates[-1]),
        alpha_manko_se=float(errors[-1]),
        background_estimates=backgrounds,
        condition_number=kappa,
        residual_norm_eV=residual_norm,
    )
