"""Deterministic-seed Monte Carlo engines.

Two campaigns: conditioning of the radioactive-isotope design matrix with
the unmeasured A=91 parameters sampled from declared brackets, and
injection-recovery of the gravitomagnetic amplitude against per-row noise.

The random stream is partitioned into fixed-size blocks, block b seeded
with (seed, b). Results are therefore bit-identical for a given seed no
matter how draws are batched or parallelized, and per-worker summaries
merge by plain index-ordered concatenation.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np

from .budget import chi_bound
from .errors import ConfigurationError, ValidationError
from .gkp import ElectronicCoefficients, build_design, extract
from .nucdata import IsotopeChain, partition, spin_mass_lever
from .resources import resource_path

__all__ = [
    "ParameterSpec",
    "SamplingSpec",
    "load_sampling_spec",
    "KappaSummary",
    "kappa_draws",
    "sample_kappa",
    "RecoveryStats",
    "injection_recovery",
    "BLOCK_SIZE",
]

BLOCK_SIZE = 1024


@dataclass(frozen=True)
class ParameterSpec:
    """Sampling description of one unmeasured parameter."""

    name: str
    distribution: str
    low: float | None = None
    high: float | None = None
    mean: float | None = None
    sigma: float | None = None
    units: str = ""
    exclude_abs_below: float = 0.0

    def __post_init__(self):
        if self.distribution not in ("uniform", "log-uniform", "gaussian"):
            raise ValidationError(
                f"parameter {self.name!r}: unknown distribution {self.distribution!r}"
            )
        if self.distribution in ("uniform", "log-uniform"):
            if self.low is None or self.high is None:
                raise ValidationError(f"parameter {self.name!r}: bounds required")
            if not (math.isfinite(self.low) and math.isfinite(self.high)) or self.low >= self.high:
                raise ValidationError(f"parameter {self.name!r}: bounds must be finite and ordered")
            if self.distribution == "log-uniform" and self.low <= 0:
                raise ValidationError(f"parameter {self.name!r}: log-uniform needs positive bounds")
        else:
            if self.mean is None or self.sigma is None or self.sigma <= 0:
                raise ValidationError(f"parameter {self.name!r}: gaussian needs mean and sigma > 0")

    def draw(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.distribution == "uniform":
            values = rng.uniform(self.low, self.high, size)
        elif self.distribution == "log-uniform":
            values = np.exp(rng.uniform(math.log(self.low), math.log(self.high), size))
        else:
            values = rng.normal(self.mean, self.sigma, size)
        return values


@dataclass(frozen=True)
class SamplingSpec:
    parameters: tuple[ParameterSpec, ...]
    sample_count: int
    seed: int
    name: str = ""

    def __post_init__(self):
        if self.sample_count < 1:
            raise ValidationError("sample_count must be at least 1")

    def parameter(self, name: str) -> ParameterSpec:
        for p in self.parameters:
            if p.name == name:
                return p
        raise ConfigurationError(f"sampling spec is missing the parameter {name!r}")


def load_sampling_spec(source: str | Path = "mo91-sampling-v1") -> SamplingSpec:
    path = resource_path(str(source))
    obj = json.loads(Path(path).read_text(encoding="utf-8"))
    try:
        params = tuple(
            ParameterSpec(
                name=p["name"],
                distribution=p["distribution"],
                low=p.get("low"),
                high=p.get("high"),
                mean=p.get("mean"),
                sigma=p.get("sigma"),
                units=p.get("units", ""),
                exclude_abs_below=float(p.get("exclude_abs_below", 0.0)),
            )
            for p in obj["parameters"]
        )
        return SamplingSpec(
            parameters=params,
            sample_count=int(obj["sample_count"]),
            seed=int(obj["seed"]),
            name=obj.get("name", ""),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigurationError(f"sampling spec {path} is malformed: {exc}") from exc


def _block_rng(seed: int, block: int) -> np.random.Generator:
    return np.random.default_rng([seed, block])


def _draw_guarded(param: ParameterSpec, rng: np.random.Generator, size: int) -> tuple[np.ndarray, int]:
    """Draw with rejection of the |value| < guard band; returns (values,
    rejected proposal count)."""
    values = param.draw(rng, size)
    rejected = 0
    if param.exclude_abs_below > 0:
        bad = np.abs(values) < param.exclude_abs_below
        while bad.any():
            rejected += int(bad.sum())
            values[bad] = param.draw(rng, int(bad.sum()))
            bad = np.abs(values) < param.exclude_abs_below
    return values, rejected


@dataclass(frozen=True)
class KappaSummary:
    """Summary statistics of a condition-number sampling campaign."""

    mean: float
    std: float
    median: float
    p5: float
    p95: float
    rank_deficient_fraction: float
    excluded_fraction: float
    seed: int
    sample_count: int

    def __post_init__(self):
        if not self.p5 <= self.median <= self.p95:
            raise ValidationError("percentiles are not ordered")
        if not 0.0 <= self.rank_deficient_fraction <= 1.0:
            raise ValidationError("rank-deficient fraction outside [0, 1]")


def kappa_draws(chain: IsotopeChain, coeffs: ElectronicCoefficients, spec: SamplingSpec,
                sample_count: int | None = None, seed: int | None = None,
                return_samples: bool = False):
    """Per-draw condition numbers of the three-odd-isotope design matrix.

    Each draw builds the (95, 97, synthetic 91) x (first rank-2
    transition) matrix with the sampled A=91 parameters and the fixed
    measured values, preconditions it, and records kappa.
    """
    n = spec.sample_count if sample_count is None else int(sample_count)
    seed = spec.seed if seed is None else int(seed)
    qs_spec = spec.parameter("Qs_91")
    be2_spec = spec.parameter("BE2_91")

    rec95 = chain.isotope(95)
    rec97 = chain.isotope(97)
    if rec95.Qs is None or rec97.Qs is None or rec95.BE2_up is None or rec97.BE2_up is None:
        raise ValidationError("chain must provide measured Qs and B(E2) for A=95 and A=97")
    transition = coeffs.rank2_transitions()[0]
    H, P, G = transition.H_eV_per_b, transition.P_eV_per_wu, transition.G_eV_per_lever
    lever91 = float(Fraction(81, 4) / 91)

    fixed = np.array(
        [
            [H * rec95.Qs.value, P * rec95.BE2_up.value, G * spin_mass_lever(rec95)],
            [H * rec97.Qs.value, P * rec97.BE2_up.value, G * spin_mass_lever(rec97)],
        ]
    )

    kappas = np.empty(n)
    qs_all = np.empty(n)
    be2_all = np.empty(n)
    rejected_total = 0
    for block_start in range(0, n, BLOCK_SIZE):
        block_index = block_start // BLOCK_SIZE
        block_len = min(BLOCK_SIZE, n - block_start)
        rng = _block_rng(seed, block_index)
        qs, rejected = _draw_guarded(qs_spec, rng, block_len)
        be2, rejected2 = _draw_guarded(be2_spec, rng, block_len)
        rejected_total += rejected + rejected2

        matrices = np.broadcast_to(fixed, (block_len, 2, 3)).copy()
        third = np.column_stack([H * qs, P * be2, np.full(block_len, G * lever91)])
        stacked = np.concatenate([matrices, third[:, None, :]], axis=1)
        norms = np.linalg.norm(stacked, axis=1)
        normalized = stacked / norms[:, None, :]
        sv = np.linalg.svd(normalized, compute_uv=False)
        block_kappa = np.where(
            sv[:, -1] < 1e3 * np.finfo(float).eps * sv[:, 0], np.inf, sv[:, 0] / sv[:, -1]
        )
        sl = slice(block_start, block_start + block_len)
        kappas[sl] = block_kappa
        qs_all[sl] = qs
        be2_all[sl] = be2

    proposals = n + rejected_total
    excluded_fraction = rejected_total / proposals if proposals else 0.0
    if return_samples:
        return kappas, excluded_fraction, qs_all, be2_all
    return kappas, excluded_fraction


def sample_kappa(chain: IsotopeChain, coeffs: ElectronicCoefficients, spec: SamplingSpec,
                 sample_count: int | None = None, seed: int | None = None) -> KappaSummary:
    """Condition-number distribution summary; identical seed gives a
    bit-identical summary."""
    kappas, excluded_fraction = kappa_draws(chain, coeffs, spec, sample_count, seed)
    finite = kappas[np.isfinite(kappas)]
    if finite.size == 0:
        raise ValidationError("every draw was rank deficient; check the sampling bounds")
    return KappaSummary(
        mean=float(finite.mean()),
        std=float(finite.std(ddof=1)) if finite.size > 1 else 0.0,
        median=float(np.median(finite)),
        p5=float(np.percentile(finite, 5)),
        p95=float(np.percentile(finite, 95)),
        rank_deficient_fraction=float(np.mean(~np.isfinite(kappas))),
        excluded_fraction=float(excluded_fraction),
        seed=spec.seed if seed is None else int(seed),
        sample_count=int(kappas.size),
    )


@dataclass(frozen=True)
class RecoveryStats:
    """Outcome of a seeded injection-recovery campaign."""

    trials: int
    seed: int
    noise_eV: float
    truth_alpha_manko: float
    bias_alpha_manko: float
    mean_se_alpha_manko: float
    coverage_1sigma: float
    coverage_2sigma: float
    chi_bound_median: float
    chi_bound_p5: float
    chi_bound_p95: float
    condition_number: float
    rows: int


def injection_recovery(chain: IsotopeChain, coeffs: ElectronicCoefficients,
                       truth: dict, noise_eV: float, trials: int, seed: int,
                       signal_at_chi1_eV: float = 2e-21) -> RecoveryStats:
    """Inject known amplitudes, add per-row gaussian noise, re-extract.

    truth holds "backgrounds" (pair of amplitudes) and "alpha_manko". The
    derived coupling bound per trial is the ratio of the recovered
    one-sigma energy residual to the nominal signal, which reduces to the
    standard error of the gravitomagnetic amplitude.
    """
    if trials < 1:
        raise ValidationError("trials must be at least 1")
    if noise_eV < 0:
        raise ValidationError("noise must be non-negative")
    _, odd = partition(chain)
    if not odd:
        raise ValidationError("chain has no odd isotopes; nothing to extract")
    design = build_design(odd, coeffs)
    x_true = np.array([*truth["backgrounds"], truth["alpha_manko"]], dtype=float)
    rhs_true = design.entries @ x_true
    n_rows = len(design.rows)

    alpha_hats = np.empty(trials)
    alpha_ses = np.empty(trials)
    kappa = math.nan
    for block_start in range(0, trials, BLOCK_SIZE):
        block_index = block_start // BLOCK_SIZE
        block_len = min(BLOCK_SIZE, trials - block_start)
        rng = _block_rng(seed, block_index)
        noise = rng.normal(0.0, noise_eV, (block_len, n_rows)) if noise_eV > 0 else np.zeros((block_len, n_rows))
        for k in range(block_len):
            noisy = design.with_rhs(rhs_true + noise[k], np.full(n_rows, noise_eV if noise_eV > 0 else 1.0))
            result = extract(noisy)
            alpha_hats[block_start + k] = result.alpha_manko_hat
            alpha_ses[block_start + k] = result.alpha_manko_se
            kappa = result.condition_number

    truth_alpha = float(truth["alpha_manko"])
    err = np.abs(alpha_hats - truth_alpha)
    if noise_eV > 0:
        cover1 = float(np.mean(err <= alpha_ses))
        cover2 = float(np.mean(err <= 2 * alpha_ses))
        bounds = np.array(
            [chi_bound(se * signal_at_chi1_eV, signal_at_chi1_eV) for se in alpha_ses]
        )
    else:
        cover1 = cover2 = 1.0
        bounds = np.zeros(trials)
    return RecoveryStats(
        trials=trials,
        seed=seed,
        noise_eV=noise_eV,
        truth_alpha_manko=truth_alpha,
        bias_alpha_manko=float(alpha_hats.mean() - truth_alpha),
        mean_se_alpha_manko=float(alpha_ses.mean()),
        coverage_1sigma=cover1,
        coverage_2sigma=cover2,
        chi_bound_median=float(np.median(bounds)),
        chi_bound_p5=float(np.percentile(bounds, 5)),
        chi_bound_p95=float(np.percentile(bounds, 95)),
        condition_number=kappa,
        rows=n_rows,
    )
