from __future__ import annotations

import math

import numpy as np
import pytest

from gkpforge.errors import (
    ConfigurationError,
    RankDeficiencyError,
    UnderdeterminedError,
    ValidationError,
)
from gkpforge.gkp import (
    COLUMN_NAMES,
    DesignMatrix,
    Topology,
    alpha_t_from_be2,
    build_design,
    condition_number,
    extract,
    precondition,
    solvability_verdict,
    solvable,
)
from gkpforge.nucdata import partition


def _jacobi_singular_values(matrix, sweeps=80):
    """Independent one-sided Jacobi SVD for desk-scale oracle checks."""
    A = np.array(matrix, dtype=float, copy=True)
    n = A.shape[1]
    for _ in range(sweeps):
        rotated = False
        for p in range(n - 1):
            for q in range(p + 1, n):
                ap, aq = A[:, p].copy(), A[:, q].copy()
                app, aqq, apq = ap @ ap, aq @ aq, ap @ aq
                if app == 0 or aqq == 0 or abs(apq) <= 1e-15 * math.sqrt(app * aqq):
                    continue
                rotated = True
                tau = (aqq - app) / (2 * apq)
                t = 1.0 if tau == 0 else math.copysign(1.0, tau) / (abs(tau) + math.hypot(1.0, tau))
                c = 1.0 / math.hypot(1.0, t)
                s = c * t
                A[:, p] = c * ap - s * aq
                A[:, q] = s * ap + c * aq
        if not rotated:
            break
    return np.sort(np.sqrt(np.sum(A * A, axis=0)))[::-1]


# ---------------------------------------------------------------------------
# topology counting

@pytest.mark.parametrize(
    "topology,expected_ok,expected_eq,verdict",
    [
        (Topology(4, 2, 1), False, 2, "No (2 < 3)"),
        (Topology(4, 3, 1), True, 3, "Yes (3 = 3)"),
        (Topology(4, 2, 2), True, 4, "Yes (4 > 3)"),
        (Topology(4, 3, 2), True, 6, "Yes (6 ≫ 3)"),
    ],
)
def test_solvable_reference_topologies(topology, expected_ok, expected_eq, verdict):
    ok, n_eq, n_unk = solvable(topology, N_bkg=2)
    assert ok is expected_ok
    assert n_eq == expected_eq
    assert n_unk == 3
    assert solvability_verdict(topology, N_bkg=2) == verdict


def test_solvable_general_background_count():
    ok, n_eq, n_unk = solvable(Topology(4, 3, 1), N_bkg=3)
    assert not ok and (n_eq, n_unk) == (3, 4)
    ok, _, _ = solvable(Topology(4, 4, 1), N_bkg=3)
    assert ok


def test_solvable_requires_some_data():
    ok, _, _ = solvable(Topology(4, 0, 5), N_bkg=0)
    assert not ok
    ok, _, _ = solvable(Topology(4, 5, 0), N_bkg=0)
    assert not ok


# ---------------------------------------------------------------------------
# design construction

def test_build_design_shapes(mo_chain, frib_chain, coeffs):
    _, odd_stable = partition(mo_chain)
    single = coeffs.subset(["1s-2p3/2"])
    m2 = build_design(odd_stable, single)
    assert m2.shape == (2, 3)
    assert m2.columns == COLUMN_NAMES

    _, odd_frib = partition(frib_chain)
    m3 = build_design(odd_frib, single)
    assert m3.shape == (3, 3)
    assert [a for a, _ in m3.rows] == [91, 95, 97]

    m4 = build_design(odd_stable, coeffs)
    assert m4.shape == (4, 3)
    assert {t for _, t in m4.rows} == {"1s-2p3/2", "1s-3d5/2"}


def test_build_design_entries_match_products(mo_chain, coeffs):
    _, odd = partition(mo_chain)
    single = coeffs.subset(["1s-2p3/2"])
    m = build_design(odd, single)
    t = single.transitions[0]
    rec95 = mo_chain.isotope(95)
    row95 = m.entries[0]
    assert row95[0] == pytest.approx(t.H_eV_per_b * rec95.Qs.value, rel=1e-15)
    assert row95[1] == pytest.approx(t.P_eV_per_wu * rec95.BE2_up.value, rel=1e-15)
    assert row95[2] == pytest.approx(t.G_eV_per_lever * (6.25 / 95), rel=1e-15)


def test_build_design_missing_parameter_names_isotope(mo_chain, coeffs):
    _, odd = partition(mo_chain)
    with pytest.raises(ValidationError, match="A=97"):
        build_design(odd, coeffs, alpha_T={95: 8.0})


def test_alpha_t_proxy(mo_chain):
    _, odd = partition(mo_chain)
    assert alpha_t_from_be2(odd) == {95: 8.0, 97: 12.0}


# ---------------------------------------------------------------------------
# preconditioning and conditioning

def test_precondition_unit_norms(frib_chain, coeffs):
    _, odd = partition(frib_chain)
    m = precondition(build_design(odd, coeffs))
    norms = np.linalg.norm(m.entries, axis=0)
    assert np.all(np.abs(norms - 1.0) <= 1e-12)
    assert m.preconditioned
    assert len(m.column_norms) == 3
    # idempotent
    again = precondition(m)
    assert again is m


def test_precondition_diagonal_example():
    m = DesignMatrix(
        rows=((1, "t"), (2, "t"), (3, "t")),
        columns=COLUMN_NAMES,
        entries=np.diag([2.0, 4.0, 8.0]),
    )
    assert condition_number(m) == pytest.approx(1.0, abs=1e-12)  # preconditions internally
    pre = precondition(m)
    assert np.allclose(pre.entries, np.eye(3))
    assert pre.column_norms == (2.0, 4.0, 8.0)
    raw_sv = _jacobi_singular_values(m.entries)
    assert raw_sv[0] / raw_sv[-1] == pytest.approx(4.0, rel=1e-12)


def test_precondition_zero_column_rejected():
    m = DesignMatrix(
        rows=((1, "t"), (2, "t")),
        columns=("a", "b"),
        entries=np.array([[1.0, 0.0], [2.0, 0.0]]),
    )
    with pytest.raises(RankDeficiencyError, match="'b'"):
        precondition(m)


def test_condition_number_orthonormal():
    m = DesignMatrix(
        rows=((1, "t"), (2, "t"), (3, "t")),
        columns=COLUMN_NAMES,
        entries=np.eye(3),
    )
    assert condition_number(m) == 1.0


def test_condition_number_degenerate_sentinel():
    column = np.array([1.0, 2.0, 3.0])
    m = DesignMatrix(
        rows=((1, "t"), (2, "t"), (3, "t")),
        columns=COLUMN_NAMES,
        entries=np.column_stack([column, column, np.array([0.0, 1.0, 0.0])]),
    )
    assert math.isinf(condition_number(m))


def test_condition_number_underdetermined_rejected():
    m = DesignMatrix(
        rows=((1, "t"), (2, "t")),
        columns=COLUMN_NAMES,
        entries=np.ones((2, 3)),
    )
    with pytest.raises(UnderdeterminedError):
        condition_number(m)


def test_condition_number_against_jacobi_oracle():
    rng = np.random.default_rng(17)
    for _ in range(25):
        entries = rng.normal(size=(4, 3)) * 10.0 ** rng.integers(-6, 6)
        m = precondition(DesignMatrix(
            rows=tuple((k, "t") for k in range(4)), columns=COLUMN_NAMES, entries=entries,
        ))
        sv = _jacobi_singular_values(m.entries)
        assert condition_number(m) == pytest.approx(sv[0] / sv[-1], rel=1e-10)


def test_condition_number_invariances(frib_chain, coeffs):
    _, odd = partition(frib_chain)
    base = build_design(odd, coeffs.subset(["1s-2p3/2"]))
    kappa = condition_number(precondition(base))
    # column rescaling leaves the preconditioned kappa unchanged
    scaled = DesignMatrix(rows=base.rows, columns=base.columns,
                          entries=base.entries * np.array([1e6, 1e-3, 42.0]))
    assert condition_number(precondition(scaled)) == pytest.approx(kappa, rel=1e-10)
    # column permutation leaves kappa unchanged
    permuted = DesignMatrix(rows=base.rows, columns=base.columns,
                            entries=base.entries[:, [2, 0, 1]])
    assert condition_number(precondition(permuted)) == pytest.approx(kappa, rel=1e-12)


def test_row_addition_keeps_solvable(frib_chain, coeffs):
    _, odd = partition(frib_chain)
    single = build_design(odd, coeffs.subset(["1s-2p3/2"]))
    both = build_design(odd, coeffs)
    k1 = condition_number(precondition(single))
    k2 = condition_number(precondition(both))
    assert math.isfinite(k1) and math.isfinite(k2)


# ---------------------------------------------------------------------------
# extraction

TRUTH = np.array([1e-7, 1e-7, 1.0])


def _noiseless_result(odd, coeffs_used):
    design = build_design(odd, coeffs_used)
    rhs = design.entries @ TRUTH
    sigma = np.full(len(design.rows), 1e-22)
    return extract(precondition(design.with_rhs(rhs, sigma)))


def test_noiseless_recovery_all_topologies(mo_chain, frib_chain, coeffs):
    _, odd_stable = partition(mo_chain)
    _, odd_frib = partition(frib_chain)
    cases = [
        (odd_frib, coeffs.subset(["1s-2p3/2"])),   # 3 x 3
        (odd_stable, coeffs),                      # 4 x 3
        (odd_frib, coeffs),                        # 6 x 3
    ]
    for odd, used in cases:
        result = _noiseless_result(odd, used)
        recovered = [v for _, v, _ in result.background_estimates] + [result.alpha_manko_hat]
        for got, want in zip(recovered, TRUTH):
            assert abs(got / want - 1.0) <= 1e-10


def test_underdetermined_stable_pair_refused(mo_chain, coeffs):
    _, odd = partition(mo_chain)
    design = build_design(odd, coeffs.subset(["1s-2p3/2"]))
    rhs = design.entries @ TRUTH
    with pytest.raises(UnderdeterminedError):
        extract(design.with_rhs(rhs, np.full(2, 1e-22)))


def test_extract_requires_rhs(frib_chain, coeffs):
    _, odd = partition(frib_chain)
    with pytest.raises(ValidationError, match="right-hand side"):
        extract(build_design(odd, coeffs))


def test_extract_rejects_bad_sigma(frib_chain, coeffs):
    _, odd = partition(frib_chain)
    design = build_design(odd, coeffs)
    rhs = design.entries @ TRUTH
    with pytest.raises(ValidationError):
        extract(design.with_rhs(rhs, np.zeros(len(design.rows))))


def test_extract_refuses_degenerate_directions():
    entries = np.column_stack([[1.0, 2.0, 3.0], [2.0, 4.0, 6.0], [0.0, 1.0, 0.0]])
    m = DesignMatrix(rows=((1, "t"), (2, "t"), (3, "t")), columns=COLUMN_NAMES,
                     entries=entries, rhs=np.ones(3), rhs_sigma=np.ones(3))
    with pytest.raises(RankDeficiencyError):
        extract(m)


def test_extract_scaling_invariance(frib_chain, coeffs):
    _, odd = partition(frib_chain)
    design = build_design(odd, coeffs.subset(["1s-2p3/2"]))
    rhs = design.entries @ TRUTH
    sigma = np.full(3, 1e-22)
    base = extract(precondition(design.with_rhs(rhs, sigma)))

    scale = np.array([3.7e4, 1.0, 2.2e-6])
    scaled_design = DesignMatrix(rows=design.rows, columns=design.columns,
                                 entries=design.entries * scale)
    scaled = extract(precondition(scaled_design.with_rhs(rhs, sigma)))
    # physical estimates compensate the column scaling; kappa unchanged
    assert scaled.condition_number == pytest.approx(base.condition_number, rel=1e-10)
    assert scaled.alpha_manko_hat * scale[2] == pytest.approx(base.alpha_manko_hat, rel=1e-10)
    for (_, v_base, _), (_, v_scaled, _), s in zip(
        base.background_estimates, scaled.background_estimates, scale
    ):
        assert v_scaled * s == pytest.approx(v_base, rel=1e-10)


def test_extract_covariance_tracks_noise_scale(frib_chain, coeffs):
    _, odd = partition(frib_chain)
    design = build_design(odd, coeffs.subset(["1s-2p3/2"]))
    rhs = design.entries @ TRUTH
    small = extract(precondition(design.with_rhs(rhs, np.full(3, 1e-13))))
    large = extract(precondition(design.with_rhs(rhs, np.full(3, 2e-13))))
    assert large.alpha_manko_se == pytest.approx(2 * small.alpha_manko_se, rel=1e-10)


def test_coefficients_reject_rank2_blind_nonzero():
    from fractions import Fraction
    from gkpforge.gkp import TransitionCoefficients

    with pytest.raises(ValidationError):
        TransitionCoefficients(label="1s-2p1/2", H_eV_per_b=1.0, P_eV_per_wu=0.0,
                               G_eV_per_lever=0.0, upper_j=Fraction(1, 2))
    blind = TransitionCoefficients(label="1s-2p1/2", H_eV_per_b=0.0, P_eV_per_wu=0.0,
                                   G_eV_per_lever=0.0, upper_j=Fraction(1, 2))
    assert not blind.rank2_sensitive()


def test_coefficients_subset_unknown_label(coeffs):
    with pytest.raises(ConfigurationError):
        coeffs.subset(["no-such-transition"])


def test_alpha_t_uncertainty_quadrature(mo_chain):
    from gkpforge.gkp import EFFECTIVE_BE2_DEFAULT_REL, alpha_t_uncertainty
    from gkpforge.nucdata import IsotopeRecord, Measured
    from fractions import Fraction

    rec95 = mo_chain.isotope(95)  # 8 +/- 1 W.u.
    rel = alpha_t_uncertainty(rec95)
    assert rel == pytest.approx(math.hypot(1.0 / 8.0, 1e-6), rel=1e-12)
    # the tiny factorization error barely moves the knowledge term
    assert rel == pytest.approx(0.125, rel=1e-9)

    # effective/fragmented strength without an explicit sigma falls back
    fallback = IsotopeRecord(A=93, Z=42, spin=Fraction(5, 2), parity=+1,
                             r_ch=Measured(4.32), Qs=Measured(0.1),
                             BE2_up=Measured(10.0, effective=True))
    assert alpha_t_uncertainty(fallback) == pytest.approx(
        math.hypot(EFFECTIVE_BE2_DEFAULT_REL, 1e-6), rel=1e-12
    )

    # factorization error alone when the strength is exactly known
    exact = IsotopeRecord(A=99, Z=42, spin=Fraction(5, 2), parity=+1,
                          r_ch=Measured(4.34), Qs=Measured(0.2), BE2_up=Measured(9.0))
    assert alpha_t_uncertainty(exact) == pytest.approx(1e-6, rel=1e-12)


def test_serializers_round_json(frib_chain, coeffs):
    import json

    _, odd = partition(frib_chain)
    design = precondition(build_design(odd, coeffs.subset(["1s-2p3/2"])))
    rhs = design.entries @ np.array([1.0, 1.0, 1.0])
    result = extract(design.with_rhs(rhs, np.full(3, 1e-13)))
    payload = json.dumps({"design": design.to_json_dict(), "result": result.to_json_dict()})
    back = json.loads(payload)
    assert back["design"]["columns"] == list(COLUMN_NAMES)
    assert back["design"]["preconditioned"] is True
    assert back["result"]["alpha_manko_se"] == result.alpha_manko_se
