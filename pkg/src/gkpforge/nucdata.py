"""Isotope-chain nuclear parameter tables: ingestion, validation, serving.

A chain is an immutable, validated sequence of isotope records sharing one
element. Measured quantities carry their one-sigma uncertainties; the
canonical text form is parenthetical notation, "4.315(3)" meaning
4.315 +/- 0.003 with the uncertainty applying to the last quoted digits.
Effective (fragmented-multiplet) quadrupole strengths of odd isotopes are
flagged with a leading tilde, "~8(1)", and the flag survives round trips.
"""

from __future__ import annotations

import csv
import io
import json
import re
from dataclasses import dataclass, field
from decimal import Decimal
from fractions import Fraction
from pathlib import Path
from .errors import ValidationError
from .resources import resource_path

__all__ = [
    "Measured",
    "IsotopeRecord",
    "IsotopeChain",
    "parse_measured",
    "format_measured",
    "parse_spin",
    "load_chain",
    "load_bundled_chain",
    "partition",
    "spin_mass_lever",
    "chain_to_csv",
    "chain_to_json",
]

_ELEMENT_SYMBOLS = (
    "H He Li Be B C N O F Ne Na Mg Al Si P S Cl Ar K Ca Sc Ti V Cr Mn Fe Co Ni "
    "Cu Zn Ga Ge As Se Br Kr Rb Sr Y Zr Nb Mo Tc Ru Rh Pd Ag Cd In Sn Sb Te I "
    "Xe Cs Ba La Ce Pr Nd Pm Sm Eu Gd Tb Dy Ho Er Tm Yb Lu Hf Ta W Re Os Ir Pt "
    "Au Hg Tl Pb Bi Po At Rn Fr Ra Ac Th Pa U Np Pu Am Cm Bk Cf Es Fm Md No Lr"
).split()


def element_symbol(Z: int) -> str:
    if 1 <= Z <= len(_ELEMENT_SYMBOLS):
        return _ELEMENT_SYMBOLS[Z - 1]
    return f"Z{Z}"


@dataclass(frozen=True)
class Measured:
    """A measured quantity: central value, optional 1-sigma, optional
    effective/fragmented flag (odd-isotope summed quadrupole strengths)."""

    value: float
    sigma: float | None = None
    effective: bool = False

    def __post_init__(self):
        if self.sigma is not None and self.sigma < 0:
            raise ValidationError(f"negative uncertainty {self.sigma!r}")


_PAREN_RE = re.compile(r"^(~?)([+-]?)(\d+)(?:\.(\d+))?(?:\((\d+)\))?$")


def parse_measured(text: str, *, context: str = "") -> Measured:
    """Parse parenthetical uncertainty notation.

    "4.315(3)" -> 4.315 +/- 0.003; "0.150" -> 0.150 with no uncertainty;
    "~8(1)" -> 8 +/- 1 flagged effective. The uncertainty digits apply to
    the last quoted decimal places.
    """
    token = text.strip()
    m = _PAREN_RE.match(token)
    if m is None:
        where = f" in {context}" if context else ""
        raise ValidationError(f"cannot parse measured value {text!r}{where}")
    effective = m.group(1) == "~"
    sign = -1.0 if m.group(2) == "-" else 1.0
    int_part, frac_part, unc_digits = m.group(3), m.group(4) or "", m.group(5)
    value = sign * float(f"{int_part}.{frac_part}" if frac_part else int_part)
    sigma = None
    if unc_digits is not None:
        # decimal-string construction keeps round trips bit-exact
        sigma = float(f"{int(unc_digits)}e-{len(frac_part)}")
    return Measured(value=value, sigma=sigma, effective=effective)


def format_measured(m: Measured) -> str:
    """Inverse of parse_measured; reconstructs the parenthetical form."""
    if m.sigma is None or m.sigma == 0.0:
        text = repr(m.value)
    else:
        sig = Decimal(repr(m.sigma)).normalize()
        exponent = sig.as_tuple().exponent
        decimals = max(0, -int(exponent))
        digits = int(sig.scaleb(decimals))
        if float(f"{digits}e-{decimals}") != m.sigma:
            raise ValidationError(f"uncertainty {m.sigma!r} has no parenthetical form")
        text = f"{m.value:.{decimals}f}({digits})"
    return ("~" + text) if m.effective else text


def parse_spin(text: str | float | Fraction) -> Fraction:
    """Parse a spin as an exact non-negative half-integer Fraction."""
    if isinstance(text, Fraction):
        spin = text
    elif isinstance(text, str):
        try:
            spin = Fraction(text.strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise ValidationError(f"cannot parse spin {text!r}") from exc
    else:
        spin = Fraction(text).limit_denominator(2)
        if float(spin) != float(text):
            raise ValidationError(f"spin {text!r} is not a half-integer")
    if spin < 0 or (2 * spin).denominator != 1:
        raise ValidationError(f"spin {text!r} is not a non-negative half-integer")
    return spin


@dataclass(frozen=True)
class IsotopeRecord:
    """One nucleus of the chain."""

    A: int
    Z: int
    spin: Fraction
    parity: int
    r_ch: Measured
    beta2: Measured | None = None
    Qs: Measured | None = None
    BE2_up: Measured | None = None
    delta_r2: Measured | None = None
    half_life_s: float | None = None
    beta4: Measured | None = None

    def __post_init__(self):
        tag = f"isotope A={self.A}"
        if self.Z < 1 or self.A < self.Z:
            raise ValidationError(f"{tag}: requires A >= Z >= 1 (got A={self.A}, Z={self.Z})")
        if self.parity not in (+1, -1):
            raise ValidationError(f"{tag}: parity must be +1 or -1, got {self.parity!r}")
        if (2 * self.spin).denominator != 1 or self.spin < 0:
            raise ValidationError(f"{tag}: spin must be a non-negative half-integer")
        if self.r_ch.value <= 0:
            raise ValidationError(f"{tag}: charge radius must be positive")
        if self.Qs is not None and self.spin < 1:
            raise ValidationError(
                f"{tag}: spectroscopic quadrupole moment given for I={self.spin} < 1"
            )
        if self.Qs is None and self.spin >= 1:
            raise ValidationError(f"{tag}: I={self.spin} >= 1 requires a quadrupole moment entry")
        if self.half_life_s is not None and self.half_life_s <= 0:
            raise ValidationError(f"{tag}: half-life must be positive when given")

    @property
    def nuclear_mass_u(self) -> float:
        """Nuclear mass in atomic mass units, represented by the mass
        number (adequate at the toolkit's order-of-magnitude precision;
        upgradeable to tabulated masses)."""
        return float(self.A)

    @property
    def is_even_even(self) -> bool:
        return self.spin == 0

    @property
    def stable(self) -> bool:
        return self.half_life_s is None


def spin_mass_lever(rec: IsotopeRecord) -> float:
    """Spin-squared-over-mass lever I^2 / M_N in 1/u.

    This is the per-isotope factor multiplying the gravitomagnetic
    coupling in the rank-2 decomposition; even-even isotopes give zero.
    """
    return float(Fraction(rec.spin**2, 1) / rec.A)


@dataclass(frozen=True)
class IsotopeChain:
    """Validated, immutable isotope chain of a single element."""

    element: str
    reference_A: int
    records: tuple[IsotopeRecord, ...]
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.records:
            raise ValidationError("chain has no isotope records")
        zs = {r.Z for r in self.records}
        if len(zs) != 1:
            raise ValidationError(f"chain mixes elements: Z values {sorted(zs)}")
        seen = set()
        for r in self.records:
            if r.A in seen:
                raise ValidationError(f"duplicate mass number A={r.A}")
            seen.add(r.A)
        if self.reference_A not in seen:
            raise ValidationError(f"reference isotope A={self.reference_A} not present in chain")
        refs = [r.A for r in self.records if r.delta_r2 is not None and r.delta_r2.value == 0.0]
        if refs != [self.reference_A]:
            raise ValidationError(
                f"exactly the reference isotope must have delta_r2 = 0; found zeros at {refs}"
            )
        object.__setattr__(self, "records", tuple(sorted(self.records, key=lambda r: r.A)))

    @property
    def Z(self) -> int:
        return self.records[0].Z

    def isotope(self, A: int) -> IsotopeRecord:
        for r in self.records:
            if r.A == A:
                return r
        raise ValidationError(f"chain has no isotope A={A}")

    def with_isotope(self, rec: IsotopeRecord) -> "IsotopeChain":
        """New chain with one isotope appended (revalidates)."""
        return IsotopeChain(
            element=self.element,
            reference_A=self.reference_A,
            records=self.records + (rec,),
            provenance=dict(self.provenance),
        )


def partition(chain: IsotopeChain) -> tuple[tuple[IsotopeRecord, ...], tuple[IsotopeRecord, ...]]:
    """Split into (even-even, odd) subsets, ordering by mass number.

    Even-even isotopes (I = 0) calibrate the rank-2-blind hyperplane; odd
    isotopes (I > 0) carry every rank-2 observable.
    """
    even_even = tuple(r for r in chain.records if r.is_even_even)
    odd = tuple(r for r in chain.records if not r.is_even_even)
    return even_even, odd


# ---------------------------------------------------------------------------
# loading / serialization

_CSV_COLUMNS = ["A", "Z", "I", "parity", "r_ch", "beta2", "Qs", "BE2_up", "delta_r2", "half_life_s"]


def _measured_or_none(token: str, context: str) -> Measured | None:
    token = token.strip()
    if not token:
        return None
    return parse_measured(token, context=context)


def _record_from_csv_row(row: dict, lineno: int) -> IsotopeRecord:
    ctx = f"row {lineno}"
    try:
        A = int(row["A"])
        Z = int(row["Z"])
        parity = int(row["parity"])
    except (KeyError, ValueError) as exc:
        raise ValidationError(f"{ctx}: bad integer field ({exc})") from exc
    spin = parse_spin(row["I"])
    half_life = row.get("half_life_s", "").strip()
    beta4 = row.get("beta4", "")
    return IsotopeRecord(
        A=A,
        Z=Z,
        spin=spin,
        parity=parity,
        r_ch=parse_measured(row["r_ch"], context=f"{ctx} field r_ch"),
        beta2=_measured_or_none(row.get("beta2", ""), f"{ctx} field beta2"),
        Qs=_measured_or_none(row.get("Qs", ""), f"{ctx} field Qs"),
        BE2_up=_measured_or_none(row.get("BE2_up", ""), f"{ctx} field BE2_up"),
        delta_r2=_measured_or_none(row.get("delta_r2", ""), f"{ctx} field delta_r2"),
        half_life_s=float(half_life) if half_life else None,
        beta4=_measured_or_none(beta4, f"{ctx} field beta4") if beta4 is not None else None,
    )


def _chain_from_csv_text(text: str) -> IsotopeChain:
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None:
        raise ValidationError("CSV chain file is empty")
    missing = [c for c in _CSV_COLUMNS if c not in reader.fieldnames]
    if missing:
        raise ValidationError(f"CSV chain header is missing columns {missing}")
    records = [_record_from_csv_row(row, lineno) for lineno, row in enumerate(reader, start=2)]
    if not records:
        raise ValidationError("CSV chain file has a header but no rows")
    reference = [r.A for r in records if r.delta_r2 is not None and r.delta_r2.value == 0.0]
    if len(reference) != 1:
        raise ValidationError(
            f"CSV chain must contain exactly one delta_r2 = 0 reference row; found {reference}"
        )
    return IsotopeChain(
        element=element_symbol(records[0].Z),
        reference_A=reference[0],
        records=tuple(records),
        provenance={},
    )


def _measured_from_json(obj, context: str) -> Measured | None:
    if obj is None:
        return None
    if not isinstance(obj, dict) or "value" not in obj:
        raise ValidationError(f"{context}: expected an object with a 'value' key")
    return Measured(
        value=float(obj["value"]),
        sigma=float(obj["sigma"]) if obj.get("sigma") is not None else None,
        effective=bool(obj.get("effective", False)),
    )


def _chain_from_json_obj(obj: dict) -> IsotopeChain:
    for key in ("element", "reference_A", "isotopes"):
        if key not in obj:
            raise ValidationError(f"JSON chain is missing the {key!r} key")
    records = []
    for iso in obj["isotopes"]:
        ctx = f"isotope A={iso.get('A', '?')}"
        records.append(
            IsotopeRecord(
                A=int(iso["A"]),
                Z=int(iso["Z"]),
                spin=parse_spin(iso["I"]),
                parity=int(iso["parity"]),
                r_ch=_measured_from_json(iso["r_ch"], f"{ctx} field r_ch"),
                beta2=_measured_from_json(iso.get("beta2"), f"{ctx} field beta2"),
                Qs=_measured_from_json(iso.get("Qs"), f"{ctx} field Qs"),
                BE2_up=_measured_from_json(iso.get("BE2_up"), f"{ctx} field BE2_up"),
                delta_r2=_measured_from_json(iso.get("delta_r2"), f"{ctx} field delta_r2"),
                half_life_s=float(iso["half_life_s"]) if iso.get("half_life_s") is not None else None,
                beta4=_measured_from_json(iso.get("beta4"), f"{ctx} field beta4"),
            )
        )
    return IsotopeChain(
        element=str(obj["element"]),
        reference_A=int(obj["reference_A"]),
        records=tuple(records),
        provenance=dict(obj.get("provenance", {})),
    )


def load_chain(path: str | Path, format: str | None = None) -> IsotopeChain:
    """Load and validate an isotope chain from a CSV or JSON file.

    The format is inferred from the suffix unless given explicitly.
    """
    p = Path(path)
    if not p.exists():
        raise ValidationError(f"chain file {str(p)!r} does not exist")
    fmt = (format or p.suffix.lstrip(".")).lower()
    text = p.read_text(encoding="utf-8")
    if fmt == "csv":
        return _chain_from_csv_text(text)
    if fmt == "json":
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"chain file {str(p)!r} is not valid JSON: {exc}") from exc
        return _chain_from_json_obj(obj)
    raise ValidationError(f"unknown chain format {fmt!r} (expected csv or json)")


def load_bundled_chain(name: str = "mo-chain-v1") -> IsotopeChain:
    """Load a named bundled chain (default: the reference Mo chain)."""
    return load_chain(resource_path(name), format="json")


def _measured_to_json(m: Measured | None):
    if m is None:
        return None
    obj = {"value": m.value}
    if m.sigma is not None:
        obj["sigma"] = m.sigma
    if m.effective:
        obj["effective"] = True
    return obj


def chain_to_json(chain: IsotopeChain) -> str:
    isotopes = []
    for r in chain.records:
        iso = {
            "A": r.A,
            "Z": r.Z,
            "I": str(r.spin),
            "parity": r.parity,
            "r_ch": _measured_to_json(r.r_ch),
            "beta2": _measured_to_json(r.beta2),
            "Qs": _measured_to_json(r.Qs),
            "BE2_up": _measured_to_json(r.BE2_up),
            "delta_r2": _measured_to_json(r.delta_r2),
            "half_life_s": r.half_life_s,
        }
        if r.beta4 is not None:
            iso["beta4"] = _measured_to_json(r.beta4)
        isotopes.append(iso)
    return json.dumps(
        {
            "element": chain.element,
            "reference_A": chain.reference_A,
            "provenance": chain.provenance,
            "isotopes": isotopes,
        },
        indent=2,
    )


def chain_to_csv(chain: IsotopeChain) -> str:
    with_beta4 = any(r.beta4 is not None for r in chain.records)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(_CSV_COLUMNS + (["beta4"] if with_beta4 else []))
    for r in chain.records:
        row = [
            r.A,
            r.Z,
            str(r.spin),
            f"{r.parity:+d}",
            format_measured(r.r_ch),
            format_measured(r.beta2) if r.beta2 is not None else "",
            format_measured(r.Qs) if r.Qs is not None else "",
            format_measured(r.BE2_up) if r.BE2_up is not None else "",
            format_measured(r.delta_r2) if r.delta_r2 is not None else "",
            repr(r.half_life_s) if r.half_life_s is not None else "",
        ]
        if with_beta4:
            row.append(format_measured(r.beta4) if r.beta4 is not None else "")
        writer.writerow(row)
    return buf.getvalue()
