"""Physical constants used across the toolkit.

Values are CODATA-2018. The Planck constant is pinned in eV*s because all
energy-to-frequency conversions in reports must use one stated value.
"""

# fine-structure constant (dimensionless)
FINE_STRUCTURE_ALPHA = 7.2973525693e-3

# Planck constant in eV*s
PLANCK_EV_S = 4.135667696e-15


def z_alpha_squared(Z: int) -> float:
    """(Z*alpha)^2, the leading relativistic expansion parameter."""
    return (Z * FINE_STRUCTURE_ALPHA) ** 2
