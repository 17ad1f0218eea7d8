"""Shared fixtures: the four reference configurations and frozen constants.

The frozen numbers were produced once by this package at tol=1e-13 and
cross-checked against the independent oracles in oracles.py (fixed-step
RK4, Richardson-extrapolated finite differences, plane-wave matrices).
Tests that guard against regressions compare to these constants; tests
that establish correctness recompute the oracle side live.
"""

import pytest

from defectres import DefectPotential, PeriodicPotential, Potential

# 10 cos(2 pi x) background, bump depth -8 on [-1/2, 1/2]; symmetric
COS10 = PeriodicPotential(cosine_coeffs=(0.0, 10.0))
# same with +2 offset, depth -20: pulls one eigenvalue below zero
COS10P2 = PeriodicPotential(cosine_coeffs=(2.0, 10.0))


@pytest.fixture(scope="session")
def free_potential() -> Potential:
    return Potential(
        periodic=PeriodicPotential(cosine_coeffs=(0.0,)),
        defect=DefectPotential(amplitude=0.0, support_radius=0.5, shape="smooth_bump"),
        symmetric=True,
    )


@pytest.fixture(scope="session")
def ref1() -> Potential:
    return Potential(
        periodic=COS10,
        defect=DefectPotential(amplitude=-8.0, support_radius=0.5, shape="smooth_bump"),
        symmetric=True,
    )


@pytest.fixture(scope="session")
def ref1_unsymmetrized() -> Potential:
    # same operator as ref1 with the symmetry flag dropped: forces the
    # two-sided code paths on data that is secretly even
    return Potential(
        periodic=COS10,
        defect=DefectPotential(amplitude=-8.0, support_radius=0.5, shape="smooth_bump"),
        symmetric=False,
    )


@pytest.fixture(scope="session")
def ref2() -> Potential:
    return Potential(
        periodic=COS10,
        defect=DefectPotential(amplitude=-8.0, support_radius=0.5, shape="smooth_bump",
                               center=0.13),
        symmetric=False,
    )


@pytest.fixture(scope="session")
def ref3() -> Potential:
    return Potential(
        periodic=COS10P2,
        defect=DefectPotential(amplitude=-20.0, support_radius=0.5, shape="smooth_bump"),
        symmetric=True,
    )


@pytest.fixture(scope="session")
def ref3_unsymmetrized() -> Potential:
    return Potential(
        periodic=COS10P2,
        defect=DefectPotential(amplitude=-20.0, support_radius=0.5, shape="smooth_bump"),
        symmetric=False,
    )


@pytest.fixture(scope="session")
def ref4() -> Potential:
    return Potential(
        periodic=COS10P2,
        defect=DefectPotential(amplitude=-20.0, support_radius=0.5, shape="smooth_bump"),
        symmetric=False,
        half_line=True,
    )


# band gap of COS10 containing the REF1/REF2 defect eigenvalues
GAP1 = (4.572518215442361, 14.532614223341596)
# lowest band edge of COS10P2; everything below is gap
REF3_BAND_BOTTOM = 0.7670814433888575

REF1_E0 = 14.310410360985443
REF1_K = 0.20894251409295167
REF2_E0 = 14.343428889836975
REF2_W0 = 0.13984101852949568
REF2_K = 0.19300577071125793
REF3_E0 = -0.9333804406974882
REF3_K = 1.3736743808925158
REF4_E0 = -0.3866578225833583
REF4_W0 = 0.6218181587758259
REF4_K = 1.134502533090784

# converged truncated roots at M = 8, tol = 1e-13
REF1_M8_Z = 14.346384507896943 - 0.01396815436330022j
REF1_M8_Z1 = 14.344945000829549 - 0.013114529066595675j
REF1_M8_ABS_T = 0.7910144303944896
REF1_M8_ABS_DT = 21.412954566763272
REF2_M8_Z = 14.385096202141469 - 0.01530805786309467j
REF2_M8_W = 0.13940966574393965 + 0.0001579237933103166j
REF3_M8_Z = -0.933380441581139
REF4_M8_Z = -0.3866578441532004


@pytest.fixture(scope="session")
def ref1_modes(ref1):
    from defectres import find_defect_modes

    return find_defect_modes(ref1, GAP1)


@pytest.fixture(scope="session")
def ref2_modes(ref2):
    from defectres import find_defect_modes

    return find_defect_modes(ref2, GAP1)


@pytest.fixture(scope="session")
def ref3_modes(ref3):
    from defectres import find_defect_modes

    return find_defect_modes(ref3, (-3.0, REF3_BAND_BOTTOM))


@pytest.fixture(scope="session")
def ref4_modes(ref4):
    from defectres import find_defect_modes

    return find_defect_modes(ref4, (-3.0, REF3_BAND_BOTTOM))
