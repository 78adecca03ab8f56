import math

import numpy as np
import pytest

from ioncrystal.constants import TWO_PI, YB171
from ioncrystal.equilibrium import PotentialModel, find_equilibrium
from ioncrystal.errors import NoTransitionFound, ValidationError
from ioncrystal.phases import (PhaseScan, classify, critical_alpha, critical_alpha_by_classification,
                               phase_diagram, principal_extents)

W_R = TWO_PI * 450e3


@pytest.fixture(scope="module")
def scan():
    return PhaseScan(omega_r=W_R)


def _cfg(n, alpha, eps=1.02):
    return find_equilibrium(PotentialModel(W_R, W_R / eps, alpha * W_R, n, YB171))


@pytest.mark.parametrize("n,alpha,label", [(3, 0.3, "Linear"), (7, 2.0, "Radial2D"), (12, 0.75, "ThreeD")])
def test_classification(n, alpha, label):
    assert classify(_cfg(n, alpha)).label == label


def test_zigzag_label():
    # just past the 4-ion chain instability the crystal is a planar zigzag in the weak radial plane
    assert classify(_cfg(4, 0.62)).label == "ZigZag"


def test_extents_of_single_ion_are_zero():
    assert principal_extents(np.zeros((1, 3)), 1e-5) == (0.0, 0.0, 0.0)


def test_unconverged_configuration_not_classified(crystal7):
    from dataclasses import replace

    with pytest.raises(ValidationError):
        classify(replace(crystal7, converged=False))


def test_three_ion_chain_threshold(scan):
    """Closed form: the 3-ion chain buckles when omega_weak^2 = (12/5) omega_z^2."""
    pt = critical_alpha(3, "LinearToZigZag", tol_alpha=1e-6, scan=scan)
    assert pt.alpha_critical == pytest.approx(math.sqrt(5 / 12) / 1.02, abs=2e-6)
    assert pt.bracket_width <= 1e-6


@pytest.mark.parametrize("n,boundary,bracket", [(5, "LinearToZigZag", (0.3, 0.8)),
                                                (7, "ThreeDToRadial2D", (1.0, 2.0))])
def test_soft_mode_agrees_with_classification(scan, n, boundary, bracket):
    tol = 1e-4
    soft = critical_alpha(n, boundary, tol_alpha=tol, scan=scan)
    direct = critical_alpha_by_classification(n, boundary, bracket, tol_alpha=tol, scan=scan)
    assert abs(soft.alpha_critical - direct.alpha_critical) <= 5 * tol


def test_boundaries_are_ordered(scan):
    pts = phase_diagram(range(4, 9), tol_alpha=1e-3, scan=scan)
    by = {(p.n_ions, p.boundary): p.alpha_critical for p in pts}
    for n in range(4, 9):
        assert by[(n, "LinearToZigZag")] < by[(n, "ThreeDToRadial2D")]
    chain = [by[(n, "LinearToZigZag")] for n in range(4, 9)]
    assert np.all(np.diff(chain) < 0)


def test_small_crystals_rejected(scan):
    with pytest.raises(ValidationError):
        critical_alpha(2, "LinearToZigZag", scan=scan)


def test_bad_bracket_reports_no_transition(scan):
    with pytest.raises(NoTransitionFound):
        critical_alpha(5, "LinearToZigZag", bracket=(2.0, 3.0), scan=scan)


def test_unknown_boundary(scan):
    with pytest.raises(ValueError):
        critical_alpha(5, "Sideways", scan=scan)


def test_floquet_boundary_close_to_pseudopotential(scan):
    ps = critical_alpha(3, "LinearToZigZag", tol_alpha=1e-3, scan=scan)
    fl = critical_alpha(3, "LinearToZigZag", "Floquet", tol_alpha=1e-3, scan=scan, bracket=(0.55, 0.7))
    assert abs(fl.alpha_critical - ps.alpha_critical) < 0.03


def test_single_ion_is_linear():
    assert classify(_cfg(1, 3.0)).label == "Linear"


def test_three_ion_planar_boundary_matches_hessian_scan(scan):
    """Brute force: first alpha on a fine grid where the triangle's lowest axial eigenvalue turns positive."""
    from ioncrystal.equilibrium import EquilibriumOptions, scaled_hessian

    planar = find_equilibrium(scan.model(3, 2.0), options=EquilibriumOptions(constraint="planar"))
    u = planar.scaled_positions  # the planar triangle is the same in scaled units for every alpha
    grid = np.arange(0.5, 1.5, 1e-4)
    lowest = []
    for a in grid:
        w2 = scan.model(3, a).w2
        h = scaled_hessian(u, w2)
        lowest.append(np.linalg.eigvalsh(h[2::3, 2::3]).min())
    brute = grid[np.argmax(np.array(lowest) > 0)]
    pt = critical_alpha(3, "ThreeDToRadial2D", tol_alpha=1e-5, scan=scan)
    assert abs(pt.alpha_critical - brute) < 2e-4


def test_planar_boundary_follows_shell_structure(scan):
    """Rises from N = 3 to 6, then dips at the centred hexagon of N = 7."""
    pts = phase_diagram(range(3, 8), tol_alpha=1e-3, scan=scan, boundaries=("ThreeDToRadial2D",))
    a = np.array([p.alpha_critical for p in pts])
    assert np.all(np.diff(a[:4]) > 0)
    assert a[4] < a[3]
