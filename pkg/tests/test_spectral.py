import numpy as np
import pytest

from blowuplab.errors import AccuracyError
from blowuplab.grids import CylGrid, RadialGrid
from blowuplab.profiles import kappa_profile
from blowuplab.spectral import (
    assemble_radial_operator,
    check_nondegeneracy,
    radial_identity_defect,
    read_spectrum_dict,
    solve_spectrum,
    spectral_gap_probe,
    tensor_mode_defect,
    tensorize,
    write_spectrum,
    zero_mode_defect,
)

H = 0.0025


@pytest.fixture(scope="module")
def kappa_spec():
    op = assemble_radial_operator(kappa_profile(7.0), RadialGrid.uniform(15.0, H))
    return solve_spectrum(op, count=8)


@pytest.fixture(scope="module")
def shooting_spec(shooting7):
    op = assemble_radial_operator(shooting7, RadialGrid.uniform(15.0, H))
    return solve_spectrum(op, count=8)


def test_kappa_oscillator_spectrum(kappa_spec):
    # analytic diagonalization: the drifted radial oscillator shifted by -1
    # has eigenvalues m - 1, m in N
    expected = np.array([-1.0, 0.0, 1.0, 2.0])
    got = kappa_spec.eigenvalues[:4]
    assert np.max(np.abs(got - expected)) < 1e-3
    assert kappa_spec.ell0 == 1


def test_symmetry_defect(kappa_spec, shooting_spec):
    assert kappa_spec.operator.symmetry_defect() < 1e-12
    assert shooting_spec.operator.symmetry_defect() < 1e-12


def test_coarse_grid_refused(shooting7):
    with pytest.raises(AccuracyError):
        assemble_radial_operator(shooting7, RadialGrid(np.linspace(0, 15, 76)))


def test_shooting_lambda_minus_one(shooting_spec, shooting7):
    lam = shooting_spec.eigenvalue(-1)
    assert abs(lam + 1.0) < 5e-3
    psi = shooting_spec.eigenvector(-1)
    r = shooting_spec.grid.nodes
    lam_phi = shooting7.lam(r)
    m = shooting_spec.operator.mass
    cos = np.dot(m * psi.values, lam_phi) / np.sqrt(
        np.dot(m * psi.values, psi.values) * np.dot(m * lam_phi, lam_phi)
    )
    assert abs(cos) > 1.0 - 1e-4


def test_mass_orthonormality(shooting_spec):
    m = shooting_spec.operator.mass
    V = shooting_spec.vectors
    gram = (V * m) @ V.T
    assert np.max(np.abs(gram - np.eye(V.shape[0]))) < 1e-8


def test_negative_eigenvalues_simple(shooting_spec):
    vals = shooting_spec.eigenvalues
    gaps = np.diff(vals)
    assert np.all(gaps[: shooting_spec.ell0] > 10.0 * 1e-3)


def test_eigenfunction_tail_decay(shooting_spec, shooting7):
    # decay rate of the scaling mode: 2/(p-1) + 2 (the generator applied to
    # the profile loses two orders against the bare tail)
    psi = shooting_spec.eigenvector(-1)
    r = shooting_spec.grid.nodes
    window = (r >= 10.0) & (r <= 14.0)
    slope = np.polyfit(np.log(r[window]), np.log(np.abs(psi.values[window])), 1)[0]
    assert -slope == pytest.approx(shooting7.alpha + 2.0, rel=0.10)


def test_grid_convergence_order(shooting7):
    lams = {}
    for h in (0.01, 0.005, 0.0025):
        op = assemble_radial_operator(shooting7, RadialGrid.uniform(15.0, h))
        lams[h] = solve_spectrum(op, count=4).eigenvalue(-1)
    e1 = abs(lams[0.01] - lams[0.0025])
    e2 = abs(lams[0.005] - lams[0.0025])
    assert e1 / e2 > 3.0  # O(h^2): exact factor 4 up to higher-order terms


def test_radial_identity_defect(shooting7, kappa_spec):
    grid = RadialGrid.uniform(15.0, 0.005)
    assert radial_identity_defect(shooting7, grid) < 1e-4
    assert radial_identity_defect(kappa_profile(7.0), grid) < 1e-12


def test_matrix_applied_to_scaling_mode(shooting_spec):
    # the discrete eigenpair certifies L_r (LPhi) = -(LPhi) at the matrix
    # level: A psi_{-1} + psi_{-1} is bounded by the eigenvalue defect.
    # (A raw matrix apply to the sampled profile mode cannot do better than
    # ~3e-4 in double precision: h^2 truncation against stored-sample noise
    # amplified by 4/h^2 has a floor of 2 sqrt(4 eps C); the eigenvalue and
    # cosine tests above are the sharp statements.)
    op = shooting_spec.operator
    psi = shooting_spec.eigenvector(-1).values
    res = op.apply(psi) + psi
    rel = np.sqrt(op.mass_inner(res, res) / op.mass_inner(psi, psi))
    assert rel < 5e-3


def test_nondegeneracy_logic():
    class FakeSpec:
        def __init__(self, negatives):
            self._neg = negatives
            self.ell0 = len(negatives)

        def eigenvalue(self, j):
            return self._neg[j + self.ell0]

    # spectrum {-1} only: vacuous pass
    out = check_nondegeneracy(FakeSpec([-1.0]))
    assert out["verdict"] == "pass" and out["vacuous"]
    # {-2.0, -1}: -lambda = 2 natural -> fail at j = -2
    out = check_nondegeneracy(FakeSpec([-2.0, -1.0]))
    assert out["verdict"] == "fail" and not out["per_j"][-2]["ok"]
    # {-2.3, -1}: pass
    out = check_nondegeneracy(FakeSpec([-2.3, -1.0]))
    assert out["verdict"] == "pass" and out["per_j"][-2]["ok"]


def test_shooting_nondegeneracy_output(shooting_spec):
    out = check_nondegeneracy(shooting_spec)
    assert not out["vacuous"]  # the p=7 profile has a deep axis-bound state
    assert out["verdict"] == "pass"


def test_mode_count_map(kappa_spec):
    ts = tensorize(kappa_spec, M_max=4)
    assert ts.M_of_j[-1] == 1
    # table keys are (j, M); the Hermite order of the mode is 2M, so the
    # structural zero mode mu_{-1, 2M=2} is the key (-1, 1)
    assert ts.mu[(-1, 1)] == pytest.approx(0.0, abs=1e-3)
    assert (-1, 0) in ts.removed_set() and (-1, 1) in ts.removed_set()
    assert (-1, 2) not in ts.removed_set()


def test_mode_count_synthetic():
    # lambda = -2.3 -> M = 2 ; lambda = -0.5 -> M = 0
    class FakeOp:
        pass

    from blowuplab.spectral import Spectrum

    op = assemble_radial_operator(kappa_profile(7.0), RadialGrid.uniform(15.0, 0.05))
    spec = Spectrum(op, np.array([-2.3, -0.5, 0.4, 1.2]), np.zeros((4, op.diag.size)), 2)
    ts = tensorize(spec, M_max=4)
    assert ts.M_of_j[-2] == 2
    assert ts.M_of_j[-1] == 0


def test_zero_mode(shooting7):
    grid = CylGrid.uniform(r_max=15.0, h_r=0.0125, z_max=16.0, h_z=0.05)
    assert zero_mode_defect(shooting7, grid) < 1e-3


def test_tensor_modes(kappa_spec, rng):
    grid = CylGrid(kappa_spec.grid, np.arange(0.0, 12.0 + 0.025, 0.05))
    ts = tensorize(kappa_spec, M_max=4)
    choices = [(j, M) for j in range(-1, 3) for M in range(0, 4)]
    picks = rng.choice(len(choices), size=10, replace=False)
    for k in picks:
        j, M = choices[k]
        assert tensor_mode_defect(ts, j, M, grid) < 1e-3, (j, M)


def test_gap_probe_positive(kappa_spec):
    grid = CylGrid(
        RadialGrid.uniform(14.0, 0.05), np.arange(0.0, 14.0 + 0.025, 0.05)
    )
    # interpolated eigenmodes onto the probe grid
    op = assemble_radial_operator(kappa_profile(7.0), grid.radial)
    spec = solve_spectrum(op, count=6)
    ts = tensorize(spec, M_max=3)
    gap = spectral_gap_probe(ts, samples=12, grid=grid, seed=3)
    assert gap > 0.0


def test_gap_probe_rayleigh_mode(kappa_spec):
    # the first strictly positive tensor mode has Rayleigh quotient
    # mu/(1 + "gradient share") in H1: check the raw quotient is positive
    # and matches the eigenvalue through the Dirichlet form
    from blowuplab.grids import WeightKind
    from blowuplab.quadrature import cyl_weights
    from blowuplab.fd import diff1

    grid = CylGrid(
        RadialGrid.uniform(14.0, 0.025), np.arange(0.0, 14.0 + 0.0125, 0.025)
    )
    op = assemble_radial_operator(kappa_profile(7.0), grid.radial)
    spec = solve_spectrum(op, count=6)
    ts = tensorize(spec, M_max=3)
    phi = ts.mode(0, 1, grid)  # mu = lambda_0 + 1 = 1 for the constant profile
    w = cyl_weights(grid, WeightKind.rho_Y())
    p = 7.0
    pot = 1.0 / (p - 1.0) - p * kappa_profile(7.0).value(grid.radial.nodes) ** 6
    gr = diff1(phi, grid.radial.h, axis=0)
    gz = diff1(phi, grid.h_z, axis=1)
    num = np.sum(w * (gr**2 + gz**2 + pot[:, None] * phi**2))
    den = np.sum(w * phi**2)
    assert num / den == pytest.approx(ts.mu[(0, 1)], rel=2e-2)


def test_spectrum_json_round_trip(kappa_spec, tmp_path):
    nd = check_nondegeneracy(kappa_spec)
    ts = tensorize(kappa_spec, M_max=3)
    path = tmp_path / "spectrum.json"
    write_spectrum(kappa_spec, nd, ts, path)
    doc = read_spectrum_dict(path)
    assert doc["ell0"] == 1
    assert doc["nondegeneracy"]["verdict"] == "pass"
    assert "per_j" in doc["nondegeneracy"]  # schema fields present even if vacuous
    assert doc["M_of_j"]["-1"] == 1
    assert doc["eigenvalues"][0] == pytest.approx(-1.0, abs=1e-3)
