"""Self-validation of the brute-force oracle.

The oracle must stand on its own identities (geometric populations, coherent
overlaps, parity, unitarity) before anything else is allowed to lean on it.
"""

import math

import numpy as np
import pytest

from thermalcat import fock_oracle as fo


def test_thermal_populations_geometric():
    # V=3 -> nbar=1 -> p_n = (1/2)^(n+1)
    rho = fo.thermal_fock(3.0, 0.0)
    p = np.diag(rho.matrix).real
    n = np.arange(6)
    assert np.allclose(p[:6], 0.5 ** (n + 1), atol=1e-12)


def test_thermal_vacuum_limit():
    rho = fo.thermal_fock(1.0, 0.0, cutoff=20)
    expect = np.zeros(21)
    expect[0] = 1.0
    assert np.allclose(np.diag(rho.matrix).real, expect, atol=1e-14)


def test_thermal_mean_photon():
    # <n> = (V-1)/2 + d^2
    rho = fo.thermal_fock(3.0, 1.0)
    assert abs(fo.expect_n(rho, 0) - 2.0) < 1e-9


def test_displaced_vacuum_is_coherent():
    beta = 0.7 - 0.3j
    rho = fo.fock_displace(fo.thermal_fock(1.0, 0.0, cutoff=40), 0, beta)
    ref = fo.coherent_fock(beta, 40)
    assert np.max(np.abs(rho.matrix - ref.matrix)) < 1e-10


def test_displacement_unitary_block():
    # columns well below the cutoff keep essentially all their weight,
    # so the corresponding block of D^dag D is clean identity
    D = fo.displacement_matrix(1.3 + 0.4j, 60)
    err = np.max(np.abs((D.conj().T @ D - np.eye(60))[:15, :15]))
    assert err < 1e-10


def test_wigner_vacuum_and_single_photon():
    vac = fo.thermal_fock(1.0, 0.0, cutoff=25)
    assert abs(fo.fock_wigner(vac, 0.0) - 2.0 / np.pi) < 1e-12
    one = np.zeros((26, 26), dtype=complex)
    one[1, 1] = 1.0
    rho1 = fo.FockDensityMatrix(one, (26,))
    assert abs(fo.fock_wigner(rho1, 0.0) + 2.0 / np.pi) < 1e-12


def test_wigner_thermal_origin():
    rho = fo.thermal_fock(3.0, 0.0)
    assert abs(fo.fock_wigner(rho, 0.0) - 2.0 / (3.0 * np.pi)) < 1e-10


def test_wigner_displaced_thermal_peak():
    # W at beta=d equals 2/(pi V)
    V, d = 2.5, 1.2
    rho = fo.thermal_fock(V, d)
    assert abs(fo.fock_wigner(rho, d) - 2.0 / (np.pi * V)) < 1e-9


def test_wigner_coherent_far_point():
    # padding must keep far evaluation points honest
    rho = fo.coherent_fock(1.0, 45)
    beta = 3.5 + 0.0j
    expect = (2.0 / np.pi) * np.exp(-2.0 * abs(beta - 1.0) ** 2)
    assert abs(fo.fock_wigner(rho, beta) - expect) < 1e-10


def test_wigner_grid_matches_pointwise():
    rho = fo.thermal_fock(2.0, 0.5)
    pts = np.array([0.0, 0.3 + 0.2j, -1.0j])
    grid = fo.fock_wigner_grid(rho, [pts])
    for k, b in enumerate(pts):
        assert abs(grid[k] - fo.fock_wigner(rho, b)) < 1e-12


def test_sigma_trace_identity():
    # Tr[Pi rho_th(V,d)] = e^{-2 d^2/V} / V
    V, d = 4.0, 1.0
    rho = fo.thermal_fock(V, d)
    par = np.where(np.arange(rho.dims[0]) % 2 == 0, 1.0, -1.0)
    tr = np.sum(par * np.diag(rho.matrix)).real
    assert abs(tr - np.exp(-2.0 * d * d / V) / V) < 1e-10


def test_cross_kerr_sign_flip():
    # control |1>, phi=pi flips a coherent state's sign
    fld = fo.coherent_fock(1.0, 40)
    hyb = fo.fock_controlled_kerr(fld, (0.0, 1.0), np.pi)
    cond, p = fo.fock_project(hyb, 0, [0.0, 1.0])
    assert abs(p - 1.0) < 1e-12
    ref = fo.coherent_fock(-1.0, 40)
    assert np.max(np.abs(cond.matrix - ref.matrix)) < 1e-10


def test_beam_splitter_coherent_split():
    # 50:50 sends |alpha>|0> to |alpha/sqrt2>|-alpha/sqrt2>
    a = 1.1
    cut = 30
    rho = fo.tensor(fo.coherent_fock(a, cut), fo.coherent_fock(0.0, cut))
    out = fo.fock_beam_splitter(rho, 0, 1, np.pi / 2, 0.0)
    ref = fo.tensor(fo.coherent_fock(a / np.sqrt(2), cut),
                    fo.coherent_fock(-a / np.sqrt(2), cut))
    assert np.max(np.abs(out.matrix - ref.matrix)) < 1e-9


def test_beam_splitter_preserves_photons_and_trace():
    rho = fo.tensor(fo.thermal_fock(2.0, 0.6, cutoff=30), fo.thermal_fock(3.0, 0.0, cutoff=40))
    before = fo.expect_n(rho, 0) + fo.expect_n(rho, 1)
    out = fo.fock_beam_splitter(rho, 0, 1, 0.9, 0.3)
    after = fo.expect_n(out, 0) + fo.expect_n(out, 1)
    assert abs(before - after) < 1e-10
    assert abs(out.trace().real - 1.0) < 1e-12


def test_phase_shift_rotates_coherent():
    rho = fo.coherent_fock(0.8, 35)
    out = fo.fock_phase_shift(rho, 0, np.pi / 3)
    ref = fo.coherent_fock(0.8 * np.exp(1j * np.pi / 3), 35)
    assert np.max(np.abs(out.matrix - ref.matrix)) < 1e-10


def test_parity_even_odd_cat():
    # |a> + |-a| contains only even photon numbers
    cut = 35
    a = 1.3
    plus = fo.coherent_fock(a, cut).matrix + fo.coherent_fock(-a, cut).matrix
    ca = np.exp(-0.5 * a * a) * np.power(a, np.arange(cut + 1)) / np.sqrt(
        np.array([float(math.factorial(n)) for n in range(cut + 1)]))
    vec = ca + ca * np.power(-1.0, np.arange(cut + 1))
    m = np.outer(vec, vec.conj())
    m /= np.trace(m)
    rho = fo.FockDensityMatrix(m.astype(complex), (cut + 1,))
    assert fo.fock_parity(rho, 0) > 1.0 - 1e-12


def test_quadrature_density_vacuum():
    rho = fo.thermal_fock(1.0, 0.0, cutoff=15)
    xs = np.linspace(-3, 3, 11)
    p = fo.quadrature_density(rho, xs)
    assert np.allclose(p, np.exp(-xs * xs) / np.sqrt(np.pi), atol=1e-12)


def test_quadrature_density_thermal_variance():
    # thermal X-variance is V/2 in these units
    V = 3.0
    rho = fo.thermal_fock(V, 0.0)
    xs = np.linspace(-12, 12, 3001)
    p = fo.quadrature_density(rho, xs)
    dx = xs[1] - xs[0]
    assert abs(np.sum(p) * dx - 1.0) < 1e-8
    var = np.sum(p * xs * xs) * dx
    assert abs(var - V / 2.0) < 1e-6


def test_quadrature_angle_rotates_displacement():
    # displaced thermal along +x: angle pi/2 density is centered at 0,
    # angle 0 density is centered at sqrt2 d
    d = 1.0
    rho = fo.thermal_fock(2.0, d)
    xs = np.linspace(-8, 8, 2001)
    dx = xs[1] - xs[0]
    p0 = fo.quadrature_density(rho, xs, angle=0.0)
    p90 = fo.quadrature_density(rho, xs, angle=np.pi / 2)
    m0 = np.sum(p0 * xs) * dx
    m90 = np.sum(p90 * xs) * dx
    assert abs(m0 - np.sqrt(2.0) * d) < 1e-6
    assert abs(m90) < 1e-9


def test_partial_trace_of_product():
    a = fo.thermal_fock(2.0, 0.3, cutoff=28)
    b = fo.thermal_fock(3.0, 0.0, cutoff=40)
    ab = fo.tensor(a, b)
    ra = fo.partial_trace(ab, [0])
    rb = fo.partial_trace(ab, [1])
    assert np.max(np.abs(ra.matrix - a.matrix)) < 1e-12
    assert np.max(np.abs(rb.matrix - b.matrix)) < 1e-12


def test_project_probability_complete():
    fld = fo.thermal_fock(2.0, 0.8, cutoff=32)
    hyb = fo.fock_controlled_kerr(fld, (1/np.sqrt(2), 1/np.sqrt(2)), np.pi)
    _, pp = fo.fock_project(hyb, 0, [1.0, 1.0])
    _, pm = fo.fock_project(hyb, 0, [1.0, -1.0])
    assert abs(pp + pm - 1.0) < 1e-12
    # Eq.-15-like closed form: (1 +/- e^{-2 d^2/V}/V)/2
    V, d = 2.0, 0.8
    ref = 0.5 * (1.0 + np.exp(-2 * d * d / V) / V)
    assert abs(pp - ref) < 1e-10


def _thermal_bell_fock(kind, V, d, cutoff):
    """Two-mode parity-symmetrized displaced-thermal pair, built directly."""
    rp = fo.thermal_fock(V, d, cutoff=cutoff).matrix
    rm = fo.thermal_fock(V, -d, cutoff=cutoff).matrix
    if kind in ("phi+", "phi-"):
        A = np.kron(rp, rp) + np.kron(rm, rm)
    else:
        A = np.kron(rp, rm) + np.kron(rm, rp)
    dim = cutoff + 1
    par = np.where(np.arange(dim) % 2 == 0, 1.0, -1.0)
    pp = np.kron(par, par)
    sign = 1.0 if kind.endswith("+") else -1.0
    m = A + sign * (pp[:, None] * A)
    m /= np.trace(m)
    return fo.FockDensityMatrix(m, (dim, dim))


@pytest.mark.parametrize("kind,expect", [
    ("phi+", 1.0), ("phi-", -1.0), ("psi+", 1.0), ("psi-", -1.0)])
def test_thermal_bell_total_parity(kind, expect):
    rho = _thermal_bell_fock(kind, 3.0, 1.0, 50)
    assert abs(fo.fock_parity(rho, None) - expect) < 1e-8


def test_wigner_grid_two_mode():
    a = fo.thermal_fock(2.0, 0.4, cutoff=30)
    b = fo.coherent_fock(0.5j, 30)
    ab = fo.tensor(a, b)
    ga = np.array([0.0, 0.2 - 0.1j])
    gb = np.array([0.5j, -0.3])
    grid = fo.fock_wigner_grid(ab, [ga, gb])
    for i, x in enumerate(ga):
        for j, y in enumerate(gb):
            assert abs(grid[i, j] - fo.fock_wigner(ab, (x, y))) < 1e-12
    # product state factorizes
    wa = fo.fock_wigner(a, ga[1])
    wb = fo.fock_wigner(b, gb[0])
    assert abs(grid[1, 0] - wa * wb) < 1e-10
