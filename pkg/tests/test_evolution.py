import numpy as np
import pytest

from wavepax import dispersion as dsp
from wavepax import evolution as ev
from wavepax import wavepacket as wp
from wavepax.errors import GridMismatch, PicardMaxIter
from wavepax.grids import (
    Grid,
    ModalField,
    from_r_space,
    l1_norm,
    l1_norm_values,
    linf_r_norm,
    to_r_space,
)


def packet(model, grid, beta=0.1, amp=0.2, k_star=1.0, width=0.5):
    spec = wp.WavepacketSpec(
        n=1, k_star=k_star, r_star=0.0, beta=beta, epsilon=0.1,
        envelope=wp.Envelope("gaussian", width, amp),
    )
    return wp.build_wavepacket(spec, model, grid)


# -- convolution kernels --------------------------------------------------------

def test_delta_convolution_value():
    g = Grid(1, (64,), (4.0,))
    chi = ev.quadratic_conjugate(1.0)
    a, b = 1.5 + 0.5j, -0.25 + 2.0j
    f1 = ModalField(g, np.zeros((2, 64), complex))
    f2 = ModalField(g, np.zeros((2, 64), complex))
    f1.values[0, g.index_of(1.0)[0]] = a
    f2.values[0, g.index_of(0.5)[0]] = b
    out = ev.apply_nonlinearity([f1, f2], chi)
    idx = g.index_of(1.5)[0]
    expected = 1j * a * b * g.dk[0] / (2 * np.pi)
    assert out.values[0, idx] == pytest.approx(expected, abs=1e-15)
    rest = np.abs(out.values).sum() - abs(out.values[0, idx]) - abs(out.values[1, idx])
    assert rest <= 1e-15


@pytest.mark.parametrize("chi", [ev.quadratic_conjugate(0.7), ev.cubic_conjugate(1.3),
                                 ev.cubic_full(0.9)])
def test_fft_matches_direct_oracle(chi, rng):
    g = Grid(1, (16,), (2.0,))
    fields = [
        ModalField(g, rng.normal(size=(2, 16)) + 1j * rng.normal(size=(2, 16)))
        for _ in range(chi.order)
    ]
    o_fft = ev.apply_nonlinearity(fields, chi, mode="fft")
    o_dir = ev.apply_nonlinearity(fields, chi, mode="direct-oracle")
    scale = np.abs(o_dir.values).max()
    assert np.abs(o_fft.values - o_dir.values).max() <= 1e-12 * scale


def test_fft_matches_direct_oracle_2d(rng):
    g = Grid(2, (8, 8), (2.0, 2.0))
    chi = ev.quadratic_conjugate(1.1)
    fields = [
        ModalField(g, rng.normal(size=(2, 8, 8)) + 1j * rng.normal(size=(2, 8, 8)))
        for _ in range(2)
    ]
    o_fft = ev.apply_nonlinearity(fields, chi, mode="fft")
    o_dir = ev.apply_nonlinearity(fields, chi, mode="direct-oracle")
    assert np.abs(o_fft.values - o_dir.values).max() <= 1e-12 * np.abs(o_dir.values).max()


def test_callback_susceptibility_direct(rng):
    g = Grid(1, (16,), (2.0,))

    def callback(k, kvecs):
        t = np.zeros((2, 2, 2), dtype=complex)
        t[0, 0, 0] = 1.0 + float(k[0]) ** 2
        return t

    chi = ev.Susceptibility(order=2, callback=callback)
    fields = [
        ModalField(g, rng.normal(size=(2, 16)) + 1j * rng.normal(size=(2, 16)))
        for _ in range(2)
    ]
    out = ev.apply_nonlinearity(fields, chi)
    # brute-force comparison with constant-tensor pieces: chi = t0 + k^2 t1
    t0 = np.zeros((2, 2, 2), complex); t0[0, 0, 0] = 1.0
    base = ev.apply_nonlinearity(fields, ev.Susceptibility(order=2, tensor=t0),
                                 mode="direct-oracle")
    k2 = g.k_axis() ** 2
    expected = base.values.copy()
    expected[0] *= (1 + k2) / 1.0
    assert np.abs(out.values - expected).max() <= 1e-12 * np.abs(expected).max()


def test_cubic_matches_r_space_product(nls_model, rng):
    # spectrally concentrated fields: i q U+^2 U- equals the transformed
    # pointwise r-space product even on the unpadded grid
    g = Grid(1, (256,), (4.0,))
    f = packet(nls_model, g, beta=0.1, amp=0.3)
    q = 0.8
    chi = ev.cubic_conjugate(q)
    out = ev.apply_nonlinearity([f, f, f], chi)
    u = to_r_space(f)
    prod = np.empty_like(u)
    prod[0] = 1j * q * u[0] * u[0] * u[1]
    prod[1] = -1j * q * u[1] * u[1] * u[0]
    expected = from_r_space(prod, g)
    assert np.abs(out.values - expected.values).max() <= 1e-12 * np.abs(expected.values).max()


def test_grid_mismatch_raises(nls_model):
    g1 = Grid(1, (64,), (2.0,))
    g2 = Grid(1, (128,), (2.0,))
    f1 = ModalField(g1, np.zeros((2, 64), complex))
    f2 = ModalField(g2, np.zeros((2, 128), complex))
    with pytest.raises(GridMismatch):
        ev.apply_nonlinearity([f1, f2], ev.quadratic_conjugate(1.0))


# -- interaction phase ------------------------------------------------------------

def test_interaction_phase_values(shg_model, nls_model):
    # resonant second harmonic at the exact carriers
    assert ev.interaction_phase(shg_model, 1, +1, [1, 1], [+1, +1], 2.0, [1.0]) == pytest.approx(0.0)
    # counterpropagating universal triple
    assert ev.interaction_phase(
        nls_model, 1, +1, [1, 1, 1], [+1, -1, +1], 1.0, [1.0, -1.0]
    ) == pytest.approx(0.0, abs=1e-12)
    m0 = dsp.model_from_config({"preset": "nls1d", "params": {"a2": 1.0, "a0": 0.0}})
    assert ev.interaction_phase(m0, 1, +1, [1, 1], [+1, +1], 2.0, [1.0, 1.0]) == pytest.approx(2.0)


# -- frames --------------------------------------------------------------------------

def test_fast_slow_round_trip(nls_model, grid256, rng):
    vals = rng.normal(size=(2, 256)) + 1j * rng.normal(size=(2, 256))
    f = ModalField(grid256, vals, frame="slow")
    f0 = ev.fast_slow_transform(f, nls_model, rho=0.05, tau=0.0, direction="to_fast")
    assert np.abs(f0.values - vals).max() == 0.0
    fwd = ev.fast_slow_transform(f, nls_model, rho=0.05, tau=0.37, direction="to_fast")
    back = ev.fast_slow_transform(fwd, nls_model, rho=0.05, tau=0.37, direction="to_slow")
    assert back.frame == "slow"
    assert np.abs(back.values - vals).max() <= 1e-12 * np.abs(vals).max()


def test_linear_evolution_matches_propagator(nls_model):
    g = Grid(1, (512,), (4.0,))
    h = packet(nls_model, g)
    prob = ev.EvolutionProblem(nls_model, [], 0.05, 0.3, g, h)
    traj = ev.solve_integrated(prob)
    # slow field constant
    for f in traj.fields:
        assert np.abs(f.values - h.values).max() == 0.0
    i = len(traj.times) - 1
    fast = traj.fast_field(i)
    omega, _, _ = dsp.symbol_eigensystem(nls_model, g)
    closed = h.values * np.exp(-1j * traj.times[i] / prob.rho * omega)
    assert np.abs(fast.values - closed).max() <= 1e-12 * np.abs(h.values).max()


def test_modal_project_completeness(nls_model, grid256, rng):
    vals = rng.normal(size=(2, 256)) + 1j * rng.normal(size=(2, 256))
    f = ModalField(grid256, vals)
    total = np.zeros_like(vals)
    for zeta in (+1, -1):
        total += ev.modal_project(f, nls_model, 1, zeta).values
    assert np.abs(total - vals).max() <= 1e-12
    # diagonal symbol: projection selects the component
    plus = ev.modal_project(f, nls_model, 1, +1)
    assert np.abs(plus.values[1]).max() == 0.0
    assert plus.zeroed_nodes == 0


def test_modal_project_idempotent_matrix_model(rng):
    herm = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    herm = herm + herm.conj().T

    def symbol(k):
        return herm + np.diag([k * k + 6.0, -(k * k) - 6.0])

    m = dsp.matrix_symbol_model(symbol, j_bands=1)
    g = Grid(1, (64,), (2.0,))
    vals = rng.normal(size=(2, 64)) + 1j * rng.normal(size=(2, 64))
    f = ModalField(g, vals)
    once = ev.modal_project(f, m, 1, +1)
    twice = ev.modal_project(once, m, 1, +1)
    assert np.abs(once.values - twice.values).max() <= 1e-12 * np.abs(vals).max()


# -- solver -----------------------------------------------------------------------------

def test_zero_nonlinearity_is_exact(nls_model, grid256):
    h = packet(nls_model, grid256, beta=0.12)
    prob = ev.EvolutionProblem(nls_model, [], 0.02, 0.4, grid256, h)
    traj = ev.solve_integrated(prob)
    assert all(np.abs(f.values - h.values).max() == 0.0 for f in traj.fields)


def test_picard_matches_midpoint_oracle(nls_model):
    g = Grid(1, (256,), (2.0,))
    h = packet(nls_model, g, beta=0.1, amp=0.25, width=0.5)
    prob = ev.EvolutionProblem(nls_model, [ev.cubic_conjugate(1.0)], 0.1, 0.25, g, h)
    cfg = ev.SolverConfig(substeps_per_rho=200, record_stride=100)
    traj = ev.solve_integrated(prob, cfg)
    mid = ev.integrate_slow_midpoint(prob, n_steps=traj.n_steps, record_stride=100)
    dist = ev.trajectory_distance(traj, mid)
    # nonlinear effect is large compared with the agreement level
    moved = l1_norm_values(traj.fields[-1].values - h.values, g)
    assert dist <= 1e-6
    assert moved > 1e-3


def test_single_mode_closed_form(nls_model):
    g = Grid(1, (64,), (2.0,))
    q, rho, tau_star, k0 = 0.8, 0.1, 0.4, 0.5
    vals = np.zeros((2, 64), complex)
    a0 = 0.9 + 0.4j
    vals[0, g.index_of(k0)[0]] = a0
    vals[1, g.index_of(-k0)[0]] = np.conj(a0)
    prob = ev.EvolutionProblem(nls_model, [ev.cubic_conjugate(q)], rho, tau_star,
                               g, ModalField(g, vals))
    traj = ev.solve_integrated(prob, ev.SolverConfig(substeps_per_rho=50))
    w = g.dk[0] / (2 * np.pi)
    expected = a0 * np.exp(1j * q * w * w * abs(a0) ** 2 * tau_star)
    got = traj.fields[-1].values[0, g.index_of(k0)[0]]
    assert got == pytest.approx(expected, rel=1e-8)


def test_mesh_halving_second_order(nls_model):
    g = Grid(1, (256,), (2.0,))
    h = packet(nls_model, g, beta=0.1, amp=0.3, width=0.5)
    prob = ev.EvolutionProblem(nls_model, [ev.cubic_conjugate(1.0)], 0.05, 0.25, g, h)
    sols = {}
    for sub in (10, 20, 40):
        cfg = ev.SolverConfig(substeps_per_rho=sub, record_stride=10 ** 9)
        sols[sub] = ev.solve_integrated(prob, cfg).fields[-1].values
    d1 = l1_norm_values(sols[10] - sols[20], g)
    d2 = l1_norm_values(sols[20] - sols[40], g)
    assert d1 / d2 >= 3.0


def test_picard_contraction_property(nls_model):
    # weak problem: successive distances decay at least geometrically
    g = Grid(1, (128,), (2.0,))
    h = packet(nls_model, g, beta=0.12, amp=0.08, width=0.5)
    prob = ev.EvolutionProblem(nls_model, [ev.cubic_conjugate(0.5)], 0.1, 0.3, g, h)
    traj = ev.solve_integrated(prob)
    d = traj.distances
    assert len(d) >= 3
    for i in range(2, len(d)):
        if d[i - 1] > 1e-14:
            assert d[i] <= 0.6 * d[i - 1]


def test_solution_bound_and_duality(nls_model):
    g = Grid(1, (256,), (2.0,))
    h = packet(nls_model, g, beta=0.12, amp=0.2, width=0.5)
    prob = ev.EvolutionProblem(nls_model, [ev.cubic_conjugate(1.0)], 0.05, 0.3, g, h)
    traj = ev.solve_integrated(prob)
    bound = 2.0 * l1_norm(h)
    for f in traj.fields:
        assert l1_norm(f) <= bound
        assert linf_r_norm(f) <= l1_norm(f) / (2 * np.pi) * (1 + 1e-12)


def test_picard_max_iter_raises(nls_model):
    g = Grid(1, (128,), (2.0,))
    h = packet(nls_model, g, beta=0.12, amp=0.4, width=0.5)
    prob = ev.EvolutionProblem(nls_model, [ev.cubic_conjugate(2.0)], 0.1, 0.3, g, h)
    with pytest.raises(PicardMaxIter):
        ev.solve_integrated(prob, ev.SolverConfig(picard_max_iter=1))


def test_trajectory_records_endpoints(nls_model, grid256):
    h = packet(nls_model, grid256)
    prob = ev.EvolutionProblem(nls_model, [ev.cubic_conjugate(0.3)], 0.05, 0.3, grid256, h)
    traj = ev.solve_integrated(prob, ev.SolverConfig(record_stride=37))
    assert traj.times[0] == 0.0
    assert traj.times[-1] == pytest.approx(0.3)
    assert np.abs(traj.fields[0].values - h.values).max() == 0.0
