import itertools

import numpy as np
import pytest

from wavepax import evolution as ev
from wavepax import interaction as ia
from wavepax import resonance as rs
from wavepax import wavepacket as wp
from wavepax.grids import Grid, ModalField, l1_norm_values


BETA, EPS = 0.12, 0.1


def doublet_sum(model, grid, kstars, beta=BETA, amp=0.12, width=1.0):
    total = np.zeros((model.ncomp,) + grid.shape, dtype=complex)
    for ks in kstars:
        spec = wp.WavepacketSpec(
            n=1, k_star=ks, r_star=0.0, beta=beta, epsilon=EPS,
            envelope=wp.Envelope("gaussian", width, amp),
        )
        total += wp.build_wavepacket(spec, model, grid).values
    return ModalField(grid, total)


@pytest.fixture
def counterprop(nls_model):
    grid = Grid(1, (512,), (4.0,))
    spectrum = rs.spectrum_from_list([[1, 1.0], [1, -1.0]])
    initial = doublet_sum(nls_model, grid, [1.0, -1.0])
    return nls_model, grid, spectrum, initial


# -- index sets --------------------------------------------------------------------

def test_counterprop_resonant_sets_match_listed_families(counterprop):
    model, grid, spectrum, _ = counterprop
    sets = ia.build_index_sets(spectrum, model, [3])
    base = [
        ((1, 1), (-1, 1), (1, 1)),
        ((1, 1), (-1, 1), (1, 2)),
        ((1, 2), (-1, 2), (1, 1)),
        ((1, 2), (-1, 2), (1, 2)),
    ]
    expected = set()
    for entries in base:
        for perm in itertools.permutations(entries):
            expected.add(perm)
    got = {ix.entries for ix in sets.resonant[(1, 1, 3)]}
    assert got == expected


def test_diag_subsets_are_same_pair_only(counterprop):
    model, grid, spectrum, _ = counterprop
    sets = ia.build_index_sets(spectrum, model, [3])
    diag = sets.diag()
    for (l, theta, m), idxs in diag.items():
        for ix in idxs:
            assert set(ix.slots()) == {l}
    # counterpropagating cubic: three permutations of (+,-,+) on the own pair
    assert len(diag[(1, 1, 3)]) == 3


def test_contributing_subsets_have_own_pair_slot(counterprop):
    model, grid, spectrum, _ = counterprop
    sets = ia.build_index_sets(spectrum, model, [3])
    for (l, theta, m), idxs in sets.contributing.items():
        for ix in idxs:
            assert l in ix.slots()


def test_full_equals_reduced_plus_coupling_sets(counterprop):
    model, grid, spectrum, _ = counterprop
    sets = ia.build_index_sets(spectrum, model, [3])
    partition = [[1], [2]]
    coup = sets.coupling(partition)
    red = sets.reduced(partition)
    for key in sets.contributing:
        all_terms = {ix.entries for ix in sets.contributing[key]}
        assert all_terms == {ix.entries for ix in red[key]} | {ix.entries for ix in coup[key]}
        assert not ({ix.entries for ix in red[key]} & {ix.entries for ix in coup[key]})
    diag = sets.diag()
    for key in diag:
        assert {ix.entries for ix in diag[key]} <= {ix.entries for ix in red[key]}


def test_nonresonant_two_packet_quadratic_has_empty_sets(nls_model):
    # generic carriers, quadratic order: no frequency combination matches
    spectrum = rs.spectrum_from_list([[1, 0.9], [1, 1.7]])
    sets = ia.build_index_sets(spectrum, nls_model, [2])
    assert all(len(v) == 0 for v in sets.resonant.values())


def test_shg_pair_averaged_sets(shg_model):
    # second pair driven by the first squared; first pair by (second, first*)
    spectrum = rs.spectrum_from_list([[1, 1.0], [1, 2.0]])
    sets = ia.build_index_sets(spectrum, shg_model, [2])
    assert {ix.entries for ix in sets.contributing[(2, 1, 2)]} == {((1, 1), (1, 1))}
    assert {ix.entries for ix in sets.contributing[(1, 1, 2)]} == {
        ((1, 2), (-1, 1)), ((-1, 1), (1, 2))
    }


# -- interaction system ----------------------------------------------------------------

def test_interaction_f0_constant(counterprop):
    model, grid, spectrum, initial = counterprop
    prob = ev.EvolutionProblem(model, [], 0.05, 0.2, grid, initial)
    sol = ia.solve_interaction_system(prob, spectrum, beta=BETA, epsilon=EPS)
    for key in sol.layout.keys:
        assert np.abs(sol.data[key] - sol.data[key][0]).max() == 0.0
    # the windows reproduce cutoff-built data exactly
    recon = sol.sum_values(0)
    assert np.abs(recon - initial.values).max() <= 1e-14


def test_interaction_support_property(counterprop):
    model, grid, spectrum, initial = counterprop
    prob = ev.EvolutionProblem(model, [ev.cubic_conjugate(1.0)], 0.05, 0.2, grid, initial)
    sol = ia.solve_interaction_system(prob, spectrum, beta=BETA, epsilon=EPS)
    radius = sol.layout.radius
    k = grid.k_axis()
    for (l, theta) in sol.layout.keys:
        center = theta * spectrum.kvec(l)[0]
        f = sol.component_field(l, theta, len(sol.times) - 1)
        outside = np.abs(k - center) >= radius
        assert np.abs(f.values[:, outside]).max() == 0.0


def test_sum_consistency_improves_with_rho(counterprop):
    model, grid, spectrum, initial = counterprop
    cfg = ev.SolverConfig(substeps_per_rho=10)
    dists = []
    for rho in (0.04, 0.02):
        prob = ev.EvolutionProblem(model, [ev.cubic_conjugate(1.0)], rho, 0.2, grid, initial)
        full = ev.solve_integrated(prob, cfg)
        sol = ia.solve_interaction_system(prob, spectrum, cfg, beta=BETA, epsilon=EPS)
        d = 0.0
        kept = sol.sample_indices
        for fi, si in zip(range(len(full.times)), kept):
            d = max(d, l1_norm_values(sol.sum_values(si) - full.fields[fi].values, grid))
        dists.append(d)
    assert dists[1] <= 0.75 * dists[0]
    assert dists[0] <= 0.05


# -- averaged systems ---------------------------------------------------------------------

def test_averaged_nonresonant_state_constant(nls_model):
    grid = Grid(1, (512,), (4.0,))
    spectrum = rs.spectrum_from_list([[1, 0.9], [1, 1.7]])
    initial = doublet_sum(nls_model, grid, [0.9, 1.7])
    sets = ia.build_index_sets(spectrum, nls_model, [2])
    prob = ev.EvolutionProblem(nls_model, [ev.quadratic_conjugate(1.0)], 0.05, 0.2,
                               grid, initial)
    sol = ia.solve_averaged_system(prob, spectrum, sets, beta=BETA, epsilon=EPS)
    for key in sol.layout.keys:
        assert np.abs(sol.data[key] - sol.data[key][0]).max() == 0.0


def test_averaged_tracks_interaction_in_rho(counterprop):
    model, grid, spectrum, initial = counterprop
    cfg = ev.SolverConfig(substeps_per_rho=10)
    sets = ia.build_index_sets(spectrum, model, [3])
    dists = []
    for rho in (0.02, 0.01):
        prob = ev.EvolutionProblem(model, [ev.cubic_full(0.8)], rho, 0.2, grid, initial)
        w = ia.solve_interaction_system(prob, spectrum, cfg, beta=BETA, epsilon=EPS)
        v = ia.solve_averaged_system(prob, spectrum, sets, cfg, beta=BETA, epsilon=EPS)
        dists.append(ia.interaction_distance(v, w))
    assert dists[1] <= 0.75 * dists[0]


def test_diagonal_mode_separates(counterprop):
    model, grid, spectrum, initial = counterprop
    cfg = ev.SolverConfig(substeps_per_rho=10)
    sets = ia.build_index_sets(spectrum, model, [3])
    prob = ev.EvolutionProblem(model, [ev.cubic_conjugate(1.0)], 0.05, 0.2, grid, initial)
    joint = ia.solve_averaged_system(prob, spectrum, sets, cfg, beta=BETA, epsilon=EPS,
                                     mode="diagonal")
    for l in (1, 2):
        sub = spectrum.subset([l])
        sub_sets = ia.build_index_sets(sub, model, [3])
        single = ia.solve_averaged_system(prob, sub, sub_sets, cfg, beta=BETA,
                                          epsilon=EPS, mode="diagonal")
        for theta in (+1, -1):
            a = joint.data[(l, theta)]
            b = single.data[(1, theta)]
            assert np.abs(a - b).max() <= 1e-12


def test_reduced_mode_requires_valid_partition(shg_model):
    from wavepax.errors import HypothesisViolated

    grid = Grid(1, (512,), (4.0,))
    spectrum = rs.spectrum_from_list([[1, 1.0], [1, 2.0]])
    initial = doublet_sum(shg_model, grid, [1.0, 2.0])
    sets = ia.build_index_sets(spectrum, shg_model, [2])
    prob = ev.EvolutionProblem(shg_model, [ev.quadratic_conjugate(0.5)], 0.05, 0.2,
                               grid, initial)
    with pytest.raises(HypothesisViolated):
        ia.solve_averaged_system(prob, spectrum, sets, beta=BETA, epsilon=EPS,
                                 mode="reduced", partition=[[1], [2]])


def test_reduced_mode_universal_partition_matches_diagonal(counterprop):
    model, grid, spectrum, initial = counterprop
    cfg = ev.SolverConfig(substeps_per_rho=10)
    sets = ia.build_index_sets(spectrum, model, [3])
    prob = ev.EvolutionProblem(model, [ev.cubic_conjugate(1.0)], 0.05, 0.2, grid, initial)
    # singleton parts of a universal spectrum: reduced == diagonal termwise
    red = sets.reduced([[1], [2]])
    diag = sets.diag()
    for key in red:
        assert {ix.entries for ix in red[key]} == {ix.entries for ix in diag[key]}
    out = ia.solve_averaged_system(prob, spectrum, sets, cfg, beta=BETA, epsilon=EPS,
                                   mode="reduced", partition=[[1], [2]])
    ref = ia.solve_averaged_system(prob, spectrum, sets, cfg, beta=BETA, epsilon=EPS,
                                   mode="diagonal")
    assert ia.interaction_distance(out, ref) == 0.0


# -- coupling norm ----------------------------------------------------------------------

def test_coupling_norm_single_pair_zero(nls_model):
    grid = Grid(1, (512,), (4.0,))
    spectrum = rs.spectrum_from_list([[1, 1.0]])
    initial = doublet_sum(nls_model, grid, [1.0])
    sets = ia.build_index_sets(spectrum, nls_model, [3])
    prob = ev.EvolutionProblem(nls_model, [ev.cubic_conjugate(1.0)], 0.05, 0.2,
                               grid, initial)
    sol = ia.solve_averaged_system(prob, spectrum, sets, beta=BETA, epsilon=EPS)
    assert ia.coupling_norm(sol, sets) == 0.0


def test_coupling_norm_identical_velocities_reports_value(nls_model):
    # merged carriers +-k with coincident positions: outside the smallness
    # hypotheses, the value is simply reported
    grid = Grid(1, (512,), (4.0,))
    spectrum = rs.spectrum_from_list([[1, 1.0], [1, -1.0]])
    initial = doublet_sum(nls_model, grid, [1.0, -1.0])
    sets = ia.build_index_sets(spectrum, nls_model, [3])
    prob = ev.EvolutionProblem(nls_model, [ev.cubic_full(1.0)], 0.05, 0.2, grid, initial)
    sol = ia.solve_averaged_system(prob, spectrum, sets, beta=BETA, epsilon=EPS)
    value = ia.coupling_norm(sol, sets)
    assert np.isfinite(value) and value >= 0.0


# -- homogeneity ---------------------------------------------------------------------------

def test_homogeneity_universal(counterprop, rng):
    model, grid, spectrum, initial = counterprop
    sets = ia.build_index_sets(spectrum, model, [3])
    prob = ev.EvolutionProblem(model, [ev.cubic_full(1.0)], 0.05, 0.2, grid, initial)
    tuples = [rng.uniform(-np.pi, np.pi, size=2) for _ in range(20)]
    disc = ia.homogeneity_check(prob, spectrum, sets, tuples, beta=BETA, epsilon=EPS,
                                n_times=4)
    assert disc <= 1e-10


def test_homogeneity_zero_phases_identity(counterprop):
    model, grid, spectrum, initial = counterprop
    sets = ia.build_index_sets(spectrum, model, [3])
    prob = ev.EvolutionProblem(model, [ev.cubic_conjugate(1.0)], 0.05, 0.2, grid, initial)
    disc = ia.homogeneity_check(prob, spectrum, sets, [np.zeros(2)], beta=BETA,
                                epsilon=EPS, n_times=3)
    assert disc == 0.0


def test_homogeneity_conditional_spectrum(shg_model, rng):
    grid = Grid(1, (512,), (4.0,))
    spectrum = rs.spectrum_from_list([[1, 1.0], [1, 2.0]])
    initial = doublet_sum(shg_model, grid, [1.0, 2.0])
    sets = ia.build_index_sets(spectrum, shg_model, [2])
    prob = ev.EvolutionProblem(shg_model, [ev.quadratic_conjugate(1.0)], 0.05, 0.2,
                               grid, initial)
    constrained = []
    generic = []
    for _ in range(6):
        p1 = rng.uniform(-np.pi / 2, np.pi / 2)
        constrained.append(np.array([p1, 2 * p1]))
        generic.append(rng.uniform(0.5, np.pi / 2, size=2) * np.array([1.0, -1.0]))
    assert ia.homogeneity_check(prob, spectrum, sets, constrained, beta=BETA,
                                epsilon=EPS, n_times=3) <= 1e-10
    assert ia.homogeneity_check(prob, spectrum, sets, generic, beta=BETA,
                                epsilon=EPS, n_times=3) >= 1e-2


# -- particle norm along trajectories ---------------------------------------------------------

def test_particle_norm_bounded_along_averaged_run(counterprop):
    model, grid, spectrum, initial = counterprop
    sets = ia.build_index_sets(spectrum, model, [3])
    prob = ev.EvolutionProblem(model, [ev.cubic_conjugate(1.0)], 0.05, 0.2, grid, initial)
    sol = ia.solve_averaged_system(prob, spectrum, sets, beta=BETA, epsilon=EPS)
    norms = []
    for i in sol.sample_indices:
        comps, positions = [], []
        for l in (1, 2):
            for theta in (+1, -1):
                comps.append(sol.component_field(l, theta, i))
                positions.append(np.zeros(1))
        norms.append(wp.particle_norm(comps, positions, BETA, EPS))
    assert max(norms) <= 2.0 * norms[0]
