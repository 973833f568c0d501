import json

import numpy as np
import pytest

from linespec2d import sdp
from linespec2d.certificate import (CertificateError, DualCertificate, Family, SubbandPrior,
                                    build_program, build_unweighted, build_weighted,
                                    extract_certificate, families_from_priors, prior_complement,
                                    solve_certificate)
from linespec2d.recovery import dual_poly_direct, eval_dual_poly
from linespec2d.signal_model import Frequency2D, SampleSet, SpectralSignal, sample, synthesize
from linespec2d.trig import RawSubband, halfspace
from conftest import random_samples, random_signal

FULL = RawSubband(0.0, 1.0, 0.0, 1.0)


def on_grid_signal(n, cells, amps):
    return SpectralSignal(n, tuple((Frequency2D(a / n, b / n), d) for (a, b), d in zip(cells, amps)))


def test_single_atom_n2():
    s = on_grid_signal(2, [(1, 0)], [3.0])
    cert = solve_certificate(build_unweighted(synthesize(s), SampleSet.full(2)))
    assert cert.objective == pytest.approx(3.0, abs=1e-5)


def test_orthogonal_atoms_objective_is_l1():
    s = on_grid_signal(7, [(0, 1), (2, 5), (4, 4), (6, 0)], [1.0, -2.0, 3j, 4 * np.exp(0.3j)])
    cert = solve_certificate(build_unweighted(synthesize(s), SampleSet.full(7)))
    assert cert.objective == pytest.approx(10.0, abs=1e-4)


@pytest.mark.parametrize("n", [2, 3, 5])
def test_unweighted_shape(n, rng):
    x = synthesize(random_signal(rng, n, 1))
    prog = build_unweighted(x, SampleSet.full(n))
    assert prog.problem.blocks == (("B0", n * n + 1),)
    assert prog.problem.n_equalities == 2 * len(halfspace(n)) - 1
    assert len(halfspace(n)) == ((2 * n - 1) ** 2 + 1) // 2
    T = random_samples(rng, n, max(1, n * n // 2))
    pinned = {(r, c) for _, r, c, _ in build_unweighted(x, T).problem.fixed_entries}
    assert (n * n, n * n) in pinned
    assert {r for r, c in pinned if c == n * n and r < n * n} == set(np.flatnonzero(~T.mask))


def test_weighted_blocks_and_coupling(rng):
    n = 4
    x = synthesize(random_signal(rng, n, 2))
    T = random_samples(rng, n, 10)
    priors = [SubbandPrior.from_weight(RawSubband(0.1, 0.3, 0.05, 0.25), 0.5),
              SubbandPrior.from_weight(RawSubband(0.6, 0.9, 0.0, 0.5), 2.0)]
    prog = build_weighted(x, T, priors)
    names = [nm for nm, _ in prog.problem.blocks]
    assert names.count("B0") == names.count("B1") == 1
    # second band folds to [0.1, 0.4] x [0, 0.5]: only the first-axis multipliers remain
    assert [nm for nm in names if nm.startswith("G1_")] == ["G1_1", "G1_2"]
    assert [nm for nm in names if nm.startswith("G0_")] == ["G0_1", "G0_2", "G0_3", "G0_4"]
    sizes = dict(prog.problem.blocks)
    assert sizes["B1"] == n * n + 1 and sizes["G0_3"] == (n - 1) ** 2
    assert [f.weight for f in prog.families] == [0.5, 2.0]


def test_prior_weights_and_complement():
    p = SubbandPrior(RawSubband(0.1, 0.4, 0.1, 0.4), 4.13)
    assert p.weight == pytest.approx(1 / 4.13)
    with pytest.raises(ValueError):
        SubbandPrior(FULL, 0.0)
    with pytest.raises(ValueError):
        SubbandPrior.from_weight(FULL, -1.0)
    both = prior_complement([SubbandPrior.from_weight(RawSubband(0.1, 0.4, 0.1, 0.4), 0.242)], 71.42)
    assert [q.weight for q in both] == pytest.approx([0.242, 71.42])
    fams = families_from_priors(both)
    assert len(fams) == 5 and all(f.weight == pytest.approx(71.42) for f in fams[1:])
    assert both[1].contains(0.05, 0.2) and not both[1].contains(0.2, 0.2)
    with pytest.raises(ValueError):
        prior_complement([SubbandPrior(FULL, 1.0)], 2.0)
    with pytest.raises(ValueError):
        prior_complement(both, 2.0)
    point = prior_complement([SubbandPrior(RawSubband(0.2, 0.2, 0.2, 0.2), 1.0)], 3.0)
    assert len(point[1].boxes()) == 2


def test_errors(rng):
    x = synthesize(random_signal(rng, 3, 1))
    with pytest.raises(ValueError):
        build_weighted(x, SampleSet.full(3), [])
    with pytest.raises(ValueError):
        build_program(x, SampleSet.full(3), [])
    T = SampleSet(3, ((0, 0), (1, 1)))
    with pytest.raises(ValueError):
        build_unweighted({(0, 0): 1.0}, T)
    with pytest.raises(ValueError):
        build_unweighted(np.ones(5), T)
    prog = build_unweighted(x, T)
    sol = sdp.solve(prog.problem, max_iter=1)
    with pytest.raises(CertificateError):
        extract_certificate(prog, sol)


def test_observation_map_accepted(rng):
    s = random_signal(rng, 3, 2)
    T = random_samples(rng, 3, 6)
    x = synthesize(s)
    a = solve_certificate(build_unweighted(sample(x, T), T))
    b = solve_certificate(build_unweighted(x, T))
    assert a.objective == pytest.approx(b.objective, abs=1e-9)


def test_extract_pins_and_revalidates(rng):
    s = random_signal(rng, 4, 2)
    T = random_samples(rng, 4, 9)
    prog = build_unweighted(synthesize(s), T)
    cert = solve_certificate(prog)
    assert not cert.q[~T.mask].any()
    assert abs(cert.objective - np.vdot(cert.q, prog.x).real) <= 1e-9


def test_single_atom_certificate_interpolates():
    f0 = Frequency2D(0.21, 0.67)
    s = SpectralSignal(5, ((f0, 2.0 * np.exp(1.1j)),))
    cert = solve_certificate(build_unweighted(synthesize(s), SampleSet.full(5)))
    Q0 = dual_poly_direct(cert.q, 5, f0.f1, f0.f2)
    assert abs(Q0) == pytest.approx(1.0, abs=1e-4)
    # phase aligned: Re <x, q> = |d| needs conj(Q(f0)) d = |d|
    assert (np.conj(Q0) * np.exp(1.1j)).real == pytest.approx(1.0, abs=1e-4)


@pytest.mark.parametrize("seed", range(3))
def test_unweighted_certificate_bounded(seed):
    rng = np.random.default_rng(seed)
    s = random_signal(rng, 5, 3)
    T = random_samples(rng, 5, 18)
    cert = solve_certificate(build_unweighted(synthesize(s), T))
    assert eval_dual_poly(cert, 128).magnitude().max() <= 1 + 1e-4


def test_weighted_certificate_bounded_per_subband():
    rng = np.random.default_rng(5)
    band = RawSubband(0.1, 0.4, 0.1, 0.4)
    priors = prior_complement([SubbandPrior.from_weight(band, 0.5)], 3.0)
    freqs = [Frequency2D(*(0.1 + 0.3 * rng.random(2))) for _ in range(2)]
    s = SpectralSignal(4, tuple((f, 1.0 + rng.random()) for f in freqs))
    cert = solve_certificate(build_weighted(synthesize(s), SampleSet.full(4), priors), tol=1e-6)
    g = np.arange(64) / 64
    F1, F2 = np.meshgrid(g, g, indexing="ij")
    mag = np.abs(dual_poly_direct(cert.q, 4, F1, F2))
    inside = band.contains(F1, F2)
    assert mag[inside].max() <= 0.5 + 1e-4
    assert mag.max() <= 3.0 + 1e-4


def test_full_torus_prior_matches_unweighted(rng):
    for _ in range(2):
        s = random_signal(rng, 4, 2)
        T = random_samples(rng, 4, 11)
        x = synthesize(s)
        u = solve_certificate(build_unweighted(x, T))
        w = solve_certificate(build_weighted(x, T, [SubbandPrior(FULL, 1.0)]))
        assert w.objective == pytest.approx(u.objective, rel=1e-5)


def test_certificate_json_roundtrip():
    cert = DualCertificate(2, np.array([1 + 2j, 0, -0.5j, 3]), 1.25)
    obj = json.loads(cert.dumps())
    assert set(obj) == {"n", "q", "objective"} and obj["q"][0] == {"re": 1.0, "im": 2.0}
    back = DualCertificate.from_json(obj)
    np.testing.assert_array_equal(back.q, cert.q)
    assert back.objective == 1.25 and back.n == 2


def test_family_without_box_is_unweighted(rng):
    x = synthesize(random_signal(rng, 3, 1))
    T = SampleSet.full(3)
    a = solve_certificate(build_program(x, T, [Family(1.0, None)]))
    b = solve_certificate(build_unweighted(x, T))
    assert a.objective == pytest.approx(b.objective, abs=1e-9)


@pytest.mark.slow
def test_orthogonal_atoms_can_beat_l1():
    # Four orthogonal grid atoms whose phases let an off-grid decomposition be
    # cheaper than sum |d|.  A 12x finer grid l1 bounds the atomic norm from
    # above and meets the certificate value from below.
    from linespec2d.grid_oracle import GridProblem, solve_grid_l1
    mags = [2.6664944244263524, 1.1561462737064139, 2.989660622822937, 2.4729566326197294]
    phases = [-1.9930332415531657, -1.130497402933804, 2.692802975343379, -1.5160983011740872]
    amps = [a * np.exp(1j * p) for a, p in zip(mags, phases)]
    s = on_grid_signal(7, [(3, 0), (4, 2), (1, 5), (4, 0)], amps)
    x = synthesize(s)
    lower = solve_certificate(build_unweighted(x, SampleSet.full(7))).objective
    upper = solve_grid_l1(GridProblem(7, 84, SampleSet.full(7), x)).objective
    assert upper < sum(mags) - 0.1
    assert lower == pytest.approx(upper, abs=1e-4)
