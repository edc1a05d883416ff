"""Acceptance suite: one test group per criterion, summarised at the end of the run."""

import json
import subprocess
import sys
import time

import numpy as np
import pytest

from conftest import record
from grassmann_twistor import catalog
from grassmann_twistor.bundle_fields import (SubbundleField, commutator_oracle, energy, flatness_identity_check,
                                             harmonicity_residual, harmonicity_residual_fd, veronese_curve)
from grassmann_twistor.grassmann_flags import SigmaSubset
from grassmann_twistor.hs_model import (HS_FAMILIES, HSSubspacePoint, TruncatedPolarizedSpace, frame_path_index,
                                        truncation_stability, virtual_codimension, virtual_dimension)
from grassmann_twistor.numeric_core import BiPoly
from grassmann_twistor.sphere_domain import make_grid
from grassmann_twistor.splitting import (HolomorphicSubbundle, birkhoff_factorize, brute_force_dims,
                                         splitting_exponents)
from grassmann_twistor.twistor import (check_length_zero_form, flag_distance, j2_residual, reduction_chain,
                                       twistor_lift)

TOL = 1e-8
GRID = make_grid(12, 24)


def test_c1_projection_sweep():
    t0 = time.perf_counter()
    flags = catalog.catalog_flags()
    assert len(flags) >= 10
    worst, checked, ratios = 0.0, 0, []
    fd_grid = make_grid(4, 8)
    for name, F in flags.items():
        assert F.ambient_dim <= 5
        admissible = [s for s in SigmaSubset.all_for(F.length) if j2_residual(F, s, GRID) <= TOL]
        assert admissible, name
        for s in admissible:
            E = F.sigma_field(s.indices)
            worst = max(worst, harmonicity_residual(E, GRID))
            r3, r4 = harmonicity_residual_fd(E, fd_grid, 1e-3), harmonicity_residual_fd(E, fd_grid, 1e-4)
            ratios.append(r3 / r4)
            checked += 1
    wall = time.perf_counter() - t0
    ok = worst <= TOL and all(70 < q < 130 for q in ratios) and wall <= 60
    record(1, ok, f"{len(flags)} flags, {checked} admissible sigmas, max residual {worst:.1e}, "
                  f"fd ratio {min(ratios):.1f}..{max(ratios):.1f}, {wall:.1f} s")
    assert ok


def test_c2_lift_round_trip():
    t0 = time.perf_counter()
    worst_j2 = worst_rec = worst_flag = 0.0
    cases = catalog.presented_catalog()
    for name, (E, flag, sigma) in cases.items():
        L = twistor_lift(E, GRID)
        assert L.sigma.indices == sigma, name
        worst_j2 = max(worst_j2, L.j2_residual)
        worst_rec = max(worst_rec, L.reconstruction_error)
        if flag is not None:
            worst_flag = max(worst_flag, flag_distance(L.flag_field, flag, GRID))
    wall = time.perf_counter() - t0
    ok = worst_j2 <= TOL and worst_rec <= 1e-10 and worst_flag <= TOL and wall <= 30
    record(2, ok, f"{len(cases)} bundles, j2 {worst_j2:.1e}, reconstruction {worst_rec:.1e}, "
                  f"flag distance {worst_flag:.1e}, {wall:.1f} s")
    assert ok


def test_c3_splitting_oracle():
    cat = catalog.exact_holomorphic_catalog()
    assert len(cat) >= 8
    for name, (frame, pairs) in cat.items():
        data = splitting_exponents(HolomorphicSubbundle(frame))
        exact = brute_force_dims(frame, pairs[0][0] + 1)
        assert data.pairs == pairs, name
        assert all(data.profile[m] == exact[m] for m in exact if m in data.profile), name
    rng = np.random.default_rng(11)
    for name, (frame, pairs) in catalog.holomorphic_catalog().items():
        U = catalog.unimodular_change(frame.shape[1], rng)
        C = BiPoly.constant(catalog.random_unitary(rng, frame.shape[0]))
        assert splitting_exponents(HolomorphicSubbundle(C @ frame @ U)).pairs == pairs, name
        for p in catalog.MOBIUS_PARAMS:
            assert splitting_exponents(HolomorphicSubbundle(catalog.mobius(frame, *p))).pairs == pairs, name
    record(3, True, f"{len(cat)} bundles against the symbolic oracle, basis change and 3 Mobius maps each")


def test_c4_oracle_pairing():
    good, bad = catalog.harmonic_fields(), catalog.nonharmonic_fields()
    assert len(good) + len(bad) >= 20 and len(bad) >= 5
    agree = 0
    for expect, table in ((True, good), (False, bad)):
        for name, E in table.items():
            h = harmonicity_residual(E, GRID)
            c = commutator_oracle(E, GRID) / np.sqrt(2)
            both_small, both_large = h <= TOL and c <= TOL, h >= 1e-6 and c >= 1e-6
            assert both_small or both_large, name
            assert both_small == expect, name
            agree += 1
    record(4, True, f"{agree} fields ({len(bad)} non-harmonic), oracles agree on every one")


def test_c5_energy_ratio():
    g = make_grid(40, 64)
    e1 = energy(SubbundleField(veronese_curve(1)), g)
    errs = [abs(energy(SubbundleField(veronese_curve(d)), g) / e1 - d) for d in (1, 2, 3, 4)]
    const = energy(SubbundleField(BiPoly.from_holomorphic([[[1], [0], [0]]])), g)
    ok = max(errs) <= 1e-6 and const <= 1e-12
    record(5, ok, f"max ratio error {max(errs):.1e}, constant map energy {const:.1e}")
    assert ok


def test_c6_flatness_identity():
    flags = catalog.random_flags(seed=1234, count=20)
    g = make_grid(6, 12)
    worst = max(flatness_identity_check(F, g, s, t)
                for F in flags for s in range(1, F.length + 1) for t in range(1, F.length + 1) if s != t)
    record(6, worst <= TOL, f"20 random flags, all index pairs, max {worst:.1e}")
    assert worst <= TOL


def test_c7_length_reduction():
    cases = catalog.reduction_catalog()
    for name, E in cases.items():
        moves = reduction_chain(E, GRID)
        lengths = [E.length()] + [m.length for m in moves]
        assert 1 <= len(moves) <= 4 and lengths[-1] == 0, name
        assert all(b < a for a, b in zip(lengths, lengths[1:])), name
        assert all(m.residual <= TOL for m in moves), name
        fin = moves[-1].result
        assert not fin.complement, name
        check_length_zero_form(HolomorphicSubbundle(fin.outer),
                               None if fin.F1 is None else HolomorphicSubbundle(fin.F1), GRID)
    record(7, True, f"{len(cases)} bundles of positive length reach length 0 with accepted terminal forms")


def test_c8_birkhoff():
    loops = catalog.loop_catalog()
    worst = 0.0
    for name, (f, kappa) in loops.items():
        bf = birkhoff_factorize(f)
        assert bf.kappa == kappa, name
        worst = max(worst, bf.error)
    record(8, worst <= 1e-6, f"{len(loops)} loops, kappa matches, max error {worst:.1e} at 64 annulus points")
    assert worst <= 1e-6


N_LIST = [8, 16, 32, 64]


def test_c9_dimensions_and_invariants():
    for name, fam in HS_FAMILIES.items():
        assert truncation_stability(fam, N_LIST).dimension_constant, name
    rng = np.random.default_rng(9)
    for N in (4, 8):
        sp = TruncatedPolarizedSpace(N, N)
        for k in range(1, 2 * N):
            W = HSSubspacePoint(rng.standard_normal((2 * N, k)) + 1j * rng.standard_normal((2 * N, k)), sp)
            assert virtual_dimension(W) + virtual_codimension(W.perp()) == 0
        base = HS_FAMILIES["positive-half"](N)
        for extra in range(1, N):
            add = HSSubspacePoint(np.stack([sp.e(-j) for j in range(1, extra + 1)], axis=1), sp)
            assert virtual_dimension(base.direct_sum(add)) == extra
    assert set(frame_path_index(HS_FAMILIES["positive-half"](8), HS_FAMILIES["geometric-tail"](8))) == {0}
    record(9, True, "virtual dimension constant on all families; complementarity, additivity, adjacency exact")


@pytest.mark.parametrize("name", [
    "positive-half", "bumped",
    pytest.param("geometric-tail", marks=pytest.mark.xfail(
        strict=True, reason="tail 2^-k gives a norm step of about 4.8e-6 between N=8 and N=16")),
])
def test_c9_cauchy(name):
    rep = truncation_stability(HS_FAMILIES[name], N_LIST)
    diff = max(rep.differences)
    record(9, rep.cauchy, f"{name} max successive pr- norm step {diff:.1e}")
    assert rep.cauchy


def test_c10_full_catalog_cli(tmp_path):
    t0 = time.perf_counter()
    runs = []
    for tag in ("a", "b"):
        out = tmp_path / tag
        proc = subprocess.run([sys.executable, "-m", "grassmann_twistor", "--catalog", "all", "--out", str(out),
                               "--jobs", "4"], capture_output=True, text=True)
        runs.append((proc, out))
    wall = (time.perf_counter() - t0) / 2
    (p1, o1), (p2, o2) = runs
    names = [n for n, _ in catalog.list_catalog()]
    same = True
    for n in names:
        a, b = json.loads((o1 / f"{n}.json").read_text()), json.loads((o2 / f"{n}.json").read_text())
        a.pop("wall_time"), b.pop("wall_time")
        same &= a == b
        assert a["passed"], n
    ok = p1.returncode == 0 and p2.returncode == 0 and same and wall <= 300
    record(10, ok, f"{len(names)} scenarios pass, reports identical across runs, {wall:.1f} s per run")
    assert ok
