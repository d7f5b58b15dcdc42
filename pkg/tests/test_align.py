import math

import numpy as np
import pytest

from flexarray.align import (UNREACHABLE_TOL, align_beam, default_budget, evaluate_fold, golden_section_max,
                             sweep)
from flexarray.errors import DomainError
from flexarray.fields import FAR_FIELD_RADIUS, array_field, locate_beam
from flexarray.geometry import ArraySpec, FoldSpec, fold_layout, unit_vector
from flexarray.link import db
from flexarray.power import calibrate

rad = math.radians


@pytest.fixture(scope="module")
def spec():
    return calibrate(ArraySpec.default())


@pytest.fixture(scope="module")
def budget(spec):
    return default_budget(spec)


@pytest.fixture(scope="module")
def e_plane(spec, budget):
    return align_beam(spec, rad(30), 0.0, budget=budget)


def target_field(spec, fold, theta, phi):
    frames = fold_layout(spec, fold)
    return float(np.linalg.norm(array_field(frames, spec, unit_vector(theta, phi), FAR_FIELD_RADIUS)))


def test_golden_section_finds_parabola_peak():
    x, fx = golden_section_max(lambda t: -(t - 0.3) ** 2, -1.0, 2.0, 1e-8)
    assert x == pytest.approx(0.3, abs=1e-8) and fx <= 0


def test_default_budget_gives_20db_unfolded(spec, budget):
    row = evaluate_fold(spec, FoldSpec(), budget)
    assert row.snr_db == pytest.approx(20.0, abs=0.05)
    assert budget.g_r == pytest.approx(row.gain)


def test_broadside_target_needs_no_fold(spec, budget):
    r = align_beam(spec, 0.0, 0.0, budget=budget)
    assert r.fold.xi1 == 0.0 and r.fold.xi2 == 0.0
    assert r.gain_db == pytest.approx(0.0, abs=1e-12)
    assert r.reachable


def test_e_plane_30deg_target(spec, e_plane):
    # the optimum trades a few degrees of pointing for less fold loss; the beam lands at 26.6 deg
    assert e_plane.fold.xi1 > 0 and e_plane.fold.xi2 == 0.0
    assert e_plane.reachable and e_plane.pointing_error <= UNREACHABLE_TOL
    assert math.degrees(e_plane.beam.theta) == pytest.approx(26.56, abs=0.05)
    # folding until the beam peak itself sits at 30 deg yields less field at the target
    pointed = FoldSpec.from_degrees(60, 0)
    assert math.degrees(locate_beam(fold_layout(spec, pointed), spec).theta) == pytest.approx(30.0, abs=0.1)
    assert target_field(spec, e_plane.fold, rad(30), 0.0) > target_field(spec, pointed, rad(30), 0.0)


def test_mirrored_target_mirrors_fold(spec, budget, e_plane):
    m = align_beam(spec, rad(30), math.pi, budget=budget)
    assert m.fold.xi1 == pytest.approx(-e_plane.fold.xi1, abs=rad(0.1))
    assert m.fold.xi2 == pytest.approx(-e_plane.fold.xi2, abs=rad(0.1))
    assert m.gain_db == pytest.approx(e_plane.gain_db, abs=1e-6)


@pytest.mark.parametrize("target", [(30, 0), (20, 45), (25, 90)])
def test_result_is_local_maximum(spec, budget, e_plane, target):
    r = e_plane if target == (30, 0) else align_beam(spec, rad(target[0]), rad(target[1]), budget=budget)
    best = target_field(spec, r.fold, *r.target)
    for d1, d2 in [(0.5, 0), (-0.5, 0), (0, 0.5), (0, -0.5)]:
        nudged = FoldSpec(r.fold.xi1 + rad(d1), r.fold.xi2 + rad(d2))
        assert target_field(spec, nudged, *r.target) <= best * 1.001
    assert r.gain_db <= 0.5


def test_sweep_agrees_with_optimizer(spec, budget, e_plane):
    c1, c2 = (round(v, 1) for v in e_plane.fold.degrees)
    grid1 = np.radians(c1 + np.arange(-2, 3))
    grid2 = np.radians(c2 + np.arange(-2, 3))
    rows = sweep(spec, grid1, grid2, budget, rx_direction=e_plane.target)
    best = max(r.gain for r in rows)
    at_opt = evaluate_fold(spec, e_plane.fold, budget, rx_direction=e_plane.target).gain
    assert db(best) == pytest.approx(db(at_opt), abs=0.2)


def test_alignment_is_deterministic(spec, budget):
    a = align_beam(spec, rad(20), rad(45), budget=budget)
    b = align_beam(spec, rad(20), rad(45), budget=budget)
    assert a == b


def test_result_reports_link_chain(e_plane):
    assert set(e_plane.ber) == {4, 16, 64}
    assert e_plane.ber[4] < e_plane.ber[16] < e_plane.ber[64]
    assert e_plane.snr > 0 and e_plane.z_ant.real > 0


def test_fold_stays_in_bounds(spec, budget):
    r = align_beam(spec, rad(30), 0.0, bounds=(rad(-20), rad(20)), budget=budget)
    assert abs(r.fold.xi1) <= rad(20) + 1e-12 and abs(r.fold.xi2) <= rad(20) + 1e-12
    assert not r.reachable


def test_empty_bounds(spec):
    with pytest.raises(DomainError):
        align_beam(spec, 0.0, 0.0, bounds=(rad(10), rad(-10)))


def test_mismatch_penalty_changes_objective(spec, budget):
    plain = align_beam(spec, rad(20), 0.0, budget=budget, coarse_step=rad(10))
    penal = align_beam(spec, rad(20), 0.0, budget=budget, coarse_step=rad(10), mismatch_penalty=True)
    assert penal.objective < plain.objective


# ---------------------------------------------------------------- sweep

def test_single_cell_sweep_is_unfolded_row(spec, budget):
    (row,) = sweep(spec, [0.0], [0.0], budget)
    assert row.fold == FoldSpec()
    assert row.r_ant == pytest.approx(50.0)
    assert (row.beam.theta, row.beam.phi) == (0.0, 0.0)


def test_sweep_row_order_and_threads(spec, budget):
    g1, g2 = np.radians([-30, 0, 30]), np.radians([0, 45])
    rows = sweep(spec, g1, g2, budget)
    assert np.allclose([r.fold.degrees for r in rows], [(a, b) for a in (-30, 0, 30) for b in (0, 45)])
    assert sweep(spec, g1, g2, budget, threads=4) == rows


def test_empty_sweep_grid(spec, budget):
    with pytest.raises(DomainError):
        sweep(spec, [], [0.0], budget)
