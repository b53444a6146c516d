import csv
from pathlib import Path

import numpy as np
import pytest
from shapely.geometry import box

from gshp_potential import sizing as sz
from gshp_potential import thermal as th
from gshp_potential.climate import DegreeDayProfile
from gshp_potential.synthetic import REFERENCE_T_NOM, reference_ground, reference_profile

import oracles

GOLDEN = Path(__file__).parent / "data" / "golden_resistances.csv"
HP = sz.HpParams()
T_NOM = REFERENCE_T_NOM


@pytest.fixture(scope="module")
def profile():
    return reference_profile()


@pytest.fixture(scope="module")
def ground(profile):
    return reference_ground(profile=profile)


def golden(quantity, **match):
    with GOLDEN.open() as fh:
        for row in csv.DictReader(fh):
            if row["quantity"] == quantity and all(float(row[k]) == v for k, v in match.items()):
                return float(row["expected"])
    raise KeyError(quantity)


def grid_design(ground, n_rows, n_cols, B, H):
    xy = th.grid_coordinates(n_rows, n_cols, B)
    return sz.FieldDesign(B, H, xy, th.resistance_set(xy, B, H, ground))


def oracle_args(design, ground, profile):
    r = design.resistances
    return dict(T_g=ground.T0 + ground.dTdz * design.H / 2, Rb=ground.Rb, R_LT=r.R_LT, R_field=r.R_field,
                R_seas=r.R_seas, w_h=profile.w_hdd_max, t_m_h=profile.t_m_heat,
                w_c=profile.w_cdd_max, t_m_c=profile.t_m_cool)


def test_start_phase_has_no_long_term_part(ground, profile):
    d = grid_design(ground, 3, 3, 7.0, 100.0)
    lt_h, lt_c, seas_h, seas_c = sz.weighted_resistances(d, profile, 2000.0, 700.0, "start")
    assert lt_h == 0.0 and lt_c == 0.0
    assert seas_h > 0 and seas_c > 0


def test_unit_weights_give_raw_resistances(ground):
    d = grid_design(ground, 3, 3, 7.0, 100.0)
    t_m = 744.0
    unit = DegreeDayProfile((1.0,) * 12, (1.0,) * 12, t_m / 8760.0, t_m / 8760.0, t_m, t_m)
    lt_h, lt_c, seas_h, seas_c = sz.weighted_resistances(d, unit, 8760.0, 8760.0, "end")
    r = d.resistances
    assert lt_h == pytest.approx(r.R_LT + r.R_field - r.R_seas, rel=1e-14)
    assert lt_c == lt_h
    assert seas_h == pytest.approx(r.R_seas, rel=1e-14)
    assert seas_c == pytest.approx(r.R_seas, rel=1e-14)


def test_reference_fixture_by_direct_substitution(ground, profile):
    d = grid_design(ground, 3, 3, 7.0, 100.0)
    R_LT = golden("R_LT", H=100.0)
    R_seas = golden("R_seas", H=100.0)
    R_field = golden("R_field", B=7.0, H=100.0)
    t_h, t_c = 1850.0, 500.0
    expected = (
        t_h / 8760 * (R_LT + R_field - R_seas),
        t_c / 8760 * (R_LT + R_field - R_seas),
        profile.w_hdd_max * t_h / profile.t_m_heat * R_seas,
        profile.w_cdd_max * t_c / profile.t_m_cool * R_seas,
    )
    got = sz.weighted_resistances(d, profile, t_h, t_c, sz.Phase.END)
    np.testing.assert_allclose(got, expected, rtol=1e-6)


def test_operating_time_out_of_range(ground, profile):
    d = grid_design(ground, 1, 1, 5.0, 100.0)
    with pytest.raises(ValueError):
        sz.weighted_resistances(d, profile, 9000.0, 0.0, "end")


def test_inconsistent_resistances_flagged(profile):
    d = sz.FieldDesign(5.0, 100.0, [[0.0, 0.0]], th.ResistanceSet(0.1, 0.0, 0.3))
    with pytest.raises(sz.InfeasibleConfigError):
        sz.weighted_resistances(d, profile, 1000.0, 100.0, "end")


def test_fluid_temperatures_trivial_cases(ground, profile):
    d = grid_design(ground, 2, 2, 10.0, 150.0)
    T_g = th.undisturbed_T_g(150.0, ground)
    _, _, seas_h, _ = sz.weighted_resistances(d, profile, 1900.0, 0.0, "start")
    T_h, _ = sz.fluid_temperatures(d, ground, HP, 30.0, 1900.0, 0.0, 0.0, "start", profile)
    assert T_h == pytest.approx(T_g - 30.0 * (seas_h + ground.Rb), rel=1e-14)
    for phase in ("start", "end"):
        assert sz.fluid_temperatures(d, ground, HP, 0.0, 1900.0, 500.0, 0.0, phase, profile) == (T_g, T_g)


def test_fluid_temperatures_match_written_out_model(ground, profile):
    d = grid_design(ground, 4, 3, 10.0, 100.0)
    Q_inj = 8e6
    c = Q_inj / (d.N_B * 600.0 * d.H)
    for end, phase in ((False, "start"), (True, "end")):
        got = sz.fluid_temperatures(d, ground, HP, 35.0, 2100.0, 600.0, Q_inj, phase, profile)
        want = oracles.fluid_temps(q=35.0, t_h=2100.0, t_c=600.0, c=c, end=end, **oracle_args(d, ground, profile))
        np.testing.assert_allclose(got, want, rtol=1e-13)


def test_injection_without_cooling_hours_rejected(ground, profile):
    d = grid_design(ground, 1, 1, 5.0, 100.0)
    with pytest.raises(sz.InfeasibleConfigError):
        sz.fluid_temperatures(d, ground, HP, 10.0, 1800.0, 0.0, 1e6, "end", profile)


def random_fixtures(profile, n=20, seed=7):
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        g = reference_ground(conductivity=float(rng.uniform(1.5, 3.0)), T0=float(rng.uniform(8, 13)),
                             profile=profile)
        B = float(rng.choice(sz.SPACINGS[:8]))
        H = float(rng.choice(sz.DEPTHS))
        d = grid_design(g, int(rng.integers(1, 9)), int(rng.integers(1, 9)), B, H)
        cap = sz.injection_capacity(d, g, HP, profile, T_NOM)
        out.append((g, d, float(rng.uniform(0, 1.2)) * cap))
    return out


def mode1_scan(design, ground, profile, Q_inj, n=10_000):
    q_nom = ground.q_nom(design.H)
    t_c = sz.cooling_hours(profile)
    c = Q_inj / (design.N_B * t_c * design.H) if Q_inj > 0 else 0.0
    grid = np.linspace(0.8 * q_nom, q_nom, n)
    ok = [q for q in grid if oracles.feasible(HP.T_mf_min, HP.T_mf_max, q=q, t_h=T_NOM, t_c=t_c, c=c,
                                              **oracle_args(design, ground, profile))]
    return (max(ok) if ok else None), grid[1] - grid[0]


def test_mode1_matches_feasibility_scan(profile):
    n_feasible = 0
    for g, d, Q_inj in random_fixtures(profile):
        point = sz.solve_mode1_nominal_hours(d, g, HP, profile, Q_inj, T_NOM)
        best, step = mode1_scan(d, g, profile, Q_inj)
        if best is None:
            assert point is None or point.q_max - 0.8 * g.q_nom(d.H) < step
            continue
        n_feasible += 1
        assert point is not None
        assert abs(point.q_max - best) <= step
    assert n_feasible >= 5


def test_mode2_matches_dense_scan(profile):
    checked = 0
    for g, d, Q_inj in random_fixtures(profile, seed=11):
        point = sz.solve_mode2_nominal_power(d, g, HP, profile, Q_inj, T_NOM)
        t_c = sz.cooling_hours(profile)
        c = Q_inj / (d.N_B * t_c * d.H) if Q_inj > 0 else 0.0
        t_max = sz.heating_hours_bound(profile)
        grid = np.linspace(T_NOM, t_max, 20_001)
        ok = np.array([oracles.feasible(HP.T_mf_min, HP.T_mf_max, q=g.q_nom(d.H), t_h=t, t_c=t_c, c=c,
                                        **oracle_args(d, g, profile)) for t in grid])
        if not ok[0]:
            assert point is None
            continue
        checked += 1
        # feasible times form one interval starting at t_nom
        last = grid[np.nonzero(ok)[0].max()]
        assert ok[: np.nonzero(ok)[0].max() + 1].all()
        assert point is not None
        assert abs(point.t_op_h - last) <= 0.1 + (grid[1] - grid[0])
    assert checked >= 3


def test_isolated_borehole_runs_to_upper_bound(profile):
    g = reference_ground(profile=profile)
    slack = th.GroundColumn(2.0, 1e-6, 11.0, 0.03, q_nom_by_depth={100.0: 0.5 * g.q_nom(100.0)})
    d = sz.FieldDesign(5.0, 100.0, [[0.0, 0.0]], th.resistance_set([[0.0, 0.0]], 5.0, 100.0, slack))
    point = sz.solve_mode2_nominal_power(d, slack, HP, profile, 0.0, T_NOM)
    assert point.t_op_h == pytest.approx(sz.heating_hours_bound(profile), abs=1e-9)


def test_mode1_closed_form_at_binding_constraint(ground, profile):
    d = grid_design(ground, 4, 4, 30.0, 100.0)
    point = sz.solve_mode1_nominal_hours(d, ground, HP, profile, 0.0, T_NOM)
    assert point is not None
    assert point.q_max < ground.q_nom(100.0)
    # heating in the last year binds exactly
    assert point.T_mf_h_end == pytest.approx(HP.T_mf_min, abs=1e-9)


def test_dense_heating_only_field_is_infeasible_and_injection_rescues_it(ground, profile):
    d = grid_design(ground, 20, 20, 5.0, 200.0)
    assert sz.solve_mode1_nominal_hours(d, ground, HP, profile, 0.0, T_NOM) is None
    assert sz.solve_mode2_nominal_power(d, ground, HP, profile, 0.0, T_NOM) is None
    Q_inj = 0.95 * sz.injection_capacity(d, ground, HP, profile, T_NOM)
    points = sz.solve_design(d, ground, HP, profile, Q_inj, T_NOM)
    assert points
    for point in points:
        assert point.q_max >= sz.MIN_POWER_FRACTION * ground.q_nom(200.0)


def test_injection_capacity_is_tight(ground, profile):
    for n, B, H in ((5, 5.0, 100.0), (3, 10.0, 200.0), (6, 7.0, 50.0)):
        d = grid_design(ground, n, n, B, H)
        cap = sz.injection_capacity(d, ground, HP, profile, T_NOM)
        assert cap > 0
        assert sz.solve_design(d, ground, HP, profile, cap * (1 - 1e-6), T_NOM)
        assert not sz.solve_design(d, ground, HP, profile, cap * (1 + 1e-3), T_NOM)


def test_operating_points_satisfy_invariants(profile):
    for g, d, Q_inj in random_fixtures(profile, n=12, seed=5):
        for point in sz.solve_design(d, g, HP, profile, Q_inj, T_NOM):
            q_nom = g.q_nom(d.H)
            assert point.q_max >= 0.8 * q_nom - 1e-9
            assert T_NOM - 1e-9 <= point.t_op_h <= sz.heating_hours_bound(profile) + 1e-9
            assert point.Q_field == pytest.approx(point.q_max * point.t_op_h * d.H * d.N_B, rel=1e-12)
            for phase in ("start", "end"):
                T_h, T_c = sz.fluid_temperatures(d, g, HP, point.q_max, point.t_op_h, point.t_op_c,
                                                 point.Q_inj, phase, profile)
                assert T_h >= HP.T_mf_min - 1e-9
                assert T_c <= HP.T_mf_max + 1e-9


def test_optimize_single_candidate(ground, profile):
    d = grid_design(ground, 2, 2, 20.0, 100.0)
    best, Q = sz.optimize_field([d], ground, HP, profile, 0.0, T_NOM)
    assert best.design is d
    assert Q == best.Q_field


def test_optimize_all_infeasible_reports_zero(ground, profile):
    d = grid_design(ground, 20, 20, 5.0, 200.0)
    assert sz.optimize_field([d], ground, HP, profile, 0.0, T_NOM) == (None, 0.0)
    with pytest.raises(ValueError):
        sz.optimize_field([], ground, HP, profile, 0.0, T_NOM)


def test_optimize_tie_break_prefers_larger_spacing():
    ground = th.GroundColumn(2.0, 1e-6, 11.0, q_nom_by_depth={100.0: 10.0})
    profile = reference_profile()
    res = th.ResistanceSet(0.5, 0.0, 0.3)
    a = sz.FieldDesign(10.0, 100.0, [[0.0, 0.0]], res)
    b = sz.FieldDesign(20.0, 100.0, [[0.0, 0.0]], res)
    best, _ = sz.optimize_field([a, b], ground, HP, profile, 0.0, T_NOM)
    assert best.design is b


def test_regeneration_is_monotone(ground, profile):
    for n, B, H in ((6, 5.0, 150.0), (4, 10.0, 100.0)):
        d = grid_design(ground, n, n, B, H)
        cap = sz.injection_capacity(d, ground, HP, profile, T_NOM)
        values = [sz.optimize_field([d], ground, HP, profile, f * cap, T_NOM)[1] for f in np.linspace(0, 1, 11)]
        assert np.all(np.diff(values) >= -1e-6 * max(values))


def test_spacing_optimum_shifts_with_injection(ground, profile):
    designs = sz.candidate_designs(box(0, 0, 60, 60), ground)
    cap = max(sz.injection_capacity(d, ground, HP, profile, T_NOM) for d in designs)
    low, _ = sz.optimize_field(designs, ground, HP, profile, 0.0, T_NOM)
    high, _ = sz.optimize_field(designs, ground, HP, profile, 0.99 * cap, T_NOM)
    assert 15.0 <= low.design.B <= 30.0
    assert high.design.B in (5.0, 7.0)


def test_candidate_designs_respect_depth_cap(ground):
    designs = sz.candidate_designs(box(0, 0, 30, 30), ground, H_max=150.0)
    assert {d.H for d in designs} == {50.0, 100.0, 150.0}
    assert {d.B for d in designs} <= set(sz.SPACINGS)
    for d in designs:
        assert d.N_B >= 1


def test_cop_conversion_is_exact():
    assert sz.to_useful_energy(3.5, 6.5, HP) == (4.5, 5.5)
    assert sz.to_useful_energy(0.0, 0.0, HP) == (0.0, 0.0)
    assert sz.injection_from_cooling(5.5, HP) == 6.5
    with pytest.raises(ValueError):
        sz.to_useful_energy(-1.0, 0.0, HP)


def test_t_nom_table():
    assert sz.t_nom_for_altitude(0.0) == 1800.0
    assert sz.t_nom_for_altitude(900.0) == 1900.0
    assert sz.t_nom_for_altitude(2500.0) == 2000.0


def test_hp_params_validation():
    with pytest.raises(ValueError):
        sz.HpParams(COP_heat=1.0)
    with pytest.raises(ValueError):
        sz.HpParams(T_mf_min=10.0, T_mf_max=5.0)
