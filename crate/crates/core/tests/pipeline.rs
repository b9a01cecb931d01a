use std::f64::consts::TAU;

use burgers_core::fields::{make_trig_field, read_snapshot, write_snapshot, GridSpec};
use burgers_core::norms::{sup_norm, KCalculus, KOptions};
use burgers_core::oracle::direct_solve;
use burgers_core::scheme::{rescale_viscosity, run_picard, unrescale, SchemeConfig};
use burgers_core::verify::check_uniform;
use burgers_core::{Forcing, Modulation};

fn forcing(g: GridSpec) -> Forcing {
    Forcing::separable(
        make_trig_field(g, 77, 2, 0.5).unwrap(),
        Modulation {
            mean: 1.0,
            amplitude: 0.3,
            omega: 2.0,
            phase: 0.0,
        },
    )
    .unwrap()
}

#[test]
fn picard_fixed_point_matches_direct_solver() {
    for d in [1, 2] {
        let g = GridSpec::new(d, 32, TAU).unwrap();
        let u0 = make_trig_field(g, 5, 3, 0.8).unwrap();
        let f = forcing(g);
        let mut cfg = SchemeConfig::new(g, 0.2, 1e-3);
        cfg.holder_frames = 5;
        let out = run_picard(&cfg, &u0, &f).unwrap();
        assert!(out.converged);
        let direct = direct_solve(&u0, &f, &cfg).unwrap();
        let diff = out
            .fixed_point
            .frames
            .iter()
            .zip(&direct.frames)
            .map(|(a, b)| sup_norm(&a.sub(b)))
            .fold(0.0, f64::max);
        assert!(diff < 1e-6, "d = {d}: {diff:e}");
    }
}

#[test]
fn forced_battery_member_satisfies_uniform_bounds() {
    let g = GridSpec::new(1, 32, TAU).unwrap();
    let u0 = make_trig_field(g, 9, 3, 1.0).unwrap();
    let f = forcing(g);
    let mut cfg = SchemeConfig::new(g, 0.2, 2e-3);
    cfg.holder_frames = 5;
    let out = run_picard(&cfg, &u0, &f).unwrap();
    let ks = KCalculus::new(&u0, &f, 1.0, 0.5, KOptions::default())
        .unwrap()
        .series(cfg.dt, cfg.steps().unwrap())
        .unwrap();
    let rep = check_uniform(&out.records, &ks, 1.0).unwrap();
    assert!(rep.passed(), "{:?}", rep.reports().map(|r| r.min_slack()));
}

#[test]
fn viscous_solution_from_unit_problem() {
    // Solve for ũ(t̃) = u(t̃/ν)/ν and map back.
    let nu = 0.5;
    let g = GridSpec::new(1, 32, TAU).unwrap();
    let u0 = make_trig_field(g, 3, 2, 0.5).unwrap();
    let (ut, gt) = rescale_viscosity(&u0, &Forcing::Zero, nu).unwrap();
    let mut cfg = SchemeConfig::new(g, 0.1 * nu, 1e-3 * nu);
    cfg.holder_frames = 5;
    let unit = run_picard(&cfg, &ut, &gt).unwrap();
    let physical = unrescale(&unit.fixed_point, nu).unwrap();
    assert!((physical.horizon() - 0.1).abs() < 1e-12);
    assert!((sup_norm(&physical.frames[0].sub(&u0))) < 1e-14);
    // Sup norm never grows without forcing, in either frame.
    let sups: Vec<f64> = physical.frames.iter().map(sup_norm).collect();
    assert!(sups.windows(2).all(|w| w[1] <= w[0] + 1e-10));
}

#[test]
fn snapshot_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let g = GridSpec::new(2, 16, 3.0).unwrap();
    let f = make_trig_field(g, 1, 3, 2.0).unwrap();
    let path = dir.path().join("u.bfld");
    write_snapshot(&path, &f).unwrap();
    assert_eq!(read_snapshot(&path).unwrap(), f);
}
