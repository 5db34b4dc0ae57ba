//! Results tables and lifespan fits on synthetic data, plus flow-map
//! identities checked by property tests.

use proptest::prelude::*;

use critwave::grid::{damped_wave_propagator, duhamel_weight, heat_duhamel_weight};
use critwave::problem::ModelKind;
use critwave::run::RunStatus;
use critwave::sweep::{fit_scaling, FitLaw, FitResult, SweepRow, SweepTable};

fn row(p: f64, q: f64, eps: f64, points: usize, status: RunStatus, t_num: Option<f64>) -> SweepRow {
    SweepRow {
        model: ModelKind::DampedWave,
        n: 1,
        p,
        q,
        eps,
        half_width: 1024.0,
        points,
        status,
        t_num,
        boundary_mass_max: 1e-12,
        dt_final: 1e-9,
    }
}

/// Two converged rungs per ε with lifespan `law(ε)`.
fn synthetic(p: f64, q: f64, eps: &[f64], law: impl Fn(f64) -> f64) -> SweepTable {
    let mut rows = Vec::new();
    for &e in eps {
        let t = law(e);
        rows.push(row(p, q, e, 8192, RunStatus::BlewUp, Some(t * (1.0 + 1e-4))));
        rows.push(row(p, q, e, 16384, RunStatus::BlewUp, Some(t)));
    }
    SweepTable { rows }
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, m: usize) -> f64 {
    let h = (b - a) / (2 * m) as f64;
    let mut s = f(a) + f(b);
    for i in 1..2 * m {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

#[test]
fn critical_fit_recovers_exponent_and_constant() {
    let eps: Vec<f64> = (0..6).map(|k| 1.2 * 0.85f64.powi(k)).collect();
    let table = synthetic(3.0, 3.0, &eps, |e| (0.7 * e.powi(-2)).exp());
    let f = fit_scaling(&table, FitLaw::Critical).unwrap();
    assert!((f.kappa_hat - 2.0).abs() < 1e-3, "{}", f.kappa_hat);
    assert!((f.c_hat - 0.7).abs() < 1e-3, "{}", f.c_hat);
    assert!(f.r_squared > 0.999999);
    let fixed = fit_scaling(&table, FitLaw::FixedKappa).unwrap();
    assert_eq!(fixed.kappa_predicted, Some(2.0));
    assert!(fixed.r_squared > 0.999999);
}

#[test]
fn unconverged_and_surviving_rows_are_left_out() {
    let eps: Vec<f64> = (0..5).map(|k| 1.0 * 0.9f64.powi(k)).collect();
    let mut table = synthetic(2.0, 5.0, &eps, |e| 3.0 * e.powi(-6));
    table.rows.push(row(2.0, 5.0, 0.1, 8192, RunStatus::Survived, None));
    table.rows.push(row(2.0, 5.0, 0.1, 16384, RunStatus::Survived, None));
    table.rows[3].status = RunStatus::InconclusiveResolution;
    let f = fit_scaling(&table, FitLaw::Subcritical).unwrap();
    assert_eq!(f.eps.len(), 4);
    assert!((f.kappa_hat - 6.0).abs() < 1e-3);
    assert!((f.c_hat - 3.0).abs() < 1e-2);
}

#[test]
fn csv_rejects_malformed_tables() {
    let table = synthetic(3.0, 3.0, &[1.0, 0.9], |e| 1.0 / e);
    let text = table.to_csv();
    assert!(SweepTable::from_csv(text.trim_end()).is_err());
    assert!(SweepTable::from_csv(&text.replace("blew_up", "exploded")).is_err());
    assert!(SweepTable::from_csv(&text.replacen("model", "modle", 1)).is_err());
}

fn status() -> impl Strategy<Value = RunStatus> {
    prop_oneof![
        Just(RunStatus::BlewUp),
        Just(RunStatus::Survived),
        Just(RunStatus::InconclusiveBoundary),
        Just(RunStatus::InconclusiveResolution),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn csv_round_trip_is_exact(
        entries in prop::collection::vec(
            (1.0f64..10.0, 1.0f64..10.0, 1e-3f64..2.0, status(), prop::option::of(1e-3f64..1e12), 0.0f64..1.0),
            0..12,
        )
    ) {
        let rows = entries
            .into_iter()
            .map(|(p, q, eps, st, t, b)| {
                let mut r = row(p, q, eps, 4096, st, t);
                r.boundary_mass_max = b;
                r
            })
            .collect();
        let table = SweepTable { rows };
        let text = table.to_csv();
        let back = SweepTable::from_csv(&text).unwrap();
        prop_assert_eq!(&back, &table);
        prop_assert_eq!(back.to_csv(), text);
    }

    #[test]
    fn power_fit_is_exact_on_power_laws(c in 2.0f64..100.0, kappa in 0.5f64..8.0) {
        let eps: Vec<f64> = (0..6).map(|k| 0.8 * 0.9f64.powi(k)).collect();
        let table = synthetic(2.0, 5.0, &eps, |e| c * e.powf(-kappa));
        let f = fit_scaling(&table, FitLaw::Subcritical).unwrap();
        prop_assert!((f.kappa_hat - kappa).abs() <= 1e-8 * kappa);
        prop_assert!((f.c_hat - c).abs() <= 1e-6 * c);
        let json = f.to_json().unwrap();
        prop_assert_eq!(FitResult::from_json(&json).unwrap(), f);
    }

    #[test]
    fn flow_map_is_a_semigroup(s in 0.0f64..5.0, t in 0.0f64..5.0, lambda in 0.0f64..50.0) {
        let a = damped_wave_propagator(s, lambda);
        let b = damped_wave_propagator(t, lambda);
        let c = damped_wave_propagator(s + t, lambda);
        let ab = a.compose(&b);
        let scale = 1.0 + c.max_abs();
        prop_assert!((ab.e11 - c.e11).abs() <= 1e-12 * scale);
        prop_assert!((ab.e12 - c.e12).abs() <= 1e-12 * scale);
        prop_assert!((ab.e21 - c.e21).abs() <= 1e-12 * scale * (1.0 + lambda));
        prop_assert!((ab.e22 - c.e22).abs() <= 1e-12 * scale);
    }

    #[test]
    fn forcing_weights_match_quadrature(h in 1e-3f64..4.0, lambda in 0.0f64..30.0) {
        let e12 = |s: f64| damped_wave_propagator(s, lambda).e12;
        let want = simpson(e12, 0.0, h, 4000);
        prop_assert!((duhamel_weight(h, lambda) - want).abs() <= 1e-9 * (1.0 + want.abs()));
        let heat = simpson(|s| (-s * lambda).exp(), 0.0, h, 4000);
        prop_assert!((heat_duhamel_weight(h, lambda) - heat).abs() <= 1e-9 * (1.0 + heat));
    }
}
