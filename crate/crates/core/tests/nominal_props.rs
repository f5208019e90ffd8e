use std::collections::BTreeSet;

use gnss_rfi::calibration::MetricPoint;
use gnss_rfi::ellipse::ThresholdEllipse;
use gnss_rfi::nominal::{cell_of, fit_nominal, recenter, ElevationBin, NominalModel};
use gnss_rfi::threshold::{optimize_threshold, FalsificationConfig, NmConfig};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn cloud(n: usize, mean: (f64, f64), sd: (f64, f64), seed: u64) -> Vec<MetricPoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nx = Normal::new(mean.0, sd.0).unwrap();
    let ny = Normal::new(mean.1, sd.1).unwrap();
    (0..n)
        .map(|k| MetricPoint::new(k as f64, "S131", nx.sample(&mut rng), Some(ny.sample(&mut rng)), 46.0))
        .collect()
}

proptest! {
    #[test]
    fn cell_index_follows_rx_power(x in -250.0..-150.0f64, y in 0.0..65.0f64) {
        let a = cell_of(x, y);
        let b = cell_of(x + 1.0, y);
        prop_assert_eq!((b.i - a.i, b.j - a.j), (1, 0));
    }

    #[test]
    fn grid_mass_sums_to_one(
        mx in -210.0..-190.0f64,
        my in 30.0..50.0f64,
        sx in 0.2..3.0f64,
        sy in 0.2..3.0f64,
        rho in -0.9..0.9f64,
    ) {
        let m = NominalModel::from_params([mx, my], [[sx * sx, rho * sx * sy], [rho * sx * sy, sy * sy]]).unwrap();
        prop_assert!((m.grid_total() - 1.0).abs() < 1e-9);
        prop_assert!(m.grid.iter().all(|g| g.mass >= 0.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn recenter_is_idempotent(dx in -5.0..5.0f64, dy in -5.0..5.0f64, seed in any::<u64>()) {
        let site = fit_nominal(&cloud(2000, (-200.0, 45.0), (0.5, 0.8), seed), ElevationBin::all(), &BTreeSet::new()).unwrap();
        let local = cloud(500, (-200.0 + dx, 45.0 + dy), (0.5, 0.8), seed ^ 0x55);
        let (once, _) = recenter(&site, &local).unwrap();
        let (twice, off) = recenter(&once, &local).unwrap();
        prop_assert_eq!((off.d_rx_power, off.d_cn0), (0.0, 0.0));
        prop_assert_eq!(twice, once);
    }
}

#[test]
fn interior_grid_mass_meets_target() {
    let pts = cloud(20_000, (-200.0, 45.0), (0.3, 0.5), 1);
    let model = fit_nominal(&pts, ElevationBin::around(46.0, 2.0), &BTreeSet::new()).unwrap();
    let cfg = FalsificationConfig::default();
    let rep = optimize_threshold(&model, &cfg, &NmConfig::default()).unwrap();
    let inside: f64 = model
        .grid
        .iter()
        .filter(|g| rep.ellipse.contains(g.i as f64 + 0.5, g.j as f64 + 0.5))
        .map(|g| g.mass)
        .sum();
    assert!(inside >= 1.0 - cfg.target_fpr, "interior mass {inside}");
}

#[test]
fn mahalanobis_start_is_inside_grid_support() {
    let m = NominalModel::from_params([-200.0, 45.0], [[0.09, 0.0], [0.0, 0.25]]).unwrap();
    let e = ThresholdEllipse::mahalanobis(&m, 5.257).unwrap();
    assert!(e.contains(-200.0, 45.0));
    assert!(m.grid.iter().any(|g| e.contains(g.i as f64 + 0.5, g.j as f64 + 0.5)));
}
