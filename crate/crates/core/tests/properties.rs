use fbmlab::estimators::{parabolic_box_count_with, BoxGrid, CountMode, GraphCloud, GraphSource};
use fbmlab::fbm::{build_covariance_matrix, generate_fbm_path, HurstIndex, TimeGrid};
use fbmlab::gaussian::{conditional_variance, GaussianVectorSpec};
use fbmlab::occupation::{occupation_histogram, WeightedPoint};
use fbmlab::parabolic::{comparison_bounds, rho_h, theoretical_graph_dimension, SpaceTimePoint};
use nalgebra::SymmetricEigen;
use proptest::prelude::*;

fn hurst() -> impl Strategy<Value = HurstIndex> {
    (0.05f64..0.95).prop_map(|h| HurstIndex::new(h).unwrap())
}

fn point(d: usize) -> impl Strategy<Value = SpaceTimePoint> {
    (0.0f64..1.0, prop::collection::vec(-2.0f64..2.0, d)).prop_map(|(t, x)| SpaceTimePoint::new(t, x))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn rho_is_a_metric(h in hurst(), u in point(2), v in point(2), w in point(2)) {
        let (uv, vw, uw) = (rho_h(&u, &v, h), rho_h(&v, &w, h), rho_h(&u, &w, h));
        prop_assert_eq!(rho_h(&u, &u, h), 0.0);
        prop_assert_eq!(uv, rho_h(&v, &u, h));
        prop_assert!(uv >= 0.0);
        prop_assert!(uw <= uv + vw + 1e-12);
    }

    #[test]
    fn graph_dimension_monotone_in_set_dimension(
        a in 0.05f64..0.95, gap in 0.0f64..0.9, x in 0.0f64..1.0, y in 0.0f64..1.0, d in 1usize..4
    ) {
        let alpha = HurstIndex::new(a).unwrap();
        let h = HurstIndex::new((a + gap).min(0.99)).unwrap();
        let (lo, hi) = (x.min(y), x.max(y));
        let f_lo = theoretical_graph_dimension(alpha, h, lo, d).unwrap();
        let f_hi = theoretical_graph_dimension(alpha, h, hi, d).unwrap();
        prop_assert!(f_lo <= f_hi + 1e-12);
        // between dim A and the flat value
        prop_assert!(f_hi >= hi - 1e-12);
        prop_assert!(f_hi <= hi + d as f64 * (h.value() - a) + 1e-12);
    }

    #[test]
    fn comparison_bounds_are_ordered(h in 0.05f64..0.9, step in 0.01f64..0.5, dim in 0.0f64..3.0, d in 1usize..4) {
        let hp = (h + step).min(0.99);
        prop_assume!(hp > h);
        // the whole of space-time has dimension 1 + dH
        let dim = dim.min(1.0 + d as f64 * h);
        let (lo, hi) = comparison_bounds(dim, HurstIndex::new(h).unwrap(), HurstIndex::new(hp).unwrap(), d).unwrap();
        prop_assert!(lo <= hi + 1e-12);
        prop_assert!(lo >= dim - 1e-12);
    }

    #[test]
    fn covariance_is_psd(h in hurst(), mut times in prop::collection::vec(0.001f64..1.0, 2..24)) {
        times.sort_by(f64::total_cmp);
        times.dedup();
        let grid = TimeGrid::from_times(times).unwrap();
        let k = build_covariance_matrix(&grid, h);
        let trace = k.trace();
        let min = SymmetricEigen::new(k).eigenvalues.min();
        prop_assert!(min >= -1e-10 * trace);
    }

    #[test]
    fn box_count_grows_under_refinement(h in 0.2f64..0.8, seed in 0u64..1000, k in 2i32..8) {
        let h = HurstIndex::new(h).unwrap();
        let path = generate_fbm_path(h, &TimeGrid::uniform(512).unwrap(), 1, seed).unwrap();
        let cloud = GraphCloud::from_path(&path, GraphSource::FunctionGraph, h).unwrap();
        for mode in [CountMode::Points, CountMode::Interpolated, CountMode::Envelope] {
            let coarse = parabolic_box_count_with(&cloud, 2f64.powi(-k), h, mode, BoxGrid::default()).unwrap();
            let fine = parabolic_box_count_with(&cloud, 2f64.powi(-k - 1), h, mode, BoxGrid::default()).unwrap();
            prop_assert!(fine >= coarse);
        }
    }

    #[test]
    fn histogram_conserves_mass(
        pts in prop::collection::vec((0.01f64..1.0, -3.0f64..3.0, -3.0f64..3.0), 1..200), eps in 0.01f64..1.0
    ) {
        let image: Vec<WeightedPoint> = pts.iter().map(|&(w, x, y)| WeightedPoint { weight: w, value: vec![x, y] }).collect();
        let hist = occupation_histogram(&image, eps).unwrap();
        let binned: f64 = hist.cells.values().sum();
        prop_assert!((binned - 1.0).abs() <= 1e-12);
        prop_assert_eq!(hist.total_mass, 1.0);
        prop_assert!(hist.occupied() <= pts.len());
    }

    #[test]
    fn conditioning_reduces_variance(h in hurst(), mut times in prop::collection::vec(0.01f64..1.0, 3..7)) {
        times.sort_by(f64::total_cmp);
        times.dedup_by(|a, b| (*a - *b).abs() < 1e-3);
        prop_assume!(times.len() >= 3);
        let n = times.len();
        let spec = GaussianVectorSpec::fbm(times, h).unwrap();
        let mut prev = spec.covariance()[(n - 1, n - 1)];
        let mut given = Vec::new();
        for j in 0..n - 1 {
            given.push(j);
            let v = conditional_variance(&spec, n - 1, &given).unwrap();
            prop_assert!(v >= 0.0);
            prop_assert!(v <= prev * (1.0 + 1e-9) + 1e-15);
            prev = v;
        }
    }
}
