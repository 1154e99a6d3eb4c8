use hodoflow::closed_forms::{ClosedForm, SolutionFamily};
use hodoflow::field::FieldGrid;
use hodoflow::geodesics::{integrate_geodesic, PhaseState};
use hodoflow::geometry::Chart;
use hodoflow::grid::GridSpec;
use hodoflow::hodograph::Tabulated;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn flat_and_multi_indices_are_inverse(nx in 2usize..7, ny in 2usize..7, nz in 2usize..5, k in 0usize..1000) {
        let chart = Chart::sphere3(1.0).unwrap();
        let grid = GridSpec::uniform(&chart, &[(0.5, 1.5, nx), (0.5, 1.5, ny), (0.0, 1.0, nz)]).unwrap();
        let flat = k % grid.n_nodes();
        prop_assert_eq!(grid.flat_index(&grid.multi_index(flat)), flat);
    }

    #[test]
    fn field_csv_roundtrip_is_exact(a1 in -2.0..2.0f64, a2 in -2.0..2.0f64, b1 in -1.0..1.0f64, b2 in -1.0..1.0f64) {
        let chart = Chart::sphere2(1.0).unwrap();
        let field = ClosedForm::new(chart, SolutionFamily::S2StatLinear { a1, a2, b1, b2 }).unwrap();
        let grid = GridSpec::uniform(&chart, &[(0.3, 2.8, 6), (0.0, 6.0, 5)]).unwrap();
        let fg = FieldGrid::sample(&field, &grid, 0.0);
        let mut buf = Vec::new();
        fg.write_csv(&mut buf).unwrap();
        let back = FieldGrid::read_csv(chart, 0.0, buf.as_slice()).unwrap();
        prop_assert_eq!(back.values, fg.values);
    }

    #[test]
    fn geodesics_are_time_reversible(theta in 0.8..2.3f64, phi in 0.0..6.0f64, u in -0.5..0.5f64, v in -0.5..0.5f64) {
        let chart = Chart::sphere2(1.0).unwrap();
        let fwd = integrate_geodesic(&chart, &PhaseState::new(0.0, [theta, phi], [u, v]), 1.0, 1e-12).unwrap();
        let end = fwd.last();
        let back_start = PhaseState::new(0.0, end.coords.clone(), end.velocities.iter().map(|x| -x).collect::<Vec<_>>());
        let back = integrate_geodesic(&chart, &back_start, 1.0, 1e-12).unwrap();
        let b = back.last();
        prop_assert!((b.coords[0] - theta).abs() < 1e-8);
        prop_assert!((b.coords[1] - phi).abs() < 1e-8);
    }

    #[test]
    fn tabulated_profiles_preserve_monotonicity(steps in prop::collection::vec(0.01..1.0f64, 3..8), x in 0.0..1.0f64) {
        let xs: Vec<f64> = (0..steps.len()).map(|i| i as f64).collect();
        let ys: Vec<f64> = steps.iter().scan(0.0, |acc, s| { *acc += s; Some(*acc) }).collect();
        let tab = Tabulated::new(xs.clone(), ys).unwrap();
        let span = xs[xs.len() - 1];
        let (lo, hi) = (x * span * 0.5, x * span * 0.5 + 0.25 * span);
        prop_assert!(tab.eval(lo).unwrap() <= tab.eval(hi).unwrap() + 1e-12);
        prop_assert!(tab.derivative(lo).unwrap() >= -1e-12);
    }
}
