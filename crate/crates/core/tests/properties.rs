use piwno::grid::{Axis, Grid, GridField};
use piwno::harness::{relative_mse, MetricsRecord};
use piwno::spgrad::{build_stencil, sp_gradient, BoundaryMode, StencilConfig};
use piwno::wavelet::{make_basis, Dwt2};
use proptest::prelude::*;

fn field(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0f64..10.0, len)
}

fn basis_name() -> impl Strategy<Value = String> {
    (1usize..=6).prop_map(|k| format!("db{k}"))
}

fn dwt_case() -> impl Strategy<Value = (String, usize, usize, usize, usize)> {
    (basis_name(), 8usize..40, 8usize..40, 1usize..=3, 1usize..=2)
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn dwt_round_trip((name, rows, cols, levels, width) in dwt_case(), seed in any::<u64>()) {
        let Ok(plan) = Dwt2::new(make_basis(&name).unwrap(), rows, cols, levels) else {
            return Ok(());
        };
        let x: Vec<f64> = (0..rows * cols * width)
            .map(|i| ((i as u64).wrapping_mul(seed | 1) % 1000) as f64 / 100.0 - 5.0)
            .collect();
        let back = plan.inverse(&plan.forward(&x, width).unwrap()).unwrap();
        prop_assert!(max_diff(&x, &back) <= 1e-10);
    }

    #[test]
    fn dwt_forward_adjoint_identity(
        (name, rows, cols, levels) in (basis_name(), 8usize..32, 8usize..32, 1usize..=3),
        xy in field(2 * 32 * 32),
    ) {
        let Ok(plan) = Dwt2::new(make_basis(&name).unwrap(), rows, cols, levels) else {
            return Ok(());
        };
        let n = rows * cols;
        let (x, y) = (&xy[..n], &xy[n..2 * n]);
        let fx = plan.forward(x, 1).unwrap();
        let fy = plan.forward(y, 1).unwrap();
        let lhs = fx.dot(&fy);
        let rhs: f64 = x.iter().zip(plan.forward_adjoint(&fy).unwrap()).map(|(a, b)| a * b).sum();
        prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + lhs.abs()), "{lhs} vs {rhs}");
    }

    #[test]
    fn dwt_is_linear(a in -3.0f64..3.0, xy in field(2 * 20 * 24), name in basis_name()) {
        let plan = Dwt2::new(make_basis(&name).unwrap(), 20, 24, 2).unwrap();
        let n = 20 * 24;
        let (x, y) = (&xy[..n], &xy[n..]);
        let mix: Vec<f64> = x.iter().zip(y).map(|(u, v)| a * u + v).collect();
        let lhs = plan.forward(&mix, 1).unwrap();
        let fx = plan.forward(x, 1).unwrap();
        let fy = plan.forward(y, 1).unwrap();
        let diff = lhs.dot(&lhs) - 2.0 * (a * lhs.dot(&fx) + lhs.dot(&fy))
            + a * a * fx.dot(&fx) + 2.0 * a * fx.dot(&fy) + fy.dot(&fy);
        prop_assert!(diff.abs() <= 1e-8 * (1.0 + lhs.energy()));
    }

    #[test]
    fn sp_annihilates_constants(
        c in -100.0f64..100.0,
        nx in 5usize..20,
        ny in 5usize..20,
        radius in 1.0f64..3.0,
        shifted in any::<bool>(),
    ) {
        let grid = Grid::new(vec![Axis::new("x", nx, 0.0, 1.0), Axis::new("y", ny, -1.0, 2.0)]).unwrap();
        let boundary = if shifted { BoundaryMode::InteriorShifted } else { BoundaryMode::OneSided };
        let Ok(st) = build_stencil(&grid, &StencilConfig { radius, boundary }) else {
            return Ok(());
        };
        let f = GridField::new(grid.clone(), vec![c; grid.len()]).unwrap();
        for g in sp_gradient(&f, &st).unwrap() {
            prop_assert!(g.values.iter().all(|v| v.abs() <= 1e-10 * (1.0 + c.abs())));
        }
    }

    #[test]
    fn sp_is_exact_on_affine_fields(a in -5.0f64..5.0, b in -5.0f64..5.0, c in -5.0f64..5.0, n in 5usize..16) {
        let grid = Grid::square(n, -1.0, 1.0).unwrap();
        let st = build_stencil(&grid, &StencilConfig::default()).unwrap();
        let f = grid.sample(|x| a * x[0] + b * x[1] + c);
        let g = sp_gradient(&f, &st).unwrap();
        prop_assert!(g[0].values.iter().all(|v| (v - a).abs() <= 1e-10));
        prop_assert!(g[1].values.iter().all(|v| (v - b).abs() <= 1e-10));
    }

    #[test]
    fn relative_mse_invariants(t in field(30), p in field(30), s in 0.1f64..10.0) {
        match relative_mse(&p, &t) {
            None => prop_assert!(t.iter().all(|v| *v == 0.0)),
            Some(r) => {
                prop_assert!(r >= 0.0);
                prop_assert_eq!(relative_mse(&t, &t), Some(0.0));
                let ps: Vec<f64> = p.iter().map(|v| v * s).collect();
                let ts: Vec<f64> = t.iter().map(|v| v * s).collect();
                let rs = relative_mse(&ps, &ts).unwrap();
                prop_assert!((rs - r).abs() <= 1e-12 * (1.0 + r));
                let zeros = vec![0.0; t.len()];
                prop_assert!((relative_mse(&zeros, &t).unwrap() - 1.0).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn metrics_row_round_trips(
        epoch in 0usize..10_000,
        losses in prop::array::uniform4(0.0f64..1e6),
        val in prop::option::of((0.0f64..10.0, 0.0f64..10.0)),
        lr in 1e-8f64..1.0,
        wall in 0.0f64..1e5,
    ) {
        let (mean, std) = val.unwrap_or((f64::NAN, f64::NAN));
        let r = MetricsRecord {
            epoch,
            loss_pde: losses[0],
            loss_bc: losses[1],
            loss_ic: losses[2],
            loss_data: losses[3],
            rel_mse_val_mean: mean,
            rel_mse_val_std: std,
            lr,
            wall_s: wall,
        };
        let back = MetricsRecord::parse_row(&r.csv_row()).unwrap();
        prop_assert_eq!(back.csv_row(), r.csv_row());
    }
}
