use proptest::prelude::*;

use qbound::information::{fidelity_hessian, helstrom_matrix, povm_fisher, sld};
use qbound::linalg::{self, CMat, RMat};
use qbound::quantum::{fidelity_embedding, ParametricModel, Povm};

fn families() -> Vec<ParametricModel> {
    vec![
        ParametricModel::bloch_full(),
        ParametricModel::bloch_equatorial(),
        ParametricModel::pure_qubit(),
        ParametricModel::pure_dim(3).unwrap(),
    ]
}

/// Maps a raw vector into the ball of radius `r_max`, keeping its direction.
fn interior(raw: &[f64], scale: f64, r_max: f64) -> Vec<f64> {
    let n = raw.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
    raw.iter().map(|x| x / n * scale * r_max).collect()
}

fn raw_point() -> impl Strategy<Value = (Vec<f64>, f64)> {
    (proptest::collection::vec(-1.0f64..1.0, 4), 0.0f64..1.0)
}

fn unitary_from(v: &[f64], d: usize) -> CMat {
    let m = CMat::from_fn(d, d, |i, j| linalg::c(v[2 * (i * d + j)], v[2 * (i * d + j) + 1]));
    m.qr().q()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn states_are_valid_with_traceless_derivatives((raw, s) in raw_point()) {
        for model in families() {
            let p = model.num_params();
            let theta = interior(&raw[..p], s, 0.95);
            let state = model.state(&theta).unwrap();
            let ev = state.eigenvalues();
            prop_assert!(ev[0] > -1e-12);
            for d in model.point(&theta).unwrap().derivs {
                prop_assert!(linalg::trace(&d).norm() < 1e-12);
                prop_assert!(linalg::hermitian_deviation(&d) < 1e-12);
            }
        }
    }

    #[test]
    fn derivatives_match_finite_differences((raw, s) in raw_point()) {
        let h = 1e-6;
        for model in families() {
            let p = model.num_params();
            let theta = interior(&raw[..p], s, 0.9);
            let derivs = model.point(&theta).unwrap().derivs;
            for (i, d) in derivs.iter().enumerate() {
                let mut a = theta.clone();
                let mut b = theta.clone();
                a[i] += h;
                b[i] -= h;
                let fd = (model.rho(&a).unwrap() - model.rho(&b).unwrap()) / linalg::c(2.0 * h, 0.0);
                prop_assert!(linalg::max_abs(&(fd - d)) < 1e-7);
            }
        }
    }

    #[test]
    fn embedding_is_unit_and_reproduces_helstrom((raw, s) in raw_point()) {
        for model in families() {
            let p = model.num_params();
            let theta = interior(&raw[..p], s, 0.9);
            let e = fidelity_embedding(&model, &theta).unwrap();
            prop_assert!((e.psi.norm() - 1.0).abs() < 1e-12);
            // loss_scale * psi'^T psi' = H / 4.
            let h = helstrom_matrix(&model, &theta).unwrap().matrix;
            let g0 = e.jacobian.transpose() * &e.jacobian * e.loss_scale;
            prop_assert!((g0 - &h * 0.25).amax() < 1e-9 * h.amax().max(1.0));
            let step = 1e-6;
            for i in 0..p {
                let mut a = theta.clone();
                let mut b = theta.clone();
                a[i] += step;
                b[i] -= step;
                let fd = (fidelity_embedding(&model, &a).unwrap().psi
                    - fidelity_embedding(&model, &b).unwrap().psi)
                    / (2.0 * step);
                prop_assert!((fd - e.jacobian.column(i)).amax() < 1e-6);
            }
        }
    }

    #[test]
    fn embedding_distance_is_the_fidelity_deficit(
        (ra, sa) in raw_point(),
        (rb, sb) in raw_point(),
    ) {
        for model in families() {
            let p = model.num_params();
            let a = interior(&ra[..p], sa, 0.9);
            let b = interior(&rb[..p], sb, 0.9);
            let ea = fidelity_embedding(&model, &a).unwrap();
            let eb = fidelity_embedding(&model, &b).unwrap();
            let fid = qbound::quantum::fidelity(&model.state(&a).unwrap(), &model.state(&b).unwrap()).unwrap();
            let want = ea.loss_scale * (&ea.psi - &eb.psi).norm_squared();
            prop_assert!(((1.0 - fid) - want).abs() < 1e-9, "{} vs {}", 1.0 - fid, want);
        }
    }

    #[test]
    fn helstrom_dominates_projective_fisher(
        (raw, s) in raw_point(),
        u in proptest::collection::vec(-1.0f64..1.0, 18),
    ) {
        for model in families() {
            let p = model.num_params();
            let theta = interior(&raw[..p], s, 0.9);
            let povm = Povm::from_basis(&unitary_from(&u, model.dim())).unwrap();
            let h = helstrom_matrix(&model, &theta).unwrap().matrix;
            let f = povm_fisher(&model, &theta, &povm).unwrap().matrix;
            let gap = linalg::eigvalsh_real(&(h - f));
            prop_assert!(gap[0] > -1e-9, "{gap:?}");
        }
    }
}

/// Deterministic interior points spread through the ball of radius 0.8.
fn grid_points(p: usize, count: usize) -> Vec<Vec<f64>> {
    (0..count)
        .map(|k| {
            let raw: Vec<f64> = (0..p).map(|i| ((k * 7 + i * 13 + 1) as f64 * 0.618).sin()).collect();
            interior(&raw, (k as f64 + 0.5) / count as f64, 0.8)
        })
        .collect()
}

#[test]
fn helstrom_agrees_with_fidelity_hessian_on_twenty_points() {
    for model in families() {
        for theta in grid_points(model.num_params(), 20) {
            let h = helstrom_matrix(&model, &theta).unwrap().matrix;
            let fd = fidelity_hessian(&model, &theta, 1e-3).unwrap();
            let err: RMat = &fd - &h;
            assert!(err.amax() < 1e-4, "{:?} at {theta:?}: {}", model.family(), err.amax());
        }
    }
}

#[test]
fn sld_residuals_are_small() {
    for model in families() {
        for theta in grid_points(model.num_params(), 20) {
            let point = model.point(&theta).unwrap();
            let r = sld(&model, &theta).unwrap().residual(&point);
            assert!(r < 1e-8, "{:?} at {theta:?}: {r}", model.family());
        }
    }
}
