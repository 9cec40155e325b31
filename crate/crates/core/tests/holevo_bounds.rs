use proptest::prelude::*;
use qbound::holevo::{
    check_dual, dual_bound, holevo_objective, solve_holevo, z_matrix, HolevoProblem,
    HolevoSolution, SolverOptions, Weight,
};
use qbound::information::{helstrom_matrix, povm_fisher, InfoKind, InfoMatrix};
use qbound::linalg::{self, c, CMat, RMat};
use qbound::quantum::{ParametricModel, Povm};
use qbound::simulate::haar::haar_unitary;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn solve(model: &ParametricModel, theta: &[f64], weight: &Weight) -> HolevoSolution {
    let g = weight.at(model, theta).unwrap();
    let pr = HolevoProblem::from_model(model, theta, g).unwrap();
    solve_holevo(&pr, &SolverOptions::default()).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

fn closed_form_cases() -> Vec<(ParametricModel, Vec<f64>, f64)> {
    let mut cases = Vec::new();
    for (r, dir) in [
        (0.0, [0.0, 0.0, 1.0]),
        (0.3, [1.0, 0.0, 0.0]),
        (0.5, [0.0, 0.0, 1.0]),
        (0.8, [0.6, 0.0, 0.8]),
    ] {
        let theta = dir.iter().map(|x| x * r).collect();
        cases.push((ParametricModel::bloch_full(), theta, (3.0 + 2.0 * r) / 4.0));
    }
    for theta in [[0.0, 0.0], [0.3, 0.0], [-0.2, 0.5], [0.6, 0.6], [0.0, -0.9]] {
        cases.push((ParametricModel::bloch_equatorial(), theta.to_vec(), 0.5));
    }
    for theta in [[0.0, 0.0], [0.3, -0.4]] {
        cases.push((ParametricModel::pure_qubit(), theta.to_vec(), 1.0));
    }
    for theta in [vec![0.0; 4], vec![0.2, 0.1, -0.3, 0.25]] {
        cases.push((ParametricModel::pure_dim(3).unwrap(), theta, 2.0));
    }
    cases
}

#[test]
fn closed_forms_for_fidelity_weight() {
    for (model, theta, want) in closed_form_cases() {
        let sol = solve(&model, &theta, &Weight::HelstromQuarter);
        assert!(
            rel(sol.value, want) < 1e-6,
            "{} at {theta:?}: {} vs {want}",
            model.family(),
            sol.value
        );
    }
}

#[test]
fn single_parameter_value_is_inverse_information() {
    let s = linalg::pauli();
    let model = ParametricModel::affine(
        linalg::identity(2) * c(0.5, 0.0),
        vec![&s[2] * c(0.5, 0.0)],
        1.0,
    )
    .unwrap();
    for t in [0.0, 0.4, 0.7] {
        let sol = solve(&model, &[t], &Weight::Identity);
        assert!((sol.value - (1.0 - t * t)).abs() < 1e-10);
        // K0 = V0^2 G and tr(K0 H) attains the dual value.
        let dual = dual_bound(&sol, &sol.weight).unwrap();
        let v = sol.v0[(0, 0)];
        assert!((dual.k0[(0, 0)] - v * v).abs() < 1e-10);
        let h = helstrom_matrix(&model, &[t]).unwrap().matrix[(0, 0)];
        assert!((dual.k0[(0, 0)] * h - dual.value).abs() < 1e-10);
    }
}

#[test]
fn v0_at_centre_reproduces_closed_form() {
    let model = ParametricModel::bloch_full();
    let sol = solve(&model, &[0.0, 0.0, 0.0], &Weight::HelstromQuarter);
    assert!(((&sol.weight * &sol.v0).trace() - 0.75).abs() < 1e-12);
}

#[test]
fn dual_roundtrip() {
    for (model, theta, _) in closed_form_cases() {
        let sol = solve(&model, &theta, &Weight::HelstromQuarter);
        let dual = dual_bound(&sol, &sol.weight).unwrap();
        assert!(rel(dual.value, sol.value) < 1e-10);
        let g2 = dual.primal_weight();
        let pr = HolevoProblem::from_model(&model, &theta, g2).unwrap();
        let again = solve_holevo(&pr, &SolverOptions::default()).unwrap();
        assert!(rel(again.value, sol.value) < 1e-5);
    }
}

fn random_povm(d: usize, rng: &mut ChaCha8Rng) -> Povm {
    Povm::from_basis(&haar_unitary(d, rng)).unwrap()
}

#[test]
fn dual_dominates_projective_measurements() {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    for (model, theta, _) in closed_form_cases() {
        let sol = solve(&model, &theta, &Weight::HelstromQuarter);
        let dual = dual_bound(&sol, &sol.weight).unwrap();
        for _ in 0..100 {
            let m = random_povm(model.dim(), &mut rng);
            let info = povm_fisher(&model, &theta, &m).unwrap();
            let chk = check_dual(&dual.k0, &info, dual.value).unwrap();
            assert!(chk.satisfied, "{} slack {}", model.family(), chk.slack);
        }
    }
}

#[test]
fn mixtures_of_measurements_respect_dual_bounds() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let model = ParametricModel::bloch_equatorial();
    let theta = [0.3, -0.2];
    let sol = solve(&model, &theta, &Weight::HelstromQuarter);
    let tilted = solve(&model, &theta, &Weight::Matrix(RMat::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 0.5])));
    let duals = [
        dual_bound(&sol, &sol.weight).unwrap(),
        dual_bound(&tilted, &tilted.weight).unwrap(),
    ];
    for _ in 0..20 {
        let i1 = povm_fisher(&model, &theta, &random_povm(2, &mut rng)).unwrap().matrix;
        let i2 = povm_fisher(&model, &theta, &random_povm(2, &mut rng)).unwrap().matrix;
        for t in [0.25, 0.5, 0.75] {
            let mix = InfoMatrix::new(InfoKind::PovmFisher, &i1 * t + &i2 * (1.0 - t)).unwrap();
            for d in &duals {
                assert!(check_dual(&d.k0, &mix, d.value).unwrap().satisfied);
            }
        }
    }
}

#[test]
fn gill_massar_for_a_fixed_basis() {
    let model = ParametricModel::pure_qubit();
    let theta = [0.2, 0.1];
    let h_inv = linalg::spd_inverse(&helstrom_matrix(&model, &theta).unwrap().matrix, "H", 0.0).unwrap();
    let info = povm_fisher(&model, &theta, &Povm::from_basis(&linalg::identity(2)).unwrap()).unwrap();
    assert!(check_dual(&h_inv, &info, 1.0).unwrap().satisfied);
}

#[test]
fn solver_sandwich() {
    for (model, theta, _) in closed_form_cases() {
        let sol = solve(&model, &theta, &Weight::Identity);
        let h = helstrom_matrix(&model, &theta).unwrap().matrix;
        let lower = (&sol.weight * linalg::spd_inverse(&h, "H", 0.0).unwrap()).trace();
        assert!(sol.value >= lower - 1e-6);
        assert!(sol.diagnostics.helstrom_gap >= -1e-6);
    }
}

#[test]
fn scale_covariance() {
    let model = ParametricModel::pure_dim(3).unwrap();
    let theta = [0.1, 0.2, -0.1, 0.3];
    let g = Weight::HelstromQuarter.at(&model, &theta).unwrap();
    let base = solve(&model, &theta, &Weight::Matrix(g.clone())).value;
    for k in [0.1, 3.0, 17.0] {
        let scaled = solve(&model, &theta, &Weight::Matrix(&g * k)).value;
        assert!(rel(scaled, k * base) < 1e-8);
    }
}

#[test]
fn reparameterization_covariance() {
    let s = linalg::pauli();
    let rho0 = (linalg::identity(2) + &s[0] * c(0.3, 0.0) + &s[2] * c(0.4, 0.0)) * c(0.5, 0.0);
    let model =
        ParametricModel::affine(rho0, vec![&s[0] * c(0.5, 0.0), &s[1] * c(0.5, 0.0)], 0.4).unwrap();
    let a = RMat::from_row_slice(2, 2, &[1.2, 0.3, -0.4, 0.9]);
    let eta = [0.05, -0.1];
    let theta: Vec<f64> = (&a * nalgebra::DVector::from_column_slice(&eta)).iter().copied().collect();
    let g = RMat::from_row_slice(2, 2, &[1.0, 0.2, 0.2, 0.7]);
    let original = solve(&model, &theta, &Weight::Matrix(g.clone())).value;
    let re = model.reparameterized(&a).unwrap();
    let mapped = solve(&re, &eta, &Weight::Matrix(a.transpose() * &g * &a)).value;
    assert!(rel(mapped, original) < 1e-6, "{mapped} vs {original}");
}

#[test]
fn multistart_agrees_on_v0() {
    let model = ParametricModel::pure_dim(3).unwrap();
    let theta = [0.1, 0.0, 0.2, -0.1];
    let g = Weight::HelstromQuarter.at(&model, &theta).unwrap();
    let pr = HolevoProblem::from_model(&model, &theta, g).unwrap();
    let opts = SolverOptions {
        multistart: 3,
        seed: 9,
        ..SolverOptions::default()
    };
    let sol = solve_holevo(&pr, &opts).unwrap();
    assert!(sol.diagnostics.v0_spread < 1e-5, "{}", sol.diagnostics.v0_spread);
    assert!(rel(sol.value, 2.0) < 1e-6);
}

fn herm_strategy(d: usize) -> impl Strategy<Value = CMat> {
    proptest::collection::vec(-1.0f64..1.0, 2 * d * d).prop_map(move |v| {
        let m = CMat::from_fn(d, d, |i, j| c(v[2 * (i * d + j)], v[2 * (i * d + j) + 1]));
        linalg::hermitize(&m)
    })
}

fn state_strategy(d: usize) -> impl Strategy<Value = CMat> {
    proptest::collection::vec(-1.0f64..1.0, 2 * d * d).prop_map(move |v| {
        let a = CMat::from_fn(d, d, |i, j| c(v[2 * (i * d + j)], v[2 * (i * d + j) + 1]));
        let m = &a * a.adjoint() + linalg::identity(d) * c(1e-3, 0.0);
        let tr = linalg::trace(&m);
        m / tr
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn z_is_matrix_convex(
        rho in state_strategy(2),
        x1 in herm_strategy(2), x2 in herm_strategy(2),
        y1 in herm_strategy(2), y2 in herm_strategy(2),
    ) {
        let xs = [x1, x2];
        let ys = [y1, y2];
        let mid: Vec<CMat> = xs.iter().zip(&ys).map(|(a, b)| (a + b) * c(0.5, 0.0)).collect();
        let zx = z_matrix(&rho, &xs).unwrap();
        let zy = z_matrix(&rho, &ys).unwrap();
        let zm = z_matrix(&rho, &mid).unwrap();
        let diff = zm - (zx + zy) * c(0.5, 0.0);
        prop_assert!(linalg::eigvalsh(&diff).last().copied().unwrap() <= 1e-10);
    }

    #[test]
    fn objective_is_monotone(
        a in proptest::collection::vec(-1.0f64..1.0, 18),
        b in proptest::collection::vec(-1.0f64..1.0, 18),
        gv in proptest::collection::vec(-1.0f64..1.0, 9),
    ) {
        let to_psd = |v: &[f64]| {
            let m = CMat::from_fn(3, 3, |i, j| c(v[2 * (i * 3 + j)], v[2 * (i * 3 + j) + 1]));
            &m * m.adjoint()
        };
        let z1 = to_psd(&a);
        let z2 = &z1 + to_psd(&b);
        let gm = RMat::from_row_slice(3, 3, &gv);
        let g = &gm * gm.transpose() + RMat::identity(3, 3) * 0.1;
        let f1 = holevo_objective(&g, &z1).unwrap();
        let f2 = holevo_objective(&g, &z2).unwrap();
        prop_assert!(f1 <= f2 + 1e-9);
        prop_assert!(f1 >= (&g * linalg::real_part(&z1)).trace() - 1e-12);
    }
}
