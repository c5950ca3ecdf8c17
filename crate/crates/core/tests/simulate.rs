use flowembed::datagen::linear_system;
use flowembed::phasefield::{CoefficientMatrix, Lattice, MonomialDictionary, VectorField};
use flowembed::simulate::{
    add_gaussian, bin_trajectories, integrate, mask_zeros, perturb_parameters, trajectory_field, FnDynamics, Method,
    Trajectory,
};
use flowembed::Exec;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn cosine_on_nonempty(a: &VectorField, b: &VectorField) -> (f64, f64) {
    let q = a.lattice().q();
    let np = a.lattice().num_points();
    let (mut dot, mut na, mut nb, mut filled) = (0.0, 0.0, 0.0, 0usize);
    for k in 0..np {
        let u = a.velocity(k);
        if u.iter().all(|&v| v == 0.0) {
            continue;
        }
        filled += 1;
        let v = b.velocity(k);
        for j in 0..q {
            dot += u[j] * v[j];
            na += u[j] * u[j];
            nb += v[j] * v[j];
        }
    }
    (dot / (na.sqrt() * nb.sqrt()), filled as f64 / np as f64)
}

fn stable_node_field(l: &Lattice) -> (flowembed::phasefield::PolynomialSystem, VectorField) {
    let sys = linear_system(&MonomialDictionary::build(2, 3).unwrap(), [[-1.0, 0.0], [0.0, -2.0]]).unwrap();
    let f = sys.eval_on_lattice(l).unwrap();
    (sys, f)
}

#[test]
fn harmonic_oscillator_keeps_its_radius() {
    let osc = FnDynamics { q: 2, f: |x: &[f64], out: &mut [f64]| {
        out[0] = x[1];
        out[1] = -x[0];
    } };
    let t = integrate(&osc, &[0.6, -0.3], 0.01, 100, Method::Rk4, None).unwrap();
    let r0 = (0.36f64 + 0.09).sqrt();
    for k in 0..t.len() {
        let s = t.state(k);
        assert!(((s[0] * s[0] + s[1] * s[1]).sqrt() - r0).abs() < 1e-9);
    }
}

#[test]
fn empty_and_single_segment_binning() {
    let l = Lattice::centered(2, 5).unwrap();
    let zero = bin_trajectories(&[], &l, Exec::Sequential).unwrap();
    assert!(zero.velocities().iter().all(|&v| v == 0.0));
    // constant velocity (0.1, -0.05) for 10 steps of 0.01 stays inside the
    // cell around (0.5, 0)
    let v = [0.1, -0.05];
    let drift = FnDynamics { q: 2, f: move |_: &[f64], out: &mut [f64]| out.copy_from_slice(&v) };
    let t = integrate(&drift, &[0.5, 0.0], 0.01, 10, Method::Euler, None).unwrap();
    let f = bin_trajectories(&[t], &l, Exec::Sequential).unwrap();
    let cell = l.cell_of(&[0.5, 0.0]).unwrap();
    for k in 0..l.num_points() {
        if k == cell {
            assert!((f.velocity(k)[0] - 0.1).abs() < 1e-12 && (f.velocity(k)[1] + 0.05).abs() < 1e-12);
        } else {
            assert_eq!(f.velocity(k), &[0.0, 0.0]);
        }
    }
}

#[test]
fn binned_linear_flow_points_along_the_true_field() {
    let l = Lattice::centered(2, 64).unwrap();
    let (sys, truth) = stable_node_field(&l);
    let binned = trajectory_field(&sys, 2000, &l, &mut rng(1), Exec::Parallel).unwrap();
    let (cos, filled) = cosine_on_nonempty(&binned, &truth);
    assert!(cos > 0.9, "cosine {cos}");
    assert!(filled > 0.2, "filled {filled}");
    let again = trajectory_field(&sys, 2000, &l, &mut rng(1), Exec::Sequential).unwrap();
    assert_eq!(binned, again);
    let sparse = trajectory_field(&sys, 10, &l, &mut rng(2), Exec::Parallel).unwrap();
    assert!(cosine_on_nonempty(&sparse, &truth).1 < 0.5);
}

#[test]
fn gaussian_noise_scales_with_the_field_spread() {
    let l = Lattice::centered(2, 64).unwrap();
    let mut r = rng(3);
    let base: Vec<f64> = (0..2 * 4096).map(|k| if k % 2 == 0 { 1.0 } else { -1.0 }).collect();
    let field = VectorField::new(l.clone(), base).unwrap();
    assert!((field.component_std() - 1.0).abs() < 1e-12);
    let noisy = add_gaussian(&field, 0.3, &mut r).unwrap();
    let diffs: Vec<f64> = noisy.velocities().iter().zip(field.velocities()).map(|(a, b)| a - b).collect();
    let mean = diffs.iter().sum::<f64>() / diffs.len() as f64;
    let std = (diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / diffs.len() as f64).sqrt();
    assert!((std - 0.3).abs() < 0.01, "std {std}");
    assert_eq!(add_gaussian(&field, 0.0, &mut r).unwrap(), field);
    let zero = VectorField::zeros(&l);
    assert_eq!(add_gaussian(&zero, 0.3, &mut r).unwrap(), zero);
}

#[test]
fn masking_extremes() {
    let l = Lattice::centered(2, 64).unwrap();
    let (_, f) = stable_node_field(&l);
    let mut r = rng(4);
    assert_eq!(mask_zeros(&f, 0.0, &mut r).unwrap(), f);
    assert!(mask_zeros(&f, 1.0, &mut r).unwrap().velocities().iter().all(|&v| v == 0.0));
    let m = mask_zeros(&f, 0.3, &mut r).unwrap();
    let zeroed = (0..4096).filter(|&k| m.velocity(k) == [0.0, 0.0] && f.velocity(k) != [0.0, 0.0]).count();
    assert_eq!(zeroed, 1228);
}

#[test]
fn parameter_noise_statistics() {
    let xi = CoefficientMatrix::zeros(10, 2);
    let mut r = rng(5);
    assert_eq!(perturb_parameters(&xi, 0.0, &mut r).unwrap(), xi);
    let draws: Vec<f64> =
        (0..5000).flat_map(|_| perturb_parameters(&xi, 0.1, &mut r).unwrap().values().to_vec()).collect();
    let n = draws.len() as f64;
    let mean = draws.iter().sum::<f64>() / n;
    let std = (draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / n).sqrt();
    assert!((std - 0.1).abs() < 0.002, "std {std}");
    assert!(mean.abs() < 3.0 * 0.1 / n.sqrt(), "mean {mean}");
}

proptest! {
    #[test]
    fn trajectories_start_at_their_initial_condition(x in -1.0f64..1.0, y in -1.0f64..1.0, steps in 1usize..200) {
        let l = Lattice::centered(2, 16).unwrap();
        let (sys, _) = stable_node_field(&l);
        let t: Trajectory = integrate(&sys, &[x, y], 0.01, steps, Method::Rk4, Some(&l)).unwrap();
        prop_assert_eq!(t.initial(), &[x, y]);
        prop_assert_eq!(t.len(), steps + 1);
        prop_assert!(t.states().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn linear_decay_matches_closed_form(x in -2.0f64..2.0, y in -2.0f64..2.0) {
        let decay = FnDynamics { q: 2, f: |x: &[f64], out: &mut [f64]| {
            out[0] = -x[0];
            out[1] = -x[1];
        } };
        let t = integrate(&decay, &[x, y], 0.01, 100, Method::Rk4, None).unwrap();
        let e = (-1.0f64).exp();
        for (got, x0) in t.last().iter().zip([x, y]) {
            prop_assert!((got - x0 * e).abs() <= 1e-8 * (x0 * e).abs() + 1e-300);
        }
    }

    #[test]
    fn binning_is_executor_independent(seed in any::<u64>(), n_traj in 1usize..300) {
        let l = Lattice::centered(2, 12).unwrap();
        let (sys, _) = stable_node_field(&l);
        let a = trajectory_field(&sys, n_traj, &l, &mut rng(seed), Exec::Sequential).unwrap();
        let b = trajectory_field(&sys, n_traj, &l, &mut rng(seed), Exec::Parallel).unwrap();
        prop_assert_eq!(a, b);
    }
}
