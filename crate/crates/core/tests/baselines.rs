use flowembed::baselines::{lasso_fit, pca_fit, pca_fit_rows, soft_threshold, LassoConfig, LassoDesign};
use flowembed::datagen::{sample_random_polynomial, sample_rng};
use flowembed::phasefield::{Lattice, MonomialDictionary, VectorField};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::Rng;

/// Least squares through the normal equations, solved by Cholesky.
fn normal_equations(design: &LassoDesign, field: &VectorField) -> Vec<Vec<f64>> {
    let p = design.dictionary().len();
    let q = field.lattice().q();
    let n = field.lattice().num_points();
    let phi = DMatrix::from_row_slice(n, p, design.basis());
    let ata = phi.transpose() * &phi;
    let chol = ata.cholesky().expect("full rank dictionary");
    (0..q)
        .map(|j| {
            let y = DVector::from_iterator(n, field.velocities().chunks_exact(q).map(|v| v[j]));
            chol.solve(&(phi.transpose() * y)).iter().copied().collect()
        })
        .collect()
}

#[test]
fn zero_beta_matches_least_squares() {
    let lattice = Lattice::centered(2, 64).unwrap();
    let dict = MonomialDictionary::build(2, 3).unwrap();
    let design = LassoDesign::new(dict, lattice.clone()).unwrap();
    let cfg = LassoConfig { beta: 0.0, max_sweeps: 100_000, tol: 1e-12 };
    for i in 0..5 {
        let sys = sample_random_polynomial(&mut sample_rng(11, i), 2, 3).unwrap();
        let mut field = sys.eval_on_lattice(&lattice).unwrap().into_velocities();
        // Off-dictionary residual so the oracle is a genuine projection.
        let mut rng = sample_rng(12, i);
        field.iter_mut().for_each(|v| *v += rng.random_range(-0.1..0.1));
        let field = VectorField::new(lattice.clone(), field).unwrap();
        let fit = design.fit(&field, &cfg).unwrap();
        assert!(fit.converged);
        let oracle = normal_equations(&design, &field);
        for (j, col) in oracle.iter().enumerate() {
            for (k, want) in col.iter().enumerate() {
                let got = fit.coefficients.get(k, j);
                assert!((got - want).abs() < 1e-6, "coef ({k},{j}): {got} vs {want}");
            }
        }
    }
}

#[test]
fn noiseless_fit_satisfies_optimality_conditions() {
    // At the minimiser, |c_k - (G xi)_k| <= beta with equality (and matching
    // sign) on the support.
    let lattice = Lattice::centered(2, 64).unwrap();
    let dict = MonomialDictionary::build(2, 3).unwrap();
    let design = LassoDesign::new(dict, lattice.clone()).unwrap();
    let (p, n) = (10, lattice.num_points() as f64);
    let cfg = LassoConfig { tol: 1e-12, max_sweeps: 100_000, ..Default::default() };
    for i in 0..10 {
        let sys = sample_random_polynomial(&mut sample_rng(21, i), 2, 3).unwrap();
        let field = sys.eval_on_lattice(&lattice).unwrap();
        let fit = design.fit(&field, &cfg).unwrap();
        assert!(fit.converged);
        for j in 0..2 {
            for k in 0..p {
                let c: f64 = design
                    .basis()
                    .chunks_exact(p)
                    .zip(field.velocities().chunks_exact(2))
                    .map(|(row, v)| row[k] * v[j])
                    .sum::<f64>()
                    / n;
                let g: f64 = (0..p).map(|l| design.gram()[k * p + l] * fit.coefficients.get(l, j)).sum();
                let x = fit.coefficients.get(k, j);
                if x == 0.0 {
                    assert!((c - g).abs() <= cfg.beta + 1e-9);
                } else {
                    assert!((c - g - cfg.beta * x.signum()).abs() < 1e-9, "sample {i} ({k},{j})");
                }
            }
        }
    }
}

#[test]
fn objective_never_increases() {
    let lattice = Lattice::centered(2, 32).unwrap();
    let dict = MonomialDictionary::build(2, 3).unwrap();
    let sys = sample_random_polynomial(&mut sample_rng(3, 0), 2, 3).unwrap();
    let field = sys.eval_on_lattice(&lattice).unwrap();
    let fit = lasso_fit(&field, &dict, &LassoConfig { beta: 0.05, ..Default::default() }).unwrap();
    for history in &fit.objective {
        for w in history.windows(2) {
            assert!(w[1] <= w[0] + 1e-14, "{} -> {}", w[0], w[1]);
        }
    }
}

#[test]
fn univariate_problem_matches_closed_form() {
    // Dictionary over one monomial is emulated by a field equal to c * 1:
    // the constant column alone carries signal, and every other column is
    // orthogonal to it only in the symmetric case, so check the constant
    // coefficient against the soft threshold of the sample mean instead.
    let lattice = Lattice::centered(2, 8).unwrap();
    let dict = MonomialDictionary::build(2, 1).unwrap();
    let field = VectorField::new(lattice.clone(), vec![0.7; 2 * lattice.num_points()]).unwrap();
    let beta = 0.2;
    let fit = lasso_fit(&field, &dict, &LassoConfig { beta, ..Default::default() }).unwrap();
    // On a symmetric lattice x1 and x2 have zero mean, so the constant
    // column decouples from them.
    assert!((fit.coefficients.get(0, 0) - soft_threshold(0.7, beta)).abs() < 1e-14);
    assert_eq!(fit.coefficients.get(1, 0), 0.0);
    assert_eq!(fit.coefficients.get(2, 0), 0.0);
}

#[test]
fn pca_full_basis_reconstructs_training_rows() {
    let lattice = Lattice::centered(2, 8).unwrap();
    let fields: Vec<VectorField> = (0..12)
        .map(|i| sample_random_polynomial(&mut sample_rng(5, i), 2, 3).unwrap().eval_on_lattice(&lattice).unwrap())
        .collect();
    let refs: Vec<&VectorField> = fields.iter().collect();
    let basis = pca_fit(&refs, 11).unwrap();
    for f in &fields {
        let z = basis.transform(f).unwrap();
        assert_eq!(z.len(), 11);
        let back = basis.inverse_transform(&z).unwrap();
        for (a, b) in back.iter().zip(f.velocities()) {
            assert!((a - b).abs() < 1e-8);
        }
    }
    for w in basis.variances.windows(2) {
        assert!(w[1] <= w[0]);
    }
}

fn gram_error(basis: &flowembed::baselines::PcaBasis) -> f64 {
    let d = basis.dim();
    let mut worst: f64 = 0.0;
    for a in 0..d {
        for b in 0..d {
            let dot: f64 = basis.component(a).iter().zip(basis.component(b)).map(|(x, y)| x * y).sum();
            let want = if a == b { 1.0 } else { 0.0 };
            worst = worst.max((dot - want).abs());
        }
    }
    worst
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn pca_components_are_orthonormal(seed in any::<u64>(), m in 4usize..20, width in 2usize..30, d in 1usize..4) {
        prop_assume!(d < m && d <= width);
        let mut rng = sample_rng(seed, 0);
        let rows: Vec<Vec<f64>> = (0..m).map(|_| (0..width).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
        let basis = pca_fit_rows(&refs, d).unwrap();
        prop_assert!(gram_error(&basis) < 1e-10);
        for w in basis.variances.windows(2) {
            prop_assert!(w[1] <= w[0]);
        }
    }

    #[test]
    fn soft_threshold_solves_univariate_lasso(x in -5.0f64..5.0, t in 0.0f64..3.0) {
        // argmin_b 0.5 (b - x)^2 + t |b| by dense search.
        let s = soft_threshold(x, t);
        let f = |b: f64| 0.5 * (b - x).powi(2) + t * b.abs();
        for k in -100..=100 {
            let b = s + k as f64 * 1e-3;
            prop_assert!(f(s) <= f(b) + 1e-12);
        }
    }
}
