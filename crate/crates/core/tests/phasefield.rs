use flowembed::phasefield::{
    ClassicalSystem, CoefficientMatrix, Family, Lattice, MonomialDictionary, Polynomial, PolynomialSystem,
};
use proptest::prelude::*;

fn binomial(n: u64, k: u64) -> u64 {
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

fn brute_monomials(q: usize, c: u32) -> Vec<Vec<u32>> {
    let mut all = vec![vec![]];
    for _ in 0..q {
        all = all
            .into_iter()
            .flat_map(|prefix: Vec<u32>| {
                (0..=c).map(move |e| {
                    let mut v = prefix.clone();
                    v.push(e);
                    v
                })
            })
            .collect();
    }
    all.retain(|e| e.iter().sum::<u32>() <= c);
    all
}

fn poly_value(exps: &[u32], x: &[f64]) -> f64 {
    exps.iter().zip(x).map(|(&e, &v)| v.powi(e as i32)).product()
}

#[test]
fn dictionary_counts_from_the_lattice_setup() {
    assert_eq!(MonomialDictionary::build(2, 3).unwrap().len(), 10);
    assert_eq!(MonomialDictionary::build(3, 3).unwrap().len(), 20);
    assert_eq!(MonomialDictionary::build(2, 1).unwrap().len(), 3);
}

#[test]
fn dictionary_evaluation_at_two_minus_one() {
    let d = MonomialDictionary::build(2, 3).unwrap();
    assert_eq!(d.eval(&[2.0, -1.0]), vec![1.0, 2.0, -1.0, 4.0, -2.0, 1.0, 8.0, -4.0, 2.0, -1.0]);
    let d3 = MonomialDictionary::build(3, 3).unwrap();
    assert!(d3.eval(&[1.0, 1.0, 1.0]).iter().all(|&v| v == 1.0));
}

#[test]
fn rotation_field_at_unit_point() {
    let d = MonomialDictionary::build(2, 3).unwrap();
    let mut xi = CoefficientMatrix::zeros(10, 2);
    xi.set(d.index_of(&[0, 1]).unwrap(), 0, 1.0);
    xi.set(d.index_of(&[1, 0]).unwrap(), 1, -1.0);
    let sys = PolynomialSystem::new(d, xi).unwrap();
    let l = Lattice::centered(2, 5).unwrap();
    let f = sys.eval_on_lattice(&l).unwrap();
    let at = l.flat_index(&[4, 2]);
    assert_eq!(l.point(at), vec![1.0, 0.0]);
    assert_eq!(f.velocity(at), &[0.0, -1.0]);
}

#[test]
fn classical_fixed_points() {
    let lv = ClassicalSystem::new(Family::LotkaVolterra, vec![1.0]).unwrap();
    assert_eq!(lv.rhs(&[1.0, 1.0]), vec![0.0, 0.0]);
    let osc = ClassicalSystem::new(Family::SimpleOscillator, vec![1.0]).unwrap();
    let v = osc.rhs(&[1.0, 0.0]);
    assert!(v[0].abs() < 1e-15 && (v[1] + 1.0).abs() < 1e-15);
    let lorenz = ClassicalSystem::new(Family::Lorenz, vec![10.0, 28.0, 8.0 / 3.0]).unwrap();
    assert!(lorenz.rhs(&[0.0, 0.0, -1.0]).iter().all(|v| v.abs() < 1e-12));
    let sn = ClassicalSystem::new(Family::SaddleNode, vec![1.0]).unwrap();
    assert_eq!(sn.rhs(&[1.0, 0.0]), vec![0.0, -1.0]);
    assert_eq!(sn.rhs(&[0.0, 0.0]), vec![1.0, -1.0]);
}

#[test]
fn van_der_pol_coefficients_expand_the_cubic() {
    let d = MonomialDictionary::build(2, 3).unwrap();
    let xi = ClassicalSystem::new(Family::VanDerPol, vec![1.0]).unwrap().exact_coefficients(&d).unwrap();
    let mut want = CoefficientMatrix::zeros(10, 2);
    want.set(d.index_of(&[0, 1]).unwrap(), 0, 1.0);
    want.set(d.index_of(&[1, 0]).unwrap(), 1, -1.0);
    want.set(d.index_of(&[0, 1]).unwrap(), 1, 1.0);
    want.set(d.index_of(&[2, 1]).unwrap(), 1, -1.0);
    assert_eq!(xi, want);
    let osc = ClassicalSystem::new(Family::SimpleOscillator, vec![0.5]).unwrap();
    assert!(osc.exact_coefficients(&d).is_none());
}

#[test]
fn divergence_and_curl_by_hand() {
    let d = MonomialDictionary::build(2, 3).unwrap();
    let sys = |a: &[(&[u32], f64)], b: &[(&[u32], f64)]| {
        let mut xi = CoefficientMatrix::zeros(10, 2);
        for (j, terms) in [a, b].into_iter().enumerate() {
            for (e, c) in terms {
                xi.set(d.index_of(e).unwrap(), j, *c);
            }
        }
        PolynomialSystem::new(d.clone(), xi).unwrap()
    };
    let div = sys(&[(&[2, 0], 1.0)], &[(&[1, 1], 1.0)]).divergence();
    assert_eq!(div.coefficient(&[1, 0]), 3.0);
    assert_eq!(div.max_abs(), 3.0);
    let curl = sys(&[], &[(&[2, 0], 1.0)]).curl_2d().unwrap();
    assert_eq!(curl.coefficient(&[1, 0]), 2.0);
    assert_eq!(curl.max_abs(), 2.0);
    let rot = sys(&[(&[0, 1], 1.0)], &[(&[1, 0], -1.0)]);
    assert_eq!(rot.divergence().max_abs(), 0.0);
    assert_eq!(rot.curl_2d().unwrap().coefficient(&[0, 0]), -2.0);
}

fn coefficients(p: usize, q: usize) -> impl Strategy<Value = CoefficientMatrix> {
    prop::collection::vec(-3.0f64..3.0, p * q).prop_map(move |v| CoefficientMatrix::new(p, q, v).unwrap())
}

proptest! {
    #[test]
    fn dictionary_is_every_monomial_in_graded_order(q in 1usize..5, c in 0u32..6) {
        let d = MonomialDictionary::with_dimension(q, c);
        prop_assert_eq!(d.len() as u64, binomial((q as u64) + c as u64, c as u64));
        let mut brute = brute_monomials(q, c);
        brute.sort_by(|a, b| a.iter().sum::<u32>().cmp(&b.iter().sum::<u32>()).then_with(|| b.cmp(a)));
        prop_assert_eq!(d.exponents(), &brute[..]);
    }

    #[test]
    fn lattice_evaluation_matches_pointwise_sums(xi in coefficients(10, 2), n in 2usize..9) {
        let d = MonomialDictionary::build(2, 3).unwrap();
        let l = Lattice::centered(2, n).unwrap();
        let sys = PolynomialSystem::new(d.clone(), xi.clone()).unwrap();
        let f = sys.eval_on_lattice(&l).unwrap();
        for k in 0..l.num_points() {
            let x = l.point(k);
            for j in 0..2 {
                let want: f64 = d.exponents().iter().enumerate().map(|(i, e)| xi.get(i, j) * poly_value(e, &x)).sum();
                prop_assert!((f.velocity(k)[j] - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn grid_is_even_and_inclusive(q in 1usize..4, n in 2usize..12, lo in -5.0f64..0.0, width in 0.1f64..5.0) {
        let l = Lattice::new(q, n, vec![(lo, lo + width); q]).unwrap();
        prop_assert_eq!(l.num_points(), n.pow(q as u32));
        for axis in 0..q {
            prop_assert_eq!(l.coordinate(axis, 0), lo);
            prop_assert!((l.coordinate(axis, n - 1) - (lo + width)).abs() < 1e-12);
            for i in 1..n {
                let step = l.coordinate(axis, i) - l.coordinate(axis, i - 1);
                prop_assert!((step - width / (n - 1) as f64).abs() < 1e-12);
            }
        }
        for k in 0..l.num_points() {
            prop_assert_eq!(l.flat_index(&l.axis_indices(k)), k);
            prop_assert_eq!(l.cell_of(&l.point(k)), Some(k));
        }
    }

    #[test]
    fn analytic_derivatives_match_finite_differences(xi in coefficients(10, 2), x in -1.0f64..1.0, y in -1.0f64..1.0) {
        let sys = PolynomialSystem::new(MonomialDictionary::build(2, 3).unwrap(), xi).unwrap();
        let h = 1e-5;
        let f = |a: f64, b: f64| sys.eval(&[a, b]);
        let d_dx = |j: usize| (f(x + h, y)[j] - f(x - h, y)[j]) / (2.0 * h);
        let d_dy = |j: usize| (f(x, y + h)[j] - f(x, y - h)[j]) / (2.0 * h);
        prop_assert!((sys.divergence().eval(&[x, y]) - (d_dx(0) + d_dy(1))).abs() < 1e-6);
        prop_assert!((sys.curl_2d().unwrap().eval(&[x, y]) - (d_dx(1) - d_dy(0))).abs() < 1e-6);
    }

    #[test]
    fn gradients_are_curl_free(c in prop::collection::vec(-3.0f64..3.0, 10)) {
        let g = Polynomial::new(MonomialDictionary::build(2, 3).unwrap(), c).unwrap().gradient();
        prop_assert!(g.curl_2d().unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn polynomial_families_reproduce_their_fields(k in 0usize..9, seed in any::<u64>()) {
        use rand::SeedableRng;
        let family = Family::PLANAR[k];
        let sys = ClassicalSystem::sample(family, &mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        for (&p, &(lo, hi)) in sys.params().iter().zip(family.ranges()) {
            prop_assert!((lo..=hi).contains(&p));
        }
        let d = MonomialDictionary::build(2, 3).unwrap();
        if let Some(xi) = sys.exact_coefficients(&d) {
            let l = Lattice::centered(2, 9).unwrap();
            let a = sys.field(&l).unwrap();
            let b = PolynomialSystem::new(d, xi).unwrap().eval_on_lattice(&l).unwrap();
            for (u, v) in a.velocities().iter().zip(b.velocities()) {
                prop_assert!((u - v).abs() < 1e-9 * (1.0 + u.abs()));
            }
        }
    }
}
