use std::collections::HashMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::phasefield::{Lattice, VectorField};

/// All monomials in `q` variables of total degree at most `degree`, in
/// graded-lexicographic order: degree ascending, then exponent tuples
/// descending with `x1` most significant.
#[derive(Clone, Debug)]
pub struct MonomialDictionary {
    q: usize,
    degree: u32,
    exponents: Vec<Vec<u32>>,
    index: HashMap<Vec<u32>, usize>,
}

impl PartialEq for MonomialDictionary {
    fn eq(&self, other: &Self) -> bool {
        self.q == other.q && self.degree == other.degree
    }
}

impl MonomialDictionary {
    /// Dictionary for planar or spatial systems.
    pub fn build(q: usize, degree: u32) -> Result<Self> {
        if !(2..=3).contains(&q) {
            return Err(Error::Config(format!("dictionaries are built for q = 2 or 3, not {q}")));
        }
        if degree < 1 {
            return Err(Error::Config("dictionary degree must be at least 1".into()));
        }
        Ok(Self::with_dimension(q, degree))
    }

    /// Any `q >= 1` and degree, including 0 (constants only).
    pub fn with_dimension(q: usize, degree: u32) -> Self {
        let mut exponents = Vec::new();
        for d in 0..=degree {
            push_descending(q, d, &mut Vec::with_capacity(q), &mut exponents);
        }
        let index = exponents.iter().cloned().enumerate().map(|(i, e)| (e, i)).collect();
        MonomialDictionary { q, degree, exponents, index }
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    /// Number of monomials, `binomial(q + degree, degree)`.
    pub fn len(&self) -> usize {
        self.exponents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exponents.is_empty()
    }

    pub fn exponents(&self) -> &[Vec<u32>] {
        &self.exponents
    }

    pub fn index_of(&self, exps: &[u32]) -> Option<usize> {
        self.index.get(exps).copied()
    }

    /// Human-readable monomial such as `x1^2*x2`.
    pub fn label(&self, i: usize) -> String {
        let terms: Vec<String> = self.exponents[i]
            .iter()
            .enumerate()
            .filter(|(_, &a)| a > 0)
            .map(|(j, &a)| if a == 1 { format!("x{}", j + 1) } else { format!("x{}^{a}", j + 1) })
            .collect();
        if terms.is_empty() {
            "1".into()
        } else {
            terms.join("*")
        }
    }

    /// Every monomial evaluated at `point` (`0^0 = 1`).
    pub fn eval(&self, point: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        self.eval_into(point, &mut out);
        out
    }

    pub fn eval_into(&self, point: &[f64], out: &mut [f64]) {
        debug_assert_eq!(point.len(), self.q);
        let d = self.degree as usize;
        let mut powers = vec![1.0; self.q * (d + 1)];
        for (a, &x) in point.iter().enumerate() {
            for e in 1..=d {
                powers[a * (d + 1) + e] = powers[a * (d + 1) + e - 1] * x;
            }
        }
        for (o, exps) in out.iter_mut().zip(&self.exponents) {
            *o = exps
                .iter()
                .enumerate()
                .map(|(a, &e)| powers[a * (d + 1) + e as usize])
                .product();
        }
    }

    /// Row-major `[num_points, len]` matrix of the dictionary on `lattice`.
    pub fn basis_matrix(&self, lattice: &Lattice, exec: Exec) -> Result<Arc<[f64]>> {
        if lattice.q() != self.q {
            return Err(Error::Dimension(format!(
                "dictionary q = {} vs lattice q = {}",
                self.q,
                lattice.q()
            )));
        }
        let rows = exec.map(lattice.num_points(), |i| self.eval(&lattice.point(i)));
        Ok(rows.concat().into())
    }
}

fn push_descending(q: usize, remaining: u32, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
    if prefix.len() == q - 1 {
        prefix.push(remaining);
        out.push(prefix.clone());
        prefix.pop();
        return;
    }
    for a in (0..=remaining).rev() {
        prefix.push(a);
        push_descending(q, remaining - a, prefix, out);
        prefix.pop();
    }
}

/// `p x q` coefficients; entry `(i, j)` multiplies monomial `i` in
/// component `j`.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientMatrix {
    p: usize,
    q: usize,
    values: Vec<f64>,
}

impl CoefficientMatrix {
    pub fn zeros(p: usize, q: usize) -> Self {
        CoefficientMatrix { p, q, values: vec![0.0; p * q] }
    }

    pub fn new(p: usize, q: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != p * q {
            return Err(Error::Dimension(format!("{p}x{q} coefficients need {} values", p * q)));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Precondition("non-finite coefficient".into()));
        }
        Ok(CoefficientMatrix { p, q, values })
    }

    pub fn rows(&self) -> usize {
        self.p
    }

    pub fn cols(&self) -> usize {
        self.q
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.q + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.values[i * self.q + j] = v;
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.p).map(|i| self.get(i, j)).collect()
    }

    pub fn l1_norm(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).sum()
    }

    /// Per-entry nonzero mask, row-major.
    pub fn support(&self) -> Vec<bool> {
        self.values.iter().map(|&v| v != 0.0).collect()
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }
}

/// `dX/dt = Phi(X) Xi` for a monomial dictionary `Phi`.
#[derive(Clone, Debug, PartialEq)]
pub struct PolynomialSystem {
    dictionary: MonomialDictionary,
    coefficients: CoefficientMatrix,
}

impl PolynomialSystem {
    pub fn new(dictionary: MonomialDictionary, coefficients: CoefficientMatrix) -> Result<Self> {
        if coefficients.rows() != dictionary.len() || coefficients.cols() != dictionary.q() {
            return Err(Error::Dimension(format!(
                "{}x{} coefficients for a dictionary of {} monomials in q = {}",
                coefficients.rows(),
                coefficients.cols(),
                dictionary.len(),
                dictionary.q()
            )));
        }
        Ok(PolynomialSystem { dictionary, coefficients })
    }

    pub fn dictionary(&self) -> &MonomialDictionary {
        &self.dictionary
    }

    pub fn coefficients(&self) -> &CoefficientMatrix {
        &self.coefficients
    }

    pub fn into_coefficients(self) -> CoefficientMatrix {
        self.coefficients
    }

    pub fn q(&self) -> usize {
        self.dictionary.q()
    }

    pub fn eval_into(&self, point: &[f64], phi: &mut [f64], out: &mut [f64]) {
        self.dictionary.eval_into(point, phi);
        let q = self.q();
        out.iter_mut().for_each(|v| *v = 0.0);
        for (i, &f) in phi.iter().enumerate() {
            if f == 0.0 {
                continue;
            }
            for (j, o) in out.iter_mut().enumerate() {
                *o += f * self.coefficients.values[i * q + j];
            }
        }
    }

    pub fn eval(&self, point: &[f64]) -> Vec<f64> {
        let mut phi = vec![0.0; self.dictionary.len()];
        let mut out = vec![0.0; self.q()];
        self.eval_into(point, &mut phi, &mut out);
        out
    }

    /// Velocities `Phi(X) Xi` at every point of `lattice`.
    pub fn eval_on_lattice(&self, lattice: &Lattice) -> Result<VectorField> {
        self.eval_on_lattice_with(lattice, Exec::Sequential)
    }

    pub fn eval_on_lattice_with(&self, lattice: &Lattice, exec: Exec) -> Result<VectorField> {
        if lattice.q() != self.q() {
            return Err(Error::Dimension(format!(
                "system q = {} vs lattice q = {}",
                self.q(),
                lattice.q()
            )));
        }
        let rows = exec.map(lattice.num_points(), |i| self.eval(&lattice.point(i)));
        VectorField::new(lattice.clone(), rows.concat())
    }

    /// Component `j` as a scalar polynomial.
    pub fn component(&self, j: usize) -> Polynomial {
        Polynomial { dictionary: self.dictionary.clone(), coefficients: self.coefficients.column(j) }
    }

    /// Symbolic divergence, expressed over the degree `c - 1` dictionary.
    pub fn divergence(&self) -> Polynomial {
        let mut acc = Polynomial::zero(self.dictionary.clone());
        for j in 0..self.q() {
            acc.add_assign(&self.component(j).derivative(j));
        }
        acc.reembed(&lower_dictionary(&self.dictionary)).expect("derivatives lower the degree")
    }

    /// Symbolic `dF2/dx1 - dF1/dx2` for planar systems.
    pub fn curl_2d(&self) -> Result<Polynomial> {
        if self.q() != 2 {
            return Err(Error::UnsupportedDimension(self.q()));
        }
        let mut acc = self.component(1).derivative(0);
        acc.sub_assign(&self.component(0).derivative(1));
        Ok(acc.reembed(&lower_dictionary(&self.dictionary)).expect("derivatives lower the degree"))
    }
}

fn lower_dictionary(d: &MonomialDictionary) -> MonomialDictionary {
    MonomialDictionary::with_dimension(d.q(), d.degree().saturating_sub(1))
}

/// Scalar polynomial as a coefficient vector over a dictionary.
#[derive(Clone, Debug, PartialEq)]
pub struct Polynomial {
    dictionary: MonomialDictionary,
    coefficients: Vec<f64>,
}

impl Polynomial {
    pub fn new(dictionary: MonomialDictionary, coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.len() != dictionary.len() {
            return Err(Error::Dimension(format!(
                "{} coefficients for {} monomials",
                coefficients.len(),
                dictionary.len()
            )));
        }
        Ok(Polynomial { dictionary, coefficients })
    }

    pub fn zero(dictionary: MonomialDictionary) -> Self {
        let n = dictionary.len();
        Polynomial { dictionary, coefficients: vec![0.0; n] }
    }

    pub fn dictionary(&self) -> &MonomialDictionary {
        &self.dictionary
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn coefficient(&self, exps: &[u32]) -> f64 {
        self.dictionary.index_of(exps).map_or(0.0, |i| self.coefficients[i])
    }

    pub fn eval(&self, point: &[f64]) -> f64 {
        self.dictionary.eval(point).iter().zip(&self.coefficients).map(|(a, b)| a * b).sum()
    }

    /// True when every coefficient is below `tol` in magnitude.
    pub fn is_zero(&self, tol: f64) -> bool {
        self.coefficients.iter().all(|c| c.abs() < tol)
    }

    pub fn max_abs(&self) -> f64 {
        self.coefficients.iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    /// Partial derivative along `axis`, by exponent shift.
    pub fn derivative(&self, axis: usize) -> Polynomial {
        let mut out = Polynomial::zero(self.dictionary.clone());
        for (exps, &c) in self.dictionary.exponents().iter().zip(&self.coefficients) {
            if c == 0.0 || exps[axis] == 0 {
                continue;
            }
            let mut e = exps.clone();
            e[axis] -= 1;
            let i = self.dictionary.index_of(&e).expect("lower-degree monomial present");
            out.coefficients[i] += c * exps[axis] as f64;
        }
        out
    }

    /// Gradient as a polynomial vector field over the same dictionary.
    pub fn gradient(&self) -> PolynomialSystem {
        let q = self.dictionary.q();
        let p = self.dictionary.len();
        let mut xi = CoefficientMatrix::zeros(p, q);
        for j in 0..q {
            for (i, &c) in self.derivative(j).coefficients.iter().enumerate() {
                xi.set(i, j, c);
            }
        }
        PolynomialSystem::new(self.dictionary.clone(), xi).expect("shapes agree")
    }

    pub fn add_assign(&mut self, other: &Polynomial) {
        self.combine(other, 1.0);
    }

    pub fn sub_assign(&mut self, other: &Polynomial) {
        self.combine(other, -1.0);
    }

    fn combine(&mut self, other: &Polynomial, sign: f64) {
        for (exps, &c) in other.dictionary.exponents().iter().zip(&other.coefficients) {
            let i = self.dictionary.index_of(exps).expect("compatible dictionaries");
            self.coefficients[i] += sign * c;
        }
    }

    /// Re-expresses the polynomial over `target`; fails if a nonzero term
    /// has no counterpart there.
    pub fn reembed(&self, target: &MonomialDictionary) -> Result<Polynomial> {
        let mut out = Polynomial::zero(target.clone());
        for (exps, &c) in self.dictionary.exponents().iter().zip(&self.coefficients) {
            match target.index_of(exps) {
                Some(i) => out.coefficients[i] = c,
                None if c == 0.0 => {}
                None => {
                    return Err(Error::Dimension(format!(
                        "monomial {exps:?} is not in the target dictionary"
                    )))
                }
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn binomial(n: u64, k: u64) -> u64 {
        (1..=k).fold(1, |acc, i| acc * (n + 1 - i) / i)
    }

    #[test]
    fn planar_cubic_dictionary_order() {
        let d = MonomialDictionary::build(2, 3).unwrap();
        let labels: Vec<String> = (0..d.len()).map(|i| d.label(i)).collect();
        assert_eq!(
            labels,
            ["1", "x1", "x2", "x1^2", "x1*x2", "x2^2", "x1^3", "x1^2*x2", "x1*x2^2", "x2^3"]
        );
        assert_eq!(MonomialDictionary::build(3, 3).unwrap().len(), 20);
        assert_eq!(MonomialDictionary::build(2, 1).unwrap().len(), 3);
        assert!(matches!(MonomialDictionary::build(4, 3), Err(Error::Config(_))));
        assert!(MonomialDictionary::build(1, 3).is_err());
    }

    #[test]
    fn counts_are_binomial() {
        for q in 1..=3usize {
            for c in 0..=5u32 {
                let d = MonomialDictionary::with_dimension(q, c);
                assert_eq!(d.len() as u64, binomial(q as u64 + c as u64, c as u64));
                if q >= 2 && c >= 1 {
                    assert_eq!(MonomialDictionary::build(q, c).unwrap().len(), d.len());
                }
            }
        }
    }

    #[test]
    fn dictionary_evaluation_examples() {
        let d = MonomialDictionary::build(2, 3).unwrap();
        let mut origin = vec![0.0; 10];
        origin[0] = 1.0;
        assert_eq!(d.eval(&[0.0, 0.0]), origin);
        assert_eq!(
            d.eval(&[2.0, -1.0]),
            vec![1.0, 2.0, -1.0, 4.0, -2.0, 1.0, 8.0, -4.0, 2.0, -1.0]
        );
        let d3 = MonomialDictionary::build(3, 3).unwrap();
        assert_eq!(d3.eval(&[1.0, 1.0, 1.0]), vec![1.0; 20]);
    }

    fn planar(entries: &[(&[u32], usize, f64)]) -> PolynomialSystem {
        let d = MonomialDictionary::build(2, 3).unwrap();
        let mut xi = CoefficientMatrix::zeros(d.len(), 2);
        for &(e, j, v) in entries {
            xi.set(d.index_of(e).unwrap(), j, v);
        }
        PolynomialSystem::new(d, xi).unwrap()
    }

    #[test]
    fn lattice_evaluation_examples() {
        let l = Lattice::centered(2, 3).unwrap();
        let zero = planar(&[]).eval_on_lattice(&l).unwrap();
        assert!(zero.velocities().iter().all(|&v| v == 0.0));

        let rot = planar(&[(&[0, 1], 0, 1.0), (&[1, 0], 1, -1.0)]);
        let f = rot.eval_on_lattice(&l).unwrap();
        let at = l.flat_index(&[2, 1]); // (1, 0)
        assert_eq!(f.velocity(at), &[0.0, -1.0]);

        // saddle-node, a = 1: x1' = 1 - x1^2, x2' = -1
        let sn = planar(&[(&[0, 0], 0, 1.0), (&[2, 0], 0, -1.0), (&[0, 0], 1, -1.0)]);
        let f = sn.eval_on_lattice(&l).unwrap();
        assert_eq!(f.velocity(l.flat_index(&[2, 1])), &[0.0, -1.0]);
        assert_eq!(f.velocity(l.flat_index(&[1, 1])), &[1.0, -1.0]);
    }

    #[test]
    fn divergence_examples() {
        let identity = planar(&[(&[1, 0], 0, 1.0), (&[0, 1], 1, 1.0)]);
        let div = identity.divergence();
        assert_eq!(div.dictionary().degree(), 2);
        assert_eq!(div.coefficient(&[0, 0]), 2.0);
        assert!(div.coefficients().iter().skip(1).all(|&c| c == 0.0));

        let rot = planar(&[(&[0, 1], 0, 1.0), (&[1, 0], 1, -1.0)]);
        assert!(rot.divergence().is_zero(1e-15));

        // (x1^2, x1 x2) -> 2 x1 + x1 = 3 x1
        let f = planar(&[(&[2, 0], 0, 1.0), (&[1, 1], 1, 1.0)]);
        let div = f.divergence();
        assert_eq!(div.coefficient(&[1, 0]), 3.0);
        assert_eq!(div.max_abs(), 3.0);
    }

    #[test]
    fn curl_examples() {
        let d = MonomialDictionary::build(2, 3).unwrap();
        let mut g = Polynomial::zero(d.clone());
        g.coefficients[d.index_of(&[2, 1]).unwrap()] = 1.0;
        assert!(g.gradient().curl_2d().unwrap().is_zero(1e-15));

        let rot = planar(&[(&[0, 1], 0, 1.0), (&[1, 0], 1, -1.0)]);
        let c = rot.curl_2d().unwrap();
        assert_eq!(c.coefficient(&[0, 0]), -2.0);
        assert_eq!(c.max_abs(), 2.0);

        let f = planar(&[(&[2, 0], 1, 1.0)]);
        let c = f.curl_2d().unwrap();
        assert_eq!(c.coefficient(&[1, 0]), 2.0);
        assert_eq!(c.max_abs(), 2.0);

        let d3 = MonomialDictionary::build(3, 2).unwrap();
        let s3 = PolynomialSystem::new(d3.clone(), CoefficientMatrix::zeros(d3.len(), 3)).unwrap();
        assert!(matches!(s3.curl_2d(), Err(Error::UnsupportedDimension(3))));
    }

    #[test]
    fn basis_matrix_matches_pointwise_evaluation() {
        let l = Lattice::centered(2, 7).unwrap();
        let d = MonomialDictionary::build(2, 3).unwrap();
        let b = d.basis_matrix(&l, Exec::Parallel).unwrap();
        for i in [0, 5, 17, 48] {
            assert_eq!(&b[i * 10..(i + 1) * 10], d.eval(&l.point(i)).as_slice());
        }
    }
}
