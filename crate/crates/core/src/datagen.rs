//! Samplers for random polynomial systems, the physics-class generators and
//! the named benchmark families.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::phasefield::{
    ClassicalSystem, CoefficientMatrix, Family, Lattice, MonomialDictionary, Polynomial,
    PolynomialSystem, VectorField,
};

/// Probability that a sampled coefficient is exactly zero.
pub const ZERO_PROBABILITY: f64 = 0.75;
/// Half-width of the uniform law for nonzero coefficients.
pub const COEFFICIENT_BOUND: f64 = 3.0;
/// Threshold below which a curl/divergence coefficient counts as zero.
pub const STRUCTURE_TOL: f64 = 1e-9;
/// Consecutive rejections tolerated by the rejection samplers.
pub const MAX_REJECTIONS: usize = 1000;

/// Which classes a dataset's labels refer to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LabelSet {
    /// No class labels; every label is -1.
    Unlabeled,
    Conservativity,
    Incompressibility,
    LinearStability,
    /// Planar benchmark labels 0..=15.
    Classical,
    /// Spatial benchmark families tagged 16 (saddle-node) and 17 (Lorenz).
    Classical3d,
}

impl LabelSet {
    pub fn id(self) -> u16 {
        match self {
            LabelSet::Unlabeled => 0,
            LabelSet::Conservativity => 1,
            LabelSet::Incompressibility => 2,
            LabelSet::LinearStability => 3,
            LabelSet::Classical => 4,
            LabelSet::Classical3d => 5,
        }
    }

    pub fn from_id(id: u16) -> Option<Self> {
        Some(match id {
            0 => LabelSet::Unlabeled,
            1 => LabelSet::Conservativity,
            2 => LabelSet::Incompressibility,
            3 => LabelSet::LinearStability,
            4 => LabelSet::Classical,
            5 => LabelSet::Classical3d,
            _ => return None,
        })
    }

    pub fn admits(self, label: i32) -> bool {
        match self {
            LabelSet::Unlabeled => label == -1,
            LabelSet::Conservativity | LabelSet::Incompressibility => (0..2).contains(&label),
            LabelSet::LinearStability => (0..5).contains(&label),
            LabelSet::Classical => (0..16).contains(&label),
            LabelSet::Classical3d => (16..18).contains(&label),
        }
    }
}

/// Classification problems over embeddings.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ClassTask {
    Conservativity,
    Incompressibility,
    LinearStability,
    ClassicalId,
}

impl ClassTask {
    pub fn class_count(self) -> usize {
        match self {
            ClassTask::Conservativity | ClassTask::Incompressibility => 2,
            ClassTask::LinearStability => 5,
            ClassTask::ClassicalId => 16,
        }
    }

    pub fn label_set(self) -> LabelSet {
        match self {
            ClassTask::Conservativity => LabelSet::Conservativity,
            ClassTask::Incompressibility => LabelSet::Incompressibility,
            ClassTask::LinearStability => LabelSet::LinearStability,
            ClassTask::ClassicalId => LabelSet::Classical,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ClassTask::Conservativity => "conservativity",
            ClassTask::Incompressibility => "incompressibility",
            ClassTask::LinearStability => "linear-stability",
            ClassTask::ClassicalId => "classical-id",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        [
            ClassTask::Conservativity,
            ClassTask::Incompressibility,
            ClassTask::LinearStability,
            ClassTask::ClassicalId,
        ]
        .into_iter()
        .find(|t| t.name() == name)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Split {
    Train,
    Validation,
    Test,
    #[default]
    Unspecified,
}

/// Where a sample came from.
#[derive(Clone, Debug, PartialEq)]
pub enum Provenance {
    Polynomial,
    Classical(ClassicalSystem),
    Stored,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub field: VectorField,
    pub coefficients: Option<CoefficientMatrix>,
    pub label: i32,
    pub provenance: Provenance,
}

/// Fields sharing one lattice, with optional ground-truth coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledDataset {
    pub lattice: Lattice,
    pub degree: u32,
    pub label_set: LabelSet,
    pub split: Split,
    pub seed: u64,
    pub samples: Vec<Sample>,
}

impl LabeledDataset {
    pub fn new(
        lattice: Lattice,
        degree: u32,
        label_set: LabelSet,
        seed: u64,
        samples: Vec<Sample>,
    ) -> Result<Self> {
        let ds = LabeledDataset { lattice, degree, label_set, split: Split::Unspecified, seed, samples };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        let p = MonomialDictionary::with_dimension(self.lattice.q(), self.degree).len();
        for (i, s) in self.samples.iter().enumerate() {
            if s.field.lattice() != &self.lattice {
                return Err(Error::Dimension(format!("sample {i} is on a different lattice")));
            }
            if !self.label_set.admits(s.label) {
                return Err(Error::Config(format!(
                    "sample {i}: label {} outside {:?}",
                    s.label, self.label_set
                )));
            }
            if let Some(xi) = &s.coefficients {
                if xi.rows() != p || xi.cols() != self.lattice.q() {
                    return Err(Error::Dimension(format!("sample {i}: coefficient shape")));
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn q(&self) -> usize {
        self.lattice.q()
    }

    pub fn dictionary(&self) -> MonomialDictionary {
        MonomialDictionary::with_dimension(self.lattice.q(), self.degree)
    }

    pub fn fields(&self) -> Vec<&VectorField> {
        self.samples.iter().map(|s| &s.field).collect()
    }

    pub fn labels(&self) -> Vec<i32> {
        self.samples.iter().map(|s| s.label).collect()
    }

    /// Count per label, ascending by label.
    pub fn histogram(&self) -> Vec<(i32, usize)> {
        let mut counts = std::collections::BTreeMap::new();
        for s in &self.samples {
            *counts.entry(s.label).or_insert(0) += 1;
        }
        counts.into_iter().collect()
    }

    fn with_samples(&self, samples: Vec<Sample>, split: Split) -> LabeledDataset {
        LabeledDataset {
            lattice: self.lattice.clone(),
            degree: self.degree,
            label_set: self.label_set,
            split,
            seed: self.seed,
            samples,
        }
    }

    /// Leading `1 - fraction` of samples for training, the rest for validation.
    pub fn split_off_validation(&self, fraction: f64) -> Result<(LabeledDataset, LabeledDataset)> {
        if !(0.0..1.0).contains(&fraction) {
            return Err(Error::Config(format!("validation fraction {fraction} not in [0, 1)")));
        }
        let n_val = (self.len() as f64 * fraction).round() as usize;
        let cut = self.len() - n_val;
        Ok((
            self.with_samples(self.samples[..cut].to_vec(), Split::Train),
            self.with_samples(self.samples[cut..].to_vec(), Split::Validation),
        ))
    }

    pub fn subset(&self, indices: &[usize]) -> LabeledDataset {
        self.with_samples(indices.iter().map(|&i| self.samples[i].clone()).collect(), self.split)
    }
}

/// Zero with probability 0.75, otherwise uniform on [-3, 3].
pub fn sample_coefficient<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    if rng.random::<f64>() < ZERO_PROBABILITY {
        0.0
    } else {
        rng.random_range(-COEFFICIENT_BOUND..=COEFFICIENT_BOUND)
    }
}

/// Independent per-sample generator derived from `base` and an index.
pub fn sample_rng(base: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(base);
    rng.set_stream(index as u64);
    rng
}

pub fn sample_random_polynomial<R: Rng + ?Sized>(
    rng: &mut R,
    q: usize,
    degree: u32,
) -> Result<PolynomialSystem> {
    let dict = MonomialDictionary::build(q, degree)?;
    Ok(random_polynomial(rng, &dict))
}

fn random_polynomial<R: Rng + ?Sized>(rng: &mut R, dict: &MonomialDictionary) -> PolynomialSystem {
    let values = (0..dict.len() * dict.q()).map(|_| sample_coefficient(rng)).collect();
    let xi = CoefficientMatrix::new(dict.len(), dict.q(), values).expect("finite draws");
    PolynomialSystem::new(dict.clone(), xi).expect("shapes agree")
}

fn require_planar(dict: &MonomialDictionary) -> Result<()> {
    if dict.q() != 2 {
        return Err(Error::UnsupportedDimension(dict.q()));
    }
    Ok(())
}

/// Gradient of a random scalar polynomial over `dict`.
pub fn sample_conservative<R: Rng + ?Sized>(
    rng: &mut R,
    dict: &MonomialDictionary,
) -> Result<PolynomialSystem> {
    require_planar(dict)?;
    let coefficients = (0..dict.len()).map(|_| sample_coefficient(rng)).collect();
    Ok(Polynomial::new(dict.clone(), coefficients)?.gradient())
}

/// Random systems redrawn until `accept` holds.
fn rejection_sample<R, F>(rng: &mut R, dict: &MonomialDictionary, accept: F) -> Result<PolynomialSystem>
where
    R: Rng + ?Sized,
    F: Fn(&PolynomialSystem) -> bool,
{
    for _ in 0..MAX_REJECTIONS {
        let sys = random_polynomial(rng, dict);
        if accept(&sys) {
            return Ok(sys);
        }
    }
    Err(Error::Sampling(format!("{MAX_REJECTIONS} consecutive rejections")))
}

pub fn has_curl(sys: &PolynomialSystem) -> bool {
    sys.curl_2d().map(|c| c.max_abs() > STRUCTURE_TOL).unwrap_or(false)
}

pub fn has_divergence(sys: &PolynomialSystem) -> bool {
    sys.divergence().max_abs() > STRUCTURE_TOL
}

/// Random system with a nonzero curl polynomial.
pub fn sample_nonconservative<R: Rng + ?Sized>(
    rng: &mut R,
    dict: &MonomialDictionary,
) -> Result<PolynomialSystem> {
    require_planar(dict)?;
    rejection_sample(rng, dict, has_curl)
}

/// Random system with a nonzero divergence polynomial.
pub fn sample_compressible<R: Rng + ?Sized>(
    rng: &mut R,
    dict: &MonomialDictionary,
) -> Result<PolynomialSystem> {
    require_planar(dict)?;
    rejection_sample(rng, dict, has_divergence)
}

/// Gradient of `Re f` for `f(z) = sum_k coeffs[k] z^k`, with `coeffs[k]`
/// given as `(re, im)`.
pub fn harmonic_gradient(dict: &MonomialDictionary, coeffs: &[(f64, f64)]) -> Result<PolynomialSystem> {
    require_planar(dict)?;
    if coeffs.len() > dict.degree() as usize + 1 {
        return Err(Error::Dimension(format!(
            "degree {} polynomial exceeds dictionary degree {}",
            coeffs.len() - 1,
            dict.degree()
        )));
    }
    let mut real_part = vec![0.0; dict.len()];
    for (k, &(alpha, beta)) in coeffs.iter().enumerate() {
        // (x + iy)^k = sum_j C(k, j) x^(k-j) (iy)^j
        let mut binom = 1.0;
        for j in 0..=k {
            let i = dict.index_of(&[(k - j) as u32, j as u32]).expect("degree checked");
            // i^j: real for even j, imaginary for odd j
            let sign = if (j / 2) % 2 == 0 { 1.0 } else { -1.0 };
            if j % 2 == 0 {
                real_part[i] += alpha * sign * binom;
            } else {
                real_part[i] -= beta * sign * binom;
            }
            binom = binom * (k - j) as f64 / (j + 1) as f64;
        }
    }
    Ok(Polynomial::new(dict.clone(), real_part)?.gradient())
}

/// Divergence-free field from the real part of a random complex polynomial.
pub fn sample_incompressible<R: Rng + ?Sized>(
    rng: &mut R,
    dict: &MonomialDictionary,
) -> Result<PolynomialSystem> {
    require_planar(dict)?;
    let coeffs: Vec<(f64, f64)> = (0..=dict.degree())
        .map(|_| (sample_coefficient(rng), sample_coefficient(rng)))
        .collect();
    harmonic_gradient(dict, &coeffs)
}

/// Qualitative type of the origin for a planar linear system.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Stability {
    StableNode,
    UnstableNode,
    StableSpiral,
    UnstableSpiral,
    Saddle,
}

impl Stability {
    pub const ALL: [Stability; 5] = [
        Stability::StableNode,
        Stability::UnstableNode,
        Stability::StableSpiral,
        Stability::UnstableSpiral,
        Stability::Saddle,
    ];

    pub fn label(self) -> i32 {
        Stability::ALL.iter().position(|&s| s == self).unwrap() as i32
    }
}

const DEGENERACY_TOL: f64 = 1e-9;

/// Classifies `dx/dt = A x` from trace and determinant; `None` for
/// degenerate matrices.
pub fn classify_linear(a: [[f64; 2]; 2]) -> Option<Stability> {
    let tr = a[0][0] + a[1][1];
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    let disc = tr * tr - 4.0 * det;
    if det.abs() <= DEGENERACY_TOL {
        return None;
    }
    if det < 0.0 {
        return Some(Stability::Saddle);
    }
    if tr.abs() <= DEGENERACY_TOL || disc.abs() <= DEGENERACY_TOL {
        return None;
    }
    Some(match (disc > 0.0, tr < 0.0) {
        (true, true) => Stability::StableNode,
        (true, false) => Stability::UnstableNode,
        (false, true) => Stability::StableSpiral,
        (false, false) => Stability::UnstableSpiral,
    })
}

/// `dx/dt = A x` over `dict`.
pub fn linear_system(dict: &MonomialDictionary, a: [[f64; 2]; 2]) -> Result<PolynomialSystem> {
    require_planar(dict)?;
    let mut xi = CoefficientMatrix::zeros(dict.len(), 2);
    for (j, row) in a.iter().enumerate() {
        xi.set(dict.index_of(&[1, 0]).expect("linear term"), j, row[0]);
        xi.set(dict.index_of(&[0, 1]).expect("linear term"), j, row[1]);
    }
    PolynomialSystem::new(dict.clone(), xi)
}

fn polynomial_sample(sys: PolynomialSystem, lattice: &Lattice, label: i32) -> Result<Sample> {
    let field = sys.eval_on_lattice(lattice)?;
    Ok(Sample {
        field,
        coefficients: Some(sys.into_coefficients()),
        label,
        provenance: Provenance::Polynomial,
    })
}

fn check_degree(lattice: &Lattice, degree: u32) -> Result<MonomialDictionary> {
    MonomialDictionary::build(lattice.q(), degree)
}

/// Exactly `per_class` linear systems of each stability type, entries of
/// `A` uniform on [-3, 3].
pub fn sample_linear_stability_dataset<R: Rng + ?Sized>(
    rng: &mut R,
    per_class: usize,
    lattice: &Lattice,
    degree: u32,
    exec: Exec,
) -> Result<LabeledDataset> {
    if per_class == 0 {
        return Err(Error::Precondition("per_class must be at least 1".into()));
    }
    let dict = check_degree(lattice, degree)?;
    require_planar(&dict)?;
    let seed = rng.next_u64();
    let mut draw = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = [0usize; 5];
    let mut systems = Vec::with_capacity(5 * per_class);
    while systems.len() < 5 * per_class {
        let mut a = [[0.0; 2]; 2];
        for v in a.iter_mut().flatten() {
            *v = draw.random_range(-COEFFICIENT_BOUND..=COEFFICIENT_BOUND);
        }
        let Some(class) = classify_linear(a) else { continue };
        let k = class.label() as usize;
        if counts[k] < per_class {
            counts[k] += 1;
            systems.push((a, class.label()));
        }
    }
    let samples = exec.try_map(systems.len(), |i| {
        let (a, label) = systems[i];
        polynomial_sample(linear_system(&dict, a)?, lattice, label)
    })?;
    LabeledDataset::new(lattice.clone(), degree, LabelSet::LinearStability, seed, samples)
}

/// A family member with its class label.
pub fn sample_classical<R: Rng + ?Sized>(rng: &mut R, family: Family) -> (ClassicalSystem, Option<i32>) {
    let sys = ClassicalSystem::sample(family, rng);
    let label = sys.label();
    (sys, label)
}

fn classical_tag(sys: &ClassicalSystem) -> i32 {
    match sys.family() {
        Family::SaddleNode3d => 16,
        Family::Lorenz => 17,
        _ => sys.label().expect("planar families are labelled"),
    }
}

/// The family behind a stored classical label.
pub fn family_of_label(label: i32) -> Option<Family> {
    Some(match label {
        0 | 1 => Family::SaddleNode,
        2 | 3 => Family::Pitchfork,
        4 | 5 => Family::Transcritical,
        6 | 7 => Family::SimpleOscillator,
        8 => Family::LotkaVolterra,
        9 | 10 => Family::Homoclinic,
        11 => Family::VanDerPol,
        12 | 13 => Family::Selkov,
        14 | 15 => Family::FitzHughNagumo,
        16 => Family::SaddleNode3d,
        17 => Family::Lorenz,
        _ => return None,
    })
}

/// Field, exact coefficients (when polynomial) and tag for a family member.
pub fn classical_sample(sys: &ClassicalSystem, lattice: &Lattice, degree: u32) -> Result<Sample> {
    let dict = MonomialDictionary::with_dimension(lattice.q(), degree);
    Ok(Sample {
        field: sys.field(lattice)?,
        coefficients: sys.exact_coefficients(&dict),
        label: classical_tag(sys),
        provenance: Provenance::Classical(sys.clone()),
    })
}

/// `counts[k]` members of `families[k]`; all families must match the
/// lattice dimension.
pub fn classical_dataset<R: Rng + ?Sized>(
    rng: &mut R,
    families: &[(Family, usize)],
    lattice: &Lattice,
    degree: u32,
    exec: Exec,
) -> Result<LabeledDataset> {
    check_degree(lattice, degree)?;
    if let Some((f, _)) = families.iter().find(|(f, _)| f.q() != lattice.q()) {
        return Err(Error::Dimension(format!("{} does not live in q = {}", f.name(), lattice.q())));
    }
    let seed = rng.next_u64();
    let mut draw = ChaCha8Rng::seed_from_u64(seed);
    let systems: Vec<ClassicalSystem> = families
        .iter()
        .flat_map(|&(f, n)| std::iter::repeat_n(f, n))
        .map(|f| sample_classical(&mut draw, f).0)
        .collect();
    let samples = exec.try_map(systems.len(), |i| classical_sample(&systems[i], lattice, degree))?;
    let label_set = if lattice.q() == 2 { LabelSet::Classical } else { LabelSet::Classical3d };
    LabeledDataset::new(lattice.clone(), degree, label_set, seed, samples)
}

/// Whether `xi`'s nonzero pattern equals that of some benchmark family.
pub fn matches_family_support(xi: &CoefficientMatrix, supports: &[Vec<bool>]) -> bool {
    let s = xi.support();
    supports.iter().any(|f| *f == s)
}

pub fn family_supports(dict: &MonomialDictionary) -> Vec<Vec<bool>> {
    Family::ALL.iter().filter_map(|f| f.support(dict)).collect()
}

/// `count` random polynomial systems, redrawing any with a benchmark
/// family's support pattern or with all coefficients zero.
pub fn build_training_set<R: Rng + ?Sized>(
    rng: &mut R,
    count: usize,
    lattice: &Lattice,
    degree: u32,
    exec: Exec,
) -> Result<LabeledDataset> {
    if count == 0 {
        return Err(Error::Precondition("training set count must be at least 1".into()));
    }
    let dict = check_degree(lattice, degree)?;
    let supports = family_supports(&dict);
    let seed = rng.next_u64();
    let samples = exec.try_map(count, |i| {
        let mut r = sample_rng(seed, i);
        let sys = rejection_sample(&mut r, &dict, |s| {
            !s.coefficients().is_zero() && !matches_family_support(s.coefficients(), &supports)
        })?;
        polynomial_sample(sys, lattice, -1)
    })?;
    LabeledDataset::new(lattice.clone(), degree, LabelSet::Unlabeled, seed, samples)
}

/// Two-class structure dataset: label 1 from `positive`, label 0 from
/// `negative`, `per_class` each, interleaved.
fn structure_dataset<R, P, N>(
    rng: &mut R,
    per_class: usize,
    lattice: &Lattice,
    degree: u32,
    label_set: LabelSet,
    exec: Exec,
    positive: P,
    negative: N,
) -> Result<LabeledDataset>
where
    R: Rng + ?Sized,
    P: Fn(&mut ChaCha8Rng, &MonomialDictionary) -> Result<PolynomialSystem> + Sync + Send,
    N: Fn(&mut ChaCha8Rng, &MonomialDictionary) -> Result<PolynomialSystem> + Sync + Send,
{
    if per_class == 0 {
        return Err(Error::Precondition("per_class must be at least 1".into()));
    }
    let dict = check_degree(lattice, degree)?;
    require_planar(&dict)?;
    let seed = rng.next_u64();
    let samples = exec.try_map(2 * per_class, |i| {
        let mut r = sample_rng(seed, i);
        if i % 2 == 0 {
            polynomial_sample(positive(&mut r, &dict)?, lattice, 1)
        } else {
            polynomial_sample(negative(&mut r, &dict)?, lattice, 0)
        }
    })?;
    LabeledDataset::new(lattice.clone(), degree, label_set, seed, samples)
}

/// Conservative (label 1) versus rotational (label 0) systems.
pub fn conservativity_dataset<R: Rng + ?Sized>(
    rng: &mut R,
    per_class: usize,
    lattice: &Lattice,
    degree: u32,
    exec: Exec,
) -> Result<LabeledDataset> {
    structure_dataset(
        rng,
        per_class,
        lattice,
        degree,
        LabelSet::Conservativity,
        exec,
        |r, d| sample_conservative(r, d),
        |r, d| sample_nonconservative(r, d),
    )
}

/// Divergence-free (label 1) versus compressible (label 0) systems.
pub fn incompressibility_dataset<R: Rng + ?Sized>(
    rng: &mut R,
    per_class: usize,
    lattice: &Lattice,
    degree: u32,
    exec: Exec,
) -> Result<LabeledDataset> {
    structure_dataset(
        rng,
        per_class,
        lattice,
        degree,
        LabelSet::Incompressibility,
        exec,
        |r, d| sample_incompressible(r, d),
        |r, d| sample_compressible(r, d),
    )
}

/// Dataset for a classification task with `per_class` samples per label
/// (classical: per family member draw).
pub fn task_dataset<R: Rng + ?Sized>(
    rng: &mut R,
    task: ClassTask,
    per_class: usize,
    lattice: &Lattice,
    degree: u32,
    exec: Exec,
) -> Result<LabeledDataset> {
    match task {
        ClassTask::Conservativity => conservativity_dataset(rng, per_class, lattice, degree, exec),
        ClassTask::Incompressibility => incompressibility_dataset(rng, per_class, lattice, degree, exec),
        ClassTask::LinearStability => {
            sample_linear_stability_dataset(rng, per_class, lattice, degree, exec)
        }
        ClassTask::ClassicalId => {
            let families: Vec<(Family, usize)> = Family::PLANAR.iter().map(|&f| (f, per_class)).collect();
            classical_dataset(rng, &families, lattice, degree, exec)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dict() -> MonomialDictionary {
        MonomialDictionary::build(2, 3).unwrap()
    }

    fn coef(sys: &PolynomialSystem, e: &[u32], j: usize) -> f64 {
        sys.coefficients().get(sys.dictionary().index_of(e).unwrap(), j)
    }

    #[test]
    fn gradient_examples() {
        let d = dict();
        let mut g = vec![0.0; 10];
        g[d.index_of(&[2, 0]).unwrap()] = 1.0;
        let f = Polynomial::new(d.clone(), g).unwrap().gradient();
        assert_eq!(coef(&f, &[1, 0], 0), 2.0);
        assert_eq!(f.coefficients().l1_norm(), 2.0);

        let mut g = vec![0.0; 10];
        g[d.index_of(&[1, 1]).unwrap()] = 1.0;
        let f = Polynomial::new(d.clone(), g).unwrap().gradient();
        assert_eq!(coef(&f, &[0, 1], 0), 1.0);
        assert_eq!(coef(&f, &[1, 0], 1), 1.0);
        assert_eq!(f.coefficients().l1_norm(), 2.0);
    }

    #[test]
    fn harmonic_examples() {
        let d = dict();
        // z^2 -> Re = x1^2 - x2^2 -> (2 x1, -2 x2)
        let f = harmonic_gradient(&d, &[(0.0, 0.0), (0.0, 0.0), (1.0, 0.0)]).unwrap();
        assert_eq!(coef(&f, &[1, 0], 0), 2.0);
        assert_eq!(coef(&f, &[0, 1], 1), -2.0);
        assert_eq!(f.coefficients().l1_norm(), 4.0);
        assert!(f.divergence().is_zero(1e-15));
        // z -> (1, 0)
        let f = harmonic_gradient(&d, &[(0.0, 0.0), (1.0, 0.0)]).unwrap();
        assert_eq!(coef(&f, &[0, 0], 0), 1.0);
        assert_eq!(f.coefficients().l1_norm(), 1.0);
        // i z^3 -> Re = -(3 x1^2 x2 - x2^3)
        let f = harmonic_gradient(&d, &[(0.0, 0.0), (0.0, 0.0), (0.0, 0.0), (0.0, 1.0)]).unwrap();
        assert_eq!(coef(&f, &[1, 1], 0), -6.0);
        assert_eq!(coef(&f, &[2, 0], 1), -3.0);
        assert_eq!(coef(&f, &[0, 2], 1), 3.0);
    }

    #[test]
    fn curl_screening_examples() {
        let d = dict();
        let rot = linear_system(&d, [[0.0, 1.0], [-1.0, 0.0]]).unwrap();
        assert!(has_curl(&rot));
        let sym = linear_system(&d, [[0.0, 1.0], [1.0, 0.0]]).unwrap();
        assert!(!has_curl(&sym));
    }

    #[test]
    fn linear_classification_examples() {
        assert_eq!(classify_linear([[-1.0, 0.0], [0.0, -2.0]]), Some(Stability::StableNode));
        assert_eq!(classify_linear([[0.0, 1.0], [-1.0, -0.5]]), Some(Stability::StableSpiral));
        assert_eq!(classify_linear([[1.0, 0.0], [0.0, -1.0]]), Some(Stability::Saddle));
        assert_eq!(classify_linear([[1.0, 0.0], [0.0, 0.0]]), None);
        assert_eq!(classify_linear([[0.0, 1.0], [-1.0, 0.0]]), None);
        assert_eq!(classify_linear([[-1.0, 0.0], [0.0, -1.0]]), None);
    }

    #[test]
    fn label_sets_round_trip_ids() {
        for id in 0..6 {
            assert_eq!(LabelSet::from_id(id).unwrap().id(), id);
        }
        assert!(LabelSet::from_id(6).is_none());
        for l in 0..18 {
            let f = family_of_label(l).unwrap();
            if l < 16 {
                assert_eq!(f.q(), 2);
            }
        }
    }
}
