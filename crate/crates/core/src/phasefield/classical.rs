use rand::Rng;

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::phasefield::{CoefficientMatrix, Lattice, MonomialDictionary, VectorField};

/// The benchmark families of named dynamical systems.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Family {
    SaddleNode,
    Pitchfork,
    Transcritical,
    SimpleOscillator,
    LotkaVolterra,
    Homoclinic,
    VanDerPol,
    Selkov,
    FitzHughNagumo,
    SaddleNode3d,
    Lorenz,
}

/// Homoclinic bifurcation point separating labels 9 and 10.
pub const HOMOCLINIC_THRESHOLD: f64 = -0.8645;

// Lorenz attractor box mapped onto [-1, 1]^3: centre and half-width per axis.
const LORENZ_CENTER: [f64; 3] = [0.0, 0.0, 25.0];
const LORENZ_HALF: [f64; 3] = [20.0, 30.0, 25.0];

impl Family {
    pub const ALL: [Family; 11] = [
        Family::SaddleNode,
        Family::Pitchfork,
        Family::Transcritical,
        Family::SimpleOscillator,
        Family::LotkaVolterra,
        Family::Homoclinic,
        Family::VanDerPol,
        Family::Selkov,
        Family::FitzHughNagumo,
        Family::SaddleNode3d,
        Family::Lorenz,
    ];

    pub const PLANAR: [Family; 9] = [
        Family::SaddleNode,
        Family::Pitchfork,
        Family::Transcritical,
        Family::SimpleOscillator,
        Family::LotkaVolterra,
        Family::Homoclinic,
        Family::VanDerPol,
        Family::Selkov,
        Family::FitzHughNagumo,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::SaddleNode => "saddle-node",
            Family::Pitchfork => "pitchfork",
            Family::Transcritical => "transcritical",
            Family::SimpleOscillator => "simple-oscillator",
            Family::LotkaVolterra => "lotka-volterra",
            Family::Homoclinic => "homoclinic",
            Family::VanDerPol => "van-der-pol",
            Family::Selkov => "selkov",
            Family::FitzHughNagumo => "fitzhugh-nagumo",
            Family::SaddleNode3d => "saddle-node-3d",
            Family::Lorenz => "lorenz",
        }
    }

    pub fn from_name(name: &str) -> Option<Family> {
        Family::ALL.into_iter().find(|f| f.name() == name)
    }

    pub fn q(self) -> usize {
        match self {
            Family::SaddleNode3d | Family::Lorenz => 3,
            _ => 2,
        }
    }

    /// Sampling interval of each parameter.
    pub fn ranges(self) -> &'static [(f64, f64)] {
        match self {
            Family::SaddleNode
            | Family::Pitchfork
            | Family::Transcritical
            | Family::SimpleOscillator
            | Family::LotkaVolterra
            | Family::SaddleNode3d => &[(-1.0, 1.0)],
            Family::Homoclinic => &[(-1.2, -0.7)],
            Family::VanDerPol => &[(0.1, 4.0)],
            Family::Selkov => &[(0.05, 0.15), (0.2, 1.0)],
            Family::FitzHughNagumo => &[(0.1, 0.5), (10.0, 15.0), (0.6, 0.7), (0.7, 0.8)],
            Family::Lorenz => &[(9.0, 11.0), (14.0, 28.0), (2.0, 4.0)],
        }
    }

    pub fn arity(self) -> usize {
        self.ranges().len()
    }

    /// Class label for parameters `params`; `None` for the unlabelled
    /// spatial families.
    pub fn label(self, params: &[f64]) -> Option<i32> {
        let a = params[0];
        let split = |lo: i32, threshold: f64| if a < threshold { lo } else { lo + 1 };
        match self {
            Family::SaddleNode => Some(split(0, 0.0)),
            Family::Pitchfork => Some(split(2, 0.0)),
            Family::Transcritical => Some(split(4, 0.0)),
            Family::SimpleOscillator => Some(split(6, 0.0)),
            Family::LotkaVolterra => Some(8),
            Family::Homoclinic => Some(split(9, HOMOCLINIC_THRESHOLD)),
            Family::VanDerPol => Some(11),
            Family::Selkov => Some(split(12, 0.3)),
            Family::FitzHughNagumo => Some(split(14, 0.35)),
            Family::SaddleNode3d | Family::Lorenz => None,
        }
    }

    /// Monomial terms `(component, exponents, coefficient)` of the field in
    /// lattice coordinates; `None` when the family is not posed as a
    /// polynomial.
    fn terms(self, p: &[f64]) -> Option<Vec<(usize, Vec<u32>, f64)>> {
        let t = |j: usize, e: &[u32], c: f64| (j, e.to_vec(), c);
        Some(match self {
            Family::SaddleNode => {
                vec![t(0, &[0, 0], p[0]), t(0, &[2, 0], -1.0), t(1, &[0, 0], -1.0)]
            }
            Family::Pitchfork => {
                vec![t(0, &[1, 0], p[0]), t(0, &[3, 0], -1.0), t(1, &[0, 0], -1.0)]
            }
            Family::Transcritical => {
                vec![t(0, &[1, 0], p[0]), t(0, &[2, 0], -1.0), t(1, &[0, 0], -1.0)]
            }
            Family::SimpleOscillator => return None,
            Family::LotkaVolterra => vec![
                t(0, &[1, 0], 1.0),
                t(0, &[1, 1], -1.0),
                t(1, &[1, 1], p[0]),
                t(1, &[0, 1], -p[0]),
            ],
            Family::Homoclinic => vec![
                t(0, &[0, 1], 1.0),
                t(1, &[0, 1], p[0]),
                t(1, &[1, 0], 1.0),
                t(1, &[2, 0], -1.0),
                t(1, &[1, 1], 1.0),
            ],
            Family::VanDerPol => vec![
                t(0, &[0, 1], 1.0),
                t(1, &[0, 1], p[0]),
                t(1, &[2, 1], -p[0]),
                t(1, &[1, 0], -1.0),
            ],
            Family::Selkov => vec![
                t(0, &[1, 0], 1.0),
                t(0, &[0, 1], p[0]),
                t(0, &[2, 1], 1.0),
                t(1, &[0, 0], p[1]),
                t(1, &[0, 1], -p[0]),
                t(1, &[2, 1], -1.0),
            ],
            Family::FitzHughNagumo => {
                let (a, b, c, d) = (p[0], p[1], p[2], p[3]);
                vec![
                    t(0, &[1, 0], 1.0),
                    t(0, &[3, 0], -1.0 / 3.0),
                    t(0, &[0, 1], -1.0),
                    t(0, &[0, 0], a),
                    t(1, &[1, 0], 1.0 / b),
                    t(1, &[0, 0], c / b),
                    t(1, &[0, 1], -d / b),
                ]
            }
            Family::SaddleNode3d => vec![
                t(0, &[0, 0, 0], p[0]),
                t(0, &[2, 0, 0], -1.0),
                t(1, &[0, 0, 0], -1.0),
                t(2, &[0, 0, 0], -1.0),
            ],
            Family::Lorenz => {
                // x = centre + half * u, velocities divided by the half-widths.
                let (a, b, c) = (p[0], p[1], p[2]);
                let [h1, h2, h3] = LORENZ_HALF;
                let z0 = LORENZ_CENTER[2];
                vec![
                    t(0, &[1, 0, 0], -a),
                    t(0, &[0, 1, 0], a * h2 / h1),
                    t(1, &[1, 0, 0], h1 * (b - z0) / h2),
                    t(1, &[1, 0, 1], -h1 * h3 / h2),
                    t(1, &[0, 1, 0], -1.0),
                    t(2, &[1, 1, 0], h1 * h2 / h3),
                    t(2, &[0, 0, 0], -c * z0 / h3),
                    t(2, &[0, 0, 1], -c),
                ]
            }
        })
    }

    /// Nonzero pattern of the family's coefficients for generic
    /// parameters over `dict`, row-major `p x q`. The oscillator uses its
    /// Cartesian expansion.
    pub fn support(self, dict: &MonomialDictionary) -> Option<Vec<bool>> {
        if dict.q() != self.q() {
            return None;
        }
        let generic: Vec<f64> = self.ranges().iter().map(|&(lo, hi)| 0.5 * (lo + hi) + 0.0123).collect();
        let terms = match self {
            Family::SimpleOscillator => oscillator_cartesian_terms(generic[0]),
            _ => self.terms(&generic)?,
        };
        let mut mask = vec![false; dict.len() * dict.q()];
        for (j, e, _) in terms {
            mask[dict.index_of(&e)? * dict.q() + j] = true;
        }
        Some(mask)
    }
}

fn oscillator_cartesian_terms(a: f64) -> Vec<(usize, Vec<u32>, f64)> {
    vec![
        (0, vec![1, 0], a),
        (0, vec![3, 0], -1.0),
        (0, vec![1, 2], -1.0),
        (0, vec![0, 1], 1.0),
        (1, vec![0, 1], a),
        (1, vec![2, 1], -1.0),
        (1, vec![0, 3], -1.0),
        (1, vec![1, 0], -1.0),
    ]
}

/// A member of a [`Family`] with concrete parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassicalSystem {
    family: Family,
    params: Vec<f64>,
}

impl ClassicalSystem {
    pub fn new(family: Family, params: Vec<f64>) -> Result<Self> {
        if params.len() != family.arity() {
            return Err(Error::Config(format!(
                "{} takes {} parameters, got {}",
                family.name(),
                family.arity(),
                params.len()
            )));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Config("non-finite parameter".into()));
        }
        Ok(ClassicalSystem { family, params })
    }

    /// Draws every parameter uniformly from its range.
    pub fn sample<R: Rng + ?Sized>(family: Family, rng: &mut R) -> Self {
        let params = family.ranges().iter().map(|&(lo, hi)| rng.random_range(lo..hi)).collect();
        ClassicalSystem { family, params }
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn q(&self) -> usize {
        self.family.q()
    }

    pub fn label(&self) -> Option<i32> {
        self.family.label(&self.params)
    }

    /// Right-hand side at `x` in lattice coordinates.
    pub fn rhs(&self, x: &[f64]) -> Vec<f64> {
        let p = &self.params;
        match self.family {
            Family::SaddleNode => vec![p[0] - x[0] * x[0], -1.0],
            Family::Pitchfork => vec![p[0] * x[0] - x[0].powi(3), -1.0],
            Family::Transcritical => vec![p[0] * x[0] - x[0] * x[0], -1.0],
            Family::SimpleOscillator => {
                let r = x[0].hypot(x[1]);
                let theta = x[1].atan2(x[0]);
                let (dr, dtheta) = (r * (p[0] - r * r), -1.0);
                vec![
                    dr * theta.cos() - r * dtheta * theta.sin(),
                    dr * theta.sin() + r * dtheta * theta.cos(),
                ]
            }
            Family::LotkaVolterra => vec![x[0] * (1.0 - x[1]), p[0] * x[1] * (x[0] - 1.0)],
            Family::Homoclinic => {
                vec![x[1], p[0] * x[1] + x[0] - x[0] * x[0] + x[0] * x[1]]
            }
            Family::VanDerPol => vec![x[1], p[0] * (1.0 - x[0] * x[0]) * x[1] - x[0]],
            Family::Selkov => {
                let x1sq_x2 = x[0] * x[0] * x[1];
                vec![x[0] + p[0] * x[1] + x1sq_x2, p[1] - p[0] * x[1] - x1sq_x2]
            }
            Family::FitzHughNagumo => vec![
                x[0] - x[0].powi(3) / 3.0 - x[1] + p[0],
                (x[0] + p[2] - p[3] * x[1]) / p[1],
            ],
            Family::SaddleNode3d => vec![p[0] - x[0] * x[0], -1.0, -1.0],
            Family::Lorenz => {
                let y: Vec<f64> = (0..3).map(|i| LORENZ_CENTER[i] + LORENZ_HALF[i] * x[i]).collect();
                let v = [
                    p[0] * (y[1] - y[0]),
                    y[0] * (p[1] - y[2]) - y[1],
                    y[0] * y[1] - p[2] * y[2],
                ];
                (0..3).map(|i| v[i] / LORENZ_HALF[i]).collect()
            }
        }
    }

    /// The family's right-hand side at every lattice point.
    pub fn field(&self, lattice: &Lattice) -> Result<VectorField> {
        self.field_with(lattice, Exec::Sequential)
    }

    pub fn field_with(&self, lattice: &Lattice, exec: Exec) -> Result<VectorField> {
        if lattice.q() != self.q() {
            return Err(Error::Dimension(format!(
                "{} is {}-dimensional, lattice has q = {}",
                self.family.name(),
                self.q(),
                lattice.q()
            )));
        }
        let rows = exec.map(lattice.num_points(), |i| self.rhs(&lattice.point(i)));
        VectorField::new(lattice.clone(), rows.concat())
    }

    /// Ground-truth coefficients over `dict`, or `None` for the oscillator
    /// (posed in polar form) or when `dict` cannot represent the system.
    pub fn exact_coefficients(&self, dict: &MonomialDictionary) -> Option<CoefficientMatrix> {
        if dict.q() != self.q() {
            return None;
        }
        let mut xi = CoefficientMatrix::zeros(dict.len(), dict.q());
        for (j, e, c) in self.family.terms(&self.params)? {
            let i = dict.index_of(&e)?;
            xi.set(i, j, xi.get(i, j) + c);
        }
        Some(xi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phasefield::PolynomialSystem;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn dict2() -> MonomialDictionary {
        MonomialDictionary::build(2, 3).unwrap()
    }

    #[test]
    fn field_examples() {
        let lv = ClassicalSystem::new(Family::LotkaVolterra, vec![1.0]).unwrap();
        assert_eq!(lv.rhs(&[1.0, 1.0]), vec![0.0, 0.0]);
        let osc = ClassicalSystem::new(Family::SimpleOscillator, vec![1.0]).unwrap();
        let v = osc.rhs(&[1.0, 0.0]);
        assert!(v[0].abs() < 1e-15 && (v[1] + 1.0).abs() < 1e-15);
        let lorenz = ClassicalSystem::new(Family::Lorenz, vec![10.0, 28.0, 8.0 / 3.0]).unwrap();
        // physical origin sits at u = (0, 0, -1)
        let v = lorenz.rhs(&[0.0, 0.0, -1.0]);
        assert!(v.iter().all(|x| x.abs() < 1e-12), "{v:?}");
    }

    #[test]
    fn exact_coefficient_examples() {
        let d = dict2();
        let vdp = ClassicalSystem::new(Family::VanDerPol, vec![1.0]).unwrap();
        let xi = vdp.exact_coefficients(&d).unwrap();
        let at = |e: &[u32], j| xi.get(d.index_of(e).unwrap(), j);
        assert_eq!(at(&[0, 1], 0), 1.0);
        assert_eq!(at(&[1, 0], 1), -1.0);
        assert_eq!(at(&[0, 1], 1), 1.0);
        assert_eq!(at(&[2, 1], 1), -1.0);
        assert_eq!(xi.support().iter().filter(|&&s| s).count(), 4);

        let osc = ClassicalSystem::new(Family::SimpleOscillator, vec![0.3]).unwrap();
        assert!(osc.exact_coefficients(&d).is_none());

        let sn = ClassicalSystem::new(Family::SaddleNode, vec![0.5]).unwrap();
        let xi = sn.exact_coefficients(&d).unwrap();
        assert_eq!(xi.get(0, 0), 0.5);
        assert_eq!(xi.get(d.index_of(&[2, 0]).unwrap(), 0), -1.0);
        assert_eq!(xi.get(0, 1), -1.0);
        assert_eq!(xi.l1_norm(), 2.5);
    }

    #[test]
    fn labels_follow_thresholds() {
        assert_eq!(Family::SaddleNode.label(&[-0.5]), Some(0));
        assert_eq!(Family::SaddleNode.label(&[0.5]), Some(1));
        assert_eq!(Family::SaddleNode.label(&[0.0]), Some(1));
        assert_eq!(Family::LotkaVolterra.label(&[-0.9]), Some(8));
        assert_eq!(Family::FitzHughNagumo.label(&[0.2, 12.0, 0.65, 0.75]), Some(14));
        assert_eq!(Family::Homoclinic.label(&[-0.9]), Some(9));
        assert_eq!(Family::Homoclinic.label(&[-0.8]), Some(10));
        assert_eq!(Family::Lorenz.label(&[10.0, 20.0, 3.0]), None);
    }

    #[test]
    fn polynomial_families_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for family in Family::ALL {
            if family == Family::SimpleOscillator {
                continue;
            }
            let q = family.q();
            let d = MonomialDictionary::build(q, 3).unwrap();
            let l = Lattice::centered(q, if q == 2 { 16 } else { 6 }).unwrap();
            for _ in 0..5 {
                let sys = ClassicalSystem::sample(family, &mut rng);
                let truth = sys.field(&l).unwrap();
                let xi = sys.exact_coefficients(&d).unwrap();
                let recon = PolynomialSystem::new(d.clone(), xi).unwrap().eval_on_lattice(&l).unwrap();
                for (a, b) in truth.velocities().iter().zip(recon.velocities()) {
                    assert!((a - b).abs() < 1e-10, "{family:?}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn oscillator_is_tangent_on_unit_circle() {
        let osc = ClassicalSystem::new(Family::SimpleOscillator, vec![1.0]).unwrap();
        for k in 0..100 {
            let t = k as f64 * 0.0628;
            let x = [t.cos(), t.sin()];
            let v = osc.rhs(&x);
            assert!((v[0] * x[0] + v[1] * x[1]).abs() < 1e-10);
        }
    }

    #[test]
    fn sampled_parameters_stay_in_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for family in Family::ALL {
            for _ in 0..50 {
                let s = ClassicalSystem::sample(family, &mut rng);
                assert_eq!(s.params().len(), family.arity());
                for (&p, &(lo, hi)) in s.params().iter().zip(family.ranges()) {
                    assert!(lo <= p && p <= hi);
                }
            }
        }
        assert!(ClassicalSystem::new(Family::FitzHughNagumo, vec![0.2]).is_err());
    }

    #[test]
    fn supports_match_generic_coefficients() {
        let d = dict2();
        let vdp = Family::VanDerPol.support(&d).unwrap();
        let on: Vec<(usize, usize)> =
            vdp.iter().enumerate().filter(|(_, &s)| s).map(|(k, _)| (k / 2, k % 2)).collect();
        let idx = |e: &[u32]| d.index_of(e).unwrap();
        let mut want = vec![(idx(&[0, 1]), 0), (idx(&[1, 0]), 1), (idx(&[0, 1]), 1), (idx(&[2, 1]), 1)];
        want.sort();
        assert_eq!(on, want);
        assert!(Family::Lorenz.support(&d).is_none());
        assert_eq!(Family::SimpleOscillator.support(&d).unwrap().iter().filter(|&&s| s).count(), 8);
    }
}
