//! Fixed-step integration, trajectory binning and the corruption models used
//! by the robustness sweeps.

use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::datagen::sample_rng;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::phasefield::{ClassicalSystem, CoefficientMatrix, Lattice, PolynomialSystem, VectorField};

/// Default trajectory length and step for trajectory-sampled fields.
pub const TRAJECTORY_STEPS: usize = 100;
pub const TRAJECTORY_DT: f64 = 0.01;
/// Trajectories stop once they leave the lattice box scaled by this factor.
pub const ESCAPE_FACTOR: f64 = 4.0;
/// Trajectories binned per partial sum before the ordered merge.
const BIN_CHUNK: usize = 64;

/// An autonomous vector field `dx/dt = f(x)`.
pub trait Dynamics: Sync {
    fn q(&self) -> usize;
    fn rhs_into(&self, x: &[f64], out: &mut [f64]);
}

impl Dynamics for PolynomialSystem {
    fn q(&self) -> usize {
        PolynomialSystem::q(self)
    }

    fn rhs_into(&self, x: &[f64], out: &mut [f64]) {
        let mut phi = vec![0.0; self.dictionary().len()];
        self.eval_into(x, &mut phi, out);
    }
}

impl Dynamics for ClassicalSystem {
    fn q(&self) -> usize {
        ClassicalSystem::q(self)
    }

    fn rhs_into(&self, x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.rhs(x));
    }
}

/// Adapts a closure to [`Dynamics`].
pub struct FnDynamics<F> {
    pub q: usize,
    pub f: F,
}

impl<F: Fn(&[f64], &mut [f64]) + Sync> Dynamics for FnDynamics<F> {
    fn q(&self) -> usize {
        self.q
    }

    fn rhs_into(&self, x: &[f64], out: &mut [f64]) {
        (self.f)(x, out)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Method {
    Euler,
    #[default]
    Rk4,
}

/// States `x_0, x_1, ...` at spacing `dt`, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    q: usize,
    dt: f64,
    states: Vec<f64>,
}

impl Trajectory {
    pub fn q(&self) -> usize {
        self.q
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn initial(&self) -> &[f64] {
        self.state(0)
    }

    /// Number of recorded states, including the initial condition.
    pub fn len(&self) -> usize {
        self.states.len() / self.q
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn state(&self, t: usize) -> &[f64] {
        &self.states[t * self.q..(t + 1) * self.q]
    }

    pub fn last(&self) -> &[f64] {
        self.state(self.len() - 1)
    }

    /// State at step `t`, holding the last recorded state after truncation.
    pub fn state_or_last(&self, t: usize) -> &[f64] {
        self.state(t.min(self.len() - 1))
    }

    pub fn states(&self) -> &[f64] {
        &self.states
    }
}

fn step<D: Dynamics + ?Sized>(rhs: &D, method: Method, x: &[f64], dt: f64, next: &mut [f64], work: &mut [Vec<f64>; 5]) {
    let q = x.len();
    let [k1, k2, k3, k4, tmp] = work;
    rhs.rhs_into(x, k1);
    match method {
        Method::Euler => {
            for i in 0..q {
                next[i] = x[i] + dt * k1[i];
            }
        }
        Method::Rk4 => {
            for i in 0..q {
                tmp[i] = x[i] + 0.5 * dt * k1[i];
            }
            rhs.rhs_into(tmp, k2);
            for i in 0..q {
                tmp[i] = x[i] + 0.5 * dt * k2[i];
            }
            rhs.rhs_into(tmp, k3);
            for i in 0..q {
                tmp[i] = x[i] + dt * k3[i];
            }
            rhs.rhs_into(tmp, k4);
            for i in 0..q {
                next[i] = x[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
    }
}

/// Fixed-step integration for `steps` steps. Stops early at the first
/// non-finite state or, when `bounds` is given, at the first state outside
/// the lattice box scaled by [`ESCAPE_FACTOR`]; that state is not recorded.
pub fn integrate<D: Dynamics + ?Sized>(
    rhs: &D,
    x0: &[f64],
    dt: f64,
    steps: usize,
    method: Method,
    bounds: Option<&Lattice>,
) -> Result<Trajectory> {
    if !(dt > 0.0) || steps == 0 {
        return Err(Error::Precondition(format!("need dt > 0 and steps >= 1, got {dt}, {steps}")));
    }
    let q = rhs.q();
    if x0.len() != q {
        return Err(Error::Dimension(format!("initial condition of length {} for q = {q}", x0.len())));
    }
    let mut states = Vec::with_capacity((steps + 1) * q);
    states.extend_from_slice(x0);
    let mut work: [Vec<f64>; 5] = std::array::from_fn(|_| vec![0.0; q]);
    let mut next = vec![0.0; q];
    for t in 0..steps {
        let x = &states[t * q..(t + 1) * q];
        step(rhs, method, x, dt, &mut next, &mut work);
        let escaped = match bounds {
            Some(l) => !l.contains_scaled(&next, ESCAPE_FACTOR),
            None => next.iter().any(|v| !v.is_finite()),
        };
        if escaped {
            break;
        }
        states.extend_from_slice(&next);
    }
    Ok(Trajectory { q, dt, states })
}

/// Averages forward-difference velocities into the lattice cell of each
/// segment's start point; cells without estimates are zero.
pub fn bin_trajectories(trajectories: &[Trajectory], lattice: &Lattice, exec: Exec) -> Result<VectorField> {
    let q = lattice.q();
    if let Some(t) = trajectories.iter().find(|t| t.q() != q) {
        return Err(Error::Dimension(format!("trajectory q = {} on a q = {q} lattice", t.q())));
    }
    let np = lattice.num_points();
    let chunks = trajectories.len().div_ceil(BIN_CHUNK);
    let partials = exec.map(chunks, |c| {
        let mut sums = vec![0.0; np * q];
        let mut counts = vec![0u32; np];
        for traj in &trajectories[c * BIN_CHUNK..((c + 1) * BIN_CHUNK).min(trajectories.len())] {
            for t in 0..traj.len().saturating_sub(1) {
                let (a, b) = (traj.state(t), traj.state(t + 1));
                let Some(cell) = lattice.cell_of(a) else { continue };
                counts[cell] += 1;
                for j in 0..q {
                    sums[cell * q + j] += (b[j] - a[j]) / traj.dt();
                }
            }
        }
        (sums, counts)
    });
    let mut sums = vec![0.0; np * q];
    let mut counts = vec![0u32; np];
    for (s, c) in partials {
        sums.iter_mut().zip(&s).for_each(|(a, b)| *a += b);
        counts.iter_mut().zip(&c).for_each(|(a, b)| *a += b);
    }
    for (cell, &n) in counts.iter().enumerate() {
        if n > 0 {
            sums[cell * q..(cell + 1) * q].iter_mut().for_each(|v| *v /= n as f64);
        }
    }
    VectorField::new(lattice.clone(), sums)
}

/// Adds `N(0, (sigma_rel * sigma_true)^2)` to every component, where
/// `sigma_true` is the field's own component standard deviation.
pub fn add_gaussian<R: Rng + ?Sized>(field: &VectorField, sigma_rel: f64, rng: &mut R) -> Result<VectorField> {
    if !(sigma_rel >= 0.0) {
        return Err(Error::Precondition(format!("noise level {sigma_rel} < 0")));
    }
    let sigma = sigma_rel * field.component_std();
    if sigma == 0.0 {
        return Ok(field.clone());
    }
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::Precondition(e.to_string()))?;
    let noisy = field.velocities().iter().map(|v| v + normal.sample(rng)).collect();
    VectorField::new(field.lattice().clone(), noisy)
}

/// Zeroes `floor(proportion * n^q)` grid points chosen without replacement.
pub fn mask_zeros<R: Rng + ?Sized>(field: &VectorField, proportion: f64, rng: &mut R) -> Result<VectorField> {
    if !(0.0..=1.0).contains(&proportion) {
        return Err(Error::Precondition(format!("mask proportion {proportion} outside [0, 1]")));
    }
    let np = field.lattice().num_points();
    let q = field.lattice().q();
    let count = (proportion * np as f64).floor() as usize;
    let mut v = field.velocities().to_vec();
    for i in index::sample(rng, np, count) {
        v[i * q..(i + 1) * q].iter_mut().for_each(|x| *x = 0.0);
    }
    VectorField::new(field.lattice().clone(), v)
}

/// Binned field from `n_traj` trajectories started uniformly in the
/// lattice box.
pub fn trajectory_field<D: Dynamics + ?Sized, R: Rng + ?Sized>(
    system: &D,
    n_traj: usize,
    lattice: &Lattice,
    rng: &mut R,
    exec: Exec,
) -> Result<VectorField> {
    if n_traj == 0 {
        return Err(Error::Precondition("need at least one trajectory".into()));
    }
    let base = rng.random::<u64>();
    let trajectories = exec.try_map(n_traj, |i| {
        let mut r = sample_rng(base, i);
        let x0: Vec<f64> = lattice.bounds().iter().map(|&(lo, hi)| r.random_range(lo..=hi)).collect();
        integrate(system, &x0, TRAJECTORY_DT, TRAJECTORY_STEPS, Method::Rk4, Some(lattice))
    })?;
    bin_trajectories(&trajectories, lattice, exec)
}

/// Adds independent `N(0, sigma^2)` noise to every coefficient.
pub fn perturb_parameters<R: Rng + ?Sized>(
    xi: &CoefficientMatrix,
    sigma: f64,
    rng: &mut R,
) -> Result<CoefficientMatrix> {
    if !(sigma >= 0.0) {
        return Err(Error::Precondition(format!("parameter noise {sigma} < 0")));
    }
    if sigma == 0.0 {
        return Ok(xi.clone());
    }
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::Precondition(e.to_string()))?;
    let values = xi.values().iter().map(|v| v + normal.sample(rng)).collect();
    CoefficientMatrix::new(xi.rows(), xi.cols(), values)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum NoiseKind {
    Gaussian,
    Mask,
    Trajectory,
    Parameter,
}

impl NoiseKind {
    pub const ALL: [NoiseKind; 4] =
        [NoiseKind::Gaussian, NoiseKind::Mask, NoiseKind::Trajectory, NoiseKind::Parameter];

    pub fn name(self) -> &'static str {
        match self {
            NoiseKind::Gaussian => "gaussian",
            NoiseKind::Mask => "mask",
            NoiseKind::Trajectory => "trajectory",
            NoiseKind::Parameter => "parameter",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        NoiseKind::ALL.into_iter().find(|k| k.name() == name)
    }

    /// The 20-point magnitude grid: relative sigma, mask proportion and
    /// parameter sigma on [0, 0.3]; trajectory counts on [10, 2000].
    pub fn grid(self) -> Vec<f64> {
        let (lo, hi) = match self {
            NoiseKind::Trajectory => (10.0, 2000.0),
            _ => (0.0, 0.3),
        };
        (0..20)
            .map(|i| {
                let v = lo + (hi - lo) * i as f64 / 19.0;
                if self == NoiseKind::Trajectory {
                    v.round()
                } else {
                    v
                }
            })
            .collect()
    }

    pub fn valid_magnitude(self, m: f64) -> bool {
        match self {
            NoiseKind::Gaussian | NoiseKind::Parameter => m >= 0.0,
            NoiseKind::Mask => (0.0..=1.0).contains(&m),
            NoiseKind::Trajectory => m >= 1.0 && m.fract() == 0.0,
        }
    }
}

/// One corruption setting.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub magnitude: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(kind: NoiseKind, magnitude: f64, seed: u64) -> Result<Self> {
        if !kind.valid_magnitude(magnitude) {
            return Err(Error::Config(format!("{} noise magnitude {magnitude} out of range", kind.name())));
        }
        Ok(NoiseSpec { kind, magnitude, seed })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn decay() -> FnDynamics<impl Fn(&[f64], &mut [f64]) + Sync> {
        FnDynamics { q: 2, f: |x: &[f64], out: &mut [f64]| out.iter_mut().zip(x).for_each(|(o, v)| *o = -v) }
    }

    #[test]
    fn zero_rhs_is_constant() {
        let zero = FnDynamics { q: 2, f: |_: &[f64], out: &mut [f64]| out.fill(0.0) };
        let t = integrate(&zero, &[0.3, -0.2], 0.01, 50, Method::Rk4, None).unwrap();
        assert_eq!(t.len(), 51);
        for s in 0..t.len() {
            assert_eq!(t.state(s), &[0.3, -0.2]);
        }
    }

    #[test]
    fn rk4_matches_exponential_decay() {
        let t = integrate(&decay(), &[1.0, -2.0], 0.01, 100, Method::Rk4, None).unwrap();
        let e = (-1.0f64).exp();
        for (x, x0) in t.last().iter().zip([1.0, -2.0]) {
            assert!(((x - x0 * e) / (x0 * e)).abs() < 1e-8);
        }
    }

    #[test]
    fn rk4_is_fourth_order() {
        let err = |dt: f64, steps| {
            let t = integrate(&decay(), &[1.0, 1.0], dt, steps, Method::Rk4, None).unwrap();
            (t.last()[0] - (-1.0f64).exp()).abs()
        };
        let ratio = err(0.1, 10) / err(0.05, 20);
        assert!((12.0..=20.0).contains(&ratio), "{ratio}");
    }

    #[test]
    fn escaping_trajectories_truncate() {
        let grow = FnDynamics { q: 2, f: |x: &[f64], out: &mut [f64]| out.copy_from_slice(&[x[0] * 10.0, 0.0]) };
        let l = Lattice::centered(2, 8).unwrap();
        let t = integrate(&grow, &[1.0, 0.0], 0.01, 1000, Method::Rk4, Some(&l)).unwrap();
        assert!(t.len() < 1001);
        assert!(l.contains_scaled(t.last(), ESCAPE_FACTOR));
        assert_eq!(t.state_or_last(5000), t.last());
    }

    #[test]
    fn noise_grids() {
        let g = NoiseKind::Gaussian.grid();
        assert_eq!(g.len(), 20);
        assert_eq!((g[0], g[19]), (0.0, 0.3));
        let t = NoiseKind::Trajectory.grid();
        assert_eq!((t[0], t[19]), (10.0, 2000.0));
        assert!(NoiseSpec::new(NoiseKind::Mask, 1.5, 0).is_err());
    }

    #[test]
    fn mask_count_is_floor() {
        let l = Lattice::centered(2, 64).unwrap();
        let f = VectorField::new(l.clone(), vec![1.0; 2 * 4096]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = mask_zeros(&f, 0.3, &mut rng).unwrap();
        let zeroed = m.velocities().chunks(2).filter(|v| v == &[0.0, 0.0]).count();
        assert_eq!(zeroed, 1228);
    }
}
