use std::sync::Arc;

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::phasefield::{CoefficientMatrix, Lattice, MonomialDictionary, VectorField};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LassoConfig {
    pub beta: f64,
    pub max_sweeps: usize,
    /// Stop once no coordinate moves by more than this in a sweep.
    pub tol: f64,
}

impl Default for LassoConfig {
    fn default() -> Self {
        LassoConfig { beta: 1e-3, max_sweeps: 1000, tol: 1e-8 }
    }
}

impl LassoConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::Config(format!("lasso beta must be >= 0, got {}", self.beta)));
        }
        if !(self.tol > 0.0) {
            return Err(Error::Config(format!("lasso tolerance must be > 0, got {}", self.tol)));
        }
        if self.max_sweeps == 0 {
            return Err(Error::Config("lasso needs at least one sweep".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LassoFit {
    pub coefficients: CoefficientMatrix,
    /// True when every output column met the tolerance.
    pub converged: bool,
    /// Sweeps used per output column.
    pub sweeps: Vec<usize>,
    /// Objective after each sweep, per output column.
    pub objective: Vec<Vec<f64>>,
}

#[inline]
pub fn soft_threshold(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

/// Dictionary evaluated on one lattice together with its scaled Gram matrix
/// `Phi^T Phi / N`, shared by every fit on that lattice.
#[derive(Clone, Debug)]
pub struct LassoDesign {
    dict: MonomialDictionary,
    lattice: Lattice,
    basis: Arc<[f64]>,
    gram: Vec<f64>,
}

impl LassoDesign {
    pub fn new(dict: MonomialDictionary, lattice: Lattice) -> Result<Self> {
        let basis = dict.basis_matrix(&lattice, Exec::Sequential)?;
        let (p, n) = (dict.len(), lattice.num_points());
        let mut gram = vec![0.0; p * p];
        for row in basis.chunks_exact(p) {
            for a in 0..p {
                for b in a..p {
                    gram[a * p + b] += row[a] * row[b];
                }
            }
        }
        for a in 0..p {
            for b in a..p {
                gram[a * p + b] /= n as f64;
                gram[b * p + a] = gram[a * p + b];
            }
        }
        Ok(LassoDesign { dict, lattice, basis, gram })
    }

    pub fn dictionary(&self) -> &MonomialDictionary {
        &self.dict
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn basis(&self) -> &[f64] {
        &self.basis
    }

    /// `Phi^T Phi / N`, row-major `p x p`.
    pub fn gram(&self) -> &[f64] {
        &self.gram
    }

    /// `Phi^T y / N` for velocity component `j`, and `y^T y / N`.
    fn moments(&self, field: &VectorField, j: usize) -> (Vec<f64>, f64) {
        let (p, q) = (self.dict.len(), self.lattice.q());
        let mut c = vec![0.0; p];
        let mut yy = 0.0;
        for (row, v) in self.basis.chunks_exact(p).zip(field.velocities().chunks_exact(q)) {
            let y = v[j];
            yy += y * y;
            for (ck, &phi) in c.iter_mut().zip(row) {
                *ck += phi * y;
            }
        }
        let n = self.lattice.num_points() as f64;
        c.iter_mut().for_each(|x| *x /= n);
        (c, yy / n)
    }

    fn objective(&self, xi: &[f64], c: &[f64], yy: f64, beta: f64) -> f64 {
        let p = xi.len();
        let mut quad = 0.0;
        for a in 0..p {
            let ga: f64 = (0..p).map(|b| self.gram[a * p + b] * xi[b]).sum();
            quad += xi[a] * ga;
        }
        let lin: f64 = xi.iter().zip(c).map(|(x, c)| x * c).sum();
        let l1: f64 = xi.iter().map(|x| x.abs()).sum();
        0.5 * quad - lin + 0.5 * yy + beta * l1
    }

    /// Cyclic coordinate descent on each output column independently.
    pub fn fit(&self, field: &VectorField, cfg: &LassoConfig) -> Result<LassoFit> {
        cfg.validate()?;
        if field.lattice() != &self.lattice {
            return Err(Error::Dimension("field lattice differs from the lasso design lattice".into()));
        }
        let (p, q) = (self.dict.len(), self.lattice.q());
        let mut coefficients = CoefficientMatrix::zeros(p, q);
        let mut converged = true;
        let mut sweeps = Vec::with_capacity(q);
        let mut objective = Vec::with_capacity(q);
        for j in 0..q {
            let (c, yy) = self.moments(field, j);
            let mut xi = vec![0.0; p];
            // g = G xi, kept current as coordinates move.
            let mut g = vec![0.0; p];
            let mut history = Vec::new();
            let mut done = false;
            let mut used = 0;
            while used < cfg.max_sweeps {
                used += 1;
                let mut max_step: f64 = 0.0;
                for k in 0..p {
                    let gkk = self.gram[k * p + k];
                    if gkk <= 0.0 {
                        continue;
                    }
                    let rho = c[k] - (g[k] - gkk * xi[k]);
                    let new = soft_threshold(rho, cfg.beta) / gkk;
                    let step = new - xi[k];
                    if step != 0.0 {
                        for (l, gl) in g.iter_mut().enumerate() {
                            *gl += self.gram[l * p + k] * step;
                        }
                        xi[k] = new;
                    }
                    max_step = max_step.max(step.abs());
                }
                history.push(self.objective(&xi, &c, yy, cfg.beta));
                if max_step < cfg.tol {
                    done = true;
                    break;
                }
            }
            converged &= done;
            for (k, &x) in xi.iter().enumerate() {
                coefficients.set(k, j, x);
            }
            sweeps.push(used);
            objective.push(history);
        }
        Ok(LassoFit { coefficients, converged, sweeps, objective })
    }

    pub fn fit_many(&self, fields: &[&VectorField], cfg: &LassoConfig, exec: Exec) -> Result<Vec<LassoFit>> {
        exec.try_map(fields.len(), |i| self.fit(fields[i], cfg))
    }
}

/// One-off fit; prefer [`LassoDesign`] when fitting many fields on a lattice.
pub fn lasso_fit(field: &VectorField, dict: &MonomialDictionary, cfg: &LassoConfig) -> Result<LassoFit> {
    LassoDesign::new(dict.clone(), field.lattice().clone())?.fit(field, cfg)
}
