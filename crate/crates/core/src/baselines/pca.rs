use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::phasefield::VectorField;

/// Mean and leading principal directions of a set of flattened fields.
#[derive(Clone, Debug, PartialEq)]
pub struct PcaBasis {
    pub mean: Vec<f64>,
    /// `d x D`, one unit-norm component per row.
    pub components: Vec<f64>,
    /// Sample variance along each component, nonincreasing.
    pub variances: Vec<f64>,
}

impl PcaBasis {
    pub fn dim(&self) -> usize {
        self.variances.len()
    }

    pub fn input_len(&self) -> usize {
        self.mean.len()
    }

    pub fn component(&self, i: usize) -> &[f64] {
        let w = self.input_len();
        &self.components[i * w..(i + 1) * w]
    }

    pub fn transform_row(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_len() {
            return Err(Error::Dimension(format!("pca input of length {}, expected {}", x.len(), self.input_len())));
        }
        let centered: Vec<f64> = x.iter().zip(&self.mean).map(|(a, m)| a - m).collect();
        Ok((0..self.dim()).map(|i| dot(self.component(i), &centered)).collect())
    }

    pub fn transform(&self, field: &VectorField) -> Result<Vec<f64>> {
        self.transform_row(field.velocities())
    }

    pub fn inverse_transform(&self, z: &[f64]) -> Result<Vec<f64>> {
        if z.len() != self.dim() {
            return Err(Error::Dimension(format!("pca code of length {}, expected {}", z.len(), self.dim())));
        }
        let mut out = self.mean.clone();
        for (i, &zi) in z.iter().enumerate() {
            for (o, &c) in out.iter_mut().zip(self.component(i)) {
                *o += zi * c;
            }
        }
        Ok(out)
    }

    /// Fraction of total variance carried by each retained component.
    pub fn explained_ratio(&self, total_variance: f64) -> Vec<f64> {
        self.variances.iter().map(|v| v / total_variance).collect()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Orthonormalises `rows` in place (two passes of modified Gram-Schmidt).
/// A row that collapses is replaced by the first unit vector independent of
/// the rows before it.
fn orthonormalize(rows: &mut [Vec<f64>]) {
    let width = rows.first().map_or(0, Vec::len);
    let mut next_unit = 0;
    for i in 0..rows.len() {
        let (done, rest) = rows.split_at_mut(i);
        let row = &mut rest[0];
        loop {
            let before = dot(row, row).sqrt();
            for _ in 0..2 {
                for prev in done.iter() {
                    let c = dot(prev, row);
                    row.iter_mut().zip(prev).for_each(|(r, p)| *r -= c * p);
                }
            }
            let norm = dot(row, row).sqrt();
            if norm > 1e-8 * before.max(1e-300) && norm > 0.0 {
                row.iter_mut().for_each(|r| *r /= norm);
                break;
            }
            assert!(next_unit < width, "cannot complete an orthonormal basis");
            row.iter_mut().for_each(|r| *r = 0.0);
            row[next_unit] = 1.0;
            next_unit += 1;
        }
    }
}

/// Principal components of the rows of `data` (all the same length).
pub fn pca_fit_rows(data: &[&[f64]], d: usize) -> Result<PcaBasis> {
    let m = data.len();
    if d == 0 || m < d + 1 {
        return Err(Error::Config(format!("pca with d = {d} needs at least {} samples, got {m}", d + 1)));
    }
    let width = data[0].len();
    if data.iter().any(|r| r.len() != width) {
        return Err(Error::Dimension("pca rows differ in length".into()));
    }
    if d > width {
        return Err(Error::Config(format!("pca d = {d} exceeds input length {width}")));
    }
    let mut mean = vec![0.0; width];
    for r in data {
        mean.iter_mut().zip(r.iter()).for_each(|(a, b)| *a += b);
    }
    mean.iter_mut().for_each(|a| *a /= m as f64);
    let x = DMatrix::from_fn(m, width, |i, j| data[i][j] - mean[j]);
    let dof = (m - 1) as f64;

    let (values, mut rows) = if width <= m {
        let cov = x.transpose() * &x;
        let eig = SymmetricEigen::new(cov);
        let order = descending(eig.eigenvalues.as_slice());
        let rows: Vec<Vec<f64>> = order[..d].iter().map(|&k| eig.eigenvectors.column(k).iter().copied().collect()).collect();
        (order[..d].iter().map(|&k| eig.eigenvalues[k]).collect::<Vec<_>>(), rows)
    } else {
        // Dual form: eigenvectors of the m x m Gram matrix map to components.
        let gram = &x * x.transpose();
        let eig = SymmetricEigen::new(gram);
        let order = descending(eig.eigenvalues.as_slice());
        let top = eig.eigenvalues[order[0]].max(0.0);
        let mut values = Vec::with_capacity(d);
        let mut rows = Vec::with_capacity(d);
        for &k in &order[..d] {
            let lambda = eig.eigenvalues[k];
            values.push(lambda);
            if lambda > 1e-12 * top && lambda > 0.0 {
                let v = x.tr_mul(&eig.eigenvectors.column(k)) / lambda.sqrt();
                rows.push(v.iter().copied().collect());
            } else {
                rows.push(vec![0.0; width]);
            }
        }
        (values, rows)
    };
    orthonormalize(&mut rows);
    let variances = values.iter().map(|v| v.max(0.0) / dof).collect();
    Ok(PcaBasis { mean, components: rows.concat(), variances })
}

pub fn pca_fit(fields: &[&VectorField], d: usize) -> Result<PcaBasis> {
    let rows: Vec<&[f64]> = fields.iter().map(|f| f.velocities()).collect();
    pca_fit_rows(&rows, d)
}

fn descending(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    order
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_one_data_is_captured_by_one_component() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![1.0 + i as f64, 2.0 - 2.0 * i as f64, 0.5]).collect();
        let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
        let basis = pca_fit_rows(&refs, 1).unwrap();
        let total: f64 = {
            let b = pca_fit_rows(&refs, 3).unwrap();
            b.variances.iter().sum()
        };
        assert!(basis.variances[0] / total > 0.9999);
        let z = basis.transform_row(&basis.mean).unwrap();
        assert_eq!(z, vec![0.0]);
    }

    #[test]
    fn too_few_samples_is_a_config_error() {
        let rows = [vec![1.0, 2.0], vec![0.0, 1.0]];
        let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
        assert!(matches!(pca_fit_rows(&refs, 2), Err(Error::Config(_))));
    }
}
