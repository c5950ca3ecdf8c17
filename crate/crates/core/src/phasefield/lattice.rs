use crate::error::{Error, Result};

/// Evenly spaced grid over a box in `q`-dimensional phase space.
///
/// Each axis carries `n` points from `lo` to `hi` inclusive. Points are
/// enumerated row-major with `x1` the slowest axis.
#[derive(Clone, Debug, PartialEq)]
pub struct Lattice {
    q: usize,
    n: usize,
    bounds: Vec<(f64, f64)>,
}

impl Lattice {
    pub fn new(q: usize, n: usize, bounds: Vec<(f64, f64)>) -> Result<Self> {
        if q == 0 {
            return Err(Error::UnsupportedDimension(q));
        }
        if n < 2 {
            return Err(Error::Config(format!("lattice resolution {n} < 2")));
        }
        if bounds.len() != q {
            return Err(Error::Dimension(format!("{} bounds for q = {q}", bounds.len())));
        }
        if bounds.iter().any(|&(lo, hi)| !(lo < hi) || !lo.is_finite() || !hi.is_finite()) {
            return Err(Error::Config(format!("invalid lattice bounds {bounds:?}")));
        }
        Ok(Lattice { q, n, bounds })
    }

    /// `[-1, 1]^q` at resolution `n`.
    pub fn centered(q: usize, n: usize) -> Result<Self> {
        Self::new(q, n, vec![(-1.0, 1.0); q])
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn num_points(&self) -> usize {
        self.n.pow(self.q as u32)
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        let (lo, hi) = self.bounds[axis];
        (hi - lo) / (self.n - 1) as f64
    }

    pub fn coordinate(&self, axis: usize, i: usize) -> f64 {
        let (lo, hi) = self.bounds[axis];
        if i == self.n - 1 {
            hi
        } else {
            lo + i as f64 * self.spacing(axis)
        }
    }

    pub fn axis_indices(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.q];
        for a in (0..self.q).rev() {
            idx[a] = flat % self.n;
            flat /= self.n;
        }
        idx
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter().fold(0, |acc, &i| acc * self.n + i)
    }

    pub fn point(&self, flat: usize) -> Vec<f64> {
        self.axis_indices(flat)
            .into_iter()
            .enumerate()
            .map(|(a, i)| self.coordinate(a, i))
            .collect()
    }

    /// Flat index of the grid point whose cell (half-spacing neighbourhood)
    /// contains `x`, or `None` outside the lattice.
    pub fn cell_of(&self, x: &[f64]) -> Option<usize> {
        let mut flat = 0;
        for (a, &v) in x.iter().enumerate().take(self.q) {
            let (lo, _) = self.bounds[a];
            let r = ((v - lo) / self.spacing(a)).round();
            if !(r >= 0.0 && r <= (self.n - 1) as f64) {
                return None;
            }
            flat = flat * self.n + r as usize;
        }
        Some(flat)
    }

    /// Whether `x` lies in the box scaled by `factor` about its centre.
    pub fn contains_scaled(&self, x: &[f64], factor: f64) -> bool {
        x.iter().zip(&self.bounds).all(|(&v, &(lo, hi))| {
            let (c, h) = ((lo + hi) / 2.0, (hi - lo) / 2.0 * factor);
            v.is_finite() && (v - c).abs() <= h
        })
    }
}

/// Velocity of a system at every lattice point, stored `[n^q, q]` row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    lattice: Lattice,
    velocities: Vec<f64>,
}

impl VectorField {
    pub fn new(lattice: Lattice, velocities: Vec<f64>) -> Result<Self> {
        let want = lattice.num_points() * lattice.q();
        if velocities.len() != want {
            return Err(Error::Dimension(format!(
                "field needs {want} values, got {}",
                velocities.len()
            )));
        }
        if velocities.iter().any(|v| !v.is_finite()) {
            return Err(Error::Precondition("vector field contains non-finite values".into()));
        }
        Ok(VectorField { lattice, velocities })
    }

    pub fn zeros(lattice: &Lattice) -> Self {
        let len = lattice.num_points() * lattice.q();
        VectorField { lattice: lattice.clone(), velocities: vec![0.0; len] }
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn velocities(&self) -> &[f64] {
        &self.velocities
    }

    pub fn into_velocities(self) -> Vec<f64> {
        self.velocities
    }

    pub fn velocity(&self, point: usize) -> &[f64] {
        let q = self.lattice.q();
        &self.velocities[point * q..(point + 1) * q]
    }

    /// Channel-major copy `[q, n, .., n]` for convolution input.
    pub fn to_channels(&self) -> Vec<f64> {
        let (q, np) = (self.lattice.q(), self.lattice.num_points());
        let mut out = vec![0.0; q * np];
        for (i, v) in self.velocities.chunks_exact(q).enumerate() {
            for (j, &x) in v.iter().enumerate() {
                out[j * np + i] = x;
            }
        }
        out
    }

    /// Standard deviation over all velocity components.
    pub fn component_std(&self) -> f64 {
        let n = self.velocities.len() as f64;
        let mean = self.velocities.iter().sum::<f64>() / n;
        (self.velocities.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt()
    }

    pub fn same_lattice(&self, other: &VectorField) -> bool {
        self.lattice == other.lattice
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_includes_both_endpoints() {
        let l = Lattice::centered(2, 5).unwrap();
        let xs: Vec<f64> = (0..5).map(|i| l.coordinate(0, i)).collect();
        assert_eq!(xs, vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
        assert_eq!(l.num_points(), 25);
        assert_eq!(l.point(0), vec![-1.0, -1.0]);
        assert_eq!(l.point(1), vec![-1.0, -0.5]);
        assert_eq!(l.point(24), vec![1.0, 1.0]);
    }

    #[test]
    fn invalid_lattices_are_rejected() {
        assert!(Lattice::centered(2, 1).is_err());
        assert!(Lattice::new(2, 4, vec![(1.0, 1.0), (0.0, 1.0)]).is_err());
        assert!(Lattice::new(2, 4, vec![(0.0, 1.0)]).is_err());
    }

    #[test]
    fn cell_lookup_rounds_to_nearest_point() {
        let l = Lattice::centered(2, 5).unwrap();
        assert_eq!(l.cell_of(&[-1.0, -1.0]), Some(0));
        assert_eq!(l.cell_of(&[-0.6, 0.1]), Some(l.flat_index(&[1, 2])));
        assert_eq!(l.cell_of(&[1.2, 0.0]), Some(l.flat_index(&[4, 2])));
        assert_eq!(l.cell_of(&[1.3, 0.0]), None);
        assert_eq!(l.cell_of(&[f64::NAN, 0.0]), None);
    }

    #[test]
    fn channel_layout_transposes() {
        let l = Lattice::centered(2, 2).unwrap();
        let f = VectorField::new(l, vec![1.0, 10.0, 2.0, 20.0, 3.0, 30.0, 4.0, 40.0]).unwrap();
        assert_eq!(f.to_channels(), vec![1.0, 2.0, 3.0, 4.0, 10.0, 20.0, 30.0, 40.0]);
    }

    #[test]
    fn fields_must_be_finite_and_sized() {
        let l = Lattice::centered(2, 2).unwrap();
        assert!(VectorField::new(l.clone(), vec![0.0; 7]).is_err());
        let mut v = vec![0.0; 8];
        v[3] = f64::INFINITY;
        assert!(VectorField::new(l, v).is_err());
    }
}
