//! Reference (non-differentiable) forms of the training objective.

use flowembed_tensor::FieldLossKind;

use crate::error::{Error, Result};
use crate::phasefield::{CoefficientMatrix, MonomialDictionary, PolynomialSystem, VectorField};

fn check(truth: &VectorField, recon: &VectorField) -> Result<()> {
    if !truth.same_lattice(recon) {
        return Err(Error::Dimension("fields live on different lattices".into()));
    }
    Ok(())
}

fn pointwise(truth: &VectorField, recon: &VectorField, denom: impl Fn(f64) -> f64) -> Result<f64> {
    check(truth, recon)?;
    let q = truth.lattice().q();
    let total: f64 = truth
        .velocities()
        .chunks_exact(q)
        .zip(recon.velocities().chunks_exact(q))
        .map(|(t, r)| {
            let err = t.iter().zip(r).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            let speed = t.iter().map(|a| a * a).sum::<f64>().sqrt();
            err / denom(speed)
        })
        .sum();
    Ok(total / truth.lattice().num_points() as f64)
}

/// Mean over grid points of `|x - x_recon| / (|x| + eps)`.
pub fn normalized_recon_loss(truth: &VectorField, recon: &VectorField, eps: f64) -> Result<f64> {
    pointwise(truth, recon, |s| s + eps)
}

/// Mean over grid points of `|x - x_recon|`.
pub fn unnormalized_recon_loss(truth: &VectorField, recon: &VectorField) -> Result<f64> {
    pointwise(truth, recon, |_| 1.0)
}

/// Single ratio `|X - X_recon|_F / (|X|_F + eps)` over the whole field.
pub fn global_recon_loss(truth: &VectorField, recon: &VectorField, eps: f64) -> Result<f64> {
    check(truth, recon)?;
    let sq = |v: &mut dyn Iterator<Item = f64>| v.map(|x| x * x).sum::<f64>().sqrt();
    let err = sq(&mut truth.velocities().iter().zip(recon.velocities()).map(|(a, b)| a - b));
    let norm = sq(&mut truth.velocities().iter().copied());
    Ok(err / (norm + eps))
}

pub fn recon_loss(kind: FieldLossKind, truth: &VectorField, recon: &VectorField, eps: f64) -> Result<f64> {
    match kind {
        FieldLossKind::Pointwise => normalized_recon_loss(truth, recon, eps),
        FieldLossKind::Global => global_recon_loss(truth, recon, eps),
        FieldLossKind::Unnormalized => unnormalized_recon_loss(truth, recon),
    }
}

/// L1 norm of all coefficients.
pub fn sparsity_loss(xi: &CoefficientMatrix) -> f64 {
    xi.l1_norm()
}

/// Reconstruction loss of the field generated by `xi` plus `beta` times its
/// L1 norm.
pub fn total_loss(
    truth: &VectorField,
    xi: &CoefficientMatrix,
    dict: &MonomialDictionary,
    beta: f64,
    eps: f64,
    kind: FieldLossKind,
) -> Result<f64> {
    let recon = PolynomialSystem::new(dict.clone(), xi.clone())?.eval_on_lattice(truth.lattice())?;
    Ok(recon_loss(kind, truth, &recon, eps)? + beta * sparsity_loss(xi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phasefield::Lattice;

    #[test]
    fn loss_examples() {
        let l = Lattice::centered(2, 4).unwrap();
        let truth = VectorField::new(l.clone(), (0..32).map(|i| 1.0 + i as f64).collect()).unwrap();
        assert_eq!(normalized_recon_loss(&truth, &truth, 1e-5).unwrap(), 0.0);
        let zero = VectorField::zeros(&l);
        let loss = normalized_recon_loss(&truth, &zero, 1e-5).unwrap();
        assert!((loss - 1.0).abs() < 1e-5);

        let xi = CoefficientMatrix::new(2, 2, vec![1.0, -2.0, 0.0, 0.5]).unwrap();
        assert_eq!(sparsity_loss(&xi), 3.5);
        let mut half = xi.clone();
        half.values_mut().iter_mut().for_each(|v| *v *= -3.0);
        assert_eq!(sparsity_loss(&half), 10.5);
        assert_eq!(sparsity_loss(&CoefficientMatrix::zeros(10, 2)), 0.0);
    }
}
