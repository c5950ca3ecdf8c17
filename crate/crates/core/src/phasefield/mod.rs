//! Lattices, vector fields, polynomial systems and the named benchmark
//! families.

mod classical;
mod dictionary;
mod lattice;

pub use classical::{ClassicalSystem, Family, HOMOCLINIC_THRESHOLD};
pub use dictionary::{CoefficientMatrix, MonomialDictionary, Polynomial, PolynomialSystem};
pub use lattice::{Lattice, VectorField};
