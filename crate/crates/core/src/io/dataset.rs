use std::path::Path;

use crate::datagen::{LabelSet, LabeledDataset, Provenance, Sample};
use crate::error::{Error, Result};
use crate::io::bytes::{narrow, Reader, Writer};
use crate::io::write_atomic;
use crate::phasefield::{CoefficientMatrix, Lattice, MonomialDictionary, VectorField};

pub const DATASET_MAGIC: &[u8; 4] = b"P2VD";
pub const DATASET_VERSION: u16 = 1;

/// Serializes a dataset. Fields are stored as f32, coefficients as f64; the
/// lattice must be the centered `[-1, 1]^q` box.
pub fn encode_dataset(ds: &LabeledDataset) -> Result<Vec<u8>> {
    let (q, n) = (ds.lattice.q(), ds.lattice.n());
    if ds.lattice != Lattice::centered(q, n)? {
        return Err(Error::Format("only the centered [-1, 1]^q lattice can be stored".into()));
    }
    let p = MonomialDictionary::build(q, ds.degree)?.len();
    let mut w = Writer::default();
    w.bytes(DATASET_MAGIC);
    w.u16(DATASET_VERSION);
    w.u8(narrow(q, "dimension")?);
    w.u16(narrow(n, "resolution")?);
    w.u8(narrow(ds.degree as usize, "degree")?);
    w.u32(narrow(ds.len(), "sample count")?);
    w.u16(ds.label_set.id());
    w.u64(ds.seed);
    for (i, s) in ds.samples.iter().enumerate() {
        w.i32(s.label);
        match &s.coefficients {
            Some(xi) => {
                if (xi.rows(), xi.cols()) != (p, q) {
                    return Err(Error::Dimension(format!("sample {i}: coefficients are not {p}x{q}")));
                }
                w.u8(1);
                w.f64s(xi.values());
            }
            None => w.u8(0),
        }
        for &v in s.field.velocities() {
            w.f32(v as f32);
        }
    }
    Ok(w.buf)
}

pub fn decode_dataset(data: &[u8]) -> Result<LabeledDataset> {
    let mut r = Reader::new(data);
    r.magic(DATASET_MAGIC)?;
    r.version(DATASET_VERSION)?;
    let q = r.u8()? as usize;
    let n = r.u16()? as usize;
    let degree = r.u8()? as u32;
    let count = r.u32()? as usize;
    let set_id = r.u16()?;
    let seed = r.u64()?;
    let label_set = LabelSet::from_id(set_id).ok_or_else(|| Error::Format(format!("unknown label set {set_id}")))?;
    let lattice = Lattice::centered(q, n).map_err(|e| Error::Format(format!("bad lattice header: {e}")))?;
    let p = MonomialDictionary::build(q, degree)
        .map_err(|e| Error::Format(format!("bad dictionary header: {e}")))?
        .len();
    let values = q * lattice.num_points();
    let mut samples = Vec::with_capacity(count.min(data.len()));
    for _ in 0..count {
        let label = r.i32()?;
        let coefficients = match r.u8()? {
            0 => None,
            1 => Some(CoefficientMatrix::new(p, q, r.f64s(p * q)?)?),
            f => return Err(Error::Format(format!("bad coefficient flag {f}"))),
        };
        let raw = r.take(values * 4)?;
        let v = raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64).collect();
        let field = VectorField::new(lattice.clone(), v)?;
        samples.push(Sample { field, coefficients, label, provenance: Provenance::Stored });
    }
    r.finish()?;
    LabeledDataset::new(lattice, degree, label_set, seed, samples)
}

pub fn write_dataset(path: &Path, ds: &LabeledDataset) -> Result<()> {
    write_atomic(path, &encode_dataset(ds)?)
}

pub fn read_dataset(path: &Path) -> Result<LabeledDataset> {
    decode_dataset(&std::fs::read(path)?)
}
