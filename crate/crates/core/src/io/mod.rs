//! Little-endian binary formats for datasets, checkpoints and embeddings,
//! plus delimited-text tables. Every write goes to a temporary file in the
//! destination directory and is renamed into place.

mod bytes;
mod checkpoint;
mod dataset;
mod table;

use std::io::Write;
use std::path::Path;

use crate::error::Result;

pub use checkpoint::{
    decode_checkpoint, decode_embeddings, encode_checkpoint, encode_embeddings, read_checkpoint, read_embeddings,
    write_checkpoint, write_embeddings, Embeddings, CHECKPOINT_MAGIC, CHECKPOINT_VERSION, EMBEDDING_MAGIC,
    EMBEDDING_VERSION,
};
pub use dataset::{decode_dataset, encode_dataset, read_dataset, write_dataset, DATASET_MAGIC, DATASET_VERSION};
pub use table::{
    format_float, read_sidecar, write_history, write_sidecar, write_table, SidecarRow, Table, SIDECAR_HEADER,
};

/// Replaces `path` with `contents` via write-temp-then-rename.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}
