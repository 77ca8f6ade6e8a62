//! Binary checkpoint format for trained potential networks.
//!
//! Layout: a 32-byte header of four little-endian u64 words — input
//! dimension, hidden width, hidden depth, training seed — followed by the
//! flat parameter vector as little-endian f64. The file length must match
//! the architecture exactly; there is no magic number or version field.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use ernot::mlp::Mlp;

/// A deserialized checkpoint: the network plus the seed it was trained
/// under (enough to regenerate the feature embedding deterministically).
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub net: Mlp,
    pub seed: u64,
}

const HEADER_BYTES: usize = 32;

/// Serialize a network (and its training seed) to `path`.
pub fn save_checkpoint(path: &Path, net: &Mlp, seed: u64) -> Result<()> {
    let params = net.params();
    let mut bytes = Vec::with_capacity(HEADER_BYTES + 8 * params.len());
    for word in [
        net.input_dim() as u64,
        net.width() as u64,
        net.depth() as u64,
        seed,
    ] {
        bytes.extend_from_slice(&word.to_le_bytes());
    }
    for p in params {
        bytes.extend_from_slice(&p.to_le_bytes());
    }
    fs::write(path, &bytes).with_context(|| format!("writing checkpoint {}", path.display()))?;
    Ok(())
}

/// Load a checkpoint, validating the byte length against the architecture
/// announced in the header and the finiteness of every parameter.
pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes =
        fs::read(path).with_context(|| format!("reading checkpoint {}", path.display()))?;
    if bytes.len() < HEADER_BYTES {
        bail!(
            "checkpoint {} is truncated: {} bytes, need at least {}",
            path.display(),
            bytes.len(),
            HEADER_BYTES
        );
    }
    let mut words = [0u64; 4];
    for (k, w) in words.iter_mut().enumerate() {
        let mut buf = [0u8; 8];
        buf.copy_from_slice(&bytes[8 * k..8 * (k + 1)]);
        *w = u64::from_le_bytes(buf);
    }
    let [input_dim, width, depth, seed] = words;
    let (input_dim, width, depth) = (
        usize::try_from(input_dim).context("checkpoint input dimension overflows usize")?,
        usize::try_from(width).context("checkpoint width overflows usize")?,
        usize::try_from(depth).context("checkpoint depth overflows usize")?,
    );
    if input_dim == 0 || width == 0 || depth == 0 {
        bail!("checkpoint header has a zero architecture dimension");
    }
    let n_params = Mlp::param_count(input_dim, width, depth);
    let expected = HEADER_BYTES + 8 * n_params;
    if bytes.len() != expected {
        bail!(
            "checkpoint {} has {} bytes but the {input_dim}x{width}x{depth} header implies {}",
            path.display(),
            bytes.len(),
            expected
        );
    }
    let mut params = Vec::with_capacity(n_params);
    for chunk in bytes[HEADER_BYTES..].chunks_exact(8) {
        let mut buf = [0u8; 8];
        buf.copy_from_slice(chunk);
        let v = f64::from_le_bytes(buf);
        if !v.is_finite() {
            bail!("checkpoint {} contains a non-finite parameter", path.display());
        }
        params.push(v);
    }
    let net = Mlp::from_params(input_dim, width, depth, params)
        .with_context(|| format!("rebuilding network from {}", path.display()))?;
    Ok(Checkpoint { net, seed })
}
