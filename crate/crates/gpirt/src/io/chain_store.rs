//! Versioned binary chain artifact.
//!
//! Layout: an 8-byte magic, a little-endian u32 format version, a
//! length-prefixed JSON header (configuration, ids, per-item observation
//! counts, diagnostics), then the states as raw little-endian f64 columns:
//! per state the score vector, the per-item coefficient vectors, the
//! per-item observed latent values, and the per-item dense grid values.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{GpirtError, Result};
use crate::gp::{GridFunction, MeanParams};
use crate::model::{ChainState, GpirtConfig};
use crate::sampler::{Chain, Diagnostics};

const MAGIC: &[u8; 8] = b"GPIRTCHN";
const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    config: GpirtConfig,
    respondent_ids: Vec<String>,
    item_ids: Vec<String>,
    n_states: usize,
    beta_len: usize,
    item_obs_lens: Vec<usize>,
    beta_acceptance: Vec<f64>,
    log_joint: Vec<f64>,
}

pub fn write_chain(chain: &Chain, path: &Path) -> Result<()> {
    let n_items = chain.item_ids.len();
    let beta_len = chain.config.mean_degree + 1;
    let item_obs_lens: Vec<usize> = if chain.states.is_empty() {
        vec![0; n_items]
    } else {
        chain.states[0].f_obs.iter().map(|f| f.len()).collect()
    };
    let header = Header {
        config: chain.config.clone(),
        respondent_ids: chain.respondent_ids.clone(),
        item_ids: chain.item_ids.clone(),
        n_states: chain.states.len(),
        beta_len,
        item_obs_lens: item_obs_lens.clone(),
        beta_acceptance: chain.diagnostics.beta_acceptance.clone(),
        log_joint: chain.diagnostics.log_joint.clone(),
    };
    let header_bytes =
        serde_json::to_vec(&header).map_err(|e| GpirtError::Format(e.to_string()))?;

    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&(header_bytes.len() as u64).to_le_bytes())?;
    w.write_all(&header_bytes)?;

    for state in &chain.states {
        write_f64s(&mut w, &state.thetas)?;
        for betas in &state.betas {
            write_f64s(&mut w, betas.coefficients())?;
        }
        for f in &state.f_obs {
            write_f64s(&mut w, f)?;
        }
        for f in &state.f_star {
            write_f64s(&mut w, f.values())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_chain(path: &Path) -> Result<Chain> {
    let mut r = BufReader::new(File::open(path)?);

    let mut magic = [0u8; 8];
    read_exact(&mut r, &mut magic)?;
    if &magic != MAGIC {
        return Err(GpirtError::Format("not a chain artifact".into()));
    }
    let mut version_bytes = [0u8; 4];
    read_exact(&mut r, &mut version_bytes)?;
    let version = u32::from_le_bytes(version_bytes);
    if version != FORMAT_VERSION {
        return Err(GpirtError::Format(format!(
            "chain format version {version} unsupported (expected {FORMAT_VERSION})"
        )));
    }
    let mut len_bytes = [0u8; 8];
    read_exact(&mut r, &mut len_bytes)?;
    let header_len = u64::from_le_bytes(len_bytes) as usize;
    let mut header_bytes = vec![0u8; header_len];
    read_exact(&mut r, &mut header_bytes)?;
    let header: Header = serde_json::from_slice(&header_bytes)
        .map_err(|e| GpirtError::Format(format!("bad chain header: {e}")))?;

    let m = header.respondent_ids.len();
    let n_items = header.item_ids.len();
    if header.item_obs_lens.len() != n_items || header.beta_acceptance.len() != n_items {
        return Err(GpirtError::Format("chain header shape mismatch".into()));
    }
    if header.beta_len != header.config.mean_degree + 1 {
        return Err(GpirtError::Format(
            "coefficient length disagrees with mean degree".into(),
        ));
    }
    let grid = Arc::new(header.config.grid.clone());
    let grid_len = grid.len();

    let mut states = Vec::with_capacity(header.n_states);
    for _ in 0..header.n_states {
        let thetas = read_f64s(&mut r, m)?;
        let mut betas = Vec::with_capacity(n_items);
        for _ in 0..n_items {
            let coeffs = read_f64s(&mut r, header.beta_len)?;
            betas.push(
                MeanParams::new(coeffs)
                    .map_err(|e| GpirtError::Format(format!("bad coefficients: {e}")))?,
            );
        }
        let mut f_obs = Vec::with_capacity(n_items);
        for &len in &header.item_obs_lens {
            f_obs.push(read_f64s(&mut r, len)?);
        }
        let mut f_star = Vec::with_capacity(n_items);
        for _ in 0..n_items {
            let values = read_f64s(&mut r, grid_len)?;
            f_star.push(
                GridFunction::new(Arc::clone(&grid), values)
                    .map_err(|e| GpirtError::Format(format!("bad grid values: {e}")))?,
            );
        }
        states.push(ChainState {
            thetas,
            betas,
            f_obs,
            f_star,
        });
    }
    // trailing bytes mean the header lied about shapes
    let mut probe = [0u8; 1];
    if r.read(&mut probe)? != 0 {
        return Err(GpirtError::Format("trailing bytes after final state".into()));
    }

    Ok(Chain {
        states,
        config: header.config,
        respondent_ids: header.respondent_ids,
        item_ids: header.item_ids,
        diagnostics: Diagnostics {
            beta_acceptance: header.beta_acceptance,
            log_joint: header.log_joint,
        },
    })
}

fn write_f64s<W: Write>(w: &mut W, values: &[f64]) -> Result<()> {
    for v in values {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn read_f64s<R: Read>(r: &mut R, n: usize) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(n);
    let mut buf = [0u8; 8];
    for _ in 0..n {
        read_exact(r, &mut buf)?;
        out.push(f64::from_le_bytes(buf));
    }
    Ok(out)
}

fn read_exact<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf).map_err(|_| {
        GpirtError::Format("chain artifact truncated or shape mismatch".into())
    })
}
