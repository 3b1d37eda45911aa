//! Checkpoint container: a one-line header, a JSON manifest, then the raw
//! parameter block as little-endian IEEE-754 doubles.
//!
//! ```text
//! NPRCKPT <format version> <manifest bytes>\n
//! {manifest JSON}\n
//! <param_count × 8 bytes>
//! ```
//!
//! The manifest records a SHA-256 digest of the parameter block.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::{Model, ModelKind};
use crate::nets::ParamVector;
use crate::problems::{ICSample, IbvpSpec};

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &str = "NPRCKPT";

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub model: Model,
    pub ibvp: IbvpSpec,
    pub params: ParamVector,
    pub seed: u64,
    pub steps: usize,
    /// The initial condition a dense PINN was fine-tuned for.
    pub ic: Option<ICSample>,
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    format_version: u32,
    model_kind: ModelKind,
    model: Model,
    ibvp: IbvpSpec,
    seed: u64,
    steps: usize,
    ic: Option<ICSample>,
    param_count: usize,
    param_sha256: String,
}

fn bad(reason: impl Into<String>) -> Error {
    Error::Format {
        what: "checkpoint",
        reason: reason.into(),
    }
}

fn param_bytes(params: &[f64]) -> Vec<u8> {
    params.iter().flat_map(|v| v.to_le_bytes()).collect()
}

fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

impl Checkpoint {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.ibvp.validate()?;
        if self.params.len() != self.model.param_count() {
            return Err(Error::Length {
                what: "checkpoint parameters",
                expected: self.model.param_count(),
                got: self.params.len(),
            });
        }
        if self.model.kind() == ModelKind::DensePinn && self.ic.is_none() {
            return Err(bad("dense PINN checkpoint without an initial condition"));
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        self.validate()?;
        let block = param_bytes(self.params.as_slice());
        let manifest = Manifest {
            format_version: FORMAT_VERSION,
            model_kind: self.model.kind(),
            model: self.model,
            ibvp: self.ibvp,
            seed: self.seed,
            steps: self.steps,
            ic: self.ic.clone(),
            param_count: self.params.len(),
            param_sha256: hex_digest(&block),
        };
        let json = serde_json::to_vec_pretty(&manifest).map_err(|e| bad(e.to_string()))?;
        let mut out = format!("{MAGIC} {FORMAT_VERSION} {}\n", json.len()).into_bytes();
        out.extend_from_slice(&json);
        out.push(b'\n');
        out.extend_from_slice(&block);
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let nl = bytes.iter().position(|&b| b == b'\n').ok_or_else(|| bad("missing header"))?;
        let header = std::str::from_utf8(&bytes[..nl]).map_err(|_| bad("header is not UTF-8"))?;
        let fields: Vec<&str> = header.split(' ').collect();
        if fields.len() != 3 || fields[0] != MAGIC {
            return Err(bad(format!("bad header {header:?}")));
        }
        let version: u32 = fields[1].parse().map_err(|_| bad("bad format version"))?;
        if version != FORMAT_VERSION {
            return Err(bad(format!("unsupported format version {version}")));
        }
        let len: usize = fields[2].parse().map_err(|_| bad("bad manifest length"))?;
        let start = nl + 1;
        let end = start.checked_add(len).filter(|&e| e < bytes.len()).ok_or_else(|| bad("truncated manifest"))?;
        if bytes[end] != b'\n' {
            return Err(bad("manifest not terminated"));
        }
        let manifest: Manifest = serde_json::from_slice(&bytes[start..end]).map_err(|e| bad(e.to_string()))?;
        let block = &bytes[end + 1..];
        if block.len() != manifest.param_count * 8 {
            return Err(bad(format!(
                "parameter block has {} bytes, expected {}",
                block.len(),
                manifest.param_count * 8
            )));
        }
        if hex_digest(block) != manifest.param_sha256 {
            return Err(bad("parameter checksum mismatch"));
        }
        if manifest.model_kind != manifest.model.kind() {
            return Err(bad("model kind tag does not match the model spec"));
        }
        let params = block
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        let ckpt = Checkpoint {
            model: manifest.model,
            ibvp: manifest.ibvp,
            params: ParamVector(params),
            seed: manifest.seed,
            steps: manifest.steps,
            ic: manifest.ic,
        };
        ckpt.validate()?;
        Ok(ckpt)
    }

    /// Write to a temporary sibling file, then rename over `path`.
    pub fn save(&self, path: &Path) -> Result<()> {
        let bytes = self.to_bytes()?;
        let mut tmp = path.as_os_str().to_owned();
        tmp.push(".tmp");
        let tmp = Path::new(&tmp);
        {
            let mut f = fs::File::create(tmp)?;
            f.write_all(&bytes)?;
            f.sync_all()?;
        }
        fs::rename(tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}
