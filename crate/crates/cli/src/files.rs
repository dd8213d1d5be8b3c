//! On-disk layout of a key directory and of ciphertext/tag bundles.
//!
//! A key directory holds `manifest.json`, `sk.bin`, `pk.bin`, `rk.bin`, the compiled
//! `system.r1cs` and `issued.txt` (hex digests of input tags the client produced).
//! Keys are regenerated from the manifest seed on load and checked against the files.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use vfhe_core::bgv::Ciphertext;
use vfhe_core::protocol::{self, EvalTag, InputTag, Target, VfheKeys};
use vfhe_core::workload::{sub_seed, ParamSpec, Workload};

#[derive(Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub workload: Workload,
    pub params: ParamSpec,
    pub seed: u64,
    pub fingerprint: String,
}

pub struct KeyDir {
    pub path: PathBuf,
    pub manifest: Manifest,
    pub keys: VfheKeys,
}

fn derive(workload: Workload, params: &ParamSpec, seed: u64) -> Result<VfheKeys> {
    let bgv = params.bgv()?;
    let field = params.field_params()?;
    Ok(protocol::kgen(&workload.circuit(), &bgv, &field, sub_seed(seed, "kgen"))?)
}

pub fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

pub fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).with_context(|| format!("reading {}", path.display()))
}

impl KeyDir {
    pub fn create(path: &Path, workload: Workload, params: ParamSpec, seed: u64) -> Result<Self> {
        if params.count_only {
            bail!(vfhe_core::Error::InvalidParams(format!("preset {} is count-only", params.name)));
        }
        let keys = derive(workload, &params, seed)?;
        fs::create_dir_all(path)?;
        let manifest = Manifest { workload, params, seed, fingerprint: keys.fingerprint() };
        write(&path.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
        write(&path.join("sk.bin"), keys.verify.secret_key().to_bytes())?;
        write(&path.join("pk.bin"), keys.eval.public_key().to_bytes())?;
        write(&path.join("rk.bin"), keys.eval.relin_key().to_bytes())?;
        keys.verify.system(Target::Circuit).export(&path.join("system.r1cs"))?;
        write(&path.join("issued.txt"), "")?;
        Ok(Self { path: path.to_path_buf(), manifest, keys })
    }

    pub fn open(path: &Path) -> Result<Self> {
        let manifest: Manifest = serde_json::from_slice(&read(&path.join("manifest.json"))?)
            .with_context(|| format!("parsing manifest in {}", path.display()))?;
        let keys = derive(manifest.workload, &manifest.params, manifest.seed)?;
        let matches = keys.fingerprint() == manifest.fingerprint
            && read(&path.join("pk.bin"))? == keys.eval.public_key().to_bytes()
            && read(&path.join("sk.bin"))? == keys.verify.secret_key().to_bytes();
        if !matches {
            bail!("key files in {} do not match their manifest", path.display());
        }
        Ok(Self { path: path.to_path_buf(), manifest, keys })
    }

    pub fn issued(&self) -> Result<Vec<[u8; 32]>> {
        let text = fs::read_to_string(self.path.join("issued.txt")).unwrap_or_default();
        text.lines()
            .filter(|l| !l.is_empty())
            .map(|l| {
                let mut d = [0u8; 32];
                hex::decode_to_slice(l.trim(), &mut d).with_context(|| format!("bad digest {l}"))?;
                Ok(d)
            })
            .collect()
    }

    pub fn record_issued(&self, tag: &InputTag) -> Result<()> {
        let mut text = fs::read_to_string(self.path.join("issued.txt")).unwrap_or_default();
        text.push_str(&hex::encode(tag.digest()));
        text.push('\n');
        write(&self.path.join("issued.txt"), text)
    }
}

/// Writes `x0.ct`, `x1.ct`, ... into `dir`.
pub fn write_inputs(dir: &Path, cts: &[Ciphertext]) -> Result<()> {
    fs::create_dir_all(dir)?;
    for (i, c) in cts.iter().enumerate() {
        write(&dir.join(format!("x{i}.ct")), c.to_bytes())?;
    }
    Ok(())
}

pub fn read_inputs(dir: &Path) -> Result<InputTag> {
    let mut cts = Vec::new();
    loop {
        let p = dir.join(format!("x{}.ct", cts.len()));
        if !p.exists() {
            break;
        }
        cts.push(Ciphertext::from_bytes(&read(&p)?)?);
    }
    if cts.is_empty() {
        bail!("no input ciphertexts in {}", dir.display());
    }
    Ok(InputTag(cts))
}

/// Writes `y.ct` and `y.vtag` into `dir`.
pub fn write_result(dir: &Path, c: &Ciphertext, tag: &EvalTag) -> Result<()> {
    fs::create_dir_all(dir)?;
    write(&dir.join("y.ct"), c.to_bytes())?;
    write(&dir.join("y.vtag"), tag.to_bytes())
}

pub fn read_result(dir: &Path) -> Result<(Ciphertext, EvalTag)> {
    let c = Ciphertext::from_bytes(&read(&dir.join("y.ct"))?)?;
    let tag = EvalTag::from_bytes(&read(&dir.join("y.vtag"))?)?;
    Ok((c, tag))
}
