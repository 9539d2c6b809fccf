//! On-disk cache of solved fields.
//!
//! Entries are keyed by the potential digest, grid geometry, frequency,
//! quantized incidence direction and solver tolerance. Writes go to a
//! temporary file in the same directory and are renamed into place, so a
//! reader never sees a partial entry.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use num_complex::Complex64;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::potentials::ComplexFrequency;
use crate::solver::{FieldVariant, ScatteringField};

pub const CACHE_ENV: &str = "BSL_CACHE_DIR";
const MAGIC: &[u8; 4] = b"BSF1";

#[derive(Debug, Clone)]
pub struct FieldCache {
    dir: PathBuf,
}

/// Identity of one cached solve.
#[derive(Debug, Clone, PartialEq)]
pub struct CacheKey {
    pub spec_hash: String,
    pub n: usize,
    pub a: f64,
    pub freq: ComplexFrequency,
    pub alpha: Vec3,
    pub tol: f64,
}

impl CacheKey {
    /// Directions are quantized to 1e-12 so recomputed unit vectors hit.
    fn file_name(&self) -> String {
        let q = |v: f64| (v * 1e12).round() as i64;
        let text = format!(
            "{}|{}|{:e}|{:e}|{:e}|{},{},{}|{:e}",
            self.spec_hash,
            self.n,
            self.a,
            self.freq.kappa,
            self.freq.eta,
            q(self.alpha[0]),
            q(self.alpha[1]),
            q(self.alpha[2]),
            self.tol
        );
        format!("{}.bsf", hex::encode(Sha256::digest(text.as_bytes())))
    }
}

static TEMP_COUNTER: AtomicU64 = AtomicU64::new(0);

impl FieldCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    /// `$BSL_CACHE_DIR`, or `.bslab-cache` in the working directory.
    pub fn from_env() -> Self {
        match std::env::var_os(CACHE_ENV) {
            Some(dir) if !dir.is_empty() => Self::new(dir),
            _ => Self::new(".bslab-cache"),
        }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn load(&self, key: &CacheKey) -> Result<Option<ScatteringField>> {
        let path = self.dir.join(key.file_name());
        let mut file = match fs::File::open(&path) {
            Ok(f) => f,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(e.into()),
        };
        let mut bytes = Vec::new();
        file.read_to_end(&mut bytes)?;
        let field = decode(&bytes)?;
        if field.n != key.n || field.a != key.a || field.freq != key.freq {
            return Err(Error::Parse(format!("cache entry {} does not match its key", path.display())));
        }
        Ok(Some(field))
    }

    pub fn store(&self, key: &CacheKey, field: &ScatteringField) -> Result<()> {
        fs::create_dir_all(&self.dir)?;
        let target = self.dir.join(key.file_name());
        let tmp = self.dir.join(format!(
            ".tmp-{}-{}",
            std::process::id(),
            TEMP_COUNTER.fetch_add(1, Ordering::Relaxed)
        ));
        {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(&encode(field))?;
            f.sync_all()?;
        }
        fs::rename(&tmp, &target)?;
        Ok(())
    }

    /// Removes every cache entry; returns how many files were deleted.
    pub fn clear(&self) -> Result<usize> {
        let entries = match fs::read_dir(&self.dir) {
            Ok(e) => e,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(0),
            Err(e) => return Err(e.into()),
        };
        let mut removed = 0;
        for entry in entries {
            let path = entry?.path();
            let name = path.file_name().and_then(|s| s.to_str()).unwrap_or("");
            if name.ends_with(".bsf") || name.starts_with(".tmp-") {
                fs::remove_file(&path)?;
                removed += 1;
            }
        }
        Ok(removed)
    }
}

fn encode(field: &ScatteringField) -> Vec<u8> {
    let mut out = Vec::with_capacity(64 + field.values.len() * 16);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(field.n as u64).to_le_bytes());
    for v in [field.a, field.alpha[0], field.alpha[1], field.alpha[2], field.freq.kappa, field.freq.eta] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.push(match field.variant {
        FieldVariant::FullU => 0,
        FieldVariant::Epsilon => 1,
    });
    for v in &field.values {
        out.extend_from_slice(&v.re.to_le_bytes());
        out.extend_from_slice(&v.im.to_le_bytes());
    }
    out
}

fn decode(bytes: &[u8]) -> Result<ScatteringField> {
    let bad = || Error::Parse("truncated or corrupt cache entry".into());
    if bytes.len() < 61 || &bytes[..4] != MAGIC {
        return Err(bad());
    }
    let f64_at = |i: usize| f64::from_le_bytes(bytes[i..i + 8].try_into().expect("8 bytes"));
    let n = u64::from_le_bytes(bytes[4..12].try_into().expect("8 bytes")) as usize;
    let a = f64_at(12);
    let alpha = Vec3::new(f64_at(20), f64_at(28), f64_at(36));
    let freq = ComplexFrequency::new(f64_at(44), f64_at(52))?;
    let variant = match bytes[60] {
        0 => FieldVariant::FullU,
        1 => FieldVariant::Epsilon,
        _ => return Err(bad()),
    };
    let body = &bytes[61..];
    if body.len() != n * n * n * 16 {
        return Err(bad());
    }
    let values = body
        .chunks_exact(16)
        .map(|c| {
            Complex64::new(
                f64::from_le_bytes(c[..8].try_into().expect("8 bytes")),
                f64::from_le_bytes(c[8..].try_into().expect("8 bytes")),
            )
        })
        .collect();
    Ok(ScatteringField {
        n,
        a,
        alpha,
        freq,
        values,
        variant,
    })
}
