//! On-disk cache of Hecke matrices and cuspidal bases, keyed by
//! (level, modulus, operator id).
//!
//! Entry format "EISK1": magic `EISK1` (5 bytes), then little-endian
//! l: u16, N: u64, operator id (u8 length + ASCII bytes), rows: u32,
//! cols: u32, followed by the row-major entries as minimal-width unsigned
//! integers (one byte each, since l <= 251). A sha256 sidecar
//! (`<entry>.sha256`) is written next to each entry; `verify` re-hashes.
//! Writes go to a temp file and are renamed into place, so concurrent
//! writers of identical keys are safe.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::hecke::FpMatrix;

pub const MAGIC: &[u8; 5] = b"EISK1";

#[derive(Debug, Error)]
pub enum CacheError {
    #[error("cache io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("corrupt cache entry {0}: {1}")]
    Corrupt(String, String),
}

#[derive(Debug, Clone)]
pub struct CacheDir {
    path: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CacheStats {
    pub entries: usize,
    pub bytes: u64,
}

#[derive(Debug, Clone, Default)]
pub struct VerifyReport {
    pub entries: usize,
    pub ok: usize,
    pub corrupt: Vec<String>,
}

/// Serialize a matrix in the EISK1 wire format.
pub fn encode_matrix(n: u64, l: u16, op: &str, m: &FpMatrix) -> Vec<u8> {
    assert!(op.len() < 256 && op.is_ascii());
    assert_eq!(m.modulus(), l);
    let mut out = Vec::with_capacity(24 + op.len() + m.data().len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&l.to_le_bytes());
    out.extend_from_slice(&n.to_le_bytes());
    out.push(op.len() as u8);
    out.extend_from_slice(op.as_bytes());
    out.extend_from_slice(&(m.rows() as u32).to_le_bytes());
    out.extend_from_slice(&(m.cols() as u32).to_le_bytes());
    out.extend_from_slice(m.data());
    out
}

/// Parse an EISK1 entry, returning (n, l, op, matrix).
pub fn decode_matrix(bytes: &[u8]) -> Result<(u64, u16, String, FpMatrix), String> {
    let need = |cond: bool, what: &str| -> Result<(), String> {
        if cond {
            Ok(())
        } else {
            Err(format!("truncated or invalid: {what}"))
        }
    };
    need(bytes.len() >= 5 && &bytes[..5] == MAGIC, "magic")?;
    let mut at = 5usize;
    let take = |at: &mut usize, k: usize| -> Result<&[u8], String> {
        if *at + k > bytes.len() {
            return Err("truncated".into());
        }
        let s = &bytes[*at..*at + k];
        *at += k;
        Ok(s)
    };
    let l = u16::from_le_bytes(take(&mut at, 2)?.try_into().unwrap());
    let n = u64::from_le_bytes(take(&mut at, 8)?.try_into().unwrap());
    let idlen = take(&mut at, 1)?[0] as usize;
    let op = String::from_utf8(take(&mut at, idlen)?.to_vec()).map_err(|e| e.to_string())?;
    let rows = u32::from_le_bytes(take(&mut at, 4)?.try_into().unwrap()) as usize;
    let cols = u32::from_le_bytes(take(&mut at, 4)?.try_into().unwrap()) as usize;
    let data = take(&mut at, rows * cols)?;
    if at != bytes.len() {
        return Err("trailing bytes".into());
    }
    if l < 2 || l > 251 || !crate::arith::is_prime(l as u64) {
        return Err(format!("bad modulus {l}"));
    }
    let mut m = FpMatrix::zeros(l, rows, cols);
    for (i, &v) in data.iter().enumerate() {
        if v as u16 >= l {
            return Err(format!("entry {v} out of range mod {l}"));
        }
        m.set(i / cols.max(1), i % cols.max(1), v);
    }
    Ok((n, l, op, m))
}

fn sha256_hex(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    format!("{:x}", h.finalize())
}

impl CacheDir {
    pub fn new(path: impl Into<PathBuf>) -> Result<CacheDir, CacheError> {
        let path = path.into();
        fs::create_dir_all(&path)?;
        Ok(CacheDir { path })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    fn entry_name(n: u64, l: u16, op: &str) -> String {
        format!("eisk_{n}_{l}_{op}.bin")
    }

    fn atomic_write(&self, name: &str, bytes: &[u8]) -> Result<(), CacheError> {
        let tmp = self.path.join(format!(
            ".{name}.tmp.{}.{}",
            std::process::id(),
            std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.subsec_nanos())
                .unwrap_or(0)
        ));
        {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(bytes)?;
            f.sync_all()?;
        }
        fs::rename(&tmp, self.path.join(name))?;
        Ok(())
    }

    pub fn store_matrix(&self, n: u64, l: u16, op: &str, m: &FpMatrix) -> Result<(), CacheError> {
        let bytes = encode_matrix(n, l, op, m);
        let name = Self::entry_name(n, l, op);
        let digest = sha256_hex(&bytes);
        self.atomic_write(&name, &bytes)?;
        self.atomic_write(&format!("{name}.sha256"), format!("{digest}\n").as_bytes())?;
        Ok(())
    }

    /// Load a matrix if present and intact; a corrupt entry is an error.
    pub fn load_matrix(
        &self,
        n: u64,
        l: u16,
        op: &str,
    ) -> Result<Option<FpMatrix>, CacheError> {
        let name = Self::entry_name(n, l, op);
        let full = self.path.join(&name);
        let bytes = match fs::read(&full) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(e.into()),
        };
        let (fn_, fl, fop, m) =
            decode_matrix(&bytes).map_err(|e| CacheError::Corrupt(name.clone(), e))?;
        if (fn_, fl, fop.as_str()) != (n, l, op) {
            return Err(CacheError::Corrupt(name, "key mismatch".into()));
        }
        Ok(Some(m))
    }

    fn entries(&self) -> Result<Vec<PathBuf>, CacheError> {
        let mut out = Vec::new();
        for e in fs::read_dir(&self.path)? {
            let p = e?.path();
            if p.extension().is_some_and(|x| x == "bin") {
                out.push(p);
            }
        }
        out.sort();
        Ok(out)
    }

    pub fn stats(&self) -> Result<CacheStats, CacheError> {
        let mut s = CacheStats::default();
        for p in self.entries()? {
            s.entries += 1;
            s.bytes += fs::metadata(&p)?.len();
        }
        Ok(s)
    }

    /// Remove every cache entry (and sidecar); returns how many entries went.
    pub fn clear(&self) -> Result<usize, CacheError> {
        let entries = self.entries()?;
        let n = entries.len();
        for p in entries {
            let _ = fs::remove_file(p.with_extension("bin.sha256"));
            fs::remove_file(p)?;
        }
        Ok(n)
    }

    /// Re-hash and re-parse every entry.
    pub fn verify(&self) -> Result<VerifyReport, CacheError> {
        let mut rep = VerifyReport::default();
        for p in self.entries()? {
            rep.entries += 1;
            let name = p
                .file_name()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            let bytes = fs::read(&p)?;
            let sidecar = p.with_extension("bin.sha256");
            let stored = fs::read_to_string(&sidecar).unwrap_or_default();
            if stored.trim() != sha256_hex(&bytes) {
                rep.corrupt.push(format!("{name}: digest mismatch"));
                continue;
            }
            match decode_matrix(&bytes) {
                Ok(_) => rep.ok += 1,
                Err(e) => rep.corrupt.push(format!("{name}: {e}")),
            }
        }
        Ok(rep)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_matrix() -> FpMatrix {
        let mut m = FpMatrix::zeros(5, 3, 4);
        for r in 0..3 {
            for c in 0..4 {
                m.set(r, c, ((r * 4 + c) % 5) as u8);
            }
        }
        m
    }

    #[test]
    fn roundtrip_and_header() {
        let m = sample_matrix();
        let bytes = encode_matrix(44, 5, "T3", &m);
        assert_eq!(&bytes[..5], MAGIC);
        let (n, l, op, back) = decode_matrix(&bytes).unwrap();
        assert_eq!((n, l, op.as_str()), (44, 5, "T3"));
        assert_eq!(back, m);
    }

    #[test]
    fn store_load_stats_clear_verify() {
        let dir = tempfile::tempdir().unwrap();
        let cache = CacheDir::new(dir.path()).unwrap();
        assert_eq!(cache.stats().unwrap(), CacheStats::default());
        assert!(cache.load_matrix(44, 5, "T3").unwrap().is_none());

        let m = sample_matrix();
        cache.store_matrix(44, 5, "T3", &m).unwrap();
        cache.store_matrix(44, 5, "U2", &m).unwrap();
        assert_eq!(cache.load_matrix(44, 5, "T3").unwrap(), Some(m));
        assert_eq!(cache.stats().unwrap().entries, 2);

        let rep = cache.verify().unwrap();
        assert_eq!((rep.entries, rep.ok), (2, 2));
        assert!(rep.corrupt.is_empty());

        // corrupt one entry and verify again
        let victim = dir.path().join("eisk_44_5_T3.bin");
        let mut bytes = std::fs::read(&victim).unwrap();
        let last = bytes.len() - 1;
        bytes[last] ^= 1;
        std::fs::write(&victim, bytes).unwrap();
        let rep = cache.verify().unwrap();
        assert_eq!(rep.corrupt.len(), 1);
        assert_eq!(rep.ok, 1);

        assert_eq!(cache.clear().unwrap(), 2);
        assert_eq!(cache.stats().unwrap().entries, 0);
    }

    #[test]
    fn decode_rejects_garbage() {
        assert!(decode_matrix(b"EISK2aaaa").is_err());
        let m = sample_matrix();
        let mut bytes = encode_matrix(44, 5, "T3", &m);
        bytes.truncate(bytes.len() - 2);
        assert!(decode_matrix(&bytes).is_err());
        // out-of-range entry
        let mut bytes = encode_matrix(44, 5, "T3", &m);
        let last = bytes.len() - 1;
        bytes[last] = 7;
        assert!(decode_matrix(&bytes).is_err());
    }
}
