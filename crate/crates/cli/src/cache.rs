//! On-disk cache of finished result rows, one JSON file per key.
//!
//! A key is the SHA-256 of every input that can change a row: the channel
//! file bytes, epsilon, delta, Q, backend, search knobs, the blocklength,
//! and the crate version. Floats enter as their bit patterns.

use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Incrementally built cache key.
#[derive(Debug, Clone, Default)]
pub struct KeyBuilder {
    parts: Vec<String>,
}

impl KeyBuilder {
    pub fn new(kind: &str) -> Self {
        let mut k = Self::default();
        k.text("version", CODE_VERSION).text("kind", kind);
        k
    }

    pub fn text(&mut self, name: &str, value: &str) -> &mut Self {
        // the name's length makes the split between name and value unambiguous
        self.parts.push(format!("{}:{name}={value}", name.len()));
        self
    }

    pub fn float(&mut self, name: &str, value: f64) -> &mut Self {
        self.text(name, &format!("{:016x}", value.to_bits()))
    }

    pub fn floats(&mut self, name: &str, values: &[f64]) -> &mut Self {
        let v: Vec<String> = values.iter().map(|x| format!("{:016x}", x.to_bits())).collect();
        self.text(name, &format!("[{}]", v.join(",")))
    }

    pub fn int(&mut self, name: &str, value: u64) -> &mut Self {
        self.text(name, &value.to_string())
    }

    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        for p in &self.parts {
            h.update((p.len() as u64).to_le_bytes());
            h.update(p.as_bytes());
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone)]
pub struct Cache {
    dir: PathBuf,
}

impl Cache {
    pub fn open(dir: &Path) -> CliResult<Self> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        Ok(Self { dir: dir.to_path_buf() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.json"))
    }

    /// Stored fields, or `None` on a miss or an unreadable entry.
    pub fn get(&self, key: &str) -> Option<Vec<String>> {
        let text = fs::read_to_string(self.path(key)).ok()?;
        serde_json::from_str(&text).ok()
    }

    pub fn put(&self, key: &str, fields: &[String]) -> CliResult<()> {
        let path = self.path(key);
        let tmp = self.dir.join(format!("{key}.{}.tmp", std::process::id()));
        let text = serde_json::to_string(fields).expect("strings serialize");
        fs::write(&tmp, text).map_err(|e| CliError::io(&tmp, e))?;
        fs::rename(&tmp, &path).map_err(|e| CliError::io(&path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keys_separate_inputs() {
        let mut a = KeyBuilder::new("converse");
        a.float("eps", 1e-4).int("n", 300);
        let mut b = KeyBuilder::new("converse");
        b.float("eps", 1e-4).int("n", 301);
        assert_ne!(a.digest(), b.digest());
        let mut c = KeyBuilder::new("converse");
        c.float("eps", 1e-4).int("n", 300);
        assert_eq!(a.digest(), c.digest());
        // name/value split and part concatenation are both unambiguous
        let mut d = KeyBuilder::new("x");
        d.text("a", "b=c");
        let mut e = KeyBuilder::new("x");
        e.text("a=b", "c");
        assert_ne!(d.digest(), e.digest());
    }

    #[test]
    fn round_trip_and_miss() {
        let dir = tempfile::tempdir().unwrap();
        let cache = Cache::open(dir.path()).unwrap();
        assert_eq!(cache.get("k"), None);
        let fields = vec!["1".to_string(), "inf".to_string(), "a,b\"c".to_string()];
        cache.put("k", &fields).unwrap();
        assert_eq!(cache.get("k"), Some(fields));
        fs::write(dir.path().join("bad.json"), "{").unwrap();
        assert_eq!(cache.get("bad"), None);
    }
}
