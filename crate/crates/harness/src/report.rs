//! Report bundle plumbing: deterministic CSV tables, the JSON manifest and
//! the config hash.

use std::io::Write;
use std::path::{Path, PathBuf};

/// FNV-1a 64 over the raw config bytes, hex-encoded.
pub fn config_hash(raw: &str) -> String {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for b in raw.bytes() {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    format!("{hash:016x}")
}

/// Formats a float with Rust's shortest round-trip representation; the same
/// value always produces the same bytes.
pub fn fmt(v: f64) -> String {
    if v == f64::NEG_INFINITY {
        "-inf".into()
    } else if v == f64::INFINITY {
        "inf".into()
    } else {
        format!("{v}")
    }
}

/// Writes a CSV table; all formatting goes through `fmt` for determinism.
pub fn write_csv(
    path: &Path,
    header: &[&str],
    rows: &[Vec<String>],
) -> std::io::Result<()> {
    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    std::fs::write(path, out)
}

/// Accumulates the manifest for one experiment run.
pub struct ReportBundle {
    pub out_dir: PathBuf,
    pub kind: String,
    pub seed: u64,
    pub config_hash: String,
    pub files: Vec<String>,
    pub extra: serde_json::Map<String, serde_json::Value>,
    pub warnings: Vec<String>,
}

impl ReportBundle {
    pub fn new(out_dir: &Path, kind: &str, seed: u64, raw_config: &str) -> std::io::Result<Self> {
        std::fs::create_dir_all(out_dir)?;
        Ok(Self {
            out_dir: out_dir.to_path_buf(),
            kind: kind.to_string(),
            seed,
            config_hash: config_hash(raw_config),
            files: Vec::new(),
            extra: serde_json::Map::new(),
            warnings: Vec::new(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    pub fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> std::io::Result<()> {
        write_csv(&self.path(name), header, rows)?;
        self.files.push(name.to_string());
        Ok(())
    }

    pub fn text(&mut self, name: &str, content: &str) -> std::io::Result<()> {
        std::fs::write(self.path(name), content)?;
        self.files.push(name.to_string());
        Ok(())
    }

    pub fn binary(&mut self, name: &str, content: &[u8]) -> std::io::Result<()> {
        let mut f = std::fs::File::create(self.path(name))?;
        f.write_all(content)?;
        self.files.push(name.to_string());
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: serde_json::Value) {
        self.extra.insert(key.to_string(), value);
    }

    pub fn warn(&mut self, message: String) {
        self.warnings.push(message);
    }

    /// Writes manifest.json and returns its path.
    pub fn finish(mut self) -> std::io::Result<(PathBuf, Vec<String>)> {
        self.files.push("manifest.json".to_string());
        self.files.sort();
        let manifest = serde_json::json!({
            "kind": self.kind,
            "seed": self.seed,
            "config_hash": self.config_hash,
            "version": env!("CARGO_PKG_VERSION"),
            "files": self.files,
            "warnings": self.warnings,
            "report": serde_json::Value::Object(self.extra),
        });
        let path = self.out_dir.join("manifest.json");
        std::fs::write(&path, serde_json::to_string_pretty(&manifest)?)?;
        Ok((path, self.warnings))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_is_stable_and_sensitive() {
        assert_eq!(config_hash("abc"), config_hash("abc"));
        assert_ne!(config_hash("abc"), config_hash("abd"));
    }

    #[test]
    fn float_formatting_round_trips() {
        for v in [0.1, -1.5e-7, 3.0, f64::NEG_INFINITY] {
            let s = fmt(v);
            if v.is_finite() {
                assert_eq!(s.parse::<f64>().unwrap(), v);
            }
        }
    }
}
