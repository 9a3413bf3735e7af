//! Output plumbing: line-delimited JSON records (optionally to a file) plus
//! human tables on stdout. Outputs carry the resolved config and its hash,
//! and contain nothing run-dependent beyond the seeded computation, so
//! identical configurations reproduce byte-identical files.

use std::fs;
use std::io::Write;
use std::path::PathBuf;

use serde_json::Value;

use treatrule::error::{Error, Result};

/// FNV-1a over the canonical config JSON; stable across runs and builds.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

pub struct Emitter {
    out: Option<PathBuf>,
    lines: Vec<String>,
}

impl Emitter {
    pub fn new(out: Option<PathBuf>) -> Self {
        Emitter { out, lines: Vec::new() }
    }

    /// Queue one structured record.
    pub fn record(&mut self, value: Value) {
        self.lines.push(value.to_string());
    }

    /// Write all records: to the output file when configured, otherwise to
    /// stdout after the human output.
    pub fn finish(self) -> Result<()> {
        let body = self.lines.join("\n") + "\n";
        match &self.out {
            Some(path) => {
                let mut f = fs::File::create(path)
                    .map_err(|e| Error::Config(format!("cannot create {}: {e}", path.display())))?;
                f.write_all(body.as_bytes())
                    .map_err(|e| Error::Config(format!("cannot write {}: {e}", path.display())))?;
            }
            None => {
                print!("{body}");
            }
        }
        Ok(())
    }
}

/// Render a two-column table with a fixed layout.
pub fn kv_table(title: &str, rows: &[(&str, String)]) -> String {
    let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    let mut out = String::new();
    out.push_str(title);
    out.push('\n');
    for (k, v) in rows {
        out.push_str(&format!("  {k:<width$}  {v}\n"));
    }
    out
}
