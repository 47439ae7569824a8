//! Deterministic output writers. Every file carries the code version and
//! a hash of the resolved configuration, and contains nothing that varies
//! between identical reruns (no timestamps, no host state), so reruns are
//! byte-identical.

use serde::Serialize;
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::io;
use std::path::Path;

/// `git describe` of the build when provided, package version otherwise.
pub const VERSION: &str = match option_env!("GIT_DESCRIBE") {
    Some(v) => v,
    None => env!("CARGO_PKG_VERSION"),
};

pub struct Meta {
    pub config_sha256: String,
    pub config_json: String,
}

impl Meta {
    /// Canonical serialization of the resolved config and its hash.
    pub fn new<C: Serialize>(config: &C) -> Meta {
        let config_json =
            serde_json::to_string(config).expect("resolved configs serialize cleanly");
        let digest = Sha256::digest(config_json.as_bytes());
        let mut config_sha256 = String::with_capacity(64);
        for byte in digest {
            write!(config_sha256, "{byte:02x}").expect("hex formatting cannot fail");
        }
        Meta {
            config_sha256,
            config_json,
        }
    }
}

/// CSV with `#` metadata lines, a column header, then the rows.
pub fn write_csv(
    path: &Path,
    meta: &Meta,
    extra_header: &[String],
    columns: &str,
    rows: &[String],
) -> io::Result<()> {
    let mut text = String::new();
    let _ = writeln!(text, "# anderson-dephase {VERSION}");
    let _ = writeln!(text, "# config_sha256: {}", meta.config_sha256);
    for line in extra_header {
        let _ = writeln!(text, "# {line}");
    }
    let _ = writeln!(text, "{columns}");
    for row in rows {
        let _ = writeln!(text, "{row}");
    }
    std::fs::write(path, text)
}

#[derive(Serialize)]
struct Document<'a, R: Serialize> {
    config: &'a serde_json::value::RawValue,
    config_sha256: &'a str,
    git_describe: &'a str,
    results: R,
}

/// JSON envelope: resolved config, its hash, the code version, results.
pub fn write_json<R: Serialize>(path: &Path, meta: &Meta, results: R) -> io::Result<()> {
    let config = serde_json::value::RawValue::from_string(meta.config_json.clone())
        .expect("config json is valid");
    let doc = Document {
        config: &config,
        config_sha256: &meta.config_sha256,
        git_describe: VERSION,
        results,
    };
    let mut text = serde_json::to_string_pretty(&doc).expect("results serialize cleanly");
    text.push('\n');
    std::fs::write(path, text)
}

/// Shortest-roundtrip decimal for table cells; empty for missing values.
pub fn cell(value: Option<f64>) -> String {
    match value {
        Some(v) => format!("{v}"),
        None => String::new(),
    }
}
