//! Output plumbing: 12-significant-digit numeric printing, atomic file
//! writes, and the provenance stamp every artifact carries.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use sha2::{Digest, Sha256};

/// Formats a float rounded to 12 significant digits, locale-independent,
/// with no trailing zero noise ("1.44", not "1.44000000000e0").
pub fn sig12(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    // Round via the scientific form, then let the shortest-roundtrip
    // formatter print the rounded value.
    let rounded: f64 = format!("{x:.11e}").parse().expect("rounded float");
    format!("{rounded}")
}

/// Provenance shared by every output file of one run.
#[derive(Debug, Clone, serde::Serialize)]
pub struct Provenance {
    pub toolkit_version: String,
    pub config_sha256: String,
}

impl Provenance {
    /// Hashes the fully resolved configuration (after flag overrides), so
    /// two runs with the same stamp saw identical settings.
    pub fn of(config: &impl serde::Serialize) -> anyhow::Result<Self> {
        let canonical = serde_json::to_string(config).context("serializing config for hashing")?;
        let mut hasher = Sha256::new();
        hasher.update(canonical.as_bytes());
        Ok(Self {
            toolkit_version: env!("CARGO_PKG_VERSION").to_string(),
            config_sha256: format!("{:x}", hasher.finalize()),
        })
    }

    /// The stamp as a `#` comment line for text/CSV artifacts.
    pub fn comment_line(&self) -> String {
        format!(
            "# conedemand {} config_sha256={}\n",
            self.toolkit_version, self.config_sha256
        )
    }
}

/// Writes bytes to `path` atomically (temp file in the same directory, then
/// rename), creating parent directories as needed.
pub fn write_atomic(path: &Path, contents: &[u8]) -> anyhow::Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty());
    if let Some(dir) = dir {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let mut tmp: PathBuf = path.to_path_buf();
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".into());
    tmp.set_file_name(format!(".{name}.tmp"));
    fs::write(&tmp, contents).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path)
        .with_context(|| format!("renaming {} to {}", tmp.display(), path.display()))?;
    Ok(())
}

/// Writes a CSV artifact: provenance comment, header, then rows of
/// already-formatted fields.
pub fn write_csv(
    path: &Path,
    prov: &Provenance,
    header: &[&str],
    rows: &[Vec<String>],
) -> anyhow::Result<()> {
    let mut text = prov.comment_line();
    text.push_str(&header.join(","));
    text.push('\n');
    for row in rows {
        text.push_str(&row.join(","));
        text.push('\n');
    }
    write_atomic(path, text.as_bytes())
}

/// Writes a JSON artifact with the provenance embedded at the top level.
pub fn write_json(
    path: &Path,
    prov: &Provenance,
    body: impl serde::Serialize,
) -> anyhow::Result<()> {
    #[derive(serde::Serialize)]
    struct Stamped<T> {
        provenance: Provenance,
        #[serde(flatten)]
        body: T,
    }
    let text = serde_json::to_string_pretty(&Stamped {
        provenance: prov.clone(),
        body,
    })
    .context("serializing JSON artifact")?;
    write_atomic(path, format!("{text}\n").as_bytes())
}
