use std::fs;
use std::path::{Path, PathBuf};

use decoy_core::ScenarioConfig;
use sha2::{Digest, Sha256};

use crate::CliError;

/// Output directory plus the hash stamped on every file.
pub struct Output {
    dir: PathBuf,
    hash: String,
}

/// Digest of the resolved configuration and the run parameters.
pub fn config_hash(cfg: &ScenarioConfig, extra: &[(&str, String)]) -> String {
    let mut text = cfg.to_kv_text();
    for (k, v) in extra {
        text.push_str(&format!("{k}={v}\n"));
    }
    let digest = Sha256::digest(text.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

impl Output {
    pub fn new(dir: &Path, cfg: &ScenarioConfig, extra: &[(&str, String)]) -> Result<Self, CliError> {
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            hash: config_hash(cfg, extra),
        })
    }

    /// Writes `# config_hash=...` followed by `body` (header row included).
    pub fn write(&self, name: &str, body: &str) -> Result<(), CliError> {
        let path = self.dir.join(name);
        fs::write(&path, format!("# config_hash={}\n{body}", self.hash))?;
        eprintln!("wrote {}", path.display());
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_tracks_every_input() {
        let cfg = ScenarioConfig::default();
        let h = config_hash(&cfg, &[("seeds", "3".into())]);
        assert_eq!(h.len(), 64);
        assert_eq!(h, config_hash(&cfg, &[("seeds", "3".into())]));
        assert_ne!(h, config_hash(&cfg, &[("seeds", "4".into())]));
        assert_ne!(h, config_hash(&cfg.clone().with_users(2), &[("seeds", "3".into())]));
    }
}
