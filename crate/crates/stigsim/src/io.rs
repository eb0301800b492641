use std::fs;
use std::path::{Path, PathBuf};

use stigsim_core::engine::ScenarioConfig;

use crate::error::{ConfigErrorDisplay, Error, Result};

/// Environment variable that replaces the config seed.
pub const SEED_OVERRIDE_VAR: &str = "STIGSIM_SEED_OVERRIDE";

pub fn seed_override_from_env() -> Result<Option<u64>> {
    match std::env::var(SEED_OVERRIDE_VAR) {
        Ok(v) if v.trim().is_empty() => Ok(None),
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Error::SeedOverride(v)),
        Err(_) => Ok(None),
    }
}

/// Parse a config string. Errors carry the path of the offending field.
pub fn parse_config(text: &str, file: &Path) -> Result<ScenarioConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: ScenarioConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let field = e.path().to_string();
        Error::Parse {
            file: file.to_path_buf(),
            field,
            message: e.into_inner().to_string(),
        }
    })?;
    cfg.validate().map_err(|e| Error::Invalid {
        file: file.to_path_buf(),
        error: ConfigErrorDisplay(e),
    })?;
    Ok(cfg)
}

/// Read, parse and validate a config, then apply the seed override.
pub fn load_config(path: &Path, seed_override: Option<u64>) -> Result<ScenarioConfig> {
    let text = fs::read_to_string(path).map_err(Error::io(path))?;
    let cfg = parse_config(&text, path)?;
    Ok(match seed_override {
        Some(seed) => cfg.with_seed(seed),
        None => cfg,
    })
}

/// Write a set of files into `dir` all-or-nothing: everything is staged in a
/// temporary directory next to the targets and moved into place only once
/// every file was written.
pub fn write_outputs(dir: &Path, files: &[(&str, Vec<u8>)]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(Error::io(dir))?;
    let stage = tempfile::Builder::new()
        .prefix(".stigsim-stage-")
        .tempdir_in(dir)
        .map_err(Error::io(dir))?;
    for (name, bytes) in files {
        let p = stage.path().join(name);
        fs::write(&p, bytes).map_err(Error::io(&p))?;
    }
    let mut written = Vec::new();
    for (name, _) in files {
        let target = dir.join(name);
        if let Err(e) = fs::rename(stage.path().join(name), &target) {
            for w in &written {
                let _ = fs::remove_file(w);
            }
            return Err(Error::Io {
                path: target,
                source: e,
            });
        }
        written.push(target);
    }
    Ok(written)
}

/// Write one file atomically.
pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).map_err(Error::io(dir))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(Error::io(dir))?;
    std::io::Write::write_all(&mut tmp, bytes).map_err(Error::io(path))?;
    tmp.persist(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e.error,
    })?;
    Ok(())
}
