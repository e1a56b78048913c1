use std::fmt;
use std::path::{Component, Path, PathBuf};
use std::process::ExitCode;

use detkit::augment::AugmentConfig;
use detkit::bench::BenchConfig;
use detkit::postprocess::PostprocessConfig;
use detkit::synthfarm::{ErrorModel, SceneConfig};
use serde::Deserialize;

/// Failure classes, mapped to exit codes 1, 2 and 3.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(anyhow::Error),
    Internal(anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Internal(_) => 3,
        })
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Data(e) => write!(f, "data error: {e:#}"),
            CliError::Internal(e) => write!(f, "internal error: {e:#}"),
        }
    }
}

pub type CliResult<T = ()> = Result<T, CliError>;

pub fn usage<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(CliError::Usage(msg.into()))
}

/// Tags an error with its exit class.
pub trait Classify<T> {
    fn data(self) -> CliResult<T>;
    fn internal(self) -> CliResult<T>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn data(self) -> CliResult<T> {
        self.map_err(|e| CliError::Data(e.into()))
    }

    fn internal(self) -> CliResult<T> {
        self.map_err(|e| CliError::Internal(e.into()))
    }
}

/// Fails with a usage error when an input path does not exist.
pub fn require_exists(path: &Path, what: &str) -> CliResult {
    if path.exists() {
        Ok(())
    } else {
        usage(format!("{what} not found: {}", path.display()))
    }
}

/// Optional TOML config file. Flags given on the command line win.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub augment: Option<AugmentConfig>,
    pub postprocess: Option<PostprocessConfig>,
    pub bench: Option<BenchConfig>,
    pub synth: Option<SceneConfig>,
    pub perturb: Option<ErrorModel>,
}

impl ConfigFile {
    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        require_exists(path, "config file")?;
        let text = std::fs::read_to_string(path).data()?;
        toml::from_str(&text).map_err(|e| CliError::Data(anyhow::anyhow!("{}: {e}", path.display())))
    }
}

/// `to` expressed relative to `from` (both directories). Falls back to the
/// absolute path when there is no common root.
pub fn relative_path(from: &Path, to: &Path) -> PathBuf {
    let (Ok(from), Ok(to)) = (from.canonicalize(), to.canonicalize()) else {
        return to.to_path_buf();
    };
    let a: Vec<Component> = from.components().collect();
    let b: Vec<Component> = to.components().collect();
    let common = a.iter().zip(&b).take_while(|(x, y)| x == y).count();
    if common == 0 {
        return to;
    }
    let mut out = PathBuf::new();
    for _ in common..a.len() {
        out.push("..");
    }
    for c in &b[common..] {
        out.push(c.as_os_str());
    }
    if out.as_os_str().is_empty() {
        out.push(".");
    }
    out
}

/// Path as a `/`-separated string for manifests.
pub fn slash_path(p: &Path) -> String {
    p.components()
        .map(|c| c.as_os_str().to_string_lossy().into_owned())
        .collect::<Vec<_>>()
        .join("/")
}

/// Stable 64-bit FNV-1a hash, used to key per-image random streams by id.
pub fn fnv1a(s: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Files with extension `ext` in `dir` (non-recursive), sorted by name.
pub fn files_with_ext(dir: &Path, ext: &str) -> CliResult<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).data()? {
        let p = entry.data()?.path();
        if p.is_file() && p.extension().is_some_and(|e| e == ext) {
            out.push(p);
        }
    }
    out.sort();
    Ok(out)
}

/// Expands directories into the sorted `*.ext` files below them.
pub fn collect_inputs(paths: &[PathBuf], ext: &str) -> CliResult<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in paths {
        require_exists(p, "input")?;
        if p.is_dir() {
            let mut stack = vec![p.clone()];
            let mut found = Vec::new();
            while let Some(d) = stack.pop() {
                for entry in std::fs::read_dir(&d).data()? {
                    let q = entry.data()?.path();
                    if q.is_dir() {
                        stack.push(q);
                    } else if q.extension().is_some_and(|e| e == ext) {
                        found.push(q);
                    }
                }
            }
            found.sort();
            out.extend(found);
        } else {
            out.push(p.clone());
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relative_paths() {
        let t = tempfile::tempdir().unwrap();
        let a = t.path().join("out/splits");
        let b = t.path().join("out/synth/farm");
        std::fs::create_dir_all(&a).unwrap();
        std::fs::create_dir_all(&b).unwrap();
        assert_eq!(slash_path(&relative_path(&a, &b)), "../synth/farm");
        assert_eq!(slash_path(&relative_path(&b, &b)), ".");
    }

    #[test]
    fn fnv_reference_values() {
        assert_eq!(fnv1a(""), 0xcbf29ce484222325);
        assert_eq!(fnv1a("a"), 0xaf63dc4c8601ec8c);
    }
}
