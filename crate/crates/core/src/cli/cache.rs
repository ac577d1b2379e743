//! Content-addressed artifact cache.
//!
//! Entries live at `<root>/<kind>/<key>.<ext>`, where the key hashes the
//! input content and every parameter that affects the artifact. Writers
//! hold `<entry>.lock` and publish by rename, so concurrent processes on
//! different keys never block each other and readers never see partial files.

use std::fs::{self, OpenOptions};
use std::io::ErrorKind;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use sha2::{Digest, Sha256};

use super::CliError;

/// Locks older than this are assumed abandoned.
const STALE_LOCK: Duration = Duration::from_secs(600);

/// Hex SHA-256 of the parts, each terminated by a NUL.
pub fn cache_key<S: AsRef<str>>(parts: &[S]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p.as_ref().as_bytes());
        h.update([0u8]);
    }
    hex::encode(h.finalize())
}

pub fn file_hash(path: &Path) -> Result<String, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::data(format!("cannot read {}: {e}", path.display())))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CacheOutcome {
    Hit,
    Built,
    /// A corrupt entry was replaced; carries the reason.
    Rebuilt(String),
}

#[derive(Clone, Debug)]
pub struct Cache {
    root: PathBuf,
}

struct LockGuard(PathBuf);

impl Drop for LockGuard {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.0);
    }
}

fn acquire(lock: &Path) -> Result<LockGuard, CliError> {
    let start = Instant::now();
    loop {
        match OpenOptions::new().write(true).create_new(true).open(lock) {
            Ok(_) => return Ok(LockGuard(lock.to_path_buf())),
            Err(e) if e.kind() == ErrorKind::AlreadyExists => {
                let stale = fs::metadata(lock)
                    .and_then(|m| m.modified())
                    .map(|t| t.elapsed().unwrap_or_default() > STALE_LOCK)
                    .unwrap_or(false);
                if stale || start.elapsed() > STALE_LOCK {
                    let _ = fs::remove_file(lock);
                    continue;
                }
                std::thread::sleep(Duration::from_millis(50));
            }
            Err(e) => return Err(CliError::io(lock, e)),
        }
    }
}

impl Cache {
    pub fn new(root: impl Into<PathBuf>) -> Cache {
        Cache { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn entry_path(&self, kind: &str, key: &str, ext: &str) -> PathBuf {
        self.root.join(kind).join(format!("{key}.{ext}"))
    }

    /// Returns the cached artifact, building and storing it on a miss or
    /// when the stored copy fails to load.
    pub fn get_or_build<T>(
        &self,
        kind: &str,
        key: &str,
        ext: &str,
        load: impl Fn(&Path) -> Result<T, String>,
        store: impl Fn(&T, &Path) -> std::io::Result<()>,
        build: impl FnOnce() -> Result<T, CliError>,
    ) -> Result<(T, CacheOutcome), CliError> {
        let path = self.entry_path(kind, key, ext);
        let dir = path.parent().expect("entry has a parent");
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        let _lock = acquire(&path.with_extension(format!("{ext}.lock")))?;

        let mut outcome = CacheOutcome::Built;
        if path.exists() {
            match load(&path) {
                Ok(v) => return Ok((v, CacheOutcome::Hit)),
                Err(reason) => outcome = CacheOutcome::Rebuilt(reason),
            }
        }
        let value = build()?;
        let tmp = path.with_extension(format!("{ext}.tmp"));
        store(&value, &tmp).map_err(|e| CliError::io(&tmp, e))?;
        fs::rename(&tmp, &path).map_err(|e| CliError::io(&path, e))?;
        Ok((value, outcome))
    }
}
