//! Download-once cache for dataset files.
//!
//! Files are stored under the cache directory by a name derived from their
//! URL. A lock file serializes concurrent invocations, and an optional
//! SHA-256 digest pins the expected content.

use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::Deserialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Environment variable overriding the cache directory.
pub const CACHE_DIR_ENV: &str = "JRANK_CACHE_DIR";

/// Largest response body accepted.
const MAX_BODY_BYTES: u64 = 1 << 30;

#[derive(Debug, Error)]
pub enum FetchError {
    #[error("network error: {0}")]
    Network(String),
    #[error("checksum mismatch for {url}: expected {expected}, got {actual}")]
    ChecksumMismatch {
        url: String,
        expected: String,
        actual: String,
    },
    #[error("cache error at {path}: {source}")]
    Cache {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("bad manifest: {0}")]
    Manifest(String),
}

pub type Result<T, E = FetchError> = std::result::Result<T, E>;

#[derive(Debug, Clone)]
pub struct FetchOptions {
    /// Serve from cache only; a miss is a network error.
    pub offline: bool,
    /// Expected lowercase hex SHA-256 of the file.
    pub sha256: Option<String>,
    pub timeout: Duration,
}

impl Default for FetchOptions {
    fn default() -> Self {
        Self {
            offline: false,
            sha256: None,
            timeout: Duration::from_secs(60),
        }
    }
}

/// `$JRANK_CACHE_DIR`, else the user cache directory, else `./.jrank-cache`.
pub fn default_cache_dir() -> PathBuf {
    if let Some(dir) = std::env::var_os(CACHE_DIR_ENV) {
        return PathBuf::from(dir);
    }
    if let Some(dir) = std::env::var_os("XDG_CACHE_HOME") {
        return PathBuf::from(dir).join("jrank");
    }
    if let Some(home) = std::env::var_os("HOME") {
        return PathBuf::from(home).join(".cache").join("jrank");
    }
    PathBuf::from(".jrank-cache")
}

fn hex_digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Where `url` is cached: a URL hash prefix plus the URL's last path segment.
pub fn cache_path(url: &str, cache_dir: &Path) -> PathBuf {
    let tail: String = url
        .trim_end_matches('/')
        .rsplit('/')
        .next()
        .unwrap_or("")
        .split(['?', '#'])
        .next()
        .unwrap_or("")
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || ".-_".contains(c) {
                c
            } else {
                '_'
            }
        })
        .collect();
    let prefix = &hex_digest(url.as_bytes())[..16];
    cache_dir.join(if tail.is_empty() {
        prefix.to_string()
    } else {
        format!("{prefix}-{tail}")
    })
}

fn cache_err(path: &Path) -> impl FnOnce(std::io::Error) -> FetchError + '_ {
    move |source| FetchError::Cache {
        path: path.display().to_string(),
        source,
    }
}

fn check_digest(url: &str, bytes: &[u8], expected: Option<&str>) -> Result<()> {
    let Some(expected) = expected else {
        return Ok(());
    };
    let actual = hex_digest(bytes);
    if actual.eq_ignore_ascii_case(expected) {
        Ok(())
    } else {
        Err(FetchError::ChecksumMismatch {
            url: url.to_string(),
            expected: expected.to_lowercase(),
            actual,
        })
    }
}

fn download(url: &str, timeout: Duration) -> Result<Vec<u8>> {
    let agent: ureq::Agent = ureq::Agent::config_builder()
        .timeout_global(Some(timeout))
        .build()
        .into();
    let mut response = agent
        .get(url)
        .call()
        .map_err(|e| FetchError::Network(format!("{url}: {e}")))?;
    response
        .body_mut()
        .with_config()
        .limit(MAX_BODY_BYTES)
        .read_to_vec()
        .map_err(|e| FetchError::Network(format!("{url}: {e}")))
}

/// Returns the local path of `url`, downloading it on a cache miss.
///
/// A cached file that fails the pinned digest is downloaded again (or
/// reported, when offline).
pub fn fetch_dataset(url: &str, cache_dir: &Path, options: &FetchOptions) -> Result<PathBuf> {
    fs::create_dir_all(cache_dir).map_err(cache_err(cache_dir))?;
    let lock_path = cache_dir.join(".lock");
    let lock = OpenOptions::new()
        .create(true)
        .truncate(false)
        .write(true)
        .open(&lock_path)
        .map_err(cache_err(&lock_path))?;
    lock.lock().map_err(cache_err(&lock_path))?;

    let target = cache_path(url, cache_dir);
    let expected = options.sha256.as_deref();
    if target.exists() {
        let bytes = fs::read(&target).map_err(cache_err(&target))?;
        match check_digest(url, &bytes, expected) {
            Ok(()) => return Ok(target),
            Err(e) if options.offline => return Err(e),
            Err(_) => {}
        }
    }
    if options.offline {
        return Err(FetchError::Network(format!(
            "offline and {url} is not cached"
        )));
    }
    let bytes = download(url, options.timeout)?;
    check_digest(url, &bytes, expected)?;
    let partial = target.with_extension("partial");
    File::create(&partial)
        .and_then(|mut f| f.write_all(&bytes).and_then(|()| f.sync_all()))
        .map_err(cache_err(&partial))?;
    fs::rename(&partial, &target).map_err(cache_err(&target))?;
    Ok(target)
}

/// Pinned dataset files: `{"files": [{"url": ..., "sha256": ...}]}`.
#[derive(Debug, Clone, Deserialize)]
pub struct Manifest {
    pub files: Vec<ManifestEntry>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct ManifestEntry {
    pub url: String,
    #[serde(default)]
    pub sha256: Option<String>,
}

impl Manifest {
    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(cache_err(path))?;
        serde_json::from_str(&text).map_err(|e| FetchError::Manifest(e.to_string()))
    }
}

/// Fetches every file in the manifest, in order.
pub fn fetch_manifest(
    manifest: &Manifest,
    cache_dir: &Path,
    options: &FetchOptions,
) -> Result<Vec<PathBuf>> {
    manifest
        .files
        .iter()
        .map(|entry| {
            let options = FetchOptions {
                sha256: entry.sha256.clone().or_else(|| options.sha256.clone()),
                ..options.clone()
            };
            fetch_dataset(&entry.url, cache_dir, &options)
        })
        .collect()
}
