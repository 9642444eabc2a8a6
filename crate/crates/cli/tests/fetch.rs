//! Dataset cache behavior against a throwaway local HTTP server.

use std::io::{BufRead, BufReader, Write};
use std::net::TcpListener;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread;

use jrank_cli::fetch::{
    cache_path, fetch_dataset, fetch_manifest, FetchError, FetchOptions, Manifest, ManifestEntry,
};
use sha2::{Digest, Sha256};

const BODY: &[u8] = b"user_id,item_id,value\n0,0,1\n1,0,1\n";

/// Serves `BODY` at `/data.csv` and 404 elsewhere, counting requests.
struct Server {
    base: String,
    hits: Arc<AtomicUsize>,
}

impl Server {
    fn start() -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let base = format!("http://{}", listener.local_addr().unwrap());
        let hits = Arc::new(AtomicUsize::new(0));
        let counter = Arc::clone(&hits);
        thread::spawn(move || {
            for stream in listener.incoming() {
                let Ok(mut stream) = stream else { continue };
                counter.fetch_add(1, Ordering::SeqCst);
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut request_line = String::new();
                reader.read_line(&mut request_line).unwrap();
                let mut line = String::new();
                while reader.read_line(&mut line).unwrap() > 2 {
                    line.clear();
                }
                let path = request_line.split(' ').nth(1).unwrap_or("");
                let response = if path.split('?').next() == Some("/data.csv") {
                    let mut r = format!(
                        "HTTP/1.1 200 OK\r\nContent-Length: {}\r\nConnection: close\r\n\r\n",
                        BODY.len()
                    )
                    .into_bytes();
                    r.extend_from_slice(BODY);
                    r
                } else {
                    b"HTTP/1.1 404 Not Found\r\nContent-Length: 0\r\nConnection: close\r\n\r\n"
                        .to_vec()
                };
                let _ = stream.write_all(&response);
            }
        });
        Self { base, hits }
    }

    fn url(&self, path: &str) -> String {
        format!("{}/{path}", self.base)
    }

    fn hits(&self) -> usize {
        self.hits.load(Ordering::SeqCst)
    }
}

fn digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[test]
fn warm_cache_makes_no_request() {
    let server = Server::start();
    let cache = tempfile::tempdir().unwrap();
    let url = server.url("data.csv");
    let options = FetchOptions::default();

    let first = fetch_dataset(&url, cache.path(), &options).unwrap();
    assert_eq!(std::fs::read(&first).unwrap(), BODY);
    assert_eq!(server.hits(), 1);

    let second = fetch_dataset(&url, cache.path(), &options).unwrap();
    assert_eq!(first, second);
    assert_eq!(server.hits(), 1);

    let offline = FetchOptions {
        offline: true,
        ..options
    };
    assert_eq!(fetch_dataset(&url, cache.path(), &offline).unwrap(), first);
    assert_eq!(server.hits(), 1);
}

#[test]
fn bad_urls_are_network_errors() {
    let server = Server::start();
    let cache = tempfile::tempdir().unwrap();
    let options = FetchOptions::default();
    assert!(matches!(
        fetch_dataset(&server.url("missing.csv"), cache.path(), &options),
        Err(FetchError::Network(_))
    ));
    assert!(matches!(
        fetch_dataset("not a url", cache.path(), &options),
        Err(FetchError::Network(_))
    ));
    assert!(!cache_path(&server.url("missing.csv"), cache.path()).exists());
}

#[test]
fn offline_with_cold_cache_fails() {
    let server = Server::start();
    let cache = tempfile::tempdir().unwrap();
    let options = FetchOptions {
        offline: true,
        ..FetchOptions::default()
    };
    assert!(matches!(
        fetch_dataset(&server.url("data.csv"), cache.path(), &options),
        Err(FetchError::Network(_))
    ));
    assert_eq!(server.hits(), 0);
}

#[test]
fn pinned_digest_is_enforced() {
    let server = Server::start();
    let cache = tempfile::tempdir().unwrap();
    let url = server.url("data.csv");

    let wrong = FetchOptions {
        sha256: Some(digest(b"something else")),
        ..FetchOptions::default()
    };
    assert!(matches!(
        fetch_dataset(&url, cache.path(), &wrong),
        Err(FetchError::ChecksumMismatch { .. })
    ));
    assert!(!cache_path(&url, cache.path()).exists());

    let right = FetchOptions {
        sha256: Some(digest(BODY)),
        ..FetchOptions::default()
    };
    fetch_dataset(&url, cache.path(), &right).unwrap();

    // A tampered cache entry is detected offline.
    std::fs::write(cache_path(&url, cache.path()), b"tampered").unwrap();
    let offline = FetchOptions {
        offline: true,
        ..right.clone()
    };
    assert!(matches!(
        fetch_dataset(&url, cache.path(), &offline),
        Err(FetchError::ChecksumMismatch { .. })
    ));
    // Online, it is downloaded again.
    let hits = server.hits();
    let path = fetch_dataset(&url, cache.path(), &right).unwrap();
    assert_eq!(std::fs::read(path).unwrap(), BODY);
    assert_eq!(server.hits(), hits + 1);
}

#[test]
fn manifest_entries_fetch_in_order() {
    let server = Server::start();
    let cache = tempfile::tempdir().unwrap();
    let manifest = Manifest {
        files: vec![
            ManifestEntry {
                url: server.url("data.csv"),
                sha256: Some(digest(BODY)),
            },
            ManifestEntry {
                url: server.url("data.csv?copy=2"),
                sha256: None,
            },
        ],
    };
    let paths = fetch_manifest(&manifest, cache.path(), &FetchOptions::default()).unwrap();
    assert_eq!(paths.len(), 2);
    assert_ne!(paths[0], paths[1]);
}

#[test]
fn concurrent_fetches_download_once() {
    let server = Server::start();
    let cache = tempfile::tempdir().unwrap();
    let url = server.url("data.csv");
    thread::scope(|s| {
        for _ in 0..4 {
            s.spawn(|| fetch_dataset(&url, cache.path(), &FetchOptions::default()).unwrap());
        }
    });
    assert_eq!(server.hits(), 1);
}
