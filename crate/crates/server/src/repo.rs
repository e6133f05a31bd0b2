//! Directory-backed certificate store. The layout is what `pki-forge` writes:
//! `certs/*.der`, `crls/*.crl` and `anchors.txt`.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use certval_core::anchors::{parse_manifest, AnchorEntry};
use certval_core::pcm::CertGraph;
use certval_core::x509::{parse_certificate, parse_crl};
use certval_core::{Certificate, Crl};

#[derive(Debug, thiserror::Error)]
pub enum RepoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("anchor {0} is not among the repository certificates")]
    MissingAnchor(String),
    #[error("repository has no trust anchors")]
    NoAnchors,
}

/// One immutable view of the repository.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub graph: CertGraph,
    /// CRLs that verify under a repository certificate of their issuer, plus those whose
    /// issuer is not in the repository (a supplied chain may carry it; status checking
    /// verifies every CRL against the chain issuer anyway).
    pub crls: Vec<Arc<Crl>>,
    pub anchors: Vec<AnchorEntry>,
    /// Files skipped during loading, with the reason.
    pub skipped: Vec<(PathBuf, String)>,
}

impl Snapshot {
    pub fn load(root: &Path) -> Result<Self, RepoError> {
        let mut skipped = Vec::new();
        let mut graph = CertGraph::new();
        let mut certs: Vec<Certificate> = Vec::new();
        for path in files(&root.join("certs"), "der")? {
            let bytes = read(&path)?;
            let cert = parse_certificate(&bytes).map_err(|e| RepoError::Parse {
                path: path.clone(),
                message: e.to_string(),
            })?;
            graph.insert(cert.clone());
            certs.push(cert);
        }

        let manifest_path = root.join("anchors.txt");
        let text = String::from_utf8(read(&manifest_path)?).map_err(|e| RepoError::Parse {
            path: manifest_path.clone(),
            message: e.to_string(),
        })?;
        let anchors = parse_manifest(&text).map_err(|e| RepoError::Parse {
            path: manifest_path.clone(),
            message: e.to_string(),
        })?;
        if anchors.is_empty() {
            return Err(RepoError::NoAnchors);
        }
        for a in &anchors {
            graph.add_anchor(a.fingerprint).map_err(|_| {
                RepoError::MissingAnchor(format!("{} ({})", a.label, a.fingerprint))
            })?;
        }

        let mut crls = Vec::new();
        for path in files(&root.join("crls"), "crl")? {
            let bytes = read(&path)?;
            let crl = parse_crl(&bytes).map_err(|e| RepoError::Parse {
                path: path.clone(),
                message: e.to_string(),
            })?;
            let mut issuers = certs
                .iter()
                .filter(|c| c.subject() == crl.issuer())
                .peekable();
            let unknown_issuer = issuers.peek().is_none();
            if unknown_issuer
                || issuers.any(|c| crl.check_signature(c.public_key()).unwrap_or(false))
            {
                crls.push(Arc::new(crl));
            } else {
                skipped.push((
                    path,
                    "signature does not verify under any issuer certificate".to_owned(),
                ));
            }
        }
        Ok(Self {
            graph,
            crls,
            anchors,
            skipped,
        })
    }
}

fn read(path: &Path) -> Result<Vec<u8>, RepoError> {
    fs::read(path).map_err(|source| RepoError::Io {
        path: path.to_owned(),
        source,
    })
}

/// Files with the given extension, sorted by name. A missing directory is empty.
fn files(dir: &Path, ext: &str) -> Result<Vec<PathBuf>, RepoError> {
    let entries = match fs::read_dir(dir) {
        Ok(e) => e,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(source) => {
            return Err(RepoError::Io {
                path: dir.to_owned(),
                source,
            })
        }
    };
    let mut out = Vec::new();
    for entry in entries {
        let path = entry
            .map_err(|source| RepoError::Io {
                path: dir.to_owned(),
                source,
            })?
            .path();
        if path.extension().is_some_and(|e| e == ext) {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

/// The live repository. Readers take a snapshot; `reload` swaps it whole.
#[derive(Debug)]
pub struct Repository {
    root: PathBuf,
    current: RwLock<Arc<Snapshot>>,
}

impl Repository {
    pub fn open(root: &Path) -> Result<Self, RepoError> {
        let snap = Snapshot::load(root)?;
        Ok(Self {
            root: root.to_owned(),
            current: RwLock::new(Arc::new(snap)),
        })
    }

    pub fn snapshot(&self) -> Arc<Snapshot> {
        self.current.read().expect("repository lock").clone()
    }

    /// Loads the directory again; on failure the old snapshot stays in place.
    pub fn reload(&self) -> Result<Arc<Snapshot>, RepoError> {
        let snap = Arc::new(Snapshot::load(&self.root)?);
        *self.current.write().expect("repository lock") = snap.clone();
        Ok(snap)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }
}
