//! Path construction: the certificate graph and candidate chain discovery.
//!
//! Discovery is purely structural (issuer name to subject name chaining). No
//! signature, validity or revocation check happens here; that is the validator's job.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Arc;

use crate::x509::{Certificate, Fingerprint, Name};

pub const DEFAULT_MAX_LENGTH: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PcmError {
    #[error("target certificate is not in the graph")]
    TargetNotInGraph,
    #[error("no certification path found")]
    NoPathFound,
    #[error("supplied certificates do not form a single chain")]
    UnorderableSet,
    #[error("anchor {0} is not a certificate in the graph")]
    UnknownAnchor(Fingerprint),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// Target toward the anchors.
    Forward,
    /// Anchors toward the target.
    Reverse,
}

/// Certificates indexed by fingerprint, subject and issuer, plus the trust anchor set.
#[derive(Debug, Clone, Default)]
pub struct CertGraph {
    nodes: HashMap<Fingerprint, Arc<Certificate>>,
    by_subject: HashMap<Name, BTreeSet<Fingerprint>>,
    by_issuer: HashMap<Name, BTreeSet<Fingerprint>>,
    anchors: BTreeSet<Fingerprint>,
}

impl CertGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, cert: Certificate) -> Fingerprint {
        self.insert_arc(Arc::new(cert))
    }

    pub fn insert_arc(&mut self, cert: Arc<Certificate>) -> Fingerprint {
        let fp = cert.fingerprint();
        if !self.nodes.contains_key(&fp) {
            self.by_subject
                .entry(cert.subject().clone())
                .or_default()
                .insert(fp);
            self.by_issuer
                .entry(cert.issuer().clone())
                .or_default()
                .insert(fp);
            self.nodes.insert(fp, cert);
        }
        fp
    }

    pub fn add_anchor(&mut self, fp: Fingerprint) -> Result<(), PcmError> {
        if !self.nodes.contains_key(&fp) {
            return Err(PcmError::UnknownAnchor(fp));
        }
        self.anchors.insert(fp);
        Ok(())
    }

    pub fn insert_anchor(&mut self, cert: Certificate) -> Fingerprint {
        let fp = self.insert(cert);
        self.anchors.insert(fp);
        fp
    }

    pub fn get(&self, fp: &Fingerprint) -> Option<&Arc<Certificate>> {
        self.nodes.get(fp)
    }

    pub fn contains(&self, fp: &Fingerprint) -> bool {
        self.nodes.contains_key(fp)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn anchors(&self) -> &BTreeSet<Fingerprint> {
        &self.anchors
    }

    pub fn certificates(&self) -> impl Iterator<Item = &Arc<Certificate>> {
        self.nodes.values()
    }

    /// Copy of the graph with only the given anchors kept.
    pub fn with_anchors(&self, anchors: &BTreeSet<Fingerprint>) -> Self {
        let mut g = self.clone();
        g.anchors = anchors.intersection(&self.anchors).copied().collect();
        g
    }

    /// Copy of the graph with extra (e.g. client-supplied) certificates added.
    pub fn with_extra<'a>(&self, extra: impl IntoIterator<Item = &'a Certificate>) -> Self {
        let mut g = self.clone();
        for c in extra {
            g.insert(c.clone());
        }
        g
    }

    fn subjects(&self, name: &Name) -> impl Iterator<Item = &Fingerprint> {
        self.by_subject.get(name).into_iter().flatten()
    }

    fn issued_by(&self, name: &Name) -> impl Iterator<Item = &Fingerprint> {
        self.by_issuer.get(name).into_iter().flatten()
    }

    fn anchors_named(&self, name: &Name) -> Vec<Fingerprint> {
        self.subjects(name)
            .filter(|fp| self.anchors.contains(fp))
            .copied()
            .collect()
    }
}

/// A loop-free path from a trust anchor's issuance down to the target.
#[derive(Debug, Clone)]
pub struct CandidateChain {
    pub anchor: Arc<Certificate>,
    /// Position 0 is issued by the anchor; the last entry is the target.
    pub certs: Vec<Arc<Certificate>>,
    anchor_fp: Fingerprint,
    fps: Vec<Fingerprint>,
}

impl CandidateChain {
    pub fn new(anchor: Arc<Certificate>, certs: Vec<Arc<Certificate>>) -> Self {
        let anchor_fp = anchor.fingerprint();
        let fps = certs.iter().map(|c| c.fingerprint()).collect();
        Self {
            anchor,
            certs,
            anchor_fp,
            fps,
        }
    }

    pub fn len(&self) -> usize {
        self.certs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.certs.is_empty()
    }

    pub fn anchor_fingerprint(&self) -> Fingerprint {
        self.anchor_fp
    }

    pub fn fingerprints(&self) -> &[Fingerprint] {
        &self.fps
    }

    pub fn target(&self) -> &Arc<Certificate> {
        self.certs.last().expect("chains are never empty")
    }

    fn sort_key(&self) -> (usize, &[Fingerprint], Fingerprint) {
        (self.fps.len(), &self.fps, self.anchor_fp)
    }

    /// Structural invariants: name chaining and no repeated certificate or (subject, key).
    pub fn is_well_formed(&self) -> bool {
        let mut seen = BTreeSet::new();
        let mut names: Vec<LoopKey> = vec![loop_key(&self.anchor)];
        let mut issuer = self.anchor.subject();
        for (cert, fp) in self.certs.iter().zip(&self.fps) {
            let key = loop_key(cert);
            if cert.issuer() != issuer || !seen.insert(*fp) || names.contains(&key) {
                return false;
            }
            names.push(key);
            issuer = cert.subject();
        }
        !self.certs.is_empty()
    }
}

impl PartialEq for CandidateChain {
    fn eq(&self, other: &Self) -> bool {
        self.anchor_fp == other.anchor_fp && self.fps == other.fps
    }
}

impl Eq for CandidateChain {}

/// A subject is revisited when both its name and its key repeat; rollover
/// (self-issued, new key) certificates therefore remain usable.
type LoopKey = (Name, Vec<u8>);

fn loop_key(cert: &Certificate) -> LoopKey {
    (cert.subject().clone(), cert.public_key().key.clone())
}

/// Enumerates every loop-free chain of at most `max_length` certificates from
/// an anchor to `target`, ordered by length, then fingerprint sequence.
/// Both directions return the same set.
pub fn discover(
    graph: &CertGraph,
    target: &Certificate,
    direction: Direction,
    max_length: usize,
) -> Result<Vec<CandidateChain>, PcmError> {
    let target_fp = target.fingerprint();
    let target = graph
        .get(&target_fp)
        .ok_or(PcmError::TargetNotInGraph)?
        .clone();
    let mut found: BTreeMap<(Fingerprint, Vec<Fingerprint>), CandidateChain> = BTreeMap::new();
    let mut record = |anchor: Fingerprint, path: &[Fingerprint]| {
        let chain = CandidateChain::new(
            graph.get(&anchor).expect("anchor in graph").clone(),
            path.iter()
                .map(|fp| graph.get(fp).expect("node in graph").clone())
                .collect(),
        );
        found.insert((anchor, path.to_vec()), chain);
    };
    if max_length == 0 {
        return Ok(Vec::new());
    }
    match direction {
        Direction::Forward => {
            let mut path = vec![target_fp];
            let mut keys = vec![loop_key(&target)];
            forward(graph, &mut path, &mut keys, max_length, &mut record);
        }
        Direction::Reverse => {
            for anchor_fp in graph.anchors() {
                let anchor = graph.get(anchor_fp).expect("anchor in graph");
                let mut path = Vec::new();
                let mut keys = vec![loop_key(anchor)];
                reverse(
                    graph,
                    anchor.subject(),
                    target_fp,
                    &mut path,
                    &mut keys,
                    max_length,
                    &mut |p| record(*anchor_fp, p),
                );
            }
        }
    }
    let mut chains: Vec<CandidateChain> = found.into_values().collect();
    chains.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
    Ok(chains)
}

/// `path` holds the target first and grows toward the anchor.
fn forward(
    graph: &CertGraph,
    path: &mut Vec<Fingerprint>,
    keys: &mut Vec<LoopKey>,
    max_length: usize,
    record: &mut impl FnMut(Fingerprint, &[Fingerprint]),
) {
    let top = graph
        .get(path.last().expect("nonempty"))
        .expect("node in graph")
        .clone();
    for anchor_fp in graph.anchors_named(top.issuer()) {
        let anchor = graph.get(&anchor_fp).expect("anchor in graph");
        if !keys.contains(&loop_key(anchor)) {
            let ordered: Vec<Fingerprint> = path.iter().rev().copied().collect();
            record(anchor_fp, &ordered);
        }
    }
    if path.len() >= max_length {
        return;
    }
    let parents: Vec<Fingerprint> = graph.subjects(top.issuer()).copied().collect();
    for fp in parents {
        let parent = graph.get(&fp).expect("node in graph");
        let key = loop_key(parent);
        if path.contains(&fp) || keys.contains(&key) {
            continue;
        }
        path.push(fp);
        keys.push(key);
        forward(graph, path, keys, max_length, record);
        path.pop();
        keys.pop();
    }
}

fn reverse(
    graph: &CertGraph,
    issuer: &Name,
    target: Fingerprint,
    path: &mut Vec<Fingerprint>,
    keys: &mut Vec<LoopKey>,
    max_length: usize,
    record: &mut impl FnMut(&[Fingerprint]),
) {
    let children: Vec<Fingerprint> = graph.issued_by(issuer).copied().collect();
    for fp in children {
        let child = graph.get(&fp).expect("node in graph").clone();
        let key = loop_key(&child);
        if path.contains(&fp) || keys.contains(&key) {
            continue;
        }
        path.push(fp);
        if fp == target {
            record(path);
        } else if path.len() < max_length {
            keys.push(key);
            reverse(
                graph,
                child.subject(),
                target,
                path,
                keys,
                max_length,
                record,
            );
            keys.pop();
        }
        path.pop();
    }
}

/// Orders a client-supplied certificate set into a chain ending at `target`,
/// completing it from the graph when the supplied set stops short of an anchor.
/// Every supplied certificate must be used.
pub fn supplied_chain(
    graph: &CertGraph,
    extras: &[Certificate],
    target: &Certificate,
    max_length: usize,
) -> Result<CandidateChain, PcmError> {
    let target_fp = target.fingerprint();
    let mut pool: BTreeMap<Fingerprint, &Certificate> = extras
        .iter()
        .map(|c| (c.fingerprint(), c))
        .filter(|(fp, _)| *fp != target_fp)
        .collect();
    let mut ordered: Vec<Certificate> = vec![target.clone()];
    loop {
        let top = ordered.last().expect("nonempty");
        let next = pool
            .iter()
            .find(|(_, c)| c.subject() == top.issuer())
            .map(|(fp, c)| (*fp, (*c).clone()));
        match next {
            Some((fp, cert)) => {
                pool.remove(&fp);
                ordered.push(cert);
            }
            None => break,
        }
    }
    if !pool.is_empty() || ordered.len() > max_length {
        return Err(PcmError::UnorderableSet);
    }

    let extended = graph.with_extra(ordered.iter());
    let top = ordered.last().expect("nonempty");
    let below: Vec<Arc<Certificate>> = ordered[..ordered.len() - 1]
        .iter()
        .rev()
        .cloned()
        .map(Arc::new)
        .collect();
    let budget = max_length - below.len();
    for head in discover(&extended, top, Direction::Forward, budget)? {
        let mut certs = head.certs.clone();
        certs.extend(below.iter().cloned());
        let chain = CandidateChain::new(head.anchor.clone(), certs);
        if chain.is_well_formed() {
            return Ok(chain);
        }
    }
    Err(PcmError::NoPathFound)
}
