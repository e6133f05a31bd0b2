//! Valid-policy-tree simulator over explicit root-to-leaf paths.
//!
//! The tree at depth `i` is represented as the set of complete paths of
//! length `i` (valid-policy symbols), each with the expected-policy set of its
//! last node. Pruning is implicit: a path either reaches the current depth or
//! it is not in the set. Policy symbols are small integers; [`ANY`] is anyPolicy.

use std::collections::{BTreeMap, BTreeSet};

pub const ANY: u8 = 0;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SimCert {
    /// `None`: no certificatePolicies extension.
    pub policies: Option<BTreeSet<u8>>,
    pub mappings: Vec<(u8, u8)>,
    pub require_explicit: Option<u64>,
    pub inhibit_mapping: Option<u64>,
    pub self_issued: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SimRequest {
    /// Empty: any policy acceptable.
    pub acceptable: BTreeSet<u8>,
    pub explicit_required: bool,
    pub inhibit_mapping: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimOutcome {
    pub ok: bool,
    pub authorized: BTreeSet<u8>,
}

type Level = BTreeMap<Vec<u8>, BTreeSet<u8>>;

fn child_exists(
    sym: u8,
    path: &[u8],
    expected: &BTreeSet<u8>,
    level: &Level,
    asserted: &BTreeSet<u8>,
) -> bool {
    let parent_policy = path.last().copied().unwrap_or(ANY);
    if sym != ANY && asserted.contains(&sym) {
        if expected.contains(&sym) {
            return true;
        }
        let matched_anywhere = level.values().any(|e| e.contains(&sym));
        if !matched_anywhere && parent_policy == ANY {
            return true;
        }
    }
    asserted.contains(&ANY) && expected.contains(&sym)
}

pub fn simulate(certs: &[SimCert], req: &SimRequest) -> SimOutcome {
    let n = certs.len() as u64;
    let mut explicit = if req.explicit_required { 0 } else { n + 1 };
    let mut mapping = if req.inhibit_mapping { 0 } else { n + 1 };
    let mut level: Option<Level> = Some([(Vec::new(), [ANY].into())].into());

    let symbols: BTreeSet<u8> = certs
        .iter()
        .flat_map(|c| {
            c.policies
                .iter()
                .flatten()
                .copied()
                .chain(c.mappings.iter().flat_map(|&(a, b)| [a, b]))
        })
        .chain([ANY])
        .collect();

    for (idx, cert) in certs.iter().enumerate() {
        let last = idx + 1 == certs.len();
        level = match (level, &cert.policies) {
            (Some(prev), Some(asserted)) if !asserted.is_empty() => {
                let mut next = Level::new();
                for (path, expected) in &prev {
                    for &sym in &symbols {
                        if child_exists(sym, path, expected, &prev, asserted) {
                            let mut p = path.clone();
                            p.push(sym);
                            next.insert(p, [sym].into());
                        }
                    }
                }
                (!next.is_empty()).then_some(next)
            }
            _ => None,
        };

        if last {
            explicit = explicit.saturating_sub(1);
            if cert.require_explicit == Some(0) {
                explicit = 0;
            }
            break;
        }

        if let Some(mut lv) = level.take() {
            let mut groups: BTreeMap<u8, BTreeSet<u8>> = BTreeMap::new();
            for &(from, to) in &cert.mappings {
                groups.entry(from).or_default().insert(to);
            }
            for (from, targets) in groups {
                let ending: Vec<Vec<u8>> = lv
                    .keys()
                    .filter(|p| p.last() == Some(&from))
                    .cloned()
                    .collect();
                if mapping > 0 {
                    if !ending.is_empty() {
                        for p in ending {
                            lv.insert(p, targets.clone());
                        }
                    } else {
                        let any_paths: Vec<Vec<u8>> = lv
                            .keys()
                            .filter(|p| p.last() == Some(&ANY))
                            .cloned()
                            .collect();
                        for p in any_paths {
                            let mut q = p[..p.len() - 1].to_vec();
                            q.push(from);
                            lv.insert(q, targets.clone());
                        }
                    }
                } else {
                    for p in ending {
                        lv.remove(&p);
                    }
                }
            }
            level = (!lv.is_empty()).then_some(lv);
        }

        if !cert.self_issued {
            explicit = explicit.saturating_sub(1);
            mapping = mapping.saturating_sub(1);
        }
        if let Some(k) = cert.require_explicit {
            explicit = explicit.min(k);
        }
        if let Some(k) = cert.inhibit_mapping {
            mapping = mapping.min(k);
        }
    }

    let authorized: BTreeSet<u8> = level
        .iter()
        .flat_map(|lv| lv.keys())
        .map(|path| path.iter().copied().find(|&s| s != ANY).unwrap_or(ANY))
        .collect();

    if req.acceptable.is_empty() {
        let ok = explicit > 0 || level.is_some();
        SimOutcome {
            ok,
            authorized: if ok { authorized } else { BTreeSet::new() },
        }
    } else {
        let subset: BTreeSet<u8> = if authorized.contains(&ANY) {
            req.acceptable.clone()
        } else {
            authorized.intersection(&req.acceptable).copied().collect()
        };
        SimOutcome {
            ok: !subset.is_empty(),
            authorized: subset,
        }
    }
}
