//! Policy processing: the valid-policy tree carried across a chain, and the
//! relying party's certificate policy requirement (strict or weak).
//!
//! The tree step follows the standard X.509 path validation algorithm with
//! inhibit-anyPolicy fixed at "not inhibited". The client's two flags seed the
//! explicit-policy and policy-mapping counters at zero before the first
//! certificate, exactly as an in-chain policyConstraints with skip count 0 would.

use std::collections::{BTreeMap, BTreeSet};

use crate::der::Oid;
use crate::x509::{oids, Certificate, PolicyMapping};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CprMode {
    Strict,
    Weak,
}

/// The relying party's certificate policy requirement.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CprRequirement {
    pub mode: CprMode,
    /// Strict mode only; empty means any policy is acceptable.
    pub acceptable_set: BTreeSet<Oid>,
    pub explicit_policy_required: bool,
    pub inhibit_policy_mapping: bool,
    /// Weak mode only, e.g. `e-mail`.
    pub intended_usage: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PpmError {
    #[error("weak policy requirement cannot carry an acceptable policy set")]
    MixedRequirement,
    #[error("weak policy requirement needs an intended usage")]
    MissingUsage,
    #[error("no policy set configured for intended usage {0:?}")]
    UnknownUsage(String),
    #[error("usage {0:?} maps to an empty policy set")]
    EmptyUsage(String),
}

impl CprRequirement {
    /// Strict mode with blank fields: any policy is acceptable.
    pub fn any_policy() -> Self {
        Self::strict(BTreeSet::new(), false, false)
    }

    pub fn strict(
        acceptable_set: BTreeSet<Oid>,
        explicit_policy_required: bool,
        inhibit_policy_mapping: bool,
    ) -> Self {
        Self {
            mode: CprMode::Strict,
            acceptable_set,
            explicit_policy_required,
            inhibit_policy_mapping,
            intended_usage: None,
        }
    }

    pub fn weak(usage: impl Into<String>) -> Self {
        Self {
            mode: CprMode::Weak,
            acceptable_set: BTreeSet::new(),
            explicit_policy_required: false,
            inhibit_policy_mapping: false,
            intended_usage: Some(usage.into()),
        }
    }

    pub fn is_any_policy(&self) -> bool {
        self.mode == CprMode::Strict
            && self.acceptable_set.is_empty()
            && !self.explicit_policy_required
            && !self.inhibit_policy_mapping
    }

    pub fn validate(&self) -> Result<(), PpmError> {
        match self.mode {
            CprMode::Strict if self.intended_usage.is_some() => Err(PpmError::MixedRequirement),
            CprMode::Strict => Ok(()),
            CprMode::Weak if !self.acceptable_set.is_empty() => Err(PpmError::MixedRequirement),
            CprMode::Weak if self.intended_usage.is_none() => Err(PpmError::MissingUsage),
            CprMode::Weak => Ok(()),
        }
    }
}

/// The weak-mode usage that means "any policy".
pub const DEFAULT_USAGE: &str = "default";

/// Server table from intended usage to acceptable policy set.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct UsageTable(BTreeMap<String, BTreeSet<Oid>>);

impl UsageTable {
    pub fn new(entries: BTreeMap<String, BTreeSet<Oid>>) -> Result<Self, PpmError> {
        if let Some((usage, _)) = entries.iter().find(|(_, set)| set.is_empty()) {
            return Err(PpmError::EmptyUsage(usage.clone()));
        }
        Ok(Self(
            entries
                .into_iter()
                .map(|(k, v)| (k.to_ascii_lowercase(), v))
                .collect(),
        ))
    }

    pub fn get(&self, usage: &str) -> Option<&BTreeSet<Oid>> {
        self.0.get(&usage.trim().to_ascii_lowercase())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &BTreeSet<Oid>)> {
        self.0.iter()
    }
}

/// Resolves a weak requirement's intended usage to an acceptable policy set.
/// An empty result means any policy (the `default` usage).
pub fn resolve_weak(usage: &str, table: &UsageTable) -> Result<BTreeSet<Oid>, PpmError> {
    if let Some(set) = table.get(usage) {
        return Ok(set.clone());
    }
    if usage.trim().eq_ignore_ascii_case(DEFAULT_USAGE) {
        return Ok(BTreeSet::new());
    }
    Err(PpmError::UnknownUsage(usage.to_string()))
}

/// Turns a weak requirement into the equivalent strict one; strict requirements pass through.
pub fn effective_requirement(
    req: &CprRequirement,
    table: &UsageTable,
) -> Result<CprRequirement, PpmError> {
    req.validate()?;
    match req.mode {
        CprMode::Strict => Ok(req.clone()),
        CprMode::Weak => {
            let usage = req
                .intended_usage
                .as_deref()
                .ok_or(PpmError::MissingUsage)?;
            Ok(CprRequirement::strict(
                resolve_weak(usage, table)?,
                false,
                false,
            ))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Node {
    valid_policy: Oid,
    expected: BTreeSet<Oid>,
    parent: Option<usize>,
    depth: usize,
    alive: bool,
}

/// Depth-indexed valid-policy tree. Level 0 is a single anyPolicy root.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolicyTree {
    nodes: Vec<Node>,
    depth: usize,
}

impl PolicyTree {
    fn new() -> Self {
        let any = oids::any_policy();
        Self {
            nodes: vec![Node {
                valid_policy: any.clone(),
                expected: [any].into(),
                parent: None,
                depth: 0,
                alive: true,
            }],
            depth: 0,
        }
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    fn level(&self, depth: usize) -> Vec<usize> {
        (0..self.nodes.len())
            .filter(|&i| self.nodes[i].alive && self.nodes[i].depth == depth)
            .collect()
    }

    fn add(&mut self, parent: usize, policy: Oid, expected: BTreeSet<Oid>) {
        let depth = self.nodes[parent].depth + 1;
        self.nodes.push(Node {
            valid_policy: policy,
            expected,
            parent: Some(parent),
            depth,
            alive: true,
        });
    }

    fn has_child(&self, parent: usize, policy: &Oid) -> bool {
        self.nodes
            .iter()
            .any(|n| n.alive && n.parent == Some(parent) && n.valid_policy == *policy)
    }

    /// Removes childless nodes above the current depth. Returns false if the tree is now empty.
    fn prune(&mut self) -> bool {
        for depth in (0..self.depth).rev() {
            for i in self.level(depth) {
                let has_children = self.nodes.iter().any(|n| n.alive && n.parent == Some(i));
                if !has_children {
                    self.nodes[i].alive = false;
                }
            }
        }
        self.nodes[0].alive
    }

    /// Policies authorized by the chain in the relying party's domain: for every
    /// leaf, the first non-anyPolicy ancestor below the root (anyPolicy if none).
    pub fn authorized_policies(&self) -> BTreeSet<Oid> {
        let any = oids::any_policy();
        let mut out = BTreeSet::new();
        for leaf in self.level(self.depth) {
            let mut path = Vec::new();
            let mut cur = Some(leaf);
            while let Some(i) = cur {
                path.push(i);
                cur = self.nodes[i].parent;
            }
            let first_specific = path
                .iter()
                .rev()
                .map(|&i| &self.nodes[i].valid_policy)
                .find(|p| **p != any);
            out.insert(first_specific.cloned().unwrap_or_else(|| any.clone()));
        }
        out
    }

    /// Leaf-level valid policies.
    pub fn leaves(&self) -> BTreeSet<Oid> {
        self.level(self.depth)
            .into_iter()
            .map(|i| self.nodes[i].valid_policy.clone())
            .collect()
    }
}

/// Threaded through the chain fold.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolicyState {
    pub tree: Option<PolicyTree>,
    pub explicit_policy: u64,
    pub policy_mapping: u64,
    pub chain_length: usize,
    pub mappings_applied: Vec<PolicyMapping>,
}

pub fn init_state(req: &CprRequirement, chain_length: usize) -> PolicyState {
    let unconstrained = chain_length as u64 + 1;
    PolicyState {
        tree: Some(PolicyTree::new()),
        explicit_policy: if req.explicit_policy_required {
            0
        } else {
            unconstrained
        },
        policy_mapping: if req.inhibit_policy_mapping {
            0
        } else {
            unconstrained
        },
        chain_length,
        mappings_applied: Vec::new(),
    }
}

/// Certificate policy fields consumed by the tree step, decoupled from the
/// certificate type so the step can be driven directly in tests.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PolicyFields {
    /// `None` when the certificatePolicies extension is absent.
    pub policies: Option<BTreeSet<Oid>>,
    pub mappings: Vec<PolicyMapping>,
    pub require_explicit_policy: Option<u64>,
    pub inhibit_policy_mapping: Option<u64>,
}

impl PolicyFields {
    pub fn of(cert: &Certificate) -> Self {
        let ext = cert.extensions();
        let pc = ext.policy_constraints();
        Self {
            policies: ext.certificate_policies().map(|_| ext.policy_oids()),
            mappings: ext.policy_mappings().to_vec(),
            require_explicit_policy: pc.and_then(|c| c.require_explicit_policy),
            inhibit_policy_mapping: pc.and_then(|c| c.inhibit_policy_mapping),
        }
    }
}

pub fn process_cert(
    state: PolicyState,
    cert: &Certificate,
    is_self_issued: bool,
    is_last: bool,
) -> PolicyState {
    process_fields(state, &PolicyFields::of(cert), is_self_issued, is_last)
}

pub fn process_fields(
    mut state: PolicyState,
    cert: &PolicyFields,
    is_self_issued: bool,
    is_last: bool,
) -> PolicyState {
    let any = oids::any_policy();

    state.tree = match (state.tree.take(), &cert.policies) {
        (Some(mut tree), Some(asserted)) if !asserted.is_empty() => {
            let parents = tree.level(tree.depth);
            let depth_before = tree.depth;
            for policy in asserted.iter().filter(|p| **p != any) {
                let matching: Vec<usize> = parents
                    .iter()
                    .copied()
                    .filter(|&p| tree.nodes[p].expected.contains(policy))
                    .collect();
                if !matching.is_empty() {
                    for p in matching {
                        tree.add(p, policy.clone(), [policy.clone()].into());
                    }
                } else if let Some(&p) =
                    parents.iter().find(|&&p| tree.nodes[p].valid_policy == any)
                {
                    tree.add(p, policy.clone(), [policy.clone()].into());
                }
            }
            if asserted.contains(&any) {
                for &p in &parents {
                    for value in tree.nodes[p].expected.clone() {
                        if !tree.has_child(p, &value) {
                            tree.add(p, value.clone(), [value].into());
                        }
                    }
                }
            }
            tree.depth = depth_before + 1;
            if tree.prune() && !tree.level(tree.depth).is_empty() {
                Some(tree)
            } else {
                None
            }
        }
        _ => None,
    };

    if is_last {
        state.explicit_policy = state.explicit_policy.saturating_sub(1);
        if cert.require_explicit_policy == Some(0) {
            state.explicit_policy = 0;
        }
        return state;
    }

    if let Some(mut tree) = state.tree.take() {
        let mut by_issuer: BTreeMap<&Oid, BTreeSet<Oid>> = BTreeMap::new();
        for m in &cert.mappings {
            by_issuer
                .entry(&m.issuer_domain)
                .or_default()
                .insert(m.subject_domain.clone());
        }
        let level = tree.level(tree.depth);
        let mut alive = true;
        for (issuer_domain, subject_domains) in by_issuer {
            let hits: Vec<usize> = level
                .iter()
                .copied()
                .filter(|&i| tree.nodes[i].valid_policy == *issuer_domain)
                .collect();
            if state.policy_mapping > 0 {
                let mut applied = false;
                if !hits.is_empty() {
                    for i in hits {
                        tree.nodes[i].expected = subject_domains.clone();
                    }
                    applied = true;
                } else if let Some(&any_node) =
                    level.iter().find(|&&i| tree.nodes[i].valid_policy == any)
                {
                    let parent = tree.nodes[any_node]
                        .parent
                        .expect("depth >= 1 after a certificate");
                    tree.add(parent, issuer_domain.clone(), subject_domains.clone());
                    applied = true;
                }
                if applied {
                    for sd in &subject_domains {
                        state.mappings_applied.push(PolicyMapping {
                            issuer_domain: issuer_domain.clone(),
                            subject_domain: sd.clone(),
                        });
                    }
                }
            } else {
                for i in hits {
                    tree.nodes[i].alive = false;
                }
                alive = tree.prune() && !tree.level(tree.depth).is_empty();
                if !alive {
                    break;
                }
            }
        }
        state.tree = if alive { Some(tree) } else { None };
    }

    if !is_self_issued {
        state.explicit_policy = state.explicit_policy.saturating_sub(1);
        state.policy_mapping = state.policy_mapping.saturating_sub(1);
    }
    if let Some(skip) = cert.require_explicit_policy {
        state.explicit_policy = state.explicit_policy.min(skip);
    }
    if let Some(skip) = cert.inhibit_policy_mapping {
        state.policy_mapping = state.policy_mapping.min(skip);
    }
    state
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolicyOutcome {
    pub ok: bool,
    /// With an acceptable set: the subset of it the path is valid under.
    /// Without: the chain's authorized policies (may contain anyPolicy).
    pub authorized_set: BTreeSet<Oid>,
    pub mappings_applied: Vec<PolicyMapping>,
}

/// Decides the policy verdict after the whole chain has been processed.
///
/// With a nonempty acceptable set the answer is on/off under that set: the
/// path must be valid under at least one of its policies. With an empty set
/// the standard rule applies (explicit-policy counter still positive, or a
/// non-null tree).
pub fn final_verdict(state: &PolicyState, req: &CprRequirement) -> PolicyOutcome {
    let any = oids::any_policy();
    let authorized = state
        .tree
        .as_ref()
        .map(PolicyTree::authorized_policies)
        .unwrap_or_default();
    let (ok, authorized_set) = if req.acceptable_set.is_empty() {
        (
            state.explicit_policy > 0 || state.tree.is_some(),
            authorized,
        )
    } else {
        let subset: BTreeSet<Oid> = if authorized.contains(&any) {
            req.acceptable_set.clone()
        } else {
            authorized
                .intersection(&req.acceptable_set)
                .cloned()
                .collect()
        };
        (!subset.is_empty(), subset)
    };
    PolicyOutcome {
        ok,
        authorized_set: if ok { authorized_set } else { BTreeSet::new() },
        mappings_applied: state.mappings_applied.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(n: u64) -> Oid {
        Oid::from_arcs(&[1, 2, 3, n])
    }

    fn fields(policies: &[Oid]) -> PolicyFields {
        PolicyFields {
            policies: Some(policies.iter().cloned().collect()),
            ..Default::default()
        }
    }

    fn run(req: &CprRequirement, chain: &[PolicyFields]) -> PolicyOutcome {
        let n = chain.len();
        let state = chain
            .iter()
            .enumerate()
            .fold(init_state(req, n), |s, (i, c)| {
                process_fields(s, c, false, i + 1 == n)
            });
        final_verdict(&state, req)
    }

    #[test]
    fn init_counters() {
        let s = init_state(&CprRequirement::any_policy(), 3);
        assert_eq!((s.explicit_policy, s.policy_mapping), (4, 4));
        assert!(s.tree.is_some());
        let s = init_state(&CprRequirement::strict(BTreeSet::new(), true, false), 3);
        assert_eq!(s.explicit_policy, 0);
        let s = init_state(&CprRequirement::strict(BTreeSet::new(), false, true), 3);
        assert_eq!(s.policy_mapping, 0);
    }

    #[test]
    fn all_any_policy_chain() {
        let any = oids::any_policy();
        let chain = vec![
            fields(std::slice::from_ref(&any)),
            fields(std::slice::from_ref(&any)),
            fields(&[any]),
        ];
        let req = CprRequirement::strict([p(1)].into(), false, false);
        let out = run(&req, &chain);
        assert!(out.ok);
        assert_eq!(out.authorized_set, [p(1)].into());
    }

    #[test]
    fn acceptable_set_intersection() {
        let chain = vec![fields(&[p(1), p(2)]), fields(&[p(1), p(2)])];
        let req = CprRequirement::strict([p(2), p(3)].into(), false, false);
        let out = run(&req, &chain);
        assert!(out.ok);
        assert_eq!(out.authorized_set, [p(2)].into());
        let req = CprRequirement::strict([p(3)].into(), false, false);
        assert!(!run(&req, &chain).ok);
    }

    #[test]
    fn missing_policies_nulls_tree() {
        let chain = vec![fields(&[p(1)]), PolicyFields::default()];
        assert!(run(&CprRequirement::any_policy(), &chain).ok);
        assert!(
            !run(
                &CprRequirement::strict(BTreeSet::new(), true, false),
                &chain
            )
            .ok
        );
    }

    #[test]
    fn mapping_and_inhibit() {
        let ca = PolicyFields {
            policies: Some([p(1)].into()),
            mappings: vec![PolicyMapping {
                issuer_domain: p(1),
                subject_domain: p(2),
            }],
            ..Default::default()
        };
        let chain = vec![ca, fields(&[p(2)])];
        let req = CprRequirement::strict([p(1)].into(), false, false);
        let out = run(&req, &chain);
        assert!(out.ok);
        assert_eq!(out.authorized_set, [p(1)].into());
        assert_eq!(
            out.mappings_applied,
            vec![PolicyMapping {
                issuer_domain: p(1),
                subject_domain: p(2)
            }]
        );

        let inhibited = CprRequirement::strict([p(1)].into(), false, true);
        let out = run(&inhibited, &chain);
        assert!(!out.ok);
        assert!(out.mappings_applied.is_empty());
    }

    #[test]
    fn in_chain_require_explicit() {
        let ca = PolicyFields {
            require_explicit_policy: Some(0),
            ..fields(&[p(1)])
        };
        let chain = vec![ca, PolicyFields::default()];
        assert!(!run(&CprRequirement::any_policy(), &chain).ok);
    }

    #[test]
    fn weak_resolution() {
        let table = UsageTable::new([("e-mail".to_string(), [p(7)].into())].into()).unwrap();
        assert_eq!(resolve_weak("e-mail", &table).unwrap(), [p(7)].into());
        assert_eq!(resolve_weak("E-Mail", &table).unwrap(), [p(7)].into());
        assert_eq!(
            resolve_weak("fax", &table),
            Err(PpmError::UnknownUsage("fax".into()))
        );
        assert_eq!(resolve_weak("default", &table).unwrap(), BTreeSet::new());
        assert!(UsageTable::new([("x".to_string(), BTreeSet::new())].into()).is_err());
        let eff = effective_requirement(&CprRequirement::weak("e-mail"), &table).unwrap();
        assert_eq!(eff, CprRequirement::strict([p(7)].into(), false, false));
    }

    #[test]
    fn requirement_validation() {
        let mut mixed = CprRequirement::weak("e-mail");
        mixed.acceptable_set.insert(p(1));
        assert_eq!(mixed.validate(), Err(PpmError::MixedRequirement));
        assert!(CprRequirement::any_policy().is_any_policy());
        assert!(!CprRequirement::weak("default").is_any_policy());
    }
}
