//! All-simple-paths enumeration on an abstract issuer graph.
//!
//! Entities are numbered nodes; an edge `(issuer, subject)` stands for one
//! certificate. A chain for target edge `t` is a simple entity path starting
//! at an anchor and ending with `t`, where every step is an edge.

use std::collections::BTreeSet;

/// A chain as the sequence of edge indices, anchor-issued edge first.
pub type EdgePath = Vec<usize>;

/// Every chain from any anchor to `target` using at most `max_len` edges.
/// Exhaustive: extends every partial walk by every edge, filtering on simplicity.
pub fn all_simple_paths(
    edges: &[(usize, usize)],
    anchors: &BTreeSet<usize>,
    target: usize,
    max_len: usize,
) -> BTreeSet<(usize, EdgePath)> {
    let mut found = BTreeSet::new();
    for &anchor in anchors {
        let mut stack: Vec<(Vec<usize>, EdgePath)> = vec![(vec![anchor], Vec::new())];
        while let Some((visited, path)) = stack.pop() {
            if path.last() == Some(&target) {
                found.insert((anchor, path.clone()));
            }
            if path.len() == max_len {
                continue;
            }
            let here = *visited.last().expect("walk starts at the anchor");
            for (i, &(issuer, subject)) in edges.iter().enumerate() {
                if issuer != here || visited.contains(&subject) {
                    continue;
                }
                // The target certificate ends the chain; it never appears mid-path.
                if path.contains(&target) {
                    continue;
                }
                let mut v = visited.clone();
                v.push(subject);
                let mut p = path.clone();
                p.push(i);
                stack.push((v, p));
            }
        }
    }
    found
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_cycle() {
        // 0 <-> 1 cross-certified, both anchors; edge 2 is the target 1 -> 2.
        let edges = [(0, 1), (1, 0), (1, 2)];
        let anchors: BTreeSet<usize> = [0, 1].into();
        let paths = all_simple_paths(&edges, &anchors, 2, 8);
        let expected: BTreeSet<(usize, EdgePath)> = [(0, vec![0, 2]), (1, vec![2])].into();
        assert_eq!(paths, expected);
    }

    #[test]
    fn length_cap() {
        let edges = [(0, 1), (1, 2), (2, 3)];
        let anchors: BTreeSet<usize> = [0].into();
        assert_eq!(all_simple_paths(&edges, &anchors, 2, 2).len(), 0);
        assert_eq!(all_simple_paths(&edges, &anchors, 2, 3).len(), 1);
    }
}
