//! Chain structures: a DAG over label nodes plus a topological order.
//!
//! Node indices are 0-based in the API and 1-based in the text format.

use std::fmt::Write as _;

use num_bigint::BigUint;

use crate::error::{contract, Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ChainStructure {
    parents: Vec<Vec<usize>>,
    order: Vec<usize>,
}

fn check_permutation(order: &[usize]) -> Result<()> {
    let mut seen = vec![false; order.len()];
    for &j in order {
        if j >= order.len() || seen[j] {
            return Err(contract(format!("{order:?} is not a permutation of 0..{}", order.len())));
        }
        seen[j] = true;
    }
    Ok(())
}

impl ChainStructure {
    /// Fully connected chain: the node at position k has every earlier node
    /// as a parent, listed in chain order.
    pub fn full_cascade(order: &[usize]) -> Result<Self> {
        check_permutation(order)?;
        let mut parents = vec![Vec::new(); order.len()];
        for (k, &j) in order.iter().enumerate() {
            parents[j] = order[..k].to_vec();
        }
        Ok(Self { parents, order: order.to_vec() })
    }

    pub fn full_cascade_identity(n_labels: usize) -> Self {
        Self::full_cascade(&(0..n_labels).collect::<Vec<_>>()).expect("identity is a permutation")
    }

    /// Each node linked only to its predecessor in `order`.
    pub fn markov_chain(order: &[usize]) -> Result<Self> {
        check_permutation(order)?;
        let mut parents = vec![Vec::new(); order.len()];
        for w in order.windows(2) {
            parents[w[1]] = vec![w[0]];
        }
        Ok(Self { parents, order: order.to_vec() })
    }

    /// No edges: the binary relevance shape.
    pub fn empty(n_labels: usize) -> Self {
        Self { parents: vec![Vec::new(); n_labels], order: (0..n_labels).collect() }
    }

    /// Validates an explicit DAG. Every parent must precede its child in
    /// `order`; otherwise the error names the offending edge, or a cycle when
    /// one exists.
    pub fn from_parent_sets(parents: Vec<Vec<usize>>, order: Vec<usize>) -> Result<Self> {
        let n = parents.len();
        if order.len() != n {
            return Err(contract(format!("order has {} entries for {n} nodes", order.len())));
        }
        check_permutation(&order)?;
        for (j, ps) in parents.iter().enumerate() {
            for (a, &p) in ps.iter().enumerate() {
                if p >= n {
                    return Err(Error::Structure(format!("node {} has out-of-range parent {}", j + 1, p + 1)));
                }
                if p == j {
                    return Err(Error::Structure(format!("node {} lists itself as a parent", j + 1)));
                }
                if ps[..a].contains(&p) {
                    return Err(Error::Structure(format!("node {} lists parent {} twice", j + 1, p + 1)));
                }
            }
        }
        if let Some(cycle) = find_cycle(&parents) {
            let names: Vec<String> = cycle.iter().map(|j| (j + 1).to_string()).collect();
            return Err(Error::Structure(format!("cycle {}", names.join(" -> "))));
        }
        let mut pos = vec![0; n];
        for (k, &j) in order.iter().enumerate() {
            pos[j] = k;
        }
        for (j, ps) in parents.iter().enumerate() {
            for &p in ps {
                if pos[p] > pos[j] {
                    return Err(Error::Structure(format!(
                        "parent {} of node {} comes after it in the order",
                        p + 1,
                        j + 1
                    )));
                }
            }
        }
        Ok(Self { parents, order })
    }

    /// Builds a structure from parent sets, deriving a topological order
    /// (Kahn's algorithm, smallest ready index first).
    pub fn from_parents_auto_order(parents: Vec<Vec<usize>>) -> Result<Self> {
        let n = parents.len();
        let mut indeg: Vec<usize> = parents.iter().map(Vec::len).collect();
        let mut children = vec![Vec::new(); n];
        for (j, ps) in parents.iter().enumerate() {
            for &p in ps {
                if p >= n {
                    return Err(Error::Structure(format!("node {} has out-of-range parent {}", j + 1, p + 1)));
                }
                children[p].push(j);
            }
        }
        let mut ready: std::collections::BTreeSet<usize> = (0..n).filter(|&j| indeg[j] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(j) = ready.pop_first() {
            order.push(j);
            for &c in &children[j] {
                indeg[c] -= 1;
                if indeg[c] == 0 {
                    ready.insert(c);
                }
            }
        }
        if order.len() < n {
            // leave the error message to the full validation
            order.extend((0..n).filter(|j| !order.contains(j)).collect::<Vec<_>>());
        }
        Self::from_parent_sets(parents, order)
    }

    #[inline]
    pub fn n_labels(&self) -> usize {
        self.parents.len()
    }

    #[inline]
    pub fn parents(&self, j: usize) -> &[usize] {
        &self.parents[j]
    }

    pub fn parent_sets(&self) -> &[Vec<usize>] {
        &self.parents
    }

    #[inline]
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn n_edges(&self) -> usize {
        self.parents.iter().map(Vec::len).sum()
    }

    /// Position of each node in the order.
    pub fn positions(&self) -> Vec<usize> {
        let mut pos = vec![0; self.order.len()];
        for (k, &j) in self.order.iter().enumerate() {
            pos[j] = k;
        }
        pos
    }

    /// Serialises as one `j: p,p,...` line per node followed by an
    /// `order:` line, all 1-based.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (j, ps) in self.parents.iter().enumerate() {
            let list: Vec<String> = ps.iter().map(|p| (p + 1).to_string()).collect();
            let _ = writeln!(s, "{}: {}", j + 1, list.join(","));
        }
        let order: Vec<String> = self.order.iter().map(|p| (p + 1).to_string()).collect();
        let _ = writeln!(s, "order: {}", order.join(","));
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut parents: Vec<Vec<usize>> = Vec::new();
        let mut order = None;
        for (ln, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            let fail = |m: String| Error::Format { line: ln + 1, message: m };
            let (head, tail) = line.split_once(':').ok_or_else(|| fail(format!("missing ':' in {line:?}")))?;
            let list = parse_index_list(tail).map_err(fail)?;
            if head.trim() == "order" {
                order = Some(list);
            } else {
                let j: usize = head.trim().parse().map_err(|_| fail(format!("bad node id {head:?}")))?;
                if j != parents.len() + 1 {
                    return Err(fail(format!("expected node {}, found {j}", parents.len() + 1)));
                }
                parents.push(list);
            }
        }
        let order = order.ok_or(Error::Format { line: 0, message: "missing order line".into() })?;
        Self::from_parent_sets(parents, order)
    }
}

/// Parses "1,2,3" (1-based) into 0-based indices; empty means none.
pub(crate) fn parse_index_list(s: &str) -> std::result::Result<Vec<usize>, String> {
    let s = s.trim();
    if s.is_empty() {
        return Ok(Vec::new());
    }
    s.split(|c| c == ',' || c == ' ')
        .filter(|t| !t.is_empty())
        .map(|t| match t.trim().parse::<usize>() {
            Ok(v) if v >= 1 => Ok(v - 1),
            _ => Err(format!("bad 1-based index {t:?}")),
        })
        .collect()
}

/// Returns the nodes of some directed cycle (following parent links), if any.
fn find_cycle(parents: &[Vec<usize>]) -> Option<Vec<usize>> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        New,
        Active,
        Done,
    }
    let n = parents.len();
    let mut mark = vec![Mark::New; n];
    let mut stack: Vec<(usize, usize)> = Vec::new();
    for start in 0..n {
        if mark[start] != Mark::New {
            continue;
        }
        stack.push((start, 0));
        mark[start] = Mark::Active;
        while let Some(&mut (node, ref mut next)) = stack.last_mut() {
            if *next < parents[node].len() {
                let p = parents[node][*next];
                *next += 1;
                match mark[p] {
                    Mark::New => {
                        mark[p] = Mark::Active;
                        stack.push((p, 0));
                    }
                    Mark::Active => {
                        let at = stack.iter().position(|&(v, _)| v == p).unwrap();
                        let mut cycle: Vec<usize> = stack[at..].iter().map(|&(v, _)| v).collect();
                        cycle.push(p);
                        return Some(cycle);
                    }
                    Mark::Done => {}
                }
            } else {
                mark[node] = Mark::Done;
                stack.pop();
            }
        }
    }
    None
}

/// `L!`, the number of chain orders over `L` labels.
pub fn count_orders(n_labels: usize) -> BigUint {
    (1..=n_labels).fold(BigUint::from(1u32), |acc, k| acc * BigUint::from(k))
}

/// `2^(L(L-1)/2)`: edge subsets consistent with one fixed total order.
pub fn count_dags(n_labels: usize) -> BigUint {
    let edges = n_labels * n_labels.saturating_sub(1) / 2;
    BigUint::from(1u32) << edges
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn one_based(s: &ChainStructure) -> Vec<Vec<usize>> {
        s.parent_sets().iter().map(|ps| ps.iter().map(|p| p + 1).collect()).collect()
    }

    #[test]
    fn cascade_over_four() {
        let s = ChainStructure::full_cascade(&[0, 1, 2, 3]).unwrap();
        assert_eq!(one_based(&s), vec![vec![], vec![1], vec![1, 2], vec![1, 2, 3]]);
    }

    #[test]
    fn cascade_sizes() {
        assert_eq!(ChainStructure::full_cascade(&[0]).unwrap().n_edges(), 0);
        assert_eq!(ChainStructure::full_cascade_identity(6).n_edges(), 15);
        assert!(ChainStructure::full_cascade(&[0, 0, 1]).is_err());
        assert!(ChainStructure::full_cascade(&[0, 3]).is_err());
    }

    #[test]
    fn markov_and_empty() {
        let s = ChainStructure::markov_chain(&[0, 1, 2]).unwrap();
        assert_eq!(one_based(&s), vec![vec![], vec![1], vec![2]]);
        let e = ChainStructure::empty(4);
        assert_eq!(e.n_edges(), 0);
        assert!(e.parent_sets().iter().all(Vec::is_empty));
    }

    #[test]
    fn order_violation_rejected() {
        // nodes 2 and 3 (1-based) over L=3; 2 has parent 3 but order puts 2 first
        let err = ChainStructure::from_parent_sets(vec![vec![], vec![2], vec![]], vec![0, 1, 2]).unwrap_err();
        assert!(matches!(err, Error::Structure(_)));
    }

    #[test]
    fn cycle_is_named() {
        let err = ChainStructure::from_parent_sets(vec![vec![2], vec![0], vec![1]], vec![0, 1, 2]).unwrap_err();
        let Error::Structure(msg) = err else { panic!() };
        assert!(msg.starts_with("cycle"), "{msg}");
        let err = ChainStructure::from_parent_sets(vec![vec![0]], vec![0]).unwrap_err();
        assert!(matches!(err, Error::Structure(_)));
    }

    #[test]
    fn auto_order() {
        let s = ChainStructure::from_parents_auto_order(vec![vec![2], vec![], vec![1]]).unwrap();
        assert_eq!(s.order(), &[1, 2, 0]);
        assert!(ChainStructure::from_parents_auto_order(vec![vec![1], vec![0]]).is_err());
    }

    #[test]
    fn counts() {
        assert_eq!(count_orders(6), BigUint::from(720u32));
        assert_eq!(count_dags(6), BigUint::from(32768u32));
        assert_eq!(count_orders(1), BigUint::from(1u32));
        assert_eq!(count_dags(1), BigUint::from(1u32));
        assert_eq!(count_orders(3), BigUint::from(6u32));
        assert_eq!(count_dags(3), BigUint::from(8u32));
        assert_eq!(count_orders(25).to_string(), "15511210043330985984000000");
    }

    #[test]
    fn text_round_trip() {
        let s = ChainStructure::from_parent_sets(vec![vec![], vec![0], vec![0, 1]], vec![0, 1, 2]).unwrap();
        let text = s.to_text();
        assert_eq!(text, "1: \n2: 1\n3: 1,2\norder: 1,2,3\n");
        assert_eq!(ChainStructure::from_text(&text).unwrap(), s);
    }

    /// Enumerates every edge subset consistent with the identity order.
    fn enumerate_dags(l: usize) -> Vec<ChainStructure> {
        let pairs: Vec<(usize, usize)> = (0..l).flat_map(|j| (0..j).map(move |p| (p, j))).collect();
        (0u64..1 << pairs.len())
            .map(|mask| {
                let mut parents = vec![Vec::new(); l];
                for (b, &(p, j)) in pairs.iter().enumerate() {
                    if mask >> b & 1 == 1 {
                        parents[j].push(p);
                    }
                }
                ChainStructure::from_parent_sets(parents, (0..l).collect()).unwrap()
            })
            .collect()
    }

    #[test]
    fn enumeration_matches_dag_count() {
        for l in 1..=4 {
            let all = enumerate_dags(l);
            let distinct: std::collections::HashSet<_> = all.iter().collect();
            assert_eq!(BigUint::from(distinct.len()), count_dags(l), "L={l}");
        }
    }

    proptest! {
        #[test]
        fn builders_validate(order in Just((0..7usize).collect::<Vec<_>>()).prop_shuffle()) {
            let l = order.len();
            let c = ChainStructure::full_cascade(&order).unwrap();
            prop_assert_eq!(c.n_edges(), l * (l - 1) / 2);
            prop_assert!(ChainStructure::from_parent_sets(c.parent_sets().to_vec(), order.clone()).is_ok());
            let m = ChainStructure::markov_chain(&order).unwrap();
            prop_assert_eq!(m.n_edges(), l - 1);
            prop_assert!(ChainStructure::from_parent_sets(m.parent_sets().to_vec(), order.clone()).is_ok());
            prop_assert_eq!(ChainStructure::from_text(&c.to_text()).unwrap(), c);
        }
    }
}
