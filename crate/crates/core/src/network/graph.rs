use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Undirected conflict graph over users.
///
/// Each user keeps a sorted, duplicate-free neighbor list. Edges are always
/// inserted in both directions and self-loops are rejected, so the relation
/// stays symmetric and irreflexive.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InterferenceGraph {
    adjacency: Vec<Vec<usize>>,
}

impl InterferenceGraph {
    /// A graph with `num_users` isolated vertices.
    pub fn empty(num_users: usize) -> Self {
        Self { adjacency: vec![Vec::new(); num_users] }
    }

    pub fn complete(num_users: usize) -> Self {
        let adjacency = (0..num_users).map(|n| (0..num_users).filter(|&r| r != n).collect()).collect();
        Self { adjacency }
    }

    pub fn from_edges(num_users: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut graph = Self::empty(num_users);
        for &(a, b) in edges {
            graph.add_edge(a, b)?;
        }
        Ok(graph)
    }

    /// Builds from explicit neighbor lists, which must already be symmetric.
    pub fn from_adjacency(adjacency: Vec<Vec<usize>>) -> Result<Self> {
        let n = adjacency.len();
        let mut graph = Self::empty(n);
        for (a, list) in adjacency.iter().enumerate() {
            for &b in list {
                if b >= n {
                    return Err(Error::OutOfRange { what: "neighbor", index: b, limit: n });
                }
                if !adjacency[b].contains(&a) {
                    return Err(Error::invalid(format!(
                        "adjacency is not symmetric: {b} in list of {a} but not vice versa"
                    )));
                }
                graph.add_edge(a, b)?;
            }
        }
        Ok(graph)
    }

    /// Inserts the edge `{a, b}`; inserting an existing edge is a no-op.
    pub fn add_edge(&mut self, a: usize, b: usize) -> Result<()> {
        let n = self.num_users();
        for idx in [a, b] {
            if idx >= n {
                return Err(Error::OutOfRange { what: "user", index: idx, limit: n });
            }
        }
        if a == b {
            return Err(Error::invalid(format!("self-loop on user {a}")));
        }
        insert_sorted(&mut self.adjacency[a], b);
        insert_sorted(&mut self.adjacency[b], a);
        Ok(())
    }

    /// Appends a vertex connected to `neighbors` and returns its index.
    pub fn add_user(&mut self, neighbors: &[usize]) -> Result<usize> {
        let id = self.adjacency.len();
        self.adjacency.push(Vec::new());
        for &r in neighbors {
            if let Err(e) = self.add_edge(id, r) {
                // roll back so a failed insertion leaves the graph untouched
                for list in &mut self.adjacency {
                    list.retain(|&x| x != id);
                }
                self.adjacency.pop();
                return Err(e);
            }
        }
        Ok(id)
    }

    pub fn num_users(&self) -> usize {
        self.adjacency.len()
    }

    pub fn neighbors(&self, n: usize) -> &[usize] {
        &self.adjacency[n]
    }

    pub fn degree(&self, n: usize) -> usize {
        self.adjacency[n].len()
    }

    pub fn max_degree(&self) -> usize {
        self.adjacency.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn num_edges(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        a < self.num_users() && self.adjacency[a].binary_search(&b).is_ok()
    }

    /// Every edge once, as `(low, high)` pairs in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(a, list)| list.iter().filter(move |&&b| b > a).map(move |&b| (a, b)))
    }

    /// No two members of `users` are adjacent.
    pub fn is_independent_set(&self, users: &[usize]) -> bool {
        users.iter().enumerate().all(|(i, &a)| users[i + 1..].iter().all(|&b| !self.has_edge(a, b)))
    }

    /// Symmetric, irreflexive, sorted and duplicate-free.
    pub fn is_well_formed(&self) -> bool {
        self.adjacency.iter().enumerate().all(|(a, list)| {
            list.windows(2).all(|w| w[0] < w[1])
                && list.iter().all(|&b| b != a && b < self.num_users() && self.has_edge(b, a))
        })
    }

    /// Relabels users so that old user `n` becomes `perm[n]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.num_users() {
            return Err(Error::invalid("permutation length differs from user count"));
        }
        let mut graph = Self::empty(self.num_users());
        for (a, b) in self.edges() {
            graph.add_edge(perm[a], perm[b])?;
        }
        Ok(graph)
    }
}

fn insert_sorted(list: &mut Vec<usize>, value: usize) {
    if let Err(pos) = list.binary_search(&value) {
        list.insert(pos, value);
    }
}
