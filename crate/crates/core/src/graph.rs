//! DAG algorithms: validation, deterministic topological order,
//! d-separation, backdoor adjustment-set selection, and DOT export.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tabular::ColumnRole;

/// Directed acyclic graph over named, role-tagged nodes. Immutable after
/// validation; all queries are pure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dag {
    names: Vec<String>,
    roles: Vec<ColumnRole>,
    parents: Vec<Vec<usize>>,
    children: Vec<Vec<usize>>,
}

impl Dag {
    pub fn new(
        names: Vec<String>,
        roles: Vec<ColumnRole>,
        edges: &[(usize, usize)],
    ) -> Result<Dag> {
        let k = names.len();
        if roles.len() != k {
            return Err(Error::Invariant("names/roles length mismatch".into()));
        }
        for (i, a) in names.iter().enumerate() {
            if names[..i].contains(a) {
                return Err(Error::NamedColumn {
                    name: a.clone(),
                    problem: "appears more than once in the graph".into(),
                });
            }
        }
        let mut parents = vec![Vec::new(); k];
        let mut children = vec![Vec::new(); k];
        for &(from, to) in edges {
            if from >= k || to >= k {
                return Err(Error::Invariant(format!(
                    "edge ({from}, {to}) references a missing node"
                )));
            }
            if from == to {
                return Err(Error::Invariant(format!("self loop on `{}`", names[from])));
            }
            if children[from].contains(&to) {
                continue;
            }
            children[from].push(to);
            parents[to].push(from);
        }
        for list in parents.iter_mut().chain(children.iter_mut()) {
            list.sort_unstable();
        }
        let dag = Dag {
            names,
            roles,
            parents,
            children,
        };
        dag.check_acyclic()?;
        Ok(dag)
    }

    fn check_acyclic(&self) -> Result<()> {
        let k = self.len();
        let mut indeg: Vec<usize> = self.parents.iter().map(Vec::len).collect();
        let mut queue: VecDeque<usize> =
            (0..k).filter(|&v| indeg[v] == 0).collect();
        let mut seen = 0;
        while let Some(v) = queue.pop_front() {
            seen += 1;
            for &c in &self.children[v] {
                indeg[c] -= 1;
                if indeg[c] == 0 {
                    queue.push_back(c);
                }
            }
        }
        if seen == k {
            Ok(())
        } else {
            let cycle: Vec<String> = (0..k)
                .filter(|&v| indeg[v] > 0)
                .map(|v| self.names[v].clone())
                .collect();
            Err(Error::Cycle { nodes: cycle })
        }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn roles(&self) -> &[ColumnRole] {
        &self.roles
    }

    pub fn name(&self, v: usize) -> &str {
        &self.names[v]
    }

    pub fn role(&self, v: usize) -> ColumnRole {
        self.roles[v]
    }

    pub fn node_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn require_node(&self, name: &str) -> Result<usize> {
        self.node_index(name)
            .ok_or_else(|| Error::UnknownNode(name.to_string()))
    }

    pub fn parents_of(&self, v: usize) -> &[usize] {
        &self.parents[v]
    }

    pub fn children_of(&self, v: usize) -> &[usize] {
        &self.children[v]
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for v in 0..self.len() {
            for &c in &self.children[v] {
                out.push((v, c));
            }
        }
        out.sort_unstable();
        out
    }

    pub fn has_edge(&self, from: usize, to: usize) -> bool {
        self.children[from].binary_search(&to).is_ok()
    }

    /// Deterministic topological order: lexicographic by node name among
    /// the ready nodes at each step.
    pub fn topological_order(&self) -> Vec<usize> {
        let k = self.len();
        let mut indeg: Vec<usize> = self.parents.iter().map(Vec::len).collect();
        let mut placed = vec![false; k];
        let mut order = Vec::with_capacity(k);
        for _ in 0..k {
            let next = (0..k)
                .filter(|&v| !placed[v] && indeg[v] == 0)
                .min_by(|&a, &b| self.names[a].cmp(&self.names[b]))
                .expect("validated DAG always has a ready node");
            placed[next] = true;
            order.push(next);
            for &c in &self.children[next] {
                indeg[c] -= 1;
            }
        }
        order
    }

    /// Mask of nodes reachable from `starts` along child edges, excluding the
    /// start nodes themselves.
    pub fn descendants_mask(&self, starts: &[usize]) -> Vec<bool> {
        self.reach_mask(starts, |v| &self.children[v])
    }

    /// Mask of nodes reachable from `starts` along parent edges, excluding
    /// the start nodes themselves.
    pub fn ancestors_mask(&self, starts: &[usize]) -> Vec<bool> {
        self.reach_mask(starts, |v| &self.parents[v])
    }

    fn reach_mask<'a>(&'a self, starts: &[usize], step: impl Fn(usize) -> &'a [usize]) -> Vec<bool> {
        let mut mask = vec![false; self.len()];
        let mut queue: VecDeque<usize> = starts.iter().copied().collect();
        while let Some(v) = queue.pop_front() {
            for &w in step(v) {
                if !mask[w] {
                    mask[w] = true;
                    queue.push_back(w);
                }
            }
        }
        mask
    }

    /// d-separation of `x` and `y` given `given`, via the ancestral-subgraph
    /// moralization construction.
    pub fn d_separated(&self, x: usize, y: usize, given: &[usize]) -> Result<bool> {
        let k = self.len();
        if x >= k || y >= k || given.iter().any(|&z| z >= k) {
            return Err(Error::UnknownNode("index out of range".into()));
        }
        if x == y || given.contains(&x) || given.contains(&y) {
            return Err(Error::Invariant(
                "d-separation query nodes must be distinct and not conditioned on".into(),
            ));
        }
        Ok(self.d_separated_unchecked(x, y, given))
    }

    fn d_separated_unchecked(&self, x: usize, y: usize, given: &[usize]) -> bool {
        let k = self.len();
        let mut seeds = vec![x, y];
        seeds.extend_from_slice(given);
        let mut relevant = self.ancestors_mask(&seeds);
        for &s in &seeds {
            relevant[s] = true;
        }

        // Moral graph of the induced ancestral subgraph: keep every edge as
        // undirected and marry co-parents of each included child.
        let mut adj = vec![Vec::new(); k];
        let connect = |a: usize, b: usize, adj: &mut Vec<Vec<usize>>| {
            if !adj[a].contains(&b) {
                adj[a].push(b);
                adj[b].push(a);
            }
        };
        for v in 0..k {
            if !relevant[v] {
                continue;
            }
            let ps = &self.parents[v];
            for &p in ps {
                if relevant[p] {
                    connect(p, v, &mut adj);
                }
            }
            for (ai, &a) in ps.iter().enumerate() {
                for &b in &ps[ai + 1..] {
                    if relevant[a] && relevant[b] {
                        connect(a, b, &mut adj);
                    }
                }
            }
        }

        let mut blocked = vec![false; k];
        for &z in given {
            blocked[z] = true;
        }
        let mut visited = vec![false; k];
        let mut queue = VecDeque::new();
        visited[x] = true;
        queue.push_back(x);
        while let Some(v) = queue.pop_front() {
            if v == y {
                return false;
            }
            for &w in &adj[v] {
                if !visited[w] && !blocked[w] {
                    visited[w] = true;
                    queue.push_back(w);
                }
            }
        }
        true
    }

    /// Graph with the outgoing edges of `v` removed; used by the backdoor
    /// criterion check.
    fn without_outgoing(&self, v: usize) -> Dag {
        let mut g = self.clone();
        for &c in &self.children[v] {
            g.parents[c].retain(|&p| p != v);
        }
        g.children[v].clear();
        g
    }

    /// Backdoor adjustment set for `treatment -> outcome`.
    ///
    /// Candidate set: every parameter-role node except the treatment and any
    /// descendant of the treatment (mediators are barred structurally so the
    /// estimated quantity is the total effect). The candidate is validated by
    /// d-separation in the treatment-outgoing-removed graph, then greedily
    /// minimized in ascending node order.
    pub fn backdoor_adjustment_set(
        &self,
        treatment: &str,
        outcome: &str,
    ) -> Result<AdjustmentReport> {
        let t = self.require_node(treatment)?;
        let y = self.require_node(outcome)?;
        if t == y {
            return Err(Error::Invariant(
                "treatment and outcome must be distinct".into(),
            ));
        }
        let ancestors_of_t = self.ancestors_mask(&[t]);
        if ancestors_of_t[y] {
            return Err(Error::RoleInconsistency(format!(
                "outcome `{outcome}` is an ancestor of treatment `{treatment}`"
            )));
        }

        let descendants = self.descendants_mask(&[t]);
        let mut candidate: Vec<usize> = (0..self.len())
            .filter(|&v| {
                v != t && v != y && self.roles[v] == ColumnRole::Parameter && !descendants[v]
            })
            .collect();

        let backdoor_graph = self.without_outgoing(t);
        let blocks = |set: &[usize]| -> bool {
            if set.contains(&y) {
                return false;
            }
            backdoor_graph.d_separated_unchecked(t, y, set)
        };

        let mut notes = Vec::new();
        if !blocks(&candidate) {
            notes.push(
                "candidate set of non-descendant parameters does not block every backdoor path"
                    .to_string(),
            );
            return Ok(AdjustmentReport {
                treatment: treatment.to_string(),
                outcome: outcome.to_string(),
                set: candidate.iter().map(|&v| self.names[v].clone()).collect(),
                valid: false,
                notes,
            });
        }

        // Greedy minimization: repeatedly try to drop members in ascending
        // node order until no single drop keeps the criterion.
        loop {
            let mut dropped = false;
            for i in 0..candidate.len() {
                let mut trial = candidate.clone();
                trial.remove(i);
                if blocks(&trial) {
                    candidate = trial;
                    dropped = true;
                    break;
                }
            }
            if !dropped {
                break;
            }
        }

        notes.push("criterion satisfied".to_string());
        Ok(AdjustmentReport {
            treatment: treatment.to_string(),
            outcome: outcome.to_string(),
            set: candidate.iter().map(|&v| self.names[v].clone()).collect(),
            valid: true,
            notes,
        })
    }

    /// DOT rendering with role-based node styles; byte-stable for a given
    /// graph.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph causal {\n");
        for v in 0..self.len() {
            let style = match self.roles[v] {
                ColumnRole::Parameter => "shape=box",
                ColumnRole::Intermediate => "shape=ellipse",
                ColumnRole::Outcome => "shape=ellipse, peripheries=2",
                ColumnRole::Ignore => "shape=plaintext",
            };
            out.push_str(&format!("  \"{}\" [{}];\n", self.names[v], style));
        }
        for (from, to) in self.edges() {
            out.push_str(&format!(
                "  \"{}\" -> \"{}\";\n",
                self.names[from], self.names[to]
            ));
        }
        out.push_str("}\n");
        out
    }
}

/// Result of [`Dag::backdoor_adjustment_set`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdjustmentReport {
    pub treatment: String,
    pub outcome: String,
    pub set: Vec<String>,
    pub valid: bool,
    pub notes: Vec<String>,
}
