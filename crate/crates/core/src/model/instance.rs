use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::distribution::Distribution;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InstanceKind {
    GeneralGraph,
    Bipartite,
    Transversal,
    BudgetAdditive,
    SingleChoice,
    PartitionMatroid,
}

impl InstanceKind {
    /// Buyer/item structure: edges go from a buyer to an item.
    pub fn is_bipartite(self) -> bool {
        matches!(
            self,
            InstanceKind::Bipartite | InstanceKind::Transversal | InstanceKind::BudgetAdditive
        )
    }

    /// Edges are plain elements attached to a label (the element itself, or its group).
    pub fn is_element_set(self) -> bool {
        matches!(self, InstanceKind::SingleChoice | InstanceKind::PartitionMatroid)
    }
}

/// An edge by endpoint index.
///
/// * general graph: `u`, `v` index `vertices`;
/// * bipartite kinds: `u` indexes `buyers`, `v` indexes `items`;
/// * single-choice / partition-matroid: `u == v` indexes `vertices`
///   (the element's own label, or its group label).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
}

/// A validated problem instance.
///
/// Every instance has one value law per *realization element*: per edge,
/// except for transversal instances where each buyer carries the single law
/// shared by all of its edges.
#[derive(Clone, Debug, PartialEq)]
pub struct Instance {
    kind: InstanceKind,
    vertices: Vec<String>,
    buyers: Vec<String>,
    items: Vec<String>,
    edges: Vec<Edge>,
    dists: Vec<Distribution>,
    budgets: Vec<f64>,
    buyer_edges: Vec<Vec<usize>>,
}

/// On-disk form of an instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceDoc {
    pub kind: InstanceKind,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub buyers: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub items: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub vertices: Vec<String>,
    #[serde(default)]
    pub edges: Vec<EdgeDoc>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub budgets: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub buyer_dists: BTreeMap<String, Distribution>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeDoc {
    pub u: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dist: Option<Distribution>,
}

fn names(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

fn check_unique(labels: &[String], what: &str) -> Result<()> {
    let mut seen = HashSet::new();
    for l in labels {
        if !seen.insert(l.as_str()) {
            return Err(Error::Config(format!("duplicate {what} identifier `{l}`")));
        }
    }
    Ok(())
}

impl Instance {
    /// Validates structure, applies budget truncation and indexes adjacency.
    fn build(
        kind: InstanceKind,
        vertices: Vec<String>,
        buyers: Vec<String>,
        items: Vec<String>,
        edges: Vec<Edge>,
        mut dists: Vec<Distribution>,
        budgets: Vec<f64>,
    ) -> Result<Self> {
        check_unique(&vertices, "vertex")?;
        check_unique(&buyers, "buyer")?;
        check_unique(&items, "item")?;
        if kind.is_bipartite() {
            let shared: Vec<&String> = buyers.iter().filter(|b| items.contains(b)).collect();
            if let Some(s) = shared.first() {
                return Err(Error::Config(format!("`{s}` is both a buyer and an item")));
            }
        }
        for (k, e) in edges.iter().enumerate() {
            let ok = if kind.is_bipartite() {
                e.u < buyers.len() && e.v < items.len()
            } else if kind.is_element_set() {
                e.u < vertices.len() && e.u == e.v
            } else {
                e.u < vertices.len() && e.v < vertices.len() && e.u != e.v
            };
            if !ok {
                return Err(Error::Config(format!("edge {k} is a loop or has an endpoint outside the instance")));
            }
        }
        let expected = if kind == InstanceKind::Transversal {
            buyers.len()
        } else {
            edges.len()
        };
        if dists.len() != expected {
            return Err(Error::Config(format!(
                "expected {expected} value distributions, found {}",
                dists.len()
            )));
        }
        for d in &dists {
            d.validate()?;
        }
        if kind == InstanceKind::BudgetAdditive {
            if budgets.len() != buyers.len() {
                return Err(Error::Config("every buyer needs a budget".into()));
            }
            for &c in &budgets {
                if !c.is_finite() || c < 0.0 {
                    return Err(Error::Config(format!("budget {c} is not a nonnegative real")));
                }
            }
            for (d, e) in dists.iter_mut().zip(&edges) {
                *d = d.truncated(budgets[e.u]);
            }
        } else if !budgets.is_empty() {
            return Err(Error::Config("budgets are only meaningful for budget-additive instances".into()));
        }
        let mut buyer_edges = vec![Vec::new(); if kind.is_bipartite() { buyers.len() } else { 0 }];
        if kind.is_bipartite() {
            for (k, e) in edges.iter().enumerate() {
                buyer_edges[e.u].push(k);
            }
        }
        Ok(Self {
            kind,
            vertices,
            buyers,
            items,
            edges,
            dists,
            budgets,
            buyer_edges,
        })
    }

    pub fn general_graph(n: usize, edges: Vec<(usize, usize, Distribution)>) -> Result<Self> {
        let (es, ds) = split(edges);
        Self::build(InstanceKind::GeneralGraph, names("v", n), vec![], vec![], es, ds, vec![])
    }

    pub fn bipartite(buyers: usize, items: usize, edges: Vec<(usize, usize, Distribution)>) -> Result<Self> {
        let (es, ds) = split(edges);
        Self::build(
            InstanceKind::Bipartite,
            vec![],
            names("b", buyers),
            names("i", items),
            es,
            ds,
            vec![],
        )
    }

    pub fn transversal(
        items: usize,
        compatibility: Vec<(usize, usize)>,
        buyer_dists: Vec<Distribution>,
    ) -> Result<Self> {
        let es = compatibility.into_iter().map(|(u, v)| Edge { u, v }).collect();
        Self::build(
            InstanceKind::Transversal,
            vec![],
            names("b", buyer_dists.len()),
            names("i", items),
            es,
            buyer_dists,
            vec![],
        )
    }

    pub fn budget_additive(
        items: usize,
        edges: Vec<(usize, usize, Distribution)>,
        budgets: Vec<f64>,
    ) -> Result<Self> {
        let (es, ds) = split(edges);
        Self::build(
            InstanceKind::BudgetAdditive,
            vec![],
            names("b", budgets.len()),
            names("i", items),
            es,
            ds,
            budgets,
        )
    }

    pub fn single_choice(dists: Vec<Distribution>) -> Result<Self> {
        let n = dists.len();
        let es = (0..n).map(|k| Edge { u: k, v: k }).collect();
        Self::build(InstanceKind::SingleChoice, names("e", n), vec![], vec![], es, dists, vec![])
    }

    /// Elements given as `(group, law)`.
    pub fn partition_matroid(groups: usize, elements: Vec<(usize, Distribution)>) -> Result<Self> {
        let (es, ds) = elements
            .into_iter()
            .map(|(g, d)| (Edge { u: g, v: g }, d))
            .unzip();
        Self::build(InstanceKind::PartitionMatroid, names("g", groups), vec![], vec![], es, ds, vec![])
    }

    pub fn kind(&self) -> InstanceKind {
        self.kind
    }

    pub fn vertices(&self) -> &[String] {
        &self.vertices
    }

    pub fn buyers(&self) -> &[String] {
        &self.buyers
    }

    pub fn items(&self) -> &[String] {
        &self.items
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Laws of the realization elements.
    pub fn dists(&self) -> &[Distribution] {
        &self.dists
    }

    pub fn budgets(&self) -> &[f64] {
        &self.budgets
    }

    pub fn num_elements(&self) -> usize {
        self.dists.len()
    }

    pub fn is_enumerable(&self) -> bool {
        self.dists.iter().all(Distribution::is_enumerable)
    }

    /// Edge indices of buyer `b` (bipartite kinds only).
    pub fn buyer_edges(&self, b: usize) -> &[usize] {
        &self.buyer_edges[b]
    }

    /// Size of the flat vertex space used by graph routines: buyers first,
    /// then items, for bipartite kinds.
    pub fn vertex_count(&self) -> usize {
        if self.kind.is_bipartite() {
            self.buyers.len() + self.items.len()
        } else {
            self.vertices.len()
        }
    }

    /// Endpoints of edge `k` in the flat vertex space.
    pub fn endpoints(&self, k: usize) -> (usize, usize) {
        let e = self.edges[k];
        if self.kind.is_bipartite() {
            (e.u, self.buyers.len() + e.v)
        } else {
            (e.u, e.v)
        }
    }

    /// Human-readable label of edge `k`.
    pub fn edge_label(&self, k: usize) -> String {
        let e = self.edges[k];
        if self.kind.is_bipartite() {
            format!("{}-{}", self.buyers[e.u], self.items[e.v])
        } else if self.kind.is_element_set() {
            format!("e{k}@{}", self.vertices[e.u])
        } else {
            format!("{}-{}", self.vertices[e.u], self.vertices[e.v])
        }
    }

    pub fn from_doc(doc: &InstanceDoc) -> Result<Self> {
        let lookup = |labels: &[String], name: &str, what: &str| -> Result<usize> {
            labels
                .iter()
                .position(|l| l == name)
                .ok_or_else(|| Error::Config(format!("unknown {what} `{name}`")))
        };
        let kind = doc.kind;
        let mut edges = Vec::with_capacity(doc.edges.len());
        let mut dists = Vec::new();
        for ed in &doc.edges {
            let edge = if kind.is_bipartite() {
                let v = ed
                    .v
                    .as_deref()
                    .ok_or_else(|| Error::Config("bipartite edge without item endpoint".into()))?;
                Edge {
                    u: lookup(&doc.buyers, &ed.u, "buyer")?,
                    v: lookup(&doc.items, v, "item")?,
                }
            } else if kind.is_element_set() {
                if ed.v.is_some() {
                    return Err(Error::Config(format!("{kind:?} elements take a single label")));
                }
                let u = lookup(&doc.vertices, &ed.u, "label")?;
                Edge { u, v: u }
            } else {
                let v = ed
                    .v
                    .as_deref()
                    .ok_or_else(|| Error::Config("graph edge without second endpoint".into()))?;
                Edge {
                    u: lookup(&doc.vertices, &ed.u, "vertex")?,
                    v: lookup(&doc.vertices, v, "vertex")?,
                }
            };
            edges.push(edge);
            if kind == InstanceKind::Transversal {
                if ed.dist.is_some() {
                    return Err(Error::Config(
                        "transversal edges inherit the buyer law; use buyer_dists".into(),
                    ));
                }
            } else {
                dists.push(
                    ed.dist
                        .clone()
                        .ok_or_else(|| Error::Config(format!("edge `{}` has no dist", ed.u)))?,
                );
            }
        }
        if kind == InstanceKind::Transversal {
            for b in &doc.buyers {
                dists.push(
                    doc.buyer_dists
                        .get(b)
                        .cloned()
                        .ok_or_else(|| Error::Config(format!("buyer `{b}` has no law")))?,
                );
            }
        } else if !doc.buyer_dists.is_empty() {
            return Err(Error::Config("buyer_dists is only used by transversal instances".into()));
        }
        let mut budgets = Vec::new();
        if kind == InstanceKind::BudgetAdditive {
            for b in &doc.buyers {
                budgets.push(
                    *doc.budgets
                        .get(b)
                        .ok_or_else(|| Error::Config(format!("buyer `{b}` has no budget")))?,
                );
            }
        } else if !doc.budgets.is_empty() {
            return Err(Error::Config("budgets are only meaningful for budget-additive instances".into()));
        }
        Self::build(
            kind,
            doc.vertices.clone(),
            doc.buyers.clone(),
            doc.items.clone(),
            edges,
            dists,
            budgets,
        )
    }

    pub fn to_doc(&self) -> InstanceDoc {
        let transversal = self.kind == InstanceKind::Transversal;
        let edges = self
            .edges
            .iter()
            .enumerate()
            .map(|(k, e)| {
                let (u, v) = if self.kind.is_bipartite() {
                    (self.buyers[e.u].clone(), Some(self.items[e.v].clone()))
                } else if self.kind.is_element_set() {
                    (self.vertices[e.u].clone(), None)
                } else {
                    (self.vertices[e.u].clone(), Some(self.vertices[e.v].clone()))
                };
                EdgeDoc {
                    u,
                    v,
                    dist: (!transversal).then(|| self.dists[k].clone()),
                }
            })
            .collect();
        let budgets = self
            .buyers
            .iter()
            .cloned()
            .zip(self.budgets.iter().copied())
            .collect();
        let buyer_dists = if transversal {
            self.buyers.iter().cloned().zip(self.dists.iter().cloned()).collect()
        } else {
            BTreeMap::new()
        };
        InstanceDoc {
            kind: self.kind,
            buyers: self.buyers.clone(),
            items: self.items.clone(),
            vertices: self.vertices.clone(),
            edges,
            budgets,
            buyer_dists,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: InstanceDoc = serde_json::from_str(text)?;
        Self::from_doc(&doc)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_doc())?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }
}

fn split(edges: Vec<(usize, usize, Distribution)>) -> (Vec<Edge>, Vec<Distribution>) {
    edges
        .into_iter()
        .map(|(u, v, d)| (Edge { u, v }, d))
        .unzip()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pm(v: f64) -> Distribution {
        Distribution::point(v)
    }

    #[test]
    fn bipartite_edges_must_connect_buyer_to_item() {
        assert!(Instance::bipartite(1, 1, vec![(0, 1, pm(1.0))]).is_err());
        assert!(Instance::bipartite(1, 1, vec![(0, 0, pm(1.0))]).is_ok());
    }

    #[test]
    fn budget_truncation_happens_at_load() {
        let inst = Instance::budget_additive(
            2,
            vec![
                (0, 0, Distribution::two_point(3.0, 14.0, 0.5)),
                (0, 1, pm(12.0)),
            ],
            vec![10.0],
        )
        .unwrap();
        assert_eq!(inst.dists()[0], Distribution::two_point(3.0, 10.0, 0.5));
        assert_eq!(inst.dists()[1], pm(10.0));
    }

    #[test]
    fn duplicate_identifiers_rejected() {
        let doc: InstanceDoc = serde_json::from_str(
            r#"{"kind":"general-graph","vertices":["a","a"],"edges":[]}"#,
        )
        .unwrap();
        assert!(Instance::from_doc(&doc).is_err());
    }

    #[test]
    fn malformed_distribution_is_a_config_error() {
        let err = Instance::single_choice(vec![Distribution::discrete(vec![(1.0, 0.3)])]).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn json_round_trip_for_every_kind() {
        let two = || Distribution::two_point(1.0, 4.0, 0.25);
        let instances = vec![
            Instance::general_graph(3, vec![(0, 1, two()), (1, 2, pm(2.0)), (0, 1, two())]).unwrap(),
            Instance::bipartite(2, 2, vec![(0, 0, two()), (1, 1, Distribution::uniform(0.0, 1.0))])
                .unwrap(),
            Instance::transversal(2, vec![(0, 0), (0, 1), (1, 1)], vec![two(), pm(3.0)]).unwrap(),
            Instance::budget_additive(2, vec![(0, 0, two()), (0, 1, Distribution::exponential(1.0))], vec![3.0])
                .unwrap(),
            Instance::single_choice(vec![two(), pm(1.0)]).unwrap(),
            Instance::partition_matroid(2, vec![(0, two()), (1, pm(1.0)), (0, pm(2.0))]).unwrap(),
        ];
        for inst in instances {
            let text = inst.to_json().unwrap();
            let back = Instance::from_json(&text).unwrap();
            assert_eq!(back, inst);
            let a: serde_json::Value = serde_json::from_str(&text).unwrap();
            let b: serde_json::Value = serde_json::from_str(&back.to_json().unwrap()).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn reads_documented_format() {
        let text = r#"{
            "kind": "budget-additive",
            "buyers": ["alice"], "items": ["x", "y"],
            "edges": [
                {"u": "alice", "v": "x", "dist": {"kind": "discrete", "support": [[7, 0.5], [20, 0.5]]}},
                {"u": "alice", "v": "y", "dist": {"kind": "uniform-interval", "lower": 0, "upper": 4}}
            ],
            "budgets": {"alice": 10}
        }"#;
        let inst = Instance::from_json(text).unwrap();
        assert_eq!(inst.buyer_edges(0), &[0, 1]);
        assert_eq!(inst.dists()[0], Distribution::two_point(7.0, 10.0, 0.5));
        assert_eq!(inst.endpoints(1), (0, 2));
    }
}
