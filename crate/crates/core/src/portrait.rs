//! Critical points and the signed separatrix-connection graph at one base
//! point, shared by the numeric extractor and the synthetic corpus.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::error::{CbError, Result};
use crate::geom::Vec2;
use crate::poly::BasePoint;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CriticalKind {
    UnstableNode,
    Saddle,
    StableNode,
    Degenerate,
}

impl CriticalKind {
    pub fn mu(self) -> u8 {
        match self {
            CriticalKind::UnstableNode => 2,
            CriticalKind::Saddle => 1,
            CriticalKind::StableNode => 0,
            CriticalKind::Degenerate => 0,
        }
    }
}

/// A zero of grad f_x with its classification. The id is the index in the
/// canonically sorted point list of one portrait.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalPoint {
    pub id: usize,
    pub y: Vec2,
    pub kind: CriticalKind,
    pub mu: u8,
    /// Hessian eigenvalues of f_x at y, ascending.
    pub eigenvalues: (f64, f64),
}

/// The four separatrix branches of a saddle. U1 leaves along the canonical
/// (+) unstable eigenvector, U2 along the opposite one; S1/S2 likewise for
/// the stable eigenvector, integrated in reversed time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Branch {
    U1,
    U2,
    S1,
    S2,
}

impl Branch {
    pub fn is_unstable(self) -> bool {
        matches!(self, Branch::U1 | Branch::U2)
    }

    pub fn opposite(self) -> Branch {
        match self {
            Branch::U1 => Branch::U2,
            Branch::U2 => Branch::U1,
            Branch::S1 => Branch::S2,
            Branch::S2 => Branch::S1,
        }
    }
}

/// Where a traced separatrix ends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Terminus {
    /// Reached the capture ball of a node (or, for S-branches, of the source
    /// node in reversed time).
    Node(usize),
    /// Reached the capture ball of another saddle: nongeneric, signals the
    /// bifurcation locus.
    Saddle(usize),
    /// Left the integration region at this point.
    Exit(Vec2),
}

/// One traced separatrix with its sampled trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Separatrix {
    pub owner: usize,
    pub branch: Branch,
    pub polyline: Vec<Vec2>,
    pub terminus: Terminus,
}

/// A gradient line between critical points of Morse-index difference one,
/// realized by the stated branch of its saddle endpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    /// Higher-index endpoint (unstable node for un->s edges, saddle for
    /// s->sn edges).
    pub from: usize,
    pub to: usize,
    /// The saddle branch realizing the connection: S1/S2 for un->s edges,
    /// U1/U2 for s->sn edges. The owning saddle is `to` resp. `from`.
    pub branch: Branch,
}

impl Edge {
    /// Id of the saddle whose branch realizes this edge.
    pub fn owner(&self) -> usize {
        if self.branch.is_unstable() {
            self.from
        } else {
            self.to
        }
    }
}

/// Critical points plus the separatrix-connection graph at one base point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhasePortrait {
    pub base: BasePoint,
    pub points: Vec<CriticalPoint>,
    pub edges: Vec<Edge>,
    /// Branches that leave the region instead of connecting.
    pub exits: Vec<(usize, Branch)>,
    /// Full trajectories, kept for rendering; empty for synthetic portraits.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub separatrices: Vec<Separatrix>,
    /// Synthetic figure portraits model a neighbourhood, not a complete
    /// phase portrait: square cancellation is only required where both
    /// broken lines are visible.
    #[serde(default)]
    pub local_model: bool,
    /// Generator names; numeric portraits use p0, p1, ...
    pub names: Vec<String>,
    /// Edge signs declared by a synthetic document, keyed like the edges.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub declared_signs: BTreeMap<(usize, Branch), i8>,
}

impl PhasePortrait {
    pub fn point(&self, id: usize) -> &CriticalPoint {
        &self.points[id]
    }

    pub fn by_name(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn ids_of(&self, kind: CriticalKind) -> Vec<usize> {
        self.points.iter().filter(|p| p.kind == kind).map(|p| p.id).collect()
    }

    pub fn saddles(&self) -> Vec<usize> {
        self.ids_of(CriticalKind::Saddle)
    }

    /// Multiset of edges from p to q; nonempty only when mu(p) - mu(q) = 1.
    pub fn count_connections(&self, p: usize, q: usize) -> Vec<Edge> {
        self.edges.iter().copied().filter(|e| e.from == p && e.to == q).collect()
    }

    /// All edges realized by a branch of the given saddle.
    pub fn saddle_edges(&self, saddle: usize) -> Vec<Edge> {
        self.edges.iter().copied().filter(|e| e.owner() == saddle).collect()
    }

    /// Alternating count sum_p (-1)^mu(p).
    pub fn euler_count(&self) -> i64 {
        self.points.iter().map(|p| if p.mu % 2 == 0 { 1 } else { -1 }).sum()
    }

    /// Structural invariants: ids consecutive, edges join mu-difference-1
    /// points via a branch of the right stability, and every saddle accounts
    /// for exactly two stable and two unstable branches.
    pub fn validate(&self) -> Result<()> {
        for (i, p) in self.points.iter().enumerate() {
            if p.id != i {
                return Err(CbError::SchemaError {
                    path: format!("points[{i}].id"),
                    message: "ids must be consecutive from 0".into(),
                });
            }
            if p.kind == CriticalKind::Degenerate {
                return Err(CbError::SchemaError {
                    path: format!("points[{i}]"),
                    message: "degenerate points cannot appear in a portrait".into(),
                });
            }
            if p.mu != p.kind.mu() {
                return Err(CbError::SchemaError {
                    path: format!("points[{i}].mu"),
                    message: format!("mu {} inconsistent with kind {:?}", p.mu, p.kind),
                });
            }
        }
        if self.names.len() != self.points.len() {
            return Err(CbError::SchemaError {
                path: "names".into(),
                message: "one name per point required".into(),
            });
        }
        let mut seen: BTreeMap<(usize, Branch), usize> = BTreeMap::new();
        for (k, e) in self.edges.iter().enumerate() {
            let (Some(from), Some(to)) = (self.points.get(e.from), self.points.get(e.to)) else {
                return Err(CbError::SchemaError {
                    path: format!("edges[{k}]"),
                    message: "edge endpoint out of range".into(),
                });
            };
            if from.mu != to.mu + 1 {
                return Err(CbError::SchemaError {
                    path: format!("edges[{k}]"),
                    message: format!("edge must drop Morse index by 1, got {} -> {}", from.mu, to.mu),
                });
            }
            let owner = e.owner();
            if self.points[owner].kind != CriticalKind::Saddle {
                return Err(CbError::SchemaError {
                    path: format!("edges[{k}]"),
                    message: "edge branch owner must be a saddle".into(),
                });
            }
            if let Some(prev) = seen.insert((owner, e.branch), k) {
                return Err(CbError::SchemaError {
                    path: format!("edges[{k}]"),
                    message: format!("branch used twice (also edges[{prev}])"),
                });
            }
        }
        for &(s, b) in &self.exits {
            if self.points.get(s).map(|p| p.kind) != Some(CriticalKind::Saddle) {
                return Err(CbError::SchemaError {
                    path: "exits".into(),
                    message: format!("exit owner {s} is not a saddle"),
                });
            }
            if let Some(&k) = seen.get(&(s, b)) {
                return Err(CbError::SchemaError {
                    path: "exits".into(),
                    message: format!("branch {b:?} of saddle {s} both exits and forms edges[{k}]"),
                });
            }
        }
        for &s in &self.saddles() {
            for b in [Branch::U1, Branch::U2, Branch::S1, Branch::S2] {
                let as_edge = seen.contains_key(&(s, b));
                let as_exit = self.exits.contains(&(s, b));
                if !as_edge && !as_exit {
                    return Err(CbError::SchemaError {
                        path: format!("saddle {s}"),
                        message: format!("branch {b:?} is neither an edge nor an exit"),
                    });
                }
            }
        }
        Ok(())
    }

    /// Comparable structural summary: kinds in canonical order plus the edge
    /// and exit multisets. Two portraits at nearby base points are compared
    /// after id matching.
    pub fn signature(&self) -> PortraitSignature {
        let mut kinds: Vec<CriticalKind> = self.points.iter().map(|p| p.kind).collect();
        kinds.sort();
        let mut edges: Vec<(usize, usize)> = self.edges.iter().map(|e| (e.from, e.to)).collect();
        edges.sort();
        let mut exits: Vec<usize> = self.exits.iter().map(|&(s, _)| s).collect();
        exits.sort();
        PortraitSignature { kinds, edges, exits }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PortraitSignature {
    pub kinds: Vec<CriticalKind>,
    pub edges: Vec<(usize, usize)>,
    pub exits: Vec<usize>,
}

impl PortraitSignature {
    /// Apply an id relabelling (old id -> new id) so signatures computed in
    /// two different portraits can be compared on common labels.
    pub fn relabel(&self, map: &BTreeMap<usize, usize>) -> Option<PortraitSignature> {
        let mut edges = Vec::with_capacity(self.edges.len());
        for &(a, b) in &self.edges {
            edges.push((*map.get(&a)?, *map.get(&b)?));
        }
        edges.sort();
        let mut exits = Vec::with_capacity(self.exits.len());
        for &s in &self.exits {
            exits.push(*map.get(&s)?);
        }
        exits.sort();
        Some(PortraitSignature { kinds: self.kinds.clone(), edges, exits })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn synthetic_point(id: usize, kind: CriticalKind) -> CriticalPoint {
        let eigenvalues = match kind {
            CriticalKind::UnstableNode => (1.0, 2.0),
            CriticalKind::Saddle => (-1.0, 1.0),
            CriticalKind::StableNode => (-2.0, -1.0),
            CriticalKind::Degenerate => (0.0, 1.0),
        };
        CriticalPoint { id, y: Vec2::new(id as f64, 0.0), kind, mu: kind.mu(), eigenvalues }
    }

    fn fold_portrait() -> PhasePortrait {
        PhasePortrait {
            base: Vec2::new(0.75, 0.0),
            points: vec![
                synthetic_point(0, CriticalKind::UnstableNode),
                synthetic_point(1, CriticalKind::Saddle),
            ],
            edges: vec![Edge { from: 0, to: 1, branch: Branch::S1 }],
            exits: vec![(1, Branch::S2), (1, Branch::U1), (1, Branch::U2)],
            separatrices: vec![],
            local_model: false,
            names: vec!["un".into(), "s".into()],
            declared_signs: BTreeMap::new(),
        }
    }

    #[test]
    fn fold_portrait_validates() {
        fold_portrait().validate().unwrap();
        assert_eq!(fold_portrait().euler_count(), 0);
        assert_eq!(fold_portrait().count_connections(0, 1).len(), 1);
    }

    #[test]
    fn missing_branch_rejected() {
        let mut p = fold_portrait();
        p.exits.pop();
        assert!(p.validate().is_err());
    }

    #[test]
    fn duplicate_branch_rejected() {
        let mut p = fold_portrait();
        p.edges.push(Edge { from: 0, to: 1, branch: Branch::S1 });
        assert!(p.validate().is_err());
    }

    #[test]
    fn mu_gap_rejected() {
        let mut p = fold_portrait();
        p.points.push(synthetic_point(2, CriticalKind::StableNode));
        p.names.push("sn".into());
        p.edges.push(Edge { from: 0, to: 2, branch: Branch::U1 });
        assert!(p.validate().is_err());
    }
}
