//! Hand-specified phase portraits, walls and monodromy loops, so the
//! combinatorial wall-crossing machinery can be exercised without numerics.
//! The built-in corpus encodes the figure portraits the construction rests
//! on, one JSON document per figure.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corrections::{
    bifurcation_correction, caustic_correction, monodromy, ChainMap, LoopStep, MonodromyReport,
    Tracking,
};
use crate::error::{CbError, Result};
use crate::geom::Vec2;
use crate::morse::{build_complex, MorseComplex, Orientation};
use crate::portrait::{Branch, CriticalKind, CriticalPoint, Edge, PhasePortrait};

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawChamber {
    name: String,
    /// [name, mu] pairs.
    generators: Vec<(String, u8)>,
    /// [from, to, branch, sign] records.
    #[serde(default)]
    edges: Vec<(String, String, Branch, i8)>,
    /// [saddle, branch] records.
    #[serde(default)]
    exits: Vec<(String, Branch)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum SyntheticWall {
    /// A saddle-to-saddle wall: the tail's unstable branch merges with the
    /// head's stable branch.
    Bifurcation {
        chambers: (String, String),
        tail: String,
        head: String,
        #[serde(default = "default_tail_branch")]
        tail_branch: Branch,
        #[serde(default = "default_head_branch")]
        head_branch: Branch,
    },
    /// A fold wall: `node` and `saddle` exist only in the richer chamber.
    CausticFold { poorer: String, richer: String, node: String, saddle: String },
}

fn default_tail_branch() -> Branch {
    Branch::U1
}
fn default_head_branch() -> Branch {
    Branch::S1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SyntheticLoop {
    /// Codimension-2 point kind this loop encircles.
    pub point: String,
    /// Cyclic chamber sequence.
    pub chambers: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawDocument {
    schema: String,
    name: String,
    #[serde(default)]
    comment: String,
    chambers: Vec<RawChamber>,
    #[serde(default)]
    walls: Vec<SyntheticWall>,
    #[serde(default)]
    loops: Vec<SyntheticLoop>,
}

/// A loaded corpus document: named portraits plus declared walls and loops.
#[derive(Debug, Clone)]
pub struct SyntheticDocument {
    pub name: String,
    pub comment: String,
    pub chambers: Vec<(String, PhasePortrait)>,
    pub walls: Vec<SyntheticWall>,
    pub loops: Vec<SyntheticLoop>,
}

impl SyntheticDocument {
    pub fn chamber(&self, name: &str) -> Result<&PhasePortrait> {
        self.chambers
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, p)| p)
            .ok_or_else(|| CbError::SchemaError {
                path: format!("chambers.{name}"),
                message: "chamber not found".into(),
            })
    }

    /// The declared orientation and complex of one chamber.
    pub fn complex(&self, name: &str) -> Result<(PhasePortrait, MorseComplex)> {
        let portrait = self.chamber(name)?.clone();
        let orientation = Orientation::from_declared(&portrait)?;
        let complex = build_complex(&portrait, &orientation);
        Ok((portrait, complex))
    }

    fn wall_between<'a>(&'a self, a: &str, b: &str) -> Result<&'a SyntheticWall> {
        self.walls
            .iter()
            .find(|w| match w {
                SyntheticWall::Bifurcation { chambers, .. } => {
                    (chambers.0 == a && chambers.1 == b) || (chambers.0 == b && chambers.1 == a)
                }
                SyntheticWall::CausticFold { poorer, richer, .. } => {
                    (poorer == a && richer == b) || (poorer == b && richer == a)
                }
            })
            .ok_or_else(|| {
                CbError::MissingCorrection(format!("no wall declared between {a} and {b}"))
            })
    }

    /// The correction for one declared bifurcation wall, oriented from
    /// chamber `a` to chamber `b`.
    pub fn bifurcation_map(&self, a: &str, b: &str) -> Result<ChainMap> {
        let wall = self.wall_between(a, b)?;
        let SyntheticWall::Bifurcation { tail, head, .. } = wall else {
            return Err(CbError::MissingCorrection(format!(
                "wall between {a} and {b} is not a bifurcation wall"
            )));
        };
        let (pa, ca) = self.complex(a)?;
        let (pb, cb) = self.complex(b)?;
        let tail_id = pa.by_name(tail).ok_or_else(|| CbError::SchemaError {
            path: format!("walls tail {tail}"),
            message: "unknown generator".into(),
        })?;
        let head_id = pa.by_name(head).ok_or_else(|| CbError::SchemaError {
            path: format!("walls head {head}"),
            message: "unknown generator".into(),
        })?;
        let tracking = Tracking::by_name(&pa, &pb);
        bifurcation_correction(&pa, &ca, &pb, &cb, (tail_id, head_id), &tracking)
    }

    /// Compose the declared corrections around one loop.
    pub fn run_loop(&self, lp: &SyntheticLoop) -> Result<MonodromyReport> {
        let n = lp.chambers.len();
        if n < 2 {
            return Err(CbError::MissingCorrection("loop needs at least two chambers".into()));
        }
        let mut steps = Vec::new();
        for i in 0..n {
            let a = &lp.chambers[i];
            let b = &lp.chambers[(i + 1) % n];
            let wall = self.wall_between(a, b)?.clone();
            match wall {
                SyntheticWall::Bifurcation { .. } => {
                    steps.push(LoopStep::Bifurcation(self.bifurcation_map(a, b)?));
                }
                SyntheticWall::CausticFold { poorer, richer, node, saddle } => {
                    let (pp, cp) = self.complex(&poorer)?;
                    let (pr, cr) = self.complex(&richer)?;
                    let node_id = pr.by_name(&node).ok_or_else(|| CbError::SchemaError {
                        path: format!("walls node {node}"),
                        message: "unknown generator".into(),
                    })?;
                    let saddle_id = pr.by_name(&saddle).ok_or_else(|| CbError::SchemaError {
                        path: format!("walls saddle {saddle}"),
                        message: "unknown generator".into(),
                    })?;
                    let tracking = Tracking::by_name(&pp, &pr);
                    let corr = caustic_correction(
                        &pr,
                        &cr,
                        &pp,
                        &cp,
                        (node_id, saddle_id),
                        &tracking,
                    )?;
                    if a == &poorer {
                        steps.push(LoopStep::CausticUp(corr));
                    } else {
                        steps.push(LoopStep::CausticDown(corr));
                    }
                }
            }
        }
        monodromy(lp.chambers.clone(), &steps)
    }
}

fn schema_err(path: &str, message: impl Into<String>) -> CbError {
    CbError::SchemaError { path: path.to_string(), message: message.into() }
}

fn build_portrait(raw: &RawChamber) -> Result<PhasePortrait> {
    let mut names = Vec::new();
    let mut points = Vec::new();
    let mut index: BTreeMap<&str, usize> = BTreeMap::new();
    for (i, (name, mu)) in raw.generators.iter().enumerate() {
        let kind = match mu {
            2 => CriticalKind::UnstableNode,
            1 => CriticalKind::Saddle,
            0 => CriticalKind::StableNode,
            _ => {
                return Err(schema_err(
                    &format!("chambers.{}.generators[{i}]", raw.name),
                    format!("mu must be 0, 1 or 2, got {mu}"),
                ))
            }
        };
        if index.insert(name.as_str(), i).is_some() {
            return Err(schema_err(
                &format!("chambers.{}.generators[{i}]", raw.name),
                format!("duplicate generator name {name}"),
            ));
        }
        let eigenvalues = match kind {
            CriticalKind::UnstableNode => (1.0, 2.0),
            CriticalKind::Saddle => (-1.0, 1.0),
            _ => (-2.0, -1.0),
        };
        points.push(CriticalPoint {
            id: i,
            y: Vec2::new(i as f64, 0.0),
            kind,
            mu: *mu,
            eigenvalues,
        });
        names.push(name.clone());
    }
    let mut edges = Vec::new();
    let mut declared_signs = BTreeMap::new();
    for (k, (from, to, branch, sign)) in raw.edges.iter().enumerate() {
        let path = format!("chambers.{}.edges[{k}]", raw.name);
        let &f = index.get(from.as_str()).ok_or_else(|| schema_err(&path, format!("unknown generator {from}")))?;
        let &t = index.get(to.as_str()).ok_or_else(|| schema_err(&path, format!("unknown generator {to}")))?;
        if sign.abs() != 1 {
            return Err(schema_err(&path, "sign must be +1 or -1"));
        }
        let e = Edge { from: f, to: t, branch: *branch };
        declared_signs.insert((e.owner(), *branch), *sign);
        edges.push(e);
    }
    let mut exits = Vec::new();
    for (k, (saddle, branch)) in raw.exits.iter().enumerate() {
        let path = format!("chambers.{}.exits[{k}]", raw.name);
        let &s = index
            .get(saddle.as_str())
            .ok_or_else(|| schema_err(&path, format!("unknown generator {saddle}")))?;
        exits.push((s, *branch));
    }
    let portrait = PhasePortrait {
        base: Vec2::ZERO,
        points,
        edges,
        exits,
        separatrices: vec![],
        local_model: true,
        names,
        declared_signs,
    };
    portrait.validate()?;
    // declared signs must be per-saddle consistent
    Orientation::from_declared(&portrait)?;
    Ok(portrait)
}

/// Parse and validate one synthetic document.
pub fn load_synthetic(text: &str) -> Result<SyntheticDocument> {
    let raw: RawDocument = serde_json::from_str(text).map_err(|e| CbError::SchemaError {
        path: e.to_string(),
        message: "document does not match the portrait schema".into(),
    })?;
    if raw.schema != "cb-lab/1" {
        return Err(schema_err("schema", format!("unsupported schema {}", raw.schema)));
    }
    let mut chambers = Vec::new();
    for c in &raw.chambers {
        chambers.push((c.name.clone(), build_portrait(c)?));
    }
    let find = |name: &str, path: &str| -> Result<()> {
        if chambers.iter().any(|(n, _)| n == name) {
            Ok(())
        } else {
            Err(schema_err(path, format!("unknown chamber {name}")))
        }
    };
    for (i, w) in raw.walls.iter().enumerate() {
        match w {
            SyntheticWall::Bifurcation { chambers: (a, b), .. } => {
                find(a, &format!("walls[{i}]"))?;
                find(b, &format!("walls[{i}]"))?;
            }
            SyntheticWall::CausticFold { poorer, richer, .. } => {
                find(poorer, &format!("walls[{i}]"))?;
                find(richer, &format!("walls[{i}]"))?;
            }
        }
    }
    for (i, lp) in raw.loops.iter().enumerate() {
        for c in &lp.chambers {
            find(c, &format!("loops[{i}]"))?;
        }
    }
    Ok(SyntheticDocument {
        name: raw.name,
        comment: raw.comment,
        chambers,
        walls: raw.walls,
        loops: raw.loops,
    })
}

macro_rules! corpus {
    ($($name:literal),* $(,)?) => {
        /// The built-in figure corpus, in a fixed order.
        pub fn builtin() -> Vec<SyntheticDocument> {
            [$(include_str!(concat!("corpus/", $name, ".json"))),*]
                .iter()
                .map(|text| load_synthetic(text).expect("built-in corpus document is valid"))
                .collect()
        }
    };
}

corpus!(
    "fig02", "fig03", "fig05", "fig07", "fig08", "fig09", "fig10", "fig11", "fig12", "fig13",
    "fig14", "fig17", "fig18", "fig19", "fig23", "fig24u", "fig24s_none", "fig24s_iii",
    "fig24s_iv", "fig24s_v", "fig25a", "fig25b", "fig25c", "fig25d", "fig26",
);

/// Look one corpus document up by name.
pub fn builtin_by_name(name: &str) -> Result<SyntheticDocument> {
    builtin()
        .into_iter()
        .find(|d| d.name == name)
        .ok_or_else(|| CbError::SchemaError { path: name.to_string(), message: "no such corpus document".into() })
}
