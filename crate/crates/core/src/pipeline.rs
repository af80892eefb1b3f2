//! From a chamber decomposition to the glued algebra: per-chamber Morse
//! complexes with consistent orientations, quantum corrections on every
//! wall, and monodromy reports around codimension-2 points.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::config::RunConfig;
use crate::corrections::{
    bifurcation_correction, caustic_correction, monodromy, CausticCorrection, ChainMap, LoopStep,
    MonodromyReport, Tracking,
};
use crate::critical::{find_critical_points, match_points, track_points};
use crate::error::{CbError, Result};
use crate::geom::Vec2;
use crate::loci::diagram::{CBDiagram, Codim2Kind, Codim2Point};
use crate::loci::{WallKind, WallPayload};
use crate::morse::{build_complex, homology, solve_orientation, HomologySummary, MorseComplex};
use crate::poly::GeneratingFunction;
use crate::portrait::{Branch, CriticalKind, PhasePortrait};

/// The correction attached to one wall of a diagram.
#[derive(Debug, Clone)]
pub enum WallCorrection {
    /// Map from the poorer into the richer chamber.
    Caustic { poorer: u32, richer: u32, correction: CausticCorrection },
    /// Map from `from` to `to` (the first and second adjacent chamber).
    Bifurcation { from: u32, to: u32, map: ChainMap },
}

/// A diagram together with its chamber complexes and wall corrections.
pub struct DiagramAnalysis {
    pub diagram: CBDiagram,
    pub complexes: Vec<MorseComplex>,
    pub homologies: Vec<HomologySummary>,
    /// One entry per wall: the correction or the reason it is missing.
    pub corrections: Vec<std::result::Result<WallCorrection, String>>,
}

/// Compose id tracking maps.
fn compose(a: &BTreeMap<usize, usize>, b: &BTreeMap<usize, usize>) -> BTreeMap<usize, usize> {
    a.iter().filter_map(|(&k, v)| b.get(v).map(|&w| (k, w))).collect()
}

/// Track chamber-representative generators through a wall: representative of
/// `from_chamber` -> near-wall sample on its side -> near-wall sample on the
/// other side -> representative of `to_chamber`.
fn track_through_wall(
    f: &GeneratingFunction,
    cfg: &RunConfig,
    from_rep: Vec2,
    to_rep: Vec2,
    wall_x: Vec2,
    side_eps: f64,
) -> Result<BTreeMap<usize, usize>> {
    let fiber = cfg.fiber_rect();
    let tols = &cfg.tolerances;
    let toward_from = (from_rep - wall_x).normalized();
    let toward_to = (to_rep - wall_x).normalized();
    let side_a = wall_x + toward_from.scale(side_eps);
    let side_b = wall_x + toward_to.scale(side_eps);
    let leg1 = track_points(f, from_rep, side_a, fiber, cfg.grid_n, tols)?;
    let pa = find_critical_points(f, side_a, fiber, cfg.grid_n, tols)?;
    let pb = find_critical_points(f, side_b, fiber, cfg.grid_n, tols)?;
    let across = match_points(&pa, &pb)
        .map_err(|e| CbError::NotAChainMap(format!("tracking across the wall failed: {e}")))?;
    let leg3 = track_points(f, side_b, to_rep, fiber, cfg.grid_n, tols)?;
    Ok(compose(&compose(&leg1, &across), &leg3))
}

/// Pin signs of a child chamber's saddles to the parent's through a wall,
/// aligning branch labels by eigenvector continuity.
fn transfer_pins(
    f: &GeneratingFunction,
    parent: &PhasePortrait,
    parent_cx: &MorseComplex,
    child: &PhasePortrait,
    id_map: &BTreeMap<usize, usize>,
) -> BTreeMap<(usize, Branch), i8> {
    let mut pins = BTreeMap::new();
    for (&pid, &cid) in id_map {
        if parent.points[pid].kind != CriticalKind::Saddle
            || child.points[cid].kind != CriticalKind::Saddle
        {
            continue;
        }
        let hp = f.hessian(parent.points[pid].y);
        let hc = f.hessian(child.points[cid].y);
        let (plo, phi) = hp.eigenvalues();
        let (clo, chi) = hc.eigenvalues();
        let u_aligned = hp.eigenvector(phi).dot(hc.eigenvector(chi)) >= 0.0;
        let s_aligned = hp.eigenvector(plo).dot(hc.eigenvector(clo)) >= 0.0;
        let s1 = parent_cx.orientation.sign(pid, Branch::S1);
        let u1 = parent_cx.orientation.sign(pid, Branch::U1);
        pins.insert((cid, Branch::S1), if s_aligned { s1 } else { -s1 });
        pins.insert((cid, Branch::U1), if u_aligned { u1 } else { -u1 });
    }
    pins
}

/// Nearest point of the requested stability kind, demanding clear dominance
/// over the runner-up so drifting positions still resolve unambiguously.
fn nearest_of_kind(portrait: &PhasePortrait, y: Vec2, kind_is_saddle: bool) -> Result<usize> {
    let mut dists: Vec<(f64, usize)> = portrait
        .points
        .iter()
        .filter(|p| (p.kind == CriticalKind::Saddle) == kind_is_saddle)
        .map(|p| (p.y.dist(y), p.id))
        .collect();
    dists.sort_by(|a, b| a.0.total_cmp(&b.0));
    match dists.as_slice() {
        [] => Err(CbError::NotAChainMap("pair member not found in portrait".into())),
        [(_, id)] => Ok(*id),
        [(d0, id), (d1, _), ..] => {
            if *d0 < 0.5 * *d1 {
                Ok(*id)
            } else {
                Err(CbError::NotAChainMap("pair member position is ambiguous".into()))
            }
        }
    }
}

/// Identify the ids of a birth-death pair inside a portrait by position.
fn locate_pair(portrait: &PhasePortrait, node_y: Vec2, saddle_y: Vec2) -> Result<(usize, usize)> {
    Ok((nearest_of_kind(portrait, node_y, false)?, nearest_of_kind(portrait, saddle_y, true)?))
}

/// Build complexes for every chamber (signs transferred along a spanning
/// tree of the adjacency graph) and corrections for every wall.
pub fn analyze_diagram(
    f: &GeneratingFunction,
    cfg: &RunConfig,
    diagram: CBDiagram,
) -> Result<DiagramAnalysis> {
    let n = diagram.chambers.len();
    let spacing = diagram.region.diameter() / cfg.grid_m as f64;
    let side_eps = (0.05 * spacing).max(1e-4);

    // BFS over chambers, solving orientations with transferred pins
    let mut complexes: Vec<Option<MorseComplex>> = vec![None; n];
    let mut queue = std::collections::VecDeque::new();
    for root in 0..n {
        if complexes[root].is_some() {
            continue;
        }
        let portrait = &diagram.chambers[root].portrait;
        let orientation = solve_orientation(portrait, &[], &BTreeMap::new())?;
        complexes[root] = Some(build_complex(portrait, &orientation));
        queue.push_back(root as u32);
        while let Some(cur) = queue.pop_front() {
            for wall in &diagram.walls {
                let (a, b) = wall.adjacent;
                let next = if a == cur {
                    b
                } else if b == cur {
                    a
                } else {
                    continue;
                };
                if complexes[next as usize].is_some() {
                    continue;
                }
                let parent = &diagram.chambers[cur as usize];
                let child = &diagram.chambers[next as usize];
                let wall_mid = wall.polyline[wall.polyline.len() / 2];
                let pins = match track_through_wall(
                    f,
                    cfg,
                    parent.representative,
                    child.representative,
                    wall_mid,
                    side_eps,
                ) {
                    Ok(id_map) => transfer_pins(
                        f,
                        &parent.portrait,
                        complexes[cur as usize].as_ref().unwrap(),
                        &child.portrait,
                        &id_map,
                    ),
                    Err(_) => BTreeMap::new(),
                };
                let orientation = solve_orientation(&child.portrait, &[], &pins)
                    .or_else(|_| solve_orientation(&child.portrait, &[], &BTreeMap::new()))?;
                complexes[next as usize] = Some(build_complex(&child.portrait, &orientation));
                queue.push_back(next);
            }
        }
    }
    let complexes: Vec<MorseComplex> = complexes.into_iter().map(|c| c.unwrap()).collect();
    let homologies: Vec<HomologySummary> =
        complexes.iter().map(homology).collect::<Result<_>>()?;

    // corrections per wall
    let mut corrections = Vec::new();
    for wall in &diagram.walls {
        let (a, b) = wall.adjacent;
        if a == b {
            corrections.push(Err("wall shorter than the lattice spacing".to_string()));
            continue;
        }
        let built = build_wall_correction(f, cfg, &diagram, &complexes, wall, side_eps);
        corrections.push(built.map_err(|e| e.to_string()));
    }

    Ok(DiagramAnalysis { diagram, complexes, homologies, corrections })
}

fn build_wall_correction(
    f: &GeneratingFunction,
    cfg: &RunConfig,
    diagram: &CBDiagram,
    complexes: &[MorseComplex],
    wall: &crate::loci::diagram::Wall,
    side_eps: f64,
) -> Result<WallCorrection> {
    let (a, b) = wall.adjacent;
    let pa = &diagram.chamber(a).portrait;
    let pb = &diagram.chamber(b).portrait;
    let wall_mid = wall.polyline[wall.polyline.len() / 2];
    match wall.kind {
        WallKind::CausticFold => {
            let (rich, poor) = if pa.points.len() > pb.points.len() { (a, b) } else { (b, a) };
            let rich_ch = diagram.chamber(rich);
            let poor_ch = diagram.chamber(poor);
            let id_map = track_through_wall(
                f,
                cfg,
                poor_ch.representative,
                rich_ch.representative,
                wall_mid,
                side_eps,
            )?;
            // the payload pair, looked up near the wall then tracked inward
            let WallPayload::Fold(pair) = &wall.payload else {
                return Err(CbError::NotAChainMap("fold wall without a pair payload".into()));
            };
            let toward_rich = (rich_ch.representative - wall_mid).normalized();
            let side_x = wall_mid + toward_rich.scale(side_eps);
            let side_points =
                find_critical_points(f, side_x, cfg.fiber_rect(), cfg.grid_n, &cfg.tolerances)?;
            let side_portrait = PhasePortrait {
                base: side_x,
                points: side_points.clone(),
                edges: vec![],
                exits: vec![],
                separatrices: vec![],
                local_model: false,
                names: side_points.iter().map(|p| format!("p{}", p.id)).collect(),
                declared_signs: BTreeMap::new(),
            };
            let (side_node, side_saddle) =
                locate_pair(&side_portrait, pair.node().y, pair.saddle().y)?;
            let side_to_rep = track_points(
                f,
                side_x,
                rich_ch.representative,
                cfg.fiber_rect(),
                cfg.grid_n,
                &cfg.tolerances,
            )?;
            let node_id = *side_to_rep.get(&side_node).ok_or_else(|| {
                CbError::NotAChainMap("pair node lost while tracking to the representative".into())
            })?;
            let saddle_id = *side_to_rep.get(&side_saddle).ok_or_else(|| {
                CbError::NotAChainMap("pair saddle lost while tracking to the representative".into())
            })?;
            let correction = caustic_correction(
                &rich_ch.portrait,
                &complexes[rich as usize],
                &poor_ch.portrait,
                &complexes[poor as usize],
                (node_id, saddle_id),
                &Tracking::from_map(id_map),
            )?;
            Ok(WallCorrection::Caustic { poorer: poor, richer: rich, correction })
        }
        WallKind::Bifurcation => {
            let id_map = track_through_wall(
                f,
                cfg,
                diagram.chamber(a).representative,
                diagram.chamber(b).representative,
                wall_mid,
                side_eps,
            )?;
            let WallPayload::SaddlePair { tail, head } = &wall.payload else {
                return Err(CbError::NotAChainMap("bifurcation wall without a saddle pair".into()));
            };
            // locate the pair near the wall on side a, then track to the rep
            let toward_a = (diagram.chamber(a).representative - wall_mid).normalized();
            let side_x = wall_mid + toward_a.scale(side_eps);
            let side_points =
                find_critical_points(f, side_x, cfg.fiber_rect(), cfg.grid_n, &cfg.tolerances)?;
            let side_portrait = PhasePortrait {
                base: side_x,
                points: side_points.clone(),
                edges: vec![],
                exits: vec![],
                separatrices: vec![],
                local_model: false,
                names: side_points.iter().map(|p| format!("p{}", p.id)).collect(),
                declared_signs: BTreeMap::new(),
            };
            let (side_tail, side_head) = (
                nearest_of_kind(&side_portrait, *tail, true)?,
                nearest_of_kind(&side_portrait, *head, true)?,
            );
            let side_to_rep = track_points(
                f,
                side_x,
                diagram.chamber(a).representative,
                cfg.fiber_rect(),
                cfg.grid_n,
                &cfg.tolerances,
            )?;
            let tail_id = *side_to_rep
                .get(&side_tail)
                .ok_or_else(|| CbError::NotAChainMap("tail saddle lost in tracking".into()))?;
            let head_id = *side_to_rep
                .get(&side_head)
                .ok_or_else(|| CbError::NotAChainMap("head saddle lost in tracking".into()))?;
            let map = bifurcation_correction(
                &diagram.chamber(a).portrait,
                &complexes[a as usize],
                &diagram.chamber(b).portrait,
                &complexes[b as usize],
                (tail_id, head_id),
                &Tracking::from_map(id_map),
            )?;
            Ok(WallCorrection::Bifurcation { from: a, to: b, map })
        }
    }
}

/// Serializable record of one codimension-2 monodromy verdict.
#[derive(Debug, Clone, Serialize)]
pub struct Codim2Verdict {
    pub kind: Codim2Kind,
    pub location: Vec2,
    pub report: Option<MonodromyReport>,
    /// Reason when no report could be composed (cusps are expected here).
    pub skipped: Option<String>,
}

/// Compose the corrections around every codimension-2 point of the diagram.
pub fn diagram_monodromy(analysis: &DiagramAnalysis) -> Vec<Codim2Verdict> {
    analysis
        .diagram
        .codim2
        .iter()
        .map(|point| match codim2_loop(analysis, point) {
            Ok(report) => Codim2Verdict {
                kind: point.kind,
                location: point.location,
                report: Some(report),
                skipped: None,
            },
            Err(e) => Codim2Verdict {
                kind: point.kind,
                location: point.location,
                report: None,
                skipped: Some(e.to_string()),
            },
        })
        .collect()
}

fn codim2_loop(analysis: &DiagramAnalysis, point: &Codim2Point) -> Result<MonodromyReport> {
    if point.kind == Codim2Kind::Cusp {
        return Err(CbError::MissingCorrection(
            "cusps are excluded from wall crossing".into(),
        ));
    }
    // order the incident walls around the point by the angle of their germ
    let mut germs: Vec<(f64, u32)> = Vec::new();
    for &wid in &point.walls {
        let wall = analysis.diagram.wall(wid);
        // direction of the wall where it approaches the point
        let near: Vec<&Vec2> = wall
            .polyline
            .iter()
            .filter(|p| p.dist(point.location) < f64::INFINITY)
            .collect();
        if near.is_empty() {
            continue;
        }
        let closest = wall
            .polyline
            .iter()
            .min_by(|u, v| u.dist(point.location).total_cmp(&v.dist(point.location)))
            .unwrap();
        let dir = (*closest - point.location).normalized();
        let angle = dir.y.atan2(dir.x);
        germs.push((angle, wid));
    }
    if germs.len() < 2 {
        return Err(CbError::MissingCorrection("fewer than two wall germs at the point".into()));
    }
    germs.sort_by(|u, v| u.0.total_cmp(&v.0));
    // chambers between consecutive germs: shared adjacent chamber
    let mut loop_chambers: Vec<u32> = Vec::new();
    let k = germs.len();
    for i in 0..k {
        let (_, w1) = germs[i];
        let (_, w2) = germs[(i + 1) % k];
        let a1 = analysis.diagram.wall(w1).adjacent;
        let a2 = analysis.diagram.wall(w2).adjacent;
        let shared: Vec<u32> = [a1.0, a1.1]
            .into_iter()
            .filter(|c| *c == a2.0 || *c == a2.1)
            .collect();
        let Some(&c) = shared.first() else {
            return Err(CbError::MissingCorrection(format!(
                "walls {w1} and {w2} share no chamber"
            )));
        };
        loop_chambers.push(c);
    }
    // crossing i goes from loop_chambers[i] to loop_chambers[i+1] across germ i+1
    let mut steps = Vec::new();
    for i in 0..k {
        let from = loop_chambers[i];
        let to = loop_chambers[(i + 1) % k];
        if from == to {
            continue;
        }
        let (_, wid) = germs[(i + 1) % k];
        let corr = analysis.corrections[wid as usize]
            .as_ref()
            .map_err(|e| CbError::MissingCorrection(format!("wall {wid}: {e}")))?;
        match corr {
            WallCorrection::Caustic { poorer, richer, correction } => {
                if from == *poorer && to == *richer {
                    steps.push(LoopStep::CausticUp(correction.clone()));
                } else if from == *richer && to == *poorer {
                    steps.push(LoopStep::CausticDown(correction.clone()));
                } else {
                    return Err(CbError::MissingCorrection(format!(
                        "wall {wid} does not join chambers {from} and {to}"
                    )));
                }
            }
            WallCorrection::Bifurcation { from: f0, to: t0, map } => {
                if from == *f0 && to == *t0 {
                    steps.push(LoopStep::Bifurcation(map.clone()));
                } else if from == *t0 && to == *f0 {
                    steps.push(LoopStep::Bifurcation(crate::corrections::invert_bifurcation(map)));
                } else {
                    return Err(CbError::MissingCorrection(format!(
                        "wall {wid} does not join chambers {from} and {to}"
                    )));
                }
            }
        }
    }
    monodromy(loop_chambers.iter().map(|c| format!("chamber{c}")).collect(), &steps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loci::diagram::assemble_cb_diagram;

    fn fold_cfg() -> RunConfig {
        RunConfig {
            polynomial: vec![[3, 0, 1, 1], [0, 2, 1, 1]],
            region: [-1.0, 1.0, -1.0, 1.0],
            fiber_window: [-1.5, 1.5, -1.5, 1.5],
            grid_n: 12,
            grid_m: 16,
            caustic_samples: 128,
            tolerances: Default::default(),
            connection: Default::default(),
            output_dir: None,
        }
    }

    #[test]
    fn fold_analysis_builds_caustic_correction() {
        let cfg = fold_cfg();
        let f = cfg.function().unwrap();
        let diagram = assemble_cb_diagram(&f, &cfg).unwrap();
        let analysis = analyze_diagram(&f, &cfg, diagram).unwrap();
        assert_eq!(analysis.complexes.len(), 2);
        for h in &analysis.homologies {
            assert_eq!(h.betti, (0, 0, 0));
        }
        assert_eq!(analysis.corrections.len(), analysis.diagram.walls.len());
        for corr in &analysis.corrections {
            match corr.as_ref().expect("fold correction builds") {
                WallCorrection::Caustic { correction, .. } => {
                    // the poorer chamber is empty: the injection is trivial
                    assert_eq!(correction.map.m1.cols, 0);
                    assert_eq!(correction.map.m1.rows, 1);
                }
                other => panic!("unexpected correction {other:?}"),
            }
        }
        // no codimension-2 points on a plain fold
        assert!(diagram_monodromy(&analysis).is_empty());
    }
}
