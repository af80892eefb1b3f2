//! Assembling the chamber decomposition: wall detection on a base lattice,
//! polyline chaining, flood-filled chambers, adjacency and codimension-2
//! classification.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use super::{
    portrait_with_jitter, signatures_match, trace_caustic, CausticCurve, WallKind, WallPayload,
    WallPoint,
};
use crate::config::RunConfig;
use crate::error::{CbError, Result};
use crate::geom::{Rect, Vec2};
use crate::poly::GeneratingFunction;
use crate::portrait::PhasePortrait;

#[derive(Debug, Clone, Serialize)]
pub struct Chamber {
    pub id: u32,
    pub representative: Vec2,
    pub portrait: PhasePortrait,
}

#[derive(Debug, Clone, Serialize)]
pub struct Wall {
    pub id: u32,
    pub kind: WallKind,
    pub polyline: Vec<Vec2>,
    /// Chamber ids on the two sides.
    pub adjacent: (u32, u32),
    /// Payload sampled at one point of the wall.
    pub payload: WallPayload,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Codim2Kind {
    Cusp,
    CausticMeetsB,
    BTransversal,
    BTriple,
}

#[derive(Debug, Clone, Serialize)]
pub struct Codim2Point {
    pub kind: Codim2Kind,
    pub location: Vec2,
    pub walls: Vec<u32>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CBDiagram {
    pub region: Rect,
    pub chambers: Vec<Chamber>,
    pub walls: Vec<Wall>,
    pub codim2: Vec<Codim2Point>,
    pub caustic: CausticCurve,
}

impl CBDiagram {
    pub fn chamber(&self, id: u32) -> &Chamber {
        &self.chambers[id as usize]
    }

    pub fn wall(&self, id: u32) -> &Wall {
        &self.walls[id as usize]
    }
}

struct LatticePortraits {
    m: usize,
    portraits: Vec<Option<PhasePortrait>>,
}

impl LatticePortraits {
    fn get(&self, i: usize, j: usize) -> Option<&PhasePortrait> {
        self.portraits[j * (self.m + 1) + i].as_ref()
    }
}

fn lattice_point(region: Rect, m: usize, i: usize, j: usize) -> Vec2 {
    Vec2::new(
        region.x_min + region.width() * i as f64 / m as f64,
        region.y_min + region.height() * j as f64 / m as f64,
    )
}

/// Build the full chamber decomposition of the configured base region.
pub fn assemble_cb_diagram(f: &GeneratingFunction, cfg: &RunConfig) -> Result<CBDiagram> {
    let region = cfg.region_rect();
    let fiber_window = cfg.fiber_rect();
    let tols = &cfg.tolerances;
    let m = cfg.grid_m as usize;
    let spacing = region.width().hypot(region.height()) / m as f64;
    let jitter = 0.02 * spacing;

    // portraits on the (m+1)^2 lattice, in parallel
    let indices: Vec<(usize, usize)> =
        (0..=m).flat_map(|j| (0..=m).map(move |i| (i, j))).collect();
    let portraits: Vec<Option<PhasePortrait>> = indices
        .par_iter()
        .map(|&(i, j)| {
            let x = lattice_point(region, m, i, j);
            portrait_with_jitter(f, x, fiber_window, cfg.grid_n, tols, jitter).ok()
        })
        .collect();
    let lattice = LatticePortraits { m, portraits };

    // wall points on lattice edges whose endpoint signatures differ
    let mut edge_list: Vec<((usize, usize), (usize, usize))> = Vec::new();
    for j in 0..=m {
        for i in 0..=m {
            if i + 1 <= m {
                edge_list.push(((i, j), (i + 1, j)));
            }
            if j + 1 <= m {
                edge_list.push(((i, j), (i, j + 1)));
            }
        }
    }
    let edge_walls: Vec<Result<Vec<WallPoint>>> = edge_list
        .par_iter()
        .map(|&((ia, ja), (ib, jb))| {
            let (Some(pa), Some(pb)) = (lattice.get(ia, ja), lattice.get(ib, jb)) else {
                return Err(CbError::UnresolvedWall(lattice_point(region, m, ia, ja)));
            };
            if signatures_match(pa, pb) == Some(true) {
                return Ok(Vec::new());
            }
            let mut out = Vec::new();
            super::detect_between(
                f,
                pa.base,
                pa,
                pb.base,
                pb,
                fiber_window,
                cfg.grid_n,
                tols,
                &mut out,
                0,
            )?;
            Ok(out)
        })
        .collect();
    let mut wall_points: Vec<WallPoint> = Vec::new();
    let mut crossed_edges: Vec<bool> = vec![false; edge_list.len()];
    for (k, res) in edge_walls.into_iter().enumerate() {
        let pts = res?;
        if !pts.is_empty() {
            crossed_edges[k] = true;
            wall_points.extend(pts);
        }
    }

    // chamber flood fill over the lattice graph minus crossed edges
    let idx = |i: usize, j: usize| j * (m + 1) + i;
    let mut chamber_of: Vec<Option<u32>> = vec![None; (m + 1) * (m + 1)];
    let edge_index: BTreeMap<((usize, usize), (usize, usize)), usize> =
        edge_list.iter().enumerate().map(|(k, &e)| (e, k)).collect();
    let mut next_chamber = 0u32;
    for j0 in 0..=m {
        for i0 in 0..=m {
            if chamber_of[idx(i0, j0)].is_some() || lattice.get(i0, j0).is_none() {
                continue;
            }
            let id = next_chamber;
            next_chamber += 1;
            let mut stack = vec![(i0, j0)];
            chamber_of[idx(i0, j0)] = Some(id);
            while let Some((i, j)) = stack.pop() {
                let mut neighbors: Vec<(usize, usize)> = Vec::new();
                if i > 0 {
                    neighbors.push((i - 1, j));
                }
                if i < m {
                    neighbors.push((i + 1, j));
                }
                if j > 0 {
                    neighbors.push((i, j - 1));
                }
                if j < m {
                    neighbors.push((i, j + 1));
                }
                for (ni, nj) in neighbors {
                    if chamber_of[idx(ni, nj)].is_some() || lattice.get(ni, nj).is_none() {
                        continue;
                    }
                    let key = if (ni, nj) > (i, j) { ((i, j), (ni, nj)) } else { ((ni, nj), (i, j)) };
                    if crossed_edges[edge_index[&key]] {
                        continue;
                    }
                    chamber_of[idx(ni, nj)] = Some(id);
                    stack.push((ni, nj));
                }
            }
        }
    }

    // representatives: the lattice point of each chamber farthest from the
    // wall set (falling back to the point nearest the region center)
    let center = Vec2::new(
        0.5 * (region.x_min + region.x_max),
        0.5 * (region.y_min + region.y_max),
    );
    let mut best: BTreeMap<u32, (f64, (usize, usize))> = BTreeMap::new();
    for j in 0..=m {
        for i in 0..=m {
            let Some(id) = chamber_of[idx(i, j)] else {
                continue;
            };
            let x = lattice_point(region, m, i, j);
            let score = if wall_points.is_empty() {
                -x.dist(center)
            } else {
                wall_points.iter().map(|w| w.x.dist(x)).fold(f64::INFINITY, f64::min)
            };
            let entry = best.entry(id).or_insert((f64::NEG_INFINITY, (i, j)));
            if score > entry.0 {
                *entry = (score, (i, j));
            }
        }
    }
    let mut chambers = Vec::new();
    for (&id, &(_, (i, j))) in &best {
        let portrait = lattice.get(i, j).expect("representative has a portrait").clone();
        chambers.push(Chamber { id, representative: portrait.base, portrait });
    }

    // chain wall points of equal kind into polylines
    let chain_radius = 1.75 * spacing;
    let walls = chain_walls(&wall_points, chain_radius);
    // adjacency via the crossed lattice edges nearest to each polyline
    let mut wall_records: Vec<Wall> = Vec::new();
    for (wid, (kind, polyline, payload)) in walls.into_iter().enumerate() {
        let mut votes: BTreeMap<(u32, u32), usize> = BTreeMap::new();
        for p in &polyline {
            // nearest crossed lattice edge
            let mut best_edge: Option<(f64, usize)> = None;
            for (k, &((ia, ja), (ib, jb))) in edge_list.iter().enumerate() {
                if !crossed_edges[k] {
                    continue;
                }
                let a = lattice_point(region, m, ia, ja);
                let b = lattice_point(region, m, ib, jb);
                let d = super::segment_distance(*p, a, b);
                if best_edge.map_or(true, |(bd, _)| d < bd) {
                    best_edge = Some((d, k));
                }
            }
            if let Some((d, k)) = best_edge {
                if d < spacing {
                    let ((ia, ja), (ib, jb)) = edge_list[k];
                    if let (Some(ca), Some(cb)) =
                        (chamber_of[idx(ia, ja)], chamber_of[idx(ib, jb)])
                    {
                        let key = if ca <= cb { (ca, cb) } else { (cb, ca) };
                        *votes.entry(key).or_default() += 1;
                    }
                }
            }
        }
        let Some((&(ca, cb), _)) = votes.iter().max_by_key(|(_, &c)| c) else {
            continue;
        };
        // walls must separate two different chambers unless the lattice is
        // too coarse to see both sides
        let adjacent = (ca, cb);
        validate_adjacency(kind, &chambers, adjacent)?;
        wall_records.push(Wall { id: wid as u32, kind, polyline, adjacent, payload });
    }

    // caustic trace for rendering and cusps
    let caustic = trace_caustic(f, region, fiber_window, cfg.caustic_samples, cfg.grid_n, tols);

    let codim2 = classify_codim2(&wall_records, &caustic, spacing, region);

    Ok(CBDiagram { region, chambers, walls: wall_records, codim2, caustic })
}

fn validate_adjacency(kind: WallKind, chambers: &[Chamber], adjacent: (u32, u32)) -> Result<()> {
    let (a, b) = adjacent;
    if a == b {
        return Ok(()); // a wall shorter than the lattice spacing; nothing to check
    }
    let pa = &chambers[a as usize].portrait;
    let pb = &chambers[b as usize].portrait;
    match kind {
        WallKind::CausticFold => {
            let diff = pa.points.len().abs_diff(pb.points.len());
            if diff != 2 {
                return Err(CbError::InconsistentAdjacency(format!(
                    "fold wall between chambers {a} and {b} with point counts {} and {}",
                    pa.points.len(),
                    pb.points.len()
                )));
            }
        }
        WallKind::Bifurcation => {
            if pa.points.len() != pb.points.len() {
                return Err(CbError::InconsistentAdjacency(format!(
                    "bifurcation wall between chambers {a} and {b} with point counts {} and {}",
                    pa.points.len(),
                    pb.points.len()
                )));
            }
        }
    }
    Ok(())
}

/// Greedy chaining of wall points into polylines by proximity and kind.
fn chain_walls(
    points: &[WallPoint],
    radius: f64,
) -> Vec<(WallKind, Vec<Vec2>, WallPayload)> {
    let mut used = vec![false; points.len()];
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| {
        (points[a].x.x, points[a].x.y)
            .partial_cmp(&(points[b].x.x, points[b].x.y))
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let compatible = |a: &WallPoint, b: &WallPoint| -> bool {
        if a.kind != b.kind {
            return false;
        }
        match (&a.payload, &b.payload) {
            (WallPayload::Fold(_), WallPayload::Fold(_)) => true,
            (
                WallPayload::SaddlePair { tail: t1, head: h1 },
                WallPayload::SaddlePair { tail: t2, head: h2 },
            ) => {
                // the pair positions drift slowly along one wall
                let scale = t1.dist(*h1).max(1e-6);
                t1.dist(*t2) < 0.75 * scale && h1.dist(*h2) < 0.75 * scale
            }
            _ => false,
        }
    };
    let mut chains = Vec::new();
    for &seed in &order {
        if used[seed] {
            continue;
        }
        used[seed] = true;
        let mut chain = std::collections::VecDeque::from([seed]);
        // grow on both ends
        loop {
            let mut grew = false;
            for end in [true, false] {
                let tip = if end { *chain.back().unwrap() } else { *chain.front().unwrap() };
                let mut nearest: Option<(f64, usize)> = None;
                for (k, p) in points.iter().enumerate() {
                    if used[k] || !compatible(&points[tip], p) {
                        continue;
                    }
                    let d = points[tip].x.dist(p.x);
                    if d < radius && nearest.map_or(true, |(nd, _)| d < nd) {
                        nearest = Some((d, k));
                    }
                }
                if let Some((_, k)) = nearest {
                    used[k] = true;
                    if end {
                        chain.push_back(k);
                    } else {
                        chain.push_front(k);
                    }
                    grew = true;
                }
            }
            if !grew {
                break;
            }
        }
        let kind = points[seed].kind;
        let payload = points[seed].payload.clone();
        let polyline: Vec<Vec2> = chain.iter().map(|&k| points[k].x).collect();
        chains.push((kind, polyline, payload));
    }
    chains
}

/// Classify wall meeting points: cusps from the caustic trace, bifurcation
/// endpoints on the caustic, and junctions of bifurcation polylines.
fn classify_codim2(
    walls: &[Wall],
    caustic: &CausticCurve,
    spacing: f64,
    region: Rect,
) -> Vec<Codim2Point> {
    let mut out = Vec::new();
    let near = 1.75 * spacing;
    for cusp in &caustic.cusps {
        let incident: Vec<u32> = walls
            .iter()
            .filter(|w| {
                w.kind == WallKind::CausticFold
                    && w.polyline.iter().any(|p| p.dist(*cusp) < near)
            })
            .map(|w| w.id)
            .collect();
        out.push(Codim2Point { kind: Codim2Kind::Cusp, location: *cusp, walls: incident });
    }
    // endpoints of bifurcation polylines
    let b_walls: Vec<&Wall> = walls.iter().filter(|w| w.kind == WallKind::Bifurcation).collect();
    let mut junction_candidates: Vec<(Vec2, Vec<u32>)> = Vec::new();
    for w in &b_walls {
        for endpoint in [w.polyline.first(), w.polyline.last()].into_iter().flatten() {
            if region.boundary_distance(*endpoint) < near {
                continue;
            }
            if caustic.distance(*endpoint) < near {
                // lands on the caustic away from cusps?
                let near_cusp = caustic.cusps.iter().any(|c| c.dist(*endpoint) < near);
                if !near_cusp {
                    let incident: Vec<u32> = walls
                        .iter()
                        .filter(|v| v.polyline.iter().any(|p| p.dist(*endpoint) < near))
                        .map(|v| v.id)
                        .collect();
                    out.push(Codim2Point {
                        kind: Codim2Kind::CausticMeetsB,
                        location: *endpoint,
                        walls: incident,
                    });
                }
                continue;
            }
            // interior endpoint: collect it as a junction candidate
            if let Some((loc, ids)) =
                junction_candidates.iter_mut().find(|(loc, _)| loc.dist(*endpoint) < near)
            {
                *loc = (*loc + *endpoint).scale(0.5);
                if !ids.contains(&w.id) {
                    ids.push(w.id);
                }
            } else {
                junction_candidates.push((*endpoint, vec![w.id]));
            }
        }
    }
    for (loc, ids) in junction_candidates {
        // count also polylines passing through without ending there
        let mut incident = ids.clone();
        for w in &b_walls {
            if incident.contains(&w.id) {
                continue;
            }
            if w.polyline.iter().any(|p| p.dist(loc) < near) {
                incident.push(w.id);
            }
        }
        let kind = match incident.len() {
            0 | 1 => continue, // a dangling endpoint: left unclassified
            2 => Codim2Kind::BTransversal,
            _ => Codim2Kind::BTriple,
        };
        out.push(Codim2Point { kind, location: loc, walls: incident });
    }
    out
}
