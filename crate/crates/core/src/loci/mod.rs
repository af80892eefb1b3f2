//! The caustic and the bifurcation locus: locating wall points by
//! portrait-difference bisection, tracing the caustic through the fiber
//! discriminant, measuring saddle splittings and assembling the chamber
//! decomposition of a base rectangle.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::config::Tolerances;
use crate::critical::{detect_birth_death, match_points, BirthDeathPair};
use crate::error::{CbError, Result};
use crate::flow::{extract_portrait, integrate_flow, Direction};
use crate::geom::{Rect, Vec2};
use crate::poly::{BasePoint, GeneratingFunction};
use crate::portrait::{CriticalKind, PhasePortrait, PortraitSignature};

/// The caustic as traced through the fiber discriminant.
#[derive(Debug, Clone, Serialize)]
pub struct CausticCurve {
    /// Base-plane polylines (images of det Hess f = 0 under grad f).
    pub segments: Vec<Vec<Vec2>>,
    pub cusps: Vec<Vec2>,
    /// Birth-death payloads sampled on fold points, one per segment where
    /// the side sampling succeeds.
    pub fold_samples: Vec<(Vec2, BirthDeathPair)>,
}

impl CausticCurve {
    pub fn is_empty(&self) -> bool {
        self.segments.iter().all(|s| s.is_empty())
    }

    /// Distance from a base point to the traced caustic.
    pub fn distance(&self, x: Vec2) -> f64 {
        let mut best = f64::INFINITY;
        for seg in &self.segments {
            for w in seg.windows(2) {
                best = best.min(segment_distance(x, w[0], w[1]));
            }
            if let [only] = seg.as_slice() {
                best = best.min(x.dist(*only));
            }
        }
        best
    }
}

fn segment_distance(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let ab = b - a;
    let len2 = ab.dot(ab);
    if len2 == 0.0 {
        return p.dist(a);
    }
    let t = ((p - a).dot(ab) / len2).clamp(0.0, 1.0);
    p.dist(a + ab.scale(t))
}

/// Project a fiber point onto the discriminant {det Hess f = 0} by damped
/// 1-d Newton along the numeric gradient of the determinant.
fn project_to_discriminant(f: &GeneratingFunction, y0: Vec2) -> Option<Vec2> {
    let mut y = y0;
    for _ in 0..60 {
        let d = f.det_hessian(y);
        if d.abs() < 1e-13 {
            return Some(y);
        }
        let h = 1e-6;
        let gx = (f.det_hessian(Vec2::new(y.x + h, y.y)) - f.det_hessian(Vec2::new(y.x - h, y.y)))
            / (2.0 * h);
        let gy = (f.det_hessian(Vec2::new(y.x, y.y + h)) - f.det_hessian(Vec2::new(y.x, y.y - h)))
            / (2.0 * h);
        let g = Vec2::new(gx, gy);
        let g2 = g.dot(g);
        if g2 < 1e-30 {
            return None;
        }
        y = y - g.scale(d / g2);
    }
    if f.det_hessian(y).abs() < 1e-10 {
        Some(y)
    } else {
        None
    }
}

/// Unit tangent of the discriminant at a point on it.
fn discriminant_tangent(f: &GeneratingFunction, y: Vec2) -> Vec2 {
    let h = 1e-6;
    let gx =
        (f.det_hessian(Vec2::new(y.x + h, y.y)) - f.det_hessian(Vec2::new(y.x - h, y.y))) / (2.0 * h);
    let gy =
        (f.det_hessian(Vec2::new(y.x, y.y + h)) - f.det_hessian(Vec2::new(y.x, y.y - h))) / (2.0 * h);
    Vec2::new(gx, gy).perp().normalized()
}

/// Walk along the discriminant by signed arclength (predictor-corrector).
fn walk_discriminant(f: &GeneratingFunction, start: Vec2, dist: f64) -> Option<Vec2> {
    let mut y = start;
    let mut remaining = dist.abs();
    let dir = dist.signum();
    let mut tangent = discriminant_tangent(f, y).scale(dir);
    while remaining > 0.0 {
        let step = remaining.min(1e-3);
        let predicted = y + tangent.scale(step);
        let corrected = project_to_discriminant(f, predicted)?;
        let mut t_new = discriminant_tangent(f, corrected);
        if t_new.dot(tangent) < 0.0 {
            t_new = -t_new;
        }
        y = corrected;
        tangent = t_new;
        remaining -= step;
    }
    Some(y)
}

/// Base-plane speed |d(grad f)/ds| of the caustic at a discriminant point.
fn caustic_speed(f: &GeneratingFunction, y: Vec2) -> f64 {
    let delta = 1e-5;
    let (Some(a), Some(b)) =
        (walk_discriminant(f, y, delta), walk_discriminant(f, y, -delta))
    else {
        return f64::INFINITY;
    };
    f.gradient(a).dist(f.gradient(b)) / (2.0 * delta)
}

/// March the squares of det Hess f over the fiber window and return chained
/// discriminant polylines in fiber coordinates.
fn march_discriminant(
    f: &GeneratingFunction,
    fiber_window: Rect,
    n_samples: u32,
) -> Vec<Vec<Vec2>> {
    let n = n_samples as usize;
    let dx = fiber_window.width() / n as f64;
    let dy = fiber_window.height() / n as f64;
    let val = |i: usize, j: usize| {
        f.det_hessian(Vec2::new(
            fiber_window.x_min + i as f64 * dx,
            fiber_window.y_min + j as f64 * dy,
        ))
    };
    let mut grid = vec![vec![0.0; n + 1]; n + 1];
    for (i, row) in grid.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = val(i, j);
            // exact zeros on the lattice break the sign-change bookkeeping
            if *v == 0.0 {
                *v = f64::MIN_POSITIVE;
            }
        }
    }
    let point = |i: usize, j: usize| {
        Vec2::new(fiber_window.x_min + i as f64 * dx, fiber_window.y_min + j as f64 * dy)
    };
    // crossing on a lattice edge, keyed so adjacent cells agree
    #[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug)]
    enum EdgeKey {
        H(usize, usize), // from (i,j) to (i+1,j)
        V(usize, usize), // from (i,j) to (i,j+1)
    }
    let mut crossings: BTreeMap<EdgeKey, Vec2> = BTreeMap::new();
    let mut links: Vec<(EdgeKey, EdgeKey)> = Vec::new();
    let crossing_point = |a: Vec2, b: Vec2, va: f64, vb: f64| {
        let t = va / (va - vb);
        let mut lo = a;
        let mut hi = b;
        let mut vlo = va;
        // bisection refinement along the edge
        let mut guess = a + (b - a).scale(t.clamp(0.0, 1.0));
        for _ in 0..40 {
            let vm = f.det_hessian(guess);
            if vm == 0.0 {
                break;
            }
            if (vm > 0.0) == (vlo > 0.0) {
                lo = guess;
                vlo = vm;
            } else {
                hi = guess;
            }
            guess = (lo + hi).scale(0.5);
        }
        guess
    };
    for i in 0..n {
        for j in 0..n {
            let corners = [(i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)];
            let vals = [grid[i][j], grid[i + 1][j], grid[i + 1][j + 1], grid[i][j + 1]];
            let keys = [
                EdgeKey::H(i, j),
                EdgeKey::V(i + 1, j),
                EdgeKey::H(i, j + 1),
                EdgeKey::V(i, j),
            ];
            let mut cell_crossings: Vec<EdgeKey> = Vec::new();
            for e in 0..4 {
                let (c0, c1) = (corners[e], corners[(e + 1) % 4]);
                let (v0, v1) = (vals[e], vals[(e + 1) % 4]);
                if (v0 > 0.0) != (v1 > 0.0) {
                    let key = keys[e];
                    crossings
                        .entry(key)
                        .or_insert_with(|| crossing_point(point(c0.0, c0.1), point(c1.0, c1.1), v0, v1));
                    cell_crossings.push(key);
                }
            }
            match cell_crossings.len() {
                2 => links.push((cell_crossings[0], cell_crossings[1])),
                4 => {
                    // ambiguous saddle cell: split by the center sign
                    let c = f.det_hessian(point(i, j) + Vec2::new(dx * 0.5, dy * 0.5));
                    if (c > 0.0) == (vals[0] > 0.0) {
                        links.push((cell_crossings[0], cell_crossings[3]));
                        links.push((cell_crossings[1], cell_crossings[2]));
                    } else {
                        links.push((cell_crossings[0], cell_crossings[1]));
                        links.push((cell_crossings[2], cell_crossings[3]));
                    }
                }
                _ => {}
            }
        }
    }
    // walk the link graph into chains
    let mut adjacency: BTreeMap<EdgeKey, Vec<EdgeKey>> = BTreeMap::new();
    for &(a, b) in &links {
        adjacency.entry(a).or_default().push(b);
        adjacency.entry(b).or_default().push(a);
    }
    let mut used: BTreeMap<(EdgeKey, EdgeKey), bool> = BTreeMap::new();
    let mut chains = Vec::new();
    let keys: Vec<EdgeKey> = adjacency.keys().copied().collect();
    for &start in &keys {
        let degree = adjacency[&start].len();
        for &next in &adjacency[&start] {
            if degree <= 2 && adjacency.values().len() > 0 {
                // start new chains only at endpoints or unvisited loop edges
            }
            if *used.get(&(start, next)).unwrap_or(&false) {
                continue;
            }
            // prefer starting at endpoints (degree 1)
            if degree != 1 && adjacency[&start].iter().all(|_| true) && degree == 2 {
                // loops handled below if untouched
                continue;
            }
            let mut chain = vec![start, next];
            used.insert((start, next), true);
            used.insert((next, start), true);
            loop {
                let last = *chain.last().unwrap();
                let prev = chain[chain.len() - 2];
                let Some(cont) = adjacency[&last]
                    .iter()
                    .find(|&&k| k != prev && !*used.get(&(last, k)).unwrap_or(&false))
                else {
                    break;
                };
                used.insert((last, *cont), true);
                used.insert((*cont, last), true);
                chain.push(*cont);
            }
            chains.push(chain);
        }
    }
    // remaining untouched links are closed loops
    for &(a, b) in &links {
        if *used.get(&(a, b)).unwrap_or(&false) {
            continue;
        }
        let mut chain = vec![a, b];
        used.insert((a, b), true);
        used.insert((b, a), true);
        loop {
            let last = *chain.last().unwrap();
            let prev = chain[chain.len() - 2];
            let Some(cont) = adjacency[&last]
                .iter()
                .find(|&&k| k != prev && !*used.get(&(last, k)).unwrap_or(&false))
            else {
                break;
            };
            used.insert((last, *cont), true);
            used.insert((*cont, last), true);
            chain.push(*cont);
        }
        chains.push(chain);
    }
    chains
        .into_iter()
        .map(|chain| chain.into_iter().map(|k| crossings[&k]).collect())
        .collect()
}

/// Trace the caustic: march the fiber discriminant, refine, map through
/// grad f, clip to the region, and classify cusps as deep local minima of
/// the parametrization speed.
pub fn trace_caustic(
    f: &GeneratingFunction,
    region: Rect,
    fiber_window: Rect,
    n_samples: u32,
    grid_n: u32,
    tols: &Tolerances,
) -> CausticCurve {
    let fiber_chains = march_discriminant(f, fiber_window, n_samples);
    let mut segments: Vec<Vec<Vec2>> = Vec::new();
    let mut cusps: Vec<Vec2> = Vec::new();
    let mut fold_samples = Vec::new();
    let pad = region.inflate(0.02);
    for chain in fiber_chains {
        // refine fiber points and detect cusp candidates along the chain
        let refined: Vec<Vec2> =
            chain.iter().filter_map(|&y| project_to_discriminant(f, y)).collect();
        if refined.len() < 2 {
            continue;
        }
        let speeds: Vec<f64> = refined.iter().map(|&y| caustic_speed(f, y)).collect();
        let mut sorted = speeds.clone();
        sorted.sort_by(|a, b| a.total_cmp(b));
        let median = sorted[sorted.len() / 2].max(1e-300);
        let closed = refined.first().unwrap().dist(*refined.last().unwrap())
            < 3.0 * fiber_window.diameter() / n_samples as f64;
        let m = refined.len();
        for i in 0..m {
            if !closed && (i == 0 || i + 1 == m) {
                continue;
            }
            let prev = speeds[(i + m - 1) % m];
            let next = speeds[(i + 1) % m];
            if speeds[i] < prev && speeds[i] < next && speeds[i] < 0.5 * median {
                if let Some(cusp_y) = refine_cusp(f, refined[i]) {
                    let speed = caustic_speed(f, cusp_y);
                    if speed < tols.tol_cusp * median {
                        let cx = f.gradient(cusp_y);
                        if pad.contains(cx)
                            && cusps.iter().all(|c| c.dist(cx) > 1e-4 * region.diameter())
                        {
                            cusps.push(cx);
                        }
                    }
                }
            }
        }
        // map to the base and split at region exits
        let mut current: Vec<Vec2> = Vec::new();
        for &y in &refined {
            let x = f.gradient(y);
            if pad.contains(x) {
                current.push(x);
            } else if current.len() > 1 {
                segments.push(std::mem::take(&mut current));
            } else {
                current.clear();
            }
        }
        if current.len() > 1 {
            segments.push(current);
        }
    }
    // attach a birth-death payload per segment where possible
    for seg in &segments {
        let mid = seg[seg.len() / 2];
        let before = seg[seg.len() / 2 - 1];
        let tangent = (mid - before).normalized();
        let normal = tangent.perp();
        if cusps.iter().any(|c| c.dist(mid) < 1e-2 * region.diameter()) {
            continue;
        }
        if let Ok(pair) = detect_birth_death(f, mid, normal, fiber_window, grid_n, tols) {
            fold_samples.push((mid, pair));
        }
    }
    CausticCurve { segments, cusps, fold_samples }
}

/// Golden-section refinement of a speed minimum along the discriminant.
fn refine_cusp(f: &GeneratingFunction, y0: Vec2) -> Option<Vec2> {
    let h = 2e-2;
    let speed_at = |t: f64| -> f64 {
        match walk_discriminant(f, y0, t) {
            Some(y) => caustic_speed(f, y),
            None => f64::INFINITY,
        }
    };
    let (mut a, mut b) = (-h, h);
    let phi = 0.5 * (3.0 - 5.0_f64.sqrt());
    let mut c = a + phi * (b - a);
    let mut d = b - phi * (b - a);
    let mut fc = speed_at(c);
    let mut fd = speed_at(d);
    for _ in 0..80 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = a + phi * (b - a);
            fc = speed_at(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = b - phi * (b - a);
            fd = speed_at(d);
        }
    }
    walk_discriminant(f, y0, 0.5 * (a + b))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WallKind {
    CausticFold,
    Bifurcation,
}

#[derive(Debug, Clone, Serialize)]
pub enum WallPayload {
    Fold(BirthDeathPair),
    /// Fiber positions of the bifurcating pair at the wall, tail first.
    SaddlePair { tail: Vec2, head: Vec2 },
}

#[derive(Debug, Clone, Serialize)]
pub struct WallPoint {
    pub x: Vec2,
    pub kind: WallKind,
    pub payload: WallPayload,
}

/// Portrait at x, retried under deterministic jitter when x sits on a wall.
fn portrait_with_jitter(
    f: &GeneratingFunction,
    x: BasePoint,
    fiber_window: Rect,
    grid_n: u32,
    tols: &Tolerances,
    jitter: f64,
) -> Result<PhasePortrait> {
    let offsets = [
        Vec2::ZERO,
        Vec2::new(jitter, 0.43 * jitter),
        Vec2::new(-0.71 * jitter, jitter),
        Vec2::new(0.37 * jitter, -jitter),
    ];
    let mut last = CbError::OnCaustic;
    for off in offsets {
        match extract_portrait(f, x + off, fiber_window, grid_n, tols) {
            Ok(p) => return Ok(p),
            Err(e) => last = e,
        }
    }
    Err(last)
}

/// Compare two portraits at nearby base points after id tracking. `None`
/// means the matching itself failed (treat as: there is a wall between).
fn signatures_match(a: &PhasePortrait, b: &PhasePortrait) -> Option<bool> {
    if a.points.len() != b.points.len() {
        return Some(false);
    }
    let map = match_points(&a.points, &b.points).ok()?;
    let sig_a: PortraitSignature = a.signature().relabel(&map)?;
    Some(sig_a == b.signature())
}

/// Classify the wall located between two flanking portraits.
fn classify_wall(
    f: &GeneratingFunction,
    wall_x: Vec2,
    toward: Vec2,
    a: &PhasePortrait,
    b: &PhasePortrait,
    fiber_window: Rect,
    grid_n: u32,
    tols: &Tolerances,
) -> Result<WallPoint> {
    if a.points.len() != b.points.len() {
        let pair = detect_birth_death(f, wall_x, toward, fiber_window, grid_n, tols)?;
        return Ok(WallPoint { x: wall_x, kind: WallKind::CausticFold, payload: WallPayload::Fold(pair) });
    }
    // equal counts: an edge-only change; find the rewired saddles
    let map = match_points(&a.points, &b.points)
        .map_err(|_| CbError::UnresolvedWall(wall_x))?;
    let edges_a: Vec<(usize, usize, bool)> = a
        .edges
        .iter()
        .map(|e| (map[&e.from], map[&e.to], e.branch.is_unstable()))
        .collect();
    let edges_b: Vec<(usize, usize, bool)> =
        b.edges.iter().map(|e| (e.from, e.to, e.branch.is_unstable())).collect();
    let mut tail_votes: BTreeMap<usize, usize> = BTreeMap::new();
    let mut head_votes: BTreeMap<usize, usize> = BTreeMap::new();
    let mut vote = |edge: &(usize, usize, bool)| {
        let &(from, to, unstable) = edge;
        if unstable {
            *tail_votes.entry(from).or_default() += 1;
        } else {
            *head_votes.entry(to).or_default() += 1;
        }
    };
    for e in &edges_a {
        if !edges_b.contains(e) {
            vote(e);
        }
    }
    for e in &edges_b {
        if !edges_a.contains(e) {
            vote(e);
        }
    }
    // exit changes also mark rewired branches
    let exits_a: Vec<(usize, bool)> =
        a.exits.iter().map(|&(s, br)| (map[&s], br.is_unstable())).collect();
    let exits_b: Vec<(usize, bool)> = b.exits.iter().map(|&(s, br)| (s, br.is_unstable())).collect();
    for &(s, unstable) in &exits_a {
        if !exits_b.contains(&(s, unstable)) {
            if unstable {
                *tail_votes.entry(s).or_default() += 1;
            } else {
                *head_votes.entry(s).or_default() += 1;
            }
        }
    }
    for &(s, unstable) in &exits_b {
        if !exits_a.contains(&(s, unstable)) {
            if unstable {
                *tail_votes.entry(s).or_default() += 1;
            } else {
                *head_votes.entry(s).or_default() += 1;
            }
        }
    }
    let top = |votes: &BTreeMap<usize, usize>| {
        votes.iter().max_by_key(|(_, &c)| c).map(|(&s, _)| s)
    };
    let (tail_b, head_b) = match (top(&tail_votes), top(&head_votes)) {
        (Some(t), Some(h)) if t != h => (t, h),
        (Some(t), _) => {
            // only the unstable rewiring is visible: the head is the other
            // involved saddle, identified by the lower/higher value rule
            match other_saddle(b, t) {
                Some(h) => (t, h),
                None => return Err(CbError::UnresolvedWall(wall_x)),
            }
        }
        (_, Some(h)) => match other_saddle(b, h) {
            Some(t) => (t, h),
            None => return Err(CbError::UnresolvedWall(wall_x)),
        },
        _ => return Err(CbError::UnresolvedWall(wall_x)),
    };
    // the separatrix ascends from tail to head
    let (tail_b, head_b) = {
        let ft = f.eval_family(wall_x, b.points[tail_b].y);
        let fh = f.eval_family(wall_x, b.points[head_b].y);
        if ft <= fh {
            (tail_b, head_b)
        } else {
            (head_b, tail_b)
        }
    };
    Ok(WallPoint {
        x: wall_x,
        kind: WallKind::Bifurcation,
        payload: WallPayload::SaddlePair { tail: b.points[tail_b].y, head: b.points[head_b].y },
    })
}

/// With only one rewired saddle visible, the partner is the unique other
/// saddle; ambiguity is reported as an unresolved wall.
fn other_saddle(p: &PhasePortrait, known: usize) -> Option<usize> {
    let saddles = p.saddles();
    let others: Vec<usize> = saddles.into_iter().filter(|&s| s != known).collect();
    match others.as_slice() {
        [only] => Some(*only),
        _ => None,
    }
}

/// Locate and classify every wall point on the open segment (x_a, x_b).
/// The endpoints must lie off the walls.
pub fn detect_wall_on_segment(
    f: &GeneratingFunction,
    x_a: BasePoint,
    x_b: BasePoint,
    fiber_window: Rect,
    grid_n: u32,
    tols: &Tolerances,
) -> Result<Vec<WallPoint>> {
    let pa = extract_portrait(f, x_a, fiber_window, grid_n, tols)?;
    let pb = extract_portrait(f, x_b, fiber_window, grid_n, tols)?;
    let mut out = Vec::new();
    detect_between(f, x_a, &pa, x_b, &pb, fiber_window, grid_n, tols, &mut out, 0)?;
    out.sort_by(|u, v| {
        u.x.dist(x_a).total_cmp(&v.x.dist(x_a))
    });
    Ok(out)
}

/// Critical-point count at a base point; a degenerate root means the point
/// sits on the caustic itself.
fn point_count(
    f: &GeneratingFunction,
    x: Vec2,
    fiber_window: Rect,
    grid_n: u32,
    tols: &Tolerances,
) -> Option<usize> {
    crate::critical::find_critical_points(f, x, fiber_window, grid_n, tols).ok().map(|p| p.len())
}

#[allow(clippy::too_many_arguments)]
fn detect_between(
    f: &GeneratingFunction,
    x_a: Vec2,
    pa: &PhasePortrait,
    x_b: Vec2,
    pb: &PhasePortrait,
    fiber_window: Rect,
    grid_n: u32,
    tols: &Tolerances,
    out: &mut Vec<WallPoint>,
    depth: u32,
) -> Result<()> {
    if depth > 16 {
        return Err(CbError::UnresolvedWall(x_a));
    }
    if signatures_match(pa, pb) == Some(true) {
        return Ok(());
    }
    if pa.points.len() != pb.points.len() {
        // at least one fold inside: counts bisect cheaply and stay reliable
        // arbitrarily close to the wall, where flows slow down
        let count_a = pa.points.len();
        let (mut a, mut b) = (x_a, x_b);
        let mut iterations = 0;
        while a.dist(b) > tols.tol_wall && iterations < 64 {
            iterations += 1;
            let mid = (a + b).scale(0.5);
            match point_count(f, mid, fiber_window, grid_n, tols) {
                Some(c) if c == count_a => a = mid,
                Some(_) => b = mid,
                None => break, // a degenerate root: the wall is at mid
            }
        }
        let wall_x = (a + b).scale(0.5);
        let toward = (x_b - x_a).normalized();
        let pair = detect_birth_death(f, wall_x, toward, fiber_window, grid_n, tols)?;
        out.push(WallPoint {
            x: wall_x,
            kind: WallKind::CausticFold,
            payload: WallPayload::Fold(pair),
        });
        // flank points must sit outside the slow-passage band around the fold
        let seg_len = x_a.dist(x_b);
        let dir = toward;
        let recurse_side = |from: Vec2,
                                from_p: &PhasePortrait,
                                wall: Vec2,
                                sign: f64,
                                out: &mut Vec<WallPoint>|
         -> Result<()> {
            let mut delta = (0.02 * seg_len).max(2.0 * tols.tol_wall);
            for _ in 0..6 {
                let flank = wall + dir.scale(sign * delta);
                if (flank - from).dot(dir) * sign >= 0.0 {
                    break; // flank escaped the sub-segment
                }
                if let Ok(p) = extract_portrait(f, flank, fiber_window, grid_n, tols) {
                    let (lo_x, lo_p, hi_x, hi_p) = if sign < 0.0 {
                        (from, from_p, flank, &p)
                    } else {
                        (flank, &p, from, from_p)
                    };
                    return detect_between(
                        f,
                        lo_x,
                        lo_p,
                        hi_x,
                        hi_p,
                        fiber_window,
                        grid_n,
                        tols,
                        out,
                        depth + 1,
                    );
                }
                delta *= 4.0;
            }
            // no valid flank: the remaining sub-segment is swallowed by the
            // slow band; there is no room for further walls in it
            Ok(())
        };
        recurse_side(x_a, pa, wall_x, -1.0, out)?;
        recurse_side(x_b, pb, wall_x, 1.0, out)?;
        return Ok(());
    }
    // equal counts: a separatrix rewiring; flows near these walls stay
    // hyperbolic so portrait bisection converges
    let (mut a, mut b) = (x_a, x_b);
    let mut left = pa.clone();
    let mut right = pb.clone();
    let mut iterations = 0;
    while a.dist(b) > tols.tol_wall && iterations < 64 {
        iterations += 1;
        let mid = (a + b).scale(0.5);
        let probe = match extract_portrait(f, mid, fiber_window, grid_n, tols) {
            Ok(p) => Some(p),
            Err(_) => {
                let shifted = a + (b - a).scale(0.47);
                extract_portrait(f, shifted, fiber_window, grid_n, tols).ok()
            }
        };
        match probe {
            Some(pm) => {
                if signatures_match(&left, &pm) == Some(true) {
                    a = pm.base;
                    left = pm;
                } else {
                    b = pm.base;
                    right = pm;
                }
            }
            None => break, // both probes on the wall: location is pinned
        }
    }
    let wall_x = (a + b).scale(0.5);
    let toward = (x_b - x_a).normalized();
    let point = classify_wall(f, wall_x, toward, &left, &right, fiber_window, grid_n, tols)?;
    out.push(point);
    // recurse on the outer sub-segments
    detect_between(f, x_a, pa, a, &left, fiber_window, grid_n, tols, out, depth + 1)?;
    detect_between(f, b, &right, x_b, pb, fiber_window, grid_n, tols, out, depth + 1)?;
    Ok(())
}

/// Signed splitting of the connection from saddle `si` toward saddle `sj`:
/// the offset between the unstable manifold of si and the stable manifold of
/// sj measured on a transverse section near sj. A sign change along a base
/// path brackets the bifurcation locus.
pub fn saddle_splitting(
    f: &GeneratingFunction,
    x: BasePoint,
    portrait: &PhasePortrait,
    si: usize,
    sj: usize,
    tols: &Tolerances,
) -> Result<f64> {
    let points = &portrait.points;
    if points[si].kind != CriticalKind::Saddle || points[sj].kind != CriticalKind::Saddle {
        return Err(CbError::Config("saddle_splitting needs two saddles".into()));
    }
    let yi = points[si].y;
    let yj = points[sj].y;
    let dist = yi.dist(yj);
    if dist == 0.0 {
        return Err(CbError::Config("saddles coincide".into()));
    }
    // section near sj, transverse to the chord
    let chord = (yj - yi).normalized();
    let center = yj - chord.scale(0.25 * dist);
    let normal = chord.perp();
    let half_len = 0.45 * dist;
    let region = Rect::new(
        yi.x.min(yj.x) - dist,
        yi.x.max(yj.x) + dist,
        yi.y.min(yj.y) - dist,
        yi.y.max(yj.y) + dist,
    );
    // crossing of a trajectory with the section line, as its signed offset
    let crossing = |poly: &[Vec2]| -> Option<f64> {
        for w in poly.windows(2) {
            let s0 = (w[0] - center).dot(chord);
            let s1 = (w[1] - center).dot(chord);
            if (s0 <= 0.0) != (s1 <= 0.0) {
                let t = s0 / (s0 - s1);
                let p = w[0] + (w[1] - w[0]).scale(t);
                let offset = (p - center).dot(normal);
                if offset.abs() <= half_len {
                    return Some(offset);
                }
            }
        }
        None
    };
    // unstable branches of si, excluding sj from capture so near-connections
    // sweep past and register an offset
    let others: Vec<_> = points.iter().filter(|p| p.id != sj).cloned().collect();
    let h = f.hessian(yi);
    let (_, hi_eig) = h.eigenvalues();
    let u_vec = h.eigenvector(hi_eig);
    let eps = tols.sep_eps_rel * (1.0 + yi.norm());
    let mut u_offset: Option<f64> = None;
    for sgn in [1.0, -1.0] {
        let start = yi + u_vec.scale(sgn * eps);
        if let Ok(res) =
            integrate_flow(f, x, start, Direction::Forward, tols.max_time, region, &others, Some(si), tols)
        {
            if let Some(off) = crossing(&res.polyline) {
                u_offset = Some(off);
                break;
            }
        }
    }
    let Some(u_offset) = u_offset else {
        return Err(CbError::NoCrossing);
    };
    // stable manifold of sj, traced backward to the same section
    let hj = f.hessian(yj);
    let (lo_eig, _) = hj.eigenvalues();
    let s_vec = hj.eigenvector(lo_eig);
    let epsj = tols.sep_eps_rel * (1.0 + yj.norm());
    let mut s_offset: Option<f64> = None;
    for sgn in [1.0, -1.0] {
        let start = yj + s_vec.scale(sgn * epsj);
        if let Ok(res) = integrate_flow(
            f,
            x,
            start,
            Direction::Backward,
            tols.max_time,
            region,
            &others,
            Some(sj),
            tols,
        ) {
            if let Some(off) = crossing(&res.polyline) {
                s_offset = Some(off);
                break;
            }
        }
    }
    let Some(s_offset) = s_offset else {
        return Err(CbError::NoCrossing);
    };
    Ok(u_offset - s_offset)
}

pub mod diagram;
