//! Locating and classifying the critical points of f_x in a fiber window,
//! detecting birth-death pairs at caustic folds, and tracking points along
//! base paths.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::config::Tolerances;
use crate::error::{CbError, Result};
use crate::geom::{Rect, Vec2};
use crate::poly::{BasePoint, GeneratingFunction};
use crate::portrait::{CriticalKind, CriticalPoint};

fn classify(eigenvalues: (f64, f64), tol_degenerate: f64) -> CriticalKind {
    let (lo, hi) = eigenvalues;
    if lo.abs() < tol_degenerate || hi.abs() < tol_degenerate {
        CriticalKind::Degenerate
    } else if lo > 0.0 {
        CriticalKind::UnstableNode
    } else if hi < 0.0 {
        CriticalKind::StableNode
    } else {
        CriticalKind::Saddle
    }
}

fn round_key(v: f64) -> i64 {
    (v * 1e6).round() as i64
}

/// Canonical ordering: lexicographic by position rounded to 1e-6.
fn canonical_sort(points: &mut [Vec2]) {
    points.sort_by_key(|p| (round_key(p.x), round_key(p.y)));
}

/// Find all roots of grad f(y) = x whose Newton basins meet a grid_n x grid_n
/// seeding lattice over the fiber window. Roots are deduplicated within
/// tol_merge, classified and canonically ordered. A degenerate root aborts
/// with DegeneratePoint: the base point lies on the caustic.
pub fn find_critical_points(
    f: &GeneratingFunction,
    x: BasePoint,
    fiber_window: Rect,
    grid_n: u32,
    tols: &Tolerances,
) -> Result<Vec<CriticalPoint>> {
    if grid_n < 8 {
        return Err(CbError::Config("grid_n must be >= 8".into()));
    }
    let keep = fiber_window.inflate(0.05);
    let mut roots: Vec<Vec2> = Vec::new();
    let n = grid_n as usize;
    for i in 0..n {
        for j in 0..n {
            let sx = fiber_window.x_min + fiber_window.width() * (i as f64 + 0.5) / n as f64;
            let sy = fiber_window.y_min + fiber_window.height() * (j as f64 + 0.5) / n as f64;
            let Ok(y) = f.solve_fiber(x, Vec2::new(sx, sy), tols.tol_root) else {
                continue;
            };
            if !keep.contains(y) {
                continue;
            }
            if roots.iter().all(|r| r.dist(y) > tols.tol_merge) {
                roots.push(y);
            }
        }
    }
    canonical_sort(&mut roots);
    let mut out = Vec::with_capacity(roots.len());
    for (id, &y) in roots.iter().enumerate() {
        let eigenvalues = f.hessian(y).eigenvalues();
        let kind = classify(eigenvalues, tols.tol_degenerate);
        if kind == CriticalKind::Degenerate {
            return Err(CbError::DegeneratePoint(y));
        }
        out.push(CriticalPoint { id, y, kind, mu: kind.mu(), eigenvalues });
    }
    Ok(out)
}

/// A birth-death pair read off next to a caustic fold: the two critical
/// points that exist only on one side, with Morse indices differing by one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BirthDeathPair {
    /// The member with the larger Morse index.
    pub high: CriticalPoint,
    pub low: CriticalPoint,
    /// +1 when the pair lives on the side x + eps * normal, -1 otherwise.
    pub side: i8,
}

impl BirthDeathPair {
    pub fn saddle(&self) -> &CriticalPoint {
        if self.high.kind == CriticalKind::Saddle {
            &self.high
        } else {
            &self.low
        }
    }

    /// The node member (the non-saddle one).
    pub fn node(&self) -> &CriticalPoint {
        if self.high.kind == CriticalKind::Saddle {
            &self.low
        } else {
            &self.high
        }
    }

    pub fn kinds(&self) -> (CriticalKind, CriticalKind) {
        (self.high.kind, self.low.kind)
    }
}

/// Sample both sides of a caustic fold and identify the birth-death pair on
/// the richer side. `normal` need not be normalized.
pub fn detect_birth_death(
    f: &GeneratingFunction,
    wall_point: BasePoint,
    normal: Vec2,
    fiber_window: Rect,
    grid_n: u32,
    tols: &Tolerances,
) -> Result<BirthDeathPair> {
    let n = normal.normalized();
    if n.norm() == 0.0 {
        return Err(CbError::Config("zero normal direction".into()));
    }
    let eps = tols.side_eps_rel * fiber_window.diameter().max(1.0);
    let plus = find_critical_points(f, wall_point + n.scale(eps), fiber_window, grid_n, tols)?;
    let minus = find_critical_points(f, wall_point - n.scale(eps), fiber_window, grid_n, tols)?;
    let (rich, poor, side) = if plus.len() == minus.len() + 2 {
        (&plus, &minus, 1i8)
    } else if minus.len() == plus.len() + 2 {
        (&minus, &plus, -1i8)
    } else {
        return Err(CbError::NotAFold(format!(
            "side point counts {} / {} do not differ by 2",
            plus.len(),
            minus.len()
        )));
    };
    // match the poorer side into the richer one; the two leftovers are the pair
    let matching = match_points(poor, rich)?;
    let matched: Vec<usize> = matching.values().copied().collect();
    let extra: Vec<&CriticalPoint> =
        rich.iter().filter(|p| !matched.contains(&p.id)).collect();
    if extra.len() != 2 {
        return Err(CbError::NotAFold("could not isolate the extra pair".into()));
    }
    let (a, b) = (extra[0].clone(), extra[1].clone());
    if a.mu.abs_diff(b.mu) != 1 {
        return Err(CbError::NotAFold(format!(
            "pair indices {} and {} do not differ by 1 (degenerate point of corank 2)",
            a.mu, b.mu
        )));
    }
    let saddles = [&a, &b].iter().filter(|p| p.kind == CriticalKind::Saddle).count();
    if saddles != 1 {
        return Err(CbError::NotAFold("exactly one member of the pair must be a saddle".into()));
    }
    let (high, low) = if a.mu > b.mu { (a, b) } else { (b, a) };
    Ok(BirthDeathPair { high, low, side })
}

/// Minimum-cost injective assignment of `from` indices into `to` indices
/// under the given pairwise distances, found by exhaustive recursion (the
/// groups are desk-scale).
fn min_cost_injection(cost: &[Vec<f64>], to_len: usize) -> Option<Vec<usize>> {
    fn recurse(
        cost: &[Vec<f64>],
        row: usize,
        taken: &mut Vec<bool>,
        current: &mut Vec<usize>,
        acc: f64,
        best: &mut Option<(f64, Vec<usize>)>,
    ) {
        if let Some((b, _)) = best {
            if acc >= *b {
                return;
            }
        }
        if row == cost.len() {
            *best = Some((acc, current.clone()));
            return;
        }
        for (j, taken_j) in taken.clone().iter().enumerate() {
            if *taken_j {
                continue;
            }
            taken[j] = true;
            current.push(j);
            recurse(cost, row + 1, taken, current, acc + cost[row][j], best);
            current.pop();
            taken[j] = false;
        }
    }
    let mut best = None;
    let mut taken = vec![false; to_len];
    recurse(cost, 0, &mut taken, &mut Vec::new(), 0.0, &mut best);
    best.map(|(_, assignment)| assignment)
}

/// Match critical points between two nearby base points, kind by kind and
/// with minimal total displacement: old id -> new id. Fails when some kind
/// has more points in `from` than in `to`.
pub fn match_points(
    from: &[CriticalPoint],
    to: &[CriticalPoint],
) -> Result<BTreeMap<usize, usize>> {
    let mut map = BTreeMap::new();
    for kind in [CriticalKind::UnstableNode, CriticalKind::Saddle, CriticalKind::StableNode] {
        let fk: Vec<&CriticalPoint> = from.iter().filter(|p| p.kind == kind).collect();
        let tk: Vec<&CriticalPoint> = to.iter().filter(|p| p.kind == kind).collect();
        if fk.is_empty() {
            continue;
        }
        if fk.len() > tk.len() {
            return Err(CbError::NotAFold(format!(
                "{} {kind:?} points cannot embed into {}",
                fk.len(),
                tk.len()
            )));
        }
        if fk.len() > 8 {
            return Err(CbError::NotAFold("too many points to match".into()));
        }
        let cost: Vec<Vec<f64>> =
            fk.iter().map(|p| tk.iter().map(|q| p.y.dist(q.y)).collect()).collect();
        let assignment = min_cost_injection(&cost, tk.len())
            .ok_or_else(|| CbError::NotAFold("no assignment found".into()))?;
        for (row, &col) in assignment.iter().enumerate() {
            map.insert(fk[row].id, tk[col].id);
        }
    }
    Ok(map)
}

/// Track critical points along the base segment from `x_from` to `x_to`,
/// composing nearest-neighbour matches over sub-steps; the step count is
/// doubled until every leg matches cleanly. Returns old id -> new id.
pub fn track_points(
    f: &GeneratingFunction,
    x_from: BasePoint,
    x_to: BasePoint,
    fiber_window: Rect,
    grid_n: u32,
    tols: &Tolerances,
) -> Result<BTreeMap<usize, usize>> {
    let start = find_critical_points(f, x_from, fiber_window, grid_n, tols)?;
    'steps: for steps in [1usize, 4, 16, 64] {
        let mut prev = start.clone();
        let mut acc: BTreeMap<usize, usize> = prev.iter().map(|p| (p.id, p.id)).collect();
        for k in 1..=steps {
            let t = k as f64 / steps as f64;
            let x = Vec2::new(
                x_from.x + (x_to.x - x_from.x) * t,
                x_from.y + (x_to.y - x_from.y) * t,
            );
            let Ok(here) = find_critical_points(f, x, fiber_window, grid_n, tols) else {
                continue 'steps;
            };
            if here.len() != prev.len() {
                continue 'steps; // a wall lies on the segment at this resolution
            }
            let Ok(m) = match_points(&prev, &here) else {
                continue 'steps;
            };
            acc = acc
                .into_iter()
                .filter_map(|(orig, cur)| m.get(&cur).map(|&n| (orig, n)))
                .collect();
            prev = here;
        }
        if acc.len() == start.len() {
            return Ok(acc);
        }
    }
    Err(CbError::NotAFold("tracking failed: point count changes along the segment".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tols() -> Tolerances {
        Tolerances::default()
    }

    fn fold() -> GeneratingFunction {
        GeneratingFunction::from_int_terms(&[(3, 0, 1), (0, 2, 1)]).unwrap()
    }

    fn dual_fold() -> GeneratingFunction {
        GeneratingFunction::from_int_terms(&[(3, 0, 1), (0, 2, -1)]).unwrap()
    }

    fn quadratic() -> GeneratingFunction {
        GeneratingFunction::from_literal(&[[2, 0, 1, 2], [0, 2, 1, 2]]).unwrap()
    }

    fn umbilic() -> GeneratingFunction {
        GeneratingFunction::from_int_terms(&[(3, 0, 1), (1, 2, -3), (2, 0, 1), (0, 2, 1)])
            .unwrap()
    }

    fn window() -> Rect {
        Rect::square(1.5)
    }

    #[test]
    fn fold_points_at_quarter() {
        let pts =
            find_critical_points(&fold(), Vec2::new(0.75, 0.0), window(), 12, &tols()).unwrap();
        assert_eq!(pts.len(), 2);
        // canonical order: (-0.5, 0) saddle first, then (0.5, 0) unstable node
        assert!(pts[0].y.dist(Vec2::new(-0.5, 0.0)) < 1e-9);
        assert_eq!(pts[0].kind, CriticalKind::Saddle);
        assert_eq!(pts[0].mu, 1);
        assert!(pts[1].y.dist(Vec2::new(0.5, 0.0)) < 1e-9);
        assert_eq!(pts[1].kind, CriticalKind::UnstableNode);
        assert_eq!(pts[1].mu, 2);
        assert!(pts[0].eigenvalues.0 < 0.0 && pts[0].eigenvalues.1 > 0.0);
    }

    #[test]
    fn fold_no_points_on_negative_side() {
        let pts =
            find_critical_points(&fold(), Vec2::new(-0.75, 0.0), window(), 12, &tols()).unwrap();
        assert!(pts.is_empty());
    }

    #[test]
    fn quadratic_single_unstable_node() {
        let pts =
            find_critical_points(&quadratic(), Vec2::new(0.3, 0.7), window(), 12, &tols()).unwrap();
        assert_eq!(pts.len(), 1);
        assert_eq!(pts[0].kind, CriticalKind::UnstableNode);
        assert!(pts[0].y.dist(Vec2::new(0.3, 0.7)) < 1e-9);
    }

    #[test]
    fn umbilic_counts_inside_and_outside() {
        let inside =
            find_critical_points(&umbilic(), Vec2::ZERO, Rect::square(2.0), 12, &tols()).unwrap();
        assert_eq!(inside.len(), 4);
        let kinds: Vec<CriticalKind> = inside.iter().map(|p| p.kind).collect();
        assert_eq!(kinds.iter().filter(|k| **k == CriticalKind::Saddle).count(), 3);
        assert_eq!(kinds.iter().filter(|k| **k == CriticalKind::UnstableNode).count(), 1);
        let outside =
            find_critical_points(&umbilic(), Vec2::new(5.0, 0.0), Rect::square(4.0), 16, &tols())
                .unwrap();
        assert_eq!(outside.len(), 2);
    }

    #[test]
    fn grid_doubling_stability() {
        for x in [Vec2::new(0.75, 0.0), Vec2::new(0.3, -0.2)] {
            let base = find_critical_points(&umbilic(), x, Rect::square(2.0), 12, &tols()).unwrap();
            let doubled =
                find_critical_points(&umbilic(), x, Rect::square(2.0), 24, &tols()).unwrap();
            assert_eq!(base.len(), doubled.len());
        }
    }

    #[test]
    fn degenerate_point_on_caustic() {
        let err = find_critical_points(&fold(), Vec2::ZERO, window(), 12, &tols()).unwrap_err();
        assert!(matches!(err, CbError::DegeneratePoint(_)));
    }

    #[test]
    fn birth_death_fold_pair() {
        let pair =
            detect_birth_death(&fold(), Vec2::ZERO, Vec2::new(1.0, 0.0), window(), 12, &tols())
                .unwrap();
        assert_eq!(pair.side, 1); // pair on the x1 > 0 side
        assert_eq!(pair.kinds(), (CriticalKind::UnstableNode, CriticalKind::Saddle));
        assert_eq!(pair.high.mu, 2);
        assert_eq!(pair.low.mu, 1);
    }

    #[test]
    fn birth_death_dual_fold_pair() {
        let pair = detect_birth_death(
            &dual_fold(),
            Vec2::ZERO,
            Vec2::new(1.0, 0.0),
            window(),
            12,
            &tols(),
        )
        .unwrap();
        assert_eq!(pair.side, 1);
        assert_eq!(pair.kinds(), (CriticalKind::Saddle, CriticalKind::StableNode));
    }

    #[test]
    fn birth_death_rejects_quadratic() {
        let err = detect_birth_death(
            &quadratic(),
            Vec2::new(0.2, 0.1),
            Vec2::new(1.0, 0.0),
            window(),
            12,
            &tols(),
        )
        .unwrap_err();
        assert!(matches!(err, CbError::NotAFold(_)));
    }

    #[test]
    fn euler_count_matches_across_fold() {
        // alternating count is 0 on both sides of the fold wall
        let plus =
            find_critical_points(&fold(), Vec2::new(0.4, 0.1), window(), 12, &tols()).unwrap();
        let sum: i64 = plus.iter().map(|p| if p.mu % 2 == 0 { 1 } else { -1 }).sum();
        assert_eq!(sum, 0);
    }

    #[test]
    fn tracking_preserves_ids() {
        let m = track_points(
            &umbilic(),
            Vec2::new(0.1, 0.05),
            Vec2::new(0.25, -0.1),
            Rect::square(2.0),
            12,
            &tols(),
        )
        .unwrap();
        assert_eq!(m.len(), 4);
    }
}
