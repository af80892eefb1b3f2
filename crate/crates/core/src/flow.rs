//! Ascending gradient flow dy/dt = grad f_x(y): adaptive integration with
//! capture/exit events, separatrix tracing from saddles, and extraction of
//! the signed connection graph at a base point.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::config::Tolerances;
use crate::critical::find_critical_points;
use crate::error::{CbError, Result};
use crate::geom::{Rect, Vec2};
use crate::poly::{BasePoint, GeneratingFunction};
use crate::portrait::{
    Branch, CriticalKind, CriticalPoint, Edge, PhasePortrait, Separatrix, Terminus,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Forward,
    Backward,
}

/// Result of one flow integration.
#[derive(Debug, Clone)]
pub struct FlowResult {
    pub polyline: Vec<Vec2>,
    pub terminus: Terminus,
    /// Largest observed decrease of f_x along a forward-oriented step; the
    /// flow ascends, so this stays at numerical noise level.
    pub monotonicity_slack: f64,
}

struct CaptureTargets<'a> {
    points: &'a [CriticalPoint],
    /// Point excluded from capture until the trajectory has escaped it.
    owner: Option<usize>,
    escape_radius: f64,
    capture_radius: f64,
}

// Dormand-Prince 5(4) coefficients.
const A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] =
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Integrate dy/dt = +/- grad f_x(y) from y0 until capture by a critical
/// point, exit from `region`, or exhaustion of `max_time`.
pub fn integrate_flow(
    f: &GeneratingFunction,
    x: BasePoint,
    y0: Vec2,
    direction: Direction,
    max_time: f64,
    region: Rect,
    points: &[CriticalPoint],
    owner: Option<usize>,
    tols: &Tolerances,
) -> Result<FlowResult> {
    let sign = match direction {
        Direction::Forward => 1.0,
        Direction::Backward => -1.0,
    };
    let rhs = |y: Vec2| f.family_gradient(x, y).scale(sign);
    let targets = CaptureTargets {
        points,
        owner,
        escape_radius: (10.0 * tols.tol_capture).max(1e-4),
        capture_radius: tols.tol_capture,
    };
    let mut escaped_owner = match owner {
        Some(o) => y0.dist(points[o].y) > targets.escape_radius,
        None => true,
    };
    // immediate capture at a critical point (other than an unescaped owner)
    if let Some(t) = capture(&targets, y0, escaped_owner) {
        return Ok(FlowResult { polyline: vec![y0], terminus: t, monotonicity_slack: 0.0 });
    }

    let mut y = y0;
    let mut t = 0.0;
    let mut h = 1e-4;
    let mut polyline = vec![y0];
    let mut slack: f64 = 0.0;
    let mut k0 = rhs(y);
    let mut rejected_in_row = 0u32;
    while t < max_time {
        if h > max_time - t {
            h = max_time - t;
        }
        let mut k = [Vec2::ZERO; 7];
        k[0] = k0;
        for stage in 0..6 {
            let mut acc = Vec2::ZERO;
            for (j, kj) in k.iter().enumerate().take(stage + 1) {
                acc = acc + kj.scale(A[stage][j]);
            }
            k[stage + 1] = rhs(y + acc.scale(h));
        }
        let mut y5 = Vec2::ZERO;
        let mut y4 = Vec2::ZERO;
        for j in 0..7 {
            y5 = y5 + k[j].scale(B5[j]);
            y4 = y4 + k[j].scale(B4[j]);
        }
        let y_new = y + y5.scale(h);
        let err = (y5 - y4).norm() * h;
        let scale = tols.ode_abs + tols.ode_rel * y.norm().max(y_new.norm());
        if err > scale && rejected_in_row < 40 {
            h *= (0.9 * (scale / err).powf(0.2)).clamp(0.1, 1.0);
            rejected_in_row += 1;
            continue;
        }
        rejected_in_row = 0;
        // accepted step
        let fx_old = sign * f.eval_family(x, y);
        let fx_new = sign * f.eval_family(x, y_new);
        slack = slack.max(fx_old - fx_new);
        y = y_new;
        t += h;
        k0 = k[6]; // FSAL
        polyline.push(y);
        if !y.is_finite() {
            return Err(CbError::NoTerminus);
        }
        if let Some(o) = owner {
            if !escaped_owner && y.dist(points[o].y) > targets.escape_radius {
                escaped_owner = true;
            }
        }
        if let Some(terminus) = capture(&targets, y, escaped_owner) {
            return Ok(FlowResult { polyline, terminus, monotonicity_slack: slack });
        }
        if !region.contains(y) {
            return Ok(FlowResult {
                polyline,
                terminus: Terminus::Exit(y),
                monotonicity_slack: slack,
            });
        }
        h *= (0.9 * (scale / err.max(1e-300)).powf(0.2)).clamp(0.2, 5.0);
        h = h.min(1.0);
    }
    // the field may simply have stalled inside a capture ball's vicinity
    if f.family_gradient(x, y).norm() < tols.tol_root {
        if let Some(terminus) = capture(&targets, y, true) {
            return Ok(FlowResult { polyline, terminus, monotonicity_slack: slack });
        }
    }
    Err(CbError::NoTerminus)
}

fn capture(targets: &CaptureTargets, y: Vec2, owner_escaped: bool) -> Option<Terminus> {
    let mut best: Option<(f64, &CriticalPoint)> = None;
    for p in targets.points {
        if Some(p.id) == targets.owner && !owner_escaped {
            continue;
        }
        let d = y.dist(p.y);
        if best.map_or(true, |(bd, _)| d < bd) {
            best = Some((d, p));
        }
    }
    let (d, p) = best?;
    if d >= targets.capture_radius {
        return None;
    }
    Some(match p.kind {
        CriticalKind::Saddle => Terminus::Saddle(p.id),
        _ => Terminus::Node(p.id),
    })
}

/// Trace all four separatrices of the saddle with the given id.
pub fn trace_saddle(
    f: &GeneratingFunction,
    x: BasePoint,
    points: &[CriticalPoint],
    saddle: usize,
    region: Rect,
    tols: &Tolerances,
) -> Result<[Separatrix; 4]> {
    let p = &points[saddle];
    debug_assert_eq!(p.kind, CriticalKind::Saddle);
    let h = f.hessian(p.y);
    let (lo, hi) = h.eigenvalues();
    let u_vec = h.eigenvector(hi);
    let s_vec = h.eigenvector(lo);
    let eps = tols.sep_eps_rel * (1.0 + p.y.norm()) * (hi / -lo).sqrt().clamp(0.25, 4.0);
    let mut out = Vec::with_capacity(4);
    for (branch, dir, vec, sgn) in [
        (Branch::U1, Direction::Forward, u_vec, 1.0),
        (Branch::U2, Direction::Forward, u_vec, -1.0),
        (Branch::S1, Direction::Backward, s_vec, 1.0),
        (Branch::S2, Direction::Backward, s_vec, -1.0),
    ] {
        let y0 = p.y + vec.scale(sgn * eps);
        let flow =
            integrate_flow(f, x, y0, dir, tols.max_time, region, points, Some(saddle), tols)?;
        out.push(Separatrix {
            owner: saddle,
            branch,
            polyline: flow.polyline,
            terminus: flow.terminus,
        });
    }
    Ok(out.try_into().expect("four branches"))
}

/// Extract the full phase portrait at a base point off both walls.
pub fn extract_portrait(
    f: &GeneratingFunction,
    x: BasePoint,
    fiber_window: Rect,
    grid_n: u32,
    tols: &Tolerances,
) -> Result<PhasePortrait> {
    let points = match find_critical_points(f, x, fiber_window, grid_n, tols) {
        Ok(p) => p,
        Err(CbError::DegeneratePoint(_)) => return Err(CbError::OnCaustic),
        Err(e) => return Err(e),
    };
    let region = fiber_window.inflate(0.5);
    let mut edges = Vec::new();
    let mut exits = Vec::new();
    let mut separatrices = Vec::new();
    for p in &points {
        if p.kind != CriticalKind::Saddle {
            continue;
        }
        let four = trace_saddle(f, x, &points, p.id, region, tols)?;
        for sep in four {
            match sep.terminus {
                Terminus::Node(node) => {
                    let edge = if sep.branch.is_unstable() {
                        if points[node].kind != CriticalKind::StableNode {
                            return Err(CbError::NoTerminus);
                        }
                        Edge { from: p.id, to: node, branch: sep.branch }
                    } else {
                        if points[node].kind != CriticalKind::UnstableNode {
                            return Err(CbError::NoTerminus);
                        }
                        Edge { from: node, to: p.id, branch: sep.branch }
                    };
                    edges.push(edge);
                }
                Terminus::Saddle(_) => return Err(CbError::OnBifurcation),
                Terminus::Exit(_) => exits.push((p.id, sep.branch)),
            }
            separatrices.push(sep);
        }
    }
    let names = points.iter().map(|p| format!("p{}", p.id)).collect();
    let portrait = PhasePortrait {
        base: x,
        points,
        edges,
        exits,
        separatrices,
        local_model: false,
        names,
        declared_signs: BTreeMap::new(),
    };
    portrait.validate()?;
    Ok(portrait)
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

    fn quadratic() -> GeneratingFunction {
        GeneratingFunction::from_literal(&[[2, 0, 1, 2], [0, 2, 1, 2]]).unwrap()
    }

    fn umbilic() -> GeneratingFunction {
        GeneratingFunction::from_int_terms(&[(3, 0, 1), (1, 2, -3), (2, 0, 1), (0, 2, 1)])
            .unwrap()
    }

    /// Crude explicit-Euler oracle for the 1-d reduction of the fold family:
    /// which sign of the stable eigenvector of the saddle reaches the node
    /// under backward flow.
    fn fold_1d_backward_reaches_node(start: f64) -> bool {
        let mut y = start;
        for _ in 0..4_000_000 {
            y += 1e-5 * (0.75 - 3.0 * y * y); // backward flow of 3y^2 - 0.75
            if (y - 0.5).abs() < 1e-4 {
                return true;
            }
            if y.abs() > 10.0 {
                return false;
            }
        }
        false
    }

    #[test]
    fn quadratic_backward_flow_reaches_origin() {
        let f = quadratic();
        let pts = find_critical_points(&f, Vec2::ZERO, Rect::square(1.5), 12, &tols()).unwrap();
        let res = integrate_flow(
            &f,
            Vec2::ZERO,
            Vec2::new(1.0, 0.0),
            Direction::Backward,
            100.0,
            Rect::square(3.0),
            &pts,
            None,
            &tols(),
        )
        .unwrap();
        assert_eq!(res.terminus, Terminus::Node(0));
        assert!(res.monotonicity_slack <= 1e-9);
    }

    #[test]
    fn starting_at_a_critical_point_terminates_immediately() {
        let f = quadratic();
        let pts = find_critical_points(&f, Vec2::ZERO, Rect::square(1.5), 12, &tols()).unwrap();
        let res = integrate_flow(
            &f,
            Vec2::ZERO,
            pts[0].y,
            Direction::Forward,
            10.0,
            Rect::square(3.0),
            &pts,
            None,
            &tols(),
        )
        .unwrap();
        assert_eq!(res.terminus, Terminus::Node(0));
        assert_eq!(res.polyline.len(), 1);
    }

    #[test]
    fn fold_portrait_structure() {
        // oracle first: the +x side of the saddle's stable axis flows
        // backward to the node, the -x side does not
        assert!(fold_1d_backward_reaches_node(-0.5 + 1e-3));
        assert!(!fold_1d_backward_reaches_node(-0.5 - 1e-3));

        let p = extract_portrait(&fold(), Vec2::new(0.75, 0.0), Rect::square(1.5), 12, &tols())
            .unwrap();
        p.validate().unwrap();
        assert_eq!(p.points.len(), 2);
        // exactly one edge un -> s realized by the S1 branch (stable
        // eigenvector points along +y1, canonical sign makes S1 the +x side)
        assert_eq!(p.edges.len(), 1);
        let e = p.edges[0];
        assert_eq!(p.points[e.from].kind, CriticalKind::UnstableNode);
        assert_eq!(p.points[e.to].kind, CriticalKind::Saddle);
        assert_eq!(e.branch, Branch::S1);
        // both unstable branches and the other stable branch exit
        assert_eq!(p.exits.len(), 3);
        assert_eq!(p.count_connections(e.from, e.to).len(), 1);
    }

    #[test]
    fn quadratic_portrait_trivial() {
        let p = extract_portrait(&quadratic(), Vec2::new(0.3, 0.7), Rect::square(2.0), 12, &tols())
            .unwrap();
        assert_eq!(p.points.len(), 1);
        assert!(p.edges.is_empty());
        assert!(p.exits.is_empty());
    }

    #[test]
    fn umbilic_portrait_at_origin() {
        let p =
            extract_portrait(&umbilic(), Vec2::ZERO, Rect::square(2.0), 12, &tols()).unwrap();
        p.validate().unwrap();
        assert_eq!(p.points.len(), 4);
        // every saddle branch terminates at a node or exits; validation
        // already enforces the 2+2 budget
        let saddles = p.saddles();
        assert_eq!(saddles.len(), 3);
        // the unstable node feeds all three saddles
        let un = p.ids_of(CriticalKind::UnstableNode)[0];
        for s in saddles {
            assert_eq!(p.count_connections(un, s).len(), 1);
        }
    }

    #[test]
    fn portrait_on_caustic_fails() {
        let err =
            extract_portrait(&fold(), Vec2::ZERO, Rect::square(1.5), 12, &tols()).unwrap_err();
        assert!(matches!(err, CbError::OnCaustic));
    }
}
