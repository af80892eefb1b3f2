//! Graded Morse complexes of phase portraits: coherent orientation search,
//! boundary matrices and exact rational homology.

use std::collections::BTreeMap;

use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use crate::error::{CbError, Result};
use crate::exact::{self, IntMat};
use crate::portrait::{Branch, CriticalKind, PhasePortrait};

/// Per-saddle sign data: the sign carried by the S1 branch (S2 gets the
/// opposite) and by the U1 branch (U2 opposite). The two components of a
/// stable or unstable manifold always carry opposite signs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SaddleSigns {
    pub s1: i8,
    pub u1: i8,
}

/// A coherent orientation: separatrix branch -> sign.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Orientation {
    pub signs: BTreeMap<usize, SaddleSigns>,
}

impl Orientation {
    pub fn sign(&self, saddle: usize, branch: Branch) -> i8 {
        let s = self.signs[&saddle];
        match branch {
            Branch::S1 => s.s1,
            Branch::S2 => -s.s1,
            Branch::U1 => s.u1,
            Branch::U2 => -s.u1,
        }
    }

    /// Reconstruct from per-edge declared signs (synthetic documents).
    /// Branches without a declaration default to +1 on S1/U1.
    pub fn from_declared(portrait: &PhasePortrait) -> Result<Orientation> {
        let mut signs = BTreeMap::new();
        for &s in &portrait.saddles() {
            let mut s1: Option<i8> = None;
            let mut u1: Option<i8> = None;
            for (&(owner, branch), &sgn) in &portrait.declared_signs {
                if owner != s {
                    continue;
                }
                let (slot, value) = match branch {
                    Branch::S1 => (&mut s1, sgn),
                    Branch::S2 => (&mut s1, -sgn),
                    Branch::U1 => (&mut u1, sgn),
                    Branch::U2 => (&mut u1, -sgn),
                };
                if let Some(prev) = *slot {
                    if prev != value {
                        return Err(CbError::SchemaError {
                            path: format!("signs of saddle {s}"),
                            message: "paired branches must carry opposite signs".into(),
                        });
                    }
                } else {
                    *slot = Some(value);
                }
            }
            signs.insert(s, SaddleSigns { s1: s1.unwrap_or(1), u1: u1.unwrap_or(1) });
        }
        Ok(Orientation { signs })
    }
}

/// Identification of the branches forming a saddle-to-saddle separatrix at
/// an adjacent bifurcation wall: the tail's unstable branch merges with the
/// head's stable branch there.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BifurcationContext {
    pub tail: usize,
    pub head: usize,
    pub tail_u: Branch,
    pub head_s: Branch,
}

/// One two-step broken line un -> saddle -> sn contributing to d1.d0.
struct BrokenPath {
    saddle: usize,
    s_branch: Branch,
    u_branch: Branch,
}

fn broken_paths(portrait: &PhasePortrait) -> BTreeMap<(usize, usize), Vec<BrokenPath>> {
    let mut down: BTreeMap<usize, Vec<(usize, Branch)>> = BTreeMap::new(); // saddle -> [(sn, ub)]
    let mut up: BTreeMap<usize, Vec<(usize, Branch)>> = BTreeMap::new(); // saddle -> [(un, sb)]
    for e in &portrait.edges {
        if e.branch.is_unstable() {
            down.entry(e.from).or_default().push((e.to, e.branch));
        } else {
            up.entry(e.to).or_default().push((e.from, e.branch));
        }
    }
    let mut paths: BTreeMap<(usize, usize), Vec<BrokenPath>> = BTreeMap::new();
    for &s in &portrait.saddles() {
        let (Some(ups), Some(downs)) = (up.get(&s), down.get(&s)) else {
            continue;
        };
        for &(un, sb) in ups {
            for &(sn, ub) in downs {
                paths
                    .entry((un, sn))
                    .or_default()
                    .push(BrokenPath { saddle: s, s_branch: sb, u_branch: ub });
            }
        }
    }
    paths
}

/// Constraints the signs convention imposes on one side of a bifurcation
/// wall, phrased on branches of this portrait: pairs required equal and
/// pairs required opposite.
fn convention_constraints(
    portrait: &PhasePortrait,
    ctx: &BifurcationContext,
) -> (Vec<((usize, Branch), (usize, Branch))>, Vec<((usize, Branch), (usize, Branch))>) {
    let mut equal = Vec::new();
    let mut opposite = Vec::new();
    // A node feeding the head through the merging stable branch also feeds
    // the tail: those two incoming branches carry the same sign.
    if let Some(head_edge) =
        portrait.edges.iter().find(|e| e.to == ctx.head && e.branch == ctx.head_s)
    {
        let tail_in: Vec<&crate::portrait::Edge> = portrait
            .edges
            .iter()
            .filter(|e| e.to == ctx.tail && e.from == head_edge.from && !e.branch.is_unstable())
            .collect();
        if tail_in.len() == 1 {
            equal.push(((ctx.tail, tail_in[0].branch), (ctx.head, ctx.head_s)));
        }
    }
    // The tail's merging unstable branch and the head's unstable branch into
    // the same node carry opposite signs.
    if let Some(tail_edge) =
        portrait.edges.iter().find(|e| e.from == ctx.tail && e.branch == ctx.tail_u)
    {
        let head_out: Vec<&crate::portrait::Edge> = portrait
            .edges
            .iter()
            .filter(|e| e.from == ctx.head && e.to == tail_edge.to && e.branch.is_unstable())
            .collect();
        if head_out.len() == 1 {
            opposite.push(((ctx.tail, ctx.tail_u), (ctx.head, head_out[0].branch)));
        }
    }
    (equal, opposite)
}

/// Exhaustively search the 4^(#saddles) per-saddle sign choices for a
/// coherent orientation: every square cancels in d1.d0, the signs convention
/// holds for every supplied bifurcation context, and any pinned branch signs
/// are respected. Deterministic: saddles ordered by id, first valid bit
/// pattern wins.
pub fn solve_orientation(
    portrait: &PhasePortrait,
    contexts: &[BifurcationContext],
    pins: &BTreeMap<(usize, Branch), i8>,
) -> Result<Orientation> {
    let saddles = portrait.saddles();
    if saddles.len() > 12 {
        return Err(CbError::NoCoherentOrientation(format!(
            "exhaustive search not attempted for {} saddles",
            saddles.len()
        )));
    }
    let paths = broken_paths(portrait);
    if !portrait.local_model {
        for ((un, sn), list) in &paths {
            if list.len() == 1 {
                return Err(CbError::NoCoherentOrientation(format!(
                    "missing square partner for the broken line {} -> {} -> {}",
                    portrait.names[*un], portrait.names[list[0].saddle], portrait.names[*sn],
                )));
            }
        }
    }
    let mut equal = Vec::new();
    let mut opposite = Vec::new();
    for ctx in contexts {
        let (e, o) = convention_constraints(portrait, ctx);
        equal.extend(e);
        opposite.extend(o);
    }

    let n = saddles.len();
    let total = 4usize.pow(n as u32);
    'pattern: for code in 0..total {
        let mut signs = BTreeMap::new();
        let mut c = code;
        for &s in &saddles {
            let bits = c % 4;
            c /= 4;
            let s1 = if bits & 1 == 0 { 1 } else { -1 };
            let u1 = if bits & 2 == 0 { 1 } else { -1 };
            signs.insert(s, SaddleSigns { s1, u1 });
        }
        let orientation = Orientation { signs };
        for (&(sdl, br), &want) in pins {
            if orientation.sign(sdl, br) != want {
                continue 'pattern;
            }
        }
        for list in paths.values() {
            if list.len() < 2 && portrait.local_model {
                continue;
            }
            let sum: i32 = list
                .iter()
                .map(|p| {
                    i32::from(orientation.sign(p.saddle, p.s_branch))
                        * i32::from(orientation.sign(p.saddle, p.u_branch))
                })
                .sum();
            if sum != 0 {
                continue 'pattern;
            }
        }
        for &(a, b) in &equal {
            if orientation.sign(a.0, a.1) != orientation.sign(b.0, b.1) {
                continue 'pattern;
            }
        }
        for &(a, b) in &opposite {
            if orientation.sign(a.0, a.1) != -orientation.sign(b.0, b.1) {
                continue 'pattern;
            }
        }
        return Ok(orientation);
    }
    Err(CbError::NoCoherentOrientation(
        "no sign pattern cancels all squares under the given constraints".into(),
    ))
}

/// The graded complex 0 -> C[un] -d0-> C[s] -d1-> C[sn] -> 0 with integer
/// entries obtained by counting signed gradient lines.
#[derive(Debug, Clone, PartialEq)]
pub struct MorseComplex {
    /// Point ids per degree 2, 1, 0 in canonical order.
    pub basis2: Vec<usize>,
    pub basis1: Vec<usize>,
    pub basis0: Vec<usize>,
    /// Rows indexed by basis1, columns by basis2.
    pub d0: IntMat,
    /// Rows indexed by basis0, columns by basis1.
    pub d1: IntMat,
    pub orientation: Orientation,
}

impl MorseComplex {
    pub fn basis(&self, degree: u8) -> &[usize] {
        match degree {
            2 => &self.basis2,
            1 => &self.basis1,
            0 => &self.basis0,
            _ => &[],
        }
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.basis2.len(), self.basis1.len(), self.basis0.len())
    }

    pub fn d_squared_is_zero(&self) -> bool {
        self.d1.mul(&self.d0).is_zero()
    }
}

pub fn build_complex(portrait: &PhasePortrait, orientation: &Orientation) -> MorseComplex {
    let basis2 = portrait.ids_of(CriticalKind::UnstableNode);
    let basis1 = portrait.ids_of(CriticalKind::Saddle);
    let basis0 = portrait.ids_of(CriticalKind::StableNode);
    let pos2: BTreeMap<usize, usize> = basis2.iter().enumerate().map(|(i, &p)| (p, i)).collect();
    let pos1: BTreeMap<usize, usize> = basis1.iter().enumerate().map(|(i, &p)| (p, i)).collect();
    let pos0: BTreeMap<usize, usize> = basis0.iter().enumerate().map(|(i, &p)| (p, i)).collect();
    let mut d0 = IntMat::zeros(basis1.len(), basis2.len());
    let mut d1 = IntMat::zeros(basis0.len(), basis1.len());
    for e in &portrait.edges {
        let sign = i64::from(orientation.sign(e.owner(), e.branch));
        if e.branch.is_unstable() {
            d1[(pos0[&e.to], pos1[&e.from])] += sign;
        } else {
            d0[(pos1[&e.to], pos2[&e.from])] += sign;
        }
    }
    MorseComplex { basis2, basis1, basis0, d0, d1, orientation: orientation.clone() }
}

/// Betti numbers and exact rational cycle bases.
#[derive(Debug, Clone)]
pub struct HomologySummary {
    pub betti: (usize, usize, usize),
    /// Kernel bases per degree 2, 1, 0 (degree 0 kernel is everything).
    pub cycles2: Vec<Vec<BigRational>>,
    pub cycles1: Vec<Vec<BigRational>>,
    pub cycles0: Vec<Vec<BigRational>>,
}

pub fn homology(complex: &MorseComplex) -> Result<HomologySummary> {
    if !complex.d_squared_is_zero() {
        return Err(CbError::NotAChainMap("d1.d0 != 0; not a complex".into()));
    }
    let (n2, n1, n0) = complex.dims();
    let rank_d0 = exact::rank_int(&complex.d0);
    let rank_d1 = exact::rank_int(&complex.d1);
    let cycles2 = exact::kernel_basis(&complex.d0);
    let cycles1 = exact::kernel_basis(&complex.d1);
    let cycles0: Vec<Vec<BigRational>> = (0..n0)
        .map(|i| {
            let mut v = vec![BigRational::from_integer(0.into()); n0];
            v[i] = BigRational::from_integer(1.into());
            v
        })
        .collect();
    let b2 = n2 - rank_d0;
    let b1 = (n1 - rank_d1) - rank_d0;
    let b0 = n0 - rank_d1;
    Ok(HomologySummary { betti: (b2, b1, b0), cycles2, cycles1, cycles0 })
}

/// Euler characteristic from betti numbers; must match the alternating point
/// count of the portrait.
pub fn euler(h: &HomologySummary) -> i64 {
    h.betti.0 as i64 - h.betti.1 as i64 + h.betti.2 as i64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Vec2;
    use crate::portrait::{CriticalPoint, Edge};

    fn pt(id: usize, kind: CriticalKind) -> CriticalPoint {
        let eigenvalues = match kind {
            CriticalKind::UnstableNode => (1.0, 2.0),
            CriticalKind::Saddle => (-1.0, 1.0),
            CriticalKind::StableNode => (-2.0, -1.0),
            CriticalKind::Degenerate => (0.0, 1.0),
        };
        CriticalPoint { id, y: Vec2::new(id as f64, 0.0), kind, mu: kind.mu(), eigenvalues }
    }

    fn fold() -> PhasePortrait {
        PhasePortrait {
            base: Vec2::ZERO,
            points: vec![pt(0, CriticalKind::UnstableNode), pt(1, CriticalKind::Saddle)],
            edges: vec![Edge { from: 0, to: 1, branch: Branch::S1 }],
            exits: vec![(1, Branch::S2), (1, Branch::U1), (1, Branch::U2)],
            separatrices: vec![],
            local_model: false,
            names: vec!["un".into(), "s".into()],
            declared_signs: BTreeMap::new(),
        }
    }

    /// The square of four connections around an unstable and a stable node.
    fn square() -> PhasePortrait {
        PhasePortrait {
            base: Vec2::ZERO,
            points: vec![
                pt(0, CriticalKind::UnstableNode),
                pt(1, CriticalKind::Saddle),
                pt(2, CriticalKind::Saddle),
                pt(3, CriticalKind::StableNode),
            ],
            edges: vec![
                Edge { from: 0, to: 1, branch: Branch::S1 },
                Edge { from: 0, to: 2, branch: Branch::S1 },
                Edge { from: 1, to: 3, branch: Branch::U1 },
                Edge { from: 2, to: 3, branch: Branch::U1 },
            ],
            exits: vec![
                (1, Branch::S2),
                (1, Branch::U2),
                (2, Branch::S2),
                (2, Branch::U2),
            ],
            separatrices: vec![],
            local_model: false,
            names: vec!["un".into(), "s1".into(), "s2".into(), "sn".into()],
            declared_signs: BTreeMap::new(),
        }
    }

    #[test]
    fn fold_orientation_and_homology() {
        let p = fold();
        let o = solve_orientation(&p, &[], &BTreeMap::new()).unwrap();
        // lexicographic pick: all-plus pattern
        assert_eq!(o.sign(1, Branch::S1), 1);
        assert_eq!(o.sign(1, Branch::U1), 1);
        let cx = build_complex(&p, &o);
        assert_eq!(cx.dims(), (1, 1, 0));
        assert_eq!(cx.d0[(0, 0)].abs(), 1);
        let h = homology(&cx).unwrap();
        assert_eq!(h.betti, (0, 0, 0));
    }

    #[test]
    fn square_orientation_cancels() {
        let p = square();
        p.validate().unwrap();
        let o = solve_orientation(&p, &[], &BTreeMap::new()).unwrap();
        // the broken-line products must cancel
        let prod1 = i32::from(o.sign(1, Branch::S1)) * i32::from(o.sign(1, Branch::U1));
        let prod2 = i32::from(o.sign(2, Branch::S1)) * i32::from(o.sign(2, Branch::U1));
        assert_eq!(prod1 + prod2, 0);
        let cx = build_complex(&p, &o);
        assert!(cx.d_squared_is_zero());
        let h = homology(&cx).unwrap();
        // ker d0 = 0, ker d1 is 1-dim, im d0 1-dim, im d1 1-dim
        assert_eq!(h.betti, (0, 0, 0));
        assert_eq!(euler(&h), p.euler_count());
    }

    #[test]
    fn missing_square_partner_is_rejected() {
        let mut p = square();
        // drop one side of the square: the broken line through s1 has no partner
        p.edges.retain(|e| !(e.from == 0 && e.to == 2));
        p.exits.push((2, Branch::S1));
        p.validate().unwrap();
        let err = solve_orientation(&p, &[], &BTreeMap::new()).unwrap_err();
        assert!(matches!(err, CbError::NoCoherentOrientation(_)));
        // as a local figure the same portrait is acceptable
        p.local_model = true;
        solve_orientation(&p, &[], &BTreeMap::new()).unwrap();
    }

    #[test]
    fn quadratic_portrait_homology() {
        let p = PhasePortrait {
            base: Vec2::ZERO,
            points: vec![pt(0, CriticalKind::UnstableNode)],
            edges: vec![],
            exits: vec![],
            separatrices: vec![],
            local_model: false,
            names: vec!["un".into()],
            declared_signs: BTreeMap::new(),
        };
        let o = solve_orientation(&p, &[], &BTreeMap::new()).unwrap();
        let h = homology(&build_complex(&p, &o)).unwrap();
        assert_eq!(h.betti, (1, 0, 0));
    }

    #[test]
    fn pinned_signs_are_respected() {
        let p = square();
        let mut pins = BTreeMap::new();
        pins.insert((1usize, Branch::S1), -1i8);
        let o = solve_orientation(&p, &[], &pins).unwrap();
        assert_eq!(o.sign(1, Branch::S1), -1);
        let cx = build_complex(&p, &o);
        assert!(cx.d_squared_is_zero());
    }

    #[test]
    fn orientation_is_deterministic() {
        let p = square();
        let a = solve_orientation(&p, &[], &BTreeMap::new()).unwrap();
        let b = solve_orientation(&p, &[], &BTreeMap::new()).unwrap();
        assert_eq!(a, b);
    }
}
