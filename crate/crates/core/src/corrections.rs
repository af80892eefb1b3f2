//! Quantum-correction chain maps across caustic and bifurcation walls, their
//! composition around codimension-2 points, and the holomorphic weight.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{CbError, Result};
use crate::exact::{self, IntMat};
use crate::geom::Vec2;
use crate::morse::MorseComplex;
use crate::poly::SheetFunction;
use crate::portrait::{CriticalKind, PhasePortrait};

/// Generator tracking between two chambers: source point id -> target point
/// id for every point that survives the crossing.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tracking {
    pub map: BTreeMap<usize, usize>,
}

impl Tracking {
    pub fn from_map(map: BTreeMap<usize, usize>) -> Self {
        Tracking { map }
    }

    /// Identity on n points.
    pub fn identity(n: usize) -> Self {
        Tracking { map: (0..n).map(|i| (i, i)).collect() }
    }

    /// Match synthetic portraits by generator name.
    pub fn by_name(from: &PhasePortrait, to: &PhasePortrait) -> Self {
        let mut map = BTreeMap::new();
        for (id, name) in from.names.iter().enumerate() {
            if let Some(t) = to.by_name(name) {
                map.insert(id, t);
            }
        }
        Tracking { map }
    }

    pub fn get(&self, id: usize) -> Option<usize> {
        self.map.get(&id).copied()
    }

    pub fn inverse(&self) -> Tracking {
        Tracking { map: self.map.iter().map(|(&a, &b)| (b, a)).collect() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MapDirection {
    /// The signs convention holds on the source chamber; the map is the
    /// paper's tail -> tail - head.
    Forward,
    /// The convention holds on the target chamber; the returned map is the
    /// inverse one, tail -> tail + head.
    Reversed,
}

/// Degreewise integer matrices between two chambers' Morse bases.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainMap {
    pub m2: IntMat,
    pub m1: IntMat,
    pub m0: IntMat,
    pub direction: MapDirection,
}

impl ChainMap {
    pub fn matrices(&self) -> [&IntMat; 3] {
        [&self.m2, &self.m1, &self.m0]
    }
}

/// A caustic correction together with the degreewise left inverse used when
/// a monodromy loop crosses back from the richer to the poorer chamber.
#[derive(Debug, Clone, PartialEq)]
pub struct CausticCorrection {
    /// Poorer -> richer chain map (natural injection plus shift).
    pub map: ChainMap,
    /// Richer -> poorer projections killing the birth-death pair;
    /// projection . map = identity in every degree.
    pub proj2: IntMat,
    pub proj1: IntMat,
    pub proj0: IntMat,
}

fn basis_positions(basis: &[usize]) -> BTreeMap<usize, usize> {
    basis.iter().enumerate().map(|(i, &p)| (p, i)).collect()
}

/// The chain-map property: target-d . M = M . source-d in both degrees.
pub fn is_chain_map(
    source: &MorseComplex,
    target: &MorseComplex,
    m2: &IntMat,
    m1: &IntMat,
    m0: &IntMat,
) -> bool {
    target.d0.mul(m2) == m1.mul(&source.d0) && target.d1.mul(m1) == m0.mul(&source.d1)
}

/// Exact-rank verification that a chain map induces an isomorphism on
/// homology in every degree.
pub fn induces_homology_iso(source: &MorseComplex, target: &MorseComplex, map: &ChainMap) -> bool {
    let hs = match crate::morse::homology(source) {
        Ok(h) => h,
        Err(_) => return false,
    };
    let ht = match crate::morse::homology(target) {
        Ok(h) => h,
        Err(_) => return false,
    };
    if hs.betti != ht.betti {
        return false;
    }
    let degree_ok = |cycles_s: &[Vec<num_rational::BigRational>],
                     boundaries_t: &IntMat,
                     m: &IntMat,
                     dim_h: usize| {
        let b_t = exact::image_basis(boundaries_t);
        let mut mapped: Vec<Vec<num_rational::BigRational>> = Vec::new();
        for z in cycles_s {
            // m . z
            let mut v = vec![num_rational::BigRational::from_integer(0.into()); m.rows];
            for (col, zc) in z.iter().enumerate() {
                if zc == &num_rational::BigRational::from_integer(0.into()) {
                    continue;
                }
                for row in 0..m.rows {
                    let a = num_rational::BigRational::from_integer(m[(row, col)].into());
                    v[row] = &v[row] + &(&a * zc);
                }
            }
            mapped.push(v);
        }
        let rank_b = exact::rank(&b_t);
        let mut all = b_t;
        all.extend(mapped);
        exact::rank(&all) == rank_b + dim_h
    };
    // degree 2: cycles = ker d0, boundaries in target degree 2 are zero
    let zero2 = IntMat::zeros(target.basis2.len(), 0);
    // degree 1: boundaries = im d0; degree 0: boundaries = im d1
    degree_ok(&hs.cycles2, &zero2, &map.m2, ht.betti.0)
        && degree_ok(&hs.cycles1, &target.d0, &map.m1, ht.betti.1)
        && degree_ok(&hs.cycles0, &target.d1, &map.m0, ht.betti.2)
}

fn injection_matrix(
    source_basis: &[usize],
    target_basis: &[usize],
    tracking: &Tracking,
) -> Result<IntMat> {
    let pos_t = basis_positions(target_basis);
    let mut m = IntMat::zeros(target_basis.len(), source_basis.len());
    for (col, &p) in source_basis.iter().enumerate() {
        let Some(tp) = tracking.get(p) else {
            return Err(CbError::NotAChainMap(format!(
                "generator {p} of the source chamber is not tracked across the wall"
            )));
        };
        let Some(&row) = pos_t.get(&tp) else {
            return Err(CbError::NotAChainMap(format!(
                "tracked image {tp} missing from the target basis"
            )));
        };
        m[(row, col)] = 1;
    }
    Ok(m)
}

/// Sign of the portrait edge from -> to read off the complex orientation;
/// error when the edge is absent.
fn edge_sign(portrait: &PhasePortrait, cx: &MorseComplex, from: usize, to: usize) -> Result<i8> {
    let edges = portrait.count_connections(from, to);
    match edges.as_slice() {
        [e] => Ok(cx.orientation.sign(e.owner(), e.branch)),
        [] => Err(CbError::NotAChainMap(format!(
            "expected edge {} -> {} is missing",
            portrait.names[from], portrait.names[to]
        ))),
        _ => Err(CbError::NotAChainMap(format!(
            "double connection {} -> {} cannot carry the correction",
            portrait.names[from], portrait.names[to]
        ))),
    }
}

/// Build the quantum correction across a caustic fold: the chain map from
/// the poorer chamber into the richer one. `pair` is (node, saddle) in
/// richer-portrait ids; `tracking` sends every poorer point to its richer
/// continuation.
pub fn caustic_correction(
    rich: &PhasePortrait,
    rich_cx: &MorseComplex,
    poor: &PhasePortrait,
    poor_cx: &MorseComplex,
    pair: (usize, usize),
    tracking: &Tracking,
) -> Result<CausticCorrection> {
    let (node, saddle) = pair;
    if rich.points[saddle].kind != CriticalKind::Saddle {
        return Err(CbError::NotAChainMap("pair saddle id is not a saddle".into()));
    }
    let node_kind = rich.points[node].kind;
    if rich.points.len() != poor.points.len() + 2 {
        return Err(CbError::NotAChainMap(format!(
            "chambers differ by {} points, expected 2",
            rich.points.len() as i64 - poor.points.len() as i64
        )));
    }
    let tracked_images: Vec<usize> = tracking.map.values().copied().collect();
    if tracked_images.contains(&node) || tracked_images.contains(&saddle) {
        return Err(CbError::NotAChainMap(
            "the birth-death pair must not be in the tracking image".into(),
        ));
    }

    let mut m2 = injection_matrix(&poor_cx.basis2, &rich_cx.basis2, tracking)?;
    let mut m1 = injection_matrix(&poor_cx.basis1, &rich_cx.basis1, tracking)?;
    let m0 = injection_matrix(&poor_cx.basis0, &rich_cx.basis0, tracking)?;
    let pos2 = basis_positions(&rich_cx.basis2);
    let pos1 = basis_positions(&rich_cx.basis1);
    let poor_pos2 = basis_positions(&poor_cx.basis2);
    let poor_pos1 = basis_positions(&poor_cx.basis1);
    let back = tracking.inverse();

    match node_kind {
        CriticalKind::UnstableNode => {
            // shift the eventual second unstable node connected to the
            // saddle: un -> un + n
            let candidates: Vec<usize> = rich
                .ids_of(CriticalKind::UnstableNode)
                .into_iter()
                .filter(|&u| u != node && !rich.count_connections(u, saddle).is_empty())
                .collect();
            match candidates.as_slice() {
                [] => {}
                [un] => {
                    let sign_n = edge_sign(rich, rich_cx, node, saddle)?;
                    let sign_un = edge_sign(rich, rich_cx, *un, saddle)?;
                    let alpha: i64 = if sign_n == -sign_un { 1 } else { -1 };
                    let Some(poor_un) = back.get(*un) else {
                        return Err(CbError::NotAChainMap(
                            "second unstable node is not tracked from the poorer side".into(),
                        ));
                    };
                    m2[(pos2[&node], poor_pos2[&poor_un])] = alpha;
                }
                _ => {
                    return Err(CbError::NotAChainMap(
                        "more than one second unstable node connected to the dying saddle; \
                         the correction is not defined here"
                            .into(),
                    ));
                }
            }
        }
        CriticalKind::StableNode => {
            // shift every saddle connected to the node: s_i -> s_i +/- s
            let sign_s = edge_sign(rich, rich_cx, saddle, node)?;
            for &si in &rich.ids_of(CriticalKind::Saddle) {
                if si == saddle || rich.count_connections(si, node).is_empty() {
                    continue;
                }
                let sign_si = edge_sign(rich, rich_cx, si, node)?;
                let beta: i64 = if sign_s == -sign_si { 1 } else { -1 };
                let Some(poor_si) = back.get(si) else {
                    return Err(CbError::NotAChainMap(
                        "a shifted saddle is not tracked from the poorer side".into(),
                    ));
                };
                m1[(pos1[&saddle], poor_pos1[&poor_si])] = beta;
            }
        }
        _ => {
            return Err(CbError::NotAChainMap(
                "the node member of a birth-death pair must be a node".into(),
            ));
        }
    }

    if !is_chain_map(poor_cx, rich_cx, &m2, &m1, &m0) {
        return Err(CbError::NotAChainMap(
            "correction does not commute with the differentials (sign or tracking \
             inconsistency upstream)"
                .into(),
        ));
    }
    let map = ChainMap { m2, m1, m0, direction: MapDirection::Forward };
    // Figure portraits model a neighbourhood only; their boundary matrices
    // square to zero just where both broken lines are visible, so homology
    // is checked exactly when both complexes are genuine.
    if poor_cx.d_squared_is_zero()
        && rich_cx.d_squared_is_zero()
        && !induces_homology_iso(poor_cx, rich_cx, &map)
    {
        return Err(CbError::NotAChainMap(
            "correction is a chain map but not a homology isomorphism".into(),
        ));
    }
    let proj = |rich_basis: &[usize], poor_basis: &[usize]| {
        let pos_poor = basis_positions(poor_basis);
        let mut p = IntMat::zeros(poor_basis.len(), rich_basis.len());
        for (col, &rp) in rich_basis.iter().enumerate() {
            if let Some(sp) = back.get(rp) {
                p[(pos_poor[&sp], col)] = 1;
            }
        }
        p
    };
    let proj2 = proj(&rich_cx.basis2, &poor_cx.basis2);
    let proj1 = proj(&rich_cx.basis1, &poor_cx.basis1);
    let proj0 = proj(&rich_cx.basis0, &poor_cx.basis0);
    debug_assert!(proj2.mul(&map.m2).is_identity());
    debug_assert!(proj1.mul(&map.m1).is_identity());
    debug_assert!(proj0.mul(&map.m0).is_identity());
    Ok(CausticCorrection { map, proj2, proj1, proj0 })
}

/// Build the quantum correction across a bifurcation wall from `u1` to `u2`.
/// `pair` is (tail, head) in u1 ids: the exceptional separatrix runs from
/// tail to head at the wall. When the signs convention holds on u1 the map
/// is tail -> tail - head (direction Forward); when it holds on u2 instead,
/// the chain-map test selects tail -> tail + head and the result is flagged
/// Reversed, per the inverse-map remark.
pub fn bifurcation_correction(
    u1: &PhasePortrait,
    u1_cx: &MorseComplex,
    u2: &PhasePortrait,
    u2_cx: &MorseComplex,
    pair: (usize, usize),
    tracking: &Tracking,
) -> Result<ChainMap> {
    let (tail, head) = pair;
    for (p, label) in [(tail, "tail"), (head, "head")] {
        if u1.points.get(p).map(|q| q.kind) != Some(CriticalKind::Saddle) {
            return Err(CbError::NotAChainMap(format!("{label} id {p} is not a saddle in u1")));
        }
    }
    if u1.points.len() != u2.points.len() || tracking.map.len() != u1.points.len() {
        return Err(CbError::NotAChainMap(
            "bifurcation walls require a bijective tracking of equal point sets".into(),
        ));
    }
    let m2 = injection_matrix(&u1_cx.basis2, &u2_cx.basis2, tracking)?;
    let m0 = injection_matrix(&u1_cx.basis0, &u2_cx.basis0, tracking)?;
    let base_m1 = injection_matrix(&u1_cx.basis1, &u2_cx.basis1, tracking)?;
    let pos1_u2 = basis_positions(&u2_cx.basis1);
    let pos1_u1 = basis_positions(&u1_cx.basis1);
    let head_row = pos1_u2[&tracking.get(head).ok_or_else(|| {
        CbError::NotAChainMap("head saddle is not tracked across the wall".into())
    })?];
    let tail_col = pos1_u1[&tail];
    for (alpha, direction) in [(-1i64, MapDirection::Forward), (1, MapDirection::Reversed)] {
        let mut m1 = base_m1.clone();
        m1[(head_row, tail_col)] = alpha;
        if is_chain_map(u1_cx, u2_cx, &m2, &m1, &m0) {
            let map = ChainMap { m2: m2.clone(), m1, m0: m0.clone(), direction };
            if u1_cx.d_squared_is_zero()
                && u2_cx.d_squared_is_zero()
                && !induces_homology_iso(u1_cx, u2_cx, &map)
            {
                return Err(CbError::NotAChainMap(
                    "bifurcation correction is a chain map but not a homology isomorphism".into(),
                ));
            }
            return Ok(map);
        }
    }
    Err(CbError::NotAChainMap(
        "neither tail -> tail - head nor its inverse commutes with the differentials".into(),
    ))
}

/// The inverse of a bifurcation correction (tail shift with the opposite
/// sign, composed through the inverse tracking).
pub fn invert_bifurcation(map: &ChainMap) -> ChainMap {
    // m2 and m0 are permutation matrices; m1 = P + alpha E. The inverse is
    // the transpose permutation with the opposite shift conjugated back.
    let inv_perm = |m: &IntMat| {
        let mut out = IntMat::zeros(m.cols, m.rows);
        for i in 0..m.rows {
            for j in 0..m.cols {
                if m[(i, j)] == 1 {
                    out[(j, i)] = 1;
                }
            }
        }
        out
    };
    let p2 = inv_perm(&map.m2);
    let p0 = inv_perm(&map.m0);
    // split m1 = P + E with E the off-permutation entry
    let mut perm_part = map.m1.clone();
    let mut shift: Option<(usize, usize, i64)> = None;
    for i in 0..perm_part.rows {
        for j in 0..perm_part.cols {
            let v = perm_part[(i, j)];
            if v != 0 && v != 1 {
                shift = Some((i, j, v));
                perm_part[(i, j)] = 0;
            }
        }
    }
    // an entry of exactly 1 off the permutation is possible when alpha = +1;
    // detect it as a doubled column
    if shift.is_none() {
        'outer: for j in 0..perm_part.cols {
            let ones: Vec<usize> =
                (0..perm_part.rows).filter(|&i| perm_part[(i, j)] == 1).collect();
            if ones.len() == 2 {
                // the permutation row for this column is the one that is the
                // unique 1 in its row
                for &i in &ones {
                    let row_count = (0..perm_part.cols).filter(|&c| perm_part[(i, c)] == 1).count();
                    if row_count > 1 {
                        shift = Some((i, j, 1));
                        perm_part[(i, j)] = 0;
                        break 'outer;
                    }
                }
            }
        }
    }
    let p1_perm = inv_perm(&perm_part);
    let mut p1 = p1_perm.clone();
    if let Some((i, j, v)) = shift {
        // inverse of P + v e_ij is P^-1 - v P^-1 e_ij P^-1
        let mut e = IntMat::zeros(map.m1.rows, map.m1.cols);
        e[(i, j)] = v;
        let corr = p1_perm.mul(&e).mul(&p1_perm);
        for r in 0..p1.rows {
            for c in 0..p1.cols {
                p1[(r, c)] -= corr[(r, c)];
            }
        }
    }
    let direction = match map.direction {
        MapDirection::Forward => MapDirection::Reversed,
        MapDirection::Reversed => MapDirection::Forward,
    };
    ChainMap { m2: p2, m1: p1, m0: p0, direction }
}

/// One traversal step of a monodromy loop.
pub enum LoopStep {
    /// Cross a bifurcation wall; the map was built from this chamber to the
    /// next.
    Bifurcation(ChainMap),
    /// Cross a caustic fold from the poorer into the richer chamber.
    CausticUp(CausticCorrection),
    /// Cross the same kind of wall from the richer chamber down; composes
    /// the stored projections.
    CausticDown(CausticCorrection),
}

impl LoopStep {
    fn matrices(&self) -> [IntMat; 3] {
        match self {
            LoopStep::Bifurcation(m) => [m.m2.clone(), m.m1.clone(), m.m0.clone()],
            LoopStep::CausticUp(c) => [c.map.m2.clone(), c.map.m1.clone(), c.map.m0.clone()],
            LoopStep::CausticDown(c) => [c.proj2.clone(), c.proj1.clone(), c.proj0.clone()],
        }
    }
}

/// Identity-monodromy report around one codimension-2 point.
#[derive(Debug, Clone, Serialize)]
pub struct MonodromyReport {
    pub loop_chambers: Vec<String>,
    pub product2: Vec<Vec<i64>>,
    pub product1: Vec<Vec<i64>>,
    pub product0: Vec<Vec<i64>>,
    pub is_identity: bool,
}

/// Compose correction matrices around a closed loop of chambers. The steps
/// are ordered along the loop; step i maps chamber i to chamber i+1 (mod n).
pub fn monodromy(loop_chambers: Vec<String>, steps: &[LoopStep]) -> Result<MonodromyReport> {
    if steps.is_empty() {
        return Err(CbError::MissingCorrection("empty loop".into()));
    }
    let mut products: Option<[IntMat; 3]> = None;
    for step in steps {
        let ms = step.matrices();
        products = Some(match products {
            None => ms,
            Some([p2, p1, p0]) => [ms[0].mul(&p2), ms[1].mul(&p1), ms[2].mul(&p0)],
        });
    }
    let [p2, p1, p0] = products.unwrap();
    let is_identity = p2.is_identity() && p1.is_identity() && p0.is_identity();
    Ok(MonodromyReport {
        loop_chambers,
        product2: p2.row_vecs(),
        product1: p1.row_vecs(),
        product0: p0.row_vecs(),
        is_identity,
    })
}

/// Input for the holomorphic weight at one base point and dual fiber point.
#[derive(Debug, Clone, Copy)]
pub struct WeightInput {
    pub sheet: SheetFunction,
    /// Flat connection value A(x) in the chamber's trivialization.
    pub connection: f64,
    /// Dual fiber coordinate w.
    pub dual: Vec2,
}

/// exp[2 pi (h/2 - A/(4 pi) + i y.w)] as a modulus-argument pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Weight {
    pub modulus: f64,
    /// Principal argument in (-pi, pi].
    pub argument: f64,
}

pub fn holomorphic_weight(input: &WeightInput) -> Weight {
    let modulus = (PI * input.sheet.h - 0.5 * input.connection).exp();
    let raw = 2.0 * PI * input.sheet.y.dot(input.dual);
    let mut argument = raw.rem_euclid(2.0 * PI);
    if argument > PI {
        argument -= 2.0 * PI;
    }
    Weight { modulus, argument }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Vec2;

    #[test]
    fn weight_identity_case() {
        let sheet = SheetFunction { x: Vec2::ZERO, y: Vec2::ZERO, h: 0.0 };
        let w = holomorphic_weight(&WeightInput { sheet, connection: 0.0, dual: Vec2::ZERO });
        assert_eq!(w.modulus, 1.0);
        assert_eq!(w.argument, 0.0);
    }

    #[test]
    fn weight_modulus_from_h() {
        let sheet = SheetFunction { x: Vec2::ZERO, y: Vec2::ZERO, h: 1.0 };
        let w = holomorphic_weight(&WeightInput { sheet, connection: 0.0, dual: Vec2::ZERO });
        assert!((w.modulus - PI.exp()).abs() < 1e-12);
        assert_eq!(w.argument, 0.0);
    }

    #[test]
    fn weight_argument_from_dual_pairing() {
        let sheet = SheetFunction { x: Vec2::ZERO, y: Vec2::new(1.0, 0.0), h: 0.0 };
        let w = holomorphic_weight(&WeightInput {
            sheet,
            connection: 0.0,
            dual: Vec2::new(0.5, 0.0),
        });
        assert!((w.modulus - 1.0).abs() < 1e-12);
        assert!((w.argument - PI).abs() < 1e-12);
    }

    #[test]
    fn weight_modulus_independent_of_dual() {
        let sheet = SheetFunction { x: Vec2::ZERO, y: Vec2::new(0.3, -0.4), h: 0.7 };
        let m0 = holomorphic_weight(&WeightInput { sheet, connection: 0.2, dual: Vec2::ZERO })
            .modulus;
        for k in 1..10 {
            let dual = Vec2::new(0.1 * k as f64, -0.05 * k as f64);
            let m = holomorphic_weight(&WeightInput { sheet, connection: 0.2, dual }).modulus;
            assert!((m - m0).abs() < 1e-12);
            assert!(m > 0.0);
        }
    }
}
