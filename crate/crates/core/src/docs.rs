//! Serializable document views for the CLI: portraits with their complexes,
//! homology tables, chain maps and weights. Matrices are row-major with
//! explicit basis id lists; rationals are num/den integer pairs.

use num_rational::BigRational;
use num_traits::ToPrimitive;
use serde::Serialize;

use crate::corrections::Weight;
use crate::error::{CbError, Result};
use crate::exact::IntMat;
use crate::geom::Vec2;
use crate::morse::{HomologySummary, MorseComplex};
use crate::poly::SheetFunction;
use crate::portrait::{Branch, PhasePortrait};

#[derive(Serialize)]
pub struct ComplexDoc {
    pub basis2: Vec<usize>,
    pub basis1: Vec<usize>,
    pub basis0: Vec<usize>,
    /// Row-major degree 2 -> 1 boundary matrix (rows by basis1).
    pub d0: Vec<Vec<i64>>,
    /// Row-major degree 1 -> 0 boundary matrix (rows by basis0).
    pub d1: Vec<Vec<i64>>,
    /// Branch signs of the coherent orientation: [saddle, branch, sign].
    pub orientation: Vec<(usize, Branch, i8)>,
}

impl ComplexDoc {
    pub fn new(cx: &MorseComplex) -> Self {
        let mut orientation = Vec::new();
        for (&s, _) in &cx.orientation.signs {
            for b in [Branch::S1, Branch::S2, Branch::U1, Branch::U2] {
                orientation.push((s, b, cx.orientation.sign(s, b)));
            }
        }
        ComplexDoc {
            basis2: cx.basis2.clone(),
            basis1: cx.basis1.clone(),
            basis0: cx.basis0.clone(),
            d0: cx.d0.row_vecs(),
            d1: cx.d1.row_vecs(),
            orientation,
        }
    }
}

fn rational_pair(q: &BigRational) -> Result<[i64; 2]> {
    let num = q.numer().to_i64();
    let den = q.denom().to_i64();
    match (num, den) {
        (Some(n), Some(d)) => Ok([n, d]),
        _ => Err(CbError::Io("cycle coefficient exceeds the 64-bit range".into())),
    }
}

#[derive(Serialize)]
pub struct HomologyDoc {
    pub betti: (usize, usize, usize),
    /// Cycle bases per degree as num/den pairs over the degree's basis.
    pub cycles2: Vec<Vec<[i64; 2]>>,
    pub cycles1: Vec<Vec<[i64; 2]>>,
    pub cycles0: Vec<Vec<[i64; 2]>>,
}

impl HomologyDoc {
    pub fn new(h: &HomologySummary) -> Result<Self> {
        let conv = |rows: &[Vec<BigRational>]| -> Result<Vec<Vec<[i64; 2]>>> {
            rows.iter().map(|r| r.iter().map(rational_pair).collect()).collect()
        };
        Ok(HomologyDoc {
            betti: h.betti,
            cycles2: conv(&h.cycles2)?,
            cycles1: conv(&h.cycles1)?,
            cycles0: conv(&h.cycles0)?,
        })
    }
}

#[derive(Serialize)]
pub struct PortraitDoc {
    pub portrait: PhasePortrait,
    pub complex: ComplexDoc,
    pub homology: HomologyDoc,
}

#[derive(Serialize)]
pub struct ChainMapDoc {
    pub wall: u32,
    pub kind: crate::loci::WallKind,
    pub source_chamber: u32,
    pub target_chamber: u32,
    pub direction: crate::corrections::MapDirection,
    pub m2: Vec<Vec<i64>>,
    pub m1: Vec<Vec<i64>>,
    pub m0: Vec<Vec<i64>>,
    pub source_basis: (Vec<usize>, Vec<usize>, Vec<usize>),
    pub target_basis: (Vec<usize>, Vec<usize>, Vec<usize>),
}

pub fn mat_rows(m: &IntMat) -> Vec<Vec<i64>> {
    m.row_vecs()
}

#[derive(Serialize)]
pub struct WeightDoc {
    pub x: Vec2,
    pub sheet_index: usize,
    pub y: Vec2,
    pub h: f64,
    pub connection: f64,
    pub dual: Vec2,
    pub weight: Weight,
}

impl WeightDoc {
    pub fn new(sheet: SheetFunction, sheet_index: usize, connection: f64, dual: Vec2, weight: Weight) -> Self {
        WeightDoc { x: sheet.x, sheet_index, y: sheet.y, h: sheet.h, connection, dual, weight }
    }
}
