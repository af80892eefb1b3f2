//! Exact polynomial generating functions on the plane and the shifted family
//! f_x(y) = f(y) - x.y, together with Legendre sheet functions h(x).

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};

use crate::error::{CbError, Result};
use crate::geom::{Sym2, Vec2};

/// A bivariate polynomial with exact rational coefficients, keyed by the
/// exponent pair (i, j) of y1^i y2^j. Terms with zero coefficient are never
/// stored.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratingFunction {
    terms: BTreeMap<(u32, u32), BigRational>,
    // f64 mirrors of the three symbolic derivative levels, for fast evaluation
    eval: Vec<(u32, u32, f64)>,
    grad1: Vec<(u32, u32, f64)>, // d/dy1
    grad2: Vec<(u32, u32, f64)>, // d/dy2
    h11: Vec<(u32, u32, f64)>,
    h12: Vec<(u32, u32, f64)>,
    h22: Vec<(u32, u32, f64)>,
}

/// A point on the base plane (the parameter of the family f_x).
pub type BasePoint = Vec2;

fn to_f64(q: &BigRational) -> f64 {
    q.to_f64().expect("rational representable as f64")
}

fn diff(terms: &BTreeMap<(u32, u32), BigRational>, var: usize) -> BTreeMap<(u32, u32), BigRational> {
    let mut out = BTreeMap::new();
    for (&(i, j), c) in terms {
        let (e, key) = if var == 0 {
            (i, if i > 0 { Some((i - 1, j)) } else { None })
        } else {
            (j, if j > 0 { Some((i, j - 1)) } else { None })
        };
        if let Some(key) = key {
            let c = c * BigRational::from_integer(BigInt::from(e));
            if !c.is_zero() {
                out.insert(key, c);
            }
        }
    }
    out
}

fn mirror(terms: &BTreeMap<(u32, u32), BigRational>) -> Vec<(u32, u32, f64)> {
    terms.iter().map(|(&(i, j), c)| (i, j, to_f64(c))).collect()
}

fn eval_terms(terms: &[(u32, u32, f64)], y: Vec2) -> f64 {
    let mut acc = 0.0;
    for &(i, j, c) in terms {
        acc += c * y.x.powi(i as i32) * y.y.powi(j as i32);
    }
    acc
}

impl GeneratingFunction {
    /// Build from (i, j, coefficient) triples; coefficients of repeated
    /// exponent pairs are summed, zero results dropped.
    pub fn new(raw: impl IntoIterator<Item = ((u32, u32), BigRational)>) -> Result<Self> {
        let mut terms: BTreeMap<(u32, u32), BigRational> = BTreeMap::new();
        for ((i, j), c) in raw {
            let entry = terms.entry((i, j)).or_insert_with(BigRational::zero);
            *entry += c;
        }
        terms.retain(|_, c| !c.is_zero());
        let degree = terms.keys().map(|&(i, j)| i + j).max().unwrap_or(0);
        if degree < 2 {
            return Err(CbError::Config(format!(
                "generating function must have degree >= 2, got {degree}"
            )));
        }
        let g1 = diff(&terms, 0);
        let g2 = diff(&terms, 1);
        let h11 = diff(&g1, 0);
        let h12 = diff(&g1, 1);
        let h22 = diff(&g2, 1);
        Ok(GeneratingFunction {
            eval: mirror(&terms),
            grad1: mirror(&g1),
            grad2: mirror(&g2),
            h11: mirror(&h11),
            h12: mirror(&h12),
            h22: mirror(&h22),
            terms,
        })
    }

    /// Parse the config literal format: an array of [i, j, num, den] quadruples.
    pub fn from_literal(quads: &[[i64; 4]]) -> Result<Self> {
        let mut raw = Vec::new();
        for q in quads {
            let (i, j, num, den) = (q[0], q[1], q[2], q[3]);
            if i < 0 || j < 0 {
                return Err(CbError::Config(format!("negative exponent in term {q:?}")));
            }
            if den == 0 {
                return Err(CbError::Config(format!("zero denominator in term {q:?}")));
            }
            raw.push((
                (i as u32, j as u32),
                BigRational::new(BigInt::from(num), BigInt::from(den)),
            ));
        }
        Self::new(raw)
    }

    /// Convenience constructor from integer-coefficient terms.
    pub fn from_int_terms(terms: &[(u32, u32, i64)]) -> Result<Self> {
        Self::new(
            terms
                .iter()
                .map(|&(i, j, c)| ((i, j), BigRational::from_integer(BigInt::from(c)))),
        )
    }

    pub fn terms(&self) -> &BTreeMap<(u32, u32), BigRational> {
        &self.terms
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|&(i, j)| i + j).max().unwrap_or(0)
    }

    /// The literal form used in config JSON.
    pub fn to_literal(&self) -> Vec<[i64; 4]> {
        self.terms
            .iter()
            .map(|(&(i, j), c)| {
                [
                    i as i64,
                    j as i64,
                    c.numer().to_i64().expect("coefficient numerator fits i64"),
                    c.denom().to_i64().expect("coefficient denominator fits i64"),
                ]
            })
            .collect()
    }

    /// f(y)
    pub fn eval(&self, y: Vec2) -> f64 {
        eval_terms(&self.eval, y)
    }

    /// f_x(y) = f(y) - x.y
    pub fn eval_family(&self, x: BasePoint, y: Vec2) -> f64 {
        self.eval(y) - x.x * y.x - x.y * y.y
    }

    /// grad f at y (symbolic differentiation evaluated in f64).
    pub fn gradient(&self, y: Vec2) -> Vec2 {
        Vec2::new(eval_terms(&self.grad1, y), eval_terms(&self.grad2, y))
    }

    /// grad f_x at y, the right-hand side of the gradient flow.
    pub fn family_gradient(&self, x: BasePoint, y: Vec2) -> Vec2 {
        self.gradient(y) - x
    }

    /// Hessian of f at y; equals the Hessian of every f_x. Symmetric by
    /// construction (equal mixed partials of the polynomial).
    pub fn hessian(&self, y: Vec2) -> Sym2 {
        Sym2::new(eval_terms(&self.h11, y), eval_terms(&self.h12, y), eval_terms(&self.h22, y))
    }

    pub fn det_hessian(&self, y: Vec2) -> f64 {
        self.hessian(y).det()
    }

    /// Damped Newton iteration for grad f(y) = x starting at `seed`.
    /// Iterates until the residual stagnates so near-degenerate roots are
    /// driven close enough for the caustic test, then applies `tol_root`.
    pub fn solve_fiber(&self, x: BasePoint, seed: Vec2, tol_root: f64) -> Result<Vec2> {
        let mut y = seed;
        let mut residual = self.family_gradient(x, y).norm();
        for _ in 0..120 {
            if residual == 0.0 {
                break;
            }
            let h = self.hessian(y);
            let g = self.family_gradient(x, y);
            let Some(full) = h.solve(g) else {
                break;
            };
            // backtracking on the residual norm
            let mut lambda = 1.0;
            let mut accepted = false;
            for _ in 0..30 {
                let trial = y - full.scale(lambda);
                if !trial.is_finite() {
                    lambda *= 0.5;
                    continue;
                }
                let r = self.family_gradient(x, trial).norm();
                if r < residual {
                    y = trial;
                    residual = r;
                    accepted = true;
                    break;
                }
                lambda *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        if residual < tol_root {
            Ok(y)
        } else {
            Err(CbError::NoConvergence)
        }
    }
}

impl fmt::Display for GeneratingFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (&(i, j), c) in &self.terms {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "({c})")?;
            if i > 0 {
                write!(f, " y1^{i}")?;
            }
            if j > 0 {
                write!(f, " y2^{j}")?;
            }
        }
        if first {
            write!(f, "0")?;
        }
        Ok(())
    }
}

/// One Legendre sheet: a solution y(x) of grad f(y) = x and the local base
/// generating function h(x) = x.y(x) - f(y(x)), whose differential recovers
/// the sheet.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SheetFunction {
    pub x: BasePoint,
    pub y: Vec2,
    pub h: f64,
}

/// Solve grad f(y) = x from `seed` and package the sheet. `tol_degenerate`
/// rejects solutions on the caustic.
pub fn legendre_sheet(
    f: &GeneratingFunction,
    x: BasePoint,
    seed: Vec2,
    tol_root: f64,
    tol_degenerate: f64,
) -> Result<SheetFunction> {
    let y = f.solve_fiber(x, seed, tol_root)?;
    if f.det_hessian(y).abs() < tol_degenerate {
        return Err(CbError::Degenerate(y));
    }
    let h = x.dot(y) - f.eval(y);
    Ok(SheetFunction { x, y, h })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cubic() -> GeneratingFunction {
        // y1^3
        GeneratingFunction::from_int_terms(&[(3, 0, 1)]).unwrap()
    }

    fn fold() -> GeneratingFunction {
        // y1^3 + y2^2
        GeneratingFunction::from_int_terms(&[(3, 0, 1), (0, 2, 1)]).unwrap()
    }

    fn quadratic() -> GeneratingFunction {
        // (y1^2 + y2^2)/2
        GeneratingFunction::from_literal(&[[2, 0, 1, 2], [0, 2, 1, 2]]).unwrap()
    }

    #[test]
    fn eval_family_examples() {
        // x = 0 reduces to f
        assert_eq!(cubic().eval_family(Vec2::ZERO, Vec2::new(2.0, 5.0)), 8.0);
        // direct arithmetic: 1 - 1 - 1
        assert_eq!(cubic().eval_family(Vec2::new(1.0, 1.0), Vec2::new(1.0, 1.0)), -1.0);
        // quadratic case: 25/2 - 25
        assert_eq!(
            quadratic().eval_family(Vec2::new(3.0, 4.0), Vec2::new(3.0, 4.0)),
            -12.5
        );
    }

    #[test]
    fn gradient_hessian_examples() {
        let g = cubic().gradient(Vec2::new(1.0, 0.0));
        assert_eq!((g.x, g.y), (3.0, 0.0));
        let h = cubic().hessian(Vec2::new(1.0, 0.0));
        assert_eq!((h.a, h.b, h.d), (6.0, 0.0, 0.0));

        let (a, b) = (0.7, -1.3);
        let g = fold().gradient(Vec2::new(a, b));
        assert!((g.x - 3.0 * a * a).abs() < 1e-15 && (g.y - 2.0 * b).abs() < 1e-15);
        let h = fold().hessian(Vec2::new(a, b));
        assert!((h.a - 6.0 * a).abs() < 1e-15 && h.b == 0.0 && h.d == 2.0);

        let h = quadratic().hessian(Vec2::new(10.0, -3.0));
        assert_eq!((h.a, h.b, h.d), (1.0, 0.0, 1.0));
    }

    #[test]
    fn degree_invariants() {
        assert!(GeneratingFunction::from_int_terms(&[(1, 0, 1)]).is_err());
        // cancelling terms leave nothing of degree >= 2
        assert!(GeneratingFunction::new(vec![
            ((2u32, 0u32), BigRational::from_integer(BigInt::from(1))),
            ((2, 0), BigRational::from_integer(BigInt::from(-1))),
        ])
        .is_err());
        assert_eq!(fold().degree(), 3);
        // no stored zero terms
        let f = GeneratingFunction::new(vec![
            ((3u32, 0u32), BigRational::from_integer(BigInt::from(1))),
            ((2, 0), BigRational::from_integer(BigInt::from(2))),
            ((2, 0), BigRational::from_integer(BigInt::from(-2))),
        ])
        .unwrap();
        assert_eq!(f.terms().len(), 1);
    }

    #[test]
    fn legendre_quadratic_self_duality() {
        let s = legendre_sheet(&quadratic(), Vec2::new(3.0, 4.0), Vec2::new(0.1, 0.2), 1e-10, 1e-7)
            .unwrap();
        assert!(s.y.dist(Vec2::new(3.0, 4.0)) < 1e-9);
        assert!((s.h - 12.5).abs() < 1e-9);
    }

    #[test]
    fn legendre_fold_sheet() {
        // closed-form root 3 y1^2 = x1 at x = (0.75, 0): y = (0.5, 0), h = 0.25
        let s = legendre_sheet(&fold(), Vec2::new(0.75, 0.0), Vec2::new(0.5, 0.1), 1e-10, 1e-7)
            .unwrap();
        assert!(s.y.dist(Vec2::new(0.5, 0.0)) < 1e-9);
        assert!((s.h - 0.25).abs() < 1e-9);
    }

    #[test]
    fn legendre_no_real_root() {
        // 3 y1^2 = -1 has no real solution
        for seed in [Vec2::new(0.5, 0.0), Vec2::new(-1.0, 1.0), Vec2::new(2.0, -2.0)] {
            let r = legendre_sheet(&fold(), Vec2::new(-1.0, 0.0), seed, 1e-10, 1e-7);
            assert!(r.is_err());
        }
    }

    #[test]
    fn legendre_degenerate_on_caustic() {
        // x = (0,0) for the fold family: unique root y = 0 with det H = 0
        let r = legendre_sheet(&fold(), Vec2::ZERO, Vec2::new(1e-3, 0.0), 1e-10, 1e-7);
        match r {
            Err(CbError::Degenerate(_)) | Err(CbError::NoConvergence) => {}
            other => panic!("expected Degenerate/NoConvergence, got {other:?}"),
        }
    }

    #[test]
    fn literal_round_trip() {
        let lit = [[3i64, 0, 1, 1], [1, 2, -3, 1]];
        let f = GeneratingFunction::from_literal(&lit).unwrap();
        assert_eq!(f.to_literal(), vec![[1i64, 2, -3, 1], [3, 0, 1, 1]]);
    }
}
