use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functions::{ArgminSet, ConvexFunction, ConvexSet};
use crate::spaces::{ModelSpace, Point};
use crate::vecops::{dist, dot, lincomb, sub};

/// What is known about the fixed points of an operator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum FixedSetDescriptor {
    KnownPoint { point: Point },
    /// Intersection of library sets and minimizer sets of library functions.
    KnownSet { terms: Vec<FixedSetTerm> },
    Unknown,
    Empty,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum FixedSetTerm {
    Set { set: ConvexSet },
    Argmin { f: ConvexFunction },
}

const MEMBERSHIP_TOL: f64 = 1e-9;

enum Piece<'a> {
    Point(&'a Point),
    Set(&'a ConvexSet),
}

impl FixedSetDescriptor {
    pub fn point(p: impl Into<Point>) -> Self {
        FixedSetDescriptor::KnownPoint { point: p.into() }
    }

    pub fn sets(sets: impl IntoIterator<Item = ConvexSet>) -> Self {
        FixedSetDescriptor::KnownSet {
            terms: sets.into_iter().map(|set| FixedSetTerm::Set { set }).collect(),
        }
    }

    pub fn validate(&self, space: &ModelSpace) -> Result<()> {
        match self {
            FixedSetDescriptor::KnownPoint { point } => space.check(point),
            FixedSetDescriptor::KnownSet { terms } => {
                if terms.is_empty() {
                    return Err(Error::param("terms", "need at least one term"));
                }
                terms.iter().try_for_each(|t| match t {
                    FixedSetTerm::Set { set } => set.validate(space),
                    FixedSetTerm::Argmin { f } => f.validate(space),
                })
            }
            FixedSetDescriptor::Unknown | FixedSetDescriptor::Empty => Ok(()),
        }
    }

    fn pieces(terms: &[FixedSetTerm]) -> Vec<Piece<'_>> {
        terms
            .iter()
            .map(|t| match t {
                FixedSetTerm::Set { set } => Piece::Set(set),
                FixedSetTerm::Argmin { f } => match f.argmin() {
                    ArgminSet::Point(p) => Piece::Point(p),
                    ArgminSet::Set(s) => Piece::Set(s),
                },
            })
            .collect()
    }

    /// A nearest point of the described set to `x`.
    pub fn nearest_point(&self, space: &ModelSpace, x: &Point) -> Result<Point> {
        space.check(x)?;
        match self {
            FixedSetDescriptor::KnownPoint { point } => {
                space.check(point)?;
                Ok(point.clone())
            }
            FixedSetDescriptor::Unknown => Err(Error::UnknownFixedSet),
            FixedSetDescriptor::Empty => Err(Error::EmptyFixedSet),
            FixedSetDescriptor::KnownSet { terms } => {
                self.validate(space)?;
                let pieces = Self::pieces(terms);
                let sets: Vec<&ConvexSet> = pieces
                    .iter()
                    .filter_map(|p| match p {
                        Piece::Set(s) => Some(*s),
                        Piece::Point(_) => None,
                    })
                    .collect();
                let points: Vec<&Point> = pieces
                    .iter()
                    .filter_map(|p| match p {
                        Piece::Point(q) => Some(*q),
                        Piece::Set(_) => None,
                    })
                    .collect();
                if let Some(first) = points.first() {
                    for q in &points[1..] {
                        if space.dist_raw(&first.0, &q.0) > MEMBERSHIP_TOL {
                            return Err(Error::EmptyFixedSet);
                        }
                    }
                    for s in &sets {
                        if !s.contains(space, first, MEMBERSHIP_TOL)? {
                            return Err(Error::EmptyFixedSet);
                        }
                    }
                    return Ok((*first).clone());
                }
                nearest_in_intersection(space, &sets, x)
            }
        }
    }

    /// Distance from `x` to the described set.
    pub fn distance(&self, space: &ModelSpace, x: &Point) -> Result<f64> {
        let p = self.nearest_point(space, x)?;
        Ok(space.dist_raw(&x.0, &p.0))
    }

    pub fn contains(&self, space: &ModelSpace, x: &Point, tol: f64) -> Result<bool> {
        Ok(self.distance(space, x)? <= tol)
    }
}

/// Distance from `x` to the described fixed set.
pub fn fixed_point_distance(space: &ModelSpace, s: &FixedSetDescriptor, x: &Point) -> Result<f64> {
    s.distance(space, x)
}

fn feasible(space: &ModelSpace, sets: &[&ConvexSet], y: &Point, tol: f64) -> Result<bool> {
    for s in sets {
        if !s.contains(space, y, tol)? {
            return Ok(false);
        }
    }
    Ok(true)
}

fn nearest_in_intersection(space: &ModelSpace, sets: &[&ConvexSet], x: &Point) -> Result<Point> {
    // a projection onto one set that lands in all others is optimal
    let mut best: Option<(f64, Point)> = None;
    for s in sets {
        let p = s.project(space, x)?;
        let d = space.dist_raw(&x.0, &p.0);
        // relative to the step so tiny distances are not rounded to zero
        let tol = 1e-12 * d + 8.0 * f64::EPSILON * (1.0 + p.0.iter().fold(0.0_f64, |m, v| m.max(v.abs())));
        if feasible(space, sets, &p, tol)? {
            if best.as_ref().is_none_or(|(bd, _)| d < *bd) {
                best = Some((d, p));
            }
        }
    }
    if let Some((_, p)) = best {
        return Ok(p);
    }
    if !space.is_euclidean() {
        return Err(Error::Unsupported(
            "nearest point of an intersection on a cap with no single active set".into(),
        ));
    }
    let halfspaces: Option<Vec<(&[f64], f64)>> = sets
        .iter()
        .map(|s| match s {
            ConvexSet::Halfspace { normal, offset } => Some((normal.as_slice(), *offset)),
            _ => None,
        })
        .collect();
    match halfspaces {
        Some(hs) => nearest_in_polyhedron(&hs, x),
        None => dykstra(space, sets, x),
    }
}

/// Exact projection onto `{ y : <n_i, y> <= b_i }` by enumerating active sets.
fn nearest_in_polyhedron(hs: &[(&[f64], f64)], x: &Point) -> Result<Point> {
    let n = x.dim();
    let m = hs.len();
    if m > 16 {
        return Err(Error::Unsupported("too many halfspaces for active-set enumeration".into()));
    }
    let scale = 1.0 + x.0.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 0u32..(1 << m) {
        let active: Vec<usize> = (0..m).filter(|i| mask & (1 << i) != 0).collect();
        if active.len() > n {
            continue;
        }
        let Some(y) = project_affine(hs, &active, &x.0) else {
            continue;
        };
        let ok = hs
            .iter()
            .all(|(nv, b)| dot(nv, &y) - b <= 8.0 * f64::EPSILON * scale * (1.0 + dot(nv, nv).sqrt()));
        if ok {
            let d = dist(&x.0, &y);
            if best.as_ref().is_none_or(|(bd, _)| d < *bd) {
                best = Some((d, y));
            }
        }
    }
    best.map(|(_, y)| Point(y)).ok_or(Error::EmptyFixedSet)
}

/// Projection of `x` onto `{ y : <n_i, y> = b_i, i in active }`.
fn project_affine(hs: &[(&[f64], f64)], active: &[usize], x: &[f64]) -> Option<Vec<f64>> {
    let k = active.len();
    if k == 0 {
        return Some(x.to_vec());
    }
    let mut a = vec![vec![0.0; k + 1]; k];
    for (r, &i) in active.iter().enumerate() {
        for (c, &j) in active.iter().enumerate() {
            a[r][c] = dot(hs[i].0, hs[j].0);
        }
        a[r][k] = dot(hs[i].0, x) - hs[i].1;
    }
    let lam = solve(a)?;
    let mut y = x.to_vec();
    for (l, &i) in lam.iter().zip(active) {
        y = lincomb(1.0, &y, -l, hs[i].0);
    }
    Some(y)
}

/// Gaussian elimination with partial pivoting on an augmented matrix.
fn solve(mut a: Vec<Vec<f64>>) -> Option<Vec<f64>> {
    let k = a.len();
    for col in 0..k {
        let piv = (col..k).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-14 {
            return None;
        }
        a.swap(col, piv);
        for r in col + 1..k {
            let f = a[r][col] / a[col][col];
            for c in col..=k {
                a[r][c] -= f * a[col][c];
            }
        }
    }
    let mut out = vec![0.0; k];
    for r in (0..k).rev() {
        let s: f64 = (r + 1..k).map(|c| a[r][c] * out[c]).sum();
        out[r] = (a[r][k] - s) / a[r][r];
    }
    Some(out)
}

/// Dykstra's alternating projections for the nearest point of an
/// intersection of convex sets in Euclidean space.
fn dykstra(space: &ModelSpace, sets: &[&ConvexSet], x: &Point) -> Result<Point> {
    let m = sets.len();
    let mut y = x.0.clone();
    let mut incr = vec![vec![0.0; y.len()]; m];
    for _ in 0..200_000 {
        let before = y.clone();
        for (i, s) in sets.iter().enumerate() {
            let z: Vec<f64> = y.iter().zip(&incr[i]).map(|(a, b)| a + b).collect();
            let p = s.project(space, &Point(z.clone()))?.0;
            incr[i] = sub(&z, &p);
            y = p;
        }
        // changes at the rounding level mean the sweep has stalled
        let scale = 1.0 + y.iter().fold(0.0_f64, |m, v| m.max(v.abs())) + dist(&x.0, &y);
        if dist(&before, &y) <= 4.0 * f64::EPSILON * scale {
            break;
        }
    }
    Ok(Point(y))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functions::Profile;

    fn e2() -> ModelSpace {
        ModelSpace::euclidean(2).unwrap()
    }

    #[test]
    fn known_point_distance() {
        let s = e2();
        let d = FixedSetDescriptor::point([1.0, 1.0]);
        assert_eq!(fixed_point_distance(&s, &d, &[4.0, 5.0].into()).unwrap(), 5.0);
        assert_eq!(
            FixedSetDescriptor::Unknown.distance(&s, &[0.0, 0.0].into()),
            Err(Error::UnknownFixedSet)
        );
    }

    #[test]
    fn interior_point_of_intersection() {
        let s = e2();
        let d = FixedSetDescriptor::sets([
            ConvexSet::halfspace([1.0, 0.0], 1.0),
            ConvexSet::ball([0.0, 0.0], 2.0),
        ]);
        assert_eq!(d.distance(&s, &[0.5, 0.5].into()).unwrap(), 0.0);
    }

    #[test]
    fn crossing_lines_meet_at_origin() {
        let s = e2();
        let d = FixedSetDescriptor::sets([
            ConvexSet::segment([-10.0, 0.0], [10.0, 0.0]),
            ConvexSet::segment([0.0, -10.0], [0.0, 10.0]),
        ]);
        assert!((d.distance(&s, &[3.0, 4.0].into()).unwrap() - 5.0).abs() < 1e-9);
    }

    #[test]
    fn wedge_corner() {
        let s = e2();
        let t = 0.4_f64;
        let d = FixedSetDescriptor::sets([
            ConvexSet::halfspace([0.0, -1.0], 0.0),
            ConvexSet::halfspace([-t.sin(), t.cos()], 0.0),
        ]);
        let x = Point::from([-1.0, 0.1]);
        let p = d.nearest_point(&s, &x).unwrap();
        assert!(dist(&p.0, &[0.0, 0.0]) < 1e-15);
    }

    #[test]
    fn argmin_terms_and_disjoint_points() {
        let s = e2();
        let f = ConvexFunction::radial([0.5, 0.0], Profile::Linear { slope: 1.0 });
        let d = FixedSetDescriptor::KnownSet {
            terms: vec![
                FixedSetTerm::Argmin { f: f.clone() },
                FixedSetTerm::Set { set: ConvexSet::ball([0.0, 0.0], 1.0) },
            ],
        };
        assert!((d.distance(&s, &[0.5, 2.0].into()).unwrap() - 2.0).abs() < 1e-15);
        let empty = FixedSetDescriptor::KnownSet {
            terms: vec![
                FixedSetTerm::Argmin { f },
                FixedSetTerm::Set { set: ConvexSet::ball([3.0, 0.0], 1.0) },
            ],
        };
        assert_eq!(empty.distance(&s, &[0.0, 0.0].into()), Err(Error::EmptyFixedSet));
    }

    #[test]
    fn dykstra_lens() {
        let s = e2();
        let d = FixedSetDescriptor::sets([
            ConvexSet::ball([-0.5, 0.0], 1.0),
            ConvexSet::ball([0.5, 0.0], 1.0),
        ]);
        // nearest point of the lens to a point above it is its upper tip
        let x = Point::from([0.0, 3.0]);
        let p = d.nearest_point(&s, &x).unwrap();
        assert!(dist(&p.0, &[0.0, 0.75f64.sqrt()]) < 1e-8);
    }
}
