//! Gauss linking numbers of closed polylines, and the Hopf charge as the
//! linking number of two preimages.
//!
//! Each pair of straight segments contributes its exact solid angle
//! (Klenin and Langowski). On T³ and S²×S¹ the preimages are lifted to the
//! universal cover (R³, resp. R³∖{0} with `(θ, φ, χ) ↦ e^{aχ} n(θ, φ)`).
//! Components that wind around the space are chained into one closed lift;
//! the connecting arcs are deck images of the polygon `L` through the
//! components' start points, whose contribution is subtracted.

use log::warn;
use rayon::prelude::*;
use serde::Serialize;

use super::preimage::{preimage, Projection};
use super::ChargeReport;
use crate::error::{HopfError, Result};
use crate::field::Field;
use crate::geometry::{build_geometry, ManifoldKind};
use crate::scalar::{cross, dot, norm, sub, Real, Vec3};

#[derive(Clone, Copy, Debug, Serialize)]
pub struct LinkingNumber<T> {
    pub value: i64,
    pub raw: T,
    /// Smallest vertex-to-vertex distance between the two curves.
    pub min_distance: T,
}

/// Solid angle swept by segment `p1 → p2` as seen along segment `p3 → p4`.
fn segment_pair<T: Real>(p1: &Vec3<T>, p2: &Vec3<T>, p3: &Vec3<T>, p4: &Vec3<T>) -> T {
    let r13 = sub(p3, p1);
    let r14 = sub(p4, p1);
    let r23 = sub(p3, p2);
    let r24 = sub(p4, p2);
    let pairs = [(&r13, &r14), (&r14, &r24), (&r24, &r23), (&r23, &r13)];
    let mut unit = [[T::zero(); 3]; 4];
    for (u, (a, b)) in unit.iter_mut().zip(pairs) {
        let v = cross(a, b);
        let l = norm(&v);
        // Collinear or zero-length configurations have no area; rounding
        // noise must not be normalized into a direction.
        if !(l > T::epsilon() * T::lit(64.0) * norm(a) * norm(b)) {
            return T::zero();
        }
        *u = [v[0] / l, v[1] / l, v[2] / l];
    }
    let clamp = |x: T| x.max(-T::one()).min(T::one());
    let omega = (0..4)
        .map(|k| clamp(dot(&unit[k], &unit[(k + 1) % 4])).asin())
        .sum::<T>();
    let orient = dot(&cross(&sub(p4, p3), &sub(p2, p1)), &r13);
    if orient > T::zero() {
        omega
    } else if orient < T::zero() {
        -omega
    } else {
        T::zero()
    }
}

/// Segments of a polyline, closing it when the ends differ. Ends that agree
/// up to rounding are merged.
fn closed_segments<T: Real>(c: &[Vec3<T>]) -> Vec<(Vec3<T>, Vec3<T>)> {
    let n = c.len();
    if n < 2 {
        return Vec::new();
    }
    let mut segs: Vec<_> = c.windows(2).map(|w| (w[0], w[1])).collect();
    let scale = c.iter().map(norm).fold(T::one(), T::max);
    if norm(&sub(&c[0], &c[n - 1])) > T::epsilon() * T::lit(1e3) * scale {
        segs.push((c[n - 1], c[0]));
    } else {
        segs[n - 2].1 = c[0];
    }
    segs
}

fn gauss_sum<T: Real>(a: &[(Vec3<T>, Vec3<T>)], b: &[(Vec3<T>, Vec3<T>)]) -> T {
    // Per-segment partial sums added in order keep the result deterministic.
    let partial: Vec<T> = a
        .par_iter()
        .map(|(p1, p2)| b.iter().map(|(p3, p4)| segment_pair(p1, p2, p3, p4)).sum())
        .collect();
    partial.into_iter().sum::<T>() / (T::lit(4.0) * T::PI())
}

/// Linking number of two closed polylines in R³.
pub fn linking_number<T: Real>(c1: &[Vec3<T>], c2: &[Vec3<T>]) -> LinkingNumber<T> {
    let raw = gauss_sum(&closed_segments(c1), &closed_segments(c2));
    let mut min_distance = T::infinity();
    for p in c1 {
        for q in c2 {
            min_distance = min_distance.min(norm(&sub(p, q)));
        }
    }
    LinkingNumber {
        value: raw.round().to_i64().unwrap_or(0),
        raw,
        min_distance,
    }
}

/// Deck transformations of the cover used for lifting.
#[derive(Clone, Copy)]
enum Deck<T> {
    /// `x ↦ x + Σ n_a L_a e_a`.
    Translate([T; 3]),
    /// `x ↦ f^n x`.
    Scale(T),
}

impl<T: Real> Deck<T> {
    fn apply(&self, n: [i64; 3], x: &Vec3<T>) -> Vec3<T> {
        match *self {
            Deck::Translate(l) => std::array::from_fn(|a| x[a] + T::from_i64(n[a]).unwrap() * l[a]),
            Deck::Scale(f) => {
                let s = f.powi(n[2] as i32);
                [x[0] * s, x[1] * s, x[2] * s]
            }
        }
    }

    /// Deck elements moving `b` to where it may link with `a`.
    fn candidates(&self, a: &[Vec3<T>], b: &[Vec3<T>]) -> Vec<[i64; 3]> {
        let range = |lo_a: T, hi_a: T, lo_b: T, hi_b: T, step: T| -> (i64, i64) {
            (
                ((lo_a - hi_b) / step).floor().to_i64().unwrap() - 1,
                ((hi_a - lo_b) / step).ceil().to_i64().unwrap() + 1,
            )
        };
        match *self {
            Deck::Translate(l) => {
                let (lo_a, hi_a) = bounds(a);
                let (lo_b, hi_b) = bounds(b);
                let r: Vec<(i64, i64)> = (0..3)
                    .map(|k| range(lo_a[k], hi_a[k], lo_b[k], hi_b[k], l[k]))
                    .collect();
                let mut out = Vec::new();
                for i in r[0].0..=r[0].1 {
                    for j in r[1].0..=r[1].1 {
                        for k in r[2].0..=r[2].1 {
                            out.push([i, j, k]);
                        }
                    }
                }
                out
            }
            Deck::Scale(f) => {
                let (lo_a, hi_a) = log_radii(a);
                let (lo_b, hi_b) = log_radii(b);
                let (n0, n1) = range(lo_a, hi_a, lo_b, hi_b, f.ln());
                (n0..=n1).map(|n| [0, 0, n]).collect()
            }
        }
    }
}

fn bounds<T: Real>(c: &[Vec3<T>]) -> (Vec3<T>, Vec3<T>) {
    let mut lo = [T::infinity(); 3];
    let mut hi = [T::neg_infinity(); 3];
    for p in c {
        for k in 0..3 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    (lo, hi)
}

fn log_radii<T: Real>(c: &[Vec3<T>]) -> (T, T) {
    c.iter()
        .map(|p| norm(p).ln())
        .fold((T::infinity(), T::neg_infinity()), |(lo, hi), r| {
            (lo.min(r), hi.max(r))
        })
}

/// Closed lifts of a preimage (loops with zero winding, plus the chained
/// winding components) and the start-point polygon of the chain.
fn lift<T: Real>(
    comps: &[Vec<Vec3<T>>],
    windings: &[[i64; 3]],
    deck: &Deck<T>,
) -> Result<(Vec<Vec<Vec3<T>>>, Vec<Vec3<T>>)> {
    let mut loops = Vec::new();
    let mut chain = Vec::new();
    let mut polygon = Vec::new();
    let mut shift = [0i64; 3];
    for (c, w) in comps.iter().zip(windings) {
        if *w == [0, 0, 0] {
            loops.push(c.clone());
            continue;
        }
        polygon.push(c[0]);
        chain.extend(c.iter().map(|p| deck.apply(shift, p)));
        for k in 0..3 {
            shift[k] += w[k];
        }
    }
    if shift != [0, 0, 0] {
        return Err(HopfError::Preimage(format!(
            "preimage windings sum to {shift:?}"
        )));
    }
    if !chain.is_empty() {
        loops.push(chain);
    }
    Ok((loops, polygon))
}

/// `Σ_g lk(a, g b)` over the deck group.
fn cover_linking<T: Real>(a: &[Vec<Vec3<T>>], b: &[Vec<Vec3<T>>], deck: &Deck<T>) -> T {
    let mut total = T::zero();
    for x in a.iter().filter(|x| x.len() > 1) {
        let sx = closed_segments(x);
        for y in b.iter().filter(|y| y.len() > 1) {
            for g in deck.candidates(x, y) {
                let moved: Vec<Vec3<T>> = y.iter().map(|p| deck.apply(g, p)).collect();
                total += gauss_sum(&sx, &closed_segments(&moved));
            }
        }
    }
    total
}

/// Sign relating the linking number of preimages, oriented along
/// `∇Re w × ∇Im w` in coordinate order, to the Hopf charge. The standard
/// Hopf map links its preimages with `−1` in `(r, s, t)` order.
const COORDINATE_ORIENTATION: f64 = -1.0;
/// The stereographic chart reverses the `(r, s, t)` orientation.
const S3_ORIENTATION: f64 = -COORDINATE_ORIENTATION;
/// The lifts to R³ and R³∖{0} preserve orientation.
const COVER_ORIENTATION: f64 = COORDINATE_ORIENTATION;

/// Hopf charge as the linking number of the preimages of `p1` and `p2`.
pub fn linking_charge<T: Real>(
    field: &Field<T>,
    p1: Vec3<T>,
    p2: Vec3<T>,
) -> Result<ChargeReport<T>> {
    let kind = field.spec.kind;
    let projection = match kind {
        ManifoldKind::S3 => Projection::Stereographic,
        ManifoldKind::T3 | ManifoldKind::S2xS1 => Projection::Coordinates,
        _ => {
            return Err(HopfError::WrongManifold {
                expected: "a 3D manifold",
                got: kind.name(),
            })
        }
    };
    let geom = build_geometry(&field.spec)?;
    let mut curves = Vec::with_capacity(2);
    for p in [p1, p2] {
        let c = preimage(field, p, projection)?;
        if c.open_components > 0 {
            return Err(HopfError::Preimage(format!(
                "{} open components in the preimage of {:?}",
                c.open_components, c.value
            )));
        }
        curves.push(c.components);
    }
    let h = geom.spacing.iter().copied().fold(T::infinity(), T::min);
    let raw = match kind {
        ManifoldKind::S3 => {
            let mut total = T::zero();
            for a in &curves[0] {
                for b in &curves[1] {
                    let l = linking_number(&a.points, &b.points);
                    if l.min_distance < h {
                        warn!("preimages approach within {:e}", l.min_distance);
                    }
                    total += l.raw;
                }
            }
            total * T::lit(S3_ORIENTATION)
        }
        _ => {
            let (deck, map): (Deck<T>, Box<dyn Fn(&Vec3<T>) -> Vec3<T>>) =
                if kind == ManifoldKind::T3 {
                    (
                        Deck::Translate(geom.coordinate_period),
                        Box::new(|p: &Vec3<T>| *p),
                    )
                } else {
                    let f = T::lit(4.0);
                    let a = f.ln() / geom.coordinate_period[2];
                    let m = move |p: &Vec3<T>| -> Vec3<T> {
                        let r = (a * p[2]).exp();
                        [
                            r * p[0].sin() * p[1].cos(),
                            r * p[0].sin() * p[1].sin(),
                            r * p[0].cos(),
                        ]
                    };
                    (Deck::Scale(f), Box::new(m))
                };
            let mut lifted = Vec::with_capacity(2);
            for comps in &curves {
                let pts: Vec<Vec<Vec3<T>>> = comps
                    .iter()
                    .map(|c| c.points.iter().map(&map).collect())
                    .collect();
                let mut w: Vec<[i64; 3]> = comps.iter().map(|c| c.winding).collect();
                if kind == ManifoldKind::S2xS1 {
                    // Only the circle direction is a deck transformation.
                    for x in w.iter_mut() {
                        *x = [0, 0, x[2]];
                    }
                }
                lifted.push(lift(&pts, &w, &deck)?);
            }
            let (c1, l1) = &lifted[0];
            let (c2, l2) = &lifted[1];
            let l1 = std::slice::from_ref(l1);
            let l2 = std::slice::from_ref(l2);
            let total = cover_linking(c1, c2, &deck)
                - cover_linking(l1, c2, &deck)
                - cover_linking(c1, l2, &deck)
                + cover_linking(l1, l2, &deck);
            total * T::lit(COVER_ORIENTATION)
        }
    };
    Ok(ChargeReport::new(raw, Vec::new()))
}
