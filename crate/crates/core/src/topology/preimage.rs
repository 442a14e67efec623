//! Preimage curves `φ⁻¹(p)` of 3D fields.
//!
//! Every full lattice cube is split into six Kuhn tetrahedra. In a chart
//! `w = stereo(Rφ)`, with `R` a rotation taking `p` to the north pole, the
//! field is interpolated linearly on each tetrahedron and the zero set of
//! `w` becomes one segment. Segments meet on shared faces, identified by the
//! sorted site indices of the face, and are stitched into closed curves.
//! Segments point along `∇Re w × ∇Im w`.

use std::collections::{HashMap, HashSet};

use log::warn;
use serde::Serialize;

use crate::error::{HopfError, Result};
use crate::field::Field;
use crate::geometry::{build_geometry, LatticeGeometry, ManifoldKind};
use crate::scalar::{cross, dot, normalized, sub, Real, Vec3};

/// Output coordinates of preimage points.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Projection {
    /// Manifold coordinates, unwrapped along periodic directions.
    Coordinates,
    /// Stereographic image of S³ in R³ from `(0, 0, 0, 1)`. S³ only.
    Stereographic,
}

#[derive(Clone, Debug, Serialize)]
pub struct PreimageComponent<T> {
    /// Polyline with the first point repeated at the end, up to the winding.
    pub points: Vec<Vec3<T>>,
    /// Periods traversed along each periodic coordinate before closing.
    pub winding: [i64; 3],
}

#[derive(Clone, Debug, Serialize)]
pub struct PreimageCurve<T> {
    pub value: Vec3<T>,
    pub projection: Projection,
    pub components: Vec<PreimageComponent<T>>,
    /// Chains that ran into the lattice boundary or a degenerate tetrahedron.
    pub open_components: usize,
}

/// Kuhn decomposition: axis orders for the monotone paths through a cube.
const PATHS: [[usize; 3]; 6] = [
    [0, 1, 2],
    [0, 2, 1],
    [1, 0, 2],
    [1, 2, 0],
    [2, 0, 1],
    [2, 1, 0],
];
const FACES: [[usize; 3]; 4] = [[1, 2, 3], [0, 2, 3], [0, 1, 3], [0, 1, 2]];

struct Segment<T> {
    keys: [[usize; 3]; 2],
    /// End points in lattice index units, lifted around the cube base.
    ends: [Vec3<T>; 2],
}

/// Chart value `(Re w, Im w)` or `None` on the far hemisphere.
///
/// Exact zeros, common for symmetric fields, are nudged to a tiny positive
/// value so that no lattice point lies exactly on the zero set.
fn chart<T: Real>(v: &Vec3<T>, frame: &[Vec3<T>; 3]) -> Option<[T; 2]> {
    let z = dot(v, &frame[2]);
    if z < T::zero() {
        return None;
    }
    let d = T::one() + z;
    let tiny = T::min_positive_value().sqrt();
    let nudge = |x: T| if x == T::zero() { tiny } else { x };
    Some([nudge(dot(v, &frame[0]) / d), nudge(dot(v, &frame[1]) / d)])
}

/// Right-handed frame with `p` as third vector.
fn frame_for<T: Real>(p: &Vec3<T>) -> [Vec3<T>; 3] {
    let helper = if p[0].abs() < T::lit(0.9) {
        [T::one(), T::zero(), T::zero()]
    } else {
        [T::zero(), T::one(), T::zero()]
    };
    let e1 = normalized(&cross(&helper, p)).expect("helper is not parallel to p");
    let e2 = cross(p, &e1);
    [e1, e2, *p]
}

#[inline]
fn cross2<T: Real>(a: &[T; 2], b: &[T; 2]) -> T {
    a[0] * b[1] - a[1] * b[0]
}

/// Zero of the linear interpolant on a triangle, as barycentric weights.
fn face_zero<T: Real>(w: [[T; 2]; 3]) -> Option<[T; 3]> {
    let l = [
        cross2(&w[1], &w[2]),
        cross2(&w[2], &w[0]),
        cross2(&w[0], &w[1]),
    ];
    let d = l[0] + l[1] + l[2];
    if d == T::zero() {
        return None;
    }
    let l = [l[0] / d, l[1] / d, l[2] / d];
    if l.iter().all(|&x| x >= T::zero()) {
        Some(l)
    } else {
        None
    }
}

fn tetra_segment<T: Real>(
    sites: [usize; 4],
    pos: [Vec3<T>; 4],
    w: [[T; 2]; 4],
) -> Option<Segment<T>> {
    if [0, 1]
        .iter()
        .any(|&c| w.iter().all(|x| x[c] > T::zero()) || w.iter().all(|x| x[c] < T::zero()))
    {
        return None;
    }
    let mut hits: Vec<([usize; 3], Vec3<T>)> = Vec::with_capacity(2);
    for face in FACES {
        // Canonical vertex order, so both tetrahedra sharing the face agree.
        let mut f = face;
        f.sort_by_key(|&k| sites[k]);
        if let Some(l) = face_zero([w[f[0]], w[f[1]], w[f[2]]]) {
            let p = std::array::from_fn(|c| {
                l[0] * pos[f[0]][c] + l[1] * pos[f[1]][c] + l[2] * pos[f[2]][c]
            });
            hits.push(([sites[f[0]], sites[f[1]], sites[f[2]]], p));
        }
    }
    if hits.len() != 2 {
        return None;
    }
    // Gradients of Re w and Im w through the dual basis of the edge vectors.
    let e = [
        sub(&pos[1], &pos[0]),
        sub(&pos[2], &pos[0]),
        sub(&pos[3], &pos[0]),
    ];
    let dual = [
        cross(&e[1], &e[2]),
        cross(&e[2], &e[0]),
        cross(&e[0], &e[1]),
    ];
    let grad = |c: usize| -> Vec3<T> {
        std::array::from_fn(|j| (0..3).map(|k| (w[k + 1][c] - w[0][c]) * dual[k][j]).sum())
    };
    // The omitted 1/det factor enters the tangent squared.
    let t = cross(&grad(0), &grad(1));
    let along = dot(&sub(&hits[1].1, &hits[0].1), &t);
    if along < T::zero() {
        hits.swap(0, 1);
    }
    Some(Segment {
        keys: [hits[0].0, hits[1].0],
        ends: [hits[0].1, hits[1].1],
    })
}

fn segments<T: Real>(
    field: &Field<T>,
    geom: &LatticeGeometry<T>,
    frame: &[Vec3<T>; 3],
) -> (Vec<Segment<T>>, usize) {
    let lat = &geom.lattice;
    let w: Vec<Option<[T; 2]>> = field.data.iter().map(|v| chart(v, frame)).collect();
    let mut out = Vec::new();
    let mut degenerate = 0;
    let range = [lat.link_range(0), lat.link_range(1), lat.link_range(2)];
    for i0 in 0..range[0] {
        for i1 in 0..range[1] {
            for i2 in 0..range[2] {
                let base = [i0, i1, i2];
                let mut corner = [0usize; 8];
                for (bits, slot) in corner.iter_mut().enumerate() {
                    let mut c = base;
                    for a in 0..3 {
                        if bits >> a & 1 == 1 {
                            c = lat.forward(c, a).expect("cube inside lattice");
                        }
                    }
                    *slot = lat.index(c);
                }
                let vals: Option<Vec<[T; 2]>> = corner.iter().map(|&s| w[s]).collect();
                let Some(vals) = vals else { continue };
                if [0, 1].iter().any(|&c| {
                    vals.iter().all(|x| x[c] > T::zero()) || vals.iter().all(|x| x[c] < T::zero())
                }) {
                    continue;
                }
                for path in PATHS {
                    let mut bits = 0usize;
                    let mut verts = [0usize; 4];
                    for (k, &a) in path.iter().enumerate() {
                        bits |= 1 << a;
                        verts[k + 1] = bits;
                    }
                    let pos = verts.map(|b| -> Vec3<T> {
                        std::array::from_fn(|a| T::from_usize_lossy(base[a] + (b >> a & 1)))
                    });
                    let sites = verts.map(|b| corner[b]);
                    let wv = verts.map(|b| vals[b]);
                    match tetra_segment(sites, pos, wv) {
                        Some(s) => out.push(s),
                        None => {
                            let any_face = FACES
                                .iter()
                                .any(|f| face_zero([wv[f[0]], wv[f[1]], wv[f[2]]]).is_some());
                            if any_face {
                                degenerate += 1;
                            }
                        }
                    }
                }
            }
        }
    }
    (out, degenerate)
}

/// Preimage of `value` under a 3D field.
pub fn preimage<T: Real>(
    field: &Field<T>,
    value: Vec3<T>,
    projection: Projection,
) -> Result<PreimageCurve<T>> {
    if field.spec.kind.ndim() != 3 {
        return Err(HopfError::WrongManifold {
            expected: "a 3D manifold",
            got: field.spec.kind.name(),
        });
    }
    if projection == Projection::Stereographic && field.spec.kind != ManifoldKind::S3 {
        return Err(HopfError::InvalidArgument(
            "stereographic projection needs s3".into(),
        ));
    }
    let p = normalized(&value)
        .ok_or_else(|| HopfError::InvalidArgument("preimage value must be nonzero".into()))?;
    let geom = build_geometry(&field.spec)?;
    let frame = frame_for(&p);
    let (segs, degenerate) = segments(field, &geom, &frame);
    if degenerate > 0 {
        warn!("preimage: {degenerate} degenerate tetrahedra skipped");
    }
    let (chains, open) = stitch(&segs, geom.lattice.dims, geom.lattice.periodic);
    if open > 0 {
        warn!("preimage: {open} open components; the field may be discontinuous");
    }
    let components = chains
        .into_iter()
        .map(|(pts, winding)| PreimageComponent {
            points: pts.iter().map(|q| place(q, &geom, projection)).collect(),
            winding,
        })
        .collect();
    Ok(PreimageCurve {
        value: p,
        projection,
        components,
        open_components: open,
    })
}

fn place<T: Real>(q: &Vec3<T>, geom: &LatticeGeometry<T>, projection: Projection) -> Vec3<T> {
    let x: Vec3<T> = std::array::from_fn(|a| geom.origin[a] + q[a] * geom.spacing[a]);
    match projection {
        Projection::Coordinates => x,
        Projection::Stereographic => {
            let (r, s, t) = (x[0], x[1], x[2]);
            let e = [r.cos() * s.cos(), r.cos() * s.sin(), r.sin() * t.cos()];
            let d = T::one() - r.sin() * t.sin();
            [e[0] / d, e[1] / d, e[2] / d]
        }
    }
}

type Chain<T> = (Vec<Vec3<T>>, [i64; 3]);

/// Joins segments sharing face keys into closed chains, unwrapping periodic
/// jumps. Returns the closed chains and the number of open ones.
fn stitch<T: Real>(
    segs: &[Segment<T>],
    dims: [usize; 3],
    periodic: [bool; 3],
) -> (Vec<Chain<T>>, usize) {
    let mut at: HashMap<[usize; 3], Vec<(usize, usize)>> = HashMap::new();
    // A curve running inside a shared face is found by both tetrahedra.
    let mut seen = HashSet::new();
    let mut used = vec![false; segs.len()];
    for (i, s) in segs.iter().enumerate() {
        let mut pair = s.keys;
        pair.sort();
        if !seen.insert(pair) {
            used[i] = true;
            continue;
        }
        for end in 0..2 {
            at.entry(s.keys[end]).or_default().push((i, end));
        }
    }
    let dimf: Vec3<T> = std::array::from_fn(|a| T::from_usize_lossy(dims[a]));
    let unwrap_shift = |from: &Vec3<T>, to: &Vec3<T>| -> Vec3<T> {
        std::array::from_fn(|a| {
            if periodic[a] {
                ((from[a] - to[a]) / dimf[a]).round() * dimf[a]
            } else {
                T::zero()
            }
        })
    };
    let mut chains = Vec::new();
    let mut open = 0;
    for start in 0..segs.len() {
        if used[start] {
            continue;
        }
        used[start] = true;
        let mut pts = vec![segs[start].ends[0], segs[start].ends[1]];
        let mut agreement = 1i64;
        let mut cur = (start, 1usize);
        let closed = loop {
            let key = segs[cur.0].keys[cur.1];
            let next = at[&key].iter().copied().find(|&(s, _)| s != cur.0);
            let Some((s, end)) = next else { break false };
            if s == start {
                break end == 0;
            }
            if used[s] {
                break false;
            }
            used[s] = true;
            let last = *pts.last().expect("nonempty");
            let shift = unwrap_shift(&last, &segs[s].ends[end]);
            let other = segs[s].ends[1 - end];
            pts.push(std::array::from_fn(|a| other[a] + shift[a]));
            agreement += if end == 0 { 1 } else { -1 };
            cur = (s, 1 - end);
        };
        if !closed {
            open += 1;
            continue;
        }
        // The last point is the first one, possibly shifted by periods.
        let shift = unwrap_shift(pts.last().expect("nonempty"), &pts[0]);
        let mut winding: [i64; 3] =
            std::array::from_fn(|a| (shift[a] / dimf[a]).round().to_i64().unwrap_or(0));
        if agreement < 0 {
            pts.reverse();
            winding = winding.map(|w| -w);
        }
        chains.push((pts, winding));
    }
    (chains, open)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{init_amn, init_t3_vav};
    use crate::geometry::ManifoldSpec;

    #[test]
    fn face_zero_barycentrics() {
        let l = face_zero([[1.0f64, 0.0], [-1.0, 1.0], [-1.0, -1.0]]).unwrap();
        assert!((l[0] - 0.5).abs() < 1e-15 && (l[1] - 0.25).abs() < 1e-15);
        assert!(face_zero([[1.0, 1.0], [2.0, 1.0], [1.0, 2.0]]).is_none());
    }

    #[test]
    fn frame_is_right_handed() {
        for p in [[0.0f64, 0.0, 1.0], [1.0, 0.0, 0.0], [0.6, -0.8, 0.0]] {
            let f = frame_for(&p);
            let c = cross(&f[0], &f[1]);
            for k in 0..3 {
                assert!((c[k] - p[k]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn hopf_map_preimage_is_one_closed_circle() {
        let spec = ManifoldSpec::<f64>::cubic(ManifoldKind::S3, 24).unwrap();
        let f = init_amn(&spec, 1, 1, None).unwrap();
        let p = [0.6, 0.0, 0.8];
        let c = preimage(&f, p, Projection::Coordinates).unwrap();
        assert_eq!(c.open_components, 0);
        assert_eq!(c.components.len(), 1);
        // φ₃ = −cos 2r = 0.8 fixes r on the whole curve.
        let r = 0.5 * (-0.8f64).acos();
        let comp = &c.components[0];
        for q in &comp.points {
            assert!((q[0] - r).abs() < 0.02, "r = {}", q[0]);
        }
        assert_eq!(comp.winding[0], 0);
        assert_eq!(comp.winding[1].abs(), 1);
        assert_eq!(comp.winding[2].abs(), 1);
    }

    #[test]
    fn vortex_pair_preimages_close() {
        let spec = ManifoldSpec::<f64>::cubic(ManifoldKind::T3, 16).unwrap();
        let f = init_t3_vav(&spec, 1).unwrap();
        let c = preimage(&f, [0.48, 0.6, 0.64], Projection::Coordinates).unwrap();
        assert_eq!(c.open_components, 0);
        assert!(!c.components.is_empty());
        let total: [i64; 3] =
            std::array::from_fn(|a| c.components.iter().map(|k| k.winding[a]).sum());
        assert_eq!(total, [0, 0, 0]);
        for comp in &c.components {
            assert!(comp.points.len() > 4);
        }
    }

    #[test]
    fn component_counts() {
        let spec = ManifoldSpec::<f64>::cubic(ManifoldKind::S3, 32).unwrap();
        let p = [0.48, 0.6, 0.64];
        let c = Field::constant(spec.clone(), [0.0, 0.0, 1.0]).unwrap();
        assert!(preimage(&c, p, Projection::Stereographic)
            .unwrap()
            .components
            .is_empty());
        for (m, n, count) in [(2, 2, 2), (3, 2, 1)] {
            let f = init_amn(&spec, m, n, None).unwrap();
            let c = preimage(&f, p, Projection::Stereographic).unwrap();
            assert_eq!(c.open_components, 0);
            assert_eq!(c.components.len(), count, "A{m}{n}");
        }
    }

    #[test]
    fn rejects_bad_requests() {
        let spec = ManifoldSpec::<f64>::cubic(ManifoldKind::T3, 8).unwrap();
        let f = Field::constant(spec, [0.0, 0.0, 1.0]).unwrap();
        assert!(preimage(&f, [0.0, 0.0, 0.0], Projection::Coordinates).is_err());
        assert!(preimage(&f, [0.0, 0.0, 1.0], Projection::Stereographic).is_err());
        let s2 = ManifoldSpec::<f64>::cubic(ManifoldKind::S2, 8).unwrap();
        let g = Field::constant(s2, [0.0, 0.0, 1.0]).unwrap();
        assert!(preimage(&g, [0.0, 0.0, 1.0], Projection::Coordinates).is_err());
    }
}
