//! Discrete quartic energy, its gradient, and the quadratic regularizer.
//!
//! Each plaquette contributes `c·A²`, where `A` is the signed area of the
//! spherical quadrilateral spanned by the four corner vectors and `c` the
//! metric weight from [`LatticeGeometry::plaquette_weight`].

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{HopfError, Result};
use crate::field::Field;
use crate::geometry::{complementary_axis, LatticeGeometry};
use crate::scalar::{cross, dot, sub, Real, Vec3};

/// Below this value of `N² + D²` a triangle has two antipodal corners and
/// its area is undefined.
fn degeneracy_floor<T: Real>() -> T {
    T::epsilon() * T::lit(64.0)
}

#[inline]
fn triangle_nd<T: Real>(a: &Vec3<T>, b: &Vec3<T>, c: &Vec3<T>) -> (T, T) {
    let n = dot(a, &cross(b, c));
    let d = T::one() + dot(a, b) + dot(b, c) + dot(c, a);
    (n, d)
}

/// Signed area of the geodesic triangle `(a, b, c)` on the unit sphere.
/// `None` if two corners are antipodal.
#[inline]
pub fn triangle_area<T: Real>(a: &Vec3<T>, b: &Vec3<T>, c: &Vec3<T>) -> Option<T> {
    let (n, d) = triangle_nd(a, b, c);
    if n * n + d * d < degeneracy_floor() {
        None
    } else {
        Some(T::lit(2.0) * n.atan2(d))
    }
}

/// Triangle area and its partial derivatives with respect to the corners.
#[inline]
fn triangle_area_grad<T: Real>(a: &Vec3<T>, b: &Vec3<T>, c: &Vec3<T>) -> Option<(T, [Vec3<T>; 3])> {
    let bc = cross(b, c);
    let ca = cross(c, a);
    let ab = cross(a, b);
    let n = dot(a, &bc);
    let d = T::one() + dot(a, b) + dot(b, c) + dot(c, a);
    let q = n * n + d * d;
    if q < degeneracy_floor() {
        return None;
    }
    let two = T::lit(2.0);
    let s = two / q;
    let g = |dn: &Vec3<T>, p: &Vec3<T>, r: &Vec3<T>| -> Vec3<T> {
        [
            s * (d * dn[0] - n * (p[0] + r[0])),
            s * (d * dn[1] - n * (p[1] + r[1])),
            s * (d * dn[2] - n * (p[2] + r[2])),
        ]
    };
    Some((two * n.atan2(d), [g(&bc, b, c), g(&ca, c, a), g(&ab, a, b)]))
}

/// Signed area of the spherical quadrilateral `(v1, v2, v3, v4)`, split
/// along the `(v1, v3)` diagonal. Lies in `(-4π, 4π)`.
pub fn plaquette_area<T: Real>(
    v1: &Vec3<T>,
    v2: &Vec3<T>,
    v3: &Vec3<T>,
    v4: &Vec3<T>,
) -> Result<T> {
    quad_area(v1, v2, v3, v4).ok_or(HopfError::IllConditionedPlaquette { site: 0 })
}

#[inline]
pub(crate) fn quad_area<T: Real>(
    v1: &Vec3<T>,
    v2: &Vec3<T>,
    v3: &Vec3<T>,
    v4: &Vec3<T>,
) -> Option<T> {
    Some(triangle_area(v1, v2, v3)? + triangle_area(v1, v3, v4)?)
}

#[inline]
fn quad_area_grad<T: Real>(v: [&Vec3<T>; 4]) -> Option<(T, [Vec3<T>; 4])> {
    let (a1, g1) = triangle_area_grad(v[0], v[1], v[2])?;
    let (a2, g2) = triangle_area_grad(v[0], v[2], v[3])?;
    let add = |x: &Vec3<T>, y: &Vec3<T>| [x[0] + y[0], x[1] + y[1], x[2] + y[2]];
    Some((
        a1 + a2,
        [add(&g1[0], &g2[0]), g1[1], add(&g1[2], &g2[1]), g2[2]],
    ))
}

/// Energy breakdown of a field.
#[derive(Clone, Debug, Serialize)]
pub struct EnergyReport<T> {
    pub e4: T,
    pub e2: T,
    pub beta: T,
    /// `e4 + beta·e2`.
    pub e_total: T,
    /// `E₄` split by the axis normal to the plaquettes (one entry in 2D).
    pub directional: Vec<T>,
    /// Energy per unit volume at every site: for each orientation, the mean
    /// over the incident plaquettes, summed over orientations.
    pub density: Vec<T>,
    pub kappa: T,
}

impl<T: Real> EnergyReport<T> {
    pub fn density_range(&self) -> (T, T) {
        self.density
            .iter()
            .fold((T::infinity(), T::neg_infinity()), |(lo, hi), &d| {
                (lo.min(d), hi.max(d))
            })
    }
}

fn check<T: Real>(field: &Field<T>, geom: &LatticeGeometry<T>) -> Result<()> {
    if field.spec.same_lattice(&geom.spec) {
        Ok(())
    } else {
        Err(HopfError::LatticeMismatch)
    }
}

/// Site data followed by the virtual boundary vectors of the closure.
/// Fails with the first ring site when a ring averages to (nearly) zero.
pub(crate) fn extend<T: Real>(data: &[Vec3<T>], geom: &LatticeGeometry<T>) -> Result<Vec<Vec3<T>>> {
    let rings = &geom.closure().rings;
    let mut ext = Vec::with_capacity(data.len() + rings.len());
    ext.extend_from_slice(data);
    for ring in rings {
        let (sum, len) = ring_sum(data, ring);
        let n = dot(&sum, &sum).sqrt();
        if !(n > T::lit(1e-6) * len) {
            return Err(HopfError::IllConditionedPlaquette { site: ring[0] });
        }
        ext.push([sum[0] / n, sum[1] / n, sum[2] / n]);
    }
    Ok(ext)
}

fn ring_sum<T: Real>(data: &[Vec3<T>], ring: &[usize]) -> (Vec3<T>, T) {
    let mut sum = [T::zero(); 3];
    for &i in ring {
        for k in 0..3 {
            sum[k] += data[i][k];
        }
    }
    (sum, T::from_usize_lossy(ring.len()))
}

/// Closure contribution to `E₄`, summed in a fixed order.
fn closure_energy<T: Real>(ext: &[Vec3<T>], geom: &LatticeGeometry<T>) -> Result<T> {
    let mut e = T::zero();
    for p in &geom.closure().plaquettes {
        let c = p.corners;
        let a = quad_area(&ext[c[0]], &ext[c[1]], &ext[c[2]], &ext[c[3]]).ok_or(
            HopfError::IllConditionedPlaquette {
                site: geom.lattice.index(p.base),
            },
        )?;
        e += p.weight * a * a;
    }
    Ok(e)
}

/// `E₄` with directional split and density, plus `E₂` at `β = 0`.
pub fn energy_e4<T: Real>(field: &Field<T>, geom: &LatticeGeometry<T>) -> Result<EnergyReport<T>> {
    energy_report(field, geom, T::zero())
}

/// Full report for the regularized functional `E₄ + β·E₂`.
pub fn energy_report<T: Real>(
    field: &Field<T>,
    geom: &LatticeGeometry<T>,
    beta: T,
) -> Result<EnergyReport<T>> {
    check(field, geom)?;
    let lat = &geom.lattice;
    let data = &field.data;
    let ext = extend(data, geom)?;
    let orients = lat.orientations();
    let mut directional = vec![T::zero(); orients.len()];
    let mut density = vec![T::zero(); lat.len()];
    let mut acc = vec![T::zero(); lat.len()];
    let mut hits = vec![0u8; lat.len()];
    let mut e4 = T::zero();
    for (o, &orient) in orients.iter().enumerate() {
        acc.iter_mut().for_each(|x| *x = T::zero());
        hits.iter_mut().for_each(|x| *x = 0);
        let mut sum = T::zero();
        let mut err = None;
        let mut add = |c: [usize; 4], w: T, vol: T, site: usize| match quad_area(
            &ext[c[0]], &ext[c[1]], &ext[c[2]], &ext[c[3]],
        ) {
            Some(a) => {
                let e = w * a * a;
                sum += e;
                for &s in c.iter().filter(|&&s| s < lat.len()) {
                    acc[s] += e / vol;
                    hits[s] += 1;
                }
            }
            None => err = err.or(Some(site)),
        };
        lat.for_each_plaquette(orient, |i0, c| {
            add(
                c,
                geom.plaquette_weight(o, i0),
                geom.plaquette_volume(o, i0),
                c[0],
            )
        });
        for p in geom
            .closure()
            .plaquettes
            .iter()
            .filter(|p| p.orientation == o)
        {
            add(p.corners, p.weight, p.volume, lat.index(p.base));
        }
        if let Some(site) = err {
            return Err(HopfError::IllConditionedPlaquette { site });
        }
        for ((d, &a), &h) in density.iter_mut().zip(&acc).zip(&hits) {
            if h > 0 {
                *d += a / T::from_u8(h).unwrap();
            }
        }
        let slot = if lat.ndim == 3 {
            complementary_axis(orient)
        } else {
            0
        };
        directional[slot] += sum;
        e4 += sum;
    }
    let e2 = e2_sum(data, geom);
    Ok(EnergyReport {
        e4,
        e2,
        beta,
        e_total: e4 + beta * e2,
        directional,
        density,
        kappa: geom.kappa,
    })
}

/// Quadratic regularizer `(1/32π²)·Σ_links |Δφ|² g^{μμ} √g Πh / h_μ²`.
pub fn energy_e2<T: Real>(field: &Field<T>, geom: &LatticeGeometry<T>) -> Result<T> {
    check(field, geom)?;
    Ok(e2_sum(&field.data, geom))
}

fn e2_sum<T: Real>(data: &[Vec3<T>], geom: &LatticeGeometry<T>) -> T {
    let lat = &geom.lattice;
    let mut total = T::zero();
    for axis in 0..lat.ndim {
        lat.for_each_link(axis, |i0, a, b| {
            let d = sub(&data[b], &data[a]);
            total += geom.link_weight(axis, i0) * dot(&d, &d);
        });
    }
    total
}

/// Sums of `E₄` and `E₂` over the sites with first index `i0`.
fn slab_energy<T: Real>(
    data: &[Vec3<T>],
    geom: &LatticeGeometry<T>,
    i0: usize,
    with_e2: bool,
) -> Result<(T, T)> {
    let lat = &geom.lattice;
    let mut e4 = T::zero();
    let mut bad = None;
    for (o, &orient) in lat.orientations().iter().enumerate() {
        let w = geom.plaquette_weight(o, i0);
        lat.for_each_plaquette_in_slab(orient, i0, &mut |_, c: [usize; 4]| match quad_area(
            &data[c[0]],
            &data[c[1]],
            &data[c[2]],
            &data[c[3]],
        ) {
            Some(a) => e4 += w * a * a,
            None => bad = bad.or(Some(c[0])),
        });
    }
    if let Some(site) = bad {
        return Err(HopfError::IllConditionedPlaquette { site });
    }
    let mut e2 = T::zero();
    if with_e2 {
        let n12 = lat.dims[1] * lat.dims[2];
        for axis in 0..lat.ndim {
            let w = geom.link_weight(axis, i0);
            for idx in i0 * n12..(i0 + 1) * n12 {
                if let Some(j) = lat.forward(lat.coords(idx), axis) {
                    let d = sub(&data[lat.index(j)], &data[idx]);
                    e2 += w * dot(&d, &d);
                }
            }
        }
    }
    Ok((e4, e2))
}

/// `E₄ + β·E₂` of raw site data, reduced over first-axis slabs in parallel.
/// Slab sums are combined in index order, so the result does not depend on
/// the thread count.
pub fn objective<T: Real>(data: &[Vec3<T>], geom: &LatticeGeometry<T>, beta: T) -> Result<T> {
    let with_e2 = beta != T::zero();
    let parts: Vec<Result<(T, T)>> = (0..geom.lattice.dims[0])
        .into_par_iter()
        .map(|i0| slab_energy(data, geom, i0, with_e2))
        .collect();
    let mut total = T::zero();
    for p in parts {
        let (e4, e2) = p?;
        total += e4 + beta * e2;
    }
    if !geom.closure().rings.is_empty() {
        total += closure_energy(&extend(data, geom)?, geom)?;
    }
    Ok(total)
}

/// Values and tangent gradient of the regularized functional.
pub struct Evaluation<T> {
    pub e4: T,
    pub e2: T,
    pub grad: Vec<Vec3<T>>,
}

/// `E₄`, `E₂` and the tangent-projected gradient of `E₄ + β·E₂` at `data`.
pub fn evaluate<T: Real>(
    data: &[Vec3<T>],
    geom: &LatticeGeometry<T>,
    beta: T,
) -> Result<Evaluation<T>> {
    let lat = &geom.lattice;
    if data.len() != lat.len() {
        return Err(HopfError::LatticeMismatch);
    }
    let mut grad = vec![[T::zero(); 3]; data.len()];
    let mut e4 = T::zero();
    let two = T::lit(2.0);
    for (o, &orient) in lat.orientations().iter().enumerate() {
        let mut bad = None;
        lat.for_each_plaquette(orient, |i0, c| {
            if bad.is_some() {
                return;
            }
            let v = [&data[c[0]], &data[c[1]], &data[c[2]], &data[c[3]]];
            match quad_area_grad(v) {
                Some((a, g)) => {
                    let w = geom.plaquette_weight(o, i0);
                    e4 += w * a * a;
                    let f = two * w * a;
                    for k in 0..4 {
                        let s = &mut grad[c[k]];
                        s[0] += f * g[k][0];
                        s[1] += f * g[k][1];
                        s[2] += f * g[k][2];
                    }
                }
                None => bad = Some(c[0]),
            }
        });
        if let Some(site) = bad {
            return Err(HopfError::IllConditionedPlaquette { site });
        }
    }
    if !geom.closure().rings.is_empty() {
        let ext = extend(data, geom)?;
        let mut gext = vec![[T::zero(); 3]; ext.len() - data.len()];
        for p in &geom.closure().plaquettes {
            let c = p.corners;
            let (a, g) = quad_area_grad([&ext[c[0]], &ext[c[1]], &ext[c[2]], &ext[c[3]]]).ok_or(
                HopfError::IllConditionedPlaquette {
                    site: lat.index(p.base),
                },
            )?;
            e4 += p.weight * a * a;
            let f = two * p.weight * a;
            for k in 0..4 {
                let s = if c[k] < data.len() {
                    &mut grad[c[k]]
                } else {
                    &mut gext[c[k] - data.len()]
                };
                s[0] += f * g[k][0];
                s[1] += f * g[k][1];
                s[2] += f * g[k][2];
            }
        }
        // Through b = S/|S|: ∂b/∂S = (1 − b bᵀ)/|S|, and ∂S/∂φ = 1 on the ring.
        for ((ring, gb), b) in geom
            .closure()
            .rings
            .iter()
            .zip(&gext)
            .zip(&ext[data.len()..])
        {
            let (sum, _) = ring_sum(data, ring);
            let n = dot(&sum, &sum).sqrt();
            let c = dot(gb, b);
            let t = [
                (gb[0] - c * b[0]) / n,
                (gb[1] - c * b[1]) / n,
                (gb[2] - c * b[2]) / n,
            ];
            for &i in ring {
                for k in 0..3 {
                    grad[i][k] += t[k];
                }
            }
        }
    }
    let mut e2 = T::zero();
    if beta != T::zero() {
        for axis in 0..lat.ndim {
            lat.for_each_link(axis, |i0, a, b| {
                let w = geom.link_weight(axis, i0);
                let d = sub(&data[b], &data[a]);
                e2 += w * dot(&d, &d);
                let f = two * beta * w;
                for k in 0..3 {
                    grad[b][k] += f * d[k];
                    grad[a][k] -= f * d[k];
                }
            });
        }
    }
    for (g, v) in grad.iter_mut().zip(data) {
        let c = dot(g, v);
        for k in 0..3 {
            g[k] -= c * v[k];
        }
    }
    Ok(Evaluation { e4, e2, grad })
}

/// Tangent-projected gradient of `E₄ + β·E₂`.
pub fn gradient<T: Real>(
    field: &Field<T>,
    geom: &LatticeGeometry<T>,
    beta: T,
) -> Result<Vec<Vec3<T>>> {
    check(field, geom)?;
    if !(beta >= T::zero()) {
        return Err(HopfError::InvalidArgument(format!(
            "beta must be >= 0, got {beta}"
        )));
    }
    Ok(evaluate(&field.data, geom, beta)?.grad)
}

/// First-order energy change `δE` when the y and z periods shrink by
/// factors `1 − ε_y`, `1 − ε_z`.
pub fn anisotropy_first_order<T: Real>(ex: T, ey: T, ez: T, eps_y: T, eps_z: T) -> T {
    (ex - ey + ez) * eps_y + (ex - ez + ey) * eps_z
}

/// True when every small period deformation raises the energy, i.e. both
/// coefficients of [`anisotropy_first_order`] are positive.
pub fn period_stable<T: Real>(ex: T, ey: T, ez: T) -> bool {
    ex - ey + ez > T::zero() && ex - ez + ey > T::zero()
}
