//! Topological diagnostics: degree, vortex fluxes, Hopf charge, preimages
//! and linking numbers.
//!
//! Sign conventions: plaquette areas are positive when the image quadrangle
//! turns counter-clockwise seen from outside the sphere; lattice axes are
//! ordered as the manifold coordinates; the flux through a section normal to
//! axis `a` is `B_a = ½ ε_{aμν} F_{μν}`. With these, the identity map of S²
//! has degree +1 and the standard Hopf map of S³ has charge +1.

mod linking;
mod preimage;
mod spectral;

pub use linking::{linking_charge, linking_number, LinkingNumber};
pub use preimage::{preimage, PreimageComponent, PreimageCurve, Projection};
pub use spectral::hopf_charge_t3;

use serde::Serialize;

use crate::energy::{extend, quad_area};
use crate::error::{HopfError, Result};
use crate::field::Field;
use crate::geometry::{build_geometry, complementary_axis, LatticeGeometry, ManifoldKind};
use crate::scalar::Real;

/// Numeric charge with its nearest integer.
#[derive(Clone, Debug, Serialize)]
pub struct ChargeReport<T> {
    pub q_numeric: T,
    pub q: i64,
    /// `|q_numeric − q|`.
    pub residual: T,
    /// Net flux per axis; empty where fluxes do not apply.
    pub net_fluxes: Vec<i64>,
}

impl<T: Real> ChargeReport<T> {
    pub fn new(q_numeric: T, net_fluxes: Vec<i64>) -> Self {
        let q = q_numeric.round().to_i64().unwrap_or(0);
        ChargeReport {
            q_numeric,
            q,
            residual: (q_numeric - T::from_i64(q).unwrap()).abs(),
            net_fluxes,
        }
    }

    /// The integer is meaningful: small residual and no net flux.
    pub fn trusted(&self) -> bool {
        self.residual < T::lit(0.05) && self.net_fluxes.iter().all(|&f| f == 0)
    }
}

fn area_sum<T: Real>(
    field: &Field<T>,
    geom: &LatticeGeometry<T>,
    orientation: usize,
    mut keep: impl FnMut([usize; 3]) -> bool,
) -> Result<T> {
    let lat = &geom.lattice;
    let ext = extend(&field.data, geom)?;
    let mut sum = T::zero();
    let mut bad = None;
    lat.for_each_plaquette(lat.orientations()[orientation], |_, c| {
        if bad.is_some() || !keep(lat.coords(c[0])) {
            return;
        }
        match quad_area(&ext[c[0]], &ext[c[1]], &ext[c[2]], &ext[c[3]]) {
            Some(a) => sum += a,
            None => bad = Some(c[0]),
        }
    });
    if let Some(site) = bad {
        return Err(HopfError::IllConditionedPlaquette { site });
    }
    for p in geom
        .closure()
        .plaquettes
        .iter()
        .filter(|p| p.orientation == orientation)
    {
        if !keep(p.base) {
            continue;
        }
        let c = p.corners;
        sum += quad_area(&ext[c[0]], &ext[c[1]], &ext[c[2]], &ext[c[3]]).ok_or(
            HopfError::IllConditionedPlaquette {
                site: lat.index(p.base),
            },
        )?;
    }
    Ok(sum)
}

/// Degree of a map from a closed surface: total image area over 4π.
pub fn degree_2d<T: Real>(field: &Field<T>) -> Result<ChargeReport<T>> {
    if field.spec.kind.ndim() != 2 {
        return Err(HopfError::WrongManifold {
            expected: "s2 or t2",
            got: field.spec.kind.name(),
        });
    }
    let geom = build_geometry(&field.spec)?;
    let total = area_sum(field, &geom, 0, |_| true)?;
    Ok(ChargeReport::new(
        total / (T::lit(4.0) * T::PI()),
        Vec::new(),
    ))
}

/// Axes whose normal sections are closed surfaces.
pub fn flux_axes(kind: ManifoldKind) -> &'static [usize] {
    match kind {
        ManifoldKind::T3 => &[0, 1, 2],
        ManifoldKind::S3 => &[0],
        ManifoldKind::S2xS1 => &[0, 2],
        ManifoldKind::S2 | ManifoldKind::T2 => &[],
    }
}

/// Degree of the field restricted to each section normal to `axis`,
/// required to agree between all sections. Returns the common value.
pub fn net_flux<T: Real>(field: &Field<T>, axis: usize) -> Result<i64> {
    let geom = build_geometry(&field.spec)?;
    net_flux_with(field, &geom, axis)
}

pub(crate) fn net_flux_with<T: Real>(
    field: &Field<T>,
    geom: &LatticeGeometry<T>,
    axis: usize,
) -> Result<i64> {
    if field.spec.kind.ndim() != 3 {
        return Err(HopfError::WrongManifold {
            expected: "a 3D manifold",
            got: field.spec.kind.name(),
        });
    }
    if !flux_axes(field.spec.kind).contains(&axis) {
        return Err(HopfError::OpenCrossSection(axis));
    }
    let lat = &geom.lattice;
    let o = lat
        .orientations()
        .iter()
        .position(|&or| complementary_axis(or) == axis)
        .expect("every axis has a normal orientation");
    let sign = if axis == 1 { -T::one() } else { T::one() };
    let four_pi = T::lit(4.0) * T::PI();
    let mut first = None;
    for c in 0..lat.dims[axis] {
        let sum = area_sum(field, geom, o, |i| i[axis] == c)?;
        let flux = (sign * sum / four_pi).round().to_i64().unwrap_or(i64::MAX);
        match first {
            None => first = Some(flux),
            Some(f) if f != flux => {
                return Err(HopfError::CrossSectionDisagreement {
                    axis,
                    first: f,
                    other: flux,
                })
            }
            _ => {}
        }
    }
    Ok(first.unwrap_or(0))
}

/// Net fluxes through every closed section family of a 3D field.
pub fn net_fluxes<T: Real>(field: &Field<T>) -> Result<Vec<(usize, i64)>> {
    let geom = build_geometry(&field.spec)?;
    flux_axes(field.spec.kind)
        .iter()
        .map(|&a| Ok((a, net_flux_with(field, &geom, a)?)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ansatz1d::{ProfileDomain, ProfileSolution};
    use crate::field::{
        init_baby_s2, init_baby_t2, init_t2_collapse, init_t2_skyrmion, init_t3_vav, init_vav_s2s1,
        polar_vector,
    };
    use crate::geometry::ManifoldSpec;

    #[test]
    fn degrees_of_exact_fields() {
        let s2 = ManifoldSpec::<f64>::cubic(ManifoldKind::S2, 32).unwrap();
        for q in 1..=3 {
            let r = degree_2d(&init_baby_s2(&s2, q).unwrap()).unwrap();
            assert_eq!(r.q, q as i64);
            assert!(r.residual < 1e-3, "residual {}", r.residual);
        }
        let t2 = ManifoldSpec::<f64>::cubic(ManifoldKind::T2, 32).unwrap();
        let r = degree_2d(&init_baby_t2(&t2).unwrap()).unwrap();
        assert_eq!(r.q, 2);
        assert!(r.residual < 1e-3);
        let r = degree_2d(&init_t2_collapse(&t2, 1).unwrap()).unwrap();
        assert_eq!(r.q, 1);
        for q in 1..=3 {
            let r = degree_2d(&init_t2_skyrmion(&t2, q, 2.0).unwrap()).unwrap();
            assert_eq!(r.q, q as i64);
        }
        let c = Field::constant(t2, [0.0, 0.0, 1.0]).unwrap();
        assert_eq!(degree_2d(&c).unwrap().q_numeric, 0.0);
    }

    #[test]
    fn fluxes() {
        let t3 = ManifoldSpec::<f64>::cubic(ManifoldKind::T3, 16).unwrap();
        let c = Field::constant(t3.clone(), [1.0, 0.0, 0.0]).unwrap();
        assert_eq!(net_fluxes(&c).unwrap(), vec![(0, 0), (1, 0), (2, 0)]);
        let v = init_t3_vav(&t3, 1).unwrap();
        assert_eq!(net_fluxes(&v).unwrap(), vec![(0, 0), (1, 0), (2, 0)]);

        let ss = ManifoldSpec::s2xs1(&[16, 16, 16], 1.5).unwrap();
        let prof = ProfileSolution::<f64>::linear(ProfileDomain::Polar, 256);
        let f = init_vav_s2s1(&ss, &prof).unwrap();
        assert_eq!(net_fluxes(&f).unwrap(), vec![(0, 0), (2, 0)]);
        assert!(matches!(
            net_flux(&f, 1),
            Err(HopfError::OpenCrossSection(1))
        ));

        // A single vortex w = tan(θ/2) e^{iφ}, constant along the circle.
        let g = crate::geometry::build_geometry(&ss).unwrap();
        let lat = ss.lattice();
        let data = (0..lat.len())
            .map(|idx| {
                let i = lat.coords(idx);
                polar_vector(g.coordinate(0, i[0]), g.coordinate(1, i[1]))
            })
            .collect();
        let single = Field::from_vectors(ss, data).unwrap();
        assert_eq!(net_flux(&single, 2).unwrap(), 1);
        assert_eq!(net_flux(&single, 0).unwrap(), 0);
    }

    #[test]
    fn wrong_dimension() {
        let s3 = ManifoldSpec::<f64>::cubic(ManifoldKind::S3, 8).unwrap();
        let f = Field::constant(s3, [0.0, 0.0, 1.0]).unwrap();
        assert!(degree_2d(&f).is_err());
        assert!(matches!(
            net_flux(&f, 2),
            Err(HopfError::OpenCrossSection(2))
        ));
        assert_eq!(net_flux(&f, 0).unwrap(), 0);
    }
}
