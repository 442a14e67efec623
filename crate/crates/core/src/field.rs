//! Unit-vector fields on a lattice and the configurations used as initial
//! data.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex;

use crate::ansatz1d::{ProfileDomain, ProfileSolution};
use crate::error::{HopfError, Result};
use crate::geometry::{build_geometry, LatticeGeometry, ManifoldKind, ManifoldSpec};
use crate::scalar::{cross, dot, norm, normalized, project_tangent, Real, Vec3};

/// A point of the extended complex plane.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Stereo<T> {
    Finite(Complex<T>),
    Infinity,
}

/// Inverse of [`vector_to_stereo`]: `w = (φ¹ + iφ²)/(1 + φ³)`.
pub fn stereo_to_vector<T: Real>(w: Stereo<T>) -> Vec3<T> {
    let one = T::one();
    let two = T::lit(2.0);
    match w {
        Stereo::Infinity => [T::zero(), T::zero(), -one],
        Stereo::Finite(w) => {
            let r = w.norm();
            if !r.is_finite() {
                return [T::zero(), T::zero(), -one];
            }
            if r <= one {
                let rho = r * r;
                let d = one + rho;
                [two * w.re / d, two * w.im / d, (one - rho) / d]
            } else {
                // Same formula divided through by |w|², stable for large |w|.
                let inv = one / (r * r);
                let d = inv + one;
                [two * w.re * inv / d, two * w.im * inv / d, (inv - one) / d]
            }
        }
    }
}

/// Stereographic coordinate of a unit vector; the south pole maps to ∞.
pub fn vector_to_stereo<T: Real>(v: &Vec3<T>) -> Stereo<T> {
    let d = T::one() + v[2];
    if d <= T::zero() || (v[0] == T::zero() && v[1] == T::zero() && v[2] < T::zero()) {
        Stereo::Infinity
    } else {
        Stereo::Finite(Complex::new(v[0] / d, v[1] / d))
    }
}

/// Unit vector with polar angle `theta` from +e₃ and azimuth `phi`.
#[inline]
pub fn polar_vector<T: Real>(theta: T, phi: T) -> Vec3<T> {
    let s = theta.sin();
    [s * phi.cos(), s * phi.sin(), theta.cos()]
}

/// Lattice field of unit 3-vectors, row-major with the last axis fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct Field<T> {
    pub spec: ManifoldSpec<T>,
    pub data: Vec<Vec3<T>>,
}

impl<T: Real> Field<T> {
    /// Wraps `data`, renormalizing every vector.
    pub fn from_vectors(spec: ManifoldSpec<T>, data: Vec<Vec3<T>>) -> Result<Self> {
        spec.validate()?;
        if data.len() != spec.sites() {
            return Err(HopfError::InvalidArgument(format!(
                "field has {} sites, lattice has {}",
                data.len(),
                spec.sites()
            )));
        }
        let mut f = Field { spec, data };
        f.renormalize()?;
        Ok(f)
    }

    /// Wraps data already known to be unit norm, keeping it bit for bit.
    pub(crate) fn from_unit_vectors(spec: ManifoldSpec<T>, data: Vec<Vec3<T>>) -> Result<Self> {
        spec.validate()?;
        if data.len() != spec.sites() {
            return Err(HopfError::InvalidArgument(format!(
                "field has {} sites, lattice has {}",
                data.len(),
                spec.sites()
            )));
        }
        Ok(Field { spec, data })
    }

    /// Same vector at every site.
    pub fn constant(spec: ManifoldSpec<T>, v: Vec3<T>) -> Result<Self> {
        let n = spec.sites();
        Self::from_vectors(spec, vec![v; n])
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn renormalize(&mut self) -> Result<()> {
        for (idx, v) in self.data.iter_mut().enumerate() {
            *v = normalized(v).ok_or_else(|| {
                HopfError::InvalidArgument(format!("zero or non-finite vector at site {idx}"))
            })?;
        }
        Ok(())
    }

    /// Largest `||φ| − 1|` over the lattice.
    pub fn max_norm_defect(&self) -> T {
        self.data
            .iter()
            .map(|v| (norm(v) - T::one()).abs())
            .fold(T::zero(), T::max)
    }

    /// Flat `[φ¹, φ², φ³, φ¹, …]` view of the data.
    pub fn components(&self) -> Vec<T> {
        self.data.iter().flat_map(|v| v.iter().copied()).collect()
    }

    /// Converts to another scalar type.
    pub fn cast<U: Real>(&self) -> Result<Field<U>> {
        let spec = ManifoldSpec {
            kind: self.spec.kind,
            dims: self.spec.dims.clone(),
            radius: self.spec.radius.map(|l| U::lit(l.to_f64_lossy())),
            periods: self
                .spec
                .periods
                .iter()
                .map(|p| U::lit(p.to_f64_lossy()))
                .collect(),
        };
        let data = self
            .data
            .iter()
            .map(|v| {
                [
                    U::lit(v[0].to_f64_lossy()),
                    U::lit(v[1].to_f64_lossy()),
                    U::lit(v[2].to_f64_lossy()),
                ]
            })
            .collect();
        Field::from_vectors(spec, data)
    }
}

fn require(spec: &ManifoldSpec<impl Real>, kind: ManifoldKind) -> Result<()> {
    if spec.kind != kind {
        return Err(HopfError::WrongManifold {
            expected: kind.name(),
            got: spec.kind.name(),
        });
    }
    Ok(())
}

/// Evaluates `f` at the coordinates of every site.
fn sample<T: Real, F>(spec: &ManifoldSpec<T>, mut f: F) -> Result<Field<T>>
where
    F: FnMut(&LatticeGeometry<T>, [T; 3]) -> Vec3<T>,
{
    let geom = build_geometry(spec)?;
    let lat = &geom.lattice;
    let mut data = Vec::with_capacity(lat.len());
    for idx in 0..lat.len() {
        let i = lat.coords(idx);
        let x = [
            geom.coordinate(0, i[0]),
            geom.coordinate(1, i[1]),
            if lat.ndim == 3 {
                geom.coordinate(2, i[2])
            } else {
                T::zero()
            },
        ];
        data.push(f(&geom, x));
    }
    Field::from_vectors(spec.clone(), data)
}

/// Doubly symmetric S³ field `w = f(r)·exp(i(ms − nt))`, Hopf charge `m·n`.
///
/// The profile is given as the target polar angle `α(r)` measured from the
/// south pole, `w = cot(α/2)·e^{iΦ}`; without one, `α = 2r` (that is
/// `f(r) = cot r`, exact for `m = n`).
pub fn init_amn<T: Real>(
    spec: &ManifoldSpec<T>,
    m: u32,
    n: u32,
    profile: Option<&ProfileSolution<T>>,
) -> Result<Field<T>> {
    require(spec, ManifoldKind::S3)?;
    if m == 0 || n == 0 {
        return Err(HopfError::InvalidArgument(
            "m and n must be positive".into(),
        ));
    }
    if let Some(p) = profile {
        if p.domain != ProfileDomain::Radial {
            return Err(HopfError::InvalidArgument(
                "init_amn needs a radial (r ∈ [0, π/2]) profile".into(),
            ));
        }
    }
    let (mf, nf) = (T::from_u32(m).unwrap(), T::from_u32(n).unwrap());
    let two = T::lit(2.0);
    sample(spec, |_, [r, s, t]| {
        let alpha = match profile {
            Some(p) => p.eval(r),
            None => two * r,
        };
        let phase = mf * s - nf * t;
        let sa = alpha.sin();
        [sa * phase.cos(), sa * phase.sin(), -alpha.cos()]
    })
}

/// Vortex–antivortex field on S²×S¹:
/// `φ = (sin f cos(φ ± χ), sin f sin(φ ± χ), cos f)`, upper sign on the
/// northern hemisphere. Hopf charge 2, zero net vortex number.
pub fn init_vav_s2s1<T: Real>(
    spec: &ManifoldSpec<T>,
    profile: &ProfileSolution<T>,
) -> Result<Field<T>> {
    require(spec, ManifoldKind::S2xS1)?;
    if profile.domain != ProfileDomain::Polar {
        return Err(HopfError::InvalidArgument(
            "init_vav_s2s1 needs a polar (θ ∈ [0, π]) profile".into(),
        ));
    }
    profile.check_vav_boundary()?;
    let half_pi = T::FRAC_PI_2();
    sample(spec, |_, [theta, phi, chi]| {
        let f = profile.eval(theta);
        let az = if theta < half_pi {
            phi + chi
        } else {
            phi - chi
        };
        polar_vector(f, az)
    })
}

/// Maps the square `[-1, 1]²` onto the unit sphere with degree 1: the
/// centre goes to the north pole, the boundary to the south pole. Returns
/// polar angle and azimuth.
fn square_collapse<T: Real>(u: T, v: T) -> (T, T) {
    let rho = u.abs().max(v.abs()).min(T::one());
    (T::PI() * rho, v.atan2(u))
}

/// Parallel vortex–antivortex configuration on T³ with Hopf charge
/// `2·pairs`.
///
/// The (y, z) torus is cut into `pairs` strips along y; each strip is
/// collapsed onto S² with degree 1 and composed with the S²×S¹
/// vortex–antivortex map (linear profile), using x as the circle. Vortex
/// lines run along x, and the net flux vanishes in every direction.
pub fn init_t3_vav<T: Real>(spec: &ManifoldSpec<T>, pairs: u32) -> Result<Field<T>> {
    require(spec, ManifoldKind::T3)?;
    if pairs == 0 {
        return Err(HopfError::InvalidArgument("pairs must be positive".into()));
    }
    let pf = T::from_u32(pairs).unwrap();
    let one = T::one();
    let two = T::lit(2.0);
    let half_pi = T::FRAC_PI_2();
    sample(spec, |g, [x, y, z]| {
        let period = g.coordinate_period;
        let strip = period[1] / pf;
        let k = (y / strip).floor();
        let u = two * (y - k * strip) / strip - one;
        let v = two * z / period[2] - one;
        let (theta, az) = square_collapse(u, v);
        let chi = T::two_pi() * x / period[0];
        let f = two * theta;
        let az = if theta < half_pi { az + chi } else { az - chi };
        polar_vector(f, az)
    })
}

/// Degree-`q` map on the unit sphere, `w = z^q / |z|^{q−1}`.
pub fn init_baby_s2<T: Real>(spec: &ManifoldSpec<T>, q: u32) -> Result<Field<T>> {
    require(spec, ManifoldKind::S2)?;
    if q == 0 {
        return Err(HopfError::InvalidArgument("degree must be positive".into()));
    }
    let qf = T::from_u32(q).unwrap();
    sample(spec, |_, [theta, phi, _]| polar_vector(theta, qf * phi))
}

/// Degree-2 torus field with constant energy density:
/// `φ¹ = 1 − (2/π)|x − π|`, `φ² = sgn(x − π) f cos y`, `φ³ = f sin y`,
/// `f = √(1 − (φ¹)²)`, coordinates rescaled to period 2π.
pub fn init_baby_t2<T: Real>(spec: &ManifoldSpec<T>) -> Result<Field<T>> {
    require(spec, ManifoldKind::T2)?;
    let pi = T::PI();
    let one = T::one();
    sample(spec, |g, [x, y, _]| {
        let xs = T::two_pi() * x / g.coordinate_period[0];
        let ys = T::two_pi() * y / g.coordinate_period[1];
        let p1 = one - T::lit(2.0) / pi * (xs - pi).abs();
        let f = (one - p1 * p1).max(T::zero()).sqrt();
        let sgn = if xs > pi {
            one
        } else if xs < pi {
            -one
        } else {
            T::zero()
        };
        [p1, sgn * f * ys.cos(), f * ys.sin()]
    })
}

/// Degree-`q` torus field obtained by collapsing the fundamental square onto
/// the sphere and winding the azimuth `q` times. Used for `q = 1`, which has
/// no smooth minimizer.
pub fn init_t2_collapse<T: Real>(spec: &ManifoldSpec<T>, q: u32) -> Result<Field<T>> {
    require(spec, ManifoldKind::T2)?;
    if q == 0 {
        return Err(HopfError::InvalidArgument("degree must be positive".into()));
    }
    let qf = T::from_u32(q).unwrap();
    let one = T::one();
    let two = T::lit(2.0);
    sample(spec, |g, [x, y, _]| {
        let u = two * x / g.coordinate_period[0] - one;
        let v = two * y / g.coordinate_period[1] - one;
        let (theta, az) = square_collapse(u, v);
        polar_vector(theta, qf * az)
    })
}

/// Compact degree-`q` skyrmion of the given radius centred in the torus:
/// polar angle `π·r/radius` up to the radius, south pole beyond it.
pub fn init_t2_skyrmion<T: Real>(spec: &ManifoldSpec<T>, q: u32, radius: T) -> Result<Field<T>> {
    require(spec, ManifoldKind::T2)?;
    if q == 0 {
        return Err(HopfError::InvalidArgument("degree must be positive".into()));
    }
    let geom = build_geometry(spec)?;
    let [px, py, _] = geom.coordinate_period;
    if !(radius > T::zero() && radius + radius < px.min(py)) {
        return Err(HopfError::InvalidArgument(format!(
            "skyrmion radius must lie in (0, {}), got {}",
            (px.min(py) / T::lit(2.0)).to_f64_lossy(),
            radius.to_f64_lossy()
        )));
    }
    let qf = T::from_u32(q).unwrap();
    let half = T::lit(0.5);
    sample(spec, |_, [x, y, _]| {
        let (u, v) = (x - half * px, y - half * py);
        let rho = (u.hypot(v) / radius).min(T::one());
        polar_vector(T::PI() * rho, qf * v.atan2(u))
    })
}

/// Adds a reproducible random tangent displacement of size up to
/// `amplitude` at every site and renormalizes.
///
/// The displacement at each site is `amplitude·P(u)` where the components of
/// `u` are drawn uniformly from `[-1, 1)` by ChaCha8 seeded with `seed`
/// (`rand_chacha::ChaCha8Rng::seed_from_u64`), sites in storage order, and
/// `P` projects onto the tangent plane. ChaCha output is platform
/// independent.
pub fn perturb<T: Real>(field: &Field<T>, amplitude: T, seed: u64) -> Result<Field<T>> {
    if !(amplitude >= T::zero()) {
        return Err(HopfError::InvalidArgument(format!(
            "perturbation amplitude must be >= 0, got {amplitude}"
        )));
    }
    if amplitude == T::zero() {
        return Ok(field.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = field.clone();
    for v in out.data.iter_mut() {
        let u: Vec3<T> = [
            T::lit(rng.gen_range(-1.0..1.0)),
            T::lit(rng.gen_range(-1.0..1.0)),
            T::lit(rng.gen_range(-1.0..1.0)),
        ];
        let t = project_tangent(&u, v);
        *v = [
            v[0] + amplitude * t[0],
            v[1] + amplitude * t[1],
            v[2] + amplitude * t[2],
        ];
    }
    out.renormalize()?;
    Ok(out)
}

/// Angle between two unit vectors, accurate for small and large angles.
#[inline]
pub fn angle_between<T: Real>(a: &Vec3<T>, b: &Vec3<T>) -> T {
    norm(&cross(a, b)).atan2(dot(a, b))
}

/// Largest angle between the field vectors at the two ends of any lattice
/// link.
pub fn continuity_check<T: Real>(field: &Field<T>) -> T {
    let lat = field.spec.lattice();
    let mut worst = T::zero();
    for axis in 0..lat.ndim {
        lat.for_each_link(axis, |_, a, b| {
            let ang = angle_between(&field.data[a], &field.data[b]);
            if ang > worst {
                worst = ang;
            }
        });
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn stereo_special_points() {
        let v = stereo_to_vector::<f64>(Stereo::Finite(Complex::new(0.0, 0.0)));
        assert_eq!(v, [0.0, 0.0, 1.0]);
        assert_eq!(stereo_to_vector::<f64>(Stereo::Infinity), [0.0, 0.0, -1.0]);
        let v = stereo_to_vector::<f64>(Stereo::Finite(Complex::new(1.0, 0.0)));
        assert_relative_eq!(v[0], 1.0, epsilon = 1e-15);
        assert_relative_eq!(v[2], 0.0, epsilon = 1e-15);
        assert_eq!(vector_to_stereo(&[0.0, 0.0, -1.0]), Stereo::Infinity);
    }

    proptest! {
        #[test]
        fn stereo_round_trip(re in -1e3f64..1e3, im in -1e3f64..1e3) {
            let w = Complex::new(re, im);
            let v = stereo_to_vector(Stereo::Finite(w));
            prop_assert!((norm(&v) - 1.0).abs() < 1e-12);
            match vector_to_stereo(&v) {
                Stereo::Finite(back) => {
                    let scale = 1.0 + w.norm();
                    prop_assert!((back - w).norm() / scale < 1e-12 * scale);
                }
                Stereo::Infinity => prop_assert!(false, "finite point mapped to infinity"),
            }
        }

        #[test]
        fn vector_round_trip(theta in 0.0f64..PI, phi in -PI..PI) {
            let v = polar_vector(theta, phi);
            let back = stereo_to_vector(vector_to_stereo(&v));
            for k in 0..3 {
                prop_assert!((back[k] - v[k]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn initializers_are_unit_norm() {
        let s3 = ManifoldSpec::<f64>::cubic(ManifoldKind::S3, 8).unwrap();
        let t3 = ManifoldSpec::<f64>::cubic(ManifoldKind::T3, 8).unwrap();
        let s2 = ManifoldSpec::<f64>::cubic(ManifoldKind::S2, 8).unwrap();
        let t2 = ManifoldSpec::<f64>::cubic(ManifoldKind::T2, 8).unwrap();
        for f in [
            init_amn(&s3, 3, 2, None).unwrap(),
            init_t3_vav(&t3, 2).unwrap(),
            init_baby_s2(&s2, 3).unwrap(),
            init_baby_t2(&t2).unwrap(),
            init_t2_collapse(&t2, 1).unwrap(),
            init_t2_skyrmion(&t2, 1, 1.5).unwrap(),
        ] {
            assert!(f.max_norm_defect() < 1e-12);
            assert_eq!(f.components().len(), 3 * f.spec.sites());
        }
    }

    #[test]
    fn skyrmion_radius_must_fit() {
        let t2 = ManifoldSpec::<f64>::cubic(ManifoldKind::T2, 8).unwrap();
        assert!(init_t2_skyrmion(&t2, 1, 3.2).is_err());
        assert!(init_t2_skyrmion(&t2, 1, 0.0).is_err());
        assert!(init_t2_skyrmion(&t2, 0, 1.0).is_err());
    }

    #[test]
    fn wrong_manifold_is_rejected() {
        let t3 = ManifoldSpec::<f64>::cubic(ManifoldKind::T3, 8).unwrap();
        assert!(matches!(
            init_amn(&t3, 1, 1, None),
            Err(HopfError::WrongManifold { .. })
        ));
        let s3 = ManifoldSpec::<f64>::cubic(ManifoldKind::S3, 8).unwrap();
        assert!(init_t3_vav(&s3, 1).is_err());
        assert!(init_baby_t2(&s3).is_err());
    }

    #[test]
    fn perturb_is_deterministic() {
        let s3 = ManifoldSpec::<f64>::cubic(ManifoldKind::S3, 8).unwrap();
        let f = init_amn(&s3, 2, 1, None).unwrap();
        assert_eq!(perturb(&f, 0.0, 7).unwrap(), f);
        let a = perturb(&f, 0.1, 7).unwrap();
        let b = perturb(&f, 0.1, 7).unwrap();
        assert_eq!(a, b);
        let c = perturb(&f, 0.1, 8).unwrap();
        assert_ne!(a, c);
        assert!(a.max_norm_defect() < 1e-12);
        assert!(perturb(&f, -0.1, 7).is_err());
    }

    #[test]
    fn continuity_of_simple_fields() {
        let t3 = ManifoldSpec::<f64>::cubic(ManifoldKind::T3, 6).unwrap();
        let c = Field::constant(t3, [0.0, 1.0, 0.0]).unwrap();
        assert_eq!(continuity_check(&c), 0.0);

        // φ¹ is a tent in x, so the polar angle from ±e₁ grows like
        // acos(1 − 2|x − x_pole|/π): the steepest x-link starts at a pole
        // site. Along y the azimuth moves by h at radius f ≤ 1.
        let t2 = ManifoldSpec::<f64>::cubic(ManifoldKind::T2, 64).unwrap();
        let f = init_baby_t2(&t2).unwrap();
        let h = 2.0 * PI / 64.0;
        let bound = (1.0 - 2.0 * h / PI).acos().max(h);
        let worst = continuity_check(&f);
        assert!(
            (worst - bound).abs() < 1e-12,
            "max link angle {worst} vs {bound}"
        );
        assert!(worst < PI / 32.0 * 4.0);
    }
}
