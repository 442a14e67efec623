//! Reduced one-dimensional functionals of the symmetric ansätze.
//!
//! Both ansätze reduce to `E = K ∫ u'(x)² W(x) dx` with `u = cos f`:
//!
//! * doubly symmetric S³ fields `w = cot(α/2) e^{i(ms − nt)}`:
//!   `K = 1/8`, `W = m² tan r + n² cot r` on `[0, π/2]`, `u` from 1 to −1;
//! * vortex–antivortex fields on S²×S¹ (sphere radius L):
//!   `K = L/(4√2)`, `W = 1/(L² sin θ) + sin θ` on `[0, π]`, `u` from 1 to −1
//!   on each hemisphere.
//!
//! The quadrature uses cell conductances `h / trapezoid(1/W)`. With fixed
//! end values the discrete minimizer has constant flux across cells, so it
//! is computed directly rather than iterated, and the discrete minimum is
//! `K (Δu)² / trapezoid(1/W)`.

use serde::Serialize;

use crate::error::{HopfError, Result};
use crate::geometry::ManifoldKind;
use crate::scalar::Real;

/// Interval a profile lives on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ProfileDomain {
    /// `r ∈ [0, π/2]` on S³; values are the target angle `α`, 0 → π.
    Radial,
    /// `θ ∈ [0, π]` on S²×S¹; values are `f`, 0 → π → 2π.
    Polar,
}

impl ProfileDomain {
    pub fn end<T: Real>(self) -> T {
        match self {
            ProfileDomain::Radial => T::FRAC_PI_2(),
            ProfileDomain::Polar => T::PI(),
        }
    }
}

/// Sampled profile with the reduced energy it was evaluated at.
#[derive(Clone, Debug, Serialize)]
pub struct ProfileSolution<T> {
    pub domain: ProfileDomain,
    /// Nodes `x_i = i·h`, endpoints included.
    pub grid: Vec<T>,
    pub values: Vec<T>,
    /// Sphere radius; `Polar` profiles only.
    pub radius: Option<T>,
    pub energy: T,
    /// `(x, f(x))` at the points where boundary conditions are imposed.
    pub boundary: Vec<(T, T)>,
}

impl<T: Real> ProfileSolution<T> {
    /// Samples `f` on `cells + 1` nodes. The energy is left at NaN.
    pub fn from_fn(domain: ProfileDomain, cells: usize, f: impl Fn(T) -> T) -> Self {
        let grid = nodes(domain.end(), cells);
        let values: Vec<T> = grid.iter().map(|&x| f(x)).collect();
        let mut p = ProfileSolution {
            domain,
            grid,
            values,
            radius: None,
            energy: T::nan(),
            boundary: Vec::new(),
        };
        p.record_boundary();
        p
    }

    /// The straight profile `α = 2r` or `f = 2θ`.
    pub fn linear(domain: ProfileDomain, cells: usize) -> Self {
        Self::from_fn(domain, cells, |x| T::lit(2.0) * x)
    }

    fn record_boundary(&mut self) {
        let n = self.grid.len() - 1;
        self.boundary = match self.domain {
            ProfileDomain::Radial => vec![
                (self.grid[0], self.values[0]),
                (self.grid[n], self.values[n]),
            ],
            ProfileDomain::Polar => {
                let mid = n / 2;
                vec![
                    (self.grid[0], self.values[0]),
                    (self.grid[mid], self.values[mid]),
                    (self.grid[n], self.values[n]),
                ]
            }
        };
    }

    /// Piecewise linear interpolation, clamped to the domain.
    pub fn eval(&self, x: T) -> T {
        let n = self.grid.len() - 1;
        let h = self.grid[n] / T::from_usize_lossy(n);
        let t = (x / h).max(T::zero());
        let i = t.floor().to_usize().unwrap_or(n).min(n - 1);
        let s = (t - T::from_usize_lossy(i)).min(T::one());
        self.values[i] + s * (self.values[i + 1] - self.values[i])
    }

    fn check_boundary(&self, targets: &[(T, T)]) -> Result<()> {
        let tol = T::lit(1e-9);
        let n = self.grid.len() - 1;
        if self.domain == ProfileDomain::Polar && !n.is_multiple_of(2) {
            return Err(HopfError::BoundaryViolation(
                "polar profile needs an even number of cells so θ = π/2 is a node".into(),
            ));
        }
        for (&(x, want), &(_, got)) in targets.iter().zip(&self.boundary) {
            if (got - want).abs() > tol {
                return Err(HopfError::BoundaryViolation(format!(
                    "f({x}) = {got}, expected {want}"
                )));
            }
        }
        if !self.values.windows(2).all(|w| w[1] >= w[0]) {
            log::warn!("profile is not monotone");
        }
        Ok(())
    }

    /// `f(0) = 0`, `f(π/2) = π`, `f(π) = 2π`.
    pub fn check_vav_boundary(&self) -> Result<()> {
        if self.domain != ProfileDomain::Polar {
            return Err(HopfError::BoundaryViolation("not a polar profile".into()));
        }
        let pi = T::PI();
        self.check_boundary(&[(T::zero(), T::zero()), (T::FRAC_PI_2(), pi), (pi, pi + pi)])
    }

    /// `α(0) = 0`, `α(π/2) = π`.
    pub fn check_amn_boundary(&self) -> Result<()> {
        if self.domain != ProfileDomain::Radial {
            return Err(HopfError::BoundaryViolation("not a radial profile".into()));
        }
        self.check_boundary(&[(T::zero(), T::zero()), (T::FRAC_PI_2(), T::PI())])
    }
}

fn nodes<T: Real>(end: T, cells: usize) -> Vec<T> {
    let h = end / T::from_usize_lossy(cells);
    (0..=cells).map(|i| T::from_usize_lossy(i) * h).collect()
}

/// Trapezoid averages of `1/W` per cell.
fn inverse_weights<T: Real>(grid: &[T], w_inv: impl Fn(T) -> T) -> Vec<T> {
    let half = T::lit(0.5);
    let g: Vec<T> = grid.iter().map(|&x| w_inv(x)).collect();
    g.windows(2).map(|p| half * (p[0] + p[1])).collect()
}

/// `K Σ (Δu)² / (h · avg(1/W))` over the given cells.
fn reduced_energy<T: Real>(k: T, h: T, u: &[T], avg_inv: &[T]) -> T {
    let mut e = T::zero();
    for (i, &a) in avg_inv.iter().enumerate() {
        let du = u[i + 1] - u[i];
        if du != T::zero() {
            e += du * du / (h * a);
        }
    }
    k * e
}

/// Discrete minimizer of `Σ (Δu)²/(h·a_i)` from `u_start` to `u_end`:
/// `Δu_i ∝ h·a_i`. Returns the node values.
fn constant_flux<T: Real>(avg_inv: &[T], u_start: T, u_end: T) -> Vec<T> {
    let total: T = avg_inv.iter().copied().sum();
    let mut u = Vec::with_capacity(avg_inv.len() + 1);
    u.push(u_start);
    let mut acc = T::zero();
    for &a in avg_inv {
        acc += a;
        u.push(u_start + (u_end - u_start) * acc / total);
    }
    *u.last_mut().unwrap() = u_end;
    u
}

fn amn_inv_weight<T: Real>(m: T, n: T) -> impl Fn(T) -> T {
    // 1/(m² tan r + n² cot r) = sin r cos r / (m² sin² r + n² cos² r)
    move |r: T| {
        let (s, c) = r.sin_cos();
        s * c / (m * m * s * s + n * n * c * c)
    }
}

fn vav_inv_weight<T: Real>(l: T) -> impl Fn(T) -> T {
    // 1/(1/(L² sin θ) + sin θ) = L² sin θ / (1 + L² sin² θ)
    move |t: T| {
        let s = t.sin().max(T::zero());
        l * l * s / (T::one() + l * l * s * s)
    }
}

fn vav_prefactor<T: Real>(l: T) -> T {
    l / (T::lit(4.0) * T::SQRT_2())
}

/// Reduced vortex–antivortex energy of `profile` on S²×S¹ with radius `l`.
pub fn vav_energy<T: Real>(profile: &ProfileSolution<T>, l: T) -> Result<T> {
    profile.check_vav_boundary()?;
    if !(l > T::zero()) {
        return Err(HopfError::InvalidArgument(format!(
            "L must be positive, got {l}"
        )));
    }
    let n = profile.grid.len() - 1;
    let h = profile.grid[n] / T::from_usize_lossy(n);
    let u: Vec<T> = profile.values.iter().map(|f| f.cos()).collect();
    let avg = inverse_weights(&profile.grid, vav_inv_weight(l));
    Ok(reduced_energy(vav_prefactor(l), h, &u, &avg))
}

fn vav_fixed_l<T: Real>(cells: usize, l: T) -> ProfileSolution<T> {
    let grid = nodes(T::PI(), cells);
    let avg = inverse_weights(&grid, vav_inv_weight(l));
    let mid = cells / 2;
    let one = T::one();
    let mut u = constant_flux(&avg[..mid], one, -one);
    u.pop();
    u.extend(constant_flux(&avg[mid..], -one, one));
    let h = grid[cells] / T::from_usize_lossy(cells);
    let energy = reduced_energy(vav_prefactor(l), h, &u, &avg);
    let two_pi = T::two_pi();
    let values = u
        .iter()
        .enumerate()
        .map(|(i, &ui)| {
            let a = ui.max(-one).min(one).acos();
            if i <= mid {
                a
            } else {
                two_pi - a
            }
        })
        .collect();
    let mut p = ProfileSolution {
        domain: ProfileDomain::Polar,
        grid,
        values,
        radius: Some(l),
        energy,
        boundary: Vec::new(),
    };
    p.record_boundary();
    p
}

/// Golden-section search interval for the sphere radius.
pub const VAV_L_BRACKET: (f64, f64) = (0.5, 3.0);

/// Minimizes the vortex–antivortex energy over profiles, and over `L` when
/// `l` is `None`.
pub fn vav_minimize<T: Real>(n_theta: usize, l: Option<T>) -> Result<ProfileSolution<T>> {
    if n_theta < 64 {
        return Err(HopfError::InvalidArgument(format!(
            "n_theta must be >= 64, got {n_theta}"
        )));
    }
    // Keep θ = π/2 on a node.
    let cells = n_theta + n_theta % 2;
    if let Some(l) = l {
        if !(l > T::zero() && l.is_finite()) {
            return Err(HopfError::InvalidArgument(format!(
                "L must be positive, got {l}"
            )));
        }
        return Ok(vav_fixed_l(cells, l));
    }
    let (lo, hi) = (T::lit(VAV_L_BRACKET.0), T::lit(VAV_L_BRACKET.1));
    let energy = |x: T| vav_fixed_l(cells, x).energy;
    let best = golden_section(energy, lo, hi, T::lit(1e-7).max(T::epsilon().sqrt()), 200)?;
    let edge = (hi - lo) * T::lit(1e-3);
    if best - lo < edge || hi - best < edge {
        return Err(HopfError::NonConvergence(format!(
            "optimal L = {best} sits on the search bracket edge"
        )));
    }
    Ok(vav_fixed_l(cells, best))
}

fn golden_section<T: Real>(
    f: impl Fn(T) -> T,
    mut a: T,
    mut b: T,
    tol: T,
    max_iter: usize,
) -> Result<T> {
    let r = (T::lit(5.0).sqrt() - T::one()) / T::lit(2.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..max_iter {
        if (b - a).abs() < tol {
            return Ok((a + b) / T::lit(2.0));
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    Err(HopfError::NonConvergence(
        "golden-section search did not converge".into(),
    ))
}

/// Closed-form minimal energy of the doubly symmetric fields:
/// `(p − 1/p)/(2 ln p)·mn` with `p = m/n`, and `mn` when `m = n`.
pub fn amn_energy_formula<T: Real>(m: u32, n: u32) -> T {
    let (mf, nf) = (T::from_u32(m).unwrap(), T::from_u32(n).unwrap());
    if m == n {
        return mf * nf;
    }
    let p = mf / nf;
    (p - p.recip()) / (T::lit(2.0) * p.ln()) * mf * nf
}

/// Reduced S³ energy of a radial profile `α(r)`.
pub fn amn_energy<T: Real>(profile: &ProfileSolution<T>, m: u32, n: u32) -> Result<T> {
    profile.check_amn_boundary()?;
    let (mf, nf) = (T::from_u32(m).unwrap(), T::from_u32(n).unwrap());
    let cells = profile.grid.len() - 1;
    let h = profile.grid[cells] / T::from_usize_lossy(cells);
    let u: Vec<T> = profile.values.iter().map(|a| a.cos()).collect();
    let avg = inverse_weights(&profile.grid, amn_inv_weight(mf, nf));
    Ok(reduced_energy(T::lit(0.125), h, &u, &avg))
}

/// Optimal radial profile for `w = cot(α/2) e^{i(ms − nt)}`.
pub fn amn_profile_minimize<T: Real>(m: u32, n: u32, n_r: usize) -> Result<ProfileSolution<T>> {
    if m == 0 || n == 0 {
        return Err(HopfError::InvalidArgument(
            "m and n must be positive".into(),
        ));
    }
    if n_r < 64 {
        return Err(HopfError::InvalidArgument(format!(
            "n_r must be >= 64, got {n_r}"
        )));
    }
    let (mf, nf) = (T::from_u32(m).unwrap(), T::from_u32(n).unwrap());
    let grid = nodes(T::FRAC_PI_2(), n_r);
    let avg = inverse_weights(&grid, amn_inv_weight(mf, nf));
    let one = T::one();
    let u = constant_flux(&avg, one, -one);
    let h = grid[n_r] / T::from_usize_lossy(n_r);
    let energy = reduced_energy(T::lit(0.125), h, &u, &avg);
    let values = u.iter().map(|&x| x.max(-one).min(one).acos()).collect();
    let mut p = ProfileSolution {
        domain: ProfileDomain::Radial,
        grid,
        values,
        radius: None,
        energy,
        boundary: Vec::new(),
    };
    p.record_boundary();
    Ok(p)
}

/// Topological lower bound: `|Q|` in three dimensions, `Q²` in two.
pub fn bound_value<T: Real>(kind: ManifoldKind, q: i64) -> T {
    let q = T::from_i64(q.abs()).unwrap();
    if kind.ndim() == 3 {
        q
    } else {
        q * q
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    /// Minimum of `∫ u'² W` between ±1 from the exact integral of `1/W`.
    fn amn_closed(m: f64, n: f64) -> f64 {
        if m == n {
            return m * n;
        }
        // ∫₀^{π/2} sin r cos r/(m² sin² r + n² cos² r) dr = ln(m²/n²)/(2(m² − n²))
        let i = (m * m / (n * n)).ln() / (2.0 * (m * m - n * n));
        0.125 * 4.0 / i
    }

    fn vav_closed(l: f64) -> f64 {
        // ∫₀^{π/2} L² sin θ/(1 + L² sin² θ) dθ = L asinh(L)/√(1 + L²), twice.
        let i = l * l.asinh() / (1.0 + l * l).sqrt();
        l / (4.0 * 2f64.sqrt()) * 8.0 / i
    }

    #[test]
    fn formula_values() {
        assert_eq!(amn_energy_formula::<f64>(3, 3), 9.0);
        let r = |m, n| amn_energy_formula::<f64>(m, n) / (m * n) as f64;
        assert!((r(2, 1) - 1.0820).abs() < 5e-5);
        assert!((r(3, 2) - 1.0276).abs() < 5e-5);
        assert!((r(4, 3) - 1.0139).abs() < 5e-5);
        assert!((r(3, 1) - 1.2137).abs() < 5e-5);
        assert_relative_eq!(
            amn_energy_formula::<f64>(3, 2),
            amn_closed(3.0, 2.0),
            max_relative = 1e-14
        );
    }

    proptest! {
        #[test]
        fn formula_symmetric_and_above_bound(m in 1u32..20, n in 1u32..20) {
            let a = amn_energy_formula::<f64>(m, n);
            let b = amn_energy_formula::<f64>(n, m);
            prop_assert!((a - b).abs() <= 1e-12 * a);
            let q = (m * n) as f64;
            if m == n {
                prop_assert_eq!(a, q);
            } else {
                prop_assert!(a > q);
            }
        }

        #[test]
        fn profile_energy_is_above_formula(m in 1u32..6, n in 1u32..6, cells in 64usize..400) {
            let p = amn_profile_minimize::<f64>(m, n, cells).unwrap();
            prop_assert!(p.energy >= amn_energy_formula::<f64>(m, n) * (1.0 - 1e-12));
        }

        #[test]
        fn vav_refinement_does_not_raise_energy(k in 32usize..200, l in 0.6f64..2.5) {
            let coarse = vav_minimize::<f64>(2 * k, Some(l)).unwrap().energy;
            let fine = vav_minimize::<f64>(4 * k, Some(l)).unwrap().energy;
            prop_assert!(fine <= coarse * (1.0 + 1e-14));
            prop_assert!(fine >= vav_closed(l) * (1.0 - 1e-12));
        }
    }

    #[test]
    fn profiles_converge_to_closed_forms() {
        for (m, n) in [(1, 1), (2, 1), (3, 2), (4, 3), (3, 1)] {
            let p = amn_profile_minimize::<f64>(m, n, 2000).unwrap();
            let want = amn_closed(m as f64, n as f64);
            assert!(
                (p.energy - want).abs() < 1e-4 * want,
                "({m},{n}): {} vs {want}",
                p.energy
            );
            assert_relative_eq!(
                amn_energy(&p, m, n).unwrap(),
                p.energy,
                max_relative = 1e-12
            );
            p.check_amn_boundary().unwrap();
        }
    }

    #[test]
    fn hopf_profile_is_linear() {
        let p = amn_profile_minimize::<f64>(1, 1, 2000).unwrap();
        for (&r, &a) in p.grid.iter().zip(&p.values) {
            assert!((a - 2.0 * r).abs() < 1e-4, "α({r}) = {a}");
        }
    }

    #[test]
    fn optimal_profile_beats_linear() {
        let lin = ProfileSolution::<f64>::linear(ProfileDomain::Radial, 500);
        let opt = amn_profile_minimize::<f64>(3, 2, 500).unwrap();
        assert!(amn_energy(&lin, 3, 2).unwrap() > opt.energy);
    }

    #[test]
    fn vav_linear_profile_closed_form() {
        // f = 2θ: ∫ 4 sin² 2θ (1/(L² sin θ) + sin θ) dθ = 32/(3L²) + 64/15.
        let l = 1.51;
        let p = ProfileSolution::<f64>::linear(ProfileDomain::Polar, 4000);
        let want = l / (4.0 * 2f64.sqrt()) * (32.0 / (3.0 * l * l) + 64.0 / 15.0);
        let got = vav_energy(&p, l).unwrap();
        assert!((got - want).abs() < 1e-5 * want, "{got} vs {want}");
        assert!(got > 2.134);
    }

    #[test]
    fn vav_optimum() {
        let p = vav_minimize::<f64>(2000, None).unwrap();
        let l = p.radius.unwrap();
        assert!((l - 1.51).abs() < 0.05, "L = {l}");
        assert!(
            (p.energy - 1.0670 * 2.0).abs() < 0.005 * 2.134,
            "E = {}",
            p.energy
        );
        p.check_vav_boundary().unwrap();
        assert_relative_eq!(vav_energy(&p, l).unwrap(), p.energy, max_relative = 1e-12);
        let at_one = vav_minimize::<f64>(2000, Some(1.0)).unwrap();
        assert!(at_one.energy > p.energy);
        let doubled = vav_minimize::<f64>(4000, None).unwrap();
        assert!((doubled.energy - p.energy).abs() < 1e-3 * p.energy);
    }

    #[test]
    fn boundary_violations() {
        let bad = ProfileSolution::<f64>::from_fn(ProfileDomain::Polar, 64, |t| t);
        assert!(matches!(
            vav_energy(&bad, 1.5),
            Err(HopfError::BoundaryViolation(_))
        ));
        let radial = ProfileSolution::<f64>::linear(ProfileDomain::Radial, 64);
        assert!(vav_energy(&radial, 1.5).is_err());
        assert!(vav_minimize::<f64>(32, None).is_err());
        assert!(amn_profile_minimize::<f64>(2, 1, 10).is_err());
    }

    #[test]
    fn interpolation() {
        let p = ProfileSolution::<f64>::linear(ProfileDomain::Radial, 64);
        assert_relative_eq!(p.eval(0.3), 0.6, max_relative = 1e-12);
        assert_relative_eq!(p.eval(FRAC_PI_2), PI, max_relative = 1e-12);
        assert_eq!(p.eval(-1.0), 0.0);
    }

    #[test]
    fn bounds() {
        assert_eq!(bound_value::<f64>(ManifoldKind::S3, 6), 6.0);
        assert_eq!(bound_value::<f64>(ManifoldKind::T2, 2), 4.0);
        assert_eq!(bound_value::<f64>(ManifoldKind::S2xS1, -2), 2.0);
    }
}
