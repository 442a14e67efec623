//! Hopf charge on T³ from a lattice vector potential.
//!
//! Plaquette areas form a closed 2-cochain `F`. Writing `a_μ[i]` for the
//! link from site `i` along `μ`, `(da)_{μν} = D_μ a_ν − D_ν a_μ` with forward
//! differences `D`, i.e. `B̂ = d × â` with `d_j = e^{ik_j} − 1`. The Coulomb
//! gauge solution is `â = −(d̄ × B̂)/|d|²`. The charge pairs each link with
//! the dual plaquette after shifting it spectrally by half a cell per axis:
//! `Q = −(1/16π²) Σ a·B`. The sign matches the preimage linking number,
//! which is normalized so that the standard Hopf map of S³ has `Q = +1`.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::{net_flux_with, ChargeReport};
use crate::energy::quad_area;
use crate::error::{HopfError, Result};
use crate::field::Field;
use crate::geometry::{build_geometry, ManifoldKind};
use crate::scalar::Real;

/// Offset from the midpoint of link `μ` to the centre of its dual plaquette.
const SHIFT: [[f64; 3]; 3] = [[-0.5, 0.5, 0.5], [0.5, -0.5, 0.5], [0.5, 0.5, -0.5]];

/// In-place unnormalized forward DFT over a row-major 3D array.
fn fft3<T: Real>(buf: &mut [Complex<T>], dims: [usize; 3], planner: &mut FftPlanner<T>) {
    let strides = [dims[1] * dims[2], dims[2], 1];
    let mut line = Vec::new();
    for axis in 0..3 {
        let n = dims[axis];
        let fft = planner.plan_fft_forward(n);
        let s = strides[axis];
        let others: Vec<usize> = (0..3).filter(|&a| a != axis).collect();
        for i in 0..dims[others[0]] {
            for j in 0..dims[others[1]] {
                let start = i * strides[others[0]] + j * strides[others[1]];
                line.clear();
                line.extend((0..n).map(|k| buf[start + k * s]));
                fft.process(&mut line);
                for (k, v) in line.iter().enumerate() {
                    buf[start + k * s] = *v;
                }
            }
        }
    }
}

/// Hopf charge of a T³ field with vanishing net fluxes.
///
/// Fails with [`HopfError::AlgebraicallyEssential`] when a flux is nonzero,
/// since the charge is then only defined modulo twice the flux.
pub fn hopf_charge_t3<T: Real>(field: &Field<T>) -> Result<ChargeReport<T>> {
    hopf_charge_t3_checked(field).map(|(r, _)| r)
}

/// As [`hopf_charge_t3`], also returning the worst per-mode relative error
/// of `d × â` against `B̂`.
pub fn hopf_charge_t3_checked<T: Real>(field: &Field<T>) -> Result<(ChargeReport<T>, T)> {
    if field.spec.kind != ManifoldKind::T3 {
        return Err(HopfError::WrongManifold {
            expected: "t3",
            got: field.spec.kind.name(),
        });
    }
    let geom = build_geometry(&field.spec)?;
    let mut fluxes = Vec::with_capacity(3);
    for axis in 0..3 {
        let f = net_flux_with(field, &geom, axis)?;
        if f != 0 {
            return Err(HopfError::AlgebraicallyEssential { axis, flux: f });
        }
        fluxes.push(f);
    }

    let lat = &geom.lattice;
    let dims = lat.dims;
    let n = lat.len();
    let data = &field.data;
    // B_x = F_yz, B_y = −F_xz, B_z = F_xy, each stored at the plaquette base.
    let mut b: Vec<Vec<Complex<T>>> = vec![vec![Complex::default(); n]; 3];
    for &(mu, nu) in lat.orientations() {
        let comp = 3 - mu - nu;
        let sign = if comp == 1 { -T::one() } else { T::one() };
        let mut bad = None;
        lat.for_each_plaquette((mu, nu), |_, c| {
            match quad_area(&data[c[0]], &data[c[1]], &data[c[2]], &data[c[3]]) {
                Some(a) => b[comp][c[0]] = Complex::new(sign * a, T::zero()),
                None => bad = Some(c[0]),
            }
        });
        if let Some(site) = bad {
            return Err(HopfError::IllConditionedPlaquette { site });
        }
    }
    let mut planner = FftPlanner::new();
    for comp in b.iter_mut() {
        fft3(comp, dims, &mut planner);
    }

    let two_pi = T::two_pi();
    let wave =
        |axis: usize, m: usize| two_pi * T::from_usize_lossy(m) / T::from_usize_lossy(dims[axis]);
    let mut sum = T::zero();
    let mut worst = T::zero();
    let mut b_max = T::zero();
    for comp in &b {
        for v in comp {
            b_max = b_max.max(v.norm());
        }
    }
    let tiny = T::epsilon() * T::lit(16.0) * (b_max + T::one());
    for idx in 0..n {
        let m = lat.coords(idx);
        if m == [0, 0, 0] {
            continue;
        }
        let k = [wave(0, m[0]), wave(1, m[1]), wave(2, m[2])];
        let d: [Complex<T>; 3] =
            std::array::from_fn(|j| Complex::new(k[j].cos() - T::one(), k[j].sin()));
        let d2: T = d.iter().map(|z| z.norm_sqr()).sum();
        let bh = [b[0][idx], b[1][idx], b[2][idx]];
        let dc = [d[0].conj(), d[1].conj(), d[2].conj()];
        let cr = cross_c(&dc, &bh);
        let a: [Complex<T>; 3] = std::array::from_fn(|j| -cr[j] / d2);

        let rec = cross_c(&d, &a);
        let err = (0..3)
            .map(|j| (rec[j] - bh[j]).norm())
            .fold(T::zero(), T::max);
        let scale = (0..3).map(|j| bh[j].norm()).fold(T::zero(), T::max);
        if scale > tiny {
            worst = worst.max(err / scale);
        }

        // Half-cell shifts are not periodic in k, so they use the signed
        // frequency; at Nyquist only the real part of the shift survives.
        let signed: [T; 3] = std::array::from_fn(|j| {
            if 2 * m[j] > dims[j] {
                k[j] - two_pi
            } else {
                k[j]
            }
        });
        for mu in 0..3 {
            let mut phase = Complex::new(T::one(), T::zero());
            for j in 0..3 {
                let arg = signed[j] * T::lit(SHIFT[mu][j]);
                phase = if 2 * m[j] == dims[j] {
                    phase * arg.cos()
                } else {
                    phase * Complex::new(arg.cos(), arg.sin())
                };
            }
            sum += (a[mu] * phase * bh[mu].conj()).re;
        }
    }
    let q = -sum / (T::from_usize_lossy(n) * T::lit(16.0) * T::PI() * T::PI());
    Ok((ChargeReport::new(q, fluxes), worst))
}

fn cross_c<T: Real>(a: &[Complex<T>; 3], b: &[Complex<T>; 3]) -> [Complex<T>; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}
