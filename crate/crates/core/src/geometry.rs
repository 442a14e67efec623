//! Lattice discretizations of the supported manifolds.
//!
//! Every manifold is described by up to three coordinates with a diagonal
//! metric whose entries depend only on the first coordinate:
//!
//! | kind    | coordinates | metric                         | volume        |
//! |---------|-------------|--------------------------------|---------------|
//! | `S3`    | (r, s, t)   | dr² + cos²r ds² + sin²r dt²    | 2π²           |
//! | `T3`    | (x, y, z)   | flat, periods 2π·pᵢ            | (2π)³ Π pᵢ    |
//! | `S2xS1` | (θ, φ, χ)   | L²(dθ² + sin²θ dφ²) + dχ²      | 8π²L²         |
//! | `S2`    | (θ, φ)      | dθ² + sin²θ dφ²                | 4π            |
//! | `T2`    | (x, y)      | flat, periods 2π·pᵢ            | (2π)² Π pᵢ    |
//!
//! Periodic coordinates carry sites at `i·h`. The bounded first coordinate of
//! the curved manifolds is staggered, `(i + ½)·h`, so no site lies on a
//! coordinate singularity. The bounded ends are closed by half-width
//! plaquettes fanning into virtual sites on the degenerate circles (see
//! [`Closure`]).

use serde::{Deserialize, Serialize};

use crate::error::{HopfError, Result};
use crate::scalar::Real;

/// Smallest admissible number of sites along any axis.
pub const MIN_SITES: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ManifoldKind {
    #[serde(rename = "s3")]
    S3,
    #[serde(rename = "t3")]
    T3,
    #[serde(rename = "s2xs1")]
    S2xS1,
    #[serde(rename = "s2")]
    S2,
    #[serde(rename = "t2")]
    T2,
}

impl ManifoldKind {
    pub fn ndim(self) -> usize {
        match self {
            ManifoldKind::S3 | ManifoldKind::T3 | ManifoldKind::S2xS1 => 3,
            ManifoldKind::S2 | ManifoldKind::T2 => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ManifoldKind::S3 => "s3",
            ManifoldKind::T3 => "t3",
            ManifoldKind::S2xS1 => "s2xs1",
            ManifoldKind::S2 => "s2",
            ManifoldKind::T2 => "t2",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        match name.to_ascii_lowercase().as_str() {
            "s3" => Some(ManifoldKind::S3),
            "t3" => Some(ManifoldKind::T3),
            "s2xs1" | "s2s1" | "s2-s1" => Some(ManifoldKind::S2xS1),
            "s2" => Some(ManifoldKind::S2),
            "t2" => Some(ManifoldKind::T2),
            _ => None,
        }
    }

    pub fn is_torus(self) -> bool {
        matches!(self, ManifoldKind::T3 | ManifoldKind::T2)
    }

    /// Which axes wrap around. Axis 2 of a 2D manifold is a dummy of size 1.
    pub fn periodic(self) -> [bool; 3] {
        match self {
            ManifoldKind::T3 => [true, true, true],
            ManifoldKind::T2 => [true, true, false],
            ManifoldKind::S3 | ManifoldKind::S2xS1 => [false, true, true],
            ManifoldKind::S2 => [false, true, false],
        }
    }
}

impl std::fmt::Display for ManifoldKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Manifold and lattice resolution.
#[derive(Clone, Debug, PartialEq)]
pub struct ManifoldSpec<T> {
    pub kind: ManifoldKind,
    /// Sites per coordinate, `kind.ndim()` entries.
    pub dims: Vec<usize>,
    /// Radius `L` of the two-sphere factor; `S2xS1` only.
    pub radius: Option<T>,
    /// Period scale factors of a flat torus (period of axis `i` is `2π·periods[i]`).
    pub periods: Vec<T>,
}

impl<T: Real> ManifoldSpec<T> {
    /// Builds and validates a spec with unit periods and no radius.
    pub fn new(kind: ManifoldKind, dims: &[usize]) -> Result<Self> {
        let spec = ManifoldSpec {
            kind,
            dims: dims.to_vec(),
            radius: None,
            periods: if kind.is_torus() {
                vec![T::one(); kind.ndim()]
            } else {
                Vec::new()
            },
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Same number of sites along every axis.
    pub fn cubic(kind: ManifoldKind, n: usize) -> Result<Self> {
        Self::new(kind, &vec![n; kind.ndim()])
    }

    pub fn s2xs1(dims: &[usize], radius: T) -> Result<Self> {
        let spec = ManifoldSpec {
            kind: ManifoldKind::S2xS1,
            dims: dims.to_vec(),
            radius: Some(radius),
            periods: Vec::new(),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn torus(dims: &[usize], periods: &[T]) -> Result<Self> {
        let kind = match dims.len() {
            3 => ManifoldKind::T3,
            2 => ManifoldKind::T2,
            n => {
                return Err(HopfError::InvalidSpec(format!(
                    "a torus has 2 or 3 axes, not {n}"
                )))
            }
        };
        let spec = ManifoldSpec {
            kind,
            dims: dims.to_vec(),
            radius: None,
            periods: periods.to_vec(),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_periods(mut self, periods: &[T]) -> Result<Self> {
        self.periods = periods.to_vec();
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let nd = self.kind.ndim();
        if self.dims.len() != nd {
            return Err(HopfError::InvalidSpec(format!(
                "{} needs {nd} dims, got {}",
                self.kind,
                self.dims.len()
            )));
        }
        if let Some(&d) = self.dims.iter().find(|&&d| d < MIN_SITES) {
            return Err(HopfError::InvalidSpec(format!(
                "dims must all be >= {MIN_SITES}, got {d}"
            )));
        }
        match (self.kind, self.radius) {
            (ManifoldKind::S2xS1, None) => {
                return Err(HopfError::InvalidSpec(
                    "S2xS1 requires the sphere radius L".into(),
                ))
            }
            (ManifoldKind::S2xS1, Some(l)) if !(l > T::zero() && l.is_finite()) => {
                return Err(HopfError::InvalidSpec(format!(
                    "radius L must be positive, got {l}"
                )))
            }
            (ManifoldKind::S2xS1, Some(_)) => {}
            (_, Some(_)) => {
                return Err(HopfError::InvalidSpec(format!(
                    "radius L only applies to s2xs1, not {}",
                    self.kind
                )))
            }
            (_, None) => {}
        }
        if self.kind.is_torus() {
            if self.periods.len() != nd {
                return Err(HopfError::InvalidSpec(format!(
                    "{} needs {nd} periods, got {}",
                    self.kind,
                    self.periods.len()
                )));
            }
            if self
                .periods
                .iter()
                .any(|&p| !(p > T::zero() && p.is_finite()))
            {
                return Err(HopfError::InvalidSpec("periods must be positive".into()));
            }
        } else if !self.periods.is_empty() {
            return Err(HopfError::InvalidSpec(format!(
                "periods only apply to flat tori, not {}",
                self.kind
            )));
        }
        Ok(())
    }

    pub fn sites(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn lattice(&self) -> Lattice {
        Lattice::new(self.kind, &self.dims)
    }

    /// Same manifold and resolution; radius and periods may differ.
    pub fn same_lattice(&self, other: &Self) -> bool {
        self.kind == other.kind && self.dims == other.dims
    }
}

/// Plaquette orientations `(μ, ν)` with `μ < ν`.
pub const ORIENTATIONS_3D: [(usize, usize); 3] = [(0, 1), (0, 2), (1, 2)];
pub const ORIENTATIONS_2D: [(usize, usize); 1] = [(0, 1)];

/// Index bookkeeping for a row-major lattice (last axis fastest).
///
/// Two-dimensional lattices are stored with a dummy third axis of size 1.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Lattice {
    pub dims: [usize; 3],
    pub periodic: [bool; 3],
    pub ndim: usize,
}

impl Lattice {
    pub fn new(kind: ManifoldKind, dims: &[usize]) -> Self {
        let mut d = [1usize; 3];
        for (slot, &n) in d.iter_mut().zip(dims) {
            *slot = n;
        }
        Lattice {
            dims: d,
            periodic: kind.periodic(),
            ndim: kind.ndim(),
        }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, i: [usize; 3]) -> usize {
        (i[0] * self.dims[1] + i[1]) * self.dims[2] + i[2]
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let i2 = idx % self.dims[2];
        let rest = idx / self.dims[2];
        [rest / self.dims[1], rest % self.dims[1], i2]
    }

    /// Neighbour one step forward along `axis`; `None` past a bounded end.
    #[inline]
    pub fn forward(&self, mut i: [usize; 3], axis: usize) -> Option<[usize; 3]> {
        i[axis] += 1;
        if i[axis] == self.dims[axis] {
            if self.periodic[axis] {
                i[axis] = 0;
            } else {
                return None;
            }
        }
        Some(i)
    }

    /// Neighbour one step backward along `axis`; `None` past a bounded end.
    #[inline]
    pub fn backward(&self, mut i: [usize; 3], axis: usize) -> Option<[usize; 3]> {
        if i[axis] == 0 {
            if self.periodic[axis] {
                i[axis] = self.dims[axis] - 1;
            } else {
                return None;
            }
        } else {
            i[axis] -= 1;
        }
        Some(i)
    }

    pub fn orientations(&self) -> &'static [(usize, usize)] {
        if self.ndim == 3 {
            &ORIENTATIONS_3D
        } else {
            &ORIENTATIONS_2D
        }
    }

    /// Number of base positions along `axis` that have a forward link.
    #[inline]
    pub fn link_range(&self, axis: usize) -> usize {
        if self.periodic[axis] {
            self.dims[axis]
        } else {
            self.dims[axis] - 1
        }
    }

    /// Visits every plaquette of orientation `(mu, nu)` in lattice order.
    ///
    /// The callback gets the first-axis index of the base site and the four
    /// corner site indices in the order base, +μ, +μ+ν, +ν.
    pub fn for_each_plaquette<F>(&self, (mu, nu): (usize, usize), mut f: F)
    where
        F: FnMut(usize, [usize; 4]),
    {
        for i0 in 0..self.dims[0] {
            self.for_each_plaquette_in_slab((mu, nu), i0, &mut f);
        }
    }

    /// Like [`Lattice::for_each_plaquette`] restricted to base sites with
    /// first index `i0`.
    pub fn for_each_plaquette_in_slab<F>(&self, (mu, nu): (usize, usize), i0: usize, f: &mut F)
    where
        F: FnMut(usize, [usize; 4]),
    {
        let range = [
            self.link_range_for(0, mu, nu),
            self.link_range_for(1, mu, nu),
            self.link_range_for(2, mu, nu),
        ];
        if i0 >= range[0] {
            return;
        }
        for i1 in 0..range[1] {
            for i2 in 0..range[2] {
                let base = [i0, i1, i2];
                let a = self.forward(base, mu).expect("in range");
                let b = self.forward(a, nu).expect("in range");
                let c = self.forward(base, nu).expect("in range");
                f(
                    i0,
                    [
                        self.index(base),
                        self.index(a),
                        self.index(b),
                        self.index(c),
                    ],
                );
            }
        }
    }

    #[inline]
    fn link_range_for(&self, axis: usize, mu: usize, nu: usize) -> usize {
        if axis == mu || axis == nu {
            self.link_range(axis)
        } else {
            self.dims[axis]
        }
    }

    pub fn plaquette_count(&self, (mu, nu): (usize, usize)) -> usize {
        (0..3).map(|a| self.link_range_for(a, mu, nu)).product()
    }

    /// Visits every link `(from, to)` along `axis` in lattice order, with the
    /// first-axis index of `from`.
    pub fn for_each_link<F>(&self, axis: usize, mut f: F)
    where
        F: FnMut(usize, usize, usize),
    {
        for idx in 0..self.len() {
            let i = self.coords(idx);
            if let Some(j) = self.forward(i, axis) {
                f(i[0], idx, self.index(j));
            }
        }
    }
}

/// Axis whose coordinate is constant on plaquettes of the given orientation
/// (the "direction" the corresponding flux points in).
#[inline]
pub fn complementary_axis((mu, nu): (usize, usize)) -> usize {
    3 - mu - nu
}

/// Discretized manifold: spacings, metric weights and normalization.
#[derive(Clone, Debug)]
pub struct LatticeGeometry<T> {
    pub spec: ManifoldSpec<T>,
    pub lattice: Lattice,
    /// Coordinate spacing per axis (1 for the dummy axis of 2D manifolds).
    pub spacing: [T; 3],
    /// Coordinate of the first site along each axis.
    pub origin: [T; 3],
    pub kappa: T,
    /// Eigenvalue entering `kappa`; `None` for 2D manifolds.
    pub lambda: Option<T>,
    pub volume: T,
    /// Period of each periodic axis in coordinate units.
    pub coordinate_period: [T; 3],
    site_volume: Vec<T>,
    plaquette_weight: Vec<Vec<T>>,
    plaquette_volume: Vec<Vec<T>>,
    link_weight: Vec<Vec<T>>,
    closure: Closure<T>,
}

/// Half-width plaquette between the outermost row of a bounded axis and a
/// virtual site on the degenerate circle beyond it.
#[derive(Clone, Debug)]
pub struct BoundaryPlaquette<T> {
    /// Corners in the order base, +μ, +μ+ν, +ν. Indices at or above the
    /// site count refer to virtual sites.
    pub corners: [usize; 4],
    /// Index into [`Lattice::orientations`].
    pub orientation: usize,
    /// Coordinate index of the base along each axis (virtual bases use the
    /// lower boundary value of the bounded axis).
    pub base: [usize; 3],
    pub weight: T,
    pub volume: T,
}

/// Closure of the lattice at the degenerate ends of the bounded axis.
///
/// The bounded coordinate ends on circles where another coordinate
/// degenerates (on S³ the t-circle at r = 0 and the s-circle at r = π/2;
/// on S² and S²×S¹ the φ-circle at both poles). Each such end gets one
/// virtual site per value of the remaining coordinate, whose vector is the
/// normalized mean of the outermost row over the degenerate coordinate.
#[derive(Clone, Debug, Default)]
pub struct Closure<T> {
    /// Real sites averaged into each virtual site.
    pub rings: Vec<Vec<usize>>,
    pub plaquettes: Vec<BoundaryPlaquette<T>>,
}

impl<T: Real> LatticeGeometry<T> {
    pub fn new(spec: &ManifoldSpec<T>) -> Result<Self> {
        build_geometry(spec)
    }

    /// Coordinate of site `i` along `axis`.
    #[inline]
    pub fn coordinate(&self, axis: usize, i: usize) -> T {
        self.origin[axis] + T::from_usize_lossy(i) * self.spacing[axis]
    }

    /// Diagonal metric `g_μμ` at first coordinate `x0`.
    pub fn metric(&self, x0: T) -> [T; 3] {
        let one = T::one();
        match self.spec.kind {
            ManifoldKind::S3 => [one, x0.cos().powi(2), x0.sin().powi(2)],
            ManifoldKind::S2xS1 => {
                let l2 = self.radius().powi(2);
                [l2, l2 * x0.sin().powi(2), one]
            }
            ManifoldKind::S2 => [one, x0.sin().powi(2), one],
            ManifoldKind::T3 | ManifoldKind::T2 => [one; 3],
        }
    }

    /// Diagonal inverse metric `g^μμ` at first coordinate `x0`.
    pub fn inverse_metric(&self, x0: T) -> [T; 3] {
        let g = self.metric(x0);
        [g[0].recip(), g[1].recip(), g[2].recip()]
    }

    /// `√g` at first coordinate `x0` (over the real axes only).
    pub fn sqrt_det(&self, x0: T) -> T {
        let g = self.metric(x0);
        let mut det = T::one();
        for gi in g.iter().take(self.lattice.ndim) {
            det *= *gi;
        }
        det.sqrt()
    }

    fn radius(&self) -> T {
        self.spec.radius.unwrap_or_else(T::one)
    }

    /// Coordinate cell measure `Π h_a` over the real axes.
    pub fn cell_measure(&self) -> T {
        self.spacing
            .iter()
            .take(self.lattice.ndim)
            .fold(T::one(), |acc, &h| acc * h)
    }

    /// Volume weight `√g·Π h` of the cell around site `idx`.
    #[inline]
    pub fn volume_weight(&self, idx: usize) -> T {
        self.site_volume[self.lattice.coords(idx)[0]]
    }

    /// Volume weight for sites with first index `i0`.
    #[inline]
    pub fn volume_weight_row(&self, i0: usize) -> T {
        self.site_volume[i0]
    }

    /// Energy weight `c` of a plaquette: its E₄ contribution is `c·A²` for
    /// image area `A`. `o` indexes [`Lattice::orientations`].
    #[inline]
    pub fn plaquette_weight(&self, o: usize, i0: usize) -> T {
        self.plaquette_weight[o][i0]
    }

    /// Volume `√g·Π h` attributed to a plaquette (metric at its centre).
    #[inline]
    pub fn plaquette_volume(&self, o: usize, i0: usize) -> T {
        self.plaquette_volume[o][i0]
    }

    /// E₂ weight of a link along `axis` whose lower site has first index `i0`.
    #[inline]
    pub fn link_weight(&self, axis: usize, i0: usize) -> T {
        self.link_weight[axis][i0]
    }

    /// Boundary closure; empty on tori.
    pub fn closure(&self) -> &Closure<T> {
        &self.closure
    }

    pub fn total_site_volume(&self) -> T {
        let per_row = T::from_usize_lossy(self.lattice.dims[1] * self.lattice.dims[2]);
        self.site_volume
            .iter()
            .fold(T::zero(), |acc, &w| acc + w * per_row)
    }
}

fn lit<T: Real>(x: f64) -> T {
    T::lit(x)
}

/// Analytic volume of the (continuum) manifold.
pub fn manifold_volume<T: Real>(spec: &ManifoldSpec<T>) -> T {
    let pi = T::PI();
    let two_pi = T::two_pi();
    match spec.kind {
        ManifoldKind::S3 => lit::<T>(2.0) * pi * pi,
        ManifoldKind::T3 => spec.periods.iter().fold(two_pi.powi(3), |acc, &p| acc * p),
        ManifoldKind::S2xS1 => {
            let l = spec.radius.unwrap_or_else(T::one);
            lit::<T>(8.0) * pi * pi * l * l
        }
        ManifoldKind::S2 => lit::<T>(4.0) * pi,
        ManifoldKind::T2 => spec.periods.iter().fold(two_pi.powi(2), |acc, &p| acc * p),
    }
}

/// Smallest positive eigenvalue of the Hodge Laplacian on divergence-free
/// 1-forms; `None` for 2D manifolds where the bound does not use it.
pub fn hodge_eigenvalue<T: Real>(spec: &ManifoldSpec<T>) -> Option<T> {
    match spec.kind {
        ManifoldKind::S3 => Some(lit(4.0)),
        ManifoldKind::T3 => {
            let pmax = spec.periods.iter().cloned().fold(T::zero(), T::max);
            Some(pmax.powi(2).recip())
        }
        ManifoldKind::S2xS1 => {
            let l = spec.radius.unwrap_or_else(T::one);
            Some(lit::<T>(2.0) / (l * l))
        }
        ManifoldKind::S2 | ManifoldKind::T2 => None,
    }
}

/// Normalization making the energy bound read `E ≥ |Q|` (3D) or `E ≥ Q²` (2D).
///
/// 3D: `κ = 1/(32π²√λ)`. 2D: the prefactor `V/(32π²)`.
pub fn normalization_kappa<T: Real>(spec: &ManifoldSpec<T>) -> Result<T> {
    spec.validate()?;
    let pi2 = T::PI() * T::PI();
    let k = match hodge_eigenvalue(spec) {
        Some(lambda) => (lit::<T>(32.0) * pi2 * lambda.sqrt()).recip(),
        None => manifold_volume(spec) / (lit::<T>(32.0) * pi2),
    };
    Ok(k)
}

/// Builds the lattice geometry for `spec`.
pub fn build_geometry<T: Real>(spec: &ManifoldSpec<T>) -> Result<LatticeGeometry<T>> {
    spec.validate()?;
    let lattice = spec.lattice();
    let nd = lattice.ndim;
    let pi = T::PI();
    let two_pi = T::two_pi();
    let half = lit::<T>(0.5);

    let mut spacing = [T::one(); 3];
    let mut origin = [T::zero(); 3];
    let mut period = [T::zero(); 3];
    for axis in 0..nd {
        let n = T::from_usize_lossy(spec.dims[axis]);
        let extent = match (spec.kind, axis) {
            (ManifoldKind::S3, 0) => pi * half,
            (ManifoldKind::S2xS1, 0) | (ManifoldKind::S2, 0) => pi,
            (ManifoldKind::T3, a) | (ManifoldKind::T2, a) => two_pi * spec.periods[a],
            _ => two_pi,
        };
        spacing[axis] = extent / n;
        if lattice.periodic[axis] {
            period[axis] = extent;
        } else {
            origin[axis] = spacing[axis] * half;
        }
    }

    let mut geom = LatticeGeometry {
        spec: spec.clone(),
        lattice: lattice.clone(),
        spacing,
        origin,
        kappa: normalization_kappa(spec)?,
        lambda: hodge_eigenvalue(spec),
        volume: manifold_volume(spec),
        coordinate_period: period,
        site_volume: Vec::new(),
        plaquette_weight: Vec::new(),
        plaquette_volume: Vec::new(),
        link_weight: Vec::new(),
        closure: Closure::default(),
    };

    let n0 = lattice.dims[0];
    let measure = geom.cell_measure();
    geom.site_volume = (0..n0)
        .map(|i0| geom.sqrt_det(geom.coordinate(0, i0)) * measure)
        .collect();

    let two = lit::<T>(2.0);
    let mut pw = Vec::new();
    let mut pv = Vec::new();
    for &(mu, nu) in lattice.orientations() {
        let mut weights = Vec::with_capacity(n0);
        let mut vols = Vec::with_capacity(n0);
        for i0 in 0..n0 {
            let mut x0 = geom.coordinate(0, i0);
            if mu == 0 {
                x0 += spacing[0] * half;
            }
            let ginv = geom.inverse_metric(x0);
            let vol = geom.sqrt_det(x0) * measure;
            let hh = spacing[mu] * spacing[nu];
            weights.push(two * geom.kappa * ginv[mu] * ginv[nu] * vol / (hh * hh));
            vols.push(vol);
        }
        pw.push(weights);
        pv.push(vols);
    }
    geom.plaquette_weight = pw;
    geom.plaquette_volume = pv;

    let e2_norm = (lit::<T>(32.0) * pi * pi).recip();
    geom.link_weight = (0..nd)
        .map(|axis| {
            (0..n0)
                .map(|i0| {
                    let mut x0 = geom.coordinate(0, i0);
                    if axis == 0 {
                        x0 += spacing[0] * half;
                    }
                    let ginv = geom.inverse_metric(x0);
                    e2_norm * ginv[axis] * geom.sqrt_det(x0) * measure
                        / (spacing[axis] * spacing[axis])
                })
                .collect()
        })
        .collect();

    geom.closure = build_closure(&geom);
    Ok(geom)
}

/// Degenerate axis at the lower and upper end of the bounded axis.
fn degenerate_axes(kind: ManifoldKind) -> Option<(usize, usize)> {
    match kind {
        ManifoldKind::S3 => Some((2, 1)),
        ManifoldKind::S2xS1 | ManifoldKind::S2 => Some((1, 1)),
        ManifoldKind::T3 | ManifoldKind::T2 => None,
    }
}

fn build_closure<T: Real>(geom: &LatticeGeometry<T>) -> Closure<T> {
    let Some((lower_d, upper_d)) = degenerate_axes(geom.spec.kind) else {
        return Closure::default();
    };
    let lat = &geom.lattice;
    let n0 = lat.dims[0];
    let half = lit::<T>(0.5);
    let quarter = lit::<T>(0.25);
    let measure = geom.cell_measure() * half;
    let mut closure = Closure::default();

    for (end, d) in [(0usize, lower_d), (n0 - 1, upper_d)] {
        let lower = end == 0;
        // Virtual sites are labelled by the coordinate along the axis that
        // survives on the degenerate circle (none on S²).
        let keep = if lat.ndim == 3 { Some(3 - d) } else { None };
        let first_virtual = lat.len() + closure.rings.len();
        let count = keep.map_or(1, |e| lat.dims[e]);
        for k in 0..count {
            let mut ring = Vec::new();
            for j in 0..lat.dims[d] {
                let mut i = [end, 0, 0];
                i[d] = j;
                if let Some(e) = keep {
                    i[e] = k;
                }
                ring.push(lat.index(i));
            }
            closure.rings.push(ring);
        }
        let virt = |i: [usize; 3]| first_virtual + keep.map_or(0, |e| i[e]);

        let x0 = if lower {
            geom.origin[0] * half
        } else {
            geom.coordinate(0, end) + geom.spacing[0] * quarter
        };
        let ginv = geom.inverse_metric(x0);
        let vol = geom.sqrt_det(x0) * measure;
        for (o, &(mu, nu)) in lat.orientations().iter().enumerate() {
            if mu != 0 {
                continue;
            }
            let hh = geom.spacing[0] * half * geom.spacing[nu];
            let weight = lit::<T>(2.0) * geom.kappa * ginv[mu] * ginv[nu] * vol / (hh * hh);
            for i1 in 0..lat.dims[1] {
                for i2 in 0..lat.dims[2] {
                    let i = [end, i1, i2];
                    let Some(j) = lat.forward(i, nu) else {
                        continue;
                    };
                    let (s0, s1) = (lat.index(i), lat.index(j));
                    let (v0, v1) = (virt(i), virt(j));
                    let corners = if lower {
                        [v0, s0, s1, v1]
                    } else {
                        [s0, v0, v1, s1]
                    };
                    closure.plaquettes.push(BoundaryPlaquette {
                        corners,
                        orientation: o,
                        base: i,
                        weight,
                        volume: vol,
                    });
                }
            }
        }
    }
    closure
}
