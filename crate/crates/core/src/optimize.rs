//! Nonlinear conjugate gradient on the product of unit spheres.
//!
//! Iterates move every site along a tangent direction and renormalize.
//! The quadratic regularizer `β·E₂` is phased out over a fixed schedule,
//! and the last stage always runs at `β = 0`.

use serde::Serialize;

use crate::energy::{energy_report, evaluate, objective, EnergyReport};
use crate::error::{HopfError, Result};
use crate::field::{continuity_check, Field};
use crate::geometry::{LatticeGeometry, ManifoldSpec};
use crate::scalar::{dot, normalized, Real, Vec3};

#[derive(Clone, Debug, Serialize)]
pub struct RelaxConfig<T> {
    pub beta0: T,
    pub beta_decay: T,
    /// Number of stages including the final `β = 0` one.
    pub beta_stages: usize,
    /// Stop a stage once the largest per-site tangent gradient is below this.
    pub grad_tol: T,
    /// Iteration cap of the final stage.
    pub max_iters: usize,
    /// Iteration cap of each regularized stage.
    pub stage_iters: usize,
    /// Largest admissible angle between neighbouring vectors.
    pub discontinuity_threshold: T,
    /// Iterations between continuity checks.
    pub check_every: usize,
}

impl<T: Real> Default for RelaxConfig<T> {
    fn default() -> Self {
        RelaxConfig {
            beta0: T::lit(0.5),
            beta_decay: T::lit(0.7),
            beta_stages: 10,
            grad_tol: T::lit(1e-8),
            max_iters: 5000,
            stage_iters: 200,
            discontinuity_threshold: T::FRAC_PI_2(),
            check_every: 100,
        }
    }
}

impl<T: Real> RelaxConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(HopfError::InvalidArgument(msg.into()));
        if !(self.beta0 >= T::zero()) {
            return bad("beta0 must be >= 0");
        }
        if !(self.beta_decay > T::zero() && self.beta_decay < T::one()) {
            return bad("beta_decay must lie in (0, 1)");
        }
        if self.beta_stages == 0 {
            return bad("beta_stages must be >= 1");
        }
        if !(self.grad_tol > T::zero()) {
            return bad("grad_tol must be > 0");
        }
        if !(self.discontinuity_threshold > T::zero()) {
            return bad("discontinuity_threshold must be > 0");
        }
        if self.check_every == 0 {
            return bad("check_every must be >= 1");
        }
        Ok(())
    }

    /// `β₀·decayᵏ` for every stage but the last, which is 0.
    pub fn betas(&self) -> Vec<T> {
        let mut b: Vec<T> = (0..self.beta_stages.saturating_sub(1))
            .map(|k| self.beta0 * self.beta_decay.powi(k as i32))
            .collect();
        b.push(T::zero());
        b
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct TraceRow<T> {
    pub stage: usize,
    pub iteration: usize,
    pub beta: T,
    pub e4: T,
    pub e2: T,
    pub grad_norm: T,
}

impl<T: Copy> TraceRow<T> {
    pub fn map<U>(&self, f: impl Fn(T) -> U) -> TraceRow<U> {
        TraceRow {
            stage: self.stage,
            iteration: self.iteration,
            beta: f(self.beta),
            e4: f(self.e4),
            e2: f(self.e2),
            grad_norm: f(self.grad_norm),
        }
    }
}

#[derive(Clone, Debug)]
pub struct RelaxResult<T> {
    pub field: Field<T>,
    pub trace: Vec<TraceRow<T>>,
    /// The final stage reached the gradient tolerance.
    pub converged: bool,
    pub discontinuous: bool,
    /// Energy of the returned field at `β = 0`.
    pub report: EnergyReport<T>,
    pub iterations: usize,
}

/// `normalize(φ + t·d)` at every site.
pub fn retract<T: Real>(data: &[Vec3<T>], dir: &[Vec3<T>], t: T) -> Vec<Vec3<T>> {
    data.iter()
        .zip(dir)
        .map(|(v, d)| {
            let w = [v[0] + t * d[0], v[1] + t * d[1], v[2] + t * d[2]];
            normalized(&w).unwrap_or(*v)
        })
        .collect()
}

fn inner<T: Real>(a: &[Vec3<T>], b: &[Vec3<T>]) -> T {
    a.iter().zip(b).map(|(x, y)| dot(x, y)).sum()
}

fn max_norm<T: Real>(a: &[Vec3<T>]) -> T {
    a.iter().map(|x| dot(x, x)).fold(T::zero(), T::max).sqrt()
}

/// Armijo constant.
const C1: f64 = 1e-4;
const MAX_TRIALS: usize = 40;
/// Largest rotation of any site in a single accepted step, in radians.
const MAX_ANGLE: f64 = 0.25;

/// Outcome of a line search: accepted step, new point and its objective.
pub struct Step<T> {
    pub t: T,
    pub data: Vec<Vec3<T>>,
    pub value: T,
}

/// Backtracking Armijo search from a trial step `t0`, with quadratic
/// interpolation on failure and doubling while the first trial keeps
/// decreasing the objective. `None` if no step gives sufficient decrease.
pub fn line_search_from<T: Real>(
    data: &[Vec3<T>],
    dir: &[Vec3<T>],
    geom: &LatticeGeometry<T>,
    beta: T,
    f0: T,
    slope: T,
    t0: T,
) -> Option<Step<T>> {
    if !(slope < T::zero()) || !(t0 > T::zero()) {
        return None;
    }
    let c1 = T::lit(C1);
    let eval = |t: T| -> (Vec<Vec3<T>>, T) {
        let x = retract(data, dir, t);
        let f = objective(&x, geom, beta).unwrap_or_else(|_| T::infinity());
        (x, f)
    };
    // Trust region: no site turns by more than MAX_ANGLE in one step.
    let t_max = T::lit(MAX_ANGLE) / max_norm(dir);
    let mut t = t0.min(t_max);
    for trial in 0..MAX_TRIALS {
        let (x, f) = eval(t);
        if f.is_finite() && f <= f0 + c1 * t * slope {
            let mut best = Step {
                t,
                data: x,
                value: f,
            };
            if trial == 0 {
                // Expand while it pays.
                for _ in 0..8 {
                    let t2 = best.t + best.t;
                    if t2 > t_max {
                        break;
                    }
                    let (x2, f2) = eval(t2);
                    if f2.is_finite() && f2 < best.value && f2 <= f0 + c1 * t2 * slope {
                        best = Step {
                            t: t2,
                            data: x2,
                            value: f2,
                        };
                    } else {
                        break;
                    }
                }
            }
            return Some(best);
        }
        let next = if f.is_finite() {
            let curv = f - f0 - slope * t;
            if curv > T::zero() {
                -slope * t * t / (T::lit(2.0) * curv)
            } else {
                t * T::lit(0.5)
            }
        } else {
            t * T::lit(0.25)
        };
        t = next.max(t * T::lit(0.1)).min(t * T::lit(0.5));
    }
    None
}

/// Step size along `direction` satisfying sufficient decrease of
/// `E₄ + β·E₂`, or 0 when none exists (zero or ascent direction).
pub fn line_search<T: Real>(
    field: &Field<T>,
    direction: &[Vec3<T>],
    geom: &LatticeGeometry<T>,
    beta: T,
) -> Result<T> {
    if direction.len() != field.len() {
        return Err(HopfError::LatticeMismatch);
    }
    let ev = evaluate(&field.data, geom, beta)?;
    let slope = inner(&ev.grad, direction);
    let dmax = max_norm(direction);
    if dmax == T::zero() {
        return Ok(T::zero());
    }
    let t0 = T::lit(0.1) / dmax;
    let f0 = ev.e4 + beta * ev.e2;
    Ok(
        line_search_from(&field.data, direction, geom, beta, f0, slope, t0)
            .map_or(T::zero(), |s| s.t),
    )
}

enum StageEnd {
    Converged,
    Exhausted,
    Stalled,
    Discontinuous,
}

struct Stage<'a, T: Real> {
    geom: &'a LatticeGeometry<T>,
    config: &'a RelaxConfig<T>,
    trace: &'a mut Vec<TraceRow<T>>,
    iterations: &'a mut usize,
}

impl<T: Real> Stage<'_, T> {
    fn run(
        &mut self,
        data: &mut Vec<Vec3<T>>,
        spec: &ManifoldSpec<T>,
        stage: usize,
        beta: T,
        cap: usize,
    ) -> StageEnd {
        let geom = self.geom;
        let mut ev = match evaluate(data, geom, beta) {
            Ok(ev) => ev,
            Err(_) => return StageEnd::Discontinuous,
        };
        let mut g = std::mem::take(&mut ev.grad);
        let mut f = ev.e4 + beta * ev.e2;
        let mut dir: Vec<Vec3<T>> = g.iter().map(|x| [-x[0], -x[1], -x[2]]).collect();
        let mut gg = inner(&g, &g);
        let mut prev_t = T::zero();
        let mut prev_slope = T::zero();
        let mut restarted = true;
        for it in 0..=cap {
            let gmax = max_norm(&g);
            self.trace.push(TraceRow {
                stage,
                iteration: *self.iterations,
                beta,
                e4: ev.e4,
                e2: ev.e2,
                grad_norm: gmax,
            });
            if gmax < self.config.grad_tol {
                return StageEnd::Converged;
            }
            if it == cap {
                return StageEnd::Exhausted;
            }
            if it > 0 && it % self.config.check_every == 0 {
                let field = Field {
                    spec: spec.clone(),
                    data: std::mem::take(data),
                };
                let worst = continuity_check(&field);
                *data = field.data;
                if worst > self.config.discontinuity_threshold {
                    return StageEnd::Discontinuous;
                }
            }
            let mut slope = inner(&g, &dir);
            if !(slope < T::zero()) {
                dir = g.iter().map(|x| [-x[0], -x[1], -x[2]]).collect();
                slope = -gg;
                restarted = true;
            }
            let dmax = max_norm(&dir);
            let t0 = if prev_t > T::zero() && prev_slope < T::zero() {
                (prev_t * prev_slope / slope).min(T::lit(0.5) / dmax)
            } else {
                T::lit(0.05) / dmax
            };
            let step = match line_search_from(data, &dir, geom, beta, f, slope, t0) {
                Some(s) => s,
                None if restarted => return StageEnd::Stalled,
                None => {
                    // Retry along steepest descent before giving up.
                    dir = g.iter().map(|x| [-x[0], -x[1], -x[2]]).collect();
                    restarted = true;
                    prev_t = T::zero();
                    continue;
                }
            };
            *self.iterations += 1;
            prev_t = step.t;
            prev_slope = slope;
            *data = step.data;
            f = step.value;
            ev = match evaluate(data, geom, beta) {
                Ok(ev) => ev,
                Err(_) => return StageEnd::Discontinuous,
            };
            let g_new = std::mem::take(&mut ev.grad);
            // Carry the previous gradient and direction into the new tangent
            // spaces by projection.
            let mut num = T::zero();
            for ((gn, go), (d, v)) in g_new.iter().zip(&g).zip(dir.iter_mut().zip(data.iter())) {
                let c = dot(go, v);
                let go_t = [go[0] - c * v[0], go[1] - c * v[1], go[2] - c * v[2]];
                num += dot(gn, &[gn[0] - go_t[0], gn[1] - go_t[1], gn[2] - go_t[2]]);
                let c = dot(d, v);
                for k in 0..3 {
                    d[k] -= c * v[k];
                }
            }
            let pr = (num / gg).max(T::zero());
            for (d, gn) in dir.iter_mut().zip(&g_new) {
                for k in 0..3 {
                    d[k] = pr * d[k] - gn[k];
                }
            }
            restarted = pr == T::zero();
            g = g_new;
            gg = inner(&g, &g);
        }
        StageEnd::Exhausted
    }
}

/// Relaxes `field` through the β schedule of `config`.
///
/// An ill-conditioned plaquette or a link angle above the threshold ends
/// the run with `discontinuous` set; the last good field is returned.
pub fn relax<T: Real>(
    field: &Field<T>,
    geom: &LatticeGeometry<T>,
    config: &RelaxConfig<T>,
) -> Result<RelaxResult<T>> {
    config.validate()?;
    if !field.spec.same_lattice(&geom.spec) {
        return Err(HopfError::LatticeMismatch);
    }
    let mut data = field.data.clone();
    let mut trace = Vec::new();
    let mut iterations = 0usize;
    let betas = config.betas();
    let mut converged = false;
    let mut discontinuous = false;
    let last = betas.len() - 1;
    for (stage, &beta) in betas.iter().enumerate() {
        let cap = if stage == last {
            config.max_iters
        } else {
            config.stage_iters
        };
        let end = Stage {
            geom,
            config,
            trace: &mut trace,
            iterations: &mut iterations,
        }
        .run(&mut data, &field.spec, stage, beta, cap);
        match end {
            StageEnd::Discontinuous => {
                discontinuous = true;
                break;
            }
            StageEnd::Converged if stage == last => converged = true,
            StageEnd::Stalled => log::debug!("stage {stage} (β = {beta}) stalled"),
            _ => {}
        }
    }
    let out = Field {
        spec: field.spec.clone(),
        data,
    };
    if !discontinuous && continuity_check(&out) > config.discontinuity_threshold {
        discontinuous = true;
    }
    let report = match energy_report(&out, geom, T::zero()) {
        Ok(r) => r,
        Err(HopfError::IllConditionedPlaquette { .. }) => {
            discontinuous = true;
            nan_report(&out, geom)
        }
        Err(e) => return Err(e),
    };
    Ok(RelaxResult {
        field: out,
        trace,
        converged: converged && !discontinuous,
        discontinuous,
        report,
        iterations,
    })
}

fn nan_report<T: Real>(field: &Field<T>, geom: &LatticeGeometry<T>) -> EnergyReport<T> {
    EnergyReport {
        e4: T::nan(),
        e2: T::nan(),
        beta: T::zero(),
        e_total: T::nan(),
        directional: vec![T::nan(); geom.lattice.orientations().len()],
        density: vec![T::nan(); field.len()],
        kappa: geom.kappa,
    }
}
