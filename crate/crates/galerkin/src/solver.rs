//! Implicit Euler integration of the Galerkin system.
//!
//! Each step solves (u_next - u_prev)/tau + A(t_next) u_next = f(t_next)
//! paired against every basis function of the level, by damped Newton with
//! an analytic Jacobian where the parts provide one and a finite-difference
//! fallback otherwise. Testing the scheme with u_next yields the discrete
//! energy inequality with a nonnegative dissipation term, so the a priori
//! estimates are checkable step by step.

use crate::error::{Error, Result};
use crate::operators::{assemble_rhs, OperatorFamily, RhsSpec};
use crate::spaces::{DiscreteField, SpaceKind, SpectralSpace};
use nalgebra::{DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Named initial profiles; projection onto a level truncates the profile's
/// basis expansion.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialSpec {
    Zero,
    Mode {
        index: usize,
    },
    /// x(1-x) on the unit interval.
    Parabola,
    /// (sin x cos y, -cos x sin y) on the torus.
    TaylorGreen,
}

/// Space parameters without the truncation level; the level is chosen per
/// solve or per study rung.
#[derive(Debug, Clone)]
pub struct SpaceSpec {
    pub kind: SpaceKind,
    pub dim: usize,
    pub s: f64,
    pub quad_order: Option<usize>,
}

impl SpaceSpec {
    pub fn build(&self, level: usize) -> Result<SpectralSpace> {
        let quad = self
            .quad_order
            .unwrap_or_else(|| crate::spaces::default_quad_order(self.kind, level));
        crate::spaces::make_space(self.kind, self.dim, level, self.s, quad)
    }
}

/// Everything needed to integrate one problem at a given level.
#[derive(Debug, Clone)]
pub struct ProblemConfig {
    pub space: SpaceSpec,
    pub family: OperatorFamily,
    pub rhs: RhsSpec,
    pub initial: InitialSpec,
    pub horizon: f64,
    pub nsteps: usize,
    pub newton_tol: f64,
    pub newton_maxit: usize,
}

impl ProblemConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(Error::value(format!(
                "time horizon must be positive, got {}",
                self.horizon
            )));
        }
        if !(self.newton_tol.is_finite() && self.newton_tol > 0.0) {
            return Err(Error::value("newton tolerance must be positive"));
        }
        Ok(())
    }
}

/// Time grid, fields, and pairing records of one integrated trajectory.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub level: usize,
    pub times: Vec<f64>,
    pub fields: Vec<DiscreteField>,
    /// <A(t_k) u_k, u_k> at every grid point.
    pub a_pairings: Vec<f64>,
    /// <f(t_k), u_k> at every grid point.
    pub f_pairings: Vec<f64>,
    /// Newton iterations per step (one less entry than grid points).
    pub newton_iters: Vec<usize>,
}

impl Trajectory {
    pub fn steps(&self) -> usize {
        self.times.len().saturating_sub(1)
    }

    pub fn final_field(&self) -> &DiscreteField {
        self.fields
            .last()
            .expect("a trajectory holds at least the initial field")
    }
}

/// Expand a named initial profile and truncate it to the level.
pub fn project_initial(
    space: &SpectralSpace,
    level: usize,
    spec: &InitialSpec,
) -> Result<DiscreteField> {
    let len = space.basis_len_at(level)?;
    let mut coeffs = vec![0.0; len];
    match spec {
        InitialSpec::Zero => {}
        InitialSpec::Mode { index } => {
            if *index < len {
                coeffs[*index] = 1.0;
            }
        }
        InitialSpec::Parabola => {
            if space.kind() != SpaceKind::DirichletSine || space.dim() != 1 {
                return Err(Error::Kind(
                    "the parabola profile lives on the unit interval".into(),
                ));
            }
            for (k, c) in coeffs.iter_mut().enumerate() {
                let mode = (k + 1) as f64;
                if (k + 1) % 2 == 1 {
                    *c = 4.0 * std::f64::consts::SQRT_2 / (mode * PI).powi(3);
                }
            }
        }
        InitialSpec::TaylorGreen => {
            if space.kind() != SpaceKind::TorusDivFree {
                return Err(Error::Kind(
                    "the cellular vortex profile lives on the torus".into(),
                ));
            }
            for (m, mode) in space.modes().iter().enumerate().take(len) {
                if !mode.is_sin_carrier() {
                    continue;
                }
                if mode.wave() == [1, 1] {
                    coeffs[m] = -PI;
                } else if mode.wave() == [1, -1] {
                    coeffs[m] = PI;
                }
            }
        }
    }
    space.field_from_coeffs(level, coeffs)
}

/// L2 norm of the untruncated profile, when it has a closed form.
pub fn initial_h_norm(spec: &InitialSpec) -> f64 {
    match spec {
        InitialSpec::Zero => 0.0,
        InitialSpec::Mode { .. } => 1.0,
        InitialSpec::Parabola => (1.0f64 / 30.0).sqrt(),
        InitialSpec::TaylorGreen => PI * std::f64::consts::SQRT_2,
    }
}

/// Jacobian reuse across Newton iterations and steps. The factorization is
/// refreshed lazily when convergence degrades, which keeps the expensive
/// finite-difference path off the per-step critical path.
#[derive(Default)]
pub struct NewtonWorkspace {
    lu: Option<nalgebra::linalg::LU<f64, Dyn, Dyn>>,
}

impl NewtonWorkspace {
    pub fn reset(&mut self) {
        self.lu = None;
    }
}

struct StepSystem<'a> {
    space: &'a SpectralSpace,
    family: &'a OperatorFamily,
    rhs: &'a RhsSpec,
    level: usize,
    c_prev: &'a [f64],
    t_next: f64,
    tau: f64,
}

impl StepSystem<'_> {
    fn residual(&self, c: &[f64]) -> Option<DVector<f64>> {
        if c.iter().any(|x| !x.is_finite()) {
            return None;
        }
        let field = self.space.field_from_coeffs(self.level, c.to_vec()).ok()?;
        let a = self.family.apply(self.space, self.t_next, &field).ok()?;
        let f = assemble_rhs(self.space, self.rhs, self.t_next, self.level).ok()?;
        let mut r = DVector::zeros(c.len());
        for k in 0..c.len() {
            r[k] = (c[k] - self.c_prev[k]) / self.tau + a[k] - f[k];
        }
        if r.iter().any(|x| !x.is_finite()) {
            return None;
        }
        Some(r)
    }

    fn jacobian(&self, c: &[f64]) -> Result<DMatrix<f64>> {
        let n = c.len();
        let field = self.space.field_from_coeffs(self.level, c.to_vec())?;
        let mut jac = match self.family.jacobian(self.space, self.t_next, &field)? {
            Some(j) => j,
            None => self.finite_difference_jacobian(c)?,
        };
        for k in 0..n {
            jac[(k, k)] += 1.0 / self.tau;
        }
        Ok(jac)
    }

    fn finite_difference_jacobian(&self, c: &[f64]) -> Result<DMatrix<f64>> {
        let n = c.len();
        let field = self.space.field_from_coeffs(self.level, c.to_vec())?;
        let base = self.family.apply(self.space, self.t_next, &field)?;
        let mut jac = DMatrix::zeros(n, n);
        let mut bumped = c.to_vec();
        for k in 0..n {
            let h = 1e-6 * (1.0 + c[k].abs());
            bumped[k] = c[k] + h;
            let fb = self.space.field_from_coeffs(self.level, bumped.clone())?;
            let ab = self.family.apply(self.space, self.t_next, &fb)?;
            for j in 0..n {
                jac[(j, k)] = (ab[j] - base[j]) / h;
            }
            bumped[k] = c[k];
        }
        Ok(jac)
    }
}

/// One implicit Euler step by damped Newton. Returns the accepted field and
/// the number of Newton iterations.
#[allow(clippy::too_many_arguments)]
pub fn implicit_euler_step(
    space: &SpectralSpace,
    family: &OperatorFamily,
    rhs: &RhsSpec,
    u_prev: &DiscreteField,
    t_next: f64,
    tau: f64,
    tol: f64,
    maxit: usize,
    ws: &mut NewtonWorkspace,
) -> Result<(DiscreteField, usize)> {
    if !(tau.is_finite() && tau > 0.0) {
        return Err(Error::value(format!(
            "step size must be positive, got {tau}"
        )));
    }
    let system = StepSystem {
        space,
        family,
        rhs,
        level: u_prev.level(),
        c_prev: u_prev.coeffs(),
        t_next,
        tau,
    };

    let mut c = u_prev.coeffs().to_vec();
    let mut r = system
        .residual(&c)
        .ok_or_else(|| Error::value("non-finite residual at the previous iterate"))?;
    let mut rnorm = r.norm();
    let mut iters = 0usize;
    let mut fresh = false;

    loop {
        if rnorm <= tol {
            let field = space.field_from_coeffs(u_prev.level(), c)?;
            return Ok((field, iters));
        }
        if iters >= maxit {
            return Err(Error::Step {
                step: 0,
                residual: rnorm,
                iterations: iters,
            });
        }
        if ws.lu.is_none() {
            ws.lu = Some(system.jacobian(&c)?.lu());
            fresh = true;
        }
        let direction = match ws.lu.as_ref().and_then(|lu| lu.solve(&(-&r))) {
            Some(d) if d.iter().all(|x| x.is_finite()) => d,
            _ => {
                if fresh {
                    return Err(Error::Step {
                        step: 0,
                        residual: rnorm,
                        iterations: iters,
                    });
                }
                ws.lu = None;
                iters += 1;
                continue;
            }
        };

        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..14 {
            let trial: Vec<f64> = c
                .iter()
                .zip(direction.iter())
                .map(|(ci, di)| ci + alpha * di)
                .collect();
            if let Some(rt) = system.residual(&trial) {
                let rtn = rt.norm();
                if rtn <= (1.0 - 1e-4 * alpha) * rnorm || rtn <= tol {
                    let slow = rtn > 0.25 * rnorm;
                    c = trial;
                    r = rt;
                    rnorm = rtn;
                    accepted = true;
                    // a lagged factorization that no longer contracts gets
                    // rebuilt at the next pass
                    if slow && !fresh {
                        ws.lu = None;
                    }
                    break;
                }
            }
            alpha *= 0.5;
        }
        iters += 1;
        if accepted {
            fresh = false;
        } else if fresh {
            return Err(Error::Step {
                step: 0,
                residual: rnorm,
                iterations: iters,
            });
        } else {
            ws.lu = None;
        }
    }
}

/// Integrate the full trajectory: project the initial profile, then march
/// `nsteps` uniform steps, bisecting a failing step up to five times.
pub fn solve_trajectory(cfg: &ProblemConfig, level: usize) -> Result<Trajectory> {
    cfg.validate()?;
    let space = cfg.space.build(level)?;
    cfg.family.validate_for_space(&space)?;
    solve_trajectory_in(cfg, &space, level)
}

/// Same as [`solve_trajectory`] with a caller-provided space, so studies can
/// share one space across diagnostics.
pub fn solve_trajectory_in(
    cfg: &ProblemConfig,
    space: &SpectralSpace,
    level: usize,
) -> Result<Trajectory> {
    let u0 = project_initial(space, level, &cfg.initial)?;
    let mut times = vec![0.0];
    let mut fields = vec![u0];
    let mut newton_iters = Vec::new();
    let mut ws = NewtonWorkspace::default();

    let tau = cfg.horizon / cfg.nsteps.max(1) as f64;
    for k in 1..=cfg.nsteps {
        let target = if k == cfg.nsteps {
            cfg.horizon
        } else {
            k as f64 * tau
        };
        let mut halvings = 0usize;
        while *times.last().unwrap() < target - 1e-12 * cfg.horizon {
            let t = *times.last().unwrap();
            let dt = (target - t) / (1 << halvings) as f64;
            match implicit_euler_step(
                space,
                &cfg.family,
                &cfg.rhs,
                fields.last().unwrap(),
                t + dt,
                dt,
                cfg.newton_tol,
                cfg.newton_maxit,
                &mut ws,
            ) {
                Ok((field, iters)) => {
                    times.push(t + dt);
                    fields.push(field);
                    newton_iters.push(iters);
                }
                Err(Error::Step {
                    residual,
                    iterations,
                    ..
                }) => {
                    halvings += 1;
                    ws.reset();
                    if halvings > 5 {
                        return Err(Error::Step {
                            step: k,
                            residual,
                            iterations,
                        });
                    }
                }
                Err(e) => return Err(e),
            }
        }
    }

    let mut a_pairings = Vec::with_capacity(times.len());
    let mut f_pairings = Vec::with_capacity(times.len());
    for (t, field) in times.iter().zip(&fields) {
        let a = cfg.family.apply(space, *t, field)?;
        let f = assemble_rhs(space, &cfg.rhs, *t, level)?;
        a_pairings.push(dot(&a, field.coeffs()));
        f_pairings.push(dot(&f, field.coeffs()));
    }

    Ok(Trajectory {
        level,
        times,
        fields,
        a_pairings,
        f_pairings,
        newton_iters,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Difference-quotient dual norms of a trajectory: per-step Z* norms of
/// (u_{k+1} - u_k)/tau_k and their composite L^{p'}(0,T) norm.
#[derive(Debug, Clone)]
pub struct TimeDerivativeReport {
    pub per_step: Vec<f64>,
    pub composite: f64,
}

pub fn time_derivative_pairings(
    space: &SpectralSpace,
    traj: &Trajectory,
    s: f64,
    p: f64,
) -> Result<TimeDerivativeReport> {
    let pprime = p / (p - 1.0);
    let mut per_step = Vec::with_capacity(traj.steps());
    let mut acc = 0.0;
    for k in 0..traj.steps() {
        let tau = traj.times[k + 1] - traj.times[k];
        let a = traj.fields[k + 1].coeffs();
        let b = traj.fields[k].coeffs();
        let pairings: Vec<f64> = a.iter().zip(b).map(|(x, y)| (x - y) / tau).collect();
        let znorm = space.dual_norm_zstar(&pairings, s)?;
        per_step.push(znorm);
        acc += tau * znorm.powf(pprime);
    }
    Ok(TimeDerivativeReport {
        per_step,
        composite: acc.powf(1.0 / pprime),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{OperatorPart, StructuralConstants};
    use crate::profiles::TimeProfile;
    use crate::verify::exponents::rational_int;

    fn heat_config(nsteps: usize) -> ProblemConfig {
        ProblemConfig {
            space: SpaceSpec {
                kind: SpaceKind::DirichletSine,
                dim: 1,
                s: 2.0,
                quad_order: None,
            },
            family: OperatorFamily::new(
                rational_int(2),
                0.0,
                vec![OperatorPart::Principal],
                StructuralConstants::default(),
            )
            .unwrap(),
            rhs: RhsSpec::Zero,
            initial: InitialSpec::Mode { index: 0 },
            horizon: 0.1,
            nsteps,
            newton_tol: 1e-11,
            newton_maxit: 40,
        }
    }

    #[test]
    fn initial_projection_examples() {
        let cfg = heat_config(1);
        let space = cfg.space.build(3).unwrap();
        // first mode survives any level
        let u = project_initial(&space, 3, &InitialSpec::Mode { index: 0 }).unwrap();
        assert_eq!(u.coeffs(), &[1.0, 0.0, 0.0]);
        // third mode truncates away at level 2
        let u = project_initial(&space, 2, &InitialSpec::Mode { index: 2 }).unwrap();
        assert_eq!(u.coeffs(), &[0.0, 0.0]);
    }

    #[test]
    fn parabola_sine_coefficients() {
        let cfg = heat_config(1);
        let space = cfg.space.build(5).unwrap();
        let u = project_initial(&space, 5, &InitialSpec::Parabola).unwrap();
        for k in 1..=5usize {
            let expect = if k % 2 == 1 {
                4.0 * std::f64::consts::SQRT_2 / (k as f64 * PI).powi(3)
            } else {
                0.0
            };
            assert!((u.coeffs()[k - 1] - expect).abs() < 1e-15);
        }
        // truncation norms grow toward the profile norm
        let mut prev = 0.0;
        for level in 1..=5 {
            let un = project_initial(&space, level, &InitialSpec::Parabola).unwrap();
            let n = space.norm_h(&un).unwrap();
            assert!(n >= prev);
            prev = n;
        }
        assert!((prev - initial_h_norm(&InitialSpec::Parabola)).abs() < 1e-4);
    }

    #[test]
    fn heat_step_has_closed_form() {
        let cfg = heat_config(1);
        let space = cfg.space.build(1).unwrap();
        let u0 = project_initial(&space, 1, &cfg.initial).unwrap();
        let mut ws = NewtonWorkspace::default();
        let (u1, _) = implicit_euler_step(
            &space,
            &cfg.family,
            &cfg.rhs,
            &u0,
            0.1,
            0.1,
            1e-12,
            20,
            &mut ws,
        )
        .unwrap();
        let expect = 1.0 / (1.0 + 0.1 * PI * PI);
        assert!(
            (u1.coeffs()[0] - expect).abs() < 1e-12,
            "{}",
            u1.coeffs()[0]
        );
    }

    #[test]
    fn stationary_point_is_fixed() {
        // f = A u with A the Laplacian and u the first mode
        let mut cfg = heat_config(1);
        cfg.rhs = RhsSpec::Mode {
            index: 0,
            profile: TimeProfile::Constant { value: PI * PI },
        };
        let space = cfg.space.build(2).unwrap();
        let u0 = project_initial(&space, 2, &cfg.initial).unwrap();
        let mut ws = NewtonWorkspace::default();
        let (u1, iters) = implicit_euler_step(
            &space,
            &cfg.family,
            &cfg.rhs,
            &u0,
            0.05,
            0.05,
            1e-10,
            20,
            &mut ws,
        )
        .unwrap();
        assert_eq!(iters, 0);
        assert_eq!(u1.coeffs(), u0.coeffs());
    }

    #[test]
    fn step_residual_is_below_tolerance() {
        // nonlinear problem, residual recomputed independently
        let family = OperatorFamily::new(
            rational_int(3),
            0.0,
            vec![OperatorPart::Principal],
            StructuralConstants::default(),
        )
        .unwrap();
        let cfg = heat_config(1);
        let space = cfg.space.build(3).unwrap();
        let u0 = space.field_from_coeffs(3, vec![0.8, -0.3, 0.2]).unwrap();
        let rhs = RhsSpec::Mode {
            index: 1,
            profile: TimeProfile::Constant { value: 0.5 },
        };
        let tol = 1e-11;
        let mut ws = NewtonWorkspace::default();
        let (u1, _) =
            implicit_euler_step(&space, &family, &rhs, &u0, 0.02, 0.02, tol, 40, &mut ws).unwrap();
        let a = family.apply(&space, 0.02, &u1).unwrap();
        let f = assemble_rhs(&space, &rhs, 0.02, 3).unwrap();
        let residual: f64 = (0..3)
            .map(|k| {
                let r = (u1.coeffs()[k] - u0.coeffs()[k]) / 0.02 + a[k] - f[k];
                r * r
            })
            .sum::<f64>()
            .sqrt();
        assert!(residual <= tol, "residual {residual}");
    }

    #[test]
    fn heat_trajectory_approaches_separated_solution() {
        let exact = (-0.1 * PI * PI).exp();
        let mut errors = Vec::new();
        for nsteps in [25, 50, 100] {
            let cfg = heat_config(nsteps);
            let traj = solve_trajectory(&cfg, 4).unwrap();
            let space = cfg.space.build(4).unwrap();
            let n = space.norm_h(traj.final_field()).unwrap();
            errors.push((n - exact).abs());
        }
        assert!(errors[0] > errors[1] && errors[1] > errors[2]);
        // first order in the step size
        let ratio = errors[1] / errors[2];
        assert!(ratio > 1.7 && ratio < 2.3, "ratio {ratio}");
    }

    #[test]
    fn planar_heat_mode_decays_with_doubled_rate() {
        let mut cfg = heat_config(200);
        cfg.space.dim = 2;
        let traj = solve_trajectory(&cfg, 2).unwrap();
        let space = cfg.space.build(2).unwrap();
        let norm = space.norm_h(traj.final_field()).unwrap();
        let exact = (-0.1 * 2.0 * PI * PI).exp();
        assert!((norm - exact).abs() < 5e-3, "{norm} vs {exact}");
    }

    #[test]
    fn zero_step_trajectory_is_initial_only() {
        let mut cfg = heat_config(0);
        cfg.nsteps = 0;
        let traj = solve_trajectory(&cfg, 2).unwrap();
        assert_eq!(traj.times.len(), 1);
        assert_eq!(traj.fields.len(), 1);
        assert!(traj.newton_iters.is_empty());
    }

    #[test]
    fn zero_data_stays_zero() {
        let mut cfg = heat_config(10);
        cfg.initial = InitialSpec::Zero;
        let traj = solve_trajectory(&cfg, 3).unwrap();
        for f in &traj.fields {
            assert!(f.coeffs().iter().all(|&c| c == 0.0));
        }
        assert!(traj.a_pairings.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn trajectories_are_deterministic() {
        let cfg = heat_config(20);
        let a = solve_trajectory(&cfg, 4).unwrap();
        let b = solve_trajectory(&cfg, 4).unwrap();
        assert_eq!(a.times, b.times);
        for (x, y) in a.fields.iter().zip(&b.fields) {
            assert_eq!(x.coeffs(), y.coeffs());
        }
    }

    #[test]
    fn exhausted_newton_budget_surfaces_as_step_error() {
        let mut cfg = heat_config(4);
        cfg.newton_maxit = 0;
        cfg.rhs = RhsSpec::Mode {
            index: 0,
            profile: TimeProfile::Constant { value: 1.0 },
        };
        match solve_trajectory(&cfg, 2) {
            Err(Error::Step { step, .. }) => assert_eq!(step, 1),
            other => panic!("expected a step error, got {other:?}"),
        }
    }

    #[test]
    fn per_step_energy_inequality_on_heat() {
        let cfg = heat_config(50);
        let space = cfg.space.build(4).unwrap();
        let traj = solve_trajectory(&cfg, 4).unwrap();
        for k in 0..traj.steps() {
            let tau = traj.times[k + 1] - traj.times[k];
            let h1 = space.norm_h(&traj.fields[k + 1]).unwrap().powi(2);
            let h0 = space.norm_h(&traj.fields[k]).unwrap().powi(2);
            let lhs = 0.5 * h1 - 0.5 * h0 + tau * traj.a_pairings[k + 1];
            let rhs = tau * traj.f_pairings[k + 1];
            assert!(lhs <= rhs + 1e-9, "step {k}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn derivative_dual_norms_single_mode() {
        let cfg = heat_config(1);
        let space = cfg.space.build(1).unwrap();
        let traj = solve_trajectory(&cfg, 1).unwrap();
        let report = time_derivative_pairings(&space, &traj, 1.0, 2.0).unwrap();
        let c1 = traj.fields[1].coeffs()[0];
        let expect = ((c1 - 1.0) / 0.1).abs() * (1.0 + PI * PI).powf(-0.5);
        assert!((report.per_step[0] - expect).abs() < 1e-12);

        let mut zcfg = heat_config(3);
        zcfg.initial = InitialSpec::Zero;
        let ztraj = solve_trajectory(&zcfg, 1).unwrap();
        let zrep = time_derivative_pairings(&space, &ztraj, 1.0, 2.0).unwrap();
        assert!(zrep.composite == 0.0);
        assert!(zrep.per_step.iter().all(|&v| v == 0.0));
    }
}
