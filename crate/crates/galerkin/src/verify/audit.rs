//! Post-hoc audits of stored trajectories.
//!
//! Every quantity is recomputed from the stored fields, not from the
//! solver's own records, so a corrupted trajectory cannot pass on stale
//! bookkeeping.

use super::dualnorm::dual_norm_discrete;
use super::{CheckReport, CheckSettings};
use crate::error::Result;
use crate::operators::{assemble_rhs, OperatorFamily, RhsSpec};
use crate::solver::{initial_h_norm, project_initial, InitialSpec, Trajectory};
use crate::spaces::SpectralSpace;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

// estimator effort per grid point; the audit runs one estimate per step
const AUDIT_STARTS: usize = 2;
const AUDIT_ITERS: usize = 12;

/// Replays the per-step energy inequality, the running a priori bound, and
/// the induced-operator bound on a stored trajectory. When the initial
/// profile is known, the projection identity is replayed too.
pub fn audit_trajectory(
    space: &SpectralSpace,
    traj: &Trajectory,
    family: &OperatorFamily,
    rhs: &RhsSpec,
    initial: Option<&InitialSpec>,
    settings: &CheckSettings,
) -> Result<Vec<CheckReport>> {
    let mut out = Vec::new();
    out.push(wellformed(traj));
    if let Some(spec) = initial {
        out.push(initial_projection(space, traj, spec)?);
    }

    // recomputed pairings and norms at every grid point
    let kpoints = traj.times.len();
    let p = family.p();
    let mut a_pairings = Vec::with_capacity(kpoints);
    let mut f_pairings = Vec::with_capacity(kpoints);
    let mut h_norms = Vec::with_capacity(kpoints);
    let mut v_norms = Vec::with_capacity(kpoints);
    for (t, field) in traj.times.iter().zip(&traj.fields) {
        let a = family.apply(space, *t, field)?;
        let f = assemble_rhs(space, rhs, *t, traj.level)?;
        a_pairings.push(dot(&a, field.coeffs()));
        f_pairings.push(dot(&f, field.coeffs()));
        h_norms.push(space.norm_h(field)?);
        v_norms.push(space.norm_v(field, p)?);
    }

    out.push(energy_inequality(
        traj,
        &a_pairings,
        &f_pairings,
        &h_norms,
        settings,
    ));
    out.push(apriori_bound(
        space, traj, family, rhs, &h_norms, &v_norms, settings,
    )?);
    out.push(induced_operator_bound(
        space, traj, family, &h_norms, &v_norms, settings,
    )?);
    Ok(out)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn wellformed(traj: &Trajectory) -> CheckReport {
    let mut worst = f64::INFINITY;
    let mut passed = true;
    for k in 1..traj.times.len() {
        let dt = traj.times[k] - traj.times[k - 1];
        worst = worst.min(dt);
        if dt <= 0.0 {
            passed = false;
        }
    }
    for f in &traj.fields {
        if f.coeffs().iter().any(|c| !c.is_finite()) {
            passed = false;
            worst = f64::NEG_INFINITY;
        }
    }
    if traj.times.len() == 1 {
        worst = 0.0;
    }
    CheckReport::new("trajectory-wellformed", passed, traj.times.len(), worst)
}

fn initial_projection(
    space: &SpectralSpace,
    traj: &Trajectory,
    spec: &InitialSpec,
) -> Result<CheckReport> {
    let expect = project_initial(space, traj.level, spec)?;
    let got = &traj.fields[0];
    let maxdiff = expect
        .coeffs()
        .iter()
        .zip(got.coeffs())
        .fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
    let norm_slack = initial_h_norm(spec) + 1e-12 - space.norm_h(got)?;
    let margin = (-maxdiff).min(norm_slack);
    let mut report = CheckReport::new("initial-projection", margin >= -1e-12, 1, margin);
    report.worst_witness = Some(json!({ "max_coefficient_difference": maxdiff }));
    Ok(report)
}

fn energy_inequality(
    traj: &Trajectory,
    a_pairings: &[f64],
    f_pairings: &[f64],
    h_norms: &[f64],
    settings: &CheckSettings,
) -> CheckReport {
    let mut worst = f64::INFINITY;
    let mut witness = None;
    let steps = traj.times.len().saturating_sub(1);
    for k in 0..steps {
        let tau = traj.times[k + 1] - traj.times[k];
        let slack = tau * f_pairings[k + 1]
            - (0.5 * h_norms[k + 1].powi(2) - 0.5 * h_norms[k].powi(2) + tau * a_pairings[k + 1]);
        if slack < worst {
            worst = slack;
            witness = Some(json!({ "step": k + 1 }));
        }
    }
    if steps == 0 {
        worst = 0.0;
    }
    let mut report = CheckReport::new(
        "energy-inequality",
        worst >= -settings.energy_tolerance,
        steps,
        worst,
    );
    report.worst_witness = witness;
    report
}

fn apriori_bound(
    space: &SpectralSpace,
    traj: &Trajectory,
    family: &OperatorFamily,
    rhs: &RhsSpec,
    h_norms: &[f64],
    v_norms: &[f64],
    settings: &CheckSettings,
) -> Result<CheckReport> {
    let p = family.p();
    let pprime = family.p_conjugate();
    let c1 = family.constants.c1;
    let young = (2.0 / c1).powf(pprime - 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed.wrapping_add(0xa0d1));

    let mut dissipation = 0.0;
    let mut fterm = 0.0;
    let mut c2term = 0.0;
    let mut worst = f64::INFINITY;
    let mut witness = None;
    let steps = traj.times.len().saturating_sub(1);
    for k in 1..=steps {
        let tau = traj.times[k] - traj.times[k - 1];
        dissipation += tau * v_norms[k].powf(p);
        if !matches!(rhs, RhsSpec::Zero) {
            let f = assemble_rhs(space, rhs, traj.times[k], traj.level)?;
            let fnorm = dual_norm_discrete(space, &f, p, AUDIT_STARTS, AUDIT_ITERS, &mut rng);
            fterm += tau * fnorm.powf(pprime);
        }
        c2term += tau * family.constants.c2.eval(traj.times[k]);

        let lhs = h_norms[k].powi(2) + c1 * dissipation;
        let bound = h_norms[0].powi(2) + young * fterm + 2.0 * c2term;
        let rel = (bound - lhs) / (1.0 + bound.abs());
        if rel < worst {
            worst = rel;
            witness = Some(json!({ "step": k }));
        }
    }
    if steps == 0 {
        worst = 0.0;
    }
    let mut report = CheckReport::new("apriori-bound", worst >= -settings.tolerance, steps, worst);
    report.worst_witness = witness;
    Ok(report)
}

fn induced_operator_bound(
    space: &SpectralSpace,
    traj: &Trajectory,
    family: &OperatorFamily,
    h_norms: &[f64],
    v_norms: &[f64],
    settings: &CheckSettings,
) -> Result<CheckReport> {
    let steps = traj.times.len().saturating_sub(1);
    if steps == 0 {
        return Ok(CheckReport::new("induced-operator-bound", true, 0, 0.0));
    }
    let p = family.p();
    let pprime = family.p_conjugate();
    let k = &family.constants;
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed.wrapping_add(0xb1e2));

    let mut lhs_acc = 0.0;
    let mut lp_v = 0.0;
    for (m, vnorm) in v_norms.iter().enumerate().skip(1) {
        let tau = traj.times[m] - traj.times[m - 1];
        let a = family.apply(space, traj.times[m], &traj.fields[m])?;
        let anorm = dual_norm_discrete(space, &a, p, AUDIT_STARTS, AUDIT_ITERS, &mut rng);
        lhs_acc += tau * anorm.powf(pprime);
        lp_v += tau * vnorm.powf(p);
    }
    let lhs = lhs_acc.powf(1.0 / pprime);
    let sup_h = h_norms.iter().fold(0.0f64, |a, &b| a.max(b));
    let bound_k = sup_h.max(lp_v.powf(1.0 / p));
    let c5norm = k.c5.lq_norm_on_grid(&traj.times, pprime);
    let rhs = k.c3 * bound_k.powf(p - 1.0) + k.c4 * bound_k.powf(k.q + p - 1.0) + c5norm;
    let worst = (rhs - lhs) / (1.0 + rhs.abs());
    let mut report = CheckReport::new(
        "induced-operator-bound",
        worst >= -settings.tolerance,
        steps,
        worst,
    );
    report.worst_witness = Some(json!({ "lhs": lhs, "rhs": rhs, "K": bound_k }));
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{OperatorPart, StructuralConstants};
    use crate::solver::{solve_trajectory, ProblemConfig, SpaceSpec};
    use crate::spaces::SpaceKind;
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
    fn heat_trajectory_passes_all_audits() {
        let cfg = heat_config(40);
        let space = cfg.space.build(4).unwrap();
        let traj = solve_trajectory(&cfg, 4).unwrap();
        let reports = audit_trajectory(
            &space,
            &traj,
            &cfg.family,
            &cfg.rhs,
            Some(&cfg.initial),
            &CheckSettings::default(),
        )
        .unwrap();
        for r in &reports {
            assert!(r.passed, "{}: margin {}", r.name, r.worst_margin);
        }
        assert_eq!(reports.len(), 5);
    }

    #[test]
    fn zero_trajectory_audits_trivially() {
        let mut cfg = heat_config(5);
        cfg.initial = InitialSpec::Zero;
        let space = cfg.space.build(2).unwrap();
        let traj = solve_trajectory(&cfg, 2).unwrap();
        let reports = audit_trajectory(
            &space,
            &traj,
            &cfg.family,
            &cfg.rhs,
            Some(&cfg.initial),
            &CheckSettings::default(),
        )
        .unwrap();
        for r in &reports {
            assert!(r.passed, "{}", r.name);
        }
    }

    #[test]
    fn corrupted_coefficient_fails_an_audit() {
        let cfg = heat_config(20);
        let space = cfg.space.build(4).unwrap();
        let mut traj = solve_trajectory(&cfg, 4).unwrap();
        // bump one interior coefficient by ten percent
        let mid = traj.fields.len() / 2;
        let bumped = {
            let coeffs = traj.fields[mid].coeffs_mut();
            coeffs[0] *= 1.1;
            coeffs[0]
        };
        assert!(bumped != 0.0);
        let reports = audit_trajectory(
            &space,
            &traj,
            &cfg.family,
            &cfg.rhs,
            Some(&cfg.initial),
            &CheckSettings::default(),
        )
        .unwrap();
        assert!(
            reports.iter().any(|r| !r.passed),
            "no audit caught the corruption"
        );
    }
}
