//! Multi-level convergence studies: Cauchy behavior of the discrete
//! solutions against the finest level, plus the limit-identification
//! diagnostics computable at finite resolution.
//!
//! The unavailable weak limit is replaced by the finest-level solution as
//! the reference. The studies provide evidence of the limit passage, not a
//! proof, and report raw sequences so thresholds live with the caller.

use crate::error::{Error, Result};
use crate::operators::OperatorFamily;
use crate::solver::{solve_trajectory_in, ProblemConfig, Trajectory};
use crate::spaces::{DiscreteField, SpectralSpace};

/// Per-level trajectories sharing one problem config and time grid, with
/// distances to the finest level.
#[derive(Debug)]
pub struct LevelStudy {
    pub levels: Vec<usize>,
    pub spaces: Vec<SpectralSpace>,
    pub trajectories: Vec<Trajectory>,
    /// L^p(0,T;V) distance to the reference, by left-endpoint step quadrature.
    pub e_v: Vec<f64>,
    /// sup over grid points of the L2 distance to the reference.
    pub e_h: Vec<f64>,
}

impl LevelStudy {
    pub fn reference_space(&self) -> &SpectralSpace {
        self.spaces.last().expect("a study has at least one level")
    }

    pub fn reference(&self) -> &Trajectory {
        self.trajectories
            .last()
            .expect("a study has at least one level")
    }
}

fn thread_cap(levels: usize) -> usize {
    let hw = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1);
    let cap = std::env::var("GALERKIN_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n >= 1)
        .unwrap_or(hw);
    cap.min(levels).max(1)
}

/// Solve the problem at every level and measure distances to the finest.
/// Levels must be strictly increasing. Solves run concurrently, capped by
/// the GALERKIN_THREADS environment variable.
pub fn cauchy_study(cfg: &ProblemConfig, levels: &[usize]) -> Result<LevelStudy> {
    if levels.is_empty() {
        return Err(Error::value("a level study needs at least one level"));
    }
    if levels.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::value("levels must be strictly increasing"));
    }

    let spaces: Vec<SpectralSpace> = levels
        .iter()
        .map(|&n| cfg.space.build(n))
        .collect::<Result<_>>()?;
    for space in &spaces {
        cfg.family.validate_for_space(space)?;
    }

    let mut results: Vec<Option<Result<Trajectory>>> = (0..levels.len()).map(|_| None).collect();
    let cap = thread_cap(levels.len());
    for chunk_start in (0..levels.len()).step_by(cap) {
        let chunk_end = (chunk_start + cap).min(levels.len());
        let slots = &mut results[chunk_start..chunk_end];
        std::thread::scope(|scope| {
            let mut handles = Vec::new();
            for (offset, slot) in slots.iter_mut().enumerate() {
                let idx = chunk_start + offset;
                let space = &spaces[idx];
                let level = levels[idx];
                let handle = scope.spawn(move || solve_trajectory_in(cfg, space, level));
                handles.push((slot, handle));
            }
            for (slot, handle) in handles {
                *slot = Some(
                    handle
                        .join()
                        .unwrap_or_else(|_| Err(Error::value("a level solve panicked"))),
                );
            }
        });
    }
    let trajectories: Vec<Trajectory> = results
        .into_iter()
        .map(|r| r.expect("every slot filled"))
        .collect::<Result<_>>()?;

    // diagnostics need one common grid; adaptive bisection would break it
    let ref_times = trajectories.last().unwrap().times.clone();
    for traj in &trajectories {
        if traj.times.len() != ref_times.len()
            || traj
                .times
                .iter()
                .zip(&ref_times)
                .any(|(a, b)| (a - b).abs() > 1e-12 * cfg.horizon.max(1.0))
        {
            return Err(Error::Config(
                "level solves produced different time grids (a step was bisected); \
                 rerun with a smaller step size"
                    .into(),
            ));
        }
    }

    let p = cfg.family.p();
    let ref_space = spaces.last().unwrap();
    let ref_traj = trajectories.last().unwrap();
    let mut e_v = Vec::with_capacity(levels.len());
    let mut e_h = Vec::with_capacity(levels.len());
    for (space, traj) in spaces.iter().zip(&trajectories) {
        let mut acc_v = 0.0;
        let mut sup_h = 0.0f64;
        for k in 0..traj.times.len() {
            let lifted = ref_space.embed(&traj.fields[k], space)?;
            let diff = ref_space.field_from_coeffs(
                ref_space.level(),
                lifted
                    .coeffs()
                    .iter()
                    .zip(ref_traj.fields[k].coeffs())
                    .map(|(a, b)| a - b)
                    .collect(),
            )?;
            sup_h = sup_h.max(ref_space.norm_h(&diff)?);
            if k + 1 < traj.times.len() {
                let tau = traj.times[k + 1] - traj.times[k];
                acc_v += tau * ref_space.norm_v(&diff, p)?.powf(p);
            }
        }
        e_v.push(acc_v.powf(1.0 / p));
        e_h.push(sup_h);
    }

    Ok(LevelStudy {
        levels: levels.to_vec(),
        spaces,
        trajectories,
        e_v,
        e_h,
    })
}

/// Time-integrated pairing of each level's solution against its gap to the
/// reference: h_n = sum_k tau_k <A(t_k) u_n^k, u_n^k - u_N^k>. The reference
/// entry is exactly zero by construction.
pub fn hirano_diagnostic(study: &LevelStudy, family: &OperatorFamily) -> Result<Vec<f64>> {
    let ref_space = study.reference_space();
    let ref_traj = study.reference();
    let mut out = Vec::with_capacity(study.levels.len());
    for (space, traj) in study.spaces.iter().zip(&study.trajectories) {
        let mut acc = 0.0;
        for k in 0..traj.times.len().saturating_sub(1) {
            let tau = traj.times[k + 1] - traj.times[k];
            let lifted = ref_space.embed(&traj.fields[k], space)?;
            let pairings = family.apply(ref_space, traj.times[k], &lifted)?;
            let gap: f64 = pairings
                .iter()
                .zip(lifted.coeffs().iter().zip(ref_traj.fields[k].coeffs()))
                .map(|(a, (un, ur))| a * (un - ur))
                .sum();
            acc += tau * gap;
        }
        out.push(acc);
    }
    Ok(out)
}

/// Weak-convergence evidence: pairings of A u_n - A u_N against fixed
/// low-mode test fields held across levels. One inner vector per level, one
/// entry per test field.
pub fn weak_limit_check(
    study: &LevelStudy,
    family: &OperatorFamily,
    test_fields: &[DiscreteField],
) -> Result<Vec<Vec<f64>>> {
    let ref_space = study.reference_space();
    let ref_traj = study.reference();
    for phi in test_fields {
        // fields must belong to the reference space
        ref_space.norm_h(phi)?;
    }

    // reference pairings per step, reused across levels
    let steps = ref_traj.times.len().saturating_sub(1);
    let mut ref_pairings = Vec::with_capacity(steps);
    for k in 0..steps {
        ref_pairings.push(family.apply(ref_space, ref_traj.times[k], &ref_traj.fields[k])?);
    }

    let mut out = Vec::with_capacity(study.levels.len());
    for (space, traj) in study.spaces.iter().zip(&study.trajectories) {
        let mut acc = vec![0.0; test_fields.len()];
        for (k, reference) in ref_pairings.iter().enumerate() {
            let tau = traj.times[k + 1] - traj.times[k];
            let lifted = ref_space.embed(&traj.fields[k], space)?;
            let pairings = family.apply(ref_space, traj.times[k], &lifted)?;
            for (slot, phi) in acc.iter_mut().zip(test_fields) {
                let gap: f64 = pairings
                    .iter()
                    .zip(reference)
                    .zip(phi.coeffs())
                    .map(|((a, r), c)| (a - r) * c)
                    .sum();
                *slot += tau * gap;
            }
        }
        out.push(acc);
    }
    Ok(out)
}

/// One row per level: n, e_V, e_H, h_n, then one w column per test field.
pub fn study_csv(study: &LevelStudy, hirano: &[f64], weak: &[Vec<f64>]) -> String {
    let ncols = weak.first().map(|w| w.len()).unwrap_or(0);
    let mut csv = String::from("level,e_v,e_h,h");
    for i in 0..ncols {
        csv.push_str(&format!(",w{i}"));
    }
    csv.push('\n');
    for (i, &level) in study.levels.iter().enumerate() {
        csv.push_str(&format!(
            "{},{},{},{}",
            level,
            crate::report::format_float(study.e_v[i]),
            crate::report::format_float(study.e_h[i]),
            crate::report::format_float(hirano[i]),
        ));
        for value in weak[i].iter().take(ncols) {
            csv.push_str(&format!(",{}", crate::report::format_float(*value)));
        }
        csv.push('\n');
    }
    csv
}
