//! Sample-based hypothesis checks on operator families.

use super::dualnorm::dual_norm_discrete;
use super::exponents::{format_rational, rational_int, Rational};
use super::{CheckReport, CheckSettings, SCALES};
use crate::operators::{p_laplace_apply, NemytskiiSpec, OperatorFamily};
use crate::spaces::{DiscreteField, SpectralSpace};
use num_traits::One;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Distribution;
use rand_distr::StandardNormal;
use serde_json::json;
use std::collections::BTreeMap;

fn rng_for(settings: &CheckSettings, salt: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(
        settings
            .seed
            .wrapping_mul(0x9e37_79b9_7f4a_7c15)
            .wrapping_add(salt),
    )
}

fn time_grid(settings: &CheckSettings) -> Vec<f64> {
    let n = settings.t_samples.max(1);
    (0..n)
        .map(|i| settings.horizon * i as f64 / n.max(2).saturating_sub(1) as f64)
        .collect()
}

fn random_direction(space: &SpectralSpace, rng: &mut impl Rng) -> Vec<f64> {
    (0..space.basis_len())
        .map(|_| {
            let x: f64 = StandardNormal.sample(rng);
            x
        })
        .collect()
}

fn scaled_field(space: &SpectralSpace, direction: &[f64], scale: f64) -> DiscreteField {
    let coeffs: Vec<f64> = direction.iter().map(|c| c * scale).collect();
    space
        .field_from_coeffs(space.level(), coeffs)
        .expect("finite scaled coefficients")
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Lower-bound hypothesis: <A(t)x, x> >= c1 ||x||_V^p - c2(t) on sampled
/// fields across five decades of scale. Margins are relative.
pub fn check_coercivity(
    family: &OperatorFamily,
    space: &SpectralSpace,
    settings: &CheckSettings,
) -> crate::Result<CheckReport> {
    family.validate_for_space(space)?;
    let mut rng = rng_for(settings, 1);
    let c1 = family.constants.c1;
    let p = family.p();
    let mut samples = 0usize;
    let mut worst = f64::INFINITY;
    let mut witness = None;

    for &t in &time_grid(settings) {
        let c2t = family.constants.c2.eval(t);
        // the zero field shows the pure profile slack
        let zero = space.zero_field(space.level())?;
        let a0 = family.apply(space, t, &zero)?;
        let slack0 = dot(&a0, zero.coeffs()) + c2t;
        samples += 1;
        if slack0 / (1.0 + c2t) < worst {
            worst = slack0 / (1.0 + c2t);
            witness = Some(json!({ "t": t, "scale": 0.0, "coeffs": [] }));
        }

        for _ in 0..settings.field_samples {
            let direction = random_direction(space, &mut rng);
            for &scale in &SCALES {
                let x = scaled_field(space, &direction, scale);
                let ax = family.apply(space, t, &x)?;
                let lhs = dot(&ax, x.coeffs());
                let vp = space.norm_v(&x, p)?.powf(p);
                let slack = lhs - c1 * vp + c2t;
                let denom = 1.0 + lhs.abs() + c1 * vp + c2t;
                let rel = slack / denom;
                samples += 1;
                if rel < worst {
                    worst = rel;
                    witness = Some(json!({ "t": t, "scale": scale, "coeffs": x.coeffs() }));
                }
            }
        }
    }

    let mut report = CheckReport::new("coercivity", worst >= -settings.tolerance, samples, worst);
    report.worst_witness = witness;
    Ok(report)
}

/// Dual growth hypothesis: the discrete dual norm of A(t)x stays below
/// c3 ||x||_V^{p-1} + c4 ||x||_H^q ||x||_V^{p-1} + c5(t). Also fits the
/// smallest (c3, c4) consistent with the samples.
pub fn check_growth(
    family: &OperatorFamily,
    space: &SpectralSpace,
    settings: &CheckSettings,
) -> crate::Result<CheckReport> {
    family.validate_for_space(space)?;
    let mut rng = rng_for(settings, 2);
    let p = family.p();
    let k = &family.constants;
    let mut samples = 0usize;
    let mut worst = f64::INFINITY;
    let mut witness = None;
    // rows (dual norm, ||x||_V^{p-1}, ||x||_H^q ||x||_V^{p-1}, c5(t)) feed the fit
    let mut rows: Vec<[f64; 4]> = Vec::new();

    for &t in &time_grid(settings) {
        let c5t = k.c5.eval(t);
        for _ in 0..settings.growth_samples {
            let direction = random_direction(space, &mut rng);
            for &scale in &SCALES {
                let x = scaled_field(space, &direction, scale);
                let ax = family.apply(space, t, &x)?;
                let anorm = dual_norm_discrete(
                    space,
                    &ax,
                    p,
                    settings.ascent_starts,
                    settings.ascent_iters,
                    &mut rng,
                );
                let vfac = space.norm_v(&x, p)?.powf(p - 1.0);
                let hfac = space.norm_h(&x)?.powf(k.q) * vfac;
                let bound = k.c3 * vfac + k.c4 * hfac + c5t;
                let slack = bound - anorm;
                let rel = slack / (1.0 + bound + anorm);
                samples += 1;
                rows.push([anorm, vfac, hfac, c5t]);
                if rel < worst {
                    worst = rel;
                    witness = Some(json!({ "t": t, "scale": scale, "coeffs": x.coeffs() }));
                }
            }
        }
    }

    let mut report = CheckReport::new("growth", worst >= -settings.tolerance, samples, worst);
    report.worst_witness = witness;
    report.fitted_constants = fit_growth_constants(&rows);
    Ok(report)
}

/// Smallest (c3, c4) with c3 v_i + c4 h_i >= a_i - c5_i for all samples,
/// minimizing c3 + c4 over a candidate grid.
fn fit_growth_constants(rows: &[[f64; 4]]) -> Option<BTreeMap<String, f64>> {
    let needs: Vec<(f64, f64, f64)> = rows
        .iter()
        .map(|r| ((r[0] - r[3]).max(0.0), r[1], r[2]))
        .collect();
    let tiny = 1e-300;
    let mut ratio_hi = 0.0f64;
    for &(need, _, h) in &needs {
        if h > tiny {
            ratio_hi = ratio_hi.max(need / h);
        }
    }
    let mut candidates = vec![0.0];
    if ratio_hi > 0.0 {
        for i in 0..=48 {
            candidates.push(ratio_hi * 10f64.powf(-12.0 * (1.0 - i as f64 / 48.0)));
        }
    }
    let mut best: Option<(f64, f64)> = None;
    for &c4 in &candidates {
        let mut c3 = 0.0f64;
        let mut feasible = true;
        for &(need, v, h) in &needs {
            let rem = need - c4 * h;
            if rem <= 0.0 {
                continue;
            }
            if v <= tiny {
                feasible = false;
                break;
            }
            c3 = c3.max(rem / v);
        }
        if feasible && best.map(|(b3, b4)| c3 + c4 < b3 + b4).unwrap_or(true) {
            best = Some((c3, c4));
        }
    }
    best.map(|(c3, c4)| {
        let mut m = BTreeMap::new();
        m.insert("c3".to_string(), c3);
        m.insert("c4".to_string(), c4);
        m
    })
}

/// Monotonicity of the principal part: <Bu - Bv, u - v> >= 0 on random
/// pairs, within an absolute floor.
pub fn check_monotone(
    space: &SpectralSpace,
    p: f64,
    delta: f64,
    settings: &CheckSettings,
) -> crate::Result<CheckReport> {
    let mut rng = rng_for(settings, 3);
    let mut worst = f64::INFINITY;
    let mut witness = None;
    for _ in 0..settings.pair_samples {
        let cu = random_direction(space, &mut rng);
        let cv = random_direction(space, &mut rng);
        let u = scaled_field(space, &cu, 1.0);
        let v = scaled_field(space, &cv, 1.0);
        let bu = p_laplace_apply(space, &u, p, delta)?;
        let bv = p_laplace_apply(space, &v, p, delta)?;
        let gap: f64 = (0..cu.len())
            .map(|k| (bu[k] - bv[k]) * (cu[k] - cv[k]))
            .sum();
        if gap < worst {
            worst = gap;
            witness = Some(json!({ "u": cu, "v": cv }));
        }
    }
    let mut report = CheckReport::new(
        "monotonicity",
        worst >= -settings.monotone_tolerance,
        settings.pair_samples,
        worst,
    );
    report.worst_witness = witness;
    Ok(report)
}

/// Certification of a superposition term: the growth exponent bound in
/// exact rationals, and the sign bound g(t,x,s)s >= -c8(t) on a sampling
/// grid with the derived c8.
pub fn certify_g(
    spec: &NemytskiiSpec,
    p: &Rational,
    d: u32,
    settings: &CheckSettings,
) -> Vec<CheckReport> {
    let mut out = Vec::new();

    // admissibility 1 <= r <= p (d+2)/d, exact
    let r0 = p * rational_int(d as i64 + 2) / rational_int(d as i64);
    let one = Rational::one();
    let ok = spec.r >= one && spec.r <= r0;
    let upper = &r0 - &spec.r;
    let lower = &spec.r - &one;
    let margin = super::exponents::rational_to_f64(if upper < lower { &upper } else { &lower });
    let mut g2 = CheckReport::new("g2-admissibility", ok, 1, margin);
    g2.worst_witness = Some(json!({
        "r": format_rational(&spec.r),
        "r0": format_rational(&r0),
    }));
    out.push(g2);

    // sign bound on a (t, x, s) grid
    let mut worst = f64::INFINITY;
    let mut witness = None;
    let mut samples = 0usize;
    let xs: Vec<[f64; 2]> = {
        let grid: Vec<f64> = (0..=20).map(|i| i as f64 / 20.0).collect();
        if d >= 2 {
            grid.iter()
                .flat_map(|&a| grid.iter().map(move |&b| [a, b]))
                .collect()
        } else {
            grid.iter().map(|&a| [a, 0.0]).collect()
        }
    };
    let mut svals = vec![0.0];
    for e in -2..=3 {
        let v = 10f64.powi(e);
        svals.push(v);
        svals.push(-v);
    }
    for &t in &time_grid(settings) {
        let c8t = spec.c8.eval(t);
        for &x in &xs {
            for &s in &svals {
                let slack = spec.eval(t, x, d as usize, s) * s + c8t;
                let rel = slack / (1.0 + c8t + slack.abs());
                samples += 1;
                if rel < worst {
                    worst = rel;
                    witness = Some(json!({ "t": t, "x": x, "s": s }));
                }
            }
        }
    }
    let mut g3 = CheckReport::new(
        "g3-lower-bound",
        worst >= -settings.tolerance,
        samples,
        worst,
    );
    g3.worst_witness = witness;
    out.push(g3);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{OperatorPart, StructuralConstants};
    use crate::profiles::TimeProfile;
    use crate::spaces::{default_quad_order, make_space, SpaceKind};
    use crate::verify::exponents::rational;

    fn sine1(level: usize) -> SpectralSpace {
        make_space(
            SpaceKind::DirichletSine,
            1,
            level,
            2.0,
            default_quad_order(SpaceKind::DirichletSine, level),
        )
        .unwrap()
    }

    fn principal(p: i64) -> OperatorFamily {
        OperatorFamily::new(
            rational_int(p),
            0.0,
            vec![OperatorPart::Principal],
            StructuralConstants::default(),
        )
        .unwrap()
    }

    fn small_settings() -> CheckSettings {
        CheckSettings {
            t_samples: 2,
            field_samples: 5,
            growth_samples: 2,
            pair_samples: 50,
            ascent_starts: 3,
            ascent_iters: 20,
            ..CheckSettings::default()
        }
    }

    #[test]
    fn pure_principal_part_is_coercive_with_unit_constant() {
        let sp = sine1(4);
        for p in [2i64, 3] {
            let report = check_coercivity(&principal(p), &sp, &small_settings()).unwrap();
            assert!(report.passed, "p={p}: worst {}", report.worst_margin);
        }
    }

    #[test]
    fn quartic_term_adds_slack_on_first_mode() {
        // <A phi_1, phi_1> = pi^2 + 3/8 for the quartic superposition term
        let sp = sine1(2);
        let spec = NemytskiiSpec::power(1.0, rational_int(4)).unwrap();
        let family = OperatorFamily::new(
            rational_int(2),
            0.0,
            vec![OperatorPart::Principal, OperatorPart::LowerOrder(spec)],
            StructuralConstants::default(),
        )
        .unwrap();
        let phi1 = sp.basis_field(0).unwrap();
        let ax = family.apply(&sp, 0.0, &phi1).unwrap();
        let lhs: f64 = ax.iter().zip(phi1.coeffs()).map(|(a, b)| a * b).sum();
        let vp = sp.norm_v(&phi1, 2.0).unwrap().powi(2);
        // phi_1 = sqrt(2) sin(pi x): integral of phi_1^4 is 3/2
        assert!((lhs - vp - 1.5).abs() < 1e-9, "slack {}", lhs - vp);
        let report = check_coercivity(&family, &sp, &small_settings()).unwrap();
        assert!(report.passed);
    }

    #[test]
    fn growth_of_pure_principal_passes_with_unit_c3() {
        let sp = sine1(3);
        let mut family = principal(2);
        family.constants.c3 = 1.0 + 1e-6;
        let report = check_growth(&family, &sp, &small_settings()).unwrap();
        assert!(report.passed, "worst {}", report.worst_margin);
        let fitted = report.fitted_constants.unwrap();
        // fitted c3 close to the sharp constant 1
        assert!(*fitted.get("c3").unwrap() <= 1.0 + 1e-6);
        assert!(*fitted.get("c4").unwrap() <= 1e-6);
    }

    #[test]
    fn understated_constants_fail_growth() {
        let sp = sine1(3);
        let mut family = principal(2);
        family.constants.c3 = 0.2;
        let report = check_growth(&family, &sp, &small_settings()).unwrap();
        assert!(!report.passed);
    }

    #[test]
    fn monotonicity_small_suite() {
        let sp = sine1(4);
        for p in [1.5, 2.0, 3.0] {
            for delta in [0.0, 0.1] {
                let report = check_monotone(&sp, p, delta, &small_settings()).unwrap();
                assert!(
                    report.passed,
                    "p={p} delta={delta}: {}",
                    report.worst_margin
                );
            }
        }
    }

    #[test]
    fn admissibility_examples() {
        let spec = NemytskiiSpec::power(1.0, rational_int(4)).unwrap();
        let settings = small_settings();
        // r = 4, p = 2, d = 1: ceiling is 6
        let reports = certify_g(&spec, &rational_int(2), 1, &settings);
        assert!(reports[0].passed);
        assert!(reports[1].passed);
        // r = 4, p = 2, d = 3: ceiling 10/3 < 4
        let reports = certify_g(&spec, &rational_int(2), 3, &settings);
        assert!(!reports[0].passed);
        assert!(reports[0].worst_margin < 0.0);
    }

    #[test]
    fn saturating_sign_bound_certifies() {
        let spec = NemytskiiSpec::saturating(-2.0).unwrap();
        let reports = certify_g(&spec, &rational(5, 2), 1, &small_settings());
        assert!(reports[1].passed, "worst {}", reports[1].worst_margin);
    }

    #[test]
    fn source_term_sign_bound_holds_by_construction() {
        let spec = NemytskiiSpec::new(
            crate::operators::NemytskiiKind::Power,
            0.5,
            rational_int(3),
            0.0,
            TimeProfile::Exp {
                amplitude: 2.0,
                rate: 1.0,
            },
            1.0,
        )
        .unwrap();
        let reports = certify_g(&spec, &rational_int(3), 1, &small_settings());
        assert!(reports[1].passed, "worst {}", reports[1].worst_margin);
    }

    #[test]
    fn reports_are_seed_deterministic() {
        let sp = sine1(3);
        let family = principal(3);
        let a = check_coercivity(&family, &sp, &small_settings()).unwrap();
        let b = check_coercivity(&family, &sp, &small_settings()).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }
}
