//! Concrete operator families: degenerate diffusion with (p, delta)
//! regularization, superposition lower-order terms, and divergence-free
//! convection, composed into a time-dependent family with declared
//! structural constants.

use crate::error::{Error, Result};
use crate::profiles::TimeProfile;
use crate::spaces::{DiscreteField, QuadValues, SpaceKind, SpectralSpace};
use crate::verify::exponents::{rational_to_f64, Rational};
use nalgebra::DMatrix;
use num_traits::One;
use serde::{Deserialize, Serialize};

/// Dual vector: pairings of an operator value against the basis of the
/// field's level.
pub type DualVec = Vec<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NemytskiiKind {
    /// g(s) = a |s|^{r-2} s
    Power,
    /// g(s) = c s / (1 + s^2)
    Saturating,
    /// power + saturating
    Sum,
}

/// A certifiable superposition term g(t, x, s), restricted to a closed
/// registry of shapes so its sign and growth bounds are derivable from the
/// parameters alone.
#[derive(Debug, Clone)]
pub struct NemytskiiSpec {
    pub kind: NemytskiiKind,
    pub a: f64,
    pub r: Rational,
    pub c: f64,
    /// Amplitude of the additive source term c7(t) * b(x).
    pub c7: TimeProfile,
    /// Derived lower bound: g(t,x,s) s >= -c8(t) by construction.
    pub c8: TimeProfile,
    r_f64: f64,
}

impl NemytskiiSpec {
    pub fn power(a: f64, r: Rational) -> Result<Self> {
        Self::new(NemytskiiKind::Power, a, r, 0.0, TimeProfile::Zero, 1.0)
    }

    pub fn saturating(c: f64) -> Result<Self> {
        Self::new(
            NemytskiiKind::Saturating,
            0.0,
            Rational::one(),
            c,
            TimeProfile::Zero,
            1.0,
        )
    }

    pub fn sum(a: f64, r: Rational, c: f64) -> Result<Self> {
        Self::new(NemytskiiKind::Sum, a, r, c, TimeProfile::Zero, 1.0)
    }

    /// Build a spec and derive its sign lower bound c8. `horizon` bounds the
    /// time interval used when the source amplitude needs a supremum.
    pub fn new(
        kind: NemytskiiKind,
        a: f64,
        r: Rational,
        c: f64,
        c7: TimeProfile,
        horizon: f64,
    ) -> Result<Self> {
        let r_f64 = rational_to_f64(&r);
        if !(a.is_finite() && a >= 0.0) {
            return Err(Error::config(format!(
                "power coefficient a must be >= 0, got {a}"
            )));
        }
        if !c.is_finite() {
            return Err(Error::config("saturating coefficient must be finite"));
        }
        if matches!(kind, NemytskiiKind::Power | NemytskiiKind::Sum) && r_f64 < 1.0 {
            return Err(Error::config(format!(
                "growth exponent r must be >= 1, got {r_f64}"
            )));
        }
        if !c7.is_finite() || !c7.is_nonnegative() {
            return Err(Error::config(
                "source amplitude c7 must be a nonnegative profile",
            ));
        }
        let has_power = matches!(kind, NemytskiiKind::Power | NemytskiiKind::Sum) && a > 0.0;
        if !c7.is_zero() && !(has_power && r_f64 > 1.0) {
            return Err(Error::config(
                "a source term needs a power part with a > 0 and r > 1 to keep the sign bound",
            ));
        }

        // sign bound: the power part is nonnegative, the saturating part is
        // bounded below by -|c|, and the source term is absorbed into the
        // power part through Young's inequality:
        //   c7 |s| <= a |s|^r + kappa c7^{r'}
        let mut c8 = match kind {
            NemytskiiKind::Power => TimeProfile::Zero,
            NemytskiiKind::Saturating | NemytskiiKind::Sum => {
                TimeProfile::Constant { value: c.abs() }
            }
        };
        if !c7.is_zero() {
            let rp = r_f64 / (r_f64 - 1.0);
            let kappa = (r_f64 - 1.0) / r_f64 / (r_f64 * a).powf(1.0 / (r_f64 - 1.0));
            c8 = c8.plus(c7.powf_upper(rp, horizon).scaled(kappa));
        }

        Ok(NemytskiiSpec {
            kind,
            a,
            r,
            c,
            c7,
            c8,
            r_f64,
        })
    }

    pub fn r_f64(&self) -> f64 {
        self.r_f64
    }

    /// Pointwise value of g.
    pub fn eval(&self, t: f64, x: [f64; 2], dim: usize, s: f64) -> f64 {
        let mut g = 0.0;
        if matches!(self.kind, NemytskiiKind::Power | NemytskiiKind::Sum) {
            g += self.a * power_term(s, self.r_f64);
        }
        if matches!(self.kind, NemytskiiKind::Saturating | NemytskiiKind::Sum) {
            g += self.c * s / (1.0 + s * s);
        }
        if !self.c7.is_zero() {
            g += self.c7.eval(t) * source_shape(x, dim);
        }
        g
    }

    /// ds-derivative of g where it is smooth; used for analytic Jacobians.
    fn eval_derivative(&self, s: f64) -> f64 {
        let mut d = 0.0;
        if matches!(self.kind, NemytskiiKind::Power | NemytskiiKind::Sum) {
            let e = self.r_f64 - 2.0;
            d += if s == 0.0 {
                0.0
            } else {
                self.a * (self.r_f64 - 1.0) * s.abs().powf(e)
            };
        }
        if matches!(self.kind, NemytskiiKind::Saturating | NemytskiiKind::Sum) {
            let q = 1.0 + s * s;
            d += self.c * (1.0 - s * s) / (q * q);
        }
        d
    }

    fn has_analytic_jacobian(&self) -> bool {
        match self.kind {
            // |s|^{r-2} is unbounded near zero for r < 2
            NemytskiiKind::Power => self.r_f64 >= 2.0,
            NemytskiiKind::Saturating | NemytskiiKind::Sum => false,
        }
    }
}

fn power_term(s: f64, r: f64) -> f64 {
    if s == 0.0 {
        0.0
    } else {
        s.abs().powf(r - 1.0) * s.signum()
    }
}

/// Fixed smooth source shape with unit sup norm, vanishing on the boundary.
pub fn source_shape(x: [f64; 2], dim: usize) -> f64 {
    use std::f64::consts::PI;
    let mut b = (PI * x[0]).sin();
    if dim == 2 {
        b *= (PI * x[1]).sin();
    }
    b
}

/// Structural constants declared alongside an operator family: coercivity
/// lower bound c1 - c2(t) and dual growth bound c3, c4, q, c5(t).
#[derive(Debug, Clone)]
pub struct StructuralConstants {
    pub c1: f64,
    pub c2: TimeProfile,
    pub c3: f64,
    pub c4: f64,
    pub q: f64,
    pub c5: TimeProfile,
}

impl Default for StructuralConstants {
    fn default() -> Self {
        StructuralConstants {
            c1: 1.0,
            c2: TimeProfile::Zero,
            c3: 1.0,
            c4: 0.0,
            q: 0.0,
            c5: TimeProfile::Zero,
        }
    }
}

#[derive(Debug, Clone)]
pub enum OperatorPart {
    /// Degenerate diffusion with stress (delta^2 + |grad u|^2)^{(p-2)/2} grad u.
    Principal,
    /// Superposition term from the closed registry.
    LowerOrder(NemytskiiSpec),
    /// Quadratic transport -u (x) u : grad v on divergence-free fields.
    Convection,
}

/// Evaluatable family A(t) = sum of parts, with declared constants.
/// Immutable after construction; all applications are pure.
#[derive(Debug, Clone)]
pub struct OperatorFamily {
    p: f64,
    p_exact: Rational,
    delta: f64,
    parts: Vec<OperatorPart>,
    pub constants: StructuralConstants,
}

impl OperatorFamily {
    pub fn new(
        p_exact: Rational,
        delta: f64,
        parts: Vec<OperatorPart>,
        constants: StructuralConstants,
    ) -> Result<Self> {
        let p = rational_to_f64(&p_exact);
        if !(p.is_finite() && p > 1.0) {
            return Err(Error::config(format!(
                "growth exponent p must lie in (1,inf), got {p}"
            )));
        }
        if !(delta.is_finite() && delta >= 0.0) {
            return Err(Error::config(format!(
                "regularization delta must be >= 0, got {delta}"
            )));
        }
        if parts.is_empty() {
            return Err(Error::config("operator family needs at least one part"));
        }
        if !(constants.c1 > 0.0 && constants.c3 > 0.0) {
            return Err(Error::config("declared constants need c1 > 0 and c3 > 0"));
        }
        if !(constants.c4 >= 0.0 && constants.q >= 0.0) {
            return Err(Error::config("declared constants need c4 >= 0 and q >= 0"));
        }
        if !(constants.c2.is_nonnegative() && constants.c5.is_nonnegative()) {
            return Err(Error::config("profiles c2 and c5 must be nonnegative"));
        }
        Ok(OperatorFamily {
            p,
            p_exact,
            delta,
            parts,
            constants,
        })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn p_exact(&self) -> &Rational {
        &self.p_exact
    }

    pub fn p_conjugate(&self) -> f64 {
        self.p / (self.p - 1.0)
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn parts(&self) -> &[OperatorPart] {
        &self.parts
    }

    /// Structural compatibility with a space (transport needs the
    /// divergence-free basis, superposition terms the scalar one).
    pub fn validate_for_space(&self, space: &SpectralSpace) -> Result<()> {
        for part in &self.parts {
            match part {
                OperatorPart::Convection if space.kind() != SpaceKind::TorusDivFree => {
                    return Err(Error::Kind(
                        "convection needs a divergence-free vector space".into(),
                    ))
                }
                OperatorPart::LowerOrder(_) if space.kind() != SpaceKind::DirichletSine => {
                    return Err(Error::Kind(
                        "superposition terms are defined on scalar spaces".into(),
                    ))
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Pairings of A(t)u against the basis of u's level.
    pub fn apply(&self, space: &SpectralSpace, t: f64, u: &DiscreteField) -> Result<DualVec> {
        let qv = space.eval_on_quad(u)?;
        let mut out = vec![0.0; u.coeffs().len()];
        for part in &self.parts {
            self.accumulate_part(part, space, t, &qv, &mut out)?;
        }
        Ok(out)
    }

    fn accumulate_part(
        &self,
        part: &OperatorPart,
        space: &SpectralSpace,
        t: f64,
        qv: &QuadValues,
        out: &mut [f64],
    ) -> Result<()> {
        match part {
            OperatorPart::Principal => {
                accumulate_p_laplace(space, qv, self.p, self.delta, out);
            }
            OperatorPart::LowerOrder(spec) => {
                if space.kind() != SpaceKind::DirichletSine {
                    return Err(Error::Kind(
                        "superposition terms are defined on scalar spaces".into(),
                    ));
                }
                accumulate_nemytskii(space, qv, spec, t, out);
            }
            OperatorPart::Convection => {
                if space.kind() != SpaceKind::TorusDivFree {
                    return Err(Error::Kind(
                        "convection needs a divergence-free vector space".into(),
                    ));
                }
                accumulate_convection(space, qv, out);
            }
        }
        Ok(())
    }

    /// Analytic Jacobian of the pairing map, if every part supports one;
    /// callers fall back to finite differences otherwise.
    pub fn jacobian(
        &self,
        space: &SpectralSpace,
        t: f64,
        u: &DiscreteField,
    ) -> Result<Option<DMatrix<f64>>> {
        let _ = t;
        for part in &self.parts {
            let ok = match part {
                OperatorPart::Principal => true,
                OperatorPart::LowerOrder(spec) => spec.has_analytic_jacobian() || spec.a == 0.0,
                OperatorPart::Convection => false,
            };
            if !ok {
                return Ok(None);
            }
        }
        let n = u.coeffs().len();
        let qv = space.eval_on_quad(u)?;
        let mut jac = DMatrix::zeros(n, n);
        for part in &self.parts {
            match part {
                OperatorPart::Principal => {
                    p_laplace_jacobian_into(space, &qv, self.p, self.delta, &mut jac)
                }
                OperatorPart::LowerOrder(spec) => {
                    nemytskii_jacobian_into(space, &qv, spec, &mut jac)
                }
                OperatorPart::Convection => unreachable!("filtered above"),
            }
        }
        Ok(Some(jac))
    }
}

/// Pairings of the degenerate diffusion operator against the basis of u's
/// level. delta = 0 reproduces the pure p-Laplacian with the convention
/// that the stress vanishes where the gradient does.
pub fn p_laplace_apply(
    space: &SpectralSpace,
    u: &DiscreteField,
    p: f64,
    delta: f64,
) -> Result<DualVec> {
    if !(p.is_finite() && p > 1.0) {
        return Err(Error::config(format!(
            "growth exponent p must lie in (1,inf), got {p}"
        )));
    }
    if !(delta.is_finite() && delta >= 0.0) {
        return Err(Error::config(format!(
            "regularization delta must be >= 0, got {delta}"
        )));
    }
    let qv = space.eval_on_quad(u)?;
    let mut out = vec![0.0; u.coeffs().len()];
    accumulate_p_laplace(space, &qv, p, delta, &mut out);
    Ok(out)
}

fn stress_factor(g2: f64, p: f64, delta: f64) -> f64 {
    let base = delta * delta + g2;
    if base == 0.0 {
        0.0
    } else {
        base.powf(0.5 * (p - 2.0))
    }
}

fn accumulate_p_laplace(
    space: &SpectralSpace,
    qv: &QuadValues,
    p: f64,
    delta: f64,
    out: &mut [f64],
) {
    let gd = qv.ncomp * qv.dim;
    let weights = space.weights();
    // per-node stress tensor, then one pass over the basis
    let mut stress = vec![0.0; weights.len() * gd];
    for (q, &w) in weights.iter().enumerate() {
        let g = &qv.grads[q * gd..(q + 1) * gd];
        let g2: f64 = g.iter().map(|x| x * x).sum();
        let f = stress_factor(g2, p, delta) * w;
        for (sd, &gv) in stress[q * gd..(q + 1) * gd].iter_mut().zip(g) {
            *sd = f * gv;
        }
    }
    for (k, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for q in 0..weights.len() {
            let phi = space.basis_grad(k, q);
            let s = &stress[q * gd..(q + 1) * gd];
            acc += s.iter().zip(phi).map(|(a, b)| a * b).sum::<f64>();
        }
        *o += acc;
    }
}

fn p_laplace_jacobian_into(
    space: &SpectralSpace,
    qv: &QuadValues,
    p: f64,
    delta: f64,
    jac: &mut DMatrix<f64>,
) {
    let gd = qv.ncomp * qv.dim;
    let n = jac.nrows();
    let weights = space.weights();
    for (q, &w) in weights.iter().enumerate() {
        let g = &qv.grads[q * gd..(q + 1) * gd];
        let g2: f64 = g.iter().map(|x| x * x).sum();
        let base = delta * delta + g2;
        let (f0, f1) = if base == 0.0 {
            (0.0, 0.0)
        } else {
            (
                w * base.powf(0.5 * (p - 2.0)),
                w * (p - 2.0) * base.powf(0.5 * (p - 4.0)),
            )
        };
        if f0 == 0.0 && f1 == 0.0 {
            continue;
        }
        // cache G : grad phi_k per basis function
        let mut gdot = vec![0.0; n];
        for (k, gd_k) in gdot.iter_mut().enumerate() {
            let phi = space.basis_grad(k, q);
            *gd_k = g.iter().zip(phi).map(|(a, b)| a * b).sum();
        }
        for j in 0..n {
            let phij = space.basis_grad(j, q);
            for k in 0..n {
                let phik = space.basis_grad(k, q);
                let dot: f64 = phij.iter().zip(phik).map(|(a, b)| a * b).sum();
                jac[(j, k)] += f0 * dot + f1 * gdot[j] * gdot[k];
            }
        }
    }
}

/// Pairings of the superposition operator u -> g(t, ., u(.)).
pub fn nemytskii_apply(
    space: &SpectralSpace,
    u: &DiscreteField,
    spec: &NemytskiiSpec,
    t: f64,
) -> Result<DualVec> {
    if space.kind() != SpaceKind::DirichletSine {
        return Err(Error::Kind(
            "superposition terms are defined on scalar spaces".into(),
        ));
    }
    let qv = space.eval_on_quad(u)?;
    let mut out = vec![0.0; u.coeffs().len()];
    accumulate_nemytskii(space, &qv, spec, t, &mut out);
    Ok(out)
}

fn accumulate_nemytskii(
    space: &SpectralSpace,
    qv: &QuadValues,
    spec: &NemytskiiSpec,
    t: f64,
    out: &mut [f64],
) {
    let weights = space.weights();
    let nodes = space.nodes();
    let dim = space.dim();
    let mut gvals = vec![0.0; weights.len()];
    for (q, gv) in gvals.iter_mut().enumerate() {
        *gv = weights[q] * spec.eval(t, nodes[q], dim, qv.values[q]);
    }
    for (k, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (q, &gv) in gvals.iter().enumerate() {
            acc += gv * space.basis_value(k, q)[0];
        }
        *o += acc;
    }
}

fn nemytskii_jacobian_into(
    space: &SpectralSpace,
    qv: &QuadValues,
    spec: &NemytskiiSpec,
    jac: &mut DMatrix<f64>,
) {
    let weights = space.weights();
    let n = jac.nrows();
    for (q, &w) in weights.iter().enumerate() {
        let d = w * spec.eval_derivative(qv.values[q]);
        if d == 0.0 {
            continue;
        }
        for j in 0..n {
            let vj = space.basis_value(j, q)[0];
            for k in 0..n {
                jac[(j, k)] += d * vj * space.basis_value(k, q)[0];
            }
        }
    }
}

/// Pairings of the transport operator -u (x) u : grad v.
pub fn convection_apply(space: &SpectralSpace, u: &DiscreteField) -> Result<DualVec> {
    if space.kind() != SpaceKind::TorusDivFree {
        return Err(Error::Kind(
            "convection needs a divergence-free vector space".into(),
        ));
    }
    let qv = space.eval_on_quad(u)?;
    let mut out = vec![0.0; u.coeffs().len()];
    accumulate_convection(space, &qv, out.as_mut_slice());
    Ok(out)
}

fn accumulate_convection(space: &SpectralSpace, qv: &QuadValues, out: &mut [f64]) {
    let weights = space.weights();
    // weighted outer product u_i u_j per node
    let mut outer = vec![0.0; weights.len() * 4];
    for (q, &w) in weights.iter().enumerate() {
        let u = &qv.values[q * 2..q * 2 + 2];
        for i in 0..2 {
            for j in 0..2 {
                outer[q * 4 + i * 2 + j] = w * u[i] * u[j];
            }
        }
    }
    for (k, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for q in 0..weights.len() {
            let gphi = space.basis_grad(k, q); // [comp][dir]
            let op = &outer[q * 4..q * 4 + 4];
            // contraction u_i u_j d_i phi_j with grad layout [j][i]
            acc += op[0] * gphi[0] + op[1] * gphi[2] + op[2] * gphi[1] + op[3] * gphi[3];
        }
        *o -= acc;
    }
}

/// Right-hand side profiles: zero, a single forced mode, or a separable
/// source sigma(t) b(x) with the fixed smooth shape b.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum RhsSpec {
    Zero,
    Mode { index: usize, profile: TimeProfile },
    Shape { profile: TimeProfile },
}

/// Pairings of f(t) against the basis of the given level. Modes beyond the
/// level pair to zero by orthogonality.
pub fn assemble_rhs(
    space: &SpectralSpace,
    spec: &RhsSpec,
    t: f64,
    level: usize,
) -> Result<DualVec> {
    let len = space.basis_len_at(level)?;
    match spec {
        RhsSpec::Zero => Ok(vec![0.0; len]),
        RhsSpec::Mode { index, profile } => {
            let mut out = vec![0.0; len];
            if *index < len {
                out[*index] = profile.eval(t);
            }
            Ok(out)
        }
        RhsSpec::Shape { profile } => {
            if space.kind() != SpaceKind::DirichletSine {
                return Err(Error::Kind("the separable source shape is scalar".into()));
            }
            let amp = profile.eval(t);
            let mut out = vec![0.0; len];
            let nodes = space.nodes();
            let dim = space.dim();
            for (k, o) in out.iter_mut().enumerate() {
                let mut acc = 0.0;
                for (q, &w) in space.weights().iter().enumerate() {
                    acc += w * source_shape(nodes[q], dim) * space.basis_value(k, q)[0];
                }
                *o = amp * acc;
            }
            Ok(out)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spaces::{default_quad_order, make_space};
    use crate::verify::exponents::rational_int;
    use proptest::prelude::*;
    use std::f64::consts::PI;

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

    fn torus(level: usize) -> SpectralSpace {
        make_space(
            SpaceKind::TorusDivFree,
            2,
            level,
            2.0,
            default_quad_order(SpaceKind::TorusDivFree, level),
        )
        .unwrap()
    }

    /// Composite Simpson rule, the independent oracle for the nonlinear
    /// integrals below.
    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let n = n + n % 2;
        let h = (b - a) / n as f64;
        let mut acc = f(a) + f(b);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * f(a + i as f64 * h);
        }
        acc * h / 3.0
    }

    #[test]
    fn laplace_case_on_first_mode() {
        let sp = sine1(2);
        let u = sp.basis_field(0).unwrap();
        let pairings = p_laplace_apply(&sp, &u, 2.0, 0.0).unwrap();
        assert!((pairings[0] - PI * PI).abs() < 1e-10);
        assert!(pairings[1].abs() < 1e-10);
    }

    #[test]
    fn planar_mode_has_doubled_eigenvalue() {
        // on the unit square the (1,1) mode has gradient energy 2 pi^2
        let sp = make_space(SpaceKind::DirichletSine, 2, 2, 2.0, 24).unwrap();
        let u = sp.basis_field(0).unwrap();
        let pairings = p_laplace_apply(&sp, &u, 2.0, 0.0).unwrap();
        assert!((pairings[0] - 2.0 * PI * PI).abs() < 1e-9);
        for v in &pairings[1..] {
            assert!(v.abs() < 1e-9);
        }
    }

    #[test]
    fn zero_field_maps_to_zero() {
        let sp = sine1(2);
        let z = sp.zero_field(2).unwrap();
        for p in [1.5, 3.0, 4.0] {
            let out = p_laplace_apply(&sp, &z, p, 0.0).unwrap();
            assert!(out.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn cubic_stress_matches_simpson_oracle() {
        // kinked integrand |pi cos(pi x)|^3 needs a fine rule to hit the
        // oracle; u = sin(pi x)
        let sp = make_space(SpaceKind::DirichletSine, 1, 1, 2.0, 400).unwrap();
        let u = sp
            .field_from_coeffs(1, vec![1.0 / std::f64::consts::SQRT_2])
            .unwrap();
        let pairings = p_laplace_apply(&sp, &u, 3.0, 0.0).unwrap();
        let self_pairing = pairings[0] * u.coeffs()[0];
        let oracle = simpson(|x| (PI * (PI * x).cos()).abs().powi(3), 0.0, 1.0, 200_000);
        assert!((oracle - 4.0 * PI * PI / 3.0).abs() < 1e-9, "oracle sanity");
        assert!(
            (self_pairing - oracle).abs() < 1e-8,
            "{self_pairing} vs {oracle}"
        );
        assert!(p_laplace_apply(&sp, &u, 1.0, 0.0).is_err());
        assert!(p_laplace_apply(&sp, &u, 2.0, -0.5).is_err());
    }

    #[test]
    fn power_superposition_matches_quartic_integral() {
        let sp = sine1(1);
        let spec = NemytskiiSpec::power(1.0, rational_int(4)).unwrap();
        // u = sin(pi x): g(u) u = sin^4, integral 3/8
        let u = sp
            .field_from_coeffs(1, vec![1.0 / std::f64::consts::SQRT_2])
            .unwrap();
        let pairings = nemytskii_apply(&sp, &u, &spec, 0.0).unwrap();
        let self_pairing = pairings[0] * u.coeffs()[0];
        assert!((self_pairing - 0.375).abs() < 1e-10, "{self_pairing}");

        let z = sp.zero_field(1).unwrap();
        let out = nemytskii_apply(&sp, &z, &spec, 0.0).unwrap();
        assert!(out.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn saturating_superposition_bounded_by_one() {
        let sp = sine1(1);
        let spec = NemytskiiSpec::saturating(1.0).unwrap();
        let u = sp.basis_field(0).unwrap();
        let pairings = nemytskii_apply(&sp, &u, &spec, 0.0).unwrap();
        let self_pairing = pairings[0];
        let oracle = simpson(
            |x| {
                let v = std::f64::consts::SQRT_2 * (PI * x).sin();
                v * v / (1.0 + v * v)
            },
            0.0,
            1.0,
            100_000,
        );
        assert!((self_pairing - oracle).abs() < 1e-8);
        assert!(self_pairing > 0.0 && self_pairing < 1.0);
        assert_eq!(spec.c8.eval(0.3), 1.0);
    }

    #[test]
    fn source_term_requires_coercive_power() {
        let profile = TimeProfile::Constant { value: 1.0 };
        assert!(NemytskiiSpec::new(
            NemytskiiKind::Saturating,
            0.0,
            Rational::one(),
            1.0,
            profile.clone(),
            1.0
        )
        .is_err());
        let ok = NemytskiiSpec::new(
            NemytskiiKind::Power,
            2.0,
            rational_int(3),
            0.0,
            profile,
            1.0,
        )
        .unwrap();
        // Young bound: sup_s (|s| - 2|s|^3) attained at s = 1/sqrt(6)
        let expect = (3.0f64 - 1.0) / 3.0 / (3.0 * 2.0f64).powf(0.5);
        assert!((ok.c8.eval(0.0) - expect).abs() < 1e-12);
    }

    #[test]
    fn taylor_green_transport_cancels() {
        let sp = torus(1);
        // (sin x cos y, -cos x sin y) expanded in the normalized basis
        let mut coeffs = vec![0.0; sp.basis_len()];
        for (m, mode) in sp.modes().iter().enumerate() {
            if mode.wave() == [1, 1] && m % 2 == 1 {
                coeffs[m] = -PI;
            }
            if mode.wave() == [1, -1] && m % 2 == 1 {
                coeffs[m] = PI;
            }
        }
        let u = sp.field_from_coeffs(1, coeffs).unwrap();
        assert!((sp.norm_h(&u).unwrap() - PI * std::f64::consts::SQRT_2).abs() < 1e-12);
        let pairings = convection_apply(&sp, &u).unwrap();
        let self_pairing: f64 = pairings.iter().zip(u.coeffs()).map(|(a, b)| a * b).sum();
        assert!(self_pairing.abs() < 1e-11, "{self_pairing}");

        let z = sp.zero_field(1).unwrap();
        assert!(convection_apply(&sp, &z).unwrap().iter().all(|&v| v == 0.0));
        let scalar = sine1(2);
        let su = scalar.basis_field(0).unwrap();
        assert!(matches!(
            convection_apply(&scalar, &su),
            Err(Error::Kind(_))
        ));
    }

    #[test]
    fn family_is_additive_over_parts() {
        let sp = sine1(2);
        let u = sp.basis_field(0).unwrap();
        let spec = NemytskiiSpec::power(1.0, rational_int(4)).unwrap();
        let only_principal = OperatorFamily::new(
            rational_int(2),
            0.0,
            vec![OperatorPart::Principal],
            StructuralConstants::default(),
        )
        .unwrap();
        let combined = OperatorFamily::new(
            rational_int(2),
            0.0,
            vec![
                OperatorPart::Principal,
                OperatorPart::LowerOrder(spec.clone()),
            ],
            StructuralConstants::default(),
        )
        .unwrap();
        let a = only_principal.apply(&sp, 0.0, &u).unwrap();
        let b = nemytskii_apply(&sp, &u, &spec, 0.0).unwrap();
        let c = combined.apply(&sp, 0.0, &u).unwrap();
        for k in 0..a.len() {
            assert!((c[k] - a[k] - b[k]).abs() < 1e-12);
        }
        assert!(
            OperatorFamily::new(rational_int(2), 0.0, vec![], StructuralConstants::default())
                .is_err()
        );
    }

    #[test]
    fn rhs_profiles() {
        let sp = sine1(3);
        let zero = assemble_rhs(&sp, &RhsSpec::Zero, 0.5, 3).unwrap();
        assert!(zero.iter().all(|&v| v == 0.0));

        let constant = RhsSpec::Mode {
            index: 0,
            profile: TimeProfile::Constant { value: 1.0 },
        };
        assert_eq!(
            assemble_rhs(&sp, &constant, 3.0, 3).unwrap(),
            vec![1.0, 0.0, 0.0]
        );

        let decaying = RhsSpec::Mode {
            index: 1,
            profile: TimeProfile::Exp {
                amplitude: 1.0,
                rate: 1.0,
            },
        };
        let v = assemble_rhs(&sp, &decaying, 1.0, 3).unwrap();
        assert!((v[1] - (-1.0f64).exp()).abs() < 1e-15);

        // mode outside the level pairs to zero
        let high = RhsSpec::Mode {
            index: 5,
            profile: TimeProfile::Constant { value: 2.0 },
        };
        assert!(assemble_rhs(&sp, &high, 0.0, 2)
            .unwrap()
            .iter()
            .all(|&v| v == 0.0));

        // separable shape: first sine mode carries 1/sqrt(2)
        let shape = RhsSpec::Shape {
            profile: TimeProfile::Constant { value: 1.0 },
        };
        let v = assemble_rhs(&sp, &shape, 0.0, 3).unwrap();
        assert!((v[0] - 1.0 / std::f64::consts::SQRT_2).abs() < 1e-12);
        assert!(v[1].abs() < 1e-12);
    }

    #[test]
    fn analytic_jacobian_matches_finite_differences() {
        let sp = sine1(3);
        let family = OperatorFamily::new(
            rational_int(3),
            0.1,
            vec![
                OperatorPart::Principal,
                OperatorPart::LowerOrder(NemytskiiSpec::power(0.5, rational_int(4)).unwrap()),
            ],
            StructuralConstants::default(),
        )
        .unwrap();
        let u = sp.field_from_coeffs(3, vec![0.4, -0.2, 0.1]).unwrap();
        let jac = family.jacobian(&sp, 0.0, &u).unwrap().unwrap();
        let base = family.apply(&sp, 0.0, &u).unwrap();
        let h = 1e-7;
        for k in 0..3 {
            let mut c = u.coeffs().to_vec();
            c[k] += h;
            let up = sp.field_from_coeffs(3, c).unwrap();
            let fp = family.apply(&sp, 0.0, &up).unwrap();
            for j in 0..3 {
                let fd = (fp[j] - base[j]) / h;
                assert!(
                    (jac[(j, k)] - fd).abs() < 1e-5 * (1.0 + fd.abs()),
                    "({j},{k}): {} vs {}",
                    jac[(j, k)],
                    fd
                );
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn stress_is_homogeneous_of_degree_p_minus_one(
            c in prop::collection::vec(-2.0f64..2.0, 3),
            lambda in 0.1f64..10.0,
            p_idx in 0usize..3,
        ) {
            let p = [1.5, 2.0, 3.0][p_idx];
            let sp = sine1(3);
            let u = sp.field_from_coeffs(3, c.clone()).unwrap();
            let scaled = sp.field_from_coeffs(3, c.iter().map(|x| x * lambda).collect()).unwrap();
            let base = p_laplace_apply(&sp, &u, p, 0.0).unwrap();
            let big = p_laplace_apply(&sp, &scaled, p, 0.0).unwrap();
            let factor = lambda.powf(p - 1.0);
            for k in 0..3 {
                prop_assert!((big[k] - factor * base[k]).abs() <= 1e-9 * (1.0 + base[k].abs() * factor));
            }
        }

        #[test]
        fn transport_is_quadratically_homogeneous(
            c in prop::collection::vec(-1.0f64..1.0, 8),
            lambda in 0.1f64..4.0,
        ) {
            let sp = torus(1);
            let u = sp.field_from_coeffs(1, c.clone()).unwrap();
            let scaled = sp.field_from_coeffs(1, c.iter().map(|x| x * lambda).collect()).unwrap();
            let base = convection_apply(&sp, &u).unwrap();
            let big = convection_apply(&sp, &scaled).unwrap();
            for k in 0..base.len() {
                prop_assert!((big[k] - lambda * lambda * base[k]).abs() <= 1e-10 * (1.0 + base[k].abs()));
            }
        }

        #[test]
        fn pairing_against_field_matches_direct_quadrature(
            cu in prop::collection::vec(-1.5f64..1.5, 4),
            cv in prop::collection::vec(-1.5f64..1.5, 4),
        ) {
            // dual route: sum_k <Bu, phi_k> v_k versus direct quadrature of
            // the stress against grad v
            let sp = sine1(4);
            let u = sp.field_from_coeffs(4, cu).unwrap();
            let v = sp.field_from_coeffs(4, cv).unwrap();
            let p = 3.0;
            let pairings = p_laplace_apply(&sp, &u, p, 0.0).unwrap();
            let via_basis: f64 = pairings.iter().zip(v.coeffs()).map(|(a, b)| a * b).sum();
            let qu = sp.eval_on_quad(&u).unwrap();
            let qvv = sp.eval_on_quad(&v).unwrap();
            let mut direct = 0.0;
            for (q, &w) in sp.weights().iter().enumerate() {
                let gu = qu.grads[q];
                let gv = qvv.grads[q];
                direct += w * gu.abs().powf(p - 2.0) * gu * gv;
            }
            prop_assert!((via_basis - direct).abs() <= 1e-10 * (1.0 + direct.abs()));
        }

        #[test]
        fn principal_part_is_monotone_spot_check(
            cu in prop::collection::vec(-2.0f64..2.0, 3),
            cv in prop::collection::vec(-2.0f64..2.0, 3),
            p_idx in 0usize..3,
            delta_idx in 0usize..2,
        ) {
            let p = [1.5, 2.0, 3.0][p_idx];
            let delta = [0.0, 0.1][delta_idx];
            let sp = sine1(3);
            let u = sp.field_from_coeffs(3, cu.clone()).unwrap();
            let v = sp.field_from_coeffs(3, cv.clone()).unwrap();
            let bu = p_laplace_apply(&sp, &u, p, delta).unwrap();
            let bv = p_laplace_apply(&sp, &v, p, delta).unwrap();
            let gap: f64 = (0..3).map(|k| (bu[k] - bv[k]) * (cu[k] - cv[k])).sum();
            prop_assert!(gap >= -1e-10);
        }
    }
}
