//! Discrete trial spaces with truncation projections.
//!
//! Two families are supported:
//! - `DirichletSine`: L2-orthonormal sine basis on (0,1)^d, d in {1,2},
//!   vanishing on the boundary;
//! - `TorusDivFree`: L2-orthonormal divergence-free trigonometric fields on
//!   the 2d torus [0,2pi)^2.
//!
//! Basis enumeration is nested: the level-n basis is a prefix of the
//! level-(n+1) basis, so truncating a coefficient vector is exactly the
//! orthogonal projection onto the coarser space. That makes the projections
//! self-adjoint in the L2 pairing and contractions in every H^s weight, with
//! norm bound 1 independent of the level.

use crate::error::{Error, Result};
use crate::quadrature::{gauss_legendre_unit, uniform_periodic};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SpaceKind {
    #[serde(rename = "dirichlet-sine")]
    DirichletSine,
    #[serde(rename = "torus-divfree")]
    TorusDivFree,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Trig {
    Cos,
    Sin,
}

/// One basis function: an integer wavevector plus, on the torus, the choice
/// of cosine or sine carrier.
#[derive(Debug, Clone, Copy)]
pub struct Mode {
    wave: [i64; 2],
    trig: Trig,
    /// Squared L2 norm of the gradient of the unit mode.
    eigenvalue: f64,
}

impl Mode {
    pub fn wave(&self) -> [i64; 2] {
        self.wave
    }

    pub fn eigenvalue(&self) -> f64 {
        self.eigenvalue
    }

    /// True when the carrier is the sine wave (always true for Dirichlet
    /// bases; distinguishes the paired torus modes).
    pub fn is_sin_carrier(&self) -> bool {
        matches!(self.trig, Trig::Sin)
    }
}

/// Coefficient vector of a function in the level-`level` subspace of a
/// [`SpectralSpace`].
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteField {
    space_id: u64,
    level: usize,
    coeffs: Vec<f64>,
}

impl DiscreteField {
    pub fn level(&self) -> usize {
        self.level
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }
}

/// Values and gradients of a field at the quadrature nodes.
///
/// Layouts: `values[node * ncomp + c]` and
/// `grads[(node * ncomp + c) * dim + d]`.
#[derive(Debug, Clone)]
pub struct QuadValues {
    pub ncomp: usize,
    pub dim: usize,
    pub values: Vec<f64>,
    pub grads: Vec<f64>,
}

/// A level-n trial space with basis, quadrature grid and norm machinery.
///
/// Immutable after construction; all operations are pure.
#[derive(Debug, Clone)]
pub struct SpectralSpace {
    kind: SpaceKind,
    dim: usize,
    level: usize,
    s: f64,
    quad_order: usize,
    ncomp: usize,
    modes: Vec<Mode>,
    nodes: Vec<[f64; 2]>,
    weights: Vec<f64>,
    values: Vec<f64>,
    grads: Vec<f64>,
    id: u64,
}

/// Upper bound on table size (doubles), guarding pathological configs.
const MAX_TABLE_ENTRIES: usize = 1 << 25;

/// Build a trial space. `quad_order` is the number of quadrature points per
/// direction and must be at least `2 * level + 2`.
pub fn make_space(
    kind: SpaceKind,
    dim: usize,
    level: usize,
    s: f64,
    quad_order: usize,
) -> Result<SpectralSpace> {
    if level < 1 {
        return Err(Error::config("level must be at least 1"));
    }
    if level > 64 {
        return Err(Error::config(format!(
            "level {level} exceeds the supported maximum 64"
        )));
    }
    if !(s.is_finite() && s > 0.0) {
        return Err(Error::config(format!(
            "smoothness index s must be positive, got {s}"
        )));
    }
    if quad_order < 2 * level + 2 {
        return Err(Error::config(format!(
            "quad_order {quad_order} below the oversampling floor {}",
            2 * level + 2
        )));
    }
    if quad_order > 4096 {
        return Err(Error::config(format!(
            "quad_order {quad_order} exceeds the supported maximum 4096"
        )));
    }
    match (kind, dim) {
        (SpaceKind::DirichletSine, 1 | 2) => {}
        (SpaceKind::TorusDivFree, 2) => {}
        _ => {
            return Err(Error::config(format!(
                "unsupported combination kind={kind:?}, dim={dim}"
            )))
        }
    }

    let ncomp = match kind {
        SpaceKind::DirichletSine => 1,
        SpaceKind::TorusDivFree => 2,
    };
    let modes = enumerate_modes(kind, dim, level);
    let (nodes, weights) = tensor_grid(kind, dim, quad_order);
    let entries = modes.len() * nodes.len() * ncomp * (1 + dim);
    if entries > MAX_TABLE_ENTRIES {
        return Err(Error::config(format!(
            "basis tables would need {entries} entries; reduce level or quad_order"
        )));
    }

    let mut space = SpectralSpace {
        kind,
        dim,
        level,
        s,
        quad_order,
        ncomp,
        modes,
        nodes,
        weights,
        values: Vec::new(),
        grads: Vec::new(),
        id: 0,
    };
    space.id = space.structural_id();
    space.fill_tables();
    Ok(space)
}

/// Default quadrature order used by the configuration layer.
///
/// Sine spaces get enough Gauss points to integrate every degree-2 product
/// of basis modes to machine precision; torus spaces get a dealiased grid
/// for the quadratic convection term.
pub fn default_quad_order(kind: SpaceKind, level: usize) -> usize {
    match kind {
        SpaceKind::DirichletSine => 4 * level + 16,
        SpaceKind::TorusDivFree => 3 * level + 4,
    }
}

fn enumerate_modes(kind: SpaceKind, dim: usize, level: usize) -> Vec<Mode> {
    let mut modes = Vec::new();
    match (kind, dim) {
        (SpaceKind::DirichletSine, 1) => {
            for k in 1..=level as i64 {
                modes.push(Mode {
                    wave: [k, 0],
                    trig: Trig::Sin,
                    eigenvalue: (k * k) as f64 * PI * PI,
                });
            }
        }
        (SpaceKind::DirichletSine, 2) => {
            // shells by max(k1,k2) keep coarse bases as prefixes of fine ones
            for shell in 1..=level as i64 {
                let mut pairs = Vec::new();
                for k1 in 1..=shell {
                    for k2 in 1..=shell {
                        if k1.max(k2) == shell {
                            pairs.push([k1, k2]);
                        }
                    }
                }
                pairs.sort();
                for wave in pairs {
                    modes.push(Mode {
                        wave,
                        trig: Trig::Sin,
                        eigenvalue: (wave[0] * wave[0] + wave[1] * wave[1]) as f64 * PI * PI,
                    });
                }
            }
        }
        (SpaceKind::TorusDivFree, 2) => {
            for shell in 1..=level as i64 {
                let mut reps = Vec::new();
                for k1 in -shell..=shell {
                    for k2 in -shell..=shell {
                        if k1.abs().max(k2.abs()) != shell {
                            continue;
                        }
                        // one representative per +-k pair
                        if k1 > 0 || (k1 == 0 && k2 > 0) {
                            reps.push([k1, k2]);
                        }
                    }
                }
                reps.sort();
                for wave in reps {
                    let ev = (wave[0] * wave[0] + wave[1] * wave[1]) as f64;
                    modes.push(Mode {
                        wave,
                        trig: Trig::Cos,
                        eigenvalue: ev,
                    });
                    modes.push(Mode {
                        wave,
                        trig: Trig::Sin,
                        eigenvalue: ev,
                    });
                }
            }
        }
        _ => unreachable!("validated in make_space"),
    }
    modes
}

fn tensor_grid(kind: SpaceKind, dim: usize, quad_order: usize) -> (Vec<[f64; 2]>, Vec<f64>) {
    let (x1, w1) = match kind {
        SpaceKind::DirichletSine => gauss_legendre_unit(quad_order),
        SpaceKind::TorusDivFree => uniform_periodic(quad_order),
    };
    if dim == 1 {
        let nodes = x1.iter().map(|&x| [x, 0.0]).collect();
        return (nodes, w1);
    }
    let mut nodes = Vec::with_capacity(quad_order * quad_order);
    let mut weights = Vec::with_capacity(quad_order * quad_order);
    for (i, &xi) in x1.iter().enumerate() {
        for (j, &xj) in x1.iter().enumerate() {
            nodes.push([xi, xj]);
            weights.push(w1[i] * w1[j]);
        }
    }
    (nodes, weights)
}

impl SpectralSpace {
    fn structural_id(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut mix = |v: u64| {
            h ^= v;
            h = h.wrapping_mul(0x1000_0000_01b3);
        };
        mix(match self.kind {
            SpaceKind::DirichletSine => 1,
            SpaceKind::TorusDivFree => 2,
        });
        mix(self.dim as u64);
        mix(self.level as u64);
        mix(self.s.to_bits());
        mix(self.quad_order as u64);
        h
    }

    fn fill_tables(&mut self) {
        let nnode = self.nodes.len();
        let nmode = self.modes.len();
        self.values = vec![0.0; nmode * nnode * self.ncomp];
        self.grads = vec![0.0; nmode * nnode * self.ncomp * self.dim];
        for (m, mode) in self.modes.iter().enumerate() {
            for (q, node) in self.nodes.iter().enumerate() {
                let vbase = (m * nnode + q) * self.ncomp;
                let gbase = vbase * self.dim;
                match self.kind {
                    SpaceKind::DirichletSine => {
                        let (v, g) = sine_mode_eval(self.dim, mode.wave, *node);
                        self.values[vbase] = v;
                        self.grads[gbase..gbase + self.dim].copy_from_slice(&g[..self.dim]);
                    }
                    SpaceKind::TorusDivFree => {
                        let (v, g) = torus_mode_eval(mode, *node);
                        self.values[vbase] = v[0];
                        self.values[vbase + 1] = v[1];
                        for (c, row) in g.iter().enumerate() {
                            self.grads[gbase + c * 2..gbase + c * 2 + 2].copy_from_slice(row);
                        }
                    }
                }
            }
        }
    }

    pub fn kind(&self) -> SpaceKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn smoothness(&self) -> f64 {
        self.s
    }

    pub fn quad_order(&self) -> usize {
        self.quad_order
    }

    /// Number of field components (1 scalar, 2 on the torus).
    pub fn ncomp(&self) -> usize {
        self.ncomp
    }

    pub fn basis_len(&self) -> usize {
        self.modes.len()
    }

    /// Basis size of the level-`level` subspace.
    pub fn basis_len_at(&self, level: usize) -> Result<usize> {
        if level > self.level {
            return Err(Error::Level(format!(
                "level {level} exceeds the space level {}",
                self.level
            )));
        }
        Ok(match (self.kind, self.dim) {
            (SpaceKind::DirichletSine, 1) => level,
            (SpaceKind::DirichletSine, _) => level * level,
            (SpaceKind::TorusDivFree, _) => 4 * level * (level + 1),
        })
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[[f64; 2]] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Components of basis function `m` at node `q`.
    pub fn basis_value(&self, m: usize, q: usize) -> &[f64] {
        let base = (m * self.nodes.len() + q) * self.ncomp;
        &self.values[base..base + self.ncomp]
    }

    /// Gradient of basis function `m` at node `q`, component-major.
    pub fn basis_grad(&self, m: usize, q: usize) -> &[f64] {
        let base = (m * self.nodes.len() + q) * self.ncomp * self.dim;
        &self.grads[base..base + self.ncomp * self.dim]
    }

    // ----- field construction -----

    pub fn field_from_coeffs(&self, level: usize, coeffs: Vec<f64>) -> Result<DiscreteField> {
        let expect = self.basis_len_at(level)?;
        if coeffs.len() != expect {
            return Err(Error::Level(format!(
                "coefficient vector has length {}, level {level} needs {expect}",
                coeffs.len()
            )));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::value("non-finite coefficient"));
        }
        Ok(DiscreteField {
            space_id: self.id,
            level,
            coeffs,
        })
    }

    pub fn zero_field(&self, level: usize) -> Result<DiscreteField> {
        Ok(DiscreteField {
            space_id: self.id,
            level,
            coeffs: vec![0.0; self.basis_len_at(level)?],
        })
    }

    /// The `index`-th basis function as a field at the full space level.
    pub fn basis_field(&self, index: usize) -> Result<DiscreteField> {
        if index >= self.basis_len() {
            return Err(Error::Level(format!(
                "basis index {index} out of range for {} modes",
                self.basis_len()
            )));
        }
        let mut coeffs = vec![0.0; self.basis_len()];
        coeffs[index] = 1.0;
        Ok(DiscreteField {
            space_id: self.id,
            level: self.level,
            coeffs,
        })
    }

    fn check_field(&self, u: &DiscreteField) -> Result<()> {
        if u.space_id != self.id {
            return Err(Error::SpaceMismatch(
                "field does not belong to this space".into(),
            ));
        }
        Ok(())
    }

    /// Truncate a field to `target_level` (the orthogonal projection onto
    /// the coarser subspace).
    pub fn project(&self, u: &DiscreteField, target_level: usize) -> Result<DiscreteField> {
        self.check_field(u)?;
        if target_level > u.level {
            return Err(Error::Level(format!(
                "cannot project a level-{} field up to level {target_level}",
                u.level
            )));
        }
        let len = self.basis_len_at(target_level)?;
        Ok(DiscreteField {
            space_id: self.id,
            level: target_level,
            coeffs: u.coeffs[..len].to_vec(),
        })
    }

    /// Re-tag a field from a structurally compatible coarser space as a
    /// member of this space, zero-padding to the full level. Used by level
    /// studies, where the coarse basis is a prefix of the fine one.
    pub fn embed(&self, u: &DiscreteField, from: &SpectralSpace) -> Result<DiscreteField> {
        if from.kind != self.kind || from.dim != self.dim {
            return Err(Error::SpaceMismatch(
                "embedding requires the same basis family".into(),
            ));
        }
        if u.level > self.level {
            return Err(Error::Level(format!(
                "cannot embed a level-{} field into a level-{} space",
                u.level, self.level
            )));
        }
        from.check_field(u)?;
        let mut coeffs = vec![0.0; self.basis_len()];
        coeffs[..u.coeffs.len()].copy_from_slice(&u.coeffs);
        Ok(DiscreteField {
            space_id: self.id,
            level: self.level,
            coeffs,
        })
    }

    // ----- pairings and norms -----

    /// L2 inner product, exact in coefficients by orthonormality. Fields at
    /// different truncation levels of the same space pair by zero-padding.
    pub fn mass_pairing(&self, u: &DiscreteField, v: &DiscreteField) -> Result<f64> {
        self.check_field(u)?;
        self.check_field(v)?;
        let n = u.coeffs.len().min(v.coeffs.len());
        Ok((0..n).map(|k| u.coeffs[k] * v.coeffs[k]).sum())
    }

    /// L2 norm (coefficient Euclidean norm).
    pub fn norm_h(&self, u: &DiscreteField) -> Result<f64> {
        self.check_field(u)?;
        Ok(u.coeffs.iter().map(|c| c * c).sum::<f64>().sqrt())
    }

    /// Gradient L^p norm, assembled by quadrature.
    pub fn norm_v(&self, u: &DiscreteField, p: f64) -> Result<f64> {
        self.check_field(u)?;
        if !(p.is_finite() && p > 1.0) {
            return Err(Error::value(format!(
                "norm exponent p must lie in (1,inf), got {p}"
            )));
        }
        let qv = self.eval_on_quad(u)?;
        let gd = self.ncomp * self.dim;
        let mut acc = 0.0;
        for (q, &w) in self.weights.iter().enumerate() {
            let g = &qv.grads[q * gd..(q + 1) * gd];
            let norm2: f64 = g.iter().map(|x| x * x).sum();
            acc += w * norm2.powf(0.5 * p);
        }
        Ok(acc.powf(1.0 / p))
    }

    /// H^s norm from the spectral weights (1 + eigenvalue)^s.
    pub fn norm_sobolev(&self, u: &DiscreteField, s: f64) -> Result<f64> {
        self.check_field(u)?;
        let mut acc = 0.0;
        for (k, &c) in u.coeffs.iter().enumerate() {
            let omega = 1.0 + self.modes[k].eigenvalue;
            acc += omega.powf(s) * c * c;
        }
        Ok(acc.sqrt())
    }

    /// Dual H^s norm of a functional given by its pairings against the
    /// orthonormal basis: (sum_k omega_k^{-s} g_k^2)^{1/2}.
    pub fn dual_norm_zstar(&self, pairings: &[f64], s: f64) -> Result<f64> {
        if pairings.len() > self.basis_len() {
            return Err(Error::Level(format!(
                "functional has {} pairings, space has {} modes",
                pairings.len(),
                self.basis_len()
            )));
        }
        let mut acc = 0.0;
        for (k, &g) in pairings.iter().enumerate() {
            let omega = 1.0 + self.modes[k].eigenvalue;
            acc += omega.powf(-s) * g * g;
        }
        Ok(acc.sqrt())
    }

    /// Evaluate a field (values and gradients) at every quadrature node.
    pub fn eval_on_quad(&self, u: &DiscreteField) -> Result<QuadValues> {
        self.check_field(u)?;
        let nnode = self.nodes.len();
        let vc = self.ncomp;
        let gd = vc * self.dim;
        let mut values = vec![0.0; nnode * vc];
        let mut grads = vec![0.0; nnode * gd];
        for (m, &c) in u.coeffs.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let vrow = &self.values[m * nnode * vc..(m + 1) * nnode * vc];
            let grow = &self.grads[m * nnode * gd..(m + 1) * nnode * gd];
            for (acc, &b) in values.iter_mut().zip(vrow) {
                *acc += c * b;
            }
            for (acc, &b) in grads.iter_mut().zip(grow) {
                *acc += c * b;
            }
        }
        Ok(QuadValues {
            ncomp: vc,
            dim: self.dim,
            values,
            grads,
        })
    }

    /// Pointwise divergence of a field at every quadrature node (torus only).
    pub fn divergence_on_quad(&self, u: &DiscreteField) -> Result<Vec<f64>> {
        if self.kind != SpaceKind::TorusDivFree {
            return Err(Error::Kind(
                "divergence check needs a vector field space".into(),
            ));
        }
        let qv = self.eval_on_quad(u)?;
        let gd = self.ncomp * self.dim;
        Ok((0..self.nodes.len())
            .map(|q| qv.grads[q * gd] + qv.grads[q * gd + 3])
            .collect())
    }
}

fn sine_mode_eval(dim: usize, wave: [i64; 2], node: [f64; 2]) -> (f64, [f64; 2]) {
    let k1 = wave[0] as f64;
    if dim == 1 {
        let (s, c) = (k1 * PI * node[0]).sin_cos();
        let amp = std::f64::consts::SQRT_2;
        (amp * s, [amp * k1 * PI * c, 0.0])
    } else {
        let k2 = wave[1] as f64;
        let (s1, c1) = (k1 * PI * node[0]).sin_cos();
        let (s2, c2) = (k2 * PI * node[1]).sin_cos();
        let v = 2.0 * s1 * s2;
        (v, [2.0 * k1 * PI * c1 * s2, 2.0 * k2 * PI * s1 * c2])
    }
}

fn torus_mode_eval(mode: &Mode, node: [f64; 2]) -> ([f64; 2], [[f64; 2]; 2]) {
    let k1 = mode.wave[0] as f64;
    let k2 = mode.wave[1] as f64;
    let knorm = (k1 * k1 + k2 * k2).sqrt();
    // unit vector orthogonal to the wavevector: the field is automatically
    // divergence-free
    let perp = [-k2 / knorm, k1 / knorm];
    let amp = 1.0 / (std::f64::consts::SQRT_2 * PI);
    let phase = k1 * node[0] + k2 * node[1];
    let (sp, cp) = phase.sin_cos();
    let (carrier, dcarrier) = match mode.trig {
        Trig::Cos => (cp, -sp),
        Trig::Sin => (sp, cp),
    };
    let v = [amp * perp[0] * carrier, amp * perp[1] * carrier];
    let mut g = [[0.0; 2]; 2];
    for (c, row) in g.iter_mut().enumerate() {
        for (d, entry) in row.iter_mut().enumerate() {
            let kd = if d == 0 { k1 } else { k2 };
            *entry = amp * perp[c] * kd * dcarrier;
        }
    }
    (v, g)
}
