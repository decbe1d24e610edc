//! The nonlinear algebraic system of one convex-splitting step.
//!
//! On level `l` the unknowns are `ξ = (q, ν, ψ)` and the operator is
//!
//! ```text
//! N¹(ξ) = A q + γ C ν
//! N²(ξ) = M ψ + τ (ε A + γ B) ν + τ C q
//! N³(ξ) = ε A ψ + (1/ε) Q(ψ) ψ − M ν
//! ```
//!
//! where `B` and `C` are weighted by the previous phase field restricted to
//! the level. The unsourced right-hand side is `s¹ = 0`, `s² = M φ^{m-1}`,
//! `s³ = (1/ε) M φ^{m-1}`.

use alloc::format;
use alloc::vec::Vec;

use crate::assembly;
use crate::error::{DchError, Result};
use crate::field::NodalField;
use crate::mesh::{MeshHierarchy, MeshLevel};
use crate::quadrature::QuadratureRule;
use crate::sparse::{conjugate_gradient, CsrMatrix};

#[derive(Debug, Clone, PartialEq)]
pub struct DchParams {
    /// Interface width.
    pub epsilon: f64,
    /// Excess surface tension.
    pub gamma: f64,
    /// Time step.
    pub tau: f64,
    pub final_time: f64,
    /// Smoothing sweeps per pre- and post-smoothing stage.
    pub sweeps: usize,
    /// Extra sweeps on the coarsest level, on top of `sweeps`.
    pub coarsest_extra_sweeps: usize,
    /// Stopping tolerance on the residual RMS.
    pub tol: f64,
    pub max_cycles: usize,
    /// Index of the finest level.
    pub levels: usize,
    /// Cells per side on level 0.
    pub coarsest_cells: usize,
    /// Seed of the random initial data.
    pub seed: u64,
}

impl DchParams {
    pub fn new(epsilon: f64, gamma: f64, tau: f64, final_time: f64, levels: usize) -> Self {
        Self {
            epsilon,
            gamma,
            tau,
            final_time,
            sweeps: 2,
            coarsest_extra_sweeps: 0,
            tol: 1e-12,
            max_cycles: 200,
            levels,
            coarsest_cells: 1,
            seed: 42,
        }
    }

    pub fn validate(&self) -> Result<()> {
        fn bad(name: &'static str, reason: &str) -> Result<()> {
            Err(DchError::InvalidParameter {
                name,
                reason: reason.into(),
            })
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return bad("epsilon", "must be positive and finite");
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return bad("gamma", "must be non-negative and finite");
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return bad("tau", "must be positive and finite");
        }
        if !(self.final_time >= 0.0 && self.final_time.is_finite()) {
            return bad("T", "must be non-negative and finite");
        }
        if self.sweeps == 0 {
            return bad("lambda", "at least one smoothing sweep is required");
        }
        if !(self.tol > 0.0) {
            return bad("tol", "must be positive");
        }
        if self.max_cycles == 0 {
            return bad("max_cycles", "must be at least 1");
        }
        if self.levels == 0 || self.coarsest_cells == 0 {
            return Err(DchError::InvalidHierarchy {
                coarsest_cells: self.coarsest_cells,
                levels: self.levels,
            });
        }
        Ok(())
    }

    /// Number of steps `M = T / τ`; errors unless it is an integer.
    pub fn steps(&self) -> Result<usize> {
        let ratio = self.final_time / self.tau;
        let m = libm::round(ratio);
        if !ratio.is_finite() || (ratio - m).abs() > 1e-9 * ratio.max(1.0) {
            return Err(DchError::NonIntegerSteps {
                final_time: self.final_time,
                tau: self.tau,
            });
        }
        Ok(m as usize)
    }

    /// Cells per side on the finest level.
    pub fn finest_cells(&self) -> usize {
        self.coarsest_cells << self.levels
    }
}

/// The unknowns `(p, μ, φ)` on one level.
#[derive(Debug, Clone, PartialEq)]
pub struct DchState {
    pub p: NodalField,
    pub mu: NodalField,
    pub phi: NodalField,
}

impl DchState {
    pub fn new(p: NodalField, mu: NodalField, phi: NodalField) -> Result<Self> {
        let s = Self { p, mu, phi };
        s.mu.expect_level(s.p.level())?;
        s.phi.expect_level(s.p.level())?;
        s.mu.expect_len(s.p.len())?;
        s.phi.expect_len(s.p.len())?;
        Ok(s)
    }

    pub fn zeros(level: &MeshLevel) -> Self {
        Self {
            p: level.zeros(),
            mu: level.zeros(),
            phi: level.zeros(),
        }
    }

    pub fn level(&self) -> usize {
        self.p.level()
    }

    pub fn fields(&self) -> [&NodalField; 3] {
        [&self.p, &self.mu, &self.phi]
    }

    pub fn fields_mut(&mut self) -> [&mut NodalField; 3] {
        [&mut self.p, &mut self.mu, &mut self.phi]
    }

    pub fn is_finite(&self) -> bool {
        self.fields().iter().all(|f| f.is_finite())
    }

    fn check(&self, level: &MeshLevel) -> Result<()> {
        for f in self.fields() {
            level.check(f)?;
        }
        Ok(())
    }
}

/// Right-hand sides of the three block equations. Operator values and
/// residuals use the same shape.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceTriple {
    pub s1: NodalField,
    pub s2: NodalField,
    pub s3: NodalField,
}

impl SourceTriple {
    pub fn zeros(level: &MeshLevel) -> Self {
        Self {
            s1: level.zeros(),
            s2: level.zeros(),
            s3: level.zeros(),
        }
    }

    pub fn blocks(&self) -> [&NodalField; 3] {
        [&self.s1, &self.s2, &self.s3]
    }

    pub fn blocks_mut(&mut self) -> [&mut NodalField; 3] {
        [&mut self.s1, &mut self.s2, &mut self.s3]
    }

    /// `sqrt(Σ r² / 3N)` over all three blocks.
    pub fn rms(&self) -> f64 {
        let n = self.s1.len() as f64;
        let sum: f64 = self
            .blocks()
            .iter()
            .flat_map(|b| b.iter())
            .map(|v| v * v)
            .sum();
        libm::sqrt(sum / (3.0 * n))
    }
}

/// Matrices of one level together with the lagged phase field they were
/// built from.
#[derive(Debug, Clone)]
pub struct LevelContext<'a> {
    pub mesh: &'a MeshLevel,
    pub a: CsrMatrix,
    pub m: CsrMatrix,
    /// `((φ^{m-1})² ∇u_j, ∇u_i)`.
    pub b: CsrMatrix,
    /// `(φ^{m-1} ∇u_j, ∇u_i)`.
    pub c: CsrMatrix,
    pub phi_prev: NodalField,
}

impl<'a> LevelContext<'a> {
    /// Context with `φ^{m-1} = 0`.
    pub fn new(mesh: &'a MeshLevel) -> Self {
        let a = assembly::stiffness(mesh);
        let m = assembly::mass(mesh);
        let b = a.zeroed();
        let c = a.zeroed();
        Self {
            mesh,
            a,
            m,
            b,
            c,
            phi_prev: mesh.zeros(),
        }
    }

    /// Replaces the lagged field and rebuilds `B` and `C`.
    pub fn set_previous(&mut self, phi_prev: NodalField) -> Result<()> {
        self.mesh.check(&phi_prev)?;
        self.c = assembly::weighted_stiffness(self.mesh, &phi_prev, 1)?;
        self.b = assembly::weighted_stiffness(self.mesh, &phi_prev, 2)?;
        self.phi_prev = phi_prev;
        Ok(())
    }
}

/// Context on level `l` from the finest-level previous phase field.
pub fn build_level_context<'a>(
    hierarchy: &'a MeshHierarchy,
    l: usize,
    phi_prev_finest: &NodalField,
) -> Result<LevelContext<'a>> {
    let mesh = hierarchy.level(l)?;
    hierarchy.finest().check(phi_prev_finest)?;
    let mut ctx = LevelContext::new(mesh);
    ctx.set_previous(hierarchy.restrict_nodal_to(phi_prev_finest, l)?)?;
    Ok(ctx)
}

/// `N(ξ)` on the context's level.
pub fn apply_operator(
    ctx: &LevelContext,
    params: &DchParams,
    xi: &DchState,
) -> Result<SourceTriple> {
    xi.check(ctx.mesh)?;
    let (eps, gamma, tau) = (params.epsilon, params.gamma, params.tau);
    let mut out = SourceTriple::zeros(ctx.mesh);

    ctx.a.mul_vec_into(&xi.p, &mut out.s1);
    ctx.c.mul_vec_add(gamma, &xi.mu, &mut out.s1);

    ctx.m.mul_vec_into(&xi.phi, &mut out.s2);
    ctx.a.mul_vec_add(tau * eps, &xi.mu, &mut out.s2);
    ctx.b.mul_vec_add(tau * gamma, &xi.mu, &mut out.s2);
    ctx.c.mul_vec_add(tau, &xi.p, &mut out.s2);

    assembly::cubic_load_into(ctx.mesh, &xi.phi, &mut out.s3);
    out.s3.scale(1.0 / eps);
    ctx.a.mul_vec_add(eps, &xi.phi, &mut out.s3);
    ctx.m.mul_vec_add(-1.0, &xi.mu, &mut out.s3);
    Ok(out)
}

/// Right-hand side of the unsourced scheme.
pub fn compute_sources(ctx: &LevelContext, params: &DchParams) -> SourceTriple {
    let mut s = SourceTriple::zeros(ctx.mesh);
    ctx.m.mul_vec_into(&ctx.phi_prev, &mut s.s2);
    s.s3.axpy(1.0 / params.epsilon, &s.s2);
    s
}

/// `s − N(ξ)`. With `γ = 0` the pressure is pinned to zero and its block is
/// dropped, so the first block is reported as zero.
pub fn residual(
    ctx: &LevelContext,
    params: &DchParams,
    s: &SourceTriple,
    xi: &DchState,
) -> Result<SourceTriple> {
    let mut r = apply_operator(ctx, params, xi)?;
    for (rb, sb) in r.blocks_mut().into_iter().zip(s.blocks()) {
        ctx.mesh.check(sb)?;
        for (x, y) in rb.iter_mut().zip(sb.iter()) {
            *x = y - *x;
        }
    }
    if params.gamma == 0.0 {
        r.s1.fill(0.0);
    }
    Ok(r)
}

pub fn residual_rms(
    ctx: &LevelContext,
    params: &DchParams,
    s: &SourceTriple,
    xi: &DchState,
) -> Result<f64> {
    Ok(residual(ctx, params, s, xi)?.rms())
}

/// `F(φ) = (φ² − 1)² / 4`.
#[inline]
pub fn double_well(phi: f64) -> f64 {
    let a = phi * phi - 1.0;
    0.25 * a * a
}

/// Cahn-Hilliard energy `∫ ε/2 |∇φ_h|² + F(φ_h)/ε`, integrated exactly.
pub fn energy(level: &MeshLevel, phi: &[f64], epsilon: f64) -> f64 {
    let rule = QuadratureRule::degree4();
    let mut grad = 0.0;
    let mut well = 0.0;
    for (tri, g) in level.triangles().iter().zip(level.geometry()) {
        let v = tri.map(|k| phi[k]);
        let gx = v[0] * g.grads[0][0] + v[1] * g.grads[1][0] + v[2] * g.grads[2][0];
        let gy = v[0] * g.grads[0][1] + v[1] * g.grads[1][1] + v[2] * g.grads[2][1];
        grad += g.area * (gx * gx + gy * gy);
        for (p, w) in rule.iter() {
            well += g.area * w * double_well(p[0] * v[0] + p[1] * v[1] + p[2] * v[2]);
        }
    }
    0.5 * epsilon * grad + well / epsilon
}

/// `(M φ, 1)`.
pub fn total_mass(level: &MeshLevel, phi: &[f64]) -> f64 {
    assembly::integral(level, phi)
}

/// Terms of the one-step discrete energy law.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnergyAudit {
    pub energy_prev: f64,
    pub energy_new: f64,
    /// `ε ‖∇μ‖²`.
    pub chemical: f64,
    /// `‖u‖² / γ` with `u = −∇p − γ φ^{m-1} ∇μ`; zero when `γ = 0`.
    pub velocity: f64,
    /// `2 ε² ‖d_t ∇φ‖²`.
    pub gradient_jump: f64,
    /// `‖d_t (φ²)‖²`.
    pub square_jump: f64,
    /// `2 ‖φ d_t φ‖²`.
    pub product_jump: f64,
    /// `2 ‖d_t φ‖²`.
    pub jump: f64,
    /// `E^m − E^{m-1} + τ (dissipation)`, zero for an exact solve.
    pub defect: f64,
}

impl EnergyAudit {
    /// Total dissipation rate multiplying `τ` in the defect.
    pub fn dissipation(&self, params: &DchParams) -> f64 {
        self.chemical
            + self.velocity
            + params.tau / (4.0 * params.epsilon)
                * (self.gradient_jump + self.square_jump + self.product_jump + self.jump)
    }
}

/// Evaluates every term of the discrete energy law for the step from
/// `prev` to `new`; all integrands are polynomials of degree at most four.
pub fn energy_law_audit(
    level: &MeshLevel,
    params: &DchParams,
    prev: &DchState,
    new: &DchState,
) -> Result<EnergyAudit> {
    prev.check(level)?;
    new.check(level)?;
    let (eps, gamma, tau) = (params.epsilon, params.gamma, params.tau);
    let rule = QuadratureRule::degree4();
    let mut audit = EnergyAudit {
        energy_prev: energy(level, &prev.phi, eps),
        energy_new: energy(level, &new.phi, eps),
        ..EnergyAudit::default()
    };
    let grad = |g: &crate::mesh::ElementGeometry, v: [f64; 3]| {
        [
            v[0] * g.grads[0][0] + v[1] * g.grads[1][0] + v[2] * g.grads[2][0],
            v[0] * g.grads[0][1] + v[1] * g.grads[1][1] + v[2] * g.grads[2][1],
        ]
    };
    let mut grad_mu = 0.0;
    let mut vel = 0.0;
    let mut dgrad = 0.0;
    let mut dsq = 0.0;
    let mut dprod = 0.0;
    let mut djump = 0.0;
    for (tri, g) in level.triangles().iter().zip(level.geometry()) {
        let phi0 = tri.map(|k| prev.phi[k]);
        let phi1 = tri.map(|k| new.phi[k]);
        let gmu = grad(g, tri.map(|k| new.mu[k]));
        let gp = grad(g, tri.map(|k| new.p[k]));
        let gdphi = grad(g, [0, 1, 2].map(|a| (phi1[a] - phi0[a]) / tau));
        grad_mu += g.area * (gmu[0] * gmu[0] + gmu[1] * gmu[1]);
        dgrad += g.area * (gdphi[0] * gdphi[0] + gdphi[1] * gdphi[1]);
        for (p, w) in rule.iter() {
            let f0 = p[0] * phi0[0] + p[1] * phi0[1] + p[2] * phi0[2];
            let f1 = p[0] * phi1[0] + p[1] * phi1[1] + p[2] * phi1[2];
            let wa = g.area * w;
            if gamma > 0.0 {
                let ux = -gp[0] - gamma * f0 * gmu[0];
                let uy = -gp[1] - gamma * f0 * gmu[1];
                vel += wa * (ux * ux + uy * uy);
            }
            let dt = (f1 - f0) / tau;
            let dt_sq = (f1 * f1 - f0 * f0) / tau;
            dsq += wa * dt_sq * dt_sq;
            dprod += wa * f1 * f1 * dt * dt;
            djump += wa * dt * dt;
        }
    }
    audit.chemical = eps * grad_mu;
    audit.velocity = if gamma > 0.0 { vel / gamma } else { 0.0 };
    audit.gradient_jump = 2.0 * eps * eps * dgrad;
    audit.square_jump = dsq;
    audit.product_jump = 2.0 * dprod;
    audit.jump = 2.0 * djump;
    audit.defect = audit.energy_new - audit.energy_prev + tau * audit.dissipation(params);
    Ok(audit)
}

/// Chemical potential consistent with `φ` when `φ^{m-1} = φ`:
/// `M μ = ε A φ + (1/ε) ((φ³, u_i) − M φ)`.
pub fn consistent_mu(
    ctx: &LevelContext,
    params: &DchParams,
    phi: &NodalField,
) -> Result<NodalField> {
    ctx.mesh.check(phi)?;
    let eps = params.epsilon;
    let mut rhs = assembly::cubic_load(ctx.mesh, phi);
    ctx.m.mul_vec_add(-1.0, phi, &mut rhs);
    rhs.iter_mut().for_each(|v| *v /= eps);
    ctx.a.mul_vec_add(eps, phi, &mut rhs);
    // start from the lumped-mass solution
    let lumped = ctx.m.row_sums();
    let mut mu: Vec<f64> = rhs.iter().zip(&lumped).map(|(r, d)| r / d).collect();
    let n = mu.len();
    let its = conjugate_gradient(&ctx.m, &rhs, &mut mu, 1e-15, 10 * n + 100);
    if its > 10 * n {
        return Err(DchError::InvalidParameter {
            name: "phi",
            reason: format!("mass-matrix solve did not converge in {its} iterations"),
        });
    }
    Ok(NodalField::new(phi.level(), mu))
}
