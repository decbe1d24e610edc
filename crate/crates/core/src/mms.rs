//! Manufactured solution, its source terms, and refinement studies.
//!
//! The exact solution is `p = μ = φ = cos(πt) G(x, y)` with
//! `G = g(x) g(y)` and `g(ξ) = 16 ξ² (ξ − 1)²`. Every source term is a
//! combination of five spatial polynomials with time-dependent coefficients,
//! so the load vectors are assembled once per mesh with a rule that
//! integrates those polynomials exactly and recombined at each step.

use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::assembly::{self, h1_error, l2_error};
use crate::error::{DchError, Result};
use crate::field::NodalField;
use crate::integrator::{initial_condition, InitialCondition, Simulation};
use crate::mesh::{build_hierarchy, MeshLevel};
use crate::quadrature::QuadratureRule;
use crate::system::{DchParams, DchState, SourceTriple};

pub fn g(s: f64) -> f64 {
    16.0 * s * s * (s - 1.0) * (s - 1.0)
}

pub fn dg(s: f64) -> f64 {
    32.0 * s * (s - 1.0) * (2.0 * s - 1.0)
}

pub fn d2g(s: f64) -> f64 {
    32.0 * (6.0 * s * s - 6.0 * s + 1.0)
}

/// `∫₀¹ g = 8/15`, so the exact spatial mean of `G` is `(8/15)²`.
pub const BUMP_MEAN: f64 = (8.0 / 15.0) * (8.0 / 15.0);

/// Degree of `G³ u_i`, the highest-degree load integrand.
const LOAD_DEGREE: usize = 25;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ManufacturedSolution {
    pub epsilon: f64,
    pub gamma: f64,
}

impl ManufacturedSolution {
    pub fn new(epsilon: f64, gamma: f64) -> Self {
        Self { epsilon, gamma }
    }

    pub fn bump(x: f64, y: f64) -> f64 {
        g(x) * g(y)
    }

    pub fn bump_grad(x: f64, y: f64) -> [f64; 2] {
        [dg(x) * g(y), g(x) * dg(y)]
    }

    pub fn bump_laplacian(x: f64, y: f64) -> f64 {
        d2g(x) * g(y) + g(x) * d2g(y)
    }

    /// `∇·(G ∇G) = |∇G|² + G ΔG`.
    pub fn div_g_grad_g(x: f64, y: f64) -> f64 {
        let [gx, gy] = Self::bump_grad(x, y);
        gx * gx + gy * gy + Self::bump(x, y) * Self::bump_laplacian(x, y)
    }

    /// `∇·(G² ∇G) = 2 G |∇G|² + G² ΔG`.
    pub fn div_g2_grad_g(x: f64, y: f64) -> f64 {
        let [gx, gy] = Self::bump_grad(x, y);
        let gv = Self::bump(x, y);
        2.0 * gv * (gx * gx + gy * gy) + gv * gv * Self::bump_laplacian(x, y)
    }

    pub fn bump_cubed(x: f64, y: f64) -> f64 {
        let gv = Self::bump(x, y);
        gv * gv * gv
    }

    /// The common value of `p`, `μ` and `φ`.
    pub fn phi(&self, x: f64, y: f64, t: f64) -> f64 {
        libm::cos(PI * t) * Self::bump(x, y)
    }

    pub fn grad(&self, x: f64, y: f64, t: f64) -> [f64; 2] {
        let c = libm::cos(PI * t);
        let [gx, gy] = Self::bump_grad(x, y);
        [c * gx, c * gy]
    }

    /// Exact spatial mean of the pressure at time `t`.
    pub fn pressure_mean(&self, t: f64) -> f64 {
        libm::cos(PI * t) * BUMP_MEAN
    }

    /// `s₁ = −Δp − γ ∇·(φ ∇μ)`.
    pub fn s1(&self, x: f64, y: f64, t: f64) -> f64 {
        let c = libm::cos(PI * t);
        -c * Self::bump_laplacian(x, y) - self.gamma * c * c * Self::div_g_grad_g(x, y)
    }

    /// `s₂ = φ_t − ε Δμ − ∇·(φ [∇p + γ φ ∇μ])`.
    pub fn s2(&self, x: f64, y: f64, t: f64) -> f64 {
        let c = libm::cos(PI * t);
        -PI * libm::sin(PI * t) * Self::bump(x, y)
            - self.epsilon * c * Self::bump_laplacian(x, y)
            - c * c * Self::div_g_grad_g(x, y)
            - self.gamma * c * c * c * Self::div_g2_grad_g(x, y)
    }

    /// `s₃ = μ + ε Δφ − (φ³ − φ) / ε`.
    pub fn s3(&self, x: f64, y: f64, t: f64) -> f64 {
        let c = libm::cos(PI * t);
        let gv = Self::bump(x, y);
        c * gv + self.epsilon * c * Self::bump_laplacian(x, y)
            - (c * c * c * gv * gv * gv - c * gv) / self.epsilon
    }

    /// Time coefficients multiplying the spatial load basis
    /// `[G, ΔG, ∇·(G∇G), ∇·(G²∇G), G³]` for each source.
    fn coefficients(&self, t: f64) -> [[f64; 5]; 3] {
        let c = libm::cos(PI * t);
        let sn = libm::sin(PI * t);
        let (eps, gamma) = (self.epsilon, self.gamma);
        [
            [0.0, -c, -gamma * c * c, 0.0, 0.0],
            [-PI * sn, -eps * c, -c * c, -gamma * c * c * c, 0.0],
            [c + c / eps, eps * c, 0.0, 0.0, -c * c * c / eps],
        ]
    }
}

/// Exactly integrated load vectors of the manufactured sources on one level.
#[derive(Debug, Clone)]
pub struct MmsLoads {
    exact: ManufacturedSolution,
    basis: [NodalField; 5],
    /// Row sums of the mass matrix, present when the pressure load is
    /// projected onto zero total.
    projection: Option<Vec<f64>>,
}

impl MmsLoads {
    pub fn new(level: &MeshLevel, exact: ManufacturedSolution) -> Self {
        Self::build(level, exact, LOAD_DEGREE, false)
    }

    /// Loads integrated with a rule exact only through `degree`. The
    /// pressure load is then projected to zero total so the singular
    /// pressure block stays consistent.
    pub fn with_degree(level: &MeshLevel, exact: ManufacturedSolution, degree: usize) -> Self {
        Self::build(level, exact, degree, true)
    }

    fn build(level: &MeshLevel, exact: ManufacturedSolution, degree: usize, project: bool) -> Self {
        let basis_fns: [fn(f64, f64) -> f64; 5] = [
            ManufacturedSolution::bump,
            ManufacturedSolution::bump_laplacian,
            ManufacturedSolution::div_g_grad_g,
            ManufacturedSolution::div_g2_grad_g,
            ManufacturedSolution::bump_cubed,
        ];
        debug_assert!(QuadratureRule::for_degree(LOAD_DEGREE).degree() >= LOAD_DEGREE);
        let basis = basis_fns.map(|f| assembly::load(level, f, degree));
        let projection = project.then(|| assembly::mass(level).row_sums());
        Self {
            exact,
            basis,
            projection,
        }
    }

    /// `b_k = (s_k(·, t), u_i)` for `k = 1, 2, 3`.
    pub fn loads(&self, t: f64) -> [NodalField; 3] {
        let mut out = self.exact.coefficients(t).map(|coef| {
            let mut out = NodalField::zeros(self.basis[0].level(), self.basis[0].len());
            for (c, b) in coef.iter().zip(&self.basis) {
                if *c != 0.0 {
                    out.axpy(*c, b);
                }
            }
            out
        });
        if let Some(w) = &self.projection {
            let total: f64 = out[0].iter().sum();
            out[0].axpy(-total, w);
        }
        out
    }

    /// Adds the sources at `t`: `s¹ += b¹`, `s² += τ b²`, `s³ −= b³`.
    pub fn add_to_sources(&self, s: &mut SourceTriple, t: f64, params: &DchParams) {
        let [b1, b2, b3] = self.loads(t);
        s.s1.axpy(1.0, &b1);
        s.s2.axpy(params.tau, &b2);
        s.s3.axpy(-1.0, &b3);
    }
}

/// Load vectors of the sources by direct quadrature of given degree.
pub fn mms_loads(
    level: &MeshLevel,
    exact: &ManufacturedSolution,
    t: f64,
    degree: usize,
) -> [NodalField; 3] {
    [
        assembly::load(level, |x, y| exact.s1(x, y, t), degree),
        assembly::load(level, |x, y| exact.s2(x, y, t), degree),
        assembly::load(level, |x, y| exact.s3(x, y, t), degree),
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Norm {
    L2,
    H1,
}

/// One line of a refinement table. Errors (or Cauchy differences) are
/// ordered `φ, μ, p`.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyRow {
    /// Cells per side of the (fine) mesh.
    pub cells: usize,
    /// Cells per side of the coarse mesh of a Cauchy pair.
    pub coarse_cells: Option<usize>,
    pub tau: f64,
    pub steps: usize,
    pub errors: [f64; 3],
    /// `log₂` of the error ratio to the previous row.
    pub rates: Option<[f64; 3]>,
    /// Why the row has no errors.
    pub failure: Option<DchError>,
}

impl StudyRow {
    /// Hypotenuse length `√2 / n` of the fine mesh.
    pub fn h(&self) -> f64 {
        core::f64::consts::SQRT_2 / self.cells as f64
    }

    pub fn h_coarse(&self) -> Option<f64> {
        self.coarse_cells
            .map(|n| core::f64::consts::SQRT_2 / n as f64)
    }
}

/// `log₂(e_coarse / e_fine)`.
pub fn rate(coarse: f64, fine: f64) -> f64 {
    libm::log2(coarse / fine)
}

/// Fills the rate column from consecutive rows; the first row has none.
pub fn fill_rates(rows: &mut [StudyRow]) {
    for k in 0..rows.len() {
        rows[k].rates = if k == 0 {
            None
        } else {
            let (a, b) = (rows[k - 1].errors, rows[k].errors);
            Some([0, 1, 2].map(|f| rate(a[f], b[f])))
        };
    }
}

/// Number of levels above a one-cell mesh for `cells` per side.
fn levels_for(cells: usize) -> Result<usize> {
    if cells < 2 || !cells.is_power_of_two() {
        return Err(DchError::InvalidParameter {
            name: "cells",
            reason: alloc::format!("{cells} cells per side is not a power of two >= 2"),
        });
    }
    Ok(cells.trailing_zeros() as usize)
}

fn params_for(template: &DchParams, cells: usize, tau: f64) -> Result<DchParams> {
    let mut p = template.clone();
    p.levels = levels_for(cells)?;
    p.coarsest_cells = 1;
    p.tau = tau;
    p.validate()?;
    Ok(p)
}

/// Runs one manufactured-solution simulation to `template.final_time` and
/// returns the errors at the final time in the requested norm.
pub fn mms_cell(
    cells: usize,
    tau: f64,
    template: &DchParams,
    norm: Norm,
) -> Result<(usize, [f64; 3])> {
    let params = params_for(template, cells, tau)?;
    let steps = params.steps()?;
    let h = build_hierarchy(1, params.levels)?;
    let level = h.finest();
    let phi0 = initial_condition(&InitialCondition::Manufactured, level, params.seed)?;
    let mut sim = Simulation::new(&h, params.clone(), phi0, true)?;
    let exact = ManufacturedSolution::new(params.epsilon, params.gamma);
    sim.run(steps, |_, _| {})?;
    let t = sim.time();
    let st = sim.state();
    let mut p = st.p.clone();
    p.shift(exact.pressure_mean(t) - assembly::mean_value(level, &p));
    let err = |v: &[f64]| match norm {
        Norm::L2 => l2_error(level, v, |x, y| exact.phi(x, y, t)),
        Norm::H1 => h1_error(
            level,
            v,
            |x, y| exact.phi(x, y, t),
            |x, y| exact.grad(x, y, t),
        ),
    };
    Ok((steps, [err(&st.phi), err(&st.mu), err(&p)]))
}

/// Manufactured-solution errors for each mesh in `cells`, with time step
/// `tau_of(n)` on the mesh with `n` cells per side. A failed cell leaves NaN
/// errors and records the failure; the study continues.
pub fn convergence_study(
    norm: Norm,
    cells: &[usize],
    tau_of: impl Fn(usize) -> f64,
    template: &DchParams,
) -> Vec<StudyRow> {
    let mut rows: Vec<StudyRow> = cells
        .iter()
        .map(|&n| {
            let tau = tau_of(n);
            match mms_cell(n, tau, template, norm) {
                Ok((steps, errors)) => StudyRow {
                    cells: n,
                    coarse_cells: None,
                    tau,
                    steps,
                    errors,
                    rates: None,
                    failure: None,
                },
                Err(e) => failed_row(n, None, tau, e),
            }
        })
        .collect();
    fill_rates(&mut rows);
    rows
}

fn failed_row(cells: usize, coarse_cells: Option<usize>, tau: f64, e: DchError) -> StudyRow {
    StudyRow {
        cells,
        coarse_cells,
        tau,
        steps: 0,
        errors: [f64::NAN; 3],
        rates: None,
        failure: Some(e),
    }
}

/// Final state of the Cauchy test problem on a mesh with `cells` per side.
pub fn cauchy_cell(cells: usize, tau: f64, template: &DchParams) -> Result<(usize, DchState)> {
    let params = params_for(template, cells, tau)?;
    let steps = params.steps()?;
    let h = build_hierarchy(1, params.levels)?;
    let phi0 = initial_condition(&InitialCondition::Cauchy, h.finest(), params.seed)?;
    let mut sim = Simulation::new(&h, params, phi0, false)?;
    sim.run(steps, |_, _| {})?;
    Ok((steps, sim.into_state()))
}

/// Norm of the difference between a fine solution and the prolonged coarse
/// solution, per field, measured on the fine mesh.
pub fn cauchy_difference(
    cells_fine: usize,
    coarse: &DchState,
    fine: &DchState,
    norm: Norm,
) -> Result<[f64; 3]> {
    let levels = levels_for(cells_fine)?;
    let h = build_hierarchy(1, levels)?;
    let level = h.finest();
    let m = assembly::mass(level);
    let a = assembly::stiffness(level);
    let mut out = [0.0; 3];
    // both pressures carry zero mean, so their difference is mean-matched
    for (k, (c, f)) in coarse.fields().iter().zip(fine.fields()).enumerate() {
        let c = NodalField::new(levels - 1, c.values().to_vec());
        let mut d = f.clone();
        d.axpy(-1.0, &h.prolong(&c)?);
        let mut sq = m.bilinear(&d, &d);
        if norm == Norm::H1 {
            sq += a.bilinear(&d, &d);
        }
        out[k] = libm::sqrt(sq.max(0.0));
    }
    // order the output as φ, μ, p
    Ok([out[2], out[1], out[0]])
}

/// Cauchy differences between consecutive meshes in `cells`.
pub fn cauchy_study(
    norm: Norm,
    cells: &[usize],
    tau_of: impl Fn(usize) -> f64,
    template: &DchParams,
) -> Vec<StudyRow> {
    let runs: Vec<(usize, f64, Result<(usize, DchState)>)> = cells
        .iter()
        .map(|&n| (n, tau_of(n), cauchy_cell(n, tau_of(n), template)))
        .collect();
    let mut rows: Vec<StudyRow> = runs
        .windows(2)
        .map(|w| {
            let (nc, _, coarse) = &w[0];
            let (nf, tau, fine) = &w[1];
            let result = match (coarse, fine) {
                (Ok((_, c)), Ok((steps, f))) if *nf == 2 * nc => {
                    cauchy_difference(*nf, c, f, norm).map(|e| (*steps, e))
                }
                (Err(e), _) | (_, Err(e)) => Err(e.clone()),
                _ => Err(DchError::InvalidParameter {
                    name: "cells",
                    reason: alloc::format!(
                        "Cauchy pairs need consecutive meshes, got {nc} and {nf}"
                    ),
                }),
            };
            match result {
                Ok((steps, errors)) => StudyRow {
                    cells: *nf,
                    coarse_cells: Some(*nc),
                    tau: *tau,
                    steps,
                    errors,
                    rates: None,
                    failure: None,
                },
                Err(e) => failed_row(*nf, Some(*nc), *tau, e),
            }
        })
        .collect();
    fill_rates(&mut rows);
    rows
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_hierarchy;

    #[test]
    fn bump_values() {
        assert_eq!(g(0.5), 1.0);
        assert_eq!(g(0.0), 0.0);
        assert_eq!(dg(0.0), 0.0);
        assert_eq!(dg(1.0), 0.0);
        assert_eq!(ManufacturedSolution::new(1.0, 1.0).phi(0.5, 0.5, 0.0), 1.0);
    }

    #[test]
    fn sources_vanish_where_the_fields_do() {
        let e = ManufacturedSolution::new(0.7, 1.3);
        for (x, y) in [(0.2, 0.7), (0.5, 0.5), (0.9, 0.1)] {
            assert!(e.s1(x, y, 0.5).abs() < 1e-14);
            assert!(e.s3(x, y, 0.5).abs() < 1e-14);
            let expect = -PI * ManufacturedSolution::bump(x, y);
            assert!((e.s2(x, y, 0.5) - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn basis_decomposition_reproduces_the_sources() {
        let e = ManufacturedSolution::new(0.4, 0.9);
        let basis = [
            ManufacturedSolution::bump,
            ManufacturedSolution::bump_laplacian,
            ManufacturedSolution::div_g_grad_g,
            ManufacturedSolution::div_g2_grad_g,
            ManufacturedSolution::bump_cubed,
        ];
        for &(x, y, t) in &[(0.1, 0.3, 0.2), (0.77, 0.41, 0.9), (0.5, 0.05, 0.33)] {
            let coef = e.coefficients(t);
            let direct = [e.s1(x, y, t), e.s2(x, y, t), e.s3(x, y, t)];
            for k in 0..3 {
                let via: f64 = coef[k].iter().zip(&basis).map(|(c, f)| c * f(x, y)).sum();
                assert!((via - direct[k]).abs() < 1e-12 * (1.0 + direct[k].abs()));
            }
        }
    }

    #[test]
    fn exact_loads_match_high_order_direct_quadrature() {
        let h = build_hierarchy(1, 3).unwrap();
        let level = h.finest();
        let e = ManufacturedSolution::new(0.5, 0.8);
        let loads = MmsLoads::new(level, e);
        let t = 0.3;
        let exact = loads.loads(t);
        let direct = mms_loads(level, &e, t, 30);
        for (a, b) in exact.iter().zip(&direct) {
            for (u, v) in a.iter().zip(b.iter()) {
                assert!((u - v).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn pressure_load_is_compatible() {
        let h = build_hierarchy(1, 4).unwrap();
        let level = h.finest();
        let loads = MmsLoads::new(level, ManufacturedSolution::new(1.0, 1.0));
        for k in 0..20 {
            let [b1, _, _] = loads.loads(k as f64 * 0.05);
            assert!(b1.iter().sum::<f64>().abs() <= 1e-12);
        }
    }

    #[test]
    fn loads_at_half_time() {
        let h = build_hierarchy(1, 3).unwrap();
        let level = h.finest();
        let loads = MmsLoads::new(level, ManufacturedSolution::new(1.0, 1.0));
        let [b1, b2, b3] = loads.loads(0.5);
        assert!(b1.iter().chain(b3.iter()).all(|v| v.abs() < 1e-15));
        let expect = assembly::load(level, |x, y| -PI * ManufacturedSolution::bump(x, y), 25);
        for (a, b) in b2.iter().zip(expect.iter()) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn rates_are_log2_ratios() {
        let row = |cells, e: f64| StudyRow {
            cells,
            coarse_cells: None,
            tau: 0.1,
            steps: 1,
            errors: [e, 2.0 * e, 3.0 * e],
            rates: None,
            failure: None,
        };
        let mut rows = alloc::vec![row(8, 0.4), row(16, 0.1)];
        fill_rates(&mut rows);
        assert!(rows[0].rates.is_none());
        for r in rows[1].rates.unwrap() {
            assert!((r - 2.0).abs() < 1e-15);
        }
        let mut single = alloc::vec![row(8, 0.4)];
        fill_rates(&mut single);
        assert!(single[0].rates.is_none());
    }

    #[test]
    fn identical_constant_runs_have_zero_cauchy_difference() {
        let h = build_hierarchy(1, 3).unwrap();
        let c = DchState {
            p: h.levels()[2].zeros(),
            mu: h.levels()[2].constant(0.3),
            phi: h.levels()[2].constant(0.5),
        };
        let f = DchState {
            p: h.finest().zeros(),
            mu: h.finest().constant(0.3),
            phi: h.finest().constant(0.5),
        };
        for norm in [Norm::L2, Norm::H1] {
            let d = cauchy_difference(8, &c, &f, norm).unwrap();
            assert!(d.iter().all(|v| *v < 1e-15));
        }
    }
}
