//! Nonlinear pointwise block Gauss-Seidel relaxation.
//!
//! At node `i` the three unknowns `(p_i, μ_i, φ_i)` are updated together
//! with every other nodal value frozen. Rows one and two are linear, so
//! `p_i` and `μ_i` are eliminated in favour of `φ_i`; the remaining scalar
//! equation contains the exact local cubic from `(φ³, u_i)` and is solved by
//! a bracketed Newton iteration.

use crate::error::Result;
use crate::quadrature::QuadratureRule;
use crate::system::{DchParams, DchState, LevelContext, SourceTriple};

/// Newton iteration limit for the local scalar equation.
pub const LOCAL_MAX_ITER: usize = 20;
/// Relative step size at which the local Newton iteration stops.
pub const LOCAL_TOL: f64 = 1e-14;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SmoothStats {
    /// Local solves performed.
    pub local_solves: usize,
    /// Local solves that hit the iteration limit.
    pub flagged: usize,
}

impl core::ops::AddAssign for SmoothStats {
    fn add_assign(&mut self, rhs: Self) {
        self.local_solves += rhs.local_solves;
        self.flagged += rhs.flagged;
    }
}

/// Solves `k0 + k1 x + k2 x² + k3 x³ = 0` for a strictly increasing cubic,
/// starting from `start`. Returns the root and whether the iteration met
/// [`LOCAL_TOL`] within [`LOCAL_MAX_ITER`] steps.
pub fn solve_local_cubic(k: [f64; 4], start: f64) -> (f64, bool) {
    let eval = |x: f64| {
        let g = k[0] + x * (k[1] + x * (k[2] + x * k[3]));
        let dg = k[1] + x * (2.0 * k[2] + 3.0 * x * k[3]);
        (g, dg)
    };
    let mut lo = -10.0;
    let mut hi = 10.0;
    for _ in 0..64 {
        if eval(lo).0 <= 0.0 {
            break;
        }
        lo *= 2.0;
    }
    for _ in 0..64 {
        if eval(hi).0 >= 0.0 {
            break;
        }
        hi *= 2.0;
    }
    let mut x = if start.is_finite() {
        start.clamp(lo, hi)
    } else {
        0.0
    };
    for _ in 0..LOCAL_MAX_ITER {
        let (g, dg) = eval(x);
        if g == 0.0 {
            return (x, true);
        }
        if g > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let step = g / dg;
        if step.abs() <= LOCAL_TOL * (1.0 + x.abs()) {
            return (x - step, true);
        }
        let next = x - step;
        x = if next > lo && next < hi {
            next
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo <= LOCAL_TOL * (1.0 + x.abs()) {
            return (x, true);
        }
    }
    (x, false)
}

/// `sweeps` forward lexicographic sweeps of the block smoother for
/// `N(ξ) = s` on the context's level.
pub fn smooth(
    ctx: &LevelContext,
    params: &DchParams,
    s: &SourceTriple,
    state: &mut DchState,
    sweeps: usize,
) -> Result<SmoothStats> {
    let mesh = ctx.mesh;
    for f in state.fields() {
        mesh.check(f)?;
    }
    for b in s.blocks() {
        mesh.check(b)?;
    }
    debug_assert!(
        ctx.a.same_pattern(&ctx.m) && ctx.a.same_pattern(&ctx.b) && ctx.a.same_pattern(&ctx.c)
    );

    let (eps, gamma, tau) = (params.epsilon, params.gamma, params.tau);
    let rule = QuadratureRule::degree4();
    let points = rule.points();
    let weights = rule.weights();
    let offsets = ctx.a.row_offsets();
    let cols = ctx.a.col_indices();
    let (av, mv, bv, cv) = (
        ctx.a.values(),
        ctx.m.values(),
        ctx.b.values(),
        ctx.c.values(),
    );
    let triangles = mesh.triangles();
    let geometry = mesh.geometry();
    let (s1, s2, s3) = (&s.s1, &s.s2, &s.s3);
    let DchState { p, mu, phi } = state;
    let mut stats = SmoothStats::default();

    for _ in 0..sweeps {
        for i in 0..mesh.node_count() {
            let mut r1 = s1[i];
            let mut r2 = s2[i];
            let mut r3 = s3[i];
            let mut kd = usize::MAX;
            for k in offsets[i]..offsets[i + 1] {
                let j = cols[k];
                if j == i {
                    kd = k;
                    continue;
                }
                let d = eps * av[k] + gamma * bv[k];
                r1 -= av[k] * p[j] + gamma * cv[k] * mu[j];
                r2 -= mv[k] * phi[j] + tau * (d * mu[j] + cv[k] * p[j]);
                r3 -= eps * av[k] * phi[j] - mv[k] * mu[j];
            }
            let (a, m, c) = (av[kd], mv[kd], cv[kd]);
            let d = eps * a + gamma * bv[kd];

            // (φ_i u_i + r)³ u_i integrated over the incident triangles
            let mut cubic = [0.0; 4];
            for &(e, local) in mesh.incident(i) {
                let tri = triangles[e];
                let area = geometry[e].area;
                for (pt, &w) in points.iter().zip(weights) {
                    let u = pt[local];
                    let mut rest = 0.0;
                    for b in 0..3 {
                        if b != local {
                            rest += pt[b] * phi[tri[b]];
                        }
                    }
                    let ws = area * w;
                    let u2 = u * u;
                    cubic[3] += ws * u2 * u2;
                    cubic[2] += 3.0 * ws * u2 * u * rest;
                    cubic[1] += 3.0 * ws * u2 * rest * rest;
                    cubic[0] += ws * u * rest * rest * rest;
                }
            }

            // μ_i = μ0 + μ1 φ_i from the first two rows
            let (mu0, mu1, det) = if gamma > 0.0 {
                let det = tau * (a * d - gamma * c * c);
                ((a * r2 - tau * c * r1) / det, -a * m / det, det)
            } else {
                (r2 / (tau * d), -m / (tau * d), 0.0)
            };
            let k = [
                cubic[0] / eps - m * mu0 - r3,
                eps * a + cubic[1] / eps - m * mu1,
                cubic[2] / eps,
                cubic[3] / eps,
            ];
            let (x, converged) = solve_local_cubic(k, phi[i]);
            stats.local_solves += 1;
            if !converged {
                stats.flagged += 1;
            }
            phi[i] = x;
            mu[i] = mu0 + mu1 * x;
            p[i] = if gamma > 0.0 {
                (tau * d * r1 - gamma * c * (r2 - m * x)) / det
            } else {
                0.0
            };
        }
    }
    Ok(stats)
}
