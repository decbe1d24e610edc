//! P1 matrices, load vectors, interpolation and error norms.
//!
//! All matrices share the node adjacency pattern of their level, so the
//! smoother can walk one row of `A`, `M`, `B` and `C` with a single index.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::Result;
use crate::field::NodalField;
use crate::mesh::MeshLevel;
use crate::quadrature::QuadratureRule;
use crate::sparse::CsrMatrix;

/// Quadrature degree used for loads and error norms of smooth functions.
pub const SMOOTH_DEGREE: usize = 6;

fn scatter(out: &mut CsrMatrix, tri: &[usize; 3], local: &[[f64; 3]; 3]) {
    for a in 0..3 {
        for b in 0..3 {
            out.add_to(tri[a], tri[b], local[a][b]);
        }
    }
}

/// `A_ij = (∇u_j, ∇u_i)`.
pub fn stiffness(level: &MeshLevel) -> CsrMatrix {
    let mut out = level.pattern().zeroed();
    for (tri, g) in level.triangles().iter().zip(level.geometry()) {
        let mut local = [[0.0; 3]; 3];
        for (a, row) in local.iter_mut().enumerate() {
            for (b, v) in row.iter_mut().enumerate() {
                *v = g.area * g.grad_dot(a, b);
            }
        }
        scatter(&mut out, tri, &local);
    }
    out
}

/// `M_ij = (u_j, u_i)`.
pub fn mass(level: &MeshLevel) -> CsrMatrix {
    let mut out = level.pattern().zeroed();
    for (tri, g) in level.triangles().iter().zip(level.geometry()) {
        let mut local = [[0.0; 3]; 3];
        for (a, row) in local.iter_mut().enumerate() {
            for (b, v) in row.iter_mut().enumerate() {
                *v = g.area * if a == b { 2.0 } else { 1.0 } / 12.0;
            }
        }
        scatter(&mut out, tri, &local);
    }
    out
}

/// `(w^power ∇u_j, ∇u_i)` for `power` 1 or 2. Gradients are elementwise
/// constant, so only the element integral of `w^power` is needed; both are
/// computed in closed form.
pub fn weighted_stiffness(level: &MeshLevel, w: &NodalField, power: u32) -> Result<CsrMatrix> {
    level.check(w)?;
    assert!(power == 1 || power == 2, "power must be 1 or 2");
    let mut out = level.pattern().zeroed();
    for (tri, g) in level.triangles().iter().zip(level.geometry()) {
        let [w0, w1, w2] = tri.map(|v| w[v]);
        let mean = if power == 1 {
            (w0 + w1 + w2) / 3.0
        } else {
            (w0 * w0 + w1 * w1 + w2 * w2 + w0 * w1 + w1 * w2 + w0 * w2) / 6.0
        };
        let mut local = [[0.0; 3]; 3];
        for (a, row) in local.iter_mut().enumerate() {
            for (b, v) in row.iter_mut().enumerate() {
                *v = g.area * mean * g.grad_dot(a, b);
            }
        }
        scatter(&mut out, tri, &local);
    }
    Ok(out)
}

/// `Q(ψ)_ij = (ψ² u_j, u_i)`, exact with the degree-4 rule.
pub fn phi_mass(level: &MeshLevel, psi: &NodalField) -> Result<CsrMatrix> {
    level.check(psi)?;
    let rule = QuadratureRule::degree4();
    let mut out = level.pattern().zeroed();
    for (tri, g) in level.triangles().iter().zip(level.geometry()) {
        let vals = tri.map(|v| psi[v]);
        let mut local = [[0.0; 3]; 3];
        for (p, w) in rule.iter() {
            let s = p[0] * vals[0] + p[1] * vals[1] + p[2] * vals[2];
            let ws = g.area * w * s * s;
            for a in 0..3 {
                for b in 0..3 {
                    local[a][b] += ws * p[a] * p[b];
                }
            }
        }
        scatter(&mut out, tri, &local);
    }
    Ok(out)
}

/// `(ψ³, u_i)`, equal to `Q(ψ) ψ` but without forming `Q`.
pub fn cubic_load(level: &MeshLevel, psi: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; level.node_count()];
    cubic_load_into(level, psi, &mut out);
    out
}

pub fn cubic_load_into(level: &MeshLevel, psi: &[f64], out: &mut [f64]) {
    let rule = QuadratureRule::degree4();
    out.iter_mut().for_each(|v| *v = 0.0);
    for (tri, g) in level.triangles().iter().zip(level.geometry()) {
        let vals = tri.map(|v| psi[v]);
        for (p, w) in rule.iter() {
            let s = p[0] * vals[0] + p[1] * vals[1] + p[2] * vals[2];
            let ws = g.area * w * s * s * s;
            for a in 0..3 {
                out[tri[a]] += ws * p[a];
            }
        }
    }
}

/// `b_i = (f, u_i)` with a rule exact through `degree`.
pub fn load(level: &MeshLevel, f: impl Fn(f64, f64) -> f64, degree: usize) -> NodalField {
    let rule = QuadratureRule::for_degree(degree);
    let mut out = level.zeros();
    let coords = level.coords();
    for (tri, g) in level.triangles().iter().zip(level.geometry()) {
        let x = tri.map(|v| coords[v]);
        for (p, w) in rule.iter() {
            let px = p[0] * x[0][0] + p[1] * x[1][0] + p[2] * x[2][0];
            let py = p[0] * x[0][1] + p[1] * x[1][1] + p[2] * x[2][1];
            let ws = g.area * w * f(px, py);
            for a in 0..3 {
                out[tri[a]] += ws * p[a];
            }
        }
    }
    out
}

/// Nodal interpolant `I_h f`.
pub fn interpolate(level: &MeshLevel, f: impl Fn(f64, f64) -> f64) -> NodalField {
    NodalField::new(
        level.level_index(),
        level.coords().iter().map(|x| f(x[0], x[1])).collect(),
    )
}

/// `∫ v_h`, equal to `(M v, 1)`.
pub fn integral(level: &MeshLevel, values: &[f64]) -> f64 {
    level
        .triangles()
        .iter()
        .zip(level.geometry())
        .map(|(t, g)| g.area * (values[t[0]] + values[t[1]] + values[t[2]]) / 3.0)
        .sum()
}

/// Mean over the unit square, `(M v, 1) / |Ω|`.
pub fn mean_value(level: &MeshLevel, values: &[f64]) -> f64 {
    integral(level, values)
}

/// Subtracts the mean so the result has `(M v, 1) = 0`.
pub fn project_zero_mean(level: &MeshLevel, field: &NodalField) -> NodalField {
    let mut out = field.clone();
    out.shift(-mean_value(level, field));
    out
}

/// `‖v_h - u‖_{L²}` by degree-6 quadrature.
pub fn l2_error(level: &MeshLevel, values: &[f64], exact: impl Fn(f64, f64) -> f64) -> f64 {
    error_norm(level, values, exact, None::<fn(f64, f64) -> [f64; 2]>)
}

/// Full `H¹` norm `(‖v_h - u‖² + ‖∇v_h - ∇u‖²)^{1/2}` by degree-6 quadrature.
pub fn h1_error(
    level: &MeshLevel,
    values: &[f64],
    exact: impl Fn(f64, f64) -> f64,
    grad: impl Fn(f64, f64) -> [f64; 2],
) -> f64 {
    error_norm(level, values, exact, Some(grad))
}

fn error_norm(
    level: &MeshLevel,
    values: &[f64],
    exact: impl Fn(f64, f64) -> f64,
    grad: Option<impl Fn(f64, f64) -> [f64; 2]>,
) -> f64 {
    let rule = QuadratureRule::degree6();
    let coords = level.coords();
    let mut total = 0.0;
    for (tri, g) in level.triangles().iter().zip(level.geometry()) {
        let x = tri.map(|v| coords[v]);
        let vals = tri.map(|v| values[v]);
        let gh = [
            vals[0] * g.grads[0][0] + vals[1] * g.grads[1][0] + vals[2] * g.grads[2][0],
            vals[0] * g.grads[0][1] + vals[1] * g.grads[1][1] + vals[2] * g.grads[2][1],
        ];
        for (p, w) in rule.iter() {
            let px = p[0] * x[0][0] + p[1] * x[1][0] + p[2] * x[2][0];
            let py = p[0] * x[0][1] + p[1] * x[1][1] + p[2] * x[2][1];
            let e = p[0] * vals[0] + p[1] * vals[1] + p[2] * vals[2] - exact(px, py);
            let mut local = e * e;
            if let Some(grad) = &grad {
                let ge = grad(px, py);
                let (dx, dy) = (gh[0] - ge[0], gh[1] - ge[1]);
                local += dx * dx + dy * dy;
            }
            total += g.area * w * local;
        }
    }
    libm::sqrt(total)
}
