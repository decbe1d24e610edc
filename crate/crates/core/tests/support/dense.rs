//! Dense reference implementation of one time step, assembled from scratch
//! with exact barycentric monomial integration and solved by full Newton
//! with dense LU. Shared by the core oracle tests and the acceptance suite.

#![allow(dead_code)]

use dch_core::system::compute_sources;
use dch_core::{build_hierarchy, DchParams, DchState, MgWorkspace, NodalField};
use nalgebra::{DMatrix, DVector, Matrix3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn factorial(k: u32) -> f64 {
    (1..=k).map(f64::from).product()
}

/// `∫_T λ₀^a λ₁^b λ₂^c = 2|T| a! b! c! / (a + b + c + 2)!`.
fn bary_integral(area: f64, e: [u32; 3]) -> f64 {
    2.0 * area * factorial(e[0]) * factorial(e[1]) * factorial(e[2])
        / factorial(e[0] + e[1] + e[2] + 2)
}

fn exponents(idx: &[usize]) -> [u32; 3] {
    let mut e = [0; 3];
    for &k in idx {
        e[k] += 1;
    }
    e
}

struct Element {
    nodes: [usize; 3],
    area: f64,
    /// Row `k` is `∇λ_k`.
    grads: [[f64; 2]; 3],
}

/// Matrices of one step on the uniform `n × n` mesh.
pub struct DenseStep {
    pub n: usize,
    pub eps: f64,
    pub gamma: f64,
    pub tau: f64,
    elements: Vec<Element>,
    pub a: DMatrix<f64>,
    pub m: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub phi_prev: DVector<f64>,
}

impl DenseStep {
    pub fn new(n: usize, eps: f64, gamma: f64, tau: f64, phi_prev: &[f64]) -> Self {
        let side = n + 1;
        let nn = side * side;
        assert_eq!(phi_prev.len(), nn);
        let xy = |k: usize| [(k % side) as f64 / n as f64, (k / side) as f64 / n as f64];
        let mut elements = Vec::new();
        for j in 0..n {
            for i in 0..n {
                let ll = j * side + i;
                for nodes in [[ll, ll + 1, ll + side + 1], [ll, ll + side + 1, ll + side]] {
                    // λ_k = c0 + c1 x + c2 y; the inverse of the vertex matrix holds the coefficients
                    let v = nodes.map(xy);
                    let vm = Matrix3::new(
                        1.0, v[0][0], v[0][1], 1.0, v[1][0], v[1][1], 1.0, v[2][0], v[2][1],
                    );
                    let inv = vm.try_inverse().expect("degenerate triangle");
                    let grads = [0, 1, 2].map(|k| [inv[(1, k)], inv[(2, k)]]);
                    elements.push(Element {
                        nodes,
                        area: vm.determinant().abs() / 2.0,
                        grads,
                    });
                }
            }
        }
        let prev = DVector::from_column_slice(phi_prev);
        let mut a = DMatrix::zeros(nn, nn);
        let mut m = DMatrix::zeros(nn, nn);
        let mut b = DMatrix::zeros(nn, nn);
        let mut c = DMatrix::zeros(nn, nn);
        for el in &elements {
            let w = el.nodes.map(|k| prev[k]);
            // ∫ φprev and ∫ φprev² on the element
            let int_w: f64 = (0..3)
                .map(|k| w[k] * bary_integral(el.area, exponents(&[k])))
                .sum();
            let mut int_w2 = 0.0;
            for k in 0..3 {
                for l in 0..3 {
                    int_w2 += w[k] * w[l] * bary_integral(el.area, exponents(&[k, l]));
                }
            }
            for (p, &i) in el.nodes.iter().enumerate() {
                for (q, &j) in el.nodes.iter().enumerate() {
                    let gg = el.grads[p][0] * el.grads[q][0] + el.grads[p][1] * el.grads[q][1];
                    a[(i, j)] += el.area * gg;
                    c[(i, j)] += int_w * gg;
                    b[(i, j)] += int_w2 * gg;
                    m[(i, j)] += bary_integral(el.area, exponents(&[p, q]));
                }
            }
        }
        Self {
            n,
            eps,
            gamma,
            tau,
            elements,
            a,
            m,
            b,
            c,
            phi_prev: prev,
        }
    }

    pub fn nodes(&self) -> usize {
        self.a.nrows()
    }

    /// `(ψ³, u_i)` and its Jacobian `3 (ψ² u_j, u_i)`.
    pub fn cubic(&self, psi: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>) {
        let nn = self.nodes();
        let mut load = DVector::zeros(nn);
        let mut jac = DMatrix::zeros(nn, nn);
        for el in &self.elements {
            let v = el.nodes.map(|k| psi[k]);
            for (i, &gi) in el.nodes.iter().enumerate() {
                for k in 0..3 {
                    for l in 0..3 {
                        let vkl = v[k] * v[l];
                        for (j, &gj) in el.nodes.iter().enumerate() {
                            jac[(gi, gj)] +=
                                3.0 * vkl * bary_integral(el.area, exponents(&[i, j, k, l]));
                        }
                        for q in 0..3 {
                            load[gi] +=
                                vkl * v[q] * bary_integral(el.area, exponents(&[i, k, l, q]));
                        }
                    }
                }
            }
        }
        (load, jac)
    }

    /// The three blocks of the step operator.
    pub fn operator(
        &self,
        p: &DVector<f64>,
        mu: &DVector<f64>,
        phi: &DVector<f64>,
    ) -> [DVector<f64>; 3] {
        let (eps, gamma, tau) = (self.eps, self.gamma, self.tau);
        let (cub, _) = self.cubic(phi);
        [
            &self.a * p + gamma * (&self.c * mu),
            &self.m * phi
                + tau * (eps * (&self.a * mu) + gamma * (&self.b * mu))
                + tau * (&self.c * p),
            eps * (&self.a * phi) + cub / eps - &self.m * mu,
        ]
    }

    /// Unsourced right-hand side.
    pub fn sources(&self) -> [DVector<f64>; 3] {
        let s2 = &self.m * &self.phi_prev;
        let s3 = &s2 / self.eps;
        [DVector::zeros(self.nodes()), s2, s3]
    }

    /// Solves the step by Newton's method. With `γ > 0` the pressure mean is
    /// fixed by a Lagrange multiplier on `(p, 1) = 0`; with `γ = 0` the
    /// pressure is zero.
    pub fn solve(&self, s: &[DVector<f64>; 3]) -> [DVector<f64>; 3] {
        let nn = self.nodes();
        let (eps, gamma, tau) = (self.eps, self.gamma, self.tau);
        let ones = DVector::from_element(nn, 1.0);
        let m1 = &self.m * &ones;
        let with_p = gamma > 0.0;
        let off = if with_p { nn } else { 0 };
        let size = off + 2 * nn + usize::from(with_p);
        let mut p = DVector::zeros(nn);
        let mut mu = DVector::zeros(nn);
        let mut phi = self.phi_prev.clone();
        let mut lambda = 0.0;
        for _ in 0..60 {
            let n_xi = self.operator(&p, &mu, &phi);
            let (_, q3) = self.cubic(&phi);
            let mut f = DVector::zeros(size);
            let mut jac = DMatrix::zeros(size, size);
            let (rmu, rphi) = (off, off + nn);
            if with_p {
                f.rows_mut(0, nn)
                    .copy_from(&(&n_xi[0] - &s[0] + lambda * &m1));
                jac.view_mut((0, 0), (nn, nn)).copy_from(&self.a);
                jac.view_mut((0, rmu), (nn, nn))
                    .copy_from(&(gamma * &self.c));
                jac.view_mut((rmu, 0), (nn, nn)).copy_from(&(tau * &self.c));
                jac.view_mut((0, size - 1), (nn, 1)).copy_from(&m1);
                jac.view_mut((size - 1, 0), (1, nn))
                    .copy_from(&m1.transpose());
                f[size - 1] = m1.dot(&p);
            }
            f.rows_mut(rmu, nn).copy_from(&(&n_xi[1] - &s[1]));
            f.rows_mut(rphi, nn).copy_from(&(&n_xi[2] - &s[2]));
            jac.view_mut((rmu, rmu), (nn, nn))
                .copy_from(&(tau * (eps * &self.a + gamma * &self.b)));
            jac.view_mut((rmu, rphi), (nn, nn)).copy_from(&self.m);
            jac.view_mut((rphi, rmu), (nn, nn)).copy_from(&(-&self.m));
            jac.view_mut((rphi, rphi), (nn, nn))
                .copy_from(&(eps * &self.a + q3 / eps));
            let delta = jac.lu().solve(&(-&f)).expect("singular Newton matrix");
            if with_p {
                p += delta.rows(0, nn);
                lambda += delta[size - 1];
            }
            mu += delta.rows(rmu, nn);
            phi += delta.rows(rphi, nn);
            let scale = 1.0 + phi.amax().max(mu.amax()).max(p.amax());
            if delta.amax() <= 1e-15 * scale {
                break;
            }
        }
        [p, mu, phi]
    }
}

/// One random step instance on an `n × n` mesh.
#[derive(Debug, Clone)]
pub struct Instance {
    pub n: usize,
    pub eps: f64,
    pub gamma: f64,
    pub tau: f64,
    pub phi_prev: Vec<f64>,
}

/// `ε ∈ [0.05, 1]`, `γ = 0` a quarter of the time and otherwise in
/// `[0.01, 1]`, `τ` log-uniform in `[1e-3, 1]`, `φprev` uniform in `[−1, 1]`.
pub fn random_instance(rng: &mut ChaCha8Rng, n: usize) -> Instance {
    let eps = rng.random_range(0.05..=1.0);
    let gamma = if rng.random_range(0..4) == 0 {
        0.0
    } else {
        rng.random_range(0.01..=1.0)
    };
    let tau = 10f64.powf(rng.random_range(-3.0..=0.0));
    let phi_prev = (0..(n + 1) * (n + 1))
        .map(|_| rng.random_range(-1.0..=1.0))
        .collect();
    Instance {
        n,
        eps,
        gamma,
        tau,
        phi_prev,
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Dense Newton reference, ordered `p, μ, φ`.
pub fn reference(inst: &Instance) -> [Vec<f64>; 3] {
    let dense = DenseStep::new(inst.n, inst.eps, inst.gamma, inst.tau, &inst.phi_prev);
    let s = dense.sources();
    dense.solve(&s).map(|v| v.as_slice().to_vec())
}

/// Multigrid solution of the same step, ordered `p, μ, φ`.
pub fn multigrid(inst: &Instance, tol: f64, max_cycles: usize) -> [Vec<f64>; 3] {
    let levels = inst.n.trailing_zeros() as usize;
    let h = build_hierarchy(1, levels).unwrap();
    let mut params = DchParams::new(inst.eps, inst.gamma, inst.tau, inst.tau, levels);
    params.tol = tol;
    params.max_cycles = max_cycles;
    let mut ws = MgWorkspace::new(&h);
    let prev = NodalField::new(levels, inst.phi_prev.clone());
    ws.update_previous(&prev).unwrap();
    let s = compute_sources(ws.finest(), &params);
    let mut start = DchState::zeros(h.finest());
    start.phi = prev;
    let (st, _) = ws.solve(&params, &s, start).unwrap();
    st.fields().map(|f| f.values().to_vec())
}

/// Max-norm difference per field `[p, μ, φ]`, with each pressure shifted to
/// zero nodal mean first.
pub fn max_differences(a: &[Vec<f64>; 3], b: &[Vec<f64>; 3]) -> [f64; 3] {
    let centred = |v: &[f64]| {
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        v.iter().map(|x| x - mean).collect::<Vec<_>>()
    };
    let (pa, pb) = (centred(&a[0]), centred(&b[0]));
    let diff = |x: &[f64], y: &[f64]| {
        x.iter()
            .zip(y)
            .map(|(u, v)| (u - v).abs())
            .fold(0.0, f64::max)
    };
    [diff(&pa, &pb), diff(&a[1], &b[1]), diff(&a[2], &b[2])]
}
