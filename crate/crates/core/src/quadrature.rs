//! Quadrature rules on triangles, in barycentric coordinates.
//!
//! Weights are normalized to sum to one, so an integral over a triangle `K`
//! is `|K| * sum_q w_q f(x_q)`.

use alloc::vec::Vec;

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    points: Vec<[f64; 3]>,
    weights: Vec<f64>,
    degree: usize,
}

impl QuadratureRule {
    pub fn points(&self) -> &[[f64; 3]] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Highest total polynomial degree integrated exactly.
    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64; 3], f64)> + '_ {
        self.points.iter().zip(self.weights.iter().copied())
    }

    /// Three interior points, exact for quadratics.
    pub fn degree2() -> Self {
        let a = 1.0 / 6.0;
        let b = 2.0 / 3.0;
        Self {
            points: alloc::vec![[b, a, a], [a, b, a], [a, a, b]],
            weights: alloc::vec![1.0 / 3.0; 3],
            degree: 2,
        }
    }

    /// Six-point symmetric rule, exact through degree 4.
    pub fn degree4() -> Self {
        let mut rule = Self {
            points: Vec::new(),
            weights: Vec::new(),
            degree: 4,
        };
        rule.push_orbit3(0.445_948_490_915_964_886_32, 0.223_381_589_678_011_465_70);
        rule.push_orbit3(0.091_576_213_509_770_743_46, 0.109_951_743_655_321_867_64);
        rule
    }

    /// Twelve-point symmetric rule, exact through degree 6.
    pub fn degree6() -> Self {
        let mut rule = Self {
            points: Vec::new(),
            weights: Vec::new(),
            degree: 6,
        };
        rule.push_orbit3(0.249_286_745_170_910_421_29, 0.116_786_275_726_379_366_03);
        rule.push_orbit3(0.063_089_014_491_502_228_34, 0.050_844_906_370_206_816_92);
        rule.push_orbit6(
            0.053_145_049_844_816_947_35,
            0.310_352_451_033_784_405_42,
            0.082_851_075_618_373_575_19,
        );
        rule
    }

    /// Collapsed (Duffy) tensor Gauss-Legendre rule with `n` points per
    /// direction; exact through degree `2n - 2`.
    pub fn collapsed_gauss(n: usize) -> Self {
        assert!(n >= 1);
        let (nodes, weights) = gauss_legendre_unit(n);
        let mut points = Vec::with_capacity(n * n);
        let mut w = Vec::with_capacity(n * n);
        for (&eta, &we) in nodes.iter().zip(&weights) {
            for (&xi, &wx) in nodes.iter().zip(&weights) {
                let x = xi * (1.0 - eta);
                let y = eta;
                points.push([1.0 - x - y, x, y]);
                // reference area 1/2, Jacobian (1 - eta)
                w.push(2.0 * wx * we * (1.0 - eta));
            }
        }
        Self {
            points,
            weights: w,
            degree: 2 * n - 2,
        }
    }

    /// Cheapest available rule exact through `degree`.
    pub fn for_degree(degree: usize) -> Self {
        match degree {
            0..=2 => Self::degree2(),
            3..=4 => Self::degree4(),
            5..=6 => Self::degree6(),
            d => Self::collapsed_gauss(d.div_ceil(2) + 1),
        }
    }

    fn push_orbit3(&mut self, a: f64, w: f64) {
        let b = 1.0 - 2.0 * a;
        for p in [[b, a, a], [a, b, a], [a, a, b]] {
            self.points.push(p);
            self.weights.push(w);
        }
    }

    fn push_orbit6(&mut self, a: f64, b: f64, w: f64) {
        let c = 1.0 - a - b;
        for p in [
            [a, b, c],
            [a, c, b],
            [b, a, c],
            [b, c, a],
            [c, a, b],
            [c, b, a],
        ] {
            self.points.push(p);
            self.weights.push(w);
        }
    }
}

/// Gauss-Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre_unit(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for k in 1..=n {
        let mut x = libm::cos(core::f64::consts::PI * (k as f64 - 0.25) / (n as f64 + 0.5));
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d != 0.0 {
            dp = d;
        }
        nodes.push(0.5 * (1.0 - x));
        weights.push(1.0 / ((1.0 - x * x) * dp * dp));
    }
    (nodes, weights)
}

/// `P_n(x)` and `P_n'(x)` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}
