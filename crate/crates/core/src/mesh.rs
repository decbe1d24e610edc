//! Nested uniform triangulations of the unit square and the intergrid
//! transfer operators between consecutive levels.
//!
//! Level `l` has `n = n0 * 2^l` cells per side. Nodes are numbered
//! lexicographically, `index = j * (n + 1) + i` for the node at
//! `(i / n, j / n)`. Each cell is split by its bottom-left to top-right
//! diagonal into two right-isosceles triangles, so regular refinement of a
//! coarse triangle yields exactly four triangles of the next level.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{DchError, Result};
use crate::field::NodalField;
use crate::sparse::CsrMatrix;

/// Area and barycentric gradients of one triangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementGeometry {
    pub area: f64,
    pub grads: [[f64; 2]; 3],
}

impl ElementGeometry {
    fn new(p: [[f64; 2]; 3]) -> Self {
        let [a, b, c] = p;
        let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
        let grads = [
            [(b[1] - c[1]) / det, (c[0] - b[0]) / det],
            [(c[1] - a[1]) / det, (a[0] - c[0]) / det],
            [(a[1] - b[1]) / det, (b[0] - a[0]) / det],
        ];
        Self {
            area: 0.5 * det,
            grads,
        }
    }

    /// `∇λ_a · ∇λ_b`.
    #[inline]
    pub fn grad_dot(&self, a: usize, b: usize) -> f64 {
        self.grads[a][0] * self.grads[b][0] + self.grads[a][1] * self.grads[b][1]
    }
}

#[derive(Debug, Clone)]
pub struct MeshLevel {
    level_index: usize,
    n: usize,
    coords: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
    geometry: Vec<ElementGeometry>,
    incident_offsets: Vec<usize>,
    incident: Vec<(usize, usize)>,
    pattern: CsrMatrix,
}

impl MeshLevel {
    /// Uniform triangulation with `n` cells per side.
    pub fn uniform(level_index: usize, n: usize) -> Self {
        assert!(n >= 1);
        let side = n + 1;
        let mut coords = Vec::with_capacity(side * side);
        for j in 0..side {
            for i in 0..side {
                coords.push([i as f64 / n as f64, j as f64 / n as f64]);
            }
        }
        let mut triangles = Vec::with_capacity(2 * n * n);
        for j in 0..n {
            for i in 0..n {
                let v00 = j * side + i;
                let v10 = v00 + 1;
                let v01 = v00 + side;
                let v11 = v01 + 1;
                triangles.push([v00, v10, v11]);
                triangles.push([v00, v11, v01]);
            }
        }
        let geometry: Vec<ElementGeometry> = triangles
            .iter()
            .map(|t| ElementGeometry::new([coords[t[0]], coords[t[1]], coords[t[2]]]))
            .collect();

        let mut counts = vec![0usize; side * side + 1];
        for t in &triangles {
            for &v in t {
                counts[v + 1] += 1;
            }
        }
        for k in 0..side * side {
            counts[k + 1] += counts[k];
        }
        let incident_offsets = counts.clone();
        let mut next = counts;
        let mut incident = vec![(0, 0); 3 * triangles.len()];
        for (e, t) in triangles.iter().enumerate() {
            for (local, &v) in t.iter().enumerate() {
                incident[next[v]] = (e, local);
                next[v] += 1;
            }
        }

        let mut rows: Vec<Vec<usize>> = vec![Vec::new(); side * side];
        for t in &triangles {
            for &a in t {
                rows[a].extend_from_slice(t);
            }
        }
        let pattern = CsrMatrix::zeros_with_pattern(side * side, &rows);

        Self {
            level_index,
            n,
            coords,
            triangles,
            geometry,
            incident_offsets,
            incident,
            pattern,
        }
    }

    pub fn level_index(&self) -> usize {
        self.level_index
    }

    /// Cells per side.
    pub fn cells_per_side(&self) -> usize {
        self.n
    }

    pub fn node_count(&self) -> usize {
        self.coords.len()
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    /// Mesh size: the hypotenuse length `sqrt(2) / n`.
    pub fn h(&self) -> f64 {
        core::f64::consts::SQRT_2 / self.n as f64
    }

    /// Leg length `1 / n` of every triangle.
    pub fn leg(&self) -> f64 {
        1.0 / self.n as f64
    }

    pub fn node_index(&self, i: usize, j: usize) -> usize {
        j * (self.n + 1) + i
    }

    pub fn coords(&self) -> &[[f64; 2]] {
        &self.coords
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn geometry(&self) -> &[ElementGeometry] {
        &self.geometry
    }

    /// `(triangle, local vertex)` pairs of the triangles touching `node`.
    pub fn incident(&self, node: usize) -> &[(usize, usize)] {
        &self.incident[self.incident_offsets[node]..self.incident_offsets[node + 1]]
    }

    /// Zero-valued matrix with the P1 node adjacency structure.
    pub fn pattern(&self) -> &CsrMatrix {
        &self.pattern
    }

    pub fn zeros(&self) -> NodalField {
        NodalField::zeros(self.level_index, self.node_count())
    }

    pub fn constant(&self, c: f64) -> NodalField {
        NodalField::constant(self.level_index, self.node_count(), c)
    }

    /// Checks that `field` belongs to this level.
    pub fn check(&self, field: &NodalField) -> Result<()> {
        field.expect_level(self.level_index)?;
        field.expect_len(self.node_count())
    }

    /// Point evaluation of the P1 function with nodal `values` at `(x, y)`.
    pub fn evaluate(&self, values: &[f64], x: f64, y: f64) -> f64 {
        let n = self.n;
        let sx = x * n as f64;
        let sy = y * n as f64;
        let i = (libm::floor(sx) as isize).clamp(0, n as isize - 1) as usize;
        let j = (libm::floor(sy) as isize).clamp(0, n as isize - 1) as usize;
        let xi = sx - i as f64;
        let eta = sy - j as f64;
        let v00 = values[self.node_index(i, j)];
        let v10 = values[self.node_index(i + 1, j)];
        let v01 = values[self.node_index(i, j + 1)];
        let v11 = values[self.node_index(i + 1, j + 1)];
        if xi >= eta {
            v00 + xi * (v10 - v00) + eta * (v11 - v10)
        } else {
            v00 + eta * (v01 - v00) + xi * (v11 - v01)
        }
    }
}

/// Matrices moving data between level `l - 1` (coarse) and level `l` (fine).
#[derive(Debug, Clone)]
pub struct Transfer {
    /// `N_l x N_{l-1}` matrix of the natural injection.
    pub prolongation: CsrMatrix,
    /// Canonical restriction, the transpose of `prolongation`.
    pub restriction: CsrMatrix,
    /// Point sampling at coarse node positions.
    pub nodal_restriction: CsrMatrix,
}

impl Transfer {
    fn between(coarse: &MeshLevel, fine: &MeshLevel) -> Self {
        let nc = coarse.cells_per_side();
        let nf = fine.cells_per_side();
        debug_assert_eq!(nf, 2 * nc);
        let mut triplets = Vec::with_capacity(2 * fine.node_count());
        for jf in 0..=nf {
            for i_f in 0..=nf {
                let row = fine.node_index(i_f, jf);
                let (ic, jc) = (i_f / 2, jf / 2);
                match (i_f % 2, jf % 2) {
                    (0, 0) => triplets.push((row, coarse.node_index(ic, jc), 1.0)),
                    (1, 0) => {
                        triplets.push((row, coarse.node_index(ic, jc), 0.5));
                        triplets.push((row, coarse.node_index(ic + 1, jc), 0.5));
                    }
                    (0, 1) => {
                        triplets.push((row, coarse.node_index(ic, jc), 0.5));
                        triplets.push((row, coarse.node_index(ic, jc + 1), 0.5));
                    }
                    _ => {
                        // midpoint of the coarse cell lies on its diagonal
                        triplets.push((row, coarse.node_index(ic, jc), 0.5));
                        triplets.push((row, coarse.node_index(ic + 1, jc + 1), 0.5));
                    }
                }
            }
        }
        let prolongation =
            CsrMatrix::from_triplets(fine.node_count(), coarse.node_count(), &triplets);
        let restriction = prolongation.transpose();
        let sampling: Vec<(usize, usize, f64)> = (0..=nc)
            .flat_map(|jc| (0..=nc).map(move |ic| (ic, jc)))
            .map(|(ic, jc)| {
                (
                    coarse.node_index(ic, jc),
                    fine.node_index(2 * ic, 2 * jc),
                    1.0,
                )
            })
            .collect();
        let nodal_restriction =
            CsrMatrix::from_triplets(coarse.node_count(), fine.node_count(), &sampling);
        Self {
            prolongation,
            restriction,
            nodal_restriction,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MeshHierarchy {
    coarsest_cells: usize,
    levels: Vec<MeshLevel>,
    transfers: Vec<Transfer>,
}

/// Builds levels `0..=finest` with `coarsest_cells * 2^l` cells per side.
pub fn build_hierarchy(coarsest_cells: usize, finest: usize) -> Result<MeshHierarchy> {
    if coarsest_cells == 0 || finest == 0 {
        return Err(DchError::InvalidHierarchy {
            coarsest_cells,
            levels: finest,
        });
    }
    let levels: Vec<MeshLevel> = (0..=finest)
        .map(|l| MeshLevel::uniform(l, coarsest_cells << l))
        .collect();
    let transfers = levels
        .windows(2)
        .map(|w| Transfer::between(&w[0], &w[1]))
        .collect();
    Ok(MeshHierarchy {
        coarsest_cells,
        levels,
        transfers,
    })
}

impl MeshHierarchy {
    pub fn coarsest_cells(&self) -> usize {
        self.coarsest_cells
    }

    /// Index of the finest level.
    pub fn finest_level(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn levels(&self) -> &[MeshLevel] {
        &self.levels
    }

    pub fn level(&self, l: usize) -> Result<&MeshLevel> {
        self.levels.get(l).ok_or(DchError::NoSuchLevel {
            level: l,
            finest: self.finest_level(),
        })
    }

    pub fn finest(&self) -> &MeshLevel {
        self.levels
            .last()
            .expect("hierarchy has at least two levels")
    }

    /// Transfer operators between `fine_level - 1` and `fine_level`.
    pub fn transfer(&self, fine_level: usize) -> Result<&Transfer> {
        if fine_level == 0 {
            return Err(DchError::NoSuchLevel {
                level: 0,
                finest: self.finest_level(),
            });
        }
        self.transfers
            .get(fine_level - 1)
            .ok_or(DchError::NoSuchLevel {
                level: fine_level,
                finest: self.finest_level(),
            })
    }

    /// Interpolates a level `l - 1` function onto level `l`.
    pub fn prolong(&self, coarse: &NodalField) -> Result<NodalField> {
        let target = coarse.level() + 1;
        let t = self.transfer(target)?;
        coarse.expect_len(t.prolongation.ncols())?;
        Ok(NodalField::new(target, t.prolongation.mul_vec(coarse)))
    }

    /// Applies the transpose of the prolongation (for dual, residual-type vectors).
    pub fn restrict_canonical(&self, fine: &NodalField) -> Result<NodalField> {
        let t = self.transfer(fine.level())?;
        fine.expect_len(t.restriction.ncols())?;
        Ok(NodalField::new(
            fine.level() - 1,
            t.restriction.mul_vec(fine),
        ))
    }

    /// Samples a fine function at the coarse nodes.
    pub fn restrict_nodal(&self, fine: &NodalField) -> Result<NodalField> {
        let t = self.transfer(fine.level())?;
        fine.expect_len(t.nodal_restriction.ncols())?;
        Ok(NodalField::new(
            fine.level() - 1,
            t.nodal_restriction.mul_vec(fine),
        ))
    }

    /// Composition of nodal restrictions from `field`'s level down to `target`.
    pub fn restrict_nodal_to(&self, field: &NodalField, target: usize) -> Result<NodalField> {
        if target > field.level() {
            return Err(DchError::NoSuchLevel {
                level: target,
                finest: field.level(),
            });
        }
        let mut out = field.clone();
        while out.level() > target {
            out = self.restrict_nodal(&out)?;
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_refinement_counts() {
        let h = build_hierarchy(1, 1).unwrap();
        let l1 = &h.levels()[1];
        assert_eq!(l1.node_count(), 9);
        assert_eq!(l1.triangle_count(), 8);
        assert!((l1.h() - core::f64::consts::SQRT_2 / 2.0).abs() < 1e-15);
    }

    #[test]
    fn eight_levels_reach_256_cells() {
        let h = build_hierarchy(1, 8).unwrap();
        assert_eq!(h.finest().cells_per_side(), 256);
        assert_eq!(h.finest().h(), core::f64::consts::SQRT_2 / 256.0);
        assert_eq!(build_hierarchy(1, 4).unwrap().levels().len(), 5);
    }

    #[test]
    fn rejects_empty_hierarchies() {
        assert!(build_hierarchy(0, 3).is_err());
        assert!(build_hierarchy(2, 0).is_err());
    }

    #[test]
    fn triangles_are_right_isosceles_and_tile_the_square() {
        let h = build_hierarchy(1, 4).unwrap();
        for level in h.levels() {
            let n = level.cells_per_side();
            assert_eq!(level.node_count(), (n + 1) * (n + 1));
            assert_eq!(level.triangle_count(), 2 * n * n);
            let mut total = 0.0;
            for (t, g) in level.triangles().iter().zip(level.geometry()) {
                assert!(g.area > 0.0, "counterclockwise orientation");
                total += g.area;
                let p = t.map(|v| level.coords()[v]);
                let mut lens: Vec<f64> = (0..3)
                    .map(|k| {
                        let (a, b) = (p[k], p[(k + 1) % 3]);
                        libm::hypot(a[0] - b[0], a[1] - b[1])
                    })
                    .collect();
                lens.sort_by(f64::total_cmp);
                assert!((lens[0] - level.leg()).abs() < 1e-14);
                assert!((lens[1] - level.leg()).abs() < 1e-14);
                assert!((lens[2] - level.h()).abs() < 1e-14);
            }
            assert!((total - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn levels_are_nested() {
        let h = build_hierarchy(1, 4).unwrap();
        for l in 1..=4 {
            let (coarse, fine) = (&h.levels()[l - 1], &h.levels()[l]);
            assert_eq!(coarse.h(), 2.0 * fine.h());
            for &c in coarse.coords() {
                assert!(fine.coords().contains(&c));
            }
            // every fine triangle lies inside exactly one coarse triangle with
            // a quarter of its area
            let mut children = vec![0usize; coarse.triangle_count()];
            for t in fine.triangles() {
                let p = t.map(|v| fine.coords()[v]);
                let centroid = [
                    (p[0][0] + p[1][0] + p[2][0]) / 3.0,
                    (p[0][1] + p[1][1] + p[2][1]) / 3.0,
                ];
                let parent = coarse
                    .triangles()
                    .iter()
                    .position(|ct| {
                        let q = ct.map(|v| coarse.coords()[v]);
                        let g = ElementGeometry::new(q);
                        (0..3).all(|k| {
                            let lam = g.grads[k][0] * (centroid[0] - q[(k + 1) % 3][0])
                                + g.grads[k][1] * (centroid[1] - q[(k + 1) % 3][1]);
                            lam > 0.0
                        })
                    })
                    .unwrap();
                // each vertex of the child must be inside (or on) the parent
                let q = coarse.triangles()[parent].map(|v| coarse.coords()[v]);
                let g = ElementGeometry::new(q);
                for v in p {
                    for k in 0..3 {
                        let lam = g.grads[k][0] * (v[0] - q[(k + 1) % 3][0])
                            + g.grads[k][1] * (v[1] - q[(k + 1) % 3][1]);
                        assert!(lam > -1e-12);
                    }
                }
                children[parent] += 1;
            }
            assert!(children.iter().all(|&c| c == 4));
            let ratio = coarse.geometry()[0].area / fine.geometry()[0].area;
            assert!((ratio - 4.0).abs() < 1e-12);
        }
    }

    #[test]
    fn prolongation_structure() {
        let h = build_hierarchy(1, 3).unwrap();
        for l in 1..=3 {
            let p = &h.transfer(l).unwrap().prolongation;
            for i in 0..p.nrows() {
                let (cols, vals) = p.row(i);
                assert!(cols.len() <= 2);
                for &v in vals {
                    assert!(v == 0.5 || v == 1.0);
                }
                assert_eq!(vals.iter().sum::<f64>(), 1.0);
            }
        }
    }

    #[test]
    fn constants_survive_all_transfers() {
        let h = build_hierarchy(1, 3).unwrap();
        let c = h.levels()[2].constant(3.25);
        assert!(h.prolong(&c).unwrap().iter().all(|&v| v == 3.25));
        assert!(h.restrict_nodal(&c).unwrap().iter().all(|&v| v == 3.25));
        let z = h.levels()[3].zeros();
        assert!(h.restrict_canonical(&z).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn coarse_hat_function_is_reproduced() {
        let h = build_hierarchy(1, 3).unwrap();
        let coarse = &h.levels()[2];
        let fine = &h.levels()[3];
        let k = coarse.node_index(2, 1);
        let mut hat = coarse.zeros();
        hat[k] = 1.0;
        let fine_hat = h.prolong(&hat).unwrap();
        for (v, x) in fine_hat.iter().zip(fine.coords()) {
            assert!((v - coarse.evaluate(&hat, x[0], x[1])).abs() < 1e-15);
        }
    }

    #[test]
    fn fine_only_node_vanishes_under_nodal_restriction() {
        let h = build_hierarchy(1, 2).unwrap();
        let fine = &h.levels()[2];
        let mut f = fine.zeros();
        f[fine.node_index(1, 2)] = 7.0;
        assert!(h.restrict_nodal(&f).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn length_mismatch_is_rejected() {
        let h = build_hierarchy(1, 2).unwrap();
        let bad = NodalField::zeros(1, 3);
        assert!(matches!(
            h.prolong(&bad),
            Err(DchError::LengthMismatch { .. })
        ));
        let bad = NodalField::zeros(2, 3);
        assert!(h.restrict_nodal(&bad).is_err());
        assert!(h.restrict_canonical(&bad).is_err());
    }

    fn field(level: &MeshLevel, seed: &[f64]) -> NodalField {
        NodalField::new(
            level.level_index(),
            (0..level.node_count())
                .map(|k| seed[k % seed.len()] * (1.0 + k as f64).sin())
                .collect(),
        )
    }

    proptest! {
        #[test]
        fn prolongation_matches_point_evaluation(seed in prop::collection::vec(-5.0f64..5.0, 1..20)) {
            let h = build_hierarchy(1, 3).unwrap();
            let coarse = &h.levels()[2];
            let v = field(coarse, &seed);
            let pv = h.prolong(&v).unwrap();
            for (x, val) in h.levels()[3].coords().iter().zip(pv.iter()) {
                prop_assert!((coarse.evaluate(&v, x[0], x[1]) - val).abs() < 1e-13);
            }
            prop_assert_eq!(h.restrict_nodal(&pv).unwrap(), v);
        }

        #[test]
        fn canonical_restriction_is_adjoint(a in prop::collection::vec(-5.0f64..5.0, 1..20),
                                             b in prop::collection::vec(-5.0f64..5.0, 1..20)) {
            let h = build_hierarchy(2, 2).unwrap();
            let v = field(&h.levels()[1], &a);
            let w = field(&h.levels()[2], &b);
            let lhs = crate::field::dot(&h.prolong(&v).unwrap(), &w);
            let rhs = crate::field::dot(&v, &h.restrict_canonical(&w).unwrap());
            prop_assert!((lhs - rhs).abs() < 1e-12 * (1.0 + lhs.abs()));
        }
    }
}
