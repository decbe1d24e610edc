//! Full approximation scheme V-cycle over the mesh hierarchy.

use alloc::vec::Vec;

use crate::assembly;
use crate::error::{DchError, Result};
use crate::field::NodalField;
use crate::mesh::MeshHierarchy;
use crate::smoother::{smooth, SmoothStats};
use crate::system::{apply_operator, residual, DchParams, DchState, LevelContext, SourceTriple};

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub cycles: usize,
    pub final_residual: f64,
    /// Residual RMS before the first cycle followed by one entry per cycle.
    pub history: Vec<f64>,
    /// Local smoother solves that hit their iteration limit.
    pub smoother_flags: usize,
}

/// Per-level operators for one time step.
#[derive(Debug, Clone)]
pub struct MgWorkspace<'a> {
    hierarchy: &'a MeshHierarchy,
    contexts: Vec<LevelContext<'a>>,
}

impl<'a> MgWorkspace<'a> {
    /// Assembles `A` and `M` on every level; `B` and `C` start at zero.
    pub fn new(hierarchy: &'a MeshHierarchy) -> Self {
        let contexts = hierarchy.levels().iter().map(LevelContext::new).collect();
        Self {
            hierarchy,
            contexts,
        }
    }

    /// Restricts `φ^{m-1}` to every level and rebuilds the lagged matrices.
    pub fn update_previous(&mut self, phi_prev: &NodalField) -> Result<()> {
        self.hierarchy.finest().check(phi_prev)?;
        let mut field = phi_prev.clone();
        for l in (0..self.contexts.len()).rev() {
            let next = if l > 0 {
                self.hierarchy.restrict_nodal(&field)?
            } else {
                NodalField::default()
            };
            self.contexts[l].set_previous(core::mem::replace(&mut field, next))?;
        }
        Ok(())
    }

    pub fn hierarchy(&self) -> &'a MeshHierarchy {
        self.hierarchy
    }

    pub fn finest_level(&self) -> usize {
        self.contexts.len() - 1
    }

    pub fn context(&self, l: usize) -> Result<&LevelContext<'a>> {
        self.contexts.get(l).ok_or(DchError::NoSuchLevel {
            level: l,
            finest: self.finest_level(),
        })
    }

    pub fn finest(&self) -> &LevelContext<'a> {
        &self.contexts[self.finest_level()]
    }

    /// One V-cycle for `N_l(ξ) = s` starting from `state`.
    pub fn v_cycle(
        &self,
        l: usize,
        state: &mut DchState,
        s: &SourceTriple,
        params: &DchParams,
    ) -> Result<SmoothStats> {
        let ctx = self.context(l)?;
        if l == 0 {
            return smooth(
                ctx,
                params,
                s,
                state,
                params.sweeps + params.coarsest_extra_sweeps,
            );
        }
        let mut stats = smooth(ctx, params, s, state, params.sweeps)?;

        let coarse_ctx = &self.contexts[l - 1];
        let h = self.hierarchy;
        let restricted = DchState {
            p: h.restrict_nodal(&state.p)?,
            mu: h.restrict_nodal(&state.mu)?,
            phi: h.restrict_nodal(&state.phi)?,
        };
        let r = residual_unpinned(ctx, params, s, state)?;
        let n_coarse = apply_operator(coarse_ctx, params, &restricted)?;
        let mut s_coarse = n_coarse;
        for (sc, rf) in s_coarse.blocks_mut().into_iter().zip(r.blocks()) {
            let rc = h.restrict_canonical(rf)?;
            sc.axpy(1.0, &rc);
        }

        let mut coarse = restricted.clone();
        stats += self.v_cycle(l - 1, &mut coarse, &s_coarse, params)?;

        for ((fine, new), old) in state
            .fields_mut()
            .into_iter()
            .zip(coarse.fields())
            .zip(restricted.fields())
        {
            let mut delta = new.clone();
            delta.axpy(-1.0, old);
            let correction = h.prolong(&delta)?;
            fine.axpy(1.0, &correction);
        }

        stats += smooth(ctx, params, s, state, params.sweeps)?;
        Ok(stats)
    }

    /// V-cycles on the finest level until the residual RMS drops below
    /// `params.tol`. The pressure is shifted to zero mean after each cycle.
    pub fn solve(
        &self,
        params: &DchParams,
        s: &SourceTriple,
        initial: DchState,
    ) -> Result<(DchState, SolveReport)> {
        let finest = self.finest_level();
        let ctx = self.finest();
        let mut state = initial;
        let mut history = Vec::new();
        let mut flags = 0;
        let mut rms = residual(ctx, params, s, &state)?.rms();
        history.push(rms);
        let mut cycles = 0;
        while !(rms < params.tol) && cycles < params.max_cycles {
            let stats = self.v_cycle(finest, &mut state, s, params)?;
            flags += stats.flagged;
            let mean = assembly::mean_value(ctx.mesh, &state.p);
            state.p.shift(-mean);
            cycles += 1;
            rms = residual(ctx, params, s, &state)?.rms();
            history.push(rms);
            if !rms.is_finite() {
                break;
            }
        }
        let report = SolveReport {
            cycles,
            final_residual: rms,
            history,
            smoother_flags: flags,
        };
        if rms < params.tol {
            Ok((state, report))
        } else {
            Err(DchError::NotConverged(alloc::boxed::Box::new(report)))
        }
    }
}

/// `s − N(ξ)` including the pressure block, which the coarse right-hand side
/// needs even when the pressure is pinned.
fn residual_unpinned(
    ctx: &LevelContext,
    params: &DchParams,
    s: &SourceTriple,
    xi: &DchState,
) -> Result<SourceTriple> {
    let mut r = apply_operator(ctx, params, xi)?;
    for (rb, sb) in r.blocks_mut().into_iter().zip(s.blocks()) {
        for (x, y) in rb.iter_mut().zip(sb.iter()) {
            *x = y - *x;
        }
    }
    Ok(r)
}
