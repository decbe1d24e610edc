//! Time stepping of the convex-splitting scheme.

use alloc::boxed::Box;
use alloc::format;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::assembly::interpolate;
use crate::error::{DchError, Result};
use crate::field::NodalField;
use crate::mesh::{MeshHierarchy, MeshLevel};
use crate::mms::{ManufacturedSolution, MmsLoads};
use crate::multigrid::MgWorkspace;
use crate::system::{
    compute_sources, consistent_mu, energy, energy_law_audit, total_mass, DchParams, DchState,
    LevelContext,
};

/// Mean of the random spinodal initial data.
pub const SPINODAL_MEAN: f64 = -0.1;
/// Half-width of the uniform perturbation around [`SPINODAL_MEAN`].
pub const SPINODAL_AMPLITUDE: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub enum InitialCondition {
    /// Interpolant of the manufactured solution at `t = 0`.
    Manufactured,
    /// `([1 − cos 4πx][1 − cos 2πy]) / 2 − 1`.
    Cauchy,
    /// Seeded uniform noise around `−0.1`.
    Spinodal,
    /// Nodal values on the finest level.
    Field(Vec<f64>),
}

pub fn cauchy_initial(x: f64, y: f64) -> f64 {
    use core::f64::consts::PI;
    (1.0 - libm::cos(4.0 * PI * x)) * (1.0 - libm::cos(2.0 * PI * y)) / 2.0 - 1.0
}

pub fn initial_condition(
    ic: &InitialCondition,
    level: &MeshLevel,
    seed: u64,
) -> Result<NodalField> {
    match ic {
        InitialCondition::Manufactured => {
            let exact = ManufacturedSolution::new(1.0, 1.0);
            Ok(interpolate(level, |x, y| exact.phi(x, y, 0.0)))
        }
        InitialCondition::Cauchy => Ok(interpolate(level, cauchy_initial)),
        InitialCondition::Spinodal => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let values = (0..level.node_count())
                .map(|_| SPINODAL_MEAN + SPINODAL_AMPLITUDE * rng.random_range(-1.0..1.0))
                .collect();
            Ok(NodalField::new(level.level_index(), values))
        }
        InitialCondition::Field(values) => {
            let f = NodalField::new(level.level_index(), values.clone());
            level.check(&f)?;
            if !f.is_finite() {
                return Err(DchError::InvalidParameter {
                    name: "initial field",
                    reason: "non-finite value".into(),
                });
            }
            Ok(f)
        }
    }
}

/// Diagnostics of one time level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub m: usize,
    pub t: f64,
    pub energy: f64,
    pub mass: f64,
    pub phi_min: f64,
    pub phi_max: f64,
    pub cycles: usize,
    pub residual: f64,
    pub energy_defect: f64,
}

/// A running simulation on a fixed hierarchy.
pub struct Simulation<'a> {
    hierarchy: &'a MeshHierarchy,
    params: DchParams,
    workspace: MgWorkspace<'a>,
    state: DchState,
    step: usize,
    forcing: Option<MmsLoads>,
}

impl<'a> Simulation<'a> {
    /// Starts at `t = 0` from `phi0`, with `p⁰ = 0` and `μ⁰` consistent with
    /// `phi0`. With `manufactured` set, the manufactured source terms are
    /// added at every step.
    pub fn new(
        hierarchy: &'a MeshHierarchy,
        params: DchParams,
        phi0: NodalField,
        manufactured: bool,
    ) -> Result<Self> {
        check_setup(hierarchy, &params)?;
        let finest = hierarchy.finest();
        finest.check(&phi0)?;
        let ctx = LevelContext::new(finest);
        let mu = consistent_mu(&ctx, &params, &phi0)?;
        let state = DchState {
            p: finest.zeros(),
            mu,
            phi: phi0,
        };
        Self::resume(hierarchy, params, state, 0, manufactured)
    }

    /// Continues from `state` taken at step `step`.
    pub fn resume(
        hierarchy: &'a MeshHierarchy,
        params: DchParams,
        state: DchState,
        step: usize,
        manufactured: bool,
    ) -> Result<Self> {
        check_setup(hierarchy, &params)?;
        let finest = hierarchy.finest();
        for f in state.fields() {
            finest.check(f)?;
        }
        let forcing = manufactured.then(|| {
            MmsLoads::new(
                finest,
                ManufacturedSolution::new(params.epsilon, params.gamma),
            )
        });
        Ok(Self {
            hierarchy,
            params,
            workspace: MgWorkspace::new(hierarchy),
            state,
            step,
            forcing,
        })
    }

    /// Replaces the manufactured forcing, e.g. with loads of a different
    /// quadrature degree.
    pub fn with_forcing(mut self, forcing: Option<MmsLoads>) -> Self {
        self.forcing = forcing;
        self
    }

    pub fn params(&self) -> &DchParams {
        &self.params
    }

    pub fn state(&self) -> &DchState {
        &self.state
    }

    pub fn into_state(self) -> DchState {
        self.state
    }

    pub fn step_index(&self) -> usize {
        self.step
    }

    pub fn time(&self) -> f64 {
        self.step as f64 * self.params.tau
    }

    /// Record of the current state without solver information.
    pub fn current_record(&self) -> StepRecord {
        self.record(0, 0.0, 0.0)
    }

    fn record(&self, cycles: usize, residual: f64, energy_defect: f64) -> StepRecord {
        let level = self.hierarchy.finest();
        StepRecord {
            m: self.step,
            t: self.time(),
            energy: energy(level, &self.state.phi, self.params.epsilon),
            mass: total_mass(level, &self.state.phi),
            phi_min: self.state.phi.min(),
            phi_max: self.state.phi.max(),
            cycles,
            residual,
            energy_defect,
        }
    }

    /// Advances one step.
    pub fn step(&mut self) -> Result<StepRecord> {
        let m = self.step + 1;
        let wrap = |e: DchError| DchError::Step {
            step: m,
            source: Box::new(e),
        };
        self.workspace
            .update_previous(&self.state.phi)
            .map_err(wrap)?;
        let ctx = self.workspace.finest();
        let mut s = compute_sources(ctx, &self.params);
        if let Some(forcing) = &self.forcing {
            forcing.add_to_sources(&mut s, m as f64 * self.params.tau, &self.params);
        }
        let (new, report) = self
            .workspace
            .solve(&self.params, &s, self.state.clone())
            .map_err(wrap)?;
        let audit = energy_law_audit(self.hierarchy.finest(), &self.params, &self.state, &new)
            .map_err(wrap)?;
        self.state = new;
        self.step = m;
        Ok(self.record(report.cycles, report.final_residual, audit.defect))
    }

    /// Takes `steps` steps. The observer sees the current record first and
    /// then every completed step, so records already observed survive a
    /// failure.
    pub fn run(
        &mut self,
        steps: usize,
        mut observer: impl FnMut(&StepRecord, &DchState),
    ) -> Result<Vec<StepRecord>> {
        let first = self.current_record();
        observer(&first, &self.state);
        let mut records = Vec::with_capacity(steps + 1);
        records.push(first);
        for _ in 0..steps {
            let rec = self.step()?;
            observer(&rec, &self.state);
            records.push(rec);
        }
        Ok(records)
    }

    /// Runs until `params.final_time`.
    pub fn run_to_end(
        &mut self,
        observer: impl FnMut(&StepRecord, &DchState),
    ) -> Result<Vec<StepRecord>> {
        let total = self.params.steps()?;
        self.run(total.saturating_sub(self.step), observer)
    }
}

fn check_setup(hierarchy: &MeshHierarchy, params: &DchParams) -> Result<()> {
    params.validate()?;
    if hierarchy.finest_level() != params.levels
        || hierarchy.coarsest_cells() != params.coarsest_cells
    {
        return Err(DchError::InvalidParameter {
            name: "L",
            reason: format!(
                "hierarchy has {} levels above {} cells, parameters ask for {} above {}",
                hierarchy.finest_level(),
                hierarchy.coarsest_cells(),
                params.levels,
                params.coarsest_cells
            ),
        });
    }
    Ok(())
}
