//! Time integration: implicit diffusion with membrane coupling per species and
//! explicit (optionally regularized) reaction, plus the steady-state fixture.

use std::sync::{Arc, Mutex};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::elliptic::{assemble, assemble_sided, MembraneOperator};
use crate::error::{check_len, Error, Result};
use crate::field::{Field, MultiField};
use crate::linalg::BandedLdl;
use crate::mesh::{build_interval_mesh, build_rect_mesh, MembraneMesh, Subdomain, Wall};
use crate::monitors::{MonitorRecord, MonitorStream};
use crate::reactions::{mollify_initial, regularize, make_truncation, ReactionField, ReactionSystem};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeshSpec {
    Interval { length1: f64, length2: f64, n1: usize, n2: usize },
    Rectangle { length1: f64, length2: f64, height: f64, n1: usize, n2: usize, ny: usize },
}

impl MeshSpec {
    pub fn build(&self) -> Result<MembraneMesh> {
        match *self {
            MeshSpec::Interval { length1, length2, n1, n2 } => build_interval_mesh(length1, length2, n1, n2),
            MeshSpec::Rectangle { length1, length2, height, n1, n2, ny } => {
                build_rect_mesh(length1, length2, height, n1, n2, ny)
            }
        }
    }

    /// Same geometry with every cell count multiplied by `factor`.
    pub fn refined(&self, factor: usize) -> MeshSpec {
        match *self {
            MeshSpec::Interval { length1, length2, n1, n2 } => MeshSpec::Interval {
                length1,
                length2,
                n1: n1 * factor,
                n2: n2 * factor,
            },
            MeshSpec::Rectangle { length1, length2, height, n1, n2, ny } => MeshSpec::Rectangle {
                length1,
                length2,
                height,
                n1: n1 * factor,
                n2: n2 * factor,
                ny: ny * factor,
            },
        }
    }

    pub fn cell_count(&self) -> usize {
        match *self {
            MeshSpec::Interval { n1, n2, .. } => n1 + n2,
            MeshSpec::Rectangle { n1, n2, ny, .. } => (n1 + n2) * ny,
        }
    }
}

/// Initial concentration of one species.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialData {
    Zero,
    Constant { value: f64 },
    /// All of `mass` placed in the cell containing `(x, y)`.
    Spike {
        x: f64,
        #[serde(default)]
        y: f64,
        mass: f64,
    },
    /// The cell containing `(x, y)` set to `height`, all others zero.
    Peak {
        x: f64,
        #[serde(default)]
        y: f64,
        height: f64,
    },
    /// `value` on cells whose center has `x0 ≤ x ≤ x1`.
    Block { x0: f64, x1: f64, value: f64 },
    /// `amplitude·|sin(π·modes·x/L)|·sin(π·y/H)` (the `y` factor only in 2D).
    Sine { amplitude: f64, modes: u32 },
    /// Independent uniform values in `[0, amplitude]` per cell.
    Rough { amplitude: f64, seed: u64 },
    Values { values: Vec<f64> },
}

impl InitialData {
    pub fn realize(&self, mesh: &MembraneMesh) -> Result<Field> {
        let n = mesh.cell_count();
        let field = match self {
            InitialData::Zero => Field::zeros(n),
            InitialData::Constant { value } => Field::constant(n, *value),
            InitialData::Spike { x, y, mass } => {
                let c = mesh.cell_containing(*x, *y)?;
                let mut f = Field::zeros(n);
                f[c] = mass / mesh.cells()[c].volume;
                f
            }
            InitialData::Peak { x, y, height } => {
                let c = mesh.cell_containing(*x, *y)?;
                let mut f = Field::zeros(n);
                f[c] = *height;
                f
            }
            InitialData::Block { x0, x1, value } => Field::from_fn(n, |i| {
                let x = mesh.cells()[i].center[0];
                if (*x0..=*x1).contains(&x) {
                    *value
                } else {
                    0.0
                }
            }),
            InitialData::Sine { amplitude, modes } => {
                let (l1, l2) = mesh.lengths();
                let h = mesh.height();
                let two_d = mesh.dim() == 2;
                Field::from_fn(n, |i| {
                    let [x, y] = mesh.cells()[i].center;
                    let sx = (std::f64::consts::PI * f64::from(*modes) * x / (l1 + l2)).sin();
                    let sy = if two_d { (std::f64::consts::PI * y / h).sin() } else { 1.0 };
                    amplitude * sx.abs() * sy
                })
            }
            InitialData::Rough { amplitude, seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                Field::from_fn(n, |_| amplitude * rng.gen::<f64>())
            }
            InitialData::Values { values } => {
                check_len(n, values.len())?;
                Field(values.clone())
            }
        };
        if let Some((i, v)) = field.iter().enumerate().find(|(_, v)| !(**v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidData(format!(
                "initial data must be finite and nonnegative, cell {i} has {v}"
            )));
        }
        Ok(field)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeciesSpec {
    pub diffusion: f64,
    pub permeability: f64,
    pub initial: InitialData,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReactionSpec {
    pub label: String,
    #[serde(default)]
    pub rates: Vec<f64>,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonitorConfig {
    /// Dual norm of `Û` per step.
    #[serde(default = "yes")]
    pub dual_norm: bool,
    /// `E(t)` and the key-estimate check; needs equal permeabilities.
    #[serde(default)]
    pub key_estimate: bool,
    /// Truncation levels `b` for the sublevel energy check.
    #[serde(default)]
    pub truncation_levels: Vec<f64>,
    #[serde(default)]
    pub weighted_gradient_alpha: Option<f64>,
    #[serde(default)]
    pub lbeta: Option<f64>,
    /// Species the single-field monitors look at.
    #[serde(default)]
    pub species: usize,
    /// Keep every state and source in the trajectory.
    #[serde(default)]
    pub store_fields: bool,
}

impl Default for MonitorConfig {
    fn default() -> Self {
        MonitorConfig {
            dual_norm: true,
            key_estimate: false,
            truncation_levels: Vec::new(),
            weighted_gradient_alpha: None,
            lbeta: None,
            species: 0,
            store_fields: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default = "Tolerances::default_positivity")]
    pub positivity: f64,
    /// How many times the positivity guard may halve a step.
    #[serde(default = "Tolerances::default_halvings")]
    pub max_halvings: u32,
    #[serde(default = "Tolerances::default_key_slack")]
    pub key_slack: f64,
    #[serde(default = "Tolerances::default_truncation_slack")]
    pub truncation_slack: f64,
}

impl Tolerances {
    fn default_positivity() -> f64 {
        1e-12
    }
    fn default_halvings() -> u32 {
        20
    }
    fn default_key_slack() -> f64 {
        0.05
    }
    fn default_truncation_slack() -> f64 {
        0.10
    }
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            positivity: Self::default_positivity(),
            max_halvings: Self::default_halvings(),
            key_slack: Self::default_key_slack(),
            truncation_slack: Self::default_truncation_slack(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub mesh: MeshSpec,
    pub species: Vec<SpeciesSpec>,
    pub reaction: ReactionSpec,
    /// Reaction regularization level `n`; `None` runs the raw reaction.
    #[serde(default)]
    pub regularization: Option<u32>,
    /// Also clip and mollify the initial data at the regularization level.
    #[serde(default)]
    pub mollify_initial: bool,
    pub t_end: f64,
    pub dt: f64,
    #[serde(default)]
    pub monitors: MonitorConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
}

impl SimConfig {
    /// Checks every invariant; the error names the offending field.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return bad(format!("dt: must be positive, got {}", self.dt));
        }
        if !(self.t_end >= self.dt) || !self.t_end.is_finite() {
            return bad(format!("t_end: must be at least dt = {}, got {}", self.dt, self.t_end));
        }
        if self.species.is_empty() {
            return bad("species: at least one species is required".into());
        }
        for (i, s) in self.species.iter().enumerate() {
            if !(s.diffusion > 0.0) || !s.diffusion.is_finite() {
                return bad(format!("species[{i}].diffusion: must be positive, got {}", s.diffusion));
            }
            if !(s.permeability > 0.0) || !s.permeability.is_finite() {
                return bad(format!("species[{i}].permeability: must be positive, got {}", s.permeability));
            }
        }
        if self.monitors.key_estimate && !self.equal_permeabilities() {
            let ks: Vec<f64> = self.species.iter().map(|s| s.permeability).collect();
            return bad(format!(
                "monitors.key_estimate: the key estimate requires equal permeabilities k_1 = ... = k_m, got {ks:?}"
            ));
        }
        if self.regularization == Some(0) {
            return bad("regularization: level must be at least 1".into());
        }
        if self.mollify_initial && self.regularization.is_none() {
            return bad("mollify_initial: requires a regularization level".into());
        }
        if self.monitors.species >= self.species.len() {
            return bad(format!(
                "monitors.species: index {} out of range for {} species",
                self.monitors.species,
                self.species.len()
            ));
        }
        for b in &self.monitors.truncation_levels {
            make_truncation(*b).map_err(|e| Error::Config(format!("monitors.truncation_levels: {e}")))?;
        }
        if let Some(a) = self.monitors.weighted_gradient_alpha {
            if !(0.0..0.5).contains(&a) {
                return bad(format!("monitors.weighted_gradient_alpha: must lie in [0, 1/2), got {a}"));
            }
        }
        if let Some(b) = self.monitors.lbeta {
            if !(b >= 1.0) {
                return bad(format!("monitors.lbeta: must be at least 1, got {b}"));
            }
        }
        if !(self.tolerances.positivity >= 0.0) {
            return bad("tolerances.positivity: must be nonnegative".into());
        }
        self.reaction_system().map_err(|e| Error::Config(format!("reaction: {e}")))?;
        Ok(())
    }

    pub fn equal_permeabilities(&self) -> bool {
        self.species.windows(2).all(|w| w[0].permeability == w[1].permeability)
    }

    pub fn reaction_system(&self) -> Result<ReactionSystem> {
        ReactionSystem::by_label(&self.reaction.label, self.species.len(), &self.reaction.rates)
    }

    /// The reaction actually integrated, regularized when configured.
    pub fn active_reaction(&self) -> Result<Arc<dyn ReactionField>> {
        let sys = self.reaction_system()?;
        Ok(match self.regularization {
            Some(n) => Arc::new(regularize(&sys, n)?),
            None => Arc::new(sys),
        })
    }

    pub fn step_count(&self) -> usize {
        ((self.t_end / self.dt) - 1e-9).ceil().max(1.0) as usize
    }

    pub fn diffusions(&self) -> Vec<f64> {
        self.species.iter().map(|s| s.diffusion).collect()
    }

    pub fn initial_state(&self, mesh: &MembraneMesh) -> Result<MultiField> {
        let mut species = Vec::with_capacity(self.species.len());
        for s in &self.species {
            let mut f = s.initial.realize(mesh)?;
            if let (true, Some(n)) = (self.mollify_initial, self.regularization) {
                f = mollify_initial(&f, n, mesh)?;
            }
            species.push(f);
        }
        Ok(MultiField::new(species))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub t: f64,
    pub step: usize,
    pub u: MultiField,
}

/// What happened during one call to [`Integrator::step_imex`].
#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    pub dt: f64,
    /// Substeps taken by the positivity guard (1 when no halving occurred).
    pub substeps: u32,
    /// Time-averaged reaction source over the step, per species.
    pub sources: MultiField,
    /// Largest per-side mass budget residual over species, sides and substeps.
    pub budget_residual: f64,
    /// Time-integrated membrane transfer `Ω¹ → Ω²` per species.
    pub membrane_transfer: Vec<f64>,
}

/// Per-species implicit operators with a factorization cache keyed by step size.
pub struct Integrator {
    mesh: Arc<MembraneMesh>,
    operators: Vec<MembraneOperator>,
    reaction: Arc<dyn ReactionField>,
    order: Vec<usize>,
    factors: Vec<Mutex<Vec<(u64, Arc<BandedLdl>)>>>,
    boundary: Vec<[f64; 2]>,
    positivity_tol: f64,
    max_halvings: u32,
}

impl Integrator {
    pub fn new(mesh: Arc<MembraneMesh>, operators: Vec<MembraneOperator>, reaction: Arc<dyn ReactionField>) -> Result<Self> {
        if operators.len() != reaction.species() {
            return Err(Error::Dimension { expected: reaction.species(), found: operators.len() });
        }
        if operators.iter().any(|op| !Arc::ptr_eq(op.mesh(), &mesh)) {
            return Err(Error::InvalidGeometry("operators must share the integrator's mesh".into()));
        }
        let m = operators.len();
        Ok(Integrator {
            order: mesh.banded_order(),
            mesh,
            operators,
            reaction,
            factors: (0..m).map(|_| Mutex::new(Vec::new())).collect(),
            boundary: vec![[0.0; 2]; m],
            positivity_tol: 1e-12,
            max_halvings: 20,
        })
    }

    pub fn from_config(config: &SimConfig) -> Result<Self> {
        config.validate()?;
        let mesh = Arc::new(config.mesh.build()?);
        let operators = config
            .species
            .iter()
            .map(|s| assemble(&mesh, s.diffusion, s.permeability))
            .collect::<Result<Vec<_>>>()?;
        Ok(Integrator::new(mesh, operators, config.active_reaction()?)?
            .with_positivity(config.tolerances.positivity, config.tolerances.max_halvings))
    }

    pub fn with_positivity(mut self, tol: f64, max_halvings: u32) -> Self {
        self.positivity_tol = tol;
        self.max_halvings = max_halvings;
        self
    }

    /// Imposes `left` on the `x = 0` wall and `right` on the far wall for one species
    /// by lifting the boundary values into the right-hand side. Verification only.
    pub fn with_boundary_values(mut self, species: usize, left: f64, right: f64) -> Result<Self> {
        if species >= self.boundary.len() {
            return Err(Error::InvalidParameter(format!("no species {species}")));
        }
        self.boundary[species] = [left, right];
        Ok(self)
    }

    pub fn mesh(&self) -> &Arc<MembraneMesh> {
        &self.mesh
    }

    pub fn operators(&self) -> &[MembraneOperator] {
        &self.operators
    }

    pub fn species(&self) -> usize {
        self.operators.len()
    }

    fn factor(&self, species: usize, dt: f64) -> Result<Arc<BandedLdl>> {
        let mut cache = self.factors[species].lock().expect("factor cache poisoned");
        if let Some((_, f)) = cache.iter().find(|(k, _)| *k == dt.to_bits()) {
            return Ok(Arc::clone(f));
        }
        let op = &self.operators[species];
        let shifted = op.matrix().shifted(op.mass_weights(), dt);
        let f = Arc::new(BandedLdl::factor(&shifted, &self.order)?);
        cache.push((dt.to_bits(), Arc::clone(&f)));
        Ok(f)
    }

    /// Reaction source `f(u)` evaluated cellwise.
    pub fn sources(&self, u: &MultiField) -> MultiField {
        let (m, n) = (u.species_count(), u.cell_count());
        let mut out = MultiField::zeros(m, n);
        let mut ui = vec![0.0; m];
        let mut fi = vec![0.0; m];
        for c in 0..n {
            u.gather(c, &mut ui);
            self.reaction.eval(&ui, &mut fi);
            for (s, v) in fi.iter().enumerate() {
                out.species[s][c] = *v;
            }
        }
        out
    }

    fn lift(&self, species: usize) -> Option<Field> {
        let [left, right] = self.boundary[species];
        if left == 0.0 && right == 0.0 {
            return None;
        }
        let op = &self.operators[species];
        let mut g = Field::zeros(self.mesh.cell_count());
        for (f, c) in self.mesh.dirichlet_faces().iter().zip(op.dirichlet_coefficients()) {
            match f.wall {
                Wall::Left => g[f.cell] += c * left,
                Wall::Right => g[f.cell] += c * right,
                _ => {}
            }
        }
        Some(g)
    }

    /// Advances `state` by `dt`: `(M + dt·A_i) u_i' = M (u_i + dt·f_i(u))`, halving the
    /// step recursively whenever the explicit part would leave a negative value.
    pub fn step_imex(&self, state: &SimState, dt: f64) -> Result<(SimState, StepReport)> {
        if !(dt > 0.0) {
            return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")));
        }
        if state.u.species_count() != self.species() {
            return Err(Error::Dimension { expected: self.species(), found: state.u.species_count() });
        }
        check_len(self.mesh.cell_count(), state.u.cell_count())?;
        let m = self.species();
        let mut acc = StepReport {
            dt,
            substeps: 0,
            sources: MultiField::zeros(m, self.mesh.cell_count()),
            budget_residual: 0.0,
            membrane_transfer: vec![0.0; m],
        };
        let u = self.advance(&state.u, dt, 0, &mut acc)?;
        for s in acc.sources.species.iter_mut() {
            s.iter_mut().for_each(|v| *v /= dt);
        }
        let next = SimState { t: state.t + dt, step: state.step + 1, u };
        Ok((next, acc))
    }

    fn advance(&self, u: &MultiField, dt: f64, depth: u32, acc: &mut StepReport) -> Result<MultiField> {
        let f = self.sources(u);
        let mut worst = (0usize, 0usize, f64::INFINITY);
        for (s, (us, fs)) in u.species.iter().zip(&f.species).enumerate() {
            for (c, (a, b)) in us.iter().zip(fs.iter()).enumerate() {
                let v = a + dt * b;
                if v < worst.2 {
                    worst = (s, c, v);
                }
            }
        }
        if !worst.2.is_finite() && u.cell_count() > 0 {
            return Err(Error::NonFinite(format!("reaction source at species {} cell {}", worst.0, worst.1)));
        }
        if worst.2 < -self.positivity_tol {
            if depth >= self.max_halvings {
                return Err(Error::Positivity { species: worst.0, cell: worst.1, value: worst.2 });
            }
            let half = self.advance(u, 0.5 * dt, depth + 1, acc)?;
            return self.advance(&half, 0.5 * dt, depth + 1, acc);
        }

        let solved: Vec<(Field, f64, f64)> = (0..self.species())
            .into_par_iter()
            .map(|s| self.solve_species(s, &u.species[s], &f.species[s], dt))
            .collect::<Result<Vec<_>>>()?;
        let mut next = Vec::with_capacity(solved.len());
        for (s, (field, residual, transfer)) in solved.into_iter().enumerate() {
            acc.budget_residual = acc.budget_residual.max(residual);
            acc.membrane_transfer[s] += transfer;
            acc.sources.species[s]
                .iter_mut()
                .zip(f.species[s].iter())
                .for_each(|(a, v)| *a += dt * v);
            if let Some((c, v)) = field.iter().copied().enumerate().find(|(_, v)| !v.is_finite()) {
                return Err(Error::NonFinite(format!("species {s} cell {c} became {v}")));
            }
            let (c, v) = field
                .iter()
                .copied()
                .enumerate()
                .fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
            if v < -self.positivity_tol {
                return Err(Error::Positivity { species: s, cell: c, value: v });
            }
            next.push(field);
        }
        acc.substeps += 1;
        Ok(MultiField::new(next))
    }

    /// One implicit solve; returns the new field, the larger side budget residual and
    /// the membrane transfer over the substep.
    fn solve_species(&self, s: usize, u: &Field, f: &Field, dt: f64) -> Result<(Field, f64, f64)> {
        let op = &self.operators[s];
        let mass = op.mass_weights();
        let lift = self.lift(s);
        let mut rhs: Vec<f64> = u.iter().zip(f.iter()).zip(mass).map(|((u, f), m)| m * (u + dt * f)).collect();
        if let Some(g) = &lift {
            rhs.iter_mut().zip(g.iter()).for_each(|(r, g)| *r += dt * g);
        }
        let next = Field(self.factor(s, dt)?.solve(&rhs));

        let side_sum = |v: &[f64], sub: Subdomain| -> f64 {
            self.mesh.subdomain_cells(sub).map(|c| v[c]).sum()
        };
        let mass_of = |v: &Field, sub| side_sum(&v.iter().zip(mass).map(|(a, m)| a * m).collect::<Vec<_>>(), sub);
        let src: Vec<f64> = f.iter().zip(mass).map(|(f, m)| f * m).collect();
        let outflow = op.dirichlet_outflow(&next)?;
        let flux: f64 = op.membrane_fluxes(&next)?.iter().sum();
        let inflow = lift.as_ref().map_or([0.0; 2], |g| [side_sum(g, Subdomain::One), side_sum(g, Subdomain::Two)]);
        let r1 = mass_of(&next, Subdomain::One) - mass_of(u, Subdomain::One)
            - dt * (side_sum(&src, Subdomain::One) + inflow[0] - outflow[0] - flux);
        let r2 = mass_of(&next, Subdomain::Two) - mass_of(u, Subdomain::Two)
            - dt * (side_sum(&src, Subdomain::Two) + inflow[1] - outflow[1] + flux);
        Ok((next, r1.abs().max(r2.abs()), dt * flux))
    }
}

/// Result of [`simulate`]. On a step failure the records up to the failure are kept
/// and `failure` carries the error.
#[derive(Debug)]
pub struct Trajectory {
    pub mesh: Arc<MembraneMesh>,
    pub initial: MonitorRecord,
    pub records: Vec<MonitorRecord>,
    /// States at `t = 0` and after every step, when fields are stored.
    pub states: Vec<MultiField>,
    /// Time-averaged sources per step, when fields are stored.
    pub sources: Vec<MultiField>,
    pub dts: Vec<f64>,
    pub final_state: SimState,
    /// Data of the key-estimate monitor, when enabled.
    pub key: Option<crate::monitors::KeyEstimateData>,
    pub failure: Option<Error>,
}

impl Trajectory {
    /// Turns a recorded failure into an error.
    pub fn into_result(self) -> Result<Trajectory> {
        match self.failure {
            Some(e) => Err(e),
            None => Ok(self),
        }
    }

    pub fn times(&self) -> Vec<f64> {
        std::iter::once(self.initial.t).chain(self.records.iter().map(|r| r.t)).collect()
    }
}

/// Runs the configured system to `t_end`, one [`MonitorRecord`] per step.
pub fn simulate(config: &SimConfig) -> Result<Trajectory> {
    let integrator = Integrator::from_config(config)?;
    simulate_with(config, &integrator)
}

/// As [`simulate`] with a prepared integrator (for instance one with lifted boundary values).
pub fn simulate_with(config: &SimConfig, integrator: &Integrator) -> Result<Trajectory> {
    config.validate()?;
    let mesh = Arc::clone(integrator.mesh());
    let u0 = config.initial_state(&mesh)?;
    let mut stream = MonitorStream::new(config, integrator)?;
    let mut state = SimState { t: 0.0, step: 0, u: u0 };
    let initial = stream.initial(&state)?;
    let store = config.monitors.store_fields;
    let steps = config.step_count();
    let mut traj = Trajectory {
        mesh,
        initial,
        records: Vec::with_capacity(steps),
        states: if store { vec![state.u.clone()] } else { Vec::new() },
        sources: Vec::new(),
        dts: Vec::with_capacity(steps),
        final_state: state.clone(),
        key: stream.key_data(),
        failure: None,
    };
    for k in 0..steps {
        let dt = if k + 1 == steps { config.t_end - config.dt * k as f64 } else { config.dt };
        let outcome = integrator
            .step_imex(&state, dt)
            .and_then(|(next, report)| stream.record(&state, &next, &report).map(|rec| (next, report, rec)));
        match outcome {
            Ok((next, report, rec)) => {
                traj.records.push(rec);
                traj.dts.push(dt);
                if store {
                    traj.states.push(next.u.clone());
                    traj.sources.push(report.sources);
                }
                state = next;
            }
            Err(e) => {
                traj.failure = Some(e);
                break;
            }
        }
    }
    traj.key = stream.key_data();
    traj.final_state = state;
    Ok(traj)
}

/// Stationary profile of the 1D membrane problem with wall values `left` at `x = 0`
/// and `right` at the far end.
#[derive(Debug, Clone, PartialEq)]
pub struct SteadyState {
    pub u: Field,
    /// Flux density through the membrane, positive from Ω¹ to Ω².
    pub flux: f64,
    /// `(u¹(Γ), u²(Γ))`
    pub traces: (f64, f64),
    /// `u²(Γ) − u¹(Γ)`
    pub jump: f64,
}

/// Solves `A u = lift` where the membrane flux density is `k·[u]`.
pub fn steady_state(mesh: &Arc<MembraneMesh>, diffusion: [f64; 2], k: f64, left: f64, right: f64) -> Result<SteadyState> {
    if mesh.dim() != 1 {
        return Err(Error::InvalidGeometry("the steady fixture needs a 1D mesh".into()));
    }
    if !(left >= 0.0) || !(right >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "boundary values must be nonnegative, got {left} and {right}"
        )));
    }
    let op = assemble_sided(mesh, diffusion[0], diffusion[1], k)?;
    let mut rhs = vec![0.0; mesh.cell_count()];
    for (f, c) in mesh.dirichlet_faces().iter().zip(op.dirichlet_coefficients()) {
        match f.wall {
            Wall::Left => rhs[f.cell] += c * left,
            Wall::Right => rhs[f.cell] += c * right,
            _ => {}
        }
    }
    let u = Field(BandedLdl::factor(op.matrix(), &mesh.banded_order())?.solve(&rhs));
    let face = &mesh.membrane_faces()[0];
    let flux = op.membrane_fluxes(&u)?[0] / face.area;
    let traces = op.face_traces(&u)?[0];
    Ok(SteadyState { flux, traces, jump: traces.1 - traces.0, u })
}

/// Closed-form `(J, [u])` of the 1D steady problem.
pub fn steady_closed_form(lengths: (f64, f64), diffusion: [f64; 2], k: f64, left: f64, right: f64) -> (f64, f64) {
    let j = (left - right) / (lengths.0 / diffusion[0] + lengths.1 / diffusion[1] + 1.0 / k);
    (j, -j / k)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn interval(n: usize) -> Arc<MembraneMesh> {
        Arc::new(build_interval_mesh(1.0, 1.0, n, n).unwrap())
    }

    fn heat_config(initial: InitialData) -> SimConfig {
        SimConfig {
            mesh: MeshSpec::Interval { length1: 1.0, length2: 1.0, n1: 16, n2: 16 },
            species: vec![SpeciesSpec { diffusion: 1.0, permeability: 1.0, initial }],
            reaction: ReactionSpec { label: "zero".into(), rates: vec![] },
            regularization: None,
            mollify_initial: false,
            t_end: 0.1,
            dt: 0.01,
            monitors: MonitorConfig::default(),
            tolerances: Tolerances::default(),
        }
    }

    #[test]
    fn steady_series_resistance() {
        let s = steady_state(&interval(8), [1.0, 1.0], 1.0, 1.0, 0.0).unwrap();
        assert!((s.flux - 1.0 / 3.0).abs() < 1e-12);
        assert!((s.jump + 1.0 / 3.0).abs() < 1e-12);
        assert!((s.traces.0 - 2.0 / 3.0).abs() < 1e-12);
        for (c, v) in interval(8).cells().iter().zip(s.u.iter()) {
            let x = c.center[0];
            let exact = if x < 1.0 { 1.0 - x / 3.0 } else { (2.0 - x) / 3.0 };
            assert!((v - exact).abs() < 1e-12);
        }
    }

    #[test]
    fn steady_equilibrium_and_large_k() {
        let s = steady_state(&interval(4), [1.0, 2.0], 3.0, 0.5, 0.5).unwrap();
        assert!(s.flux.abs() < 1e-14 && s.jump.abs() < 1e-14);
        assert!(s.u.iter().all(|v| (v - 0.5).abs() < 1e-14));
        let s = steady_state(&interval(4), [1.0, 1.0], 1e9, 1.0, 0.0).unwrap();
        assert!((s.flux - 0.5).abs() < 1e-8 && s.jump.abs() < 1e-8);
    }

    #[test]
    fn zero_dynamics_stay_zero() {
        let t = simulate(&heat_config(InitialData::Zero)).unwrap().into_result().unwrap();
        assert_eq!(t.records.len(), 10);
        assert!(t.final_state.u.species[0].iter().all(|v| *v == 0.0));
    }

    #[test]
    fn heat_contracts_in_l2() {
        let mut cfg = heat_config(InitialData::Sine { amplitude: 1.0, modes: 3 });
        cfg.monitors.store_fields = true;
        let t = simulate(&cfg).unwrap().into_result().unwrap();
        let l2: Vec<f64> = t.records.iter().map(|r| r.l2[0]).collect();
        assert!(l2.windows(2).all(|w| w[1] <= w[0]));
        assert!(l2[0] <= t.initial.l2[0]);
    }

    #[test]
    fn one_step_run_has_one_record() {
        let mut cfg = heat_config(InitialData::Constant { value: 1.0 });
        cfg.t_end = cfg.dt;
        assert_eq!(simulate(&cfg).unwrap().records.len(), 1);
    }

    #[test]
    fn lifted_boundary_reaches_steady_profile() {
        let mut cfg = heat_config(InitialData::Zero);
        cfg.t_end = 20.0;
        cfg.dt = 0.05;
        let integ = Integrator::from_config(&cfg).unwrap().with_boundary_values(0, 1.0, 0.0).unwrap();
        let t = simulate_with(&cfg, &integ).unwrap().into_result().unwrap();
        let mesh = integ.mesh();
        // with κ = D·k = 1 the steady profile is the series-resistance one
        let s = steady_state(mesh, [1.0, 1.0], 1.0, 1.0, 0.0).unwrap();
        let err = t.final_state.u.species[0]
            .iter()
            .zip(s.u.iter())
            .fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
        assert!(err < 1e-8, "{err}");
        assert!(t.records.iter().all(|r| r.budget_residual < 1e-12));
    }

    #[test]
    fn positivity_guard_halves_steps() {
        let mut cfg = heat_config(InitialData::Constant { value: 50.0 });
        cfg.species.push(cfg.species[0].clone());
        cfg.reaction.label = "annihilation".into();
        cfg.dt = 0.1;
        cfg.t_end = 0.2;
        let t = simulate(&cfg).unwrap().into_result().unwrap();
        assert!(t.records[0].substeps > 1);
        assert!(t.records.iter().all(|r| r.min_value >= -1e-12));

        cfg.tolerances.max_halvings = 0;
        let t = simulate(&cfg).unwrap();
        assert!(matches!(t.failure, Some(Error::Positivity { .. })));
        assert!(t.records.is_empty());
    }

    #[test]
    fn config_validation_messages() {
        let mut cfg = heat_config(InitialData::Zero);
        cfg.dt = 0.0;
        assert!(cfg.validate().unwrap_err().to_string().contains("dt"));
        let mut cfg = heat_config(InitialData::Zero);
        cfg.species.push(SpeciesSpec { diffusion: 1.0, permeability: 2.0, initial: InitialData::Zero });
        cfg.monitors.key_estimate = true;
        assert!(cfg.validate().unwrap_err().to_string().contains("equal permeabilities"));
    }

    #[test]
    fn spike_holds_its_mass() {
        let mesh = build_rect_mesh(1.0, 1.0, 1.0, 4, 4, 4).unwrap();
        let f = InitialData::Spike { x: 0.3, y: 0.6, mass: 2.0 }.realize(&mesh).unwrap();
        let m: f64 = f.iter().zip(mesh.volumes()).map(|(a, v)| a * v).sum();
        assert!((m - 2.0).abs() < 1e-14);
    }
}
