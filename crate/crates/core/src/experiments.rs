//! Verification campaigns: regularization sweeps, refinement studies, Poincaré
//! constants and the check suites behind `kkmem verify`.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::elliptic::{assemble, DEFAULT_TOLERANCE};
use crate::error::{Error, Result};
use crate::field::{Field, MultiField};
use crate::mesh::{build_interval_mesh, MembraneMesh};
use crate::monitors::{
    key_estimate_check, lbeta_gradient_and_trace, log_log_slope, species_operator, species_sources,
    species_states, time_translation_modulus, truncation_energy_check, weighted_gradient_norm, DirectDualNorm,
};
use crate::parabolic::{
    simulate, steady_closed_form, steady_state, InitialData, MeshSpec, MonitorConfig, ReactionSpec, SimConfig,
    SpeciesSpec, Tolerances, Trajectory,
};
use crate::reactions::{builtin_annihilation, builtin_transport_demo, check_system, make_truncation};

/// One verdict with both sides of the comparison.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub observed: f64,
    pub threshold: f64,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool, observed: f64, threshold: f64, detail: impl Into<String>) -> Self {
        Check { name: name.into(), passed, observed, threshold, detail: detail.into() }
    }

    /// `observed ≤ threshold`
    pub fn at_most(name: impl Into<String>, observed: f64, threshold: f64, detail: impl Into<String>) -> Self {
        Check::new(name, observed <= threshold, observed, threshold, detail)
    }

    /// `observed ≥ threshold`
    pub fn at_least(name: impl Into<String>, observed: f64, threshold: f64, detail: impl Into<String>) -> Self {
        Check::new(name, observed >= threshold, observed, threshold, detail)
    }

    fn failed(name: impl Into<String>, err: &Error) -> Self {
        Check::new(name, false, f64::NAN, f64::NAN, format!("error: {err}"))
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}: observed {:.6e}, threshold {:.6e}{}{}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.observed,
            self.threshold,
            if self.detail.is_empty() { "" } else { " -- " },
            self.detail
        )
    }
}

pub fn all_passed(checks: &[Check]) -> bool {
    checks.iter().all(|c| c.passed)
}

fn one_species(d: f64, k: f64, initial: InitialData) -> SpeciesSpec {
    SpeciesSpec { diffusion: d, permeability: k, initial }
}

/// Annihilation on `(0,1) ∪ (1,2)` with `cells` per side, `D = (1, 0.5)`, `k = 1`,
/// unit-mass spikes at `x = 0.5`, `dt = 10⁻³`, `T = 1`, all monitors on.
pub fn standard_annihilation(cells: usize) -> SimConfig {
    let spike = InitialData::Spike { x: 0.5, y: 0.0, mass: 1.0 };
    SimConfig {
        mesh: MeshSpec::Interval { length1: 1.0, length2: 1.0, n1: cells, n2: cells },
        species: vec![one_species(1.0, 1.0, spike.clone()), one_species(0.5, 1.0, spike)],
        reaction: ReactionSpec { label: "annihilation".into(), rates: vec![] },
        regularization: None,
        mollify_initial: false,
        t_end: 1.0,
        dt: 1e-3,
        monitors: MonitorConfig {
            dual_norm: true,
            key_estimate: true,
            truncation_levels: vec![4.0, 8.0, 16.0],
            weighted_gradient_alpha: Some(0.4),
            lbeta: Some(1.5),
            species: 0,
            store_fields: true,
        },
        tolerances: Tolerances::default(),
    }
}

/// Annihilation with both species starting as a single cell of height 10³ at `x = 0.5`,
/// on a mesh fine enough that each spike carries about unit mass.
pub fn tall_spike(level: Option<u32>) -> SimConfig {
    let peak = InitialData::Peak { x: 0.5, y: 0.0, height: 1e3 };
    SimConfig {
        mesh: MeshSpec::Interval { length1: 1.0, length2: 1.0, n1: 1024, n2: 1024 },
        species: vec![one_species(1.0, 1.0, peak.clone()), one_species(0.5, 1.0, peak)],
        reaction: ReactionSpec { label: "annihilation".into(), rates: vec![] },
        regularization: level,
        mollify_initial: false,
        t_end: 0.25,
        dt: 1e-3,
        monitors: MonitorConfig { dual_norm: false, store_fields: true, ..MonitorConfig::default() },
        tolerances: Tolerances::default(),
    }
}

/// Single-species heat equation with membrane and independent random cell values.
pub fn rough_heat() -> SimConfig {
    SimConfig {
        mesh: MeshSpec::Interval { length1: 1.0, length2: 1.0, n1: 64, n2: 64 },
        species: vec![one_species(1.0, 1.0, InitialData::Rough { amplitude: 1.0, seed: 7 })],
        reaction: ReactionSpec { label: "zero".into(), rates: vec![] },
        regularization: None,
        mollify_initial: false,
        t_end: 0.2,
        dt: 1e-3,
        monitors: MonitorConfig { dual_norm: false, store_fields: true, ..MonitorConfig::default() },
        tolerances: Tolerances::default(),
    }
}

/// Single-species heat with membrane and smooth data, for self-convergence.
pub fn smooth_heat(cells: usize, dt: f64) -> SimConfig {
    SimConfig {
        mesh: MeshSpec::Interval { length1: 1.0, length2: 1.0, n1: cells, n2: cells },
        species: vec![one_species(1.0, 1.0, InitialData::Sine { amplitude: 1.0, modes: 1 })],
        reaction: ReactionSpec { label: "zero".into(), rates: vec![] },
        regularization: None,
        mollify_initial: false,
        t_end: 0.1,
        dt,
        monitors: MonitorConfig { dual_norm: false, ..MonitorConfig::default() },
        tolerances: Tolerances::default(),
    }
}

/// 2D annihilation on `(0,1)∪(1,2) × (0,1)` with block data, for the a priori norms.
pub fn apriori_2d(cells: usize) -> SimConfig {
    SimConfig {
        mesh: MeshSpec::Rectangle { length1: 1.0, length2: 1.0, height: 1.0, n1: cells, n2: cells, ny: cells },
        species: vec![
            one_species(1.0, 1.0, InitialData::Block { x0: 0.25, x1: 1.25, value: 4.0 }),
            one_species(0.5, 1.0, InitialData::Block { x0: 0.75, x1: 1.75, value: 4.0 }),
        ],
        reaction: ReactionSpec { label: "annihilation".into(), rates: vec![] },
        regularization: None,
        mollify_initial: false,
        t_end: 0.1,
        dt: 2e-3,
        monitors: MonitorConfig { dual_norm: false, store_fields: true, ..MonitorConfig::default() },
        tolerances: Tolerances::default(),
    }
}

/// `‖a − b‖_{L¹(Q_T)}` per species using right-endpoint time sums.
fn space_time_l1(a: &Trajectory, b: &Trajectory) -> Result<Vec<f64>> {
    if a.states.len() != b.states.len() || a.states.is_empty() {
        return Err(Error::InvalidData("trajectories must store the same number of states".into()));
    }
    let vol = a.mesh.volumes();
    let m = a.states[0].species_count();
    let mut d = vec![0.0; m];
    for ((ua, ub), dt) in a.states[1..].iter().zip(&b.states[1..]).zip(&a.dts) {
        for (s, acc) in d.iter_mut().enumerate() {
            *acc += dt * l1_distance(&ua.species[s], &ub.species[s], &vol);
        }
    }
    Ok(d)
}

fn l1_distance(a: &[f64], b: &[f64], vol: &[f64]) -> f64 {
    a.iter().zip(b).zip(vol).map(|((x, y), m)| m * (x - y).abs()).sum()
}

/// Convergence table of a sweep over regularization levels.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegularizationTable {
    pub levels: Vec<u32>,
    /// `d[k][i] = ‖u_i^{n_{k+1}} − u_i^{n_k}‖_{L¹(Q_T)}`
    pub d: Vec<Vec<f64>>,
    /// All differences vanish: the regularization never activates.
    pub inactive: bool,
    /// First `(k, species)` where `d` fails to decrease.
    pub offending: Option<(usize, usize)>,
}

impl RegularizationTable {
    pub fn passed(&self) -> bool {
        self.inactive || self.offending.is_none()
    }
}

/// Runs `config` at every level and reports the successive `L¹(Q_T)` differences.
pub fn regularization_sweep(config: &SimConfig, levels: &[u32]) -> Result<RegularizationTable> {
    if levels.len() < 3 || levels.windows(2).any(|w| w[1] <= w[0]) || levels[0] == 0 {
        return Err(Error::InvalidParameter(format!(
            "need at least 3 strictly increasing positive levels, got {levels:?}"
        )));
    }
    let runs: Vec<Trajectory> = levels
        .par_iter()
        .map(|&n| {
            let mut c = config.clone();
            c.regularization = Some(n);
            c.monitors.store_fields = true;
            simulate(&c)?.into_result()
        })
        .collect::<Result<_>>()?;
    let d = runs.windows(2).map(|w| space_time_l1(&w[0], &w[1])).collect::<Result<Vec<_>>>()?;
    let inactive = d.iter().flatten().all(|v| *v == 0.0);
    let mut offending = None;
    'outer: for k in 0..d.len().saturating_sub(1) {
        for s in 0..d[k].len() {
            if !(d[k + 1][s] < d[k][s]) {
                offending = Some((k, s));
                break 'outer;
            }
        }
    }
    Ok(RegularizationTable { levels: levels.to_vec(), d, inactive, offending })
}

/// Error of the steady fixture on successively refined meshes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SteadyRow {
    pub cells: usize,
    pub max_error: f64,
    pub flux_error: f64,
    pub jump_error: f64,
}

/// Steady fixture `L₁=L₂=1, D=1, k=1, a=1, c=0` against its piecewise-linear closed form.
pub fn steady_refinement(cells: &[usize]) -> Result<Vec<SteadyRow>> {
    cells
        .iter()
        .map(|&n| {
            let mesh = Arc::new(build_interval_mesh(1.0, 1.0, n, n)?);
            let s = steady_state(&mesh, [1.0, 1.0], 1.0, 1.0, 0.0)?;
            let (j, jump) = steady_closed_form((1.0, 1.0), [1.0, 1.0], 1.0, 1.0, 0.0);
            let max_error = mesh
                .cells()
                .iter()
                .zip(s.u.iter())
                .map(|(c, v)| {
                    let x = c.center[0];
                    let exact = if x < 1.0 { 1.0 - j * x } else { j * (2.0 - x) };
                    (v - exact).abs()
                })
                .fold(0.0, f64::max);
            Ok(SteadyRow { cells: n, max_error, flux_error: (s.flux - j).abs(), jump_error: (s.jump - jump).abs() })
        })
        .collect()
}

/// Successive-difference self-convergence table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceTable {
    /// Refinement parameter of each level (cells per side, or `dt`).
    pub parameter: Vec<f64>,
    /// `‖u_l − R u_{l+1}‖_{L¹(Ω)}` at the final time.
    pub differences: Vec<f64>,
    /// `log₂(d_l / d_{l+1})`
    pub orders: Vec<f64>,
}

impl ConvergenceTable {
    pub fn final_order(&self) -> f64 {
        self.orders.last().copied().unwrap_or(f64::NAN)
    }
}

/// Averages a fine 1D or 2D field onto the mesh with half as many cells per direction.
fn restrict(fine: &Field, fine_mesh: &MembraneMesh, coarse_mesh: &MembraneMesh) -> Result<Field> {
    let mut acc = Field::zeros(coarse_mesh.cell_count());
    let mut vol = vec![0.0; coarse_mesh.cell_count()];
    for (c, v) in fine_mesh.cells().iter().zip(fine.iter()) {
        let k = coarse_mesh.cell_containing(c.center[0], c.center[1])?;
        acc[k] += c.volume * v;
        vol[k] += c.volume;
    }
    acc.iter_mut().zip(&vol).for_each(|(a, v)| *a /= v);
    Ok(acc)
}

fn final_species(config: &SimConfig) -> Result<(MembraneMesh, MultiField)> {
    let t = simulate(config)?.into_result()?;
    Ok((config.mesh.build()?, t.final_state.u))
}

fn self_convergence(configs: Vec<SimConfig>, parameter: Vec<f64>, nested: bool) -> Result<ConvergenceTable> {
    if configs.len() < 3 {
        return Err(Error::InvalidParameter("need at least 3 refinement levels".into()));
    }
    let finals: Vec<(MembraneMesh, MultiField)> = configs.par_iter().map(final_species).collect::<Result<_>>()?;
    let mut differences = Vec::new();
    for w in finals.windows(2) {
        let ((cm, cu), (fm, fu)) = (&w[0], &w[1]);
        let vol = cm.volumes();
        let mut d = 0.0;
        for (c, f) in cu.species.iter().zip(&fu.species) {
            let r = if nested { restrict(f, fm, cm)? } else { f.clone() };
            d += l1_distance(c, &r, &vol);
        }
        differences.push(d);
    }
    let orders = differences.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    Ok(ConvergenceTable { parameter, differences, orders })
}

/// Simultaneous refinement: cells per side doubles and `dt` halves at every level.
pub fn transient_refinement(base: &SimConfig, levels: usize) -> Result<ConvergenceTable> {
    let configs: Vec<SimConfig> = (0..levels)
        .map(|l| {
            let mut c = base.clone();
            c.mesh = base.mesh.refined(1 << l);
            c.dt = base.dt / f64::from(1u32 << l);
            c.monitors.store_fields = false;
            c
        })
        .collect();
    let parameter = configs.iter().map(|c| c.mesh.cell_count() as f64).collect();
    self_convergence(configs, parameter, true)
}

/// `dt` halves at every level on a frozen mesh.
pub fn dt_refinement(base: &SimConfig, levels: usize) -> Result<ConvergenceTable> {
    let configs: Vec<SimConfig> = (0..levels)
        .map(|l| {
            let mut c = base.clone();
            c.dt = base.dt / f64::from(1u32 << l);
            c.monitors.store_fields = false;
            c
        })
        .collect();
    let parameter = configs.iter().map(|c| c.dt).collect();
    self_convergence(configs, parameter, false)
}

/// `C_P` per permeability (rows) and mesh (columns) on `(0,1) ∪ (1,1.5)`.
///
/// The two sides have different lengths: on a symmetric domain the first
/// eigenfunction is even about the membrane, carries no jump, and `C_P` does not
/// depend on `k` at all.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PoincareTable {
    pub permeabilities: Vec<f64>,
    pub cells: Vec<usize>,
    pub constants: Vec<Vec<f64>>,
}

impl PoincareTable {
    /// Relative change between the two finest meshes, per permeability.
    pub fn finest_changes(&self) -> Vec<f64> {
        self.constants
            .iter()
            .map(|row| {
                let (a, b) = (row[row.len() - 2], row[row.len() - 1]);
                ((b - a) / b).abs()
            })
            .collect()
    }

    /// `C_P` strictly decreases with `k` on the finest mesh.
    pub fn decreasing_in_k(&self) -> bool {
        let last: Vec<f64> = self.constants.iter().map(|r| r[r.len() - 1]).collect();
        last.windows(2).all(|w| w[1] < w[0])
    }
}

pub fn poincare_study(permeabilities: &[f64], cells: &[usize]) -> Result<PoincareTable> {
    if cells.len() < 3 {
        return Err(Error::InvalidParameter("need at least 3 refinement levels".into()));
    }
    let jobs: Vec<(f64, usize)> = permeabilities.iter().flat_map(|k| cells.iter().map(move |n| (*k, *n))).collect();
    let values: Vec<f64> = jobs
        .par_iter()
        .map(|&(k, n)| {
            let mesh = Arc::new(build_interval_mesh(1.0, 0.5, n, (n / 2).max(2))?);
            assemble(&mesh, 1.0, k)?.poincare_constant()
        })
        .collect::<Result<_>>()?;
    let constants = values.chunks(cells.len()).map(|c| c.to_vec()).collect();
    Ok(PoincareTable { permeabilities: permeabilities.to_vec(), cells: cells.to_vec(), constants })
}

/// Weighted gradient and `L^β` norms of species 0 across refinement levels.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AprioriRow {
    pub cells: usize,
    pub weighted_gradient: f64,
    pub lbeta_gradient: f64,
    pub lbeta_trace: f64,
}

pub fn apriori_study(configs: &[SimConfig], alpha: f64, beta: f64) -> Result<Vec<AprioriRow>> {
    configs
        .par_iter()
        .map(|c| {
            let mut c = c.clone();
            c.monitors.store_fields = true;
            let t = simulate(&c)?.into_result()?;
            let states = species_states(&t, 0)?;
            let op = species_operator(&t.mesh, &c, 0)?;
            let weighted_gradient = weighted_gradient_norm(&t.mesh, &states, &t.dts, alpha)?;
            let (lbeta_gradient, lbeta_trace) = lbeta_gradient_and_trace(&op, &states, &t.dts, beta)?;
            Ok(AprioriRow { cells: c.mesh.cell_count(), weighted_gradient, lbeta_gradient, lbeta_trace })
        })
        .collect()
}

/// Largest relative change between successive entries.
pub fn max_successive_change(values: &[f64]) -> f64 {
    values.windows(2).map(|w| ((w[1] - w[0]) / w[0]).abs()).fold(0.0, f64::max)
}

/// Which checks `verify` runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Elliptic,
    Parabolic,
    Monitors,
    All,
}

impl std::str::FromStr for Suite {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "elliptic" => Ok(Suite::Elliptic),
            "parabolic" => Ok(Suite::Parabolic),
            "monitors" => Ok(Suite::Monitors),
            "all" => Ok(Suite::All),
            other => Err(Error::InvalidParameter(format!(
                "unknown suite '{other}'; available: all, elliptic, parabolic, monitors"
            ))),
        }
    }
}

pub fn verify(suite: Suite) -> Vec<Check> {
    let mut out = Vec::new();
    if matches!(suite, Suite::Elliptic | Suite::All) {
        out.extend(elliptic_checks());
    }
    if matches!(suite, Suite::Parabolic | Suite::All) {
        out.extend(parabolic_checks());
    }
    if matches!(suite, Suite::Monitors | Suite::All) {
        out.extend(monitor_checks());
    }
    out
}

fn guard(name: &str, f: impl FnOnce() -> Result<Vec<Check>>) -> Vec<Check> {
    f().unwrap_or_else(|e| vec![Check::failed(name, &e)])
}

pub fn elliptic_checks() -> Vec<Check> {
    let mut out = guard("steady fixture", || {
        let rows = steady_refinement(&[4, 8, 16, 32])?;
        let worst = rows.iter().map(|r| r.max_error.max(r.flux_error).max(r.jump_error)).fold(0.0, f64::max);
        Ok(vec![Check::at_most("steady fixture exact at every level", worst, 1e-10, "J = 1/3, [u] = -1/3")])
    });
    out.extend(guard("dual norm", || {
        let mesh = Arc::new(build_interval_mesh(1.0, 1.0, 16, 16)?);
        let op = assemble(&mesh, 1.0, 1.0)?;
        let direct = DirectDualNorm::new(op.clone())?;
        let mut worst: f64 = 0.0;
        for k in 1..=5 {
            let f = Field::from_fn(32, |i| ((i * k) as f64 * 0.37).sin() + 0.2);
            let a = op.dual_norm(&f)?;
            let b = direct.norm(&f)?;
            worst = worst.max(((a - b) / b).abs());
        }
        Ok(vec![Check::at_most("dual norm: CG agrees with direct factorization", worst, 1e-8, "relative")])
    }));
    out.extend(guard("symmetry", || {
        let mesh = Arc::new(crate::mesh::build_rect_mesh(1.0, 0.5, 1.0, 6, 3, 5)?);
        let op = crate::elliptic::assemble_sided(&mesh, 1.0, 2.0, 0.7)?;
        Ok(vec![Check::at_most("operator symmetric", op.matrix().max_asymmetry(), 1e-14, "")])
    }));
    out.extend(guard("poincare", || {
        let table = poincare_study(&[0.1, 1.0, 10.0], &[16, 32, 64])?;
        let change = table.finest_changes().into_iter().fold(0.0, f64::max);
        Ok(vec![
            Check::at_most("Poincaré constant stabilizes under refinement", change, 0.05, "finest pair"),
            Check::new(
                "Poincaré constant decreases in k",
                table.decreasing_in_k(),
                f64::from(u8::from(table.decreasing_in_k())),
                1.0,
                format!("{:?}", table.constants.iter().map(|r| r[r.len() - 1]).collect::<Vec<_>>()),
            ),
        ])
    }));
    let _ = DEFAULT_TOLERANCE;
    out
}

pub fn parabolic_checks() -> Vec<Check> {
    let mut out = guard("standard run", || {
        let mut cfg = standard_annihilation(32);
        cfg.t_end = 0.25;
        let t = simulate(&cfg)?.into_result()?;
        let min = t.records.iter().map(|r| r.min_value).fold(f64::INFINITY, f64::min);
        let budget = t.records.iter().map(|r| r.budget_residual).fold(0.0, f64::max);
        let mut masses = vec![t.initial.total_mass];
        masses.extend(t.records.iter().map(|r| r.total_mass));
        let growth = masses.windows(2).map(|w| (w[1] - w[0]) / w[0].max(1.0)).fold(f64::NEG_INFINITY, f64::max);
        Ok(vec![
            Check::at_least("nonnegativity", min, -1e-12, "min over cells and steps"),
            Check::at_most("total mass nonincreasing", growth, 1e-14, "largest relative step increase"),
            Check::at_most("membrane flux balances both sides", budget, 1e-12, "largest budget residual"),
        ])
    });
    out.extend(guard("symmetry", || {
        let mut cfg = standard_annihilation(16);
        cfg.t_end = 0.1;
        cfg.species[1].diffusion = cfg.species[0].diffusion;
        let t = simulate(&cfg)?.into_result()?;
        let u = &t.final_state.u;
        let diff = l1_distance(&u.species[0], &u.species[1], &t.mesh.volumes());
        Ok(vec![Check::at_most("symmetric data stay symmetric", diff, 1e-12, "")])
    }));
    out.extend(guard("refinement", || {
        let table = transient_refinement(&smooth_heat(8, 0.02), 4)?;
        let dt = dt_refinement(&smooth_heat(32, 0.02), 4)?;
        Ok(vec![
            Check::at_least("transient self-convergence order", table.final_order(), 0.9, format!("{:?}", table.orders)),
            Check::at_least("dt-only self-convergence order", dt.final_order(), 0.9, format!("{:?}", dt.orders)),
        ])
    }));
    out.extend(guard("ordering", || {
        let lo = smooth_heat(16, 0.01);
        let mut hi = lo.clone();
        hi.species[0].initial = InitialData::Sine { amplitude: 1.5, modes: 1 };
        let a = simulate(&lo)?.into_result()?;
        let b = simulate(&hi)?.into_result()?;
        let worst = a.final_state.u.species[0]
            .iter()
            .zip(b.final_state.u.species[0].iter())
            .map(|(x, y)| x - y)
            .fold(f64::NEG_INFINITY, f64::max);
        Ok(vec![Check::at_most("ordered data stay ordered", worst, 0.0, "max(u_lo - u_hi)")])
    }));
    out
}

pub fn monitor_checks() -> Vec<Check> {
    let mut out = guard("key estimate", || {
        let cfg = standard_annihilation(64);
        let t = simulate(&cfg)?.into_result()?;
        let rep = key_estimate_check(&t, &cfg)?;
        let mut checks = vec![
            Check::at_most("key estimate E(t) <= E(0) + C1 t (1+slack)", rep.worst_ratio, 1.0, format!("C1 = {:.4e}", rep.c1)),
            Check::at_most("space-time L2 bound", rep.sq_integral, rep.c3, "sum_i int int u_i^2 vs C3"),
        ];
        let op = species_operator(&t.mesh, &cfg, 0)?;
        let states = species_states(&t, 0)?;
        let sources = species_sources(&t, 0)?;
        for b in [4.0, 8.0, 16.0] {
            let r = truncation_energy_check(&op, &states, &sources, &t.dts, b, cfg.tolerances.truncation_slack)?;
            checks.push(Check::new(
                format!("truncation energy b = {b}"),
                r.holds,
                r.lhs,
                r.rhs * (1.0 + cfg.tolerances.truncation_slack),
                if r.signed_source_negative { "signed source integral negative" } else { "" },
            ));
        }
        Ok(checks)
    });
    out.extend(guard("dissipation", || {
        let mut cfg = standard_annihilation(32);
        cfg.reaction.label = "zero".into();
        cfg.t_end = 0.2;
        let t = simulate(&cfg)?.into_result()?;
        let mut norms = vec![t.initial.dual_norm_u.unwrap_or(f64::NAN)];
        norms.extend(t.records.iter().map(|r| r.dual_norm_u.unwrap_or(f64::NAN)));
        let worst = norms.windows(2).map(|w| (w[1] - w[0]) / w[0]).fold(f64::NEG_INFINITY, f64::max);
        Ok(vec![Check::at_most("dual norm nonincreasing without reaction", worst, 1e-12, "largest relative increase")])
    }));
    out.extend(guard("time modulus", || {
        let cfg = rough_heat();
        let t = simulate(&cfg)?.into_result()?;
        let states = species_states(&t, 0)?;
        let rep = time_translation_modulus(&t.mesh.volumes(), &states, cfg.dt, &[2, 4, 8, 16, 32])?;
        Ok(vec![Check::at_least(
            "time-translation modulus exponent",
            rep.slope.unwrap_or(f64::NAN),
            crate::monitors::MODULUS_SLOPE_FLOOR,
            "",
        )])
    }));
    out.extend(guard("hypotheses", || {
        let a = check_system(&builtin_annihilation(), 10.0, 20_000)?;
        let t = check_system(&builtin_transport_demo(&[1.0, 0.5, 0.2, 0.8, 0.3])?, 10.0, 20_000)?;
        Ok(vec![
            Check::new("annihilation hypotheses", a.passed(), a.growth, 1.0, a.failures.join("; ")),
            Check::new("transport demo hypotheses", t.passed(), t.growth, 2.8, t.failures.join("; ")),
        ])
    }));
    out.extend(guard("truncation object", || {
        let mut worst: f64 = 0.0;
        for b in [4.0, 10.0, 100.0] {
            let t = make_truncation(b)?;
            for k in 0..=10_000 {
                let s = 1.2 * b * f64::from(k) / 10_000.0;
                let (d, dd) = (t.derivative(s), t.second_derivative(s));
                worst = worst.max((-d).max(d - 1.0)).max((-1.0 - dd).max(dd));
            }
        }
        Ok(vec![Check::at_most("truncation derivative bounds", worst, 0.0, "0 <= T' <= 1, -1 <= T'' <= 0")])
    }));
    let _ = log_log_slope;
    out
}

/// Parameter swept by `kkmem sweep`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    Regularization,
    Mesh,
    TimeStep,
    Permeability,
}

impl std::str::FromStr for SweepParam {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "n" => Ok(SweepParam::Regularization),
            "h" => Ok(SweepParam::Mesh),
            "dt" => Ok(SweepParam::TimeStep),
            "k" => Ok(SweepParam::Permeability),
            other => Err(Error::InvalidParameter(format!("unknown sweep parameter '{other}'; available: n, h, dt, k"))),
        }
    }
}

/// A campaign table (header plus rows) with its verdicts.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepOutcome {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub checks: Vec<Check>,
}

/// Runs `config` once per value of `param`.
///
/// `n` gives the regularization convergence table; `h` takes cells per side of
/// Ω¹ (scaled proportionally elsewhere) and `dt` takes step sizes, both reporting
/// self-convergence orders; `k` reports end-of-run quantities per permeability.
pub fn parameter_sweep(config: &SimConfig, param: SweepParam, values: &[f64]) -> Result<SweepOutcome> {
    if values.is_empty() {
        return Err(Error::InvalidParameter("sweep needs at least one value".into()));
    }
    match param {
        SweepParam::Regularization => {
            let levels: Vec<u32> = values.iter().map(|v| *v as u32).collect();
            let table = regularization_sweep(config, &levels)?;
            let m = config.species.len();
            let mut header = vec!["n_k".to_string(), "n_k1".to_string()];
            header.extend((0..m).map(|i| format!("d_{i}")));
            let rows = table
                .d
                .iter()
                .enumerate()
                .map(|(k, d)| {
                    let mut r = vec![f64::from(levels[k]), f64::from(levels[k + 1])];
                    r.extend(d);
                    r
                })
                .collect();
            let detail = match table.offending {
                Some((k, s)) => format!("d not decreasing at pair {k} for species {s}"),
                None if table.inactive => "regularization inactive".into(),
                None => String::new(),
            };
            let passed = table.passed();
            Ok(SweepOutcome {
                name: "regularization".into(),
                header,
                rows,
                checks: vec![Check::new("successive differences decrease", passed, f64::from(u8::from(passed)), 1.0, detail)],
            })
        }
        SweepParam::Mesh | SweepParam::TimeStep => {
            let configs: Vec<SimConfig> = values
                .iter()
                .map(|v| {
                    let mut c = config.clone();
                    c.monitors.store_fields = false;
                    if param == SweepParam::Mesh {
                        c.mesh = scale_mesh(&config.mesh, *v as usize);
                    } else {
                        c.dt = *v;
                    }
                    c
                })
                .collect();
            let nested = param == SweepParam::Mesh;
            let (name, col) = if nested { ("mesh", "cells") } else { ("time_step", "dt") };
            let mut checks = Vec::new();
            let mut rows: Vec<Vec<f64>> = values.iter().map(|v| vec![*v, f64::NAN, f64::NAN]).collect();
            if values.len() >= 3 {
                let table = self_convergence(configs, values.to_vec(), nested)?;
                for (i, d) in table.differences.iter().enumerate() {
                    rows[i][1] = *d;
                }
                for (i, o) in table.orders.iter().enumerate() {
                    rows[i + 1][2] = *o;
                }
                checks.push(Check::at_least("self-convergence order", table.final_order(), 0.8, format!("{:?}", table.orders)));
            } else {
                for c in &configs {
                    simulate(c)?.into_result()?;
                }
            }
            Ok(SweepOutcome {
                name: name.into(),
                header: vec![col.into(), "difference_to_next".into(), "order".into()],
                rows,
                checks,
            })
        }
        SweepParam::Permeability => {
            let runs: Vec<(f64, Trajectory)> = values
                .par_iter()
                .map(|k| {
                    let mut c = config.clone();
                    c.monitors.store_fields = false;
                    c.species.iter_mut().for_each(|s| s.permeability = *k);
                    Ok((*k, simulate(&c)?.into_result()?))
                })
                .collect::<Result<_>>()?;
            let rows = runs
                .iter()
                .map(|(k, t)| {
                    let last = t.records.last().expect("at least one step");
                    vec![*k, last.total_mass, last.jump_l2, last.min_value]
                })
                .collect();
            let min = runs
                .iter()
                .flat_map(|(_, t)| t.records.iter().map(|r| r.min_value))
                .fold(f64::INFINITY, f64::min);
            Ok(SweepOutcome {
                name: "permeability".into(),
                header: vec!["k".into(), "total_mass".into(), "jump_l2".into(), "min_value".into()],
                rows,
                checks: vec![Check::at_least("nonnegativity", min, -config.tolerances.positivity, "all runs")],
            })
        }
    }
}

fn scale_mesh(mesh: &MeshSpec, n1: usize) -> MeshSpec {
    match *mesh {
        MeshSpec::Interval { length1, length2, n1: a, n2 } => {
            MeshSpec::Interval { length1, length2, n1, n2: (n2 * n1 / a).max(2) }
        }
        MeshSpec::Rectangle { length1, length2, height, n1: a, n2, ny } => MeshSpec::Rectangle {
            length1,
            length2,
            height,
            n1,
            n2: (n2 * n1 / a).max(2),
            ny: (ny * n1 / a).max(2),
        },
    }
}
