//! Functionals evaluated on discrete trajectories: the dual-norm Lyapunov quantity
//! of the key estimate, the truncated energy bound, weighted and `L^β` gradient
//! norms, membrane trace norms and the time-translation modulus.

use std::sync::Arc;

use crate::elliptic::{assemble, MembraneOperator};
use crate::error::{check_len, Error, Result};
use crate::field::{Field, MultiField};
use crate::linalg::{dot, BandedLdl};
use crate::mesh::MembraneMesh;
use crate::parabolic::{Integrator, SimConfig, SimState, StepReport, Trajectory};

/// One row of the per-step trace.
#[derive(Debug, Clone, PartialEq)]
pub struct MonitorRecord {
    pub t: f64,
    pub substeps: u32,
    pub mass: Vec<f64>,
    pub total_mass: f64,
    pub l2: Vec<f64>,
    /// `‖Û(t)‖_{(H¹)*}`; absent when the permeabilities differ or the monitor is off.
    pub dual_norm_u: Option<f64>,
    /// `E(t) = ½‖Û‖² + ½∫₀ᵗ∫ÛV̂`, when the key estimate is enabled.
    pub e_t: Option<f64>,
    /// `L²(Γ)` norm of the membrane jump, summed over species.
    pub jump_l2: f64,
    pub min_value: f64,
    pub budget_residual: f64,
    /// Running `Σ_i ∫₀ᵗ∫ u_i²`.
    pub sq_integral: f64,
    /// Running `(LHS, RHS)` of the truncated energy bound, per configured level.
    pub truncation: Vec<(f64, f64)>,
    pub weighted_gradient: Option<f64>,
    /// Running `(∫∫|∇w|^β, ∫∫_Γ |w¹|^β + |w²|^β)`.
    pub lbeta: Option<(f64, f64)>,
}

impl MonitorRecord {
    pub fn check_finite(&self) -> Result<()> {
        let mut vals = vec![self.t, self.total_mass, self.jump_l2, self.min_value, self.budget_residual, self.sq_integral];
        vals.extend(&self.mass);
        vals.extend(&self.l2);
        vals.extend(self.dual_norm_u);
        vals.extend(self.e_t);
        vals.extend(self.weighted_gradient);
        vals.extend(self.truncation.iter().flat_map(|(a, b)| [*a, *b]));
        vals.extend(self.lbeta.iter().flat_map(|(a, b)| [*a, *b]));
        if vals.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::NonFinite(format!("monitor record at t = {}", self.t)))
        }
    }
}

/// `‖f‖_{(H¹)*}` through a direct factorization of the operator.
pub struct DirectDualNorm {
    op: MembraneOperator,
    ldl: BandedLdl,
}

impl DirectDualNorm {
    pub fn new(op: MembraneOperator) -> Result<Self> {
        let ldl = BandedLdl::factor(op.matrix(), &op.mesh().banded_order())?;
        Ok(DirectDualNorm { op, ldl })
    }

    pub fn operator(&self) -> &MembraneOperator {
        &self.op
    }

    /// Solves `A w = M f`.
    pub fn potential(&self, f: &[f64]) -> Field {
        let mf: Vec<f64> = f.iter().zip(self.op.mass_weights()).map(|(a, m)| a * m).collect();
        Field(self.ldl.solve(&mf))
    }

    pub fn norm(&self, f: &[f64]) -> Result<f64> {
        check_len(self.op.mass_weights().len(), f.len())?;
        let mf: Vec<f64> = f.iter().zip(self.op.mass_weights()).map(|(a, m)| a * m).collect();
        let w = self.ldl.solve(&mf);
        let sq = 2.0 * dot(&w, &mf) - self.op.matrix().quad(&w, &w);
        if !sq.is_finite() {
            return Err(Error::NonFinite("dual norm".into()));
        }
        Ok(sq.max(0.0).sqrt())
    }
}

/// Constants of the key-estimate monitor for one run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KeyEstimateData {
    /// Mass-control constant `C`.
    pub c: f64,
    /// `C₁ = ‖G‖²/(2 min D)` with `−ΔG = C`.
    pub c1: f64,
    pub e0: f64,
    pub min_diffusion: f64,
}

fn l1_mass(v: &[f64], vol: &[f64]) -> f64 {
    v.iter().zip(vol).map(|(a, m)| a * m).sum()
}

/// `Σ_faces D·area/dist·(Δw)²` over interior and wall faces whose cells satisfy `|w| ≤ b`.
/// Membrane faces are excluded.
pub fn sublevel_energy(op: &MembraneOperator, w: &[f64], b: f64) -> f64 {
    let mesh = op.mesh();
    let inside = |c: usize| w[c].abs() <= b;
    let mut e = 0.0;
    for f in mesh.interior_faces() {
        let [a, c] = f.cells;
        if inside(a) && inside(c) {
            let d = w[a] - w[c];
            e += op.diffusion_at(a) * f.area / f.dist * d * d;
        }
    }
    for (f, coeff) in mesh.dirichlet_faces().iter().zip(op.dirichlet_coefficients()) {
        if inside(f.cell) {
            e += coeff * w[f.cell] * w[f.cell];
        }
    }
    e
}

/// `Σ_faces area/dist·(Δ(1+|w|)^α)²`, with the wall value `0` on Dirichlet faces.
pub fn weighted_gradient_density(mesh: &MembraneMesh, w: &[f64], alpha: f64) -> f64 {
    let phi = |v: f64| (1.0 + v.abs()).powf(alpha);
    let mut e = 0.0;
    for f in mesh.interior_faces() {
        let d = phi(w[f.cells[0]]) - phi(w[f.cells[1]]);
        e += f.area / f.dist * d * d;
    }
    for f in mesh.dirichlet_faces() {
        let d = phi(w[f.cell]) - 1.0;
        e += f.area / f.half_dist * d * d;
    }
    e
}

/// `(Σ_faces area·dist·|Δw/dist|^β, Σ_Γ area·(|w¹|^β + |w²|^β))` with flux-consistent traces.
pub fn lbeta_density(op: &MembraneOperator, w: &Field, beta: f64) -> Result<(f64, f64)> {
    let mesh = op.mesh();
    let mut g = 0.0;
    for f in mesh.interior_faces() {
        let s = (w[f.cells[0]] - w[f.cells[1]]).abs() / f.dist;
        g += f.area * f.dist * s.powf(beta);
    }
    for f in mesh.dirichlet_faces() {
        let s = w[f.cell].abs() / f.half_dist;
        g += f.area * f.half_dist * s.powf(beta);
    }
    let traces = op.face_traces(w)?;
    let tr = mesh
        .membrane_faces()
        .iter()
        .zip(traces)
        .map(|(f, (a, b))| f.area * (a.abs().powf(beta) + b.abs().powf(beta)))
        .sum();
    Ok((g, tr))
}

/// Streams [`MonitorRecord`]s while [`simulate`](crate::parabolic::simulate) runs.
pub struct MonitorStream<'a> {
    integrator: &'a Integrator,
    volumes: Vec<f64>,
    diffusion: Vec<f64>,
    dual: Option<DirectDualNorm>,
    key: Option<KeyEstimateData>,
    c: f64,
    species: usize,
    levels: Vec<f64>,
    alpha: Option<f64>,
    beta: Option<f64>,
    // running sums
    uv_integral: f64,
    sq_integral: f64,
    truncation_lhs: Vec<f64>,
    source_abs: f64,
    initial_abs: f64,
    weighted: f64,
    lbeta: (f64, f64),
}

impl<'a> MonitorStream<'a> {
    pub fn new(config: &SimConfig, integrator: &'a Integrator) -> Result<Self> {
        let mesh = integrator.mesh();
        let mon = &config.monitors;
        let c = config.reaction_system()?.constants().map_or(0.0, |k| k.mass_control);
        let dual = if (mon.dual_norm || mon.key_estimate) && config.equal_permeabilities() {
            Some(DirectDualNorm::new(assemble(mesh, 1.0, config.species[0].permeability)?)?)
        } else {
            None
        };
        let diffusion = config.diffusions();
        let min_d = diffusion.iter().copied().fold(f64::INFINITY, f64::min);
        let key = match (&dual, mon.key_estimate) {
            (Some(d), true) => {
                let g = d.potential(&vec![c; mesh.cell_count()]);
                let g_sq: f64 = g.iter().zip(mesh.volumes()).map(|(g, m)| m * g * g).sum();
                Some(KeyEstimateData { c, c1: g_sq / (2.0 * min_d), e0: 0.0, min_diffusion: min_d })
            }
            _ => None,
        };
        Ok(MonitorStream {
            integrator,
            volumes: mesh.volumes(),
            diffusion,
            dual,
            key,
            c,
            species: mon.species,
            levels: mon.truncation_levels.clone(),
            alpha: mon.weighted_gradient_alpha,
            beta: mon.lbeta,
            uv_integral: 0.0,
            sq_integral: 0.0,
            truncation_lhs: vec![0.0; mon.truncation_levels.len()],
            source_abs: 0.0,
            initial_abs: 0.0,
            weighted: 0.0,
            lbeta: (0.0, 0.0),
        })
    }

    pub fn key_data(&self) -> Option<KeyEstimateData> {
        self.key
    }

    /// `(Û, V̂)` at time `t`.
    fn hats(&self, t: f64, u: &MultiField) -> (Vec<f64>, Vec<f64>) {
        let e = (-self.c * t).exp();
        let n = u.cell_count();
        let mut uh = vec![0.0; n];
        let mut vh = vec![0.0; n];
        for (s, d) in u.species.iter().zip(&self.diffusion) {
            for c in 0..n {
                uh[c] += e * s[c];
                vh[c] += e * d * s[c];
            }
        }
        (uh, vh)
    }

    fn base_record(&self, t: f64, u: &MultiField) -> Result<MonitorRecord> {
        let mass: Vec<f64> = u.species.iter().map(|s| l1_mass(s, &self.volumes)).collect();
        let l2 = u
            .species
            .iter()
            .map(|s| s.iter().zip(&self.volumes).map(|(a, m)| m * a * a).sum::<f64>().sqrt())
            .collect();
        let mut jump_sq = 0.0;
        for (s, op) in u.species.iter().zip(self.integrator.operators()) {
            for (f, (a, b)) in op.mesh().membrane_faces().iter().zip(op.face_traces(s)?) {
                jump_sq += f.area * (b - a) * (b - a);
            }
        }
        let dual_norm_u = match &self.dual {
            Some(d) => Some(d.norm(&self.hats(t, u).0)?),
            None => None,
        };
        Ok(MonitorRecord {
            t,
            substeps: 0,
            total_mass: mass.iter().sum(),
            mass,
            l2,
            dual_norm_u,
            e_t: None,
            jump_l2: jump_sq.sqrt(),
            min_value: u.min(),
            budget_residual: 0.0,
            sq_integral: self.sq_integral,
            truncation: Vec::new(),
            weighted_gradient: None,
            lbeta: None,
        })
    }

    fn finish(&self, mut rec: MonitorRecord) -> Result<MonitorRecord> {
        if let (Some(_), Some(dn)) = (self.key, rec.dual_norm_u) {
            rec.e_t = Some(0.5 * dn * dn + 0.5 * self.uv_integral);
        }
        rec.sq_integral = self.sq_integral;
        let rhs_base = self.source_abs + self.initial_abs;
        rec.truncation = self.levels.iter().zip(&self.truncation_lhs).map(|(b, l)| (*l, b * rhs_base)).collect();
        rec.weighted_gradient = self.alpha.map(|_| self.weighted);
        rec.lbeta = self.beta.map(|_| self.lbeta);
        rec.check_finite()?;
        Ok(rec)
    }

    pub fn initial(&mut self, state: &SimState) -> Result<MonitorRecord> {
        if !state.u.is_finite() {
            return Err(Error::NonFinite("initial state".into()));
        }
        self.initial_abs = state.u.species[self.species].iter().zip(&self.volumes).map(|(a, m)| m * a.abs()).sum();
        let rec = self.base_record(state.t, &state.u)?;
        if let (Some(k), Some(dn)) = (self.key.as_mut(), rec.dual_norm_u) {
            k.e0 = 0.5 * dn * dn;
        }
        self.finish(rec)
    }

    pub fn record(&mut self, _prev: &SimState, next: &SimState, report: &StepReport) -> Result<MonitorRecord> {
        let dt = report.dt;
        let u = &next.u;
        if self.key.is_some() {
            let (uh, vh) = self.hats(next.t, u);
            self.uv_integral += dt * uh.iter().zip(&vh).zip(&self.volumes).map(|((a, b), m)| m * a * b).sum::<f64>();
        }
        for s in &u.species {
            self.sq_integral += dt * s.iter().zip(&self.volumes).map(|(a, m)| m * a * a).sum::<f64>();
        }
        let w = &u.species[self.species];
        let op = &self.integrator.operators()[self.species];
        if !self.levels.is_empty() {
            let f = &report.sources.species[self.species];
            self.source_abs += dt * f.iter().zip(&self.volumes).map(|(a, m)| m * a.abs()).sum::<f64>();
            for (lhs, b) in self.truncation_lhs.iter_mut().zip(&self.levels) {
                *lhs += dt * sublevel_energy(op, w, *b);
            }
        }
        if let Some(a) = self.alpha {
            self.weighted += dt * weighted_gradient_density(op.mesh(), w, a);
        }
        if let Some(b) = self.beta {
            let (g, tr) = lbeta_density(op, w, b)?;
            self.lbeta.0 += dt * g;
            self.lbeta.1 += dt * tr;
        }
        let mut rec = self.base_record(next.t, u)?;
        rec.substeps = report.substeps;
        rec.budget_residual = report.budget_residual;
        self.finish(rec)
    }
}

/// Outcome of [`key_estimate_check`].
#[derive(Debug, Clone, PartialEq)]
pub struct KeyEstimateReport {
    pub c: f64,
    pub c1: f64,
    pub c3: f64,
    pub e0: f64,
    /// Largest `E(t) / (E(0) + C₁·t·(1+slack))` over the run.
    pub worst_ratio: f64,
    /// First step violating the bound: `(t, E(t), bound)`.
    pub first_violation: Option<(f64, f64, f64)>,
    pub sq_integral: f64,
    pub holds: bool,
    pub sq_holds: bool,
}

/// Checks `E(t) ≤ E(0) + C₁·t·(1+slack)` at every step and `Σ_i∫∫u_i² ≤ C₃` at the end,
/// with `C₃ = (2/min D)(E(0) + C₁T)·e^{2CT}`.
pub fn key_estimate_check(traj: &Trajectory, config: &SimConfig) -> Result<KeyEstimateReport> {
    if !config.equal_permeabilities() {
        return Err(Error::Refused(
            "the key estimate is only established for equal membrane permeabilities; \
             distinct k_i remain an open problem"
                .into(),
        ));
    }
    let key = traj.key.ok_or_else(|| Error::Config("monitors.key_estimate is off for this run".into()))?;
    let slack = config.tolerances.key_slack;
    let mut worst_ratio: f64 = 0.0;
    let mut first_violation = None;
    for r in &traj.records {
        let e = r.e_t.ok_or_else(|| Error::NonFinite(format!("E(t) missing at t = {}", r.t)))?;
        let bound = key.e0 + key.c1 * r.t * (1.0 + slack);
        if !e.is_finite() {
            return Err(Error::NonFinite(format!("E(t) at t = {}", r.t)));
        }
        if bound > 0.0 {
            worst_ratio = worst_ratio.max(e / bound);
        }
        if e > bound * (1.0 + 1e-12) + 1e-300 && first_violation.is_none() {
            first_violation = Some((r.t, e, bound));
        }
    }
    let t_end = traj.records.last().map_or(0.0, |r| r.t);
    let c3 = 2.0 / key.min_diffusion * (key.e0 + key.c1 * t_end) * (2.0 * key.c * t_end).exp();
    let sq_integral = traj.records.last().map_or(0.0, |r| r.sq_integral);
    Ok(KeyEstimateReport {
        c: key.c,
        c1: key.c1,
        c3,
        e0: key.e0,
        worst_ratio,
        holds: first_violation.is_none(),
        first_violation,
        sq_integral,
        sq_holds: sq_integral <= c3,
    })
}

/// Outcome of [`truncation_energy_check`] at one level.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncationReport {
    pub level: f64,
    pub lhs: f64,
    pub rhs: f64,
    /// `∫∫f` of the designated species was negative (the signed bound would be weaker).
    pub signed_source_negative: bool,
    pub holds: bool,
}

/// `Σ dt·D∫_{|w|≤b}|∇w|² ≤ b(∫∫|f| + ∫|w₀|)·(1+slack)` from stored fields and sources.
pub fn truncation_energy_check(
    op: &MembraneOperator,
    states: &[Field],
    sources: &[Field],
    dts: &[f64],
    level: f64,
    slack: f64,
) -> Result<TruncationReport> {
    crate::reactions::make_truncation(level)?;
    if states.len() != dts.len() + 1 || sources.len() != dts.len() {
        return Err(Error::InvalidData(format!(
            "expected {} states and {} sources for {} steps",
            dts.len() + 1,
            dts.len(),
            dts.len()
        )));
    }
    let vol = op.mass_weights();
    let mut lhs = 0.0;
    let mut abs_f = 0.0;
    let mut signed_f = 0.0;
    for ((w, f), dt) in states[1..].iter().zip(sources).zip(dts) {
        check_len(vol.len(), w.len())?;
        lhs += dt * sublevel_energy(op, w, level);
        abs_f += dt * f.iter().zip(vol).map(|(a, m)| m * a.abs()).sum::<f64>();
        signed_f += dt * l1_mass(f, vol);
    }
    let w0: f64 = states[0].iter().zip(vol).map(|(a, m)| m * a.abs()).sum();
    let rhs = level * (abs_f + w0);
    if !lhs.is_finite() || !rhs.is_finite() {
        return Err(Error::NonFinite("truncation energy".into()));
    }
    Ok(TruncationReport {
        level,
        lhs,
        rhs,
        signed_source_negative: signed_f < 0.0,
        holds: lhs <= rhs * (1.0 + slack),
    })
}

/// `Σ dt Σ_faces area/dist·(Δ(1+|w|)^α)²` over the stored states after `t = 0`.
pub fn weighted_gradient_norm(mesh: &MembraneMesh, states: &[Field], dts: &[f64], alpha: f64) -> Result<f64> {
    if !(0.0..0.5).contains(&alpha) {
        return Err(Error::InvalidParameter(format!(
            "alpha must lie in [0, 1/2) for the weighted gradient bound, got {alpha}"
        )));
    }
    if states.len() != dts.len() + 1 {
        return Err(Error::Dimension { expected: dts.len() + 1, found: states.len() });
    }
    let v: f64 = states[1..].iter().zip(dts).map(|(w, dt)| dt * weighted_gradient_density(mesh, w, alpha)).sum();
    if v.is_finite() { Ok(v) } else { Err(Error::NonFinite("weighted gradient norm".into())) }
}

/// `(∫∫|∇w|^β, ∫∫_Γ |w¹|^β + |w²|^β)` over the stored states after `t = 0`.
pub fn lbeta_gradient_and_trace(op: &MembraneOperator, states: &[Field], dts: &[f64], beta: f64) -> Result<(f64, f64)> {
    if !(beta > 0.0) {
        return Err(Error::InvalidParameter(format!("beta must be positive, got {beta}")));
    }
    if states.len() != dts.len() + 1 {
        return Err(Error::Dimension { expected: dts.len() + 1, found: states.len() });
    }
    let (mut g, mut tr) = (0.0, 0.0);
    for (w, dt) in states[1..].iter().zip(dts) {
        let (a, b) = lbeta_density(op, w, beta)?;
        g += dt * a;
        tr += dt * b;
    }
    if g.is_finite() && tr.is_finite() { Ok((g, tr)) } else { Err(Error::NonFinite("L^beta norms".into())) }
}

/// Time-translation modulus and its log-log slope.
#[derive(Debug, Clone, PartialEq)]
pub struct ModulusReport {
    pub h: Vec<f64>,
    pub omega: Vec<f64>,
    /// Least-squares slope of `log ω` against `log h`; `None` for stationary data.
    pub slope: Option<f64>,
    pub stationary: bool,
}

pub const MODULUS_SLOPE_FLOOR: f64 = 0.45;

impl ModulusReport {
    pub fn passes(&self) -> bool {
        self.stationary || self.slope.is_some_and(|s| s >= MODULUS_SLOPE_FLOOR)
    }
}

/// `ω(h) = Σ_t dt Σ vol·|w(t+h) − w(t)|` for shifts `h = s·dt`, `s ∈ shifts`, on a
/// trajectory stored at uniform `dt` (states include `t = 0`).
pub fn time_translation_modulus(volumes: &[f64], states: &[Field], dt: f64, shifts: &[usize]) -> Result<ModulusReport> {
    if shifts.len() < 4 {
        return Err(Error::InsufficientData(format!("need at least 4 shifts, got {}", shifts.len())));
    }
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")));
    }
    if let Some(s) = shifts.iter().find(|s| **s == 0 || **s >= states.len()) {
        return Err(Error::InvalidParameter(format!(
            "shift {s} is not in 1..{} for this trajectory",
            states.len()
        )));
    }
    let mut omega = Vec::with_capacity(shifts.len());
    for &s in shifts {
        let mut acc = 0.0;
        for k in 0..states.len() - s {
            check_len(volumes.len(), states[k].len())?;
            acc += dt * states[k + s]
                .iter()
                .zip(states[k].iter())
                .zip(volumes)
                .map(|((a, b), m)| m * (a - b).abs())
                .sum::<f64>();
        }
        if !acc.is_finite() {
            return Err(Error::NonFinite("time-translation modulus".into()));
        }
        omega.push(acc);
    }
    let h: Vec<f64> = shifts.iter().map(|s| *s as f64 * dt).collect();
    let stationary = omega.iter().all(|w| *w == 0.0);
    let slope = if stationary || omega.iter().any(|w| *w <= 0.0) {
        None
    } else {
        Some(log_log_slope(&h, &omega))
    };
    Ok(ModulusReport { h, omega, slope, stationary })
}

/// Least-squares slope of `log y` against `log x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Fields of one species from a trajectory with stored states.
pub fn species_states(traj: &Trajectory, species: usize) -> Result<Vec<Field>> {
    if traj.states.is_empty() {
        return Err(Error::InsufficientData("trajectory was run without stored fields".into()));
    }
    traj.states
        .iter()
        .map(|u| u.species.get(species).cloned().ok_or(Error::Dimension { expected: species + 1, found: u.species_count() }))
        .collect()
}

/// Sources of one species from a trajectory with stored fields.
pub fn species_sources(traj: &Trajectory, species: usize) -> Result<Vec<Field>> {
    traj.sources
        .iter()
        .map(|u| u.species.get(species).cloned().ok_or(Error::Dimension { expected: species + 1, found: u.species_count() }))
        .collect()
}

/// Shared handle used by post-hoc checks that need a species operator.
pub fn species_operator(mesh: &Arc<MembraneMesh>, config: &SimConfig, species: usize) -> Result<MembraneOperator> {
    let s = config
        .species
        .get(species)
        .ok_or_else(|| Error::InvalidParameter(format!("no species {species}")))?;
    assemble(mesh, s.diffusion, s.permeability)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_interval_mesh, build_rect_mesh};

    fn interval(n: usize) -> Arc<MembraneMesh> {
        Arc::new(build_interval_mesh(1.0, 1.0, n, n).unwrap())
    }

    #[test]
    fn zero_fields_give_zero() {
        let mesh = interval(8);
        let op = assemble(&mesh, 1.0, 1.0).unwrap();
        let z = Field::zeros(16);
        assert_eq!(sublevel_energy(&op, &z, 4.0), 0.0);
        assert_eq!(lbeta_density(&op, &z, 1.5).unwrap(), (0.0, 0.0));
        assert_eq!(weighted_gradient_density(&mesh, &Field::constant(16, 3.0), 0.0), 0.0);
    }

    #[test]
    fn weighted_gradient_rejects_half() {
        let mesh = interval(4);
        let s = vec![Field::zeros(8); 2];
        assert!(matches!(weighted_gradient_norm(&mesh, &s, &[0.1], 0.5), Err(Error::InvalidParameter(_))));
        assert_eq!(weighted_gradient_norm(&mesh, &s, &[0.1], 0.4).unwrap(), 0.0);
    }

    #[test]
    fn constant_weighted_interior_only() {
        // interior faces of a constant field contribute nothing; only walls do
        let mesh = Arc::new(build_rect_mesh(1.0, 1.0, 1.0, 4, 4, 4).unwrap());
        let w = Field::constant(mesh.cell_count(), 2.0);
        let d = weighted_gradient_density(&mesh, &w, 0.3);
        let per = (3f64.powf(0.3) - 1.0).powi(2);
        let walls: f64 = mesh.dirichlet_faces().iter().map(|f| f.area / f.half_dist).sum();
        assert!((d - per * walls).abs() < 1e-12);
    }

    #[test]
    fn linear_in_time_modulus_slope_one() {
        let vol = vec![0.25; 8];
        let phi: Vec<f64> = (0..8).map(|i| 1.0 + i as f64).collect();
        let dt = 0.01;
        let states: Vec<Field> = (0..=100).map(|k| Field(phi.iter().map(|p| k as f64 * dt * p).collect())).collect();
        let rep = time_translation_modulus(&vol, &states, dt, &[1, 2, 5, 10]).unwrap();
        // ω(h) = h·(T−h)·∫φ is not a pure power; compare against it directly
        let int_phi: f64 = phi.iter().sum::<f64>() * 0.25;
        for (h, w) in rep.h.iter().zip(&rep.omega) {
            let n = (100 - (h / dt).round() as usize + 1) as f64;
            assert!((w - dt * n * h * int_phi).abs() < 1e-10);
        }
        let stationary = vec![Field::constant(8, 1.0); 20];
        let rep = time_translation_modulus(&vol, &stationary, dt, &[1, 2, 4, 8]).unwrap();
        assert!(rep.stationary && rep.slope.is_none() && rep.passes());
        assert!(matches!(
            time_translation_modulus(&vol, &stationary, dt, &[1, 2, 4]),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn steady_trace_norm() {
        // flux-consistent traces of the series-resistance profile are 2/3 and 1/3
        let mesh = interval(8);
        let s = crate::parabolic::steady_state(&mesh, [1.0, 1.0], 1.0, 1.0, 0.0).unwrap();
        let op = assemble(&mesh, 1.0, 1.0).unwrap();
        let (_, tr) = lbeta_density(&op, &s.u, 2.0).unwrap();
        assert!((tr - (4.0 / 9.0 + 1.0 / 9.0)).abs() < 1e-12);
    }

    #[test]
    fn steady_sublevel_energy_closed_form() {
        let mesh = interval(8);
        let s = crate::parabolic::steady_state(&mesh, [1.0, 1.0], 1.0, 1.0, 0.0).unwrap();
        let op = assemble(&mesh, 1.0, 1.0).unwrap();
        // interior faces carry J² per unit length; the walls are measured against 0
        let first = 1.0 - 1.0 / 48.0;
        let last = 1.0 / 48.0;
        let exact = 1.75 / 9.0 + 16.0 * (first * first + last * last);
        assert!((sublevel_energy(&op, &s.u, 4.0) - exact).abs() < 1e-12);
        // below the profile's minimum over a plateau: empty set
        let plateau = Field::constant(16, 5.0);
        assert_eq!(sublevel_energy(&op, &plateau, 4.0), 0.0);
    }
}
