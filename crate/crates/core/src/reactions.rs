//! Reaction vector fields, their level-`n` regularizations, C² truncations,
//! mollified initial data and a sampling checker for the structural hypotheses
//! (growth, mass control, quasi-positivity, local Lipschitz bound).

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{check_len, Error, Result};
use crate::field::Field;
use crate::mesh::MembraneMesh;

/// Labels accepted by [`ReactionSystem::by_label`].
pub const AVAILABLE_LABELS: &[&str] = &["zero", "annihilation", "transport_demo", "linear_growth", "linear_decay"];

/// Anything that maps a nonnegative state `u ∈ [0,∞)^m` to `f(u) ∈ ℝ^m`.
pub trait ReactionField: Send + Sync {
    fn species(&self) -> usize;
    fn eval(&self, u: &[f64], out: &mut [f64]);
}

type Kinetics = dyn Fn(&[f64], &mut [f64]) + Send + Sync;

/// Constants a system declares for the growth, mass-control and Lipschitz bounds.
///
/// The Lipschitz constant on `[0, M]^m`, in the summed form
/// `Σ_i |f_i(u) − f_i(v)| ≤ C_M Σ_j |u_j − v_j|`, is `lipschitz_base + lipschitz_slope·M`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeclaredConstants {
    pub growth: f64,
    pub mass_control: f64,
    pub lipschitz_base: f64,
    pub lipschitz_slope: f64,
    /// `Σ_j f_j ≤ 0` everywhere, so total mass can only leave.
    pub mass_dissipating: bool,
}

impl DeclaredConstants {
    pub fn lipschitz(&self, m: f64) -> f64 {
        self.lipschitz_base + self.lipschitz_slope * m
    }
}

#[derive(Clone)]
pub struct ReactionSystem {
    label: String,
    species: usize,
    kinetics: Arc<Kinetics>,
    constants: Option<DeclaredConstants>,
}

impl fmt::Debug for ReactionSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ReactionSystem")
            .field("label", &self.label)
            .field("species", &self.species)
            .field("constants", &self.constants)
            .finish()
    }
}

impl ReactionSystem {
    pub fn new(
        label: impl Into<String>,
        species: usize,
        constants: Option<DeclaredConstants>,
        kinetics: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        ReactionSystem {
            label: label.into(),
            species,
            kinetics: Arc::new(kinetics),
            constants,
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn constants(&self) -> Option<DeclaredConstants> {
        self.constants
    }

    pub fn evaluate(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.species];
        self.eval(u, &mut out);
        out
    }

    /// `f ≡ 0` for `m` species.
    pub fn zero(m: usize) -> Self {
        let c = DeclaredConstants { growth: 0.0, mass_control: 0.0, lipschitz_base: 0.0, lipschitz_slope: 0.0, mass_dissipating: true };
        ReactionSystem::new("zero", m, Some(c), |_, out| out.fill(0.0))
    }

    /// `f_i(u) = u_i`: linear production, mass-control constant 1.
    pub fn linear_growth(m: usize) -> Self {
        let c = DeclaredConstants { growth: 1.0, mass_control: 1.0, lipschitz_base: 1.0, lipschitz_slope: 0.0, mass_dissipating: false };
        ReactionSystem::new("linear_growth", m, Some(c), |u, out| out.copy_from_slice(u))
    }

    /// `f_i(u) = −rate·u_i`.
    pub fn linear_decay(m: usize, rate: f64) -> Result<Self> {
        if !(rate >= 0.0) {
            return Err(Error::InvalidParameter(format!("decay rate must be nonnegative, got {rate}")));
        }
        let c = DeclaredConstants { growth: rate, mass_control: 0.0, lipschitz_base: rate, lipschitz_slope: 0.0, mass_dissipating: true };
        Ok(ReactionSystem::new("linear_decay", m, Some(c), move |u, out| {
            for (o, v) in out.iter_mut().zip(u) {
                *o = -rate * v;
            }
        }))
    }

    /// Looks up a builtin by label. `rates` feeds the parametrized systems.
    pub fn by_label(label: &str, species: usize, rates: &[f64]) -> Result<Self> {
        let need = |m: usize| {
            if species == m {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!(
                    "reaction '{label}' has {m} species but {species} are configured"
                )))
            }
        };
        match label {
            "zero" => Ok(ReactionSystem::zero(species)),
            "annihilation" => need(2).map(|_| builtin_annihilation()),
            "transport_demo" => need(6).and_then(|_| builtin_transport_demo(rates)),
            "linear_growth" => Ok(ReactionSystem::linear_growth(species)),
            "linear_decay" => ReactionSystem::linear_decay(species, rates.first().copied().unwrap_or(1.0)),
            other => Err(Error::InvalidParameter(format!(
                "unknown reaction '{other}'; available: {}",
                AVAILABLE_LABELS.join(", ")
            ))),
        }
    }
}

impl ReactionField for ReactionSystem {
    fn species(&self) -> usize {
        self.species
    }

    fn eval(&self, u: &[f64], out: &mut [f64]) {
        (self.kinetics)(u, out)
    }
}

/// Two species annihilating on contact: `f₁ = f₂ = −u₁u₂`.
pub fn builtin_annihilation() -> ReactionSystem {
    let c = DeclaredConstants { growth: 1.0, mass_control: 1.0, lipschitz_base: 0.0, lipschitz_slope: 2.0, mass_dissipating: true };
    ReactionSystem::new("annihilation", 2, Some(c), |u, out| {
        let r = u[0] * u[1];
        out[0] = -r;
        out[1] = -r;
    })
}

/// Number of rate constants of [`builtin_transport_demo`].
pub const TRANSPORT_RATES: usize = 5;

/// Six-species mass-action stand-in for a nuclear-transport network.
///
/// Species: `0 R_t, 1 R_d, 2 T_r, 3 C, 4 T, 5 T_c`. Reactions, with rates `k0..k4`:
///
/// ```text
/// k0: R_t + T  -> T_r
/// k1: T_r      -> T
/// k2: R_t      -> R_d
/// k3: C + T    -> T_c
/// k4: T_r + C  -> T_c + R_t
/// ```
///
/// No reaction increases the molecule count, so `Σ f ≤ 0`; with `k0 = k3 = 0`
/// every reaction conserves it and `Σ f ≡ 0`.
pub fn builtin_transport_demo(rates: &[f64]) -> Result<ReactionSystem> {
    if rates.len() != TRANSPORT_RATES {
        return Err(Error::InvalidParameter(format!(
            "transport_demo takes {TRANSPORT_RATES} rates, got {}",
            rates.len()
        )));
    }
    if let Some(r) = rates.iter().find(|r| !(**r >= 0.0) || !r.is_finite()) {
        return Err(Error::InvalidParameter(format!("rates must be nonnegative, got {r}")));
    }
    let k: [f64; 5] = rates.try_into().expect("length checked");
    let c = DeclaredConstants {
        growth: k.iter().sum(),
        mass_control: 0.0,
        lipschitz_base: 2.0 * (k[1] + k[2]),
        lipschitz_slope: 3.0 * k[0] + 3.0 * k[3] + 4.0 * k[4],
        mass_dissipating: true,
    };
    Ok(ReactionSystem::new("transport_demo", 6, Some(c), move |u, out| {
        let r0 = k[0] * u[0] * u[4];
        let r1 = k[1] * u[2];
        let r2 = k[2] * u[0];
        let r3 = k[3] * u[3] * u[4];
        let r4 = k[4] * u[2] * u[3];
        out[0] = -r0 - r2 + r4;
        out[1] = r2;
        out[2] = r0 - r1 - r4;
        out[3] = -r3 - r4;
        out[4] = -r0 + r1 - r3;
        out[5] = r3 + r4;
    }))
}

/// `fⁿ_i = f_i / (1 + (1/n) Σ_j |f_j|)`, bounded by `n` in every component.
#[derive(Debug, Clone)]
pub struct RegularizedReaction {
    pub base: ReactionSystem,
    pub level: u32,
}

pub fn regularize(sys: &ReactionSystem, n: u32) -> Result<RegularizedReaction> {
    if n < 1 {
        return Err(Error::InvalidParameter("regularization level must be at least 1".into()));
    }
    Ok(RegularizedReaction { base: sys.clone(), level: n })
}

impl ReactionField for RegularizedReaction {
    fn species(&self) -> usize {
        self.base.species
    }

    fn eval(&self, u: &[f64], out: &mut [f64]) {
        self.base.eval(u, out);
        let total: f64 = out.iter().map(|v| v.abs()).sum();
        let scale = 1.0 / (1.0 + total / f64::from(self.level));
        out.iter_mut().for_each(|v| *v *= scale);
    }
}

/// Clips `u0` at `n` and smooths it with a normalized bump of radius `1/n`,
/// separately on each side of the membrane.
pub fn mollify_initial(u0: &Field, n: u32, mesh: &MembraneMesh) -> Result<Field> {
    check_len(mesh.cell_count(), u0.len())?;
    if n < 1 {
        return Err(Error::InvalidParameter("mollification level must be at least 1".into()));
    }
    if let Some((i, v)) = u0.iter().enumerate().find(|(_, v)| !(**v >= 0.0)) {
        return Err(Error::InvalidData(format!("initial data must be nonnegative, cell {i} has {v}")));
    }
    let cap = f64::from(n);
    let clipped: Vec<f64> = u0.iter().map(|v| v.min(cap)).collect();
    let radius = 1.0 / cap;
    let cells = mesh.cells();
    let bump = |r: f64| {
        let s = r / radius;
        if s < 1.0 { (-1.0 / (1.0 - s * s)).exp() } else { 0.0 }
    };
    let mut out = Field::zeros(cells.len());
    for (i, ci) in cells.iter().enumerate() {
        let range = mesh.subdomain_cells(ci.subdomain);
        let (mut acc, mut norm) = (0.0, 0.0);
        for j in range {
            let cj = &cells[j];
            let dx = cj.center[0] - ci.center[0];
            if dx.abs() >= radius {
                continue;
            }
            let dy = cj.center[1] - ci.center[1];
            let w = bump((dx * dx + dy * dy).sqrt()) * cj.volume;
            acc += w * clipped[j];
            norm += w;
        }
        out[i] = acc / norm;
    }
    Ok(out)
}

/// C² truncation at level `b`: identity on `[0, b−2]`, a cosine transition of
/// width 2 for the derivative, constant `b − 1` from `b` on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Truncation {
    level: f64,
}

pub const TRUNCATION_WIDTH: f64 = 2.0;

pub fn make_truncation(b: f64) -> Result<Truncation> {
    if !(b >= 4.0) || !b.is_finite() {
        return Err(Error::InvalidParameter(format!("truncation level must be at least 4, got {b}")));
    }
    Ok(Truncation { level: b })
}

impl Truncation {
    pub fn level(&self) -> f64 {
        self.level
    }

    fn start(&self) -> f64 {
        self.level - TRUNCATION_WIDTH
    }

    pub fn value(&self, sigma: f64) -> f64 {
        let a = self.start();
        if sigma <= a {
            sigma
        } else if sigma >= self.level {
            a + 1.0
        } else {
            let s = sigma - a;
            let w = std::f64::consts::FRAC_PI_2;
            a + 0.5 * s + (w * s).sin() / (2.0 * w)
        }
    }

    pub fn derivative(&self, sigma: f64) -> f64 {
        let a = self.start();
        if sigma <= a {
            1.0
        } else if sigma >= self.level {
            0.0
        } else {
            0.5 * (1.0 + (std::f64::consts::FRAC_PI_2 * (sigma - a)).cos())
        }
    }

    pub fn second_derivative(&self, sigma: f64) -> f64 {
        let a = self.start();
        if sigma <= a || sigma >= self.level {
            0.0
        } else {
            let w = std::f64::consts::FRAC_PI_2;
            -0.5 * w * (w * (sigma - a)).sin()
        }
    }
}

/// Sampled estimates of the hypothesis constants on `[0, M]^m`.
#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisReport {
    pub label: String,
    pub bound: f64,
    pub samples: usize,
    /// `max_i |f_i| / (1 + Σu²)`
    pub growth: f64,
    /// `max Σf / (1 + Σu)`
    pub mass_control: f64,
    /// `max Σ_i |f_i(u) − f_i(v)| / Σ_j |u_j − v_j|`
    pub lipschitz: f64,
    /// Smallest `f_i` seen on the hyperplanes `u_i = 0`.
    pub worst_quasi_positivity: f64,
    pub quasi_positive: bool,
    /// Estimates at half the sample budget, for the doubling test.
    pub half_budget: [f64; 3],
    /// Growth and mass-control estimates on `[0, 2M]^m`.
    pub doubled_box: [f64; 2],
    pub failures: Vec<String>,
}

impl HypothesisReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

pub const QUASI_POSITIVITY_TOLERANCE: f64 = -1e-12;
/// An estimate that grows by more than this factor when the sample budget or the
/// sampling box doubles counts as divergent.
pub const DIVERGENCE_FACTOR: f64 = 1.5;

struct Estimates {
    growth: f64,
    mass: f64,
    lipschitz: f64,
    quasi: f64,
}

fn sample_estimates(sys: &dyn ReactionField, bound: f64, samples: usize, rng: &mut ChaCha8Rng) -> (Estimates, Estimates) {
    let m = sys.species();
    let mut u = vec![0.0; m];
    let mut v = vec![0.0; m];
    let mut fu = vec![0.0; m];
    let mut fv = vec![0.0; m];
    let mut prev = vec![0.0; m];
    let mut est = Estimates { growth: 0.0, mass: f64::NEG_INFINITY, lipschitz: 0.0, quasi: f64::INFINITY };
    let mut half = None;
    for k in 0..samples {
        u.iter_mut().for_each(|x| *x = rng.gen_range(0.0..=bound));
        sys.eval(&u, &mut fu);
        let sq: f64 = u.iter().map(|x| x * x).sum();
        let lin: f64 = u.iter().sum();
        let amax = fu.iter().fold(0.0f64, |a, f| a.max(f.abs()));
        est.growth = est.growth.max(amax / (1.0 + sq));
        est.mass = est.mass.max(fu.iter().sum::<f64>() / (1.0 + lin));

        // Near pair and far pair for the difference quotient.
        for (vi, ui) in v.iter_mut().zip(&u) {
            *vi = (ui + bound * 1e-3 * rng.gen_range(-1.0..=1.0)).clamp(0.0, bound);
        }
        for pair in [&v, &prev] {
            let du: f64 = u.iter().zip(pair.iter()).map(|(a, b)| (a - b).abs()).sum();
            if du > 0.0 && k > 0 {
                sys.eval(pair, &mut fv);
                let df: f64 = fu.iter().zip(&fv).map(|(a, b)| (a - b).abs()).sum();
                est.lipschitz = est.lipschitz.max(df / du);
            }
        }
        prev.copy_from_slice(&u);

        for i in 0..m {
            let keep = u[i];
            u[i] = 0.0;
            sys.eval(&u, &mut fv);
            est.quasi = est.quasi.min(fv[i]);
            u[i] = keep;
        }
        if k + 1 == samples / 2 {
            half = Some(Estimates { ..est });
        }
    }
    let half = half.unwrap_or(Estimates { ..est });
    (half, est)
}

/// Samples `[0, M]^m` uniformly and estimates every hypothesis constant.
///
/// Fails when quasi-positivity is violated, when an estimate grows by more than
/// [`DIVERGENCE_FACTOR`] under sample doubling (or, for growth and mass control,
/// under doubling of the box), or when an estimate exceeds a declared constant.
pub fn check_hypotheses(sys: &dyn ReactionField, bound: f64, samples: usize) -> Result<HypothesisReport> {
    check_hypotheses_declared(sys, "custom", None, bound, samples)
}

/// As [`check_hypotheses`], also comparing against the system's declared constants.
pub fn check_system(sys: &ReactionSystem, bound: f64, samples: usize) -> Result<HypothesisReport> {
    check_hypotheses_declared(sys, sys.label(), sys.constants(), bound, samples)
}

fn check_hypotheses_declared(
    sys: &dyn ReactionField,
    label: &str,
    declared: Option<DeclaredConstants>,
    bound: f64,
    samples: usize,
) -> Result<HypothesisReport> {
    if !(bound > 0.0) {
        return Err(Error::InvalidParameter(format!("sampling bound must be positive, got {bound}")));
    }
    if samples < 1000 {
        return Err(Error::InvalidParameter(format!("at least 1000 samples required, got {samples}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x6b6b_6d65_6d62);
    let (half, full) = sample_estimates(sys, bound, samples, &mut rng);
    let (_, wide) = sample_estimates(sys, 2.0 * bound, samples, &mut rng);

    let mut failures = Vec::new();
    let diverges = |small: f64, large: f64| large > DIVERGENCE_FACTOR * small.max(0.0) + 1e-12;
    if !(full.quasi >= QUASI_POSITIVITY_TOLERANCE) {
        failures.push(format!("quasi-positivity violated: f_i = {:.3e} at u_i = 0", full.quasi));
    }
    for (name, a, b) in [
        ("growth", half.growth, full.growth),
        ("mass control", half.mass, full.mass),
        ("lipschitz", half.lipschitz, full.lipschitz),
    ] {
        if !b.is_finite() || diverges(a, b) {
            failures.push(format!("{name} estimate diverges under sample doubling: {a:.4e} -> {b:.4e}"));
        }
    }
    for (name, a, b) in [("growth", full.growth, wide.growth), ("mass control", full.mass, wide.mass)] {
        if !b.is_finite() || diverges(a, b) {
            failures.push(format!("{name} estimate diverges when the box doubles: {a:.4e} -> {b:.4e}"));
        }
    }
    if let Some(c) = declared {
        let exceeds = |est: f64, dec: f64| est > dec * (1.0 + 1e-9) + 1e-12;
        if exceeds(full.growth, c.growth) {
            failures.push(format!("growth estimate {:.4e} exceeds declared {:.4e}", full.growth, c.growth));
        }
        if exceeds(full.mass, c.mass_control) {
            failures.push(format!("mass-control estimate {:.4e} exceeds declared {:.4e}", full.mass, c.mass_control));
        }
        if exceeds(full.lipschitz, c.lipschitz(bound)) {
            failures.push(format!(
                "lipschitz estimate {:.4e} exceeds declared {:.4e}",
                full.lipschitz,
                c.lipschitz(bound)
            ));
        }
    }
    Ok(HypothesisReport {
        label: label.to_string(),
        bound,
        samples,
        growth: full.growth,
        mass_control: full.mass,
        lipschitz: full.lipschitz,
        worst_quasi_positivity: full.quasi,
        quasi_positive: full.quasi >= QUASI_POSITIVITY_TOLERANCE,
        half_budget: [half.growth, half.mass, half.lipschitz],
        doubled_box: [wide.growth, wide.mass],
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_interval_mesh;

    #[test]
    fn annihilation_values() {
        let f = builtin_annihilation();
        assert_eq!(f.evaluate(&[0.0, 0.0]), vec![0.0, 0.0]);
        assert_eq!(f.evaluate(&[1.0, 1.0]), vec![-1.0, -1.0]);
        for u2 in [0.0, 0.5, 7.0, 1e6] {
            assert!(f.evaluate(&[0.0, u2])[0] >= 0.0);
        }
    }

    #[test]
    fn transport_zero_rates_and_validation() {
        let f = builtin_transport_demo(&[0.0; 5]).unwrap();
        assert!(f.evaluate(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).iter().all(|v| *v == 0.0));
        assert!(matches!(builtin_transport_demo(&[1.0, -1.0, 0.0, 0.0, 0.0]), Err(Error::InvalidParameter(_))));
        assert!(builtin_transport_demo(&[1.0; 4]).is_err());
    }

    #[test]
    fn conservative_transport_variant_sums_to_zero() {
        let f = builtin_transport_demo(&[0.0, 1.3, 0.7, 0.0, 2.1]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let u: Vec<f64> = (0..6).map(|_| rng.gen_range(0.0..10.0)).collect();
            let s: f64 = f.evaluate(&u).iter().sum();
            assert!(s.abs() < 1e-12, "sum {s}");
        }
    }

    #[test]
    fn by_label_lists_available() {
        let err = ReactionSystem::by_label("brusselator", 2, &[]).unwrap_err().to_string();
        for l in AVAILABLE_LABELS {
            assert!(err.contains(l));
        }
        assert!(ReactionSystem::by_label("annihilation", 3, &[]).is_err());
    }

    #[test]
    fn regularized_hand_value() {
        let r = regularize(&builtin_annihilation(), 1).unwrap();
        let mut out = [0.0; 2];
        r.eval(&[10.0, 10.0], &mut out);
        assert!((out[0] + 100.0 / 201.0).abs() < 1e-15);
        assert!(regularize(&builtin_annihilation(), 0).is_err());
    }

    #[test]
    fn regularized_zero_stays_zero() {
        let r = regularize(&ReactionSystem::zero(3), 5).unwrap();
        let mut out = [1.0; 3];
        r.eval(&[1.0, 2.0, 3.0], &mut out);
        assert_eq!(out, [0.0; 3]);
    }

    #[test]
    fn truncation_regions() {
        let t = make_truncation(6.0).unwrap();
        assert_eq!((t.value(0.0), t.derivative(0.0), t.second_derivative(0.0)), (0.0, 1.0, 0.0));
        assert_eq!(t.value(3.5), 3.5);
        assert_eq!((t.derivative(6.0), t.second_derivative(6.0)), (0.0, 0.0));
        assert_eq!(t.value(6.0), t.value(100.0));
        assert!((t.value(6.0) - 5.0).abs() < 1e-14);
        assert!(make_truncation(3.9).is_err());
    }

    #[test]
    fn truncation_second_derivative_floor() {
        let t = make_truncation(10.0).unwrap();
        let min = (0..=100_000)
            .map(|k| t.second_derivative(12.0 * k as f64 / 100_000.0))
            .fold(f64::INFINITY, f64::min);
        assert!(min >= -std::f64::consts::FRAC_PI_4 - 1e-15);
        assert!(min > -1.0);
        assert!((min + std::f64::consts::FRAC_PI_4).abs() < 1e-6);
    }

    #[test]
    fn checker_linear_growth_mass_control_near_one() {
        let rep = check_hypotheses(&ReactionSystem::linear_growth(3), 10.0, 20_000).unwrap();
        // analytic supremum on [0,10]^3 is 30/31
        assert!((rep.mass_control - 30.0 / 31.0).abs() < 0.02, "{}", rep.mass_control);
        assert!(rep.quasi_positive);
    }

    #[test]
    fn checker_rejects_constant_loss() {
        let sys = ReactionSystem::new("loss", 2, None, |_, out| {
            out[0] = -1.0;
            out[1] = 0.0;
        });
        let rep = check_hypotheses(&sys, 10.0, 2000).unwrap();
        assert!(!rep.quasi_positive);
        assert!(!rep.passed());
        assert!(rep.failures.iter().any(|f| f.contains("quasi-positivity")));
    }

    #[test]
    fn checker_rejects_cubic_growth_and_quadratic_production() {
        let cubic = ReactionSystem::new("cubic", 1, None, |u, out| out[0] = -u[0].powi(3));
        let rep = check_hypotheses(&cubic, 10.0, 2000).unwrap();
        assert!(rep.failures.iter().any(|f| f.contains("growth")), "{:?}", rep.failures);

        let prod = ReactionSystem::new("prod", 2, None, |u, out| {
            out[0] = u[0] * u[1];
            out[1] = u[0] * u[1];
        });
        let rep = check_hypotheses(&prod, 10.0, 2000).unwrap();
        assert!(rep.failures.iter().any(|f| f.contains("mass control")), "{:?}", rep.failures);
    }

    #[test]
    fn checker_preconditions() {
        let f = builtin_annihilation();
        assert!(check_system(&f, 0.0, 5000).is_err());
        assert!(check_system(&f, 1.0, 999).is_err());
    }

    #[test]
    fn mollify_constant_and_spike() {
        let mesh = build_interval_mesh(1.0, 1.0, 32, 32).unwrap();
        let c = mollify_initial(&Field::constant(64, 0.75), 2, &mesh).unwrap();
        assert!(c.iter().all(|v| (v - 0.75).abs() < 1e-14));
        let mut spike = Field::zeros(64);
        spike[10] = 1e3;
        let s = mollify_initial(&spike, 1, &mesh).unwrap();
        assert!(s.max() <= 1.0 + 1e-14);
        assert!(s.min() >= 0.0);
        // no smoothing across the membrane
        assert!(s[32..].iter().all(|v| *v == 0.0));
        let mut neg = Field::zeros(64);
        neg[3] = -1.0;
        assert!(matches!(mollify_initial(&neg, 1, &mesh), Err(Error::InvalidData(_))));
    }
}
