//! Acceptance criteria. Each test prints one `PASS`/`FAIL` line with the observed
//! value and its threshold; reference values come from dense `nalgebra` solves or
//! closed forms computed here, independently of the library's solvers.

use std::sync::Arc;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use kkmembrane::elliptic::{assemble, MembraneOperator};
use kkmembrane::experiments::{
    apriori_2d, apriori_study, max_successive_change, poincare_study, regularization_sweep, rough_heat, smooth_heat,
    standard_annihilation, steady_refinement, tall_spike, transient_refinement,
};
use kkmembrane::mesh::{build_interval_mesh, build_rect_mesh, MembraneMesh};
use kkmembrane::monitors::{
    key_estimate_check, species_operator, species_sources, species_states, time_translation_modulus,
    truncation_energy_check,
};
use kkmembrane::parabolic::{simulate, steady_state, Trajectory};
use kkmembrane::reactions::{builtin_annihilation, builtin_transport_demo, check_hypotheses, check_system, make_truncation, ReactionSystem};
use kkmembrane::Field;

fn report(id: u32, name: &str, passed: bool, observed: f64, threshold: f64, elapsed: Duration) {
    println!(
        "criterion {id:>2} {}: {name}: observed {observed:.6e}, threshold {threshold:.6e} ({:.2?})",
        if passed { "PASS" } else { "FAIL" },
        elapsed
    );
    assert!(passed, "criterion {id} failed: {name}: observed {observed:e} vs threshold {threshold:e}");
}

fn dense(op: &MembraneOperator) -> DMatrix<f64> {
    let a = op.matrix();
    let n = a.dim();
    DMatrix::from_fn(n, n, |i, j| a.get(i, j))
}

fn standard_run() -> (kkmembrane::parabolic::SimConfig, Trajectory) {
    let cfg = standard_annihilation(64);
    let traj = simulate(&cfg).unwrap().into_result().unwrap();
    (cfg, traj)
}

#[test]
fn criterion_01_steady_exactness() {
    let start = Instant::now();
    let mesh = Arc::new(build_interval_mesh(1.0, 1.0, 32, 32).unwrap());
    let s = steady_state(&mesh, [1.0, 1.0], 1.0, 1.0, 0.0).unwrap();
    // series resistance: J = (a − c)/(L₁/D₁ + L₂/D₂ + 1/k) = 1/3, [u] = −J/k
    let err = (s.flux - 1.0 / 3.0).abs().max((s.jump + 1.0 / 3.0).abs());
    let elapsed = start.elapsed();
    report(1, "steady flux 1/3 and jump -1/3", err <= 1e-10 && elapsed < Duration::from_secs(1), err, 1e-10, elapsed);
}

#[test]
fn criterion_02_dual_norm_oracle() {
    let start = Instant::now();
    let meshes = [
        Arc::new(build_interval_mesh(1.0, 1.0, 32, 32).unwrap()),
        Arc::new(build_rect_mesh(1.0, 0.5, 1.0, 4, 4, 8).unwrap()),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for mesh in &meshes {
        assert!(mesh.cell_count() <= 64);
        let op = assemble(mesh, 1.3, 0.7).unwrap();
        let lu = dense(&op).lu();
        let m = DVector::from_vec(mesh.volumes());
        for _ in 0..10 {
            let f = Field::from_fn(mesh.cell_count(), |_| rng.gen_range(-1.0..1.0));
            let mf = DVector::from_iterator(f.len(), f.iter().zip(m.iter()).map(|(a, b)| a * b));
            let w = lu.solve(&mf).unwrap();
            let exact = mf.dot(&w).sqrt();
            let got = op.dual_norm(&f).unwrap();
            worst = worst.max(((got - exact) / exact).abs());
        }
    }
    let elapsed = start.elapsed();
    report(2, "dual norm vs dense LU, 20 random data", worst <= 1e-8 && elapsed < Duration::from_secs(5), worst, 1e-8, elapsed);
}

#[test]
fn criterion_03_key_estimate() {
    let start = Instant::now();
    let (cfg, traj) = standard_run();
    let rep = key_estimate_check(&traj, &cfg).unwrap();
    let elapsed = start.elapsed();

    // C₁ from a dense solve of −ΔG = C with the unit-diffusion operator
    let op = assemble(&traj.mesh, 1.0, 1.0).unwrap();
    let vol = DVector::from_vec(traj.mesh.volumes());
    let g = dense(&op).lu().solve(&(vol.clone() * rep.c)).unwrap();
    let c1 = g.iter().zip(vol.iter()).map(|(g, m)| m * g * g).sum::<f64>() / (2.0 * 0.5);
    assert!(((rep.c1 - c1) / c1).abs() < 1e-10, "C1 {} vs dense {}", rep.c1, c1);

    // worst_ratio already includes the 5% slack: E(t) ≤ E(0) + 1.05·C₁t
    let ok = rep.holds && rep.sq_holds && elapsed < Duration::from_secs(30);
    report(3, "E(t) <= E(0) + 1.05 C1 t and sum int int u^2 <= C3", ok, rep.worst_ratio, 1.0, elapsed);
    println!("  space-time L2: {:.6e} <= C3 = {:.6e}", rep.sq_integral, rep.c3);
}

#[test]
fn criterion_04_dissipation() {
    let start = Instant::now();
    let mut cfg = standard_annihilation(64);
    cfg.reaction.label = "zero".into();
    let traj = simulate(&cfg).unwrap().into_result().unwrap();
    let mut norms = vec![traj.initial.dual_norm_u.unwrap()];
    norms.extend(traj.records.iter().map(|r| r.dual_norm_u.unwrap()));
    let worst = norms.windows(2).map(|w| (w[1] - w[0]) / w[0]).fold(f64::NEG_INFINITY, f64::max);
    report(4, "dual norm of U nonincreasing with f = 0", worst <= 1e-12, worst, 1e-12, start.elapsed());
}

#[test]
fn criterion_05_nonnegativity_and_mass() {
    let start = Instant::now();
    let (_, traj) = standard_run();
    let min = traj.records.iter().map(|r| r.min_value).fold(f64::INFINITY, f64::min);
    let mut masses = vec![traj.initial.total_mass];
    masses.extend(traj.records.iter().map(|r| r.total_mass));
    let growth = masses.windows(2).map(|w| (w[1] - w[0]) / w[0]).fold(f64::NEG_INFINITY, f64::max);
    println!("  min value {min:.3e}, largest relative mass change per step {growth:.3e}");
    report(5, "min u >= -1e-12 and total mass nonincreasing", min >= -1e-12 && growth <= 1e-14, min, -1e-12, start.elapsed());
}

/// Per-side budgets recomputed from stored states with the mesh faces.
fn side_budget_residual(mesh: &MembraneMesh, d: f64, k: f64, old: &Field, new: &Field, src: &Field, dt: f64) -> f64 {
    let side = |c: usize| mesh.subdomain_of(c).index();
    let mut dm = [0.0; 2];
    let mut s = [0.0; 2];
    for (c, cell) in mesh.cells().iter().enumerate() {
        dm[side(c)] += cell.volume * (new[c] - old[c]);
        s[side(c)] += cell.volume * src[c];
    }
    let mut out = [0.0; 2];
    for f in mesh.dirichlet_faces() {
        out[side(f.cell)] += d * f.area / f.half_dist * new[f.cell];
    }
    let mut flux = 0.0;
    for f in mesh.membrane_faces() {
        let t = f.area / (f.dist1 / d + 1.0 / (d * k) + f.dist2 / d);
        flux += t * (new[f.cell1] - new[f.cell2]);
    }
    let r1 = dm[0] - dt * (s[0] - out[0] - flux);
    let r2 = dm[1] - dt * (s[1] - out[1] + flux);
    r1.abs().max(r2.abs())
}

#[test]
fn criterion_06_flux_continuity() {
    let start = Instant::now();
    let (cfg, traj) = standard_run();
    let mut worst: f64 = 0.0;
    for (s, spec) in cfg.species.iter().enumerate() {
        let states = species_states(&traj, s).unwrap();
        let sources = species_sources(&traj, s).unwrap();
        for (k, dt) in traj.dts.iter().enumerate() {
            let r = side_budget_residual(&traj.mesh, spec.diffusion, spec.permeability, &states[k], &states[k + 1], &sources[k], *dt);
            worst = worst.max(r);
        }
    }
    let reported = traj.records.iter().map(|r| r.budget_residual).fold(0.0, f64::max);
    println!("  recomputed {worst:.3e}, reported by the integrator {reported:.3e}");
    report(6, "per-side mass budgets balance", worst.max(reported) <= 1e-12, worst.max(reported), 1e-12, start.elapsed());
}

#[test]
fn criterion_07_truncation_energy() {
    let start = Instant::now();
    let (cfg, traj) = standard_run();
    let op = species_operator(&traj.mesh, &cfg, 0).unwrap();
    let states = species_states(&traj, 0).unwrap();
    let sources = species_sources(&traj, 0).unwrap();
    let mut worst: f64 = 0.0;
    let mut ok = true;
    for b in [4.0, 8.0, 16.0] {
        let r = truncation_energy_check(&op, &states, &sources, &traj.dts, b, 0.10).unwrap();
        println!("  b = {b}: lhs {:.6e}, rhs {:.6e}", r.lhs, r.rhs);
        worst = worst.max(r.lhs / (1.1 * r.rhs));
        ok &= r.holds;
    }
    report(7, "truncated energy <= b(int int |f| + int |w0|)(1.1)", ok, worst, 1.0, start.elapsed());
}

#[test]
fn criterion_08_truncation_object() {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for b in [4.0, 10.0, 100.0] {
        let t = make_truncation(b).unwrap();
        let n = 10_000;
        let h = 1.5 * b / n as f64;
        for i in 0..=n {
            let s = h * i as f64;
            let (v, d, dd) = (t.value(s), t.derivative(s), t.second_derivative(s));
            let mut e: f64 = 0.0;
            e = e.max(-d).max(d - 1.0).max(-1.0 - dd).max(dd);
            if s <= b - 2.0 {
                e = e.max((v - s).abs());
            }
            if s >= b {
                e = e.max(d.abs()).max((v - t.value(b)).abs());
            }
            if i > 0 {
                let p = s - h;
                // derivatives agree with difference quotients; T'' has no jumps
                e = e.max(((v - t.value(p)) / h - 0.5 * (d + t.derivative(p))).abs() - h);
                e = e.max(((d - t.derivative(p)) / h - 0.5 * (dd + t.second_derivative(p))).abs() - h);
                e = e.max((dd - t.second_derivative(p)).abs() - 2.0 * h);
            }
            worst = worst.max(e);
        }
    }
    report(8, "T_b bounds, C2 continuity, identity and plateau", worst <= 0.0, worst, 0.0, start.elapsed());
}

#[test]
fn criterion_09_hypothesis_checker() {
    let start = Instant::now();
    let a = check_system(&builtin_annihilation(), 10.0, 100_000).unwrap();
    let t = check_system(&builtin_transport_demo(&[1.0, 0.5, 0.2, 0.8, 0.3]).unwrap(), 10.0, 100_000).unwrap();
    let bad = ReactionSystem::new("constant loss", 2, None, |_, out| {
        out[0] = -1.0;
        out[1] = 0.0;
    });
    let r = check_hypotheses(&bad, 10.0, 100_000).unwrap();
    println!("  annihilation {:?}, transport {:?}, constant loss {:?}", a.failures, t.failures, r.failures);
    let ok = a.passed() && t.passed() && !r.quasi_positive && !r.passed();
    report(9, "builtins pass, constant loss rejected on quasi-positivity", ok, r.worst_quasi_positivity, 0.0, start.elapsed());
}

#[test]
fn criterion_10_regularization_sweep() {
    let start = Instant::now();
    let table = regularization_sweep(&tall_spike(None), &[1, 4, 16, 64]).unwrap();
    let elapsed = start.elapsed();
    let worst = table.d.windows(2).flat_map(|w| w[1].iter().zip(&w[0]).map(|(b, a)| b / a)).fold(0.0, f64::max);
    println!("  d_k per species: {:?}", table.d);
    let ok = !table.inactive && table.passed() && elapsed < Duration::from_secs(120);
    report(10, "d_k strictly decreasing over n = 1, 4, 16, 64", ok, worst, 1.0, elapsed);
}

#[test]
fn criterion_11_apriori_norms() {
    let start = Instant::now();
    let rows = apriori_study(&[apriori_2d(16), apriori_2d(32), apriori_2d(64)], 0.4, 1.5).unwrap();
    let elapsed = start.elapsed();
    let col = |f: fn(&kkmembrane::experiments::AprioriRow) -> f64| rows.iter().map(f).collect::<Vec<_>>();
    let change = max_successive_change(&col(|r| r.weighted_gradient))
        .max(max_successive_change(&col(|r| r.lbeta_gradient)))
        .max(max_successive_change(&col(|r| r.lbeta_trace)));
    for r in &rows {
        println!("  {:>5} cells: {:.6e} {:.6e} {:.6e}", r.cells, r.weighted_gradient, r.lbeta_gradient, r.lbeta_trace);
    }
    let ok = change <= 0.10 && elapsed < Duration::from_secs(300);
    report(11, "weighted and L^1.5 norms stable across three 2D meshes", ok, change, 0.10, elapsed);
}

#[test]
fn criterion_12_time_translation() {
    let start = Instant::now();
    let cfg = rough_heat();
    let traj = simulate(&cfg).unwrap().into_result().unwrap();
    let states = species_states(&traj, 0).unwrap();
    let rep = time_translation_modulus(&traj.mesh.volumes(), &states, cfg.dt, &[2, 4, 8, 16, 32]).unwrap();
    assert!(rep.h.last().unwrap() / rep.h[0] >= 10.0);
    let slope = rep.slope.unwrap();
    report(12, "log-log slope of the modulus", slope >= 0.45, slope, 0.45, start.elapsed());
}

#[test]
fn criterion_13_poincare() {
    let start = Instant::now();
    let ks = [0.1, 1.0, 10.0];
    let table = poincare_study(&ks, &[64, 128, 256]).unwrap();
    // dense generalized eigenproblem on the coarsest mesh
    let mut worst_oracle: f64 = 0.0;
    for (k, row) in ks.iter().zip(&table.constants) {
        let mesh = Arc::new(build_interval_mesh(1.0, 0.5, 64, 32).unwrap());
        let op = assemble(&mesh, 1.0, *k).unwrap();
        let s = DVector::from_iterator(mesh.cell_count(), mesh.volumes().iter().map(|m| 1.0 / m.sqrt()));
        let a = dense(&op);
        let sym = DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| s[i] * a[(i, j)] * s[j]);
        let lmin = SymmetricEigen::new(sym).eigenvalues.min();
        worst_oracle = worst_oracle.max(((row[0] - 1.0 / lmin) * lmin).abs());
    }
    assert!(worst_oracle < 1e-6, "inverse iteration vs dense eigen: {worst_oracle:e}");
    let change = table.finest_changes().into_iter().fold(0.0, f64::max);
    println!("  C_P rows {:?}", table.constants);
    report(13, "C_P stabilizes (<5%) and decreases in k", change < 0.05 && table.decreasing_in_k(), change, 0.05, start.elapsed());
}

#[test]
fn criterion_14_refinement_order() {
    let start = Instant::now();
    let steady = steady_refinement(&[8, 16, 32, 64]).unwrap();
    let steady_err = steady.iter().map(|r| r.max_error.max(r.flux_error).max(r.jump_error)).fold(0.0, f64::max);
    let table = transient_refinement(&smooth_heat(8, 0.02), 4).unwrap();
    println!("  transient orders {:?}, steady max error {steady_err:.3e}", table.orders);
    let order = table.final_order();
    report(14, "transient L1 order >= 0.9, steady exact", order >= 0.9 && steady_err <= 1e-10, order, 0.9, start.elapsed());
}
