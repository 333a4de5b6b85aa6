//! The membrane Laplacian: assembly, energy form, Poisson solves, the dual norm
//! and the membrane Poincaré constant.
//!
//! The assembled matrix `A` represents `−div(D ∇·)` with homogeneous Dirichlet
//! walls and a membrane whose flux density is `κ (u¹ − u²)`. Two-point fluxes use
//! the cell-center-to-face distances on both sides of every face, so a membrane
//! face couples its two cells with the series transmissibility
//! `area / (d¹/D¹ + 1/κ + d²/D²)`. The discrete solution of a 1D problem with
//! piecewise-linear exact solution is therefore exact.

use std::sync::Arc;

use crate::error::{check_len, Error, Result};
use crate::field::Field;
use crate::linalg::{dot, pcg, Csr};
use crate::mesh::MembraneMesh;

/// Relative residual used for Poisson solves inside norms and eigen-estimates.
pub const DEFAULT_TOLERANCE: f64 = 1e-12;

const EIGEN_TOLERANCE: f64 = 1e-8;
const EIGEN_MAX_ITER: usize = 5000;

/// Sparse SPD operator of the membrane problem, bound to its mesh.
#[derive(Debug, Clone)]
pub struct MembraneOperator {
    mesh: Arc<MembraneMesh>,
    matrix: Csr,
    diffusion: [f64; 2],
    transfer: f64,
    mass: Vec<f64>,
    membrane_trans: Vec<f64>,
    dirichlet_coeff: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct EllipticSolveReport {
    pub solution: Field,
    pub iterations: usize,
    pub residual: f64,
}

/// Assembles `D·(−Δ)` with the membrane law `∂ₙu = k [u]`, i.e. membrane flux
/// density `D k (u¹ − u²)`. With `diffusion = 1` this is the plain membrane
/// Laplacian of the energy form `B`.
pub fn assemble(mesh: &Arc<MembraneMesh>, diffusion: f64, permeability: f64) -> Result<MembraneOperator> {
    if !(diffusion > 0.0) || !(permeability > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "diffusion and permeability must be positive, got D = {diffusion}, k = {permeability}"
        )));
    }
    MembraneOperator::build(mesh, [diffusion, diffusion], diffusion * permeability)
}

/// Assembles with per-subdomain diffusion and an explicit membrane flux
/// coefficient: flux density through the membrane is `transfer (u¹ − u²)`.
pub fn assemble_sided(
    mesh: &Arc<MembraneMesh>,
    diffusion1: f64,
    diffusion2: f64,
    transfer: f64,
) -> Result<MembraneOperator> {
    if !(diffusion1 > 0.0) || !(diffusion2 > 0.0) || !(transfer > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "coefficients must be positive, got D1 = {diffusion1}, D2 = {diffusion2}, transfer = {transfer}"
        )));
    }
    MembraneOperator::build(mesh, [diffusion1, diffusion2], transfer)
}

impl MembraneOperator {
    fn build(mesh: &Arc<MembraneMesh>, diffusion: [f64; 2], transfer: f64) -> Result<Self> {
        mesh.validate()?;
        let n = mesh.cell_count();
        let d_of = |cell: usize| diffusion[mesh.subdomain_of(cell).index()];
        let mut t = Vec::with_capacity(n + 4 * mesh.interior_faces().len());
        let couple = |a: usize, b: usize, w: f64, t: &mut Vec<(usize, usize, f64)>| {
            t.push((a, a, w));
            t.push((b, b, w));
            t.push((a, b, -w));
            t.push((b, a, -w));
        };
        for f in mesh.interior_faces() {
            let w = d_of(f.cells[0]) * f.area / f.dist;
            couple(f.cells[0], f.cells[1], w, &mut t);
        }
        let membrane_trans: Vec<f64> = mesh
            .membrane_faces()
            .iter()
            .map(|f| f.area / (f.dist1 / diffusion[0] + 1.0 / transfer + f.dist2 / diffusion[1]))
            .collect();
        for (f, &w) in mesh.membrane_faces().iter().zip(&membrane_trans) {
            couple(f.cell1, f.cell2, w, &mut t);
        }
        let dirichlet_coeff: Vec<f64> = mesh
            .dirichlet_faces()
            .iter()
            .map(|f| d_of(f.cell) * f.area / f.half_dist)
            .collect();
        for (f, &w) in mesh.dirichlet_faces().iter().zip(&dirichlet_coeff) {
            t.push((f.cell, f.cell, w));
        }
        Ok(MembraneOperator {
            mesh: Arc::clone(mesh),
            matrix: Csr::from_triplets(n, t),
            diffusion,
            transfer,
            mass: mesh.volumes(),
            membrane_trans,
            dirichlet_coeff,
        })
    }

    pub fn mesh(&self) -> &Arc<MembraneMesh> {
        &self.mesh
    }

    pub fn matrix(&self) -> &Csr {
        &self.matrix
    }

    /// Cell volumes (the diagonal mass matrix).
    pub fn mass_weights(&self) -> &[f64] {
        &self.mass
    }

    pub fn diffusion(&self) -> [f64; 2] {
        self.diffusion
    }

    /// Membrane flux coefficient `κ` (flux density per unit jump).
    pub fn transfer(&self) -> f64 {
        self.transfer
    }

    /// Per-membrane-face transmissibilities, in mesh face order.
    pub fn membrane_transmissibilities(&self) -> &[f64] {
        &self.membrane_trans
    }

    /// Per-Dirichlet-face coefficients `D·area/half_dist`, in mesh face order.
    pub fn dirichlet_coefficients(&self) -> &[f64] {
        &self.dirichlet_coeff
    }

    pub fn apply(&self, v: &Field) -> Result<Field> {
        check_len(self.mass.len(), v.len())?;
        Ok(Field(self.matrix.mul(v)))
    }

    /// `B[v, w] = vᵀ A w`: face gradients, wall terms and the membrane jump term.
    pub fn bilinear_form(&self, v: &Field, w: &Field) -> Result<f64> {
        check_len(self.mass.len(), v.len())?;
        check_len(self.mass.len(), w.len())?;
        Ok(self.matrix.quad(v, w))
    }

    /// Solves `A w = M rhs` by Jacobi-preconditioned CG.
    pub fn solve_poisson(&self, rhs: &Field, tol: f64) -> Result<EllipticSolveReport> {
        self.solve_poisson_from(rhs, tol, None)
    }

    /// As [`solve_poisson`](Self::solve_poisson), starting CG from `guess`.
    pub fn solve_poisson_from(&self, rhs: &Field, tol: f64, guess: Option<&Field>) -> Result<EllipticSolveReport> {
        check_len(self.mass.len(), rhs.len())?;
        if !(tol > 0.0) {
            return Err(Error::InvalidParameter(format!("tolerance must be positive, got {tol}")));
        }
        if let Some(g) = guess {
            check_len(self.mass.len(), g.len())?;
        }
        let b: Vec<f64> = rhs.iter().zip(&self.mass).map(|(f, m)| f * m).collect();
        let out = pcg(&self.matrix, &b, guess.map(|g| &g[..]), tol, 50 * self.mass.len())?;
        Ok(EllipticSolveReport {
            solution: Field(out.x),
            iterations: out.iterations,
            residual: out.residual,
        })
    }

    /// `‖f‖_{(H¹)*} = B[w, w]^{1/2}` with `A w = M f`, i.e. `sqrt(fᵀ M A⁻¹ M f)`.
    pub fn dual_norm(&self, f: &Field) -> Result<f64> {
        self.dual_norm_from(f, None).map(|(norm, _)| norm)
    }

    /// Dual norm plus the potential `w`, warm-started from `guess`.
    ///
    /// The square is evaluated as `2 wᵀMf − wᵀAw`, which equals `B[w, w]` at the exact
    /// solution and deviates from it only quadratically in the CG error.
    pub fn dual_norm_from(&self, f: &Field, guess: Option<&Field>) -> Result<(f64, Field)> {
        let report = self.solve_poisson_from(f, DEFAULT_TOLERANCE, guess)?;
        let w = report.solution;
        let mf: Vec<f64> = f.iter().zip(&self.mass).map(|(f, m)| f * m).collect();
        let sq = 2.0 * dot(&w, &mf) - self.matrix.quad(&w, &w);
        if !sq.is_finite() {
            return Err(Error::NonFinite("dual norm".into()));
        }
        Ok((sq.max(0.0).sqrt(), w))
    }

    /// `C_P = 1/λ_min` for the generalized problem `A v = λ M v`, by inverse power
    /// iteration with Rayleigh quotients. Requires the unit-diffusion operator.
    pub fn poincare_constant(&self) -> Result<f64> {
        if self.diffusion != [1.0, 1.0] {
            return Err(Error::InvalidParameter(
                "the Poincaré constant is defined for the unit-diffusion operator".into(),
            ));
        }
        self.smallest_eigenvalue().map(|l| 1.0 / l)
    }

    /// Smallest generalized eigenvalue of `(A, M)`.
    pub fn smallest_eigenvalue(&self) -> Result<f64> {
        let n = self.mass.len();
        let mut v = Field::constant(n, 1.0);
        let norm = |v: &Field| v.iter().zip(&self.mass).map(|(x, m)| m * x * x).sum::<f64>().sqrt();
        let s = norm(&v);
        v.iter_mut().for_each(|x| *x /= s);
        let mut lambda = self.matrix.quad(&v, &v);
        let mut guess: Option<Field> = None;
        for _ in 0..EIGEN_MAX_ITER {
            let y = self.solve_poisson_from(&v, DEFAULT_TOLERANCE, guess.as_ref())?.solution;
            let s = norm(&y);
            if !(s > 0.0) || !s.is_finite() {
                return Err(Error::NonFinite("inverse power iterate".into()));
            }
            v = y.scaled(1.0 / s);
            let next = self.matrix.quad(&v, &v);
            let done = (next - lambda).abs() <= EIGEN_TOLERANCE * next;
            lambda = next;
            guess = Some(v.scaled(1.0 / lambda));
            if done {
                return Ok(lambda);
            }
        }
        Err(Error::NoConvergence { iterations: EIGEN_MAX_ITER, residual: lambda })
    }

    /// Membrane flux per face (total over the face, positive from Ω¹ to Ω²).
    pub fn membrane_fluxes(&self, u: &Field) -> Result<Vec<f64>> {
        check_len(self.mass.len(), u.len())?;
        Ok(self
            .mesh
            .membrane_faces()
            .iter()
            .zip(&self.membrane_trans)
            .map(|(f, t)| t * (u[f.cell1] - u[f.cell2]))
            .collect())
    }

    /// Flux-consistent face traces `(u¹(Γ), u²(Γ))`: cell values corrected by the
    /// membrane flux over the half-cell distance. Exact for piecewise-linear profiles.
    pub fn face_traces(&self, u: &Field) -> Result<Vec<(f64, f64)>> {
        let fluxes = self.membrane_fluxes(u)?;
        Ok(self
            .mesh
            .membrane_faces()
            .iter()
            .zip(fluxes)
            .map(|(f, q)| {
                let j = q / f.area;
                (
                    u[f.cell1] - j * f.dist1 / self.diffusion[0],
                    u[f.cell2] + j * f.dist2 / self.diffusion[1],
                )
            })
            .collect())
    }

    /// Total outflow through the Dirichlet walls of each subdomain.
    pub fn dirichlet_outflow(&self, u: &Field) -> Result<[f64; 2]> {
        check_len(self.mass.len(), u.len())?;
        let mut out = [0.0; 2];
        for (f, c) in self.mesh.dirichlet_faces().iter().zip(&self.dirichlet_coeff) {
            out[f.subdomain.index()] += c * u[f.cell];
        }
        Ok(out)
    }

    /// Diffusion coefficient of the subdomain containing `cell`.
    pub fn diffusion_at(&self, cell: usize) -> f64 {
        self.diffusion[self.mesh.subdomain_of(cell).index()]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_interval_mesh, build_rect_mesh};

    fn interval(n: usize) -> Arc<MembraneMesh> {
        Arc::new(build_interval_mesh(1.0, 1.0, n, n).unwrap())
    }

    #[test]
    fn hand_assembled_four_cells() {
        // h = 1/2, half-distances 1/4 on each side of the membrane:
        // interior 1/h = 2, walls 1/(h/2) = 4, membrane 1/(1/4 + 1 + 1/4) = 2/3.
        let op = assemble(&interval(2), 1.0, 1.0).unwrap();
        let a = op.matrix();
        assert_eq!(a.get(0, 1), -2.0);
        assert!((a.get(1, 2) + 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(a.get(0, 0), 6.0);
        assert!((a.get(1, 1) - (2.0 + 2.0 / 3.0)).abs() < 1e-15);
        assert_eq!(a.get(0, 2), 0.0);
        assert_eq!(a.max_asymmetry(), 0.0);
    }

    #[test]
    fn constant_lies_in_kernel_of_interior_terms() {
        let mesh = Arc::new(build_rect_mesh(1.0, 2.0, 1.0, 4, 5, 3).unwrap());
        let op = assemble(&mesh, 0.7, 2.0).unwrap();
        let ac = op.apply(&Field::constant(mesh.cell_count(), 1.0)).unwrap();
        let wall: std::collections::HashSet<usize> = mesh.dirichlet_faces().iter().map(|f| f.cell).collect();
        for (i, v) in ac.iter().enumerate() {
            if wall.contains(&i) {
                assert!(*v > 0.0);
            } else {
                assert!(v.abs() < 1e-13, "row {i}: {v}");
            }
        }
    }

    #[test]
    fn indicator_energy_on_four_cells() {
        // indicator of Ω²: jump term 2/3, right wall 4·1, no interior gradients.
        let mesh = interval(2);
        let op = assemble(&mesh, 1.0, 1.0).unwrap();
        let w = Field(vec![0.0, 0.0, 1.0, 1.0]);
        let b = op.bilinear_form(&w, &w).unwrap();
        assert!((b - (2.0 / 3.0 + 4.0)).abs() < 1e-14);
        assert_eq!(op.bilinear_form(&Field::zeros(4), &w).unwrap(), 0.0);
    }

    #[test]
    fn rejects_nonpositive_coefficients() {
        let mesh = interval(4);
        assert!(matches!(assemble(&mesh, 0.0, 1.0), Err(Error::InvalidParameter(_))));
        assert!(matches!(assemble(&mesh, 1.0, -1.0), Err(Error::InvalidParameter(_))));
        assert!(matches!(assemble_sided(&mesh, 1.0, 1.0, 0.0), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn poisson_zero_and_linearity() {
        let mesh = interval(16);
        let op = assemble(&mesh, 1.0, 0.5).unwrap();
        let n = mesh.cell_count();
        let zero = op.solve_poisson(&Field::zeros(n), 1e-12).unwrap();
        assert!(zero.solution.iter().all(|v| *v == 0.0));
        let f = Field::from_fn(n, |i| (i as f64).sin());
        let g = Field::from_fn(n, |i| (i as f64 * 0.37).cos());
        let sf = op.solve_poisson(&f, 1e-13).unwrap().solution;
        let sg = op.solve_poisson(&g, 1e-13).unwrap().solution;
        let sfg = op.solve_poisson(&f.combine(2.0, &g, -3.0), 1e-13).unwrap().solution;
        for i in 0..n {
            assert!((sfg[i] - (2.0 * sf[i] - 3.0 * sg[i])).abs() < 1e-10);
        }
        assert!(matches!(op.solve_poisson(&f, 0.0), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn dual_norm_homogeneous() {
        let mesh = interval(8);
        let op = assemble(&mesh, 1.0, 1.0).unwrap();
        let f = Field::from_fn(16, |i| 1.0 + i as f64);
        let a = op.dual_norm(&f).unwrap();
        let b = op.dual_norm(&f.scaled(-3.0)).unwrap();
        assert!((b - 3.0 * a).abs() < 1e-10 * a);
        assert_eq!(op.dual_norm(&Field::zeros(16)).unwrap(), 0.0);
    }

    #[test]
    fn transparent_membrane_poincare() {
        let op = assemble(&interval(64), 1.0, 1e8).unwrap();
        let cp = op.poincare_constant().unwrap();
        let exact = (2.0 / std::f64::consts::PI).powi(2);
        assert!((cp - exact).abs() / exact < 0.05, "C_P = {cp}");
        let scaled = assemble(&interval(8), 2.0, 1.0).unwrap();
        assert!(scaled.poincare_constant().is_err());
    }

    #[test]
    fn face_traces_recover_jump() {
        let mesh = interval(4);
        let op = assemble_sided(&mesh, 1.0, 1.0, 2.0).unwrap();
        let u = Field(vec![1.0, 0.9, 0.8, 0.7, 0.2, 0.15, 0.1, 0.05]);
        let q = op.membrane_fluxes(&u).unwrap()[0];
        let (t1, t2) = op.face_traces(&u).unwrap()[0];
        assert!(((t2 - t1) + q / 2.0).abs() < 1e-14);
    }
}
