//! Structured cell grids on an interval or rectangle split by a flat membrane.
//!
//! The domain is `(0, length1 + length2)` (times `(0, height)` in 2D). Cells with
//! `x < length1` belong to subdomain one, the rest to subdomain two, and the
//! membrane is the vertical line `x = length1`. Every outer wall carries a
//! homogeneous Dirichlet condition.
//!
//! Cells are numbered subdomain-one first, then subdomain two, each block
//! row-major (`j * columns + i`).

use crate::error::{check_len, Error, Result};
use crate::field::Field;

/// Which side of the membrane a cell lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Subdomain {
    One,
    Two,
}

impl Subdomain {
    pub fn index(self) -> usize {
        match self {
            Subdomain::One => 0,
            Subdomain::Two => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub center: [f64; 2],
    pub volume: f64,
    pub subdomain: Subdomain,
}

/// Face between two cells of the same subdomain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InteriorFace {
    pub cells: [usize; 2],
    pub area: f64,
    /// Distance between the two cell centers.
    pub dist: f64,
}

/// Face on the membrane. `cell1` lies in subdomain one, `cell2` in subdomain two;
/// the face normal `n¹` points from `cell1` to `cell2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MembraneFace {
    pub cell1: usize,
    pub cell2: usize,
    pub area: f64,
    /// Center-to-face distance on the side of `cell1`.
    pub dist1: f64,
    /// Center-to-face distance on the side of `cell2`.
    pub dist2: f64,
    pub center: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Wall {
    Left,
    Right,
    Bottom,
    Top,
}

/// Outer boundary face carrying the homogeneous Dirichlet condition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirichletFace {
    pub cell: usize,
    pub area: f64,
    /// Distance from the owning cell center to the wall.
    pub half_dist: f64,
    pub subdomain: Subdomain,
    pub wall: Wall,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MembraneMesh {
    dim: usize,
    length1: f64,
    length2: f64,
    height: f64,
    n1: usize,
    n2: usize,
    ny: usize,
    cells: Vec<Cell>,
    interior_faces: Vec<InteriorFace>,
    membrane_faces: Vec<MembraneFace>,
    dirichlet_faces: Vec<DirichletFace>,
}

fn check_geometry(lengths: &[f64], counts: &[usize]) -> Result<()> {
    if let Some(l) = lengths.iter().find(|l| !(**l > 0.0) || !l.is_finite()) {
        return Err(Error::InvalidGeometry(format!(
            "lengths must be positive and finite, got {l}"
        )));
    }
    if let Some(n) = counts.iter().find(|n| **n < 2) {
        return Err(Error::InvalidGeometry(format!(
            "cell counts must be at least 2, got {n}"
        )));
    }
    Ok(())
}

/// Uniform interval mesh: `n1` cells on `(0, length1)`, `n2` on `(length1, length1 + length2)`.
pub fn build_interval_mesh(length1: f64, length2: f64, n1: usize, n2: usize) -> Result<MembraneMesh> {
    check_geometry(&[length1, length2], &[n1, n2])?;
    Ok(MembraneMesh::structured(1, length1, length2, 1.0, n1, n2, 1))
}

/// Uniform rectangle mesh on `(0, length1 + length2) x (0, height)` with a vertical
/// membrane of `ny` faces at `x = length1`.
pub fn build_rect_mesh(
    length1: f64,
    length2: f64,
    height: f64,
    n1: usize,
    n2: usize,
    ny: usize,
) -> Result<MembraneMesh> {
    check_geometry(&[length1, length2, height], &[n1, n2, ny])?;
    Ok(MembraneMesh::structured(2, length1, length2, height, n1, n2, ny))
}

impl MembraneMesh {
    fn structured(
        dim: usize,
        length1: f64,
        length2: f64,
        height: f64,
        n1: usize,
        n2: usize,
        ny: usize,
    ) -> Self {
        let h1 = length1 / n1 as f64;
        let h2 = length2 / n2 as f64;
        let hy = height / ny as f64;
        let offset2 = n1 * ny;
        let idx1 = |i: usize, j: usize| j * n1 + i;
        let idx2 = |i: usize, j: usize| offset2 + j * n2 + i;
        let y_of = |j: usize| if dim == 1 { 0.0 } else { (j as f64 + 0.5) * hy };

        let mut cells = Vec::with_capacity(offset2 + n2 * ny);
        for j in 0..ny {
            for i in 0..n1 {
                cells.push(Cell {
                    center: [(i as f64 + 0.5) * h1, y_of(j)],
                    volume: h1 * hy,
                    subdomain: Subdomain::One,
                });
            }
        }
        for j in 0..ny {
            for i in 0..n2 {
                cells.push(Cell {
                    center: [length1 + (i as f64 + 0.5) * h2, y_of(j)],
                    volume: h2 * hy,
                    subdomain: Subdomain::Two,
                });
            }
        }

        let mut interior_faces = Vec::new();
        let mut dirichlet_faces = Vec::new();
        let mut membrane_faces = Vec::with_capacity(ny);
        let blocks = [
            (Subdomain::One, n1, h1, &idx1 as &dyn Fn(usize, usize) -> usize),
            (Subdomain::Two, n2, h2, &idx2 as &dyn Fn(usize, usize) -> usize),
        ];
        for (sub, nx, hx, idx) in blocks {
            for j in 0..ny {
                for i in 0..nx {
                    if i + 1 < nx {
                        interior_faces.push(InteriorFace {
                            cells: [idx(i, j), idx(i + 1, j)],
                            area: hy,
                            dist: hx,
                        });
                    }
                    if dim == 2 && j + 1 < ny {
                        interior_faces.push(InteriorFace {
                            cells: [idx(i, j), idx(i, j + 1)],
                            area: hx,
                            dist: hy,
                        });
                    }
                }
            }
            let outer_col = match sub {
                Subdomain::One => 0,
                Subdomain::Two => nx - 1,
            };
            let wall = match sub {
                Subdomain::One => Wall::Left,
                Subdomain::Two => Wall::Right,
            };
            for j in 0..ny {
                dirichlet_faces.push(DirichletFace {
                    cell: idx(outer_col, j),
                    area: hy,
                    half_dist: 0.5 * hx,
                    subdomain: sub,
                    wall,
                });
            }
            if dim == 2 {
                for i in 0..nx {
                    dirichlet_faces.push(DirichletFace {
                        cell: idx(i, 0),
                        area: hx,
                        half_dist: 0.5 * hy,
                        subdomain: sub,
                        wall: Wall::Bottom,
                    });
                    dirichlet_faces.push(DirichletFace {
                        cell: idx(i, ny - 1),
                        area: hx,
                        half_dist: 0.5 * hy,
                        subdomain: sub,
                        wall: Wall::Top,
                    });
                }
            }
        }
        for j in 0..ny {
            membrane_faces.push(MembraneFace {
                cell1: idx1(n1 - 1, j),
                cell2: idx2(0, j),
                area: hy,
                dist1: 0.5 * h1,
                dist2: 0.5 * h2,
                center: [length1, y_of(j)],
            });
        }

        MembraneMesh {
            dim,
            length1,
            length2,
            height,
            n1,
            n2,
            ny,
            cells,
            interior_faces,
            membrane_faces,
            dirichlet_faces,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn cell_count(&self) -> usize {
        self.cells.len()
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn interior_faces(&self) -> &[InteriorFace] {
        &self.interior_faces
    }

    pub fn membrane_faces(&self) -> &[MembraneFace] {
        &self.membrane_faces
    }

    pub fn dirichlet_faces(&self) -> &[DirichletFace] {
        &self.dirichlet_faces
    }

    pub fn lengths(&self) -> (f64, f64) {
        (self.length1, self.length2)
    }

    pub fn height(&self) -> f64 {
        self.height
    }

    /// `(n1, n2, ny)`; `ny == 1` in 1D.
    pub fn counts(&self) -> (usize, usize, usize) {
        (self.n1, self.n2, self.ny)
    }

    pub fn subdomain_of(&self, cell: usize) -> Subdomain {
        self.cells[cell].subdomain
    }

    pub fn volumes(&self) -> Vec<f64> {
        self.cells.iter().map(|c| c.volume).collect()
    }

    pub fn total_volume(&self) -> f64 {
        self.cells.iter().map(|c| c.volume).sum()
    }

    /// Exact measure of a subdomain (`|Ω¹|` or `|Ω²|`).
    pub fn subdomain_measure(&self, sub: Subdomain) -> f64 {
        let h = if self.dim == 1 { 1.0 } else { self.height };
        match sub {
            Subdomain::One => self.length1 * h,
            Subdomain::Two => self.length2 * h,
        }
    }

    /// Cells of one subdomain, as a contiguous index range.
    pub fn subdomain_cells(&self, sub: Subdomain) -> std::ops::Range<usize> {
        let split = self.n1 * self.ny;
        match sub {
            Subdomain::One => 0..split,
            Subdomain::Two => split..self.cells.len(),
        }
    }

    /// Index of the cell containing the point `(x, y)`; `y` is ignored in 1D.
    pub fn cell_containing(&self, x: f64, y: f64) -> Result<usize> {
        let total = self.length1 + self.length2;
        if !(0.0..=total).contains(&x) || (self.dim == 2 && !(0.0..=self.height).contains(&y)) {
            return Err(Error::InvalidGeometry(format!(
                "point ({x}, {y}) lies outside the domain"
            )));
        }
        let j = if self.dim == 1 {
            0
        } else {
            ((y / self.height * self.ny as f64) as usize).min(self.ny - 1)
        };
        if x < self.length1 {
            let i = ((x / self.length1 * self.n1 as f64) as usize).min(self.n1 - 1);
            Ok(j * self.n1 + i)
        } else {
            let i = (((x - self.length1) / self.length2 * self.n2 as f64) as usize).min(self.n2 - 1);
            Ok(self.n1 * self.ny + j * self.n2 + i)
        }
    }

    /// Cell permutation by grid row, then by global column. Row-adjacent cells
    /// across the membrane become neighbours, which keeps the matrix band narrow.
    pub fn banded_order(&self) -> Vec<usize> {
        let mut order = Vec::with_capacity(self.cells.len());
        for j in 0..self.ny {
            order.extend((0..self.n1).map(|i| j * self.n1 + i));
            order.extend((0..self.n2).map(|i| self.n1 * self.ny + j * self.n2 + i));
        }
        order
    }

    /// Checks the structural invariants; every constructor output satisfies them.
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidGeometry(msg));
        for f in &self.interior_faces {
            if self.subdomain_of(f.cells[0]) != self.subdomain_of(f.cells[1]) {
                return fail(format!("interior face {:?} crosses the membrane", f.cells));
            }
        }
        if self.membrane_faces.is_empty() {
            return fail("no membrane faces".into());
        }
        for f in &self.membrane_faces {
            if self.subdomain_of(f.cell1) != Subdomain::One || self.subdomain_of(f.cell2) != Subdomain::Two {
                return fail(format!("membrane face ({}, {}) is misoriented", f.cell1, f.cell2));
            }
        }
        for sub in [Subdomain::One, Subdomain::Two] {
            if !self.dirichlet_faces.iter().any(|f| f.subdomain == sub) {
                return fail(format!("no Dirichlet faces on the outer wall of {sub:?}"));
            }
        }
        let exact = self.subdomain_measure(Subdomain::One) + self.subdomain_measure(Subdomain::Two);
        if ((self.total_volume() - exact) / exact).abs() > 1e-12 {
            return fail(format!("cell volumes sum to {} instead of {exact}", self.total_volume()));
        }
        Ok(())
    }

    /// First-order membrane traces: the adjacent cell values `(u¹, u²)` per membrane face.
    pub fn membrane_traces(&self, field: &Field) -> Result<Vec<(f64, f64)>> {
        check_len(self.cell_count(), field.len())?;
        Ok(self
            .membrane_faces
            .iter()
            .map(|f| (field[f.cell1], field[f.cell2]))
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_layout() {
        let m = build_interval_mesh(1.0, 1.0, 4, 4).unwrap();
        assert_eq!(m.cell_count(), 8);
        assert_eq!(m.membrane_faces().len(), 1);
        let f = m.membrane_faces()[0];
        assert_eq!((f.cell1, f.cell2), (3, 4));
        let centers: Vec<f64> = m.cells().iter().map(|c| c.center[0]).collect();
        for (k, c) in centers.iter().enumerate() {
            assert!((c - (0.125 + 0.25 * k as f64)).abs() < 1e-15);
        }
        assert_eq!(m.dirichlet_faces().len(), 2);
        assert_eq!(m.dirichlet_faces()[0].cell, 0);
        assert_eq!(m.dirichlet_faces()[1].cell, 7);
        m.validate().unwrap();
    }

    #[test]
    fn interval_widths_and_volume() {
        let m = build_interval_mesh(1.0, 2.0, 2, 4).unwrap();
        assert_eq!(m.cell_count(), 6);
        assert!(m.cells().iter().all(|c| (c.volume - 0.5).abs() < 1e-15));
        assert!((m.total_volume() - 3.0).abs() < 1e-15);
        let fine = build_interval_mesh(1.0, 1.0, 100, 100).unwrap();
        assert!((fine.total_volume() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn rect_counts() {
        let m = build_rect_mesh(1.0, 1.0, 1.0, 2, 2, 2).unwrap();
        assert_eq!(m.cell_count(), 8);
        assert_eq!(m.membrane_faces().len(), 2);
        assert_eq!(m.dirichlet_faces().len(), 12);
        m.validate().unwrap();
        let m4 = build_rect_mesh(1.0, 1.0, 1.0, 4, 4, 4).unwrap();
        assert!((m4.total_volume() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn rect_membrane_orientation() {
        let m = build_rect_mesh(2.0, 1.0, 1.0, 4, 2, 2).unwrap();
        for f in m.membrane_faces() {
            assert_eq!(f.center[0], 2.0);
            assert_eq!(m.subdomain_of(f.cell1), Subdomain::One);
            assert!(m.cells()[f.cell1].center[0] < 2.0);
            assert!(m.cells()[f.cell2].center[0] > 2.0);
        }
    }

    #[test]
    fn refinement_doubles_membrane_faces() {
        let a = build_rect_mesh(1.0, 1.0, 1.0, 3, 3, 3).unwrap();
        let b = build_rect_mesh(1.0, 1.0, 1.0, 6, 6, 6).unwrap();
        assert_eq!(b.membrane_faces().len(), 2 * a.membrane_faces().len());
        assert!((a.total_volume() - b.total_volume()).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_geometry() {
        assert!(matches!(build_interval_mesh(0.0, 1.0, 4, 4), Err(Error::InvalidGeometry(_))));
        assert!(matches!(build_interval_mesh(1.0, -1.0, 4, 4), Err(Error::InvalidGeometry(_))));
        assert!(matches!(build_interval_mesh(1.0, 1.0, 1, 4), Err(Error::InvalidGeometry(_))));
        assert!(matches!(build_rect_mesh(1.0, 1.0, 1.0, 2, 2, 1), Err(Error::InvalidGeometry(_))));
    }

    #[test]
    fn traces_of_simple_fields() {
        let m = build_rect_mesh(1.0, 1.0, 1.0, 3, 2, 3).unwrap();
        let c = Field::constant(m.cell_count(), 2.5);
        assert!(m.membrane_traces(&c).unwrap().iter().all(|&(a, b)| a == 2.5 && b == 2.5));
        let ind = Field::from_fn(m.cell_count(), |i| {
            if m.subdomain_of(i) == Subdomain::Two { 1.0 } else { 0.0 }
        });
        assert!(m.membrane_traces(&ind).unwrap().iter().all(|&(a, b)| a == 0.0 && b == 1.0));
        assert!(matches!(
            m.membrane_traces(&Field::zeros(3)),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn banded_order_is_permutation() {
        let m = build_rect_mesh(1.0, 2.0, 1.0, 3, 4, 5).unwrap();
        let mut order = m.banded_order();
        order.sort_unstable();
        assert_eq!(order, (0..m.cell_count()).collect::<Vec<_>>());
    }

    #[test]
    fn locates_cells() {
        let m = build_rect_mesh(1.0, 1.0, 1.0, 4, 4, 4).unwrap();
        let c = m.cell_containing(1.6, 0.1).unwrap();
        assert_eq!(m.subdomain_of(c), Subdomain::Two);
        assert!((m.cells()[c].center[0] - 1.625).abs() < 1e-12);
        assert!((m.cells()[c].center[1] - 0.125).abs() < 1e-12);
        assert!(m.cell_containing(3.0, 0.5).is_err());
    }
}
