//! Degree-of-freedom bookkeeping for the Taylor-Hood `Q2 x Q1` pair on the
//! extruded quadrilateral mesh.
//!
//! Q2 velocity nodes live on the refined structured grid `(2 nx + 1) x
//! (2 nz + 1)`; Q1 pressure nodes on vertices. Only nodes touched by an
//! active cell exist. Zero velocity is imposed on the base of every active
//! cell and on lateral cliff faces, i.e. the vertical edges where an
//! active cell has no active horizontal neighbor (this includes the
//! domain ends).

use crate::fem::{q1, q2, q2_grad, quad_rule, QuadFamily};
use crate::mesh::ExtrudedMesh;
use crate::{Error, Result};

/// One active quadrilateral with its local-to-global maps.
#[derive(Debug, Clone)]
pub struct Cell {
    /// Horizontal cell index in the base mesh.
    pub hx: usize,
    /// Layer index, 0 at the bed.
    pub layer: usize,
    /// Q2 node ids, local index `3a + b` for `(a, b)` over the 3x3 stencil.
    pub q2: [usize; 9],
    /// Q1 node ids, local index `2a + b`.
    pub q1: [usize; 4],
    /// Corner heights `[z00, z01, z10, z11]` (column-major as in the mesh).
    pub corners: [f64; 4],
    pub dx: f64,
}

/// Assembled dof layout for one extruded mesh.
#[derive(Debug)]
pub struct StokesSpace {
    mesh: ExtrudedMesh,
    n2z: usize,
    /// Per refined-grid slot, the compact Q2 node id.
    q2_ids: Vec<Option<usize>>,
    q2_coords: Vec<(f64, f64)>,
    q2_dirichlet: Vec<bool>,
    /// Free-velocity index per Q2 node (None when Dirichlet).
    free_vel: Vec<Option<usize>>,
    n_free_vel: usize,
    q1_ids: Vec<Option<usize>>,
    n_q1: usize,
    cells: Vec<Cell>,
    /// Tabulated quadrature for the volume forms (degree-6 exact).
    pub(crate) qp: QuadTab,
}

/// Quadrature tabulation shared by assembly loops.
#[derive(Debug)]
pub(crate) struct QuadTab {
    pub weights: Vec<f64>,
    pub points: Vec<[f64; 2]>,
    pub q2_val: Vec<[f64; 9]>,
    pub q2_ref_grad: Vec<[[f64; 2]; 9]>,
    pub q1_val: Vec<[f64; 4]>,
}

impl StokesSpace {
    pub fn build(mesh: ExtrudedMesh) -> Result<StokesSpace> {
        let base = mesh.base().clone();
        let nx = base.n_cells();
        let nz = mesh.nz();
        let n2x = 2 * nx + 1;
        let n2z = 2 * nz + 1;

        let cell_active: Vec<bool> = {
            let mut v = vec![false; nx];
            for &i in mesh.active_cells() {
                v[i] = true;
            }
            v
        };

        let slot = |i2: usize, k2: usize| i2 * n2z + k2;
        let mut q2_ids: Vec<Option<usize>> = vec![None; n2x * n2z];
        let mut q2_coords: Vec<(f64, f64)> = Vec::new();
        let mut q1_ids: Vec<Option<usize>> = vec![None; (nx + 1) * (nz + 1)];
        let mut n_q1 = 0usize;
        let mut cells: Vec<Cell> = Vec::with_capacity(mesh.n_quads());

        for &i in mesh.active_cells() {
            let dx = base.dx(i);
            let x0 = base.nodes()[i];
            for k in 0..nz {
                let corners = mesh.quad_corners(i, k);
                let [z00, z01, z10, z11] = corners;
                let mut q2_loc = [0usize; 9];
                for a in 0..3 {
                    for b in 0..3 {
                        let i2 = 2 * i + a;
                        let k2 = 2 * k + b;
                        let id = match q2_ids[slot(i2, k2)] {
                            Some(id) => id,
                            None => {
                                let xi = 0.5 * a as f64;
                                let eta = 0.5 * b as f64;
                                let x = x0 + xi * dx;
                                let z = (1.0 - xi) * ((1.0 - eta) * z00 + eta * z01)
                                    + xi * ((1.0 - eta) * z10 + eta * z11);
                                let id = q2_coords.len();
                                q2_coords.push((x, z));
                                q2_ids[slot(i2, k2)] = Some(id);
                                id
                            }
                        };
                        q2_loc[3 * a + b] = id;
                    }
                }
                let mut q1_loc = [0usize; 4];
                for a in 0..2 {
                    for b in 0..2 {
                        let islot = (i + a) * (nz + 1) + (k + b);
                        let id = match q1_ids[islot] {
                            Some(id) => id,
                            None => {
                                let id = n_q1;
                                n_q1 += 1;
                                q1_ids[islot] = Some(id);
                                id
                            }
                        };
                        q1_loc[2 * a + b] = id;
                    }
                }
                cells.push(Cell { hx: i, layer: k, q2: q2_loc, q1: q1_loc, corners, dx });
            }
        }

        if cells.is_empty() {
            return Err(Error::InvalidArgument("mesh has no active columns; no Stokes problem to pose".into()));
        }

        // Dirichlet set: base edges, plus cliff edges where a horizontal
        // neighbor cell is missing.
        let mut q2_dirichlet = vec![false; q2_coords.len()];
        for &i in mesh.active_cells() {
            for b in 0..3 {
                for k in 0..nz {
                    let left_missing = i == 0 || !cell_active[i - 1];
                    let right_missing = i + 1 >= nx || !cell_active[i + 1];
                    if left_missing {
                        if let Some(id) = q2_ids[slot(2 * i, 2 * k + b)] {
                            q2_dirichlet[id] = true;
                        }
                    }
                    if right_missing {
                        if let Some(id) = q2_ids[slot(2 * (i + 1), 2 * k + b)] {
                            q2_dirichlet[id] = true;
                        }
                    }
                }
            }
            for a in 0..3 {
                if let Some(id) = q2_ids[slot(2 * i + a, 0)] {
                    q2_dirichlet[id] = true;
                }
            }
        }

        let mut free_vel = vec![None; q2_coords.len()];
        let mut n_free_vel = 0usize;
        for (id, &dir) in q2_dirichlet.iter().enumerate() {
            if !dir {
                free_vel[id] = Some(n_free_vel);
                n_free_vel += 1;
            }
        }

        let rule = quad_rule(QuadFamily::Quad, 6)?;
        let mut q2_val = Vec::with_capacity(rule.points.len());
        let mut q2_ref_grad = Vec::with_capacity(rule.points.len());
        let mut q1_val = Vec::with_capacity(rule.points.len());
        for p in &rule.points {
            q2_val.push(q2(p[0], p[1]));
            q2_ref_grad.push(q2_grad(p[0], p[1]));
            q1_val.push(q1(p[0], p[1]));
        }
        let qp = QuadTab { weights: rule.weights, points: rule.points, q2_val, q2_ref_grad, q1_val };

        Ok(StokesSpace {
            mesh,
            n2z,
            q2_ids,
            q2_coords,
            q2_dirichlet,
            free_vel,
            n_free_vel,
            q1_ids,
            n_q1,
            cells,
            qp,
        })
    }

    pub fn mesh(&self) -> &ExtrudedMesh {
        &self.mesh
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn n_q2_nodes(&self) -> usize {
        self.q2_coords.len()
    }

    pub fn n_q1_nodes(&self) -> usize {
        self.n_q1
    }

    pub fn n_free_vel_nodes(&self) -> usize {
        self.n_free_vel
    }

    /// Total free unknowns: two velocity components per free Q2 node plus
    /// all pressures.
    pub fn n_dofs(&self) -> usize {
        2 * self.n_free_vel + self.n_q1
    }

    pub fn q2_id(&self, i2: usize, k2: usize) -> Option<usize> {
        self.q2_ids[i2 * self.n2z + k2]
    }

    pub fn q2_coords(&self, id: usize) -> (f64, f64) {
        self.q2_coords[id]
    }

    pub fn is_dirichlet(&self, id: usize) -> bool {
        self.q2_dirichlet[id]
    }

    /// Free velocity dof index for `(node, component)`, if unconstrained.
    pub fn vel_dof(&self, id: usize, comp: usize) -> Option<usize> {
        self.free_vel[id].map(|f| 2 * f + comp)
    }

    /// Global dof index of pressure node `q`.
    pub fn pressure_dof(&self, q: usize) -> usize {
        2 * self.n_free_vel + q
    }

    /// Fingerprint of the dof layout: equal keys mean identical sparsity
    /// pattern and dof ordering, so factorizations may be reused.
    pub fn layout_key(&self) -> (Vec<usize>, usize) {
        (self.mesh.active_cells().to_vec(), self.mesh.nz())
    }

    /// Packs the free unknowns of a state into a flat vector.
    pub fn pack_free(&self, vel: &[f64], pressure: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; self.n_dofs()];
        for id in 0..self.n_q2_nodes() {
            if let Some(f) = self.free_vel[id] {
                x[2 * f] = vel[2 * id];
                x[2 * f + 1] = vel[2 * id + 1];
            }
        }
        for q in 0..self.n_q1 {
            x[self.pressure_dof(q)] = pressure[q];
        }
        x
    }

    /// Expands a flat free vector into full nodal coefficient vectors,
    /// with exact zeros on Dirichlet nodes.
    pub fn unpack_free(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut vel = vec![0.0; 2 * self.n_q2_nodes()];
        for id in 0..self.n_q2_nodes() {
            if let Some(f) = self.free_vel[id] {
                vel[2 * id] = x[2 * f];
                vel[2 * id + 1] = x[2 * f + 1];
            }
        }
        let mut pressure = vec![0.0; self.n_q1];
        for q in 0..self.n_q1 {
            pressure[q] = x[self.pressure_dof(q)];
        }
        (vel, pressure)
    }

    /// Geometry factors at a quadrature point of a cell: `(z_xi, z_eta)`.
    #[inline]
    pub(crate) fn z_derivs(cell: &Cell, xi: f64, eta: f64) -> (f64, f64) {
        let [z00, z01, z10, z11] = cell.corners;
        let z_xi = (1.0 - eta) * (z10 - z00) + eta * (z11 - z01);
        let z_eta = (1.0 - xi) * (z01 - z00) + xi * (z11 - z10);
        (z_xi, z_eta)
    }

    /// Visits every volume quadrature point with Q2 basis values, physical
    /// gradients and `det(J) * weight`; used for norms and diagnostics.
    pub fn for_each_quad_point(
        &self,
        mut f: impl FnMut(usize, usize, &[usize; 9], &[f64; 9], &[[f64; 2]; 9], f64),
    ) {
        for (ci, cell) in self.cells.iter().enumerate() {
            for (qi, pt) in self.qp.points.iter().enumerate() {
                let (z_xi, z_eta) = Self::z_derivs(cell, pt[0], pt[1]);
                let det = cell.dx * z_eta;
                let mut grads = [[0.0f64; 2]; 9];
                let rg = &self.qp.q2_ref_grad[qi];
                for a in 0..9 {
                    grads[a][0] = (z_eta * rg[a][0] - z_xi * rg[a][1]) / det;
                    grads[a][1] = rg[a][1] / z_eta;
                }
                f(ci, qi, &cell.q2, &self.qp.q2_val[qi], &grads, det * self.qp.weights[qi]);
            }
        }
    }
}
