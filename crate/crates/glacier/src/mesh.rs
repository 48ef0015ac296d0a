//! Horizontal interval mesh and its vertical extrusion into the ice domain.
//!
//! The ice occupies `{(x, z) : b(x) < z < s(x)}`. Columns whose thickness
//! `s_i - b_i` falls below a minimum are treated as ice free and carry no
//! Stokes degrees of freedom; the surface velocity there is zero by the
//! extension-by-zero convention.

use std::io::Write;
use std::sync::Arc;

use crate::{Error, Result};

/// Uniform (or at least strictly increasing) 1D mesh of `[-L, L]`.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalMesh {
    nodes: Vec<f64>,
}

impl IntervalMesh {
    /// Builds a uniform mesh of `[-l, l]` with `nx` cells.
    pub fn build_interval(l: f64, nx: usize) -> Result<Arc<IntervalMesh>> {
        if !(l > 0.0) {
            return Err(Error::InvalidArgument(format!("domain half-length must be positive, got {l}")));
        }
        if nx < 2 {
            return Err(Error::InvalidArgument(format!("need at least 2 cells, got {nx}")));
        }
        let dx = 2.0 * l / nx as f64;
        let nodes = (0..=nx).map(|i| -l + i as f64 * dx).collect();
        Ok(Arc::new(IntervalMesh { nodes }))
    }

    /// Mesh from explicit node coordinates; must be strictly increasing.
    pub fn from_nodes(nodes: Vec<f64>) -> Result<Arc<IntervalMesh>> {
        if nodes.len() < 3 {
            return Err(Error::InvalidArgument("need at least 3 nodes".into()));
        }
        if !nodes.windows(2).all(|w| w[1] > w[0]) {
            return Err(Error::InvalidArgument("nodes must be strictly increasing".into()));
        }
        Ok(Arc::new(IntervalMesh { nodes }))
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_cells(&self) -> usize {
        self.nodes.len() - 1
    }

    /// Width of cell `i`.
    pub fn dx(&self, i: usize) -> f64 {
        self.nodes[i + 1] - self.nodes[i]
    }

    /// Lumped (trapezoid) P1 mass: `m_i = integral of the hat function phi_i`.
    pub fn lumped_mass(&self, i: usize) -> f64 {
        let left = if i > 0 { self.dx(i - 1) } else { 0.0 };
        let right = if i + 1 < self.nodes.len() { self.dx(i) } else { 0.0 };
        0.5 * (left + right)
    }
}

/// Piecewise-linear nodal field on an [`IntervalMesh`] (surface, bed,
/// source terms, SMB samples).
#[derive(Debug, Clone)]
pub struct SurfaceField {
    mesh: Arc<IntervalMesh>,
    values: Vec<f64>,
}

impl SurfaceField {
    pub fn new(mesh: Arc<IntervalMesh>, values: Vec<f64>) -> Result<SurfaceField> {
        if values.len() != mesh.n_nodes() {
            return Err(Error::InvalidArgument(format!(
                "field has {} values for a mesh with {} nodes",
                values.len(),
                mesh.n_nodes()
            )));
        }
        Ok(SurfaceField { mesh, values })
    }

    pub fn constant(mesh: Arc<IntervalMesh>, c: f64) -> SurfaceField {
        let n = mesh.n_nodes();
        SurfaceField { mesh, values: vec![c; n] }
    }

    /// Nodal evaluation of `f(x)`.
    pub fn from_fn(mesh: Arc<IntervalMesh>, f: impl Fn(f64) -> f64) -> SurfaceField {
        let values = mesh.nodes().iter().map(|&x| f(x)).collect();
        SurfaceField { mesh, values }
    }

    pub fn mesh(&self) -> &Arc<IntervalMesh> {
        &self.mesh
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Point evaluation of the P1 interpolant (clamped to the domain).
    pub fn eval(&self, x: f64) -> f64 {
        let nodes = self.mesh.nodes();
        if x <= nodes[0] {
            return self.values[0];
        }
        if x >= *nodes.last().unwrap() {
            return *self.values.last().unwrap();
        }
        let i = match nodes.binary_search_by(|n| n.partial_cmp(&x).unwrap()) {
            Ok(i) => return self.values[i],
            Err(i) => i - 1,
        };
        let t = (x - nodes[i]) / self.mesh.dx(i);
        self.values[i] * (1.0 - t) + self.values[i + 1] * t
    }

    /// Constant slope on cell `i`.
    pub fn slope(&self, i: usize) -> f64 {
        (self.values[i + 1] - self.values[i]) / self.mesh.dx(i)
    }

    /// True when `self >= other - tol` at every node.
    pub fn dominates(&self, other: &SurfaceField, tol: f64) -> bool {
        self.values.iter().zip(&other.values).all(|(a, b)| *a >= *b - tol)
    }

    /// Checks the two fields live on the same mesh.
    pub fn same_mesh(&self, other: &SurfaceField) -> bool {
        Arc::ptr_eq(&self.mesh, &other.mesh) || self.mesh.nodes() == other.mesh.nodes()
    }
}

/// Structured quadrilateral mesh of the icy domain between bed and surface.
///
/// Each horizontal node owns a vertical column of `nz + 1` vertices; a
/// column is active when its thickness is at least `h_min`. Quadrilateral
/// cells exist between pairs of adjacent active columns, so each active
/// cell is guaranteed a positive Jacobian.
#[derive(Debug, Clone)]
pub struct ExtrudedMesh {
    base: Arc<IntervalMesh>,
    nz: usize,
    h_min: f64,
    active: Vec<bool>,
    column_z: Vec<Vec<f64>>,
    active_cells: Vec<usize>,
}

/// Builds the extruded mesh between `b` and `s` with `nz` equal layers
/// per column. Columns thinner than `h_min` are left ice free.
pub fn extrude(
    b: &SurfaceField,
    s: &SurfaceField,
    nz: usize,
    h_min: f64,
) -> Result<ExtrudedMesh> {
    if !b.same_mesh(s) {
        return Err(Error::InvalidArgument("bed and surface live on different meshes".into()));
    }
    if nz < 1 {
        return Err(Error::InvalidArgument("need at least one layer".into()));
    }
    if !(h_min > 0.0) {
        return Err(Error::InvalidArgument(format!("h_min must be positive, got {h_min}")));
    }
    let mesh = b.mesh().clone();
    let n = mesh.n_nodes();
    let mut active = vec![false; n];
    let mut column_z: Vec<Vec<f64>> = vec![Vec::new(); n];
    for i in 0..n {
        let bi = b.values()[i];
        let si = s.values()[i];
        if si < bi {
            return Err(Error::InadmissibleGeometry(format!(
                "surface below bed at node {i} (x = {}): s = {si}, b = {bi}",
                mesh.nodes()[i]
            )));
        }
        if si - bi >= h_min {
            active[i] = true;
            let dzl = (si - bi) / nz as f64;
            column_z[i] = (0..=nz).map(|k| bi + k as f64 * dzl).collect();
        }
    }
    let active_cells = (0..mesh.n_cells()).filter(|&i| active[i] && active[i + 1]).collect();
    Ok(ExtrudedMesh { base: mesh, nz, h_min, active, column_z, active_cells })
}

impl ExtrudedMesh {
    pub fn base(&self) -> &Arc<IntervalMesh> {
        &self.base
    }

    pub fn nz(&self) -> usize {
        self.nz
    }

    pub fn h_min(&self) -> f64 {
        self.h_min
    }

    /// Column activity per horizontal node.
    pub fn column_active(&self) -> &[bool] {
        &self.active
    }

    /// Vertex heights of column `i` (empty when the column is inactive).
    pub fn column_z(&self, i: usize) -> &[f64] {
        &self.column_z[i]
    }

    /// Horizontal indices of cells carrying ice (both columns active).
    pub fn active_cells(&self) -> &[usize] {
        &self.active_cells
    }

    pub fn has_ice(&self) -> bool {
        !self.active_cells.is_empty()
    }

    /// Number of quadrilaterals.
    pub fn n_quads(&self) -> usize {
        self.active_cells.len() * self.nz
    }

    /// Corner heights (z00, z01, z10, z11) of quad `(i, k)`: first index is
    /// the left/right column, second the lower/upper layer.
    pub fn quad_corners(&self, i: usize, k: usize) -> [f64; 4] {
        let zl = &self.column_z[i];
        let zr = &self.column_z[i + 1];
        [zl[k], zl[k + 1], zr[k], zr[k + 1]]
    }

    /// Total cross-sectional area of the mesh (sum of quad areas).
    pub fn area(&self) -> f64 {
        let mut a = 0.0;
        for &i in &self.active_cells {
            let dx = self.base.dx(i);
            let hl = self.column_z[i][self.nz] - self.column_z[i][0];
            let hr = self.column_z[i + 1][self.nz] - self.column_z[i + 1][0];
            a += 0.5 * (hl + hr) * dx;
        }
        a
    }

    /// CSV dump of node coordinates and column activity (debug aid).
    pub fn dump_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "x_m,active,z_bottom_m,z_top_m")?;
        for (i, &x) in self.base.nodes().iter().enumerate() {
            if self.active[i] {
                let z = &self.column_z[i];
                writeln!(w, "{x},1,{},{}", z[0], z[self.nz])?;
            } else {
                writeln!(w, "{x},0,,")?;
            }
        }
        Ok(())
    }
}
