//! Regularized Glen-law Stokes flow on the extruded ice domain.
//!
//! Velocity/pressure use the Taylor-Hood `Q2 x Q1` pair on the structured
//! quadrilateral mesh, with zero velocity on the base and on lateral cliff
//! faces, and a stress-free (natural) upper surface. The optional FSSA
//! term augments the gravity load with the weight of the ice layer the
//! surface would gain over one time step, which stabilizes larger
//! semi-implicit steps.

mod assembly;
mod newton;
mod space;

pub use assembly::{assemble_jacobian, assemble_residual, dissipation_parts, BodyForce, Fssa};
pub use newton::{solve_stokes, StokesOptions, StokesSolution, StokesSolver};
pub use space::StokesSpace;

use std::sync::Arc;

use crate::mesh::{IntervalMesh, SurfaceField};
use crate::{Error, Result};

/// Physical constants of the ice flow model.
///
/// `p` is the Glen exponent written as `p = 1/n + 1`; `nu_p` the viscosity
/// coefficient, `eps` the strain-rate regularization. `h_scale`/`l_scale`
/// are the representative vertical and horizontal lengths entering the
/// scaled Sobolev norms.
#[derive(Debug, Clone, Copy)]
pub struct PhysParams {
    /// Glen exponent, `1 < p <= 2`.
    pub p: f64,
    /// Viscosity coefficient, Pa s^(1/n).
    pub nu_p: f64,
    /// Strain regularization, 1/s^2.
    pub eps: f64,
    /// Ice density, kg/m^3.
    pub rho_i: f64,
    /// Gravity magnitude, m/s^2.
    pub g: f64,
    /// Representative vertical scale `[H]`, m (>= 1).
    pub h_scale: f64,
    /// Representative horizontal scale `[L]`, m.
    pub l_scale: f64,
}

/// Standard cold-ice softness, Pa^-3 s^-1 (EISMINT value).
pub const ICE_SOFTNESS_A: f64 = 3.1689e-24;

impl Default for PhysParams {
    fn default() -> Self {
        PhysParams::from_glen_n(3.0, ICE_SOFTNESS_A)
    }
}

impl PhysParams {
    /// Parameters from Glen's `n` and the softness `A` in `Du = A tau^n`,
    /// giving `nu_p = A^(-1/n) / 2`.
    pub fn from_glen_n(n: f64, softness_a: f64) -> PhysParams {
        PhysParams {
            p: 1.0 + 1.0 / n,
            nu_p: 0.5 * softness_a.powf(-1.0 / n),
            eps: 1.0e-19,
            rho_i: 910.0,
            g: 9.81,
            h_scale: 1000.0,
            l_scale: 1.0e5,
        }
    }

    /// Glen's `n` recovered from the exponent `p`.
    pub fn glen_n(&self) -> f64 {
        1.0 / (self.p - 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p > 1.0 && self.p <= 2.0) {
            return Err(Error::InvalidArgument(format!("need 1 < p <= 2, got {}", self.p)));
        }
        if !(self.eps > 0.0 && self.nu_p > 0.0 && self.rho_i > 0.0 && self.g > 0.0) {
            return Err(Error::InvalidArgument("eps, nu_p, rho_i, g must all be positive".into()));
        }
        if !(self.h_scale >= 1.0) {
            return Err(Error::InvalidArgument(format!("[H] must be >= 1 m, got {}", self.h_scale)));
        }
        Ok(())
    }
}

/// Regularized Glen viscosity `nu_p (|Du|^2 + eps)^((p-2)/2)`.
///
/// The regularization bounds it above by `nu_p eps^((p-2)/2)`, and for
/// `p = 2` the fluid is Newtonian with constant viscosity `nu_p`.
pub fn glen_viscosity(du_norm_sq: f64, params: &PhysParams) -> f64 {
    params.nu_p * (du_norm_sq + params.eps).powf(0.5 * (params.p - 2.0))
}

/// Derivative of [`glen_viscosity`] with respect to `|Du|^2`.
pub fn glen_viscosity_deriv(du_norm_sq: f64, params: &PhysParams) -> f64 {
    params.nu_p * 0.5 * (params.p - 2.0) * (du_norm_sq + params.eps).powf(0.5 * (params.p - 4.0))
}

/// Velocity and pressure coefficients on a [`StokesSpace`].
///
/// Velocity carries `(u, w)` per Q2 node (Dirichlet nodes hold exact
/// zeros); pressure one value per Q1 node.
#[derive(Debug, Clone)]
pub struct StokesState {
    pub space: Arc<StokesSpace>,
    /// 2 entries per Q2 node: `[u_0, w_0, u_1, w_1, ...]`.
    pub vel: Vec<f64>,
    pub pressure: Vec<f64>,
}

impl StokesState {
    pub fn zeros(space: Arc<StokesSpace>) -> StokesState {
        let vel = vec![0.0; 2 * space.n_q2_nodes()];
        let pressure = vec![0.0; space.n_q1_nodes()];
        StokesState { space, vel, pressure }
    }
}

/// Surface trace `(u, w)` of the velocity at `z = s`, one entry per
/// horizontal node, extended by zero over ice-free columns.
#[derive(Debug, Clone)]
pub struct SurfaceVelocity {
    mesh: Arc<IntervalMesh>,
    pub u: Vec<f64>,
    pub w: Vec<f64>,
    pub active: Vec<bool>,
}

impl SurfaceVelocity {
    pub fn zeros(mesh: Arc<IntervalMesh>) -> SurfaceVelocity {
        let n = mesh.n_nodes();
        SurfaceVelocity { mesh, u: vec![0.0; n], w: vec![0.0; n], active: vec![false; n] }
    }

    pub fn new(mesh: Arc<IntervalMesh>, u: Vec<f64>, w: Vec<f64>, active: Vec<bool>) -> Result<SurfaceVelocity> {
        if u.len() != mesh.n_nodes() || w.len() != mesh.n_nodes() || active.len() != mesh.n_nodes() {
            return Err(Error::InvalidArgument("surface velocity length mismatch".into()));
        }
        Ok(SurfaceVelocity { mesh, u, w, active })
    }

    pub fn mesh(&self) -> &Arc<IntervalMesh> {
        &self.mesh
    }
}

/// Extracts the top-surface velocity per horizontal node; inactive
/// columns get exact zeros (extension by zero).
pub fn surface_trace(state: &StokesState) -> SurfaceVelocity {
    let space = &state.space;
    let mesh = space.mesh().base().clone();
    let n = mesh.n_nodes();
    let mut sv = SurfaceVelocity::zeros(mesh);
    for i in 0..n {
        if space.mesh().column_active()[i] {
            if let Some(id) = space.q2_id(2 * i, 2 * space.mesh().nz()) {
                sv.u[i] = state.vel[2 * id];
                sv.w[i] = state.vel[2 * id + 1];
                sv.active[i] = true;
            }
        }
    }
    sv
}

/// `integral over Omega of |u_s|^p sqrt(1 + (s')^2) dx` by per-cell Gauss
/// quadrature of the P1 trace (the surface measure is `dS = |n_s| dx`).
pub fn trace_integral(sv: &SurfaceVelocity, s: &SurfaceField, p_exp: f64) -> f64 {
    assert!(
        sv.mesh.nodes() == s.mesh().nodes(),
        "trace and surface must share a horizontal mesh"
    );
    let rule = crate::fem::quad_rule(crate::fem::QuadFamily::Interval, 15).unwrap();
    let mesh = s.mesh();
    let mut total = 0.0;
    for c in 0..mesh.n_cells() {
        let dx = mesh.dx(c);
        let slope = s.slope(c);
        let ds = (1.0 + slope * slope).sqrt();
        let (u0, u1) = (sv.u[c], sv.u[c + 1]);
        let (w0, w1) = (sv.w[c], sv.w[c + 1]);
        for (pt, wt) in rule.points.iter().zip(&rule.weights) {
            let t = pt[0];
            let u = u0 * (1.0 - t) + u1 * t;
            let w = w0 * (1.0 - t) + w1 * t;
            let speed_sq = u * u + w * w;
            total += wt * dx * ds * speed_sq.powf(0.5 * p_exp);
        }
    }
    total
}

/// The `[H]`-scaled `W^{1,p}` norm of the velocity over the ice domain:
/// `( integral |v|^p + [H]^p integral |grad v|^p )^(1/p)`.
pub fn v_norm(state: &StokesState, params: &PhysParams) -> f64 {
    let space = &state.space;
    let p = params.p;
    let hp = params.h_scale.powf(p);
    let mut vol = 0.0;
    let mut grad = 0.0;
    space.for_each_quad_point(|_, _, q2_ids, basis, gradphys, detw| {
        let mut u = 0.0;
        let mut w = 0.0;
        let mut gu = [0.0f64; 2];
        let mut gw = [0.0f64; 2];
        for a in 0..9 {
            let id = q2_ids[a];
            let cu = state.vel[2 * id];
            let cw = state.vel[2 * id + 1];
            u += basis[a] * cu;
            w += basis[a] * cw;
            gu[0] += gradphys[a][0] * cu;
            gu[1] += gradphys[a][1] * cu;
            gw[0] += gradphys[a][0] * cw;
            gw[1] += gradphys[a][1] * cw;
        }
        let speed_sq = u * u + w * w;
        let gnorm_sq = gu[0] * gu[0] + gu[1] * gu[1] + gw[0] * gw[0] + gw[1] * gw[1];
        vol += detw * speed_sq.powf(0.5 * p);
        grad += detw * gnorm_sq.powf(0.5 * p);
    });
    (vol + hp * grad).powf(1.0 / p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{extrude, IntervalMesh, SurfaceField};
    use approx::assert_relative_eq;

    #[test]
    fn glen_viscosity_newtonian_case() {
        let mut params = PhysParams::default();
        params.p = 2.0;
        params.nu_p = 12.5;
        for du2 in [0.0, 1e-18, 1e-6, 3.0] {
            assert_relative_eq!(glen_viscosity(du2, &params), 12.5, max_relative = 1e-15);
        }
    }

    #[test]
    fn glen_viscosity_zero_strain_upper_bound() {
        let params = PhysParams::default();
        let cap = params.nu_p * params.eps.powf(0.5 * (params.p - 2.0));
        assert_relative_eq!(glen_viscosity(0.0, &params), cap, max_relative = 1e-15);
    }

    #[test]
    fn glen_viscosity_scalar_arithmetic_oracle() {
        // p = 4/3, eps = 1e-19, |Du|^2 = 1e-16: nu = nu_p * (1.001e-16)^(-1/3).
        let params = PhysParams::default();
        assert_relative_eq!(params.p, 4.0 / 3.0, max_relative = 1e-15);
        let v = glen_viscosity(1.0e-16, &params);
        let oracle = params.nu_p * (1.001e-16_f64).powf(-1.0 / 3.0);
        assert_relative_eq!(v, oracle, max_relative = 1e-12);
    }

    #[test]
    fn glen_viscosity_bounded_and_monotone() {
        let params = PhysParams::default();
        let cap = params.nu_p * params.eps.powf(0.5 * (params.p - 2.0));
        let mut prev = f64::INFINITY;
        for k in 0..40 {
            let du2 = 1e-24 * 10.0_f64.powi(k / 2);
            let v = glen_viscosity(du2, &params);
            assert!(v > 0.0 && v.is_finite());
            assert!(v <= cap * (1.0 + 1e-15));
            assert!(v <= prev);
            prev = v;
        }
    }

    #[test]
    fn trace_integral_examples() {
        let mesh = IntervalMesh::build_interval(100.0, 5).unwrap();
        let s_flat = SurfaceField::constant(mesh.clone(), 10.0);
        // Zero trace integrates to zero.
        let sv0 = SurfaceVelocity::zeros(mesh.clone());
        assert_eq!(trace_integral(&sv0, &s_flat, 4.0 / 3.0), 0.0);
        // Constant speed c on a flat surface over |Omega| = 2L: c^p * 2L.
        let c = 3.0e-6;
        let n = mesh.n_nodes();
        let sv = SurfaceVelocity::new(mesh.clone(), vec![c; n], vec![0.0; n], vec![true; n]).unwrap();
        let p = 4.0 / 3.0;
        assert_relative_eq!(trace_integral(&sv, &s_flat, p), c.powf(p) * 200.0, max_relative = 1e-12);
    }

    #[test]
    fn trace_integral_matches_cellwise_gauss_oracle() {
        // Independent oracle: dense Gauss per cell on 3 cells.
        let mesh = IntervalMesh::build_interval(1.5, 3).unwrap();
        let s = SurfaceField::from_fn(mesh.clone(), |x| 0.3 * x + 2.0);
        let u = vec![0.5, -1.0, 2.0, 0.25];
        let w = vec![1.0, 0.5, -0.5, 2.0];
        let sv = SurfaceVelocity::new(mesh.clone(), u.clone(), w.clone(), vec![true; 4]).unwrap();
        let p = 1.7;
        let (gx, gw) = crate::fem::gauss_legendre_unit(8);
        let mut oracle = 0.0;
        for c in 0..3 {
            let dx = mesh.dx(c);
            let slope = s.slope(c);
            for (t, wt) in gx.iter().zip(&gw) {
                let uu = u[c] * (1.0 - t) + u[c + 1] * t;
                let ww = w[c] * (1.0 - t) + w[c + 1] * t;
                oracle += wt * dx * (1.0 + slope * slope).sqrt() * (uu * uu + ww * ww).powf(0.5 * p);
            }
        }
        assert_relative_eq!(trace_integral(&sv, &s, p), oracle, max_relative = 1e-12);
    }

    #[test]
    fn v_norm_constant_and_linear_shear() {
        // Unit-area slab: [0,1] x [0,1] built as [-0.5, 0.5] horizontally.
        let mesh = IntervalMesh::build_interval(0.5, 4).unwrap();
        let b = SurfaceField::constant(mesh.clone(), 0.0);
        let s = SurfaceField::constant(mesh.clone(), 1.0);
        let ex = extrude(&b, &s, 4, 1e-3).unwrap();
        let space = Arc::new(StokesSpace::build(ex).unwrap());
        let mut params = PhysParams::default();
        params.p = 2.0;
        params.h_scale = 1.0;

        // zero state
        let st = StokesState::zeros(space.clone());
        assert_eq!(v_norm(&st, &params), 0.0);

        // constant velocity c: norm = |c| (gradient term vanishes)
        let mut st = StokesState::zeros(space.clone());
        let c = -2.5;
        for id in 0..space.n_q2_nodes() {
            st.vel[2 * id] = c;
        }
        assert_relative_eq!(v_norm(&st, &params), c.abs(), max_relative = 1e-12);

        // linear shear u = (z, 0): (int z^2 + int 1)^(1/2) = (1/3 + 1)^(1/2)
        let mut st = StokesState::zeros(space.clone());
        for id in 0..space.n_q2_nodes() {
            let (_, z) = space.q2_coords(id);
            st.vel[2 * id] = z;
        }
        assert_relative_eq!(v_norm(&st, &params), (1.0f64 / 3.0 + 1.0).sqrt(), max_relative = 1e-12);
    }
}
