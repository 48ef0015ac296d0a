//! Assembly of the Glen-law Stokes residual and Newton Jacobian.
//!
//! The weak-form residual tested against `(v, q)` is
//!
//! ```text
//! F(u, p)[v, q] = int 2 nu(Du) Du : Dv - p div v - (div u) q - rho_i g . v
//! ```
//!
//! over active cells, with the optional FSSA surface term. All entries are
//! in the free-dof numbering of the [`StokesSpace`]; Dirichlet velocity
//! nodes hold exact zeros and never appear.

use std::sync::Arc;

use crate::fem::{gauss_legendre_unit, lag2, SparseSystem};
use crate::mesh::SurfaceField;

use super::space::{Cell, StokesSpace};
use super::{glen_viscosity, glen_viscosity_deriv, PhysParams, StokesState};

/// Free-surface stabilization: augments the gravity load with the weight of
/// the layer `theta * dt * (u . n_s + a)` that one step of the surface
/// kinematical equation would add.
#[derive(Debug, Clone)]
pub struct Fssa {
    pub theta: f64,
    /// Time step the stabilization anticipates, s.
    pub dt: f64,
    /// Surface mass balance on the horizontal mesh, m/s.
    pub smb: SurfaceField,
}

/// Body force per unit volume. `Gravity` is `(0, -rho_i g)`; `Custom`
/// supports manufactured-solution verification.
#[derive(Clone)]
pub enum BodyForce {
    Gravity,
    Custom(Arc<dyn Fn(f64, f64) -> [f64; 2] + Send + Sync>),
}

impl std::fmt::Debug for BodyForce {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BodyForce::Gravity => write!(f, "Gravity"),
            BodyForce::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

/// `|Du|^2 = u_x^2 + w_z^2 + (u_z + w_x)^2 / 2` (Frobenius norm squared).
#[inline]
fn strain_invariant(gu: [f64; 2], gw: [f64; 2]) -> f64 {
    let shear = gu[1] + gw[0];
    gu[0] * gu[0] + gw[1] * gw[1] + 0.5 * shear * shear
}

/// `Du : D(psi)` for a scalar basis gradient `g` acting in component `c`.
#[inline]
fn du_colon_dpsi(gu: [f64; 2], gw: [f64; 2], g: [f64; 2], c: usize) -> f64 {
    let shear = gu[1] + gw[0];
    if c == 0 {
        gu[0] * g[0] + 0.5 * shear * g[1]
    } else {
        gw[1] * g[1] + 0.5 * shear * g[0]
    }
}

/// `D(psi_i) : D(psi_j)` for basis gradients `gi`, `gj` in components
/// `ci`, `cj`.
#[inline]
fn dpsi_colon_dpsi(gi: [f64; 2], ci: usize, gj: [f64; 2], cj: usize) -> f64 {
    match (ci, cj) {
        (0, 0) => gi[0] * gj[0] + 0.5 * gi[1] * gj[1],
        (1, 1) => gi[1] * gj[1] + 0.5 * gi[0] * gj[0],
        (0, 1) => 0.5 * gi[1] * gj[0],
        _ => 0.5 * gi[0] * gj[1],
    }
}

struct CellEval {
    grads: [[f64; 2]; 9],
    detw: f64,
    x: f64,
    z: f64,
}

#[inline]
fn eval_cell_qp(space: &StokesSpace, cell: &Cell, qi: usize) -> CellEval {
    let pt = space.qp.points[qi];
    let (z_xi, z_eta) = StokesSpace::z_derivs(cell, pt[0], pt[1]);
    let det = cell.dx * z_eta;
    let rg = &space.qp.q2_ref_grad[qi];
    let mut grads = [[0.0f64; 2]; 9];
    for a in 0..9 {
        grads[a][0] = (z_eta * rg[a][0] - z_xi * rg[a][1]) / det;
        grads[a][1] = rg[a][1] / z_eta;
    }
    let [z00, z01, z10, z11] = cell.corners;
    let (xi, eta) = (pt[0], pt[1]);
    let z = (1.0 - xi) * ((1.0 - eta) * z00 + eta * z01) + xi * ((1.0 - eta) * z10 + eta * z11);
    let x0 = space.mesh().base().nodes()[cell.hx];
    CellEval { grads, detw: det * space.qp.weights[qi], x: x0 + xi * cell.dx, z }
}

/// Assembles the residual in the free-dof numbering. Returns an empty
/// vector when the mesh carries no ice.
pub fn assemble_residual(
    state: &StokesState,
    params: &PhysParams,
    fssa: Option<&Fssa>,
    body: &BodyForce,
) -> Vec<f64> {
    let space = &state.space;
    let mut r = vec![0.0; space.n_dofs()];
    for cell in space.cells() {
        let mut vel = [0.0f64; 18];
        let mut pre = [0.0f64; 4];
        for a in 0..9 {
            vel[2 * a] = state.vel[2 * cell.q2[a]];
            vel[2 * a + 1] = state.vel[2 * cell.q2[a] + 1];
        }
        for b in 0..4 {
            pre[b] = state.pressure[cell.q1[b]];
        }
        for qi in 0..space.qp.weights.len() {
            let ev = eval_cell_qp(space, cell, qi);
            let basis = &space.qp.q2_val[qi];
            let q1b = &space.qp.q1_val[qi];
            let mut gu = [0.0f64; 2];
            let mut gw = [0.0f64; 2];
            for a in 0..9 {
                gu[0] += ev.grads[a][0] * vel[2 * a];
                gu[1] += ev.grads[a][1] * vel[2 * a];
                gw[0] += ev.grads[a][0] * vel[2 * a + 1];
                gw[1] += ev.grads[a][1] * vel[2 * a + 1];
            }
            let p_val: f64 = (0..4).map(|b| q1b[b] * pre[b]).sum();
            let (du2, _, _) = strain_invariant(gu, gw);
            let nu = glen_viscosity(du2, params);
            let force = match body {
                BodyForce::Gravity => [0.0, -params.rho_i * params.g],
                BodyForce::Custom(f) => f(ev.x, ev.z),
            };
            let div_u = gu[0] + gw[1];
            for a in 0..9 {
                let g = ev.grads[a][0..2].try_into().unwrap();
                for c in 0..2 {
                    if let Some(dof) = space.vel_dof(cell.q2[a], c) {
                        let dcd = du_colon_dpsi(gu, gw, g, c);
                        let div_psi = if c == 0 { ev.grads[a][0] } else { ev.grads[a][1] };
                        r[dof] += ev.detw
                            * (2.0 * nu * dcd - p_val * div_psi - force[c] * basis[a]);
                    }
                }
            }
            for b in 0..4 {
                r[space.pressure_dof(cell.q1[b])] -= ev.detw * div_u * q1b[b];
            }
        }
        if let Some(fssa) = fssa {
            if cell.layer + 1 == space.mesh().nz() {
                fssa_residual_cell(space, cell, state, params, fssa, &mut r);
            }
        }
    }
    r
}

fn surface_quantities(cell: &Cell) -> f64 {
    // Surface slope of the top edge: the mesh top is the P1 surface.
    let [_, z01, _, z11] = cell.corners;
    (z11 - z01) / cell.dx
}

fn fssa_residual_cell(
    space: &StokesSpace,
    cell: &Cell,
    state: &StokesState,
    params: &PhysParams,
    fssa: &Fssa,
    r: &mut [f64],
) {
    let (gx, gw) = gauss_legendre_unit(4);
    let s_x = surface_quantities(cell);
    let coeff = fssa.theta * fssa.dt * params.rho_i * params.g;
    let a_l = fssa.smb.values()[cell.hx];
    let a_r = fssa.smb.values()[cell.hx + 1];
    // Top-edge Q2 nodes are local (a, 2).
    for (xi, wq) in gx.iter().zip(&gw) {
        let l2 = lag2(*xi);
        let mut us = 0.0;
        let mut ws = 0.0;
        for a in 0..3 {
            us += l2[a] * state.vel[2 * cell.q2[3 * a + 2]];
            ws += l2[a] * state.vel[2 * cell.q2[3 * a + 2] + 1];
        }
        let smb = (1.0 - xi) * a_l + xi * a_r;
        let un = -us * s_x + ws;
        for a in 0..3 {
            if let Some(dof) = space.vel_dof(cell.q2[3 * a + 2], 1) {
                r[dof] += coeff * wq * cell.dx * l2[a] * (un + smb);
            }
        }
    }
}

/// Assembles the Newton Jacobian (matrix only, in free-dof numbering).
pub fn assemble_jacobian(
    state: &StokesState,
    params: &PhysParams,
    fssa: Option<&Fssa>,
) -> SparseSystem {
    let space = &state.space;
    let mut sys = SparseSystem::new(space.n_dofs());
    // One dense element block, scattered at the end of each cell.
    for cell in space.cells() {
        let mut vel = [0.0f64; 18];
        for a in 0..9 {
            vel[2 * a] = state.vel[2 * cell.q2[a]];
            vel[2 * a + 1] = state.vel[2 * cell.q2[a] + 1];
        }
        let mut ke = [[0.0f64; 22]; 22]; // 18 velocity + 4 pressure
        for qi in 0..space.qp.weights.len() {
            let ev = eval_cell_qp(space, cell, qi);
            let q1b = &space.qp.q1_val[qi];
            let mut gu = [0.0f64; 2];
            let mut gw = [0.0f64; 2];
            for a in 0..9 {
                gu[0] += ev.grads[a][0] * vel[2 * a];
                gu[1] += ev.grads[a][1] * vel[2 * a];
                gw[0] += ev.grads[a][0] * vel[2 * a + 1];
                gw[1] += ev.grads[a][1] * vel[2 * a + 1];
            }
            let (du2, _, _) = strain_invariant(gu, gw);
            let nu = glen_viscosity(du2, params);
            let dnu = glen_viscosity_deriv(du2, params);
            // Per-dof pieces.
            let mut e = [0.0f64; 18];
            let mut div = [0.0f64; 18];
            for a in 0..9 {
                let g = ev.grads[a];
                for c in 0..2 {
                    let j = 2 * a + c;
                    e[j] = du_colon_dpsi(gu, gw, g, c);
                    div[j] = if c == 0 { g[0] } else { g[1] };
                }
            }
            for i in 0..18 {
                let (ai, ci) = (i / 2, i % 2);
                let gi = ev.grads[ai];
                for j in 0..18 {
                    let (aj, cj) = (j / 2, j % 2);
                    let gj = ev.grads[aj];
                    ke[i][j] += ev.detw
                        * (2.0 * nu * dpsi_colon_dpsi(gi, ci, gj, cj) + 4.0 * dnu * e[i] * e[j]);
                }
                for b in 0..4 {
                    let v = -ev.detw * div[i] * q1b[b];
                    ke[i][18 + b] += v;
                    ke[18 + b][i] += v;
                }
            }
        }
        if let Some(fssa) = fssa {
            if cell.layer + 1 == space.mesh().nz() {
                let (gx, gwq) = gauss_legendre_unit(4);
                let s_x = surface_quantities(cell);
                let coeff = fssa.theta * fssa.dt * params.rho_i * params.g;
                for (xi, wq) in gx.iter().zip(&gwq) {
                    let l2 = lag2(*xi);
                    for a in 0..3 {
                        let i = 2 * (3 * a + 2) + 1; // z-component test on the top edge
                        for b in 0..3 {
                            // u . n_s is linear in u: (-s_x, 1) components.
                            let ju = 2 * (3 * b + 2);
                            ke[i][ju] += coeff * wq * cell.dx * l2[a] * (-s_x * l2[b]);
                            ke[i][ju + 1] += coeff * wq * cell.dx * l2[a] * l2[b];
                        }
                    }
                }
            }
        }
        // Scatter.
        let mut gdof = [None; 22];
        for a in 0..9 {
            for c in 0..2 {
                gdof[2 * a + c] = space.vel_dof(cell.q2[a], c);
            }
        }
        for b in 0..4 {
            gdof[18 + b] = Some(space.pressure_dof(cell.q1[b]));
        }
        for i in 0..22 {
            if let Some(gi) = gdof[i] {
                for j in 0..22 {
                    if let Some(gj) = gdof[j] {
                        if ke[i][j] != 0.0 {
                            sys.add(gi, gj, ke[i][j]);
                        }
                    }
                }
            }
        }
    }
    sys
}

/// Both sides of the dissipation identity at a state:
/// `(int 2 nu(Du) Du : Du, int rho_i g . u)`. At a converged plain-Stokes
/// solution the two agree.
pub fn dissipation_parts(state: &StokesState, params: &PhysParams) -> (f64, f64) {
    let space = &state.space;
    let mut diss = 0.0;
    let mut work = 0.0;
    space.for_each_quad_point(|_, _, ids, basis, grads, detw| {
        let mut gu = [0.0f64; 2];
        let mut gw = [0.0f64; 2];
        let mut wvel = 0.0;
        for a in 0..9 {
            let cu = state.vel[2 * ids[a]];
            let cw = state.vel[2 * ids[a] + 1];
            gu[0] += grads[a][0] * cu;
            gu[1] += grads[a][1] * cu;
            gw[0] += grads[a][0] * cw;
            gw[1] += grads[a][1] * cw;
            wvel += basis[a] * cw;
        }
        let (du2, _, _) = strain_invariant(gu, gw);
        let nu = glen_viscosity(du2, params);
        diss += detw * 2.0 * nu * du2;
        work += detw * (-params.rho_i * params.g) * wvel;
    });
    (diss, work)
}
