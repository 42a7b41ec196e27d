//! The positive ground state of the scalar equation
//! `-u'' - u = -u^3` with Dirichlet boundary, and its nondegeneracy margin.
//!
//! A positive solution exists when the principal Dirichlet eigenvalue of
//! -Laplace is below 1. Newton iteration starts on the principal-eigenfunction
//! ray at the closed-form energy minimizer and is damped back into the
//! positive cone when a full step overshoots.

use crate::error::{Error, Result};
use crate::linalg::{BandMatrix, GeneralizedTridiag};
use crate::mesh::{assemble, principal_eigenpair, Descriptor, Mesh, Operator};

/// Converged positive solution with its certificates.
#[derive(Debug, Clone)]
pub struct GroundState {
    /// Node values of the solution; 0 < omega <= 1 everywhere.
    pub omega: Vec<f64>,
    /// Weighted L2 norm of the strong-form residual.
    pub residual_norm: f64,
    /// Smallest |eigenvalue| of the linearization `-Lap - 1 + 3 omega^2`.
    pub nondegeneracy_margin: f64,
    /// Principal Dirichlet eigenvalue of the mesh.
    pub lambda1: f64,
}

/// Strong-form residual of `-Lap u - u + u^3` at the nodes.
fn strong_residual(stiffness: &Operator, mesh: &Mesh, u: &[f64]) -> Vec<f64> {
    let su = stiffness.apply(u);
    su.iter()
        .zip(mesh.weights.iter().zip(u))
        .map(|(s, (w, ui))| s / w - ui + ui * ui * ui)
        .collect()
}

fn residual_norm(mesh: &Mesh, r: &[f64]) -> f64 {
    mesh.inner(r, r).sqrt()
}

/// Solve for the positive ground state on `mesh` to residual norm `tol`.
///
/// `tol` must be compatible with the mesh: the strong-form residual carries
/// a rounding floor that scales like machine epsilon / h^2.
pub fn solve_omega(mesh: &Mesh, tol: f64) -> Result<GroundState> {
    let stiffness = assemble(mesh, Descriptor::Stiffness);
    let mass = assemble(mesh, Descriptor::Mass);
    let (lambda1, phi1) = principal_eigenpair(&stiffness, &mass)?;
    if lambda1 >= 1.0 {
        return Err(Error::NoPositiveSolution { lambda1 });
    }

    // Energy along the phi1 ray: E(c) = c^2 (Lambda_1 - 1)/2 + c^4 q/4 with
    // q = int phi1^4; the minimizer c = sqrt((1 - Lambda_1)/q) lands in the
    // basin of the positive solution on short domains. On long domains the
    // solution is a plateau with boundary layers, for which the product of
    // tanh(d/sqrt(2)) fronts (d = distance to the boundary) is the right
    // seed; try the ray first, the front profile second.
    let phi4: Vec<f64> = phi1.iter().map(|p| p.powi(4)).collect();
    let q = mesh.integrate(&phi4);
    let c = ((1.0 - lambda1) / q).sqrt();
    let ray_seed: Vec<f64> = phi1.iter().map(|p| c * p).collect();
    let front_seed: Vec<f64> = match mesh.domain {
        crate::mesh::DomainSpec::Interval { length } => mesh
            .nodes
            .iter()
            .map(|&x| ((x / 2f64.sqrt()).tanh() * (((length - x) / 2f64.sqrt()).tanh())).max(1e-12))
            .collect(),
        crate::mesh::DomainSpec::Ball { radius, .. } => mesh
            .nodes
            .iter()
            .map(|&r| (((radius - r) / 2f64.sqrt()).tanh()).max(1e-12))
            .collect(),
    };

    let mut result = newton_positive(mesh, &stiffness, ray_seed, tol);
    if result.is_err() {
        result = newton_positive(mesh, &stiffness, front_seed, tol);
    }
    let (u, rnorm) = result?;
    let margin = linearization_margin(mesh, &stiffness, &mass, &u)?;
    Ok(GroundState {
        omega: u,
        residual_norm: rnorm,
        nondegeneracy_margin: margin,
        lambda1,
    })
}

/// Damped Newton iteration kept inside the positive cone.
fn newton_positive(
    mesh: &Mesh,
    stiffness: &Operator,
    mut u: Vec<f64>,
    tol: f64,
) -> Result<(Vec<f64>, f64)> {
    let m = mesh.len();
    let mut res = strong_residual(stiffness, mesh, &u);
    let mut rnorm = residual_norm(mesh, &res);
    for _ in 0..80 {
        if rnorm <= tol {
            break;
        }
        // Galerkin Newton system: (S - M + 3 diag(w u^2)) delta = -(S u - M u + W u^3)
        let mut jac = BandMatrix::zeros(m, 1, 1);
        for (i, ((sd, w), ui)) in stiffness
            .diag()
            .iter()
            .zip(&mesh.weights)
            .zip(&u)
            .enumerate()
        {
            jac.set(i, i, sd + w * (3.0 * ui * ui - 1.0));
            if i + 1 < m {
                jac.set(i, i + 1, stiffness.off()[i]);
                jac.set(i + 1, i, stiffness.off()[i]);
            }
        }
        let lu = jac.factor()?;
        let mut delta: Vec<f64> = res.iter().zip(&mesh.weights).map(|(r, w)| -r * w).collect();
        lu.solve(&mut delta);

        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..=30 {
            let trial: Vec<f64> = u.iter().zip(&delta).map(|(ui, d)| ui + step * d).collect();
            let trial_res = strong_residual(stiffness, mesh, &trial);
            let trial_norm = residual_norm(mesh, &trial_res);
            let positive = trial.iter().all(|&v| v > 0.0);
            if positive && (trial_norm < rnorm || trial_norm <= tol) {
                u = trial;
                res = trial_res;
                rnorm = trial_norm;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            return Err(Error::SolverFailure(
                "Newton stalled outside the positive cone".into(),
            ));
        }
    }
    if rnorm > tol {
        return Err(Error::SolverFailure(format!(
            "Newton did not reach tolerance: residual {rnorm:e} > {tol:e}"
        )));
    }
    if u.iter().any(|&v| v <= 0.0) {
        return Err(Error::SolverFailure(
            "converged solution changes sign".into(),
        ));
    }
    Ok((u, rnorm))
}

/// Smallest |eigenvalue| of `(-Lap - 1 + 3 omega^2) v = nu v` in the
/// mass-weighted sense; a positive value certifies nondegeneracy on this mesh.
pub fn nondegeneracy_check(state: &GroundState, mesh: &Mesh) -> Result<f64> {
    let stiffness = assemble(mesh, Descriptor::Stiffness);
    let mass = assemble(mesh, Descriptor::Mass);
    linearization_margin(mesh, &stiffness, &mass, &state.omega)
}

fn linearization_margin(
    mesh: &Mesh,
    stiffness: &Operator,
    mass: &Operator,
    omega: &[f64],
) -> Result<f64> {
    let m = mesh.len();
    let mut a = stiffness.tridiag().clone();
    for ((d, w), om) in a.diag.iter_mut().zip(&mesh.weights).zip(omega) {
        *d += w * (3.0 * om * om - 1.0);
    }
    let pencil = GeneralizedTridiag::new(&a, mass.diag())?;
    let below = pencil.count_below(0.0);
    let margin = if below == 0 {
        pencil.eigenvalue(1)
    } else if below >= m {
        -pencil.eigenvalue(m)
    } else {
        let neg = pencil.eigenvalue(below);
        let pos = pencil.eigenvalue(below + 1);
        neg.abs().min(pos.abs())
    };
    Ok(margin)
}
