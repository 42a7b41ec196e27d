//! Pseudo-arclength continuation of bipartition-synchronized branches.
//!
//! The two-block reduction of the full system is discretized on the mesh and
//! traced in (v_A, v_B, beta) by a tangent predictor with an orthogonal
//! Newton corrector on the bordered system {residual = 0, arclength
//! constraint}. Branch switching off the synchronized branch pins the
//! amplitude along the kernel direction psi_k (x) (alpha_B, -alpha_A).
//!
//! The state is stored interleaved (v_A and v_B alternating per node), which
//! keeps the Jacobian banded with two off-diagonals on each side; the
//! bordered systems are solved by block elimination with a dense fallback
//! near singular Jacobians (folds, the bifurcation point itself).

use crate::bifurcation::BifurcationPoint;
use crate::coupling::{g, CouplingConfig};
use crate::error::{Error, Result};
use crate::ground_state::GroundState;
use crate::linalg::BandMatrix;
use crate::mesh::{assemble, Descriptor, Mesh, Operator};
use crate::partition::{reduce, Partition};
use crate::spectrum::WeightedSpectrum;
use nalgebra::{DMatrix, DVector};

/// Step-size and tolerance knobs for one branch trace.
#[derive(Debug, Clone)]
pub struct ContinuationSettings {
    /// Initial arclength step.
    pub ds: f64,
    pub ds_min: f64,
    pub ds_max: f64,
    /// Weighted L2 residual bound every accepted point must satisfy.
    pub corrector_tol: f64,
    pub max_steps: usize,
    pub max_corrector_iters: usize,
    /// Initial transverse amplitude s of the branch-switch kick.
    pub kick_amplitude: f64,
    /// Beta window; defaults to (-inf, mu_1) with a pole standoff.
    pub beta_window: Option<(f64, f64)>,
    /// Stop at the first point with a nonpositive component. Off by
    /// default: the relaxed system drops the sign condition and flagged
    /// points are still valid solutions of it.
    pub stop_on_positivity_loss: bool,
    /// Stop after passing this many folds.
    pub max_folds: Option<usize>,
}

impl Default for ContinuationSettings {
    fn default() -> Self {
        ContinuationSettings {
            ds: 1e-2,
            ds_min: 1e-6,
            ds_max: 1e-1,
            corrector_tol: 1e-9,
            max_steps: 500,
            max_corrector_iters: 8,
            kick_amplitude: 1e-3,
            beta_window: None,
            stop_on_positivity_loss: false,
            max_folds: None,
        }
    }
}

impl ContinuationSettings {
    /// Scale the kick to 1e-3 x the sup norm of the ground state.
    pub fn with_kick_for(mut self, state: &GroundState) -> Self {
        let sup = state.omega.iter().cloned().fold(0.0f64, f64::max);
        self.kick_amplitude = 1e-3 * sup;
        self
    }
}

/// Why a branch trace stopped.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Termination {
    MaxSteps,
    PositivityLost,
    LeftWindow,
    /// Stopped after passing this many folds.
    Fold(usize),
    CorrectorFailure,
}

/// One accepted point on a bipartition branch.
#[derive(Debug, Clone)]
pub struct BranchStep {
    pub beta: f64,
    pub v_a: Vec<f64>,
    pub v_b: Vec<f64>,
    pub residual_norm: f64,
    /// Minimum node value of (v_A, v_B).
    pub min_component_values: (f64, f64),
}

/// A continued branch of bipartition-synchronized solutions.
#[derive(Debug, Clone)]
pub struct BranchSegment {
    pub points: Vec<BranchStep>,
    pub origin: BifurcationPoint,
    pub partition: Partition,
    pub termination: Termination,
    pub folds_passed: usize,
}

/// The discretized two-block system for one bipartition.
pub struct BipartitionSystem<'a> {
    mesh: &'a Mesh,
    config: &'a CouplingConfig,
    partition: Partition,
    stiffness: Operator,
    m: usize,
}

impl<'a> BipartitionSystem<'a> {
    pub fn new(mesh: &'a Mesh, config: &'a CouplingConfig, partition: Partition) -> Result<Self> {
        if partition.len() != 2 {
            return Err(Error::InvalidPartition(format!(
                "continuation needs a bipartition, got {} blocks",
                partition.len()
            )));
        }
        if partition.n() != config.n() {
            return Err(Error::InvalidPartition(
                "partition and coupling sizes differ".into(),
            ));
        }
        let stiffness = assemble(mesh, Descriptor::Stiffness);
        Ok(BipartitionSystem {
            mesh,
            config,
            partition,
            stiffness,
            m: mesh.len(),
        })
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn mesh(&self) -> &Mesh {
        self.mesh
    }

    fn mu_eff(&self, beta: f64) -> Result<(f64, f64)> {
        let red = reduce(self.config, &self.partition, beta)?;
        Ok((red.mu_eff[0], red.mu_eff[1]))
    }

    /// Galerkin residual on the interleaved state.
    fn residual(&self, z: &[f64], beta: f64) -> Result<Vec<f64>> {
        let (mu_a, mu_b) = self.mu_eff(beta)?;
        let m = self.m;
        let mut out = vec![0.0; 2 * m];
        let sd = self.stiffness.diag();
        let so = self.stiffness.off();
        let w = &self.mesh.weights;
        for i in 0..m {
            let (va, vb) = (z[2 * i], z[2 * i + 1]);
            let mut sa = sd[i] * va;
            let mut sb = sd[i] * vb;
            if i > 0 {
                sa += so[i - 1] * z[2 * (i - 1)];
                sb += so[i - 1] * z[2 * (i - 1) + 1];
            }
            if i + 1 < m {
                sa += so[i] * z[2 * (i + 1)];
                sb += so[i] * z[2 * (i + 1) + 1];
            }
            out[2 * i] = sa - w[i] * (va + mu_a * va.powi(3) + beta * vb * vb * va);
            out[2 * i + 1] = sb - w[i] * (vb + mu_b * vb.powi(3) + beta * va * va * vb);
        }
        Ok(out)
    }

    /// Weighted L2 norm of the strong-form residual.
    fn residual_norm(&self, galerkin: &[f64]) -> f64 {
        let mut s = 0.0;
        for i in 0..self.m {
            let w = self.mesh.weights[i];
            s += (galerkin[2 * i] / w).powi(2) * w;
            s += (galerkin[2 * i + 1] / w).powi(2) * w;
        }
        s.sqrt()
    }

    /// Banded Jacobian of the Galerkin residual at fixed beta.
    fn jacobian(&self, z: &[f64], beta: f64) -> Result<BandMatrix> {
        let (mu_a, mu_b) = self.mu_eff(beta)?;
        let m = self.m;
        let mut jac = BandMatrix::zeros(2 * m, 2, 2);
        let sd = self.stiffness.diag();
        let so = self.stiffness.off();
        let w = &self.mesh.weights;
        for i in 0..m {
            let (va, vb) = (z[2 * i], z[2 * i + 1]);
            let (ra, rb) = (2 * i, 2 * i + 1);
            jac.set(
                ra,
                ra,
                sd[i] - w[i] * (1.0 + 3.0 * mu_a * va * va + beta * vb * vb),
            );
            jac.set(
                rb,
                rb,
                sd[i] - w[i] * (1.0 + 3.0 * mu_b * vb * vb + beta * va * va),
            );
            jac.set(ra, rb, -w[i] * 2.0 * beta * va * vb);
            jac.set(rb, ra, -w[i] * 2.0 * beta * va * vb);
            if i + 1 < m {
                jac.set(ra, ra + 2, so[i]);
                jac.set(ra + 2, ra, so[i]);
                jac.set(rb, rb + 2, so[i]);
                jac.set(rb + 2, rb, so[i]);
            }
        }
        Ok(jac)
    }

    /// Exact Jacobian action, used for bordered-solve residual checks.
    fn apply_jacobian(&self, z: &[f64], beta: f64, d: &[f64]) -> Result<Vec<f64>> {
        let (mu_a, mu_b) = self.mu_eff(beta)?;
        let m = self.m;
        let sd = self.stiffness.diag();
        let so = self.stiffness.off();
        let w = &self.mesh.weights;
        let mut out = vec![0.0; 2 * m];
        for i in 0..m {
            let (va, vb) = (z[2 * i], z[2 * i + 1]);
            let (da, db) = (d[2 * i], d[2 * i + 1]);
            let mut sa = sd[i] * da;
            let mut sb = sd[i] * db;
            if i > 0 {
                sa += so[i - 1] * d[2 * (i - 1)];
                sb += so[i - 1] * d[2 * (i - 1) + 1];
            }
            if i + 1 < m {
                sa += so[i] * d[2 * (i + 1)];
                sb += so[i] * d[2 * (i + 1) + 1];
            }
            out[2 * i] = sa
                - w[i]
                    * ((1.0 + 3.0 * mu_a * va * va + beta * vb * vb) * da
                        + 2.0 * beta * va * vb * db);
            out[2 * i + 1] = sb
                - w[i]
                    * ((1.0 + 3.0 * mu_b * vb * vb + beta * va * va) * db
                        + 2.0 * beta * va * vb * da);
        }
        Ok(out)
    }

    /// dG/dbeta by central differences; the beta-dependence of the effective
    /// couplings is handled numerically.
    fn residual_beta(&self, z: &[f64], beta: f64) -> Result<Vec<f64>> {
        let h = 1e-7 * (1.0 + beta.abs());
        let plus = self.residual(z, beta + h)?;
        let minus = self.residual(z, beta - h)?;
        Ok(plus
            .iter()
            .zip(&minus)
            .map(|(p, q)| (p - q) / (2.0 * h))
            .collect())
    }

    /// Arclength metric: mass-weighted on the state, unit weight on beta.
    fn metric_dot(&self, dz: &[f64], dbeta: f64, ez: &[f64], ebeta: f64) -> f64 {
        let mut s = dbeta * ebeta;
        for i in 0..self.m {
            let w = self.mesh.weights[i];
            s += w * (dz[2 * i] * ez[2 * i] + dz[2 * i + 1] * ez[2 * i + 1]);
        }
        s
    }

    fn metric_norm(&self, dz: &[f64], dbeta: f64) -> f64 {
        self.metric_dot(dz, dbeta, dz, dbeta).sqrt()
    }

    /// Solve the bordered system [J, gbeta; row_z', row_beta] (dz, dbeta) =
    /// (r1, r2) where row_z acts through the arclength metric.
    fn bordered_solve(
        &self,
        z: &[f64],
        beta: f64,
        row_z: &[f64],
        row_beta: f64,
        r1: &[f64],
        r2: f64,
    ) -> Result<(Vec<f64>, f64)> {
        let gbeta = self.residual_beta(z, beta)?;
        let n2 = 2 * self.m;
        let dot_row = |v: &[f64]| self.metric_dot(row_z, 0.0, v, 0.0);
        let schur = (|| -> Result<(Vec<f64>, f64)> {
            let jac = self.jacobian(z, beta)?;
            let lu = jac.factor()?;
            if lu.min_pivot_ratio() < 1e-10 {
                return Err(Error::SolverFailure("near-singular Jacobian".into()));
            }
            let mut y1 = r1.to_vec();
            lu.solve(&mut y1);
            let mut y2 = gbeta.clone();
            lu.solve(&mut y2);
            let denom = row_beta - dot_row(&y2);
            if denom.abs() < 1e-12 * (1.0 + row_beta.abs()) {
                return Err(Error::SolverFailure("bordered Schur breakdown".into()));
            }
            let dbeta = (r2 - dot_row(&y1)) / denom;
            let dz: Vec<f64> = y1.iter().zip(&y2).map(|(a, b)| a - dbeta * b).collect();
            // consistency check of the block elimination; the scale uses the
            // pre-cancellation term magnitudes so a zero right-hand side
            // (tangent solves) does not read as lost accuracy
            let jd = self.apply_jacobian(z, beta, &dz)?;
            let mut worst = 0.0f64;
            let mut scale = 0.0f64;
            for i in 0..n2 {
                let a = jd[i];
                let b = gbeta[i] * dbeta;
                worst = worst.max((a + b - r1[i]).abs());
                scale = scale.max(a.abs()).max(b.abs()).max(r1[i].abs());
            }
            if worst > 1e-6 * (scale + 1e-300) {
                return Err(Error::SolverFailure("bordered solve lost accuracy".into()));
            }
            Ok((dz, dbeta))
        })();
        match schur {
            Ok(sol) => Ok(sol),
            Err(_) => {
                // dense fallback: stable for singular J as long as the
                // bordered matrix itself is regular
                let jac = self.jacobian(z, beta)?;
                let mut full = DMatrix::zeros(n2 + 1, n2 + 1);
                for i in 0..n2 {
                    for j in i.saturating_sub(2)..(i + 3).min(n2) {
                        full[(i, j)] = jac.get(i, j);
                    }
                    full[(i, n2)] = gbeta[i];
                }
                for j in 0..self.m {
                    let w = self.mesh.weights[j];
                    full[(n2, 2 * j)] = row_z[2 * j] * w;
                    full[(n2, 2 * j + 1)] = row_z[2 * j + 1] * w;
                }
                full[(n2, n2)] = row_beta;
                let mut rhs = DVector::zeros(n2 + 1);
                for i in 0..n2 {
                    rhs[i] = r1[i];
                }
                rhs[n2] = r2;
                let sol = full
                    .lu()
                    .solve(&rhs)
                    .ok_or_else(|| Error::SolverFailure("bordered system is singular".into()))?;
                Ok((sol.as_slice()[..n2].to_vec(), sol[n2]))
            }
        }
    }

    /// Tangent through the bordered system [J, gbeta; t_old] t = (0, 1);
    /// the solution is automatically oriented along the previous tangent.
    fn tangent(
        &self,
        z: &[f64],
        beta: f64,
        t_old_z: &[f64],
        t_old_beta: f64,
    ) -> Result<(Vec<f64>, f64)> {
        let zero = vec![0.0; 2 * self.m];
        let (mut tz, mut tb) = self.bordered_solve(z, beta, t_old_z, t_old_beta, &zero, 1.0)?;
        let norm = self.metric_norm(&tz, tb);
        if norm <= 0.0 || !norm.is_finite() {
            return Err(Error::SolverFailure("vanishing tangent".into()));
        }
        for v in tz.iter_mut() {
            *v /= norm;
        }
        tb /= norm;
        Ok((tz, tb))
    }

    fn split(&self, z: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let va = (0..self.m).map(|i| z[2 * i]).collect();
        let vb = (0..self.m).map(|i| z[2 * i + 1]).collect();
        (va, vb)
    }
}

/// Componentwise strong-form residual of the reduced two-block system.
pub fn discrete_residual(
    system: &BipartitionSystem<'_>,
    beta: f64,
    v_a: &[f64],
    v_b: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let m = system.m;
    let mut z = vec![0.0; 2 * m];
    for i in 0..m {
        z[2 * i] = v_a[i];
        z[2 * i + 1] = v_b[i];
    }
    let galerkin = system.residual(&z, beta)?;
    let w = &system.mesh.weights;
    let ra = (0..m).map(|i| galerkin[2 * i] / w[i]).collect();
    let rb = (0..m).map(|i| galerkin[2 * i + 1] / w[i]).collect();
    Ok((ra, rb))
}

/// Componentwise strong-form residual of the full n-component system at the
/// given coupling configuration.
pub fn full_system_residual(
    mesh: &Mesh,
    stiffness: &Operator,
    config: &CouplingConfig,
    beta: f64,
    u: &[Vec<f64>],
) -> Vec<Vec<f64>> {
    let n = config.n();
    assert_eq!(u.len(), n);
    let m = mesh.len();
    let sq: Vec<Vec<f64>> = u
        .iter()
        .map(|c| c.iter().map(|v| v * v).collect())
        .collect();
    (0..n)
        .map(|j| {
            let su = stiffness.apply(&u[j]);
            (0..m)
                .map(|i| {
                    let cross: f64 = (0..n).filter(|k| *k != j).map(|k| sq[k][i]).sum();
                    su[i] / mesh.weights[i]
                        - u[j][i]
                        - config.mu()[j] * u[j][i].powi(3)
                        - beta * cross * u[j][i]
                })
                .collect()
        })
        .collect()
}

/// Discrete energy of the full system:
/// J = 1/2 sum_k (|grad u_k|^2 - u_k^2) - 1/4 sum_k mu_k u_k^4
///     - beta/2 sum_{i<k} u_i^2 u_k^2, all by mesh quadrature.
pub fn energy(
    mesh: &Mesh,
    stiffness: &Operator,
    config: &CouplingConfig,
    beta: f64,
    u: &[Vec<f64>],
) -> f64 {
    let n = config.n();
    assert_eq!(u.len(), n);
    let mut total = 0.0;
    for (component, mu) in u.iter().zip(config.mu()) {
        let grad = stiffness.quadratic_form(component);
        let l2: f64 = mesh.inner(component, component);
        let quartic: Vec<f64> = component.iter().map(|v| v.powi(4)).collect();
        total += 0.5 * (grad - l2) - 0.25 * mu * mesh.integrate(&quartic);
    }
    for i in 0..n {
        for k in (i + 1)..n {
            let prod: Vec<f64> = u[i].iter().zip(&u[k]).map(|(a, b)| a * a * b * b).collect();
            total -= 0.5 * beta * mesh.integrate(&prod);
        }
    }
    total
}

/// Mass-weighted gradient of the discrete energy (the Galerkin residual of
/// the full system), for gradient-consistency checks.
pub fn energy_gradient(
    mesh: &Mesh,
    stiffness: &Operator,
    config: &CouplingConfig,
    beta: f64,
    u: &[Vec<f64>],
) -> Vec<Vec<f64>> {
    full_system_residual(mesh, stiffness, config, beta, u)
        .into_iter()
        .map(|r| r.iter().zip(&mesh.weights).map(|(x, w)| x * w).collect())
        .collect()
}

/// Predictor state produced by branch switching.
#[derive(Debug, Clone)]
pub struct BranchPredictor {
    /// Interleaved predictor state at beta_k.
    z: Vec<f64>,
    beta: f64,
    /// Synchronized point the kick starts from.
    z_sync: Vec<f64>,
    /// Kernel kick direction, sup-normalized.
    kick: Vec<f64>,
    amplitude: f64,
    origin: BifurcationPoint,
}

impl BranchPredictor {
    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// The (v_A, v_B) components of the raw predictor.
    pub fn components(&self, system: &BipartitionSystem<'_>) -> (Vec<f64>, Vec<f64>) {
        system.split(&self.z)
    }
}

/// Build the branch-switch predictor at a bifurcation point: the
/// synchronized state plus `s` times the kernel direction compatible with
/// the bipartition, i.e. psi_k (x) w with alpha_A w_A + alpha_B w_B = 0 in
/// reduced coordinates.
pub fn branch_switch(
    system: &BipartitionSystem<'_>,
    origin: &BifurcationPoint,
    state: &GroundState,
    spectrum: &WeightedSpectrum,
    settings: &ContinuationSettings,
) -> Result<BranchPredictor> {
    if origin.degenerate {
        return Err(Error::DegenerateOrigin {
            fprime: origin.f_prime_at,
        });
    }
    if origin.n_k > 1 {
        return Err(Error::MultiplicityUnsupported {
            multiplicity: origin.n_k,
        });
    }
    let beta = origin.beta_k;
    let config = system.config;
    let red = reduce(config, &system.partition, beta)?;
    let gv = g(config, beta)?;
    // reduced synchronized coefficients alpha_i = ((beta - mu_eff_i) g)^{-1/2}
    let mut alpha = [0.0f64; 2];
    for (a, mu_eff) in alpha.iter_mut().zip(&red.mu_eff) {
        let radicand = (beta - mu_eff) * gv;
        if radicand <= 0.0 {
            return Err(Error::OutsideBranchInterval { beta });
        }
        *a = radicand.powf(-0.5);
    }
    let psi = &spectrum.eigenfunctions[origin.k - 1][0];
    if psi.len() != system.m {
        return Err(Error::SolverFailure(
            "spectrum and continuation meshes differ".into(),
        ));
    }
    // kernel direction orthogonal to (alpha_A, alpha_B)
    let wnorm = (alpha[0] * alpha[0] + alpha[1] * alpha[1]).sqrt();
    let wdir = [alpha[1] / wnorm, -alpha[0] / wnorm];
    let m = system.m;
    let mut z_sync = vec![0.0; 2 * m];
    let mut kick = vec![0.0; 2 * m];
    for i in 0..m {
        z_sync[2 * i] = alpha[0] * state.omega[i];
        z_sync[2 * i + 1] = alpha[1] * state.omega[i];
        kick[2 * i] = wdir[0] * psi[i];
        kick[2 * i + 1] = wdir[1] * psi[i];
    }
    let sup = kick.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
    for v in kick.iter_mut() {
        *v /= sup;
    }
    let s = settings.kick_amplitude;
    let z = z_sync.iter().zip(&kick).map(|(a, b)| a + s * b).collect();
    Ok(BranchPredictor {
        z,
        beta,
        z_sync,
        kick,
        amplitude: s,
        origin: origin.clone(),
    })
}

fn window_for(system: &BipartitionSystem<'_>, settings: &ContinuationSettings) -> (f64, f64) {
    settings.beta_window.unwrap_or_else(|| {
        let mu1 = system.config.mu_min();
        (f64::NEG_INFINITY, mu1 - 1e-9 * (1.0 + mu1.abs()))
    })
}

/// Newton-correct with a fixed linear constraint row; used both for the
/// pinned-amplitude seed and the arclength steps.
fn correct(
    system: &BipartitionSystem<'_>,
    z: &mut [f64],
    beta: &mut f64,
    row_z: &[f64],
    row_beta: f64,
    constraint: impl Fn(&[f64], f64) -> f64,
    settings: &ContinuationSettings,
) -> Result<f64> {
    for _ in 0..settings.max_corrector_iters {
        let gal = system.residual(z, *beta)?;
        let rnorm = system.residual_norm(&gal);
        let c = constraint(z, *beta);
        if rnorm <= settings.corrector_tol && c.abs() <= settings.corrector_tol * (1.0 + beta.abs())
        {
            return Ok(rnorm);
        }
        let r1: Vec<f64> = gal.iter().map(|v| -v).collect();
        let (dz, dbeta) = system.bordered_solve(z, *beta, row_z, row_beta, &r1, -c)?;
        if !dbeta.is_finite() || dz.iter().any(|v| !v.is_finite()) {
            return Err(Error::SolverFailure("non-finite Newton step".into()));
        }
        for (zi, di) in z.iter_mut().zip(&dz) {
            *zi += di;
        }
        *beta += dbeta;
    }
    let gal = system.residual(z, *beta)?;
    let rnorm = system.residual_norm(&gal);
    if rnorm <= settings.corrector_tol {
        Ok(rnorm)
    } else {
        Err(Error::SolverFailure(format!(
            "corrector stalled at residual {rnorm:e}"
        )))
    }
}

/// Trace the branch from a corrected branch-switch predictor.
pub fn continue_branch(
    system: &BipartitionSystem<'_>,
    predictor: &BranchPredictor,
    settings: &ContinuationSettings,
) -> Result<BranchSegment> {
    let window = window_for(system, settings);
    let mut segment = BranchSegment {
        points: Vec::new(),
        origin: predictor.origin.clone(),
        partition: system.partition.clone(),
        termination: Termination::MaxSteps,
        folds_passed: 0,
    };

    // seed: pin the amplitude along the kick and solve for (z, beta)
    let mut z = predictor.z.clone();
    let mut beta = predictor.beta;
    let kick_norm2 = system.metric_dot(&predictor.kick, 0.0, &predictor.kick, 0.0);
    let target = predictor.amplitude * kick_norm2;
    let seed_res = correct(
        system,
        &mut z,
        &mut beta,
        &predictor.kick,
        0.0,
        |state, _| {
            let diff: Vec<f64> = state
                .iter()
                .zip(&predictor.z_sync)
                .map(|(a, b)| a - b)
                .collect();
            system.metric_dot(&diff, 0.0, &predictor.kick, 0.0) - target
        },
        settings,
    );
    let seed_res = match seed_res {
        Ok(r) => r,
        Err(_) => {
            segment.termination = Termination::CorrectorFailure;
            return Ok(segment);
        }
    };
    let push = |segment: &mut BranchSegment, z: &[f64], beta: f64, rnorm: f64| {
        let (va, vb) = system.split(z);
        let min_a = va.iter().cloned().fold(f64::INFINITY, f64::min);
        let min_b = vb.iter().cloned().fold(f64::INFINITY, f64::min);
        segment.points.push(BranchStep {
            beta,
            v_a: va,
            v_b: vb,
            residual_norm: rnorm,
            min_component_values: (min_a, min_b),
        });
    };
    push(&mut segment, &z, beta, seed_res);

    // first tangent: secant from the synchronized point, falling back to the
    // kick direction for a zero-amplitude seed
    let mut tz: Vec<f64> = z
        .iter()
        .zip(&predictor.z_sync)
        .map(|(a, b)| a - b)
        .collect();
    let mut tb = beta - predictor.origin.beta_k;
    if system.metric_norm(&tz, tb) < 1e-14 {
        tz = predictor.kick.clone();
        tb = 0.0;
    }
    let norm = system.metric_norm(&tz, tb);
    for v in tz.iter_mut() {
        *v /= norm;
    }
    tb /= norm;
    if let Ok((ntz, ntb)) = system.tangent(&z, beta, &tz, tb) {
        tz = ntz;
        tb = ntb;
    }

    let mut ds = settings.ds.clamp(settings.ds_min, settings.ds_max);
    let mut was_positive = {
        let p = segment.points.last().unwrap().min_component_values;
        p.0 > 0.0 && p.1 > 0.0
    };
    while segment.points.len() <= settings.max_steps {
        let beta_pred = beta + ds * tb;
        if beta_pred <= window.0 || beta_pred >= window.1 {
            segment.termination = Termination::LeftWindow;
            return Ok(segment);
        }
        let mut z_try: Vec<f64> = z.iter().zip(&tz).map(|(a, t)| a + ds * t).collect();
        let mut beta_try = beta_pred;
        let z_pred = z_try.clone();
        let corrected = correct(
            system,
            &mut z_try,
            &mut beta_try,
            &tz,
            tb,
            |state, b| {
                let diff: Vec<f64> = state.iter().zip(&z_pred).map(|(a, p)| a - p).collect();
                system.metric_dot(&diff, b - beta_pred, &tz, tb)
            },
            settings,
        );
        match corrected {
            Ok(rnorm) => {
                let dz: Vec<f64> = z_try.iter().zip(&z).map(|(a, b)| a - b).collect();
                let dist = system.metric_norm(&dz, beta_try - beta);
                if dist > settings.ds_max {
                    // the corrector jumped farther than the arclength bound
                    // allows; retry shorter, give up at the minimum step
                    if ds <= settings.ds_min * (1.0 + 1e-12) {
                        segment.termination = Termination::CorrectorFailure;
                        return Ok(segment);
                    }
                    ds = (0.5 * ds).max(settings.ds_min);
                    continue;
                }
                if beta_try <= window.0 || beta_try >= window.1 {
                    segment.termination = Termination::LeftWindow;
                    return Ok(segment);
                }
                z = z_try;
                beta = beta_try;
                push(&mut segment, &z, beta, rnorm);

                match system.tangent(&z, beta, &tz, tb) {
                    Ok((ntz, ntb)) => {
                        if ntb.signum() != tb.signum() && tb != 0.0 && ntb != 0.0 {
                            segment.folds_passed += 1;
                            if let Some(max_folds) = settings.max_folds {
                                if segment.folds_passed >= max_folds {
                                    segment.termination = Termination::Fold(segment.folds_passed);
                                    return Ok(segment);
                                }
                            }
                        }
                        tz = ntz;
                        tb = ntb;
                    }
                    Err(_) => {
                        segment.termination = Termination::CorrectorFailure;
                        return Ok(segment);
                    }
                }

                let mins = segment.points.last().unwrap().min_component_values;
                let positive = mins.0 > 0.0 && mins.1 > 0.0;
                if settings.stop_on_positivity_loss && was_positive && !positive {
                    segment.termination = Termination::PositivityLost;
                    return Ok(segment);
                }
                was_positive = positive;
                ds = (2.0 * ds).min(settings.ds_max);
            }
            Err(_) => {
                if ds <= settings.ds_min * (1.0 + 1e-12) {
                    segment.termination = Termination::CorrectorFailure;
                    return Ok(segment);
                }
                ds = (0.5 * ds).max(settings.ds_min);
            }
        }
        if segment.points.len() > settings.max_steps {
            break;
        }
    }
    segment.termination = Termination::MaxSteps;
    Ok(segment)
}

/// Lift a branch step to the n components of the full system.
pub fn lift_step(
    config: &CouplingConfig,
    partition: &Partition,
    step: &BranchStep,
) -> Result<Vec<Vec<f64>>> {
    let red = reduce(config, partition, step.beta)?;
    Ok(crate::partition::lift(
        &[step.v_a.clone(), step.v_b.clone()],
        &red,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bifurcation::find_bifurcations;
    use crate::coupling::branch_point;
    use crate::ground_state::solve_omega;
    use crate::mesh::{build_mesh, DomainSpec};
    use crate::partition::detect_synchrony;
    use crate::spectrum::compute_spectrum;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn setup(m: usize) -> (Mesh, GroundState) {
        let mesh = build_mesh(DomainSpec::Interval { length: 2.0 * PI }, m).unwrap();
        let gs = solve_omega(&mesh, 5e-12).unwrap();
        (mesh, gs)
    }

    #[test]
    fn synchronized_point_has_tiny_residual() {
        let (mesh, gs) = setup(128);
        let config = CouplingConfig::new(vec![1.0, 2.0, 3.0]).unwrap();
        let beta = -2.0;
        let point = branch_point(&config, beta).unwrap();
        let partition = Partition::bipartition(&[0], 3).unwrap();
        let system = BipartitionSystem::new(&mesh, &config, partition.clone()).unwrap();
        let red = reduce(&config, &partition, beta).unwrap();
        // reduced synchronized state: alpha_j = t_j alpha_red_i
        let v_a: Vec<f64> = gs
            .omega
            .iter()
            .map(|o| o * point.alphas[0] / red.weights[0][0])
            .collect();
        let v_b: Vec<f64> = gs
            .omega
            .iter()
            .map(|o| o * point.alphas[1] / red.weights[1][0])
            .collect();
        let (ra, rb) = discrete_residual(&system, beta, &v_a, &v_b).unwrap();
        let worst = ra
            .iter()
            .chain(rb.iter())
            .fold(0.0f64, |a, &v| a.max(v.abs()));
        assert!(worst < 1e-10, "residual {worst}");
        // zero is a solution of the relaxed system
        let zero = vec![0.0; mesh.len()];
        let (ra, rb) = discrete_residual(&system, beta, &zero, &zero).unwrap();
        assert!(ra.iter().chain(rb.iter()).all(|&v| v == 0.0));
    }

    #[test]
    fn jacobian_matches_directional_differences() {
        let (mesh, _) = setup(64);
        let config = CouplingConfig::new(vec![1.0, 2.0, 3.0]).unwrap();
        let partition = Partition::bipartition(&[0], 3).unwrap();
        let system = BipartitionSystem::new(&mesh, &config, partition).unwrap();
        let beta = -2.0;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let z: Vec<f64> = (0..2 * mesh.len())
            .map(|_| rng.gen_range(-0.5..0.5))
            .collect();
        let d: Vec<f64> = (0..2 * mesh.len())
            .map(|_| rng.gen_range(-1.0..1.0))
            .collect();
        let eps = 1e-6;
        let zp: Vec<f64> = z.iter().zip(&d).map(|(a, b)| a + eps * b).collect();
        let zm: Vec<f64> = z.iter().zip(&d).map(|(a, b)| a - eps * b).collect();
        let rp = system.residual(&zp, beta).unwrap();
        let rm = system.residual(&zm, beta).unwrap();
        let jd = system.apply_jacobian(&z, beta, &d).unwrap();
        let scale = jd.iter().fold(1.0f64, |a, &v| a.max(v.abs()));
        for i in 0..jd.len() {
            let fd = (rp[i] - rm[i]) / (2.0 * eps);
            assert!(
                (fd - jd[i]).abs() <= 1e-6 * scale,
                "row {i}: fd {fd} vs exact {}",
                jd[i]
            );
        }
        // banded assembly agrees with the matrix-free action
        let jac = system.jacobian(&z, beta).unwrap();
        let mut jd2 = vec![0.0; 2 * mesh.len()];
        for (i, out) in jd2.iter_mut().enumerate() {
            let lo = i.saturating_sub(2);
            for (j, dj) in d
                .iter()
                .enumerate()
                .take((i + 3).min(2 * mesh.len()))
                .skip(lo)
            {
                *out += jac.get(i, j) * dj;
            }
        }
        for (a, b) in jd.iter().zip(&jd2) {
            assert!((a - b).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn energy_is_zero_at_zero_and_stationary_on_the_branch() {
        let (mesh, gs) = setup(128);
        let stiffness = assemble(&mesh, Descriptor::Stiffness);
        let config = CouplingConfig::new(vec![1.0, 2.0, 3.0]).unwrap();
        let beta = -2.0;
        let zero = vec![vec![0.0; mesh.len()]; 3];
        assert_eq!(energy(&mesh, &stiffness, &config, beta, &zero), 0.0);

        let point = branch_point(&config, beta).unwrap();
        let u: Vec<Vec<f64>> = point
            .alphas
            .iter()
            .map(|a| gs.omega.iter().map(|o| a * o).collect())
            .collect();
        let grad = energy_gradient(&mesh, &stiffness, &config, beta, &u);
        let gnorm: f64 = grad
            .iter()
            .flat_map(|g| g.iter())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt();
        assert!(gnorm <= 1e-8, "gradient norm {gnorm}");
    }

    #[test]
    fn energy_gradient_matches_finite_differences() {
        let (mesh, _) = setup(64);
        let stiffness = assemble(&mesh, Descriptor::Stiffness);
        let config = CouplingConfig::new(vec![1.0, 2.0, 3.0]).unwrap();
        let beta = -1.5;
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let u: Vec<Vec<f64>> = (0..3)
            .map(|_| (0..mesh.len()).map(|_| rng.gen_range(-0.4..0.8)).collect())
            .collect();
        let grad = energy_gradient(&mesh, &stiffness, &config, beta, &u);
        for _ in 0..10 {
            let d: Vec<Vec<f64>> = (0..3)
                .map(|_| (0..mesh.len()).map(|_| rng.gen_range(-1.0..1.0)).collect())
                .collect();
            let eps = 1e-6;
            let up: Vec<Vec<f64>> = u
                .iter()
                .zip(&d)
                .map(|(c, dc)| c.iter().zip(dc).map(|(a, b)| a + eps * b).collect())
                .collect();
            let um: Vec<Vec<f64>> = u
                .iter()
                .zip(&d)
                .map(|(c, dc)| c.iter().zip(dc).map(|(a, b)| a - eps * b).collect())
                .collect();
            let fd = (energy(&mesh, &stiffness, &config, beta, &up)
                - energy(&mesh, &stiffness, &config, beta, &um))
                / (2.0 * eps);
            let exact: f64 = grad
                .iter()
                .zip(&d)
                .map(|(g, dc)| crate::linalg::dot(g, dc))
                .sum();
            assert!(
                (fd - exact).abs() <= 1e-5 * (1.0 + exact.abs()),
                "fd {fd} vs exact {exact}"
            );
        }
    }

    fn first_branch(
        mesh: &Mesh,
        gs: &GroundState,
        config: &CouplingConfig,
        a_set: &[usize],
        settings: &ContinuationSettings,
    ) -> (BranchSegment, Partition) {
        let spectrum = compute_spectrum(mesh, gs, 10, 1e-7).unwrap();
        let points = find_bifurcations(config, &spectrum).unwrap();
        let origin = &points[0];
        let partition = Partition::bipartition(a_set, config.n()).unwrap();
        let system = BipartitionSystem::new(mesh, config, partition.clone()).unwrap();
        let predictor = branch_switch(&system, origin, gs, &spectrum, settings).unwrap();
        let segment = continue_branch(&system, &predictor, settings).unwrap();
        (segment, partition)
    }

    #[test]
    fn zero_kick_predictor_is_the_synchronized_point() {
        let (mesh, gs) = setup(96);
        let config = CouplingConfig::new(vec![1.0, 2.0, 3.0]).unwrap();
        let spectrum = compute_spectrum(&mesh, &gs, 8, 1e-7).unwrap();
        let points = find_bifurcations(&config, &spectrum).unwrap();
        let partition = Partition::bipartition(&[0], 3).unwrap();
        let system = BipartitionSystem::new(&mesh, &config, partition).unwrap();
        let settings = ContinuationSettings {
            kick_amplitude: 0.0,
            ..Default::default()
        };
        let predictor = branch_switch(&system, &points[0], &gs, &spectrum, &settings).unwrap();
        for (a, b) in predictor.z.iter().zip(&predictor.z_sync) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn branch_switch_enters_the_bipartition_branch() {
        let (mesh, gs) = setup(128);
        let config = CouplingConfig::new(vec![1.0, 2.0, 3.0]).unwrap();
        let settings = ContinuationSettings {
            max_steps: 12,
            ..ContinuationSettings::default().with_kick_for(&gs)
        };
        let (segment, partition) = first_branch(&mesh, &gs, &config, &[0], &settings);
        assert!(
            segment.points.len() >= 10,
            "only {} points",
            segment.points.len()
        );
        for step in &segment.points {
            assert!(step.residual_norm <= settings.corrector_tol);
        }
        // the first few points are positive and carry the bipartition synchrony
        for step in segment.points.iter().take(3) {
            assert!(step.min_component_values.0 > 0.0);
            assert!(step.min_component_values.1 > 0.0);
        }
        for step in segment.points.iter().take(6) {
            let lifted = lift_step(&config, &partition, step).unwrap();
            let detected = detect_synchrony(&lifted, 1e-6);
            assert_eq!(detected, partition, "at beta = {}", step.beta);
        }
    }

    #[test]
    fn distinct_bipartitions_stay_distinct() {
        let (mesh, gs) = setup(96);
        let config = CouplingConfig::new(vec![1.0, 2.0, 3.0]).unwrap();
        let settings = ContinuationSettings {
            max_steps: 8,
            ..ContinuationSettings::default().with_kick_for(&gs)
        };
        let (seg_a, part_a) = first_branch(&mesh, &gs, &config, &[0], &settings);
        let (seg_b, part_b) = first_branch(&mesh, &gs, &config, &[1], &settings);
        for (sa, sb) in seg_a.points.iter().zip(&seg_b.points) {
            let la = lift_step(&config, &part_a, sa).unwrap();
            let lb = lift_step(&config, &part_b, sb).unwrap();
            assert_ne!(detect_synchrony(&la, 1e-6), detect_synchrony(&lb, 1e-6));
        }
    }

    #[test]
    fn mirror_kick_swaps_the_equal_blocks() {
        // n = 4, equal couplings, |A| = |A^c|: reversing the kick sign
        // produces the component-swapped branch
        let (mesh, gs) = setup(96);
        let config = CouplingConfig::new(vec![1.0, 1.0, 1.0, 1.0]).unwrap();
        let spectrum = compute_spectrum(&mesh, &gs, 8, 1e-7).unwrap();
        let points = find_bifurcations(&config, &spectrum).unwrap();
        let partition = Partition::bipartition(&[0, 1], 4).unwrap();
        let system = BipartitionSystem::new(&mesh, &config, partition).unwrap();
        let base = ContinuationSettings {
            max_steps: 6,
            ..ContinuationSettings::default().with_kick_for(&gs)
        };
        let flipped = ContinuationSettings {
            kick_amplitude: -base.kick_amplitude,
            ..base.clone()
        };
        let p1 = branch_switch(&system, &points[0], &gs, &spectrum, &base).unwrap();
        let p2 = branch_switch(&system, &points[0], &gs, &spectrum, &flipped).unwrap();
        let s1 = continue_branch(&system, &p1, &base).unwrap();
        let s2 = continue_branch(&system, &p2, &flipped).unwrap();
        assert_eq!(s1.points.len(), s2.points.len());
        for (a, b) in s1.points.iter().zip(&s2.points) {
            assert!((a.beta - b.beta).abs() < 1e-6);
            for (x, y) in a.v_a.iter().zip(&b.v_b) {
                assert!((x - y).abs() < 1e-6, "mirror mismatch");
            }
            for (x, y) in a.v_b.iter().zip(&b.v_a) {
                assert!((x - y).abs() < 1e-6, "mirror mismatch");
            }
        }
    }

    #[test]
    fn degenerate_and_multiple_origins_are_refused() {
        let (mesh, gs) = setup(96);
        let config = CouplingConfig::new(vec![1.0, 2.0, 3.0]).unwrap();
        let spectrum = compute_spectrum(&mesh, &gs, 8, 1e-7).unwrap();
        let points = find_bifurcations(&config, &spectrum).unwrap();
        let partition = Partition::bipartition(&[0], 3).unwrap();
        let system = BipartitionSystem::new(&mesh, &config, partition).unwrap();
        let settings = ContinuationSettings::default();
        let mut degenerate = points[0].clone();
        degenerate.degenerate = true;
        assert!(matches!(
            branch_switch(&system, &degenerate, &gs, &spectrum, &settings),
            Err(Error::DegenerateOrigin { .. })
        ));
        let mut multiple = points[0].clone();
        multiple.n_k = 2;
        assert!(matches!(
            branch_switch(&system, &multiple, &gs, &spectrum, &settings),
            Err(Error::MultiplicityUnsupported { multiplicity: 2 })
        ));
    }
}
