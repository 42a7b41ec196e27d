//! Spectrum of the omega^2-weighted eigenproblem
//! `-Lap psi - psi = lambda omega^2 psi`, Dirichlet boundary.
//!
//! The discrete pencil is `(S - M) psi = lambda W psi` with W the weighted
//! mass. Its first eigenvalue is -1 with eigenfunction omega, by construction
//! of the ground state. Eigenvalues are located by Sturm bisection and the
//! eigenvectors by shifted inverse iteration, then clustered into distinct
//! values with multiplicities.

use crate::error::{Error, Result};
use crate::ground_state::GroundState;
use crate::linalg::{GeneralizedTridiag, SymTridiag};
use crate::mesh::{assemble, Descriptor, Mesh};

/// Distinct eigenvalues lambda_k with multiplicities and eigenspace bases.
#[derive(Debug, Clone)]
pub struct WeightedSpectrum {
    /// Distinct eigenvalues, strictly increasing.
    pub eigenvalues: Vec<f64>,
    /// Multiplicity n_k of each distinct eigenvalue.
    pub multiplicities: Vec<usize>,
    /// Basis of each eigenspace, orthonormal in the omega^2-weighted mass.
    pub eigenfunctions: Vec<Vec<Vec<f64>>>,
    /// Count of negative distinct eigenvalues: lambda_{k0} < 0 < lambda_{k0+1}.
    pub k0: usize,
    /// Relative tolerance used to merge numerically equal eigenvalues.
    pub cluster_tol: f64,
    /// Cluster pairs (1-based index of the lower cluster, gap) whose
    /// separation is below 10x the cluster tolerance; reported, not fatal.
    pub ambiguous_clusters: Vec<(usize, f64)>,
}

impl WeightedSpectrum {
    /// Number of distinct eigenvalues.
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn lambda_max(&self) -> f64 {
        *self.eigenvalues.last().expect("nonempty spectrum")
    }

    /// Distinct eigenvalues strictly inside (lo, hi) as (k, lambda_k, n_k),
    /// k 1-based.
    pub fn count_in_window(&self, lo: f64, hi: f64) -> Vec<(usize, f64, usize)> {
        assert!(lo < hi, "window must satisfy lo < hi");
        self.eigenvalues
            .iter()
            .enumerate()
            .filter(|(_, l)| **l > lo && **l < hi)
            .map(|(i, l)| (i + 1, *l, self.multiplicities[i]))
            .collect()
    }
}

/// Compute the `k_max` smallest eigenvalues of the weighted problem.
pub fn compute_spectrum(
    mesh: &Mesh,
    state: &GroundState,
    k_max: usize,
    cluster_tol: f64,
) -> Result<WeightedSpectrum> {
    if k_max < 2 {
        return Err(Error::InvalidConfig("k_max must be at least 2".into()));
    }
    if state.omega.len() != mesh.len() {
        return Err(Error::SolverFailure(
            "ground state and mesh sizes differ".into(),
        ));
    }
    let stiffness = assemble(mesh, Descriptor::Stiffness);
    let mass = assemble(mesh, Descriptor::Mass);
    let om2: Vec<f64> = state.omega.iter().map(|v| v * v).collect();
    let wmass = assemble(mesh, Descriptor::WeightedMass(&om2));

    let m = mesh.len();
    let a = SymTridiag::new(
        stiffness
            .diag()
            .iter()
            .zip(mass.diag())
            .map(|(s, w)| s - w)
            .collect(),
        stiffness.off().to_vec(),
    );
    let pencil = GeneralizedTridiag::new(&a, wmass.diag())?;
    let (raw_values, raw_vectors) = pencil.smallest_eigenpairs(k_max.min(m))?;

    // cluster numerically equal eigenvalues
    let mut eigenvalues: Vec<f64> = Vec::new();
    let mut multiplicities: Vec<usize> = Vec::new();
    let mut eigenfunctions: Vec<Vec<Vec<f64>>> = Vec::new();
    for (lam, vec) in raw_values.iter().zip(raw_vectors) {
        let tol = cluster_tol * (1.0 + lam.abs());
        match eigenvalues.last() {
            Some(last) if (lam - last).abs() <= tol => {
                let k = eigenvalues.len() - 1;
                let n = multiplicities[k] as f64;
                eigenvalues[k] = (eigenvalues[k] * n + lam) / (n + 1.0);
                multiplicities[k] += 1;
                eigenfunctions[k].push(vec);
            }
            _ => {
                eigenvalues.push(*lam);
                multiplicities.push(1);
                eigenfunctions.push(vec![vec]);
            }
        }
    }
    let mut ambiguous_clusters: Vec<(usize, f64)> = Vec::new();
    for k in 0..eigenvalues.len().saturating_sub(1) {
        let gap = eigenvalues[k + 1] - eigenvalues[k];
        if gap < 10.0 * cluster_tol * (1.0 + eigenvalues[k].abs()) {
            ambiguous_clusters.push((k + 1, gap));
        }
    }
    let k0 = eigenvalues.iter().filter(|l| **l < 0.0).count();
    Ok(WeightedSpectrum {
        eigenvalues,
        multiplicities,
        eigenfunctions,
        k0,
        cluster_tol,
        ambiguous_clusters,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ground_state::solve_omega;
    use crate::mesh::{build_mesh, DomainSpec};
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn spectrum_2pi(m: usize, k_max: usize) -> (Mesh, GroundState, WeightedSpectrum) {
        let mesh = build_mesh(DomainSpec::Interval { length: 2.0 * PI }, m).unwrap();
        let gs = solve_omega(&mesh, 1e-10).unwrap();
        let sp = compute_spectrum(&mesh, &gs, k_max, 1e-7).unwrap();
        (mesh, gs, sp)
    }

    #[test]
    fn first_eigenvalue_is_minus_one_with_omega_eigenfunction() {
        let (mesh, gs, sp) = spectrum_2pi(512, 10);
        assert!(
            (sp.eigenvalues[0] + 1.0).abs() < 1e-6,
            "lambda_1 = {}",
            sp.eigenvalues[0]
        );
        // eigenfunction proportional to omega in L2
        let psi = &sp.eigenfunctions[0][0];
        let scale = mesh.inner(psi, &gs.omega) / mesh.inner(&gs.omega, &gs.omega);
        let diff: Vec<f64> = psi
            .iter()
            .zip(&gs.omega)
            .map(|(p, o)| p - scale * o)
            .collect();
        let rel = mesh.norm_l2(&diff) / mesh.norm_l2(psi);
        assert!(rel < 1e-6, "relative L2 difference {rel}");
    }

    #[test]
    fn interval_spectrum_is_simple_and_increasing() {
        let (_, _, sp) = spectrum_2pi(256, 12);
        assert!(sp.multiplicities.iter().all(|&n| n == 1));
        assert!(sp.eigenvalues.windows(2).all(|w| w[0] < w[1]));
        assert!(sp.lambda_max() > sp.eigenvalues[sp.len() / 2]);
        assert!(sp.k0 >= 1);
        assert!(sp.eigenvalues[sp.k0 - 1] < 0.0);
        if sp.k0 < sp.len() {
            assert!(sp.eigenvalues[sp.k0] > 0.0);
        }
    }

    #[test]
    fn rayleigh_quotients_match_eigenvalues() {
        let (mesh, gs, sp) = spectrum_2pi(256, 8);
        let s = assemble(&mesh, Descriptor::Stiffness);
        let m = assemble(&mesh, Descriptor::Mass);
        let om2: Vec<f64> = gs.omega.iter().map(|v| v * v).collect();
        let w = assemble(&mesh, Descriptor::WeightedMass(&om2));
        for (lam, basis) in sp.eigenvalues.iter().zip(&sp.eigenfunctions) {
            for psi in basis {
                let rq = (s.quadratic_form(psi) - m.quadratic_form(psi)) / w.quadratic_form(psi);
                assert_relative_eq!(rq, *lam, max_relative = 1e-8, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn eigenspace_bases_are_weighted_orthonormal() {
        let (mesh, gs, sp) = spectrum_2pi(256, 8);
        let om2: Vec<f64> = gs.omega.iter().map(|v| v * v).collect();
        let w: Vec<f64> = mesh.weights.iter().zip(&om2).map(|(a, b)| a * b).collect();
        let winner = |u: &[f64], v: &[f64]| -> f64 {
            u.iter()
                .zip(v.iter().zip(&w))
                .map(|(a, (b, wi))| a * b * wi)
                .sum()
        };
        for basis in &sp.eigenfunctions {
            for (i, u) in basis.iter().enumerate() {
                for (j, v) in basis.iter().enumerate() {
                    let g = winner(u, v);
                    let expected = if i == j { 1.0 } else { 0.0 };
                    assert!((g - expected).abs() < 1e-8, "gram[{i}][{j}] = {g}");
                }
            }
        }
    }

    #[test]
    fn count_in_window_selects_strict_interior() {
        let (_, _, sp) = spectrum_2pi(256, 10);
        let l1 = sp.eigenvalues[0];
        let tight = sp.count_in_window(l1 - 1.0, l1 + 1e-9);
        assert_eq!(tight.len(), 1);
        assert_eq!(tight[0].0, 1);
        let empty = sp.count_in_window(sp.lambda_max() + 1.0, sp.lambda_max() + 2.0);
        assert!(empty.is_empty());
        // the defocusing eligibility window for n = 3
        let window = sp.count_in_window(-1.0, 0.0);
        assert!(window.iter().all(|(_, l, _)| *l > -1.0 && *l < 0.0));
        assert_eq!(window.len(), sp.k0 - 1);
    }

    #[test]
    fn lambda1_error_stays_at_solver_floor_under_refinement() {
        // The discrete construction makes (omega, -1) an exact eigenpair of
        // the discrete pencil, so the lambda_1 error sits at the Newton/
        // eigensolver floor at every mesh; a measured convergence rate only
        // applies above that floor.
        let (_, _, coarse) = spectrum_2pi(256, 4);
        let (_, _, fine) = spectrum_2pi(512, 4);
        let (e1, e2) = (
            (coarse.eigenvalues[0] + 1.0).abs(),
            (fine.eigenvalues[0] + 1.0).abs(),
        );
        let floor = 1e-9;
        if e1 > floor && e2 > floor {
            let rate = (e1 / e2).log2();
            assert!(rate >= 1.8, "rate {rate}");
        } else {
            assert!(e1 <= floor && e2 <= floor, "errors {e1}, {e2}");
        }
    }

    #[test]
    fn sturm_bisection_matches_a_dense_eigensolver_on_the_weighted_pencil() {
        // independent route: reduce the pencil to dense standard form and
        // diagonalize with nalgebra
        let mesh = build_mesh(DomainSpec::Interval { length: 2.0 * PI }, 80).unwrap();
        let gs = solve_omega(&mesh, 1e-10).unwrap();
        let sp = compute_spectrum(&mesh, &gs, 8, 1e-7).unwrap();

        let s = assemble(&mesh, Descriptor::Stiffness);
        let m = assemble(&mesh, Descriptor::Mass);
        let om2: Vec<f64> = gs.omega.iter().map(|v| v * v).collect();
        let w = assemble(&mesh, Descriptor::WeightedMass(&om2));
        let n = mesh.len();
        let mut dense = nalgebra::DMatrix::zeros(n, n);
        let scale: Vec<f64> = w.diag().iter().map(|d| 1.0 / d.sqrt()).collect();
        for i in 0..n {
            dense[(i, i)] = (s.diag()[i] - m.diag()[i]) * scale[i] * scale[i];
            if i + 1 < n {
                let off = s.off()[i] * scale[i] * scale[i + 1];
                dense[(i, i + 1)] = off;
                dense[(i + 1, i)] = off;
            }
        }
        let mut reference: Vec<f64> = dense
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .cloned()
            .collect();
        reference.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (mine, theirs) in sp.eigenvalues.iter().zip(&reference) {
            assert_relative_eq!(mine, theirs, max_relative = 1e-10, epsilon = 1e-10);
        }
    }

    #[test]
    fn higher_eigenvalues_converge_at_second_order() {
        // lambda_3 carries a genuine discretization error, so the refinement
        // rate is measurable there (Richardson against the m = 1024 value)
        let (_, _, coarse) = spectrum_2pi(128, 4);
        let (_, _, mid) = spectrum_2pi(256, 4);
        let (_, _, fine) = spectrum_2pi(1024, 4);
        let reference = fine.eigenvalues[2];
        let e1 = (coarse.eigenvalues[2] - reference).abs();
        let e2 = (mid.eigenvalues[2] - reference).abs();
        // grid ratio is (257/129) in h, not exactly 2
        let ratio = (257.0f64 / 129.0).ln();
        let rate = (e1 / e2).ln() / ratio;
        assert!(
            (1.8..=2.2).contains(&rate),
            "rate {rate} (errors {e1:e}, {e2:e})"
        );
    }

    #[test]
    fn coarse_cluster_tolerance_reports_ambiguity() {
        // an exaggerated tolerance pushes neighboring clusters inside the
        // 10x reporting band without merging them
        let mesh = build_mesh(DomainSpec::Interval { length: 2.0 * PI }, 128).unwrap();
        let gs = solve_omega(&mesh, 1e-10).unwrap();
        let sp = compute_spectrum(&mesh, &gs, 6, 0.2).unwrap();
        assert!(!sp.ambiguous_clusters.is_empty());
        for (k, gap) in &sp.ambiguous_clusters {
            assert!(*k >= 1 && *k < sp.len());
            assert!(*gap < 10.0 * 0.2 * (1.0 + sp.eigenvalues[k - 1].abs()));
        }
        // the default tolerance reports nothing on this clean 1D spectrum
        let sp = compute_spectrum(&mesh, &gs, 6, 1e-7).unwrap();
        assert!(sp.ambiguous_clusters.is_empty());
    }

    #[test]
    fn k_max_must_be_at_least_two() {
        let mesh = build_mesh(DomainSpec::Interval { length: 2.0 * PI }, 64).unwrap();
        let gs = solve_omega(&mesh, 1e-10).unwrap();
        assert!(matches!(
            compute_spectrum(&mesh, &gs, 1, 1e-7),
            Err(Error::InvalidConfig(_))
        ));
    }
}
