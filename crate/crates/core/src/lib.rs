//! Numerical toolkit for the synchronized solution branch of n-component
//! coupled cubic elliptic systems with an indefinite linear part:
//! construction of the branch, location and verification of its local
//! bifurcation points, and continuation of the bifurcating
//! partially-synchronized branches.
//!
//! Pipeline: discretize the domain ([`mesh`]), solve for the positive scalar
//! ground state ([`ground_state`]), compute the weighted eigenvalues that
//! select bifurcation parameters ([`spectrum`]), evaluate the closed-form
//! branch algebra ([`coupling`]), detect and classify crossings
//! ([`bifurcation`]), and trace bipartition branches ([`continuation`]).
//! [`nonexistence`] evaluates the parameter regions that exclude positive
//! solutions and [`partition`] handles the block reductions.
//!
//! ```
//! use cnls_core::*;
//!
//! let length = 2.0 * std::f64::consts::PI;
//! let mesh = build_mesh(DomainSpec::Interval { length }, 96)?;
//! let ground = solve_omega(&mesh, 1e-10)?;
//! let spectrum = compute_spectrum(&mesh, &ground, 8, 1e-7)?;
//! assert!((spectrum.eigenvalues[0] + 1.0).abs() < 1e-7);
//!
//! let config = CouplingConfig::new(vec![1.0, 2.0, 3.0])?;
//! let points = find_bifurcations(&config, &spectrum)?;
//! let bb = beta_bar(&config)?;
//! assert!(points.iter().all(|p| p.beta_k < bb));
//! # Ok::<(), Error>(())
//! ```

pub mod bifurcation;
pub mod continuation;
pub mod coupling;
pub mod error;
pub mod ground_state;
pub mod linalg;
pub mod mesh;
pub mod nonexistence;
pub mod partition;
pub mod spectrum;

pub use bifurcation::{classify_globality, find_bifurcations, morse_index, BifurcationPoint};
pub use continuation::{
    branch_switch, continue_branch, discrete_residual, energy, full_system_residual, lift_step,
    BipartitionSystem, BranchPredictor, BranchSegment, BranchStep, ContinuationSettings,
    Termination,
};
pub use coupling::{
    beta_bar, branch_interval, branch_point, classify, f, f_asymptote, f_prime, g, g_prime,
    kernel_direction_basis, linearization, BranchPoint, CaseKind, CouplingConfig, Interval,
    LinearizationMatrix,
};
pub use error::{Error, Result};
pub use ground_state::{nondegeneracy_check, solve_omega, GroundState};
pub use mesh::{assemble, build_mesh, principal_eigenpair, Descriptor, DomainSpec, Mesh, Operator};
pub use nonexistence::{
    consistency_with_branch, evaluate, Firing, GeneralConfig, NonexistenceVerdict,
};
pub use partition::{
    detect_synchrony, enumerate_bipartitions, lift, reduce, Partition, ReducedConfig,
};
pub use spectrum::{compute_spectrum, WeightedSpectrum};
