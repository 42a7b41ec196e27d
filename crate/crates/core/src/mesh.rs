//! Domains and their finite-difference discretization.
//!
//! Supported domains are the interval (0, L) and the radial ball of radius R
//! in dimension d <= 3, reduced to the radial coordinate. Operators are
//! assembled in symmetric (energy) form: `u' S u` approximates the Dirichlet
//! form of -Laplace and the mass operators are diagonal quadrature weights,
//! so eigenproblems are generalized pencils `S x = lambda M x`.

use crate::error::{Error, Result};
use crate::linalg::{GeneralizedTridiag, SymTridiag};

/// The domain Omega.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DomainSpec {
    /// Interval (0, L).
    Interval { length: f64 },
    /// Ball of radius R in R^d, d in {1, 2, 3}, restricted to radial functions.
    Ball { radius: f64, dimension: u8 },
}

impl DomainSpec {
    fn validate(&self) -> Result<()> {
        match *self {
            DomainSpec::Interval { length } => {
                if length <= 0.0 || length.is_nan() {
                    return Err(Error::InvalidDomain(format!(
                        "interval length {length} <= 0"
                    )));
                }
            }
            DomainSpec::Ball { radius, dimension } => {
                if radius <= 0.0 || radius.is_nan() {
                    return Err(Error::InvalidDomain(format!("ball radius {radius} <= 0")));
                }
                if !(1..=3).contains(&dimension) {
                    return Err(Error::InvalidDomain(format!(
                        "ball dimension {dimension} not in 1..=3"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Interior grid with quadrature weights (the radial measure r^{d-1} for balls).
#[derive(Debug, Clone)]
pub struct Mesh {
    pub nodes: Vec<f64>,
    pub spacing: f64,
    pub weights: Vec<f64>,
    pub domain: DomainSpec,
}

impl Mesh {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Quadrature of a grid function.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        self.weights.iter().zip(values).map(|(w, v)| w * v).sum()
    }

    /// Weighted L2 inner product.
    pub fn inner(&self, u: &[f64], v: &[f64]) -> f64 {
        self.weights
            .iter()
            .zip(u.iter().zip(v))
            .map(|(w, (a, b))| w * a * b)
            .sum()
    }

    pub fn norm_l2(&self, u: &[f64]) -> f64 {
        self.inner(u, u).sqrt()
    }
}

/// Which operator to assemble. The weighted mass carries the pointwise
/// weight (omega squared for the linearized problems).
#[derive(Debug, Clone, Copy)]
pub enum Descriptor<'a> {
    Stiffness,
    Mass,
    WeightedMass(&'a [f64]),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorDescriptor {
    Stiffness,
    Mass,
    WeightedMass,
}

/// Symmetric tridiagonal operator on a mesh.
#[derive(Debug, Clone)]
pub struct Operator {
    pub descriptor: OperatorDescriptor,
    tri: SymTridiag,
}

impl Operator {
    pub fn len(&self) -> usize {
        self.tri.n()
    }

    pub fn is_empty(&self) -> bool {
        self.tri.n() == 0
    }

    pub fn diag(&self) -> &[f64] {
        &self.tri.diag
    }

    pub fn off(&self) -> &[f64] {
        &self.tri.off
    }

    pub fn tridiag(&self) -> &SymTridiag {
        &self.tri
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.tri.apply(x)
    }

    /// u' A u.
    pub fn quadratic_form(&self, u: &[f64]) -> f64 {
        crate::linalg::dot(&self.apply(u), u)
    }
}

/// Build a uniform interior mesh with `m` nodes.
///
/// Interval: nodes i*h, h = L/(m+1), trapezoidal interior weights h.
/// Ball: cell-centered radial nodes (i+1/2)*h, h = R/m, weights r^{d-1} h;
/// the flux face at r = 0 carries the even (ghost-point) reflection, so the
/// symmetry condition u'(0) = 0 holds exactly in the scheme.
pub fn build_mesh(spec: DomainSpec, m: usize) -> Result<Mesh> {
    spec.validate()?;
    if m < 8 {
        return Err(Error::InvalidDomain(format!(
            "mesh needs m >= 8 nodes, got {m}"
        )));
    }
    match spec {
        DomainSpec::Interval { length } => {
            let h = length / (m as f64 + 1.0);
            let nodes: Vec<f64> = (1..=m).map(|i| i as f64 * h).collect();
            let weights = vec![h; m];
            Ok(Mesh {
                nodes,
                spacing: h,
                weights,
                domain: spec,
            })
        }
        DomainSpec::Ball { radius, dimension } => {
            let h = radius / m as f64;
            let nodes: Vec<f64> = (0..m).map(|i| (i as f64 + 0.5) * h).collect();
            let weights: Vec<f64> = nodes
                .iter()
                .map(|r| r.powi(dimension as i32 - 1) * h)
                .collect();
            Ok(Mesh {
                nodes,
                spacing: h,
                weights,
                domain: spec,
            })
        }
    }
}

/// Assemble a symmetric operator on the mesh (Dirichlet rows eliminated).
pub fn assemble(mesh: &Mesh, descriptor: Descriptor<'_>) -> Operator {
    let m = mesh.len();
    let h = mesh.spacing;
    match descriptor {
        Descriptor::Mass => Operator {
            descriptor: OperatorDescriptor::Mass,
            tri: SymTridiag::new(mesh.weights.clone(), vec![0.0; m - 1]),
        },
        Descriptor::WeightedMass(pointwise) => {
            assert_eq!(pointwise.len(), m, "weight length mismatch");
            let diag = mesh
                .weights
                .iter()
                .zip(pointwise)
                .map(|(w, p)| w * p)
                .collect();
            Operator {
                descriptor: OperatorDescriptor::WeightedMass,
                tri: SymTridiag::new(diag, vec![0.0; m - 1]),
            }
        }
        Descriptor::Stiffness => {
            let tri = match mesh.domain {
                DomainSpec::Interval { .. } => {
                    SymTridiag::new(vec![2.0 / h; m], vec![-1.0 / h; m - 1])
                }
                DomainSpec::Ball { radius, dimension } => {
                    let dm1 = dimension as i32 - 1;
                    // faces at i*h, i = 0..=m; the r = 0 face flux vanishes
                    // (even reflection), the r = R face is Dirichlet at h/2.
                    let face = |i: usize| (i as f64 * h).powi(dm1);
                    let mut diag = vec![0.0; m];
                    let mut off = vec![0.0; m - 1];
                    for i in 0..m {
                        let left = if i == 0 { 0.0 } else { face(i) };
                        let right = if i + 1 == m {
                            2.0 * radius.powi(dm1)
                        } else {
                            face(i + 1)
                        };
                        diag[i] = (left + right) / h;
                        if i + 1 < m {
                            off[i] = -face(i + 1) / h;
                        }
                    }
                    SymTridiag::new(diag, off)
                }
            };
            Operator {
                descriptor: OperatorDescriptor::Stiffness,
                tri,
            }
        }
    }
}

/// Smallest eigenpair of `S phi = Lambda M phi`, mass-normalized and
/// sign-fixed so that phi > 0 at every node.
pub fn principal_eigenpair(stiffness: &Operator, mass: &Operator) -> Result<(f64, Vec<f64>)> {
    if stiffness.len() != mass.len() {
        return Err(Error::SolverFailure("operator sizes differ".into()));
    }
    let pencil = GeneralizedTridiag::new(stiffness.tridiag(), mass.diag())?;
    let (values, mut vectors) = pencil.smallest_eigenpairs(1)?;
    let lambda = values[0];
    let mut phi = std::mem::take(&mut vectors[0]);
    let pos = phi.iter().filter(|v| **v > 0.0).count();
    if pos * 2 < phi.len() {
        for v in phi.iter_mut() {
            *v = -*v;
        }
    }
    if phi.iter().any(|&v| v <= 0.0) {
        return Err(Error::SolverFailure(
            "principal eigenfunction is not positive on the mesh".into(),
        ));
    }
    Ok((lambda, phi))
}
