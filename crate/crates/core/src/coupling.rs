//! Finite-dimensional algebra of the synchronized branch: case
//! classification, the coupling function g and the bifurcation function f,
//! the branch coefficients alpha_j, and the exact eigenstructure of the
//! linearization matrix.
//!
//! The controlling scalar function is
//! `g(beta) = 1 + beta sum_j 1/(mu_j - beta)`
//! and the branch exists exactly where `(beta - mu_j) g(beta) > 0` for all j,
//! with coefficients `alpha_j = ((beta - mu_j) g(beta))^{-1/2}`. Bifurcation
//! parameters are the solutions of `f(beta) = lambda_k` with
//! `f = -1 - 2/g`.

use crate::error::{Error, Result};
use crate::linalg::kahan_sum;
use nalgebra::DMatrix;

const POLE_REL_TOL: f64 = 1e-14;
const ROOT_ABS_TOL: f64 = 1e-12;
const MAX_BISECT: usize = 200;

/// Self-coupling constants mu_1 <= ... <= mu_n (n >= 3) of the symmetric
/// system with a = -1.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingConfig {
    mu: Vec<f64>,
    /// The common linear coefficient; fixed at -1.
    pub a: f64,
}

impl CouplingConfig {
    pub fn new(mut mu: Vec<f64>) -> Result<Self> {
        if mu.len() < 3 {
            return Err(Error::InvalidConfig(format!(
                "need at least 3 components, got {}",
                mu.len()
            )));
        }
        if mu.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig(
                "mu contains a non-finite value".into(),
            ));
        }
        mu.sort_by(|a, b| a.partial_cmp(b).unwrap());
        Ok(CouplingConfig { mu, a: -1.0 })
    }

    pub fn n(&self) -> usize {
        self.mu.len()
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn mu_min(&self) -> f64 {
        self.mu[0]
    }

    pub fn mu_max(&self) -> f64 {
        *self.mu.last().unwrap()
    }
}

/// Sign trichotomy of the self-couplings.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CaseKind {
    /// 0 < mu_1 <= ... <= mu_n.
    Focusing,
    /// mu_1 <= ... <= mu_n < 0.
    Defocusing,
    /// mu_k < 0 < mu_{k+1}; carries the split index k (count of negatives).
    Mixed { split: usize },
}

/// Classify the configuration; any mu_j = 0 sits on the case boundary and
/// is rejected.
pub fn classify(config: &CouplingConfig) -> Result<CaseKind> {
    if let Some(index) = config.mu.iter().position(|&v| v == 0.0) {
        return Err(Error::DegenerateCoupling { index });
    }
    if config.mu_min() > 0.0 {
        Ok(CaseKind::Focusing)
    } else if config.mu_max() < 0.0 {
        Ok(CaseKind::Defocusing)
    } else {
        let split = config.mu.iter().filter(|&&v| v < 0.0).count();
        Ok(CaseKind::Mixed { split })
    }
}

fn check_pole(config: &CouplingConfig, beta: f64) -> Result<()> {
    for (index, &mu) in config.mu.iter().enumerate() {
        if (beta - mu).abs() <= POLE_REL_TOL * (1.0 + mu.abs()) {
            return Err(Error::PoleAtMu { beta, index, mu });
        }
    }
    Ok(())
}

/// g(beta) = 1 + beta sum_j 1/(mu_j - beta), compensated summation.
pub fn g(config: &CouplingConfig, beta: f64) -> Result<f64> {
    check_pole(config, beta)?;
    let s = kahan_sum(config.mu.iter().map(|mu| 1.0 / (mu - beta)));
    Ok(1.0 + beta * s)
}

/// g'(beta) = sum_j mu_j / (mu_j - beta)^2.
pub fn g_prime(config: &CouplingConfig, beta: f64) -> Result<f64> {
    check_pole(config, beta)?;
    Ok(kahan_sum(config.mu.iter().map(|mu| {
        let d = mu - beta;
        mu / (d * d)
    })))
}

/// f(beta) = -1 - 2/g(beta).
pub fn f(config: &CouplingConfig, beta: f64) -> Result<f64> {
    let gv = g(config, beta)?;
    if gv.abs() < POLE_REL_TOL {
        return Err(Error::PoleAtBetaBar { beta });
    }
    Ok(-1.0 - 2.0 / gv)
}

/// f'(beta) = 2 g'(beta) / g(beta)^2.
pub fn f_prime(config: &CouplingConfig, beta: f64) -> Result<f64> {
    let gv = g(config, beta)?;
    if gv.abs() < POLE_REL_TOL {
        return Err(Error::PoleAtBetaBar { beta });
    }
    Ok(2.0 * g_prime(config, beta)? / (gv * gv))
}

/// Common limit of f at -infinity: (3 - n)/(n - 1) = -1 + 2/(n - 1).
pub fn f_asymptote(n: usize) -> f64 {
    (3.0 - n as f64) / (n as f64 - 1.0)
}

fn bisect_root(
    config: &CouplingConfig,
    mut lo: f64,
    mut hi: f64,
    func: impl Fn(&CouplingConfig, f64) -> Result<f64>,
) -> Result<f64> {
    let mut flo = func(config, lo)?;
    let fhi = func(config, hi)?;
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() {
        return Err(Error::SolverFailure(format!(
            "bisection bracket [{lo}, {hi}] does not change sign"
        )));
    }
    for _ in 0..MAX_BISECT {
        let mid = 0.5 * (lo + hi);
        let fmid = func(config, mid)?;
        if fmid == 0.0 {
            return Ok(mid);
        }
        if fmid.signum() == flo.signum() {
            lo = mid;
            flo = fmid;
        } else {
            hi = mid;
        }
        if hi - lo <= ROOT_ABS_TOL {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// The zero of g bounding the synchronized branch: in (-infinity, 0) for
/// focusing configurations, in (mu_n, infinity) for defocusing ones.
/// Not applicable in mixed cases, where the branch interval is (-inf, mu_1).
pub fn beta_bar(config: &CouplingConfig) -> Result<f64> {
    match classify(config)? {
        CaseKind::Focusing => {
            // g is increasing with g(0) = 1 and g -> 1 - n < 0; grow the
            // bracket to the left until the sign flips.
            let mut lo = -1.0;
            let mut width = 1.0;
            for _ in 0..MAX_BISECT {
                if g(config, lo)? < 0.0 {
                    break;
                }
                width *= 2.0;
                lo -= width;
            }
            bisect_root(config, lo, 0.0, g)
        }
        CaseKind::Defocusing => {
            // g decreases from +inf at mu_n^+ to 1 - n < 0.
            let mun = config.mu_max();
            let scale = 1.0 + mun.abs();
            let mut lo = mun + 1e-10 * scale;
            for _ in 0..MAX_BISECT {
                if g(config, lo)? > 0.0 {
                    break;
                }
                lo = mun + 0.5 * (lo - mun);
            }
            let mut hi = lo + scale;
            let mut width = scale;
            for _ in 0..MAX_BISECT {
                if g(config, hi)? < 0.0 {
                    break;
                }
                width *= 2.0;
                hi += width;
            }
            bisect_root(config, lo, hi, g)
        }
        CaseKind::Mixed { .. } => Err(Error::NotApplicable),
    }
}

/// An open interval, possibly unbounded below.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn contains(&self, beta: f64) -> bool {
        beta > self.lo && beta < self.hi
    }
}

/// The beta-interval(s) on which the synchronized branch exists:
/// (-inf, beta_bar) focusing; (-inf, mu_1) u (mu_n, beta_bar) defocusing;
/// (-inf, mu_1) mixed.
pub fn branch_interval(config: &CouplingConfig) -> Result<Vec<Interval>> {
    match classify(config)? {
        CaseKind::Focusing => {
            let bb = beta_bar(config)?;
            Ok(vec![Interval {
                lo: f64::NEG_INFINITY,
                hi: bb,
            }])
        }
        CaseKind::Defocusing => {
            let bb = beta_bar(config)?;
            Ok(vec![
                Interval {
                    lo: f64::NEG_INFINITY,
                    hi: config.mu_min(),
                },
                Interval {
                    lo: config.mu_max(),
                    hi: bb,
                },
            ])
        }
        CaseKind::Mixed { .. } => Ok(vec![Interval {
            lo: f64::NEG_INFINITY,
            hi: config.mu_min(),
        }]),
    }
}

/// A point on the synchronized branch.
#[derive(Debug, Clone)]
pub struct BranchPoint {
    pub beta: f64,
    /// alpha_j = ((beta - mu_j) g(beta))^{-1/2}, all positive.
    pub alphas: Vec<f64>,
    pub g_value: f64,
    pub f_value: f64,
}

/// Evaluate the branch coefficients at `beta` inside the branch interval.
pub fn branch_point(config: &CouplingConfig, beta: f64) -> Result<BranchPoint> {
    let intervals = branch_interval(config)?;
    if !intervals.iter().any(|iv| iv.contains(beta)) {
        return Err(Error::OutsideBranchInterval { beta });
    }
    let g_value = g(config, beta)?;
    let mut alphas = Vec::with_capacity(config.n());
    for &mu in config.mu() {
        let radicand = (beta - mu) * g_value;
        if radicand <= 0.0 {
            return Err(Error::OutsideBranchInterval { beta });
        }
        alphas.push(radicand.powf(-0.5));
    }
    let f_value = -1.0 - 2.0 / g_value;
    Ok(BranchPoint {
        beta,
        alphas,
        g_value,
        f_value,
    })
}

/// The n x n symmetric linearization matrix at a branch point:
/// M_jj = 3 mu_j alpha_j^2 + beta sum_{k != j} alpha_k^2,
/// M_jk = 2 beta alpha_j alpha_k. Its exact spectrum is {-3 (simple),
/// f(beta) (multiplicity n-1)} with the -3 eigenvector (alpha_1,...,alpha_n).
#[derive(Debug, Clone)]
pub struct LinearizationMatrix {
    matrix: DMatrix<f64>,
}

impl LinearizationMatrix {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let n = self.matrix.nrows();
        (0..n)
            .map(|i| (0..n).map(|j| self.matrix[(i, j)] * v[j]).sum())
            .collect()
    }

    /// Numeric eigenvalues, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = self
            .matrix
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .cloned()
            .collect();
        ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
        ev
    }
}

/// Assemble the linearization matrix from the direct coefficients.
pub fn linearization(config: &CouplingConfig, point: &BranchPoint) -> LinearizationMatrix {
    let n = config.n();
    let beta = point.beta;
    let alpha = &point.alphas;
    let sum_sq: f64 = kahan_sum(alpha.iter().map(|a| a * a));
    let mut m = DMatrix::zeros(n, n);
    for j in 0..n {
        let aj2 = alpha[j] * alpha[j];
        m[(j, j)] = 3.0 * config.mu()[j] * aj2 + beta * (sum_sq - aj2);
        for k in 0..n {
            if k != j {
                m[(j, k)] = 2.0 * beta * alpha[j] * alpha[k];
            }
        }
    }
    LinearizationMatrix { matrix: m }
}

/// Orthonormal basis of the kernel directions {v : sum_j alpha_j v_j = 0},
/// the f(beta)-eigenspace of the linearization matrix. Built from the
/// Householder reflector mapping alpha to a coordinate axis.
pub fn kernel_direction_basis(config: &CouplingConfig, point: &BranchPoint) -> Vec<Vec<f64>> {
    let n = config.n();
    let alpha = &point.alphas;
    let norm = crate::linalg::norm2(alpha);
    // w = alpha/|alpha| + e_1; reflector H = I - 2 w w'/|w|^2 sends e_1 to
    // -alpha/|alpha|, so its columns 2..n span the complement of alpha.
    let mut w: Vec<f64> = alpha.iter().map(|a| a / norm).collect();
    w[0] += 1.0;
    let wnorm2 = crate::linalg::dot(&w, &w);
    (1..n)
        .map(|col| {
            (0..n)
                .map(|row| {
                    let id = if row == col { 1.0 } else { 0.0 };
                    id - 2.0 * w[row] * w[col] / wnorm2
                })
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cfg(mu: &[f64]) -> CouplingConfig {
        CouplingConfig::new(mu.to_vec()).unwrap()
    }

    #[test]
    fn classification_follows_the_sign_trichotomy() {
        assert_eq!(
            classify(&cfg(&[1.0, 2.0, 3.0])).unwrap(),
            CaseKind::Focusing
        );
        assert_eq!(
            classify(&cfg(&[-3.0, -2.0, -1.0])).unwrap(),
            CaseKind::Defocusing
        );
        assert_eq!(
            classify(&cfg(&[-1.0, 1.0, 2.0])).unwrap(),
            CaseKind::Mixed { split: 1 }
        );
        assert!(matches!(
            classify(&cfg(&[-1.0, 0.0, 2.0])),
            Err(Error::DegenerateCoupling { index: 1 })
        ));
    }

    #[test]
    fn g_reference_values() {
        assert_relative_eq!(g(&cfg(&[1.0, 2.0, 3.0]), 0.0).unwrap(), 1.0);
        assert_relative_eq!(g(&cfg(&[1.0, 1.0, 1.0]), -1.0).unwrap(), -0.5);
        // limit 1 - n at -infinity
        let far = g(&cfg(&[1.0, 2.0, 3.0]), -1e9).unwrap();
        assert_relative_eq!(far, -2.0, epsilon = 1e-5);
        assert!(matches!(
            g(&cfg(&[1.0, 2.0, 3.0]), 2.0),
            Err(Error::PoleAtMu { index: 1, .. })
        ));
    }

    #[test]
    fn f_is_undefined_at_the_zero_of_g() {
        // for equal couplings beta_bar = -mu/(n-1) and g vanishes exactly
        assert!(matches!(
            f(&cfg(&[1.0, 1.0, 1.0]), -0.5),
            Err(Error::PoleAtBetaBar { .. })
        ));
        assert!(f_prime(&cfg(&[1.0, 1.0, 1.0]), -0.5).is_err());
    }

    #[test]
    fn f_reference_values_and_asymptotes() {
        assert_relative_eq!(f(&cfg(&[1.0, 1.0, 1.0]), -1.0).unwrap(), 3.0);
        for n in [3usize, 4, 5] {
            let mu_f: Vec<f64> = (0..n).map(|i| 1.0 + i as f64).collect();
            let mu_d: Vec<f64> = (0..n).map(|i| -(n as f64) + i as f64).collect();
            let fa = f_asymptote(n);
            assert_relative_eq!(f(&cfg(&mu_f), -1e6).unwrap(), fa, epsilon = 1e-3);
            assert_relative_eq!(
                f(&cfg(&mu_d), -1e6).unwrap(),
                -1.0 + 2.0 / (n as f64 - 1.0),
                epsilon = 1e-3
            );
            // the two limit formulas agree
            assert_relative_eq!(fa, -1.0 + 2.0 / (n as f64 - 1.0));
        }
    }

    #[test]
    fn beta_bar_cases() {
        // closed form -mu/(n-1) for equal couplings
        let bb = beta_bar(&cfg(&[1.0, 1.0, 1.0])).unwrap();
        assert_relative_eq!(bb, -0.5, epsilon = 1e-11);
        let d = cfg(&[-3.0, -2.0, -1.0]);
        let bb = beta_bar(&d).unwrap();
        assert!(bb > -1.0);
        assert!(g(&d, bb).unwrap().abs() < 1e-9);
        assert!(matches!(
            beta_bar(&cfg(&[-1.0, 1.0, 2.0])),
            Err(Error::NotApplicable)
        ));
    }

    #[test]
    fn branch_intervals_match_the_three_cases() {
        let iv = branch_interval(&cfg(&[1.0, 1.0, 1.0])).unwrap();
        assert_eq!(iv.len(), 1);
        assert_relative_eq!(iv[0].hi, -0.5, epsilon = 1e-11);
        assert!(iv[0].lo.is_infinite());

        let iv = branch_interval(&cfg(&[-3.0, -2.0, -1.0])).unwrap();
        assert_eq!(iv.len(), 2);
        assert_relative_eq!(iv[0].hi, -3.0);
        assert_relative_eq!(iv[1].lo, -1.0);
        assert!(iv[1].hi > -1.0);

        let iv = branch_interval(&cfg(&[-1.0, 1.0, 2.0])).unwrap();
        assert_eq!(iv.len(), 1);
        assert_relative_eq!(iv[0].hi, -1.0);
    }

    #[test]
    fn branch_point_examples() {
        let point = branch_point(&cfg(&[1.0, 1.0, 1.0]), -1.0).unwrap();
        for a in &point.alphas {
            assert_relative_eq!(*a, 1.0, epsilon = 1e-12);
        }
        // defining identity mu_j a_j^2 + beta sum_{k!=j} a_k^2 = -1
        for j in 0..3 {
            let aj2 = point.alphas[j] * point.alphas[j];
            let rest: f64 = (0..3)
                .filter(|k| *k != j)
                .map(|k| point.alphas[k] * point.alphas[k])
                .sum();
            assert_relative_eq!(aj2 - rest, -1.0, epsilon = 1e-12);
        }
        assert!(matches!(
            branch_point(&cfg(&[1.0, 2.0, 3.0]), 0.0),
            Err(Error::OutsideBranchInterval { .. })
        ));
    }

    #[test]
    fn linearization_equal_mu_reference_matrix() {
        let config = cfg(&[1.0, 1.0, 1.0]);
        let point = branch_point(&config, -1.0).unwrap();
        let lin = linearization(&config, &point);
        let expect = [[1.0, -2.0, -2.0], [-2.0, 1.0, -2.0], [-2.0, -2.0, 1.0]];
        for (i, row) in expect.iter().enumerate() {
            for (j, value) in row.iter().enumerate() {
                assert_relative_eq!(lin.matrix()[(i, j)], *value, epsilon = 1e-12);
            }
        }
        let ev = lin.eigenvalues();
        assert_relative_eq!(ev[0], -3.0, epsilon = 1e-10);
        assert_relative_eq!(ev[1], 3.0, epsilon = 1e-10);
        assert_relative_eq!(ev[2], 3.0, epsilon = 1e-10);
        // eigenvector of -3 is alpha up to scale
        let ma = lin.apply(&point.alphas);
        for (m, a) in ma.iter().zip(&point.alphas) {
            assert_relative_eq!(*m, -3.0 * a, epsilon = 1e-12);
        }
    }

    fn random_config_and_beta(rng: &mut ChaCha8Rng) -> (CouplingConfig, f64) {
        let n = [3usize, 4, 5][rng.gen_range(0..3)];
        let case = rng.gen_range(0..3);
        let mu: Vec<f64> = (0..n)
            .map(|i| match case {
                0 => rng.gen_range(0.2..5.0),
                1 => -rng.gen_range(0.2..5.0),
                _ => {
                    if i == 0 {
                        -rng.gen_range(0.2..5.0)
                    } else {
                        rng.gen_range(0.2..5.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 }
                    }
                }
            })
            .collect();
        let config = CouplingConfig::new(mu).unwrap();
        let intervals = branch_interval(&config).unwrap();
        let iv = intervals[rng.gen_range(0..intervals.len())];
        let hi = iv.hi;
        let standoff = 1e-3 * (1.0 + hi.abs());
        let beta = if iv.lo.is_infinite() {
            hi - standoff - rng.gen_range(0.0..5.0) * (1.0 + hi.abs())
        } else {
            let width = iv.hi - iv.lo;
            iv.lo + width * rng.gen_range(0.05..0.95)
        };
        (config, beta)
    }

    #[test]
    fn linearization_spectrum_is_exact_for_random_configs() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mut done = 0;
        while done < 100 {
            let (config, beta) = random_config_and_beta(&mut rng);
            let point = match branch_point(&config, beta) {
                Ok(p) => p,
                Err(_) => continue,
            };
            let fv = point.f_value;
            if (fv + 3.0).abs() < 1e-6 {
                continue; // f = -3 collides with the simple eigenvalue
            }
            let lin = linearization(&config, &point);
            let ev = lin.eigenvalues();
            let n = config.n();
            let scale = 1.0 + fv.abs();
            let minus3 = ev
                .iter()
                .filter(|e| (**e + 3.0).abs() <= 1e-10 * scale)
                .count();
            let at_f = ev
                .iter()
                .filter(|e| (**e - fv).abs() <= 1e-10 * scale)
                .count();
            assert_eq!(minus3, 1, "config {config:?} beta {beta}: ev {ev:?}");
            assert_eq!(
                at_f,
                n - 1,
                "config {config:?} beta {beta}: ev {ev:?} f {fv}"
            );
            done += 1;
        }
    }

    #[test]
    fn kernel_basis_is_orthonormal_and_eigen() {
        let config = cfg(&[1.0, 2.0, 3.0]);
        let beta = -2.0;
        let point = branch_point(&config, beta).unwrap();
        let basis = kernel_direction_basis(&config, &point);
        assert_eq!(basis.len(), 2);
        for (i, u) in basis.iter().enumerate() {
            // orthogonal to alpha
            let da = crate::linalg::dot(u, &point.alphas);
            assert!(da.abs() < 1e-12, "alpha . v = {da}");
            for (j, v) in basis.iter().enumerate() {
                let d = crate::linalg::dot(u, v);
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((d - expect).abs() < 1e-12);
            }
        }
        let lin = linearization(&config, &point);
        for v in &basis {
            let mv = lin.apply(v);
            for (m, vi) in mv.iter().zip(v) {
                assert_relative_eq!(*m, point.f_value * vi, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn equal_mu_ties_merge_poles() {
        // repeated couplings are permitted everywhere; the pole at -2 is
        // double and the analysis only sees mu_min/mu_max
        let tied = cfg(&[-2.0, -2.0, -1.0]);
        assert_eq!(classify(&tied).unwrap(), CaseKind::Defocusing);
        let bb = beta_bar(&tied).unwrap();
        assert!(bb > -1.0);
        assert!(g(&tied, bb).unwrap().abs() < 1e-9);
        let iv = branch_interval(&tied).unwrap();
        assert_eq!(iv.len(), 2);
        assert_relative_eq!(iv[0].hi, -2.0);
        assert_relative_eq!(iv[1].lo, -1.0);
        let point = branch_point(&tied, -3.0).unwrap();
        assert_relative_eq!(point.alphas[0], point.alphas[1], epsilon = 1e-14);

        let mixed_tie = cfg(&[-1.0, -1.0, 2.0]);
        assert_eq!(classify(&mixed_tie).unwrap(), CaseKind::Mixed { split: 2 });
        let iv = branch_interval(&mixed_tie).unwrap();
        assert_eq!(iv.len(), 1);
        assert_relative_eq!(iv[0].hi, -1.0);
    }

    #[test]
    fn monotonicity_of_f_in_the_monotone_cases() {
        let focusing = cfg(&[1.0, 2.0, 3.0]);
        let bb = beta_bar(&focusing).unwrap();
        for i in 1..40 {
            let beta = bb - 0.05 * i as f64;
            assert!(f_prime(&focusing, beta).unwrap() > 0.0);
        }
        let defocusing = cfg(&[-3.0, -2.0, -1.0]);
        for i in 1..40 {
            let beta = -3.0 - 0.05 * i as f64;
            assert!(f_prime(&defocusing, beta).unwrap() < 0.0);
        }
    }

    #[test]
    fn mixed_sign_rule_fails_right_of_mu1() {
        // classify = Mixed implies (beta - mu_j) g(beta) <= 0 for some j at
        // every beta > mu_1 off the poles.
        let config = cfg(&[-1.0, 1.0, 2.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut tested = 0;
        while tested < 200 {
            let beta = rng.gen_range(-1.0..6.0);
            if g(&config, beta).is_err() {
                continue;
            }
            let gv = g(&config, beta).unwrap();
            let ok = config.mu().iter().any(|mu| (beta - mu) * gv <= 0.0);
            assert!(ok, "condition held at beta = {beta} right of mu_1");
            tested += 1;
        }
    }

    proptest! {
        #[test]
        fn g_matches_naive_summation(seed in 0u64..300) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (config, beta) = random_config_and_beta(&mut rng);
            let compensated = g(&config, beta).unwrap();
            let naive: f64 = 1.0 + beta * config.mu().iter().map(|mu| 1.0 / (mu - beta)).sum::<f64>();
            prop_assert!((compensated - naive).abs() <= 1e-14 * (1.0 + naive.abs()).max(compensated.abs()));
        }

        #[test]
        fn branch_identity_holds_on_the_interval(seed in 0u64..300) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1000));
            let (config, beta) = random_config_and_beta(&mut rng);
            if let Ok(point) = branch_point(&config, beta) {
                let sum_sq: f64 = point.alphas.iter().map(|a| a * a).sum();
                for j in 0..config.n() {
                    let aj2 = point.alphas[j] * point.alphas[j];
                    let lhs = config.mu()[j] * aj2 + beta * (sum_sq - aj2);
                    prop_assert!((lhs + 1.0).abs() <= 1e-12 * (1.0 + lhs.abs()),
                        "identity violated: {lhs} at beta {beta}");
                }
                // condition (beta - mu_j) g > 0
                for mu in config.mu() {
                    prop_assert!((beta - mu) * point.g_value > 0.0);
                }
            }
        }

        #[test]
        fn branch_membership_matches_the_sign_condition(seed in 0u64..300) {
            // the branch point exists exactly where (beta - mu_j) g(beta) > 0
            // for every j
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(777));
            let (config, _) = random_config_and_beta(&mut rng);
            let beta = rng.gen_range(-12.0..8.0);
            if let Ok(gv) = g(&config, beta) {
                let condition = config.mu().iter().all(|mu| (beta - mu) * gv > 0.0);
                let constructed = branch_point(&config, beta).is_ok();
                prop_assert_eq!(condition, constructed,
                    "between condition and construction at beta {}", beta);
            }
        }

        #[test]
        fn g_prime_matches_finite_differences(seed in 0u64..100) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(31337));
            let (config, beta) = random_config_and_beta(&mut rng);
            let h = 1e-6 * (1.0 + beta.abs());
            let fd = (g(&config, beta + h).unwrap() - g(&config, beta - h).unwrap()) / (2.0 * h);
            let exact = g_prime(&config, beta).unwrap();
            prop_assert!((fd - exact).abs() <= 1e-5 * (1.0 + exact.abs()));
        }
    }
}
