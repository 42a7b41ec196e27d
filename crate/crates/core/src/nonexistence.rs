//! Algebraic nonexistence criteria for positive solutions of the general
//! system with per-component linear coefficients a_j.
//!
//! Four parameter regions exclude positive solutions:
//! (i)   a_j <= -Lambda_1 and mu_j > 0 for some j, with beta >= 0;
//! (ii)  a_j <= a_i and mu_i <= beta <= mu_j for some i < j, one strict;
//! (iii) focusing couplings, a_j <= -Lambda_1 for all j, beta >= beta_bar,
//!       one strict;
//! (iv)  mixed couplings, a_n <= a_1 <= -Lambda_1, beta >= mu_1, one strict.
//! Comparisons on user-supplied parameters are exact; only beta_bar carries
//! a root-finding tolerance and firings within 1e-10 of that boundary are
//! flagged as marginal.

use crate::coupling::{beta_bar, branch_interval, CouplingConfig};
use crate::error::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// The general system's parameters; components are kept sorted by mu with
/// the a_j carried along, matching the index convention of the criteria.
#[derive(Debug, Clone)]
pub struct GeneralConfig {
    a: Vec<f64>,
    mu: Vec<f64>,
    pub beta: f64,
    pub lambda1: f64,
}

impl GeneralConfig {
    pub fn new(a: Vec<f64>, mu: Vec<f64>, beta: f64, lambda1: f64) -> Result<Self> {
        if a.len() != mu.len() {
            return Err(Error::InvalidConfig(format!(
                "{} linear coefficients for {} couplings",
                a.len(),
                mu.len()
            )));
        }
        if mu.len() < 3 {
            return Err(Error::InvalidConfig("need at least 3 components".into()));
        }
        if lambda1 <= 0.0 || lambda1.is_nan() {
            return Err(Error::InvalidConfig(format!(
                "Lambda_1 = {lambda1} must be positive"
            )));
        }
        if a.iter().chain(mu.iter()).any(|v| !v.is_finite()) || !beta.is_finite() {
            return Err(Error::InvalidConfig("parameters must be finite".into()));
        }
        let mut pairs: Vec<(f64, f64)> = mu.into_iter().zip(a).collect();
        pairs.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
        let (mu, a) = pairs.into_iter().unzip();
        Ok(GeneralConfig {
            a,
            mu,
            beta,
            lambda1,
        })
    }

    pub fn n(&self) -> usize {
        self.mu.len()
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    fn is_focusing(&self) -> bool {
        self.mu[0] > 0.0
    }

    fn is_defocusing(&self) -> bool {
        *self.mu.last().unwrap() < 0.0
    }

    fn is_mixed(&self) -> bool {
        !self.is_focusing() && !self.is_defocusing()
    }
}

/// A criterion that fired, with its witness indices (1-based).
#[derive(Debug, Clone, PartialEq)]
pub enum Firing {
    /// Witness component j: a_j <= -Lambda_1, mu_j > 0, beta >= 0.
    I { j: usize },
    /// Witness pair i < j: a_j <= a_i, mu_i <= beta <= mu_j, one strict.
    II { i: usize, j: usize },
    /// beta >= beta_bar with all a_j <= -Lambda_1; marginal when beta sits
    /// within 1e-10 of the beta_bar boundary.
    III { boundary_marginal: bool },
    /// a_n <= a_1 <= -Lambda_1 and beta >= mu_1, one strict.
    IV,
}

impl Firing {
    pub fn criterion_name(&self) -> &'static str {
        match self {
            Firing::I { .. } => "i",
            Firing::II { .. } => "ii",
            Firing::III { .. } => "iii",
            Firing::IV => "iv",
        }
    }
}

/// Outcome of testing all criteria.
#[derive(Debug, Clone)]
pub struct NonexistenceVerdict {
    pub fired: Vec<Firing>,
    /// Computed whenever criterion (iii) was tested (focusing couplings).
    pub beta_bar: Option<f64>,
}

impl NonexistenceVerdict {
    pub fn any_fired(&self) -> bool {
        !self.fired.is_empty()
    }
}

/// Evaluate every criterion; (iii) is only tested for focusing couplings and
/// (iv) only in the mixed cases.
pub fn evaluate(config: &GeneralConfig) -> NonexistenceVerdict {
    let n = config.n();
    let (a, mu, beta, l1) = (&config.a, &config.mu, config.beta, config.lambda1);
    let mut fired = Vec::new();

    // (i): first witness j
    if beta >= 0.0 {
        if let Some(j) = (0..n).position(|j| a[j] <= -l1 && mu[j] > 0.0) {
            fired.push(Firing::I { j: j + 1 });
        }
    }

    // (ii): first witness pair in lexicographic order
    'outer: for i in 0..n {
        for j in (i + 1)..n {
            let ordered = a[j] <= a[i] && mu[i] <= beta && beta <= mu[j];
            let strict = a[j] < a[i] || mu[i] < beta || beta < mu[j];
            if ordered && strict {
                fired.push(Firing::II { i: i + 1, j: j + 1 });
                break 'outer;
            }
        }
    }

    // (iii): focusing only
    let mut bb_out = None;
    if config.is_focusing() {
        let coupling = CouplingConfig::new(mu.clone()).expect("n >= 3, all mu > 0");
        let bb = beta_bar(&coupling).expect("focusing has a beta_bar");
        bb_out = Some(bb);
        let all_indefinite = a.iter().all(|&aj| aj <= -l1);
        let strict = a.iter().any(|&aj| aj < -l1) || beta > bb;
        if all_indefinite && beta >= bb && strict {
            let boundary_marginal = (beta - bb).abs() <= 1e-10 * (1.0 + bb.abs());
            fired.push(Firing::III { boundary_marginal });
        }
    }

    // (iv): mixed only
    if config.is_mixed() {
        let (a1, an) = (a[0], a[n - 1]);
        let ordered = an <= a1 && a1 <= -l1 && beta >= mu[0];
        let strict = an < a1 || a1 < -l1 || beta > mu[0];
        if ordered && strict {
            fired.push(Firing::IV);
        }
    }

    NonexistenceVerdict {
        fired,
        beta_bar: bb_out,
    }
}

/// For the symmetric system (a = -1, Lambda_1 < 1): no criterion may fire
/// anywhere on the synchronized branch interval. Samples `count` betas
/// deterministically from `seed`.
pub fn consistency_with_branch(
    config: &CouplingConfig,
    lambda1: f64,
    count: usize,
    seed: u64,
) -> Result<bool> {
    if lambda1 <= 0.0 || lambda1 >= 1.0 || lambda1.is_nan() {
        return Err(Error::InvalidConfig(format!(
            "symmetric system needs 0 < Lambda_1 < 1, got {lambda1}"
        )));
    }
    let intervals = branch_interval(config)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = vec![-1.0; config.n()];
    for s in 0..count {
        let iv = intervals[s % intervals.len()];
        let standoff = 1e-6 * (1.0 + iv.hi.abs());
        let beta = if iv.lo.is_infinite() {
            iv.hi - standoff - rng.gen_range(0.0..50.0) * (1.0 + iv.hi.abs())
        } else {
            let w = iv.hi - iv.lo;
            iv.lo + w * rng.gen_range(1e-6..1.0 - 1e-6)
        };
        let general = GeneralConfig::new(a.clone(), config.mu().to_vec(), beta, lambda1)?;
        let verdict = evaluate(&general);
        if verdict.any_fired() {
            return Ok(false);
        }
    }
    Ok(true)
}
