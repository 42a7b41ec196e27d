//! Bifurcation points on the synchronized branch: roots of f(beta) =
//! lambda_k, Morse indices, and globality classification.
//!
//! Case analysis: focusing f increases from its horizontal asymptote to
//! +infinity, so every eigenvalue above the asymptote is crossed exactly
//! once; defocusing f decreases from the asymptote to -1 on (-inf, mu_1) and
//! stays below -1 on (mu_n, beta_bar), so only eigenvalues in
//! (-1, -1 + 2/(n-1)) are crossed, each once; in the mixed cases f need not
//! be monotone and every sign change found by adaptive sampling is reported.

use crate::coupling::{
    beta_bar, branch_interval, classify, f, f_asymptote, f_prime, CaseKind, CouplingConfig,
};
use crate::error::{Error, Result};
use crate::spectrum::WeightedSpectrum;

/// |f'(beta_k)| below this flags the crossing as degenerate: the Morse-index
/// jump argument needs a transversal crossing.
pub const DEGENERACY_THRESHOLD: f64 = 1e-8;

/// Base number of sample points for the mixed-case sign-change scan.
const MIXED_GRID: usize = 4096;

/// A detected bifurcation point on the synchronized branch.
#[derive(Debug, Clone)]
pub struct BifurcationPoint {
    pub beta_k: f64,
    pub lambda_k: f64,
    /// 1-based index of lambda_k among the distinct eigenvalues.
    pub k: usize,
    /// Multiplicity of lambda_k.
    pub n_k: usize,
    /// Kernel dimension (n-1) n_k of the linearized system.
    pub kernel_dim: usize,
    pub f_prime_at: f64,
    /// |f'(beta_k)| below the degeneracy threshold.
    pub degenerate: bool,
    /// Whether (n-1) n_k is odd, so the full-system bifurcation is global.
    pub global_full: bool,
    /// Morse index just left / right of beta_k; None when the computed
    /// spectrum cannot certify the count there.
    pub morse_left: Option<usize>,
    pub morse_right: Option<usize>,
}

/// True iff (partition_size - 1) * n_k is odd, the parity condition for a
/// global branch of partition-synchronized solutions.
pub fn classify_globality(point: &BifurcationPoint, partition_size: usize) -> bool {
    (partition_size - 1) * point.n_k % 2 == 1
}

/// Morse index of the synchronized solution at `beta`:
/// (n - 1) * sum of multiplicities of eigenvalues below f(beta). The -3
/// block never contributes since all lambda_k >= -1 > -3.
pub fn morse_index(
    config: &CouplingConfig,
    spectrum: &WeightedSpectrum,
    beta: f64,
) -> Result<usize> {
    let fv = f(config, beta)?;
    for (lam, _) in spectrum.eigenvalues.iter().zip(&spectrum.multiplicities) {
        let tol = 1e-9 * (1.0 + lam.abs());
        if (fv - lam).abs() <= tol {
            return Err(Error::TooCloseToCrossing {
                f_value: fv,
                lambda: *lam,
                tol,
            });
        }
    }
    if fv > spectrum.lambda_max() {
        return Err(Error::InsufficientSpectrum(format!(
            "f(beta) = {fv} exceeds the largest computed eigenvalue {}",
            spectrum.lambda_max()
        )));
    }
    let below: usize = spectrum
        .eigenvalues
        .iter()
        .zip(&spectrum.multiplicities)
        .filter(|(lam, _)| **lam < fv)
        .map(|(_, n)| *n)
        .sum();
    Ok((config.n() - 1) * below)
}

/// Left cutoff: beta below which f sits within `tol` of its horizontal
/// asymptote, making the unbounded search interval effectively finite.
fn asymptote_cutoff(config: &CouplingConfig, hi: f64, tol: f64) -> f64 {
    let fa = f_asymptote(config.n());
    let mut beta = hi - (1.0 + hi.abs());
    for _ in 0..200 {
        match f(config, beta) {
            Ok(fv) if (fv - fa).abs() < tol => return beta,
            _ => beta = hi - 2.0 * (hi - beta),
        }
    }
    beta
}

/// Bisect f(beta) = lambda on a sign-changing bracket, then polish with a
/// few Newton steps on f.
fn refine_root(config: &CouplingConfig, mut lo: f64, mut hi: f64, lambda: f64) -> Result<f64> {
    let mut flo = f(config, lo)? - lambda;
    let fhi = f(config, hi)? - lambda;
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() {
        return Err(Error::SolverFailure(format!(
            "root bracket [{lo}, {hi}] has no sign change for lambda = {lambda}"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let fmid = f(config, mid)? - lambda;
        if fmid == 0.0 {
            lo = mid;
            hi = mid;
            break;
        }
        if fmid.signum() == flo.signum() {
            lo = mid;
            flo = fmid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-12 * (1.0 + mid.abs()) {
            break;
        }
    }
    let mut beta = 0.5 * (lo + hi);
    for _ in 0..4 {
        let fv = f(config, beta)? - lambda;
        let fp = f_prime(config, beta)?;
        if fp.abs() < DEGENERACY_THRESHOLD {
            break;
        }
        let next = beta - fv / fp;
        if next > lo && next < hi {
            beta = next;
        } else {
            break;
        }
    }
    Ok(beta)
}

/// Find all bifurcation points on the synchronized branch reachable from the
/// computed spectrum, sorted by beta.
pub fn find_bifurcations(
    config: &CouplingConfig,
    spectrum: &WeightedSpectrum,
) -> Result<Vec<BifurcationPoint>> {
    let n = config.n();
    let fa = f_asymptote(n);
    let margin = 1e-6 * (1.0 + fa.abs());
    let case = classify(config)?;
    let intervals = branch_interval(config)?;

    // eligible eigenvalues must be reachable by the computed spectrum
    match case {
        CaseKind::Focusing | CaseKind::Defocusing => {
            if spectrum.lambda_max() < fa - margin {
                return Err(Error::InsufficientSpectrum(format!(
                    "largest computed eigenvalue {} is below the f-asymptote {fa}",
                    spectrum.lambda_max()
                )));
            }
        }
        CaseKind::Mixed { .. } => {}
    }

    let mut roots: Vec<(f64, usize)> = Vec::new();
    match case {
        CaseKind::Focusing => {
            // f increases from fa to +infinity on (-inf, beta_bar)
            let bb = intervals[0].hi;
            let beta_min = asymptote_cutoff(config, bb, 1e-6);
            for (idx, &lam) in spectrum.eigenvalues.iter().enumerate() {
                if lam <= fa {
                    continue;
                }
                // left end of the bracket: grow until f < lambda
                let mut lo = beta_min;
                let mut width = 1.0 + lo.abs();
                let mut bracketed = false;
                for _ in 0..200 {
                    if f(config, lo)? < lam {
                        bracketed = true;
                        break;
                    }
                    lo -= width;
                    width *= 2.0;
                }
                if !bracketed {
                    continue; // lambda within noise of the asymptote
                }
                // right end: just inside beta_bar, where f blows up past any
                // desk-scale eigenvalue; hitting the g-pole tolerance there
                // means the crossing is not resolvable
                let hi = bb - 1e-12 * (1.0 + bb.abs());
                match f(config, hi) {
                    Ok(fv) if fv > lam => {}
                    _ => continue,
                }
                let beta_k = refine_root(config, lo, hi, lam)?;
                roots.push((beta_k, idx + 1));
            }
        }
        CaseKind::Defocusing => {
            // roots only in (-inf, mu_1) and only for lambda in (-1, fa);
            // f stays below -1 on (mu_n, beta_bar), so nothing is reported
            // there.
            let mu1 = config.mu_min();
            let beta_min = asymptote_cutoff(config, mu1, 1e-6);
            // eigenvalues indistinguishable from -1 at cluster resolution
            // belong to the omega direction, where f = -1 is never attained
            let lambda1_guard = -1.0 + (10.0 * spectrum.cluster_tol).max(1e-12);
            for (idx, &lam) in spectrum.eigenvalues.iter().enumerate() {
                if lam <= lambda1_guard || lam >= fa {
                    continue;
                }
                let lo = beta_min;
                // approach the pole at mu_1 until f < lambda (f -> -1 there);
                // hitting the pole tolerance means the crossing is not
                // resolvable from this side and the eigenvalue is skipped
                let mut standoff = 1e-6 * (1.0 + mu1.abs());
                let mut hi = mu1 - standoff;
                let mut bracketed = false;
                for _ in 0..200 {
                    match f(config, hi) {
                        Ok(fv) if fv < lam => {
                            bracketed = true;
                            break;
                        }
                        Ok(_) => {
                            standoff *= 0.5;
                            hi = mu1 - standoff;
                        }
                        Err(_) => break,
                    }
                }
                if !bracketed {
                    continue;
                }
                let beta_k = refine_root(config, lo, hi, lam)?;
                roots.push((beta_k, idx + 1));
            }
        }
        CaseKind::Mixed { .. } => {
            // f may be non-monotone: scan a fine grid, add the extrema of f
            // (sign changes of g', hence of f') as extra knots, and bisect
            // every sign-changing sub-interval.
            let mu1 = config.mu_min();
            let beta_min = asymptote_cutoff(config, mu1, 1e-6);
            let hi = mu1 - 1e-9 * (1.0 + mu1.abs());
            let mut knots: Vec<f64> = (0..=MIXED_GRID)
                .map(|i| beta_min + (hi - beta_min) * i as f64 / MIXED_GRID as f64)
                .collect();
            // locate extrema between grid points via f' sign changes
            let fp: Vec<f64> = knots
                .iter()
                .map(|&b| f_prime(config, b).unwrap_or(0.0))
                .collect();
            let mut extrema = Vec::new();
            for i in 0..MIXED_GRID {
                if fp[i] * fp[i + 1] < 0.0 {
                    let (mut lo, mut hi) = (knots[i], knots[i + 1]);
                    for _ in 0..80 {
                        let mid = 0.5 * (lo + hi);
                        if f_prime(config, mid)?.signum() == fp[i].signum() {
                            lo = mid;
                        } else {
                            hi = mid;
                        }
                    }
                    extrema.push(0.5 * (lo + hi));
                }
            }
            knots.extend(extrema);
            knots.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let fvals: Vec<f64> = knots.iter().map(|&b| f(config, b)).collect::<Result<_>>()?;
            let spectrum_sup = spectrum.lambda_max();
            let f_sup = fvals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            if f_sup > spectrum_sup + margin {
                return Err(Error::InsufficientSpectrum(format!(
                    "f reaches {f_sup} on the branch interval but the largest \
                     computed eigenvalue is {spectrum_sup}"
                )));
            }
            let lambda1_guard = -1.0 + (10.0 * spectrum.cluster_tol).max(1e-12);
            for (idx, &lam) in spectrum.eigenvalues.iter().enumerate() {
                if lam <= lambda1_guard {
                    continue; // f > -1 strictly in the mixed cases
                }
                for i in 0..knots.len() - 1 {
                    let (a, b) = (fvals[i] - lam, fvals[i + 1] - lam);
                    if a == 0.0 {
                        // exact hit on a knot; report once
                        roots.push((knots[i], idx + 1));
                    } else if a * b < 0.0 {
                        let beta_k = refine_root(config, knots[i], knots[i + 1], lam)?;
                        roots.push((beta_k, idx + 1));
                    }
                }
            }
        }
    }

    roots.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());

    // poles of the parameterization bound the Morse probe offsets
    let mut barriers: Vec<f64> = config.mu().to_vec();
    if let Ok(bb) = beta_bar(config) {
        barriers.push(bb);
    }

    let mut points = Vec::with_capacity(roots.len());
    for (i, &(beta_k, k)) in roots.iter().enumerate() {
        let lambda_k = spectrum.eigenvalues[k - 1];
        let n_k = spectrum.multiplicities[k - 1];
        let fp = f_prime(config, beta_k)?;
        let degenerate = fp.abs() < DEGENERACY_THRESHOLD;
        // epsilon: half the distance to the nearest other root or pole,
        // capped at 1e-3
        let mut nearest = f64::INFINITY;
        if i > 0 {
            nearest = nearest.min(beta_k - roots[i - 1].0);
        }
        if i + 1 < roots.len() {
            nearest = nearest.min(roots[i + 1].0 - beta_k);
        }
        for b in &barriers {
            let d = (b - beta_k).abs();
            if d > 0.0 {
                nearest = nearest.min(d);
            }
        }
        let eps = (0.5 * nearest).min(1e-3);
        let morse_left = morse_index(config, spectrum, beta_k - eps).ok();
        let morse_right = morse_index(config, spectrum, beta_k + eps).ok();
        points.push(BifurcationPoint {
            beta_k,
            lambda_k,
            k,
            n_k,
            kernel_dim: (n - 1) * n_k,
            f_prime_at: fp,
            degenerate,
            global_full: (n - 1) * n_k % 2 == 1,
            morse_left,
            morse_right,
        });
    }
    Ok(points)
}
