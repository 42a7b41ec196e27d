//! Block reduction of partially synchronized ansatz solutions.
//!
//! Components within a block of a partition are proportional, so the system
//! collapses to one equation per block: with `h_i(beta) =
//! (sum_{k in P_i} (mu_k - beta)^{-1})^{-1}`, the effective self-coupling of
//! block i is `mu_eff_i = beta + h_i` and the within-block weights are
//! `t_j = sqrt(h_i / (mu_j - beta))`, normalized so that `sum t_j^2 = 1`.
//! The key identity `(mu_eff_i - beta)^{-1} = sum_{k in P_i}(mu_k - beta)^{-1}`
//! makes the reduced coupling function coincide with g of the full system.

use crate::coupling::CouplingConfig;
use crate::error::{Error, Result};
use crate::linalg::kahan_sum;

/// A partition of the component indices {0, ..., n-1} into disjoint blocks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    blocks: Vec<Vec<usize>>,
    n: usize,
}

impl Partition {
    /// Build from blocks; validates disjoint cover of {0, ..., n-1}.
    /// Blocks and their members are stored sorted.
    pub fn new(mut blocks: Vec<Vec<usize>>, n: usize) -> Result<Self> {
        let mut seen = vec![false; n];
        for block in &mut blocks {
            if block.is_empty() {
                return Err(Error::InvalidPartition("empty block".into()));
            }
            block.sort_unstable();
            for &j in block.iter() {
                if j >= n {
                    return Err(Error::InvalidPartition(format!(
                        "index {j} out of range for n = {n}"
                    )));
                }
                if seen[j] {
                    return Err(Error::InvalidPartition(format!("index {j} repeated")));
                }
                seen[j] = true;
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::InvalidPartition(
                "blocks do not cover all components".into(),
            ));
        }
        blocks.sort_by_key(|b| b[0]);
        Ok(Partition { blocks, n })
    }

    /// The bipartition {A, A^c}.
    pub fn bipartition(a: &[usize], n: usize) -> Result<Self> {
        let a_sorted: Vec<usize> = a.to_vec();
        let complement: Vec<usize> = (0..n).filter(|j| !a_sorted.contains(j)).collect();
        if a_sorted.is_empty() || complement.is_empty() {
            return Err(Error::InvalidPartition(
                "bipartition needs a nonempty proper subset".into(),
            ));
        }
        Partition::new(vec![a_sorted, complement], n)
    }

    pub fn single_block(n: usize) -> Self {
        Partition::new(vec![(0..n).collect()], n).expect("valid")
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    /// Number of blocks |P|.
    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Block index of component j.
    pub fn block_of(&self, j: usize) -> usize {
        self.blocks
            .iter()
            .position(|b| b.contains(&j))
            .expect("component in partition")
    }

    /// Render as "1,2|3" with 1-based component indices.
    pub fn label(&self) -> String {
        self.blocks
            .iter()
            .map(|b| {
                b.iter()
                    .map(|j| (j + 1).to_string())
                    .collect::<Vec<_>>()
                    .join(",")
            })
            .collect::<Vec<_>>()
            .join("|")
    }
}

/// The reduced |P|-component configuration at a fixed beta < mu_1.
#[derive(Debug, Clone)]
pub struct ReducedConfig {
    pub beta: f64,
    /// Effective self-coupling per block: mu_eff_i = beta + h_i(beta).
    pub mu_eff: Vec<f64>,
    /// Within-block weights t_j (one vec per block, aligned with the block's
    /// member list); positive with sum of squares 1.
    pub weights: Vec<Vec<f64>>,
    pub partition: Partition,
}

/// Reduce the full system to one component per block at `beta < mu_1`.
pub fn reduce(config: &CouplingConfig, partition: &Partition, beta: f64) -> Result<ReducedConfig> {
    if partition.n() != config.n() {
        return Err(Error::InvalidPartition(format!(
            "partition is over {} components, config has {}",
            partition.n(),
            config.n()
        )));
    }
    if beta >= config.mu_min() {
        return Err(Error::InvalidBeta {
            beta,
            mu1: config.mu_min(),
        });
    }
    let mu = config.mu();
    let mut mu_eff = Vec::with_capacity(partition.len());
    let mut weights = Vec::with_capacity(partition.len());
    for block in partition.blocks() {
        let h = 1.0 / kahan_sum(block.iter().map(|&j| 1.0 / (mu[j] - beta)));
        mu_eff.push(beta + h);
        weights.push(block.iter().map(|&j| (h / (mu[j] - beta)).sqrt()).collect());
    }
    Ok(ReducedConfig {
        beta,
        mu_eff,
        weights,
        partition: partition.clone(),
    })
}

/// Lift a reduced solution (one grid function per block) to the full system:
/// u_j = t_j v_i for j in block i.
pub fn lift(v: &[Vec<f64>], reduced: &ReducedConfig) -> Vec<Vec<f64>> {
    assert_eq!(
        v.len(),
        reduced.partition.len(),
        "one grid function per block"
    );
    let n = reduced.partition.n();
    let mut full: Vec<Vec<f64>> = vec![Vec::new(); n];
    for (i, block) in reduced.partition.blocks().iter().enumerate() {
        for (pos, &j) in block.iter().enumerate() {
            let t = reduced.weights[i][pos];
            full[j] = v[i].iter().map(|x| t * x).collect();
        }
    }
    full
}

/// All bipartitions {A, A^c} of {0, ..., n-1}, one per complement pair:
/// exactly 2^{n-1} - 1 of them.
pub fn enumerate_bipartitions(n: usize) -> Vec<Partition> {
    assert!(n >= 2, "bipartitions need n >= 2");
    assert!(n < usize::BITS as usize, "n too large to enumerate");
    // subsets containing component 0, excluding the full set: canonical
    // representatives of complement pairs
    let mut result = Vec::with_capacity((1usize << (n - 1)) - 1);
    for mask in 0..(1usize << (n - 1)) {
        let full_mask = (mask << 1) | 1; // component 0 always in A
        if full_mask == (1 << n) - 1 {
            continue;
        }
        let a: Vec<usize> = (0..n).filter(|j| full_mask >> j & 1 == 1).collect();
        result.push(Partition::bipartition(&a, n).expect("valid bipartition"));
    }
    result
}

/// The finest partition grouping components that are pairwise proportional
/// within relative tolerance `tol` (ratio variance test). Ratios are only
/// measured at nodes where the reference component exceeds
/// 1e-8 x the overall sup norm.
pub fn detect_synchrony(u: &[Vec<f64>], tol: f64) -> Partition {
    let n = u.len();
    let sup = u
        .iter()
        .flat_map(|c| c.iter())
        .fold(0.0f64, |a, &v| a.max(v.abs()));
    let floor = 1e-8 * sup;
    let proportional = |a: &[f64], b: &[f64]| -> bool {
        let mut ratios: Vec<f64> = Vec::new();
        for (x, y) in a.iter().zip(b) {
            if x.abs() > floor {
                ratios.push(y / x);
            }
        }
        if ratios.is_empty() {
            return false;
        }
        let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
        let spread = ratios
            .iter()
            .map(|r| (r - mean).abs())
            .fold(0.0f64, f64::max);
        spread <= tol * mean.abs().max(1e-300)
    };
    // union-find over pairwise proportionality
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut Vec<usize>, i: usize) -> usize {
        if parent[i] != i {
            let r = find(parent, parent[i]);
            parent[i] = r;
        }
        parent[i]
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if proportional(&u[i], &u[j]) {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri] = rj;
                }
            }
        }
    }
    let mut blocks: Vec<Vec<usize>> = Vec::new();
    let mut root_block: std::collections::HashMap<usize, usize> = std::collections::HashMap::new();
    for j in 0..n {
        let r = find(&mut parent, j);
        let idx = *root_block.entry(r).or_insert_with(|| {
            blocks.push(Vec::new());
            blocks.len() - 1
        });
        blocks[idx].push(j);
    }
    Partition::new(blocks, n).expect("union-find yields a partition")
}
