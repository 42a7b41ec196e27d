//! Output records and their CSV/JSON serialization. Floating-point fields
//! are written with 17 significant digits so re-parsing is bit-exact.

use anyhow::{Context, Result};
use cnls_core::{BifurcationPoint, Partition};
use serde::{Deserialize, Serialize};
use std::path::Path;

/// One detected bifurcation point.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PointRecord {
    pub beta_k: f64,
    pub lambda_k: f64,
    pub k: usize,
    pub n_k: usize,
    pub kernel_dim: usize,
    pub f_prime: f64,
    pub degenerate: bool,
    pub global_full: bool,
    pub morse_left: Option<usize>,
    pub morse_right: Option<usize>,
}

impl From<&BifurcationPoint> for PointRecord {
    fn from(p: &BifurcationPoint) -> Self {
        PointRecord {
            beta_k: p.beta_k,
            lambda_k: p.lambda_k,
            k: p.k,
            n_k: p.n_k,
            kernel_dim: p.kernel_dim,
            f_prime: p.f_prime_at,
            degenerate: p.degenerate,
            global_full: p.global_full,
            morse_left: p.morse_left,
            morse_right: p.morse_right,
        }
    }
}

/// One point of a (synchronized or bifurcating) branch, lifted to the full
/// n components.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct BranchRecord {
    pub branch_id: String,
    pub partition: String,
    pub step: usize,
    pub beta: f64,
    /// Mass-weighted L2 norm per component.
    pub norms: Vec<f64>,
    /// Minimum node value per component.
    pub mins: Vec<f64>,
    pub residual: f64,
}

/// A beta-interval excluded by one nonexistence criterion; `None` bounds are
/// unbounded.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ExclusionRecord {
    pub criterion: String,
    pub beta_lo: Option<f64>,
    pub beta_hi: Option<f64>,
}

/// CSV-safe partition label: members joined by `+`, blocks by `|`.
pub fn partition_label(p: &Partition) -> String {
    p.blocks()
        .iter()
        .map(|b| {
            b.iter()
                .map(|j| (j + 1).to_string())
                .collect::<Vec<_>>()
                .join("+")
        })
        .collect::<Vec<_>>()
        .join("|")
}

/// 17 significant digits: enough to reproduce any f64 exactly.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn branches_csv(records: &[BranchRecord], n: usize) -> String {
    let mut header = String::from("branch_id,partition,step,beta");
    for j in 1..=n {
        header.push_str(&format!(",norm_{j}"));
    }
    for j in 1..=n {
        header.push_str(&format!(",min_{j}"));
    }
    header.push_str(",residual\n");
    let mut out = header;
    for r in records {
        out.push_str(&r.branch_id);
        out.push(',');
        out.push_str(&r.partition);
        out.push(',');
        out.push_str(&r.step.to_string());
        out.push(',');
        out.push_str(&fmt_f64(r.beta));
        for v in &r.norms {
            out.push(',');
            out.push_str(&fmt_f64(*v));
        }
        for v in &r.mins {
            out.push(',');
            out.push_str(&fmt_f64(*v));
        }
        out.push(',');
        out.push_str(&fmt_f64(r.residual));
        out.push('\n');
    }
    out
}

#[cfg(test)]
pub fn parse_branches_csv(text: &str) -> Result<Vec<BranchRecord>> {
    let mut lines = text.lines();
    let header = lines.next().context("empty csv")?;
    let cols: Vec<&str> = header.split(',').collect();
    let n = cols.iter().filter(|c| c.starts_with("norm_")).count();
    let mut records = Vec::new();
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        anyhow::ensure!(fields.len() == 4 + 2 * n + 1, "bad csv row `{line}`");
        let parse =
            |s: &str| -> Result<f64> { s.parse().with_context(|| format!("bad float `{s}`")) };
        records.push(BranchRecord {
            branch_id: fields[0].to_string(),
            partition: fields[1].to_string(),
            step: fields[2].parse().context("bad step")?,
            beta: parse(fields[3])?,
            norms: fields[4..4 + n]
                .iter()
                .map(|s| parse(s))
                .collect::<Result<_>>()?,
            mins: fields[4 + n..4 + 2 * n]
                .iter()
                .map(|s| parse(s))
                .collect::<Result<_>>()?,
            residual: parse(fields[4 + 2 * n])?,
        });
    }
    Ok(records)
}

pub fn points_csv(records: &[PointRecord]) -> String {
    let mut out = String::from(
        "beta_k,lambda_k,k,n_k,kernel_dim,f_prime,degenerate,global_full,morse_left,morse_right\n",
    );
    let opt = |v: Option<usize>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            fmt_f64(r.beta_k),
            fmt_f64(r.lambda_k),
            r.k,
            r.n_k,
            r.kernel_dim,
            fmt_f64(r.f_prime),
            r.degenerate,
            r.global_full,
            opt(r.morse_left),
            opt(r.morse_right),
        ));
    }
    out
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).context("serialize json")?;
    std::fs::write(path, text).with_context(|| format!("write {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let records = vec![BranchRecord {
            branch_id: "S1".into(),
            partition: "1|2+3".into(),
            step: 4,
            beta: -1.2345678901234568,
            norms: vec![0.1 + 0.2, std::f64::consts::PI],
            mins: vec![-1e-17, 2.0f64.sqrt()],
            residual: 3.333333333333333e-10,
        }];
        let csv = branches_csv(&records, 2);
        let parsed = parse_branches_csv(&csv).unwrap();
        assert_eq!(parsed, records);
    }

    #[test]
    fn fmt_f64_has_17_significant_digits() {
        let s = fmt_f64(1.0 / 3.0);
        let mantissa = s.split('e').next().unwrap().replace(['-', '.'], "");
        assert_eq!(mantissa.len(), 17, "{s}");
        let back: f64 = s.parse().unwrap();
        assert_eq!(back, 1.0 / 3.0);
    }
}
