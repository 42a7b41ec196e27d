//! Run configuration: flat `section.key = value` files plus flag overrides.
//! Unknown keys are rejected with a diagnostic naming the key.

use anyhow::{anyhow, bail, Context, Result};
use cnls_core::DomainSpec;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub domain: DomainSpec,
    pub mesh_points: usize,
    pub ground_tol: f64,
    pub mu: Vec<f64>,
    pub a: Option<Vec<f64>>,
    pub beta: Option<f64>,
    pub lambda1: Option<f64>,
    pub k_max: usize,
    pub cluster_tol: f64,
    pub ds: f64,
    pub ds_min: f64,
    pub ds_max: f64,
    pub corrector_tol: f64,
    pub max_steps: usize,
    pub max_corrector_iters: usize,
    pub kick_amplitude: Option<f64>,
    /// 0-based A-sets of the bipartitions to continue; None = all.
    pub branch_sets: Option<Vec<Vec<usize>>>,
    /// How many bifurcation points the diagram continues branches from.
    pub max_bifurcations: usize,
    pub branch_samples: usize,
    pub out_dir: PathBuf,
    pub formats: Vec<Format>,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            domain: DomainSpec::Interval {
                length: 2.0 * std::f64::consts::PI,
            },
            mesh_points: 512,
            ground_tol: 1e-10,
            mu: vec![1.0, 2.0, 3.0],
            a: None,
            beta: None,
            lambda1: None,
            k_max: 20,
            cluster_tol: 1e-7,
            ds: 1e-2,
            ds_min: 1e-6,
            ds_max: 1e-1,
            corrector_tol: 1e-9,
            max_steps: 500,
            max_corrector_iters: 8,
            kick_amplitude: None,
            branch_sets: None,
            max_bifurcations: 3,
            branch_samples: 200,
            out_dir: PathBuf::from("out"),
            formats: vec![Format::Json, Format::Csv],
            seed: 0,
        }
    }
}

pub fn parse_float_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<f64>()
                .with_context(|| format!("bad number `{t}`"))
        })
        .collect()
}

/// Branch sets like "1;2;1,2" (1-based in the file, 0-based in memory).
fn parse_branch_sets(s: &str) -> Result<Vec<Vec<usize>>> {
    s.split(';')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|set| {
            set.split(',')
                .map(str::trim)
                .map(|t| {
                    let one_based: usize = t
                        .parse()
                        .with_context(|| format!("bad component index `{t}`"))?;
                    if one_based == 0 {
                        bail!("component indices are 1-based");
                    }
                    Ok(one_based - 1)
                })
                .collect()
        })
        .collect()
}

pub fn parse_formats(s: &str) -> Result<Vec<Format>> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| match t {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(anyhow!("unknown format `{other}` (expected csv or json)")),
        })
        .collect()
}

impl RunConfig {
    /// Apply one dotted key. Every key the file format knows is handled
    /// here; anything else is an error naming the key.
    fn apply(&mut self, key: &str, value: &str, domain_kind: &mut DomainKeys) -> Result<()> {
        let bad = |what: &str| format!("key `{key}`: bad {what} `{value}`");
        match key {
            "domain.kind" => match value {
                "interval" => domain_kind.kind = Some(Kind::Interval),
                "ball" => domain_kind.kind = Some(Kind::Ball),
                _ => bail!("key `domain.kind`: expected `interval` or `ball`, got `{value}`"),
            },
            "domain.length" => domain_kind.length = Some(value.parse().context(bad("number"))?),
            "domain.radius" => domain_kind.radius = Some(value.parse().context(bad("number"))?),
            "domain.dimension" => {
                domain_kind.dimension = Some(value.parse().context(bad("integer"))?)
            }
            "mesh.points" => self.mesh_points = value.parse().context(bad("integer"))?,
            "ground_state.tol" => self.ground_tol = value.parse().context(bad("number"))?,
            "coupling.mu" => self.mu = parse_float_list(value)?,
            "coupling.a" => self.a = Some(parse_float_list(value)?),
            "coupling.beta" => self.beta = Some(value.parse().context(bad("number"))?),
            "coupling.lambda1" => self.lambda1 = Some(value.parse().context(bad("number"))?),
            "spectrum.k_max" => self.k_max = value.parse().context(bad("integer"))?,
            "spectrum.cluster_tol" => self.cluster_tol = value.parse().context(bad("number"))?,
            "continuation.ds" => self.ds = value.parse().context(bad("number"))?,
            "continuation.ds_min" => self.ds_min = value.parse().context(bad("number"))?,
            "continuation.ds_max" => self.ds_max = value.parse().context(bad("number"))?,
            "continuation.corrector_tol" => {
                self.corrector_tol = value.parse().context(bad("number"))?
            }
            "continuation.max_steps" => self.max_steps = value.parse().context(bad("integer"))?,
            "continuation.max_corrector_iters" => {
                self.max_corrector_iters = value.parse().context(bad("integer"))?
            }
            "continuation.kick_amplitude" => {
                self.kick_amplitude = Some(value.parse().context(bad("number"))?)
            }
            "continuation.branch_sets" => self.branch_sets = Some(parse_branch_sets(value)?),
            "continuation.max_bifurcations" => {
                self.max_bifurcations = value.parse().context(bad("integer"))?
            }
            "branch.samples" => self.branch_samples = value.parse().context(bad("integer"))?,
            "output.directory" => self.out_dir = PathBuf::from(value),
            "output.formats" => self.formats = parse_formats(value)?,
            "seed" => self.seed = value.parse().context(bad("integer"))?,
            other => bail!("unknown configuration key `{other}`"),
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config file {}", path.display()))?;
        let mut config = RunConfig::default();
        let mut domain = DomainKeys::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                anyhow!("line {}: expected `key = value`, got `{raw}`", lineno + 1)
            })?;
            config.apply(key.trim(), value.trim(), &mut domain)?;
        }
        config.domain = domain.build()?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.mesh_points < 8 {
            bail!("mesh.points must be at least 8");
        }
        if self.mu.len() < 3 {
            bail!("coupling.mu needs at least 3 components");
        }
        let floats = self
            .mu
            .iter()
            .chain(self.a.iter().flatten())
            .chain(self.beta.iter())
            .chain(self.lambda1.iter());
        for v in floats {
            if !v.is_finite() {
                bail!("coupling parameters must be finite, got {v}");
            }
        }
        if let Some(a) = &self.a {
            if a.len() != self.mu.len() {
                bail!(
                    "coupling.a has {} entries for {} couplings",
                    a.len(),
                    self.mu.len()
                );
            }
        }
        if self.k_max < 2 {
            bail!("spectrum.k_max must be at least 2");
        }
        if !(self.ds_min > 0.0 && self.ds_min <= self.ds && self.ds <= self.ds_max) {
            bail!("continuation steps must satisfy 0 < ds_min <= ds <= ds_max");
        }
        if self.corrector_tol <= 0.0 || self.ground_tol <= 0.0 || self.cluster_tol <= 0.0 {
            bail!("tolerances must be positive");
        }
        if let Some(sets) = &self.branch_sets {
            for set in sets {
                if set.is_empty() || set.iter().any(|&j| j >= self.mu.len()) {
                    bail!(
                        "continuation.branch_sets: indices must be in 1..={}",
                        self.mu.len()
                    );
                }
            }
        }
        if self.formats.is_empty() {
            bail!("output.formats must name at least one of csv, json");
        }
        Ok(())
    }

    /// Flat key = value echo for the run metadata.
    pub fn echo(&self) -> BTreeMap<String, String> {
        let mut map = BTreeMap::new();
        match self.domain {
            DomainSpec::Interval { length } => {
                map.insert("domain.kind".into(), "interval".into());
                map.insert("domain.length".into(), format!("{length:.17e}"));
            }
            DomainSpec::Ball { radius, dimension } => {
                map.insert("domain.kind".into(), "ball".into());
                map.insert("domain.radius".into(), format!("{radius:.17e}"));
                map.insert("domain.dimension".into(), dimension.to_string());
            }
        }
        map.insert("mesh.points".into(), self.mesh_points.to_string());
        map.insert("ground_state.tol".into(), format!("{:e}", self.ground_tol));
        map.insert(
            "coupling.mu".into(),
            self.mu
                .iter()
                .map(|v| v.to_string())
                .collect::<Vec<_>>()
                .join(","),
        );
        if let Some(a) = &self.a {
            map.insert(
                "coupling.a".into(),
                a.iter()
                    .map(|v| v.to_string())
                    .collect::<Vec<_>>()
                    .join(","),
            );
        }
        if let Some(beta) = self.beta {
            map.insert("coupling.beta".into(), beta.to_string());
        }
        if let Some(l1) = self.lambda1 {
            map.insert("coupling.lambda1".into(), l1.to_string());
        }
        map.insert("spectrum.k_max".into(), self.k_max.to_string());
        map.insert(
            "spectrum.cluster_tol".into(),
            format!("{:e}", self.cluster_tol),
        );
        map.insert("continuation.ds".into(), format!("{:e}", self.ds));
        map.insert(
            "continuation.corrector_tol".into(),
            format!("{:e}", self.corrector_tol),
        );
        map.insert("continuation.max_steps".into(), self.max_steps.to_string());
        map.insert("seed".into(), self.seed.to_string());
        map
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Interval,
    Ball,
}

#[derive(Default)]
struct DomainKeys {
    kind: Option<Kind>,
    length: Option<f64>,
    radius: Option<f64>,
    dimension: Option<u8>,
}

impl DomainKeys {
    fn build(self) -> Result<DomainSpec> {
        match self.kind {
            None => {
                if self.length.is_none() && self.radius.is_none() {
                    return Ok(RunConfig::default().domain);
                }
                if let Some(length) = self.length {
                    return Ok(DomainSpec::Interval { length });
                }
                bail!("domain.kind is required when radius/dimension are set");
            }
            Some(Kind::Interval) => {
                let length = self
                    .length
                    .ok_or_else(|| anyhow!("domain.length is required"))?;
                if self.radius.is_some() || self.dimension.is_some() {
                    bail!("domain.radius/domain.dimension do not apply to an interval");
                }
                Ok(DomainSpec::Interval { length })
            }
            Some(Kind::Ball) => {
                let radius = self
                    .radius
                    .ok_or_else(|| anyhow!("domain.radius is required"))?;
                let dimension = self.dimension.unwrap_or(3);
                if self.length.is_some() {
                    bail!("domain.length does not apply to a ball");
                }
                Ok(DomainSpec::Ball { radius, dimension })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_config(text: &str) -> tempfile::NamedTempFile {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        file.write_all(text.as_bytes()).unwrap();
        file
    }

    #[test]
    fn parses_a_full_config() {
        let file = write_config(
            "# comment\n\
             domain.kind = interval\n\
             domain.length = 6.283185307179586\n\
             mesh.points = 256\n\
             coupling.mu = 1, 2, 3\n\
             spectrum.k_max = 12\n\
             continuation.branch_sets = 1;2,3\n\
             output.formats = json\n\
             seed = 7\n",
        );
        let config = RunConfig::load(file.path()).unwrap();
        assert_eq!(config.mesh_points, 256);
        assert_eq!(config.mu, vec![1.0, 2.0, 3.0]);
        assert_eq!(config.k_max, 12);
        assert_eq!(config.branch_sets, Some(vec![vec![0], vec![1, 2]]));
        assert_eq!(config.formats, vec![Format::Json]);
        assert_eq!(config.seed, 7);
    }

    #[test]
    fn unknown_key_is_named_in_the_error() {
        let file = write_config("mesh.pints = 64\n");
        let err = RunConfig::load(file.path()).unwrap_err().to_string();
        assert!(err.contains("mesh.pints"), "{err}");
    }

    #[test]
    fn malformed_value_is_diagnosed() {
        let file = write_config("mesh.points = many\n");
        let err = format!("{:#}", RunConfig::load(file.path()).unwrap_err());
        assert!(err.contains("mesh.points"), "{err}");
        let file = write_config("coupling.mu = 1,x,3\n");
        assert!(RunConfig::load(file.path()).is_err());
        let file = write_config("mesh.points 64\n");
        let err = RunConfig::load(file.path()).unwrap_err().to_string();
        assert!(err.contains("key = value"), "{err}");
    }

    #[test]
    fn ball_domain_keys() {
        let file = write_config("domain.kind = ball\ndomain.radius = 2.0\ndomain.dimension = 3\n");
        let config = RunConfig::load(file.path()).unwrap();
        assert_eq!(
            config.domain,
            DomainSpec::Ball {
                radius: 2.0,
                dimension: 3
            }
        );
        let file = write_config("domain.kind = ball\ndomain.length = 1.0\ndomain.radius = 2.0\n");
        assert!(RunConfig::load(file.path()).is_err());
    }

    #[test]
    fn validation_catches_inconsistencies() {
        let file = write_config("coupling.mu = 1,2\n");
        assert!(RunConfig::load(file.path()).is_err());
        let file = write_config("coupling.a = -1,-1\n");
        assert!(RunConfig::load(file.path()).is_err());
        let file = write_config("continuation.branch_sets = 0\n");
        assert!(RunConfig::load(file.path()).is_err());
    }
}
