//! Run configuration: a flat TOML file with dotted sections, all tolerances
//! overridable, defaults matching the desk instance.

use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemConfig,
    pub grid: GridConfig,
    #[serde(default)]
    pub tolerances: TolConfig,
    #[serde(default)]
    pub search: SearchConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    /// "remark13" | "quadratic" | "truncated"
    pub family: String,
    /// operator family; only "desk" is built in
    #[serde(default = "default_operator")]
    pub operator: String,
    /// gap offset of B0 relative to the zero gap (remark13)
    #[serde(default)]
    pub l: i64,
    /// number of gaps between B0 and B_inf (remark13)
    #[serde(default = "default_i")]
    pub i: usize,
    /// inner/outer radius of the radial bridge (remark13)
    #[serde(default = "default_radii")]
    pub radii: [f64; 2],
    /// quadratic coefficient (family = "quadratic")
    #[serde(default = "default_b")]
    pub b: f64,
    /// truncation radius M_k (family = "truncated")
    pub m_k: Option<f64>,
    /// truncation slope gamma; default: max B_inf eigenvalue + 1, nudged
    pub gamma: Option<f64>,
}

fn default_operator() -> String {
    "desk".into()
}
fn default_i() -> usize {
    3
}
fn default_radii() -> [f64; 2] {
    [1.0, 8.0]
}
fn default_b() -> f64 {
    1.0
}

#[derive(Clone, Copy, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub t: f64,
    pub n: usize,
}

#[derive(Clone, Copy, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct TolConfig {
    /// null window override; default 1e-8 (1 + spectral radius)
    pub tol_null: Option<f64>,
    pub decay_tol: f64,
    pub tol_orbit: f64,
}

impl Default for TolConfig {
    fn default() -> Self {
        TolConfig { tol_null: None, decay_tol: 1e-6, tol_orbit: 1e-6 }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct SearchConfig {
    /// grid amplitudes for eigendirection seeds
    pub amps: Vec<f64>,
    /// extra uniform random seeds
    pub random: usize,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig { amps: vec![2.0, 4.0], random: 0, max_iter: 40, seed: 0 }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: String,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: "out".into() }
    }
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    let cfg: RunConfig =
        toml::from_str(text).map_err(|e| Error::Config(format!("config parse: {e}")))?;
    validate(&cfg)?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text)
}

fn validate(cfg: &RunConfig) -> Result<()> {
    match cfg.problem.family.as_str() {
        "remark13" | "quadratic" | "truncated" => {}
        other => {
            return Err(Error::Config(format!(
                "problem.family: unknown family {other:?} (expected remark13 | quadratic | truncated)"
            )))
        }
    }
    if cfg.problem.operator != "desk" {
        return Err(Error::Config(format!(
            "problem.operator: unknown operator {:?} (only \"desk\" is built in)",
            cfg.problem.operator
        )));
    }
    if cfg.problem.family == "truncated" && cfg.problem.m_k.is_none() {
        return Err(Error::Config("problem.m_k: required for family \"truncated\"".into()));
    }
    if cfg.grid.t <= 0.0 {
        return Err(Error::Config("grid.t: must be positive".into()));
    }
    if cfg.grid.n < 3 {
        return Err(Error::Config("grid.n: need at least 3 interior points".into()));
    }
    if cfg.problem.radii[0] <= 0.0 || cfg.problem.radii[1] <= cfg.problem.radii[0] {
        return Err(Error::Config("problem.radii: need 0 < r_in < r_out".into()));
    }
    if cfg.tolerances.decay_tol <= 0.0 || cfg.tolerances.tol_orbit <= 0.0 {
        return Err(Error::Config("tolerances: all tolerances must be positive".into()));
    }
    if let Some(t) = cfg.tolerances.tol_null {
        if t <= 0.0 {
            return Err(Error::Config("tolerances.tol_null: must be positive".into()));
        }
    }
    Ok(())
}

/// The desk instance configuration used throughout the examples and docs.
pub fn desk_config() -> RunConfig {
    parse_config(
        r#"
[problem]
family = "remark13"
operator = "desk"
l = 0
i = 3
radii = [1.0, 8.0]

[grid]
t = 20.0
n = 2000
"#,
    )
    .unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn desk_config_parses() {
        let cfg = desk_config();
        assert_eq!(cfg.problem.family, "remark13");
        assert_eq!(cfg.grid.n, 2000);
        assert_eq!(cfg.search.amps, vec![2.0, 4.0]);
    }

    #[test]
    fn bad_configs_name_the_key() {
        let e = parse_config("[problem]\nfamily = \"nope\"\n[grid]\nt = 1.0\nn = 100\n")
            .unwrap_err();
        assert!(e.to_string().contains("problem.family"));
        let e = parse_config("[problem]\nfamily = \"remark13\"\n[grid]\nt = -1.0\nn = 100\n")
            .unwrap_err();
        assert!(e.to_string().contains("grid.t"));
        let e = parse_config("[problem]\nfamily = \"truncated\"\n[grid]\nt = 1.0\nn = 100\n")
            .unwrap_err();
        assert!(e.to_string().contains("m_k"));
        assert!(parse_config("not toml at all [").is_err());
    }
}
