use std::path::PathBuf;

use bozk_core::evolve::Dealias;
use bozk_core::{Grid2D, Params, SolveOptions};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Solve,
    Evolve,
    Kernel,
    Classify,
    SweepDc,
    Stability,
}

/// One batch run, read from a single JSON document.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    pub params: Params,
    #[serde(default)]
    pub grid: Option<Grid2D>,
    #[serde(default)]
    pub solver: SolveOptions,
    #[serde(default)]
    pub evolve: Option<EvolveConfig>,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub stability: Option<StabilityConfig>,
    #[serde(default)]
    pub kernel: KernelConfig,
    #[serde(default)]
    pub seed: u64,
    /// Output directory; `--out` takes precedence.
    #[serde(default)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolveConfig {
    pub dt: f64,
    pub t_end: f64,
    #[serde(default)]
    pub dealias: Dealias,
    #[serde(default = "default_record_every")]
    pub record_every: usize,
    /// Recorded samples between snapshots; 0 disables snapshots.
    #[serde(default)]
    pub snapshot_every: usize,
    /// Field file to start from; the solved wave is used when absent.
    #[serde(default)]
    pub initial: Option<PathBuf>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub c_values: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StabilityConfig {
    pub perturbation: f64,
    pub t_end: f64,
    pub dt: f64,
    #[serde(default)]
    pub dealias: Dealias,
    #[serde(default = "default_record_every")]
    pub record_every: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelConfig {
    /// Sample points for the quadrature cross-check; 0 skips it.
    pub points: usize,
    pub quad_tol: f64,
    pub x_images: usize,
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self {
            points: 20,
            quad_tol: 1e-10,
            x_images: 100,
        }
    }
}

fn default_record_every() -> usize {
    10
}

fn positive(name: &str, v: f64) -> Result<(), String> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(format!("{name} = {v} must be positive and finite"))
    }
}

fn non_negative(name: &str, v: f64) -> Result<(), String> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(format!("{name} = {v} must be non-negative and finite"))
    }
}

impl RunConfig {
    pub fn parse(bytes: &[u8]) -> Result<Self, String> {
        let cfg: Self = serde_json::from_slice(bytes).map_err(|e| e.to_string())?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks the fields the command needs, before any compute.
    pub fn validate(&self) -> Result<(), String> {
        self.params.validate().map_err(|e| e.to_string())?;
        if self.command != Command::Classify && self.grid.is_none() {
            return Err(format!("command {:?} requires a grid", self.command));
        }
        let s = &self.solver;
        positive("solver.tol", s.tol)?;
        positive("solver.stabilizer_tol", s.stabilizer_tol)?;
        if s.max_iter == 0 {
            return Err("solver.max_iter must be at least 1".into());
        }
        if let Some(g) = s.gamma {
            positive("solver.gamma", g)?;
        }
        match self.command {
            Command::Evolve => {
                let e = self.evolve.as_ref().ok_or("evolve requires an evolve block")?;
                positive("evolve.dt", e.dt)?;
                non_negative("evolve.t_end", e.t_end)?;
                if e.record_every == 0 {
                    return Err("evolve.record_every must be at least 1".into());
                }
            }
            Command::SweepDc => {
                let sw = self.sweep.as_ref().ok_or("sweep-dc requires a sweep block")?;
                if sw.c_values.len() < 2 {
                    return Err("sweep.c_values needs at least two speeds".into());
                }
                for &c in &sw.c_values {
                    positive("sweep.c_values entry", c)?;
                }
            }
            Command::Stability => {
                let st = self
                    .stability
                    .as_ref()
                    .ok_or("stability requires a stability block")?;
                if !(0.0..=0.1).contains(&st.perturbation) {
                    return Err(format!(
                        "stability.perturbation = {} outside [0, 0.1]",
                        st.perturbation
                    ));
                }
                positive("stability.dt", st.dt)?;
                non_negative("stability.t_end", st.t_end)?;
                if st.record_every == 0 {
                    return Err("stability.record_every must be at least 1".into());
                }
            }
            Command::Kernel => {
                positive("kernel.quad_tol", self.kernel.quad_tol)?;
            }
            Command::Solve | Command::Classify => {}
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base(command: &str) -> serde_json::Value {
        serde_json::json!({
            "command": command,
            "params": {"p": 1.0, "alpha": -1.0, "epsilon": 1.0, "c": 1.0},
            "grid": {"nx": 64, "ny": 32, "lx": 20.0, "ly": 10.0}
        })
    }

    fn parse(v: &serde_json::Value) -> Result<RunConfig, String> {
        RunConfig::parse(v.to_string().as_bytes())
    }

    #[test]
    fn minimal_solve_parses_with_defaults() {
        let cfg = parse(&base("solve")).unwrap();
        assert_eq!(cfg.command, Command::Solve);
        assert_eq!(cfg.seed, 0);
        assert_eq!(cfg.solver.max_iter, 500);
        assert_eq!(cfg.kernel.x_images, 100);
    }

    #[test]
    fn classify_needs_no_grid() {
        let mut v = base("classify");
        v.as_object_mut().unwrap().remove("grid");
        assert!(parse(&v).is_ok());
        let mut v = base("solve");
        v.as_object_mut().unwrap().remove("grid");
        assert!(parse(&v).unwrap_err().contains("grid"));
    }

    #[test]
    fn command_blocks_are_required() {
        for cmd in ["evolve", "sweep-dc", "stability"] {
            assert!(parse(&base(cmd)).is_err(), "{cmd}");
        }
    }

    #[test]
    fn rejects_bad_values() {
        let mut v = base("sweep-dc");
        v["sweep"] = serde_json::json!({"c_values": [1.0, -2.0]});
        assert!(parse(&v).is_err());
        let mut v = base("stability");
        v["stability"] = serde_json::json!({"perturbation": 0.5, "t_end": 1.0, "dt": 0.01});
        assert!(parse(&v).is_err());
        let mut v = base("solve");
        v["grid"]["nx"] = serde_json::json!(7);
        assert!(parse(&v).is_err());
        let mut v = base("solve");
        v["bogus"] = serde_json::json!(1);
        assert!(parse(&v).is_err());
        let mut v = base("solve");
        v["params"]["p"] = serde_json::json!(-1.0);
        assert!(parse(&v).is_err());
    }
}
