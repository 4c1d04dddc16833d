//! TOML run configuration. Unknown keys are rejected so that typos in
//! tolerance names fail fast instead of silently running with defaults.

use std::path::Path;

use serde::Deserialize;

use crate::error::{Result, TwistError};
use crate::generating::{Family, GeneratingFunction};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratingFunctionConfig {
    pub family: String,
    #[serde(rename = "K")]
    pub k: Option<f64>,
    /// On-site potential coefficients for the custom family.
    pub fourier_cos: Option<Vec<f64>>,
    /// Displacement-coupling coefficients for the custom family.
    pub cross_cos: Option<Vec<f64>>,
    #[serde(default = "default_twist_eps")]
    pub twist_eps: f64,
    pub window: Option<f64>,
}

fn default_twist_eps() -> f64 {
    0.5
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub n: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub n_iter_rotation: usize,
    /// Slope-jump threshold for singularity detection; defaults to 20/n.
    pub delta_sing: Option<f64>,
    pub n_steps_alpha_limit: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            n: 1024,
            tol: 1e-7,
            max_iter: 5000,
            n_iter_rotation: 1000,
            delta_sing: None,
            n_steps_alpha_limit: 64,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub c_min: f64,
    pub c_max: f64,
    pub c_step: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub out_dir: String,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            out_dir: "out".into(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub generating_function: GeneratingFunctionConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub output: OutputConfig,
}

impl RunConfig {
    pub fn from_str(text: &str) -> Result<RunConfig> {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| TwistError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            TwistError::Config(format!("cannot read config `{}`: {e}", path.display()))
        })?;
        RunConfig::from_str(&text)
    }

    fn validate(&self) -> Result<()> {
        let n = self.solver.n;
        if n < 64 || !n.is_power_of_two() {
            return Err(TwistError::Config(format!(
                "solver.n must be a power of two >= 64, got {n}"
            )));
        }
        if !(self.solver.tol > 0.0) {
            return Err(TwistError::Config(format!(
                "solver.tol must be positive, got {}",
                self.solver.tol
            )));
        }
        if let Some(d) = self.solver.delta_sing {
            if !(d > 0.0) {
                return Err(TwistError::Config(format!(
                    "solver.delta_sing must be positive, got {d}"
                )));
            }
        }
        if let Some(sweep) = &self.sweep {
            if !(sweep.c_step > 0.0) {
                return Err(TwistError::Config(format!(
                    "sweep.c_step must be positive, got {}",
                    sweep.c_step
                )));
            }
            if sweep.c_max < sweep.c_min {
                return Err(TwistError::Config(
                    "sweep.c_max must not be below sweep.c_min".into(),
                ));
            }
        }
        match self.generating_function.family.as_str() {
            "integrable" | "frenkel_kontorova" | "custom" => {}
            other => {
                return Err(TwistError::Config(format!(
                    "unknown family `{other}` (expected integrable, frenkel_kontorova or custom)"
                )))
            }
        }
        Ok(())
    }

    pub fn generating_function(&self) -> Result<GeneratingFunction> {
        let g = &self.generating_function;
        let family = match g.family.as_str() {
            "integrable" => Family::Integrable,
            "frenkel_kontorova" => Family::FrenkelKontorova {
                k: g.k.ok_or_else(|| {
                    TwistError::Config("frenkel_kontorova requires K".into())
                })?,
            },
            "custom" => Family::Custom {
                potential_cos: g.fourier_cos.clone().unwrap_or_default(),
                cross_cos: g.cross_cos.clone().unwrap_or_default(),
            },
            _ => unreachable!("validated"),
        };
        GeneratingFunction::new(family, g.twist_eps, g.window)
    }

    pub fn delta_sing(&self) -> f64 {
        self.solver
            .delta_sing
            .unwrap_or(20.0 / self.solver.n as f64)
    }

    /// Sorted sweep classes `c_min, c_min + c_step, ..., <= c_max` (the
    /// degenerate range `c_min = c_max` yields a single class).
    pub fn sweep_classes(&self) -> Option<Vec<f64>> {
        let sweep = self.sweep.as_ref()?;
        let mut out = Vec::new();
        let mut k = 0usize;
        loop {
            let c = sweep.c_min + k as f64 * sweep.c_step;
            if c > sweep.c_max + 1e-12 {
                break;
            }
            out.push(c);
            k += 1;
        }
        Some(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FK: &str = r#"
[generating_function]
family = "frenkel_kontorova"
K = 1.0

[solver]
n = 256
tol = 1e-7

[sweep]
c_min = -0.1
c_max = 0.1
c_step = 0.05
"#;

    #[test]
    fn parses_frenkel_kontorova() {
        let cfg = RunConfig::from_str(FK).unwrap();
        assert_eq!(cfg.solver.n, 256);
        assert_eq!(cfg.solver.max_iter, 5000);
        assert_eq!(cfg.output.out_dir, "out");
        let gf = cfg.generating_function().unwrap();
        assert!(matches!(gf.family(), Family::FrenkelKontorova { k } if *k == 1.0));
        assert_eq!(cfg.sweep_classes().unwrap().len(), 5);
        assert!((cfg.delta_sing() - 20.0 / 256.0).abs() < 1e-15);
    }

    #[test]
    fn unknown_keys_rejected() {
        let bad = FK.replace("tol = 1e-7", "tolerance = 1e-7");
        assert!(matches!(
            RunConfig::from_str(&bad),
            Err(TwistError::Config(_))
        ));
    }

    #[test]
    fn grid_size_validated() {
        for bad in ["n = 100", "n = 32"] {
            let text = FK.replace("n = 256", bad);
            assert!(RunConfig::from_str(&text).is_err(), "{bad}");
        }
    }

    #[test]
    fn custom_family_round_trip() {
        let text = r#"
[generating_function]
family = "custom"
fourier_cos = [0.5, -0.1]
cross_cos = [0.01]
twist_eps = 0.2
window = 3.0
"#;
        let cfg = RunConfig::from_str(text).unwrap();
        let gf = cfg.generating_function().unwrap();
        assert!(matches!(gf.family(), Family::Custom { .. }));
        assert_eq!(gf.twist_eps(), 0.2);
        assert!(cfg.sweep.is_none());
    }

    #[test]
    fn degenerate_sweep_is_single_row() {
        let text = FK
            .replace("c_min = -0.1", "c_min = 0.2")
            .replace("c_max = 0.1", "c_max = 0.2");
        let cfg = RunConfig::from_str(&text).unwrap();
        assert_eq!(cfg.sweep_classes().unwrap(), vec![0.2]);
    }

    #[test]
    fn missing_k_rejected_late() {
        let text = FK.replace("K = 1.0", "");
        let cfg = RunConfig::from_str(&text).unwrap();
        assert!(cfg.generating_function().is_err());
    }
}
