//! Flat key=value run configuration: parsing, exhaustive validation, and
//! the resolved snapshot written next to run artifacts.

use std::collections::BTreeMap;
use std::ffi::OsStr;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::agent::{Algorithm, GacConfig};
use crate::envs::ENV_NAMES;
use crate::error::{GacError, Result};
use crate::mmd::KernelSpec;
use crate::nets::LatentSpec;

/// Environment variable that, when set, prefixes relative output
/// directories.
pub const OUTPUT_ROOT_VAR: &str = "GAC_OUTPUT_ROOT";

/// A fully validated run description.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub env_name: String,
    pub reward_scale: f64,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
    /// Periodic checkpoint cadence in outer iterations.
    pub checkpoint_every: usize,
    pub gac: GacConfig,
}

/// Applies the output-root override to a relative directory.
pub fn resolve_output_dir_with(dir: &Path, root: Option<&OsStr>) -> PathBuf {
    match root {
        Some(r) if !r.is_empty() && dir.is_relative() => PathBuf::from(r).join(dir),
        _ => dir.to_path_buf(),
    }
}

/// `output_dir` with the process-level root override applied.
pub fn resolve_output_dir(dir: &Path) -> PathBuf {
    resolve_output_dir_with(dir, std::env::var_os(OUTPUT_ROOT_VAR).as_deref())
}

fn err(line: usize, msg: impl std::fmt::Display) -> GacError {
    GacError::Config(format!("line {line}: {msg}"))
}

struct RawConfig {
    // key -> (line number, value)
    entries: BTreeMap<String, (usize, String)>,
}

impl RawConfig {
    fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw_line) in text.lines().enumerate() {
            let lineno = i + 1;
            let line = raw_line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(err(lineno, format!("expected key = value, got {line:?}")));
            };
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if key.is_empty() {
                return Err(err(lineno, "empty key"));
            }
            if let Some((prev, _)) = entries.insert(key.clone(), (lineno, value)) {
                return Err(err(lineno, format!("duplicate key {key:?} (first on line {prev})")));
            }
        }
        Ok(RawConfig { entries })
    }

    fn take(&mut self, key: &str) -> Option<(usize, String)> {
        self.entries.remove(key)
    }

    fn take_str(&mut self, key: &str) -> Option<String> {
        self.take(key).map(|(_, v)| v)
    }

    fn required(&mut self, key: &str) -> Result<String> {
        self.take_str(key)
            .ok_or_else(|| GacError::Config(format!("missing required key {key:?}")))
    }

    fn f64_or(&mut self, key: &str, default: f64) -> Result<f64> {
        match self.take(key) {
            None => Ok(default),
            Some((line, v)) => v
                .parse::<f64>()
                .map_err(|_| err(line, format!("{key} expects a number, got {v:?}"))),
        }
    }

    fn usize_or(&mut self, key: &str, default: usize) -> Result<usize> {
        match self.take(key) {
            None => Ok(default),
            Some((line, v)) => v
                .parse::<usize>()
                .map_err(|_| err(line, format!("{key} expects a non-negative integer, got {v:?}"))),
        }
    }

    /// Rejects a key that has no effect under the chosen algorithm or
    /// kernel, rather than silently ignoring it.
    fn forbid(&mut self, key: &str, reason: &str) -> Result<()> {
        if let Some((line, _)) = self.take(key) {
            return Err(err(line, format!("{key} does not apply: {reason}")));
        }
        Ok(())
    }

    fn finish(self) -> Result<()> {
        if let Some((key, (line, _))) = self.entries.into_iter().next() {
            return Err(err(line, format!("unknown key {key:?}")));
        }
        Ok(())
    }
}

fn parse_u64_list(key: &str, v: &str) -> Result<Vec<u64>> {
    v.split(',')
        .map(|s| {
            let s = s.trim();
            s.parse::<u64>()
                .map_err(|_| GacError::Config(format!("{key} expects integers, got {s:?}")))
        })
        .collect()
}

fn parse_usize_list(key: &str, v: &str) -> Result<Vec<usize>> {
    v.split(',')
        .map(|s| {
            let s = s.trim();
            s.parse::<usize>()
                .map_err(|_| GacError::Config(format!("{key} expects integers, got {s:?}")))
        })
        .collect()
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut raw = RawConfig::parse(text)?;

        let env_name = raw.required("env")?;
        if !ENV_NAMES.contains(&env_name.as_str()) {
            return Err(GacError::Config(format!(
                "unknown env {env_name:?}; known: {}",
                ENV_NAMES.join(", ")
            )));
        }
        let action_dim = match env_name.as_str() {
            "multigoal" => 2,
            _ => 1,
        };

        let algorithm_name = raw.required("algorithm")?;
        let algorithm = match algorithm_name.as_str() {
            "gac_adaptive" => {
                raw.forbid("alpha", "gac_adaptive learns the entropy weight")?;
                raw.forbid("exploration_noise", "only ddpg_baseline uses exploration noise")?;
                Algorithm::GacAdaptive {
                    alpha_min: raw.f64_or("alpha_min", 1.0)?,
                    alpha_max: raw.f64_or("alpha_max", 1.8)?,
                    delta_beta: raw.f64_or("delta_beta", 0.01)?,
                }
            }
            "gac_fixed" => {
                for k in ["alpha_min", "alpha_max", "delta_beta"] {
                    raw.forbid(k, "only gac_adaptive drifts the entropy weight")?;
                }
                raw.forbid("exploration_noise", "only ddpg_baseline uses exploration noise")?;
                let alpha = raw
                    .required("alpha")?
                    .parse::<f64>()
                    .map_err(|_| GacError::Config("alpha expects a number".into()))?;
                Algorithm::GacFixed { alpha }
            }
            "ddpg_baseline" => {
                for k in ["alpha", "alpha_min", "alpha_max", "delta_beta"] {
                    raw.forbid(k, "the baseline has no entropy term")?;
                }
                for k in
                    ["kernel", "kernel_sigma", "action_samples", "latent_train_sigma", "latent_test_sigma"]
                {
                    raw.forbid(k, "the baseline acts deterministically at z = 0")?;
                }
                Algorithm::DdpgBaseline {
                    exploration_noise: raw.f64_or("exploration_noise", 0.1)?,
                }
            }
            other => {
                return Err(GacError::Config(format!(
                    "unknown algorithm {other:?}; known: gac_adaptive, gac_fixed, ddpg_baseline"
                )))
            }
        };

        let seeds = parse_u64_list("seeds", &raw.required("seeds")?)?;
        if seeds.is_empty() {
            return Err(GacError::Config("seeds must list at least one seed".into()));
        }
        for (i, s) in seeds.iter().enumerate() {
            if seeds[..i].contains(s) {
                return Err(GacError::Config(format!("duplicate seed {s}")));
            }
        }
        let output_dir = PathBuf::from(raw.required("output_dir")?);

        let kernel = if algorithm.uses_mmd() {
            match raw.take_str("kernel").as_deref().unwrap_or("energy_squared") {
                "energy_squared" => {
                    raw.forbid("kernel_sigma", "only the gaussian kernel has a bandwidth")?;
                    KernelSpec::EnergySquared
                }
                "energy" => {
                    raw.forbid("kernel_sigma", "only the gaussian kernel has a bandwidth")?;
                    KernelSpec::Energy
                }
                "gaussian" => {
                    let sigma = raw
                        .required("kernel_sigma")?
                        .parse::<f64>()
                        .map_err(|_| GacError::Config("kernel_sigma expects a number".into()))?;
                    KernelSpec::Gaussian { sigma }
                }
                other => {
                    return Err(GacError::Config(format!(
                        "unknown kernel {other:?}; known: energy_squared, energy, gaussian"
                    )))
                }
            }
        } else {
            KernelSpec::EnergySquared
        };

        let latent = if algorithm.uses_mmd() {
            LatentSpec {
                noise_dim: raw.usize_or("noise_dim", action_dim)?,
                train_sigma: raw.f64_or("latent_train_sigma", 1.0)?,
                test_sigma: raw.f64_or("latent_test_sigma", 0.5)?,
            }
        } else {
            LatentSpec {
                noise_dim: raw.usize_or("noise_dim", action_dim)?,
                train_sigma: 1.0,
                test_sigma: 0.5,
            }
        };

        let hidden = match raw.take_str("hidden") {
            None => vec![64, 64],
            Some(v) => parse_usize_list("hidden", &v)?,
        };

        let gac = GacConfig {
            algorithm,
            gamma: raw.f64_or("gamma", 0.99)?,
            iterations: raw.usize_or("iterations", 300)?,
            updates_per_iteration: raw.usize_or("updates_per_iteration", 50)?,
            steps_per_iteration: raw.usize_or("steps_per_iteration", 100)?,
            batch_size: raw.usize_or("batch_size", 100)?,
            action_samples: raw.usize_or("action_samples", 100)?,
            adam_step: raw.f64_or("adam_step", 1e-3)?,
            gd_step: raw.f64_or("gd_step", 5e-3)?,
            kernel,
            latent,
            hidden,
            buffer_capacity: raw.usize_or("buffer_capacity", 100_000)?,
            eval_episodes: raw.usize_or("eval_episodes", 10)?,
        };

        let reward_scale = raw.f64_or("reward_scale", 1.0)?;
        if reward_scale == 0.0 || !reward_scale.is_finite() {
            return Err(GacError::Config(format!(
                "reward_scale must be finite and nonzero, got {reward_scale}"
            )));
        }
        let checkpoint_every = raw.usize_or("checkpoint_every", 50)?;
        if checkpoint_every == 0 {
            return Err(GacError::Config("checkpoint_every must be at least 1".into()));
        }

        raw.finish()?;
        gac.validate()?;
        Ok(RunConfig { env_name, reward_scale, seeds, output_dir, checkpoint_every, gac })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| GacError::io(path.to_path_buf(), e))?;
        Self::parse(&text)
    }

    /// The frozen snapshot written into run directories: every applicable
    /// key with its resolved value, in a fixed order, parseable by
    /// `RunConfig::parse` to an identical config.
    pub fn resolved_text(&self) -> String {
        let mut s = String::new();
        let g = &self.gac;
        let _ = writeln!(s, "env = {}", self.env_name);
        let _ = writeln!(s, "algorithm = {}", g.algorithm.name());
        let seeds: Vec<String> = self.seeds.iter().map(|v| v.to_string()).collect();
        let _ = writeln!(s, "seeds = {}", seeds.join(","));
        let _ = writeln!(s, "output_dir = {}", self.output_dir.display());
        let _ = writeln!(s, "reward_scale = {}", self.reward_scale);
        let _ = writeln!(s, "gamma = {}", g.gamma);
        let _ = writeln!(s, "iterations = {}", g.iterations);
        let _ = writeln!(s, "updates_per_iteration = {}", g.updates_per_iteration);
        let _ = writeln!(s, "steps_per_iteration = {}", g.steps_per_iteration);
        let _ = writeln!(s, "batch_size = {}", g.batch_size);
        let _ = writeln!(s, "adam_step = {}", g.adam_step);
        let _ = writeln!(s, "gd_step = {}", g.gd_step);
        let _ = writeln!(s, "noise_dim = {}", g.latent.noise_dim);
        if g.algorithm.uses_mmd() {
            let _ = writeln!(s, "action_samples = {}", g.action_samples);
            let _ = writeln!(s, "kernel = {}", g.kernel.name());
            if let KernelSpec::Gaussian { sigma } = g.kernel {
                let _ = writeln!(s, "kernel_sigma = {sigma}");
            }
            let _ = writeln!(s, "latent_train_sigma = {}", g.latent.train_sigma);
            let _ = writeln!(s, "latent_test_sigma = {}", g.latent.test_sigma);
        }
        let hidden: Vec<String> = g.hidden.iter().map(|v| v.to_string()).collect();
        let _ = writeln!(s, "hidden = {}", hidden.join(","));
        let _ = writeln!(s, "buffer_capacity = {}", g.buffer_capacity);
        let _ = writeln!(s, "eval_episodes = {}", g.eval_episodes);
        let _ = writeln!(s, "checkpoint_every = {}", self.checkpoint_every);
        match &g.algorithm {
            Algorithm::GacAdaptive { alpha_min, alpha_max, delta_beta } => {
                let _ = writeln!(s, "alpha_min = {alpha_min}");
                let _ = writeln!(s, "alpha_max = {alpha_max}");
                let _ = writeln!(s, "delta_beta = {delta_beta}");
            }
            Algorithm::GacFixed { alpha } => {
                let _ = writeln!(s, "alpha = {alpha}");
            }
            Algorithm::DdpgBaseline { exploration_noise } => {
                let _ = writeln!(s, "exploration_noise = {exploration_noise}");
            }
        }
        s
    }

    /// Output directory with the root override applied.
    pub fn resolved_output_dir(&self) -> PathBuf {
        resolve_output_dir(&self.output_dir)
    }

    /// Per-seed artifact directory under the resolved output directory.
    pub fn seed_dir(&self, seed: u64) -> PathBuf {
        self.resolved_output_dir().join(format!("seed_{seed}"))
    }
}
