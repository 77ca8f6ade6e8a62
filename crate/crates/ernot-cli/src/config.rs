//! Resolved run options and the flat `key=value` override file.
//!
//! Every tunable the benchmark and scaling pipelines accept lives in
//! [`RunOptions`]; the defaults are the shared synthetic-benchmark setup
//! (width 256, depth 2, batch 256, learning rate 1e-3, 3000 steps,
//! ε = 0.05 × median cost, 200-point evaluation supports, 200 Sinkhorn
//! iterations, heat time 100ε). A config file overrides individual keys,
//! one `key = value` per line, with `#` comments; later lines win.

use std::fmt;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};

/// A transport method a benchmark can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    ErNot,
    AmbientEuclidean,
    TangentSpace,
    SinkhornReference,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::ErNot => "ernot",
            Method::AmbientEuclidean => "ambient_euclidean",
            Method::TangentSpace => "tangent_space",
            Method::SinkhornReference => "sinkhorn_reference",
        }
    }

    pub fn from_label(label: &str) -> Option<Self> {
        match label {
            "ernot" => Some(Method::ErNot),
            "ambient_euclidean" | "ambient" => Some(Method::AmbientEuclidean),
            "tangent_space" | "tangent" => Some(Method::TangentSpace),
            "sinkhorn_reference" | "reference" => Some(Method::SinkhornReference),
            _ => None,
        }
    }

    pub const ALL: [Method; 4] = [
        Method::ErNot,
        Method::TangentSpace,
        Method::AmbientEuclidean,
        Method::SinkhornReference,
    ];
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Which row-wise extractor turns plans into transport maps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExtractorOpt {
    Heat,
    Barycenter,
}

impl ExtractorOpt {
    pub fn label(self) -> &'static str {
        match self {
            ExtractorOpt::Heat => "heat",
            ExtractorOpt::Barycenter => "bary",
        }
    }

    pub fn from_label(label: &str) -> Option<Self> {
        match label {
            "heat" => Some(ExtractorOpt::Heat),
            "bary" | "barycenter" => Some(ExtractorOpt::Barycenter),
            _ => None,
        }
    }
}

/// All pipeline tunables after defaults and overrides are applied.
#[derive(Debug, Clone)]
pub struct RunOptions {
    /// Source evaluation-support size.
    pub support_n: usize,
    /// Target evaluation-support size.
    pub support_m: usize,
    /// ε = epsilon_scale × median sampled cost.
    pub epsilon_scale: f64,
    /// Training iterations.
    pub steps: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Potential-network hidden width.
    pub width: usize,
    /// Potential-network hidden depth.
    pub depth: usize,
    /// Landmarks kept for the distance-feature embedding.
    pub landmark_count: usize,
    /// Candidate pool FPS selects landmarks from (half source, half target).
    pub landmark_pool: usize,
    pub sinkhorn_iters: usize,
    pub sinkhorn_tol: f64,
    /// Heat-kernel time as a multiple of ε.
    pub heat_time_factor: f64,
    pub extractor: ExtractorOpt,
    /// Which methods a benchmark runs.
    pub methods: Vec<Method>,
    /// Analytic working-set budget for the scaling study; predicted rows
    /// beyond it are recorded as infeasible instead of attempted.
    pub memory_budget_bytes: u64,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            support_n: 200,
            support_m: 200,
            epsilon_scale: 0.05,
            steps: 3000,
            batch_size: 256,
            learning_rate: 1e-3,
            width: 256,
            depth: 2,
            landmark_count: 256,
            landmark_pool: 4096,
            sinkhorn_iters: 200,
            sinkhorn_tol: 1e-9,
            heat_time_factor: 100.0,
            extractor: ExtractorOpt::Heat,
            methods: Method::ALL.to_vec(),
            memory_budget_bytes: 8 * 1024 * 1024 * 1024,
        }
    }
}

impl RunOptions {
    /// Apply overrides from flat `key = value` text.
    pub fn apply_overrides(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                bail!("config line {} is not key=value: {raw:?}", lineno + 1);
            };
            let (key, value) = (key.trim(), value.trim());
            self.set(key, value)
                .with_context(|| format!("config line {}", lineno + 1))?;
        }
        self.validate()
    }

    /// Load and apply a config file.
    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        self.apply_overrides(&text)
    }

    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn count(value: &str, key: &str) -> Result<usize> {
            value
                .parse()
                .with_context(|| format!("{key} wants a nonnegative integer, got {value:?}"))
        }
        fn real(value: &str, key: &str) -> Result<f64> {
            let v: f64 = value
                .parse()
                .with_context(|| format!("{key} wants a number, got {value:?}"))?;
            if !v.is_finite() {
                bail!("{key} must be finite");
            }
            Ok(v)
        }
        match key {
            "support_n" => self.support_n = count(value, key)?,
            "support_m" => self.support_m = count(value, key)?,
            "epsilon_scale" => self.epsilon_scale = real(value, key)?,
            "steps" => self.steps = count(value, key)?,
            "batch_size" => self.batch_size = count(value, key)?,
            "learning_rate" => self.learning_rate = real(value, key)?,
            "width" => self.width = count(value, key)?,
            "depth" => self.depth = count(value, key)?,
            "landmark_count" => self.landmark_count = count(value, key)?,
            "landmark_pool" => self.landmark_pool = count(value, key)?,
            "sinkhorn_iters" => self.sinkhorn_iters = count(value, key)?,
            "sinkhorn_tol" => self.sinkhorn_tol = real(value, key)?,
            "heat_time_factor" => self.heat_time_factor = real(value, key)?,
            "memory_budget_bytes" => {
                self.memory_budget_bytes = value
                    .parse()
                    .with_context(|| format!("memory_budget_bytes wants bytes, got {value:?}"))?
            }
            "extractor" => {
                self.extractor = ExtractorOpt::from_label(value)
                    .with_context(|| format!("unknown extractor {value:?} (heat|bary)"))?
            }
            "methods" => {
                let mut methods = Vec::new();
                for part in value.split(',') {
                    let part = part.trim();
                    if part.is_empty() {
                        continue;
                    }
                    let m = Method::from_label(part)
                        .with_context(|| format!("unknown method {part:?}"))?;
                    if !methods.contains(&m) {
                        methods.push(m);
                    }
                }
                if methods.is_empty() {
                    bail!("methods list is empty");
                }
                self.methods = methods;
            }
            other => bail!(
                "unknown config key {other:?}; valid keys: support_n, support_m, \
                 epsilon_scale, steps, batch_size, learning_rate, width, depth, \
                 landmark_count, landmark_pool, sinkhorn_iters, sinkhorn_tol, \
                 heat_time_factor, extractor, methods, memory_budget_bytes"
            ),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.support_n < 2 || self.support_m < 2 {
            bail!("support sizes must be at least 2");
        }
        if !(self.epsilon_scale > 0.0) {
            bail!("epsilon_scale must be positive");
        }
        if self.batch_size < 2 {
            bail!("batch_size must be at least 2");
        }
        if !(self.learning_rate > 0.0) {
            bail!("learning_rate must be positive");
        }
        if self.width == 0 || self.depth == 0 {
            bail!("width and depth must be positive");
        }
        if self.landmark_count == 0 || self.landmark_pool < self.landmark_count {
            bail!("landmark_pool must be at least landmark_count (and both positive)");
        }
        if self.sinkhorn_iters == 0 {
            bail!("sinkhorn_iters must be positive");
        }
        if !(self.sinkhorn_tol > 0.0) {
            bail!("sinkhorn_tol must be positive");
        }
        if !(self.heat_time_factor > 0.0) {
            bail!("heat_time_factor must be positive");
        }
        if self.methods.is_empty() {
            bail!("at least one method is required");
        }
        Ok(())
    }

    /// JSON echo of the resolved options, embedded in full result objects.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "support_n": self.support_n,
            "support_m": self.support_m,
            "epsilon_scale": self.epsilon_scale,
            "steps": self.steps,
            "batch_size": self.batch_size,
            "learning_rate": self.learning_rate,
            "width": self.width,
            "depth": self.depth,
            "landmark_count": self.landmark_count,
            "landmark_pool": self.landmark_pool,
            "sinkhorn_iters": self.sinkhorn_iters,
            "sinkhorn_tol": self.sinkhorn_tol,
            "heat_time_factor": self.heat_time_factor,
            "extractor": self.extractor.label(),
            "methods": self.methods.iter().map(|m| m.label()).collect::<Vec<_>>(),
            "memory_budget_bytes": self.memory_budget_bytes,
        })
    }
}
