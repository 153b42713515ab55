//! JSON run configurations. Every struct rejects unknown keys.
//!
//! A config file has the shape
//! `{"seed": 7, "threads": 4, "experiment": {...}}` where the experiment
//! payload depends on the subcommand. `threads` is optional and only sets the
//! size of the worker pool; outputs do not depend on it.
//!
//! Coefficient tensors use `{"dims": [..], "representation": "dense", "data": [..]}`
//! (flat row-major) or `{"dims": [..], "representation": "rank1", "data": [[..], ..]}`
//! (one factor per mode). Model classes are tagged by `"variant"`, e.g.
//! `{"variant": "linear_span", "dims": [5], "indices": [[0], [1], [2], [3], [4]]}`.

use std::path::Path;

use anyhow::Context;
use samplecx::geometry::ManifoldChart;
use samplecx::rip::RipMethod;
use samplecx::solver::{IhtOptions, PhaseTarget, SamplingWeight};
use samplecx::{CoeffTensor, ModelClass};
use serde::de::DeserializeOwned;
use serde::Deserialize;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig<P> {
    pub seed: u64,
    #[serde(default)]
    pub threads: Option<usize>,
    pub experiment: P,
}

/// Reads a config and returns it with the raw bytes for hashing.
pub fn load<P: DeserializeOwned>(path: &Path) -> anyhow::Result<(RunConfig<P>, Vec<u8>)> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let cfg = serde_json::from_slice(&bytes).with_context(|| format!("parsing {}", path.display()))?;
    Ok((cfg, bytes))
}

/// Evaluation points.
#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GridParams {
    /// The library's standard grid for the class's number of modes.
    Standard {},
    /// Chebyshev–Lobatto points per mode, tensorized.
    Tensor {
        points_per_mode: usize,
    },
    /// Uniform random points drawn with the run seed.
    Uniform {
        n: usize,
    },
    Points {
        points: Vec<Vec<f64>>,
    },
}

/// Sampling weight.
#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum WeightParams {
    Uniform {},
    /// Product of per-mode optimal Legendre densities.
    SeparableOptimal {
        dims: Vec<usize>,
    },
    /// w = ‖𝕂‖_{L¹}/𝕂 for the exact variation function of the experiment's class.
    Optimal {},
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum VariationMethod {
    /// Closed form; fails for classes without one.
    Exact {},
    /// Monte Carlo lower bound from random unit elements.
    Estimate { num_samples: usize },
}

/// How δ̂ is measured on a batch.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RipMethodChoice {
    /// Exact for linear classes.
    Spectral {},
    /// Lower bound from `num_test` random unit elements.
    MonteCarlo { num_test: usize },
}

impl From<RipMethodChoice> for RipMethod {
    fn from(m: RipMethodChoice) -> Self {
        match m {
            RipMethodChoice::Spectral {} => RipMethod::Spectral,
            RipMethodChoice::MonteCarlo { num_test } => RipMethod::MonteCarlo { num_test },
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariationParams {
    pub class: ModelClass,
    pub method: VariationMethod,
    pub grid: GridParams,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimalWeightParams {
    pub class: ModelClass,
    pub grid: GridParams,
    /// Draws this many weighted samples into samples.csv when positive.
    #[serde(default)]
    pub num_samples: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RipParams {
    pub class: ModelClass,
    pub weight: WeightParams,
    pub sample_counts: Vec<usize>,
    pub delta: f64,
    pub trials: usize,
    pub method: RipMethodChoice,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseParams {
    pub orders: Vec<usize>,
    pub sample_counts: Vec<usize>,
    pub d: usize,
    pub target: PhaseTarget,
    pub trials: usize,
    #[serde(default = "default_sampling")]
    pub sampling: SamplingWeight,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
}

fn default_sampling() -> SamplingWeight {
    SamplingWeight::Optimal
}

fn default_max_iters() -> usize {
    IhtOptions::default().max_iters
}

fn default_tol() -> f64 {
    IhtOptions::default().tol
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryParams {
    pub checks: Vec<GeometryCheck>,
}

/// One geometric check. `reach` defaults to the chart's own reach.
#[derive(Debug, Deserialize)]
#[serde(tag = "check", rename_all = "snake_case", deny_unknown_fields)]
pub enum GeometryCheck {
    TangentProjection {
        chart: ManifoldChart,
        r: f64,
        #[serde(default)]
        reach: Option<f64>,
        num_samples: usize,
    },
    ManifoldProjection {
        chart: ManifoldChart,
        r: f64,
        #[serde(default)]
        reach: Option<f64>,
        num_samples: usize,
    },
    HausdorffRates {
        chart: ManifoldChart,
        radii: Vec<f64>,
        #[serde(default)]
        reach: Option<f64>,
        cloud_size: usize,
    },
    ReachPerturbation {
        anchor: CoeffTensor,
        rank: usize,
        r: f64,
        num_samples: usize,
    },
    LocalBound {
        anchor: CoeffTensor,
        rank: usize,
        radii: Vec<f64>,
        reach: f64,
        num_samples: usize,
        grid: GridParams,
    },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuasiOptParams {
    /// The target function's coefficients.
    pub u: CoeffTensor,
    /// A linear class (least squares) or a rank-1 cone (hard thresholding).
    pub class: ModelClass,
    pub weight: WeightParams,
    pub n: usize,
    /// How δ̂ is measured on {u_M} − M.
    pub delta: RipMethodChoice,
    #[serde(default)]
    pub iht: Option<IhtOptions>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected() {
        let ok = r#"{"seed": 1, "experiment": {"class": {"variant": "full_space", "dims": [3]},
                     "method": {"kind": "exact"}, "grid": {"kind": "standard"}}}"#;
        assert!(serde_json::from_str::<RunConfig<VariationParams>>(ok).is_ok());
        let extra = ok.replace(r#""seed": 1"#, r#""seed": 1, "sede": 2"#);
        assert!(serde_json::from_str::<RunConfig<VariationParams>>(&extra).is_err());
        let nested = ok.replace(r#""kind": "exact""#, r#""kind": "exact", "n": 3"#);
        assert!(serde_json::from_str::<RunConfig<VariationParams>>(&nested).is_err());
    }

    #[test]
    fn phase_defaults() {
        let s = r#"{"orders": [2], "sample_counts": [10], "d": 3, "target": "ones", "trials": 1}"#;
        let p: PhaseParams = serde_json::from_str(s).unwrap();
        assert_eq!(p.sampling, SamplingWeight::Optimal);
        assert_eq!(p.max_iters, 1000);
    }
}
