//! Count sketch: a signed hashing projection `ℝ^d → ℝ^{d′}` that preserves
//! inner products in expectation.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, shape, Result};
use crate::tensor::FeatureSet;

/// Hash buckets `h` (1-based, in `1..=d′`) and signs `s` for every input
/// coordinate. Fully determined by `(d, d′, seed)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SketchPlan {
    input_dim: usize,
    output_dim: usize,
    h: Vec<usize>,
    s: Vec<i8>,
    seed: u64,
}

/// On-disk form of a plan; `h` and `s` are regenerated from the seed.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SketchPlanFile {
    pub d: usize,
    pub d_prime: usize,
    pub seed: u64,
    pub rng_name: String,
}

/// Draw a plan: buckets uniform on `1..=d′`, signs uniform on `{−1, +1}`.
pub fn make_plan(d: usize, d_prime: usize, seed: u64) -> Result<SketchPlan> {
    if d == 0 || d_prime == 0 {
        return invalid("sketch dimensions must be positive");
    }
    if d_prime > d {
        return invalid(format!("output dim {d_prime} exceeds input dim {d}"));
    }
    let mut rng = crate::seeded_rng(seed);
    let h = (0..d).map(|_| rng.random_range(1..=d_prime)).collect();
    let s = (0..d).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect();
    Ok(SketchPlan {
        input_dim: d,
        output_dim: d_prime,
        h,
        s,
        seed,
    })
}

impl SketchPlan {
    /// Plan from explicit buckets and signs; the seed is recorded as given.
    pub fn from_parts(output_dim: usize, h: Vec<usize>, s: Vec<i8>, seed: u64) -> Result<Self> {
        if h.len() != s.len() || h.is_empty() {
            return shape("h and s must be non-empty and of equal length");
        }
        if let Some(b) = h.iter().find(|&&b| b == 0 || b > output_dim) {
            return invalid(format!("bucket {b} outside 1..={output_dim}"));
        }
        if s.iter().any(|&v| v != 1 && v != -1) {
            return invalid("signs must be ±1");
        }
        Ok(Self {
            input_dim: h.len(),
            output_dim,
            h,
            s,
            seed,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn buckets(&self) -> &[usize] {
        &self.h
    }

    pub fn signs(&self) -> &[i8] {
        &self.s
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// `out_j = Σ_{i : h_i = j} s_i x_i`.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim {
            return shape(format!("vector has length {}, plan expects {}", x.len(), self.input_dim));
        }
        let mut out = vec![0.0; self.output_dim];
        for ((&b, &s), &v) in self.h.iter().zip(&self.s).zip(x) {
            out[b - 1] += f64::from(s) * v;
        }
        Ok(out)
    }

    /// Sketch every vector of a feature set, before pooling. Weights carry
    /// over and the mean is sketched too, so centring commutes.
    pub fn apply_features(&self, fs: &FeatureSet) -> Result<FeatureSet> {
        let vectors = fs
            .vectors()
            .iter()
            .map(|v| self.apply(v))
            .collect::<Result<Vec<_>>>()?;
        FeatureSet::with_weights_and_mean(vectors, fs.weights().to_vec(), self.apply(fs.mean())?)
    }

    pub fn to_file(&self) -> SketchPlanFile {
        SketchPlanFile {
            d: self.input_dim,
            d_prime: self.output_dim,
            seed: self.seed,
            rng_name: crate::RNG_NAME.to_string(),
        }
    }

    pub fn from_file(file: &SketchPlanFile) -> Result<Self> {
        if file.rng_name != crate::RNG_NAME {
            return invalid(format!(
                "plan was drawn with {:?}, this build uses {:?}",
                file.rng_name,
                crate::RNG_NAME
            ));
        }
        make_plan(file.d, file.d_prime, file.seed)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(&self.to_file()).map_err(|e| crate::Error::InvalidInput(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: SketchPlanFile =
            serde_json::from_str(text).map_err(|e| crate::Error::InvalidInput(format!("bad plan JSON: {e}")))?;
        Self::from_file(&file)
    }
}
