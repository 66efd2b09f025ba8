//! Model persistence as a self-describing JSON text file.
//!
//! The file stores the kernel in its text grammar, the noise variance, the
//! training set, and the normalization record. JSON numbers round-trip
//! `f64` exactly, and loading reconditions from the identical inputs, so a
//! reloaded model reproduces predictions bit for bit.

use super::{condition, Dataset, GprError, GprModel, OutputNorm};
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Format tag written into (and required from) every model file.
pub const MODEL_FORMAT: &str = "gptrust-model/1";

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    kernel: String,
    noise_var: f64,
    normalization: Option<OutputNorm>,
    train_inputs: Vec<Vec<f64>>,
    train_outputs: Vec<f64>,
}

impl GprModel {
    /// Serializes the model to its JSON text form.
    pub fn to_json(&self) -> String {
        let file = ModelFile {
            format: MODEL_FORMAT.to_string(),
            kernel: self.kernel().to_string(),
            noise_var: self.noise_var(),
            normalization: self.normalization(),
            train_inputs: self.train_inputs().to_vec(),
            train_outputs: self.train_outputs().to_vec(),
        };
        serde_json::to_string_pretty(&file).expect("model file serializes infallibly")
    }

    /// Reconstructs a model from its JSON text form by reconditioning on the
    /// stored training set.
    pub fn from_json(text: &str) -> Result<GprModel, GprError> {
        let file: ModelFile = serde_json::from_str(text)
            .map_err(|e| GprError::Persistence(format!("invalid model JSON: {e}")))?;
        if file.format != MODEL_FORMAT {
            return Err(GprError::Persistence(format!(
                "unsupported model format `{}` (expected `{MODEL_FORMAT}`)",
                file.format
            )));
        }
        let kernel = crate::kernels::parse_kernel(&file.kernel)
            .map_err(|e| GprError::Persistence(format!("kernel field: {e}")))?;
        let data =
            Dataset::new(file.train_inputs, file.train_outputs)?.with_norm(file.normalization);
        condition(kernel, file.noise_var, &data)
    }

    pub fn save(&self, path: &Path) -> Result<(), GprError> {
        std::fs::write(path, self.to_json())
            .map_err(|e| GprError::Persistence(format!("writing {}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<GprModel, GprError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| GprError::Persistence(format!("reading {}: {e}", path.display())))?;
        GprModel::from_json(&text)
    }
}
