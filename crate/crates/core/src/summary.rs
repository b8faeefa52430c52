use std::fmt;

use serde::{Deserialize, Serialize};

/// Mean with an optional population standard deviation, reported as
/// `mean(std)`. The deviation is absent when only one value was observed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub std: Option<f64>,
}

impl Summary {
    pub fn of(values: &[f64]) -> Option<Summary> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = (values.len() > 1).then(|| (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt());
        Some(Summary { mean, std })
    }

    pub fn single(value: f64) -> Summary {
        Summary { mean: value, std: None }
    }
}

impl fmt::Display for Summary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let precision = f.precision().unwrap_or(2);
        write!(f, "{:.*}", precision, self.mean)?;
        if let Some(std) = self.std {
            write!(f, "({:.*})", precision, std)?;
        }
        Ok(())
    }
}
