use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Analysis window applied before every transform in the signal chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowKind {
    Rectangular,
    #[default]
    Hann,
}

impl WindowKind {
    pub fn weights(self, len: usize) -> Vec<f64> {
        match self {
            WindowKind::Rectangular => vec![1.0; len],
            WindowKind::Hann if len <= 1 => vec![1.0; len],
            WindowKind::Hann => {
                let denom = (len - 1) as f64;
                (0..len)
                    .map(|i| 0.5 * (1.0 - (2.0 * PI * i as f64 / denom).cos()))
                    .collect()
            }
        }
    }
}

impl std::str::FromStr for WindowKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "rectangular" | "rect" | "none" => Ok(WindowKind::Rectangular),
            "hann" | "hanning" => Ok(WindowKind::Hann),
            other => Err(format!("unknown window `{other}` (expected hann or rectangular)")),
        }
    }
}

pub fn apply_window(frame: &[f64], kind: WindowKind) -> Vec<f64> {
    match kind {
        WindowKind::Rectangular => frame.to_vec(),
        WindowKind::Hann => frame
            .iter()
            .zip(kind.weights(frame.len()))
            .map(|(x, w)| x * w)
            .collect(),
    }
}
