//! Simplex events for rate checks: explicit descriptions keep the target
//! −inf I_W computable by the certified oracles.

use serde::{Deserialize, Serialize};

use mfldp_core::{DiscreteMeasure, StateSpace};

/// An event on the simplex of probability vectors over a finite space.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SimplexEvent {
    /// The whole simplex.
    All,
    /// lo ≤ ν(labels) ≤ hi for the total mass of a label set.
    MassOfSet {
        labels: Vec<String>,
        #[serde(default)]
        lo: f64,
        #[serde(default = "one")]
        hi: f64,
    },
    /// lo ≤ m(ν) ≤ hi for the spin magnetization.
    MagnetizationBand { lo: f64, hi: f64 },
    /// |m(ν)| ≥ threshold.
    AbsMagnetizationAtLeast { threshold: f64 },
}

fn one() -> f64 {
    1.0
}

impl SimplexEvent {
    /// Membership for a dense weight vector over the space's labels.
    pub fn contains(&self, space: &StateSpace, weights: &[f64]) -> bool {
        let f = match space.as_finite() {
            Some(f) => f,
            None => return false,
        };
        match self {
            SimplexEvent::All => true,
            SimplexEvent::MassOfSet { labels, lo, hi } => {
                let mass: f64 = labels
                    .iter()
                    .filter_map(|l| f.index_of(l))
                    .map(|i| weights[i])
                    .sum();
                mass >= *lo - 1e-12 && mass <= *hi + 1e-12
            }
            SimplexEvent::MagnetizationBand { lo, hi } => {
                let m = magnetization(f.len(), weights);
                m >= *lo - 1e-12 && m <= *hi + 1e-12
            }
            SimplexEvent::AbsMagnetizationAtLeast { threshold } => {
                magnetization(f.len(), weights).abs() >= *threshold - 1e-12
            }
        }
    }

    pub fn contains_measure(&self, nu: &DiscreteMeasure) -> bool {
        match nu.dense_weights() {
            Ok(w) => self.contains(nu.space(), &w),
            Err(_) => false,
        }
    }

    pub fn describe(&self) -> String {
        match self {
            SimplexEvent::All => "whole simplex".into(),
            SimplexEvent::MassOfSet { labels, lo, hi } => {
                format!("{} <= nu({}) <= {}", lo, labels.join("+"), hi)
            }
            SimplexEvent::MagnetizationBand { lo, hi } => format!("{lo} <= m <= {hi}"),
            SimplexEvent::AbsMagnetizationAtLeast { threshold } => format!("|m| >= {threshold}"),
        }
    }
}

fn magnetization(states: usize, weights: &[f64]) -> f64 {
    // spin convention: state index i carries value 2i−1 on two-point spaces;
    // for larger spaces this is the mean of equally spaced values in [−1, 1]
    if states < 2 {
        return 0.0;
    }
    weights
        .iter()
        .enumerate()
        .map(|(i, w)| w * (2.0 * i as f64 / (states as f64 - 1.0) - 1.0))
        .sum()
}
