//! Element-wise coefficient fields rho(x) for the experiment families:
//! constant, horizontal channels per subdomain, and log-uniform random per
//! element.
//!
//! Evaluation is deterministic: the random family draws from ChaCha8 keyed
//! by (seed, subdomain, element), so values do not depend on the order in
//! which elements are visited.

use crate::geometry::Rect;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CoefficientError {
    #[error("coefficient value must be positive, got {0}")]
    NonPositive(f64),
    #[error("channel contrast eta must be positive, got {0}")]
    NonPositiveEta(f64),
    #[error("random exponent range requires lo < hi, got ({0}, {1})")]
    EmptyRange(f64, f64),
    #[error("stripe bounds must satisfy 0 <= lo < hi <= 1")]
    BadStripes,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelLayout {
    One,
    Three,
}

/// Relative-height stripe bands for the channel layouts.
pub fn default_stripes(layout: ChannelLayout) -> Vec<[f64; 2]> {
    match layout {
        ChannelLayout::One => vec![[2.0 / 5.0, 3.0 / 5.0]],
        ChannelLayout::Three => vec![
            [1.0 / 7.0, 2.0 / 7.0],
            [3.0 / 7.0, 4.0 / 7.0],
            [5.0 / 7.0, 6.0 / 7.0],
        ],
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum CoefficientField {
    Constant {
        value: f64,
    },
    Channels {
        layout: ChannelLayout,
        eta: f64,
        /// Relative-height bands overriding the layout default.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        stripes: Option<Vec<[f64; 2]>>,
    },
    Random {
        seed: u64,
        lo: f64,
        hi: f64,
    },
}

pub fn constant_field(value: f64) -> Result<CoefficientField, CoefficientError> {
    if !value.is_finite() || value <= 0.0 {
        return Err(CoefficientError::NonPositive(value));
    }
    Ok(CoefficientField::Constant { value })
}

pub fn channel_field(
    layout: ChannelLayout,
    eta: f64,
) -> Result<CoefficientField, CoefficientError> {
    if !eta.is_finite() || eta <= 0.0 {
        return Err(CoefficientError::NonPositiveEta(eta));
    }
    Ok(CoefficientField::Channels {
        layout,
        eta,
        stripes: None,
    })
}

pub fn random_field(seed: u64, lo: f64, hi: f64) -> Result<CoefficientField, CoefficientError> {
    if !lo.is_finite() || !hi.is_finite() || lo >= hi {
        return Err(CoefficientError::EmptyRange(lo, hi));
    }
    Ok(CoefficientField::Random { seed, lo, hi })
}

impl CoefficientField {
    pub fn validate(&self) -> Result<(), CoefficientError> {
        match self {
            CoefficientField::Constant { value } => {
                if !value.is_finite() || *value <= 0.0 {
                    return Err(CoefficientError::NonPositive(*value));
                }
            }
            CoefficientField::Channels { eta, stripes, .. } => {
                if !eta.is_finite() || *eta <= 0.0 {
                    return Err(CoefficientError::NonPositiveEta(*eta));
                }
                if let Some(bands) = stripes {
                    for b in bands {
                        if !(b[0] >= 0.0 && b[0] < b[1] && b[1] <= 1.0) {
                            return Err(CoefficientError::BadStripes);
                        }
                    }
                }
            }
            CoefficientField::Random { lo, hi, .. } => {
                if !lo.is_finite() || !hi.is_finite() || lo >= hi {
                    return Err(CoefficientError::EmptyRange(*lo, *hi));
                }
            }
        }
        Ok(())
    }

    /// Coefficient on one element, classified by its centroid.
    pub fn value(
        &self,
        subdomain_id: usize,
        element_id: usize,
        centroid: [f64; 2],
        rect: &Rect,
    ) -> f64 {
        match self {
            CoefficientField::Constant { value } => *value,
            CoefficientField::Channels {
                layout,
                eta,
                stripes,
            } => {
                let rel = (centroid[1] - rect.y0) / rect.h;
                let bands = stripes
                    .clone()
                    .unwrap_or_else(|| default_stripes(*layout));
                if bands.iter().any(|b| rel >= b[0] && rel <= b[1]) {
                    *eta
                } else {
                    1.0
                }
            }
            CoefficientField::Random { seed, lo, hi } => {
                let u = unit_draw(*seed, subdomain_id as u64, element_id as u64);
                let r = lo + (hi - lo) * u;
                10f64.powf(r)
            }
        }
    }
}

/// One draw from (0, 1), ChaCha8 keyed by (seed, subdomain, element).
fn unit_draw(seed: u64, subdomain: u64, element: u64) -> f64 {
    let mut key = [0u8; 32];
    key[0..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&subdomain.to_le_bytes());
    key[16..24].copy_from_slice(&element.to_le_bytes());
    let mut rng = rand_chacha::ChaCha8Rng::from_seed(key);
    let x = rng.next_u64();
    // 53 significant bits, shifted into the open interval.
    ((x >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}
