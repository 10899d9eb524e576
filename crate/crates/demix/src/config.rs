//! Separation spec and the tunable constant family shared by every stage.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Minimum center separation in units of sigma*sqrt(d), and the derived
/// deconvolution width delta_bar = delta_big / c32.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeparationSpec {
    pub delta_big: f64,
    pub delta_bar: f64,
    pub c32: f64,
}

impl SeparationSpec {
    pub fn new(delta_big: f64, c32: f64) -> Result<Self> {
        let s = SeparationSpec {
            delta_big,
            delta_bar: delta_big / c32,
            c32,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.delta_big.is_finite() || self.delta_big <= 0.0 {
            return Err(Error::InvalidConfig {
                field: "separation.delta_big".into(),
                reason: format!("must be positive, got {}", self.delta_big),
            });
        }
        if !self.c32.is_finite() || self.c32 < 1.0 {
            return Err(Error::InvalidConfig {
                field: "separation.c32".into(),
                reason: format!("must be >= 1, got {}", self.c32),
            });
        }
        if self.delta_bar != self.delta_big / self.c32 {
            return Err(Error::InvalidConfig {
                field: "separation.delta_bar".into(),
                reason: "must equal delta_big / c32 exactly".into(),
            });
        }
        Ok(())
    }
}

/// The tunable constant family. Fields keep their conventional short names;
/// every run echoes the values it used into its report so no silent defaults
/// exist. Defaults are desk-scale settings; honest theoretical settings make
/// the budgets astronomically large (see `theory_budgets`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConstantsConfig {
    /// Proximity-split log argument scale.
    pub c1: f64,
    /// Projected dimension scale: dbar = ceil(c1_5 * ln k).
    pub c1_5: f64,
    /// Separation-to-deconvolution-width ratio: delta_bar = delta / c3_2.
    pub c3_2: f64,
    /// Frequency-ball radius term sqrt(c3_5 * ln k).
    pub c3_5: f64,
    /// Theoretical sampling-budget exponent.
    pub c3_6: f64,
    /// Retry / repeat-count multiplier (count_max = c4_5 * k).
    pub c4_5: f64,
    /// Consensus agreement exponent: boost tolerance is delta*sqrt(dbar)/k^c4_6.
    pub c4_6: f64,
    /// Lattice-cardinality exponent used in the size guard (k^c7 scale).
    pub c7: f64,
    /// Weight lower-bound constant: w_min >= c / k.
    pub c: f64,
    /// Failure probability budget.
    pub eta: f64,
    /// Caller-facing target accuracy.
    pub delta_acc: f64,
}

impl Default for ConstantsConfig {
    fn default() -> Self {
        ConstantsConfig {
            c1: 10.0,
            c1_5: 2.0,
            c3_2: 2.5,
            c3_5: 0.5,
            c3_6: 3.0,
            c4_5: 10.0,
            c4_6: 1.0,
            c7: 2.0,
            c: 1.0,
            eta: 0.1,
            delta_acc: 0.1,
        }
    }
}

impl ConstantsConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("constants.c1", self.c1),
            ("constants.c1_5", self.c1_5),
            ("constants.c3_2", self.c3_2),
            ("constants.c3_5", self.c3_5),
            ("constants.c3_6", self.c3_6),
            ("constants.c4_5", self.c4_5),
            ("constants.c4_6", self.c4_6),
            ("constants.c7", self.c7),
            ("constants.c", self.c),
            ("constants.eta", self.eta),
            ("constants.delta_acc", self.delta_acc),
        ];
        for (field, v) in positive {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::InvalidConfig {
                    field: field.into(),
                    reason: format!("must be strictly positive, got {v}"),
                });
            }
        }
        if self.c > 1.0 {
            return Err(Error::InvalidConfig {
                field: "constants.c".into(),
                reason: format!("must be <= 1, got {}", self.c),
            });
        }
        if self.eta >= 1.0 {
            return Err(Error::InvalidConfig {
                field: "constants.eta".into(),
                reason: format!("must be in (0,1), got {}", self.eta),
            });
        }
        Ok(())
    }
}
