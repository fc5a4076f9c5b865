//! Synthetic noise floors: flat levels or continuous piecewise power laws.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::{db_from_linear, linear_from_db, FrequencyGrid, Spectrum, SpectrumUnit};

/// Allowed level mismatch where two power-law segments meet, dB.
pub const JUNCTION_TOLERANCE_DB: f64 = 0.01;

/// One power-law piece: `level_db + 10 exponent log10(f / f_corner_hz)`,
/// valid from `f_corner_hz` up to the next segment's corner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerLawSegment {
    pub f_corner_hz: f64,
    pub exponent: f64,
    pub level_db: f64,
}

impl PowerLawSegment {
    fn level_at(&self, f: f64) -> f64 {
        self.level_db + 10.0 * self.exponent * (f / self.f_corner_hz).log10()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FloorSpec {
    /// Constant level in dB/Hz.
    Flat { level_db: f64 },
    /// Segments sorted by corner; the first also extends below its corner.
    PowerLaw { segments: Vec<PowerLawSegment> },
}

impl FloorSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            FloorSpec::Flat { level_db } if !level_db.is_finite() => Err(Error::domain(format!(
                "flat floor level must be finite, got {level_db}"
            ))),
            FloorSpec::Flat { .. } => Ok(()),
            FloorSpec::PowerLaw { segments } => {
                if segments.is_empty() {
                    return Err(Error::domain("power-law floor needs at least one segment"));
                }
                for s in segments {
                    if !(s.f_corner_hz.is_finite() && s.f_corner_hz > 0.0)
                        || !s.exponent.is_finite()
                        || !s.level_db.is_finite()
                    {
                        return Err(Error::domain(format!("invalid power-law segment {s:?}")));
                    }
                }
                for w in segments.windows(2) {
                    if w[1].f_corner_hz <= w[0].f_corner_hz {
                        return Err(Error::domain(
                            "power-law corners must be strictly increasing",
                        ));
                    }
                    let reached = w[0].level_at(w[1].f_corner_hz);
                    if (reached - w[1].level_db).abs() > JUNCTION_TOLERANCE_DB {
                        return Err(Error::domain(format!(
                            "discontinuous power law at {} Hz: previous segment reaches {reached:.3} dB, next starts at {:.3} dB",
                            w[1].f_corner_hz, w[1].level_db
                        )));
                    }
                }
                Ok(())
            }
        }
    }

    /// Level in dB at `f`.
    pub fn level_db(&self, f: f64) -> f64 {
        match self {
            FloorSpec::Flat { level_db } => *level_db,
            FloorSpec::PowerLaw { segments } => {
                let idx = segments.partition_point(|s| s.f_corner_hz <= f).max(1) - 1;
                segments[idx].level_at(f)
            }
        }
    }

    pub fn describe(&self) -> String {
        match self {
            FloorSpec::Flat { level_db } => format!("flat {level_db} dB/Hz"),
            FloorSpec::PowerLaw { segments } => segments
                .iter()
                .map(|s| {
                    format!(
                        "{} dB at {} Hz, f^{}",
                        s.level_db, s.f_corner_hz, s.exponent
                    )
                })
                .collect::<Vec<_>>()
                .join("; "),
        }
    }
}

/// Samples a floor on `grid` as a linear RIN spectrum.
pub fn synthesize_floor(spec: &FloorSpec, grid: &FrequencyGrid<f64>) -> Result<Spectrum<f64>> {
    spec.validate()?;
    let values = grid
        .points()
        .iter()
        .map(|&f| linear_from_db(spec.level_db(f)))
        .collect::<Result<Vec<_>>>()?;
    Spectrum::new(grid.clone(), values, SpectrumUnit::RinLinear)
}

/// Level of `floor` relative to `reference`, both linear, in dB.
pub fn gap_db(floor: f64, reference: f64) -> Result<f64> {
    Ok(db_from_linear(floor)? - db_from_linear(reference)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::log_spaced_grid;

    #[test]
    fn flat_floors() {
        let g = log_spaced_grid(1e3, 1e5, 11).unwrap();
        let s = synthesize_floor(&FloorSpec::Flat { level_db: -157.0 }, &g).unwrap();
        assert!(s.values().iter().all(|v| (v - 1.995e-16).abs() < 0.001e-16));
        let s = synthesize_floor(&FloorSpec::Flat { level_db: -160.0 }, &g).unwrap();
        assert!(s.values().iter().all(|v| (v - 1.0e-16).abs() < 1e-28));
    }

    #[test]
    fn power_law_slope() {
        let spec = FloorSpec::PowerLaw {
            segments: vec![PowerLawSegment {
                f_corner_hz: 1e3,
                exponent: -2.0,
                level_db: -100.0,
            }],
        };
        assert!((spec.level_db(1e4) + 120.0).abs() < 1e-12);
        assert!((spec.level_db(100.0) + 80.0).abs() < 1e-12);
    }

    #[test]
    fn continuous_segments_accepted() {
        let spec = FloorSpec::PowerLaw {
            segments: vec![
                PowerLawSegment {
                    f_corner_hz: 1e3,
                    exponent: -2.0,
                    level_db: -100.0,
                },
                PowerLawSegment {
                    f_corner_hz: 1e4,
                    exponent: 0.0,
                    level_db: -120.0,
                },
            ],
        };
        spec.validate().unwrap();
        assert!((spec.level_db(5e4) + 120.0).abs() < 1e-12);
        assert!((spec.level_db(1e4) + 120.0).abs() < 1e-12);
    }

    #[test]
    fn discontinuous_segments_rejected() {
        let spec = FloorSpec::PowerLaw {
            segments: vec![
                PowerLawSegment {
                    f_corner_hz: 1e3,
                    exponent: -2.0,
                    level_db: -100.0,
                },
                PowerLawSegment {
                    f_corner_hz: 1e4,
                    exponent: 0.0,
                    level_db: -110.0,
                },
            ],
        };
        assert!(spec.validate().is_err());
        assert!(FloorSpec::PowerLaw { segments: vec![] }.validate().is_err());
        assert!(FloorSpec::Flat { level_db: f64::NAN }.validate().is_err());
    }
}
