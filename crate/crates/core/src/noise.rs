//! Decibel arithmetic, frequency grids and unit-tagged power spectral densities.
//!
//! Quadrature variances are dimensionless with the vacuum (shot-noise) level
//! at 1. Absolute scaling only enters through the shot-noise RIN computed in
//! [`crate::feedback`]. All decibels are power decibels.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::scalar::{lit, to_f64, Real};

/// `10 log10(x)` for a strictly positive, finite `x`.
pub fn db_from_linear<T: Real>(x: T) -> Result<T> {
    if !x.is_finite() || x <= T::zero() {
        return Err(Error::domain(format!(
            "decibel conversion needs a positive finite value, got {x}"
        )));
    }
    Ok(lit::<T>(10.0) * x.log10())
}

/// `10^(d/10)` for a finite `d`.
pub fn linear_from_db<T: Real>(d: T) -> Result<T> {
    if !d.is_finite() {
        return Err(Error::domain(format!("non-finite decibel value {d}")));
    }
    Ok(lit::<T>(10.0).powf(d / lit(10.0)))
}

/// Ordered set of analysis frequencies in Hz.
#[derive(Clone, PartialEq)]
pub struct FrequencyGrid<T> {
    points: Arc<[T]>,
}

impl<T: Real> FrequencyGrid<T> {
    pub fn new(points: Vec<T>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::domain("frequency grid is empty"));
        }
        if let Some(bad) = points.iter().find(|f| !f.is_finite() || **f <= T::zero()) {
            return Err(Error::domain(format!(
                "frequency grid points must be finite and positive, got {bad}"
            )));
        }
        if points.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::domain("frequency grid must be strictly increasing"));
        }
        Ok(Self {
            points: points.into(),
        })
    }

    pub fn points(&self) -> &[T] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Angular frequencies `2 pi f`.
    pub fn angular(&self) -> impl Iterator<Item = T> + '_ {
        self.points.iter().map(|&f| T::TAU() * f)
    }
}

impl<T: fmt::Debug> fmt::Debug for FrequencyGrid<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.points.iter()).finish()
    }
}

/// `n` logarithmically spaced points from `f_min` to `f_max` inclusive.
pub fn log_spaced_grid<T: Real>(f_min: T, f_max: T, n: usize) -> Result<FrequencyGrid<T>> {
    if !(f_min.is_finite() && f_max.is_finite()) || f_min <= T::zero() || f_max <= f_min {
        return Err(Error::domain(format!(
            "log grid needs 0 < f_min < f_max, got [{f_min}, {f_max}]"
        )));
    }
    if n < 2 {
        return Err(Error::domain(format!(
            "log grid needs at least 2 points, got {n}"
        )));
    }
    let lo = f_min.ln();
    let span = f_max.ln() - lo;
    let last = T::from_usize(n - 1).unwrap();
    let points = (0..n)
        .map(|i| match i {
            0 => f_min,
            i if i == n - 1 => f_max,
            i => (lo + span * T::from_usize(i).unwrap() / last).exp(),
        })
        .collect();
    FrequencyGrid::new(points)
}

/// Physical unit of a spectral density.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SpectrumUnit {
    /// Relative intensity noise, linear 1/Hz.
    RinLinear,
    /// Relative intensity noise, dB/Hz.
    RinDb,
    /// Frequency noise, Hz^2/Hz.
    FreqNoiseLinear,
    /// Frequency noise, dB re 1 Hz^2/Hz.
    FreqNoiseDb,
    /// Phase noise, rad^2/Hz.
    PhaseNoise,
}

impl SpectrumUnit {
    pub fn is_linear(self) -> bool {
        !matches!(self, SpectrumUnit::RinDb | SpectrumUnit::FreqNoiseDb)
    }

    /// The decibel counterpart of a linear unit, if one exists.
    pub fn db_counterpart(self) -> Option<SpectrumUnit> {
        match self {
            SpectrumUnit::RinLinear => Some(SpectrumUnit::RinDb),
            SpectrumUnit::FreqNoiseLinear => Some(SpectrumUnit::FreqNoiseDb),
            _ => None,
        }
    }

    pub fn linear_counterpart(self) -> Option<SpectrumUnit> {
        match self {
            SpectrumUnit::RinDb => Some(SpectrumUnit::RinLinear),
            SpectrumUnit::FreqNoiseDb => Some(SpectrumUnit::FreqNoiseLinear),
            _ => None,
        }
    }

    /// Stable identifier used in exported files.
    pub fn label(self) -> &'static str {
        match self {
            SpectrumUnit::RinLinear => "rin2_per_hz",
            SpectrumUnit::RinDb => "rin_db_per_hz",
            SpectrumUnit::FreqNoiseLinear => "hz2_per_hz",
            SpectrumUnit::FreqNoiseDb => "db_re_1hz2_per_hz",
            SpectrumUnit::PhaseNoise => "rad2_per_hz",
        }
    }

    pub fn from_label(label: &str) -> Option<Self> {
        [
            SpectrumUnit::RinLinear,
            SpectrumUnit::RinDb,
            SpectrumUnit::FreqNoiseLinear,
            SpectrumUnit::FreqNoiseDb,
            SpectrumUnit::PhaseNoise,
        ]
        .into_iter()
        .find(|u| u.label() == label)
    }
}

/// A spectral density sampled on a [`FrequencyGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum<T> {
    grid: FrequencyGrid<T>,
    values: Vec<T>,
    unit: SpectrumUnit,
}

impl<T: Real> Spectrum<T> {
    pub fn new(grid: FrequencyGrid<T>, values: Vec<T>, unit: SpectrumUnit) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::structural(format!(
                "spectrum has {} values for {} grid points",
                values.len(),
                grid.len()
            )));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::domain(format!("non-finite spectral value {bad}")));
        }
        if unit.is_linear() {
            if let Some(bad) = values.iter().find(|v| **v < T::zero()) {
                return Err(Error::domain(format!(
                    "negative value {bad} in linear spectrum ({})",
                    unit.label()
                )));
            }
        }
        Ok(Self { grid, values, unit })
    }

    /// Constant density over the grid.
    pub fn flat(grid: FrequencyGrid<T>, value: T, unit: SpectrumUnit) -> Result<Self> {
        let values = vec![value; grid.len()];
        Self::new(grid, values, unit)
    }

    /// Samples `f(freq)` at every grid point.
    pub fn from_fn(
        grid: FrequencyGrid<T>,
        unit: SpectrumUnit,
        f: impl FnMut(T) -> T,
    ) -> Result<Self> {
        let values = grid.points().iter().copied().map(f).collect();
        Self::new(grid, values, unit)
    }

    pub fn grid(&self) -> &FrequencyGrid<T> {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn unit(&self) -> SpectrumUnit {
        self.unit
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (T, T)> + '_ {
        self.grid
            .points()
            .iter()
            .copied()
            .zip(self.values.iter().copied())
    }

    /// Linear to decibel form. Zero densities have no decibel value and are rejected.
    pub fn to_db(&self) -> Result<Self> {
        let unit = self.unit.db_counterpart().ok_or_else(|| {
            Error::structural(format!("no decibel form for unit {}", self.unit.label()))
        })?;
        let values = self
            .values
            .iter()
            .map(|&v| db_from_linear(v))
            .collect::<Result<Vec<_>>>()?;
        Self::new(self.grid.clone(), values, unit)
    }

    pub fn to_linear(&self) -> Result<Self> {
        let unit = self.unit.linear_counterpart().ok_or_else(|| {
            Error::structural(format!("unit {} is not a decibel unit", self.unit.label()))
        })?;
        let values = self
            .values
            .iter()
            .map(|&v| linear_from_db(v))
            .collect::<Result<Vec<_>>>()?;
        Self::new(self.grid.clone(), values, unit)
    }

    /// Reinterprets a linear density under another linear unit without
    /// touching the numbers, e.g. a phase-quadrature RIN floor read as rad^2/Hz.
    pub fn relabel(&self, unit: SpectrumUnit) -> Result<Self> {
        if !self.unit.is_linear() || !unit.is_linear() {
            return Err(Error::structural(
                "relabel is only defined between linear units",
            ));
        }
        Ok(Self {
            grid: self.grid.clone(),
            values: self.values.clone(),
            unit,
        })
    }

    /// Pointwise multiplication by a non-negative factor.
    pub fn scaled(&self, factor: T) -> Result<Self> {
        if !self.unit.is_linear() {
            return Err(Error::structural(
                "scaling a decibel spectrum is not defined",
            ));
        }
        Self::new(
            self.grid.clone(),
            self.values.iter().map(|&v| v * factor).collect(),
            self.unit,
        )
    }

    /// Value at an exact grid frequency, or log-log interpolated between neighbours.
    pub fn value_at(&self, f: T) -> Option<T> {
        let pts = self.grid.points();
        let idx = pts.partition_point(|&p| p < f);
        if idx < pts.len() && pts[idx] == f {
            return Some(self.values[idx]);
        }
        if idx == 0 || idx == pts.len() {
            return None;
        }
        let (f0, f1) = (pts[idx - 1], pts[idx]);
        let (v0, v1) = (self.values[idx - 1], self.values[idx]);
        if v0 == v1 {
            return Some(v0);
        }
        let w = (f.ln() - f0.ln()) / (f1.ln() - f0.ln());
        if self.unit.is_linear() && v0 > T::zero() && v1 > T::zero() {
            Some((v0.ln() + w * (v1.ln() - v0.ln())).exp())
        } else {
            Some(v0 + w * (v1 - v0))
        }
    }

    pub(crate) fn values_f64(&self) -> Vec<f64> {
        self.values.iter().map(|&v| to_f64(v)).collect()
    }
}

/// Pointwise sum of uncorrelated linear power densities.
pub fn uncorrelated_sum<T: Real>(spectra: &[&Spectrum<T>]) -> Result<Spectrum<T>> {
    let (first, rest) = spectra
        .split_first()
        .ok_or_else(|| Error::structural("uncorrelated sum of zero spectra"))?;
    if !first.unit.is_linear() {
        return Err(Error::structural(format!(
            "uncorrelated sum needs linear units, got {}",
            first.unit.label()
        )));
    }
    let mut values = first.values.clone();
    for s in rest {
        if s.unit != first.unit {
            return Err(Error::structural(format!(
                "unit mismatch in sum: {} vs {}",
                first.unit.label(),
                s.unit.label()
            )));
        }
        if s.grid != first.grid {
            return Err(Error::structural("grid mismatch in uncorrelated sum"));
        }
        for (acc, &v) in values.iter_mut().zip(&s.values) {
            *acc += v;
        }
    }
    Spectrum::new(first.grid.clone(), values, first.unit)
}

/// Symmetric-ordering variances of the amplitude (`s_x`) and phase (`s_y`)
/// quadratures, normalized so vacuum is `(1, 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureVariances<T> {
    s_x: T,
    s_y: T,
}

impl<T: Real> QuadratureVariances<T> {
    pub fn new(s_x: T, s_y: T) -> Result<Self> {
        for (name, v) in [("s_x", s_x), ("s_y", s_y)] {
            if !v.is_finite() || v <= T::zero() {
                return Err(Error::domain(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        Ok(Self { s_x, s_y })
    }

    pub fn vacuum() -> Self {
        Self {
            s_x: T::one(),
            s_y: T::one(),
        }
    }

    /// Builds `(10^(-squeezing/10), 10^(antisqueezing/10))` from decibel magnitudes.
    pub fn from_db(squeezing_db: T, antisqueezing_db: T) -> Result<Self> {
        Self::new(
            linear_from_db(-squeezing_db)?,
            linear_from_db(antisqueezing_db)?,
        )
    }

    pub fn s_x(&self) -> T {
        self.s_x
    }

    pub fn s_y(&self) -> T {
        self.s_y
    }

    /// `s_x * s_y`; at least 1 for physical states.
    pub fn uncertainty_product(&self) -> T {
        self.s_x * self.s_y
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn db_examples() {
        assert_eq!(db_from_linear(1.0_f64).unwrap(), 0.0);
        assert!(close(db_from_linear(10.0_f64).unwrap(), 10.0, 1e-12));
        assert!(close(db_from_linear(5.126e-15_f64).unwrap(), -142.9, 0.05));
        assert!(db_from_linear(0.0_f64).is_err());
        assert!(db_from_linear(-1.0_f64).is_err());
        assert!(db_from_linear(f64::NAN).is_err());
        assert!(db_from_linear(f64::INFINITY).is_err());
    }

    #[test]
    fn linear_examples() {
        assert_eq!(linear_from_db(0.0_f64).unwrap(), 1.0);
        assert!(close(linear_from_db(-3.0103_f64).unwrap(), 0.5, 1e-5));
        assert!(close(linear_from_db(-10.6_f64).unwrap(), 0.0871, 1e-4));
        assert!(linear_from_db(f64::NAN).is_err());
        assert!(linear_from_db(f64::NEG_INFINITY).is_err());
    }

    #[test]
    fn works_in_single_precision() {
        let d = db_from_linear(100.0_f32).unwrap();
        assert!((d - 20.0).abs() < 1e-5);
    }

    #[test]
    fn grid_examples() {
        let g = log_spaced_grid(1.0_f64, 10.0, 2).unwrap();
        assert_eq!(g.points(), &[1.0, 10.0]);
        let g = log_spaced_grid(1e3_f64, 1e5, 3).unwrap();
        assert!(close(g.points()[1], 1e4, 1e-8));
        assert_eq!(g.points()[0], 1e3);
        assert_eq!(g.points()[2], 1e5);
        let g = log_spaced_grid(1e3_f64, 1e5, 201).unwrap();
        let ratio = 100.0_f64.powf(1.0 / 200.0);
        for w in g.points().windows(2) {
            assert!(close(w[1] / w[0], ratio, 1e-12));
        }
    }

    #[test]
    fn grid_rejects_bad_input() {
        assert!(log_spaced_grid(0.0_f64, 10.0, 5).is_err());
        assert!(log_spaced_grid(10.0_f64, 1.0, 5).is_err());
        assert!(log_spaced_grid(1.0_f64, 10.0, 1).is_err());
        assert!(FrequencyGrid::new(Vec::<f64>::new()).is_err());
        assert!(FrequencyGrid::new(vec![1.0, 1.0]).is_err());
        assert!(FrequencyGrid::new(vec![-1.0, 1.0]).is_err());
    }

    #[test]
    fn spectrum_rejects_negative_linear_values() {
        let g = FrequencyGrid::new(vec![1.0_f64, 2.0]).unwrap();
        assert!(Spectrum::new(g.clone(), vec![1.0, -1.0], SpectrumUnit::RinLinear).is_err());
        assert!(Spectrum::new(g.clone(), vec![1.0], SpectrumUnit::RinLinear).is_err());
        assert!(Spectrum::new(g, vec![-150.0, -151.0], SpectrumUnit::RinDb).is_ok());
    }

    #[test]
    fn sum_examples() {
        let g = log_spaced_grid(1e3_f64, 1e5, 5).unwrap();
        let s = Spectrum::flat(g.clone(), 2.0e-16, SpectrumUnit::RinLinear).unwrap();
        assert_eq!(uncorrelated_sum(&[&s]).unwrap(), s);

        let doubled = uncorrelated_sum(&[&s, &s]).unwrap().to_db().unwrap();
        let single = s.to_db().unwrap();
        for (a, b) in doubled.values().iter().zip(single.values()) {
            assert!(close(a - b, 3.0103, 1e-4));
        }

        let d = Spectrum::flat(
            g.clone(),
            linear_from_db(-151.0).unwrap(),
            SpectrumUnit::RinLinear,
        )
        .unwrap();
        let efg =
            Spectrum::flat(g, linear_from_db(-152.6).unwrap(), SpectrumUnit::RinLinear).unwrap();
        let h = uncorrelated_sum(&[&d, &efg]).unwrap().to_db().unwrap();
        // brute force: 10^-15.1 + 10^-15.26 = 7.943e-16 + 5.495e-16
        let oracle = 10.0 * (10f64.powf(-15.1) + 10f64.powf(-15.26)).log10();
        assert!(close(oracle, -148.7, 0.3));
        for v in h.values() {
            assert!(close(*v, oracle, 1e-9));
        }
    }

    #[test]
    fn sum_rejects_mismatches() {
        let g1 = FrequencyGrid::new(vec![1.0_f64, 2.0]).unwrap();
        let g2 = FrequencyGrid::new(vec![1.0_f64, 3.0]).unwrap();
        let a = Spectrum::flat(g1.clone(), 1.0, SpectrumUnit::RinLinear).unwrap();
        let b = Spectrum::flat(g2, 1.0, SpectrumUnit::RinLinear).unwrap();
        let c = Spectrum::flat(g1.clone(), 1.0, SpectrumUnit::FreqNoiseLinear).unwrap();
        let d = Spectrum::flat(g1, 1.0, SpectrumUnit::RinDb).unwrap();
        assert!(matches!(
            uncorrelated_sum(&[&a, &b]),
            Err(Error::Structural(_))
        ));
        assert!(matches!(
            uncorrelated_sum(&[&a, &c]),
            Err(Error::Structural(_))
        ));
        assert!(matches!(
            uncorrelated_sum(&[&d, &d]),
            Err(Error::Structural(_))
        ));
        assert!(uncorrelated_sum::<f64>(&[]).is_err());
    }

    #[test]
    fn db_conversions_keep_grid() {
        let g = log_spaced_grid(1e3_f64, 1e5, 7).unwrap();
        let s = Spectrum::from_fn(g.clone(), SpectrumUnit::FreqNoiseLinear, |f| 1e6 / f).unwrap();
        let db = s.to_db().unwrap();
        assert_eq!(db.unit(), SpectrumUnit::FreqNoiseDb);
        assert_eq!(db.grid(), &g);
        let back = db.to_linear().unwrap();
        for (a, b) in back.values().iter().zip(s.values()) {
            assert!(((a - b) / b).abs() < 1e-12);
        }
        assert!(s.to_linear().is_err());
        let phase = Spectrum::flat(g, 1.0, SpectrumUnit::PhaseNoise).unwrap();
        assert!(phase.to_db().is_err());
    }

    #[test]
    fn quadrature_variances_validate() {
        assert!(QuadratureVariances::new(0.0_f64, 1.0).is_err());
        assert!(QuadratureVariances::new(1.0_f64, f64::NAN).is_err());
        let v = QuadratureVariances::from_db(10.6_f64, 17.0).unwrap();
        assert!(close(v.s_x(), 0.0871, 1e-4));
        assert!(close(v.s_y(), 50.12, 0.01));
    }

    #[test]
    fn value_at_interpolates() {
        let g = FrequencyGrid::new(vec![1e3_f64, 1e4]).unwrap();
        let s = Spectrum::new(g, vec![1.0, 100.0], SpectrumUnit::RinLinear).unwrap();
        assert_eq!(s.value_at(1e3), Some(1.0));
        assert!(close(s.value_at(10f64.powf(3.5)).unwrap(), 10.0, 1e-9));
        assert_eq!(s.value_at(10.0), None);
    }
}
