//! Scenario orchestration: builds every model component from a
//! [`ScenarioConfig`], synthesizes the eight-trace family and the budget
//! report, and hands them to the exporters.
//!
//! Traces (b) through (h) are relative intensity noise referred to the
//! in-loop readout, so the classical reference sits at the in-loop shot
//! noise and the floors at their directly measured levels. Trace (a) is
//! the free-running frequency noise.

mod config;
mod export;
mod floor;

pub use config::{
    load_config, EchoLine, GridSpec, LedgerSettings, Provenance, ScenarioConfig, ServoSetting,
};
pub use export::{
    export_budget, export_traces, format_sig6, read_traces_json, traces_to_csv, traces_to_json,
    OutputFormat, BUDGET_SCHEMA_VERSION, TRACE_SCHEMA_VERSION,
};
pub use floor::{gap_db, synthesize_floor, FloorSpec, PowerLawSegment};

use serde::Serialize;

use crate::budget::{
    build_report, coupling_fraction_total, ledger_chain, BudgetReport, EnhancementLedger,
};
use crate::error::{Error, Result};
use crate::feedback::{
    calibrate_unity_gain, cross_cavity_normalization, freq_noise_from_phase,
    referred_closed_loop_terms, shot_noise_rsn2, NoiseFloors, ServoModel,
};
use crate::noise::{
    db_from_linear, linear_from_db, log_spaced_grid, uncorrelated_sum, FrequencyGrid, Spectrum,
    SpectrumUnit,
};

/// Band over which the closed-loop enhancement is assessed, Hz.
pub const ENHANCEMENT_BAND_HZ: (f64, f64) = (5e3, 60e3);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TraceId {
    A,
    B,
    C,
    D,
    E,
    F,
    G,
    H,
}

impl TraceId {
    pub const ALL: [TraceId; 8] = [
        TraceId::A,
        TraceId::B,
        TraceId::C,
        TraceId::D,
        TraceId::E,
        TraceId::F,
        TraceId::G,
        TraceId::H,
    ];

    /// Column / key name, `trace_a` .. `trace_h`.
    pub fn key(self) -> &'static str {
        match self {
            TraceId::A => "trace_a",
            TraceId::B => "trace_b",
            TraceId::C => "trace_c",
            TraceId::D => "trace_d",
            TraceId::E => "trace_e",
            TraceId::F => "trace_f",
            TraceId::G => "trace_g",
            TraceId::H => "trace_h",
        }
    }

    pub fn from_key(key: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|t| t.key() == key)
    }

    pub fn role(self) -> &'static str {
        match self {
            TraceId::A => "free-running frequency noise (synthetic)",
            TraceId::B => "classical closed-loop reference",
            TraceId::C => "quantum-enhanced closed loop",
            TraceId::D => "simulated squeezing enhancement",
            TraceId::E => "servo-suppressed in-loop residual",
            TraceId::F => "residual amplitude noise",
            TraceId::G => "in-loop detector electronic noise",
            TraceId::H => "uncorrelated sum of (d), (e), (f), (g)",
        }
    }
}

/// The eight named spectra on a common grid, in linear units.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceSet {
    grid: FrequencyGrid<f64>,
    traces: Vec<Spectrum<f64>>,
}

impl TraceSet {
    /// `traces` must be given in [`TraceId::ALL`] order.
    pub fn new(traces: Vec<Spectrum<f64>>) -> Result<Self> {
        if traces.len() != TraceId::ALL.len() {
            return Err(Error::structural(format!(
                "expected 8 traces, got {}",
                traces.len()
            )));
        }
        let grid = traces[0].grid().clone();
        for (id, t) in TraceId::ALL.iter().zip(&traces) {
            if t.grid() != &grid {
                return Err(Error::structural(format!(
                    "{} is on a different grid",
                    id.key()
                )));
            }
            if !t.unit().is_linear() {
                return Err(Error::structural(format!(
                    "{} must be stored in linear units",
                    id.key()
                )));
            }
        }
        Ok(Self { grid, traces })
    }

    pub fn grid(&self) -> &FrequencyGrid<f64> {
        &self.grid
    }

    pub fn get(&self, id: TraceId) -> &Spectrum<f64> {
        &self.traces[id as usize]
    }

    pub fn iter(&self) -> impl Iterator<Item = (TraceId, &Spectrum<f64>)> {
        TraceId::ALL.into_iter().zip(&self.traces)
    }

    /// `10 log10(b / x)` per grid point: how far `id` sits below trace (b).
    pub fn enhancement_db(&self, id: TraceId) -> Result<Vec<f64>> {
        self.get(TraceId::B)
            .values()
            .iter()
            .zip(self.get(id).values())
            .map(|(&b, &x)| Ok(db_from_linear(b)? - db_from_linear(x)?))
            .collect()
    }
}

/// Scalar anchors of a run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioSummary {
    pub shot_noise_rin_db: f64,
    pub classical_reference_db: f64,
    pub residual_amplitude_gap_db: f64,
    pub electronic_gap_db: f64,
    pub cross_cavity_normalization: f64,
    pub cross_cavity_normalization_db: f64,
    pub unity_gain_hz: f64,
    pub unity_gain_calibrated: bool,
    pub calibration_frequency_hz: f64,
    pub inloop_residual_fraction_at_calibration: f64,
    pub enhancement_at_calibration_db: EnhancementAt,
    pub enhancement_band_hz: (f64, f64),
    pub trace_c_enhancement_band_db: BandStats,
    pub trace_d_enhancement_band_db: BandStats,
    /// Grid frequencies where `|1 - sqrt(t) G| <= 1`.
    pub non_suppressing_frequencies_hz: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnhancementAt {
    pub trace_c: f64,
    pub trace_d: f64,
    pub trace_h: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BandStats {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
}

impl BandStats {
    fn over(values: impl Iterator<Item = f64>) -> Option<Self> {
        let v: Vec<f64> = values.collect();
        if v.is_empty() {
            return None;
        }
        Some(Self {
            min: v.iter().copied().fold(f64::INFINITY, f64::min),
            max: v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            mean: v.iter().sum::<f64>() / v.len() as f64,
        })
    }
}

#[derive(Debug, Clone)]
pub struct ScenarioOutput {
    pub traces: TraceSet,
    pub budget: BudgetReport,
    pub summary: ScenarioSummary,
    pub servo: ServoModel<f64>,
}

fn floors_on(config: &ScenarioConfig, grid: &FrequencyGrid<f64>) -> Result<NoiseFloors<f64>> {
    NoiseFloors::new(
        synthesize_floor(&config.residual_amplitude, grid)?,
        synthesize_floor(&config.electronic, grid)?,
        synthesize_floor(&config.free_running_phase, grid)?,
    )
}

/// Ledger inputs implied by a configuration.
pub fn scenario_ledger(config: &ScenarioConfig) -> Result<EnhancementLedger<f64>> {
    let coupling = match config.ledger.coupling_fraction {
        Some(c) => c,
        None => coupling_fraction_total(&config.budget.couplings)?.value,
    };
    EnhancementLedger::new(
        config.squeezer.squeezing_db(),
        config.ledger.loss_degradation_db,
        config.ledger.phase_degradation_db,
        coupling,
        config.ledger.servo_imperfection_db,
    )
}

/// Budget report alone, without trace synthesis.
pub fn run_budget(config: &ScenarioConfig) -> Result<BudgetReport> {
    build_report(
        &config.budget,
        &scenario_ledger(config)?,
        config.squeezer.antisqueezing_db(),
    )
}

/// Servo after optional calibration: the unity-gain frequency is chosen so
/// that the suppressed in-loop residual plus the amplitude and electronic
/// floors add up to the coupling total of the classical reference at the
/// calibration frequency.
fn resolve_servo(config: &ScenarioConfig, coupling: f64) -> Result<ServoModel<f64>> {
    if !config.servo.calibrate {
        return Ok(config.servo.model);
    }
    let f = config.servo.calibration_frequency_hz;
    let reference = shot_noise_rsn2(&config.detection) / config.beam_splitter.r();
    let floors = linear_from_db(config.residual_amplitude.level_db(f))?
        + linear_from_db(config.electronic.level_db(f))?;
    let target = coupling * reference - floors;
    if target <= 0.0 {
        return Err(Error::validation(
            "servo.unity_gain_hz",
            format!(
                "cannot calibrate: amplitude and electronic floors already exceed the coupling total {coupling} at {f} Hz; set unity_gain_hz explicitly"
            ),
        ));
    }
    let phase = linear_from_db(config.free_running_phase.level_db(f))?;
    calibrate_unity_gain(
        &config.servo.model,
        &config.beam_splitter,
        &config.in_loop_cavity,
        phase,
        f,
        target,
    )
    .map_err(|e| Error::validation("servo.unity_gain_hz", e.to_string()))
}

/// Synthesizes the trace family and the budget report.
pub fn run_scenario(config: &ScenarioConfig) -> Result<ScenarioOutput> {
    let grid = log_spaced_grid(
        config.grid.f_min_hz,
        config.grid.f_max_hz,
        config.grid.points,
    )?;
    let floors = floors_on(config, &grid)?;
    let ledger = scenario_ledger(config)?;
    let stages = ledger_chain(&ledger)?;
    let budget = build_report(&config.budget, &ledger, config.squeezer.antisqueezing_db())?;
    let servo = resolve_servo(config, ledger.coupling_fraction)?;

    let terms = grid
        .points()
        .iter()
        .map(|&f| {
            referred_closed_loop_terms(
                &floors,
                &config.in_loop_cavity,
                &config.out_of_loop_cavity,
                &servo,
                &config.beam_splitter,
                &config.detection,
                1.0,
                f,
            )
        })
        .collect::<Result<Vec<_>>>()?;

    let rin = |values: Vec<f64>| Spectrum::new(grid.clone(), values, SpectrumUnit::RinLinear);
    let squeezed_factor = linear_from_db(-stages.after_loss_and_phase)?;
    let servo_factor = linear_from_db(ledger.servo_imperfection_db)?;

    let a = freq_noise_from_phase(
        &floors
            .free_running_phase()
            .relabel(SpectrumUnit::PhaseNoise)?,
    )?;
    let b = rin(terms.iter().map(|t| t.readout).collect())?;
    let d = b.scaled(squeezed_factor)?;
    let e = rin(terms.iter().map(|t| t.phase_residual).collect())?;
    let f = floors.residual_amplitude_rin().clone();
    let g = floors.electronic_noise().clone();
    let h = uncorrelated_sum(&[&d, &e, &f, &g])?;
    let c = rin(b
        .values()
        .iter()
        .zip(h.values())
        .map(|(&bv, &hv)| {
            // measured enhancement: model enhancement less the servo loss, never negative
            let model_db = db_from_linear(bv)? - db_from_linear(hv)?;
            let measured_db = (model_db - ledger.servo_imperfection_db).max(0.0);
            Ok(if measured_db > 0.0 {
                hv * servo_factor
            } else {
                bv
            })
        })
        .collect::<Result<Vec<_>>>()?)?;

    let traces = TraceSet::new(vec![a, b, c, d, e, f, g, h])?;
    let summary = summarize(config, &servo, &traces, &terms, &ledger)?;
    Ok(ScenarioOutput {
        traces,
        budget,
        summary,
        servo,
    })
}

fn summarize(
    config: &ScenarioConfig,
    servo: &ServoModel<f64>,
    traces: &TraceSet,
    terms: &[crate::feedback::ReferredTerms<f64>],
    ledger: &EnhancementLedger<f64>,
) -> Result<ScenarioSummary> {
    let rsn = shot_noise_rsn2(&config.detection);
    let f_cal = config.servo.calibration_frequency_hz;
    let cal_grid = FrequencyGrid::new(vec![f_cal])?;
    let cal_floors = floors_on(config, &cal_grid)?;
    let at = referred_closed_loop_terms(
        &cal_floors,
        &config.in_loop_cavity,
        &config.out_of_loop_cavity,
        servo,
        &config.beam_splitter,
        &config.detection,
        1.0,
        f_cal,
    )?;
    let stages = ledger_chain(ledger)?;
    let d_cal = at.readout * linear_from_db(-stages.after_loss_and_phase)?;
    let h_cal = d_cal + at.phase_residual + at.amplitude + at.electronic;
    let h_enh = db_from_linear(at.readout)? - db_from_linear(h_cal)?;
    let c_enh = (h_enh - ledger.servo_imperfection_db).max(0.0);

    let (lo, hi) = ENHANCEMENT_BAND_HZ;
    let in_band: Vec<usize> = traces
        .grid()
        .points()
        .iter()
        .enumerate()
        .filter(|(_, &f)| f >= lo && f <= hi)
        .map(|(i, _)| i)
        .collect();
    let c_enh_all = traces.enhancement_db(TraceId::C)?;
    let d_enh_all = traces.enhancement_db(TraceId::D)?;
    let empty = BandStats {
        min: f64::NAN,
        max: f64::NAN,
        mean: f64::NAN,
    };
    let norm = cross_cavity_normalization(&config.in_loop_cavity, &config.out_of_loop_cavity);

    Ok(ScenarioSummary {
        shot_noise_rin_db: db_from_linear(rsn)?,
        classical_reference_db: db_from_linear(traces.get(TraceId::B).values()[0])?,
        residual_amplitude_gap_db: gap_db(at.amplitude, rsn)?,
        electronic_gap_db: gap_db(at.electronic, rsn)?,
        cross_cavity_normalization: norm,
        cross_cavity_normalization_db: db_from_linear(norm)?,
        unity_gain_hz: servo.unity_gain_frequency(),
        unity_gain_calibrated: config.servo.calibrate,
        calibration_frequency_hz: f_cal,
        inloop_residual_fraction_at_calibration: at.phase_residual / at.readout,
        enhancement_at_calibration_db: EnhancementAt {
            trace_c: c_enh,
            trace_d: stages.after_loss_and_phase,
            trace_h: h_enh,
        },
        enhancement_band_hz: ENHANCEMENT_BAND_HZ,
        trace_c_enhancement_band_db: BandStats::over(in_band.iter().map(|&i| c_enh_all[i]))
            .unwrap_or(empty),
        trace_d_enhancement_band_db: BandStats::over(in_band.iter().map(|&i| d_enh_all[i]))
            .unwrap_or(empty),
        non_suppressing_frequencies_hz: terms
            .iter()
            .filter(|t| t.loop_denominator <= 1.0)
            .map(|t| t.frequency)
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::Path;

    #[test]
    fn reference_run_anchors() {
        let out = run_scenario(&ScenarioConfig::paper_default()).unwrap();
        let s = &out.summary;
        assert!((s.shot_noise_rin_db + 142.9).abs() < 0.05);
        assert!((s.classical_reference_db + 142.9).abs() < 0.05);
        assert!((s.residual_amplitude_gap_db + 14.1).abs() < 0.05);
        assert!((s.enhancement_at_calibration_db.trace_h - 5.84).abs() < 0.02);
        assert!(s.non_suppressing_frequencies_hz.is_empty());
        assert_eq!(out.traces.grid().len(), 201);
    }

    #[test]
    fn trace_h_is_the_linear_sum() {
        let out = run_scenario(&ScenarioConfig::paper_default()).unwrap();
        let t = &out.traces;
        for i in 0..t.grid().len() {
            let sum: f64 = [TraceId::D, TraceId::E, TraceId::F, TraceId::G]
                .iter()
                .map(|&id| t.get(id).values()[i])
                .sum();
            assert_eq!(sum, t.get(TraceId::H).values()[i]);
        }
    }

    #[test]
    fn no_squeezing_reproduces_reference() {
        let c = ScenarioConfig::from_toml_str("[squeezer]\nsqueezing_db = 0.0\n", Path::new("x"))
            .unwrap();
        let out = run_scenario(&c).unwrap();
        let enh = out.traces.enhancement_db(TraceId::C).unwrap();
        assert!(enh.iter().all(|e| e.abs() < 1e-9));
    }

    #[test]
    fn explicit_servo_skips_calibration() {
        let c = ScenarioConfig::from_toml_str("[servo]\nunity_gain_hz = 2.0e6\n", Path::new("x"))
            .unwrap();
        let out = run_scenario(&c).unwrap();
        assert_eq!(out.servo.unity_gain_frequency(), 2.0e6);
        assert!(!out.summary.unity_gain_calibrated);
    }

    #[test]
    fn uncalibratable_floors_are_rejected() {
        let c = ScenarioConfig::from_toml_str(
            "[floors.residual_amplitude]\nlevel_db = -140.0\n",
            Path::new("x"),
        )
        .unwrap();
        assert!(matches!(run_scenario(&c), Err(Error::Validation { .. })));
    }

    #[test]
    fn singular_servo_names_frequency() {
        // fourth-order integrator has real positive G; sqrt(t) G = 1 at f = f_ug * 0.1^(1/4)
        let f_ug = 1e4 / 0.1f64.powf(0.25);
        let text = format!("[servo]\nunity_gain_hz = {f_ug}\nintegrator_order = 4\n[grid]\nf_min_hz = 5000.0\nf_max_hz = 20000.0\npoints = 3\n");
        let c = ScenarioConfig::from_toml_str(&text, Path::new("x")).unwrap();
        match run_scenario(&c) {
            Err(Error::Singularity { frequency_hz, .. }) => {
                assert!((frequency_hz - 1e4).abs() < 1e-6)
            }
            other => panic!("expected singularity, got {other:?}"),
        }
    }
}
