//! Scenario files: a TOML document whose every key is optional. Missing keys
//! take the reference-experiment values and each resolved parameter is
//! recorded with where it came from.

use std::fmt;
use std::path::Path;

use serde::Deserialize;

use super::floor::{FloorSpec, PowerLawSegment};
use crate::budget::{
    BudgetEntry, EntryKind, Measured, NoiseBudget, PhaseSumMode, REFERENCE_LOSS_DB,
    REFERENCE_PHASE_DB, REFERENCE_SERVO_IMPERFECTION_DB,
};
use crate::error::{Error, Result};
use crate::feedback::{DetectionParams, ServoModel};
use crate::optics::{
    BeamSplitter, CavityParams, DetuningRegime, SqueezerParams, DEFAULT_ANTISQUEEZING_DB,
};

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    grid: Option<RawGrid>,
    detection: Option<RawDetection>,
    beam_splitter: Option<RawBeamSplitter>,
    in_loop_cavity: Option<RawCavity>,
    out_of_loop_cavity: Option<RawCavity>,
    squeezer: Option<RawSqueezer>,
    servo: Option<RawServo>,
    floors: Option<RawFloors>,
    budget: Option<RawBudget>,
    ledger: Option<RawLedger>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    f_min_hz: Option<f64>,
    f_max_hz: Option<f64>,
    points: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDetection {
    power_w: Option<f64>,
    wavelength_m: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBeamSplitter {
    reflectivity: Option<f64>,
    transmission: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RawDetuning {
    Named(String),
    Slope(f64),
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCavity {
    linewidth_hz: Option<f64>,
    detuning: Option<RawDetuning>,
    excess_loss: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSqueezer {
    squeezing_db: Option<f64>,
    antisqueezing_db: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawServo {
    unity_gain_hz: Option<f64>,
    integrator_order: Option<u32>,
    delay_s: Option<f64>,
    low_pass_hz: Option<f64>,
    calibration_frequency_hz: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFloor {
    level_db: Option<f64>,
    segments: Option<Vec<PowerLawSegment>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFloors {
    residual_amplitude: Option<RawFloor>,
    electronic: Option<RawFloor>,
    free_running_phase: Option<RawFloor>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEntry {
    name: String,
    value: f64,
    #[serde(default)]
    uncertainty: f64,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawStated {
    efficiency: Option<f64>,
    efficiency_uncertainty: Option<f64>,
    phase_mrad: Option<f64>,
    phase_mrad_uncertainty: Option<f64>,
    coupling_percent: Option<f64>,
    coupling_percent_uncertainty: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBudget {
    phase_sum: Option<PhaseSumMode>,
    efficiency: Option<Vec<RawEntry>>,
    phase: Option<Vec<RawEntry>>,
    coupling: Option<Vec<RawEntry>>,
    stated: Option<RawStated>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLedger {
    loss_degradation_db: Option<f64>,
    phase_degradation_db: Option<f64>,
    coupling_fraction: Option<f64>,
    servo_imperfection_db: Option<f64>,
}

/// Where a resolved parameter came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    User,
    PaperDefault,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Provenance::User => "user",
            Provenance::PaperDefault => "paper-default",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EchoLine {
    pub key: String,
    pub value: String,
    pub provenance: Provenance,
    pub note: Option<String>,
}

impl fmt::Display for EchoLine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} = {}  [{}]", self.key, self.value, self.provenance)?;
        if let Some(n) = &self.note {
            write!(f, " ({n})")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub f_min_hz: f64,
    pub f_max_hz: f64,
    pub points: usize,
}

impl GridSpec {
    /// Parses `FMIN:FMAX:N`.
    pub fn parse(s: &str) -> Result<Self> {
        let parts: Vec<_> = s.split(':').collect();
        let bad = || Error::validation("grid", format!("expected FMIN:FMAX:N, got '{s}'"));
        if parts.len() != 3 {
            return Err(bad());
        }
        let f_min_hz = parts[0].trim().parse().map_err(|_| bad())?;
        let f_max_hz = parts[1].trim().parse().map_err(|_| bad())?;
        let points = parts[2].trim().parse().map_err(|_| bad())?;
        Ok(Self {
            f_min_hz,
            f_max_hz,
            points,
        })
    }
}

/// Servo either fixed by the user or calibrated so the suppressed in-loop
/// residual closes the stated coupling total at `calibration_frequency_hz`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ServoSetting {
    pub model: ServoModel<f64>,
    pub calibrate: bool,
    pub calibration_frequency_hz: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LedgerSettings {
    pub loss_degradation_db: f64,
    pub phase_degradation_db: f64,
    /// `None` means the sum of the coupling entries.
    pub coupling_fraction: Option<f64>,
    pub servo_imperfection_db: f64,
}

/// Fully validated scenario.
#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub grid: GridSpec,
    pub detection: DetectionParams<f64>,
    pub beam_splitter: BeamSplitter<f64>,
    pub in_loop_cavity: CavityParams<f64>,
    pub out_of_loop_cavity: CavityParams<f64>,
    pub squeezer: SqueezerParams<f64>,
    pub servo: ServoSetting,
    pub residual_amplitude: FloorSpec,
    pub electronic: FloorSpec,
    pub free_running_phase: FloorSpec,
    pub budget: NoiseBudget<f64>,
    pub ledger: LedgerSettings,
    pub echo: Vec<EchoLine>,
}

impl ScenarioConfig {
    /// The reference experiment with nothing overridden.
    pub fn paper_default() -> Self {
        Self::from_toml_str("", Path::new("<defaults>")).expect("defaults are valid")
    }

    pub fn from_toml_str(text: &str, origin: &Path) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Parse {
            path: origin.to_path_buf(),
            line: e.span().map(|s| line_of(text, s.start)).unwrap_or(0),
            message: e.message().to_string(),
        })?;
        resolve(raw)
    }

    /// Replaces the frequency grid, marking it as user supplied.
    pub fn with_grid(mut self, grid: GridSpec) -> Result<Self> {
        crate::noise::log_spaced_grid(grid.f_min_hz, grid.f_max_hz, grid.points)
            .map_err(|e| Error::validation("grid", e.to_string()))?;
        self.grid = grid;
        for line in self.echo.iter_mut().filter(|l| l.key.starts_with("grid.")) {
            line.provenance = Provenance::User;
            line.value = match line.key.as_str() {
                "grid.f_min_hz" => grid.f_min_hz.to_string(),
                "grid.f_max_hz" => grid.f_max_hz.to_string(),
                _ => grid.points.to_string(),
            };
        }
        Ok(self)
    }

    pub fn echo_text(&self) -> String {
        self.echo.iter().map(|l| format!("{l}\n")).collect()
    }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Reads and validates a scenario file.
pub fn load_config(path: &Path) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    ScenarioConfig::from_toml_str(&text, path)
}

struct Resolver {
    echo: Vec<EchoLine>,
}

impl Resolver {
    fn take<T: fmt::Display + Copy>(&mut self, key: &str, user: Option<T>, default: T) -> T {
        let (value, provenance) = match user {
            Some(v) => (v, Provenance::User),
            None => (default, Provenance::PaperDefault),
        };
        self.push(key, value.to_string(), provenance, None);
        value
    }

    fn push(&mut self, key: &str, value: String, provenance: Provenance, note: Option<String>) {
        self.echo.push(EchoLine {
            key: key.to_string(),
            value,
            provenance,
            note,
        });
    }
}

fn invalid(field: &str) -> impl Fn(Error) -> Error + '_ {
    move |e| Error::validation(field, e.to_string())
}

fn detuning(
    field: &str,
    raw: Option<RawDetuning>,
    default: DetuningRegime<f64>,
    r: &mut Resolver,
) -> Result<DetuningRegime<f64>> {
    let (regime, prov) = match raw {
        None => (default, Provenance::PaperDefault),
        Some(RawDetuning::Slope(s)) => (DetuningRegime::Custom(s), Provenance::User),
        Some(RawDetuning::Named(n)) => (
            match n.as_str() {
                "half_detuned" => DetuningRegime::HalfDetuned,
                "three_times_half_detuned" => DetuningRegime::ThreeTimesHalfDetuned,
                other => {
                    return Err(Error::validation(
                        field,
                        format!("unknown detuning '{other}'; use half_detuned, three_times_half_detuned or a slope"),
                    ))
                }
            },
            Provenance::User,
        ),
    };
    let text = match regime {
        DetuningRegime::HalfDetuned => "half_detuned (slope 1)".to_string(),
        DetuningRegime::ThreeTimesHalfDetuned => "three_times_half_detuned (slope 0.1)".to_string(),
        DetuningRegime::Custom(s) => format!("slope {s}"),
    };
    r.push(field, text, prov, None);
    Ok(regime)
}

fn cavity(
    name: &str,
    raw: Option<RawCavity>,
    defaults: (f64, DetuningRegime<f64>, f64),
    r: &mut Resolver,
) -> Result<CavityParams<f64>> {
    let raw = raw.unwrap_or_default();
    let lw = r.take(
        &format!("{name}.linewidth_hz"),
        raw.linewidth_hz,
        defaults.0,
    );
    let regime = detuning(&format!("{name}.detuning"), raw.detuning, defaults.1, r)?;
    let loss = r.take(&format!("{name}.excess_loss"), raw.excess_loss, defaults.2);
    CavityParams::from_fwhm_hz(lw, regime, loss).map_err(invalid(name))
}

fn floor(
    name: &str,
    raw: Option<RawFloor>,
    default: FloorSpec,
    r: &mut Resolver,
) -> Result<FloorSpec> {
    let key = format!("floors.{name}");
    let (spec, prov) = match raw {
        None => (default, Provenance::PaperDefault),
        Some(RawFloor {
            level_db: Some(level_db),
            segments: None,
        }) => (FloorSpec::Flat { level_db }, Provenance::User),
        Some(RawFloor {
            level_db: None,
            segments: Some(segments),
        }) => (FloorSpec::PowerLaw { segments }, Provenance::User),
        Some(_) => {
            return Err(Error::validation(
                &key,
                "give exactly one of level_db or segments",
            ))
        }
    };
    spec.validate().map_err(invalid(&key))?;
    let note = (name == "free_running_phase" && prov == Provenance::PaperDefault)
        .then(|| "synthetic shape, not digitized".to_string());
    r.push(&key, spec.describe(), prov, note);
    Ok(spec)
}

fn entries(
    key: &str,
    kind: EntryKind,
    raw: Option<Vec<RawEntry>>,
    default: Vec<BudgetEntry<f64>>,
    r: &mut Resolver,
) -> Result<Vec<BudgetEntry<f64>>> {
    let (list, prov) = match raw {
        None => (default, Provenance::PaperDefault),
        Some(list) => (
            list.into_iter()
                .map(|e| BudgetEntry::new(e.name, kind, e.value, e.uncertainty))
                .collect::<Result<Vec<_>>>()
                .map_err(invalid(key))?,
            Provenance::User,
        ),
    };
    for e in &list {
        r.push(
            &format!("{key}[{}]", e.name()),
            format!("{} +/- {}", e.value(), e.uncertainty()),
            prov,
            None,
        );
    }
    if list.is_empty() {
        r.push(key, "[]".into(), prov, None);
    }
    Ok(list)
}

/// Default free-running phase-quadrature noise: 0 dB/Hz at 1 kHz falling as
/// f^-4.
pub fn default_free_running_phase() -> FloorSpec {
    FloorSpec::PowerLaw {
        segments: vec![PowerLawSegment {
            f_corner_hz: 1e3,
            exponent: -4.0,
            level_db: 0.0,
        }],
    }
}

fn resolve(raw: RawConfig) -> Result<ScenarioConfig> {
    let mut r = Resolver { echo: Vec::new() };

    let g = raw.grid.unwrap_or_default();
    let grid = GridSpec {
        f_min_hz: r.take("grid.f_min_hz", g.f_min_hz, 1e3),
        f_max_hz: r.take("grid.f_max_hz", g.f_max_hz, 1e5),
        points: r.take("grid.points", g.points, 201),
    };
    crate::noise::log_spaced_grid(grid.f_min_hz, grid.f_max_hz, grid.points)
        .map_err(invalid("grid"))?;

    let d = raw.detection.unwrap_or_default();
    let detection = DetectionParams::new(
        r.take("detection.power_w", d.power_w, 50e-6),
        r.take("detection.wavelength_m", d.wavelength_m, 1550e-9),
    )
    .map_err(invalid("detection"))?;

    let b = raw.beam_splitter.unwrap_or_default();
    let refl = r.take("beam_splitter.reflectivity", b.reflectivity, 0.99);
    let trans = r.take("beam_splitter.transmission", b.transmission, 1.0 - refl);
    let beam_splitter = BeamSplitter::new(trans, refl).map_err(invalid("beam_splitter"))?;

    let in_loop_cavity = cavity(
        "in_loop_cavity",
        raw.in_loop_cavity,
        (7.5e6, DetuningRegime::ThreeTimesHalfDetuned, 0.016),
        &mut r,
    )?;
    let out_of_loop_cavity = cavity(
        "out_of_loop_cavity",
        raw.out_of_loop_cavity,
        (6.8e6, DetuningRegime::HalfDetuned, 0.0),
        &mut r,
    )?;

    let reference = NoiseBudget::<f64>::reference();
    let rb = raw.budget.unwrap_or_default();
    let phase_mode = match rb.phase_sum {
        Some(m) => {
            r.push("budget.phase_sum", format!("{m:?}"), Provenance::User, None);
            m
        }
        None => {
            r.push(
                "budget.phase_sum",
                "LinearSum".into(),
                Provenance::PaperDefault,
                None,
            );
            PhaseSumMode::LinearSum
        }
    };
    let efficiencies = entries(
        "budget.efficiency",
        EntryKind::Efficiency,
        rb.efficiency,
        reference.efficiencies,
        &mut r,
    )?;
    let phases = entries(
        "budget.phase",
        EntryKind::PhaseMrad,
        rb.phase,
        reference.phase_fluctuations,
        &mut r,
    )?;
    let couplings = entries(
        "budget.coupling",
        EntryKind::CouplingPercent,
        rb.coupling,
        reference.couplings,
        &mut r,
    )?;
    let st = rb.stated.unwrap_or_default();
    let mut measured =
        |key: &str, v: Option<f64>, u: Option<f64>, def: Measured<f64>| -> Result<Measured<f64>> {
            let m = Measured {
                value: r.take(key, v, def.value),
                uncertainty: r.take(&format!("{key}_uncertainty"), u, def.uncertainty),
            };
            if !(m.value.is_finite()
                && m.value >= 0.0
                && m.uncertainty.is_finite()
                && m.uncertainty >= 0.0)
            {
                return Err(Error::validation(
                    key,
                    "stated totals must be finite and >= 0",
                ));
            }
            Ok(m)
        };
    let stated_eff = measured(
        "budget.stated.efficiency",
        st.efficiency,
        st.efficiency_uncertainty,
        reference.stated_total_efficiency,
    )?;
    let stated_phase = measured(
        "budget.stated.phase_mrad",
        st.phase_mrad,
        st.phase_mrad_uncertainty,
        reference.stated_total_phase_mrad,
    )?;
    let stated_coupling = measured(
        "budget.stated.coupling_percent",
        st.coupling_percent,
        st.coupling_percent_uncertainty,
        reference.stated_total_coupling_percent,
    )?;
    if stated_eff.value <= 0.0 || stated_eff.value > 1.0 {
        return Err(Error::validation(
            "budget.stated.efficiency",
            "must lie in (0, 1]",
        ));
    }
    let budget = NoiseBudget {
        efficiencies,
        phase_fluctuations: phases,
        couplings,
        stated_total_efficiency: stated_eff,
        stated_total_phase_mrad: stated_phase,
        stated_total_coupling_percent: stated_coupling,
        phase_mode,
    };

    let sq = raw.squeezer.unwrap_or_default();
    let s0 = r.take("squeezer.squeezing_db", sq.squeezing_db, 10.6);
    let a0_default = DEFAULT_ANTISQUEEZING_DB.max(s0);
    let a0 = r.take("squeezer.antisqueezing_db", sq.antisqueezing_db, a0_default);
    let squeezer = SqueezerParams::new(
        s0,
        a0,
        budget
            .efficiencies
            .iter()
            .map(|e| (e.name().to_string(), e.value()))
            .collect(),
        budget
            .phase_fluctuations
            .iter()
            .map(|e| (e.name().to_string(), e.value()))
            .collect(),
        phase_mode,
    )
    .map_err(invalid("squeezer"))?;

    let sv = raw.servo.unwrap_or_default();
    let order = r.take("servo.integrator_order", sv.integrator_order, 1);
    let delay = r.take("servo.delay_s", sv.delay_s, 0.0);
    let low_pass = sv.low_pass_hz;
    r.push(
        "servo.low_pass_hz",
        low_pass
            .map(|v| v.to_string())
            .unwrap_or_else(|| "none".into()),
        if low_pass.is_some() {
            Provenance::User
        } else {
            Provenance::PaperDefault
        },
        None,
    );
    let cal_f = r.take(
        "servo.calibration_frequency_hz",
        sv.calibration_frequency_hz,
        8e3,
    );
    let calibrate = sv.unity_gain_hz.is_none();
    let f_ug = sv.unity_gain_hz.unwrap_or(1.0);
    if calibrate {
        r.push(
            "servo.unity_gain_hz",
            "calibrated".into(),
            Provenance::PaperDefault,
            Some(format!(
                "in-loop residual closes the coupling total at {cal_f} Hz"
            )),
        );
    } else {
        r.push(
            "servo.unity_gain_hz",
            f_ug.to_string(),
            Provenance::User,
            None,
        );
    }
    let model = ServoModel::new(f_ug, order, delay, low_pass).map_err(invalid("servo"))?;
    if !(cal_f.is_finite() && cal_f > 0.0) {
        return Err(Error::validation(
            "servo.calibration_frequency_hz",
            "must be positive",
        ));
    }

    let fl = raw.floors.unwrap_or_default();
    let residual_amplitude = floor(
        "residual_amplitude",
        fl.residual_amplitude,
        FloorSpec::Flat { level_db: -157.0 },
        &mut r,
    )?;
    let electronic = floor(
        "electronic",
        fl.electronic,
        FloorSpec::Flat { level_db: -160.0 },
        &mut r,
    )?;
    let free_running_phase = floor(
        "free_running_phase",
        fl.free_running_phase,
        default_free_running_phase(),
        &mut r,
    )?;

    let l = raw.ledger.unwrap_or_default();
    let loss_db = r.take(
        "ledger.loss_degradation_db",
        l.loss_degradation_db,
        REFERENCE_LOSS_DB,
    );
    let phase_db = r.take(
        "ledger.phase_degradation_db",
        l.phase_degradation_db,
        REFERENCE_PHASE_DB,
    );
    let servo_db = r.take(
        "ledger.servo_imperfection_db",
        l.servo_imperfection_db,
        REFERENCE_SERVO_IMPERFECTION_DB,
    );
    match l.coupling_fraction {
        Some(c) => r.push(
            "ledger.coupling_fraction",
            c.to_string(),
            Provenance::User,
            None,
        ),
        None => r.push(
            "ledger.coupling_fraction",
            "sum of budget.coupling".into(),
            Provenance::PaperDefault,
            None,
        ),
    }
    for (k, v) in [
        ("ledger.loss_degradation_db", loss_db),
        ("ledger.phase_degradation_db", phase_db),
        ("ledger.servo_imperfection_db", servo_db),
        (
            "ledger.coupling_fraction",
            l.coupling_fraction.unwrap_or(0.0),
        ),
    ] {
        if !(v.is_finite() && v >= 0.0) {
            return Err(Error::validation(
                k,
                format!("must be finite and >= 0, got {v}"),
            ));
        }
    }

    Ok(ScenarioConfig {
        grid,
        detection,
        beam_splitter,
        in_loop_cavity,
        out_of_loop_cavity,
        squeezer,
        servo: ServoSetting {
            model,
            calibrate,
            calibration_frequency_hz: cal_f,
        },
        residual_amplitude,
        electronic,
        free_running_phase,
        budget,
        ledger: LedgerSettings {
            loss_degradation_db: loss_db,
            phase_degradation_db: phase_db,
            coupling_fraction: l.coupling_fraction,
            servo_imperfection_db: servo_db,
        },
        echo: r.echo,
    })
}
