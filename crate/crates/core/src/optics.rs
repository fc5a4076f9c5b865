//! Optical elements: the detuned readout cavity, the squeezed-vacuum tap
//! beam splitter and the degradation of a squeezed state by loss and phase
//! jitter.

use crate::budget::PhaseSumMode;
use crate::error::{Error, Result};
use crate::noise::{linear_from_db, QuadratureVariances};
use crate::scalar::{lit, Real};

/// How far the cavity is detuned from resonance, expressed as the slope of
/// the small-angle noise-ellipse rotation `theta = slope * omega / kappa`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DetuningRegime<T> {
    /// Detuned by half a linewidth; slope 1.
    HalfDetuned,
    /// Roughly three half-linewidths; slope 0.1.
    ThreeTimesHalfDetuned,
    Custom(T),
}

impl<T: Real> DetuningRegime<T> {
    pub fn slope(&self) -> T {
        match *self {
            DetuningRegime::HalfDetuned => T::one(),
            DetuningRegime::ThreeTimesHalfDetuned => lit(0.1),
            DetuningRegime::Custom(s) => s,
        }
    }
}

/// A detuned cavity used as a phase-to-amplitude converter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CavityParams<T> {
    kappa: T,
    regime: DetuningRegime<T>,
    excess_loss: T,
}

impl<T: Real> CavityParams<T> {
    /// `linewidth_hz` is the full width at half maximum in Hz; it is stored
    /// as the angular rate `2 pi * FWHM`.
    pub fn from_fwhm_hz(
        linewidth_hz: T,
        regime: DetuningRegime<T>,
        excess_loss: T,
    ) -> Result<Self> {
        if !linewidth_hz.is_finite() || linewidth_hz <= T::zero() {
            return Err(Error::domain(format!(
                "cavity linewidth must be positive, got {linewidth_hz}"
            )));
        }
        let slope = regime.slope();
        if !(slope > T::zero() && slope <= T::one()) {
            return Err(Error::domain(format!(
                "detuning slope must lie in (0, 1], got {slope}"
            )));
        }
        if !(excess_loss >= T::zero() && excess_loss < T::one()) {
            return Err(Error::domain(format!(
                "excess loss must lie in [0, 1), got {excess_loss}"
            )));
        }
        Ok(Self {
            kappa: T::TAU() * linewidth_hz,
            regime,
            excess_loss,
        })
    }

    /// Angular linewidth in rad/s.
    pub fn kappa(&self) -> T {
        self.kappa
    }

    pub fn linewidth_hz(&self) -> T {
        self.kappa / T::TAU()
    }

    pub fn regime(&self) -> DetuningRegime<T> {
        self.regime
    }

    pub fn slope(&self) -> T {
        self.regime.slope()
    }

    pub fn excess_loss(&self) -> T {
        self.excess_loss
    }

    /// Phase-to-amplitude conversion coefficient `theta^2` at `f`.
    pub fn conversion(&self, f: T) -> Result<T> {
        let theta = rotation_angle(self, f)?;
        Ok(theta * theta)
    }
}

/// Small-angle noise-ellipse rotation `slope * 2 pi f / kappa`; no wrapping.
pub fn rotation_angle<T: Real>(cavity: &CavityParams<T>, f: T) -> Result<T> {
    if !f.is_finite() || f < T::zero() {
        return Err(Error::domain(format!(
            "analysis frequency must be >= 0, got {f}"
        )));
    }
    Ok(cavity.slope() * T::TAU() * f / cavity.kappa)
}

/// Power transmission `t` toward the out-of-loop path and reflectivity `r`
/// toward the in-loop detector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamSplitter<T> {
    t: T,
    r: T,
}

impl<T: Real> BeamSplitter<T> {
    pub fn new(t: T, r: T) -> Result<Self> {
        let unit = |x: T| x > T::zero() && x < T::one();
        if !unit(t) || !unit(r) {
            return Err(Error::domain(format!(
                "t and r must lie in (0, 1), got t={t}, r={r}"
            )));
        }
        if (t + r - T::one()).abs() > lit(1e-9) {
            return Err(Error::domain(format!("t + r must equal 1, got {}", t + r)));
        }
        Ok(Self { t, r })
    }

    pub fn from_reflectivity(r: T) -> Result<Self> {
        Self::new(T::one() - r, r)
    }

    pub fn t(&self) -> T {
        self.t
    }

    pub fn r(&self) -> T {
        self.r
    }
}

/// Amplitude-quadrature variance seen by the in-loop detector behind the
/// detuned cavity, with the squeezed field locked at `-theta`:
/// `t Sx cos^2 + t Sy sin^2 + r S_S^x`.
pub fn detected_inloop_variance<T: Real>(
    input: &QuadratureVariances<T>,
    squeezed: &QuadratureVariances<T>,
    bs: &BeamSplitter<T>,
    theta: T,
) -> Result<T> {
    check_angle(theta)?;
    // t (Sx cos^2 + Sy sin^2) written so equal variances cancel exactly
    let s2 = theta.sin().powi(2);
    Ok(bs.t * (input.s_x() + (input.s_y() - input.s_x()) * s2) + bs.r * squeezed.s_x())
}

/// Quadrature variances of the field after the tap beam splitter, with the
/// squeezed field injected at relative phase `lock_angle`.
pub fn couple_at_bs<T: Real>(
    input: &QuadratureVariances<T>,
    squeezed: &QuadratureVariances<T>,
    bs: &BeamSplitter<T>,
    lock_angle: T,
) -> Result<QuadratureVariances<T>> {
    check_angle(lock_angle)?;
    coupled_variances(input, squeezed, bs.t, bs.r, lock_angle)
}

fn coupled_variances<T: Real>(
    input: &QuadratureVariances<T>,
    squeezed: &QuadratureVariances<T>,
    t: T,
    r: T,
    angle: T,
) -> Result<QuadratureVariances<T>> {
    let s2 = angle.sin().powi(2);
    let spread = squeezed.s_y() - squeezed.s_x();
    let x = t * input.s_x() + r * (squeezed.s_x() + spread * s2);
    let y = t * input.s_y() + r * (squeezed.s_y() - spread * s2);
    QuadratureVariances::new(x, y)
}

fn check_angle<T: Real>(theta: T) -> Result<()> {
    if !theta.is_finite() || theta.abs() >= T::FRAC_PI_2() {
        return Err(Error::domain(format!(
            "rotation angle must satisfy |theta| < pi/2, got {theta}"
        )));
    }
    Ok(())
}

/// Mixes each variance with vacuum: `V -> eta V + (1 - eta)`.
pub fn apply_loss<T: Real>(v: &QuadratureVariances<T>, eta: T) -> Result<QuadratureVariances<T>> {
    if !(eta > T::zero() && eta <= T::one()) {
        return Err(Error::domain(format!(
            "efficiency must lie in (0, 1], got {eta}"
        )));
    }
    let mix = |x: T| eta * x + (T::one() - eta);
    QuadratureVariances::new(mix(v.s_x()), mix(v.s_y()))
}

/// `E[cos^2 theta]` for a zero-mean Gaussian angle of RMS `sigma`.
pub fn mean_cos_squared<T: Real>(sigma_rad: T) -> T {
    let two = lit::<T>(2.0);
    (T::one() + (-two * sigma_rad * sigma_rad).exp()) / two
}

/// Averages the noise ellipse over Gaussian phase jitter of RMS `sigma_rad`.
pub fn apply_phase_jitter<T: Real>(
    v: &QuadratureVariances<T>,
    sigma_rad: T,
) -> Result<QuadratureVariances<T>> {
    if !sigma_rad.is_finite() || sigma_rad < T::zero() {
        return Err(Error::domain(format!(
            "phase jitter must be >= 0, got {sigma_rad}"
        )));
    }
    let c = mean_cos_squared(sigma_rad);
    let x = c * v.s_x() + (T::one() - c) * v.s_y();
    let y = c * v.s_y() + (T::one() - c) * v.s_x();
    QuadratureVariances::new(x, y)
}

/// Anti-squeezing assumed when a configuration does not give one.
pub const DEFAULT_ANTISQUEEZING_DB: f64 = 17.0;

/// Generated squeezed state plus the loss and phase-noise sources between
/// the squeezer and the detector.
#[derive(Debug, Clone, PartialEq)]
pub struct SqueezerParams<T> {
    squeezing_db: T,
    antisqueezing_db: T,
    efficiencies: Vec<(String, T)>,
    phase_jitters_mrad: Vec<(String, T)>,
    jitter_mode: PhaseSumMode,
}

impl<T: Real> SqueezerParams<T> {
    pub fn new(
        squeezing_db: T,
        antisqueezing_db: T,
        efficiencies: Vec<(String, T)>,
        phase_jitters_mrad: Vec<(String, T)>,
        jitter_mode: PhaseSumMode,
    ) -> Result<Self> {
        if !squeezing_db.is_finite() || squeezing_db < T::zero() {
            return Err(Error::domain(format!(
                "squeezing must be >= 0 dB, got {squeezing_db}"
            )));
        }
        if !antisqueezing_db.is_finite() || antisqueezing_db < squeezing_db {
            return Err(Error::domain(format!(
                "anti-squeezing ({antisqueezing_db} dB) must be at least the squeezing ({squeezing_db} dB)"
            )));
        }
        for (name, eta) in &efficiencies {
            if !(*eta > T::zero() && *eta <= T::one()) {
                return Err(Error::domain(format!(
                    "efficiency '{name}' must lie in (0, 1], got {eta}"
                )));
            }
        }
        for (name, j) in &phase_jitters_mrad {
            if !j.is_finite() || *j < T::zero() {
                return Err(Error::domain(format!(
                    "phase jitter '{name}' must be >= 0, got {j}"
                )));
            }
        }
        Ok(Self {
            squeezing_db,
            antisqueezing_db,
            efficiencies,
            phase_jitters_mrad,
            jitter_mode,
        })
    }

    pub fn squeezing_db(&self) -> T {
        self.squeezing_db
    }

    pub fn antisqueezing_db(&self) -> T {
        self.antisqueezing_db
    }

    pub fn efficiencies(&self) -> &[(String, T)] {
        &self.efficiencies
    }

    pub fn phase_jitters_mrad(&self) -> &[(String, T)] {
        &self.phase_jitters_mrad
    }

    pub fn jitter_mode(&self) -> PhaseSumMode {
        self.jitter_mode
    }

    /// Product of all efficiencies.
    pub fn total_efficiency(&self) -> T {
        self.efficiencies
            .iter()
            .fold(T::one(), |acc, (_, e)| acc * *e)
    }

    /// Combined RMS jitter in radians under the configured summation mode.
    pub fn total_jitter_rad(&self) -> T {
        let mrad = self
            .jitter_mode
            .combine(self.phase_jitters_mrad.iter().map(|(_, j)| *j));
        mrad / lit(1000.0)
    }

    pub fn generated(&self) -> Result<QuadratureVariances<T>> {
        QuadratureVariances::new(
            linear_from_db(-self.squeezing_db)?,
            linear_from_db(self.antisqueezing_db)?,
        )
    }
}

/// Squeezed state at the detector: generated variances, then loss with the
/// product of efficiencies, then Gaussian phase jitter.
pub fn detected_squeezing<T: Real>(params: &SqueezerParams<T>) -> Result<QuadratureVariances<T>> {
    let lossy = apply_loss(&params.generated()?, params.total_efficiency())?;
    apply_phase_jitter(&lossy, params.total_jitter_rad())
}
