//! Shot-noise scaling, the servo transfer function and the in-loop /
//! out-of-loop relative intensity noise of the phase-stabilization loop.
//!
//! Phase-quadrature noise reaches a detector only through a detuned cavity,
//! so every phase term carries the conversion coefficient `theta^2 =
//! (slope * omega / kappa)^2` of the cavity that reads it out.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::noise::{Spectrum, SpectrumUnit};
use crate::optics::{BeamSplitter, CavityParams};
use crate::scalar::{lit, Real};

/// Planck constant, J s (exact SI value).
pub const PLANCK: f64 = 6.626_070_15e-34;
/// Speed of light in vacuum, m/s (exact SI value).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Below this the closed-loop denominator is treated as singular.
pub const SINGULARITY_THRESHOLD: f64 = 1e-6;

/// Optical power and wavelength at the in-loop photodetector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionParams<T> {
    power: T,
    wavelength: T,
}

impl<T: Real> DetectionParams<T> {
    pub fn new(power_w: T, wavelength_m: T) -> Result<Self> {
        if !power_w.is_finite() || power_w <= T::zero() {
            return Err(Error::domain(format!(
                "detected power must be positive, got {power_w}"
            )));
        }
        if !wavelength_m.is_finite() || wavelength_m <= T::zero() {
            return Err(Error::domain(format!(
                "wavelength must be positive, got {wavelength_m}"
            )));
        }
        Ok(Self {
            power: power_w,
            wavelength: wavelength_m,
        })
    }

    pub fn power(&self) -> T {
        self.power
    }

    pub fn wavelength(&self) -> T {
        self.wavelength
    }

    /// Optical carrier frequency in Hz.
    pub fn optical_frequency(&self) -> T {
        lit::<T>(SPEED_OF_LIGHT) / self.wavelength
    }
}

/// Shot-noise relative intensity noise `2 h nu / P`, in 1/Hz.
pub fn shot_noise_rsn2<T: Real>(det: &DetectionParams<T>) -> T {
    // h * nu underflows f32, so form the photon energy in f64.
    let photon_energy = PLANCK * SPEED_OF_LIGHT / crate::scalar::to_f64(det.wavelength);
    lit::<T>(2.0 * photon_energy) / det.power
}

/// Servo modeled as an n-th order integrator with unity gain at
/// `unity_gain_frequency`, optional transport delay and optional one-pole
/// low-pass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ServoModel<T> {
    unity_gain_frequency: T,
    integrator_order: u32,
    delay: T,
    low_pass_corner: Option<T>,
}

impl<T: Real> ServoModel<T> {
    pub fn new(
        unity_gain_frequency: T,
        integrator_order: u32,
        delay: T,
        low_pass_corner: Option<T>,
    ) -> Result<Self> {
        if !unity_gain_frequency.is_finite() || unity_gain_frequency <= T::zero() {
            return Err(Error::domain(format!(
                "unity-gain frequency must be positive, got {unity_gain_frequency}"
            )));
        }
        if integrator_order == 0 {
            return Err(Error::domain("integrator order must be at least 1"));
        }
        if !delay.is_finite() || delay < T::zero() {
            return Err(Error::domain(format!("delay must be >= 0, got {delay}")));
        }
        if let Some(fc) = low_pass_corner {
            if !fc.is_finite() || fc <= T::zero() {
                return Err(Error::domain(format!(
                    "low-pass corner must be positive, got {fc}"
                )));
            }
        }
        Ok(Self {
            unity_gain_frequency,
            integrator_order,
            delay,
            low_pass_corner,
        })
    }

    /// Pure integrator of the given order.
    pub fn integrator(unity_gain_frequency: T, integrator_order: u32) -> Result<Self> {
        Self::new(unity_gain_frequency, integrator_order, T::zero(), None)
    }

    pub fn unity_gain_frequency(&self) -> T {
        self.unity_gain_frequency
    }

    pub fn integrator_order(&self) -> u32 {
        self.integrator_order
    }

    pub fn delay(&self) -> T {
        self.delay
    }

    pub fn low_pass_corner(&self) -> Option<T> {
        self.low_pass_corner
    }

    pub fn with_unity_gain_frequency(&self, f_ug: T) -> Result<Self> {
        Self::new(
            f_ug,
            self.integrator_order,
            self.delay,
            self.low_pass_corner,
        )
    }
}

/// `G(f) = (f_ug / (i f))^n * exp(-i 2 pi f tau) / (1 + i f / f_lp)`.
pub fn servo_gain<T: Real>(servo: &ServoModel<T>, f: T) -> Result<Complex<T>> {
    if !f.is_finite() || f <= T::zero() {
        return Err(Error::domain(format!("servo gain needs f > 0, got {f}")));
    }
    let integrator =
        Complex::new(T::zero(), -(servo.unity_gain_frequency / f)).powu(servo.integrator_order);
    let delay = Complex::from_polar(T::one(), -T::TAU() * f * servo.delay);
    let mut g = integrator * delay;
    if let Some(fc) = servo.low_pass_corner {
        g /= Complex::new(T::one(), f / fc);
    }
    Ok(g)
}

/// Magnitude of the closed-loop denominator `|1 - sqrt(t) G|` and whether
/// the loop suppresses (`> 1`) at this frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoopPoint<T> {
    pub frequency: T,
    pub denominator: T,
}

impl<T: Real> LoopPoint<T> {
    pub fn suppresses(&self) -> bool {
        self.denominator > T::one()
    }

    /// `1 / |1 - sqrt(t) G|^2`.
    pub fn residual_factor(&self) -> T {
        (self.denominator * self.denominator).recip()
    }
}

pub fn loop_point<T: Real>(
    servo: &ServoModel<T>,
    bs: &BeamSplitter<T>,
    f: T,
) -> Result<LoopPoint<T>> {
    let g = servo_gain(servo, f)?;
    loop_point_with_gain(g, bs, f)
}

fn loop_point_with_gain<T: Real>(
    g: Complex<T>,
    bs: &BeamSplitter<T>,
    f: T,
) -> Result<LoopPoint<T>> {
    let denominator = (Complex::new(T::one(), T::zero()) - g.scale(bs.t().sqrt())).norm();
    if !(denominator >= lit(SINGULARITY_THRESHOLD)) {
        return Err(Error::Singularity {
            frequency_hz: crate::scalar::to_f64(f),
            magnitude: crate::scalar::to_f64(denominator),
        });
    }
    Ok(LoopPoint {
        frequency: f,
        denominator,
    })
}

/// The three floor spectra feeding the loop: residual amplitude noise
/// (`RIN_X^2`), in-loop detector electronic noise, and the free-running
/// phase-quadrature noise (`RIN_Y^2`).
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseFloors<T> {
    residual_amplitude_rin: Spectrum<T>,
    electronic_noise: Spectrum<T>,
    free_running_phase: Spectrum<T>,
}

impl<T: Real> NoiseFloors<T> {
    pub fn new(
        residual_amplitude_rin: Spectrum<T>,
        electronic_noise: Spectrum<T>,
        free_running_phase: Spectrum<T>,
    ) -> Result<Self> {
        for (name, s) in [
            ("residual amplitude", &residual_amplitude_rin),
            ("electronic", &electronic_noise),
            ("free-running phase", &free_running_phase),
        ] {
            if s.unit() != SpectrumUnit::RinLinear {
                return Err(Error::structural(format!(
                    "{name} floor must be linear RIN, got {}",
                    s.unit().label()
                )));
            }
            if s.grid() != residual_amplitude_rin.grid() {
                return Err(Error::structural(format!(
                    "{name} floor is on a different grid"
                )));
            }
        }
        Ok(Self {
            residual_amplitude_rin,
            electronic_noise,
            free_running_phase,
        })
    }

    pub fn residual_amplitude_rin(&self) -> &Spectrum<T> {
        &self.residual_amplitude_rin
    }

    pub fn electronic_noise(&self) -> &Spectrum<T> {
        &self.electronic_noise
    }

    pub fn free_running_phase(&self) -> &Spectrum<T> {
        &self.free_running_phase
    }

    fn at(&self, f: T) -> Result<FloorPoint<T>> {
        let get = |s: &Spectrum<T>| {
            s.value_at(f).ok_or_else(|| {
                Error::domain(format!("frequency {f} Hz lies outside the floor grid"))
            })
        };
        Ok(FloorPoint {
            amplitude: get(&self.residual_amplitude_rin)?,
            electronic: get(&self.electronic_noise)?,
            phase: get(&self.free_running_phase)?,
        })
    }
}

#[derive(Debug, Clone, Copy)]
struct FloorPoint<T> {
    amplitude: T,
    electronic: T,
    phase: T,
}

fn check_squeezed<T: Real>(squeezed_x: T) -> Result<()> {
    if !squeezed_x.is_finite() || squeezed_x <= T::zero() {
        return Err(Error::domain(format!(
            "squeezed variance must be positive, got {squeezed_x}"
        )));
    }
    Ok(())
}

/// In-loop RIN: `RIN_X^2 + theta_1^2 RIN_Y^2 + RSN^2 S_S^x`.
pub fn inloop_rin2<T: Real>(
    floors: &NoiseFloors<T>,
    cavity_in: &CavityParams<T>,
    det: &DetectionParams<T>,
    squeezed_x: T,
    f: T,
) -> Result<T> {
    check_squeezed(squeezed_x)?;
    let p = floors.at(f)?;
    Ok(p.amplitude + cavity_in.conversion(f)? * p.phase + shot_noise_rsn2(det) * squeezed_x)
}

/// Free-running out-of-loop RIN: `RIN_X^2 + theta_2^2 RIN_Y^2`.
pub fn outofloop_rin2_open<T: Real>(
    floors: &NoiseFloors<T>,
    cavity_out: &CavityParams<T>,
    f: T,
) -> Result<T> {
    let p = floors.at(f)?;
    Ok(p.amplitude + cavity_out.conversion(f)? * p.phase)
}

/// Closed-loop out-of-loop RIN:
/// `RIN_X^2 + theta_2^2 (RIN_Y^2 / |1 - sqrt(t) G|^2 + RSN^2 S_S^x / r)`.
#[allow(clippy::too_many_arguments)]
pub fn outofloop_rin2_closed<T: Real>(
    floors: &NoiseFloors<T>,
    cavity_out: &CavityParams<T>,
    servo: &ServoModel<T>,
    bs: &BeamSplitter<T>,
    det: &DetectionParams<T>,
    squeezed_x: T,
    f: T,
) -> Result<T> {
    let g = servo_gain(servo, f)?;
    outofloop_rin2_closed_with_gain(floors, cavity_out, g, bs, det, squeezed_x, f)
}

/// [`outofloop_rin2_closed`] for an explicit complex loop gain.
#[allow(clippy::too_many_arguments)]
pub fn outofloop_rin2_closed_with_gain<T: Real>(
    floors: &NoiseFloors<T>,
    cavity_out: &CavityParams<T>,
    gain: Complex<T>,
    bs: &BeamSplitter<T>,
    det: &DetectionParams<T>,
    squeezed_x: T,
    f: T,
) -> Result<T> {
    check_squeezed(squeezed_x)?;
    let lp = loop_point_with_gain(gain, bs, f)?;
    let p = floors.at(f)?;
    let readout = shot_noise_rsn2(det) * squeezed_x / bs.r();
    Ok(p.amplitude + cavity_out.conversion(f)? * (p.phase * lp.residual_factor() + readout))
}

/// Closed-loop noise at one frequency, split into uncorrelated terms and
/// referred to the in-loop readout.
///
/// The readout noise (shot noise times squeezed variance) and the amplitude
/// and electronic floors are imprinted onto the laser phase by the loop at
/// the in-loop conversion `theta_1^2`; the witness cavity reads them back at
/// `theta_2^2`, and the cross-cavity factor maps the result back onto the
/// in-loop scale. Each term is therefore in the same RIN units as the
/// in-loop shot noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferredTerms<T> {
    pub frequency: T,
    /// `RIN_X^2`.
    pub amplitude: T,
    /// Electronic noise of the in-loop detector.
    pub electronic: T,
    /// `theta_1^2 RIN_Y^2 / |1 - sqrt(t) G|^2`.
    pub phase_residual: T,
    /// `RSN^2 S_S^x / r`.
    pub readout: T,
    /// `|1 - sqrt(t) G|`.
    pub loop_denominator: T,
}

impl<T: Real> ReferredTerms<T> {
    pub fn total(&self) -> T {
        self.amplitude + self.electronic + self.phase_residual + self.readout
    }
}

#[allow(clippy::too_many_arguments)]
pub fn referred_closed_loop_terms<T: Real>(
    floors: &NoiseFloors<T>,
    cavity_in: &CavityParams<T>,
    cavity_out: &CavityParams<T>,
    servo: &ServoModel<T>,
    bs: &BeamSplitter<T>,
    det: &DetectionParams<T>,
    squeezed_x: T,
    f: T,
) -> Result<ReferredTerms<T>> {
    check_squeezed(squeezed_x)?;
    let lp = loop_point(servo, bs, f)?;
    let p = floors.at(f)?;
    let norm = cross_cavity_normalization(cavity_in, cavity_out);
    let witness = norm * cavity_out.conversion(f)?;
    Ok(ReferredTerms {
        frequency: f,
        amplitude: p.amplitude,
        electronic: p.electronic,
        phase_residual: witness * p.phase * lp.residual_factor(),
        readout: shot_noise_rsn2(det) * squeezed_x / bs.r(),
        loop_denominator: lp.denominator,
    })
}

/// Frequency-noise density `S_nu(f) = f^2 S_phi(f)`.
pub fn freq_noise_from_phase<T: Real>(s_phi: &Spectrum<T>) -> Result<Spectrum<T>> {
    if s_phi.unit() != SpectrumUnit::PhaseNoise {
        return Err(Error::structural(format!(
            "expected phase noise in rad^2/Hz, got {}",
            s_phi.unit().label()
        )));
    }
    let values = s_phi.iter().map(|(f, v)| f * f * v).collect();
    Spectrum::new(s_phi.grid().clone(), values, SpectrumUnit::FreqNoiseLinear)
}

/// Inverse of [`freq_noise_from_phase`].
pub fn phase_from_freq_noise<T: Real>(s_nu: &Spectrum<T>) -> Result<Spectrum<T>> {
    if s_nu.unit() != SpectrumUnit::FreqNoiseLinear {
        return Err(Error::structural(format!(
            "expected frequency noise in Hz^2/Hz, got {}",
            s_nu.unit().label()
        )));
    }
    let values = s_nu.iter().map(|(f, v)| v / (f * f)).collect();
    Spectrum::new(s_nu.grid().clone(), values, SpectrumUnit::PhaseNoise)
}

/// Ratio of the in-loop to the witness-cavity conversion coefficients,
/// `(slope_in kappa_out / (slope_out kappa_in))^2`.
pub fn cross_cavity_normalization<T: Real>(
    cavity_in: &CavityParams<T>,
    cavity_out: &CavityParams<T>,
) -> T {
    let ratio = cavity_in.slope() * cavity_out.kappa() / (cavity_out.slope() * cavity_in.kappa());
    ratio * ratio
}

/// Unity-gain frequency for which the servo-suppressed phase residual
/// `theta_1^2 RIN_Y^2 / |1 - sqrt(t) G|^2` at `f` equals `target`.
///
/// Searches by bisection in log frequency; the residual must decrease with
/// gain over the bracket, which holds for delay-free integrators.
pub fn calibrate_unity_gain<T: Real>(
    servo: &ServoModel<T>,
    bs: &BeamSplitter<T>,
    cavity_in: &CavityParams<T>,
    free_running_phase: T,
    f: T,
    target: T,
) -> Result<ServoModel<T>> {
    let unsuppressed = cavity_in.conversion(f)? * free_running_phase;
    if !(target > T::zero()) || !(target < unsuppressed) {
        return Err(Error::domain(format!(
            "calibration target {target:e} must lie in (0, {unsuppressed:e}) at {f} Hz"
        )));
    }
    let residual = |f_ug: T| -> Result<T> {
        let s = servo.with_unity_gain_frequency(f_ug)?;
        Ok(unsuppressed * loop_point(&s, bs, f)?.residual_factor())
    };
    let (mut lo, mut hi) = (lit::<T>(1e-3).ln(), lit::<T>(1e15).ln());
    if residual(hi.exp())? > target {
        return Err(Error::domain(
            "calibration target not reachable below 1e15 Hz",
        ));
    }
    for _ in 0..200 {
        let mid = (lo + hi) / lit(2.0);
        if residual(mid.exp())? > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    servo.with_unity_gain_frequency(((lo + hi) / lit(2.0)).exp())
}
