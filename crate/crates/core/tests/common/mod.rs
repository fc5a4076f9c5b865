//! Randomized property checks shared by the property test target and the
//! acceptance suite. Each check runs `cases` random inputs.

#![allow(dead_code)]

use std::path::Path;

use num_complex::Complex;
use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};

use phasefilter::budget::{
    enhancement_after_coupling, ledger_chain, total_efficiency, BudgetEntry, EnhancementLedger,
    EntryKind,
};
use phasefilter::feedback::{
    inloop_rin2, outofloop_rin2_closed, outofloop_rin2_closed_with_gain, shot_noise_rsn2,
    DetectionParams, NoiseFloors, ServoModel,
};
use phasefilter::noise::{
    db_from_linear, linear_from_db, log_spaced_grid, uncorrelated_sum, QuadratureVariances,
    Spectrum, SpectrumUnit,
};
use phasefilter::optics::{
    apply_loss, apply_phase_jitter, couple_at_bs, detected_inloop_variance, BeamSplitter,
    CavityParams, DetuningRegime,
};
use phasefilter::scenario::{run_scenario, traces_to_csv, traces_to_json, ScenarioConfig};

pub type Check = fn(u32) -> Result<(), String>;

/// Named property checks in a fixed order.
pub const PROPERTIES: &[(&str, Check)] = &[
    ("vacuum fixed point", vacuum_fixed_point),
    (
        "beam-splitter variance conservation at t=0",
        bs_trace_conservation,
    ),
    ("apply_loss monotonicity and vacuum limit", loss_monotone),
    ("uncertainty-product preservation", uncertainty_preserved),
    ("phase jitter contracts toward isotropy", jitter_contracts),
    (
        "in-loop variance independent of angle for isotropic input",
        inloop_angle_independent,
    ),
    (
        "closed-loop monotonicity in squeezed variance",
        closed_loop_monotone_in_squeezing,
    ),
    (
        "closed-loop monotonicity in |G|",
        closed_loop_monotone_in_gain,
    ),
    (
        "closed-loop outputs finite and positive",
        closed_loop_finite_positive,
    ),
    (
        "in-loop RIN bounded below by squeezed shot noise",
        inloop_lower_bound,
    ),
    ("dB round-trip identity", db_round_trip),
    ("uncorrelated sum algebra", sum_algebra),
    (
        "coupling enhancement monotonicity and bound",
        coupling_enhancement_bounds,
    ),
    (
        "efficiency product permutation invariance",
        efficiency_permutation,
    ),
    ("ledger stages non-increasing", ledger_non_increasing),
    (
        "CSV/JSON byte determinism across reruns",
        export_determinism,
    ),
];

fn run<S: Strategy>(
    cases: u32,
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Result<(), String>
where
    S::Value: std::fmt::Debug,
{
    let mut runner = TestRunner::new(Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    });
    runner.run(&strategy, test).map_err(|e| e.to_string())
}

fn physical_state() -> impl Strategy<Value = QuadratureVariances<f64>> {
    (0.0..20.0f64, 0.0..15.0f64)
        .prop_map(|(sq, extra)| QuadratureVariances::from_db(sq, sq + extra).unwrap())
}

fn any_state() -> impl Strategy<Value = QuadratureVariances<f64>> {
    (1e-3..1e3f64, 1e-3..1e3f64).prop_map(|(x, y)| QuadratureVariances::new(x, y).unwrap())
}

fn splitter() -> impl Strategy<Value = BeamSplitter<f64>> {
    (1e-4..0.9999f64).prop_map(|r| BeamSplitter::from_reflectivity(r).unwrap())
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1e-300)
}

pub fn vacuum_fixed_point(cases: u32) -> Result<(), String> {
    run(
        cases,
        (splitter(), -1.5..1.5f64, 0.0..1.0f64, 1e-6..1.0f64),
        |(bs, theta, sigma, eta)| {
            let vac = QuadratureVariances::vacuum();
            prop_assert_eq!(
                detected_inloop_variance(&vac, &vac, &bs, theta).unwrap(),
                1.0
            );
            let c = couple_at_bs(&vac, &vac, &bs, theta).unwrap();
            prop_assert!(close(c.s_x(), 1.0, 1e-15) && close(c.s_y(), 1.0, 1e-15));
            let l = apply_loss(&vac, eta).unwrap();
            prop_assert!(close(l.s_x(), 1.0, 1e-15) && close(l.s_y(), 1.0, 1e-15));
            prop_assert_eq!(apply_phase_jitter(&vac, sigma).unwrap(), vac);
            Ok(())
        },
    )
}

pub fn bs_trace_conservation(cases: u32) -> Result<(), String> {
    let reflect_all = BeamSplitter::new(1e-15, 1.0 - 1e-15).unwrap();
    run(cases, (any_state(), -1.5..1.5f64), move |(sq, angle)| {
        let vac = QuadratureVariances::vacuum();
        let out = couple_at_bs(&vac, &sq, &reflect_all, angle).unwrap();
        prop_assert!(close(out.s_x() + out.s_y(), sq.s_x() + sq.s_y(), 1e-12));
        Ok(())
    })
}

pub fn loss_monotone(cases: u32) -> Result<(), String> {
    run(
        cases,
        (any_state(), 1e-6..1.0f64, 1e-6..1.0f64),
        |(v, a, b)| {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assume!(lo < hi);
            let more = apply_loss(&v, lo).unwrap();
            let less = apply_loss(&v, hi).unwrap();
            for (orig, m, l) in [
                (v.s_x(), more.s_x(), less.s_x()),
                (v.s_y(), more.s_y(), less.s_y()),
            ] {
                prop_assert!((m - 1.0).abs() <= (l - 1.0).abs() + 1e-15);
                if orig != 1.0 {
                    prop_assert!((m - 1.0).abs() < (l - 1.0).abs());
                }
            }
            let gone = apply_loss(&v, 1e-12).unwrap();
            prop_assert!((gone.s_x() - 1.0).abs() < 1e-8 && (gone.s_y() - 1.0).abs() < 1e-8);
            Ok(())
        },
    )
}

pub fn uncertainty_preserved(cases: u32) -> Result<(), String> {
    run(
        cases,
        (physical_state(), 1e-6..1.0f64, 0.0..2.0f64),
        |(v, eta, sigma)| {
            prop_assert!(v.uncertainty_product() >= 1.0 - 1e-12);
            prop_assert!(apply_loss(&v, eta).unwrap().uncertainty_product() >= 1.0 - 1e-12);
            prop_assert!(
                apply_phase_jitter(&v, sigma).unwrap().uncertainty_product() >= 1.0 - 1e-12
            );
            Ok(())
        },
    )
}

pub fn jitter_contracts(cases: u32) -> Result<(), String> {
    run(cases, (any_state(), 0.0..3.0f64), |(v, sigma)| {
        let out = apply_phase_jitter(&v, sigma).unwrap();
        let (lo, hi) = (v.s_x().min(v.s_y()), v.s_x().max(v.s_y()));
        let (olo, ohi) = (out.s_x().min(out.s_y()), out.s_x().max(out.s_y()));
        prop_assert!(olo >= lo * (1.0 - 1e-12));
        prop_assert!(ohi <= hi * (1.0 + 1e-12));
        let wide = apply_phase_jitter(&v, 40.0).unwrap();
        let mid = (v.s_x() + v.s_y()) / 2.0;
        prop_assert!(close(wide.s_x(), mid, 1e-12) && close(wide.s_y(), mid, 1e-12));
        Ok(())
    })
}

pub fn inloop_angle_independent(cases: u32) -> Result<(), String> {
    run(
        cases,
        (1e-3..1e3f64, any_state(), splitter()),
        |(s, sq, bs)| {
            let input = QuadratureVariances::new(s, s).unwrap();
            let first = detected_inloop_variance(&input, &sq, &bs, 0.0).unwrap();
            for k in 1..32 {
                let theta = -1.5 + 3.0 * k as f64 / 32.0;
                prop_assert_eq!(
                    detected_inloop_variance(&input, &sq, &bs, theta).unwrap(),
                    first
                );
            }
            Ok(())
        },
    )
}

#[derive(Debug)]
struct LoopSetup {
    floors: NoiseFloors<f64>,
    cavity_in: CavityParams<f64>,
    cavity_out: CavityParams<f64>,
    det: DetectionParams<f64>,
    bs: BeamSplitter<f64>,
    servo: ServoModel<f64>,
    f: f64,
}

fn loop_setup() -> impl Strategy<Value = LoopSetup> {
    (
        (
            -175.0..-140.0f64,
            -175.0..-140.0f64,
            -40.0..10.0f64,
            -5.0..0.0f64,
        ),
        (1e5..2e7f64, 0.01..1.0f64, 1e5..2e7f64),
        (1e-6..1e-2f64, 1e-3..0.999f64),
        (1e3..1e8f64, 1u32..=3, 0.0..1e-7f64),
        0usize..16,
    )
        .prop_map(
            |((amp, el, ph, exp), (lw1, slope1, lw2), (p, r), (fug, order, delay), idx)| {
                let grid = log_spaced_grid(1e3, 1e5, 16).unwrap();
                let f = grid.points()[idx];
                let lvl = |d: f64| linear_from_db(d).unwrap();
                let floors = NoiseFloors::new(
                    Spectrum::flat(grid.clone(), lvl(amp), SpectrumUnit::RinLinear).unwrap(),
                    Spectrum::flat(grid.clone(), lvl(el), SpectrumUnit::RinLinear).unwrap(),
                    Spectrum::from_fn(grid, SpectrumUnit::RinLinear, |f| {
                        lvl(ph) * (f / 1e3).powf(exp)
                    })
                    .unwrap(),
                )
                .unwrap();
                LoopSetup {
                    floors,
                    cavity_in: CavityParams::from_fwhm_hz(lw1, DetuningRegime::Custom(slope1), 0.0)
                        .unwrap(),
                    cavity_out: CavityParams::from_fwhm_hz(lw2, DetuningRegime::HalfDetuned, 0.0)
                        .unwrap(),
                    det: DetectionParams::new(p, 1550e-9).unwrap(),
                    bs: BeamSplitter::from_reflectivity(r).unwrap(),
                    servo: ServoModel::new(fug, order, delay, None).unwrap(),
                    f,
                }
            },
        )
}

pub fn closed_loop_monotone_in_squeezing(cases: u32) -> Result<(), String> {
    run(
        cases,
        (loop_setup(), 1e-3..10.0f64, 1e-3..10.0f64),
        |(s, a, b)| {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assume!(lo < hi);
            let eval = |x| {
                outofloop_rin2_closed(&s.floors, &s.cavity_out, &s.servo, &s.bs, &s.det, x, s.f)
            };
            match (eval(lo), eval(hi)) {
                (Ok(vl), Ok(vh)) => prop_assert!(vl < vh),
                _ => prop_assume!(false),
            }
            Ok(())
        },
    )
}

pub fn closed_loop_monotone_in_gain(cases: u32) -> Result<(), String> {
    let phase = std::f64::consts::FRAC_PI_2..(3.0 * std::f64::consts::FRAC_PI_2);
    run(
        cases,
        (loop_setup(), 0.0..1e4f64, 0.0..1e4f64, phase, 0.05..2.0f64),
        |(s, a, b, phi, x)| {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            let eval = |mag: f64| {
                outofloop_rin2_closed_with_gain(
                    &s.floors,
                    &s.cavity_out,
                    Complex::from_polar(mag, phi),
                    &s.bs,
                    &s.det,
                    x,
                    s.f,
                )
                .unwrap()
            };
            prop_assert!(eval(hi) <= eval(lo) * (1.0 + 1e-12));
            Ok(())
        },
    )
}

pub fn closed_loop_finite_positive(cases: u32) -> Result<(), String> {
    run(cases, (loop_setup(), 1e-3..10.0f64), |(s, x)| {
        if let Ok(v) =
            outofloop_rin2_closed(&s.floors, &s.cavity_out, &s.servo, &s.bs, &s.det, x, s.f)
        {
            prop_assert!(v.is_finite() && v > 0.0);
        }
        let v = inloop_rin2(&s.floors, &s.cavity_in, &s.det, x, s.f).unwrap();
        prop_assert!(v.is_finite() && v > 0.0);
        Ok(())
    })
}

pub fn inloop_lower_bound(cases: u32) -> Result<(), String> {
    run(cases, (loop_setup(), 1e-3..10.0f64), |(s, x)| {
        let v = inloop_rin2(&s.floors, &s.cavity_in, &s.det, x, s.f).unwrap();
        prop_assert!(v >= shot_noise_rsn2(&s.det) * x);
        Ok(())
    })
}

pub fn db_round_trip(cases: u32) -> Result<(), String> {
    run(cases, -200.0..200.0f64, |d| {
        let x = linear_from_db(d).unwrap();
        let back = db_from_linear(x).unwrap();
        prop_assert!((back - d).abs() <= 1e-12 * d.abs().max(1.0));
        prop_assert!(close(
            linear_from_db(db_from_linear(x).unwrap()).unwrap(),
            x,
            1e-12
        ));
        Ok(())
    })
}

pub fn sum_algebra(cases: u32) -> Result<(), String> {
    let vals = proptest::collection::vec(1e-20..1e-10f64, 8);
    run(cases, (vals.clone(), vals.clone(), vals), |(a, b, c)| {
        let g = log_spaced_grid(1e3, 1e5, 8).unwrap();
        let mk = |v: Vec<f64>| Spectrum::new(g.clone(), v, SpectrumUnit::RinLinear).unwrap();
        let (a, b, c) = (mk(a), mk(b), mk(c));
        let ab = uncorrelated_sum(&[&a, &b]).unwrap();
        let ba = uncorrelated_sum(&[&b, &a]).unwrap();
        prop_assert_eq!(&ab, &ba);
        let left = uncorrelated_sum(&[&ab, &c]).unwrap();
        let bc = uncorrelated_sum(&[&b, &c]).unwrap();
        let right = uncorrelated_sum(&[&a, &bc]).unwrap();
        for ((l, r), (x, y)) in left
            .values()
            .iter()
            .zip(right.values())
            .zip(ab.values().iter().zip(a.values()))
        {
            prop_assert!(close(*l, *r, 1e-12));
            prop_assert!(x >= y);
        }
        Ok(())
    })
}

pub fn coupling_enhancement_bounds(cases: u32) -> Result<(), String> {
    run(
        cases,
        (0.0..30.0f64, 1e-4..1.0f64, 1e-3..2.0f64),
        |(e, c, step)| {
            let base = enhancement_after_coupling(e, c).unwrap();
            prop_assert!(enhancement_after_coupling(e, c + step).unwrap() < base);
            prop_assert!(enhancement_after_coupling(e + step, c).unwrap() > base);
            prop_assert!(base <= e.min(-10.0 * c.log10()) + 1e-12);
            prop_assert!((enhancement_after_coupling(e, 0.0).unwrap() - e).abs() < 1e-12);
            Ok(())
        },
    )
}

pub fn efficiency_permutation(cases: u32) -> Result<(), String> {
    let etas = proptest::collection::vec(1e-3..=1.0f64, 1..8);
    run(
        cases,
        etas.prop_flat_map(|v| (Just(v.clone()), Just(v).prop_shuffle())),
        |(a, b)| {
            let entries = |v: &[f64]| -> Vec<BudgetEntry<f64>> {
                v.iter()
                    .map(|e| BudgetEntry::new("e", EntryKind::Efficiency, *e, 0.0).unwrap())
                    .collect()
            };
            let pa = total_efficiency(&entries(&a)).unwrap().value;
            let pb = total_efficiency(&entries(&b)).unwrap().value;
            prop_assert!(close(pa, pb, 1e-12));
            prop_assert!(pa <= a.iter().copied().fold(1.0, f64::min) * (1.0 + 1e-12));
            Ok(())
        },
    )
}

pub fn ledger_non_increasing(cases: u32) -> Result<(), String> {
    run(
        cases,
        (
            0.0..20.0f64,
            0.0..10.0f64,
            0.0..5.0f64,
            0.0..1.0f64,
            0.0..3.0f64,
        ),
        |(s0, l, p, c, sv)| {
            let stages = ledger_chain(&EnhancementLedger::new(s0, l, p, c, sv).unwrap())
                .unwrap()
                .as_array();
            prop_assert!(stages[0] <= s0 + 1e-12);
            prop_assert!(stages[1] <= stages[0] + 1e-12);
            prop_assert!(stages[2] <= stages[1] + 1e-12);
            prop_assert!(stages.iter().all(|s| *s >= 0.0));
            Ok(())
        },
    )
}

pub fn export_determinism(cases: u32) -> Result<(), String> {
    let strategy = (
        2usize..48,
        1e-5..1e-3f64,
        0.9..0.999f64,
        6.0..14.0f64,
        1e4..1e7f64,
    );
    run(cases, strategy, |(n, power, r, s0, fug)| {
        let text = format!(
            "[grid]\npoints = {n}\n[detection]\npower_w = {power:e}\n[beam_splitter]\nreflectivity = {r}\n[squeezer]\nsqueezing_db = {s0}\n[servo]\nunity_gain_hz = {fug:e}\n"
        );
        let render = || {
            let cfg = ScenarioConfig::from_toml_str(&text, Path::new("prop.scenario")).unwrap();
            let out = run_scenario(&cfg).unwrap();
            (
                traces_to_csv(&out.traces).unwrap(),
                traces_to_json(&out.traces).unwrap(),
            )
        };
        let (c1, j1) = render();
        let (c2, j2) = render();
        prop_assert_eq!(c1, c2);
        prop_assert_eq!(j1, j2);
        Ok(())
    })
}
