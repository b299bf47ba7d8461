//! Peak detection, IBI heart rate and spectral estimators.

use std::f64::consts::PI;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rppg_core::hr::coherence;
use rppg_core::{
    csd, detect_peaks, ibi_hr, spectral_hr, welch_psd, HrMethod, PeakTrain, Psd, PsdMethod, PulseSignal, RppgError, SynthConfig,
};

const FPS: f64 = 30.0;

fn white_noise(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).unwrap();
    (0..n).map(|_| normal.sample(&mut rng)).collect()
}

fn train(times: Vec<f64>) -> PeakTrain {
    let peak_indices = (0..times.len()).collect();
    PeakTrain {
        peak_times: times,
        peak_indices,
    }
}

#[test]
fn periodic_peaks_give_exact_rate() {
    for period in [0.5, 0.8, 0.8333333333333334, 1.1] {
        let peaks = train((0..40).map(|k| 0.3 + k as f64 * period).collect());
        let windows = ibi_hr(&peaks, 10.0, 0.0).unwrap();
        assert!(!windows.is_empty());
        for w in windows {
            assert!((w.hr_bpm - 60.0 / period).abs() < 1e-9, "{period}: {}", w.hr_bpm);
            assert_eq!(w.method, HrMethod::Ibi);
        }
    }
}

#[test]
fn ibi_windows_assign_by_later_peak() {
    let peaks = train(vec![9.0, 9.8, 10.4, 11.2]);
    let w = ibi_hr(&peaks, 10.0, 0.0).unwrap();
    assert_eq!(w.len(), 2);
    assert_eq!(w[0].n_ibis, 1);
    assert!((w[0].hr_bpm - 60.0 / 0.8).abs() < 1e-9);
    assert_eq!(w[1].n_ibis, 2);
    assert!((w[1].hr_bpm - 60.0 / 0.7).abs() < 1e-9);
}

#[test]
fn too_few_peaks_is_an_error() {
    assert!(matches!(
        ibi_hr(&train(vec![1.0]), 10.0, 0.0),
        Err(RppgError::InsufficientPeaks { found: 1 })
    ));
}

proptest! {
    #[test]
    fn ibi_rate_is_shift_invariant(
        gaps in prop::collection::vec(0.3..1.2f64, 2..60),
        start in 0.0..5.0f64,
        shift in -100.0..100.0f64,
    ) {
        let mut times = vec![start];
        for g in &gaps {
            times.push(times.last().unwrap() + g);
        }
        let a = ibi_hr(&train(times.clone()), 10.0, 0.0).unwrap();
        let b = ibi_hr(&train(times.iter().map(|t| t + shift).collect()), 10.0, shift).unwrap();
        prop_assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x.hr_bpm - y.hr_bpm).abs() < 1e-6);
            prop_assert_eq!(x.n_ibis, y.n_ibis);
        }
    }

    #[test]
    fn kept_peaks_respect_min_separation(
        x in prop::collection::vec(-5.0..5.0f64, 3..400),
        min_sep in 0.0..1.0f64,
    ) {
        let sig = PulseSignal::new(x.clone(), FPS, 0.0);
        let peaks = detect_peaks(&sig, min_sep, 0.5).unwrap();
        for w in peaks.peak_times.windows(2) {
            prop_assert!(w[1] - w[0] >= min_sep - 1e-12);
        }
        for &i in &peaks.peak_indices {
            prop_assert!(i > 0 && i + 1 < x.len());
            prop_assert!(x[i] > x[i - 1] && x[i] > x[i + 1]);
        }
    }

    #[test]
    fn peak_times_follow_the_time_origin(t0 in -50.0..50.0f64) {
        let x: Vec<f64> = (0..300).map(|i| (2.0 * PI * 1.3 * i as f64 / FPS).sin()).collect();
        let a = detect_peaks(&PulseSignal::new(x.clone(), FPS, 0.0), 0.25, 0.5).unwrap();
        let b = detect_peaks(&PulseSignal::new(x, FPS, t0), 0.25, 0.5).unwrap();
        prop_assert_eq!(&a.peak_indices, &b.peak_indices);
        for (p, q) in a.peak_times.iter().zip(&b.peak_times) {
            prop_assert!((q - p - t0).abs() < 1e-9);
        }
    }
}

#[test]
fn ibi_and_welch_agree_within_a_bin() {
    for hr in [54.0, 72.0, 96.0, 150.0] {
        let cfg = SynthConfig {
            hr_bpm: hr,
            ..SynthConfig::default()
        };
        let values: Vec<f64> = (0..cfg.frame_count()).map(|i| cfg.pulse_wave(i as f64 / FPS)).collect();
        let sig = PulseSignal::new(values, FPS, 0.0);
        let peaks = detect_peaks(&sig, 0.25, 0.5).unwrap();
        let ibi = ibi_hr(&peaks, 30.0, 0.0).unwrap();
        let psd = welch_psd(&sig, 10.0, 0.5).unwrap();
        let spectral = spectral_hr(&psd, (0.7, 4.0)).unwrap();
        let bin_bpm = 60.0 * psd.freqs[1];
        assert!(
            (ibi[0].hr_bpm - spectral.hr_bpm).abs() <= bin_bpm,
            "{hr}: {} vs {}",
            ibi[0].hr_bpm,
            spectral.hr_bpm
        );
        assert!((ibi[0].hr_bpm - hr).abs() < 0.5);
    }
}

#[test]
fn white_noise_welch_is_flat() {
    // 2 s segments over 240 s: 239 half-overlapping segments.
    let sig = PulseSignal::new(white_noise(7200, 7), FPS, 0.0);
    let psd = welch_psd(&sig, 2.0, 0.5).unwrap();
    let level = 2.0 / FPS;
    let last = psd.power.len() - 1;
    for k in 2..last {
        let db = 10.0 * (psd.power[k] / level).log10();
        assert!(db.abs() <= 3.0, "bin {k}: {db} dB");
    }
}

#[test]
fn tone_pair_power_ratio() {
    let n = 3000;
    let x: Vec<f64> = (0..n)
        .map(|i| {
            let t = i as f64 / FPS;
            2.0 * (2.0 * PI * 1.0 * t).sin() + (2.0 * PI * 2.5 * t + 0.3).sin()
        })
        .collect();
    let psd = welch_psd(&PulseSignal::new(x, FPS, 0.0), 10.0, 0.5).unwrap();
    let at = |f: f64| psd.power[(f / psd.freqs[1]).round() as usize];
    let ratio = at(1.0) / at(2.5);
    assert!((ratio - 4.0).abs() < 0.04, "ratio {ratio}");
    // Total tone power 2 + 0.5 recovered from the density (Hann main lobe
    // spans three bins).
    let bin = psd.freqs[1];
    let lobe = |f: f64| {
        let k = (f / bin).round() as usize;
        (k - 1..=k + 1).map(|j| psd.power[j]).sum::<f64>() * bin
    };
    assert!((lobe(1.0) - 2.0).abs() < 0.02 * 2.0 * 1.5, "{}", lobe(1.0));
}

#[test]
fn independent_noise_has_low_coherence() {
    let x = PulseSignal::new(white_noise(9000, 1), FPS, 0.0);
    let y = PulseSignal::new(white_noise(9000, 2), FPS, 0.0);
    let coh = coherence(&x, &y, 10.0).unwrap();
    let mean = coh[1..].iter().sum::<f64>() / (coh.len() - 1) as f64;
    assert!(mean < 0.2, "mean coherence {mean}");
    let self_coh = coherence(&x, &x, 10.0).unwrap();
    assert!(self_coh[1..].iter().all(|c| (c - 1.0).abs() < 1e-9));
}

#[test]
fn auto_csd_equals_welch() {
    let x = PulseSignal::new(white_noise(1800, 3), FPS, 0.0);
    let c = csd(&x, &x, 10.0).unwrap();
    let w = welch_psd(&x, 10.0, 0.5).unwrap();
    assert_eq!(c.method, PsdMethod::Csd);
    assert_eq!(c.freqs, w.freqs);
    for (a, b) in c.power.iter().zip(&w.power) {
        assert!((a - b).abs() <= 1e-9 * b.abs().max(1e-300), "{a} vs {b}");
    }
}

#[test]
fn spectral_ties_go_to_the_lower_frequency() {
    let psd = Psd {
        freqs: (0..50).map(|k| k as f64 * 0.1).collect(),
        power: (0..50).map(|k| if k == 12 || k == 24 { 5.0 } else { 1.0 }).collect(),
        method: PsdMethod::Welch,
    };
    let est = spectral_hr(&psd, (0.7, 4.0)).unwrap();
    assert!((est.hr_bpm - 72.0).abs() < 1e-9);
    assert_eq!(est.method, HrMethod::WelchPeak);
}
