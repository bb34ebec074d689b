use jointcv::calibration::{quadrature_variance, to_snu, NoiseCalibration};
use jointcv::channel::quantize;
use jointcv::filter::{fir_same, frequency_shift};
use jointcv::iqdump::{read_iq, write_iq};
use jointcv::qpsk::{ber, decide, index_to_bits, qpsk_point};
use jointcv::runner::output::welch_psd;
use jointcv::rx::vv::{count_slips, fourth_power};
use jointcv::security::{key_rate, null_key_threshold, symplectic_eigenvalues, SecurityParams};
use jointcv::tx::rrc_taps;
use jointcv::types::{IqStream, Units};
use jointcv::Complex64;
use proptest::prelude::*;

fn params(v_a: f64, t: f64, xi: f64) -> SecurityParams {
    SecurityParams {
        v_a,
        t,
        xi_b: xi,
        eta: 1.0,
        v_el: 0.05,
        beta: 0.95,
        baud_hz: 250e6,
    }
}

fn samples() -> impl Strategy<Value = Vec<Complex64>> {
    prop::collection::vec(
        (-3.0f64..3.0, -3.0f64..3.0).prop_map(|(a, b)| Complex64::new(a, b)),
        1..300,
    )
}

fn stream(s: Vec<Complex64>) -> IqStream<f64> {
    IqStream::new(s, 20e9, Units::Arbitrary).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn eigenvalues_are_physical(v_a in 0.05f64..20.0, t in 0.01f64..1.0, xi in 0.0f64..0.5) {
        for l in symplectic_eigenvalues(&params(v_a, t, xi)).unwrap() {
            prop_assert!(l >= 1.0 - 1e-9, "{l}");
        }
    }

    #[test]
    fn key_rate_falls_with_excess_noise(v_a in 0.1f64..5.0, t in 0.1f64..1.0, xi in 0.0f64..0.2, d in 1e-4f64..0.05) {
        let a = key_rate(&params(v_a, t, xi), 0.0).unwrap();
        let b = key_rate(&params(v_a, t, xi + d), 0.0).unwrap();
        prop_assert!(b.k_sym_raw < a.k_sym_raw);
        prop_assert!(a.k_sym <= 0.95 * a.i_ab + 1e-12);
    }

    #[test]
    fn key_rate_rises_with_transmittance(v_a in 0.1f64..5.0, t in 0.1f64..0.9, xi in 0.0f64..0.05) {
        let a = key_rate(&params(v_a, t, xi), 0.0).unwrap();
        let b = key_rate(&params(v_a, t + 0.05, xi), 0.0).unwrap();
        prop_assert!(b.i_ab > a.i_ab);
    }

    #[test]
    fn threshold_is_a_root(v_a in 0.2f64..2.0, t in 0.3f64..1.0) {
        let p = params(v_a, t, 0.0);
        if let Ok(x) = null_key_threshold(&p) {
            prop_assert!(x > 0.0);
            prop_assert!(key_rate(&p.with_xi(x), 0.0).unwrap().k_sym_raw.abs() < 1e-6);
        }
    }

    #[test]
    fn quantizer_stays_on_grid(s in samples(), enob in 2u32..12, fs in 0.5f64..4.0) {
        let (q, rep) = quantize(&stream(s.clone()), enob as f64, fs).unwrap();
        prop_assert_eq!(rep.levels, 1u64 << enob);
        for (x, y) in s.iter().zip(&q.samples) {
            for (a, b) in [(x.re, y.re), (x.im, y.im)] {
                prop_assert!(b.abs() < fs);
                let k = (b / rep.step - 0.5).round();
                prop_assert!((b - (k + 0.5) * rep.step).abs() < 1e-9);
                if a.abs() <= fs {
                    prop_assert!((a - b).abs() <= rep.step / 2.0 + 1e-12);
                }
            }
        }
    }

    #[test]
    fn snu_scaling_is_gain_invariant(s in samples(), g in 0.1f64..10.0, n0 in 0.1f64..5.0) {
        let cal = NoiseCalibration { v_dark: 0.01 * n0, v_shot_total: 1.01 * n0, n0, block_id: 0, n_samples: 2 };
        let scaled_cal = NoiseCalibration { v_dark: g * g * cal.v_dark, v_shot_total: g * g * cal.v_shot_total, n0: g * g * n0, ..cal };
        let a = to_snu(&stream(s.clone()), &cal).unwrap();
        let b = to_snu(&stream(s.iter().map(|x| x * g).collect()), &scaled_cal).unwrap();
        prop_assert_eq!(b.units, Units::SnuSqrt);
        for (x, y) in a.samples.iter().zip(&b.samples) {
            prop_assert!((x - y).norm() < 1e-9 * (1.0 + x.norm()));
        }
        prop_assert!((quadrature_variance(&b.samples) - quadrature_variance(&s) / n0).abs() < 1e-9 * (1.0 + quadrature_variance(&s)));
    }

    #[test]
    fn iq_dump_round_trips_at_f32_precision(s in samples()) {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.iq");
        let st = stream(s.clone());
        write_iq(&p, &st).unwrap();
        let back = read_iq(&p).unwrap();
        prop_assert_eq!(back.len(), s.len());
        prop_assert_eq!(back.units, Units::Arbitrary);
        for (a, b) in s.iter().zip(&back.samples) {
            prop_assert_eq!(a.re as f32, b.re);
            prop_assert_eq!(a.im as f32, b.im);
        }
    }

    #[test]
    fn decisions_are_rotation_covariant(re in -5.0f64..5.0, im in -5.0f64..5.0) {
        prop_assume!(re.abs() > 1e-9 && im.abs() > 1e-9);
        let p = Complex64::new(re, im);
        let k = decide(p);
        prop_assert_eq!(decide(p * Complex64::i()), (k + 1) % 4);
        prop_assert!((qpsk_point(k, 1.0f64) - p / p.norm()).norm() < std::f64::consts::SQRT_2);
    }

    #[test]
    fn fourth_power_removes_quarter_turns(re in -5.0f64..5.0, im in -5.0f64..5.0, k in 0u32..4) {
        let p = Complex64::new(re, im);
        let r = p * Complex64::i().powu(k);
        prop_assert!((fourth_power(r) - fourth_power(p)).norm() <= 1e-9 * (1.0 + fourth_power(p).norm()));
    }

    #[test]
    fn ber_counts_differing_bits(a in prop::collection::vec(0u8..4, 1..200), b in prop::collection::vec(0u8..4, 1..200)) {
        let n = a.len().min(b.len());
        let r = ber(&b[..n], &a[..n]).unwrap();
        let want: u32 = a[..n]
            .iter()
            .zip(&b[..n])
            .map(|(x, y)| {
                let (x, y) = (index_to_bits(*x), index_to_bits(*y));
                u32::from(x[0] != y[0]) + u32::from(x[1] != y[1])
            })
            .sum();
        prop_assert_eq!(r.bit_errors as u32, want);
        prop_assert_eq!(r.bit_count, 2 * n as u64);
    }

    #[test]
    fn smooth_tracks_have_no_slips(steps in prop::collection::vec(-0.3f64..0.3, 0..200)) {
        let mut t = vec![0.0];
        for s in steps {
            t.push(t.last().unwrap() + s);
        }
        prop_assert_eq!(count_slips(&t), 0);
        let mut jumped = t.clone();
        jumped.push(t.last().unwrap() + std::f64::consts::FRAC_PI_2);
        prop_assert_eq!(count_slips(&jumped), 1);
    }

    #[test]
    fn frequency_shift_preserves_power_and_inverts(s in samples(), f in -9e9f64..9e9) {
        let x = stream(s);
        let y = frequency_shift(&x, f).unwrap();
        let z = frequency_shift(&y, -f).unwrap();
        prop_assert!((y.mean_power() - x.mean_power()).abs() < 1e-9 * (1.0 + x.mean_power()));
        for (a, b) in x.samples.iter().zip(&z.samples) {
            prop_assert!((a - b).norm() < 1e-9);
        }
    }

    #[test]
    fn fir_is_linear(a in samples(), g in -3.0f64..3.0) {
        let taps = rrc_taps(0.2f64, 8, 4).unwrap().taps;
        let b: Vec<Complex64> = a.iter().map(|x| x.conj() * 0.5).collect();
        let sum: Vec<Complex64> = a.iter().zip(&b).map(|(x, y)| x * g + y).collect();
        let (fa, fb, fs) = (fir_same(&a, &taps), fir_same(&b, &taps), fir_same(&sum, &taps));
        for i in 0..a.len() {
            prop_assert!((fs[i] - (fa[i] * g + fb[i])).norm() < 1e-9);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn welch_integrates_to_mean_power(seed in 0u64..1000, amp in 0.1f64..3.0) {
        use jointcv::rng::{standard_normal, sub_rng, Purpose};
        let mut rng = sub_rng(seed, 0, Purpose::Test);
        let x: Vec<Complex64> = (0..65_536)
            .map(|_| Complex64::new(standard_normal(&mut rng), standard_normal(&mut rng)) * amp)
            .collect();
        let fs = 20e9;
        let psd = welch_psd(&x, fs, 1024);
        let total: f64 = psd.iter().map(|(_, p)| p).sum::<f64>() * fs / 1024.0;
        let power = x.iter().map(|v| v.norm_sqr()).sum::<f64>() / x.len() as f64;
        prop_assert!((total / power - 1.0).abs() < 0.03, "{total} vs {power}");
    }
}
