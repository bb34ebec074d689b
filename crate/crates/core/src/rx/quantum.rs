//! Quantum receiver: SNU rescaling, carrier removal transferred from the
//! classical receiver, matched filtering at the classical-derived timing,
//! residual frequency and phase correction on revealed symbols, and
//! parameter estimation.

use std::f64::consts::TAU;

use num_complex::Complex;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::classical::ClassicalRxReport;
use crate::calibration::NoiseCalibration;
use crate::error::{Error, Result};
use crate::filter::{cycle_phase, fir_at};
use crate::scalar::Scalar;
use crate::search::{golden_max, parabolic_offset};
use crate::tx::{TxPlan, HETERODYNE_SCALE};
use crate::types::IqStream;

/// Symbols disclosed by Alice for parameter estimation.
#[derive(Debug, Clone, PartialEq)]
pub struct RevealedSet {
    /// Strictly increasing symbol positions.
    pub indices: Vec<usize>,
    /// Alice's values at those positions, heterodyne-referred √SNU.
    pub alice: Vec<Complex<f64>>,
    /// Bob's values at those positions (refreshed by [`RevealedSet::observe`]).
    pub bob: Vec<Complex<f64>>,
    pub fraction: f64,
}

impl RevealedSet {
    /// Uniformly random subset of `round(fraction·n)` positions.
    pub fn choose<R: Rng + ?Sized>(n_symbols: usize, fraction: f64, rng: &mut R) -> Result<Vec<usize>> {
        if !(fraction > 0.0 && fraction <= 1.0) {
            return Err(Error::InvalidInput(format!(
                "revealed fraction {fraction} outside (0,1]"
            )));
        }
        let k = ((fraction * n_symbols as f64).round() as usize).clamp(1, n_symbols.max(1));
        if n_symbols == 0 {
            return Err(Error::InvalidInput("no symbols to reveal".into()));
        }
        let mut idx = rand::seq::index::sample(rng, n_symbols, k).into_vec();
        idx.sort_unstable();
        Ok(idx)
    }

    /// `alpha` are Alice's coherent-state amplitudes for the whole block.
    pub fn new<T: Scalar>(
        indices: Vec<usize>,
        alpha: &[Complex<T>],
        bob: &[Complex<f64>],
        fraction: f64,
    ) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::InvalidInput("empty revealed set".into()));
        }
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidInput("revealed indices must increase strictly".into()));
        }
        let last = *indices.last().unwrap();
        if last >= alpha.len() || last >= bob.len() {
            return Err(Error::Mismatch("revealed index beyond the block".into()));
        }
        let alice = indices
            .iter()
            .map(|&i| Complex::new(alpha[i].re.as_f64(), alpha[i].im.as_f64()) * HETERODYNE_SCALE)
            .collect();
        let bob = indices.iter().map(|&i| bob[i]).collect();
        Ok(RevealedSet {
            indices,
            alice,
            bob,
            fraction,
        })
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn observe(&mut self, symbols: &[Complex<f64>]) {
        self.bob = self.indices.iter().map(|&i| symbols[i]).collect();
    }
}

/// Quantum symbols at one sample per symbol, √SNU.
#[derive(Debug, Clone)]
pub struct QuantumSymbols {
    pub symbols: Vec<Complex<f64>>,
    /// Capture index of symbol 0.
    pub origin: usize,
}

/// Matched-filter outputs of the quantum band at `origin + m·sps`, after
/// removing the quantum carrier and, when given, the carrier phase measured
/// on the classical channel.
pub fn quantum_band_symbols<T: Scalar>(
    y: &IqStream<T>,
    plan: &TxPlan,
    origin: usize,
    n_symbols: usize,
    carrier: Option<&ClassicalRxReport>,
) -> Result<Vec<Complex<f64>>> {
    y.ensure_nonempty()?;
    let fs = y.sample_rate_hz.as_f64();
    if (fs - plan.sample_rate_hz).abs() > 1e-6 * fs {
        return Err(Error::Mismatch("capture rate differs from the plan".into()));
    }
    let shape = plan.quantum_shape::<f64>()?;
    let sps = shape.sps;
    let h = shape.delay();
    let lo = origin.saturating_sub(h);
    let hi = (origin + n_symbols.saturating_sub(1) * sps + h + 1).min(y.len());
    if lo >= hi {
        return Err(Error::InvalidInput("symbol grid outside the capture".into()));
    }
    let ratio = -plan.quantum.channel.shift_hz / fs;
    let seg: Vec<Complex<f64>> = (lo..hi)
        .map(|n| {
            let s = y.samples[n];
            let mut ph = cycle_phase(ratio, n);
            if let Some(r) = carrier {
                ph -= r.carrier_phase_at(n);
            }
            Complex::new(s.re.as_f64(), s.im.as_f64()) * Complex::from_polar(1.0, ph)
        })
        .collect();
    let centres: Vec<usize> = (0..n_symbols).map(|m| origin + m * sps - lo).collect();
    if centres.last().is_some_and(|&c| c >= seg.len()) {
        return Err(Error::InvalidInput(format!(
            "capture too short for {n_symbols} quantum symbols"
        )));
    }
    Ok(fir_at(&seg, &shape.taps, &centres))
}

/// SNU conversion, classical-assisted carrier removal, matched filter and
/// downsampling at the classical frame origin.
pub fn quantum_front_end<T: Scalar>(
    y: &IqStream<T>,
    cal: &NoiseCalibration,
    classical: Option<&ClassicalRxReport>,
    plan: &TxPlan,
    n_symbols: usize,
) -> Result<QuantumSymbols> {
    let report = classical.ok_or(Error::MissingClassicalReport)?;
    let snu = crate::calibration::to_snu(y, cal)?;
    let origin = report.timing.origin;
    let symbols = quantum_band_symbols(&snu, plan, origin, n_symbols, Some(report))?;
    Ok(QuantumSymbols { symbols, origin })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FoSearch {
    /// Grid covers `[-span_hz, span_hz]`.
    pub span_hz: f64,
    pub step_hz: f64,
    pub tol_hz: f64,
}

impl Default for FoSearch {
    fn default() -> Self {
        FoSearch {
            span_hz: 5_000.0,
            step_hz: 50.0,
            tol_hz: 0.01,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FoCorrection {
    pub f_res_hz: f64,
    pub symbols: Vec<Complex<f64>>,
}

fn covariance_at(products: &[(f64, Complex<f64>)], f_over_baud: f64) -> f64 {
    products
        .iter()
        .map(|(m, p)| p * Complex::from_polar(1.0, -TAU * (f_over_baud * m).fract()))
        .sum::<Complex<f64>>()
        .norm()
}

/// Derotation frequency minimizing the excess noise on the revealed pairs.
/// With the optimal phase per candidate this is the maximizer of
/// `|Σ conj(a)·b·exp(−j2πΔf·m/baud)|`.
pub fn residual_fo_correct(
    symbols: &[Complex<f64>],
    revealed: &RevealedSet,
    baud_hz: f64,
    search: &FoSearch,
) -> Result<FoCorrection> {
    if revealed.is_empty() {
        return Err(Error::InvalidInput("empty revealed set".into()));
    }
    if !(search.step_hz > 0.0 && search.span_hz >= search.step_hz) {
        return Err(Error::InvalidInput("bad frequency search grid".into()));
    }
    let products: Vec<(f64, Complex<f64>)> = revealed
        .indices
        .iter()
        .zip(&revealed.alice)
        .map(|(&m, a)| (m as f64, a.conj() * symbols[m]))
        .collect();
    let half = (search.span_hz / search.step_hz).round() as i64;
    let grid: Vec<f64> = (-half..=half).map(|i| i as f64 * search.step_hz).collect();
    let score: Vec<f64> = grid.iter().map(|f| covariance_at(&products, f / baud_hz)).collect();
    let best = score
        .iter()
        .enumerate()
        .fold((0, f64::MIN), |acc, (i, &s)| if s > acc.1 { (i, s) } else { acc })
        .0;
    if best == 0 || best == grid.len() - 1 {
        return Err(Error::SearchBoundary(grid[best]));
    }
    let f0 = grid[best] + search.step_hz * parabolic_offset(score[best - 1], score[best], score[best + 1]);
    let f_res = golden_max(
        |f| covariance_at(&products, f / baud_hz),
        (f0 - search.step_hz).max(grid[best - 1]),
        (f0 + search.step_hz).min(grid[best + 1]),
        search.tol_hz,
    );
    let ratio = f_res / baud_hz;
    let corrected = symbols
        .iter()
        .enumerate()
        .map(|(m, s)| s * Complex::from_polar(1.0, -TAU * (ratio * m as f64).fract()))
        .collect();
    Ok(FoCorrection {
        f_res_hz: f_res,
        symbols: corrected,
    })
}

/// Global rotation maximizing the Alice/Bob covariance:
/// `θ = arg Σ conj(a)·b`.
pub fn phase_align(symbols: &[Complex<f64>], revealed: &RevealedSet) -> Result<(f64, Vec<Complex<f64>>)> {
    if revealed.is_empty() {
        return Err(Error::InvalidInput("empty revealed set".into()));
    }
    let c: Complex<f64> = revealed
        .indices
        .iter()
        .zip(&revealed.alice)
        .map(|(&m, a)| a.conj() * symbols[m])
        .sum();
    let ea: f64 = revealed.alice.iter().map(|a| a.norm_sqr()).sum();
    let eb: f64 = revealed.indices.iter().map(|&m| symbols[m].norm_sqr()).sum();
    if !(c.norm() > 1e-12 * (ea * eb).sqrt()) {
        return Err(Error::NoCovariance);
    }
    let theta = c.arg();
    let r = Complex::from_polar(1.0, -theta);
    Ok((theta, symbols.iter().map(|s| s * r).collect()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationReport {
    /// Amplitude transmittance estimate `√(eta·T)`.
    pub t_hat: f64,
    /// Excess noise at Bob, SNU; may be negative from finite statistics.
    pub xi_hat_b: f64,
    pub ci3_t: f64,
    pub ci3_xi: f64,
    pub n_revealed: usize,
    /// Residual variance of the pooled regression, SNU.
    pub residual_variance: f64,
    /// Excess noise estimated on each quadrature separately.
    pub xi_per_quadrature: [f64; 2],
    pub block_id: u64,
}

/// Pooled real regression `x_B = t·x_A + z` over both quadratures.
pub fn estimate_parameters(
    symbols: &[Complex<f64>],
    revealed: &RevealedSet,
    v_el_snu: f64,
    trusted_receiver: bool,
    block_id: u64,
) -> Result<EstimationReport> {
    let n_rev = revealed.len();
    if n_rev < 100 {
        return Err(Error::TooFewRevealed(n_rev));
    }
    let pairs: Vec<(Complex<f64>, Complex<f64>)> = revealed
        .indices
        .iter()
        .zip(&revealed.alice)
        .map(|(&m, a)| (*a, symbols[m]))
        .collect();
    let sxx: f64 = pairs.iter().map(|(a, _)| a.re * a.re + a.im * a.im).sum();
    let sxy: f64 = pairs.iter().map(|(a, b)| a.re * b.re + a.im * b.im).sum();
    if !(sxx > 0.0) {
        return Err(Error::NoCovariance);
    }
    let t = sxy / sxx;
    let n = (2 * n_rev) as f64;
    let rss: f64 = pairs
        .iter()
        .map(|(a, b)| (b.re - t * a.re).powi(2) + (b.im - t * a.im).powi(2))
        .sum();
    let s2 = rss / (n - 1.0);
    let floor = 1.0 + if trusted_receiver { v_el_snu } else { 0.0 };
    let quad = |f: fn(&Complex<f64>) -> f64| -> f64 {
        let sxx: f64 = pairs.iter().map(|(a, _)| f(a).powi(2)).sum();
        let sxy: f64 = pairs.iter().map(|(a, b)| f(a) * f(b)).sum();
        let tq = sxy / sxx;
        let r: f64 = pairs.iter().map(|(a, b)| (f(b) - tq * f(a)).powi(2)).sum();
        r / (n_rev as f64 - 1.0) - floor
    };
    Ok(EstimationReport {
        t_hat: t,
        xi_hat_b: s2 - floor,
        ci3_t: 3.0 * (s2 / sxx).sqrt(),
        ci3_xi: 3.0 * s2 * (2.0 / (n - 1.0)).sqrt(),
        n_revealed: n_rev,
        residual_variance: s2,
        xi_per_quadrature: [quad(|c| c.re), quad(|c| c.im)],
        block_id,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuantumRxConfig {
    pub revealed_fraction: f64,
    pub fo_search: FoSearch,
    pub trusted_receiver: bool,
}

impl Default for QuantumRxConfig {
    fn default() -> Self {
        QuantumRxConfig {
            revealed_fraction: 0.5,
            fo_search: FoSearch::default(),
            trusted_receiver: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantumRxReport {
    pub f_res_hz: f64,
    pub theta: f64,
    /// Excess noise after phase alignment alone, without the residual
    /// frequency correction.
    pub xi_uncorrected: f64,
    pub estimate: EstimationReport,
}

/// Residual frequency correction, phase alignment and estimation on
/// front-end output.
pub fn quantum_post_process(
    symbols: &[Complex<f64>],
    revealed: &mut RevealedSet,
    baud_hz: f64,
    v_el_snu: f64,
    cfg: &QuantumRxConfig,
    block_id: u64,
) -> Result<QuantumRxReport> {
    let (_, aligned) = phase_align(symbols, revealed)?;
    let uncorrected = estimate_parameters(&aligned, revealed, v_el_snu, cfg.trusted_receiver, block_id)?;
    let fo = residual_fo_correct(symbols, revealed, baud_hz, &cfg.fo_search)?;
    let (theta, corrected) = phase_align(&fo.symbols, revealed)?;
    revealed.observe(&corrected);
    let estimate = estimate_parameters(&corrected, revealed, v_el_snu, cfg.trusted_receiver, block_id)?;
    Ok(QuantumRxReport {
        f_res_hz: fo.f_res_hz,
        theta,
        xi_uncorrected: uncorrected.xi_hat_b,
        estimate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qpsk::qpsk_point;
    use crate::rng::{standard_normal, sub_rng, Purpose};

    struct Block {
        alpha: Vec<Complex<f64>>,
        bob: Vec<Complex<f64>>,
    }

    /// Bob = t·√2α·e^{j(θ + 2πf m/baud)} + Gaussian noise of variance
    /// `noise` per quadrature.
    fn block(n: usize, t: f64, theta: f64, f_over_baud: f64, noise: f64, seed: u64) -> Block {
        let mut rng = sub_rng(seed, 0, Purpose::Test);
        let amp = (0.49f64 / 2.0).sqrt();
        let alpha: Vec<Complex<f64>> = (0..n).map(|_| qpsk_point(rng.random_range(0..4u8), amp)).collect();
        let sd = noise.sqrt();
        let bob = alpha
            .iter()
            .enumerate()
            .map(|(m, a)| {
                a * HETERODYNE_SCALE * t * Complex::from_polar(1.0, theta + TAU * f_over_baud * m as f64)
                    + Complex::new(sd * standard_normal(&mut rng), sd * standard_normal(&mut rng))
            })
            .collect();
        Block { alpha, bob }
    }

    fn revealed(b: &Block, fraction: f64, seed: u64) -> RevealedSet {
        let idx = RevealedSet::choose(b.alpha.len(), fraction, &mut sub_rng(seed, 1, Purpose::Test)).unwrap();
        RevealedSet::new(idx, &b.alpha, &b.bob, fraction).unwrap()
    }

    #[test]
    fn phase_align_closed_form_and_grid_oracle() {
        let b = block(5000, 0.7, 0.7, 0.0, 0.0, 1);
        let r = revealed(&b, 0.5, 1);
        let (theta, _) = phase_align(&b.bob, &r).unwrap();
        assert!((theta - 0.7).abs() < 1e-3);

        let nb = block(20_000, 0.7, -1.1, 0.0, 1.0, 2);
        let r = revealed(&nb, 0.5, 2);
        let (theta, _) = phase_align(&nb.bob, &r).unwrap();
        let mut best = (0.0, f64::MIN);
        for i in 0..10_000 {
            let phi = -std::f64::consts::PI + TAU * i as f64 / 10_000.0;
            let cov: f64 = r
                .indices
                .iter()
                .zip(&r.alice)
                .map(|(&m, a)| (a.conj() * nb.bob[m] * Complex::from_polar(1.0, -phi)).re)
                .sum();
            if cov > best.1 {
                best = (phi, cov);
            }
        }
        assert!((best.0 - theta).abs() < TAU / 10_000.0);
    }

    #[test]
    fn phase_estimate_unbiased_under_shot_noise() {
        let trials = 40;
        let mut bias = 0.0;
        for s in 0..trials {
            let b = block(20_000, 0.708, 0.4, 0.0, 1.05, 100 + s);
            let r = revealed(&b, 0.5, 100 + s);
            bias += phase_align(&b.bob, &r).unwrap().0 - 0.4;
        }
        assert!((bias / trials as f64).abs() < 1e-3 * 3.0);
    }

    #[test]
    fn no_signal_has_no_covariance() {
        let b = block(1000, 0.0, 0.0, 0.0, 0.0, 3);
        let r = revealed(&b, 0.5, 3);
        assert!(matches!(phase_align(&b.bob, &r), Err(Error::NoCovariance)));
    }

    #[test]
    fn residual_offset_recovered() {
        let baud = 250e6;
        let b = block(125_000, 0.708, 0.3, 455.0 / baud, 1.06, 4);
        let r = revealed(&b, 0.5, 4);
        let fo = residual_fo_correct(&b.bob, &r, baud, &FoSearch::default()).unwrap();
        assert!((fo.f_res_hz - 455.0).abs() < 20.0, "{}", fo.f_res_hz);

        let z = block(125_000, 0.708, 0.3, 0.0, 1.06, 5);
        let r = revealed(&z, 0.5, 5);
        let fo = residual_fo_correct(&z.bob, &r, baud, &FoSearch::default()).unwrap();
        assert!(fo.f_res_hz.abs() < 50.0, "{}", fo.f_res_hz);

        let far = block(20_000, 0.708, 0.3, 0.5 * 2e4 / baud, 0.1, 6);
        let r = revealed(&far, 0.5, 6);
        let narrow = FoSearch {
            span_hz: 2e4 / 4.0,
            ..FoSearch::default()
        };
        assert!(matches!(
            residual_fo_correct(&far.bob, &r, baud, &narrow),
            Err(Error::SearchBoundary(_))
        ));
    }

    #[test]
    fn corrected_block_is_a_local_minimum() {
        let baud = 250e6;
        let b = block(60_000, 0.708, 0.3, 455.0 / baud, 1.06, 7);
        let mut r = revealed(&b, 0.5, 7);
        let rep = quantum_post_process(&b.bob, &mut r, baud, 0.05, &QuantumRxConfig::default(), 0).unwrap();
        let fo = residual_fo_correct(&b.bob, &r, baud, &FoSearch::default()).unwrap();
        let (_, base) = phase_align(&fo.symbols, &r).unwrap();
        let xi = |s: &[Complex<f64>]| estimate_parameters(s, &r, 0.05, true, 0).unwrap().xi_hat_b;
        let x0 = xi(&base);
        assert!((x0 - rep.estimate.xi_hat_b).abs() < 1e-12);
        for d in [-0.02, 0.02] {
            let rot: Vec<_> = base.iter().map(|s| s * Complex::from_polar(1.0, d)).collect();
            assert!(xi(&rot) > x0);
        }
        for df in [-5.0, 5.0] {
            let rot: Vec<_> = base
                .iter()
                .enumerate()
                .map(|(m, s)| s * Complex::from_polar(1.0, TAU * df / baud * m as f64))
                .collect();
            let (_, rot) = phase_align(&rot, &r).unwrap();
            assert!(xi(&rot) > x0);
        }
    }

    #[test]
    fn estimator_recovers_truth() {
        // t = √T with T = 0.501, ξ = 0.009, trusted v_el = 0.05
        let t = 0.501f64.sqrt();
        let b = block(200_000, t, 0.0, 0.0, 1.0 + 0.05 + 0.009, 8);
        let r = revealed(&b, 0.5, 8);
        let e = estimate_parameters(&b.bob, &r, 0.05, true, 3).unwrap();
        assert!((e.t_hat - t).abs() < e.ci3_t);
        assert!((e.xi_hat_b - 0.009).abs() < e.ci3_xi);
        assert_eq!(e.block_id, 3);
        let u = estimate_parameters(&b.bob, &r, 0.05, false, 3).unwrap();
        assert!((u.xi_hat_b - e.xi_hat_b - 0.05).abs() < 1e-12);
        assert!(estimate_parameters(&b.bob, &revealed(&b, 0.0004, 9), 0.05, true, 0).is_err());
    }

    #[test]
    fn ci_shrinks_as_inverse_sqrt_n() {
        let b = block(160_000, 0.7, 0.0, 0.0, 1.0, 10);
        let small = estimate_parameters(&b.bob, &revealed(&b, 0.1, 10), 0.0, true, 0).unwrap();
        let large = estimate_parameters(&b.bob, &revealed(&b, 0.4, 10), 0.0, true, 0).unwrap();
        let ratio = small.ci3_xi / large.ci3_xi;
        assert!((ratio - 2.0).abs() < 0.1, "{ratio}");
        let ratio = small.ci3_t / large.ci3_t;
        assert!((ratio - 2.0).abs() < 0.1, "{ratio}");
    }

    #[test]
    fn ci_covers_truth_at_nominal_rate() {
        let mut covered = 0;
        let trials = 120;
        for s in 0..trials {
            let b = block(4000, 0.708, 0.0, 0.0, 1.0 + 0.009, 1000 + s);
            let r = revealed(&b, 0.5, 1000 + s);
            let e = estimate_parameters(&b.bob, &r, 0.0, true, 0).unwrap();
            if (e.xi_hat_b - 0.009).abs() <= e.ci3_xi {
                covered += 1;
            }
        }
        assert!(covered as f64 >= 0.99 * trials as f64, "{covered}/{trials}");
    }

    #[test]
    fn bias_within_three_sigma_as_n_grows() {
        let mut prev_sigma = f64::INFINITY;
        for (i, n) in [1_000usize, 10_000, 100_000].into_iter().enumerate() {
            let reps = (200_000 / n).max(4);
            let mut acc = 0.0;
            let mut ci = 0.0;
            for s in 0..reps {
                let b = block(2 * n, 0.708, 0.0, 0.0, 1.009, 5000 + 1000 * i as u64 + s as u64);
                let r = revealed(&b, 0.5, s as u64);
                let e = estimate_parameters(&b.bob, &r, 0.0, true, 0).unwrap();
                acc += e.xi_hat_b;
                ci += e.ci3_xi;
            }
            let bias = (acc / reps as f64 - 0.009).abs();
            let sigma = ci / reps as f64 / 3.0;
            assert!(bias < 3.0 * sigma, "n={n} bias {bias}");
            assert!(sigma < prev_sigma);
            prev_sigma = sigma;
        }
    }
}
