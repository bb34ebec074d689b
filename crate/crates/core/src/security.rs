//! Asymptotic key rate for Gaussian-modulated-equivalent heterodyne
//! detection with reverse reconciliation, and QPSK AWGN bit error rate.
//!
//! The Gaussian-equivalent bound is an approximation for QPSK modulation;
//! it is not the discrete-modulation security proof.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance below one at which a symplectic eigenvalue is treated as
/// numerical noise rather than an unphysical state.
const EIGEN_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SecurityParams {
    pub v_a: f64,
    /// Channel transmittance.
    pub t: f64,
    /// Excess noise at Bob, SNU.
    pub xi_b: f64,
    pub eta: f64,
    pub v_el: f64,
    pub beta: f64,
    pub baud_hz: f64,
}

impl SecurityParams {
    /// 15 km operating point with 0.009 SNU excess noise.
    pub fn reference() -> Self {
        SecurityParams {
            v_a: 0.49,
            t: 0.501,
            xi_b: 0.009,
            eta: 1.0,
            v_el: 0.05,
            beta: 0.95,
            baud_hz: 250e6,
        }
    }

    pub fn with_xi(&self, xi_b: f64) -> Self {
        SecurityParams { xi_b, ..*self }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::NonPhysical(m.to_string()));
        if !(self.v_a > 0.0) {
            return bad("V_A must be positive");
        }
        if !(self.t > 0.0 && self.t <= 1.0) {
            return bad("T must lie in (0, 1]");
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return bad("eta must lie in (0, 1]");
        }
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return bad("beta must lie in (0, 1]");
        }
        if !(self.xi_b >= 0.0) || !(self.v_el >= 0.0) {
            return bad("noise variances must be non-negative");
        }
        if !(self.baud_hz > 0.0) {
            return bad("baud must be positive");
        }
        Ok(())
    }

    fn chi_line(&self) -> f64 {
        (1.0 - self.t) / self.t + self.xi_b / self.t
    }

    fn chi_het(&self) -> f64 {
        (2.0 - self.eta + 2.0 * self.v_el) / self.eta
    }
}

/// Von Neumann entropy of a thermal mode with symplectic eigenvalue `x`.
pub fn g_entropy(x: f64) -> f64 {
    if x <= 1.0 {
        return 0.0;
    }
    let a = (x + 1.0) / 2.0;
    let b = (x - 1.0) / 2.0;
    a * a.log2() - b * b.log2()
}

pub fn mutual_information(p: &SecurityParams) -> Result<f64> {
    p.validate()?;
    let v = p.v_a + 1.0;
    let chi_tot = p.chi_line() + p.chi_het() / p.t;
    Ok(((v + chi_tot) / (1.0 + chi_tot)).log2())
}

fn check_eigen(l: f64) -> Result<f64> {
    if !(l >= 1.0 - EIGEN_TOL) {
        return Err(Error::NonPhysical(format!("symplectic eigenvalue {l} < 1")));
    }
    Ok(l.max(1.0))
}

fn pair(a: f64, b: f64) -> Result<(f64, f64)> {
    let disc = a * a - 4.0 * b;
    // rounding-level discriminant: the two eigenvalues coincide
    let disc = if disc.abs() <= 1e-13 * a * a { 0.0 } else { disc };
    if disc < 0.0 {
        return Err(Error::NonPhysical("complex symplectic eigenvalues".into()));
    }
    // smaller root from the product b to avoid cancellation
    let big = (a + disc.sqrt()) / 2.0;
    if !(big > 0.0) {
        return Err(Error::NonPhysical("non-positive symplectic eigenvalue".into()));
    }
    Ok((big.sqrt(), (b / big).sqrt()))
}

/// Symplectic eigenvalues `[λ1, λ2, λ3, λ4]` of Eve's state and of the state
/// conditioned on Bob's heterodyne outcome.
pub fn symplectic_eigenvalues(p: &SecurityParams) -> Result<[f64; 4]> {
    p.validate()?;
    let v = p.v_a + 1.0;
    let t = p.t;
    let cl = p.chi_line();
    let ch = p.chi_het();
    let chi_tot = cl + ch / t;
    let a = v * v * (1.0 - 2.0 * t) + 2.0 * t + t * t * (v + cl).powi(2);
    let b = t * t * (v * cl + 1.0).powi(2);
    let (l1, l2) = pair(a, b)?;
    let sb = b.sqrt();
    let den = (t * (v + chi_tot)).powi(2);
    let c = (a * ch * ch + b + 1.0 + 2.0 * ch * (v * sb + t * (v + cl)) + 2.0 * t * (v * v - 1.0)) / den;
    let d = ((v + sb * ch) / (t * (v + chi_tot))).powi(2);
    let (l3, l4) = pair(c, d)?;
    Ok([check_eigen(l1)?, check_eigen(l2)?, check_eigen(l3)?, check_eigen(l4)?])
}

/// Holevo information between Eve and Bob's data, bits per symbol.
pub fn holevo_bound(p: &SecurityParams) -> Result<f64> {
    let [l1, l2, l3, l4] = symplectic_eigenvalues(p)?;
    Ok(g_entropy(l1) + g_entropy(l2) - g_entropy(l3) - g_entropy(l4))
}

fn k_raw(p: &SecurityParams) -> Result<f64> {
    Ok(p.beta * mutual_information(p)? - holevo_bound(p)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SecurityReport {
    pub i_ab: f64,
    pub chi_be: f64,
    /// `beta·I_AB − χ_BE`, signed.
    pub k_sym_raw: f64,
    /// Floored at zero.
    pub k_sym: f64,
    pub k_bps: f64,
    /// `k_bps` after discarding the revealed fraction.
    pub k_bps_net: f64,
    /// `None` when no key is possible even without excess noise.
    pub xi_null: Option<f64>,
}

pub fn key_rate(p: &SecurityParams, revealed_fraction: f64) -> Result<SecurityReport> {
    let i_ab = mutual_information(p)?;
    let chi_be = holevo_bound(p)?;
    let raw = p.beta * i_ab - chi_be;
    let k_sym = raw.max(0.0);
    let xi_null = match null_key_threshold(p) {
        Ok(x) => Some(x),
        Err(Error::NoSignChange { .. }) => None,
        Err(e) => return Err(e),
    };
    Ok(SecurityReport {
        i_ab,
        chi_be,
        k_sym_raw: raw,
        k_sym,
        k_bps: k_sym * p.baud_hz,
        k_bps_net: k_sym * p.baud_hz * (1.0 - revealed_fraction.clamp(0.0, 1.0)),
        xi_null,
    })
}

/// Excess noise (SNU at Bob) at which the key rate vanishes, by bisection on
/// `[0, 1]`. `p.xi_b` is ignored.
pub fn null_key_threshold(p: &SecurityParams) -> Result<f64> {
    let (mut lo, mut hi) = (0.0, 1.0);
    let k_lo = k_raw(&p.with_xi(lo))?;
    let k_hi = k_raw(&p.with_xi(hi))?;
    if !(k_lo > 0.0 && k_hi < 0.0) {
        return Err(Error::NoSignChange { lo: k_lo, hi: k_hi });
    }
    while hi - lo > 1e-13 {
        let mid = 0.5 * (lo + hi);
        if k_raw(&p.with_xi(mid))? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Bit error rate of Gray-coded QPSK in AWGN at `Es/N0 = snr` (linear).
pub fn qpsk_ber_theory(snr_per_symbol: f64) -> Result<f64> {
    if !(snr_per_symbol >= 0.0) {
        return Err(Error::InvalidInput("SNR must be non-negative".into()));
    }
    Ok(0.5 * libm::erfc((snr_per_symbol / 2.0).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;

    // Independent 50-digit evaluation of the same closed forms.
    const I_AB: f64 = 0.158855500098299;
    const CHI_BE: f64 = 0.0840336691020767;
    const K_SYM: f64 = 0.0668790559913076;
    const XI_NULL: f64 = 0.0282293728306976;
    const LAMBDA: [f64; 4] = [1.24549000434499, 1.00998000434499, 1.22000112930866, 1.00042873783535];
    const IDEAL_I_AB: f64 = 0.316145742293356;

    fn ideal() -> SecurityParams {
        SecurityParams {
            v_a: 0.49,
            t: 1.0,
            xi_b: 0.0,
            eta: 1.0,
            v_el: 0.0,
            beta: 1.0,
            baud_hz: 250e6,
        }
    }

    #[test]
    fn golden_values() {
        let p = SecurityParams::reference();
        assert!((mutual_information(&p).unwrap() - I_AB).abs() < 1e-12);
        assert!((holevo_bound(&p).unwrap() - CHI_BE).abs() < 1e-12);
        let l = symplectic_eigenvalues(&p).unwrap();
        for (a, b) in l.iter().zip(LAMBDA) {
            assert!((a - b).abs() < 1e-11, "{a} vs {b}");
        }
        let r = key_rate(&p, 0.5).unwrap();
        assert!((r.k_sym - K_SYM).abs() < 1e-12);
        assert!((r.k_bps - K_SYM * 250e6).abs() < 1e-3);
        assert!((r.k_bps_net - r.k_bps / 2.0).abs() < 1e-6);
        assert!((r.xi_null.unwrap() - XI_NULL).abs() < 1e-10);
    }

    #[test]
    fn ideal_point() {
        let p = ideal();
        let i = mutual_information(&p).unwrap();
        assert!((i - IDEAL_I_AB).abs() < 1e-12);
        assert!((i - (2.49f64 / 2.0).log2()).abs() < 1e-12);
        assert!(holevo_bound(&p).unwrap().abs() < 1e-9);
        let r = key_rate(&p, 0.0).unwrap();
        assert!((r.k_sym - i).abs() < 1e-9);
    }

    #[test]
    fn entropy_function() {
        assert_eq!(g_entropy(1.0), 0.0);
        let mut prev = 0.0;
        for k in 1..200 {
            let g = g_entropy(1.0 + k as f64 * 0.05);
            assert!(g > prev);
            prev = g;
        }
    }

    #[test]
    fn monotonicity() {
        let p = SecurityParams::reference();
        let mut prev_i = f64::INFINITY;
        let mut prev_k = f64::INFINITY;
        for k in 0..=40 {
            let q = p.with_xi(k as f64 * 0.001);
            let i = mutual_information(&q).unwrap();
            let ks = k_raw(&q).unwrap();
            assert!(i < prev_i && ks < prev_k);
            prev_i = i;
            prev_k = ks;
        }
        let mut prev = 0.0;
        for k in 1..=20 {
            let q = SecurityParams {
                t: k as f64 * 0.05,
                ..p
            };
            let i = mutual_information(&q).unwrap();
            assert!(i > prev);
            prev = i;
        }
    }

    #[test]
    fn threshold_properties() {
        let p = SecurityParams::reference();
        assert!(k_raw(&p.with_xi(0.0)).unwrap() > 0.0);
        assert!(k_raw(&p.with_xi(1.0)).unwrap() < 0.0);
        let x = null_key_threshold(&p).unwrap();
        assert!(x > 0.009);
        assert!(k_raw(&p.with_xi(x)).unwrap().abs() < 1e-6);
        let mut prev = f64::INFINITY;
        let n = 200;
        for k in 0..=n {
            let xi = (x + 0.1) * k as f64 / n as f64;
            let v = k_raw(&p.with_xi(xi)).unwrap();
            assert!(v < prev);
            prev = v;
        }
    }

    #[test]
    fn vanishing_transmittance_gives_no_key() {
        let p = SecurityParams {
            t: 1e-6,
            ..SecurityParams::reference()
        };
        let r = key_rate(&p, 0.0).unwrap();
        assert!(r.k_sym_raw <= 0.0);
        assert_eq!(r.k_sym, 0.0);
        assert!(r.xi_null.is_none_or(|x| x < 1e-6));
    }

    #[test]
    fn rejects_nonphysical() {
        let p = SecurityParams::reference();
        assert!(mutual_information(&SecurityParams { v_el: -0.1, ..p }).is_err());
        assert!(mutual_information(&SecurityParams { t: 1.2, ..p }).is_err());
        assert!(holevo_bound(&p.with_xi(-0.01)).is_err());
    }

    #[test]
    fn eigenvalues_physical_on_grid() {
        for &t in &[0.05, 0.2, 0.5, 0.8, 1.0] {
            for &xi in &[0.0, 0.005, 0.02, 0.1] {
                for &va in &[0.1, 0.49, 2.0, 10.0] {
                    let p = SecurityParams {
                        v_a: va,
                        t,
                        ..SecurityParams::reference().with_xi(xi)
                    };
                    for l in symplectic_eigenvalues(&p).unwrap() {
                        assert!(l >= 1.0 - 1e-9);
                    }
                }
            }
        }
    }

    #[test]
    fn ber_theory() {
        assert_eq!(qpsk_ber_theory(0.0).unwrap(), 0.5);
        // 0.5·erfc(√5) to 15 digits
        let want = 7.82701129001274e-4;
        assert!((qpsk_ber_theory(10.0).unwrap() - want).abs() < 1e-15);
        assert!(qpsk_ber_theory(-1.0).is_err());
    }
}
