//! Finite-blocklength normal approximation for the AWGN channel.
//!
//! The forward map gives the number of information bits `k` that fit in
//! `n` channel uses at block error probability `ε` and SNR `γ`:
//!
//! ```text
//! k ≈ n·C(γ) − √(n·V(γ))·Q⁻¹(ε) + ½·log2(n)
//! ```
//!
//! Three inverse problems are solved on top of it: minimum blocklength,
//! achieved error probability, and minimum SNR.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::{qfunc, qfunc_inv};

/// (log2 e)², the high-SNR limit of the complex-AWGN dispersion.
pub const LOG2E_SQ: f64 = std::f64::consts::LOG2_E * std::f64::consts::LOG2_E;

/// Largest SNR considered by [`min_snr`] (120 dB).
pub const MAX_SNR: f64 = 1e12;

const MAX_BLOCKLENGTH: u64 = 1 << 53;
const HALF_LOG2_SLOPE: f64 = 0.5 * std::f64::consts::LOG2_E;

/// Whether one channel use is a real or a complex Gaussian symbol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChannelUseMode {
    #[serde(alias = "real-awgn")]
    Real,
    #[default]
    #[serde(alias = "complex-awgn")]
    Complex,
}

impl ChannelUseMode {
    fn scale(self) -> f64 {
        match self {
            ChannelUseMode::Real => 0.5,
            ChannelUseMode::Complex => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FblQuery {
    /// Blocklength in channel uses.
    pub n: u64,
    /// Target block error probability.
    pub epsilon: f64,
    /// Linear SNR.
    pub gamma: f64,
    pub mode: ChannelUseMode,
}

impl FblQuery {
    pub fn new(n: u64, epsilon: f64, gamma: f64, mode: ChannelUseMode) -> Result<Self> {
        let query = FblQuery {
            n,
            epsilon,
            gamma,
            mode,
        };
        query.validate()?;
        Ok(query)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Domain("blocklength n must be at least 1".into()));
        }
        check_epsilon(self.epsilon)?;
        check_gamma(self.gamma)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FblResult {
    /// Information bits, clamped at zero.
    pub k_bits: f64,
    /// Capacity in bits per channel use.
    pub capacity_per_cu: f64,
    /// Dispersion in squared bits per channel use.
    pub dispersion: f64,
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::Domain(format!(
            "epsilon must lie in (0, 1), got {epsilon}"
        )));
    }
    Ok(())
}

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma.is_nan() || gamma.is_infinite() {
        return Err(Error::InvalidArgument(format!(
            "SNR must be finite, got {gamma}"
        )));
    }
    if gamma < 0.0 {
        return Err(Error::Domain(format!("SNR must be nonnegative, got {gamma}")));
    }
    Ok(())
}

fn check_bits(k_bits: f64) -> Result<()> {
    if !(k_bits.is_finite() && k_bits > 0.0) {
        return Err(Error::Domain(format!(
            "information bits must be positive and finite, got {k_bits}"
        )));
    }
    Ok(())
}

/// Capacity per channel use: `log2(1+γ)` (complex) or half of it (real).
pub fn capacity_per_cu(gamma: f64, mode: ChannelUseMode) -> Result<f64> {
    check_gamma(gamma)?;
    Ok(mode.scale() * gamma.ln_1p() * std::f64::consts::LOG2_E)
}

/// AWGN channel dispersion `γ(γ+2)/(γ+1)²·(log2 e)²` (complex), half for real.
pub fn dispersion(gamma: f64, mode: ChannelUseMode) -> Result<f64> {
    check_gamma(gamma)?;
    let g1 = 1.0 + gamma;
    Ok(mode.scale() * gamma * (gamma + 2.0) / (g1 * g1) * LOG2E_SQ)
}

/// Unclamped normal approximation; callers validate the arguments.
#[inline]
fn raw_bits(n: f64, capacity: f64, dispersion: f64, q_inv: f64) -> f64 {
    n * capacity - (n * dispersion).sqrt() * q_inv + 0.5 * n.log2()
}

/// Forward evaluation: maximal information bits for the query.
pub fn max_info_bits(query: &FblQuery) -> Result<FblResult> {
    query.validate()?;
    let capacity = capacity_per_cu(query.gamma, query.mode)?;
    let disp = dispersion(query.gamma, query.mode)?;
    let q_inv = qfunc_inv(query.epsilon)?;
    let k = raw_bits(query.n as f64, capacity, disp, q_inv);
    Ok(FblResult {
        k_bits: k.max(0.0),
        capacity_per_cu: capacity,
        dispersion: disp,
    })
}

/// Smallest blocklength that carries `k_bits` at error probability `epsilon`.
///
/// The approximation is not monotone in `n`: the `½·log2 n` term produces
/// a small bump at tiny `n` and the dispersion term a dip after it. The
/// returned `n` is the smallest one with `k(n) ≥ k_bits` where `k` is also
/// nondecreasing (`k(n) ≥ k(n-1)`, or `n = 1`). With that rule `k(n-1) <
/// k_bits` always holds for the result.
pub fn min_blocklength(
    k_bits: f64,
    epsilon: f64,
    gamma: f64,
    mode: ChannelUseMode,
) -> Result<u64> {
    check_bits(k_bits)?;
    check_epsilon(epsilon)?;
    check_gamma(gamma)?;
    if gamma == 0.0 {
        return Err(Error::NoSolution(
            "capacity is zero at SNR 0; no blocklength suffices".into(),
        ));
    }

    let capacity = capacity_per_cu(gamma, mode)?;
    let disp = dispersion(gamma, mode)?;
    let q_inv = qfunc_inv(epsilon)?;
    let f = |n: u64| raw_bits(n as f64, capacity, disp, q_inv);
    let qualifies = |n: u64| f(n) >= k_bits && (n == 1 || f(n) >= f(n - 1));

    // With s = √n, n·dk/dn = C·s² − (a/2)·s + b where a = √V·Q⁻¹(ε) and
    // b = log2(e)/2. Between the two real roots k(n) decreases.
    let a = disp.sqrt() * q_inv;
    let disc = 0.25 * a * a - 4.0 * capacity * HALF_LOG2_SLOPE;
    let increasing_from = if a > 0.0 && disc > 0.0 {
        let s1 = (0.5 * a - disc.sqrt()) / (2.0 * capacity);
        let s2 = (0.5 * a + disc.sqrt()) / (2.0 * capacity);
        let bump_end = (s1 * s1).floor().min(MAX_BLOCKLENGTH as f64) as u64;
        let dip_end = (s2 * s2).floor().min(MAX_BLOCKLENGTH as f64) as u64;

        // k is increasing on [1, bump_end].
        if bump_end >= 1 && f(bump_end) >= k_bits {
            return Ok(first_reaching(&f, k_bits, 1, bump_end));
        }
        for n in [bump_end + 1, dip_end + 1] {
            if qualifies(n) {
                return Ok(n);
            }
        }
        dip_end + 2
    } else {
        1
    };

    let mut lo = increasing_from;
    let mut hi = lo;
    while f(hi) < k_bits {
        lo = hi + 1;
        if hi >= MAX_BLOCKLENGTH {
            return Err(Error::NoSolution(format!(
                "{k_bits} bits unreachable below 2^53 channel uses"
            )));
        }
        hi = (hi * 2).min(MAX_BLOCKLENGTH);
    }
    Ok(first_reaching(&f, k_bits, lo, hi))
}

/// Smallest `n` in `[lo, hi]` with `f(n) ≥ target`, given `f` increasing
/// there and `f(hi) ≥ target`.
fn first_reaching(f: &impl Fn(u64) -> f64, target: f64, mut lo: u64, mut hi: u64) -> u64 {
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if f(mid) >= target {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    hi
}

/// Block error probability at which `n` channel uses carry `k_bits`.
pub fn achieved_error(n: u64, k_bits: f64, gamma: f64, mode: ChannelUseMode) -> Result<f64> {
    if n == 0 {
        return Err(Error::Domain("blocklength n must be at least 1".into()));
    }
    check_bits(k_bits)?;
    check_gamma(gamma)?;
    if gamma == 0.0 {
        return Err(Error::NoSolution(
            "capacity is zero at SNR 0; error probability undefined".into(),
        ));
    }
    let n = n as f64;
    let capacity = capacity_per_cu(gamma, mode)?;
    let disp = dispersion(gamma, mode)?;
    let margin = n * capacity + 0.5 * n.log2() - k_bits;
    if disp == 0.0 {
        return Ok(if margin >= 0.0 { 0.0 } else { 1.0 });
    }
    qfunc(margin / (n * disp).sqrt())
}

/// SNR at which `k(γ)` has its minimum for fixed `n` and `ε`.
///
/// For `ε < ½` the dispersion penalty makes `k` dip just above zero SNR
/// before it grows without bound; the minimum solves
/// `u²(u²−1) = Q⁻¹(ε)²/(s·n)` with `u = 1+γ` and `s` the real/complex
/// scale factor.
fn snr_dip(n: f64, q_inv: f64, mode: ChannelUseMode) -> f64 {
    if q_inv <= 0.0 {
        return 0.0;
    }
    let x = 4.0 * q_inv * q_inv / (mode.scale() * n);
    let u2_minus_1 = 0.5 * x / ((1.0 + x).sqrt() + 1.0);
    u2_minus_1 / ((1.0 + u2_minus_1).sqrt() + 1.0)
}

/// Smallest SNR beyond which `n` channel uses carry `k_bits` at error
/// probability `epsilon`.
///
/// `k(γ)` decreases slightly right above zero SNR (for `ε < ½`), so the
/// search runs on the increasing branch: the result `γ*` satisfies
/// `k(γ) ≥ k_bits` for every `γ ≥ γ*`. Returns 0 when even the minimum of
/// `k(γ)` already reaches `k_bits`.
pub fn min_snr(n: u64, k_bits: f64, epsilon: f64, mode: ChannelUseMode) -> Result<f64> {
    if n == 0 {
        return Err(Error::Domain("blocklength n must be at least 1".into()));
    }
    check_bits(k_bits)?;
    check_epsilon(epsilon)?;

    let nf = n as f64;
    let q_inv = qfunc_inv(epsilon)?;
    let f = |gamma: f64| {
        let capacity = mode.scale() * gamma.ln_1p() * std::f64::consts::LOG2_E;
        let g1 = 1.0 + gamma;
        let disp = mode.scale() * gamma * (gamma + 2.0) / (g1 * g1) * LOG2E_SQ;
        raw_bits(nf, capacity, disp, q_inv)
    };

    let mut lo = snr_dip(nf, q_inv, mode);
    if f(lo) >= k_bits {
        return Ok(0.0);
    }
    if f(MAX_SNR) < k_bits {
        return Err(Error::NoSolution(format!(
            "{k_bits} bits over {n} channel uses at epsilon {epsilon} need more than 120 dB SNR"
        )));
    }
    let mut hi = (2.0 * lo).clamp(1.0, MAX_SNR);
    while f(hi) < k_bits {
        lo = hi;
        hi = (hi * 4.0).min(MAX_SNR);
    }
    for _ in 0..400 {
        if hi - lo <= 1e-13 * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) >= k_bits {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}
