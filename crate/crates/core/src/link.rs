//! Goodput of a header-plus-data transmission.
//!
//! A frame carries `H` header bits over `m` channel uses followed by `D`
//! data bits over `n` channel uses, each channel use lasting `Ts` seconds.
//! With separate encoding the receiver must decode the header first, so
//! the delivery probability is `(1−p_eh)(1−p_ed)`. With joint encoding the
//! `H+D` bits form one codeword over `m+n` channel uses and fail together
//! with probability `q_ed`. In both modes only `D` counts as payload.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fbl::{self, ChannelUseMode};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameConfig {
    /// Header (metadata) bits `H`.
    pub header_bits: f64,
    /// Payload bits `D`.
    pub data_bits: f64,
    /// Channel uses spent on the header, `m`.
    pub header_cu: u64,
    /// Channel uses spent on the payload, `n`.
    pub data_cu: u64,
    /// Duration of one channel use `Ts` in seconds.
    pub symbol_duration: f64,
}

impl FrameConfig {
    pub fn new(
        header_bits: f64,
        data_bits: f64,
        header_cu: u64,
        data_cu: u64,
        symbol_duration: f64,
    ) -> Result<Self> {
        let frame = FrameConfig {
            header_bits,
            data_bits,
            header_cu,
            data_cu,
            symbol_duration,
        };
        frame.validate()?;
        Ok(frame)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.header_bits.is_finite() && self.header_bits >= 0.0) {
            return Err(Error::Domain(format!(
                "header bits must be >= 0, got {}",
                self.header_bits
            )));
        }
        if !(self.data_bits.is_finite() && self.data_bits > 0.0) {
            return Err(Error::Domain(format!(
                "data bits must be > 0, got {}",
                self.data_bits
            )));
        }
        if self.data_cu == 0 {
            return Err(Error::Domain("data channel uses must be >= 1".into()));
        }
        if !(self.symbol_duration.is_finite() && self.symbol_duration > 0.0) {
            return Err(Error::Domain(format!(
                "symbol duration must be > 0, got {}",
                self.symbol_duration
            )));
        }
        if (self.header_cu == 0) != (self.header_bits == 0.0) {
            return Err(Error::Domain(
                "header channel uses must be zero exactly when header bits are zero".into(),
            ));
        }
        Ok(())
    }

    /// Header rate `R_H = H/m` in bits per channel use (0 without a header).
    pub fn header_rate(&self) -> f64 {
        if self.header_cu == 0 {
            0.0
        } else {
            self.header_bits / self.header_cu as f64
        }
    }

    pub fn total_cu(&self) -> u64 {
        self.header_cu + self.data_cu
    }

    /// Error-free goodput `D/((m+n)·Ts)`.
    fn ideal_goodput(&self) -> f64 {
        self.data_bits / (self.total_cu() as f64 * self.symbol_duration)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Encoding {
    Separate,
    Joint,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkOutcome {
    pub encoding: Encoding,
    /// `p_eh`, separate encoding only.
    pub p_header_err: Option<f64>,
    /// `p_ed`, separate encoding only.
    pub p_data_err: Option<f64>,
    /// `q_ed`, joint encoding only.
    pub p_joint_err: Option<f64>,
    /// Probability the payload is not delivered, computed without
    /// cancellation so that tiny values stay meaningful.
    pub failure_prob: f64,
    pub success_prob: f64,
    /// Bits per second.
    pub goodput: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EncodingComparison {
    pub header_cu: u64,
    pub total_cu: u64,
    pub separate: LinkOutcome,
    pub joint: LinkOutcome,
    pub joint_wins: bool,
    /// Channel uses an unintended receiver decodes under joint vs. separate
    /// encoding, `(m+n)/m`.
    pub receiver_energy_penalty: f64,
}

fn check_prob(name: &str, p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain(format!("{name} must lie in [0, 1], got {p}")));
    }
    Ok(())
}

/// Shannon rate `W·log2(1+γ)` in bits per second.
pub fn shannon_rate(bandwidth: f64, gamma: f64) -> Result<f64> {
    if !(bandwidth.is_finite() && bandwidth > 0.0) {
        return Err(Error::Domain(format!(
            "bandwidth must be > 0, got {bandwidth}"
        )));
    }
    Ok(bandwidth * fbl::capacity_per_cu(gamma, ChannelUseMode::Complex)?)
}

/// Bits carried by `n` channel uses of `Ts` seconds at the Shannon rate.
pub fn data_volume(n: u64, symbol_duration: f64, bandwidth: f64, gamma: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::Domain("channel uses must be >= 1".into()));
    }
    if !(symbol_duration.is_finite() && symbol_duration > 0.0) {
        return Err(Error::Domain(format!(
            "symbol duration must be > 0, got {symbol_duration}"
        )));
    }
    Ok(n as f64 * symbol_duration * shannon_rate(bandwidth, gamma)?)
}

/// Goodput with given header and data error probabilities.
pub fn goodput_separate(frame: &FrameConfig, p_eh: f64, p_ed: f64) -> Result<LinkOutcome> {
    frame.validate()?;
    check_prob("p_eh", p_eh)?;
    check_prob("p_ed", p_ed)?;
    let success = (1.0 - p_eh) * (1.0 - p_ed);
    Ok(LinkOutcome {
        encoding: Encoding::Separate,
        p_header_err: Some(p_eh),
        p_data_err: Some(p_ed),
        p_joint_err: None,
        failure_prob: p_eh + p_ed - p_eh * p_ed,
        success_prob: success,
        goodput: frame.ideal_goodput() * success,
    })
}

/// Header and data error probabilities from the normal approximation.
pub fn frame_error_probs(frame: &FrameConfig, gamma: f64, mode: ChannelUseMode) -> Result<(f64, f64)> {
    frame.validate()?;
    if frame.header_cu == 0 {
        return Err(Error::Domain(
            "separate encoding needs a header (m >= 1, H > 0)".into(),
        ));
    }
    let p_eh = fbl::achieved_error(frame.header_cu, frame.header_bits, gamma, mode)?;
    let p_ed = fbl::achieved_error(frame.data_cu, frame.data_bits, gamma, mode)?;
    Ok((p_eh, p_ed))
}

/// Goodput with the header and data encoded as one codeword over `m+n`.
pub fn goodput_joint(frame: &FrameConfig, gamma: f64, mode: ChannelUseMode) -> Result<LinkOutcome> {
    frame.validate()?;
    let q = fbl::achieved_error(
        frame.total_cu(),
        frame.header_bits + frame.data_bits,
        gamma,
        mode,
    )?;
    Ok(LinkOutcome {
        encoding: Encoding::Joint,
        p_header_err: None,
        p_data_err: None,
        p_joint_err: Some(q),
        failure_prob: q,
        success_prob: 1.0 - q,
        goodput: frame.ideal_goodput() * (1.0 - q),
    })
}

/// Separate-encoding outcome at SNR `gamma`, with error probabilities from
/// the normal approximation.
pub fn separate_at_snr(frame: &FrameConfig, gamma: f64, mode: ChannelUseMode) -> Result<LinkOutcome> {
    let (p_eh, p_ed) = frame_error_probs(frame, gamma, mode)?;
    goodput_separate(frame, p_eh, p_ed)
}

/// Number of header channel uses needed for header error `target_p_eh`.
pub fn adapt_header_rate(
    gamma_est: f64,
    header_bits: f64,
    target_p_eh: f64,
    mode: ChannelUseMode,
) -> Result<u64> {
    if !(gamma_est > 0.0) {
        return Err(Error::Domain(format!(
            "estimated SNR must be > 0, got {gamma_est}"
        )));
    }
    fbl::min_blocklength(header_bits, target_p_eh, gamma_est, mode)
}

/// How the `total_cu` channel uses are split between header and data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HeaderSplit {
    /// Fixed number of header channel uses.
    Fixed(u64),
    /// Header sized by [`adapt_header_rate`] for `p_eh = data_epsilon/10`.
    Adaptive { data_epsilon: f64 },
}

impl Default for HeaderSplit {
    fn default() -> Self {
        HeaderSplit::Adaptive { data_epsilon: 1e-3 }
    }
}

/// Resolve a split to a header channel-use count `m` with `1 ≤ m < total_cu`.
pub fn resolve_split(
    header_bits: f64,
    total_cu: u64,
    gamma: f64,
    mode: ChannelUseMode,
    split: HeaderSplit,
) -> Result<u64> {
    let m = match split {
        HeaderSplit::Fixed(m) => m,
        HeaderSplit::Adaptive { data_epsilon } => {
            adapt_header_rate(gamma, header_bits, data_epsilon / 10.0, mode)?
        }
    };
    if m == 0 || m >= total_cu {
        return Err(Error::Domain(format!(
            "header split m = {m} infeasible for {total_cu} total channel uses"
        )));
    }
    Ok(m)
}

/// Separate vs. joint encoding at an identical channel-use budget.
#[allow(clippy::too_many_arguments)]
pub fn compare_encodings(
    header_bits: f64,
    data_bits: f64,
    total_cu: u64,
    symbol_duration: f64,
    gamma: f64,
    mode: ChannelUseMode,
    split: HeaderSplit,
) -> Result<EncodingComparison> {
    if total_cu < 2 {
        return Err(Error::Domain(format!(
            "total channel uses must be >= 2, got {total_cu}"
        )));
    }
    if !(header_bits > 0.0) {
        return Err(Error::Domain(
            "comparison needs a nonempty header".into(),
        ));
    }
    let m = resolve_split(header_bits, total_cu, gamma, mode, split)?;
    let frame = FrameConfig::new(header_bits, data_bits, m, total_cu - m, symbol_duration)?;
    let separate = separate_at_snr(&frame, gamma, mode)?;
    let joint = goodput_joint(&frame, gamma, mode)?;
    Ok(EncodingComparison {
        header_cu: m,
        total_cu,
        separate,
        joint,
        joint_wins: joint.success_prob > separate.success_prob,
        receiver_energy_penalty: total_cu as f64 / m as f64,
    })
}

/// The header split that maximises separate-encoding success, scanning
/// every `m` in `1..total_cu`. Ties resolve to the smallest failure
/// probability, then the smallest `m`.
pub fn best_separate_split(
    header_bits: f64,
    data_bits: f64,
    total_cu: u64,
    symbol_duration: f64,
    gamma: f64,
    mode: ChannelUseMode,
) -> Result<(u64, LinkOutcome)> {
    if total_cu < 2 {
        return Err(Error::Domain(format!(
            "total channel uses must be >= 2, got {total_cu}"
        )));
    }
    let mut best: Option<(u64, LinkOutcome)> = None;
    for m in 1..total_cu {
        let frame = FrameConfig::new(header_bits, data_bits, m, total_cu - m, symbol_duration)?;
        let outcome = separate_at_snr(&frame, gamma, mode)?;
        let better = match &best {
            None => true,
            Some((_, b)) => outcome.failure_prob < b.failure_prob,
        };
        if better {
            best = Some((m, outcome));
        }
    }
    Ok(best.expect("total_cu >= 2 gives at least one split"))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub gamma_db: f64,
    pub total_cu: u64,
    pub best_header_cu: u64,
    pub separate_failure: f64,
    pub joint_failure: f64,
    pub separate_success: f64,
    pub joint_success: f64,
    /// Joint encoding strictly beats the best separate split.
    pub joint_wins: bool,
}

/// Joint encoding vs. the best separate split over an SNR × blocklength grid.
pub fn sweep_encodings(
    header_bits: f64,
    data_bits: f64,
    gammas_db: &[f64],
    totals: &[u64],
    symbol_duration: f64,
    mode: ChannelUseMode,
) -> Result<Vec<SweepPoint>> {
    let mut points = Vec::with_capacity(gammas_db.len() * totals.len());
    for &gamma_db in gammas_db {
        let gamma = crate::db_to_linear(gamma_db);
        for &total in totals {
            let (m, sep) =
                best_separate_split(header_bits, data_bits, total, symbol_duration, gamma, mode)?;
            let frame = FrameConfig::new(header_bits, data_bits, m, total - m, symbol_duration)?;
            let joint = goodput_joint(&frame, gamma, mode)?;
            points.push(SweepPoint {
                gamma_db,
                total_cu: total,
                best_header_cu: m,
                separate_failure: sep.failure_prob,
                joint_failure: joint.failure_prob,
                separate_success: sep.success_prob,
                joint_success: joint.success_prob,
                joint_wins: joint.success_prob > sep.success_prob,
            });
        }
    }
    Ok(points)
}
