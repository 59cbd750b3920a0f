//! Latency budgeting: channel uses → bandwidth → spatial streams.
//!
//! A time-frequency window of `T` seconds and `W` Hz offers `2WT` degrees of
//! freedom. When the bandwidth needed to fit `N` channel uses into `T`
//! exceeds the available `W_max`, the shortfall is covered with parallel
//! spatial streams, each assumed to be an identical Gaussian channel.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fbl::{self, ChannelUseMode};

/// Relative slack for rounding in `2WT`: products this close to an integer
/// count as that integer, and `2·W·T·L ≥ N` is checked up to it.
pub const DOF_RTOL: f64 = 1e-12;

fn check_positive(name: &str, x: f64) -> Result<()> {
    if !(x.is_finite() && x > 0.0) {
        return Err(Error::Domain(format!("{name} must be > 0, got {x}")));
    }
    Ok(())
}

/// Degrees of freedom `2WT` of a time-frequency window.
///
/// A product within [`DOF_RTOL`] of an integer is returned as that integer:
/// channel-use counts are whole numbers and `2·(N/(2T))·T` can miss `N` by
/// a few ulps, with no floating-point bandwidth hitting it exactly for some
/// `T`.
pub fn degrees_of_freedom(bandwidth: f64, latency: f64) -> Result<f64> {
    check_positive("bandwidth", bandwidth)?;
    check_positive("latency", latency)?;
    let dof = 2.0 * bandwidth * latency;
    let nearest = dof.round();
    if nearest >= 1.0 && (dof - nearest).abs() <= DOF_RTOL * nearest {
        Ok(nearest)
    } else {
        Ok(dof)
    }
}

/// Bandwidth `N/(2T)` that fits `channel_uses` into `latency` seconds.
pub fn required_bandwidth(channel_uses: f64, latency: f64) -> Result<f64> {
    if !(channel_uses.is_finite() && channel_uses >= 1.0) {
        return Err(Error::Domain(format!(
            "channel uses must be >= 1, got {channel_uses}"
        )));
    }
    check_positive("latency", latency)?;
    Ok(channel_uses / (2.0 * latency))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BudgetRequest {
    pub payload_bits: f64,
    pub epsilon: f64,
    /// Linear SNR.
    pub gamma: f64,
    /// Latency budget `T` in seconds.
    pub latency: f64,
    pub max_bandwidth: Option<f64>,
    /// Antenna limit; plans needing more streams are marked infeasible.
    pub max_streams: Option<u32>,
    pub mode: ChannelUseMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BudgetPlan {
    /// `N`, channel uses needed for the payload at the target error.
    pub required_cu: u64,
    /// `W = N/(2T)`.
    pub required_bandwidth: f64,
    /// `min(W, W_max)`.
    pub effective_bandwidth: f64,
    /// `L ≥ 1`.
    pub spatial_streams: u32,
    pub feasible: bool,
}

impl BudgetPlan {
    /// `2·W_eff·T·L`, the degrees of freedom the plan provisions.
    pub fn provisioned_dof(&self, latency: f64) -> f64 {
        2.0 * self.effective_bandwidth * latency * self.spatial_streams as f64
    }
}

/// Minimal stream count `L` with `2·W·T·L ≥ N` (up to [`DOF_RTOL`]).
pub fn streams_needed(channel_uses: f64, bandwidth: f64, latency: f64) -> Result<u32> {
    let dof = degrees_of_freedom(bandwidth, latency)?;
    let covers = |l: f64| dof * l >= channel_uses * (1.0 - DOF_RTOL);
    let mut streams = (channel_uses / dof).ceil().max(1.0);
    while !covers(streams) {
        streams += 1.0;
    }
    while streams > 1.0 && covers(streams - 1.0) {
        streams -= 1.0;
    }
    if streams > u32::MAX as f64 {
        return Err(Error::Infeasible(format!(
            "{streams} spatial streams exceed any antenna array"
        )));
    }
    Ok(streams as u32)
}

/// Plan for an already-known channel-use count `N`.
pub fn plan_for_channel_uses(
    required_cu: u64,
    latency: f64,
    max_bandwidth: Option<f64>,
    max_streams: Option<u32>,
) -> Result<BudgetPlan> {
    let n = required_cu as f64;
    let w = required_bandwidth(n, latency)?;
    let (effective, streams) = match max_bandwidth {
        Some(w_max) => {
            check_positive("max bandwidth", w_max)?;
            if w > w_max {
                (w_max, streams_needed(n, w_max, latency)?)
            } else {
                (w, 1)
            }
        }
        None => (w, 1),
    };
    Ok(BudgetPlan {
        required_cu,
        required_bandwidth: w,
        effective_bandwidth: effective,
        spatial_streams: streams,
        feasible: max_streams.is_none_or(|cap| streams <= cap),
    })
}

/// Full budget: minimum blocklength for the payload, then resources.
pub fn plan(request: &BudgetRequest) -> Result<BudgetPlan> {
    check_positive("latency", request.latency)?;
    if !(request.gamma > 0.0) {
        return Err(Error::NoSolution(format!(
            "SNR must be > 0 to carry data, got {}",
            request.gamma
        )));
    }
    let n = fbl::min_blocklength(
        request.payload_bits,
        request.epsilon,
        request.gamma,
        request.mode,
    )?;
    plan_for_channel_uses(n, request.latency, request.max_bandwidth, request.max_streams)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dof_points() {
        assert_eq!(degrees_of_freedom(64e3, 1e-3).unwrap(), 128.0);
        assert_eq!(degrees_of_freedom(1.0, 0.5).unwrap(), 1.0);
        let a = degrees_of_freedom(3e3, 2e-3).unwrap();
        let b = degrees_of_freedom(3e3, 4e-3).unwrap();
        assert_eq!(b, 2.0 * a);
        assert!(degrees_of_freedom(0.0, 1.0).is_err());
        assert!(degrees_of_freedom(1.0, -1.0).is_err());
    }

    #[test]
    fn bandwidth_points() {
        assert_eq!(required_bandwidth(128.0, 1e-3).unwrap(), 64e3);
        assert_eq!(required_bandwidth(1.0, 0.5).unwrap(), 1.0);
        assert!(required_bandwidth(128.0, 0.0).is_err());
        assert!(required_bandwidth(0.0, 1.0).is_err());
    }

    #[test]
    fn half_bandwidth_needs_two_streams() {
        let n = 119u64;
        let t = 1e-3;
        let p = plan_for_channel_uses(n, t, Some(n as f64 / (4.0 * t)), None).unwrap();
        assert_eq!(p.spatial_streams, 2);
        assert!(p.feasible);
    }

    #[test]
    fn stream_cap_marks_infeasible() {
        let p = plan_for_channel_uses(1000, 1e-3, Some(100e3), Some(4)).unwrap();
        assert_eq!(p.spatial_streams, 5);
        assert!(!p.feasible);
    }

    #[test]
    fn zero_snr_rejected() {
        let req = BudgetRequest {
            payload_bits: 80.0,
            epsilon: 1e-3,
            gamma: 0.0,
            latency: 1e-3,
            max_bandwidth: None,
            max_streams: None,
            mode: ChannelUseMode::Complex,
        };
        assert!(matches!(plan(&req), Err(Error::NoSolution(_))));
    }
}
