//! Reliable service composition: a service offered as ordered tiers.
//!
//! Each tier promises `payload_bits` within `latency_s` with probability
//! `reliability_target`. Given a system bandwidth, a tier maps to a minimum
//! SNR; at runtime the selector picks the highest tier the channel
//! supports. Downgrades are immediate; upgrades need the SNR to clear the
//! higher threshold by `hysteresis_db` for `dwell_samples` consecutive
//! samples.

use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{csv_err, SnrTrace};
use crate::error::{Error, Result};
use crate::fbl::{self, ChannelUseMode};
use crate::report::fmt_sig;
use crate::rng::{self, stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceTier {
    pub name: String,
    pub payload_bits: f64,
    pub latency_s: f64,
    pub reliability_target: f64,
    pub availability_target: f64,
    /// 0 is the basic tier.
    pub rank: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RscPolicy {
    /// Tiers ordered by increasing rank.
    pub tiers: Vec<ServiceTier>,
    #[serde(default)]
    pub hysteresis_db: f64,
    #[serde(default = "one")]
    pub dwell_samples: u32,
}

fn one() -> u32 {
    1
}

impl RscPolicy {
    /// Basic / enhanced / full composition with availability targets
    /// 99.999 %, 99 % and 97 %.
    pub fn three_tier_default() -> Self {
        let tier = |name: &str, payload_bits, latency_s, availability_target, rank| ServiceTier {
            name: name.into(),
            payload_bits,
            latency_s,
            reliability_target: 0.999,
            availability_target,
            rank,
        };
        RscPolicy {
            tiers: vec![
                tier("basic", 32.0, 10e-3, 0.99999, 0),
                tier("enhanced", 256.0, 5e-3, 0.99, 1),
                tier("full", 2048.0, 1e-3, 0.97, 2),
            ],
            hysteresis_db: 1.0,
            dwell_samples: 3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.tiers.is_empty() {
            return Err(Error::Domain("policy needs at least one tier".into()));
        }
        if !(self.hysteresis_db.is_finite() && self.hysteresis_db >= 0.0) {
            return Err(Error::Domain(format!(
                "hysteresis must be >= 0 dB, got {}",
                self.hysteresis_db
            )));
        }
        if self.dwell_samples == 0 {
            return Err(Error::Domain("dwell must be >= 1 sample".into()));
        }
        for t in &self.tiers {
            if !(t.payload_bits.is_finite() && t.payload_bits > 0.0) {
                return Err(Error::Domain(format!("tier `{}`: payload must be > 0", t.name)));
            }
            if !(t.latency_s.is_finite() && t.latency_s > 0.0) {
                return Err(Error::Domain(format!("tier `{}`: latency must be > 0", t.name)));
            }
            for (what, v) in [
                ("reliability target", t.reliability_target),
                ("availability target", t.availability_target),
            ] {
                if !(v > 0.0 && v < 1.0) {
                    return Err(Error::Domain(format!(
                        "tier `{}`: {what} must lie in (0, 1), got {v}",
                        t.name
                    )));
                }
            }
        }
        for pair in self.tiers.windows(2) {
            let (lo, hi) = (&pair[0], &pair[1]);
            if hi.rank <= lo.rank {
                return Err(Error::Domain(format!(
                    "tiers must be listed by strictly increasing rank (`{}` after `{}`)",
                    hi.name, lo.name
                )));
            }
            if hi.payload_bits < lo.payload_bits || hi.latency_s > lo.latency_s {
                return Err(Error::Domain(format!(
                    "tier `{}` must carry at least the payload of `{}` within at most its latency",
                    hi.name, lo.name
                )));
            }
        }
        Ok(())
    }
}

/// Channel uses available to a tier: `⌊2·W_sys·latency⌋`.
pub fn tier_channel_uses(tier: &ServiceTier, system_bandwidth: f64) -> Result<u64> {
    let n = (2.0 * system_bandwidth * tier.latency_s).floor();
    if !(n >= 1.0) {
        return Err(Error::Infeasible(format!(
            "tier `{}` gets less than one channel use",
            tier.name
        )));
    }
    Ok(n as u64)
}

/// Minimum SNR at which the tier meets its reliability target.
pub fn tier_threshold(tier: &ServiceTier, system_bandwidth: f64, mode: ChannelUseMode) -> Result<f64> {
    if !(system_bandwidth.is_finite() && system_bandwidth > 0.0) {
        return Err(Error::Domain(format!(
            "system bandwidth must be > 0, got {system_bandwidth}"
        )));
    }
    let n = tier_channel_uses(tier, system_bandwidth)?;
    fbl::min_snr(n, tier.payload_bits, 1.0 - tier.reliability_target, mode)
}

/// Selector memory between samples.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SelectorState {
    /// Index into the policy's tiers; `None` is outage.
    pub current: Option<usize>,
    /// Consecutive samples qualifying for an upgrade.
    pub streak: u32,
    started: bool,
}

fn highest_at_or_below(thresholds: &[f64], snr: f64, limit: usize) -> Option<usize> {
    (0..limit).rev().find(|&i| thresholds[i] <= snr)
}

/// Advance the selector by one SNR sample and return the selected tier
/// index (`None` for outage).
///
/// The first sample initialises the selection to the highest feasible tier
/// without hysteresis. Afterwards a tier whose threshold exceeds the SNR is
/// left immediately for the highest feasible tier below it, and an upgrade
/// to the highest tier whose threshold times the hysteresis factor the SNR
/// clears happens once that has held for `dwell_samples` samples in a row.
pub fn select_tier(
    policy: &RscPolicy,
    thresholds: &[f64],
    snr: f64,
    state: &mut SelectorState,
) -> Option<usize> {
    debug_assert_eq!(thresholds.len(), policy.tiers.len());
    let count = thresholds.len();
    if !state.started {
        state.started = true;
        state.current = highest_at_or_below(thresholds, snr, count);
        state.streak = 0;
        return state.current;
    }

    if let Some(c) = state.current {
        if thresholds[c] > snr {
            state.current = highest_at_or_below(thresholds, snr, c);
            state.streak = 0;
        }
    }

    let factor = crate::db_to_linear(policy.hysteresis_db);
    let upgrade = (0..count).rev().find(|&i| thresholds[i] * factor <= snr);
    let level = |x: Option<usize>| x.map_or(-1, |i| i as i64);
    if level(upgrade) > level(state.current) {
        state.streak += 1;
        if state.streak >= policy.dwell_samples {
            state.current = upgrade;
            state.streak = 0;
        }
    } else {
        state.streak = 0;
    }
    state.current
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TierReport {
    pub name: String,
    pub rank: u32,
    /// Channel uses available within the tier's latency.
    pub channel_uses: Option<u64>,
    /// Minimum SNR (linear); `None` when the tier cannot be supported.
    pub threshold: Option<f64>,
    pub infeasible_reason: Option<String>,
    pub selected_samples: u64,
    pub delivered_samples: u64,
    pub time_fraction_selected: f64,
    /// Delivered / selected; `None` when never selected.
    pub achieved_delivery_reliability: Option<f64>,
    /// Fraction of samples at or above the tier's threshold.
    pub availability: f64,
    /// Worst availability over consecutive windows, when windowing is on.
    pub min_window_availability: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimelineRow {
    pub time_s: f64,
    pub snr: f64,
    /// Selected rank, `None` for outage.
    pub selected_rank: Option<u32>,
    pub delivered: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RscReport {
    pub tiers: Vec<TierReport>,
    pub total_samples: u64,
    pub outage_samples: u64,
    pub outage_fraction: f64,
    pub switch_count: u64,
    #[serde(skip)]
    pub timeline: Vec<TimelineRow>,
}

impl RscReport {
    /// Time series CSV: `time_s,snr,selected_rank,delivered`; outage is
    /// rank `-1`.
    pub fn write_timeline_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        w.write_record(["time_s", "snr", "selected_rank", "delivered"])
            .map_err(csv_err)?;
        for row in &self.timeline {
            let rank = row.selected_rank.map_or("-1".to_string(), |r| r.to_string());
            w.write_record([
                fmt_sig(row.time_s),
                fmt_sig(row.snr),
                rank,
                u8::from(row.delivered).to_string(),
            ])
            .map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Walk `trace` through the selector and draw per-sample delivery outcomes
/// from the instantaneous SNR. Reproducible from `(policy, trace,
/// eval_seed)`.
pub fn evaluate(
    policy: &RscPolicy,
    trace: &SnrTrace,
    system_bandwidth: f64,
    mode: ChannelUseMode,
    eval_seed: u64,
    availability_window: Option<usize>,
) -> Result<RscReport> {
    policy.validate()?;
    if trace.samples.is_empty() {
        return Err(Error::Domain("trace is empty".into()));
    }
    if availability_window == Some(0) {
        return Err(Error::Domain("availability window must be >= 1 sample".into()));
    }

    let mut tiers: Vec<TierReport> = Vec::with_capacity(policy.tiers.len());
    let mut thresholds = Vec::with_capacity(policy.tiers.len());
    for tier in &policy.tiers {
        let uses = tier_channel_uses(tier, system_bandwidth).ok();
        let (threshold, reason) = match tier_threshold(tier, system_bandwidth, mode) {
            Ok(t) => (Some(t), None),
            Err(e) => (None, Some(e.to_string())),
        };
        thresholds.push(threshold.unwrap_or(f64::INFINITY));
        tiers.push(TierReport {
            name: tier.name.clone(),
            rank: tier.rank,
            channel_uses: uses,
            threshold,
            infeasible_reason: reason,
            selected_samples: 0,
            delivered_samples: 0,
            time_fraction_selected: 0.0,
            achieved_delivery_reliability: None,
            availability: 0.0,
            min_window_availability: None,
        });
    }

    let mut delivery = rng::substream(eval_seed, stream::DELIVERY, 0);
    let mut state = SelectorState::default();
    let mut previous = None;
    let mut switch_count = 0u64;
    let mut outage_samples = 0u64;
    let mut available = vec![0u64; tiers.len()];
    let mut timeline = Vec::with_capacity(trace.samples.len());

    for (i, &snr) in trace.samples.iter().enumerate() {
        for (hits, &thr) in available.iter_mut().zip(&thresholds) {
            if thr <= snr {
                *hits += 1;
            }
        }
        let selected = select_tier(policy, &thresholds, snr, &mut state);
        if i > 0 && selected != previous {
            switch_count += 1;
        }
        previous = selected;

        let u: f64 = delivery.random();
        let delivered = match selected {
            Some(t) => {
                let tier = &policy.tiers[t];
                let n = tiers[t].channel_uses.expect("selected tiers are feasible");
                let eps = if snr > 0.0 {
                    fbl::achieved_error(n, tier.payload_bits, snr, mode)?
                } else {
                    1.0
                };
                let ok = u >= eps;
                tiers[t].selected_samples += 1;
                tiers[t].delivered_samples += u64::from(ok);
                ok
            }
            None => {
                outage_samples += 1;
                false
            }
        };
        timeline.push(TimelineRow {
            time_s: i as f64 * trace.sample_period,
            snr,
            selected_rank: selected.map(|t| policy.tiers[t].rank),
            delivered,
        });
    }

    let total = trace.samples.len() as u64;
    for (t, report) in tiers.iter_mut().enumerate() {
        report.availability = available[t] as f64 / total as f64;
        report.time_fraction_selected = report.selected_samples as f64 / total as f64;
        if report.selected_samples > 0 {
            report.achieved_delivery_reliability =
                Some(report.delivered_samples as f64 / report.selected_samples as f64);
        }
        if let Some(window) = availability_window {
            let windows = crate::channel::windowed_availability(trace, thresholds[t], window)?;
            report.min_window_availability = windows.into_iter().reduce(f64::min);
        }
    }

    Ok(RscReport {
        tiers,
        total_samples: total,
        outage_samples,
        outage_fraction: outage_samples as f64 / total as f64,
        switch_count,
        timeline,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TierCheck {
    pub name: String,
    pub rank: u32,
    pub availability: f64,
    pub availability_target: f64,
    pub availability_pass: bool,
    pub reliability: Option<f64>,
    pub reliability_target: f64,
    pub reliability_pass: bool,
    pub never_selected: bool,
    pub passed: bool,
}

/// Per-tier verdict: availability and delivery reliability both on target.
pub fn check_requirements(report: &RscReport, policy: &RscPolicy) -> Vec<TierCheck> {
    policy
        .tiers
        .iter()
        .zip(&report.tiers)
        .map(|(tier, r)| {
            let availability_pass = r.availability >= tier.availability_target;
            let reliability_pass = r
                .achieved_delivery_reliability
                .is_some_and(|rel| rel >= tier.reliability_target);
            TierCheck {
                name: tier.name.clone(),
                rank: tier.rank,
                availability: r.availability,
                availability_target: tier.availability_target,
                availability_pass,
                reliability: r.achieved_delivery_reliability,
                reliability_target: tier.reliability_target,
                reliability_pass,
                never_selected: r.selected_samples == 0,
                passed: availability_pass && reliability_pass,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{generate_trace, ChannelModel};
    use ChannelUseMode::Complex;

    fn two_tier(hysteresis_db: f64, dwell_samples: u32) -> RscPolicy {
        let mut p = RscPolicy::three_tier_default();
        p.tiers.truncate(2);
        p.hysteresis_db = hysteresis_db;
        p.dwell_samples = dwell_samples;
        p
    }

    fn steps(policy: &RscPolicy, thr: &[f64], snrs: &[f64]) -> Vec<Option<usize>> {
        let mut st = SelectorState::default();
        snrs.iter().map(|&s| select_tier(policy, thr, s, &mut st)).collect()
    }

    #[test]
    fn default_policy_is_valid() {
        RscPolicy::three_tier_default().validate().unwrap();
    }

    #[test]
    fn policy_ordering_enforced() {
        let mut p = RscPolicy::three_tier_default();
        p.tiers.swap(0, 1);
        assert!(p.validate().is_err());
        let mut p = RscPolicy::three_tier_default();
        p.tiers[2].payload_bits = 1.0;
        assert!(p.validate().is_err());
        let mut p = RscPolicy::three_tier_default();
        p.dwell_samples = 0;
        assert!(p.validate().is_err());
        assert!(RscPolicy { tiers: vec![], hysteresis_db: 0.0, dwell_samples: 1 }.validate().is_err());
    }

    #[test]
    fn thresholds_increase_with_payload() {
        let p = RscPolicy::three_tier_default();
        let mut basic = p.tiers[2].clone();
        basic.payload_bits = 16.0;
        let full = tier_threshold(&p.tiers[2], 1e6, Complex).unwrap();
        let small = tier_threshold(&basic, 1e6, Complex).unwrap();
        assert!(small < full);
    }

    #[test]
    fn threshold_round_trip_at_half_error() {
        let gamma = 2.5;
        let tier = ServiceTier {
            name: "t".into(),
            payload_bits: 0.0,
            latency_s: 1e-3,
            reliability_target: 0.5,
            availability_target: 0.9,
            rank: 0,
        };
        let n = tier_channel_uses(&tier, 1e5).unwrap();
        assert_eq!(n, 200);
        let payload = n as f64 * fbl::capacity_per_cu(gamma, Complex).unwrap() + 0.5 * (n as f64).log2();
        let tier = ServiceTier { payload_bits: payload, ..tier };
        let thr = tier_threshold(&tier, 1e5, Complex).unwrap();
        assert!((thr - gamma).abs() < 1e-9 * gamma, "{thr}");
    }

    #[test]
    fn threshold_grows_as_reliability_tightens() {
        let p = RscPolicy::three_tier_default();
        let mut prev = 0.0;
        for rel in [0.9, 0.999, 0.999_999, 1.0 - 1e-12] {
            let t = ServiceTier { reliability_target: rel, ..p.tiers[1].clone() };
            let thr = tier_threshold(&t, 1e6, Complex).unwrap();
            assert!(thr > prev);
            prev = thr;
        }
        let hopeless = ServiceTier { payload_bits: 1e9, ..p.tiers[1].clone() };
        assert!(matches!(tier_threshold(&hopeless, 1e6, Complex), Err(Error::NoSolution(_))));
        let short = ServiceTier { latency_s: 1e-9, ..p.tiers[1].clone() };
        assert!(matches!(tier_threshold(&short, 1e6, Complex), Err(Error::Infeasible(_))));
    }

    #[test]
    fn top_tier_and_outage() {
        let p = RscPolicy::three_tier_default();
        let thr = [1.0, 2.0, 4.0];
        assert_eq!(steps(&p, &thr, &[100.0; 5]), vec![Some(2); 5]);
        assert_eq!(steps(&p, &thr, &[0.5; 3]), vec![None; 3]);
    }

    #[test]
    fn immediate_downgrade_gated_upgrade() {
        let p = two_tier(3.0, 2);
        let thr = [1.0, 10.0];
        // 3 dB hysteresis: an upgrade to tier 1 needs SNR >= ~19.95.
        let snr = [12.0, 9.0, 15.0, 25.0, 25.0, 25.0];
        assert_eq!(
            steps(&p, &thr, &snr),
            vec![Some(1), Some(0), Some(0), Some(0), Some(1), Some(1)]
        );
    }

    #[test]
    fn no_flapping_around_threshold() {
        // Hand-enumerated: start just above thr[1] → tier 1; next sample
        // 0.2 dB lower falls below it → tier 0 (one switch); afterwards the
        // SNR never reaches thr[1]·10^0.3, so the selection stays put.
        let p = two_tier(3.0, 1);
        let thr = [1.0, 10.0];
        let snr: Vec<f64> = (0..200)
            .map(|i| 10.0 * crate::db_to_linear(if i % 2 == 0 { 0.1 } else { -0.1 }))
            .collect();
        let sel = steps(&p, &thr, &snr);
        let switches = sel.windows(2).filter(|w| w[0] != w[1]).count();
        assert!(switches <= 1);
        assert_eq!(sel[0], Some(1));
        assert!(sel[1..].iter().all(|&s| s == Some(0)));
    }

    #[test]
    fn constant_channel_report() {
        let p = RscPolicy::three_tier_default();
        let trace = generate_trace(&ChannelModel::constant(1e4), 500, 1e-3, 1).unwrap();
        let r = evaluate(&p, &trace, 1e6, Complex, 2, None).unwrap();
        assert_eq!(r.tiers[2].time_fraction_selected, 1.0);
        assert_eq!(r.switch_count, 0);
        assert_eq!(r.outage_samples, 0);
        let checks = check_requirements(&r, &p);
        assert!(checks[2].passed);
        assert!(checks[0].never_selected && !checks[0].passed);
    }

    #[test]
    fn verdict_rules() {
        let p = RscPolicy {
            tiers: vec![ServiceTier {
                name: "only".into(),
                payload_bits: 10.0,
                latency_s: 1e-3,
                reliability_target: 0.999,
                availability_target: 0.99,
                rank: 0,
            }],
            hysteresis_db: 0.0,
            dwell_samples: 1,
        };
        let mut report = RscReport {
            tiers: vec![TierReport {
                name: "only".into(),
                rank: 0,
                channel_uses: Some(100),
                threshold: Some(1.0),
                infeasible_reason: None,
                selected_samples: 1000,
                delivered_samples: 1000,
                time_fraction_selected: 0.995,
                achieved_delivery_reliability: Some(1.0),
                availability: 0.995,
                min_window_availability: None,
            }],
            total_samples: 1000,
            outage_samples: 0,
            outage_fraction: 0.0,
            switch_count: 0,
            timeline: vec![],
        };
        assert!(check_requirements(&report, &p)[0].passed);
        report.tiers[0].availability = 0.95;
        assert!(!check_requirements(&report, &p)[0].passed);
    }

    #[test]
    fn timeline_csv() {
        let p = two_tier(0.0, 1);
        let trace = generate_trace(&ChannelModel::constant(1e-6), 2, 0.5, 1).unwrap();
        let r = evaluate(&p, &trace, 1e6, Complex, 0, None).unwrap();
        let mut buf = Vec::new();
        r.write_timeline_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "time_s,snr,selected_rank,delivered\n0,1e-06,-1,0\n0.5,1e-06,-1,0\n"
        );
    }
}
