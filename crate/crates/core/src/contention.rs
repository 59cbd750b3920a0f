//! Multi-user contention.
//!
//! Two experiments:
//!
//! - **Long-term rates**: `K` users share `W` Hz. Up to `K_ded` users each
//!   hold a dedicated `W/K_ded` share; beyond that every user gets `W/K`.
//!   The per-user rate `share·log2(1+γ)` is averaged over windows of
//!   `T_W` seconds and the low percentiles of the windowed rate are
//!   reported, matching "at least R during a% of the time" guarantees.
//! - **Short-term latency**: all `K` users hold one message at `t = 0` and
//!   contend in slots sized by the finite-blocklength solver, either with
//!   slotted ALOHA or with coded random access (replicas plus iterative
//!   interference cancellation, i.e. peeling). The latency percentile over
//!   users and trials is reported per `K`.
//!
//! Trials are independent substreams keyed by `(seed, K, trial)`, so the
//! results do not depend on the number of worker threads.

use std::collections::VecDeque;

use rand::seq::index::sample as sample_indices;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{generate_trace, ChannelModel};
use crate::error::{Error, Result};
use crate::fbl::{self, ChannelUseMode};
use crate::rng::{self, stream, RNG_ALGORITHM};

const Z95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    /// Number of users `K`.
    pub users: u32,
    pub value: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Share of samples that hit the latency cap (latency curves only).
    pub censored_fraction: f64,
    /// The reported percentile itself lies beyond the cap; `value` is the
    /// cap in that case.
    pub value_censored: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveMeta {
    pub seed: u64,
    pub rng: String,
    /// Monte Carlo samples behind each point.
    pub samples_per_point: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveReport {
    pub metric: String,
    pub unit: String,
    pub points: Vec<CurvePoint>,
    pub meta: CurveMeta,
}

fn check_user_range(ks: &[u32]) -> Result<()> {
    if ks.is_empty() {
        return Err(Error::Domain("user range is empty".into()));
    }
    if ks[0] == 0 {
        return Err(Error::Domain("user counts must be >= 1".into()));
    }
    if ks.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Domain("user counts must be strictly increasing".into()));
    }
    Ok(())
}

/// Sample mean with a normal-approximation 95 % interval.
pub fn mean_ci(values: &[f64]) -> (f64, f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, mean, mean);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    let half = Z95 * (var / n).sqrt();
    (mean, mean - half, mean + half)
}

/// Empirical `level`-quantile of sorted data, `sorted[⌈level·n⌉−1]`, with a
/// distribution-free 95 % interval from binomial order statistics.
pub fn quantile_ci(sorted: &[f64], level: f64) -> (f64, f64, f64) {
    let n = sorted.len();
    let nf = n as f64;
    let idx = |r: f64| (r.max(1.0).min(nf) as usize) - 1;
    let center = idx((level * nf).ceil());
    let spread = Z95 * (nf * level * (1.0 - level)).sqrt();
    let lo = idx((level * nf - spread).floor());
    let hi = idx((level * nf + spread).ceil());
    (sorted[center], sorted[lo], sorted[hi])
}

// ---------------------------------------------------------------------------
// Long-term rate guarantees
// ---------------------------------------------------------------------------

/// "At least `rate_bps` during `availability` of the time."
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateGuarantee {
    pub rate_bps: f64,
    pub availability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UrclScenario {
    pub total_bandwidth: f64,
    pub channel: ChannelModel,
    /// Users served with a dedicated share, `K_ded`.
    pub dedicated_user_cap: u32,
    pub guarantees: Vec<RateGuarantee>,
    /// Averaging window `T_W` in seconds.
    pub window_s: f64,
    pub sample_period_s: f64,
    /// Windows simulated per tracked user.
    pub windows: usize,
    /// Users whose traces are simulated; all users are statistically
    /// identical so a fixed representative set serves every `K`.
    pub tracked_users: usize,
    pub seed: u64,
}

impl UrclScenario {
    pub fn validate(&self) -> Result<()> {
        if !(self.total_bandwidth.is_finite() && self.total_bandwidth > 0.0) {
            return Err(Error::Domain("total bandwidth must be > 0".into()));
        }
        self.channel.validate()?;
        if self.dedicated_user_cap == 0 {
            return Err(Error::Domain("dedicated user cap must be >= 1".into()));
        }
        if !(self.window_s > 0.01) {
            return Err(Error::Domain(format!(
                "long-term window must exceed 10 ms, got {} s",
                self.window_s
            )));
        }
        if !(self.sample_period_s > 0.0 && self.sample_period_s <= self.window_s) {
            return Err(Error::Domain(
                "sample period must be > 0 and no longer than the window".into(),
            ));
        }
        if self.windows == 0 || self.tracked_users == 0 {
            return Err(Error::Domain("windows and tracked users must be >= 1".into()));
        }
        for g in &self.guarantees {
            if !(g.availability > 0.0 && g.availability < 1.0) {
                return Err(Error::Domain(format!(
                    "guarantee availability must lie in (0, 1), got {}",
                    g.availability
                )));
            }
        }
        Ok(())
    }

    /// Bandwidth held by each user when `users` share the band.
    pub fn share(&self, users: u32) -> f64 {
        self.total_bandwidth / users.max(self.dedicated_user_cap) as f64
    }

    fn samples_per_window(&self) -> usize {
        ((self.window_s / self.sample_period_s).round() as usize).max(1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PercentileCurve {
    pub availability: f64,
    pub curve: CurveReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UrclReport {
    /// `(K, per-user bandwidth share in Hz)`.
    pub shares: Vec<(u32, f64)>,
    pub mean_rate: CurveReport,
    /// One curve per guarantee availability level.
    pub percentiles: Vec<PercentileCurve>,
}

/// Windowed per-user rate statistics versus the number of users.
pub fn urcl_rate_curve(scenario: &UrclScenario, ks: &[u32]) -> Result<UrclReport> {
    scenario.validate()?;
    check_user_range(ks)?;
    let per_window = scenario.samples_per_window();
    let length = per_window * scenario.windows;

    // Spectral efficiency (bit/s/Hz) per window, per tracked user.
    let efficiency: Vec<Vec<f64>> = (0..scenario.tracked_users)
        .into_par_iter()
        .map(|u| {
            let seed = rng::derive_seed(scenario.seed ^ stream::USER_TRACE, u as u64);
            let trace = generate_trace(&scenario.channel, length, scenario.sample_period_s, seed)?;
            Ok(trace
                .samples
                .chunks_exact(per_window)
                .map(|w| w.iter().map(|s| (1.0 + s).log2()).sum::<f64>() / per_window as f64)
                .collect())
        })
        .collect::<Result<_>>()?;

    let mut levels: Vec<f64> = scenario.guarantees.iter().map(|g| g.availability).collect();
    levels.sort_by(|a, b| b.total_cmp(a));
    levels.dedup();

    let mut shares = Vec::with_capacity(ks.len());
    let mut mean_points = Vec::with_capacity(ks.len());
    let mut level_points: Vec<Vec<CurvePoint>> = vec![Vec::new(); levels.len()];
    let mut counts = Vec::with_capacity(ks.len());
    for &k in ks {
        let share = scenario.share(k);
        shares.push((k, share));
        // Users are statistically identical, so every K draws on the same
        // pool and the curve shape follows the share alone.
        let mut rates: Vec<f64> = efficiency
            .iter()
            .flatten()
            .map(|e| share * e)
            .collect();
        counts.push(rates.len() as u64);
        let (mean, lo, hi) = mean_ci(&rates);
        mean_points.push(point(k, mean, lo, hi));
        rates.sort_by(f64::total_cmp);
        for (a, pts) in levels.iter().zip(level_points.iter_mut()) {
            // The rate exceeded during a fraction `a` of the windows is the
            // (1−a)-quantile.
            let (v, lo, hi) = quantile_ci(&rates, 1.0 - a);
            pts.push(point(k, v, lo, hi));
        }
    }

    let meta = CurveMeta {
        seed: scenario.seed,
        rng: RNG_ALGORITHM.into(),
        samples_per_point: counts,
    };
    let curve = |metric: String, points| CurveReport {
        metric,
        unit: "bit/s".into(),
        points,
        meta: meta.clone(),
    };
    Ok(UrclReport {
        shares,
        mean_rate: curve("mean windowed rate".into(), mean_points),
        percentiles: levels
            .iter()
            .zip(level_points)
            .map(|(&a, pts)| PercentileCurve {
                availability: a,
                curve: curve(format!("windowed rate met {:.6}% of the time", a * 100.0), pts),
            })
            .collect(),
    })
}

fn point(users: u32, value: f64, ci_low: f64, ci_high: f64) -> CurvePoint {
    CurvePoint {
        users,
        value,
        ci_low,
        ci_high,
        censored_fraction: 0.0,
        value_censored: false,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GuaranteeCheck {
    pub rate_bps: f64,
    pub availability: f64,
    /// `(K, rate at the availability level, pass)`.
    pub points: Vec<(u32, f64, bool)>,
    pub passed: bool,
}

/// Check each guarantee at every `K` of the report.
pub fn urcl_check(report: &UrclReport, guarantees: &[RateGuarantee]) -> Result<Vec<GuaranteeCheck>> {
    guarantees
        .iter()
        .map(|g| {
            let curve = report
                .percentiles
                .iter()
                .find(|c| (c.availability - g.availability).abs() < 1e-12)
                .ok_or_else(|| {
                    Error::Domain(format!(
                        "report has no percentile for availability {}",
                        g.availability
                    ))
                })?;
            let points: Vec<_> = curve
                .curve
                .points
                .iter()
                .map(|p| (p.users, p.value, p.value >= g.rate_bps))
                .collect();
            Ok(GuaranteeCheck {
                rate_bps: g.rate_bps,
                availability: g.availability,
                passed: points.iter().all(|p| p.2),
                points,
            })
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Short-term latency under random access
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum AccessProtocol {
    /// Every backlogged user transmits in each slot with probability `p_tx`.
    SlottedAloha { p_tx: f64 },
    /// Frames of `frame_slots` slots; each backlogged user sends replicas in
    /// a random set of slots whose size has mean `mean_degree`.
    CodedRandomAccess { mean_degree: f64, frame_slots: u32 },
}

impl AccessProtocol {
    fn validate(&self) -> Result<()> {
        match *self {
            AccessProtocol::SlottedAloha { p_tx } => {
                if p_tx == 0.0 {
                    return Err(Error::Domain(
                        "p_tx = 0: no user ever transmits, no progress possible".into(),
                    ));
                }
                if !(p_tx > 0.0 && p_tx <= 1.0) {
                    return Err(Error::Domain(format!("p_tx must lie in (0, 1], got {p_tx}")));
                }
            }
            AccessProtocol::CodedRandomAccess {
                mean_degree,
                frame_slots,
            } => {
                if frame_slots == 0 {
                    return Err(Error::Domain("frame must have >= 1 slot".into()));
                }
                if !(mean_degree >= 1.0 && mean_degree <= frame_slots as f64) {
                    return Err(Error::Domain(format!(
                        "mean degree must lie in [1, {frame_slots}], got {mean_degree}"
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UrcsScenario {
    pub payload_bits: f64,
    /// Header bits added to the payload before slot sizing.
    pub metadata_bits: f64,
    /// Per-transmission decoding error probability.
    pub epsilon: f64,
    /// Linear SNR.
    pub gamma: f64,
    pub mode: ChannelUseMode,
    /// Duration of one channel use in seconds.
    pub channel_use_s: f64,
    pub protocol: AccessProtocol,
    pub latency_cap_s: f64,
    /// Latency percentile to report, e.g. 0.999.
    pub percentile: f64,
    pub trials: u32,
    pub seed: u64,
}

impl UrcsScenario {
    pub fn validate(&self) -> Result<()> {
        self.protocol.validate()?;
        if !(self.metadata_bits >= 0.0) {
            return Err(Error::Domain("metadata bits must be >= 0".into()));
        }
        if !(self.channel_use_s.is_finite() && self.channel_use_s > 0.0) {
            return Err(Error::Domain("channel-use duration must be > 0".into()));
        }
        if !(self.latency_cap_s.is_finite() && self.latency_cap_s > 0.0) {
            return Err(Error::Domain("latency cap must be > 0".into()));
        }
        if !(self.percentile > 0.0 && self.percentile < 1.0) {
            return Err(Error::Domain("percentile must lie in (0, 1)".into()));
        }
        if self.trials == 0 {
            return Err(Error::Domain("trials must be >= 1".into()));
        }
        Ok(())
    }

    /// Channel uses per slot: the blocklength for payload plus metadata.
    pub fn slot_cu(&self) -> Result<u64> {
        fbl::min_blocklength(
            self.payload_bits + self.metadata_bits,
            self.epsilon,
            self.gamma,
            self.mode,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UrcsReport {
    pub slot_cu: u64,
    pub slot_duration_s: f64,
    pub cap_slots: u64,
    pub percentile: CurveReport,
    pub mean: CurveReport,
}

/// Latency in slots of each user in one batch-arrival trial; `None` when
/// the user is still backlogged after `cap_slots`.
pub fn simulate_batch(
    users: u32,
    protocol: &AccessProtocol,
    epsilon: f64,
    cap_slots: u64,
    rng: &mut ChaCha8Rng,
) -> Vec<Option<u64>> {
    match *protocol {
        AccessProtocol::SlottedAloha { p_tx } => aloha_batch(users, p_tx, epsilon, cap_slots, rng),
        AccessProtocol::CodedRandomAccess {
            mean_degree,
            frame_slots,
        } => cra_batch(users, mean_degree, frame_slots, epsilon, cap_slots, rng),
    }
}

fn aloha_batch(users: u32, p_tx: f64, epsilon: f64, cap: u64, rng: &mut ChaCha8Rng) -> Vec<Option<u64>> {
    let mut latency = vec![None; users as usize];
    let mut backlog: Vec<usize> = (0..users as usize).collect();
    let mut senders = Vec::new();
    for slot in 1..=cap {
        if backlog.is_empty() {
            break;
        }
        senders.clear();
        for &u in &backlog {
            if rng.random::<f64>() < p_tx {
                senders.push(u);
            }
        }
        if let [only] = senders[..] {
            if rng.random::<f64>() >= epsilon {
                latency[only] = Some(slot);
                backlog.retain(|&u| u != only);
            }
        }
    }
    latency
}

/// Replica count for one user: `⌊μ⌋` or `⌈μ⌉` with the mean equal to `μ`.
fn draw_degree(mean_degree: f64, frame_slots: u32, rng: &mut ChaCha8Rng) -> usize {
    let base = mean_degree.floor();
    let frac = mean_degree - base;
    let mut d = base as usize;
    if frac > 0.0 && rng.random::<f64>() < frac {
        d += 1;
    }
    d.clamp(1, frame_slots as usize)
}

fn cra_batch(
    users: u32,
    mean_degree: f64,
    frame_slots: u32,
    epsilon: f64,
    cap: u64,
    rng: &mut ChaCha8Rng,
) -> Vec<Option<u64>> {
    let slots = frame_slots as usize;
    let mut latency = vec![None; users as usize];
    let mut backlog: Vec<usize> = (0..users as usize).collect();
    let mut frame = 0u64;
    while !backlog.is_empty() && (frame + 1) * slots as u64 <= cap {
        let placements: Vec<Vec<usize>> = backlog
            .iter()
            .map(|_| {
                let d = draw_degree(mean_degree, frame_slots, rng);
                let mut chosen = sample_indices(rng, slots, d).into_vec();
                chosen.sort_unstable();
                chosen
            })
            .collect();
        let decoded = peel_with(&placements, slots, || rng.random::<f64>() >= epsilon);
        frame += 1;
        let end = frame * slots as u64;
        let mut still = Vec::with_capacity(backlog.len());
        for (&u, ok) in backlog.iter().zip(decoded) {
            if ok {
                latency[u] = Some(end);
            } else {
                still.push(u);
            }
        }
        backlog = still;
    }
    latency
}

/// Iterative interference cancellation on one frame without decoding
/// errors. `placements[u]` lists the slots holding user `u`'s replicas;
/// returns which users are resolved.
pub fn peel(placements: &[Vec<usize>], frame_slots: usize) -> Vec<bool> {
    peel_with(placements, frame_slots, || true)
}

/// Peeling where each singleton decode succeeds when `decode_ok()` is
/// true. A failed singleton slot is discarded; the user can still be
/// resolved through another replica.
pub fn peel_with(
    placements: &[Vec<usize>],
    frame_slots: usize,
    mut decode_ok: impl FnMut() -> bool,
) -> Vec<bool> {
    let mut occupants: Vec<Vec<usize>> = vec![Vec::new(); frame_slots];
    for (u, slots) in placements.iter().enumerate() {
        for &s in slots {
            occupants[s].push(u);
        }
    }
    let mut load: Vec<usize> = occupants.iter().map(Vec::len).collect();
    let mut resolved = vec![false; placements.len()];
    let mut dead = vec![false; frame_slots];
    let mut queue: VecDeque<usize> = (0..frame_slots).filter(|&s| load[s] == 1).collect();

    while let Some(s) = queue.pop_front() {
        if dead[s] || load[s] != 1 {
            continue;
        }
        let Some(&u) = occupants[s].iter().find(|&&u| !resolved[u]) else {
            continue;
        };
        if !decode_ok() {
            dead[s] = true;
            continue;
        }
        resolved[u] = true;
        for &t in &placements[u] {
            load[t] -= 1;
            if load[t] == 1 && !dead[t] {
                queue.push_back(t);
            }
        }
    }
    resolved
}

fn trial_index(users: u32, trial: u32) -> u64 {
    ((users as u64) << 32) | trial as u64
}

/// Latency percentile (and mean) versus the number of users.
pub fn urcs_latency_curve(scenario: &UrcsScenario, ks: &[u32]) -> Result<UrcsReport> {
    scenario.validate()?;
    check_user_range(ks)?;
    let slot_cu = scenario.slot_cu()?;
    let slot_duration = slot_cu as f64 * scenario.channel_use_s;
    let cap_slots = (scenario.latency_cap_s / slot_duration).floor() as u64;

    let mut pct_points = Vec::with_capacity(ks.len());
    let mut mean_points = Vec::with_capacity(ks.len());
    let mut counts = Vec::with_capacity(ks.len());
    for &k in ks {
        let per_trial: Vec<Vec<Option<u64>>> = (0..scenario.trials)
            .into_par_iter()
            .map(|t| {
                let mut rng = rng::substream(scenario.seed, stream::ACCESS, trial_index(k, t));
                simulate_batch(k, &scenario.protocol, scenario.epsilon, cap_slots, &mut rng)
            })
            .collect();

        let mut latencies: Vec<f64> = per_trial
            .into_iter()
            .flatten()
            .map(|l| l.map_or(f64::INFINITY, |s| s as f64 * slot_duration))
            .collect();
        counts.push(latencies.len() as u64);
        let censored = latencies.iter().filter(|l| l.is_infinite()).count();
        let censored_fraction = censored as f64 / latencies.len() as f64;

        let capped: Vec<f64> = latencies.iter().map(|l| l.min(scenario.latency_cap_s)).collect();
        let (mean, lo, hi) = mean_ci(&capped);
        mean_points.push(CurvePoint {
            censored_fraction,
            value_censored: censored > 0,
            ..point(k, mean, lo, hi)
        });

        latencies.sort_by(f64::total_cmp);
        let (v, lo, hi) = quantile_ci(&latencies, scenario.percentile);
        let cap = |x: f64| x.min(scenario.latency_cap_s);
        pct_points.push(CurvePoint {
            users: k,
            value: cap(v),
            ci_low: cap(lo),
            ci_high: cap(hi),
            censored_fraction,
            value_censored: v.is_infinite(),
        });
    }

    let meta = CurveMeta {
        seed: scenario.seed,
        rng: RNG_ALGORITHM.into(),
        samples_per_point: counts,
    };
    Ok(UrcsReport {
        slot_cu,
        slot_duration_s: slot_duration,
        cap_slots,
        percentile: CurveReport {
            metric: format!("latency percentile {}", scenario.percentile),
            unit: "s".into(),
            points: pct_points,
            meta: meta.clone(),
        },
        mean: CurveReport {
            metric: "mean latency (censored at cap)".into(),
            unit: "s".into(),
            points: mean_points,
            meta,
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedCurves {
    pub full_payload_bits: f64,
    pub basic_payload_bits: f64,
    pub full: UrcsReport,
    pub basic: UrcsReport,
}

/// Full-payload vs. basic-mode latency curves under shared randomness.
pub fn rsc_latency_comparison(
    scenario: &UrcsScenario,
    full_bits: f64,
    basic_bits: f64,
    ks: &[u32],
) -> Result<PairedCurves> {
    if !(basic_bits <= full_bits) {
        return Err(Error::Domain(format!(
            "basic payload ({basic_bits}) must not exceed full payload ({full_bits})"
        )));
    }
    let full = urcs_latency_curve(&UrcsScenario { payload_bits: full_bits, ..*scenario }, ks)?;
    let basic = urcs_latency_curve(&UrcsScenario { payload_bits: basic_bits, ..*scenario }, ks)?;
    Ok(PairedCurves {
        full_payload_bits: full_bits,
        basic_payload_bits: basic_bits,
        full,
        basic,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaggedAlohaStats {
    pub users: u32,
    pub slots: u64,
    pub successes: u64,
    pub estimate: f64,
    pub closed_form: f64,
    /// Binomial standard deviation of the estimate under the closed form.
    pub sigma: f64,
}

/// `p(1−p)^(K−1)(1−ε)`: per-slot success of a tagged user when all `K`
/// users are always backlogged.
pub fn aloha_tagged_closed_form(users: u32, p_tx: f64, epsilon: f64) -> f64 {
    p_tx * (1.0 - p_tx).powi(users as i32 - 1) * (1.0 - epsilon)
}

/// Saturated slotted ALOHA: every user always has a packet. Counts the
/// slots in which user 0 is the sole transmitter and decodes.
pub fn aloha_tagged_success(
    users: u32,
    p_tx: f64,
    epsilon: f64,
    slots: u64,
    seed: u64,
) -> Result<TaggedAlohaStats> {
    AccessProtocol::SlottedAloha { p_tx }.validate()?;
    if users == 0 || slots == 0 {
        return Err(Error::Domain("users and slots must be >= 1".into()));
    }
    let mut rng = rng::substream(seed, stream::ALOHA_SATURATED, users as u64);
    let mut successes = 0u64;
    for _ in 0..slots {
        let mut tagged = false;
        let mut senders = 0u32;
        for u in 0..users {
            if rng.random::<f64>() < p_tx {
                senders += 1;
                tagged |= u == 0;
            }
        }
        if tagged && senders == 1 && rng.random::<f64>() >= epsilon {
            successes += 1;
        }
    }
    let closed_form = aloha_tagged_closed_form(users, p_tx, epsilon);
    Ok(TaggedAlohaStats {
        users,
        slots,
        successes,
        estimate: successes as f64 / slots as f64,
        closed_form,
        sigma: (closed_form * (1.0 - closed_form) / slots as f64).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::FadingKind;
    use rand::SeedableRng;

    fn urcs(protocol: AccessProtocol) -> UrcsScenario {
        UrcsScenario {
            payload_bits: 128.0,
            metadata_bits: 80.0,
            epsilon: 1e-3,
            gamma: 1.0,
            mode: ChannelUseMode::Complex,
            channel_use_s: 1e-6,
            protocol,
            latency_cap_s: 1.0,
            percentile: 0.99,
            trials: 2000,
            seed: 11,
        }
    }

    #[test]
    fn quantile_rule() {
        let data: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(quantile_ci(&data, 0.99).0, 99.0);
        assert_eq!(quantile_ci(&data, 0.05).0, 5.0);
        let (v, lo, hi) = quantile_ci(&data, 0.5);
        assert!(lo <= v && v <= hi);
    }

    #[test]
    fn peeling_examples() {
        // u0 alone in slot 0 → cancel from slot 1 → u1 alone there.
        assert_eq!(peel(&[vec![0, 1], vec![1, 2], vec![2, 3]], 4), vec![true, true, true]);
        // Two users on the same pair of slots form a stopping set.
        assert_eq!(peel(&[vec![0, 1], vec![0, 1]], 2), vec![false, false]);
        assert_eq!(peel(&[vec![0, 1], vec![0, 1], vec![2]], 3), vec![false, false, true]);
    }

    #[test]
    fn failed_singleton_is_discarded() {
        let mut calls = 0;
        // First singleton (slot 0) fails; slot 2 still resolves user 0.
        let out = peel_with(&[vec![0, 2]], 3, || {
            calls += 1;
            calls > 1
        });
        assert_eq!(out, vec![true]);
    }

    #[test]
    fn single_user_one_slot() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let proto = AccessProtocol::SlottedAloha { p_tx: 1.0 };
        assert_eq!(simulate_batch(1, &proto, 0.0, 10, &mut rng), vec![Some(1)]);
    }

    #[test]
    fn full_transmit_probability_deadlocks_two_users() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let proto = AccessProtocol::SlottedAloha { p_tx: 1.0 };
        assert_eq!(simulate_batch(2, &proto, 0.0, 50, &mut rng), vec![None, None]);
    }

    #[test]
    fn protocol_validation() {
        let mut s = urcs(AccessProtocol::SlottedAloha { p_tx: 0.0 });
        assert!(urcs_latency_curve(&s, &[1]).is_err());
        s.protocol = AccessProtocol::CodedRandomAccess { mean_degree: 5.0, frame_slots: 4 };
        assert!(urcs_latency_curve(&s, &[1]).is_err());
        s.protocol = AccessProtocol::SlottedAloha { p_tx: 0.5 };
        assert!(urcs_latency_curve(&s, &[2, 1]).is_err());
        assert!(urcs_latency_curve(&s, &[]).is_err());
    }

    #[test]
    fn censoring_flagged() {
        let mut s = urcs(AccessProtocol::SlottedAloha { p_tx: 1.0 });
        s.latency_cap_s = 0.01;
        s.trials = 10;
        let r = urcs_latency_curve(&s, &[1, 2]).unwrap();
        assert_eq!(r.percentile.points[0].censored_fraction, 0.0);
        assert!(r.percentile.points[1].value_censored);
        assert_eq!(r.percentile.points[1].censored_fraction, 1.0);
        assert_eq!(r.percentile.points[1].value, 0.01);
    }

    #[test]
    fn degree_mean_matches() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 100_000;
        let total: usize = (0..n).map(|_| draw_degree(2.3, 8, &mut rng)).sum();
        assert!((total as f64 / n as f64 - 2.3).abs() < 0.01);
    }

    #[test]
    fn urcl_constant_channel() {
        let s = UrclScenario {
            total_bandwidth: 1e6,
            channel: ChannelModel::constant(3.0),
            dedicated_user_cap: 1,
            guarantees: vec![RateGuarantee { rate_bps: 1e6, availability: 0.95 }],
            window_s: 1.0,
            sample_period_s: 0.01,
            windows: 10,
            tracked_users: 2,
            seed: 0,
        };
        let r = urcl_rate_curve(&s, &[1]).unwrap();
        assert_eq!(r.mean_rate.points[0].value, 2e6);
        assert_eq!(r.percentiles[0].curve.points[0].value, 2e6);
        assert!(urcl_check(&r, &s.guarantees).unwrap()[0].passed);
    }

    #[test]
    fn urcl_window_must_be_long_term() {
        let s = UrclScenario {
            total_bandwidth: 1e6,
            channel: ChannelModel { kind: FadingKind::Constant, ..ChannelModel::constant(1.0) },
            dedicated_user_cap: 1,
            guarantees: vec![],
            window_s: 0.005,
            sample_period_s: 0.001,
            windows: 1,
            tracked_users: 1,
            seed: 0,
        };
        assert!(urcl_rate_curve(&s, &[1]).is_err());
    }
}
