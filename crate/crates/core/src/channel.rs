//! Seeded SINR traces for fading, shadowing and on/off interference.
//!
//! Fading is block fading: the fading gain, the shadowing term and the
//! interferer state are drawn once per block of `block_length` samples and
//! held constant inside the block. Each of the three draws uses its own
//! substream, so switching one mechanism off leaves the others untouched
//! sample for sample.

use std::io::Write;

use rand::Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::report::fmt_sig;
use crate::rng::{self, stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FadingKind {
    #[default]
    Constant,
    RayleighBlock,
    LognormalShadow,
    RayleighPlusShadow,
}

impl FadingKind {
    fn has_rayleigh(self) -> bool {
        matches!(self, FadingKind::RayleighBlock | FadingKind::RayleighPlusShadow)
    }

    fn has_shadow(self) -> bool {
        matches!(self, FadingKind::LognormalShadow | FadingKind::RayleighPlusShadow)
    }
}

/// An interferer that is active in a block with probability `activity_prob`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Interferer {
    pub activity_prob: f64,
    /// Interference-to-noise ratio when active (linear).
    pub inr: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelModel {
    pub kind: FadingKind,
    /// Mean SNR (linear).
    pub mean_snr: f64,
    /// Shadowing standard deviation in dB, used by the shadowing kinds.
    pub shadow_sigma_db: f64,
    /// Samples per fading block.
    pub block_length: usize,
    pub interferer: Option<Interferer>,
}

impl ChannelModel {
    pub fn constant(snr: f64) -> Self {
        ChannelModel {
            kind: FadingKind::Constant,
            mean_snr: snr,
            shadow_sigma_db: 0.0,
            block_length: 1,
            interferer: None,
        }
    }

    pub fn rayleigh(mean_snr: f64, block_length: usize) -> Self {
        ChannelModel {
            kind: FadingKind::RayleighBlock,
            mean_snr,
            shadow_sigma_db: 0.0,
            block_length,
            interferer: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mean_snr.is_finite() && self.mean_snr > 0.0) {
            return Err(Error::Domain(format!(
                "mean SNR must be > 0, got {}",
                self.mean_snr
            )));
        }
        if self.block_length == 0 {
            return Err(Error::Domain("block length must be >= 1".into()));
        }
        if !(self.shadow_sigma_db.is_finite() && self.shadow_sigma_db >= 0.0) {
            return Err(Error::Domain(format!(
                "shadowing sigma must be >= 0 dB, got {}",
                self.shadow_sigma_db
            )));
        }
        if let Some(i) = self.interferer {
            if !(0.0..=1.0).contains(&i.activity_prob) {
                return Err(Error::Domain(format!(
                    "interferer activity probability must lie in [0, 1], got {}",
                    i.activity_prob
                )));
            }
            if !(i.inr.is_finite() && i.inr >= 0.0) {
                return Err(Error::Domain(format!(
                    "interference-to-noise ratio must be >= 0, got {}",
                    i.inr
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnrTrace {
    /// Linear SINR per sample.
    pub samples: Vec<f64>,
    /// Seconds between samples.
    pub sample_period: f64,
    pub seed: u64,
}

impl SnrTrace {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Write the trace as CSV with columns `index,time_s,sinr_linear`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        w.write_record(["index", "time_s", "sinr_linear"])
            .map_err(csv_err)?;
        for (i, s) in self.samples.iter().enumerate() {
            w.write_record([
                i.to_string(),
                fmt_sig(i as f64 * self.sample_period),
                fmt_sig(*s),
            ])
            .map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Io(std::io::Error::other(format!("{other:?}"))),
    }
}

/// Generate `length` samples of the model. Identical arguments give
/// bit-identical traces.
pub fn generate_trace(
    model: &ChannelModel,
    length: usize,
    sample_period: f64,
    seed: u64,
) -> Result<SnrTrace> {
    model.validate()?;
    if length == 0 {
        return Err(Error::Domain("trace length must be >= 1".into()));
    }
    if !(sample_period.is_finite() && sample_period > 0.0) {
        return Err(Error::Domain(format!(
            "sample period must be > 0, got {sample_period}"
        )));
    }

    let mut fading = rng::substream(seed, stream::FADING, 0);
    let mut shadowing = rng::substream(seed, stream::SHADOWING, 0);
    let mut interference = rng::substream(seed, stream::INTERFERENCE, 0);

    let mut samples = Vec::with_capacity(length);
    while samples.len() < length {
        let mut snr = model.mean_snr;
        if model.kind.has_rayleigh() {
            let e: f64 = fading.sample(Exp1);
            snr *= e;
        }
        if model.kind.has_shadow() {
            let x: f64 = shadowing.sample(StandardNormal);
            snr *= 10f64.powf(model.shadow_sigma_db * x / 10.0);
        }
        if let Some(i) = model.interferer {
            // Always draw so the stream position never depends on the outcome.
            let u: f64 = interference.random();
            if u < i.activity_prob {
                snr /= 1.0 + i.inr;
            }
        }
        let take = model.block_length.min(length - samples.len());
        samples.extend(std::iter::repeat_n(snr, take));
    }

    Ok(SnrTrace {
        samples,
        sample_period,
        seed,
    })
}

/// Fraction of samples with SINR at or above `threshold`.
pub fn availability(trace: &SnrTrace, threshold: f64) -> f64 {
    if trace.samples.is_empty() {
        return 0.0;
    }
    let hits = trace.samples.iter().filter(|&&s| s >= threshold).count();
    hits as f64 / trace.samples.len() as f64
}

/// Availability measured over consecutive non-overlapping windows of
/// `window` samples; a trailing partial window is dropped.
pub fn windowed_availability(trace: &SnrTrace, threshold: f64, window: usize) -> Result<Vec<f64>> {
    if window == 0 {
        return Err(Error::Domain("availability window must be >= 1 sample".into()));
    }
    Ok(trace
        .samples
        .chunks_exact(window)
        .map(|w| w.iter().filter(|&&s| s >= threshold).count() as f64 / window as f64)
        .collect())
}

/// `P(γ ≥ threshold)` for exponentially distributed SNR with the given mean.
pub fn analytic_rayleigh_availability(mean_snr: f64, threshold: f64) -> Result<f64> {
    if !(mean_snr.is_finite() && mean_snr > 0.0) {
        return Err(Error::Domain(format!("mean SNR must be > 0, got {mean_snr}")));
    }
    if !(threshold >= 0.0) {
        return Err(Error::Domain(format!("threshold must be >= 0, got {threshold}")));
    }
    Ok((-threshold / mean_snr).exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_trace() {
        let t = generate_trace(&ChannelModel::constant(2.0), 5, 1e-3, 9).unwrap();
        assert_eq!(t.samples, vec![2.0; 5]);
        assert_eq!(availability(&t, 1.0), 1.0);
        assert_eq!(availability(&t, 3.0), 0.0);
    }

    #[test]
    fn deterministic_per_seed() {
        let m = ChannelModel {
            kind: FadingKind::RayleighPlusShadow,
            mean_snr: 5.0,
            shadow_sigma_db: 4.0,
            block_length: 3,
            interferer: Some(Interferer { activity_prob: 0.3, inr: 2.0 }),
        };
        let a = generate_trace(&m, 1000, 1e-3, 42).unwrap();
        let b = generate_trace(&m, 1000, 1e-3, 42).unwrap();
        let c = generate_trace(&m, 1000, 1e-3, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.samples, c.samples);
    }

    #[test]
    fn block_structure() {
        let t = generate_trace(&ChannelModel::rayleigh(1.0, 4), 10, 1.0, 1).unwrap();
        assert_eq!(t.samples[0], t.samples[3]);
        assert_ne!(t.samples[3], t.samples[4]);
        assert_eq!(t.samples[8], t.samples[9]);
    }

    #[test]
    fn silent_interferer_changes_nothing() {
        let base = ChannelModel::rayleigh(3.0, 2);
        let silent = ChannelModel {
            interferer: Some(Interferer { activity_prob: 0.0, inr: 100.0 }),
            ..base
        };
        let a = generate_trace(&base, 500, 1.0, 5).unwrap();
        let b = generate_trace(&silent, 500, 1.0, 5).unwrap();
        assert_eq!(a.samples, b.samples);
    }

    #[test]
    fn always_on_interferer_divides() {
        let loud = ChannelModel {
            interferer: Some(Interferer { activity_prob: 1.0, inr: 3.0 }),
            ..ChannelModel::constant(8.0)
        };
        let t = generate_trace(&loud, 4, 1.0, 0).unwrap();
        assert_eq!(t.samples, vec![2.0; 4]);
    }

    #[test]
    fn invalid_models() {
        assert!(generate_trace(&ChannelModel::constant(0.0), 5, 1.0, 0).is_err());
        assert!(generate_trace(&ChannelModel::rayleigh(1.0, 0), 5, 1.0, 0).is_err());
        assert!(generate_trace(&ChannelModel::constant(1.0), 0, 1.0, 0).is_err());
        let bad = ChannelModel {
            interferer: Some(Interferer { activity_prob: 1.5, inr: 1.0 }),
            ..ChannelModel::constant(1.0)
        };
        assert!(generate_trace(&bad, 5, 1.0, 0).is_err());
    }

    #[test]
    fn analytic_points() {
        assert_eq!(analytic_rayleigh_availability(10.0, 0.0).unwrap(), 1.0);
        assert_eq!(analytic_rayleigh_availability(10.0, 1.0).unwrap(), (-0.1f64).exp());
        assert!((analytic_rayleigh_availability(1.0, 1.0).unwrap() - 0.3679).abs() < 1e-4);
        assert!(analytic_rayleigh_availability(0.0, 1.0).is_err());
    }

    #[test]
    fn windows() {
        let t = SnrTrace { samples: vec![1.0, 3.0, 3.0, 3.0, 0.5], sample_period: 1.0, seed: 0 };
        assert_eq!(windowed_availability(&t, 2.0, 2).unwrap(), vec![0.5, 1.0]);
        assert!(windowed_availability(&t, 2.0, 0).is_err());
    }

    #[test]
    fn csv_export() {
        let t = SnrTrace { samples: vec![1.5, 2.0], sample_period: 0.5, seed: 0 };
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "index,time_s,sinr_linear\n0,0,1.5\n1,0.5,2\n");
    }
}
