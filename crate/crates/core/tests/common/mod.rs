//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

use std::f64::consts::{LOG2_E, PI};

/// `Q(x)` by quadrature of `Q(x) = φ(x)·∫₀^∞ exp(−x t − t²/2) dt` (x ≥ 0),
/// composite Simpson with a step scaled to the integrand's decay.
pub fn q_quadrature(x: f64) -> f64 {
    if x < 0.0 {
        return 1.0 - q_quadrature(-x);
    }
    let phi = (-0.5 * x * x).exp() / (2.0 * PI).sqrt();
    // Integrand is below e^-40 beyond t_max.
    let t_max = if x > 1.0 { 40.0 / x } else { 10.0 };
    let steps = 20_000usize;
    let h = t_max / steps as f64;
    let g = |t: f64| (-x * t - 0.5 * t * t).exp();
    let mut sum = g(0.0) + g(t_max);
    for i in 1..steps {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * g(i as f64 * h);
    }
    phi * sum * h / 3.0
}

/// `Q⁻¹(p)` by bisection on [`q_quadrature`].
pub fn q_inv_bisection(p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0);
    let (mut lo, mut hi) = (-40.0f64, 40.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if q_quadrature(mid) > p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Normal approximation evaluated from first principles; `scale` is 1 for
/// complex channel uses and ½ for real ones.
pub fn bits_oracle(n: u64, q_inv: f64, gamma: f64, scale: f64) -> f64 {
    let n = n as f64;
    let c = scale * (1.0 + gamma).ln() * LOG2_E;
    let v = scale * (1.0 - 1.0 / ((1.0 + gamma) * (1.0 + gamma))) * LOG2_E * LOG2_E;
    n * c - (n * v).sqrt() * q_inv + 0.5 * n.log2()
}

/// Smallest `n` with `k(n) ≥ k` and `k(n) ≥ k(n−1)`, by linear scan.
pub fn min_blocklength_scan(k: f64, q_inv: f64, gamma: f64, scale: f64, limit: u64) -> Option<u64> {
    let mut prev = f64::NEG_INFINITY;
    for n in 1..=limit {
        let cur = bits_oracle(n, q_inv, gamma, scale);
        if cur >= k && cur >= prev {
            return Some(n);
        }
        prev = cur;
    }
    None
}

/// Users resolved by iterative interference cancellation, via the
/// stopping-set characterisation: the unresolved users form the largest
/// set in which every occupied slot holds at least two of its members.
/// `masks[u]` has bit `s` set when user `u` transmits in slot `s`.
pub fn decoded_by_stopping_set(masks: &[u32]) -> Vec<bool> {
    let k = masks.len();
    let mut stuck = 0u32;
    for subset in 1u32..(1 << k) {
        let mut once = 0u32;
        let mut twice = 0u32;
        for (u, &m) in masks.iter().enumerate() {
            if subset >> u & 1 == 1 {
                twice |= once & m;
                once |= m;
            }
        }
        if once == twice {
            stuck |= subset;
        }
    }
    (0..k).map(|u| stuck >> u & 1 == 0).collect()
}

pub fn slots_of(mask: u32) -> Vec<usize> {
    (0..32).filter(|s| mask >> s & 1 == 1).collect()
}

/// Every assignment of a `degree`-subset of `frame_slots` slots to each of
/// `users` users.
pub fn all_placements(users: usize, frame_slots: usize, degree: u32) -> Vec<Vec<u32>> {
    let choices: Vec<u32> = (0u32..(1 << frame_slots)).filter(|m| m.count_ones() == degree).collect();
    let mut out = Vec::new();
    let mut idx = vec![0usize; users];
    loop {
        out.push(idx.iter().map(|&i| choices[i]).collect());
        let mut pos = 0;
        loop {
            if pos == users {
                return out;
            }
            idx[pos] += 1;
            if idx[pos] < choices.len() {
                break;
            }
            idx[pos] = 0;
            pos += 1;
        }
    }
}

/// Exact per-user decode probability of one frame with uniform placements.
pub fn exact_decode_probability(users: usize, frame_slots: usize, degree: u32) -> f64 {
    let placements = all_placements(users, frame_slots, degree);
    let decoded: usize = placements
        .iter()
        .map(|p| decoded_by_stopping_set(p).into_iter().filter(|&d| d).count())
        .sum();
    decoded as f64 / (placements.len() * users) as f64
}

/// Mean per-user latency (slots) of batch slotted ALOHA from the backlog
/// Markov chain: with `j` users left, a slot succeeds with probability
/// `j·p(1−p)^(j−1)(1−ε)`, and the `K−j+1` users still waiting accrue the
/// expected sojourn time.
pub fn aloha_batch_mean_latency(users: u32, p: f64, epsilon: f64) -> f64 {
    let k = users as f64;
    let mut total = 0.0;
    for j in 1..=users {
        let jf = j as f64;
        let s = jf * p * (1.0 - p).powi(j as i32 - 1) * (1.0 - epsilon);
        total += jf / s;
    }
    total / k
}

/// `P(tagged user decoded by slot t)` for batch slotted ALOHA, by dynamic
/// programming over (remaining backlog, tagged still waiting).
pub fn aloha_batch_latency_cdf(users: u32, p: f64, epsilon: f64, horizon: usize) -> Vec<f64> {
    let k = users as usize;
    // waiting[j]: probability tagged user still backlogged with j users left.
    let mut waiting = vec![0.0; k + 1];
    waiting[k] = 1.0;
    let mut cdf = Vec::with_capacity(horizon);
    let mut done = 0.0;
    for _ in 0..horizon {
        let mut next = vec![0.0; k + 1];
        for j in 1..=k {
            let w = waiting[j];
            if w == 0.0 {
                continue;
            }
            let single = p * (1.0 - p).powi(j as i32 - 1) * (1.0 - epsilon);
            // Tagged succeeds, another user succeeds, or nothing resolves.
            done += w * single;
            next[j - 1] += w * single * (j as f64 - 1.0);
            next[j] += w * (1.0 - single * j as f64);
        }
        waiting = next;
        cdf.push(done);
    }
    cdf
}
