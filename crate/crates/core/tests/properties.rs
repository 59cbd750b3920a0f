use proptest::prelude::*;

use urc_core::budget::{degrees_of_freedom, plan_for_channel_uses, required_bandwidth};
use urc_core::channel::{generate_trace, ChannelModel};
use urc_core::fbl::{achieved_error, capacity_per_cu, dispersion, max_info_bits, min_blocklength, ChannelUseMode, FblQuery};
use urc_core::link::{goodput_joint, separate_at_snr, FrameConfig};
use urc_core::rsc::{evaluate, RscPolicy};
use urc_core::special::{qfunc, qfunc_inv};

fn mode() -> impl Strategy<Value = ChannelUseMode> {
    prop_oneof![Just(ChannelUseMode::Real), Just(ChannelUseMode::Complex)]
}

fn bits(n: u64, eps: f64, gamma: f64, mode: ChannelUseMode) -> f64 {
    max_info_bits(&FblQuery::new(n, eps, gamma, mode).unwrap()).unwrap().k_bits
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn q_inverse_pair(log_p in -12.0f64..-1e-9, upper in any::<bool>()) {
        let p = 10f64.powf(log_p);
        let p = if upper { 1.0 - p } else { p };
        prop_assume!(p > 0.0 && p < 1.0);
        let x = qfunc_inv(p).unwrap();
        let back = qfunc(x).unwrap();
        prop_assert!(((back - p) / p).abs() < 1e-10, "p={p} x={x} back={back}");
    }

    #[test]
    fn forward_monotone_and_clamped(
        n in 1u64..20_000,
        log_eps in -10.0f64..-0.4,
        gdb in -10.0f64..40.0,
        mode in mode(),
    ) {
        let eps = 10f64.powf(log_eps);
        let g = 10f64.powf(gdb / 10.0);
        let k = bits(n, eps, g, mode);
        prop_assert!(k >= 0.0);
        prop_assert!(bits(n, eps, g * 1.01, mode) >= k);
        prop_assert!(bits(n, (eps * 2.0).min(0.49), g, mode) >= k);
        prop_assert_eq!(capacity_per_cu(g, ChannelUseMode::Real).unwrap() * 2.0,
                        capacity_per_cu(g, ChannelUseMode::Complex).unwrap());
        if k > 0.0 {
            let n_min = min_blocklength(k, eps, g, mode).unwrap();
            prop_assert!(n_min <= n);
            // Nondecreasing in n from the returned blocklength on.
            let mut prev = bits(n_min, eps, g, mode);
            for m in n_min + 1..(n_min + 40) {
                let cur = bits(m, eps, g, mode);
                prop_assert!(cur >= prev, "n={m}: {cur} < {prev}");
                prev = cur;
            }
        }
    }

    #[test]
    fn error_round_trip(
        n in 20u64..5000,
        z in -5.0f64..8.0,
        gdb in -5.0f64..25.0,
    ) {
        // k placed so that the achieved error is Q(z).
        let g = 10f64.powf(gdb / 10.0);
        let c = capacity_per_cu(g, ChannelUseMode::Complex).unwrap();
        let v = dispersion(g, ChannelUseMode::Complex).unwrap();
        let nf = n as f64;
        let k = nf * c + 0.5 * nf.log2() - z * (nf * v).sqrt();
        prop_assume!(k > 0.0);
        let e = achieved_error(n, k, g, ChannelUseMode::Complex).unwrap();
        let k2 = bits(n, e, g, ChannelUseMode::Complex);
        prop_assert!((k2 - k).abs() < 1e-6, "{k} -> {e} -> {k2}");
    }

    #[test]
    fn dof_round_trip(n in 1u64..100_000_000, log_t in -7.0f64..1.0) {
        let t = 10f64.powf(log_t);
        let w = required_bandwidth(n as f64, t).unwrap();
        prop_assert_eq!(degrees_of_freedom(w, t).unwrap(), n as f64);
    }

    #[test]
    fn streams_minimal(n in 1u64..1_000_000, log_t in -5.0f64..-1.0, frac in 0.01f64..2.0) {
        let t = 10f64.powf(log_t);
        let w_max = frac * n as f64 / (2.0 * t);
        let plan = plan_for_channel_uses(n, t, Some(w_max), None).unwrap();
        let l = plan.spatial_streams as f64;
        let dof = degrees_of_freedom(plan.effective_bandwidth, t).unwrap();
        prop_assert!(dof * l >= n as f64 * (1.0 - 1e-12));
        if plan.spatial_streams > 1 {
            prop_assert!(dof * (l - 1.0) < n as f64);
        }
    }

    #[test]
    fn goodput_probabilities(h in 1u64..200, d in 1u64..500, m in 1u64..300, nd in 1u64..800, gdb in -5.0f64..15.0) {
        let g = 10f64.powf(gdb / 10.0);
        let frame = FrameConfig::new(h as f64, d as f64, m, nd, 1e-6).unwrap();
        for o in [separate_at_snr(&frame, g, ChannelUseMode::Complex).unwrap(),
                  goodput_joint(&frame, g, ChannelUseMode::Complex).unwrap()] {
            prop_assert!((0.0..=1.0).contains(&o.success_prob));
            prop_assert!((o.success_prob + o.failure_prob - 1.0).abs() < 1e-12);
            prop_assert!(o.goodput >= 0.0);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn rsc_fractions_sum_to_one(seed in any::<u64>(), snr_db in 0.0f64..25.0, block in 1usize..50) {
        let model = ChannelModel::rayleigh(10f64.powf(snr_db / 10.0), block);
        let trace = generate_trace(&model, 3000, 1e-3, seed).unwrap();
        let policy = RscPolicy::three_tier_default();
        let r = evaluate(&policy, &trace, 1e6, ChannelUseMode::Complex, seed, None).unwrap();
        let selected: u64 = r.tiers.iter().map(|t| t.selected_samples).sum();
        prop_assert_eq!(selected + r.outage_samples, r.total_samples);
        // Never above the raw threshold of the selected tier.
        for row in &r.timeline {
            if let Some(rank) = row.selected_rank {
                let t = r.tiers.iter().find(|t| t.rank == rank).unwrap();
                prop_assert!(t.threshold.unwrap() <= row.snr);
            }
        }
        let again = evaluate(&policy, &trace, 1e6, ChannelUseMode::Complex, seed, None).unwrap();
        prop_assert_eq!(r, again);
    }
}
