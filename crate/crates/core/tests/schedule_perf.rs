use std::collections::BTreeMap;

use optisense_core::mapper::{tuning_summary, KernelId, UniformWeights};
use optisense_core::perf::{estimate, OpsAccounting, TimingEnergyConstants};
use optisense_core::{plan_layer, ConvSpec, CoreConfig, LayerSpec, MlpSpec};
use proptest::prelude::*;

fn conv(h: usize, w: usize, c: usize, k: usize, o: usize, s: usize, p: usize) -> LayerSpec {
    LayerSpec::Conv(ConvSpec {
        in_height: h,
        in_width: w,
        in_channels: c,
        kernel: k,
        out_channels: o,
        stride: s,
        padding: p,
    })
}

/// Every (2-D kernel, stride position) pair the layer needs, counted directly
/// from its shape.
fn brute_force_pairs(layer: &LayerSpec) -> BTreeMap<(KernelId, u64), usize> {
    let mut pairs = BTreeMap::new();
    let (kernels, positions) = match layer {
        LayerSpec::Conv(c) => {
            let (mut oh, mut ow) = (0, 0);
            while oh * c.stride + c.kernel <= c.in_height + 2 * c.padding {
                oh += 1;
            }
            while ow * c.stride + c.kernel <= c.in_width + 2 * c.padding {
                ow += 1;
            }
            let ks: Vec<KernelId> = (0..c.out_channels)
                .flat_map(|o| (0..c.in_channels).map(move |i| KernelId::new(o, i)))
                .collect();
            (ks, (oh * ow) as u64)
        }
        LayerSpec::Mlp(m) => {
            let chunks = m.fan_in.div_ceil(9);
            let ks = (0..m.outputs)
                .flat_map(|o| (0..chunks).map(move |c| KernelId::new(o, c)))
                .collect();
            (ks, 1)
        }
    };
    for k in kernels {
        for t in 0..positions {
            *pairs.entry((k, t)).or_insert(0) += 1;
        }
    }
    pairs
}

fn layer_strategy() -> impl Strategy<Value = LayerSpec> {
    prop_oneof![
        (
            1usize..12,
            1usize..12,
            1usize..4,
            prop::sample::select(vec![3usize, 5, 7]),
            1usize..200,
            1usize..4,
            0usize..4
        )
            .prop_filter_map("empty output", |(h, w, c, k, o, s, p)| {
                let l = conv(h, w, c, k, o, s, p);
                l.validate().ok().map(|_| l)
            }),
        (1usize..100, 1usize..300).prop_map(|(fan_in, outputs)| LayerSpec::Mlp(MlpSpec { fan_in, outputs })),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn schedule_covers_every_pair_once(layer in layer_strategy()) {
        let cfg = CoreConfig::default();
        let s = plan_layer(&layer, &cfg).unwrap();
        let mut planned = BTreeMap::new();
        for pair in s.pairs() {
            *planned.entry(pair).or_insert(0usize) += 1;
        }
        prop_assert_eq!(planned, brute_force_pairs(&layer));
        let peak = s.peak_macs_per_cycle();
        prop_assert!(s.counters.total_cycles >= s.counters.total_macs.div_ceil(peak));
        for r in &s.rounds {
            prop_assert!(r.macs_per_cycle() <= peak);
        }
    }
}

#[test]
fn exact_fit_layers_reach_the_cycle_bound() {
    let cfg = CoreConfig::default();
    for layer in [
        conv(3, 3, 1, 3, 400, 1, 0),
        conv(8, 8, 2, 3, 400, 1, 1),
        conv(5, 5, 1, 5, 160, 1, 0),
        conv(9, 9, 4, 7, 20, 1, 0),
    ] {
        let s = plan_layer(&layer, &cfg).unwrap();
        assert_eq!(
            s.counters.total_cycles,
            s.counters.total_macs.div_ceil(s.peak_macs_per_cycle()),
            "{layer:?}"
        );
        assert_eq!(s.utilization(), 1.0);
    }
}

fn scenario() -> (optisense_core::Schedule, optisense_core::mapper::TuningSummary, CoreConfig) {
    let cfg = CoreConfig::default();
    let s = plan_layer(&conv(32, 32, 3, 7, 64, 2, 3), &cfg).unwrap();
    let t = tuning_summary(&s, &UniformWeights::full_scale(4), &cfg).unwrap();
    (s, t, cfg)
}

fn energy_fields(k: &mut TimingEnergyConstants) -> [&mut f64; 8] {
    [
        &mut k.to_step_energy,
        &mut k.eo_step_energy,
        &mut k.vcsel_emission_energy,
        &mut k.bpd_detection_energy,
        &mut k.awc_conversion_energy,
        &mut k.kernel_bank_read_energy,
        &mut k.vom_remodulation_energy,
        &mut k.static_power,
    ]
}

#[test]
fn raising_any_energy_never_lowers_total() {
    let (s, t, cfg) = scenario();
    let base = estimate(&s, &t, &cfg.constants, OpsAccounting::TwoPerMac).unwrap();
    for i in 0..energy_fields(&mut cfg.constants.clone()).len() {
        let mut k = cfg.constants.clone();
        *energy_fields(&mut k)[i] *= 1.5;
        let r = estimate(&s, &t, &k, OpsAccounting::TwoPerMac).unwrap();
        assert!(r.total_energy >= base.total_energy, "field {i}");
    }
    let mut k = cfg.constants.clone();
    k.t_mac *= 2.0;
    let r = estimate(&s, &t, &k, OpsAccounting::TwoPerMac).unwrap();
    assert!(r.latency > base.latency);
}

#[test]
fn joint_energy_scaling_divides_efficiency() {
    let (s, t, cfg) = scenario();
    let base = estimate(&s, &t, &cfg.constants, OpsAccounting::TwoPerMac).unwrap();
    for c in [0.5, 1.75, 3.0, 10.0] {
        let k = cfg.constants.with_energy_scaled(c);
        // tuning energy comes from the same constants
        let mut scaled_cfg = cfg.clone();
        scaled_cfg.constants = k.clone();
        let t = tuning_summary(&s, &UniformWeights::full_scale(4), &scaled_cfg).unwrap();
        let r = estimate(&s, &t, &k, OpsAccounting::TwoPerMac).unwrap();
        let rel = (r.efficiency * c - base.efficiency).abs() / base.efficiency;
        assert!(rel < 1e-12, "c={c}: {rel}");
        assert_eq!(r.latency, base.latency);
    }
}

#[test]
fn breakdown_sums_to_total() {
    let (s, t, cfg) = scenario();
    let r = estimate(&s, &t, &cfg.constants, OpsAccounting::OnePerMac).unwrap();
    let sum: f64 = r.energy.entries().iter().map(|(_, e)| e).sum();
    assert!((sum - r.total_energy).abs() <= 1e-9 * r.total_energy);
    assert_eq!(r.ops, r.macs);
    let two = estimate(&s, &t, &cfg.constants, OpsAccounting::TwoPerMac).unwrap();
    assert_eq!(two.ops, 2 * r.macs);
    assert!((two.efficiency - 2.0 * r.efficiency).abs() <= 1e-9 * two.efficiency);
}
