//! Acceptance criteria 1 to 9. Runs without the libtest harness so that the
//! per-criterion verdict lines are always printed.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use optisense_cli::run::run;
use optisense_cli::ConfigLayers;
use optisense_core::device::{awc_convert, mr_transmission, vam_encode, AwcConfig, MrConfig, MrState, TernaryCode, VamConfig};
use optisense_core::fixture::Fixture;
use optisense_core::inference::{evaluate, Dataset, FirstLayer, FirstLayerEngine, QuantModel};
use optisense_core::mapper::{macs_per_cycle, KernelId};
use optisense_core::pixel::sense;
use optisense_core::{arm_mac, plan_layer, ConvSpec, CoreConfig, Frame, LayerSpec, MlpSpec, Mode, Plane, QuantWeight};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const ROOT: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../..");

fn fixtures(rel: &str) -> PathBuf {
    Path::new(ROOT).join("fixtures").join(rel)
}

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn mapping_formula() -> Outcome {
    let got: Vec<u64> = [3, 5, 7].iter().map(|&k| macs_per_cycle(80, k).unwrap()).collect();
    check(got == [3600, 2000, 3920], format!("K=3/5/7 -> {got:?} MACs/cycle"))
}

/// Direct convolution of ternary planes with integer kernels.
fn naive_conv(planes: &[Plane<TernaryCode>], w: &[i32], s: &ConvSpec) -> Vec<i64> {
    let (oh, ow, k) = (s.out_height(), s.out_width(), s.kernel);
    let mut out = Vec::with_capacity(s.out_channels * oh * ow);
    for o in 0..s.out_channels {
        for y in 0..oh {
            for x in 0..ow {
                let mut acc = 0i64;
                for (c, plane) in planes.iter().enumerate() {
                    for ky in 0..k {
                        for kx in 0..k {
                            let iy = (y * s.stride + ky) as isize - s.padding as isize;
                            let ix = (x * s.stride + kx) as isize - s.padding as isize;
                            if iy >= 0 && ix >= 0 && (iy as usize) < s.in_height && (ix as usize) < s.in_width {
                                let a = plane.get(ix as usize, iy as usize).value() as i64;
                                acc += a * w[((o * s.in_channels + c) * k + ky) * k + kx] as i64;
                            }
                        }
                    }
                }
                out.push(acc);
            }
        }
    }
    out
}

fn oracle_equivalence() -> Outcome {
    let cfg = CoreConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut compared = 0usize;
    for k in [3, 5, 7] {
        let spec = ConvSpec {
            in_height: 16,
            in_width: 16,
            in_channels: 1,
            kernel: k,
            out_channels: 8,
            stride: 1,
            padding: k / 2,
        };
        let master: Vec<f64> = (0..8 * k * k).map(|_| rng.random_range(-1.0..1.0)).collect();
        let layer = FirstLayer::quantize(spec, master, vec![0.0; 8], 1.0, 4).unwrap();
        let ints: Vec<i32> = layer.kernels.weights.iter().map(|w| w.value()).collect();
        let engine = FirstLayerEngine::new(&layer, &cfg, Mode::Ideal, 0).unwrap();
        for f in 0..100 {
            let px: Vec<f64> = (0..256).map(|_| rng.random_range(0.0..=1.0)).collect();
            let frame = Frame::new(16, 16, px).unwrap();
            let codes = sense(&frame, &cfg.pixel, &cfg.vam).unwrap();
            let got = engine.run_frame(&frame, f).unwrap();
            let want = naive_conv(std::slice::from_ref(&codes), &ints, &spec);
            if got.iter().zip(&want).any(|(g, w)| *g != *w as f64) {
                return Err(format!("K={k} frame {f} differs from the direct convolution"));
            }
            compared += want.len();
        }
    }
    let mut pairs = 0;
    for a0 in TernaryCode::ALL {
        for a1 in TernaryCode::ALL {
            for w0 in -15..=15 {
                for w1 in -15..=15 {
                    let w = [QuantWeight::new(w0, 4).unwrap(), QuantWeight::new(w1, 4).unwrap()];
                    let r = arm_mac(&[a0, a1], &w, &cfg, Mode::Ideal, 0).unwrap();
                    let want = a0.value() as i32 * w0 + a1.value() as i32 * w1;
                    if r.units != want as f64 {
                        return Err(format!("arm_mac({a0:?},{a1:?};{w0},{w1}) = {}", r.units));
                    }
                    pairs += 1;
                }
            }
        }
    }
    Ok(format!(
        "300 frames x K=3/5/7, {compared} outputs exact; {pairs} two-element arm cases exact"
    ))
}

fn threshold_truth_table() -> Outcome {
    let cfg = VamConfig::default();
    let n = 10_000;
    let mut prev = 0u8;
    for i in 0..=n {
        let v = cfg.supply * i as f64 / n as f64;
        let c = vam_encode(v, &cfg).unwrap().value();
        let want = if v > 0.32 {
            2
        } else if v > 0.16 {
            1
        } else {
            0
        };
        if c != want || c < prev {
            return Err(format!("v={v}: code {c}, expected {want}"));
        }
        prev = c;
    }
    let cases = [(0.40, 2), (0.32, 1), (0.2, 1), (0.16, 0), (0.05, 0)];
    for (v, want) in cases {
        if vam_encode(v, &cfg).unwrap().value() != want {
            return Err(format!("v={v} should encode {want}"));
        }
    }
    Ok(format!("{} voltages, monotone, boundaries to the lower code", n + 1))
}

fn awc_levels() -> Outcome {
    let ideal = AwcConfig::ideal(4);
    for code in 0..16u32 {
        let i = awc_convert(code, &ideal, 0).unwrap();
        if i != code as f64 {
            return Err(format!("code {code} -> {i}"));
        }
    }
    let mut worked = AwcConfig::ideal(4);
    worked.gain_error_per_bit = vec![0.0, 0.0, 0.0, 0.05];
    let i = awc_convert(8, &worked, 0).unwrap();
    check((i - 8.4).abs() < 1e-12, format!("16 exact levels; code 8 with +5% MSB error -> {i}"))
}

fn mr_half_depth() -> Outcome {
    let cfg = MrConfig::default();
    let state = MrState::on_resonance(1550.0, &cfg);
    let fwhm = state.fwhm();
    if (fwhm - 0.31).abs() > 1e-12 {
        return Err(format!("FWHM {fwhm} nm"));
    }
    let mid = 0.5 * (1.0 + cfg.extinction_floor);
    let mut worst = 0.0f64;
    for side in [-0.5, 0.5] {
        let t = mr_transmission(&state, 1550.0 + side * fwhm).unwrap();
        worst = worst.max((t - mid).abs() / mid);
    }
    check(worst < 1e-9, format!("FWHM {fwhm:.2} nm, half-depth error {worst:.1e} relative"))
}

fn performance_calibration() -> Outcome {
    let layers = ConfigLayers::load(&fixtures("configs/resnet18_conv1.cfg")).map_err(|e| e.to_string())?;
    let cfg = layers.resolve().map_err(|e| e.to_string())?;
    if cfg.constants_name.as_deref() != Some("paper_cal") {
        return Err(format!("constants fixture {:?}", cfg.constants_name));
    }
    let p = run(&cfg).map_err(|e| e.to_string())?.report.perf;
    let eff = p.efficiency / 1e12;
    let ok = p.cycle_time == 55.8e-12 && p.frame_rate >= 1000.0 && (eff - 6.68).abs() <= 0.05 * 6.68;
    check(
        ok,
        format!(
            "t_mac {} ps, {:.1} fps, {eff:.3} TOp/s/W (target 6.68 +/- 5%)",
            p.cycle_time * 1e12,
            p.frame_rate
        ),
    )
}

fn golden_accuracy() -> Outcome {
    let layers = ConfigLayers::load(&fixtures("configs/mnist.cfg")).map_err(|e| e.to_string())?;
    let cfg = layers.resolve().map_err(|e| e.to_string())?;
    let report = run(&cfg).map_err(|e| e.to_string())?.report;
    let g = report.golden.ok_or("no golden check in the report")?;
    check(
        g.matches,
        format!("ideal {}-bit: {} correct, golden {}", g.bit_width, g.correct, g.expected_correct),
    )
}

fn gain_error_monotonicity() -> Outcome {
    let model = QuantModel::from_fixture(&Fixture::open(fixtures("tiny_cnn")).unwrap(), Some(4)).unwrap();
    let data = Dataset::from_fixture(&Fixture::open(fixtures("mnist_subset")).unwrap()).unwrap();
    const SEEDS: u64 = 20;
    let mut means = Vec::new();
    for g in [0.0, 0.02, 0.05, 0.1] {
        let mut cfg = CoreConfig::default();
        cfg.noise.awc_mismatch_sigma = g;
        let total: u64 = (0..SEEDS)
            .map(|s| evaluate(&data, &model, &cfg, Mode::Noisy, s).unwrap().correct)
            .sum();
        means.push(total as f64 / SEEDS as f64);
    }
    let monotone = means.windows(2).all(|w| w[1] <= w[0]);
    check(
        monotone,
        format!("mean correct over {SEEDS} seeds at g = 0/0.02/0.05/0.1: {means:?}"),
    )
}

fn random_layer(rng: &mut ChaCha8Rng) -> LayerSpec {
    loop {
        let l = if rng.random_bool(0.2) {
            LayerSpec::Mlp(MlpSpec {
                fan_in: rng.random_range(1..120),
                outputs: rng.random_range(1..300),
            })
        } else {
            LayerSpec::Conv(ConvSpec {
                in_height: rng.random_range(1..14),
                in_width: rng.random_range(1..14),
                in_channels: rng.random_range(1..4),
                kernel: [3, 5, 7][rng.random_range(0..3)],
                out_channels: rng.random_range(1..250),
                stride: rng.random_range(1..4),
                padding: rng.random_range(0..4),
            })
        };
        if l.validate().is_ok() {
            return l;
        }
    }
}

fn enumerate_pairs(layer: &LayerSpec) -> BTreeMap<(KernelId, u64), usize> {
    let (instances, positions) = match layer {
        LayerSpec::Conv(c) => {
            let oh = (c.in_height + 2 * c.padding - c.kernel) / c.stride + 1;
            let ow = (c.in_width + 2 * c.padding - c.kernel) / c.stride + 1;
            let ks: Vec<KernelId> = (0..c.out_channels)
                .flat_map(|o| (0..c.in_channels).map(move |i| KernelId::new(o, i)))
                .collect();
            (ks, (oh * ow) as u64)
        }
        LayerSpec::Mlp(m) => {
            let ks = (0..m.outputs)
                .flat_map(|o| (0..m.fan_in.div_ceil(9)).map(move |c| KernelId::new(o, c)))
                .collect();
            (ks, 1)
        }
    };
    let mut m = BTreeMap::new();
    for k in instances {
        for t in 0..positions {
            *m.entry((k, t)).or_insert(0) += 1;
        }
    }
    m
}

fn schedule_coverage() -> Outcome {
    let cfg = CoreConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut exact_fits = 0;
    for i in 0..50 {
        let layer = random_layer(&mut rng);
        let s = plan_layer(&layer, &cfg).unwrap();
        let mut planned = BTreeMap::new();
        for p in s.pairs() {
            *planned.entry(p).or_insert(0usize) += 1;
        }
        if planned != enumerate_pairs(&layer) {
            return Err(format!("layer {i} ({layer:?}): pair multiset differs"));
        }
        let bound = s.counters.total_macs.div_ceil(s.peak_macs_per_cycle());
        if s.counters.total_cycles < bound {
            return Err(format!("layer {i}: {} cycles < bound {bound}", s.counters.total_cycles));
        }
    }
    for layer in [
        LayerSpec::Conv(ConvSpec {
            in_height: 3,
            in_width: 3,
            in_channels: 1,
            kernel: 3,
            out_channels: 400,
            stride: 1,
            padding: 0,
        }),
        LayerSpec::Conv(ConvSpec {
            in_height: 9,
            in_width: 9,
            in_channels: 2,
            kernel: 5,
            out_channels: 40,
            stride: 2,
            padding: 0,
        }),
    ] {
        let s = plan_layer(&layer, &cfg).unwrap();
        if s.counters.total_cycles != s.counters.total_macs.div_ceil(s.peak_macs_per_cycle()) {
            return Err(format!("exact-fit layer {layer:?} misses the bound"));
        }
        exact_fits += 1;
    }
    Ok(format!("50 random layers match enumeration; {exact_fits} exact-fit layers hit the bound"))
}

fn simulate_payload(out: &Path, threads: usize) -> Result<String, String> {
    let status = Command::new(env!("CARGO_BIN_EXE_optisense"))
        .args(["--threads", &threads.to_string(), "simulate", "--config"])
        .arg(fixtures("configs/mnist.cfg"))
        .args([
            "--set",
            "run.mode=noisy",
            "--set",
            "run.seed=17",
            "--set",
            "core.noise.awc_mismatch_sigma=0.05",
            "--set",
            "core.noise.bpd_noise_sigma=0.3",
            "--out",
        ])
        .arg(out)
        .output()
        .map_err(|e| e.to_string())?;
    if !status.status.success() {
        return Err(String::from_utf8_lossy(&status.stderr).into_owned());
    }
    let text = std::fs::read_to_string(out.join("report.json")).map_err(|e| e.to_string())?;
    Ok(text.lines().filter(|l| !l.contains("\"generated_at\"")).collect::<Vec<_>>().join("\n"))
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let a = simulate_payload(&dir.path().join("a"), 1)?;
    let b = simulate_payload(&dir.path().join("b"), 1)?;
    let c = simulate_payload(&dir.path().join("c"), 4)?;
    check(
        a == b && a == c,
        format!("noisy simulate x3 (1, 1, 4 threads): {} byte payloads identical", a.len()),
    )
}

type Check = fn() -> Outcome;

fn main() {
    let criteria: [(&str, Check); 10] = [
        ("1 mapping formula", mapping_formula),
        ("2 oracle equivalence", oracle_equivalence),
        ("3 threshold truth table", threshold_truth_table),
        ("4 AWC levels", awc_levels),
        ("5 MR half depth", mr_half_depth),
        ("6 performance calibration", performance_calibration),
        ("7a golden accuracy", golden_accuracy),
        ("7b gain-error monotonicity", gain_error_monotonicity),
        ("8 schedule coverage", schedule_coverage),
        ("9 determinism", determinism),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {name}: PASS ({secs:.1} s) {detail}"),
            Err(detail) => {
                failed += 1;
                println!("criterion {name}: FAIL ({secs:.1} s) {detail}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all acceptance criteria passed");
}
