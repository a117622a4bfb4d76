//! Temporary tuning harness. Not part of the suite; deleted after use.

use std::time::Instant;

use ndarray::Array2;
use smoothdyn::dynamics::{gen_heat_grid_dataset, simulate_heat_mesh, HeatGridConfig};
use smoothdyn::layers::{
    gcn_spec, r_uni_graph_spec, r_uni_mesh_spec, DecoderKind, LayerKind, LayerSpec, Model,
    ModelSpec, OperatorSource, FAITHFUL_T_MAX, RELAXED_T_MAX,
};
use smoothdyn::mesh::{flat_patch, icosphere, mesh_operators, perturb_positions, torus, TriMesh};
use smoothdyn::metrics::{nrmse, rayleigh_error};
use smoothdyn::train::{rollout, samples_from_trajectory, train, TrainConfig, TrainSample};
use smoothdyn::util::stream_rng;
use rand::Rng;

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn lie_uni_graph_spec(hidden: usize, layers: usize, seed: u64) -> ModelSpec {
    let mut specs = vec![LayerSpec::new(LayerKind::ZeroPad, 1, hidden)];
    for _ in 0..layers {
        specs.push(LayerSpec::new(LayerKind::LieUni, hidden, hidden).with_t_max(FAITHFUL_T_MAX));
    }
    specs.push(LayerSpec::new(LayerKind::MlpSin, hidden, 1));
    ModelSpec::new(specs, OperatorSource::GraphNormalized, seed)
}

#[test]
fn proto_crit4() {
    let started = Instant::now();
    let cfg = HeatGridConfig {
        count: 1000,
        sources: 5,
        tau: 0.5,
        side_mean: 8.0,
        side_std: 1.5,
        min_side: 5,
        t_end: 4.0,
        dt: 0.5,
        input_time: 2.0,
        target_time: 2.5,
        seed: 20260816,
        ..Default::default()
    };
    let raw = gen_heat_grid_dataset(&cfg).unwrap();
    println!("dataset generated in {:.1}s", started.elapsed().as_secs_f64());
    let all: Vec<TrainSample> =
        raw.iter().map(|s| TrainSample::from_heat(s).unwrap()).collect();
    let mut order: Vec<usize> = (0..all.len()).collect();
    {
        use rand::seq::SliceRandom;
        let mut rng = stream_rng(4, "crit4-split", 0);
        order.shuffle(&mut rng);
    }
    let n_val = all.len() / 5;
    let val: Vec<TrainSample> = order[..n_val].iter().map(|&i| all[i].clone()).collect();
    let tr: Vec<TrainSample> = order[n_val..].iter().map(|&i| all[i].clone()).collect();

    let hidden = 8usize;
    let layers = 2usize;
    let epochs = 30usize;
    let mut results: Vec<(String, Vec<f64>, Vec<f64>)> = Vec::new();
    for arch in ["relaxed", "lie", "gcn"] {
        let mut mses = Vec::new();
        let mut mres = Vec::new();
        for seed in 0..5u64 {
            let t0 = Instant::now();
            let spec = match arch {
                "relaxed" => r_uni_graph_spec(
                    1,
                    hidden,
                    layers,
                    RELAXED_T_MAX,
                    DecoderKind::MlpSin,
                    1,
                    100 + seed,
                )
                .unwrap(),
                "lie" => lie_uni_graph_spec(hidden, layers, 100 + seed),
                _ => gcn_spec(&[1, hidden, hidden, 1], OperatorSource::GraphNormalized, 100 + seed)
                    .unwrap(),
            };
            let mut model = Model::<f64>::build(spec).unwrap();
            let tc = TrainConfig {
                lr: 5e-3,
                epochs,
                batch_size: 32,
                bptt_rollout: 1,
                input_window: 1,
                seed: 100 + seed,
                ..Default::default()
            };
            let hist = train(&mut model, &tr, &val, &tc).unwrap();
            let last = hist.epochs.last().unwrap();
            let mre = (last.mean_pred_rq - last.mean_target_rq).abs();
            println!(
                "{arch} seed {seed}: params {} val_mse {:.4e} mre {:.4e} ({:.1}s, {} epochs)",
                model.param_count(),
                last.val_mse,
                mre,
                t0.elapsed().as_secs_f64(),
                hist.epochs.len(),
            );
            mses.push(last.val_mse);
            mres.push(mre);
        }
        results.push((arch.to_string(), mses, mres));
    }
    for (arch, mses, mres) in &results {
        println!(
            "{arch}: median val_mse {:.4e} median mre {:.4e}",
            median(mses.clone()),
            median(mres.clone())
        );
    }
    println!("crit4 total {:.1}s", started.elapsed().as_secs_f64());
}

fn bump_field(mesh: &TriMesh, count: usize, width_frac: f64, seed: u64, idx: u64) -> Array2<f64> {
    let mut rng = stream_rng(seed, "proto-bumps", idx);
    let n = mesh.positions.len();
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for p in &mesh.positions {
        for k in 0..3 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    let diag = (0..3).map(|k| (hi[k] - lo[k]).powi(2)).sum::<f64>().sqrt();
    let width = width_frac * diag;
    let mut u = Array2::zeros((n, 1));
    for _ in 0..count {
        let c = mesh.positions[rng.gen_range(0..n)];
        let amp = 0.5 + rng.gen::<f64>();
        for (i, p) in mesh.positions.iter().enumerate() {
            let d2 = (0..3).map(|k| (p[k] - c[k]).powi(2)).sum::<f64>();
            u[(i, 0)] += amp * (-d2 / (2.0 * width * width)).exp();
        }
    }
    u
}

#[test]
fn proto_crit8() {
    let started = Instant::now();
    let alpha = 1.0;
    let dt = 0.005;
    let train_steps = 40usize;

    let meshes: Vec<TriMesh> = vec![
        flat_patch(8, 8, 0.25),
        torus(12, 16, 1.0, 0.35),
        perturb_positions(&icosphere(2), 0.01, &mut stream_rng(8, "proto-perturb", 0)),
    ];
    let mut samples: Vec<TrainSample> = Vec::new();
    for (mi, mesh) in meshes.iter().enumerate() {
        let (ops, _) = mesh_operators(mesh, true).unwrap();
        for k in 0..2u64 {
            let u0 = bump_field(mesh, 3, 0.12, 8, (mi as u64) * 10 + k);
            let traj = simulate_heat_mesh(&ops, &u0, alpha, dt, train_steps).unwrap();
            samples.extend(samples_from_trajectory(ops.a_norm(), &traj, 1, 4, 2));
        }
    }
    println!("{} train samples built in {:.1}s", samples.len(), started.elapsed().as_secs_f64());
    let n_val = samples.len() / 5;
    let (val, tr) = samples.split_at(n_val);

    let held = icosphere(2);
    let (held_ops, _) = mesh_operators(&held, true).unwrap();
    let mut truths = Vec::new();
    for init in 0..5u64 {
        let u0 = bump_field(&held, 3, 0.12, 9, init);
        truths.push(simulate_heat_mesh(&held_ops, &u0, alpha, dt, 196).unwrap());
    }

    for arch in ["r_uni_mesh", "gcn"] {
        let t0 = Instant::now();
        let spec = match arch {
            "r_uni_mesh" => {
                r_uni_mesh_spec(1, 8, 2, 4, DecoderKind::GcnDecoder, 1, 200).unwrap()
            }
            _ => gcn_spec(&[1, 8, 8, 1], OperatorSource::MeshWeighted, 200).unwrap(),
        };
        let mut model = Model::<f64>::build(spec).unwrap();
        let tc = TrainConfig {
            lr: 5e-3,
            epochs: 30,
            batch_size: 8,
            bptt_rollout: 4,
            input_window: 1,
            seed: 200,
            ..Default::default()
        };
        let hist = train(&mut model, tr, val, &tc).unwrap();
        println!(
            "{arch}: trained {:.1}s, final val {:.4e}, diverged {:?}",
            t0.elapsed().as_secs_f64(),
            hist.final_val_mse().unwrap(),
            hist.diverged
        );
        let mut res = Vec::new();
        let mut nres = Vec::new();
        for truth in &truths {
            let pred = rollout(&model, held_ops.a_norm(), &truth.frames[..1], 196).unwrap();
            let used = pred.frames.len();
            let targets = &truth.frames[1..1 + used];
            let re = rayleigh_error(&pred.frames, targets, held_ops.a_norm()).unwrap();
            let nr = nrmse(&pred.frames, targets).unwrap();
            println!(
                "  init: frames {used} truncated {:?} re {:.4e} nrmse {:.4e}",
                pred.truncated_at, re.value, nr
            );
            res.push(re.value);
            nres.push(nr);
        }
        println!("{arch}: median re {:.4e} median nrmse {:.4e}", median(res), median(nres));
    }
    println!("crit8 total {:.1}s", started.elapsed().as_secs_f64());
}

#[test]
fn proto_gcn_debug() {
    let cfg = HeatGridConfig {
        count: 20,
        sources: 5,
        tau: 0.5,
        side_mean: 8.0,
        side_std: 1.5,
        min_side: 5,
        t_end: 4.0,
        dt: 0.5,
        input_time: 2.0,
        target_time: 2.5,
        seed: 20260816,
        ..Default::default()
    };
    let raw = gen_heat_grid_dataset(&cfg).unwrap();
    let samples: Vec<TrainSample> =
        raw.iter().map(|s| TrainSample::from_heat(s).unwrap()).collect();
    for seed in [100u64, 101, 102] {
        let spec =
            gcn_spec(&[1, 8, 8, 1], OperatorSource::GraphNormalized, seed).unwrap();
        let mut model = Model::<f64>::build(spec).unwrap();
        let mut tape = smoothdyn::autodiff::Tape::<f64>::new();
        let out = model
            .forward(&mut tape, &samples[0].a_norm, &samples[0].window[0])
            .unwrap();
        let y = tape.value(out);
        let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        println!("seed {seed}: init output norm {norm:.4e}");
        let tc = TrainConfig {
            lr: 5e-3,
            epochs: 5,
            batch_size: 8,
            bptt_rollout: 1,
            input_window: 1,
            seed,
            ..Default::default()
        };
        let hist = train(&mut model, &samples, &samples[..4].to_vec(), &tc).unwrap();
        for row in &hist.epochs {
            println!(
                "  epoch {} train {:.4e} val {:.4e} pred_rq {:.4e}",
                row.epoch, row.train_mse, row.val_mse, row.mean_pred_rq
            );
        }
    }
}

#[test]
fn proto_crit4_histories() {
    let cfg = HeatGridConfig {
        count: 1000,
        sources: 5,
        tau: 0.5,
        side_mean: 8.0,
        side_std: 1.5,
        min_side: 5,
        t_end: 4.0,
        dt: 0.5,
        input_time: 2.0,
        target_time: 2.5,
        seed: 20260816,
        ..Default::default()
    };
    let raw = gen_heat_grid_dataset(&cfg).unwrap();
    let all: Vec<TrainSample> =
        raw.iter().map(|s| TrainSample::from_heat(s).unwrap()).collect();
    let mut order: Vec<usize> = (0..all.len()).collect();
    {
        use rand::seq::SliceRandom;
        let mut rng = stream_rng(4, "crit4-split", 0);
        order.shuffle(&mut rng);
    }
    let n_val = all.len() / 5;
    let val: Vec<TrainSample> = order[..n_val].iter().map(|&i| all[i].clone()).collect();
    let tr: Vec<TrainSample> = order[n_val..].iter().map(|&i| all[i].clone()).collect();

    for arch in ["relaxed", "lie"] {
        for seed in 0..3u64 {
            let spec = match arch {
                "relaxed" => r_uni_graph_spec(
                    1, 8, 2, RELAXED_T_MAX, DecoderKind::MlpSin, 1, 100 + seed,
                )
                .unwrap(),
                _ => lie_uni_graph_spec(8, 2, 100 + seed),
            };
            let mut model = Model::<f64>::build(spec).unwrap();
            let tc = TrainConfig {
                lr: 5e-3,
                epochs: 30,
                batch_size: 32,
                bptt_rollout: 1,
                input_window: 1,
                seed: 100 + seed,
                ..Default::default()
            };
            let hist = train(&mut model, &tr, &val, &tc).unwrap();
            let vals: Vec<String> = hist
                .epochs
                .iter()
                .map(|r| format!("{:.1e}", r.val_mse))
                .collect();
            println!("{arch} s{seed}: {}", vals.join(" "));
        }
    }
}

fn run_arch(
    tr: &[TrainSample],
    val: &[TrainSample],
    spec: ModelSpec,
    seed: u64,
    lr: f64,
    epochs: usize,
) -> (f64, f64) {
    let mut model = Model::<f64>::build(spec).unwrap();
    let tc = TrainConfig {
        lr,
        epochs,
        batch_size: 32,
        bptt_rollout: 1,
        input_window: 1,
        seed,
        ..Default::default()
    };
    let hist = train(&mut model, tr, val, &tc).unwrap();
    let last = hist.epochs.last().unwrap();
    (last.val_mse, (last.mean_pred_rq - last.mean_target_rq).abs())
}

fn relaxed_spec_depth(hidden: usize, depth: usize, decoder: DecoderKind, seed: u64) -> ModelSpec {
    r_uni_graph_spec(1, hidden, depth, RELAXED_T_MAX, decoder, 1, seed).unwrap()
}

fn lie_spec_depth(hidden: usize, depth: usize, decoder: DecoderKind, seed: u64) -> ModelSpec {
    let mut specs = vec![LayerSpec::new(LayerKind::ZeroPad, 1, hidden)];
    for _ in 0..depth {
        specs.push(LayerSpec::new(LayerKind::LieUni, hidden, hidden).with_t_max(FAITHFUL_T_MAX));
    }
    specs.push(match decoder {
        DecoderKind::MlpSin => LayerSpec::new(LayerKind::MlpSin, hidden, 1),
        DecoderKind::GcnDecoder => LayerSpec::new(LayerKind::GcnDecoder, hidden, 1),
    });
    ModelSpec::new(specs, OperatorSource::GraphNormalized, seed)
}

fn crit4_dataset(cfg: &HeatGridConfig) -> (Vec<TrainSample>, Vec<TrainSample>) {
    let raw = gen_heat_grid_dataset(cfg).unwrap();
    let all: Vec<TrainSample> =
        raw.iter().map(|s| TrainSample::from_heat(s).unwrap()).collect();
    let mut order: Vec<usize> = (0..all.len()).collect();
    {
        use rand::seq::SliceRandom;
        let mut rng = stream_rng(4, "crit4-split", 0);
        order.shuffle(&mut rng);
    }
    let n_val = all.len() / 5;
    let val = order[..n_val].iter().map(|&i| all[i].clone()).collect();
    let tr = order[n_val..].iter().map(|&i| all[i].clone()).collect();
    (tr, val)
}

#[test]
fn proto_crit4_v1() {
    let cfg = HeatGridConfig {
        count: 500,
        sources: 5,
        tau: 0.5,
        side_mean: 8.0,
        side_std: 1.5,
        min_side: 5,
        t_end: 4.0,
        dt: 0.5,
        input_time: 2.0,
        target_time: 2.5,
        seed: 20260816,
        ..Default::default()
    };
    let (tr, val) = crit4_dataset(&cfg);
    for seed in 0..2u64 {
        let (m, r) = run_arch(
            &tr, &val,
            relaxed_spec_depth(8, 4, DecoderKind::GcnDecoder, 100 + seed),
            100 + seed, 5e-3, 25,
        );
        println!("relaxed d4 s{seed}: mse {m:.3e} mre {r:.3e}");
        let (m, r) = run_arch(
            &tr, &val,
            lie_spec_depth(8, 2, DecoderKind::GcnDecoder, 100 + seed),
            100 + seed, 5e-3, 25,
        );
        println!("lie d2 s{seed}: mse {m:.3e} mre {r:.3e}");
    }
}

#[test]
fn proto_crit4_v2() {
    let base = HeatGridConfig {
        count: 500,
        sources: 5,
        tau: 0.5,
        side_mean: 8.0,
        side_std: 1.5,
        min_side: 5,
        t_end: 4.0,
        dt: 0.5,
        input_time: 2.0,
        target_time: 2.5,
        seed: 20260816,
        ..Default::default()
    };
    let two_step = HeatGridConfig { target_time: 3.0, ..base.clone() };
    for (tag, cfg) in [("1step", &base), ("2step", &two_step)] {
        let (tr, val) = crit4_dataset(cfg);
        for seed in 0..2u64 {
            let (m, r) = run_arch(
                &tr, &val,
                relaxed_spec_depth(8, 6, DecoderKind::GcnDecoder, 100 + seed),
                100 + seed, 5e-3, 25,
            );
            println!("{tag} relaxed d6 s{seed}: mse {m:.3e} mre {r:.3e}");
            let (m, r) = run_arch(
                &tr, &val,
                lie_spec_depth(8, 2, DecoderKind::GcnDecoder, 100 + seed),
                100 + seed, 5e-3, 25,
            );
            println!("{tag} lie d2 s{seed}: mse {m:.3e} mre {r:.3e}");
        }
    }
}

#[test]
fn proto_crit4_v3() {
    let cfg = HeatGridConfig {
        count: 500,
        sources: 5,
        tau: 0.5,
        side_mean: 8.0,
        side_std: 1.5,
        min_side: 5,
        t_end: 4.0,
        dt: 0.5,
        input_time: 2.0,
        target_time: 2.5,
        seed: 20260816,
        ..Default::default()
    };
    let (tr, val) = crit4_dataset(&cfg);
    for seed in 0..2u64 {
        let (m, r) = run_arch(
            &tr, &val,
            relaxed_spec_depth(8, 4, DecoderKind::GcnDecoder, 100 + seed),
            100 + seed, 5e-3, 100,
        );
        println!("relaxed d4 e100 s{seed}: mse {m:.3e} mre {r:.3e}");
        let (m, r) = run_arch(
            &tr, &val,
            lie_spec_depth(8, 2, DecoderKind::GcnDecoder, 100 + seed),
            100 + seed, 5e-3, 100,
        );
        println!("lie d2 e100 s{seed}: mse {m:.3e} mre {r:.3e}");
    }
}

#[test]
fn proto_crit4_v4() {
    let cfg = HeatGridConfig {
        count: 500,
        sources: 5,
        tau: 0.5,
        side_mean: 8.0,
        side_std: 1.5,
        min_side: 5,
        t_end: 4.0,
        dt: 0.5,
        input_time: 2.0,
        target_time: 2.5,
        seed: 20260816,
        ..Default::default()
    };
    let (tr, val) = crit4_dataset(&cfg);
    for lr in [1e-2, 2e-2, 4e-2] {
        for seed in 0..3u64 {
            let (m, r) = run_arch(
                &tr, &val,
                relaxed_spec_depth(8, 2, DecoderKind::MlpSin, 100 + seed),
                100 + seed, lr, 25,
            );
            println!("lr {lr} relaxed s{seed}: mse {m:.3e} mre {r:.3e}");
            let (m, r) = run_arch(
                &tr, &val,
                lie_spec_depth(8, 2, DecoderKind::MlpSin, 100 + seed),
                100 + seed, lr, 25,
            );
            println!("lr {lr} lie s{seed}: mse {m:.3e} mre {r:.3e}");
        }
    }
}

#[test]
fn proto_crit4_v5() {
    let cfg = HeatGridConfig {
        count: 500,
        sources: 5,
        tau: 0.5,
        side_mean: 8.0,
        side_std: 1.5,
        min_side: 5,
        t_end: 4.0,
        dt: 0.5,
        input_time: 2.0,
        target_time: 2.5,
        seed: 20260816,
        ..Default::default()
    };
    let (tr, val) = crit4_dataset(&cfg);
    for (tag, clip) in [("clip", Some(1.0)), ("noclip", None)] {
        for seed in 0..2u64 {
            for (arch, spec) in [
                ("relaxed d4", relaxed_spec_depth(8, 4, DecoderKind::GcnDecoder, 100 + seed)),
                ("lie d2", lie_spec_depth(8, 2, DecoderKind::GcnDecoder, 100 + seed)),
            ] {
                let mut model = Model::<f64>::build(spec).unwrap();
                let tc = TrainConfig {
                    lr: 5e-3,
                    epochs: 60,
                    batch_size: 32,
                    bptt_rollout: 1,
                    input_window: 1,
                    seed: 100 + seed,
                    grad_clip: clip,
                    ..Default::default()
                };
                let hist = train(&mut model, &tr, &val, &tc).unwrap();
                let vals: Vec<String> = hist
                    .epochs
                    .iter()
                    .step_by(5)
                    .map(|r| format!("{:.2e}/{:.0e}", r.val_mse, (r.mean_pred_rq - r.mean_target_rq).abs()))
                    .collect();
                println!("{tag} {arch} s{seed}: {}", vals.join(" "));
            }
        }
    }
}

#[test]
fn proto_crit4_v6() {
    let cfg = HeatGridConfig {
        count: 500,
        sources: 5,
        tau: 0.5,
        side_mean: 8.0,
        side_std: 1.5,
        min_side: 5,
        t_end: 4.0,
        dt: 0.5,
        input_time: 2.0,
        target_time: 2.5,
        seed: 20260816,
        ..Default::default()
    };
    let (tr, val) = crit4_dataset(&cfg);
    for lr in [2e-2_f64] {
        for seed in 0..3u64 {
            let (m, r) = run_arch(
                &tr, &val,
                relaxed_spec_depth(8, 4, DecoderKind::MlpSin, 100 + seed),
                100 + seed, lr, 20,
            );
            println!("lr {lr} relaxed d4 s{seed}: mse {m:.3e} mre {r:.3e}");
            let (m, r) = run_arch(
                &tr, &val,
                lie_spec_depth(8, 2, DecoderKind::MlpSin, 100 + seed),
                100 + seed, lr, 20,
            );
            println!("lr {lr} lie d2 s{seed}: mse {m:.3e} mre {r:.3e}");
        }
    }
}

#[test]
fn proto_crit4_v7() {
    let cfg = HeatGridConfig {
        count: 500,
        sources: 5,
        tau: 0.5,
        side_mean: 8.0,
        side_std: 1.5,
        min_side: 5,
        t_end: 4.0,
        dt: 0.5,
        input_time: 2.0,
        target_time: 2.5,
        seed: 20260816,
        ..Default::default()
    };
    let (tr, val) = crit4_dataset(&cfg);
    let mut table: Vec<(String, Vec<f64>, Vec<f64>)> = Vec::new();
    for (arch, depth) in [("relaxed", 4usize), ("lie", 2)] {
        let mut mses = Vec::new();
        let mut mres = Vec::new();
        for seed in 0..5u64 {
            let spec = match arch {
                "relaxed" => relaxed_spec_depth(8, depth, DecoderKind::MlpSin, 100 + seed),
                _ => lie_spec_depth(8, depth, DecoderKind::MlpSin, 100 + seed),
            };
            let (m, r) = run_arch(&tr, &val, spec, 100 + seed, 2e-2, 35);
            println!("{arch} d{depth} s{seed}: mse {m:.3e} mre {r:.3e}");
            mses.push(m);
            mres.push(r);
        }
        table.push((arch.to_string(), mses, mres));
    }
    for (arch, mses, mres) in &table {
        println!("{arch}: median mse {:.3e} median mre {:.3e}", median(mses.clone()), median(mres.clone()));
    }
}

#[test]
fn proto_crit4_v8() {
    let base = HeatGridConfig {
        count: 500,
        sources: 5,
        tau: 0.5,
        side_mean: 8.0,
        side_std: 1.5,
        min_side: 5,
        t_end: 4.0,
        dt: 0.5,
        input_time: 2.0,
        target_time: 4.0,
        seed: 20260816,
        ..Default::default()
    };
    let (tr, val) = crit4_dataset(&base);
    for seed in 0..3u64 {
        let (m, r) = run_arch(
            &tr, &val,
            relaxed_spec_depth(8, 4, DecoderKind::GcnDecoder, 100 + seed),
            100 + seed, 5e-3, 40,
        );
        println!("H4 relaxed d4 s{seed}: mse {m:.3e} mre {r:.3e}");
        let (m, r) = run_arch(
            &tr, &val,
            lie_spec_depth(8, 2, DecoderKind::GcnDecoder, 100 + seed),
            100 + seed, 5e-3, 40,
        );
        println!("H4 lie d2 s{seed}: mse {m:.3e} mre {r:.3e}");
    }
}

#[test]
fn proto_crit4_v9() {
    let base = HeatGridConfig {
        count: 500,
        sources: 5,
        tau: 0.5,
        side_mean: 8.0,
        side_std: 1.5,
        min_side: 5,
        t_end: 4.0,
        dt: 0.5,
        input_time: 2.0,
        target_time: 4.0,
        seed: 20260816,
        ..Default::default()
    };
    let (tr, val) = crit4_dataset(&base);
    for seed in 0..3u64 {
        let (m, r) = run_arch(
            &tr, &val,
            gcn_spec(&[1, 8, 8, 1], OperatorSource::GraphNormalized, 100 + seed).unwrap(),
            100 + seed, 5e-3, 40,
        );
        println!("H4 gcn s{seed}: mse {m:.3e} mre {r:.3e}");
    }
}

#[test]
fn proto_crit4_v10() {
    let base = HeatGridConfig {
        count: 500,
        sources: 20,
        tau: 0.5,
        side_mean: 10.0,
        side_std: 2.0,
        min_side: 5,
        t_end: 10.0,
        dt: 0.5,
        input_time: 3.0,
        target_time: 4.0,
        seed: 20260816,
        ..Default::default()
    };
    let (tr, val) = crit4_dataset(&base);
    for seed in 0..3u64 {
        let (m, r) = run_arch(
            &tr, &val,
            relaxed_spec_depth(8, 4, DecoderKind::GcnDecoder, 100 + seed),
            100 + seed, 5e-3, 40,
        );
        println!("F relaxed d4 s{seed}: mse {m:.3e} mre {r:.3e}");
        let (m, r) = run_arch(
            &tr, &val,
            lie_spec_depth(8, 2, DecoderKind::GcnDecoder, 100 + seed),
            100 + seed, 5e-3, 40,
        );
        println!("F lie d2 s{seed}: mse {m:.3e} mre {r:.3e}");
        let (m, r) = run_arch(
            &tr, &val,
            gcn_spec(&[1, 8, 8, 1], OperatorSource::GraphNormalized, 100 + seed).unwrap(),
            100 + seed, 5e-3, 40,
        );
        println!("F gcn s{seed}: mse {m:.3e} mre {r:.3e}");
    }
}

#[test]
fn proto_crit4_full() {
    let t0 = std::time::Instant::now();
    let base = HeatGridConfig {
        count: 1000,
        sources: 20,
        tau: 0.5,
        side_mean: 10.0,
        side_std: 2.0,
        min_side: 5,
        t_end: 10.0,
        dt: 0.5,
        input_time: 3.0,
        target_time: 4.0,
        seed: 20260816,
        ..Default::default()
    };
    let (tr, val) = crit4_dataset(&base);
    println!("dataset: {} train / {} val ({:.1}s)", tr.len(), val.len(), t0.elapsed().as_secs_f64());
    let mut mses = vec![vec![]; 3];
    let mut mres = vec![vec![]; 3];
    for seed in 100..105u64 {
        for (ai, spec) in [
            relaxed_spec_depth(8, 4, DecoderKind::GcnDecoder, seed),
            lie_spec_depth(8, 2, DecoderKind::GcnDecoder, seed),
            gcn_spec(&[1, 8, 8, 1], OperatorSource::GraphNormalized, seed).unwrap(),
        ]
        .into_iter()
        .enumerate()
        {
            let (m, r) = run_arch(&tr, &val, spec, seed, 5e-3, 40);
            println!("full a{ai} s{seed}: mse {m:.4e} mre {r:.4e} ({:.1}s)", t0.elapsed().as_secs_f64());
            mses[ai].push(m);
            mres[ai].push(r);
        }
    }
    for ai in 0..3 {
        println!(
            "full arch {ai}: median mse {:.4e} median mre {:.4e}",
            median(mses[ai].clone()), median(mres[ai].clone())
        );
    }
    println!("full total {:.1}s", t0.elapsed().as_secs_f64());
}

#[test]
fn proto_crit4_v11() {
    let base = HeatGridConfig {
        count: 500,
        sources: 20,
        tau: 0.5,
        side_mean: 10.0,
        side_std: 2.0,
        min_side: 5,
        t_end: 10.0,
        dt: 0.5,
        input_time: 3.0,
        target_time: 4.0,
        seed: 20260816,
        ..Default::default()
    };
    let (tr, val) = crit4_dataset(&base);
    for lr in [1e-2, 2e-2] {
        for seed in 100..103u64 {
            let (m, r) = run_arch(
                &tr, &val,
                relaxed_spec_depth(8, 4, DecoderKind::GcnDecoder, seed),
                seed, lr, 40,
            );
            println!("v11 lr{lr} relaxed s{seed}: mse {m:.4e} mre {r:.4e}");
            let (m, r) = run_arch(
                &tr, &val,
                lie_spec_depth(8, 2, DecoderKind::GcnDecoder, seed),
                seed, lr, 40,
            );
            println!("v11 lr{lr} lie s{seed}: mse {m:.4e} mre {r:.4e}");
        }
    }
}

#[test]
fn proto_crit4_full20() {
    let t0 = std::time::Instant::now();
    let base = HeatGridConfig {
        count: 1000,
        sources: 20,
        tau: 0.5,
        side_mean: 10.0,
        side_std: 2.0,
        min_side: 5,
        t_end: 10.0,
        dt: 0.5,
        input_time: 3.0,
        target_time: 4.0,
        seed: 20260816,
        ..Default::default()
    };
    let (tr, val) = crit4_dataset(&base);
    let mut mses = vec![vec![]; 3];
    let mut mres = vec![vec![]; 3];
    for seed in 100..105u64 {
        for (ai, spec) in [
            relaxed_spec_depth(8, 4, DecoderKind::GcnDecoder, seed),
            lie_spec_depth(8, 2, DecoderKind::GcnDecoder, seed),
            gcn_spec(&[1, 8, 8, 1], OperatorSource::GraphNormalized, seed).unwrap(),
        ]
        .into_iter()
        .enumerate()
        {
            let (m, r) = run_arch(&tr, &val, spec, seed, 5e-3, 20);
            println!("f20 a{ai} s{seed}: mse {m:.4e} mre {r:.4e} ({:.1}s)", t0.elapsed().as_secs_f64());
            mses[ai].push(m);
            mres[ai].push(r);
        }
    }
    for ai in 0..3 {
        println!(
            "f20 arch {ai}: median mse {:.4e} median mre {:.4e}",
            median(mses[ai].clone()), median(mres[ai].clone())
        );
    }
}
