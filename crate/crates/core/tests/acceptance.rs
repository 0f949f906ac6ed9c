//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs with its own harness so the lines always reach the test output.
//! Every oracle here is computed independently of the library code under
//! test.

use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use fewshot_asd::anomaly::{anomaly_score, flat_prior, outlier_exposure_loss, Aggregation};
use fewshot_asd::autodiff::{Graph, ParameterVector, Tensor};
use fewshot_asd::benchgen::{self, BenchmarkSpec, Counts, MachineData, SECTION_TASK};
use fewshot_asd::episodic::{
    class_likelihood, episode_loss, forward_episode, sample_episode, DenseEncoder, Distance, Encoder, EpisodeBatch,
    EpisodeSizes, IdentityEncoder, InputNorm, PrototypeSet,
};
use fewshot_asd::eval::{auroc, pauroc, EvalReport};
use fewshot_asd::frontend::{AudioClip, Featurizer, FrontendConfig};
use fewshot_asd::meta::{step_gradients, train, MetaSchedule, OptimizerConfig, OptimizerKind, TrainSettings};
use fewshot_asd::pipeline::{self, Workspace};
use fewshot_asd::RunConfig;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

// ---------------------------------------------------------------- gradients

fn random_rows(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..d).map(|_| rng.random_range(-2.0..2.0)).collect()).collect()
}

/// Central differences of `f` at every coordinate, with the relative error
/// `|a - n| / max(1, |n|)` against the analytic gradient.
fn worst_relative_error(
    params: &ParameterVector<f64>,
    analytic: &[f64],
    f: &dyn Fn(&ParameterVector<f64>) -> f64,
) -> f64 {
    let h = 1e-6;
    let base = params.flat();
    let mut probe = params.clone();
    let mut worst: f64 = 0.0;
    for i in 0..base.len() {
        let mut x = base.clone();
        x[i] = base[i] + h;
        probe.set_flat(&x).unwrap();
        let up = f(&probe);
        x[i] = base[i] - h;
        probe.set_flat(&x).unwrap();
        let down = f(&probe);
        let numeric = (up - down) / (2.0 * h);
        worst = worst.max((analytic[i] - numeric).abs() / numeric.abs().max(1.0));
    }
    worst
}

fn gradient_correctness() -> Outcome {
    let start = Instant::now();
    let dim = 12;
    let enc = DenseEncoder::new(vec![dim, 10, 5], InputNorm::PerWindow).unwrap();
    let mut worst: f64 = 0.0;
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let params: ParameterVector<f64> = enc.init_params(&mut rng);
        let rows = random_rows(&mut rng, 3 * 5 + 3, dim);
        let r: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
        let batch = EpisodeBatch {
            support: vec![r[0..2].to_vec(), r[2..4].to_vec(), r[4..6].to_vec()],
            query: vec![r[6..9].to_vec(), r[9..12].to_vec(), r[12..15].to_vec()],
        };
        let outliers = r[15..].to_vec();

        // Value and analytic gradient of the task loss (`oe == false`) or
        // the outlier exposure term.
        let evaluate = |p: &ParameterVector<f64>, oe: bool| -> (f64, Vec<f64>) {
            let mut g = Graph::new();
            let v = p.bind(&mut g);
            let l = if oe {
                let fwd = forward_episode(&mut g, &enc, &v, &batch, &[]).unwrap();
                outlier_exposure_loss(&mut g, &enc, &v, &outliers, fwd.prototypes, Distance::SquaredEuclidean)
                    .unwrap()
            } else {
                episode_loss(&mut g, &enc, &v, &batch, Distance::SquaredEuclidean).unwrap()
            };
            let value = g.value(l).item().unwrap();
            let grads = p.gradients_for(&v, &g.backward(l).unwrap()).unwrap().flat();
            (value, grads)
        };
        for oe in [false, true] {
            let (_, analytic) = evaluate(&params, oe);
            worst = worst.max(worst_relative_error(&params, &analytic, &|p| evaluate(p, oe).0));
        }
    }
    let t = start.elapsed();
    outcome(
        worst < 1e-4 && t < Duration::from_secs(30),
        format!("20 seeds, max relative error {worst:.2e} (< 1e-4), {t:.2?} (< 30 s)"),
    )
}

// ------------------------------------------------------- likelihood / score

fn random_prototypes(rng: &mut ChaCha8Rng, k: usize, d: usize) -> PrototypeSet<f64> {
    let rows = (0..k).map(|_| (0..d).map(|_| rng.random_range(-3.0..3.0)).collect()).collect::<Vec<Vec<f64>>>();
    PrototypeSet::new("t", (0..k).map(|i| format!("c{i}")).collect(), Tensor::from_rows(&rows).unwrap()).unwrap()
}

fn flat_prior_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let k = rng.random_range(2..8);
        let d = rng.random_range(1..6);
        let protos = random_prototypes(&mut rng, k, d);
        let z: Vec<f64> = (0..d).map(|_| rng.random_range(-3.0..3.0)).collect();
        let softmax = class_likelihood(&z, &protos, None, Distance::SquaredEuclidean).unwrap();
        let mixture = class_likelihood(&z, &protos, Some(&flat_prior(k)), Distance::SquaredEuclidean).unwrap();
        // Direct evaluation: exp(-d_k) / sum_j exp(-d_j).
        let dist: Vec<f64> = (0..k)
            .map(|c| z.iter().zip(protos.row(c)).map(|(a, b)| (a - b) * (a - b)).sum())
            .collect();
        let total: f64 = dist.iter().map(|v| (-v).exp()).sum();
        for c in 0..k {
            let direct = (-dist[c]).exp() / total;
            worst = worst.max((softmax[c] - mixture[c]).abs()).max((softmax[c] - direct).abs());
        }
    }
    outcome(worst <= 1e-12, format!("1000 draws, max deviation {worst:.2e} (<= 1e-12)"))
}

fn mixture_score_consistency() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let k = rng.random_range(2..8);
        let d = rng.random_range(1..6);
        let protos = random_prototypes(&mut rng, k, d);
        let z: Vec<f64> = (0..d).map(|_| rng.random_range(-3.0..3.0)).collect();
        let t = rng.random_range(0..k);
        let enc = IdentityEncoder { dim: d };
        let none = ParameterVector::new();
        let score =
            anomaly_score(&enc, &none, &[&z[..]], &protos, t, Distance::SquaredEuclidean, Aggregation::Mean).unwrap();
        // -ln of the flat mixture posterior of class t, in the log domain,
        // saturating at the documented floor p = 1e-12.
        let dist: Vec<f64> = (0..k)
            .map(|c| z.iter().zip(protos.row(c)).map(|(a, b)| (a - b) * (a - b)).sum())
            .collect();
        let m = dist.iter().cloned().fold(f64::INFINITY, f64::min);
        let lse = -m + dist.iter().map(|v| (m - v).exp()).sum::<f64>().ln();
        let neg_log_post = (dist[t] + lse).min(-(1e-12f64).ln());
        worst = worst.max((score - neg_log_post).abs());
    }
    outcome(worst <= 1e-12, format!("1000 draws, |score - (-ln p(true))| <= {worst:.2e} (<= 1e-12)"))
}

// ------------------------------------------------------------------ reptile

fn fixture_spec() -> BenchmarkSpec {
    let mut spec = BenchmarkSpec::desk_default();
    spec.clip_seconds = 1.0;
    spec.counts = Counts {
        train_source: 12,
        fewshot_target: 3,
        test_normal_per_domain: 4,
        test_anomalous_per_domain: 4,
    };
    spec
}

fn small_frontend() -> FrontendConfig {
    FrontendConfig {
        n_mels: 16,
        context: 8,
        shift: 4,
        ..FrontendConfig::default()
    }
}

fn small_config(dataset: &Path, seed: u64) -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.dataset = dataset.to_path_buf();
    cfg.seed = seed;
    cfg.frontend = small_frontend();
    cfg.encoder.hidden = vec![16];
    cfg.encoder.bottleneck = 8;
    cfg.schedule.outer_steps = 6;
    cfg.schedule.inner_iters = 2;
    cfg.schedule.finetune_iters = 3;
    cfg.episode = EpisodeSizes { support: 2, query: 2 };
    cfg.oe.pool_clips = 4;
    cfg.oe.clips_per_step = 1;
    cfg
}

fn reptile_degeneracy(data: &MachineData) -> Outcome {
    let dim = data.window_dim().unwrap();
    let enc = DenseEncoder::new(vec![dim, 12, 6], InputNorm::PerWindow).unwrap();
    let init: ParameterVector<f64> = enc.init_params(&mut ChaCha8Rng::seed_from_u64(5));
    let task = data.task(SECTION_TASK).unwrap().clone();
    let lr = 0.02;
    let settings = |steps, eps: f64| TrainSettings {
        schedule: MetaSchedule {
            outer_steps: steps,
            epsilon_start: eps,
            epsilon_end: eps,
            inner_iters: 1,
            finetune_iters: 0,
        },
        optimizer: OptimizerConfig {
            kind: OptimizerKind::Sgd,
            lr,
            ..OptimizerConfig::default()
        },
        sizes: EpisodeSizes { support: 2, query: 2 },
        distance: Distance::SquaredEuclidean,
        oe_lambda: 0.0,
        oe_clips_per_step: 0,
        seed: 77,
    };

    // Plain episodic SGD, one fresh episode per step.
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut theta = init.clone();
    let mut trajectory = Vec::new();
    for _ in 0..5 {
        let ep = sample_episode(data, &task, EpisodeSizes { support: 2, query: 2 }, &mut rng).unwrap();
        let (_, g) = step_gradients(&enc, &theta, &ep.batch(data), &[], 0.0, Distance::SquaredEuclidean).unwrap();
        let flat: Vec<f64> = theta.flat().iter().zip(g.flat()).map(|(x, g)| x - lr * g).collect();
        theta.set_flat(&flat).unwrap();
        trajectory.push(theta.clone());
    }
    let tasks = [task];
    let unit_matches = (1..=5).all(|n| {
        let out = train(&enc, init.clone(), data, &tasks, &settings(n, 1.0), None).unwrap();
        out.params.flat().iter().zip(trajectory[n - 1].flat()).all(|(a, b)| a.to_bits() == b.to_bits())
    });
    let frozen = train(&enc, init.clone(), data, &tasks, &settings(5, 0.0), None).unwrap();
    let zero_matches = frozen.params.flat().iter().zip(init.flat()).all(|(a, b)| a.to_bits() == b.to_bits());
    outcome(
        unit_matches && zero_matches,
        format!("eps=1 follows plain training for 5 steps: {unit_matches}; eps=0 keeps parameters bit-identical: {zero_matches}"),
    )
}

// ------------------------------------------------------------------ metrics

fn brute_auroc(normal: &[f64], anomalous: &[f64]) -> f64 {
    let mut twice = 0u64;
    for &a in anomalous {
        for &n in normal {
            twice += if a > n { 2 } else if a == n { 1 } else { 0 };
        }
    }
    twice as f64 / (2 * normal.len() * anomalous.len()) as f64
}

/// ROC vertices from a threshold sweep, integrated up to `max_fpr` with
/// linear interpolation on the crossing segment, then divided by `max_fpr`.
fn step_curve(normal: &[f64], anomalous: &[f64], max_fpr: f64) -> f64 {
    let mut thresholds: Vec<f64> = normal.iter().chain(anomalous).copied().collect();
    thresholds.sort_by(|a, b| b.total_cmp(a));
    thresholds.dedup();
    let (nn, na) = (normal.len() as f64, anomalous.len() as f64);
    let mut pts = vec![(0.0, 0.0)];
    for t in thresholds {
        let fpr = normal.iter().filter(|&&v| v >= t).count() as f64 / nn;
        let tpr = anomalous.iter().filter(|&&v| v >= t).count() as f64 / na;
        pts.push((fpr, tpr));
    }
    let mut area = 0.0;
    for w in pts.windows(2) {
        let ((x0, y0), (x1, y1)) = (w[0], w[1]);
        if x0 >= max_fpr {
            break;
        }
        if x1 <= max_fpr {
            area += (x1 - x0) * (y0 + y1) / 2.0;
        } else {
            let y = y0 + (y1 - y0) * (max_fpr - x0) / (x1 - x0);
            area += (max_fpr - x0) * (y0 + y) / 2.0;
        }
    }
    area / max_fpr
}

fn metric_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut auc_exact, mut p_err, mut full_err) = (true, 0.0f64, 0.0f64);
    for i in 0..200 {
        let total = rng.random_range(2..=50);
        let na = rng.random_range(1..total);
        // Coarse grid on half the sets to force ties.
        let grid = i % 2 == 0;
        let mut draw = |n| -> Vec<f64> {
            (0..n)
                .map(|_| if grid { f64::from(rng.random_range(0..8)) } else { rng.random_range(0.0..1.0) })
                .collect()
        };
        let normal = draw(total - na);
        let anomalous = draw(na);
        let a = auroc(&normal, &anomalous).unwrap();
        auc_exact &= a == brute_auroc(&normal, &anomalous);
        for max_fpr in [0.1, 0.25, 0.5] {
            let got = pauroc(&normal, &anomalous, max_fpr).unwrap();
            p_err = p_err.max((got - step_curve(&normal, &anomalous, max_fpr)).abs());
        }
        full_err = full_err.max((pauroc(&normal, &anomalous, 1.0).unwrap() - a).abs());
    }
    outcome(
        auc_exact && p_err <= 1e-12 && full_err <= 1e-12,
        format!(
            "200 sets: auroc == pair count: {auc_exact}; pauroc vs step curve {p_err:.2e}; |pauroc(1) - auroc| {full_err:.2e}"
        ),
    )
}

// ----------------------------------------------------------------- frontend

fn frontend_windows() -> Outcome {
    let sr = 16_000;
    let samples: Vec<f64> = (0..10 * sr).map(|i| (i as f64 * 0.05).sin() * 0.1).collect();
    let clip = AudioClip::new("tone", samples, sr as u32);
    let fz = Featurizer::new(FrontendConfig::default()).unwrap();
    let frames = fz.logmel(&clip).unwrap().n_frames;
    let windows = fz.windows(&clip).unwrap().len();
    outcome(windows == 32, format!("10 s clip: {frames} frames, {windows} windows (== 32)"))
}

// -------------------------------------------------------------- determinism

fn determinism(dataset: &Path) -> Outcome {
    let run = |out: &Path| -> (Vec<Vec<u8>>, Vec<u8>) {
        let mut cfg = small_config(dataset, 9);
        cfg.output = out.to_path_buf();
        let ws = Workspace::open(cfg.clone()).unwrap();
        let mut ckpts = Vec::new();
        let mut scores = Vec::new();
        for m in ws.machines().unwrap() {
            let data = ws.machine_data(&m).unwrap();
            let model = pipeline::train_machine(&ws, &data).unwrap();
            let path = cfg.checkpoint_path(&m);
            std::fs::create_dir_all(out).unwrap();
            pipeline::save_model(&path, &cfg, &model).unwrap();
            ckpts.push(std::fs::read(&path).unwrap());
            let (_, params) = pipeline::load_model(&path).unwrap();
            scores.extend(pipeline::score_machine(&cfg, &params, &data, cfg.schedule.finetune_iters).unwrap().scores);
        }
        pipeline::write_scores(&cfg.scores_path(), &scores).unwrap();
        (ckpts, std::fs::read(cfg.scores_path()).unwrap())
    };
    // The config, output path included, is stored in the checkpoint, so both
    // runs write to the same place.
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let a = run(&out);
    std::fs::remove_dir_all(&out).unwrap();
    let b = run(&out);
    let same_ckpt = a.0 == b.0;
    let same_scores = a.1 == b.1;
    outcome(
        same_ckpt && same_scores && !a.1.is_empty(),
        format!(
            "{} checkpoints identical: {same_ckpt}; {}-byte score CSV identical: {same_scores}",
            a.0.len(),
            a.1.len()
        ),
    )
}

// ------------------------------------------------------------------ ablation

const ABLATION_SEEDS: u64 = 5;

fn ablation_spec(seed: u64) -> BenchmarkSpec {
    let mut spec = BenchmarkSpec::desk_default();
    spec.seed = 100 + seed;
    spec.clip_seconds = 2.0;
    spec.counts = Counts {
        train_source: 48,
        fewshot_target: 3,
        test_normal_per_domain: 80,
        test_anomalous_per_domain: 30,
    };
    spec
}

fn ablation_config(dataset: &Path, seed: u64) -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.dataset = dataset.to_path_buf();
    cfg.seed = seed;
    cfg.frontend.n_mels = 32;
    cfg.frontend.context = 16;
    cfg.frontend.shift = 8;
    cfg.encoder.hidden = vec![64];
    cfg.encoder.bottleneck = 32;
    cfg.schedule.outer_steps = 100;
    cfg.oe.pool_clips = 16;
    cfg.oe.clips_per_step = 2;
    cfg
}

/// Mean target-domain score per variant: ours, PR, PN, ours without
/// fine-tuning.
fn ablation_seed(seed: u64) -> [f64; 4] {
    let dir = tempfile::tempdir().unwrap();
    benchgen::generate(&ablation_spec(seed), dir.path()).unwrap();
    let ours = ablation_config(dir.path(), seed);
    let mut pr = ours.clone();
    pr.oe.enabled = false;
    let mut pn = pr.clone();
    pn.tasks = vec![SECTION_TASK.into()];
    pn.schedule.epsilon_start = 1.0;
    pn.schedule.epsilon_end = 1.0;

    let base = Workspace::open(ours.clone()).unwrap();
    let machines: Vec<(String, MachineData)> = base
        .machines()
        .unwrap()
        .into_iter()
        .map(|m| {
            let d = base.machine_data(&m).unwrap();
            (m, d)
        })
        .collect();
    let mut scores: [Vec<_>; 4] = Default::default();
    for (v, cfg) in [ours, pr, pn].into_iter().enumerate() {
        let ws = Workspace {
            config: cfg.clone(),
            dataset: base.dataset.clone(),
            featurizer: base.featurizer.clone(),
        };
        for (_, data) in &machines {
            let model = pipeline::train_machine(&ws, data).unwrap();
            let tuned = pipeline::score_machine(&cfg, &model.params, data, cfg.schedule.finetune_iters).unwrap();
            scores[v].extend(tuned.scores);
            if v == 0 {
                scores[3].extend(pipeline::score_machine(&cfg, &model.params, data, 0).unwrap().scores);
            }
        }
    }
    scores.map(|s| EvalReport::from_scores(&s, 0.1).unwrap().target_score().unwrap())
}

fn ablation_ordering() -> Outcome {
    let start = Instant::now();
    let mut mean = [0.0; 4];
    for seed in 0..ABLATION_SEEDS {
        let r = ablation_seed(seed);
        println!(
            "    seed {seed}: ours {:.4}  pr {:.4}  pn {:.4}  no-finetune {:.4}",
            r[0], r[1], r[2], r[3]
        );
        for (m, v) in mean.iter_mut().zip(r) {
            *m += v / ABLATION_SEEDS as f64;
        }
    }
    let t = start.elapsed();
    let [ours, pr, pn, nf] = mean;
    let margin = 0.01;
    let (a, b, c) = (pr - pn >= margin, ours - nf >= margin, ours - pr >= margin);
    outcome(
        a && b && c && t <= Duration::from_secs(600),
        format!(
            "mean target score ours {ours:.4}, pr {pr:.4}, pn {pn:.4}, no-finetune {nf:.4}; \
             (a) all tasks - single task {:+.4}: {a}; (b) fine-tuned - none {:+.4}: {b}; \
             (c) OE - no OE {:+.4}: {c}; {t:.1?} (<= 600 s)",
            pr - pn,
            ours - nf,
            ours - pr
        ),
    )
}

// --------------------------------------------------------------------- main

fn section_data(dataset: &Path) -> MachineData {
    let ds = benchgen::load(dataset).unwrap();
    let fz = Featurizer::new(small_frontend()).unwrap();
    ds.machine_data("pump", &fz).unwrap()
}

fn main() -> ExitCode {
    let fixture = tempfile::tempdir().unwrap();
    benchgen::generate(&fixture_spec(), fixture.path()).unwrap();
    let pump = section_data(fixture.path());

    let criteria: Vec<(&str, Box<dyn FnOnce() -> Outcome + '_>)> = vec![
        ("gradient correctness", Box::new(gradient_correctness)),
        ("flat-prior posterior equals distance softmax", Box::new(flat_prior_equivalence)),
        ("score equals -log mixture posterior", Box::new(mixture_score_consistency)),
        ("reptile degeneracy", Box::new(|| reptile_degeneracy(&pump))),
        ("auroc / pauroc oracles", Box::new(metric_oracles)),
        ("frontend yields 32 windows per 10 s clip", Box::new(frontend_windows)),
        ("determinism of checkpoints and score csv", Box::new(|| determinism(fixture.path()))),
        ("ablation ordering on the synthetic benchmark", Box::new(ablation_ordering)),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let o = check();
        println!("{} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        if !o.pass {
            failed += 1;
        }
    }
    if failed == 0 {
        println!("acceptance: all criteria pass");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failed} criteria failed");
        ExitCode::FAILURE
    }
}
