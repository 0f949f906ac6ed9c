//! Quick numerical self-test of the installed build.

use std::time::Instant;

use fewshot_asd::anomaly::{nll_from_distances, outlier_exposure_loss};
use fewshot_asd::autodiff::{finite_difference_check, inject_gradient_fault, logsumexp_slice, Tensor};
use fewshot_asd::episodic::{
    distance_softmax, episode_loss, forward_episode, prior_weighted_assignment, DenseEncoder,
    Distance, Encoder, EpisodeBatch, InputNorm, PrototypeSet,
};
use fewshot_asd::eval::{auroc, pauroc};
use fewshot_asd::Params64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const DIM: usize = 12;

fn random_windows(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..DIM).map(|_| rng.random_range(-2.0..2.0)).collect()).collect()
}

/// Worst relative gradient error of the episode and OE losses over `seeds`.
fn gradient_error(seeds: u64) -> Result<f64, String> {
    let enc = DenseEncoder::new(vec![DIM, 8, 4], InputNorm::PerWindow).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for seed in 0..seeds {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params: Params64 = enc.init_params(&mut rng);
        let rows = random_windows(&mut rng, 3 * 4 + 2);
        let r: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
        let batch = EpisodeBatch {
            support: vec![r[0..2].to_vec(), r[2..4].to_vec(), r[4..6].to_vec()],
            query: vec![r[6..8].to_vec(), r[8..10].to_vec(), r[10..12].to_vec()],
        };
        let outliers = &r[12..];
        let task = finite_difference_check(
            |g, v| episode_loss(g, &enc, v, &batch, Distance::SquaredEuclidean),
            &params,
            1e-6,
        );
        let oe = finite_difference_check(
            |g, v| {
                let fwd = forward_episode(g, &enc, v, &batch, &[])?;
                outlier_exposure_loss(g, &enc, v, outliers, fwd.prototypes, Distance::SquaredEuclidean)
            },
            &params,
            1e-6,
        );
        worst = worst.max(task.map_err(|e| e.to_string())?).max(oe.map_err(|e| e.to_string())?);
    }
    Ok(worst)
}

/// Flat-prior assignment vs. distance softmax, and score vs. -log posterior.
fn likelihood_errors(draws: u64) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut flat_err, mut score_err): (f64, f64) = (0.0, 0.0);
    for _ in 0..draws {
        let k = rng.random_range(2..6);
        let rows: Vec<Vec<f64>> = (0..k).map(|_| (0..3).map(|_| rng.random_range(-3.0..3.0)).collect()).collect();
        let names = (0..k).map(|i| i.to_string()).collect();
        let protos = PrototypeSet::new("t", names, Tensor::from_rows(&rows).unwrap()).unwrap();
        let z: Vec<f64> = (0..3).map(|_| rng.random_range(-3.0..3.0)).collect();
        let d = protos.distances(&z, Distance::SquaredEuclidean);
        let flat = vec![1.0 / k as f64; k];
        let a = prior_weighted_assignment(&d, &flat).unwrap();
        let b = distance_softmax(&d);
        flat_err = a.iter().zip(&b).fold(flat_err, |m, (x, y)| m.max((x - y).abs()));
        // -ln p(t) in the log domain, saturating at p = 1e-12.
        let t = rng.random_range(0..k);
        let neg: Vec<f64> = d.iter().map(|v| -v).collect();
        let neg_log_post = (d[t] + logsumexp_slice(&neg)).min(-(1e-12f64).ln());
        score_err = score_err.max((nll_from_distances(&d, t) - neg_log_post).abs());
    }
    (flat_err, score_err)
}

/// AUROC against brute-force pair counting, and pAUROC(1) against AUROC.
fn metric_errors(sets: u64) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (mut auc_err, mut p_err): (f64, f64) = (0.0, 0.0);
    for _ in 0..sets {
        let n = rng.random_range(1..25);
        let a = rng.random_range(1..25);
        let draw = |rng: &mut ChaCha8Rng, m| -> Vec<f64> { (0..m).map(|_| f64::from(rng.random_range(0..10))).collect() };
        let normal = draw(&mut rng, n);
        let anomalous = draw(&mut rng, a);
        let mut wins = 0.0;
        for &x in &anomalous {
            for &y in &normal {
                wins += if x > y { 1.0 } else if x == y { 0.5 } else { 0.0 };
            }
        }
        let brute = wins / (n * a) as f64;
        let got = auroc(&normal, &anomalous).unwrap();
        auc_err = auc_err.max((got - brute).abs());
        p_err = p_err.max((pauroc(&normal, &anomalous, 1.0).unwrap() - got).abs());
    }
    (auc_err, p_err)
}

fn line(ok: bool, name: &str, detail: String) -> bool {
    println!("{} {name}: {detail}", if ok { "PASS" } else { "FAIL" });
    ok
}

/// Print one PASS/FAIL line per check; true when all pass.
pub fn run(inject_fault: bool) -> bool {
    let start = Instant::now();
    inject_gradient_fault(inject_fault);
    let grad = gradient_error(5);
    inject_gradient_fault(false);
    let mut ok = match grad {
        Ok(e) => line(e < 1e-4, "gradients", format!("max relative error {e:.2e} (< 1e-4)")),
        Err(e) => line(false, "gradients", e),
    };
    let (flat, score) = likelihood_errors(1000);
    ok &= line(flat <= 1e-12, "flat-prior posterior", format!("max deviation {flat:.2e} (<= 1e-12)"));
    ok &= line(score <= 1e-12, "score = -log posterior", format!("max deviation {score:.2e} (<= 1e-12)"));
    let (auc, p) = metric_errors(200);
    ok &= line(auc == 0.0, "auroc vs pair count", format!("max deviation {auc:.2e} (exact)"));
    ok &= line(p <= 1e-12, "pauroc(1) = auroc", format!("max deviation {p:.2e} (<= 1e-12)"));
    println!("{} checks in {:.2?}", if ok { "all" } else { "failed" }, start.elapsed());
    ok
}
