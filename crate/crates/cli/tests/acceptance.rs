//! Acceptance suite: one test per release criterion, each printing a
//! PASS line with its measured evidence. Oracles here are independent
//! reimplementations (finite differences, brute-force metrics, hand-derived
//! updates) of the code paths they check.

use std::path::Path;
use std::time::{Duration, Instant};

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pkpredict_core::data::{
    normalize_targets, Dataset, MoleculeRecord, NormalizationSpec, Task, TASK_COUNT,
};
use pkpredict_core::eval::{accuracy_at, mae, recall};
use pkpredict_core::fingerprint::compute_ecfp;
use pkpredict_core::nn::{
    adam_step, backward, forward, init_network, init_network_zeroed, multitask_cost, objective,
    train, Gradients, LayerSpec, LossSpec, NetworkModel, TrainConfig, TrainData,
};
use pkpredict_core::smiles::{parse_smiles, write_smiles};
use pkpredict_core::split::{
    mdfiswd_split, random_split, subset_error, DistanceWeights, SplitAssignment,
};
use pkpredict_core::transfer::{
    build_consensus, load_model, save_model, transfer_feature_layers, ConsensusMember,
};

fn pass(name: &str, started: Instant, budget: Duration, detail: &str) {
    let elapsed = started.elapsed();
    assert!(
        elapsed < budget,
        "{name}: took {elapsed:?}, budget {budget:?}"
    );
    println!("acceptance {name}: PASS in {elapsed:.2?} ({detail})");
}

// ----------------------------------------------------------------------
// Gradient oracle: 50 random 3-layer networks under both losses with
// lambda = 0.01; analytic gradients match central finite differences
// (h = 1e-5) within 1e-6 relative error per coordinate.
// ----------------------------------------------------------------------

fn finite_difference_check(seed: u64, loss: LossSpec<f64>, binary: bool) {
    const H: f64 = 1e-5;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let out_size = match &loss {
        LossSpec::Multitask { weights } => weights.len(),
        LossSpec::Binary { .. } => rng.random_range(1..=4),
    };
    let sizes = vec![
        rng.random_range(2..=8),
        rng.random_range(2..=8),
        rng.random_range(2..=8),
        out_size,
    ];
    let spec = LayerSpec::dense(sizes.clone()).unwrap();
    let mut model: NetworkModel<f64> = init_network(spec, seed.wrapping_mul(31)).unwrap();
    model.adam.lambda = 0.01;

    let n = 6;
    let x = Array2::from_shape_fn((n, sizes[0]), |_| rng.random::<f64>() * 2.0 - 1.0);
    let labels = Array2::from_shape_fn((n, out_size), |_| {
        if binary {
            if rng.random::<f64>() < 0.3 {
                1.0
            } else {
                0.0
            }
        } else {
            rng.random::<f64>() * 0.8 + 0.1
        }
    });
    let mask = Array2::from_shape_fn((n, out_size), |_| rng.random::<f64>() < 0.8);

    let grads = backward(&model, &x, &labels, &mask, &loss).unwrap();
    for l in 0..model.spec.layer_count() {
        let dim = model.weights[l].dim();
        for r in 0..dim.0 {
            for c in 0..dim.1 {
                let saved = model.weights[l][(r, c)];
                model.weights[l][(r, c)] = saved + H;
                let plus = objective(&model, &x, &labels, &mask, &loss).unwrap();
                model.weights[l][(r, c)] = saved - H;
                let minus = objective(&model, &x, &labels, &mask, &loss).unwrap();
                model.weights[l][(r, c)] = saved;
                let numeric = (plus - minus) / (2.0 * H);
                let analytic = grads.weights[l][(r, c)];
                let scale = analytic.abs().max(numeric.abs()).max(1e-3);
                assert!(
                    (analytic - numeric).abs() / scale <= 1e-6,
                    "seed {seed} layer {l} weight ({r},{c}): {analytic} vs {numeric}"
                );
            }
        }
        for i in 0..model.biases[l].len() {
            let saved = model.biases[l][i];
            model.biases[l][i] = saved + H;
            let plus = objective(&model, &x, &labels, &mask, &loss).unwrap();
            model.biases[l][i] = saved - H;
            let minus = objective(&model, &x, &labels, &mask, &loss).unwrap();
            model.biases[l][i] = saved;
            let numeric = (plus - minus) / (2.0 * H);
            let analytic = grads.biases[l][i];
            let scale = analytic.abs().max(numeric.abs()).max(1e-3);
            assert!(
                (analytic - numeric).abs() / scale <= 1e-6,
                "seed {seed} layer {l} bias {i}: {analytic} vs {numeric}"
            );
        }
    }
}

#[test]
fn gradient_oracle() {
    let started = Instant::now();
    for seed in 0..25 {
        finite_difference_check(
            seed,
            LossSpec::Multitask {
                weights: vec![3.0, 1.0, 9.0, 1.0],
            },
            false,
        );
        finite_difference_check(
            1000 + seed,
            LossSpec::Binary {
                positive: 100.0,
                negative: 1.0,
            },
            true,
        );
    }
    pass(
        "gradient-oracle",
        started,
        Duration::from_secs(10),
        "50 networks, both losses, lambda 0.01, rel err <= 1e-6",
    );
}

// ----------------------------------------------------------------------
// Adam oracle: one step from zeroed state with g = 1 matches the
// hand-derived update -0.1 / (1 + 1e-8) to 1e-12.
// ----------------------------------------------------------------------

#[test]
fn adam_oracle() {
    let started = Instant::now();
    let spec = LayerSpec::dense(vec![1, 1]).unwrap();
    let mut model: NetworkModel<f64> = init_network_zeroed(spec).unwrap();
    model.weights[0][(0, 0)] = 0.25;
    model.adam.lr = 0.1;
    model.adam.beta1 = 0.5;
    model.adam.beta2 = 0.999;
    model.adam.lambda = 0.0;
    let grads = Gradients {
        weights: vec![Array2::from_elem((1, 1), 1.0)],
        biases: vec![Array1::zeros(1)],
    };
    let before = model.weights[0][(0, 0)];
    adam_step(&mut model, &grads);
    let delta = model.weights[0][(0, 0)] - before;
    // m = 0.5, v = 0.001, m_hat = 1, v_hat = 1.
    let expected = -0.1 / (1.0 + 1e-8);
    assert!(
        (delta - expected).abs() <= 1e-12,
        "delta {delta} vs {expected}"
    );
    pass(
        "adam-oracle",
        started,
        Duration::from_secs(1),
        "single-step update matches hand derivation to 1e-12",
    );
}

// ----------------------------------------------------------------------
// Masking soundness over 1000 random batches: with all masks true and unit
// weights the cost equals the plain mean halved-squared-error; flipping a
// single mask bit changes the cost by exactly that sample-task term (both
// sides computed by an independent brute-force oracle).
// ----------------------------------------------------------------------

/// Brute-force reimplementation of the masked multitask cost.
fn oracle_multitask(
    pred: &Array2<f64>,
    labels: &Array2<f64>,
    mask: &Array2<bool>,
    w: &[f64],
) -> f64 {
    let (n, k) = pred.dim();
    let mut total = 0.0;
    for t in 0..k {
        let mut sum = 0.0;
        let mut count = 0;
        for i in 0..n {
            if mask[(i, t)] {
                let e = pred[(i, t)] - labels[(i, t)];
                sum += e * e / 2.0;
                count += 1;
            }
        }
        if count > 0 {
            total += w[t] * sum / count as f64;
        }
    }
    total
}

#[test]
fn masking_soundness() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let unit = [1.0; TASK_COUNT];
    for round in 0..1000 {
        let n = rng.random_range(1..=8);
        let pred = Array2::from_shape_fn((n, TASK_COUNT), |_| rng.random::<f64>());
        let labels = Array2::from_shape_fn((n, TASK_COUNT), |_| rng.random::<f64>());

        // All-true masks + unit weights == plain mean halved-squared-error.
        let full = Array2::from_elem((n, TASK_COUNT), true);
        let cost = multitask_cost(&pred, &labels, &full, &unit).unwrap();
        let mut plain = 0.0;
        for t in 0..TASK_COUNT {
            let mut sum = 0.0;
            for i in 0..n {
                let e = pred[(i, t)] - labels[(i, t)];
                sum += e * e / 2.0;
            }
            plain += sum / n as f64;
        }
        assert!((cost - plain).abs() <= 1e-12, "round {round}");

        // Random mask; flip one random present bit.
        let mut mask = Array2::from_shape_fn((n, TASK_COUNT), |_| rng.random::<f64>() < 0.7);
        let i = rng.random_range(0..n);
        let t = rng.random_range(0..TASK_COUNT);
        mask[(i, t)] = true;
        let weights = [3.0, 1.0, 9.0, 1.0];
        let before = multitask_cost(&pred, &labels, &mask, &weights).unwrap();
        mask[(i, t)] = false;
        let after = multitask_cost(&pred, &labels, &mask, &weights).unwrap();
        mask[(i, t)] = true;

        let oracle_before = oracle_multitask(&pred, &labels, &mask, &weights);
        let mut flipped = mask.clone();
        flipped[(i, t)] = false;
        let oracle_after = oracle_multitask(&pred, &labels, &flipped, &weights);
        assert!(
            ((before - after) - (oracle_before - oracle_after)).abs() <= 1e-12,
            "round {round}: flip delta mismatch"
        );

        // The masked cell's prediction no longer contributes at all.
        let mut perturbed = pred.clone();
        perturbed[(i, t)] = rng.random::<f64>();
        let after_perturbed = multitask_cost(&perturbed, &labels, &flipped, &weights).unwrap();
        assert_eq!(after, after_perturbed, "round {round}: masked cell leaked");
    }
    pass(
        "masking-soundness",
        started,
        Duration::from_secs(10),
        "1000 random batches, exact flip deltas and zero leakage",
    );
}

// ----------------------------------------------------------------------
// Splitter quotas and determinism for n in {5, 10, 100, 1104}.
// ----------------------------------------------------------------------

fn synthetic_dataset(n: usize, seed: u64, bimodal: bool) -> Dataset<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let records = (0..n)
        .map(|i| {
            let high = bimodal && rng.random::<f64>() < 0.5;
            let center = if high { 6.0 } else { 0.0 };
            let mut descriptors = [0.0; 8];
            for d in descriptors.iter_mut() {
                *d = center + rng.random::<f64>() * 2.0 - 1.0;
            }
            let pick = |rng: &mut ChaCha8Rng, low: f64, high_v: f64, spread: f64| {
                let base = if bimodal {
                    if high {
                        high_v
                    } else {
                        low
                    }
                } else {
                    (low + high_v) / 2.0
                };
                base + rng.random::<f64>() * spread - spread / 2.0
            };
            let ba = pick(&mut rng, 15.0, 85.0, 12.0).clamp(1.0, 99.0);
            let ppbr = pick(&mut rng, 25.0, 75.0, 12.0).clamp(1.0, 99.0);
            let vdss = pick(&mut rng, 120.0, 1500.0, 100.0).clamp(1.0, 1999.0);
            let hl = pick(&mut rng, 20.0, 140.0, 14.0).clamp(1.0, 167.0);
            MoleculeRecord {
                id: format!("m{i}"),
                smiles: "CCO".into(),
                descriptors,
                labels: [Some(ba), Some(ppbr), Some(vdss), Some(hl)],
            }
        })
        .collect();
    normalize_targets(Dataset::new(records), NormalizationSpec::default()).unwrap()
}

#[test]
fn splitter_quota_and_determinism() {
    let started = Instant::now();
    for &n in &[5usize, 10, 100, 1104] {
        let ds = synthetic_dataset(n, n as u64, false);
        let expected = SplitAssignment::quotas(n);
        if n == 1104 {
            assert_eq!(expected, (664, 220, 220));
        }
        for method in 0..2 {
            let run = || {
                if method == 0 {
                    mdfiswd_split(&ds, &DistanceWeights::default(), 17).unwrap()
                } else {
                    random_split(&ds, 17).unwrap()
                }
            };
            let a = run();
            assert_eq!(
                (a.train.len(), a.validation.len(), a.test.len()),
                expected,
                "n {n} method {method}"
            );
            assert!(a.is_partition_of(n), "n {n} method {method}");
            let b = run();
            // Byte-identical reproduction under a fixed seed.
            assert_eq!(
                serde_json::to_vec(&a).unwrap(),
                serde_json::to_vec(&b).unwrap()
            );
        }
    }
    pass(
        "splitter-quota-determinism",
        started,
        Duration::from_secs(60),
        "n in {5,10,100,1104}; 664/220/220 at 1104; byte-identical reruns",
    );
}

// ----------------------------------------------------------------------
// Subset-error direction: diversity-aware splitting beats random splitting
// on bimodal data, averaged over 20 seeds.
// ----------------------------------------------------------------------

#[test]
fn subset_error_direction() {
    let started = Instant::now();
    let mut md_total = 0.0;
    let mut random_total = 0.0;
    for seed in 0..20u64 {
        let ds = synthetic_dataset(200, 500 + seed, true);
        let md = mdfiswd_split(&ds, &DistanceWeights::default(), seed).unwrap();
        let rd = random_split(&ds, seed).unwrap();
        for task in Task::ALL {
            md_total += subset_error(&ds, &md, task, 10).unwrap();
            random_total += subset_error(&ds, &rd, task, 10).unwrap();
        }
    }
    let md_mean = md_total / 80.0;
    let random_mean = random_total / 80.0;
    assert!(
        md_mean < random_mean,
        "mean SE: diversity {md_mean:.3} vs random {random_mean:.3}"
    );
    pass(
        "subset-error-direction",
        started,
        Duration::from_secs(30),
        &format!("mean SE {md_mean:.2} (mdfiswd) < {random_mean:.2} (random) over 20 seeds"),
    );
}

// ----------------------------------------------------------------------
// Fingerprint invariance: 10 fixture molecules x 100 random atom-order
// rewrites give identical fingerprints; radius-0 support is a subset of
// radius-2 support.
// ----------------------------------------------------------------------

#[test]
fn fingerprint_invariance() {
    let started = Instant::now();
    let fixtures = [
        "CCO",
        "c1ccccc1",
        "CC(=O)Oc1ccccc1C(=O)O",
        "CC(C)Cc1ccc(cc1)C(C)C(=O)O",
        "CC(=O)Nc1ccc(O)cc1",
        "CN1CCCC1c1cccnc1",
        "c1ccc2ccccc2c1",
        "C[N+](C)(C)CC(=O)[O-]",
        "c1cc[nH]c1",
        "CN1C=NC2=C1C(=O)N(C)C(=O)N2C",
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(4242);
    for smiles in fixtures {
        let graph = parse_smiles(smiles).unwrap();
        let reference = compute_ecfp(&graph, 2, 1024).unwrap();
        let r0 = compute_ecfp(&graph, 0, 1024).unwrap();
        assert!(
            r0.is_subset_of(&reference),
            "{smiles}: radius-0 support not within radius-2"
        );
        let n = graph.atom_count();
        for _ in 0..100 {
            let mut perm: Vec<usize> = (0..n).collect();
            for i in (1..n).rev() {
                let j = rng.random_range(0..=i);
                perm.swap(i, j);
            }
            let permuted = graph.permuted(&perm).unwrap();
            // Round-trip the permuted graph through SMILES text too.
            let rewritten = write_smiles(&permuted);
            let reparsed = parse_smiles(&rewritten).unwrap();
            let fp = compute_ecfp(&reparsed, 2, 1024).unwrap();
            assert_eq!(fp, reference, "{smiles} rewritten as {rewritten}");
        }
    }
    pass(
        "fingerprint-invariance",
        started,
        Duration::from_secs(10),
        "10 fixtures x 100 rewrites identical; radius support monotone",
    );
}

// ----------------------------------------------------------------------
// Class-weighting direction: on a 1.4%-positive task (10000 samples, 20
// features) the 100:1 weighted loss beats the unweighted loss on recall in
// at least 18 of 20 seeds at identical training budgets.
// ----------------------------------------------------------------------

fn rare_positive_problem(seed: u64) -> TrainData<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 10_000;
    let d = 20;
    let direction: Vec<f64> = (0..d).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
    let x = Array2::from_shape_fn((n, d), |_| rng.random::<f64>() * 2.0 - 1.0);
    let mut scores: Vec<(f64, usize)> = x
        .rows()
        .into_iter()
        .enumerate()
        .map(|(i, row)| {
            let s: f64 = row.iter().zip(&direction).map(|(a, b)| a * b).sum();
            (s, i)
        })
        .collect();
    scores.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    let mut labels = Array2::zeros((n, 1));
    for &(_, i) in scores.iter().take(140) {
        labels[(i, 0)] = 1.0;
    }
    let mask = Array2::from_elem((n, 1), true);
    TrainData::new(x, labels, mask).unwrap()
}

fn trained_recall(data: &TrainData<f64>, positive: f64, negative: f64, seed: u64) -> f64 {
    let cfg = TrainConfig {
        layers: vec![20, 16, 1],
        activations: None,
        lr: 0.02,
        beta1: 0.5,
        beta2: 0.999,
        lambda: 0.0,
        eps: 1e-8,
        epochs: 6,
        batch_size: Some(256),
        seed,
        task_weights: None,
        pos_neg_weights: Some([positive, negative]),
        frozen_layers: 0,
    };
    let loss: LossSpec<f64> = cfg.loss().unwrap();
    let mut model = init_network(cfg.layer_spec().unwrap(), seed ^ 0x5a).unwrap();
    train(&mut model, data, None, &loss, &cfg).unwrap();
    let preds = forward(&model, &data.x).unwrap();
    let p: Vec<f64> = preds.column(0).to_vec();
    let l: Vec<f64> = data.labels.column(0).to_vec();
    recall(&p, &l, 0.5).unwrap()
}

#[test]
fn class_weighting_direction() {
    let started = Instant::now();
    let mut wins = 0;
    let mut sample = (0.0, 0.0);
    for seed in 0..20u64 {
        let data = rare_positive_problem(7000 + seed);
        let weighted = trained_recall(&data, 100.0, 1.0, seed);
        let unweighted = trained_recall(&data, 1.0, 1.0, seed);
        if weighted > unweighted {
            wins += 1;
        }
        if seed == 0 {
            sample = (weighted, unweighted);
        }
    }
    assert!(wins >= 18, "weighted recall won only {wins}/20 seeds");
    pass(
        "class-weighting-direction",
        started,
        Duration::from_secs(180),
        &format!(
            "weighted beat unweighted in {wins}/20 seeds (seed0 recall {:.3} vs {:.3})",
            sample.0, sample.1
        ),
    );
}

// ----------------------------------------------------------------------
// Transfer benefit: with pretraining tasks sharing a latent linear feature
// map with the downstream regression, transfer initialization reaches lower
// held-out MAE than random initialization in at least 15 of 20 seeds.
// ----------------------------------------------------------------------

struct LatentFamily {
    pretrain: TrainData<f64>,
    downstream_train: TrainData<f64>,
    downstream_test: TrainData<f64>,
}

fn latent_family(seed: u64) -> LatentFamily {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = 16;
    let k = 4;
    let pretrain_tasks = 6;
    let latent: Vec<Vec<f64>> = (0..k)
        .map(|_| (0..d).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect())
        .collect();
    let sample = |rng: &mut ChaCha8Rng, n: usize| -> (Array2<f64>, Array2<f64>) {
        let x = Array2::from_shape_fn((n, d), |_| rng.random::<f64>() * 2.0 - 1.0);
        let mut z = Array2::zeros((n, k));
        for i in 0..n {
            for (j, w) in latent.iter().enumerate() {
                z[(i, j)] = x.row(i).iter().zip(w).map(|(a, b)| a * b).sum();
            }
        }
        (x, z)
    };

    // Pretraining: binary thresholds of random latent mixes.
    let mixes: Vec<Vec<f64>> = (0..pretrain_tasks)
        .map(|_| (0..k).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect())
        .collect();
    let (px, pz) = sample(&mut rng, 2000);
    let mut plabels = Array2::zeros((2000, pretrain_tasks));
    for i in 0..2000 {
        for (t, mix) in mixes.iter().enumerate() {
            let s: f64 = pz.row(i).iter().zip(mix).map(|(a, b)| a * b).sum();
            plabels[(i, t)] = if s > 0.0 { 1.0 } else { 0.0 };
        }
    }
    let pretrain =
        TrainData::new(px, plabels, Array2::from_elem((2000, pretrain_tasks), true)).unwrap();

    // Downstream: four bounded regression targets over the same latents.
    let heads: Vec<Vec<f64>> = (0..4)
        .map(|_| (0..k).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect())
        .collect();
    let downstream = |rng: &mut ChaCha8Rng, n: usize| -> TrainData<f64> {
        let (x, z) = sample(rng, n);
        let mut labels = Array2::zeros((n, 4));
        for i in 0..n {
            for (t, head) in heads.iter().enumerate() {
                let s: f64 = z.row(i).iter().zip(head).map(|(a, b)| a * b).sum();
                labels[(i, t)] = 1.0 / (1.0 + (-s).exp());
            }
        }
        TrainData::new(x, labels, Array2::from_elem((n, 4), true)).unwrap()
    };
    // Scarce downstream data: far fewer samples than input dimensions, so
    // a fresh network cannot pin down the latent subspace on its own.
    let downstream_train = downstream(&mut rng, 12);
    let downstream_test = downstream(&mut rng, 400);
    LatentFamily {
        pretrain,
        downstream_train,
        downstream_test,
    }
}

fn heldout_mae(model: &NetworkModel<f64>, test: &TrainData<f64>) -> f64 {
    let preds = forward(model, &test.x).unwrap();
    (&preds - &test.labels).mapv(f64::abs).mean().unwrap()
}

#[test]
fn transfer_benefit() {
    let started = Instant::now();
    let mut wins = 0;
    let mut sample = (0.0, 0.0);
    for seed in 0..20u64 {
        let family = latent_family(31 + seed);

        // Pretrain on the binary tasks.
        let pretrain_cfg = TrainConfig {
            layers: vec![16, 12, 8, 8, 6],
            activations: None,
            lr: 0.02,
            beta1: 0.5,
            beta2: 0.999,
            lambda: 0.0001,
            eps: 1e-8,
            epochs: 20,
            batch_size: Some(128),
            seed,
            task_weights: None,
            pos_neg_weights: Some([1.0, 1.0]),
            frozen_layers: 0,
        };
        let loss: LossSpec<f64> = pretrain_cfg.loss().unwrap();
        let mut pretrained = init_network(pretrain_cfg.layer_spec().unwrap(), seed).unwrap();
        train(
            &mut pretrained,
            &family.pretrain,
            None,
            &loss,
            &pretrain_cfg,
        )
        .unwrap();

        // Identical downstream budgets for both initializations.
        let downstream_cfg = TrainConfig {
            layers: vec![16, 12, 8, 8, 4],
            activations: None,
            lr: 0.02,
            beta1: 0.5,
            beta2: 0.999,
            lambda: 0.0001,
            eps: 1e-8,
            epochs: 20,
            batch_size: Some(4),
            seed: seed ^ 0xbeef,
            task_weights: Some(vec![1.0; 4]),
            pos_neg_weights: None,
            frozen_layers: 0,
        };
        let dloss: LossSpec<f64> = downstream_cfg.loss().unwrap();

        let mut transferred = transfer_feature_layers(&pretrained, 8, 4, seed ^ 0x77).unwrap();
        train(
            &mut transferred,
            &family.downstream_train,
            None,
            &dloss,
            &downstream_cfg,
        )
        .unwrap();

        let mut scratch = init_network(downstream_cfg.layer_spec().unwrap(), seed ^ 0x77).unwrap();
        train(
            &mut scratch,
            &family.downstream_train,
            None,
            &dloss,
            &downstream_cfg,
        )
        .unwrap();

        let transfer_mae = heldout_mae(&transferred, &family.downstream_test);
        let scratch_mae = heldout_mae(&scratch, &family.downstream_test);
        if transfer_mae < scratch_mae {
            wins += 1;
        }
        if seed == 0 {
            sample = (transfer_mae, scratch_mae);
        }
    }
    assert!(wins >= 15, "transfer won only {wins}/20 seeds");
    pass(
        "transfer-benefit",
        started,
        Duration::from_secs(300),
        &format!(
            "transfer beat random init in {wins}/20 seeds (seed0 MAE {:.4} vs {:.4})",
            sample.0, sample.1
        ),
    );
}

// ----------------------------------------------------------------------
// Consensus dominance: per-task validation accuracy of the consensus equals
// the max over eligible members, on 100 randomized configurations, exactly.
// ----------------------------------------------------------------------

#[test]
fn consensus_dominance() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for round in 0..100 {
        let member_count = rng.random_range(1..=4);
        let mut members = Vec::new();
        let mut coverages: Vec<Vec<Task>> = Vec::new();
        for m in 0..member_count {
            // Random coverage; the last member backfills any uncovered task
            // so the consensus is well formed.
            let mut tasks: Vec<Task> = Task::ALL
                .into_iter()
                .filter(|_| rng.random::<f64>() < 0.6)
                .collect();
            if m + 1 == member_count {
                for task in Task::ALL {
                    let covered =
                        coverages.iter().flatten().any(|t| *t == task) || tasks.contains(&task);
                    if !covered {
                        tasks.push(task);
                    }
                }
            }
            if tasks.is_empty() {
                tasks.push(Task::Ba);
            }
            let spec = LayerSpec::dense(vec![3, 5, tasks.len()]).unwrap();
            let model = init_network::<f64>(spec, rng.random()).unwrap();
            coverages.push(tasks.clone());
            members.push(ConsensusMember::new(model, tasks).unwrap());
        }

        let n = 30;
        let val_x = Array2::from_shape_fn((n, 3), |_| rng.random::<f64>() * 2.0 - 1.0);
        let val_labels = Array2::from_shape_fn((n, TASK_COUNT), |_| rng.random::<f64>());
        let mut val_mask = Array2::from_shape_fn((n, TASK_COUNT), |_| rng.random::<f64>() < 0.8);
        for t in 0..TASK_COUNT {
            let row = rng.random_range(0..n);
            val_mask[(row, t)] = true;
        }

        // Independent per-member accuracy table.
        let mut best = [f64::NEG_INFINITY; TASK_COUNT];
        for member in &members {
            let preds = forward(&member.model, &val_x).unwrap();
            for (col, task) in member.tasks.iter().enumerate() {
                let t = task.index();
                let mut hits = 0usize;
                let mut total = 0usize;
                for i in 0..n {
                    if val_mask[(i, t)] {
                        total += 1;
                        if (preds[(i, col)] - val_labels[(i, t)]).abs() <= 0.1 {
                            hits += 1;
                        }
                    }
                }
                let acc = 100.0 * hits as f64 / total as f64;
                if acc > best[t] {
                    best[t] = acc;
                }
            }
        }

        let (consensus, _) = build_consensus(members, &val_x, &val_labels, &val_mask).unwrap();
        let preds = consensus.predict(&val_x).unwrap();
        for task in Task::ALL {
            let t = task.index();
            let mut hits = 0usize;
            let mut total = 0usize;
            for i in 0..n {
                if val_mask[(i, t)] {
                    total += 1;
                    if (preds[(i, t)] - val_labels[(i, t)]).abs() <= 0.1 {
                        hits += 1;
                    }
                }
            }
            let acc = 100.0 * hits as f64 / total as f64;
            assert_eq!(
                acc, best[t],
                "round {round}: consensus accuracy for {task} below the best member"
            );
        }
    }
    pass(
        "consensus-dominance",
        started,
        Duration::from_secs(60),
        "100 randomized member configurations, exact equality with max",
    );
}

// ----------------------------------------------------------------------
// Metric oracles: accuracy/MAE/recall match brute-force reimplementations
// on 1000 random vectors to 1e-12; the threshold ladder never decreases.
// ----------------------------------------------------------------------

#[test]
fn metric_oracles() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for round in 0..1000 {
        let n = rng.random_range(1..=50);
        let pred: Vec<f64> = (0..n).map(|_| rng.random()).collect();
        let label: Vec<f64> = (0..n).map(|_| rng.random()).collect();
        let binary: Vec<f64> = (0..n)
            .map(|_| if rng.random::<f64>() < 0.4 { 1.0 } else { 0.0 })
            .collect();
        let t = rng.random::<f64>() * 0.4 + 0.05;

        let hits = pred
            .iter()
            .zip(&label)
            .filter(|(p, l)| (**p - **l).abs() <= t)
            .count();
        let expected_acc = 100.0 * hits as f64 / n as f64;
        assert!((accuracy_at(&pred, &label, t).unwrap() - expected_acc).abs() <= 1e-12);

        let expected_mae = pred
            .iter()
            .zip(&label)
            .map(|(p, l)| (p - l).abs())
            .sum::<f64>()
            / n as f64;
        assert!((mae(&pred, &label).unwrap() - expected_mae).abs() <= 1e-12);

        let positives = binary.iter().filter(|&&l| l == 1.0).count();
        let computed = recall(&pred, &binary, 0.5);
        if positives == 0 {
            assert!(computed.is_err(), "round {round}");
        } else {
            let tp = pred
                .iter()
                .zip(&binary)
                .filter(|(p, l)| **l == 1.0 && **p >= 0.5)
                .count();
            let expected = tp as f64 / positives as f64;
            assert!((computed.unwrap() - expected).abs() <= 1e-12);
        }

        // Threshold ladder 0.1 / 0.2 / 0.3 is non-decreasing.
        let a1 = accuracy_at(&pred, &label, 0.1).unwrap();
        let a2 = accuracy_at(&pred, &label, 0.2).unwrap();
        let a3 = accuracy_at(&pred, &label, 0.3).unwrap();
        assert!(a1 <= a2 && a2 <= a3, "round {round}");
    }
    pass(
        "metric-oracles",
        started,
        Duration::from_secs(10),
        "1000 vectors vs brute force to 1e-12; ladder monotone",
    );
}

// ----------------------------------------------------------------------
// Checkpoint round-trip: save -> load -> forward is bit-identical to the
// in-memory model on 100 random inputs.
// ----------------------------------------------------------------------

#[test]
fn checkpoint_round_trip() {
    let started = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.pkmodel.json");
    let spec = LayerSpec::dense(vec![12, 9, 6, 4]).unwrap();
    let mut model: NetworkModel<f64> = init_network(spec, 77).unwrap();
    // Give the optimizer state non-trivial values too.
    let data = TrainData::new(
        Array2::from_shape_fn((16, 12), |(i, j)| ((i * 5 + j) as f64).sin()),
        Array2::from_elem((16, 4), 0.4),
        Array2::from_elem((16, 4), true),
    )
    .unwrap();
    let cfg = TrainConfig {
        layers: vec![12, 9, 6, 4],
        activations: None,
        lr: 0.05,
        beta1: 0.5,
        beta2: 0.999,
        lambda: 0.01,
        eps: 1e-8,
        epochs: 3,
        batch_size: Some(8),
        seed: 5,
        task_weights: Some(vec![1.0; 4]),
        pos_neg_weights: None,
        frozen_layers: 0,
    };
    let loss: LossSpec<f64> = cfg.loss().unwrap();
    train(&mut model, &data, None, &loss, &cfg).unwrap();

    save_model(&model, "multitask", &path).unwrap();
    let (loaded, _) = load_model::<f64>(&path).unwrap();

    let mut rng = ChaCha8Rng::seed_from_u64(123);
    for _ in 0..100 {
        let x = Array2::from_shape_fn((3, 12), |_| rng.random::<f64>() * 4.0 - 2.0);
        let a = forward(&model, &x).unwrap();
        let b = forward(&loaded, &x).unwrap();
        assert_eq!(a, b, "forward output differs after reload");
    }
    pass(
        "checkpoint-round-trip",
        started,
        Duration::from_secs(10),
        "bit-identical forward on 100 random inputs",
    );
}

// ----------------------------------------------------------------------
// End-to-end smoke: the full pipeline on the bundled 300-molecule fixture
// exits 0 within the time budget, artifacts included.
// ----------------------------------------------------------------------

fn run_cli(dir: &Path, args: &[&str]) -> std::process::Output {
    std::process::Command::new(env!("CARGO_BIN_EXE_pkpredict"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("spawn pkpredict")
}

#[test]
fn end_to_end_smoke() {
    let started = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    for file in ["pk300.csv", "bioactivity300.csv", "smoke_config.json"] {
        std::fs::copy(fixtures.join(file), dir.path().join(file)).unwrap();
    }

    // Evaluating before anything exists must fail with a diagnostic.
    let premature = run_cli(dir.path(), &["--config", "smoke_config.json", "evaluate"]);
    assert!(!premature.status.success());
    assert!(
        String::from_utf8_lossy(&premature.stderr).contains("MissingArtifact"),
        "stderr: {}",
        String::from_utf8_lossy(&premature.stderr)
    );

    for step in [
        vec!["--config", "smoke_config.json", "fingerprint"],
        vec!["--config", "smoke_config.json", "split"],
        vec!["--config", "smoke_config.json", "pretrain"],
        vec!["--config", "smoke_config.json", "train"],
        vec![
            "--config",
            "smoke_config.json",
            "transfer",
            "--threads",
            "3",
        ],
        vec!["--config", "smoke_config.json", "consensus"],
        vec!["--config", "smoke_config.json", "evaluate"],
        vec!["--config", "smoke_config.json", "predict"],
    ] {
        let output = run_cli(dir.path(), &step);
        assert!(
            output.status.success(),
            "step {:?} failed:\n{}\n{}",
            step,
            String::from_utf8_lossy(&output.stdout),
            String::from_utf8_lossy(&output.stderr)
        );
    }

    for artifact in [
        "out/fingerprints.csv",
        "out/split.csv",
        "out/se_report.json",
        "out/pretrain.pkmodel.json",
        "out/multitask.pkmodel.json",
        "out/transfer_ba.pkmodel.json",
        "out/transfer_ppbr.pkmodel.json",
        "out/transfer_vdss_hl.pkmodel.json",
        "out/consensus.json",
        "out/report.json",
        "out/report.txt",
        "out/predictions.csv",
        "out/run_manifest.json",
    ] {
        assert!(
            dir.path().join(artifact).exists(),
            "missing artifact {artifact}"
        );
    }

    // Identical seeds reproduce identical split files.
    let split_a = std::fs::read(dir.path().join("out/split.csv")).unwrap();
    let rerun = run_cli(dir.path(), &["--config", "smoke_config.json", "split"]);
    assert!(rerun.status.success());
    let split_b = std::fs::read(dir.path().join("out/split.csv")).unwrap();
    assert_eq!(split_a, split_b);

    pass(
        "end-to-end-smoke",
        started,
        Duration::from_secs(300),
        "fingerprint→split→pretrain→train→transfer→consensus→evaluate→predict, exit 0",
    );
}
