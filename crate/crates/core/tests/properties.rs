use std::collections::BTreeSet;

use graphsr::baselines::{class_weights, resample, unlabeled_selection};
use graphsr::gnn::metrics::{accuracy, macro_f1};
use graphsr::gnn::{train, val_metrics, Arch, LabelledNodes, TrainConfig};
use graphsr::graph::{
    load_dataset, make_imbalanced_split, make_synthetic_graph, save_canonical, DatasetFormat, Graph, LoadOptions,
    SplitSpec, SyntheticSpec,
};
use graphsr::nn::{DenseMatrix, Dropout};
use graphsr::rl::{policy_loss_and_grad, reward, run_episode, Action, EnvState, Mode, PolicyAgent, RewardTracker};
use graphsr::rng::seeded;
use graphsr::selection::{build_candidates, compute_centers, ClassCenter};
use graphsr::{BaselineKind, RlConfig, SelectionEnv};
use proptest::prelude::*;

fn sbm(n_per_class: usize, m: usize, seed: u64) -> Graph {
    make_synthetic_graph(&SyntheticSpec::new(n_per_class * m, m, 0.3, 0.02, 6, seed)).unwrap()
}

fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> DenseMatrix {
    DenseMatrix::from_vec(rows, cols, data).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn split_partitions_nodes_with_exact_counts(
        m in 2usize..5,
        majority in 2usize..8,
        ratio in 0.2f64..=1.0,
        val in 1usize..4,
        test in 1usize..4,
        minority_mask in 1u8..15,
        seed in any::<u64>(),
    ) {
        let g = sbm(20, m, seed % 1000);
        let minority: BTreeSet<usize> = (0..m).filter(|c| minority_mask & (1 << c) != 0).collect();
        prop_assume!(!minority.is_empty());
        prop_assume!(majority as f64 * ratio >= 0.5);
        let spec = SplitSpec {
            minority_classes: minority.clone(),
            majority_count: majority,
            imbalance_ratio: ratio,
            val_per_class: val,
            test_per_class: test,
            seed,
        };
        let split = make_imbalanced_split(&g, &spec).unwrap();
        let sets = [&split.train, &split.val, &split.test, &split.unlabelled];
        let mut all = BTreeSet::new();
        let mut total = 0;
        for s in sets {
            total += s.len();
            all.extend(s.iter().copied());
        }
        prop_assert_eq!(total, g.num_nodes());
        prop_assert_eq!(all.len(), g.num_nodes());
        let counts = split.train_class_counts();
        for c in 0..m {
            prop_assert_eq!(counts[c], spec.train_count(c).unwrap());
            prop_assert_eq!(split.val.iter().filter(|&&v| g.label(v) == c).count(), val);
            prop_assert_eq!(split.test.iter().filter(|&&v| g.label(v) == c).count(), test);
        }
        for (&v, &y) in split.train.iter().zip(&split.train_labels) {
            prop_assert_eq!(g.label(v), y);
        }
    }

    #[test]
    fn row_normalized_rows_sum_to_one(data in prop::collection::vec(0.0f64..5.0, 24), zero_row in 0usize..6) {
        let mut data = data;
        for x in &mut data[zero_row * 4..zero_row * 4 + 4] {
            *x = 0.0;
        }
        let g = Graph::new(matrix(6, 4, data), vec![0; 6], 1, [(0, 1)]).unwrap().row_normalized();
        for v in 0..6 {
            let s: f64 = g.features().row(v).iter().sum();
            if v == zero_row || s == 0.0 {
                prop_assert_eq!(s, 0.0);
            } else {
                prop_assert!((s - 1.0).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn macro_f1_invariant_under_relabelling(
        pairs in prop::collection::vec((0usize..4, 0usize..4), 1..60),
        perm in Just(vec![0usize, 1, 2, 3]).prop_shuffle(),
    ) {
        let (pred, labels): (Vec<usize>, Vec<usize>) = pairs.into_iter().unzip();
        let pp: Vec<usize> = pred.iter().map(|&c| perm[c]).collect();
        let pl: Vec<usize> = labels.iter().map(|&c| perm[c]).collect();
        prop_assert!((macro_f1(&pred, &labels, 4) - macro_f1(&pp, &pl, 4)).abs() <= 1e-12);
        let acc = accuracy(&pred, &labels);
        prop_assert!((0.0..=1.0).contains(&acc));
    }

    #[test]
    fn candidates_are_unlabelled_minority_and_top_k(
        coords in prop::collection::vec(-4i32..=4, 2 * 60),
        pseudo in prop::collection::vec(0usize..3, 40),
        k in 1usize..12,
        shift in (-10i32..=10, -10i32..=10),
    ) {
        // Nodes 0..40 are unlabelled; the minority centre is the mean of four
        // labelled nodes, so integer coordinates keep every distance exact.
        let emb = matrix(60, 2, coords.iter().map(|&c| c as f64).collect());
        let center = |e: &DenseMatrix| {
            let nodes: Vec<usize> = (40..60).filter(|v| v % 5 == 0).collect();
            let mut c = vec![0.0; 2];
            for &v in &nodes {
                c[0] += e.get(v, 0);
                c[1] += e.get(v, 1);
            }
            ClassCenter { class_id: 2, center: c.iter().map(|x| x / nodes.len() as f64).collect() }
        };
        let unlabelled: Vec<usize> = (0..40).collect();
        let set = build_candidates(&emb, &unlabelled, &pseudo, &[center(&emb)], k).unwrap();
        for c in &set.entries {
            prop_assert!(c.node < 40);
            prop_assert_eq!(c.class, 2);
            prop_assert_eq!(pseudo[c.node], 2);
        }
        let chosen: BTreeSet<usize> = set.entries.iter().map(|c| c.node).collect();
        let max_kept = set.entries.iter().map(|c| c.distance).fold(f64::NEG_INFINITY, f64::max);
        let cen = center(&emb);
        for v in (0..40).filter(|v| pseudo[*v] == 2 && !chosen.contains(v)) {
            let d = graphsr::selection::euclidean(emb.row(v), &cen.center);
            prop_assert!(max_kept <= d);
        }

        let shifted = matrix(
            60,
            2,
            (0..60).flat_map(|v| [emb.get(v, 0) + shift.0 as f64, emb.get(v, 1) + shift.1 as f64]).collect(),
        );
        let moved = build_candidates(&shifted, &unlabelled, &pseudo, &[center(&shifted)], k).unwrap();
        prop_assert_eq!(set.nodes(), moved.nodes());
    }

    #[test]
    fn reward_is_plus_or_minus_one(acc in 0.0f64..=1.0, b in 0.0f64..=1.0, accept in any::<bool>()) {
        let a = if accept { Action::Accept } else { Action::Reject };
        let r = reward(acc, b, a);
        prop_assert!(r == 1.0 || r == -1.0);
        let other = if accept { Action::Reject } else { Action::Accept };
        prop_assert_eq!(reward(acc, b, other), -r);
    }

    #[test]
    fn baseline_is_mean_of_last_ten(accs in prop::collection::vec(0.0f64..=1.0, 10..40), acc0 in 0.0f64..=1.0) {
        let mut t = RewardTracker::new(acc0, 10);
        for &a in &accs {
            t.push(a);
        }
        let last = &accs[accs.len() - 10..];
        let mean = last.iter().sum::<f64>() / 10.0;
        prop_assert!((t.baseline() - mean).abs() <= 1e-12);
    }

    #[test]
    fn state_sum_changes_by_added_embedding(
        data in prop::collection::vec(-2.0f64..2.0, 10 * 3),
        train in prop::collection::btree_set(0usize..10, 0..6),
        extra in 0usize..10,
    ) {
        let emb = matrix(10, 3, data);
        let nodes: Vec<usize> = train.iter().copied().collect();
        let base = EnvState::new(LabelledNodes::new(nodes.clone(), vec![0; nodes.len()]), &emb);
        let mut more = nodes.clone();
        more.push(extra);
        let grown = EnvState::new(LabelledNodes::new(more.clone(), vec![0; more.len()]), &emb);
        for j in 0..3 {
            prop_assert!((grown.set_sum[j] - base.set_sum[j] - emb.get(extra, j)).abs() <= 1e-12);
        }
    }

    #[test]
    fn clipped_surrogate_is_bounded(
        logit in -3.0f64..3.0,
        old_lp in -3.0f64..-0.01,
        adv in -5.0f64..5.0,
        eps in 0.05f64..0.5,
        action in 0usize..2,
    ) {
        let logits = matrix(1, 2, vec![logit, -logit]);
        let (loss, _, _, _) = policy_loss_and_grad(&logits, &[action], &[old_lp], &[adv], eps, 0.0).unwrap();
        // The loss is the negated surrogate of this single transition.
        prop_assert!(-loss <= adv.abs() * (1.0 + eps) + 1e-12);
    }

    #[test]
    fn weights_positive_and_monotone(counts in prop::collection::vec(1usize..50, 2..6), en in any::<bool>()) {
        let kind = if en { BaselineKind::EnWeighting } else { BaselineKind::ReWeighting };
        let w = class_weights(kind, &counts, 0.99).unwrap();
        prop_assert!(w.iter().all(|x| x.is_finite() && *x > 0.0));
        for i in 0..counts.len() {
            for j in 0..counts.len() {
                if counts[i] > counts[j] {
                    prop_assert!(w[i] < w[j]);
                }
            }
        }
    }

    #[test]
    fn dropout_expectation_matches_input(rate in 0.1f64..0.8, seed in any::<u64>()) {
        let x = matrix(200, 10, vec![1.0; 2000]);
        let mut d = Dropout::default();
        let y = d.forward(&x, rate, &mut seeded(seed), true);
        let mean = y.as_slice().iter().sum::<f64>() / 2000.0;
        // Each entry is 1/(1-p) with prob 1-p, else 0: variance p/(1-p).
        let sigma = (rate / (1.0 - rate) / 2000.0).sqrt();
        prop_assert!((mean - 1.0).abs() <= 3.0 * sigma + 1e-12, "mean {} sigma {}", mean, sigma);
        let same = d.forward(&x, 0.0, &mut seeded(seed), true);
        prop_assert_eq!(same, x);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn baselines_stay_inside_their_pools(seed in 0u64..1000, kind_idx in 0usize..4) {
        let g = sbm(30, 3, seed);
        let spec = SplitSpec {
            minority_classes: [2].into_iter().collect(),
            majority_count: 8,
            imbalance_ratio: 0.25,
            val_per_class: 5,
            test_per_class: 5,
            seed,
        };
        let split = make_imbalanced_split(&g, &spec).unwrap();
        let before = split.clone();
        let kind = [BaselineKind::OverSampling, BaselineKind::CbSampling, BaselineKind::RuSelection, BaselineKind::SuSelection][kind_idx];
        let train_set: BTreeSet<usize> = split.train.iter().copied().collect();
        let unl: BTreeSet<usize> = split.unlabelled.iter().copied().collect();
        if kind.is_resampling() {
            let out = resample(kind, &split, seed).unwrap();
            prop_assert!(out.nodes.iter().all(|v| train_set.contains(v)));
        } else {
            let emb = g.features().clone();
            let pseudo: Vec<usize> = split.unlabelled.iter().map(|&v| (v * 7 + seed as usize) % 3).collect();
            let out = unlabeled_selection(kind, &split, &emb, &pseudo, seed).unwrap();
            prop_assert!(out.nodes.iter().all(|v| unl.contains(v)));
        }
        prop_assert_eq!(split, before);
    }

    #[test]
    fn loader_round_trip(seed in 0u64..1000) {
        // Loading row-normalizes, so only normalized graphs round-trip.
        let g = sbm(5, 3, seed).row_normalized();
        let dir = tempfile::tempdir().unwrap();
        save_canonical(&g, dir.path()).unwrap();
        let back = load_dataset(dir.path(), DatasetFormat::Canonical, LoadOptions::default()).unwrap();
        prop_assert_eq!(back, g);
    }
}

fn tiny_train_config() -> TrainConfig {
    TrainConfig {
        hidden_dim: 8,
        max_epochs: 40,
        patience: 10,
        ..TrainConfig::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn training_never_ends_below_initial_model(seed in 0u64..1000, sage in any::<bool>()) {
        let g = sbm(15, 3, seed);
        let split = make_imbalanced_split(&g, &SplitSpec {
            minority_classes: [1].into_iter().collect(),
            majority_count: 5,
            imbalance_ratio: 0.4,
            val_per_class: 4,
            test_per_class: 4,
            seed,
        }).unwrap();
        let arch = if sage { Arch::Sage } else { Arch::Gcn };
        let cfg = tiny_train_config();
        let train_set = LabelledNodes::new(split.train.clone(), split.train_labels.clone());
        let val = LabelledNodes::from_graph(&g, &split.val);
        let initial = cfg.new_model(arch, &g, seed);
        let (acc0, _) = val_metrics(&initial, &g, &val).unwrap();
        let out = train(&g, arch, &train_set, &val, &cfg, None, seed).unwrap();
        let (acc, _) = val_metrics(&out.model, &g, &val).unwrap();
        prop_assert!(acc >= acc0);
        prop_assert_eq!(acc, out.best_val_acc);
        let weighted = train(&g, arch, &train_set, &val, &cfg, Some(&[1.0, 1.0, 1.0]), seed).unwrap();
        prop_assert_eq!(weighted.model, out.model);
    }

    #[test]
    fn episodes_grow_training_set_from_candidates(seed in 0u64..1000) {
        let g = sbm(15, 2, seed);
        let split = make_imbalanced_split(&g, &SplitSpec {
            minority_classes: [1].into_iter().collect(),
            majority_count: 5,
            imbalance_ratio: 0.4,
            val_per_class: 4,
            test_per_class: 4,
            seed,
        }).unwrap();
        let cfg = tiny_train_config();
        let train_set = LabelledNodes::new(split.train.clone(), split.train_labels.clone());
        let val = LabelledNodes::from_graph(&g, &split.val);
        let model = train(&g, Arch::Gcn, &train_set, &val, &cfg, None, seed).unwrap().model;
        let z = model.embed(&g).unwrap();
        let pseudo = model.pseudo_label(&g, &split.unlabelled).unwrap();
        let centers = compute_centers(&z, &split).unwrap();
        let cands = build_candidates(&z, &split.unlabelled, &pseudo, &centers, 4).unwrap();
        let rl = RlConfig { finetune_epochs: 2, ..RlConfig::default() };
        let mut env = SelectionEnv::new(&g, &z, &cands, train_set.clone(), val, model, rl.env(), seed).unwrap();
        let mut agent = PolicyAgent::new(env.state_dim(), rl.ppo(), 1.0 / train_set.len() as f64, seed);
        let candidate_nodes: BTreeSet<usize> = cands.nodes().into_iter().collect();
        for (ep, mode) in [Mode::Explore, Mode::Greedy].into_iter().enumerate() {
            let traj = run_episode(&mut agent, &mut env, mode, ep as u64).unwrap();
            prop_assert_eq!(traj.len(), cands.len());
            let final_set: BTreeSet<usize> = env.state().train.nodes.iter().copied().collect();
            prop_assert!(train_set.nodes.iter().all(|v| final_set.contains(v)));
            prop_assert_eq!(env.state().train.len(), train_set.len() + traj.accepted.len());
            prop_assert!(traj.accepted.iter().all(|c| candidate_nodes.contains(&c.node)));
        }
    }
}
