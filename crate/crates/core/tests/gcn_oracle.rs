mod common;

use common::*;
use ndarray::Array2;
use nerfuse_core::gcn::{
    gcn_accuracy, gcn_forward, gcn_forward_full, gcn_hidden, normalize_adjacency, train_gcn, GcnConfig, GcnParams,
    GcnTap, GraphBatch, SentenceGraph,
};
use nerfuse_core::nn::Dropout;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Instance {
    n: usize,
    edges: Vec<(usize, usize)>,
    x: Array2<f64>,
    p: GcnParams,
}

fn instance(seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(1..=10);
    let p_edge = rng.random_range(0.0..0.8);
    let edges = random_edges(&mut rng, n, p_edge);
    let (c, h, f) = (
        rng.random_range(1..=8),
        rng.random_range(1..=8),
        rng.random_range(1..=8),
    );
    let x = random_matrix(&mut rng, n, c);
    let p = GcnParams::new(random_matrix(&mut rng, c, h), random_matrix(&mut rng, h, f)).unwrap();
    Instance { n, edges, x, p }
}

#[test]
fn sparse_forward_matches_dense_on_random_graphs() {
    for seed in 0..200 {
        let inst = instance(seed);
        let adj = normalize_adjacency(&SentenceGraph::new(inst.n, inst.edges.clone()).unwrap());
        let dense_adj = dense_norm_adj(inst.n, &inst.edges);
        assert!(
            max_abs_diff(&adj.to_dense(), &dense_adj) < 1e-12,
            "seed {seed}: adjacency"
        );

        let expected = dense_gcn(&dense_adj, &inst.x, &inst.p.w0, &inst.p.w1);
        let hidden = gcn_hidden(&inst.x, &adj, &inst.p, None).unwrap();
        assert!(max_abs_diff(&hidden, &expected) < 1e-9, "seed {seed}: gcn_hidden");
        let probs = gcn_forward_full(&inst.x, &adj, &inst.p, None).unwrap();
        assert!(
            max_abs_diff(&probs, &dense_softmax(&expected)) < 1e-9,
            "seed {seed}: gcn_forward_full"
        );
    }
}

#[test]
fn relabeling_nodes_permutes_rows() {
    for seed in 0..50 {
        let inst = instance(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let mut perm: Vec<usize> = (0..inst.n).collect();
        perm.shuffle(&mut rng);
        // Node i of the original graph becomes node perm[i].
        let graph = SentenceGraph::new(inst.n, inst.edges.clone()).unwrap();
        let permuted = graph.permuted(&perm);
        let mut x_perm = Array2::zeros(inst.x.raw_dim());
        for (i, &to) in perm.iter().enumerate() {
            x_perm.row_mut(to).assign(&inst.x.row(i));
        }
        let base = gcn_hidden(&inst.x, &normalize_adjacency(&graph), &inst.p, None).unwrap();
        let moved = gcn_hidden(&x_perm, &normalize_adjacency(&permuted), &inst.p, None).unwrap();
        for i in 0..inst.n {
            for j in 0..base.ncols() {
                assert!((base[[i, j]] - moved[[perm[i], j]]).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn dropout_is_unbiased_in_expectation() {
    let inst = instance(3);
    let adj = normalize_adjacency(&SentenceGraph::new(inst.n, inst.edges.clone()).unwrap());
    // Layer-1 output is the first masked layer.
    let eval = gcn_forward(&inst.x, &adj, &inst.p, GcnTap::Layer1, None).unwrap().out;
    let mut mean = Array2::<f64>::zeros(eval.raw_dim());
    let draws = 10_000;
    for seed in 0..draws {
        let mut d = Dropout::new(0.5, seed);
        mean += &gcn_forward(&inst.x, &adj, &inst.p, GcnTap::Layer1, Some(&mut d))
            .unwrap()
            .out;
    }
    mean /= draws as f64;
    let diff = (&mean - &eval).mapv(|v| v * v).sum().sqrt();
    let norm = eval.mapv(|v| v * v).sum().sqrt();
    assert!(diff / norm < 0.02, "relative Frobenius error {}", diff / norm);
}

#[test]
fn fixture_training_learns_and_is_deterministic() {
    let fx = load_fixture();
    let tuned = &manifest()["tuning"]["gcn"];
    let cfg = GcnConfig {
        learning_rate: tuned["learning_rate"].as_f64().unwrap(),
        ..GcnConfig::default()
    };
    assert_eq!(cfg.seed, tuned["seed"].as_u64().unwrap());
    let a = train_gcn(&fx.corpus, &fx.wv, &cfg).unwrap();
    assert_eq!(a.losses.len(), cfg.epochs);
    assert!(a.losses.last().unwrap() < &a.losses[0]);

    let b = train_gcn(&fx.corpus, &fx.wv, &cfg).unwrap();
    assert_eq!(a.params, b.params);
    assert_eq!(a.losses, b.losses);

    let batch = GraphBatch::from_corpus(&fx.corpus, &fx.wv).unwrap();
    let acc = gcn_accuracy(&a.params, &batch).unwrap();
    let reference = tuned["min_train_accuracy"].as_f64().unwrap();
    assert!(acc >= reference, "training accuracy {acc}");
}
