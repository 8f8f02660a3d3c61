//! Shared helpers for integration tests: fixture loading, random instances
//! and dense reference implementations written without the library's
//! sparse code paths.

#![allow(dead_code)]

use std::path::PathBuf;

use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use nerfuse_core::corpus::{parse_conll, parse_conllu_deps, Corpus, Scheme, TagSet};
use nerfuse_core::embedio::{load_glove, read_ctxe, ContextualFile, WordVectors};

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

pub struct Fixture {
    pub corpus: Corpus,
    pub wv: WordVectors,
    pub ctx: ContextualFile,
}

pub fn load_fixture() -> Fixture {
    let text = std::fs::read_to_string(fixture("train.conll")).unwrap();
    let corpus = parse_conll(&text, &TagSet::conll2003(Scheme::Iob1)).unwrap();
    let deps = parse_conllu_deps(&std::fs::read_to_string(fixture("train.conllu")).unwrap()).unwrap();
    let corpus = corpus.with_deps(deps).unwrap();
    let glove = std::io::BufReader::new(std::fs::File::open(fixture("glove.txt")).unwrap());
    let wv = load_glove(glove, None).unwrap();
    let ctx = read_ctxe(&mut std::fs::File::open(fixture("train.ctxe")).unwrap()).unwrap();
    Fixture { corpus, wv, ctx }
}

pub fn manifest() -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(fixture("manifest.json")).unwrap()).unwrap()
}

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-1.0..1.0))
}

/// Undirected edges of a random graph on `n` nodes, i < j.
pub fn random_edges(rng: &mut ChaCha8Rng, n: usize, p: f64) -> Vec<(usize, usize)> {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    edges
}

/// `D^-1/2 (A + I) D^-1/2` from an edge list, as a dense nested vector.
pub fn dense_norm_adj(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<f64>> {
    let mut a = vec![vec![0.0; n]; n];
    for (i, row) in a.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for &(i, j) in edges {
        a[i][j] = 1.0;
        a[j][i] = 1.0;
    }
    let deg: Vec<f64> = a.iter().map(|row| row.iter().sum()).collect();
    for i in 0..n {
        for j in 0..n {
            a[i][j] /= deg[i].sqrt() * deg[j].sqrt();
        }
    }
    a
}

pub fn matmul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let inner = b.len();
    let cols = if inner == 0 { 0 } else { b[0].len() };
    a.iter()
        .map(|row| (0..cols).map(|c| (0..inner).map(|k| row[k] * b[k][c]).sum()).collect())
        .collect()
}

pub fn to_nested(m: &Array2<f64>) -> Vec<Vec<f64>> {
    m.rows().into_iter().map(|r| r.to_vec()).collect()
}

/// `Â ReLU(Â X W0) W1` with plain loops.
pub fn dense_gcn(adj: &[Vec<f64>], x: &Array2<f64>, w0: &Array2<f64>, w1: &Array2<f64>) -> Vec<Vec<f64>> {
    let pre = matmul(adj, &matmul(&to_nested(x), &to_nested(w0)));
    let h1: Vec<Vec<f64>> = pre.iter().map(|r| r.iter().map(|v| v.max(0.0)).collect()).collect();
    matmul(&matmul(adj, &h1), &to_nested(w1))
}

pub fn dense_softmax(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    rows.iter()
        .map(|r| {
            let m = r.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let e: Vec<f64> = r.iter().map(|v| (v - m).exp()).collect();
            let s: f64 = e.iter().sum();
            e.iter().map(|v| v / s).collect()
        })
        .collect()
}

pub fn max_abs_diff(a: &Array2<f64>, b: &[Vec<f64>]) -> f64 {
    assert_eq!(a.nrows(), b.len());
    let mut worst: f64 = 0.0;
    for (i, row) in b.iter().enumerate() {
        assert_eq!(a.ncols(), row.len());
        for (j, v) in row.iter().enumerate() {
            worst = worst.max((a[[i, j]] - v).abs());
        }
    }
    worst
}

/// `|a - n| / max(|a| + |n|, 1e-6)`.
pub fn rel_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-6)
}

pub const FD_EPS: f64 = 1e-5;

/// Largest relative error between `grad` and central differences of
/// `loss` with respect to every entry of `param`.
pub fn fd_check<F>(param: &mut Array2<f64>, grad: &Array2<f64>, mut loss: F) -> f64
where
    F: FnMut(&Array2<f64>) -> f64,
{
    let mut worst: f64 = 0.0;
    for idx in 0..param.len() {
        let (r, c) = (idx / param.ncols(), idx % param.ncols());
        let orig = param[[r, c]];
        param[[r, c]] = orig + FD_EPS;
        let up = loss(param);
        param[[r, c]] = orig - FD_EPS;
        let down = loss(param);
        param[[r, c]] = orig;
        let numeric = (up - down) / (2.0 * FD_EPS);
        worst = worst.max(rel_error(grad[[r, c]], numeric));
    }
    worst
}

pub mod gradcheck {
    use super::*;
    use nerfuse_core::embedio::AlignmentMask;
    use nerfuse_core::fusion::{batch_loss, batch_loss_and_grads, JointModel, Mode, SentenceInput};
    use nerfuse_core::gcn::{gcn_backward, normalize_adjacency, GcnParams, GcnTap, SentenceGraph};
    use rand::SeedableRng;

    /// Standalone GCN on a random graph with at most 6 nodes and all
    /// dimensions at most 8. Returns the worst relative error.
    pub fn gcn_instance(seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(1..=6);
        let (c, h, f) = (
            rng.random_range(1..=8),
            rng.random_range(1..=8),
            rng.random_range(2..=8),
        );
        let edges = random_edges(&mut rng, n, 0.4);
        let adj = normalize_adjacency(&SentenceGraph::new(n, edges).unwrap());
        let x = random_matrix(&mut rng, n, c);
        let mut p = GcnParams::new(random_matrix(&mut rng, c, h), random_matrix(&mut rng, h, f)).unwrap();
        let gold: Vec<usize> = (0..n).map(|_| rng.random_range(0..f)).collect();
        let mut mask: Vec<bool> = (0..n).map(|_| rng.random::<f64>() < 0.7).collect();
        mask[0] = true;

        let (grads, _) = gcn_backward(&x, &adj, &p, &gold, &mask, None).unwrap();
        let w1 = p.w1.clone();
        let e0 = fd_check(&mut p.w0, &grads.w0, |w0| {
            let q = GcnParams::new(w0.clone(), w1.clone()).unwrap();
            gcn_backward(&x, &adj, &q, &gold, &mask, None).unwrap().1
        });
        let w0 = p.w0.clone();
        let e1 = fd_check(&mut p.w1, &grads.w1, |w1| {
            let q = GcnParams::new(w0.clone(), w1.clone()).unwrap();
            gcn_backward(&x, &adj, &q, &gold, &mask, None).unwrap().1
        });
        e0.max(e1)
    }

    fn sentence(rng: &mut ChaCha8Rng, glove: usize, ctx: usize, classes: usize, id: usize) -> SentenceInput {
        let words = rng.random_range(1..=4);
        let mut bits = Vec::new();
        for _ in 0..words {
            let pieces = rng.random_range(1..=2);
            bits.extend(std::iter::once(1).chain(std::iter::repeat_n(0, pieces - 1)));
        }
        let mask = AlignmentMask::new(bits).unwrap();
        let edges = random_edges(rng, words, 0.5);
        SentenceInput {
            sent_id: id,
            x: Some(random_matrix(rng, words, glove)),
            adj: Some(normalize_adjacency(&SentenceGraph::new(words, edges).unwrap())),
            ctx: Some(random_matrix(rng, mask.len(), ctx)),
            gold: (0..words).map(|_| rng.random_range(0..classes)).collect(),
            mask,
        }
    }

    /// End-to-end check of all parameter tensors on a random 2-sentence
    /// microbatch. Returns the worst relative error.
    pub fn joint_instance(seed: u64, mode: Mode, tap: GcnTap) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let glove = rng.random_range(1..=8);
        let hidden = rng.random_range(1..=8);
        let global = rng.random_range(1..=8);
        let ctx = rng.random_range(1..=8);
        let classes = rng.random_range(2..=8);
        let mut model = JointModel::init(mode, tap, glove, hidden, global, ctx, classes, &mut rng).unwrap();
        // Spread the weights so ReLU units are not all inactive.
        model.head.w_out.mapv_inplace(|v| v * 3.0);
        model.head.b = random_matrix(&mut rng, 1, classes).row(0).to_owned();
        let batch = vec![
            sentence(&mut rng, glove, ctx, classes, 0),
            sentence(&mut rng, glove, ctx, classes, 1),
        ];
        let (_, grads) = batch_loss_and_grads(&model, &batch).unwrap();

        let mut worst: f64 = 0.0;
        let mut m = model.clone();
        worst = worst.max(fd_check(&mut model.head.w_out.clone(), &grads.w_out, |w| {
            m.head.w_out = w.clone();
            batch_loss(&m, &batch).unwrap()
        }));
        let mut m = model.clone();
        let b_grad = grads.b.clone().insert_axis(ndarray::Axis(0));
        worst = worst.max(fd_check(
            &mut model.head.b.clone().insert_axis(ndarray::Axis(0)),
            &b_grad,
            |b| {
                m.head.b = b.row(0).to_owned();
                batch_loss(&m, &batch).unwrap()
            },
        ));
        if let (Some(p), Some(g)) = (model.gcn(), &grads.gcn) {
            let mut m = model.clone();
            worst = worst.max(fd_check(&mut p.w0.clone(), &g.w0, |w| {
                m.gcn_mut().unwrap().w0 = w.clone();
                batch_loss(&m, &batch).unwrap()
            }));
            if p.output_dim() > 0 {
                let mut m = model.clone();
                worst = worst.max(fd_check(&mut p.w1.clone(), &g.w1, |w| {
                    m.gcn_mut().unwrap().w1 = w.clone();
                    batch_loss(&m, &batch).unwrap()
                }));
            }
        }
        worst
    }
}

pub mod cli {
    use super::fixture;
    use std::path::{Path, PathBuf};
    use std::process::{Command, Output};

    /// A run configuration in `dir` pointing every split at the bundled
    /// fixture, with `extra` TOML lines appended.
    pub fn write_config(dir: &Path, extra: &str) -> PathBuf {
        let p = |name: &str| fixture(name).display().to_string();
        let mut text = String::new();
        for split in ["train", "test", "input"] {
            text += &format!("{split} = {:?}\n", p("train.conll"));
            text += &format!("{split}_deps = {:?}\n", p("train.conllu"));
            text += &format!("{split}_ctxe = {:?}\n", p("train.ctxe"));
        }
        text += &format!(
            "glove = {:?}\nout = {:?}\n",
            p("glove.txt"),
            dir.join("out").display().to_string()
        );
        text += extra;
        let path = dir.join("run.toml");
        std::fs::write(&path, text).unwrap();
        path
    }

    /// Quick settings for command-level tests.
    pub const SHORT_RUN: &str =
        "optimizer = \"adam\"\nlearning_rate = 0.003\nepochs = 3\ngcn_hidden_dim = 16\nglobal_dim = 16\n";

    pub fn nerfuse<I, S>(args: I) -> Output
    where
        I: IntoIterator<Item = S>,
        S: AsRef<std::ffi::OsStr>,
    {
        Command::new(env!("CARGO_BIN_EXE_nerfuse")).args(args).output().unwrap()
    }

    pub fn code(out: &Output) -> i32 {
        out.status.code().expect("exited normally")
    }
}
