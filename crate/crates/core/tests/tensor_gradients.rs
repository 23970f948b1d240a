//! Finite-difference verification for every differentiable op.
//!
//! Each op gets 50 randomized trials: random small shapes, random inputs,
//! loss = sum(op(inputs) ⊙ random_weights) so every output entry contributes.
//! The analytic gradient of every input coordinate must match a central
//! difference with relative error below 1e-4.

use std::rc::Rc;

use coref_core::tensor::{
    check_all_params, Matrix, ParamId, ParamStore, Tape, Var,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TRIALS: u64 = 50;
const TOL: f64 = 1e-4;
const H: f64 = 1e-5;

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, avoid_kink: bool) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| {
        let mut x: f64 = rng.gen_range(-2.0..2.0);
        if avoid_kink {
            // Keep inputs away from piecewise-linear kinks so central
            // differences stay valid.
            while x.abs() < 0.05 {
                x = rng.gen_range(-2.0..2.0);
            }
        }
        x
    })
}

fn mixing_weights(seed: u64, rows: usize, cols: usize) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    Matrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0))
}

/// Run one gradient-check trial. `build` constructs the op output from the
/// leased inputs; the harness mixes it into a scalar, differentiates, and
/// sweeps every input coordinate with central differences.
fn check_trial<F>(op: &str, trial: u64, shapes: &[(usize, usize)], avoid_kink: bool, build: F)
where
    F: for<'t> Fn(&'t Tape, &[Var<'t>]) -> Var<'t>,
{
    let mut rng = ChaCha8Rng::seed_from_u64(trial.wrapping_mul(0x5851_f42d_4c95_7f2d));
    let mut store = ParamStore::new();
    let ids: Vec<ParamId> = shapes
        .iter()
        .enumerate()
        .map(|(k, &(r, c))| store.register(format!("x{}", k), random_matrix(&mut rng, r, c, avoid_kink)))
        .collect();

    let eval = |s: &ParamStore| -> f64 {
        let t = Tape::new();
        let vars: Vec<Var> = ids.iter().map(|&id| t.param(s, id)).collect();
        let out = build(&t, &vars);
        let (r, c) = out.shape();
        let w = t.leaf(mixing_weights(trial, r, c));
        t.value((out * w).sum()).item()
    };

    let t = Tape::new();
    let vars: Vec<Var> = ids.iter().map(|&id| t.param(&store, id)).collect();
    let out = build(&t, &vars);
    let (r, c) = out.shape();
    let w = t.leaf(mixing_weights(trial, r, c));
    let loss = (out * w).sum();
    let grads = t.backward(loss).unwrap();
    let analytic = t.param_grads(&grads, &store);

    let report = check_all_params(&store, &analytic, H, eval);
    assert!(
        report.max_rel_err < TOL,
        "op `{}` trial {} failed gradient check: {:?}",
        op,
        trial,
        report
    );
}

fn dims(rng: &mut ChaCha8Rng) -> usize {
    rng.gen_range(1..6)
}

#[test]
fn add_sub_mul_gradients() {
    for trial in 0..TRIALS {
        let mut rng = ChaCha8Rng::seed_from_u64(trial);
        let (r, c) = (dims(&mut rng), dims(&mut rng));
        check_trial("add", trial, &[(r, c), (r, c)], false, |_, v| v[0] + v[1]);
        check_trial("sub", trial, &[(r, c), (r, c)], false, |_, v| v[0] - v[1]);
        check_trial("mul", trial, &[(r, c), (r, c)], false, |_, v| v[0] * v[1]);
    }
}

#[test]
fn affine_const_gradients() {
    for trial in 0..TRIALS {
        let mut rng = ChaCha8Rng::seed_from_u64(trial ^ 11);
        let (r, c) = (dims(&mut rng), dims(&mut rng));
        let scale = rng.gen_range(-3.0..3.0);
        let shift = rng.gen_range(-1.0..1.0);
        check_trial("affine_const", trial, &[(r, c)], false, move |_, v| v[0].affine(scale, shift));
    }
}

#[test]
fn matmul_gradients() {
    for trial in 0..TRIALS {
        let mut rng = ChaCha8Rng::seed_from_u64(trial ^ 22);
        let (r, k, c) = (dims(&mut rng), dims(&mut rng), dims(&mut rng));
        check_trial("matmul", trial, &[(r, k), (k, c)], false, |_, v| v[0].matmul(v[1]));
    }
}

#[test]
fn transpose_gradients() {
    for trial in 0..TRIALS {
        let mut rng = ChaCha8Rng::seed_from_u64(trial ^ 33);
        let (r, c) = (dims(&mut rng), dims(&mut rng));
        check_trial("transpose", trial, &[(r, c)], false, |_, v| v[0].transpose());
    }
}

#[test]
fn concat_gradients() {
    for trial in 0..TRIALS {
        let mut rng = ChaCha8Rng::seed_from_u64(trial ^ 44);
        let r = dims(&mut rng);
        let (c1, c2) = (dims(&mut rng), dims(&mut rng));
        check_trial("concat_cols", trial, &[(r, c1), (r, c2)], false, |t, v| {
            t.concat_cols(&[v[0], v[1]])
        });
        let c = dims(&mut rng);
        let (r1, r2) = (dims(&mut rng), dims(&mut rng));
        check_trial("concat_rows", trial, &[(r1, c), (r2, c)], false, |t, v| {
            t.concat_rows(&[v[0], v[1]])
        });
    }
}

#[test]
fn slice_cols_gradients() {
    for trial in 0..TRIALS {
        let mut rng = ChaCha8Rng::seed_from_u64(trial ^ 55);
        let r = dims(&mut rng);
        let c = rng.gen_range(2..7);
        let start = rng.gen_range(0..c - 1);
        let len = rng.gen_range(1..=c - start);
        check_trial("slice_cols", trial, &[(r, c)], false, move |_, v| v[0].slice_cols(start, len));
    }
}

#[test]
fn gather_scatter_gradients() {
    for trial in 0..TRIALS {
        let mut rng = ChaCha8Rng::seed_from_u64(trial ^ 66);
        let (r, c) = (rng.gen_range(1..6), dims(&mut rng));
        let n = rng.gen_range(1..8);
        let idx: Rc<Vec<usize>> = Rc::new((0..n).map(|_| rng.gen_range(0..r)).collect());
        let idx2 = Rc::clone(&idx);
        check_trial("gather_rows", trial, &[(r, c)], false, move |_, v| {
            v[0].gather_rows(Rc::clone(&idx2))
        });
        // Scatter: input has one row per index entry.
        let out_rows = r;
        let idx3 = Rc::clone(&idx);
        check_trial("scatter_add_rows", trial, &[(n, c)], false, move |_, v| {
            v[0].scatter_add_rows(Rc::clone(&idx3), out_rows)
        });
    }
}

#[test]
fn scale_rows_and_bias_gradients() {
    for trial in 0..TRIALS {
        let mut rng = ChaCha8Rng::seed_from_u64(trial ^ 77);
        let (r, c) = (dims(&mut rng), dims(&mut rng));
        check_trial("scale_rows", trial, &[(r, c), (r, 1)], false, |_, v| v[0].scale_rows(v[1]));
        check_trial("add_row_broadcast", trial, &[(r, c), (1, c)], false, |_, v| v[0].add_row(v[1]));
    }
}

#[test]
fn nonlinearity_gradients() {
    for trial in 0..TRIALS {
        let mut rng = ChaCha8Rng::seed_from_u64(trial ^ 88);
        let (r, c) = (dims(&mut rng), dims(&mut rng));
        check_trial("relu", trial, &[(r, c)], true, |_, v| v[0].relu());
        check_trial("leaky_relu", trial, &[(r, c)], true, |_, v| v[0].leaky_relu(0.2));
        check_trial("sigmoid", trial, &[(r, c)], false, |_, v| v[0].sigmoid());
    }
}

#[test]
fn softmax_gradients() {
    for trial in 0..TRIALS {
        let mut rng = ChaCha8Rng::seed_from_u64(trial ^ 99);
        let (r, c) = (dims(&mut rng), dims(&mut rng));
        check_trial("row_softmax", trial, &[(r, c)], false, |_, v| v[0].row_softmax());

        let n = rng.gen_range(1..9);
        let groups = rng.gen_range(1..=n);
        let seg: Rc<Vec<usize>> = Rc::new((0..n).map(|k| k % groups).collect());
        let seg2 = Rc::clone(&seg);
        check_trial("segment_softmax", trial, &[(n, 1)], false, move |_, v| {
            v[0].segment_softmax(Rc::clone(&seg2))
        });
        let seg3 = Rc::clone(&seg);
        check_trial("segment_log_sum_exp", trial, &[(n, 1)], false, move |_, v| {
            v[0].segment_log_sum_exp(Rc::clone(&seg3), groups)
        });
    }
}

#[test]
fn reduction_gradients() {
    for trial in 0..TRIALS {
        let mut rng = ChaCha8Rng::seed_from_u64(trial ^ 111);
        let (r, c) = (dims(&mut rng), dims(&mut rng));
        check_trial("sum", trial, &[(r, c)], false, |_, v| v[0].sum());
        check_trial("mean", trial, &[(r, c)], false, |_, v| v[0].mean());
    }
}

#[test]
fn composed_network_gradients() {
    // A small feed-forward chain exercising op interactions:
    // relu(x W1 + b1) W2 + b2, then sigmoid-gated blend and a softmax loss.
    for trial in 0..10 {
        let mut rng = ChaCha8Rng::seed_from_u64(trial ^ 222);
        let n = rng.gen_range(2..5);
        let d = rng.gen_range(2..5);
        let h = rng.gen_range(2..5);
        check_trial(
            "ffnn_chain",
            trial,
            &[(n, d), (d, h), (1, h), (h, d), (1, d), (d, d)],
            true,
            |_, v| {
                let hidden = v[0].matmul(v[1]).add_row(v[2]).relu();
                let out = hidden.matmul(v[3]).add_row(v[4]);
                let gate = v[0].matmul(v[5]).sigmoid();
                let blended = gate * out + (gate.affine(-1.0, 1.0)) * v[0];
                blended.row_softmax()
            },
        );
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Row softmax output rows always sum to 1 and entries lie in (0, 1].
    #[test]
    fn row_softmax_rows_sum_to_one(
        rows in 1usize..5,
        cols in 1usize..6,
        seed in any::<u64>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = Matrix::from_fn(rows, cols, |_, _| rng.gen_range(-30.0..30.0));
        let t = Tape::new();
        let y = t.leaf(m).row_softmax();
        let v = t.value(y);
        for i in 0..rows {
            let s: f64 = v.row(i).iter().sum();
            prop_assert!((s - 1.0).abs() < 1e-9);
            prop_assert!(v.row(i).iter().all(|&x| x > 0.0 && x <= 1.0));
        }
    }

    /// Gather and scatter-add are adjoint: <scatter(x), y> == <x, gather(y)>.
    #[test]
    fn gather_scatter_adjoint(
        rows in 1usize..6,
        cols in 1usize..4,
        n in 1usize..8,
        seed in any::<u64>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let idx: Rc<Vec<usize>> = Rc::new((0..n).map(|_| rng.gen_range(0..rows)).collect());
        let x = Matrix::from_fn(n, cols, |_, _| rng.gen_range(-2.0..2.0));
        let y = Matrix::from_fn(rows, cols, |_, _| rng.gen_range(-2.0..2.0));

        let t = Tape::new();
        let xv = t.leaf(x);
        let yv = t.leaf(y);
        let lhs = (xv.scatter_add_rows(Rc::clone(&idx), rows) * yv).sum();
        let rhs = (xv * yv.gather_rows(idx)).sum();
        prop_assert!((t.value(lhs).item() - t.value(rhs).item()).abs() < 1e-9);
    }

    /// Slicing a concatenation recovers the original parts.
    #[test]
    fn concat_slice_round_trip(
        rows in 1usize..5,
        c1 in 1usize..4,
        c2 in 1usize..4,
        seed in any::<u64>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = Matrix::from_fn(rows, c1, |_, _| rng.gen_range(-2.0..2.0));
        let b = Matrix::from_fn(rows, c2, |_, _| rng.gen_range(-2.0..2.0));
        let t = Tape::new();
        let av = t.leaf(a.clone());
        let bv = t.leaf(b.clone());
        let cat = t.concat_cols(&[av, bv]);
        prop_assert_eq!(&*t.value(cat.slice_cols(0, c1)), &a);
        prop_assert_eq!(&*t.value(cat.slice_cols(c1, c2)), &b);
    }
}
