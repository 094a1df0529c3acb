//! Finite-difference gradient checks shared by test targets.
#![allow(dead_code)]

use wdrop_core::linalg::Matrix;
use wdrop_core::nn::{DropoutMask, Gradients, Head, Masking, Mlp};
use wdrop_core::uncertainty::{mse_objective, nll_objective, wdropout_objective};
use wdrop_core::SeededRng;

pub const H: f64 = 1e-5;
pub const TOL: f64 = 1e-5;

#[derive(Clone, Copy, Debug)]
pub enum Loss {
    Mse,
    Nll,
    Wdrop,
}

pub struct Case {
    pub net: Mlp,
    pub x: Matrix,
    pub y: Matrix,
    pub masks: Vec<DropoutMask>,
}

pub fn random_case(loss: Loss, seed: u64) -> Case {
    let mut rng = SeededRng::new(seed);
    let d = 1 + (rng.uniform() * 3.0) as usize;
    let m = 1 + (rng.uniform() * 2.0) as usize;
    let depth = 1 + (rng.uniform() * 2.0) as usize;
    let mut sizes = vec![d];
    sizes.extend((0..depth).map(|_| 2 + (rng.uniform() * 7.0) as usize));
    sizes.push(m);
    let head = if matches!(loss, Loss::Nll) { Head::Gaussian } else { Head::Point };
    let p = 0.3;
    let mut net = Mlp::new(&sizes, head, p, &mut rng).unwrap();
    // Zero biases would park units with all-zero inputs exactly on the
    // ReLU kink, where central differences are one-sided.
    for (t, tensor) in net.params_mut().into_iter().enumerate() {
        if t % 2 == 1 {
            tensor.iter_mut().for_each(|b| *b = 0.5 * rng.standard_normal());
        }
    }
    let batch = 3 + (rng.uniform() * 4.0) as usize;
    let x = Matrix::from_vec(batch, d, (0..batch * d).map(|_| rng.standard_normal()).collect()).unwrap();
    let y = Matrix::from_vec(batch, m, (0..batch * m).map(|_| rng.standard_normal()).collect()).unwrap();
    let n_masks = match loss {
        Loss::Mse => 1,
        Loss::Nll => 0,
        Loss::Wdrop => 5,
    };
    let masks = (0..n_masks).map(|_| DropoutMask::sample(&net, &mut rng)).collect();
    Case { net, x, y, masks }
}

pub fn loss_and_grad(loss: Loss, c: &Case, net: &Mlp) -> (f64, Gradients) {
    let mut g = Gradients::zeros_like(net);
    let value = match loss {
        Loss::Mse => {
            let tape = net.forward_batch(&c.x, Masking::Shared(&c.masks[0])).unwrap();
            let lg = mse_objective(tape.output(), &c.y).unwrap();
            net.backward(&tape, &lg.adjoints[0], &mut g).unwrap();
            lg.loss
        }
        Loss::Nll => {
            let tape = net.forward_batch(&c.x, Masking::Full).unwrap();
            let lg = nll_objective(tape.output(), &c.y).unwrap();
            net.backward(&tape, &lg.adjoints[0], &mut g).unwrap();
            lg.loss
        }
        Loss::Wdrop => {
            let tapes: Vec<_> = c.masks.iter().map(|m| net.forward_batch(&c.x, Masking::Shared(m)).unwrap()).collect();
            let outs: Vec<Matrix> = tapes.iter().map(|t| t.output().clone()).collect();
            let lg = wdropout_objective(&outs, &c.y).unwrap();
            for (t, a) in tapes.iter().zip(&lg.adjoints) {
                net.backward(t, a, &mut g).unwrap();
            }
            lg.loss
        }
    };
    (value, g)
}

pub fn flat(g: &Gradients) -> Vec<f64> {
    g.tensors().concat()
}

pub fn numeric_grad(loss: Loss, c: &Case) -> Vec<f64> {
    let mut net = c.net.clone();
    let lens: Vec<usize> = net.params().iter().map(|t| t.len()).collect();
    let mut out = Vec::new();
    for (t, &len) in lens.iter().enumerate() {
        for i in 0..len {
            let orig = net.params()[t][i];
            net.params_mut()[t][i] = orig + H;
            let up = loss_and_grad(loss, c, &net).0;
            net.params_mut()[t][i] = orig - H;
            let down = loss_and_grad(loss, c, &net).0;
            net.params_mut()[t][i] = orig;
            out.push((up - down) / (2.0 * H));
        }
    }
    out
}

/// Worst `|a - n| / max(|a|, |n|)` over entries above the absolute floor,
/// or an error naming the first entry outside tolerance.
pub fn check(loss: Loss, seed: u64) -> Result<f64, String> {
    let c = random_case(loss, seed);
    let analytic = flat(&loss_and_grad(loss, &c, &c.net).1);
    let numeric = numeric_grad(loss, &c);
    assert_eq!(analytic.len(), numeric.len());
    let mut worst = 0.0f64;
    for (i, (a, n)) in analytic.iter().zip(&numeric).enumerate() {
        let scale = a.abs().max(n.abs());
        if (a - n).abs() > TOL * scale + 1e-9 {
            return Err(format!(
                "{loss:?} seed {seed} param {i}: analytic {a} vs numeric {n} (sizes {:?})",
                c.net.sizes()
            ));
        }
        if scale > 1e-4 {
            worst = worst.max((a - n).abs() / scale);
        }
    }
    Ok(worst)
}
