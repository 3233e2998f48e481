//! Fully connected policy: `softmax(W2 relu(W1 x + b1) + b2)`.

use rand::Rng;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NetShape {
    pub input_dim: usize,
    pub hidden: usize,
    pub actions: usize,
}

impl NetShape {
    pub fn num_params(&self) -> usize {
        self.hidden * self.input_dim + self.hidden + self.actions * self.hidden + self.actions
    }

    fn b1_offset(&self) -> usize {
        self.hidden * self.input_dim
    }

    fn w2_offset(&self) -> usize {
        self.b1_offset() + self.hidden
    }

    fn b2_offset(&self) -> usize {
        self.w2_offset() + self.actions * self.hidden
    }
}

/// Network parameters stored flat as `W1 | b1 | W2 | b2`, matrices
/// row-major. Gradients use the same type.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyParams {
    shape: NetShape,
    data: Vec<f64>,
}

impl PolicyParams {
    pub fn zeros(shape: NetShape) -> Self {
        PolicyParams { shape, data: vec![0.0; shape.num_params()] }
    }

    pub fn from_flat(shape: NetShape, data: Vec<f64>) -> Result<Self> {
        if data.len() != shape.num_params() {
            return Err(Error::Shape(format!(
                "{} values for a network with {} parameters",
                data.len(),
                shape.num_params()
            )));
        }
        Ok(PolicyParams { shape, data })
    }

    /// Uniform Glorot initialization of both weight matrices; zero biases.
    pub fn init<R: Rng + ?Sized>(shape: NetShape, rng: &mut R) -> Self {
        let mut p = Self::zeros(shape);
        let a1 = (6.0 / (shape.input_dim + shape.hidden) as f64).sqrt();
        let a2 = (6.0 / (shape.hidden + shape.actions) as f64).sqrt();
        for w in p.w1_mut() {
            *w = rng.random_range(-a1..=a1);
        }
        for w in p.w2_mut() {
            *w = rng.random_range(-a2..=a2);
        }
        p
    }

    pub fn shape(&self) -> NetShape {
        self.shape
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn w1(&self) -> &[f64] {
        &self.data[..self.shape.b1_offset()]
    }
    pub fn b1(&self) -> &[f64] {
        &self.data[self.shape.b1_offset()..self.shape.w2_offset()]
    }
    pub fn w2(&self) -> &[f64] {
        &self.data[self.shape.w2_offset()..self.shape.b2_offset()]
    }
    pub fn b2(&self) -> &[f64] {
        &self.data[self.shape.b2_offset()..]
    }

    pub fn w1_mut(&mut self) -> &mut [f64] {
        let end = self.shape.b1_offset();
        &mut self.data[..end]
    }
    pub fn b1_mut(&mut self) -> &mut [f64] {
        let (s, e) = (self.shape.b1_offset(), self.shape.w2_offset());
        &mut self.data[s..e]
    }
    pub fn w2_mut(&mut self) -> &mut [f64] {
        let (s, e) = (self.shape.w2_offset(), self.shape.b2_offset());
        &mut self.data[s..e]
    }
    pub fn b2_mut(&mut self) -> &mut [f64] {
        let s = self.shape.b2_offset();
        &mut self.data[s..]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// `self += other`, element-wise.
    pub fn add_assign(&mut self, other: &PolicyParams) {
        debug_assert_eq!(self.shape, other.shape);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn scale(&mut self, c: f64) {
        self.data.iter_mut().for_each(|v| *v *= c);
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let mut acts = Activations::new(self.shape);
        self.forward_sparse(&sparsify(x), &mut acts);
        Ok(acts.probs)
    }

    pub fn log_prob(&self, x: &[f64], action: usize) -> Result<f64> {
        self.check_input(x)?;
        self.check_action(action)?;
        let mut acts = Activations::new(self.shape);
        self.forward_sparse(&sparsify(x), &mut acts);
        let max = acts.logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = acts.logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
        Ok(acts.logits[action] - max - lse)
    }

    /// Forward pass over the nonzero entries of the input, in ascending index
    /// order. The dense [`forward`](Self::forward) goes through here too, so
    /// both agree bit-for-bit.
    pub fn forward_sparse(&self, x: &[(u32, f64)], acts: &mut Activations) {
        let NetShape { input_dim, hidden, actions } = self.shape;
        let w1 = self.w1();
        acts.pre.copy_from_slice(self.b1());
        for &(j, v) in x {
            let j = j as usize;
            for (h, pre) in acts.pre.iter_mut().enumerate() {
                *pre += w1[h * input_dim + j] * v;
            }
        }
        for (out, &pre) in acts.hidden.iter_mut().zip(&acts.pre) {
            *out = pre.max(0.0);
        }
        let w2 = self.w2();
        let b2 = self.b2();
        for a in 0..actions {
            let row = &w2[a * hidden..(a + 1) * hidden];
            let mut z = b2[a];
            for (w, h) in row.iter().zip(&acts.hidden) {
                z += w * h;
            }
            acts.logits[a] = z;
        }
        softmax_into(&acts.logits, &mut acts.probs);
    }

    /// `advantage * d log pi(action | x) / d params`.
    pub fn grad_log_prob(&self, x: &[f64], action: usize, advantage: f64) -> Result<PolicyParams> {
        self.check_input(x)?;
        self.check_action(action)?;
        let nz = sparsify(x);
        let mut acts = Activations::new(self.shape);
        self.forward_sparse(&nz, &mut acts);
        let mut grad = PolicyParams::zeros(self.shape);
        let mut scratch = vec![0.0; self.shape.hidden];
        self.accumulate_grad(&nz, &acts, action, advantage, &mut grad, &mut scratch);
        Ok(grad)
    }

    /// Adds `advantage * grad log pi(action | x)` into `grad`, given the
    /// activations of a forward pass on `x`. `scratch` must hold `hidden`
    /// entries.
    pub fn accumulate_grad(
        &self,
        x: &[(u32, f64)],
        acts: &Activations,
        action: usize,
        advantage: f64,
        grad: &mut PolicyParams,
        scratch: &mut [f64],
    ) {
        if advantage == 0.0 {
            return;
        }
        let NetShape { input_dim, hidden, actions } = self.shape;
        let w2 = self.w2();
        // d log softmax / d z = onehot - probs
        let dh = &mut scratch[..hidden];
        dh.fill(0.0);
        {
            let gw2_off = self.shape.w2_offset();
            let gb2_off = self.shape.b2_offset();
            let g = grad.as_mut_slice();
            for a in 0..actions {
                let dz = advantage * (if a == action { 1.0 } else { 0.0 } - acts.probs[a]);
                g[gb2_off + a] += dz;
                let row = a * hidden;
                for h in 0..hidden {
                    g[gw2_off + row + h] += dz * acts.hidden[h];
                    dh[h] += dz * w2[row + h];
                }
            }
        }
        // relu subgradient is 0 at exactly 0
        for (d, &pre) in dh.iter_mut().zip(&acts.pre) {
            if pre <= 0.0 {
                *d = 0.0;
            }
        }
        let gb1 = grad.b1_mut();
        for (g, d) in gb1.iter_mut().zip(dh.iter()) {
            *g += d;
        }
        let gw1 = grad.w1_mut();
        for &(j, v) in x {
            let j = j as usize;
            for (h, d) in dh.iter().enumerate() {
                if *d != 0.0 {
                    gw1[h * input_dim + j] += d * v;
                }
            }
        }
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.shape.input_dim {
            return Err(Error::Shape(format!(
                "input of length {}, network expects {}",
                x.len(),
                self.shape.input_dim
            )));
        }
        Ok(())
    }

    fn check_action(&self, action: usize) -> Result<()> {
        if action >= self.shape.actions {
            return Err(Error::Domain(format!(
                "action {action} outside 0..{}",
                self.shape.actions
            )));
        }
        Ok(())
    }
}

/// Per-call buffers of a forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct Activations {
    pub pre: Vec<f64>,
    pub hidden: Vec<f64>,
    pub logits: Vec<f64>,
    pub probs: Vec<f64>,
}

impl Activations {
    pub fn new(shape: NetShape) -> Self {
        Activations {
            pre: vec![0.0; shape.hidden],
            hidden: vec![0.0; shape.hidden],
            logits: vec![0.0; shape.actions],
            probs: vec![0.0; shape.actions],
        }
    }
}

/// Nonzero entries of `x` as `(index, value)`, ascending.
pub fn sparsify(x: &[f64]) -> Vec<(u32, f64)> {
    let mut out = Vec::new();
    sparsify_into(x, &mut out);
    out
}

pub fn sparsify_into(x: &[f64], out: &mut Vec<(u32, f64)>) {
    out.clear();
    out.extend(x.iter().enumerate().filter(|(_, &v)| v != 0.0).map(|(i, &v)| (i as u32, v)));
}

pub fn softmax_into(logits: &[f64], probs: &mut [f64]) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (p, &z) in probs.iter_mut().zip(logits) {
        *p = (z - max).exp();
        sum += *p;
    }
    for p in probs.iter_mut() {
        *p /= sum;
    }
}

/// Inverse-CDF draw from `probs`.
pub fn sample_action<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // rounding left u above the final partial sum
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(probs.len() - 1)
}

/// Index of the largest probability, lowest index on ties.
pub fn argmax(probs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > probs[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn small() -> NetShape {
        NetShape { input_dim: 2, hidden: 1, actions: 2 }
    }

    #[test]
    fn zero_params_give_uniform() {
        let shape = NetShape { input_dim: 5, hidden: 20, actions: 11 };
        let p = PolicyParams::zeros(shape);
        let probs = p.forward(&[1.0, 2.0, 0.0, -3.0, 4.0]).unwrap();
        for q in probs {
            assert!((q - 1.0 / 11.0).abs() < 1e-15);
        }
    }

    #[test]
    fn hand_evaluated_forward() {
        // W1 = [0.5, -1], b1 = [0.1], W2 = [[2], [-1]], b2 = [0.3, 0]
        let p = PolicyParams::from_flat(small(), vec![0.5, -1.0, 0.1, 2.0, -1.0, 0.3, 0.0]).unwrap();
        // h = relu(0.5 + 0.1) = 0.6; z = (1.2 + 0.3, -0.6) = (1.5, -0.6)
        let e = (-2.1f64).exp();
        let expect = [1.0 / (1.0 + e), e / (1.0 + e)];
        let probs = p.forward(&[1.0, 0.0]).unwrap();
        for (a, b) in probs.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
        // the hidden unit is dead for x = (0, 1)
        let probs = p.forward(&[0.0, 1.0]).unwrap();
        let e = (-0.3f64).exp();
        assert!((probs[0] - 1.0 / (1.0 + e)).abs() < 1e-12);
    }

    #[test]
    fn softmax_shift_invariance_and_stability() {
        let z = [1.0, -2.0, 0.5, 3.0];
        let shifted: Vec<f64> = z.iter().map(|v| v + 123.0).collect();
        let mut a = [0.0; 4];
        let mut b = [0.0; 4];
        softmax_into(&z, &mut a);
        softmax_into(&shifted, &mut b);
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() < 1e-15);
        }
        let mut c = [0.0; 3];
        softmax_into(&[700.0, -700.0, 0.0], &mut c);
        assert!(c.iter().all(|v| v.is_finite()));
        assert!((c.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch() {
        let p = PolicyParams::zeros(small());
        assert!(matches!(p.forward(&[1.0]), Err(Error::Shape(_))));
        assert!(matches!(p.grad_log_prob(&[1.0, 0.0], 2, 1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn init_is_seeded_and_bounded() {
        let shape = NetShape { input_dim: 30, hidden: 20, actions: 11 };
        let a = PolicyParams::init(shape, &mut rng::seeded(5));
        let b = PolicyParams::init(shape, &mut rng::seeded(5));
        assert_eq!(a, b);
        assert!(a.b1().iter().chain(a.b2()).all(|&v| v == 0.0));
        let a1 = (6.0f64 / 50.0).sqrt();
        let a2 = (6.0f64 / 31.0).sqrt();
        assert!(a.w1().iter().all(|w| w.abs() <= a1));
        assert!(a.w2().iter().all(|w| w.abs() <= a2));
        assert_ne!(a, PolicyParams::init(shape, &mut rng::seeded(6)));
    }

    #[test]
    fn zero_advantage_zero_gradient() {
        let shape = NetShape { input_dim: 4, hidden: 3, actions: 3 };
        let p = PolicyParams::init(shape, &mut rng::seeded(1));
        let g = p.grad_log_prob(&[1.0, 0.5, 0.0, 2.0], 1, 0.0).unwrap();
        assert!(g.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn score_function_has_zero_mean() {
        let shape = NetShape { input_dim: 6, hidden: 5, actions: 4 };
        let p = PolicyParams::init(shape, &mut rng::seeded(2));
        let x = [0.3, 1.0, 0.0, -0.7, 2.0, 0.1];
        let probs = p.forward(&x).unwrap();
        let mut total = PolicyParams::zeros(shape);
        for (a, &pa) in probs.iter().enumerate() {
            total.add_assign(&p.grad_log_prob(&x, a, pa).unwrap());
        }
        assert!(total.as_slice().iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn sampling() {
        let mut r = rng::seeded(9);
        for _ in 0..100 {
            assert_eq!(sample_action(&[0.0, 1.0, 0.0], &mut r), 1);
        }
        let mut a = rng::seeded(4);
        let mut b = rng::seeded(4);
        let probs = [0.2, 0.5, 0.3];
        for _ in 0..50 {
            assert_eq!(sample_action(&probs, &mut a), sample_action(&probs, &mut b));
        }
    }

    #[test]
    fn empirical_frequencies_match() {
        let probs = [0.1, 0.25, 0.05, 0.4, 0.2];
        let n = 100_000;
        let mut counts = [0usize; 5];
        let mut r = rng::seeded(77);
        for _ in 0..n {
            counts[sample_action(&probs, &mut r)] += 1;
        }
        for (c, p) in counts.iter().zip(probs) {
            let sigma = (n as f64 * p * (1.0 - p)).sqrt();
            assert!((*c as f64 - n as f64 * p).abs() <= 3.0 * sigma, "{counts:?}");
        }
    }

    #[test]
    fn argmax_prefers_lowest_index() {
        assert_eq!(argmax(&[0.2, 0.4, 0.4]), 1);
        assert_eq!(argmax(&[0.5, 0.5]), 0);
    }
}
