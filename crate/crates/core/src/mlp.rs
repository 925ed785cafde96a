//! Multi-layer perceptron classifier with analytic forward/backward passes
//! and mean softmax cross-entropy loss.

use crate::error::{Error, Result};
use crate::rng::SeededRng;
use crate::tensor::{l2_norm, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Tanh,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpArchitecture {
    pub input_dim: usize,
    pub hidden_dims: Vec<usize>,
    pub num_classes: usize,
    pub activation: Activation,
}

impl MlpArchitecture {
    pub fn new(input_dim: usize, hidden_dims: Vec<usize>, num_classes: usize) -> Self {
        MlpArchitecture {
            input_dim,
            hidden_dims,
            num_classes,
            activation: Activation::Relu,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::Config("input_dim must be positive".into()));
        }
        if self.num_classes < 2 {
            return Err(Error::Config("num_classes must be at least 2".into()));
        }
        if self.hidden_dims.contains(&0) {
            return Err(Error::Config("hidden dims must be positive".into()));
        }
        Ok(())
    }

    /// `(out, in)` dimensions for every layer, input to output.
    pub fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::with_capacity(self.hidden_dims.len() + 1);
        let mut fan_in = self.input_dim;
        for &h in &self.hidden_dims {
            dims.push((h, fan_in));
            fan_in = h;
        }
        dims.push((self.num_classes, fan_in));
        dims
    }

    pub fn num_layers(&self) -> usize {
        self.hidden_dims.len() + 1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    pub weight: Tensor,
    pub bias: Tensor,
}

/// Ordered per-layer weights and biases with a fixed flat element order:
/// layer 0 weight (row-major), layer 0 bias, layer 1 weight, and so on.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSet {
    layers: Vec<LayerParams>,
}

impl ParamSet {
    pub fn zeros(arch: &MlpArchitecture) -> ParamSet {
        let layers = arch
            .layer_dims()
            .into_iter()
            .map(|(out, fan_in)| LayerParams {
                weight: Tensor::zeros(&[out, fan_in]),
                bias: Tensor::zeros(&[out]),
            })
            .collect();
        ParamSet { layers }
    }

    pub fn zeros_like(&self) -> ParamSet {
        let layers = self
            .layers
            .iter()
            .map(|l| LayerParams {
                weight: Tensor::zeros(l.weight.shape()),
                bias: Tensor::zeros(l.bias.shape()),
            })
            .collect();
        ParamSet { layers }
    }

    pub fn from_layers(layers: Vec<LayerParams>) -> ParamSet {
        ParamSet { layers }
    }

    pub fn layers(&self) -> &[LayerParams] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [LayerParams] {
        &mut self.layers
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn num_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weight.len() + l.bias.len())
            .sum()
    }

    pub fn shape_matches(&self, other: &ParamSet) -> bool {
        self.layers.len() == other.layers.len()
            && self.layers.iter().zip(&other.layers).all(|(a, b)| {
                a.weight.shape() == b.weight.shape() && a.bias.shape() == b.bias.shape()
            })
    }

    fn check_shape(&self, other: &ParamSet, context: &str) -> Result<()> {
        if !self.shape_matches(other) {
            return Err(Error::dim_mismatch(
                context,
                &[self.num_params()],
                &[other.num_params()],
            ));
        }
        Ok(())
    }

    /// Flat iteration in the fixed element order.
    pub fn iter_flat(&self) -> impl Iterator<Item = f64> + '_ {
        self.layers.iter().flat_map(|l| {
            l.weight
                .data()
                .iter()
                .chain(l.bias.data().iter())
                .copied()
        })
    }

    pub fn get_flat(&self, mut index: usize) -> f64 {
        for l in &self.layers {
            if index < l.weight.len() {
                return l.weight.data()[index];
            }
            index -= l.weight.len();
            if index < l.bias.len() {
                return l.bias.data()[index];
            }
            index -= l.bias.len();
        }
        panic!("flat index out of range");
    }

    pub fn add_flat(&mut self, mut index: usize, delta: f64) {
        for l in &mut self.layers {
            if index < l.weight.len() {
                l.weight.data_mut()[index] += delta;
                return;
            }
            index -= l.weight.len();
            if index < l.bias.len() {
                l.bias.data_mut()[index] += delta;
                return;
            }
            index -= l.bias.len();
        }
        panic!("flat index out of range");
    }

    /// `self += other`, elementwise.
    pub fn add_assign(&mut self, other: &ParamSet) -> Result<()> {
        self.check_shape(other, "param add")?;
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            for (x, y) in a.weight.data_mut().iter_mut().zip(b.weight.data()) {
                *x += y;
            }
            for (x, y) in a.bias.data_mut().iter_mut().zip(b.bias.data()) {
                *x += y;
            }
        }
        Ok(())
    }

    /// `self += alpha * other`, elementwise.
    pub fn add_scaled(&mut self, other: &ParamSet, alpha: f64) -> Result<()> {
        self.check_shape(other, "param add_scaled")?;
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            for (x, y) in a.weight.data_mut().iter_mut().zip(b.weight.data()) {
                *x += alpha * y;
            }
            for (x, y) in a.bias.data_mut().iter_mut().zip(b.bias.data()) {
                *x += alpha * y;
            }
        }
        Ok(())
    }

    pub fn scale(&mut self, alpha: f64) {
        for l in &mut self.layers {
            for x in l.weight.data_mut() {
                *x *= alpha;
            }
            for x in l.bias.data_mut() {
                *x *= alpha;
            }
        }
    }

    /// Elementwise sum as a new set.
    pub fn add(&self, other: &ParamSet) -> Result<ParamSet> {
        let mut out = self.clone();
        out.add_assign(other)?;
        Ok(out)
    }

    /// Elementwise difference as a new set.
    pub fn sub(&self, other: &ParamSet) -> Result<ParamSet> {
        let mut out = self.clone();
        out.add_scaled(other, -1.0)?;
        Ok(out)
    }

    /// Euclidean norm over the globally flattened parameter vector.
    pub fn l2_norm(&self) -> f64 {
        l2_norm(
            self.layers
                .iter()
                .flat_map(|l| [&l.weight, &l.bias]),
        )
    }
}

/// Gradients for one mini-batch together with its mean loss and raw logits.
#[derive(Debug, Clone)]
pub struct BatchGrad {
    pub grads: ParamSet,
    pub loss: f64,
    pub logits: Tensor,
}

/// Fan-in-scaled uniform weight init; biases start at zero. The scale is
/// `sqrt(6/fan_in)` for relu and `sqrt(1/fan_in)` for tanh.
pub fn init_params(arch: &MlpArchitecture, rng: &mut SeededRng) -> ParamSet {
    let layers = arch
        .layer_dims()
        .into_iter()
        .map(|(out, fan_in)| {
            let scale = match arch.activation {
                Activation::Relu => (6.0 / fan_in as f64).sqrt(),
                Activation::Tanh => (1.0 / fan_in as f64).sqrt(),
            };
            let data = (0..out * fan_in)
                .map(|_| rng.uniform_in(-scale, scale))
                .collect();
            LayerParams {
                weight: Tensor::from_vec(&[out, fan_in], data).unwrap(),
                bias: Tensor::zeros(&[out]),
            }
        })
        .collect();
    ParamSet { layers }
}

fn affine(x: &Tensor, layer: &LayerParams) -> Result<Tensor> {
    let mut z = x.matmul_nt(&layer.weight)?;
    let cols = z.cols();
    for row in 0..z.rows() {
        let data = z.data_mut();
        for (j, &b) in layer.bias.data().iter().enumerate() {
            data[row * cols + j] += b;
        }
    }
    Ok(z)
}

fn apply_activation(z: &mut Tensor, act: Activation) {
    match act {
        Activation::Relu => {
            for x in z.data_mut() {
                if *x < 0.0 {
                    *x = 0.0;
                }
            }
        }
        Activation::Tanh => {
            for x in z.data_mut() {
                *x = x.tanh();
            }
        }
    }
}

/// Post-activation outputs of every layer; the last entry holds the raw
/// logits.
fn forward_all(params: &ParamSet, x: &Tensor, act: Activation) -> Result<Vec<Tensor>> {
    let first_in = params.layers[0].weight.cols();
    if x.cols() != first_in {
        return Err(Error::dim_mismatch("forward input", x.shape(), &[first_in]));
    }
    let mut acts = Vec::with_capacity(params.layers.len());
    let n_layers = params.layers.len();
    for (i, layer) in params.layers.iter().enumerate() {
        let input = if i == 0 { x } else { &acts[i - 1] };
        let mut z = affine(input, layer)?;
        if i + 1 < n_layers {
            apply_activation(&mut z, act);
        }
        acts.push(z);
    }
    Ok(acts)
}

/// Raw logits for a batch (no softmax applied).
pub fn forward(params: &ParamSet, x: &Tensor, act: Activation) -> Result<Tensor> {
    let mut acts = forward_all(params, x, act)?;
    Ok(acts.pop().unwrap())
}

/// Post-activation output of the last hidden layer, for feature dumps.
pub fn hidden_features(params: &ParamSet, x: &Tensor, act: Activation) -> Result<Tensor> {
    if params.num_layers() < 2 {
        return Err(Error::Config(
            "network has no hidden layer to extract features from".into(),
        ));
    }
    let mut acts = forward_all(params, x, act)?;
    acts.pop();
    Ok(acts.pop().unwrap())
}

/// Mean softmax cross-entropy over the batch and its exact analytic
/// gradients with respect to every parameter.
pub fn loss_and_grad(
    params: &ParamSet,
    x: &Tensor,
    labels: &[usize],
    act: Activation,
) -> Result<BatchGrad> {
    let n = x.rows();
    if labels.len() != n {
        return Err(Error::dim_mismatch(
            "labels vs batch",
            &[labels.len()],
            &[n],
        ));
    }
    let k = params.layers.last().unwrap().bias.len();
    for (i, &y) in labels.iter().enumerate() {
        if y >= k {
            return Err(Error::InvalidLabel {
                index: i,
                label: y,
                num_classes: k,
            });
        }
    }

    let acts = forward_all(params, x, act)?;
    let logits = acts.last().unwrap();

    // Loss and d(loss)/d(logits), row by row.
    let mut loss_sum = 0.0;
    let mut delta = Tensor::zeros(&[n, k]);
    {
        let ddata = delta.data_mut();
        let mut probs = vec![0.0; k];
        for (i, &y) in labels.iter().enumerate() {
            let row = logits.row(i);
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for (p, &v) in probs.iter_mut().zip(row) {
                let e = (v - max).exp();
                *p = e;
                sum += e;
            }
            loss_sum += max + sum.ln() - row[y];
            let inv = 1.0 / (n as f64);
            for (j, p) in probs.iter().enumerate() {
                let grad = p / sum - if j == y { 1.0 } else { 0.0 };
                ddata[i * k + j] = grad * inv;
            }
        }
    }
    let loss = loss_sum / n as f64;

    // Backward pass.
    let mut grads: Vec<LayerParams> = Vec::with_capacity(params.layers.len());
    for l in (0..params.layers.len()).rev() {
        let input = if l == 0 { x } else { &acts[l - 1] };
        let d_weight = delta.matmul_tn(input)?;
        let mut d_bias = Tensor::zeros(&[delta.cols()]);
        {
            let out = d_bias.data_mut();
            for i in 0..delta.rows() {
                for (o, &d) in out.iter_mut().zip(delta.row(i)) {
                    *o += d;
                }
            }
        }
        grads.push(LayerParams {
            weight: d_weight,
            bias: d_bias,
        });
        if l > 0 {
            let mut da = delta.matmul(&params.layers[l].weight)?;
            let hidden = &acts[l - 1];
            match act {
                Activation::Relu => {
                    for (g, &a) in da.data_mut().iter_mut().zip(hidden.data()) {
                        if a <= 0.0 {
                            *g = 0.0;
                        }
                    }
                }
                Activation::Tanh => {
                    for (g, &a) in da.data_mut().iter_mut().zip(hidden.data()) {
                        *g *= 1.0 - a * a;
                    }
                }
            }
            delta = da;
        }
    }
    grads.reverse();

    let logits = acts.into_iter().last().unwrap();
    Ok(BatchGrad {
        grads: ParamSet { layers: grads },
        loss,
        logits,
    })
}

/// Argmax class per row; ties break toward the lowest class index.
pub fn predict(params: &ParamSet, x: &Tensor, act: Activation) -> Result<Vec<usize>> {
    let logits = forward(params, x, act)?;
    Ok((0..logits.rows())
        .map(|i| argmax(logits.row(i)))
        .collect())
}

pub(crate) fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    let mut best_val = row[0];
    for (j, &v) in row.iter().enumerate().skip(1) {
        if v > best_val {
            best = j;
            best_val = v;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn arch(input: usize, hidden: &[usize], classes: usize) -> MlpArchitecture {
        MlpArchitecture::new(input, hidden.to_vec(), classes)
    }

    #[test]
    fn init_shapes_match_architecture() {
        let a = arch(2, &[4], 3);
        let mut rng = SeededRng::new(1);
        let p = init_params(&a, &mut rng);
        assert_eq!(p.num_layers(), 2);
        assert_eq!(p.layers()[0].weight.shape(), &[4, 2]);
        assert_eq!(p.layers()[0].bias.shape(), &[4]);
        assert_eq!(p.layers()[1].weight.shape(), &[3, 4]);
        assert_eq!(p.layers()[1].bias.shape(), &[3]);
    }

    #[test]
    fn init_is_deterministic() {
        let a = arch(3, &[5, 4], 2);
        let p1 = init_params(&a, &mut SeededRng::new(9));
        let p2 = init_params(&a, &mut SeededRng::new(9));
        assert_eq!(p1, p2);
    }

    #[test]
    fn init_draws_stay_within_fan_in_bound() {
        let a = arch(100, &[], 100);
        let mut rng = SeededRng::new(3);
        let p = init_params(&a, &mut rng);
        let bound = (6.0f64 / 100.0).sqrt();
        assert!(p.layers()[0].weight.len() == 10_000);
        for &w in p.layers()[0].weight.data() {
            assert!(w.abs() <= bound);
            assert!(w.abs() <= 0.245);
        }
    }

    #[test]
    fn zero_network_gives_zero_logits() {
        let a = arch(4, &[3], 5);
        let p = ParamSet::zeros(&a);
        let x = Tensor::from_rows(&[vec![1.0, -2.0, 0.5, 3.0]]).unwrap();
        let logits = forward(&p, &x, a.activation).unwrap();
        assert!(logits.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn identity_layer_passes_input_through() {
        let weight = Tensor::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let bias = Tensor::zeros(&[2]);
        let p = ParamSet::from_layers(vec![LayerParams { weight, bias }]);
        let x = Tensor::from_rows(&[vec![1.0, 2.0]]).unwrap();
        let logits = forward(&p, &x, Activation::Relu).unwrap();
        assert_eq!(logits.data(), &[1.0, 2.0]);
    }

    /// Independent forward oracle: per-example loops over Vec<Vec<f64>>
    /// weights, no tensor machinery.
    #[allow(clippy::needless_range_loop)]
    fn oracle_forward(p: &ParamSet, x: &[f64], act: Activation) -> Vec<f64> {
        let mut a: Vec<f64> = x.to_vec();
        let n_layers = p.num_layers();
        for (li, layer) in p.layers().iter().enumerate() {
            let out_dim = layer.bias.len();
            let in_dim = layer.weight.cols();
            let mut z = vec![0.0; out_dim];
            for o in 0..out_dim {
                let mut acc = layer.bias.data()[o];
                for i in 0..in_dim {
                    acc += layer.weight.data()[o * in_dim + i] * a[i];
                }
                z[o] = acc;
            }
            if li + 1 < n_layers {
                for v in z.iter_mut() {
                    *v = match act {
                        Activation::Relu => v.max(0.0),
                        Activation::Tanh => v.tanh(),
                    };
                }
            }
            a = z;
        }
        a
    }

    #[test]
    fn forward_matches_independent_oracle() {
        let a = arch(3, &[6], 4);
        let mut rng = SeededRng::new(21);
        let p = init_params(&a, &mut rng);
        let x_row: Vec<f64> = (0..3).map(|_| rng.uniform_in(-1.0, 1.0)).collect();
        let x = Tensor::from_rows(std::slice::from_ref(&x_row)).unwrap();
        let logits = forward(&p, &x, a.activation).unwrap();
        let expected = oracle_forward(&p, &x_row, a.activation);
        for (got, want) in logits.data().iter().zip(&expected) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn forward_is_pure() {
        let a = arch(4, &[8, 8], 3);
        let mut rng = SeededRng::new(5);
        let p = init_params(&a, &mut rng);
        let x = Tensor::from_rows(&[
            (0..4).map(|_| rng.uniform_in(-1.0, 1.0)).collect(),
            (0..4).map(|_| rng.uniform_in(-1.0, 1.0)).collect(),
        ])
        .unwrap();
        let l1 = forward(&p, &x, a.activation).unwrap();
        let l2 = forward(&p, &x, a.activation).unwrap();
        for (x1, x2) in l1.data().iter().zip(l2.data()) {
            assert_eq!(x1.to_bits(), x2.to_bits());
        }
    }

    #[test]
    fn uniform_logits_loss_is_ln_k() {
        let a = arch(4, &[], 10);
        let p = ParamSet::zeros(&a);
        let x = Tensor::from_rows(&[vec![0.1, 0.2, 0.3, 0.4]]).unwrap();
        let bg = loss_and_grad(&p, &x, &[7], a.activation).unwrap();
        assert!((bg.loss - 10.0f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn out_of_range_label_is_reported_with_index() {
        let a = arch(2, &[], 3);
        let p = ParamSet::zeros(&a);
        let x = Tensor::from_rows(&[vec![0.0, 0.0], vec![0.0, 0.0]]).unwrap();
        match loss_and_grad(&p, &x, &[1, 3], a.activation) {
            Err(Error::InvalidLabel { index, label, .. }) => {
                assert_eq!(index, 1);
                assert_eq!(label, 3);
            }
            other => panic!("expected label error, got {other:?}"),
        }
    }

    fn finite_diff_check(a: &MlpArchitecture, batch: usize, seed: u64) {
        let mut rng = SeededRng::new(seed);
        let p = init_params(a, &mut rng);
        let rows: Vec<Vec<f64>> = (0..batch)
            .map(|_| (0..a.input_dim).map(|_| rng.uniform_in(-1.0, 1.0)).collect())
            .collect();
        let x = Tensor::from_rows(&rows).unwrap();
        let labels: Vec<usize> = (0..batch).map(|_| rng.index(a.num_classes)).collect();
        let bg = loss_and_grad(&p, &x, &labels, a.activation).unwrap();
        let h = 1e-6;
        for idx in 0..p.num_params() {
            let mut plus = p.clone();
            plus.add_flat(idx, h);
            let mut minus = p.clone();
            minus.add_flat(idx, -h);
            let lp = loss_and_grad(&plus, &x, &labels, a.activation).unwrap().loss;
            let lm = loss_and_grad(&minus, &x, &labels, a.activation)
                .unwrap()
                .loss;
            let numeric = (lp - lm) / (2.0 * h);
            let analytic = bg.grads.get_flat(idx);
            let denom = analytic.abs().max(numeric.abs());
            if denom < 1e-10 {
                continue;
            }
            let rel = (analytic - numeric).abs() / denom;
            assert!(
                rel < 1e-5,
                "coord {idx}: analytic {analytic} vs numeric {numeric} (rel {rel})"
            );
        }
    }

    #[test]
    fn gradients_match_finite_differences_relu() {
        finite_diff_check(&arch(2, &[8], 3), 4, 42);
    }

    #[test]
    fn gradients_match_finite_differences_tanh_deep() {
        let mut a = arch(3, &[6, 5], 4);
        a.activation = Activation::Tanh;
        finite_diff_check(&a, 5, 77);
    }

    #[test]
    fn duplicated_batch_leaves_loss_and_grads_unchanged() {
        let a = arch(3, &[7], 4);
        let mut rng = SeededRng::new(15);
        let p = init_params(&a, &mut rng);
        let rows: Vec<Vec<f64>> = (0..4)
            .map(|_| (0..3).map(|_| rng.uniform_in(-1.0, 1.0)).collect())
            .collect();
        let labels: Vec<usize> = (0..4).map(|_| rng.index(4)).collect();
        let x = Tensor::from_rows(&rows).unwrap();
        let doubled_rows: Vec<Vec<f64>> = rows.iter().chain(rows.iter()).cloned().collect();
        let doubled_labels: Vec<usize> = labels.iter().chain(labels.iter()).copied().collect();
        let x2 = Tensor::from_rows(&doubled_rows).unwrap();
        let bg1 = loss_and_grad(&p, &x, &labels, a.activation).unwrap();
        let bg2 = loss_and_grad(&p, &x2, &doubled_labels, a.activation).unwrap();
        assert!((bg1.loss - bg2.loss).abs() < 1e-12);
        for idx in 0..p.num_params() {
            let g1 = bg1.grads.get_flat(idx);
            let g2 = bg2.grads.get_flat(idx);
            assert!((g1 - g2).abs() < 1e-12 * g1.abs().max(1.0));
        }
    }

    #[test]
    fn batch_permutation_leaves_loss_unchanged() {
        let a = arch(3, &[5], 3);
        let mut rng = SeededRng::new(31);
        let p = init_params(&a, &mut rng);
        let rows: Vec<Vec<f64>> = (0..6)
            .map(|_| (0..3).map(|_| rng.uniform_in(-1.0, 1.0)).collect())
            .collect();
        let labels: Vec<usize> = (0..6).map(|_| rng.index(3)).collect();
        let x = Tensor::from_rows(&rows).unwrap();
        let perm = [5, 2, 0, 4, 1, 3];
        let x_p = Tensor::from_rows(&perm.map(|i| rows[i].clone())).unwrap();
        let labels_p: Vec<usize> = perm.iter().map(|&i| labels[i]).collect();
        let l1 = loss_and_grad(&p, &x, &labels, a.activation).unwrap().loss;
        let l2 = loss_and_grad(&p, &x_p, &labels_p, a.activation).unwrap().loss;
        assert!((l1 - l2).abs() < 1e-12);
        assert!(l1 >= 0.0);
    }

    #[test]
    fn zero_params_predict_class_zero() {
        let a = arch(3, &[4], 5);
        let p = ParamSet::zeros(&a);
        let x = Tensor::from_rows(&[vec![1.0, 2.0, 3.0], vec![-1.0, 0.0, 1.0]]).unwrap();
        assert_eq!(predict(&p, &x, a.activation).unwrap(), vec![0, 0]);
    }

    #[test]
    fn argmax_picks_largest() {
        assert_eq!(argmax(&[0.1, 0.9, 0.3]), 1);
        assert_eq!(argmax(&[0.5, 0.5, 0.5]), 0);
    }

    #[test]
    fn prediction_invariant_to_constant_logit_shift() {
        let a = arch(2, &[4], 3);
        let mut rng = SeededRng::new(19);
        let mut p = init_params(&a, &mut rng);
        let x = Tensor::from_rows(&[
            vec![0.3, -0.4],
            vec![1.5, 0.2],
            vec![-0.7, 0.9],
        ])
        .unwrap();
        let before = predict(&p, &x, a.activation).unwrap();
        let last = p.layers.last_mut().unwrap();
        for b in last.bias.data_mut() {
            *b += 5.0;
        }
        let after = predict(&p, &x, a.activation).unwrap();
        assert_eq!(before, after);
    }

    #[test]
    fn hidden_features_requires_a_hidden_layer() {
        let a = arch(2, &[], 3);
        let p = ParamSet::zeros(&a);
        let x = Tensor::from_rows(&[vec![1.0, 2.0]]).unwrap();
        assert!(hidden_features(&p, &x, a.activation).is_err());
        let a2 = arch(2, &[4], 3);
        let p2 = ParamSet::zeros(&a2);
        let f = hidden_features(&p2, &x, a2.activation).unwrap();
        assert_eq!(f.shape(), &[1, 4]);
    }
}
