//! Fully connected Q-network: ReLU hidden layers, linear output, explicit
//! backpropagation, Adam updates, and a versioned checkpoint format.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2, Axis};
use rand::Rng;

use crate::error::{Result, RisError};

const CKPT_MAGIC: &[u8; 8] = b"RISMLP01";

#[derive(Debug, Clone, PartialEq)]
struct Layer {
    /// in x out
    w: Array2<f64>,
    b: Array1<f64>,
}

/// Multilayer perceptron mapping a flattened state to one Q-value per action.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layer_sizes: Vec<usize>,
    layers: Vec<Layer>,
}

/// Per-layer parameter gradients, same shapes as the network.
#[derive(Debug, Clone)]
pub struct Grads {
    dw: Vec<Array2<f64>>,
    db: Vec<Array1<f64>>,
}

impl Grads {
    /// Gradients flattened in the same order as `Mlp::get_param`
    /// (weights row-major, then biases, layer by layer).
    pub fn flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (dw, db) in self.dw.iter().zip(self.db.iter()) {
            out.extend(dw.iter());
            out.extend(db.iter());
        }
        out
    }
}

impl Mlp {
    /// He-style uniform fan-in initialization, zero biases.
    pub fn new<R: Rng>(layer_sizes: &[usize], rng: &mut R) -> Result<Self> {
        if layer_sizes.len() < 2 {
            return Err(RisError::InvalidArgument(
                "MLP needs at least input and output widths".into(),
            ));
        }
        if layer_sizes.contains(&0) {
            return Err(RisError::InvalidArgument("zero-width layer".into()));
        }
        let layers = layer_sizes
            .windows(2)
            .map(|pair| {
                let (fan_in, fan_out) = (pair[0], pair[1]);
                let limit = (6.0 / fan_in as f64).sqrt();
                Layer {
                    w: Array2::from_shape_fn((fan_in, fan_out), |_| {
                        rng.gen_range(-limit..limit)
                    }),
                    b: Array1::zeros(fan_out),
                }
            })
            .collect();
        Ok(Mlp {
            layer_sizes: layer_sizes.to_vec(),
            layers,
        })
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn input_width(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_width(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    /// Q-values for a single state.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        let x = Array2::from_shape_vec((1, input.len()), input.to_vec())
            .map_err(|e| RisError::ShapeMismatch(e.to_string()))?;
        Ok(self.forward_batch(&x)?.row(0).to_vec())
    }

    /// Q-values for a batch of states (rows).
    pub fn forward_batch(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.input_width() {
            return Err(RisError::ShapeMismatch(format!(
                "input width {} != layer 0 width {}",
                x.ncols(),
                self.input_width()
            )));
        }
        let last = self.layers.len() - 1;
        let mut a = x.clone();
        for (l, layer) in self.layers.iter().enumerate() {
            let mut z = a.dot(&layer.w);
            z += &layer.b;
            a = if l < last {
                z.mapv_into(|v| v.max(0.0))
            } else {
                z
            };
        }
        Ok(a)
    }

    /// Minibatch loss L = 1/(2 N_b) sum (y_j - Q(s_j, a_j))^2 and its
    /// gradients. Only the taken-action outputs carry error signal.
    pub fn loss_and_grads(
        &self,
        x: &Array2<f64>,
        actions: &[usize],
        targets: &[f64],
    ) -> Result<(f64, Grads)> {
        let n_batch = x.nrows();
        if n_batch == 0 {
            return Err(RisError::InvalidArgument("empty minibatch".into()));
        }
        if actions.len() != n_batch || targets.len() != n_batch {
            return Err(RisError::ShapeMismatch(
                "batch inputs, actions, targets must have equal length".into(),
            ));
        }
        if x.ncols() != self.input_width() {
            return Err(RisError::ShapeMismatch("input width mismatch".into()));
        }

        let last = self.layers.len() - 1;
        // forward pass keeping pre- and post-activation values
        let mut zs: Vec<Array2<f64>> = Vec::with_capacity(self.layers.len());
        let mut acts: Vec<Array2<f64>> = vec![x.clone()];
        for (l, layer) in self.layers.iter().enumerate() {
            let mut z = acts[l].dot(&layer.w);
            z += &layer.b;
            let a = if l < last {
                z.mapv(|v| v.max(0.0))
            } else {
                z.clone()
            };
            zs.push(z);
            acts.push(a);
        }
        let q = &acts[self.layers.len()];

        let scale = 1.0 / n_batch as f64;
        let mut loss = 0.0;
        let mut dz = Array2::<f64>::zeros(q.raw_dim());
        for j in 0..n_batch {
            let a = actions[j];
            if a >= self.output_width() {
                return Err(RisError::InvalidArgument(format!(
                    "action {a} out of range for {} outputs",
                    self.output_width()
                )));
            }
            let err = q[[j, a]] - targets[j];
            loss += 0.5 * err * err * scale;
            dz[[j, a]] = err * scale;
        }

        let mut dw = vec![Array2::zeros((0, 0)); self.layers.len()];
        let mut db = vec![Array1::zeros(0); self.layers.len()];
        for l in (0..self.layers.len()).rev() {
            dw[l] = acts[l].t().dot(&dz);
            db[l] = dz.sum_axis(Axis(0));
            if l > 0 {
                let mut da = dz.dot(&self.layers[l].w.t());
                da.zip_mut_with(&zs[l - 1], |d, &z| {
                    if z <= 0.0 {
                        *d = 0.0;
                    }
                });
                dz = da;
            }
        }
        Ok((loss, Grads { dw, db }))
    }

    /// One optimizer step on a minibatch of (state, action, target); returns
    /// the loss before the step.
    pub fn train_step(
        &mut self,
        opt: &mut Adam,
        x: &Array2<f64>,
        actions: &[usize],
        targets: &[f64],
    ) -> Result<f64> {
        let (loss, grads) = self.loss_and_grads(x, actions, targets)?;
        opt.apply(self, &grads)?;
        Ok(loss)
    }

    /// Deep copy used as the target network; subsequent online updates do not
    /// affect the copy.
    pub fn sync_target(&self) -> Mlp {
        self.clone()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    /// Flat parameter access (weights row-major, then biases, layer by
    /// layer); used by the finite-difference gradient check.
    pub fn get_param(&self, mut idx: usize) -> f64 {
        for l in &self.layers {
            if idx < l.w.len() {
                return *l.w.as_slice().unwrap().get(idx).unwrap();
            }
            idx -= l.w.len();
            if idx < l.b.len() {
                return l.b[idx];
            }
            idx -= l.b.len();
        }
        panic!("parameter index out of range");
    }

    pub fn set_param(&mut self, mut idx: usize, value: f64) {
        for l in &mut self.layers {
            if idx < l.w.len() {
                l.w.as_slice_mut().unwrap()[idx] = value;
                return;
            }
            idx -= l.w.len();
            if idx < l.b.len() {
                l.b[idx] = value;
                return;
            }
            idx -= l.b.len();
        }
        panic!("parameter index out of range");
    }

    /// Versioned binary checkpoint: magic, layer sizes, then per layer
    /// row-major weights and biases, all little-endian f64.
    pub fn save<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(CKPT_MAGIC)?;
        w.write_all(&(self.layer_sizes.len() as u32).to_le_bytes())?;
        for &s in &self.layer_sizes {
            w.write_all(&(s as u64).to_le_bytes())?;
        }
        for l in &self.layers {
            for v in l.w.iter().chain(l.b.iter()) {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn load<P: AsRef<Path>>(path: P) -> Result<Mlp> {
        let mut r = BufReader::new(File::open(path)?);
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != CKPT_MAGIC {
            return Err(RisError::InvalidArgument(
                "not a recognized checkpoint file".into(),
            ));
        }
        let mut u32buf = [0u8; 4];
        r.read_exact(&mut u32buf)?;
        let n_sizes = u32::from_le_bytes(u32buf) as usize;
        let mut sizes = Vec::with_capacity(n_sizes);
        let mut u64buf = [0u8; 8];
        for _ in 0..n_sizes {
            r.read_exact(&mut u64buf)?;
            sizes.push(u64::from_le_bytes(u64buf) as usize);
        }
        if sizes.len() < 2 {
            return Err(RisError::InvalidArgument("checkpoint header too short".into()));
        }
        let mut layers = Vec::with_capacity(sizes.len() - 1);
        let mut f64buf = [0u8; 8];
        for pair in sizes.windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let mut w = Array2::zeros((fan_in, fan_out));
            for v in w.iter_mut() {
                r.read_exact(&mut f64buf)?;
                *v = f64::from_le_bytes(f64buf);
            }
            let mut b = Array1::zeros(fan_out);
            for v in b.iter_mut() {
                r.read_exact(&mut f64buf)?;
                *v = f64::from_le_bytes(f64buf);
            }
            layers.push(Layer { w, b });
        }
        Ok(Mlp {
            layer_sizes: sizes,
            layers,
        })
    }
}

/// Adaptive moment estimation with standard defaults.
#[derive(Debug, Clone)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step: u64,
    m_w: Vec<Array2<f64>>,
    v_w: Vec<Array2<f64>>,
    m_b: Vec<Array1<f64>>,
    v_b: Vec<Array1<f64>>,
}

impl Adam {
    pub fn new(learning_rate: f64, net: &Mlp) -> Self {
        Adam {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            m_w: net.layers.iter().map(|l| Array2::zeros(l.w.raw_dim())).collect(),
            v_w: net.layers.iter().map(|l| Array2::zeros(l.w.raw_dim())).collect(),
            m_b: net.layers.iter().map(|l| Array1::zeros(l.b.raw_dim())).collect(),
            v_b: net.layers.iter().map(|l| Array1::zeros(l.b.raw_dim())).collect(),
        }
    }

    pub fn apply(&mut self, net: &mut Mlp, grads: &Grads) -> Result<()> {
        if grads.dw.len() != net.layers.len() {
            return Err(RisError::ShapeMismatch(
                "gradient/network layer count mismatch".into(),
            ));
        }
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        let lr = self.learning_rate;
        let (b1, b2, eps) = (self.beta1, self.beta2, self.epsilon);

        for (l, layer) in net.layers.iter_mut().enumerate() {
            azip_update(
                layer.w.as_slice_mut().unwrap(),
                grads.dw[l].as_slice().unwrap(),
                self.m_w[l].as_slice_mut().unwrap(),
                self.v_w[l].as_slice_mut().unwrap(),
                lr, b1, b2, eps, bc1, bc2,
            );
            azip_update(
                layer.b.as_slice_mut().unwrap(),
                grads.db[l].as_slice().unwrap(),
                self.m_b[l].as_slice_mut().unwrap(),
                self.v_b[l].as_slice_mut().unwrap(),
                lr, b1, b2, eps, bc1, bc2,
            );
        }
        Ok(())
    }
}

#[allow(clippy::too_many_arguments)]
fn azip_update(
    params: &mut [f64],
    grads: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    lr: f64,
    b1: f64,
    b2: f64,
    eps: f64,
    bc1: f64,
    bc2: f64,
) {
    for i in 0..params.len() {
        let g = grads[i];
        m[i] = b1 * m[i] + (1.0 - b1) * g;
        v[i] = b2 * v[i] + (1.0 - b2) * g * g;
        let m_hat = m[i] / bc1;
        let v_hat = v[i] / bc2;
        params[i] -= lr * m_hat / (v_hat.sqrt() + eps);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn rand_vec(rng: &mut impl Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    #[test]
    fn zero_network_outputs_zero() {
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let mut net = Mlp::new(&[4, 8, 3], &mut rng).unwrap();
        for i in 0..net.param_count() {
            net.set_param(i, 0.0);
        }
        let out = net.forward(&[0.3, -0.2, 0.9, 0.1]).unwrap();
        assert!(out.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn identity_single_layer_passthrough() {
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        let mut net = Mlp::new(&[3, 3], &mut rng).unwrap();
        for i in 0..net.param_count() {
            net.set_param(i, 0.0);
        }
        // weight matrix is 3x3 row-major at the start of the flat layout
        for d in 0..3 {
            net.set_param(d * 3 + d, 1.0);
        }
        let x = [0.5, -1.25, 2.0];
        let out = net.forward(&x).unwrap();
        assert_eq!(out, x.to_vec());
    }

    #[test]
    fn forward_matches_straight_line_reference() {
        // independent reference: explicit scalar loops, no ndarray
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let sizes = [5usize, 7, 4];
        let net = Mlp::new(&sizes, &mut rng).unwrap();
        let x = rand_vec(&mut rng, 5);

        let mut flat = Vec::with_capacity(net.param_count());
        for i in 0..net.param_count() {
            flat.push(net.get_param(i));
        }
        // layer 1: w (5x7 row-major) then b (7)
        let mut h = [0.0f64; 7];
        for o in 0..7 {
            let mut acc = flat[5 * 7 + o]; // bias
            for i in 0..5 {
                acc += x[i] * flat[i * 7 + o];
            }
            h[o] = acc.max(0.0);
        }
        let off = 5 * 7 + 7;
        let mut out_ref = [0.0f64; 4];
        for o in 0..4 {
            let mut acc = flat[off + 7 * 4 + o];
            for i in 0..7 {
                acc += h[i] * flat[off + i * 4 + o];
            }
            out_ref[o] = acc;
        }
        let out = net.forward(&x).unwrap();
        for (a, b) in out.iter().zip(out_ref.iter()) {
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
        }
    }

    #[test]
    fn width_mismatch_rejected() {
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        let net = Mlp::new(&[4, 3], &mut rng).unwrap();
        assert!(net.forward(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn zero_gradient_when_targets_equal_outputs() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let mut net = Mlp::new(&[3, 6, 2], &mut rng).unwrap();
        let x = ndarray::Array2::from_shape_vec((2, 3), rand_vec(&mut rng, 6)).unwrap();
        let actions = [0usize, 1];
        let q = net.forward_batch(&x).unwrap();
        let targets = [q[[0, 0]], q[[1, 1]]];
        let before = net.clone();
        let mut opt = Adam::new(1e-3, &net);
        let loss = net.train_step(&mut opt, &x, &actions, &targets).unwrap();
        assert_eq!(loss, 0.0);
        for i in 0..net.param_count() {
            assert!((net.get_param(i) - before.get_param(i)).abs() < 1e-12);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha12Rng::seed_from_u64(6);
        let mut net = Mlp::new(&[6, 8, 4], &mut rng).unwrap();
        let x = ndarray::Array2::from_shape_vec((1, 6), rand_vec(&mut rng, 6)).unwrap();
        let actions = [2usize];
        let targets = [0.7];
        let (_, grads) = net.loss_and_grads(&x, &actions, &targets).unwrap();
        let flat_grad = |g: &Grads| -> Vec<f64> {
            let mut out = Vec::new();
            for l in 0..g.dw.len() {
                out.extend(g.dw[l].iter());
                out.extend(g.db[l].iter());
            }
            out
        };
        let analytic = flat_grad(&grads);
        let h = 1e-5;
        #[allow(clippy::needless_range_loop)]
        for i in 0..net.param_count() {
            let orig = net.get_param(i);
            net.set_param(i, orig + h);
            let (lp, _) = net.loss_and_grads(&x, &actions, &targets).unwrap();
            net.set_param(i, orig - h);
            let (lm, _) = net.loss_and_grads(&x, &actions, &targets).unwrap();
            net.set_param(i, orig);
            let fd = (lp - lm) / (2.0 * h);
            let denom = analytic[i].abs().max(fd.abs()).max(1e-8);
            assert!(
                (analytic[i] - fd).abs() / denom <= 1e-5,
                "coordinate {i}: analytic {} vs fd {fd}",
                analytic[i]
            );
        }
    }

    #[test]
    fn loss_decreases_on_fixed_batch() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let mut net = Mlp::new(&[4, 16, 3], &mut rng).unwrap();
        let x = ndarray::Array2::from_shape_vec((32, 4), rand_vec(&mut rng, 128)).unwrap();
        let actions: Vec<usize> = (0..32).map(|_| rng.gen_range(0..3)).collect();
        let targets: Vec<f64> = rand_vec(&mut rng, 32);
        let mut opt = Adam::new(1e-3, &net);
        let mut last = f64::INFINITY;
        for step in 0..50 {
            let loss = net.train_step(&mut opt, &x, &actions, &targets).unwrap();
            assert!(loss < last, "loss did not decrease at step {step}: {loss} vs {last}");
            last = loss;
        }
    }

    #[test]
    fn target_sync_semantics() {
        let mut rng = ChaCha12Rng::seed_from_u64(8);
        let mut net = Mlp::new(&[3, 5, 2], &mut rng).unwrap();
        let target = net.sync_target();
        let x = rand_vec(&mut rng, 3);
        assert_eq!(net.forward(&x).unwrap(), target.forward(&x).unwrap());
        // idempotent
        assert_eq!(target, target.sync_target());
        // independence after one online step
        let xb = ndarray::Array2::from_shape_vec((1, 3), x.clone()).unwrap();
        let mut opt = Adam::new(1e-2, &net);
        net.train_step(&mut opt, &xb, &[0], &[10.0]).unwrap();
        assert_ne!(net.forward(&x).unwrap(), target.forward(&x).unwrap());
    }

    #[test]
    fn checkpoint_roundtrip() {
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        let net = Mlp::new(&[4, 6, 3], &mut rng).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("q.ckpt");
        net.save(&path).unwrap();
        let loaded = Mlp::load(&path).unwrap();
        assert_eq!(net, loaded);
        let x = rand_vec(&mut rng, 4);
        assert_eq!(net.forward(&x).unwrap(), loaded.forward(&x).unwrap());
    }
}
