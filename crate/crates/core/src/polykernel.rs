//! Parametric polynomial kernel network with a single dropout layer.
//!
//! The network maps `x ∈ R^input_dim` to
//!
//! ```text
//! f(x | d) = W2 · pow_m(d ∘ (W1 x + B1)) + B2
//! ```
//!
//! where `d` is a binary dropout mask over the `hidden_dim` units and
//! `pow_m` is the repeated Hadamard product with `m + 1` factors
//! (`pow_0(a) = a`, `pow_1(a) = a ∘ a`). The effective polynomial degree of
//! the hidden basis is therefore `kernel_order + 1`.
//!
//! The mask is applied before the power and no `1 / (1 - r)` rescaling is
//! used: predictions are made with masks active, so train and predict see the
//! same distribution.

use rand::Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Number of batch items per partial sum in [`loss_and_gradient`]. Partial sums
/// are always reduced in chunk order, so results do not depend on the number
/// of worker threads.
const GRADIENT_CHUNK: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkShape {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub output_dim: usize,
    pub kernel_order: u32,
}

impl NetworkShape {
    pub fn new(
        input_dim: usize,
        hidden_dim: usize,
        output_dim: usize,
        kernel_order: u32,
    ) -> Result<Self> {
        let shape = Self {
            input_dim,
            hidden_dim,
            output_dim,
            kernel_order,
        };
        shape.validate()?;
        Ok(shape)
    }

    /// 3 → 10 → 3 with an elementwise square.
    pub fn sprott_default() -> Self {
        Self {
            input_dim: 3,
            hidden_dim: 10,
            output_dim: 3,
            kernel_order: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.hidden_dim == 0 || self.output_dim == 0 {
            return Err(invalid(format!("network dimensions must be >= 1, got {self:?}")));
        }
        Ok(())
    }

    pub fn parameter_count(&self) -> usize {
        self.hidden_dim * self.input_dim + self.hidden_dim + self.output_dim * self.hidden_dim
            + self.output_dim
    }
}

/// Probability that a hidden unit is dropped. The retain probability is `1 - r`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct DropoutRate(f64);

impl DropoutRate {
    pub const ZERO: DropoutRate = DropoutRate(0.0);

    pub fn new(r: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&r) {
            return Err(invalid(format!("dropout rate must lie in [0, 1), got {r}")));
        }
        Ok(Self(r))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn retain_probability(self) -> f64 {
        1.0 - self.0
    }
}

impl TryFrom<f64> for DropoutRate {
    type Error = Error;

    fn try_from(r: f64) -> Result<Self> {
        Self::new(r)
    }
}

impl From<DropoutRate> for f64 {
    fn from(r: DropoutRate) -> f64 {
        r.0
    }
}

/// Binary mask over the hidden units, stored as `0.0` / `1.0` multipliers.
#[derive(Debug, Clone, PartialEq)]
pub struct DropoutMask(Vec<f64>);

impl DropoutMask {
    pub fn ones(k: usize) -> Self {
        Self(vec![1.0; k])
    }

    pub fn from_bits(bits: &[bool]) -> Self {
        Self(bits.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect())
    }

    /// Each entry is independently kept with probability `1 - r`.
    pub fn sample<R: Rng + ?Sized>(rate: DropoutRate, k: usize, rng: &mut R) -> Self {
        let r = rate.value();
        Self((0..k).map(|_| if rng.random::<f64>() >= r { 1.0 } else { 0.0 }).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_kept(&self, j: usize) -> bool {
        self.0[j] != 0.0
    }

    pub fn retained(&self) -> usize {
        self.0.iter().filter(|&&d| d != 0.0).count()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

/// `m + 1` repeated elementwise factors of `z`.
#[inline]
pub fn power_scalar(z: f64, m: u32) -> f64 {
    let mut acc = z;
    for _ in 0..m {
        acc *= z;
    }
    acc
}

/// Derivative of [`power_scalar`] with respect to `z`.
#[inline]
fn power_derivative(z: f64, m: u32) -> f64 {
    if m == 0 {
        1.0
    } else {
        (m + 1) as f64 * power_scalar(z, m - 1)
    }
}

/// Repeated Hadamard product: `m = 0` returns `a`, `m = 1` returns `a ∘ a`.
pub fn hadamard_power(a: &[f64], m: u32) -> Vec<f64> {
    a.iter().map(|&z| power_scalar(z, m)).collect()
}

/// The four parameter tensors. Matrices are row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSet {
    shape: NetworkShape,
    /// `hidden_dim × input_dim`
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    /// `output_dim × hidden_dim`
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

impl WeightSet {
    pub fn zeros(shape: NetworkShape) -> Self {
        Self {
            shape,
            w1: vec![0.0; shape.hidden_dim * shape.input_dim],
            b1: vec![0.0; shape.hidden_dim],
            w2: vec![0.0; shape.output_dim * shape.hidden_dim],
            b2: vec![0.0; shape.output_dim],
        }
    }

    pub fn from_parts(
        shape: NetworkShape,
        w1: Vec<f64>,
        b1: Vec<f64>,
        w2: Vec<f64>,
        b2: Vec<f64>,
    ) -> Result<Self> {
        shape.validate()?;
        let check = |name: &str, got: usize, want: usize| {
            if got == want {
                Ok(())
            } else {
                Err(Error::ShapeMismatch(format!("{name} has {got} entries, expected {want}")))
            }
        };
        check("w1", w1.len(), shape.hidden_dim * shape.input_dim)?;
        check("b1", b1.len(), shape.hidden_dim)?;
        check("w2", w2.len(), shape.output_dim * shape.hidden_dim)?;
        check("b2", b2.len(), shape.output_dim)?;
        let weights = Self {
            shape,
            w1,
            b1,
            w2,
            b2,
        };
        if !weights.is_finite() {
            return Err(invalid("weights must be finite"));
        }
        Ok(weights)
    }

    /// Entries i.i.d. uniform on `[-s, s]`, `s = 1 / sqrt(fan_in)` of the layer.
    pub fn random_init<R: Rng + ?Sized>(shape: NetworkShape, rng: &mut R) -> Self {
        let mut weights = Self::zeros(shape);
        let s1 = 1.0 / (shape.input_dim as f64).sqrt();
        let s2 = 1.0 / (shape.hidden_dim as f64).sqrt();
        let layer1 = Uniform::new_inclusive(-s1, s1).expect("finite bounds");
        let layer2 = Uniform::new_inclusive(-s2, s2).expect("finite bounds");
        for v in weights.w1.iter_mut().chain(weights.b1.iter_mut()) {
            *v = layer1.sample(rng);
        }
        for v in weights.w2.iter_mut().chain(weights.b2.iter_mut()) {
            *v = layer2.sample(rng);
        }
        weights
    }

    pub fn shape(&self) -> NetworkShape {
        self.shape
    }

    pub fn is_finite(&self) -> bool {
        self.iter().all(|v| v.is_finite())
    }

    /// All parameters in the order `w1, b1, w2, b2`.
    pub fn iter(&self) -> impl Iterator<Item = &f64> + Clone {
        self.w1.iter().chain(&self.b1).chain(&self.w2).chain(&self.b2)
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.w1
            .iter_mut()
            .chain(self.b1.iter_mut())
            .chain(self.w2.iter_mut())
            .chain(self.b2.iter_mut())
    }

    fn add_assign(&mut self, other: &WeightSet) {
        for (a, b) in self.iter_mut().zip(other.iter()) {
            *a += b;
        }
    }

    fn scale(&mut self, s: f64) {
        for a in self.iter_mut() {
            *a *= s;
        }
    }

    fn check_io(&self, x: &[f64], out_len: usize) {
        assert_eq!(x.len(), self.shape.input_dim, "input dimension");
        assert_eq!(out_len, self.shape.output_dim, "output dimension");
    }

    /// Pre-activation `W1 x + B1` of hidden unit `j`.
    #[inline]
    fn pre_activation(&self, j: usize, x: &[f64]) -> f64 {
        let n = self.shape.input_dim;
        let row = &self.w1[j * n..(j + 1) * n];
        row.iter().zip(x).fold(self.b1[j], |acc, (w, xi)| acc + w * xi)
    }

    /// `f(x | mask)` written into `out`. Non-finite values propagate.
    pub fn forward_into(&self, x: &[f64], mask: &DropoutMask, out: &mut [f64]) {
        self.check_io(x, out.len());
        assert_eq!(mask.len(), self.shape.hidden_dim, "mask length");
        let k = self.shape.hidden_dim;
        let m = self.shape.kernel_order;
        out.copy_from_slice(&self.b2);
        for j in 0..k {
            let z = mask.0[j] * self.pre_activation(j, x);
            let h = power_scalar(z, m);
            for (i, o) in out.iter_mut().enumerate() {
                *o += self.w2[i * k + j] * h;
            }
        }
    }

    pub fn forward(&self, x: &[f64], mask: &DropoutMask) -> Vec<f64> {
        let mut out = vec![0.0; self.shape.output_dim];
        self.forward_into(x, mask, &mut out);
        out
    }

    /// Exact expectation of `f(x | d)` over `d ~ D(r)`.
    ///
    /// Every hidden term is `d_j^(m+1) a_j^(m+1)` and `d_j^(m+1) = d_j` for a
    /// binary mask, so the expectation scales each term by `1 - r`.
    pub fn expected_forward(&self, x: &[f64], rate: DropoutRate) -> Vec<f64> {
        let mut out = self.b2.clone();
        self.check_io(x, out.len());
        let k = self.shape.hidden_dim;
        let keep = rate.retain_probability();
        for j in 0..k {
            let h = keep * power_scalar(self.pre_activation(j, x), self.shape.kernel_order);
            for (i, o) in out.iter_mut().enumerate() {
                *o += self.w2[i * k + j] * h;
            }
        }
        out
    }
}

/// Input/target pairs stored contiguously.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    input_dim: usize,
    output_dim: usize,
    inputs: Vec<f64>,
    targets: Vec<f64>,
}

impl Batch {
    pub fn new(input_dim: usize, output_dim: usize, inputs: Vec<f64>, targets: Vec<f64>) -> Result<Self> {
        if input_dim == 0 || output_dim == 0 {
            return Err(invalid("batch dimensions must be >= 1"));
        }
        if !inputs.len().is_multiple_of(input_dim)
            || !targets.len().is_multiple_of(output_dim)
            || inputs.len() / input_dim != targets.len() / output_dim
        {
            return Err(Error::ShapeMismatch(format!(
                "{} inputs of dim {input_dim} vs {} targets of dim {output_dim}",
                inputs.len(),
                targets.len()
            )));
        }
        Ok(Self {
            input_dim,
            output_dim,
            inputs,
            targets,
        })
    }

    pub fn from_pairs<'a, I>(pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a [f64], &'a [f64])>,
    {
        let mut inputs = Vec::new();
        let mut targets = Vec::new();
        let mut dims = None;
        for (x, t) in pairs {
            match dims {
                None => dims = Some((x.len(), t.len())),
                Some(d) if d != (x.len(), t.len()) => {
                    return Err(Error::ShapeMismatch("ragged batch".into()))
                }
                _ => {}
            }
            inputs.extend_from_slice(x);
            targets.extend_from_slice(t);
        }
        let (n, m) = dims.ok_or_else(|| invalid("batch must not be empty"))?;
        Self::new(n, m, inputs, targets)
    }

    pub fn len(&self) -> usize {
        self.inputs.len() / self.input_dim
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn input(&self, i: usize) -> &[f64] {
        &self.inputs[i * self.input_dim..(i + 1) * self.input_dim]
    }

    pub fn target(&self, i: usize) -> &[f64] {
        &self.targets[i * self.output_dim..(i + 1) * self.output_dim]
    }

    pub fn targets_mut(&mut self) -> &mut [f64] {
        &mut self.targets
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], &[f64])> {
        self.inputs
            .chunks_exact(self.input_dim)
            .zip(self.targets.chunks_exact(self.output_dim))
    }

    fn check_against(&self, shape: &NetworkShape) -> Result<()> {
        if self.is_empty() {
            return Err(invalid("batch must not be empty"));
        }
        if self.input_dim != shape.input_dim || self.output_dim != shape.output_dim {
            return Err(Error::ShapeMismatch(format!(
                "batch is {}→{}, network is {}→{}",
                self.input_dim, self.output_dim, shape.input_dim, shape.output_dim
            )));
        }
        Ok(())
    }
}

/// Mean over the batch of `‖target − f(x | mask)‖²`.
pub fn loss_mse(weights: &WeightSet, batch: &Batch, mask: &DropoutMask) -> Result<f64> {
    batch.check_against(&weights.shape)?;
    let mut out = vec![0.0; weights.shape.output_dim];
    let mut total = 0.0;
    for (x, t) in batch.iter() {
        weights.forward_into(x, mask, &mut out);
        total += out.iter().zip(t).map(|(y, t)| (t - y) * (t - y)).sum::<f64>();
    }
    Ok(total / batch.len() as f64)
}

/// Loss and its analytic gradient with respect to every parameter.
pub fn loss_and_gradient(
    weights: &WeightSet,
    batch: &Batch,
    mask: &DropoutMask,
) -> Result<(f64, WeightSet)> {
    batch.check_against(&weights.shape)?;
    if mask.len() != weights.shape.hidden_dim {
        return Err(Error::ShapeMismatch(format!(
            "mask has {} entries, network has {} hidden units",
            mask.len(),
            weights.shape.hidden_dim
        )));
    }
    let n_chunks = batch.len().div_ceil(GRADIENT_CHUNK);
    let chunk_sum = |c: usize| {
        let lo = c * GRADIENT_CHUNK;
        let hi = (lo + GRADIENT_CHUNK).min(batch.len());
        chunk_gradient(weights, batch, mask, lo..hi)
    };

    #[cfg(feature = "parallel")]
    let partials: Vec<(f64, WeightSet)> = {
        use rayon::prelude::*;
        if n_chunks > 1 {
            (0..n_chunks).into_par_iter().map(chunk_sum).collect()
        } else {
            (0..n_chunks).map(chunk_sum).collect()
        }
    };
    #[cfg(not(feature = "parallel"))]
    let partials: Vec<(f64, WeightSet)> = (0..n_chunks).map(chunk_sum).collect();

    let mut parts = partials.into_iter();
    let (mut loss, mut grad) = parts.next().expect("non-empty batch");
    for (l, g) in parts {
        loss += l;
        grad.add_assign(&g);
    }
    let inv = 1.0 / batch.len() as f64;
    grad.scale(inv);
    Ok((loss * inv, grad))
}

/// Gradient only; see [`loss_and_gradient`].
pub fn gradient(weights: &WeightSet, batch: &Batch, mask: &DropoutMask) -> Result<WeightSet> {
    loss_and_gradient(weights, batch, mask).map(|(_, g)| g)
}

/// Unnormalised loss and gradient sums over `range`.
fn chunk_gradient(
    weights: &WeightSet,
    batch: &Batch,
    mask: &DropoutMask,
    range: std::ops::Range<usize>,
) -> (f64, WeightSet) {
    let shape = weights.shape;
    let (n, k, p) = (shape.input_dim, shape.hidden_dim, shape.output_dim);
    let m = shape.kernel_order;
    let mut grad = WeightSet::zeros(shape);
    let mut z = vec![0.0; k];
    let mut h = vec![0.0; k];
    let mut dy = vec![0.0; p];
    let mut loss = 0.0;

    for i in range {
        let x = batch.input(i);
        let t = batch.target(i);
        for j in 0..k {
            z[j] = mask.0[j] * weights.pre_activation(j, x);
            h[j] = power_scalar(z[j], m);
        }
        for o in 0..p {
            let row = &weights.w2[o * k..(o + 1) * k];
            let y = row.iter().zip(&h).fold(weights.b2[o], |acc, (w, hj)| acc + w * hj);
            let e = y - t[o];
            loss += e * e;
            dy[o] = 2.0 * e;
        }
        for (o, &d) in dy.iter().enumerate() {
            grad.b2[o] += d;
            let row = &mut grad.w2[o * k..(o + 1) * k];
            for (g, hj) in row.iter_mut().zip(&h) {
                *g += d * hj;
            }
        }
        for (j, &zj) in z.iter().enumerate() {
            if mask.0[j] == 0.0 {
                continue;
            }
            let dh: f64 = (0..p).map(|o| weights.w2[o * k + j] * dy[o]).sum();
            let da = dh * power_derivative(zj, m) * mask.0[j];
            grad.b1[j] += da;
            let row = &mut grad.w1[j * n..(j + 1) * n];
            for (g, xi) in row.iter_mut().zip(x) {
                *g += da * xi;
            }
        }
    }
    (loss, grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pass_through_square() -> WeightSet {
        let shape = NetworkShape::sprott_default();
        let mut w = WeightSet::zeros(shape);
        for i in 0..3 {
            w.w1[i * 3 + i] = 1.0;
            w.w2[i * 10 + i] = 1.0;
        }
        w
    }

    #[test]
    fn hadamard_power_examples() {
        assert_eq!(hadamard_power(&[2.0, 3.0], 1), vec![4.0, 9.0]);
        assert_eq!(hadamard_power(&[5.0, -1.0], 0), vec![5.0, -1.0]);
        assert_eq!(hadamard_power(&[2.0, 1.0], 2), vec![8.0, 1.0]);
    }

    #[test]
    fn hadamard_power_matches_repeated_products() {
        let a = [1.5, -0.7, 2.25, 0.0, -3.0];
        for m in 0..=4u32 {
            let mut expected = a.to_vec();
            for _ in 0..m {
                for (e, v) in expected.iter_mut().zip(&a) {
                    *e *= v;
                }
            }
            assert_eq!(hadamard_power(&a, m), expected, "m = {m}");
        }
    }

    #[test]
    fn zero_rate_mask_keeps_everything() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mask = DropoutMask::sample(DropoutRate::ZERO, 5, &mut rng);
        assert_eq!(mask, DropoutMask::ones(5));
    }

    #[test]
    fn seeded_masks_replay() {
        let rate = DropoutRate::new(0.25).unwrap();
        let a = DropoutMask::sample(rate, 10, &mut ChaCha8Rng::seed_from_u64(42));
        let b = DropoutMask::sample(rate, 10, &mut ChaCha8Rng::seed_from_u64(42));
        assert_eq!(a, b);
    }

    #[test]
    fn mask_density_matches_retain_probability() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for r in [0.05, 0.25, 0.5] {
            let rate = DropoutRate::new(r).unwrap();
            let draws = 100_000;
            let kept: usize = (0..draws)
                .map(|_| DropoutMask::sample(rate, 10, &mut rng).retained())
                .sum();
            let frac = kept as f64 / (draws * 10) as f64;
            assert!((frac - (1.0 - r)).abs() < 0.01, "r = {r}: {frac}");
        }
    }

    #[test]
    fn rate_bounds() {
        assert!(DropoutRate::new(1.0).is_err());
        assert!(DropoutRate::new(-0.1).is_err());
        assert!(DropoutRate::new(f64::NAN).is_err());
        assert!(DropoutRate::new(0.0).is_ok());
    }

    #[test]
    fn pass_through_square_forward() {
        let w = pass_through_square();
        let x = [1.0, 2.0, 3.0];
        assert_eq!(w.forward(&x, &DropoutMask::ones(10)), vec![1.0, 4.0, 9.0]);
        let mut bits = [true; 10];
        bits[1] = false;
        assert_eq!(w.forward(&x, &DropoutMask::from_bits(&bits)), vec![1.0, 0.0, 9.0]);
    }

    #[test]
    fn loss_examples() {
        let w = pass_through_square();
        let ones = DropoutMask::ones(10);
        let x = [1.0, 2.0, 3.0];
        let exact = Batch::from_pairs([(&x[..], &[1.0, 4.0, 9.0][..])]).unwrap();
        assert_eq!(loss_mse(&w, &exact, &ones).unwrap(), 0.0);
        let off = Batch::from_pairs([(&x[..], &[2.0, 6.0, 11.0][..])]).unwrap();
        assert_eq!(loss_mse(&w, &off, &ones).unwrap(), 9.0);
        let grad = gradient(&w, &exact, &ones).unwrap();
        assert!(grad.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn empty_batch_is_rejected() {
        assert!(Batch::from_pairs(std::iter::empty()).is_err());
        let w = pass_through_square();
        let empty = Batch::new(3, 3, vec![], vec![]).unwrap();
        assert!(loss_mse(&w, &empty, &DropoutMask::ones(10)).is_err());
    }

    #[test]
    fn dropped_unit_has_zero_first_layer_gradient() {
        let shape = NetworkShape::sprott_default();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let w = WeightSet::random_init(shape, &mut rng);
        let batch = Batch::from_pairs([
            (&[0.3, -1.0, 2.0][..], &[1.0, 0.0, -1.0][..]),
            (&[1.1, 0.4, -0.2][..], &[0.5, 0.2, 0.1][..]),
        ])
        .unwrap();
        let mut bits = [true; 10];
        bits[4] = false;
        let g = gradient(&w, &batch, &DropoutMask::from_bits(&bits)).unwrap();
        assert!(g.w1[12..15].iter().all(|&v| v == 0.0));
        assert_eq!(g.b1[4], 0.0);
        for o in 0..3 {
            assert_eq!(g.w2[o * 10 + 4], 0.0);
        }
    }

    #[test]
    fn expected_forward_matches_mask_average() {
        let shape = NetworkShape::sprott_default();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let w = WeightSet::random_init(shape, &mut rng);
        let rate = DropoutRate::new(0.25).unwrap();
        let x = [0.4, -0.3, 1.2];
        // enumerate all 2^10 masks with their probabilities
        let mut mean = [0.0; 3];
        for bits in 0u32..1 << 10 {
            let mask: Vec<bool> = (0..10).map(|j| bits >> j & 1 == 1).collect();
            let kept = mask.iter().filter(|&&b| b).count() as i32;
            let p = 0.75f64.powi(kept) * 0.25f64.powi(10 - kept);
            let y = w.forward(&x, &DropoutMask::from_bits(&mask));
            for (m, v) in mean.iter_mut().zip(y) {
                *m += p * v;
            }
        }
        let exact = w.expected_forward(&x, rate);
        for (a, b) in mean.iter().zip(exact) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn random_init_respects_fan_in_bounds() {
        let shape = NetworkShape::new(3, 10, 3, 1).unwrap();
        let w = WeightSet::random_init(shape, &mut ChaCha8Rng::seed_from_u64(5));
        let s1 = 1.0 / 3f64.sqrt();
        let s2 = 1.0 / 10f64.sqrt();
        assert!(w.w1.iter().chain(&w.b1).all(|v| v.abs() <= s1));
        assert!(w.w2.iter().chain(&w.b2).all(|v| v.abs() <= s2));
    }

    #[test]
    fn from_parts_validates_lengths() {
        let shape = NetworkShape::sprott_default();
        assert!(WeightSet::from_parts(shape, vec![0.0; 29], vec![0.0; 10], vec![0.0; 30], vec![0.0; 3]).is_err());
        assert!(WeightSet::from_parts(shape, vec![0.0; 30], vec![0.0; 10], vec![0.0; 30], vec![f64::NAN; 3]).is_err());
        assert!(NetworkShape::new(0, 10, 3, 1).is_err());
    }
}
