//! Small dense linear-algebra kernel, activations, the Adam optimizer and a
//! central-difference gradient checker used to verify every hand-written
//! backward pass in the crate.

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::rng::Rng;

/// Row-major dense matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::input(format!(
                "matrix data length {} does not match {rows}x{cols}",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|x| !x.is_finite()) {
            return Err(Error::input(format!("non-finite matrix entry at index {i}")));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::input("ragged rows"));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    /// A `1 x n` row vector.
    pub fn row_vector(values: &[f64]) -> Self {
        Self {
            rows: 1,
            cols: values.len(),
            data: values.to_vec(),
        }
    }

    pub fn scalar(value: f64) -> Self {
        Self::row_vector(&[value])
    }

    /// Glorot-uniform initialisation in `±sqrt(6 / (fan_in + fan_out))`.
    pub fn xavier(rows: usize, cols: usize, rng: &mut Rng) -> Self {
        let limit = (6.0 / (rows + cols).max(1) as f64).sqrt();
        Self::from_fn(rows, cols, |_, _| rng.gen_range(-limit..limit))
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    fn check_same_shape(&self, other: &Self, op: &str) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::input(format!(
                "{op}: shape {:?} vs {:?}",
                self.shape(),
                other.shape()
            )));
        }
        Ok(())
    }

    /// `self · other`.
    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::input(format!(
                "matmul: {:?} x {:?}",
                self.shape(),
                other.shape()
            )));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for (k, &a) in self.row(i).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (o, &b) in out_row.iter_mut().zip(other.row(k)) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `selfᵀ · other`.
    pub fn t_matmul(&self, other: &Self) -> Result<Self> {
        if self.rows != other.rows {
            return Err(Error::input(format!(
                "t_matmul: {:?}ᵀ x {:?}",
                self.shape(),
                other.shape()
            )));
        }
        let mut out = Self::zeros(self.cols, other.cols);
        for k in 0..self.rows {
            let b_row = other.row(k);
            for (i, &a) in self.row(k).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (o, &b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `self · otherᵀ`.
    pub fn matmul_t(&self, other: &Self) -> Result<Self> {
        if self.cols != other.cols {
            return Err(Error::input(format!(
                "matmul_t: {:?} x {:?}ᵀ",
                self.shape(),
                other.shape()
            )));
        }
        let mut out = Self::zeros(self.rows, other.rows);
        for i in 0..self.rows {
            let a = self.row(i);
            for j in 0..other.rows {
                out.data[i * other.rows + j] = dot(a, other.row(j));
            }
        }
        Ok(out)
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self.get(c, r))
    }

    /// Adds a `1 x cols` bias to every row.
    pub fn add_row_broadcast(&mut self, bias: &Self) -> Result<()> {
        if bias.rows != 1 || bias.cols != self.cols {
            return Err(Error::input(format!(
                "bias shape {:?} for matrix {:?}",
                bias.shape(),
                self.shape()
            )));
        }
        for r in 0..self.rows {
            for (x, b) in self.row_mut(r).iter_mut().zip(&bias.data) {
                *x += b;
            }
        }
        Ok(())
    }

    /// Column sums as a `1 x cols` row vector.
    pub fn column_sums(&self) -> Self {
        let mut out = Self::zeros(1, self.cols);
        for r in 0..self.rows {
            for (o, x) in out.data.iter_mut().zip(self.row(r)) {
                *o += x;
            }
        }
        out
    }

    pub fn add_assign(&mut self, other: &Self) -> Result<()> {
        self.check_same_shape(other, "add_assign")?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    pub fn scaled(&self, s: f64) -> Self {
        self.map(|x| x * s)
    }

    pub fn scale_in_place(&mut self, s: f64) {
        self.data.iter_mut().for_each(|x| *x *= s);
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn hadamard(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other, "hadamard")?;
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a * b).collect(),
        })
    }

    /// Sum of element-wise products.
    pub fn frobenius_dot(&self, other: &Self) -> Result<f64> {
        self.check_same_shape(other, "frobenius_dot")?;
        Ok(dot(&self.data, &other.data))
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn l2_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Logistic sigmoid, evaluated in a numerically stable branch.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Floor applied inside `-log(·)` so that saturated sigmoids never yield an
/// infinite loss.
pub const LOG_FLOOR: f64 = 1e-12;

/// `-ln(max(sigmoid(x), LOG_FLOOR))` together with its derivative in `x`.
/// The derivative is zero where the floor is active.
pub fn neg_log_sigmoid(x: f64) -> (f64, f64) {
    let s = sigmoid(x);
    if s < LOG_FLOOR {
        (-LOG_FLOOR.ln(), 0.0)
    } else {
        (-s.ln(), s - 1.0)
    }
}

/// Index of the largest value; the first one wins ties. Zero for an empty
/// slice.
pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

pub fn relu(x: f64) -> f64 {
    x.max(0.0)
}

/// Row-wise softmax.
pub fn softmax_rows(logits: &DenseMatrix) -> DenseMatrix {
    let mut out = logits.clone();
    for r in 0..out.rows() {
        let row = out.row_mut(r);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for x in row.iter_mut() {
            *x = (*x - max).exp();
            sum += *x;
        }
        row.iter_mut().for_each(|x| *x /= sum);
    }
    out
}

/// Adam hyper-parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Per-parameter Adam moments.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub first_moment: DenseMatrix,
    pub second_moment: DenseMatrix,
    pub step_count: u64,
    pub config: AdamConfig,
}

impl AdamState {
    pub fn new(shape: (usize, usize), config: AdamConfig) -> Self {
        Self {
            first_moment: DenseMatrix::zeros(shape.0, shape.1),
            second_moment: DenseMatrix::zeros(shape.0, shape.1),
            step_count: 0,
            config,
        }
    }
}

/// One bias-corrected Adam step applied in place.
pub fn adam_update(param: &mut DenseMatrix, grad: &DenseMatrix, state: &mut AdamState) -> Result<()> {
    param.check_same_shape(grad, "adam_update")?;
    param.check_same_shape(&state.first_moment, "adam_update moments")?;
    if let Some(i) = grad.data.iter().position(|g| !g.is_finite()) {
        return Err(Error::Training(format!(
            "non-finite gradient entry {} at index {i} (shape {:?}, step {})",
            grad.data[i],
            grad.shape(),
            state.step_count
        )));
    }
    let AdamConfig {
        learning_rate,
        beta1,
        beta2,
        epsilon,
    } = state.config;
    state.step_count += 1;
    let t = state.step_count as i32;
    let bc1 = 1.0 - beta1.powi(t);
    let bc2 = 1.0 - beta2.powi(t);
    let m = &mut state.first_moment.data;
    let v = &mut state.second_moment.data;
    for i in 0..param.data.len() {
        let g = grad.data[i];
        m[i] = beta1 * m[i] + (1.0 - beta1) * g;
        v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
        let m_hat = m[i] / bc1;
        let v_hat = v[i] / bc2;
        param.data[i] -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
    }
    Ok(())
}

/// Adam over an ordered list of parameter tensors.
#[derive(Debug, Clone)]
pub struct Adam {
    states: Vec<AdamState>,
}

impl Adam {
    pub fn new(shapes: impl IntoIterator<Item = (usize, usize)>, config: AdamConfig) -> Self {
        Self {
            states: shapes.into_iter().map(|s| AdamState::new(s, config)).collect(),
        }
    }

    pub fn for_params<P: Parameters>(params: &P, config: AdamConfig) -> Self {
        Self::new(params.tensors().iter().map(|t| t.shape()), config)
    }

    pub fn step<P: Parameters>(&mut self, params: &mut P, grads: &[DenseMatrix]) -> Result<()> {
        let tensors = params.tensors_mut();
        if tensors.len() != grads.len() || tensors.len() != self.states.len() {
            return Err(Error::input(format!(
                "optimizer holds {} states, got {} params and {} grads",
                self.states.len(),
                tensors.len(),
                grads.len()
            )));
        }
        for ((p, g), s) in tensors.into_iter().zip(grads).zip(&mut self.states) {
            adam_update(p, g, s)?;
        }
        Ok(())
    }
}

/// A model whose trainable state is an ordered list of dense tensors.
pub trait Parameters {
    fn tensors(&self) -> Vec<&DenseMatrix>;
    fn tensors_mut(&mut self) -> Vec<&mut DenseMatrix>;
}

/// Central-difference gradient check. Returns the maximum over coordinates of
/// `|a - n| / max(1, |a| + |n|)`.
pub fn finite_diff_check(
    mut loss_fn: impl FnMut(&DenseMatrix) -> f64,
    param: &DenseMatrix,
    analytic_grad: &DenseMatrix,
    h: f64,
) -> Result<f64> {
    param.check_same_shape(analytic_grad, "finite_diff_check")?;
    if h <= 0.0 {
        return Err(Error::input("finite difference step must be positive"));
    }
    let mut probe = param.clone();
    let mut worst: f64 = 0.0;
    for i in 0..param.data.len() {
        let orig = probe.data[i];
        probe.data[i] = orig + h;
        let plus = loss_fn(&probe);
        probe.data[i] = orig - h;
        let minus = loss_fn(&probe);
        probe.data[i] = orig;
        let numeric = (plus - minus) / (2.0 * h);
        let analytic = analytic_grad.data[i];
        let err = (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1.0);
        worst = worst.max(err);
    }
    Ok(worst)
}

/// Runs [`finite_diff_check`] over every tensor of a model and returns the
/// worst relative error.
pub fn check_model_gradients<P: Parameters + Clone>(
    model: &P,
    loss_fn: impl Fn(&P) -> f64,
    grads: &[DenseMatrix],
    h: f64,
) -> Result<f64> {
    let n = model.tensors().len();
    if grads.len() != n {
        return Err(Error::input(format!("{n} tensors but {} gradients", grads.len())));
    }
    let mut worst: f64 = 0.0;
    for (idx, grad) in grads.iter().enumerate() {
        let base = model.tensors()[idx].clone();
        let mut scratch = model.clone();
        let err = finite_diff_check(
            |p| {
                *scratch.tensors_mut()[idx] = p.clone();
                loss_fn(&scratch)
            },
            &base,
            grad,
            h,
        )?;
        worst = worst.max(err);
    }
    Ok(worst)
}

/// `x · w + b`, with `b` broadcast over rows.
pub fn affine_forward(x: &DenseMatrix, w: &DenseMatrix, b: &[f64]) -> Result<DenseMatrix> {
    let mut out = x.matmul(w)?;
    out.add_row_broadcast(&DenseMatrix::row_vector(b))?;
    Ok(out)
}
