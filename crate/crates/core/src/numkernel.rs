//! Dense kernels used by the bigram CNN, each paired with its backward pass.
//!
//! Shapes follow the token-major convention: a sentence map is a
//! `len × depth` matrix whose row `i` is the feature vector of position `i`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense2 {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Dense2 {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Dense2 {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{} values cannot fill a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Dense2 { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::Shape("ragged rows".into()));
            }
            data.extend_from_slice(r);
        }
        Ok(Dense2 {
            rows: rows.len(),
            cols,
            data,
        })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
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

    /// First `n` rows as a new matrix, padded with zero rows when `n` exceeds
    /// the current row count.
    pub fn head_rows(&self, n: usize) -> Dense2 {
        let mut out = Dense2::zeros(n, self.cols);
        let copy = n.min(self.rows) * self.cols;
        out.data[..copy].copy_from_slice(&self.data[..copy]);
        out
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

fn check_conv_shapes(input: &Dense2, filters: &Dense2, bias: &[f64]) -> Result<()> {
    if input.rows < 2 {
        return Err(Error::Shape(format!(
            "bigram convolution needs at least 2 positions, got {}",
            input.rows
        )));
    }
    if filters.cols != 2 * input.cols {
        return Err(Error::Shape(format!(
            "filters span {} values but the bigram window has {}",
            filters.cols,
            2 * input.cols
        )));
    }
    if bias.len() != filters.rows {
        return Err(Error::Shape(format!(
            "{} biases for {} filters",
            bias.len(),
            filters.rows
        )));
    }
    Ok(())
}

/// Pre-activation of [`conv_bigram`]: `Σ_d filters[f,d]·[x_i; x_{i+1}][d] + bias[f]`.
pub fn conv_bigram_pre(input: &Dense2, filters: &Dense2, bias: &[f64]) -> Result<Dense2> {
    check_conv_shapes(input, filters, bias)?;
    let depth = input.cols;
    let n_f = filters.rows;
    let mut out = Dense2::zeros(input.rows - 1, n_f);
    for i in 0..input.rows - 1 {
        let here = input.row(i);
        let next = input.row(i + 1);
        let out_row = out.row_mut(i);
        for (f, o) in out_row.iter_mut().enumerate() {
            let w = filters.row(f);
            let mut acc = bias[f];
            for d in 0..depth {
                acc += w[d] * here[d] + w[depth + d] * next[d];
            }
            *o = acc;
        }
    }
    Ok(out)
}

/// Width-2, full-depth convolution over positions followed by `tanh`.
pub fn conv_bigram(input: &Dense2, filters: &Dense2, bias: &[f64]) -> Result<Dense2> {
    let mut out = conv_bigram_pre(input, filters, bias)?;
    out.data.iter_mut().for_each(|v| *v = v.tanh());
    Ok(out)
}

/// Cotangents of [`conv_bigram`] inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvGrads {
    pub input: Dense2,
    pub filters: Dense2,
    pub bias: Vec<f64>,
}

/// Backward pass of [`conv_bigram`]. `output` is the forward (post-tanh)
/// result and `grad_output` its cotangent.
pub fn conv_bigram_backward(
    input: &Dense2,
    filters: &Dense2,
    output: &Dense2,
    grad_output: &Dense2,
) -> ConvGrads {
    let depth = input.cols;
    let n_f = filters.rows;
    let mut g_in = Dense2::zeros(input.rows, depth);
    let mut g_w = Dense2::zeros(n_f, 2 * depth);
    let mut g_b = vec![0.0; n_f];
    for i in 0..output.rows {
        for (f, gb) in g_b.iter_mut().enumerate() {
            let y = output.get(i, f);
            let g = grad_output.get(i, f) * (1.0 - y * y);
            if g == 0.0 {
                continue;
            }
            *gb += g;
            let w = filters.row(f);
            {
                let gw = g_w.row_mut(f);
                let here = input.row(i);
                let next = input.row(i + 1);
                for d in 0..depth {
                    gw[d] += g * here[d];
                    gw[depth + d] += g * next[d];
                }
            }
            let (head, tail) = g_in.data.split_at_mut((i + 1) * depth);
            let gh = &mut head[i * depth..];
            let gn = &mut tail[..depth];
            for d in 0..depth {
                gh[d] += g * w[d];
                gn[d] += g * w[depth + d];
            }
        }
    }
    ConvGrads {
        input: g_in,
        filters: g_w,
        bias: g_b,
    }
}

/// Non-overlapping mean pooling over positions with window 2. An odd trailing
/// position forms a window of its own.
pub fn avg_pool2(input: &Dense2) -> Dense2 {
    let out_rows = input.rows.div_ceil(2);
    let mut out = Dense2::zeros(out_rows, input.cols);
    for j in 0..out_rows {
        let start = 2 * j;
        let end = (start + 2).min(input.rows);
        let scale = 1.0 / (end - start) as f64;
        let o = out.row_mut(j);
        for i in start..end {
            for (acc, v) in o.iter_mut().zip(input.row(i)) {
                *acc += v * scale;
            }
        }
    }
    out
}

pub fn avg_pool2_backward(grad_output: &Dense2, input_rows: usize) -> Dense2 {
    let mut g = Dense2::zeros(input_rows, grad_output.cols);
    for j in 0..grad_output.rows {
        let start = 2 * j;
        let end = (start + 2).min(input_rows);
        let scale = 1.0 / (end - start) as f64;
        for i in start..end {
            for (dst, src) in g.row_mut(i).iter_mut().zip(grad_output.row(j)) {
                *dst = src * scale;
            }
        }
    }
    g
}

/// Column means.
pub fn global_avg_pool(input: &Dense2) -> Vec<f64> {
    let mut out = vec![0.0; input.cols];
    let scale = 1.0 / input.rows as f64;
    for i in 0..input.rows {
        for (acc, v) in out.iter_mut().zip(input.row(i)) {
            *acc += v;
        }
    }
    out.iter_mut().for_each(|v| *v *= scale);
    out
}

pub fn global_avg_pool_backward(grad_output: &[f64], input_rows: usize) -> Dense2 {
    let scale = 1.0 / input_rows as f64;
    let mut g = Dense2::zeros(input_rows, grad_output.len());
    for i in 0..input_rows {
        for (dst, src) in g.row_mut(i).iter_mut().zip(grad_output) {
            *dst = src * scale;
        }
    }
    g
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub const PROB_FLOOR: f64 = 1e-7;

/// Binary cross-entropy with `p` clamped to `[1e-7, 1 - 1e-7]`.
pub fn bce_loss(p: f64, label: bool) -> f64 {
    let p = p.clamp(PROB_FLOOR, 1.0 - PROB_FLOOR);
    if label {
        -p.ln()
    } else {
        -(1.0 - p).ln()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    /// Flat coordinate with the largest relative error.
    pub worst_index: usize,
    pub passed: bool,
}

/// Compares `analytic` against central differences of `f` at `theta`.
///
/// Relative error per coordinate is `|a - n| / max(1e-8, |a| + |n|)`.
pub fn finite_diff_check<F>(
    mut f: F,
    analytic: &[f64],
    theta: &[f64],
    eps: f64,
    tol: f64,
) -> Result<GradCheckReport>
where
    F: FnMut(&[f64]) -> f64,
{
    if eps <= 0.0 {
        return Err(Error::InvalidArgument(
            "finite-difference step must be positive".into(),
        ));
    }
    if analytic.len() != theta.len() {
        return Err(Error::Shape(format!(
            "gradient has {} coordinates, point has {}",
            analytic.len(),
            theta.len()
        )));
    }
    let mut point = theta.to_vec();
    let mut worst = (0.0_f64, 0_usize);
    for i in 0..point.len() {
        let orig = point[i];
        point[i] = orig + eps;
        let plus = f(&point);
        point[i] = orig - eps;
        let minus = f(&point);
        point[i] = orig;
        if !plus.is_finite() || !minus.is_finite() {
            return Err(Error::NonFinite(format!("objective at coordinate {i}")));
        }
        let numeric = (plus - minus) / (2.0 * eps);
        let a = analytic[i];
        let rel = (a - numeric).abs() / (a.abs() + numeric.abs()).max(1e-8);
        if rel > worst.0 {
            worst = (rel, i);
        }
    }
    Ok(GradCheckReport {
        max_rel_err: worst.0,
        worst_index: worst.1,
        passed: worst.0 < tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng as _;

    use crate::rng;

    fn random(rng: &mut rng::Rng, rows: usize, cols: usize) -> Dense2 {
        let data = (0..rows * cols)
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        Dense2::from_vec(rows, cols, data).unwrap()
    }

    fn dot(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    #[test]
    fn conv_pre_activation_by_hand() {
        let input = Dense2::from_vec(3, 1, vec![1.0, 2.0, 3.0]).unwrap();
        let filters = Dense2::from_vec(1, 2, vec![1.0, 1.0]).unwrap();
        let pre = conv_bigram_pre(&input, &filters, &[0.0]).unwrap();
        assert_eq!(pre.as_slice(), &[3.0, 5.0]);
    }

    #[test]
    fn conv_zero_filters_give_zero() {
        let input = Dense2::from_vec(4, 2, vec![1.0; 8]).unwrap();
        let out = conv_bigram(&input, &Dense2::zeros(3, 4), &[0.0; 3]).unwrap();
        assert!(out.as_slice().iter().all(|&v| v == 0.0));
        assert_eq!((out.rows(), out.cols()), (3, 3));
    }

    #[test]
    fn conv_bias_only() {
        let input = Dense2::from_vec(2, 1, vec![1.0, 0.0]).unwrap();
        let out = conv_bigram(&input, &Dense2::zeros(1, 2), &[0.3]).unwrap();
        assert_eq!(out.as_slice(), &[0.3_f64.tanh()]);
    }

    #[test]
    fn conv_rejects_short_and_misshaped_inputs() {
        let one = Dense2::zeros(1, 2);
        assert!(matches!(
            conv_bigram(&one, &Dense2::zeros(1, 4), &[0.0]),
            Err(Error::Shape(_))
        ));
        let two = Dense2::zeros(2, 2);
        assert!(conv_bigram(&two, &Dense2::zeros(1, 3), &[0.0]).is_err());
        assert!(conv_bigram(&two, &Dense2::zeros(1, 4), &[0.0, 0.0]).is_err());
    }

    #[test]
    fn conv_pre_activation_is_linear_in_filters() {
        let mut r = rng::stream(3, 0);
        let input = random(&mut r, 5, 3);
        let filters = random(&mut r, 2, 6);
        let doubled =
            Dense2::from_vec(2, 6, filters.as_slice().iter().map(|v| 2.0 * v).collect()).unwrap();
        let a = conv_bigram_pre(&input, &filters, &[0.0, 0.0]).unwrap();
        let b = conv_bigram_pre(&input, &doubled, &[0.0, 0.0]).unwrap();
        for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
            assert!((2.0 * x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn pooling_by_hand() {
        let col = |v: &[f64]| Dense2::from_vec(v.len(), 1, v.to_vec()).unwrap();
        assert_eq!(avg_pool2(&col(&[3.0, 5.0])).as_slice(), &[4.0]);
        assert_eq!(avg_pool2(&col(&[7.0])).as_slice(), &[7.0]);
        assert_eq!(
            avg_pool2(&col(&[1.0, 1.0, 1.0, 1.0])).as_slice(),
            &[1.0, 1.0]
        );
        assert_eq!(avg_pool2(&col(&[1.0, 3.0, 9.0])).as_slice(), &[2.0, 9.0]);

        assert_eq!(global_avg_pool(&col(&[0.0, 2.0])), vec![1.0]);
        assert_eq!(global_avg_pool(&col(&[4.5, 4.5, 4.5])), vec![4.5]);
        assert_eq!(global_avg_pool(&Dense2::zeros(3, 2)), vec![0.0, 0.0]);
    }

    #[test]
    fn pool_then_global_equals_global_for_even_lengths() {
        let mut r = rng::stream(11, 0);
        for len in [2, 4, 6, 8] {
            let x = random(&mut r, len, 3);
            let direct = global_avg_pool(&x);
            let nested = global_avg_pool(&avg_pool2(&x));
            for (a, b) in direct.iter().zip(&nested) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn sigmoid_and_bce_values() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!((bce_loss(0.5, true) - std::f64::consts::LN_2).abs() < 1e-12);
        assert!(bce_loss(1.0, true) <= 1.1e-7);
        assert!(bce_loss(0.0, true).is_finite());
        assert!(bce_loss(1.0, false).is_finite());
    }

    #[test]
    fn finite_diff_on_squared_norm() {
        let theta = [0.3, -1.2, 2.0, 0.7];
        let grad: Vec<f64> = theta.iter().map(|t| 2.0 * t).collect();
        let f = |x: &[f64]| dot(x, x);
        let ok = finite_diff_check(f, &grad, &theta, 1e-5, 1e-6).unwrap();
        assert!(ok.passed, "{ok:?}");

        let doubled: Vec<f64> = grad.iter().map(|g| 2.0 * g).collect();
        let bad = finite_diff_check(f, &doubled, &theta, 1e-5, 1e-6).unwrap();
        assert!(!bad.passed);
        assert!((bad.max_rel_err - 1.0 / 3.0).abs() < 1e-6);
    }

    #[test]
    fn finite_diff_on_constant() {
        let r = finite_diff_check(|_| 4.0, &[0.0, 0.0], &[1.0, 2.0], 1e-5, 1e-6).unwrap();
        assert!(r.passed);
        assert_eq!(r.max_rel_err, 0.0);
    }

    #[test]
    fn finite_diff_rejects_non_finite_objective() {
        let r = finite_diff_check(|x| (x[0]).ln(), &[1.0], &[0.0], 1e-5, 1e-6);
        assert!(matches!(r, Err(Error::NonFinite(_))));
    }

    /// Scalar objective `Σ c ⊙ conv(input)` checked through every input block.
    #[test]
    fn conv_backward_matches_finite_differences() {
        for seed in 0..24u64 {
            let mut r = rng::stream(seed, 7);
            let len = r.random_range(2..=6);
            let depth = r.random_range(1..=4);
            let n_f = r.random_range(1..=3);
            let input = random(&mut r, len, depth);
            let filters = random(&mut r, n_f, 2 * depth);
            let bias: Vec<f64> = (0..n_f).map(|_| r.random_range(-0.5..0.5)).collect();
            let cot = random(&mut r, len - 1, n_f);

            let out = conv_bigram(&input, &filters, &bias).unwrap();
            let g = conv_bigram_backward(&input, &filters, &out, &cot);

            let n_in = len * depth;
            let n_w = n_f * 2 * depth;
            let mut theta = input.as_slice().to_vec();
            theta.extend_from_slice(filters.as_slice());
            theta.extend_from_slice(&bias);
            let mut analytic = g.input.as_slice().to_vec();
            analytic.extend_from_slice(g.filters.as_slice());
            analytic.extend_from_slice(&g.bias);

            let objective = |t: &[f64]| {
                let i = Dense2::from_vec(len, depth, t[..n_in].to_vec()).unwrap();
                let w = Dense2::from_vec(n_f, 2 * depth, t[n_in..n_in + n_w].to_vec()).unwrap();
                let o = conv_bigram(&i, &w, &t[n_in + n_w..]).unwrap();
                dot(o.as_slice(), cot.as_slice())
            };
            let rep = finite_diff_check(objective, &analytic, &theta, 1e-5, 1e-4).unwrap();
            assert!(rep.passed, "seed {seed}: {rep:?}");
        }
    }

    #[test]
    fn pool_backwards_match_finite_differences() {
        for seed in 0..20u64 {
            let mut r = rng::stream(seed, 8);
            let len = r.random_range(1..=6);
            let cols = r.random_range(1..=3);
            let x = random(&mut r, len, cols);

            let cot = random(&mut r, len.div_ceil(2), cols);
            let g = avg_pool2_backward(&cot, len);
            let obj = |t: &[f64]| {
                let m = Dense2::from_vec(len, cols, t.to_vec()).unwrap();
                dot(avg_pool2(&m).as_slice(), cot.as_slice())
            };
            let rep = finite_diff_check(obj, g.as_slice(), x.as_slice(), 1e-5, 1e-4).unwrap();
            assert!(rep.passed, "avg_pool2 seed {seed}: {rep:?}");

            let cot: Vec<f64> = (0..cols).map(|_| r.random_range(-1.0..1.0)).collect();
            let g = global_avg_pool_backward(&cot, len);
            let obj = |t: &[f64]| {
                let m = Dense2::from_vec(len, cols, t.to_vec()).unwrap();
                dot(&global_avg_pool(&m), &cot)
            };
            let rep = finite_diff_check(obj, g.as_slice(), x.as_slice(), 1e-5, 1e-4).unwrap();
            assert!(rep.passed, "global pool seed {seed}: {rep:?}");
        }
    }

    #[test]
    fn sigmoid_bce_gradient_is_p_minus_label() {
        for &(z, label) in &[(0.3, true), (-1.7, false), (2.2, false), (-0.4, true)] {
            let analytic = sigmoid(z) - if label { 1.0 } else { 0.0 };
            let rep = finite_diff_check(
                |t| bce_loss(sigmoid(t[0]), label),
                &[analytic],
                &[z],
                1e-5,
                1e-6,
            )
            .unwrap();
            assert!(rep.passed, "{rep:?}");
        }
    }
}
