//! 2-D convolution and transposed convolution with backward rules.
//!
//! Both directions share one im2col/col2im pair; the transpose is the
//! exact adjoint of the matching convolution (same weight layout, no
//! kernel flip), which the inner-product test in the suite relies on.
//!
//! Reduction order per output element is fixed: channel-major over
//! (channel, kernel row, kernel col). Multi-item batches parallelize over
//! items with sequential kernels inside; single items parallelize inside
//! the kernels. Both schedules produce bit-identical values.

use rayon::prelude::*;

use super::matmul::matmul;
use super::{Tensor, TensorError};
use crate::Scalar;

#[derive(Clone, Copy)]
struct ConvGeom {
    channels: usize,
    in_h: usize,
    in_w: usize,
    kernel: usize,
    stride: usize,
    padding: usize,
    out_h: usize,
    out_w: usize,
}

fn conv_out_extent(input: usize, kernel: usize, stride: usize, padding: usize) -> Option<usize> {
    let padded = input + 2 * padding;
    if padded < kernel {
        return None;
    }
    Some((padded - kernel) / stride + 1)
}

/// Gather: input (C,H,W) -> matrix (C*K*K, outH*outW), zero-padded.
fn im2col<S: Scalar>(input: &[S], g: ConvGeom, parallel: bool) -> Vec<S> {
    let rows = g.channels * g.kernel * g.kernel;
    let cols_n = g.out_h * g.out_w;
    let mut cols = vec![S::zero(); rows * cols_n];
    let fill_row = |r: usize, row: &mut [S]| {
        let c = r / (g.kernel * g.kernel);
        let kh = (r / g.kernel) % g.kernel;
        let kw = r % g.kernel;
        let plane = &input[c * g.in_h * g.in_w..(c + 1) * g.in_h * g.in_w];
        for oy in 0..g.out_h {
            let iy = (oy * g.stride + kh) as isize - g.padding as isize;
            if iy < 0 || iy >= g.in_h as isize {
                continue;
            }
            let src = &plane[iy as usize * g.in_w..(iy as usize + 1) * g.in_w];
            let dst = &mut row[oy * g.out_w..(oy + 1) * g.out_w];
            let (lo, hi) = valid_range(g.out_w, g.in_w, g.stride, kw, g.padding);
            if g.stride == 1 {
                let shift = kw as isize - g.padding as isize;
                dst[lo..hi]
                    .copy_from_slice(&src[(lo as isize + shift) as usize..(hi as isize + shift) as usize]);
            } else {
                for (ox, d) in dst.iter_mut().enumerate().take(hi).skip(lo) {
                    *d = src[ox * g.stride + kw - g.padding];
                }
            }
        }
    };
    if parallel {
        cols.par_chunks_mut(cols_n)
            .enumerate()
            .for_each(|(r, row)| fill_row(r, row));
    } else {
        for (r, row) in cols.chunks_mut(cols_n).enumerate() {
            fill_row(r, row);
        }
    }
    cols
}

/// Scatter-add: exact adjoint of [`im2col`].
fn col2im<S: Scalar>(cols: &[S], g: ConvGeom, parallel: bool) -> Vec<S> {
    let plane = g.in_h * g.in_w;
    let cols_n = g.out_h * g.out_w;
    let mut out = vec![S::zero(); g.channels * plane];
    let fill_channel = |c: usize, dst: &mut [S]| {
        for kh in 0..g.kernel {
            for kw in 0..g.kernel {
                let r = (c * g.kernel + kh) * g.kernel + kw;
                let row = &cols[r * cols_n..(r + 1) * cols_n];
                for oy in 0..g.out_h {
                    let iy = (oy * g.stride + kh) as isize - g.padding as isize;
                    if iy < 0 || iy >= g.in_h as isize {
                        continue;
                    }
                    let base = iy as usize * g.in_w;
                    let (lo, hi) = valid_range(g.out_w, g.in_w, g.stride, kw, g.padding);
                    for ox in lo..hi {
                        let ix = ox * g.stride + kw - g.padding;
                        dst[base + ix] += row[oy * g.out_w + ox];
                    }
                }
            }
        }
    };
    if parallel {
        out.par_chunks_mut(plane)
            .enumerate()
            .for_each(|(c, dst)| fill_channel(c, dst));
    } else {
        for (c, dst) in out.chunks_mut(plane).enumerate() {
            fill_channel(c, dst);
        }
    }
    out
}

#[inline]
fn valid_range(out_w: usize, in_w: usize, stride: usize, kw: usize, padding: usize) -> (usize, usize) {
    let lo = if kw >= padding {
        0
    } else {
        (padding - kw).div_ceil(stride)
    };
    let max_ix = in_w + padding;
    let hi = if max_ix > kw {
        ((max_ix - kw - 1) / stride + 1).min(out_w)
    } else {
        0
    };
    (lo.min(hi), hi)
}

fn transpose_2d<S: Scalar>(a: &[S], rows: usize, cols: usize) -> Vec<S> {
    let mut t = vec![S::zero(); a.len()];
    for i in 0..rows {
        for j in 0..cols {
            t[j * rows + i] = a[i * cols + j];
        }
    }
    t
}

fn add_bias_rows<S: Scalar>(y: &mut [S], bias: &[S], row_len: usize) {
    for (o, chunk) in y.chunks_mut(row_len).enumerate() {
        let b = bias[o % bias.len()];
        if b != S::zero() {
            for v in chunk {
                *v += b;
            }
        }
    }
}

/// dBias: per-channel sums of the output gradient, batch-ascending.
fn bias_grad<S: Scalar>(grad_out: &[S], b: usize, o: usize, pix: usize) -> Vec<S> {
    let mut db = vec![S::zero(); o];
    for bi in 0..b {
        for (oc, dbv) in db.iter_mut().enumerate() {
            let gslice = &grad_out[(bi * o + oc) * pix..(bi * o + oc + 1) * pix];
            let mut acc = S::zero();
            for v in gslice {
                acc += *v;
            }
            *dbv += acc;
        }
    }
    db
}

fn check_4d(op: &'static str, t: &Tensor<impl Scalar>) -> Result<(), TensorError> {
    if t.shape().len() != 4 {
        return Err(TensorError::InvalidArgument {
            op,
            reason: format!("expected a 4-D tensor, got shape {:?}", t.shape()),
        });
    }
    Ok(())
}

/// 2-D convolution: input (B,C,H,W), weight (O,C,K,K), bias (O).
///
/// Output spatial extent is floor((H + 2*padding - K)/stride) + 1.
pub fn conv2d<S: Scalar>(
    input: &Tensor<S>,
    weight: &Tensor<S>,
    bias: &Tensor<S>,
    stride: usize,
    padding: usize,
) -> Result<Tensor<S>, TensorError> {
    check_4d("conv2d", input)?;
    check_4d("conv2d", weight)?;
    if stride == 0 {
        return Err(TensorError::InvalidArgument {
            op: "conv2d",
            reason: "stride must be positive".into(),
        });
    }
    let (b, c, h, w) = {
        let s = input.shape();
        (s[0], s[1], s[2], s[3])
    };
    let (o, wc, k, k2) = {
        let s = weight.shape();
        (s[0], s[1], s[2], s[3])
    };
    if wc != c || k != k2 {
        return Err(TensorError::ShapeMismatch {
            op: "conv2d input/weight",
            lhs: input.shape().to_vec(),
            rhs: weight.shape().to_vec(),
        });
    }
    if bias.shape() != [o] {
        return Err(TensorError::ShapeMismatch {
            op: "conv2d bias",
            lhs: vec![o],
            rhs: bias.shape().to_vec(),
        });
    }
    let out_h = conv_out_extent(h, k, stride, padding).ok_or(TensorError::ZeroExtentOutput {
        op: "conv2d",
        input: h,
        kernel: k,
        stride,
        padding,
    })?;
    let out_w = conv_out_extent(w, k, stride, padding).ok_or(TensorError::ZeroExtentOutput {
        op: "conv2d",
        input: w,
        kernel: k,
        stride,
        padding,
    })?;
    let g = ConvGeom {
        channels: c,
        in_h: h,
        in_w: w,
        kernel: k,
        stride,
        padding,
        out_h,
        out_w,
    };

    let ckk = c * k * k;
    let pix = out_h * out_w;
    let in_item = c * h * w;
    let out_item = o * pix;
    let mut out = vec![S::zero(); b * out_item];
    {
        let x = input.inner.data.borrow();
        let wm = weight.inner.data.borrow();
        let bi = bias.inner.data.borrow();
        let (x, wm, bi): (&[S], &[S], &[S]) = (&x, &wm, &bi);
        let item = |bi_idx: usize, dst: &mut [S]| {
            let inner_par = b == 1;
            let cols = im2col(&x[bi_idx * in_item..(bi_idx + 1) * in_item], g, inner_par);
            let y = matmul(wm, &cols, o, ckk, pix, inner_par);
            dst.copy_from_slice(&y);
            add_bias_rows(dst, bi, pix);
        };
        if b > 1 {
            out.par_chunks_mut(out_item)
                .enumerate()
                .for_each(|(i, dst)| item(i, dst));
        } else {
            item(0, &mut out);
        }
    }

    let parents = vec![input.clone(), weight.clone(), bias.clone()];
    let (input_c, weight_c, bias_c) = (input.clone(), weight.clone(), bias.clone());
    let backward = Box::new(move |grad_out: &[S]| {
        if bias_c.requires_grad() {
            bias_c.accumulate_grad(&bias_grad(grad_out, b, o, pix));
        }
        if weight_c.requires_grad() {
            let x = input_c.inner.data.borrow();
            let x: &[S] = &x;
            // dW^T = cols * dY^T per item, partials folded in batch order.
            let parts: Vec<Vec<S>> = (0..b)
                .into_par_iter()
                .map(|bi_idx| {
                    let inner_par = b == 1;
                    let cols =
                        im2col(&x[bi_idx * in_item..(bi_idx + 1) * in_item], g, inner_par);
                    let dy = &grad_out[bi_idx * out_item..(bi_idx + 1) * out_item];
                    let dyt = transpose_2d(dy, o, pix);
                    let dwt = matmul(&cols, &dyt, ckk, pix, o, inner_par);
                    transpose_2d(&dwt, ckk, o)
                })
                .collect();
            let mut dw = vec![S::zero(); o * ckk];
            for part in &parts {
                for (d, p) in dw.iter_mut().zip(part) {
                    *d += *p;
                }
            }
            weight_c.accumulate_grad(&dw);
        }
        if input_c.requires_grad() {
            let wt = weight_c.with_data(|wm| transpose_2d(wm, o, ckk));
            let mut dx = vec![S::zero(); b * in_item];
            let item = |bi_idx: usize, dst: &mut [S]| {
                let inner_par = b == 1;
                let dy = &grad_out[bi_idx * out_item..(bi_idx + 1) * out_item];
                let dcols = matmul(&wt, dy, ckk, o, pix, inner_par);
                dst.copy_from_slice(&col2im(&dcols, g, inner_par));
            };
            if b > 1 {
                dx.par_chunks_mut(in_item)
                    .enumerate()
                    .for_each(|(i, dst)| item(i, dst));
            } else {
                item(0, &mut dx);
            }
            input_c.accumulate_grad(&dx);
        }
    });
    Ok(Tensor::from_op(out, &[b, o, out_h, out_w], parents, backward))
}

/// Transposed 2-D convolution: input (B,I,H,W), weight (I,O,K,K), bias (O).
///
/// Output spatial extent is (H-1)*stride - 2*padding + K + output_padding.
/// With a shared weight tensor this is the exact adjoint of [`conv2d`] at
/// the same stride/padding.
pub fn conv_transpose2d<S: Scalar>(
    input: &Tensor<S>,
    weight: &Tensor<S>,
    bias: &Tensor<S>,
    stride: usize,
    padding: usize,
    output_padding: usize,
) -> Result<Tensor<S>, TensorError> {
    check_4d("conv_transpose2d", input)?;
    check_4d("conv_transpose2d", weight)?;
    if stride == 0 {
        return Err(TensorError::InvalidArgument {
            op: "conv_transpose2d",
            reason: "stride must be positive".into(),
        });
    }
    if output_padding >= stride {
        return Err(TensorError::InvalidOutputPadding {
            output_padding,
            stride,
        });
    }
    let (b, i, h, w) = {
        let s = input.shape();
        (s[0], s[1], s[2], s[3])
    };
    let (wi, o, k, k2) = {
        let s = weight.shape();
        (s[0], s[1], s[2], s[3])
    };
    if wi != i || k != k2 {
        return Err(TensorError::ShapeMismatch {
            op: "conv_transpose2d input/weight",
            lhs: input.shape().to_vec(),
            rhs: weight.shape().to_vec(),
        });
    }
    if bias.shape() != [o] {
        return Err(TensorError::ShapeMismatch {
            op: "conv_transpose2d bias",
            lhs: vec![o],
            rhs: bias.shape().to_vec(),
        });
    }
    let extent = |n: usize| -> Result<usize, TensorError> {
        let v = (n - 1) * stride + k + output_padding;
        if v <= 2 * padding {
            return Err(TensorError::ZeroExtentOutput {
                op: "conv_transpose2d",
                input: n,
                kernel: k,
                stride,
                padding,
            });
        }
        Ok(v - 2 * padding)
    };
    let out_h = extent(h)?;
    let out_w = extent(w)?;
    // Geometry of the adjoint convolution: its im2col over the output
    // image yields exactly one column per input pixel.
    let g = ConvGeom {
        channels: o,
        in_h: out_h,
        in_w: out_w,
        kernel: k,
        stride,
        padding,
        out_h: h,
        out_w: w,
    };
    debug_assert_eq!(conv_out_extent(out_h, k, stride, padding), Some(h));

    let okk = o * k * k;
    let pix_in = h * w;
    let pix_out = out_h * out_w;
    let in_item = i * pix_in;
    let out_item = o * pix_out;
    let mut out = vec![S::zero(); b * out_item];
    {
        let x = input.inner.data.borrow();
        let wm = weight.inner.data.borrow();
        let bi = bias.inner.data.borrow();
        let (x, bi): (&[S], &[S]) = (&x, &bi);
        let wt = transpose_2d(&wm, i, okk);
        let item = |bi_idx: usize, dst: &mut [S]| {
            let inner_par = b == 1;
            let xf = &x[bi_idx * in_item..(bi_idx + 1) * in_item];
            let cols = matmul(&wt, xf, okk, i, pix_in, inner_par);
            dst.copy_from_slice(&col2im(&cols, g, inner_par));
            add_bias_rows(dst, bi, pix_out);
        };
        if b > 1 {
            out.par_chunks_mut(out_item)
                .enumerate()
                .for_each(|(idx, dst)| item(idx, dst));
        } else {
            item(0, &mut out);
        }
    }

    let parents = vec![input.clone(), weight.clone(), bias.clone()];
    let (input_c, weight_c, bias_c) = (input.clone(), weight.clone(), bias.clone());
    let backward = Box::new(move |grad_out: &[S]| {
        if bias_c.requires_grad() {
            bias_c.accumulate_grad(&bias_grad(grad_out, b, o, pix_out));
        }
        if weight_c.requires_grad() {
            let x = input_c.inner.data.borrow();
            let x: &[S] = &x;
            // dW^T = dcols * X^T per item, partials folded in batch order.
            let parts: Vec<Vec<S>> = (0..b)
                .into_par_iter()
                .map(|bi_idx| {
                    let inner_par = b == 1;
                    let dy = &grad_out[bi_idx * out_item..(bi_idx + 1) * out_item];
                    let dcols = im2col(dy, g, inner_par);
                    let xf = &x[bi_idx * in_item..(bi_idx + 1) * in_item];
                    let xft = transpose_2d(xf, i, pix_in);
                    let dwt = matmul(&dcols, &xft, okk, pix_in, i, inner_par);
                    transpose_2d(&dwt, okk, i)
                })
                .collect();
            let mut dw = vec![S::zero(); i * okk];
            for part in &parts {
                for (d, p) in dw.iter_mut().zip(part) {
                    *d += *p;
                }
            }
            weight_c.accumulate_grad(&dw);
        }
        if input_c.requires_grad() {
            let wm = weight_c.inner.data.borrow();
            let wm: &[S] = &wm;
            let mut dx = vec![S::zero(); b * in_item];
            let item = |bi_idx: usize, dst: &mut [S]| {
                let inner_par = b == 1;
                let dy = &grad_out[bi_idx * out_item..(bi_idx + 1) * out_item];
                let dcols = im2col(dy, g, inner_par);
                dst.copy_from_slice(&matmul(wm, &dcols, i, okk, pix_in, inner_par));
            };
            if b > 1 {
                dx.par_chunks_mut(in_item)
                    .enumerate()
                    .for_each(|(idx, dst)| item(idx, dst));
            } else {
                item(0, &mut dx);
            }
            input_c.accumulate_grad(&dx);
        }
    });
    Ok(Tensor::from_op(
        out,
        &[b, o, out_h, out_w],
        parents,
        backward,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::sum;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn t(data: Vec<f64>, shape: &[usize]) -> Tensor<f64> {
        Tensor::new(data, shape, false)
    }

    #[test]
    fn identity_kernel_passes_input_through() {
        let x = t((1..=9).map(|v| v as f64).collect(), &[1, 1, 3, 3]);
        let w = t(vec![1.0], &[1, 1, 1, 1]);
        let b = t(vec![0.0], &[1]);
        let y = conv2d(&x, &w, &b, 1, 0).unwrap();
        assert_eq!(y.shape(), &[1, 1, 3, 3]);
        assert_eq!(y.to_vec(), x.to_vec());
    }

    #[test]
    fn all_ones_kernel_sums_window() {
        // hand-computed dot product: 1+2+3+4 = 10
        let x = t(vec![1.0, 2.0, 3.0, 4.0], &[1, 1, 2, 2]);
        let w = t(vec![1.0; 4], &[1, 1, 2, 2]);
        let b = t(vec![0.0], &[1]);
        let y = conv2d(&x, &w, &b, 1, 0).unwrap();
        assert_eq!(y.shape(), &[1, 1, 1, 1]);
        assert_eq!(y.to_vec(), vec![10.0]);
    }

    #[test]
    fn downsample_shape_arithmetic() {
        // H=224, K=4, stride=2, pad=1 -> 112
        assert_eq!(conv_out_extent(224, 4, 2, 1), Some(112));
        let x = Tensor::<f32>::zeros(&[1, 1, 224, 224]);
        let w = Tensor::<f32>::zeros(&[1, 1, 4, 4]);
        let b = Tensor::<f32>::zeros(&[1]);
        let y = conv2d(&x, &w, &b, 2, 1).unwrap();
        assert_eq!(y.shape(), &[1, 1, 112, 112]);
    }

    #[test]
    fn transpose_shape_arithmetic() {
        // H=56, K=4, stride=2, pad=1, op=0 -> 112; op must stay below stride
        let x = Tensor::<f32>::zeros(&[1, 1, 56, 56]);
        let w = Tensor::<f32>::zeros(&[1, 1, 4, 4]);
        let b = Tensor::<f32>::zeros(&[1]);
        let y = conv_transpose2d(&x, &w, &b, 2, 1, 0).unwrap();
        assert_eq!(y.shape(), &[1, 1, 112, 112]);
        assert!(matches!(
            conv_transpose2d(&x, &w, &b, 2, 1, 2),
            Err(TensorError::InvalidOutputPadding { .. })
        ));
    }

    #[test]
    fn transpose_scatters_single_pixel() {
        // hand-computed scatter: one input pixel of 5 through an all-ones
        // 2x2 kernel covers the whole 2x2 output
        let x = t(vec![5.0], &[1, 1, 1, 1]);
        let w = t(vec![1.0; 4], &[1, 1, 2, 2]);
        let b = t(vec![0.0], &[1]);
        let y = conv_transpose2d(&x, &w, &b, 1, 0, 0).unwrap();
        assert_eq!(y.shape(), &[1, 1, 2, 2]);
        assert_eq!(y.to_vec(), vec![5.0; 4]);
    }

    #[test]
    fn shape_mismatch_names_both_shapes() {
        let x = Tensor::<f64>::zeros(&[1, 3, 5, 5]);
        let w = Tensor::<f64>::zeros(&[2, 4, 3, 3]);
        let b = Tensor::<f64>::zeros(&[2]);
        let err = conv2d(&x, &w, &b, 1, 0).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("[1, 3, 5, 5]") && msg.contains("[2, 4, 3, 3]"), "{msg}");
    }

    #[test]
    fn zero_extent_output_is_an_error() {
        let x = Tensor::<f64>::zeros(&[1, 1, 2, 2]);
        let w = Tensor::<f64>::zeros(&[1, 1, 5, 5]);
        let b = Tensor::<f64>::zeros(&[1]);
        assert!(matches!(
            conv2d(&x, &w, &b, 1, 0),
            Err(TensorError::ZeroExtentOutput { .. })
        ));
    }

    #[test]
    fn batched_equals_per_item() {
        // batch path (parallel over items) must match single-item path bitwise
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = Tensor::<f32>::rand_uniform(&[3, 2, 7, 7], -1.0, 1.0, &mut rng);
        let w = Tensor::<f32>::rand_uniform(&[4, 2, 3, 3], -1.0, 1.0, &mut rng);
        let b = Tensor::<f32>::rand_uniform(&[4], -1.0, 1.0, &mut rng);
        let y = conv2d(&x, &w, &b, 2, 1).unwrap();
        let xv = x.to_vec();
        for item in 0..3 {
            let xi = Tensor::new(xv[item * 98..(item + 1) * 98].to_vec(), &[1, 2, 7, 7], false);
            let yi = conv2d(&xi, &w, &b, 2, 1).unwrap();
            let yv = y.to_vec();
            let per = yi.len();
            assert_eq!(&yv[item * per..(item + 1) * per], &yi.to_vec()[..]);
        }
    }

    fn inner_product(a: &Tensor<f64>, b: &Tensor<f64>) -> f64 {
        let av = a.to_vec();
        let bv = b.to_vec();
        av.iter().zip(&bv).map(|(x, y)| x * y).sum()
    }

    #[test]
    fn conv_transpose_is_adjoint_of_conv() {
        // <conv(x, w), y> == <x, conv_transpose(y, w)> for random shapes
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for &(c, o, h, w_in, k, s, p) in &[
            (1usize, 1usize, 5usize, 5usize, 3usize, 1usize, 0usize),
            (2, 3, 8, 6, 3, 1, 1),
            (3, 2, 9, 9, 4, 2, 1),
            (2, 4, 12, 10, 9, 1, 4),
            (1, 2, 7, 7, 2, 2, 0),
        ] {
            let x = Tensor::rand_uniform(&[2, c, h, w_in], -1.0, 1.0, &mut rng);
            let wt = Tensor::rand_uniform(&[o, c, k, k], -1.0, 1.0, &mut rng);
            let b0 = Tensor::zeros(&[o]);
            let y_fwd = conv2d(&x, &wt, &b0, s, p).unwrap();
            let y = Tensor::rand_uniform(y_fwd.shape(), -1.0, 1.0, &mut rng);
            // output_padding recovers the original extent
            let oh = y_fwd.shape()[2];
            let op_h = h - ((oh - 1) * s + k - 2 * p);
            let bz = Tensor::zeros(&[c]);
            let xt = conv_transpose2d(&y, &wt, &bz, s, p, op_h).unwrap();
            assert_eq!(xt.shape(), x.shape());
            let lhs = inner_product(&y_fwd, &y);
            let rhs = inner_product(&x, &xt);
            let rel = (lhs - rhs).abs() / lhs.abs().max(rhs.abs()).max(1e-12);
            assert!(rel < 1e-10, "adjoint mismatch: {lhs} vs {rhs} (rel {rel})");
        }
    }

    #[test]
    fn conv_backward_matches_manual_gradient() {
        // y = sum(conv(x, w)) over a 2x2 all-ones kernel on a 3x3 input:
        // each interior weight gradient is the sum of the window it sees.
        let x = Tensor::new((1..=9).map(|v| v as f64).collect(), &[1, 1, 3, 3], true);
        let w = Tensor::new(vec![1.0; 4], &[1, 1, 2, 2], true);
        let b = Tensor::new(vec![0.0], &[1], true);
        let y = conv2d(&x, &w, &b, 1, 0).unwrap();
        let l = sum(&y);
        l.backward().unwrap();
        // dL/db = number of output pixels = 4
        assert_eq!(b.grad().unwrap(), vec![4.0]);
        // dL/dw[kh][kw] = sum over 2x2 output positions of x at that offset
        assert_eq!(w.grad().unwrap(), vec![
            1.0 + 2.0 + 4.0 + 5.0,
            2.0 + 3.0 + 5.0 + 6.0,
            4.0 + 5.0 + 7.0 + 8.0,
            5.0 + 6.0 + 8.0 + 9.0
        ]);
        // dL/dx = transpose-conv of ones: counts of windows covering each pixel
        assert_eq!(x.grad().unwrap(), vec![
            1.0, 2.0, 1.0, //
            2.0, 4.0, 2.0, //
            1.0, 2.0, 1.0
        ]);
    }
}
