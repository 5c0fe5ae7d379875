//! 3x3 convolution layers with reflect padding: forward pass, exact
//! backward pass, and the ReLU nonlinearity.
//!
//! Images are `(channels, height, width)` arrays. Reflect padding mirrors
//! about the edge pixel (the edge itself is not repeated), so constants are
//! preserved and outputs keep the input's spatial size. The inner loops are
//! unit-stride row operations; parallelism is over output channels with a
//! fixed per-element summation order, so results are schedule-independent.

use ndarray::{Array3, Array4};
use rayon::prelude::*;

use crate::error::{Error, Result};

pub const KERNEL: usize = 3;

/// Reflect an out-of-range index about the edges (mirror, no edge repeat).
fn reflect(idx: isize, len: usize) -> usize {
    let len = len as isize;
    let mut i = idx;
    if i < 0 {
        i = -i;
    }
    if i >= len {
        i = 2 * len - 2 - i;
    }
    i as usize
}

/// Copies one channel into an `(h + 2) x (w + 2)` reflect-padded buffer.
fn pad_channel(src: &[f64], h: usize, w: usize, dst: &mut [f64]) {
    let pw = w + 2;
    for py in 0..h + 2 {
        let sy = reflect(py as isize - 1, h);
        let src_row = &src[sy * w..(sy + 1) * w];
        let dst_row = &mut dst[py * pw..(py + 1) * pw];
        dst_row[1..1 + w].copy_from_slice(src_row);
        dst_row[0] = src[sy * w + reflect(-1, w)];
        dst_row[w + 1] = src[sy * w + reflect(w as isize, w)];
    }
}

fn check_shapes(input: &Array3<f64>, weights: &Array4<f64>, biases: &[f64]) -> Result<()> {
    let (c_in, h, w) = input.dim();
    let (c_out, wc_in, kh, kw) = weights.dim();
    if kh != KERNEL || kw != KERNEL {
        return Err(Error::validation(format!(
            "conv2d: kernel must be {KERNEL}x{KERNEL}, got {kh}x{kw}"
        )));
    }
    if wc_in != c_in {
        return Err(Error::validation(format!(
            "conv2d: weights expect {wc_in} input channels, image has {c_in}"
        )));
    }
    if biases.len() != c_out {
        return Err(Error::validation(format!(
            "conv2d: {} biases for {c_out} output channels",
            biases.len()
        )));
    }
    if h < 2 || w < 2 {
        return Err(Error::validation(format!(
            "conv2d: image {h}x{w} too small for reflect padding"
        )));
    }
    Ok(())
}

/// Reflect-padded cross-correlation plus bias: `(C, H, W) -> (C', H, W)`.
pub fn conv2d_forward(
    input: &Array3<f64>,
    weights: &Array4<f64>,
    biases: &[f64],
) -> Result<Array3<f64>> {
    check_shapes(input, weights, biases)?;
    let (c_in, h, w) = input.dim();
    let c_out = weights.dim().0;
    let pw = w + 2;

    let input_slice = input.as_slice().expect("contiguous input");
    let mut padded = vec![0.0; c_in * (h + 2) * pw];
    for ci in 0..c_in {
        pad_channel(
            &input_slice[ci * h * w..(ci + 1) * h * w],
            h,
            w,
            &mut padded[ci * (h + 2) * pw..(ci + 1) * (h + 2) * pw],
        );
    }
    let weights_slice = weights.as_slice().expect("contiguous weights");

    let mut out = vec![0.0; c_out * h * w];
    out.par_chunks_mut(h * w).enumerate().for_each(|(co, chan)| {
        chan.fill(biases[co]);
        for ci in 0..c_in {
            let pad = &padded[ci * (h + 2) * pw..(ci + 1) * (h + 2) * pw];
            let wbase = (co * c_in + ci) * KERNEL * KERNEL;
            for ky in 0..KERNEL {
                for kx in 0..KERNEL {
                    let wgt = weights_slice[wbase + ky * KERNEL + kx];
                    for y in 0..h {
                        let pad_row = &pad[(y + ky) * pw + kx..(y + ky) * pw + kx + w];
                        let out_row = &mut chan[y * w..(y + 1) * w];
                        for (o, &p) in out_row.iter_mut().zip(pad_row.iter()) {
                            *o += wgt * p;
                        }
                    }
                }
            }
        }
    });
    Ok(Array3::from_shape_vec((c_out, h, w), out).expect("shape"))
}

/// Gradients of [`conv2d_forward`] with respect to weights, biases, and the
/// input, given the upstream gradient.
pub fn conv2d_backward(
    grad_out: &Array3<f64>,
    input: &Array3<f64>,
    weights: &Array4<f64>,
) -> Result<(Array4<f64>, Vec<f64>, Array3<f64>)> {
    let (c_out, gh, gw) = grad_out.dim();
    let (c_in, h, w) = input.dim();
    if (gh, gw) != (h, w) || c_out != weights.dim().0 {
        return Err(Error::validation(format!(
            "conv2d_backward: grad shape ({c_out}, {gh}, {gw}) inconsistent with input ({c_in}, {h}, {w})"
        )));
    }
    check_shapes(input, weights, &vec![0.0; c_out])?;
    let pw = w + 2;

    let input_slice = input.as_slice().expect("contiguous input");
    let grad_slice = grad_out.as_slice().expect("contiguous grad");
    let weights_slice = weights.as_slice().expect("contiguous weights");

    let mut padded = vec![0.0; c_in * (h + 2) * pw];
    for ci in 0..c_in {
        pad_channel(
            &input_slice[ci * h * w..(ci + 1) * h * w],
            h,
            w,
            &mut padded[ci * (h + 2) * pw..(ci + 1) * (h + 2) * pw],
        );
    }

    // Bias gradient: sum of upstream gradient per output channel.
    let grad_bias: Vec<f64> = (0..c_out)
        .map(|co| grad_slice[co * h * w..(co + 1) * h * w].iter().sum())
        .collect();

    // Weight gradients.
    let mut grad_weights = vec![0.0; c_out * c_in * KERNEL * KERNEL];
    grad_weights
        .par_chunks_mut(c_in * KERNEL * KERNEL)
        .enumerate()
        .for_each(|(co, gw_chan)| {
            let gout = &grad_slice[co * h * w..(co + 1) * h * w];
            for ci in 0..c_in {
                let pad = &padded[ci * (h + 2) * pw..(ci + 1) * (h + 2) * pw];
                for ky in 0..KERNEL {
                    for kx in 0..KERNEL {
                        let mut acc = 0.0;
                        for y in 0..h {
                            let pad_row = &pad[(y + ky) * pw + kx..(y + ky) * pw + kx + w];
                            let g_row = &gout[y * w..(y + 1) * w];
                            for (&g, &p) in g_row.iter().zip(pad_row.iter()) {
                                acc += g * p;
                            }
                        }
                        gw_chan[ci * KERNEL * KERNEL + ky * KERNEL + kx] = acc;
                    }
                }
            }
        });

    // Input gradient: scatter into the padded grid, then fold the padding
    // back through the same reflect map.
    let mut grad_input = vec![0.0; c_in * h * w];
    grad_input.par_chunks_mut(h * w).enumerate().for_each(|(ci, gin)| {
        let mut grad_pad = vec![0.0; (h + 2) * pw];
        for co in 0..c_out {
            let gout = &grad_slice[co * h * w..(co + 1) * h * w];
            let wbase = (co * c_in + ci) * KERNEL * KERNEL;
            for ky in 0..KERNEL {
                for kx in 0..KERNEL {
                    let wgt = weights_slice[wbase + ky * KERNEL + kx];
                    for y in 0..h {
                        let pad_row = &mut grad_pad[(y + ky) * pw + kx..(y + ky) * pw + kx + w];
                        let g_row = &gout[y * w..(y + 1) * w];
                        for (p, &g) in pad_row.iter_mut().zip(g_row.iter()) {
                            *p += wgt * g;
                        }
                    }
                }
            }
        }
        for py in 0..h + 2 {
            let sy = reflect(py as isize - 1, h);
            for px in 0..pw {
                let sx = reflect(px as isize - 1, w);
                gin[sy * w + sx] += grad_pad[py * pw + px];
            }
        }
    });

    Ok((
        Array4::from_shape_vec((c_out, c_in, KERNEL, KERNEL), grad_weights).expect("shape"),
        grad_bias,
        Array3::from_shape_vec((c_in, h, w), grad_input).expect("shape"),
    ))
}

pub fn relu_forward(x: &mut Array3<f64>) {
    for v in x.iter_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
}

/// Masks the upstream gradient by the forward activation pattern.
pub fn relu_backward(grad: &mut Array3<f64>, activated: &Array3<f64>) {
    for (g, &a) in grad.iter_mut().zip(activated.iter()) {
        if a <= 0.0 {
            *g = 0.0;
        }
    }
}
