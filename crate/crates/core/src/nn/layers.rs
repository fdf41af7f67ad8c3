//! Layer primitives: 3x3 same-padding convolution, 2x2 max pooling, inverted
//! dropout, dense layers, and ReLU, each with a hand-written backward pass.
//! Batch dimensions are processed in parallel; all reductions run in a fixed
//! order so results do not depend on thread count.

use rayon::prelude::*;

use super::tensor::Tensor;
use crate::rng::{hash2, unit_f64, Rng};

/// He-uniform initialization for ReLU stacks: U(-sqrt(6/fan_in), +sqrt(6/fan_in)).
pub fn he_uniform(fan_in: usize, len: usize, rng: &mut Rng) -> Vec<f64> {
    let limit = (6.0 / fan_in as f64).sqrt();
    (0..len).map(|_| rng.next_range(-limit, limit)).collect()
}

/// 3x3 convolution, stride 1, zero padding preserving spatial dims.
/// `x`: (B, Ci, H, W), `w`: (Co, Ci, 3, 3), `b`: (Co) -> (B, Co, H, W).
pub fn conv2d_forward(x: &Tensor, w: &Tensor, b: &Tensor) -> Tensor {
    let [bs, ci, h, wd] = dims4(x);
    let co = w.shape()[0];
    debug_assert_eq!(w.shape(), &[co, ci, 3, 3]);
    let mut out = Tensor::zeros(vec![bs, co, h, wd]);
    let in_plane = ci * h * wd;
    let out_plane = co * h * wd;
    let wdat = w.data();
    let bdat = b.data();
    out.data_mut()
        .par_chunks_mut(out_plane)
        .zip(x.data().par_chunks(in_plane))
        .for_each(|(out_b, x_b)| {
            for oc in 0..co {
                let w_oc = &wdat[oc * ci * 9..(oc + 1) * ci * 9];
                let out_c = &mut out_b[oc * h * wd..(oc + 1) * h * wd];
                out_c.fill(bdat[oc]);
                for icx in 0..ci {
                    let x_c = &x_b[icx * h * wd..(icx + 1) * h * wd];
                    let w_k = &w_oc[icx * 9..icx * 9 + 9];
                    for ky in 0..3usize {
                        for kx in 0..3usize {
                            let wk = w_k[ky * 3 + kx];
                            if wk == 0.0 {
                                continue;
                            }
                            // output (y, x) reads input (y + ky - 1, x + kx - 1)
                            let y0 = 1usize.saturating_sub(ky);
                            let y1 = if ky <= 1 { h } else { h - 1 };
                            for y in y0..y1 {
                                let iy = y + ky - 1;
                                let x0 = 1usize.saturating_sub(kx);
                                let x1 = if kx <= 1 { wd } else { wd - 1 };
                                let src = &x_c[iy * wd..iy * wd + wd];
                                let dst = &mut out_c[y * wd..y * wd + wd];
                                for xx in x0..x1 {
                                    dst[xx] += wk * src[xx + kx - 1];
                                }
                            }
                        }
                    }
                }
            }
        });
    out
}

/// Gradients of the 3x3 convolution: returns (grad_x, grad_w, grad_b).
pub fn conv2d_backward(x: &Tensor, w: &Tensor, gout: &Tensor) -> (Tensor, Tensor, Tensor) {
    let [bs, ci, h, wd] = dims4(x);
    let co = w.shape()[0];
    let mut gx = Tensor::zeros(vec![bs, ci, h, wd]);
    let mut gw = Tensor::zeros(w.shape().to_vec());
    let mut gb = Tensor::zeros(vec![co]);
    let in_plane = ci * h * wd;
    let out_plane = co * h * wd;
    let wdat = w.data();

    // grad wrt input: parallel over batch
    gx.data_mut()
        .par_chunks_mut(in_plane)
        .zip(gout.data().par_chunks(out_plane))
        .for_each(|(gx_b, g_b)| {
            for oc in 0..co {
                let g_c = &g_b[oc * h * wd..(oc + 1) * h * wd];
                let w_oc = &wdat[oc * ci * 9..(oc + 1) * ci * 9];
                for icx in 0..ci {
                    let gx_c = &mut gx_b[icx * h * wd..(icx + 1) * h * wd];
                    let w_k = &w_oc[icx * 9..icx * 9 + 9];
                    for ky in 0..3usize {
                        for kx in 0..3usize {
                            let wk = w_k[ky * 3 + kx];
                            if wk == 0.0 {
                                continue;
                            }
                            let y0 = 1usize.saturating_sub(ky);
                            let y1 = if ky <= 1 { h } else { h - 1 };
                            for y in y0..y1 {
                                let iy = y + ky - 1;
                                let x0 = 1usize.saturating_sub(kx);
                                let x1 = if kx <= 1 { wd } else { wd - 1 };
                                let src = &g_c[y * wd..y * wd + wd];
                                let dst = &mut gx_c[iy * wd..iy * wd + wd];
                                for xx in x0..x1 {
                                    dst[xx + kx - 1] += wk * src[xx];
                                }
                            }
                        }
                    }
                }
            }
        });

    // grad wrt weights and bias: parallel over output channel
    let xdat = x.data();
    let gdat = gout.data();
    gw.data_mut()
        .par_chunks_mut(ci * 9)
        .zip(gb.data_mut().par_iter_mut())
        .enumerate()
        .for_each(|(oc, (gw_oc, gb_oc))| {
            for bi in 0..bs {
                let g_c = &gdat[bi * out_plane + oc * h * wd..bi * out_plane + (oc + 1) * h * wd];
                let x_b = &xdat[bi * in_plane..(bi + 1) * in_plane];
                for icx in 0..ci {
                    let x_c = &x_b[icx * h * wd..(icx + 1) * h * wd];
                    for ky in 0..3usize {
                        for kx in 0..3usize {
                            let mut acc = 0.0;
                            let y0 = 1usize.saturating_sub(ky);
                            let y1 = if ky <= 1 { h } else { h - 1 };
                            for y in y0..y1 {
                                let iy = y + ky - 1;
                                let x0 = 1usize.saturating_sub(kx);
                                let x1 = if kx <= 1 { wd } else { wd - 1 };
                                let g_row = &g_c[y * wd..y * wd + wd];
                                let x_row = &x_c[iy * wd..iy * wd + wd];
                                for xx in x0..x1 {
                                    acc += g_row[xx] * x_row[xx + kx - 1];
                                }
                            }
                            gw_oc[icx * 9 + ky * 3 + kx] += acc;
                        }
                    }
                }
                *gb_oc += g_c.iter().sum::<f64>();
            }
        });

    (gx, gw, gb)
}

/// 2x2 max pooling with stride 2. Ties keep the first element in row-major
/// window order. Returns the pooled tensor and the flat input index of each
/// selected element.
pub fn maxpool2_forward(x: &Tensor) -> (Tensor, Vec<u32>) {
    let [bs, c, h, w] = dims4(x);
    let oh = h / 2;
    let ow = w / 2;
    let mut out = Tensor::zeros(vec![bs, c, oh, ow]);
    let mut args = vec![0u32; bs * c * oh * ow];
    let xdat = x.data();
    for bi in 0..bs {
        for ch in 0..c {
            let base = (bi * c + ch) * h * w;
            let obase = (bi * c + ch) * oh * ow;
            for py in 0..oh {
                for px in 0..ow {
                    let mut best_idx = base + (2 * py) * w + 2 * px;
                    let mut best = xdat[best_idx];
                    for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                        let idx = base + (2 * py + dy) * w + 2 * px + dx;
                        if xdat[idx] > best {
                            best = xdat[idx];
                            best_idx = idx;
                        }
                    }
                    out.data_mut()[obase + py * ow + px] = best;
                    args[obase + py * ow + px] = best_idx as u32;
                }
            }
        }
    }
    (out, args)
}

/// Routes pooled gradients back to the selected inputs.
pub fn maxpool2_backward(args: &[u32], input_shape: &[usize], gout: &Tensor) -> Tensor {
    let mut gx = Tensor::zeros(input_shape.to_vec());
    let gxd = gx.data_mut();
    for (g, &arg) in gout.data().iter().zip(args) {
        gxd[arg as usize] += g;
    }
    gx
}

/// Inverted dropout: kept activations are scaled by 1/(1-rate) so evaluation
/// needs no correction. The keep mask is a pure function of (seed, index).
pub fn dropout_forward(x: &Tensor, rate: f64, seed: u64) -> (Tensor, Vec<bool>) {
    debug_assert!((0.0..1.0).contains(&rate));
    let scale = 1.0 / (1.0 - rate);
    let keep: Vec<bool> = (0..x.numel())
        .map(|i| unit_f64(hash2(seed, i as u64)) >= rate)
        .collect();
    let mut y = x.clone();
    for (v, &k) in y.data_mut().iter_mut().zip(&keep) {
        *v = if k { *v * scale } else { 0.0 };
    }
    (y, keep)
}

pub fn dropout_backward(keep: &[bool], rate: f64, gout: &Tensor) -> Tensor {
    let scale = 1.0 / (1.0 - rate);
    let mut gx = gout.clone();
    for (g, &k) in gx.data_mut().iter_mut().zip(keep) {
        *g = if k { *g * scale } else { 0.0 };
    }
    gx
}

pub fn relu_forward(x: &Tensor) -> Tensor {
    let mut y = x.clone();
    for v in y.data_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    y
}

/// ReLU backward from the *activated* output: passes gradient where y > 0.
pub fn relu_backward(y: &Tensor, gout: &Tensor) -> Tensor {
    let mut gx = gout.clone();
    for (g, &act) in gx.data_mut().iter_mut().zip(y.data()) {
        if act <= 0.0 {
            *g = 0.0;
        }
    }
    gx
}

/// Dense layer. `x`: (B, I), `w`: (O, I), `b`: (O) -> (B, O).
pub fn dense_forward(x: &Tensor, w: &Tensor, b: &Tensor) -> Tensor {
    let (bs, i) = dims2(x);
    let o = w.shape()[0];
    debug_assert_eq!(w.shape(), &[o, i]);
    let mut out = Tensor::zeros(vec![bs, o]);
    let wdat = w.data();
    let bdat = b.data();
    out.data_mut()
        .par_chunks_mut(o)
        .zip(x.data().par_chunks(i))
        .for_each(|(out_row, x_row)| {
            for oi in 0..o {
                let w_row = &wdat[oi * i..(oi + 1) * i];
                let mut acc = bdat[oi];
                for (wv, xv) in w_row.iter().zip(x_row) {
                    acc += wv * xv;
                }
                out_row[oi] = acc;
            }
        });
    out
}

/// Gradients of the dense layer: returns (grad_x, grad_w, grad_b).
pub fn dense_backward(x: &Tensor, w: &Tensor, gout: &Tensor) -> (Tensor, Tensor, Tensor) {
    let (bs, i) = dims2(x);
    let o = w.shape()[0];
    let mut gx = Tensor::zeros(vec![bs, i]);
    let mut gw = Tensor::zeros(vec![o, i]);
    let mut gb = Tensor::zeros(vec![o]);
    let wdat = w.data();
    let xdat = x.data();
    let gdat = gout.data();

    gx.data_mut()
        .par_chunks_mut(i)
        .zip(gdat.par_chunks(o))
        .for_each(|(gx_row, g_row)| {
            for oi in 0..o {
                let g = g_row[oi];
                if g == 0.0 {
                    continue;
                }
                let w_row = &wdat[oi * i..(oi + 1) * i];
                for (gxv, wv) in gx_row.iter_mut().zip(w_row) {
                    *gxv += g * wv;
                }
            }
        });

    gw.data_mut()
        .par_chunks_mut(i)
        .zip(gb.data_mut().par_iter_mut())
        .enumerate()
        .for_each(|(oi, (gw_row, gb_o))| {
            for bi in 0..bs {
                let g = gdat[bi * o + oi];
                if g == 0.0 {
                    continue;
                }
                let x_row = &xdat[bi * i..(bi + 1) * i];
                for (gwv, xv) in gw_row.iter_mut().zip(x_row) {
                    *gwv += g * xv;
                }
                *gb_o += g;
            }
        });

    (gx, gw, gb)
}

fn dims4(t: &Tensor) -> [usize; 4] {
    match t.shape() {
        [a, b, c, d] => [*a, *b, *c, *d],
        s => panic!("expected rank-4 tensor, got {:?}", s),
    }
}

fn dims2(t: &Tensor) -> (usize, usize) {
    match t.shape() {
        [a, b] => (*a, *b),
        s => panic!("expected rank-2 tensor, got {:?}", s),
    }
}
