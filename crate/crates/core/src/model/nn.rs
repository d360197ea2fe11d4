//! Dense CPU kernels for the mask network, each paired with its adjoint.
//! Feature maps are `[channel][row][col]`, row-major.

pub const LEAKY_SLOPE: f64 = 0.2;

/// `dst[y][x] += Σ k[ky][kx] · src[y+ky-1][x+kx-1]` with zero padding.
fn correlate3x3_add(src: &[f64], dst: &mut [f64], k: &[f64; 9], h: usize, w: usize) {
    if w < 2 {
        // Degenerate width; plain loop.
        for y in 0..h {
            for x in 0..w {
                let mut acc = 0.0;
                for ky in 0..3 {
                    for kx in 0..3 {
                        let (sy, sx) = (y as isize + ky as isize - 1, x as isize + kx as isize - 1);
                        if sy >= 0 && (sy as usize) < h && sx >= 0 && (sx as usize) < w {
                            acc += k[ky * 3 + kx] * src[sy as usize * w + sx as usize];
                        }
                    }
                }
                dst[y * w + x] += acc;
            }
        }
        return;
    }
    let zero = vec![0.0; w];
    for y in 0..h {
        let rows = [
            if y > 0 { &src[(y - 1) * w..y * w] } else { &zero[..] },
            &src[y * w..(y + 1) * w],
            if y + 1 < h { &src[(y + 1) * w..(y + 2) * w] } else { &zero[..] },
        ];
        let out = &mut dst[y * w..(y + 1) * w];
        for (r, row) in rows.iter().enumerate() {
            let (kl, kc, kr) = (k[r * 3], k[r * 3 + 1], k[r * 3 + 2]);
            if kl == 0.0 && kc == 0.0 && kr == 0.0 {
                continue;
            }
            // interior
            let n = w - 2;
            let (left, centre, right) = (&row[..n], &row[1..n + 1], &row[2..n + 2]);
            let o = &mut out[1..n + 1];
            for i in 0..n {
                o[i] += kl * left[i] + kc * centre[i] + kr * right[i];
            }
            // edges
            out[0] += kc * row[0] + kr * row[1];
            out[w - 1] += kl * row[w - 2] + kc * row[w - 1];
        }
    }
}

/// Σ_p a[p] · b[p + (dy, dx)] over valid positions.
fn shifted_dot(a: &[f64], b: &[f64], h: usize, w: usize, dy: isize, dx: isize) -> f64 {
    let y0 = (-dy).max(0) as usize;
    let y1 = (h as isize - dy.max(0)) as usize;
    let x0 = (-dx).max(0) as usize;
    let x1 = (w as isize - dx.max(0)) as usize;
    if x1 <= x0 {
        return 0.0;
    }
    let mut acc = 0.0;
    for y in y0..y1 {
        let ra = &a[y * w + x0..y * w + x1];
        let sy = (y as isize + dy) as usize;
        let sx0 = (x0 as isize + dx) as usize;
        let rb = &b[sy * w + sx0..sy * w + sx0 + (x1 - x0)];
        acc += ra.iter().zip(rb).map(|(p, q)| p * q).sum::<f64>();
    }
    acc
}

/// Same-padded 3×3 convolution (cross-correlation).
/// `weight` is `[cout][cin][3][3]`.
pub fn conv3x3(input: &[f64], cin: usize, h: usize, w: usize, weight: &[f64], bias: &[f64], out: &mut [f64]) {
    let cout = bias.len();
    let hw = h * w;
    for co in 0..cout {
        let o = &mut out[co * hw..(co + 1) * hw];
        o.iter_mut().for_each(|v| *v = bias[co]);
        for ci in 0..cin {
            let k: &[f64; 9] = weight[(co * cin + ci) * 9..(co * cin + ci + 1) * 9]
                .try_into()
                .expect("3x3 kernel");
            correlate3x3_add(&input[ci * hw..(ci + 1) * hw], o, k, h, w);
        }
    }
}

/// Adjoint of [`conv3x3`]: accumulates weight/bias gradients and, when
/// `dinput` is given, the input gradient.
#[allow(clippy::too_many_arguments)]
pub fn conv3x3_backward(
    input: &[f64],
    cin: usize,
    h: usize,
    w: usize,
    weight: &[f64],
    dout: &[f64],
    cout: usize,
    dweight: &mut [f64],
    dbias: &mut [f64],
    dinput: Option<&mut [f64]>,
) {
    let hw = h * w;
    for co in 0..cout {
        let g = &dout[co * hw..(co + 1) * hw];
        dbias[co] += g.iter().sum::<f64>();
        for ci in 0..cin {
            let x = &input[ci * hw..(ci + 1) * hw];
            for ky in 0..3 {
                for kx in 0..3 {
                    dweight[(co * cin + ci) * 9 + ky * 3 + kx] +=
                        shifted_dot(g, x, h, w, ky as isize - 1, kx as isize - 1);
                }
            }
        }
    }
    if let Some(dinput) = dinput {
        for ci in 0..cin {
            let d = &mut dinput[ci * hw..(ci + 1) * hw];
            for co in 0..cout {
                let k = &weight[(co * cin + ci) * 9..(co * cin + ci + 1) * 9];
                let mut flipped = [0.0; 9];
                for (i, v) in flipped.iter_mut().enumerate() {
                    *v = k[8 - i];
                }
                correlate3x3_add(&dout[co * hw..(co + 1) * hw], d, &flipped, h, w);
            }
        }
    }
}

/// Pointwise convolution, `weight` is `[cout][cin]`.
pub fn conv1x1(input: &[f64], cin: usize, hw: usize, weight: &[f64], bias: &[f64], out: &mut [f64]) {
    let cout = bias.len();
    for co in 0..cout {
        let o = &mut out[co * hw..(co + 1) * hw];
        o.iter_mut().for_each(|v| *v = bias[co]);
        for ci in 0..cin {
            let wv = weight[co * cin + ci];
            if wv == 0.0 {
                continue;
            }
            for (a, b) in o.iter_mut().zip(&input[ci * hw..(ci + 1) * hw]) {
                *a += wv * b;
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
pub fn conv1x1_backward(
    input: &[f64],
    cin: usize,
    hw: usize,
    weight: &[f64],
    dout: &[f64],
    cout: usize,
    dweight: &mut [f64],
    dbias: &mut [f64],
    dinput: &mut [f64],
) {
    for co in 0..cout {
        let g = &dout[co * hw..(co + 1) * hw];
        dbias[co] += g.iter().sum::<f64>();
        for ci in 0..cin {
            let x = &input[ci * hw..(ci + 1) * hw];
            dweight[co * cin + ci] += g.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
            let wv = weight[co * cin + ci];
            if wv != 0.0 {
                for (d, a) in dinput[ci * hw..(ci + 1) * hw].iter_mut().zip(g) {
                    *d += wv * a;
                }
            }
        }
    }
}

pub fn leaky_relu_in_place(x: &mut [f64]) {
    for v in x {
        if *v < 0.0 {
            *v *= LEAKY_SLOPE;
        }
    }
}

/// Backward through leaky ReLU using its output (sign is preserved).
pub fn leaky_relu_backward_in_place(out: &[f64], grad: &mut [f64]) {
    for (g, o) in grad.iter_mut().zip(out) {
        if *o < 0.0 {
            *g *= LEAKY_SLOPE;
        }
    }
}

/// 2×2 stride-2 average pooling.
pub fn avg_pool2(input: &[f64], c: usize, h: usize, w: usize) -> Vec<f64> {
    let (h2, w2) = (h / 2, w / 2);
    let mut out = vec![0.0; c * h2 * w2];
    for ch in 0..c {
        let src = &input[ch * h * w..(ch + 1) * h * w];
        let dst = &mut out[ch * h2 * w2..(ch + 1) * h2 * w2];
        for y in 0..h2 {
            for x in 0..w2 {
                let a = src[2 * y * w + 2 * x] + src[2 * y * w + 2 * x + 1];
                let b = src[(2 * y + 1) * w + 2 * x] + src[(2 * y + 1) * w + 2 * x + 1];
                dst[y * w2 + x] = 0.25 * (a + b);
            }
        }
    }
    out
}

/// Adjoint of [`avg_pool2`]; `dout` is at half resolution.
pub fn avg_pool2_backward(dout: &[f64], c: usize, h: usize, w: usize) -> Vec<f64> {
    let (h2, w2) = (h / 2, w / 2);
    let mut din = vec![0.0; c * h * w];
    for ch in 0..c {
        let g = &dout[ch * h2 * w2..(ch + 1) * h2 * w2];
        let d = &mut din[ch * h * w..(ch + 1) * h * w];
        for y in 0..h {
            for x in 0..w {
                d[y * w + x] = 0.25 * g[(y / 2) * w2 + x / 2];
            }
        }
    }
    din
}

/// Nearest-neighbour 2× upsampling; `h`, `w` are the input dimensions.
pub fn upsample2(input: &[f64], c: usize, h: usize, w: usize) -> Vec<f64> {
    let (h2, w2) = (h * 2, w * 2);
    let mut out = vec![0.0; c * h2 * w2];
    for ch in 0..c {
        let src = &input[ch * h * w..(ch + 1) * h * w];
        let dst = &mut out[ch * h2 * w2..(ch + 1) * h2 * w2];
        for y in 0..h2 {
            for x in 0..w2 {
                dst[y * w2 + x] = src[(y / 2) * w + x / 2];
            }
        }
    }
    out
}

/// Adjoint of [`upsample2`]; `h`, `w` are the low-resolution dimensions.
pub fn upsample2_backward(dout: &[f64], c: usize, h: usize, w: usize) -> Vec<f64> {
    let (h2, w2) = (h * 2, w * 2);
    let mut din = vec![0.0; c * h * w];
    for ch in 0..c {
        let g = &dout[ch * h2 * w2..(ch + 1) * h2 * w2];
        let d = &mut din[ch * h * w..(ch + 1) * h * w];
        for y in 0..h2 {
            for x in 0..w2 {
                d[(y / 2) * w + x / 2] += g[y * w2 + x];
            }
        }
    }
    din
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_conv3x3(input: &[f64], cin: usize, h: usize, w: usize, weight: &[f64], bias: &[f64]) -> Vec<f64> {
        let cout = bias.len();
        let mut out = vec![0.0; cout * h * w];
        for co in 0..cout {
            for y in 0..h as isize {
                for x in 0..w as isize {
                    let mut acc = bias[co];
                    for ci in 0..cin {
                        for ky in 0..3isize {
                            for kx in 0..3isize {
                                let (sy, sx) = (y + ky - 1, x + kx - 1);
                                if sy < 0 || sx < 0 || sy >= h as isize || sx >= w as isize {
                                    continue;
                                }
                                acc += weight[((co * cin + ci) * 3 + ky as usize) * 3 + kx as usize]
                                    * input[(ci * h + sy as usize) * w + sx as usize];
                            }
                        }
                    }
                    out[(co * h + y as usize) * w + x as usize] = acc;
                }
            }
        }
        out
    }

    fn pseudo(n: usize, s: f64) -> Vec<f64> {
        (0..n).map(|i| ((i as f64 + 1.0) * s).sin()).collect()
    }

    #[test]
    fn conv3x3_matches_dense_reference() {
        let (cin, cout, h, w) = (3, 2, 5, 7);
        let input = pseudo(cin * h * w, 0.37);
        let weight = pseudo(cout * cin * 9, 0.91);
        let bias = vec![0.1, -0.2];
        let mut out = vec![0.0; cout * h * w];
        conv3x3(&input, cin, h, w, &weight, &bias, &mut out);
        let reference = dense_conv3x3(&input, cin, h, w, &weight, &bias);
        for (a, b) in out.iter().zip(&reference) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn conv3x3_adjoint_identity() {
        let (cin, cout, h, w) = (2, 3, 4, 6);
        let input = pseudo(cin * h * w, 0.21);
        let weight = pseudo(cout * cin * 9, 0.53);
        let bias = vec![0.0; cout];
        let d = pseudo(cout * h * w, 0.77);
        let mut out = vec![0.0; cout * h * w];
        conv3x3(&input, cin, h, w, &weight, &bias, &mut out);
        let mut dw = vec![0.0; weight.len()];
        let mut db = vec![0.0; cout];
        let mut di = vec![0.0; input.len()];
        conv3x3_backward(&input, cin, h, w, &weight, &d, cout, &mut dw, &mut db, Some(&mut di));
        let lhs: f64 = out.iter().zip(&d).map(|(a, b)| a * b).sum();
        // linear in input (bias 0) and in weights
        let via_input: f64 = di.iter().zip(&input).map(|(a, b)| a * b).sum();
        let via_weight: f64 = dw.iter().zip(&weight).map(|(a, b)| a * b).sum();
        assert!((lhs - via_input).abs() < 1e-10);
        assert!((lhs - via_weight).abs() < 1e-10);
        assert!((db.iter().sum::<f64>() - d.iter().sum::<f64>()).abs() < 1e-12);
    }

    #[test]
    fn pool_and_upsample_are_adjoint_shaped() {
        let (c, h, w) = (2, 4, 6);
        let x = pseudo(c * h * w, 0.3);
        let p = avg_pool2(&x, c, h, w);
        assert_eq!(p.len(), c * 2 * 3);
        let g = pseudo(p.len(), 0.8);
        let gb = avg_pool2_backward(&g, c, h, w);
        let lhs: f64 = p.iter().zip(&g).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.iter().zip(&gb).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-12);

        let u = upsample2(&p, c, 2, 3);
        let gu = pseudo(u.len(), 0.6);
        let gp = upsample2_backward(&gu, c, 2, 3);
        let lhs: f64 = u.iter().zip(&gu).map(|(a, b)| a * b).sum();
        let rhs: f64 = p.iter().zip(&gp).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn sigmoid_is_stable() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(-800.0) >= 0.0 && sigmoid(800.0) <= 1.0);
    }
}
