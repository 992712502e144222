//! Scalar transcendental functions routed through `libm` so results are
//! identical with and without `std`.

#[inline]
pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub fn tanh(x: f64) -> f64 {
    libm::tanh(x)
}

#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub fn powi(x: f64, n: i32) -> f64 {
    libm::pow(x, n as f64)
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + exp(-x))
    } else {
        let e = exp(x);
        e / (1.0 + e)
    }
}

/// Index of the largest element; ties resolve to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// `out[j] += sum_i x[i] * w[i * cols + j]` for a row-major `[x.len(), cols]` matrix.
#[inline]
pub(crate) fn vec_mat_acc(x: &[f64], w: &[f64], cols: usize, out: &mut [f64]) {
    debug_assert_eq!(w.len(), x.len() * cols);
    debug_assert_eq!(out.len(), cols);
    let xs = x.chunks_exact(4);
    let rest = xs.remainder();
    let mut rows = w.chunks_exact(cols);
    for x4 in xs {
        let (r0, r1, r2, r3) = (
            rows.next().unwrap(),
            rows.next().unwrap(),
            rows.next().unwrap(),
            rows.next().unwrap(),
        );
        for ((((o, a), b), c), d) in out.iter_mut().zip(r0).zip(r1).zip(r2).zip(r3) {
            *o += x4[0] * a + x4[1] * b + x4[2] * c + x4[3] * d;
        }
    }
    for (xi, row) in rest.iter().zip(rows) {
        for (o, wij) in out.iter_mut().zip(row) {
            *o += xi * wij;
        }
    }
}

/// `out[i] += sum_j w[i * cols + j] * g[j]`.
#[inline]
pub(crate) fn mat_vec_acc(w: &[f64], g: &[f64], out: &mut [f64]) {
    let cols = g.len();
    debug_assert_eq!(w.len(), out.len() * cols);
    for (o, row) in out.iter_mut().zip(w.chunks_exact(cols)) {
        *o += dot(row, g);
    }
}

/// Dot product with eight independent accumulators so the loop vectorises.
#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 8];
    let (ca, cb) = (a.chunks_exact(8), b.chunks_exact(8));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for ((s, xi), yi) in acc.iter_mut().zip(x).zip(y) {
            *s += xi * yi;
        }
    }
    let half: [f64; 4] = core::array::from_fn(|k| acc[k] + acc[k + 4]);
    (half[0] + half[2]) + (half[1] + half[3]) + tail
}

/// `gw[i * cols + j] += x[i] * g[j]`.
#[inline]
pub(crate) fn outer_acc(x: &[f64], g: &[f64], gw: &mut [f64]) {
    let cols = g.len();
    debug_assert_eq!(gw.len(), x.len() * cols);
    for (xi, row) in x.iter().zip(gw.chunks_exact_mut(cols)) {
        if *xi == 0.0 {
            continue;
        }
        for (r, gj) in row.iter_mut().zip(g) {
            *r += xi * gj;
        }
    }
}
