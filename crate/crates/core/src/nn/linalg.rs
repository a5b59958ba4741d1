//! Small dense kernels shared by the layers. Row-major weight matrices.

/// out = W x, W is rows x cols.
pub(crate) fn matvec(w: &[f64], rows: usize, cols: usize, x: &[f64], out: &mut [f64]) {
    debug_assert_eq!(w.len(), rows * cols);
    debug_assert_eq!(x.len(), cols);
    debug_assert_eq!(out.len(), rows);
    for (r, o) in out.iter_mut().enumerate() {
        let row = &w[r * cols..(r + 1) * cols];
        // Four accumulators let the reduction vectorize.
        let mut acc = [0.0f64; 4];
        let chunks = cols / 4;
        for c in 0..chunks {
            let i = c * 4;
            acc[0] += row[i] * x[i];
            acc[1] += row[i + 1] * x[i + 1];
            acc[2] += row[i + 2] * x[i + 2];
            acc[3] += row[i + 3] * x[i + 3];
        }
        let mut tail = 0.0;
        for i in chunks * 4..cols {
            tail += row[i] * x[i];
        }
        *o = acc[0] + acc[1] + acc[2] + acc[3] + tail;
    }
}

/// dx += W^T dy.
pub(crate) fn matvec_t_add(w: &[f64], rows: usize, cols: usize, dy: &[f64], dx: &mut [f64]) {
    debug_assert_eq!(dy.len(), rows);
    debug_assert_eq!(dx.len(), cols);
    for (r, &g) in dy.iter().enumerate() {
        if g == 0.0 {
            continue;
        }
        let row = &w[r * cols..(r + 1) * cols];
        for (d, v) in dx.iter_mut().zip(row) {
            *d += g * v;
        }
    }
}

/// dW += dy x^T.
pub(crate) fn outer_add(dw: &mut [f64], dy: &[f64], x: &[f64]) {
    let cols = x.len();
    for (r, &g) in dy.iter().enumerate() {
        if g == 0.0 {
            continue;
        }
        let row = &mut dw[r * cols..(r + 1) * cols];
        for (d, v) in row.iter_mut().zip(x) {
            *d += g * v;
        }
    }
}


#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matvec_matches_naive() {
        let w = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0];
        let x = [1.0, -1.0, 0.5, 2.0, -0.25];
        let mut out = [0.0; 2];
        matvec(&w, 2, 5, &x, &mut out);
        for r in 0..2 {
            let naive: f64 = (0..5).map(|c| w[r * 5 + c] * x[c]).sum();
            assert!((out[r] - naive).abs() < 1e-12);
        }
    }

    #[test]
    fn transpose_and_outer_accumulate() {
        let w = [1.0, 2.0, 3.0, 4.0];
        let dy = [0.5, -1.0];
        let mut dx = [0.0; 2];
        matvec_t_add(&w, 2, 2, &dy, &mut dx);
        assert_eq!(dx, [0.5 * 1.0 - 1.0 * 3.0, 0.5 * 2.0 - 1.0 * 4.0]);

        let mut dw = [0.0; 4];
        let x = [2.0, -1.0];
        outer_add(&mut dw, &dy, &x);
        assert_eq!(dw, [1.0, -0.5, -2.0, 1.0]);
    }
}
