//! Deterministic matrix kernels backing the convolution ops.
//!
//! Every output element is reduced in ascending-p order regardless of
//! tiling or thread count, so repeated runs are bit-identical. Each kernel
//! has a parallel and a sequential mode with identical results; callers
//! that already parallelize one level up (over batch items) use the
//! sequential mode.

use rayon::prelude::*;

use crate::Scalar;

/// Micro-tile rows (MR) and columns (NR) held in registers.
const MR: usize = 4;
const NR: usize = 16;

/// C(m x n) = A(m x k) * B(k x n), all row-major.
///
/// Work splits over disjoint 16-column stripes of C; each stripe walks
/// row blocks of A with a register-tiled kernel accumulating over the
/// full k extent in ascending order.
pub fn matmul<S: Scalar>(
    a: &[S],
    b: &[S],
    m: usize,
    k: usize,
    n: usize,
    parallel: bool,
) -> Vec<S> {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    let mut c = vec![S::zero(); m * n];
    if m == 0 || n == 0 || k == 0 {
        return c;
    }
    let n_main = n - n % NR;

    let stripe = |c_all: &mut [S], j0: usize| {
        let mut i0 = 0;
        while i0 + MR <= m {
            kernel_4x16(a, b, c_all, k, n, i0, j0);
            i0 += MR;
        }
        if i0 < m {
            kernel_edge(a, b, c_all, k, n, i0, m - i0, j0, NR);
        }
    };

    if parallel && n_main > NR {
        // Column stripes write disjoint (strided) regions of C; shared
        // access goes through a raw pointer scoped to this call.
        struct Out<S>(*mut S);
        unsafe impl<S> Sync for Out<S> {}
        let out = Out(c.as_mut_ptr());
        let out_ref = &out;
        let len = m * n;
        (0..n_main)
            .into_par_iter()
            .step_by(NR)
            .for_each(move |j0| {
                let c_all = unsafe { std::slice::from_raw_parts_mut(out_ref.0, len) };
                stripe(c_all, j0);
            });
    } else {
        let mut j0 = 0;
        while j0 < n_main {
            stripe(&mut c, j0);
            j0 += NR;
        }
    }

    // Right-edge columns that do not fill a stripe.
    if n_main < n {
        let mut i0 = 0;
        while i0 < m {
            let rows = MR.min(m - i0);
            kernel_edge(a, b, &mut c, k, n, i0, rows, n_main, n - n_main);
            i0 += rows;
        }
    }
    c
}

/// 4x16 register tile: acc[r][l] accumulates over p ascending, exactly the
/// order of the naive i-k-j loop.
#[inline]
fn kernel_4x16<S: Scalar>(a: &[S], b: &[S], c: &mut [S], k: usize, n: usize, i0: usize, j0: usize) {
    let mut acc = [[S::zero(); NR]; MR];
    let a0 = &a[i0 * k..(i0 + 1) * k];
    let a1 = &a[(i0 + 1) * k..(i0 + 2) * k];
    let a2 = &a[(i0 + 2) * k..(i0 + 3) * k];
    let a3 = &a[(i0 + 3) * k..(i0 + 4) * k];
    for p in 0..k {
        // Fixed-size view keeps the inner loop free of bounds checks.
        let brow: &[S; NR] = b[p * n + j0..p * n + j0 + NR].try_into().unwrap();
        let (v0, v1, v2, v3) = (a0[p], a1[p], a2[p], a3[p]);
        for l in 0..NR {
            let bv = brow[l];
            acc[0][l] += v0 * bv;
            acc[1][l] += v1 * bv;
            acc[2][l] += v2 * bv;
            acc[3][l] += v3 * bv;
        }
    }
    for (r, acc_row) in acc.iter().enumerate() {
        let crow = &mut c[(i0 + r) * n + j0..(i0 + r) * n + j0 + NR];
        crow.copy_from_slice(acc_row);
    }
}

/// Remainder tile of up to MR rows and up to NR columns, same p order.
fn kernel_edge<S: Scalar>(
    a: &[S],
    b: &[S],
    c: &mut [S],
    k: usize,
    n: usize,
    i0: usize,
    rows: usize,
    j0: usize,
    cols: usize,
) {
    let mut acc = [[S::zero(); NR]; MR];
    for p in 0..k {
        let brow = &b[p * n + j0..p * n + j0 + cols];
        for (r, acc_row) in acc.iter_mut().enumerate().take(rows) {
            let av = a[(i0 + r) * k + p];
            for l in 0..cols {
                acc_row[l] += av * brow[l];
            }
        }
    }
    for (r, acc_row) in acc.iter().enumerate().take(rows) {
        let crow = &mut c[(i0 + r) * n + j0..(i0 + r) * n + j0 + cols];
        crow.copy_from_slice(&acc_row[..cols]);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
        let mut c = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                for p in 0..k {
                    c[i * n + j] += a[i * k + p] * b[p * n + j];
                }
            }
        }
        c
    }

    #[test]
    fn matmul_matches_naive_including_edges() {
        for &(m, k, n) in &[(5usize, 7usize, 2051usize), (4, 16, 16), (3, 1, 5), (13, 33, 31)] {
            let a: Vec<f64> = (0..m * k).map(|i| (i as f64 * 0.3).sin()).collect();
            let b: Vec<f64> = (0..k * n).map(|i| (i as f64 * 0.7).cos()).collect();
            let r = naive(&a, &b, m, k, n);
            for parallel in [false, true] {
                let c = matmul(&a, &b, m, k, n, parallel);
                for (x, y) in c.iter().zip(&r) {
                    assert!((x - y).abs() < 1e-9, "({m},{k},{n}): {x} vs {y}");
                }
            }
        }
    }

    #[test]
    fn matmul_is_bitwise_equal_to_ascending_p_order() {
        // f32 path must reproduce the naive fixed-order reduction exactly
        let (m, k, n) = (9, 40, 37);
        let a: Vec<f32> = (0..m * k).map(|i| (i as f32 * 0.301).sin()).collect();
        let b: Vec<f32> = (0..k * n).map(|i| (i as f32 * 0.107).cos()).collect();
        let mut r = vec![0.0f32; m * n];
        for i in 0..m {
            for j in 0..n {
                for p in 0..k {
                    r[i * n + j] += a[i * k + p] * b[p * n + j];
                }
            }
        }
        assert_eq!(matmul(&a, &b, m, k, n, true), r);
        assert_eq!(matmul(&a, &b, m, k, n, false), r);
    }


    #[test]
    fn parallel_and_sequential_modes_are_bitwise_identical() {
        for &(m, k, n) in &[(4usize, 33usize, 2500usize), (17, 241, 129), (9, 8, 3)] {
            let a: Vec<f32> = (0..m * k).map(|i| (i as f32 * 0.301).sin()).collect();
            let b: Vec<f32> = (0..k * n).map(|i| (i as f32 * 0.107).cos()).collect();
            assert_eq!(matmul(&a, &b, m, k, n, true), matmul(&a, &b, m, k, n, false));
        }
    }
}
