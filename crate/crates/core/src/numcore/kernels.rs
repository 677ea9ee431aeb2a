//! Low-level dense f64 kernels shared by the plain (inference) and taped
//! (training) execution paths.
//!
//! All matrices are row-major. The accumulate-style matmul (`matmul_acc`) is
//! the workhorse: its inner loops run over contiguous rows so the compiler
//! can vectorize them, which matters because every gradient update in the
//! system funnels through these few functions.

/// c[m,n] += a[m,k] * b[k,n]
///
/// Dispatches to a const-width body for the row widths that actually occur
/// (the compiler then keeps a whole output row in vector registers across
/// the accumulation, which roughly doubles throughput).
pub fn matmul_acc(a: &[f64], b: &[f64], c: &mut [f64], m: usize, k: usize, n: usize) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    match n {
        16 => matmul_acc_const::<16>(a, b, c, m, k),
        32 => matmul_acc_const::<32>(a, b, c, m, k),
        64 => matmul_acc_const::<64>(a, b, c, m, k),
        128 => matmul_acc_const::<128>(a, b, c, m, k),
        256 => matmul_acc_const::<256>(a, b, c, m, k),
        _ => matmul_acc_generic(a, b, c, m, k, n),
    }
}

fn matmul_acc_const<const N: usize>(a: &[f64], b: &[f64], c: &mut [f64], m: usize, k: usize) {
    for i in 0..m {
        let ar = &a[i * k..(i + 1) * k];
        // Accumulate the row in a local so the backend can keep it in
        // registers instead of a load/store round trip per term.
        let mut acc = [0.0f64; N];
        for (p, &av) in ar.iter().enumerate() {
            let br: &[f64; N] = (&b[p * N..(p + 1) * N]).try_into().unwrap();
            for j in 0..N {
                acc[j] += av * br[j];
            }
        }
        let cr: &mut [f64; N] = (&mut c[i * N..(i + 1) * N]).try_into().unwrap();
        for j in 0..N {
            cr[j] += acc[j];
        }
    }
}

fn matmul_acc_generic(a: &[f64], b: &[f64], c: &mut [f64], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let ar = &a[i * k..(i + 1) * k];
        let cr = &mut c[i * n..(i + 1) * n];
        for (p, &av) in ar.iter().enumerate() {
            let br = &b[p * n..(p + 1) * n];
            for (cv, &bv) in cr.iter_mut().zip(br.iter()) {
                *cv += av * bv;
            }
        }
    }
}

/// c[n,k] += a[m,n]^T * b[m,k] (gradient-of-weights shape for `y = x W^T`)
pub fn matmul_tn_acc(a: &[f64], b: &[f64], c: &mut [f64], m: usize, n: usize, k: usize) {
    debug_assert_eq!(a.len(), m * n);
    debug_assert_eq!(b.len(), m * k);
    debug_assert_eq!(c.len(), n * k);
    match k {
        16 => matmul_tn_acc_const::<16>(a, b, c, m, n),
        32 => matmul_tn_acc_const::<32>(a, b, c, m, n),
        64 => matmul_tn_acc_const::<64>(a, b, c, m, n),
        128 => matmul_tn_acc_const::<128>(a, b, c, m, n),
        256 => matmul_tn_acc_const::<256>(a, b, c, m, n),
        _ => matmul_tn_acc_generic(a, b, c, m, n, k),
    }
}

fn matmul_tn_acc_const<const K: usize>(a: &[f64], b: &[f64], c: &mut [f64], m: usize, n: usize) {
    // Output-row-major order with a register-resident accumulator: each row
    // of c is produced in one pass over the batch and written back once.
    for j in 0..n {
        let mut acc = [0.0f64; K];
        for i in 0..m {
            let av = a[i * n + j];
            let br: &[f64; K] = (&b[i * K..(i + 1) * K]).try_into().unwrap();
            for p in 0..K {
                acc[p] += av * br[p];
            }
        }
        let cr: &mut [f64; K] = (&mut c[j * K..(j + 1) * K]).try_into().unwrap();
        for p in 0..K {
            cr[p] += acc[p];
        }
    }
}

fn matmul_tn_acc_generic(a: &[f64], b: &[f64], c: &mut [f64], m: usize, n: usize, k: usize) {
    for i in 0..m {
        let ar = &a[i * n..(i + 1) * n];
        let br = &b[i * k..(i + 1) * k];
        for (j, &av) in ar.iter().enumerate() {
            let cr = &mut c[j * k..(j + 1) * k];
            for (cv, &bv) in cr.iter_mut().zip(br.iter()) {
                *cv += av * bv;
            }
        }
    }
}

/// out[k,n] = transpose of w[n,k]
pub fn transpose(w: &[f64], n: usize, k: usize, out: &mut [f64]) {
    debug_assert_eq!(w.len(), n * k);
    debug_assert_eq!(out.len(), n * k);
    for j in 0..n {
        for p in 0..k {
            out[p * n + j] = w[j * k + p];
        }
    }
}

/// c[j] += sum of column j of a[m,n]
pub fn col_sum_acc(a: &[f64], c: &mut [f64], m: usize, n: usize) {
    debug_assert_eq!(a.len(), m * n);
    debug_assert_eq!(c.len(), n);
    match n {
        16 => col_sum_acc_const::<16>(a, c, m),
        32 => col_sum_acc_const::<32>(a, c, m),
        64 => col_sum_acc_const::<64>(a, c, m),
        128 => col_sum_acc_const::<128>(a, c, m),
        256 => col_sum_acc_const::<256>(a, c, m),
        _ => {
            for i in 0..m {
                let ar = &a[i * n..(i + 1) * n];
                for (cv, &av) in c.iter_mut().zip(ar.iter()) {
                    *cv += av;
                }
            }
        }
    }
}

fn col_sum_acc_const<const N: usize>(a: &[f64], c: &mut [f64], m: usize) {
    let mut acc = [0.0f64; N];
    for i in 0..m {
        let ar: &[f64; N] = (&a[i * N..(i + 1) * N]).try_into().unwrap();
        for j in 0..N {
            acc[j] += ar[j];
        }
    }
    let cr: &mut [f64; N] = (&mut c[0..N]).try_into().unwrap();
    for j in 0..N {
        cr[j] += acc[j];
    }
}

const LOG2E: f64 = std::f64::consts::LOG2_E;
// ln(2) split so that `x - k*LN2_HI` is exact for the k range we use.
const LN2_HI: f64 = 6.931_471_803_691_238e-1;
const LN2_LO: f64 = 1.908_214_929_270_587_7e-10;

/// Degree-9 Taylor for exp on |r| <= ln(2)/2, evaluated by Horner.
#[inline(always)]
fn exp_poly(r: f64) -> f64 {
    1.0 + r * (1.0
        + r * (0.5
            + r * (1.0 / 6.0
                + r * (1.0 / 24.0
                    + r * (1.0 / 120.0
                        + r * (1.0 / 720.0
                            + r * (1.0 / 5040.0
                                + r * (1.0 / 40320.0 + r * (1.0 / 362880.0)))))))))
}

/// Branch-free exp core for arguments already inside the representable
/// range; the magic-number round keeps it vectorizable.
#[inline(always)]
fn exp_core(x: f64) -> f64 {
    const ROUND_MAGIC: f64 = 6_755_399_441_055_744.0; // 1.5 * 2^52
    let kf = (x * LOG2E + ROUND_MAGIC) - ROUND_MAGIC;
    let r = (x - kf * LN2_HI) - kf * LN2_LO;
    let k = kf as i64;
    exp_poly(r) * f64::from_bits(((k + 1023) << 52) as u64)
}

/// exp(x) over the full f64 range. Relative error stays below 1e-11; more
/// than enough for activations while much cheaper than the libm call.
#[inline]
pub fn fast_exp(x: f64) -> f64 {
    if x < -708.0 {
        return 0.0;
    }
    if x > 709.0 {
        return f64::INFINITY;
    }
    exp_core(x)
}

/// tanh(x), saturating exactly to +-1 past |x| = 20. Fully branch-free so
/// slice loops vectorize; a NaN input therefore maps to a (sign-preserving)
/// saturated value rather than propagating - non-finite values are caught at
/// the loss checks instead.
#[inline(always)]
pub fn fast_tanh(x: f64) -> f64 {
    let ax = x.abs().min(20.0);
    let e = exp_core(-2.0 * ax);
    ((1.0 - e) / (1.0 + e)).copysign(x)
}

/// In-place tanh over a slice (the hidden-activation hot path).
pub fn tanh_slice(v: &mut [f64]) {
    for x in v.iter_mut() {
        *x = fast_tanh(*x);
    }
}

/// In-place relu over a slice.
pub fn relu_slice(v: &mut [f64]) {
    for x in v.iter_mut() {
        if *x < 0.0 {
            *x = 0.0;
        }
    }
}

/// ln(1 + exp(x)), overflow-safe.
#[inline]
pub fn softplus(x: f64) -> f64 {
    if x > 36.0 {
        x
    } else if x < -36.0 {
        fast_exp(x)
    } else {
        fast_exp(x).ln_1p()
    }
}

/// Logistic sigmoid (the derivative of `softplus`).
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + fast_exp(-x))
    } else {
        let e = fast_exp(x);
        e / (1.0 + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fast_exp_matches_libm() {
        let mut worst = 0.0f64;
        let mut x = -40.0;
        while x < 40.0 {
            let a = fast_exp(x);
            let b = x.exp();
            let rel = ((a - b) / b).abs();
            worst = worst.max(rel);
            x += 0.00137;
        }
        assert!(worst < 5e-11, "worst rel err {worst:e}");
        assert_eq!(fast_exp(0.0), 1.0);
    }

    #[test]
    fn fast_tanh_matches_libm() {
        let mut worst = 0.0f64;
        let mut x = -25.0;
        while x < 25.0 {
            let a = fast_tanh(x);
            let b = x.tanh();
            let err = (a - b).abs() / b.abs().max(1e-300);
            if b.abs() > 1e-12 {
                worst = worst.max(err);
            } else {
                assert!((a - b).abs() < 1e-13);
            }
            x += 0.000913;
        }
        assert!(worst < 1e-10, "worst rel err {worst:e}");
        assert_eq!(fast_tanh(0.0), 0.0);
        assert_eq!(fast_tanh(1e4), 1.0);
        assert_eq!(fast_tanh(-1e4), -1.0);
        assert_eq!(fast_tanh(f64::INFINITY), 1.0);
        assert_eq!(fast_tanh(f64::NEG_INFINITY), -1.0);
    }

    #[test]
    fn matmul_acc_small_case() {
        // [2x2] * [2x2]
        let a = [1.0, 2.0, 3.0, 4.0];
        let b = [5.0, 6.0, 7.0, 8.0];
        let mut c = [0.0; 4];
        matmul_acc(&a, &b, &mut c, 2, 2, 2);
        assert_eq!(c, [19.0, 22.0, 43.0, 50.0]);
    }

    #[test]
    fn matmul_tn_matches_reference() {
        let m = 3;
        let n = 2;
        let k = 4;
        let a: Vec<f64> = (0..m * n).map(|i| i as f64 * 0.3 - 1.0).collect();
        let b: Vec<f64> = (0..m * k).map(|i| (i as f64).sin()).collect();
        let mut c = vec![0.0; n * k];
        matmul_tn_acc(&a, &b, &mut c, m, n, k);
        for j in 0..n {
            for p in 0..k {
                let mut expect = 0.0;
                for i in 0..m {
                    expect += a[i * n + j] * b[i * k + p];
                }
                assert!((c[j * k + p] - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn transpose_round_trip() {
        let w: Vec<f64> = (0..12).map(|i| i as f64).collect();
        let mut t = vec![0.0; 12];
        let mut back = vec![0.0; 12];
        transpose(&w, 3, 4, &mut t);
        transpose(&t, 4, 3, &mut back);
        assert_eq!(w, back);
    }

    #[test]
    fn softplus_extremes() {
        assert!((softplus(0.0) - 2.0f64.ln()).abs() < 1e-14);
        assert_eq!(softplus(100.0), 100.0);
        assert!(softplus(-100.0) < 1e-40);
        assert!((sigmoid(0.0) - 0.5).abs() < 1e-15);
    }
}
