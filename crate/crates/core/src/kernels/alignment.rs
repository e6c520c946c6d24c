use super::sq_dist;
use crate::error::{Error, Result};
use crate::sequence::{check_dims, Sequence};

/// `log` of the local similarity `g / (2 - g)` with `g = exp(-|a-b|^2 / (2 sigma^2))`.
#[inline]
fn log_local(a: &[f64], b: &[f64], sigma: f64) -> f64 {
    let x = sq_dist(a, b) / (2.0 * sigma * sigma);
    -x - (2.0 - (-x).exp()).ln()
}

#[inline]
fn log_sum_exp3(a: f64, b: f64, c: f64) -> f64 {
    let m = a.max(b).max(c);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + ((a - m).exp() + (b - m).exp() + (c - m).exp()).ln()
}

/// Natural log of the global alignment kernel, accumulated in the log domain.
pub fn log_global_alignment_kernel(s: &Sequence, t: &Sequence, sigma: f64) -> Result<f64> {
    check_dims(s, t)?;
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::domain(format!("bandwidth must be positive, got {sigma}")));
    }
    if s.is_empty() || t.is_empty() {
        return Err(Error::domain("global alignment kernel needs nonempty sequences"));
    }
    let m = t.len();
    // prev[j] = log G(i-1, j); G(0,0) = 1 and G(0, j>0) = 0
    let mut prev = vec![f64::NEG_INFINITY; m + 1];
    prev[0] = 0.0;
    let mut cur = vec![f64::NEG_INFINITY; m + 1];
    for a in s.symbols() {
        cur[0] = f64::NEG_INFINITY;
        for (j, b) in t.symbols().enumerate() {
            let acc = log_sum_exp3(prev[j + 1], cur[j], prev[j]);
            cur[j + 1] = log_local(a, b, sigma) + acc;
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    Ok(prev[m])
}

/// Global alignment kernel: sum over all monotone alignments of the product
/// of local similarities along the alignment.
pub fn global_alignment_kernel(s: &Sequence, t: &Sequence, sigma: f64) -> Result<f64> {
    log_global_alignment_kernel(s, t, sigma).map(f64::exp)
}
