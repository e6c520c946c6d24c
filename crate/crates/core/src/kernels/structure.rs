//! Kernels on sequence positions and their precomputed matrices.
//!
//! Positions are 1-based throughout this module: `structure_kernel(1, 1, ..)`
//! compares the first symbol of one sequence with the first of another.

use std::ops::{Add, Mul};
use std::sync::atomic::{AtomicU64, Ordering};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

static STRUCTURE_EVALUATIONS: AtomicU64 = AtomicU64::new(0);

/// Number of structure-kernel values computed by this process so far.
///
/// Each entry produced by [`structure_kernel`] or by a lattice cell inside
/// [`StructureMatrix::new`] counts once.
pub fn structure_evaluations() -> u64 {
    STRUCTURE_EVALUATIONS.load(Ordering::Relaxed)
}

fn count_evaluations(n: u64) {
    STRUCTURE_EVALUATIONS.fetch_add(n, Ordering::Relaxed);
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StructureKernel {
    /// `exp(-(i-j)^2 / alpha)`
    Exponential { alpha: f64 },
    /// `(i*j + c)^degree`
    Polynomial { c: f64, degree: u32 },
    /// `(i + j - d)!` on positions `i, j >= d/2`.
    Factorial { d: i64 },
    /// Weighted count of monotone lattice paths from `(1,1)` to `(i,j)`:
    /// horizontal and vertical steps weigh `chv`, diagonal steps `cd`.
    Path { chv: f64, cd: f64 },
}

impl StructureKernel {
    pub fn name(&self) -> &'static str {
        match self {
            StructureKernel::Exponential { .. } => "exponential",
            StructureKernel::Polynomial { .. } => "polynomial",
            StructureKernel::Factorial { .. } => "factorial",
            StructureKernel::Path { .. } => "path",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            StructureKernel::Exponential { alpha } => {
                if !(alpha.is_finite() && alpha > 0.0) {
                    return Err(Error::domain(format!(
                        "exponential alpha must be finite and positive, got {alpha}"
                    )));
                }
            }
            StructureKernel::Polynomial { c, .. } => {
                if !(c.is_finite() && c >= 0.0) {
                    return Err(Error::domain(format!(
                        "polynomial offset must be finite and non-negative, got {c}"
                    )));
                }
            }
            StructureKernel::Factorial { .. } => {}
            StructureKernel::Path { chv, cd } => {
                if !(chv.is_finite() && chv >= 0.0) {
                    return Err(Error::domain(format!("C_hv must be finite and >= 0, got {chv}")));
                }
                if !(cd.is_finite() && cd >= 0.0) {
                    return Err(Error::domain(format!("C_d must be finite and >= 0, got {cd}")));
                }
            }
        }
        Ok(())
    }

    /// Warning text when path weights make values grow geometrically with length.
    pub fn growth_warning(&self) -> Option<String> {
        match *self {
            StructureKernel::Path { chv, cd } if 2.0 * chv + cd > 1.0 => Some(format!(
                "2*C_hv + C_d = {} > 1: path structure values grow geometrically with length",
                2.0 * chv + cd
            )),
            _ => None,
        }
    }

    /// Smallest position accepted by this kernel.
    pub fn min_position(&self) -> usize {
        match *self {
            StructureKernel::Factorial { d } if d > 2 => ((d + 1) / 2) as usize,
            _ => 1,
        }
    }
}

/// `n!` exactly in 64-bit integers for `n <= 20`, otherwise via log-gamma.
pub fn factorial(n: u64) -> f64 {
    if n <= 20 {
        (1..=n).product::<u64>() as f64
    } else {
        statrs::function::gamma::ln_gamma(n as f64 + 1.0).exp()
    }
}

/// Evaluates a structure kernel at a pair of 1-based positions.
pub fn structure_kernel(i: usize, j: usize, kernel: &StructureKernel) -> Result<f64> {
    if i == 0 || j == 0 {
        return Err(Error::domain("structure positions are 1-based"));
    }
    kernel.validate()?;
    match *kernel {
        StructureKernel::Path { chv, cd } => {
            // Lattice restricted to the i x j rectangle; only its corner is kept.
            let w = lattice_weights_rect(i, j, chv, cd);
            count_evaluations((i * j) as u64);
            Ok(w[i * j - 1])
        }
        _ => {
            count_evaluations(1);
            direct_value(i, j, kernel)
        }
    }
}

fn direct_value(i: usize, j: usize, kernel: &StructureKernel) -> Result<f64> {
    Ok(match *kernel {
        StructureKernel::Exponential { alpha } => {
            let d = i as f64 - j as f64;
            (-d * d / alpha).exp()
        }
        StructureKernel::Polynomial { c, degree } => {
            ((i * j) as f64 + c).powi(degree as i32)
        }
        StructureKernel::Factorial { d } => {
            let n = i as i64 + j as i64 - d;
            if 2 * (i as i64) < d || 2 * (j as i64) < d {
                return Err(Error::domain(format!(
                    "factorial kernel with d = {d} requires positions >= {}, got ({i}, {j})",
                    (d + 1) / 2
                )));
            }
            factorial(n as u64)
        }
        StructureKernel::Path { .. } => unreachable!("path values come from the lattice"),
    })
}

/// Weighted lattice-path counts for every cell of a `rows x cols` grid,
/// row-major, cell `(i, j)` (1-based) at index `(i-1)*cols + (j-1)`.
///
/// `w(1,1) = 1`, `w(i,j) = chv*(w(i-1,j) + w(i,j-1)) + cd*w(i-1,j-1)`, zero
/// outside the grid.
pub fn lattice_weights<T>(rows: usize, cols: usize, chv: &T, cd: &T) -> Vec<T>
where
    T: Clone + Zero + One,
    for<'a> &'a T: Add<&'a T, Output = T> + Mul<&'a T, Output = T>,
{
    let mut w: Vec<T> = vec![T::zero(); rows * cols];
    let zero = T::zero();
    for i in 0..rows {
        for j in 0..cols {
            if i == 0 && j == 0 {
                w[0] = T::one();
                continue;
            }
            let up = if i > 0 { &w[(i - 1) * cols + j] } else { &zero };
            let left = if j > 0 { &w[i * cols + j - 1] } else { &zero };
            let diag = if i > 0 && j > 0 {
                &w[(i - 1) * cols + j - 1]
            } else {
                &zero
            };
            let v = &(chv * &(up + left)) + &(cd * diag);
            w[i * cols + j] = v;
        }
    }
    w
}

fn lattice_weights_rect(rows: usize, cols: usize, chv: f64, cd: f64) -> Vec<f64> {
    lattice_weights(rows, cols, &chv, &cd)
}

/// Exact path structure value from the explicit sum over the number of
/// diagonal steps `d`:
///
/// `sum_d chv^(i+j-2-2d) * cd^d * (i+j-2-d)! / ((i-1-d)! (j-1-d)! d!)`
pub fn path_structure_closed_form(
    i: usize,
    j: usize,
    chv: &BigRational,
    cd: &BigRational,
) -> Result<BigRational> {
    if i == 0 || j == 0 {
        return Err(Error::domain("structure positions are 1-based"));
    }
    let fact = |n: usize| -> BigInt { (1..=n).fold(BigInt::one(), |acc, k| acc * BigInt::from(k)) };
    let mut total = BigRational::zero();
    for d in 0..i.min(j) {
        let hv_steps = (i + j - 2 - 2 * d) as i32;
        let multinomial = BigRational::new(
            fact(i + j - 2 - d),
            fact(i - 1 - d) * fact(j - 1 - d) * fact(d),
        );
        total += pow(chv, hv_steps) * pow(cd, d as i32) * multinomial;
    }
    Ok(total)
}

// 0^0 = 1, matching the empty-product convention of the sum.
fn pow(base: &BigRational, exp: i32) -> BigRational {
    (0..exp).fold(BigRational::one(), |acc, _| acc * base)
}

/// Path structure values for all position pairs up to `max_len`.
pub fn path_structure_matrix(max_len: usize, chv: f64, cd: f64) -> Result<StructureMatrix> {
    StructureMatrix::new(StructureKernel::Path { chv, cd }, max_len)
}

/// Structure-kernel values for all position pairs `1..=max_len`, computed once.
#[derive(Debug, Clone, PartialEq)]
pub struct StructureMatrix {
    kernel: StructureKernel,
    max_len: usize,
    values: Vec<f64>,
    grads: Vec<Vec<f64>>,
}

impl StructureMatrix {
    pub fn new(kernel: StructureKernel, max_len: usize) -> Result<Self> {
        Self::build(kernel, max_len, false)
    }

    /// Also tabulates derivatives with respect to the kernel's continuous
    /// parameters (`alpha` for exponential; `chv`, `cd` for path).
    pub fn with_gradients(kernel: StructureKernel, max_len: usize) -> Result<Self> {
        Self::build(kernel, max_len, true)
    }

    fn build(kernel: StructureKernel, max_len: usize, gradients: bool) -> Result<Self> {
        if max_len == 0 {
            return Err(Error::domain("structure matrix needs max_len >= 1"));
        }
        kernel.validate()?;
        if let Some(w) = kernel.growth_warning() {
            log::debug!("{w}");
        }
        let n = max_len;
        let mut grads = Vec::new();
        let values = match kernel {
            StructureKernel::Path { chv, cd } => {
                let w = lattice_weights_rect(n, n, chv, cd);
                count_evaluations((n * n) as u64);
                if gradients {
                    grads = path_gradient_tables(&w, n, chv, cd);
                }
                w
            }
            _ => {
                if kernel.min_position() > 1 {
                    return Err(Error::domain(format!(
                        "{} kernel is undefined at position 1",
                        kernel.name()
                    )));
                }
                let mut v = vec![0.0; n * n];
                for i in 0..n {
                    for j in i..n {
                        let x = direct_value(i + 1, j + 1, &kernel)?;
                        v[i * n + j] = x;
                        v[j * n + i] = x;
                    }
                }
                count_evaluations((n * (n + 1) / 2) as u64);
                if gradients {
                    match kernel {
                        StructureKernel::Exponential { alpha } => {
                            let mut g = vec![0.0; n * n];
                            for i in 0..n {
                                for j in 0..n {
                                    let d = i as f64 - j as f64;
                                    g[i * n + j] = v[i * n + j] * d * d / (alpha * alpha);
                                }
                            }
                            grads.push(g);
                        }
                        _ => {
                            return Err(Error::Unsupported(format!(
                                "{} structure kernel has no gradient",
                                kernel.name()
                            )))
                        }
                    }
                }
                v
            }
        };
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!(
                "structure value at ({}, {}) is not finite",
                pos / n + 1,
                pos % n + 1
            )));
        }
        Ok(Self {
            kernel,
            max_len,
            values,
            grads,
        })
    }

    pub fn kernel(&self) -> &StructureKernel {
        &self.kernel
    }

    pub fn max_len(&self) -> usize {
        self.max_len
    }

    /// Value at 1-based positions.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[(i - 1) * self.max_len + (j - 1)]
    }

    /// Row for 0-based position `i`, indexed by 0-based `j`.
    #[inline]
    pub(crate) fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.max_len..(i + 1) * self.max_len]
    }

    /// Derivative table `p` (in parameter order) row for 0-based position `i`.
    #[inline]
    pub(crate) fn grad_row(&self, p: usize, i: usize) -> &[f64] {
        &self.grads[p][i * self.max_len..(i + 1) * self.max_len]
    }

    pub fn n_grads(&self) -> usize {
        self.grads.len()
    }

    /// Derivative of the value at 1-based positions with respect to parameter `p`.
    pub fn grad(&self, p: usize, i: usize, j: usize) -> f64 {
        self.grads[p][(i - 1) * self.max_len + (j - 1)]
    }

    /// All values, row-major.
    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Differentiates the lattice recurrence with respect to `chv` and `cd`.
fn path_gradient_tables(w: &[f64], n: usize, chv: f64, cd: f64) -> Vec<Vec<f64>> {
    let mut dh = vec![0.0; n * n];
    let mut dd = vec![0.0; n * n];
    let at = |t: &[f64], i: usize, j: usize| -> f64 {
        if i == 0 || j == 0 {
            0.0
        } else {
            t[(i - 1) * n + (j - 1)]
        }
    };
    for i in 1..=n {
        for j in 1..=n {
            if i == 1 && j == 1 {
                continue;
            }
            let h = (at(w, i - 1, j) + at(w, i, j - 1))
                + chv * (at(&dh, i - 1, j) + at(&dh, i, j - 1))
                + cd * at(&dh, i - 1, j - 1);
            let d = chv * (at(&dd, i - 1, j) + at(&dd, i, j - 1))
                + at(w, i - 1, j - 1)
                + cd * at(&dd, i - 1, j - 1);
            dh[(i - 1) * n + (j - 1)] = h;
            dd[(i - 1) * n + (j - 1)] = d;
        }
    }
    vec![dh, dd]
}
