//! Oracles and generators shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, SymmetricEigen};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::{Rng, RngExt};
use rand_distr::{Distribution, StandardNormal};
use seqkernels::Sequence;

pub fn random_sequence<R: Rng>(rng: &mut R, id: &str, len: usize, dim: usize) -> Sequence {
    let v: Vec<f64> = (0..len * dim).map(|_| StandardNormal.sample(rng)).collect();
    Sequence::new(id, dim, v).unwrap()
}

/// Sequence with a length drawn uniformly from `lens`.
pub fn random_sequence_in<R: Rng>(rng: &mut R, id: &str, lens: std::ops::RangeInclusive<usize>, dim: usize) -> Sequence {
    let len = rng.random_range(lens);
    random_sequence(rng, id, len, dim)
}

pub fn random_dataset<R: Rng>(rng: &mut R, n: usize, max_len: usize, dim: usize) -> Vec<Sequence> {
    (0..n)
        .map(|i| {
            let len = rng.random_range(1..=max_len);
            random_sequence(rng, &format!("s{i}"), len, dim)
        })
        .collect()
}

/// Delannoy number by the binomial sum `sum_k C(m,k) C(n,k) 2^k`.
pub fn delannoy(m: u64, n: u64) -> u128 {
    fn binom(n: u64, k: u64) -> u128 {
        (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
    }
    (0..=m.min(n)).map(|k| binom(m, k) * binom(n, k) * (1u128 << k)).sum()
}

/// Path structure value as an exact rational, by enumerating the number of
/// horizontal, vertical and diagonal steps.
pub fn path_count_rational(i: usize, j: usize, chv: &BigRational, cd: &BigRational) -> BigRational {
    let fact = |n: usize| (1..=n).fold(BigInt::one(), |a, k| a * BigInt::from(k));
    let pow = |b: &BigRational, e: usize| (0..e).fold(BigRational::one(), |a, _| a * b);
    let (a, b) = (i - 1, j - 1);
    let mut total = BigRational::zero();
    for d in 0..=a.min(b) {
        let (h, v) = (a - d, b - d);
        let ways = BigRational::new(fact(h + v + d), fact(h) * fact(v) * fact(d));
        total += ways * pow(chv, h + v) * pow(cd, d);
    }
    total
}

/// `|a - b| / max(|a|, |b|, floor)`.
pub fn rel_err(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

pub fn extreme_eigs(m: &DMatrix<f64>) -> (f64, f64) {
    let sym = (m + m.transpose()) * 0.5;
    let e = SymmetricEigen::new(sym).eigenvalues;
    (e.min(), e.max())
}

/// Gaussian-rbf Gram on points in the plane, computed directly.
pub fn rbf_gram(points: &[[f64; 2]], sigma: f64) -> DMatrix<f64> {
    let n = points.len();
    DMatrix::from_fn(n, n, |i, j| {
        let d2 = (points[i][0] - points[j][0]).powi(2) + (points[i][1] - points[j][1]).powi(2);
        (-d2 / (2.0 * sigma * sigma)).exp()
    })
}

/// Binary SVM dual `max sum(a) - a'Qa/2`, `0 <= a <= c`, `y'a = 0`, with
/// `Q = diag(y) K diag(y)`, solved by accelerated projected gradient with
/// adaptive restart. Returns the maximizer and the objective.
pub fn svm_dual_oracle(k: &DMatrix<f64>, y: &[f64], c: f64) -> (Vec<f64>, f64) {
    let n = y.len();
    let q = DMatrix::from_fn(n, n, |i, j| y[i] * y[j] * k[(i, j)]);
    let (_, lmax) = extreme_eigs(&q);
    let step = 1.0 / lmax;
    let objective = |a: &[f64]| {
        let qa = &q * nalgebra::DVector::from_column_slice(a);
        a.iter().sum::<f64>() - 0.5 * a.iter().zip(qa.iter()).map(|(x, z)| x * z).sum::<f64>()
    };
    let project = |v: &[f64]| -> Vec<f64> {
        // a(l) = clip(v - l*y, 0, c); y'a(l) is nonincreasing in l
        let f = |l: f64| v.iter().zip(y).map(|(&vi, &yi)| yi * (vi - l * yi).clamp(0.0, c)).sum::<f64>();
        let (mut lo, mut hi) = (-1.0, 1.0);
        while f(lo) < 0.0 {
            lo *= 2.0;
        }
        while f(hi) > 0.0 {
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let l = 0.5 * (lo + hi);
        v.iter().zip(y).map(|(&vi, &yi)| (vi - l * yi).clamp(0.0, c)).collect()
    };

    let mut a = vec![0.0; n];
    let mut z = a.clone();
    let mut t = 1.0f64;
    let mut best = objective(&a);
    for _ in 0..200_000 {
        let qz = &q * nalgebra::DVector::from_column_slice(&z);
        let moved: Vec<f64> = (0..n).map(|i| z[i] + step * (1.0 - qz[i])).collect();
        let next = project(&moved);
        let val = objective(&next);
        if val < best {
            // restart momentum when the objective drops
            t = 1.0;
            z = a.clone();
            continue;
        }
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        z = (0..n).map(|i| next[i] + (t - 1.0) / t_next * (next[i] - a[i])).collect();
        t = t_next;
        let gain = val - best;
        a = next;
        best = val;
        if gain >= 0.0 && gain < 1e-15 * best.abs().max(1.0) && t > 50.0 {
            break;
        }
    }
    (a, best)
}

/// Two overlapping Gaussian blobs in the plane, `n` points in total with
/// alternating labels 0/1.
pub fn blobs<R: Rng>(rng: &mut R, n: usize, gap: f64) -> (Vec<[f64; 2]>, Vec<usize>) {
    let mut pts = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let l = i % 2;
        let shift = if l == 0 { -gap / 2.0 } else { gap / 2.0 };
        let x: f64 = StandardNormal.sample(rng);
        let y: f64 = StandardNormal.sample(rng);
        pts.push([x + shift, y]);
        labels.push(l);
    }
    (pts, labels)
}
