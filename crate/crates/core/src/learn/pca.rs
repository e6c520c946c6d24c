use std::ops::AddAssign;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use super::check_square;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingResult {
    /// n x p principal-component scores.
    pub coordinates: DMatrix<f64>,
    /// Eigenvalues of the centered Gram, nonincreasing.
    pub eigenvalues: Vec<f64>,
}

/// Kernel PCA: double-centers `g`, eigendecomposes it and returns the top
/// `p` components scaled by the square root of their eigenvalues.
///
/// Each eigenvector's sign is fixed so that its largest-magnitude entry is
/// positive, which makes the output deterministic.
pub fn kernel_pca(g: &DMatrix<f64>, p: usize) -> Result<EmbeddingResult> {
    let n = check_square(g)?;
    if p == 0 || p > n {
        return Err(Error::domain(format!("need 1 <= p <= n = {n} components, got {p}")));
    }
    let row_means: Vec<f64> = (0..n).map(|i| g.row(i).mean()).collect();
    let col_means: Vec<f64> = (0..n).map(|j| g.column(j).mean()).collect();
    let total = row_means.iter().sum::<f64>() / n as f64;
    // HGH with H = I - 11'/n.
    let centered =
        DMatrix::from_fn(n, n, |i, j| g[(i, j)] - row_means[i] - col_means[j] + total);
    let centered = (&centered + centered.transpose()) * 0.5;
    let eig = SymmetricEigen::new(centered);

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));

    let mut coordinates = DMatrix::zeros(n, p);
    let mut eigenvalues = Vec::with_capacity(p);
    for (c, &k) in order.iter().take(p).enumerate() {
        let lambda = eig.eigenvalues[k];
        eigenvalues.push(lambda);
        let v = eig.eigenvectors.column(k);
        let pivot = v.iter().copied().fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        let scale = sign * lambda.max(0.0).sqrt();
        for i in 0..n {
            coordinates[(i, c)] = v[i] * scale;
        }
    }
    // Remove round-off drift so scores are centered to working precision.
    for c in 0..p {
        let m = coordinates.column(c).mean();
        coordinates.column_mut(c).add_scalar_mut(-m);
    }
    Ok(EmbeddingResult { coordinates, eigenvalues })
}

/// Geometry of labeled points: how far apart the class centroids are
/// relative to how tightly each class clusters around its own centroid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Separation {
    /// Smallest distance between two class centroids.
    pub between: f64,
    /// Mean distance of a point to its class centroid.
    pub within: f64,
    pub ratio: f64,
}

/// Centroid separation of the rows of `coords` grouped by `labels`.
pub fn class_separation(coords: &DMatrix<f64>, labels: &[usize]) -> Result<Separation> {
    let n = coords.nrows();
    if labels.len() != n {
        return Err(Error::Dimension { expected: n, found: labels.len() });
    }
    let k = labels.iter().max().map_or(0, |m| m + 1);
    let mut centroids = DMatrix::zeros(k, coords.ncols());
    let mut counts = vec![0usize; k];
    for (i, &l) in labels.iter().enumerate() {
        centroids.row_mut(l).add_assign(&coords.row(i));
        counts[l] += 1;
    }
    let present: Vec<usize> = (0..k).filter(|&c| counts[c] > 0).collect();
    if present.len() < 2 {
        return Err(Error::InvalidInput("need points from at least two classes".into()));
    }
    for &c in &present {
        centroids.row_mut(c).scale_mut(1.0 / counts[c] as f64);
    }
    let mut between = f64::INFINITY;
    for (a, &ca) in present.iter().enumerate() {
        for &cb in &present[a + 1..] {
            between = between.min((centroids.row(ca) - centroids.row(cb)).norm());
        }
    }
    let within = labels
        .iter()
        .enumerate()
        .map(|(i, &l)| (coords.row(i) - centroids.row(l)).norm())
        .sum::<f64>()
        / n as f64;
    Ok(Separation { between, within, ratio: between / within })
}

/// Mean silhouette coefficient of the rows of `coords` under `labels`
/// (Euclidean distances; singleton classes score 0).
pub fn silhouette(coords: &DMatrix<f64>, labels: &[usize]) -> Result<f64> {
    let n = coords.nrows();
    if labels.len() != n {
        return Err(Error::Dimension { expected: n, found: labels.len() });
    }
    let k = labels.iter().max().map_or(0, |m| m + 1);
    let mut counts = vec![0usize; k];
    for &l in labels {
        counts[l] += 1;
    }
    if counts.iter().filter(|&&c| c > 0).count() < 2 {
        return Err(Error::InvalidInput("silhouette needs at least two classes".into()));
    }
    let mut total = 0.0;
    for i in 0..n {
        let mut sums = vec![0.0; k];
        for j in 0..n {
            if j != i {
                sums[labels[j]] += (coords.row(i) - coords.row(j)).norm();
            }
        }
        let own = labels[i];
        if counts[own] < 2 {
            continue;
        }
        let a = sums[own] / (counts[own] - 1) as f64;
        let b = (0..k)
            .filter(|&c| c != own && counts[c] > 0)
            .map(|c| sums[c] / counts[c] as f64)
            .fold(f64::INFINITY, f64::min);
        let denom = a.max(b);
        if denom > 0.0 {
            total += (b - a) / denom;
        }
    }
    Ok(total / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_gram() {
        let e = kernel_pca(&DMatrix::identity(3, 3), 2).unwrap();
        for l in &e.eigenvalues {
            assert!((l - 1.0).abs() < 1e-12);
        }
        for c in 0..2 {
            assert!(e.coordinates.column(c).sum().abs() < 1e-10);
        }
    }

    #[test]
    fn component_count_bounds() {
        let g = DMatrix::identity(3, 3);
        assert!(matches!(kernel_pca(&g, 4), Err(Error::Domain(_))));
        assert!(matches!(kernel_pca(&g, 0), Err(Error::Domain(_))));
    }

    #[test]
    fn duplicate_points_coincide() {
        let x: [f64; 4] = [0.0, 1.0, 1.0, 3.0];
        let g = DMatrix::from_fn(4, 4, |i, j| (-(x[i] - x[j]).powi(2)).exp());
        let e = kernel_pca(&g, 2).unwrap();
        let d = (e.coordinates.row(1) - e.coordinates.row(2)).norm();
        assert!(d < 1e-10);
    }

    #[test]
    fn separation_and_silhouette_of_two_clusters() {
        let coords = DMatrix::from_row_slice(4, 1, &[0.0, 1.0, 10.0, 11.0]);
        let labels = [0, 0, 1, 1];
        let s = class_separation(&coords, &labels).unwrap();
        assert!((s.between - 10.0).abs() < 1e-12);
        assert!((s.within - 0.5).abs() < 1e-12);
        // a = 1, b = 10 (or 9.5/10.5 averaged) for every point.
        let expected = [(10.5 - 1.0) / 10.5, (9.5 - 1.0) / 9.5, (9.5 - 1.0) / 9.5, (10.5 - 1.0) / 10.5];
        let sil = silhouette(&coords, &labels).unwrap();
        assert!((sil - expected.iter().sum::<f64>() / 4.0).abs() < 1e-12);
    }
}
