use super::decomposable::structure_for;
use super::{KernelConfig, StructureMatrix, SymbolKernel};
use crate::error::{Error, Result};
use crate::sequence::{check_dims, Sequence};

/// Kernel value together with its derivatives in [`KernelConfig::params`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelGradient {
    pub value: f64,
    pub grad: Vec<f64>,
}

/// Unnormalized value and gradient. `m` must carry gradient tables and
/// cover both lengths.
pub(crate) fn raw_with_gradient(
    s: &Sequence,
    t: &Sequence,
    symbol: &SymbolKernel,
    m: &StructureMatrix,
) -> (f64, Vec<f64>) {
    let off = usize::from(matches!(symbol, SymbolKernel::Rbf { .. }));
    let n_struct = m.n_grads();
    let mut grad = vec![0.0; off + n_struct];
    let mut value = 0.0;
    for (i, a) in s.symbols().enumerate() {
        let row = m.row(i);
        for (j, b) in t.symbols().enumerate() {
            let (ks, dks) = symbol.eval_with_grad(a, b);
            value += ks * row[j];
            if off == 1 {
                grad[0] += dks * row[j];
            }
            for p in 0..n_struct {
                grad[off + p] += ks * m.grad_row(p, i)[j];
            }
        }
    }
    (value, grad)
}

/// Gradient of `k / sqrt(a * b)` given the gradients of `k`, `a` and `b`.
pub(crate) fn normalized_gradient(
    (k, dk): (f64, &[f64]),
    (a, da): (f64, &[f64]),
    (b, db): (f64, &[f64]),
) -> Result<(f64, Vec<f64>)> {
    if !(a > 0.0 && b > 0.0) {
        return Err(Error::Numerical(format!(
            "cannot normalize with self-similarities {a} and {b}"
        )));
    }
    let scale = 1.0 / (a.sqrt() * b.sqrt());
    let value = k * scale;
    let grad = dk
        .iter()
        .zip(da)
        .zip(db)
        .map(|((&dk, &da), &db)| dk * scale - 0.5 * value * (da / a + db / b))
        .collect();
    Ok((value, grad))
}

/// Derivatives of the sequence kernel with respect to the continuous kernel
/// parameters: the rbf bandwidth, then `alpha` (exponential) or `(chv, cd)`
/// (path). Path derivatives come from differentiating the lattice recurrence.
pub fn kernel_gradients(
    s: &Sequence,
    t: &Sequence,
    cfg: &KernelConfig,
    m: Option<&StructureMatrix>,
) -> Result<KernelGradient> {
    check_dims(s, t)?;
    cfg.validate()?;
    let n_params = cfg.param_ids()?.len();
    if cfg.normalize && (s.is_empty() || t.is_empty()) {
        return Err(Error::UndefinedNormalization);
    }
    if s.is_empty() || t.is_empty() {
        return Ok(KernelGradient {
            value: 0.0,
            grad: vec![0.0; n_params],
        });
    }
    let m = structure_for(cfg, m, s.len().max(t.len()), true)?;
    let (k, dk) = raw_with_gradient(s, t, &cfg.symbol, &m);
    if !cfg.normalize {
        return Ok(KernelGradient { value: k, grad: dk });
    }
    let (a, da) = raw_with_gradient(s, s, &cfg.symbol, &m);
    let (b, db) = raw_with_gradient(t, t, &cfg.symbol, &m);
    let (value, grad) = normalized_gradient((k, &dk), (a, &da), (b, &db))?;
    Ok(KernelGradient { value, grad })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{sequence_kernel, StructureKernel};

    #[test]
    fn exponential_diagonal_terms_do_not_move_alpha() {
        // single-symbol sequences only touch (1,1), where the exponent is zero
        let s = Sequence::univariate("s", vec![0.4]).unwrap();
        let t = Sequence::univariate("t", vec![-0.2]).unwrap();
        let cfg = KernelConfig::new(SymbolKernel::Linear, StructureKernel::Exponential { alpha: 3.0 })
            .normalized(false);
        let g = kernel_gradients(&s, &t, &cfg, None).unwrap();
        assert_eq!(g.grad, vec![0.0]);
    }

    #[test]
    fn path_gradient_against_central_difference() {
        let s = Sequence::univariate("s", vec![0.1, 0.7, -0.3]).unwrap();
        let t = Sequence::univariate("t", vec![0.5, -0.9]).unwrap();
        for normalize in [false, true] {
            let cfg = KernelConfig::new(
                SymbolKernel::Rbf { sigma: 0.9 },
                StructureKernel::Path { chv: 0.35, cd: 0.25 },
            )
            .normalized(normalize);
            let g = kernel_gradients(&s, &t, &cfg, None).unwrap();
            let p = cfg.params().unwrap();
            let h = 1e-5;
            for k in 0..p.len() {
                let mut up = p.clone();
                up[k] += h;
                let mut dn = p.clone();
                dn[k] -= h;
                let fu = sequence_kernel(&s, &t, &cfg.with_params(&up).unwrap(), None).unwrap();
                let fd = sequence_kernel(&s, &t, &cfg.with_params(&dn).unwrap(), None).unwrap();
                let fdiff = (fu - fd) / (2.0 * h);
                let rel = (g.grad[k] - fdiff).abs() / g.grad[k].abs().max(fdiff.abs()).max(1e-6);
                assert!(rel < 1e-6, "param {k} normalize={normalize}: {} vs {fdiff}", g.grad[k]);
            }
        }
    }

    #[test]
    fn unsupported_structures() {
        let s = Sequence::univariate("s", vec![0.4]).unwrap();
        let cfg = KernelConfig::new(SymbolKernel::Linear, StructureKernel::Polynomial { c: 1.0, degree: 2 });
        assert!(matches!(kernel_gradients(&s, &s, &cfg, None), Err(Error::Unsupported(_))));
    }
}
