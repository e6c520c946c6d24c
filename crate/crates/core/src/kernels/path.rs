use super::{KernelConfig, StructureKernel};
use crate::error::{Error, Result};
use crate::sequence::{check_dims, Sequence};

/// Path kernel through its suffix recursion
///
/// `k(s, t) = k_sym(s_1, t_1) + chv*k(s[2..], t) + chv*k(s, t[2..]) + cd*k(s[2..], t[2..])`
/// when both sequences are nonempty, 0 otherwise. Evaluated bottom-up over
/// a `(|s|+1) x (|t|+1)` table of suffix pairs.
pub fn path_kernel_recursive(s: &Sequence, t: &Sequence, cfg: &KernelConfig) -> Result<f64> {
    check_dims(s, t)?;
    cfg.validate()?;
    let StructureKernel::Path { chv, cd } = cfg.structure else {
        return Err(Error::Unsupported(format!(
            "recursive evaluation needs a path structure kernel, got {}",
            cfg.structure.name()
        )));
    };
    let k = suffix_table(s, t, cfg, chv, cd);
    if !cfg.normalize {
        return Ok(k);
    }
    if s.is_empty() || t.is_empty() {
        return Err(Error::UndefinedNormalization);
    }
    let kss = suffix_table(s, s, cfg, chv, cd);
    let ktt = suffix_table(t, t, cfg, chv, cd);
    super::decomposable::normalize(k, kss, ktt)
}

fn suffix_table(s: &Sequence, t: &Sequence, cfg: &KernelConfig, chv: f64, cd: f64) -> f64 {
    let (n, m) = (s.len(), t.len());
    if n == 0 || m == 0 {
        return 0.0;
    }
    let w = m + 1;
    // cell (a, b) holds k(s[a..], t[b..]); row n and column m stay zero
    let mut table = vec![0.0; (n + 1) * w];
    for a in (0..n).rev() {
        for b in (0..m).rev() {
            table[a * w + b] = cfg.symbol.eval_unchecked(s.symbol(a), t.symbol(b))
                + chv * table[(a + 1) * w + b]
                + chv * table[a * w + b + 1]
                + cd * table[(a + 1) * w + b + 1];
        }
    }
    table[0]
}
