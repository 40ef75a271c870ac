use nalgebra::DMatrix;

use super::{check_selection, split_table, Ket, Result};
use crate::C64;

/// Rank cutoff on singular values.
const RANK_TOL: f64 = 1e-12;

/// One term `λ |left⟩ ⊗ |right⟩` of a Schmidt decomposition.
#[derive(Debug, Clone)]
pub struct SchmidtTerm {
    pub coefficient: f64,
    pub left: Ket,
    pub right: Ket,
}

/// Schmidt decomposition of `psi` across `left` / (all other factors),
/// via the singular-value factorization of the reshaped amplitude array.
/// Terms are returned in descending coefficient order; coefficients below
/// `1e-12` are dropped.
pub fn schmidt_decompose(psi: &Ket, left: &[usize]) -> Result<Vec<SchmidtTerm>> {
    let dims = psi.factor_dims();
    let left = check_selection(left, dims.len())?;
    let right: Vec<usize> = (0..dims.len()).filter(|k| !left.contains(k)).collect();
    let (dl, dr, table) = split_table(dims, &left);
    let m = DMatrix::from_fn(dl, dr, |a, b| psi.amplitudes()[table[a][b]]);
    let svd = m.svd(true, true);
    let u = svd.u.expect("requested U");
    let vt = svd.v_t.expect("requested V†");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let left_dims: Vec<usize> = left.iter().map(|&k| dims[k]).collect();
    let mut right_dims: Vec<usize> = right.iter().map(|&k| dims[k]).collect();
    if right_dims.is_empty() {
        right_dims.push(1);
    }
    let mut out = Vec::new();
    for k in order {
        let s = svd.singular_values[k];
        if s <= RANK_TOL {
            continue;
        }
        let l: Vec<C64> = u.column(k).iter().copied().collect();
        let r: Vec<C64> = vt.row(k).iter().copied().collect();
        out.push(SchmidtTerm {
            coefficient: s,
            left: Ket::new(l, left_dims.clone())?,
            right: Ket::new(r, right_dims.clone())?,
        });
    }
    Ok(out)
}

/// Rebuilds the state from its Schmidt terms in the original factor order.
pub fn schmidt_reconstruct(terms: &[SchmidtTerm], factor_dims: &[usize], left: &[usize]) -> Result<Ket> {
    let left = check_selection(left, factor_dims.len())?;
    let (dl, dr, table) = split_table(factor_dims, &left);
    let n: usize = factor_dims.iter().product();
    let mut amps = vec![C64::new(0.0, 0.0); n];
    for t in terms {
        for a in 0..dl {
            for b in 0..dr {
                amps[table[a][b]] += t.left.amplitudes()[a] * t.right.amplitudes()[b] * t.coefficient;
            }
        }
    }
    Ket::new(amps, factor_dims.to_vec())
}
