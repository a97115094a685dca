//! G² (log-likelihood ratio) conditional-independence test on discrete data.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::discretize::DiscreteDataset;
use crate::error::{Error, Result};

/// Default cap on the size of conditioning sets.
pub const DEFAULT_MAX_COND: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CiTestResult {
    pub x: usize,
    pub y: usize,
    pub cond: Vec<usize>,
    pub statistic: f64,
    pub df: f64,
    pub p_value: f64,
    pub independent: bool,
}

/// Tests `x ⫫ y | cond` at significance `alpha`.
///
/// The contingency table of `(x, y)` is stratified by the joint state of
/// `cond`. Empty cells contribute nothing to the statistic, and strata with
/// no samples at all are dropped from the degrees of freedom, which are
/// `(|x| - 1)(|y| - 1)` per non-empty stratum.
pub fn ci_test(
    data: &DiscreteDataset,
    x: usize,
    y: usize,
    cond: &[usize],
    alpha: f64,
    max_cond: usize,
) -> Result<CiTestResult> {
    let n_vars = data.n_vars();
    if x >= n_vars || y >= n_vars || cond.iter().any(|&c| c >= n_vars) {
        return Err(Error::InvalidArgument("variable index out of bounds".into()));
    }
    if x == y {
        return Err(Error::InvalidArgument(format!(
            "cannot test `{}` against itself",
            data.names()[x]
        )));
    }
    if cond.contains(&x) || cond.contains(&y) {
        return Err(Error::InvalidArgument("conditioning set contains a tested variable".into()));
    }
    if cond.len() > max_cond {
        return Err(Error::ConditioningSetTooLarge {
            size: cond.len(),
            cap: max_cond,
        });
    }
    if data.n_rows() == 0 {
        return Err(Error::EmptyDataset);
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!("alpha {alpha} outside (0, 1)")));
    }

    let cards = data.cardinalities();
    let (rx, ry) = (cards[x], cards[y]);
    let strata: usize = cond.iter().map(|&c| cards[c]).product();
    let cell = rx * ry;
    let mut counts = vec![0u32; strata * cell];

    let xs = data.column(x);
    let ys = data.column(y);
    let cond_cols: Vec<&[u8]> = cond.iter().map(|&c| data.column(c)).collect();
    for row in 0..data.n_rows() {
        let mut s = 0usize;
        for (k, col) in cond_cols.iter().enumerate() {
            s = s * cards[cond[k]] + col[row] as usize;
        }
        counts[s * cell + xs[row] as usize * ry + ys[row] as usize] += 1;
    }

    let mut g2 = 0.0;
    let mut nonempty = 0usize;
    let mut row_tot = vec![0u32; rx];
    let mut col_tot = vec![0u32; ry];
    for table in counts.chunks_exact(cell) {
        let total: u32 = table.iter().sum();
        if total == 0 {
            continue;
        }
        nonempty += 1;
        row_tot.iter_mut().for_each(|v| *v = 0);
        col_tot.iter_mut().for_each(|v| *v = 0);
        for i in 0..rx {
            for j in 0..ry {
                let c = table[i * ry + j];
                row_tot[i] += c;
                col_tot[j] += c;
            }
        }
        let total = total as f64;
        for i in 0..rx {
            for j in 0..ry {
                let c = table[i * ry + j];
                if c > 0 {
                    let expected = row_tot[i] as f64 * col_tot[j] as f64 / total;
                    g2 += c as f64 * (c as f64 / expected).ln();
                }
            }
        }
    }
    let statistic = (2.0 * g2).max(0.0);
    let df = ((rx - 1) * (ry - 1) * nonempty) as f64;
    let p_value = if df == 0.0 {
        1.0
    } else {
        ChiSquared::new(df)
            .map_err(|e| Error::InvalidArgument(e.to_string()))?
            .sf(statistic)
            .clamp(0.0, 1.0)
    };
    Ok(CiTestResult {
        x,
        y,
        cond: cond.to_vec(),
        statistic,
        df,
        p_value,
        independent: p_value > alpha,
    })
}
