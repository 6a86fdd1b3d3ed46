//! Beam subset selection for a limited RF-chain budget.
//!
//! Per user, every beam whose magnitude clears the norm-relative threshold is
//! significant, and the strongest one is that user's IMSB. When the union of
//! significant beams exceeds the budget, the IMSBs are kept and the remaining
//! slots go to the beams with the largest cross-user norms.

use std::collections::BTreeSet;

use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Outcome of the beam selection pass.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelectionResult {
    /// Selected beam indices, sorted ascending; at most the RF budget.
    pub selected: Vec<usize>,
    /// Each user's index of most significant beam, in user order.
    pub per_user_imsb: Vec<usize>,
    /// Sorted union of all users' significant sets.
    pub union: Vec<usize>,
}

impl SelectionResult {
    /// Number of occupied beams Q before any pruning.
    pub fn q(&self) -> usize {
        self.union.len()
    }
}

/// Selects transmit beams from a K x M matrix of beam-domain rows.
///
/// `threshold` scales the per-user cut `threshold * |g_k| / sqrt(M)`;
/// membership is invariant to rescaling a user's row. Ties (argmax and the
/// norm ordering) break toward the lower index.
pub fn select_significant_beams(
    beam_rows: &Array2<Complex64>,
    threshold: f64,
    rf_budget: usize,
) -> Result<SelectionResult> {
    let (users, m) = beam_rows.dim();
    if rf_budget < users {
        return Err(Error::TooFewRfChains {
            got: rf_budget,
            users,
        });
    }
    assert!(threshold > 0.0, "threshold must be positive");

    let mut per_user_imsb = Vec::with_capacity(users);
    let mut union_set: BTreeSet<usize> = BTreeSet::new();
    for k in 0..users {
        let row = beam_rows.row(k);
        let row_norm = row.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let cut = threshold * row_norm / (m as f64).sqrt();
        let mut argmax = 0;
        let mut best = f64::NEG_INFINITY;
        for (i, z) in row.iter().enumerate() {
            let mag = z.norm();
            if mag > best {
                best = mag;
                argmax = i;
            }
            if mag > cut {
                union_set.insert(i);
            }
        }
        per_user_imsb.push(argmax);
    }

    let union: Vec<usize> = union_set.iter().copied().collect();
    let q = union.len();

    let selected = if q > rf_budget {
        // Rank the occupied beams by their norm across users.
        let mut by_norm = union.clone();
        let column_norm = |i: usize| -> f64 {
            (0..users)
                .map(|k| beam_rows[(k, i)].norm_sqr())
                .sum::<f64>()
        };
        by_norm.sort_by(|&a, &b| {
            column_norm(b)
                .partial_cmp(&column_norm(a))
                .unwrap()
                .then(a.cmp(&b))
        });
        let imsb_set: BTreeSet<usize> = per_user_imsb.iter().copied().collect();
        let mut keep = imsb_set.clone();
        for idx in by_norm
            .into_iter()
            .filter(|i| !imsb_set.contains(i))
            .take(rf_budget - users)
        {
            keep.insert(idx);
        }
        keep.into_iter().collect()
    } else {
        union.clone()
    };

    Ok(SelectionResult {
        selected,
        per_user_imsb,
        union,
    })
}
