//! Batched kernel-ridge queries for histories with repeated bid contexts.
//!
//! When the cross kernel of a query against history sample `t` factors as
//! `w_t * g(query, group(t))`, the prediction and the quadratic form
//! `k M k^T` only need per-group aggregates of the dual coefficients and of the
//! regularized inverse `M`. Those aggregates cost one pass over `M` per query
//! batch, after which each candidate costs `O(groups^2)` instead of `O(tau^2)`.

use crate::gram::KernelRidge;
use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

/// Interns real vectors by bit pattern so identical contexts share an id.
#[derive(Debug, Clone, Default)]
pub struct ContextRegistry {
    ids: BTreeMap<Vec<u64>, usize>,
    rows: Vec<Vec<f64>>,
}

impl ContextRegistry {
    pub fn intern(&mut self, v: &[f64]) -> usize {
        let key: Vec<u64> = v.iter().map(|x| x.to_bits()).collect();
        let next = self.rows.len();
        let id = *self.ids.entry(key).or_insert(next);
        if id == next {
            self.rows.push(v.to_vec());
        }
        id
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn get(&self, id: usize) -> &[f64] {
        &self.rows[id]
    }
}

/// Per-group aggregates of one [`KernelRidge`] for a fixed weight vector.
pub(crate) struct GroupAggregate {
    groups: usize,
    /// `sum_t w_t coef_t` per group.
    coef: Vec<f64>,
    /// `sum_{t,s} w_t w_s M_ts` per group pair, dense `groups x groups`.
    quad: Option<Vec<f64>>,
}

impl GroupAggregate {
    /// `weights[t]` and `group[t]` describe sample `t` of `ridge`; groups are
    /// `0..groups`.
    pub(crate) fn new(ridge: &KernelRidge, weights: &[f64], group: &[usize], groups: usize, with_quad: bool) -> Self {
        let tau = ridge.len();
        debug_assert_eq!(weights.len(), tau);
        debug_assert_eq!(group.len(), tau);
        let mut coef = vec![0.0; groups];
        for ((&w, &g), &c) in weights.iter().zip(group).zip(ridge.coef()) {
            coef[g] += w * c;
        }
        let quad = with_quad.then(|| {
            let inv = ridge.inverse();
            let mut lower = vec![0.0; groups * groups];
            let mut diag = vec![0.0; groups];
            for t in 0..tau {
                let row = inv.row_lower(t);
                let gt = group[t];
                let wt = weights[t];
                let acc = &mut lower[gt * groups..(gt + 1) * groups];
                for ((&m, &ws), &gs) in row[..t].iter().zip(&weights[..t]).zip(&group[..t]) {
                    acc[gs] += m * ws * wt;
                }
                diag[gt] += wt * wt * row[t];
            }
            let mut q = vec![0.0; groups * groups];
            for i in 0..groups {
                for j in 0..groups {
                    q[i * groups + j] = lower[i * groups + j] + lower[j * groups + i];
                }
                q[i * groups + i] += diag[i];
            }
            q
        });
        Self { groups, coef, quad }
    }

    /// Prediction for a query whose group kernel values are `g`.
    pub(crate) fn mean(&self, g: &[f64]) -> f64 {
        g.iter().zip(&self.coef).map(|(a, b)| a * b).sum()
    }

    /// `k M k^T` for a query whose group kernel values are `g`.
    pub(crate) fn quad_form(&self, g: &[f64]) -> f64 {
        let q = self.quad.as_ref().expect("aggregate built without quadratic term");
        let n = self.groups;
        let mut total = 0.0;
        for i in 0..n {
            if g[i] == 0.0 {
                continue;
            }
            let row = &q[i * n..(i + 1) * n];
            let inner: f64 = row.iter().zip(g).map(|(a, b)| a * b).sum();
            total += g[i] * inner;
        }
        total
    }
}
