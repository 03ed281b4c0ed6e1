//! Sparse Gaussian elimination over exact rationals.

use crate::rational::Rat;
use num_traits::Zero;
use std::collections::BTreeMap;

/// Sparse row: column index to nonzero rational entry.
pub type SparseRow = BTreeMap<usize, Rat>;

pub fn row_is_zero(row: &SparseRow) -> bool {
    row.is_empty()
}

/// Subtract `factor * src` from `dst`, dropping entries that cancel exactly.
pub fn row_axpy(dst: &mut SparseRow, factor: &Rat, src: &SparseRow) {
    for (&col, v) in src {
        let delta = v * factor;
        match dst.get_mut(&col) {
            Some(e) => {
                *e -= delta;
                if e.is_zero() {
                    dst.remove(&col);
                }
            }
            None => {
                dst.insert(col, -delta);
            }
        }
    }
}

/// Echelon basis of a row set, keyed by leading column. Pivot rows are
/// normalized to leading coefficient one.
#[derive(Default)]
pub struct Echelon {
    pivots: BTreeMap<usize, SparseRow>,
}

impl Echelon {
    pub fn new() -> Self {
        Echelon::default()
    }

    pub fn rank(&self) -> usize {
        self.pivots.len()
    }

    /// Reduce `row` against the current pivots in place.
    pub fn reduce(&self, row: &mut SparseRow) {
        loop {
            let lead = match row.first_key_value() {
                Some((&c, _)) => c,
                None => return,
            };
            let pivot = match self.pivots.get(&lead) {
                Some(p) => p,
                None => return,
            };
            let factor = row[&lead].clone();
            row_axpy(row, &factor, pivot);
            debug_assert!(!row.contains_key(&lead));
        }
    }

    /// Reduce and absorb `row`; returns true if it increased the rank.
    pub fn insert(&mut self, mut row: SparseRow) -> bool {
        self.reduce(&mut row);
        match row.first_key_value() {
            Some((&lead, v)) => {
                let inv = v.clone();
                let normalized: SparseRow = row.iter().map(|(&c, e)| (c, e / &inv)).collect();
                self.pivots.insert(lead, normalized);
                true
            }
            None => false,
        }
    }
}

/// Rank of a row set plus, when the rows are dependent, coefficients of one
/// vanishing combination (indexed like the input rows).
pub fn rank_with_certificate(rows: Vec<SparseRow>) -> (usize, Option<Vec<Rat>>) {
    let n = rows.len();
    let mut pivots: BTreeMap<usize, (SparseRow, Vec<Rat>)> = BTreeMap::new();
    let mut certificate: Option<Vec<Rat>> = None;
    for (i, mut row) in rows.into_iter().enumerate() {
        let mut combo = vec![Rat::zero(); n];
        combo[i] = Rat::from_integer(1.into());
        loop {
            let lead = match row.first_key_value() {
                Some((&c, _)) => c,
                None => {
                    if certificate.is_none() {
                        certificate = Some(combo);
                    }
                    break;
                }
            };
            match pivots.get(&lead) {
                Some((prow, pcombo)) => {
                    let factor = row[&lead].clone();
                    row_axpy(&mut row, &factor, prow);
                    for (c, pc) in combo.iter_mut().zip(pcombo) {
                        *c -= pc * &factor;
                    }
                }
                None => {
                    let inv = row[&lead].clone();
                    let nrow: SparseRow = row.iter().map(|(&c, e)| (c, e / &inv)).collect();
                    let ncombo: Vec<Rat> = combo.iter().map(|c| c / &inv).collect();
                    pivots.insert(lead, (nrow, ncombo));
                    break;
                }
            }
        }
    }
    (pivots.len(), certificate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;

    fn row(entries: &[(usize, f64)]) -> SparseRow {
        entries.iter().map(|&(c, v)| (c, rat(v))).collect()
    }

    #[test]
    fn rank_of_independent_rows() {
        let rows = vec![row(&[(0, 1.0)]), row(&[(1, 2.0)]), row(&[(0, 1.0), (2, 1.0)])];
        let (rank, cert) = rank_with_certificate(rows);
        assert_eq!(rank, 3);
        assert!(cert.is_none());
    }

    #[test]
    fn duplicate_row_yields_certificate() {
        let rows = vec![
            row(&[(0, 1.0), (1, 2.0)]),
            row(&[(0, 1.0), (1, 2.0)]),
            row(&[(2, 1.0)]),
        ];
        let (rank, cert) = rank_with_certificate(rows);
        assert_eq!(rank, 2);
        let cert = cert.unwrap();
        assert_eq!(cert[0], rat(-1.0));
        assert_eq!(cert[1], rat(1.0));
        assert_eq!(cert[2], rat(0.0));
    }

    #[test]
    fn echelon_membership() {
        let mut ech = Echelon::new();
        assert!(ech.insert(row(&[(0, 2.0), (1, 4.0)])));
        assert!(ech.insert(row(&[(1, 3.0)])));
        let mut member = row(&[(0, 1.0), (1, 7.0)]);
        ech.reduce(&mut member);
        assert!(row_is_zero(&member));
        let mut outside = row(&[(2, 1.0)]);
        ech.reduce(&mut outside);
        assert!(!row_is_zero(&outside));
    }
}
