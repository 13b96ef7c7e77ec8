//! Exact fraction-free Gaussian elimination over the integers.

use num_integer::Integer;
use num_rational::Ratio;
use num_traits::{PrimInt, Signed};
use thiserror::Error;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LinearOutcome {
    Unique(Vec<Ratio<i128>>),
    /// Row (original index) that reduced to `0 = c` with `c != 0`.
    Inconsistent { row: usize },
    Underdetermined,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("integer overflow during elimination")]
pub struct Overflow;

/// Divides a row by the gcd of its entries once they grow past 2^24.
fn normalize<T: PrimInt + Integer + Signed>(row: &mut [T]) {
    let limit = T::one() << 24;
    if row.iter().all(|x| x.abs() < limit) {
        return;
    }
    let mut g = T::zero();
    for x in row.iter() {
        g = g.gcd(x);
        if g.is_one() {
            return;
        }
    }
    if g > T::one() {
        for x in row.iter_mut() {
            *x = *x / g;
        }
    }
}

/// Row-major augmented matrix `[a | b]`.
struct Augmented<T> {
    data: Vec<T>,
    width: usize,
}

impl<T: PrimInt + Integer + Signed> Augmented<T> {
    fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.width..(r + 1) * self.width]
    }

    /// Forward elimination, pivoting on the earliest unused row; returns the pivot row of each
    /// column. Pivot rows are only ever combined into rows that have not yet been used.
    fn eliminate(&mut self, rows: usize, cols: usize) -> Result<Vec<Option<usize>>, Overflow> {
        let w = self.width;
        let mut pivot_of_col = vec![None; cols];
        let mut used = vec![false; rows];
        let mut prow = vec![T::zero(); w];
        for c in 0..cols {
            let Some(p) = (0..rows).find(|&r| !used[r] && !self.data[r * w + c].is_zero()) else {
                continue;
            };
            used[p] = true;
            pivot_of_col[c] = Some(p);
            prow.copy_from_slice(self.row(p));
            for r in (0..rows).filter(|&r| !used[r]) {
                let row = &mut self.data[r * w..(r + 1) * w];
                if row[c].is_zero() {
                    continue;
                }
                let h = prow[c].gcd(&row[c]);
                let (f, g) = (prow[c] / h, row[c] / h);
                for (x, &y) in row[c..].iter_mut().zip(&prow[c..]) {
                    let lhs = x.checked_mul(&f).ok_or(Overflow)?;
                    let rhs = if y.is_zero() { T::zero() } else { y.checked_mul(&g).ok_or(Overflow)? };
                    *x = lhs.checked_sub(&rhs).ok_or(Overflow)?;
                }
                normalize(row);
            }
        }
        Ok(pivot_of_col)
    }
}

fn solve_in<T>(a: &[Vec<i64>], b: &[i64]) -> Result<LinearOutcome, Overflow>
where
    T: PrimInt + Integer + Signed + Into<i128> + TryFrom<i64>,
{
    let cols = a.first().map_or(0, |r| r.len());
    let width = cols + 1;
    let mut data = Vec::with_capacity(a.len() * width);
    for (r, &rhs) in a.iter().zip(b) {
        for &x in r.iter().chain(std::iter::once(&rhs)) {
            data.push(T::try_from(x).map_err(|_| Overflow)?);
        }
    }
    let mut m = Augmented { data, width };
    let pivot_of_col = m.eliminate(a.len(), cols)?;
    let mut is_pivot = vec![false; a.len()];
    for p in pivot_of_col.iter().flatten() {
        is_pivot[*p] = true;
    }
    for r in (0..a.len()).filter(|&r| !is_pivot[r]) {
        let row = m.row(r);
        if !row[cols].is_zero() && row[..cols].iter().all(|x| x.is_zero()) {
            return Ok(LinearOutcome::Inconsistent { row: r });
        }
    }
    if pivot_of_col.iter().any(|p| p.is_none()) {
        return Ok(LinearOutcome::Underdetermined);
    }
    // the pivot row of column c vanishes on earlier columns
    let mut x = vec![Ratio::from_integer(0i128); cols];
    for c in (0..cols).rev() {
        let row = m.row(pivot_of_col[c].unwrap());
        let mut acc = Ratio::from_integer(row[cols].into());
        for (j, xj) in x.iter().enumerate().skip(c + 1) {
            if !row[j].is_zero() {
                acc -= *xj * Ratio::from_integer(row[j].into());
            }
        }
        x[c] = acc / Ratio::from_integer(row[c].into());
    }
    Ok(LinearOutcome::Unique(x))
}

/// Solves `a x = b` exactly. Pivots are taken from the earliest unused row, so when the
/// leading rows already determine `x` every later row is checked against that solution.
/// Runs in 64-bit arithmetic and repeats in 128-bit if intermediate values overflow.
pub fn solve(a: &[Vec<i64>], b: &[i64]) -> Result<LinearOutcome, Overflow> {
    solve_in::<i64>(a, b).or_else(|_| solve_in::<i128>(a, b))
}
