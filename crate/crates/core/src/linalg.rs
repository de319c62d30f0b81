//! Echelon forms of Z_p-lattices given by generator rows, membership,
//! rank and elementary divisors. Pivots are chosen by minimal valuation, so
//! every elimination multiplier is integral.

use crate::error::{LabError, Result};
use crate::padic::PadicScalar;

pub type Row = Vec<PadicScalar>;

/// A Z_p-basis in echelon form together with the integral transform that
/// expresses each basis row through the original generators.
#[derive(Debug, Clone)]
pub struct Echelon {
    pub rows: Vec<Row>,
    pub pivots: Vec<usize>,
    /// `rows[i] = Σ_j transform[i][j] · generators[j]`.
    pub transform: Vec<Row>,
    /// Entries of valuation at least this are treated as zero.
    pub tolerance: i64,
}

fn negligible(x: &PadicScalar, tol: i64) -> bool {
    x.is_zero() || x.valuation() >= tol
}

fn axpy(target: &mut Row, factor: &PadicScalar, source: &Row) {
    for (t, s) in target.iter_mut().zip(source) {
        *t = &*t - &(factor * s);
    }
}

impl Echelon {
    /// Row-reduces the generators over Z_p.
    pub fn new(generators: &[Row], tolerance: i64) -> Result<Self> {
        let Some(first) = generators.first() else {
            return Ok(Echelon {
                rows: Vec::new(),
                pivots: Vec::new(),
                transform: Vec::new(),
                tolerance,
            });
        };
        let cols = first.len();
        let k = generators.len();
        let zero = first[0].zero_like();
        let mut rows: Vec<Row> = generators.to_vec();
        let mut trans: Vec<Row> = (0..k)
            .map(|i| {
                (0..k)
                    .map(|j| {
                        if i == j {
                            zero.exact_int_like(1)
                        } else {
                            zero.exact_int_like(0)
                        }
                    })
                    .collect()
            })
            .collect();
        let mut pivots = Vec::new();
        let mut top = 0;
        for c in 0..cols {
            if top == k {
                break;
            }
            let best = (top..k)
                .filter(|&r| !negligible(&rows[r][c], tolerance))
                .min_by_key(|&r| rows[r][c].valuation());
            let Some(b) = best else { continue };
            rows.swap(top, b);
            trans.swap(top, b);
            let piv = rows[top][c].clone();
            let inv = piv.inv()?;
            for r in (top + 1)..k {
                if negligible(&rows[r][c], tolerance) {
                    continue;
                }
                let f = &rows[r][c] * &inv;
                let (head, tail) = rows.split_at_mut(r);
                axpy(&mut tail[0], &f, &head[top]);
                let (th, tt) = trans.split_at_mut(r);
                axpy(&mut tt[0], &f, &th[top]);
            }
            pivots.push(c);
            top += 1;
        }
        rows.truncate(top);
        trans.truncate(top);
        Ok(Echelon {
            rows,
            pivots,
            transform: trans,
            tolerance,
        })
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    /// Coordinates of `v` in the echelon basis over Q_p, and the valuation
    /// of the residual left after elimination.
    pub fn coordinates(&self, v: &Row) -> Result<(Row, i64)> {
        let mut rest = v.clone();
        let mut coords = Vec::with_capacity(self.rows.len());
        for (row, &c) in self.rows.iter().zip(&self.pivots) {
            let a = if negligible(&rest[c], self.tolerance) {
                rest[c].zero_like()
            } else {
                rest[c].div(&row[c])?
            };
            axpy(&mut rest, &a, row);
            coords.push(a);
        }
        let residual = rest.iter().map(|x| x.valuation()).min().unwrap_or(i64::MAX);
        Ok((coords, residual))
    }

    /// Integral coordinates of `v`, or `None` if `v` is outside the lattice
    /// (a coordinate is non-integral or a residual remains).
    pub fn member(&self, v: &Row) -> Result<Option<Row>> {
        let (coords, residual) = self.coordinates(v)?;
        if residual < self.tolerance {
            return Ok(None);
        }
        if coords
            .iter()
            .any(|c| !negligible(c, self.tolerance) && c.valuation() < 0)
        {
            return Ok(None);
        }
        Ok(Some(coords))
    }

    /// Coefficients on the original generators: `Σ_i coords[i] transform[i]`.
    pub fn generator_coefficients(&self, coords: &Row) -> Row {
        let k = self.transform.first().map(|r| r.len()).unwrap_or(0);
        let zero = coords
            .first()
            .map(|c| c.zero_like())
            .or_else(|| self.rows.first().map(|r| r[0].zero_like()));
        let Some(zero) = zero else { return Vec::new() };
        let mut out = vec![zero; k];
        for (c, t) in coords.iter().zip(&self.transform) {
            for (o, x) in out.iter_mut().zip(t) {
                *o = &*o + &(c * x);
            }
        }
        out
    }
}

/// Rank of the Q_p-span of the rows.
pub fn rank(rows: &[Row], tolerance: i64) -> Result<usize> {
    Ok(Echelon::new(rows, tolerance)?.rank())
}

/// Valuations of the elementary divisors of a matrix, by full pivoting.
pub fn elementary_divisors(matrix: &[Row], tolerance: i64) -> Result<Vec<i64>> {
    let mut a: Vec<Row> = matrix.to_vec();
    let rows = a.len();
    let cols = a.first().map(|r| r.len()).unwrap_or(0);
    let mut out = Vec::new();
    for t in 0..rows.min(cols) {
        let mut best: Option<(usize, usize, i64)> = None;
        for (i, row) in a.iter().enumerate().skip(t) {
            for (j, x) in row.iter().enumerate().skip(t) {
                if negligible(x, tolerance) {
                    continue;
                }
                if best.is_none_or(|(_, _, v)| x.valuation() < v) {
                    best = Some((i, j, x.valuation()));
                }
            }
        }
        let Some((bi, bj, v)) = best else { break };
        a.swap(t, bi);
        for row in a.iter_mut() {
            row.swap(t, bj);
        }
        let inv = a[t][t].inv()?;
        for i in (t + 1)..rows {
            if negligible(&a[i][t], tolerance) {
                continue;
            }
            let f = &a[i][t] * &inv;
            let (head, tail) = a.split_at_mut(i);
            axpy(&mut tail[0], &f, &head[t]);
        }
        out.push(v);
    }
    Ok(out)
}

/// Index valuation `log_p [L : L']` of a sublattice, given both as
/// generator rows; fails if the ranks differ or `L' ⊄ L`.
pub fn index_valuation(lattice: &[Row], sublattice: &[Row], tolerance: i64) -> Result<i64> {
    let big = Echelon::new(lattice, tolerance)?;
    let mut change = Vec::with_capacity(sublattice.len());
    for v in sublattice {
        match big.member(v)? {
            Some(c) => change.push(c),
            None => {
                return Err(LabError::property(
                    "sublattice generator lies outside the lattice",
                ))
            }
        }
    }
    let divisors = elementary_divisors(&change, tolerance)?;
    if divisors.len() != big.rank() {
        return Err(LabError::property(format!(
            "sublattice has rank {} but the lattice has rank {}",
            divisors.len(),
            big.rank()
        )));
    }
    Ok(divisors.iter().sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::padic::PrimeContext;

    fn rows(ctx: &PrimeContext, m: &[&[i64]]) -> Vec<Row> {
        m.iter()
            .map(|r| r.iter().map(|&x| ctx.int(x)).collect())
            .collect()
    }

    #[test]
    fn echelon_and_membership() {
        let c = PrimeContext::new(3, 20).unwrap();
        let g = rows(&c, &[&[3, 0], &[0, 9], &[3, 9]]);
        let e = Echelon::new(&g, 20).unwrap();
        assert_eq!(e.rank(), 2);
        let inside = vec![c.int(6), c.int(-9)];
        let coords = e.member(&inside).unwrap().unwrap();
        let back = e.generator_coefficients(&coords);
        for j in 0..2 {
            let mut s = c.zero();
            for (b, gen) in back.iter().zip(&g) {
                s = &s + &(b * &gen[j]);
            }
            assert_eq!(s.residual_valuation(&inside[j]), 20);
        }
        assert!(e.member(&vec![c.int(1), c.int(0)]).unwrap().is_none());
        assert!(e.member(&vec![c.int(0), c.int(3)]).unwrap().is_none());
    }

    #[test]
    fn divisors_and_index() {
        let c = PrimeContext::new(3, 20).unwrap();
        let m = rows(&c, &[&[9, 3], &[0, 3]]);
        assert_eq!(elementary_divisors(&m, 20).unwrap(), vec![1, 2]);
        let l = rows(&c, &[&[1, 0], &[0, 1]]);
        assert_eq!(index_valuation(&l, &m, 20).unwrap(), 3);
        assert_eq!(index_valuation(&l, &l, 20).unwrap(), 0);
        assert_eq!(rank(&rows(&c, &[&[1, 2], &[2, 4]]), 20).unwrap(), 1);
    }
}
