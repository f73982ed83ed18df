//! Sparse LU factorization of the simplex basis with product-form updates.
//!
//! Pivots are chosen Markowitz-style: column singletons first, then row
//! singletons, then a threshold search over the shortest active columns.
//! Bases arising from assignment-type models are nearly triangular, so almost
//! every pivot is a singleton and the factors stay about as sparse as the
//! basis itself.

/// Entries below this magnitude are dropped during elimination.
const DROP_TOL: f64 = 1e-14;
/// A pivot must be at least this large in absolute value.
const PIVOT_ABS_TOL: f64 = 1e-11;
/// Threshold partial pivoting: candidate pivots must be within this factor
/// of the largest entry in their column.
const PIVOT_REL_TOL: f64 = 0.1;
/// Number of shortest columns inspected in a Markowitz search.
const SEARCH_COLS: usize = 4;

/// One basis column as sparse `(row, value)` pairs.
pub(crate) type SparseCol = Vec<(usize, f64)>;

#[derive(Debug, Clone)]
pub(crate) struct Singular {
    /// Rows left without a pivot.
    pub rows: Vec<usize>,
    /// Basis positions whose columns could not be pivoted.
    pub positions: Vec<usize>,
}

#[derive(Debug, Clone)]
struct Eta {
    pos: usize,
    pivot: f64,
    /// Off-pivot entries of the transformed entering column.
    entries: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, Default)]
pub(crate) struct LuFactors {
    m: usize,
    pivot_rows: Vec<usize>,
    pivot_pos: Vec<usize>,
    diag: Vec<f64>,
    /// Elimination multipliers recorded at each step, `(row, multiplier)`.
    lower: Vec<Vec<(usize, f64)>>,
    /// Remaining entries of the pivot row at each step, `(position, value)`.
    upper: Vec<Vec<(usize, f64)>>,
    etas: Vec<Eta>,
}

impl LuFactors {
    /// Factorizes the square matrix whose `j`-th column is `cols[j]`.
    pub fn factorize(m: usize, cols: &[SparseCol]) -> Result<LuFactors, Singular> {
        assert_eq!(cols.len(), m);
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); m];
        let mut col_rows: Vec<Vec<usize>> = vec![Vec::new(); m];
        for (j, col) in cols.iter().enumerate() {
            for &(i, v) in col {
                if v != 0.0 {
                    rows[i].push((j, v));
                    col_rows[j].push(i);
                }
            }
        }
        let mut row_active = vec![true; m];
        let mut col_active = vec![true; m];
        let mut col_count: Vec<usize> = col_rows.iter().map(|c| c.len()).collect();

        let mut col_singletons: Vec<usize> = (0..m).rev().filter(|&j| col_count[j] == 1).collect();
        let mut row_singletons: Vec<usize> = (0..m).rev().filter(|&i| rows[i].len() == 1).collect();

        let mut lu = LuFactors {
            m,
            ..Default::default()
        };
        // Scatter workspace indexed by column position.
        let mut work = vec![0.0f64; m];
        let mut mark = vec![false; m];

        for _step in 0..m {
            let mut choice: Option<(usize, usize)> = None;

            while let Some(j) = col_singletons.pop() {
                if !col_active[j] || col_count[j] != 1 {
                    continue;
                }
                let i = col_rows[j].iter().copied().find(|&i| row_active[i]).expect("count is 1");
                let v = entry(&rows[i], j);
                if v.abs() > PIVOT_ABS_TOL {
                    choice = Some((i, j));
                    break;
                }
            }
            if choice.is_none() {
                while let Some(i) = row_singletons.pop() {
                    if !row_active[i] || rows[i].len() != 1 {
                        continue;
                    }
                    let (j, v) = rows[i][0];
                    if v.abs() > PIVOT_ABS_TOL && v.abs() >= PIVOT_REL_TOL * col_max(&rows, &col_rows[j], &row_active, j) {
                        choice = Some((i, j));
                        break;
                    }
                }
            }
            if choice.is_none() {
                choice = markowitz_search(&rows, &col_rows, &row_active, &col_active, &col_count);
            }
            let Some((pr, pc)) = choice else {
                let rows_left: Vec<usize> = (0..m).filter(|&i| row_active[i]).collect();
                let positions: Vec<usize> = (0..m).filter(|&j| col_active[j]).collect();
                return Err(Singular {
                    rows: rows_left,
                    positions,
                });
            };

            // Record the pivot row.
            let pivot_row = std::mem::take(&mut rows[pr]);
            let diag = entry(&pivot_row, pc);
            let urow: Vec<(usize, f64)> = pivot_row.iter().copied().filter(|&(j, _)| j != pc).collect();
            row_active[pr] = false;
            col_active[pc] = false;
            for &(j, _) in &urow {
                col_count[j] -= 1;
                if col_count[j] == 1 {
                    col_singletons.push(j);
                }
            }

            // Eliminate the pivot column from the other active rows.
            let mut lrow = Vec::new();
            let targets: Vec<usize> = col_rows[pc].iter().copied().filter(|&i| row_active[i]).collect();
            for i in targets {
                let a = entry(&rows[i], pc);
                if a == 0.0 {
                    continue;
                }
                let mult = a / diag;
                lrow.push((i, mult));
                let row = &mut rows[i];
                for &(j, v) in row.iter() {
                    work[j] = v;
                    mark[j] = true;
                }
                mark[pc] = false;
                work[pc] = 0.0;
                for &(j, u) in &urow {
                    if !mark[j] {
                        mark[j] = true;
                        work[j] = 0.0;
                        col_rows[j].push(i);
                        col_count[j] += 1;
                    }
                    work[j] -= mult * u;
                }
                let old: Vec<usize> = row.iter().map(|&(j, _)| j).collect();
                row.clear();
                let mut push = |j: usize, row: &mut Vec<(usize, f64)>| {
                    if mark[j] {
                        mark[j] = false;
                        let v = work[j];
                        work[j] = 0.0;
                        if v.abs() > DROP_TOL {
                            row.push((j, v));
                        } else {
                            col_count[j] -= 1;
                            if col_count[j] == 1 {
                                col_singletons.push(j);
                            }
                        }
                    }
                };
                for j in old {
                    if j != pc {
                        push(j, row);
                    }
                }
                for &(j, _) in &urow {
                    push(j, row);
                }
                if row.len() == 1 {
                    row_singletons.push(i);
                }
            }

            lu.pivot_rows.push(pr);
            lu.pivot_pos.push(pc);
            lu.diag.push(diag);
            lu.lower.push(lrow);
            lu.upper.push(urow);
        }
        Ok(lu)
    }

    pub fn num_etas(&self) -> usize {
        self.etas.len()
    }

    /// Solves `B x = b`; `b` is indexed by row and overwritten by `x`, indexed
    /// by basis position.
    pub fn ftran(&self, b: &mut Vec<f64>) {
        let y = b;
        for (t, lrow) in self.lower.iter().enumerate() {
            let yr = y[self.pivot_rows[t]];
            if yr != 0.0 {
                for &(i, l) in lrow {
                    y[i] -= l * yr;
                }
            }
        }
        let mut x = vec![0.0; self.m];
        for t in (0..self.pivot_rows.len()).rev() {
            let mut s = y[self.pivot_rows[t]];
            for &(j, u) in &self.upper[t] {
                s -= u * x[j];
            }
            x[self.pivot_pos[t]] = s / self.diag[t];
        }
        for eta in &self.etas {
            let xp = x[eta.pos] / eta.pivot;
            x[eta.pos] = xp;
            if xp != 0.0 {
                for &(i, a) in &eta.entries {
                    x[i] -= a * xp;
                }
            }
        }
        *y = x;
    }

    /// Solves `B^T y = d`; `d` is indexed by basis position and overwritten by
    /// `y`, indexed by row.
    pub fn btran(&self, d: &mut Vec<f64>) {
        for eta in self.etas.iter().rev() {
            let mut s = d[eta.pos];
            for &(i, a) in &eta.entries {
                s -= a * d[i];
            }
            d[eta.pos] = s / eta.pivot;
        }
        let mut w = vec![0.0; self.m];
        for t in 0..self.pivot_rows.len() {
            let wr = d[self.pivot_pos[t]] / self.diag[t];
            w[self.pivot_rows[t]] = wr;
            if wr != 0.0 {
                for &(j, u) in &self.upper[t] {
                    d[j] -= u * wr;
                }
            }
        }
        for t in (0..self.pivot_rows.len()).rev() {
            let mut s = 0.0;
            for &(i, l) in &self.lower[t] {
                s += l * w[i];
            }
            w[self.pivot_rows[t]] -= s;
        }
        *d = w;
    }

    /// Records the replacement of the column at basis position `pos` by a
    /// column whose transformed representation `B^{-1} a` is `alpha`.
    pub fn update(&mut self, pos: usize, alpha: &[f64]) {
        let entries = alpha
            .iter()
            .enumerate()
            .filter(|&(i, a)| i != pos && a.abs() > DROP_TOL)
            .map(|(i, &a)| (i, a))
            .collect();
        self.etas.push(Eta {
            pos,
            pivot: alpha[pos],
            entries,
        });
    }
}

fn entry(row: &[(usize, f64)], j: usize) -> f64 {
    row.iter().find(|&&(c, _)| c == j).map_or(0.0, |&(_, v)| v)
}

fn col_max(rows: &[Vec<(usize, f64)>], col_rows: &[usize], row_active: &[bool], j: usize) -> f64 {
    col_rows
        .iter()
        .filter(|&&i| row_active[i])
        .map(|&i| entry(&rows[i], j).abs())
        .fold(0.0, f64::max)
}

fn markowitz_search(
    rows: &[Vec<(usize, f64)>],
    col_rows: &[Vec<usize>],
    row_active: &[bool],
    col_active: &[bool],
    col_count: &[usize],
) -> Option<(usize, usize)> {
    let mut cands: Vec<usize> = (0..col_active.len())
        .filter(|&j| col_active[j] && col_count[j] > 0)
        .collect();
    cands.sort_by_key(|&j| (col_count[j], j));

    let mut best: Option<(usize, f64, usize, usize)> = None;
    for &j in cands.iter().take(SEARCH_COLS) {
        let entries: Vec<(usize, f64)> = col_rows[j]
            .iter()
            .filter(|&&i| row_active[i])
            .map(|&i| (i, entry(&rows[i], j)))
            .filter(|&(_, v)| v != 0.0)
            .collect();
        let cmax = entries.iter().fold(0.0f64, |acc, &(_, v)| acc.max(v.abs()));
        if cmax <= PIVOT_ABS_TOL {
            continue;
        }
        for &(i, v) in &entries {
            if v.abs() < PIVOT_REL_TOL * cmax {
                continue;
            }
            let cost = (rows[i].len() - 1) * (col_count[j] - 1);
            let better = match best {
                None => true,
                Some((bc, bv, _, _)) => cost < bc || (cost == bc && v.abs() > bv),
            };
            if better {
                best = Some((cost, v.abs(), i, j));
            }
        }
    }
    if best.is_none() {
        // Fall back to the largest remaining entry anywhere.
        for &j in &cands {
            for &i in &col_rows[j] {
                if !row_active[i] {
                    continue;
                }
                let v = entry(&rows[i], j).abs();
                if v > PIVOT_ABS_TOL && best.is_none_or(|(_, bv, _, _)| v > bv) {
                    best = Some((0, v, i, j));
                }
            }
        }
    }
    best.map(|(_, _, i, j)| (i, j))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_cols(a: &[Vec<f64>]) -> Vec<SparseCol> {
        let m = a.len();
        (0..m)
            .map(|j| (0..m).filter(|&i| a[i][j] != 0.0).map(|i| (i, a[i][j])).collect())
            .collect()
    }

    fn matvec(a: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
        a.iter().map(|r| r.iter().zip(x).map(|(p, q)| p * q).sum()).collect()
    }

    fn matvec_t(a: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
        let m = a.len();
        (0..m).map(|j| (0..m).map(|i| a[i][j] * y[i]).sum()).collect()
    }

    fn lcg(seed: &mut u64) -> f64 {
        *seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((*seed >> 11) as f64) / ((1u64 << 53) as f64)
    }

    #[test]
    fn solves_random_sparse_systems() {
        let mut seed = 7u64;
        for m in [1usize, 2, 5, 12, 30] {
            for _ in 0..20 {
                let mut a = vec![vec![0.0; m]; m];
                for i in 0..m {
                    a[i][i] = 1.0 + lcg(&mut seed);
                    for j in 0..m {
                        if i != j && lcg(&mut seed) < 0.2 {
                            a[i][j] = lcg(&mut seed) * 2.0 - 1.0;
                        }
                    }
                }
                let lu = LuFactors::factorize(m, &dense_cols(&a)).unwrap();
                let b: Vec<f64> = (0..m).map(|_| lcg(&mut seed)).collect();
                let mut x = b.clone();
                lu.ftran(&mut x);
                for (p, q) in matvec(&a, &x).iter().zip(&b) {
                    assert!((p - q).abs() < 1e-9);
                }
                let mut y = b.clone();
                lu.btran(&mut y);
                for (p, q) in matvec_t(&a, &y).iter().zip(&b) {
                    assert!((p - q).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn eta_updates_track_column_replacement() {
        let mut a = vec![
            vec![2.0, 0.0, 1.0],
            vec![0.0, 1.0, 0.0],
            vec![1.0, 0.0, 3.0],
        ];
        let mut lu = LuFactors::factorize(3, &dense_cols(&a)).unwrap();
        let newcol = vec![1.0, 4.0, -1.0];
        let mut alpha = newcol.clone();
        lu.ftran(&mut alpha);
        lu.update(1, &alpha);
        for i in 0..3 {
            a[i][1] = newcol[i];
        }
        let b = vec![1.0, 2.0, 3.0];
        let mut x = b.clone();
        lu.ftran(&mut x);
        for (p, q) in matvec(&a, &x).iter().zip(&b) {
            assert!((p - q).abs() < 1e-12);
        }
        let mut y = b.clone();
        lu.btran(&mut y);
        for (p, q) in matvec_t(&a, &y).iter().zip(&b) {
            assert!((p - q).abs() < 1e-12);
        }
    }

    #[test]
    fn reports_singular_part() {
        let a = vec![
            vec![1.0, 2.0, 0.0],
            vec![2.0, 4.0, 0.0],
            vec![0.0, 0.0, 1.0],
        ];
        let err = LuFactors::factorize(3, &dense_cols(&a)).unwrap_err();
        assert_eq!(err.rows.len(), 1);
        assert_eq!(err.positions.len(), 1);
    }
}
