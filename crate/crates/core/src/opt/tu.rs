//! Exhaustive total-unimodularity check through the Ghouila-Houri characterization.

use crate::error::{Error, Result};

/// Largest row count accepted by [`check_totally_unimodular_ghouila_houri`].
pub const MAX_TU_ROWS: usize = 20;

/// True when every subset of rows can be split into two parts whose column-wise difference of
/// sums stays within {-1, 0, 1}.
///
/// All `2^m - 1` non-empty subsets are visited; for each one a signing is searched by
/// backtracking, pruning as soon as some column can no longer be brought back into range.
pub fn check_totally_unimodular_ghouila_houri(matrix: &[Vec<i64>]) -> Result<bool> {
    let m = matrix.len();
    if m > MAX_TU_ROWS {
        return Err(Error::MatrixTooLarge(m));
    }
    let n = matrix.first().map_or(0, Vec::len);
    for row in matrix {
        if row.len() != n {
            return Err(Error::DimensionMismatch(format!("row of length {} in a {}-column matrix", row.len(), n)));
        }
        if let Some(&bad) = row.iter().find(|&&a| !(-1..=1).contains(&a)) {
            return Err(Error::NonTernaryEntry(bad));
        }
    }
    let mut rows = Vec::with_capacity(m);
    let mut sums = vec![0i64; n];
    let mut remaining = vec![0i64; n];
    for mask in 1u32..(1u32 << m) {
        rows.clear();
        rows.extend((0..m).filter(|&r| mask >> r & 1 == 1));
        remaining.iter_mut().for_each(|v| *v = 0);
        for &r in &rows {
            for (rem, &a) in remaining.iter_mut().zip(&matrix[r]) {
                *rem += a.abs();
            }
        }
        sums.iter_mut().for_each(|v| *v = 0);
        // The first row's sign is fixed: negating a whole signing keeps it valid.
        if !sign_rows(matrix, &rows, 0, &mut sums, &mut remaining) {
            return Ok(false);
        }
    }
    Ok(true)
}

fn sign_rows(matrix: &[Vec<i64>], rows: &[usize], k: usize, sums: &mut [i64], remaining: &mut [i64]) -> bool {
    if k == rows.len() {
        return sums.iter().all(|s| s.abs() <= 1);
    }
    let row = &matrix[rows[k]];
    for (rem, &a) in remaining.iter_mut().zip(row) {
        *rem -= a.abs();
    }
    let signs: &[i64] = if k == 0 { &[1] } else { &[1, -1] };
    let mut found = false;
    for &s in signs {
        for (sum, &a) in sums.iter_mut().zip(row) {
            *sum += s * a;
        }
        let viable = sums.iter().zip(remaining.iter()).all(|(sum, rem)| sum.abs() - rem <= 1);
        if viable && sign_rows(matrix, rows, k + 1, sums, remaining) {
            found = true;
        }
        for (sum, &a) in sums.iter_mut().zip(row) {
            *sum -= s * a;
        }
        if found {
            break;
        }
    }
    for (rem, &a) in remaining.iter_mut().zip(row) {
        *rem += a.abs();
    }
    found
}

fn is_unit(v: impl Iterator<Item = i64>) -> bool {
    let mut nonzero = 0;
    for a in v {
        match a {
            0 => {}
            1 | -1 => nonzero += 1,
            _ => return false,
        }
    }
    nonzero == 1
}

/// Removes unit rows and unit columns until none is left. Total unimodularity is unaffected by
/// either operation, so the exhaustive check can run on the smaller matrix.
pub fn reduce_by_unit_rows(matrix: &[Vec<i64>]) -> Vec<Vec<i64>> {
    let mut m: Vec<Vec<i64>> = matrix.to_vec();
    loop {
        let before = (m.len(), m.first().map_or(0, Vec::len));
        m.retain(|row| !is_unit(row.iter().copied()));
        let n = m.first().map_or(0, Vec::len);
        let keep: Vec<bool> = (0..n).map(|j| !is_unit(m.iter().map(|row| row[j]))).collect();
        for row in &mut m {
            let mut j = 0;
            row.retain(|_| {
                j += 1;
                keep[j - 1]
            });
        }
        if m.iter().all(Vec::is_empty) {
            m.clear();
        }
        if (m.len(), m.first().map_or(0, Vec::len)) == before {
            return m;
        }
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Constraint matrix of one class with three virtual queues over three look-ahead slots.
    pub(crate) fn reference_matrix() -> Vec<Vec<i64>> {
        let text = "
            100000000000
            010000000000
            001000000000
            010100000000
            001010000000
            000001000000
            001010100000
            000001010000
            000000001000
            000001010100
            000000001010
            000000000001
            111111111111
            111000000000
            000111000000
            000000111000
            000000000111";
        parse(text)
    }

    pub(crate) fn reference_matrix_reduced() -> Vec<Vec<i64>> {
        let text = "
            010100000000
            001010000000
            001010100000
            000001010000
            000001010100
            000000001010
            111111111111
            111000000000
            000111000000
            000000111000
            000000000111";
        parse(text)
    }

    fn parse(text: &str) -> Vec<Vec<i64>> {
        text.split_whitespace()
            .map(|l| l.bytes().map(|b| (b - b'0') as i64).collect())
            .collect()
    }

    fn det(m: &[Vec<i64>]) -> i64 {
        let n = m.len();
        if n == 1 {
            return m[0][0];
        }
        (0..n)
            .map(|j| {
                let minor: Vec<Vec<i64>> =
                    m[1..].iter().map(|r| r.iter().enumerate().filter(|&(k, _)| k != j).map(|(_, &v)| v).collect()).collect();
                let sign = if j % 2 == 0 { 1 } else { -1 };
                sign * m[0][j] * det(&minor)
            })
            .sum()
    }

    fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
        (0u32..1 << n)
            .filter(|s| s.count_ones() as usize == k)
            .map(|s| (0..n).filter(|&i| s >> i & 1 == 1).collect())
            .collect()
    }

    /// Every square submatrix has determinant in {-1, 0, 1}.
    fn tu_by_determinants(m: &[Vec<i64>]) -> bool {
        let rows = m.len();
        let cols = m.first().map_or(0, Vec::len);
        for k in 1..=rows.min(cols) {
            for rs in subsets(rows, k) {
                for cs in subsets(cols, k) {
                    let sub: Vec<Vec<i64>> = rs.iter().map(|&r| cs.iter().map(|&c| m[r][c]).collect()).collect();
                    if det(&sub).abs() > 1 {
                        return false;
                    }
                }
            }
        }
        true
    }

    #[test]
    fn reduction_of_a_gives_a_prime() {
        let reduced = reduce_by_unit_rows(&reference_matrix());
        assert_eq!(reduced.len(), 11);
        assert_eq!(reduced, reference_matrix_reduced());
    }

    #[test]
    fn reference_matrix_is_tu() {
        assert_eq!(check_totally_unimodular_ghouila_houri(&reference_matrix_reduced()), Ok(true));
    }

    #[test]
    fn known_non_tu() {
        let m = vec![vec![1, 1], vec![1, -1]];
        assert_eq!(det(&m), -2);
        assert_eq!(check_totally_unimodular_ghouila_houri(&m), Ok(false));
    }

    #[test]
    fn identity() {
        let id: Vec<Vec<i64>> = (0..5).map(|i| (0..5).map(|j| (i == j) as i64).collect()).collect();
        assert_eq!(check_totally_unimodular_ghouila_houri(&id), Ok(true));
        assert!(reduce_by_unit_rows(&id).is_empty());
    }

    #[test]
    fn no_unit_rows_is_unchanged() {
        let m = vec![vec![1, 1, 0], vec![0, 1, 1], vec![1, 0, 1]];
        assert_eq!(reduce_by_unit_rows(&m), m);
    }

    #[test]
    fn odd_cycle_is_not_tu() {
        let m = vec![vec![1, 1, 0], vec![0, 1, 1], vec![1, 0, 1]];
        assert_eq!(det(&m), 2);
        assert_eq!(check_totally_unimodular_ghouila_houri(&m), Ok(false));
    }

    #[test]
    fn input_errors() {
        let big = vec![vec![0i64]; 21];
        assert_eq!(check_totally_unimodular_ghouila_houri(&big), Err(Error::MatrixTooLarge(21)));
        assert_eq!(check_totally_unimodular_ghouila_houri(&[vec![2]]), Err(Error::NonTernaryEntry(2)));
    }

    fn ternary_matrix() -> impl Strategy<Value = Vec<Vec<i64>>> {
        (1usize..=4, 1usize..=4).prop_flat_map(|(r, c)| proptest::collection::vec(proptest::collection::vec(-1i64..=1, c), r))
    }

    proptest! {
        #[test]
        fn agrees_with_determinant_definition(m in ternary_matrix()) {
            prop_assert_eq!(check_totally_unimodular_ghouila_houri(&m).unwrap(), tu_by_determinants(&m));
        }

        #[test]
        fn reduction_preserves_verdict(m in ternary_matrix()) {
            let reduced = reduce_by_unit_rows(&m);
            prop_assert_eq!(
                check_totally_unimodular_ghouila_houri(&m).unwrap(),
                check_totally_unimodular_ghouila_houri(&reduced).unwrap()
            );
        }
    }
}
