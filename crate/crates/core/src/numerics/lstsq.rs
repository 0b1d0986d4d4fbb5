use nalgebra::{DMatrix, DVector};

use super::NumericsError;

/// Minimizer of `||m c - rhs||_2` for a tall, full-column-rank `m`.
///
/// Householder QR with column pivoting; the rank test compares `|R_kk|`
/// against `max(rows, cols) * eps * |R_00|`.
pub fn least_squares_solve(m: &DMatrix<f64>, rhs: &DVector<f64>) -> Result<DVector<f64>, NumericsError> {
    check_shape(m, rhs.len())?;
    let tol = m.nrows().max(m.ncols()) as f64 * f64::EPSILON;
    qr_solve(m.clone(), rhs.clone(), tol)
}

/// Minimizer of `||W (m c - rhs)||_2` with `W = diag(row_weights)`.
///
/// Rank is decided on `m` itself with rows scaled to unit length, which is
/// independent of the weights. The weighted system is then factored with
/// rows in decreasing order of norm, which keeps Householder QR accurate
/// when the weights span many orders of magnitude.
pub fn weighted_least_squares_solve(
    m: &DMatrix<f64>,
    row_weights: &[f64],
    rhs: &DVector<f64>,
) -> Result<DVector<f64>, NumericsError> {
    check_shape(m, rhs.len())?;
    let (rows, cols) = m.shape();
    if row_weights.len() != rows {
        return Err(NumericsError::Shape(format!(
            "{} row weights for {rows} rows",
            row_weights.len()
        )));
    }
    if row_weights.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
        return Err(NumericsError::Shape("row weights must be positive and finite".into()));
    }
    let rank = numerical_rank(m);
    if rank < cols {
        return Err(NumericsError::RankDeficient { rank, cols });
    }

    let norms: Vec<f64> = (0..rows)
        .map(|i| row_weights[i] * m.row(i).norm())
        .collect();
    let mut order: Vec<usize> = (0..rows).collect();
    order.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]));
    let a = DMatrix::from_fn(rows, cols, |i, j| row_weights[order[i]] * m[(order[i], j)]);
    let b = DVector::from_fn(rows, |i, _| row_weights[order[i]] * rhs[order[i]]);
    qr_solve(a, b, 0.0)
}

/// Numerical column rank of `m` after scaling each nonzero row to unit norm.
pub fn numerical_rank(m: &DMatrix<f64>) -> usize {
    let (rows, cols) = m.shape();
    let mut a = m.clone();
    for i in 0..rows {
        let n = a.row(i).norm();
        if n > 0.0 {
            a.row_mut(i).unscale_mut(n);
        }
    }
    let tol = rows.max(cols) as f64 * f64::EPSILON;
    match qr_solve(a, DVector::zeros(rows), tol) {
        Ok(_) => cols,
        Err(NumericsError::RankDeficient { rank, .. }) => rank,
        Err(_) => 0,
    }
}

fn check_shape(m: &DMatrix<f64>, rhs_len: usize) -> Result<(), NumericsError> {
    let (rows, cols) = m.shape();
    if rhs_len != rows {
        return Err(NumericsError::Shape(format!(
            "matrix has {rows} rows, right-hand side has {rhs_len}"
        )));
    }
    if rows < cols || cols == 0 {
        return Err(NumericsError::Shape(format!(
            "need rows >= cols > 0, got {rows} x {cols}"
        )));
    }
    Ok(())
}

/// Pivoted Householder QR followed by back substitution. Stops with
/// `RankDeficient` when a pivot column norm is zero or at most `tol * |R_00|`.
fn qr_solve(mut a: DMatrix<f64>, mut b: DVector<f64>, tol: f64) -> Result<DVector<f64>, NumericsError> {
    let (rows, cols) = a.shape();
    let mut perm: Vec<usize> = (0..cols).collect();
    let mut r00 = 0.0;

    for k in 0..cols {
        // Pivot: remaining column with the largest norm below row k.
        let (mut piv, mut piv_norm) = (k, -1.0);
        for j in k..cols {
            let nrm = a.view((k, j), (rows - k, 1)).norm();
            if nrm > piv_norm {
                piv = j;
                piv_norm = nrm;
            }
        }
        if piv != k {
            a.swap_columns(k, piv);
            perm.swap(k, piv);
        }

        let norm = piv_norm;
        if k == 0 {
            r00 = norm;
        }
        if norm == 0.0 || norm <= tol * r00 {
            return Err(NumericsError::RankDeficient { rank: k, cols });
        }

        // v = x - alpha e1 with alpha = -sign(x0) ||x||, stored in place.
        let x0 = a[(k, k)];
        let alpha = if x0 >= 0.0 { -norm } else { norm };
        a[(k, k)] = x0 - alpha;
        let vnorm2: f64 = a.view((k, k), (rows - k, 1)).norm_squared();
        if vnorm2 > 0.0 {
            for j in k + 1..cols {
                let dot: f64 = (k..rows).map(|i| a[(i, k)] * a[(i, j)]).sum();
                let s = 2.0 * dot / vnorm2;
                for i in k..rows {
                    a[(i, j)] -= s * a[(i, k)];
                }
            }
            let dot: f64 = (k..rows).map(|i| a[(i, k)] * b[i]).sum();
            let s = 2.0 * dot / vnorm2;
            for i in k..rows {
                b[i] -= s * a[(i, k)];
            }
        }
        a[(k, k)] = alpha;
    }

    // Back substitution on the upper triangle (the strict lower part of
    // columns still holds reflector data; only row <= col entries are used).
    let mut z = vec![0.0; cols];
    for k in (0..cols).rev() {
        let mut acc = b[k];
        for j in k + 1..cols {
            acc -= a[(k, j)] * z[j];
        }
        z[k] = acc / a[(k, k)];
    }
    let mut out = DVector::zeros(cols);
    for (k, &p) in perm.iter().enumerate() {
        out[p] = z[k];
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
        DMatrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn identity_returns_rhs() {
        let m = DMatrix::<f64>::identity(4, 4);
        let b = DVector::from_vec(vec![1.0, -2.0, 3.5, 0.25]);
        let x = least_squares_solve(&m, &b).unwrap();
        assert!((x - b).norm() < 1e-15);
    }

    #[test]
    fn stacked_duplicates_solve_square_system() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let sq = random_matrix(&mut rng, 5, 5) + DMatrix::identity(5, 5) * 3.0;
        let b = DVector::from_fn(5, |i, _| i as f64 - 1.5);
        let direct = sq.clone().lu().solve(&b).unwrap();
        let mut tall = DMatrix::zeros(10, 5);
        tall.view_mut((0, 0), (5, 5)).copy_from(&sq);
        tall.view_mut((5, 0), (5, 5)).copy_from(&sq);
        let mut rhs = DVector::zeros(10);
        rhs.rows_mut(0, 5).copy_from(&b);
        rhs.rows_mut(5, 5).copy_from(&b);
        let x = least_squares_solve(&tall, &rhs).unwrap();
        assert!((x - direct).norm() < 1e-10);
    }

    #[test]
    fn normal_equations_hold() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let m = random_matrix(&mut rng, 50, 5);
        let b = DVector::from_fn(50, |_, _| rng.random_range(-3.0..3.0));
        let x = least_squares_solve(&m, &b).unwrap();
        let grad = m.transpose() * (&m * &x - &b);
        assert!(grad.norm() <= 1e-8 * b.norm());
    }

    #[test]
    fn rank_deficiency_is_reported() {
        let mut m = DMatrix::<f64>::zeros(6, 3);
        for i in 0..6 {
            m[(i, 0)] = i as f64 + 1.0;
            m[(i, 1)] = 2.0 * (i as f64 + 1.0);
            m[(i, 2)] = (i as f64).powi(2);
        }
        let b = DVector::from_element(6, 1.0);
        assert_eq!(
            least_squares_solve(&m, &b),
            Err(NumericsError::RankDeficient { rank: 2, cols: 3 })
        );
        assert!(matches!(
            least_squares_solve(&DMatrix::zeros(3, 2), &DVector::zeros(3)),
            Err(NumericsError::RankDeficient { rank: 0, .. })
        ));
    }

    #[test]
    fn weighted_solve_handles_extreme_weights() {
        // Two blocks of a full-rank problem, the second weighted 1e12 times
        // heavier. The answer must match the limit where the heavy rows are
        // constraints: x1 + x2 = 2 exactly, x1 - x2 = 0 in least squares.
        let m = DMatrix::from_row_slice(4, 2, &[1.0, -1.0, 1.0, -1.0, 1.0, 1.0, 1.0, 1.0]);
        let rhs = DVector::from_vec(vec![0.0, 0.0, 2.0, 2.0]);
        let w = [1.0, 1.0, 1e12, 1e12];
        let x = weighted_least_squares_solve(&m, &w, &rhs).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-12 && (x[1] - 1.0).abs() < 1e-12);
        let heavy = DMatrix::from_fn(4, 2, |i, j| w[i] * m[(i, j)]);
        assert!(matches!(
            least_squares_solve(&heavy, &DVector::from_fn(4, |i, _| w[i] * rhs[i])),
            Ok(_) | Err(NumericsError::RankDeficient { .. })
        ));
    }

    #[test]
    fn weighted_matches_unweighted_for_unit_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = random_matrix(&mut rng, 30, 4);
        let b = DVector::from_fn(30, |_, _| rng.random_range(-1.0..1.0));
        let x1 = least_squares_solve(&m, &b).unwrap();
        let x2 = weighted_least_squares_solve(&m, &[1.0; 30], &b).unwrap();
        assert!((x1 - x2).norm() < 1e-12);
        assert!(weighted_least_squares_solve(&m, &[1.0; 29], &b).is_err());
        assert!(weighted_least_squares_solve(&m, &[0.0; 30], &b).is_err());
    }

    #[test]
    fn rank_ignores_row_scale() {
        let mut m = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        m.row_mut(0).scale_mut(1e-200);
        assert_eq!(numerical_rank(&m), 2);
        let dup = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 2.0, 4.0, -1.0, -2.0]);
        assert_eq!(numerical_rank(&dup), 1);
    }

    #[test]
    fn shape_errors() {
        assert!(least_squares_solve(&DMatrix::zeros(2, 3), &DVector::zeros(2)).is_err());
        assert!(least_squares_solve(&DMatrix::identity(3, 3), &DVector::zeros(2)).is_err());
    }
}
