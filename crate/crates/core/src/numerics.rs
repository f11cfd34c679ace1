//! Dense linear algebra and seeded sampling used by every other module.
//!
//! Decompositions are thin wrappers around `nalgebra` that add two things the
//! estimators rely on: descending order of the spectrum and a fixed sign for
//! every singular/eigen vector (largest-magnitude entry positive, first index
//! wins on ties). With those two rules the outputs are deterministic functions
//! of the input bits.

use nalgebra::DMatrix;
use rand::RngCore;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, FsirError, Result};

pub type Matrix = DMatrix<f64>;

/// Reproducible random stream identified by `(seed, stream_id)`.
///
/// Two instances built from the same pair produce the same draws no matter
/// which thread owns them or in which order they are consumed relative to
/// other streams.
#[derive(Debug, Clone)]
pub struct SeededRng {
    seed: u64,
    stream_id: u64,
    inner: ChaCha8Rng,
}

impl SeededRng {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream_id);
        Self {
            seed,
            stream_id,
            inner,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.inner)
    }

    /// Uniform draw on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        // 53 random mantissa bits
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

impl RngCore for SeededRng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes an ordered tuple of indices (domain tag, replication, client, ...)
/// into a single stream id.
pub fn stream_id(parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(0x243F_6A88_85A3_08D3, |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

fn check_finite(m: &Matrix, what: &str) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        invalid(format!("{what}: matrix has non-finite entries"))
    }
}

/// Flips `col` so that its largest-magnitude entry is positive. Returns the
/// sign that was applied.
fn fix_sign(col: &mut [f64]) -> f64 {
    let mut best = 0usize;
    let mut best_abs = -1.0;
    for (i, v) in col.iter().enumerate() {
        if v.abs() > best_abs {
            best_abs = v.abs();
            best = i;
        }
    }
    if col.get(best).is_some_and(|v| *v < 0.0) {
        col.iter_mut().for_each(|v| *v = -*v);
        -1.0
    } else {
        1.0
    }
}

#[derive(Debug, Clone)]
pub struct Svd {
    /// `rows × min(rows, cols)`, orthonormal columns.
    pub u: Matrix,
    /// Descending, non-negative.
    pub singular_values: Vec<f64>,
    /// `cols × min(rows, cols)`, orthonormal columns.
    pub v: Matrix,
}

impl Svd {
    pub fn reconstruct(&self) -> Matrix {
        let s = Matrix::from_diagonal(&nalgebra::DVector::from_vec(self.singular_values.clone()));
        &self.u * s * self.v.transpose()
    }
}

/// Thin SVD with descending singular values and the fixed sign convention.
pub fn svd(m: &Matrix) -> Result<Svd> {
    check_finite(m, "svd")?;
    if m.nrows() == 0 || m.ncols() == 0 {
        return invalid("svd: empty matrix");
    }
    let dec = m.clone().svd(true, true);
    let u = dec.u.expect("left vectors requested");
    let v_t = dec.v_t.expect("right vectors requested");
    let k = dec.singular_values.len();

    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| {
        dec.singular_values[b]
            .total_cmp(&dec.singular_values[a])
            .then(a.cmp(&b))
    });

    let mut out_u = Matrix::zeros(m.nrows(), k);
    let mut out_v = Matrix::zeros(m.ncols(), k);
    let mut values = Vec::with_capacity(k);
    for (dst, &src) in order.iter().enumerate() {
        let mut col: Vec<f64> = u.column(src).iter().copied().collect();
        let sign = fix_sign(&mut col);
        out_u.column_mut(dst).copy_from_slice(&col);
        for j in 0..m.ncols() {
            out_v[(j, dst)] = sign * v_t[(src, j)];
        }
        values.push(dec.singular_values[src].max(0.0));
    }
    Ok(Svd {
        u: out_u,
        singular_values: values,
        v: out_v,
    })
}

/// Full `rows × rows` orthonormal left basis of `m` together with all `rows`
/// singular values (zero beyond `min(rows, cols)`), in descending order.
///
/// When `m` has fewer columns than rows the thin basis is completed by taking
/// the SVD of `m` padded with zero columns.
pub fn full_left_basis(m: &Matrix) -> Result<(Matrix, Vec<f64>)> {
    let p = m.nrows();
    if m.ncols() >= p {
        let dec = svd(m)?;
        return Ok((dec.u, dec.singular_values));
    }
    let mut padded = Matrix::zeros(p, p);
    padded.columns_mut(0, m.ncols()).copy_from(m);
    let dec = svd(&padded)?;
    let mut values = dec.singular_values;
    // padded columns contribute exact zeros; clean rounding residue
    for v in values.iter_mut().skip(m.ncols()) {
        *v = 0.0;
    }
    Ok((dec.u, values))
}

#[derive(Debug, Clone)]
pub struct SymEig {
    /// Descending.
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Matrix,
}

/// Symmetric eigendecomposition of `(m + mᵀ)/2`.
pub fn sym_eig(m: &Matrix) -> Result<SymEig> {
    if !m.is_square() {
        return invalid(format!(
            "sym_eig: matrix must be square, got {}x{}",
            m.nrows(),
            m.ncols()
        ));
    }
    check_finite(m, "sym_eig")?;
    let sym = (m + m.transpose()) * 0.5;
    let dec = sym.symmetric_eigen();
    let p = m.nrows();
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| {
        dec.eigenvalues[b]
            .total_cmp(&dec.eigenvalues[a])
            .then(a.cmp(&b))
    });
    let mut vectors = Matrix::zeros(p, p);
    let mut values = Vec::with_capacity(p);
    for (dst, &src) in order.iter().enumerate() {
        let mut col: Vec<f64> = dec.eigenvectors.column(src).iter().copied().collect();
        fix_sign(&mut col);
        vectors.column_mut(dst).copy_from_slice(&col);
        values.push(dec.eigenvalues[src]);
    }
    Ok(SymEig {
        eigenvalues: values,
        eigenvectors: vectors,
    })
}

/// Number of decade steps in the ridge ladder, from `1e-10` to `1e-2` times
/// the mean diagonal.
const RIDGE_STEPS: i32 = 9;

/// Solves `(a + ridge·I) x = b` by Cholesky.
///
/// If the factorization fails the ridge is escalated by decades from
/// `1e-10·tr(a)/p` up to `1e-2·tr(a)/p`; past that a [`FsirError::Singular`]
/// carrying the last ridge is returned.
pub fn solve_spd(a: &Matrix, b: &Matrix, ridge: f64) -> Result<Matrix> {
    if !a.is_square() {
        return invalid("solve_spd: coefficient matrix must be square");
    }
    if b.nrows() != a.nrows() {
        return invalid(format!(
            "solve_spd: right-hand side has {} rows, expected {}",
            b.nrows(),
            a.nrows()
        ));
    }
    if !(ridge >= 0.0) {
        return invalid("solve_spd: ridge must be non-negative");
    }
    check_finite(a, "solve_spd")?;
    check_finite(b, "solve_spd")?;

    let p = a.nrows();
    let sym = (a + a.transpose()) * 0.5;
    let attempt = |r: f64| -> Option<Matrix> {
        let shifted = &sym + Matrix::identity(p, p) * r;
        shifted.cholesky().map(|c| c.solve(b))
    };
    if let Some(x) = attempt(ridge) {
        return Ok(x);
    }

    let scale = {
        let t = a.trace() / p as f64;
        if t > 0.0 {
            t
        } else {
            1.0
        }
    };
    let mut last = ridge;
    for k in 0..RIDGE_STEPS {
        let r = ridge + scale * 10f64.powi(k - 10);
        last = r;
        if let Some(x) = attempt(r) {
            log::debug!("solve_spd: escalated ridge to {r:e}");
            return Ok(x);
        }
    }
    Err(FsirError::Singular { ridge: last })
}

/// `rows × cols` matrix of i.i.d. `N(mean, sd²)` draws, filled row by row.
pub fn gaussian_matrix(
    rng: &mut SeededRng,
    rows: usize,
    cols: usize,
    mean: f64,
    sd: f64,
) -> Result<Matrix> {
    if !(sd > 0.0) || !sd.is_finite() {
        return invalid(format!("gaussian_matrix: sd must be positive, got {sd}"));
    }
    let mut out = Matrix::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            out[(i, j)] = mean + sd * rng.standard_normal();
        }
    }
    Ok(out)
}

/// Symmetric `p × p` matrix whose upper triangle (diagonal included) is
/// i.i.d. `N(0, sd²)` and whose lower triangle mirrors it.
pub fn symmetric_gaussian(rng: &mut SeededRng, p: usize, sd: f64) -> Result<Matrix> {
    if !(sd > 0.0) || !sd.is_finite() {
        return invalid(format!("symmetric_gaussian: sd must be positive, got {sd}"));
    }
    let mut out = Matrix::zeros(p, p);
    for i in 0..p {
        for j in i..p {
            let v = sd * rng.standard_normal();
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    Ok(out)
}

/// Largest singular value.
pub fn spectral_norm(m: &Matrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone()
        .singular_values()
        .iter()
        .fold(0.0f64, |acc, v| acc.max(*v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn random_matrix(seed: u64, rows: usize, cols: usize) -> Matrix {
        let mut rng = SeededRng::new(seed, 0);
        gaussian_matrix(&mut rng, rows, cols, 0.0, 1.0).unwrap()
    }

    #[test]
    fn svd_of_identity() {
        let dec = svd(&Matrix::identity(3, 3)).unwrap();
        assert_eq!(dec.singular_values, vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn svd_of_diagonal_has_identity_left_vectors() {
        let m = Matrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, 2.0]);
        let dec = svd(&m).unwrap();
        assert_abs_diff_eq!(dec.singular_values[0], 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(dec.singular_values[1], 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(dec.u, Matrix::identity(2, 2), epsilon = 1e-14);
    }

    #[test]
    fn svd_reconstructs_random_matrix() {
        let m = random_matrix(7, 10, 8);
        let dec = svd(&m).unwrap();
        assert_eq!(dec.u.shape(), (10, 8));
        let err = (dec.reconstruct() - &m).norm();
        assert!(err <= 1e-8 * m.norm(), "reconstruction error {err}");
        assert!(dec
            .singular_values
            .windows(2)
            .all(|w| w[0] >= w[1]));
        let gram = dec.u.transpose() * &dec.u;
        assert_abs_diff_eq!(gram, Matrix::identity(8, 8), epsilon = 1e-12);
    }

    #[test]
    fn svd_rejects_non_finite() {
        let mut m = Matrix::identity(2, 2);
        m[(0, 1)] = f64::NAN;
        assert!(matches!(svd(&m), Err(FsirError::InvalidInput(_))));
    }

    #[test]
    fn svd_sign_convention() {
        let m = random_matrix(3, 6, 4);
        let dec = svd(&m).unwrap();
        for j in 0..dec.u.ncols() {
            let col = dec.u.column(j);
            let max = col.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            let first = col.iter().find(|v| v.abs() == max).unwrap();
            assert!(*first > 0.0);
        }
    }

    #[test]
    fn full_basis_completes_thin_svd() {
        let m = random_matrix(11, 7, 3);
        let (basis, values) = full_left_basis(&m).unwrap();
        assert_eq!(basis.shape(), (7, 7));
        assert_eq!(values.len(), 7);
        assert!(values[3..].iter().all(|v| *v == 0.0));
        assert_abs_diff_eq!(basis.transpose() * &basis, Matrix::identity(7, 7), epsilon = 1e-12);
        let thin = svd(&m).unwrap();
        for j in 0..3 {
            let dot = basis.column(j).dot(&thin.u.column(j));
            assert_abs_diff_eq!(dot.abs(), 1.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn eig_of_identity_and_classic_pair() {
        let dec = sym_eig(&Matrix::identity(2, 2)).unwrap();
        assert_eq!(dec.eigenvalues, vec![1.0, 1.0]);

        let m = Matrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let dec = sym_eig(&m).unwrap();
        assert_abs_diff_eq!(dec.eigenvalues[0], 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(dec.eigenvalues[1], 1.0, epsilon = 1e-14);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert_abs_diff_eq!(dec.eigenvectors[(0, 0)], h, epsilon = 1e-14);
        assert_abs_diff_eq!(dec.eigenvectors[(1, 0)], h, epsilon = 1e-14);
        assert_abs_diff_eq!(dec.eigenvectors[(0, 1)], h, epsilon = 1e-14);
        assert_abs_diff_eq!(dec.eigenvectors[(1, 1)], -h, epsilon = 1e-14);
    }

    #[test]
    fn eig_residuals_random_symmetric() {
        let g = random_matrix(5, 10, 10);
        let a = &g + g.transpose();
        let dec = sym_eig(&a).unwrap();
        let norm2 = spectral_norm(&a);
        for j in 0..10 {
            let v = dec.eigenvectors.column(j);
            let r = &a * v - v * dec.eigenvalues[j];
            assert!(r.norm() <= 1e-8 * norm2);
        }
        assert_abs_diff_eq!(
            dec.eigenvectors.transpose() * &dec.eigenvectors,
            Matrix::identity(10, 10),
            epsilon = 1e-12
        );
    }

    #[test]
    fn eig_rejects_non_square() {
        assert!(sym_eig(&Matrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn solve_trivial_cases() {
        let b = Matrix::from_row_slice(3, 2, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(solve_spd(&Matrix::identity(3, 3), &b, 0.0).unwrap(), b);

        let a = Matrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 4.0]);
        let b = Matrix::from_column_slice(2, 1, &[2.0, 4.0]);
        let x = solve_spd(&a, &b, 0.0).unwrap();
        assert_abs_diff_eq!(x, Matrix::from_column_slice(2, 1, &[1.0, 1.0]), epsilon = 1e-15);
    }

    #[test]
    fn solve_random_spd_residual() {
        let g = random_matrix(9, 10, 10);
        let a = &g * g.transpose() + Matrix::identity(10, 10);
        let b = random_matrix(10, 10, 3);
        let x = solve_spd(&a, &b, 0.0).unwrap();
        assert!((&a * &x - &b).norm() <= 1e-8 * b.norm());
    }

    #[test]
    fn solve_escalates_then_fails() {
        // PSD but singular: the ladder rescues it
        let a = Matrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let b = Matrix::from_column_slice(2, 1, &[1.0, 1.0]);
        assert!(solve_spd(&a, &b, 0.0).is_ok());

        // clearly indefinite: nothing on the ladder helps
        let a = Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        match solve_spd(&a, &b, 0.0) {
            Err(FsirError::Singular { ridge }) => assert!(ridge > 0.0),
            other => panic!("expected Singular, got {other:?}"),
        }
    }

    #[test]
    fn gaussian_matrix_moments() {
        let mut rng = SeededRng::new(42, 1);
        let n = 100_000;
        let m = gaussian_matrix(&mut rng, n, 1, 0.0, 1.0).unwrap();
        let mean = m.mean();
        assert!(mean.abs() < 4.0 / (n as f64).sqrt());

        let m = gaussian_matrix(&mut rng, n, 1, 0.0, 2.0).unwrap();
        let mean = m.mean();
        let var = m.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((var - 4.0).abs() < 0.05 * 4.0, "variance {var}");
    }

    #[test]
    fn gaussian_matrix_is_deterministic() {
        let a = gaussian_matrix(&mut SeededRng::new(1, 2), 4, 5, 0.0, 1.0).unwrap();
        let b = gaussian_matrix(&mut SeededRng::new(1, 2), 4, 5, 0.0, 1.0).unwrap();
        let c = gaussian_matrix(&mut SeededRng::new(1, 3), 4, 5, 0.0, 1.0).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn samplers_reject_bad_sd() {
        let mut rng = SeededRng::new(0, 0);
        assert!(gaussian_matrix(&mut rng, 2, 2, 0.0, 0.0).is_err());
        assert!(symmetric_gaussian(&mut rng, 2, -1.0).is_err());
    }

    #[test]
    fn symmetric_gaussian_structure() {
        let mut rng = SeededRng::new(8, 0);
        let a = symmetric_gaussian(&mut rng, 6, 1.5).unwrap();
        assert_eq!(a, a.transpose());
        let s = symmetric_gaussian(&mut rng, 1, 1.0).unwrap();
        assert_eq!(s.shape(), (1, 1));
    }

    #[test]
    fn symmetric_gaussian_upper_variance() {
        let mut rng = SeededRng::new(21, 0);
        let sd = 0.7;
        let mut sum = 0.0;
        let mut sq = 0.0;
        let mut count = 0.0;
        for _ in 0..4000 {
            let a = symmetric_gaussian(&mut rng, 5, sd).unwrap();
            for i in 0..5 {
                for j in i..5 {
                    sum += a[(i, j)];
                    sq += a[(i, j)] * a[(i, j)];
                    count += 1.0;
                }
            }
        }
        let mean = sum / count;
        let var = sq / count - mean * mean;
        assert!((var - sd * sd).abs() < 0.05 * sd * sd);
    }

    #[test]
    fn stream_ids_differ_by_position() {
        assert_ne!(stream_id(&[1, 2]), stream_id(&[2, 1]));
        assert_eq!(stream_id(&[4, 5, 6]), stream_id(&[4, 5, 6]));
    }
}
