//! Dense third-order tensor algebra.
//!
//! Storage layout: a [`Tensor3`] with dims `(I1, I2, I3)` keeps entry
//! `(i, j, k)` at flat offset `i + I1 * (j + I2 * k)`, i.e. the first index
//! varies fastest. Matrices are `nalgebra::DMatrix<f64>` (column-major), so
//! the flat buffer of a tensor is exactly the column-major buffer of its
//! mode-1 unfolding.
//!
//! Unfolding column maps (these make `X_(1) = A (C ⊙ B)ᵀ`, `X_(2) = B (C ⊙ A)ᵀ`
//! and `X_(3) = C (B ⊙ A)ᵀ` hold for `X = [[A, B, C]]`):
//!
//! | mode | shape          | entry `(i, j, k)` lands at |
//! |------|----------------|----------------------------|
//! | 1    | `I1 × I2·I3`   | `(i, j + I2·k)`            |
//! | 2    | `I2 × I1·I3`   | `(j, i + I1·k)`            |
//! | 3    | `I3 × I1·I2`   | `(k, i + I1·j)`            |

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Singular values below `PINV_RCOND * σ_max` are treated as zero.
pub const PINV_RCOND: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    dims: (usize, usize, usize),
    data: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(dims: (usize, usize, usize)) -> Self {
        Self::filled(dims, 0.0)
    }

    pub fn filled(dims: (usize, usize, usize), value: f64) -> Self {
        Tensor3 {
            dims,
            data: vec![value; dims.0 * dims.1 * dims.2],
        }
    }

    pub fn from_vec(dims: (usize, usize, usize), data: Vec<f64>) -> Result<Self> {
        if dims.0 == 0 || dims.1 == 0 || dims.2 == 0 {
            return Err(Error::invalid(format!("tensor dims must be positive, got {dims:?}")));
        }
        if data.len() != dims.0 * dims.1 * dims.2 {
            return Err(Error::dims(format!(
                "{} values for dims {:?}",
                data.len(),
                dims
            )));
        }
        Ok(Tensor3 { dims, data })
    }

    pub fn from_fn(
        dims: (usize, usize, usize),
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Self {
        let mut data = Vec::with_capacity(dims.0 * dims.1 * dims.2);
        for k in 0..dims.2 {
            for j in 0..dims.1 {
                for i in 0..dims.0 {
                    data.push(f(i, j, k));
                }
            }
        }
        Tensor3 { dims, data }
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize, usize) {
        self.dims
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn offset(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims.0 * (j + self.dims.1 * k)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[self.offset(i, j, k)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, value: f64) {
        let o = self.offset(i, j, k);
        self.data[o] = value;
    }

    #[inline]
    pub fn add_at(&mut self, i: usize, j: usize, k: usize, value: f64) {
        let o = self.offset(i, j, k);
        self.data[o] += value;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    /// Mode-3 fiber `t[i, j, :]`.
    pub fn fiber(&self, i: usize, j: usize) -> Vec<f64> {
        (0..self.dims.2).map(|k| self.get(i, j, k)).collect()
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor3 {
        Tensor3 {
            dims: self.dims,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scale(&self, c: f64) -> Tensor3 {
        self.map(|v| c * v)
    }

    pub fn sub(&self, other: &Tensor3) -> Result<Tensor3> {
        check_same_dims(self, other)?;
        Ok(Tensor3 {
            dims: self.dims,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a - b)
                .collect(),
        })
    }
}

fn check_same_dims(a: &Tensor3, b: &Tensor3) -> Result<()> {
    if a.dims != b.dims {
        return Err(Error::dims(format!("{:?} vs {:?}", a.dims, b.dims)));
    }
    Ok(())
}

/// Unfolding mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    One,
    Two,
    Three,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::One, Mode::Two, Mode::Three];

    pub fn from_index(n: usize) -> Result<Mode> {
        match n {
            1 => Ok(Mode::One),
            2 => Ok(Mode::Two),
            3 => Ok(Mode::Three),
            _ => Err(Error::invalid(format!("mode must be 1, 2 or 3, got {n}"))),
        }
    }

    pub fn index(self) -> usize {
        match self {
            Mode::One => 1,
            Mode::Two => 2,
            Mode::Three => 3,
        }
    }

    /// Shape of the unfolding of a tensor with the given dims.
    pub fn unfolded_shape(self, (d1, d2, d3): (usize, usize, usize)) -> (usize, usize) {
        match self {
            Mode::One => (d1, d2 * d3),
            Mode::Two => (d2, d1 * d3),
            Mode::Three => (d3, d1 * d2),
        }
    }
}

/// Elementwise product.
pub fn hadamard(t1: &Tensor3, t2: &Tensor3) -> Result<Tensor3> {
    check_same_dims(t1, t2)?;
    Ok(Tensor3 {
        dims: t1.dims,
        data: t1.data.iter().zip(&t2.data).map(|(a, b)| a * b).collect(),
    })
}

/// Kronecker product; block `(i, j)` of the result is `a[i, j] * b`.
pub fn kronecker(a: &Matrix, b: &Matrix) -> Matrix {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    let mut out = Matrix::zeros(ar * br, ac * bc);
    for j in 0..ac {
        for i in 0..ar {
            let s = a[(i, j)];
            if s == 0.0 {
                continue;
            }
            for q in 0..bc {
                for p in 0..br {
                    out[(i * br + p, j * bc + q)] = s * b[(p, q)];
                }
            }
        }
    }
    out
}

/// Columnwise Kronecker product: column `r` is `a[:, r] ⊗ b[:, r]`, so row
/// `p * b.nrows() + q` holds `a[p, r] * b[q, r]`.
pub fn khatri_rao(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.ncols() != b.ncols() {
        return Err(Error::dims(format!(
            "khatri-rao needs equal column counts, got {} and {}",
            a.ncols(),
            b.ncols()
        )));
    }
    let (ar, br) = (a.nrows(), b.nrows());
    let mut out = Matrix::zeros(ar * br, a.ncols());
    for r in 0..a.ncols() {
        let mut col = out.column_mut(r);
        for p in 0..ar {
            let s = a[(p, r)];
            for q in 0..br {
                col[p * br + q] = s * b[(q, r)];
            }
        }
    }
    Ok(out)
}

pub fn matricize(t: &Tensor3, mode: Mode) -> Matrix {
    let (d1, d2, d3) = t.dims;
    match mode {
        Mode::One => Matrix::from_column_slice(d1, d2 * d3, &t.data),
        Mode::Two => {
            let mut m = Matrix::zeros(d2, d1 * d3);
            for k in 0..d3 {
                for j in 0..d2 {
                    for i in 0..d1 {
                        m[(j, i + d1 * k)] = t.get(i, j, k);
                    }
                }
            }
            m
        }
        Mode::Three => {
            let mut m = Matrix::zeros(d3, d1 * d2);
            for k in 0..d3 {
                for j in 0..d2 {
                    for i in 0..d1 {
                        m[(k, i + d1 * j)] = t.get(i, j, k);
                    }
                }
            }
            m
        }
    }
}

/// Inverse of [`matricize`].
pub fn fold(m: &Matrix, mode: Mode, dims: (usize, usize, usize)) -> Result<Tensor3> {
    let expected = mode.unfolded_shape(dims);
    if m.shape() != expected {
        return Err(Error::dims(format!(
            "mode-{} unfolding of {:?} must be {:?}, got {:?}",
            mode.index(),
            dims,
            expected,
            m.shape()
        )));
    }
    let d1 = dims.0;
    match mode {
        Mode::One => Tensor3::from_vec(dims, m.as_slice().to_vec()),
        Mode::Two => Ok(Tensor3::from_fn(dims, |i, j, k| m[(j, i + d1 * k)])),
        Mode::Three => Ok(Tensor3::from_fn(dims, |i, j, k| m[(k, i + d1 * j)])),
    }
}

/// Column-stacking vectorization.
pub fn vec(m: &Matrix) -> Vector {
    Vector::from_column_slice(m.as_slice())
}

pub fn unvec(v: &Vector, rows: usize, cols: usize) -> Result<Matrix> {
    if v.len() != rows * cols {
        return Err(Error::dims(format!(
            "cannot unvec {} values into {rows}x{cols}",
            v.len()
        )));
    }
    Ok(Matrix::from_column_slice(rows, cols, v.as_slice()))
}

/// CP factor matrices `A (I1×R)`, `B (I2×R)`, `C (I3×R)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorSet {
    pub a: Matrix,
    pub b: Matrix,
    pub c: Matrix,
}

impl FactorSet {
    pub fn new(a: Matrix, b: Matrix, c: Matrix) -> Result<Self> {
        let r = a.ncols();
        if r == 0 || b.ncols() != r || c.ncols() != r {
            return Err(Error::dims(format!(
                "factor column counts {}, {}, {} must be equal and positive",
                a.ncols(),
                b.ncols(),
                c.ncols()
            )));
        }
        Ok(FactorSet { a, b, c })
    }

    pub fn rank(&self) -> usize {
        self.a.ncols()
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.a.nrows(), self.b.nrows(), self.c.nrows())
    }

    pub fn get(&self, mode: Mode) -> &Matrix {
        match mode {
            Mode::One => &self.a,
            Mode::Two => &self.b,
            Mode::Three => &self.c,
        }
    }

    pub fn set(&mut self, mode: Mode, m: Matrix) {
        match mode {
            Mode::One => self.a = m,
            Mode::Two => self.b = m,
            Mode::Three => self.c = m,
        }
    }

    /// Sum of squared Frobenius norms of the three factors.
    pub fn squared_norm(&self) -> f64 {
        self.a.norm_squared() + self.b.norm_squared() + self.c.norm_squared()
    }
}

/// `[[A, B, C]]`: `out[i, j, k] = Σ_r A[i, r] B[j, r] C[k, r]`.
pub fn cp_reconstruct(f: &FactorSet) -> Result<Tensor3> {
    if f.b.ncols() != f.a.ncols() || f.c.ncols() != f.a.ncols() {
        return Err(Error::dims("factor column counts differ".to_string()));
    }
    let dims = f.dims();
    let kr = khatri_rao(&f.c, &f.b)?;
    let x1 = &f.a * kr.transpose();
    Tensor3::from_vec(dims, x1.as_slice().to_vec())
}

/// `‖[[A, B, C]]‖²_F` from the factor Gram matrices, without materializing
/// the tensor.
pub fn cp_squared_norm(a: &Matrix, b: &Matrix, c: &Matrix) -> f64 {
    let ga = a.transpose() * a;
    let gb = b.transpose() * b;
    let gc = c.transpose() * c;
    ga.component_mul(&gb).component_mul(&gc).sum()
}

pub fn frobenius_norm(t: &Tensor3) -> f64 {
    t.data.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Moore-Penrose inverse via SVD, truncating singular values below
/// `PINV_RCOND * σ_max`.
pub fn pseudo_inverse(m: &Matrix) -> Matrix {
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return Matrix::zeros(cols, rows);
    }
    let svd = m.clone().svd(true, true);
    let u = svd.u.as_ref().expect("svd computed with u");
    let v_t = svd.v_t.as_ref().expect("svd computed with v_t");
    let s_max = svd.singular_values.max();
    let cutoff = PINV_RCOND * s_max;
    let mut out = Matrix::zeros(cols, rows);
    if s_max <= 0.0 {
        return out;
    }
    for (idx, &s) in svd.singular_values.iter().enumerate() {
        if s > cutoff {
            // out += v_idx * u_idxᵀ / s
            let v_col = v_t.row(idx).transpose();
            let u_col = u.column(idx);
            out.ger(1.0 / s, &v_col, &u_col, 1.0);
        }
    }
    out
}

/// `m⁺ b` for a symmetric `m`, computed from its eigendecomposition with the
/// same truncation rule as [`pseudo_inverse`] (the singular values of a
/// symmetric matrix are its absolute eigenvalues).
pub fn symmetric_pinv_solve(m: &Matrix, b: &Vector) -> Result<Vector> {
    let n = m.nrows();
    if m.ncols() != n || b.len() != n {
        return Err(Error::dims(format!(
            "symmetric solve needs square matrix and matching rhs, got {:?} and {}",
            m.shape(),
            b.len()
        )));
    }
    if n == 0 {
        return Ok(Vector::zeros(0));
    }
    let eig = SymmetricEigen::new(m.clone());
    let s_max = eig.eigenvalues.amax();
    if s_max <= 0.0 {
        return Ok(Vector::zeros(n));
    }
    let cutoff = PINV_RCOND * s_max;
    let mut coeffs = eig.eigenvectors.tr_mul(b);
    for (c, &lam) in coeffs.iter_mut().zip(eig.eigenvalues.iter()) {
        *c = if lam.abs() > cutoff { *c / lam } else { 0.0 };
    }
    Ok(&eig.eigenvectors * coeffs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Matrix {
        Matrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
    }

    fn random_tensor(rng: &mut ChaCha8Rng, dims: (usize, usize, usize)) -> Tensor3 {
        Tensor3::from_fn(dims, |_, _, _| rng.random_range(-1.0..1.0))
    }

    fn rel(a: &Matrix, b: &Matrix) -> f64 {
        (a - b).norm() / b.norm().max(1e-300)
    }

    #[test]
    fn hadamard_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = random_tensor(&mut rng, (2, 3, 4));
        let ones = Tensor3::filled((2, 3, 4), 1.0);
        assert_eq!(hadamard(&ones, &x).unwrap(), x);
        assert_eq!(
            hadamard(&x, &Tensor3::zeros((2, 3, 4))).unwrap(),
            Tensor3::zeros((2, 3, 4))
        );
        let twos = Tensor3::filled((2, 2, 2), 2.0);
        let threes = Tensor3::filled((2, 2, 2), 3.0);
        assert!(hadamard(&twos, &threes)
            .unwrap()
            .as_slice()
            .iter()
            .all(|&v| v == 6.0));
        assert!(matches!(
            hadamard(&twos, &x),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn kronecker_cases() {
        let b = Matrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let k = kronecker(&Matrix::identity(2, 2), &b);
        let expected = Matrix::from_row_slice(
            4,
            4,
            &[
                1.0, 2.0, 0.0, 0.0, //
                3.0, 4.0, 0.0, 0.0, //
                0.0, 0.0, 1.0, 2.0, //
                0.0, 0.0, 3.0, 4.0,
            ],
        );
        assert_eq!(k, expected);

        let row = Matrix::from_row_slice(1, 2, &[1.0, 2.0]);
        let col = Matrix::from_row_slice(2, 1, &[3.0, 4.0]);
        assert_eq!(
            kronecker(&row, &col),
            Matrix::from_row_slice(2, 2, &[3.0, 6.0, 4.0, 8.0])
        );

        let scalar = Matrix::from_element(1, 1, 2.5);
        assert_eq!(kronecker(&scalar, &b), &b * 2.5);
    }

    #[test]
    fn khatri_rao_cases() {
        let a = Matrix::identity(2, 2);
        let b = Matrix::from_element(2, 2, 1.0);
        let expected =
            Matrix::from_row_slice(4, 2, &[1.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 1.0]);
        assert_eq!(khatri_rao(&a, &b).unwrap(), expected);

        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let u = random_matrix(&mut rng, 3, 1);
        let v = random_matrix(&mut rng, 4, 1);
        assert_eq!(khatri_rao(&u, &v).unwrap(), kronecker(&u, &v));

        let a = random_matrix(&mut rng, 3, 2);
        let b = random_matrix(&mut rng, 3, 2);
        let kr = khatri_rao(&a, &b).unwrap();
        for r in 0..2 {
            let col = kronecker(&a.columns(r, 1).into(), &b.columns(r, 1).into());
            assert!(rel(&kr.columns(r, 1).into(), &col) < 1e-15);
        }
        assert!(khatri_rao(&a, &random_matrix(&mut rng, 3, 3)).is_err());
    }

    #[test]
    fn mode1_unfolding_enumerates_entries_once() {
        let t = Tensor3::from_fn((2, 2, 2), |i, j, k| (1 + i + 2 * j + 4 * k) as f64);
        let m = matricize(&t, Mode::One);
        assert_eq!(m.shape(), (2, 4));
        let mut seen: Vec<f64> = m.iter().copied().collect();
        seen.sort_by(f64::total_cmp);
        assert_eq!(seen, (1..=8).map(f64::from).collect::<Vec<_>>());
        // column j + I2 k holds fiber t[:, j, k]
        assert_eq!(m[(1, 1 + 2)], t.get(1, 1, 1));
    }

    #[test]
    fn fold_round_trips_and_rejects_bad_shapes() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let t = random_tensor(&mut rng, (3, 4, 5));
        for mode in Mode::ALL {
            assert_eq!(fold(&matricize(&t, mode), mode, t.dims()).unwrap(), t);
        }
        let z = fold(&Matrix::zeros(4, 15), Mode::Two, (3, 4, 5)).unwrap();
        assert_eq!(z, Tensor3::zeros((3, 4, 5)));
        assert!(fold(&Matrix::zeros(4, 14), Mode::Two, (3, 4, 5)).is_err());
        assert!(Mode::from_index(4).is_err());
        assert!(Mode::from_index(0).is_err());
    }

    fn brute_reconstruct(f: &FactorSet) -> Tensor3 {
        Tensor3::from_fn(f.dims(), |i, j, k| {
            (0..f.rank())
                .map(|r| f.a[(i, r)] * f.b[(j, r)] * f.c[(k, r)])
                .sum()
        })
    }

    #[test]
    fn cp_reconstruct_cases() {
        let ones = |n| Matrix::from_element(n, 1, 1.0);
        let f = FactorSet::new(ones(2), ones(3), ones(4)).unwrap();
        assert_eq!(cp_reconstruct(&f).unwrap(), Tensor3::filled((2, 3, 4), 1.0));

        let f = FactorSet::new(
            Matrix::from_column_slice(2, 1, &[1.0, 2.0]),
            Matrix::from_column_slice(2, 1, &[1.0, 0.0]),
            Matrix::from_column_slice(1, 1, &[3.0]),
        )
        .unwrap();
        let t = cp_reconstruct(&f).unwrap();
        assert_eq!(t.get(0, 0, 0), 3.0);
        assert_eq!(t.get(1, 0, 0), 6.0);
        assert_eq!(t.get(0, 1, 0), 0.0);
        assert_eq!(t.get(1, 1, 0), 0.0);

        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let f = FactorSet::new(
            random_matrix(&mut rng, 4, 3),
            random_matrix(&mut rng, 4, 3),
            random_matrix(&mut rng, 6, 3),
        )
        .unwrap();
        let fast = cp_reconstruct(&f).unwrap();
        let slow = brute_reconstruct(&f);
        let err = frobenius_norm(&fast.sub(&slow).unwrap()) / frobenius_norm(&slow);
        assert!(err < 1e-14);
        let gram = cp_squared_norm(&f.a, &f.b, &f.c);
        assert!((gram - frobenius_norm(&slow).powi(2)).abs() < 1e-12 * gram);
        assert!(FactorSet::new(
            random_matrix(&mut rng, 4, 3),
            random_matrix(&mut rng, 4, 2),
            random_matrix(&mut rng, 6, 3)
        )
        .is_err());
    }

    #[test]
    fn vec_cases() {
        let m = Matrix::from_row_slice(2, 2, &[1.0, 3.0, 2.0, 4.0]);
        assert_eq!(vec(&m).as_slice(), &[1.0, 2.0, 3.0, 4.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = random_matrix(&mut rng, 4, 5);
        assert_eq!(unvec(&vec(&m), 4, 5).unwrap(), m);
        assert!(unvec(&vec(&m), 3, 5).is_err());
    }

    #[test]
    fn frobenius_cases() {
        assert_eq!(frobenius_norm(&Tensor3::zeros((2, 2, 2))), 0.0);
        assert_eq!(frobenius_norm(&Tensor3::filled((2, 2, 2), 1.0)), 8f64.sqrt());
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let t = random_tensor(&mut rng, (3, 4, 5));
        let mut acc = 0.0;
        for k in 0..5 {
            for j in 0..4 {
                for i in 0..3 {
                    acc += t.get(i, j, k) * t.get(i, j, k);
                }
            }
        }
        assert!((frobenius_norm(&t) - acc.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn pseudo_inverse_cases() {
        assert_eq!(pseudo_inverse(&Matrix::identity(3, 3)), Matrix::identity(3, 3));
        let d = Matrix::from_diagonal(&Vector::from_vec(vec![2.0, 0.0]));
        let p = pseudo_inverse(&d);
        assert!(rel(&p, &Matrix::from_diagonal(&Vector::from_vec(vec![0.5, 0.0]))) < 1e-15);
        assert_eq!(pseudo_inverse(&Matrix::zeros(2, 3)), Matrix::zeros(3, 2));

        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let m = random_matrix(&mut rng, 6, 2) * random_matrix(&mut rng, 2, 4);
        let p = pseudo_inverse(&m);
        let tol = 1e-8 * m.norm();
        assert!((&m * &p * &m - &m).norm() <= tol);
        assert!((&p * &m * &p - &p).norm() <= 1e-8 * p.norm());
        assert!(((&m * &p).transpose() - &m * &p).norm() <= 1e-8);
        assert!(((&p * &m).transpose() - &p * &m).norm() <= 1e-8);

        let sq = random_matrix(&mut rng, 4, 4);
        let inv = sq.clone().try_inverse().unwrap();
        assert!(rel(&pseudo_inverse(&sq), &inv) < 1e-10);
    }

    #[test]
    fn symmetric_solve_matches_svd_pseudo_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let g = random_matrix(&mut rng, 7, 3);
        // rank-deficient PSD
        let s = &g * g.transpose();
        let b = Vector::from_fn(7, |_, _| rng.random_range(-1.0..1.0));
        let via_eig = symmetric_pinv_solve(&s, &b).unwrap();
        let via_svd = pseudo_inverse(&s) * &b;
        assert!((via_eig - &via_svd).norm() <= 1e-9 * via_svd.norm().max(1.0));
        assert!(symmetric_pinv_solve(&s, &Vector::zeros(3)).is_err());
    }
}
