//! Context-regularized CP completion by alternating least squares.
//!
//! Objective over factors `A (I1×R)`, `B (I2×R)`, `C (I3×R)`:
//!
//! ```text
//! ‖W ⊛ (Y − [[A,B,C]])‖² + λ(‖A‖² + ‖B‖² + ‖C‖²)
//!   + β(‖[[UA,B,C]]‖² + ‖[[A,UB,C]]‖² + ‖[[A,B,T_o C]]‖²)
//! ```
//!
//! Each factor update solves the normal equations `Δ vec(F) = rhs` with
//! `vec` stacking columns (entry `(i, r)` at `i + I·r`), so `K ⊗ S` acts with
//! `K` on the rank index and `S` on the row index. For mode `n` with the
//! other two factors fixed:
//!
//! ```text
//! Δ = blockdiag_i(Σ_c W[i,c] ψ_c ψ_cᵀ) + λI + β(side ⊗ I + ΨᵀΨ ⊗ S)
//! ```
//!
//! | mode | Ψ      | side = ΦᵀΦ + ΓᵀΓ                     | S         |
//! |------|--------|---------------------------------------|-----------|
//! | A    | C ⊙ B  | (C ⊙ UB)ᵀ(C ⊙ UB) + (T_oC ⊙ B)ᵀ(…)     | UᵀU       |
//! | B    | C ⊙ A  | (C ⊙ UA)ᵀ(C ⊙ UA) + (T_oC ⊙ A)ᵀ(…)     | UᵀU       |
//! | C    | B ⊙ A  | (B ⊙ UA)ᵀ(B ⊙ UA) + (UB ⊙ A)ᵀ(…)       | T_oᵀT_o   |
//!
//! Khatri-Rao Grams are formed as Hadamard products of factor Grams.
//!
//! With `literal_equations` the system is instead
//! `blockdiag + λ((I_R + side) ⊗ I) + β(ΨᵀΨ ⊗ S)` with `S = UᵀU` for A and B
//! and `T_oᵀT_o` for C. The objective trace still reports the expression
//! above, which that system does not minimize, so it may increase.

use std::time::Instant;

use nalgebra::linalg::{Cholesky, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pipeline::mask::MaskTensor;
use crate::tensor::{cp_reconstruct, cp_squared_norm, symmetric_pinv_solve, FactorSet, Matrix, Mode, Tensor3, Vector, PINV_RCOND};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub rank: usize,
    pub lambda: f64,
    pub beta: f64,
    pub tol: f64,
    pub max_iters: usize,
    pub seed: u64,
    pub literal_equations: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            rank: 3,
            lambda: 0.1,
            beta: 0.1,
            tol: 1e-6,
            max_iters: 200,
            seed: 0,
            literal_equations: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rank == 0 {
            return Err(Error::invalid("rank must be positive"));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) || !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::invalid("lambda and beta must be finite and non-negative"));
        }
        if !(self.tol > 0.0) {
            return Err(Error::invalid("tol must be positive"));
        }
        if self.max_iters == 0 {
            return Err(Error::invalid("max_iters must be positive"));
        }
        Ok(())
    }
}

/// Observed tensor, mask, context matrices and solver settings.
#[derive(Debug, Clone)]
pub struct CompletionProblem {
    y: Tensor3,
    w: MaskTensor,
    u: Matrix,
    t_o: Matrix,
    utu: Matrix,
    tot: Matrix,
    pub config: SolverConfig,
}

impl CompletionProblem {
    /// `y` is projected onto the mask, so values at missing entries are
    /// never read.
    pub fn new(y: &Tensor3, w: &MaskTensor, u: &Matrix, t_o: &Matrix, config: SolverConfig) -> Result<Self> {
        config.validate()?;
        let (d1, d2, d3) = y.dims();
        if w.dims() != y.dims() {
            return Err(Error::dims(format!("mask {:?} vs tensor {:?}", w.dims(), y.dims())));
        }
        if d1 != d2 {
            return Err(Error::dims(format!("modes 1 and 2 must have equal size, got {d1} and {d2}")));
        }
        if u.shape() != (d1, d1) {
            return Err(Error::dims(format!("U is {:?}, expected {d1}x{d1}", u.shape())));
        }
        if t_o.shape() != (d3, d3) {
            return Err(Error::dims(format!("T_o is {:?}, expected {d3}x{d3}", t_o.shape())));
        }
        Ok(CompletionProblem {
            y: w.apply(y)?,
            w: w.clone(),
            u: u.clone(),
            t_o: t_o.clone(),
            utu: u.tr_mul(u),
            tot: t_o.tr_mul(t_o),
            config,
        })
    }

    /// Identity context matrices; meant for `beta = 0`.
    pub fn without_context(y: &Tensor3, w: &MaskTensor, config: SolverConfig) -> Result<Self> {
        let (d1, _, d3) = y.dims();
        Self::new(y, w, &Matrix::identity(d1, d1), &Matrix::identity(d3, d3), config)
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.y.dims()
    }

    pub fn observed(&self) -> &Tensor3 {
        &self.y
    }

    pub fn mask(&self) -> &MaskTensor {
        &self.w
    }

    pub fn urban(&self) -> &Matrix {
        &self.u
    }

    pub fn temporal(&self) -> &Matrix {
        &self.t_o
    }

    fn with_beta(&self, beta: f64) -> Self {
        let mut p = self.clone();
        p.config.beta = beta;
        p
    }

    fn check_factors(&self, f: &FactorSet) -> Result<()> {
        if f.dims() != self.dims() {
            return Err(Error::dims(format!(
                "factor rows {:?} vs tensor {:?}",
                f.dims(),
                self.dims()
            )));
        }
        if f.b.ncols() != f.rank() || f.c.ncols() != f.rank() {
            return Err(Error::dims("factor column counts differ"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    #[serde(skip)]
    pub factors: FactorSet,
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub wall_time_seconds: f64,
}

/// Visits every observed entry as `(i, j, k, y)`.
fn for_each_observed(p: &CompletionProblem, mut f: impl FnMut(usize, usize, usize, f64)) {
    let (d1, d2, d3) = p.dims();
    let (w, y) = (p.w.as_tensor().as_slice(), p.y.as_slice());
    let mut off = 0;
    for k in 0..d3 {
        for j in 0..d2 {
            for i in 0..d1 {
                if w[off] != 0.0 {
                    f(i, j, k, y[off]);
                }
                off += 1;
            }
        }
    }
}

fn masked_residual(f: &FactorSet, p: &CompletionProblem) -> f64 {
    let r = f.rank();
    let mut sum = 0.0;
    for_each_observed(p, |i, j, k, y| {
        let x: f64 = (0..r).map(|q| f.a[(i, q)] * f.b[(j, q)] * f.c[(k, q)]).sum();
        sum += (y - x).powi(2);
    });
    sum
}

fn context_penalty(f: &FactorSet, p: &CompletionProblem) -> f64 {
    cp_squared_norm(&(&p.u * &f.a), &f.b, &f.c)
        + cp_squared_norm(&f.a, &(&p.u * &f.b), &f.c)
        + cp_squared_norm(&f.a, &f.b, &(&p.t_o * &f.c))
}

fn objective_with_beta(f: &FactorSet, p: &CompletionProblem, beta: f64) -> Result<f64> {
    p.check_factors(f)?;
    let mut v = masked_residual(f, p) + p.config.lambda * f.squared_norm();
    if beta != 0.0 {
        v += beta * context_penalty(f, p);
    }
    Ok(v)
}

pub fn objective(f: &FactorSet, p: &CompletionProblem) -> Result<f64> {
    objective_with_beta(f, p, p.config.beta)
}

/// The objective with `β = 0`.
pub fn baseline_objective(f: &FactorSet, p: &CompletionProblem) -> Result<f64> {
    objective_with_beta(f, p, 0.0)
}

/// Khatri-Rao row of the two fixed factors for entry `(i, j, k)`, and the
/// row of the solved factor it belongs to.
#[inline]
fn design_row(mode: Mode, f: &FactorSet, (i, j, k): (usize, usize, usize), out: &mut [f64]) -> usize {
    let (x, y, row) = match mode {
        Mode::One => (&f.b, j, (&f.c, k, i)),
        Mode::Two => (&f.a, i, (&f.c, k, j)),
        Mode::Three => (&f.a, i, (&f.b, j, k)),
    };
    let (z, zi, row) = row;
    for (q, o) in out.iter_mut().enumerate() {
        *o = x[(y, q)] * z[(zi, q)];
    }
    row
}

/// Pieces of the mode-`n` normal equations.
struct ModeSystem {
    rows: usize,
    rank: usize,
    /// `rows` blocks of `R×R`, row-major within each block.
    masked: Vec<f64>,
    rhs: Matrix,
    psi_gram: Matrix,
    side: Matrix,
}

fn gram(m: &Matrix) -> Matrix {
    m.tr_mul(m)
}

fn mode_system(mode: Mode, f: &FactorSet, p: &CompletionProblem) -> ModeSystem {
    let r = f.rank();
    let rows = f.get(mode).nrows();
    let mut masked = vec![0.0; rows * r * r];
    let mut rhs = Matrix::zeros(rows, r);
    let mut v = vec![0.0; r];
    for_each_observed(p, |i, j, k, y| {
        let row = design_row(mode, f, (i, j, k), &mut v);
        let block = &mut masked[row * r * r..(row + 1) * r * r];
        for a in 0..r {
            for b in 0..r {
                block[a * r + b] += v[a] * v[b];
            }
            rhs[(row, a)] += y * v[a];
        }
    });
    let (ga, gb, gc) = (gram(&f.a), gram(&f.b), gram(&f.c));
    let ua = || gram(&(&p.u * &f.a));
    let ub = || gram(&(&p.u * &f.b));
    let tc = || gram(&(&p.t_o * &f.c));
    let (psi_gram, side) = match mode {
        Mode::One => (gc.component_mul(&gb), gc.component_mul(&ub()) + tc().component_mul(&gb)),
        Mode::Two => (gc.component_mul(&ga), gc.component_mul(&ua()) + tc().component_mul(&ga)),
        Mode::Three => (gb.component_mul(&ga), gb.component_mul(&ua()) + ub().component_mul(&ga)),
    };
    ModeSystem {
        rows,
        rank: r,
        masked,
        rhs,
        psi_gram,
        side,
    }
}

fn coupling(mode: Mode, p: &CompletionProblem) -> &Matrix {
    match mode {
        Mode::One | Mode::Two => &p.utu,
        Mode::Three => &p.tot,
    }
}

/// The `R×R` term that multiplies `I_rows` in `Δ`.
fn rank_term(sys: &ModeSystem, p: &CompletionProblem) -> Matrix {
    let (lambda, beta) = (p.config.lambda, p.config.beta);
    let eye = Matrix::identity(sys.rank, sys.rank);
    if p.config.literal_equations {
        (eye + &sys.side) * lambda
    } else {
        eye * lambda + &sys.side * beta
    }
}

/// Dense `Δ` for mode `n`, indexed by `i + rows·r`.
fn assemble_delta(mode: Mode, sys: &ModeSystem, p: &CompletionProblem) -> Matrix {
    let (n, r) = (sys.rows, sys.rank);
    let mut delta = Matrix::zeros(n * r, n * r);
    let k = rank_term(sys, p);
    for i in 0..n {
        let block = &sys.masked[i * r * r..(i + 1) * r * r];
        for a in 0..r {
            for b in 0..r {
                delta[(i + n * a, i + n * b)] += block[a * r + b] + k[(a, b)];
            }
        }
    }
    let beta = p.config.beta;
    if beta != 0.0 {
        let s = coupling(mode, p);
        for a in 0..r {
            for b in 0..r {
                let c = beta * sys.psi_gram[(a, b)];
                if c == 0.0 {
                    continue;
                }
                let mut view = delta.view_mut((n * a, n * b), (n, n));
                view.zip_apply(s, |d, sv| *d += c * sv);
            }
        }
    }
    delta
}

/// Normal-equation matrix and right-hand side of one factor update.
pub fn normal_equations(mode: Mode, f: &FactorSet, p: &CompletionProblem) -> Result<(Matrix, Vector)> {
    p.check_factors(f)?;
    let sys = mode_system(mode, f, p);
    let delta = assemble_delta(mode, &sys, p);
    Ok((delta, Vector::from_column_slice(sys.rhs.as_slice())))
}

/// `Δ⁺ b`. When every eigenvalue of `Δ` is provably at least `floor` and
/// `floor` clears the truncation cutoff, `Δ` is invertible with nothing to
/// truncate and a Cholesky solve gives the same vector.
fn pinv_solve_psd(delta: &Matrix, b: &Vector, floor: f64) -> Result<Vector> {
    let gershgorin = delta
        .row_iter()
        .map(|row| row.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    if floor > 0.0 && floor > PINV_RCOND * gershgorin {
        if let Some(ch) = Cholesky::new(delta.clone()) {
            return Ok(ch.solve(b));
        }
    }
    symmetric_pinv_solve(delta, b)
}

/// Block-diagonal `Δ` (no coupling across rows): per-row solves sharing the
/// global truncation cutoff, identical to the pseudo-inverse of the whole.
fn solve_blocks(sys: &ModeSystem, k: &Matrix) -> Matrix {
    let (n, r) = (sys.rows, sys.rank);
    let eigs: Vec<SymmetricEigen<f64, nalgebra::Dyn>> = (0..n)
        .map(|i| {
            let block = Matrix::from_row_slice(r, r, &sys.masked[i * r * r..(i + 1) * r * r]) + k;
            SymmetricEigen::new(block)
        })
        .collect();
    let s_max = eigs.iter().map(|e| e.eigenvalues.amax()).fold(0.0, f64::max);
    let mut out = Matrix::zeros(n, r);
    if s_max <= 0.0 {
        return out;
    }
    let cutoff = PINV_RCOND * s_max;
    for (i, e) in eigs.iter().enumerate() {
        let b = sys.rhs.row(i).transpose();
        let mut coeffs = e.eigenvectors.tr_mul(&b);
        for (c, &lam) in coeffs.iter_mut().zip(e.eigenvalues.iter()) {
            *c = if lam.abs() > cutoff { *c / lam } else { 0.0 };
        }
        out.set_row(i, &(&e.eigenvectors * coeffs).transpose());
    }
    out
}

/// New value of the mode-`n` factor with the other two held fixed.
pub fn solve_factor(mode: Mode, f: &FactorSet, p: &CompletionProblem) -> Result<Matrix> {
    p.check_factors(f)?;
    let sys = mode_system(mode, f, p);
    if p.config.beta == 0.0 {
        return Ok(solve_blocks(&sys, &rank_term(&sys, p)));
    }
    let delta = assemble_delta(mode, &sys, p);
    let rhs = Vector::from_column_slice(sys.rhs.as_slice());
    // every term beyond λI (or λ(I + side) ⊗ I) is positive semidefinite
    let x = pinv_solve_psd(&delta, &rhs, p.config.lambda)?;
    Ok(Matrix::from_column_slice(sys.rows, sys.rank, x.as_slice()))
}

/// Gradient of the objective with respect to the mode-`n` factor:
/// `2[(W ⊛ (FΨᵀ − Y))Ψ + λF + β(F·side + S·F·ΨᵀΨ)]`.
pub fn subproblem_gradient(mode: Mode, f: &FactorSet, p: &CompletionProblem) -> Result<Matrix> {
    p.check_factors(f)?;
    let r = f.rank();
    let fm = f.get(mode);
    let mut g = Matrix::zeros(fm.nrows(), r);
    let mut v = vec![0.0; r];
    for_each_observed(p, |i, j, k, y| {
        let row = design_row(mode, f, (i, j, k), &mut v);
        let x: f64 = (0..r).map(|q| fm[(row, q)] * v[q]).sum();
        let e = x - y;
        for q in 0..r {
            g[(row, q)] += e * v[q];
        }
    });
    g += fm * p.config.lambda;
    if p.config.beta != 0.0 {
        let sys = mode_system(mode, f, p);
        let s = coupling(mode, p);
        g += (fm * &sys.side + s * fm * &sys.psi_gram) * p.config.beta;
    }
    Ok(g * 2.0)
}

/// Entries i.i.d. uniform in `[0, 1)`, filled column by column for A, then
/// B, then C.
pub fn init_factors(dims: (usize, usize, usize), rank: usize, seed: u64) -> Result<FactorSet> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |rows: usize| Matrix::from_fn(rows, rank, |_, _| rng.random::<f64>());
    let a = draw(dims.0);
    let b = draw(dims.1);
    let c = draw(dims.2);
    FactorSet::new(a, b, c)
}

/// ALS from the given starting factors.
pub fn complete_from(p: &CompletionProblem, init: FactorSet) -> Result<(Tensor3, SolveReport)> {
    p.check_factors(&init)?;
    if p.w.observed_count() == 0 {
        return Err(Error::NothingObserved);
    }
    let start = Instant::now();
    let mut f = init;
    let mut trace = vec![objective(&f, p)?];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < p.config.max_iters {
        for mode in Mode::ALL {
            let m = solve_factor(mode, &f, p)?;
            f.set(mode, m);
        }
        iterations += 1;
        let obj = objective(&f, p)?;
        let decrease = trace[trace.len() - 1] - obj;
        trace.push(obj);
        if decrease < p.config.tol {
            converged = true;
            break;
        }
    }
    let x_hat = cp_reconstruct(&f)?;
    Ok((
        x_hat,
        SolveReport {
            factors: f,
            objective_trace: trace,
            iterations,
            converged,
            wall_time_seconds: start.elapsed().as_secs_f64(),
        },
    ))
}

/// ALS from seeded uniform factors.
pub fn complete(p: &CompletionProblem) -> Result<(Tensor3, SolveReport)> {
    let init = init_factors(p.dims(), p.config.rank, p.config.seed)?;
    complete_from(p, init)
}

/// [`complete`] with `β` forced to 0.
pub fn baseline_complete(p: &CompletionProblem) -> Result<(Tensor3, SolveReport)> {
    complete(&p.with_beta(0.0))
}
