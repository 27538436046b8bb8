use crate::error::{Error, Result};
use crate::tensor::{frobenius_norm, Tensor3};

/// `‖X − X̂‖² / ‖X‖²` (squared norms).
pub fn relative_error(x: &Tensor3, x_hat: &Tensor3) -> Result<f64> {
    let denom = frobenius_norm(x).powi(2);
    if denom == 0.0 {
        return Err(Error::invalid("relative error against a zero reference tensor"));
    }
    Ok(frobenius_norm(&x.sub(x_hat)?).powi(2) / denom)
}

/// `−Σ ln(1 + x²)` over all entries; more negative means denser.
pub fn sparsity_log(x: &Tensor3) -> f64 {
    -x.as_slice().iter().map(|v| (v * v).ln_1p()).sum::<f64>()
}
