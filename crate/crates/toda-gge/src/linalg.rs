//! Thin wrappers over nalgebra: sorted symmetric spectra and log-determinants.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// A real number stored as ln|x| together with its sign.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogSign {
    pub log_abs: f64,
    pub sign: f64,
}

impl LogSign {
    pub const ONE: LogSign = LogSign { log_abs: 0.0, sign: 1.0 };

    pub fn from_value(x: f64) -> Self {
        if x == 0.0 {
            LogSign { log_abs: f64::NEG_INFINITY, sign: 0.0 }
        } else {
            LogSign { log_abs: x.abs().ln(), sign: x.signum() }
        }
    }

    pub fn value(self) -> f64 {
        self.sign * self.log_abs.exp()
    }

    pub fn mul(self, o: LogSign) -> LogSign {
        LogSign { log_abs: self.log_abs + o.log_abs, sign: self.sign * o.sign }
    }

    pub fn div(self, o: LogSign) -> LogSign {
        LogSign { log_abs: self.log_abs - o.log_abs, sign: self.sign * o.sign }
    }
}

/// Ascending eigenvalues of a symmetric matrix.
pub fn sym_eigenvalues(m: DMatrix<f64>) -> Result<Vec<f64>> {
    let eig = SymmetricEigen::try_new(m, f64::EPSILON, 10_000)
        .ok_or_else(|| Error::Numeric("symmetric eigensolver did not converge".into()))?;
    let mut v: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numeric("non-finite eigenvalue".into()));
    }
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// ln|det m| and sign via LU with full pivoting.
pub fn log_det(m: &DMatrix<f64>) -> LogSign {
    let n = m.nrows();
    if n == 0 {
        return LogSign::ONE;
    }
    let lu = m.clone().full_piv_lu();
    let u = lu.u();
    let mut sign: f64 = lu.p().determinant::<f64>() * lu.q().determinant::<f64>();
    let mut log_abs = 0.0;
    for i in 0..n {
        let d = u[(i, i)];
        if d == 0.0 || !d.is_finite() {
            return LogSign { log_abs: f64::NEG_INFINITY, sign: 0.0 };
        }
        log_abs += d.abs().ln();
        sign *= d.signum();
    }
    LogSign { log_abs, sign }
}

/// log Σ exp(x_i).
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}
