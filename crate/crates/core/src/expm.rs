//! Matrix exponential via scaling-and-squaring with a Padé(13) approximant.
//!
//! Follows Higham's algorithm: scale A by 2^-s until its 1-norm is below
//! theta_13, evaluate the (13,13) Padé rational approximant, then square the
//! result s times. For the matrices seen here (elementwise squares of
//! adjacency matrices, d ≤ a few hundred) this is accurate to near machine
//! precision.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Padé(13,13) coefficients b_0..b_13.
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

/// Largest 1-norm for which the unscaled Padé(13) approximant holds full
/// accuracy (Higham 2005, Table 10.2).
const THETA13: f64 = 5.371920351148152;

fn one_norm(a: &DMatrix<f64>) -> f64 {
    (0..a.ncols())
        .map(|j| a.column(j).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// exp(A) for a square matrix with finite entries.
///
/// Returns [`Error::Numeric`] when the input norm is so large that the
/// result would overflow f64.
pub fn expm(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let d = a.nrows();
    assert_eq!(d, a.ncols(), "expm requires a square matrix");
    if d == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    let norm = one_norm(a);
    if !norm.is_finite() || norm > 700.0 {
        let max_entry = a.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        return Err(Error::Numeric(format!(
            "matrix exponential overflow: 1-norm {norm:.3e}, max entry {max_entry:.3e}"
        )));
    }

    let s = if norm > THETA13 {
        (norm / THETA13).log2().ceil() as u32
    } else {
        0
    };
    let a_scaled = a / 2f64.powi(s as i32);

    let mut result = pade13(&a_scaled)?;
    for _ in 0..s {
        result = &result * &result;
    }
    Ok(result)
}

fn pade13(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let d = a.nrows();
    let eye = DMatrix::<f64>::identity(d, d);
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a2 * &a4;

    let u_inner = &a6 * PADE13[13] + &a4 * PADE13[11] + &a2 * PADE13[9];
    let u = a * (&a6 * &u_inner
        + &a6 * PADE13[7]
        + &a4 * PADE13[5]
        + &a2 * PADE13[3]
        + &eye * PADE13[1]);

    let v_inner = &a6 * PADE13[12] + &a4 * PADE13[10] + &a2 * PADE13[8];
    let v = &a6 * &v_inner + &a6 * PADE13[6] + &a4 * PADE13[4] + &a2 * PADE13[2] + &eye * PADE13[0];

    // exp(A) ≈ (V - U)^{-1} (V + U)
    let lhs = &v - &u;
    let rhs = &v + &u;
    lhs.lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Numeric("singular denominator in Padé approximant".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// Truncated Taylor series, the independent oracle. Only valid for
    /// modest norms where the series converges quickly.
    fn expm_taylor(a: &DMatrix<f64>, terms: usize) -> DMatrix<f64> {
        let d = a.nrows();
        let mut sum = DMatrix::<f64>::identity(d, d);
        let mut term = DMatrix::<f64>::identity(d, d);
        for k in 1..=terms {
            term = &term * a / k as f64;
            sum += &term;
        }
        sum
    }

    #[test]
    fn exp_of_zero_is_identity() {
        let z = DMatrix::<f64>::zeros(4, 4);
        let e = expm(&z).unwrap();
        assert_relative_eq!(e, DMatrix::identity(4, 4), epsilon = 1e-15);
    }

    #[test]
    fn exp_of_diagonal() {
        let a = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, -2.0, 0.5]));
        let e = expm(&a).unwrap();
        for (i, &v) in [1.0f64, -2.0, 0.5].iter().enumerate() {
            assert_relative_eq!(e[(i, i)], v.exp(), max_relative = 1e-14);
        }
    }

    #[test]
    fn matches_taylor_oracle_small_norm() {
        let a = DMatrix::from_row_slice(
            3,
            3,
            &[0.1, 0.4, -0.2, 0.0, -0.3, 0.25, 0.7, 0.05, 0.0],
        );
        let e = expm(&a).unwrap();
        let oracle = expm_taylor(&a, 40);
        assert_relative_eq!(e, oracle, epsilon = 1e-12);
    }

    #[test]
    fn matches_taylor_oracle_with_scaling() {
        // Norm above theta_13 forces the squaring phase.
        let a = DMatrix::from_fn(4, 4, |i, j| ((i * 4 + j) as f64 * 0.37).sin() * 2.0);
        assert!(super::one_norm(&a) > THETA13);
        let e = expm(&a).unwrap();
        let oracle = expm_taylor(&(a / 16.0), 60);
        let mut squared = oracle;
        for _ in 0..4 {
            squared = &squared * &squared;
        }
        let rel = (&e - &squared).norm() / squared.norm();
        assert!(rel < 1e-11, "relative error {rel}");
    }

    #[test]
    fn overflow_reports_max_entry() {
        let a = DMatrix::from_element(3, 3, 500.0);
        match expm(&a) {
            Err(Error::Numeric(msg)) => assert!(msg.contains("max entry")),
            other => panic!("expected numeric error, got {other:?}"),
        }
    }
}
