use crate::error::EngineError;
use crate::scalar::Scalar;

fn check_inputs<T: Scalar>(beta: &[T], eta: &[T]) -> Result<(), EngineError> {
    if beta.len() != eta.len() {
        return Err(EngineError::LengthMismatch(beta.len(), eta.len()));
    }
    for (i, (&b, &e)) in beta.iter().zip(eta).enumerate() {
        if !(b > T::zero() && b * b < e) {
            return Err(EngineError::ClosedFormDomain { step: i, beta_sq: (b * b).as_f64(), eta: e.as_f64() });
        }
    }
    Ok(())
}

/// `Z = 1/(2Y)` for deterministic `beta`, `eta`, evaluated term by term from the
/// explicit sum-of-products expression.
///
/// `beta[i]`, `eta[i]` are the values realized at step `i + 1` of an `m`-step
/// horizon; the result has `m + 1` entries with `Z[m] = 1` at the horizon.
pub fn compute_z_closed_form<T: Scalar>(beta: &[T], eta: &[T]) -> Result<Vec<T>, EngineError> {
    check_inputs(beta, eta)?;
    let m = beta.len();
    let mut z = Vec::with_capacity(m + 1);
    for k in 0..=m {
        let mut prod = T::one();
        let mut sum = T::zero();
        for j in k..m {
            prod = prod / eta[j];
            let d = eta[j] - beta[j];
            sum = sum + prod * d * d / (eta[j] - beta[j] * beta[j]);
        }
        z.push(prod + sum);
    }
    Ok(z)
}

/// Same quantity through the one-step recursion
/// `Z_k = (eta - beta)^2 / (eta^2 - eta beta^2) + Z_{k+1} / eta`.
pub fn compute_z_recursive<T: Scalar>(beta: &[T], eta: &[T]) -> Result<Vec<T>, EngineError> {
    check_inputs(beta, eta)?;
    let m = beta.len();
    let mut z = vec![T::one(); m + 1];
    for k in (0..m).rev() {
        let (b, e) = (beta[k], eta[k]);
        z[k] = (e - b) * (e - b) / (e * e - e * b * b) + z[k + 1] / e;
    }
    Ok(z)
}

/// `Y_{N-1} = (E[eta] - E[beta]^2) / (2 E[eta - 2 beta + 1])` for one remaining step,
/// from `(prob, beta, eta)` outcomes.
pub fn two_period_y<T: Scalar>(outcomes: &[(T, T, T)]) -> T {
    let (mut e_beta, mut e_eta) = (T::zero(), T::zero());
    for &(p, b, e) in outcomes {
        e_beta = e_beta + p * b;
        e_eta = e_eta + p * e;
    }
    (e_eta - e_beta * e_beta) / (T::two() * (e_eta - T::two() * e_beta + T::one()))
}
