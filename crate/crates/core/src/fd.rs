//! Central finite differences: gradient probes and Hessian-vector
//! products.
//!
//! These operators serve two roles: as the numerical oracle every
//! analytic gradient is checked against, and as the differentiation
//! engine for objectives whose exact derivatives would need
//! higher-order terms. Neither ever materializes a full Hessian.

use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{invalid, CoreError, Result};
use crate::vector::ParameterVector;

/// Default central-difference step: cube root of machine epsilon,
/// scaled by `1 + ‖θ‖`. Balances truncation against round-off.
pub fn default_step(theta: &ParameterVector) -> f64 {
    f64::EPSILON.cbrt() * (1.0 + theta.norm())
}

/// Central-difference gradient of a scalar function.
///
/// Component `i` is `(f(θ+εe_i) − f(θ−εe_i)) / 2ε` with `ε = step`.
/// A non-finite probe value fails with the offending coordinate.
pub fn fd_grad<F>(f: F, theta: &ParameterVector, step: f64) -> Result<ParameterVector>
where
    F: Fn(&ParameterVector) -> Result<f64>,
{
    if !(step > 0.0) {
        return Err(invalid("finite-difference step must be positive"));
    }
    let mut probe = theta.as_slice().to_vec();
    let mut grad = Vec::with_capacity(theta.dim());
    for i in 0..theta.dim() {
        let center = probe[i];
        probe[i] = center + step;
        let plus = f(&ParameterVector::from_raw(probe.clone()))?;
        probe[i] = center - step;
        let minus = f(&ParameterVector::from_raw(probe.clone()))?;
        probe[i] = center;
        let di = (plus - minus) / (2.0 * step);
        if !di.is_finite() {
            return Err(CoreError::NumericalFailure {
                context: "fd_grad probe",
                coordinate: Some(i),
            });
        }
        grad.push(di);
    }
    Ok(ParameterVector::from_raw(grad))
}

/// Hessian-vector product as the directional derivative of a gradient
/// map: `(g(θ+εv) − g(θ−εv)) / 2ε` with `ε = step·(1+‖θ‖)/‖v‖`.
///
/// Costs exactly two gradient evaluations regardless of dimension.
pub fn hvp<G>(
    grad_fn: G,
    theta: &ParameterVector,
    v: &ParameterVector,
    step: f64,
) -> Result<ParameterVector>
where
    G: Fn(&ParameterVector) -> Result<ParameterVector>,
{
    theta.check_same_dim(v)?;
    if !(step > 0.0) {
        return Err(invalid("hvp step must be positive"));
    }
    let vnorm = v.norm();
    if vnorm == 0.0 {
        return Err(invalid("hvp direction must be non-zero"));
    }
    let eps = step * (1.0 + theta.norm()) / vnorm;

    let mut plus = theta.clone();
    plus.add_scaled(eps, v);
    let mut minus = theta.clone();
    minus.add_scaled(-eps, v);

    let g_plus = grad_fn(&plus)?;
    let g_minus = grad_fn(&minus)?;
    let mut out = g_plus;
    out.add_scaled(-1.0, &g_minus);
    let out = out.scaled(1.0 / (2.0 * eps));
    if !out.is_finite() {
        return Err(CoreError::NumericalFailure {
            context: "hvp probe",
            coordinate: out.as_slice().iter().position(|x| !x.is_finite()),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn constant_function_has_zero_gradient() {
        let theta = ParameterVector::new(vec![1.0, -2.0, 3.0]).unwrap();
        let g = fd_grad(|_| Ok(7.5), &theta, 1e-5).unwrap();
        assert_eq!(g.as_slice(), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn quadratic_gradient_is_recovered() {
        // f(θ) = ½‖θ‖² has gradient θ.
        let theta = ParameterVector::new(vec![1.0, 2.0]).unwrap();
        let g = fd_grad(|t| Ok(0.5 * t.norm_sq()), &theta, 1e-5).unwrap();
        assert!((g[0] - 1.0).abs() < 1e-9);
        assert!((g[1] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn product_rule_example() {
        // f(θ) = θ₀θ₁ at (3,5) has gradient (5,3).
        let theta = ParameterVector::new(vec![3.0, 5.0]).unwrap();
        let g = fd_grad(|t| Ok(t[0] * t[1]), &theta, 1e-5).unwrap();
        assert!((g[0] - 5.0).abs() < 1e-8);
        assert!((g[1] - 3.0).abs() < 1e-8);
    }

    #[test]
    fn non_finite_probe_names_the_coordinate() {
        let theta = ParameterVector::new(vec![0.0, 1.0]).unwrap();
        let err = fd_grad(
            |t| {
                if t[1] > 1.0 {
                    Ok(f64::INFINITY)
                } else {
                    Ok(t[1])
                }
            },
            &theta,
            1e-3,
        )
        .unwrap_err();
        match err {
            CoreError::NumericalFailure { coordinate, .. } => assert_eq!(coordinate, Some(1)),
            other => panic!("unexpected error: {other:?}"),
        }
    }

    #[test]
    fn hvp_on_diagonal_quadratic() {
        // f(θ) = ½θᵀdiag(2,3)θ, so H·(1,1) = (2,3).
        let grad = |t: &ParameterVector| {
            Ok(ParameterVector::from_raw(vec![2.0 * t[0], 3.0 * t[1]]))
        };
        let theta = ParameterVector::new(vec![0.4, -0.7]).unwrap();
        let v = ParameterVector::new(vec![1.0, 1.0]).unwrap();
        let hv = hvp(grad, &theta, &v, 1e-6).unwrap();
        assert!((hv[0] - 2.0).abs() < 1e-8);
        assert!((hv[1] - 3.0).abs() < 1e-8);
    }

    #[test]
    fn hvp_is_odd_in_direction() {
        let grad = |t: &ParameterVector| {
            Ok(ParameterVector::from_raw(vec![
                t[0].powi(3),
                (t[0] * t[1]).sin(),
            ]))
        };
        let theta = ParameterVector::new(vec![0.9, 0.3]).unwrap();
        let v = ParameterVector::new(vec![0.2, -0.5]).unwrap();
        let hv = hvp(&grad, &theta, &v, 1e-6).unwrap();
        let hv_neg = hvp(&grad, &theta, &v.scaled(-1.0), 1e-6).unwrap();
        for i in 0..2 {
            assert!((hv[i] + hv_neg[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn hvp_rejects_zero_direction() {
        let grad = |t: &ParameterVector| Ok(t.clone());
        let theta = ParameterVector::new(vec![1.0]).unwrap();
        assert!(matches!(
            hvp(grad, &theta, &ParameterVector::zeros(1), 1e-6),
            Err(CoreError::InvalidArgument(_))
        ));
    }
}
