//! Binary NRTL activity-coefficient model.
//!
//! Input point `x = (l, T)`: mole fraction of component 1 and temperature in
//! Kelvin. Parameters `θ = (b₁₂, b₂₁)` in Kelvin. With
//! `τ_ij = a_ij + b_ij/T`, `G_ij = exp(-c τ_ij)` and `τ_ii = 0`, the model
//! returns `γ₁`.

use crate::domain::Model;
use crate::error::{check_len, Error, Result};
use crate::scalar::Scalar;

/// Fixed constants of the binary NRTL model. The non-randomness factor is
/// symmetric (`c₁₂ = c₂₁`) and temperature independent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NrtlSpec<T> {
    pub a12: T,
    pub a21: T,
    pub c12: T,
}

impl<T: Scalar> Default for NrtlSpec<T> {
    fn default() -> Self {
        NrtlSpec {
            a12: T::zero(),
            a21: T::zero(),
            c12: T::lit(0.3),
        }
    }
}

impl<T: Scalar> NrtlSpec<T> {
    fn offset(&self, i: usize, j: usize) -> T {
        match (i, j) {
            (1, 2) => self.a12,
            (2, 1) => self.a21,
            _ => T::zero(),
        }
    }
}

fn check_component(i: usize) -> Result<()> {
    if i == 1 || i == 2 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "NRTL component index must be 1 or 2, got {i}"
        )))
    }
}

fn check_temperature<T: Scalar>(t: T) -> Result<()> {
    if t > T::zero() && t.is_finite_value() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "temperature must be positive, got {t}"
        )))
    }
}

/// `τ_ij(T, θ)`; zero on the diagonal.
pub fn nrtl_tau<T: Scalar>(i: usize, j: usize, t: T, spec: &NrtlSpec<T>, theta: &[T]) -> Result<T> {
    check_component(i)?;
    check_component(j)?;
    check_temperature(t)?;
    check_len("NRTL parameters", 2, theta.len())?;
    Ok(tau_raw(i, j, t, spec, theta))
}

/// `G_ij(T, θ) = exp(-α_ij τ_ij)`; one on the diagonal.
pub fn nrtl_g<T: Scalar>(i: usize, j: usize, t: T, spec: &NrtlSpec<T>, theta: &[T]) -> Result<T> {
    let tau = nrtl_tau(i, j, t, spec, theta)?;
    Ok(if i == j {
        T::one()
    } else {
        (-spec.c12 * tau).exp()
    })
}

fn tau_raw<T: Scalar>(i: usize, j: usize, t: T, spec: &NrtlSpec<T>, theta: &[T]) -> T {
    match (i, j) {
        (1, 2) => spec.offset(1, 2) + theta[0] / t,
        (2, 1) => spec.offset(2, 1) + theta[1] / t,
        _ => T::zero(),
    }
}

fn check_fraction<T: Scalar>(l: T) -> Result<()> {
    if l >= T::zero() && l <= T::one() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "mole fraction must lie in [0, 1], got {l}"
        )))
    }
}

/// Activity coefficient `γ_i` of component `i` at `(l, T)`, using the
/// general multicomponent sums restricted to two components.
pub fn nrtl_gamma<T: Scalar>(
    i: usize,
    l: T,
    t: T,
    spec: &NrtlSpec<T>,
    theta: &[T],
) -> Result<T> {
    check_component(i)?;
    check_fraction(l)?;
    check_temperature(t)?;
    check_len("NRTL parameters", 2, theta.len())?;
    let frac = [l, T::one() - l];
    let mut tau = [[T::zero(); 2]; 2];
    let mut g = [[T::one(); 2]; 2];
    for a in 0..2 {
        for b in 0..2 {
            if a != b {
                tau[a][b] = tau_raw(a + 1, b + 1, t, spec, theta);
                g[a][b] = (-spec.c12 * tau[a][b]).exp();
            }
        }
    }
    // Σ_k l_k τ_kj G_kj / Σ_k l_k G_kj for each column j
    let mut denom = [T::zero(); 2];
    let mut ratio = [T::zero(); 2];
    for j in 0..2 {
        let mut num = T::zero();
        for k in 0..2 {
            denom[j] += frac[k] * g[k][j];
            num += frac[k] * tau[k][j] * g[k][j];
        }
        ratio[j] = num / denom[j];
    }
    let i = i - 1;
    let mut ln_gamma = ratio[i];
    for j in 0..2 {
        ln_gamma += frac[j] * g[i][j] / denom[j] * (tau[i][j] - ratio[j]);
    }
    let gamma = ln_gamma.exp();
    if !gamma.is_finite_value() {
        return Err(Error::NonFinite(format!("NRTL activity coefficient {gamma}")));
    }
    Ok(gamma)
}

/// `γ₁(l, T, θ)`.
pub fn nrtl_gamma1<T: Scalar>(l: T, t: T, spec: &NrtlSpec<T>, theta: &[T]) -> Result<T> {
    nrtl_gamma(1, l, t, spec, theta)
}

/// `γ₁` as a regression model over `x = (l, T)` with `θ = (b₁₂, b₂₁)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NrtlModel<T> {
    spec: NrtlSpec<T>,
}

impl<T: Scalar> NrtlModel<T> {
    pub fn new(spec: NrtlSpec<T>) -> Self {
        NrtlModel { spec }
    }

    pub fn spec(&self) -> &NrtlSpec<T> {
        &self.spec
    }
}

impl<T: Scalar> Default for NrtlModel<T> {
    fn default() -> Self {
        NrtlModel::new(NrtlSpec::default())
    }
}

impl<T: Scalar> Model<T> for NrtlModel<T> {
    fn id(&self) -> &str {
        "nrtl"
    }

    fn dim_x(&self) -> usize {
        2
    }

    fn dim_theta(&self) -> usize {
        2
    }

    fn eval_raw(&self, x: &[T], theta: &[T]) -> Result<T> {
        nrtl_gamma1(x[0], x[1], &self.spec, theta)
    }

    // Binary closed form: ln γ₁ = l₂² [A(τ₂₁) + B(τ₁₂)] with
    // A = τ₂₁ G₂₁² / (l₁ + l₂ G₂₁)² and B = τ₁₂ G₁₂ / (l₂ + l₁ G₁₂)².
    fn gradient_raw(&self, x: &[T], theta: &[T]) -> Option<Result<Vec<T>>> {
        let (l1, t) = (x[0], x[1]);
        let l2 = T::one() - l1;
        let c = self.spec.c12;
        let two = T::lit(2.0);
        let gamma = match nrtl_gamma1(l1, t, &self.spec, theta) {
            Ok(g) => g,
            Err(e) => return Some(Err(e)),
        };
        let tau12 = tau_raw(1, 2, t, &self.spec, theta);
        let tau21 = tau_raw(2, 1, t, &self.spec, theta);
        let g12 = (-c * tau12).exp();
        let g21 = (-c * tau21).exp();

        let d = l1 + l2 * g21;
        let da_dtau = g21 * g21 / (d * d) * (T::one() - two * c * tau21 + two * c * tau21 * l2 * g21 / d);
        let e = l2 + l1 * g12;
        let db_dtau = g12 / (e * e) * (T::one() - c * tau12 + two * c * tau12 * l1 * g12 / e);

        let scale = gamma * l2 * l2 / t;
        Some(Ok(vec![scale * db_dtau, scale * da_dtau]))
    }
}
