use serde::{Deserialize, Serialize};

use crate::domain::Method;
use crate::error::{check_len, Error, Result};
use crate::scalar::Scalar;

/// Weighted perturbation points approximating expectations under `N(0, σ²I)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CubatureRule<T> {
    method: Method,
    label: String,
    degree: u32,
    dim: usize,
    points: Vec<Vec<T>>,
    weights: Vec<T>,
}

impl<T: Scalar> CubatureRule<T> {
    /// Validates that the weights sum to one and that the point set is
    /// symmetric under `z ↦ −z` with equal weights.
    pub fn new(
        method: Method,
        label: impl Into<String>,
        degree: u32,
        points: Vec<Vec<T>>,
        weights: Vec<T>,
    ) -> Result<Self> {
        let label = label.into();
        let dim = points
            .first()
            .map(Vec::len)
            .ok_or_else(|| Error::InvalidArgument("cubature rule needs at least one point".into()))?;
        check_len("cubature weights", points.len(), weights.len())?;
        for p in &points {
            check_len("cubature point dimension", dim, p.len())?;
        }
        if points.iter().flatten().chain(&weights).any(|v| !v.is_finite_value()) {
            return Err(Error::NonFinite(format!("cubature rule {label}")));
        }
        let sum = weights.iter().fold(T::zero(), |a, w| a + *w);
        let tol = T::lit(1e-12).max(T::lit(64.0) * T::machine_epsilon());
        if (sum - T::one()).abs() > tol {
            return Err(Error::InvalidArgument(format!(
                "cubature weights of {label} sum to {sum}, not 1"
            )));
        }
        for (i, p) in points.iter().enumerate() {
            if p.iter().all(|v| *v == T::zero()) {
                continue;
            }
            let mirrored = points.iter().zip(&weights).any(|(q, w)| {
                *w == weights[i] && q.iter().zip(p).all(|(a, b)| *a == -*b)
            });
            if !mirrored {
                return Err(Error::InvalidArgument(format!(
                    "cubature rule {label} is not symmetric at point {i}"
                )));
            }
        }
        Ok(CubatureRule { method, label, degree, dim, points, weights })
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec<T>] {
        &self.points
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    /// Rule approximation of `E[g(z)]`.
    pub fn integrate(&self, g: impl Fn(&[T]) -> T) -> T {
        self.points
            .iter()
            .zip(&self.weights)
            .fold(T::zero(), |acc, (p, w)| acc + *w * g(p))
    }
}

/// Sigma-point hyperparameter `κ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SigmaPointConfig {
    pub kappa: f64,
}

impl SigmaPointConfig {
    /// The classical choice `κ = 3 − n`.
    pub fn default_for(n: usize) -> Self {
        SigmaPointConfig { kappa: default_kappa(n) }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if !(self.kappa > -(n as f64)) || !self.kappa.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "sigma-point kappa must exceed -n = -{n}, got {}",
                self.kappa
            )));
        }
        Ok(())
    }
}

pub fn default_kappa(n: usize) -> f64 {
    3.0 - n as f64
}

fn unit<T: Scalar>(n: usize, i: usize) -> Vec<T> {
    let mut e = vec![T::zero(); n];
    e[i] = T::one();
    e
}

fn push_pair<T: Scalar>(points: &mut Vec<Vec<T>>, weights: &mut Vec<T>, dir: &[T], delta: T, w: T) {
    let p: Vec<T> = dir.iter().map(|v| *v * delta).collect();
    let m: Vec<T> = p.iter().map(|v| -*v).collect();
    points.push(p);
    points.push(m);
    weights.push(w);
    weights.push(w);
}

fn check_sigma<T: Scalar>(sigma: T) -> Result<()> {
    if !(sigma > T::zero()) || !sigma.is_finite_value() {
        return Err(Error::InvalidArgument(format!("sigma must be positive, got {sigma}")));
    }
    Ok(())
}

/// Sigma points `{0, ±δe_i}` with `δ = √(n+κ)·σ`, `w₀ = κ/(n+κ)`, `w₁ = 1/(2(n+κ))`.
pub fn sigma_point_rule<T: Scalar>(n: usize, sigma: T, kappa: T) -> Result<CubatureRule<T>> {
    if n == 0 {
        return Err(Error::InvalidArgument("rule dimension must be >= 1".into()));
    }
    check_sigma(sigma)?;
    let nk = T::from_count(n) + kappa;
    if !(nk > T::zero()) {
        return Err(Error::InvalidArgument(format!(
            "sigma-point kappa must exceed -n = -{n}, got {kappa}"
        )));
    }
    let delta = nk.sqrt() * sigma;
    let w1 = T::one() / (T::lit(2.0) * nk);
    let mut points = vec![vec![T::zero(); n]];
    let mut weights = vec![kappa / nk];
    for i in 0..n {
        push_pair(&mut points, &mut weights, &unit(n, i), delta, w1);
    }
    CubatureRule::new(Method::SigmaPoint, format!("SP(n={n}, kappa={kappa})"), 3, points, weights)
}

/// McNamee-Stenger degree-5 rule: `{0, ±δe_i, ±δ(e_i ± e_j)}`, `δ = √3·σ`.
pub fn mcnamee_stenger_rule<T: Scalar>(n: usize, sigma: T) -> Result<CubatureRule<T>> {
    if n == 0 {
        return Err(Error::InvalidArgument("rule dimension must be >= 1".into()));
    }
    check_sigma(sigma)?;
    let nn = T::from_count(n);
    let eighteen = T::lit(18.0);
    let w0 = T::one() - nn * (T::lit(7.0) - nn) / eighteen;
    let w1 = (T::lit(4.0) - nn) / eighteen;
    let w2 = T::one() / T::lit(36.0);
    let delta = T::lit(3.0).sqrt() * sigma;
    let mut points = vec![vec![T::zero(); n]];
    let mut weights = vec![w0];
    for i in 0..n {
        push_pair(&mut points, &mut weights, &unit(n, i), delta, w1);
    }
    for i in 0..n {
        for j in i + 1..n {
            let mut plus = unit::<T>(n, i);
            plus[j] = T::one();
            let mut minus = unit::<T>(n, i);
            minus[j] = -T::one();
            push_pair(&mut points, &mut weights, &plus, delta, w2);
            push_pair(&mut points, &mut weights, &minus, delta, w2);
        }
    }
    CubatureRule::new(Method::McNameeStenger, format!("MS(n={n})"), 5, points, weights)
}

/// The `n + 1` vertices of a regular simplex inscribed in the unit sphere of `ℝⁿ`.
pub fn simplex_directions<T: Scalar>(n: usize) -> Vec<Vec<T>> {
    let nf = T::from_count(n);
    let np1 = T::from_count(n + 1);
    (1..=n + 1)
        .map(|i| {
            (1..=n)
                .map(|k| {
                    if k < i {
                        let den = nf * T::from_count(n - k + 2) * T::from_count(n - k + 1);
                        -(np1 / den).sqrt()
                    } else if k == i {
                        (np1 * T::from_count(n - i + 1) / (nf * T::from_count(n - i + 2))).sqrt()
                    } else {
                        T::zero()
                    }
                })
                .collect()
        })
        .collect()
}

/// Lu-Darmofal degree-5 rule with `n² + 3n + 3` points.
pub fn lu_darmofal_rule<T: Scalar>(n: usize, sigma: T) -> Result<CubatureRule<T>> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "Lu-Darmofal rule needs n >= 2, got {n}"
        )));
    }
    check_sigma(sigma)?;
    let nf = T::from_count(n);
    let np1 = T::from_count(n + 1);
    let np2 = T::from_count(n + 2);
    let two = T::lit(2.0);
    let w0 = two / np2;
    let w1 = nf * nf * (T::lit(7.0) - nf) / (two * np1 * np1 * np2 * np2);
    let nm1 = T::from_count(n - 1);
    let w2 = two * nm1 * nm1 / (np1 * np1 * np2 * np2);
    let delta = np2.sqrt() * sigma;

    let a = simplex_directions::<T>(n);
    let scale = (nf / (two * nm1)).sqrt();
    let mut points = vec![vec![T::zero(); n]];
    let mut weights = vec![w0];
    for ai in &a {
        push_pair(&mut points, &mut weights, ai, delta, w1);
    }
    for i in 0..=n {
        for j in i + 1..=n {
            let b: Vec<T> = a[i].iter().zip(&a[j]).map(|(x, y)| scale * (*x + *y)).collect();
            push_pair(&mut points, &mut weights, &b, delta, w2);
        }
    }
    CubatureRule::new(Method::LuDarmofal, format!("LD(n={n})"), 5, points, weights)
}

/// Term `coef · Π z_k^{exponents[k]}` of a polynomial.
#[derive(Debug, Clone, PartialEq)]
pub struct Monomial<T> {
    pub coef: T,
    pub exponents: Vec<u32>,
}

/// `E[z^k]` for `z ~ N(0, σ²)`: zero for odd `k`, `(k−1)!!·σ^k` otherwise.
pub fn gaussian_moment<T: Scalar>(k: u32, sigma: T) -> T {
    if k % 2 == 1 {
        return T::zero();
    }
    let mut dfact = T::one();
    let mut j = 1;
    while j < k {
        dfact *= T::from_count(j as usize);
        j += 2;
    }
    dfact * sigma.powi(k as i32)
}

/// Magnitude reference for a polynomial: `Σ |c|·Π (ē_k − 1)!!·σ^{e_k}` with
/// `ē` the exponent rounded up to the next even number.
pub fn polynomial_scale<T: Scalar>(poly: &[Monomial<T>], sigma: T) -> T {
    poly.iter().fold(T::zero(), |acc, m| {
        let factor = m.exponents.iter().fold(T::one(), |f, &e| {
            f * gaussian_moment(e + e % 2, T::one()) * sigma.powi(e as i32)
        });
        acc + m.coef.abs() * factor
    })
}

/// `|rule integral − analytic Gaussian expectation|` of a polynomial.
pub fn degree5_exactness_check<T: Scalar>(
    rule: &CubatureRule<T>,
    poly: &[Monomial<T>],
    sigma: T,
) -> Result<T> {
    let mut exact = T::zero();
    for m in poly {
        check_len("monomial exponents", rule.dim(), m.exponents.len())?;
        exact += m.coef
            * m.exponents
                .iter()
                .fold(T::one(), |f, &e| f * gaussian_moment(e, sigma));
    }
    let approx = rule.integrate(|z| {
        poly.iter().fold(T::zero(), |acc, m| {
            acc + m.coef
                * z.iter()
                    .zip(&m.exponents)
                    .fold(T::one(), |f, (zk, &e)| f * zk.powi(e as i32))
        })
    });
    Ok((approx - exact).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn sigma_point_examples() {
        let r = sigma_point_rule(1, 1.0f64, 2.0).unwrap();
        assert_eq!(r.len(), 3);
        assert!(close(r.weights()[0], 2.0 / 3.0, 1e-15));
        assert!(close(r.weights()[1], 1.0 / 6.0, 1e-15));
        assert!(close(r.points()[1][0], 3f64.sqrt(), 1e-15));
        assert!(sigma_point_rule(2, 1.0f64, -2.0).is_err());
        for n in 1..=20 {
            let nf = n as f64;
            for kappa in [-nf + 0.5, 0.5, 3.0 - nf, 3.0 * nf] {
                let r = sigma_point_rule(n, 0.3, kappa).unwrap();
                assert_eq!(r.len(), 2 * n + 1);
                let s: f64 = r.weights().iter().sum();
                assert!(close(s, 1.0, 1e-12));
            }
        }
    }

    #[test]
    fn mcnamee_stenger_examples() {
        let r = mcnamee_stenger_rule(2, 1.0f64).unwrap();
        assert!(close(r.weights()[0], 4.0 / 9.0, 1e-15));
        assert!(close(r.weights()[1], 1.0 / 9.0, 1e-15));
        assert!(close(*r.weights().last().unwrap(), 1.0 / 36.0, 1e-15));
        assert_eq!(mcnamee_stenger_rule(3, 1.0f64).unwrap().len(), 19);
        for n in 1..=20 {
            let r = mcnamee_stenger_rule(n, 0.5f64).unwrap();
            assert_eq!(r.len(), 2 * n * n + 1);
        }
    }

    #[test]
    fn lu_darmofal_examples() {
        let r = lu_darmofal_rule(2, 1.0f64).unwrap();
        assert!(close(r.weights()[0], 0.5, 1e-15));
        assert!(close(r.weights()[1], 5.0 / 72.0, 1e-15));
        assert!(close(*r.weights().last().unwrap(), 1.0 / 72.0, 1e-15));
        assert_eq!(lu_darmofal_rule(4, 1.0f64).unwrap().len(), 31);
        assert!(lu_darmofal_rule(1, 1.0f64).is_err());
        let r8 = lu_darmofal_rule(8, 1.0f64).unwrap();
        assert!(r8.weights().iter().any(|w| *w < 0.0));
    }

    #[test]
    fn simplex_geometry() {
        for n in 2..=10 {
            let a = simplex_directions::<f64>(n);
            assert_eq!(a.len(), n + 1);
            for i in 0..=n {
                let norm: f64 = a[i].iter().map(|v| v * v).sum();
                assert!(close(norm, 1.0, 1e-12));
                for j in i + 1..=n {
                    let dot: f64 = a[i].iter().zip(&a[j]).map(|(x, y)| x * y).sum();
                    assert!(close(dot, -1.0 / n as f64, 1e-12));
                }
            }
        }
    }

    #[test]
    fn rule_validation() {
        let bad = CubatureRule::new(Method::LuDarmofal, "bad", 5, vec![vec![0.0f64]], vec![0.9]);
        assert!(bad.is_err());
        let asym = CubatureRule::new(
            Method::LuDarmofal,
            "asym",
            5,
            vec![vec![1.0f64], vec![2.0]],
            vec![0.5, 0.5],
        );
        assert!(asym.is_err());
        let zero = CubatureRule::new(
            Method::LuDarmofal,
            "zero",
            5,
            vec![vec![0.0f64; 2]; 4],
            vec![0.25; 4],
        );
        assert!(zero.is_ok());
    }

    fn random_poly(rng: &mut ChaCha8Rng, n: usize, max_degree: u32, terms: usize) -> Vec<Monomial<f64>> {
        (0..terms)
            .map(|_| {
                let mut e = vec![0u32; n];
                let deg = rng.random_range(0..=max_degree);
                for _ in 0..deg {
                    e[rng.random_range(0..n)] += 1;
                }
                Monomial { coef: rng.random_range(-1.0..1.0), exponents: e }
            })
            .collect()
    }

    #[test]
    fn degree_five_rules_are_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in 2..=6 {
            for sigma in [0.1, 1.0, 3.0] {
                let rules = [mcnamee_stenger_rule(n, sigma).unwrap(), lu_darmofal_rule(n, sigma).unwrap()];
                for _ in 0..20 {
                    let poly = random_poly(&mut rng, n, 5, 8);
                    let scale = polynomial_scale(&poly, sigma);
                    for r in &rules {
                        let err = degree5_exactness_check(r, &poly, sigma).unwrap();
                        assert!(err <= 1e-10 * scale.max(1e-300), "{} err {err}", r.label());
                    }
                }
                let z1sq = [Monomial { coef: 1.0, exponents: { let mut e = vec![0; n]; e[0] = 2; e } }];
                for r in &rules {
                    assert!(degree5_exactness_check(r, &z1sq, sigma).unwrap() <= 1e-14 * sigma * sigma);
                }
            }
        }
    }

    #[test]
    fn sigma_points_are_exact_to_degree_three() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for n in 1..=6 {
            for kappa in [-(n as f64) + 0.5, 0.5, 3.0, 3.0 * n as f64] {
                let r = sigma_point_rule(n, 0.7, kappa).unwrap();
                for _ in 0..10 {
                    let poly = random_poly(&mut rng, n, 3, 6);
                    let err = degree5_exactness_check(&r, &poly, 0.7).unwrap();
                    assert!(err <= 1e-12 * polynomial_scale(&poly, 0.7).max(1.0));
                }
            }
        }
    }

    #[test]
    fn odd_monomials_vanish() {
        let r = lu_darmofal_rule(4, 2.0f64).unwrap();
        let odd = [Monomial { coef: 1.0, exponents: vec![3, 1, 1, 0] }];
        assert!(degree5_exactness_check(&r, &odd, 2.0).unwrap() < 1e-12);
        let constant = [Monomial { coef: 1.0, exponents: vec![0; 4] }];
        assert!(degree5_exactness_check(&r, &constant, 2.0).unwrap() < 1e-14);
    }

    #[test]
    fn moments() {
        assert_eq!(gaussian_moment(0, 2.0f64), 1.0);
        assert_eq!(gaussian_moment(2, 2.0f64), 4.0);
        assert_eq!(gaussian_moment(4, 2.0f64), 48.0);
        assert_eq!(gaussian_moment(3, 2.0f64), 0.0);
    }
}
