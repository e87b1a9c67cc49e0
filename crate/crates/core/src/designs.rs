//! Experimental designs: factorial generators, the fixed benchmark designs,
//! and the orthogonality check under which the quadratic closed forms hold.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::domain::Design;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Largest input dimension accepted by [`full_factorial`].
pub const MAX_FACTORIAL_DIM: usize = 20;

pub const NRTL_T1: f64 = 298.15;
pub const NRTL_T2: f64 = 335.15;
pub const NRTL_T3: f64 = 373.15;

/// Names accepted by [`named_benchmark_design`].
pub const BENCHMARK_DESIGN_NAMES: [&str; 9] = [
    "quad1d_factorial",
    "quad1d_equidistant",
    "quad2d_factorial",
    "quad2d_equidistant",
    "exp_factorial",
    "exp_equidistant",
    "nrtl_factorial",
    "nrtl_equidistant",
    "quad2d_validation",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DesignKind {
    FullFactorial,
    FractionalFactorialD3,
    ReplicatedFactorial,
    EquidistantGrid,
    Explicit,
}

/// Declarative description of a design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignSpec {
    pub kind: DesignKind,
    pub dim_x: usize,
    #[serde(default = "one")]
    pub replicates: usize,
    /// Points per dimension for `equidistant_grid`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub explicit_points: Option<Vec<Vec<f64>>>,
}

fn one() -> usize {
    1
}

impl DesignSpec {
    pub fn build<T: Scalar>(&self) -> Result<Design<T>> {
        if self.replicates == 0 {
            return Err(Error::InvalidArgument("replicates must be >= 1".into()));
        }
        let base = match self.kind {
            DesignKind::FullFactorial | DesignKind::ReplicatedFactorial => {
                return full_factorial(self.dim_x, self.replicates)
            }
            DesignKind::FractionalFactorialD3 => {
                if self.dim_x != 3 {
                    return Err(Error::InvalidArgument(
                        "fractional_factorial_d3 requires dim_x = 3".into(),
                    ));
                }
                fractional_factorial_d3()
            }
            DesignKind::EquidistantGrid => {
                equidistant_grid(self.dim_x, self.levels.unwrap_or(3))?
            }
            DesignKind::Explicit => {
                let pts = self
                    .explicit_points
                    .as_ref()
                    .ok_or(Error::Missing("explicit_points for an explicit design"))?;
                let design = Design::new(
                    "explicit",
                    pts.iter()
                        .map(|p| p.iter().map(|&v| T::lit(v)).collect())
                        .collect(),
                )?;
                if design.dim_x() != self.dim_x {
                    return Err(Error::DimensionMismatch {
                        context: "explicit design dimension",
                        expected: self.dim_x,
                        actual: design.dim_x(),
                    });
                }
                design
            }
        };
        if self.replicates == 1 {
            Ok(base)
        } else {
            base.replicate(self.replicates)
        }
    }
}

/// All `2^dim_x` corners of `[-1, 1]^dim_x`, each repeated `replicates` times.
/// The first coordinate varies slowest; replicates are concatenated.
pub fn full_factorial<T: Scalar>(dim_x: usize, replicates: usize) -> Result<Design<T>> {
    if dim_x == 0 || dim_x > MAX_FACTORIAL_DIM {
        return Err(Error::InvalidArgument(format!(
            "full factorial dimension must be in 1..={MAX_FACTORIAL_DIM}, got {dim_x}"
        )));
    }
    if replicates == 0 {
        return Err(Error::InvalidArgument("replicates must be >= 1".into()));
    }
    let corners = 1usize << dim_x;
    let mut points = Vec::with_capacity(corners * replicates);
    for _ in 0..replicates {
        for c in 0..corners {
            points.push(
                (0..dim_x)
                    .map(|k| {
                        if (c >> (dim_x - 1 - k)) & 1 == 1 {
                            T::one()
                        } else {
                            -T::one()
                        }
                    })
                    .collect(),
            );
        }
    }
    Design::new(format!("full_factorial_d{dim_x}_r{replicates}"), points)
}

/// Four-run half fraction of the `2³` factorial.
pub fn fractional_factorial_d3<T: Scalar>() -> Design<T> {
    let cols: [[f64; 3]; 4] = [[-1., -1., -1.], [1., -1., 1.], [-1., 1., 1.], [1., 1., -1.]];
    Design::new("fractional_factorial_d3", lit_points(&cols)).expect("static design")
}

/// Tensor grid with `levels` equidistant values in `[-1, 1]` per dimension.
pub fn equidistant_grid<T: Scalar>(dim_x: usize, levels: usize) -> Result<Design<T>> {
    if dim_x == 0 || levels < 2 {
        return Err(Error::InvalidArgument(
            "equidistant grid needs dim_x >= 1 and levels >= 2".into(),
        ));
    }
    let values: Vec<T> = (0..levels)
        .map(|i| -T::one() + T::lit(2.0) * T::from_count(i) / T::from_count(levels - 1))
        .collect();
    let total = levels.checked_pow(dim_x as u32).ok_or_else(|| {
        Error::InvalidArgument("equidistant grid too large".into())
    })?;
    let points = (0..total)
        .map(|mut idx| {
            let mut p = vec![T::zero(); dim_x];
            for k in (0..dim_x).rev() {
                p[k] = values[idx % levels];
                idx /= levels;
            }
            p
        })
        .collect();
    Design::new(format!("equidistant_d{dim_x}_l{levels}"), points)
}

fn lit_points<T: Scalar, const D: usize>(rows: &[[f64; D]]) -> Vec<Vec<T>> {
    rows.iter()
        .map(|r| r.iter().map(|&v| T::lit(v)).collect())
        .collect()
}

/// The fixed designs used by validation and benchmark runs.
pub fn named_benchmark_design<T: Scalar>(name: &str) -> Result<Design<T>> {
    let univariate_factorial = [[-1.0], [-1.0], [1.0], [1.0]];
    let univariate_equidistant = [[-1.0], [-0.33], [0.33], [1.0]];
    let points: Vec<Vec<T>> = match name {
        "quad1d_factorial" | "exp_factorial" => lit_points(&univariate_factorial),
        "quad1d_equidistant" | "exp_equidistant" => lit_points(&univariate_equidistant),
        "quad2d_factorial" => lit_points(&[
            [-1., -1.],
            [-1., 1.],
            [1., -1.],
            [1., 1.],
            [-1., -1.],
            [-1., 1.],
            [1., -1.],
            [1., 1.],
            [-1., -1.],
        ]),
        "quad2d_equidistant" => lit_points(&[
            [-1., -1.],
            [0., -1.],
            [1., -1.],
            [-1., 0.],
            [0., 0.],
            [1., 0.],
            [-1., 1.],
            [0., 1.],
            [1., 1.],
        ]),
        "quad2d_validation" => lit_points(&[
            [-1., -1.],
            [-1., 1.],
            [1., -1.],
            [1., 1.],
            [-1., -1.],
            [-1., 1.],
            [1., -1.],
            [1., 1.],
        ]),
        "nrtl_factorial" => lit_points(&[
            [0.01, NRTL_T1],
            [0.01, NRTL_T3],
            [0.99, NRTL_T1],
            [0.99, NRTL_T3],
            [0.01, NRTL_T1],
            [0.01, NRTL_T3],
            [0.99, NRTL_T1],
            [0.99, NRTL_T3],
            [0.01, NRTL_T1],
        ]),
        "nrtl_equidistant" => lit_points(&[
            [0.01, NRTL_T1],
            [0.5, NRTL_T1],
            [0.99, NRTL_T1],
            [0.01, NRTL_T2],
            [0.5, NRTL_T2],
            [0.99, NRTL_T2],
            [0.01, NRTL_T3],
            [0.5, NRTL_T3],
            [0.99, NRTL_T3],
        ]),
        other => return Err(Error::UnknownName(other.to_string())),
    };
    Design::new(name, points)
}

/// Outcome of [`check_orthogonal`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OrthogonalityReport {
    /// Every coordinate is exactly -1 or 1.
    pub corners_ok: bool,
    /// The design points sum to the zero vector.
    pub zero_sum_ok: bool,
    /// `Σ_i x_ik x_il = n δ_kl`.
    pub orthogonality_ok: bool,
    pub notes: Vec<String>,
}

impl OrthogonalityReport {
    pub fn is_orthogonal(&self) -> bool {
        self.corners_ok && self.zero_sum_ok && self.orthogonality_ok
    }
}

/// Checks the corner, zero-sum and orthogonality conditions. For ±1 designs
/// the sums are taken in integer arithmetic.
pub fn check_orthogonal<T: Scalar>(design: &Design<T>) -> OrthogonalityReport {
    let n = design.n();
    let d = design.dim_x();
    let mut notes = Vec::new();
    let corners_ok = design
        .points()
        .iter()
        .flatten()
        .all(|&v| v == T::one() || v == -T::one());

    let (zero_sum_ok, orthogonality_ok) = if corners_ok {
        let signs: Vec<Vec<i64>> = design
            .points()
            .iter()
            .map(|p| p.iter().map(|&v| if v > T::zero() { 1 } else { -1 }).collect())
            .collect();
        let mut zero_sum = true;
        for k in 0..d {
            let s: i64 = signs.iter().map(|p| p[k]).sum();
            if s != 0 {
                zero_sum = false;
                notes.push(format!("column sum of coordinate {} is {s}", k + 1));
            }
        }
        let mut orth = true;
        for k in 0..d {
            for l in 0..d {
                let s: i64 = signs.iter().map(|p| p[k] * p[l]).sum();
                let expected = if k == l { n as i64 } else { 0 };
                if s != expected {
                    orth = false;
                    notes.push(format!(
                        "cross product of coordinates {} and {} is {s}, expected {expected}",
                        k + 1,
                        l + 1
                    ));
                }
            }
        }
        (zero_sum, orth)
    } else {
        notes.push("design has coordinates outside {-1, 1}".into());
        let nn = T::from_count(n);
        let mut zero_sum = true;
        let mut orth = true;
        for k in 0..d {
            let s = design.points().iter().fold(T::zero(), |acc, p| acc + p[k]);
            if s != T::zero() {
                zero_sum = false;
            }
            for l in 0..d {
                let s = design
                    .points()
                    .iter()
                    .fold(T::zero(), |acc, p| acc + p[k] * p[l]);
                let expected = if k == l { nn } else { T::zero() };
                if s != expected {
                    orth = false;
                }
            }
        }
        (zero_sum, orth)
    };

    OrthogonalityReport {
        corners_ok,
        zero_sum_ok,
        orthogonality_ok,
        notes,
    }
}

/// Writes one CSV row per design point with header `x1,...,xd`.
pub fn write_design_csv<T: Scalar, W: Write>(design: &Design<T>, mut out: W) -> Result<()> {
    let header: Vec<String> = (1..=design.dim_x()).map(|k| format!("x{k}")).collect();
    writeln!(out, "{}", header.join(","))?;
    for p in design.points() {
        let row: Vec<String> = p
            .iter()
            .map(|v| crate::report::format_real(v.to_f64_lossy()))
            .collect();
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn factorial_examples() {
        let d = full_factorial::<f64>(1, 1).unwrap();
        assert_eq!(d.points(), &[vec![-1.0], vec![1.0]]);
        let d2 = full_factorial::<f64>(2, 2).unwrap();
        let validation = named_benchmark_design::<f64>("quad2d_validation").unwrap();
        assert_eq!(d2.points(), validation.points());
        assert_eq!(validation.n(), 8);
        assert!(check_orthogonal(&full_factorial::<f64>(3, 1).unwrap()).is_orthogonal());
        assert!(full_factorial::<f64>(21, 1).is_err());
        assert!(full_factorial::<f64>(0, 1).is_err());
        assert!(full_factorial::<f64>(2, 0).is_err());
    }

    #[test]
    fn every_corner_appears_replicate_times() {
        let d = full_factorial::<f64>(3, 3).unwrap();
        assert_eq!(d.n(), 24);
        for c in full_factorial::<f64>(3, 1).unwrap().points() {
            assert_eq!(d.points().iter().filter(|p| *p == c).count(), 3);
        }
    }

    #[test]
    fn fractional_design() {
        let d = fractional_factorial_d3::<f64>();
        assert_eq!(d.n(), 4);
        assert_eq!(d.point(0), &[-1.0, -1.0, -1.0]);
        assert_eq!(d.point(1), &[1.0, -1.0, 1.0]);
        assert!(check_orthogonal(&d).is_orthogonal());
    }

    #[test]
    fn benchmark_designs() {
        let eq = named_benchmark_design::<f64>("quad1d_equidistant").unwrap();
        assert_eq!(eq.points(), &[vec![-1.0], vec![-0.33], vec![0.33], vec![1.0]]);
        let nrtl = named_benchmark_design::<f64>("nrtl_equidistant").unwrap();
        assert_eq!(nrtl.point(4), &[0.5, 335.15]);
        assert!(named_benchmark_design::<f64>("nope").is_err());
        for name in BENCHMARK_DESIGN_NAMES {
            assert!(named_benchmark_design::<f64>(name).is_ok());
        }
    }

    #[test]
    fn orthogonality_failures_are_reported() {
        let irregular = check_orthogonal(&named_benchmark_design::<f64>("quad2d_factorial").unwrap());
        assert!(irregular.corners_ok);
        assert!(!irregular.zero_sum_ok);
        assert!(!irregular.notes.is_empty());
        for name in ["quad1d_equidistant", "quad2d_equidistant", "nrtl_equidistant"] {
            let r = check_orthogonal(&named_benchmark_design::<f64>(name).unwrap());
            assert!(!r.corners_ok, "{name}");
        }
        assert!(check_orthogonal(&named_benchmark_design::<f64>("quad1d_factorial").unwrap()).is_orthogonal());
    }

    #[test]
    fn factorial_is_orthogonal_for_all_small_sizes() {
        for d in 1..=10 {
            for r in 1..=3 {
                let report = check_orthogonal(&full_factorial::<f64>(d, r).unwrap());
                assert!(report.is_orthogonal(), "d={d} r={r}");
            }
        }
    }

    #[test]
    fn replication_preserves_orthogonality() {
        let base = fractional_factorial_d3::<f64>();
        for r in 1..=4 {
            let rep = base.replicate(r).unwrap();
            assert_eq!(rep.n(), 4 * r);
            assert!(check_orthogonal(&rep).is_orthogonal());
        }
    }

    #[test]
    fn spec_build_and_csv() {
        let spec = DesignSpec {
            kind: DesignKind::Explicit,
            dim_x: 1,
            replicates: 2,
            levels: None,
            explicit_points: Some(vec![vec![0.5], vec![-0.5]]),
        };
        let d: Design<f64> = spec.build().unwrap();
        assert_eq!(d.n(), 4);
        let missing = DesignSpec { explicit_points: None, ..spec.clone() };
        assert!(missing.build::<f64>().is_err());
        let grid = DesignSpec {
            kind: DesignKind::EquidistantGrid,
            dim_x: 2,
            replicates: 1,
            levels: Some(3),
            explicit_points: None,
        };
        let g: Design<f64> = grid.build().unwrap();
        assert_eq!(g.n(), 9);
        assert_eq!(g.point(4), &[0.0, 0.0]);

        let mut buf = Vec::new();
        write_design_csv(&fractional_factorial_d3::<f64>(), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("x1,x2,x3\n"));
        assert_eq!(text.lines().count(), 5);
    }
}
