// SPDX-License-Identifier: Apache-2.0

//! Confinement and interaction potentials.
//!
//! Every built-in kind is even, `Φ(−x) = Φ(x)`, and its gradient is computed
//! so that `grad(−x) = −grad(x)` holds bit-for-bit: radial kinds scale `x` by
//! a factor that depends only on `|x|²`, and the tabulated kind is evaluated
//! by odd extension of a table given on `[0, R]`.
//!
//! Besides the analytic shape, a [`Potential`] carries *declared* structural
//! constants (polynomial growth degree `m`, convexity-at-infinity `(λ, C)`,
//! degenerate-convexity `(A, α)`). These are claims, checked numerically on
//! probe sets by [`conditions`].

pub mod conditions;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use conditions::{
    check_condition_c, check_convexity_at_infinity, check_polynomial_growth,
    verify_declared_convexity, ConditionName, ConditionReport, ProbeSpec,
};

/// Analytic shape of a potential.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PotentialKind {
    /// `x ↦ |x|^p`, `p ≥ 2`.
    PowerLaw { exponent: f64 },
    /// `x ↦ κ|x|²`.
    Quadratic { stiffness: f64 },
    /// `x ↦ κ|x|² + a·(1 − |x|²/ρ²)³` inside the ball of radius `ρ`, `κ|x|²`
    /// outside. The bump is C² and compactly supported; a large enough `a`
    /// makes the potential concave near the origin.
    UniformPlusBump {
        stiffness: f64,
        amplitude: f64,
        radius: f64,
    },
    Zero,
    /// Separable potential `Σ_c φ(x_c)` with `φ'` tabulated at `k·spacing`,
    /// `k = 0..len`, and interpolated linearly. `φ'` is extended oddly to
    /// negative arguments and forced to vanish at 0.
    Sampled { spacing: f64, derivative: Vec<f64> },
}

/// A potential together with its declared structural constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Potential {
    #[serde(flatten)]
    pub kind: PotentialKind,
    /// Degree `m` in `|∇Φ(x)−∇Φ(y)| ≤ C(|x−y|∧1)(1+|x|^m+|y|^m)`.
    pub growth_exponent_m: u32,
    pub declared_lambda: f64,
    pub declared_c: f64,
    /// `A` of the degenerate-convexity condition; `0` means no claim.
    pub declared_a: f64,
    pub declared_alpha: f64,
}

impl Potential {
    pub fn zero() -> Self {
        Potential {
            kind: PotentialKind::Zero,
            growth_exponent_m: 0,
            declared_lambda: 0.0,
            declared_c: 0.0,
            declared_a: 0.0,
            declared_alpha: 0.0,
        }
    }

    pub fn quadratic(stiffness: f64) -> Self {
        Potential {
            kind: PotentialKind::Quadratic { stiffness },
            growth_exponent_m: 1,
            declared_lambda: 2.0 * stiffness,
            declared_c: 0.0,
            declared_a: 2.0 * stiffness,
            declared_alpha: 0.0,
        }
    }

    /// `|x|^p` with constants derived from the monotonicity bound
    /// `(x−y)·(∇W(x)−∇W(y)) ≥ p·2^{2−p}|x−y|^p`.
    pub fn power_law(exponent: f64) -> Self {
        let p = exponent;
        let alpha = (p - 2.0).max(0.0);
        let c = p * 2f64.powf(2.0 - p);
        // Largest A with c·s^{1+α/2} ≥ A·ε^α(s − ε²) for all s ≥ 0, ε ∈ (0,1);
        // the right side is maximised at ε² = α s/(2+α).
        let a = if alpha == 0.0 {
            c
        } else {
            let r = alpha / (2.0 + alpha);
            c / (r.powf(alpha / 2.0) * 2.0 / (2.0 + alpha))
        };
        // λ = 1 and the matching C = max_s (s² − c s^p) for p > 2.
        let (lambda, big_c) = if alpha == 0.0 {
            (c, 0.0)
        } else {
            let s = (2.0 / (c * p)).powf(1.0 / (p - 2.0));
            (1.0, s * s * (1.0 - 2.0 / p))
        };
        Potential {
            kind: PotentialKind::PowerLaw { exponent },
            growth_exponent_m: (p - 1.0).ceil().max(1.0) as u32,
            declared_lambda: lambda,
            declared_c: big_c,
            declared_a: a,
            declared_alpha: alpha,
        }
    }

    /// Uniformly convex quadratic plus a compactly supported bump. The
    /// declared `(λ, C)` = `(κ, G²/κ)` with `G` the sup of the bump gradient;
    /// no degenerate-convexity claim is made.
    pub fn uniform_plus_bump(stiffness: f64, amplitude: f64, radius: f64) -> Self {
        // max_r r(1−r²)² is attained at r² = 1/5.
        let peak = (0.2f64).sqrt() * 0.64;
        let g = 6.0 * amplitude.abs() * peak / radius;
        Potential {
            kind: PotentialKind::UniformPlusBump {
                stiffness,
                amplitude,
                radius,
            },
            growth_exponent_m: 1,
            declared_lambda: stiffness,
            declared_c: g * g / stiffness,
            declared_a: 0.0,
            declared_alpha: 0.0,
        }
    }

    pub fn sampled(spacing: f64, derivative: Vec<f64>) -> Self {
        Potential {
            kind: PotentialKind::Sampled {
                spacing,
                derivative,
            },
            growth_exponent_m: 1,
            declared_lambda: 0.0,
            declared_c: 0.0,
            declared_a: 0.0,
            declared_alpha: 0.0,
        }
    }

    pub fn with_growth(mut self, m: u32) -> Self {
        self.growth_exponent_m = m;
        self
    }

    pub fn with_convexity(mut self, lambda: f64, c: f64) -> Self {
        self.declared_lambda = lambda;
        self.declared_c = c;
        self
    }

    pub fn with_condition_c(mut self, a: f64, alpha: f64) -> Self {
        self.declared_a = a;
        self.declared_alpha = alpha;
        self
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.kind, PotentialKind::Zero)
    }

    /// Structural checks on the shape parameters.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        match &self.kind {
            PotentialKind::PowerLaw { exponent } => {
                if !(exponent.is_finite() && *exponent >= 2.0) {
                    return bad(format!("power_law exponent must be >= 2, got {exponent}"));
                }
            }
            PotentialKind::Quadratic { stiffness } => {
                if !(stiffness.is_finite() && *stiffness > 0.0) {
                    return bad(format!("quadratic stiffness must be > 0, got {stiffness}"));
                }
            }
            PotentialKind::UniformPlusBump {
                stiffness,
                amplitude,
                radius,
            } => {
                if !(stiffness.is_finite() && *stiffness > 0.0) {
                    return bad(format!("bump stiffness must be > 0, got {stiffness}"));
                }
                if !amplitude.is_finite() {
                    return bad("bump amplitude must be finite".into());
                }
                if !(radius.is_finite() && *radius > 0.0) {
                    return bad(format!("bump radius must be > 0, got {radius}"));
                }
            }
            PotentialKind::Zero => {}
            PotentialKind::Sampled {
                spacing,
                derivative,
            } => {
                if !(spacing.is_finite() && *spacing > 0.0) {
                    return bad(format!("sampled spacing must be > 0, got {spacing}"));
                }
                if derivative.len() < 2 {
                    return bad("sampled derivative table needs at least 2 nodes".into());
                }
                if derivative.iter().any(|v| !v.is_finite()) {
                    return bad("sampled derivative table has non-finite entries".into());
                }
            }
        }
        for (name, v) in [
            ("declared_lambda", self.declared_lambda),
            ("declared_c", self.declared_c),
            ("declared_a", self.declared_a),
            ("declared_alpha", self.declared_alpha),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name} must be finite and >= 0, got {v}"));
            }
        }
        Ok(())
    }

    /// `Φ(x)`.
    pub fn value(&self, x: &[f64]) -> Result<f64> {
        let r2 = norm2(x);
        Ok(match &self.kind {
            PotentialKind::PowerLaw { exponent } => r2.powf(exponent / 2.0),
            PotentialKind::Quadratic { stiffness } => stiffness * r2,
            PotentialKind::UniformPlusBump {
                stiffness,
                amplitude,
                radius,
            } => {
                let u = 1.0 - r2 / (radius * radius);
                let bump = if u > 0.0 { amplitude * u * u * u } else { 0.0 };
                stiffness * r2 + bump
            }
            PotentialKind::Zero => 0.0,
            PotentialKind::Sampled {
                spacing,
                derivative,
            } => {
                let mut total = 0.0;
                for (c, &xc) in x.iter().enumerate() {
                    total += sampled_antiderivative(*spacing, derivative, c, xc.abs())?;
                }
                total
            }
        })
    }

    /// Writes `∇Φ(x)` into `out`.
    #[inline]
    pub fn grad_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        debug_assert_eq!(x.len(), out.len());
        match &self.kind {
            PotentialKind::PowerLaw { exponent } => {
                let r2 = norm2(x);
                let factor = if r2 == 0.0 {
                    0.0
                } else if *exponent == 4.0 {
                    4.0 * r2
                } else if *exponent == 2.0 {
                    2.0
                } else {
                    exponent * r2.powf((exponent - 2.0) / 2.0)
                };
                scale_into(x, factor, out);
            }
            PotentialKind::Quadratic { stiffness } => scale_into(x, 2.0 * stiffness, out),
            PotentialKind::UniformPlusBump {
                stiffness,
                amplitude,
                radius,
            } => {
                let rho2 = radius * radius;
                let u = 1.0 - norm2(x) / rho2;
                let bump = if u > 0.0 {
                    -6.0 * amplitude * u * u / rho2
                } else {
                    0.0
                };
                scale_into(x, 2.0 * stiffness + bump, out);
            }
            PotentialKind::Zero => out.iter_mut().for_each(|o| *o = 0.0),
            PotentialKind::Sampled {
                spacing,
                derivative,
            } => {
                for (c, (&xc, o)) in x.iter().zip(out.iter_mut()).enumerate() {
                    let mag = sampled_derivative(*spacing, derivative, c, xc.abs())?;
                    *o = if xc > 0.0 {
                        mag
                    } else if xc < 0.0 {
                        -mag
                    } else {
                        0.0
                    };
                }
            }
        }
        Ok(())
    }

    pub fn grad(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; x.len()];
        self.grad_into(x, &mut out)?;
        Ok(out)
    }
}

#[inline]
pub(crate) fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

#[inline]
fn scale_into(x: &[f64], factor: f64, out: &mut [f64]) {
    for (o, &v) in out.iter_mut().zip(x) {
        *o = factor * v;
    }
}

fn sampled_range(spacing: f64, table: &[f64]) -> f64 {
    spacing * (table.len() - 1) as f64
}

fn sampled_locate(spacing: f64, table: &[f64], coordinate: usize, t: f64) -> Result<(usize, f64)> {
    let range = sampled_range(spacing, table);
    if !(t <= range) {
        return Err(Error::Domain {
            coordinate,
            value: t,
            range,
        });
    }
    let pos = t / spacing;
    let k = (pos.floor() as usize).min(table.len() - 2);
    Ok((k, pos - k as f64))
}

#[inline]
fn node(table: &[f64], k: usize) -> f64 {
    if k == 0 {
        0.0
    } else {
        table[k]
    }
}

fn sampled_derivative(spacing: f64, table: &[f64], coordinate: usize, t: f64) -> Result<f64> {
    let (k, frac) = sampled_locate(spacing, table, coordinate, t)?;
    Ok(node(table, k) * (1.0 - frac) + node(table, k + 1) * frac)
}

/// Exact integral of the piecewise-linear derivative on `[0, t]`.
fn sampled_antiderivative(spacing: f64, table: &[f64], coordinate: usize, t: f64) -> Result<f64> {
    let (k, frac) = sampled_locate(spacing, table, coordinate, t)?;
    let mut total = 0.0;
    for j in 0..k {
        total += 0.5 * spacing * (node(table, j) + node(table, j + 1));
    }
    let a = node(table, k);
    let b = node(table, k + 1);
    let h = frac * spacing;
    total += h * (a + 0.5 * (b - a) * frac);
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn quadratic_gradient_is_two_kappa_x() {
        let q = Potential::quadratic(1.0);
        assert_eq!(q.grad(&[3.0]).unwrap(), vec![6.0]);
        let q = Potential::quadratic(0.75);
        assert_eq!(q.grad(&[1.0, -2.0]).unwrap(), vec![1.5, -3.0]);
    }

    #[test]
    fn power_law_gradient_values() {
        let p4 = Potential::power_law(4.0);
        assert_eq!(p4.grad(&[2.0]).unwrap(), vec![32.0]);
        let p3 = Potential::power_law(3.0);
        assert_eq!(p3.grad(&[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
        // 3|x| x at x = (3, 4): 3·5·(3,4)
        let g = p3.grad(&[3.0, 4.0]).unwrap();
        assert!((g[0] - 45.0).abs() < 1e-12 && (g[1] - 60.0).abs() < 1e-12);
    }

    #[test]
    fn gradients_vanish_at_origin() {
        for pot in [
            Potential::zero(),
            Potential::quadratic(2.0),
            Potential::power_law(2.5),
            Potential::power_law(4.0),
            Potential::uniform_plus_bump(1.0, 2.0, 1.0),
            Potential::sampled(0.5, vec![3.0, 1.0, 2.0]),
        ] {
            assert_eq!(pot.grad(&[0.0, 0.0, 0.0]).unwrap(), vec![0.0; 3]);
        }
    }

    #[test]
    fn sampled_out_of_range_names_coordinate() {
        let s = Potential::sampled(0.5, vec![0.0, 1.0, 2.0]);
        match s.grad(&[0.1, -1.5]) {
            Err(Error::Domain { coordinate, .. }) => assert_eq!(coordinate, 1),
            other => panic!("expected domain error, got {other:?}"),
        }
        assert!(s.grad(&[1.0, -1.0]).is_ok());
    }

    #[test]
    fn sampled_interpolates_linearly() {
        let s = Potential::sampled(1.0, vec![0.0, 2.0, 4.0]);
        assert_eq!(s.grad(&[1.5]).unwrap(), vec![3.0]);
        assert_eq!(s.grad(&[-0.5]).unwrap(), vec![-1.0]);
        // φ(t) = t² here.
        assert!((s.value(&[1.5]).unwrap() - 2.25).abs() < 1e-12);
    }

    #[test]
    fn validate_rejects_bad_shapes() {
        assert!(Potential::power_law(1.0).validate().is_err());
        assert!(Potential::quadratic(0.0).validate().is_err());
        assert!(Potential::sampled(0.1, vec![1.0]).validate().is_err());
        assert!(Potential::power_law(4.0).validate().is_ok());
    }

    #[test]
    fn power_law_declared_constants() {
        let p = Potential::power_law(4.0);
        assert_eq!(p.growth_exponent_m, 3);
        assert_eq!(p.declared_alpha, 2.0);
        assert!((p.declared_a - 4.0).abs() < 1e-12);
        assert!((p.declared_c - 0.25).abs() < 1e-12);
        let q = Potential::power_law(2.0);
        assert_eq!(q.declared_a, 2.0);
        assert_eq!(q.declared_lambda, 2.0);
    }

    /// Central differences have an O(h²) error: over three decades of `h`
    /// the log-log slope of the error should be close to 2.
    #[test]
    fn finite_difference_order_two() {
        let x = [0.7, -1.3];
        for pot in [
            Potential::power_law(4.0),
            Potential::power_law(3.5),
            Potential::uniform_plus_bump(1.0, 0.5, 2.0),
        ] {
            let g = pot.grad(&x).unwrap();
            let mut pts = Vec::new();
            for h in [1e-1, 3e-2, 1e-2, 3e-3, 1e-3] {
                let mut err = 0.0f64;
                for c in 0..2 {
                    let mut xp = x;
                    let mut xm = x;
                    xp[c] += h;
                    xm[c] -= h;
                    let fd = (pot.value(&xp).unwrap() - pot.value(&xm).unwrap()) / (2.0 * h);
                    err = err.max((fd - g[c]).abs());
                }
                pts.push(((h as f64).ln(), err.ln()));
            }
            let slope = crate::experiments::fit::linear_fit(&pts).slope;
            assert!((slope - 2.0).abs() < 0.2, "{pot:?}: slope {slope}");
        }
    }

    fn symmetric_kinds() -> Vec<Potential> {
        vec![
            Potential::power_law(2.0),
            Potential::power_law(2.7),
            Potential::power_law(4.0),
            Potential::quadratic(0.3),
            Potential::uniform_plus_bump(1.0, 2.0, 1.5),
            Potential::sampled(0.25, vec![0.0, 0.5, 0.7, 2.0, 3.0, 3.5, 4.0, 9.0, 11.0]),
        ]
    }

    proptest! {
        #[test]
        fn gradient_is_exactly_odd(x in proptest::collection::vec(-2.0f64..2.0, 1..4)) {
            let neg: Vec<f64> = x.iter().map(|v| -v).collect();
            for pot in symmetric_kinds() {
                let g = pot.grad(&x).unwrap();
                let gn = pot.grad(&neg).unwrap();
                for (a, b) in g.iter().zip(&gn) {
                    prop_assert_eq!(a + b, 0.0);
                }
            }
        }
    }
}
