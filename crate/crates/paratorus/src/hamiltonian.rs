//! Polynomial Hamiltonian densities F(x, z0, z1), their partial derivatives,
//! the expanded evolution right-hand side, ellipticity monitoring and the
//! conserved energy.

use crate::error::{Error, Result};
use crate::grid::{analyze, quadrature, Dft, GridFunction};
use crate::scalar::Scalar;

/// One density monomial c * cos(k_cos x) * sin(k_sin x) * z0^p * z1^q.
/// A zero trig frequency means the corresponding factor is omitted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Monomial<T: Scalar> {
    pub c: T,
    pub p: u32,
    pub q: u32,
    pub k_cos: i64,
    pub k_sin: i64,
}

impl<T: Scalar> Monomial<T> {
    /// dx-th derivative of the trig factor at x (Leibniz over the two factors).
    fn trig_deriv(&self, dx: u32, x: T) -> T {
        let half_pi = T::PI() / T::of(2.0);
        let cos_part = |n: u32| {
            if self.k_cos == 0 {
                if n == 0 {
                    T::one()
                } else {
                    T::zero()
                }
            } else {
                let a = T::of(self.k_cos as f64);
                a.powi(n as i32) * (a * x + T::of(n as f64) * half_pi).cos()
            }
        };
        let sin_part = |n: u32| {
            if self.k_sin == 0 {
                if n == 0 {
                    T::one()
                } else {
                    T::zero()
                }
            } else {
                let b = T::of(self.k_sin as f64);
                b.powi(n as i32) * (b * x + T::of(n as f64) * half_pi).sin()
            }
        };
        let mut acc = T::zero();
        let mut binom = T::one();
        for i in 0..=dx {
            acc += binom * cos_part(i) * sin_part(dx - i);
            binom = binom * T::of((dx - i) as f64) / T::of((i + 1) as f64);
        }
        acc
    }

    fn power_deriv(p: u32, d: u32, z: T) -> T {
        if d > p {
            return T::zero();
        }
        let mut f = T::one();
        for i in 0..d {
            f *= T::of((p - i) as f64);
        }
        f * z.powi((p - d) as i32)
    }
}

/// Polynomial density with pointwise-evaluable partial derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianDensity<T: Scalar> {
    monomials: Vec<Monomial<T>>,
}

impl<T: Scalar> HamiltonianDensity<T> {
    pub fn monomials(&self) -> &[Monomial<T>] {
        &self.monomials
    }

    /// Largest total polynomial degree p + q across monomials.
    pub fn degree(&self) -> u32 {
        self.monomials.iter().map(|m| m.p + m.q).max().unwrap_or(0)
    }

    pub fn eval(&self, x: T, z0: T, z1: T) -> T {
        self.partial(0, 0, 0, x, z0, z1)
    }

    /// Mixed partial d_x^dx d_z0^dz0 d_z1^dz1 F at (x, z0, z1).
    pub fn partial(&self, dx: u32, dz0: u32, dz1: u32, x: T, z0: T, z1: T) -> T {
        let mut acc = T::zero();
        for m in &self.monomials {
            acc += m.c
                * m.trig_deriv(dx, x)
                * Monomial::power_deriv(m.p, dz0, z0)
                * Monomial::power_deriv(m.q, dz1, z1);
        }
        acc
    }

    /// Samples of a partial derivative along the state (x, u(x), u_x(x)).
    pub fn partial_along(
        &self,
        dx: u32,
        dz0: u32,
        dz1: u32,
        u: &GridFunction<T>,
        gridsize: usize,
    ) -> Result<Vec<T>> {
        let dft = Dft::new(gridsize);
        let uu = u.synthesize(gridsize)?;
        let ux = u.differentiate().synthesize(gridsize)?;
        Ok(dft
            .grid()
            .into_iter()
            .zip(uu.iter().zip(&ux))
            .map(|(x, (&z0, &z1))| self.partial(dx, dz0, dz1, x, z0, z1))
            .collect())
    }

    pub fn to_text(&self) -> String {
        let mut s = String::from("# density: c p q k_cos k_sin\n");
        for m in &self.monomials {
            s.push_str(&format!(
                "{:.17e} {} {} {} {}\n",
                m.c.to_f64_lossy(),
                m.p,
                m.q,
                m.k_cos,
                m.k_sin
            ));
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut monomials = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.len() != 5 {
                return Err(Error::Parse(format!(
                    "density line needs 5 fields (c p q k_cos k_sin): {line:?}"
                )));
            }
            let c: f64 = parts[0]
                .parse()
                .map_err(|e| Error::Parse(format!("bad coefficient {:?}: {e}", parts[0])))?;
            let p: u32 = parts[1]
                .parse()
                .map_err(|e| Error::Parse(format!("bad z0 power {:?}: {e}", parts[1])))?;
            let q: u32 = parts[2]
                .parse()
                .map_err(|e| Error::Parse(format!("bad z1 power {:?}: {e}", parts[2])))?;
            let k_cos: i64 = parts[3]
                .parse()
                .map_err(|e| Error::Parse(format!("bad cosine frequency {:?}: {e}", parts[3])))?;
            let k_sin: i64 = parts[4]
                .parse()
                .map_err(|e| Error::Parse(format!("bad sine frequency {:?}: {e}", parts[4])))?;
            monomials.push(Monomial {
                c: T::of(c),
                p,
                q,
                k_cos,
                k_sin,
            });
        }
        build_density(monomials)
    }
}

/// Validate and assemble a density. Monomials must be genuinely nonlinear
/// (total degree p + q at least 2) so that F has no constant or linear part.
pub fn build_density<T: Scalar>(monomials: Vec<Monomial<T>>) -> Result<HamiltonianDensity<T>> {
    for m in &monomials {
        if !m.c.is_finite() {
            return Err(Error::InvalidParameter(
                "density coefficient must be finite".into(),
            ));
        }
        if m.p + m.q <= 1 {
            return Err(Error::InvalidParameter(format!(
                "density monomial with z0 power {} and z1 power {} is constant or linear; \
                 total degree must be at least 2",
                m.p, m.q
            )));
        }
    }
    Ok(HamiltonianDensity { monomials })
}

/// The classical KdV density (1/2) z1^2 - (1/6) z0^3.
pub fn kdv_density<T: Scalar>() -> HamiltonianDensity<T> {
    build_density(vec![
        Monomial {
            c: T::of(0.5),
            p: 0,
            q: 2,
            k_cos: 0,
            k_sin: 0,
        },
        Monomial {
            c: T::of(-1.0 / 6.0),
            p: 3,
            q: 0,
            k_cos: 0,
            k_sin: 0,
        },
    ])
    .expect("KdV density is valid")
}

/// The quasilinear test density (1/2)(1 + z0^2) z1^2.
pub fn quasilinear_density<T: Scalar>() -> HamiltonianDensity<T> {
    build_density(vec![
        Monomial {
            c: T::of(0.5),
            p: 0,
            q: 2,
            k_cos: 0,
            k_sin: 0,
        },
        Monomial {
            c: T::of(0.5),
            p: 2,
            q: 2,
            k_cos: 0,
            k_sin: 0,
        },
    ])
    .expect("quasilinear density is valid")
}

#[derive(Debug, Clone, Copy)]
pub struct EllipticityReport<T: Scalar> {
    /// min over the grid of d^2F/dz1^2 at (x, u, u_x)
    pub margin: T,
    pub attained_at: usize,
}

pub(crate) fn eval_gridsize(f_degree: u32, trunc: usize) -> usize {
    let g = ((f_degree as usize + 1) * trunc).max(4 * trunc).max(64);
    if g % 2 == 0 {
        g
    } else {
        g + 1
    }
}

pub fn ellipticity_margin<T: Scalar>(
    f: &HamiltonianDensity<T>,
    u: &GridFunction<T>,
) -> Result<EllipticityReport<T>> {
    let g = eval_gridsize(f.degree(), u.trunc());
    let vals = f.partial_along(0, 0, 2, u, g)?;
    let mut margin = T::infinity();
    let mut at = 0;
    for (i, &v) in vals.iter().enumerate() {
        if v < margin {
            margin = v;
            at = i;
        }
    }
    Ok(EllipticityReport {
        margin,
        attained_at: at,
    })
}

/// Right-hand side of the evolution written with all chain-rule terms
/// expanded, evaluated on a dealiased grid and band-projected. Fails if the
/// ellipticity margin at u is not strictly positive.
pub fn nonlinear_rhs<T: Scalar>(
    f: &HamiltonianDensity<T>,
    u: &GridFunction<T>,
) -> Result<GridFunction<T>> {
    let rep = ellipticity_margin(f, u)?;
    if rep.margin <= T::zero() {
        return Err(Error::Ellipticity {
            margin: rep.margin.to_f64_lossy(),
        });
    }
    let g = eval_gridsize(f.degree(), u.trunc());
    let dft = Dft::new(g);
    let uu = u.synthesize(g)?;
    let d1 = u.differentiate();
    let d2 = d1.differentiate();
    let d3 = d2.differentiate();
    let ux = d1.synthesize(g)?;
    let uxx = d2.synthesize(g)?;
    let uxxx = d3.synthesize(g)?;
    let two = T::of(2.0);
    let mut vals = Vec::with_capacity(g);
    for (i, x) in dft.grid().into_iter().enumerate() {
        let z0 = uu[i];
        let z1 = ux[i];
        let p = |dx: u32, dz0: u32, dz1: u32| f.partial(dx, dz0, dz1, x, z0, z1);
        let bracket = uxxx[i] * p(0, 0, 2)
            + two * uxx[i] * p(1, 0, 2)
            + uxx[i] * uxx[i] * p(0, 0, 3)
            + two * ux[i] * uxx[i] * p(0, 1, 2)
            + ux[i] * ux[i] * p(0, 2, 1)
            + ux[i] * (two * p(1, 1, 1) - p(0, 2, 0))
            - p(1, 1, 0)
            + p(2, 0, 1);
        vals.push(-bracket);
    }
    analyze(&vals, u.trunc())
}

/// Quadrature of F(x, u, u_x) over the torus.
pub fn hamiltonian_value<T: Scalar>(f: &HamiltonianDensity<T>, u: &GridFunction<T>) -> Result<T> {
    let g = eval_gridsize(f.degree(), u.trunc());
    let vals = f.partial_along(0, 0, 0, u, g)?;
    Ok(quadrature(&vals))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::SobolevIndex;
    use crate::scalar::{cx, Cx};
    use approx::assert_abs_diff_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn from_samples<F: Fn(f64) -> f64>(trunc: usize, f: F) -> GridFunction<f64> {
        let n = 16 * (trunc + 1);
        let samples: Vec<f64> = (0..n)
            .map(|k| f(2.0 * std::f64::consts::PI * k as f64 / n as f64))
            .collect();
        analyze(&samples, trunc).unwrap()
    }

    #[test]
    fn kdv_density_accepted() {
        let f = kdv_density::<f64>();
        // d^2F/dz1^2 = 1 everywhere
        for &(x, z0, z1) in &[(0.0, 0.0, 0.0), (1.0, 2.0, -3.0)] {
            assert_abs_diff_eq!(f.partial(0, 0, 2, x, z0, z1), 1.0);
        }
    }

    #[test]
    fn quasilinear_density_accepted() {
        let f = quasilinear_density::<f64>();
        for &(x, z0, z1) in &[(0.0, 0.0, 0.0), (1.0, 2.0, -3.0)] {
            assert_abs_diff_eq!(f.partial(0, 0, 2, x, z0, z1), 1.0 + z0 * z0);
        }
    }

    #[test]
    fn linear_monomial_rejected() {
        let r = build_density(vec![Monomial {
            c: 1.0f64,
            p: 1,
            q: 0,
            k_cos: 0,
            k_sin: 0,
        }]);
        assert!(r.is_err());
    }

    #[test]
    fn partials_match_finite_differences() {
        let f = build_density(vec![
            Monomial {
                c: 0.7f64,
                p: 2,
                q: 1,
                k_cos: 1,
                k_sin: 0,
            },
            Monomial {
                c: -0.3,
                p: 0,
                q: 3,
                k_cos: 0,
                k_sin: 2,
            },
            Monomial {
                c: 0.5,
                p: 1,
                q: 2,
                k_cos: 2,
                k_sin: 1,
            },
        ])
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let x: f64 = rng.gen_range(0.0..6.28);
            let z0: f64 = rng.gen_range(-1.0..1.0);
            let z1: f64 = rng.gen_range(-1.0..1.0);
            let h = 1e-5;
            for (dx, dz0, dz1) in [(0, 1, 0), (0, 0, 1), (1, 1, 0), (0, 2, 1), (2, 0, 1)] {
                let exact = f.partial(dx, dz0, dz1, x, z0, z1);
                // central FD in the innermost differentiation direction
                let (lo0, lo1) = (dz0.max(1) - 1, dz1);
                let fd = if dz0 > 0 {
                    (f.partial(dx, lo0, lo1, x, z0 + h, z1)
                        - f.partial(dx, lo0, lo1, x, z0 - h, z1))
                        / (2.0 * h)
                } else if dz1 > 0 {
                    (f.partial(dx, dz0, dz1 - 1, x, z0, z1 + h)
                        - f.partial(dx, dz0, dz1 - 1, x, z0, z1 - h))
                        / (2.0 * h)
                } else {
                    exact
                };
                let scale = 1.0 + exact.abs();
                assert!(
                    (fd - exact).abs() < 1e-7 * scale,
                    "partial ({dx},{dz0},{dz1}) at ({x},{z0},{z1}): fd={fd} exact={exact}"
                );
            }
        }
    }

    #[test]
    fn rhs_kdv_cosine_hand_computation() {
        // u = cos x: rhs = -u_xxx - u u_x = -sin x + cos x sin x
        let f = kdv_density::<f64>();
        let u = from_samples(8, |x| x.cos());
        let rhs = nonlinear_rhs(&f, &u).unwrap();
        // -sin x: coeff(1) = i/2, coeff(-1) = -i/2
        // (1/2) sin 2x: coeff(2) = -i/4, coeff(-2) = i/4
        let expect = |j: i64| -> Cx<f64> {
            match j {
                1 => cx(0.0, 0.5),
                -1 => cx(0.0, -0.5),
                2 => cx(0.0, -0.25),
                -2 => cx(0.0, 0.25),
                _ => cx(0.0, 0.0),
            }
        };
        for j in -8i64..=8 {
            if j == 0 {
                continue;
            }
            assert!(
                (rhs.coeff(j) - expect(j)).norm() < 1e-13,
                "mode {j}: {} vs {}",
                rhs.coeff(j),
                expect(j)
            );
        }
    }

    #[test]
    fn rhs_zero_state() {
        let f = kdv_density::<f64>();
        let u = GridFunction::<f64>::zero(8);
        let rhs = nonlinear_rhs(&f, &u).unwrap();
        assert_eq!(rhs.sobolev_norm(SobolevIndex(0.0)), 0.0);
    }

    #[test]
    fn rhs_mean_free_for_random_states() {
        // total x-derivative structure: the projection onto the mean vanishes
        // before band projection too; check on the dealiased grid directly
        let f = quasilinear_density::<f64>();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..5 {
            let u = GridFunction::<f64>::random_real(16, 2.0, 0.3, &mut rng);
            let g = eval_gridsize(f.degree(), u.trunc());
            let dft = Dft::<f64>::new(g);
            let uu = u.synthesize(g).unwrap();
            let ux = u.differentiate().synthesize(g).unwrap();
            let uxx = u.differentiate().differentiate().synthesize(g).unwrap();
            let uxxx = u
                .differentiate()
                .differentiate()
                .differentiate()
                .synthesize(g)
                .unwrap();
            let vals: Vec<f64> = dft
                .grid()
                .into_iter()
                .enumerate()
                .map(|(i, x)| {
                    let p = |dx, dz0, dz1| f.partial(dx, dz0, dz1, x, uu[i], ux[i]);
                    -(uxxx[i] * p(0, 0, 2)
                        + 2.0 * uxx[i] * p(1, 0, 2)
                        + uxx[i] * uxx[i] * p(0, 0, 3)
                        + 2.0 * ux[i] * uxx[i] * p(0, 1, 2)
                        + ux[i] * ux[i] * p(0, 2, 1)
                        + ux[i] * (2.0 * p(1, 1, 1) - p(0, 2, 0))
                        - p(1, 1, 0)
                        + p(2, 0, 1))
                })
                .collect();
            let mean = quadrature(&vals) / (2.0 * std::f64::consts::PI);
            assert!(mean.abs() < 1e-12, "grid mean {mean}");
        }
    }

    #[test]
    fn hamiltonian_value_examples() {
        // F = (1/2) z1^2, u = cos x: integral of sin^2/2 over the torus = pi/2
        let f = build_density(vec![Monomial {
            c: 0.5f64,
            p: 0,
            q: 2,
            k_cos: 0,
            k_sin: 0,
        }])
        .unwrap();
        let u = from_samples(8, |x| x.cos());
        let h = hamiltonian_value(&f, &u).unwrap();
        assert_abs_diff_eq!(h, std::f64::consts::PI / 2.0, epsilon = 1e-12);
        let z = GridFunction::<f64>::zero(8);
        assert_abs_diff_eq!(hamiltonian_value(&f, &z).unwrap(), 0.0);
    }

    #[test]
    fn hamiltonian_translation_invariance() {
        let f = kdv_density::<f64>();
        let u = from_samples(12, |x| 0.3 * x.cos() + 0.1 * (3.0 * x).sin());
        let shifted = from_samples(12, |x| 0.3 * (x + 1.234).cos() + 0.1 * (3.0 * (x + 1.234)).sin());
        let h1 = hamiltonian_value(&f, &u).unwrap();
        let h2 = hamiltonian_value(&f, &shifted).unwrap();
        assert_abs_diff_eq!(h1, h2, epsilon = 1e-12);
    }

    #[test]
    fn ellipticity_reports() {
        let f = kdv_density::<f64>();
        let u = from_samples(8, |x| 0.7 * x.cos());
        let rep = ellipticity_margin(&f, &u).unwrap();
        assert_abs_diff_eq!(rep.margin, 1.0, epsilon = 1e-14);

        let f = quasilinear_density::<f64>();
        let u = from_samples(8, |x| x.cos());
        let rep = ellipticity_margin(&f, &u).unwrap();
        assert_abs_diff_eq!(rep.margin, 1.0, epsilon = 1e-10);

        // F = (1/2)(2 + sin x z0) z1^2: along u = A cos x the second
        // z1-derivative is 2 + (A/2) sin 2x, so the margin is 2 - A/2
        let f = build_density(vec![
            Monomial {
                c: 1.0f64,
                p: 0,
                q: 2,
                k_cos: 0,
                k_sin: 0,
            },
            Monomial {
                c: 0.5,
                p: 1,
                q: 2,
                k_cos: 0,
                k_sin: 1,
            },
        ])
        .unwrap();
        let u = from_samples(8, |x| 3.0 * x.cos());
        let rep = ellipticity_margin(&f, &u).unwrap();
        assert_abs_diff_eq!(rep.margin, 0.5, epsilon = 1e-10);
        let u = from_samples(8, |x| 5.0 * x.cos());
        let rep = ellipticity_margin(&f, &u).unwrap();
        assert!(rep.margin <= 0.0, "margin {}", rep.margin);
        assert!(matches!(
            nonlinear_rhs(&f, &u),
            Err(Error::Ellipticity { .. })
        ));
    }

    #[test]
    fn density_text_round_trip() {
        let f = build_density(vec![
            Monomial {
                c: 0.5f64,
                p: 0,
                q: 2,
                k_cos: 0,
                k_sin: 0,
            },
            Monomial {
                c: -1.0 / 6.0,
                p: 3,
                q: 0,
                k_cos: 2,
                k_sin: 1,
            },
        ])
        .unwrap();
        let f2 = HamiltonianDensity::<f64>::from_text(&f.to_text()).unwrap();
        assert_eq!(f, f2);
        assert!(HamiltonianDensity::<f64>::from_text("1.0 0 1 0 0").is_err());
        assert!(HamiltonianDensity::<f64>::from_text("1.0 0 2 0").is_err());
    }
}
