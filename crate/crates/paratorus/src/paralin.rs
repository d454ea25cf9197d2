//! Paralinearization: the generator symbol A(u) of the paradifferential form
//! of the evolution and the exact semilinear remainder R_0(u).

use crate::error::{Error, Result};
use crate::grid::{GridFunction, SobolevIndex};
use crate::hamiltonian::{ellipticity_margin, nonlinear_rhs, HamiltonianDensity};
use crate::quantize::quantize_bw;
use crate::scalar::{Cx, Scalar};
use crate::symbol::{FrequencyMultiplier, PeriodicFn, Symbol};

/// A(u) = c2 (i xi)^3 + (1/2) c2' (i xi)^2 + a1 (i xi), with coefficients
/// evaluated along the state:
///   c2 = d^2F/dz1^2,  a1 = -(d^2F/dz0^2 - (d^2F/dz0 dz1)' + (1/4) c2''),
/// primes denoting total x-derivatives. The first-order coefficient collects
/// the displayed contributions from shifting derivatives off the unknown in
/// the Weyl ordering; anything beyond it stays in the remainder.
#[derive(Debug, Clone)]
pub struct GeneratorSymbol<T: Scalar> {
    pub principal: Symbol<T>,
    pub subprincipal: Symbol<T>,
    pub first_order: Symbol<T>,
    pub assembled: Symbol<T>,
    /// c2 along the state (kept for mollification, conjugation and energies)
    pub c2: PeriodicFn<T>,
    pub a1: PeriodicFn<T>,
    pub margin: T,
}

fn total_derivative<T: Scalar>(p: &PeriodicFn<T>) -> PeriodicFn<T> {
    p.derivative()
}

/// Coefficient truncation used for generator symbols built on a state of
/// truncation J: twice J covers every matrix entry of a J-band quantization.
pub fn generator_coeff_trunc(state_trunc: usize) -> usize {
    2 * state_trunc
}

pub fn build_generator_symbol<T: Scalar>(
    f: &HamiltonianDensity<T>,
    u: &GridFunction<T>,
) -> Result<GeneratorSymbol<T>> {
    let rep = ellipticity_margin(f, u)?;
    if rep.margin <= T::zero() {
        return Err(Error::Ellipticity {
            margin: rep.margin.to_f64_lossy(),
        });
    }
    let jc = generator_coeff_trunc(u.trunc());
    let g = {
        let g = ((f.degree() as usize + 1) * u.trunc())
            .max(4 * u.trunc())
            .max(2 * jc + 2)
            .max(64);
        if g % 2 == 0 {
            g
        } else {
            g + 1
        }
    };
    let c2 = PeriodicFn::from_real_samples(&f.partial_along(0, 0, 2, u, g)?, jc)?;
    let b0 = PeriodicFn::from_real_samples(&f.partial_along(0, 2, 0, u, g)?, jc)?;
    let c1 = PeriodicFn::from_real_samples(&f.partial_along(0, 1, 1, u, g)?, jc)?;
    let c2p = total_derivative(&c2);
    let c2pp = total_derivative(&c2p);
    let c1p = total_derivative(&c1);
    // a1 = -(b0 - c1' + c2''/4)
    let a1 = b0
        .add(&c1p.scale(Cx::new(-T::one(), T::zero())))
        .add(&c2pp.scale(Cx::new(T::of(0.25), T::zero())))
        .scale(Cx::new(-T::one(), T::zero()));
    let reg = SobolevIndex(T::of(4.0));
    let principal = Symbol::build(
        vec![(c2.clone(), FrequencyMultiplier::power_i_xi(3))],
        T::of(3.0),
        reg,
    )?;
    let subprincipal = Symbol::build(
        vec![(
            c2p.scale(Cx::new(T::of(0.5), T::zero())),
            FrequencyMultiplier::power_i_xi(2),
        )],
        T::of(2.0),
        reg,
    )?;
    let first_order = Symbol::build(
        vec![(a1.clone(), FrequencyMultiplier::power_i_xi(1))],
        T::one(),
        reg,
    )?;
    let assembled = principal.add(&subprincipal).add(&first_order);
    Ok(GeneratorSymbol {
        principal,
        subprincipal,
        first_order,
        assembled,
        c2,
        a1,
        margin: rep.margin,
    })
}

/// R_0(u) := -nonlinear_rhs(F, u) - Op^BW(A(u)) u, the exact residual making
/// the paradifferential decomposition an identity at assembly resolution.
pub fn residual_remainder<T: Scalar>(
    f: &HamiltonianDensity<T>,
    u: &GridFunction<T>,
    a: &GeneratorSymbol<T>,
    trunc: usize,
    eps: T,
) -> Result<GridFunction<T>> {
    if u.trunc() != trunc {
        return Err(Error::Dimension(format!(
            "state truncation {} does not match requested {}",
            u.trunc(),
            trunc
        )));
    }
    let rhs = nonlinear_rhs(f, u)?;
    let op = quantize_bw(&a.assembled, trunc, eps)?;
    let au = op.apply(u)?;
    Ok(rhs.scale(Cx::new(-T::one(), T::zero())).sub(&au))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::analyze;
    use crate::hamiltonian::{kdv_density, quasilinear_density};
    use crate::quantize::operator_band_norm;
    use approx::assert_abs_diff_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn from_fn<F: Fn(f64) -> f64>(trunc: usize, f: F) -> GridFunction<f64> {
        let n = 16 * (trunc + 1);
        let samples: Vec<f64> = (0..n)
            .map(|k| f(2.0 * std::f64::consts::PI * k as f64 / n as f64))
            .collect();
        analyze(&samples, trunc).unwrap()
    }

    #[test]
    fn kdv_generator_coefficients() {
        let f = kdv_density::<f64>();
        let u = from_fn(16, |x| 0.3 * x.cos());
        let a = build_generator_symbol(&f, &u).unwrap();
        // principal coefficient identically 1
        assert_abs_diff_eq!(a.c2.mean().re, 1.0, epsilon = 1e-13);
        assert!(a.c2.osc().sobolev_norm(SobolevIndex(0.0)) < 1e-12);
        // subprincipal identically zero
        for &(x, xi) in &[(0.0, 2.0), (1.0, -5.0)] {
            assert!(a.subprincipal.eval(x, xi).norm() < 1e-12);
        }
        // a1 = u for the KdV density
        let g = 256;
        let uu = u.synthesize(g).unwrap();
        let dft = crate::grid::Dft::<f64>::new(g);
        for (i, x) in dft.grid().into_iter().enumerate() {
            assert!(
                (a.a1.eval(x).re - uu[i]).abs() < 1e-11,
                "a1({x}) = {} vs u = {}",
                a.a1.eval(x).re,
                uu[i]
            );
        }
    }

    #[test]
    fn quasilinear_generator_coefficients() {
        let f = quasilinear_density::<f64>();
        let u = from_fn(16, |x| 0.1 * x.cos());
        let a = build_generator_symbol(&f, &u).unwrap();
        // c2 = 1 + 0.01 cos^2 x; subprincipal coefficient = (1/2)(c2)'
        for &x in &[0.0f64, 0.7, 2.0, 4.4] {
            let c2 = 1.0 + 0.01 * x.cos() * x.cos();
            assert!((a.c2.eval(x).re - c2).abs() < 1e-12);
            let c2p = -0.02 * x.cos() * x.sin();
            let got = a.subprincipal.eval(x, 1.0); // (i*1)^2 = -1
            assert!((got.re - (-0.5 * c2p)).abs() < 1e-11, "x={x}");
        }
        // subprincipal coefficient has zero x-mean: eval integral via symbol
        // modes at xi=1 (mode 0 of the coefficient)
        let modes = a.subprincipal.modes_at(1.0, 4);
        assert!(modes[4].norm() < 1e-13);
    }

    #[test]
    fn generator_coefficients_real() {
        let f = quasilinear_density::<f64>();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let u = GridFunction::<f64>::random_real(16, 2.5, 0.2, &mut rng);
        let a = build_generator_symbol(&f, &u).unwrap();
        assert!(a.c2.max_imag(128) < 1e-12);
        assert!(a.a1.max_imag(128) < 1e-12);
    }

    #[test]
    fn ellipticity_failure_propagates() {
        use crate::hamiltonian::{build_density, Monomial};
        let f = build_density(vec![
            Monomial { c: 1.0f64, p: 0, q: 2, k_cos: 0, k_sin: 0 },
            Monomial { c: 0.5, p: 1, q: 2, k_cos: 0, k_sin: 1 },
        ])
        .unwrap();
        let u = from_fn(8, |x| 5.0 * x.cos());
        assert!(matches!(
            build_generator_symbol(&f, &u),
            Err(Error::Ellipticity { .. })
        ));
    }

    #[test]
    fn residual_zero_state() {
        let f = kdv_density::<f64>();
        let u = GridFunction::<f64>::zero(16);
        let a = build_generator_symbol(&f, &u).unwrap();
        let r = residual_remainder(&f, &u, &a, 16, 0.1).unwrap();
        assert_eq!(r.sobolev_norm(SobolevIndex(0.0)), 0.0);
    }

    #[test]
    fn decomposition_is_exact() {
        // nonlinear_rhs + Op^BW(A(u))u + R_0(u) = 0 by construction; assert
        // the assembled identity holds after independent re-evaluation
        let f = quasilinear_density::<f64>();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let u = GridFunction::<f64>::random_real(24, 2.0, 0.3, &mut rng);
        let a = build_generator_symbol(&f, &u).unwrap();
        let r0 = residual_remainder(&f, &u, &a, 24, 0.1).unwrap();
        let rhs = nonlinear_rhs(&f, &u).unwrap();
        let au = quantize_bw(&a.assembled, 24, 0.1)
            .unwrap()
            .apply(&u)
            .unwrap();
        let total = rhs.add(&au).add(&r0);
        assert!(total.sobolev_norm(SobolevIndex(0.0)) < 1e-11);
    }

    #[test]
    fn residual_quadratic_in_amplitude_for_kdv() {
        let f = kdv_density::<f64>();
        let mut pts = Vec::new();
        for &delta in &[1e-1f64, 1e-2, 1e-3] {
            let u = from_fn(32, |x| delta * x.cos());
            let a = build_generator_symbol(&f, &u).unwrap();
            let r0 = residual_remainder(&f, &u, &a, 32, 0.1).unwrap();
            let n = r0.sobolev_norm(SobolevIndex(2.0));
            pts.push((delta.ln(), n.ln()));
        }
        let n = pts.len() as f64;
        let sx: f64 = pts.iter().map(|p| p.0).sum();
        let sy: f64 = pts.iter().map(|p| p.1).sum();
        let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
        let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        assert!(slope >= 2.0 - 1e-6, "delta-sweep slope {slope}");
    }

    #[test]
    fn residual_tameness_resolution_sweep() {
        // ratio ||R_0(u)||_{H^2} / ||u||_{H^2} bounded within 2x across J for
        // states with |u^(j)| ~ |j|^{-5}
        let f = quasilinear_density::<f64>();
        let mut ratios = Vec::new();
        for &trunc in &[32usize, 64, 128] {
            let mut rng = ChaCha8Rng::seed_from_u64(17);
            let u = GridFunction::<f64>::random_real(trunc, 5.0, 0.5, &mut rng);
            let a = build_generator_symbol(&f, &u).unwrap();
            let r0 = residual_remainder(&f, &u, &a, trunc, 0.1).unwrap();
            ratios.push(
                r0.sobolev_norm(SobolevIndex(2.0)) / u.sobolev_norm(SobolevIndex(2.0)),
            );
        }
        for w in ratios.windows(2) {
            let r = w[1] / w[0];
            assert!(r < 2.0 && r > 0.5, "ratios {ratios:?}");
        }
    }

    #[test]
    fn generator_lipschitz_in_state() {
        // ||Op^BW(A(u)-A(w))v||_{H^s} <= K ||u-w||_{H^{s0}} ||v||_{H^{s0+3}}
        // with K stable under J-doubling
        let f = quasilinear_density::<f64>();
        let s0 = 1.6;
        let mut ks = Vec::new();
        // one fixed triple of states, re-expressed at each resolution, so the
        // measured constant is comparable across the sweep
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let u0 = GridFunction::<f64>::random_real(32, 6.5, 0.3, &mut rng);
        let w0 = GridFunction::<f64>::random_real(32, 6.5, 0.3, &mut rng);
        let v0 = GridFunction::<f64>::random_real(32, 6.5, 1.0, &mut rng);
        for &trunc in &[32usize, 64] {
            let u = u0.retrunc(trunc);
            let w = w0.retrunc(trunc);
            let v = v0.retrunc(trunc);
            let au = build_generator_symbol(&f, &u).unwrap();
            let aw = build_generator_symbol(&f, &w).unwrap();
            let diff = au.assembled.add(&aw.assembled.scale(crate::scalar::cx(-1.0, 0.0)));
            let dv = quantize_bw(&diff, trunc, 0.1).unwrap().apply(&v).unwrap();
            let k = dv.sobolev_norm(SobolevIndex(s0))
                / (u.sub(&w).sobolev_norm(SobolevIndex(s0))
                    * v.sobolev_norm(SobolevIndex(s0 + 3.0)));
            ks.push(k);
        }
        let ratio = ks[1] / ks[0];
        assert!(ratio < 2.0 && ratio > 0.5, "constants {ks:?}");
    }

    #[test]
    fn residual_difference_bound() {
        // ||R_0(u)-R_0(v)||_{H^{s0}} / ||u-v||_{H^{s0}} bounded over a ball
        let f = quasilinear_density::<f64>();
        let trunc = 32;
        let s0 = SobolevIndex(1.6);
        let mut rng = ChaCha8Rng::seed_from_u64(55);
        let mut worst: f64 = 0.0;
        for _ in 0..6 {
            let u = GridFunction::<f64>::random_real(trunc, 3.0, 0.3, &mut rng);
            let v = GridFunction::<f64>::random_real(trunc, 3.0, 0.3, &mut rng);
            let au = build_generator_symbol(&f, &u).unwrap();
            let av = build_generator_symbol(&f, &v).unwrap();
            let ru = residual_remainder(&f, &u, &au, trunc, 0.1).unwrap();
            let rv = residual_remainder(&f, &v, &av, trunc, 0.1).unwrap();
            let ratio = ru.sub(&rv).sobolev_norm(s0) / u.sub(&v).sobolev_norm(s0);
            worst = worst.max(ratio);
        }
        assert!(worst.is_finite() && worst < 50.0, "worst ratio {worst}");
    }

    #[test]
    fn generator_band_norm_order_three() {
        let f = quasilinear_density::<f64>();
        let u = from_fn(32, |x| 0.2 * x.cos());
        let a = build_generator_symbol(&f, &u).unwrap();
        let m = quantize_bw(&a.assembled, 32, 0.1).unwrap();
        let n = operator_band_norm(&m, SobolevIndex(4.0), SobolevIndex(1.0));
        assert!(n.is_finite() && n > 0.5 && n < 20.0, "norm {n}");
    }
}
