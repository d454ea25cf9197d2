//! The mollified linear paradifferential flow: conjugation by d = c2^{1/6}
//! (which cancels the order-two symbol), the state-dependent mollifier
//! chi(eps * c2(x) * xi^3), the modified energy with weight
//! c2^{2 sigma / 3} |xi|^{2 sigma}, and an explicit fourth-order time loop
//! with growth reporting.

use crate::error::{Error, Result};
use crate::grid::{GridFunction, SobolevIndex};
use crate::hamiltonian::{ellipticity_margin, HamiltonianDensity};
use crate::paralin::{build_generator_symbol, generator_coeff_trunc, GeneratorSymbol};
use crate::quantize::{quantize_bw, SpectralOperator};
use crate::scalar::{c_zero, Cx, Scalar};
use crate::symbol::{FrequencyMultiplier, PeriodicFn, Symbol};

/// Sampling grid large enough to resolve a power of a coefficient of the
/// given truncation.
fn coeff_grid(jc: usize) -> usize {
    let g = (4 * (jc + 1)).max(64);
    if g % 2 == 0 {
        g
    } else {
        g + 1
    }
}

/// Pointwise real power of a strictly positive coefficient, re-analyzed at
/// the coefficient truncation.
fn coeff_power<T: Scalar>(c: &PeriodicFn<T>, p: T) -> Result<PeriodicFn<T>> {
    let jc = c.trunc();
    let g = coeff_grid(jc);
    let dft = crate::grid::Dft::<T>::new(g);
    let mut samples = Vec::with_capacity(g);
    for x in dft.grid() {
        let v = c.eval(x).re;
        if v <= T::zero() {
            return Err(Error::Ellipticity {
                margin: v.to_f64_lossy(),
            });
        }
        samples.push(v.powf(p));
    }
    PeriodicFn::from_real_samples(&samples, jc)
}

fn order_zero_symbol<T: Scalar>(coeff: PeriodicFn<T>) -> Result<Symbol<T>> {
    Symbol::build(
        vec![(coeff, FrequencyMultiplier::one())],
        T::zero(),
        SobolevIndex(T::of(4.0)),
    )
}

/// The conjugating multiplication operators Op^BW(d) and Op^BW(d^{-1}) with
/// d = c2^{1/6}, plus the underlying coefficients and symbols.
#[derive(Debug, Clone)]
pub struct Conjugator<T: Scalar> {
    pub d: PeriodicFn<T>,
    pub d_inv: PeriodicFn<T>,
    pub symbol: Symbol<T>,
    pub symbol_inv: Symbol<T>,
    pub op: SpectralOperator<T>,
    pub op_inv: SpectralOperator<T>,
}

pub fn conjugator<T: Scalar>(
    f: &HamiltonianDensity<T>,
    u: &GridFunction<T>,
    trunc: usize,
    eps_band: T,
) -> Result<Conjugator<T>> {
    let rep = ellipticity_margin(f, u)?;
    if rep.margin <= T::zero() {
        return Err(Error::Ellipticity {
            margin: rep.margin.to_f64_lossy(),
        });
    }
    let jc = generator_coeff_trunc(u.trunc());
    let g = coeff_grid(jc).max(2 * jc + 2);
    let c2 = PeriodicFn::from_real_samples(&f.partial_along(0, 0, 2, u, g)?, jc)?;
    conjugator_from_coeff(&c2, trunc, eps_band)
}

/// Same as [`conjugator`] but starting from an already-extracted c2.
pub fn conjugator_from_coeff<T: Scalar>(
    c2: &PeriodicFn<T>,
    trunc: usize,
    eps_band: T,
) -> Result<Conjugator<T>> {
    let sixth = T::one() / T::of(6.0);
    let d = coeff_power(c2, sixth)?;
    let d_inv = coeff_power(c2, -sixth)?;
    let symbol = order_zero_symbol(d.clone())?;
    let symbol_inv = order_zero_symbol(d_inv.clone())?;
    let op = quantize_bw(&symbol, trunc, eps_band)?;
    let op_inv = quantize_bw(&symbol_inv, trunc, eps_band)?;
    Ok(Conjugator {
        d,
        d_inv,
        symbol,
        symbol_inv,
        op,
        op_inv,
    })
}

/// The generator multiplied by the state-dependent cutoff
/// chi(eps * c2(x) * xi^3), quantized on the band.
#[derive(Debug, Clone)]
pub struct MollifiedGenerator<T: Scalar> {
    pub eps: T,
    pub symbol: Symbol<T>,
    pub operator: SpectralOperator<T>,
    pub frozen_state: GridFunction<T>,
    /// Upper bound on the L^2 operator norm, used for the step-size cap.
    pub norm_bound: T,
}

impl<T: Scalar> MollifiedGenerator<T> {
    /// Wrap an explicit operator (used for driving the time loop with
    /// hand-built generators in diagnostics).
    pub fn from_operator(operator: SpectralOperator<T>, eps: T, state: GridFunction<T>) -> Self {
        let norm_bound = operator.norm_bound();
        MollifiedGenerator {
            eps,
            symbol: Symbol::zero(),
            operator,
            frozen_state: state,
            norm_bound,
        }
    }
}

/// True when the cutoff sits on its plateau over the whole quantization band,
/// so mollification is exactly the identity there.
pub fn mollifier_is_plateau<T: Scalar>(eps: T, c2_max: T, trunc: usize) -> bool {
    eps * c2_max * T::of(trunc as f64).powi(3) <= T::of(1.1)
}

pub fn mollify_symbol<T: Scalar>(
    a: &GeneratorSymbol<T>,
    u: &GridFunction<T>,
    eps: T,
    trunc: usize,
    eps_band: T,
) -> Result<MollifiedGenerator<T>> {
    if eps <= T::zero() || eps > T::one() {
        return Err(Error::InvalidParameter(format!(
            "mollification parameter must lie in (0,1], got {}",
            eps.to_f64_lossy()
        )));
    }
    let c2_max = a.c2.sup_abs(coeff_grid(a.c2.trunc()));
    let symbol = if mollifier_is_plateau(eps, c2_max, trunc) {
        a.assembled.clone()
    } else {
        a.assembled.modulate(eps, &a.c2)?
    };
    let operator = quantize_bw(&symbol, trunc, eps_band)?;
    let norm_bound = operator.norm_bound();
    Ok(MollifiedGenerator {
        eps,
        symbol,
        operator,
        frozen_state: u.clone(),
        norm_bound,
    })
}

/// Solve the 4x4 least-squares normal system with a real symmetric matrix and
/// complex right-hand side by Gaussian elimination with partial pivoting.
fn solve4<T: Scalar>(mut m: [[T; 4]; 4], mut rhs: [Cx<T>; 4]) -> Result<[Cx<T>; 4]> {
    for col in 0..4 {
        let mut piv = col;
        for r in col + 1..4 {
            if m[r][col].abs() > m[piv][col].abs() {
                piv = r;
            }
        }
        if m[piv][col].abs() <= T::of(1e-300) {
            return Err(Error::FitFailure("singular normal system".into()));
        }
        m.swap(col, piv);
        rhs.swap(col, piv);
        for r in 0..4 {
            if r == col {
                continue;
            }
            let factor = m[r][col] / m[col][col];
            for c in col..4 {
                let v = m[col][c];
                m[r][c] = m[r][c] - factor * v;
            }
            let v = rhs[col];
            rhs[r] = rhs[r] - v * Cx::new(factor, T::zero());
        }
    }
    for r in 0..4 {
        rhs[r] = rhs[r] / Cx::new(m[r][r], T::zero());
    }
    Ok(rhs)
}

/// Probe the conjugated mollified operator on single modes and fit the
/// effective symbol on the basis (i xi)^0..3 over a mid-band window; returns
/// the magnitude of the fitted order-two coefficient relative to the
/// order-three coefficient. With `conjugate = false` the raw operator is
/// fitted instead, which serves as the control.
pub fn cancellation_check<T: Scalar>(
    a: &GeneratorSymbol<T>,
    trunc: usize,
    eps_moll: T,
    eps_band: T,
    conjugate: bool,
) -> Result<T> {
    let c2_max = a.c2.sup_abs(coeff_grid(a.c2.trunc()));
    let mid_symbol = {
        let s = a.principal.add(&a.subprincipal);
        if mollifier_is_plateau(eps_moll, c2_max, trunc) {
            s
        } else {
            s.modulate(eps_moll, &a.c2)?
        }
    };
    let op_mid = quantize_bw(&mid_symbol, trunc, eps_band)?;
    let c = if conjugate {
        let conj = conjugator_from_coeff(&a.c2, trunc, eps_band)?;
        conj.op.compose(&op_mid)?.compose(&conj.op_inv)?
    } else {
        op_mid
    };

    // Fit window: mid-band, clipped to the mollifier plateau so the probed
    // entries carry the undamped symbol.
    let j = trunc as i64;
    let mut kmin = (j / 4).max(2);
    let mut kmax = 3 * j / 4;
    let plateau_xi = if mollifier_is_plateau(eps_moll, c2_max, trunc) {
        f64::INFINITY
    } else {
        (1.1 / (eps_moll * c2_max).to_f64_lossy()).powf(1.0 / 3.0)
    };
    if plateau_xi.is_finite() {
        kmax = kmax.min(plateau_xi.floor() as i64);
        if kmax - kmin < 2 {
            kmin = 2;
        }
    }
    if kmax - kmin < 2 {
        return Err(Error::FitFailure(format!(
            "fit window [{kmin},{kmax}] too narrow"
        )));
    }
    let xi0 = T::of(kmax as f64);

    let n_max = 6i64.min(a.c2.trunc() as i64);
    let mut g2 = T::zero();
    let mut g3 = T::zero();
    for n in -n_max..=n_max {
        let mut normal = [[T::zero(); 4]; 4];
        let mut rhs = [c_zero::<T>(); 4];
        let mut points = 0usize;
        for sign in [-1i64, 1] {
            for kk in kmin..=kmax {
                let k = sign * kk;
                let row = k + n;
                if row == 0 || row.unsigned_abs() as usize > trunc {
                    continue;
                }
                let xi_abs = (k as f64 + n as f64 / 2.0).abs();
                if xi_abs > plateau_xi {
                    continue;
                }
                let xi = (T::of(k as f64) + T::of(n as f64) / T::of(2.0)) / xi0;
                let val = c.entry(row, k);
                let mut pw = [T::one(); 4];
                for m in 1..4 {
                    pw[m] = pw[m - 1] * xi;
                }
                for r in 0..4 {
                    for s in 0..4 {
                        normal[r][s] += pw[r] * pw[s];
                    }
                    rhs[r] = rhs[r] + val * Cx::new(pw[r], T::zero());
                }
                points += 1;
            }
        }
        if points < 6 {
            continue;
        }
        let beta = solve4(normal, rhs)?;
        // beta are coefficients on xi~^m; rescale to (i xi)^m.
        let i_pow = [
            Cx::new(T::one(), T::zero()),
            Cx::new(T::zero(), -T::one()),
            Cx::new(-T::one(), T::zero()),
            Cx::new(T::zero(), T::one()),
        ];
        let mut gamma = [c_zero::<T>(); 4];
        let mut scale = T::one();
        for m in 0..4 {
            gamma[m] = beta[m] * i_pow[m] / Cx::new(scale, T::zero());
            scale *= xi0;
        }
        g2 += gamma[2].norm_sqr();
        g3 += gamma[3].norm_sqr();
    }
    if g3 <= T::of(1e-300) {
        return Err(Error::FitFailure(
            "degenerate probe: no order-three content in the window".into(),
        ));
    }
    Ok((g2 / g3).sqrt())
}

/// The quadratic form <Op^BW(c2^{2 sigma/3} |xi|^{2 sigma}) Op^BW(d) v,
/// Op^BW(d) v> with the torus pairing sum of f^(j) conj(g^(j)).
#[derive(Debug, Clone)]
pub struct ModifiedEnergy<T: Scalar> {
    pub sigma: SobolevIndex<T>,
    pub weight_operator: SpectralOperator<T>,
    pub conjugator: SpectralOperator<T>,
    pub value: T,
}

/// Assemble the weight and conjugator operators once for a given state; the
/// quadratic form can then be evaluated on many v via [`energy_value`].
#[derive(Debug, Clone)]
pub struct EnergyApparatus<T: Scalar> {
    pub sigma: SobolevIndex<T>,
    pub weight_operator: SpectralOperator<T>,
    pub conjugator: SpectralOperator<T>,
}

pub fn energy_apparatus<T: Scalar>(
    f: &HamiltonianDensity<T>,
    u: &GridFunction<T>,
    sigma: SobolevIndex<T>,
    trunc: usize,
    eps_band: T,
) -> Result<EnergyApparatus<T>> {
    if sigma.0 < T::zero() {
        return Err(Error::InvalidParameter(format!(
            "energy exponent must be nonnegative, got {}",
            sigma.0.to_f64_lossy()
        )));
    }
    let rep = ellipticity_margin(f, u)?;
    if rep.margin <= T::zero() {
        return Err(Error::Ellipticity {
            margin: rep.margin.to_f64_lossy(),
        });
    }
    let jc = generator_coeff_trunc(u.trunc());
    let g = coeff_grid(jc).max(2 * jc + 2);
    let c2 = PeriodicFn::from_real_samples(&f.partial_along(0, 0, 2, u, g)?, jc)?;
    energy_apparatus_from_coeff(&c2, sigma, trunc, eps_band)
}

pub fn energy_apparatus_from_coeff<T: Scalar>(
    c2: &PeriodicFn<T>,
    sigma: SobolevIndex<T>,
    trunc: usize,
    eps_band: T,
) -> Result<EnergyApparatus<T>> {
    let two_thirds = T::of(2.0) / T::of(3.0) * sigma.0;
    let w_coeff = coeff_power(c2, two_thirds)?;
    let w_symbol = Symbol::build(
        vec![(
            w_coeff,
            FrequencyMultiplier::abs_power(T::of(2.0) * sigma.0),
        )],
        T::of(2.0) * sigma.0,
        SobolevIndex(T::of(4.0)),
    )?;
    let weight_operator = quantize_bw(&w_symbol, trunc, eps_band)?;
    let conj = conjugator_from_coeff(c2, trunc, eps_band)?;
    Ok(EnergyApparatus {
        sigma,
        weight_operator,
        conjugator: conj.op,
    })
}

pub fn energy_value<T: Scalar>(app: &EnergyApparatus<T>, v: &GridFunction<T>) -> Result<T> {
    let dv = app.conjugator.apply(v)?;
    let wdv = app.weight_operator.apply(&dv)?;
    let pairing = wdv.l2_inner(&dv);
    let scale = v.sobolev_norm(app.sigma).powi(2) + T::one();
    if pairing.im.abs() > T::of(1e-8) * scale {
        return Err(Error::Nonconvergence(format!(
            "energy pairing has imaginary part {}",
            pairing.im.to_f64_lossy()
        )));
    }
    if pairing.re < -T::of(1e-10) * scale {
        return Err(Error::Nonconvergence(format!(
            "modified energy negative: {}",
            pairing.re.to_f64_lossy()
        )));
    }
    Ok(pairing.re.max(T::zero()))
}

pub fn modified_energy<T: Scalar>(
    f: &HamiltonianDensity<T>,
    u: &GridFunction<T>,
    v: &GridFunction<T>,
    sigma: SobolevIndex<T>,
    eps_band: T,
) -> Result<ModifiedEnergy<T>> {
    let app = energy_apparatus(f, u, sigma, v.trunc(), eps_band)?;
    let value = energy_value(&app, v)?;
    Ok(ModifiedEnergy {
        sigma,
        weight_operator: app.weight_operator,
        conjugator: app.conjugator,
        value,
    })
}

/// One classical fourth-order explicit step of v' = G v + forcing with G and
/// the forcing frozen over the step.
pub fn advance_linear<T: Scalar>(
    gen: &MollifiedGenerator<T>,
    v: &GridFunction<T>,
    h: T,
    forcing: Option<&GridFunction<T>>,
) -> Result<GridFunction<T>> {
    if h <= T::zero() {
        return Err(Error::InvalidParameter(format!(
            "step size must be positive, got {}",
            h.to_f64_lossy()
        )));
    }
    let cap = T::of(2.5);
    if h * gen.norm_bound > cap {
        return Err(Error::Stability {
            h: h.to_f64_lossy(),
            suggested: (cap / gen.norm_bound).to_f64_lossy(),
        });
    }
    let rhs = |w: &GridFunction<T>| -> Result<GridFunction<T>> {
        let mut gw = gen.operator.apply(w)?;
        if let Some(fc) = forcing {
            gw = gw.add(fc);
        }
        Ok(gw)
    };
    let half = Cx::new(h / T::of(2.0), T::zero());
    let k1 = rhs(v)?;
    let k2 = rhs(&v.add(&k1.scale(half)))?;
    let k3 = rhs(&v.add(&k2.scale(half)))?;
    let k4 = rhs(&v.add(&k3.scale(Cx::new(h, T::zero()))))?;
    let sixth = h / T::of(6.0);
    let two = Cx::new(T::of(2.0), T::zero());
    let incr = k1.add(&k2.scale(two)).add(&k3.scale(two)).add(&k4);
    Ok(v.add(&incr.scale(Cx::new(sixth, T::zero()))))
}

#[derive(Debug, Clone)]
pub struct GrowthRow<T: Scalar> {
    pub t: T,
    pub h_sigma_norm: T,
    pub modified_norm: T,
    pub step: T,
    pub eps: T,
}

#[derive(Debug, Clone)]
pub struct GrowthReport<T: Scalar> {
    pub rows: Vec<GrowthRow<T>>,
    /// Fitted exponential growth rate of the modified energy.
    pub rate: T,
    /// Largest observed ratio of modified energy to the squared H^sigma norm.
    pub c_r: T,
    /// Largest observed one-step energy production relative to the squared
    /// H^sigma norm.
    pub c_theta: T,
}

impl<T: Scalar> GrowthReport<T> {
    pub fn to_text(&self) -> String {
        let mut out = String::from("# t  h_sigma_norm  modified_norm  step  eps\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{:.12e} {:.12e} {:.12e} {:.6e} {:.6e}\n",
                r.t.to_f64_lossy(),
                r.h_sigma_norm.to_f64_lossy(),
                r.modified_norm.to_f64_lossy(),
                r.step.to_f64_lossy(),
                r.eps.to_f64_lossy(),
            ));
        }
        out
    }
}

fn interp_state<T: Scalar>(traj: &[(T, GridFunction<T>)], t: T) -> GridFunction<T> {
    if traj.len() == 1 || t <= traj[0].0 {
        return traj[0].1.clone();
    }
    let last = traj.len() - 1;
    if t >= traj[last].0 {
        return traj[last].1.clone();
    }
    let mut i = 0;
    while i + 1 < traj.len() && traj[i + 1].0 < t {
        i += 1;
    }
    let (t0, u0) = (&traj[i].0, &traj[i].1);
    let (t1, u1) = (&traj[i + 1].0, &traj[i + 1].1);
    let theta = (t - *t0) / (*t1 - *t0);
    u0.scale(Cx::new(T::one() - theta, T::zero()))
        .add(&u1.scale(Cx::new(theta, T::zero())))
}

/// Linear inhomogeneous solve along a supplied state trajectory: the
/// generator coefficients are refreshed every step by linear interpolation in
/// time; the forcing, if present, is interpolated the same way. The
/// paralinearized equation reads u_t + Op^BW(A(u))u + R_0(u) = 0, so the
/// evolution advanced here is v' = -Op^BW(mollified A)v + forcing.
#[allow(clippy::too_many_arguments)]
pub fn solve_linear<T: Scalar>(
    f: &HamiltonianDensity<T>,
    u_traj: &[(T, GridFunction<T>)],
    v0: &GridFunction<T>,
    sigma: SobolevIndex<T>,
    eps: T,
    t_end: T,
    h: T,
    forcing: Option<&[(T, GridFunction<T>)]>,
    eps_band: T,
) -> Result<(Vec<(T, GridFunction<T>)>, GrowthReport<T>)> {
    if u_traj.is_empty() {
        return Err(Error::InvalidParameter(
            "empty coefficient trajectory".into(),
        ));
    }
    if t_end <= T::zero() || h <= T::zero() {
        return Err(Error::InvalidParameter(format!(
            "need positive horizon and step, got T={} h={}",
            t_end.to_f64_lossy(),
            h.to_f64_lossy()
        )));
    }
    let trunc = v0.trunc();
    let n_steps = (t_end / h).to_f64_lossy().ceil().max(1.0) as usize;
    let h_eff = t_end / T::of(n_steps as f64);
    let frozen = u_traj.len() == 1;

    let build = |t: T| -> Result<(MollifiedGenerator<T>, EnergyApparatus<T>)> {
        let u = interp_state(u_traj, t);
        let a = build_generator_symbol(f, &u)?;
        let gen = mollify_symbol(&a, &u, eps, trunc, eps_band)?;
        let neg = MollifiedGenerator {
            eps: gen.eps,
            symbol: gen.symbol,
            operator: gen.operator.scale(Cx::new(-T::one(), T::zero())),
            frozen_state: gen.frozen_state,
            norm_bound: gen.norm_bound,
        };
        let app = energy_apparatus_from_coeff(&a.c2, sigma, trunc, eps_band)?;
        Ok((neg, app))
    };

    let (mut gen, mut app) = build(T::zero())?;
    let mut v = v0.clone();
    let mut t = T::zero();
    let mut trajectory = vec![(t, v.clone())];
    let mut rows: Vec<GrowthRow<T>> = Vec::with_capacity(n_steps + 1);
    let record = |rows: &mut Vec<GrowthRow<T>>,
                  app: &EnergyApparatus<T>,
                  t: T,
                  v: &GridFunction<T>|
     -> Result<()> {
        let e = energy_value(app, v)?;
        rows.push(GrowthRow {
            t,
            h_sigma_norm: v.sobolev_norm(sigma),
            modified_norm: e.sqrt(),
            step: h_eff,
            eps,
        });
        Ok(())
    };
    record(&mut rows, &app, t, &v)?;

    for step in 0..n_steps {
        let t_mid = t + h_eff / T::of(2.0);
        if !frozen {
            let (g, a) = build(t_mid)?;
            gen = g;
            app = a;
        }
        let fc = forcing.map(|fr| interp_state(fr, t_mid));
        v = advance_linear(&gen, &v, h_eff, fc.as_ref())?;
        t = T::of((step + 1) as f64) * h_eff;
        trajectory.push((t, v.clone()));
        record(&mut rows, &app, t, &v)?;
    }

    // Fitted exponential rate of the modified energy (least squares on the
    // logarithm), plus the observed equivalence and production constants.
    let mut pts = Vec::new();
    for r in &rows {
        let e = r.modified_norm * r.modified_norm;
        if e > T::of(1e-300) {
            pts.push((r.t, e.ln()));
        }
    }
    let rate = if pts.len() >= 2 {
        let n = T::of(pts.len() as f64);
        let sx: T = pts.iter().map(|p| p.0).sum();
        let sy: T = pts.iter().map(|p| p.1).sum();
        let sxx: T = pts.iter().map(|p| p.0 * p.0).sum();
        let sxy: T = pts.iter().map(|p| p.0 * p.1).sum();
        let den = n * sxx - sx * sx;
        if den.abs() > T::of(1e-300) {
            (n * sxy - sx * sy) / den
        } else {
            T::zero()
        }
    } else {
        T::zero()
    };
    let mut c_r = T::zero();
    let mut c_theta = T::zero();
    for w in rows.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        let hs2 = a.h_sigma_norm * a.h_sigma_norm;
        if hs2 > T::of(1e-300) {
            c_r = c_r.max(a.modified_norm * a.modified_norm / hs2);
            let de =
                (b.modified_norm * b.modified_norm - a.modified_norm * a.modified_norm).abs();
            c_theta = c_theta.max(de / (b.t - a.t) / hs2);
        }
    }
    Ok((
        trajectory,
        GrowthReport {
            rows,
            rate,
            c_r,
            c_theta,
        },
    ))
}
