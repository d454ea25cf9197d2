//! x-periodic, xi-smooth symbols a(x, xi) as finite sums of coefficient
//! functions times analytic frequency multipliers, with seminorms, the
//! Poisson bracket, the second-order form, cutoffs and regularization.

use crate::error::{Error, Result};
use crate::grid::{analyze_complex, Dft, GridFunction, SobolevIndex};
use crate::scalar::{c_zero, cis, Cx, Scalar};

// ---------------------------------------------------------------------------
// cutoff profile
// ---------------------------------------------------------------------------

/// Smooth even cutoff: 1 on |x| <= 1.1, 0 on |x| >= 1.9, monotone between.
pub fn chi<T: Scalar>(x: T) -> T {
    let a = x.abs();
    let lo = T::of(1.1);
    let hi = T::of(1.9);
    if a <= lo {
        T::one()
    } else if a >= hi {
        T::zero()
    } else {
        // exp(-1/t) transition
        let t = (a - lo) / (hi - lo);
        let g = |t: T| {
            if t <= T::zero() {
                T::zero()
            } else {
                (-t.recip()).exp()
            }
        };
        let s = g(t) / (g(t) + g(T::one() - t));
        T::one() - s
    }
}

/// chi(x / eps)
pub fn chi_eps<T: Scalar>(eps: T, x: T) -> T {
    chi(x / eps)
}

/// Rescaled cutoff with its plateau/support bookkeeping.
#[derive(Debug, Clone, Copy)]
pub struct CutoffChi<T: Scalar> {
    pub eps: T,
}

impl<T: Scalar> CutoffChi<T> {
    pub fn new(eps: T) -> Result<Self> {
        if eps <= T::zero() || eps >= T::one() {
            return Err(Error::InvalidParameter(format!(
                "cutoff scale eps={eps} must lie in (0,1)"
            )));
        }
        Ok(CutoffChi { eps })
    }

    pub fn eval(&self, x: T) -> T {
        chi_eps(self.eps, x)
    }

    pub fn plateau(&self) -> T {
        T::of(1.1) * self.eps
    }

    pub fn support(&self) -> T {
        T::of(1.9) * self.eps
    }
}

// ---------------------------------------------------------------------------
// coefficient functions (GridFunction plus a mean mode)
// ---------------------------------------------------------------------------

/// Periodic coefficient function with a possibly nonzero mean.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicFn<T: Scalar> {
    mean: Cx<T>,
    osc: GridFunction<T>,
}

impl<T: Scalar> PeriodicFn<T> {
    pub fn new(mean: Cx<T>, osc: GridFunction<T>) -> Self {
        PeriodicFn { mean, osc }
    }

    pub fn constant(c: Cx<T>, trunc: usize) -> Self {
        PeriodicFn {
            mean: c,
            osc: GridFunction::zero(trunc),
        }
    }

    pub fn from_grid(osc: GridFunction<T>) -> Self {
        PeriodicFn {
            mean: c_zero(),
            osc,
        }
    }

    /// Full Fourier analysis of complex samples keeping the mean.
    pub fn from_samples(samples: &[Cx<T>], trunc: usize) -> Result<Self> {
        let mean: Cx<T> = samples.iter().fold(c_zero::<T>(), |a, &b| a + b)
            * Cx::new(T::one() / T::of(samples.len() as f64), T::zero());
        let centered: Vec<Cx<T>> = samples.iter().map(|&v| v - mean).collect();
        Ok(PeriodicFn {
            mean,
            osc: analyze_complex(&centered, trunc)?,
        })
    }

    pub fn from_real_samples(samples: &[T], trunc: usize) -> Result<Self> {
        let cs: Vec<Cx<T>> = samples.iter().map(|&v| Cx::new(v, T::zero())).collect();
        let mut p = Self::from_samples(&cs, trunc)?;
        p.osc.mark_real();
        Ok(p)
    }

    pub fn mean(&self) -> Cx<T> {
        self.mean
    }

    pub fn osc(&self) -> &GridFunction<T> {
        &self.osc
    }

    pub fn trunc(&self) -> usize {
        self.osc.trunc()
    }

    pub fn coeff(&self, n: i64) -> Cx<T> {
        if n == 0 {
            self.mean
        } else {
            self.osc.coeff(n)
        }
    }

    pub fn eval(&self, x: T) -> Cx<T> {
        let mut acc = self.mean;
        for (j, c) in self.osc.modes() {
            acc = acc + c * cis(T::of(j as f64) * x);
        }
        acc
    }

    pub fn derivative(&self) -> Self {
        PeriodicFn {
            mean: c_zero(),
            osc: self.osc.differentiate(),
        }
    }

    pub fn retrunc(&self, trunc: usize) -> Self {
        PeriodicFn {
            mean: self.mean,
            osc: self.osc.retrunc(trunc),
        }
    }

    pub fn scale(&self, a: Cx<T>) -> Self {
        PeriodicFn {
            mean: self.mean * a,
            osc: self.osc.scale(a),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        PeriodicFn {
            mean: self.mean + other.mean,
            osc: self.osc.add(&other.osc),
        }
    }

    /// Exact pointwise product (mode convolution, band grows to the sum).
    pub fn mul(&self, other: &Self) -> Self {
        let trunc = self.trunc() + other.trunc();
        let mut mean = c_zero();
        let mut out = GridFunction::zero(trunc.max(1));
        for na in -(self.trunc() as i64)..=(self.trunc() as i64) {
            let ca = self.coeff(na);
            if ca.norm_sqr() == T::zero() {
                continue;
            }
            for nb in -(other.trunc() as i64)..=(other.trunc() as i64) {
                let cb = other.coeff(nb);
                if cb.norm_sqr() == T::zero() {
                    continue;
                }
                let n = na + nb;
                if n == 0 {
                    mean = mean + ca * cb;
                } else {
                    out.set_coeff(n, out.coeff(n) + ca * cb);
                }
            }
        }
        out.mark_real();
        PeriodicFn { mean, osc: out }
    }

    /// H^s norm including the mean mode (weight 1 on the mean).
    pub fn sobolev_norm(&self, s: SobolevIndex<T>) -> T {
        (self.mean.norm_sqr() + self.osc.sobolev_norm(s).powi(2)).sqrt()
    }

    pub fn sup_abs(&self, gridsize: usize) -> T {
        let dft = Dft::new(gridsize);
        dft.grid()
            .into_iter()
            .map(|x| self.eval(x).norm())
            .fold(T::zero(), |a, b| a.max(b))
    }

    pub fn max_imag(&self, gridsize: usize) -> T {
        let dft = Dft::new(gridsize);
        dft.grid()
            .into_iter()
            .map(|x| self.eval(x).im.abs())
            .fold(T::zero(), |a, b| a.max(b))
    }
}

// ---------------------------------------------------------------------------
// frequency multipliers
// ---------------------------------------------------------------------------

/// One monomial factor scalar * (i xi)^a * |xi|^b * <xi>^c.
///
/// The family is closed under products and xi-differentiation, which keeps
/// Poisson brackets and the second-order form exact at the term level.
#[derive(Debug, Clone, PartialEq)]
pub struct MultMonomial<T: Scalar> {
    pub scalar: Cx<T>,
    pub ixi: i32,
    pub abs_p: T,
    pub jap_p: T,
}

impl<T: Scalar> MultMonomial<T> {
    fn eval(&self, xi: T) -> Cx<T> {
        if xi == T::zero() {
            // total homogeneity at 0: positive -> 0, exactly neutral -> scalar
            let total = T::of(self.ixi as f64) + self.abs_p;
            return if self.ixi == 0 && self.abs_p == T::zero() {
                self.scalar
            } else if total > T::zero() {
                c_zero()
            } else {
                // non-smooth point of |xi|^p derivatives; by convention 0
                c_zero()
            };
        }
        let ix = Cx::new(T::zero(), xi);
        let mut v = self.scalar * ix.powi(self.ixi);
        if self.abs_p != T::zero() {
            v = v * Cx::new(xi.abs().powf(self.abs_p), T::zero());
        }
        if self.jap_p != T::zero() {
            v = v * Cx::new((T::one() + xi * xi).powf(self.jap_p / T::of(2.0)), T::zero());
        }
        v
    }

    fn derivative(&self) -> Vec<MultMonomial<T>> {
        let mut out = Vec::new();
        let i = Cx::new(T::zero(), T::one());
        if self.ixi != 0 {
            out.push(MultMonomial {
                scalar: self.scalar * i * Cx::new(T::of(self.ixi as f64), T::zero()),
                ixi: self.ixi - 1,
                abs_p: self.abs_p,
                jap_p: self.jap_p,
            });
        }
        if self.abs_p != T::zero() {
            // d|xi|^b = b xi |xi|^{b-2}, xi = -i (i xi)
            out.push(MultMonomial {
                scalar: self.scalar * (-i) * Cx::new(self.abs_p, T::zero()),
                ixi: self.ixi + 1,
                abs_p: self.abs_p - T::of(2.0),
                jap_p: self.jap_p,
            });
        }
        if self.jap_p != T::zero() {
            out.push(MultMonomial {
                scalar: self.scalar * (-i) * Cx::new(self.jap_p, T::zero()),
                ixi: self.ixi + 1,
                abs_p: self.abs_p,
                jap_p: self.jap_p - T::of(2.0),
            });
        }
        out
    }

    fn mul(&self, other: &Self) -> Self {
        MultMonomial {
            scalar: self.scalar * other.scalar,
            ixi: self.ixi + other.ixi,
            abs_p: self.abs_p + other.abs_p,
            jap_p: self.jap_p + other.jap_p,
        }
    }
}

/// Analytic frequency factor, a finite sum of monomials; exactly evaluable
/// at any real xi including half-integers, with closed-form xi-derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyMultiplier<T: Scalar> {
    monomials: Vec<MultMonomial<T>>,
}

impl<T: Scalar> FrequencyMultiplier<T> {
    pub fn one() -> Self {
        FrequencyMultiplier {
            monomials: vec![MultMonomial {
                scalar: Cx::new(T::one(), T::zero()),
                ixi: 0,
                abs_p: T::zero(),
                jap_p: T::zero(),
            }],
        }
    }

    /// (i xi)^n
    pub fn power_i_xi(n: u32) -> Self {
        FrequencyMultiplier {
            monomials: vec![MultMonomial {
                scalar: Cx::new(T::one(), T::zero()),
                ixi: n as i32,
                abs_p: T::zero(),
                jap_p: T::zero(),
            }],
        }
    }

    /// |xi|^p
    pub fn abs_power(p: T) -> Self {
        FrequencyMultiplier {
            monomials: vec![MultMonomial {
                scalar: Cx::new(T::one(), T::zero()),
                ixi: 0,
                abs_p: p,
                jap_p: T::zero(),
            }],
        }
    }

    /// <xi>^p = (1 + xi^2)^{p/2}
    pub fn bracket_power(p: T) -> Self {
        FrequencyMultiplier {
            monomials: vec![MultMonomial {
                scalar: Cx::new(T::one(), T::zero()),
                ixi: 0,
                abs_p: T::zero(),
                jap_p: p,
            }],
        }
    }

    pub fn zero() -> Self {
        FrequencyMultiplier { monomials: vec![] }
    }

    pub fn monomials(&self) -> &[MultMonomial<T>] {
        &self.monomials
    }

    pub fn from_monomials(monomials: Vec<MultMonomial<T>>) -> Self {
        FrequencyMultiplier { monomials }
    }

    pub fn eval(&self, xi: T) -> Cx<T> {
        self.monomials
            .iter()
            .fold(c_zero(), |acc, m| acc + m.eval(xi))
    }

    /// Exact first derivative as another multiplier.
    pub fn derivative(&self) -> Self {
        FrequencyMultiplier {
            monomials: self.monomials.iter().flat_map(|m| m.derivative()).collect(),
        }
    }

    /// beta-fold derivative.
    pub fn derivative_n(&self, beta: u32) -> Self {
        let mut d = self.clone();
        for _ in 0..beta {
            d = d.derivative();
        }
        d
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut monomials = Vec::with_capacity(self.monomials.len() * other.monomials.len());
        for a in &self.monomials {
            for b in &other.monomials {
                monomials.push(a.mul(b));
            }
        }
        FrequencyMultiplier { monomials }
    }

    pub fn scale(&self, a: Cx<T>) -> Self {
        FrequencyMultiplier {
            monomials: self
                .monomials
                .iter()
                .map(|m| MultMonomial {
                    scalar: m.scalar * a,
                    ..m.clone()
                })
                .collect(),
        }
    }
}

// ---------------------------------------------------------------------------
// symbols
// ---------------------------------------------------------------------------

/// State-dependent cutoff factor chi(eps * profile(x) * xi^3).
#[derive(Debug, Clone, PartialEq)]
pub struct ChiModulation<T: Scalar> {
    pub eps: T,
    pub profile: PeriodicFn<T>,
}

impl<T: Scalar> ChiModulation<T> {
    pub fn factor(&self, x: T, xi: T) -> T {
        chi(self.eps * self.profile.eval(x).re * xi * xi * xi)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SymbolTerm<T: Scalar> {
    pub coeff: PeriodicFn<T>,
    pub mult: FrequencyMultiplier<T>,
    pub chi_mod: Option<ChiModulation<T>>,
}

/// Finite sum of coefficient-times-multiplier terms, optionally carrying a
/// per-mode regularization damping chi_eps(n / <xi>).
#[derive(Debug, Clone, PartialEq)]
pub struct Symbol<T: Scalar> {
    terms: Vec<SymbolTerm<T>>,
    order: T,
    reg: SobolevIndex<T>,
    xreg: Option<T>,
}

impl<T: Scalar> Symbol<T> {
    /// Build from (coefficient, multiplier) pairs. Coefficient truncations
    /// must share one J.
    pub fn build(
        terms: Vec<(PeriodicFn<T>, FrequencyMultiplier<T>)>,
        order: T,
        reg: SobolevIndex<T>,
    ) -> Result<Self> {
        if let Some(first) = terms.first() {
            let j = first.0.trunc();
            if terms.iter().any(|(c, _)| c.trunc() != j) {
                return Err(Error::Dimension(
                    "symbol coefficients must share one truncation order".into(),
                ));
            }
        }
        Ok(Symbol {
            terms: terms
                .into_iter()
                .map(|(coeff, mult)| SymbolTerm {
                    coeff,
                    mult,
                    chi_mod: None,
                })
                .collect(),
            order,
            reg,
            xreg: None,
        })
    }

    pub fn from_terms(terms: Vec<SymbolTerm<T>>, order: T, reg: SobolevIndex<T>) -> Self {
        Symbol {
            terms,
            order,
            reg,
            xreg: None,
        }
    }

    pub fn zero() -> Self {
        Symbol {
            terms: vec![],
            order: T::zero(),
            reg: SobolevIndex(T::zero()),
            xreg: None,
        }
    }

    pub fn order(&self) -> T {
        self.order
    }

    pub fn reg(&self) -> SobolevIndex<T> {
        self.reg
    }

    pub fn terms(&self) -> &[SymbolTerm<T>] {
        &self.terms
    }

    pub fn xreg(&self) -> Option<T> {
        self.xreg
    }

    pub fn is_plain(&self) -> bool {
        self.xreg.is_none() && self.terms.iter().all(|t| t.chi_mod.is_none())
    }

    /// Largest coefficient truncation across terms (0 for the zero symbol).
    pub fn coeff_trunc(&self) -> usize {
        self.terms
            .iter()
            .map(|t| {
                let mut j = t.coeff.trunc();
                if let Some(m) = &t.chi_mod {
                    j = j.max(m.profile.trunc());
                }
                j
            })
            .max()
            .unwrap_or(0)
    }

    /// x-Fourier modes of a(. , xi) for n in -x_trunc ..= x_trunc.
    pub fn modes_at(&self, xi: T, x_trunc: usize) -> Vec<Cx<T>> {
        let mut out = vec![c_zero(); 2 * x_trunc + 1];
        for term in &self.terms {
            let mval = term.mult.eval(xi);
            match &term.chi_mod {
                None => {
                    for n in -(x_trunc as i64)..=(x_trunc as i64) {
                        out[(n + x_trunc as i64) as usize] =
                            out[(n + x_trunc as i64) as usize] + term.coeff.coeff(n) * mval;
                    }
                }
                Some(m) => {
                    // non-separable factor: sample and transform
                    let gridsize = sample_grid(x_trunc.max(term.coeff.trunc() + m.profile.trunc()));
                    let dft = Dft::new(gridsize);
                    let samples: Vec<Cx<T>> = dft
                        .grid()
                        .into_iter()
                        .map(|x| {
                            term.coeff.eval(x) * mval * Cx::new(m.factor(x, xi), T::zero())
                        })
                        .collect();
                    let full = dft.analyze_full(&samples, x_trunc);
                    for (k, v) in full.into_iter().enumerate() {
                        out[k] = out[k] + v;
                    }
                }
            }
        }
        if let Some(eps) = self.xreg {
            let jap = (T::one() + xi * xi).sqrt();
            for n in -(x_trunc as i64)..=(x_trunc as i64) {
                let damp = chi_eps(eps, T::of(n as f64) / jap);
                let k = (n + x_trunc as i64) as usize;
                out[k] = out[k] * Cx::new(damp, T::zero());
            }
        }
        out
    }

    /// Single x-mode of a(. , xi).
    pub fn mode_at(&self, n: i64, xi: T) -> Cx<T> {
        let mut acc = c_zero();
        for term in &self.terms {
            let mval = term.mult.eval(xi);
            match &term.chi_mod {
                None => acc = acc + term.coeff.coeff(n) * mval,
                Some(m) => {
                    let gridsize = sample_grid(
                        (n.unsigned_abs() as usize).max(term.coeff.trunc() + m.profile.trunc()),
                    );
                    let dft = Dft::new(gridsize);
                    let inv = T::one() / T::of(gridsize as f64);
                    let mut sum = c_zero::<T>();
                    for x in dft.grid() {
                        let v = term.coeff.eval(x) * mval * Cx::new(m.factor(x, xi), T::zero());
                        sum = sum + v * cis(-T::of(n as f64) * x);
                    }
                    acc = acc + sum * Cx::new(inv, T::zero());
                }
            }
        }
        if let Some(eps) = self.xreg {
            let jap = (T::one() + xi * xi).sqrt();
            acc = acc * Cx::new(chi_eps(eps, T::of(n as f64) / jap), T::zero());
        }
        acc
    }

    /// Pointwise evaluation a(x, xi).
    pub fn eval(&self, x: T, xi: T) -> Cx<T> {
        if self.xreg.is_none() {
            let mut acc = c_zero();
            for term in &self.terms {
                let mut v = term.coeff.eval(x) * term.mult.eval(xi);
                if let Some(m) = &term.chi_mod {
                    v = v * Cx::new(m.factor(x, xi), T::zero());
                }
                acc = acc + v;
            }
            acc
        } else {
            let jt = self.coeff_trunc();
            let modes = self.modes_at(xi, jt);
            let mut acc = c_zero();
            for n in -(jt as i64)..=(jt as i64) {
                acc = acc + modes[(n + jt as i64) as usize] * cis(T::of(n as f64) * x);
            }
            acc
        }
    }

    /// Mode vector of the beta-th xi-derivative of the symbol. Exact for
    /// plain separable symbols, central finite differences otherwise.
    pub fn modes_at_deriv(&self, xi: T, beta: u32, x_trunc: usize) -> Vec<Cx<T>> {
        if beta == 0 {
            return self.modes_at(xi, x_trunc);
        }
        if self.is_plain() {
            let mut out = vec![c_zero(); 2 * x_trunc + 1];
            for term in &self.terms {
                let mval = term.mult.derivative_n(beta).eval(xi);
                for n in -(x_trunc as i64)..=(x_trunc as i64) {
                    out[(n + x_trunc as i64) as usize] =
                        out[(n + x_trunc as i64) as usize] + term.coeff.coeff(n) * mval;
                }
            }
            out
        } else {
            let h = T::of(1e-3) * (T::one() + xi.abs());
            let hi = self.modes_at_deriv(xi + h, beta - 1, x_trunc);
            let lo = self.modes_at_deriv(xi - h, beta - 1, x_trunc);
            hi.into_iter()
                .zip(lo)
                .map(|(a, b)| (a - b) / Cx::new(T::of(2.0) * h, T::zero()))
                .collect()
        }
    }

    /// |a|_{m,s,n}: max over beta <= n, sup over the dyadic probe set, of
    /// <xi>^{beta-m} * H^s-norm of the beta-th xi-derivative. n <= 4.
    pub fn seminorm(&self, m: T, s: SobolevIndex<T>, n: u32) -> Result<T> {
        if n > 4 {
            return Err(Error::UnsupportedOrder(n));
        }
        let jt = self.coeff_trunc().max(1);
        let mut best = T::zero();
        for beta in 0..=n {
            for xi in dyadic_probe::<T>(jt) {
                let modes = self.modes_at_deriv(xi, beta, jt);
                let mut norm2 = T::zero();
                for (k, c) in modes.iter().enumerate() {
                    let nn = k as i64 - jt as i64;
                    let w = if nn == 0 {
                        T::one()
                    } else {
                        T::of(nn.unsigned_abs() as f64).powf(T::of(2.0) * s.0)
                    };
                    norm2 += c.norm_sqr() * w;
                }
                let jap = (T::one() + xi * xi)
                    .sqrt()
                    .powf(T::of(beta as f64) - m);
                best = best.max(jap * norm2.sqrt());
            }
        }
        Ok(best)
    }

    pub fn scale(&self, a: Cx<T>) -> Self {
        let mut out = self.clone();
        for t in &mut out.terms {
            t.coeff = t.coeff.scale(a);
        }
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.xreg, other.xreg, "cannot add differently regularized symbols");
        let mut terms = self.terms.clone();
        terms.extend(other.terms.clone());
        Symbol {
            terms,
            order: self.order.max(other.order),
            reg: SobolevIndex(self.reg.0.min(other.reg.0)),
            xreg: self.xreg,
        }
    }

    /// Exact pointwise product ab (order m + m').
    pub fn product(&self, other: &Self) -> Result<Self> {
        self.require_plain("product")?;
        other.require_plain("product")?;
        let mut terms = Vec::new();
        for a in &self.terms {
            for b in &other.terms {
                terms.push(SymbolTerm {
                    coeff: a.coeff.mul(&b.coeff),
                    mult: a.mult.mul(&b.mult),
                    chi_mod: None,
                });
            }
        }
        Ok(Symbol {
            terms,
            order: self.order + other.order,
            reg: SobolevIndex(self.reg.0.min(other.reg.0)),
            xreg: None,
        })
    }

    fn require_plain(&self, what: &str) -> Result<()> {
        if !self.is_plain() {
            return Err(Error::InvalidParameter(format!(
                "{what} requires a plain separable symbol (no cutoff modulation, no regularization)"
            )));
        }
        Ok(())
    }

    fn d_xi(&self) -> Vec<SymbolTerm<T>> {
        self.terms
            .iter()
            .map(|t| SymbolTerm {
                coeff: t.coeff.clone(),
                mult: t.mult.derivative(),
                chi_mod: None,
            })
            .collect()
    }

    fn d_x(&self) -> Vec<SymbolTerm<T>> {
        self.terms
            .iter()
            .map(|t| SymbolTerm {
                coeff: t.coeff.derivative(),
                mult: t.mult.clone(),
                chi_mod: None,
            })
            .collect()
    }

    fn from_products(pairs: Vec<(SymbolTerm<T>, SymbolTerm<T>, Cx<T>)>, order: T, reg: SobolevIndex<T>) -> Self {
        let terms = pairs
            .into_iter()
            .map(|(a, b, s)| SymbolTerm {
                coeff: a.coeff.mul(&b.coeff).scale(s),
                mult: a.mult.mul(&b.mult),
                chi_mod: None,
            })
            .collect();
        Symbol {
            terms,
            order,
            reg,
            xreg: None,
        }
    }

    /// Poisson bracket {a,b} = d_xi a d_x b - d_x a d_xi b (order m+m'-1).
    pub fn poisson_bracket(&self, other: &Self) -> Result<Self> {
        self.require_plain("poisson_bracket")?;
        other.require_plain("poisson_bracket")?;
        let one = Cx::new(T::one(), T::zero());
        let neg = Cx::new(-T::one(), T::zero());
        let mut pairs = Vec::new();
        for a in self.d_xi() {
            for b in other.d_x() {
                pairs.push((a.clone(), b, one));
            }
        }
        for a in self.d_x() {
            for b in other.d_xi() {
                pairs.push((a.clone(), b, neg));
            }
        }
        Ok(Symbol::from_products(
            pairs,
            self.order + other.order - T::one(),
            SobolevIndex(self.reg.0.min(other.reg.0) - T::one()),
        ))
    }

    /// Second-order form s(a,b) = a_xx b_xixi - 2 a_xxi b_xxi + a_xixi b_xx.
    pub fn s_form(&self, other: &Self) -> Result<Self> {
        self.require_plain("s_form")?;
        other.require_plain("s_form")?;
        let dd = |terms: Vec<SymbolTerm<T>>, dx: bool| -> Vec<SymbolTerm<T>> {
            terms
                .into_iter()
                .map(|t| {
                    if dx {
                        SymbolTerm {
                            coeff: t.coeff.derivative(),
                            mult: t.mult,
                            chi_mod: None,
                        }
                    } else {
                        SymbolTerm {
                            coeff: t.coeff,
                            mult: t.mult.derivative(),
                            chi_mod: None,
                        }
                    }
                })
                .collect()
        };
        let a_xx = dd(self.d_x(), true);
        let a_xxi = dd(self.d_x(), false);
        let a_xixi = dd(self.d_xi(), false);
        let b_xx = dd(other.d_x(), true);
        let b_xxi = dd(other.d_x(), false);
        let b_xixi = dd(other.d_xi(), false);
        let one = Cx::new(T::one(), T::zero());
        let m2 = Cx::new(-T::of(2.0), T::zero());
        let mut pairs = Vec::new();
        for a in &a_xx {
            for b in &b_xixi {
                pairs.push((a.clone(), b.clone(), one));
            }
        }
        for a in &a_xxi {
            for b in &b_xxi {
                pairs.push((a.clone(), b.clone(), m2));
            }
        }
        for a in &a_xixi {
            for b in &b_xx {
                pairs.push((a.clone(), b.clone(), one));
            }
        }
        Ok(Symbol::from_products(
            pairs,
            self.order + other.order - T::of(2.0),
            SobolevIndex(self.reg.0.min(other.reg.0) - T::of(2.0)),
        ))
    }

    /// Damp each x-mode by chi_eps(n / <xi>).
    pub fn regularize(&self, eps: T) -> Result<Self> {
        if eps <= T::zero() || eps >= T::one() {
            return Err(Error::InvalidParameter(format!(
                "regularization scale eps={eps} must lie in (0,1)"
            )));
        }
        let mut out = self.clone();
        out.xreg = Some(eps);
        Ok(out)
    }

    /// Multiply every term by chi(eps * profile(x) * xi^3).
    pub fn modulate(&self, eps: T, profile: &PeriodicFn<T>) -> Result<Self> {
        self.require_plain("modulate")?;
        let mut out = self.clone();
        for t in &mut out.terms {
            t.chi_mod = Some(ChiModulation {
                eps,
                profile: profile.clone(),
            });
        }
        Ok(out)
    }

    /// Columnar text dump of the term list.
    pub fn to_text(&self) -> String {
        let mut s = format!(
            "# symbol terms={} order={} reg={} xreg={}\n",
            self.terms.len(),
            self.order.to_f64_lossy(),
            self.reg.0.to_f64_lossy(),
            self.xreg.map(|e| e.to_f64_lossy()).unwrap_or(f64::NAN)
        );
        for t in &self.terms {
            s.push_str(&format!("term monomials={}\n", t.mult.monomials().len()));
            for m in t.mult.monomials() {
                s.push_str(&format!(
                    "mono {:.17e} {:.17e} {} {:.17e} {:.17e}\n",
                    m.scalar.re.to_f64_lossy(),
                    m.scalar.im.to_f64_lossy(),
                    m.ixi,
                    m.abs_p.to_f64_lossy(),
                    m.jap_p.to_f64_lossy()
                ));
            }
            s.push_str(&format!(
                "coeff mean {:.17e} {:.17e}\n",
                t.coeff.mean().re.to_f64_lossy(),
                t.coeff.mean().im.to_f64_lossy()
            ));
            s.push_str(&t.coeff.osc().to_text());
        }
        s
    }
}

fn sample_grid(min_band: usize) -> usize {
    let g = 4 * (min_band + 1);
    let g = g.max(64);
    if g % 2 == 0 {
        g
    } else {
        g + 1
    }
}

/// Dyadic xi-probe set {0, +-1, +-2, +-4, ..., +-2^(ceil(log2 J)+2)}.
pub fn dyadic_probe<T: Scalar>(trunc: usize) -> Vec<T> {
    let top = (trunc.max(1) as f64).log2().ceil() as u32 + 2;
    let mut probe = vec![T::zero()];
    for k in 0..=top {
        let v = T::of((1u64 << k) as f64);
        probe.push(v);
        probe.push(-v);
    }
    probe
}
