//! Weyl and paradifferential quantizations materialized as dense matrices on
//! the truncated zero-mean frequency lattice.

use crate::error::{Error, Result};
use crate::grid::{GridFunction, SobolevIndex};
use crate::scalar::{c_zero, Cx, Scalar};
use crate::symbol::{chi_eps, Symbol};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Weyl,
    BonyWeyl,
    Composed,
    Residual,
}

impl std::fmt::Display for Provenance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Provenance::Weyl => "weyl",
            Provenance::BonyWeyl => "bony_weyl",
            Provenance::Composed => "composed",
            Provenance::Residual => "residual",
        };
        write!(f, "{s}")
    }
}

/// Dense operator on coefficients indexed by j, k in {-J..-1, 1..J}.
#[derive(Debug, Clone)]
pub struct SpectralOperator<T: Scalar> {
    trunc: usize,
    matrix: Vec<Cx<T>>, // row-major (2J x 2J)
    pub order: T,
    pub provenance: Provenance,
    pub eps: Option<T>,
}

fn idx(j: i64, trunc: usize) -> usize {
    debug_assert!(j != 0 && j.unsigned_abs() as usize <= trunc);
    if j < 0 {
        (j + trunc as i64) as usize
    } else {
        (trunc as i64 + j - 1) as usize
    }
}

fn freq(i: usize, trunc: usize) -> i64 {
    if i < trunc {
        i as i64 - trunc as i64
    } else {
        i as i64 - trunc as i64 + 1
    }
}

impl<T: Scalar> SpectralOperator<T> {
    pub fn zero(trunc: usize, order: T, provenance: Provenance) -> Self {
        let n = 2 * trunc;
        SpectralOperator {
            trunc,
            matrix: vec![c_zero(); n * n],
            order,
            provenance,
            eps: None,
        }
    }

    pub fn identity(trunc: usize) -> Self {
        let mut m = Self::zero(trunc, T::zero(), Provenance::Composed);
        for i in 0..2 * trunc {
            m.matrix[i * 2 * trunc + i] = Cx::new(T::one(), T::zero());
        }
        m
    }

    pub fn trunc(&self) -> usize {
        self.trunc
    }

    pub fn dim(&self) -> usize {
        2 * self.trunc
    }

    pub fn entry(&self, j: i64, k: i64) -> Cx<T> {
        self.matrix[idx(j, self.trunc) * self.dim() + idx(k, self.trunc)]
    }

    pub fn set_entry(&mut self, j: i64, k: i64, v: Cx<T>) {
        let d = self.dim();
        self.matrix[idx(j, self.trunc) * d + idx(k, self.trunc)] = v;
    }

    /// Weyl quantization: M[j,k] = a-hat(j - k, (j + k)/2).
    pub fn quantize_weyl(a: &Symbol<T>, trunc: usize) -> Result<Self> {
        Self::quantize_inner(a, trunc, None)
    }

    /// Paradifferential quantization: the Weyl matrix multiplied by the band
    /// cutoff chi_eps(|j-k| / <(j+k)/2>), so that it coincides entrywise with
    /// the Weyl quantization of the regularized symbol.
    pub fn quantize_bw(a: &Symbol<T>, trunc: usize, eps: T) -> Result<Self> {
        if eps <= T::zero() || eps >= T::one() {
            return Err(Error::InvalidParameter(format!(
                "band cutoff eps={eps} must lie in (0,1)"
            )));
        }
        Self::quantize_inner(a, trunc, Some(eps))
    }

    fn quantize_inner(a: &Symbol<T>, trunc: usize, eps: Option<T>) -> Result<Self> {
        if trunc < 1 {
            return Err(Error::InvalidParameter(
                "truncation order must be at least 1".into(),
            ));
        }
        let mut m = Self::zero(
            trunc,
            a.order(),
            if eps.is_some() {
                Provenance::BonyWeyl
            } else {
                Provenance::Weyl
            },
        );
        m.eps = eps;
        let jt = trunc as i64;
        let half = T::one() / T::of(2.0);
        // group entries by the anti-diagonal s = j + k (xi = s/2)
        for s in -2 * jt..=2 * jt {
            let xi = T::of(s as f64) * half;
            let modes = a.modes_at(xi, 2 * trunc);
            let jap = (T::one() + xi * xi).sqrt();
            for j in (-jt).max(s - jt)..=jt.min(s + jt) {
                let k = s - j;
                if j == 0 || k == 0 {
                    continue;
                }
                let n = j - k;
                let mut v = modes[(n + 2 * jt) as usize];
                if let Some(e) = eps {
                    let cut = chi_eps(e, T::of(n.unsigned_abs() as f64) / jap);
                    v = v * Cx::new(cut, T::zero());
                }
                m.set_entry(j, k, v);
            }
        }
        Ok(m)
    }

    /// Matrix-vector product on coefficients.
    pub fn apply(&self, u: &GridFunction<T>) -> Result<GridFunction<T>> {
        if u.trunc() != self.trunc {
            return Err(Error::Dimension(format!(
                "operator truncation {} does not match function truncation {}",
                self.trunc,
                u.trunc()
            )));
        }
        let d = self.dim();
        let mut vin = vec![c_zero(); d];
        for (j, c) in u.modes() {
            vin[idx(j, self.trunc)] = c;
        }
        let mut out = GridFunction::zero(self.trunc);
        for r in 0..d {
            let mut acc = c_zero::<T>();
            for c in 0..d {
                acc = acc + self.matrix[r * d + c] * vin[c];
            }
            if acc.norm_sqr() != T::zero() {
                out.set_coeff(freq(r, self.trunc), acc);
            }
        }
        out.mark_real();
        Ok(out)
    }

    /// Matrix product self * other.
    pub fn compose(&self, other: &Self) -> Result<Self> {
        if self.trunc != other.trunc {
            return Err(Error::Dimension(format!(
                "composition truncations {} vs {}",
                self.trunc, other.trunc
            )));
        }
        let d = self.dim();
        let mut m = Self::zero(self.trunc, self.order + other.order, Provenance::Composed);
        for r in 0..d {
            for i in 0..d {
                let a = self.matrix[r * d + i];
                if a.norm_sqr() == T::zero() {
                    continue;
                }
                for c in 0..d {
                    m.matrix[r * d + c] = m.matrix[r * d + c] + a * other.matrix[i * d + c];
                }
            }
        }
        Ok(m)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.trunc != other.trunc {
            return Err(Error::Dimension("operator sum truncation mismatch".into()));
        }
        let mut m = self.clone();
        for (a, b) in m.matrix.iter_mut().zip(&other.matrix) {
            *a = *a + *b;
        }
        Ok(m)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(Cx::new(-T::one(), T::zero())))
    }

    pub fn scale(&self, a: Cx<T>) -> Self {
        let mut m = self.clone();
        for v in &mut m.matrix {
            *v = *v * a;
        }
        m
    }

    /// Central block |j|,|k| <= trunc of a larger operator.
    pub fn restrict(&self, trunc: usize) -> Result<Self> {
        if trunc > self.trunc {
            return Err(Error::Dimension(format!(
                "cannot restrict operator of truncation {} to {}",
                self.trunc, trunc
            )));
        }
        let mut m = Self::zero(trunc, self.order, self.provenance);
        m.eps = self.eps;
        let jt = trunc as i64;
        for j in -jt..=jt {
            for k in -jt..=jt {
                if j == 0 || k == 0 {
                    continue;
                }
                m.set_entry(j, k, self.entry(j, k));
            }
        }
        Ok(m)
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = provenance;
        self
    }

    pub fn with_order(mut self, order: T) -> Self {
        self.order = order;
        self
    }

    pub fn frobenius_norm(&self) -> T {
        self.matrix
            .iter()
            .map(|v| v.norm_sqr())
            .fold(T::zero(), |a, b| a + b)
            .sqrt()
    }

    /// Cheap upper bound on the spectral norm: sqrt(||M||_1 ||M||_inf).
    pub fn norm_bound(&self) -> T {
        let d = self.dim();
        let mut row_max = T::zero();
        let mut col = vec![T::zero(); d];
        for r in 0..d {
            let mut row = T::zero();
            for c in 0..d {
                let a = self.matrix[r * d + c].norm();
                row += a;
                col[c] += a;
            }
            row_max = row_max.max(row);
        }
        let col_max = col.into_iter().fold(T::zero(), |a, b| a.max(b));
        (row_max * col_max).sqrt()
    }

    pub fn max_abs_entry(&self) -> T {
        self.matrix
            .iter()
            .map(|v| v.norm())
            .fold(T::zero(), |a, b| a.max(b))
    }

    /// Estimate of the H^{s_in} -> H^{s_out} operator norm: largest singular
    /// value of D_{s_out} M D_{s_in}^{-1} with D_s = diag(|j|^s), computed by
    /// power iteration on the normal matrix.
    pub fn band_norm(&self, s_in: SobolevIndex<T>, s_out: SobolevIndex<T>) -> T {
        let d = self.dim();
        if d == 0 {
            return T::zero();
        }
        let w = |i: usize, s: T| T::of(freq(i, self.trunc).unsigned_abs() as f64).powf(s);
        // weighted matrix B[r,c] = w_out(r) M[r,c] / w_in(c)
        let mut b = vec![c_zero::<T>(); d * d];
        for r in 0..d {
            let wr = w(r, s_out.0);
            for c in 0..d {
                b[r * d + c] =
                    self.matrix[r * d + c] * Cx::new(wr / w(c, s_in.0), T::zero());
            }
        }
        // power iteration on B^H B with a deterministic tilted start
        let mut v: Vec<Cx<T>> = (0..d)
            .map(|i| Cx::new(T::one() + T::of(i as f64) / T::of(d as f64), T::of(0.1)))
            .collect();
        let norm = |x: &[Cx<T>]| {
            x.iter()
                .map(|v| v.norm_sqr())
                .fold(T::zero(), |a, b| a + b)
                .sqrt()
        };
        let mut sigma = T::zero();
        for _ in 0..300 {
            // w = B v
            let mut bv = vec![c_zero::<T>(); d];
            for r in 0..d {
                let mut acc = c_zero::<T>();
                for c in 0..d {
                    acc = acc + b[r * d + c] * v[c];
                }
                bv[r] = acc;
            }
            // z = B^H w
            let mut z = vec![c_zero::<T>(); d];
            for c in 0..d {
                let mut acc = c_zero::<T>();
                for r in 0..d {
                    acc = acc + b[r * d + c].conj() * bv[r];
                }
                z[c] = acc;
            }
            let zn = norm(&z);
            if zn == T::zero() {
                return T::zero();
            }
            let new_sigma = zn.sqrt();
            let done = (new_sigma - sigma).abs() <= T::of(1e-12) * new_sigma.max(T::one());
            sigma = new_sigma;
            let inv = T::one() / zn;
            for (vi, zi) in v.iter_mut().zip(z) {
                *vi = zi * Cx::new(inv, T::zero());
            }
            if done {
                break;
            }
        }
        sigma
    }

    /// Columnar dump: header then "j k re im" for nonzero entries.
    pub fn to_text(&self) -> String {
        let mut s = format!(
            "# operator J={} order={} provenance={} eps={}\n",
            self.trunc,
            self.order.to_f64_lossy(),
            self.provenance,
            self.eps.map(|e| e.to_f64_lossy()).unwrap_or(f64::NAN)
        );
        let d = self.dim();
        for r in 0..d {
            for c in 0..d {
                let v = self.matrix[r * d + c];
                if v.norm_sqr() != T::zero() {
                    s.push_str(&format!(
                        "{} {} {:.17e} {:.17e}\n",
                        freq(r, self.trunc),
                        freq(c, self.trunc),
                        v.re.to_f64_lossy(),
                        v.im.to_f64_lossy()
                    ));
                }
            }
        }
        s
    }
}

/// Convenience free functions mirroring the operator constructors.
pub fn quantize_weyl<T: Scalar>(a: &Symbol<T>, trunc: usize) -> Result<SpectralOperator<T>> {
    SpectralOperator::quantize_weyl(a, trunc)
}

pub fn quantize_bw<T: Scalar>(a: &Symbol<T>, trunc: usize, eps: T) -> Result<SpectralOperator<T>> {
    SpectralOperator::quantize_bw(a, trunc, eps)
}

pub fn apply_operator<T: Scalar>(
    m: &SpectralOperator<T>,
    u: &GridFunction<T>,
) -> Result<GridFunction<T>> {
    m.apply(u)
}

pub fn operator_band_norm<T: Scalar>(
    m: &SpectralOperator<T>,
    s_in: SobolevIndex<T>,
    s_out: SobolevIndex<T>,
) -> T {
    m.band_norm(s_in, s_out)
}
