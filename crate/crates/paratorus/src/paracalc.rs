//! Symbolic composition a #_rho b with its operator remainder, and the Bony
//! paraproduct decomposition with its smoothing remainder.

use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::quantize::{quantize_bw, Provenance, SpectralOperator};
use crate::scalar::{c_zero, Cx, Scalar};
use crate::symbol::{chi_eps, Symbol};

/// a #_rho b: the symbol-level expansion of the operator composition.
///
/// rho <= 1: ab. rho <= 2: ab + (1/2i){a,b}. rho <= 3: additionally
/// - (1/8) s(a,b) with the symmetric second-order form s.
pub fn sharp_rho<T: Scalar>(a: &Symbol<T>, b: &Symbol<T>, rho: T) -> Result<Symbol<T>> {
    if rho <= T::zero() || rho > T::of(3.0) {
        return Err(Error::InvalidParameter(format!(
            "composition order rho={rho} must lie in (0,3]"
        )));
    }
    let mut out = a.product(b)?;
    if rho > T::one() {
        // 1/(2i) = -i/2
        let bracket = a
            .poisson_bracket(b)?
            .scale(Cx::new(T::zero(), -T::one() / T::of(2.0)));
        out = out.add(&bracket);
    }
    if rho > T::of(2.0) {
        let sform = a
            .s_form(b)?
            .scale(Cx::new(-T::one() / T::of(8.0), T::zero()));
        out = out.add(&sform);
    }
    Ok(out)
}

/// Symbolic principal part plus the exact operator residual
/// Op^BW(a) Op^BW(b) - Op^BW(a #_rho b).
#[derive(Debug, Clone)]
pub struct CompositionResult<T: Scalar> {
    pub principal: Symbol<T>,
    pub residual: SpectralOperator<T>,
    pub rho: T,
}

pub fn compose_with_remainder<T: Scalar>(
    a: &Symbol<T>,
    b: &Symbol<T>,
    rho: T,
    trunc: usize,
    eps: T,
) -> Result<CompositionResult<T>> {
    let principal = sharp_rho(a, b, rho)?;
    let product = compose_bw(a, b, trunc, eps)?;
    let mp = quantize_bw(&principal, trunc, eps)?;
    let residual = product
        .sub(&mp)?
        .with_provenance(Provenance::Residual)
        .with_order(a.order() + b.order() - rho);
    Ok(CompositionResult {
        principal,
        residual,
        rho,
    })
}

/// Op^BW(a) Op^BW(b) as an operator on the truncation-J block.
///
/// The intermediate frequency sum runs over the whole lattice, so the matrix
/// product is assembled on a lattice enlarged by the x-bandwidth of the
/// symbols and then restricted; a plainly truncated product would corrupt the
/// rows near |j| = J and mask the smoothing order of the remainder.
pub fn compose_bw<T: Scalar>(
    a: &Symbol<T>,
    b: &Symbol<T>,
    trunc: usize,
    eps: T,
) -> Result<SpectralOperator<T>> {
    let pad = a.coeff_trunc().min(b.coeff_trunc());
    let ext = trunc + pad;
    let ma = quantize_bw(a, ext, eps)?;
    let mb = quantize_bw(b, ext, eps)?;
    ma.compose(&mb)?.restrict(trunc)
}

/// Bony paraproduct split fg = T_f g + T_g f + R(f,g) after band projection.
#[derive(Debug, Clone)]
pub struct ParaproductSplit<T: Scalar> {
    pub tf_g: GridFunction<T>,
    pub tg_f: GridFunction<T>,
    pub remainder: GridFunction<T>,
    /// (xi, eta, w_fg, w_gf, theta) for every interacting pair.
    pub weights: Vec<(i64, i64, T, T, T)>,
    pub eps: T,
}

/// The partition-of-unity weight triple at output frequency xi and inner
/// frequency eta: (chi_eps(|xi-eta|/<xi+eta>), chi_eps(|eta|/<2 xi-eta>),
/// 1 minus their sum).
pub fn paraproduct_weights<T: Scalar>(eps: T, xi: i64, eta: i64) -> (T, T, T) {
    let jap = |n: i64| (T::one() + T::of((n * n) as f64)).sqrt();
    let w1 = chi_eps(eps, T::of((xi - eta).unsigned_abs() as f64) / jap(xi + eta));
    let w2 = chi_eps(eps, T::of(eta.unsigned_abs() as f64) / jap(2 * xi - eta));
    (w1, w2, T::one() - w1 - w2)
}

pub fn paraproduct<T: Scalar>(
    f: &GridFunction<T>,
    g: &GridFunction<T>,
    eps: T,
) -> Result<ParaproductSplit<T>> {
    if f.trunc() != g.trunc() {
        return Err(Error::Dimension(format!(
            "paraproduct truncations {} vs {}",
            f.trunc(),
            g.trunc()
        )));
    }
    if eps <= T::zero() || eps >= T::one() {
        return Err(Error::InvalidParameter(format!(
            "paraproduct band eps={eps} must lie in (0,1)"
        )));
    }
    let jt = f.trunc() as i64;
    let mut tf_g = GridFunction::zero(f.trunc());
    let mut tg_f = GridFunction::zero(f.trunc());
    let mut rem = GridFunction::zero(f.trunc());
    let mut weights = Vec::new();
    for xi in -jt..=jt {
        if xi == 0 {
            continue;
        }
        let mut acc1 = c_zero::<T>();
        let mut acc2 = c_zero::<T>();
        let mut acc3 = c_zero::<T>();
        for eta in -jt..=jt {
            if eta == 0 || xi == eta {
                continue;
            }
            let ff = f.coeff(xi - eta);
            let gg = g.coeff(eta);
            let prod = ff * gg;
            if prod.norm_sqr() == T::zero() {
                continue;
            }
            let (w1, w2, theta) = paraproduct_weights(eps, xi, eta);
            weights.push((xi, eta, w1, w2, theta));
            acc1 = acc1 + prod * Cx::new(w1, T::zero());
            acc2 = acc2 + prod * Cx::new(w2, T::zero());
            acc3 = acc3 + prod * Cx::new(theta, T::zero());
        }
        tf_g.set_coeff(xi, acc1);
        tg_f.set_coeff(xi, acc2);
        rem.set_coeff(xi, acc3);
    }
    tf_g.mark_real();
    tg_f.mark_real();
    rem.mark_real();
    Ok(ParaproductSplit {
        tf_g,
        tg_f,
        remainder: rem,
        weights,
        eps,
    })
}
