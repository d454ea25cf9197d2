//! Zero-mean periodic functions on the torus stored by Fourier coefficients
//! on the symmetric truncated lattice {-J,...,-1,1,...,J}, plus exact
//! spectral calculus (differentiation, antidifferentiation, Sobolev norms).

use crate::error::{Error, Result};
use crate::scalar::{c_zero, cis, Cx, Scalar};
use rand::Rng;

/// Sobolev regularity exponent. May be negative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SobolevIndex<T: Scalar>(pub T);

impl<T: Scalar> SobolevIndex<T> {
    pub fn new(s: T) -> Self {
        assert!(s.is_finite(), "Sobolev index must be finite");
        SobolevIndex(s)
    }
}

/// Zero-mean periodic function, u(x) = sum_{j in Z*, |j|<=J} c(j) e^{ijx}.
///
/// Frequency 0 carries no stored amplitude. If `real` is set the
/// coefficients are kept conjugate-symmetric.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction<T: Scalar> {
    trunc: usize,
    coeffs: Vec<Cx<T>>,
    real: bool,
}

fn idx(j: i64, trunc: usize) -> usize {
    debug_assert!(j != 0 && j.unsigned_abs() as usize <= trunc);
    if j < 0 {
        (j + trunc as i64) as usize
    } else {
        (j + trunc as i64 - 1) as usize
    }
}

impl<T: Scalar> GridFunction<T> {
    pub fn zero(trunc: usize) -> Self {
        assert!(trunc >= 1, "truncation order must be positive");
        GridFunction {
            trunc,
            coeffs: vec![c_zero(); 2 * trunc],
            real: true,
        }
    }

    /// Build from explicit (frequency, amplitude) pairs. Frequencies outside
    /// the band or at 0 are rejected.
    pub fn from_modes(trunc: usize, modes: &[(i64, Cx<T>)]) -> Result<Self> {
        let mut f = GridFunction::zero(trunc);
        for &(j, c) in modes {
            if j == 0 {
                return Err(Error::InvalidParameter(
                    "frequency 0 carries no amplitude on the zero-mean lattice".into(),
                ));
            }
            if j.unsigned_abs() as usize > trunc {
                return Err(Error::Dimension(format!(
                    "frequency {j} outside truncation band J={trunc}"
                )));
            }
            f.coeffs[idx(j, trunc)] = c;
        }
        f.real = f.check_real();
        Ok(f)
    }

    pub fn trunc(&self) -> usize {
        self.trunc
    }

    pub fn is_real(&self) -> bool {
        self.real
    }

    fn check_real(&self) -> bool {
        let tol = T::of(1e-14) * (T::one() + self.linf_coeff());
        (1..=self.trunc as i64).all(|j| {
            let d = self.coeff(j) - self.coeff(-j).conj();
            d.norm() <= tol
        })
    }

    fn linf_coeff(&self) -> T {
        self.coeffs
            .iter()
            .map(|c| c.norm())
            .fold(T::zero(), |a, b| a.max(b))
    }

    /// Coefficient at frequency j; 0 outside the band and at j = 0.
    pub fn coeff(&self, j: i64) -> Cx<T> {
        if j == 0 || j.unsigned_abs() as usize > self.trunc {
            c_zero()
        } else {
            self.coeffs[idx(j, self.trunc)]
        }
    }

    pub fn set_coeff(&mut self, j: i64, c: Cx<T>) {
        assert!(j != 0 && j.unsigned_abs() as usize <= self.trunc);
        self.coeffs[idx(j, self.trunc)] = c;
        self.real = false;
    }

    /// Iterate over (frequency, amplitude) for the whole band.
    pub fn modes(&self) -> impl Iterator<Item = (i64, Cx<T>)> + '_ {
        let trunc = self.trunc as i64;
        (-trunc..=trunc)
            .filter(|&j| j != 0)
            .map(move |j| (j, self.coeff(j)))
    }

    pub fn mark_real(&mut self) {
        self.real = self.check_real();
    }

    /// Re-truncate to a (possibly different) band.
    pub fn retrunc(&self, trunc: usize) -> Self {
        let mut out = GridFunction::zero(trunc);
        for (j, c) in self.modes() {
            if j.unsigned_abs() as usize <= trunc {
                out.coeffs[idx(j, trunc)] = c;
            }
        }
        out.real = self.real;
        out
    }

    pub fn scale(&self, a: Cx<T>) -> Self {
        let mut out = self.clone();
        for c in &mut out.coeffs {
            *c = *c * a;
        }
        out.real = out.real && a.im.abs() <= T::of(1e-300) && a.im == T::zero();
        if !out.real {
            out.real = out.check_real();
        }
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        let trunc = self.trunc.max(other.trunc);
        let mut out = GridFunction::zero(trunc);
        for (j, c) in self.modes() {
            out.coeffs[idx(j, trunc)] = c;
        }
        for (j, c) in other.modes() {
            out.coeffs[idx(j, trunc)] = out.coeffs[idx(j, trunc)] + c;
        }
        out.real = self.real && other.real;
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(Cx::new(-T::one(), T::zero())))
    }

    /// coeff(j) -> ij coeff(j)
    pub fn differentiate(&self) -> Self {
        let mut out = self.clone();
        for j in 1..=self.trunc as i64 {
            for sj in [j, -j] {
                let c = out.coeffs[idx(sj, self.trunc)];
                let f = Cx::new(T::zero(), T::of(sj as f64));
                out.coeffs[idx(sj, self.trunc)] = c * f;
            }
        }
        out
    }

    /// Periodic primitive with zero average: coeff(j) -> coeff(j)/(ij).
    pub fn antiderivative(&self) -> Self {
        let mut out = self.clone();
        for j in 1..=self.trunc as i64 {
            for sj in [j, -j] {
                let c = out.coeffs[idx(sj, self.trunc)];
                let f = Cx::new(T::zero(), T::of(sj as f64));
                out.coeffs[idx(sj, self.trunc)] = c / f;
            }
        }
        out
    }

    /// (sum_j |c(j)|^2 |j|^{2s})^{1/2}
    pub fn sobolev_norm(&self, s: SobolevIndex<T>) -> T {
        let mut acc = T::zero();
        for (j, c) in self.modes() {
            let w = T::of(j.unsigned_abs() as f64).powf(T::of(2.0) * s.0);
            acc += c.norm_sqr() * w;
        }
        acc.sqrt()
    }

    /// l2 pairing sum_j f(j) conj(g(j)).
    pub fn l2_inner(&self, other: &Self) -> Cx<T> {
        let mut acc = c_zero();
        for (j, c) in self.modes() {
            acc = acc + c * other.coeff(j).conj();
        }
        acc
    }

    /// Pointwise values on the uniform grid x_n = 2 pi n / gridsize.
    pub fn synthesize_complex(&self, gridsize: usize) -> Result<Vec<Cx<T>>> {
        check_gridsize(gridsize, self.trunc)?;
        let dft = Dft::new(gridsize);
        Ok(dft.synthesize(self))
    }

    /// Real pointwise values (real part of the mode sum).
    pub fn synthesize(&self, gridsize: usize) -> Result<Vec<T>> {
        Ok(self
            .synthesize_complex(gridsize)?
            .into_iter()
            .map(|c| c.re)
            .collect())
    }

    /// Deterministic random real-valued function with |c(j)| ~ |j|^{-decay}.
    pub fn random_real<R: Rng>(trunc: usize, decay: f64, scale: f64, rng: &mut R) -> Self {
        let mut f = GridFunction::zero(trunc);
        for j in 1..=trunc as i64 {
            let amp = scale * (j as f64).powf(-decay);
            let re = amp * (rng.gen::<f64>() - 0.5) * 2.0;
            let im = amp * (rng.gen::<f64>() - 0.5) * 2.0;
            let c = Cx::new(T::of(re), T::of(im));
            f.coeffs[idx(j, trunc)] = c;
            f.coeffs[idx(-j, trunc)] = c.conj();
        }
        f.real = true;
        f
    }

    /// Columnar text dump: header then one "j re im" line per frequency.
    pub fn to_text(&self) -> String {
        let mut s = format!("# gridfunction J={} real={}\n", self.trunc, self.real);
        for (j, c) in self.modes() {
            s.push_str(&format!(
                "{} {:.17e} {:.17e}\n",
                j,
                c.re.to_f64_lossy(),
                c.im.to_f64_lossy()
            ));
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty gridfunction text".into()))?;
        let trunc: usize = header
            .split_whitespace()
            .find_map(|tok| tok.strip_prefix("J=").and_then(|v| v.parse().ok()))
            .ok_or_else(|| Error::Parse("missing J= in gridfunction header".into()))?;
        let mut f = GridFunction::zero(trunc);
        for line in lines {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut it = line.split_whitespace();
            let j: i64 = it
                .next()
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| Error::Parse(format!("bad frequency in line '{line}'")))?;
            let re: f64 = it
                .next()
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| Error::Parse(format!("bad re in line '{line}'")))?;
            let im: f64 = it
                .next()
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| Error::Parse(format!("bad im in line '{line}'")))?;
            if j != 0 {
                f.coeffs[idx(j, trunc)] = Cx::new(T::of(re), T::of(im));
            }
        }
        f.real = f.check_real();
        Ok(f)
    }
}

fn check_gridsize(gridsize: usize, trunc: usize) -> Result<()> {
    if gridsize % 2 != 0 {
        return Err(Error::Dimension(format!(
            "grid size {gridsize} must be even"
        )));
    }
    if gridsize < 2 * trunc + 2 {
        return Err(Error::Dimension(format!(
            "grid size {gridsize} too small for truncation J={trunc} (need >= {})",
            2 * trunc + 2
        )));
    }
    Ok(())
}

/// Truncated Fourier analysis of real samples on the uniform grid.
/// A nonzero sample mean is projected out.
pub fn analyze<T: Scalar>(samples: &[T], trunc: usize) -> Result<GridFunction<T>> {
    check_gridsize(samples.len(), trunc)?;
    let dft = Dft::new(samples.len());
    let complex: Vec<Cx<T>> = samples.iter().map(|&v| Cx::new(v, T::zero())).collect();
    let mut f = dft.analyze(&complex, trunc);
    f.real = true;
    Ok(f)
}

pub fn analyze_complex<T: Scalar>(samples: &[Cx<T>], trunc: usize) -> Result<GridFunction<T>> {
    check_gridsize(samples.len(), trunc)?;
    let dft = Dft::new(samples.len());
    let mut f = dft.analyze(samples, trunc);
    f.mark_real();
    Ok(f)
}

/// Trapezoid (here: exact spectral) quadrature of grid samples over the torus.
pub fn quadrature<T: Scalar>(samples: &[T]) -> T {
    let n = T::of(samples.len() as f64);
    let sum: T = samples.iter().copied().sum();
    sum / n * T::of(2.0) * T::PI()
}

/// Precomputed unit-root table for repeated transforms of one grid size.
pub struct Dft<T: Scalar> {
    size: usize,
    roots: Vec<Cx<T>>, // roots[k] = e^{2 pi i k / size}
}

impl<T: Scalar> Dft<T> {
    pub fn new(size: usize) -> Self {
        let roots = (0..size)
            .map(|k| cis(T::of(2.0) * T::PI() * T::of(k as f64) / T::of(size as f64)))
            .collect();
        Dft { size, roots }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    fn root(&self, e: i64) -> Cx<T> {
        self.roots[(e.rem_euclid(self.size as i64)) as usize]
    }

    /// Full mode vector for frequencies -j_max..=j_max (including the mean).
    pub fn analyze_full(&self, samples: &[Cx<T>], j_max: usize) -> Vec<Cx<T>> {
        debug_assert_eq!(samples.len(), self.size);
        let inv = T::one() / T::of(self.size as f64);
        let mut out = Vec::with_capacity(2 * j_max + 1);
        for j in -(j_max as i64)..=(j_max as i64) {
            let mut acc = c_zero::<T>();
            for (n, &v) in samples.iter().enumerate() {
                acc = acc + v * self.root(-j * n as i64);
            }
            out.push(acc * Cx::new(inv, T::zero()));
        }
        out
    }

    pub fn analyze(&self, samples: &[Cx<T>], trunc: usize) -> GridFunction<T> {
        let full = self.analyze_full(samples, trunc);
        let mut f = GridFunction::zero(trunc);
        for j in -(trunc as i64)..=(trunc as i64) {
            if j != 0 {
                f.coeffs[idx(j, trunc)] = full[(j + trunc as i64) as usize];
            }
        }
        f
    }

    pub fn synthesize(&self, f: &GridFunction<T>) -> Vec<Cx<T>> {
        let mut out = vec![c_zero(); self.size];
        for (j, c) in f.modes() {
            if c.norm_sqr() == T::zero() {
                continue;
            }
            for (n, o) in out.iter_mut().enumerate() {
                *o = *o + c * self.root(j * n as i64);
            }
        }
        out
    }

    /// Grid abscissae x_n = 2 pi n / size.
    pub fn grid(&self) -> Vec<T> {
        (0..self.size)
            .map(|n| T::of(2.0) * T::PI() * T::of(n as f64) / T::of(self.size as f64))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    type G = GridFunction<f64>;

    fn samples_of<F: Fn(f64) -> f64>(n: usize, f: F) -> Vec<f64> {
        (0..n)
            .map(|k| f(2.0 * std::f64::consts::PI * k as f64 / n as f64))
            .collect()
    }

    #[test]
    fn analyze_cosine_single_mode() {
        let f = analyze(&samples_of(16, |x| x.cos()), 4).unwrap();
        assert_abs_diff_eq!(f.coeff(1).re, 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(f.coeff(-1).re, 0.5, epsilon = 1e-14);
        assert!(f.coeff(1).im.abs() < 1e-14);
        for j in 2..=4 {
            assert!(f.coeff(j).norm() < 1e-14);
        }
    }

    #[test]
    fn analyze_projects_out_mean() {
        let f = analyze(&vec![1.0; 16], 4).unwrap();
        for (_, c) in f.modes() {
            assert!(c.norm() < 1e-15);
        }
    }

    #[test]
    fn analyze_matches_closed_form_coefficients() {
        // sin(3x) + 0.2 cos(5x), J = 8
        let f = analyze(&samples_of(32, |x| (3.0 * x).sin() + 0.2 * (5.0 * x).cos()), 8).unwrap();
        assert_abs_diff_eq!(f.coeff(3).im, -0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(f.coeff(-3).im, 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(f.coeff(5).re, 0.1, epsilon = 1e-14);
        assert_abs_diff_eq!(f.coeff(-5).re, 0.1, epsilon = 1e-14);
        assert!(f.coeff(2).norm() < 1e-14 && f.coeff(4).norm() < 1e-14);
    }

    #[test]
    fn analyze_rejects_bad_grid() {
        assert!(analyze(&vec![0.0f64; 15], 4).is_err());
        assert!(analyze(&vec![0.0f64; 8], 4).is_err());
    }

    #[test]
    fn synthesize_cosine() {
        let f = G::from_modes(2, &[(1, Cx::new(0.5, 0.0)), (-1, Cx::new(0.5, 0.0))]).unwrap();
        let vals = f.synthesize(16).unwrap();
        for (n, v) in vals.iter().enumerate() {
            let x = 2.0 * std::f64::consts::PI * n as f64 / 16.0;
            assert_abs_diff_eq!(*v, x.cos(), epsilon = 1e-14);
        }
    }

    #[test]
    fn synthesize_empty_is_zero() {
        let vals = G::zero(4).synthesize(16).unwrap();
        assert!(vals.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn synthesize_matches_direct_mode_summation_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let f = G::random_real(16, 1.0, 1.0, &mut rng);
        let n = 64;
        let vals = f.synthesize(n).unwrap();
        // independent O(NJ) summation
        for (k, v) in vals.iter().enumerate() {
            let x = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
            let mut acc = 0.0;
            for (j, c) in f.modes() {
                let e = num_complex::Complex::new(0.0, j as f64 * x).exp();
                acc += (c * e).re;
            }
            assert_abs_diff_eq!(*v, acc, epsilon = 1e-13);
        }
    }

    #[test]
    fn round_trip_band_limited() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f = G::random_real(8, 0.5, 1.0, &mut rng);
        let g = analyze(&f.synthesize(32).unwrap(), 8).unwrap();
        for (j, c) in f.modes() {
            assert!((c - g.coeff(j)).norm() < 1e-13 * (1.0 + c.norm()));
        }
    }

    #[test]
    fn sobolev_norm_values() {
        let f = G::from_modes(2, &[(1, Cx::new(1.0, 0.0)), (-1, Cx::new(1.0, 0.0))]).unwrap();
        assert_abs_diff_eq!(f.sobolev_norm(SobolevIndex(0.0)), 2f64.sqrt(), epsilon = 1e-15);
        let g = G::from_modes(2, &[(2, Cx::new(1.0, 0.0))]).unwrap();
        assert_abs_diff_eq!(g.sobolev_norm(SobolevIndex(3.0)), 8.0, epsilon = 1e-13);
    }

    #[test]
    fn sobolev_norm_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let f = G::random_real(12, 0.7, 2.0, &mut rng);
        let mut acc = 0.0;
        for (j, c) in f.modes() {
            acc += c.norm_sqr() * (j.unsigned_abs() as f64).powi(4);
        }
        assert_abs_diff_eq!(f.sobolev_norm(SobolevIndex(2.0)), acc.sqrt(), epsilon = 1e-14);
    }

    #[test]
    fn differentiate_cosine() {
        let f = analyze(&samples_of(16, |x| x.cos()), 4).unwrap();
        let d = f.differentiate();
        let e = analyze(&samples_of(16, |x| -x.sin()), 4).unwrap();
        for (j, c) in d.modes() {
            assert!((c - e.coeff(j)).norm() < 1e-14);
        }
        let z = G::zero(4).differentiate();
        assert!(z.modes().all(|(_, c)| c.norm() == 0.0));
    }

    #[test]
    fn differentiate_single_pair_symbolic() {
        let f = G::from_modes(6, &[(5, Cx::new(1.0, 0.0)), (-5, Cx::new(1.0, 0.0))]).unwrap();
        let d = f.differentiate();
        assert_eq!(d.coeff(5), Cx::new(0.0, 5.0));
        assert_eq!(d.coeff(-5), Cx::new(0.0, -5.0));
    }

    #[test]
    fn antiderivative_inverts_differentiate() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let f = G::random_real(10, 0.3, 1.0, &mut rng);
        let g = f.antiderivative().differentiate();
        for (j, c) in f.modes() {
            assert!((c - g.coeff(j)).norm() < 1e-14 * (1.0 + c.norm()));
        }
        let a = analyze(&samples_of(16, |x| x.cos()), 4).unwrap().antiderivative();
        let s = analyze(&samples_of(16, |x| x.sin()), 4).unwrap();
        for (j, c) in a.modes() {
            assert!((c - s.coeff(j)).norm() < 1e-14);
        }
    }

    #[test]
    fn symplectic_pairing_antisymmetric() {
        // Omega(u, v) = int (dx^{-1} u) v dx, quadrature oracle
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..5 {
            let u = G::random_real(8, 0.5, 1.0, &mut rng);
            let v = G::random_real(8, 0.5, 1.0, &mut rng);
            let n = 64;
            let pair = |a: &G, b: &G| {
                let pa = a.antiderivative().synthesize(n).unwrap();
                let vb = b.synthesize(n).unwrap();
                quadrature(&pa.iter().zip(&vb).map(|(x, y)| x * y).collect::<Vec<_>>())
            };
            let o1 = pair(&u, &v);
            let o2 = pair(&v, &u);
            assert!((o1 + o2).abs() < 1e-13 * (1.0 + o1.abs()));
        }
    }

    #[test]
    fn parseval() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let f = G::random_real(16, 0.8, 1.5, &mut rng);
        let vals = f.synthesize(64).unwrap();
        let integral = quadrature(&vals.iter().map(|v| v * v).collect::<Vec<_>>());
        let lhs = f.sobolev_norm(SobolevIndex(0.0)).powi(2) * 2.0 * std::f64::consts::PI;
        assert!((lhs - integral).abs() < 1e-12 * (1.0 + integral.abs()));
    }

    #[test]
    fn text_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let f = G::random_real(6, 0.2, 1.0, &mut rng);
        let g = G::from_text(&f.to_text()).unwrap();
        assert_eq!(f, g);
    }

    #[test]
    fn generic_scalar_f32() {
        let f: GridFunction<f32> =
            GridFunction::from_modes(2, &[(1, Cx::new(0.5f32, 0.0)), (-1, Cx::new(0.5, 0.0))])
                .unwrap();
        let vals = f.synthesize(16).unwrap();
        assert!((vals[0] - 1.0).abs() < 1e-6);
    }
}
