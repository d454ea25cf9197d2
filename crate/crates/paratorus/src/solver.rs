//! The quasilinear iterative scheme: repeated linear solves with the
//! generator frozen along the previous iterate, geometric Cauchy monitoring,
//! an independent dealiased pseudospectral oracle and a solution-map
//! continuity probe.

use crate::error::{Error, Result};
use crate::flow::solve_linear;
use crate::grid::{GridFunction, SobolevIndex};
use crate::hamiltonian::{ellipticity_margin, nonlinear_rhs, HamiltonianDensity};
use crate::paralin::{build_generator_symbol, residual_remainder};
use crate::scalar::{Cx, Scalar};

pub type Trajectory<T> = Vec<(T, GridFunction<T>)>;

#[derive(Debug, Clone)]
pub struct SolverConfig<T: Scalar> {
    /// Fourier truncation J of the computational band.
    pub trunc: usize,
    /// Low regularity index; convergence is monitored in H^{s0}.
    pub s0: T,
    /// High regularity index of the data.
    pub s: T,
    /// Energy exponent used by the linear solves' growth reports.
    pub sigma: T,
    /// Band-cutoff parameter of the quantization.
    pub eps_para: T,
    /// Mollification parameter; None selects the safeguard schedule
    /// min(1, 1/(margin J^3)) whose plateau covers the whole band.
    pub eps_mollify: Option<T>,
    /// Requested horizon; the effective horizon is additionally capped by
    /// min(1, 1/||u0||_{H^{s0+3}}) and halved on retries.
    pub t_horizon: T,
    /// Time step; None selects a stability-capped step at the initial state.
    pub step: Option<T>,
    pub max_iterations: usize,
    /// Convergence tolerance on sup_t ||u_m - u_{m-1}||_{H^{s0}}.
    pub tol: T,
    /// Number of times the horizon may be halved before giving up.
    pub max_retries: usize,
}

impl<T: Scalar> SolverConfig<T> {
    pub fn standard(trunc: usize) -> Self {
        SolverConfig {
            trunc,
            s0: T::of(1.6),
            s: T::of(4.6),
            sigma: T::of(2.0),
            eps_para: T::of(0.1),
            eps_mollify: None,
            t_horizon: T::of(0.01),
            step: None,
            max_iterations: 12,
            tol: T::of(1e-9),
            max_retries: 4,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.s > T::of(4.5)) {
            return Err(Error::Config(format!(
                "s must exceed 4.5, got {}",
                self.s.to_f64_lossy()
            )));
        }
        if !(self.s0 > T::of(1.5)) {
            return Err(Error::Config(format!(
                "s0 must exceed 1.5, got {}",
                self.s0.to_f64_lossy()
            )));
        }
        if self.trunc < 2 {
            return Err(Error::Config(format!(
                "truncation must be at least 2, got {}",
                self.trunc
            )));
        }
        if !(self.eps_para > T::zero() && self.eps_para < T::one()) {
            return Err(Error::Config(format!(
                "band parameter must lie in (0,1), got {}",
                self.eps_para.to_f64_lossy()
            )));
        }
        if let Some(e) = self.eps_mollify {
            if !(e > T::zero() && e <= T::one()) {
                return Err(Error::Config(format!(
                    "mollification parameter must lie in (0,1], got {}",
                    e.to_f64_lossy()
                )));
            }
        }
        if !(self.t_horizon > T::zero()) {
            return Err(Error::Config("horizon must be positive".into()));
        }
        if let Some(h) = self.step {
            if !(h > T::zero()) {
                return Err(Error::Config("step must be positive".into()));
            }
        }
        if self.max_iterations == 0 {
            return Err(Error::Config("need at least one iteration".into()));
        }
        if !(self.tol > T::zero()) {
            return Err(Error::Config("tolerance must be positive".into()));
        }
        if self.sigma < T::zero() {
            return Err(Error::Config("energy exponent must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Safeguard mollification: the cutoff plateau covers the whole band, so the
/// mollifier only intervenes if the coefficients grow unexpectedly.
pub fn safeguard_mollification<T: Scalar>(margin: T, trunc: usize) -> T {
    (T::one() / (margin * T::of(trunc as f64).powi(3))).min(T::one())
}

#[derive(Debug, Clone)]
pub struct IterationRow<T: Scalar> {
    pub m: usize,
    pub sup_hs0: T,
    pub sup_hs0p3: T,
    pub sup_hs: T,
    pub sup_dt_hs0: T,
    pub diff_hs0: T,
}

#[derive(Debug, Clone)]
pub struct IterationLedger<T: Scalar> {
    pub rows: Vec<IterationRow<T>>,
    /// ||u0||_{H^{s0}} — the radius of the low-norm ball.
    pub r: T,
    /// Largest observed sup_t ||u_m||_{H^{s0+3}}.
    pub theta: T,
    /// Largest observed sup_t ||u_m||_{H^s}.
    pub m_cap: T,
    pub t_final: T,
    pub step: T,
    pub retries: usize,
    pub converged: bool,
}

impl<T: Scalar> IterationLedger<T> {
    pub fn to_text(&self) -> String {
        let mut out = String::from(
            "# m  sup_hs0  sup_hs0p3  sup_hs  sup_dt_hs0  diff_hs0\n",
        );
        for r in &self.rows {
            out.push_str(&format!(
                "{} {:.12e} {:.12e} {:.12e} {:.12e} {:.12e}\n",
                r.m,
                r.sup_hs0.to_f64_lossy(),
                r.sup_hs0p3.to_f64_lossy(),
                r.sup_hs.to_f64_lossy(),
                r.sup_dt_hs0.to_f64_lossy(),
                r.diff_hs0.to_f64_lossy(),
            ));
        }
        out.push_str(&format!(
            "# r {:.6e} theta {:.6e} m_cap {:.6e} T {:.6e} h {:.6e} retries {} converged {}\n",
            self.r.to_f64_lossy(),
            self.theta.to_f64_lossy(),
            self.m_cap.to_f64_lossy(),
            self.t_final.to_f64_lossy(),
            self.step.to_f64_lossy(),
            self.retries,
            self.converged,
        ));
        out
    }
}

pub fn trajectory_to_text<T: Scalar>(traj: &Trajectory<T>) -> String {
    let mut out = String::new();
    if let Some((_, u)) = traj.first() {
        out.push_str(&format!("# t then re/im pairs for modes -{0}..-1,1..{0}\n", u.trunc()));
    }
    for (t, u) in traj {
        out.push_str(&format!("{:.12e}", t.to_f64_lossy()));
        let j = u.trunc() as i64;
        for m in (-j..=j).filter(|&m| m != 0) {
            let c = u.coeff(m);
            out.push_str(&format!(
                " {:.12e} {:.12e}",
                c.re.to_f64_lossy(),
                c.im.to_f64_lossy()
            ));
        }
        out.push('\n');
    }
    out
}

fn interp<T: Scalar>(traj: &[(T, GridFunction<T>)], t: T) -> GridFunction<T> {
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

/// Forcing snapshots -R_0(u(t)) along a trajectory. The trajectory is
/// subsampled to at most 65 points: the forcing is interpolated linearly in
/// time downstream, and R_0 varies on the slow (order-one) timescale, so a
/// finer sampling only adds cost.
fn forcing_snapshots<T: Scalar>(
    f: &HamiltonianDensity<T>,
    u_prev: &Trajectory<T>,
    trunc: usize,
    eps_para: T,
) -> Result<Trajectory<T>> {
    let stride = ((u_prev.len() - 1) / 64).max(1);
    let mut out = Vec::new();
    let mut i = 0;
    while i < u_prev.len() {
        let (t, u) = &u_prev[i];
        let a = build_generator_symbol(f, u)?;
        let r0 = residual_remainder(f, u, &a, trunc, eps_para)?;
        out.push((*t, r0.scale(Cx::new(-T::one(), T::zero()))));
        if i == u_prev.len() - 1 {
            break;
        }
        i = (i + stride).min(u_prev.len() - 1);
    }
    Ok(out)
}

fn choose_step<T: Scalar>(
    f: &HamiltonianDensity<T>,
    u0: &GridFunction<T>,
    config: &SolverConfig<T>,
    eps_moll: T,
) -> Result<T> {
    if let Some(h) = config.step {
        return Ok(h);
    }
    let a = build_generator_symbol(f, u0)?;
    let gen = crate::flow::mollify_symbol(&a, u0, eps_moll, config.trunc, config.eps_para)?;
    Ok(T::of(0.5) * T::of(2.5) / gen.norm_bound)
}

/// One pass of the scheme: solve the linear problem with the generator
/// frozen along `u_prev` and forcing -R_0(u_prev(t)), starting from u0.
pub fn iterate_once<T: Scalar>(
    f: &HamiltonianDensity<T>,
    u_prev: &Trajectory<T>,
    u0: &GridFunction<T>,
    config: &SolverConfig<T>,
) -> Result<Trajectory<T>> {
    config.validate()?;
    if u0.trunc() != config.trunc {
        return Err(Error::Dimension(format!(
            "initial datum truncation {} does not match configured {}",
            u0.trunc(),
            config.trunc
        )));
    }
    if u_prev.is_empty() {
        return Err(Error::InvalidParameter("empty previous iterate".into()));
    }
    let t_end = u_prev
        .last()
        .map(|(t, _)| *t)
        .filter(|t| *t > T::zero())
        .unwrap_or(config.t_horizon);
    let rep = ellipticity_margin(f, u0)?;
    let eps_moll = config
        .eps_mollify
        .unwrap_or_else(|| safeguard_mollification(rep.margin, config.trunc));
    let h = choose_step(f, u0, config, eps_moll)?;
    let forcing = forcing_snapshots(f, u_prev, config.trunc, config.eps_para)?;
    let (traj, _) = solve_linear(
        f,
        u_prev,
        u0,
        SobolevIndex(config.sigma),
        eps_moll,
        t_end,
        h,
        Some(forcing.as_slice()),
        config.eps_para,
    )?;
    Ok(traj)
}

fn sup_norm<T: Scalar>(traj: &Trajectory<T>, s: SobolevIndex<T>) -> T {
    traj.iter()
        .map(|(_, u)| u.sobolev_norm(s))
        .fold(T::zero(), |a, b| a.max(b))
}

fn sup_dt_norm<T: Scalar>(traj: &Trajectory<T>, s: SobolevIndex<T>) -> T {
    let mut worst = T::zero();
    for w in traj.windows(2) {
        let dt = w[1].0 - w[0].0;
        if dt > T::zero() {
            let d = w[1].1.sub(&w[0].1).sobolev_norm(s) / dt;
            worst = worst.max(d);
        }
    }
    worst
}

fn sup_diff<T: Scalar>(traj: &Trajectory<T>, prev: &Trajectory<T>, s: SobolevIndex<T>) -> T {
    traj.iter()
        .map(|(t, u)| u.sub(&interp(prev, *t)).sobolev_norm(s))
        .fold(T::zero(), |a, b| a.max(b))
}

/// Iterate the scheme until the successive-difference norm drops below the
/// tolerance. The horizon starts at min(requested, 1, 1/||u0||_{H^{s0+3}})
/// and is halved when the differences fail to decay geometrically.
pub fn solve<T: Scalar>(
    f: &HamiltonianDensity<T>,
    u0: &GridFunction<T>,
    config: &SolverConfig<T>,
) -> Result<(Trajectory<T>, IterationLedger<T>)> {
    config.validate()?;
    if u0.trunc() != config.trunc {
        return Err(Error::Dimension(format!(
            "initial datum truncation {} does not match configured {}",
            u0.trunc(),
            config.trunc
        )));
    }
    let rep = ellipticity_margin(f, u0)?;
    if rep.margin <= T::zero() {
        return Err(Error::Ellipticity {
            margin: rep.margin.to_f64_lossy(),
        });
    }
    let s0 = SobolevIndex(config.s0);
    let s0p3 = SobolevIndex(config.s0 + T::of(3.0));
    let s_hi = SobolevIndex(config.s);
    let eps_moll = config
        .eps_mollify
        .unwrap_or_else(|| safeguard_mollification(rep.margin, config.trunc));

    let n0p3 = u0.sobolev_norm(s0p3);
    let mut t_end = config.t_horizon.min(T::one());
    if n0p3 > T::zero() {
        t_end = t_end.min(T::one() / n0p3);
    }
    let mut h = choose_step(f, u0, config, eps_moll)?;

    let mut retries = 0usize;
    loop {
        let mut ledger = IterationLedger {
            rows: Vec::new(),
            r: u0.sobolev_norm(s0),
            theta: T::zero(),
            m_cap: T::zero(),
            t_final: t_end,
            step: h,
            retries,
            converged: false,
        };
        let mut u_prev: Trajectory<T> = vec![(T::zero(), u0.clone())];
        let mut prev_diff: Option<T> = None;
        let mut geometric_violations = 0usize;
        let mut outcome: Option<Trajectory<T>> = None;

        'iterates: for m in 1..=config.max_iterations {
            // first pass has no forcing (the scheme starts from the linear
            // problem); later passes force with -R_0 along the previous
            // iterate
            let forcing = if m == 1 {
                None
            } else {
                Some(forcing_snapshots(f, &u_prev, config.trunc, config.eps_para)?)
            };
            let traj = loop {
                let solved = solve_linear(
                    f,
                    &u_prev,
                    u0,
                    SobolevIndex(config.sigma),
                    eps_moll,
                    t_end,
                    h,
                    forcing.as_deref(),
                    config.eps_para,
                );
                match solved {
                    Ok((traj, _)) => break traj,
                    Err(Error::Stability { suggested, .. }) => {
                        // tighten the step and redo this pass
                        h = T::of(0.8) * T::of(suggested);
                        ledger.step = h;
                    }
                    Err(e) => return Err(e),
                }
            };
            let diff = sup_diff(&traj, &u_prev, s0);
            let row = IterationRow {
                m,
                sup_hs0: sup_norm(&traj, s0),
                sup_hs0p3: sup_norm(&traj, s0p3),
                sup_hs: sup_norm(&traj, s_hi),
                sup_dt_hs0: sup_dt_norm(&traj, s0),
                diff_hs0: diff,
            };
            ledger.theta = ledger.theta.max(row.sup_hs0p3);
            ledger.m_cap = ledger.m_cap.max(row.sup_hs);
            ledger.rows.push(row);

            if diff <= config.tol {
                ledger.converged = true;
                outcome = Some(traj);
                break 'iterates;
            }
            if m >= 3 {
                if let Some(pd) = prev_diff {
                    if pd > T::zero() && diff / pd > T::of(0.75) {
                        geometric_violations += 1;
                    } else {
                        geometric_violations = 0;
                    }
                    if geometric_violations >= 2 {
                        break 'iterates;
                    }
                }
            }
            prev_diff = Some(diff);
            u_prev = traj;
        }

        if let Some(traj) = outcome {
            return Ok((traj, ledger));
        }
        retries += 1;
        if retries > config.max_retries {
            return Err(Error::Nonconvergence(format!(
                "iteration differences did not decay below {} within {} passes after {} horizon halvings (last horizon {})",
                config.tol.to_f64_lossy(),
                config.max_iterations,
                config.max_retries,
                t_end.to_f64_lossy(),
            )));
        }
        t_end = t_end / T::of(2.0);
    }
}

/// Largest admissible explicit step for the direct integration at the given
/// truncation: the stiffest mode moves like (sup d2F) J^3.
pub fn oracle_step_cap<T: Scalar>(
    f: &HamiltonianDensity<T>,
    u0: &GridFunction<T>,
    trunc_hi: usize,
) -> Result<T> {
    let u = u0.retrunc(trunc_hi);
    let g = crate::hamiltonian::eval_gridsize(f.degree(), trunc_hi);
    let c2 = f.partial_along(0, 0, 2, &u, g)?;
    let c2_max = c2.iter().fold(T::zero(), |a, &b| a.max(b.abs()));
    if c2_max <= T::zero() {
        return Err(Error::InvalidParameter(
            "degenerate leading coefficient".into(),
        ));
    }
    Ok(T::of(2.5) / (c2_max * T::of(trunc_hi as f64).powi(3)))
}

/// Direct dealiased method-of-lines integration of the full nonlinear
/// equation at an independent (finer) truncation, with classical fourth-order
/// stepping. No paradifferential machinery is involved.
pub fn oracle_solve<T: Scalar>(
    f: &HamiltonianDensity<T>,
    u0: &GridFunction<T>,
    trunc_hi: usize,
    t_end: T,
    h: T,
) -> Result<Trajectory<T>> {
    if trunc_hi < u0.trunc() {
        return Err(Error::InvalidParameter(format!(
            "oracle truncation {} below datum truncation {}",
            trunc_hi,
            u0.trunc()
        )));
    }
    if t_end <= T::zero() || h <= T::zero() {
        return Err(Error::InvalidParameter(
            "need positive horizon and step".into(),
        ));
    }
    let u_start = u0.retrunc(trunc_hi);
    let rep = ellipticity_margin(f, &u_start)?;
    if rep.margin <= T::zero() {
        return Err(Error::Ellipticity {
            margin: rep.margin.to_f64_lossy(),
        });
    }
    let cap = oracle_step_cap(f, u0, trunc_hi)?;
    if h > cap {
        return Err(Error::Cfl {
            h: h.to_f64_lossy(),
            suggested: cap.to_f64_lossy(),
        });
    }
    let n_steps = (t_end / h).to_f64_lossy().ceil().max(1.0) as usize;
    let h_eff = t_end / T::of(n_steps as f64);
    // keep the stored trajectory to a manageable number of snapshots
    let keep_every = (n_steps / 512).max(1);
    let mut u = u_start;
    let mut traj: Trajectory<T> = vec![(T::zero(), u.clone())];
    let half = Cx::new(h_eff / T::of(2.0), T::zero());
    let full = Cx::new(h_eff, T::zero());
    let two = Cx::new(T::of(2.0), T::zero());
    for step in 0..n_steps {
        let k1 = nonlinear_rhs(f, &u)?;
        let k2 = nonlinear_rhs(f, &u.add(&k1.scale(half)))?;
        let k3 = nonlinear_rhs(f, &u.add(&k2.scale(half)))?;
        let k4 = nonlinear_rhs(f, &u.add(&k3.scale(full)))?;
        let incr = k1.add(&k2.scale(two)).add(&k3.scale(two)).add(&k4);
        u = u.add(&incr.scale(Cx::new(h_eff / T::of(6.0), T::zero())));
        let t = T::of((step + 1) as f64) * h_eff;
        if (step + 1) % keep_every == 0 || step + 1 == n_steps {
            traj.push((t, u.clone()));
        }
    }
    Ok(traj)
}

#[derive(Debug, Clone)]
pub struct ContinuityRow<T: Scalar> {
    pub delta: T,
    pub diff_hs0: T,
    pub diff_hs: T,
}

#[derive(Debug, Clone)]
pub struct ContinuityReport<T: Scalar> {
    pub rows: Vec<ContinuityRow<T>>,
    pub t_final: T,
}

impl<T: Scalar> ContinuityReport<T> {
    pub fn to_text(&self) -> String {
        let mut out = format!("# delta  diff_hs0  diff_hs  (at t = {:.6e})\n", self.t_final.to_f64_lossy());
        for r in &self.rows {
            out.push_str(&format!(
                "{:.6e} {:.12e} {:.12e}\n",
                r.delta.to_f64_lossy(),
                r.diff_hs0.to_f64_lossy(),
                r.diff_hs.to_f64_lossy(),
            ));
        }
        out
    }
}

/// Perturb the datum by delta times a fixed-seed normalized zero-mean bump,
/// re-solve, and report final-time differences for each delta.
pub fn continuity_probe<T: Scalar>(
    f: &HamiltonianDensity<T>,
    u0: &GridFunction<T>,
    deltas: &[T],
    config: &SolverConfig<T>,
    seed: u64,
) -> Result<ContinuityReport<T>> {
    use rand::SeedableRng;
    let (base_traj, base_ledger) = solve(f, u0, config)?;
    let t_final = base_ledger.t_final;
    // pin the horizon so perturbed runs are compared at the same time
    let mut pinned = config.clone();
    pinned.t_horizon = t_final;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut bump = GridFunction::<T>::random_real(config.trunc, 3.0, 1.0, &mut rng);
    let nb = bump.sobolev_norm(SobolevIndex(config.s));
    bump = bump.scale(Cx::new(T::one() / nb, T::zero()));
    let base_final = &base_traj.last().unwrap().1;

    let mut rows = Vec::new();
    for &delta in deltas {
        let u0d = u0.add(&bump.scale(Cx::new(delta, T::zero())));
        let (traj, ledger) = solve(f, &u0d, &pinned)?;
        if (ledger.t_final - t_final).abs() > T::of(1e-12) {
            return Err(Error::Nonconvergence(format!(
                "perturbed run shrank its horizon to {}, cannot compare at {}",
                ledger.t_final.to_f64_lossy(),
                t_final.to_f64_lossy()
            )));
        }
        let u_final = &traj.last().unwrap().1;
        rows.push(ContinuityRow {
            delta,
            diff_hs0: u_final.sub(base_final).sobolev_norm(SobolevIndex(config.s0)),
            diff_hs: u_final.sub(base_final).sobolev_norm(SobolevIndex(config.s)),
        });
    }
    Ok(ContinuityReport { rows, t_final })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::analyze;
    use crate::hamiltonian::{build_density, kdv_density, quasilinear_density, Monomial};

    fn from_fn<F: Fn(f64) -> f64>(trunc: usize, f: F) -> GridFunction<f64> {
        let n = 16 * (trunc + 1);
        let samples: Vec<f64> = (0..n)
            .map(|k| f(2.0 * std::f64::consts::PI * k as f64 / n as f64))
            .collect();
        analyze(&samples, trunc).unwrap()
    }

    fn airy_density() -> HamiltonianDensity<f64> {
        // F = z1^2/2: pure dispersion, zero paralinearization residual
        build_density(vec![Monomial {
            c: 0.5,
            p: 0,
            q: 2,
            k_cos: 0,
            k_sin: 0,
        }])
        .unwrap()
    }

    #[test]
    fn config_rejects_low_s() {
        let mut c = SolverConfig::<f64>::standard(32);
        c.s = 4.0;
        match c.validate() {
            Err(Error::Config(msg)) => assert!(msg.contains("must exceed 4.5"), "{msg}"),
            other => panic!("expected config rejection, got {other:?}"),
        }
    }

    #[test]
    fn config_rejects_low_s0() {
        let mut c = SolverConfig::<f64>::standard(32);
        c.s0 = 1.2;
        match c.validate() {
            Err(Error::Config(msg)) => assert!(msg.contains("must exceed 1.5"), "{msg}"),
            other => panic!("expected config rejection, got {other:?}"),
        }
    }

    #[test]
    fn iterate_once_pure_dispersion() {
        // F = z1^2/2 has R_0 = 0, so one pass from a frozen state is the
        // exact linear dispersive evolution
        let f = airy_density();
        let trunc = 8;
        let u0 = from_fn(trunc, |x| 0.1 * x.cos() + 0.05 * (2.0 * x).sin());
        let mut config = SolverConfig::<f64>::standard(trunc);
        config.t_horizon = 0.01;
        let u_prev: Trajectory<f64> = vec![(0.0, u0.clone()), (0.01, u0.clone())];
        let traj = iterate_once(&f, &u_prev, &u0, &config).unwrap();
        let (t_end, u_end) = traj.last().unwrap();
        // u_t = -u_xxx: coefficient phases e^{i j^3 t}
        let mut worst: f64 = 0.0;
        for (j, c) in u0.modes() {
            let phase = (j as f64).powi(3) * t_end;
            let want = c * crate::scalar::cx(phase.cos(), phase.sin());
            worst = worst.max((u_end.coeff(j) - want).norm());
        }
        assert!(worst < 1e-9, "dispersive phase error {worst}");
    }

    #[test]
    fn solve_zero_initial_datum() {
        let f = kdv_density::<f64>();
        let config = SolverConfig::<f64>::standard(16);
        let u0 = GridFunction::<f64>::zero(16);
        let (traj, ledger) = solve(&f, &u0, &config).unwrap();
        assert!(ledger.converged);
        assert_eq!(ledger.rows.len(), 1);
        for (_, u) in &traj {
            assert_eq!(u.sobolev_norm(SobolevIndex(0.0)), 0.0);
        }
    }

    #[test]
    fn solve_kdv_geometric_decay() {
        let f = kdv_density::<f64>();
        let trunc = 32;
        let u0 = from_fn(trunc, |x| 0.1 * x.cos());
        let mut config = SolverConfig::<f64>::standard(trunc);
        config.t_horizon = 0.01;
        config.tol = 1e-11;
        let (_, ledger) = solve(&f, &u0, &config).unwrap();
        assert!(ledger.converged, "ledger: {}", ledger.to_text());
        assert!(ledger.rows.len() <= 12);
        let diffs: Vec<f64> = ledger.rows.iter().map(|r| r.diff_hs0).collect();
        for m in 3..diffs.len() {
            let ratio = diffs[m] / diffs[m - 1];
            assert!(ratio <= 0.75, "ratio {ratio} at m={} ({diffs:?})", m + 1);
        }
    }

    #[test]
    fn converged_iterate_is_a_fixed_point() {
        let f = quasilinear_density::<f64>();
        let trunc = 24;
        let u0 = from_fn(trunc, |x| 0.1 * x.cos());
        let mut config = SolverConfig::<f64>::standard(trunc);
        config.t_horizon = 0.005;
        config.tol = 1e-11;
        let (traj, ledger) = solve(&f, &u0, &config).unwrap();
        assert!(ledger.converged);
        let re = iterate_once(&f, &traj, &u0, &config).unwrap();
        let drift = sup_diff(&re, &traj, SobolevIndex(config.s0));
        assert!(drift < 1e-9, "re-solve drift {drift}");
    }

    #[test]
    fn solution_satisfies_the_equation() {
        // central time differences of the converged trajectory against the
        // full nonlinear right-hand side
        let f = kdv_density::<f64>();
        let trunc = 24;
        let u0 = from_fn(trunc, |x| 0.1 * x.cos());
        let mut config = SolverConfig::<f64>::standard(trunc);
        config.t_horizon = 0.005;
        config.tol = 1e-11;
        let (traj, _) = solve(&f, &u0, &config).unwrap();
        let sm3 = SobolevIndex(config.s - 3.0);
        let mut worst: f64 = 0.0;
        for i in (1..traj.len() - 1).step_by((traj.len() / 8).max(1)) {
            let dt = traj[i + 1].0 - traj[i - 1].0;
            let fd = traj[i + 1].1.sub(&traj[i - 1].1).scale(crate::scalar::cx(1.0 / dt, 0.0));
            let rhs = nonlinear_rhs(&f, &traj[i].1).unwrap();
            worst = worst.max(fd.sub(&rhs).sobolev_norm(sm3));
        }
        assert!(worst < 1e-5, "equation residual {worst}");
    }

    #[test]
    fn oracle_matches_dispersive_phases_in_linear_regime() {
        let f = kdv_density::<f64>();
        let trunc = 16;
        let amp = 1e-6;
        let u0 = from_fn(trunc, |x| amp * x.cos() + 0.5 * amp * (3.0 * x).sin());
        let t_end = 0.01;
        let traj = oracle_solve(&f, &u0, 32, t_end, 1e-5).unwrap();
        let (tf, uf) = traj.last().unwrap();
        let mut worst: f64 = 0.0;
        for (j, c) in u0.modes() {
            let phase = (j as f64).powi(3) * tf;
            let want = c * crate::scalar::cx(phase.cos(), phase.sin());
            worst = worst.max((uf.coeff(j) - want).norm());
        }
        assert!(worst < 1e-8 * amp, "phase error {worst}");
    }

    #[test]
    fn oracle_conserves_hamiltonian_and_mean() {
        use crate::hamiltonian::hamiltonian_value;
        let f = kdv_density::<f64>();
        let u0 = from_fn(32, |x| 0.1 * x.cos());
        let traj = oracle_solve(&f, &u0, 64, 0.005, 2e-6).unwrap();
        let h0 = hamiltonian_value(&f, &traj[0].1).unwrap();
        for (_, u) in &traj {
            let hv = hamiltonian_value(&f, u).unwrap();
            assert!(((hv - h0) / h0).abs() <= 1e-6, "drift {}", (hv - h0) / h0);
            // the representation stores no zero mode: the mean is exactly 0
            assert_eq!(u.coeff(0), crate::scalar::cx(0.0, 0.0));
        }
    }

    #[test]
    fn oracle_rejects_large_step() {
        let f = kdv_density::<f64>();
        let u0 = from_fn(16, |x| 0.1 * x.cos());
        match oracle_solve(&f, &u0, 32, 0.01, 1e-3) {
            Err(Error::Cfl { h, suggested }) => {
                assert_eq!(h, 1e-3);
                assert!(suggested < 1e-3);
            }
            other => panic!("expected CFL rejection, got {other:?}"),
        }
    }

    #[test]
    fn scheme_agrees_with_oracle() {
        let f = kdv_density::<f64>();
        let trunc = 24;
        let u0 = from_fn(trunc, |x| 0.1 * x.cos());
        let mut config = SolverConfig::<f64>::standard(trunc);
        config.t_horizon = 0.005;
        config.tol = 1e-11;
        let (traj, ledger) = solve(&f, &u0, &config).unwrap();
        assert!(ledger.converged);
        let t_end = ledger.t_final;
        let oracle = oracle_solve(&f, &u0, 2 * trunc, t_end, 5e-6).unwrap();
        let u_solve = &traj.last().unwrap().1;
        let u_oracle = oracle.last().unwrap().1.retrunc(trunc);
        let s0 = SobolevIndex(config.s0);
        let rel = u_solve.sub(&u_oracle).sobolev_norm(s0) / u0.sobolev_norm(s0);
        assert!(rel <= 1e-4, "relative disagreement {rel}");
    }

    #[test]
    fn continuity_probe_decreases_with_delta() {
        let f = kdv_density::<f64>();
        let trunc = 16;
        let u0 = from_fn(trunc, |x| 0.1 * x.cos());
        let mut config = SolverConfig::<f64>::standard(trunc);
        config.t_horizon = 0.002;
        config.tol = 1e-11;
        let report = continuity_probe(&f, &u0, &[1e-2, 1e-3], &config, 77).unwrap();
        assert_eq!(report.rows.len(), 2);
        assert!(report.rows[1].diff_hs0 < report.rows[0].diff_hs0);
        assert!(report.rows[1].diff_hs < report.rows[0].diff_hs);
        // roughly linear in delta at the lower norm
        let rate = report.rows[0].diff_hs0 / report.rows[1].diff_hs0;
        assert!(rate > 3.0 && rate < 30.0, "rate per decade {rate}");
    }
}
