//! Sectioned "key = value" experiment configuration for the command-line
//! harness. Unknown keys and duplicate keys are hard errors so that typos
//! cannot silently fall back to defaults.

use crate::error::{Error, Result};
use crate::grid::{analyze, GridFunction};
use crate::hamiltonian::{kdv_density, quasilinear_density, HamiltonianDensity, Monomial};
use crate::solver::SolverConfig;
use std::collections::HashSet;

#[derive(Debug, Clone)]
pub enum InitialData {
    /// amplitude * cos(mode x)
    Cosine { amplitude: f64, mode: i64 },
    /// amplitude * (cos x + 0.7 sin 2x)
    Mixed { amplitude: f64 },
    /// Seeded random real zero-mean profile with the given spectral decay.
    Random { decay: f64, scale: f64 },
}

impl InitialData {
    pub fn build(&self, trunc: usize, seed: u64) -> Result<GridFunction<f64>> {
        match *self {
            InitialData::Cosine { amplitude, mode } => {
                if mode == 0 || mode.unsigned_abs() as usize > trunc {
                    return Err(Error::Config(format!(
                        "initial mode {mode} outside the band 1..{trunc}"
                    )));
                }
                sampled(trunc, |x| amplitude * (mode as f64 * x).cos())
            }
            InitialData::Mixed { amplitude } => {
                if trunc < 2 {
                    return Err(Error::Config(
                        "mixed profile needs truncation at least 2".into(),
                    ));
                }
                sampled(trunc, |x| amplitude * (x.cos() + 0.7 * (2.0 * x).sin()))
            }
            InitialData::Random { decay, scale } => {
                use rand::SeedableRng;
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
                Ok(GridFunction::random_real(trunc, decay, scale, &mut rng))
            }
        }
    }
}

fn sampled<F: Fn(f64) -> f64>(trunc: usize, f: F) -> Result<GridFunction<f64>> {
    let n = (8 * (trunc + 1)).next_power_of_two();
    let samples: Vec<f64> = (0..n)
        .map(|k| f(2.0 * std::f64::consts::PI * k as f64 / n as f64))
        .collect();
    analyze(&samples, trunc)
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub density: HamiltonianDensity<f64>,
    pub initial: InitialData,
    pub solver: SolverConfig<f64>,
    /// Truncation of the independent direct integration in `compare`.
    pub oracle_trunc: Option<usize>,
    /// Step of the direct integration; None selects 0.5x the CFL cap.
    pub oracle_step: Option<f64>,
    /// Perturbation sizes for the continuity probe.
    pub deltas: Vec<f64>,
}

impl ExperimentConfig {
    pub fn standard() -> Self {
        ExperimentConfig {
            density: kdv_density(),
            initial: InitialData::Cosine {
                amplitude: 0.1,
                mode: 1,
            },
            solver: SolverConfig::standard(32),
            oracle_trunc: None,
            oracle_step: None,
            deltas: vec![1e-2, 1e-3, 1e-4],
        }
    }
}

fn parse_f64(key: &str, v: &str) -> Result<f64> {
    v.parse()
        .map_err(|e| Error::Config(format!("key {key}: bad number {v:?}: {e}")))
}

fn parse_usize(key: &str, v: &str) -> Result<usize> {
    v.parse()
        .map_err(|e| Error::Config(format!("key {key}: bad integer {v:?}: {e}")))
}

fn parse_density(v: &str) -> Result<HamiltonianDensity<f64>> {
    match v {
        "kdv" => Ok(kdv_density()),
        "quasilinear" => Ok(quasilinear_density()),
        custom => {
            // inline monomials "c p q k_cos k_sin; c p q k_cos k_sin; ..."
            let mut monomials = Vec::new();
            for chunk in custom.split(';') {
                let parts: Vec<&str> = chunk.split_whitespace().collect();
                if parts.len() != 5 {
                    return Err(Error::Config(format!(
                        "density must be kdv, quasilinear, or semicolon-separated \
                         monomials \"c p q k_cos k_sin\"; got chunk {chunk:?}"
                    )));
                }
                monomials.push(Monomial {
                    c: parse_f64("model.density", parts[0])?,
                    p: parts[1].parse().map_err(|e| {
                        Error::Config(format!("density z0 power {:?}: {e}", parts[1]))
                    })?,
                    q: parts[2].parse().map_err(|e| {
                        Error::Config(format!("density z1 power {:?}: {e}", parts[2]))
                    })?,
                    k_cos: parts[3].parse().map_err(|e| {
                        Error::Config(format!("density cosine frequency {:?}: {e}", parts[3]))
                    })?,
                    k_sin: parts[4].parse().map_err(|e| {
                        Error::Config(format!("density sine frequency {:?}: {e}", parts[4]))
                    })?,
                });
            }
            crate::hamiltonian::build_density(monomials)
                .map_err(|e| Error::Config(format!("bad custom density: {e}")))
        }
    }
}

/// Parse a sectioned "key = value" configuration. Lines starting with '#'
/// are comments; sections are "[model]", "[initial]", "[solver]",
/// "[compare]", "[continuity]". Every key must be known to its section and
/// may appear at most once.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::standard();
    let mut section = String::new();
    let mut seen: HashSet<String> = HashSet::new();
    // initial-data fields are assembled after the scan
    let mut profile: Option<String> = None;
    let mut amplitude: Option<f64> = None;
    let mut mode: Option<i64> = None;
    let mut decay: Option<f64> = None;
    let mut scale: Option<f64> = None;

    for (lineno, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(i) => &raw[..i],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| Error::Config(format!("line {}: malformed section header {line:?}", lineno + 1)))?
                .trim();
            match name {
                "model" | "initial" | "solver" | "compare" | "continuity" => {
                    section = name.to_string();
                }
                other => {
                    return Err(Error::Config(format!(
                        "line {}: unknown section [{other}]",
                        lineno + 1
                    )))
                }
            }
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::Config(format!("line {}: expected \"key = value\", got {line:?}", lineno + 1))
        })?;
        let key = key.trim();
        let value = value.trim();
        if section.is_empty() {
            return Err(Error::Config(format!(
                "line {}: key {key:?} appears before any section header",
                lineno + 1
            )));
        }
        let full = format!("{section}.{key}");
        if !seen.insert(full.clone()) {
            return Err(Error::Config(format!(
                "line {}: duplicate key {full}",
                lineno + 1
            )));
        }
        match full.as_str() {
            "model.density" => cfg.density = parse_density(value)?,
            "initial.profile" => profile = Some(value.to_string()),
            "initial.amplitude" => amplitude = Some(parse_f64(&full, value)?),
            "initial.mode" => {
                mode = Some(value.parse().map_err(|e| {
                    Error::Config(format!("key {full}: bad integer {value:?}: {e}"))
                })?)
            }
            "initial.decay" => decay = Some(parse_f64(&full, value)?),
            "initial.scale" => scale = Some(parse_f64(&full, value)?),
            "solver.trunc" => cfg.solver.trunc = parse_usize(&full, value)?,
            "solver.s0" => cfg.solver.s0 = parse_f64(&full, value)?,
            "solver.s" => cfg.solver.s = parse_f64(&full, value)?,
            "solver.sigma" => cfg.solver.sigma = parse_f64(&full, value)?,
            "solver.eps_para" => cfg.solver.eps_para = parse_f64(&full, value)?,
            "solver.eps_mollify" => {
                cfg.solver.eps_mollify = if value == "auto" {
                    None
                } else {
                    Some(parse_f64(&full, value)?)
                }
            }
            "solver.t_horizon" => cfg.solver.t_horizon = parse_f64(&full, value)?,
            "solver.step" => {
                cfg.solver.step = if value == "auto" {
                    None
                } else {
                    Some(parse_f64(&full, value)?)
                }
            }
            "solver.max_iterations" => cfg.solver.max_iterations = parse_usize(&full, value)?,
            "solver.tol" => cfg.solver.tol = parse_f64(&full, value)?,
            "solver.max_retries" => cfg.solver.max_retries = parse_usize(&full, value)?,
            "compare.oracle_trunc" => cfg.oracle_trunc = Some(parse_usize(&full, value)?),
            "compare.oracle_step" => {
                cfg.oracle_step = if value == "auto" {
                    None
                } else {
                    Some(parse_f64(&full, value)?)
                }
            }
            "continuity.deltas" => {
                cfg.deltas = value
                    .split_whitespace()
                    .map(|d| parse_f64(&full, d))
                    .collect::<Result<Vec<f64>>>()?;
                if cfg.deltas.is_empty() {
                    return Err(Error::Config("continuity.deltas is empty".into()));
                }
            }
            other => {
                return Err(Error::Config(format!(
                    "line {}: unknown key {other}",
                    lineno + 1
                )))
            }
        }
    }

    match profile.as_deref() {
        None | Some("cosine") => {
            if decay.is_some() || scale.is_some() {
                return Err(Error::Config(
                    "decay/scale only apply to the random profile".into(),
                ));
            }
            cfg.initial = InitialData::Cosine {
                amplitude: amplitude.unwrap_or(0.1),
                mode: mode.unwrap_or(1),
            };
        }
        Some("mixed") => {
            if mode.is_some() || decay.is_some() || scale.is_some() {
                return Err(Error::Config(
                    "mixed profile only accepts an amplitude".into(),
                ));
            }
            cfg.initial = InitialData::Mixed {
                amplitude: amplitude.unwrap_or(0.1),
            };
        }
        Some("random") => {
            if amplitude.is_some() || mode.is_some() {
                return Err(Error::Config(
                    "random profile accepts decay and scale, not amplitude/mode".into(),
                ));
            }
            cfg.initial = InitialData::Random {
                decay: decay.unwrap_or(3.0),
                scale: scale.unwrap_or(0.1),
            };
        }
        Some(other) => {
            return Err(Error::Config(format!(
                "unknown initial profile {other:?} (cosine, mixed, random)"
            )))
        }
    }

    cfg.solver.validate()?;
    if let Some(jh) = cfg.oracle_trunc {
        if jh < cfg.solver.trunc {
            return Err(Error::Config(format!(
                "oracle truncation {jh} below solver truncation {}",
                cfg.solver.trunc
            )));
        }
    }
    for &d in &cfg.deltas {
        if !(d > 0.0) {
            return Err(Error::Config(format!(
                "continuity perturbation sizes must be positive, got {d}"
            )));
        }
    }
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    const GOOD: &str = "\
[model]
density = quasilinear

[initial]
profile = cosine
amplitude = 0.05   # small datum
mode = 1

[solver]
trunc = 24
s = 4.7
t_horizon = 0.005

[compare]
oracle_trunc = 48

[continuity]
deltas = 1e-2 1e-3
";

    #[test]
    fn parses_complete_config() {
        let cfg = parse_config(GOOD).unwrap();
        assert_eq!(cfg.solver.trunc, 24);
        assert_eq!(cfg.solver.s, 4.7);
        assert_eq!(cfg.solver.t_horizon, 0.005);
        assert_eq!(cfg.oracle_trunc, Some(48));
        assert_eq!(cfg.deltas, vec![1e-2, 1e-3]);
        match cfg.initial {
            InitialData::Cosine { amplitude, mode } => {
                assert_eq!(amplitude, 0.05);
                assert_eq!(mode, 1);
            }
            other => panic!("wrong profile: {other:?}"),
        }
        assert_eq!(cfg.density.monomials().len(), 2);
    }

    #[test]
    fn rejects_unknown_key() {
        let bad = "[solver]\ntrunc = 24\nspeed = 9\n";
        match parse_config(bad) {
            Err(Error::Config(msg)) => assert!(msg.contains("unknown key"), "{msg}"),
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_duplicate_key() {
        let bad = "[solver]\ntrunc = 24\ntrunc = 32\n";
        match parse_config(bad) {
            Err(Error::Config(msg)) => assert!(msg.contains("duplicate key"), "{msg}"),
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_low_regularity() {
        let bad = "[solver]\ns = 4.0\n";
        match parse_config(bad) {
            Err(Error::Config(msg)) => assert!(msg.contains("must exceed 4.5"), "{msg}"),
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_key_outside_section() {
        let bad = "trunc = 24\n";
        assert!(matches!(parse_config(bad), Err(Error::Config(_))));
    }

    #[test]
    fn custom_density_round_trip() {
        let text = "[model]\ndensity = 0.5 0 2 0 0; -0.25 2 2 0 0\n";
        let cfg = parse_config(text).unwrap();
        assert_eq!(cfg.density.monomials().len(), 2);
        assert_eq!(cfg.density.monomials()[1].p, 2);
    }

    #[test]
    fn initial_data_builders() {
        let u = InitialData::Cosine {
            amplitude: 0.2,
            mode: 2,
        }
        .build(8, 0)
        .unwrap();
        assert!((u.coeff(2).re - 0.1).abs() < 1e-13);
        let v = InitialData::Mixed { amplitude: 0.2 }.build(8, 0).unwrap();
        assert!((v.coeff(1).re - 0.1).abs() < 1e-13);
        assert!((v.coeff(2).im + 0.07).abs() < 1e-13);
        let w1 = InitialData::Random {
            decay: 3.0,
            scale: 0.1,
        }
        .build(8, 42)
        .unwrap();
        let w2 = InitialData::Random {
            decay: 3.0,
            scale: 0.1,
        }
        .build(8, 42)
        .unwrap();
        assert_eq!(w1.coeff(3), w2.coeff(3));
    }
}
