//! `dplab` command line: subcommand dispatch, config resolution
//! (flags > config file > defaults), CSV/JSON outputs and a run manifest.

use std::collections::{BTreeMap, HashMap};
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::error::Error;
use crate::evolution::{self, rhs_hamiltonian, rhs_weak, EvolveConfig};
use crate::io::{csv_table, field_to_bytes, field_to_csv};
use crate::linops::{
    assemble_lc, constrained_coercivity, convexity_dsdc, expansion_check, resolvent_g, spectrum_report,
};
use crate::profile::{build_profile, closed_form_checks, residual_travel_ode, WaveParams, DEFAULT_TOL};
use crate::spectral::{functional_s, random_band_limited, Field, Grid};
use crate::stability::{
    apriori_linfty_check, make_perturbed_initial, orbital_distance, stability_sweep, Perturbation, Shape,
    SweepConfig,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_VIOLATION: i32 = 2;

const PROFILE_RESIDUAL_TOL: f64 = 1e-6;
const CLOSED_FORM_TOL: f64 = 1e-6;
const IDENTITY_TOL: f64 = 1e-10;
const UXU_TOL: f64 = 1e-8;

#[derive(Parser, Debug)]
#[command(name = "dplab", version, about = "Degasperis-Procesi solitary-wave lab")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Default)]
struct Common {
    /// wave speed
    #[arg(long)]
    c: Option<f64>,
    /// dispersion parameter
    #[arg(long)]
    k: Option<f64>,
    /// grid points (even)
    #[arg(long = "N")]
    n: Option<usize>,
    /// half period of the domain [-L, L)
    #[arg(long = "L")]
    l: Option<f64>,
    /// output directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// flat key=value file supplying defaults for any flag
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Default)]
struct Integrator {
    #[arg(long)]
    tend: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long = "sample-every")]
    sample_every: Option<usize>,
    #[arg(long)]
    cfl: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solitary-wave profile and its companion fields
    Profile {
        #[command(flatten)]
        common: Common,
    },
    /// Evolve the wave, optionally perturbed
    Evolve {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        integ: Integrator,
        /// perturbation size (discrete H^3 norm)
        #[arg(long)]
        delta: Option<f64>,
        /// gaussian | random[:SEED] | kernel
        #[arg(long)]
        shape: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        /// write a field snapshot every this many samples (0: first and last only)
        #[arg(long = "snapshot-every")]
        snapshot_every: Option<usize>,
    },
    /// Eigenvalues of the linearized operator
    Spectrum {
        #[command(flatten)]
        common: Common,
    },
    /// Constrained coercivity constant and g(0)
    Coercivity {
        #[command(flatten)]
        common: Common,
    },
    /// S(phi_c) and dS/dc over a list of speeds
    Convexity {
        #[command(flatten)]
        common: Common,
        /// comma separated speeds
        #[arg(long)]
        cs: Option<String>,
    },
    /// Orbital-stability sweep over perturbation sizes
    StabilitySweep {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        integ: Integrator,
        /// comma separated perturbation sizes
        #[arg(long)]
        deltas: Option<String>,
        #[arg(long)]
        shape: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        /// cubic constant of the certificate
        #[arg(long)]
        beta: Option<f64>,
        /// override the measured coercivity constant
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Run the identity and closed-form checks
    CheckIdentities {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        seed: Option<u64>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Profile { .. } => "profile",
            Command::Evolve { .. } => "evolve",
            Command::Spectrum { .. } => "spectrum",
            Command::Coercivity { .. } => "coercivity",
            Command::Convexity { .. } => "convexity",
            Command::StabilitySweep { .. } => "stability-sweep",
            Command::CheckIdentities { .. } => "check-identities",
        }
    }

    fn common(&self) -> &Common {
        match self {
            Command::Profile { common }
            | Command::Evolve { common, .. }
            | Command::Spectrum { common }
            | Command::Coercivity { common }
            | Command::Convexity { common, .. }
            | Command::StabilitySweep { common, .. }
            | Command::CheckIdentities { common, .. } => common,
        }
    }
}

/// Failure classes mapped onto exit codes.
#[derive(Debug)]
struct Violation(String);

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Violation {}

const CONFIG_KEYS: &[&str] = &[
    "c",
    "k",
    "N",
    "L",
    "out",
    "tend",
    "dt",
    "sample_every",
    "cfl",
    "delta",
    "deltas",
    "shape",
    "seed",
    "beta",
    "alpha",
    "threads",
    "cs",
    "snapshot_every",
];

/// Parse the flat `key = value` format; `#` starts a comment.
pub fn parse_config(text: &str) -> anyhow::Result<HashMap<String, String>> {
    let mut map = HashMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| anyhow!("config line {}: expected key = value", i + 1))?;
        let key = key.trim().replace('-', "_");
        if !CONFIG_KEYS.contains(&key.as_str()) {
            bail!("config line {}: unknown key `{key}`", i + 1);
        }
        map.insert(key, value.trim().to_string());
    }
    Ok(map)
}

struct Resolver {
    file: HashMap<String, String>,
    resolved: BTreeMap<String, Value>,
}

impl Resolver {
    fn new(common: &Common) -> anyhow::Result<Self> {
        let file = match &common.config {
            Some(path) => parse_config(
                &fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?,
            )?,
            None => HashMap::new(),
        };
        Ok(Self {
            file,
            resolved: BTreeMap::new(),
        })
    }

    fn get<T>(&mut self, key: &str, flag: Option<T>, default: T) -> anyhow::Result<T>
    where
        T: FromStr + Serialize,
        T::Err: std::fmt::Display,
    {
        let value = match flag {
            Some(v) => v,
            None => match self.file.get(key) {
                Some(s) => s
                    .parse()
                    .map_err(|e| anyhow!("config value for `{key}` ({s}): {e}"))?,
                None => default,
            },
        };
        self.resolved.insert(key.to_string(), serde_json::to_value(&value)?);
        Ok(value)
    }

    fn list(&mut self, key: &str, flag: Option<String>, default: &str) -> anyhow::Result<Vec<f64>> {
        let raw = self.get(key, flag, default.to_string())?;
        let values: Vec<f64> = raw
            .split(',')
            .map(|s| s.trim().parse::<f64>().map_err(|e| anyhow!("`{key}` entry `{s}`: {e}")))
            .collect::<anyhow::Result<_>>()?;
        self.resolved.insert(key.to_string(), json!(values));
        Ok(values)
    }
}

struct Outputs {
    dir: PathBuf,
    hashes: BTreeMap<String, String>,
}

impl Outputs {
    fn new(dir: &Path) -> anyhow::Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            hashes: BTreeMap::new(),
        })
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> anyhow::Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        self.hashes.insert(name.to_string(), hex::encode(Sha256::digest(bytes)));
        Ok(())
    }

    fn json(&mut self, name: &str, value: &impl Serialize) -> anyhow::Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }
}

fn params(r: &mut Resolver, common: &Common) -> anyhow::Result<WaveParams> {
    let c = r.get("c", common.c, 3.0)?;
    let k = r.get("k", common.k, 1.0)?;
    Ok(WaveParams::new(c, k)?)
}

fn grid(r: &mut Resolver, common: &Common, n: usize, l: f64) -> anyhow::Result<Grid> {
    let n = r.get("N", common.n, n)?;
    let l = r.get("L", common.l, l)?;
    Ok(Grid::new(l, n)?)
}

fn shape(r: &mut Resolver, name: Option<String>, seed: Option<u64>) -> anyhow::Result<Shape> {
    let name = r.get("shape", name, "gaussian".to_string())?;
    let seed = r.get("seed", seed, 0u64)?;
    if name == "random" {
        return Ok(Shape::Random(seed));
    }
    Ok(name.parse()?)
}

fn evolve_config(r: &mut Resolver, integ: &Integrator, t_end: f64) -> anyhow::Result<EvolveConfig> {
    let d = EvolveConfig::default();
    let cfg = EvolveConfig {
        t_end: r.get("tend", integ.tend, t_end)?,
        dt: r.get("dt", integ.dt, d.dt)?,
        sample_every: r.get("sample_every", integ.sample_every, d.sample_every)?,
        cfl: r.get("cfl", integ.cfl, d.cfl)?,
        breaking_threshold: d.breaking_threshold,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn run_profile(r: &mut Resolver, out: &mut Outputs, common: &Common) -> anyhow::Result<Vec<String>> {
    let p = params(r, common)?;
    let g = grid(r, common, 4096, 64.0)?;
    let w = build_profile(&p, &g, DEFAULT_TOL)?;
    let residual = residual_travel_ode(&w);
    let cf = closed_form_checks(&w);
    out.write(
        "profile.csv",
        csv_table(
            &["x", "phi", "phi_x", "rho", "psi_tilde", "w"],
            &[
                &g.points(),
                w.phi.values(),
                w.phi_x.values(),
                w.rho.values(),
                w.psi_tilde.values(),
                w.w_profile.values(),
            ],
        )
        .as_bytes(),
    )?;
    out.write("phi.bin", &field_to_bytes(&w.phi))?;
    out.json(
        "profile.json",
        &json!({
            "c": p.c(), "k": p.k(), "N": g.len(), "L": g.half_length(),
            "max_height": w.max_height, "decay_rate": w.decay_rate, "residual": residual,
            "closed_form": cf,
        }),
    )?;
    let mut failures = Vec::new();
    if !(residual <= PROFILE_RESIDUAL_TOL) {
        failures.push(format!("profile residual {residual:e} exceeds {PROFILE_RESIDUAL_TOL:e}"));
    }
    if !(cf.max() <= CLOSED_FORM_TOL) {
        failures.push(format!("closed-form deviation {:e} exceeds {CLOSED_FORM_TOL:e}", cf.max()));
    }
    Ok(failures)
}

#[allow(clippy::too_many_arguments)]
fn run_evolve(
    r: &mut Resolver,
    out: &mut Outputs,
    common: &Common,
    integ: &Integrator,
    delta: Option<f64>,
    shape_name: Option<String>,
    seed: Option<u64>,
    snapshot_every: Option<usize>,
) -> anyhow::Result<Vec<String>> {
    let p = params(r, common)?;
    let g = grid(r, common, 1024, 64.0)?;
    let cfg = evolve_config(r, integ, 10.0)?;
    let delta = r.get("delta", delta, 0.0)?;
    let shape = shape(r, shape_name, seed)?;
    let snapshot_every = r.get("snapshot_every", snapshot_every, 0usize)?;
    let w = build_profile(&p, &g, DEFAULT_TOL)?;
    let u0 = make_perturbed_initial(&w, &Perturbation::new(delta, shape))?.u0;
    let bound = evolution::linf_bound(&u0, p.k());

    let mut snapshots: Vec<(usize, f64, Field)> = Vec::new();
    let mut index = 0usize;
    let state = evolution::run_observed(u0, p.k(), &cfg, |st| {
        if snapshot_every > 0 && index.is_multiple_of(snapshot_every) {
            snapshots.push((index, st.t, st.u.clone()));
        } else if index == 0 {
            snapshots.push((0, st.t, st.u.clone()));
        }
        index += 1;
    })?;
    let last = index - 1;
    if snapshots.last().map(|s| s.0) != Some(last) {
        snapshots.push((last, state.t, state.u.clone()));
    }
    for (i, _, u) in &snapshots {
        out.write(&format!("snapshot_{i:06}.csv"), field_to_csv(u).as_bytes())?;
    }
    let h = &state.history;
    let col = |f: fn(&evolution::HistoryRecord) -> f64| h.iter().map(f).collect::<Vec<_>>();
    out.write(
        "history.csv",
        csv_table(
            &["t", "S", "H", "min_w", "uxu_slack", "linf_u"],
            &[
                &col(|r| r.t),
                &col(|r| r.s),
                &col(|r| r.h),
                &col(|r| r.min_w),
                &col(|r| r.uxu_slack),
                &col(|r| r.linf_u),
            ],
        )
        .as_bytes(),
    )?;
    let (ds, dh) = state.max_relative_drift();
    let min_w = h.iter().map(|r| r.min_w).fold(f64::INFINITY, f64::min);
    let uxu = h
        .iter()
        .map(|r| r.uxu_slack / (r.linf_u + 2.0 * p.k() / 3.0))
        .fold(f64::INFINITY, f64::min);
    let linf_slack = h.iter().map(|r| bound - r.linf_u).fold(f64::INFINITY, f64::min);
    let od = orbital_distance(&state.u, &w)?;
    out.json(
        "summary.json",
        &json!({
            "t_final": state.t, "samples": h.len(), "snapshots": snapshots.iter().map(|s| s.1).collect::<Vec<_>>(),
            "max_S_drift": ds, "max_H_drift": dh, "min_w": min_w, "min_uxu_slack_relative": uxu,
            "min_linf_bound_slack": linf_slack, "final_orbital": od,
            "breaking_suspected": state.flags.breaking_suspected, "halted": state.flags.halted,
        }),
    )?;
    let mut failures = Vec::new();
    if state.flags.halted {
        failures.push(format!("solution became non-finite before t = {}", cfg.t_end));
    }
    if !(min_w > 0.0) {
        failures.push(format!("momentum positivity lost: min w = {min_w:e}"));
    }
    if !(uxu >= -UXU_TOL) {
        failures.push(format!("|u_x| <= u + 2k/3 violated, relative slack {uxu:e}"));
    }
    if !(linf_slack >= 0.0) {
        failures.push(format!("a priori sup-norm bound violated by {:e}", -linf_slack));
    }
    Ok(failures)
}

fn run_spectrum(r: &mut Resolver, out: &mut Outputs, common: &Common) -> anyhow::Result<Vec<String>> {
    let p = params(r, common)?;
    let g = grid(r, common, 1024, 64.0)?;
    let w = build_profile(&p, &g, DEFAULT_TOL)?;
    let a = assemble_lc(&w);
    let rep = spectrum_report(&a, &w);
    let idx: Vec<f64> = (0..rep.eigenvalues.len()).map(|i| i as f64).collect();
    out.write("eigenvalues.csv", csv_table(&["index", "lambda"], &[&idx, &rep.eigenvalues]).as_bytes())?;
    out.write("ground_state.csv", field_to_csv(&rep.ground_vector).as_bytes())?;
    out.json(
        "spectrum.json",
        &json!({
            "c": rep.c, "k": rep.k, "N": rep.n, "L": rep.half_length,
            "lambda_star": rep.lambda_star, "zero_eig": rep.zero_eigenvalue,
            "zero_cosine": rep.zero_vector_correlation, "positive_gap": rep.positive_gap,
            "essential_edge_estimate": rep.essential_edge_estimate, "continuum_edge": rep.continuum_edge,
            "negative_count": rep.negative_count, "zero_count": rep.zero_count,
            "thresholds": rep.thresholds, "classified": rep.classified, "issues": rep.issues,
        }),
    )?;
    Ok(rep.issues)
}

fn run_coercivity(r: &mut Resolver, out: &mut Outputs, common: &Common) -> anyhow::Result<Vec<String>> {
    let p = params(r, common)?;
    let g = grid(r, common, 1024, 64.0)?;
    let w = build_profile(&p, &g, DEFAULT_TOL)?;
    let a = assemble_lc(&w);
    let rep = spectrum_report(&a, &w);
    let alpha = constrained_coercivity(&a, &w);
    let g0 = resolvent_g(&a, &w, 0.0)?;
    let dsdc = convexity_dsdc(p.k(), &[p.c()], &g)?[0].dsdc;
    out.json(
        "coercivity.json",
        &json!({
            "c": p.c(), "k": p.k(), "N": g.len(), "L": g.half_length(),
            "lambda_star": rep.lambda_star, "zero_eig": rep.zero_eigenvalue,
            "zero_cosine": rep.zero_vector_correlation, "positive_gap": rep.positive_gap,
            "alpha": alpha, "g0": g0, "dSdc": dsdc,
            "g0_relative_mismatch": (-g0 - dsdc).abs() / dsdc.abs(),
        }),
    )?;
    let mut failures = Vec::new();
    if !(alpha > 0.0) {
        failures.push(format!("constrained coercivity constant {alpha:e} is not positive"));
    }
    if !(g0 < 0.0) {
        failures.push(format!("g(0) = {g0:e} is not negative"));
    }
    Ok(failures)
}

fn run_convexity(
    r: &mut Resolver,
    out: &mut Outputs,
    common: &Common,
    cs: Option<String>,
) -> anyhow::Result<Vec<String>> {
    let k = r.get("k", common.k, 1.0)?;
    let cs = r.list("cs", cs, "2.5,3,4,6,10")?;
    let g = grid(r, common, 2048, 64.0)?;
    let points = convexity_dsdc(k, &cs, &g)?;
    let col = |f: fn(&crate::linops::ConvexityPoint) -> f64| points.iter().map(f).collect::<Vec<_>>();
    out.write(
        "convexity.csv",
        csv_table(&["c", "S", "dSdc"], &[&col(|p| p.c), &col(|p| p.s), &col(|p| p.dsdc)]).as_bytes(),
    )?;
    out.json("convexity.json", &json!({ "k": k, "N": g.len(), "L": g.half_length(), "points": points }))?;
    Ok(points
        .iter()
        .filter(|p| !(p.dsdc > 0.0))
        .map(|p| format!("dS/dc = {:e} at c = {} is not positive", p.dsdc, p.c))
        .collect())
}

#[allow(clippy::too_many_arguments)]
fn run_sweep(
    r: &mut Resolver,
    out: &mut Outputs,
    common: &Common,
    integ: &Integrator,
    deltas: Option<String>,
    shape_name: Option<String>,
    seed: Option<u64>,
    beta: Option<f64>,
    alpha: Option<f64>,
    threads: Option<usize>,
) -> anyhow::Result<Vec<String>> {
    let p = params(r, common)?;
    let g = grid(r, common, 1024, 64.0)?;
    let evolve = evolve_config(r, integ, 50.0)?;
    let deltas = r.list("deltas", deltas, "1e-3,3e-3,1e-2")?;
    let shape = shape(r, shape_name, seed)?;
    let beta = r.get("beta", beta, 0.0)?;
    let alpha = match alpha.or(r.file.get("alpha").map(|s| s.parse()).transpose()?) {
        Some(a) => {
            r.resolved.insert("alpha".into(), json!(a));
            Some(a)
        }
        None => {
            r.resolved.insert("alpha".into(), json!("measured"));
            None
        }
    };
    let env_threads = std::env::var(crate::stability::THREADS_ENV).ok().and_then(|v| v.parse().ok());
    let threads = match threads.or(r.file.get("threads").map(|s| s.parse()).transpose()?) {
        Some(t) => Some(t),
        None => env_threads,
    };
    r.resolved.insert("threads".into(), json!(threads));
    let w = build_profile(&p, &g, DEFAULT_TOL)?;
    let cfg = SweepConfig {
        evolve: evolve.clone(),
        shape,
        s_matched: true,
        beta,
        alpha,
        threads,
        delta1: None,
    };
    let rep = stability_sweep(&w, &deltas, evolve.t_end, &cfg)?;
    for m in &rep.members {
        let col = |f: fn(&crate::stability::Sample) -> f64| m.samples.iter().map(f).collect::<Vec<_>>();
        out.write(
            &format!("timeseries_delta_{:e}.csv", m.delta),
            csv_table(
                &["t", "d2", "dinf", "x0", "S_drift", "H_drift", "min_w", "linfty_slack", "h_norm"],
                &[
                    &col(|s| s.t),
                    &col(|s| s.d2),
                    &col(|s| s.dinf),
                    &col(|s| s.x0),
                    &col(|s| s.s_drift),
                    &col(|s| s.h_drift),
                    &col(|s| s.min_w),
                    &col(|s| s.linfty_slack),
                    &col(|s| s.h_norm),
                ],
            )
            .as_bytes(),
        )?;
    }
    out.json("summary.json", &rep)?;
    let mut failures = Vec::new();
    for m in &rep.members {
        if !(m.min_w > 0.0) {
            failures.push(format!("delta {}: momentum positivity lost", m.delta));
        }
        if !(m.min_linfty_slack >= 0.0) {
            failures.push(format!("delta {}: a priori L-infinity estimate violated", m.delta));
        }
        if !m.barrier_ok {
            failures.push(format!("delta {}: foliation remainder entered (r1, r2)", m.delta));
        }
        if m.halted {
            failures.push(format!("delta {}: solution became non-finite", m.delta));
        }
    }
    Ok(failures)
}

fn run_identities(
    r: &mut Resolver,
    out: &mut Outputs,
    common: &Common,
    seed: Option<u64>,
) -> anyhow::Result<Vec<String>> {
    let p = params(r, common)?;
    let g = grid(r, common, 4096, 64.0)?;
    let seed = r.get("seed", seed, 0u64)?;
    let w = build_profile(&p, &g, DEFAULT_TOL)?;

    let mut rhs_worst = 0.0f64;
    let mut s_bounds_ok = true;
    let mut expansion_worst = 0.0f64;
    for i in 0..20u64 {
        let f = random_band_limited(&g, 40, seed.wrapping_add(i));
        let a = rhs_weak(&f, p.k());
        let b = rhs_hamiltonian(&f, p.k());
        rhs_worst = rhs_worst.max((&a - &b).l2_norm() / a.l2_norm());
        let (s, l2) = (functional_s(&f), f.l2_norm().powi(2));
        s_bounds_ok &= l2 / 8.0 <= s * (1.0 + 1e-14) && s <= 0.5 * l2 * (1.0 + 1e-14);
        let h = &f * (1.0 / f.l2_norm());
        let e = expansion_check(&w, &h)?;
        expansion_worst = expansion_worst.max(e.defect / (1.0 + e.delta_q.abs()));
    }
    let residual = residual_travel_ode(&w);
    let cf = closed_form_checks(&w);
    let linf = apriori_linfty_check(&w.phi, &w, 0.0, p.k());
    out.json(
        "identities.json",
        &json!({
            "c": p.c(), "k": p.k(), "N": g.len(), "L": g.half_length(), "seed": seed,
            "rhs_identity_max_relative": rhs_worst, "profile_residual": residual,
            "closed_form": cf, "expansion_defect_max": expansion_worst,
            "s_bounds_hold": s_bounds_ok, "linfty_slack_at_wave": linf,
        }),
    )?;
    let mut failures = Vec::new();
    if !(rhs_worst <= IDENTITY_TOL) {
        failures.push(format!("Hamiltonian form differs from weak form by {rhs_worst:e}"));
    }
    if !(residual <= PROFILE_RESIDUAL_TOL) {
        failures.push(format!("profile residual {residual:e}"));
    }
    if !(cf.max() <= CLOSED_FORM_TOL) {
        failures.push(format!("closed-form deviation {:e}", cf.max()));
    }
    if !(expansion_worst <= 1e-8) {
        failures.push(format!("expansion defect {expansion_worst:e}"));
    }
    if !s_bounds_ok {
        failures.push("S outside [|u|^2/8, |u|^2/2]".into());
    }
    Ok(failures)
}

fn execute(cli: Cli) -> anyhow::Result<()> {
    let common = cli.command.common().clone();
    let mut r = Resolver::new(&common)?;
    let name = cli.command.name();
    let out_dir = r.get("out", common.out.clone().map(|p| p.display().to_string()), format!("dplab-{name}"))?;
    let mut out = Outputs::new(Path::new(&out_dir))?;
    let failures = match cli.command {
        Command::Profile { common } => run_profile(&mut r, &mut out, &common)?,
        Command::Evolve {
            common,
            integ,
            delta,
            shape,
            seed,
            snapshot_every,
        } => run_evolve(&mut r, &mut out, &common, &integ, delta, shape, seed, snapshot_every)?,
        Command::Spectrum { common } => run_spectrum(&mut r, &mut out, &common)?,
        Command::Coercivity { common } => run_coercivity(&mut r, &mut out, &common)?,
        Command::Convexity { common, cs } => run_convexity(&mut r, &mut out, &common, cs)?,
        Command::StabilitySweep {
            common,
            integ,
            deltas,
            shape,
            seed,
            beta,
            alpha,
            threads,
        } => run_sweep(&mut r, &mut out, &common, &integ, deltas, shape, seed, beta, alpha, threads)?,
        Command::CheckIdentities { common, seed } => run_identities(&mut r, &mut out, &common, seed)?,
    };
    let manifest = json!({
        "tool": "dplab",
        "version": env!("CARGO_PKG_VERSION"),
        "subcommand": name,
        "config": r.resolved,
        "config_file": common.config.as_ref().map(|p| p.display().to_string()),
        "outputs": out.hashes,
        "violations": failures,
    });
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    fs::write(out.dir.join("manifest.json"), text)?;
    if failures.is_empty() {
        Ok(())
    } else {
        Err(Violation(failures.join("; ")).into())
    }
}

fn exit_code(e: &anyhow::Error) -> i32 {
    if e.downcast_ref::<Violation>().is_some() {
        return EXIT_VIOLATION;
    }
    match e.downcast_ref::<Error>() {
        Some(
            Error::Classification(_)
            | Error::NearSingular { .. }
            | Error::Foliation(_)
            | Error::Quadrature(_)
            | Error::Blowup { .. }
            | Error::NonFinite { .. },
        ) => EXIT_VIOLATION,
        _ => EXIT_USAGE,
    }
}

/// Run the command line `argv` (program name first) and return the exit code.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("dplab: {e:#}");
            exit_code(&e)
        }
    }
}
