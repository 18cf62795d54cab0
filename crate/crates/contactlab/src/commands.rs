//! The `contactlab` subcommands.

use std::path::{Path, PathBuf};
use std::time::Instant;

use contactlab_core::criticality::{
    calibrate, criticality_residual, ground_transform, jump_criticality_residual, solve_ground_state, theta_kernel,
    CriticalityError, GroundState, SolverControls, TransformedModel,
};
use contactlab_core::hierarchy::{
    convergence_check_dense, convergence_check_mc, evolve, factorial_bound, poisson_initial, stationary_dense,
    stationary_pair_mc, CorrelationTensor, DivergenceDiagnostics, EvolveControls, HierarchyError, PairMcControls,
    StationaryControls,
};
use contactlab_core::model::{RateModel, StateSpace};
use contactlab_core::replicas::replica_rng;
use contactlab_core::simulator::{
    poisson_configuration, simulate_contact, simulate_moments, EventKind, SimulationControls, SimulatorError,
};
use contactlab_core::walkers::{
    convolution_bound_check, default_grid, estimate_h, estimate_h_dense, estimate_h_sufficient, heat_bound_check,
    lower_tail_bound_check, poisson_domination_check, DirectConvolution, PairEstimate, PairFunctional, PairStart,
    TransienceControls, TransienceReport, WalkerError,
};
use contactlab_core::Configuration;
use serde_json::{json, Value};

use crate::config::{Backend, ConfigError, LoadedConfig, StartConfig, VariantConfig};
use crate::exec::Parallel;
use crate::fft::FftConvolution;
use crate::io::{num, OutputDir};
use crate::manifest::{Check, Manifest, Status, MANIFEST};

const LOG_DOMAIN: u64 = 0x6c6f_6773_0000_0000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    Calibrate,
    Transience,
    Evolve,
    Stationary,
    Simulate,
    VerifyLemmas,
    VerifyBounds,
    Report,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Calibrate => "calibrate",
            Command::Transience => "transience",
            Command::Evolve => "evolve",
            Command::Stationary => "stationary",
            Command::Simulate => "simulate",
            Command::VerifyLemmas => "verify-lemmas",
            Command::VerifyBounds => "verify-bounds",
            Command::Report => "report",
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub config: PathBuf,
    pub seed: Option<u64>,
    pub out: PathBuf,
}

/// Failure before any numerical verdict.
#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("output: {0}")]
    Io(#[from] std::io::Error),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Io(_) => 1,
        }
    }
}

#[derive(Debug)]
enum Failure {
    Config(ConfigError),
    Divergence(String),
    Error(String),
    Io(std::io::Error),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e)
    }
}

impl From<CriticalityError> for Failure {
    fn from(e: CriticalityError) -> Self {
        match e {
            CriticalityError::Model(_) | CriticalityError::Invalid(_) | CriticalityError::NotFactorized => {
                Failure::Config(ConfigError::Model(e.to_string()))
            }
            _ => Failure::Error(e.to_string()),
        }
    }
}

impl From<HierarchyError> for Failure {
    fn from(e: HierarchyError) -> Self {
        match e {
            HierarchyError::Divergence(_) => Failure::Divergence(e.to_string()),
            HierarchyError::Walker(w) => (*w).into(),
            HierarchyError::Accuracy { .. } => Failure::Error(e.to_string()),
            _ => Failure::Config(ConfigError::Invalid(e.to_string())),
        }
    }
}

impl From<WalkerError> for Failure {
    fn from(e: WalkerError) -> Self {
        match e {
            WalkerError::Hierarchy(h) => h.into(),
            WalkerError::MassLeakage { .. } => Failure::Error(e.to_string()),
            _ => Failure::Config(ConfigError::Invalid(e.to_string())),
        }
    }
}

impl From<SimulatorError> for Failure {
    fn from(e: SimulatorError) -> Self {
        match e {
            SimulatorError::InsufficientReplicas { .. } | SimulatorError::MissingSnapshot(_) => {
                Failure::Error(e.to_string())
            }
            _ => Failure::Config(ConfigError::Invalid(e.to_string())),
        }
    }
}

struct Ctx {
    loaded: LoadedConfig,
    seed: Option<u64>,
    out: OutputDir,
}

/// Calibrated model and its transform.
struct Critical {
    space: StateSpace,
    input: RateModel,
    model: RateModel,
    input_gs: GroundState,
    gs: GroundState,
    tm: TransformedModel,
}

impl Ctx {
    fn seed(&self) -> Result<u64, Failure> {
        self.seed
            .ok_or_else(|| ConfigError::Invalid("this command is stochastic and needs a seed".into()).into())
    }

    fn solver(&self) -> SolverControls {
        SolverControls {
            tol: self.loaded.config.calibrate.tol,
            max_iters: self.loaded.config.calibrate.max_iters,
        }
    }

    fn critical(&self) -> Result<Critical, Failure> {
        let (space, input) = self.loaded.model()?.build()?;
        let controls = self.solver();
        let input_gs = solve_ground_state(&input, &space, &controls)?;
        let (model, gs) = calibrate(&input, &space, &controls)?;
        let tm = ground_transform(&model, &space, &gs)?;
        Ok(Critical {
            space,
            input,
            model,
            input_gs,
            gs,
            tm,
        })
    }

    fn write_divergence(&mut self, d: &DivergenceDiagnostics) -> Result<(), Failure> {
        self.out.write_json(
            "divergence.json",
            &json!({
                "order": d.order,
                "time": d.time,
                "integrand": d.integrand,
                "integrand_three_decades_earlier": finite(d.integrand_three_decades_earlier),
                "integral": d.integral,
            }),
        )?;
        Ok(())
    }

    /// Records divergence diagnostics before handing the error on.
    fn hierarchy<T>(&mut self, r: Result<T, HierarchyError>) -> Result<T, Failure> {
        if let Err(HierarchyError::Divergence(d)) = &r {
            self.write_divergence(d)?;
        }
        r.map_err(Failure::from)
    }
}

fn finite(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::String(num(x))
    }
}

fn index_label(idx: &[usize]) -> String {
    idx.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(" ")
}

fn tensor_rows(label: &[String], t: &CorrelationTensor) -> Vec<Vec<String>> {
    let mut idx = vec![0usize; t.order()];
    let p = t.points();
    (0..t.len())
        .map(|flat| {
            let mut f = flat;
            for slot in idx.iter_mut().rev() {
                *slot = f % p;
                f /= p;
            }
            let mut row = label.to_vec();
            row.push(t.order().to_string());
            row.push(index_label(&idx));
            row.push(num(t.values()[flat]));
            row
        })
        .collect()
}

fn starts(tm: &TransformedModel, cfg: &[StartConfig]) -> Vec<PairStart> {
    let k = tm.marks.as_ref().map_or(1, |m| m.q.len());
    let mut out = Vec::new();
    for s in cfg {
        match s.marks {
            Some([x, y]) => out.push(PairStart {
                displacement: s.displacement.clone(),
                mark_x: x,
                mark_y: y,
            }),
            None => {
                for x in 0..k {
                    for y in 0..k {
                        out.push(PairStart {
                            displacement: s.displacement.clone(),
                            mark_x: x,
                            mark_y: y,
                        });
                    }
                }
            }
        }
    }
    out
}

/// The origin and the support of `α`, every mark pair.
fn correlation_grid(tm: &TransformedModel) -> Result<Vec<PairStart>, Failure> {
    let dim = tm.lattice().ok_or(WalkerError::NotLattice)?.dim;
    let mut grid = starts(
        tm,
        &[StartConfig {
            displacement: vec![0; dim],
            marks: None,
        }],
    );
    grid.extend(default_grid(tm)?);
    Ok(grid)
}

fn pair_row(e: &PairEstimate) -> Vec<String> {
    vec![
        index_label_signed(&e.start.displacement),
        e.start.mark_x.to_string(),
        e.start.mark_y.to_string(),
        num(*e.mean.last().expect("checkpoints")),
        num(e.extrapolated),
        num(e.extrapolated_stderr),
        num(e.integrand_exponent),
        num(e.growth_exponent),
        e.converged.to_string(),
    ]
}

fn index_label_signed(z: &[i64]) -> String {
    z.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(" ")
}

const PAIR_HEADER: [&str; 9] = [
    "displacement",
    "mark_x",
    "mark_y",
    "integral_at_horizon",
    "extrapolated",
    "stderr",
    "integrand_exponent",
    "growth_exponent",
    "converged",
];

fn transience_json(r: &TransienceReport) -> Value {
    json!({
        "variant": format!("{:?}", r.variant).to_lowercase(),
        "h_hat": finite(r.h_hat),
        "stderr": finite(r.stderr),
        "tail_exponent_fit": finite(r.tail_exponent_fit),
        "growth_exponent": finite(r.growth_exponent),
        "horizon": finite(r.horizon),
        "converged": r.converged,
        "replicas": r.replicas,
        "argmax": r.pairs.get(r.argmax).map(|p| json!({
            "displacement": p.start.displacement,
            "mark_x": p.start.mark_x,
            "mark_y": p.start.mark_y,
        })),
    })
}

fn run_transience(ctx: &Ctx, c: &Critical) -> Result<TransienceReport, Failure> {
    let t = &ctx.loaded.config.transience;
    if c.tm.dense().is_some() {
        return Ok(estimate_h_dense(&c.tm, &StationaryControls::default())?);
    }
    let controls = TransienceControls {
        horizon: t.horizon,
        replicas: t.replicas,
        per_decade: t.per_decade,
        decades: t.decades,
        functional: PairFunctional::Forward,
        regular_terms: t.regular_terms,
    };
    let seed = ctx.seed()?;
    Ok(match t.variant {
        VariantConfig::Full => {
            let grid = t.grid.as_ref().map(|g| starts(&c.tm, g));
            estimate_h(&c.tm, grid.as_deref(), &controls, &Parallel, seed)?
        }
        VariantConfig::Sufficient => estimate_h_sufficient(&c.tm, &controls, &Parallel, seed)?,
    })
}

fn cmd_calibrate(ctx: &mut Ctx) -> Result<Vec<Check>, Failure> {
    let c = ctx.critical()?;
    let residual = criticality_residual(&c.tm);
    let jump_residual = match c.model.jump {
        Some(_) => Some(jump_criticality_residual(&c.model, &c.space, &c.gs)?),
        None => None,
    };
    let tol = ctx.loaded.config.calibrate.residual_tol;
    ctx.out.write_json(
        "calibrate.json",
        &json!({
            "input_eigenvalue": c.input_gs.eigenvalue,
            "eigenvalue": c.gs.eigenvalue,
            "iterations": c.gs.iterations,
            "normalization": format!("{:?}", c.gs.normalization),
            "mark_profile": c.gs.mark_profile,
            "eigen_residual": c.gs.residual,
            "criticality_residual": residual,
            "jump_criticality_residual": jump_residual,
            "bracket_history": c.input_gs.bracket_history.iter().map(|(lo, hi)| [*lo, *hi]).collect::<Vec<_>>(),
            "homogeneous": c.input.is_homogeneous(&c.space),
        }),
    )?;
    let rows = (0..c.space.len()).map(|i| {
        vec![
            i.to_string(),
            c.space.label(i),
            num(c.tm.psi[i]),
            num(c.tm.mbar[i]),
            num(c.tm.death[i]),
        ]
    });
    ctx.out.write_csv("psi.csv", &["index", "label", "psi", "mbar", "death"], rows)?;
    let mut checks = vec![Check::at_most("criticality_residual", residual, tol)];
    if let Some(r) = jump_residual {
        checks.push(Check::at_most("jump_criticality_residual", r, tol));
    }
    Ok(checks)
}

fn cmd_transience(ctx: &mut Ctx) -> Result<Vec<Check>, Failure> {
    let c = ctx.critical()?;
    let r = run_transience(ctx, &c)?;
    ctx.out.write_json("transience.json", &transience_json(&r))?;
    ctx.out
        .write_csv("transience_pairs.csv", &PAIR_HEADER, r.pairs.iter().map(pair_row))?;
    ctx.out.write_csv(
        "transience_curve.csv",
        &["t", "value"],
        r.curve.iter().map(|(t, v)| vec![num(*t), num(*v)]),
    )?;
    if !r.converged {
        return Err(Failure::Divergence(format!(
            "pair integral not converged at T = {} (growth exponent {})",
            r.horizon, r.growth_exponent
        )));
    }
    Ok(vec![Check::flag("converged", true)])
}

fn evolve_controls(ctx: &Ctx) -> EvolveControls {
    let e = &ctx.loaded.config.evolve;
    EvolveControls {
        max_step: e.max_step,
        nodes: e.nodes,
        tol: e.tol,
    }
}

fn cmd_evolve(ctx: &mut Ctx) -> Result<Vec<Check>, Failure> {
    let c = ctx.critical()?;
    let finite_model = c.tm.dense().is_some();
    let tm = c.tm.dense_window();
    let cfg = ctx.loaded.config.evolve.clone();
    let rho = ctx.loaded.config.rho;
    let initial: Vec<CorrelationTensor> = (1..=cfg.order)
        .map(|l| poisson_initial(l, rho, &tm.psi).mbar_convention)
        .collect();
    let traj = ctx.hierarchy(evolve(cfg.order, &tm, &initial, &cfg.times, &evolve_controls(ctx)))?;
    let mut rows = Vec::new();
    for (t, state) in traj.times.iter().zip(&traj.states) {
        for k in state {
            rows.extend(tensor_rows(&[num(*t)], k));
        }
    }
    ctx.out.write_csv("evolve.csv", &["time", "order", "index", "value"], rows)?;
    let drift = traj
        .states
        .iter()
        .map(|s| s[0].values().iter().map(|v| (v - rho).abs()).fold(0.0, f64::max))
        .fold(0.0, f64::max);
    ctx.out.write_json(
        "evolve.json",
        &json!({
            "rho": rho,
            "order": cfg.order,
            "times": cfg.times,
            "step_error_estimate": traj.error_estimate,
            "first_level_drift": drift,
            "window": !finite_model,
        }),
    )?;
    let mut checks = vec![Check::at_most(
        "step_error_estimate",
        traj.error_estimate,
        cfg.tol * initial.iter().map(|k| k.sup_norm()).fold(1.0, f64::max),
    )];
    if finite_model {
        checks.push(Check::at_most("first_level_drift", drift, 1e-10));
    }
    Ok(checks)
}

fn stationary_controls(ctx: &Ctx) -> StationaryControls {
    let s = &ctx.loaded.config.stationary;
    StationaryControls {
        tol: s.tol,
        t_max: s.t_max,
        ..StationaryControls::default()
    }
}

fn pair_controls(horizon: f64, replicas: u64, per_decade: usize, decades: usize) -> PairMcControls {
    PairMcControls {
        horizon,
        replicas,
        per_decade,
        decades,
    }
}

fn cmd_stationary(ctx: &mut Ctx) -> Result<Vec<Check>, Failure> {
    let c = ctx.critical()?;
    let cfg = ctx.loaded.config.stationary.clone();
    let rho = ctx.loaded.config.rho;
    match cfg.backend {
        Backend::Dense => {
            let tm = c.tm.dense_window();
            let sol = ctx.hierarchy(stationary_dense(cfg.order, &tm, rho, &stationary_controls(ctx)))?;
            let rows: Vec<Vec<String>> = sol.tensors.iter().flat_map(|k| tensor_rows(&[], k)).collect();
            ctx.out.write_csv("stationary.csv", &["order", "index", "value"], rows)?;
            ctx.out.write_json(
                "stationary.json",
                &json!({
                    "backend": "dense",
                    "rho": rho,
                    "residuals": sol.residuals,
                    "horizons": sol.horizons,
                    "sup": sol.tensors.iter().map(|k| k.max()).collect::<Vec<_>>(),
                }),
            )?;
            let worst = sol.residuals.iter().copied().fold(0.0, f64::max);
            let mut checks = vec![Check::at_most("residual", worst, cfg.residual_tol)];
            if let Some(conv) = &cfg.convergence {
                let times = contactlab_core::walkers::log_grid(conv.final_time / 1000.0, conv.final_time, 13);
                let r = ctx.hierarchy(convergence_check_dense(
                    cfg.order,
                    &tm,
                    rho,
                    &times,
                    conv.tol,
                    &stationary_controls(ctx),
                    &evolve_controls(ctx),
                ))?;
                ctx.out.write_csv(
                    "convergence.csv",
                    &["time", "distance"],
                    r.times.iter().zip(&r.distances).map(|(t, d)| vec![num(*t), num(*d)]),
                )?;
                checks.push(Check::at_most(
                    "final_distance",
                    *r.distances.last().unwrap_or(&f64::INFINITY),
                    conv.tol,
                ));
            }
            Ok(checks)
        }
        Backend::Montecarlo => {
            if cfg.order != 2 {
                return Err(ConfigError::Invalid("the Monte Carlo backend estimates order 2 only".into()).into());
            }
            let seed = ctx.seed()?;
            let grid = match &cfg.grid {
                Some(g) => starts(&c.tm, g),
                None => correlation_grid(&c.tm)?,
            };
            let controls = pair_controls(cfg.horizon, cfg.replicas, cfg.per_decade, cfg.decades);
            let k = ctx.hierarchy(stationary_pair_mc(&c.tm, rho, &grid, &controls, &Parallel, seed))?;
            let rows = k.entries.iter().map(|e| {
                vec![
                    index_label_signed(&e.start.displacement),
                    e.start.mark_x.to_string(),
                    e.start.mark_y.to_string(),
                    num(e.value),
                    num(e.stderr),
                    num(e.estimate.integrand_exponent),
                ]
            });
            ctx.out.write_csv(
                "stationary_pairs.csv",
                &["displacement", "mark_x", "mark_y", "value", "stderr", "integrand_exponent"],
                rows,
            )?;
            let (sup, sup_se) = k.sup();
            ctx.out.write_json(
                "stationary.json",
                &json!({"backend": "montecarlo", "rho": rho, "sup": sup, "sup_stderr": sup_se, "horizon": cfg.horizon}),
            )?;
            let mut checks = Vec::new();
            if let Some(conv) = &cfg.convergence {
                let transient = pair_controls(conv.final_time, conv.replicas, cfg.per_decade, cfg.decades);
                let r = ctx.hierarchy(convergence_check_mc(
                    &c.tm,
                    rho,
                    &grid,
                    conv.final_time,
                    &transient,
                    &controls,
                    &Parallel,
                    seed,
                ))?;
                ctx.out.write_csv(
                    "convergence.csv",
                    &["time", "distance", "stderr"],
                    r.times
                        .iter()
                        .zip(&r.distances)
                        .zip(&r.stderrs)
                        .map(|((t, d), s)| vec![num(*t), num(*d), num(*s)]),
                )?;
                checks.push(Check::at_most(
                    "final_distance",
                    r.final_distance,
                    3.0 * r.final_stderr,
                ));
            }
            Ok(checks)
        }
    }
}

fn event_kind(k: EventKind) -> &'static str {
    match k {
        EventKind::Birth => "birth",
        EventKind::Death => "death",
        EventKind::Jump => "jump",
    }
}

fn cmd_simulate(ctx: &mut Ctx) -> Result<Vec<Check>, Failure> {
    let c = ctx.critical()?;
    let tm = c.tm.dense_window();
    let cfg = ctx.loaded.config.simulate.clone();
    let rho = ctx.loaded.config.rho;
    let seed = ctx.seed()?;
    let controls = SimulationControls {
        population_cap: cfg.population_cap,
        event_cap: cfg.event_cap,
        record_events: false,
    };
    let est = simulate_moments(&tm, rho, &cfg.times, cfg.order, cfg.replicas, &controls, &Parallel, seed)?;
    let mut rows = Vec::new();
    for (t, levels) in cfg.times.iter().zip(&est) {
        for m in levels {
            let values = tensor_rows(&[num(*t)], &m.values);
            for (mut row, se) in values.into_iter().zip(m.stderr.values()) {
                row.push(num(*se));
                rows.push(row);
            }
        }
    }
    ctx.out
        .write_csv("simulate.csv", &["time", "order", "index", "value", "stderr"], rows)?;
    let used = est.first().and_then(|l| l.first()).map_or(0, |m| m.replicas);
    let truncated = est.first().and_then(|l| l.first()).map_or(0, |m| m.truncated);

    let log_controls = SimulationControls {
        record_events: true,
        ..controls
    };
    let horizon = cfg.times.last().copied().unwrap_or(0.0);
    for r in 0..cfg.logs {
        let mut rng = replica_rng(seed, LOG_DOMAIN, r);
        let start = Configuration::from_counts(&poisson_configuration(rho, &tm.mbar, &mut rng));
        let log = simulate_contact(&tm, &start, horizon, &cfg.times, &log_controls, &mut rng)?;
        let events: Vec<Value> = log
            .events
            .iter()
            .map(|e| json!({"t": e.time, "kind": event_kind(e.kind), "point": e.point, "target": e.target}))
            .collect();
        ctx.out.write_ndjson(&format!("events/replica_{r}.ndjson"), &events)?;
    }

    let mut checks = vec![Check::at_most("truncated_fraction", truncated as f64 / cfg.replicas as f64, 0.01)];
    let mut max_z = 0.0f64;
    if cfg.compare {
        let initial: Vec<CorrelationTensor> = (1..=cfg.order)
            .map(|l| poisson_initial(l, rho, &tm.psi).mbar_convention)
            .collect();
        let traj = ctx.hierarchy(evolve(cfg.order, &tm, &initial, &cfg.times, &evolve_controls(ctx)))?;
        let mut rows = Vec::new();
        for ((t, levels), exact) in cfg.times.iter().zip(&est).zip(&traj.states) {
            for (m, k) in levels.iter().zip(exact) {
                for ((v, se), x) in m.values.values().iter().zip(m.stderr.values()).zip(k.values()) {
                    let z = if *se > 0.0 { (v - x).abs() / se } else if v == x { 0.0 } else { f64::INFINITY };
                    max_z = max_z.max(z);
                    rows.push(vec![num(*t), m.order.to_string(), num(*v), num(*se), num(*x), num(z)]);
                }
            }
        }
        ctx.out.write_csv(
            "simulate_compare.csv",
            &["time", "order", "estimate", "stderr", "hierarchy", "z"],
            rows,
        )?;
        checks.push(Check::at_most("max_z", max_z, 3.0));
    }
    ctx.out.write_json(
        "simulate.json",
        &json!({
            "rho": rho,
            "replicas": cfg.replicas,
            "used": used,
            "truncated": truncated,
            "max_z": if cfg.compare { Some(max_z) } else { None },
        }),
    )?;
    Ok(checks)
}

fn cmd_verify_lemmas(ctx: &mut Ctx) -> Result<Vec<Check>, Failure> {
    let c = ctx.critical()?;
    let cfg = ctx.loaded.config.lemmas.clone();
    let seed = ctx.seed()?;
    let lat = c.tm.lattice().ok_or(WalkerError::NotLattice)?;
    let marks = c.tm.marks.as_ref().ok_or(WalkerError::NotLattice)?;
    let p = lat.alpha.scaled(1.0 / lat.alpha.mass());
    let mut checks = Vec::new();

    let conv = convolution_bound_check(&p, cfg.n_max, &FftConvolution)?;
    let direct_second: f64 = p
        .offsets()
        .iter()
        .zip(p.values())
        .map(|(u, v)| v * p.value(&u.iter().map(|x| -x).collect::<Vec<_>>()))
        .sum();
    let short = convolution_bound_check(&p, 2, &DirectConvolution)?;
    ctx.out.write_csv(
        "convolution.csv",
        &["n", "sup", "scaled"],
        conv.n
            .iter()
            .zip(&conv.sup)
            .zip(&conv.scaled)
            .map(|((n, s), k)| vec![n.to_string(), num(*s), num(*k)]),
    )?;
    checks.push(Check::at_most("convolution_max_over_median", conv.max_over_median, 2.0));
    checks.push(Check::at_most(
        "convolution_second_at_origin_error",
        (conv.second_at_origin - direct_second).abs().max((short.second_at_origin - direct_second).abs()),
        1e-12,
    ));

    let target = cfg.target.clone().unwrap_or(StartConfig {
        displacement: vec![0; lat.dim],
        marks: Some([0, 0]),
    });
    let [s0, s1] = target.marks.unwrap_or([0, 0]);
    let heat = heat_bound_check(
        &c.tm,
        &cfg.heat_times,
        s0,
        &target.displacement,
        s1,
        cfg.heat_replicas,
        cfg.regular_terms,
        &Parallel,
        seed,
    )?;
    ctx.out.write_csv(
        "heat.csv",
        &["t", "alpha_mean", "b_mean", "b_stderr", "estimate", "stderr", "scaled", "scaled_stderr"],
        heat.rows.iter().map(|r| {
            vec![
                num(r.t),
                num(r.alpha_mean),
                num(r.b_mean),
                num(r.b_stderr),
                num(r.estimate),
                num(r.stderr),
                num(r.scaled),
                num(r.scaled_stderr),
            ]
        }),
    )?;
    checks.push(Check::flag("heat_flat", heat.flat));
    checks.push(Check::flag("heat_dominated", heat.dominated));

    let theta = theta_kernel(&c.tm)?;
    let poisson = poisson_domination_check(
        &marks.v,
        &theta,
        cfg.lambda0,
        &cfg.poisson_times,
        &cfg.poisson_k,
        cfg.poisson_replicas,
        &Parallel,
        seed,
    )?;
    ctx.out.write_csv(
        "poisson.csv",
        &["start_mark", "t", "k", "estimate", "stderr", "exact", "pass"],
        poisson.cells.iter().map(|c| {
            vec![
                c.start_mark.to_string(),
                num(c.t),
                c.k.to_string(),
                num(c.estimate),
                num(c.stderr),
                num(c.exact),
                c.pass.to_string(),
            ]
        }),
    )?;
    checks.push(Check::flag("poisson_domination", poisson.pass));

    let tail = lower_tail_bound_check(poisson.lambda0, &cfg.tail_times, cfg.m_scale)?;
    ctx.out.write_csv(
        "lower_tail.csv",
        &["t", "k", "exact", "bound", "ratio", "excluded"],
        tail.rows.iter().map(|r| {
            vec![
                num(r.t),
                r.k.to_string(),
                num(r.exact),
                num(r.bound),
                num(r.ratio),
                r.excluded.to_string(),
            ]
        }),
    )?;
    checks.push(Check::at_most("lower_tail_max_ratio", tail.max_ratio, 1.0));

    ctx.out.write_json(
        "lemmas.json",
        &json!({
            "convolution": {
                "n_max": cfg.n_max,
                "median": conv.median,
                "max_over_median": conv.max_over_median,
                "second_at_origin": conv.second_at_origin,
                "pass": conv.pass,
            },
            "heat": {"kappa": heat.kappa, "sup_scaled": heat.sup_scaled, "flat": heat.flat, "dominated": heat.dominated},
            "poisson": {"lambda0": poisson.lambda0, "pass": poisson.pass},
            "lower_tail": {"lambda0": tail.lambda0, "B": tail.b, "M_tilde": tail.m_tilde, "max_ratio": tail.max_ratio},
        }),
    )?;
    Ok(checks)
}

fn cmd_verify_bounds(ctx: &mut Ctx) -> Result<Vec<Check>, Failure> {
    let c = ctx.critical()?;
    let cfg = ctx.loaded.config.bounds.clone();
    let rho = ctx.loaded.config.rho;
    if c.tm.dense().is_none() && cfg.order > 2 {
        return Err(ConfigError::Invalid("lattice bounds are estimated up to order 2".into()).into());
    }
    let h = match cfg.h {
        Some(h) => h,
        None => {
            let r = run_transience(ctx, &c)?;
            ctx.out.write_json("transience.json", &transience_json(&r))?;
            if !r.converged {
                return Err(Failure::Divergence(format!("H estimate not converged (h_hat = {})", r.h_hat)));
            }
            r.h_hat
        }
    };
    let sups: Vec<(f64, f64)> = if c.tm.dense().is_some() {
        let sol = ctx.hierarchy(stationary_dense(cfg.order, &c.tm, rho, &stationary_controls(ctx)))?;
        sol.tensors.iter().map(|k| (k.max(), 0.0)).collect()
    } else {
        let mut sups = vec![(rho, 0.0)];
        if cfg.order == 2 {
            let s = ctx.loaded.config.stationary.clone();
            let seed = ctx.seed()?;
            let grid = match &s.grid {
                Some(g) => starts(&c.tm, g),
                None => correlation_grid(&c.tm)?,
            };
            let controls = pair_controls(s.horizon, s.replicas, s.per_decade, s.decades);
            let k = ctx.hierarchy(stationary_pair_mc(&c.tm, rho, &grid, &controls, &Parallel, seed))?;
            sups.push(k.sup());
        }
        sups
    };
    let report = factorial_bound(rho, h, &sups);
    ctx.out.write_csv(
        "bounds.csv",
        &["n", "value", "stderr", "bound", "ratio", "ratio_lower", "pass"],
        report.rows.iter().map(|r| {
            vec![
                r.n.to_string(),
                num(r.value),
                num(r.stderr),
                num(r.bound),
                num(r.ratio),
                num(r.ratio_lower),
                r.pass.to_string(),
            ]
        }),
    )?;
    ctx.out
        .write_json("bounds.json", &json!({"rho": rho, "H": report.h, "D": report.d, "pass": report.pass}))?;
    Ok(report
        .rows
        .iter()
        .map(|r| Check::at_most(format!("level_{}_ratio_lower", r.n), r.ratio_lower, 1.0))
        .collect())
}

fn cmd_report(ctx: &mut Ctx) -> Result<Vec<Check>, Failure> {
    let runs = ctx.loaded.config.report.runs.clone();
    if runs.is_empty() {
        return Err(ConfigError::Invalid("`report.runs` is empty".into()).into());
    }
    let mut checks = Vec::new();
    let mut summary = Vec::new();
    let mut rows = Vec::new();
    for run in &runs {
        let dir = ctx.loaded.dir.join(run);
        let label = run.display().to_string();
        let m = Manifest::load(&dir).map_err(|e| Failure::Error(e.to_string()))?;
        let altered = m.altered_files(&dir);
        checks.push(Check::flag(format!("{label}:integrity"), altered.is_empty()));
        checks.push(Check::flag(format!("{label}:status"), m.status == Status::Ok));
        for c in &m.checks {
            rows.push(vec![
                label.clone(),
                m.command.clone(),
                c.name.clone(),
                num(c.value),
                num(c.threshold),
                c.pass.to_string(),
            ]);
        }
        summary.push(json!({
            "run": label,
            "command": m.command,
            "status": m.status,
            "seed": m.seed,
            "config_sha256": m.config_sha256,
            "altered_files": altered,
            "checks": m.checks,
        }));
    }
    ctx.out
        .write_csv("report.csv", &["run", "command", "check", "value", "threshold", "pass"], rows)?;
    ctx.out.write_json("report.json", &json!({ "runs": summary }))?;
    Ok(checks)
}

fn dispatch(cmd: Command, ctx: &mut Ctx) -> Result<Vec<Check>, Failure> {
    match cmd {
        Command::Calibrate => cmd_calibrate(ctx),
        Command::Transience => cmd_transience(ctx),
        Command::Evolve => cmd_evolve(ctx),
        Command::Stationary => cmd_stationary(ctx),
        Command::Simulate => cmd_simulate(ctx),
        Command::VerifyLemmas => cmd_verify_lemmas(ctx),
        Command::VerifyBounds => cmd_verify_bounds(ctx),
        Command::Report => cmd_report(ctx),
    }
}

/// Runs `cmd` and writes its outputs and `manifest.json` under `opts.out`.
pub fn execute(cmd: Command, opts: &RunOptions) -> Result<Manifest, RunError> {
    let clock = Instant::now();
    let loaded = LoadedConfig::load(&opts.config)?;
    let seed = opts.seed.or(loaded.config.seed);
    let config_sha256 = loaded.sha256.clone();
    let out = OutputDir::create(&opts.out)?;
    let mut ctx = Ctx { loaded, seed, out };
    let (status, message, checks) = match dispatch(cmd, &mut ctx) {
        Ok(checks) => {
            let status = if checks.iter().all(|c| c.pass) {
                Status::Ok
            } else {
                Status::CheckFailed
            };
            (status, None, checks)
        }
        Err(Failure::Config(e)) => return Err(RunError::Config(e)),
        Err(Failure::Io(e)) => return Err(RunError::Io(e)),
        Err(Failure::Divergence(m)) => (Status::Divergence, Some(m), Vec::new()),
        Err(Failure::Error(m)) => (Status::Error, Some(m), Vec::new()),
    };
    let manifest = Manifest {
        command: cmd.name().to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        config_sha256,
        seed,
        status,
        message,
        wall_clock_seconds: clock.elapsed().as_secs_f64(),
        checks,
        files: ctx.out.files().clone(),
    };
    let bytes = serde_json::to_vec_pretty(&manifest).map_err(std::io::Error::from)?;
    std::fs::write(ctx.out.root().join(MANIFEST), bytes)?;
    Ok(manifest)
}

/// Output directory: `--out`, else `CONTACTLAB_OUT`, else `out/<command>`.
pub fn default_out(cmd: Command, explicit: Option<&Path>) -> PathBuf {
    if let Some(p) = explicit {
        return p.to_path_buf();
    }
    match std::env::var_os("CONTACTLAB_OUT") {
        Some(p) => PathBuf::from(p),
        None => Path::new("out").join(cmd.name()),
    }
}
