//! Experiment orchestration and CSV emission.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use cityroad::acceptance;
use cityroad::asymptotic::{
    compute_c_star_inf, large_d_convergence_experiment, simulate_asymptotic,
};
use cityroad::dispersion::compute_c_star;
use cityroad::front_speed::estimate_speed;
use cityroad::lattice_sim::{check_long_time_convergence, simulate, InitialData, SimulationConfig};
use rayon::prelude::*;
use thiserror::Error;

use crate::config::{ExperimentConfig, InitialKind, SweepRun};

#[derive(Debug, Error)]
pub enum CommandError {
    #[error(transparent)]
    Model(#[from] cityroad::Error),
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Config(#[from] crate::config::ConfigError),
}

type Result<T> = std::result::Result<T, CommandError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Speed,
    Simulate,
    Asymptotic,
    Sweep,
    Verify,
}

/// What a command printed and whether it succeeded.
#[derive(Debug, Clone, Default)]
pub struct Report {
    pub lines: Vec<String>,
    pub files: Vec<PathBuf>,
    pub success: bool,
}

/// Fixed float format: 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

struct Csv {
    path: PathBuf,
    out: BufWriter<File>,
}

impl Csv {
    fn create(dir: &Path, name: &str, header: &str) -> Result<Self> {
        let path = dir.join(name);
        let io = |source| CommandError::Io {
            path: path.clone(),
            source,
        };
        let mut out = BufWriter::new(File::create(&path).map_err(io)?);
        writeln!(out, "{header}").map_err(io)?;
        Ok(Csv { path, out })
    }

    fn row(&mut self, fields: &[String]) -> Result<()> {
        writeln!(self.out, "{}", fields.join(",")).map_err(|source| CommandError::Io {
            path: self.path.clone(),
            source,
        })
    }

    fn finish(mut self, report: &mut Report) -> Result<()> {
        self.out.flush().map_err(|source| CommandError::Io {
            path: self.path.clone(),
            source,
        })?;
        report.files.push(self.path);
        Ok(())
    }
}

fn output_dir(cfg: &ExperimentConfig) -> Result<&Path> {
    let dir = cfg.output.dir.as_path();
    fs::create_dir_all(dir).map_err(|source| CommandError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    Ok(dir)
}

fn initial_data(cfg: &ExperimentConfig) -> InitialData {
    let s = &cfg.simulation;
    match s.initial {
        InitialKind::LeftBlock => InitialData::LeftBlock,
        InitialKind::SineBump => InitialData::SineBump {
            n: s.bump_cities,
            amplitude: s.amplitude,
        },
        InitialKind::PointMass => InitialData::PointMass {
            j0: 0,
            amplitude: s.amplitude,
        },
    }
}

fn simulation_config(cfg: &ExperimentConfig, dt: f64, c_upper: f64) -> SimulationConfig {
    let s = &cfg.simulation;
    SimulationConfig {
        t_final: s.t_final,
        dt,
        m: s.m,
        window_margin: s.margin,
        snapshot_stride: s.stride,
        c_upper_guess: c_upper,
        ..SimulationConfig::default()
    }
}

pub fn run_command(cmd: Command, cfg: &ExperimentConfig, parallel: bool) -> Result<Report> {
    match cmd {
        Command::Speed => speed(cfg),
        Command::Simulate => run_simulate(cfg),
        Command::Asymptotic => run_asymptotic(cfg),
        Command::Sweep => sweep(cfg, parallel),
        Command::Verify => Ok(verify()),
    }
}

fn speed(cfg: &ExperimentConfig) -> Result<Report> {
    let p = cfg.params();
    let res = compute_c_star(&p)?;
    let inf = compute_c_star_inf(&p)?;
    let mut report = Report::default();
    let dir = output_dir(cfg)?;
    let mut csv = Csv::create(dir, "dispersion_scan.csv", "lambda,delta,y,mu,c")?;
    for pt in &res.scan {
        csv.row(&[
            fmt_f64(pt.lambda),
            fmt_f64(pt.delta),
            fmt_f64(pt.y),
            fmt_opt(pt.mu),
            fmt_opt(pt.c),
        ])?;
    }
    csv.finish(&mut report)?;
    report.lines.push(format!(
        "lambda0={} lambda_star={} mu_star={} c_star={} c_star_inf={}",
        fmt_f64(res.lambda0),
        fmt_f64(res.lambda_star),
        fmt_f64(res.mu_star),
        fmt_f64(res.c_star),
        fmt_f64(inf.c_star_inf)
    ));
    report.success = true;
    Ok(report)
}

fn run_simulate(cfg: &ExperimentConfig) -> Result<Report> {
    let p = cfg.params();
    let c_star = compute_c_star(&p).ok().map(|r| r.c_star);
    let sim = simulation_config(cfg, cfg.simulation.dt, c_star.map_or(1.0, |c| 1.25 * c));
    let traj = simulate(&initial_data(cfg), &sim, &p)?;
    let mut report = Report::default();
    let dir = output_dir(cfg)?;

    let mut rho = Csv::create(dir, "trajectory_rho.csv", "time,j,rho")?;
    for s in &traj.snapshots {
        for (i, r) in s.rho.iter().enumerate() {
            rho.row(&[fmt_f64(s.time), (s.j_min + i as i64).to_string(), fmt_f64(*r)])?;
        }
    }
    rho.finish(&mut report)?;

    let mut edges = Csv::create(dir, "trajectory_edge.csv", "time,j,x,v")?;
    let last = traj.snapshots.len() - 1;
    for (k, s) in traj.snapshots.iter().enumerate() {
        if k % cfg.output.edge_every != 0 && k != last {
            continue;
        }
        for (i, e) in s.edges.iter().enumerate() {
            let j = (s.j_min + i as i64).to_string();
            for (n, v) in e.values().iter().enumerate() {
                edges.row(&[fmt_f64(s.time), j.clone(), fmt_f64(e.x(n)), fmt_f64(*v)])?;
            }
        }
    }
    edges.finish(&mut report)?;

    let mut mass = Csv::create(dir, "mass.csv", "time,mass")?;
    for (s, m) in traj.snapshots.iter().zip(&traj.mass) {
        mass.row(&[fmt_f64(s.time), fmt_f64(*m)])?;
    }
    mass.finish(&mut report)?;

    if p.fprime0() == 0.0 {
        // mass is only an invariant without reaction
        report.lines.push(format!("mass_drift={}", fmt_f64(traj.mass_drift())));
    } else {
        report.lines.push(format!(
            "central_deviation={}",
            fmt_f64(check_long_time_convergence(&traj, &p))
        ));
        match estimate_speed(&traj, cfg.measurement.threshold, cfg.measurement.window) {
            Ok(front) => {
                let mut line = format!("c_measured={}", fmt_f64(front.fitted_speed));
                if let Some(c) = c_star {
                    line += &format!(
                        " c_star={} rel_error={}",
                        fmt_f64(c),
                        fmt_f64((front.fitted_speed - c).abs() / c)
                    );
                }
                report.lines.push(line);
            }
            Err(e) => report.lines.push(format!("speed not measured: {e}")),
        }
    }
    report.success = flag_contamination(&mut report, traj.contaminated_at);
    Ok(report)
}

fn flag_contamination(report: &mut Report, at: Option<f64>) -> bool {
    match at {
        Some(t) => {
            report
                .lines
                .push(format!("window contaminated at t={}", fmt_f64(t)));
            false
        }
        None => true,
    }
}

fn run_asymptotic(cfg: &ExperimentConfig) -> Result<Report> {
    let p = cfg.params();
    let inf = compute_c_star_inf(&p).ok().map(|r| r.c_star_inf);
    let sim = simulation_config(cfg, cfg.asymptotic.dt, inf.map_or(1.0, |c| 1.25 * c));
    let traj = simulate_asymptotic(&initial_data(cfg), &sim, &p)?;
    let mut report = Report::default();
    let dir = output_dir(cfg)?;

    let mut states = Csv::create(dir, "asymptotic.csv", "time,j,V,P")?;
    for s in &traj.snapshots {
        // V_j lives on the road (j, j + 1), so the last city has no road
        for (i, pj) in s.p.iter().enumerate() {
            let v = s.v.get(i).copied();
            states.row(&[
                fmt_f64(s.time),
                (s.j_min + i as i64).to_string(),
                fmt_opt(v),
                fmt_f64(*pj),
            ])?;
        }
    }
    states.finish(&mut report)?;

    let mut mass = Csv::create(dir, "asymptotic_mass.csv", "time,mass")?;
    for s in &traj.snapshots {
        mass.row(&[fmt_f64(s.time), fmt_f64(s.mass())])?;
    }
    mass.finish(&mut report)?;

    if let Some(c) = inf {
        match estimate_speed(&traj, cfg.measurement.threshold, cfg.measurement.window) {
            Ok(front) => report.lines.push(format!(
                "c_measured={} c_star_inf={} rel_error={}",
                fmt_f64(front.fitted_speed),
                fmt_f64(c),
                fmt_f64((front.fitted_speed - c).abs() / c)
            )),
            Err(e) => report.lines.push(format!("speed not measured: {e}")),
        }
    }

    if !cfg.asymptotic.epsilons.is_empty() {
        // both systems must share snapshot times, so they run on one step
        let dt = cfg.asymptotic.dt.min(cfg.simulation.dt);
        let shared = simulation_config(cfg, dt, sim.c_upper_guess);
        let rows = large_d_convergence_experiment(
            &cfg.asymptotic.epsilons,
            &initial_data(cfg),
            &shared,
            &p,
        )?;
        let mut csv = Csv::create(dir, "large_d.csv", "epsilon,error")?;
        for r in &rows {
            csv.row(&[fmt_f64(r.epsilon), fmt_f64(r.error)])?;
        }
        csv.finish(&mut report)?;
    }

    report.success = flag_contamination(&mut report, traj.contaminated_at);
    Ok(report)
}

/// One row of the theory-versus-simulation table.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub parameter: &'static str,
    pub value: f64,
    pub c_theory: f64,
    pub c_measured: f64,
    pub rel_error: f64,
    pub contaminated: bool,
}

pub fn sweep_row(cfg: &ExperimentConfig, run: &SweepRun) -> Result<SweepRow> {
    let c_theory = compute_c_star(&run.params)?.c_star;
    let sim = simulation_config(cfg, cfg.simulation.dt, 1.25 * c_theory);
    let traj = simulate(&initial_data(cfg), &sim, &run.params)?;
    let c_measured =
        estimate_speed(&traj, cfg.measurement.threshold, cfg.measurement.window)?.fitted_speed;
    Ok(SweepRow {
        parameter: run.parameter.name(),
        value: run.value,
        c_theory,
        c_measured,
        rel_error: (c_measured - c_theory).abs() / c_theory,
        contaminated: traj.is_contaminated(),
    })
}

fn sweep(cfg: &ExperimentConfig, parallel: bool) -> Result<Report> {
    let plan = cfg.sweep_plan()?;
    let rows: Vec<Result<SweepRow>> = if parallel {
        plan.par_iter().map(|run| sweep_row(cfg, run)).collect()
    } else {
        plan.iter().map(|run| sweep_row(cfg, run)).collect()
    };
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    let mut report = Report::default();
    let dir = output_dir(cfg)?;
    let mut csv = Csv::create(dir, "sweep.csv", "param,value,c_theory,c_measured,rel_error")?;
    for r in &rows {
        csv.row(&[
            r.parameter.to_string(),
            fmt_f64(r.value),
            fmt_f64(r.c_theory),
            fmt_f64(r.c_measured),
            fmt_f64(r.rel_error),
        ])?;
        report.lines.push(format!(
            "{}={} c_theory={} c_measured={} rel_error={}",
            r.parameter,
            r.value,
            fmt_f64(r.c_theory),
            fmt_f64(r.c_measured),
            fmt_f64(r.rel_error)
        ));
    }
    csv.finish(&mut report)?;
    report.success = true;
    for r in rows.iter().filter(|r| r.contaminated) {
        report
            .lines
            .push(format!("window contaminated in run {}={}", r.parameter, r.value));
        report.success = false;
    }
    Ok(report)
}

fn verify() -> Report {
    let outcomes = acceptance::run_all();
    let passed = outcomes.iter().filter(|o| o.passed).count();
    let mut lines: Vec<String> = outcomes.iter().map(|o| o.to_string()).collect();
    lines.push(format!("{passed} of {} criteria passed", outcomes.len()));
    Report {
        lines,
        files: Vec::new(),
        success: passed == outcomes.len(),
    }
}
