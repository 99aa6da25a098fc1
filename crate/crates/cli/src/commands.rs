use std::fs;
use std::path::{Path, PathBuf};

use bozk_core::evolve::{stability_experiment, EvolveReport};
use bozk_core::fieldfile::{read_field, write_field};
use bozk_core::functionals::{d_value, loglog_slope, znorm};
use bozk_core::kernel::{cross_validate, kernel_decay_fit, kernel_field, CrossValidation, KernelDecayFit};
use bozk_core::solver::{symmetry_report, wave_decay_report, SymmetryReport, WaveDecay, WaveDiagnostics};
use bozk_core::{
    classify, evolve_observed, petviashvili_solve, Error, EvolveOptions, Grid2D, KernelSpec, Params,
    SolitaryWave, SolveOptions,
};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{Command, RunConfig};
use crate::failure::Failure;

const DEFAULT_OUT: &str = "bozk-out";

/// A validated run with its resolved output directory.
pub struct Context {
    pub config: RunConfig,
    pub config_sha256: String,
    pub out: PathBuf,
    pub force: bool,
    pub jobs: usize,
}

impl Context {
    fn grid(&self) -> Grid2D {
        self.config.grid.expect("validated: grid present")
    }

    fn solve_options(&self) -> SolveOptions {
        let mut opts = self.config.solver.clone();
        opts.force |= self.force;
        opts
    }
}

/// Reads and validates the configuration, then creates the output directory.
pub fn prepare(path: &Path, out: Option<&Path>, force: bool, jobs: usize) -> Result<Context, Failure> {
    let bytes = fs::read(path)
        .map_err(|e| Failure::config(format!("cannot read {}: {e}", path.display())))?;
    let config = RunConfig::parse(&bytes).map_err(Failure::config)?;
    let out = out
        .map(Path::to_path_buf)
        .or_else(|| config.out.clone())
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    fs::create_dir_all(&out)
        .map_err(|e| Failure::io(format!("cannot create {}: {e}", out.display())))?;
    Ok(Context {
        config,
        config_sha256: hex(&Sha256::digest(&bytes)),
        out,
        force,
        jobs,
    })
}

pub fn run(ctx: &Context) -> Result<(), Failure> {
    write_manifest(ctx)?;
    match ctx.config.command {
        Command::Classify => run_classify(ctx),
        Command::Solve => solve_into(ctx, &ctx.config.params, &ctx.out).map(|_| ()),
        Command::Evolve => run_evolve(ctx),
        Command::Stability => run_stability(ctx),
        Command::Kernel => run_kernel(ctx),
        Command::SweepDc => run_sweep(ctx),
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn to_io(e: impl std::fmt::Display) -> Error {
    Error::Io(std::io::Error::other(e.to_string()))
}

fn write_json(path: &Path, value: &impl Serialize) -> bozk_core::Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(to_io)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn fail(e: Error) -> Failure {
    Failure::core(&e)
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    cli_version: &'static str,
    core_version: &'static str,
    command: Command,
    config_sha256: &'a str,
    seed: u64,
    force: bool,
    jobs: usize,
    config: &'a RunConfig,
}

fn write_manifest(ctx: &Context) -> Result<(), Failure> {
    let m = Manifest {
        tool: "bozk",
        cli_version: env!("CARGO_PKG_VERSION"),
        core_version: bozk_core::VERSION,
        command: ctx.config.command,
        config_sha256: &ctx.config_sha256,
        seed: ctx.config.seed,
        force: ctx.force,
        jobs: ctx.jobs,
        config: &ctx.config,
    };
    write_json(&ctx.out.join("manifest.json"), &m).map_err(fail)
}

fn run_classify(ctx: &Context) -> Result<(), Failure> {
    let c = classify(&ctx.config.params);
    println!("{}", serde_json::to_string(&c).expect("classification serializes"));
    write_json(&ctx.out.join("classification.json"), &c).map_err(fail)
}

#[derive(Serialize)]
struct WaveRecord {
    diagnostics: WaveDiagnostics,
    symmetry: SymmetryReport,
    decay: Option<WaveDecay>,
    decay_error: Option<String>,
}

/// Writes `wave.json` and `wave.bozk` into `dir`.
fn write_wave(dir: &Path, w: &SolitaryWave) -> bozk_core::Result<()> {
    let (decay, decay_error) = match wave_decay_report(w) {
        Ok(d) => (Some(d), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let record = WaveRecord {
        diagnostics: w.diagnostics(),
        symmetry: symmetry_report(w),
        decay,
        decay_error,
    };
    write_json(&dir.join("wave.json"), &record)?;
    write_field(dir.join("wave.bozk"), &w.profile, &w.params)
}

/// Solves and records the wave; non-converged diagnostics are written too.
fn solve_wave(params: &Params, grid: &Grid2D, opts: &SolveOptions, dir: &Path) -> bozk_core::Result<SolitaryWave> {
    match petviashvili_solve(params, grid, opts) {
        Ok(w) => {
            write_wave(dir, &w)?;
            Ok(w)
        }
        Err(e) => {
            if let Error::NotConverged { wave, .. } = &e {
                write_wave(dir, wave)?;
            }
            Err(e)
        }
    }
}

fn solve_into(ctx: &Context, params: &Params, dir: &Path) -> Result<SolitaryWave, Failure> {
    solve_wave(params, &ctx.grid(), &ctx.solve_options(), dir).map_err(fail)
}

fn write_series(path: &Path, r: &EvolveReport) -> bozk_core::Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(to_io)?;
    w.write_record(["t", "mass_drift", "energy_drift", "orbital_distance"])
        .map_err(to_io)?;
    for (k, t) in r.times.iter().enumerate() {
        let dist = r
            .orbital_distance
            .get(k)
            .map(|d| d.to_string())
            .unwrap_or_default();
        w.write_record([
            t.to_string(),
            r.mass_drift[k].to_string(),
            r.energy_drift[k].to_string(),
            dist,
        ])
        .map_err(to_io)?;
    }
    w.flush()?;
    Ok(())
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

#[derive(Serialize)]
struct EvolveSummary {
    dt: f64,
    steps: usize,
    samples: usize,
    dealias_rule: String,
    max_mass_drift: f64,
    max_energy_drift: f64,
    max_orbital_distance: Option<f64>,
}

impl EvolveSummary {
    fn new(r: &EvolveReport) -> Self {
        Self {
            dt: r.dt,
            steps: r.steps,
            samples: r.times.len(),
            dealias_rule: r.dealias_rule.clone(),
            max_mass_drift: max_abs(&r.mass_drift),
            max_energy_drift: max_abs(&r.energy_drift),
            max_orbital_distance: (!r.orbital_distance.is_empty()).then(|| max_abs(&r.orbital_distance)),
        }
    }
}

/// Writes the time series of a finished run, or of a blown-up one before failing.
fn finish_series(dir: &Path, result: bozk_core::Result<EvolveReport>) -> Result<EvolveReport, Failure> {
    match result {
        Ok(r) => {
            write_series(&dir.join("timeseries.csv"), &r).map_err(fail)?;
            Ok(r)
        }
        Err(e) => {
            if let Error::BlowUp { report, .. } = &e {
                write_series(&dir.join("timeseries.csv"), report).map_err(fail)?;
            }
            Err(fail(e))
        }
    }
}

fn run_evolve(ctx: &Context) -> Result<(), Failure> {
    let e = ctx.config.evolve.as_ref().expect("validated: evolve block");
    let params = ctx.config.params;
    let (u0, reference) = match &e.initial {
        Some(path) => {
            let (f, _) = read_field(path).map_err(fail)?;
            if *f.grid() != ctx.grid() {
                return Err(Failure::config(format!(
                    "initial field grid {:?} differs from the configured grid",
                    f.grid()
                )));
            }
            (f, None)
        }
        None => {
            let w = solve_into(ctx, &params, &ctx.out)?;
            (w.profile.clone(), Some(w.profile))
        }
    };
    let opts = EvolveOptions {
        dealias: e.dealias,
        record_every: e.record_every,
        reverse: false,
        reference,
    };
    let snap_dir = ctx.out.join("snapshots");
    if e.snapshot_every > 0 {
        fs::create_dir_all(&snap_dir).map_err(|err| fail(err.into()))?;
    }
    let mut sample = 0usize;
    let mut observer = |_t: f64, u: &bozk_core::Field| {
        if e.snapshot_every > 0 && sample.is_multiple_of(e.snapshot_every) {
            write_field(snap_dir.join(format!("snap_{sample:06}.bozk")), u, &params)?;
        }
        sample += 1;
        Ok(())
    };
    let result = evolve_observed(&u0, &params, e.dt, e.t_end, &opts, &mut observer);
    let report = finish_series(&ctx.out, result)?;
    write_field(ctx.out.join("final.bozk"), &report.final_field, &params).map_err(fail)?;
    write_json(&ctx.out.join("evolve.json"), &EvolveSummary::new(&report)).map_err(fail)
}

#[derive(Serialize)]
struct StabilitySummary {
    seed: u64,
    perturbation: f64,
    wave_znorm: f64,
    initial_distance: f64,
    max_distance: f64,
    final_distance: f64,
    growth: f64,
    evolve: EvolveSummary,
}

fn run_stability(ctx: &Context) -> Result<(), Failure> {
    let st = ctx.config.stability.as_ref().expect("validated: stability block");
    let wave = solve_into(ctx, &ctx.config.params, &ctx.out)?;
    let opts = EvolveOptions {
        dealias: st.dealias,
        record_every: st.record_every,
        ..EvolveOptions::default()
    };
    let result = stability_experiment(&wave, st.perturbation, st.t_end, st.dt, ctx.config.seed, &opts);
    let report = finish_series(&ctx.out, result)?;
    let d = &report.orbital_distance;
    let initial = d.first().copied().unwrap_or(0.0);
    let max = max_abs(d);
    let summary = StabilitySummary {
        seed: ctx.config.seed,
        perturbation: st.perturbation,
        wave_znorm: znorm(&wave.profile),
        initial_distance: initial,
        max_distance: max,
        final_distance: d.last().copied().unwrap_or(0.0),
        growth: if initial > 0.0 { max / initial } else { f64::NAN },
        evolve: EvolveSummary::new(&report),
    };
    write_field(ctx.out.join("final.bozk"), &report.final_field, &wave.params).map_err(fail)?;
    write_json(&ctx.out.join("stability.json"), &summary).map_err(fail)
}

#[derive(Serialize)]
struct KernelRecord {
    params: Params,
    grid: Grid2D,
    decay: Option<KernelDecayFit>,
    decay_error: Option<String>,
    cross_validation: Option<CrossValidation>,
    cross_validation_error: Option<String>,
}

/// Up to `n` grid indices with `1 <= |x|, |y| <= 5`, spread evenly over the candidates.
fn sample_points(grid: &Grid2D, n: usize) -> Vec<(usize, usize)> {
    let near = |v: f64| (1.0..=5.0).contains(&v.abs());
    let mut cand = Vec::new();
    for i in 0..grid.nx() {
        for j in 0..grid.ny() {
            if near(grid.x(i)) && near(grid.y(j)) {
                cand.push((i, j));
            }
        }
    }
    if n == 0 || cand.is_empty() {
        return Vec::new();
    }
    let n = n.min(cand.len());
    (0..n).map(|k| cand[k * cand.len() / n]).collect()
}

fn run_kernel(ctx: &Context) -> Result<(), Failure> {
    let params = ctx.config.params;
    let grid = ctx.grid();
    let spec = KernelSpec::new(params).map_err(fail)?;
    let k = kernel_field(&spec, &grid);
    write_field(ctx.out.join("kernel.bozk"), &k, &params).map_err(fail)?;
    let (decay, decay_error) = match kernel_decay_fit(&spec, &grid) {
        Ok(d) => (Some(d), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let kc = &ctx.config.kernel;
    let (cross_validation, cross_validation_error) = if kc.points == 0 {
        (None, None)
    } else {
        let pts = sample_points(&grid, kc.points);
        match cross_validate(&spec, &grid, &pts, kc.quad_tol, kc.x_images) {
            Ok(cv) => (Some(cv), None),
            Err(e) => (None, Some(e.to_string())),
        }
    };
    let record = KernelRecord {
        params,
        grid,
        decay,
        decay_error,
        cross_validation,
        cross_validation_error,
    };
    write_json(&ctx.out.join("kernel.json"), &record).map_err(fail)
}

#[derive(Serialize)]
struct SweepSummary {
    p: f64,
    c_values: Vec<f64>,
    d_values: Vec<f64>,
    slope: f64,
    target: f64,
    relative_error: f64,
}

/// One sweep job: solves at speed `c` inside its own directory.
fn sweep_job(params: Params, grid: Grid2D, opts: SolveOptions, dir: PathBuf) -> bozk_core::Result<f64> {
    fs::create_dir_all(&dir)?;
    let w = solve_wave(&params, &grid, &opts, &dir)?;
    d_value(&w.profile, &params)
}

fn run_sweep(ctx: &Context) -> Result<(), Failure> {
    let cs = &ctx.config.sweep.as_ref().expect("validated: sweep block").c_values;
    let base = ctx.config.params;
    let grid = ctx.grid();
    let jobs = ctx.jobs.clamp(1, cs.len());
    let mut results: Vec<(usize, bozk_core::Result<f64>)> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..jobs)
            .map(|t| {
                let opts = ctx.solve_options();
                let out = ctx.out.clone();
                s.spawn(move || {
                    (t..cs.len())
                        .step_by(jobs)
                        .map(|idx| {
                            let dir = out.join(format!("job_{idx:03}"));
                            let r = sweep_job(base.with_c(cs[idx]), grid, opts.clone(), dir);
                            (idx, r)
                        })
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("sweep job panicked"))
            .collect()
    });
    results.sort_by_key(|(idx, _)| *idx);

    let mut curve = Vec::with_capacity(cs.len());
    let mut first_error = None;
    for (idx, r) in results {
        match r {
            Ok(d) => curve.push((cs[idx], d)),
            Err(e) => {
                first_error.get_or_insert(Error::Sweep {
                    c: cs[idx],
                    source: Box::new(e),
                });
            }
        }
    }
    write_dc(&ctx.out.join("dc.csv"), &curve).map_err(fail)?;
    if let Some(e) = first_error {
        return Err(fail(e));
    }
    let slope = loglog_slope(&curve).map_err(fail)?;
    let target = 2.0 / base.p - 0.5;
    let summary = SweepSummary {
        p: base.p,
        c_values: curve.iter().map(|x| x.0).collect(),
        d_values: curve.iter().map(|x| x.1).collect(),
        slope,
        target,
        relative_error: ((slope - target) / target).abs(),
    };
    write_json(&ctx.out.join("summary.json"), &summary).map_err(fail)
}

fn write_dc(path: &Path, curve: &[(f64, f64)]) -> bozk_core::Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(to_io)?;
    w.write_record(["c", "d"]).map_err(to_io)?;
    for (c, d) in curve {
        w.write_record([c.to_string(), d.to_string()]).map_err(to_io)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sample_points_stay_in_the_annulus() {
        let g = Grid2D::new(128, 64, 20.0, 10.0).unwrap();
        let pts = sample_points(&g, 20);
        assert_eq!(pts.len(), 20);
        for (i, j) in pts {
            assert!((1.0..=5.0).contains(&g.x(i).abs()));
            assert!((1.0..=5.0).contains(&g.y(j).abs()));
        }
        assert!(sample_points(&g, 0).is_empty());
    }

    #[test]
    fn hex_digest() {
        assert_eq!(hex(&[0, 15, 255]), "000fff");
    }
}
