use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand};
use rayon::prelude::*;

use fl_core::dynamics::{trace_from, DynamicsOptions, PiSpectrum, SurvivalTrace};
use fl_core::error::FlError;
use fl_core::inverse::{design_form_factor, verify_design, VERIFY_INTERVALS};
use fl_core::measure::Interval;
use fl_core::resonance::{continuation_family, find_resonances, Rect, Resonance};
use fl_core::schema::{
    sigma_csv, to_versioned_json, FormFactorDoc, ModelDoc, ModelInput, ModelSpecDoc, SigmaRow,
    VerificationDoc, SCHEMA_VERSION,
};
use fl_core::selfenergy::{sigma_boundary_with, SigmaOptions};
use fl_core::spectral::{classify_model, classify_with, SpectralOptions};

mod oracles;

#[derive(Parser, Debug)]
#[command(
    name = "flee",
    version,
    about = "Spectral analysis of Friedrichs-Lee Hamiltonians"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    opts: Opts,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq)]
enum Command {
    /// Spectral classification in a window (report.json)
    Classify,
    /// Boundary values of the self-energy on the window grid (sigma.csv)
    SelfEnergy,
    /// Survival amplitude of the excited atom (survival.csv)
    Evolve,
    /// Second-sheet resonances (resonances.json)
    Resonances,
    /// Form factor for a target coupling measure (formfactor.json)
    Design,
    /// Run the built-in oracle table
    VerifyExamples,
}

#[derive(clap::Args, Debug, Clone)]
struct Opts {
    /// Model-spec document
    #[arg(long, global = true)]
    model: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0.0, allow_hyphen_values = true)]
    epsilon: f64,
    /// Spectral window as `a,b`
    #[arg(long, global = true, default_value = "-50,50", value_parser = parse_window, allow_hyphen_values = true)]
    window: (f64, f64),
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    #[arg(long = "tol-quad", global = true, default_value_t = 1e-9)]
    tol_quad: f64,
    #[arg(long = "tol-root", global = true, default_value_t = 1e-10)]
    tol_root: f64,
    #[arg(long, global = true, default_value_t = 2048)]
    grid: usize,
    #[arg(long = "t-max", global = true, default_value_t = 10.0)]
    t_max: f64,
    #[arg(long = "t-steps", global = true, default_value_t = 101)]
    t_steps: usize,
    /// Resonance search rectangle `re0,re1,im0,im1`; defaults to the window times [-10, 0]
    #[arg(long, global = true, value_parser = parse_rect, allow_hyphen_values = true)]
    rect: Option<Rect>,
    /// Newton seeds per side of the resonance rectangle
    #[arg(long, global = true, default_value_t = 8)]
    seeds: usize,
}

fn parse_list(s: &str, n: usize) -> Result<Vec<f64>, String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|e| format!("'{x}': {e}")))
        .collect::<Result<_, _>>()?;
    if v.len() != n {
        return Err(format!(
            "expected {n} comma-separated numbers, got {}",
            v.len()
        ));
    }
    Ok(v)
}

fn parse_window(s: &str) -> Result<(f64, f64), String> {
    let v = parse_list(s, 2)?;
    Ok((v[0], v[1]))
}

fn parse_rect(s: &str) -> Result<Rect, String> {
    let v = parse_list(s, 4)?;
    Ok(Rect {
        re: (v[0], v[1]),
        im: (v[2], v[3]),
    })
}

/// Failure classes mapped to exit codes.
enum Failure {
    Validation(anyhow::Error),
    Numerical(anyhow::Error),
}

impl From<FlError> for Failure {
    fn from(e: FlError) -> Self {
        match e {
            FlError::QuadratureFailure { .. }
            | FlError::NonConvergent { .. }
            | FlError::NotAnEigenvalue { .. }
            | FlError::NoContinuation(_)
            | FlError::WindowInsideAcSupport { .. } => Failure::Numerical(e.into()),
            _ => Failure::Validation(e.into()),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Validation(e)
    }
}

type Run<T> = Result<T, Failure>;

impl Opts {
    fn validate(&self) -> anyhow::Result<Interval> {
        let (a, b) = self.window;
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(anyhow!("window must be finite with a < b, got {a},{b}"));
        }
        for (name, v) in [
            ("tol-quad", self.tol_quad),
            ("tol-root", self.tol_root),
            ("t-max", self.t_max),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(anyhow!("--{name} must be positive, got {v}"));
            }
        }
        if self.grid < 2 || self.t_steps < 1 {
            return Err(anyhow!("--grid must be ≥ 2 and --t-steps ≥ 1"));
        }
        if !self.epsilon.is_finite() {
            return Err(anyhow!("--epsilon must be finite"));
        }
        Ok(Interval { lo: a, hi: b })
    }

    fn sigma(&self) -> SigmaOptions {
        SigmaOptions::with_abs_tol(self.tol_quad)
    }

    fn spectral(&self) -> SpectralOptions {
        SpectralOptions {
            grid_n: self.grid,
            root_tol: self.tol_root,
            sigma: self.sigma(),
            ..SpectralOptions::default()
        }
    }
}

fn read_doc(opts: &Opts) -> anyhow::Result<ModelSpecDoc> {
    let path = opts
        .model
        .as_ref()
        .ok_or_else(|| anyhow!("--model is required"))?;
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(ModelSpecDoc::parse(&text)?)
}

fn write(out: &Path, name: &str, text: &str) -> anyhow::Result<PathBuf> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let p = out.join(name);
    fs::write(&p, text).with_context(|| format!("writing {}", p.display()))?;
    Ok(p)
}

fn classify(opts: &Opts, window: Interval) -> Run<()> {
    let input = read_doc(opts)?.input()?;
    let report = match &input {
        ModelInput::Measure(k) => classify_with(k, opts.epsilon, window, &opts.spectral())?,
        ModelInput::Model(m) => classify_model(m, opts.epsilon, window, &opts.spectral())?,
    };
    let p = write(&opts.out, "report.json", &to_versioned_json(&report))?;
    println!(
        "ac intervals: {}  eigenvalues: {}  sc flags: {}",
        report.ac_intervals.len(),
        report.pp_points.len(),
        report.sc_flags.len()
    );
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    println!("wrote {}", p.display());
    Ok(())
}

fn self_energy(opts: &Opts, window: Interval) -> Run<()> {
    let kappa = read_doc(opts)?.input()?.coupling()?;
    let n = opts.grid;
    let sopts = opts.sigma();
    let rows: Vec<SigmaRow> = (0..n)
        .into_par_iter()
        .map(|i| {
            let l = window.lo + (window.hi - window.lo) * i as f64 / (n - 1) as f64;
            sigma_boundary_with(&kappa, l, &sopts).map(|b| SigmaRow {
                lambda: l,
                re: b.sigma_plus.re,
                im: b.sigma_plus.im,
                im_divergent: b.sigma_plus.im_divergent,
                log_singular: b.sigma_plus.log_singular,
            })
        })
        .collect::<Result<_, _>>()?;
    let p = write(&opts.out, "sigma.csv", &sigma_csv(&rows))?;
    println!("wrote {} ({} rows)", p.display(), rows.len());
    Ok(())
}

fn evolve(opts: &Opts) -> Run<()> {
    let kappa = read_doc(opts)?.input()?.coupling()?;
    let dopts = DynamicsOptions {
        sigma: opts.sigma(),
        pole_grid: opts.grid,
        ..DynamicsOptions::default()
    };
    let spec = PiSpectrum::new(&kappa, opts.epsilon, &dopts)?;
    let steps = opts.t_steps;
    let times: Vec<f64> = (0..steps)
        .map(|i| {
            if steps == 1 {
                0.0
            } else {
                opts.t_max * i as f64 / (steps - 1) as f64
            }
        })
        .collect();
    // one trace per chunk keeps each worker on its own slice of times
    let chunk = times.len().div_ceil(rayon::current_num_threads()).max(1);
    let parts: Vec<SurvivalTrace> = times
        .par_chunks(chunk)
        .map(|ts| trace_from(&spec, ts))
        .collect::<Result<_, _>>()?;
    let mut trace = parts[0].clone();
    for p in &parts[1..] {
        trace.times.extend(&p.times);
        trace.amplitudes.extend(&p.amplitudes);
        trace.quadrature_error.extend(&p.quadrature_error);
    }
    let p = write(&opts.out, "survival.csv", &trace.to_csv())?;
    write(&opts.out, "survival.json", &to_versioned_json(&trace))?;
    if trace.approximate {
        eprintln!("warning: trace is approximate");
    }
    for w in &trace.warnings {
        eprintln!("warning: {w}");
    }
    println!("wrote {} ({} samples)", p.display(), trace.times.len());
    Ok(())
}

#[derive(serde::Serialize)]
struct ResonanceDoc {
    #[serde(with = "fl_core::schema::num")]
    epsilon: f64,
    rect: Rect,
    resonances: Vec<Resonance>,
}

fn resonances(opts: &Opts, window: Interval) -> Run<()> {
    let kappa = read_doc(opts)?.input()?.coupling()?;
    let family = continuation_family(&kappa)?;
    let rect = opts.rect.unwrap_or(Rect {
        re: (window.lo, window.hi),
        im: (-10.0, 0.0),
    });
    let res = find_resonances(family, opts.epsilon, rect, opts.seeds)?;
    let doc = ResonanceDoc {
        epsilon: opts.epsilon,
        rect,
        resonances: res,
    };
    let p = write(&opts.out, "resonances.json", &to_versioned_json(&doc))?;
    for r in &doc.resonances {
        println!(
            "z0 = {} {:+}i  residual {:.1e}",
            r.z0.re, r.z0.im, r.residual
        );
    }
    println!("wrote {}", p.display());
    Ok(())
}

fn design(opts: &Opts) -> Run<()> {
    let doc = read_doc(opts)?;
    let d = doc
        .design
        .as_ref()
        .ok_or_else(|| anyhow!("document has no 'design' block"))?;
    let spec = d.to_spec()?;
    let designed = design_form_factor(&spec)?;
    let deviation = verify_design(&spec, &designed)?;
    let g = d.grid.unwrap_or(fl_core::schema::GridDoc {
        lo: -10.0,
        hi: 10.0,
        n: 401,
    });
    if !(g.lo < g.hi) || g.n < 2 {
        return Err(Failure::Validation(anyhow!(
            "design grid needs lo < hi and n ≥ 2"
        )));
    }
    let grid: Vec<f64> = (0..g.n)
        .map(|i| g.lo + (g.hi - g.lo) * i as f64 / (g.n - 1) as f64)
        .filter(|k| spec.pieces.iter().any(|p| p.domain.contains(*k)))
        .collect();
    let values = designed.tabulate(&grid);
    let out = ModelSpecDoc {
        schema: SCHEMA_VERSION,
        measure: None,
        model: Some(ModelDoc {
            geometry: d.geometry,
            dispersion: d.dispersion.clone(),
            form_factor: FormFactorDoc::Tabulated { grid, values },
            mu: None,
        }),
        design: None,
        verification: Some(VerificationDoc {
            max_relative_deviation: deviation,
            intervals: VERIFY_INTERVALS,
        }),
    };
    let p = write(&opts.out, "formfactor.json", &out.to_json())?;
    println!("verification deviation: {deviation:.3e}");
    println!("wrote {}", p.display());
    Ok(())
}

fn run(cli: &Cli) -> Run<()> {
    let window = cli.opts.validate()?;
    match cli.command {
        Command::Classify => classify(&cli.opts, window),
        Command::SelfEnergy => self_energy(&cli.opts, window),
        Command::Evolve => evolve(&cli.opts),
        Command::Resonances => resonances(&cli.opts, window),
        Command::Design => design(&cli.opts),
        Command::VerifyExamples => {
            let rows = oracles::run_all();
            print!("{}", oracles::table(&rows));
            if rows.iter().all(|r| r.pass) {
                Ok(())
            } else {
                Err(Failure::Numerical(anyhow!("oracle failures")))
            }
        }
    }
}

fn init_pool() {
    if let Some(n) = std::env::var("FL_WORKERS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
    {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global();
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_pool();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Numerical(e)) => {
            let diag = serde_json::json!({
                "schema": SCHEMA_VERSION,
                "command": format!("{:?}", cli.command),
                "error": format!("{e:#}"),
            });
            let text = serde_json::to_string_pretty(&diag).unwrap_or_default();
            eprintln!("{text}");
            let _ = write(&cli.opts.out, "error.json", &text);
            ExitCode::from(2)
        }
    }
}
