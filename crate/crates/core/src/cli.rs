use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use fedgame::config::RunConfigFile;
use fedgame::empirics::{
    fit_duration_model, fit_energy_linear, load_empirical_table, read_rows_csv, write_rows_csv,
    DurationModel, EmpiricalRow, FitMode, TableKind, DEFAULT_DEGREE, DEFAULT_RESAMPLES,
};
use fedgame::energy::{
    airtime_breakdown, calibrate_energy_params, dbm_to_watts, EnergyParams, WifiParams, BITS_PER_MB,
};
use fedgame::game::{
    price_of_anarchy, solve_social_optimum, solve_symmetric_ne, sweep, GameConfig,
};
use fedgame::pbdist::ProbabilityProfile;
use fedgame::simulate::{default_max_rounds, monte_carlo, ConvergenceMode, SimConfig};
use fedgame::Error;

const DEFAULT_N: usize = 50;
const DEFAULT_SIM_P: f64 = 0.5;
const DEFAULT_REPS: usize = 100;

#[derive(Debug, Parser)]
#[command(
    name = "fedgame",
    version,
    about = "Participation game for energy-aware federated learning"
)]
pub struct Cli {
    /// TOML run configuration
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Master seed for resampled fits and simulation
    #[arg(long, global = true, value_name = "U64")]
    pub seed: Option<u64>,
    /// Write output here instead of stdout
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Measurement tables
    #[command(subcommand)]
    Data(DataCommand),
    /// Fit the duration polynomial and energy line
    Fit(FitArgs),
    /// Equilibria, social optimum and Price of Anarchy for one (c, gamma)
    Solve(SolveArgs),
    /// Solve over a (c, gamma) grid
    Sweep(SweepArgs),
    /// Monte-Carlo simulation of training runs
    Simulate(SimulateArgs),
    /// Upload airtime and transmit energy
    Airtime(AirtimeArgs),
    /// Fit the training hardware power on measured energies
    Calibrate(CalibrateArgs),
}

#[derive(Debug, Subcommand)]
pub enum DataCommand {
    /// Export an embedded table as CSV
    Export {
        #[arg(long, default_value = "averaged")]
        table: TableKind,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FitModeArg {
    Wls,
    Resample,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SimModeArg {
    Static,
    Progress,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Number of nodes
    #[arg(long)]
    pub n: Option<usize>,
    /// Degree of the duration polynomial
    #[arg(long)]
    pub degree: Option<usize>,
    /// Fitting method
    #[arg(long = "fit-mode", value_enum)]
    pub fit_mode: Option<FitModeArg>,
    /// Normal draws per row in resample mode
    #[arg(long)]
    pub resamples: Option<usize>,
    /// Embedded table to fit on
    #[arg(long)]
    pub table: Option<TableKind>,
    /// CSV in the `data export` schema, instead of an embedded table
    #[arg(long, value_name = "PATH")]
    pub data: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Fitting method (same as --fit-mode)
    #[arg(long, value_enum, conflicts_with = "fit_mode")]
    pub mode: Option<FitModeArg>,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[arg(long, allow_negative_numbers = true)]
    pub c: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub gamma: Option<f64>,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Explicit cost values, comma separated
    #[arg(long, value_delimiter = ',', conflicts_with_all = ["c_min", "c_max", "c_step"])]
    pub c: Option<Vec<f64>>,
    #[arg(long, default_value_t = 0.0)]
    pub c_min: f64,
    #[arg(long, default_value_t = 5.0)]
    pub c_max: f64,
    #[arg(long, default_value_t = 0.1)]
    pub c_step: f64,
    /// Explicit incentive weights, comma separated
    #[arg(long, value_delimiter = ',', conflicts_with_all = ["gamma_min", "gamma_max", "gamma_step"])]
    pub gamma: Option<Vec<f64>>,
    #[arg(long, default_value_t = 0.0)]
    pub gamma_min: f64,
    #[arg(long, default_value_t = 1.5)]
    pub gamma_max: f64,
    #[arg(long, default_value_t = 0.1)]
    pub gamma_step: f64,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Symmetric participation probability
    #[arg(long, conflicts_with = "profile")]
    pub p: Option<f64>,
    /// Per-node probabilities, comma separated
    #[arg(long, value_delimiter = ',')]
    pub profile: Option<Vec<f64>>,
    #[arg(long)]
    pub reps: Option<usize>,
    /// Convergence model
    #[arg(long, value_enum)]
    pub mode: Option<SimModeArg>,
    #[arg(long)]
    pub max_rounds: Option<usize>,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Args)]
pub struct AirtimeArgs {
    /// Model size in megabytes (10^6 bytes)
    #[arg(long)]
    pub size_mb: Option<f64>,
    /// Transmit power in dBm
    #[arg(long, allow_negative_numbers = true)]
    pub ptx_dbm: Option<f64>,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    #[arg(long)]
    pub n: Option<usize>,
    /// Embedded table to calibrate on
    #[arg(long)]
    pub table: Option<TableKind>,
    #[arg(long, value_name = "PATH")]
    pub data: Option<PathBuf>,
}

struct Ctx<'a> {
    file: RunConfigFile,
    seed: u64,
    out: Option<&'a Path>,
}

impl Ctx<'_> {
    fn writer(&self) -> Result<Box<dyn Write>> {
        Ok(match self.out {
            Some(path) => Box::new(BufWriter::new(
                File::create(path).with_context(|| format!("cannot create {}", path.display()))?,
            )),
            None => Box::new(BufWriter::new(io::stdout().lock())),
        })
    }

    fn n(&self, flag: Option<usize>) -> usize {
        flag.or(self.file.game.n).unwrap_or(DEFAULT_N)
    }

    fn rows(&self, table: Option<TableKind>, data: Option<&Path>) -> Result<Vec<EmpiricalRow>> {
        match data {
            Some(path) => {
                let f =
                    File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
                read_rows_csv(f).with_context(|| path.display().to_string())
            }
            None => Ok(load_empirical_table(
                table
                    .or(self.file.game.table)
                    .unwrap_or(TableKind::Averaged),
            )),
        }
    }

    fn model(
        &self,
        args: &ModelArgs,
        mode: Option<FitModeArg>,
    ) -> Result<(DurationModel, Vec<EmpiricalRow>)> {
        let rows = self.rows(args.table, args.data.as_deref())?;
        let n = self.n(args.n);
        let degree = args
            .degree
            .or(self.file.game.degree)
            .unwrap_or(DEFAULT_DEGREE);
        let mode = match mode.or(args.fit_mode) {
            Some(FitModeArg::Wls) => FitMode::DeterministicWls,
            Some(FitModeArg::Resample) => FitMode::StochasticResample {
                seed: self.seed,
                samples_per_row: args
                    .resamples
                    .or(self.file.game.resample_count)
                    .unwrap_or(DEFAULT_RESAMPLES),
            },
            None => match self.file.fit_mode(self.seed) {
                FitMode::StochasticResample { seed, .. } if args.resamples.is_some() => {
                    FitMode::StochasticResample {
                        seed,
                        samples_per_row: args.resamples.unwrap(),
                    }
                }
                m => m,
            },
        };
        let mut dm = fit_duration_model(&rows, n, degree, mode)?;
        if let Some(cap) = self.file.game.d_cap {
            dm = dm.with_d_cap(cap)?;
        }
        Ok((dm, rows))
    }

    fn game(&self, args: &ModelArgs) -> Result<GameConfig> {
        let (dm, _) = self.model(args, None)?;
        let g = &self.file.game;
        let mut cfg = GameConfig::new(
            self.n(args.n),
            g.c.unwrap_or(0.0),
            g.gamma.unwrap_or(0.0),
            dm,
        );
        if let Some(v) = g.grid_points {
            cfg.grid_points = v;
        }
        if let Some(v) = g.refine_tol {
            cfg.refine_tol = v;
        }
        if let Some(v) = g.p_min {
            cfg.p_min = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let file = match &cli.config {
        Some(path) => RunConfigFile::load(path).with_context(|| path.display().to_string())?,
        None => RunConfigFile::default(),
    };
    let seed = cli.seed.or(file.game.seed).unwrap_or(0);
    let ctx = Ctx {
        file,
        seed,
        out: cli.out.as_deref(),
    };
    match &cli.command {
        Command::Data(DataCommand::Export { table }) => {
            let mut w = ctx.writer()?;
            write_rows_csv(&load_empirical_table(*table), &mut w)?;
            w.flush()?;
        }
        Command::Fit(args) => cmd_fit(&ctx, args)?,
        Command::Solve(args) => cmd_solve(&ctx, args)?,
        Command::Sweep(args) => cmd_sweep(&ctx, args)?,
        Command::Simulate(args) => cmd_simulate(&ctx, args)?,
        Command::Airtime(args) => cmd_airtime(&ctx, args)?,
        Command::Calibrate(args) => cmd_calibrate(&ctx, args)?,
    }
    Ok(())
}

fn csv_writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

fn residuals_path(out: &Path) -> PathBuf {
    let stem = out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    out.with_file_name(format!("{stem}.residuals.csv"))
}

fn cmd_fit(ctx: &Ctx, args: &FitArgs) -> Result<()> {
    let (dm, rows) = ctx.model(&args.model, args.mode)?;
    let line = fit_energy_linear(&rows).ok();

    let mut w = ctx.writer()?;
    {
        let mut csv = csv_writer(&mut w);
        csv.write_record(["model", "term", "value"])?;
        for (j, c) in dm.coefficients().iter().enumerate() {
            csv.write_record(["duration", &format!("k^{j}"), &format!("{c:.12e}")])?;
        }
        csv.write_record(["duration", "d_floor", &format!("{}", dm.d_floor())])?;
        csv.write_record(["duration", "d_cap", &format!("{}", dm.d_cap())])?;
        if let Some(l) = line {
            csv.write_record(["energy", "wh_per_round", &format!("{:.12e}", l.slope)])?;
            csv.write_record(["energy", "intercept_wh", &format!("{:.12e}", l.intercept)])?;
        }
        csv.flush()?;
    }

    let write_residuals = |w: &mut dyn Write| -> Result<()> {
        let mut csv = csv_writer(w);
        csv.write_record(["p", "k", "observed", "fitted", "residual", "sigma"])?;
        for r in dm.residuals(&rows)? {
            csv.write_record([
                format!("{:.3}", r.p),
                format!("{:.3}", r.k),
                format!("{:.2}", r.observed),
                format!("{:.6}", r.fitted),
                format!("{:.6}", r.residual),
                format!("{:.2}", r.sigma),
            ])?;
        }
        csv.flush()?;
        Ok(())
    };
    match ctx.out {
        Some(out) => {
            let path = residuals_path(out);
            let mut f = BufWriter::new(
                File::create(&path).with_context(|| format!("cannot create {}", path.display()))?,
            );
            write_residuals(&mut f)?;
            f.flush()?;
        }
        None => {
            writeln!(w)?;
            write_residuals(&mut w)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn cmd_solve(ctx: &Ctx, args: &SolveArgs) -> Result<()> {
    let base = ctx.game(&args.model)?;
    let cfg = base.with_costs(args.c.unwrap_or(base.c), args.gamma.unwrap_or(base.gamma));
    cfg.validate()?;
    let mut w = ctx.writer()?;
    writeln!(w, "n = {}", cfg.n)?;
    writeln!(w, "c = {}", cfg.c)?;
    writeln!(w, "gamma = {}", cfg.gamma)?;
    let ne_set = match solve_symmetric_ne(&cfg) {
        Ok(set) => set,
        Err(Error::NoEquilibrium) => Vec::new(),
        Err(e) => return Err(e.into()),
    };
    if ne_set.is_empty() {
        writeln!(w, "ne = none")?;
    }
    for (i, ne) in ne_set.iter().enumerate() {
        writeln!(
            w,
            "ne[{i}] p = {:.6} utility = {:.6} kind = {}",
            ne.p_star,
            ne.utility_at_ne,
            ne.kind.as_str()
        )?;
    }
    match price_of_anarchy(&cfg) {
        Ok(rep) => {
            let opt_u = -rep.cost_optimum;
            writeln!(w, "optimum p = {:.6} utility = {:.6}", rep.p_opt, opt_u)?;
            writeln!(
                w,
                "worst_ne p = {:.6} utility = {:.6}",
                rep.p_worst_ne, -rep.cost_worst_ne
            )?;
            writeln!(w, "poa = {:.6}", rep.poa)?;
        }
        Err(Error::UndefinedPoa(why)) | Err(Error::InvalidConfig(why)) => {
            let opt = solve_social_optimum(&cfg)?;
            writeln!(
                w,
                "optimum p = {:.6} utility = {:.6}",
                opt.p_opt, opt.utility
            )?;
            writeln!(w, "poa = undefined ({why})")?;
        }
        Err(Error::NoEquilibrium) => {
            let opt = solve_social_optimum(&cfg)?;
            writeln!(
                w,
                "optimum p = {:.6} utility = {:.6}",
                opt.p_opt, opt.utility
            )?;
            writeln!(w, "poa = undefined (no equilibrium)")?;
        }
        Err(e) => return Err(e.into()),
    }
    w.flush()?;
    Ok(())
}

/// `min, min + step, ...` up to `max` inclusive, snapped to 1e-9.
fn grid(min: f64, max: f64, step: f64, name: &str) -> Result<Vec<f64>> {
    let ok = step > 0.0 && max >= min && min.is_finite() && max.is_finite();
    if !ok {
        bail!("{name} grid needs finite min <= max and step > 0");
    }
    let count = ((max - min) / step + 1e-9).floor() as usize + 1;
    Ok((0..count)
        .map(|i| ((min + i as f64 * step) * 1e9).round() / 1e9)
        .collect())
}

fn cmd_sweep(ctx: &Ctx, args: &SweepArgs) -> Result<()> {
    let cfg = ctx.game(&args.model)?;
    let cs = match &args.c {
        Some(v) => v.clone(),
        None => grid(args.c_min, args.c_max, args.c_step, "c")?,
    };
    let gammas = match &args.gamma {
        Some(v) => v.clone(),
        None => grid(args.gamma_min, args.gamma_max, args.gamma_step, "gamma")?,
    };
    let rows = sweep(&cfg, &cs, &gammas)?;
    let mut w = ctx.writer()?;
    let mut csv = csv_writer(&mut w);
    csv.write_record([
        "c", "gamma", "p_ne", "p_opt", "u_ne", "u_opt", "poa", "flags",
    ])?;
    for r in &rows {
        let flags: Vec<&str> = r.flags.iter().map(|f| f.as_str()).collect();
        csv.write_record([
            format!("{}", r.c),
            format!("{}", r.gamma),
            fmt_opt(r.p_ne),
            fmt_opt(r.p_opt),
            fmt_opt(r.u_ne),
            fmt_opt(r.u_opt),
            fmt_opt(r.poa),
            flags.join(";"),
        ])?;
    }
    csv.flush()?;
    drop(csv);
    w.flush()?;
    Ok(())
}

fn cmd_simulate(ctx: &Ctx, args: &SimulateArgs) -> Result<()> {
    let (dm, _) = ctx.model(&args.model, None)?;
    let n = ctx.n(args.model.n);
    let profile = match &args.profile {
        Some(probs) => {
            if probs.len() != n && args.model.n.is_some() {
                bail!("--profile has {} entries but --n is {n}", probs.len());
            }
            ProbabilityProfile::new(probs.clone())?
        }
        None => {
            ProbabilityProfile::symmetric(n, args.p.or(ctx.file.sim.p).unwrap_or(DEFAULT_SIM_P))?
        }
    };
    let mut cfg = SimConfig::new(profile, dm);
    cfg.ep = ctx.file.energy_params()?;
    cfg.wifi = ctx.file.wifi_params()?;
    cfg.mode = match args.mode {
        Some(SimModeArg::Static) => ConvergenceMode::StaticDraw,
        Some(SimModeArg::Progress) => ConvergenceMode::Progress,
        None => ctx.file.sim_mode()?.unwrap_or_default(),
    };
    cfg.seed = ctx.seed;
    cfg.reps = args.reps.or(ctx.file.sim.reps).unwrap_or(DEFAULT_REPS);
    cfg.max_rounds = args
        .max_rounds
        .or(ctx.file.sim.max_rounds)
        .unwrap_or_else(|| default_max_rounds(&cfg.dm));

    let mc = monte_carlo(&cfg)?;
    eprintln!("convergence model: {}", cfg.mode.describe());
    let s = mc.summary;
    if !s.valid {
        eprintln!(
            "warning: every run hit max_rounds = {}, summary invalid",
            cfg.max_rounds
        );
    }

    let mut w = ctx.writer()?;
    let mut csv = csv_writer(&mut w);
    csv.write_record(["rep", "rounds", "energy_wh", "truncated"])?;
    for (rep, r) in mc.runs.iter().enumerate() {
        csv.write_record([
            rep.to_string(),
            r.rounds.to_string(),
            format!("{:.6}", r.energy_wh()),
            r.truncated.to_string(),
        ])?;
    }
    let num = |x: f64| {
        if x.is_finite() {
            format!("{x:.6}")
        } else {
            String::new()
        }
    };
    csv.write_record([
        "mean".into(),
        num(s.mean_rounds),
        num(s.mean_energy_wh),
        format!("{:.6}", s.truncation_rate),
    ])?;
    csv.write_record([
        "std".into(),
        num(s.std_rounds),
        num(s.std_energy_wh),
        String::new(),
    ])?;
    csv.flush()?;
    drop(csv);
    w.flush()?;
    Ok(())
}

fn cmd_airtime(ctx: &Ctx, args: &AirtimeArgs) -> Result<()> {
    let mut wifi: WifiParams = ctx.file.wifi_params()?;
    if let Some(mb) = args.size_mb {
        if !(mb >= 0.0 && mb.is_finite()) {
            bail!("--size-mb must be >= 0");
        }
        wifi.model_size_bits = mb * BITS_PER_MB;
    }
    let mut ep: EnergyParams = ctx.file.energy_params()?;
    if let Some(dbm) = args.ptx_dbm {
        ep.p_tx = dbm_to_watts(dbm);
    }
    let b = airtime_breakdown(&wifi)?;
    let t = b.total();

    let mut w = ctx.writer()?;
    let mut csv = csv_writer(&mut w);
    csv.write_record(["quantity", "value", "unit"])?;
    let mut row = |q: &str, v: String, u: &str| csv.write_record([q, &v, u]);
    row("model_size", format!("{}", wifi.model_size_bits), "bit")?;
    row("aggregates", b.aggregates.to_string(), "count")?;
    row("backoff", format!("{:.9}", b.backoff), "s")?;
    row("rts", format!("{:.9}", b.rts), "s")?;
    row("cts", format!("{:.9}", b.cts), "s")?;
    row("data", format!("{:.9}", b.data), "s")?;
    row("ack", format!("{:.9}", b.ack), "s")?;
    row("sifs", format!("{:.9}", b.sifs), "s")?;
    row("difs", format!("{:.9}", b.difs), "s")?;
    row("payload", format!("{:.9}", b.payload), "s")?;
    row("overhead", format!("{:.9}", b.overhead()), "s")?;
    row("t_tx", format!("{t:.9}"), "s")?;
    row("p_tx", format!("{:.9}", ep.p_tx), "W")?;
    row("e_tx", format!("{:.9}", ep.p_tx * t), "J")?;
    csv.flush()?;
    drop(csv);
    w.flush()?;
    Ok(())
}

fn cmd_calibrate(ctx: &Ctx, args: &CalibrateArgs) -> Result<()> {
    let rows = ctx.rows(args.table, args.data.as_deref())?;
    let ep0 = ctx.file.energy_params()?;
    let wifi = ctx.file.wifi_params()?;
    let cal = calibrate_energy_params(&rows, &ep0, &wifi, ctx.n(args.n))?;
    eprintln!(
        "p_hw = {:.4} W, {:.1}% of rows within 15%",
        cal.params.p_hw,
        100.0 * cal.fraction_within(0.15)
    );
    let mut w = ctx.writer()?;
    let mut csv = csv_writer(&mut w);
    csv.write_record([
        "p",
        "rounds",
        "observed_wh",
        "predicted_wh",
        "rel_error",
        "p_hw_w",
    ])?;
    for r in &cal.rows {
        csv.write_record([
            format!("{:.3}", r.p),
            format!("{:.2}", r.rounds),
            format!("{:.2}", r.observed_wh),
            format!("{:.4}", r.predicted_wh),
            format!("{:.6}", r.rel_error),
            format!("{:.6}", cal.params.p_hw),
        ])?;
    }
    csv.flush()?;
    drop(csv);
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_endpoints() {
        let g = grid(0.0, 5.0, 0.1, "c").unwrap();
        assert_eq!(g.len(), 51);
        assert_eq!(g[3], 0.3);
        assert_eq!(*g.last().unwrap(), 5.0);
        assert_eq!(grid(0.0, 1.5, 0.1, "gamma").unwrap().len(), 16);
        assert!(grid(1.0, 0.0, 0.1, "c").is_err());
        assert!(grid(0.0, 1.0, 0.0, "c").is_err());
    }

    #[test]
    fn residuals_beside_output() {
        assert_eq!(
            residuals_path(Path::new("/tmp/x/fit.csv")),
            PathBuf::from("/tmp/x/fit.residuals.csv")
        );
    }

    #[test]
    fn parses_commands() {
        let cli = Cli::try_parse_from([
            "fedgame", "--seed", "7", "solve", "--c", "0", "--gamma", "0.6",
        ])
        .unwrap();
        assert_eq!(cli.seed, Some(7));
        assert!(matches!(
            cli.command,
            Command::Solve(SolveArgs { c: Some(_), .. })
        ));
        assert!(
            Cli::try_parse_from(["fedgame", "data", "export", "--table", "single_seed"]).is_ok()
        );
        assert!(Cli::try_parse_from(["fedgame", "data", "export", "--table", "bogus"]).is_err());
    }
}
