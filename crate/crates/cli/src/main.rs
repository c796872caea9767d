use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use eibnb::experiment::{
    derivative_table, run_direct_comparison, run_local_global_study, run_long_run,
    write_derivative_csv, DerivRow, ExperimentKind, PartialConfig, DERIV_S_VALUES,
};
use eibnb::{Error, FeatureTarget};
use plotters::prelude::*;

#[derive(Parser)]
#[command(
    name = "eibnb",
    version,
    about = "Replicated EI-driven sequential design experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// BNB versus GA maximized EI on shared fits.
    Direct(Overrides),
    /// Running feature estimates for BNB, GA and a static design.
    Longrun(Overrides),
    /// Share of added points near the contour, full vs modified criterion.
    Study(Overrides),
    /// Partial derivatives of the modified contour criterion.
    Derivplots(Overrides),
}

#[derive(Args)]
struct Overrides {
    /// TOML config file; flags below take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// branin, levy2 or levy4.
    #[arg(long)]
    function: Option<String>,
    /// min, maxmin, contour:<level>[:<alpha>] or contour-full:<level>[:<alpha>].
    #[arg(long)]
    target: Option<String>,
    /// Initial design size; comma-separated for several.
    #[arg(long, value_delimiter = ',')]
    n0: Option<Vec<usize>>,
    #[arg(long)]
    n_new: Option<usize>,
    #[arg(long)]
    reps: Option<usize>,
    /// EI evaluations per maximization.
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

impl Overrides {
    fn partial(self) -> eibnb::Result<PartialConfig> {
        let base = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
                PartialConfig::from_toml(&text)?
            }
            None => PartialConfig::default(),
        };
        let flags = PartialConfig {
            function: self.function.as_deref().map(str::parse).transpose()?,
            target: self.target,
            n0: self.n0,
            n_new: self.n_new,
            replications: self.reps,
            budget: self.budget,
            seed: self.seed,
            output_dir: self.out,
            threads: self.threads,
            ..PartialConfig::default()
        };
        Ok(base.merge(flags))
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("eibnb: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> eibnb::Result<Vec<PathBuf>> {
    let (kind, overrides) = match cli.command {
        Command::Direct(o) => (ExperimentKind::Direct, o),
        Command::Longrun(o) => (ExperimentKind::Longrun, o),
        Command::Study(o) => (ExperimentKind::Study, o),
        Command::Derivplots(o) => (ExperimentKind::Derivplots, o),
    };
    let cfg = overrides.partial()?.resolve(kind)?;
    let dir = cfg.output_dir.clone();
    fs::create_dir_all(&dir)?;
    match kind {
        ExperimentKind::Direct => run_direct_comparison(&cfg)?.write_outputs(&dir),
        ExperimentKind::Longrun => run_long_run(&cfg)?.write_outputs(&dir, cfg.function.dim()),
        ExperimentKind::Study => run_local_global_study(&cfg)?.write_outputs(&dir),
        ExperimentKind::Derivplots => {
            let alpha = match cfg.target {
                FeatureTarget::ContourMod { alpha, .. }
                | FeatureTarget::ContourFull { alpha, .. } => alpha,
                _ => 2.0,
            };
            derivplots(&dir, alpha)
        }
    }
}

fn derivplots(dir: &Path, alpha: f64) -> eibnb::Result<Vec<PathBuf>> {
    let rows = derivative_table(alpha);
    let csv_path = dir.join("derivatives.csv");
    let file = fs::File::create(&csv_path)?;
    write_derivative_csv(&rows, alpha, file)?;
    let mut out = vec![csv_path];
    for (name, label, pick) in [
        (
            "d_dt.svg",
            "dEI/dt",
            (|r: &DerivRow| r.d_dt) as fn(&DerivRow) -> f64,
        ),
        ("d_ds.svg", "dEI/ds", |r: &DerivRow| r.d_ds),
    ] {
        let path = dir.join(name);
        plot(&path, &format!("{label}, alpha = {alpha}"), &rows, pick)
            .map_err(|e| Error::Experiment(format!("plotting {}: {e}", path.display())))?;
        out.push(path);
    }
    Ok(out)
}

fn plot(
    path: &Path,
    title: &str,
    rows: &[DerivRow],
    pick: fn(&DerivRow) -> f64,
) -> Result<(), Box<dyn std::error::Error>> {
    let (lo, hi) = rows
        .iter()
        .map(pick)
        .fold((0.0f64, 0.0f64), |(a, b), v| (a.min(v), b.max(v)));
    let pad = 0.05 * (hi - lo).max(1e-12);
    let root = SVGBackend::new(path, (720, 480)).into_drawing_area();
    root.fill(&WHITE)?;
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 20))
        .margin(10)
        .x_label_area_size(35)
        .y_label_area_size(55)
        .build_cartesian_2d(-6.0..6.0, (lo - pad)..(hi + pad))?;
    chart.configure_mesh().x_desc("t").draw()?;
    let colors = [BLUE, RED, BLACK];
    for (s, color) in DERIV_S_VALUES.iter().zip(colors) {
        let pts = rows.iter().filter(|r| r.s == *s).map(|r| (r.t, pick(r)));
        chart
            .draw_series(LineSeries::new(pts, color))?
            .label(format!("s = {s}"))
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], color));
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()?;
    root.present()?;
    Ok(())
}
