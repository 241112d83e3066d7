use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use klab_cli::manifest::{count_from_str, float_list, rect_from_str};
use klab_cli::{run, CliError, ExperimentManifest, Kind};

#[derive(Parser)]
#[command(name = "klab", version, about = "Experiments on self-similar measures, lattice walks and Khintchine counts")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write <kind>.csv and <kind>.json.
    Run(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    kind: Kind,
    /// Manifest file; flags given on the command line override its fields.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// IFS file, or builtin:cantor / builtin:lebesgue.
    #[arg(long)]
    ifs: Option<String>,
    /// Approximation function: power:C,ALPHA | logpower:BETA | table:V1,V2,...
    #[arg(long)]
    psi: Option<String>,
    #[arg(long = "N", value_parser = count_from_str)]
    n: Option<u64>,
    #[arg(long, value_parser = count_from_str)]
    samples: Option<u64>,
    #[arg(long, value_parser = count_from_str)]
    replicas: Option<u64>,
    #[arg(long, value_parser = count_from_str)]
    steps: Option<u64>,
    #[arg(long)]
    tau: Option<f64>,
    /// First and last block for the variance probe, as M,N.
    #[arg(long)]
    blocks: Option<String>,
    /// Comma-separated times.
    #[arg(long = "t-grid")]
    t_grid: Option<String>,
    /// x0,x1,y0,y1 for [x0,x1) x (y0,y1].
    #[arg(long)]
    rect: Option<String>,
    #[arg(long)]
    rect2: Option<String>,
    /// plus | minus | both
    #[arg(long)]
    side: Option<String>,
    /// raw | capped
    #[arg(long)]
    normalization: Option<String>,
    #[arg(long = "gain-from", value_parser = count_from_str)]
    gain_from: Option<u64>,
    /// Comma-separated systole thresholds.
    #[arg(long)]
    thresholds: Option<String>,
    #[arg(long)]
    radius: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, env = "KLAB_WORKERS")]
    workers: Option<usize>,
    #[arg(long = "precision-bits")]
    precision_bits: Option<u32>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn list(field: &str, s: &Option<String>) -> Result<Option<Vec<f64>>, CliError> {
    s.as_deref().map(|s| float_list(s).map_err(|e| CliError::Validation(format!("--{field}: {e}")))).transpose()
}

fn manifest(a: RunArgs) -> Result<ExperimentManifest, CliError> {
    let mut m = match &a.manifest {
        Some(path) => {
            let m = ExperimentManifest::load(path)?;
            if m.kind != a.kind {
                return Err(CliError::Validation(format!("manifest is for `{}`, not `{}`", m.kind, a.kind)));
            }
            m
        }
        None => ExperimentManifest::new(a.kind, 0),
    };
    let p = &mut m.params;
    macro_rules! set {
        ($($field:ident),*) => { $( if a.$field.is_some() { p.$field = a.$field.clone(); } )* };
    }
    set!(ifs, psi, n, samples, replicas, steps, tau, side, normalization, gain_from, radius, precision_bits);
    if let Some(v) = list("t-grid", &a.t_grid)? {
        p.t_grid = Some(v);
    }
    if let Some(v) = list("thresholds", &a.thresholds)? {
        p.thresholds = Some(v);
    }
    for (field, src, dst) in [("rect", &a.rect, &mut p.rect), ("rect2", &a.rect2, &mut p.rect2)] {
        if let Some(s) = src {
            *dst = Some(rect_from_str(s).map_err(|e| CliError::Validation(format!("--{field}: {e}")))?);
        }
    }
    if let Some(b) = &a.blocks {
        let v = list("blocks", &Some(b.clone()))?.unwrap_or_default();
        match v.as_slice() {
            [m0, m1] if m0.fract() == 0.0 && m1.fract() == 0.0 && *m0 >= 0.0 && m1 >= m0 => {
                p.blocks = Some([*m0 as u32, *m1 as u32]);
            }
            _ => return Err(CliError::Validation(format!("--blocks: expected M,N with M <= N, got {b:?}"))),
        }
    }
    if let Some(seed) = a.seed {
        m.seed = seed;
    }
    if a.workers.is_some() {
        m.workers = a.workers;
    }
    if a.out.is_some() {
        m.out = a.out;
    }
    Ok(m)
}

fn main() -> ExitCode {
    let Command::Run(args) = Cli::parse().command;
    let result = manifest(args).and_then(|m| run(&m));
    match result {
        Ok(report) => {
            if let Some(a) = report.artifacts {
                println!("{}", a.json.display());
                println!("{}", a.csv.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("klab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
