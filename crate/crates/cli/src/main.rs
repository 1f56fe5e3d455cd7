use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use trajex_core::export::PlotStyle;

mod commands;

use commands::FrameRange;

/// Trajectory reconstruction from annotated traffic-video frames.
#[derive(Debug, Parser)]
#[command(name = "trajex", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write rectified (surveillance) or stabilized (recorder) frames as PNG.
    Rectify {
        project: PathBuf,
        out_dir: PathBuf,
        /// Inclusive frame range, e.g. `5..20`.
        #[arg(long)]
        frames: Option<FrameRange>,
    },
    /// Compute per-object trajectories in meters, hit point at the origin.
    Trace {
        project: PathBuf,
        out: PathBuf,
        /// Frame rate override; defaults to the project's `fps`.
        #[arg(long)]
        fps: Option<f64>,
        /// Odd moving-average window applied to speeds.
        #[arg(long)]
        smooth: Option<usize>,
    },
    /// Convert a trajectory file to CSV.
    Export { trajectory: PathBuf, out_csv: PathBuf },
    /// Draw a trajectory file as SVG.
    Plot {
        trajectory: PathBuf,
        out_svg: PathBuf,
        #[arg(long, default_value = "both")]
        style: PlotStyle,
    },
    /// Serve the annotation API for every project in a directory.
    Serve {
        project_dir: PathBuf,
        #[arg(long, default_value = "127.0.0.1:8080")]
        bind: SocketAddr,
        /// Allowed CORS origin; every origin is allowed when absent.
        #[arg(long)]
        cors_origin: Option<String>,
    },
}

fn init_logging() {
    let filter = tracing_subscriber::EnvFilter::try_from_env("TRAJEX_LOG")
        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("warn"));
    let _ = tracing_subscriber::fmt().with_env_filter(filter).with_writer(std::io::stderr).try_init();
}

fn main() -> ExitCode {
    init_logging();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Rectify { project, out_dir, frames } => commands::rectify(&project, &out_dir, frames),
        Command::Trace { project, out, fps, smooth } => commands::trace(&project, &out, fps, smooth),
        Command::Export { trajectory, out_csv } => commands::export(&trajectory, &out_csv),
        Command::Plot { trajectory, out_svg, style } => commands::plot(&trajectory, &out_svg, style),
        Command::Serve { project_dir, bind, cors_origin } => commands::serve(project_dir, bind, cors_origin),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn parses_flags() {
        let cli = Cli::try_parse_from(["trajex", "rectify", "p.json", "out", "--frames", "5..5"]).unwrap();
        match cli.command {
            Command::Rectify { frames: Some(r), .. } => assert_eq!((r.start, r.end), (5, 5)),
            other => panic!("{other:?}"),
        }
        assert!(Cli::try_parse_from(["trajex", "plot", "t.json", "o.svg", "--style", "dots"]).is_err());
        assert!(Cli::try_parse_from(["trajex", "serve", "dir", "--bind", "nonsense"]).is_err());
    }
}
