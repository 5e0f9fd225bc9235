use std::fs::File;
use std::io::{BufReader, Write};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use evline_cli::bench::{self, SweepKind};
use evline_cli::commands::{self, CliError, OverlayOptions, TrackOptions};
use evline_core::{ms_to_us, TrackerConfig};
use evline_synth::{generate, presets};

#[derive(Parser)]
#[command(name = "evline", version, about = "Line tracking in event-camera streams")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Track lines in an event file, writing a TrackFile.
    Track {
        /// Event file (text or binary); `-` reads stdin.
        input: PathBuf,
        /// TrackFile output; stdout when absent.
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// `key = value` configuration file.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Stream time between TrackFile snapshots.
        #[arg(long, default_value_t = 10.0)]
        snapshot_interval_ms: f64,
        /// Run maintenance inline so output is reproducible.
        #[arg(long)]
        deterministic: bool,
        /// Idle lines are deleted instead of hibernating.
        #[arg(long)]
        no_hibernation: bool,
        /// Directory for one PNG per snapshot.
        #[arg(long)]
        overlay: Option<PathBuf>,
        /// Image drawn under the overlays; must match the sensor size.
        #[arg(long, requires = "overlay")]
        overlay_background: Option<PathBuf>,
    },
    /// Generate events and ground truth from a scene file.
    Synth {
        scene: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        events: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        /// Write events in the binary format.
        #[arg(long)]
        binary: bool,
        /// Include per-event source labels in the truth file.
        #[arg(long)]
        with_labels: bool,
    },
    /// Score a TrackFile against ground truth.
    Eval {
        tracks: PathBuf,
        truth: PathBuf,
        /// Also write the metrics as JSON here.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Per-stage cost sweeps and throughput.
    Bench {
        #[arg(long, value_enum, default_value_t = SweepArg::Both)]
        sweep: SweepArg,
        /// Lines in the line sweep.
        #[arg(long, default_value_t = 10)]
        lines: usize,
        /// Segments in the cluster sweep.
        #[arg(long, default_value_t = 12)]
        clusters: usize,
        /// Time between one entity appearing and the next; the default
        /// depends on the sweep.
        #[arg(long)]
        stagger_ms: Option<f64>,
        #[arg(long, default_value_t = 3)]
        repeats: usize,
        /// Length of the throughput scene.
        #[arg(long, default_value_t = 5000.0)]
        duration_ms: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SweepArg {
    Lines,
    Clusters,
    Both,
}

fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn create(path: &Path) -> Result<File, CliError> {
    File::create(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn load_config(path: Option<&Path>) -> Result<TrackerConfig, CliError> {
    match path {
        None => Ok(TrackerConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?;
            Ok(TrackerConfig::from_text(&text)?)
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Track {
            input,
            output,
            config,
            snapshot_interval_ms,
            deterministic,
            no_hibernation,
            overlay,
            overlay_background,
        } => {
            let mut cfg = load_config(config.as_deref())?;
            if no_hibernation {
                cfg.hibernation_enabled = false;
            }
            let mut opts = TrackOptions::new(cfg);
            opts.snapshot_interval_us = ms_to_us(snapshot_interval_ms);
            opts.deterministic = deterministic;
            if let Some(dir) = overlay {
                std::fs::create_dir_all(&dir)?;
                let background = match overlay_background {
                    Some(p) => Some(
                        image::open(&p)
                            .map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?
                            .to_rgb8(),
                    ),
                    None => None,
                };
                opts.overlay = Some(OverlayOptions { dir, background });
            }
            let out: Box<dyn Write> = match output {
                Some(p) => Box::new(create(&p)?),
                None => Box::new(std::io::stdout().lock()),
            };
            let summary = if input.as_os_str() == "-" {
                commands::track(BufReader::new(std::io::stdin()), out, opts)?
            } else {
                commands::track(open(&input)?, out, opts)?
            };
            eprintln!("{}", summary.report());
        }
        Command::Synth {
            scene,
            seed,
            events,
            truth,
            binary,
            with_labels,
        } => {
            let text = std::fs::read_to_string(&scene)
                .map_err(|e| CliError::Usage(format!("{}: {e}", scene.display())))?;
            let n = commands::synth(&text, seed, create(&events)?, create(&truth)?, binary, with_labels)?;
            eprintln!("wrote {n} events");
        }
        Command::Eval { tracks, truth, json } => {
            let m = commands::eval(open(&tracks)?, open(&truth)?)?;
            write!(std::io::stdout(), "{}", commands::metrics_report(&m))?;
            if let Some(p) = json {
                let text = serde_json::to_string_pretty(&commands::metrics_json(&m))
                    .map_err(|e| CliError::Internal(e.to_string()))?;
                std::fs::write(&p, text + "\n")?;
            }
        }
        Command::Bench {
            sweep,
            lines,
            clusters,
            stagger_ms,
            repeats,
            duration_ms,
            seed,
        } => {
            let kinds: &[(SweepKind, usize)] = match sweep {
                SweepArg::Lines => &[(SweepKind::Lines, lines)],
                SweepArg::Clusters => &[(SweepKind::Clusters, clusters)],
                SweepArg::Both => &[(SweepKind::Lines, lines), (SweepKind::Clusters, clusters)],
            };
            for &(kind, n) in kinds {
                let s = bench::sweep(kind, n.max(1), stagger_ms.unwrap_or(kind.default_stagger_ms()), repeats, seed);
                writeln!(std::io::stdout(), "{}", s.table())?;
            }
            let g = generate(&presets::steady_mix(duration_ms), seed);
            for background in [false, true] {
                let t = bench::throughput(TrackerConfig::default(), &g.events, background);
                writeln!(
                    std::io::stdout(),
                    "throughput ({}): {} events, {:.0} ev/s, {:.3} us/event",
                    if background { "two contexts" } else { "inline" },
                    t.events,
                    t.events_per_s(),
                    t.ns_per_event() / 1000.0
                )?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match catch_unwind(AssertUnwindSafe(|| run(cli))) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("evline: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
        Err(_) => {
            eprintln!("evline: internal error");
            ExitCode::from(2)
        }
    }
}
