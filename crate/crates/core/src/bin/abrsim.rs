use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use abrsim::metrics::{write_metrics_csv, write_trace_csv, Divergence};
use abrsim::tables::reproduce_table;
use abrsim::{parse_scenario, run_scenario, SimTime};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "abrsim", version, about = "TCP over ABR cell-level simulator")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one scenario file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Override the simulated duration.
        #[arg(long)]
        duration_s: Option<f64>,
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long)]
        metrics: Option<PathBuf>,
    },
    /// Reproduce one of the canned tables (1-4).
    Table {
        #[arg(value_parser = clap::value_parser!(u8).range(1..=4))]
        id: u8,
        /// Directory for per-row metrics and the text report.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.cmd {
        Cmd::Run {
            config,
            duration_s,
            trace,
            metrics,
        } => run(config, duration_s, trace, metrics),
        Cmd::Table { id, out } => table(id, out),
    }
}

fn run(config: PathBuf, duration_s: Option<f64>, trace: Option<PathBuf>, metrics: Option<PathBuf>) -> ExitCode {
    let text = match fs::read_to_string(&config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("{}: {e}", config.display());
            return ExitCode::from(2);
        }
    };
    let mut cfg = match parse_scenario(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{}: {e}", config.display());
            return ExitCode::from(2);
        }
    };
    if let Some(s) = duration_s {
        if !(s.is_finite() && s > 0.0) {
            eprintln!("--duration-s must be positive");
            return ExitCode::from(2);
        }
        cfg.duration = SimTime::from_secs_f64(s);
    }
    let started = Instant::now();
    let out = run_scenario(&cfg);
    let m = &out.metrics;
    println!("scenario        {}", m.scenario_id);
    println!("goodput         {:.3} Mbps", m.total_tcp_goodput_mbps);
    println!("max source q    {} cells", m.max_source_queue_overall());
    println!(
        "max switch q    {} cells ({:.2} x RTT)",
        m.max_switch_queue, m.max_switch_queue_rtt_fraction
    );
    println!("steady switch q {:.1} cells", m.steady_state_switch_queue);
    println!("drops           source {} switch {}", m.drops_source, m.drops_switch);
    println!("tcp timeouts    {}", out.timeouts);
    println!("queue           {}", m.divergence);
    println!(
        "events          {} in {:.1}s",
        out.events,
        started.elapsed().as_secs_f64()
    );

    if let Some(p) = &metrics {
        if let Err(e) = write_metrics_csv(p, std::slice::from_ref(m)) {
            eprintln!("{e}");
            return ExitCode::from(1);
        }
    }
    if let Some(p) = &trace {
        let n = if cfg.trace_per_vc { cfg.n_sources } else { 0 };
        if let Err(e) = write_trace_csv(p, &out.trace, n) {
            eprintln!("{e}");
            return ExitCode::from(1);
        }
    }
    if !out.conservation.holds() {
        eprintln!("conservation check failed: {:?}", out.conservation);
        return ExitCode::from(1);
    }
    if m.divergence == Divergence::Unknown {
        eprintln!("run too short to classify the switch queue");
        return ExitCode::from(1);
    }
    ExitCode::SUCCESS
}

fn table(id: u8, out: Option<PathBuf>) -> ExitCode {
    let report = match reproduce_table(id) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(2);
        }
    };
    let text = report.render();
    print!("{text}");
    if let Some(dir) = out {
        let rows: Vec<_> = report.rows.iter().map(|r| r.output.metrics.clone()).collect();
        let written = fs::create_dir_all(&dir)
            .map_err(|e| format!("{}: {e}", dir.display()))
            .and_then(|_| {
                fs::write(dir.join(format!("table{id}.txt")), &text).map_err(|e| format!("{}: {e}", dir.display()))
            })
            .and_then(|_| {
                write_metrics_csv(&dir.join(format!("table{id}_metrics.csv")), &rows).map_err(|e| e.to_string())
            });
        if let Err(e) = written {
            eprintln!("{e}");
            return ExitCode::from(1);
        }
    }
    if report.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
