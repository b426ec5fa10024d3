//! Batch front-end for the wave-map / caloric-gauge laboratory.
//!
//! Usage:
//!   caloric <simulate|heatflow|esd|verify|localize>
//!           [--config FILE] [--preset NAME] [--set key=value]...
//!           [--jobs N] [--out DIR]
//!
//! Exit codes: 0 all checks pass, 2 check failure, 3 configuration error,
//! 4 numerical abort.

use caloric_cli::commands::{self, CliError, Ctx};
use caloric_cli::config::{self, RunConfig};

fn usage() -> String {
    let mut s = String::from(
        "usage: caloric <simulate|heatflow|esd|verify|localize> \
         [--config FILE] [--preset NAME] [--set key=value]... [--jobs N] [--out DIR]\n\
         presets: geodesic-gaussian, multibump, random-smooth\n\
         keys:\n",
    );
    for (k, d) in config::KNOWN_KEYS {
        s.push_str(&format!("  {k:28} {d}\n"));
    }
    s
}

fn run() -> Result<(), i32> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.is_empty() || args[0] == "--help" || args[0] == "-h" {
        eprint!("{}", usage());
        return Err(if args.is_empty() { 3 } else { 0 });
    }
    let command = args[0].clone();
    let mut cfg = RunConfig::default();
    let mut out_dir: Option<String> = None;
    let mut jobs = std::thread::available_parallelism()
        .map(|p| p.get().min(8))
        .unwrap_or(1);

    let fail3 = |msg: String| -> i32 {
        eprintln!("error: {msg}");
        3
    };

    let mut i = 1;
    let mut file: Option<String> = None;
    let mut sets: Vec<String> = Vec::new();
    while i < args.len() {
        match args[i].as_str() {
            "--config" => {
                i += 1;
                file = Some(
                    args.get(i)
                        .cloned()
                        .ok_or_else(|| fail3("--config needs a path".into()))?,
                );
            }
            "--preset" => {
                i += 1;
                let name = args
                    .get(i)
                    .cloned()
                    .ok_or_else(|| fail3("--preset needs a name".into()))?;
                cfg = RunConfig::preset(&name).map_err(|e| fail3(e.0))?;
            }
            "--set" => {
                i += 1;
                sets.push(
                    args.get(i)
                        .cloned()
                        .ok_or_else(|| fail3("--set needs key=value".into()))?,
                );
            }
            "--jobs" => {
                i += 1;
                jobs = args
                    .get(i)
                    .and_then(|v| v.parse().ok())
                    .ok_or_else(|| fail3("--jobs needs an integer".into()))?;
            }
            "--out" => {
                i += 1;
                out_dir = Some(
                    args.get(i)
                        .cloned()
                        .ok_or_else(|| fail3("--out needs a path".into()))?,
                );
            }
            other => return Err(fail3(format!("unknown argument '{other}'"))),
        }
        i += 1;
    }
    if let Some(path) = file {
        cfg.load_file(std::path::Path::new(&path))
            .map_err(|e| fail3(e.0))?;
    }
    for s in sets {
        cfg.assign(&s).map_err(|e| fail3(e.0))?;
    }

    let out = std::path::PathBuf::from(
        out_dir.unwrap_or_else(|| format!("runs/{command}-{:016x}", cfg.hash())),
    );
    let ctx = Ctx::new(&cfg, out.clone(), jobs).map_err(|e| match e {
        CliError::Config(m) => fail3(m),
        CliError::Numerical(m) => {
            eprintln!("error: {m}");
            4
        }
    })?;

    let result = match command.as_str() {
        "simulate" => commands::cmd_simulate(&ctx),
        "heatflow" => commands::cmd_heatflow(&ctx),
        "esd" => commands::cmd_esd(&ctx),
        "verify" => commands::cmd_verify(&ctx),
        "localize" => commands::cmd_localize(&ctx),
        other => return Err(fail3(format!("unknown command '{other}'"))),
    };

    match result {
        Ok(summary) => {
            summary.print_checks();
            println!(
                "{}: wrote {} artifacts to {}",
                command,
                summary.artifacts.len(),
                out.display()
            );
            if summary.all_passed() {
                Ok(())
            } else {
                Err(2)
            }
        }
        Err(CliError::Config(m)) => Err(fail3(m)),
        Err(CliError::Numerical(m)) => {
            eprintln!("numerical abort: {m}");
            Err(4)
        }
    }
}

fn main() {
    match run() {
        Ok(()) => {}
        Err(code) => std::process::exit(code),
    }
}
