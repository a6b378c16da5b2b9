use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use eepca::sweep::{parse_sweep, run_sweep, write_outputs, SweepSpec};
use eepca::{run, Error, PolicyKind, ScenarioConfig, DEFAULT_MAX_ROUNDS};

/// Run cluster-head election experiments and write CSV summaries.
#[derive(Debug, Parser)]
#[command(name = "eepca", version)]
struct Args {
    /// Scenario JSON; defaults are used for missing keys.
    #[arg(long)]
    scenario: Option<PathBuf>,

    /// Comma-separated policies: leach, sep, eepca.
    #[arg(long, value_delimiter = ',', default_value = "leach,sep,eepca")]
    policy: Vec<String>,

    /// Number of seeds, starting at the scenario's rng_seed.
    #[arg(long, default_value_t = 1)]
    seeds: usize,

    /// `var=v1,v2,...` or `var=start:stop:step` (alpha, epsilon_tol,
    /// frac_energy_heterogeneous).
    #[arg(long)]
    sweep: Option<String>,

    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,

    #[arg(long, default_value_t = DEFAULT_MAX_ROUNDS)]
    max_rounds: u64,

    /// Also write a JSONL round trace per policy for the first seed.
    #[arg(long)]
    trace: bool,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config { .. } | Error::Parse { .. } => 2,
        Error::Io { .. } => 3,
        Error::Csv(c) if c.is_io_error() => 3,
        _ => 1,
    }
}

fn execute(args: &Args) -> eepca::Result<()> {
    let scenario = match &args.scenario {
        Some(path) => ScenarioConfig::load(path).map_err(|e| match e {
            Error::Io { source, .. } => Error::Config {
                field: "scenario".into(),
                reason: format!("cannot read {}: {source}", path.display()),
            },
            other => other,
        })?,
        None => ScenarioConfig::default(),
    };
    scenario.validate()?;
    if args.seeds == 0 {
        return Err(Error::Config {
            field: "seeds".into(),
            reason: "must be at least 1".into(),
        });
    }
    let policies = args
        .policy
        .iter()
        .map(|p| p.parse::<PolicyKind>())
        .collect::<eepca::Result<Vec<_>>>()?;
    let mut spec = SweepSpec::new(scenario);
    spec.policies = policies;
    spec.seeds = args.seeds;
    spec.max_rounds = args.max_rounds;
    spec.var = args.sweep.as_deref().map(parse_sweep).transpose()?;

    std::fs::create_dir_all(&args.out).map_err(|e| Error::Io {
        path: args.out.clone(),
        source: e,
    })?;
    let results = run_sweep(&spec)?;
    write_outputs(&spec, &results, &args.out)?;

    if args.trace {
        let traces = args.out.join("traces");
        std::fs::create_dir_all(&traces).map_err(|e| Error::Io {
            path: traces.clone(),
            source: e,
        })?;
        for &policy in &spec.policies {
            let trace = run(&spec.scenario, policy, spec.max_rounds)?;
            trace.save_jsonl(
                traces.join(format!("{policy}_seed{}.jsonl", spec.scenario.rng_seed)),
            )?;
        }
    }

    for p in &results {
        let show = |a: &eepca::Aggregate| match a.mean {
            Some(m) => format!("{m:.1}"),
            None => "censored".to_string(),
        };
        println!(
            "{:<32} {:<6} fnd {:>8} p10 {:>8} p50 {:>8} lnd {:>8}",
            p.label,
            p.policy,
            show(&p.fnd),
            show(&p.p10),
            show(&p.p50),
            show(&p.lnd)
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    let args = Args::parse();
    match execute(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
