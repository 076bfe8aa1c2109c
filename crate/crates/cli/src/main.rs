//! `delaymid` command line.
//!
//! Every subcommand prints one JSON document (or CSV table) to stdout or
//! `--output`. Core failures exit with status 1 and a
//! `{error_name, message, details}` object on stderr; malformed flags exit
//! with status 2.

mod output;

use std::fs;
use std::io::Read as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use delaymid::mid_solver::FixedVariable;
use delaymid::simulator::{DEFAULT_STEPS_PER_DELAY, MAX_SERIALIZED_POINTS};
use delaymid::{
    classic_mid, control_oriented_mid, delay_sweep, find_roots, simulate, ControlSpec, InitialCondition,
    Quasipolynomial, Rectangle,
};
use log::info;

use output::Rendered;

#[derive(Parser, Debug)]
#[command(name = "delaymid", version, about = "Maximal-multiplicity design of delayed feedback")]
#[command(args_conflicts_with_subcommands = true, allow_negative_numbers = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Json, global = true)]
    format: Format,

    /// Write the result here instead of stdout.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Choose every coefficient so that s0 is a root of multiplicity n+m+1.
    #[command(allow_negative_numbers = true)]
    ClassicMid {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        m: usize,
        #[arg(long, allow_hyphen_values = true)]
        s0: f64,
        #[arg(long)]
        tau: f64,
    },
    /// Given a_0..a_{n-1}, choose b so that a real root has multiplicity
    /// m+2; fix either s0 or tau and solve for the other.
    #[command(allow_negative_numbers = true)]
    #[command(group(ArgGroup::new("fixed").required(true).args(["s0", "tau"])))]
    ControlMid {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        m: usize,
        /// a_0,...,a_{n-1} in ascending powers.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        a: Vec<f64>,
        #[arg(long, allow_hyphen_values = true)]
        s0: Option<f64>,
        #[arg(long)]
        tau: Option<f64>,
        /// Search interval lo,hi for the free variable.
        #[arg(long, value_parser = parse_window, allow_hyphen_values = true)]
        window: Option<(f64, f64)>,
        /// Index into the sorted candidate list.
        #[arg(long)]
        candidate: Option<usize>,
    },
    /// All roots inside a rectangle, with multiplicities.
    #[command(allow_negative_numbers = true)]
    Roots {
        #[command(flatten)]
        qp: QpArgs,
        /// x_min,x_max,y_min,y_max
        #[arg(long, value_parser = parse_rect, allow_hyphen_values = true)]
        rect: Rectangle,
    },
    /// Explicit Euler solution on [-tau, T].
    #[command(allow_negative_numbers = true)]
    Simulate {
        #[command(flatten)]
        qp: QpArgs,
        /// constant:c | poly:c0,c1,... | exp:A,rho | trig:A,omega,phi
        #[arg(long, allow_hyphen_values = true)]
        ic: InitialCondition,
        /// Final time.
        #[arg(long = "T")]
        horizon: f64,
        #[arg(long, default_value_t = DEFAULT_STEPS_PER_DELAY)]
        steps_per_delay: usize,
    },
    /// Roots for the delays tau + k epsilon, k = -K..K.
    #[command(allow_negative_numbers = true)]
    Sensitivity {
        #[command(flatten)]
        qp: QpArgs,
        #[arg(long, value_parser = parse_rect, allow_hyphen_values = true)]
        rect: Rectangle,
        #[arg(long)]
        epsilon: f64,
        #[arg(long = "K")]
        k_max: usize,
    },
}

/// A quasipolynomial from a JSON file (a bare `{n, m, a, b, tau}` object or
/// a design holding one under `qp`) or from coefficient flags.
#[derive(Args, Debug)]
#[command(group(ArgGroup::new("source").required(true).args(["qp", "tau"])))]
struct QpArgs {
    /// JSON file, `-` for stdin.
    #[arg(long, conflicts_with_all = ["n", "m", "a", "b", "tau"])]
    qp: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    /// a_0,...,a_{n-1} in ascending powers.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, requires = "tau")]
    a: Vec<f64>,
    /// b_0,...,b_m in ascending powers.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, requires = "tau")]
    b: Vec<f64>,
    #[arg(long, requires_all = ["a", "b"])]
    tau: Option<f64>,
}

impl QpArgs {
    fn load(&self) -> anyhow::Result<Quasipolynomial> {
        if let Some(path) = &self.qp {
            return read_quasipolynomial(path);
        }
        let tau = self.tau.expect("clap enforces the source group");
        if let Some(n) = self.n {
            if n != self.a.len() {
                bail!(delaymid::Error::InvalidInput(format!(
                    "--n {n} does not match {} a coefficients",
                    self.a.len()
                )));
            }
        }
        if let Some(m) = self.m {
            if m + 1 != self.b.len() {
                bail!(delaymid::Error::InvalidInput(format!(
                    "--m {m} does not match {} b coefficients",
                    self.b.len()
                )));
            }
        }
        Ok(Quasipolynomial::new(self.a.clone(), self.b.clone(), tau)?)
    }
}

fn read_quasipolynomial(path: &Path) -> anyhow::Result<Quasipolynomial> {
    let text = if path == Path::new("-") {
        let mut buf = String::new();
        std::io::stdin().read_to_string(&mut buf)?;
        buf
    } else {
        fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?
    };
    let mut value: serde_json::Value =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    if let Some(inner) = value.get_mut("qp") {
        value = inner.take();
    }
    serde_json::from_value(value).with_context(|| format!("{} is not a quasipolynomial", path.display()))
}

fn parse_numbers(text: &str, expected: usize) -> Result<Vec<f64>, String> {
    let values = text
        .split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|e| format!("{v:?}: {e}")))
        .collect::<Result<Vec<_>, _>>()?;
    if values.len() != expected {
        return Err(format!("expected {expected} comma-separated numbers, got {}", values.len()));
    }
    Ok(values)
}

fn parse_rect(text: &str) -> Result<Rectangle, String> {
    let v = parse_numbers(text, 4)?;
    Rectangle::new(v[0], v[1], v[2], v[3]).map_err(|e| e.to_string())
}

fn parse_window(text: &str) -> Result<(f64, f64), String> {
    let v = parse_numbers(text, 2)?;
    Ok((v[0], v[1]))
}

fn run(cli: &Cli) -> anyhow::Result<Rendered> {
    let rendered = match &cli.command {
        Command::ClassicMid { n, m, s0, tau } => {
            info!("classic MID n={n} m={m} s0={s0} tau={tau}");
            Rendered::design(&classic_mid(*n, *m, *s0, *tau)?)
        }
        Command::ControlMid {
            n,
            m,
            a,
            s0,
            tau,
            window,
            candidate,
        } => {
            if a.len() != *n {
                bail!(delaymid::Error::InvalidInput(format!(
                    "--n {n} does not match {} a coefficients",
                    a.len()
                )));
            }
            let (fixed, value) = match (s0, tau) {
                (Some(s0), None) => (FixedVariable::S0, *s0),
                (None, Some(tau)) => (FixedVariable::Tau, *tau),
                _ => unreachable!("clap enforces exactly one of --s0/--tau"),
            };
            let mut spec = ControlSpec::new(a.clone(), *m, fixed, value);
            spec.window = *window;
            spec.candidate = *candidate;
            info!("control-oriented MID {spec:?}");
            Rendered::design(&control_oriented_mid(&spec)?)
        }
        Command::Roots { qp, rect } => {
            let qp = qp.load()?;
            Rendered::roots(&find_roots(&qp, rect)?)
        }
        Command::Simulate {
            qp,
            ic,
            horizon,
            steps_per_delay,
        } => {
            let qp = qp.load()?;
            let trajectory = simulate(&qp, ic, *horizon, *steps_per_delay)?;
            Rendered::trajectory(&trajectory.decimated(MAX_SERIALIZED_POINTS))
        }
        Command::Sensitivity {
            qp,
            rect,
            epsilon,
            k_max,
        } => {
            let qp = qp.load()?;
            Rendered::sweep(&delay_sweep(&qp, rect, *epsilon, *k_max)?)
        }
    };
    Ok(rendered)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = run(&cli).and_then(|rendered| {
        let text = match cli.format {
            Format::Json => rendered.json(),
            Format::Csv => rendered.csv(),
        };
        match &cli.output {
            Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
            None => {
                print!("{text}");
                Ok(())
            }
        }
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("{}", output::error_json(&err));
            ExitCode::from(1)
        }
    }
}
