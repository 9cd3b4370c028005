use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use idem_core::example1;
use idem_core::formats::{self, FormatError, MeasureFile, SpaceRef};
use idem_core::tower::{LimitPoint, Tower, TowerError, DEFAULT_MAX_LEVEL};
use idem_core::transport::{self, Algorithm, DistanceResult, Mode, TransportError};
use idem_core::verify::{self, VerifyConfig};
use idem_core::{FiniteMetricSpace, IdempotentMeasure};
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "idem", version, about = "Idempotent measures and their transport distance")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Distance between two measures, as JSON.
    Dist(DistArgs),
    /// Run the randomized claim checks and write a JSON report.
    Verify(VerifyArgs),
    /// Print the built-in worked example.
    Example1(Example1Args),
    /// Distance between two tower elements, with a one-level-up self-check.
    Tower(TowerArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Paper,
    Coupling,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::Paper => Mode::Paper,
            ModeArg::Coupling => Mode::Coupling,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum AlgArg {
    Fast,
    Oracle,
    Both,
}

#[derive(Args)]
struct MetricArgs {
    #[arg(long, value_enum, default_value = "coupling")]
    mode: ModeArg,
    #[arg(long, value_enum, default_value = "fast")]
    alg: AlgArg,
}

#[derive(Args)]
struct DistArgs {
    /// Space file; required unless both measure files name their space.
    #[arg(long)]
    space: Option<PathBuf>,
    mu: PathBuf,
    nu: PathBuf,
    #[command(flatten)]
    metric: MetricArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = verify::DEFAULT_INSTANCES)]
    instances: usize,
    /// Comma-separated claim ids; all claims when omitted.
    #[arg(long, value_delimiter = ',')]
    claims: Vec<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct Example1Args {
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TowerArgs {
    #[arg(long)]
    space: PathBuf,
    a: PathBuf,
    b: PathBuf,
    /// Level to compare at; defaults to the higher of the two element levels.
    #[arg(long)]
    level: Option<usize>,
    #[command(flatten)]
    metric: MetricArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// A failure with its exit code and a short machine-readable kind.
#[derive(Debug)]
struct Failure {
    code: u8,
    kind: &'static str,
    message: String,
    detail: Option<Value>,
}

impl Failure {
    fn input(message: impl Into<String>) -> Self {
        Failure { code: 1, kind: "invalid-input", message: message.into(), detail: None }
    }

    fn space_mismatch() -> Self {
        Failure { code: 2, kind: "space-mismatch", message: "measures live on different spaces".into(), detail: None }
    }

    fn report(&self) -> String {
        let mut v = json!({"error": self.kind, "exit_code": self.code, "message": self.message});
        if let Some(d) = &self.detail {
            v["detail"] = d.clone();
        }
        v.to_string()
    }
}

impl From<FormatError> for Failure {
    fn from(e: FormatError) -> Self {
        Failure::input(e.to_string())
    }
}

impl From<TransportError> for Failure {
    fn from(e: TransportError) -> Self {
        match e {
            TransportError::SpaceMismatch => Failure::space_mismatch(),
            other => Failure::input(other.to_string()),
        }
    }
}

impl From<TowerError> for Failure {
    fn from(e: TowerError) -> Self {
        match e {
            TowerError::SpaceMismatch | TowerError::Transport(TransportError::SpaceMismatch) => {
                Failure::space_mismatch()
            }
            other => Failure::input(other.to_string()),
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| Failure::input(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn pretty(v: &impl serde::Serialize) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

fn load_space(path: &Path) -> Result<Arc<FiniteMetricSpace>, Failure> {
    let space = formats::parse_space(&read(path)?).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
    Ok(Arc::new(space))
}

/// Loads a measure, resolving its space from the file itself (paths are
/// relative to the measure file) or from `--space`.
fn load_measure(path: &Path, fallback: Option<&Arc<FiniteMetricSpace>>) -> Result<IdempotentMeasure, Failure> {
    let file = MeasureFile::parse(&read(path)?).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
    let space = match &file.space {
        Some(SpaceRef::Inline(s)) => Arc::new(s.clone().validate().map_err(|e| Failure::input(e.to_string()))?),
        Some(SpaceRef::Path(p)) => load_space(&path.parent().unwrap_or(Path::new(".")).join(p))?,
        None => fallback
            .cloned()
            .ok_or_else(|| Failure::input(format!("{}: no space given; pass --space", path.display())))?,
    };
    // share one allocation when the spaces coincide
    let space = match fallback {
        Some(f) if **f == *space => f.clone(),
        _ => space,
    };
    file.to_measure(space).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

fn cmd_dist(args: &DistArgs) -> Result<(), Failure> {
    let given = args.space.as_deref().map(load_space).transpose()?;
    let mu = load_measure(&args.mu, given.as_ref())?;
    let nu = load_measure(&args.nu, given.as_ref().or(Some(mu.space())))?;
    if *mu.space() != *nu.space() {
        return Err(Failure::space_mismatch());
    }
    let mode = Mode::from(args.metric.mode);
    let out = args.out.as_deref();
    if mode == Mode::Paper {
        return emit(out, &pretty(&transport::distance_paper_mode(&mu, &nu)?));
    }
    match args.metric.alg {
        AlgArg::Fast => emit(out, &pretty(&transport::distance_fast(&mu, &nu)?)),
        AlgArg::Oracle => emit(out, &pretty(&transport::distance_oracle(&mu, &nu)?)),
        AlgArg::Both => {
            let fast = transport::distance_fast(&mu, &nu)?;
            let oracle = transport::distance_oracle(&mu, &nu)?;
            let agree = fast.value == oracle.value;
            let both = json!({"agree": agree, "fast": fast, "oracle": oracle});
            emit(out, &pretty(&both))?;
            if agree {
                Ok(())
            } else {
                Err(Failure {
                    code: 3,
                    kind: "oracle-fast-disagreement",
                    message: format!("fast algorithm gave {}, oracle gave {}", fast.value, oracle.value),
                    detail: None,
                })
            }
        }
    }
}

fn cmd_verify(args: &VerifyArgs) -> Result<(), Failure> {
    let config = VerifyConfig::new(args.seed, args.instances);
    let run = verify::run(&config, &args.claims).map_err(Failure::input)?;
    emit(args.out.as_deref(), &pretty(&run))?;
    let failed: Vec<String> = run
        .reports
        .iter()
        .filter(|r| r.failed())
        .map(|r| match &r.scope {
            Some(s) => format!("{}/{s}", r.claim),
            None => r.claim.clone(),
        })
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure {
            code: 4,
            kind: "must-hold-violation",
            message: format!("violations in {}", failed.join(", ")),
            detail: Some(json!(failed)),
        })
    }
}

fn describe(mu: &IdempotentMeasure) -> String {
    let s = mu.space();
    mu.weights().map(|(i, w)| format!("{w} at {}", s.label(i))).collect::<Vec<_>>().join(" (+) ")
}

fn witness(r: &DistanceResult) -> String {
    let (rows, cols) = (r.witness.row_measure().space(), r.witness.col_measure().space());
    r.witness
        .pairs()
        .map(|((x, y), w)| format!("({}, {}) w={w}", rows.label(x), cols.label(y)))
        .collect::<Vec<_>>()
        .join(", ")
}

fn example1_transcript() -> Result<String, Failure> {
    let (mu1, mu2) = example1::measures();
    let f = example1::map();
    let (p1, p2) = (mu1.pushforward(&f).expect("same space"), mu2.pushforward(&f).expect("same space"));
    let mut t = String::new();
    let w = &mut t;
    writeln!(w, "f(x) = 1 - 4(x - 1/2)^2 for 0 <= x <= 1, x - 1 for 1 < x <= 10").unwrap();
    writeln!(w, "X = {{{}}}, diam {}", example1::DOMAIN_LABELS.join(", "), f.source().diameter()).unwrap();
    writeln!(w, "Y = {{{}}}, diam {}", example1::CODOMAIN_LABELS.join(", "), f.target().diameter()).unwrap();
    writeln!(w).unwrap();
    writeln!(w, "{:<6} f(x)", "x").unwrap();
    for i in 0..f.source().len() {
        writeln!(w, "{:<6} {}", f.source().label(i), f.target().label(f.apply(i))).unwrap();
    }
    writeln!(w).unwrap();
    writeln!(w, "mu1    = {}", describe(&mu1)).unwrap();
    writeln!(w, "mu2    = {}", describe(&mu2)).unwrap();
    writeln!(w, "f# mu1 = {}", describe(&p1)).unwrap();
    writeln!(w, "f# mu2 = {}", describe(&p2)).unwrap();
    for mode in [Mode::Paper, Mode::Coupling] {
        writeln!(w).unwrap();
        writeln!(w, "{mode} mode").unwrap();
        for (name, a, b) in [("d_X(mu1, mu2)", &mu1, &mu2), ("d_Y(f# mu1, f# mu2)", &p1, &p2)] {
            let r = match mode {
                Mode::Paper => transport::distance_paper_mode(a, b)?,
                Mode::Coupling => {
                    let fast = transport::distance_fast(a, b)?;
                    let oracle = transport::distance_oracle(a, b)?;
                    if fast.value != oracle.value {
                        return Err(Failure {
                            code: 3,
                            kind: "oracle-fast-disagreement",
                            message: format!("{name}: fast {} vs oracle {}", fast.value, oracle.value),
                            detail: None,
                        });
                    }
                    oracle
                }
            };
            let cut = if r.truncated { " (capped at diameter)" } else { "" };
            writeln!(w, "  {name:<20} = {}{cut}", r.value).unwrap();
            writeln!(w, "  {:<20}   witness {}", "", witness(&r)).unwrap();
        }
    }
    let own = transport::distance_paper_mode(&mu1, &mu1)?;
    writeln!(w).unwrap();
    writeln!(w, "paper mode self-distance d_X(mu1, mu1) = {}", own.value).unwrap();
    Ok(t)
}

fn cmd_example1(args: &Example1Args) -> Result<(), Failure> {
    emit(args.out.as_deref(), &example1_transcript()?)
}

fn cmd_tower(args: &TowerArgs) -> Result<(), Failure> {
    let base = load_space(&args.space)?;
    let parse = |p: &Path| -> Result<LimitPoint, Failure> {
        let e = formats::parse_tower_element(&read(p)?, &base)
            .map_err(|e| Failure::input(format!("{}: {e}", p.display())))?;
        Ok(LimitPoint::new(e))
    };
    let (p, q) = (parse(&args.a)?, parse(&args.b)?);
    let m = args.level.unwrap_or(p.level().max(q.level()));
    if m < p.level().max(q.level()) {
        return Err(Failure::input(format!("--level {m} is below the element levels {} and {}", p.level(), q.level())));
    }
    let mode = Mode::from(args.metric.mode);
    let algorithms: &[Algorithm] = match (mode, args.metric.alg) {
        (Mode::Paper, _) => &[Algorithm::ClosedForm],
        (_, AlgArg::Fast) => &[Algorithm::Fast],
        (_, AlgArg::Oracle) => &[Algorithm::Oracle],
        (_, AlgArg::Both) => &[Algorithm::Fast, Algorithm::Oracle],
    };
    let mut results = Vec::new();
    for &alg in algorithms {
        let tower = Tower::new(base.clone()).with_max_level((m + 1).max(DEFAULT_MAX_LEVEL)).with_metric(mode, alg);
        let here = tower.limit_distance_at(&p, &q, m)?;
        let above = tower.limit_distance_at(&p, &q, m + 1)?;
        results.push((alg, here, above));
    }
    let (_, value, above) = results[0];
    let mut out = json!({
        "levels": [p.level(), q.level()],
        "level": m,
        "mode": mode,
        "algorithm": results[0].0,
        "value": value,
        "self_check": {"level": m + 1, "value": above, "agrees": value == above},
    });
    if let Some(&(alg, other, _)) = results.get(1) {
        out["cross_check"] = json!({"algorithm": alg, "value": other, "agrees": other == value});
    }
    emit(args.out.as_deref(), &pretty(&out))?;
    if results.iter().any(|&(_, v, _)| v != value) {
        return Err(Failure {
            code: 3,
            kind: "oracle-fast-disagreement",
            message: "fast and oracle towers disagree".into(),
            detail: None,
        });
    }
    if value != above {
        return Err(Failure {
            code: 4,
            kind: "representative-dependence",
            message: format!("distance {value} at level {m} but {above} at level {}", m + 1),
            detail: None,
        });
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments").trim_start_matches("error: ");
            eprintln!("{}", Failure::input(first).report());
            return ExitCode::from(1);
        }
    };
    let result = match &cli.command {
        Command::Dist(a) => cmd_dist(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Example1(a) => cmd_example1(a),
        Command::Tower(a) => cmd_tower(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{}", f.report());
            ExitCode::from(f.code)
        }
    }
}
