//! Flag parsing, study validation, and the command-line error taxonomy.
//!
//! Validation happens entirely before any assembly starts: a configuration
//! that cannot produce a meaningful study (a mixed solve at Lc = 0, a
//! convergence ladder with one grid, a limit problem for a primal
//! formulation) is rejected with an actionable message and exit code 2.

use rmfem::analysis::AnalysisError;
use rmfem::assembly::{AssemblyError, CharacteristicLength, Formulation};
use rmfem::cases::{self, BenchmarkCase};
use rmfem::linsys::SolveError;
use rmfem::mesh::MeshError;
use std::fmt;
use std::path::PathBuf;

/// Flags shared by every subcommand. Each command validates the subset it
/// uses and rejects flags that would silently do nothing.
#[derive(clap::Args)]
pub struct StudyArgs {
    /// Benchmark case name from the registry
    #[arg(long)]
    pub case: Option<String>,

    /// Discretization: primal-hybrid | mixed-hybrid | primal-nodal | full-gradient
    #[arg(long, default_value = "primal-hybrid")]
    pub formulation: String,

    /// Polynomial order (1 or 2)
    #[arg(long, default_value_t = 1)]
    pub order: usize,

    /// Structured grid sizes, comma separated; each entry n yields an n x n grid
    #[arg(long, value_delimiter = ',')]
    pub grid: Vec<usize>,

    /// Mesh JSON file (as written by mesh-gen), an alternative to --grid
    #[arg(long)]
    pub mesh: Option<PathBuf>,

    /// Interior-node perturbation magnitude in cell units, in [0, 0.5)
    #[arg(long, default_value_t = 0.0)]
    pub perturb: f64,

    /// Seed for the mesh perturbation
    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Characteristic length values, comma separated; the literal 'inf'
    /// selects the curl-free limit problem
    #[arg(long, value_delimiter = ',')]
    pub lc: Vec<String>,

    /// Assembly quadrature override: number of 1D Gauss points, 1 to 6
    #[arg(long)]
    pub quad: Option<usize>,

    /// Output path; the JSON manifest is written next to it with a
    /// .manifest.json extension
    #[arg(long)]
    pub out: Option<PathBuf>,

    /// Threads for the element loops; the default of 1 keeps every CSV
    /// column except wall_ms bitwise reproducible
    #[arg(long, default_value_t = 1)]
    pub threads: usize,

    /// Golden CSV file to compare the produced table against; a mismatch
    /// outside the per-column tolerances exits with code 4
    #[arg(long)]
    pub golden: Option<PathBuf>,
}

/// A characteristic-length entry from the command line: a finite value or
/// the limit-problem sentinel.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LcSpec {
    Finite(f64),
    Infinite,
}

impl LcSpec {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let t = text.trim();
        if t.eq_ignore_ascii_case("inf") {
            return Ok(LcSpec::Infinite);
        }
        match t.parse::<f64>() {
            Ok(v) if v.is_finite() && v >= 0.0 => Ok(LcSpec::Finite(v)),
            Ok(_) => Err(CliError::Config(format!(
                "characteristic length '{t}' must be finite and non-negative (or the literal 'inf')"
            ))),
            Err(_) => Err(CliError::Config(format!(
                "cannot parse characteristic length '{t}' (expected a number or 'inf')"
            ))),
        }
    }

    pub fn to_characteristic(self) -> CharacteristicLength {
        match self {
            LcSpec::Finite(v) => CharacteristicLength::Finite(v),
            LcSpec::Infinite => CharacteristicLength::Infinite,
        }
    }

    pub fn label(&self) -> String {
        match self {
            LcSpec::Finite(v) => format!("{v}"),
            LcSpec::Infinite => "inf".to_string(),
        }
    }

    pub fn finite(&self) -> Option<f64> {
        match self {
            LcSpec::Finite(v) => Some(*v),
            LcSpec::Infinite => None,
        }
    }
}

/// Error taxonomy mapped to process exit codes.
#[derive(Debug)]
pub enum CliError {
    /// Invalid or inconsistent configuration, unreadable inputs: exit 2.
    Config(String),
    /// The assembled system could not be solved to contract: exit 3.
    Solver(String),
    /// Golden-file comparison mismatch: exit 4.
    Golden(String),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Solver(_) => 3,
            CliError::Golden(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "{m}"),
            CliError::Solver(m) => write!(f, "solver failure: {m}"),
            CliError::Golden(m) => write!(f, "golden comparison failed: {m}"),
        }
    }
}

impl From<MeshError> for CliError {
    fn from(e: MeshError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<AssemblyError> for CliError {
    fn from(e: AssemblyError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<AnalysisError> for CliError {
    fn from(e: AnalysisError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<SolveError> for CliError {
    fn from(e: SolveError) -> Self {
        CliError::Solver(e.to_string())
    }
}

/// A fully validated study, ready to run.
pub struct Study {
    pub command: &'static str,
    pub case: BenchmarkCase,
    /// True when residual-check ran without --case and walks the registry.
    pub all_cases: bool,
    pub formulation: Formulation,
    pub lcs: Vec<LcSpec>,
    pub grids: Vec<usize>,
    pub mesh_file: Option<PathBuf>,
    pub perturb: f64,
    pub seed: u64,
    pub quad: Option<usize>,
    pub threads: usize,
    pub out: PathBuf,
    pub golden: Option<PathBuf>,
}

impl Study {
    /// Serializable echo of the resolved configuration, defaults included,
    /// so a manifest suffices to repeat the run exactly.
    pub fn config_json(&self) -> serde_json::Value {
        serde_json::json!({
            "command": self.command,
            "case": if self.all_cases { "all" } else { self.case.name },
            "formulation": self.formulation.to_string(),
            "order": self.formulation.order(),
            "grids": self.grids,
            "mesh_file": self.mesh_file.as_ref().map(|p| p.display().to_string()),
            "perturb": self.perturb,
            "seed": self.seed,
            "lc": self.lcs.iter().map(LcSpec::label).collect::<Vec<_>>(),
            "quad": self.quad,
            "threads": self.threads,
            "out": self.out.display().to_string(),
            "golden": self.golden.as_ref().map(|p| p.display().to_string()),
        })
    }

    /// The case whose exact fields errors are measured against. Lc sweeps
    /// measure against the companion "<case>_limit" entry when the registry
    /// has one; every other command uses the case itself.
    pub fn measure_case(&self) -> BenchmarkCase {
        if self.command == "lc-sweep" {
            if let Some(limit) = cases::by_name(&format!("{}_limit", self.case.name)) {
                return limit;
            }
        }
        cases::by_name(self.case.name).expect("validated case name")
    }
}

fn known_cases() -> String {
    cases::registry()
        .iter()
        .map(|c| c.name)
        .collect::<Vec<_>>()
        .join(", ")
}

fn default_out(command: &str) -> PathBuf {
    match command {
        "mesh-gen" => PathBuf::from("mesh.json"),
        other => PathBuf::from(format!("{other}.csv")),
    }
}

/// Validates the flag set for one command and resolves every default.
pub fn validate(command: &'static str, args: &StudyArgs) -> Result<Study, CliError> {
    let case = match (&args.case, command) {
        (Some(name), _) => cases::by_name(name).ok_or_else(|| {
            CliError::Config(format!(
                "unknown case '{name}'; known cases: {}",
                known_cases()
            ))
        })?,
        (None, "residual-check") => {
            // Placeholder: residual-check without --case walks the whole
            // registry; any entry serves as the carrier here.
            cases::registry().into_iter().next().expect("registry is not empty")
        }
        (None, _) => {
            return Err(CliError::Config(format!(
                "--case is required; known cases: {}",
                known_cases()
            )))
        }
    };

    let formulation: Formulation = format!("{}:{}", args.formulation, args.order)
        .parse()
        .map_err(CliError::Config)?;
    formulation.validate()?;

    for &n in &args.grid {
        if n == 0 {
            return Err(CliError::Config(
                "grid sizes must be at least 1".to_string(),
            ));
        }
    }
    if !args.grid.is_empty() && args.mesh.is_some() {
        return Err(CliError::Config(
            "--grid and --mesh are alternatives; pass one of them".to_string(),
        ));
    }

    if !(0.0..0.5).contains(&args.perturb) {
        return Err(CliError::Config(format!(
            "--perturb {} is outside [0, 0.5); at 0.5 neighbouring nodes could cross",
            args.perturb
        )));
    }
    if args.perturb > 0.0 && args.mesh.is_some() {
        return Err(CliError::Config(
            "--perturb applies when generating a grid; a mesh file is used as-is".to_string(),
        ));
    }

    let mut lcs = args
        .lc
        .iter()
        .map(|t| LcSpec::parse(t))
        .collect::<Result<Vec<_>, _>>()?;
    if lcs.is_empty() {
        let fallback = match case.default_params.l_c {
            CharacteristicLength::Finite(v) => LcSpec::Finite(v),
            CharacteristicLength::Infinite => LcSpec::Infinite,
        };
        lcs.push(fallback);
    }

    for lc in &lcs {
        match (lc, formulation.is_mixed()) {
            (LcSpec::Finite(v), true) if *v == 0.0 => {
                return Err(CliError::Config(
                    "the mixed formulation is undefined at Lc = 0 (the moment stress divides \
                     by mu_macro Lc^2); use a primal formulation for the Lc = 0 limit"
                        .to_string(),
                ))
            }
            (LcSpec::Infinite, false) => {
                return Err(CliError::Config(
                    "Lc = inf selects the curl-free limit problem, which only the mixed \
                     formulation can pose; pass --formulation mixed-hybrid"
                        .to_string(),
                ))
            }
            _ => {}
        }
    }

    if let Some(q) = args.quad {
        if !(1..=6).contains(&q) {
            return Err(CliError::Config(format!(
                "--quad {q} is out of range; the quadrature tables cover 1 to 6 points per axis"
            )));
        }
    }
    if args.threads == 0 {
        return Err(CliError::Config("--threads must be at least 1".to_string()));
    }

    let needs_one_grid = |grids: &[usize], mesh: &Option<PathBuf>| -> Result<(), CliError> {
        match (grids.len(), mesh.is_some()) {
            (1, false) | (0, true) => Ok(()),
            (0, false) => Err(CliError::Config(
                "pass --grid n or --mesh FILE to define the discretization".to_string(),
            )),
            _ => Err(CliError::Config(
                "this command runs on a single fixed grid; pass one --grid entry".to_string(),
            )),
        }
    };

    match command {
        "solve" => {
            needs_one_grid(&args.grid, &args.mesh)?;
            if lcs.len() != 1 {
                return Err(CliError::Config(
                    "solve takes a single --lc value; use lc-sweep for a list".to_string(),
                ));
            }
        }
        "convergence" => {
            if args.mesh.is_some() {
                return Err(CliError::Config(
                    "a convergence ladder needs a family of structured grids; pass --grid \
                     n1,n2,... instead of --mesh"
                        .to_string(),
                ));
            }
            if args.grid.len() < 2 {
                return Err(CliError::Config(
                    "a convergence ladder needs at least two grids, e.g. --grid 8,16,32"
                        .to_string(),
                ));
            }
            if args.grid.windows(2).any(|w| w[1] <= w[0]) {
                return Err(CliError::Config(
                    "--grid entries must be strictly increasing for a ladder".to_string(),
                ));
            }
            if lcs.len() != 1 {
                return Err(CliError::Config(
                    "a convergence ladder holds Lc fixed; pass a single --lc".to_string(),
                ));
            }
        }
        "lc-sweep" => {
            needs_one_grid(&args.grid, &args.mesh)?;
            if lcs.len() < 2 {
                return Err(CliError::Config(
                    "an Lc sweep needs at least two --lc values, e.g. --lc 1e2,1e3,1e4"
                        .to_string(),
                ));
            }
        }
        "energy-sweep" => {
            needs_one_grid(&args.grid, &args.mesh)?;
            if matches!(formulation, Formulation::FullGradientNodal(_)) {
                return Err(CliError::Config(
                    "energy-sweep compares the chosen formulation against full-gradient; \
                     pick primal-hybrid, mixed-hybrid, or primal-nodal"
                        .to_string(),
                ));
            }
            if lcs.iter().any(|l| matches!(l, LcSpec::Infinite)) {
                return Err(CliError::Config(
                    "the full-gradient comparison column is undefined at Lc = inf; \
                     use finite values"
                        .to_string(),
                ));
            }
        }
        "mesh-gen" => {
            if args.mesh.is_some() {
                return Err(CliError::Config(
                    "mesh-gen writes a mesh file; it does not read one".to_string(),
                ));
            }
            if args.grid.len() != 1 {
                return Err(CliError::Config(
                    "mesh-gen takes exactly one --grid entry".to_string(),
                ));
            }
            if args.golden.is_some() {
                return Err(CliError::Config(
                    "--golden compares CSV tables; mesh-gen produces a mesh file".to_string(),
                ));
            }
        }
        "residual-check" => {
            if !args.grid.is_empty() || args.mesh.is_some() {
                return Err(CliError::Config(
                    "residual-check samples the strong form pointwise and takes no grid"
                        .to_string(),
                ));
            }
            if lcs.iter().any(|l| matches!(l, LcSpec::Infinite)) {
                return Err(CliError::Config(
                    "residual-check evaluates the finite-Lc strong form; pass a finite --lc"
                        .to_string(),
                ));
            }
            if lcs.len() > 1 {
                return Err(CliError::Config(
                    "residual-check takes at most one --lc override".to_string(),
                ));
            }
        }
        other => unreachable!("unknown command {other}"),
    }

    Ok(Study {
        command,
        all_cases: command == "residual-check" && args.case.is_none(),
        case,
        formulation,
        lcs,
        grids: args.grid.clone(),
        mesh_file: args.mesh.clone(),
        perturb: args.perturb,
        seed: args.seed,
        quad: args.quad,
        threads: args.threads,
        out: args.out.clone().unwrap_or_else(|| default_out(command)),
        golden: args.golden.clone(),
    })
}
