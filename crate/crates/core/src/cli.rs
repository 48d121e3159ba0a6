//! Command-line front end. [`run`] parses arguments, executes one command and
//! returns the process exit status.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::battery::{run_battery, BatteryConfig};
use crate::causation::{causal_score, compare_all, CausalVerdict, DefinitionSpec, Options, Overlap};
use crate::error::Error;
use crate::kernel::{CpTheory, LawId, Outcome, Rational};
use crate::neuron::{leaf_matches, translate, NeuronDiagram};
use crate::parser::{format_story, format_theory, parse_literal, parse_literals, parse_story, parse_theory};
use crate::semantics::{build_tree, enumerate_branches, marginal, Budget, Schedule};
use crate::story::{Context, Story};
use crate::transform::{counterfactual, set_probability};

pub const EXIT_OK: i32 = 0;
pub const EXIT_DOMAIN: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_BUDGET: i32 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "cpcausal",
    version,
    about = "CP-logic interpreter and actual-causation engine"
)]
struct Cli {
    /// Maximum number of probability-tree nodes visited per query.
    #[arg(long, global = true, default_value_t = Budget::DEFAULT.0)]
    budget: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct TheoryArgs {
    /// Theory file (.cpl).
    theory: PathBuf,

    /// Override a head probability: `LABEL=VALUE`, or `LABEL.k=VALUE` for the
    /// k-th disjunct (1-based). Repeatable.
    #[arg(long = "set", value_name = "LABEL=VALUE")]
    settings: Vec<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Marginal probability of a conjunction of literals.
    Prob {
        #[command(flatten)]
        theory: TheoryArgs,
        #[arg(long)]
        query: String,
    },
    /// Probability of the query in the story's determinized theory after an intervention.
    Counterfactual {
        #[command(flatten)]
        theory: TheoryArgs,
        #[arg(long)]
        story: PathBuf,
        /// Literal to enforce: `~A` for do(not A), `A` for do(A).
        #[arg(long = "do", value_name = "LITERAL")]
        action: String,
        #[arg(long)]
        query: String,
    },
    /// Scores a cause/effect pair under one or all causation definitions.
    Cause {
        #[command(flatten)]
        theory: TheoryArgs,
        #[arg(long)]
        story: PathBuf,
        #[arg(long)]
        cause: String,
        #[arg(long)]
        effect: String,
        /// Definition name, or `all`.
        #[arg(long, default_value = "all")]
        definition: String,
        /// Print the modified theory used by each definition.
        #[arg(long)]
        show_theory: bool,
        /// Treatment of laws that are both intrinsic and irrelevant.
        #[arg(long, value_enum, default_value_t = OverlapArg::Irrelevant)]
        overlap: OverlapArg,
    },
    /// Lists every branch of the canonical probability tree.
    Stories {
        #[command(flatten)]
        theory: TheoryArgs,
    },
    /// Renders the canonical probability tree.
    Tree {
        #[command(flatten)]
        theory: TheoryArgs,
    },
    /// Translates a neuron diagram into a theory and the story of its firing.
    ImportNeuron {
        /// Diagram file (.nd.json).
        diagram: PathBuf,
        /// Where to write the theory; printed when absent.
        #[arg(long)]
        out_theory: Option<PathBuf>,
        /// Where to write the story; printed when absent.
        #[arg(long)]
        out_story: Option<PathBuf>,
    },
    /// Runs the randomized cross-checks on generated corpora.
    Battery {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 200)]
        theories: usize,
        #[arg(long, default_value_t = 200)]
        diagrams: usize,
        #[arg(long, default_value_t = 6)]
        max_nodes: usize,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum OverlapArg {
    /// Laws in both sets are deleted.
    Irrelevant,
    /// Laws in both sets are kept, pinned.
    Intrinsic,
}

enum Failure {
    Usage(String),
    /// Rejected source text, already prefixed with the file name.
    Invalid(String),
    Domain(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Domain(e)
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

/// Exact value followed by its decimal expansion, `≈` marking a rounded one.
pub fn format_rational(r: &Rational) -> String {
    let (decimal, exact) = r.to_decimal();
    let sign = if exact { "=" } else { "≈" };
    format!("{r} ({sign} {decimal})")
}

/// Parses `args` (program name first), runs the command and returns the exit
/// status. Regular output goes to `out`, diagnostics to `err`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK {
                out.write_all(text.as_bytes())
            } else {
                err.write_all(text.as_bytes())
            };
            return code;
        }
    };
    let mut text = String::new();
    let result = execute(&cli, &mut text);
    let _ = out.write_all(text.as_bytes());
    match result {
        Ok(code) => code,
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_USAGE
        }
        Err(Failure::Invalid(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_DOMAIN
        }
        Err(Failure::Domain(e)) => {
            let _ = writeln!(err, "error: {e}");
            if e.is_resource_limit() {
                EXIT_BUDGET
            } else {
                EXIT_DOMAIN
            }
        }
    }
}

fn read(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))
}

fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    std::fs::write(path, contents).map_err(|e| Failure::Usage(format!("cannot write {}: {e}", path.display())))
}

fn with_source<T>(path: &Path, r: crate::Result<T>) -> CliResult<T> {
    r.map_err(|e| match e {
        Error::Syntax(d) => Failure::Invalid(format!("{}:{d}", path.display())),
        other => Failure::Domain(other),
    })
}

fn parse_setting(text: &str) -> CliResult<(String, Option<usize>, Rational)> {
    let (target, value) = text
        .split_once('=')
        .ok_or_else(|| Failure::Usage(format!("--set expects LABEL=VALUE, got `{text}`")))?;
    let value = Rational::parse_probability(value.trim())?;
    let (label, index) = match target.split_once('.') {
        Some((label, k)) => match k.parse::<usize>() {
            Ok(k) if k >= 1 => (label, Some(k - 1)),
            _ => return Err(Failure::Usage(format!("`{k}` is not a disjunct index"))),
        },
        None => (target, None),
    };
    Ok((label.trim().to_string(), index, value))
}

fn load_theory(args: &TheoryArgs) -> CliResult<Arc<CpTheory>> {
    let mut theory = with_source(&args.theory, parse_theory(&read(&args.theory)?))?;
    for s in &args.settings {
        let (label, index, value) = parse_setting(s)?;
        theory = set_probability(&theory, &label, index, value)?;
    }
    Ok(Arc::new(theory))
}

fn load_story(path: &Path, theory: &Arc<CpTheory>) -> CliResult<Story> {
    with_source(path, parse_story(&read(path)?, theory.clone()))
}

fn execute(cli: &Cli, out: &mut String) -> CliResult<i32> {
    let budget = Budget(cli.budget);
    match &cli.command {
        Command::Prob { theory, query } => {
            let theory = load_theory(theory)?;
            let p = marginal(&theory, &parse_literals(query)?, budget)?;
            writeln!(out, "{}", format_rational(&p)).unwrap();
        }
        Command::Counterfactual {
            theory,
            story,
            action,
            query,
        } => {
            let theory = load_theory(theory)?;
            let story = load_story(story, &theory)?;
            let p = counterfactual(&story, &parse_literal(action)?, &parse_literals(query)?, budget)?;
            writeln!(out, "{}", format_rational(&p)).unwrap();
        }
        Command::Cause {
            theory,
            story,
            cause,
            effect,
            definition,
            show_theory,
            overlap,
        } => {
            let theory = load_theory(theory)?;
            let story = load_story(story, &theory)?;
            let ctx = Context::new(story, parse_literal(cause)?, parse_literal(effect)?)?.with_budget(budget);
            let options = Options {
                overlap: match overlap {
                    OverlapArg::Irrelevant => Overlap::IrrelevantWins,
                    OverlapArg::Intrinsic => Overlap::IntrinsicWins,
                },
            };
            let verdicts = if definition == "all" {
                compare_all(&ctx, options)?
            } else {
                let spec = DefinitionSpec::by_name(definition).ok_or_else(|| {
                    let names: Vec<&str> = DefinitionSpec::ALL.iter().map(|s| s.name.as_str()).collect();
                    Failure::Usage(format!(
                        "unknown definition `{definition}`; expected one of {} or all",
                        names.join(", ")
                    ))
                })?;
                vec![causal_score(spec, &ctx, options)?]
            };
            if ctx.is_extension() {
                writeln!(
                    out,
                    "note: negative effect; scores are the probability that {} holds after the intervention",
                    ctx.effect().atom
                )
                .unwrap();
            }
            for v in &verdicts {
                render_verdict(out, v, *show_theory);
            }
        }
        Command::Stories { theory } => {
            let theory = load_theory(theory)?;
            let branches = enumerate_branches(&theory, &Schedule::Canonical, budget)?;
            let mut total = Rational::zero();
            for (i, b) in branches.iter().enumerate() {
                total = total + b.probability().clone();
                let leaf: Vec<String> = b.leaf_atoms().iter().map(ToString::to_string).collect();
                let steps = format_story(b);
                let steps = if steps.is_empty() {
                    "(no steps)".to_string()
                } else {
                    steps
                };
                writeln!(
                    out,
                    "{:>3}  {:<22} {steps}  {{{}}}",
                    i + 1,
                    format_rational(b.probability()),
                    leaf.join(", ")
                )
                .unwrap();
            }
            writeln!(out, "{} branches, total {}", branches.len(), format_rational(&total)).unwrap();
        }
        Command::Tree { theory } => {
            let theory = load_theory(theory)?;
            out.push_str(&build_tree(&theory, &Schedule::Canonical, budget)?.render(&theory));
        }
        Command::ImportNeuron {
            diagram,
            out_theory,
            out_story,
        } => {
            let d = with_source(diagram, NeuronDiagram::from_json(&read(diagram)?))?;
            let (theory, story) = translate(&d)?;
            let theory_text = format_theory(&theory);
            let story_text = format_story(&story) + "\n";
            match out_theory {
                Some(p) => write_file(p, &theory_text)?,
                None => out.push_str(&theory_text),
            }
            match out_story {
                Some(p) => write_file(p, &story_text)?,
                None => write!(out, "story: {story_text}").unwrap(),
            }
            let fired: Vec<String> = d.fired().into_iter().collect();
            let ok = leaf_matches(&d, &story);
            writeln!(
                out,
                "leaf check: {} (firing neurons {{{}}})",
                if ok { "ok" } else { "MISMATCH" },
                fired.join(", ")
            )
            .unwrap();
            return Ok(if ok { EXIT_OK } else { EXIT_DOMAIN });
        }
        Command::Battery {
            seed,
            theories,
            diagrams,
            max_nodes,
        } => {
            let config = BatteryConfig {
                seed: *seed,
                theories: *theories,
                diagrams: *diagrams,
                max_nodes: *max_nodes,
                budget,
                ..Default::default()
            };
            let reports = run_battery(&config)?;
            let mut clean = true;
            for r in &reports {
                writeln!(out, "{r}").unwrap();
                for d in r.discrepancies.iter().take(3) {
                    writeln!(out, "  {}", d.replace('\n', "\n  ")).unwrap();
                }
                clean &= r.passed();
            }
            return Ok(if clean { EXIT_OK } else { EXIT_DOMAIN });
        }
    }
    Ok(EXIT_OK)
}

fn law_list(laws: impl IntoIterator<Item = LawId>) -> String {
    let ids: Vec<String> = laws.into_iter().map(|id| id.to_string()).collect();
    format!("{{{}}}", ids.join(", "))
}

fn pinned_list(laws: &std::collections::BTreeMap<LawId, Outcome>) -> String {
    let ids: Vec<String> = laws.iter().map(|(id, o)| format!("{id}:{o}")).collect();
    format!("{{{}}}", ids.join(", "))
}

fn render_verdict(out: &mut String, v: &CausalVerdict, show_theory: bool) {
    let verdict = if v.is_cause { "cause" } else { "not a cause" };
    writeln!(
        out,
        "{:<13} {:<22} {:<12} intrinsic {} irrelevant {}",
        v.definition.as_str(),
        format_rational(&v.score),
        verdict,
        pinned_list(&v.intrinsic),
        law_list(v.irrelevant.iter().copied()),
    )
    .unwrap();
    if let Some(def5) = &v.def5 {
        writeln!(
            out,
            "  warning: story is not simple; reduction-based verdict: {} (best {}, witness {})",
            if def5.holds { "cause" } else { "not a cause" },
            format_rational(&def5.best),
            format_story(&def5.witness),
        )
        .unwrap();
    }
    if show_theory {
        for line in format_theory(&v.modified_theory).lines() {
            writeln!(out, "    {line}").unwrap();
        }
    }
}
