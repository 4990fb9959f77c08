//! `shiftrank`: batch runner for the shiftrank experiments.
//!
//! Exit status is 0 when every check passes, 1 when a check fails and 2 when
//! the input or a precondition is rejected.

use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use shiftrank_core::algebra::{PrimeField, DEFAULT_PRIME};
use shiftrank_core::bounds::{self, BoundConstants, FamilyShape};
use shiftrank_core::families::{self, FamilyReport, NwParams};
use shiftrank_core::poly::{mono_distance, parse_monomial, Monomial, SparsePoly, VarTable};
use shiftrank_core::spanspace::DEFAULT_BUDGET_CELLS;
use shiftrank_core::suites::{self, ExtensionConfig, Depth4Config, LmCountConfig, SuiteReport};
use shiftrank_core::witness::{self, WitnessPoint};

#[derive(Parser, Debug)]
#[command(name = "shiftrank", version, about = "Exact checks for shifted partial derivatives and IMM Hessian witnesses")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// Seed for randomized suites (required by lemma3, prop7 and lemma9).
    #[arg(long, global = true, env = "SHIFTRANK_SEED")]
    seed: Option<u64>,
    /// Largest enumeration or matrix size, in cells, before a run is refused.
    #[arg(long, global = true, env = "SHIFTRANK_BUDGET_CELLS", default_value_t = DEFAULT_BUDGET_CELLS,
          value_parser = clap::value_parser!(u64).range(1..))]
    budget_cells: u64,
    /// Output format; csv is available for distance, the suites and bounds.
    #[arg(long, global = true, env = "SHIFTRANK_FORMAT", value_enum)]
    format: Option<Format>,
    /// Write the output here instead of stdout.
    #[arg(long, global = true, env = "SHIFTRANK_OUT")]
    out: Option<PathBuf>,
    /// Prime modulus for coefficient and rank arithmetic.
    #[arg(long, global = true, env = "SHIFTRANK_PRIME", default_value_t = DEFAULT_PRIME)]
    prime: u64,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Pairwise monomial distances.
    Distance {
        /// Monomials such as `x1^2*x2`.
        monomials: Vec<String>,
        /// File with one monomial per line (blank lines and `#` comments skipped).
        #[arg(long)]
        file: Option<PathBuf>,
        /// Comma-separated variable names; names outside the list are rejected.
        /// Defaults to the names in order of first appearance.
        #[arg(long)]
        vars: Option<String>,
    },
    /// Design polynomial family: counts, single-monomial prefix derivatives and
    /// their pairwise distances.
    Nw {
        #[arg(long)]
        n: u64,
        #[arg(long)]
        k: u64,
    },
    /// Leading monomials of the restricted matrix-product derivatives.
    ImmLm {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
    },
    /// Randomized check of the extension bound against exact shift counts.
    #[command(visible_alias = "extension")]
    Lemma3 {
        #[arg(long, default_value_t = 100)]
        trials: usize,
    },
    /// Shifted derivative dimension against shifted leading-monomial count.
    #[command(visible_alias = "lm-count")]
    Prop7 {
        #[arg(long, default_value_t = 50)]
        trials: usize,
        /// Check this polynomial instead of random ones.
        #[arg(long)]
        poly: Option<String>,
        /// Derivative order (with --poly).
        #[arg(long, default_value_t = 1)]
        k: u32,
        /// Shift degree (with --poly).
        #[arg(long, default_value_t = 1)]
        ell: u32,
    },
    /// Depth-4 upper bound against exact shifted dimension of random circuits.
    #[command(visible_alias = "depth4")]
    Lemma9 {
        #[arg(long, default_value_t = 100)]
        trials: usize,
        /// Pin the derivative order for every circuit.
        #[arg(long)]
        k: Option<u32>,
        /// Pin the shift degree for every circuit.
        #[arg(long)]
        ell: Option<u32>,
    },
    /// Parameter sweep of the circuit-size bound, one CSV row per degree.
    Bounds(BoundsArgs),
    /// Construct (or replay) a zero of IMM_{n,d} with large Hessian rank.
    Witness {
        #[arg(long, required_unless_present = "input")]
        n: Option<usize>,
        #[arg(long, required_unless_present = "input")]
        d: Option<usize>,
        /// Verify the point: zero value, Hessian rank, prefix invariant.
        #[arg(long)]
        verify: bool,
        /// Also compute the Hessian rank over the rationals.
        #[arg(long, env = "SHIFTRANK_EXACT_RANK")]
        exact_rank: bool,
        /// Replay a witness JSON file instead of constructing one; implies --verify.
        #[arg(long, conflicts_with_all = ["n", "d"])]
        input: Option<PathBuf>,
    },
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Preset {
    Nw,
    Imm,
    Custom,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Shape {
    Nw,
    Imm,
}

#[derive(Args, Debug)]
struct BoundsArgs {
    #[arg(long, value_enum, default_value_t = Preset::Nw)]
    preset: Preset,
    /// Family shape for the custom preset.
    #[arg(long, value_enum, default_value_t = Shape::Nw)]
    family: Shape,
    /// Comma-separated degrees n; an empty list gives a header-only table.
    #[arg(long, default_value = "100,1000,10000,100000,1000000")]
    grid: String,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    c_prime: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    pexp: Option<u32>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn field(g: &Global) -> Result<PrimeField> {
    PrimeField::new(g.prime).map_err(Into::into)
}

fn seed(g: &Global) -> Result<u64> {
    g.seed.context("randomized suites need --seed (or SHIFTRANK_SEED)")
}

fn emit(g: &Global, body: &[u8]) -> Result<()> {
    match &g.out {
        Some(path) => fs::write(path, body).with_context(|| format!("writing {}", path.display())),
        None => {
            let mut out = io::stdout().lock();
            out.write_all(body)?;
            out.flush()?;
            Ok(())
        }
    }
}

fn emit_json(g: &Global, value: &impl Serialize) -> Result<()> {
    let mut body = serde_json::to_vec_pretty(value)?;
    body.push(b'\n');
    emit(g, &body)
}

fn json_only(g: &Global, command: &str) -> Result<()> {
    if g.format == Some(Format::Csv) {
        bail!("{command} writes JSON only");
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<bool> {
    let g = &cli.global;
    match &cli.command {
        Command::Distance { monomials, file, vars } => cmd_distance(g, monomials, file.as_ref(), vars.as_deref()),
        Command::Nw { n, k } => cmd_nw(g, *n, *k),
        Command::ImmLm { n, k } => cmd_imm_lm(g, *n, *k),
        Command::Lemma3 { trials } => {
            let report = suites::extension_suite(*trials, seed(g)?, ExtensionConfig::default(), g.budget_cells);
            emit_suite(g, &report, |c| {
                vec![
                    c.nvars.to_string(),
                    c.ell.to_string(),
                    c.distance.to_string(),
                    c.monomials.join(";"),
                    c.exact.to_string(),
                    c.bound.to_string(),
                    c.ok.to_string(),
                    c.error.clone().unwrap_or_default(),
                ]
            }, &["N", "ell", "d", "monomials", "exact", "bound", "ok", "error"], |c| c.ok)
        }
        Command::Prop7 { trials, poly, k, ell } => cmd_lm_count(g, *trials, poly.as_deref(), *k, *ell),
        Command::Lemma9 { trials, k, ell } => {
            let cfg = Depth4Config {
                order: *k,
                shift: *ell,
                ..Depth4Config::default()
            };
            if let Some(k) = k {
                if *k as usize > cfg.max_fan_in {
                    bail!("derivative order {k} exceeds the largest product fan-in {}", cfg.max_fan_in);
                }
            }
            let report = suites::depth4_suite(*trials, seed(g)?, cfg, field(g)?, g.budget_cells);
            emit_suite(g, &report, |c| {
                vec![
                    c.nvars.to_string(),
                    c.top_fan_in.to_string(),
                    c.fan_in.to_string(),
                    c.factor_degree.to_string(),
                    c.k.to_string(),
                    c.ell.to_string(),
                    c.circuit.iter().map(|t| t.iter().map(|q| format!("({q})")).collect::<Vec<_>>().join("*")).collect::<Vec<_>>().join(" + "),
                    c.dimension.to_string(),
                    c.bound.to_string(),
                    c.ok.to_string(),
                    c.error.clone().unwrap_or_default(),
                ]
            }, &["N", "top_fan_in", "D", "t", "k", "ell", "circuit", "dimension", "bound", "ok", "error"], |c| c.ok)
        }
        Command::Bounds(args) => cmd_bounds(g, args),
        Command::Witness {
            n,
            d,
            verify,
            exact_rank,
            input,
        } => cmd_witness(g, *n, *d, *verify, *exact_rank, input.as_ref()),
    }
}

fn emit_suite<C: Serialize>(
    g: &Global,
    report: &SuiteReport<C>,
    row: impl Fn(&C) -> Vec<String>,
    header: &[&str],
    ok: impl Fn(&C) -> bool,
) -> Result<bool> {
    for (i, case) in report.cases.iter().enumerate().filter(|(_, c)| !ok(c)) {
        eprintln!("{} case {i} failed: {}", report.suite, serde_json::to_string(case)?);
    }
    match g.format.unwrap_or(Format::Json) {
        Format::Json => emit_json(g, report)?,
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            let mut full = vec!["case"];
            full.extend_from_slice(header);
            w.write_record(&full)?;
            for (i, case) in report.cases.iter().enumerate() {
                let mut rec = vec![i.to_string()];
                rec.extend(row(case));
                w.write_record(&rec)?;
            }
            emit(g, &w.into_inner()?)?;
        }
    }
    Ok(report.all_pass())
}

fn variable_names(text: &str) -> Vec<String> {
    let mut names: Vec<String> = Vec::new();
    let mut current = String::new();
    for ch in text.chars().chain(std::iter::once(' ')) {
        let continues = ch.is_ascii_alphanumeric() || ch == '_';
        let starts = ch.is_ascii_alphabetic() || ch == '_';
        if (current.is_empty() && starts) || (!current.is_empty() && continues) {
            current.push(ch);
        } else if !current.is_empty() {
            if !names.contains(&current) {
                names.push(std::mem::take(&mut current));
            }
            current.clear();
        }
    }
    names
}

fn cmd_distance(g: &Global, inline: &[String], file: Option<&PathBuf>, vars: Option<&str>) -> Result<bool> {
    let mut texts: Vec<String> = inline.to_vec();
    if let Some(path) = file {
        let body = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        texts.extend(
            body.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .map(String::from),
        );
    }
    if texts.is_empty() {
        bail!("no monomials given");
    }
    let names = match vars {
        Some(list) => list.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect(),
        None => variable_names(&texts.join(" ")),
    };
    let table = VarTable::new(names)?;
    let monomials: Vec<Monomial> = texts
        .iter()
        .enumerate()
        .map(|(i, t)| parse_monomial(t, &table).with_context(|| format!("monomial {} `{t}`", i + 1)))
        .collect::<Result<_>>()?;
    let matrix: Vec<Vec<u32>> = monomials
        .iter()
        .map(|a| monomials.iter().map(|b| mono_distance(a, b)).collect())
        .collect();
    match g.format.unwrap_or(Format::Json) {
        Format::Json => emit_json(
            g,
            &json!({
                "monomials": monomials.iter().map(|m| m.render(&table)).collect::<Vec<_>>(),
                "distances": matrix,
            }),
        )?,
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            let rendered: Vec<String> = monomials.iter().map(|m| m.render(&table)).collect();
            let mut header = vec![String::new()];
            header.extend(rendered.iter().cloned());
            w.write_record(&header)?;
            for (name, row) in rendered.iter().zip(&matrix) {
                let mut rec = vec![name.clone()];
                rec.extend(row.iter().map(u32::to_string));
                w.write_record(&rec)?;
            }
            emit(g, &w.into_inner()?)?;
        }
    }
    Ok(true)
}

fn cmd_nw(g: &Global, n: u64, k: u64) -> Result<bool> {
    json_only(g, "nw")?;
    let params = NwParams::new(n, k)?;
    let nw = families::nw_poly(params, field(g)?, g.budget_cells)?;
    let count = nw.len();
    let (single, min) = match families::nw_derivative_family(params, &nw) {
        Ok(fam) => (true, shiftrank_core::poly::min_pairwise_distance(fam.iter().map(|(_, m)| m))),
        Err(e) => {
            eprintln!("{e}");
            (false, None)
        }
    };
    let required = n.saturating_sub(2 * k);
    let pass = count as u128 == (n as u128).pow(k as u32) && single && min.is_none_or(|m| m as u64 >= required);
    emit_json(
        g,
        &FamilyReport {
            family: "nw".into(),
            n,
            k: Some(k),
            d: None,
            count,
            min_pairwise_distance: min,
            required_distance: Some(required),
            single_monomial_derivatives: Some(single),
            max_set_overlap: None,
            prime: Some(n),
            pass,
        },
    )?;
    Ok(pass)
}

fn cmd_imm_lm(g: &Global, n: usize, k: usize) -> Result<bool> {
    json_only(g, "imm-lm")?;
    let fam = families::imm_restricted_lm_family(n, k)?;
    let count = fam.members.len();
    let min = fam.min_pairwise_distance();
    let overlap = fam.max_pairwise_overlap();
    let required = (n / 4) as u64;
    let pass = count as u128 == (fam.p as u128).pow(k as u32)
        && (count < 2 || overlap < k)
        && min.is_none_or(|m| m as u64 >= required);
    emit_json(
        g,
        &FamilyReport {
            family: "imm-lm".into(),
            n: n as u64,
            k: Some(k as u64),
            d: None,
            count,
            min_pairwise_distance: min,
            required_distance: Some(required),
            single_monomial_derivatives: None,
            max_set_overlap: Some(overlap),
            prime: Some(fam.p),
            pass,
        },
    )?;
    Ok(pass)
}

fn cmd_lm_count(g: &Global, trials: usize, poly: Option<&str>, k: u32, ell: u32) -> Result<bool> {
    let field = field(g)?;
    let report = match poly {
        Some(text) => {
            let table = Arc::new(VarTable::new(variable_names(text))?);
            let f = SparsePoly::parse(field, table, text)?;
            if f.is_zero() {
                bail!("the polynomial is zero");
            }
            let case = suites::lm_count_check(&f, k, ell, g.budget_cells);
            let ok = case.ok;
            SuiteReport {
                suite: "lm-count",
                seed: None,
                trials: 1,
                passed: usize::from(ok),
                failed: usize::from(!ok),
                cases: vec![case],
            }
        }
        None => suites::lm_count_suite(trials, seed(g)?, LmCountConfig::default(), field, g.budget_cells),
    };
    emit_suite(g, &report, |c| {
        vec![
            c.nvars.to_string(),
            c.k.to_string(),
            c.ell.to_string(),
            c.poly.clone(),
            c.dimension.to_string(),
            c.lm_count.to_string(),
            c.ok.to_string(),
            c.error.clone().unwrap_or_default(),
        ]
    }, &["N", "k", "ell", "poly", "dimension", "lm_count", "ok", "error"], |c| c.ok)
}

fn cmd_bounds(g: &Global, args: &BoundsArgs) -> Result<bool> {
    let (shape, base) = match args.preset {
        Preset::Nw => (FamilyShape::Nw, BoundConstants::NW),
        Preset::Imm => (FamilyShape::Imm, BoundConstants::IMM),
        Preset::Custom => match args.family {
            Shape::Nw => (FamilyShape::Nw, BoundConstants::NW),
            Shape::Imm => (FamilyShape::Imm, BoundConstants::IMM),
        },
    };
    let constants = BoundConstants {
        delta: args.delta.unwrap_or(base.delta),
        c: args.c.unwrap_or(base.c),
        c_prime: args.c_prime.unwrap_or(base.c_prime),
        eps: args.eps.unwrap_or(base.eps),
        mu: args.mu.unwrap_or(base.mu),
        pexp: args.pexp.unwrap_or(base.pexp),
    };
    constants.validate()?;
    let grid: Vec<u64> = args
        .grid
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<u64>().with_context(|| format!("grid entry `{s}`")))
        .collect::<Result<_>>()?;
    let points: Vec<(FamilyShape, u64)> = grid.iter().map(|&n| (shape, n)).collect();
    let reports = bounds::sweep(&points, |_| constants)?;
    match g.format.unwrap_or(Format::Csv) {
        Format::Csv => {
            let mut buf = Vec::new();
            bounds::write_sweep_csv(&reports, &mut buf)?;
            emit(g, &buf)?;
        }
        Format::Json => {
            let rows: Vec<_> = reports
                .iter()
                .map(|r| {
                    json!({
                        "family": r.params.family,
                        "n": r.params.n,
                        "N": r.params.nvars.to_string(),
                        "k": r.params.k,
                        "d": r.params.d,
                        "ln_s": shiftrank_core::algebra::ln_bigint(&r.params.s),
                        "ell": r.params.ell.to_string(),
                        "D": r.params.fan_in,
                        "t": r.params.factor_degree,
                        "constants": r.params.constants,
                        "window": r.window,
                        "feasible": r.feasible,
                        "ln_sprime_bound": r.ln_sprime_bound,
                        "growth_ratio": r.growth_ratio,
                        "guards": r.guards,
                        "slack": r.slack,
                        "exact_extension_bound": r.exact_extension_bound.as_ref().map(|v| v.to_string()),
                    })
                })
                .collect();
            emit_json(g, &rows)?;
        }
    }
    Ok(true)
}

fn cmd_witness(
    g: &Global,
    n: Option<usize>,
    d: Option<usize>,
    verify: bool,
    exact_rank: bool,
    input: Option<&PathBuf>,
) -> Result<bool> {
    json_only(g, "witness")?;
    let point: WitnessPoint = match input {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let mut value: serde_json::Value =
                serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
            // accept both a bare witness and a previous `{witness, report}` output
            if let Some(inner) = value.get_mut("witness") {
                value = inner.take();
            }
            serde_json::from_value(value).with_context(|| format!("reading witness from {}", path.display()))?
        }
        None => witness::construct_witness(n.expect("clap enforces n"), d.expect("clap enforces d"))?,
    };
    if !(verify || input.is_some()) {
        emit_json(g, &json!({ "witness": point }))?;
        return Ok(true);
    }
    let report = witness::verify_witness(&point, field(g)?, exact_rank);
    emit_json(g, &json!({ "witness": point, "report": report }))?;
    Ok(report.pass)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_in_order_of_appearance() {
        assert_eq!(variable_names("x2^3*y1 + 4*x2*z"), vec!["x2", "y1", "z"]);
        assert!(variable_names("3 + 4").is_empty());
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
