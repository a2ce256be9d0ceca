use std::io::Write;
use std::path::PathBuf;

use bcsoftmax::{
    bcsoftmax_quadratic, bcsoftmax_with, lbsoftmax, ubsoftmax_select, ubsoftmax_sorted, BoxBounds,
    LogitVector, ProbVector, SearchCheck, Temperature,
};
use clap::{Args, ValueEnum};

use crate::error::{CliError, CliResult};
use crate::io;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum Algo {
    /// Cheapest exact kernel for the bounds present on each row.
    #[default]
    Auto,
    /// Sort plus binary search over the lower-pinned prefix.
    Sorted,
    /// Quickselect threshold for upper-only rows, `sorted` otherwise.
    Select,
    /// Evaluate every prefix candidate.
    Quadratic,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Logit CSV (`-` for stdin).
    pub input: PathBuf,
    /// Bounds CSV with one row, or one row per input row.
    #[arg(long, conflicts_with_all = ["lower", "upper"])]
    pub bounds: Option<PathBuf>,
    /// Scalar lower bound for every class.
    #[arg(long, default_value_t = 0.0)]
    pub lower: f64,
    /// Scalar upper bound for every class.
    #[arg(long, default_value_t = 1.0)]
    pub upper: f64,
    #[arg(long, default_value_t = 1.0)]
    pub tau: f64,
    #[arg(long, value_enum, default_value_t = Algo::Auto)]
    pub algo: Algo,
    /// Output CSV; stdout when absent.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

/// Evaluates one row.
pub fn evaluate(
    x: &LogitVector,
    bounds: &BoxBounds,
    tau: Temperature,
    algo: Algo,
) -> bcsoftmax::Result<ProbVector> {
    let lower_free = bounds.lower().is_inactive();
    let upper_free = bounds.upper().is_inactive();
    let (p, _) = match algo {
        Algo::Auto if lower_free => ubsoftmax_select(x, bounds.upper(), tau)?,
        Algo::Auto if upper_free => lbsoftmax(x, bounds.lower(), tau)?,
        Algo::Select if lower_free => ubsoftmax_select(x, bounds.upper(), tau)?,
        Algo::Sorted if lower_free => ubsoftmax_sorted(x, bounds.upper(), tau)?,
        Algo::Quadratic => bcsoftmax_quadratic(x, bounds, tau)?,
        _ => bcsoftmax_with(x, bounds, tau, SearchCheck::Certify)?,
    };
    Ok(p)
}

pub fn run(args: &EvalArgs, out: &mut dyn Write) -> CliResult<()> {
    let tau = Temperature::new(args.tau).map_err(|e| CliError::Usage(e.to_string()))?;
    let table = io::read_logits(&args.input)?;
    let file_bounds = match &args.bounds {
        Some(path) => {
            let rows = io::read_bounds(path)?;
            if rows.len() != 1 && rows.len() != table.len() {
                return Err(CliError::Data(format!(
                    "bounds file has {} rows; expected 1 or {}",
                    rows.len(),
                    table.len()
                )));
            }
            let mut parsed = Vec::with_capacity(rows.len());
            for (n, (a, b)) in rows.into_iter().enumerate() {
                let bounds = BoxBounds::from_vecs(a, b)
                    .map_err(|e| CliError::from(e).context(format!("bounds row {n}")))?;
                parsed.push(bounds);
            }
            Some(parsed)
        }
        None => None,
    };

    let mut probs = Vec::with_capacity(table.len());
    for (n, row) in table.logits.into_iter().enumerate() {
        let at = |e: bcsoftmax::Error| CliError::from(e).context(format!("row {n}"));
        let k = row.len();
        let x = LogitVector::new(row).map_err(at)?;
        let scalar;
        let bounds = match &file_bounds {
            Some(all) => &all[if all.len() == 1 { 0 } else { n }],
            None => {
                scalar = BoxBounds::uniform(k, args.lower, args.upper).map_err(at)?;
                &scalar
            }
        };
        if bounds.len() != k {
            return Err(CliError::Data(format!(
                "row {n}: {k} logits but {} bounds",
                bounds.len()
            )));
        }
        probs.push(
            evaluate(&x, bounds, tau, args.algo)
                .map_err(at)?
                .into_inner(),
        );
    }

    match &args.output {
        Some(path) => {
            let mut file = io::create(path)?;
            io::write_probs(&mut file, &probs)?;
            file.flush()?;
        }
        None => io::write_probs(out, &probs)?,
    }
    Ok(())
}
