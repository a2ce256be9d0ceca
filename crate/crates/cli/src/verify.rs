use std::io::Write;

use bcsoftmax::oracle::{solve_enumerate, solve_sweep_ub, MAX_ENUMERATE_K};
use bcsoftmax::sample::bench_instance;
use bcsoftmax::tol::{self, max_abs_diff};
use bcsoftmax::{
    bcsoftmax_quadratic, bcsoftmax_with, lbsoftmax, ubsoftmax_select, ubsoftmax_sorted, BoxBounds,
    LowerBounds, ProbVector, SearchCheck, Temperature,
};
use clap::Args;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{CliError, CliResult};

/// Temperatures cycled through across trials.
pub const TAUS: [f64; 3] = [0.5, 1.0, 2.0];

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long = "k", visible_alias = "K", default_value_t = 6)]
    pub k: usize,
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

/// Largest coordinate-wise deviation from the oracle, per algorithm.
#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub k: usize,
    pub trials: usize,
    pub deviations: Vec<(&'static str, f64)>,
    /// Trials whose output left the box or the simplex.
    pub contract_violations: usize,
}

impl VerifyReport {
    pub fn max_deviation(&self) -> f64 {
        self.deviations.iter().map(|d| d.1).fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.contract_violations == 0 && self.max_deviation() < tol::EQ
    }
}

fn in_contract(p: &ProbVector, bounds: &BoxBounds) -> bool {
    bounds.contains(p.as_slice(), tol::BOUND_SLACK)
        && (p.iter().sum::<f64>() - 1.0).abs() <= tol::SIMPLEX
}

pub fn verify(k: usize, trials: usize, seed: u64) -> CliResult<VerifyReport> {
    if k == 0 {
        return Err(CliError::Usage("K must be positive".into()));
    }
    if k > MAX_ENUMERATE_K {
        return Err(CliError::Usage(format!(
            "K = {k} is too large for the oracle (limit {MAX_ENUMERATE_K})"
        )));
    }
    const NAMES: [&str; 7] = [
        "bcsoftmax",
        "bcsoftmax_exhaustive",
        "bcsoftmax_quadratic",
        "ubsoftmax_sorted",
        "ubsoftmax_select",
        "ubsoftmax_sweep",
        "lbsoftmax",
    ];
    let mut worst = [0.0f64; NAMES.len()];
    let mut contract_violations = 0;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    for trial in 0..trials {
        let (x, bounds) = bench_instance(&mut rng, k);
        let tau = Temperature::new(TAUS[trial % TAUS.len()])?;
        let upper_only = BoxBounds::new(LowerBounds::zeros(k), bounds.upper().clone())?;
        let lower_only = BoxBounds::new(bounds.lower().clone(), bcsoftmax::UpperBounds::ones(k))?;

        let reference = solve_enumerate(&x, &bounds, tau)?;
        let ub_reference = solve_enumerate(&x, &upper_only, tau)?;
        let lb_reference = solve_enumerate(&x, &lower_only, tau)?;

        let outputs = [
            (
                bcsoftmax_with(&x, &bounds, tau, SearchCheck::Certify)?.0,
                &reference,
                &bounds,
            ),
            (
                bcsoftmax_with(&x, &bounds, tau, SearchCheck::Exhaustive)?.0,
                &reference,
                &bounds,
            ),
            (
                bcsoftmax_quadratic(&x, &bounds, tau)?.0,
                &reference,
                &bounds,
            ),
            (
                ubsoftmax_sorted(&x, bounds.upper(), tau)?.0,
                &ub_reference,
                &upper_only,
            ),
            (
                ubsoftmax_select(&x, bounds.upper(), tau)?.0,
                &ub_reference,
                &upper_only,
            ),
            (
                solve_sweep_ub(&x, bounds.upper(), tau)?,
                &ub_reference,
                &upper_only,
            ),
            (
                lbsoftmax(&x, bounds.lower(), tau)?.0,
                &lb_reference,
                &lower_only,
            ),
        ];
        for (slot, (p, expected, feasible)) in worst.iter_mut().zip(&outputs) {
            *slot = slot.max(max_abs_diff(p.as_slice(), expected.as_slice()));
            if !in_contract(p, feasible) {
                contract_violations += 1;
            }
        }
    }
    Ok(VerifyReport {
        k,
        trials,
        deviations: NAMES.into_iter().zip(worst).collect(),
        contract_violations,
    })
}

pub fn run(args: &VerifyArgs, out: &mut dyn Write) -> CliResult<()> {
    let report = verify(args.k, args.trials, args.seed)?;
    writeln!(
        out,
        "K = {}, trials = {}, seed = {}",
        report.k, report.trials, args.seed
    )?;
    for (name, dev) in &report.deviations {
        writeln!(out, "  {name:<22} {dev:.3e}")?;
    }
    if report.contract_violations > 0 {
        writeln!(out, "contract violations: {}", report.contract_violations)?;
    }
    let max = report.max_deviation();
    if report.passed() {
        writeln!(out, "max deviation {max:.3e} < 1e-9")?;
        Ok(())
    } else {
        writeln!(out, "max deviation {max:.3e} FAILED")?;
        Err(CliError::Verification(format!(
            "max deviation {max:.3e}, {} contract violations",
            report.contract_violations
        )))
    }
}
