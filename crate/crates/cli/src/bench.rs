use std::hint::black_box;
use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use bcsoftmax::sample::bench_instance;
use bcsoftmax::{
    bcsoftmax_quadratic, bcsoftmax_with, ubsoftmax_select, BoxBounds, LogitVector, SearchCheck,
    Temperature,
};
use clap::Args;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{CliError, CliResult};
use crate::io;

pub const ALGOS: [&str; 3] = ["bcsoftmax", "bcsoftmax_quadratic", "ubsoftmax_select"];

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, default_value_t = 32)]
    pub kmin: usize,
    #[arg(long, default_value_t = 1024)]
    pub kmax: usize,
    /// Instances per timed call.
    #[arg(long, default_value_t = 128)]
    pub batch: usize,
    /// Timed repetitions per (K, algo), after one warm-up.
    #[arg(long, default_value_t = 15)]
    pub reps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output CSV; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Wall time of one batch, in nanoseconds.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub k: usize,
    pub algo: &'static str,
    pub median_ns: f64,
    pub p10_ns: f64,
    pub p90_ns: f64,
}

/// Nearest-rank percentile of sorted samples.
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let rank = (q * sorted.len() as f64).ceil().max(1.0) as usize;
    sorted[rank.min(sorted.len()) - 1]
}

fn time_batch(algo: &str, batch: &[(LogitVector, BoxBounds)]) -> CliResult<f64> {
    let tau = Temperature::ONE;
    let start = Instant::now();
    for (x, bounds) in batch {
        let p = match algo {
            "bcsoftmax" => bcsoftmax_with(x, bounds, tau, SearchCheck::Certify)?.0,
            "bcsoftmax_quadratic" => bcsoftmax_quadratic(x, bounds, tau)?.0,
            _ => ubsoftmax_select(x, bounds.upper(), tau)?.0,
        };
        black_box(p);
    }
    Ok(start.elapsed().as_nanos() as f64)
}

pub fn bench(args: &BenchArgs) -> CliResult<Vec<BenchRow>> {
    let (kmin, kmax) = (args.kmin, args.kmax);
    if !kmin.is_power_of_two() || !kmax.is_power_of_two() || kmin > kmax {
        return Err(CliError::Usage(format!(
            "kmin ({kmin}) and kmax ({kmax}) must be powers of two with kmin <= kmax"
        )));
    }
    if args.batch == 0 || args.reps == 0 {
        return Err(CliError::Usage("batch and reps must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let mut rows = vec![];
    let mut k = kmin;
    while k <= kmax {
        let batch: Vec<_> = (0..args.batch)
            .map(|_| bench_instance(&mut rng, k))
            .collect();
        for algo in ALGOS {
            time_batch(algo, &batch)?;
            let mut samples = (0..args.reps)
                .map(|_| time_batch(algo, &batch))
                .collect::<CliResult<Vec<_>>>()?;
            samples.sort_by(f64::total_cmp);
            rows.push(BenchRow {
                k,
                algo,
                median_ns: percentile(&samples, 0.5),
                p10_ns: percentile(&samples, 0.1),
                p90_ns: percentile(&samples, 0.9),
            });
        }
        k *= 2;
    }
    Ok(rows)
}

pub fn write_csv(out: &mut dyn Write, rows: &[BenchRow]) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["K", "algo", "median_ns", "p10_ns", "p90_ns"])?;
    for r in rows {
        w.write_record([
            r.k.to_string(),
            r.algo.to_string(),
            format!("{:.0}", r.median_ns),
            format!("{:.0}", r.p10_ns),
            format!("{:.0}", r.p90_ns),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn run(args: &BenchArgs, out: &mut dyn Write) -> CliResult<()> {
    let rows = bench(args)?;
    match &args.out {
        Some(path) => {
            let mut file = io::create(path)?;
            write_csv(&mut file, &rows)?;
            file.flush()?;
        }
        None => write_csv(out, &rows)?,
    }
    Ok(())
}
