use std::io::Write;
use std::path::PathBuf;

use bcsoftmax::calib::gen_synthetic;
use clap::Args;

use crate::error::CliResult;
use crate::io;

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long = "n", visible_alias = "N")]
    pub n: usize,
    #[arg(long = "k", visible_alias = "K")]
    pub k: usize,
    /// Logit multiplier; 1 is calibrated, larger is overconfident.
    #[arg(long, default_value_t = 3.0)]
    pub scale: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output CSV; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(args: &GenArgs, out: &mut dyn Write) -> CliResult<()> {
    let data = gen_synthetic(args.n, args.k, args.scale, args.seed)?;
    match &args.out {
        Some(path) => {
            let mut file = io::create(path)?;
            io::write_dataset(&mut file, &data)?;
            file.flush()?;
        }
        None => io::write_dataset(out, &data)?,
    }
    Ok(())
}
