//! The fdr command: recompute the q_value column of a results file.

use anyhow::Result;
use wavescan::scan::{estimate_fdr, estimate_fdr_bh};

use crate::errors::{fail, from_core};
use crate::formats::{read_results, write_results};
use crate::FdrArgs;

pub fn run(args: &FdrArgs) -> Result<()> {
    let mut rows = read_results(&args.results)?;
    let tested: Vec<usize> = rows
        .iter()
        .enumerate()
        .filter(|(_, r)| r.p_value.is_some())
        .map(|(i, _)| i)
        .collect();
    if tested.is_empty() {
        return Err(fail(
            "invalid-input",
            format!("{}: no rows with a p-value", args.results.display()),
        ));
    }
    let p: Vec<f64> = tested.iter().map(|&i| rows[i].p_value.unwrap()).collect();
    let q = if args.bh {
        estimate_fdr_bh(&p)
    } else {
        estimate_fdr(&p)
    }
    .map_err(from_core)?;
    for (&i, qi) in tested.iter().zip(q) {
        rows[i].q_value = Some(qi);
    }
    write_results(&args.out, &rows)
}
