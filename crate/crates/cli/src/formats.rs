//! Line-oriented TSV formats. Headers are '#'-prefixed comment lines; fields
//! are tab-separated. Parsers report the offending file and line number.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use anyhow::Result;
use wavescan::bf::Genotype;
use wavescan::preprocess::{CovariateMatrix, SiteData};

use crate::errors::{fail, from_core, io_err};

/// One manifest row: a region of length end - start + 1.
#[derive(Clone, Debug)]
pub struct SiteSpec {
    pub site_id: String,
    pub chromosome: String,
    pub start: u64,
    pub end: u64,
}

pub struct Libsizes {
    pub individuals: Vec<String>,
    pub sizes: Vec<u64>,
}

/// Iterate data lines (skipping '#' comments and blanks) with line numbers.
fn data_lines(path: &Path) -> Result<Vec<(usize, String)>> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        out.push((i + 1, line));
    }
    Ok(out)
}

fn parse_err(path: &Path, line_no: usize, msg: impl std::fmt::Display) -> anyhow::Error {
    fail(
        "parse-error",
        format!("{} line {}: {}", path.display(), line_no, msg),
    )
}

pub fn read_manifest(path: &Path) -> Result<Vec<SiteSpec>> {
    let mut sites = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (no, line) in data_lines(path)? {
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 4 {
            return Err(parse_err(path, no, "expected 4 fields: site_id chrom start end"));
        }
        let start: u64 = f[2]
            .parse()
            .map_err(|e| parse_err(path, no, format!("bad start: {}", e)))?;
        let end: u64 = f[3]
            .parse()
            .map_err(|e| parse_err(path, no, format!("bad end: {}", e)))?;
        if start == 0 || end < start {
            return Err(parse_err(path, no, "need 1 <= start <= end"));
        }
        if !seen.insert(f[0].to_string()) {
            return Err(parse_err(path, no, format!("duplicate site id {}", f[0])));
        }
        sites.push(SiteSpec {
            site_id: f[0].to_string(),
            chromosome: f[1].to_string(),
            start,
            end,
        });
    }
    if sites.is_empty() {
        return Err(fail("invalid-input", format!("{}: no sites", path.display())));
    }
    Ok(sites)
}

pub fn read_libsizes(path: &Path) -> Result<Libsizes> {
    let mut individuals = Vec::new();
    let mut sizes = Vec::new();
    for (no, line) in data_lines(path)? {
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 2 {
            return Err(parse_err(path, no, "expected 2 fields: individual_id total_reads"));
        }
        let s: u64 = f[1]
            .parse()
            .map_err(|e| parse_err(path, no, format!("bad total_reads: {}", e)))?;
        individuals.push(f[0].to_string());
        sizes.push(s);
    }
    if individuals.is_empty() {
        return Err(fail("invalid-input", format!("{}: no individuals", path.display())));
    }
    Ok(Libsizes { individuals, sizes })
}

pub fn read_genotypes(path: &Path, n: usize, libsizes_path: &Path) -> Result<Vec<(String, Genotype)>> {
    let mut out = Vec::new();
    for (no, line) in data_lines(path)? {
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() < 4 {
            return Err(parse_err(
                path,
                no,
                "expected variant_id chrom position dosages...",
            ));
        }
        if f.len() - 3 != n {
            return Err(fail(
                "inconsistent-input",
                format!(
                    "{} line {}: variant {} has {} dosages but {} lists {} individuals",
                    path.display(),
                    no,
                    f[0],
                    f.len() - 3,
                    libsizes_path.display(),
                    n
                ),
            ));
        }
        let position: u64 = f[2]
            .parse()
            .map_err(|e| parse_err(path, no, format!("bad position: {}", e)))?;
        let mut dosages = Vec::with_capacity(n);
        for d in &f[3..] {
            dosages.push(
                d.parse::<f64>()
                    .map_err(|e| parse_err(path, no, format!("bad dosage: {}", e)))?,
            );
        }
        let g = Genotype::new(f[0], position, dosages).map_err(from_core)?;
        out.push((f[1].to_string(), g));
    }
    Ok(out)
}

pub fn read_covariates(path: &Path, libs: &Libsizes, libsizes_path: &Path) -> Result<CovariateMatrix> {
    let lines = data_lines(path)?;
    if lines.len() != libs.individuals.len() {
        return Err(fail(
            "inconsistent-input",
            format!(
                "{} has {} rows but {} lists {} individuals",
                path.display(),
                lines.len(),
                libsizes_path.display(),
                libs.individuals.len()
            ),
        ));
    }
    let mut values = Vec::with_capacity(lines.len());
    for (row, (no, line)) in lines.into_iter().enumerate() {
        let f: Vec<&str> = line.split('\t').collect();
        if f[0] != libs.individuals[row] {
            return Err(fail(
                "inconsistent-input",
                format!(
                    "{} line {}: individual {} does not match {} in {}",
                    path.display(),
                    no,
                    f[0],
                    libs.individuals[row],
                    libsizes_path.display()
                ),
            ));
        }
        let mut r = Vec::with_capacity(f.len() - 1);
        for v in &f[1..] {
            r.push(
                v.parse::<f64>()
                    .map_err(|e| parse_err(path, no, format!("bad covariate: {}", e)))?,
            );
        }
        values.push(r);
    }
    CovariateMatrix::new(values).map_err(from_core)
}

/// Per-site phenotype: N rows of B integer counts, paired with the shared
/// library sizes.
pub fn read_phenotype(path: &Path, libs: &Libsizes, expected_b: usize) -> Result<SiteData> {
    let lines = data_lines(path)?;
    if lines.len() != libs.individuals.len() {
        return Err(fail(
            "inconsistent-input",
            format!(
                "{} has {} rows but libsizes lists {} individuals",
                path.display(),
                lines.len(),
                libs.individuals.len()
            ),
        ));
    }
    let mut counts = Vec::with_capacity(lines.len());
    for (no, line) in lines {
        let mut row = Vec::with_capacity(expected_b);
        for v in line.split('\t') {
            row.push(
                v.parse::<u32>()
                    .map_err(|e| parse_err(path, no, format!("bad count: {}", e)))?,
            );
        }
        if row.len() != expected_b {
            return Err(fail(
                "inconsistent-input",
                format!(
                    "{} line {}: {} columns but the site spans {} bases",
                    path.display(),
                    no,
                    row.len(),
                    expected_b
                ),
            ));
        }
        counts.push(row);
    }
    SiteData::new(counts, libs.sizes.clone()).map_err(from_core)
}

/// One results row; `None` fields mean the site had no testable variant.
#[derive(Clone, Debug)]
pub struct ResultRow {
    pub site_id: String,
    pub n_variants_tested: usize,
    pub best_variant: Option<String>,
    pub log_lambda_max: Option<f64>,
    pub p_value: Option<f64>,
    pub q_value: Option<f64>,
    pub n_perms: usize,
}

pub const RESULTS_HEADER: &str =
    "#site_id\tn_variants_tested\tbest_variant\tlog_lambda_max\tp_value\tq_value\tn_perms";

fn opt_str<T: std::fmt::Display>(v: &Option<T>) -> String {
    match v {
        Some(x) => x.to_string(),
        None => "NA".to_string(),
    }
}

pub fn write_results(path: &Path, rows: &[ResultRow]) -> Result<()> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    (|| -> std::io::Result<()> {
        writeln!(w, "{}", RESULTS_HEADER)?;
        for r in rows {
            writeln!(
                w,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}",
                r.site_id,
                r.n_variants_tested,
                opt_str(&r.best_variant),
                opt_str(&r.log_lambda_max),
                opt_str(&r.p_value),
                opt_str(&r.q_value),
                r.n_perms
            )?;
        }
        w.flush()
    })()
    .map_err(|e| io_err(path, e))?;
    Ok(())
}

pub fn read_results(path: &Path) -> Result<Vec<ResultRow>> {
    fn opt_parse<T: std::str::FromStr>(
        s: &str,
        path: &Path,
        no: usize,
    ) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        if s == "NA" {
            return Ok(None);
        }
        s.parse::<T>()
            .map(Some)
            .map_err(|e| parse_err(path, no, format!("bad field {:?}: {}", s, e)))
    }
    let mut rows = Vec::new();
    for (no, line) in data_lines(path)? {
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 7 {
            return Err(parse_err(path, no, "expected 7 result fields"));
        }
        rows.push(ResultRow {
            site_id: f[0].to_string(),
            n_variants_tested: f[1]
                .parse()
                .map_err(|e| parse_err(path, no, format!("bad count: {}", e)))?,
            best_variant: if f[2] == "NA" { None } else { Some(f[2].to_string()) },
            log_lambda_max: opt_parse(f[3], path, no)?,
            p_value: opt_parse(f[4], path, no)?,
            q_value: opt_parse(f[5], path, no)?,
            n_perms: f[6]
                .parse()
                .map_err(|e| parse_err(path, no, format!("bad n_perms: {}", e)))?,
        });
    }
    if rows.is_empty() {
        return Err(fail("invalid-input", format!("{}: no result rows", path.display())));
    }
    Ok(rows)
}

pub const EFFECTS_HEADER: &str =
    "#base\tmean_alpha\tsd_alpha\tmean_minus_3sd\tmean_plus_3sd\tstrongest_region_flag";

/// Per-base effect profile with the +-3 sd band and the strongest-region
/// flag (1 when zero lies outside the band).
pub fn write_effects(path: &Path, mean: &[f64], var: &[f64]) -> Result<()> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    (|| -> std::io::Result<()> {
        writeln!(w, "{}", EFFECTS_HEADER)?;
        for (i, (m, v)) in mean.iter().zip(var).enumerate() {
            let sd = v.sqrt();
            let lo = m - 3.0 * sd;
            let hi = m + 3.0 * sd;
            let flag = u8::from(lo > 0.0 || hi < 0.0);
            writeln!(w, "{}\t{}\t{}\t{}\t{}\t{}", i + 1, m, sd, lo, hi, flag)?;
        }
        w.flush()
    })()
    .map_err(|e| io_err(path, e))?;
    Ok(())
}

pub fn write_tsv(path: &Path, header: &str, rows: &[String]) -> Result<()> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    (|| -> std::io::Result<()> {
        writeln!(w, "{}", header)?;
        for r in rows {
            writeln!(w, "{}", r)?;
        }
        w.flush()
    })()
    .map_err(|e| io_err(path, e))?;
    Ok(())
}
