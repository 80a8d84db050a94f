//! Shared input bundle for the scan and effects commands.

use std::path::{Path, PathBuf};

use anyhow::Result;
use wavescan::bf::Genotype;
use wavescan::preprocess::{CovariateMatrix, SiteData};

use crate::errors::fail;
use crate::formats::{
    read_covariates, read_genotypes, read_libsizes, read_manifest, read_phenotype, Libsizes,
    SiteSpec,
};

pub struct Inputs {
    pub sites: Vec<SiteSpec>,
    pub libs: Libsizes,
    /// (chromosome, genotype) pairs in file order.
    pub genotypes: Vec<(String, Genotype)>,
    pub covariates: CovariateMatrix,
    manifest_dir: PathBuf,
}

impl Inputs {
    pub fn load(
        manifest: &Path,
        genotypes: &Path,
        libsizes: &Path,
        pc_file: Option<&Path>,
    ) -> Result<Self> {
        let sites = read_manifest(manifest)?;
        let libs = read_libsizes(libsizes)?;
        let genotypes = read_genotypes(genotypes, libs.individuals.len(), libsizes)?;
        let covariates = match pc_file {
            Some(p) => read_covariates(p, &libs, libsizes)?,
            None => CovariateMatrix::empty(libs.individuals.len()),
        };
        Ok(Inputs {
            sites,
            libs,
            genotypes,
            covariates,
            manifest_dir: manifest.parent().unwrap_or(Path::new(".")).to_path_buf(),
        })
    }

    /// Phenotype files live in `sites/<site_id>.tsv` next to the manifest.
    pub fn phenotype_path(&self, spec: &SiteSpec) -> PathBuf {
        self.manifest_dir
            .join("sites")
            .join(format!("{}.tsv", spec.site_id))
    }

    pub fn load_site(&self, spec: &SiteSpec) -> Result<SiteData> {
        let b = (spec.end - spec.start + 1) as usize;
        if b < 2 || !b.is_power_of_two() {
            return Err(fail(
                "invalid-input",
                format!(
                    "site {} spans {} bases, which is not a power of two",
                    spec.site_id, b
                ),
            ));
        }
        read_phenotype(&self.phenotype_path(spec), &self.libs, b)
    }

    /// Variants on the site's chromosome within `window` bases of it.
    pub fn cis_variants(&self, spec: &SiteSpec, window: u64) -> Vec<Genotype> {
        self.genotypes
            .iter()
            .filter(|(chrom, g)| {
                *chrom == spec.chromosome
                    && g.position >= spec.start.saturating_sub(window)
                    && g.position <= spec.end + window
            })
            .map(|(_, g)| g.clone())
            .collect()
    }
}
