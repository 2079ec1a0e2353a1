use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::{bytes_per_variant, GenotypeMatrix, SampleMeta, VariantMeta};
use crate::error::{Error, Result};

const BED_MAGIC: [u8; 2] = [0x6C, 0x1B];
const BED_VARIANT_MAJOR: u8 = 0x01;

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(String::from)
        .collect())
}

fn parse_fam(path: &Path) -> Result<Vec<SampleMeta>> {
    read_lines(path)?
        .iter()
        .enumerate()
        .map(|(k, line)| {
            let mut f = line.split_whitespace();
            match (f.next(), f.next()) {
                (Some(fid), Some(iid)) => Ok(SampleMeta::new(fid, iid)),
                _ => Err(Error::Format(format!(
                    "{}:{}: expected family and individual id",
                    path.display(),
                    k + 1
                ))),
            }
        })
        .collect()
}

fn parse_bim(path: &Path) -> Result<Vec<VariantMeta>> {
    read_lines(path)?
        .iter()
        .enumerate()
        .map(|(k, line)| {
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 6 {
                return Err(Error::Format(format!(
                    "{}:{}: expected 6 columns, found {}",
                    path.display(),
                    k + 1,
                    f.len()
                )));
            }
            let position = f[3].parse::<u64>().map_err(|_| {
                Error::Format(format!(
                    "{}:{}: bad base-pair position '{}'",
                    path.display(),
                    k + 1,
                    f[3]
                ))
            })?;
            Ok(VariantMeta {
                chromosome: f[0].to_string(),
                variant_id: f[1].to_string(),
                position,
                allele1: f[4].to_string(),
                allele2: f[5].to_string(),
            })
        })
        .collect()
}

/// Reads a variant-major PLINK-1 fileset.
pub fn load_plink(
    bed_path: impl AsRef<Path>,
    bim_path: impl AsRef<Path>,
    fam_path: impl AsRef<Path>,
) -> Result<GenotypeMatrix> {
    let bed_path = bed_path.as_ref();
    let samples = parse_fam(fam_path.as_ref())?;
    let variants = parse_bim(bim_path.as_ref())?;
    let bytes = fs::read(bed_path).map_err(|e| Error::io(bed_path, e))?;
    decode_bed(&bytes, variants, samples)
}

pub(crate) fn decode_bed(
    bytes: &[u8],
    variants: Vec<VariantMeta>,
    samples: Vec<SampleMeta>,
) -> Result<GenotypeMatrix> {
    if bytes.len() < 3 {
        return Err(Error::Truncated {
            expected: 3,
            found: bytes.len() as u64,
        });
    }
    for (k, (&got, &want)) in bytes.iter().zip(&BED_MAGIC).enumerate() {
        if got != want {
            return Err(Error::Format(format!(
                "bad .bed magic byte {k}: 0x{got:02X} (expected 0x{want:02X})"
            )));
        }
    }
    if bytes[2] != BED_VARIANT_MAJOR {
        return Err(Error::Format(format!(
            "unsupported .bed mode byte 0x{:02X} (only variant-major 0x01)",
            bytes[2]
        )));
    }
    let expected = 3 + (variants.len() * bytes_per_variant(samples.len())) as u64;
    if bytes.len() as u64 != expected {
        return Err(Error::Truncated {
            expected,
            found: bytes.len() as u64,
        });
    }
    GenotypeMatrix::from_packed(variants, samples, bytes[3..].to_vec())
}

pub fn write_plink(
    matrix: &GenotypeMatrix,
    bed_path: impl AsRef<Path>,
    bim_path: impl AsRef<Path>,
    fam_path: impl AsRef<Path>,
) -> Result<()> {
    let bed_path = bed_path.as_ref();
    let mut bed = Vec::with_capacity(3 + matrix.packed().len());
    bed.extend_from_slice(&BED_MAGIC);
    bed.push(BED_VARIANT_MAJOR);
    bed.extend_from_slice(matrix.packed());
    fs::write(bed_path, bed).map_err(|e| Error::io(bed_path, e))?;

    let bim_path = bim_path.as_ref();
    let file = fs::File::create(bim_path).map_err(|e| Error::io(bim_path, e))?;
    let mut w = BufWriter::new(file);
    for v in matrix.variants() {
        writeln!(
            w,
            "{}\t{}\t0\t{}\t{}\t{}",
            v.chromosome, v.variant_id, v.position, v.allele1, v.allele2
        )
        .map_err(|e| Error::io(bim_path, e))?;
    }
    w.flush().map_err(|e| Error::io(bim_path, e))?;

    let fam_path = fam_path.as_ref();
    let file = fs::File::create(fam_path).map_err(|e| Error::io(fam_path, e))?;
    let mut w = BufWriter::new(file);
    for s in matrix.samples() {
        writeln!(w, "{} {} 0 0 0 -9", s.family_id, s.individual_id)
            .map_err(|e| Error::io(fam_path, e))?;
    }
    w.flush().map_err(|e| Error::io(fam_path, e))
}
