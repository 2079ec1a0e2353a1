//! Plain-text genotype fixtures.
//!
//! ```text
//! ##variant	rs1	22	16050075	A	G
//! FID	IID	rs1	rs2
//! F1	I1	0	2
//! F2	I2	NA	1
//! ```
//!
//! `##variant` lines are optional and carry the metadata for the named
//! variant (id, chromosome, position, allele1, allele2); without them a
//! variant gets synthetic metadata.

use std::collections::HashMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::{GenotypeMatrix, SampleMeta, VariantMeta};
use crate::error::{Error, Result};

const MISSING: &str = "NA";

pub fn write_text_matrix(matrix: &GenotypeMatrix, path: impl AsRef<Path>) -> Result<()> {
    write_text_matrix_with_comment(matrix, path, None)
}

/// Same as [`write_text_matrix`] with a leading `# comment` line.
pub fn write_text_matrix_with_comment(
    matrix: &GenotypeMatrix,
    path: impl AsRef<Path>,
    comment: Option<&str>,
) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    if let Some(c) = comment {
        writeln!(w, "# {c}").map_err(io)?;
    }
    for v in matrix.variants() {
        writeln!(
            w,
            "##variant\t{}\t{}\t{}\t{}\t{}",
            v.variant_id, v.chromosome, v.position, v.allele1, v.allele2
        )
        .map_err(io)?;
    }
    write!(w, "FID\tIID").map_err(io)?;
    for v in matrix.variants() {
        write!(w, "\t{}", v.variant_id).map_err(io)?;
    }
    writeln!(w).map_err(io)?;
    let columns: Vec<Vec<Option<u8>>> = (0..matrix.n_variants())
        .map(|j| matrix.raw_column(j))
        .collect();
    for (i, s) in matrix.samples().iter().enumerate() {
        write!(w, "{}\t{}", s.family_id, s.individual_id).map_err(io)?;
        for col in &columns {
            match col[i] {
                Some(d) => write!(w, "\t{d}"),
                None => write!(w, "\t{MISSING}"),
            }
            .map_err(io)?;
        }
        writeln!(w).map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn load_text_matrix(path: impl AsRef<Path>) -> Result<GenotypeMatrix> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_text_matrix(&text).map_err(|e| match e {
        Error::Format(m) => Error::Format(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub(crate) fn parse_text_matrix(text: &str) -> Result<GenotypeMatrix> {
    let mut meta: HashMap<String, VariantMeta> = HashMap::new();
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let header = loop {
        match lines.next() {
            None => return Err(Error::Format("empty genotype text file".into())),
            Some((k, l)) if l.starts_with("##variant") => {
                let f: Vec<&str> = l.split('\t').collect();
                if f.len() != 6 {
                    return Err(Error::Format(format!(
                        "line {}: ##variant needs 5 fields",
                        k + 1
                    )));
                }
                let position = f[3]
                    .parse()
                    .map_err(|_| Error::Format(format!("line {}: bad position", k + 1)))?;
                meta.insert(
                    f[1].to_string(),
                    VariantMeta {
                        chromosome: f[2].to_string(),
                        variant_id: f[1].to_string(),
                        position,
                        allele1: f[4].to_string(),
                        allele2: f[5].to_string(),
                    },
                );
            }
            Some((_, l)) if l.starts_with('#') => continue,
            Some((_, l)) => break l,
        }
    };
    let cols: Vec<&str> = header.split('\t').collect();
    if cols.len() < 2 || cols[0] != "FID" || cols[1] != "IID" {
        return Err(Error::Format(
            "header must start with FID<TAB>IID".into(),
        ));
    }
    let variants: Vec<VariantMeta> = cols[2..]
        .iter()
        .enumerate()
        .map(|(j, id)| {
            meta.remove(*id)
                .unwrap_or_else(|| VariantMeta::synthetic(*id, j as u64 + 1))
        })
        .collect();
    let p = variants.len();
    let mut samples = Vec::new();
    let mut columns: Vec<Vec<Option<u8>>> = vec![Vec::new(); p];
    for (k, line) in lines {
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != p + 2 {
            return Err(Error::Format(format!(
                "line {}: ragged row with {} fields, expected {}",
                k + 1,
                f.len(),
                p + 2
            )));
        }
        samples.push(SampleMeta::new(f[0], f[1]));
        for (j, cell) in f[2..].iter().enumerate() {
            let v = match *cell {
                MISSING => None,
                s => match s.parse::<u8>() {
                    Ok(d @ 0..=2) => Some(d),
                    _ => {
                        return Err(Error::Validation(format!(
                            "line {}: dosage '{s}' for {} is not 0, 1, 2 or NA",
                            k + 1,
                            variants[j].variant_id
                        )))
                    }
                },
            };
            columns[j].push(v);
        }
    }
    GenotypeMatrix::from_dosages(variants, samples, &columns)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn round_trip_with_missing() {
        let dir = tempfile::tempdir().unwrap();
        let g = GenotypeMatrix::from_dosages(
            vec![
                VariantMeta {
                    chromosome: "22".into(),
                    variant_id: "rs10".into(),
                    position: 16050075,
                    allele1: "A".into(),
                    allele2: "G".into(),
                },
                VariantMeta::synthetic("rs11", 9),
            ],
            (0..3).map(|i| SampleMeta::new(format!("F{i}"), format!("I{i}"))).collect(),
            &[vec![Some(0), None, Some(2)], vec![Some(1), Some(1), Some(0)]],
        )
        .unwrap();
        let path = dir.path().join("g.tsv");
        write_text_matrix(&g, &path).unwrap();
        assert_eq!(load_text_matrix(&path).unwrap(), g);
    }

    #[test]
    fn empty_file_is_format_error() {
        assert!(matches!(parse_text_matrix(""), Err(Error::Format(_))));
    }

    #[test]
    fn ragged_row_is_format_error() {
        let t = "FID\tIID\ta\tb\nf\ti\t0\n";
        assert!(matches!(parse_text_matrix(t), Err(Error::Format(_))));
    }

    #[test]
    fn out_of_range_dosage_is_validation_error() {
        let t = "FID\tIID\ta\nf\ti\t3\n";
        assert!(matches!(parse_text_matrix(t), Err(Error::Validation(_))));
    }

    #[test]
    fn without_meta_lines() {
        let g = parse_text_matrix("FID\tIID\tx\ty\nf\t1\t0\tNA\nf\t2\t2\t1\n").unwrap();
        assert_eq!(g.n_samples(), 2);
        assert_eq!(g.raw_column(1), vec![None, Some(1)]);
    }

    proptest! {
        #[test]
        fn text_round_trip_identity(
            cols in proptest::collection::vec(
                proptest::collection::vec(prop_oneof![Just(None), (0u8..3).prop_map(Some)], 5), 1..6)
        ) {
            let g = crate::genotype::tests::matrix_from(&cols);
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("g.tsv");
            write_text_matrix(&g, &path).unwrap();
            prop_assert_eq!(load_text_matrix(&path).unwrap(), g);
        }
    }
}
