//! Run outputs: versioned CSV files (archive, convergence, top-k,
//! comparison), the plain-text run manifest, and the readers that refuse
//! schema mismatches.
//!
//! Every CSV starts with a `# schema=<name> manifest=<hash>` line tying it
//! to the manifest of the run that produced it. Floats are written with
//! Rust's shortest round-trip formatting, so identical runs produce
//! byte-identical files.

use std::fmt::Write as _;
use std::path::Path;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::cost::HardwareMetrics;
use crate::evolve::{Anchor, Archive, ArchiveEntry};

pub const ARCHIVE_SCHEMA: &str = "archive-v1";
pub const CONVERGENCE_SCHEMA: &str = "convergence-v1";
pub const TOPK_SCHEMA: &str = "topk-v1";
pub const COMPARISON_SCHEMA: &str = "comparison-v1";
pub const MANIFEST_SCHEMA: &str = "manifest-v1";

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("schema mismatch in {path}: expected {expected}, found {found}")]
    SchemaMismatch {
        path: String,
        expected: String,
        found: String,
    },
    #[error("malformed {what} in {path}: {detail}")]
    Malformed {
        path: String,
        what: &'static str,
        detail: String,
    },
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for b in digest {
        let _ = write!(out, "{b:02x}");
    }
    out
}

/// Short manifest reference embedded in every output file.
pub fn manifest_ref(config_hash: &str) -> &str {
    &config_hash[..16.min(config_hash.len())]
}

fn encoding_text(encoding: &[u32]) -> String {
    encoding
        .iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join("-")
}

fn parse_encoding(text: &str) -> Option<Vec<u32>> {
    text.split('-').map(|t| t.parse().ok()).collect()
}

fn schema_line(schema: &str, mref: &str, anchor: Option<Anchor>) -> String {
    let mut line = format!("# schema={schema} manifest={mref}");
    if let Some(a) = anchor {
        let _ = write!(
            line,
            " anchor={},{},{},{}",
            a.energy_mj, a.delay_us, a.area_mm2, a.accuracy
        );
    }
    line.push('\n');
    line
}

fn write_atomic(path: &Path, content: &str) -> Result<(), ReportError> {
    std::fs::write(path, content).map_err(|source| ReportError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub const ARCHIVE_HEADER: &str =
    "generation,encoding,energy_mj,delay_us,area_mm2,edap,accuracy,score,feasible,hits";

fn archive_row(entry: &ArchiveEntry) -> String {
    let m = &entry.metrics;
    format!(
        "{},{},{},{},{},{},{},{},{},{}\n",
        entry.generation,
        encoding_text(&entry.design.encoding),
        m.energy_mj,
        m.delay_us,
        m.area_mm2,
        m.edap,
        entry.accuracy,
        entry.score,
        entry.feasible,
        entry.hits,
    )
}

/// Serialize the full archive.
pub fn archive_csv(archive: &Archive, mref: &str) -> String {
    let mut out = schema_line(ARCHIVE_SCHEMA, mref, archive.anchor);
    out.push_str(ARCHIVE_HEADER);
    out.push('\n');
    for entry in &archive.entries {
        out.push_str(&archive_row(entry));
    }
    out
}

pub fn write_archive_csv(path: &Path, archive: &Archive, mref: &str) -> Result<(), ReportError> {
    write_atomic(path, &archive_csv(archive, mref))
}

/// One parsed archive row (reader-side view; the design is kept as its
/// encoding).
#[derive(Debug, Clone, PartialEq)]
pub struct ArchiveRow {
    pub generation: u32,
    pub encoding: Vec<u32>,
    pub metrics: HardwareMetrics,
    pub accuracy: f64,
    pub score: f64,
    pub feasible: bool,
    pub hits: u32,
}

/// Parse an archive CSV, enforcing the schema version.
pub fn parse_archive_csv(text: &str, path: &str) -> Result<Vec<ArchiveRow>, ReportError> {
    let mut lines = text.lines();
    let first = lines.next().unwrap_or_default();
    let found = first
        .split_whitespace()
        .find_map(|tok| tok.strip_prefix("schema="))
        .unwrap_or("missing");
    if found != ARCHIVE_SCHEMA {
        return Err(ReportError::SchemaMismatch {
            path: path.to_string(),
            expected: ARCHIVE_SCHEMA.to_string(),
            found: found.to_string(),
        });
    }
    let header = lines.next().unwrap_or_default();
    if header != ARCHIVE_HEADER {
        return Err(ReportError::Malformed {
            path: path.to_string(),
            what: "header",
            detail: header.to_string(),
        });
    }
    let mut rows = Vec::new();
    for (n, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let malformed = |detail: String| ReportError::Malformed {
            path: path.to_string(),
            what: "row",
            detail,
        };
        if fields.len() != 10 {
            return Err(malformed(format!("line {}: {} fields", n + 3, fields.len())));
        }
        let parse_f = |s: &str| -> Result<f64, ReportError> {
            s.parse().map_err(|_| malformed(format!("bad float {s:?}")))
        };
        let energy_mj = parse_f(fields[2])?;
        let delay_us = parse_f(fields[3])?;
        let area_mm2 = parse_f(fields[4])?;
        let edap = parse_f(fields[5])?;
        rows.push(ArchiveRow {
            generation: fields[0]
                .parse()
                .map_err(|_| malformed(format!("bad generation {:?}", fields[0])))?,
            encoding: parse_encoding(fields[1])
                .ok_or_else(|| malformed(format!("bad encoding {:?}", fields[1])))?,
            metrics: HardwareMetrics {
                energy_mj,
                delay_us,
                area_mm2,
                edap,
                tops_per_w: 0.0,
                tops_per_mm2: 0.0,
                utilization: 0.0,
                feasible: fields[8] == "true",
            },
            accuracy: parse_f(fields[6])?,
            score: parse_f(fields[7])?,
            feasible: fields[8] == "true",
            hits: fields[9]
                .parse()
                .map_err(|_| malformed(format!("bad hits {:?}", fields[9])))?,
        });
    }
    Ok(rows)
}

pub fn read_archive_csv(path: &Path) -> Result<Vec<ArchiveRow>, ReportError> {
    let text = std::fs::read_to_string(path).map_err(|source| ReportError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_archive_csv(&text, &path.display().to_string())
}

pub const CONVERGENCE_HEADER: &str = "generation,best_score,mean_score,feasible_fraction";

pub fn convergence_csv(archive: &Archive, mref: &str) -> String {
    let mut out = schema_line(CONVERGENCE_SCHEMA, mref, None);
    out.push_str(CONVERGENCE_HEADER);
    out.push('\n');
    for s in &archive.convergence {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            s.generation, s.best_score, s.mean_score, s.feasible_fraction
        );
    }
    out
}

pub fn write_convergence_csv(path: &Path, archive: &Archive, mref: &str) -> Result<(), ReportError> {
    write_atomic(path, &convergence_csv(archive, mref))
}

pub const TOPK_HEADER: &str =
    "rank,generation,encoding,energy_mj,delay_us,area_mm2,edap,accuracy,score,feasible,hits";

pub fn topk_csv(entries: &[&ArchiveEntry], diversity: f64, mref: &str) -> String {
    let mut out = schema_line(TOPK_SCHEMA, mref, None);
    let _ = writeln!(out, "# diversity={diversity}");
    out.push_str(TOPK_HEADER);
    out.push('\n');
    for (rank, entry) in entries.iter().enumerate() {
        let _ = write!(out, "{},", rank + 1);
        out.push_str(&archive_row(entry));
    }
    out
}

pub fn write_topk_csv(
    path: &Path,
    entries: &[&ArchiveEntry],
    diversity: f64,
    mref: &str,
) -> Result<(), ReportError> {
    write_atomic(path, &topk_csv(entries, diversity, mref))
}

/// One comparison table row (a method or a baseline).
#[derive(Debug, Clone)]
pub struct ComparisonRow {
    pub method: String,
    pub accuracy: f64,
    pub energy_mj: f64,
    pub delay_us: f64,
    pub area_mm2: f64,
    pub edap: f64,
    pub score: f64,
    pub tops_per_w: f64,
    pub tops_per_mm2: f64,
    pub utilization: f64,
    /// Not meaningful for single-design baselines.
    pub diversity: Option<f64>,
    pub edap_ratio_vs_baseline1: f64,
    pub edap_ratio_vs_baseline2: f64,
}

pub const COMPARISON_HEADER: &str = "method,accuracy,energy_mj,delay_us,area_mm2,edap,score,\
tops_per_w,tops_per_mm2,utilization,diversity,edap_ratio_vs_baseline1,edap_ratio_vs_baseline2";

pub fn comparison_csv(rows: &[ComparisonRow], mref: &str) -> String {
    let mut out = schema_line(COMPARISON_SCHEMA, mref, None);
    out.push_str(COMPARISON_HEADER);
    out.push('\n');
    for r in rows {
        let diversity = r.diversity.map(|d| d.to_string()).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.method,
            r.accuracy,
            r.energy_mj,
            r.delay_us,
            r.area_mm2,
            r.edap,
            r.score,
            r.tops_per_w,
            r.tops_per_mm2,
            r.utilization,
            diversity,
            r.edap_ratio_vs_baseline1,
            r.edap_ratio_vs_baseline2
        );
    }
    out
}

pub fn write_comparison_csv(
    path: &Path,
    rows: &[ComparisonRow],
    mref: &str,
) -> Result<(), ReportError> {
    write_atomic(path, &comparison_csv(rows, mref))
}

/// Provenance record for one run; key=value text.
#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub command: String,
    pub config_path: String,
    pub config_sha256: String,
    pub seed: u64,
    pub spec_sha256: String,
    pub profile_sha256: String,
    pub objective: String,
    pub version: String,
    pub duration_ms: u64,
}

impl Manifest {
    /// Run identity: a hash over everything that determines the outputs
    /// (wall-clock duration and tool version excluded).
    pub fn reference(&self) -> String {
        let identity = format!(
            "{}|{}|{}|{}|{}|{}",
            self.command,
            self.config_sha256,
            self.seed,
            self.spec_sha256,
            self.profile_sha256,
            self.objective
        );
        manifest_ref(&sha256_hex(identity.as_bytes())).to_string()
    }

    pub fn to_text(&self) -> String {
        format!(
            "schema={MANIFEST_SCHEMA}\ncommand={}\nconfig_path={}\nconfig_sha256={}\nseed={}\n\
spec_sha256={}\nprofile_sha256={}\nobjective={}\nversion={}\nduration_ms={}\n",
            self.command,
            self.config_path,
            self.config_sha256,
            self.seed,
            self.spec_sha256,
            self.profile_sha256,
            self.objective,
            self.version,
            self.duration_ms,
        )
    }

    pub fn parse(text: &str, path: &str) -> Result<Manifest, ReportError> {
        let mut fields = std::collections::HashMap::new();
        for line in text.lines() {
            if let Some((k, v)) = line.split_once('=') {
                fields.insert(k.to_string(), v.to_string());
            }
        }
        let get = |key: &str| -> Result<String, ReportError> {
            fields.get(key).cloned().ok_or(ReportError::Malformed {
                path: path.to_string(),
                what: "manifest",
                detail: format!("missing {key}"),
            })
        };
        let schema = get("schema")?;
        if schema != MANIFEST_SCHEMA {
            return Err(ReportError::SchemaMismatch {
                path: path.to_string(),
                expected: MANIFEST_SCHEMA.to_string(),
                found: schema,
            });
        }
        Ok(Manifest {
            command: get("command")?,
            config_path: get("config_path")?,
            config_sha256: get("config_sha256")?,
            seed: get("seed")?.parse().map_err(|_| ReportError::Malformed {
                path: path.to_string(),
                what: "manifest",
                detail: "bad seed".into(),
            })?,
            spec_sha256: get("spec_sha256")?,
            profile_sha256: get("profile_sha256")?,
            objective: get("objective")?,
            version: get("version")?,
            duration_ms: get("duration_ms")?.parse().unwrap_or(0),
        })
    }

    pub fn write(&self, path: &Path) -> Result<(), ReportError> {
        write_atomic(path, &self.to_text())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolve::GenerationStats;
    use crate::testutil::tiny_spec;

    fn sample_archive() -> Archive {
        let spec = tiny_spec();
        let mut rng = crate::rng::stream(5, "sampling");
        let mut archive = Archive::new_for_tests();
        for generation in 0..3u32 {
            let d = spec.sample_uniform(&mut rng);
            archive.push_for_tests(ArchiveEntry {
                design: d,
                metrics: HardwareMetrics::from_eda(0.5 + generation as f64, 2.0, 30.0),
                accuracy: 70.0 + generation as f64,
                score: 0.01 * (3 - generation) as f64,
                generation,
                feasible: true,
                hits: 1 + generation,
            });
            archive.convergence.push(GenerationStats {
                generation,
                best_score: 0.03 - 0.01 * generation as f64,
                mean_score: 0.05,
                feasible_fraction: 0.9,
            });
        }
        archive.anchor = Some(Anchor {
            energy_mj: 0.5,
            delay_us: 2.0,
            area_mm2: 30.0,
            accuracy: 70.0,
        });
        archive
    }

    #[test]
    fn archive_csv_round_trips() {
        let archive = sample_archive();
        let text = archive_csv(&archive, "deadbeefdeadbeef");
        assert!(text.starts_with("# schema=archive-v1 manifest=deadbeefdeadbeef anchor="));
        let rows = parse_archive_csv(&text, "test").unwrap();
        assert_eq!(rows.len(), 3);
        for (row, entry) in rows.iter().zip(&archive.entries) {
            assert_eq!(row.generation, entry.generation);
            assert_eq!(row.encoding, entry.design.encoding);
            assert_eq!(row.metrics.energy_mj, entry.metrics.energy_mj);
            assert_eq!(row.score, entry.score);
            assert_eq!(row.hits, entry.hits);
        }
    }

    #[test]
    fn schema_mismatch_is_an_error_not_a_reinterpretation() {
        let archive = sample_archive();
        let text = archive_csv(&archive, "deadbeefdeadbeef")
            .replace("schema=archive-v1", "schema=archive-v9");
        match parse_archive_csv(&text, "test") {
            Err(ReportError::SchemaMismatch { expected, found, .. }) => {
                assert_eq!(expected, "archive-v1");
                assert_eq!(found, "archive-v9");
            }
            other => panic!("expected SchemaMismatch, got {other:?}"),
        }
    }

    #[test]
    fn identical_archives_serialize_byte_identically() {
        let archive = sample_archive();
        assert_eq!(archive_csv(&archive, "aa"), archive_csv(&archive, "aa"));
    }

    #[test]
    fn manifest_round_trips() {
        let m = Manifest {
            command: "search".into(),
            config_path: "configs/x.toml".into(),
            config_sha256: sha256_hex(b"config"),
            seed: 7,
            spec_sha256: sha256_hex(b"spec"),
            profile_sha256: sha256_hex(b"profile"),
            objective: "edap".into(),
            version: "0.1.0".into(),
            duration_ms: 1500,
        };
        let parsed = Manifest::parse(&m.to_text(), "m.txt").unwrap();
        assert_eq!(m, parsed);
        assert_eq!(m.reference().len(), 16);

        let bad = m.to_text().replace("schema=manifest-v1", "schema=manifest-v2");
        assert!(matches!(
            Manifest::parse(&bad, "m.txt"),
            Err(ReportError::SchemaMismatch { .. })
        ));
    }

    #[test]
    fn comparison_rows_serialize_with_empty_diversity_for_baselines() {
        let row = ComparisonRow {
            method: "baseline1".into(),
            accuracy: 73.0,
            energy_mj: 0.95,
            delay_us: 6.94,
            area_mm2: 3691.0,
            edap: 24.33,
            score: 0.334,
            tops_per_w: 1.36,
            tops_per_mm2: 0.71,
            utilization: 0.26,
            diversity: None,
            edap_ratio_vs_baseline1: 1.0,
            edap_ratio_vs_baseline2: 0.86,
        };
        let text = comparison_csv(&[row], "ff00ff00ff00ff00");
        let data_line = text.lines().nth(2).unwrap();
        assert!(data_line.contains(",0.26,,1,"), "line={data_line}");
    }

    #[test]
    fn sha256_is_stable() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
