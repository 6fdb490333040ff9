//! Output files: versioned CSV tables and an output directory that cleans
//! up after itself when a command fails.
//!
//! Every CSV starts with a comment line `#ierank-schema <name> v<version>`
//! followed by a header row.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};

pub const SCHEMA_VERSION: u32 = 1;
const SCHEMA_PREFIX: &str = "#ierank-schema ";

/// A named file produced by a command, kept in memory until written.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

impl Artifact {
    pub fn text(name: impl Into<String>, text: String) -> Self {
        Artifact {
            name: name.into(),
            bytes: text.into_bytes(),
        }
    }
}

/// Builds a CSV table row by row.
pub struct Table {
    schema: &'static str,
    writer: csv::Writer<Vec<u8>>,
    width: usize,
}

impl Table {
    pub fn new(schema: &'static str, header: &[&str]) -> Self {
        let mut writer = csv::Writer::from_writer(
            format!("{SCHEMA_PREFIX}{schema} v{SCHEMA_VERSION}\n").into_bytes(),
        );
        writer.write_record(header).expect("writing to memory");
        Table {
            schema,
            writer,
            width: header.len(),
        }
    }

    pub fn row<I, S>(&mut self, fields: I)
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        let record = csv::ByteRecord::from_iter(fields);
        assert_eq!(
            record.len(),
            self.width,
            "row width differs from the {} header",
            self.schema
        );
        self.writer
            .write_byte_record(&record)
            .expect("writing to memory");
    }

    pub fn into_artifact(self, name: impl Into<String>) -> Artifact {
        Artifact {
            name: name.into(),
            bytes: self.writer.into_inner().expect("flushing to memory"),
        }
    }
}

/// A parsed CSV table.
#[derive(Clone, Debug, PartialEq)]
pub struct ParsedTable {
    pub schema: String,
    pub version: u32,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl ParsedTable {
    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }
}

/// Reads a table written by [`Table`], checking the schema line.
pub fn parse_table(bytes: &[u8], expected_schema: &str) -> Result<ParsedTable> {
    let text = std::str::from_utf8(bytes).context("table is not UTF-8")?;
    let (first, rest) = text.split_once('\n').unwrap_or((text, ""));
    let Some(tag) = first.strip_prefix(SCHEMA_PREFIX) else {
        bail!("missing schema line");
    };
    let (schema, version) = tag.rsplit_once(" v").context("malformed schema line")?;
    let version: u32 = version.parse().context("malformed schema version")?;
    ensure!(
        schema == expected_schema,
        "schema `{schema}`, expected `{expected_schema}`"
    );
    ensure!(
        version == SCHEMA_VERSION,
        "unsupported schema version {version}"
    );
    let mut reader = csv::Reader::from_reader(rest.as_bytes());
    let header = reader.headers()?.iter().map(str::to_owned).collect();
    let rows = reader
        .records()
        .map(|r| Ok(r?.iter().map(str::to_owned).collect()))
        .collect::<Result<_>>()?;
    Ok(ParsedTable {
        schema: schema.to_owned(),
        version,
        header,
        rows,
    })
}

/// Writes artifacts into a directory. Unless [`OutputDir::commit`] is
/// called, everything written (and the directory, if this created it) is
/// removed on drop.
pub struct OutputDir {
    dir: PathBuf,
    created_dir: bool,
    written: Vec<PathBuf>,
    committed: bool,
}

impl OutputDir {
    pub fn create(dir: &Path) -> Result<Self> {
        let existed = dir.is_dir();
        fs::create_dir_all(dir)
            .with_context(|| format!("creating output directory {}", dir.display()))?;
        Ok(OutputDir {
            dir: dir.to_owned(),
            created_dir: !existed,
            written: Vec::new(),
            committed: false,
        })
    }

    pub fn write(&mut self, artifact: &Artifact) -> Result<PathBuf> {
        let path = self.dir.join(&artifact.name);
        // Recorded first so a half-written file is cleaned up too.
        self.written.push(path.clone());
        fs::write(&path, &artifact.bytes).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }

    pub fn commit(mut self) -> Vec<PathBuf> {
        self.committed = true;
        std::mem::take(&mut self.written)
    }
}

impl Drop for OutputDir {
    fn drop(&mut self) {
        if self.committed {
            return;
        }
        for p in &self.written {
            let _ = fs::remove_file(p);
        }
        if self.created_dir {
            let _ = fs::remove_dir(&self.dir);
        }
    }
}

/// `mean ± variance` with four and three decimals.
pub fn pm(mean: f64, variance: f64) -> String {
    format!("{mean:.4} ± {variance:.3}")
}
