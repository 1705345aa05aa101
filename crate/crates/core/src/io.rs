//! Dataset file I/O: CSV with exact decimal round-trips, and the "ARDS" v1
//! little-endian binary cache (f32 features) for multi-million-row sets.
//!
//! Readers stream rows; nothing here requires the whole file in memory.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use crate::data::{Dataset, Sample};
use crate::error::{Error, Result};
use crate::schema::FeatureSchema;
use crate::FEATURE_COUNT;

pub const ARDS_MAGIC: [u8; 4] = *b"ARDS";
pub const ARDS_VERSION: u32 = 1;
/// 87 f32 features + 1 label byte.
const ARDS_ROW_BYTES: u64 = FEATURE_COUNT as u64 * 4 + 1;

/// Streaming consumer of generated rows. Implementations own their output
/// buffering; callers drive them strictly sequentially.
pub trait RowSink {
    fn write_row(&mut self, features: &[f64], label: u8) -> std::io::Result<()>;
    fn finish(&mut self) -> std::io::Result<()>;
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

fn format_value(v: f64) -> String {
    // `Display` for f64 prints the shortest decimal that parses back exactly.
    format!("{v}")
}

/// CSV writer: header row (schema names + "label"), then one row per sample.
pub struct CsvSink {
    out: BufWriter<File>,
    line: String,
}

impl CsvSink {
    pub fn create(path: impl AsRef<Path>, schema: &FeatureSchema) -> Result<Self> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        let mut header = String::new();
        for name in schema.names() {
            header.push_str(name);
            header.push(',');
        }
        header.push_str("label\n");
        out.write_all(header.as_bytes())
            .map_err(|e| Error::io(path, e))?;
        Ok(CsvSink {
            out,
            line: String::with_capacity(FEATURE_COUNT * 20),
        })
    }
}

impl RowSink for CsvSink {
    fn write_row(&mut self, features: &[f64], label: u8) -> std::io::Result<()> {
        self.line.clear();
        for v in features {
            self.line.push_str(&format_value(*v));
            self.line.push(',');
        }
        self.line.push((b'0' + label) as char);
        self.line.push('\n');
        self.out.write_all(self.line.as_bytes())
    }

    fn finish(&mut self) -> std::io::Result<()> {
        self.out.flush()
    }
}

pub fn write_csv(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut sink = CsvSink::create(path, ds.schema())?;
    for s in ds.samples() {
        sink.write_row(s.features(), s.label())
            .map_err(|e| Error::io(path, e))?;
    }
    sink.finish().map_err(|e| Error::io(path, e))
}

struct CsvRows {
    path: PathBuf,
    reader: BufReader<File>,
    line: String,
    row: usize,
    schema_len: usize,
    names: Vec<String>,
}

impl CsvRows {
    fn open(path: &Path, schema: &FeatureSchema) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut reader = BufReader::new(file);
        let mut header = String::new();
        reader
            .read_line(&mut header)
            .map_err(|e| Error::io(path, e))?;
        let got: Vec<&str> = header.trim_end_matches(['\r', '\n']).split(',').collect();
        let want: Vec<&str> = schema.names().chain(std::iter::once("label")).collect();
        if got != want {
            return Err(Error::SchemaMismatch(format!(
                "{}: header has {} columns and does not match the schema (+label)",
                path.display(),
                got.len()
            )));
        }
        Ok(CsvRows {
            path: path.to_path_buf(),
            reader,
            line: String::new(),
            row: 0,
            schema_len: schema.len(),
            names: schema.names().map(str::to_string).collect(),
        })
    }

    fn parse_line(&self) -> Result<(Vec<f64>, u8)> {
        let cells: Vec<&str> = self
            .line
            .trim_end_matches(['\r', '\n'])
            .split(',')
            .collect();
        if cells.len() != self.schema_len + 1 {
            return Err(Error::Parse {
                path: self.path.clone(),
                row: self.row,
                column: format!("(row has {} cells, expected {})", cells.len(), self.schema_len + 1),
                reason: "wrong cell count".into(),
            });
        }
        let mut features = Vec::with_capacity(self.schema_len);
        for (i, cell) in cells[..self.schema_len].iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                path: self.path.clone(),
                row: self.row,
                column: self.names[i].clone(),
                reason: format!("not a number: {cell:?}"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    path: self.path.clone(),
                    row: self.row,
                    column: self.names[i].clone(),
                    reason: format!("non-finite value: {cell:?}"),
                });
            }
            features.push(v);
        }
        let label_cell = cells[self.schema_len];
        let label: i64 = label_cell.parse().map_err(|_| Error::Label {
            path: self.path.clone(),
            row: self.row,
            value: label_cell.to_string(),
        })?;
        if label != 0 && label != 1 {
            return Err(Error::Label {
                path: self.path.clone(),
                row: self.row,
                value: label_cell.to_string(),
            });
        }
        Ok((features, label as u8))
    }
}

impl Iterator for CsvRows {
    type Item = Result<(Vec<f64>, u8)>;

    fn next(&mut self) -> Option<Self::Item> {
        self.line.clear();
        match self.reader.read_line(&mut self.line) {
            Err(e) => Some(Err(Error::io(&self.path, e))),
            Ok(0) => None,
            Ok(_) => {
                if self.line.trim_end_matches(['\r', '\n']).is_empty() {
                    // A blank line is only legal as the very last line.
                    return match self.reader.fill_buf() {
                        Ok(rest) if rest.is_empty() => None,
                        Ok(_) => Some(Err(Error::Parse {
                            path: self.path.clone(),
                            row: self.row + 1,
                            column: "(blank line)".into(),
                            reason: "blank line before end of file".into(),
                        })),
                        Err(e) => Some(Err(Error::io(&self.path, e))),
                    };
                }
                self.row += 1;
                Some(self.parse_line())
            }
        }
    }
}

pub fn load_csv(path: impl AsRef<Path>, schema: &FeatureSchema) -> Result<Dataset> {
    let path = path.as_ref();
    let mut samples = Vec::new();
    for row in CsvRows::open(path, schema)? {
        let (features, label) = row?;
        samples.push(Sample::new(features, label)?);
    }
    Ok(Dataset::new(schema.clone(), samples))
}

// ---------------------------------------------------------------------------
// ARDS binary
// ---------------------------------------------------------------------------

/// Binary writer. The row count goes into the header, so it must be known
/// up front; `finish` verifies the promise was kept.
pub struct ArdsSink {
    path: PathBuf,
    out: BufWriter<File>,
    expected_rows: u64,
    written: u64,
    buf: Vec<u8>,
}

impl ArdsSink {
    pub fn create(path: impl AsRef<Path>, expected_rows: u64) -> Result<Self> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        let mut header = Vec::with_capacity(16);
        header.extend_from_slice(&ARDS_MAGIC);
        header.extend_from_slice(&ARDS_VERSION.to_le_bytes());
        header.extend_from_slice(&expected_rows.to_le_bytes());
        out.write_all(&header).map_err(|e| Error::io(path, e))?;
        Ok(ArdsSink {
            path: path.to_path_buf(),
            out,
            expected_rows,
            written: 0,
            buf: Vec::with_capacity(ARDS_ROW_BYTES as usize),
        })
    }
}

impl RowSink for ArdsSink {
    fn write_row(&mut self, features: &[f64], label: u8) -> std::io::Result<()> {
        self.buf.clear();
        for (i, v) in features.iter().enumerate() {
            let f = *v as f32;
            if !f.is_finite() {
                return Err(std::io::Error::new(
                    std::io::ErrorKind::InvalidData,
                    format!("feature {i} value {v} does not fit in an f32"),
                ));
            }
            self.buf.extend_from_slice(&f.to_le_bytes());
        }
        self.buf.push(label);
        self.out.write_all(&self.buf)?;
        self.written += 1;
        Ok(())
    }

    fn finish(&mut self) -> std::io::Result<()> {
        if self.written != self.expected_rows {
            return Err(std::io::Error::new(
                std::io::ErrorKind::InvalidData,
                format!(
                    "{}: header promised {} rows, wrote {}",
                    self.path.display(),
                    self.expected_rows,
                    self.written
                ),
            ));
        }
        self.out.flush()
    }
}

pub fn write_binary(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut sink = ArdsSink::create(path, ds.len() as u64)?;
    for s in ds.samples() {
        sink.write_row(s.features(), s.label())
            .map_err(|e| Error::io(path, e))?;
    }
    sink.finish().map_err(|e| Error::io(path, e))
}

struct ArdsRows {
    path: PathBuf,
    reader: BufReader<File>,
    remaining: u64,
    buf: [u8; ARDS_ROW_BYTES as usize],
}

impl ArdsRows {
    fn open(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let total = file.metadata().map_err(|e| Error::io(path, e))?.len();
        let mut reader = BufReader::new(file);
        let mut header = [0u8; 16];
        reader
            .read_exact(&mut header)
            .map_err(|_| Error::Format {
                path: path.to_path_buf(),
                reason: "file too short for a 16-byte header".into(),
            })?;
        if header[0..4] != ARDS_MAGIC {
            return Err(Error::Format {
                path: path.to_path_buf(),
                reason: format!("bad magic {:?}", &header[0..4]),
            });
        }
        let version = u32::from_le_bytes(header[4..8].try_into().unwrap());
        if version != ARDS_VERSION {
            return Err(Error::Format {
                path: path.to_path_buf(),
                reason: format!("unsupported version {version}"),
            });
        }
        let count = u64::from_le_bytes(header[8..16].try_into().unwrap());
        let expected = count * ARDS_ROW_BYTES;
        if total - 16 != expected {
            return Err(Error::Truncated {
                path: path.to_path_buf(),
                expected,
                found: total - 16,
            });
        }
        Ok(ArdsRows {
            path: path.to_path_buf(),
            reader,
            remaining: count,
            buf: [0u8; ARDS_ROW_BYTES as usize],
        })
    }
}

impl Iterator for ArdsRows {
    type Item = Result<(Vec<f64>, u8)>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.remaining == 0 {
            return None;
        }
        self.remaining -= 1;
        if let Err(e) = self.reader.read_exact(&mut self.buf) {
            return Some(Err(Error::io(&self.path, e)));
        }
        let mut features = Vec::with_capacity(FEATURE_COUNT);
        for i in 0..FEATURE_COUNT {
            let bytes: [u8; 4] = self.buf[i * 4..i * 4 + 4].try_into().unwrap();
            features.push(f32::from_le_bytes(bytes) as f64);
        }
        Some(Ok((features, self.buf[FEATURE_COUNT * 4])))
    }
}

pub fn read_binary(path: impl AsRef<Path>, schema: &FeatureSchema) -> Result<Dataset> {
    let path = path.as_ref();
    let mut samples = Vec::new();
    for row in ArdsRows::open(path)? {
        let (features, label) = row?;
        samples.push(Sample::new(features, label)?);
    }
    Ok(Dataset::new(schema.clone(), samples))
}

// ---------------------------------------------------------------------------
// Row sources for streaming training
// ---------------------------------------------------------------------------

/// Where training rows come from: an in-memory dataset or a list of files
/// (CSV or ARDS, detected by magic bytes) streamed in order. Re-streamable,
/// so multi-epoch training never holds more than a buffer in memory.
pub enum DataSource {
    Memory(Dataset),
    Files {
        schema: FeatureSchema,
        paths: Vec<PathBuf>,
    },
}

pub type RowIter<'a> = Box<dyn Iterator<Item = Result<(Vec<f64>, u8)>> + Send + 'a>;

fn is_ards_file(path: &Path) -> Result<bool> {
    let mut file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut magic = [0u8; 4];
    match file.read_exact(&mut magic) {
        Ok(()) => Ok(magic == ARDS_MAGIC),
        Err(_) => Ok(false), // shorter than 4 bytes: not ARDS
    }
}

/// Open one dataset file as a row stream, choosing the format by content.
pub fn open_rows<'a>(path: &Path, schema: &FeatureSchema) -> Result<RowIter<'a>> {
    if is_ards_file(path)? {
        Ok(Box::new(ArdsRows::open(path)?))
    } else {
        Ok(Box::new(CsvRows::open(path, schema)?))
    }
}

/// Load a whole dataset file, CSV or ARDS, detected by content.
pub fn load_dataset(path: impl AsRef<Path>, schema: &FeatureSchema) -> Result<Dataset> {
    let path = path.as_ref();
    if is_ards_file(path)? {
        read_binary(path, schema)
    } else {
        load_csv(path, schema)
    }
}

impl DataSource {
    pub fn from_paths(paths: Vec<PathBuf>, schema: FeatureSchema) -> Self {
        DataSource::Files { schema, paths }
    }

    pub fn schema(&self) -> &FeatureSchema {
        match self {
            DataSource::Memory(ds) => ds.schema(),
            DataSource::Files { schema, .. } => schema,
        }
    }

    /// Fresh pass over all rows, in stored/file order.
    pub fn stream(&self) -> Result<RowIter<'_>> {
        match self {
            DataSource::Memory(ds) => Ok(Box::new(
                ds.samples()
                    .iter()
                    .map(|s| Ok((s.features().to_vec(), s.label()))),
            )),
            DataSource::Files { schema, paths } => {
                let mut iters = Vec::with_capacity(paths.len());
                for p in paths {
                    iters.push(open_rows(p, schema)?);
                }
                Ok(Box::new(iters.into_iter().flatten()))
            }
        }
    }
}
