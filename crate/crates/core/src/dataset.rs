//! Labeled RIR datasets and their CSV file format.
//!
//! A file starts with one metadata line,
//!
//! ```text
//! # sirec-dataset version=1 sample_rate_hz=10000 frame_len=4096 rir_offset=2048 samples=512 classes=0;25;50;75;100
//! ```
//!
//! followed by a CSV table with columns `label,fine_fill_percent,material,x0,x1,...`.
//! Samples are written with 9 significant digits.

use std::collections::BTreeSet;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DATASET_FORMAT_VERSION: u32 = 1;
const MAGIC: &str = "# sirec-dataset";
const FIXED_COLUMNS: [&str; 3] = ["label", "fine_fill_percent", "material"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledRow {
    pub rir: Vec<f64>,
    pub label: i32,
    pub fine_fill_percent: Option<f64>,
    pub material: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub sample_rate_hz: u32,
    pub frame_len: usize,
    /// Sample of the raw recording frame that RIR index 0 corresponds to.
    pub rir_offset: usize,
    /// Samples stored per row.
    pub samples: usize,
    /// Declared class labels, ascending.
    pub classes: Vec<i32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    meta: DatasetMeta,
    rows: Vec<LabeledRow>,
}

impl DatasetMeta {
    fn validate(&self) -> Result<()> {
        if self.sample_rate_hz == 0 {
            return Err(Error::Config("sample_rate_hz must be positive".into()));
        }
        if self.classes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("classes must be strictly ascending".into()));
        }
        Ok(())
    }

    fn header_line(&self) -> String {
        let classes: Vec<String> = self.classes.iter().map(i32::to_string).collect();
        format!(
            "{MAGIC} version={DATASET_FORMAT_VERSION} sample_rate_hz={} frame_len={} rir_offset={} samples={} classes={}",
            self.sample_rate_hz,
            self.frame_len,
            self.rir_offset,
            self.samples,
            classes.join(";")
        )
    }

    fn parse_header_line(line: &str) -> Result<Self> {
        let schema = |column: usize, message: String| Error::Schema {
            line: 1,
            column,
            message,
        };
        let rest = line
            .strip_prefix(MAGIC)
            .ok_or_else(|| schema(1, format!("expected a `{MAGIC}` header line")))?;
        let mut version = None;
        let mut rate = None;
        let mut frame_len = None;
        let mut offset = None;
        let mut samples = None;
        let mut classes = None;
        let mut column = MAGIC.len() + 1;
        for token in rest.split(' ') {
            if token.is_empty() {
                column += 1;
                continue;
            }
            let (key, value) = token
                .split_once('=')
                .ok_or_else(|| schema(column, format!("expected key=value, got `{token}`")))?;
            let num = |v: &str| {
                v.parse::<usize>()
                    .map_err(|_| schema(column, format!("`{key}` is not a non-negative integer: `{v}`")))
            };
            match key {
                "version" => version = Some(value.to_string()),
                "sample_rate_hz" => rate = Some(num(value)?),
                "frame_len" => frame_len = Some(num(value)?),
                "rir_offset" => offset = Some(num(value)?),
                "samples" => samples = Some(num(value)?),
                "classes" => {
                    let parsed = if value.is_empty() {
                        Ok(Vec::new())
                    } else {
                        value.split(';').map(str::parse::<i32>).collect()
                    };
                    classes = Some(parsed.map_err(|_| schema(column, format!("bad class list `{value}`")))?);
                }
                other => return Err(schema(column, format!("unknown header key `{other}`"))),
            }
            column += token.len() + 1;
        }
        let version = version.ok_or_else(|| schema(1, "missing header key `version`".into()))?;
        if version != DATASET_FORMAT_VERSION.to_string() {
            return Err(Error::Version {
                found: version,
                supported: DATASET_FORMAT_VERSION,
            });
        }
        let missing = |k: &str| schema(1, format!("missing header key `{k}`"));
        let meta = DatasetMeta {
            sample_rate_hz: u32::try_from(rate.ok_or_else(|| missing("sample_rate_hz"))?)
                .map_err(|_| schema(1, "sample_rate_hz out of range".into()))?,
            frame_len: frame_len.ok_or_else(|| missing("frame_len"))?,
            rir_offset: offset.ok_or_else(|| missing("rir_offset"))?,
            samples: samples.ok_or_else(|| missing("samples"))?,
            classes: classes.ok_or_else(|| missing("classes"))?,
        };
        meta.validate().map_err(|e| schema(1, e.to_string()))?;
        Ok(meta)
    }

    fn column_names(&self) -> Vec<String> {
        FIXED_COLUMNS
            .iter()
            .map(|s| s.to_string())
            .chain((0..self.samples).map(|i| format!("x{i}")))
            .collect()
    }
}

impl LabeledDataset {
    pub fn new(meta: DatasetMeta, rows: Vec<LabeledRow>) -> Result<Self> {
        meta.validate()?;
        for (i, row) in rows.iter().enumerate() {
            check_row(&meta, row).map_err(|e| Error::Config(format!("row {i}: {e}")))?;
        }
        Ok(LabeledDataset { meta, rows })
    }

    pub fn meta(&self) -> &DatasetMeta {
        &self.meta
    }

    pub fn rows(&self) -> &[LabeledRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn labels(&self) -> Vec<i32> {
        self.rows.iter().map(|r| r.label).collect()
    }

    /// Distinct labels present in the rows, ascending.
    pub fn present_classes(&self) -> Vec<i32> {
        self.rows
            .iter()
            .map(|r| r.label)
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    pub fn push(&mut self, row: LabeledRow) -> Result<()> {
        check_row(&self.meta, &row)?;
        self.rows.push(row);
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{}", self.meta.header_line())?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(self.meta.column_names()).map_err(csv_io)?;
        for row in &self.rows {
            w.write_record(row_fields(row)).map_err(csv_io)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut input = BufReader::new(input);
        let mut first = String::new();
        input.read_line(&mut first)?;
        if first.is_empty() {
            return Err(Error::Schema {
                line: 1,
                column: 1,
                message: "empty file".into(),
            });
        }
        let meta = DatasetMeta::parse_header_line(first.trim_end_matches(['\n', '\r']))?;

        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .from_reader(input);
        let expected = meta.column_names();
        let mut records = reader.records();
        match records.next() {
            None => {
                return Err(Error::Schema {
                    line: 2,
                    column: 1,
                    message: "missing column header".into(),
                })
            }
            Some(header) => {
                let header = header.map_err(|e| csv_schema(&e, 1))?;
                let line = 2;
                if header.len() != expected.len() {
                    return Err(Error::Schema {
                        line,
                        column: header.len().min(expected.len()) + 1,
                        message: format!("expected {} columns, found {}", expected.len(), header.len()),
                    });
                }
                for (i, (got, want)) in header.iter().zip(&expected).enumerate() {
                    if got != want {
                        return Err(Error::Schema {
                            line,
                            column: i + 1,
                            message: format!("expected column `{want}`, found `{got}`"),
                        });
                    }
                }
            }
        }

        let mut rows = Vec::new();
        for record in records {
            let record = record.map_err(|e| csv_schema(&e, 1))?;
            let line = record.position().map_or(0, |p| p.line()) + 1;
            rows.push(parse_row(&meta, &record, line)?);
        }
        Ok(LabeledDataset { meta, rows })
    }

    pub fn write_path(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    pub fn read_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_csv(File::open(path)?)
    }
}

/// Appends rows to a dataset file one at a time, flushing after each.
///
/// A missing or empty file gets a fresh header; an existing file must carry
/// the same metadata.
pub struct DatasetAppender {
    meta: DatasetMeta,
    file: File,
}

impl DatasetAppender {
    pub fn open(path: impl AsRef<Path>, meta: DatasetMeta) -> Result<Self> {
        meta.validate()?;
        let path = path.as_ref();
        let has_content = path.metadata().map(|m| m.len() > 0).unwrap_or(false);
        if has_content {
            let existing = LabeledDataset::read_path(path)?;
            if existing.meta != meta {
                return Err(Error::Config(format!(
                    "{} has header `{}`, expected `{}`",
                    path.display(),
                    existing.meta.header_line(),
                    meta.header_line()
                )));
            }
        }
        let mut file = OpenOptions::new().create(true).append(true).open(path)?;
        if !has_content {
            let mut buf = Vec::new();
            writeln!(buf, "{}", meta.header_line())?;
            let mut w = csv::Writer::from_writer(&mut buf);
            w.write_record(meta.column_names()).map_err(csv_io)?;
            drop(w);
            file.write_all(&buf)?;
            file.flush()?;
        }
        Ok(DatasetAppender { meta, file })
    }

    pub fn meta(&self) -> &DatasetMeta {
        &self.meta
    }

    pub fn append(&mut self, row: &LabeledRow) -> Result<()> {
        check_row(&self.meta, row)?;
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(row_fields(row)).map_err(csv_io)?;
        let buf = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        // One write per row keeps a crashed consumer from leaving half a line.
        self.file.write_all(&buf)?;
        self.file.flush()?;
        Ok(())
    }
}

fn check_row(meta: &DatasetMeta, row: &LabeledRow) -> Result<()> {
    if row.rir.len() != meta.samples {
        return Err(Error::LengthMismatch {
            expected: meta.samples,
            actual: row.rir.len(),
        });
    }
    if meta.classes.binary_search(&row.label).is_err() {
        return Err(Error::UnknownLabel(row.label));
    }
    Ok(())
}

fn row_fields(row: &LabeledRow) -> Vec<String> {
    let mut fields = Vec::with_capacity(3 + row.rir.len());
    fields.push(row.label.to_string());
    fields.push(row.fine_fill_percent.map(|f| f.to_string()).unwrap_or_default());
    fields.push(row.material.clone());
    fields.extend(row.rir.iter().map(|v| format!("{v:.8e}")));
    fields
}

fn parse_row(meta: &DatasetMeta, record: &csv::StringRecord, line: u64) -> Result<LabeledRow> {
    let expected = 3 + meta.samples;
    if record.len() != expected {
        return Err(Error::Schema {
            line,
            column: record.len().min(expected) + 1,
            message: format!("expected {expected} fields, found {}", record.len()),
        });
    }
    let err = |column: usize, message: String| Error::Schema { line, column, message };
    let label: i32 = record[0]
        .trim()
        .parse()
        .map_err(|_| err(1, format!("label `{}` is not an integer", &record[0])))?;
    if meta.classes.binary_search(&label).is_err() {
        return Err(err(1, format!("label {label} is not a declared class")));
    }
    let fine = record[1].trim();
    let fine_fill_percent = if fine.is_empty() {
        None
    } else {
        Some(
            fine.parse::<f64>()
                .map_err(|_| err(2, format!("fine_fill_percent `{fine}` is not a number")))?,
        )
    };
    let rir = record
        .iter()
        .skip(3)
        .enumerate()
        .map(|(i, field)| {
            field
                .trim()
                .parse::<f64>()
                .map_err(|_| err(4 + i, format!("x{i} `{field}` is not a number")))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LabeledRow {
        rir,
        label,
        fine_fill_percent,
        material: record[2].to_string(),
    })
}

fn csv_io(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Io(std::io::Error::other(format!("{other:?}"))),
    }
}

fn csv_schema(e: &csv::Error, line_offset: u64) -> Error {
    Error::Schema {
        line: e.position().map_or(0, |p| p.line()) + line_offset,
        column: 1,
        message: e.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn meta(samples: usize) -> DatasetMeta {
        DatasetMeta {
            sample_rate_hz: 10_000,
            frame_len: 4096,
            rir_offset: 2048,
            samples,
            classes: vec![0, 25, 50, 75, 100],
        }
    }

    fn sample_dataset() -> LabeledDataset {
        let rows = vec![
            LabeledRow {
                rir: vec![1.0, -2.5e-7, 3.125, 0.0],
                label: 25,
                fine_fill_percent: Some(20.0),
                material: "straw".into(),
            },
            LabeledRow {
                rir: vec![-0.0, 1e-300, 6.02e23, -1.0 / 3.0],
                label: 100,
                fine_fill_percent: None,
                material: "card, board".into(),
            },
        ];
        LabeledDataset::new(meta(4), rows).unwrap()
    }

    fn write(d: &LabeledDataset) -> String {
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        String::from_utf8(buf).unwrap()
    }

    #[test]
    fn roundtrip_within_nine_digits() {
        let d = sample_dataset();
        let text = write(&d);
        assert!(text.starts_with(
            "# sirec-dataset version=1 sample_rate_hz=10000 frame_len=4096 rir_offset=2048 samples=4 classes=0;25;50;75;100\nlabel,fine_fill_percent,material,x0,x1,x2,x3\n"
        ));
        let back = LabeledDataset::read_csv(text.as_bytes()).unwrap();
        assert_eq!(back.meta(), d.meta());
        for (a, b) in back.rows().iter().zip(d.rows()) {
            assert_eq!(a.label, b.label);
            assert_eq!(a.fine_fill_percent, b.fine_fill_percent);
            assert_eq!(a.material, b.material);
            for (x, y) in a.rir.iter().zip(&b.rir) {
                assert!((x - y).abs() <= 5e-9 * y.abs(), "{x} vs {y}");
            }
        }
        // A second trip through the text form is exact.
        assert_eq!(write(&back), text);
    }

    #[test]
    fn header_only_is_empty_dataset() {
        let d = LabeledDataset::new(meta(2), vec![]).unwrap();
        let back = LabeledDataset::read_csv(write(&d).as_bytes()).unwrap();
        assert!(back.is_empty());
        assert_eq!(back.meta(), d.meta());
    }

    #[test]
    fn empty_file_is_schema_error() {
        let err = LabeledDataset::read_csv(&b""[..]).unwrap_err();
        assert!(matches!(err, Error::Schema { line: 1, .. }), "{err}");
    }

    #[test]
    fn errors_name_line_and_column() {
        let text = write(&sample_dataset());
        let bad = text.replacen("3.12500000e0", "pi", 1);
        match LabeledDataset::read_csv(bad.as_bytes()).unwrap_err() {
            Error::Schema { line, column, .. } => assert_eq!((line, column), (3, 6)),
            e => panic!("{e}"),
        }
        let bad = text.replacen("\n100,", "\n7,", 1);
        match LabeledDataset::read_csv(bad.as_bytes()).unwrap_err() {
            Error::Schema { line, column, .. } => assert_eq!((line, column), (4, 1)),
            e => panic!("{e}"),
        }
        let bad = text.replacen(",x2,", ",y2,", 1);
        match LabeledDataset::read_csv(bad.as_bytes()).unwrap_err() {
            Error::Schema { line, column, .. } => assert_eq!((line, column), (2, 6)),
            e => panic!("{e}"),
        }
        let short = text.replacen(",-3.33333333e-1", "", 1);
        match LabeledDataset::read_csv(short.as_bytes()).unwrap_err() {
            Error::Schema { line, .. } => assert_eq!(line, 4),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn rejects_other_versions_and_keys() {
        let text = write(&sample_dataset());
        let v2 = text.replacen("version=1", "version=2", 1);
        assert!(matches!(
            LabeledDataset::read_csv(v2.as_bytes()),
            Err(Error::Version { .. })
        ));
        let extra = text.replacen("samples=4", "samples=4 colour=red", 1);
        assert!(matches!(
            LabeledDataset::read_csv(extra.as_bytes()),
            Err(Error::Schema { line: 1, .. })
        ));
        assert!(LabeledDataset::read_csv(&b"label,x0\n1,2\n"[..]).is_err());
    }

    #[test]
    fn constructor_checks_rows() {
        let row = LabeledRow {
            rir: vec![0.0; 3],
            label: 0,
            fine_fill_percent: None,
            material: String::new(),
        };
        assert!(LabeledDataset::new(meta(4), vec![row.clone()]).is_err());
        let row = LabeledRow {
            rir: vec![0.0; 4],
            label: 1,
            ..row
        };
        assert!(LabeledDataset::new(meta(4), vec![row]).is_err());
    }

    #[test]
    fn appender_creates_then_extends() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        let d = sample_dataset();
        {
            let mut app = DatasetAppender::open(&path, d.meta().clone()).unwrap();
            app.append(&d.rows()[0]).unwrap();
        }
        {
            let mut app = DatasetAppender::open(&path, d.meta().clone()).unwrap();
            app.append(&d.rows()[1]).unwrap();
        }
        let back = LabeledDataset::read_path(&path).unwrap();
        assert_eq!(write(&back), write(&d));
        assert!(DatasetAppender::open(&path, meta(5)).is_err());
    }
}
