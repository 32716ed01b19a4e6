//! JSON-lines dataset files: one sample object per line.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use thiserror::Error;

use super::{validate_sample, Dataset, MultimodalSample};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: invalid sample: {message}")]
    Invalid { line: usize, message: String },
    #[error("line {line}: {field} dimension {found} differs from dimension {expected} of the first sample")]
    DimensionMismatch {
        line: usize,
        field: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: duplicate sample id {id:?}")]
    DuplicateId { line: usize, id: String },
}

/// Parses a dataset, validating every sample. Blank lines are skipped.
pub fn read_jsonl<R: BufRead>(reader: R) -> Result<Dataset, DatasetError> {
    let mut samples: Vec<MultimodalSample> = Vec::new();
    let mut lines: Vec<usize> = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| DatasetError::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let sample: MultimodalSample = serde_json::from_str(&line).map_err(|e| DatasetError::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        if let Err(violations) = validate_sample(&sample) {
            let message = violations.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ");
            return Err(DatasetError::Invalid { line: line_no, message });
        }
        samples.push(sample);
        lines.push(line_no);
    }
    let dataset = Dataset::new(samples);
    // Report file line numbers rather than sample ordinals.
    dataset.check_consistency().map_err(|e| match e {
        DatasetError::DimensionMismatch { line, field, expected, found } => DatasetError::DimensionMismatch {
            line: lines[line - 1],
            field,
            expected,
            found,
        },
        DatasetError::DuplicateId { line, id } => DatasetError::DuplicateId { line: lines[line - 1], id },
        other => other,
    })?;
    Ok(dataset)
}

pub fn write_jsonl<W: Write>(dataset: &Dataset, mut writer: W) -> std::io::Result<()> {
    for s in dataset {
        serde_json::to_writer(&mut writer, s)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset, DatasetError> {
    let path = path.as_ref();
    let io_err = |source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    };
    let file = File::open(path).map_err(io_err)?;
    read_jsonl(BufReader::new(file))
}

pub fn save_dataset(dataset: &Dataset, path: impl AsRef<Path>) -> Result<(), DatasetError> {
    let path = path.as_ref();
    let io_err = |source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    };
    let file = File::create(path).map_err(io_err)?;
    write_jsonl(dataset, BufWriter::new(file)).map_err(io_err)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datamodel::fixtures::sample;

    fn three() -> Dataset {
        let mut b = sample("b");
        b.image_blocks[0][1] = std::f64::consts::PI / 7.0;
        b.noise_flag = None;
        let mut c = sample("c");
        c.sentic[1] = -0.123_456_789_012_345_67;
        c.aspects.clear();
        Dataset::new(vec![sample("a"), b, c])
    }

    #[test]
    fn save_then_load_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.jsonl");
        let d = three();
        save_dataset(&d, &path).unwrap();
        assert_eq!(load_dataset(&path).unwrap(), d);
    }

    #[test]
    fn empty_file_is_empty_dataset() {
        assert!(read_jsonl(&b""[..]).unwrap().is_empty());
    }

    #[test]
    fn polarity_is_numeric_and_noise_flag_optional() {
        let mut buf = Vec::new();
        let mut d = three();
        d.samples.truncate(2);
        write_jsonl(&d, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let first = text.lines().next().unwrap();
        assert!(first.contains(r#""aspects":[{"begin":1,"end":1,"polarity":0}]"#), "{first}");
        assert!(first.contains(r#""noise_flag":false"#));
        assert!(!text.lines().nth(1).unwrap().contains("noise_flag"));
    }

    #[test]
    fn mismatched_image_dims_name_both() {
        let mut d = three();
        for block in &mut d.samples[2].image_blocks {
            block.push(0.0);
        }
        let mut buf = Vec::new();
        write_jsonl(&d, &mut buf).unwrap();
        let err = read_jsonl(&buf[..]).unwrap_err().to_string();
        assert!(err.contains("line 3") && err.contains('4') && err.contains('3'), "{err}");
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let mut buf = Vec::new();
        write_jsonl(&three(), &mut buf).unwrap();
        buf.extend_from_slice(b"{\"id\": \"x\"}\n");
        let err = read_jsonl(&buf[..]).unwrap_err();
        assert!(matches!(err, DatasetError::Parse { line: 4, .. }), "{err}");
        assert!(err.to_string().contains("missing field"), "{err}");
    }

    #[test]
    fn duplicate_ids_are_rejected() {
        let d = Dataset::new(vec![sample("a"), sample("a")]);
        let mut buf = Vec::new();
        write_jsonl(&d, &mut buf).unwrap();
        assert!(matches!(read_jsonl(&buf[..]), Err(DatasetError::DuplicateId { line: 2, .. })));
    }
}
