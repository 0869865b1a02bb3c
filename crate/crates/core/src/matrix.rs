//! Feature-matrix files: CSV with a version line and `# key=value`
//! comment lines carrying the producing configuration.
//!
//! ```text
//! # expertise-matrix v1
//! # corpus=synthetic-lego
//! session_id,label,barge_in_count,...
//! s1,novice,3,...
//! ```
//!
//! Missing values are written as `?`. Numbers use the shortest decimal
//! that reads back to the same `f64`.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use crate::corpus::Label;
use crate::error::{Error, Result};
use crate::features::{FeatureId, FeatureVector};
use crate::prep::Dataset;

pub const MATRIX_HEADER: &str = "# expertise-matrix v1";
pub const MISSING: &str = "?";

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub feature_names: Vec<String>,
    pub ids: Vec<String>,
    pub labels: Vec<Label>,
    pub rows: Vec<Vec<Option<f64>>>,
    pub comments: BTreeMap<String, String>,
}

impl FeatureMatrix {
    pub fn from_vectors(vectors: &[FeatureVector], features: &[FeatureId]) -> FeatureMatrix {
        FeatureMatrix {
            feature_names: features.iter().map(|f| f.name().to_string()).collect(),
            ids: vectors.iter().map(|v| v.session_id.clone()).collect(),
            labels: vectors.iter().map(|v| v.label).collect(),
            rows: vectors
                .iter()
                .map(|v| features.iter().map(|f| v.get(*f)).collect())
                .collect(),
            comments: BTreeMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Labeled dataset; any unlabeled row is an error.
    pub fn to_dataset(&self) -> Result<Dataset> {
        let labels = self
            .labels
            .iter()
            .zip(&self.ids)
            .map(|(l, id)| {
                l.class()
                    .ok_or_else(|| Error::invalid(format!("row `{id}` is unlabeled")))
            })
            .collect::<Result<Vec<_>>>()?;
        Dataset::new(
            self.feature_names.clone(),
            self.rows.clone(),
            labels,
            self.ids.clone(),
        )
    }

    /// Rows as feature vectors keyed by feature id.
    pub fn to_vectors(&self) -> Result<Vec<FeatureVector>> {
        let ids: Vec<FeatureId> = self
            .feature_names
            .iter()
            .map(|n| n.parse())
            .collect::<Result<_>>()?;
        Ok(self
            .rows
            .iter()
            .zip(&self.ids)
            .zip(&self.labels)
            .map(|((row, id), label)| {
                let mut v = FeatureVector::new(id.clone(), *label);
                for (f, x) in ids.iter().zip(row) {
                    v.set(*f, *x);
                }
                v
            })
            .collect())
    }

    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{MATRIX_HEADER}")?;
        for (k, v) in &self.comments {
            writeln!(out, "# {k}={}", v.replace('\n', " "))?;
        }
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["session_id".to_string(), "label".to_string()];
        header.extend(self.feature_names.iter().cloned());
        w.write_record(&header)?;
        for ((id, label), row) in self.ids.iter().zip(&self.labels).zip(&self.rows) {
            let mut rec = vec![id.clone(), label.as_str().to_string()];
            rec.extend(row.iter().map(|v| match v {
                Some(x) => x.to_string(),
                None => MISSING.to_string(),
            }));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read<R: BufRead>(reader: R) -> Result<FeatureMatrix> {
        let mut comments = BTreeMap::new();
        let mut body = String::new();
        let mut seen_header = false;
        let mut in_preamble = true;
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if in_preamble && line.starts_with('#') {
                if i == 0 {
                    if line.trim() != MATRIX_HEADER {
                        return Err(Error::Header(format!(
                            "expected `{MATRIX_HEADER}`, found `{}`",
                            line.trim()
                        )));
                    }
                    seen_header = true;
                } else if let Some((k, v)) = line.trim_start_matches('#').trim().split_once('=') {
                    comments.insert(k.trim().to_string(), v.trim().to_string());
                }
                continue;
            }
            in_preamble = false;
            body.push_str(&line);
            body.push('\n');
        }
        if !seen_header {
            return Err(Error::Header(format!("missing `{MATRIX_HEADER}` line")));
        }
        let mut r = csv::Reader::from_reader(body.as_bytes());
        let header = r.headers()?.clone();
        if header.len() < 2 || &header[0] != "session_id" || &header[1] != "label" {
            return Err(Error::Header(
                "columns must start with session_id,label".into(),
            ));
        }
        let feature_names: Vec<String> = header.iter().skip(2).map(str::to_string).collect();
        let mut m = FeatureMatrix {
            feature_names,
            ids: Vec::new(),
            labels: Vec::new(),
            rows: Vec::new(),
            comments,
        };
        for (i, rec) in r.records().enumerate() {
            let rec = rec?;
            let line = i + 2;
            if rec.len() != header.len() {
                return Err(Error::Parse {
                    line,
                    column: 0,
                    message: format!("expected {} fields, found {}", header.len(), rec.len()),
                });
            }
            m.ids.push(rec[0].to_string());
            m.labels.push(rec[1].parse()?);
            let row = rec
                .iter()
                .skip(2)
                .enumerate()
                .map(|(j, cell)| {
                    if cell == MISSING || cell.is_empty() {
                        return Ok(None);
                    }
                    cell.parse::<f64>().map(Some).map_err(|_| Error::Parse {
                        line,
                        column: j + 3,
                        message: format!("`{cell}` is not a number"),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            m.rows.push(row);
        }
        Ok(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn write_read_round_trip() {
        let mut v = FeatureVector::new("s1", Label::Novice);
        v.set(FeatureId::BargeInRate, Some(0.1 + 0.2));
        v.set(FeatureId::FirstTurnPositiveDelay, None);
        let mut u = FeatureVector::new("s2", Label::Unlabeled);
        u.set(FeatureId::BargeInRate, Some(-1e-300));
        u.set(FeatureId::FirstTurnPositiveDelay, Some(2.5));
        let feats = [FeatureId::BargeInRate, FeatureId::FirstTurnPositiveDelay];
        let mut m = FeatureMatrix::from_vectors(&[v, u], &feats);
        m.comments.insert("corpus".into(), "x".into());
        let mut buf = Vec::new();
        m.write(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(MATRIX_HEADER));
        assert!(text.contains("s1,novice,0.30000000000000004,?"));
        let back = FeatureMatrix::read(buf.as_slice()).unwrap();
        assert_eq!(back, m);
        assert!(back.to_dataset().is_err());
        assert_eq!(
            back.to_vectors().unwrap()[1].get(FeatureId::FirstTurnPositiveDelay),
            Some(2.5)
        );
    }

    #[test]
    fn header_and_cells_are_checked() {
        assert!(matches!(
            FeatureMatrix::read("a,b\n".as_bytes()),
            Err(Error::Header(_))
        ));
        let bad = format!("{MATRIX_HEADER}\nsession_id,label,x\ns1,novice,abc\n");
        match FeatureMatrix::read(bad.as_bytes()) {
            Err(Error::Parse { line, column, .. }) => assert_eq!((line, column), (2, 3)),
            other => panic!("{other:?}"),
        }
    }
}
