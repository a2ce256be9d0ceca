//! CSV formats.
//!
//! Logit files: `logit_0..logit_{K−1}[,label][,feat_0..feat_{d−1}]`.
//! Bounds files: `a_0..a_{K−1},b_0..b_{K−1}`.
//! Numbers are written with 17 significant digits.

use std::fs::File;
use std::io::{self, Read, Write};
use std::path::Path;

use bcsoftmax::calib::LabeledLogitSet;

use crate::error::{CliError, CliResult};

/// Rows of a logit file; `labels` and `features` only when the columns exist.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LogitTable {
    pub logits: Vec<Vec<f64>>,
    pub labels: Option<Vec<usize>>,
    pub features: Option<Vec<Vec<f64>>>,
}

impl LogitTable {
    pub fn len(&self) -> usize {
        self.logits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.logits.is_empty()
    }

    pub fn into_dataset(self) -> CliResult<LabeledLogitSet> {
        let labels = self
            .labels
            .ok_or_else(|| CliError::Data("logit file has no label column".into()))?;
        Ok(LabeledLogitSet::new(self.logits, labels, self.features)?)
    }
}

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn open(path: &Path) -> CliResult<Box<dyn Read>> {
    if path.as_os_str() == "-" {
        return Ok(Box::new(io::stdin()));
    }
    File::open(path)
        .map(|f| Box::new(f) as Box<dyn Read>)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

/// Columns named `{prefix}0, {prefix}1, …` starting at `start`, in order.
fn numbered(headers: &[String], start: usize, prefix: &str) -> usize {
    headers[start..]
        .iter()
        .enumerate()
        .take_while(|(j, h)| **h == format!("{prefix}{j}"))
        .count()
}

fn parse_f64(field: &str, row: usize, col: &str) -> CliResult<f64> {
    let v: f64 = field
        .trim()
        .parse()
        .map_err(|_| CliError::Data(format!("row {row}, column {col}: cannot parse '{field}'")))?;
    if !v.is_finite() {
        return Err(CliError::Data(format!(
            "row {row}, column {col}: non-finite value"
        )));
    }
    Ok(v)
}

pub fn read_logits(path: &Path) -> CliResult<LogitTable> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(open(path)?);
    let headers: Vec<String> = reader
        .headers()?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if headers.is_empty() || headers.iter().all(|h| h.is_empty()) {
        return Ok(LogitTable::default());
    }
    let k = numbered(&headers, 0, "logit_");
    if k == 0 {
        return Err(CliError::Data(format!(
            "{}: header must start with logit_0",
            path.display()
        )));
    }
    let has_label = headers.get(k).is_some_and(|h| h == "label");
    let feat_start = k + usize::from(has_label);
    let d = numbered(&headers, feat_start, "feat_");
    if feat_start + d != headers.len() {
        return Err(CliError::Data(format!(
            "{}: unexpected column '{}'",
            path.display(),
            headers[feat_start + d]
        )));
    }

    let mut table = LogitTable {
        logits: vec![],
        labels: has_label.then(Vec::new),
        features: (d > 0).then(Vec::new),
    };
    for (n, record) in reader.records().enumerate() {
        let record = record?;
        if record.len() != headers.len() {
            return Err(CliError::Data(format!(
                "row {n}: expected {} fields, got {}",
                headers.len(),
                record.len()
            )));
        }
        let logits = (0..k)
            .map(|j| parse_f64(&record[j], n, &headers[j]))
            .collect::<CliResult<Vec<_>>>()?;
        table.logits.push(logits);
        if let Some(labels) = &mut table.labels {
            let label = record[k].trim().parse::<usize>().map_err(|_| {
                CliError::Data(format!(
                    "row {n}: label '{}' is not a class index",
                    &record[k]
                ))
            })?;
            labels.push(label);
        }
        if let Some(features) = &mut table.features {
            let row = (feat_start..feat_start + d)
                .map(|j| parse_f64(&record[j], n, &headers[j]))
                .collect::<CliResult<Vec<_>>>()?;
            features.push(row);
        }
    }
    Ok(table)
}

/// One `(a, b)` pair per row.
pub fn read_bounds(path: &Path) -> CliResult<Vec<(Vec<f64>, Vec<f64>)>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(open(path)?);
    let headers: Vec<String> = reader
        .headers()?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let k = numbered(&headers, 0, "a_");
    if k == 0 || numbered(&headers, k, "b_") != k || headers.len() != 2 * k {
        return Err(CliError::Data(format!(
            "{}: bounds header must be a_0..a_{{K-1}},b_0..b_{{K-1}}",
            path.display()
        )));
    }
    let mut rows = vec![];
    for (n, record) in reader.records().enumerate() {
        let record = record?;
        if record.len() != 2 * k {
            return Err(CliError::Data(format!(
                "bounds row {n}: expected {} fields, got {}",
                2 * k,
                record.len()
            )));
        }
        let values = (0..2 * k)
            .map(|j| parse_f64(&record[j], n, &headers[j]))
            .collect::<CliResult<Vec<_>>>()?;
        let (a, b) = values.split_at(k);
        rows.push((a.to_vec(), b.to_vec()));
    }
    Ok(rows)
}

pub fn write_probs<W: Write>(out: W, rows: &[Vec<f64>]) -> CliResult<()> {
    if rows.is_empty() {
        return Ok(());
    }
    let mut w = csv::Writer::from_writer(out);
    let k = rows[0].len();
    w.write_record((0..k).map(|i| format!("p_{i}")))?;
    for row in rows {
        w.write_record(row.iter().map(|&v| fmt_f64(v)))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_dataset<W: Write>(out: W, data: &LabeledLogitSet) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(out);
    let k = data.num_classes();
    let d = data.feature_dim().unwrap_or(0);
    let header = (0..k)
        .map(|i| format!("logit_{i}"))
        .chain(std::iter::once("label".to_string()))
        .chain((0..d).map(|j| format!("feat_{j}")));
    w.write_record(header)?;
    for n in 0..data.len() {
        let mut record: Vec<String> = data.logits(n).iter().map(|&v| fmt_f64(v)).collect();
        record.push(data.label(n).to_string());
        if let Some(z) = data.features(n) {
            record.extend(z.iter().map(|&v| fmt_f64(v)));
        }
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

/// `path` or stdout for `-`.
pub fn create(path: &Path) -> CliResult<Box<dyn Write>> {
    if path.as_os_str() == "-" {
        return Ok(Box::new(io::stdout()));
    }
    File::create(path)
        .map(|f| Box::new(io::BufWriter::new(f)) as Box<dyn Write>)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn temp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn reads_all_column_groups() {
        let f = temp("logit_0,logit_1,label,feat_0\n0.5,-1,1,3\n2,0,0,4\n");
        let t = read_logits(f.path()).unwrap();
        assert_eq!(t.logits, vec![vec![0.5, -1.0], vec![2.0, 0.0]]);
        assert_eq!(t.labels, Some(vec![1, 0]));
        assert_eq!(t.features, Some(vec![vec![3.0], vec![4.0]]));
    }

    #[test]
    fn label_and_features_are_optional() {
        let f = temp("logit_0,logit_1,logit_2\n1,2,3\n");
        let t = read_logits(f.path()).unwrap();
        assert_eq!(t.labels, None);
        assert_eq!(t.features, None);
        assert!(t.into_dataset().is_err());
    }

    #[test]
    fn empty_file_is_empty_table() {
        let f = temp("");
        assert!(read_logits(f.path()).unwrap().is_empty());
        let f = temp("logit_0,logit_1\n");
        assert!(read_logits(f.path()).unwrap().is_empty());
    }

    #[test]
    fn bad_rows_name_their_position() {
        let f = temp("logit_0,logit_1\n1,2\n3,x\n");
        let err = read_logits(f.path()).unwrap_err().to_string();
        assert!(err.contains("row 1") && err.contains("logit_1"), "{err}");
        let f = temp("logit_0,label\n1,-1\n");
        assert!(read_logits(f.path()).is_err());
        let f = temp("logit_1,logit_0\n1,2\n");
        assert!(read_logits(f.path()).is_err());
        let f = temp("logit_0,extra\n1,2\n");
        assert!(read_logits(f.path()).is_err());
    }

    #[test]
    fn bounds_header_is_checked() {
        let f = temp("a_0,a_1,b_0,b_1\n0,0.1,1,0.9\n");
        assert_eq!(
            read_bounds(f.path()).unwrap(),
            vec![(vec![0.0, 0.1], vec![1.0, 0.9])]
        );
        let f = temp("a_0,b_0,b_1\n0,1,1\n");
        assert!(read_bounds(f.path()).is_err());
    }

    #[test]
    fn values_round_trip() {
        let v = 0.1f64 + 0.2;
        assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
        let mut buf = vec![];
        write_probs(&mut buf, &[vec![0.25, 0.75]]).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "p_0,p_1\n2.5000000000000000e-1,7.5000000000000000e-1\n"
        );
    }
}
