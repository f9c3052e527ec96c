use std::collections::BTreeMap;
use std::path::Path;

use crate::data::{test_count, ClientDataset};
use crate::error::{Error, Result};
use crate::numerics::Samples;

fn parse_err(path: &Path, line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

/// Read a `client_id,label,f0..f{d-1}` table into per-client datasets.
///
/// Rows keep file order within a client; the last `max(1, n/5)` rows of
/// each client form its test split.
pub fn ingest_feature_table(path: impl AsRef<Path>) -> Result<Vec<ClientDataset>> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => parse_err(path, 0, format!("{other:?}")),
        })?;

    let mut records = reader.records();
    let header = match records.next() {
        None => return Err(parse_err(path, 1, "empty file: missing header")),
        Some(r) => r.map_err(|e| parse_err(path, 1, e.to_string()))?,
    };
    let cols: Vec<&str> = header.iter().map(str::trim).collect();
    if cols.len() < 3 || cols[0] != "client_id" || cols[1] != "label" {
        return Err(parse_err(
            path,
            1,
            "header must start with client_id,label,f0",
        ));
    }
    let dim = cols.len() - 2;
    for (j, name) in cols[2..].iter().enumerate() {
        if *name != format!("f{j}") {
            return Err(parse_err(
                path,
                1,
                format!("unknown header column {name:?}, expected f{j}"),
            ));
        }
    }

    let mut rows: BTreeMap<usize, (Vec<f64>, Vec<usize>)> = BTreeMap::new();
    let mut line: u64 = 1;
    for record in records {
        line += 1;
        let record = record.map_err(|e| parse_err(path, line, e.to_string()))?;
        if record.len() != dim + 2 {
            return Err(parse_err(
                path,
                line,
                format!("expected {} fields, found {}", dim + 2, record.len()),
            ));
        }
        let client: usize = record[0].trim().parse().map_err(|_| {
            parse_err(
                path,
                line,
                format!("client_id {:?} is not an integer", &record[0]),
            )
        })?;
        let label: usize = record[1].trim().parse().map_err(|_| {
            parse_err(
                path,
                line,
                format!("label {:?} is not an integer", &record[1]),
            )
        })?;
        let entry = rows.entry(client).or_default();
        for (j, field) in record.iter().skip(2).enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| {
                parse_err(
                    path,
                    line,
                    format!("feature f{j} = {field:?} is not numeric"),
                )
            })?;
            if !v.is_finite() {
                return Err(parse_err(path, line, format!("feature f{j} is not finite")));
            }
            entry.0.push(v);
        }
        entry.1.push(label);
    }
    if rows.is_empty() {
        return Err(parse_err(path, line, "no data rows"));
    }

    rows.into_iter()
        .map(|(client_id, (features, labels))| {
            let n = labels.len();
            if n < 2 {
                return Err(Error::config(format!(
                    "client {client_id} has {n} row(s); at least 2 are needed for a train/test split"
                )));
            }
            let n_train = n - test_count(n);
            let all = Samples::new(dim, features, labels)?;
            let train_rows: Vec<usize> = (0..n_train).collect();
            let test_rows: Vec<usize> = (n_train..n).collect();
            Ok(ClientDataset {
                client_id,
                vehicle_id: 0,
                train: all.select(&train_rows),
                test: all.select(&test_rows),
            })
        })
        .collect()
}

/// Write datasets in the ingestion format, train rows before test rows per
/// client, so re-ingesting reproduces each local split.
pub fn write_feature_table(path: impl AsRef<Path>, clients: &[ClientDataset]) -> Result<()> {
    let path = path.as_ref();
    let dim = clients.first().map_or(0, |c| c.train.dim());
    let mut w = csv::Writer::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Evaluation(format!("{other:?}")),
    })?;
    let mut header = vec!["client_id".to_string(), "label".to_string()];
    header.extend((0..dim).map(|j| format!("f{j}")));
    w.write_record(&header)?;
    for c in clients {
        for part in [&c.train, &c.test] {
            for i in 0..part.len() {
                let mut rec = vec![c.client_id.to_string(), part.label(i).to_string()];
                rec.extend(part.row(i).iter().map(|v| format!("{v:?}")));
                w.write_record(&rec)?;
            }
        }
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}
