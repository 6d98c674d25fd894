//! File formats: grouped observations as CSV with header
//! `group_id,x0,...,x{d-1}`, everything else as JSON.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::measures::{GroupedDataset, Point};

pub fn write_grouped_csv<W: Write>(data: &GroupedDataset, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["group_id".to_string()];
    header.extend((0..data.dim()).map(|c| format!("x{c}")));
    w.write_record(&header)?;
    for (j, group) in data.groups().iter().enumerate() {
        for p in group {
            let mut rec = vec![j.to_string()];
            rec.extend(p.0.iter().map(|x| x.to_string()));
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Groups come back ordered by ascending id; points keep file order.
pub fn read_grouped_csv<R: Read>(reader: R) -> Result<GroupedDataset> {
    let mut r = csv::Reader::from_reader(reader);
    let header = r.headers()?.clone();
    if header.get(0) != Some("group_id") || header.len() < 2 {
        return Err(Error::Data("expected header group_id,x0,...".into()));
    }
    for (c, name) in header.iter().skip(1).enumerate() {
        if name != format!("x{c}") {
            return Err(Error::Data(format!("unexpected column '{name}', expected x{c}")));
        }
    }
    let dim = header.len() - 1;
    let mut groups: BTreeMap<u64, Vec<Point>> = BTreeMap::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let row = line + 2;
        let id: u64 = rec[0]
            .trim()
            .parse()
            .map_err(|_| Error::Data(format!("row {row}: bad group id '{}'", &rec[0])))?;
        let coords = rec
            .iter()
            .skip(1)
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Data(format!("row {row}: bad coordinate '{s}'")))
            })
            .collect::<Result<Vec<f64>>>()?;
        if coords.len() != dim {
            return Err(Error::Data(format!("row {row}: {} coordinates, expected {dim}", coords.len())));
        }
        let p = Point::new(coords).map_err(|e| Error::Data(format!("row {row}: {e}")))?;
        groups.entry(id).or_default().push(p);
    }
    if groups.is_empty() {
        return Err(Error::Data("no observations".into()));
    }
    GroupedDataset::new(groups.into_values().collect())
}

pub fn save_grouped_csv(data: &GroupedDataset, path: impl AsRef<Path>) -> Result<()> {
    write_grouped_csv(data, BufWriter::new(File::create(path)?))
}

pub fn load_grouped_csv(path: impl AsRef<Path>) -> Result<GroupedDataset> {
    read_grouped_csv(BufReader::new(File::open(path)?))
}

pub fn save_json<T: Serialize>(value: &T, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn load_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_is_exact() {
        let data = GroupedDataset::new(vec![
            vec![Point(vec![0.1, -2.5e-17]), Point(vec![1.0 / 3.0, 7.0])],
            vec![Point(vec![f64::MAX, f64::MIN_POSITIVE])],
        ])
        .unwrap();
        let mut buf = Vec::new();
        write_grouped_csv(&data, &mut buf).unwrap();
        assert!(String::from_utf8(buf.clone()).unwrap().starts_with("group_id,x0,x1\n0,"));
        let back = read_grouped_csv(buf.as_slice()).unwrap();
        assert_eq!(back, data);
    }

    #[test]
    fn groups_sorted_by_id() {
        let text = "group_id,x0\n7,1.5\n2,0\n7,2\n";
        let data = read_grouped_csv(text.as_bytes()).unwrap();
        assert_eq!(data.group(0), &[Point(vec![0.0])]);
        assert_eq!(data.group(1), &[Point(vec![1.5]), Point(vec![2.0])]);
    }

    #[test]
    fn malformed_inputs() {
        for text in [
            "id,x0\n0,1\n",
            "group_id,x1\n0,1\n",
            "group_id,x0\n-1,1\n",
            "group_id,x0\n0,abc\n",
            "group_id,x0\n0,NaN\n",
            "group_id,x0\n",
            "group_id,x0,x1\n0,1\n",
        ] {
            assert!(read_grouped_csv(text.as_bytes()).is_err(), "{text}");
        }
    }
}
