use std::io::{Read, Write};
use std::path::Path;

use super::{ClickRecord, Histogram};
use crate::error::{Error, Result};

pub const CLICK_HEADER: [&str; 2] = ["detector_id", "timestamp_s"];
pub const HISTOGRAM_HEADER: [&str; 2] = ["delay_s", "count"];

pub fn write_clicks<W: Write>(clicks: &[ClickRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CLICK_HEADER)?;
    for c in clicks {
        w.write_record([c.detector_id.to_string(), format!("{:e}", c.timestamp)])?;
    }
    w.flush()?;
    Ok(())
}

fn check_header<R: Read>(r: &mut csv::Reader<R>, expected: [&str; 2]) -> Result<()> {
    let header = r.headers()?;
    if header.iter().map(str::trim).ne(expected) {
        return Err(Error::Config(format!(
            "expected header {}, found {}",
            expected.join(","),
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    Ok(())
}

/// Reads a click file; rows must be sorted by timestamp.
pub fn read_clicks<R: Read>(input: R) -> Result<Vec<ClickRecord>> {
    let mut r = csv::Reader::from_reader(input);
    check_header(&mut r, CLICK_HEADER)?;
    let mut clicks = Vec::new();
    for row in r.deserialize::<(u32, f64)>() {
        let (detector_id, timestamp) = row?;
        if clicks
            .last()
            .is_some_and(|c: &ClickRecord| c.timestamp > timestamp)
        {
            return Err(Error::Config(format!("timestamp {timestamp} out of order")));
        }
        clicks.push(ClickRecord {
            detector_id,
            timestamp,
        });
    }
    Ok(clicks)
}

pub fn write_clicks_path(clicks: &[ClickRecord], path: impl AsRef<Path>) -> Result<()> {
    write_clicks(
        clicks,
        std::io::BufWriter::new(std::fs::File::create(path)?),
    )
}

pub fn read_clicks_path(path: impl AsRef<Path>) -> Result<Vec<ClickRecord>> {
    read_clicks(std::io::BufReader::new(std::fs::File::open(path)?))
}

/// Writes bin centers and counts.
pub fn write_histogram<W: Write>(hist: &Histogram, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HISTOGRAM_HEADER)?;
    for (x, c) in hist.centers().iter().zip(&hist.counts) {
        w.write_record([format!("{x:e}"), c.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a histogram written by [`write_histogram`]; bins must be uniform.
pub fn read_histogram<R: Read>(input: R) -> Result<Histogram> {
    let mut r = csv::Reader::from_reader(input);
    check_header(&mut r, HISTOGRAM_HEADER)?;
    let rows = r
        .deserialize::<(f64, f64)>()
        .collect::<std::result::Result<Vec<_>, _>>()?;
    if rows.is_empty() {
        return Err(Error::EmptyInput("histogram file has no rows"));
    }
    let bin_width = 2.0 * rows[0].0;
    for (i, (x, _)) in rows.iter().enumerate() {
        let expect = (i as f64 + 0.5) * bin_width;
        if (x - expect).abs() > 1e-6 * bin_width {
            return Err(Error::Config(format!(
                "row {i}: delay {x} is not a uniform bin center"
            )));
        }
    }
    Ok(Histogram {
        bin_width,
        counts: rows.into_iter().map(|r| r.1).collect(),
    })
}
