//! Waveform CSV files: a `time` column followed by one column per channel.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use eprony_core::{Channel, Signal};

/// Largest allowed deviation of a time step from the mean step, relative.
pub const MAX_JITTER: f64 = 1e-6;

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("non-uniform sampling at row {row}: relative jitter {jitter:e}")]
    NonUniformSampling { row: usize, jitter: f64 },
    #[error("time is not increasing at row {row}")]
    NonMonotoneTime { row: usize },
    #[error("file holds {rows} data rows; at least two are needed")]
    EmptyFile { rows: usize },
    #[error("row {row}, column {column}: {message}")]
    BadValue {
        row: usize,
        column: usize,
        message: String,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Signal(#[from] eprony_core::Error),
}

/// Reads a waveform file into a uniformly sampled signal.
pub fn load_waveforms(path: &Path) -> Result<Signal, IngestError> {
    let file = File::open(path)?;
    read_waveforms(file)
}

pub fn read_waveforms<R: io::Read>(reader: R) -> Result<Signal, IngestError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.get(0) != Some("time") {
        return Err(IngestError::MalformedHeader(
            "first column must be named `time`".into(),
        ));
    }
    if header.len() < 2 {
        return Err(IngestError::MalformedHeader("no channel columns".into()));
    }
    let names: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    for (i, name) in names.iter().enumerate() {
        if name.is_empty() || names[..i].contains(name) {
            return Err(IngestError::MalformedHeader(format!(
                "channel name `{name}` is empty or repeated"
            )));
        }
    }

    let mut times = Vec::new();
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); names.len()];
    for (r, record) in rdr.records().enumerate() {
        let record = record?;
        let row = r + 2;
        if record.len() != header.len() {
            return Err(IngestError::BadValue {
                row,
                column: record.len(),
                message: format!("expected {} fields", header.len()),
            });
        }
        for (c, field) in record.iter().enumerate() {
            let value: f64 = field.parse().map_err(|e| IngestError::BadValue {
                row,
                column: c + 1,
                message: format!("`{field}`: {e}"),
            })?;
            if !value.is_finite() {
                return Err(IngestError::BadValue {
                    row,
                    column: c + 1,
                    message: "value is not finite".into(),
                });
            }
            if c == 0 {
                times.push(value);
            } else {
                columns[c - 1].push(value);
            }
        }
    }
    let n = times.len();
    if n < 2 {
        return Err(IngestError::EmptyFile { rows: n });
    }
    for k in 1..n {
        if times[k] <= times[k - 1] {
            return Err(IngestError::NonMonotoneTime { row: k + 2 });
        }
    }
    let dt = (times[n - 1] - times[0]) / (n - 1) as f64;
    for k in 1..n {
        let jitter = ((times[k] - times[k - 1]) - dt).abs() / dt;
        if jitter > MAX_JITTER {
            return Err(IngestError::NonUniformSampling { row: k + 2, jitter });
        }
    }
    let channels = names
        .into_iter()
        .zip(columns)
        .map(|(name, samples)| Channel::new(name, samples))
        .collect();
    Ok(Signal::new(times[0], dt, channels)?)
}

/// Writes `time,<names...>` rows; `columns[c][k]` is channel `c` at `times[k]`.
pub fn write_columns<W: Write>(
    out: W,
    names: &[&str],
    times: &[f64],
    columns: &[Vec<f64>],
) -> io::Result<()> {
    let mut w = BufWriter::new(out);
    write!(w, "time")?;
    for name in names {
        write!(w, ",{name}")?;
    }
    writeln!(w)?;
    for (k, t) in times.iter().enumerate() {
        write!(w, "{t}")?;
        for col in columns {
            write!(w, ",{}", col[k])?;
        }
        writeln!(w)?;
    }
    w.flush()
}

pub fn write_signal(path: &Path, signal: &Signal) -> io::Result<()> {
    let names: Vec<&str> = signal.channel_names().collect();
    let columns: Vec<Vec<f64>> = signal
        .channels()
        .iter()
        .map(|c| c.samples.clone())
        .collect();
    write_columns(File::create(path)?, &names, &signal.times(), &columns)
}
