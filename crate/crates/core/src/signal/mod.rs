//! From raw multichannel recordings to feature rows: segmentation,
//! per-band spectral power, and PCA reduction.

mod pca;
mod spectral;

pub use pca::{pca_fit, PcaModel};
pub use spectral::{band_power, periodogram, Band, BandSet, Periodogram, SpectralConfig, Window};

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Equal-length channels sampled at `rate` Hz.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    channels: Vec<Vec<f64>>,
    channel_names: Vec<String>,
    rate: f64,
}

impl Recording {
    pub fn new(channels: Vec<Vec<f64>>, channel_names: Vec<String>, rate: f64) -> Result<Self> {
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(Error::InvalidArgument(format!("sampling rate {rate} must be positive")));
        }
        if channels.is_empty() || channels.len() != channel_names.len() {
            return Err(Error::Dimension {
                expected: channel_names.len().max(1),
                found: channels.len(),
            });
        }
        let len = channels[0].len();
        if len < 2 {
            return Err(Error::InvalidArgument("recording needs at least 2 samples".into()));
        }
        if let Some(c) = channels.iter().find(|c| c.len() != len) {
            return Err(Error::Dimension {
                expected: len,
                found: c.len(),
            });
        }
        Ok(Self {
            channels,
            channel_names,
            rate,
        })
    }

    /// Reads a raw-signal CSV: one column per channel, header of channel names.
    pub fn read_csv<R: std::io::Read>(reader: R, rate: f64) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let names: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        let mut channels = vec![Vec::new(); names.len()];
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            if rec.len() != names.len() {
                return Err(Error::RaggedRow {
                    row: i + 1,
                    expected: names.len(),
                    found: rec.len(),
                });
            }
            for (j, tok) in rec.iter().enumerate() {
                let v: f64 = tok.parse().ok().filter(|v: &f64| v.is_finite()).ok_or_else(|| Error::BadValue {
                    row: i + 1,
                    column: names[j].clone(),
                    token: tok.to_string(),
                })?;
                channels[j].push(v);
            }
        }
        Self::new(channels, names, rate)
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.channel_names)?;
        for i in 0..self.len() {
            w.write_record(self.channels.iter().map(|c| c[i].to_string()))?;
        }
        w.flush().map_err(|source| Error::Io {
            path: "<csv output>".into(),
            source,
        })
    }

    pub fn channels(&self) -> &[Vec<f64>] {
        &self.channels
    }

    pub fn channel_names(&self) -> &[String] {
        &self.channel_names
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn len(&self) -> usize {
        self.channels[0].len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn duration(&self) -> f64 {
        self.len() as f64 / self.rate
    }
}

/// A window of a recording: sample range `[start, start + len)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub start: usize,
    pub len: usize,
    /// Start time in seconds.
    pub start_time: f64,
}

/// Overlapping windows; count is `floor((N - W) / H) + 1` in samples.
pub fn segment(rec: &Recording, window: f64, hop: f64) -> Result<Vec<Segment>> {
    segment_samples(rec.len(), rec.rate(), window, hop)
}

pub fn segment_samples(length: usize, rate: f64, window: f64, hop: f64) -> Result<Vec<Segment>> {
    let w = (window * rate).round() as usize;
    let h = (hop * rate).round() as usize;
    if !(window > 0.0) || w < 2 {
        return Err(Error::InvalidArgument(format!("window {window} s is shorter than 2 samples")));
    }
    if !(hop > 0.0) || h == 0 {
        return Err(Error::InvalidArgument(format!("hop {hop} s is shorter than 1 sample")));
    }
    if w > length {
        return Err(Error::WindowTooLong { window: w, length });
    }
    let count = (length - w) / h + 1;
    Ok((0..count)
        .map(|k| Segment {
            start: k * h,
            len: w,
            start_time: (k * h) as f64 / rate,
        })
        .collect())
}

/// One feature row per segment, columns `<channel>_<band>` (channel-major).
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    pub names: Vec<String>,
    pub segments: Vec<Segment>,
    pub rows: DMatrix<f64>,
}

impl FeatureTable {
    /// One header row of feature names, then one row per segment.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.names)?;
        for row in self.rows.row_iter() {
            w.write_record(row.iter().map(|v| v.to_string()))?;
        }
        w.flush().map_err(|source| Error::Io {
            path: "<csv output>".into(),
            source,
        })
    }
}

pub fn feature_names(channel_names: &[String], bands: &BandSet) -> Vec<String> {
    channel_names
        .iter()
        .flat_map(|c| bands.bands().iter().map(move |b| format!("{c}_{}", b.name)))
        .collect()
}

/// Band powers for every segment; rows ordered by segment start time.
pub fn extract_features(
    rec: &Recording,
    bands: &BandSet,
    window: f64,
    hop: f64,
    cfg: &SpectralConfig,
) -> Result<FeatureTable> {
    let segments = segment(rec, window, hop)?;
    bands.validate(rec.rate())?;
    let names = feature_names(rec.channel_names(), bands);
    let rows: Vec<Vec<f64>> = segments
        .par_iter()
        .map(|s| {
            let mut row = Vec::with_capacity(names.len());
            for ch in rec.channels() {
                let pg = periodogram(&ch[s.start..s.start + s.len], rec.rate(), cfg)?;
                for b in bands.bands() {
                    row.push(pg.band_power(b)?);
                }
            }
            Ok(row)
        })
        .collect::<Result<_>>()?;
    let m = names.len();
    Ok(FeatureTable {
        names,
        rows: DMatrix::from_fn(segments.len(), m, |i, j| rows[i][j]),
        segments,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(len: usize, rate: f64) -> Recording {
        Recording::new(vec![vec![0.0; len]], vec!["C3".into()], rate).unwrap()
    }

    #[test]
    fn segment_counts() {
        assert_eq!(segment(&rec(1024, 128.0), 0.5, 0.25).unwrap().len(), 31);
        assert_eq!(segment(&rec(512, 128.0), 0.5, 0.5).unwrap().len(), 8);
        let one = segment(&rec(1024, 128.0), 8.0, 0.25).unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(one[0].start, 0);
        let s = segment(&rec(1024, 128.0), 0.5, 0.25).unwrap();
        assert_eq!(s[1].start_time, 0.25);
    }

    #[test]
    fn window_longer_than_recording() {
        assert!(matches!(segment(&rec(100, 128.0), 1.0, 0.5), Err(Error::WindowTooLong { .. })));
    }

    #[test]
    fn recording_invariants() {
        assert!(Recording::new(vec![vec![0.0; 4], vec![0.0; 3]], vec!["a".into(), "b".into()], 10.0).is_err());
        assert!(Recording::new(vec![vec![0.0; 4]], vec!["a".into()], 0.0).is_err());
        assert!(Recording::new(vec![vec![0.0; 1]], vec!["a".into()], 1.0).is_err());
    }

    #[test]
    fn feature_columns_are_channel_major() {
        let r = Recording::new(vec![vec![1.0; 128], vec![0.0; 128]], vec!["C3".into(), "C4".into()], 128.0).unwrap();
        let t = extract_features(&r, &BandSet::alzheimer4(), 0.5, 0.25, &SpectralConfig::default()).unwrap();
        assert_eq!(t.names[0], "C3_delta");
        assert_eq!(t.names[4], "C4_delta");
        assert_eq!(t.rows.ncols(), 8);
        assert_eq!(t.rows.nrows(), 3);
        assert!(t.rows[(0, 0)] > 0.0);
        assert_eq!(t.rows[(0, 4)], 0.0);
    }

    #[test]
    fn raw_csv_round_trip() {
        let r = Recording::new(vec![vec![0.5, -1.0, 2.0], vec![1.0, 2.0, 3.0]], vec!["a".into(), "b".into()], 10.0).unwrap();
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        assert_eq!(Recording::read_csv(buf.as_slice(), 10.0).unwrap(), r);
    }
}
