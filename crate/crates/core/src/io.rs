//! Image, audio and table files.

use std::fmt::Write as _;
use std::path::Path;

use image::{GrayImage, ImageBuffer, Luma};

use crate::error::{Error, Result};
use crate::spectrum::empirical::Samples;

/// Loads an image as grayscale intensities in `[0, 1]`, shape `[rows, cols]`.
/// Color images are converted by luma.
pub fn read_image(path: impl AsRef<Path>) -> Result<Samples> {
    let path = path.as_ref();
    let img = image::open(path)
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?
        .to_luma8();
    let (w, h) = img.dimensions();
    let values = img.pixels().map(|p| p.0[0] as f64 / 255.0).collect();
    Samples::new(vec![h as usize, w as usize], values)
}

fn to_gray(samples: &Samples, range: Option<(f64, f64)>) -> Result<GrayImage> {
    let [rows, cols] = samples.shape[..] else {
        return Err(Error::Shape(format!("image output needs a 2D grid, got {:?}", samples.shape)));
    };
    let (lo, hi) = range.unwrap_or_else(|| {
        samples
            .values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)))
    });
    let span = if hi > lo { hi - lo } else { 1.0 };
    let data = samples
        .values
        .iter()
        .map(|v| (((v - lo) / span).clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect();
    ImageBuffer::<Luma<u8>, Vec<u8>>::from_raw(cols as u32, rows as u32, data)
        .ok_or_else(|| Error::Shape("image buffer size mismatch".into()))
}

/// Writes intensities in `[0, 1]` as an 8-bit PNG (values are clamped).
pub fn write_png(samples: &Samples, path: impl AsRef<Path>) -> Result<()> {
    save_png(&to_gray(samples, Some((0.0, 1.0)))?, path.as_ref())
}

/// Writes a heatmap scaled so the smallest value is black and the largest white.
pub fn write_heatmap_png(samples: &Samples, path: impl AsRef<Path>) -> Result<()> {
    save_png(&to_gray(samples, None)?, path.as_ref())
}

fn save_png(img: &GrayImage, path: &Path) -> Result<()> {
    img.save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

/// Binary PGM (P5) with intensities in `[0, 1]`.
pub fn write_pgm(samples: &Samples, path: impl AsRef<Path>) -> Result<()> {
    let img = to_gray(samples, Some((0.0, 1.0)))?;
    let mut bytes = format!("P5\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    bytes.extend_from_slice(img.as_raw());
    std::fs::write(path, bytes)?;
    Ok(())
}

/// Reads the first channel of a WAV file, scaled to `[-1, 1]`.
pub fn read_wav(path: impl AsRef<Path>) -> Result<Samples> {
    let mut reader = hound::WavReader::open(path).map_err(wav_error)?;
    let spec = reader.spec();
    let channels = spec.channels as usize;
    let values: Vec<f64> = match spec.sample_format {
        hound::SampleFormat::Int => {
            let scale = (1i64 << (spec.bits_per_sample - 1)) as f64;
            reader
                .samples::<i32>()
                .step_by(channels)
                .map(|s| s.map(|v| v as f64 / scale))
                .collect::<std::result::Result<_, _>>()
                .map_err(wav_error)?
        }
        hound::SampleFormat::Float => reader
            .samples::<f32>()
            .step_by(channels)
            .map(|s| s.map(f64::from))
            .collect::<std::result::Result<_, _>>()
            .map_err(wav_error)?,
    };
    Samples::new(vec![values.len()], values)
}

/// Writes a mono 16-bit WAV using the same `1/32768` scale as [`read_wav`];
/// values outside the representable range are clamped.
pub fn write_wav(samples: &Samples, sample_rate: u32, path: impl AsRef<Path>) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut writer = hound::WavWriter::create(path, spec).map_err(wav_error)?;
    for v in &samples.values {
        writer
            .write_sample((v * 32768.0).round().clamp(-32768.0, 32767.0) as i16)
            .map_err(wav_error)?;
    }
    writer.finalize().map_err(wav_error)
}

fn wav_error(e: hound::Error) -> Error {
    match e {
        hound::Error::IoError(io) => Error::Io(io),
        other => Error::Format(other.to_string()),
    }
}

/// Comma-separated table with a header row. Floats use the shortest
/// representation that parses back to the same value.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) -> Result<()> {
        if row.len() != self.header.len() {
            return Err(Error::Shape(format!(
                "{} fields for {} columns",
                row.len(),
                self.header.len()
            )));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    /// Parses column `name` of every row as `f64`.
    pub fn floats(&self, name: &str) -> Result<Vec<f64>> {
        let c = self
            .column(name)
            .ok_or_else(|| Error::Format(format!("no column {name:?}")))?;
        self.rows
            .iter()
            .map(|r| {
                r[c].parse::<f64>()
                    .map_err(|e| Error::Format(format!("column {name}: {e}")))
            })
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(out, "{}", r.join(","));
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header: Vec<String> = lines
            .next()
            .ok_or_else(|| Error::Format("empty table".into()))?
            .split(',')
            .map(str::to_string)
            .collect();
        let mut table = Table {
            header,
            rows: Vec::new(),
        };
        for line in lines.filter(|l| !l.is_empty()) {
            table.push(line.split(',').map(str::to_string).collect())?;
        }
        Ok(table)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Table::parse(&std::fs::read_to_string(path)?)
    }
}
