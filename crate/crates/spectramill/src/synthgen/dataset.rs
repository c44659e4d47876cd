//! Dataset files and bulk generation.
//!
//! Two interchangeable on-disk forms: a line-oriented text format (one JSON
//! object per record, preceded by a JSON header line) that round-trips
//! records exactly, and a packed binary format (little-endian f32 arrays
//! behind an 8-byte versioned magic) that trades precision for size and
//! decode speed. Readers sniff the format from the leading bytes.

use super::config::{GenConfig, Task};
use super::sample::{gen_sample, SampleRecord};
use crate::spectral::{ChannelStack, PeakLabels, Spectrum, VoigtPeak};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

const PACKED_MAGIC: &[u8; 8] = b"SMPKDAT1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetFormat {
    Text,
    Packed,
}

impl DatasetFormat {
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "text" => Ok(DatasetFormat::Text),
            "packed" => Ok(DatasetFormat::Packed),
            other => Err(Error::Config(format!(
                "unknown dataset format '{other}' (expected text or packed)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub format: String,
    pub version: u32,
    pub task: Task,
    pub length: usize,
    pub count: usize,
    pub seed: u64,
}

impl DatasetHeader {
    fn new(cfg: &GenConfig, count: usize) -> Self {
        DatasetHeader {
            format: "spectramill-dataset".to_string(),
            version: 1,
            task: cfg.task,
            length: cfg.length,
            count,
            seed: cfg.seed,
        }
    }
}

/// Generate `count` records, optionally across threads. Workers own
/// contiguous index ranges and the result is always ordered by index, so
/// the job count never changes the output.
pub fn gen_dataset(cfg: &GenConfig, count: usize, jobs: usize) -> Result<Vec<SampleRecord>> {
    cfg.validate()?;
    if jobs <= 1 || count < 2 {
        return (0..count as u64).map(|i| gen_sample(cfg, i)).collect();
    }
    let jobs = jobs.min(count);
    let mut out = Vec::with_capacity(count);
    std::thread::scope(|scope| -> Result<()> {
        let mut handles = Vec::with_capacity(jobs);
        for w in 0..jobs {
            let lo = (count * w / jobs) as u64;
            let hi = (count * (w + 1) / jobs) as u64;
            handles.push(scope.spawn(move || -> Result<Vec<SampleRecord>> {
                (lo..hi).map(|i| gen_sample(cfg, i)).collect()
            }));
        }
        for h in handles {
            let chunk = h.join().expect("generator worker panicked")?;
            out.extend(chunk);
        }
        Ok(())
    })?;
    Ok(out)
}

pub fn write_dataset(
    path: &Path,
    cfg: &GenConfig,
    records: &[SampleRecord],
    format: DatasetFormat,
) -> Result<()> {
    let header = DatasetHeader::new(cfg, records.len());
    if format == DatasetFormat::Packed && header.length > u16::MAX as usize {
        return Err(Error::Config(format!(
            "packed format caps length at 65535, got {}",
            header.length
        )));
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let res = match format {
        DatasetFormat::Text => write_text(&mut w, &header, records),
        DatasetFormat::Packed => write_packed(&mut w, &header, records),
    };
    res.map_err(|e| Error::io(path, e))
}

pub fn read_dataset(path: &Path) -> Result<(DatasetHeader, Vec<SampleRecord>)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);
    let mut magic = [0u8; 8];
    let got = read_up_to(&mut r, &mut magic).map_err(|e| Error::io(path, e))?;
    if got == 8 && &magic == PACKED_MAGIC {
        let mut rest = Vec::new();
        r.read_to_end(&mut rest).map_err(|e| Error::io(path, e))?;
        return read_packed(&rest);
    }
    let mut rest = Vec::new();
    r.read_to_end(&mut rest).map_err(|e| Error::io(path, e))?;
    let mut text = Vec::with_capacity(got + rest.len());
    text.extend_from_slice(&magic[..got]);
    text.extend_from_slice(&rest);
    read_text(&text)
}

/// SHA-256 of a file's bytes, as lowercase hex.
pub fn file_digest(path: &Path) -> Result<String> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 65536];
    loop {
        let n = r.read(&mut buf).map_err(|e| Error::io(path, e))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex(&hasher.finalize()))
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    let mut s = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        s.push_str(&format!("{b:02x}"));
    }
    s
}

fn read_up_to<R: Read>(r: &mut R, buf: &mut [u8]) -> std::io::Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        let n = r.read(&mut buf[filled..])?;
        if n == 0 {
            break;
        }
        filled += n;
    }
    Ok(filled)
}

fn write_text<W: Write>(
    w: &mut W,
    header: &DatasetHeader,
    records: &[SampleRecord],
) -> std::io::Result<()> {
    let hline = serde_json::to_string(header).expect("header serializes");
    writeln!(w, "{hline}")?;
    for rec in records {
        let line = serde_json::to_string(rec).expect("record serializes");
        writeln!(w, "{line}")?;
    }
    Ok(())
}

fn read_text(bytes: &[u8]) -> Result<(DatasetHeader, Vec<SampleRecord>)> {
    let mut lines = bytes.lines();
    let hline = lines
        .next()
        .ok_or_else(|| Error::Format("empty dataset file".to_string()))?
        .map_err(|e| Error::Format(format!("unreadable dataset header: {e}")))?;
    let header: DatasetHeader = serde_json::from_str(&hline)
        .map_err(|e| Error::Format(format!("bad dataset header: {e}")))?;
    let mut records = Vec::with_capacity(header.count);
    for (i, line) in lines.enumerate() {
        let line = line.map_err(|e| Error::Format(format!("unreadable record {i}: {e}")))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: SampleRecord = serde_json::from_str(&line)
            .map_err(|e| Error::Format(format!("bad record {i}: {e}")))?;
        records.push(rec);
    }
    if records.len() != header.count {
        return Err(Error::Format(format!(
            "dataset header promises {} records, file holds {}",
            header.count,
            records.len()
        )));
    }
    Ok((header, records))
}

// Packed layout, all little-endian. File: magic, u8 task id, u32 length,
// u64 count, u64 seed, then records. Record: u64 index, u8 raman flag,
// f32 noise std, f32 scale, f32 offset, u16 peak count + 4 f32 per peak,
// u16 shift count + 2 u16 per window, u16 shadow count + u16 per entry,
// then length f32 clean values, length f32 baseline, length f32 raw.
// Derivatives and label arrays are rebuilt on read.

fn write_packed<W: Write>(
    w: &mut W,
    header: &DatasetHeader,
    records: &[SampleRecord],
) -> std::io::Result<()> {
    w.write_all(PACKED_MAGIC)?;
    w.write_all(&[task_id(header.task)])?;
    w.write_all(&(header.length as u32).to_le_bytes())?;
    w.write_all(&(header.count as u64).to_le_bytes())?;
    w.write_all(&header.seed.to_le_bytes())?;
    let mut buf = Vec::new();
    for rec in records {
        buf.clear();
        buf.extend_from_slice(&rec.index.to_le_bytes());
        buf.push(rec.raman_like as u8);
        put_f32(&mut buf, rec.noise_std_used);
        put_f32(&mut buf, rec.norm.scale);
        put_f32(&mut buf, rec.norm.offset);
        buf.extend_from_slice(&(rec.peaks.len() as u16).to_le_bytes());
        for p in &rec.peaks {
            put_f32(&mut buf, p.center);
            put_f32(&mut buf, p.amplitude);
            put_f32(&mut buf, p.fwhm);
            put_f32(&mut buf, p.eta);
        }
        buf.extend_from_slice(&(rec.shift_positions.len() as u16).to_le_bytes());
        for (s, e) in &rec.shift_positions {
            buf.extend_from_slice(&(*s as u16).to_le_bytes());
            buf.extend_from_slice(&(*e as u16).to_le_bytes());
        }
        buf.extend_from_slice(&(rec.labels.shadowed_location.len() as u16).to_le_bytes());
        for s in &rec.labels.shadowed_location {
            buf.extend_from_slice(&(*s as u16).to_le_bytes());
        }
        for v in &rec.clean_peaks.values {
            put_f32(&mut buf, *v);
        }
        for v in &rec.baseline {
            put_f32(&mut buf, *v);
        }
        for v in &rec.input.raw {
            put_f32(&mut buf, *v);
        }
        w.write_all(&buf)?;
    }
    Ok(())
}

fn read_packed(body: &[u8]) -> Result<(DatasetHeader, Vec<SampleRecord>)> {
    let mut c = Cursor { body, at: 0 };
    let task = task_from_id(c.u8()?)?;
    let length = c.u32()? as usize;
    let count = c.u64()? as usize;
    let seed = c.u64()?;
    if length < 3 {
        return Err(Error::Format(format!("packed length {length} too small")));
    }
    let header = DatasetHeader {
        format: "spectramill-dataset".to_string(),
        version: 1,
        task,
        length,
        count,
        seed,
    };
    let mut records = Vec::with_capacity(count);
    for _ in 0..count {
        let index = c.u64()?;
        let raman_like = c.u8()? != 0;
        let noise_std_used = c.f32()? as f64;
        let scale = c.f32()? as f64;
        let offset = c.f32()? as f64;
        let n_peaks = c.u16()? as usize;
        let mut peaks = Vec::with_capacity(n_peaks);
        for _ in 0..n_peaks {
            peaks.push(VoigtPeak {
                center: c.f32()? as f64,
                amplitude: c.f32()? as f64,
                fwhm: c.f32()? as f64,
                eta: c.f32()? as f64,
            });
        }
        let n_shifts = c.u16()? as usize;
        let mut shift_positions = Vec::with_capacity(n_shifts);
        for _ in 0..n_shifts {
            let s = c.u16()? as usize;
            let e = c.u16()? as usize;
            shift_positions.push((s, e));
        }
        let n_shadow = c.u16()? as usize;
        let mut shadowed = Vec::with_capacity(n_shadow);
        for _ in 0..n_shadow {
            shadowed.push(c.u16()? as usize);
        }
        let clean = c.f32_array(length)?;
        let baseline = c.f32_array(length)?;
        let raw = c.f32_array(length)?;
        let mut labels = PeakLabels::from_peaks(&peaks, length);
        labels.shadowed_location = shadowed;
        records.push(SampleRecord {
            index,
            clean_peaks: Spectrum::from_values(clean),
            baseline,
            shift_positions,
            noise_std_used,
            peaks,
            labels,
            input: ChannelStack::from_raw(raw)?,
            raman_like,
            norm: crate::spectral::Norm { scale, offset },
        });
    }
    if c.at != body.len() {
        return Err(Error::Format(format!(
            "{} trailing bytes after the last packed record",
            body.len() - c.at
        )));
    }
    Ok((header, records))
}

fn task_id(task: Task) -> u8 {
    Task::ALL.iter().position(|t| *t == task).unwrap() as u8
}

fn task_from_id(id: u8) -> Result<Task> {
    Task::ALL
        .get(id as usize)
        .copied()
        .ok_or_else(|| Error::Format(format!("unknown task id {id}")))
}

fn put_f32(buf: &mut Vec<u8>, v: f64) {
    buf.extend_from_slice(&(v as f32).to_le_bytes());
}

struct Cursor<'a> {
    body: &'a [u8],
    at: usize,
}

impl Cursor<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.at + n > self.body.len() {
            return Err(Error::Format("truncated packed dataset".to_string()));
        }
        let s = &self.body[self.at..self.at + n];
        self.at += n;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn f32_array(&mut self, n: usize) -> Result<Vec<f64>> {
        let bytes = self.take(n * 4)?;
        Ok(bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect())
    }
}
