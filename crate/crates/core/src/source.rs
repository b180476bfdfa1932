//! Data sources: in-memory datasets and disk-resident delimited text files
//! with a sidecar byte-offset index.
//!
//! The index makes any record retrievable with one positioned read, so a
//! first-stage subset of `n` records costs O(n) IO no matter how large the
//! file is.
//!
//! Sidecar layout (all integers little-endian):
//!
//! | bytes | field |
//! |-------|-------|
//! | 8 | magic `SBTIDX\r\n` |
//! | 1 | version (1) |
//! | 1 | delimiter byte |
//! | 1 | header flag (0/1) |
//! | 1 | selected column count (1 or 2) |
//! | 4 × 2 | column ordinals, `u32::MAX` when unused |
//! | 8 | data file length in bytes |
//! | 8 | record count N |
//! | 8 × (N + 1) | record start offsets, then the file length |

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::os::unix::fs::FileExt;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Observation};
use crate::error::{Error, Result};
use crate::rng::RngStream;

pub const INDEX_MAGIC: &[u8; 8] = b"SBTIDX\r\n";
pub const INDEX_VERSION: u8 = 1;
const HEADER_LEN: usize = 8 + 1 + 1 + 1 + 1 + 8 + 8 + 8;

/// A column chosen by header name or zero-based ordinal.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Column {
    Ordinal(usize),
    Name(String),
}

impl std::str::FromStr for Column {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(match s.trim().parse::<usize>() {
            Ok(i) => Column::Ordinal(i),
            Err(_) => Column::Name(s.trim().to_string()),
        })
    }
}

/// How to read a delimited text file.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TextFormat {
    #[serde(with = "delimiter_serde")]
    pub delimiter: u8,
    pub has_header: bool,
    /// One column for scalar data, two for pairs.
    pub columns: Vec<Column>,
}

impl Default for TextFormat {
    fn default() -> Self {
        Self {
            delimiter: b',',
            has_header: false,
            columns: vec![Column::Ordinal(0)],
        }
    }
}

mod delimiter_serde {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &u8, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&(*d as char).to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<u8, D::Error> {
        let s = String::deserialize(d)?;
        match s.as_bytes() {
            [b] => Ok(*b),
            _ if s == "\\t" => Ok(b'\t'),
            _ => Err(serde::de::Error::custom("delimiter must be a single byte")),
        }
    }
}

/// Additive Gaussian noise on the last selected column, keyed by record
/// ordinal so that every access path sees the same perturbed value.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Noise {
    pub sd: f64,
    pub seed: u64,
}

impl Noise {
    fn apply(&self, ordinal: usize, obs: Observation) -> Observation {
        let z: f64 = StandardNormal.sample(&mut RngStream::new(self.seed, ordinal as u64).rng());
        match obs {
            Observation::Scalar(x) => Observation::Scalar(x + self.sd * z),
            Observation::Pair(x, y) => Observation::Pair(x, y + self.sd * z),
        }
    }
}

/// Default sidecar path: the data path with `.sbidx` appended.
pub fn default_index_path(data: &Path) -> PathBuf {
    let mut s = data.as_os_str().to_owned();
    s.push(".sbidx");
    PathBuf::from(s)
}

fn resolve_columns(format: &TextFormat, header: Option<&str>) -> Result<Vec<usize>> {
    if format.columns.is_empty() || format.columns.len() > 2 {
        return Err(Error::invalid("select one or two columns"));
    }
    let names: Option<Vec<&str>> = header.map(|h| {
        h.trim_end_matches(['\r', '\n'])
            .split(format.delimiter as char)
            .map(str::trim)
            .collect()
    });
    format
        .columns
        .iter()
        .map(|c| match c {
            Column::Ordinal(i) => Ok(*i),
            Column::Name(name) => {
                let names = names
                    .as_ref()
                    .ok_or_else(|| Error::invalid(format!("column {name:?} named but file has no header")))?;
                names
                    .iter()
                    .position(|h| h == name)
                    .ok_or_else(|| Error::invalid(format!("no column named {name:?} in header")))
            }
        })
        .collect()
}

fn is_blank(line: &[u8]) -> bool {
    line.iter().all(|b| b.is_ascii_whitespace())
}

/// Parses the selected columns out of one line.
pub(crate) fn parse_line(line: &[u8], delimiter: u8, ordinals: &[usize]) -> std::result::Result<Observation, String> {
    let line = match line.iter().position(|&b| b == b'\n') {
        Some(p) => &line[..p],
        None => line,
    };
    let text = std::str::from_utf8(line).map_err(|_| "record is not valid UTF-8".to_string())?;
    let text = text.trim_end_matches('\r');
    let mut values = [0.0f64; 2];
    let fields: Vec<&str> = text.split(delimiter as char).collect();
    for (slot, &ord) in ordinals.iter().enumerate() {
        let field = fields
            .get(ord)
            .ok_or_else(|| format!("missing column {ord} (record has {} fields)", fields.len()))?
            .trim();
        let v: f64 = field
            .parse()
            .map_err(|_| format!("column {ord}: {field:?} is not a number"))?;
        if !v.is_finite() {
            return Err(format!("column {ord}: non-finite value {field:?}"));
        }
        values[slot] = v;
    }
    Ok(match ordinals.len() {
        1 => Observation::Scalar(values[0]),
        _ => Observation::Pair(values[0], values[1]),
    })
}

/// Offsets of every record in a delimited file plus the column selection
/// that was validated when the index was built.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RecordIndex {
    pub delimiter: u8,
    pub has_header: bool,
    pub ordinals: Vec<usize>,
    pub file_len: u64,
    /// N + 1 entries; record `i` spans `offsets[i]..offsets[i + 1]`.
    pub offsets: Vec<u64>,
}

impl RecordIndex {
    pub fn len(&self) -> usize {
        self.offsets.len().saturating_sub(1)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn write_to(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let mut header = Vec::with_capacity(HEADER_LEN);
        header.extend_from_slice(INDEX_MAGIC);
        header.push(INDEX_VERSION);
        header.push(self.delimiter);
        header.push(u8::from(self.has_header));
        header.push(self.ordinals.len() as u8);
        for slot in 0..2 {
            let ord = self.ordinals.get(slot).map_or(u32::MAX, |&o| o as u32);
            header.extend_from_slice(&ord.to_le_bytes());
        }
        header.extend_from_slice(&self.file_len.to_le_bytes());
        header.extend_from_slice(&(self.len() as u64).to_le_bytes());
        let write = |w: &mut BufWriter<File>, bytes: &[u8]| w.write_all(bytes).map_err(|e| Error::io(path, e));
        write(&mut w, &header)?;
        for off in &self.offsets {
            write(&mut w, &off.to_le_bytes())?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_from(path: &Path) -> Result<Self> {
        let bad = |message: &str| Error::IndexFormat {
            path: path.to_path_buf(),
            message: message.to_string(),
        };
        let mut file = BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?);
        let mut header = [0u8; HEADER_LEN];
        file.read_exact(&mut header).map_err(|_| bad("truncated header"))?;
        if &header[..8] != INDEX_MAGIC {
            return Err(bad("bad magic"));
        }
        if header[8] != INDEX_VERSION {
            return Err(bad(&format!("unsupported version {}", header[8])));
        }
        let delimiter = header[9];
        let has_header = header[10] != 0;
        let ncols = header[11] as usize;
        if !(1..=2).contains(&ncols) {
            return Err(bad("column count must be 1 or 2"));
        }
        let u32_at = |o: usize| u32::from_le_bytes(header[o..o + 4].try_into().unwrap());
        let u64_at = |o: usize| u64::from_le_bytes(header[o..o + 8].try_into().unwrap());
        let ordinals: Vec<usize> = (0..ncols).map(|k| u32_at(12 + 4 * k) as usize).collect();
        let file_len = u64_at(20);
        let n = u64_at(28) as usize;
        let mut raw = Vec::new();
        file.read_to_end(&mut raw).map_err(|e| Error::io(path, e))?;
        if raw.len() != 8 * (n + 1) {
            return Err(bad("offset table length does not match record count"));
        }
        let offsets: Vec<u64> = raw
            .chunks_exact(8)
            .map(|c| u64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        if offsets.windows(2).any(|w| w[0] >= w[1]) || offsets.last() != Some(&file_len) {
            return Err(bad("offsets are not increasing"));
        }
        Ok(Self {
            delimiter,
            has_header,
            ordinals,
            file_len,
            offsets,
        })
    }
}

/// Scans a delimited file, validates the selected columns on every record,
/// and returns the offset index. Does not write anything.
pub fn scan_record_index(path: &Path, format: &TextFormat) -> Result<RecordIndex> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let file_len = file.metadata().map_err(|e| Error::io(path, e))?.len();
    let mut reader = BufReader::with_capacity(1 << 16, file);
    let mut line = Vec::new();
    let mut pos = 0u64;
    let mut line_no = 0u64;
    let mut offsets = Vec::new();
    let mut ordinals = None;
    let read = |reader: &mut BufReader<File>, line: &mut Vec<u8>| {
        line.clear();
        reader.read_until(b'\n', line).map_err(|e| Error::io(path, e))
    };

    if format.has_header {
        let got = read(&mut reader, &mut line)?;
        if got == 0 {
            return Err(Error::invalid(format!("{}: empty file", path.display())));
        }
        line_no += 1;
        pos += got as u64;
        let header = String::from_utf8_lossy(&line).into_owned();
        ordinals = Some(resolve_columns(format, Some(&header))?);
    }
    let ordinals = match ordinals {
        Some(o) => o,
        None => resolve_columns(format, None)?,
    };

    loop {
        let got = read(&mut reader, &mut line)?;
        if got == 0 {
            break;
        }
        line_no += 1;
        if !is_blank(&line) {
            parse_line(&line, format.delimiter, &ordinals).map_err(|message| Error::Parse {
                path: path.to_path_buf(),
                line: line_no,
                message,
            })?;
            offsets.push(pos);
        }
        pos += got as u64;
    }
    if offsets.is_empty() {
        return Err(Error::invalid(format!("{}: no records", path.display())));
    }
    offsets.push(file_len);
    Ok(RecordIndex {
        delimiter: format.delimiter,
        has_header: format.has_header,
        ordinals,
        file_len,
        offsets,
    })
}

/// Builds the offset index for `path` and writes it next to the data file
/// (or to `index_path` when given). Returns the sidecar location.
pub fn build_record_index(path: &Path, format: &TextFormat, index_path: Option<&Path>) -> Result<(PathBuf, RecordIndex)> {
    let index = scan_record_index(path, format)?;
    let out = index_path.map_or_else(|| default_index_path(path), Path::to_path_buf);
    index.write_to(&out)?;
    Ok((out, index))
}

/// Reads every selected record of a delimited file into memory.
pub fn load_dataset(path: &Path, format: &TextFormat, noise: Option<Noise>) -> Result<Dataset> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::with_capacity(1 << 16, file);
    let mut line = Vec::new();
    let mut line_no = 0u64;
    let mut header = None;
    if format.has_header {
        reader.read_until(b'\n', &mut line).map_err(|e| Error::io(path, e))?;
        line_no += 1;
        header = Some(String::from_utf8_lossy(&line).into_owned());
    }
    let ordinals = resolve_columns(format, header.as_deref())?;
    let mut data = Dataset::with_capacity(0, ordinals.len() == 2);
    loop {
        line.clear();
        if reader.read_until(b'\n', &mut line).map_err(|e| Error::io(path, e))? == 0 {
            break;
        }
        line_no += 1;
        if is_blank(&line) {
            continue;
        }
        let obs = parse_line(&line, format.delimiter, &ordinals).map_err(|message| Error::Parse {
            path: path.to_path_buf(),
            line: line_no,
            message,
        })?;
        let ordinal = data.len();
        data.push(noise.map_or(obs, |n| n.apply(ordinal, obs)));
    }
    Ok(data)
}

/// A delimited file opened through its offset index.
#[derive(Debug)]
pub struct DiskSource {
    path: PathBuf,
    file: File,
    index: RecordIndex,
    noise: Option<Noise>,
    bytes_read: AtomicU64,
}

impl DiskSource {
    pub fn open(data: &Path, index_path: &Path) -> Result<Self> {
        let index = RecordIndex::read_from(index_path)?;
        let file = File::open(data).map_err(|e| Error::io(data, e))?;
        let len = file.metadata().map_err(|e| Error::io(data, e))?.len();
        if len != index.file_len {
            return Err(Error::IndexFormat {
                path: index_path.to_path_buf(),
                message: format!("stale index: data file is {len} bytes, index expects {}", index.file_len),
            });
        }
        Ok(Self {
            path: data.to_path_buf(),
            file,
            index,
            noise: None,
            bytes_read: AtomicU64::new(0),
        })
    }

    pub fn with_noise(mut self, noise: Option<Noise>) -> Self {
        self.noise = noise;
        self
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn index(&self) -> &RecordIndex {
        &self.index
    }

    /// Total bytes fetched from the data file since opening.
    pub fn bytes_read(&self) -> u64 {
        self.bytes_read.load(Ordering::Relaxed)
    }

    fn read_into(&self, i: usize, buf: &mut Vec<u8>) -> Result<Observation> {
        let n = self.len();
        if i >= n {
            return Err(Error::OutOfRange { index: i, len: n });
        }
        let (start, end) = (self.index.offsets[i], self.index.offsets[i + 1]);
        buf.resize((end - start) as usize, 0);
        self.file
            .read_exact_at(buf, start)
            .map_err(|e| Error::io(&self.path, e))?;
        self.bytes_read.fetch_add(end - start, Ordering::Relaxed);
        let obs = parse_line(buf, self.index.delimiter, &self.index.ordinals).map_err(|message| Error::Parse {
            path: self.path.clone(),
            line: 0,
            message: format!("record {i}: {message}"),
        })?;
        Ok(match self.noise {
            Some(noise) => noise.apply(i, obs),
            None => obs,
        })
    }

    pub fn record(&self, i: usize) -> Result<Observation> {
        self.read_into(i, &mut Vec::new())
    }
}

pub enum DataSource {
    Memory(Dataset),
    Disk(DiskSource),
}

impl DataSource {
    pub fn len(&self) -> usize {
        match self {
            DataSource::Memory(d) => d.len(),
            DataSource::Disk(d) => d.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_paired(&self) -> bool {
        match self {
            DataSource::Memory(d) => d.is_paired(),
            DataSource::Disk(d) => d.index.ordinals.len() == 2,
        }
    }

    /// Records at `indices`, in index order.
    pub fn sample_records(&self, indices: &[usize]) -> Result<Dataset> {
        let mut out = Dataset::with_capacity(indices.len(), self.is_paired());
        self.sample_records_into(indices, &mut out)?;
        Ok(out)
    }

    pub fn sample_records_into(&self, indices: &[usize], out: &mut Dataset) -> Result<()> {
        match self {
            DataSource::Memory(d) => d.gather_into(indices, out),
            DataSource::Disk(d) => {
                out.clear();
                let mut buf = Vec::new();
                for &i in indices {
                    out.push(d.read_into(i, &mut buf)?);
                }
                Ok(())
            }
        }
    }

    /// Every record, in file order.
    pub fn load_all(&self) -> Result<Dataset> {
        match self {
            DataSource::Memory(d) => Ok(d.clone()),
            DataSource::Disk(d) => {
                let all: Vec<usize> = (0..d.len()).collect();
                self.sample_records(&all)
            }
        }
    }
}

impl From<Dataset> for DataSource {
    fn from(d: Dataset) -> Self {
        DataSource::Memory(d)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_file(dir: &Path, name: &str, body: &str) -> PathBuf {
        let p = dir.join(name);
        std::fs::File::create(&p).unwrap().write_all(body.as_bytes()).unwrap();
        p
    }

    fn pair_format() -> TextFormat {
        TextFormat {
            delimiter: b',',
            has_header: true,
            columns: vec![Column::Name("a".into()), Column::Ordinal(2)],
        }
    }

    #[test]
    fn three_line_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_file(dir.path(), "d.csv", "1.5\n-2\n3e1\n");
        let (ip, idx) = build_record_index(&p, &TextFormat::default(), None).unwrap();
        assert_eq!(idx.len(), 3);
        assert_eq!(ip, dir.path().join("d.csv.sbidx"));
        let disk = DiskSource::open(&p, &ip).unwrap();
        assert_eq!(disk.record(1).unwrap(), Observation::Scalar(-2.0));
        assert_eq!(disk.record(2).unwrap(), Observation::Scalar(30.0));
        assert!(matches!(disk.record(3), Err(Error::OutOfRange { index: 3, len: 3 })));
    }

    #[test]
    fn malformed_line_is_cited() {
        let dir = tempfile::tempdir().unwrap();
        let body = "1\n2\n3\n4\n5\n6\nseven\n8\n";
        let p = write_file(dir.path(), "bad.csv", body);
        match scan_record_index(&p, &TextFormat::default()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 7),
            other => panic!("expected parse error, got {other:?}"),
        }
        let err = load_dataset(&p, &TextFormat::default(), None).unwrap_err();
        assert!(err.to_string().contains(":7:"), "{err}");
    }

    #[test]
    fn empty_file_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_file(dir.path(), "e.csv", "");
        assert!(scan_record_index(&p, &TextFormat::default()).is_err());
        let p = write_file(dir.path(), "h.csv", "a,b\n");
        let fmt = TextFormat { has_header: true, ..TextFormat::default() };
        assert!(scan_record_index(&p, &fmt).is_err());
    }

    #[test]
    fn header_columns_and_crlf() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_file(dir.path(), "h.csv", "a,b,c\r\n1,x,2\r\n\r\n3,y,4\r\n5,z,6");
        let (ip, idx) = build_record_index(&p, &pair_format(), None).unwrap();
        assert_eq!(idx.ordinals, vec![0, 2]);
        let disk = DataSource::Disk(DiskSource::open(&p, &ip).unwrap());
        let mem = DataSource::Memory(load_dataset(&p, &pair_format(), None).unwrap());
        let ids = [2, 0, 1, 1];
        let a = disk.sample_records(&ids).unwrap();
        let b = mem.sample_records(&ids).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.x(), &[5.0, 1.0, 3.0, 3.0]);
        assert_eq!(a.y().unwrap(), &[6.0, 2.0, 4.0, 4.0]);
    }

    #[test]
    fn index_round_trip_and_corruption() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_file(dir.path(), "d.csv", "1,2\n3,4\n");
        let fmt = TextFormat { columns: vec![Column::Ordinal(1), Column::Ordinal(0)], ..TextFormat::default() };
        let (ip, idx) = build_record_index(&p, &fmt, None).unwrap();
        assert_eq!(RecordIndex::read_from(&ip).unwrap(), idx);
        let mut bytes = std::fs::read(&ip).unwrap();
        bytes[0] = b'X';
        std::fs::write(&ip, &bytes).unwrap();
        assert!(matches!(RecordIndex::read_from(&ip), Err(Error::IndexFormat { .. })));
    }

    #[test]
    fn stale_index_detected() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_file(dir.path(), "d.csv", "1\n2\n");
        let (ip, _) = build_record_index(&p, &TextFormat::default(), None).unwrap();
        write_file(dir.path(), "d.csv", "1\n2\n3\n");
        assert!(matches!(DiskSource::open(&p, &ip), Err(Error::IndexFormat { .. })));
    }

    #[test]
    fn noise_is_identical_across_modes() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_file(dir.path(), "d.csv", "1,2\n3,4\n5,7\n");
        let fmt = TextFormat { columns: vec![Column::Ordinal(0), Column::Ordinal(1)], ..TextFormat::default() };
        let noise = Some(Noise { sd: 1.0, seed: 3 });
        let (ip, _) = build_record_index(&p, &fmt, None).unwrap();
        let disk = DataSource::Disk(DiskSource::open(&p, &ip).unwrap().with_noise(noise));
        let mem = load_dataset(&p, &fmt, noise).unwrap();
        assert_eq!(disk.load_all().unwrap(), mem);
        assert_eq!(mem.x(), &[1.0, 3.0, 5.0]);
        assert_ne!(mem.y().unwrap(), &[2.0, 4.0, 7.0]);
    }

    #[test]
    fn sampling_reads_only_selected_records() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("big.csv");
        {
            let mut w = BufWriter::new(File::create(&p).unwrap());
            for i in 0..1_000_000u64 {
                writeln!(w, "{},{}", i % 977, (i * 7) % 1013).unwrap();
            }
        }
        let fmt = TextFormat { columns: vec![Column::Ordinal(0), Column::Ordinal(1)], ..TextFormat::default() };
        let (ip, idx) = build_record_index(&p, &fmt, None).unwrap();
        let disk = DiskSource::open(&p, &ip).unwrap();
        let src = DataSource::Disk(disk);
        let mut rng = RngStream::new(1, 0).rng();
        let ids = crate::resample::srswr_indices(5000, idx.len(), &mut rng).unwrap();
        let got = src.sample_records(&ids).unwrap();
        assert_eq!(got.len(), 5000);
        let DataSource::Disk(disk) = &src else { unreachable!() };
        let max_record = idx.offsets.windows(2).map(|w| w[1] - w[0]).max().unwrap();
        assert!(disk.bytes_read() <= 5000 * max_record);
        assert!(disk.bytes_read() * 100 < idx.file_len, "{} of {}", disk.bytes_read(), idx.file_len);
        for (k, &i) in ids.iter().enumerate() {
            assert_eq!(got.x()[k], (i as u64 % 977) as f64);
        }
    }
}
