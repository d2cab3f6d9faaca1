//! Raw video ingestion: YUV4MPEG2 and headerless planar YUV.
//!
//! Samples are held as `u16` regardless of bit depth. On disk, 8-bit samples
//! are one byte each and 10-bit samples are two bytes, little-endian.

use std::fmt;
use std::fs::File;
use std::io::{self, BufRead, BufReader, Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChromaFormat {
    /// 4:2:0, chroma planes halved in both directions.
    Yuv420,
    /// 4:0:0, luma only.
    Mono,
}

impl fmt::Display for ChromaFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ChromaFormat::Yuv420 => f.write_str("420"),
            ChromaFormat::Mono => f.write_str("400"),
        }
    }
}

impl FromStr for ChromaFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "420" | "4:2:0" | "yuv420" | "i420" => Ok(ChromaFormat::Yuv420),
            "400" | "4:0:0" | "mono" | "gray" => Ok(ChromaFormat::Mono),
            other => Err(Error::UnsupportedChroma(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct VideoGeometry {
    pub width: usize,
    pub height: usize,
    /// 8 or 10.
    pub bit_depth: u8,
    pub chroma: ChromaFormat,
    pub fps_num: u32,
    pub fps_den: u32,
}

impl VideoGeometry {
    pub fn new(
        width: usize,
        height: usize,
        bit_depth: u8,
        chroma: ChromaFormat,
        fps_num: u32,
        fps_den: u32,
    ) -> Result<Self> {
        let g = VideoGeometry { width, height, bit_depth, chroma, fps_num, fps_den };
        g.validate()?;
        Ok(g)
    }

    /// 8-bit 4:2:0 at the given size and frame rate.
    pub fn yuv420_8bit(width: usize, height: usize, fps_num: u32, fps_den: u32) -> Result<Self> {
        Self::new(width, height, 8, ChromaFormat::Yuv420, fps_num, fps_den)
    }

    pub fn validate(&self) -> Result<()> {
        if self.width < 64 || self.height < 64 {
            return Err(Error::InvalidGeometry(format!(
                "{}x{} is smaller than the 64x64 minimum",
                self.width, self.height
            )));
        }
        if self.chroma == ChromaFormat::Yuv420 && (self.width % 2 != 0 || self.height % 2 != 0) {
            return Err(Error::InvalidGeometry(format!(
                "4:2:0 requires even dimensions, got {}x{}",
                self.width, self.height
            )));
        }
        if self.bit_depth != 8 && self.bit_depth != 10 {
            return Err(Error::InvalidGeometry(format!("bit depth {} not supported (8 or 10)", self.bit_depth)));
        }
        if self.fps_num == 0 || self.fps_den == 0 {
            return Err(Error::InvalidGeometry(format!(
                "frame rate {}/{} must have positive terms",
                self.fps_num, self.fps_den
            )));
        }
        Ok(())
    }

    pub fn pixels(&self) -> usize {
        self.width * self.height
    }

    pub fn luma_len(&self) -> usize {
        self.width * self.height
    }

    pub fn chroma_dims(&self) -> (usize, usize) {
        match self.chroma {
            ChromaFormat::Yuv420 => (self.width / 2, self.height / 2),
            ChromaFormat::Mono => (0, 0),
        }
    }

    pub fn chroma_len(&self) -> usize {
        let (w, h) = self.chroma_dims();
        w * h
    }

    pub fn bytes_per_sample(&self) -> usize {
        if self.bit_depth > 8 {
            2
        } else {
            1
        }
    }

    pub fn frame_bytes(&self) -> usize {
        (self.luma_len() + 2 * self.chroma_len()) * self.bytes_per_sample()
    }

    pub fn max_sample(&self) -> u16 {
        ((1u32 << self.bit_depth) - 1) as u16
    }

    pub fn fps(&self) -> f64 {
        self.fps_num as f64 / self.fps_den as f64
    }
}

/// One decoded frame. Immutable once built.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlanarFrame {
    geometry: VideoGeometry,
    y: Vec<u16>,
    u: Vec<u16>,
    v: Vec<u16>,
    index: usize,
}

impl PlanarFrame {
    pub fn new(geometry: VideoGeometry, y: Vec<u16>, u: Vec<u16>, v: Vec<u16>, index: usize) -> Result<Self> {
        geometry.validate()?;
        if y.len() != geometry.luma_len() {
            return Err(Error::InvalidInput(format!(
                "luma plane has {} samples, expected {}",
                y.len(),
                geometry.luma_len()
            )));
        }
        if u.len() != geometry.chroma_len() || v.len() != geometry.chroma_len() {
            return Err(Error::InvalidInput(format!(
                "chroma planes have {}/{} samples, expected {}",
                u.len(),
                v.len(),
                geometry.chroma_len()
            )));
        }
        let max = geometry.max_sample();
        if let Some(s) = y.iter().chain(&u).chain(&v).find(|&&s| s > max) {
            return Err(Error::InvalidInput(format!(
                "sample value {s} exceeds {max} for {}-bit video",
                geometry.bit_depth
            )));
        }
        Ok(PlanarFrame { geometry, y, u, v, index })
    }

    /// A frame with every plane set to `value`.
    pub fn filled(geometry: VideoGeometry, value: u16, index: usize) -> Result<Self> {
        let c = geometry.chroma_len();
        Self::new(geometry, vec![value; geometry.luma_len()], vec![value; c], vec![value; c], index)
    }

    pub fn geometry(&self) -> &VideoGeometry {
        &self.geometry
    }

    pub fn y(&self) -> &[u16] {
        &self.y
    }

    pub fn u(&self) -> &[u16] {
        &self.u
    }

    pub fn v(&self) -> &[u16] {
        &self.v
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn with_index(mut self, index: usize) -> Self {
        self.index = index;
        self
    }
}

fn decode_samples(bytes: &[u8], bytes_per_sample: usize, out: &mut Vec<u16>) {
    out.clear();
    if bytes_per_sample == 1 {
        out.extend(bytes.iter().map(|&b| b as u16));
    } else {
        out.extend(bytes.chunks_exact(2).map(|c| u16::from_le_bytes([c[0], c[1]])));
    }
}

fn read_payload<R: Read>(
    reader: &mut R,
    geometry: &VideoGeometry,
    buf: &mut Vec<u8>,
    index: usize,
) -> Result<PlanarFrame> {
    buf.resize(geometry.frame_bytes(), 0);
    let mut filled = 0;
    while filled < buf.len() {
        match reader.read(&mut buf[filled..]) {
            Ok(0) => break,
            Ok(n) => filled += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e.into()),
        }
    }
    if filled < buf.len() {
        return Err(Error::TruncatedFrame { index });
    }

    let bps = geometry.bytes_per_sample();
    let luma_bytes = geometry.luma_len() * bps;
    let chroma_bytes = geometry.chroma_len() * bps;
    let (mut y, mut u, mut v) = (Vec::new(), Vec::new(), Vec::new());
    decode_samples(&buf[..luma_bytes], bps, &mut y);
    decode_samples(&buf[luma_bytes..luma_bytes + chroma_bytes], bps, &mut u);
    decode_samples(&buf[luma_bytes + chroma_bytes..], bps, &mut v);
    PlanarFrame::new(*geometry, y, u, v, index)
}

/// Sequential frame reader over a YUV4MPEG2 stream.
pub struct Y4mReader<R> {
    reader: R,
    geometry: VideoGeometry,
    next_index: usize,
    buf: Vec<u8>,
    done: bool,
}

const Y4M_MAGIC: &str = "YUV4MPEG2";
const MAX_HEADER_LINE: usize = 4096;

fn read_line<R: BufRead>(reader: &mut R) -> Result<Option<String>> {
    let mut line = Vec::new();
    let n = reader.by_ref().take(MAX_HEADER_LINE as u64).read_until(b'\n', &mut line)?;
    if n == 0 {
        return Ok(None);
    }
    if line.last() != Some(&b'\n') {
        return Err(Error::Y4mHeader("header line not terminated".into()));
    }
    line.pop();
    String::from_utf8(line).map(Some).map_err(|_| Error::Y4mHeader("header is not valid ASCII".into()))
}

fn parse_ratio(token: &str) -> Result<(u32, u32)> {
    let (n, d) = token.split_once(':').ok_or_else(|| Error::Y4mHeader(format!("frame rate `{token}` is not n:d")))?;
    let n = n.parse().map_err(|_| Error::Y4mHeader(format!("bad frame rate `{token}`")))?;
    let d = d.parse().map_err(|_| Error::Y4mHeader(format!("bad frame rate `{token}`")))?;
    Ok((n, d))
}

/// Parses a YUV4MPEG2 stream header line (without the trailing newline).
pub fn parse_y4m_header(line: &str) -> Result<VideoGeometry> {
    let mut tokens = line.split_ascii_whitespace();
    if tokens.next() != Some(Y4M_MAGIC) {
        return Err(Error::Y4mHeader("missing YUV4MPEG2 signature".into()));
    }
    let (mut width, mut height, mut fps) = (None, None, None);
    let mut chroma = (ChromaFormat::Yuv420, 8u8);
    for token in tokens {
        let (tag, value) = token.split_at(1);
        match tag {
            "W" => width = Some(value.parse().map_err(|_| Error::Y4mHeader(format!("bad width `{value}`")))?),
            "H" => height = Some(value.parse().map_err(|_| Error::Y4mHeader(format!("bad height `{value}`")))?),
            "F" => fps = Some(parse_ratio(value)?),
            "I" => {
                if value != "p" && value != "?" {
                    return Err(Error::Y4mHeader(format!(
                        "interlacing mode `{value}` not supported (progressive only)"
                    )));
                }
            }
            "C" => {
                chroma = match value {
                    "420" | "420jpeg" | "420paldv" | "420mpeg2" => (ChromaFormat::Yuv420, 8),
                    "420p10" => (ChromaFormat::Yuv420, 10),
                    "mono" => (ChromaFormat::Mono, 8),
                    "mono10" => (ChromaFormat::Mono, 10),
                    other => return Err(Error::UnsupportedChroma(other.to_string())),
                }
            }
            // Aspect ratio and extensions carry nothing we use.
            "A" | "X" => {}
            _ => return Err(Error::Y4mHeader(format!("unknown header token `{token}`"))),
        }
    }
    let width = width.ok_or_else(|| Error::Y4mHeader("missing W".into()))?;
    let height = height.ok_or_else(|| Error::Y4mHeader("missing H".into()))?;
    let (fps_num, fps_den) = fps.ok_or_else(|| Error::Y4mHeader("missing F".into()))?;
    VideoGeometry::new(width, height, chroma.1, chroma.0, fps_num, fps_den)
}

impl<R: BufRead> Y4mReader<R> {
    pub fn new(mut reader: R) -> Result<Self> {
        let line = read_line(&mut reader)?.ok_or_else(|| Error::Y4mHeader("empty file".into()))?;
        let geometry = parse_y4m_header(&line)?;
        Ok(Y4mReader { reader, geometry, next_index: 0, buf: Vec::new(), done: false })
    }

    pub fn geometry(&self) -> &VideoGeometry {
        &self.geometry
    }

    fn read_frame(&mut self) -> Result<Option<PlanarFrame>> {
        let index = self.next_index;
        let line = match read_line(&mut self.reader) {
            Ok(Some(line)) => line,
            Ok(None) => return Ok(None),
            Err(Error::Y4mHeader(_)) => return Err(Error::TruncatedFrame { index }),
            Err(e) => return Err(e),
        };
        if line != "FRAME" && !line.starts_with("FRAME ") {
            return Err(Error::Y4mHeader(format!("frame {index}: expected FRAME marker")));
        }
        let frame = read_payload(&mut self.reader, &self.geometry, &mut self.buf, index)?;
        self.next_index += 1;
        Ok(Some(frame))
    }
}

impl<R: BufRead> Iterator for Y4mReader<R> {
    type Item = Result<PlanarFrame>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        match self.read_frame() {
            Ok(Some(f)) => Some(Ok(f)),
            Ok(None) => {
                self.done = true;
                None
            }
            Err(e) => {
                self.done = true;
                Some(Err(e))
            }
        }
    }
}

pub fn open_y4m(path: impl AsRef<Path>) -> Result<Y4mReader<BufReader<File>>> {
    Y4mReader::new(BufReader::new(File::open(path)?))
}

/// Sequential frame reader over headerless planar YUV (I420 byte order).
pub struct RawYuvReader<R> {
    reader: R,
    geometry: VideoGeometry,
    remaining: usize,
    next_index: usize,
    buf: Vec<u8>,
}

impl<R: Read> RawYuvReader<R> {
    /// `byte_len` must be the total stream length; it has to be a whole number of frames.
    pub fn new(reader: R, geometry: VideoGeometry, byte_len: u64) -> Result<Self> {
        geometry.validate()?;
        let frame_bytes = geometry.frame_bytes();
        if byte_len % frame_bytes as u64 != 0 {
            return Err(Error::RawSizeMismatch { len: byte_len, frame_bytes });
        }
        Ok(RawYuvReader {
            reader,
            geometry,
            remaining: (byte_len / frame_bytes as u64) as usize,
            next_index: 0,
            buf: Vec::new(),
        })
    }

    pub fn geometry(&self) -> &VideoGeometry {
        &self.geometry
    }

    pub fn frame_count(&self) -> usize {
        self.remaining + self.next_index
    }
}

impl<R: Read> Iterator for RawYuvReader<R> {
    type Item = Result<PlanarFrame>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.remaining == 0 {
            return None;
        }
        let index = self.next_index;
        self.remaining -= 1;
        self.next_index += 1;
        match read_payload(&mut self.reader, &self.geometry, &mut self.buf, index) {
            Ok(frame) => Some(Ok(frame)),
            Err(e) => {
                self.remaining = 0;
                Some(Err(e))
            }
        }
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        (self.remaining, Some(self.remaining))
    }
}

pub fn open_raw_yuv(path: impl AsRef<Path>, geometry: VideoGeometry) -> Result<RawYuvReader<BufReader<File>>> {
    let file = File::open(path)?;
    let len = file.metadata()?.len();
    RawYuvReader::new(BufReader::new(file), geometry, len)
}

fn write_plane<W: Write>(w: &mut W, plane: &[u16], bytes_per_sample: usize) -> io::Result<()> {
    if bytes_per_sample == 1 {
        let bytes: Vec<u8> = plane.iter().map(|&s| s as u8).collect();
        w.write_all(&bytes)
    } else {
        let bytes: Vec<u8> = plane.iter().flat_map(|s| s.to_le_bytes()).collect();
        w.write_all(&bytes)
    }
}

/// Writes the frame payload in headerless planar layout.
pub fn write_raw_frame<W: Write>(w: &mut W, frame: &PlanarFrame) -> io::Result<()> {
    let bps = frame.geometry().bytes_per_sample();
    write_plane(w, frame.y(), bps)?;
    write_plane(w, frame.u(), bps)?;
    write_plane(w, frame.v(), bps)
}

pub fn y4m_header(geometry: &VideoGeometry) -> String {
    let chroma = match (geometry.chroma, geometry.bit_depth) {
        (ChromaFormat::Yuv420, 8) => "420jpeg",
        (ChromaFormat::Yuv420, _) => "420p10",
        (ChromaFormat::Mono, 8) => "mono",
        (ChromaFormat::Mono, _) => "mono10",
    };
    format!(
        "{Y4M_MAGIC} W{} H{} F{}:{} Ip A1:1 C{chroma}\n",
        geometry.width, geometry.height, geometry.fps_num, geometry.fps_den
    )
}

/// Writes a complete Y4M stream. All frames must share `geometry`.
pub fn write_y4m<'a, W: Write>(
    w: &mut W,
    geometry: &VideoGeometry,
    frames: impl IntoIterator<Item = &'a PlanarFrame>,
) -> Result<()> {
    w.write_all(y4m_header(geometry).as_bytes())?;
    for frame in frames {
        if frame.geometry() != geometry {
            return Err(Error::InvalidInput(format!(
                "frame {} geometry differs from the stream header",
                frame.index()
            )));
        }
        w.write_all(b"FRAME\n")?;
        write_raw_frame(w, frame)?;
    }
    Ok(())
}
