//! Video ingestion and the canonical in-memory video representation.
//!
//! Three containers are understood:
//!
//! * the raw `TVH0` container (lossless for 8-bit luma, written by [`write_raw`]),
//! * YUV4MPEG2 (`.y4m`) streams, of which only the luma plane is kept,
//! * a directory of binary PGM (`P5`) images, read in lexicographic order.
//!
//! Every source is normalized to the dimensions and frame rate of an
//! [`IngestConfig`]: nearest-frame temporal resampling followed by bilinear
//! spatial resampling.
//!
//! ## Raw container layout
//!
//! ```text
//! offset  size  field
//! 0       4     magic "TVH0"
//! 4       4     height       (u32 LE)
//! 8       4     width        (u32 LE)
//! 12      4     frame_count  (u32 LE)
//! 16      4     fps numerator   (u32 LE)
//! 20      4     fps denominator (u32 LE)
//! 24      ...   frame_count * height * width luma bytes, row-major
//! ```

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::frame::Frame;

pub const RAW_MAGIC: &[u8; 4] = b"TVH0";
const RAW_HEADER_LEN: usize = 24;
const Y4M_MAGIC: &[u8] = b"YUV4MPEG2";

/// Frame rate as an exact rational.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Fps {
    pub num: u32,
    pub den: u32,
}

impl Fps {
    pub const fn new(num: u32, den: u32) -> Self {
        Fps { num, den }
    }

    pub fn is_valid(&self) -> bool {
        self.num > 0 && self.den > 0
    }

    pub fn as_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

impl Default for Fps {
    fn default() -> Self {
        Fps::new(2, 1)
    }
}

impl fmt::Display for Fps {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den == 1 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}

impl std::str::FromStr for Fps {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidConfig(format!("bad frame rate {s:?}"));
        let fps = match s.split_once(['/', ':']) {
            Some((n, d)) => Fps::new(n.trim().parse().map_err(|_| bad())?, d.trim().parse().map_err(|_| bad())?),
            None => Fps::new(s.trim().parse().map_err(|_| bad())?, 1),
        };
        if !fps.is_valid() {
            return Err(bad());
        }
        Ok(fps)
    }
}

/// A normalized grayscale frame stack with pixels in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct VideoTensor {
    frames: Vec<Frame>,
    height: usize,
    width: usize,
    fps: Fps,
    source_id: String,
}

impl VideoTensor {
    /// Validates the tensor invariants: non-empty, uniform dimensions, pixels in `[0, 1]`.
    pub fn new(frames: Vec<Frame>, fps: Fps, source_id: impl Into<String>) -> Result<Self> {
        let first = frames.first().ok_or(Error::EmptyVideo)?;
        let (height, width) = first.dims();
        if height == 0 || width == 0 {
            return Err(Error::DimensionMismatch("frames must have non-zero size".into()));
        }
        for (i, f) in frames.iter().enumerate() {
            if f.dims() != (height, width) {
                return Err(Error::DimensionMismatch(format!(
                    "frame {i} is {}x{}, expected {height}x{width}",
                    f.height(),
                    f.width()
                )));
            }
            if f.data().iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::InvalidConfig(format!("frame {i} has pixels outside [0, 1]")));
            }
        }
        if !fps.is_valid() {
            return Err(Error::InvalidConfig(format!("frame rate {fps} is not positive")));
        }
        Ok(VideoTensor { frames, height, width, fps, source_id: source_id.into() })
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn frame(&self, index: usize) -> &Frame {
        &self.frames[index]
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    /// Always false for a constructed tensor; provided for API symmetry.
    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn fps(&self) -> Fps {
        self.fps
    }

    pub fn source_id(&self) -> &str {
        &self.source_id
    }

    pub fn with_source_id(mut self, id: impl Into<String>) -> Self {
        self.source_id = id.into();
        self
    }

    pub fn into_frames(self) -> Vec<Frame> {
        self.frames
    }

    /// A new tensor holding the selected frames, in the given order.
    pub fn select(&self, indices: &[usize]) -> Result<VideoTensor> {
        let frames = indices.iter().map(|&i| self.frames[i].clone()).collect();
        VideoTensor::new(frames, self.fps, self.source_id.clone())
    }

    pub fn reversed(&self) -> VideoTensor {
        let mut frames = self.frames.clone();
        frames.reverse();
        VideoTensor { frames, ..self.clone() }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IngestConfig {
    pub target_height: usize,
    pub target_width: usize,
    pub target_fps: Fps,
    /// Chroma is never used; `false` is rejected.
    pub luma_only: bool,
    /// Frame rate assumed for PGM sequences, which carry no timing.
    pub sequence_fps: Fps,
}

impl Default for IngestConfig {
    fn default() -> Self {
        IngestConfig {
            target_height: 64,
            target_width: 64,
            target_fps: Fps::new(2, 1),
            luma_only: true,
            sequence_fps: Fps::new(2, 1),
        }
    }
}

impl IngestConfig {
    pub fn validate(&self) -> Result<()> {
        if self.target_height < 8 || self.target_width < 8 {
            return Err(Error::InvalidConfig(format!(
                "target size {}x{} is below the 8x8 minimum",
                self.target_height, self.target_width
            )));
        }
        if !self.target_fps.is_valid() || !self.sequence_fps.is_valid() {
            return Err(Error::InvalidConfig("frame rates must be positive".into()));
        }
        if !self.luma_only {
            return Err(Error::InvalidConfig("only luma ingestion is supported".into()));
        }
        Ok(())
    }
}

/// Reads a video from `path` and normalizes it to `cfg`.
pub fn ingest(path: impl AsRef<Path>, cfg: &IngestConfig) -> Result<VideoTensor> {
    cfg.validate()?;
    let path = path.as_ref();
    let id = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let decoded = if path.is_dir() {
        read_pgm_sequence(path, cfg.sequence_fps)?
    } else {
        let bytes = fs::read(path)?;
        decode_bytes(&bytes)?
    };
    normalize(decoded.with_source_id(id), cfg)
}

/// Decodes an in-memory raw or Y4M stream without resampling.
pub fn decode_bytes(bytes: &[u8]) -> Result<VideoTensor> {
    if bytes.starts_with(RAW_MAGIC) {
        decode_raw(bytes)
    } else if bytes.starts_with(Y4M_MAGIC) {
        decode_y4m(bytes)
    } else {
        Err(Error::UnsupportedFormat("unrecognized container magic".into()))
    }
}

/// Resamples a decoded video to the configured frame rate and size.
pub fn normalize(v: VideoTensor, cfg: &IngestConfig) -> Result<VideoTensor> {
    cfg.validate()?;
    let indices = nearest_frame_indices(v.len(), v.fps(), cfg.target_fps);
    let (h, w) = (cfg.target_height, cfg.target_width);
    let frames = indices.iter().map(|&i| v.frame(i).resize(h, w)).collect();
    VideoTensor::new(frames, cfg.target_fps, v.source_id().to_owned())
}

/// Source frame indices chosen when resampling `len` frames from `src` to `dst` fps.
///
/// The output holds `floor(len * dst / src)` frames (at least one); output
/// frame `k` takes the source frame nearest to time `k / dst`, rounding
/// half-way cases up.
pub fn nearest_frame_indices(len: usize, src: Fps, dst: Fps) -> Vec<usize> {
    // source index of output k = k * (src.num * dst.den) / (src.den * dst.num)
    let a = src.num as u128 * dst.den as u128;
    let b = src.den as u128 * dst.num as u128;
    let out_len = ((len as u128 * b) / a).max(1) as usize;
    (0..out_len)
        .map(|k| {
            let idx = (2 * k as u128 * a + b) / (2 * b);
            (idx as usize).min(len - 1)
        })
        .collect()
}

/// Quantizes a pixel to the 8-bit code stored in raw files.
#[inline]
pub fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Serializes `v` into the raw container. Pixels are quantized to 8 bits, so
/// the round trip is exact for tensors whose pixels are multiples of 1/255
/// (everything produced by [`ingest`]).
pub fn encode_raw(v: &VideoTensor) -> Result<Vec<u8>> {
    if v.frames.is_empty() {
        return Err(Error::EmptyVideo);
    }
    let to_u32 = |n: usize, what: &str| {
        u32::try_from(n).map_err(|_| Error::InvalidConfig(format!("{what} {n} does not fit in 32 bits")))
    };
    let mut out = Vec::with_capacity(RAW_HEADER_LEN + v.len() * v.height * v.width);
    out.extend_from_slice(RAW_MAGIC);
    out.extend_from_slice(&to_u32(v.height, "height")?.to_le_bytes());
    out.extend_from_slice(&to_u32(v.width, "width")?.to_le_bytes());
    out.extend_from_slice(&to_u32(v.len(), "frame count")?.to_le_bytes());
    out.extend_from_slice(&v.fps.num.to_le_bytes());
    out.extend_from_slice(&v.fps.den.to_le_bytes());
    for f in &v.frames {
        out.extend(f.data().iter().map(|&p| quantize(p)));
    }
    Ok(out)
}

pub fn write_raw(v: &VideoTensor, path: impl AsRef<Path>) -> Result<()> {
    let bytes = encode_raw(v)?;
    let mut file = fs::File::create(path)?;
    file.write_all(&bytes)?;
    file.sync_all()?;
    Ok(())
}

fn read_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap())
}

fn decode_raw(bytes: &[u8]) -> Result<VideoTensor> {
    if bytes.len() < RAW_HEADER_LEN {
        return Err(Error::CorruptStream("raw header is truncated".into()));
    }
    let height = read_u32(bytes, 4) as usize;
    let width = read_u32(bytes, 8) as usize;
    let count = read_u32(bytes, 12) as usize;
    let fps = Fps::new(read_u32(bytes, 16), read_u32(bytes, 20));
    if count == 0 {
        return Err(Error::EmptyVideo);
    }
    if height == 0 || width == 0 || !fps.is_valid() {
        return Err(Error::CorruptStream("raw header has zero dimensions or frame rate".into()));
    }
    let plane = height * width;
    let expected = RAW_HEADER_LEN + plane * count;
    if bytes.len() != expected {
        return Err(Error::CorruptStream(format!(
            "raw payload is {} bytes, header implies {}",
            bytes.len() - RAW_HEADER_LEN,
            expected - RAW_HEADER_LEN
        )));
    }
    let frames = bytes[RAW_HEADER_LEN..]
        .chunks_exact(plane)
        .map(|chunk| Frame::new(height, width, chunk.iter().map(|&b| b as f64 / 255.0).collect()))
        .collect();
    VideoTensor::new(frames, fps, String::new())
}

fn decode_y4m(bytes: &[u8]) -> Result<VideoTensor> {
    let header_end = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::CorruptStream("Y4M header has no terminating newline".into()))?;
    let header = std::str::from_utf8(&bytes[..header_end])
        .map_err(|_| Error::CorruptStream("Y4M header is not ASCII".into()))?;
    let mut width = None;
    let mut height = None;
    let mut fps = Fps::new(25, 1);
    let mut colorspace = "420";
    for tag in header.split(' ').skip(1).filter(|t| !t.is_empty()) {
        let (key, val) = tag.split_at(1);
        let bad = || Error::CorruptStream(format!("bad Y4M tag {tag:?}"));
        match key {
            "W" => width = Some(val.parse::<usize>().map_err(|_| bad())?),
            "H" => height = Some(val.parse::<usize>().map_err(|_| bad())?),
            "F" => {
                let (n, d) = val.split_once(':').ok_or_else(bad)?;
                fps = Fps::new(n.parse().map_err(|_| bad())?, d.parse().map_err(|_| bad())?);
                if !fps.is_valid() {
                    return Err(bad());
                }
            }
            "C" => colorspace = val,
            _ => {}
        }
    }
    let (width, height) = match (width, height) {
        (Some(w), Some(h)) if w > 0 && h > 0 => (w, h),
        _ => return Err(Error::CorruptStream("Y4M header lacks W or H".into())),
    };
    let chroma = match colorspace {
        "mono" => 0,
        c if c.starts_with("420") => 2 * width.div_ceil(2) * height.div_ceil(2),
        "422" => 2 * width.div_ceil(2) * height,
        "444" => 2 * width * height,
        other => return Err(Error::UnsupportedFormat(format!("Y4M colorspace {other}"))),
    };
    let luma = width * height;
    let mut frames = Vec::new();
    let mut pos = header_end + 1;
    while pos < bytes.len() {
        if !bytes[pos..].starts_with(b"FRAME") {
            return Err(Error::CorruptStream(format!("expected FRAME marker at byte {pos}")));
        }
        let line_end = bytes[pos..]
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| Error::CorruptStream("unterminated FRAME header".into()))?;
        pos += line_end + 1;
        if bytes.len() < pos + luma + chroma {
            return Err(Error::CorruptStream(format!("frame {} is truncated", frames.len())));
        }
        let plane = &bytes[pos..pos + luma];
        frames.push(Frame::new(height, width, plane.iter().map(|&b| b as f64 / 255.0).collect()));
        pos += luma + chroma;
    }
    VideoTensor::new(frames, fps, String::new())
}

/// Reads every `*.pgm` file of a directory, in lexicographic order, as one frame each.
pub fn read_pgm_sequence(dir: &Path, fps: Fps) -> Result<VideoTensor> {
    let mut paths: Vec<_> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("pgm")))
        .collect();
    paths.sort();
    let frames = paths
        .iter()
        .map(|p| decode_pgm(&fs::read(p)?).map_err(|e| match e {
            Error::CorruptStream(msg) => Error::CorruptStream(format!("{}: {msg}", p.display())),
            other => other,
        }))
        .collect::<Result<Vec<_>>>()?;
    VideoTensor::new(frames, fps, String::new())
}

/// Decodes one binary PGM (`P5`) image; 16-bit samples are big-endian.
pub fn decode_pgm(bytes: &[u8]) -> Result<Frame> {
    if !bytes.starts_with(b"P5") {
        return Err(Error::UnsupportedFormat("not a binary PGM (P5) image".into()));
    }
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in fields.iter_mut() {
        // whitespace and comments
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                Some(_) => break,
                None => return Err(Error::CorruptStream("PGM header is truncated".into())),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::CorruptStream("bad PGM header field".into()))?;
    }
    let [width, height, maxval] = fields;
    if width == 0 || height == 0 || maxval == 0 || maxval > 65535 {
        return Err(Error::CorruptStream("PGM header values out of range".into()));
    }
    // exactly one whitespace byte separates the header from the raster
    pos += 1;
    let depth = if maxval < 256 { 1 } else { 2 };
    let need = width * height * depth;
    let raster = bytes
        .get(pos..pos + need)
        .ok_or_else(|| Error::CorruptStream("PGM raster is truncated".into()))?;
    let scale = maxval as f64;
    let data = if depth == 1 {
        raster.iter().map(|&b| (b as f64 / scale).min(1.0)).collect()
    } else {
        raster.chunks_exact(2).map(|c| (u16::from_be_bytes([c[0], c[1]]) as f64 / scale).min(1.0)).collect()
    };
    Ok(Frame::new(height, width, data))
}

/// Encodes an 8-bit binary PGM; used by tests and examples to build sequences.
pub fn encode_pgm(frame: &Frame) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", frame.width(), frame.height()).into_bytes();
    out.extend(frame.data().iter().map(|&p| quantize(p)));
    out
}
