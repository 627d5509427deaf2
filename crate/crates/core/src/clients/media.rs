//! Minimal raster formats used by the mock backends and the stitching code.
//!
//! Images are binary PPM (`P6`, maxval 255). Clips use a small container:
//!
//! ```text
//! b"MCLP" | u32 width | u32 height | u32 fps | u32 frame_count | frames…
//! ```
//!
//! all integers little-endian, each frame `width * height * 3` RGB bytes.

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MediaError {
    #[error("not a binary PPM image: {0}")]
    BadImage(String),
    #[error("not a clip container: {0}")]
    BadClip(String),
    #[error("frame dimensions {0}x{1} do not match {2}x{3}")]
    SizeMismatch(u32, u32, u32, u32),
    #[error("frame index {index} out of range for clip of {len} frames")]
    FrameOutOfRange { index: usize, len: usize },
}

/// Upper bound on decoded pixel count, guarding against hostile headers.
const MAX_PIXELS: u64 = 1 << 24;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image {
    pub width: u32,
    pub height: u32,
    pub rgb: Vec<u8>,
}

impl Image {
    pub fn filled(width: u32, height: u32, color: [u8; 3]) -> Self {
        let rgb = color.iter().copied().cycle().take((width * height * 3) as usize).collect();
        Self { width, height, rgb }
    }

    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        let i = ((y * self.width + x) * 3) as usize;
        [self.rgb[i], self.rgb[i + 1], self.rgb[i + 2]]
    }

    pub fn set_pixel(&mut self, x: u32, y: u32, c: [u8; 3]) {
        if x < self.width && y < self.height {
            let i = ((y * self.width + x) * 3) as usize;
            self.rgb[i..i + 3].copy_from_slice(&c);
        }
    }

    pub fn fill_rect(&mut self, x0: u32, y0: u32, w: u32, h: u32, c: [u8; 3]) {
        for y in y0..y0.saturating_add(h) {
            for x in x0..x0.saturating_add(w) {
                self.set_pixel(x, y, c);
            }
        }
    }

    pub fn encode_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.rgb);
        out
    }

    pub fn decode_ppm(bytes: &[u8]) -> Result<Self, MediaError> {
        let bad = |m: &str| MediaError::BadImage(m.to_string());
        let mut pos = 0usize;
        let mut fields = [0u64; 3];
        if bytes.get(..2) != Some(b"P6") {
            return Err(bad("missing P6 magic"));
        }
        pos += 2;
        for field in fields.iter_mut() {
            // whitespace and comments
            loop {
                match bytes.get(pos) {
                    Some(b) if b.is_ascii_whitespace() => pos += 1,
                    Some(b'#') => {
                        while !matches!(bytes.get(pos), None | Some(b'\n')) {
                            pos += 1;
                        }
                    }
                    _ => break,
                }
            }
            let start = pos;
            while matches!(bytes.get(pos), Some(b) if b.is_ascii_digit()) {
                pos += 1;
                if pos - start > 9 {
                    return Err(bad("header value too large"));
                }
            }
            if start == pos {
                return Err(bad("expected header integer"));
            }
            *field = std::str::from_utf8(&bytes[start..pos]).unwrap().parse().unwrap();
        }
        if !matches!(bytes.get(pos), Some(b) if b.is_ascii_whitespace()) {
            return Err(bad("missing separator after header"));
        }
        pos += 1;
        let [w, h, maxval] = fields;
        if maxval != 255 {
            return Err(bad("only maxval 255 supported"));
        }
        if w == 0 || h == 0 || w * h > MAX_PIXELS {
            return Err(bad("unsupported dimensions"));
        }
        let len = (w * h * 3) as usize;
        let rgb = bytes.get(pos..pos + len).ok_or_else(|| bad("truncated pixel data"))?;
        if bytes.len() != pos + len {
            return Err(bad("trailing bytes"));
        }
        Ok(Self { width: w as u32, height: h as u32, rgb: rgb.to_vec() })
    }

    /// Per-channel linear blend, `t = 0` giving `self` and `t = 1` giving `other`.
    pub fn lerp(&self, other: &Image, t: f64) -> Result<Image, MediaError> {
        if (self.width, self.height) != (other.width, other.height) {
            return Err(MediaError::SizeMismatch(other.width, other.height, self.width, self.height));
        }
        let rgb = self
            .rgb
            .iter()
            .zip(&other.rgb)
            .map(|(&a, &b)| (a as f64 + (b as f64 - a as f64) * t).round().clamp(0.0, 255.0) as u8)
            .collect();
        Ok(Image { width: self.width, height: self.height, rgb })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Clip {
    pub width: u32,
    pub height: u32,
    pub fps: u32,
    pub frames: Vec<Image>,
}

const CLIP_MAGIC: &[u8; 4] = b"MCLP";

impl Clip {
    pub fn new(fps: u32, frames: Vec<Image>) -> Result<Self, MediaError> {
        let first = frames.first().ok_or_else(|| MediaError::BadClip("no frames".into()))?;
        let (width, height) = (first.width, first.height);
        for f in &frames {
            if (f.width, f.height) != (width, height) {
                return Err(MediaError::SizeMismatch(f.width, f.height, width, height));
            }
        }
        Ok(Self { width, height, fps, frames })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn frame(&self, index: usize) -> Result<&Image, MediaError> {
        self.frames.get(index).ok_or(MediaError::FrameOutOfRange { index, len: self.frames.len() })
    }

    pub fn encode(&self) -> Vec<u8> {
        let frame_len = (self.width * self.height * 3) as usize;
        let mut out = Vec::with_capacity(20 + frame_len * self.frames.len());
        out.extend_from_slice(CLIP_MAGIC);
        for v in [self.width, self.height, self.fps, self.frames.len() as u32] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for f in &self.frames {
            out.extend_from_slice(&f.rgb);
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, MediaError> {
        let bad = |m: &str| MediaError::BadClip(m.to_string());
        if bytes.len() < 20 || &bytes[..4] != CLIP_MAGIC {
            return Err(bad("missing header"));
        }
        let word = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap());
        let (width, height, fps, count) = (word(0), word(1), word(2), word(3));
        if width == 0 || height == 0 || count == 0 {
            return Err(bad("empty clip"));
        }
        let frame_len = width as u64 * height as u64 * 3;
        if (width as u64 * height as u64) > MAX_PIXELS {
            return Err(bad("unsupported dimensions"));
        }
        let body = &bytes[20..];
        if body.len() as u64 != frame_len * count as u64 {
            return Err(bad("frame data length mismatch"));
        }
        let frames = body.chunks_exact(frame_len as usize).map(|c| Image { width, height, rgb: c.to_vec() }).collect();
        Ok(Self { width, height, fps, frames })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn ppm_round_trip() {
        let mut img = Image::filled(4, 3, [10, 20, 30]);
        img.set_pixel(1, 2, [255, 0, 0]);
        let back = Image::decode_ppm(&img.encode_ppm()).unwrap();
        assert_eq!(back, img);
        assert_eq!(back.pixel(1, 2), [255, 0, 0]);
    }

    #[test]
    fn ppm_with_comment() {
        let mut bytes = b"P6\n# made by hand\n1 1\n255\n".to_vec();
        bytes.extend_from_slice(&[1, 2, 3]);
        assert_eq!(Image::decode_ppm(&bytes).unwrap().pixel(0, 0), [1, 2, 3]);
    }

    #[test]
    fn lerp_endpoints_exact() {
        let a = Image::filled(2, 2, [0, 100, 255]);
        let b = Image::filled(2, 2, [255, 7, 0]);
        assert_eq!(a.lerp(&b, 0.0).unwrap(), a);
        assert_eq!(a.lerp(&b, 1.0).unwrap(), b);
    }

    #[test]
    fn clip_round_trip() {
        let frames = vec![Image::filled(2, 2, [1, 1, 1]), Image::filled(2, 2, [2, 2, 2])];
        let clip = Clip::new(24, frames).unwrap();
        assert_eq!(Clip::decode(&clip.encode()).unwrap(), clip);
    }

    proptest! {
        #[test]
        fn decoders_never_panic(bytes in proptest::collection::vec(any::<u8>(), 0..256)) {
            let _ = Image::decode_ppm(&bytes);
            let _ = Clip::decode(&bytes);
        }

        #[test]
        fn ppm_header_fuzz(w in 0u32..5, h in 0u32..5, extra in 0usize..4) {
            let mut bytes = format!("P6 {w} {h} 255\n").into_bytes();
            bytes.extend(std::iter::repeat_n(7u8, (w * h * 3) as usize + extra));
            let r = Image::decode_ppm(&bytes);
            prop_assert_eq!(r.is_ok(), w > 0 && h > 0 && extra == 0);
        }
    }
}
