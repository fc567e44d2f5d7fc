//! Dense image and parameter-field containers.
//!
//! Every container is row-major with the innermost axis being the channel
//! (for [`Frame`]) or the per-pixel parameter index (for [`Field`]).

use crate::error::{Error, Result};

fn check_finite(data: &[f64]) -> Result<()> {
    match data.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(Error::NonFinite(i)),
        None => Ok(()),
    }
}

fn check_dims(dims: &[(&str, usize)]) -> Result<()> {
    for (name, v) in dims {
        if *v == 0 {
            return Err(Error::Domain(format!("{name} must be positive")));
        }
    }
    Ok(())
}

/// A single image (or image-shaped feature map) in double precision.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f64>,
}

impl Frame {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        check_dims(&[("height", height), ("width", width), ("channels", channels)])?;
        let expected = height * width * channels;
        if data.len() != expected {
            return Err(Error::Size {
                expected,
                actual: data.len(),
            });
        }
        check_finite(&data)?;
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn zeros(height: usize, width: usize, channels: usize) -> Self {
        Self::filled(height, width, channels, 0.0)
    }

    pub fn filled(height: usize, width: usize, channels: usize, value: f64) -> Self {
        assert!(height > 0 && width > 0 && channels > 0, "empty frame");
        assert!(value.is_finite());
        Self {
            height,
            width,
            channels,
            data: vec![value; height * width * channels],
        }
    }

    /// Builds a frame from 8-bit samples, mapping each byte `b` to `b / 255`.
    pub fn from_bytes(height: usize, width: usize, channels: usize, bytes: &[u8]) -> Result<Self> {
        let data = bytes.iter().map(|&b| f64::from(b) / 255.0).collect();
        Self::new(height, width, channels, data)
    }

    /// Quantizes to 8 bits: clamp to [0,1], scale by 255, round half up.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.data
            .iter()
            .map(|&v| (v.clamp(0.0, 1.0) * 255.0 + 0.5).floor() as u8)
            .collect()
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.channels
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn index(&self, row: usize, col: usize, channel: usize) -> usize {
        (row * self.width + col) * self.channels + channel
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize, channel: usize) -> f64 {
        self.data[self.index(row, col, channel)]
    }

    /// Mutable access for builders inside the crate. Callers must keep values finite.
    #[inline]
    pub(crate) fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Returns a copy with one element replaced. Used by finite-difference checks.
    pub fn with_value(&self, flat_index: usize, value: f64) -> Result<Self> {
        if flat_index >= self.data.len() {
            return Err(Error::Index(format!("element {flat_index} out of range")));
        }
        let mut out = self.clone();
        out.data[flat_index] = value;
        check_finite(&out.data[flat_index..=flat_index])?;
        Ok(out)
    }

    pub fn same_shape(&self, other: &Frame) -> bool {
        self.shape() == other.shape()
    }

    pub(crate) fn ensure_same_shape(&self, other: &Frame, what: &str) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::Shape(format!(
                "{what}: {:?} vs {:?}",
                self.shape(),
                other.shape()
            )))
        }
    }
}

/// An ordered, time-stamped set of `T+1` source frames of one shape.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameStack {
    frames: Vec<Frame>,
    times: Vec<f64>,
}

impl FrameStack {
    /// Builds a stack. When `times` is `None` the frames are stamped `0, 1, ..., T`.
    pub fn new(frames: Vec<Frame>, times: Option<Vec<f64>>) -> Result<Self> {
        if frames.len() < 2 {
            return Err(Error::Arity(format!(
                "a frame stack needs at least 2 frames, got {}",
                frames.len()
            )));
        }
        let shape = frames[0].shape();
        if let Some(bad) = frames.iter().find(|f| f.shape() != shape) {
            return Err(Error::Shape(format!(
                "stack frames differ: {:?} vs {:?}",
                shape,
                bad.shape()
            )));
        }
        let times = match times {
            Some(t) => {
                if t.len() != frames.len() {
                    return Err(Error::Arity(format!(
                        "{} timestamps for {} frames",
                        t.len(),
                        frames.len()
                    )));
                }
                check_finite(&t)?;
                if t.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::Domain("timestamps must be strictly increasing".into()));
                }
                t
            }
            None => (0..frames.len()).map(|i| i as f64).collect(),
        };
        Ok(Self { frames, times })
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `T`, the largest temporal index.
    pub fn t_max(&self) -> usize {
        self.frames.len() - 1
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        self.frames[0].shape()
    }

    /// A sub-stack holding the selected frames (and their timestamps) in the given order.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let mut frames = Vec::with_capacity(indices.len());
        let mut times = Vec::with_capacity(indices.len());
        for &i in indices {
            let f = self
                .frames
                .get(i)
                .ok_or_else(|| Error::Index(format!("frame {i} not in a stack of {}", self.len())))?;
            frames.push(f.clone());
            times.push(self.times[i]);
        }
        Self::new(frames, Some(times))
    }

    /// Maps a physical time onto the fractional index axis by piecewise-linear
    /// interpolation over the stack timestamps.
    pub fn time_to_index(&self, t: f64) -> Result<f64> {
        let first = self.times[0];
        let last = *self.times.last().unwrap();
        if !(first..=last).contains(&t) {
            return Err(Error::Domain(format!(
                "time {t} outside stack range [{first}, {last}]"
            )));
        }
        for (i, w) in self.times.windows(2).enumerate() {
            if t <= w[1] {
                return Ok(i as f64 + (t - w[0]) / (w[1] - w[0]));
            }
        }
        Ok(self.t_max() as f64)
    }

    pub(crate) fn with_frame(&self, index: usize, frame: Frame) -> Self {
        let mut out = self.clone();
        out.frames[index] = frame;
        out
    }
}

/// A per-pixel parameter map: `height x width` pixels, `depth` values each.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    height: usize,
    width: usize,
    depth: usize,
    data: Vec<f64>,
}

impl Field {
    pub fn new(height: usize, width: usize, depth: usize, data: Vec<f64>) -> Result<Self> {
        check_dims(&[("height", height), ("width", width), ("depth", depth)])?;
        let expected = height * width * depth;
        if data.len() != expected {
            return Err(Error::Size {
                expected,
                actual: data.len(),
            });
        }
        check_finite(&data)?;
        Ok(Self {
            height,
            width,
            depth,
            data,
        })
    }

    pub fn filled(height: usize, width: usize, depth: usize, value: f64) -> Self {
        assert!(height > 0 && width > 0 && depth > 0, "empty field");
        assert!(value.is_finite());
        Self {
            height,
            width,
            depth,
            data: vec![value; height * width * depth],
        }
    }

    pub fn zeros(height: usize, width: usize, depth: usize) -> Self {
        Self::filled(height, width, depth, 0.0)
    }

    /// Builds a field by evaluating `f(row, col, k)` at every entry.
    pub fn from_fn(
        height: usize,
        width: usize,
        depth: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(height * width * depth);
        for r in 0..height {
            for c in 0..width {
                for k in 0..depth {
                    data.push(f(r, c, k));
                }
            }
        }
        Self::new(height, width, depth, data)
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn depth(&self) -> usize {
        self.depth
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub(crate) fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn index(&self, row: usize, col: usize, k: usize) -> usize {
        (row * self.width + col) * self.depth + k
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize, k: usize) -> f64 {
        self.data[self.index(row, col, k)]
    }

    /// The `depth` values stored at one pixel.
    #[inline]
    pub fn pixel(&self, row: usize, col: usize) -> &[f64] {
        let start = (row * self.width + col) * self.depth;
        &self.data[start..start + self.depth]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(
            self.height,
            self.width,
            self.depth,
            self.data.iter().map(|&v| f(v)).collect(),
        )
    }

    pub fn with_value(&self, flat_index: usize, value: f64) -> Result<Self> {
        if flat_index >= self.data.len() {
            return Err(Error::Index(format!("element {flat_index} out of range")));
        }
        let mut out = self.clone();
        out.data[flat_index] = value;
        check_finite(&out.data[flat_index..=flat_index])?;
        Ok(out)
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.depth)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn bytes_map_to_unit_interval() {
        let f = Frame::from_bytes(1, 1, 1, &[255]).unwrap();
        assert_eq!(f.data(), &[1.0]);
        let f = Frame::from_bytes(1, 2, 1, &[0, 127]).unwrap();
        assert_eq!(f.data(), &[0.0, 127.0 / 255.0]);
    }

    #[test]
    fn byte_count_mismatch_is_size_error() {
        let err = Frame::from_bytes(2, 2, 1, &[1, 2, 3]).unwrap_err();
        assert!(matches!(err, Error::Size { expected: 4, actual: 3 }));
    }

    #[test]
    fn non_finite_rejected() {
        assert!(matches!(
            Frame::new(1, 2, 1, vec![0.0, f64::NAN]),
            Err(Error::NonFinite(1))
        ));
        assert!(Field::new(1, 1, 1, vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn stack_default_times() {
        let s = FrameStack::new(vec![Frame::zeros(4, 4, 1), Frame::zeros(4, 4, 1)], None).unwrap();
        assert_eq!(s.times(), &[0.0, 1.0]);
        assert_eq!(s.t_max(), 1);
    }

    #[test]
    fn four_frame_stack() {
        let frames = vec![Frame::zeros(3, 3, 3); 4];
        let s = FrameStack::new(frames, Some(vec![0.0, 1.0, 2.0, 3.0])).unwrap();
        assert_eq!(s.t_max(), 3);
    }

    #[test]
    fn stack_rejects_mismatched_width() {
        let err = FrameStack::new(vec![Frame::zeros(4, 4, 1), Frame::zeros(4, 5, 1)], None).unwrap_err();
        assert!(matches!(err, Error::Shape(_)));
    }

    #[test]
    fn stack_rejects_bad_times() {
        let frames = vec![Frame::zeros(2, 2, 1); 3];
        assert!(matches!(
            FrameStack::new(frames.clone(), Some(vec![0.0, 1.0, 1.0])),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            FrameStack::new(frames.clone(), Some(vec![0.0, 1.0])),
            Err(Error::Arity(_))
        ));
        assert!(matches!(FrameStack::new(frames[..1].to_vec(), None), Err(Error::Arity(_))));
    }

    #[test]
    fn time_to_index_handles_uneven_spacing() {
        let frames = vec![Frame::zeros(2, 2, 1); 3];
        let s = FrameStack::new(frames, Some(vec![0.0, 2.0, 3.0])).unwrap();
        assert_eq!(s.time_to_index(1.0).unwrap(), 0.5);
        assert_eq!(s.time_to_index(2.5).unwrap(), 1.5);
        assert_eq!(s.time_to_index(3.0).unwrap(), 2.0);
        assert!(s.time_to_index(3.5).is_err());
    }

    proptest! {
        #[test]
        fn byte_round_trip(bytes in proptest::collection::vec(any::<u8>(), 12)) {
            let f = Frame::from_bytes(2, 2, 3, &bytes).unwrap();
            prop_assert_eq!(f.to_bytes(), bytes);
        }

        #[test]
        fn stack_preserves_order(n in 2usize..6, start in -5.0f64..5.0) {
            let frames: Vec<Frame> = (0..n).map(|i| Frame::filled(2, 2, 1, i as f64)).collect();
            let times: Vec<f64> = (0..n).map(|i| start + 0.5 * i as f64).collect();
            let s = FrameStack::new(frames, Some(times.clone())).unwrap();
            for i in 0..n {
                prop_assert_eq!(s.frames()[i].get(0, 0, 0), i as f64);
                prop_assert_eq!(s.times()[i], times[i]);
            }
        }
    }
}
