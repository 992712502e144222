//! Frames, videos, sliding-window blocks and the in-memory dataset manifest.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};

pub const NUM_CLASSES: usize = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ExpressionLabel {
    Neutral = 0,
    Angry = 1,
    Disgust = 2,
    Fear = 3,
    Happy = 4,
    Sad = 5,
    Surprise = 6,
}

impl ExpressionLabel {
    pub const ALL: [ExpressionLabel; NUM_CLASSES] = [
        ExpressionLabel::Neutral,
        ExpressionLabel::Angry,
        ExpressionLabel::Disgust,
        ExpressionLabel::Fear,
        ExpressionLabel::Happy,
        ExpressionLabel::Sad,
        ExpressionLabel::Surprise,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Result<Self> {
        Self::ALL
            .get(index)
            .copied()
            .ok_or_else(|| Error::Range(format!("expression index {index} outside 0..=6")))
    }

    pub fn name(self) -> &'static str {
        match self {
            ExpressionLabel::Neutral => "Neutral",
            ExpressionLabel::Angry => "Angry",
            ExpressionLabel::Disgust => "Disgust",
            ExpressionLabel::Fear => "Fear",
            ExpressionLabel::Happy => "Happy",
            ExpressionLabel::Sad => "Sad",
            ExpressionLabel::Surprise => "Surprise",
        }
    }
}

impl core::str::FromStr for ExpressionLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|l| l.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Range(format!("unknown expression `{s}`")))
    }
}

impl core::fmt::Display for ExpressionLabel {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.name())
    }
}

/// Valence and arousal, both in `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VaAnnotation {
    valence: f64,
    arousal: f64,
}

impl VaAnnotation {
    pub fn new(valence: f64, arousal: f64) -> Result<Self> {
        for (name, v) in [("valence", valence), ("arousal", arousal)] {
            if !(-1.0..=1.0).contains(&v) {
                return Err(Error::Range(format!("{name} {v} outside [-1, 1]")));
            }
        }
        Ok(Self { valence, arousal })
    }

    pub fn valence(&self) -> f64 {
        self.valence
    }

    pub fn arousal(&self) -> f64 {
        self.arousal
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameRecord {
    pub video_id: String,
    pub frame_index: u32,
    /// Payload location relative to the manifest.
    pub payload_ref: String,
    pub expression: Option<ExpressionLabel>,
    pub va: Option<VaAnnotation>,
}

impl FrameRecord {
    pub fn key(&self) -> FrameKey {
        (self.video_id.clone(), self.frame_index)
    }
}

/// `(video_id, frame_index)`.
pub type FrameKey = (String, u32);

#[derive(Debug, Clone, PartialEq)]
pub struct VideoSequence {
    video_id: String,
    frames: Vec<FrameRecord>,
}

impl VideoSequence {
    /// Frames must belong to `video_id` and have strictly increasing indices.
    pub fn new(video_id: String, frames: Vec<FrameRecord>) -> Result<Self> {
        for f in &frames {
            if f.video_id != video_id {
                return Err(Error::Validation(format!(
                    "frame {} belongs to video `{}`, not `{video_id}`",
                    f.frame_index, f.video_id
                )));
            }
        }
        for w in frames.windows(2) {
            if w[1].frame_index <= w[0].frame_index {
                return Err(Error::Validation(format!(
                    "video `{video_id}`: frame index {} follows {}",
                    w[1].frame_index, w[0].frame_index
                )));
            }
        }
        Ok(Self { video_id, frames })
    }

    pub fn video_id(&self) -> &str {
        &self.video_id
    }

    pub fn frames(&self) -> &[FrameRecord] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

/// The current frame and its `s − 1` predecessors, oldest first.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameBlock<'a> {
    frames: Vec<&'a FrameRecord>,
}

impl<'a> FrameBlock<'a> {
    pub fn frames(&self) -> &[&'a FrameRecord] {
        &self.frames
    }

    pub fn current(&self) -> &'a FrameRecord {
        self.frames[self.frames.len() - 1]
    }

    pub fn window(&self) -> usize {
        self.frames.len()
    }
}

/// Positions `k−s+1 ..= k` clamped at the start of the video.
pub fn block_positions(k: usize, s: usize) -> impl Iterator<Item = usize> {
    (0..s).map(move |i| (k + i + 1).saturating_sub(s))
}

/// One block per frame of `video`, never crossing the video boundary.
pub fn build_blocks(video: &VideoSequence, s: usize) -> Result<Vec<FrameBlock<'_>>> {
    if s == 0 {
        return Err(Error::InvalidInput("window size must be at least 1".into()));
    }
    if video.is_empty() {
        return Err(Error::InvalidInput(format!("video `{}` has no frames", video.video_id)));
    }
    Ok((0..video.len())
        .map(|k| FrameBlock {
            frames: block_positions(k, s).map(|p| &video.frames[p]).collect(),
        })
        .collect())
}

/// Which annotations a loaded frame must carry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnnotationFilter {
    Expression,
    Va,
    Both,
    None,
}

impl AnnotationFilter {
    pub fn accepts(self, frame: &FrameRecord) -> bool {
        match self {
            AnnotationFilter::Expression => frame.expression.is_some(),
            AnnotationFilter::Va => frame.va.is_some(),
            AnnotationFilter::Both => frame.expression.is_some() && frame.va.is_some(),
            AnnotationFilter::None => true,
        }
    }
}

impl core::str::FromStr for AnnotationFilter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "expression" | "expr" => Ok(Self::Expression),
            "va" => Ok(Self::Va),
            "both" => Ok(Self::Both),
            "none" => Ok(Self::None),
            other => Err(Error::Config(format!("unknown annotation filter `{other}`"))),
        }
    }
}

/// Position of a frame inside a manifest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FrameRef {
    pub video: usize,
    pub position: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    descriptor_dim: usize,
    videos: Vec<VideoSequence>,
    class_index: [Vec<FrameRef>; NUM_CLASSES],
    video_lookup: BTreeMap<String, usize>,
}

impl DatasetManifest {
    pub fn new(descriptor_dim: usize, videos: Vec<VideoSequence>) -> Result<Self> {
        if descriptor_dim == 0 {
            return Err(Error::Validation("descriptor_dim must be at least 1".into()));
        }
        let mut video_lookup = BTreeMap::new();
        let mut class_index: [Vec<FrameRef>; NUM_CLASSES] = Default::default();
        for (v, video) in videos.iter().enumerate() {
            if video_lookup.insert(video.video_id.clone(), v).is_some() {
                return Err(Error::Validation(format!("video `{}` listed twice", video.video_id)));
            }
            for (position, f) in video.frames.iter().enumerate() {
                if let Some(label) = f.expression {
                    class_index[label.index()].push(FrameRef { video: v, position });
                }
            }
        }
        Ok(Self {
            descriptor_dim,
            videos,
            class_index,
            video_lookup,
        })
    }

    pub fn descriptor_dim(&self) -> usize {
        self.descriptor_dim
    }

    pub fn videos(&self) -> &[VideoSequence] {
        &self.videos
    }

    /// Frames carrying each expression label.
    pub fn class_index(&self) -> &[Vec<FrameRef>; NUM_CLASSES] {
        &self.class_index
    }

    pub fn frame(&self, r: FrameRef) -> &FrameRecord {
        &self.videos[r.video].frames[r.position]
    }

    pub fn num_frames(&self) -> usize {
        self.videos.iter().map(VideoSequence::len).sum()
    }

    pub fn locate(&self, video_id: &str, frame_index: u32) -> Option<FrameRef> {
        let v = *self.video_lookup.get(video_id)?;
        let position = self.videos[v]
            .frames
            .binary_search_by_key(&frame_index, |f| f.frame_index)
            .ok()?;
        Some(FrameRef { video: v, position })
    }

    pub fn frame_refs(&self) -> impl Iterator<Item = FrameRef> + '_ {
        self.videos.iter().enumerate().flat_map(|(v, video)| {
            (0..video.len()).map(move |position| FrameRef { video: v, position })
        })
    }

    /// Keeps only frames accepted by `filter`, dropping videos left empty.
    pub fn filter(&self, filter: AnnotationFilter) -> Result<Self> {
        let videos: Vec<VideoSequence> = self
            .videos
            .iter()
            .filter_map(|v| {
                let frames: Vec<FrameRecord> =
                    v.frames.iter().filter(|f| filter.accepts(f)).cloned().collect();
                (!frames.is_empty()).then(|| VideoSequence {
                    video_id: v.video_id.clone(),
                    frames,
                })
            })
            .collect();
        if videos.is_empty() {
            return Err(Error::EmptyDataset(format!(
                "no frames satisfy the {filter:?} annotation filter"
            )));
        }
        Self::new(self.descriptor_dim, videos)
    }

    /// Frames accepted by `filter`, bucketed by expression label.
    pub fn class_index_where(&self, filter: AnnotationFilter) -> [Vec<FrameRef>; NUM_CLASSES] {
        let mut out: [Vec<FrameRef>; NUM_CLASSES] = Default::default();
        for (c, refs) in self.class_index.iter().enumerate() {
            out[c] = refs
                .iter()
                .copied()
                .filter(|r| filter.accepts(self.frame(*r)))
                .collect();
        }
        out
    }

    pub fn has_va(&self) -> bool {
        self.videos.iter().flat_map(|v| &v.frames).any(|f| f.va.is_some())
    }

    pub fn has_expression(&self) -> bool {
        self.class_index.iter().any(|c| !c.is_empty())
    }
}
