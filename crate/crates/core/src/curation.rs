//! Offline clip curation over precomputed per-frame features.
//!
//! A stream is cut into scenes wherever consecutive colour histograms jump,
//! low-motion runs inside each scene become calm segments, and calm segments
//! are sliced into back-to-back fixed-length clips.

use serde::Serialize;
use thiserror::Error;

pub const DEFAULT_THETA_HIST: f64 = 0.4;
pub const DEFAULT_THETA_MOTION: f64 = 0.5;
pub const DEFAULT_MERGE_WINDOW_S: f64 = 1.0;
pub const DEFAULT_MIN_CALM_S: f64 = 180.0;
pub const DEFAULT_CLIP_LEN_S: f64 = 180.0;

const HIST_SUM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CurationError {
    #[error("frame {index}: histogram sums to {sum}, expected 1")]
    HistogramSum { index: usize, sum: f64 },
    #[error("frame {index}: negative or non-finite histogram entry")]
    HistogramEntry { index: usize },
    #[error("frame {index}: motion must be finite and non-negative")]
    Motion { index: usize },
    #[error("frame {index}: timestamps must be strictly increasing")]
    Timestamp { index: usize },
    #[error("frame {index}: expected {expected} histogram bins, found {found}")]
    BinCount {
        index: usize,
        expected: usize,
        found: usize,
    },
    #[error("threshold `{0}` must be positive")]
    Threshold(&'static str),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameFeature {
    pub t: f64,
    pub histogram: Vec<f64>,
    pub motion: f64,
}

/// A validated run of frames from one source video.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureStream {
    id: String,
    bins: usize,
    frames: Vec<FrameFeature>,
}

impl FeatureStream {
    pub fn new(id: impl Into<String>, bins: usize, frames: Vec<FrameFeature>) -> Result<Self, CurationError> {
        for (index, f) in frames.iter().enumerate() {
            if f.histogram.len() != bins {
                return Err(CurationError::BinCount {
                    index,
                    expected: bins,
                    found: f.histogram.len(),
                });
            }
            if f.histogram.iter().any(|h| !h.is_finite() || *h < 0.0) {
                return Err(CurationError::HistogramEntry { index });
            }
            let sum: f64 = f.histogram.iter().sum();
            if (sum - 1.0).abs() > HIST_SUM_TOLERANCE {
                return Err(CurationError::HistogramSum { index, sum });
            }
            if !f.motion.is_finite() || f.motion < 0.0 {
                return Err(CurationError::Motion { index });
            }
            if !f.t.is_finite() || (index > 0 && f.t <= frames[index - 1].t) {
                return Err(CurationError::Timestamp { index });
            }
        }
        Ok(Self {
            id: id.into(),
            bins,
            frames,
        })
    }

    /// Parses the text format: a `#H=<bins>` header, then one
    /// `t<TAB>motion<TAB>h0,h1,...` line per frame. Other `#` lines are comments.
    pub fn parse(id: impl Into<String>, text: &str) -> Result<Self, CurationError> {
        let mut bins = None;
        let mut frames = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                if let Some(h) = rest.trim().strip_prefix("H=") {
                    let h: usize = h.trim().parse().map_err(|_| CurationError::Parse {
                        line: line_no,
                        msg: format!("bad bin count `{h}`"),
                    })?;
                    bins = Some(h);
                }
                continue;
            }
            let Some(bins) = bins else {
                return Err(CurationError::Parse {
                    line: line_no,
                    msg: "missing `#H=<bins>` header".into(),
                });
            };
            let fields: Vec<&str> = line.split('\t').collect();
            let [t, motion, hist] = fields[..] else {
                return Err(CurationError::Parse {
                    line: line_no,
                    msg: "expected `t<TAB>motion<TAB>h0,h1,...`".into(),
                });
            };
            let num = |s: &str| {
                s.trim().parse::<f64>().map_err(|_| CurationError::Parse {
                    line: line_no,
                    msg: format!("bad number `{s}`"),
                })
            };
            let histogram = hist.split(',').map(num).collect::<Result<Vec<_>, _>>()?;
            if histogram.len() != bins {
                return Err(CurationError::Parse {
                    line: line_no,
                    msg: format!("expected {bins} histogram bins, found {}", histogram.len()),
                });
            }
            frames.push(FrameFeature {
                t: num(t)?,
                motion: num(motion)?,
                histogram,
            });
        }
        let bins = bins.ok_or(CurationError::Parse {
            line: 0,
            msg: "missing `#H=<bins>` header".into(),
        })?;
        Self::new(id, bins, frames)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn frames(&self) -> &[FrameFeature] {
        &self.frames
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SceneBoundary {
    pub t: f64,
    #[serde(skip)]
    pub(crate) frame: usize,
}

impl SceneBoundary {
    /// Index of the first frame of the new scene.
    pub fn frame(&self) -> usize {
        self.frame
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CalmSegment {
    pub start_s: f64,
    pub end_s: f64,
}

impl CalmSegment {
    pub fn duration(&self) -> f64 {
        self.end_s - self.start_s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Clip {
    pub clip_id: String,
    pub source: String,
    pub start_s: f64,
    pub end_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurationParams {
    pub theta_hist: f64,
    pub merge_window_s: f64,
    pub theta_motion: f64,
    pub min_calm_s: f64,
    pub clip_len_s: f64,
}

impl Default for CurationParams {
    fn default() -> Self {
        Self {
            theta_hist: DEFAULT_THETA_HIST,
            merge_window_s: DEFAULT_MERGE_WINDOW_S,
            theta_motion: DEFAULT_THETA_MOTION,
            min_calm_s: DEFAULT_MIN_CALM_S,
            clip_len_s: DEFAULT_CLIP_LEN_S,
        }
    }
}

fn positive(v: f64, name: &'static str) -> Result<(), CurationError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(CurationError::Threshold(name))
    }
}

pub fn l1_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// Boundaries where the L1 histogram distance to the previous frame exceeds
/// `theta_hist`. A boundary closer than `merge_window_s` to the last kept one
/// is dropped.
pub fn detect_scenes(
    frames: &[FrameFeature],
    theta_hist: f64,
    merge_window_s: f64,
) -> Result<Vec<SceneBoundary>, CurationError> {
    positive(theta_hist, "theta_hist")?;
    if !(merge_window_s.is_finite() && merge_window_s >= 0.0) {
        return Err(CurationError::Threshold("merge_window_s"));
    }
    let mut out: Vec<SceneBoundary> = Vec::new();
    for i in 1..frames.len() {
        if l1_distance(&frames[i].histogram, &frames[i - 1].histogram) <= theta_hist {
            continue;
        }
        let t = frames[i].t;
        if out.last().is_some_and(|b| t - b.t < merge_window_s) {
            continue;
        }
        out.push(SceneBoundary { t, frame: i });
    }
    Ok(out)
}

/// Extent of frame `i`: up to the next frame, or one trailing interval past the last.
fn frame_end(frames: &[FrameFeature], i: usize) -> f64 {
    match frames.get(i + 1) {
        Some(next) => next.t,
        None if i > 0 => frames[i].t + (frames[i].t - frames[i - 1].t),
        None => frames[i].t,
    }
}

/// Maximal runs of frames with `motion <= theta_motion`, split at scene
/// boundaries, kept when they last at least `min_dur_s`.
///
/// Each frame covers `[t_i, t_{i+1})`; the last frame is given the length of
/// the interval before it.
pub fn detect_calm_segments(
    frames: &[FrameFeature],
    boundaries: &[SceneBoundary],
    theta_motion: f64,
    min_dur_s: f64,
) -> Result<Vec<CalmSegment>, CurationError> {
    positive(theta_motion, "theta_motion")?;
    positive(min_dur_s, "min_dur_s")?;
    let mut cuts: Vec<usize> = boundaries.iter().map(|b| b.frame).collect();
    cuts.retain(|&c| c > 0 && c < frames.len());
    let mut scene_starts = vec![0];
    scene_starts.extend(cuts);
    scene_starts.push(frames.len());
    scene_starts.dedup();

    let mut out = Vec::new();
    for w in scene_starts.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let mut run_start: Option<usize> = None;
        for i in lo..=hi {
            let calm = i < hi && frames[i].motion <= theta_motion;
            match (calm, run_start) {
                (true, None) => run_start = Some(i),
                (false, Some(s)) => {
                    let seg = CalmSegment {
                        start_s: frames[s].t,
                        end_s: frame_end(frames, i - 1),
                    };
                    if seg.duration() >= min_dur_s {
                        out.push(seg);
                    }
                    run_start = None;
                }
                _ => {}
            }
        }
    }
    Ok(out)
}

/// Cuts each segment into consecutive `clip_len_s` clips, dropping the
/// remainder. Ids are `<stream>#<n>` with `n` counting across all segments.
pub fn partition_clips(source: &str, segments: &[CalmSegment], clip_len_s: f64) -> Result<Vec<Clip>, CurationError> {
    positive(clip_len_s, "clip_len_s")?;
    let mut out = Vec::new();
    for seg in segments {
        let n = clips_in(seg, clip_len_s);
        for k in 0..n {
            let start_s = seg.start_s + k as f64 * clip_len_s;
            out.push(Clip {
                clip_id: format!("{source}#{}", out.len()),
                source: source.to_string(),
                start_s,
                end_s: start_s + clip_len_s,
            });
        }
    }
    Ok(out)
}

fn clips_in(seg: &CalmSegment, clip_len_s: f64) -> usize {
    let d = seg.duration();
    if d.is_nan() || d <= 0.0 {
        return 0;
    }
    let mut n = (d / clip_len_s).floor() as usize;
    // Guard against the quotient rounding up past the segment end.
    while n > 0 && seg.start_s + n as f64 * clip_len_s > seg.end_s {
        n -= 1;
    }
    n
}

/// Scenes, calm segments and clips produced from one stream.
#[derive(Debug, Clone, PartialEq)]
pub struct Curation {
    pub boundaries: Vec<SceneBoundary>,
    pub segments: Vec<CalmSegment>,
    pub clips: Vec<Clip>,
}

pub fn curate(stream: &FeatureStream, params: &CurationParams) -> Result<Curation, CurationError> {
    let boundaries = detect_scenes(stream.frames(), params.theta_hist, params.merge_window_s)?;
    let segments = detect_calm_segments(stream.frames(), &boundaries, params.theta_motion, params.min_calm_s)?;
    let clips = partition_clips(stream.id(), &segments, params.clip_len_s)?;
    Ok(Curation {
        boundaries,
        segments,
        clips,
    })
}

/// `clip_id<TAB>start_s<TAB>end_s` lines.
pub fn clips_to_tsv(clips: &[Clip]) -> String {
    clips
        .iter()
        .map(|c| format!("{}\t{}\t{}\n", c.clip_id, c.start_s, c.end_s))
        .collect()
}
