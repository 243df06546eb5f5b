//! Skeleton sequence data model: JSONL ingestion, frame-window
//! preprocessing, per-axis channel extraction, and a deterministic
//! synthetic gait generator used as a stand-in benchmark corpus.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{GaitError, Result};
use crate::numerics::Matrix;
use crate::rng::Rng;

pub const DEFAULT_JOINTS: usize = 20;
pub const DEFAULT_DISCARD: usize = 10;
pub const DEFAULT_SEQ_LEN: usize = 6;
pub const GENERATOR_FPS: f64 = 30.0;

/// One frame: J joints x 3 coordinates (meters), row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Skeleton {
    pub joints: Matrix,
}

impl Skeleton {
    pub fn new(joints: Matrix) -> Result<Self> {
        if joints.cols() != 3 {
            return Err(GaitError::Data(format!(
                "skeleton frame has {} coordinates per joint, expected 3",
                joints.cols()
            )));
        }
        Ok(Skeleton { joints })
    }

    pub fn joint_count(&self) -> usize {
        self.joints.rows()
    }

    /// Translates every joint so the root joint (index 0) sits at the origin.
    pub fn centered(&self) -> Skeleton {
        let mut joints = self.joints.clone();
        let root = [self.joints.get(0, 0), self.joints.get(0, 1), self.joints.get(0, 2)];
        for r in 0..joints.rows() {
            for c in 0..3 {
                let v = joints.get(r, c) - root[c];
                joints.set(r, c, v);
            }
        }
        Skeleton { joints }
    }
}

/// A fixed-length window of frames carrying its identity label (1-based).
#[derive(Debug, Clone, PartialEq)]
pub struct SkeletonSequence {
    pub frames: Vec<Skeleton>,
    pub label: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Axis::X => "X",
            Axis::Y => "Y",
            Axis::Z => "Z",
        })
    }
}

/// One coordinate axis of a sequence: f x J matrix (row t = frame t).
#[derive(Debug, Clone, PartialEq)]
pub struct AxisChannel {
    pub axis: Axis,
    pub values: Matrix,
}

/// A full video before windowing.
#[derive(Debug, Clone, PartialEq)]
pub struct RawVideo {
    pub label: usize,
    pub frames: Vec<Skeleton>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub source: Option<String>,
    pub generator_seed: Option<u64>,
    /// Videos dropped because they were shorter than one window after
    /// discarding boundary frames.
    pub short_videos_skipped: usize,
}

/// Parsed but not yet preprocessed videos.
#[derive(Debug, Clone, PartialEq)]
pub struct RawDataset {
    pub name: String,
    pub joint_count: usize,
    pub identities: usize,
    pub videos: Vec<RawVideo>,
    pub provenance: Provenance,
    /// Populated by the synthetic generator only; empty for loaded files.
    pub identity_params: Vec<GaitIdentityParams>,
}

/// Windowed sequences split into train and held-out test videos.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub joint_count: usize,
    pub identities: usize,
    pub train: Vec<SkeletonSequence>,
    pub test: Vec<SkeletonSequence>,
    pub provenance: Provenance,
}

#[derive(Serialize, Deserialize)]
struct VideoRecord {
    id: String,
    frames: Vec<Vec<[f64; 3]>>,
}

/// Reads a JSON Lines file: one video per line, {"id", "frames"} with
/// frames[t][j] = [x, y, z]. Identity labels are assigned 1..C in order
/// of first appearance of each id string.
pub fn load_raw(path: &Path) -> Result<RawDataset> {
    let file = std::fs::File::open(path)?;
    let reader = BufReader::new(file);
    let mut labels: BTreeMap<String, usize> = BTreeMap::new();
    let mut order: Vec<String> = Vec::new();
    let mut videos: Vec<RawVideo> = Vec::new();
    let mut joint_count: Option<usize> = None;

    for (line_no, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: VideoRecord = serde_json::from_str(&line).map_err(|e| {
            GaitError::Data(format!("line {}: malformed record: {}", line_no + 1, e))
        })?;
        if rec.frames.is_empty() {
            return Err(GaitError::Data(format!(
                "line {}: video '{}' has no frames",
                line_no + 1,
                rec.id
            )));
        }
        let mut frames = Vec::with_capacity(rec.frames.len());
        for frame in &rec.frames {
            let j = frame.len();
            match joint_count {
                None => joint_count = Some(j),
                Some(expect) if expect != j => {
                    return Err(GaitError::Data(format!(
                        "line {}: inconsistent joint count {} (expected {})",
                        line_no + 1,
                        j,
                        expect
                    )));
                }
                _ => {}
            }
            let data: Vec<f64> = frame.iter().flatten().copied().collect();
            let joints = Matrix::from_vec(j, 3, data)
                .map_err(|e| GaitError::Data(format!("line {}: {}", line_no + 1, e)))?;
            frames.push(Skeleton { joints });
        }
        let next_label = labels.len() + 1;
        let label = *labels.entry(rec.id.clone()).or_insert_with(|| {
            order.push(rec.id.clone());
            next_label
        });
        videos.push(RawVideo { label, frames });
    }

    if videos.is_empty() {
        return Err(GaitError::Data("empty dataset".into()));
    }
    Ok(RawDataset {
        name: path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "dataset".into()),
        joint_count: joint_count.unwrap(),
        identities: labels.len(),
        videos,
        provenance: Provenance {
            source: Some(path.display().to_string()),
            ..Provenance::default()
        },
        identity_params: Vec::new(),
    })
}

/// Writes the JSONL form read by `load_raw`. Identity ids are rendered
/// as p01, p02, ... so a save/load round trip preserves labels.
pub fn save_raw(path: &Path, raw: &RawDataset) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    for video in &raw.videos {
        let frames: Vec<Vec<[f64; 3]>> = video
            .frames
            .iter()
            .map(|s| {
                (0..s.joint_count())
                    .map(|j| [s.joints.get(j, 0), s.joints.get(j, 1), s.joints.get(j, 2)])
                    .collect()
            })
            .collect();
        let rec = VideoRecord {
            id: format!("p{:02}", video.label),
            frames,
        };
        serde_json::to_writer(&mut w, &rec)
            .map_err(|e| GaitError::Data(format!("serialize: {e}")))?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// Drops `discard` frames from each end of a video, then cuts length-f
/// windows at stride f/2. Videos left shorter than f yield no windows.
pub fn preprocess(frames: &[Skeleton], f: usize, discard: usize) -> Result<Vec<Vec<Skeleton>>> {
    if f < 2 || f % 2 != 0 {
        return Err(GaitError::Config(format!(
            "sequence length {f} must be even and at least 2"
        )));
    }
    let total = frames.len();
    if total < 2 * discard + f {
        return Ok(Vec::new());
    }
    let usable = &frames[discard..total - discard];
    let stride = f / 2;
    let mut out = Vec::new();
    let mut start = 0;
    while start + f <= usable.len() {
        out.push(usable[start..start + f].to_vec());
        start += stride;
    }
    Ok(out)
}

/// Windows every video and moves the last video of each identity to the
/// test side, mirroring a leave-one-video-out evaluation protocol.
pub fn assemble(raw: &RawDataset, f: usize, discard: usize, center: bool) -> Result<Dataset> {
    let mut last_video_idx: BTreeMap<usize, usize> = BTreeMap::new();
    for (i, v) in raw.videos.iter().enumerate() {
        last_video_idx.insert(v.label, i);
    }
    let mut train = Vec::new();
    let mut test = Vec::new();
    let mut skipped = 0usize;
    for (i, video) in raw.videos.iter().enumerate() {
        let frames: Vec<Skeleton> = if center {
            video.frames.iter().map(Skeleton::centered).collect()
        } else {
            video.frames.clone()
        };
        let windows = preprocess(&frames, f, discard)?;
        if windows.is_empty() {
            skipped += 1;
            continue;
        }
        let into_test = last_video_idx.get(&video.label) == Some(&i);
        for frames in windows {
            let seq = SkeletonSequence {
                frames,
                label: video.label,
            };
            if into_test {
                test.push(seq);
            } else {
                train.push(seq);
            }
        }
    }
    if train.is_empty() || test.is_empty() {
        return Err(GaitError::Data(format!(
            "split produced {} train / {} test sequences; need both non-empty \
             (each identity needs at least two sufficiently long videos)",
            train.len(),
            test.len()
        )));
    }
    let mut provenance = raw.provenance.clone();
    provenance.short_videos_skipped = skipped;
    Ok(Dataset {
        name: raw.name.clone(),
        joint_count: raw.joint_count,
        identities: raw.identities,
        train,
        test,
        provenance,
    })
}

/// Splits a sequence into its three coordinate channels (each f x J).
pub fn split_axes(seq: &SkeletonSequence) -> [AxisChannel; 3] {
    let f = seq.frames.len();
    let j = seq.frames.first().map_or(0, Skeleton::joint_count);
    Axis::ALL.map(|axis| {
        let mut values = Matrix::zeros(f, j);
        for (t, frame) in seq.frames.iter().enumerate() {
            for jj in 0..j {
                values.set(t, jj, frame.joints.get(jj, axis.index()));
            }
        }
        AxisChannel { axis, values }
    })
}

/// Rebuilds frames from three axis channels; inverse of `split_axes`.
pub fn merge_axes(channels: &[AxisChannel; 3]) -> Result<Vec<Skeleton>> {
    let f = channels[0].values.rows();
    let j = channels[0].values.cols();
    for c in channels {
        if c.values.rows() != f || c.values.cols() != j {
            return Err(GaitError::Shape("axis channel shapes differ".into()));
        }
    }
    let mut frames = Vec::with_capacity(f);
    for t in 0..f {
        let mut joints = Matrix::zeros(j, 3);
        for c in channels {
            for jj in 0..j {
                joints.set(jj, c.axis.index(), c.values.get(t, jj));
            }
        }
        frames.push(Skeleton { joints });
    }
    Ok(frames)
}

/// Target for reverse-order reconstruction: row t of the output is row
/// f-t+1 (1-based) of the input.
pub fn reverse_target(channel: &AxisChannel) -> AxisChannel {
    let f = channel.values.rows();
    let j = channel.values.cols();
    let mut values = Matrix::zeros(f, j);
    for t in 0..f {
        for c in 0..j {
            values.set(t, c, channel.values.get(f - 1 - t, c));
        }
    }
    AxisChannel {
        axis: channel.axis,
        values,
    }
}

/// Per-identity gait signature drawn once by the generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaitIdentityParams {
    /// Segment lengths in meters, ordered: lower spine, upper spine,
    /// neck+head, shoulder half-width, upper arm, forearm, hand,
    /// hip half-width, thigh, shin, foot.
    pub limb_lengths: Vec<f64>,
    /// Stride frequency in Hz.
    pub stride_freq: f64,
    /// Oscillation amplitudes, ordered: thigh swing (rad), knee flexion
    /// (rad), arm swing (rad), elbow flexion (rad), torso sway (m),
    /// vertical bob (m), head nod (m).
    pub amplitudes: Vec<f64>,
    /// Phase offsets (rad) matching `amplitudes`.
    pub phases: Vec<f64>,
    /// Std-dev of additive Gaussian coordinate noise (m).
    pub noise_sigma: f64,
}

impl GaitIdentityParams {
    pub fn validate(&self) -> Result<()> {
        if self.limb_lengths.len() != SEGMENT_COUNT || self.amplitudes.len() != DOF_COUNT
            || self.phases.len() != DOF_COUNT
        {
            return Err(GaitError::Config("gait parameter vector lengths".into()));
        }
        if !self.limb_lengths.iter().all(|&l| l > 0.0) {
            return Err(GaitError::Config("limb lengths must be positive".into()));
        }
        if self.stride_freq <= 0.0 {
            return Err(GaitError::Config("stride frequency must be positive".into()));
        }
        if self.noise_sigma < 0.0 {
            return Err(GaitError::Config("noise sigma must be non-negative".into()));
        }
        Ok(())
    }
}

const SEGMENT_COUNT: usize = 11;
const DOF_COUNT: usize = 7;

// Segment indices into limb_lengths.
const SEG_SPINE_LOWER: usize = 0;
const SEG_SPINE_UPPER: usize = 1;
const SEG_NECK_HEAD: usize = 2;
const SEG_SHOULDER_HALF: usize = 3;
const SEG_UPPER_ARM: usize = 4;
const SEG_FOREARM: usize = 5;
const SEG_HAND: usize = 6;
const SEG_HIP_HALF: usize = 7;
const SEG_THIGH: usize = 8;
const SEG_SHIN: usize = 9;
const SEG_FOOT: usize = 10;

// Degree-of-freedom indices into amplitudes/phases.
const DOF_THIGH: usize = 0;
const DOF_KNEE: usize = 1;
const DOF_ARM: usize = 2;
const DOF_ELBOW: usize = 3;
const DOF_SWAY: usize = 4;
const DOF_BOB: usize = 5;
const DOF_HEAD: usize = 6;

/// Configuration for `generate_synthetic`, also accepted as JSON by the
/// command-line tool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub name: String,
    pub identities: usize,
    pub videos_per_identity: usize,
    pub frames_per_video: usize,
    pub seed: u64,
    /// Coordinate noise std-dev in meters applied to every identity.
    pub noise_sigma: f64,
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        if self.identities < 2 {
            return Err(GaitError::Config("need at least 2 identities".into()));
        }
        if self.videos_per_identity == 0 {
            return Err(GaitError::Config("need at least 1 video per identity".into()));
        }
        let min_frames = 2 * DEFAULT_DISCARD + DEFAULT_SEQ_LEN;
        if self.frames_per_video <= min_frames {
            return Err(GaitError::Config(format!(
                "frames_per_video {} too short: must exceed {} so at least one \
                 window survives default preprocessing",
                self.frames_per_video, min_frames
            )));
        }
        if self.noise_sigma < 0.0 {
            return Err(GaitError::Config("noise sigma must be non-negative".into()));
        }
        Ok(())
    }
}

fn draw_identity(rng: &mut Rng, noise_sigma: f64) -> GaitIdentityParams {
    let mut limb_lengths = vec![0.0; SEGMENT_COUNT];
    limb_lengths[SEG_SPINE_LOWER] = rng.uniform_in(0.14, 0.20);
    limb_lengths[SEG_SPINE_UPPER] = rng.uniform_in(0.16, 0.24);
    limb_lengths[SEG_NECK_HEAD] = rng.uniform_in(0.20, 0.30);
    limb_lengths[SEG_SHOULDER_HALF] = rng.uniform_in(0.15, 0.22);
    limb_lengths[SEG_UPPER_ARM] = rng.uniform_in(0.24, 0.33);
    limb_lengths[SEG_FOREARM] = rng.uniform_in(0.22, 0.30);
    limb_lengths[SEG_HAND] = rng.uniform_in(0.08, 0.12);
    limb_lengths[SEG_HIP_HALF] = rng.uniform_in(0.08, 0.14);
    limb_lengths[SEG_THIGH] = rng.uniform_in(0.35, 0.50);
    limb_lengths[SEG_SHIN] = rng.uniform_in(0.33, 0.46);
    limb_lengths[SEG_FOOT] = rng.uniform_in(0.12, 0.18);

    let stride_freq = rng.uniform_in(0.6, 1.4);

    let mut amplitudes = vec![0.0; DOF_COUNT];
    amplitudes[DOF_THIGH] = rng.uniform_in(0.30, 0.70);
    amplitudes[DOF_KNEE] = rng.uniform_in(0.40, 0.90);
    amplitudes[DOF_ARM] = rng.uniform_in(0.20, 0.60);
    amplitudes[DOF_ELBOW] = rng.uniform_in(0.10, 0.40);
    amplitudes[DOF_SWAY] = rng.uniform_in(0.02, 0.06);
    amplitudes[DOF_BOB] = rng.uniform_in(0.01, 0.04);
    amplitudes[DOF_HEAD] = rng.uniform_in(0.005, 0.02);

    let phases: Vec<f64> = (0..DOF_COUNT)
        .map(|_| rng.uniform_in(0.0, std::f64::consts::TAU))
        .collect();

    GaitIdentityParams {
        limb_lengths,
        stride_freq,
        amplitudes,
        phases,
        noise_sigma,
    }
}

/// Walking-in-place forward kinematics for one instant. `phase0` is the
/// per-video stride-phase offset; x points forward, y up, z lateral.
fn pose_at(p: &GaitIdentityParams, t_sec: f64, phase0: f64) -> Matrix {
    let l = &p.limb_lengths;
    let omega = std::f64::consts::TAU * p.stride_freq;
    let osc = |dof: usize, extra_phase: f64| -> f64 {
        p.amplitudes[dof] * (omega * t_sec + p.phases[dof] + phase0 + extra_phase).sin()
    };
    let pi = std::f64::consts::PI;

    // Root bobs vertically at twice the stride frequency (one bounce per
    // step) and sways laterally at the stride frequency.
    let bob = p.amplitudes[DOF_BOB]
        * (2.0 * (omega * t_sec + phase0) + p.phases[DOF_BOB]).sin();
    let sway = osc(DOF_SWAY, 0.0);
    let leg_rise = l[SEG_THIGH] + l[SEG_SHIN];
    let root = [0.0, leg_rise + bob, sway];

    let mut m = Matrix::zeros(DEFAULT_JOINTS, 3);
    let mut set = |idx: usize, v: [f64; 3]| {
        m.set(idx, 0, v[0]);
        m.set(idx, 1, v[1]);
        m.set(idx, 2, v[2]);
    };

    let spine = [root[0], root[1] + l[SEG_SPINE_LOWER], root[2]];
    let shoulder_c = [spine[0], spine[1] + l[SEG_SPINE_UPPER], spine[2]];
    let head = [
        shoulder_c[0] + osc(DOF_HEAD, 0.0),
        shoulder_c[1] + l[SEG_NECK_HEAD],
        shoulder_c[2],
    ];
    set(0, root);
    set(1, spine);
    set(2, shoulder_c);
    set(3, head);

    // Arms hang from the shoulders and swing in the sagittal plane,
    // each in antiphase with its own side's leg.
    let mut arm = |base: usize, side: f64, leg_phase: f64| {
        let shoulder = [
            shoulder_c[0],
            shoulder_c[1],
            shoulder_c[2] + side * l[SEG_SHOULDER_HALF],
        ];
        let swing = osc(DOF_ARM, leg_phase + pi);
        let elbow = [
            shoulder[0] + l[SEG_UPPER_ARM] * swing.sin(),
            shoulder[1] - l[SEG_UPPER_ARM] * swing.cos(),
            shoulder[2],
        ];
        // Elbow flexion only bends forward.
        let flex = p.amplitudes[DOF_ELBOW]
            * (1.0 + (omega * t_sec + p.phases[DOF_ELBOW] + phase0 + leg_phase).sin())
            / 2.0;
        let lower = swing + flex;
        let wrist = [
            elbow[0] + l[SEG_FOREARM] * lower.sin(),
            elbow[1] - l[SEG_FOREARM] * lower.cos(),
            elbow[2],
        ];
        let hand = [
            wrist[0] + l[SEG_HAND] * lower.sin(),
            wrist[1] - l[SEG_HAND] * lower.cos(),
            wrist[2],
        ];
        set(base, shoulder);
        set(base + 1, elbow);
        set(base + 2, wrist);
        set(base + 3, hand);
    };
    arm(4, -1.0, 0.0); // left arm, antiphase to left leg
    arm(8, 1.0, pi); // right arm

    // Legs: thigh swings about the hip; knee flexion keeps the shank
    // behind the thigh.
    let mut leg = |base: usize, side: f64, leg_phase: f64| {
        let hip = [root[0], root[1], root[2] + side * l[SEG_HIP_HALF]];
        let thigh = osc(DOF_THIGH, leg_phase);
        let knee = [
            hip[0] + l[SEG_THIGH] * thigh.sin(),
            hip[1] - l[SEG_THIGH] * thigh.cos(),
            hip[2],
        ];
        let flex = p.amplitudes[DOF_KNEE]
            * (1.0 + (omega * t_sec + p.phases[DOF_KNEE] + phase0 + leg_phase).sin())
            / 2.0;
        let shank = thigh - flex;
        let ankle = [
            knee[0] + l[SEG_SHIN] * shank.sin(),
            knee[1] - l[SEG_SHIN] * shank.cos(),
            knee[2],
        ];
        let foot = [
            ankle[0] + l[SEG_FOOT] * shank.cos(),
            ankle[1] + l[SEG_FOOT] * shank.sin(),
            ankle[2],
        ];
        set(base, hip);
        set(base + 1, knee);
        set(base + 2, ankle);
        set(base + 3, foot);
    };
    leg(12, -1.0, 0.0); // left leg
    leg(16, 1.0, pi); // right leg

    m
}

/// Produces a deterministic synthetic dataset: per identity a parameter
/// draw, per video a stride-phase offset, then noisy kinematic frames.
pub fn generate_synthetic(config: &GenConfig) -> Result<RawDataset> {
    config.validate()?;
    let mut rng = Rng::from_seed(config.seed);
    let mut identity_params = Vec::with_capacity(config.identities);
    for _ in 0..config.identities {
        identity_params.push(draw_identity(&mut rng, config.noise_sigma));
    }
    let dt = 1.0 / GENERATOR_FPS;
    let mut videos = Vec::with_capacity(config.identities * config.videos_per_identity);
    for (id_idx, params) in identity_params.iter().enumerate() {
        for _ in 0..config.videos_per_identity {
            let phase0 = rng.uniform_in(0.0, std::f64::consts::TAU);
            let mut frames = Vec::with_capacity(config.frames_per_video);
            for t in 0..config.frames_per_video {
                let mut joints = pose_at(params, t as f64 * dt, phase0);
                if params.noise_sigma > 0.0 {
                    for v in joints.data_mut() {
                        *v += params.noise_sigma * rng.normal();
                    }
                }
                frames.push(Skeleton { joints });
            }
            videos.push(RawVideo {
                label: id_idx + 1,
                frames,
            });
        }
    }
    Ok(RawDataset {
        name: config.name.clone(),
        joint_count: DEFAULT_JOINTS,
        identities: config.identities,
        videos,
        provenance: Provenance {
            source: None,
            generator_seed: Some(config.seed),
            short_videos_skipped: 0,
        },
        identity_params,
    })
}
