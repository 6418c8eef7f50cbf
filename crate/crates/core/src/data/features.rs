use std::io::{Read, Write};

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::DataError;
use crate::model::{FEATURE_COLS, FEATURE_ROWS};
use crate::tensor::Tensor;

const MAGIC: &[u8; 4] = b"FFAF";
const VERSION: u8 = 1;
const HEADER_LEN: usize = 4 + 1 + 4 + 4;

/// Images per case after resampling.
pub const RESAMPLED_LEN: usize = 96;
/// Resampled images summarized by one feature row.
pub const FRAMES_PER_FEATURE: usize = 8;

/// One case's 12×1024 temporal feature map.
#[derive(Debug, Clone, PartialEq)]
pub struct VisualFeatures {
    pub case_id: String,
    pub features: Tensor,
}

impl VisualFeatures {
    pub fn new(case_id: impl Into<String>, features: Tensor) -> Result<Self, DataError> {
        if features.shape() != [FEATURE_ROWS, FEATURE_COLS] {
            return Err(DataError::Input(format!(
                "features must be {FEATURE_ROWS}×{FEATURE_COLS}, got {:?}",
                features.shape()
            )));
        }
        features.check_finite("visual features")?;
        Ok(Self { case_id: case_id.into(), features })
    }
}

/// Fit an image sequence to exactly [`RESAMPLED_LEN`] items: order-preserving
/// random down-sampling when longer, cyclic repetition when shorter.
pub fn resample_sequence<T: Clone>(items: &[T], rng: &mut impl Rng) -> Result<Vec<T>, DataError> {
    let n = items.len();
    if n == 0 {
        return Err(DataError::Input("cannot resample an empty image sequence".into()));
    }
    if n > RESAMPLED_LEN {
        let mut keep = sample(rng, n, RESAMPLED_LEN).into_vec();
        keep.sort_unstable();
        return Ok(keep.into_iter().map(|i| items[i].clone()).collect());
    }
    Ok(items.iter().cycle().take(RESAMPLED_LEN).cloned().collect())
}

/// Stand-in for the frame encoder: resample per-image vectors to 96 and
/// average every eight into one feature row.
pub fn frames_to_features(frames: &[Vec<f64>], rng: &mut impl Rng) -> Result<Tensor, DataError> {
    if let Some(f) = frames.iter().find(|f| f.len() != FEATURE_COLS) {
        return Err(DataError::Input(format!("frame vectors must have {FEATURE_COLS} values, got {}", f.len())));
    }
    let seq = resample_sequence(frames, rng)?;
    let mut out = Tensor::zeros(&[FEATURE_ROWS, FEATURE_COLS]);
    for (k, frame) in seq.iter().enumerate() {
        let row = k / FRAMES_PER_FEATURE;
        for (o, v) in out.data_mut()[row * FEATURE_COLS..(row + 1) * FEATURE_COLS].iter_mut().zip(frame) {
            *o += v / FRAMES_PER_FEATURE as f64;
        }
    }
    Ok(out)
}

/// Standard-normal features from a seed.
pub fn synthesize_features(seed: u64) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..FEATURE_ROWS * FEATURE_COLS)
        .map(|_| rng.sample::<f64, _>(StandardNormal) as f32 as f64)
        .collect();
    Tensor::new(vec![FEATURE_ROWS, FEATURE_COLS], data).expect("fixed feature shape")
}

/// Magic, version byte, u32 rows, u32 cols, then little-endian f32 values.
pub fn write_feature_file(mut w: impl Write, features: &Tensor) -> Result<(), DataError> {
    let (r, c) = features.dims2();
    w.write_all(MAGIC)?;
    w.write_all(&[VERSION])?;
    w.write_all(&(r as u32).to_le_bytes())?;
    w.write_all(&(c as u32).to_le_bytes())?;
    let mut buf = Vec::with_capacity(r * c * 4);
    for &v in features.data() {
        buf.extend_from_slice(&(v as f32).to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_feature_file(mut r: impl Read) -> Result<Tensor, DataError> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    let err = |offset: usize, msg: &str| DataError::Format { offset, msg: msg.to_string() };
    if bytes.len() < HEADER_LEN {
        return Err(err(bytes.len(), "truncated header"));
    }
    if &bytes[..4] != MAGIC {
        return Err(err(0, "bad magic"));
    }
    if bytes[4] != VERSION {
        return Err(err(4, "unsupported version"));
    }
    let rows = u32::from_le_bytes(bytes[5..9].try_into().expect("4 bytes")) as usize;
    let cols = u32::from_le_bytes(bytes[9..13].try_into().expect("4 bytes")) as usize;
    if rows != FEATURE_ROWS {
        return Err(err(5, &format!("expected {FEATURE_ROWS} rows, found {rows}")));
    }
    if cols != FEATURE_COLS {
        return Err(err(9, &format!("expected {FEATURE_COLS} columns, found {cols}")));
    }
    let need = HEADER_LEN + rows * cols * 4;
    if bytes.len() < need {
        return Err(err(bytes.len(), &format!("truncated data: {need} bytes expected")));
    }
    if bytes.len() > need {
        return Err(err(need, "trailing bytes"));
    }
    let data = bytes[HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
        .collect();
    let t = Tensor::new(vec![rows, cols], data)?;
    if !t.is_finite() {
        let bad = t.data().iter().position(|v| !v.is_finite()).unwrap_or(0);
        return Err(err(HEADER_LEN + 4 * bad, "non-finite value"));
    }
    Ok(t)
}
