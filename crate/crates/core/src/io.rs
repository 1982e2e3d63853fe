//! JSON file format for hierarchical Tucker representations.
//!
//! ```json
//! {
//!   "format": "htwave-ht",
//!   "version": 1,
//!   "order": 4,
//!   "shape": "balanced",
//!   "frames": [ { "index": [[-1, 0, 0], [3, 5, 1]], "values": [[0.1, 0.2], [0.3, 0.4]] } ],
//!   "transfers": [ { "rows": 4, "cols": 1, "data": [1.0, 0.0, 0.0, 1.0] } ]
//! }
//! ```
//!
//! * `frames[i]` is the leaf frame of mode `i`: one `[level, translation, slot]`
//!   triple per row (`level = -1` for the scaling layer) and the row-major values.
//! * `transfers[a]` is stored for every tree node in breadth-first order,
//!   column-major; leaves carry `0 × 0` entries.
//! * Floats are written in shortest round-trip form, so reading back is exact.

use crate::error::{HtError, Result};
use crate::ht::{HtRep, ModeFrame};
use crate::index::WaveletIndex;
use crate::tree::{DimensionTree, TreeShape};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::path::Path;
use std::sync::Arc;

const FORMAT: &str = "htwave-ht";
const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct FrameFile {
    index: Vec<(i64, u64, usize)>,
    values: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct MatrixFile {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct HtFile {
    format: String,
    version: u32,
    order: usize,
    shape: TreeShape,
    frames: Vec<FrameFile>,
    transfers: Vec<MatrixFile>,
}

fn encode_index(w: &WaveletIndex) -> (i64, u64, usize) {
    if w.is_scaling() {
        (-1, 0, w.slot())
    } else {
        (w.level() as i64, w.translation(), w.slot())
    }
}

fn decode_index(t: (i64, u64, usize)) -> Result<WaveletIndex> {
    match t {
        (-1, 0, s) => Ok(WaveletIndex::scaling(s)),
        (l, x, s) if (0..64).contains(&l) && x >> l == 0 => Ok(WaveletIndex::wavelet(l as u32, x, s)),
        _ => Err(HtError::Format(format!("invalid index {t:?}"))),
    }
}

pub fn to_json(v: &HtRep) -> String {
    let frames = v
        .frames()
        .iter()
        .map(|f| FrameFile {
            index: f.index.iter().map(encode_index).collect(),
            values: (0..f.support()).map(|r| f.values.row(r).iter().copied().collect()).collect(),
        })
        .collect();
    let transfers = (0..v.tree().len())
        .map(|a| {
            let m = v.transfer(a);
            MatrixFile { rows: m.nrows(), cols: m.ncols(), data: m.as_slice().to_vec() }
        })
        .collect();
    let file = HtFile { format: FORMAT.into(), version: VERSION, order: v.order(), shape: v.tree().shape(), frames, transfers };
    serde_json::to_string(&file).expect("representation serializes")
}

pub fn from_json(s: &str) -> Result<HtRep> {
    let file: HtFile = serde_json::from_str(s).map_err(|e| HtError::Format(e.to_string()))?;
    if file.format != FORMAT || file.version != VERSION {
        return Err(HtError::Format(format!("unsupported format {} v{}", file.format, file.version)));
    }
    let tree = Arc::new(DimensionTree::new(file.order, file.shape)?);
    let frames = file
        .frames
        .into_iter()
        .map(|f| {
            let index = f.index.into_iter().map(decode_index).collect::<Result<Vec<_>>>()?;
            let k = f.values.first().map_or(0, |r| r.len());
            if f.values.iter().any(|r| r.len() != k) {
                return Err(HtError::Format("ragged frame values".into()));
            }
            let values = DMatrix::from_fn(f.values.len(), k, |r, c| f.values[r][c]);
            Ok(ModeFrame { index, values })
        })
        .collect::<Result<Vec<_>>>()?;
    let transfers = file
        .transfers
        .into_iter()
        .map(|m| {
            if m.rows * m.cols != m.data.len() {
                return Err(HtError::Format("transfer size does not match its data".into()));
            }
            Ok(DMatrix::from_column_slice(m.rows, m.cols, &m.data))
        })
        .collect::<Result<Vec<_>>>()?;
    HtRep::from_parts(tree, frames, transfers)
}

pub fn write(path: impl AsRef<Path>, v: &HtRep) -> Result<()> {
    std::fs::write(path, to_json(v)).map_err(|e| HtError::Io(e.to_string()))
}

pub fn read(path: impl AsRef<Path>) -> Result<HtRep> {
    from_json(&std::fs::read_to_string(path).map_err(|e| HtError::Io(e.to_string()))?)
}
