//! Run-length encoding for binary rasters.
//!
//! A mask is a list of `[value, start, length]` triples over the row-major
//! flattened grid. Cells not covered by any run are 0. The encoder emits
//! only `value = 1` runs, in increasing `start` order.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Rle(pub Vec<[u64; 3]>);

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RleError {
    #[error("run {index} has value {value}, expected 0 or 1")]
    BadValue { index: usize, value: u64 },
    #[error("run {index} ends at {end}, past the grid of {len} cells")]
    OutOfBounds { index: usize, end: u64, len: u64 },
    #[error("run {index} overlaps an earlier run")]
    Overlap { index: usize },
}

impl Rle {
    pub fn encode(values: &[bool]) -> Rle {
        let mut runs = Vec::new();
        let mut i = 0;
        while i < values.len() {
            if values[i] {
                let start = i;
                while i < values.len() && values[i] {
                    i += 1;
                }
                runs.push([1, start as u64, (i - start) as u64]);
            } else {
                i += 1;
            }
        }
        Rle(runs)
    }

    pub fn decode(&self, len: usize) -> Result<Vec<bool>, RleError> {
        let mut out = vec![false; len];
        let mut written = vec![false; len];
        for (index, &[value, start, length]) in self.0.iter().enumerate() {
            if value > 1 {
                return Err(RleError::BadValue { index, value });
            }
            let end = start.checked_add(length).unwrap_or(u64::MAX);
            if end > len as u64 {
                return Err(RleError::OutOfBounds {
                    index,
                    end,
                    len: len as u64,
                });
            }
            for k in start as usize..end as usize {
                if written[k] {
                    return Err(RleError::Overlap { index });
                }
                written[k] = true;
                out[k] = value == 1;
            }
        }
        Ok(out)
    }

    pub fn count(&self) -> u64 {
        self.0.iter().filter(|r| r[0] == 1).map(|r| r[2]).sum()
    }
}
