//! Binary parameter checkpoints.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! b"DSCQ"          magic
//! u8               variant tag (0 tabular, 1 linear, 2 mlp)
//! u32              number of shape entries
//! u64 × n          shape entries
//! u64              parameter count
//! f64 × count      parameters
//! ```

use super::Approximator;
use crate::{Error, Result};

pub const MAGIC: &[u8; 4] = b"DSCQ";
const MAX_SHAPE: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub variant: u8,
    pub shape: Vec<u64>,
    pub params: Vec<f64>,
}

impl Checkpoint {
    pub fn of(approx: &Approximator) -> Self {
        Checkpoint {
            variant: approx.variant_tag(),
            shape: approx.shape(),
            params: approx.params().to_vec(),
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(17 + 8 * (self.shape.len() + self.params.len()));
        out.extend_from_slice(MAGIC);
        out.push(self.variant);
        out.extend_from_slice(&(self.shape.len() as u32).to_le_bytes());
        for d in &self.shape {
            out.extend_from_slice(&d.to_le_bytes());
        }
        out.extend_from_slice(&(self.params.len() as u64).to_le_bytes());
        for p in &self.params {
            out.extend_from_slice(&p.to_le_bytes());
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut cur = Cursor { bytes, pos: 0 };
        if cur.take(4)? != MAGIC {
            return Err(Error::Checkpoint("bad magic".into()));
        }
        let variant = cur.take(1)?[0];
        if variant > 2 {
            return Err(Error::Checkpoint(format!("unknown variant tag {variant}")));
        }
        let n = u32::from_le_bytes(cur.array()?) as usize;
        if n > MAX_SHAPE {
            return Err(Error::Checkpoint(format!("shape list of {n} entries")));
        }
        let shape = (0..n).map(|_| cur.array().map(u64::from_le_bytes)).collect::<Result<Vec<_>>>()?;
        let count = u64::from_le_bytes(cur.array()?);
        let remaining = (bytes.len() - cur.pos) as u64;
        if count.checked_mul(8) != Some(remaining) {
            return Err(Error::Checkpoint(format!(
                "{count} parameters declared, {remaining} payload bytes present"
            )));
        }
        let params = (0..count).map(|_| cur.array().map(f64::from_le_bytes)).collect::<Result<Vec<_>>>()?;
        Ok(Checkpoint { variant, shape, params })
    }

    /// Copy the parameters into `approx`, which must have the same variant and shape.
    pub fn restore(&self, approx: &mut Approximator) -> Result<()> {
        if self.variant != approx.variant_tag() || self.shape != approx.shape() {
            return Err(Error::Checkpoint(format!(
                "checkpoint variant {} shape {:?} does not match approximator variant {} shape {:?}",
                self.variant,
                self.shape,
                approx.variant_tag(),
                approx.shape()
            )));
        }
        if self.params.len() != approx.params().len() {
            return Err(Error::Checkpoint("parameter count mismatch".into()));
        }
        approx.params_mut().copy_from_slice(&self.params);
        Ok(())
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|e| *e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Checkpoint(format!("truncated at byte {}", self.pos)))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::approx::ApproxSpec;
    use crate::envs::FeatureMap;
    use crate::rng::{self, Stream};

    #[test]
    fn round_trip_every_variant() {
        let f = Arc::new(FeatureMap::identity(6));
        for spec in [ApproxSpec::Tabular, ApproxSpec::Linear, ApproxSpec::mlp_default()] {
            let mut r = rng::stream(3, Stream::QInit);
            let a = Approximator::new(&spec, f.clone(), 3, 2, &mut r).unwrap();
            let bytes = Checkpoint::of(&a).encode();
            let back = Checkpoint::decode(&bytes).unwrap();
            let mut b = Approximator::new(&spec, f.clone(), 3, 2, &mut rng::stream(4, Stream::QInit)).unwrap();
            back.restore(&mut b).unwrap();
            assert_eq!(a.params(), b.params());
        }
    }

    #[test]
    fn rejects_corruption() {
        let c = Checkpoint {
            variant: 1,
            shape: vec![3],
            params: vec![1.0, 2.0, 3.0],
        };
        let bytes = c.encode();
        assert!(Checkpoint::decode(&bytes[..bytes.len() - 1]).is_err());
        assert!(Checkpoint::decode(&bytes[..3]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(Checkpoint::decode(&bad).is_err());
        let mut bad = bytes.clone();
        bad[4] = 9;
        assert!(Checkpoint::decode(&bad).is_err());
        let mut longer = bytes;
        longer.push(0);
        assert!(Checkpoint::decode(&longer).is_err());
    }

    #[test]
    fn restore_checks_shape() {
        let c = Checkpoint {
            variant: 0,
            shape: vec![2, 2],
            params: vec![0.0; 4],
        };
        let mut a = Approximator::tabular_from(&crate::mdp::QTable::zeros(1, 4));
        assert!(c.restore(&mut a).is_err());
    }
}
