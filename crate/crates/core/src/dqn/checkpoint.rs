//! Versioned little-endian binary checkpoint of a Q-network and its Adam state.

use std::path::Path;

use super::{AdamState, QNetwork};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"V2VQNET\0";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub network: QNetwork,
    pub adam: AdamState,
}

struct Reader<'a> {
    buf: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.at.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| Error::Checkpoint("truncated file".into()))?;
        let s = &self.buf[self.at..end];
        self.at = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        (0..n).map(|_| self.f64()).collect()
    }
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let widths = self.network.widths();
        let params = self.network.params();
        let a = &self.adam;
        let mut out = Vec::with_capacity(64 + 24 * params.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(widths.len() as u32).to_le_bytes());
        for &w in widths {
            out.extend_from_slice(&(w as u32).to_le_bytes());
        }
        out.extend_from_slice(&(params.len() as u64).to_le_bytes());
        for x in params {
            out.extend_from_slice(&x.to_le_bytes());
        }
        out.extend_from_slice(&a.step.to_le_bytes());
        out.extend_from_slice(&a.lr_decay_steps.to_le_bytes());
        for x in [a.learning_rate, a.lr_decay, a.beta1, a.beta2, a.epsilon] {
            out.extend_from_slice(&x.to_le_bytes());
        }
        for x in a.m.iter().chain(&a.v) {
            out.extend_from_slice(&x.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let mut r = Reader { buf, at: 0 };
        if r.take(8)? != MAGIC {
            return Err(Error::Checkpoint("not a checkpoint file".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {version}")));
        }
        let n_widths = r.u32()? as usize;
        if n_widths > 64 {
            return Err(Error::Checkpoint(format!("{n_widths} layers")));
        }
        let widths = (0..n_widths).map(|_| r.u32().map(|w| w as usize)).collect::<Result<Vec<_>>>()?;
        let n_params = r.u64()? as usize;
        let expected = QNetwork::zeros(&widths).map_err(|e| Error::Checkpoint(e.to_string()))?.params().len();
        if n_params != expected {
            return Err(Error::Checkpoint(format!("{n_params} parameters for widths {widths:?}")));
        }
        let network = QNetwork::from_params(&widths, r.f64s(n_params)?)?;
        let step = r.u64()?;
        let lr_decay_steps = r.u64()?;
        let [learning_rate, lr_decay, beta1, beta2, epsilon] =
            [r.f64()?, r.f64()?, r.f64()?, r.f64()?, r.f64()?];
        let m = r.f64s(n_params)?;
        let v = r.f64s(n_params)?;
        if r.at != buf.len() {
            return Err(Error::Checkpoint("trailing bytes".into()));
        }
        let adam = AdamState { m, v, step, learning_rate, lr_decay, lr_decay_steps, beta1, beta2, epsilon };
        Ok(Self { network, adam })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let buf = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&buf)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::DqnConfig;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sample() -> Checkpoint {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let network = QNetwork::new(&[3, 4, 2], &mut rng).unwrap();
        let mut adam = AdamState::new(network.params().len(), &DqnConfig::default());
        adam.step = 17;
        adam.m[0] = 0.25;
        adam.v[3] = 1e-9;
        Checkpoint { network, adam }
    }

    #[test]
    fn round_trip_is_byte_stable() {
        let c = sample();
        let bytes = c.to_bytes();
        let back = Checkpoint::from_bytes(&bytes).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_bytes(), bytes);
    }

    #[test]
    fn corrupt_inputs_are_rejected() {
        let bytes = sample().to_bytes();
        assert!(Checkpoint::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(Checkpoint::from_bytes(&bad).is_err());
        let mut long = bytes;
        long.push(0);
        assert!(Checkpoint::from_bytes(&long).is_err());
    }
}
