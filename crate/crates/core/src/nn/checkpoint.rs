//! Binary checkpoint container.
//!
//! A checkpoint starts with a UTF-8 text header of `key=value` lines opened by
//! the magic line `cwcf-checkpoint` and closed by a line `end`. The payload
//! that follows is four parameter blocks of little-endian `f64`: online
//! parameters, target parameters, Adam first moment, Adam second moment. Each
//! block uses the layout of [`Architecture::layers`].

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use super::network::{Architecture, NetworkParams};
use super::optim::{AdamConfig, AdamState};
use crate::error::{Error, Result};

pub const MAGIC: &str = "cwcf-checkpoint";
pub const FORMAT_VERSION: u32 = 1;
const HEADER_LIMIT: usize = 1 << 20;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointMeta {
    pub n_features: usize,
    pub classes: usize,
    pub hpc: bool,
    pub seed: u64,
    pub lambda: f64,
    /// Training-split mean and standard deviation per feature.
    pub normalization: Option<(Vec<f64>, Vec<f64>)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub meta: CheckpointMeta,
    pub online: NetworkParams,
    pub target: NetworkParams,
    pub adam: AdamState,
}

fn join(values: &[f64]) -> String {
    values
        .iter()
        .map(f64::to_string)
        .collect::<Vec<_>>()
        .join(",")
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Checkpoint(msg.into())
}

impl Checkpoint {
    pub fn new(
        meta: CheckpointMeta,
        online: NetworkParams,
        target: NetworkParams,
        adam: AdamState,
    ) -> Result<Self> {
        let ck = Self {
            meta,
            online,
            target,
            adam,
        };
        ck.validate()?;
        Ok(ck)
    }

    fn validate(&self) -> Result<()> {
        let arch = self.online.architecture();
        if self.target.architecture() != arch {
            return Err(bad("target network shape differs from online network"));
        }
        if self.adam.first_moment().len() != arch.parameter_count() {
            return Err(bad("Adam moments do not match network size"));
        }
        let m = &self.meta;
        if m.n_features.checked_mul(2) != Some(arch.inputs) {
            return Err(bad(format!(
                "input width {} is not twice n_features {}",
                arch.inputs, m.n_features
            )));
        }
        let expected = m
            .classes
            .checked_add(m.n_features)
            .and_then(|v| v.checked_add(usize::from(m.hpc)));
        if expected != Some(arch.actions) {
            return Err(bad(format!(
                "{} actions do not match {} classes + {} features + hpc={}",
                arch.actions, m.classes, m.n_features, m.hpc
            )));
        }
        if let Some((mean, std)) = &m.normalization {
            if mean.len() != m.n_features || std.len() != m.n_features {
                return Err(bad("normalization statistics length mismatch"));
            }
        }
        Ok(())
    }

    pub fn architecture(&self) -> &Architecture {
        self.online.architecture()
    }

    pub fn encode(&self) -> Vec<u8> {
        let arch = self.architecture();
        let m = &self.meta;
        let mut header = String::new();
        let _ = writeln!(header, "{MAGIC}");
        let _ = writeln!(header, "format_version={FORMAT_VERSION}");
        let _ = writeln!(header, "inputs={}", arch.inputs);
        let _ = writeln!(
            header,
            "hidden={},{},{}",
            arch.hidden[0], arch.hidden[1], arch.hidden[2]
        );
        let _ = writeln!(header, "actions={}", arch.actions);
        let _ = writeln!(header, "n_features={}", m.n_features);
        let _ = writeln!(header, "classes={}", m.classes);
        let _ = writeln!(header, "hpc={}", m.hpc);
        let _ = writeln!(header, "seed={}", m.seed);
        let _ = writeln!(header, "lambda={}", m.lambda);
        let _ = writeln!(header, "adam_step={}", self.adam.step);
        let _ = writeln!(header, "adam_beta1={}", self.adam.config.beta1);
        let _ = writeln!(header, "adam_beta2={}", self.adam.config.beta2);
        let _ = writeln!(header, "adam_eps={}", self.adam.config.eps);
        if let Some((mean, std)) = &m.normalization {
            let _ = writeln!(header, "norm_mean={}", join(mean));
            let _ = writeln!(header, "norm_std={}", join(std));
        }
        header.push_str("end\n");

        let blocks: [&[f64]; 4] = [
            self.online.as_slice(),
            self.target.as_slice(),
            self.adam.first_moment(),
            self.adam.second_moment(),
        ];
        let mut out = header.into_bytes();
        out.reserve(blocks.iter().map(|b| b.len() * 8).sum());
        for block in blocks {
            for v in block {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let search = &bytes[..bytes.len().min(HEADER_LIMIT)];
        let end = find_header_end(search).ok_or_else(|| bad("missing header terminator"))?;
        let header = std::str::from_utf8(&bytes[..end]).map_err(|_| bad("header is not UTF-8"))?;
        let payload = &bytes[end..];

        let mut lines = header.lines();
        if lines.next() != Some(MAGIC) {
            return Err(bad("missing magic line"));
        }
        let mut fields = BTreeMap::new();
        for line in lines {
            if line == "end" {
                break;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| bad(format!("malformed header line {line:?}")))?;
            if fields.insert(k, v).is_some() {
                return Err(bad(format!("duplicate header key {k:?}")));
            }
        }
        let get = |key: &str| {
            fields
                .get(key)
                .copied()
                .ok_or_else(|| bad(format!("missing header key {key:?}")))
        };
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse()
                .map_err(|_| bad(format!("invalid value {v:?} for {key:?}")))
        }
        fn real(key: &str, v: &str) -> Result<f64> {
            let x: f64 = num(key, v)?;
            if x.is_finite() {
                Ok(x)
            } else {
                Err(bad(format!("non-finite value for {key:?}")))
            }
        }
        fn reals(key: &str, v: &str) -> Result<Vec<f64>> {
            if v.is_empty() {
                return Ok(Vec::new());
            }
            v.split(',').map(|s| real(key, s)).collect()
        }

        let version: u32 = num("format_version", get("format_version")?)?;
        if version != FORMAT_VERSION {
            return Err(bad(format!("unsupported format version {version}")));
        }
        let hidden: Vec<usize> = get("hidden")?
            .split(',')
            .map(|s| num("hidden", s))
            .collect::<Result<_>>()?;
        let hidden: [usize; 3] = hidden
            .try_into()
            .map_err(|_| bad("hidden must list three widths"))?;
        let arch = Architecture {
            inputs: num("inputs", get("inputs")?)?,
            hidden,
            actions: num("actions", get("actions")?)?,
        };
        arch.validate().map_err(|e| bad(e.to_string()))?;
        let normalization = match (fields.get("norm_mean"), fields.get("norm_std")) {
            (Some(m), Some(s)) => Some((reals("norm_mean", m)?, reals("norm_std", s)?)),
            (None, None) => None,
            _ => return Err(bad("norm_mean and norm_std must appear together")),
        };
        let meta = CheckpointMeta {
            n_features: num("n_features", get("n_features")?)?,
            classes: num("classes", get("classes")?)?,
            hpc: num("hpc", get("hpc")?)?,
            seed: num("seed", get("seed")?)?,
            lambda: real("lambda", get("lambda")?)?,
            normalization,
        };
        let adam_config = AdamConfig {
            beta1: real("adam_beta1", get("adam_beta1")?)?,
            beta2: real("adam_beta2", get("adam_beta2")?)?,
            eps: real("adam_eps", get("adam_eps")?)?,
        };
        let adam_step: u64 = num("adam_step", get("adam_step")?)?;

        let count = arch.parameter_count();
        let expected = count
            .checked_mul(4 * 8)
            .ok_or_else(|| bad("architecture too large"))?;
        if payload.len() != expected {
            return Err(bad(format!(
                "payload has {} bytes, expected {expected}",
                payload.len()
            )));
        }
        let mut blocks = payload.chunks_exact(count * 8).map(|chunk| {
            chunk
                .chunks_exact(8)
                .map(|b| f64::from_le_bytes(b.try_into().expect("8-byte chunk")))
                .collect::<Vec<f64>>()
        });
        let mut next = || blocks.next().unwrap_or_default();
        let online = NetworkParams::from_values(arch, next()).map_err(|e| bad(e.to_string()))?;
        let target = NetworkParams::from_values(arch, next()).map_err(|e| bad(e.to_string()))?;
        let adam = AdamState::from_parts(adam_config, adam_step, next(), next())
            .map_err(|e| bad(e.to_string()))?;
        Self::new(meta, online, target, adam)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.encode()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::decode(&bytes)
    }
}

/// Offset just past the `end\n` line that closes the header.
fn find_header_end(bytes: &[u8]) -> Option<usize> {
    const TERMINATOR: &[u8] = b"\nend\n";
    bytes
        .windows(TERMINATOR.len())
        .position(|w| w == TERMINATOR)
        .map(|p| p + TERMINATOR.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sample() -> Checkpoint {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let arch = Architecture::new(6, [4, 4, 3], 6).unwrap();
        let online = NetworkParams::init(arch, &mut rng).unwrap();
        let target = NetworkParams::init(arch, &mut rng).unwrap();
        let adam = AdamState::new(&arch, AdamConfig::default());
        Checkpoint::new(
            CheckpointMeta {
                n_features: 3,
                classes: 2,
                hpc: true,
                seed: 42,
                lambda: 0.01,
                normalization: Some((vec![0.1, 0.2, 0.3], vec![1.0, 2.0, 0.5])),
            },
            online,
            target,
            adam,
        )
        .unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let ck = sample();
        let bytes = ck.encode();
        assert!(bytes.starts_with(b"cwcf-checkpoint\nformat_version=1\n"));
        assert_eq!(Checkpoint::decode(&bytes).unwrap(), ck);
    }

    #[test]
    fn rejects_truncation_and_garbage() {
        let bytes = sample().encode();
        assert!(Checkpoint::decode(&bytes[..bytes.len() - 1]).is_err());
        assert!(Checkpoint::decode(b"").is_err());
        assert!(Checkpoint::decode(b"cwcf-checkpoint\nend\n").is_err());
        let text = String::from_utf8_lossy(&bytes).replace("actions=6", "actions=7");
        assert!(Checkpoint::decode(text.as_bytes()).is_err());
    }

    #[test]
    fn rejects_inconsistent_metadata() {
        let mut ck = sample();
        ck.meta.classes = 3;
        assert!(Checkpoint::decode(&ck.encode()).is_err());
    }
}
