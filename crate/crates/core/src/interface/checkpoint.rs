//! The `LMN1` checkpoint: named parameter blocks stored as little-endian
//! f32, a stage tag, an echo of the run configuration and a CRC-32 of
//! everything before it.
//!
//! ```text
//! "LMN1" | version u32 | stage str | config str | block count u32 |
//!   { name str | trainable u8 | ndim u32 | dims u32.. | f32.. }* | crc32 u32
//! ```
//! where `str` is a u32 byte length followed by UTF-8.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::models::{Head, ImageEncoder, ModelConfig, ParamEntry, ParamSet, PointDecoder, PointEncoder};
use crate::training::Stage;

use super::io::write_atomic;

pub const MAGIC: &[u8; 4] = b"LMN1";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub stage: Stage,
    /// `key = value` lines of the configuration that produced it.
    pub config: String,
    pub blocks: Vec<ParamEntry>,
}

/// Networks restored from a checkpoint.
#[derive(Debug, Clone)]
pub struct LoadedModels {
    pub enc: PointEncoder,
    pub dec: PointDecoder,
    pub img: Option<ImageEncoder>,
}

impl Checkpoint {
    pub fn new(stage: Stage, config: String, sets: &[&ParamSet]) -> Self {
        Self {
            stage,
            config,
            blocks: sets.iter().flat_map(|s| s.entries().iter().cloned()).collect(),
        }
    }

    /// Looks up `key` in the configuration echo.
    pub fn config_value(&self, key: &str) -> Option<&str> {
        self.config.lines().find_map(|l| {
            let (k, v) = l.split_once('=')?;
            (k.trim() == key).then(|| v.trim())
        })
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        put_str(&mut out, self.stage.tag());
        put_str(&mut out, &self.config);
        put_u32(&mut out, self.blocks.len());
        for b in &self.blocks {
            put_str(&mut out, &b.name);
            out.push(b.trainable as u8);
            put_u32(&mut out, b.shape.len());
            for &d in &b.shape {
                put_u32(&mut out, d);
            }
            for &v in &b.values {
                out.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
        let crc = crc32fast::hash(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        out
    }

    /// Checks magic, version and checksum before parsing anything else, so
    /// a damaged file never yields a partial checkpoint.
    pub fn decode(bytes: &[u8]) -> Result<Self> {
        if bytes.len() >= 4 && &bytes[..4] != MAGIC {
            return Err(Error::Format("missing LMN1 header".into()));
        }
        if bytes.len() < 12 {
            return Err(Error::Checksum {
                stored: 0,
                computed: crc32fast::hash(bytes),
            });
        }
        let found = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if found != VERSION {
            return Err(Error::Version {
                found,
                expected: VERSION,
            });
        }
        let (body, tail) = bytes.split_at(bytes.len() - 4);
        let stored = u32::from_le_bytes(tail.try_into().unwrap());
        let computed = crc32fast::hash(body);
        if stored != computed {
            return Err(Error::Checksum { stored, computed });
        }
        let mut r = Reader { buf: body, pos: 8 };
        let stage: Stage = r.string()?.parse().map_err(|_| Error::Format("unknown stage tag".into()))?;
        let config = r.string()?;
        let n = r.u32()?;
        let mut blocks = Vec::with_capacity(n);
        for _ in 0..n {
            let name = r.string()?;
            let trainable = match r.take(1)?[0] {
                0 => false,
                1 => true,
                _ => return Err(Error::Format(format!("block {name}: bad trainable flag"))),
            };
            let ndim = r.u32()?;
            let shape = (0..ndim).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
            let count: usize = shape.iter().product();
            let values = r
                .take(count * 4)?
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
                .collect();
            blocks.push(ParamEntry {
                name,
                shape,
                values,
                trainable,
            });
        }
        if r.pos != body.len() {
            return Err(Error::Format(format!("{} trailing bytes", body.len() - r.pos)));
        }
        Ok(Self { stage, config, blocks })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.encode())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::decode(&fs::read(path)?)
    }

    fn group(&self, prefix: &str) -> Result<Option<ParamSet>> {
        let mut set = ParamSet::new();
        for b in self.blocks.iter().filter(|b| b.name.starts_with(prefix)) {
            set.insert(&b.name, &b.shape, b.values.clone(), b.trainable)?;
        }
        Ok((set.len() > 0).then_some(set))
    }

    /// Rebuilds the networks. The auto-encoder blocks (`pe.`, `pd.`) are
    /// required at every stage and the image encoder (`ie.`) after Stage I.
    /// Unknown or missing blocks are errors.
    pub fn models(&self, mc: &ModelConfig) -> Result<LoadedModels> {
        if let Some(b) = self.blocks.iter().find(|b| !["pe.", "pd.", "ie."].iter().any(|p| b.name.starts_with(p))) {
            return Err(Error::Format(format!("unknown parameter block {}", b.name)));
        }
        let stage = self.stage;
        let missing = |what: &str| Error::Stage(format!("{stage} checkpoint lacks the {what} blocks"));
        let enc = self.group("pe.")?.ok_or_else(|| missing("point encoder"))?;
        let dec = self.group("pd.")?.ok_or_else(|| missing("decoder"))?;
        let img = self.group("ie.")?;
        let head = match stage {
            Stage::Autoencoder => {
                if img.is_some() {
                    return Err(Error::Format("auto-encoder checkpoint carries image encoder blocks".into()));
                }
                None
            }
            Stage::LatentMatching => Some(Head::Deterministic),
            Stage::Probabilistic => Some(Head::Probabilistic),
        };
        let img = match head {
            Some(h) => Some(ImageEncoder::from_params(mc, h, img.ok_or_else(|| missing("image encoder"))?)?),
            None => None,
        };
        Ok(LoadedModels {
            enc: PointEncoder::from_params(mc, enc)?,
            dec: PointDecoder::from_params(mc, dec)?,
            img,
        })
    }

    /// Stage II and Variant II start from a Stage I checkpoint.
    pub fn require_stage_one(&self, mc: &ModelConfig) -> Result<LoadedModels> {
        if self.stage != Stage::Autoencoder {
            return Err(Error::Stage(format!(
                "expected a {} checkpoint, found {}",
                Stage::Autoencoder,
                self.stage
            )));
        }
        self.models(mc)
    }
}

fn put_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&u32::try_from(v).expect("value fits in u32").to_le_bytes());
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    put_u32(out, s.len());
    out.extend_from_slice(s.as_bytes());
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::Format("unexpected end of checkpoint".into()));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }

    fn string(&mut self) -> Result<String> {
        let n = self.u32()?;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| Error::Format("non-UTF-8 string".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::ConvLayer;

    fn tiny() -> ModelConfig {
        ModelConfig {
            n_points: 32,
            latent_dim: 4,
            encoder_widths: vec![6, 4],
            decoder_widths: vec![8],
            image_layers: vec![
                ConvLayer { channels: 2, kernel: 3, stride: 2 },
                ConvLayer { channels: 2, kernel: 3, stride: 2 },
                ConvLayer { channels: 2, kernel: 3, stride: 2 },
            ],
            image_batch_norm: true,
            encoder_points: 16,
        }
    }

    fn ae_checkpoint() -> (Checkpoint, PointEncoder, PointDecoder) {
        let mc = tiny();
        let enc = PointEncoder::new(&mc, 1).unwrap();
        let dec = PointDecoder::new(&mc, 2).unwrap();
        let c = Checkpoint::new(Stage::Autoencoder, "seed = 3\n".into(), &[enc.params(), dec.params()]);
        (c, enc, dec)
    }

    #[test]
    fn roundtrip_within_f32_rounding() {
        let (c, enc, _) = ae_checkpoint();
        let back = Checkpoint::decode(&c.encode()).unwrap();
        assert_eq!(back.stage, Stage::Autoencoder);
        assert_eq!(back.config_value("seed"), Some("3"));
        assert_eq!(back.blocks.len(), c.blocks.len());
        for (a, b) in c.blocks.iter().zip(&back.blocks) {
            assert_eq!((&a.name, &a.shape, a.trainable), (&b.name, &b.shape, b.trainable));
            for (x, y) in a.values.iter().zip(&b.values) {
                assert_eq!(*y, *x as f32 as f64);
                assert!((x - y).abs() <= x.abs() * f32::EPSILON as f64);
            }
        }
        let m = back.models(&tiny()).unwrap();
        assert_eq!(m.enc.params().len(), enc.params().len());
        assert!(m.img.is_none());
        // re-encoding a loaded checkpoint is byte-stable
        assert_eq!(back.encode(), Checkpoint::decode(&back.encode()).unwrap().encode());
    }

    #[test]
    fn truncation_is_a_checksum_error() {
        let bytes = ae_checkpoint().0.encode();
        for cut in [1, 5, bytes.len() / 2, bytes.len() - 9] {
            let e = Checkpoint::decode(&bytes[..bytes.len() - cut]).unwrap_err();
            assert!(matches!(e, Error::Checksum { .. }), "cut {cut}: {e}");
        }
        let mut flipped = bytes.clone();
        flipped[40] ^= 1;
        assert!(matches!(Checkpoint::decode(&flipped), Err(Error::Checksum { .. })));
    }

    #[test]
    fn version_and_magic_are_checked() {
        let mut bytes = ae_checkpoint().0.encode();
        bytes[4] = 2;
        assert!(matches!(Checkpoint::decode(&bytes), Err(Error::Version { found: 2, expected: 1 })));
        bytes[0] = b'X';
        assert!(matches!(Checkpoint::decode(&bytes), Err(Error::Format(_))));
    }

    #[test]
    fn stage_two_needs_stage_one_blocks() {
        let mc = tiny();
        let img = ImageEncoder::new(&mc, Head::Deterministic, 3).unwrap();
        let only_img = Checkpoint::new(Stage::LatentMatching, String::new(), &[img.params()]);
        assert!(matches!(only_img.models(&mc), Err(Error::Stage(_))));
        assert!(matches!(only_img.require_stage_one(&mc), Err(Error::Stage(_))));
        let (ae, enc, dec) = ae_checkpoint();
        assert!(ae.require_stage_one(&mc).is_ok());
        let lm = Checkpoint::new(Stage::LatentMatching, String::new(), &[enc.params(), dec.params(), img.params()]);
        assert!(lm.models(&mc).unwrap().img.is_some());
        assert!(matches!(lm.require_stage_one(&mc), Err(Error::Stage(_))));
    }

    #[test]
    fn missing_and_extra_blocks_are_rejected() {
        let mc = tiny();
        let (mut c, _, _) = ae_checkpoint();
        let last = c.blocks.pop().unwrap();
        assert!(c.models(&mc).is_err());
        c.blocks.push(last.clone());
        let mut extra = last;
        extra.name = "zz.extra".into();
        c.blocks.push(extra.clone());
        assert!(matches!(c.models(&mc), Err(Error::Format(_))));
        c.blocks.pop();
        extra.name = "pd.extra".into();
        c.blocks.push(extra);
        assert!(c.models(&mc).is_err());
    }
}
