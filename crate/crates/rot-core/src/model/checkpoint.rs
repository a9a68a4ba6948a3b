//! Versioned binary model checkpoint.
//!
//! Layout (all integers little-endian, floats LE f64):
//!
//! ```text
//! magic "ROTM" | version u32 | L u32 | d u32 | heads u32 | V u32
//! | max_seq u32 | final_norm u8 (0 standard, 1 identity) | seed u64
//! | planted u8 (0|1) [ layer u32 | target u32 | slope f64 | direction d*f64 ]
//! | tok_emb V*d | pos_emb max_seq*d
//! | per layer: ln1_gain d | ln1_bias d | wq d*d | wk d*d | wv d*d | wo d*d
//!              | ln2_gain d | ln2_bias d | w_up d*4d | w_down 4d*d
//! | final_gain d | final_bias d | unembed d*V
//! ```
//!
//! The model id is `toy-` plus the first 16 hex chars of the SHA-256 of the
//! serialized bytes, so a saved and reloaded model keeps its identity.

use std::fs;
use std::io::{Cursor, Read, Write};
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::format::{
    expect_eof, expect_magic, read_f64, read_f64_vec, read_u32, read_u64, read_u8, write_f64,
    write_f64_slice, write_magic, write_u32, write_u64, write_u8, FormatError,
};
use crate::linalg::Vector;

use super::transformer::{FinalNorm, LayerWeights, ModelConfig, PlantedInfo, MAX_SEQ};
use super::{ModelError, ToyTransformer};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"ROTM";
const VERSION: u32 = 1;

impl ToyTransformer {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to a Vec cannot fail");
        buf
    }

    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        let bytes = self.to_bytes();
        fs::write(path, bytes).map_err(|e| ModelError::File(FormatError::Io(e)))
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        let bytes = fs::read(path).map_err(|e| ModelError::File(FormatError::Io(e)))?;
        Self::from_bytes(&bytes)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ModelError> {
        let mut r = Cursor::new(bytes);
        let model = Self::read_from(&mut r)?;
        expect_eof(&mut r).map_err(ModelError::File)?;
        Ok(model)
    }

    pub(crate) fn digest_id(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.to_bytes());
        let digest = hasher.finalize();
        let hex: String = digest[..8].iter().map(|b| format!("{b:02x}")).collect();
        format!("toy-{hex}")
    }

    fn write_to(&self, w: &mut impl Write) -> Result<(), FormatError> {
        let d = self.config.hidden_dim;
        write_magic(w, CHECKPOINT_MAGIC)?;
        write_u32(w, VERSION)?;
        write_u32(w, self.config.layers as u32)?;
        write_u32(w, d as u32)?;
        write_u32(w, self.config.heads as u32)?;
        write_u32(w, self.config.vocab_size as u32)?;
        write_u32(w, MAX_SEQ as u32)?;
        write_u8(w, match self.config.final_norm {
            FinalNorm::Standard => 0,
            FinalNorm::Identity => 1,
        })?;
        write_u64(w, self.seed)?;
        match &self.planted {
            None => write_u8(w, 0)?,
            Some(p) => {
                write_u8(w, 1)?;
                write_u32(w, p.layer as u32)?;
                write_u32(w, p.target_token)?;
                write_f64(w, p.slope)?;
                write_f64_slice(w, p.direction.as_slice())?;
            }
        }
        write_f64_slice(w, &self.tok_emb)?;
        write_f64_slice(w, &self.pos_emb)?;
        for layer in &self.layers {
            write_f64_slice(w, &layer.ln1_gain)?;
            write_f64_slice(w, &layer.ln1_bias)?;
            write_f64_slice(w, &layer.wq)?;
            write_f64_slice(w, &layer.wk)?;
            write_f64_slice(w, &layer.wv)?;
            write_f64_slice(w, &layer.wo)?;
            write_f64_slice(w, &layer.ln2_gain)?;
            write_f64_slice(w, &layer.ln2_bias)?;
            write_f64_slice(w, &layer.w_up)?;
            write_f64_slice(w, &layer.w_down)?;
        }
        write_f64_slice(w, &self.final_gain)?;
        write_f64_slice(w, &self.final_bias)?;
        write_f64_slice(w, &self.unembed)?;
        Ok(())
    }

    fn read_from(r: &mut impl Read) -> Result<Self, ModelError> {
        expect_magic(r, CHECKPOINT_MAGIC).map_err(ModelError::File)?;
        let version = read_u32(r).map_err(ModelError::File)?;
        if version != VERSION {
            return Err(ModelError::File(FormatError::corrupt(format!(
                "unsupported checkpoint version {version}"
            ))));
        }
        let layers = read_u32(r).map_err(ModelError::File)? as usize;
        let d = read_u32(r).map_err(ModelError::File)? as usize;
        let heads = read_u32(r).map_err(ModelError::File)? as usize;
        let vocab = read_u32(r).map_err(ModelError::File)? as usize;
        let max_seq = read_u32(r).map_err(ModelError::File)? as usize;
        if max_seq != MAX_SEQ {
            return Err(ModelError::File(FormatError::corrupt(format!(
                "checkpoint positional table {max_seq} does not match runtime {MAX_SEQ}"
            ))));
        }
        let final_norm = match read_u8(r).map_err(ModelError::File)? {
            0 => FinalNorm::Standard,
            1 => FinalNorm::Identity,
            other => {
                return Err(ModelError::File(FormatError::corrupt(format!(
                    "bad final_norm flag {other}"
                ))))
            }
        };
        let seed = read_u64(r).map_err(ModelError::File)?;
        let config = ModelConfig { layers, hidden_dim: d, heads, vocab_size: vocab, final_norm };
        config.validate()?;

        let planted = match read_u8(r).map_err(ModelError::File)? {
            0 => None,
            1 => {
                let layer = read_u32(r).map_err(ModelError::File)? as usize;
                let target_token = read_u32(r).map_err(ModelError::File)?;
                let slope = read_f64(r).map_err(ModelError::File)?;
                let direction = read_f64_vec(r, d).map_err(ModelError::File)?;
                let direction = Vector::new(direction).map_err(|_| {
                    ModelError::File(FormatError::corrupt("planted direction not finite"))
                })?;
                Some(PlantedInfo { layer, target_token, slope, direction })
            }
            other => {
                return Err(ModelError::File(FormatError::corrupt(format!(
                    "bad planted flag {other}"
                ))))
            }
        };

        let mut fvec = |len: usize| -> Result<Vec<f64>, ModelError> {
            let v = read_f64_vec(r, len).map_err(ModelError::File)?;
            if v.iter().any(|x| !x.is_finite()) {
                return Err(ModelError::File(FormatError::corrupt("non-finite weight")));
            }
            Ok(v)
        };
        let tok_emb = fvec(vocab * d)?;
        let pos_emb = fvec(MAX_SEQ * d)?;
        let mut layer_weights = Vec::with_capacity(layers);
        for _ in 0..layers {
            layer_weights.push(LayerWeights {
                ln1_gain: fvec(d)?,
                ln1_bias: fvec(d)?,
                wq: fvec(d * d)?,
                wk: fvec(d * d)?,
                wv: fvec(d * d)?,
                wo: fvec(d * d)?,
                ln2_gain: fvec(d)?,
                ln2_bias: fvec(d)?,
                w_up: fvec(d * 4 * d)?,
                w_down: fvec(4 * d * d)?,
            });
        }
        let final_gain = fvec(d)?;
        let final_bias = fvec(d)?;
        let unembed = fvec(d * vocab)?;

        let mut model = ToyTransformer {
            config,
            seed,
            tok_emb,
            pos_emb,
            layers: layer_weights,
            final_gain,
            final_bias,
            unembed,
            planted,
            model_id: String::new(),
        };
        model.model_id = model.digest_id();
        Ok(model)
    }
}
