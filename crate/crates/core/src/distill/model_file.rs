//! `.vlad` model files: "VLAD", version u16, config block (six u32: grid
//! width, grid height, patch, history, hidden, rank), base weights, adapters,
//! all binary32 LE, then a CRC32 of everything before it.

use std::path::Path;

use super::model::{AttentionModel, BaseWeights, LoraAdapter, Matrix, ModelConfig};
use super::{DistillError, Result};

pub const VLAD_MAGIC: &[u8; 4] = b"VLAD";
pub const VLAD_VERSION: u16 = 1;

fn put_f32s(out: &mut Vec<u8>, values: &[f64]) {
    for &v in values {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
}

pub(crate) fn write_base(out: &mut Vec<u8>, base: &BaseWeights) {
    put_f32s(out, &base.embed.data);
    put_f32s(out, &base.embed_bias);
    put_f32s(out, &base.position_bias.data);
    put_f32s(out, &base.head.data);
    put_f32s(out, &[base.head_bias]);
}

fn write_adapter(out: &mut Vec<u8>, a: &LoraAdapter) {
    put_f32s(out, &a.down.data);
    put_f32s(out, &a.up.data);
}

pub fn encode_model(model: &AttentionModel) -> Vec<u8> {
    let c = &model.config;
    let mut out = Vec::new();
    out.extend_from_slice(VLAD_MAGIC);
    out.extend_from_slice(&VLAD_VERSION.to_le_bytes());
    for v in [
        c.grid_width,
        c.grid_height,
        c.patch,
        c.history,
        c.hidden,
        c.rank,
    ] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    write_base(&mut out, &model.base);
    write_adapter(&mut out, &model.embed_lora);
    write_adapter(&mut out, &model.head_lora);
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| DistillError::ModelFormat {
                offset: self.pos,
                reason: "truncated".into(),
            })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f32s(&mut self, n: usize) -> Result<Vec<f64>> {
        let offset = self.pos;
        let raw = self.take(n.checked_mul(4).ok_or_else(|| DistillError::ModelFormat {
            offset,
            reason: "size overflow".into(),
        })?)?;
        let vals: Vec<f64> = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect();
        if let Some(k) = vals.iter().position(|v| !v.is_finite()) {
            return Err(DistillError::ModelFormat {
                offset: offset + 4 * k,
                reason: "non-finite weight".into(),
            });
        }
        Ok(vals)
    }

    fn matrix(&mut self, rows: usize, cols: usize) -> Result<Matrix> {
        Ok(Matrix {
            rows,
            cols,
            data: self.f32s(rows * cols)?,
        })
    }
}

pub fn decode_model(bytes: &[u8]) -> Result<AttentionModel> {
    let fmt = |offset, reason: &str| DistillError::ModelFormat {
        offset,
        reason: reason.into(),
    };
    if bytes.len() < 4 + 2 + 24 + 4 {
        return Err(fmt(bytes.len(), "file too short"));
    }
    if &bytes[..4] != VLAD_MAGIC {
        return Err(fmt(0, "bad magic bytes"));
    }
    let body_len = bytes.len() - 4;
    let stored = u32::from_le_bytes(bytes[body_len..].try_into().unwrap());
    if crc32fast::hash(&bytes[..body_len]) != stored {
        return Err(fmt(body_len, "CRC32 mismatch"));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != VLAD_VERSION {
        return Err(fmt(4, "unsupported version"));
    }
    let mut r = Reader {
        bytes: &bytes[..body_len],
        pos: 6,
    };
    let mut dims = [0usize; 6];
    for d in &mut dims {
        *d = r.u32()? as usize;
    }
    let config = ModelConfig {
        grid_width: dims[0],
        grid_height: dims[1],
        patch: dims[2],
        history: dims[3],
        hidden: dims[4],
        rank: dims[5],
    };
    config
        .validate()
        .map_err(|_| fmt(6, "invalid config block"))?;
    let (e, d, cells, rank) = (
        config.hidden,
        config.patch_dim(),
        config.cells(),
        config.rank,
    );
    let base = BaseWeights {
        embed: r.matrix(e, d)?,
        embed_bias: r.f32s(e)?,
        position_bias: r.matrix(cells, e)?,
        head: r.matrix(1, e)?,
        head_bias: r.f32s(1)?[0],
    };
    let embed_lora = LoraAdapter {
        down: r.matrix(rank, d)?,
        up: r.matrix(e, rank)?,
    };
    let head_lora = LoraAdapter {
        down: r.matrix(rank, e)?,
        up: r.matrix(1, rank)?,
    };
    if r.pos != body_len {
        return Err(fmt(r.pos, "trailing bytes before checksum"));
    }
    Ok(AttentionModel {
        config,
        base,
        embed_lora,
        head_lora,
    })
}

pub fn save_model(model: &AttentionModel, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, encode_model(model))?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<AttentionModel> {
    decode_model(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> AttentionModel {
        let cfg = ModelConfig {
            grid_width: 5,
            grid_height: 3,
            patch: 2,
            history: 2,
            hidden: 4,
            rank: 2,
        };
        let mut m = AttentionModel::new(cfg, 11).unwrap();
        m.embed_lora
            .up
            .data
            .iter_mut()
            .enumerate()
            .for_each(|(k, v)| *v = 0.25 * k as f64);
        m
    }

    #[test]
    fn round_trip_exact_for_binary32_params() {
        let m = model();
        assert_eq!(decode_model(&encode_model(&m)).unwrap(), m);
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.vlad");
        save_model(&model(), &p).unwrap();
        assert_eq!(load_model(&p).unwrap(), model());
    }

    #[test]
    fn corruption_detected() {
        let mut b = encode_model(&model());
        let mid = b.len() / 2;
        b[mid] ^= 0x40;
        assert!(matches!(
            decode_model(&b),
            Err(DistillError::ModelFormat { .. })
        ));
        let mut b = encode_model(&model());
        b[0] = b'X';
        assert!(matches!(
            decode_model(&b),
            Err(DistillError::ModelFormat { offset: 0, .. })
        ));
        let b = encode_model(&model());
        assert!(decode_model(&b[..b.len() - 9]).is_err());
    }
}
