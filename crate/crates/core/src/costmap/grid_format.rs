//! `.agrid`: "AGRD", version u16 LE, role u8, frame u8, width u32 LE,
//! height u32 LE, then width*height binary32 LE values, row-major.

use std::fs;
use std::path::Path;

use super::{AttentionMap, CostmapError, MapFrame, MapRole, Result};

pub const AGRID_MAGIC: &[u8; 4] = b"AGRD";
pub const AGRID_VERSION: u16 = 1;
pub const AGRID_HEADER_LEN: usize = 16;

fn format_err(offset: usize, reason: impl Into<String>) -> CostmapError {
    CostmapError::Format {
        offset,
        reason: reason.into(),
    }
}

pub fn encode_grid(map: &AttentionMap) -> Vec<u8> {
    let mut out = Vec::with_capacity(AGRID_HEADER_LEN + 4 * map.len());
    out.extend_from_slice(AGRID_MAGIC);
    out.extend_from_slice(&AGRID_VERSION.to_le_bytes());
    out.push(map.role().code());
    out.push(map.frame().code());
    out.extend_from_slice(&(map.width() as u32).to_le_bytes());
    out.extend_from_slice(&(map.height() as u32).to_le_bytes());
    for v in map.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_grid(bytes: &[u8]) -> Result<AttentionMap> {
    if bytes.len() < AGRID_HEADER_LEN {
        return Err(format_err(bytes.len(), "truncated header"));
    }
    if &bytes[0..4] != AGRID_MAGIC {
        return Err(format_err(0, "bad magic bytes"));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != AGRID_VERSION {
        return Err(format_err(4, format!("unsupported version {version}")));
    }
    let role = MapRole::from_code(bytes[6])
        .ok_or_else(|| format_err(6, format!("unknown role code {}", bytes[6])))?;
    let frame = MapFrame::from_code(bytes[7])
        .ok_or_else(|| format_err(7, format!("unknown frame code {}", bytes[7])))?;
    let width = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let height = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    if width == 0 {
        return Err(format_err(8, "zero width"));
    }
    if height == 0 {
        return Err(format_err(12, "zero height"));
    }
    let count = width
        .checked_mul(height)
        .ok_or_else(|| format_err(8, "grid size overflows"))?;
    let expected = count
        .checked_mul(4)
        .and_then(|n| n.checked_add(AGRID_HEADER_LEN))
        .ok_or_else(|| format_err(8, "grid size overflows"))?;
    if bytes.len() < expected {
        return Err(format_err(
            bytes.len(),
            format!("truncated payload: expected {expected} bytes"),
        ));
    }
    if bytes.len() > expected {
        return Err(format_err(expected, "trailing bytes after payload"));
    }
    let mut values = Vec::with_capacity(count);
    for (k, chunk) in bytes[AGRID_HEADER_LEN..].chunks_exact(4).enumerate() {
        let v = f32::from_le_bytes(chunk.try_into().unwrap());
        if !(0.0..=1.0).contains(&v) {
            return Err(format_err(
                AGRID_HEADER_LEN + 4 * k,
                format!("value {v} outside [0, 1]"),
            ));
        }
        values.push(v);
    }
    AttentionMap::new(width, height, values, role, frame)
}

pub fn save_grid(map: &AttentionMap, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_grid(map))?;
    Ok(())
}

pub fn load_grid(path: impl AsRef<Path>) -> Result<AttentionMap> {
    decode_grid(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample() -> AttentionMap {
        AttentionMap::new(
            3,
            2,
            vec![0.0, 0.1, 0.2, 0.5, 0.75, 1.0],
            MapRole::Vlm,
            MapFrame::Ground,
        )
        .unwrap()
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.agrid");
        save_grid(&sample(), &p).unwrap();
        assert_eq!(load_grid(&p).unwrap(), sample());
    }

    #[test]
    fn size_of_128_square() {
        let m = AttentionMap::zeros(128, 128, MapRole::Distilled, MapFrame::Image).unwrap();
        assert_eq!(encode_grid(&m).len(), 16 + 4 * 128 * 128);
        assert_eq!(encode_grid(&m).len(), 65552);
    }

    #[test]
    fn corrupted_magic() {
        let mut b = encode_grid(&sample());
        b[1] = b'X';
        assert!(matches!(
            decode_grid(&b),
            Err(CostmapError::Format { offset: 0, .. })
        ));
    }

    #[test]
    fn truncated_payload_and_header() {
        let b = encode_grid(&sample());
        let e = decode_grid(&b[..b.len() - 2]).unwrap_err();
        assert!(matches!(e, CostmapError::Format { offset, .. } if offset == b.len() - 2));
        assert!(matches!(
            decode_grid(&b[..10]),
            Err(CostmapError::Format { offset: 10, .. })
        ));
    }

    #[test]
    fn out_of_range_value_names_offset() {
        let mut b = encode_grid(&sample());
        b[16 + 4 * 2..16 + 4 * 3].copy_from_slice(&1.5f32.to_le_bytes());
        assert!(matches!(
            decode_grid(&b),
            Err(CostmapError::Format { offset: 24, .. })
        ));
    }

    #[test]
    fn bad_role_code() {
        let mut b = encode_grid(&sample());
        b[6] = 9;
        assert!(matches!(
            decode_grid(&b),
            Err(CostmapError::Format { offset: 6, .. })
        ));
    }

    proptest! {
        #[test]
        fn round_trip_is_exact(
            w in 1usize..12,
            h in 1usize..12,
            seed in prop::collection::vec(0.0f32..=1.0, 144),
            role in 0u8..4,
            frame in 0u8..2,
        ) {
            let m = AttentionMap::new(
                w, h, seed[..w * h].to_vec(),
                MapRole::from_code(role).unwrap(),
                MapFrame::from_code(frame).unwrap(),
            ).unwrap();
            let back = decode_grid(&encode_grid(&m)).unwrap();
            prop_assert_eq!(back, m);
        }
    }
}
