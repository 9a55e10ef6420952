//! Middlebury `.flo`: `f32` magic 202021.25 ("PIEH"), `i32` width and height,
//! then row-major interleaved `(u, v)` `f32` pairs, all little-endian.

use super::FlowField;
use crate::error::{Error, Result};

pub const FLO_MAGIC: f32 = 202021.25;

const HEADER_LEN: usize = 12;

/// `flow_00007.flo` for index 7.
pub fn flow_file_name(index: usize) -> String {
    format!("flow_{index:05}.flo")
}

impl FlowField {
    pub fn write_flo(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.data.len() * 8);
        out.extend_from_slice(&FLO_MAGIC.to_le_bytes());
        out.extend_from_slice(&(self.width as i32).to_le_bytes());
        out.extend_from_slice(&(self.height as i32).to_le_bytes());
        for [u, v] in &self.data {
            out.extend_from_slice(&u.to_le_bytes());
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn read_flo(bytes: &[u8]) -> Result<FlowField> {
        let word = |offset: usize| -> Result<[u8; 4]> {
            bytes
                .get(offset..offset + 4)
                .map(|b| [b[0], b[1], b[2], b[3]])
                .ok_or(Error::Format {
                    offset: bytes.len(),
                    message: "truncated .flo header".into(),
                })
        };
        let magic = f32::from_le_bytes(word(0)?);
        if magic != FLO_MAGIC {
            return Err(Error::Format {
                offset: 0,
                message: format!("bad .flo magic {magic}"),
            });
        }
        let width = i32::from_le_bytes(word(4)?);
        let height = i32::from_le_bytes(word(8)?);
        if width <= 0 || height <= 0 {
            return Err(Error::Format {
                offset: 4,
                message: format!("invalid .flo dimensions {width}x{height}"),
            });
        }
        let (width, height) = (width as usize, height as usize);
        let expected = width
            .checked_mul(height)
            .and_then(|n| n.checked_mul(8))
            .and_then(|n| n.checked_add(HEADER_LEN))
            .ok_or(Error::Format {
                offset: 4,
                message: "flow dimensions overflow".into(),
            })?;
        if bytes.len() < expected {
            return Err(Error::Format {
                offset: bytes.len(),
                message: format!("truncated payload: expected {expected} bytes"),
            });
        }
        if bytes.len() > expected {
            return Err(Error::Format {
                offset: expected,
                message: format!("{} trailing bytes", bytes.len() - expected),
            });
        }
        let data = bytes[HEADER_LEN..]
            .chunks_exact(8)
            .map(|c| {
                [
                    f32::from_le_bytes([c[0], c[1], c[2], c[3]]),
                    f32::from_le_bytes([c[4], c[5], c[6], c[7]]),
                ]
            })
            .collect();
        FlowField::from_vec(width, height, data).map_err(|e| Error::Format {
            offset: HEADER_LEN,
            message: e.to_string(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn magic_bytes_spell_pieh() {
        let bytes = FlowField::zeros(1, 1).write_flo();
        assert_eq!(&bytes[0..4], b"PIEH");
        assert_eq!(f32::from_le_bytes([bytes[0], bytes[1], bytes[2], bytes[3]]), 202021.25);
    }

    #[test]
    fn payload_length_for_3x2() {
        assert_eq!(FlowField::zeros(3, 2).write_flo().len(), 12 + 3 * 2 * 2 * 4);
    }

    #[test]
    fn small_field_round_trips() {
        let f = FlowField::from_vec(2, 2, vec![[0.1, -7.5], [3.0e-7, 1e6], [-0.0, 2.5], [9.0, 0.25]])
            .unwrap();
        let bytes = f.write_flo();
        let back = FlowField::read_flo(&bytes).unwrap();
        assert_eq!(back.write_flo(), bytes);
        assert_eq!(back, f);
    }

    #[test]
    fn errors_carry_offsets() {
        let good = FlowField::zeros(3, 2).write_flo();

        let mut bad_magic = good.clone();
        bad_magic[0] ^= 0xff;
        assert!(matches!(FlowField::read_flo(&bad_magic), Err(Error::Format { offset: 0, .. })));

        let truncated = &good[..good.len() - 3];
        match FlowField::read_flo(truncated) {
            Err(Error::Format { offset, .. }) => assert_eq!(offset, truncated.len()),
            other => panic!("{other:?}"),
        }

        assert!(matches!(FlowField::read_flo(&good[..6]), Err(Error::Format { .. })));

        let mut trailing = good.clone();
        trailing.push(0);
        match FlowField::read_flo(&trailing) {
            Err(Error::Format { offset, .. }) => assert_eq!(offset, good.len()),
            other => panic!("{other:?}"),
        }

        let mut negative = good;
        negative[4..8].copy_from_slice(&(-3i32).to_le_bytes());
        assert!(matches!(FlowField::read_flo(&negative), Err(Error::Format { offset: 4, .. })));
    }

    proptest! {
        #[test]
        fn round_trip_is_bit_exact(
            w in 1usize..6, h in 1usize..6,
            seed in proptest::collection::vec(-1e4f32..1e4, 72)
        ) {
            let f = FlowField::from_fn(w, h, |x, y| {
                let k = 2 * (y * w + x);
                (seed[k % 72], seed[(k + 1) % 72])
            });
            let bytes = f.write_flo();
            prop_assert_eq!(FlowField::read_flo(&bytes).unwrap().write_flo(), bytes);
        }
    }
}
