//! Binary container framing shared by model checkpoints and shot datasets.
//!
//! Layout: 4-byte magic, `u32` format version, `u64` header length, a JSON
//! header of that length, then the raw payload. All integers little-endian.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::{Error, Result};

/// Assembles the full container byte image. Exposed separately so callers
/// can hash the exact bytes a save would produce without touching disk.
pub(crate) fn container_bytes<H: Serialize>(
    magic: &[u8; 4],
    version: u32,
    header: &H,
    payload: &[u8],
) -> Result<Vec<u8>> {
    let header_json = serde_json::to_vec(header)?;
    let mut out = Vec::with_capacity(16 + header_json.len() + payload.len());
    out.extend_from_slice(magic);
    out.extend_from_slice(&version.to_le_bytes());
    out.extend_from_slice(&(header_json.len() as u64).to_le_bytes());
    out.extend_from_slice(&header_json);
    out.extend_from_slice(payload);
    Ok(out)
}

pub(crate) fn write_container<H: Serialize>(
    path: &Path,
    magic: &[u8; 4],
    version: u32,
    header: &H,
    payload: &[u8],
) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&container_bytes(magic, version, header, payload)?)?;
    w.flush()?;
    Ok(())
}

pub(crate) fn read_container<H: DeserializeOwned>(
    path: &Path,
    magic: &[u8; 4],
    max_version: u32,
) -> Result<(u32, H, Vec<u8>)> {
    let mut r = BufReader::new(File::open(path)?);
    let mut raw = Vec::new();
    r.read_to_end(&mut raw)?;
    let name = path.display();

    if raw.len() < 16 {
        return Err(Error::Format(format!("{name}: truncated container")));
    }
    if &raw[0..4] != magic {
        return Err(Error::Format(format!(
            "{name}: bad magic, expected {:?}",
            std::str::from_utf8(magic).unwrap_or("?")
        )));
    }
    let version = u32::from_le_bytes(raw[4..8].try_into().expect("4 bytes"));
    if version == 0 || version > max_version {
        return Err(Error::Format(format!(
            "{name}: unsupported format version {version} (newest supported is {max_version})"
        )));
    }
    let header_len = u64::from_le_bytes(raw[8..16].try_into().expect("8 bytes")) as usize;
    if raw.len() < 16 + header_len {
        return Err(Error::Format(format!("{name}: truncated header")));
    }
    let header: H = serde_json::from_slice(&raw[16..16 + header_len])
        .map_err(|e| Error::Format(format!("{name}: malformed header: {e}")))?;
    Ok((version, header, raw[16 + header_len..].to_vec()))
}

pub(crate) fn f32_to_le_bytes(values: &[f32]) -> Vec<u8> {
    let mut out = Vec::with_capacity(values.len() * 4);
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub(crate) fn f32_from_le_bytes(bytes: &[u8]) -> Result<Vec<f32>> {
    if !bytes.len().is_multiple_of(4) {
        return Err(Error::Format(format!(
            "payload length {} is not a whole number of f32 values",
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
        .collect())
}

/// Lowercase hex SHA-256 of a byte buffer.
pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    hex::encode(h.finalize())
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::Deserialize;

    #[derive(Debug, PartialEq, Serialize, Deserialize)]
    struct Head {
        name: String,
        n: u32,
    }

    const MAGIC: &[u8; 4] = b"TWTS";

    #[test]
    fn round_trip_preserves_header_and_payload() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.bin");
        let head = Head {
            name: "demo".into(),
            n: 7,
        };
        let payload = f32_to_le_bytes(&[1.0, -2.5, f32::MIN_POSITIVE]);
        write_container(&path, MAGIC, 1, &head, &payload).unwrap();
        let (v, got, raw): (u32, Head, Vec<u8>) = read_container(&path, MAGIC, 1).unwrap();
        assert_eq!(v, 1);
        assert_eq!(got, head);
        assert_eq!(
            f32_from_le_bytes(&raw).unwrap(),
            vec![1.0, -2.5, f32::MIN_POSITIVE]
        );
    }

    #[test]
    fn wrong_magic_and_future_version_are_format_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.bin");
        let head = Head {
            name: "demo".into(),
            n: 1,
        };
        write_container(&path, b"XXXX", 1, &head, &[]).unwrap();
        assert!(matches!(
            read_container::<Head>(&path, MAGIC, 1),
            Err(Error::Format(_))
        ));
        write_container(&path, MAGIC, 9, &head, &[]).unwrap();
        assert!(matches!(
            read_container::<Head>(&path, MAGIC, 1),
            Err(Error::Format(_))
        ));
    }

    #[test]
    fn truncated_file_is_a_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.bin");
        std::fs::write(&path, b"TWTS\x01").unwrap();
        assert!(matches!(
            read_container::<Head>(&path, MAGIC, 1),
            Err(Error::Format(_))
        ));
    }

    #[test]
    fn missing_file_is_an_io_error() {
        assert!(matches!(
            read_container::<Head>(Path::new("/nonexistent/x.bin"), MAGIC, 1),
            Err(Error::Io(_))
        ));
    }

    #[test]
    fn ragged_f32_payload_is_rejected() {
        assert!(f32_from_le_bytes(&[0, 1, 2]).is_err());
    }

    #[test]
    fn sha256_matches_known_vector() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
