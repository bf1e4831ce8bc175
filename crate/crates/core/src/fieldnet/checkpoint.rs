use super::network::{FieldParams, FEATURES};
use super::FieldError;

pub const CHECKPOINT_MAGIC: &str = "holoflow-field";
pub const CHECKPOINT_VERSION: u32 = 1;

/// One header line `holoflow-field v1 width=W features=F params=P`, then
/// `P` little-endian f64 values.
pub fn write_checkpoint(params: &FieldParams) -> Vec<u8> {
    let header = format!(
        "{CHECKPOINT_MAGIC} v{CHECKPOINT_VERSION} width={} features={FEATURES} params={}\n",
        params.width(),
        params.len()
    );
    let mut out = header.into_bytes();
    out.reserve(8 * params.len());
    for v in params.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn bad(message: impl Into<String>) -> FieldError {
    FieldError::Checkpoint(message.into())
}

pub fn read_checkpoint(bytes: &[u8]) -> Result<FieldParams, FieldError> {
    let newline = bytes.iter().position(|&b| b == b'\n').ok_or_else(|| bad("missing header line"))?;
    let header = std::str::from_utf8(&bytes[..newline]).map_err(|_| bad("header is not utf-8"))?;
    let mut parts = header.split_whitespace();
    if parts.next() != Some(CHECKPOINT_MAGIC) {
        return Err(bad("not a field checkpoint"));
    }
    let version = parts.next().unwrap_or_default();
    if version != format!("v{CHECKPOINT_VERSION}") {
        return Err(bad(format!("unsupported version {version:?}")));
    }
    let mut field = |key: &str| -> Result<usize, FieldError> {
        parts
            .next()
            .and_then(|p| p.strip_prefix(key))
            .and_then(|p| p.strip_prefix('='))
            .and_then(|p| p.parse().ok())
            .ok_or_else(|| bad(format!("header missing {key}")))
    };
    let width = field("width")?;
    let features = field("features")?;
    let count = field("params")?;
    if features != FEATURES {
        return Err(bad(format!("checkpoint has {features} input features, this build uses {FEATURES}")));
    }
    let blob = &bytes[newline + 1..];
    if blob.len() != 8 * count {
        return Err(bad(format!("expected {} bytes of parameters, found {}", 8 * count, blob.len())));
    }
    let values = blob
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    FieldParams::from_values(width, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fieldnet::init_field;

    #[test]
    fn round_trip_is_bitwise() {
        let p = init_field(7, 3).unwrap();
        let bytes = write_checkpoint(&p);
        assert!(bytes.starts_with(b"holoflow-field v1 width=7 "));
        assert_eq!(read_checkpoint(&bytes).unwrap(), p);
    }

    #[test]
    fn rejects_corrupt_files() {
        let p = init_field(3, 1).unwrap();
        let bytes = write_checkpoint(&p);
        assert!(read_checkpoint(&bytes[..bytes.len() - 1]).is_err());
        assert!(read_checkpoint(b"garbage\n").is_err());
        assert!(read_checkpoint(b"").is_err());
        let mut v2 = bytes.clone();
        v2[16] = b'2';
        assert!(read_checkpoint(&v2).is_err());
        let mut nan = bytes.clone();
        let n = nan.len();
        nan[n - 8..].copy_from_slice(&f64::NAN.to_le_bytes());
        assert!(matches!(read_checkpoint(&nan), Err(FieldError::NonFiniteParameter)));
    }
}
