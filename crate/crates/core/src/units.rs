//! Byte-size parsing and formatting. Only IEC suffixes are accepted.

use crate::{Error, Result};

pub const KIB: u64 = 1024;
pub const MIB: u64 = 1024 * KIB;
pub const GIB: u64 = 1024 * MIB;

/// Parse `"4MiB"`, `"25kiB"`, `"512B"` or a bare byte count.
pub fn parse_size(text: &str) -> Result<u64> {
    let t = text.trim();
    let split = t.find(|c: char| !c.is_ascii_digit()).unwrap_or(t.len());
    let (num, suffix) = t.split_at(split);
    if num.is_empty() {
        return Err(Error::Usage(format!("size '{text}' has no number")));
    }
    let n: u64 = num
        .parse()
        .map_err(|_| Error::Usage(format!("size '{text}' is out of range")))?;
    let mult = match suffix.trim() {
        "" | "B" => 1,
        "kiB" | "KiB" => KIB,
        "MiB" => MIB,
        "GiB" => GIB,
        other => {
            return Err(Error::Usage(format!(
                "size suffix '{other}' not recognised (use B, kiB, MiB or GiB)"
            )))
        }
    };
    n.checked_mul(mult)
        .ok_or_else(|| Error::Usage(format!("size '{text}' overflows")))
}

/// Human form used in tables: the largest IEC unit that divides evenly.
pub fn format_size(bytes: u64) -> String {
    if bytes == 0 {
        "0".to_string()
    } else if bytes.is_multiple_of(GIB) {
        format!("{}GiB", bytes / GIB)
    } else if bytes.is_multiple_of(MIB) {
        format!("{}MiB", bytes / MIB)
    } else if bytes.is_multiple_of(KIB) {
        format!("{}kiB", bytes / KIB)
    } else {
        format!("{bytes}B")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_iec() {
        assert_eq!(parse_size("4MiB").unwrap(), 4 * MIB);
        assert_eq!(parse_size("25kiB").unwrap(), 25 * KIB);
        assert_eq!(parse_size("300").unwrap(), 300);
        assert_eq!(parse_size("7B").unwrap(), 7);
    }

    #[test]
    fn rejects_si() {
        assert!(parse_size("4MB").is_err());
        assert!(parse_size("4kB").is_err());
        assert!(parse_size("MiB").is_err());
    }

    #[test]
    fn formats() {
        assert_eq!(format_size(108 * KIB), "108kiB");
        assert_eq!(format_size(8 * MIB), "8MiB");
        assert_eq!(format_size(100), "100B");
    }
}
