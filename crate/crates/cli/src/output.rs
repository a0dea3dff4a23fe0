//! JSON with 17 significant digits and CSV with 9 decimals.

use std::io;

use serde::Serialize;
use serde_json::ser::Formatter;

/// Renders finite floats with 17 significant digits, so every value round-trips.
pub fn sig17(v: f64) -> String {
    if !v.is_finite() {
        return "null".into();
    }
    if v == 0.0 {
        return "0.0".into();
    }
    let sci = format!("{v:.16e}");
    let exp: i32 = sci[sci.find('e').unwrap() + 1..].parse().unwrap();
    if (-5..=16).contains(&exp) {
        format!("{:.*}", (16 - exp) as usize, v)
    } else {
        sci
    }
}

struct Sig17;

impl Formatter for Sig17 {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        writer.write_all(sig17(value).as_bytes())
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Sig17);
    value.serialize(&mut ser).expect("serialising to memory cannot fail");
    String::from_utf8(buf).expect("JSON is UTF-8")
}

pub fn csv(v: f64) -> String {
    format!("{v:.9}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits() {
        assert_eq!(sig17(2.0 * std::f64::consts::SQRT_2), "2.8284271247461903");
        assert_eq!(sig17(1.0), "1.0000000000000000");
        assert_eq!(sig17(0.75), "0.75000000000000000");
        assert_eq!(sig17(-1e-20), "-9.9999999999999995e-21");
        assert_eq!(sig17(0.0), "0.0");
        for v in [0.1, 1.0 / 3.0, 123456.789, 6.02e23, -4.4e-9] {
            assert_eq!(sig17(v).parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn json_uses_the_formatter() {
        let s = to_json(&serde_json::json!({"x": 0.5, "n": 3}));
        assert_eq!(s, r#"{"n":3,"x":0.50000000000000000}"#);
        assert_eq!(csv(std::f64::consts::FRAC_PI_4), "0.785398163");
    }
}
