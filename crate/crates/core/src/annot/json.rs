//! Deterministic JSON output: pretty layout, reals with at most 9 significant
//! digits and no exponent for magnitudes in `[1e-3, 1e9)`.

use std::io;

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};

/// Formats a finite real with up to 9 significant digits.
pub fn format_real(v: f64) -> Option<String> {
    if !v.is_finite() {
        return None;
    }
    if v == 0.0 {
        return Some("0".into());
    }
    let sci = format!("{v:.8e}");
    let (mantissa, exp) = sci.split_once('e')?;
    let exp: i32 = exp.parse().ok()?;
    if (-3..=8).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        Some(trim_fraction(format!("{v:.decimals$}")))
    } else {
        Some(format!("{}e{exp}", trim_fraction(mantissa.to_string())))
    }
}

fn trim_fraction(mut s: String) -> String {
    if s.contains('.') {
        while s.ends_with('0') {
            s.pop();
        }
        if s.ends_with('.') {
            s.pop();
        }
    }
    if s == "-0" {
        s = "0".into();
    }
    s
}

/// The value a real takes after a save/load cycle.
pub fn canonical_real(v: f64) -> f64 {
    format_real(v).and_then(|s| s.parse().ok()).unwrap_or(v)
}

/// Pretty formatter that writes floats through [`format_real`].
pub struct CanonicalFormatter<'a> {
    inner: PrettyFormatter<'a>,
}

impl Default for CanonicalFormatter<'_> {
    fn default() -> Self {
        Self { inner: PrettyFormatter::with_indent(b"  ") }
    }
}

impl Formatter for CanonicalFormatter<'_> {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        let s = format_real(value).ok_or_else(|| io::Error::other(format!("cannot serialize non-finite real {value}")))?;
        writer.write_all(s.as_bytes())
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }

    fn begin_array<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.begin_array(writer)
    }

    fn end_array<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.end_array(writer)
    }

    fn begin_array_value<W: ?Sized + io::Write>(&mut self, writer: &mut W, first: bool) -> io::Result<()> {
        self.inner.begin_array_value(writer, first)
    }

    fn end_array_value<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.end_array_value(writer)
    }

    fn begin_object<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.begin_object(writer)
    }

    fn end_object<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.end_object(writer)
    }

    fn begin_object_key<W: ?Sized + io::Write>(&mut self, writer: &mut W, first: bool) -> io::Result<()> {
        self.inner.begin_object_key(writer, first)
    }

    fn begin_object_value<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.begin_object_value(writer)
    }

    fn end_object_value<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.end_object_value(writer)
    }
}

/// Serializes `value` with [`CanonicalFormatter`], newline-terminated.
pub fn to_canonical_vec<T: Serialize + ?Sized>(value: &T) -> serde_json::Result<Vec<u8>> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, CanonicalFormatter::default());
    value.serialize(&mut ser)?;
    out.push(b'\n');
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn fixed_range_has_no_exponent() {
        assert_eq!(format_real(30.0).unwrap(), "30");
        assert_eq!(format_real(0.001).unwrap(), "0.001");
        assert_eq!(format_real(0.1).unwrap(), "0.1");
        assert_eq!(format_real(-2.5).unwrap(), "-2.5");
        assert_eq!(format_real(123456789.4).unwrap(), "123456789");
        assert_eq!(format_real(1.0 / 3.0).unwrap(), "0.333333333");
        assert_eq!(format_real(2.0 / 3.0 * 1000.0).unwrap(), "666.666667");
        assert_eq!(format_real(0.0009999999999).unwrap(), "0.001");
        assert_eq!(format_real(-0.0).unwrap(), "0");
    }

    #[test]
    fn out_of_range_uses_exponent() {
        assert_eq!(format_real(1.5e-5).unwrap(), "1.5e-5");
        assert_eq!(format_real(2e9).unwrap(), "2e9");
        assert_eq!(format_real(999999999.9).unwrap(), "1e9");
        assert_eq!(format_real(f64::NAN), None);
    }

    #[test]
    fn formatter_output() {
        let v = serde_json::json!({"a": [1.25, 2], "b": 0.1 + 0.2});
        let s = String::from_utf8(to_canonical_vec(&v).unwrap()).unwrap();
        assert_eq!(s, "{\n  \"a\": [\n    1.25,\n    2\n  ],\n  \"b\": 0.3\n}\n");
        // serde_json maps non-finite reals to null before the formatter sees them.
        assert_eq!(to_canonical_vec(&f64::INFINITY).unwrap(), b"null\n");
    }

    proptest! {
        #[test]
        fn canonicalization_is_idempotent(v in prop::num::f64::NORMAL | prop::num::f64::ZERO) {
            let c = canonical_real(v);
            prop_assert_eq!(canonical_real(c), c);
            prop_assert_eq!(format_real(c), format_real(v));
            if v != 0.0 {
                prop_assert!(((c - v) / v).abs() <= 5.1e-9);
            }
        }
    }
}
