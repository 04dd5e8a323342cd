//! Fixed-precision numeric serialization for output files.
//!
//! Every computed float written to disk is first rounded to
//! [`SIGNIFICANT_DIGITS`] so that outputs compare byte-for-byte across runs
//! and thread counts.

use serde::Serializer;

pub const SIGNIFICANT_DIGITS: usize = 12;

pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x)
        .parse()
        .expect("formatted float parses")
}

/// Plain decimal for moderate magnitudes, exponent notation otherwise.
pub fn fmt_sig(x: f64) -> String {
    let r = round_sig(x);
    if r == 0.0 {
        return "0".into();
    }
    if !r.is_finite() {
        return r.to_string();
    }
    let exp = r.abs().log10().floor();
    if (-5.0..15.0).contains(&exp) {
        r.to_string()
    } else {
        format!("{r:e}")
    }
}

pub fn ser_sig<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_f64(round_sig(*x))
}

pub fn ser_sig_opt<S: Serializer>(x: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
    match x {
        Some(v) => s.serialize_f64(round_sig(*v)),
        None => s.serialize_none(),
    }
}
