//! Output formatting: round-trip-safe floats, report JSON, trajectory CSV.

use crate::solver::Trajectory;
use serde::Serialize;
use std::io;

/// 17 significant digits in scientific notation; parsing the result
/// recovers the exact bits. Non-finite values render as JSON null.
pub fn format_float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        "null".to_string()
    }
}

struct WideFloats;

impl serde_json::ser::Formatter for WideFloats {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        writer.write_all(format_float(value).as_bytes())
    }

    fn write_f32<W>(&mut self, writer: &mut W, value: f32) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        self.write_f64(writer, value as f64)
    }
}

/// Pretty JSON with every float printed at full precision.
pub fn to_json_string(value: &impl Serialize) -> crate::Result<String> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, WideFloats);
    value
        .serialize(&mut ser)
        .map_err(|e| crate::Error::Value(format!("serialization failed: {e}")))?;
    out.push(b'\n');
    String::from_utf8(out).map_err(|e| crate::Error::Value(format!("non-utf8 output: {e}")))
}

/// One row per grid point: step index, time, then every coefficient.
pub fn trajectory_csv(traj: &Trajectory) -> String {
    let width = traj.fields.first().map(|f| f.coeffs().len()).unwrap_or(0);
    let mut csv = String::from("step,t");
    for k in 0..width {
        csv.push_str(&format!(",c{k}"));
    }
    csv.push('\n');
    for (step, (t, field)) in traj.times.iter().zip(&traj.fields).enumerate() {
        csv.push_str(&format!("{step},{}", format_float(*t)));
        for c in field.coeffs() {
            csv.push_str(&format!(",{}", format_float(*c)));
        }
        csv.push('\n');
    }
    csv
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip_exactly() {
        for x in [0.1, 1.0 / 3.0, std::f64::consts::PI, -0.0, 1e-300, 2.5e17] {
            let s = format_float(x);
            let back: f64 = s.parse().unwrap();
            assert_eq!(back.to_bits(), x.to_bits(), "{s}");
        }
        assert_eq!(format_float(f64::NAN), "null");
    }

    #[test]
    fn json_floats_use_wide_format() {
        #[derive(Serialize)]
        struct S {
            x: f64,
        }
        let s = to_json_string(&S { x: 0.1 }).unwrap();
        assert!(s.contains("1.0000000000000001e-1"), "{s}");
        let v: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert_eq!(v["x"].as_f64().unwrap().to_bits(), (0.1f64).to_bits());
    }
}
