//! Locale-free text formatting for CSV output.

/// Float with 17 significant digits and a `.` decimal separator.
pub fn format_float(v: f64) -> String {
    if v == 0.0 {
        // avoid "-0"
        return "0.0000000000000000e0".to_string();
    }
    format!("{v:.16e}")
}

/// Scalar types that can appear in CSV output.
pub trait CsvField: Copy {
    fn csv_field(self) -> String;
}

macro_rules! int_field {
    ($($t:ty),*) => {$(
        impl CsvField for $t {
            fn csv_field(self) -> String {
                self.to_string()
            }
        }
    )*};
}

int_field!(u32, u64, i32, i64, usize);

impl CsvField for f64 {
    fn csv_field(self) -> String {
        format_float(self)
    }
}

impl CsvField for f32 {
    fn csv_field(self) -> String {
        format_float(self as f64)
    }
}
