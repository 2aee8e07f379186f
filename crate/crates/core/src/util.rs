use serde::Serialize;

/// Serializes `rows` as CSV with a header taken from the field names.
pub fn csv_string<T: Serialize>(rows: &[T]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).expect("in-memory csv write");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv flush")).expect("csv output is utf-8")
}

/// Worker count from `BSCT_JOBS`, if set to a positive integer.
pub fn jobs_from_env() -> Option<usize> {
    std::env::var("BSCT_JOBS").ok()?.trim().parse().ok().filter(|&n| n > 0)
}
