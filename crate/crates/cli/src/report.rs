//! Report emission. Rows arrive sorted; output bytes depend only on them.

use taxlab::ComplexityReport;

pub const HEADER: [&str; 12] = ["mechanism", "m", "n", "tax", "cc", "price", "tie", "mc", "val", "dem", "d", "valid"];

pub fn report_csv(reports: &[ComplexityReport]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(HEADER).expect("in-memory write");
    for r in reports {
        w.write_record([
            r.mechanism.clone(),
            r.m.to_string(),
            r.n.to_string(),
            r.tax.to_string(),
            r.cc.to_string(),
            r.price.to_string(),
            r.tie.to_string(),
            r.mc.to_string(),
            r.val.to_string(),
            r.dem.to_string(),
            r.d.to_string(),
            r.valid.to_string(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv output is utf-8")
}
