//! Analytic compute/memory model comparing a full cross-entropy segmentation
//! head against the prototype triplet loss with kNN mining.
//!
//! One multiply-accumulate counts as 2 FLOPs and every stored score or loss
//! value as 4 bytes.

use std::fmt::Write;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StageCost {
    pub stage: &'static str,
    pub flops: u64,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CostReport {
    pub flops: u64,
    pub bytes: u64,
    pub breakdown: Vec<StageCost>,
}

impl CostReport {
    fn from_stages(breakdown: Vec<StageCost>) -> Self {
        Self {
            flops: breakdown.iter().map(|s| s.flops).sum(),
            bytes: breakdown.iter().map(|s| s.bytes).sum(),
            breakdown,
        }
    }

    pub fn stage(&self, name: &str) -> Option<&StageCost> {
        self.breakdown.iter().find(|s| s.stage == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CostParams {
    pub height: u64,
    pub width: u64,
    pub classes: u64,
    pub dim: u64,
    pub active: u64,
}

/// Returns `(cross_entropy, prototype_triplet)`.
///
/// Cross-entropy scores every pixel against every class. The triplet loss
/// scores each active class mean against every prototype (kNN search), then
/// each pixel against one positive and one negative prototype.
pub fn cost_model(p: &CostParams) -> (CostReport, CostReport) {
    let pixels = p.height * p.width;
    let ce = CostReport::from_stages(vec![StageCost {
        stage: "scores",
        flops: pixels * p.classes * p.dim * 2,
        bytes: pixels * p.classes * 4,
    }]);
    let triplet = CostReport::from_stages(vec![
        StageCost {
            stage: "kNN",
            flops: p.active * p.classes * p.dim * 2,
            bytes: p.active * p.classes * 4,
        },
        StageCost {
            stage: "triplet",
            flops: pixels * 2 * p.dim * 2,
            bytes: pixels * 4,
        },
    ]);
    (ce, triplet)
}

const MIB: f64 = 1024.0 * 1024.0;
const GIB: f64 = 1024.0 * MIB;

/// Fixed-column table; GFLOPS/MFLOPS are 1e9/1e6 FLOPs.
pub fn format_cost_table(p: &CostParams, ce: &CostReport, triplet: &CostReport) -> String {
    let knn = triplet.stage("kNN").copied().unwrap_or(StageCost {
        stage: "kNN",
        flops: 0,
        bytes: 0,
    });
    let trip = triplet.stage("triplet").copied().unwrap_or(StageCost {
        stage: "triplet",
        flops: 0,
        bytes: 0,
    });
    let gf = |f: u64| format!("{:.1} GFLOPS", f as f64 / 1e9);
    let mf = |f: u64| format!("{:.1} MFLOPS", f as f64 / 1e6);
    let gb = |b: u64| format!("{:.1} GiB", b as f64 / GIB);
    let mb = |b: u64| format!("{:.2} MiB", b as f64 / MIB);

    let mut out = String::new();
    let _ = writeln!(
        out,
        "# H={} W={} C={} D={} A={}",
        p.height, p.width, p.classes, p.dim, p.active
    );
    let _ = writeln!(
        out,
        "{:<12} | {:>14} | {:>13} {:>13} {:>13}",
        "", "cross entropy", "proto. kNN", "triplet", "total"
    );
    let _ = writeln!(
        out,
        "{:<12} | {:>14} | {:>13} {:>13} {:>13}",
        "Computation",
        gf(ce.flops),
        mf(knn.flops),
        mf(trip.flops),
        mf(triplet.flops)
    );
    let _ = writeln!(
        out,
        "{:<12} | {:>14} | {:>13} {:>13} {:>13}",
        "Memory",
        gb(ce.bytes),
        mb(knn.bytes),
        mb(trip.bytes),
        mb(triplet.bytes)
    );
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference() -> CostParams {
        CostParams {
            height: 640,
            width: 480,
            classes: 5000,
            dim: 12,
            active: 100,
        }
    }

    #[test]
    fn reproduces_reference_figures() {
        let (ce, tri) = cost_model(&reference());
        assert_eq!(ce.flops, 36_864_000_000);
        assert_eq!(ce.bytes, 6_144_000_000);
        assert!((ce.bytes as f64 / GIB - 5.72).abs() < 0.01);
        let knn = tri.stage("kNN").unwrap();
        assert_eq!((knn.flops, knn.bytes), (12_000_000, 2_000_000));
        assert!((knn.bytes as f64 / MIB - 1.91).abs() < 0.005);
        let t = tri.stage("triplet").unwrap();
        assert_eq!((t.flops, t.bytes), (14_745_600, 1_228_800));
        assert!((t.bytes as f64 / MIB - 1.17).abs() < 0.005);
        assert_eq!(tri.flops, knn.flops + t.flops);
        assert_eq!(tri.bytes, knn.bytes + t.bytes);
    }

    #[test]
    fn scaling_in_classes_and_active_labels() {
        let base = reference();
        let (ce1, t1) = cost_model(&base);
        let (ce2, t2) = cost_model(&CostParams {
            classes: 10_000,
            ..base
        });
        assert_eq!(ce2.flops, 2 * ce1.flops);
        assert_eq!(t2.stage("triplet"), t1.stage("triplet"));
        assert_eq!(t2.stage("kNN").unwrap().flops, 2 * t1.stage("kNN").unwrap().flops);
        let (_, t3) = cost_model(&CostParams { active: 200, ..base });
        assert_eq!(t3.stage("kNN").unwrap().flops, 2 * t1.stage("kNN").unwrap().flops);
    }

    #[test]
    fn table_shows_rounded_figures() {
        let p = reference();
        let (ce, tri) = cost_model(&p);
        let table = format_cost_table(&p, &ce, &tri);
        for needle in [
            "36.9 GFLOPS",
            "5.7 GiB",
            "12.0 MFLOPS",
            "1.91 MiB",
            "14.7 MFLOPS",
            "1.17 MiB",
            "26.7 MFLOPS",
            "3.08 MiB",
        ] {
            assert!(table.contains(needle), "missing {needle} in\n{table}");
        }
    }
}
