//! Published confusion matrices: every printed total, UA, PA and OA must be
//! reproduced from the counts alone.

use lcfuse_core::assess::{
    class_accuracies, overall_accuracy, percent_int, percent_one_decimal, ConfusionMatrix,
};

struct Table {
    name: &'static str,
    rows: &'static [&'static [u64]],
    row_totals: &'static [u64],
    col_totals: &'static [u64],
    ua: &'static [u32],
    pa: &'static [u32],
    oa: f64,
}

const TABLES: &[Table] = &[
    Table {
        name: "MAP-A1",
        rows: &[
            &[93, 4, 5, 6, 0, 8, 0],
            &[9, 97, 0, 21, 0, 0, 0],
            &[2, 0, 1, 1, 0, 0, 0],
            &[2, 33, 0, 46, 0, 0, 0],
            &[0, 0, 0, 0, 9, 0, 0],
            &[8, 0, 3, 0, 0, 75, 2],
            &[3, 1, 0, 4, 2, 0, 4],
        ],
        row_totals: &[116, 127, 4, 81, 9, 88, 14],
        col_totals: &[117, 135, 9, 78, 11, 83, 6],
        ua: &[80, 76, 25, 57, 100, 85, 29],
        pa: &[79, 72, 11, 59, 82, 90, 67],
        oa: 74.0,
    },
    Table {
        name: "MAP-B1",
        rows: &[
            &[95, 10, 5, 5, 1, 7, 1],
            &[11, 97, 0, 19, 1, 2, 0],
            &[6, 2, 1, 3, 0, 0, 0],
            &[3, 25, 1, 47, 0, 0, 0],
            &[0, 1, 0, 0, 9, 0, 0],
            &[1, 0, 2, 1, 0, 73, 2],
            &[1, 0, 0, 3, 0, 1, 3],
        ],
        row_totals: &[124, 130, 12, 76, 10, 79, 8],
        col_totals: &[117, 135, 9, 78, 11, 83, 6],
        ua: &[77, 75, 8, 62, 90, 92, 38],
        pa: &[81, 72, 11, 60, 82, 88, 50],
        oa: 74.0,
    },
    Table {
        name: "MAP-LL",
        rows: &[
            &[103, 6, 6, 4, 0, 7, 0],
            &[7, 110, 0, 19, 0, 0, 0],
            &[0, 0, 2, 2, 0, 0, 0],
            &[2, 19, 0, 51, 0, 0, 0],
            &[0, 0, 0, 0, 10, 0, 0],
            &[4, 0, 1, 0, 0, 76, 2],
            &[1, 0, 0, 2, 1, 0, 4],
        ],
        row_totals: &[126, 136, 4, 72, 10, 83, 8],
        col_totals: &[117, 135, 9, 78, 11, 83, 6],
        ua: &[82, 81, 50, 71, 100, 92, 50],
        pa: &[88, 81, 22, 65, 91, 92, 67],
        oa: 81.1,
    },
    Table {
        name: "MAP-R1",
        rows: &[
            &[104, 6, 6, 4, 0, 7, 0],
            &[7, 111, 0, 19, 0, 0, 0],
            &[0, 0, 2, 2, 0, 0, 0],
            &[2, 18, 0, 52, 0, 0, 0],
            &[0, 0, 0, 0, 10, 0, 0],
            &[3, 0, 1, 0, 0, 76, 2],
            &[1, 0, 0, 1, 1, 0, 4],
        ],
        row_totals: &[127, 137, 4, 72, 10, 82, 7],
        col_totals: &[117, 135, 9, 78, 11, 83, 6],
        ua: &[82, 81, 50, 72, 100, 93, 57],
        pa: &[89, 82, 22, 67, 91, 92, 67],
        oa: 81.8,
    },
    Table {
        name: "MAP-A2",
        rows: &[
            &[179, 36, 6, 17],
            &[2, 67, 1, 0],
            &[0, 0, 52, 0],
            &[4, 0, 6, 53],
        ],
        row_totals: &[238, 70, 52, 63],
        col_totals: &[185, 103, 65, 70],
        ua: &[75, 96, 100, 84],
        pa: &[97, 65, 80, 76],
        oa: 83.0,
    },
    Table {
        name: "MAP-R2",
        rows: &[
            &[181, 30, 5, 13],
            &[2, 72, 2, 1],
            &[0, 0, 58, 0],
            &[2, 1, 0, 56],
        ],
        row_totals: &[229, 77, 58, 59],
        col_totals: &[185, 103, 65, 70],
        ua: &[79, 94, 100, 95],
        pa: &[98, 70, 89, 80],
        oa: 86.8,
    },
];

#[test]
fn every_printed_statistic_matches() {
    for t in TABLES {
        let cm = ConfusionMatrix::from_rows(t.rows).unwrap();
        let c = cm.num_classes();
        let rows: Vec<u64> = (0..c).map(|i| cm.row_total(i)).collect();
        let cols: Vec<u64> = (0..c).map(|j| cm.col_total(j)).collect();
        assert_eq!(rows, t.row_totals, "{} row totals", t.name);
        assert_eq!(cols, t.col_totals, "{} column totals", t.name);
        let acc = class_accuracies(&cm);
        let ua: Vec<u32> = acc.iter().map(|a| percent_int(a.user).unwrap()).collect();
        let pa: Vec<u32> = acc.iter().map(|a| percent_int(a.producer).unwrap()).collect();
        assert_eq!(ua, t.ua, "{} UA", t.name);
        assert_eq!(pa, t.pa, "{} PA", t.name);
        assert_eq!(percent_one_decimal(overall_accuracy(&cm).unwrap()), t.oa, "{} OA", t.name);
    }
}

#[test]
fn weighted_accuracies_recover_trace() {
    for t in TABLES {
        let cm = ConfusionMatrix::from_rows(t.rows).unwrap();
        let acc = class_accuracies(&cm);
        let by_rows: f64 = acc
            .iter()
            .enumerate()
            .map(|(k, a)| a.user.unwrap() * cm.row_total(k) as f64)
            .sum();
        let by_cols: f64 = acc
            .iter()
            .enumerate()
            .map(|(k, a)| a.producer.unwrap() * cm.col_total(k) as f64)
            .sum();
        assert!((by_rows - cm.trace() as f64).abs() < 1e-9);
        assert!((by_cols - cm.trace() as f64).abs() < 1e-9);
    }
}
