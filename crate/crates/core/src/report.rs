//! Report emitters: AUM histograms split by noise status, data-map tables
//! joined with AUM and verdicts, and a rank correlation helper.
//!
//! Every emitter is a pure function of its inputs and returns bytes, so
//! identical inputs give byte-identical files.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{load_dataset, DataFormat, Dataset};
use crate::dynamics::{compute_aum, compute_datamap, ingest_dynamics, AumRecord, DataMapRecord, DynamicsOptions};
use crate::error::{Error, Result};
use crate::io::{csv_bytes_with_header, read_json};
use crate::noise::{dominant_class_report, ClusterRow, NoiseMask};
use crate::threshold::ThresholdManifest;

/// Histogram value range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HistogramRange {
    /// From the smallest to the largest AUM.
    Auto,
    Fixed { min: f64, max: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramSpec {
    pub bin_count: usize,
    pub range: HistogramRange,
}

impl Default for HistogramSpec {
    fn default() -> Self {
        Self {
            bin_count: 20,
            range: HistogramRange::Auto,
        }
    }
}

/// One histogram bin. Bins are half-open `[bin_low, bin_high)` except the
/// last, which also holds `bin_high`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub bin_low: f64,
    pub bin_high: f64,
    pub count_clean: usize,
    pub count_noise: usize,
}

impl HistogramBin {
    pub fn total(&self) -> usize {
        self.count_clean + self.count_noise
    }
}

/// Bins AUM values into clean and noise series. Without a mask every sample
/// counts as clean. With a fixed range, values outside it land in the first
/// or last bin so the counts always sum to the number of records. An auto
/// range over identical values collapses to a single bin.
pub fn aum_histogram(aums: &[AumRecord], mask: Option<&NoiseMask>, spec: &HistogramSpec) -> Result<Vec<HistogramBin>> {
    if spec.bin_count == 0 {
        return Err(Error::invalid("histogram needs at least one bin"));
    }
    if aums.is_empty() {
        return Err(Error::Empty("no AUM records to bin".into()));
    }
    if let Some(r) = aums.iter().find(|r| !r.aum.is_finite()) {
        return Err(Error::invalid(format!("sample `{}` has a non-finite AUM", r.sample_id)));
    }
    let (lo, hi, bins) = match spec.range {
        HistogramRange::Fixed { min, max } => {
            if !(min.is_finite() && max.is_finite() && min < max) {
                return Err(Error::invalid(format!("histogram range [{min}, {max}] is empty")));
            }
            (min, max, spec.bin_count)
        }
        HistogramRange::Auto => {
            let lo = aums.iter().map(|r| r.aum).fold(f64::INFINITY, f64::min);
            let hi = aums.iter().map(|r| r.aum).fold(f64::NEG_INFINITY, f64::max);
            if lo == hi {
                (lo, hi, 1)
            } else {
                (lo, hi, spec.bin_count)
            }
        }
    };
    let edges: Vec<f64> = (0..=bins)
        .map(|i| if i == bins { hi } else { lo + (hi - lo) * i as f64 / bins as f64 })
        .collect();
    let mut out: Vec<HistogramBin> = edges
        .windows(2)
        .map(|w| HistogramBin {
            bin_low: w[0],
            bin_high: w[1],
            count_clean: 0,
            count_noise: 0,
        })
        .collect();
    for r in aums {
        let bin = bin_index(r.aum, &edges);
        if mask.is_some_and(|m| m.contains(&r.sample_id)) {
            out[bin].count_noise += 1;
        } else {
            out[bin].count_clean += 1;
        }
    }
    Ok(out)
}

fn bin_index(x: f64, edges: &[f64]) -> usize {
    let bins = edges.len() - 1;
    // first interior edge strictly greater than x
    let above = edges[1..bins].partition_point(|&e| e <= x);
    above.min(bins - 1)
}

pub fn histogram_csv(bins: &[HistogramBin]) -> Result<Vec<u8>> {
    csv_bytes_with_header(&["bin_low", "bin_high", "count_clean", "count_noise"], bins)
}

/// A minimal stacked bar chart: clean counts in blue, noise counts in red.
pub fn histogram_svg(bins: &[HistogramBin]) -> String {
    const WIDTH: f64 = 640.0;
    const HEIGHT: f64 = 320.0;
    const MARGIN: f64 = 40.0;
    let peak = bins.iter().map(HistogramBin::total).max().unwrap_or(0).max(1) as f64;
    let bar_w = (WIDTH - 2.0 * MARGIN) / bins.len().max(1) as f64;
    let plot_h = HEIGHT - 2.0 * MARGIN;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(svg, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    for (i, b) in bins.iter().enumerate() {
        let x = MARGIN + i as f64 * bar_w;
        let h_clean = plot_h * b.count_clean as f64 / peak;
        let h_noise = plot_h * b.count_noise as f64 / peak;
        let base = HEIGHT - MARGIN;
        let _ = writeln!(
            svg,
            r##"<rect x="{x:.2}" y="{:.2}" width="{bar_w:.2}" height="{h_clean:.2}" fill="#4878d0"/>"##,
            base - h_clean
        );
        let _ = writeln!(
            svg,
            r##"<rect x="{x:.2}" y="{:.2}" width="{bar_w:.2}" height="{h_noise:.2}" fill="#d65f5f"/>"##,
            base - h_clean - h_noise
        );
    }
    if let (Some(first), Some(last)) = (bins.first(), bins.last()) {
        let y = HEIGHT - MARGIN / 3.0;
        let _ = writeln!(svg, r#"<text x="{MARGIN}" y="{y:.2}" font-size="12">{}</text>"#, first.bin_low);
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{y:.2}" font-size="12" text-anchor="end">{}</text>"#,
            WIDTH - MARGIN,
            last.bin_high
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{MARGIN}" y="{:.2}" font-size="12">AUM (blue: clean, red: noise)</text>"#,
        MARGIN / 2.0
    );
    svg.push_str("</svg>\n");
    svg
}

/// One row of the data-map table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataMapPoint {
    pub sample_id: String,
    pub confidence: f64,
    pub variability: f64,
    pub aum: f64,
    pub flagged: bool,
}

/// Joins data-map statistics with AUMs and the flagged set. Both tables must
/// cover the same ids; the first id found in only one of them is reported.
pub fn datamap_points(
    datamap: &[DataMapRecord],
    aums: &[AumRecord],
    flagged: &BTreeSet<String>,
) -> Result<Vec<DataMapPoint>> {
    let by_id: BTreeMap<&str, &DataMapRecord> = datamap.iter().map(|r| (r.sample_id.as_str(), r)).collect();
    let aum_ids: BTreeSet<&str> = aums.iter().map(|r| r.sample_id.as_str()).collect();
    if let Some(id) = by_id.keys().find(|id| !aum_ids.contains(*id)) {
        return Err(Error::IdMismatch((*id).to_string()));
    }
    let mut points = aums
        .iter()
        .map(|r| {
            let d = by_id
                .get(r.sample_id.as_str())
                .ok_or_else(|| Error::IdMismatch(r.sample_id.clone()))?;
            Ok(DataMapPoint {
                sample_id: r.sample_id.clone(),
                confidence: d.confidence,
                variability: d.variability,
                aum: r.aum,
                flagged: flagged.contains(&r.sample_id),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    points.sort_by(|a, b| a.sample_id.cmp(&b.sample_id));
    Ok(points)
}

pub fn datamap_csv(points: &[DataMapPoint]) -> Result<Vec<u8>> {
    csv_bytes_with_header(&["sample_id", "confidence", "variability", "aum", "flagged"], points)
}

/// Average ranks starting at 1; tied values share the mean of their ranks.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation with averaged ties. `None` when the inputs
/// differ in length, have fewer than two points, or one side is constant.
pub fn spearman(a: &[f64], b: &[f64]) -> Option<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return None;
    }
    let (ra, rb) = (average_ranks(a), average_ranks(b));
    let n = a.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let (mut cov, mut va, mut vb) = (0.0, 0.0, 0.0);
    for (x, y) in ra.iter().zip(&rb) {
        cov += (x - ma) * (y - mb);
        va += (x - ma).powi(2);
        vb += (y - mb).powi(2);
    }
    (va > 0.0 && vb > 0.0).then(|| cov / (va * vb).sqrt())
}

/// Files derived from an experiment results directory.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultsReport {
    pub histogram_csv: Vec<u8>,
    pub histogram_svg: String,
    pub datamap_csv: Vec<u8>,
    /// Per-cluster aggregates, present when the training data carries
    /// cluster ids.
    pub clusters_csv: Option<Vec<u8>>,
}

#[derive(Deserialize)]
struct RunsManifest {
    runs: Vec<ThresholdManifest>,
}

#[derive(Deserialize)]
struct FlagLine {
    sample_id: String,
    flagged: u8,
}

/// Reads the `flagged` column of a flags CSV into a set of ids.
pub fn read_flagged(path: &Path) -> Result<BTreeSet<String>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let mut flagged = BTreeSet::new();
    for (i, row) in reader.deserialize::<FlagLine>().enumerate() {
        let row = row.map_err(|e| Error::parse(path, i + 2, e.to_string()))?;
        if row.flagged != 0 {
            flagged.insert(row.sample_id);
        }
    }
    Ok(flagged)
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::parse(path, 0, format!("{other:?}")),
    }
}

/// Rebuilds the histogram, data-map and cluster tables from a results
/// directory written by the experiment runner. Each sample is scored from
/// the threshold run in which it kept its own label. `flags` defaults to the
/// directory's `flags.csv`.
pub fn report_from_results(dir: &Path, flags: Option<&Path>, spec: &HistogramSpec) -> Result<ResultsReport> {
    let train = load_dataset(&dir.join("train_input.jsonl"), DataFormat::Jsonl, None)?;
    let manifest: RunsManifest = read_json(&dir.join("manifest.json"))?;
    let run1_fakes = manifest
        .runs
        .iter()
        .find(|r| r.run_index == 1)
        .map(|r| r.fake_ids.clone())
        .ok_or_else(|| Error::invalid("manifest has no run 1"))?;
    let dyn1 = ingest_dynamics(&dir.join("dynamics_run1.jsonl"), false)?;
    let dyn2 = ingest_dynamics(&dir.join("dynamics_run2.jsonl"), false)?;
    let labels = train.labels();
    let opts = DynamicsOptions::default();
    let pick = |a: Vec<AumRecord>, b: Vec<AumRecord>| -> Vec<AumRecord> {
        a.into_iter()
            .zip(b)
            .map(|(r1, r2)| if run1_fakes.contains(&r1.sample_id) { r2 } else { r1 })
            .collect()
    };
    let aums = pick(compute_aum(&dyn1, &labels, opts)?, compute_aum(&dyn2, &labels, opts)?);
    let datamap: Vec<DataMapRecord> = compute_datamap(&dyn1, &labels, opts)?
        .into_iter()
        .zip(compute_datamap(&dyn2, &labels, opts)?)
        .map(|(r1, r2)| if run1_fakes.contains(&r1.sample_id) { r2 } else { r1 })
        .collect();
    let mask_path = dir.join("noise_mask.json");
    let mask: Option<NoiseMask> = if mask_path.exists() { Some(NoiseMask::load(&mask_path)?) } else { None };
    let flags_path = flags.map(Path::to_path_buf).unwrap_or_else(|| dir.join("flags.csv"));
    let flagged = read_flagged(&flags_path)?;

    let bins = aum_histogram(&aums, mask.as_ref(), spec)?;
    let points = datamap_points(&datamap, &aums, &flagged)?;
    let clusters_csv = if train.iter().all(|s| s.cluster_id.is_some()) {
        let rows = dominant_class_report(&aums, &train, None)?;
        Some(cluster_csv(&rows, &flagged, &train)?)
    } else {
        None
    };
    Ok(ResultsReport {
        histogram_csv: histogram_csv(&bins)?,
        histogram_svg: histogram_svg(&bins),
        datamap_csv: datamap_csv(&points)?,
        clusters_csv,
    })
}

#[derive(Serialize)]
struct ClusterLine {
    cluster_id: u32,
    dominant_class: usize,
    n_dominant: usize,
    n_non_dominant: usize,
    mean_aum_dominant: Option<f64>,
    mean_aum_non_dominant: Option<f64>,
    flagged_dominant: usize,
    flagged_non_dominant: usize,
}

/// Cluster aggregates with flag counts taken from a verdict set rather than
/// a single threshold.
pub fn cluster_csv(rows: &[ClusterRow], flagged: &BTreeSet<String>, dataset: &Dataset) -> Result<Vec<u8>> {
    let mut per_cluster: BTreeMap<u32, (usize, usize)> = BTreeMap::new();
    let dominant: BTreeMap<u32, usize> = rows.iter().map(|r| (r.cluster_id, r.dominant_class)).collect();
    for s in dataset.iter().filter(|s| flagged.contains(&s.id)) {
        let Some(k) = s.cluster_id else { continue };
        let Some(&d) = dominant.get(&k) else { continue };
        let e = per_cluster.entry(k).or_default();
        if s.label == d {
            e.0 += 1;
        } else {
            e.1 += 1;
        }
    }
    let lines = rows.iter().map(|r| {
        let (fd, fnd) = per_cluster.get(&r.cluster_id).copied().unwrap_or_default();
        ClusterLine {
            cluster_id: r.cluster_id,
            dominant_class: r.dominant_class,
            n_dominant: r.n_dominant,
            n_non_dominant: r.n_non_dominant,
            mean_aum_dominant: r.mean_aum_dominant,
            mean_aum_non_dominant: r.mean_aum_non_dominant,
            flagged_dominant: fd,
            flagged_non_dominant: fnd,
        }
    });
    csv_bytes_with_header(
        &[
            "cluster_id",
            "dominant_class",
            "n_dominant",
            "n_non_dominant",
            "mean_aum_dominant",
            "mean_aum_non_dominant",
            "flagged_dominant",
            "flagged_non_dominant",
        ],
        lines,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(id: &str, aum: f64) -> AumRecord {
        AumRecord {
            sample_id: id.into(),
            margins: vec![aum],
            aum,
            label_used: 0,
            ragged: false,
        }
    }

    fn dm(id: &str, confidence: f64) -> DataMapRecord {
        DataMapRecord {
            sample_id: id.into(),
            confidence,
            variability: 0.1,
            correctness: 1.0,
        }
    }

    fn fixed(bins: usize, min: f64, max: f64) -> HistogramSpec {
        HistogramSpec {
            bin_count: bins,
            range: HistogramRange::Fixed { min, max },
        }
    }

    #[test]
    fn three_bins_over_closed_range() {
        let aums = [rec("a", -1.0), rec("b", -1.0), rec("c", 2.0)];
        let h = aum_histogram(&aums, None, &fixed(3, -1.0, 2.0)).unwrap();
        let counts: Vec<usize> = h.iter().map(|b| b.count_clean).collect();
        assert_eq!(counts, [2, 0, 1]);
        assert!(h.iter().all(|b| b.count_noise == 0));
        assert_eq!((h[0].bin_low, h[2].bin_high), (-1.0, 2.0));
    }

    #[test]
    fn interior_edge_belongs_to_upper_bin() {
        let aums = [rec("a", 0.0), rec("b", 1.0)];
        let h = aum_histogram(&aums, None, &fixed(2, 0.0, 2.0)).unwrap();
        assert_eq!(h[0].count_clean, 1);
        assert_eq!(h[1].count_clean, 1);
    }

    #[test]
    fn mask_splits_series() {
        let aums = [rec("a", 0.0), rec("b", 1.0), rec("c", 1.0)];
        let mask = NoiseMask {
            seed: 0,
            rate: 0.3,
            flipped_ids: ["b".to_string()].into(),
        };
        let h = aum_histogram(&aums, Some(&mask), &fixed(1, 0.0, 1.0)).unwrap();
        assert_eq!((h[0].count_clean, h[0].count_noise), (2, 1));
    }

    #[test]
    fn out_of_range_values_are_clamped() {
        let aums = [rec("a", -5.0), rec("b", 5.0)];
        let h = aum_histogram(&aums, None, &fixed(4, 0.0, 1.0)).unwrap();
        assert_eq!(h[0].count_clean, 1);
        assert_eq!(h[3].count_clean, 1);
    }

    #[test]
    fn degenerate_auto_range_gives_one_bin() {
        let aums = [rec("a", 0.5), rec("b", 0.5)];
        let h = aum_histogram(&aums, None, &HistogramSpec::default()).unwrap();
        assert_eq!(h.len(), 1);
        assert_eq!(h[0].count_clean, 2);
    }

    #[test]
    fn zero_bins_and_empty_input_are_errors() {
        assert!(aum_histogram(&[rec("a", 0.0)], None, &fixed(0, 0.0, 1.0)).is_err());
        assert!(aum_histogram(&[], None, &HistogramSpec::default()).is_err());
        assert!(aum_histogram(&[rec("a", 0.0)], None, &fixed(2, 1.0, 1.0)).is_err());
    }

    #[test]
    fn histogram_csv_header_and_svg() {
        let h = aum_histogram(&[rec("a", 0.0), rec("b", 1.0)], None, &fixed(2, 0.0, 1.0)).unwrap();
        let csv = String::from_utf8(histogram_csv(&h).unwrap()).unwrap();
        assert_eq!(csv.lines().next().unwrap(), "bin_low,bin_high,count_clean,count_noise");
        assert_eq!(csv.lines().count(), 3);
        let svg = histogram_svg(&h);
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
    }

    #[test]
    fn datamap_join_sorted_and_complete() {
        let aums = [rec("c", 0.3), rec("a", 0.1), rec("b", 0.2)];
        let maps = [dm("a", 0.5), dm("b", 0.6), dm("c", 0.7)];
        let flagged: BTreeSet<String> = ["b".to_string()].into();
        let pts = datamap_points(&maps, &aums, &flagged).unwrap();
        let ids: Vec<&str> = pts.iter().map(|p| p.sample_id.as_str()).collect();
        assert_eq!(ids, ["a", "b", "c"]);
        assert!(pts[1].flagged && !pts[0].flagged);
        assert_eq!(pts[2].confidence, 0.7);
        let csv = String::from_utf8(datamap_csv(&pts).unwrap()).unwrap();
        assert_eq!(csv.lines().next().unwrap(), "sample_id,confidence,variability,aum,flagged");
        assert_eq!(csv.lines().nth(2).unwrap(), "b,0.6,0.1,0.2,true");
    }

    #[test]
    fn datamap_join_reports_missing_id() {
        let aums = [rec("a", 0.1), rec("z", 0.2)];
        let maps = [dm("a", 0.5)];
        match datamap_points(&maps, &aums, &BTreeSet::new()) {
            Err(Error::IdMismatch(id)) => assert_eq!(id, "z"),
            other => panic!("unexpected {other:?}"),
        }
        let maps = [dm("a", 0.5), dm("q", 0.5)];
        match datamap_points(&maps, &[rec("a", 0.1)], &BTreeSet::new()) {
            Err(Error::IdMismatch(id)) => assert_eq!(id, "q"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn spearman_known_values() {
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]), Some(1.0));
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]), Some(-1.0));
        assert_eq!(spearman(&[1.0, 1.0], &[1.0, 2.0]), None);
        assert_eq!(average_ranks(&[5.0, 1.0, 5.0]), [2.5, 1.0, 2.5]);
    }
}
