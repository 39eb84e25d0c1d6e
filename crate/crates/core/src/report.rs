//! Per-series reports and Table-1-style aggregation.
//!
//! `analyze_series` bundles the battery verdict with the scalar estimators
//! (complexity, entropies, Hurst, stationarity flags) and, on request, the
//! nonlinear reconstruction of the underlying time differences. `aggregate`
//! folds many reports into per-(class, kind) cells; `emit_figures` writes the
//! plot data for threshold spectra and the complexity-vs-entropy scatter.

use serde::{Deserialize, Serialize};

use crate::battery::{run_battery, BatteryConfig, BatteryError, BatteryReport};
use crate::complexity::{chsh_min_entropy_bound, hurst_of_bits, kc, min_entropy};
use crate::nonlinear::{ami_delay, false_nearest_neighbors, largest_lyapunov};
use crate::series::{BitSeries, Provenance, SeriesClass, SeriesKind, ThresholdSpectrum, TimeDiffSeries};
use crate::stationarity::stationarity_of_bits;

pub const REPORT_SCHEMA: u32 = 1;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ReportError {
    #[error("empty series")]
    EmptySeries,
    #[error("no reports to aggregate")]
    EmptyInput,
    #[error(transparent)]
    Battery(#[from] BatteryError),
}

/// A metric that could not be computed, and why.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedMetric {
    pub metric: String,
    pub reason: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeriesReport {
    pub schema: u32,
    pub provenance: Provenance,
    pub length: usize,
    pub kc: Option<f64>,
    pub phrase_count: Option<usize>,
    pub h_min: Option<f64>,
    pub shannon: Option<f64>,
    pub hurst: Option<f64>,
    pub hurst_r2: Option<f64>,
    /// 1 = unit root rejected.
    pub adf: Option<u8>,
    pub adf_stat: Option<f64>,
    /// 1 = stationarity rejected.
    pub kpss: Option<u8>,
    pub kpss_stat: Option<f64>,
    pub battery: BatteryReport,
    pub rejected: bool,
    /// Entanglement-implied lower bound on h_min, when the run's S is known.
    pub chsh_bound: Option<f64>,
    /// kc >= h_min, the entropy-bounds-complexity check.
    pub zurek_ok: Option<bool>,
    pub tau: Option<usize>,
    pub d_e: Option<usize>,
    pub lyapunov: Option<f64>,
    pub horizon: Option<u64>,
    pub extracted: bool,
    pub skipped: Vec<SkippedMetric>,
}

#[derive(Debug, Clone)]
pub struct AnalyzeOptions {
    pub battery: BatteryConfig,
    pub stationarity_alpha: f64,
    /// Run the Takens reconstruction on the series' time differences.
    /// Costly, and only meaningful for TD-kind series.
    pub nonlinear: bool,
    /// Max embedding dimension for the FNN sweep.
    pub nonlinear_dmax: usize,
    /// Fixed reconstruction delay; None selects it from the mutual
    /// information.
    pub nonlinear_tau: Option<usize>,
    /// Measured or nominal S of the run, for the min-entropy bound.
    pub chsh_s: Option<f64>,
}

impl Default for AnalyzeOptions {
    fn default() -> Self {
        Self {
            battery: BatteryConfig::default(),
            stationarity_alpha: 0.05,
            nonlinear: false,
            nonlinear_dmax: 12,
            nonlinear_tau: None,
            chsh_s: None,
        }
    }
}

/// Scores one series. `td` carries the pre-binarization time differences of
/// TD-kind series so the nonlinear analysis can work on metric values.
pub fn analyze_series(
    series: &BitSeries,
    td: Option<&TimeDiffSeries>,
    options: &AnalyzeOptions,
) -> Result<SeriesReport, ReportError> {
    let bits = &series.bits;
    if bits.is_empty() {
        return Err(ReportError::EmptySeries);
    }
    let mut skipped = Vec::new();
    let mut skip = |metric: &str, reason: String| {
        skipped.push(SkippedMetric {
            metric: metric.into(),
            reason,
        });
    };

    let battery = run_battery(bits, &options.battery)?;
    let rejected = battery.rejected;

    let complexity = match kc(bits) {
        Ok(c) => Some(c),
        Err(e) => {
            skip("kc", e.to_string());
            None
        }
    };
    let entropy = match min_entropy(bits) {
        Ok(e) => Some(e),
        Err(e) => {
            skip("h_min", e.to_string());
            None
        }
    };
    let hurst = match hurst_of_bits(bits) {
        Ok(h) => Some(h),
        Err(e) => {
            skip("hurst", e.to_string());
            None
        }
    };
    let stationarity = match stationarity_of_bits(bits, options.stationarity_alpha) {
        Ok(s) => Some(s),
        Err(e) => {
            skip("stationarity", e.to_string());
            None
        }
    };
    let chsh_bound = match options.chsh_s {
        Some(s) => match chsh_min_entropy_bound(s) {
            Ok(b) => Some(b),
            Err(e) => {
                skip("chsh_bound", e.to_string());
                None
            }
        },
        None => None,
    };
    let zurek_ok = match (&complexity, &entropy) {
        (Some(c), Some(e)) => Some(c.kc >= e.h_min),
        _ => None,
    };

    let mut tau = None;
    let mut d_e = None;
    let mut lyapunov = None;
    let mut horizon = None;
    if options.nonlinear {
        match td {
            None => skip("nonlinear", "no time differences for this series".into()),
            Some(td) => {
                let reals: Vec<f64> = td.diffs.iter().map(|&d| d as f64).collect();
                let chosen_tau = match options.nonlinear_tau {
                    Some(t) => Ok(t.max(1)),
                    None => ami_delay(&reals, 20),
                };
                match chosen_tau {
                    Err(e) => skip("nonlinear", format!("delay selection failed: {e}")),
                    Ok(t) => {
                        tau = Some(t);
                        match false_nearest_neighbors(&reals, t, options.nonlinear_dmax) {
                            Err(e) => skip("nonlinear", format!("embedding failed: {e}")),
                            Ok(embedding) => {
                                d_e = embedding.d_e;
                                if let Some(d) = embedding.d_e {
                                    match largest_lyapunov(&reals, t, d) {
                                        Ok(l) => {
                                            lyapunov = Some(l.lambda);
                                            horizon = l.horizon;
                                        }
                                        Err(e) => skip("lyapunov", e.to_string()),
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    Ok(SeriesReport {
        schema: REPORT_SCHEMA,
        provenance: series.provenance.clone(),
        length: bits.len(),
        kc: complexity.as_ref().map(|c| c.kc),
        phrase_count: complexity.as_ref().map(|c| c.phrase_count),
        h_min: entropy.as_ref().map(|e| e.h_min),
        shannon: entropy.as_ref().map(|e| e.shannon),
        hurst: hurst.as_ref().map(|h| h.h),
        hurst_r2: hurst.as_ref().map(|h| h.fit_r2),
        adf: stationarity.as_ref().map(|s| s.adf_flag),
        adf_stat: stationarity.as_ref().map(|s| s.adf_stat),
        kpss: stationarity.as_ref().map(|s| s.kpss_flag),
        kpss_stat: stationarity.as_ref().map(|s| s.kpss_stat),
        battery,
        rejected,
        chsh_bound,
        zurek_ok,
        tau,
        d_e,
        lyapunov,
        horizon,
        extracted: series.provenance.extracted,
        skipped,
    })
}

/// One Table-1 cell: a (class, kind) pair aggregated over stations and runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub cell: String,
    pub class: SeriesClass,
    pub kind: SeriesKind,
    pub count: usize,
    pub mean_kc: Option<f64>,
    pub mean_h_min: Option<f64>,
    pub rejection_rate: f64,
    /// (series with KPSS = 1, series with a KPSS verdict), printed "k/N".
    pub kpss1: (usize, usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateTable {
    pub rows: Vec<AggregateRow>,
    pub total_series: usize,
}

const CELL_ORDER: [(SeriesClass, SeriesKind); 6] = [
    (SeriesClass::Co, SeriesKind::Td),
    (SeriesClass::Co, SeriesKind::Out),
    (SeriesClass::So, SeriesKind::Td),
    (SeriesClass::So, SeriesKind::Out),
    (SeriesClass::Al, SeriesKind::Td),
    (SeriesClass::Al, SeriesKind::Out),
];

/// Folds reports into per-(class, kind) means, rejection rates and KPSS=1
/// counts. Permutation-invariant in the input order.
pub fn aggregate(reports: &[SeriesReport]) -> Result<AggregateTable, ReportError> {
    if reports.is_empty() {
        return Err(ReportError::EmptyInput);
    }
    let mut rows = Vec::new();
    for (class, kind) in CELL_ORDER {
        let cell: Vec<&SeriesReport> = reports
            .iter()
            .filter(|r| r.provenance.class == class && r.provenance.kind == kind)
            .collect();
        if cell.is_empty() {
            continue;
        }
        // summing in sorted order keeps the means bit-identical under input
        // permutation
        let mean = |mut vals: Vec<f64>| -> Option<f64> {
            vals.sort_by(f64::total_cmp);
            (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
        };
        let kcs: Vec<f64> = cell.iter().filter_map(|r| r.kc).collect();
        let hs: Vec<f64> = cell.iter().filter_map(|r| r.h_min).collect();
        let rejected = cell.iter().filter(|r| r.rejected).count();
        let kpss_known = cell.iter().filter(|r| r.kpss.is_some()).count();
        let kpss1 = cell.iter().filter(|r| r.kpss == Some(1)).count();
        rows.push(AggregateRow {
            cell: Provenance {
                class,
                kind,
                station: crate::series::SeriesStation::A,
                threshold_ps: None,
                extracted: false,
            }
            .cell_name(),
            class,
            kind,
            count: cell.len(),
            mean_kc: mean(kcs),
            mean_h_min: mean(hs),
            rejection_rate: rejected as f64 / cell.len() as f64,
            kpss1: (kpss1, kpss_known),
        });
    }
    Ok(AggregateTable {
        rows,
        total_series: reports.len(),
    })
}

impl AggregateTable {
    /// Table-1-style CSV: one row per (class, kind) cell.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("cell,count,mean_kc,mean_h_min,rejection_rate,kpss1\n");
        for r in &self.rows {
            let fmt = |v: Option<f64>| v.map(|x| format!("{x:.4}")).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{},{:.4},{}/{}\n",
                r.cell,
                r.count,
                fmt(r.mean_kc),
                fmt(r.mean_h_min),
                r.rejection_rate,
                r.kpss1.0,
                r.kpss1.1
            ));
        }
        out
    }
}

/// Plot-data files: named CSVs ready to be written out.
#[derive(Debug, Clone, PartialEq)]
pub struct FigureData {
    /// One threshold-spectrum CSV per TD series: theta, kc, h_min.
    pub spectra: Vec<(String, String)>,
    /// Complexity vs min-entropy scatter across all series.
    pub scatter: String,
}

/// Spectrum CSVs (one per labelled TD spectrum) and the kc-vs-h_min scatter.
/// Empty inputs yield header-only files.
pub fn emit_figures(
    reports: &[SeriesReport],
    spectra: &[(String, ThresholdSpectrum)],
) -> FigureData {
    let mut spectrum_files = Vec::new();
    for (name, spectrum) in spectra {
        let mut csv = String::from("threshold_ps,kc,h_min\n");
        for p in &spectrum.grid {
            csv.push_str(&format!("{},{:.6},{:.6}\n", p.threshold_ps, p.kc, p.h_min));
        }
        spectrum_files.push((format!("spectrum_{name}.csv"), csv));
    }
    let mut scatter =
        String::from("h_min,kc,class,kind,station,rejected,extracted,zurek_ok\n");
    for r in reports {
        let (Some(h), Some(k)) = (r.h_min, r.kc) else {
            continue;
        };
        scatter.push_str(&format!(
            "{:.6},{:.6},{:?},{:?},{:?},{},{},{}\n",
            h,
            k,
            r.provenance.class,
            r.provenance.kind,
            r.provenance.station,
            r.rejected,
            r.extracted,
            r.zurek_ok.map(|z| z.to_string()).unwrap_or_default()
        ));
    }
    FigureData {
        spectra: spectrum_files,
        scatter,
    }
}

/// Raw-vs-extracted discriminators: the quantities an eavesdropper who
/// knows the extractor might compare. Reported without a verdict; neither
/// side separates cleanly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawVsExtracted {
    pub raw_count: usize,
    pub extracted_count: usize,
    pub raw_mean_kc: Option<f64>,
    pub extracted_mean_kc: Option<f64>,
    pub raw_mean_h_min: Option<f64>,
    pub extracted_mean_h_min: Option<f64>,
    /// Standard deviation of the Hurst exponent within each group.
    pub raw_hurst_dispersion: Option<f64>,
    pub extracted_hurst_dispersion: Option<f64>,
}

pub fn compare_raw_extracted(reports: &[SeriesReport]) -> RawVsExtracted {
    let stats = |extracted: bool| -> (usize, Option<f64>, Option<f64>, Option<f64>) {
        let group: Vec<&SeriesReport> =
            reports.iter().filter(|r| r.extracted == extracted).collect();
        let mean = |vals: &[f64]| -> Option<f64> {
            (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
        };
        let kcs: Vec<f64> = group.iter().filter_map(|r| r.kc).collect();
        let hs: Vec<f64> = group.iter().filter_map(|r| r.h_min).collect();
        let hursts: Vec<f64> = group.iter().filter_map(|r| r.hurst).collect();
        let dispersion = mean(&hursts).and_then(|mu| {
            (hursts.len() > 1).then(|| {
                (hursts.iter().map(|h| (h - mu) * (h - mu)).sum::<f64>()
                    / (hursts.len() - 1) as f64)
                    .sqrt()
            })
        });
        (group.len(), mean(&kcs), mean(&hs), dispersion)
    };
    let (raw_count, raw_mean_kc, raw_mean_h_min, raw_hurst_dispersion) = stats(false);
    let (extracted_count, extracted_mean_kc, extracted_mean_h_min, extracted_hurst_dispersion) =
        stats(true);
    RawVsExtracted {
        raw_count,
        extracted_count,
        raw_mean_kc,
        extracted_mean_kc,
        raw_mean_h_min,
        extracted_mean_h_min,
        raw_hurst_dispersion,
        extracted_hurst_dispersion,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bits::Bits;
    use crate::series::SeriesStation;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn series(bits: Bits, class: SeriesClass, kind: SeriesKind) -> BitSeries {
        BitSeries {
            bits,
            provenance: Provenance {
                class,
                kind,
                station: SeriesStation::A,
                threshold_ps: (kind == SeriesKind::Td).then_some(500),
                extracted: false,
            },
        }
    }

    fn iid_bits(rng: &mut StdRng, n: usize) -> Bits {
        (0..n).map(|_| rng.gen::<bool>()).collect()
    }

    #[test]
    fn balanced_series_reports_clean() {
        let mut rng = StdRng::seed_from_u64(1);
        let s = series(iid_bits(&mut rng, 20_000), SeriesClass::Co, SeriesKind::Td);
        let opts = AnalyzeOptions {
            chsh_s: Some(2.72),
            ..Default::default()
        };
        let r = analyze_series(&s, None, &opts).unwrap();
        assert!(r.kc.unwrap() > 0.95);
        assert!(r.h_min.unwrap() > 0.99);
        assert_eq!(r.zurek_ok, Some(true));
        assert!(r.chsh_bound.unwrap() > 0.5);
        assert_eq!(r.adf, Some(1));
        assert_eq!(r.kpss, Some(0));
        assert!(r.tau.is_none(), "nonlinear off by default");
        assert_eq!(r.schema, 1);
    }

    #[test]
    fn biased_series_rejected_with_low_h_min() {
        let mut rng = StdRng::seed_from_u64(2);
        let bits: Bits = (0..20_000).map(|_| rng.gen::<f64>() < 0.8).collect();
        let s = series(bits, SeriesClass::Al, SeriesKind::Out);
        let r = analyze_series(&s, None, &AnalyzeOptions::default()).unwrap();
        assert!(r.rejected);
        assert!(r.h_min.unwrap() < 0.4);
    }

    #[test]
    fn empty_series_is_an_error() {
        let s = series(Bits::new(), SeriesClass::Co, SeriesKind::Out);
        assert!(matches!(
            analyze_series(&s, None, &AnalyzeOptions::default()),
            Err(ReportError::EmptySeries) | Err(ReportError::Battery(BatteryError::EmptySeries))
        ));
    }

    #[test]
    fn short_series_skips_gated_metrics() {
        let mut rng = StdRng::seed_from_u64(3);
        let s = series(iid_bits(&mut rng, 150), SeriesClass::So, SeriesKind::Out);
        let r = analyze_series(&s, None, &AnalyzeOptions::default()).unwrap();
        // hurst needs 256 points
        assert!(r.hurst.is_none());
        assert!(r.skipped.iter().any(|s| s.metric == "hurst"));
    }

    #[test]
    fn nonlinear_runs_on_td_only() {
        let mut rng = StdRng::seed_from_u64(4);
        let diffs: Vec<u64> = (0..3_000).map(|_| rng.gen_range(1_000..100_000)).collect();
        let td = TimeDiffSeries {
            diffs,
            class: SeriesClass::Co,
            station: SeriesStation::Joint,
        };
        let s = series(iid_bits(&mut rng, 3_000), SeriesClass::Co, SeriesKind::Td);
        let opts = AnalyzeOptions {
            nonlinear: true,
            ..Default::default()
        };
        let r = analyze_series(&s, Some(&td), &opts).unwrap();
        assert!(r.tau.is_some());
        assert_eq!(r.d_e, None, "random diffs should not embed");

        let out = series(iid_bits(&mut rng, 3_000), SeriesClass::Co, SeriesKind::Out);
        let r = analyze_series(&out, None, &opts).unwrap();
        assert!(r.tau.is_none());
        assert!(r.skipped.iter().any(|s| s.metric == "nonlinear"));
    }

    #[test]
    fn aggregate_single_report_is_identity() {
        let mut rng = StdRng::seed_from_u64(5);
        let s = series(iid_bits(&mut rng, 5_000), SeriesClass::Co, SeriesKind::Td);
        let r = analyze_series(&s, None, &AnalyzeOptions::default()).unwrap();
        let table = aggregate(std::slice::from_ref(&r)).unwrap();
        assert_eq!(table.rows.len(), 1);
        let row = &table.rows[0];
        assert_eq!(row.cell, "CO+TD");
        assert_eq!(row.count, 1);
        assert_eq!(row.mean_kc, r.kc);
        assert_eq!(row.rejection_rate, if r.rejected { 1.0 } else { 0.0 });
    }

    #[test]
    fn aggregate_rates_and_permutation_invariance() {
        let mut rng = StdRng::seed_from_u64(6);
        let mut reports = Vec::new();
        for i in 0..10 {
            // three of ten heavily biased: rejected
            let bits: Bits = if i < 3 {
                (0..5_000).map(|_| rng.gen::<f64>() < 0.85).collect()
            } else {
                iid_bits(&mut rng, 5_000)
            };
            let s = series(bits, SeriesClass::So, SeriesKind::Out);
            reports.push(analyze_series(&s, None, &AnalyzeOptions::default()).unwrap());
        }
        let rejected = reports.iter().filter(|r| r.rejected).count();
        assert!(rejected >= 3, "the three biased series must be rejected");
        let t1 = aggregate(&reports).unwrap();
        assert_eq!(t1.rows[0].rejection_rate, rejected as f64 / 10.0);
        assert_eq!(t1.rows[0].kpss1.1, 10);
        reports.reverse();
        let t2 = aggregate(&reports).unwrap();
        assert_eq!(t1, t2);
    }

    #[test]
    fn aggregate_empty_errors() {
        assert_eq!(aggregate(&[]).unwrap_err(), ReportError::EmptyInput);
    }

    #[test]
    fn csv_table_format() {
        let mut rng = StdRng::seed_from_u64(7);
        let s = series(iid_bits(&mut rng, 5_000), SeriesClass::Al, SeriesKind::Out);
        let r = analyze_series(&s, None, &AnalyzeOptions::default()).unwrap();
        let table = aggregate(&[r]).unwrap();
        let csv = table.to_csv();
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "cell,count,mean_kc,mean_h_min,rejection_rate,kpss1"
        );
        let row = lines.next().unwrap();
        assert!(row.starts_with("AL+OUT,1,"));
        assert!(row.ends_with("/1"));
    }

    #[test]
    fn figures_headers_and_rows() {
        let empty = emit_figures(&[], &[]);
        assert!(empty.spectra.is_empty());
        assert_eq!(
            empty.scatter,
            "h_min,kc,class,kind,station,rejected,extracted,zurek_ok\n"
        );

        let mut rng = StdRng::seed_from_u64(8);
        let td = TimeDiffSeries {
            diffs: (0..2_000).map(|_| rng.gen_range(1..1_000_000)).collect(),
            class: SeriesClass::Co,
            station: SeriesStation::Joint,
        };
        let spectrum = crate::series::select_threshold(&td, 19).unwrap();
        let s = series(iid_bits(&mut rng, 5_000), SeriesClass::Co, SeriesKind::Td);
        let r = analyze_series(&s, None, &AnalyzeOptions::default()).unwrap();
        let figs = emit_figures(&[r], &[("co_td".into(), spectrum)]);
        assert_eq!(figs.spectra.len(), 1);
        assert_eq!(figs.spectra[0].0, "spectrum_co_td.csv");
        assert_eq!(figs.spectra[0].1.lines().count(), 20, "header + 19 grid rows");
        assert_eq!(figs.scatter.lines().count(), 2);
    }

    #[test]
    fn raw_vs_extracted_split() {
        let mut rng = StdRng::seed_from_u64(10);
        let mut reports = Vec::new();
        for i in 0..6 {
            let mut s = series(iid_bits(&mut rng, 4_096), SeriesClass::Co, SeriesKind::Out);
            s.provenance.extracted = i >= 4;
            reports.push(analyze_series(&s, None, &AnalyzeOptions::default()).unwrap());
        }
        let cmp = compare_raw_extracted(&reports);
        assert_eq!(cmp.raw_count, 4);
        assert_eq!(cmp.extracted_count, 2);
        assert!(cmp.raw_mean_kc.unwrap() > 0.9);
        assert!(cmp.raw_hurst_dispersion.is_some());
    }

    #[test]
    fn report_json_deterministic() {
        let mut rng = StdRng::seed_from_u64(9);
        let s = series(iid_bits(&mut rng, 5_000), SeriesClass::Co, SeriesKind::Td);
        let opts = AnalyzeOptions::default();
        let a = serde_json::to_string(&analyze_series(&s, None, &opts).unwrap()).unwrap();
        let b = serde_json::to_string(&analyze_series(&s, None, &opts).unwrap()).unwrap();
        assert_eq!(a, b);
        // documented field names present in the JSON
        for key in ["\"kc\"", "\"h_min\"", "\"shannon\"", "\"hurst\"", "\"chsh_bound\"",
                    "\"zurek_ok\"", "\"adf\"", "\"kpss\"", "\"d_e\"", "\"lyapunov\"",
                    "\"horizon\"", "\"rejected\"", "\"tau\""] {
            assert!(a.contains(key), "missing {key}");
        }
    }
}
