//! Loading and normalizing the NEWS2+ interval tables.
//!
//! The tables are stored exactly as published (integer or one-decimal
//! bands, some open-ended, a few overlapping or leaving gaps). At load time
//! every table is turned into a sorted list of half-open real intervals that
//! covers the vital's whole sanitized domain. Each listed band owns
//! `[lower edge, upper edge + one resolution step)`; where listed bands
//! overlap the more severe band wins, and uncovered stretches go to the more
//! severe of the two neighbouring bands. Every such resolution is recorded as
//! an [`Anomaly`].

use std::collections::BTreeMap;
use std::str::FromStr;

use serde::Serialize;

use super::{AgeBand, PopulationGroup, SeverityBin, Side, VitalKind};
use crate::{Error, Result};

pub(crate) const EMBEDDED_TAGS_CSV: &str = include_str!("data/news2plus_tags.csv");
pub(crate) const EMBEDDED_LABELS_CSV: &str = include_str!("data/hypoxemia_labels.csv");

/// Version tag of the embedded table data.
pub const MATRIX_VERSION: &str = "news2plus-1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AnomalyKind {
    /// Two or more listed bands claim the same values.
    Overlap,
    /// No listed band covers the values; both neighbours exist.
    Gap,
    /// Values at the end of the domain past the last listed band.
    Extension,
}

/// One overlap or gap found while normalizing a table, with its resolution.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Anomaly {
    /// `"tags"` for the per-vital TAG tables, `"labels"` for the SpO₂ severity table.
    pub table: &'static str,
    /// Age band (TAG tables) or population group (label table).
    pub group: String,
    pub vital: String,
    pub kind: AnomalyKind,
    /// Affected values, `[lo, hi)`.
    pub lo: f64,
    pub hi: f64,
    /// `(side, level)` of the listed bands involved, in table order.
    pub candidates: Vec<(Side, u8)>,
    pub resolved_side: Side,
    pub resolved_level: u8,
}

#[derive(Debug, Clone)]
struct ListedBand {
    side: Side,
    level: u8,
    lo: Option<i64>,
    hi: Option<i64>,
}

/// Ticks per unit: temperature bands are listed to one decimal.
fn ticks_per_unit(vital: VitalKind) -> f64 {
    match vital {
        VitalKind::Temperature => 10.0,
        _ => 1.0,
    }
}

fn parse_edge(field: &str, scale: f64, line: usize) -> Result<Option<i64>> {
    let field = field.trim();
    if field.is_empty() {
        return Ok(None);
    }
    let value: f64 = field
        .parse()
        .map_err(|_| Error::invalid(format!("matrix line {line}: bad edge `{field}`")))?;
    let ticks = (value * scale).round();
    if ((ticks / scale) - value).abs() > 1e-9 {
        return Err(Error::invalid(format!(
            "matrix line {line}: edge `{field}` finer than the table resolution"
        )));
    }
    Ok(Some(ticks as i64))
}

fn parse_side(field: &str, line: usize) -> Result<Side> {
    match field.trim() {
        "low" => Ok(Side::Low),
        "normal" => Ok(Side::Normal),
        "high" => Ok(Side::High),
        other => Err(Error::invalid(format!("matrix line {line}: unknown side `{other}`"))),
    }
}

fn parse_level(field: &str, line: usize) -> Result<u8> {
    match field.trim().parse::<u8>() {
        Ok(level) if level <= 3 => Ok(level),
        _ => Err(Error::invalid(format!("matrix line {line}: bad level `{field}`"))),
    }
}

/// Result of normalizing one table.
struct Normalized {
    bins: Vec<SeverityBin>,
    anomalies: Vec<(AnomalyKind, i64, i64, Vec<usize>, usize)>,
}

/// Resolves overlaps and gaps of `listed` over the tick domain `[dmin, dmax]`.
fn normalize(listed: &[ListedBand], dmin: i64, dmax: i64, scale: f64) -> Result<Normalized> {
    // Work on [dmin, dmax + 1) in ticks; the final bin is closed at dmax in real units.
    let end = dmax + 1;
    let spans: Vec<(i64, i64)> = listed
        .iter()
        .map(|b| {
            let lo = b.lo.unwrap_or(dmin).max(dmin);
            let hi = b.hi.map(|h| h + 1).unwrap_or(end).min(end);
            (lo, hi)
        })
        .collect();

    let mut cuts: Vec<i64> = vec![dmin, end];
    for &(lo, hi) in &spans {
        if lo < hi {
            cuts.push(lo);
            cuts.push(hi);
        }
    }
    cuts.sort_unstable();
    cuts.dedup();

    struct Segment {
        lo: i64,
        hi: i64,
        covering: Vec<usize>,
        owner: Option<usize>,
    }
    let mut segments: Vec<Segment> = cuts
        .windows(2)
        .map(|w| {
            let covering: Vec<usize> = spans
                .iter()
                .enumerate()
                .filter(|(_, &(lo, hi))| lo <= w[0] && w[1] <= hi && lo < hi)
                .map(|(i, _)| i)
                .collect();
            // Most severe listed band wins; first in table order on ties.
            let owner = covering
                .iter()
                .copied()
                .fold(None, |best: Option<usize>, i| match best {
                    Some(b) if listed[b].level >= listed[i].level => Some(b),
                    _ => Some(i),
                });
            Segment { lo: w[0], hi: w[1], covering, owner }
        })
        .collect();

    let covered: Vec<Option<usize>> = segments.iter().map(|s| s.owner).collect();
    for (k, seg) in segments.iter_mut().enumerate() {
        if seg.owner.is_some() {
            continue;
        }
        let left = covered[..k].iter().rev().find_map(|o| *o);
        let right = covered[k + 1..].iter().find_map(|o| *o);
        seg.owner = match (left, right) {
            (Some(l), Some(r)) => Some(if listed[r].level > listed[l].level { r } else { l }),
            (Some(l), None) => Some(l),
            (None, Some(r)) => Some(r),
            (None, None) => None,
        };
    }

    let mut anomalies: Vec<(AnomalyKind, i64, i64, Vec<usize>, usize)> = Vec::new();
    for (k, seg) in segments.iter().enumerate() {
        let owner = seg
            .owner
            .ok_or_else(|| Error::invalid("matrix table has no bands inside its domain"))?;
        let kind = match seg.covering.len() {
            0 => {
                let has_left = covered[..k].iter().any(Option::is_some);
                let has_right = covered[k + 1..].iter().any(Option::is_some);
                if has_left && has_right {
                    AnomalyKind::Gap
                } else {
                    AnomalyKind::Extension
                }
            }
            1 => continue,
            _ => AnomalyKind::Overlap,
        };
        let candidates = if seg.covering.is_empty() {
            let left = covered[..k].iter().rev().find_map(|o| *o);
            let right = covered[k + 1..].iter().find_map(|o| *o);
            left.into_iter().chain(right).collect()
        } else {
            seg.covering.clone()
        };
        match anomalies.last_mut() {
            Some(last) if last.0 == kind && last.2 == seg.lo && last.3 == candidates && last.4 == owner => {
                last.2 = seg.hi;
            }
            _ => anomalies.push((kind, seg.lo, seg.hi, candidates, owner)),
        }
    }

    let mut bins: Vec<SeverityBin> = Vec::new();
    let mut current: Option<(usize, i64, i64)> = None;
    for seg in &segments {
        let owner = seg.owner.expect("checked above");
        current = match current {
            Some((o, lo, _)) if o == owner => Some((o, lo, seg.hi)),
            Some((o, lo, hi)) => {
                bins.push(make_bin(&listed[o], lo, hi, end, dmax, scale));
                Some((owner, seg.lo, seg.hi))
            }
            None => Some((owner, seg.lo, seg.hi)),
        };
    }
    if let Some((o, lo, hi)) = current {
        bins.push(make_bin(&listed[o], lo, hi, end, dmax, scale));
    }
    Ok(Normalized { bins, anomalies })
}

fn make_bin(band: &ListedBand, lo: i64, hi: i64, end: i64, dmax: i64, scale: f64) -> SeverityBin {
    let closed = hi == end;
    SeverityBin {
        side: band.side,
        level: band.level,
        lo: lo as f64 / scale,
        hi: if closed { dmax as f64 / scale } else { hi as f64 / scale },
        hi_closed: closed,
    }
}

fn lookup(bins: &[SeverityBin], value: f64) -> Option<&SeverityBin> {
    bins.iter()
        .find(|b| value >= b.lo && (value < b.hi || (b.hi_closed && value == b.hi)))
}

/// Normalized NEWS2+ tables: per-vital TAG bins by age band and SpO₂
/// severity bins by population group.
#[derive(Debug, Clone)]
pub struct ScoringMatrix {
    tags: BTreeMap<(AgeBand, VitalKind), Vec<SeverityBin>>,
    labels: BTreeMap<PopulationGroup, Vec<SeverityBin>>,
    anomalies: Vec<Anomaly>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TableDump {
    pub group: String,
    pub vital: String,
    pub bins: Vec<SeverityBin>,
}

/// Serializable view of the normalized matrix, emitted by `--dump-matrix`.
#[derive(Debug, Clone, Serialize)]
pub struct MatrixDump {
    pub version: &'static str,
    pub tags: Vec<TableDump>,
    pub labels: Vec<TableDump>,
    pub anomalies: Vec<Anomaly>,
}

impl ScoringMatrix {
    /// The tables compiled into the crate.
    pub fn embedded() -> &'static ScoringMatrix {
        static MATRIX: std::sync::OnceLock<ScoringMatrix> = std::sync::OnceLock::new();
        MATRIX.get_or_init(|| {
            ScoringMatrix::from_csv(EMBEDDED_TAGS_CSV, EMBEDDED_LABELS_CSV)
                .expect("embedded scoring matrix is valid")
        })
    }

    /// Parses and normalizes the two table files.
    ///
    /// `tags_csv` has columns `age_band,vital,bin_side,bin_level,lo,hi`;
    /// `labels_csv` has `population,level,lo,hi`. Empty `lo`/`hi` fields are
    /// open ends ("≤" / "≥" bands). Every age band × vital pair and every
    /// population group must be present.
    pub fn from_csv(tags_csv: &str, labels_csv: &str) -> Result<ScoringMatrix> {
        let mut listed_tags: BTreeMap<(AgeBand, VitalKind), Vec<ListedBand>> = BTreeMap::new();
        let mut reader = csv::Reader::from_reader(tags_csv.as_bytes());
        check_header(reader.headers()?, &["age_band", "vital", "bin_side", "bin_level", "lo", "hi"])?;
        for (i, record) in reader.records().enumerate() {
            let record = record?;
            let line = i + 2;
            if record.len() != 6 {
                return Err(Error::invalid(format!("matrix line {line}: expected 6 fields")));
            }
            let band = AgeBand::from_str(&record[0])?;
            let vital = VitalKind::from_str(&record[1])?;
            let scale = ticks_per_unit(vital);
            let side = parse_side(&record[2], line)?;
            let level = parse_level(&record[3], line)?;
            if (level == 0) != (side == Side::Normal) {
                return Err(Error::invalid(format!("matrix line {line}: level 0 must be the normal side")));
            }
            listed_tags.entry((band, vital)).or_default().push(ListedBand {
                side,
                level,
                lo: parse_edge(&record[4], scale, line)?,
                hi: parse_edge(&record[5], scale, line)?,
            });
        }

        let mut listed_labels: BTreeMap<PopulationGroup, Vec<ListedBand>> = BTreeMap::new();
        let mut reader = csv::Reader::from_reader(labels_csv.as_bytes());
        check_header(reader.headers()?, &["population", "level", "lo", "hi"])?;
        for (i, record) in reader.records().enumerate() {
            let record = record?;
            let line = i + 2;
            if record.len() != 4 {
                return Err(Error::invalid(format!("label table line {line}: expected 4 fields")));
            }
            let group = PopulationGroup::from_str(&record[0])?;
            let level = parse_level(&record[1], line)?;
            listed_labels.entry(group).or_default().push(ListedBand {
                side: if level == 0 { Side::Normal } else { Side::Low },
                level,
                lo: parse_edge(&record[2], 1.0, line)?,
                hi: parse_edge(&record[3], 1.0, line)?,
            });
        }

        let mut matrix = ScoringMatrix {
            tags: BTreeMap::new(),
            labels: BTreeMap::new(),
            anomalies: Vec::new(),
        };
        for band in AgeBand::ALL {
            for vital in VitalKind::ALL {
                let listed = listed_tags.get(&(band, vital)).ok_or_else(|| {
                    Error::invalid(format!("matrix lacks {} / {}", band.as_str(), vital.as_str()))
                })?;
                if listed.len() > 7 {
                    return Err(Error::invalid(format!(
                        "matrix table {} / {} has more than 7 bands",
                        band.as_str(),
                        vital.as_str()
                    )));
                }
                if vital == VitalKind::SpO2 && listed.iter().any(|b| b.side == Side::High) {
                    return Err(Error::invalid("SpO2 tables have no high-side bands"));
                }
                let scale = ticks_per_unit(vital);
                let (lo, hi) = vital.domain();
                let normalized = normalize(listed, (lo * scale).round() as i64, (hi * scale).round() as i64, scale)?;
                matrix.record_anomalies("tags", band.as_str(), vital, listed, &normalized, scale);
                matrix.tags.insert((band, vital), normalized.bins);
            }
        }
        for group in PopulationGroup::ALL {
            let listed = listed_labels
                .get(&group)
                .ok_or_else(|| Error::invalid(format!("label table lacks {}", group.as_str())))?;
            let normalized = normalize(listed, 0, 100, 1.0)?;
            let monotone = normalized.bins.windows(2).all(|w| w[0].level >= w[1].level);
            if !monotone {
                return Err(Error::invalid(format!(
                    "label table for {} is not monotone in SpO2",
                    group.as_str()
                )));
            }
            matrix.record_anomalies("labels", group.as_str(), VitalKind::SpO2, listed, &normalized, 1.0);
            matrix.labels.insert(group, normalized.bins);
        }
        Ok(matrix)
    }

    fn record_anomalies(
        &mut self,
        table: &'static str,
        group: &str,
        vital: VitalKind,
        listed: &[ListedBand],
        normalized: &Normalized,
        scale: f64,
    ) {
        for (kind, lo, hi, candidates, owner) in &normalized.anomalies {
            let dmax = vital.domain().1;
            self.anomalies.push(Anomaly {
                table,
                group: group.to_string(),
                vital: vital.as_str().to_string(),
                kind: *kind,
                lo: *lo as f64 / scale,
                hi: (*hi as f64 / scale).min(dmax),
                candidates: candidates.iter().map(|&c| (listed[c].side, listed[c].level)).collect(),
                resolved_side: listed[*owner].side,
                resolved_level: listed[*owner].level,
            });
        }
    }

    /// Normalized TAG bins for one table.
    pub fn tag_bins(&self, band: AgeBand, vital: VitalKind) -> &[SeverityBin] {
        &self.tags[&(band, vital)]
    }

    /// Normalized SpO₂ severity bins for one population group.
    pub fn label_bins(&self, group: PopulationGroup) -> &[SeverityBin] {
        &self.labels[&group]
    }

    /// Every overlap, gap and extension resolved during normalization.
    pub fn normalization_report(&self) -> &[Anomaly] {
        &self.anomalies
    }

    pub fn tag_score(&self, vital: VitalKind, value: f64, band: AgeBand) -> Result<u8> {
        let (lo, hi) = vital.domain();
        if !value.is_finite() || value < lo || value > hi {
            return Err(Error::invalid(format!(
                "{} value {value} outside [{lo}, {hi}]",
                vital.as_str()
            )));
        }
        lookup(self.tag_bins(band, vital), value)
            .map(|b| b.level)
            .ok_or_else(|| Error::invalid(format!("no band for {} = {value}", vital.as_str())))
    }

    pub fn severity_label(&self, spo2_pct: f64, group: PopulationGroup) -> Result<u8> {
        if !spo2_pct.is_finite() || !(0.0..=100.0).contains(&spo2_pct) {
            return Err(Error::invalid(format!("SpO2 {spo2_pct} outside [0, 100]")));
        }
        lookup(self.label_bins(group), spo2_pct)
            .map(|b| b.level)
            .ok_or_else(|| Error::invalid(format!("no severity band for SpO2 = {spo2_pct}")))
    }

    pub fn dump(&self) -> MatrixDump {
        MatrixDump {
            version: MATRIX_VERSION,
            tags: self
                .tags
                .iter()
                .map(|((band, vital), bins)| TableDump {
                    group: band.as_str().to_string(),
                    vital: vital.as_str().to_string(),
                    bins: bins.clone(),
                })
                .collect(),
            labels: self
                .labels
                .iter()
                .map(|(group, bins)| TableDump {
                    group: group.as_str().to_string(),
                    vital: VitalKind::SpO2.as_str().to_string(),
                    bins: bins.clone(),
                })
                .collect(),
            anomalies: self.anomalies.clone(),
        }
    }
}

fn check_header(headers: &csv::StringRecord, expected: &[&str]) -> Result<()> {
    let actual: Vec<&str> = headers.iter().map(str::trim).collect();
    if actual != expected {
        return Err(Error::invalid(format!(
            "matrix header {:?}, expected {:?}",
            actual, expected
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn band(side: Side, level: u8, lo: Option<i64>, hi: Option<i64>) -> ListedBand {
        ListedBand { side, level, lo, hi }
    }

    #[test]
    fn consistent_table_has_no_anomalies() {
        let listed = vec![
            band(Side::Low, 1, None, Some(9)),
            band(Side::Normal, 0, Some(10), Some(20)),
            band(Side::High, 1, Some(21), None),
        ];
        let n = normalize(&listed, 0, 300, 1.0).unwrap();
        assert!(n.anomalies.is_empty());
        assert_eq!(n.bins.len(), 3);
        assert_eq!((n.bins[1].lo, n.bins[1].hi), (10.0, 21.0));
        assert!(n.bins[2].hi_closed);
        assert_eq!(n.bins[2].hi, 300.0);
    }

    #[test]
    fn overlap_goes_to_more_severe_band() {
        let listed = vec![
            band(Side::Low, 3, None, Some(20)),
            band(Side::Low, 2, Some(19), Some(26)),
            band(Side::Normal, 0, Some(27), None),
        ];
        let n = normalize(&listed, 0, 300, 1.0).unwrap();
        assert_eq!(n.anomalies.len(), 1);
        assert_eq!(n.anomalies[0].0, AnomalyKind::Overlap);
        assert_eq!((n.anomalies[0].1, n.anomalies[0].2), (19, 21));
        assert_eq!((n.bins[0].lo, n.bins[0].hi), (0.0, 21.0));
        assert_eq!((n.bins[1].lo, n.bins[1].hi), (21.0, 27.0));
    }

    #[test]
    fn gap_goes_to_more_severe_neighbour() {
        let listed = vec![
            band(Side::Low, 1, None, Some(52)),
            band(Side::Normal, 0, Some(63), None),
        ];
        let n = normalize(&listed, 0, 300, 1.0).unwrap();
        assert_eq!(n.anomalies[0].0, AnomalyKind::Gap);
        assert_eq!(n.bins.len(), 2);
        assert_eq!(n.bins[0].hi, 63.0);
    }

    #[test]
    fn tail_is_extended_from_last_band() {
        let listed = vec![
            band(Side::Low, 3, None, Some(82)),
            band(Side::Normal, 0, Some(83), Some(92)),
        ];
        let n = normalize(&listed, 0, 100, 1.0).unwrap();
        assert_eq!(n.anomalies[0].0, AnomalyKind::Extension);
        assert_eq!(n.bins[1].hi, 100.0);
        assert!(n.bins[1].hi_closed);
    }

    #[test]
    fn rejects_bad_header() {
        let err = ScoringMatrix::from_csv("a,b\n", EMBEDDED_LABELS_CSV).unwrap_err();
        assert!(matches!(err, Error::InvalidInput(_)));
    }
}
