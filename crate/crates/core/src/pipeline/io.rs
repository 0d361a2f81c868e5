//! CSV round-tripping of completed frames.
//!
//! Layout: `subject_id,hadm_id,charttime,copd,mask_charttime`, then one
//! column per [`Column`], then `mask_<column>` for each, and for scored
//! frames the six `TAG_*` columns followed by `label`. Race is stored as
//! its numeric code.

use std::io::{Read, Write};

use super::frame::{MaskedFrame, ScoredFrame};
use super::record::{format_charttime, parse_charttime};
use super::series::Column;
use crate::scoring::VitalKind;
use crate::{Error, Result};

pub fn frame_header(scored: bool) -> Vec<String> {
    let mut h: Vec<String> = ["subject_id", "hadm_id", "charttime", "copd", "mask_charttime"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    h.extend(Column::ALL.iter().map(|c| c.name().to_string()));
    h.extend(Column::ALL.iter().map(|c| format!("mask_{}", c.name())));
    if scored {
        h.extend(VitalKind::ALL.iter().map(|k| k.tag_column().to_string()));
        h.push("label".to_string());
    }
    h
}

fn frame_fields(f: &MaskedFrame, r: usize) -> Vec<String> {
    let mut row = vec![
        f.subject_id.clone(),
        f.hadm_id.clone(),
        format_charttime(f.minutes[r]),
        (f.copd as u8).to_string(),
        f.row_mask[r].to_string(),
    ];
    row.extend(f.values.iter().map(|c| c[r].to_string()));
    row.extend(f.masks.iter().map(|c| c[r].to_string()));
    row
}

pub fn write_masked_frames<W: Write>(writer: W, frames: &[MaskedFrame]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(frame_header(false))?;
    for f in frames {
        for r in 0..f.len() {
            wtr.write_record(frame_fields(f, r))?;
        }
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_scored_frames<W: Write>(writer: W, frames: &[ScoredFrame]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(frame_header(true))?;
    for s in frames {
        for r in 0..s.frame.len() {
            let mut row = frame_fields(&s.frame, r);
            row.extend(s.tags[r].iter().map(|t| t.to_string()));
            row.push(s.labels[r].to_string());
            wtr.write_record(row)?;
        }
    }
    wtr.flush()?;
    Ok(())
}

struct Row {
    subject_id: String,
    hadm_id: String,
    minute: i64,
    copd: bool,
    row_mask: u8,
    values: Vec<f64>,
    masks: Vec<u8>,
    tags: [u8; 6],
    label: u8,
}

fn parse<T: std::str::FromStr>(s: &str, what: &str, line: u64) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| Error::invalid(format!("line {line}: bad {what} `{s}`")))
}

fn read_rows<R: Read>(reader: R, scored: bool) -> Result<Vec<Row>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header != frame_header(scored) {
        return Err(Error::invalid("line 1: unexpected frame header"));
    }
    let nc = Column::ALL.len();
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i as u64 + 2;
        let rec = rec?;
        let mut values = Vec::with_capacity(nc);
        let mut masks = Vec::with_capacity(nc);
        for k in 0..nc {
            let v: f64 = parse(&rec[5 + k], Column::ALL[k].name(), line)?;
            if !v.is_finite() {
                return Err(Error::invalid(format!("line {line}: non-finite {}", Column::ALL[k].name())));
            }
            values.push(v);
            masks.push(parse(&rec[5 + nc + k], "mask", line)?);
        }
        let mut tags = [0u8; 6];
        let mut label = 0;
        if scored {
            for (k, t) in tags.iter_mut().enumerate() {
                *t = parse(&rec[5 + 2 * nc + k], "TAG", line)?;
            }
            label = parse(&rec[5 + 2 * nc + 6], "label", line)?;
        }
        rows.push(Row {
            subject_id: rec[0].to_string(),
            hadm_id: rec[1].to_string(),
            minute: parse_charttime(&rec[2]).map_err(|e| Error::invalid(format!("line {line}: {e}")))?,
            copd: parse::<u8>(&rec[3], "copd", line)? == 1,
            row_mask: parse(&rec[4], "mask_charttime", line)?,
            values,
            masks,
            tags,
            label,
        });
    }
    Ok(rows)
}

/// Groups consecutive rows of the same admission.
fn group(rows: Vec<Row>) -> Vec<(MaskedFrame, Vec<[u8; 6]>, Vec<u8>)> {
    let mut out: Vec<(MaskedFrame, Vec<[u8; 6]>, Vec<u8>)> = Vec::new();
    for row in rows {
        let start_new = out.last().is_none_or(|(f, _, _)| f.hadm_id != row.hadm_id);
        if start_new {
            out.push((
                MaskedFrame {
                    subject_id: row.subject_id.clone(),
                    hadm_id: row.hadm_id.clone(),
                    copd: row.copd,
                    minutes: Vec::new(),
                    row_mask: Vec::new(),
                    values: vec![Vec::new(); Column::ALL.len()],
                    masks: vec![Vec::new(); Column::ALL.len()],
                },
                Vec::new(),
                Vec::new(),
            ));
        }
        let (f, tags, labels) = out.last_mut().expect("just pushed");
        f.minutes.push(row.minute);
        f.row_mask.push(row.row_mask);
        for (k, v) in row.values.into_iter().enumerate() {
            f.values[k].push(v);
        }
        for (k, m) in row.masks.into_iter().enumerate() {
            f.masks[k].push(m);
        }
        tags.push(row.tags);
        labels.push(row.label);
    }
    out
}

pub fn read_masked_frames<R: Read>(reader: R) -> Result<Vec<MaskedFrame>> {
    Ok(group(read_rows(reader, false)?).into_iter().map(|(f, _, _)| f).collect())
}

pub fn read_scored_frames<R: Read>(reader: R) -> Result<Vec<ScoredFrame>> {
    Ok(group(read_rows(reader, true)?)
        .into_iter()
        .map(|(frame, tags, labels)| ScoredFrame { frame, tags, labels })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::frame::{interpolate_minutes, score_frame};
    use crate::scoring::ScoringMatrix;

    fn sample() -> MaskedFrame {
        let n = 3;
        let mut values = vec![vec![1.5; n]; Column::RAW.len()];
        values[Column::Spo2.index()] = vec![97.0, 91.0, 88.0];
        values[Column::RespRate.index()] = vec![16.0; n];
        values[Column::HeartRate.index()] = vec![80.0; n];
        values[Column::Sbp.index()] = vec![120.0; n];
        values[Column::Dbp.index()] = vec![70.0; n];
        values[Column::Temperature.index()] = vec![36.9; n];
        values[Column::Age.index()] = vec![44.0; n];
        values[Column::Height.index()] = vec![171.0; n];
        values[Column::Weight.index()] = vec![71.3; n];
        let mut masks = vec![vec![0u8; n]; Column::RAW.len()];
        masks[Column::Spo2.index()][1] = 1;
        MaskedFrame::with_derived("7".into(), "70".into(), false, vec![100, 103, 110], values, masks).unwrap()
    }

    #[test]
    fn scored_roundtrip() {
        let f = interpolate_minutes(&sample()).unwrap();
        let s = score_frame(f, ScoringMatrix::embedded()).unwrap();
        let mut buf = Vec::new();
        write_scored_frames(&mut buf, &[s.clone(), s.clone()]).unwrap();
        let back = read_scored_frames(buf.as_slice()).unwrap();
        // Same hadm_id twice in a row collapses into one group.
        assert_eq!(back.len(), 1);
        assert_eq!(back[0].frame.len(), 2 * s.frame.len());
        let mut one = Vec::new();
        write_scored_frames(&mut one, std::slice::from_ref(&s)).unwrap();
        assert_eq!(read_scored_frames(one.as_slice()).unwrap(), vec![s]);
    }

    #[test]
    fn masked_roundtrip() {
        let f = sample();
        let mut buf = Vec::new();
        write_masked_frames(&mut buf, std::slice::from_ref(&f)).unwrap();
        assert_eq!(read_masked_frames(buf.as_slice()).unwrap(), vec![f]);
    }
}
