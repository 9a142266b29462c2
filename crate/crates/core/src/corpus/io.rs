//! File formats.
//!
//! Labels: UTF-8 CSV `clip_id,class_id,state`, one row per cell that is not
//! `IN`, sorted by (clip_id, class_id). Absent cells are `IN`.
//!
//! Features: little-endian binary. Magic `MLC1`, `u32` clip count, `u32` D,
//! then per clip a `u32` id length, the UTF-8 id, a `u32` patch count K and
//! K×D `f32` values, patch-major.
//!
//! Injection log: CSV `clip_id,class_id`. Splits: CSV `clip_id,split`.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::Path;

use super::{Cell, Clip, Corpus, LabelState, LabelTable, Split};
use crate::error::{Error, Result};

const LABELS_HEADER: &str = "clip_id,class_id,state";
const INJECTION_HEADER: &str = "clip_id,class_id";
const SPLITS_HEADER: &str = "clip_id,split";
const FEATURES_MAGIC: &[u8; 4] = b"MLC1";

pub(crate) fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

pub(crate) fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Splits CSV text into numbered data rows after checking the header.
/// Blank lines are skipped; line numbers are 1-based and count the header.
fn csv_rows<'a>(
    path: &'a Path,
    text: &'a str,
    header: &str,
) -> Result<impl Iterator<Item = (usize, Vec<&'a str>)> + 'a> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim_end() == header => {}
        Some(h) => return Err(Error::parse(path, 1, format!("expected header `{header}`, got `{h}`"))),
        None => return Err(Error::parse(path, 1, "empty file")),
    }
    Ok(lines
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| (i + 2, l.trim_end().split(',').collect())))
}

fn parse_class(path: &Path, line: usize, field: &str, n_classes: usize) -> Result<usize> {
    let class: usize = field
        .parse()
        .map_err(|_| Error::parse(path, line, format!("bad class id `{field}`")))?;
    if class >= n_classes {
        return Err(Error::parse(
            path,
            line,
            format!("class id {class} out of range (C = {n_classes})"),
        ));
    }
    Ok(class)
}

fn sorted_rows(ids: &[String]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..ids.len()).collect();
    order.sort_by(|&a, &b| ids[a].cmp(&ids[b]));
    order
}

pub fn save_labels(table: &LabelTable, path: &Path) -> Result<()> {
    let mut out = String::from(LABELS_HEADER);
    out.push('\n');
    for r in sorted_rows(table.clip_ids()) {
        for (c, s) in table.row(r).iter().enumerate() {
            if *s != LabelState::ImplicitNegative {
                out.push_str(&format!("{},{c},{}\n", table.clip_ids()[r], s.code()));
            }
        }
    }
    write_file(path, out)
}

/// Loads a labels file into a table with the given rows and class count.
pub fn load_labels(path: &Path, clip_ids: &[String], n_classes: usize) -> Result<LabelTable> {
    let text = read_text(path)?;
    let mut table = LabelTable::new(clip_ids.to_vec(), n_classes, LabelState::ImplicitNegative)?;
    let mut seen = HashSet::new();
    for (line, fields) in csv_rows(path, &text, LABELS_HEADER)? {
        let [clip, class, state] = fields[..] else {
            return Err(Error::parse(path, line, format!("expected 3 fields, got {}", fields.len())));
        };
        let row = table
            .row_of(clip)
            .ok_or_else(|| Error::parse(path, line, format!("unknown clip id `{clip}`")))?;
        let class = parse_class(path, line, class, n_classes)?;
        let state = LabelState::from_code(state)
            .ok_or_else(|| Error::parse(path, line, format!("unknown state code `{state}`")))?;
        if !seen.insert((row, class)) {
            return Err(Error::parse(path, line, format!("duplicate cell ({clip}, {class})")));
        }
        table.set(row, class, state);
    }
    Ok(table)
}

pub fn save_injection_log(log: &[Cell], clip_ids: &[String], path: &Path) -> Result<()> {
    let mut cells: Vec<(&str, usize)> = log
        .iter()
        .map(|c| (clip_ids[c.row].as_str(), c.class))
        .collect();
    cells.sort_unstable();
    let mut out = String::from(INJECTION_HEADER);
    out.push('\n');
    for (id, class) in cells {
        out.push_str(&format!("{id},{class}\n"));
    }
    write_file(path, out)
}

/// Loads an injection log, returned in (row, class) order.
pub fn load_injection_log(path: &Path, clip_ids: &[String], n_classes: usize) -> Result<Vec<Cell>> {
    let text = read_text(path)?;
    let index: HashMap<&str, usize> = clip_ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let mut cells = Vec::new();
    let mut seen = HashSet::new();
    for (line, fields) in csv_rows(path, &text, INJECTION_HEADER)? {
        let [clip, class] = fields[..] else {
            return Err(Error::parse(path, line, format!("expected 2 fields, got {}", fields.len())));
        };
        let row = *index
            .get(clip)
            .ok_or_else(|| Error::parse(path, line, format!("unknown clip id `{clip}`")))?;
        let cell = Cell {
            row,
            class: parse_class(path, line, class, n_classes)?,
        };
        if !seen.insert(cell) {
            return Err(Error::parse(path, line, "duplicate cell"));
        }
        cells.push(cell);
    }
    cells.sort_unstable();
    Ok(cells)
}

pub fn save_clip_splits(clips: &[Clip], path: &Path) -> Result<()> {
    let mut out = String::from(SPLITS_HEADER);
    out.push('\n');
    for c in clips {
        out.push_str(&format!("{},{}\n", c.id(), c.split().as_str()));
    }
    write_file(path, out)
}

pub fn load_clip_splits(path: &Path) -> Result<Vec<(String, Split)>> {
    let text = read_text(path)?;
    let mut out = Vec::new();
    for (line, fields) in csv_rows(path, &text, SPLITS_HEADER)? {
        let [id, split] = fields[..] else {
            return Err(Error::parse(path, line, format!("expected 2 fields, got {}", fields.len())));
        };
        let split = Split::parse(split)
            .ok_or_else(|| Error::parse(path, line, format!("unknown split `{split}`")))?;
        out.push((id.to_string(), split));
    }
    Ok(out)
}

pub fn save_features(clips: &[Clip], path: &Path) -> Result<()> {
    let dim = clips.first().map_or(0, Clip::dim);
    let mut buf = Vec::new();
    buf.extend_from_slice(FEATURES_MAGIC);
    buf.extend_from_slice(&(clips.len() as u32).to_le_bytes());
    buf.extend_from_slice(&(dim as u32).to_le_bytes());
    for clip in clips {
        if clip.dim() != dim {
            return Err(Error::Shape(format!("clip `{}` has dimension {}, expected {dim}", clip.id(), clip.dim())));
        }
        buf.extend_from_slice(&(clip.id().len() as u32).to_le_bytes());
        buf.extend_from_slice(clip.id().as_bytes());
        buf.extend_from_slice(&(clip.patch_count() as u32).to_le_bytes());
        for v in clip.values() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    write_file(path, buf)
}

struct Reader<'a> {
    path: &'a Path,
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos + n;
        if end > self.bytes.len() {
            return Err(Error::Length {
                path: self.path.to_path_buf(),
                expected: end as u64,
                found: self.bytes.len() as u64,
            });
        }
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

/// Loads clips from a features file. Every clip gets `Split::Train`; the
/// split comes from the companion splits file.
pub fn load_features(path: &Path) -> Result<Vec<Clip>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut r = Reader {
        path,
        bytes: &bytes,
        pos: 0,
    };
    if r.take(4)? != FEATURES_MAGIC {
        return Err(Error::Header {
            path: path.to_path_buf(),
            reason: "magic bytes are not MLC1".into(),
        });
    }
    let n_clips = r.u32()? as usize;
    let dim = r.u32()? as usize;
    if n_clips > 0 && dim == 0 {
        return Err(Error::Header {
            path: path.to_path_buf(),
            reason: "feature dimension is zero".into(),
        });
    }
    let mut clips = Vec::with_capacity(n_clips);
    for _ in 0..n_clips {
        let id_len = r.u32()? as usize;
        let id = std::str::from_utf8(r.take(id_len)?)
            .map_err(|_| Error::Header {
                path: path.to_path_buf(),
                reason: "clip id is not UTF-8".into(),
            })?
            .to_string();
        let k = r.u32()? as usize;
        let raw = r.take(k * dim * 4)?;
        let data = raw
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
            .collect();
        clips.push(Clip::new(id, Split::Train, dim, data)?);
    }
    if r.pos != bytes.len() {
        return Err(Error::Length {
            path: path.to_path_buf(),
            expected: r.pos as u64,
            found: bytes.len() as u64,
        });
    }
    Ok(clips)
}

pub const FEATURES_FILE: &str = "features.bin";
pub const SPLITS_FILE: &str = "clips.csv";
pub const LABELS_FILE: &str = "labels.csv";
pub const TRUTH_FILE: &str = "truth.csv";
pub const INJECTION_FILE: &str = "injection.csv";
pub const META_FILE: &str = "corpus.meta";

/// Writes a corpus directory: features, splits, labels, and (when present)
/// truth and injection log.
pub fn save_corpus(corpus: &Corpus, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    save_features(&corpus.clips, &dir.join(FEATURES_FILE))?;
    save_clip_splits(&corpus.clips, &dir.join(SPLITS_FILE))?;
    save_labels(&corpus.labels, &dir.join(LABELS_FILE))?;
    write_file(
        &dir.join(META_FILE),
        format!("n_classes={}\nfeature_dim={}\n", corpus.n_classes(), corpus.feature_dim()),
    )?;
    if let Some(truth) = &corpus.truth {
        save_labels(truth, &dir.join(TRUTH_FILE))?;
    }
    if let Some(log) = &corpus.injection_log {
        save_injection_log(log, corpus.labels.clip_ids(), &dir.join(INJECTION_FILE))?;
    }
    Ok(())
}

fn read_class_count(path: &Path) -> Result<usize> {
    let text = read_text(path)?;
    for (i, line) in text.lines().enumerate() {
        if let Some(v) = line.trim().strip_prefix("n_classes=") {
            return v
                .parse()
                .map_err(|_| Error::parse(path, i + 1, format!("bad class count `{v}`")));
        }
    }
    Err(Error::parse(path, 1, "missing n_classes"))
}

/// Reads a corpus directory. The truth table defaults to explicit negatives
/// for absent cells, the labels table to implicit negatives.
pub fn load_corpus(dir: &Path) -> Result<Corpus> {
    let n_classes = read_class_count(&dir.join(META_FILE))?;
    let mut clips = load_features(&dir.join(FEATURES_FILE))?;
    let splits_path = dir.join(SPLITS_FILE);
    let splits = load_clip_splits(&splits_path)?;
    if splits.len() != clips.len() {
        return Err(Error::Shape(format!(
            "{} lists {} clips, features have {}",
            splits_path.display(),
            splits.len(),
            clips.len()
        )));
    }
    for (clip, (id, split)) in clips.iter_mut().zip(splits) {
        if clip.id() != id {
            return Err(Error::Shape(format!("split row `{id}` does not match clip `{}`", clip.id())));
        }
        clip.set_split(split);
    }
    let ids: Vec<String> = clips.iter().map(|c| c.id().to_string()).collect();
    let labels_path = dir.join(LABELS_FILE);
    let labels = load_labels(&labels_path, &ids, n_classes)?;
    if labels.count(LabelState::Ignored) > 0 {
        return Err(Error::Domain(format!(
            "{}: original label sets cannot contain IG cells",
            labels_path.display()
        )));
    }
    let truth_path = dir.join(TRUTH_FILE);
    let truth = if truth_path.exists() {
        let implicit = load_labels(&truth_path, &ids, n_classes)?;
        let mut truth = LabelTable::new(ids.clone(), n_classes, LabelState::ExplicitNegative)?;
        for r in 0..implicit.n_clips() {
            for c in 0..n_classes {
                if implicit.get(r, c) == LabelState::ExplicitPositive {
                    truth.set(r, c, LabelState::ExplicitPositive);
                }
            }
        }
        Some(truth)
    } else {
        None
    };
    let inj_path = dir.join(INJECTION_FILE);
    let log = if inj_path.exists() {
        Some(load_injection_log(&inj_path, &ids, n_classes)?)
    } else {
        None
    };
    Corpus::new(clips, labels, truth, log)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{generate_synthetic, SynthConfig};

    fn ids(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn labels_round_trip_all_states() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("l.csv");
        let mut t = LabelTable::new(ids(&["b", "a", "c"]), 4, LabelState::ImplicitNegative).unwrap();
        for (i, s) in LabelState::ALL.iter().enumerate() {
            t.set(i % 3, i, *s);
        }
        save_labels(&t, &path).unwrap();
        let back = load_labels(&path, t.clip_ids(), 4).unwrap();
        assert_eq!(back, t);
        // Rows come out sorted by clip id.
        let text = fs::read_to_string(&path).unwrap();
        let first: Vec<&str> = text.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
        let mut sorted = first.clone();
        sorted.sort();
        assert_eq!(first, sorted);
    }

    #[test]
    fn hand_written_labels_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("l.csv");
        fs::write(
            &path,
            "clip_id,class_id,state\nc0,0,EP\nc0,1,EN\nc1,1,IG\nc2,0,EN\n",
        )
        .unwrap();
        let t = load_labels(&path, &ids(&["c0", "c1", "c2"]), 2).unwrap();
        use LabelState::*;
        assert_eq!(
            t.states(),
            &[
                ExplicitPositive,
                ExplicitNegative,
                ImplicitNegative,
                Ignored,
                ExplicitNegative,
                ImplicitNegative
            ]
        );
    }

    #[test]
    fn labels_parse_errors_carry_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("l.csv");
        let clips = ids(&["c0", "c1"]);
        let cases = [
            ("clip_id,class_id,state\nc0,0,EP\nc1,1,XX\n", 3, "unknown state code"),
            ("clip_id,class_id,state\nc0,0,EP\nc0,0,EN\n", 3, "duplicate"),
            ("clip_id,class_id,state\nc0,0\n", 2, "expected 3 fields"),
            ("clip_id,class_id,state\nzz,0,EP\n", 2, "unknown clip"),
            ("clip_id,class_id,state\nc0,9,EP\n", 2, "out of range"),
            ("id,class,state\n", 1, "expected header"),
        ];
        for (text, line, needle) in cases {
            fs::write(&path, text).unwrap();
            match load_labels(&path, &clips, 2) {
                Err(Error::Parse { line: l, reason, .. }) => {
                    assert_eq!(l, line, "{text}");
                    assert!(reason.contains(needle), "{reason}");
                }
                other => panic!("expected parse error for {text:?}, got {other:?}"),
            }
        }
    }

    #[test]
    fn hand_laid_out_features_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.bin");
        let mut bytes = Vec::new();
        bytes.extend_from_slice(b"MLC1");
        bytes.extend_from_slice(&[1, 0, 0, 0]); // n_clips
        bytes.extend_from_slice(&[4, 0, 0, 0]); // D
        bytes.extend_from_slice(&[2, 0, 0, 0]); // id length
        bytes.extend_from_slice(b"k1");
        bytes.extend_from_slice(&[2, 0, 0, 0]); // K
        // 1.0f32 = 0x3f800000, -2.5f32 = 0xc0200000, 0.5 = 0x3f000000
        let values: [[u8; 4]; 8] = [
            [0x00, 0x00, 0x80, 0x3f],
            [0x00, 0x00, 0x20, 0xc0],
            [0, 0, 0, 0],
            [0x00, 0x00, 0x00, 0x3f],
            [0x00, 0x00, 0x00, 0x40],
            [0, 0, 0, 0],
            [0, 0, 0, 0],
            [0x00, 0x00, 0x80, 0xbf],
        ];
        for v in values {
            bytes.extend_from_slice(&v);
        }
        fs::write(&path, &bytes).unwrap();
        let clips = load_features(&path).unwrap();
        assert_eq!(clips.len(), 1);
        assert_eq!(clips[0].id(), "k1");
        let patches: Vec<&[f32]> = clips[0].patches().collect();
        assert_eq!(patches[0], &[1.0, -2.5, 0.0, 0.5]);
        assert_eq!(patches[1], &[2.0, 0.0, 0.0, -1.0]);

        save_features(&clips, &path).unwrap();
        assert_eq!(fs::read(&path).unwrap(), bytes);
    }

    #[test]
    fn truncated_features_is_length_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.bin");
        let corpus = generate_synthetic(&SynthConfig {
            n_clips: 3,
            n_eval_clips: 1,
            feature_dim: 4,
            n_classes: 3,
            ..SynthConfig::default()
        })
        .unwrap();
        save_features(&corpus.clips, &path).unwrap();
        let mut bytes = fs::read(&path).unwrap();
        bytes.truncate(bytes.len() - 3);
        fs::write(&path, &bytes).unwrap();
        assert!(matches!(load_features(&path), Err(Error::Length { .. })));
        bytes.extend_from_slice(&[0; 7]);
        fs::write(&path, &bytes).unwrap();
        assert!(matches!(load_features(&path), Err(Error::Length { .. })));
        fs::write(&path, b"XXXX\0\0\0\0\0\0\0\0").unwrap();
        assert!(matches!(load_features(&path), Err(Error::Header { .. })));
    }

    #[test]
    fn corpus_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let corpus = generate_synthetic(&SynthConfig {
            n_clips: 40,
            n_eval_clips: 10,
            n_classes: 5,
            feature_dim: 3,
            ..SynthConfig::default()
        })
        .unwrap();
        save_corpus(&corpus, dir.path()).unwrap();
        let back = load_corpus(dir.path()).unwrap();
        assert_eq!(back, corpus);
    }

    #[test]
    fn original_labels_reject_ignored_state() {
        let dir = tempfile::tempdir().unwrap();
        let mut corpus = generate_synthetic(&SynthConfig {
            n_clips: 5,
            n_eval_clips: 1,
            n_classes: 2,
            feature_dim: 2,
            ..SynthConfig::default()
        })
        .unwrap();
        corpus.labels.set(0, 0, LabelState::Ignored);
        save_corpus(&corpus, dir.path()).unwrap();
        assert!(matches!(load_corpus(dir.path()), Err(Error::Domain(_))));
    }
}
