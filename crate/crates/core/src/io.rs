//! Embedding files: canonical CSV and Kaldi-style text vectors.
//!
//! CSV layout is `utt_id,spk_id,gender,v0,...,v{D-1}` with a header row.
//! Lines starting with `#` are comments. Kaldi text is one
//! `<utt_id>  [ v0 v1 ... ]` record per line; speaker and gender come from
//! optional `utt2spk` / `spk2gender` sidecar maps.

use std::collections::HashMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::types::{Embedding, EmbeddingSet, Gender};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EmbeddingFormat {
    Csv,
    KaldiText,
}

impl EmbeddingFormat {
    /// `.csv` → CSV, anything else → Kaldi text.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => EmbeddingFormat::Csv,
            _ => EmbeddingFormat::KaldiText,
        }
    }
}

/// Formats a double with 17 significant digits (bit-exact on reparse).
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Speaker/gender labels for Kaldi text input.
#[derive(Clone, Debug, Default)]
pub struct KaldiSidecar {
    pub utt2spk: HashMap<String, String>,
    pub spk2gender: HashMap<String, Gender>,
}

impl KaldiSidecar {
    /// Reads whitespace-separated two-column maps in the usual Kaldi layout.
    pub fn read(utt2spk: Option<&Path>, spk2gender: Option<&Path>) -> Result<Self> {
        let mut out = KaldiSidecar::default();
        if let Some(p) = utt2spk {
            for (_, a, b) in read_pairs(p)? {
                out.utt2spk.insert(a, b);
            }
        }
        if let Some(p) = spk2gender {
            for (line, a, b) in read_pairs(p)? {
                let g = b.parse().map_err(|e: Error| parse_err(p, line, e.to_string()))?;
                out.spk2gender.insert(a, g);
            }
        }
        Ok(out)
    }
}

fn read_pairs(path: &Path) -> Result<Vec<(u64, String, String)>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i as u64 + 1;
        let mut parts = raw.split_whitespace();
        match (parts.next(), parts.next(), parts.next()) {
            (None, _, _) => continue,
            (Some(a), Some(b), None) => out.push((line, a.to_string(), b.to_string())),
            _ => return Err(parse_err(path, line, "expected two columns")),
        }
    }
    Ok(out)
}

fn parse_err(path: &Path, line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

pub fn read_embeddings(path: &Path, format: EmbeddingFormat) -> Result<EmbeddingSet> {
    match format {
        EmbeddingFormat::Csv => read_csv(path),
        EmbeddingFormat::KaldiText => read_kaldi_text(path, &KaldiSidecar::default()),
    }
}

fn parse_value(path: &Path, line: u64, cell: &str) -> Result<f64> {
    let v: f64 = cell
        .trim()
        .parse()
        .map_err(|_| parse_err(path, line, format!("non-numeric value `{cell}`")))?;
    if !v.is_finite() {
        return Err(parse_err(path, line, format!("non-finite value `{cell}`")));
    }
    Ok(v)
}

fn finish_set(path: &Path, records: Vec<(u64, Embedding)>, last_line: u64) -> Result<EmbeddingSet> {
    let Some((_, first)) = records.first() else {
        return Err(parse_err(path, last_line.max(1), "empty file: no embeddings"));
    };
    let dim = first.vector().len();
    let mut seen: HashMap<&str, u64> = HashMap::new();
    for (line, e) in &records {
        if e.vector().len() != dim {
            return Err(parse_err(
                path,
                *line,
                format!("ragged row: {} values, expected {dim}", e.vector().len()),
            ));
        }
        if let Some(prev) = seen.insert(e.utterance_id(), *line) {
            return Err(parse_err(
                path,
                *line,
                format!("duplicate utterance id `{}` (first on line {prev})", e.utterance_id()),
            ));
        }
    }
    EmbeddingSet::new(dim, records.into_iter().map(|(_, e)| e).collect())
}

fn read_csv(path: &Path) -> Result<EmbeddingSet> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .comment(Some(b'#'))
        .from_reader(file);
    let csv_err = |e: csv::Error| {
        let line = e.position().map(|p| p.line()).unwrap_or(0);
        parse_err(path, line, e.to_string())
    };
    let header = reader.headers().map_err(csv_err)?.clone();
    let header_line = reader.position().line();
    if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
        return Err(parse_err(path, header_line.max(1), "empty file: missing header"));
    }
    if header.len() < 4 {
        return Err(parse_err(
            path,
            header_line,
            "header must be utt_id,spk_id,gender,v0,...",
        ));
    }
    let header_dim = header.len() - 3;

    let mut records = Vec::new();
    let mut last_line = header_line;
    for row in reader.records() {
        let row = row.map_err(csv_err)?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        last_line = line;
        if row.len() < 4 {
            return Err(parse_err(path, line, "row has no vector values"));
        }
        if row.len() != header.len() {
            return Err(parse_err(
                path,
                line,
                format!("ragged row: {} values, expected {header_dim}", row.len() - 3),
            ));
        }
        let gender: Gender = row[2]
            .parse()
            .map_err(|e: Error| parse_err(path, line, e.to_string()))?;
        let vector = (3..row.len())
            .map(|i| parse_value(path, line, &row[i]))
            .collect::<Result<Vec<_>>>()?;
        let e = Embedding::new(&row[0], &row[1], gender, vector)
            .map_err(|e| parse_err(path, line, e.to_string()))?;
        records.push((line, e));
    }
    finish_set(path, records, last_line + 1)
}

/// Reads Kaldi-style text vectors, labelling them from `sidecar`. Utterances
/// missing from `utt2spk` are their own speaker; missing genders are
/// `unspecified`.
pub fn read_kaldi_text(path: &Path, sidecar: &KaldiSidecar) -> Result<EmbeddingSet> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut records = Vec::new();
    let mut last_line = 0;
    for (i, raw) in BufReader::new(file).lines().enumerate() {
        let line = i as u64 + 1;
        last_line = line;
        let raw = raw.map_err(|e| Error::io(path, e))?;
        let text = raw.trim();
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        let (utt, rest) = text
            .split_once(char::is_whitespace)
            .ok_or_else(|| parse_err(path, line, "expected `<utt_id>  [ v0 v1 ... ]`"))?;
        let body = rest
            .trim()
            .strip_prefix('[')
            .and_then(|r| r.strip_suffix(']'))
            .ok_or_else(|| parse_err(path, line, "vector must be delimited by `[` and `]`"))?;
        let vector = body
            .split_whitespace()
            .map(|cell| parse_value(path, line, cell))
            .collect::<Result<Vec<_>>>()?;
        if vector.is_empty() {
            return Err(parse_err(path, line, "empty vector"));
        }
        let spk = sidecar.utt2spk.get(utt).map(String::as_str).unwrap_or(utt);
        let gender = sidecar
            .spk2gender
            .get(spk)
            .copied()
            .unwrap_or(Gender::Unspecified);
        let e = Embedding::new(utt, spk, gender, vector)
            .map_err(|e| parse_err(path, line, e.to_string()))?;
        records.push((line, e));
    }
    finish_set(path, records, last_line)
}

pub fn write_embeddings(set: &EmbeddingSet, path: &Path, format: EmbeddingFormat) -> Result<()> {
    write_embeddings_with_comment(set, path, format, None)
}

/// Like [`write_embeddings`], optionally prefixing a `# ...` comment line.
pub fn write_embeddings_with_comment(
    set: &EmbeddingSet,
    path: &Path,
    format: EmbeddingFormat,
    comment: Option<&str>,
) -> Result<()> {
    if set.is_empty() {
        return Err(Error::invalid("refusing to write an empty embedding set"));
    }
    let mut out = String::with_capacity(set.len() * set.dimension() * 24);
    if let Some(c) = comment {
        out.push_str("# ");
        out.push_str(c);
        out.push('\n');
    }
    match format {
        EmbeddingFormat::Csv => {
            out.push_str("utt_id,spk_id,gender");
            for i in 0..set.dimension() {
                out.push_str(&format!(",v{i}"));
            }
            out.push('\n');
            for e in set {
                out.push_str(&csv_field(e.utterance_id()));
                out.push(',');
                out.push_str(&csv_field(e.speaker_id()));
                out.push(',');
                out.push_str(e.gender().as_str());
                for &v in e.vector() {
                    out.push(',');
                    out.push_str(&fmt_f64(v));
                }
                out.push('\n');
            }
        }
        EmbeddingFormat::KaldiText => {
            for e in set {
                out.push_str(e.utterance_id());
                out.push_str("  [");
                for &v in e.vector() {
                    out.push(' ');
                    out.push_str(&fmt_f64(v));
                }
                out.push_str(" ]\n");
            }
        }
    }
    write_atomic(path, out.as_bytes())
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Writes via a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir: PathBuf = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(|e| Error::io(path, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.flush().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
        let p = dir.join(name);
        fs::write(&p, text).unwrap();
        p
    }

    fn parse_line(err: Error) -> u64 {
        match err {
            Error::Parse { line, .. } => line,
            other => panic!("expected parse error, got {other}"),
        }
    }

    #[test]
    fn csv_shape() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            "a.csv",
            "utt_id,spk_id,gender,v0,v1,v2,v3\n\
             u1,s1,male,1,2,3,4\nu2,s1,male,1,0,0,0\nu3,s2,female,0,0,0,1\n",
        );
        let set = read_embeddings(&p, EmbeddingFormat::Csv).unwrap();
        assert_eq!(set.dimension(), 4);
        assert_eq!(set.len(), 3);
        assert_eq!(set.embeddings()[2].gender(), Gender::Female);
    }

    #[test]
    fn kaldi_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "x.txt", "utt1  [ 0.5 -1.25 ]\n");
        let set = read_embeddings(&p, EmbeddingFormat::KaldiText).unwrap();
        let e = &set.embeddings()[0];
        assert_eq!(e.utterance_id(), "utt1");
        assert_eq!(e.vector(), &[0.5, -1.25]);
        assert_eq!(e.gender(), Gender::Unspecified);
    }

    #[test]
    fn kaldi_sidecar_labels() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "x.txt", "a [ 1 2 ]\nb [ 3 4 ]\n");
        let u2s = write(dir.path(), "utt2spk", "a spkA\nb spkB\n");
        let s2g = write(dir.path(), "spk2gender", "spkA f\n");
        let side = KaldiSidecar::read(Some(&u2s), Some(&s2g)).unwrap();
        let set = read_kaldi_text(&p, &side).unwrap();
        assert_eq!(set.embeddings()[0].speaker_id(), "spkA");
        assert_eq!(set.embeddings()[0].gender(), Gender::Female);
        assert_eq!(set.embeddings()[1].gender(), Gender::Unspecified);
    }

    #[test]
    fn csv_errors_name_lines() {
        let dir = tempfile::tempdir().unwrap();
        let hdr = "utt_id,spk_id,gender,v0,v1\n";
        let nan = write(dir.path(), "n.csv", &format!("{hdr}u1,s,m,1,2\nu2,s,m,NaN,1\n"));
        assert_eq!(parse_line(read_csv(&nan).unwrap_err()), 3);
        let ragged = write(dir.path(), "r.csv", &format!("{hdr}u1,s,m,1,2\nu2,s,m,1\n"));
        assert_eq!(parse_line(read_csv(&ragged).unwrap_err()), 3);
        let text = write(dir.path(), "t.csv", &format!("{hdr}u1,s,m,abc,2\n"));
        assert_eq!(parse_line(read_csv(&text).unwrap_err()), 2);
        let dup = write(dir.path(), "d.csv", &format!("{hdr}u1,s,m,1,2\nu1,s,m,3,4\n"));
        assert_eq!(parse_line(read_csv(&dup).unwrap_err()), 3);
        let empty = write(dir.path(), "e.csv", "");
        assert!(matches!(read_csv(&empty).unwrap_err(), Error::Parse { .. }));
        let header_only = write(dir.path(), "h.csv", hdr);
        assert!(matches!(read_csv(&header_only).unwrap_err(), Error::Parse { .. }));
    }

    #[test]
    fn kaldi_errors_name_lines() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "k.txt", "a [ 1 2 ]\nb [ 1 inf ]\n");
        assert_eq!(parse_line(read_embeddings(&p, EmbeddingFormat::KaldiText).unwrap_err()), 2);
        let p = write(dir.path(), "k2.txt", "a [ 1 2 ]\nb [ 1 ]\n");
        assert_eq!(parse_line(read_embeddings(&p, EmbeddingFormat::KaldiText).unwrap_err()), 2);
        let p = write(dir.path(), "k3.txt", "a 1 2\n");
        assert_eq!(parse_line(read_embeddings(&p, EmbeddingFormat::KaldiText).unwrap_err()), 1);
    }

    #[test]
    fn one_third_is_17_digits_and_bit_exact() {
        let s = fmt_f64(1.0 / 3.0);
        let mantissa = s.split('e').next().unwrap().replace(['.', '-'], "");
        assert_eq!(mantissa.len(), 17);
        assert_eq!(s.parse::<f64>().unwrap().to_bits(), (1.0f64 / 3.0).to_bits());

        let dir = tempfile::tempdir().unwrap();
        let set = EmbeddingSet::from_embeddings(vec![
            Embedding::new("u", "s", Gender::Female, vec![1.0 / 3.0, -2.0]).unwrap(),
        ])
        .unwrap();
        let p = dir.path().join("third.csv");
        write_embeddings(&set, &p, EmbeddingFormat::Csv).unwrap();
        let back = read_embeddings(&p, EmbeddingFormat::Csv).unwrap();
        assert_eq!(back, set);
    }

    #[test]
    fn empty_set_write_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let set = EmbeddingSet::new(3, vec![]).unwrap();
        let err = write_embeddings(&set, &dir.path().join("e.csv"), EmbeddingFormat::Csv);
        assert!(matches!(err, Err(Error::InvalidInput(_))));
    }

    #[test]
    fn comment_lines_are_skipped() {
        let dir = tempfile::tempdir().unwrap();
        let set = EmbeddingSet::from_embeddings(vec![
            Embedding::new("u,1", "s\"x", Gender::Male, vec![1.5]).unwrap(),
        ])
        .unwrap();
        let p = dir.path().join("c.csv");
        write_embeddings_with_comment(&set, &p, EmbeddingFormat::Csv, Some("seed=3 version=1")).unwrap();
        assert!(fs::read_to_string(&p).unwrap().starts_with("# seed=3"));
        assert_eq!(read_embeddings(&p, EmbeddingFormat::Csv).unwrap(), set);
    }

    #[test]
    fn unwritable_path_is_io_error() {
        let set = EmbeddingSet::from_embeddings(vec![
            Embedding::new("u", "s", Gender::Male, vec![1.0]).unwrap(),
        ])
        .unwrap();
        let err = write_embeddings(&set, Path::new("/nonexistent-dir/x.csv"), EmbeddingFormat::Csv);
        assert!(matches!(err, Err(Error::Io { .. })));
    }
}
