use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use rustc_hash::FxHashMap;

use super::{pack, Entry, NGramModel, WordId, MAX_ORDER};
use crate::error::{Error, Result};

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

pub fn load_arpa(path: &Path) -> Result<NGramModel> {
    read_arpa(File::open(path)?)
}

#[derive(PartialEq)]
enum Section {
    Preamble,
    Data,
    Grams(usize),
    End,
}

/// Parses the ARPA subset: `\data\` counts, `\k-grams:` sections, `\end\`.
pub fn read_arpa<R: Read>(input: R) -> Result<NGramModel> {
    let reader = BufReader::new(input);
    let mut section = Section::Preamble;
    let mut declared: Vec<usize> = Vec::new();
    let mut tables: Vec<FxHashMap<u128, Entry>> = Vec::new();
    let mut vocab: Vec<String> = Vec::new();
    let mut ids: FxHashMap<String, WordId> = FxHashMap::default();
    let mut lineno = 0;
    // line at which each section header appeared
    let mut section_line = 0;

    let close_section =
        |section: &Section, tables: &[FxHashMap<u128, Entry>], declared: &[usize], at: usize| -> Result<()> {
            if let Section::Grams(k) = section {
                let got = tables[k - 1].len();
                if got != declared[k - 1] {
                    return Err(parse_err(
                        at,
                        format!("{k}-grams: declared {} entries, found {got}", declared[k - 1]),
                    ));
                }
            }
            Ok(())
        };

    for line in reader.lines() {
        lineno += 1;
        let line = line?;
        let text = line.trim();
        if text.is_empty() {
            continue;
        }
        if text == "\\data\\" {
            if section != Section::Preamble {
                return Err(parse_err(lineno, "duplicate \\data\\ section"));
            }
            section = Section::Data;
            continue;
        }
        if text == "\\end\\" {
            close_section(&section, &tables, &declared, lineno)?;
            section = Section::End;
            break;
        }
        if let Some(rest) = text.strip_prefix('\\') {
            let Some(k) = rest.strip_suffix("-grams:").and_then(|n| n.parse::<usize>().ok()) else {
                return Err(parse_err(lineno, format!("unknown section header {text:?}")));
            };
            close_section(&section, &tables, &declared, lineno)?;
            let expected = match section {
                Section::Data => 1,
                Section::Grams(prev) => prev + 1,
                _ => return Err(parse_err(lineno, "n-gram section before \\data\\")),
            };
            if k != expected || k > declared.len() {
                return Err(parse_err(lineno, format!("unexpected section \\{k}-grams:")));
            }
            tables.push(FxHashMap::default());
            section = Section::Grams(k);
            section_line = lineno;
            continue;
        }

        match section {
            Section::Preamble => {}
            Section::Data => {
                let Some(spec) = text.strip_prefix("ngram ") else {
                    return Err(parse_err(lineno, format!("malformed \\data\\ line {text:?}")));
                };
                let (k, n) = spec
                    .split_once('=')
                    .and_then(|(k, n)| Some((k.trim().parse::<usize>().ok()?, n.trim().parse::<usize>().ok()?)))
                    .ok_or_else(|| parse_err(lineno, format!("malformed count {text:?}")))?;
                if k != declared.len() + 1 {
                    return Err(parse_err(lineno, format!("count for order {k} out of sequence")));
                }
                if k > MAX_ORDER {
                    return Err(parse_err(lineno, format!("order {k} exceeds supported {MAX_ORDER}")));
                }
                declared.push(n);
            }
            Section::Grams(k) => {
                let fields: Vec<&str> = text.split_whitespace().collect();
                let has_backoff = match fields.len() {
                    n if n == k + 1 => false,
                    n if n == k + 2 => true,
                    _ => {
                        return Err(parse_err(
                            lineno,
                            format!("expected {k} words with a probability, got {text:?}"),
                        ))
                    }
                };
                let number = |s: &str| {
                    s.parse::<f32>()
                        .ok()
                        .filter(|v| v.is_finite())
                        .ok_or_else(|| parse_err(lineno, format!("bad number {s:?}")))
                };
                let prob = number(fields[0])?;
                if prob > 0.0 {
                    return Err(parse_err(lineno, format!("log-probability {prob} above zero")));
                }
                let backoff = if has_backoff { number(fields[k + 1])? } else { 0.0 };
                let mut gram = [0 as WordId; MAX_ORDER];
                for (slot, w) in gram.iter_mut().zip(&fields[1..=k]) {
                    *slot = if k == 1 {
                        if ids.contains_key(*w) {
                            return Err(parse_err(lineno, format!("duplicate unigram {w:?}")));
                        }
                        let id = vocab.len() as WordId;
                        vocab.push((*w).to_string());
                        ids.insert((*w).to_string(), id);
                        id
                    } else {
                        *ids.get(*w)
                            .ok_or_else(|| parse_err(lineno, format!("word {w:?} missing from the unigrams")))?
                    };
                }
                let gram = &gram[..k];
                if k > 1 && !tables[k - 2].contains_key(&pack(&gram[..k - 1])) {
                    return Err(parse_err(
                        lineno,
                        format!("context of {:?} is not a stored {}-gram", &fields[1..=k], k - 1),
                    ));
                }
                if tables[k - 1].insert(pack(gram), Entry { prob, backoff }).is_some() {
                    return Err(parse_err(lineno, format!("duplicate {k}-gram")));
                }
            }
            Section::End => unreachable!(),
        }
    }

    if section != Section::End {
        return Err(parse_err(lineno, "missing \\end\\ marker"));
    }
    if declared.is_empty() || tables.len() != declared.len() {
        return Err(parse_err(
            section_line.max(lineno),
            format!("declared {} orders, found {} sections", declared.len(), tables.len()),
        ));
    }
    Ok(NGramModel::from_parts(vocab, tables))
}

/// Writes the model back out. Unigrams keep id order so a reload assigns
/// the same ids; higher orders are sorted by id sequence.
pub fn write_arpa<W: Write>(model: &NGramModel, mut out: W) -> Result<()> {
    let tables = model.tables();
    writeln!(out, "\\data\\")?;
    for (k, t) in tables.iter().enumerate() {
        writeln!(out, "ngram {}={}", k + 1, t.len())?;
    }
    let order = tables.len();
    for (k0, table) in tables.iter().enumerate() {
        let k = k0 + 1;
        writeln!(out, "\n\\{k}-grams:")?;
        let mut keys: Vec<&u128> = table.keys().collect();
        keys.sort_unstable();
        for key in keys {
            let e = table[key];
            write!(out, "{}\t", e.prob)?;
            let words: Vec<&str> = (0..k)
                .rev()
                .map(|i| {
                    let id = (key >> (32 * i)) as u32;
                    model.word(id).unwrap_or("<?>")
                })
                .collect();
            out.write_all(words.join(" ").as_bytes())?;
            if k < order && e.backoff != 0.0 {
                write!(out, "\t{}", e.backoff)?;
            }
            writeln!(out)?;
        }
    }
    writeln!(out, "\n\\end\\")?;
    Ok(out.flush()?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lm::train_backoff;
    use rand::{Rng, SeedableRng};

    #[test]
    fn minimal_unigram_model() {
        let m = read_arpa("\\data\\\nngram 1=1\n\n\\1-grams:\n-1\ta\n\n\\end\\\n".as_bytes()).unwrap();
        assert_eq!(m.lm_score(&[], m.word_id("a")), -1.0);
        assert_eq!(m.order(), 1);
    }

    #[test]
    fn count_mismatch_names_the_line() {
        let text = "\\data\\\nngram 1=5\n\n\\1-grams:\n-1\ta\n-1\tb\n-1\tc\n-1\td\n\n\\end\\\n";
        match read_arpa(text.as_bytes()) {
            Err(Error::Parse { line, msg }) => {
                assert_eq!(line, 10);
                assert!(msg.contains("declared 5"), "{msg}");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn malformed_inputs() {
        let cases = [
            ("\\data\\\nngram 1=1\n\n\\1-grams:\n-1\ta\n", "missing \\end\\"),
            ("\\data\\\nngram 1=1\n\n\\1-grams:\nfoo\ta\n\\end\\\n", "bad number"),
            ("\\data\\\nngram 1=1\n\n\\1-grams:\n-1\n\\end\\\n", "expected 1 words"),
            (
                "\\data\\\nngram 1=1\nngram 2=1\n\\1-grams:\n-1\ta\n\\2-grams:\n-1\ta b\n\\end\\\n",
                "missing from the unigrams",
            ),
            ("\\data\\\nngram 1=1\n\\2-grams:\n\\end\\\n", "unexpected section"),
            ("\\data\\\nngram 1=1\n\\1-grams:\n0.5\ta\n\\end\\\n", "above zero"),
        ];
        for (text, needle) in cases {
            let err = read_arpa(text.as_bytes()).unwrap_err().to_string();
            assert!(err.contains(needle), "{err:?} should mention {needle:?}");
        }
    }

    #[test]
    fn random_models_round_trip() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for trial in 0..5 {
            let vocab: Vec<String> = (0..12).map(|i| format!("w{i}")).collect();
            let text: Vec<u32> = (0..400).map(|_| rng.random_range(0..12)).collect();
            let model = train_backoff(&vocab, &text, 3, 0.4 + 0.1 * trial as f64).unwrap();
            let mut buf = Vec::new();
            write_arpa(&model, &mut buf).unwrap();
            let back = read_arpa(&buf[..]).unwrap();
            assert_eq!(back.counts(), model.counts());
            for h1 in 0..12 {
                for h2 in 0..12 {
                    for w in 0..12 {
                        assert_eq!(back.lm_score(&[h1, h2], w), model.lm_score(&[h1, h2], w));
                    }
                }
            }
        }
    }
}
