//! Parsers for the TREC file formats: SGML document collections, topic
//! files, and 4-column qrels.

use std::io::{BufRead, Read, Write};

use super::{CorpusError, QrelSet, RawDoc, Topic};

/// Tags whose contents count as document text, in the order they appear.
const TEXT_TAGS: &[&str] = &[
    "TEXT", "HEADLINE", "HEAD", "TITLE", "LEADPARA", "SUMMARY", "ABSTRACT",
];

/// Parses concatenated `<DOC>...</DOC>` records.
///
/// Each record must contain a `<DOCNO>`; its text is the concatenation of the
/// recognized text fields in file order, with any embedded markup replaced by
/// whitespace.
pub fn parse_trec_documents(mut reader: impl Read) -> Result<Vec<RawDoc>, CorpusError> {
    let mut buf = String::new();
    reader.read_to_string(&mut buf)?;
    let mut docs = Vec::new();
    let mut pos = 0;
    while let Some(rel) = buf[pos..].find("<DOC>") {
        let start = pos + rel;
        let body_start = start + "<DOC>".len();
        let body_end = buf[body_start..]
            .find("</DOC>")
            .map(|r| body_start + r)
            .ok_or(CorpusError::UnterminatedBlock { offset: start })?;
        let block = &buf[body_start..body_end];
        let docno = field(block, "DOCNO")
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .ok_or(CorpusError::MissingDocno { offset: start })?;
        docs.push(RawDoc {
            docno: docno.to_string(),
            text: collect_text_fields(block),
        });
        pos = body_end + "</DOC>".len();
    }
    Ok(docs)
}

/// First `<TAG>...</TAG>` region inside `block`, if any.
fn field<'a>(block: &'a str, tag: &str) -> Option<&'a str> {
    let open = format!("<{tag}>");
    let close = format!("</{tag}>");
    let start = block.find(&open)? + open.len();
    let end = block[start..].find(&close)? + start;
    Some(&block[start..end])
}

fn collect_text_fields(block: &str) -> String {
    let mut parts = Vec::new();
    let mut pos = 0;
    while let Some(rel) = block[pos..].find('<') {
        let at = pos + rel;
        let rest = &block[at..];
        let mut matched = None;
        for tag in TEXT_TAGS {
            let open = format!("<{tag}>");
            if rest.starts_with(&open) {
                let close = format!("</{tag}>");
                if let Some(end_rel) = rest[open.len()..].find(&close) {
                    let content = &rest[open.len()..open.len() + end_rel];
                    parts.push(strip_markup(content));
                    matched = Some(at + open.len() + end_rel + close.len());
                }
                break;
            }
        }
        pos = matched.unwrap_or(at + 1);
    }
    parts.join("\n")
}

/// Replaces `<...>` runs with a space so nested markup (e.g. `<P>`) does not
/// glue words together.
fn strip_markup(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut in_tag = false;
    for c in s.chars() {
        match c {
            '<' => {
                in_tag = true;
                out.push(' ');
            }
            '>' if in_tag => in_tag = false,
            _ if !in_tag => out.push(c),
            _ => {}
        }
    }
    out.trim().to_string()
}

/// Result of parsing a topic file: well-formed topics plus per-block errors
/// for the blocks that could not be parsed.
#[derive(Debug, Default)]
pub struct TopicsParse {
    pub topics: Vec<Topic>,
    pub errors: Vec<CorpusError>,
}

/// Parses `<top>` blocks with `<num>` and `<title>` fields.
///
/// The qid is the digits of the num field with leading zeros stripped; the
/// title is whitespace-collapsed. A malformed block is reported in `errors`
/// and the remaining blocks are still returned.
pub fn parse_trec_topics(mut reader: impl Read) -> Result<TopicsParse, CorpusError> {
    let mut buf = String::new();
    reader.read_to_string(&mut buf)?;
    let mut out = TopicsParse::default();
    let mut pos = 0;
    let mut block_no = 0;
    while let Some(rel) = buf[pos..].find("<top>") {
        block_no += 1;
        let start = pos + rel + "<top>".len();
        let end = buf[start..]
            .find("</top>")
            .map(|r| start + r)
            .unwrap_or(buf.len());
        let block = &buf[start..end];
        match parse_topic_block(block) {
            Ok(topic) => out.topics.push(topic),
            Err(reason) => out.errors.push(CorpusError::BadTopic {
                block: block_no,
                reason,
            }),
        }
        pos = end;
    }
    Ok(out)
}

fn parse_topic_block(block: &str) -> Result<Topic, String> {
    let num = tag_text(block, "num").ok_or("missing <num> field")?;
    let digits: String = num.chars().filter(|c| c.is_ascii_digit()).collect();
    if digits.is_empty() {
        return Err(format!("no digits in num field {num:?}"));
    }
    let qid = digits.trim_start_matches('0');
    let qid = if qid.is_empty() { "0" } else { qid };

    let title = tag_text(block, "title").ok_or("missing <title> field")?;
    let title = title
        .trim()
        .strip_prefix("Topic:")
        .unwrap_or(title.trim())
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ");
    if title.is_empty() {
        return Err("empty title".to_string());
    }
    Ok(Topic {
        qid: qid.to_string(),
        title,
    })
}

/// Text following `<tag>` up to the next `<`, in the unclosed-field style
/// used by TREC topic files.
fn tag_text<'a>(block: &'a str, tag: &str) -> Option<&'a str> {
    let open = format!("<{tag}>");
    let start = block.find(&open)? + open.len();
    let rest = &block[start..];
    let end = rest.find('<').unwrap_or(rest.len());
    Some(&rest[..end])
}

/// Parses 4-column qrels lines: `qid 0 docno grade`. Duplicate (qid, docno)
/// pairs keep the last grade.
pub fn parse_qrels(reader: impl BufRead) -> Result<QrelSet, CorpusError> {
    let mut qrels = QrelSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(CorpusError::QrelLine {
                line: line_no,
                reason: format!("expected 4 fields, found {}", fields.len()),
            });
        }
        let grade: i64 = fields[3].parse().map_err(|_| CorpusError::QrelLine {
            line: line_no,
            reason: format!("relevance {:?} is not an integer", fields[3]),
        })?;
        if grade < 0 {
            return Err(CorpusError::QrelLine {
                line: line_no,
                reason: format!("negative relevance {grade}"),
            });
        }
        qrels.insert(fields[0], fields[2], grade as u32);
    }
    Ok(qrels)
}

/// Writes qrels in the same 4-column format, sorted by qid then docno.
pub fn write_qrels(qrels: &QrelSet, mut writer: impl Write) -> std::io::Result<()> {
    for qid in qrels.qids().map(str::to_string).collect::<Vec<_>>() {
        for (docno, grade) in qrels.judged(&qid) {
            writeln!(writer, "{qid} 0 {docno} {grade}")?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_well_formed_record() {
        let docs =
            parse_trec_documents("<DOC><DOCNO> A1 </DOCNO><TEXT>apple</TEXT></DOC>".as_bytes())
                .unwrap();
        assert_eq!(
            docs,
            vec![RawDoc {
                docno: "A1".into(),
                text: "apple".into()
            }]
        );
    }

    #[test]
    fn empty_stream_gives_no_docs() {
        assert!(parse_trec_documents("".as_bytes()).unwrap().is_empty());
    }

    #[test]
    fn two_blocks_in_file_order() {
        let input = "<DOC><DOCNO>A1</DOCNO><TEXT>apple pie</TEXT></DOC>\n\
                     <DOC><DOCNO>A2</DOCNO><HEADLINE>News</HEADLINE><TEXT>banana</TEXT></DOC>";
        let docs = parse_trec_documents(input.as_bytes()).unwrap();
        assert_eq!(docs.len(), 2);
        assert_eq!(docs[0].docno, "A1");
        assert_eq!(docs[1].docno, "A2");
        assert_eq!(docs[1].text, "News\nbanana");
    }

    #[test]
    fn missing_docno_reports_offset() {
        let input = "<DOC><DOCNO>A1</DOCNO><TEXT>x</TEXT></DOC><DOC><TEXT>y</TEXT></DOC>";
        let err = parse_trec_documents(input.as_bytes()).unwrap_err();
        match err {
            CorpusError::MissingDocno { offset } => {
                assert_eq!(&input[offset..offset + 5], "<DOC>");
                assert!(offset > 0);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn nested_markup_is_stripped() {
        let input = "<DOC><DOCNO>A1</DOCNO><TEXT><P>one</P><P>two</P></TEXT></DOC>";
        let docs = parse_trec_documents(input.as_bytes()).unwrap();
        let tokens: Vec<&str> = docs[0].text.split_whitespace().collect();
        assert_eq!(tokens, vec!["one", "two"]);
    }

    #[test]
    fn standard_topic_block() {
        let input = "<top>\n<num> Number: 051\n<dom> Domain: International\n\
                     <title> Topic: Airbus Subsidies\n<desc> ignored\n</top>";
        let parsed = parse_trec_topics(input.as_bytes()).unwrap();
        assert!(parsed.errors.is_empty());
        assert_eq!(
            parsed.topics,
            vec![Topic {
                qid: "51".into(),
                title: "Airbus Subsidies".into()
            }]
        );
    }

    #[test]
    fn empty_topic_stream() {
        let parsed = parse_trec_topics("".as_bytes()).unwrap();
        assert!(parsed.topics.is_empty());
        assert!(parsed.errors.is_empty());
    }

    #[test]
    fn wrapped_title_collapses_to_one_line() {
        let input = "<top><num> 104 <title> Catastrophic Health\n  Insurance\n</top>";
        let parsed = parse_trec_topics(input.as_bytes()).unwrap();
        assert_eq!(parsed.topics[0].title, "Catastrophic Health Insurance");
        assert_eq!(parsed.topics[0].qid, "104");
    }

    #[test]
    fn missing_title_skips_block_keeps_rest() {
        let input = "<top><num> 1 </top><top><num> 2 <title> ok </top>";
        let parsed = parse_trec_topics(input.as_bytes()).unwrap();
        assert_eq!(parsed.topics.len(), 1);
        assert_eq!(parsed.topics[0].qid, "2");
        assert_eq!(parsed.errors.len(), 1);
    }

    #[test]
    fn all_zero_qid_keeps_one_digit() {
        let input = "<top><num> 000 <title> zeroes </top>";
        let parsed = parse_trec_topics(input.as_bytes()).unwrap();
        assert_eq!(parsed.topics[0].qid, "0");
    }

    #[test]
    fn qrels_basic_and_last_wins() {
        let q = parse_qrels("51 0 A1 1".as_bytes()).unwrap();
        assert_eq!(q.grade("51", "A1"), Some(1));

        let q = parse_qrels("51 0 A1 1\n51 0 A1 0".as_bytes()).unwrap();
        assert_eq!(q.grade("51", "A1"), Some(0));
    }

    #[test]
    fn qrels_three_lines_three_entries() {
        let q = parse_qrels("51 0 A1 1\n51 0 A2 0\n52 0 A1 2\n".as_bytes()).unwrap();
        assert_eq!(q.len(), 3);
    }

    #[test]
    fn qrels_bad_grade_reports_line() {
        let err = parse_qrels("51 0 A1 1\n51 0 A2 x".as_bytes()).unwrap_err();
        match err {
            CorpusError::QrelLine { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn qrels_roundtrip_is_identity() {
        let input = "9 0 B2 2\n51 0 A1 1\n51 0 A2 0\n";
        let q = parse_qrels(input.as_bytes()).unwrap();
        let mut buf = Vec::new();
        write_qrels(&q, &mut buf).unwrap();
        let q2 = parse_qrels(buf.as_slice()).unwrap();
        assert_eq!(q, q2);
    }
}
