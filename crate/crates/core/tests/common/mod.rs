#![allow(dead_code)]

use std::fs::File;
use std::io::{BufReader, Read};
use std::path::{Path, PathBuf};

use eudkit::conllu::{Dep, DepHead, Sentence, Token, TokenId};
use flate2::read::GzDecoder;

pub fn data_path(relative: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(relative)
}

/// Raw text of a fixture, transparently decompressing `.gz` files.
pub fn read_text(relative: &str) -> String {
    let path = data_path(relative);
    let file = File::open(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    let mut text = String::new();
    if relative.ends_with(".gz") {
        GzDecoder::new(BufReader::new(file)).read_to_string(&mut text).unwrap();
    } else {
        BufReader::new(file).read_to_string(&mut text).unwrap();
    }
    text
}

pub fn read_doc(relative: &str) -> Vec<Sentence> {
    eudkit::conllu::parse_document(&read_text(relative)).unwrap()
}

/// A sentence of words `w1 .. wn` with the given basic heads and labels;
/// DEPS mirrors the basic tree.
pub fn tree_sentence(heads: &[usize], labels: &[&str]) -> Sentence {
    let tokens = heads
        .iter()
        .zip(labels)
        .enumerate()
        .map(|(i, (&h, &l))| {
            let mut t = Token::new(TokenId::Word(i + 1), format!("w{}", i + 1));
            t.head = Some(h);
            t.deprel = l.to_owned();
            let head = if h == 0 {
                DepHead::Root
            } else {
                DepHead::Node(TokenId::Word(h))
            };
            t.deps = vec![Dep::new(head, l)];
            t
        })
        .collect();
    Sentence::new(vec![], tokens)
}

pub fn heads_of(sentence: &Sentence) -> Vec<usize> {
    sentence.words().map(|t| t.head.unwrap()).collect()
}

/// Printed once per acceptance criterion.
pub fn verdict(criterion: u32, name: &str, pass: bool, detail: &str) {
    println!(
        "acceptance {criterion} [{}] {name}: {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
}
