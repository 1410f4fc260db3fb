//! Golden exclusive-C14N vectors produced by an independent implementation
//! (see `fixtures/c14n/gen_vectors.py`).

use std::fs;
use std::path::{Path, PathBuf};

use wrapguard_core::xml::{NodePath, XmlDocument};

fn vector_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/c14n")
}

fn path_from_indices(doc: &XmlDocument, spec: &str) -> NodePath {
    let mut path = doc.root_path();
    let mut cur = doc.root();
    for part in spec.split('/').filter(|s| !s.is_empty()) {
        let i: usize = part.parse().unwrap();
        cur = cur.child_elements().nth(i).unwrap();
        path = path.child(i, cur.name.clone());
    }
    path
}

#[test]
fn golden_vectors() {
    let mut names: Vec<_> = fs::read_dir(vector_dir())
        .unwrap()
        .filter_map(|e| {
            let p = e.unwrap().path();
            (p.extension()? == "xml").then(|| p.file_stem().unwrap().to_string_lossy().into_owned())
        })
        .collect();
    names.sort();
    assert_eq!(names.len(), 23);
    let mut failures = Vec::new();
    for name in &names {
        let dir = vector_dir();
        let input = fs::read(dir.join(format!("{name}.xml"))).unwrap();
        let args = fs::read_to_string(dir.join(format!("{name}.args"))).unwrap();
        let expected = fs::read(dir.join(format!("{name}.c14n"))).unwrap();
        let mut lines = args.lines();
        let target = lines.next().unwrap_or("");
        let prefixes: Vec<&str> = lines.next().unwrap_or("").split_whitespace().collect();
        let doc = XmlDocument::parse(&input).unwrap_or_else(|e| panic!("{name}: {e}"));
        let path = path_from_indices(&doc, target);
        let got = doc.canonicalize(&path, &prefixes).unwrap();
        if got != expected {
            failures.push(format!(
                "{name}\n  expected {}\n  got      {}",
                String::from_utf8_lossy(&expected),
                String::from_utf8_lossy(&got)
            ));
        }
    }
    assert!(failures.is_empty(), "{}", failures.join("\n"));
}
