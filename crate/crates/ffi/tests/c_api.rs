use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use skipgram_ffi::*;

const STAR: &str = "Every person had a star, every star had a friend, and for every person carrying \
a star there was someone else who reflected it, and everyone carried this reflection like a \
secret confidante in the heart.";

fn corpus(text: &str) -> *mut SgCorpus {
    let text = CString::new(text).unwrap();
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { sg_corpus_from_text(text.as_ptr(), 1, &mut out) }, SgStatus::Ok);
    out
}

fn last_error() -> String {
    let p = sg_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn corpus_and_counts_roundtrip() {
    let c = corpus(STAR);
    unsafe {
        assert_eq!(sg_corpus_vocab_size(c), 26);
        assert_eq!(sg_corpus_num_tokens(c), 36);
        assert_eq!(CStr::from_ptr(sg_corpus_word(c, 0)).to_str().unwrap(), "a");
        assert!(sg_corpus_word(c, 26).is_null());

        let mut every = usize::MAX;
        let word = CString::new("every").unwrap();
        assert_eq!(sg_corpus_word_id(c, word.as_ptr(), &mut every), SgStatus::Ok);
        let mut star = usize::MAX;
        let word = CString::new("star").unwrap();
        assert_eq!(sg_corpus_word_id(c, word.as_ptr(), &mut star), SgStatus::Ok);

        let mut t = ptr::null_mut();
        assert_eq!(sg_table_count(c, 2, &mut t), SgStatus::Ok);
        let mut n = 0u64;
        assert_eq!(sg_table_pair_count(t, every, star, &mut n), SgStatus::Ok);
        assert_eq!(n, 2);
        let mut p = 0.0;
        assert_eq!(
            sg_table_ground_truth_prob(t, every, star, SgProbMode::FullWindow, &mut p),
            SgStatus::Ok
        );
        assert!((p - 2.0 / 12.0).abs() < 1e-12);
        assert_eq!(
            sg_table_ground_truth_prob(t, every, star, SgProbMode::Normalized, &mut p),
            SgStatus::Ok
        );
        assert!((p - 0.2).abs() < 1e-12);
        sg_table_free(t);
        sg_corpus_free(c);
    }
}

#[test]
fn error_codes_and_messages() {
    let c = corpus("a b c");
    unsafe {
        let word = CString::new("zebra").unwrap();
        let mut id = 0;
        assert_eq!(sg_corpus_word_id(c, word.as_ptr(), &mut id), SgStatus::UnknownWord);
        assert!(last_error().contains("zebra"));

        assert_eq!(sg_corpus_word_id(ptr::null(), word.as_ptr(), &mut id), SgStatus::NullPointer);
        assert!(last_error().contains("corpus"));

        let mut t = ptr::null_mut();
        assert_eq!(sg_table_count(c, 0, &mut t), SgStatus::InvalidArgument);
        assert!(t.is_null());

        let mut out = ptr::null_mut();
        let text = CString::new("x").unwrap();
        assert_eq!(sg_corpus_from_text(text.as_ptr(), 0, &mut out), SgStatus::InvalidArgument);

        let mut emb = ptr::null_mut();
        assert_eq!(sg_embeddings_init(3, 4, 1, &mut emb), SgStatus::Ok);
        let mut buf = [0.0; 2];
        assert_eq!(sg_softmax_row(emb, 0, buf.as_mut_ptr(), 2), SgStatus::InvalidArgument);
        assert_eq!(sg_softmax_row(emb, 7, buf.as_mut_ptr(), 2), SgStatus::InvalidArgument);

        let prefix = CString::new("/nonexistent/dir/model").unwrap();
        let mut loaded = ptr::null_mut();
        assert_eq!(sg_embeddings_load(prefix.as_ptr(), &mut loaded), SgStatus::Io);
        assert!(last_error().contains("output vectors are required"));

        sg_embeddings_free(emb);
        sg_corpus_free(c);
        // Freeing null is a no-op.
        sg_corpus_free(ptr::null_mut());
        sg_table_free(ptr::null_mut());
        sg_embeddings_free(ptr::null_mut());
    }
}

#[test]
fn exact_training_through_the_c_api() {
    let c = corpus(STAR);
    unsafe {
        let cfg = sg_exact_config_default();
        assert_eq!(cfg.epochs, 500);
        assert_eq!(cfg.radius, 2);
        let mut emb = ptr::null_mut();
        assert_eq!(sg_train_exact(c, &cfg, &mut emb), SgStatus::Ok);
        assert_eq!(sg_embeddings_num_words(emb), 26);
        assert_eq!(sg_embeddings_dim(emb), 16);

        let mut row = vec![0.0; 26];
        assert_eq!(sg_softmax_row(emb, 0, row.as_mut_ptr(), row.len()), SgStatus::Ok);
        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);

        let mut t = ptr::null_mut();
        assert_eq!(sg_table_count(c, 2, &mut t), SgStatus::Ok);
        let mut e = 0.0;
        assert_eq!(sg_average_log_prob(emb, c, 2, &mut e), SgStatus::Ok);
        let mut e_star = 0.0;
        assert_eq!(sg_optimal_objective(t, &mut e_star), SgStatus::Ok);
        assert!(e < e_star && e > e_star - 1.0, "E {e} vs E* {e_star}");

        let probe = CString::new("every").unwrap();
        let mut corr = 0.0;
        assert_eq!(sg_correlation(emb, t, c, probe.as_ptr(), 26, &mut corr), SgStatus::Ok);
        assert!(corr > 0.9, "corr {corr}");

        let dir = tempfile::tempdir().unwrap();
        let prefix = CString::new(dir.path().join("m").to_str().unwrap()).unwrap();
        assert_eq!(sg_embeddings_save(emb, c, prefix.as_ptr()), SgStatus::Ok);
        let mut back = ptr::null_mut();
        assert_eq!(sg_embeddings_load(prefix.as_ptr(), &mut back), SgStatus::Ok);
        let (mut a, mut b) = (vec![0.0; 16], vec![0.0; 16]);
        for w in 0..26 {
            for side in [0, 1] {
                assert_eq!(sg_embeddings_vector(emb, w, side, a.as_mut_ptr(), 16), SgStatus::Ok);
                assert_eq!(sg_embeddings_vector(back, w, side, b.as_mut_ptr(), 16), SgStatus::Ok);
                assert_eq!(a, b);
            }
        }

        sg_embeddings_free(back);
        sg_embeddings_free(emb);
        sg_table_free(t);
        sg_corpus_free(c);
    }
}

#[test]
fn sgns_training_is_seeded() {
    let c = corpus(STAR);
    unsafe {
        let mut cfg = sg_sgns_config_default();
        assert_eq!(cfg.negatives, 15);
        cfg.epochs = 20;
        let (mut a, mut b) = (ptr::null_mut(), ptr::null_mut());
        assert_eq!(sg_train_sgns(c, &cfg, &mut a), SgStatus::Ok);
        assert_eq!(sg_train_sgns(c, &cfg, &mut b), SgStatus::Ok);
        let (mut x, mut y) = (vec![0.0; 16], vec![0.0; 16]);
        sg_embeddings_vector(a, 3, 0, x.as_mut_ptr(), 16);
        sg_embeddings_vector(b, 3, 0, y.as_mut_ptr(), 16);
        assert_eq!(x, y);

        cfg.negatives = 0;
        let mut bad = ptr::null_mut();
        assert_eq!(sg_train_sgns(c, &cfg, &mut bad), SgStatus::InvalidArgument);
        sg_embeddings_free(a);
        sg_embeddings_free(b);
        sg_corpus_free(c);
    }
}

fn header() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("include/skipgram.h")
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(header()).unwrap();
    let source = include_str!("../src/lib.rs");
    let exports: Vec<&str> = source
        .lines()
        .filter_map(|l| l.split("extern \"C\" fn ").nth(1))
        .map(|rest| rest.split('(').next().unwrap())
        .collect();
    assert!(exports.len() > 20);
    for name in exports {
        assert!(header.contains(&format!("{name}(")), "{name} missing from header");
    }
    for handle in ["SgCorpus", "SgTable", "SgEmbeddings"] {
        assert!(header.contains(&format!("typedef struct {handle} {handle};")), "{handle} not opaque");
    }
}

/// Compile and run a C program against the header and the static library.
#[test]
fn c_program_links_and_runs() {
    let Ok(cc) = which_cc() else {
        eprintln!("no C compiler found, skipping");
        return;
    };
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().and_then(Path::parent).unwrap();
    let lib = profile_dir.join("libskipgram_ffi.a");
    assert!(lib.exists(), "{} not built", lib.display());

    let dir = tempfile::tempdir().unwrap();
    let bin = dir.path().join("smoke");
    let src = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/c/smoke.c");
    let status = Command::new(&cc)
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(header().parent().unwrap())
        .arg(&src)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success(), "compiling {}", src.display());
    let out = Command::new(&bin).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "ok");
}

fn which_cc() -> Result<String, ()> {
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    match Command::new(&cc).arg("--version").output() {
        Ok(o) if o.status.success() => Ok(cc),
        _ => Err(()),
    }
}
