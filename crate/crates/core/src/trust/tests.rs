use super::*;
use crate::sample::{self, date, keypair, Hierarchy, Peer};

fn object() -> TrustworthyDigitalObject {
    sample::text_object("Report", "body")
}

#[test]
fn key_files_round_trip() {
    let k = keypair(9);
    let back = KeyPair::from_file_bytes(&k.to_file_bytes()).unwrap();
    assert_eq!(back.public(), k.public());
    assert_eq!(PublicKey::from_file_bytes(&k.public().to_file_bytes()).unwrap(), k.public());
    assert_eq!(PublicKey::from_file_bytes(&k.to_file_bytes()).unwrap(), k.public());
    assert!(KeyPair::from_file_bytes(&k.public().to_file_bytes()).is_err());
    assert!(!format!("{k:?}").contains(&hex::encode(k.private_key_bytes())));
}

#[test]
fn unknown_algorithm_rejected() {
    assert!(matches!(generate_keypair("rsa"), Err(Error::UnknownAlgorithm(_))));
    assert_eq!(generate_keypair("ed25519").unwrap().algorithm_tag(), "ed25519");
}

#[test]
fn signature_verification_never_panics_on_garbage() {
    let k = keypair(3);
    let sig = k.sign(b"m");
    assert!(k.public().verify(b"m", &sig));
    assert!(!k.public().verify(b"n", &sig));
    assert!(!k.public().verify(b"m", &sig[..10]));
    assert!(!SignatureAlgorithm::Ed25519.verify(&[0; 5], b"m", &sig));
}

#[test]
fn issuing_rules() {
    let h = Hierarchy::new("Inst", 1);
    let (from, to) = (date(2020, 1, 1), date(2021, 1, 1));
    let other = keypair(50).public();
    assert!(matches!(
        issue_certificate(&h.root_key, Some(&h.root_cert), &other, "x", Role::Editor, to, from),
        Err(Error::EmptyValidity { .. })
    ));
    assert!(matches!(
        issue_certificate(&h.editor_key, Some(&h.editor_cert), &other, "x", Role::Editor, from, to),
        Err(Error::Role(_))
    ));
    assert!(matches!(
        issue_certificate(&h.root_key, None, &other, "x", Role::Witness, from, to),
        Err(Error::Role(_))
    ));
    assert!(matches!(
        issue_certificate(&h.root_key, None, &other, "x", Role::Root, from, to),
        Err(Error::Role(_))
    ));
    assert!(matches!(
        issue_certificate(&h.witness_key, Some(&h.root_cert), &other, "x", Role::Editor, from, to),
        Err(Error::Key(_))
    ));
    let single_day = issue_certificate(&h.root_key, Some(&h.root_cert), &other, "x", Role::Editor, from, from).unwrap();
    assert!(single_day.covers(from));
    assert!(single_day.verify_issued_by(&h.root_key.public()));
    assert_eq!(single_day.issuer_digest, Some(h.root_cert.digest()));
}

#[test]
fn certificate_document_round_trip() {
    let h = Hierarchy::new("Inst", 1);
    let doc = h.editor_cert.to_document();
    assert_eq!(Certificate::from_document(doc.as_bytes()).unwrap(), h.editor_cert);
}

#[test]
fn sealing_preconditions() {
    let h = Hierarchy::new("Inst", 1);
    let sealed = h.seal(&object(), sample::seal_date()).unwrap();
    assert!(matches!(h.seal(&sealed, sample::seal_date()), Err(Error::AlreadySealed)));
    assert!(matches!(
        h.seal(&object(), date(2031, 1, 1)),
        Err(Error::SealDateOutsideValidity { .. })
    ));
    let reversed = [h.root_cert.clone(), h.witness_cert.clone()];
    assert!(matches!(
        seal_tdo(&object(), &h.editor_key, &h.editor_cert, &reversed, sample::seal_date()),
        Err(Error::BrokenChain(_))
    ));
    assert!(matches!(
        seal_tdo(&object(), &h.editor_key, &h.editor_cert, &h.issuers()[..1], sample::seal_date()),
        Err(Error::BrokenChain(_))
    ));
    assert!(matches!(
        seal_tdo(&object(), &h.witness_key, &h.editor_cert, &h.issuers(), sample::seal_date()),
        Err(Error::Key(_))
    ));
}

#[test]
fn epoch_grounded_seal_verifies() {
    let h = Hierarchy::new("Inst", 1);
    let sealed = h.seal(&object(), sample::seal_date()).unwrap();
    let bytes = crate::canonical::encode(&sealed).unwrap();
    let r = verify_seal(bytes.as_bytes(), &h.trust_store(2024));
    assert!(r.accepted(), "{:?}", r.reasons);
    assert_eq!(r.grounded_via, Some(GroundingPath::RootEpoch));

    let wrong_year = verify_seal(bytes.as_bytes(), &h.trust_store(2023));
    assert!(!wrong_year.accepted());
    assert!(!wrong_year.grounding_ok);
    assert!(wrong_year.signature_ok && wrong_year.chain_ok && wrong_year.date_ok);

    let stranger = Hierarchy::new("Inst", 77);
    assert!(!verify_seal(bytes.as_bytes(), &stranger.trust_store(2024)).accepted());
}

#[test]
fn peer_grounded_seal_verifies() {
    let p = Peer::new("colleague", 30);
    let sealed = p.seal(&object(), sample::seal_date()).unwrap();
    let r = verify_tdo(&sealed, &p.trust_store());
    assert!(r.accepted(), "{:?}", r.reasons);
    assert_eq!(r.grounded_via, Some(GroundingPath::PeerKey));
    let removed = p.trust_store().remove_peer_key("colleague");
    assert!(!verify_tdo(&sealed, &removed).accepted());
    let impostor = TrustStore::new().add_peer_key("colleague", keypair(31).public()).unwrap();
    assert!(!verify_tdo(&sealed, &impostor).accepted());
}

#[test]
fn expired_middle_certificate_fails_date_check() {
    let h = Hierarchy::new("Inst", 1);
    let witness = issue_certificate(
        &h.root_key,
        Some(&h.root_cert),
        &h.witness_key.public(),
        "short-lived witness",
        Role::Witness,
        date(2020, 1, 1),
        date(2022, 1, 1),
    )
    .unwrap();
    let editor = issue_certificate(
        &h.witness_key,
        Some(&witness),
        &h.editor_key.public(),
        "editor",
        Role::Editor,
        date(2020, 1, 1),
        date(2030, 1, 1),
    )
    .unwrap();
    let sealed = seal_tdo(&object(), &h.editor_key, &editor, &[witness, h.root_cert.clone()], sample::seal_date()).unwrap();
    let r = verify_tdo(&sealed, &h.trust_store(2024));
    assert!(!r.accepted());
    assert!(!r.date_ok);
    assert!(r.chain_ok && r.signature_ok && r.grounding_ok);
}

#[test]
fn forged_issuer_signature_fails_chain_check() {
    let h = Hierarchy::new("Inst", 1);
    let mut editor = h.editor_cert.clone();
    editor.signature = keypair(99).sign(&editor.to_be_signed());
    let sealed = seal_tdo(&object(), &h.editor_key, &editor, &h.issuers(), sample::seal_date()).unwrap();
    let r = verify_tdo(&sealed, &h.trust_store(2024));
    assert!(!r.chain_ok);
    assert!(!r.accepted());
}

#[test]
fn seal_date_and_chain_are_signed() {
    let h = Hierarchy::new("Inst", 1);
    let trust = h.trust_store(2024).register_root_epoch("Inst", 2025, h.root_key.public()).unwrap();
    let mut sealed = h.seal(&object(), sample::seal_date()).unwrap();
    assert!(verify_tdo(&sealed, &trust).accepted());
    sealed.seal.as_mut().unwrap().seal_date = date(2025, 6, 1);
    let r = verify_tdo(&sealed, &trust);
    assert!(!r.signature_ok);
}

#[test]
fn trust_store_registration_rules_and_persistence() {
    let h = Hierarchy::new("Inst", 1);
    let t = h.trust_store(2024);
    assert!(matches!(
        t.register_root_epoch("Inst", 2024, keypair(5).public()),
        Err(Error::DuplicateEpoch { year: 2024, .. })
    ));
    let t = t.add_peer_key("bob", keypair(6).public()).unwrap();
    assert!(matches!(t.add_peer_key("bob", keypair(7).public()), Err(Error::DuplicatePeer(_))));
    let back = TrustStore::from_document(t.to_document().as_bytes()).unwrap();
    assert_eq!(back, t);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("trust.tdo");
    assert_eq!(TrustStore::load(&path).unwrap(), TrustStore::new());
    t.save(&path).unwrap();
    assert_eq!(TrustStore::load(&path).unwrap(), t);
}

#[test]
fn report_checks_are_ordered() {
    let r = VerificationReport::default();
    let names: Vec<_> = r.checks().iter().map(|(n, _)| *n).collect();
    assert_eq!(names, ["decode", "signature", "chain", "grounding", "date"]);
    assert!(!r.accepted());
}
