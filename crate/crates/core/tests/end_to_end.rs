use std::path::Path;
use std::process::Command;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pufbind::authenticator::{authenticate, Verdict, DEFAULT_CLOCK_HZ};
use pufbind::image::{bind_image, program_region_digest, read_image, write_image, INSTRUCTION_MASK};
use pufbind::picoblaze::{self, CoreState};
use pufbind::registry::{enrollment_record, EnrollmentRecord};
use pufbind::{BramGeometry, DeviceModel, Digest256, FuzzyParams, ProgramHex, Registry};

fn random_program(rng: &mut ChaCha8Rng, max_len: usize) -> ProgramHex {
    let len = rng.gen_range(1..=max_len);
    ProgramHex::new((0..len).map(|_| rng.gen::<u32>() & INSTRUCTION_MASK).collect()).unwrap()
}

#[test]
fn corpus_bind_verify_and_mutations() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let geometry = BramGeometry::default();
    for pair in 0..120u64 {
        let device = DeviceModel::create(10_000 + pair, 0.05).unwrap();
        let record = enrollment_record(&device, &FuzzyParams::default(), pair).unwrap();
        let prog = random_program(&mut rng, 300);
        let image = bind_image(&prog, geometry, &record.sha256_k0).unwrap();
        let read = rng.gen();

        let (report, gate) = authenticate(&image, &device, &record.helper, read, DEFAULT_CLOCK_HZ).unwrap();
        assert_eq!(report.verdict, Verdict::Pass, "pair {pair}");
        assert!(gate.is_enabled());

        let mut prog_flip = image.clone();
        prog_flip.flip_bit(rng.gen_range(0..1016), rng.gen_range(0..32));
        let (r, _) = authenticate(&prog_flip, &device, &record.helper, read, DEFAULT_CLOCK_HZ).unwrap();
        assert_eq!(r.verdict, Verdict::Fail);

        let mut sig_flip = image.clone();
        sig_flip.flip_bit(rng.gen_range(1016..1024), rng.gen_range(0..32));
        let (r, _) = authenticate(&sig_flip, &device, &record.helper, read, DEFAULT_CLOCK_HZ).unwrap();
        assert_eq!(r.verdict, Verdict::Fail);

        let other = DeviceModel::create(900_000 + pair, 0.05).unwrap();
        let (r, _) = authenticate(&image, &other, &record.helper, read, DEFAULT_CLOCK_HZ).unwrap();
        assert_eq!(r.verdict, Verdict::Fail);
    }
}

#[test]
fn enrolled_devices_have_distinct_digests() {
    let digests: std::collections::HashSet<Digest256> = (0..150u64)
        .map(|i| {
            let d = DeviceModel::create(i, 0.05).unwrap();
            enrollment_record(&d, &FuzzyParams::default(), 0).unwrap().sha256_k0
        })
        .collect();
    assert_eq!(digests.len(), 150);
}

#[test]
fn binding_is_deterministic_and_geometry_scales() {
    let prog = picoblaze::ring_counter_program();
    let d = DeviceModel::create(5, 0.05).unwrap();
    let rec = enrollment_record(&d, &FuzzyParams::default(), 1).unwrap();
    let a = bind_image(&prog, BramGeometry::default(), &rec.sha256_k0).unwrap();
    let b = bind_image(&prog, BramGeometry::default(), &rec.sha256_k0).unwrap();
    assert_eq!(a.to_bytes(), b.to_bytes());

    let big = BramGeometry::new(2048).unwrap();
    let img = bind_image(&prog, big, &rec.sha256_k0).unwrap();
    let (report, _) = authenticate(&img, &d, &rec.helper, 3, DEFAULT_CLOCK_HZ).unwrap();
    assert_eq!(report.verdict, Verdict::Pass);
    assert_eq!(report.cycles, 2049);
}

#[test]
fn tampered_images_never_execute() {
    let d = DeviceModel::create(8, 0.05).unwrap();
    let rec = enrollment_record(&d, &FuzzyParams::default(), 1).unwrap();
    let img = bind_image(&picoblaze::ring_counter_program(), BramGeometry::default(), &rec.sha256_k0).unwrap();
    for bit in 0..32 {
        let mut bad = img.clone();
        bad.flip_bit(bit as usize % 18, bit);
        let (report, gate) = authenticate(&bad, &d, &rec.helper, 0, DEFAULT_CLOCK_HZ).unwrap();
        assert_eq!(report.verdict, Verdict::Fail);
        let err = picoblaze::run(CoreState::new(), &bad, &gate, 1000).unwrap_err();
        assert_eq!(err, picoblaze::CoreError::GateClosed);
    }
}

#[test]
fn registry_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let reg = Registry::new(dir.path().join("reg.txt"));
    let mut written = Vec::new();
    for i in 0..20u64 {
        let d = DeviceModel::create_with_id(format!("dev-{i}"), i, 0.05).unwrap();
        written.push(reg.enroll(&d, &FuzzyParams::default(), i * 3).unwrap());
    }
    assert_eq!(reg.records().unwrap(), written);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn image_file_round_trip(
        instrs in proptest::collection::vec(0u32..=INSTRUCTION_MASK, 1..200),
        words in 208usize..1500,
        digest in any::<[u8; 32]>(),
    ) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.img");
        let geometry = BramGeometry::new(words).unwrap();
        let img = bind_image(&ProgramHex::new(instrs.clone()).unwrap(), geometry, &Digest256(digest)).unwrap();
        write_image(&path, &img).unwrap();
        prop_assert_eq!(std::fs::metadata(&path).unwrap().len() as usize, words * 4);
        let back = read_image(&path, geometry).unwrap();
        prop_assert_eq!(&back, &img);

        // Layout: tail XOR recomputed region digest gives the bind-time digest.
        let recovered = back.signature().xor(&program_region_digest(back.program_region()));
        prop_assert_eq!(recovered, Digest256(digest));
        prop_assert!(back.program_region()[..instrs.len()].iter().all(|w| w >> 18 == 0));
        prop_assert!(back.program_region()[instrs.len()..].iter().all(|&w| w == 0));
    }

    #[test]
    fn registry_line_round_trip(seed in any::<u64>(), enc in any::<u64>()) {
        let d = DeviceModel::create(seed, 0.05).unwrap();
        let rec = enrollment_record(&d, &FuzzyParams::default(), enc).unwrap();
        prop_assert_eq!(EnrollmentRecord::parse_line(&rec.to_line()).unwrap(), rec);
    }
}

fn cli(dir: &Path, args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_pufbind"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap();
    (out.status.code().unwrap(), String::from_utf8(out.stdout).unwrap())
}

#[test]
fn cli_flows_and_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(cli(d, &["new-device", "--seed", "1", "--id", "A", "-o", "a.dev"]).0, 0);
    assert_eq!(cli(d, &["new-device", "--seed", "2", "--id", "B", "-o", "b.dev"]).0, 0);
    assert_eq!(cli(d, &["new-device", "--seed", "7", "--noise", "0.6", "-o", "c.dev"]).0, 2);

    let (code, out) = cli(d, &["enroll", "--device", "a.dev", "--registry", "reg.txt"]);
    assert_eq!(code, 0);
    let digest = out.lines().find_map(|l| l.strip_prefix("sha256_k0=")).unwrap();
    assert_eq!(digest.len(), 64);
    assert_eq!(cli(d, &["enroll", "--device", "a.dev", "--registry", "reg.txt"]).0, 2);
    assert_eq!(cli(d, &["enroll", "--device", "b.dev", "--registry", "reg.txt", "--seed", "4"]).0, 0);

    assert_eq!(cli(d, &["auth-device", "--device", "a.dev", "--registry", "reg.txt", "--seed", "11"]).0, 0);
    assert_eq!(cli(d, &["new-device", "--seed", "3", "--id", "Z", "-o", "z.dev"]).0, 0);
    assert_eq!(cli(d, &["auth-device", "--device", "z.dev", "--registry", "reg.txt"]).0, 2);

    let hex = Path::new(env!("CARGO_MANIFEST_DIR")).join("demo/ring_counter.hex");
    let hex = hex.to_str().unwrap();
    let bind = ["bind", "--hex", hex, "--registry", "reg.txt", "--device-id", "A", "-o", "a.img"];
    assert_eq!(cli(d, &bind).0, 0);
    let first = std::fs::read(d.join("a.img")).unwrap();
    assert_eq!(first.len(), 4096);
    assert_eq!(cli(d, &bind).0, 0);
    assert_eq!(std::fs::read(d.join("a.img")).unwrap(), first);

    let (code, out) = cli(d, &["verify", "--image", "a.img", "--device", "a.dev", "--registry", "reg.txt", "--seed", "5"]);
    assert_eq!(code, 0);
    assert!(out.contains("verdict=PASS") && out.contains("cycles=1025"));

    let (code, out) = cli(d, &["run", "--image", "a.img", "--device", "a.dev", "--registry", "reg.txt", "--max-steps", "17"]);
    assert_eq!(code, 0);
    assert_eq!(out, "01\n02\n04\n08\n10\n20\n40\n80\n");

    // Image bound to A presented by B's silicon under A's id.
    let b_as_a = std::fs::read_to_string(d.join("b.dev")).unwrap().replace("id=B", "id=A");
    std::fs::write(d.join("imposter.dev"), b_as_a).unwrap();
    let (code, out) = cli(d, &["run", "--image", "a.img", "--device", "imposter.dev", "--registry", "reg.txt"]);
    assert_eq!((code, out.as_str()), (1, ""));

    let mut tampered = first.clone();
    tampered[3] ^= 0x01;
    std::fs::write(d.join("t.img"), &tampered).unwrap();
    let (code, out) = cli(d, &["run", "--image", "t.img", "--device", "a.dev", "--registry", "reg.txt"]);
    assert_eq!((code, out.as_str()), (1, ""));
    assert_eq!(cli(d, &["verify", "--image", "t.img", "--device", "a.dev", "--registry", "reg.txt"]).0, 1);

    std::fs::write(d.join("short.img"), &first[..100]).unwrap();
    assert_eq!(cli(d, &["verify", "--image", "short.img", "--device", "a.dev", "--registry", "reg.txt"]).0, 2);
    std::fs::write(d.join("bad.hex"), "40000\n").unwrap();
    assert_eq!(cli(d, &["bind", "--hex", "bad.hex", "--registry", "reg.txt", "--device-id", "A", "-o", "x.img"]).0, 2);
    assert_eq!(cli(d, &["bind", "--hex", hex, "--registry", "reg.txt", "--device-id", "A", "--bram-words", "16", "-o", "x.img"]).0, 2);
    assert_eq!(cli(d, &["frobnicate"]).0, 2);
}
