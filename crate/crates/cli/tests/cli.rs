//! End-to-end tests of the `rankspec` binary against a synthetic corpus.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rankspec_core::synth;

fn rankspec() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rankspec"))
}

fn run_ok(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("spawn rankspec");
    assert!(
        out.status.success(),
        "command failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn corpus(dir: &Path) -> (PathBuf, PathBuf) {
    synth::write_demo_corpus(dir, 6, 3, 16000, 1.5, 42).unwrap()
}

#[test]
fn rank_analyze_vo_exact_mode_keeps_deltas_nonpositive() {
    let dir = tempfile::tempdir().unwrap();
    let (speech, _) = corpus(dir.path());
    let out_dir = dir.path().join("rank");
    run_ok(rankspec().args([
        "rank-analyze",
        "--preset",
        "fig2-16k",
        "--task",
        "vo",
        "--mels",
        "80",
        "--exact-rank",
        "--speech",
        speech.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]));

    let jsonl = std::fs::read_to_string(out_dir.join("reports-vo-80.jsonl")).unwrap();
    assert_eq!(jsonl.lines().count(), 6);
    for line in jsonl.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(
            v["delta"].as_i64().unwrap() <= 0,
            "positive delta in {line}"
        );
        assert_eq!(v["task"], "vo");
    }

    let csv = std::fs::read_to_string(out_dir.join("hist-vo-80.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "bin_lo,bin_hi,count");
    let total: u64 = lines
        .map(|l| l.split(',').nth(2).unwrap().parse::<u64>().unwrap())
        .sum();
    assert_eq!(total, 6);
}

#[test]
fn rank_analyze_is_deterministic_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let (speech, noise) = corpus(dir.path());
    let run = |out: &Path| {
        run_ok(rankspec().args([
            "rank-analyze",
            "--task",
            "se",
            "--speech",
            speech.to_str().unwrap(),
            "--noise",
            noise.to_str().unwrap(),
            "--seed",
            "9",
            "--out",
            out.to_str().unwrap(),
        ]));
    };
    let out1 = dir.path().join("r1");
    let out2 = dir.path().join("r2");
    run(&out1);
    run(&out2);
    for name in [
        "reports-se-mild.jsonl",
        "reports-se-heavy.jsonl",
        "hist-se-mild.csv",
    ] {
        let a = std::fs::read(out1.join(name)).unwrap();
        let b = std::fs::read(out2.join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between identical runs");
    }
}

#[test]
fn rank_analyze_rejects_empty_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.txt");
    std::fs::write(&empty, "# no clips\n").unwrap();
    let out = rankspec()
        .args([
            "rank-analyze",
            "--task",
            "vo",
            "--speech",
            empty.to_str().unwrap(),
            "--out",
            dir.path().join("x").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(!out.stderr.is_empty());
}

#[test]
fn degrade_denoise_hits_target_snr() {
    let dir = tempfile::tempdir().unwrap();
    let speech_wav = dir.path().join("s.wav");
    let noise_wav = dir.path().join("n.wav");
    rankspec_core::audio::save_wav(
        &synth::speech_like(1, 16000, 1.0),
        &speech_wav,
        rankspec_core::audio::WavEncoding::Float32,
    )
    .unwrap();
    rankspec_core::audio::save_wav(
        &synth::noise_like(2, 16000, 1.0),
        &noise_wav,
        rankspec_core::audio::WavEncoding::Float32,
    )
    .unwrap();
    let out_wav = dir.path().join("x.wav");
    run_ok(rankspec().args([
        "degrade",
        "--task",
        "denoise",
        "--snr",
        "5",
        "--speech",
        speech_wav.to_str().unwrap(),
        "--noise",
        noise_wav.to_str().unwrap(),
        "--out",
        out_wav.to_str().unwrap(),
    ]));

    let sidecar: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("x.wav.json")).unwrap())
            .unwrap();
    let measured = sidecar["measured_snr_db"].as_f64().unwrap();
    assert!((measured - 5.0).abs() < 1e-3, "measured {measured}");

    // verify from the artifacts themselves, not just the sidecar
    let speech = rankspec_core::audio::load_wav(&speech_wav).unwrap();
    let mixture = rankspec_core::audio::load_wav(&out_wav).unwrap();
    let residual = rankspec_core::audio::Waveform::new(
        mixture
            .samples()
            .iter()
            .zip(speech.samples())
            .map(|(x, s)| x - s)
            .collect(),
        16000,
    )
    .unwrap();
    let snr = rankspec_core::degrade::measured_snr(&speech, &residual).unwrap();
    // float32 wav quantization adds noise around the f64 sidecar value
    assert!((snr - 5.0).abs() < 1e-2, "snr from artifacts {snr}");
}

#[test]
fn degrade_vocode_writes_wav_and_provenance() {
    let dir = tempfile::tempdir().unwrap();
    let speech_wav = dir.path().join("s.wav");
    rankspec_core::audio::save_wav(
        &synth::harmonic_signal(3, 24000, 0.8),
        &speech_wav,
        rankspec_core::audio::WavEncoding::Float32,
    )
    .unwrap();
    let out_wav = dir.path().join("v.wav");
    run_ok(rankspec().args([
        "degrade",
        "--task",
        "vocode",
        "--preset",
        "vocoder-24k",
        "--mels",
        "80",
        "--phase",
        "griffin-lim",
        "--gl-iters",
        "32",
        "--speech",
        speech_wav.to_str().unwrap(),
        "--out",
        out_wav.to_str().unwrap(),
        "--seed",
        "4",
    ]));
    let w = rankspec_core::audio::load_wav(&out_wav).unwrap();
    assert_eq!(w.sample_rate_hz(), 24000);
    assert!(w.samples().iter().any(|&s| s != 0.0));
    let sidecar: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("v.wav.json")).unwrap())
            .unwrap();
    assert_eq!(sidecar["n_mels"], 80);
    assert_eq!(sidecar["proxy_phase"]["kind"], "griffin_lim");
    assert_eq!(sidecar["proxy_phase"]["iterations"], 32);
}

#[test]
fn degrade_denoise_without_noise_fails() {
    let dir = tempfile::tempdir().unwrap();
    let speech_wav = dir.path().join("s.wav");
    rankspec_core::audio::save_wav(
        &synth::speech_like(1, 16000, 0.5),
        &speech_wav,
        rankspec_core::audio::WavEncoding::Float32,
    )
    .unwrap();
    let out = rankspec()
        .args([
            "degrade",
            "--task",
            "denoise",
            "--speech",
            speech_wav.to_str().unwrap(),
            "--out",
            dir.path().join("x.wav").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(!out.status.success());
}

#[test]
fn batchgen_is_byte_deterministic_and_validates_p() {
    let dir = tempfile::tempdir().unwrap();
    let (speech, noise) = corpus(dir.path());
    let run = |out: &Path, jobs: &str| {
        run_ok(rankspec().args([
            "batchgen",
            "--p",
            "0.5",
            "--snr-lo",
            "0",
            "--snr-hi",
            "10",
            "--batches",
            "4",
            "--batch-size",
            "2",
            "--segment",
            "8192",
            "--seed",
            "7",
            "--speech",
            speech.to_str().unwrap(),
            "--noise",
            noise.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--jobs",
            jobs,
        ]));
    };
    let out1 = dir.path().join("b1");
    let out2 = dir.path().join("b2");
    run(&out1, "1");
    run(&out2, "4");
    let mut names: Vec<String> = std::fs::read_dir(&out1)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(names.len(), 5); // 4 batches + summary
    for name in &names {
        let a = std::fs::read(out1.join(name)).unwrap();
        let b = std::fs::read(out2.join(name)).unwrap();
        assert_eq!(a, b, "{name} differs across runs/jobs");
    }

    // invalid probability exits nonzero
    let bad = rankspec()
        .args([
            "batchgen",
            "--p",
            "1.5",
            "--batches",
            "1",
            "--speech",
            speech.to_str().unwrap(),
            "--noise",
            noise.to_str().unwrap(),
            "--out",
            dir.path().join("bad").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(!bad.status.success());
}

#[test]
fn batchgen_reads_config_file_with_flag_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let (speech, noise) = corpus(dir.path());
    let cfg_path = dir.path().join("batch.cfg");
    std::fs::write(
        &cfg_path,
        format!(
            "# demo config\np = 1.0\nbatches = 2\nbatch-size = 1\nsegment = 8192\nseed = 3\n\
             speech = {}\nnoise = {}\n",
            speech.display(),
            noise.display()
        ),
    )
    .unwrap();
    let out_dir = dir.path().join("from-config");
    // --batches overrides the config's 2
    run_ok(rankspec().args([
        "batchgen",
        "--config",
        cfg_path.to_str().unwrap(),
        "--batches",
        "3",
        "--out",
        out_dir.to_str().unwrap(),
    ]));
    let summary: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(out_dir.join("summary-s3.rsm.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(summary["format"], "RSM1");
    assert_eq!(summary["n_batches"], 3);
    // p = 1.0 from the config: every batch is a denoising batch
    assert_eq!(summary["denoising_batches"], 3);
}

#[test]
fn metrics_identity_pair_is_zero_and_mismatch_fails() {
    let dir = tempfile::tempdir().unwrap();
    let wav = dir.path().join("a.wav");
    rankspec_core::audio::save_wav(
        &synth::speech_like(5, 16000, 1.0),
        &wav,
        rankspec_core::audio::WavEncoding::Float32,
    )
    .unwrap();
    let list = dir.path().join("list.txt");
    std::fs::write(&list, format!("{}\n", wav.display())).unwrap();

    let out_dir = dir.path().join("metrics");
    run_ok(rankspec().args([
        "metrics",
        "--ref-list",
        list.to_str().unwrap(),
        "--est-list",
        list.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]));
    let csv = std::fs::read_to_string(out_dir.join("summary.csv")).unwrap();
    let row = csv.lines().nth(1).unwrap();
    let cols: Vec<&str> = row.split(',').collect();
    assert_eq!(cols[0], "a");
    assert_eq!(cols[1].parse::<f64>().unwrap(), 0.0); // mcd
    assert_eq!(cols[2].parse::<f64>().unwrap(), 0.0); // lsd
    assert_eq!(cols[3].parse::<f64>().unwrap(), 100.0); // si-snr cap

    let jsonl = std::fs::read_to_string(out_dir.join("metrics.jsonl")).unwrap();
    assert_eq!(jsonl.lines().count(), 3);

    // unpaired lists exit nonzero
    let two = dir.path().join("two.txt");
    std::fs::write(&two, format!("{}\n{}\n", wav.display(), wav.display())).unwrap();
    let bad = rankspec()
        .args([
            "metrics",
            "--ref-list",
            list.to_str().unwrap(),
            "--est-list",
            two.to_str().unwrap(),
            "--out",
            dir.path().join("m2").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(!bad.status.success());
}

#[test]
fn metrics_on_vocode_degraded_corpus_show_distortion() {
    let dir = tempfile::tempdir().unwrap();
    let mut ref_lines = String::new();
    let mut est_lines = String::new();
    for i in 0..3u64 {
        let clean = synth::speech_like(60 + i, 16000, 1.0);
        let ref_path = dir.path().join(format!("ref{i}.wav"));
        rankspec_core::audio::save_wav(
            &clean,
            &ref_path,
            rankspec_core::audio::WavEncoding::Float32,
        )
        .unwrap();
        let est_path = dir.path().join(format!("est{i}.wav"));
        run_ok(rankspec().args([
            "degrade",
            "--task",
            "vocode",
            "--preset",
            "fig2-16k",
            "--mels",
            "60",
            "--phase",
            "zero",
            "--speech",
            ref_path.to_str().unwrap(),
            "--out",
            est_path.to_str().unwrap(),
        ]));
        // align lengths: istft output is trimmed to whole hops
        let est = rankspec_core::audio::load_wav(&est_path).unwrap();
        let n = est.len().min(clean.len());
        let clean_cut =
            rankspec_core::audio::Waveform::new(clean.samples()[..n].to_vec(), 16000).unwrap();
        let est_cut =
            rankspec_core::audio::Waveform::new(est.samples()[..n].to_vec(), 16000).unwrap();
        rankspec_core::audio::save_wav(
            &clean_cut,
            &ref_path,
            rankspec_core::audio::WavEncoding::Float32,
        )
        .unwrap();
        rankspec_core::audio::save_wav(
            &est_cut,
            &est_path,
            rankspec_core::audio::WavEncoding::Float32,
        )
        .unwrap();
        ref_lines.push_str(&format!("{}\n", ref_path.display()));
        est_lines.push_str(&format!("{}\n", est_path.display()));
    }
    let ref_list = dir.path().join("refs.txt");
    let est_list = dir.path().join("ests.txt");
    std::fs::write(&ref_list, ref_lines).unwrap();
    std::fs::write(&est_list, est_lines).unwrap();

    let out_dir = dir.path().join("m");
    run_ok(rankspec().args([
        "metrics",
        "--ref-list",
        ref_list.to_str().unwrap(),
        "--est-list",
        est_list.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]));
    let csv = std::fs::read_to_string(out_dir.join("summary.csv")).unwrap();
    let mut mean_mcd = 0.0;
    for row in csv.lines().skip(1) {
        mean_mcd += row.split(',').nth(1).unwrap().parse::<f64>().unwrap() / 3.0;
    }
    assert!(
        mean_mcd > 0.0,
        "vocode degradation should cost MCD, got {mean_mcd}"
    );
}

#[test]
fn filterbank_export_roundtrips() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("bank.rsb");
    run_ok(rankspec().args([
        "filterbank",
        "--preset",
        "fig2-16k",
        "--mels",
        "60",
        "--out",
        out.to_str().unwrap(),
    ]));
    let bank = rankspec_core::mel::import_filterbank(&out).unwrap();
    assert_eq!(bank.n_mels(), 60);
    assert_eq!(bank.n_bins(), 257);
}
