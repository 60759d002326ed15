//! Fabricate a small deterministic demo corpus (wav files + manifests) so
//! the CLI can be exercised without external audio data.
//!
//! Usage: `cargo run -p rankspec-core --example make_demo_corpus -- OUT_DIR [N_SPEECH] [N_NOISE]`

use rankspec_core::synth::write_demo_corpus;

fn main() {
    let mut args = std::env::args().skip(1);
    let out = args.next().unwrap_or_else(|| {
        eprintln!("usage: make_demo_corpus OUT_DIR [N_SPEECH] [N_NOISE]");
        std::process::exit(2);
    });
    let n_speech: usize = args
        .next()
        .map(|v| v.parse().expect("N_SPEECH"))
        .unwrap_or(50);
    let n_noise: usize = args
        .next()
        .map(|v| v.parse().expect("N_NOISE"))
        .unwrap_or(10);

    let (speech, noise) =
        write_demo_corpus(&out, n_speech, n_noise, 16000, 4.0, 0).expect("writing demo corpus");
    println!("speech manifest: {}", speech.display());
    println!("noise manifest:  {}", noise.display());
}
