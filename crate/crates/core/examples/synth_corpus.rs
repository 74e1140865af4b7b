//! Writes a synthetic PGM corpus: `synth_corpus DIR SEED COUNT SIDE`.

use std::process::ExitCode;

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let [dir, seed, count, side] = &args[..] else {
        eprintln!("usage: synth_corpus DIR SEED COUNT SIDE");
        return ExitCode::FAILURE;
    };
    let (Ok(seed), Ok(count), Ok(side)) = (seed.parse::<u64>(), count.parse::<usize>(), side.parse::<usize>()) else {
        eprintln!("SEED, COUNT and SIDE must be non-negative integers");
        return ExitCode::FAILURE;
    };
    let run = || -> Result<(), Box<dyn std::error::Error>> {
        std::fs::create_dir_all(dir)?;
        for (i, frame) in qtmtt::synth::corpus(seed, count, side, side)?.iter().enumerate() {
            frame.write_pgm(format!("{dir}/img{i:03}.pgm"))?;
        }
        Ok(())
    };
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
