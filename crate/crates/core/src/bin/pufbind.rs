use std::error::Error;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use pufbind::authenticator::{Authenticator, Verdict, DEFAULT_CLOCK_HZ};
use pufbind::image::{self, BramGeometry, DEFAULT_BRAM_WORDS};
use pufbind::picoblaze::{self, CoreState};
use pufbind::puf::{DeviceModel, DEFAULT_NOISE};
use pufbind::{FuzzyParams, Registry};

type CliResult = Result<ExitCode, Box<dyn Error>>;

const EXIT_FAIL: u8 = 1;
const EXIT_USAGE: u8 = 2;

#[derive(Parser)]
#[command(name = "pufbind", version, about = "Bind program binaries to PUF-bearing devices and authenticate them before execution")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Manufacture a simulated device and write its model file.
    NewDevice {
        /// Creation seed.
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_NOISE)]
        noise: f64,
        /// Device id; derived from the seed when omitted.
        #[arg(long)]
        id: Option<String>,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Record <SHA256_K0, HD0> for a device.
    Enroll {
        #[arg(long)]
        device: PathBuf,
        #[arg(long)]
        registry: PathBuf,
        /// Encode seed (codeword and salt selection).
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Authenticate the platform against its enrollment record.
    AuthDevice {
        #[arg(long)]
        device: PathBuf,
        #[arg(long)]
        registry: PathBuf,
        /// Read seed for the fresh PUF read.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Pack a .hex program and piggyback its golden signature for one device.
    Bind {
        #[arg(long)]
        hex: PathBuf,
        #[arg(long)]
        registry: PathBuf,
        #[arg(long)]
        device_id: String,
        #[arg(long, default_value_t = DEFAULT_BRAM_WORDS)]
        bram_words: usize,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Authenticate a bound image on a device and print the report.
    Verify {
        #[command(flatten)]
        auth: AuthArgs,
    },
    /// Authenticate, then execute on Pass and print each port write.
    Run {
        #[command(flatten)]
        auth: AuthArgs,
        #[arg(long, default_value_t = 64)]
        max_steps: u64,
    },
    /// Write the ring-counter demo program in .hex format.
    DemoProgram {
        #[arg(long, short)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct AuthArgs {
    #[arg(long)]
    image: PathBuf,
    #[arg(long)]
    device: PathBuf,
    #[arg(long)]
    registry: PathBuf,
    /// Read seed for the fresh PUF read.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_CLOCK_HZ)]
    clock_hz: u64,
    #[arg(long, default_value_t = DEFAULT_BRAM_WORDS)]
    bram_words: usize,
}

fn read_device(path: &Path) -> Result<DeviceModel, Box<dyn Error>> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    Ok(text.parse()?)
}

fn verdict_code(v: Verdict) -> ExitCode {
    match v {
        Verdict::Pass => ExitCode::SUCCESS,
        Verdict::Fail => ExitCode::from(EXIT_FAIL),
    }
}

/// Returns the rendered report, the gate and the loaded image.
fn authenticate(args: &AuthArgs) -> Result<(pufbind::AuthReport, pufbind::ExecutionGate, pufbind::BramImage), Box<dyn Error>> {
    let geometry = BramGeometry::new(args.bram_words)?;
    let image = image::read_image(&args.image, geometry)?;
    let device = read_device(&args.device)?;
    let record = Registry::new(&args.registry).lookup(device.id())?;
    let unit = Authenticator::new(geometry, args.clock_hz)?;
    let (report, gate) = unit.authenticate(&image, &device, &record.helper, args.seed)?;
    Ok((report, gate, image))
}

fn execute(command: Command) -> CliResult {
    match command {
        Command::NewDevice { seed, noise, id, out } => {
            let device = match id {
                Some(id) => DeviceModel::create_with_id(id, seed, noise)?,
                None => DeviceModel::create(seed, noise)?,
            };
            fs::write(&out, device.to_file_string())?;
            println!("{}", device.id());
        }
        Command::Enroll { device, registry, seed } => {
            let device = read_device(&device)?;
            let record = Registry::new(registry).enroll(&device, &FuzzyParams::default(), seed)?;
            print!("device_id={}\nsha256_k0={}\n{}", record.device_id, record.sha256_k0, record.helper.to_file_string());
        }
        Command::AuthDevice { device, registry, seed } => {
            let device = read_device(&device)?;
            let verdict = Registry::new(registry).auth_device(&device, seed)?;
            println!("device_id={}\nverdict={verdict}", device.id());
            return Ok(verdict_code(verdict));
        }
        Command::Bind { hex, registry, device_id, bram_words, out } => {
            let text = fs::read_to_string(&hex).map_err(|e| format!("{}: {e}", hex.display()))?;
            let prog = image::parse_hex(&text)?;
            let record = Registry::new(registry).lookup(&device_id)?;
            let geometry = BramGeometry::new(bram_words)?;
            let img = image::bind_image(&prog, geometry, &record.sha256_k0)?;
            image::write_image(&out, &img)?;
            println!("instructions={}\nbytes={}\nsha_exor_reference={}", prog.len(), geometry.size_bytes(), img.signature());
        }
        Command::Verify { auth } => {
            let (report, _, _) = authenticate(&auth)?;
            print!("{}", report.render());
            return Ok(verdict_code(report.verdict));
        }
        Command::Run { auth, max_steps } => {
            let (report, gate, image) = authenticate(&auth)?;
            eprint!("{}", report.render());
            if report.verdict == Verdict::Fail {
                eprintln!("execution disabled: instructions_retired=0");
                return Ok(verdict_code(report.verdict));
            }
            let outcome = picoblaze::run(CoreState::new(), &image, &gate, max_steps)?;
            for value in &outcome.port_writes {
                println!("{value:02x}");
            }
            eprintln!("instructions_retired={}", outcome.state.instructions_retired);
        }
        Command::DemoProgram { out } => {
            fs::write(&out, picoblaze::ring_counter_program().to_hex_string())?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}
