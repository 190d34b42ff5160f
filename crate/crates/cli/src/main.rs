use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lrwpan::frame::{self, Address, AddressInfo, AddrMode, FrameControl, FrameError, FrameType};
use lrwpan::iqfile::{self, IqFileError};
use lrwpan::modem::{self, ModemConfig, ModemError};
use lrwpan::phy::{self, PhyError};
use lrwpan::sim::config::{format_report, ModeName, SimSpec};
use lrwpan::sim::{run_session, SessionReport, SimError};

const EXIT_CODES: &str = "\
Exit status:
  0  success
  1  usage or configuration error
  2  frame codec error (bad FCS, malformed frame, no frame found)
  3  PHY error (acquisition failed, buffer too short)
  4  I/O error";

#[derive(Parser)]
#[command(name = "lrwpan", version, about = "IEEE 802.15.4 codec, O-QPSK modem and link simulator", after_help = EXIT_CODES)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build or parse MAC frames.
    #[command(subcommand)]
    Frame(FrameCmd),
    /// Spread and modulate a PPDU into an I/Q file.
    Modulate(ModulateArgs),
    /// Recover a PPDU from an I/Q file.
    Demodulate(DemodulateArgs),
    /// Run a link simulation session.
    Simulate(SimulateArgs),
    /// Mean packet error rate over a range of seeds.
    Sweep(SweepArgs),
}

#[derive(Subcommand)]
enum FrameCmd {
    /// Print the hex of a new MPDU (or PPDU with --ppdu).
    Build(BuildArgs),
    /// Print the fields of an MPDU and its FCS verdict.
    Parse {
        /// MPDU as hex.
        hex: String,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum TypeArg {
    Beacon,
    Data,
    Ack,
    Command,
}

#[derive(Args)]
struct BuildArgs {
    #[arg(long = "type", value_enum, default_value = "data")]
    frame_type: TypeArg,
    /// Sequence number, decimal or 0x-prefixed.
    #[arg(long, default_value = "0", value_parser = parse_u8)]
    seq: u8,
    /// Destination PAN id.
    #[arg(long, value_parser = parse_u16)]
    dest_pan: Option<u16>,
    /// Destination address: up to 4 hex digits is short, more is extended.
    #[arg(long, value_parser = parse_address)]
    dest: Option<Address>,
    /// Source PAN id. Omitted or equal to the destination PAN gives an
    /// intra-PAN frame.
    #[arg(long, value_parser = parse_u16)]
    src_pan: Option<u16>,
    #[arg(long, value_parser = parse_address)]
    src: Option<Address>,
    #[arg(long)]
    ack_request: bool,
    #[arg(long)]
    frame_pending: bool,
    /// Payload as hex.
    #[arg(long, default_value = "")]
    payload: String,
    /// Wrap the MPDU in preamble, SFD and length.
    #[arg(long)]
    ppdu: bool,
}

#[derive(Args)]
struct ModemArgs {
    /// Half-sine peak amplitude.
    #[arg(long, default_value_t = ModemConfig::default().amplitude)]
    amplitude: i16,
    /// Chips per second; the sample rate is twice this.
    #[arg(long, default_value_t = ModemConfig::default().chip_rate)]
    chip_rate: u32,
    /// Carrier frequency in Hz for --passband.
    #[arg(long, default_value_t = ModemConfig::default().if_frequency)]
    if_frequency: f64,
}

impl ModemArgs {
    fn config(&self) -> Result<ModemConfig, Failure> {
        let cfg = ModemConfig { chip_rate: self.chip_rate, amplitude: self.amplitude, if_frequency: self.if_frequency };
        cfg.validate().map_err(|e| Failure::Usage(e.to_string()))?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct ModulateArgs {
    /// PPDU as hex.
    ppdu: String,
    /// Output sample file; the sidecar goes to `<output>.meta`.
    #[arg(short, long)]
    output: PathBuf,
    /// Write real passband samples instead of baseband I/Q.
    #[arg(long)]
    passband: bool,
    #[command(flatten)]
    modem: ModemArgs,
}

#[derive(Args)]
struct DemodulateArgs {
    /// Sample file with its `.meta` sidecar.
    input: PathBuf,
    /// The file holds passband samples.
    #[arg(long)]
    passband: bool,
}

#[derive(Args)]
struct SimulateArgs {
    /// Session configuration file (key = value lines).
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// RNG seed; required unless the config sets one.
    #[arg(long)]
    seed: Option<u64>,
    /// Write the event log here.
    #[arg(long)]
    log: Option<PathBuf>,
    /// Chip-flip probabilities; one report block per value.
    #[arg(long, value_delimiter = ',')]
    chip_flip: Vec<f64>,
    /// Use sample-level Gaussian noise of this sigma.
    #[arg(long)]
    awgn: Option<f64>,
    /// Extra `key=value` settings applied after the config file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Chip-flip probabilities to sweep.
    #[arg(long, value_delimiter = ',', required = true)]
    chip_flip: Vec<f64>,
    /// Seeds `0..seeds` are averaged.
    #[arg(long, default_value_t = 10)]
    seeds: u64,
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Codec(String),
    Phy(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Self::Usage(_) => 1,
            Self::Codec(_) => 2,
            Self::Phy(_) => 3,
            Self::Io(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            Self::Usage(m) | Self::Codec(m) | Self::Phy(m) | Self::Io(m) => m,
        }
    }
}

impl From<FrameError> for Failure {
    fn from(e: FrameError) -> Self {
        Self::Codec(e.to_string())
    }
}

impl From<ModemError> for Failure {
    fn from(e: ModemError) -> Self {
        Self::Phy(e.to_string())
    }
}

impl From<PhyError> for Failure {
    fn from(e: PhyError) -> Self {
        match e {
            PhyError::Modem(m) => m.into(),
            PhyError::Frame(f) => f.into(),
        }
    }
}

impl From<IqFileError> for Failure {
    fn from(e: IqFileError) -> Self {
        match e {
            IqFileError::Io { .. } => Self::Io(e.to_string()),
            IqFileError::Sidecar { .. } => Self::Usage(e.to_string()),
            IqFileError::Truncated { .. } => Self::Phy(e.to_string()),
        }
    }
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Frame(_) | SimError::Mac(lrwpan::mac::MacError::Frame(_)) => Self::Codec(e.to_string()),
            _ => Self::Usage(e.to_string()),
        }
    }
}

fn parse_int(s: &str) -> Result<u64, String> {
    match s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        Some(h) => u64::from_str_radix(h, 16),
        None => s.parse(),
    }
    .map_err(|e| format!("{s:?}: {e}"))
}

fn parse_u8(s: &str) -> Result<u8, String> {
    u8::try_from(parse_int(s)?).map_err(|_| format!("{s:?} does not fit 8 bits"))
}

fn parse_u16(s: &str) -> Result<u16, String> {
    u16::try_from(parse_int(s)?).map_err(|_| format!("{s:?} does not fit 16 bits"))
}

fn parse_address(s: &str) -> Result<Address, String> {
    let digits = s.trim_start_matches("0x");
    let v = u64::from_str_radix(digits, 16).map_err(|e| format!("{s:?}: {e}"))?;
    if digits.len() <= 4 {
        Ok(Address::Short(v as u16))
    } else {
        Ok(Address::Extended(v))
    }
}

fn decode_hex(what: &str, s: &str) -> Result<Vec<u8>, Failure> {
    let s: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    hex::decode(&s).map_err(|e| Failure::Usage(format!("{what}: {e}")))
}

fn frame_build(a: &BuildArgs) -> Result<String, Failure> {
    let frame_type = match a.frame_type {
        TypeArg::Beacon => FrameType::Beacon,
        TypeArg::Data => FrameType::Data,
        TypeArg::Ack => FrameType::Ack,
        TypeArg::Command => FrameType::MacCommand,
    };
    let payload = decode_hex("payload", &a.payload)?;
    let mut fcf = FrameControl::new(frame_type);
    fcf.ack_request = a.ack_request;
    fcf.frame_pending = a.frame_pending;
    fcf.dest_addr_mode = a.dest.map_or(AddrMode::None, |d| d.mode());
    fcf.src_addr_mode = a.src.map_or(AddrMode::None, |s| s.mode());
    fcf.intra_pan = a.dest.is_some() && a.src.is_some() && a.src_pan.is_none_or(|p| Some(p) == a.dest_pan);
    let need_pan = |present: bool, pan: Option<u16>, flag: &str| -> Result<Option<u16>, Failure> {
        match (present, pan) {
            (true, None) => Err(Failure::Usage(format!("{flag} is required with that address"))),
            (true, p) => Ok(p),
            (false, _) => Ok(None),
        }
    };
    let dest_pan = need_pan(a.dest.is_some(), a.dest_pan, "--dest-pan")?;
    let src_pan = if fcf.intra_pan { None } else { need_pan(a.src.is_some(), a.src_pan, "--src-pan")? };
    let addr = AddressInfo { dest_pan, dest_addr: a.dest, src_pan, src_addr: a.src };
    let mpdu = frame::build_frame(&fcf, a.seq, &addr, &payload)?;
    let out = if a.ppdu { frame::build_ppdu(&mpdu)? } else { mpdu };
    Ok(format!("{}\n", hex::encode(out)))
}

fn frame_parse(hex_in: &str) -> Result<String, Failure> {
    let bytes = decode_hex("frame", hex_in)?;
    match frame::parse_mpdu(&bytes) {
        Ok(m) => {
            let mut out = String::new();
            let f = &m.fcf;
            let opt = |v: Option<String>| v.unwrap_or_else(|| "-".into());
            let _ = writeln!(out, "frame_type={}", format!("{:?}", f.frame_type).to_lowercase());
            let _ = writeln!(out, "security_enabled={}", u8::from(f.security_enabled));
            let _ = writeln!(out, "frame_pending={}", u8::from(f.frame_pending));
            let _ = writeln!(out, "ack_request={}", u8::from(f.ack_request));
            let _ = writeln!(out, "intra_pan={}", u8::from(f.intra_pan));
            let _ = writeln!(out, "dest_addr_mode={}", format!("{:?}", f.dest_addr_mode).to_lowercase());
            let _ = writeln!(out, "src_addr_mode={}", format!("{:?}", f.src_addr_mode).to_lowercase());
            let _ = writeln!(out, "seq={}", m.seq);
            let _ = writeln!(out, "dest_pan={}", opt(m.addr.dest_pan.map(|p| format!("{p:04x}"))));
            let _ = writeln!(out, "dest_addr={}", opt(m.addr.dest_addr.map(|a| a.to_string())));
            let _ = writeln!(out, "src_pan={}", opt(m.addr.src_pan.map(|p| format!("{p:04x}"))));
            let _ = writeln!(out, "src_addr={}", opt(m.addr.src_addr.map(|a| a.to_string())));
            let _ = writeln!(out, "payload={}", hex::encode(&m.payload));
            let _ = writeln!(out, "fcs={:04x}", m.fcs);
            out.push_str("FCS: OK\n");
            Ok(out)
        }
        Err(FrameError::FcsMismatch { computed, received }) => {
            println!("fcs={received:04x}\ncomputed_fcs={computed:04x}\nFCS: FAIL");
            Err(Failure::Codec(format!("FCS mismatch: computed {computed:04x}, received {received:04x}")))
        }
        Err(e) => Err(e.into()),
    }
}

fn cmd_modulate(a: &ModulateArgs) -> Result<String, Failure> {
    let cfg = a.modem.config()?;
    let ppdu = decode_hex("ppdu", &a.ppdu)?;
    if ppdu.is_empty() {
        return Err(Failure::Usage("empty PPDU".into()));
    }
    let buf = phy::transmit(&ppdu, &cfg);
    if a.passband {
        iqfile::write_passband(&a.output, &modem::mix_up(&buf, &cfg), &cfg)?;
    } else {
        iqfile::write_iq(&a.output, &buf, &cfg)?;
    }
    let airtime = modem::octet_airtime(ppdu.len(), &cfg) * 1_000_000;
    let us = *airtime.numer() as f64 / *airtime.denom() as f64;
    Ok(format!(
        "octets={}\nsamples={}\nsample_rate={}\nairtime_us={us:.3}\nairtime_ms={:.3}\n",
        ppdu.len(),
        buf.len(),
        cfg.sample_rate(),
        us / 1000.0
    ))
}

fn cmd_demodulate(a: &DemodulateArgs) -> Result<String, Failure> {
    let (buf, cfg) = if a.passband {
        let (samples, cfg) = iqfile::read_passband(&a.input)?;
        (modem::mix_down(&samples, &cfg), cfg)
    } else {
        iqfile::read_iq(&a.input)?
    };
    let rx = phy::receive(&buf, &cfg)?;
    let ppdu = frame::build_ppdu(&rx.mpdu)?;
    let mut out = format!("preamble_start={}\nppdu={}\nmpdu={}\n", rx.preamble_start, hex::encode(&ppdu), hex::encode(&rx.mpdu));
    match frame::parse_mpdu(&rx.mpdu) {
        Ok(_) => {
            out.push_str("FCS: OK\n");
            Ok(out)
        }
        Err(e) => {
            out.push_str("FCS: FAIL\n");
            print!("{out}");
            Err(e.into())
        }
    }
}

fn load_spec(config: Option<&Path>, sets: &[String]) -> Result<SimSpec, Failure> {
    let mut spec = match config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
            SimSpec::parse(&text)?
        }
        None => SimSpec::default(),
    };
    for kv in sets {
        let (k, v) = kv.split_once('=').ok_or_else(|| Failure::Usage(format!("--set {kv:?} is not key=value")))?;
        spec.set(k.trim(), v.trim())?;
    }
    Ok(spec)
}

fn run(spec: &SimSpec) -> Result<SessionReport, Failure> {
    Ok(run_session(&spec.session()?, &spec.payloads()?)?)
}

fn cmd_simulate(a: &SimulateArgs) -> Result<String, Failure> {
    let mut spec = load_spec(a.config.as_deref(), &a.sets)?;
    if let Some(seed) = a.seed {
        spec.seed = Some(seed);
    }
    if let Some(sigma) = a.awgn {
        spec.mode = ModeName::Awgn;
        spec.awgn_sigma = sigma;
    }
    let mut out = String::new();
    let mut log = String::new();
    if a.chip_flip.is_empty() {
        let report = run(&spec)?;
        out.push_str(&format_report(&report));
        log.push_str(&report.log.to_text());
    } else {
        for (k, &p) in a.chip_flip.iter().enumerate() {
            spec.mode = ModeName::ChipFlip;
            spec.chip_flip_p = p;
            let report = run(&spec)?;
            if k > 0 {
                out.push('\n');
            }
            let _ = writeln!(out, "chip_flip_p={p}");
            out.push_str(&format_report(&report));
            let _ = writeln!(log, "# chip_flip_p={p}");
            log.push_str(&report.log.to_text());
        }
    }
    if let Some(path) = &a.log {
        fs::write(path, log).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
    }
    Ok(out)
}

fn cmd_sweep(a: &SweepArgs) -> Result<String, Failure> {
    let mut spec = load_spec(a.config.as_deref(), &a.sets)?;
    if a.seeds == 0 {
        return Err(Failure::Usage("--seeds must be positive".into()));
    }
    spec.mode = ModeName::ChipFlip;
    let mut out = String::new();
    for &p in &a.chip_flip {
        spec.chip_flip_p = p;
        let mut total = 0.0;
        for seed in 0..a.seeds {
            spec.seed = Some(seed);
            total += run(&spec)?.stats.per();
        }
        let _ = writeln!(out, "chip_flip_p={p} seeds={} mean_per={:.6}", a.seeds, total / a.seeds as f64);
    }
    Ok(out)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Frame(FrameCmd::Build(a)) => frame_build(a),
        Command::Frame(FrameCmd::Parse { hex }) => frame_parse(hex),
        Command::Modulate(a) => cmd_modulate(a),
        Command::Demodulate(a) => cmd_demodulate(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Sweep(a) => cmd_sweep(a),
    };
    match result {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
